//! C ABI over the `offline-co` library.
//!
//! Every function returns an [`OcStatus`]. On failure a message is stored
//! per thread and can be read with [`oc_last_error_message`]. Coordinates
//! are passed as `2 * n_cities` interleaved `x, y` values in `[0, 1]`;
//! routes are `n_cities` zero-based city indices.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use offline_co::anneal::{anneal, SaConfig};
use offline_co::objective::{CostMode, EdgeCache, SurrogateObjective};
use offline_co::surrogate::{load_model, RankingModel};
use offline_co::tsp::{tour_length, ProblemInstance, Route};
use offline_co::Error;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Status codes; the numeric values match the command-line exit codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OcStatus {
    Ok = 0,
    InvalidArgument = 2,
    Io = 3,
    InvalidData = 4,
    Numerical = 5,
    Panic = 6,
}

/// Cost used by [`oc_optimize`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OcMode {
    /// Negated surrogate score only.
    Baseline = 0,
    /// Negated score plus the out-of-distribution penalty stored in the model.
    Proposed = 1,
}

/// Opaque handle to a loaded ranking model.
pub struct OcModel {
    inner: RankingModel,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> OcStatus {
    match err.exit_code() {
        2 => OcStatus::InvalidArgument,
        3 => OcStatus::Io,
        5 => OcStatus::Numerical,
        _ => OcStatus::InvalidData,
    }
}

fn guard(body: impl FnOnce() -> Result<(), Error>) -> OcStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => OcStatus::Ok,
        Ok(Err(e)) => {
            set_last_error(e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_last_error("internal panic".into());
            OcStatus::Panic
        }
    }
}

fn null(what: &str) -> Error {
    Error::InvalidArgument(format!("{what} is null"))
}

unsafe fn instance_from(coords: *const f64, n_cities: usize) -> Result<ProblemInstance, Error> {
    if coords.is_null() {
        return Err(null("coords"));
    }
    let flat = std::slice::from_raw_parts(coords, 2 * n_cities);
    let cities = flat.chunks_exact(2).map(|c| [c[0], c[1]]).collect();
    ProblemInstance::new(0, cities)
}

unsafe fn route_from(route: *const usize, n_cities: usize) -> Result<Route, Error> {
    if route.is_null() {
        return Err(null("route"));
    }
    Route::new(std::slice::from_raw_parts(route, n_cities).to_vec(), n_cities)
}

unsafe fn model_ref<'a>(model: *const OcModel) -> Result<&'a RankingModel, Error> {
    model.as_ref().map(|m| &m.inner).ok_or_else(|| null("model"))
}

/// Message of the last failed call on this thread, or null if none.
/// The pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn oc_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Loads a model file. On success `*out` owns a handle to release with
/// [`oc_model_free`].
///
/// # Safety
/// `path` must be a NUL-terminated UTF-8 string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn oc_model_load(path: *const c_char, out: *mut *mut OcModel) -> OcStatus {
    guard(|| {
        if path.is_null() {
            return Err(null("path"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let path = CStr::from_ptr(path)
            .to_str()
            .map_err(|_| Error::InvalidArgument("path is not valid UTF-8".into()))?;
        let inner = load_model(Path::new(path))?;
        *out = Box::into_raw(Box::new(OcModel { inner }));
        Ok(())
    })
}

/// Releases a handle from [`oc_model_load`]. Null is ignored.
///
/// # Safety
/// `model` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn oc_model_free(model: *mut OcModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Whether the model carries Gaussian statistics and cost parameters.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn oc_model_is_calibrated(model: *const OcModel) -> bool {
    model.as_ref().is_some_and(|m| m.inner.is_calibrated())
}

/// Closed tour length of `route` over the given cities.
///
/// # Safety
/// `coords` must hold `2 * n_cities` values, `route` `n_cities` values,
/// and `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn oc_tour_length(
    coords: *const f64,
    n_cities: usize,
    route: *const usize,
    out: *mut f64,
) -> OcStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let instance = instance_from(coords, n_cities)?;
        let route = route_from(route, n_cities)?;
        *out = tour_length(&instance, &route)?;
        Ok(())
    })
}

/// Surrogate score of `route`; higher means a shorter predicted tour.
///
/// # Safety
/// Same buffer requirements as [`oc_tour_length`]; `model` must be live.
#[no_mangle]
pub unsafe extern "C" fn oc_model_score(
    model: *const OcModel,
    coords: *const f64,
    n_cities: usize,
    route: *const usize,
    out: *mut f64,
) -> OcStatus {
    guard(|| {
        let model = model_ref(model)?;
        if out.is_null() {
            return Err(null("out"));
        }
        let instance = instance_from(coords, n_cities)?;
        let route = route_from(route, n_cities)?;
        *out = model.score(&instance, &route)?;
        Ok(())
    })
}

/// Anneals a tour against the surrogate with default schedule settings,
/// `iterations` steps and RNG `seed`. Writes the best route to `out_route`
/// (`n_cities` entries) and its true length to `out_length`.
///
/// # Safety
/// Same buffer requirements as [`oc_tour_length`]; `out_route` must have
/// room for `n_cities` values and `model` must be live.
#[no_mangle]
pub unsafe extern "C" fn oc_optimize(
    model: *const OcModel,
    coords: *const f64,
    n_cities: usize,
    mode: OcMode,
    iterations: usize,
    seed: u64,
    out_route: *mut usize,
    out_length: *mut f64,
) -> OcStatus {
    guard(|| {
        let model = model_ref(model)?;
        if out_route.is_null() || out_length.is_null() {
            return Err(null("output buffer"));
        }
        let instance = instance_from(coords, n_cities)?;
        let cost = match mode {
            OcMode::Baseline => CostMode::Baseline,
            OcMode::Proposed => CostMode::Regularized(
                model
                    .cost_params
                    .ok_or_else(|| Error::Config("model is not calibrated".into()))?,
            ),
        };
        let config = SaConfig {
            iterations,
            seed,
            ..SaConfig::default()
        };
        let cache = EdgeCache::build(model, &instance);
        let objective = SurrogateObjective::new(model, &cache, cost)?;
        let result = anneal(
            &objective,
            &instance,
            &config,
            &mut ChaCha8Rng::seed_from_u64(seed),
            false,
        )?;
        let length = tour_length(&instance, &result.best_route)?;
        std::slice::from_raw_parts_mut(out_route, n_cities).copy_from_slice(result.best_route.order());
        *out_length = length;
        Ok(())
    })
}
