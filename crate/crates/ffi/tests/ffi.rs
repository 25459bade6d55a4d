use std::ffi::{CStr, CString};
use std::path::Path;
use std::ptr;

use offline_co::dataset::generate_training_set;
use offline_co::ood::calibrate_model;
use offline_co::surrogate::{save_model, train, EncoderConfig, RankingModel, TrainConfig};
use offline_co::tsp::{sample_instance, tour_length, Route};
use offline_co_ffi::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn small_model(calibrated: bool) -> RankingModel {
    let ds = generate_training_set(30, 12, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
    let records = ds.as_train().unwrap();
    let encoder = EncoderConfig {
        hidden_dim: 8,
        feature_dim: 4,
        ..EncoderConfig::default()
    };
    let config = TrainConfig {
        epochs: 2,
        pairs_per_epoch: 40,
        ..TrainConfig::default()
    };
    let (mut model, _) = train(records, encoder, config).unwrap();
    if calibrated {
        calibrate_model(&mut model, records, 1e-6, 0.95, 1e6).unwrap();
    }
    model
}

fn load(path: &Path) -> *mut OcModel {
    let c = CString::new(path.to_str().unwrap()).unwrap();
    let mut handle = ptr::null_mut();
    assert_eq!(unsafe { oc_model_load(c.as_ptr(), &mut handle) }, OcStatus::Ok);
    assert!(!handle.is_null());
    handle
}

fn last_error() -> String {
    let p = oc_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn flat(cities: &[[f64; 2]]) -> Vec<f64> {
    cities.iter().flat_map(|c| [c[0], c[1]]).collect()
}

#[test]
fn unit_square_tour_length() {
    let coords = [0.0, 0.0, 1.0, 0.0, 1.0, 1.0, 0.0, 1.0];
    let route = [0usize, 1, 2, 3];
    let mut out = 0.0;
    let status = unsafe { oc_tour_length(coords.as_ptr(), 4, route.as_ptr(), &mut out) };
    assert_eq!(status, OcStatus::Ok);
    assert!((out - 4.0).abs() < 1e-12);
}

#[test]
fn bad_inputs_map_to_status_codes() {
    let coords = [0.0, 0.0, 1.0, 0.0, 1.0, 1.0];
    let mut out = 0.0;
    let dup = [0usize, 0, 2];
    let status = unsafe { oc_tour_length(coords.as_ptr(), 3, dup.as_ptr(), &mut out) };
    assert_eq!(status, OcStatus::InvalidData);
    assert!(last_error().contains("route"));

    let status = unsafe { oc_tour_length(ptr::null(), 3, dup.as_ptr(), &mut out) };
    assert_eq!(status, OcStatus::InvalidArgument);
    assert!(last_error().contains("coords"));

    let outside = [0.0, 0.0, 2.0, 0.0, 1.0, 1.0];
    let ok = [0usize, 1, 2];
    let status = unsafe { oc_tour_length(outside.as_ptr(), 3, ok.as_ptr(), &mut out) };
    assert_eq!(status, OcStatus::InvalidArgument);

    let missing = CString::new("/definitely/not/here.json").unwrap();
    let mut handle = ptr::null_mut();
    assert_eq!(unsafe { oc_model_load(missing.as_ptr(), &mut handle) }, OcStatus::Io);
    assert!(handle.is_null());
    unsafe { oc_model_free(ptr::null_mut()) };
}

#[test]
fn score_and_optimize_through_handle() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.json");
    let model = small_model(true);
    save_model(&model, &path).unwrap();
    let handle = load(&path);
    assert!(unsafe { oc_model_is_calibrated(handle) });

    let inst = sample_instance(0, 15, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
    let coords = flat(inst.cities());
    let route = Route::identity(15);
    let mut score = 0.0;
    let status = unsafe { oc_model_score(handle, coords.as_ptr(), 15, route.order().as_ptr(), &mut score) };
    assert_eq!(status, OcStatus::Ok);
    assert_eq!(score, model.score(&inst, &route).unwrap());

    let run = |mode| {
        let mut best = vec![0usize; 15];
        let mut length = 0.0;
        let status = unsafe {
            oc_optimize(
                handle,
                coords.as_ptr(),
                15,
                mode,
                500,
                7,
                best.as_mut_ptr(),
                &mut length,
            )
        };
        assert_eq!(status, OcStatus::Ok);
        (best, length)
    };
    for mode in [OcMode::Baseline, OcMode::Proposed] {
        let (best, length) = run(mode);
        let r = Route::new(best.clone(), 15).unwrap();
        assert!((tour_length(&inst, &r).unwrap() - length).abs() < 1e-12);
        assert_eq!(run(mode), (best, length));
    }
    unsafe { oc_model_free(handle) };
}

#[test]
fn proposed_mode_needs_calibration() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.json");
    save_model(&small_model(false), &path).unwrap();
    let handle = load(&path);
    assert!(!unsafe { oc_model_is_calibrated(handle) });
    let coords = [0.1, 0.1, 0.9, 0.1, 0.5, 0.9];
    let mut best = [0usize; 3];
    let mut length = 0.0;
    let status = unsafe {
        oc_optimize(
            handle,
            coords.as_ptr(),
            3,
            OcMode::Proposed,
            10,
            0,
            best.as_mut_ptr(),
            &mut length,
        )
    };
    assert_eq!(status, OcStatus::InvalidData);
    assert!(last_error().contains("calibrated"));
    unsafe { oc_model_free(handle) };
}

#[test]
fn header_declares_api_and_compiles() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/offline_co.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for symbol in [
        "typedef struct OcModel OcModel",
        "oc_model_load",
        "oc_model_free",
        "oc_model_is_calibrated",
        "oc_model_score",
        "oc_tour_length",
        "oc_optimize",
        "oc_last_error_message",
        "OC_STATUS_INVALID_DATA = 4",
    ] {
        assert!(text.contains(symbol), "header lacks {symbol}");
    }
    let status = std::process::Command::new("cc")
        .args(["-std=c99", "-fsyntax-only", "-x", "c"])
        .arg(&header)
        .status()
        .expect("C compiler on PATH");
    assert!(status.success());
}
