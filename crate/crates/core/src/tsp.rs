//! Euclidean TSP instances, closed-tour routes and the ground-truth length
//! oracle.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};

/// A problem condition: an ordered list of cities in the unit square.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemInstance {
    id: u64,
    cities: Vec<[f64; 2]>,
}

impl ProblemInstance {
    pub fn new(id: u64, cities: Vec<[f64; 2]>) -> Result<Self> {
        if cities.len() < 2 {
            return Err(Error::InvalidArgument(format!(
                "instance {id} has {} cities, at least 2 required",
                cities.len()
            )));
        }
        if let Some((i, c)) = cities
            .iter()
            .enumerate()
            .find(|(_, c)| !c.iter().all(|v| (0.0..=1.0).contains(v)))
        {
            return Err(Error::InvalidArgument(format!(
                "instance {id}: city {i} at ({}, {}) lies outside [0,1]^2",
                c[0], c[1]
            )));
        }
        Ok(Self { id, cities })
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn cities(&self) -> &[[f64; 2]] {
        &self.cities
    }

    pub fn len(&self) -> usize {
        self.cities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cities.is_empty()
    }

    pub fn distance(&self, a: usize, b: usize) -> f64 {
        let (p, q) = (self.cities[a], self.cities[b]);
        (q[0] - p[0]).hypot(q[1] - p[1])
    }
}

/// A closed tour: a permutation of city indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Route {
    order: Vec<usize>,
}

impl Route {
    /// Validates that `order` is a permutation of `0..n`.
    pub fn new(order: Vec<usize>, n: usize) -> Result<Self> {
        check_permutation(&order, n)?;
        Ok(Self { order })
    }

    /// Identity tour `0, 1, …, n-1`.
    pub fn identity(n: usize) -> Self {
        Self {
            order: (0..n).collect(),
        }
    }

    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(rng);
        Self { order }
    }

    /// Wraps an order already known to be a permutation.
    pub(crate) fn from_order_unchecked(order: Vec<usize>) -> Self {
        Self { order }
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn into_order(self) -> Vec<usize> {
        self.order
    }

    pub fn validate_for(&self, instance: &ProblemInstance) -> Result<()> {
        check_permutation(&self.order, instance.len())
    }
}

pub(crate) fn check_permutation(order: &[usize], n: usize) -> Result<()> {
    if order.len() != n {
        return Err(Error::InvalidRoute(format!(
            "route visits {} cities, instance has {n}",
            order.len()
        )));
    }
    let mut seen = vec![false; n];
    for &c in order {
        if c >= n {
            return Err(Error::InvalidRoute(format!(
                "city index {c} out of range for {n} cities"
            )));
        }
        if std::mem::replace(&mut seen[c], true) {
            return Err(Error::InvalidRoute(format!("city index {c} visited twice")));
        }
    }
    Ok(())
}

/// Upper bound estimate of the Lipschitz constant of tour length with
/// respect to [`route_distance`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LipschitzEstimate {
    pub k_hat: f64,
    /// Pairs that contributed, i.e. pairs with non-zero route distance.
    pub sample_pairs: usize,
}

/// Draws `n` cities uniformly from the unit square.
pub fn sample_instance<R: Rng + ?Sized>(id: u64, n: usize, rng: &mut R) -> Result<ProblemInstance> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "city count must be at least 2, got {n}"
        )));
    }
    let cities = (0..n).map(|_| [rng.gen::<f64>(), rng.gen::<f64>()]).collect();
    ProblemInstance::new(id, cities)
}

/// Length of the closed tour, including the edge from the last city back to
/// the first.
pub fn tour_length(instance: &ProblemInstance, route: &Route) -> Result<f64> {
    route.validate_for(instance)?;
    Ok(closed_length(instance, route.order()))
}

/// Tour length for an order already known to be valid.
pub(crate) fn closed_length(instance: &ProblemInstance, order: &[usize]) -> f64 {
    let n = order.len();
    (0..n).map(|k| instance.distance(order[k], order[(k + 1) % n])).sum()
}

/// Fraction of positions at which two routes place different cities.
pub fn route_distance(r1: &Route, r2: &Route) -> Result<f64> {
    if r1.len() != r2.len() {
        return Err(Error::InvalidArgument(format!(
            "route lengths differ: {} vs {}",
            r1.len(),
            r2.len()
        )));
    }
    if r1.is_empty() {
        return Ok(0.0);
    }
    let differing = r1.order().iter().zip(r2.order()).filter(|(a, b)| a != b).count();
    Ok(differing as f64 / r1.len() as f64)
}

/// Maximum length-difference to route-distance ratio over the given pairs.
/// Pairs at zero distance are skipped.
pub fn lipschitz_over_pairs<'a, I>(instance: &ProblemInstance, pairs: I) -> Result<LipschitzEstimate>
where
    I: IntoIterator<Item = (&'a Route, &'a Route)>,
{
    let mut k_hat = 0.0f64;
    let mut used = 0usize;
    for (r1, r2) in pairs {
        let d = route_distance(r1, r2)?;
        if d == 0.0 {
            continue;
        }
        let diff = (tour_length(instance, r1)? - tour_length(instance, r2)?).abs();
        k_hat = k_hat.max(diff / d);
        used += 1;
    }
    if used == 0 {
        return Err(Error::DegenerateSample("every sampled route pair was identical".into()));
    }
    Ok(LipschitzEstimate {
        k_hat,
        sample_pairs: used,
    })
}

/// Estimates K from `samples` pairs of uniformly random routes.
pub fn estimate_lipschitz<R: Rng + ?Sized>(
    instance: &ProblemInstance,
    samples: usize,
    rng: &mut R,
) -> Result<LipschitzEstimate> {
    if samples == 0 {
        return Err(Error::InvalidArgument("samples must be at least 1".into()));
    }
    let pairs: Vec<(Route, Route)> = (0..samples)
        .map(|_| {
            let a = Route::random(instance.len(), rng);
            let b = Route::random(instance.len(), rng);
            (a, b)
        })
        .collect();
    lipschitz_over_pairs(instance, pairs.iter().map(|(a, b)| (a, b)))
}

/// Largest instance accepted by [`exhaustive_lipschitz`]; 8! routes already
/// means ~8e8 pairs.
pub const EXHAUSTIVE_MAX_CITIES: usize = 8;

/// Exact K over every ordered pair of permutations.
pub fn exhaustive_lipschitz(instance: &ProblemInstance) -> Result<LipschitzEstimate> {
    let n = instance.len();
    if n > EXHAUSTIVE_MAX_CITIES {
        return Err(Error::InvalidArgument(format!(
            "exhaustive search supports at most {EXHAUSTIVE_MAX_CITIES} cities, instance has {n}"
        )));
    }
    let routes: Vec<Route> = permutations(n).into_iter().map(Route::from_order_unchecked).collect();
    let lengths: Vec<f64> = routes.iter().map(|r| closed_length(instance, r.order())).collect();
    let mut k_hat = 0.0f64;
    let mut used = 0usize;
    for i in 0..routes.len() {
        for j in (i + 1)..routes.len() {
            let d = route_distance(&routes[i], &routes[j])?;
            if d > 0.0 {
                k_hat = k_hat.max((lengths[i] - lengths[j]).abs() / d);
                used += 1;
            }
        }
    }
    if used == 0 {
        return Err(Error::DegenerateSample("instance admits a single route".into()));
    }
    Ok(LipschitzEstimate {
        k_hat,
        sample_pairs: used,
    })
}

/// All permutations of `0..n` in lexicographic order.
pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    let mut current: Vec<usize> = (0..n).collect();
    let mut out = vec![current.clone()];
    // next_permutation
    loop {
        let Some(i) = (1..n).rev().find(|&i| current[i - 1] < current[i]) else {
            return out;
        };
        let j = (i..n).rev().find(|&j| current[j] > current[i - 1]).unwrap();
        current.swap(i - 1, j);
        current[i..].reverse();
        out.push(current.clone());
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn square() -> ProblemInstance {
        ProblemInstance::new(0, vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]).unwrap()
    }

    #[test]
    fn sample_instance_within_unit_square() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let inst = sample_instance(0, 100, &mut rng).unwrap();
        assert_eq!(inst.len(), 100);
        assert!(inst.cities().iter().all(|c| c.iter().all(|v| (0.0..=1.0).contains(v))));
        assert_eq!(sample_instance(1, 2, &mut rng).unwrap().len(), 2);
        assert!(matches!(
            sample_instance(2, 1, &mut rng),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn sample_instance_deterministic() {
        let a = sample_instance(0, 50, &mut ChaCha8Rng::seed_from_u64(11)).unwrap();
        let b = sample_instance(0, 50, &mut ChaCha8Rng::seed_from_u64(11)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn instance_rejects_out_of_range_coordinates() {
        assert!(ProblemInstance::new(0, vec![[0.0, 0.0], [1.5, 0.0]]).is_err());
        assert!(ProblemInstance::new(0, vec![[0.0, 0.0]]).is_err());
    }

    #[test]
    fn square_perimeter() {
        let len = tour_length(&square(), &Route::identity(4)).unwrap();
        assert_eq!(len, 4.0);
    }

    #[test]
    fn two_city_tour_traverses_edge_twice() {
        // 3-4-5 triangle scaled into the unit square.
        let inst = ProblemInstance::new(0, vec![[0.0, 0.0], [0.3, 0.4]]).unwrap();
        let len = tour_length(&inst, &Route::identity(2)).unwrap();
        assert!((len - 1.0).abs() < 1e-15);
    }

    #[test]
    fn tour_length_rejects_bad_routes() {
        let inst = square();
        assert!(matches!(
            tour_length(&inst, &Route::from_order_unchecked(vec![0, 1, 1, 3])),
            Err(Error::InvalidRoute(_))
        ));
        assert!(matches!(
            tour_length(&inst, &Route::from_order_unchecked(vec![0, 1, 2, 4])),
            Err(Error::InvalidRoute(_))
        ));
        assert!(Route::new(vec![0, 1, 2], 4).is_err());
    }

    #[test]
    fn route_distance_cases() {
        let a = Route::identity(3);
        let b = Route::new(vec![0, 2, 1], 3).unwrap();
        assert_eq!(route_distance(&a, &a).unwrap(), 0.0);
        assert!((route_distance(&a, &b).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        let derangement = Route::new(vec![1, 2, 0], 3).unwrap();
        assert_eq!(route_distance(&a, &derangement).unwrap(), 1.0);
        assert!(route_distance(&a, &Route::identity(4)).is_err());
    }

    #[test]
    fn lipschitz_coincident_cities_is_zero() {
        let inst = ProblemInstance::new(0, vec![[0.5, 0.5]; 6]).unwrap();
        let est = estimate_lipschitz(&inst, 50, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert_eq!(est.k_hat, 0.0);
    }

    #[test]
    fn lipschitz_skips_identical_pairs() {
        let inst = square();
        let r = Route::identity(4);
        let err = lipschitz_over_pairs(&inst, [(&r, &r)]).unwrap_err();
        assert!(matches!(err, Error::DegenerateSample(_)));

        let s = Route::new(vec![0, 2, 1, 3], 4).unwrap();
        let est = lipschitz_over_pairs(&inst, [(&r, &r), (&r, &s)]).unwrap();
        assert_eq!(est.sample_pairs, 1);
        assert!(est.k_hat.is_finite());
        assert!(estimate_lipschitz(&inst, 0, &mut ChaCha8Rng::seed_from_u64(0)).is_err());
    }

    #[test]
    fn permutations_enumerates_all() {
        let p = permutations(4);
        assert_eq!(p.len(), 24);
        let mut dedup = p.clone();
        dedup.sort();
        dedup.dedup();
        assert_eq!(dedup.len(), 24);
        assert_eq!(permutations(1), vec![vec![0]]);
    }
}
