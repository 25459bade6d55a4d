use offline_co::surrogate::{pair_loss, pairwise_probability, ranking_target};
use proptest::prelude::*;

proptest! {
    #[test]
    fn probabilities_are_complementary(si in -1e3f64..1e3, sj in -1e3f64..1e3) {
        let pij = pairwise_probability(si, sj);
        let pji = pairwise_probability(sj, si);
        prop_assert!((0.0..=1.0).contains(&pij));
        prop_assert!((pij + pji - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn loss_is_antisymmetric_under_swap(si in -50.0f64..50.0, sj in -50.0f64..50.0, t in 0.0f64..=1.0) {
        let a = pair_loss(si, sj, t);
        let b = pair_loss(sj, si, 1.0 - t);
        prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
        prop_assert!(a >= 0.0 && a.is_finite());
    }

    #[test]
    fn target_prefers_shorter_tour(li in 0.1f64..100.0, lj in 0.1f64..100.0) {
        let t = ranking_target(li, lj);
        prop_assert_eq!(t + ranking_target(lj, li), 1.0);
        if li < lj {
            prop_assert_eq!(t, 1.0);
        }
    }
}

#[test]
fn hand_values() {
    assert_eq!(pairwise_probability(0.7, 0.7), 0.5);
    assert!((pairwise_probability(1.0, 0.0) - 1.0 / (1.0 + (-1.0f64).exp())).abs() < 1e-15);
    assert!((pair_loss(0.0, 0.0, 1.0) - std::f64::consts::LN_2).abs() < 1e-15);
    assert!(pair_loss(800.0, -800.0, 0.0).is_finite());
    assert_eq!(ranking_target(3.0, 3.0), 0.5);
}
