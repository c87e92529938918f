use perfsim::coupling::{jump, max_couple};
use proptest::prelude::*;

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn point(d: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-5.0f64..5.0, d)
}

proptest! {
    #[test]
    fn coupled_jump_stays_in_own_ball(
        (x, y, dir) in (1usize..6).prop_flat_map(|d| (point(d), point(d), point(d))),
        mag in 1e-6f64..1.0,
        r in 0.2f64..4.0,
    ) {
        prop_assume!(dir.iter().any(|v| v.abs() > 1e-3));
        let xs = jump(&x, r, &dir, mag).unwrap();
        prop_assert!(dist(&xs, &x) <= r + 1e-9);
        let ys = max_couple(&x, &xs, &y, r).unwrap();
        prop_assert!(dist(&ys, &y) <= r + 1e-9);
        if dist(&y, &xs) <= r {
            prop_assert_eq!(&ys, &xs);
        } else {
            prop_assert!(dist(&ys, &x) > r - 1e-9);
        }
    }

    #[test]
    fn identical_origins_share_proposal(
        (x, dir) in (1usize..6).prop_flat_map(|d| (point(d), point(d))),
        mag in 1e-6f64..1.0,
    ) {
        prop_assume!(dir.iter().any(|v| v.abs() > 1e-3));
        let xs = jump(&x, 1.5, &dir, mag).unwrap();
        prop_assert_eq!(max_couple(&x, &xs, &x, 1.5).unwrap(), xs);
    }
}
