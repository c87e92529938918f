use perfsim::kernel::ChainState;
use perfsim::pair::Coupling;
use perfsim::stats::weighted_estimate;
use perfsim::targets::{TwoState, TwoStateParams};
use perfsim::unbiased::{run_coupled, sample_string, unbiased_estimate, CoupledTrace, PairKeys};
use proptest::prelude::*;

fn trace_from(k: usize, tau: usize, labels: &[u32]) -> CoupledTrace {
    let mut it = labels.iter().cycle().map(|l| ChainState::Discrete(*l));
    let end = k.max(tau);
    let xs: Vec<_> = (k..=end).map(|_| it.next().unwrap()).collect();
    let mut ys: Vec<_> = (k..end).map(|_| it.next().unwrap()).collect();
    if tau > k {
        ys[tau - 1 - k] = xs[tau - k].clone();
    }
    CoupledTrace { k, lag: 1, xs, ys, tau: Some(tau) }
}

proptest! {
    #[test]
    fn string_invariants(
        k in 0usize..20,
        extra in 0usize..30,
        labels in prop::collection::vec(0u32..6, 1..40),
        table in prop::collection::vec(-1000i32..1000, 6),
    ) {
        let tau = (k + extra).max(1);
        let trace = trace_from(k, tau, &labels);
        let s = sample_string(&trace).unwrap();
        prop_assert_eq!(s.weight_sum(), 1);
        prop_assert_eq!(s.nu() % 2, 1);
        if tau > k + 1 {
            prop_assert_eq!(s.nu(), 2 * (tau - k) - 1);
        } else {
            prop_assert_eq!(s.nu(), 1);
        }
        prop_assert_eq!(s.holes(), (s.nu() - 1) / 2);
        let g = |q: &ChainState| f64::from(table[q.as_label().unwrap() as usize]) * 0.37;
        prop_assert_eq!(s.expectation(g), unbiased_estimate(&trace, g).unwrap());
    }

    #[test]
    fn weighted_estimate_is_linear(
        traces in prop::collection::vec((0usize..6, 0usize..8, prop::collection::vec(0u32..4, 1..12)), 1..20),
        g1 in prop::collection::vec(-50i32..50, 4),
        g2 in prop::collection::vec(-50i32..50, 4),
        a in -5i32..5,
        b in -5i32..5,
    ) {
        let strings: Vec<_> = traces
            .iter()
            .map(|(k, extra, labels)| sample_string(&trace_from(*k, (*k + *extra).max(1), labels)).unwrap())
            .collect();
        let f = |t: &[i32]| {
            let t = t.to_vec();
            move |q: &ChainState| f64::from(t[q.as_label().unwrap() as usize])
        };
        let (f1, f2) = (f(&g1), f(&g2));
        let combo = |q: &ChainState| f64::from(a) * f1(q) + f64::from(b) * f2(q);
        let n = strings.len() as f64;
        let lhs = weighted_estimate(&strings, combo).unwrap().adjusted * n;
        let rhs = f64::from(a) * weighted_estimate(&strings, &f1).unwrap().adjusted * n
            + f64::from(b) * weighted_estimate(&strings, &f2).unwrap().adjusted * n;
        prop_assert!((lhs - rhs).abs() < 1e-9);
        let holes: usize = strings.iter().map(|s| (s.nu() - 1) / 2).sum();
        let w = weighted_estimate(&strings, &f1).unwrap();
        prop_assert_eq!(w.holes_per_sim, holes as f64 / n);
    }
}

#[test]
fn two_state_traces_match_estimator() {
    let kernel = TwoState::new(TwoStateParams::default());
    let g = |q: &ChainState| if q.as_label() == Some(1) { 1.0 } else { 0.0 };
    for index in 0..2000 {
        let keys = PairKeys { master_seed: 4, index };
        let trace = run_coupled(&kernel, Coupling::Common, 3, 1, keys, 10_000).unwrap();
        let tau = trace.tau.unwrap();
        let s = sample_string(&trace).unwrap();
        assert_eq!(s.nu(), if tau > 4 { 2 * (tau - 3) - 1 } else { 1 });
        assert_eq!(s.expectation(g), unbiased_estimate(&trace, g).unwrap());
        assert_eq!(trace.x(3), Some(s.first()));
    }
}
