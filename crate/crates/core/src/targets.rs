//! Reference processes: a two-state chain with closed-form behaviour and a
//! random-walk Metropolis sampler for the standard normal in `d` dimensions.

use serde::{Deserialize, Serialize};

use crate::coupling::mh_accept;
use crate::error::{invalid, Result};
use crate::kernel::{ChainState, Kernel, KernelSpec, Metric};
use crate::rng::{derive_stream, DrawLayout, IterationDraws, RandomBlock, StreamKey};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoStateParams {
    pub theta: f64,
    pub p: f64,
}

impl TwoStateParams {
    pub fn new(theta: f64, p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&theta) {
            return Err(invalid(format!("theta must lie in [0, 1], got {theta}")));
        }
        if !(p > 0.0 && p <= 0.5) {
            return Err(invalid(format!("p must lie in (0, 0.5], got {p}")));
        }
        Ok(TwoStateParams { theta, p })
    }
}

impl Default for TwoStateParams {
    fn default() -> Self {
        TwoStateParams {
            theta: 1.0 / 9.0,
            p: 0.1,
        }
    }
}

/// One transition of the two-state chain (states 1 and 2) under uniform `s`.
///
/// State 1 moves to 2 when `s > 1 - θp`; state 2 moves to 1 when `s < p`.
/// Any two chains fed the same `s` therefore merge unless `p <= s <= 1 - θp`.
pub fn twostate_step(state: u32, s: f64, params: &TwoStateParams) -> u32 {
    match state {
        1 if s > 1.0 - params.theta * params.p => 2,
        2 if s < params.p => 1,
        other => other,
    }
}

/// Closed-form properties of the two-state chain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoStateAnalytics {
    pub stationary: (f64, f64),
    /// Determinant of the transition matrix, `1 - p - θp`.
    pub delta: f64,
}

pub fn twostate_analytics(params: &TwoStateParams) -> TwoStateAnalytics {
    let TwoStateParams { theta, p } = *params;
    TwoStateAnalytics {
        stationary: (1.0 / (1.0 + theta), theta / (1.0 + theta)),
        delta: 1.0 - p - theta * p,
    }
}

impl TwoStateAnalytics {
    /// P(X_i != Y_{i-1}) for lag-one coupling from uniform starts, `i >= 1`.
    pub fn p_noncoal(&self, i: u32) -> f64 {
        0.5 * self.delta.powi(i as i32 - 1)
    }

    /// Correlation between `X_t` and `X_{t+B}` at stationarity.
    pub fn rho(&self, block: u32) -> f64 {
        self.delta.powi(block as i32)
    }

    /// P(X_k = 1) when `X_0` is 1 or 2 with probability one half each.
    pub fn prob_state1_after(&self, k: u32) -> f64 {
        let pi1 = self.stationary.0;
        pi1 + (0.5 - pi1) * self.delta.powi(k as i32)
    }

    /// Probability that the string at burn-in `k` has more than one entry,
    /// with coupling lag `block` iterations (k counted in lags).
    pub fn prob_string(&self, k: u32, block: u32) -> f64 {
        0.5 * self.delta.powi((k * block) as i32)
    }

    /// Expected number of holes per string at burn-in `k` (k counted in lags).
    pub fn expected_holes(&self, k: u32, block: u32) -> f64 {
        let db = self.delta.powi(block as i32);
        self.prob_string(k, block) / (1.0 - db)
    }
}

/// The two-state chain as a [`Kernel`]. Starts are 1 or 2 with equal odds.
#[derive(Debug, Clone)]
pub struct TwoState {
    params: TwoStateParams,
    spec: KernelSpec,
}

impl TwoState {
    pub fn new(params: TwoStateParams) -> Self {
        TwoState {
            params,
            spec: KernelSpec {
                dimension: 1,
                metric: Metric::ZeroOne,
                parameters: vec![params.theta, params.p],
            },
        }
    }

    pub fn params(&self) -> &TwoStateParams {
        &self.params
    }
}

impl Kernel for TwoState {
    fn spec(&self) -> &KernelSpec {
        &self.spec
    }

    fn layout(&self) -> DrawLayout {
        DrawLayout {
            normals: 0,
            uniforms: 1,
        }
    }

    fn start(&self, key: StreamKey) -> ChainState {
        let u = derive_stream(key).uniform();
        ChainState::Discrete(if u < 0.5 { 1 } else { 2 })
    }

    fn step(&self, state: &ChainState, draws: IterationDraws<'_>) -> ChainState {
        match state {
            ChainState::Discrete(s) => {
                ChainState::Discrete(twostate_step(*s, draws.uniforms[0], &self.params))
            }
            ChainState::Continuous(_) => panic!("two-state kernel given a continuous state"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalParams {
    pub d: usize,
    /// Standard deviation of each coordinate of the internal random-walk jump.
    pub sigma: f64,
    /// Radius of the maximal-coupling jump ball.
    pub r: f64,
    /// Starting coordinates are uniform on `(-start_halfwidth, start_halfwidth)`.
    pub start_halfwidth: f64,
}

impl NormalParams {
    /// Defaults: `sigma = 2 / sqrt(d)`, `r = 3`, starts uniform on `(-6, 6)`.
    pub fn for_dimension(d: usize) -> Result<Self> {
        if d == 0 {
            return Err(invalid("dimension must be positive"));
        }
        Ok(NormalParams {
            d,
            sigma: 2.0 / (d as f64).sqrt(),
            r: 3.0,
            start_halfwidth: 6.0,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 {
            return Err(invalid("dimension must be positive"));
        }
        for (name, v) in [
            ("sigma", self.sigma),
            ("r", self.r),
            ("start_halfwidth", self.start_halfwidth),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(format!("{name} must be positive and finite, got {v}")));
            }
        }
        Ok(())
    }
}

/// `U(z) = |z|^2 / 2`, the standard normal negative log density up to a constant.
pub fn normal_negloglik(z: &[f64]) -> f64 {
    0.5 * z.iter().map(|v| v * v).sum::<f64>()
}

/// Random-walk Metropolis for the `d`-dimensional standard normal.
///
/// Each iteration uses `d` shared standard normals (scaled by `sigma`) as the
/// jump and one shared uniform for acceptance, so every chain fed the same
/// block makes the same relative jump.
#[derive(Debug, Clone)]
pub struct NormalTarget {
    params: NormalParams,
    spec: KernelSpec,
}

impl NormalTarget {
    pub fn new(params: NormalParams) -> Result<Self> {
        params.validate()?;
        Ok(NormalTarget {
            params,
            spec: KernelSpec {
                dimension: params.d,
                metric: Metric::Euclidean,
                parameters: vec![params.sigma, params.r, params.start_halfwidth],
            },
        })
    }

    pub fn params(&self) -> &NormalParams {
        &self.params
    }

    fn step_point(&self, x: &[f64], draws: IterationDraws<'_>) -> Vec<f64> {
        let sigma = self.params.sigma;
        let proposal: Vec<f64> = x
            .iter()
            .zip(draws.normals)
            .map(|(xi, zi)| xi + sigma * zi)
            .collect();
        if mh_accept(normal_negloglik(x), normal_negloglik(&proposal), draws.uniforms[0]) {
            proposal
        } else {
            x.to_vec()
        }
    }
}

impl Kernel for NormalTarget {
    fn spec(&self) -> &KernelSpec {
        &self.spec
    }

    fn layout(&self) -> DrawLayout {
        DrawLayout {
            normals: self.params.d,
            uniforms: 1,
        }
    }

    fn start(&self, key: StreamKey) -> ChainState {
        let mut s = derive_stream(key);
        let h = self.params.start_halfwidth;
        ChainState::Continuous(
            (0..self.params.d)
                .map(|_| -h + 2.0 * h * s.uniform())
                .collect(),
        )
    }

    fn step(&self, state: &ChainState, draws: IterationDraws<'_>) -> ChainState {
        match state {
            ChainState::Continuous(x) => ChainState::Continuous(self.step_point(x, draws)),
            ChainState::Discrete(_) => panic!("normal kernel given a discrete state"),
        }
    }

    fn neg_log_density(&self, state: &ChainState) -> Option<f64> {
        state.as_point().map(normal_negloglik)
    }
}

/// Advances every chain in `states` through block iterations `first..first + n`.
pub fn normal_mcmc_block(
    target: &NormalTarget,
    states: &[Vec<f64>],
    block: &RandomBlock,
    first: usize,
    n: usize,
) -> Result<Vec<Vec<f64>>> {
    let mut out = states.to_vec();
    for t in first..first + n {
        let draws = block.iteration(t)?;
        for x in out.iter_mut() {
            *x = target.step_point(x, draws);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{rand_block, BlockId, BlockShape};

    #[test]
    fn twostate_rules() {
        let p = TwoStateParams::default();
        assert_eq!(twostate_step(1, 0.995, &p), 2);
        assert_eq!(twostate_step(2, 0.05, &p), 1);
        assert_eq!(twostate_step(1, 0.5, &p), 1);
        assert_eq!(twostate_step(2, 0.5, &p), 2);
        // 1 - θp = 1 - 1/90 = 0.98888...
        assert_eq!(twostate_step(1, 0.988, &p), 1);
    }

    #[test]
    fn twostate_param_ranges() {
        assert!(TwoStateParams::new(0.0, 0.5).is_ok());
        assert!(TwoStateParams::new(1.0, 0.1).is_ok());
        assert!(TwoStateParams::new(1.1, 0.1).is_err());
        assert!(TwoStateParams::new(0.5, 0.0).is_err());
        assert!(TwoStateParams::new(0.5, 0.51).is_err());
    }

    #[test]
    fn analytics_defaults() {
        let a = twostate_analytics(&TwoStateParams::default());
        assert!((a.stationary.0 - 0.9).abs() < 1e-15);
        assert!((a.stationary.1 - 0.1).abs() < 1e-15);
        assert!((a.delta - 8.0 / 9.0).abs() < 1e-15);
        assert!((a.p_noncoal(5) - 0.31).abs() < 0.005);
        assert!((a.p_noncoal(20) - 0.053).abs() < 0.0005);
        assert!((a.p_noncoal(100) - 4.3e-6).abs() < 0.05e-6);
        assert!((a.p_noncoal(500) - 1.5e-26).abs() < 0.05e-26);
        assert!((a.rho(25) - 0.0526).abs() < 0.00005);
        // Table values for the unadjusted proportion and strings at k = 5
        assert!((a.prob_state1_after(5) - 0.6774).abs() < 0.001);
        assert!((a.prob_string(5, 1) - 0.2776).abs() < 0.0005);
        assert!((a.expected_holes(5, 1) - 2.4944).abs() < 0.01);
    }

    #[test]
    fn normal_defaults_and_loglik() {
        let p = NormalParams::for_dimension(4).unwrap();
        assert_eq!(p.sigma, 1.0);
        assert_eq!(p.r, 3.0);
        assert_eq!(p.start_halfwidth, 6.0);
        assert_eq!(normal_negloglik(&[0.0, 0.0]), 0.0);
        assert_eq!(normal_negloglik(&[1.0, 1.0]), 1.0);
        assert_eq!(normal_negloglik(&[3.0, 4.0]), 12.5);
    }

    #[test]
    fn normal_starts_in_box() {
        let target = NormalTarget::new(NormalParams::for_dimension(3).unwrap()).unwrap();
        for row in 0..200 {
            let s = target.start(crate::rng::start_key(11, 0, row));
            let x = s.as_point().unwrap();
            assert_eq!(x.len(), 3);
            assert!(x.iter().all(|v| *v > -6.0 && *v < 6.0));
        }
        let a = target.start(crate::rng::start_key(11, 0, 5));
        let b = target.start(crate::rng::start_key(11, 0, 5));
        assert_eq!(a, b);
    }

    #[test]
    fn batch_update_matches_kernel() {
        let target = NormalTarget::new(NormalParams::for_dimension(2).unwrap()).unwrap();
        let shape = BlockShape::new(10, None, 2, target.layout()).unwrap();
        let block = rand_block(BlockId::new(3, 0, 1), &shape);
        let states = vec![vec![0.5, -1.0], vec![0.5, -1.0], vec![4.0, 4.0]];
        let out = normal_mcmc_block(&target, &states, &block, 0, 10).unwrap();
        assert_eq!(out[0], out[1]);
        let single = crate::kernel::mcmc(
            &target,
            &ChainState::Continuous(states[2].clone()),
            &block,
            0,
            10,
        )
        .unwrap();
        assert_eq!(single, ChainState::Continuous(out[2].clone()));
    }
}
