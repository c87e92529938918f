//! Target processes as pure functions of a state and a block of draws.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::rng::{DrawLayout, IterationDraws, RandomBlock, StreamKey};

/// One point of a chain.
///
/// Equality is bitwise: two continuous states are equal only when every
/// coordinate has the same bit pattern. Coalesced chains hold copies of the
/// same value, so any tolerance would only manufacture false coalescence.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum ChainState {
    Discrete(u32),
    Continuous(Vec<f64>),
}

impl ChainState {
    pub fn as_label(&self) -> Option<u32> {
        match self {
            ChainState::Discrete(s) => Some(*s),
            ChainState::Continuous(_) => None,
        }
    }

    pub fn as_point(&self) -> Option<&[f64]> {
        match self {
            ChainState::Discrete(_) => None,
            ChainState::Continuous(v) => Some(v),
        }
    }

    /// Coordinate `i` as a real; a discrete label is its own coordinate 0.
    pub fn coordinate(&self, i: usize) -> Option<f64> {
        match self {
            ChainState::Discrete(s) if i == 0 => Some(f64::from(*s)),
            ChainState::Discrete(_) => None,
            ChainState::Continuous(v) => v.get(i).copied(),
        }
    }

    pub fn dimension(&self) -> usize {
        match self {
            ChainState::Discrete(_) => 1,
            ChainState::Continuous(v) => v.len(),
        }
    }
}

impl PartialEq for ChainState {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (ChainState::Discrete(a), ChainState::Discrete(b)) => a == b,
            (ChainState::Continuous(a), ChainState::Continuous(b)) => {
                a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits())
            }
            _ => false,
        }
    }
}

impl Eq for ChainState {}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Metric {
    Euclidean,
    /// 0 when equal, 1 otherwise; for unordered discrete state spaces.
    ZeroOne,
}

impl Metric {
    pub fn distance(self, a: &ChainState, b: &ChainState) -> f64 {
        match self {
            Metric::ZeroOne => {
                if a == b {
                    0.0
                } else {
                    1.0
                }
            }
            Metric::Euclidean => match (a, b) {
                (ChainState::Continuous(x), ChainState::Continuous(y)) => euclidean(x, y),
                (ChainState::Discrete(x), ChainState::Discrete(y)) => {
                    (f64::from(*x) - f64::from(*y)).abs()
                }
                _ => f64::INFINITY,
            },
        }
    }
}

pub(crate) fn euclidean(x: &[f64], y: &[f64]) -> f64 {
    x.iter()
        .zip(y)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}

/// Static description of a kernel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub dimension: usize,
    pub metric: Metric,
    pub parameters: Vec<f64>,
}

impl KernelSpec {
    pub fn new(dimension: usize, metric: Metric, parameters: Vec<f64>) -> Result<Self> {
        if dimension == 0 {
            return Err(invalid("kernel dimension must be positive"));
        }
        if metric == Metric::ZeroOne && dimension != 1 {
            return Err(invalid("zero-one metric requires a one-dimensional discrete space"));
        }
        Ok(KernelSpec {
            dimension,
            metric,
            parameters,
        })
    }
}

/// A homogeneous Markov process driven entirely by explicit draws.
///
/// `step` must be a pure function of the state and the draws so that chains
/// in the same column of a sample set, fed identical draws, stay coupled.
pub trait Kernel: Send + Sync {
    fn spec(&self) -> &KernelSpec;

    /// Draws consumed by one call to [`Kernel::step`].
    fn layout(&self) -> DrawLayout;

    /// One draw from the starting distribution.
    fn start(&self, key: StreamKey) -> ChainState;

    fn step(&self, state: &ChainState, draws: IterationDraws<'_>) -> ChainState;

    /// Negative log density, needed for maximal-coupling M–H updates.
    fn neg_log_density(&self, _state: &ChainState) -> Option<f64> {
        None
    }
}

/// Runs `n` iterations from `x0`, consuming block iterations `first..first + n`.
pub fn mcmc<K: Kernel + ?Sized>(
    kernel: &K,
    x0: &ChainState,
    block: &RandomBlock,
    first: usize,
    n: usize,
) -> Result<ChainState> {
    if first + n > block.iterations() {
        return Err(Error::BlockExhausted {
            start: first,
            end: first + n,
            available: block.iterations(),
        });
    }
    let mut x = x0.clone();
    for t in first..first + n {
        x = kernel.step(&x, block.iteration(t)?);
    }
    Ok(x)
}

/// Index in `lo..hi` of the point closest to `points[hi]`; ties go to the
/// smallest index. Indices are 0-based.
pub fn min_ind(points: &[ChainState], lo: usize, hi: usize, metric: Metric) -> Result<usize> {
    if lo >= hi || hi >= points.len() {
        return Err(invalid(format!(
            "min_ind needs lo < hi < {} (got lo = {lo}, hi = {hi})",
            points.len()
        )));
    }
    let target = &points[hi];
    let mut best = lo;
    let mut best_d = metric.distance(&points[lo], target);
    for (i, p) in points.iter().enumerate().take(hi).skip(lo + 1) {
        let d = metric.distance(p, target);
        if d < best_d {
            best = i;
            best_d = d;
        }
    }
    Ok(best)
}
