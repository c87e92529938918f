//! Lag-coupled chain pairs, the unbiased estimator and string samples.
//!
//! Indices count lag units: one kernel iteration when the lag is 1, one block
//! of `B` iterations in the sample-set setting. The step from `X_{t-1}` to
//! `X_t` and the step from `Y_{t-2}` to `Y_{t-1}` consume the same random
//! block `t`, so once `X_τ = Y_{τ-1}` the pair stays coalesced.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::kernel::{ChainState, Kernel};
use crate::pair::{advance_free, advance_pair, block_shape, Coupling};
use crate::rng::{rand_block, start_key, BlockId, BlockShape};

/// Default cap on lag units before a run is declared non-coalesced.
pub const DEFAULT_CAP: usize = 10_000;

/// States of a coupled pair from the burn-in index `k` onward.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoupledTrace {
    /// Index of `xs[0]` and `ys[0]`.
    pub k: usize,
    /// Kernel iterations per index step.
    pub lag: usize,
    /// `X_k, X_{k+1}, ..., X_end` with `end = max(k, τ)`.
    pub xs: Vec<ChainState>,
    /// `Y_k, ..., Y_{end-1}`; empty when `τ <= k`.
    pub ys: Vec<ChainState>,
    /// First index with `X_τ = Y_{τ-1}`; `None` when the cap was reached.
    pub tau: Option<usize>,
}

impl CoupledTrace {
    pub fn x(&self, i: usize) -> Option<&ChainState> {
        i.checked_sub(self.k).and_then(|j| self.xs.get(j))
    }

    pub fn y(&self, i: usize) -> Option<&ChainState> {
        i.checked_sub(self.k).and_then(|j| self.ys.get(j))
    }

    fn coalesced_tau(&self) -> Result<usize> {
        self.tau.ok_or(Error::NotCoalesced {
            cap: self.k + self.xs.len(),
        })
    }
}

/// One relaxed perfect sample: values with weights `+1, -1, +1, ...`.
///
/// Entries with weight `-1` are holes. A string always has odd length and
/// weights summing to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StringSample {
    pub entries: Vec<(ChainState, i8)>,
}

impl StringSample {
    pub fn single(value: ChainState) -> Self {
        StringSample {
            entries: vec![(value, 1)],
        }
    }

    pub fn nu(&self) -> usize {
        self.entries.len()
    }

    pub fn holes(&self) -> usize {
        self.entries.iter().filter(|(_, w)| *w < 0).count()
    }

    pub fn weight_sum(&self) -> i64 {
        self.entries.iter().map(|(_, w)| i64::from(*w)).sum()
    }

    pub fn first(&self) -> &ChainState {
        &self.entries[0].0
    }

    /// `Σ w_i g(q_i)`, accumulated as `w_1 g(q_1)` plus consecutive
    /// (hole, point) pairs; this matches [`unbiased_estimate`] bit for bit.
    pub fn expectation<G: Fn(&ChainState) -> f64>(&self, g: G) -> f64 {
        let wg = |(q, w): &(ChainState, i8)| f64::from(*w) * g(q);
        let mut acc = wg(&self.entries[0]);
        for pair in self.entries[1..].chunks(2) {
            acc += match pair {
                [hole, point] => wg(hole) + wg(point),
                [single] => wg(single),
                _ => unreachable!(),
            };
        }
        acc
    }
}

/// Addresses the randomness of one lag-coupled run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairKeys {
    pub master_seed: u64,
    pub index: u64,
}

impl PairKeys {
    pub fn block(&self, t: usize) -> BlockId {
        BlockId::new(self.master_seed, self.index, t as u64)
    }
}

/// Runs the pair from aligned states `X_s`, `Y_{s-1}` until coalescence has
/// happened and `X_k` is known, or until index `cap`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn continue_coupled<K, F>(
    kernel: &K,
    coupling: Coupling,
    shape: &BlockShape,
    mut trace: CoupledTrace,
    mut x: ChainState,
    mut y: ChainState,
    s: usize,
    cap: usize,
    block_for: F,
) -> Result<CoupledTrace>
where
    K: Kernel + ?Sized,
    F: Fn(usize) -> BlockId,
{
    let k = trace.k;
    let mut t = s;
    loop {
        if t >= k {
            trace.xs.push(x.clone());
        }
        if t > k {
            trace.ys.push(y.clone());
        }
        if trace.tau.is_none() && x == y {
            trace.tau = Some(t);
        }
        if trace.tau.is_some() && t >= k {
            return Ok(trace);
        }
        if t >= cap {
            return Ok(trace);
        }
        t += 1;
        let block = rand_block(block_for(t), shape);
        let (nx, ny) = advance_pair(kernel, coupling, &x, &y, &block)?;
        x = nx;
        y = ny;
    }
}

/// Runs two lag-coupled chains from independent starts.
///
/// `X_0` and `Y_0` come from the start keys of rows 0 and 1; block `t` drives
/// the step into `X_t` and the step into `Y_{t-1}`. Each index step is `lag`
/// kernel iterations. If `cap` index steps pass without coalescence the trace
/// is returned with `tau = None`.
pub fn run_coupled<K: Kernel + ?Sized>(
    kernel: &K,
    coupling: Coupling,
    k: usize,
    lag: usize,
    keys: PairKeys,
    cap: usize,
) -> Result<CoupledTrace> {
    let x0 = kernel.start(start_key(keys.master_seed, keys.index, 0));
    let y0 = kernel.start(start_key(keys.master_seed, keys.index, 1));
    run_coupled_from(kernel, coupling, x0, y0, k, lag, keys, cap)
}

/// [`run_coupled`] with caller-supplied starting points.
#[allow(clippy::too_many_arguments)]
pub fn run_coupled_from<K: Kernel + ?Sized>(
    kernel: &K,
    coupling: Coupling,
    x0: ChainState,
    y0: ChainState,
    k: usize,
    lag: usize,
    keys: PairKeys,
    cap: usize,
) -> Result<CoupledTrace> {
    if lag == 0 {
        return Err(invalid("lag must be at least 1"));
    }
    if cap <= k + 1 {
        return Err(invalid(format!("cap {cap} must exceed k + 1 = {}", k + 1)));
    }
    let shape = block_shape(kernel, lag, coupling)?;
    let mut trace = CoupledTrace {
        k,
        lag,
        xs: Vec::new(),
        ys: Vec::new(),
        tau: None,
    };
    if k == 0 {
        trace.xs.push(x0.clone());
    }
    let x1 = advance_free(kernel, coupling, &x0, &rand_block(keys.block(1), &shape))?;
    continue_coupled(kernel, coupling, &shape, trace, x1, y0, 1, cap, |t| {
        keys.block(t)
    })
}

/// `G = g(X_k) + Σ_{i=k+1}^{τ-1} (g(X_i) - g(Y_{i-1}))` over the trace.
pub fn unbiased_estimate<G: Fn(&ChainState) -> f64>(trace: &CoupledTrace, g: G) -> Result<f64> {
    let tau = trace.coalesced_tau()?;
    let k = trace.k;
    let mut acc = g(&trace.xs[0]);
    for i in k + 1..tau {
        let xi = trace.x(i).ok_or_else(|| invalid("trace is missing X states"))?;
        let yi = trace.y(i - 1).ok_or_else(|| invalid("trace is missing Y states"))?;
        acc += g(xi) - g(yi);
    }
    Ok(acc)
}

/// The string `(X_k, +1), (Y_k, -1), (X_{k+1}, +1), ..., (X_{τ-1}, +1)`, or
/// the single point `X_k` when `τ <= k + 1`.
pub fn sample_string(trace: &CoupledTrace) -> Result<StringSample> {
    let tau = trace.coalesced_tau()?;
    let k = trace.k;
    let mut entries = vec![(trace.xs[0].clone(), 1i8)];
    for i in k + 1..tau {
        let yi = trace.y(i - 1).ok_or_else(|| invalid("trace is missing Y states"))?;
        let xi = trace.x(i).ok_or_else(|| invalid("trace is missing X states"))?;
        entries.push((yi.clone(), -1));
        entries.push((xi.clone(), 1));
    }
    Ok(StringSample { entries })
}
