//! Moving chains through a block of shared randomness, with or without a
//! maximal-coupling M–H step after every `M` kernel iterations.

use serde::{Deserialize, Serialize};

use crate::coupling::{jump, max_couple, mh_accept};
use crate::error::{invalid, Error, Result};
use crate::kernel::{mcmc, ChainState, Kernel};
use crate::rng::{BlockShape, CouplingDraws, RandomBlock};

/// How chains sharing a block are tied together.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Coupling {
    /// Common random numbers only.
    Common,
    /// Common random numbers plus a maximally coupled jump every `interval`
    /// kernel iterations.
    Maximal { radius: f64, interval: usize },
}

impl Coupling {
    pub fn interval(&self) -> Option<usize> {
        match self {
            Coupling::Common => None,
            Coupling::Maximal { interval, .. } => Some(*interval),
        }
    }
}

/// Shape of the blocks a kernel needs for `iterations` steps under `coupling`.
pub fn block_shape<K: Kernel + ?Sized>(
    kernel: &K,
    iterations: usize,
    coupling: Coupling,
) -> Result<BlockShape> {
    if let Coupling::Maximal { radius, .. } = coupling {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(invalid(format!("coupling radius must be positive, got {radius}")));
        }
    }
    BlockShape::new(
        iterations,
        coupling.interval(),
        kernel.spec().dimension,
        kernel.layout(),
    )
}

/// Pre-jump, proposed and accepted values of one chain for one coupling step.
#[derive(Debug, Clone)]
pub struct JumpOutcome {
    pub star: Vec<f64>,
    pub post: ChainState,
}

fn point(state: &ChainState) -> Result<&[f64]> {
    state
        .as_point()
        .ok_or(Error::Unsupported("maximal coupling of discrete states"))
}

fn accept<K: Kernel + ?Sized>(
    kernel: &K,
    pre: &ChainState,
    star: Vec<f64>,
    r_mh: f64,
) -> Result<JumpOutcome> {
    let proposal = ChainState::Continuous(star.clone());
    let density = |s: &ChainState| {
        kernel
            .neg_log_density(s)
            .ok_or(Error::Unsupported("maximal coupling without a density"))
    };
    let post = if mh_accept(density(pre)?, density(&proposal)?, r_mh) {
        proposal
    } else {
        pre.clone()
    };
    Ok(JumpOutcome { star, post })
}

/// Uncoupled jump from `pre` followed by the M–H test.
pub fn jump_free<K: Kernel + ?Sized>(
    kernel: &K,
    pre: &ChainState,
    draws: CouplingDraws<'_>,
    radius: f64,
) -> Result<JumpOutcome> {
    let star = jump(point(pre)?, radius, draws.dir, draws.mag)?;
    accept(kernel, pre, star, draws.mh)
}

/// Jump from `pre` maximally coupled to a partner's jump, then the M–H test.
pub fn jump_coupled<K: Kernel + ?Sized>(
    kernel: &K,
    pre: &ChainState,
    partner_pre: &ChainState,
    partner_star: &[f64],
    draws: CouplingDraws<'_>,
    radius: f64,
) -> Result<JumpOutcome> {
    let star = max_couple(point(partner_pre)?, partner_star, point(pre)?, radius)?;
    accept(kernel, pre, star, draws.mh)
}

/// Advances a single chain through a whole block; under maximal coupling its
/// jumps are free.
pub fn advance_free<K: Kernel + ?Sized>(
    kernel: &K,
    coupling: Coupling,
    x: &ChainState,
    block: &RandomBlock,
) -> Result<ChainState> {
    match coupling {
        Coupling::Common => mcmc(kernel, x, block, 0, block.iterations()),
        Coupling::Maximal { radius, interval } => {
            let mut x = x.clone();
            for sub in 0..block.iterations() / interval {
                let pre = mcmc(kernel, &x, block, sub * interval, interval)?;
                x = jump_free(kernel, &pre, block.coupling(sub)?, radius)?.post;
            }
            Ok(x)
        }
    }
}

/// Advances `x` and `y` through the same block, `y` coupled to `x`.
///
/// Once the pair is equal both outputs are the same value, computed once.
pub fn advance_pair<K: Kernel + ?Sized>(
    kernel: &K,
    coupling: Coupling,
    x: &ChainState,
    y: &ChainState,
    block: &RandomBlock,
) -> Result<(ChainState, ChainState)> {
    if x == y {
        let next = advance_free(kernel, coupling, x, block)?;
        return Ok((next.clone(), next));
    }
    match coupling {
        Coupling::Common => Ok((
            mcmc(kernel, x, block, 0, block.iterations())?,
            mcmc(kernel, y, block, 0, block.iterations())?,
        )),
        Coupling::Maximal { radius, interval } => {
            let (mut x, mut y) = (x.clone(), y.clone());
            for sub in 0..block.iterations() / interval {
                let draws = block.coupling(sub)?;
                let x_pre = mcmc(kernel, &x, block, sub * interval, interval)?;
                if x == y {
                    let out = jump_free(kernel, &x_pre, draws, radius)?;
                    x = out.post;
                    y = x.clone();
                    continue;
                }
                let y_pre = mcmc(kernel, &y, block, sub * interval, interval)?;
                let xj = jump_free(kernel, &x_pre, draws, radius)?;
                let yj = jump_coupled(kernel, &y_pre, &x_pre, &xj.star, draws, radius)?;
                x = xj.post;
                y = yj.post;
            }
            Ok((x, y))
        }
    }
}
