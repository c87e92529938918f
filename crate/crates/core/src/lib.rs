//! Perfect simulation from coupled Markov chains.
//!
//! Sample sets of `K` chains are driven by shared random blocks arranged so
//! that each chain is the lag-one-block coupling partner of the next. Chains
//! that coalesce yield exact draws from the target; pairs that have not
//! coalesced by the end of the set are extended into string samples whose
//! signed weights keep expectations unbiased.

pub mod coupling;
pub mod error;
pub mod kernel;
pub mod pair;
pub mod perfect;
pub mod rng;
pub mod stats;
pub mod targets;
pub mod unbiased;

pub use error::{Error, Result};
pub use kernel::{mcmc, min_ind, ChainState, Kernel, KernelSpec, Metric};
pub use pair::Coupling;
pub use perfect::{
    run_sample_set, run_sample_set_audited, run_sample_set_maximal,
    run_sample_set_maximal_audited, RunConfig, SampleSet,
};
pub use rng::{parse_seed, rand_block, BlockId, BlockShape, RandomBlock, StreamKey, Substream};
pub use stats::{weighted_estimate, SetCorrelation, WeightedSummary};
pub use targets::{NormalParams, NormalTarget, TwoState, TwoStateParams};
pub use unbiased::{
    run_coupled, run_coupled_from, sample_string, unbiased_estimate, CoupledTrace, PairKeys,
    StringSample,
};
