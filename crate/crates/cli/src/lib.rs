//! Experiment drivers behind the `perfsim` binary.
//!
//! Every driver splits its work into independent units keyed by index, runs
//! them on a pool of `jobs` threads and reduces the results in index order,
//! so a report depends only on its configuration and seed.

pub mod output;
pub mod plot;

use rayon::prelude::*;
use serde::Serialize;

use perfsim::kernel::{ChainState, Kernel};
use perfsim::pair::{advance_free, advance_pair, block_shape};
use perfsim::rng::{rand_block, start_key};
use perfsim::stats::{
    self, coalescence_summary, cross_set_correlation, ks_test, serial_correlation,
    standard_normal_cdf, weighted_estimate,
};
use perfsim::targets::{twostate_analytics, NormalParams, NormalTarget, TwoState, TwoStateParams};
use perfsim::unbiased::{run_coupled, sample_string, PairKeys, DEFAULT_CAP};
use perfsim::{run_sample_set, run_sample_set_maximal, Coupling, RunConfig};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("simulation: {0}")]
    Sim(#[from] perfsim::Error),
    #[error("invalid argument: {0}")]
    Arg(String),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("thread pool: {0}")]
    Pool(String),
}

impl CliError {
    /// Short machine-readable category.
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Sim(perfsim::Error::InvalidParameter(_)) | CliError::Arg(_) => "argument",
            CliError::Sim(_) => "simulation",
            CliError::Io(_) | CliError::Csv(_) | CliError::Json(_) => "io",
            CliError::Pool(_) => "runtime",
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

fn arg(msg: impl Into<String>) -> CliError {
    CliError::Arg(msg.into())
}

/// Runs `f` on a dedicated pool of `jobs` threads.
pub fn with_jobs<T: Send>(jobs: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    if jobs == 0 {
        return Err(arg("--jobs must be at least 1"));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CliError::Pool(e.to_string()))?;
    Ok(pool.install(f))
}

fn par_indexed<T, F>(n: usize, jobs: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> perfsim::Result<T> + Send + Sync,
{
    let out = with_jobs(jobs, || {
        (0..n as u64)
            .into_par_iter()
            .map(&f)
            .collect::<perfsim::Result<Vec<T>>>()
    })?;
    Ok(out?)
}

fn state1(s: &ChainState) -> f64 {
    f64::from(u8::from(s.as_label() == Some(1)))
}

fn check_n(n: usize, what: &str) -> Result<()> {
    if n == 0 {
        return Err(arg(format!("{what} must be at least 1")));
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct TwoStateConfig {
    pub ks: Vec<usize>,
    pub n: usize,
    pub theta: f64,
    pub p: f64,
    pub seed: u64,
    #[serde(skip)]
    pub jobs: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct TwoStateRow {
    pub k: usize,
    pub unadjusted: f64,
    pub adjusted: f64,
    pub prop_nu_gt1: f64,
    pub holes: f64,
    pub sd: f64,
    pub se_unadjusted: f64,
    pub se_adjusted: f64,
    pub unadjusted_expected: f64,
    pub prop_nu_gt1_expected: f64,
    pub holes_expected: f64,
    pub n: usize,
    /// Runs that hit the iteration cap; excluded from the statistics.
    pub capped: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct HoleDecay {
    pub k: usize,
    pub holes: f64,
    pub holes_expected: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct TwoStateReport {
    pub schema: &'static str,
    pub config: TwoStateConfig,
    pub rows: Vec<TwoStateRow>,
    pub hole_decay: Vec<HoleDecay>,
}

/// Unbiased-estimator runs of the two-state chain, one table row per `k`.
///
/// Simulation `i` uses the same keys for every `k`, so all rows share one
/// set of trajectories.
pub fn twostate(cfg: &TwoStateConfig) -> Result<TwoStateReport> {
    check_n(cfg.n, "--n")?;
    if cfg.ks.is_empty() {
        return Err(arg("--ks needs at least one value"));
    }
    let params = TwoStateParams::new(cfg.theta, cfg.p)?;
    let kernel = TwoState::new(params);
    let analytics = twostate_analytics(&params);
    let mut rows = Vec::with_capacity(cfg.ks.len());
    let mut taus: Option<Vec<Option<usize>>> = None;
    for &k in &cfg.ks {
        let cap = DEFAULT_CAP.max(k + 2);
        let runs = par_indexed(cfg.n, cfg.jobs, |i| {
            let keys = PairKeys {
                master_seed: cfg.seed,
                index: i,
            };
            let trace = run_coupled(&kernel, Coupling::Common, k, 1, keys, cap)?;
            let string = trace.tau.map(|_| sample_string(&trace)).transpose()?;
            Ok((string, trace.tau))
        })?;
        let strings: Vec<_> = runs.iter().filter_map(|(s, _)| s.clone()).collect();
        let capped = runs.len() - strings.len();
        let w = weighted_estimate(&strings, state1)?;
        let kk = k as u32;
        rows.push(TwoStateRow {
            k,
            unadjusted: w.unadjusted,
            adjusted: w.adjusted,
            prop_nu_gt1: w.prop_nu_gt1,
            holes: w.holes_per_sim,
            sd: w.sd_weight_sum,
            se_unadjusted: w.se_unadjusted(),
            se_adjusted: w.se_adjusted(),
            unadjusted_expected: analytics.prob_state1_after(kk),
            prop_nu_gt1_expected: analytics.prob_string(kk, 1),
            holes_expected: analytics.expected_holes(kk, 1),
            n: strings.len(),
            capped,
        });
        taus.get_or_insert_with(|| runs.iter().map(|(_, t)| *t).collect());
    }
    let taus: Vec<usize> = taus.unwrap_or_default().into_iter().flatten().collect();
    let max_k = *cfg.ks.iter().max().unwrap_or(&0);
    let hole_decay = (0..=max_k)
        .map(|k| HoleDecay {
            k,
            holes: taus.iter().map(|t| t.saturating_sub(k + 1)).sum::<usize>() as f64
                / taus.len().max(1) as f64,
            holes_expected: analytics.expected_holes(k as u32, 1),
        })
        .collect();
    Ok(TwoStateReport {
        schema: "perfsim.twostate.v1",
        config: cfg.clone(),
        rows,
        hole_decay,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SurvivalConfig {
    pub at: Vec<usize>,
    pub n: usize,
    pub theta: f64,
    pub p: f64,
    pub seed: u64,
    #[serde(skip)]
    pub jobs: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct SurvivalRow {
    pub i: usize,
    pub exceed: u64,
    pub n: u64,
    pub fraction: f64,
    pub expected: f64,
    /// Standardized deviation from `expected`.
    pub z: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SurvivalReport {
    pub schema: &'static str,
    pub config: SurvivalConfig,
    pub rows: Vec<SurvivalRow>,
}

/// Empirical `P(τ > i)` for lag-one coupled two-state pairs.
pub fn survival(cfg: &SurvivalConfig) -> Result<SurvivalReport> {
    check_n(cfg.n, "--n")?;
    let params = TwoStateParams::new(cfg.theta, cfg.p)?;
    let kernel = TwoState::new(params);
    let analytics = twostate_analytics(&params);
    let taus = par_indexed(cfg.n, cfg.jobs, |i| {
        let keys = PairKeys {
            master_seed: cfg.seed,
            index: i,
        };
        Ok(run_coupled(&kernel, Coupling::Common, 0, 1, keys, DEFAULT_CAP)?.tau)
    })?;
    let n = cfg.n as u64;
    let rows = cfg
        .at
        .iter()
        .map(|&i| {
            if i == 0 {
                return Err(arg("survival indices start at 1"));
            }
            let exceed = taus.iter().filter(|t| t.is_none_or(|t| t > i)).count() as u64;
            let expected = analytics.p_noncoal(i as u32);
            Ok(SurvivalRow {
                i,
                exceed,
                n,
                fraction: exceed as f64 / n as f64,
                expected,
                z: stats::binomial_z(exceed, n, expected),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SurvivalReport {
        schema: "perfsim.survival.v1",
        config: cfg.clone(),
        rows,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SetsConfig {
    pub set_size: usize,
    pub block_len: usize,
    pub n_sets: usize,
    pub theta: f64,
    pub p: f64,
    pub seed: u64,
    #[serde(skip)]
    pub jobs: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct SetsReport {
    pub schema: &'static str,
    pub config: SetsConfig,
    pub n_points: usize,
    pub proportion_state1: f64,
    pub rho: f64,
    pub rho_se: f64,
    pub rho_expected: f64,
    pub cross_rho: f64,
    pub cross_rho_se: f64,
    pub n_pairs: usize,
    pub error_sets: usize,
    pub mean_blocks: f64,
    pub max_blocks: usize,
}

/// Two-state sample sets: within-set and across-set serial correlation.
pub fn twostate_sets(cfg: &SetsConfig) -> Result<SetsReport> {
    check_n(cfg.n_sets, "--n-sets")?;
    let params = TwoStateParams::new(cfg.theta, cfg.p)?;
    let kernel = TwoState::new(params);
    let run = RunConfig::new(cfg.set_size, cfg.block_len);
    let sets = par_indexed(cfg.n_sets, cfg.jobs, |i| {
        run_sample_set(&kernel, &run, cfg.seed, i)
    })?;
    let clean: Vec<_> = sets.iter().filter(|s| !s.error).cloned().collect();
    let within = serial_correlation(&clean, state1)?;
    let cross = cross_set_correlation(&clean, state1)?;
    let strings: Vec<_> = sets.iter().flat_map(|s| s.points.iter().cloned()).collect();
    let w = weighted_estimate(&strings, state1)?;
    let blocks = coalescence_summary(&sets)?;
    Ok(SetsReport {
        schema: "perfsim.twostate_sets.v1",
        config: cfg.clone(),
        n_points: strings.len(),
        proportion_state1: w.adjusted,
        rho: within.rho,
        rho_se: within.se(),
        rho_expected: twostate_analytics(&params).rho(cfg.block_len as u32),
        cross_rho: cross.rho,
        cross_rho_se: cross.se(),
        n_pairs: within.n_pairs,
        error_sets: sets.len() - clean.len(),
        mean_blocks: blocks.mean,
        max_blocks: blocks.max,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct NormalConfig {
    pub d: usize,
    pub block_len: usize,
    pub set_size: usize,
    pub n_sets: usize,
    /// Overrides the default `2 / sqrt(d)` random-walk step.
    pub sigma: Option<f64>,
    pub radius: f64,
    pub coupling_interval: usize,
    pub seed: u64,
    #[serde(skip)]
    pub jobs: usize,
}

impl NormalConfig {
    /// `K = 20`, `r = 3`, `M = 1`.
    pub fn new(d: usize, block_len: usize, n_sets: usize, seed: u64) -> Self {
        NormalConfig {
            d,
            block_len,
            set_size: 20,
            n_sets,
            sigma: None,
            radius: 3.0,
            coupling_interval: 1,
            seed,
            jobs: 1,
        }
    }

    fn params(&self) -> Result<NormalParams> {
        let mut params = NormalParams::for_dimension(self.d)?;
        if let Some(sigma) = self.sigma {
            params.sigma = sigma;
        }
        params.r = self.radius;
        params.validate()?;
        Ok(params)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct KsRow {
    pub coordinate: usize,
    pub statistic: f64,
    pub p_value: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct NormalReport {
    pub schema: &'static str,
    pub config: NormalConfig,
    pub n_points: usize,
    pub mean_blocks: f64,
    pub max_blocks: usize,
    pub histogram: Vec<u64>,
    /// Mean blocks counted pairwise, row against its predecessor only.
    pub pair_mean_blocks: f64,
    pub rho: f64,
    pub rho_se: f64,
    pub cross_rho: f64,
    pub error_sets: usize,
    pub string_points: usize,
    pub cells_per_point: f64,
    pub ks: Vec<KsRow>,
}

/// Sample sets for the standard normal target with maximal coupling.
pub fn normal(cfg: &NormalConfig) -> Result<NormalReport> {
    check_n(cfg.n_sets, "--n-sets")?;
    let target = NormalTarget::new(cfg.params()?)?;
    let mut run = RunConfig::new(cfg.set_size, cfg.block_len);
    run.radius = cfg.radius;
    run.coupling_interval = cfg.coupling_interval;
    run.validate()?;
    let sets = par_indexed(cfg.n_sets, cfg.jobs, |i| {
        run_sample_set_maximal(&target, &run, cfg.seed, i)
    })?;
    let blocks = coalescence_summary(&sets)?;
    let pair_blocks =
        stats::summarize_blocks(sets.iter().flat_map(|s| s.pair_blocks.iter().copied()))?;
    let clean: Vec<_> = sets.iter().filter(|s| !s.error).cloned().collect();
    let coord0 = |s: &ChainState| s.coordinate(0).unwrap_or(f64::NAN);
    let (rho, rho_se) = match serial_correlation(&clean, coord0) {
        Ok(c) => (c.rho, c.se()),
        Err(_) => (f64::NAN, f64::NAN),
    };
    let cross_rho = cross_set_correlation(&clean, coord0).map_or(f64::NAN, |c| c.rho);
    let points: Vec<&ChainState> = sets
        .iter()
        .flat_map(|s| s.points.iter().map(|p| p.first()))
        .collect();
    let ks = (0..cfg.d)
        .map(|c| {
            let xs: Vec<f64> = points.iter().filter_map(|p| p.coordinate(c)).collect();
            let t = ks_test(&xs, standard_normal_cdf)?;
            Ok(KsRow {
                coordinate: c + 1,
                statistic: t.statistic,
                p_value: t.p_value,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let cells: usize = sets.iter().map(|s| s.cells_evaluated).sum();
    Ok(NormalReport {
        schema: "perfsim.normal.v1",
        config: cfg.clone(),
        n_points: points.len(),
        mean_blocks: blocks.mean,
        max_blocks: blocks.max,
        histogram: blocks.histogram,
        pair_mean_blocks: pair_blocks.mean,
        rho,
        rho_se,
        cross_rho,
        error_sets: sets.len() - clean.len(),
        string_points: sets
            .iter()
            .flat_map(|s| &s.points)
            .filter(|p| p.nu() > 1)
            .count(),
        cells_per_point: cells as f64 / points.len() as f64,
        ks,
    })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub enum CalibrationTarget {
    TwoState(TwoStateParams),
    Normal(NormalParams),
}

#[derive(Debug, Clone, Serialize)]
pub struct CalibrateConfig {
    pub target: CalibrationTarget,
    pub trial_bs: Vec<usize>,
    pub target_p: f64,
    pub n_pairs: usize,
    pub coupling_interval: usize,
    pub seed: u64,
    #[serde(skip)]
    pub jobs: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct CalibrationRow {
    pub block_len: usize,
    pub n_pairs: usize,
    pub noncoalesced: usize,
    pub fraction: f64,
    pub se: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CalibrationReport {
    pub schema: &'static str,
    pub config: CalibrateConfig,
    pub rows: Vec<CalibrationRow>,
    pub recommended: usize,
    /// False when no trial reached the target; `recommended` is then the best.
    pub achieved: bool,
}

fn noncoalesced_after_one_block<K: Kernel>(
    kernel: &K,
    coupling: Coupling,
    block_len: usize,
    n_pairs: usize,
    seed: u64,
    jobs: usize,
) -> Result<usize> {
    let shape = block_shape(kernel, block_len, coupling)?;
    let misses = par_indexed(n_pairs, jobs, |i| {
        let keys = PairKeys {
            master_seed: seed,
            index: i,
        };
        let x0 = kernel.start(start_key(seed, i, 0));
        let y0 = kernel.start(start_key(seed, i, 1));
        let x1 = advance_free(kernel, coupling, &x0, &rand_block(keys.block(1), &shape))?;
        let (x2, y1) = advance_pair(kernel, coupling, &x1, &y0, &rand_block(keys.block(2), &shape))?;
        Ok(x2 != y1)
    })?;
    Ok(misses.into_iter().filter(|m| *m).count())
}

/// Fraction of dispersed pairs still apart after one shared block, per trial
/// block length.
pub fn calibrate_b(cfg: &CalibrateConfig) -> Result<CalibrationReport> {
    check_n(cfg.n_pairs, "--n-pairs")?;
    if cfg.trial_bs.is_empty() || cfg.trial_bs.contains(&0) {
        return Err(arg("trial block lengths must be positive"));
    }
    if !(cfg.target_p > 0.0 && cfg.target_p <= 1.0) {
        return Err(arg("--target-p must lie in (0, 1]"));
    }
    let mut trial_bs = cfg.trial_bs.clone();
    trial_bs.sort_unstable();
    trial_bs.dedup();
    let mut rows = Vec::with_capacity(trial_bs.len());
    for &b in &trial_bs {
        let misses = match cfg.target {
            CalibrationTarget::TwoState(params) => noncoalesced_after_one_block(
                &TwoState::new(params),
                Coupling::Common,
                b,
                cfg.n_pairs,
                cfg.seed,
                cfg.jobs,
            )?,
            CalibrationTarget::Normal(params) => {
                if b % cfg.coupling_interval != 0 {
                    return Err(arg(format!(
                        "M = {} does not divide trial B = {b}",
                        cfg.coupling_interval
                    )));
                }
                let coupling = Coupling::Maximal {
                    radius: params.r,
                    interval: cfg.coupling_interval,
                };
                noncoalesced_after_one_block(
                    &NormalTarget::new(params)?,
                    coupling,
                    b,
                    cfg.n_pairs,
                    cfg.seed,
                    cfg.jobs,
                )?
            }
        };
        let n = cfg.n_pairs as f64;
        let fraction = misses as f64 / n;
        rows.push(CalibrationRow {
            block_len: b,
            n_pairs: cfg.n_pairs,
            noncoalesced: misses,
            fraction,
            se: (fraction * (1.0 - fraction) / n).sqrt(),
        });
    }
    let hit = rows.iter().find(|r| r.fraction <= cfg.target_p);
    let (recommended, achieved) = match hit {
        Some(r) => (r.block_len, true),
        None => {
            let best = rows
                .iter()
                .min_by(|a, b| a.fraction.total_cmp(&b.fraction))
                .expect("at least one trial");
            (best.block_len, false)
        }
    };
    Ok(CalibrationReport {
        schema: "perfsim.calibrate_b.v1",
        config: cfg.clone(),
        rows,
        recommended,
        achieved,
    })
}
