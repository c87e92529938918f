//! The sample-set engine.
//!
//! A set of `K` chains is laid out as a `K × K` matrix of cells, each cell a
//! block of `B` kernel iterations. Column `c` is driven by random block `c`
//! for every row. Row `r` starts on the diagonal at column `r`, runs to the
//! right and wraps around, so its `K`-th and final cell is column `r - 1`
//! (column `K - 1` for row 0). Rows `r` and `r + 1` (row `K - 1` pairs with
//! row 0) are then the `X` and `Y` of a lag-one-block coupled pair, and row
//! `r`'s final value is a perfect sample if the two have coalesced by then.
//!
//! The upper triangle (columns left to right, rows `0..=c`) is computed first
//! while the row-0 values are cached. The random blocks are then re-derived
//! from their keys for the lower triangle, where row 0 is replaced by its
//! cached values. Rows that have coalesced with an earlier row copy it instead
//! of running the kernel; the vector `a` records who copies whom.
//!
//! Pairs that have not coalesced by the end of their matrix cells are
//! extended with fresh blocks until they do, which yields a string sample.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::kernel::{mcmc, min_ind, ChainState, Kernel, Metric};
use crate::pair::{block_shape, jump_coupled, jump_free, Coupling};
use crate::rng::{rand_block, start_key, BlockId, BlockShape, RandomBlock};
use crate::unbiased::{continue_coupled, DEFAULT_CAP, sample_string, CoupledTrace, StringSample};

const TAIL_FLAG: u64 = 1 << 63;

/// Block index of the `t`-th extra block (from 1) used to extend pair `row`.
pub fn tail_block_index(row: usize, t: usize) -> u64 {
    TAIL_FLAG | ((row as u64) << 32) | t as u64
}

/// Parameters of one sample set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    /// Points per set (K).
    pub set_size: usize,
    /// Kernel iterations per block (B).
    pub block_len: usize,
    /// Kernel iterations per maximal-coupling step (M), a divisor of B.
    pub coupling_interval: usize,
    /// Radius of the maximal-coupling jump ball.
    pub radius: f64,
    /// Intended probability that a pair fails to coalesce within one block.
    pub target_noncoalescence: f64,
    /// Extra blocks allowed when extending a pair into a string.
    pub tail_cap: usize,
}

impl RunConfig {
    /// `K`, `B` with `M = 1`, `r = 3`, `P = 0.1` and a tail cap of
    /// [`DEFAULT_CAP`] blocks.
    pub fn new(set_size: usize, block_len: usize) -> Self {
        RunConfig {
            set_size,
            block_len,
            coupling_interval: 1,
            radius: 3.0,
            target_noncoalescence: 0.1,
            tail_cap: DEFAULT_CAP,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.set_size == 0 {
            return Err(invalid("set size K must be at least 1"));
        }
        if self.block_len == 0 {
            return Err(invalid("block length B must be at least 1"));
        }
        if self.coupling_interval == 0 || !self.block_len.is_multiple_of(self.coupling_interval) {
            return Err(invalid(format!(
                "M = {} must divide B = {}",
                self.coupling_interval, self.block_len
            )));
        }
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return Err(invalid(format!("radius must be positive, got {}", self.radius)));
        }
        if !(self.target_noncoalescence > 0.0 && self.target_noncoalescence < 1.0) {
            return Err(invalid("target non-coalescence probability must lie in (0, 1)"));
        }
        if self.tail_cap == 0 {
            return Err(invalid("tail cap must be at least 1"));
        }
        Ok(())
    }

    fn maximal(&self) -> Coupling {
        Coupling::Maximal {
            radius: self.radius,
            interval: self.coupling_interval,
        }
    }
}

/// Which half of the matrix a cell belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Phase {
    Upper,
    Lower,
}

/// One executed (non-copied) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellRecord {
    pub row: usize,
    pub column: usize,
    pub phase: Phase,
    pub block: BlockId,
    pub fingerprint: u64,
}

/// Bookkeeping captured when a set is run with auditing enabled.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Audit {
    pub cells: Vec<CellRecord>,
    /// Row 0 after each column, as cached during the upper triangle.
    pub row0: Vec<ChainState>,
    /// Lower-triangle blocks that differed from their upper-triangle originals.
    pub replay_mismatches: usize,
}

/// `K` perfect sample points (strings when a pair needed extension).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SampleSet {
    pub set_index: u64,
    pub points: Vec<StringSample>,
    /// For row `i`: blocks run from its start until it first joined an
    /// earlier row. Row 0, which never joins, and rows that only coalesce
    /// through extension use the count from `pair_blocks`.
    pub blocks_to_coalesce: Vec<usize>,
    /// For row `r`: blocks run by row `r + 1` (row 0 for the last row) until
    /// it equalled row `r`.
    pub pair_blocks: Vec<usize>,
    /// Some pair failed to coalesce within the matrix.
    pub error: bool,
    /// Effective burn-in, `K · B` iterations.
    pub k_effective: usize,
    /// Matrix cells in which the kernel actually ran.
    pub cells_evaluated: usize,
    /// Extra blocks spent on string extension.
    pub tail_blocks: usize,
    pub audit: Option<Audit>,
}

impl SampleSet {
    /// The set's points as plain states; `None` if any point is a string.
    pub fn single_points(&self) -> Option<Vec<&ChainState>> {
        self.points
            .iter()
            .map(|s| (s.nu() == 1).then(|| s.first()))
            .collect()
    }
}

/// Tracks, for every adjacent pair, when `Y` first equals `X`.
struct PairTracker {
    k: usize,
    blocks: Vec<Option<usize>>,
    x_final: Vec<Option<ChainState>>,
    y_final: Vec<Option<ChainState>>,
    linked: Vec<Option<usize>>,
}

impl PairTracker {
    fn new(k: usize) -> Self {
        PairTracker {
            k,
            blocks: vec![None; k],
            x_final: vec![None; k],
            y_final: vec![None; k],
            linked: vec![None; k],
        }
    }

    fn link_upper(&mut self, row: usize, c: usize) {
        self.linked[row].get_or_insert(c - row + 1);
    }

    fn link_lower(&mut self, row: usize, j: usize) {
        self.linked[row].get_or_insert(self.k - row + j + 1);
    }

    fn note(&mut self, pair: usize, y_blocks: usize, x: &ChainState, y: &ChainState) {
        if self.blocks[pair].is_none() && x == y {
            self.blocks[pair] = Some(y_blocks);
        }
    }

    fn after_upper(&mut self, c: usize, q: &[ChainState]) {
        for r in 0..c {
            self.note(r, c - r, &q[r], &q[r + 1]);
        }
        if c == self.k - 1 {
            self.x_final[0] = Some(q[0].clone());
            self.y_final[0] = Some(q[1].clone());
        }
    }

    fn after_lower(&mut self, j: usize, q: &[ChainState]) {
        let k = self.k;
        for r in j + 1..k - 1 {
            self.note(r, k - r + j, &q[r], &q[r + 1]);
        }
        self.note(k - 1, j + 1, &q[k - 1], &q[0]);
        let r = j + 1;
        self.x_final[r] = Some(q[r].clone());
        self.y_final[r] = Some(if r + 1 < k { q[r + 1].clone() } else { q[0].clone() });
    }
}

/// Retires row `j` at the start of lower-triangle column `j` and checks that
/// row `j + 1` has coalesced with it.
///
/// When it has, rows copying `j` now copy `j + 1` and row `j + 1` inherits
/// row `j`'s link. When it has not, the pair is flagged and rows copying `j`
/// become active again from their current (equal) values.
fn retire_row(a: &mut [Option<usize>], j: usize) -> bool {
    let coalesced = a[j + 1] == Some(j);
    if coalesced {
        a[j + 1] = a[j];
    }
    for link in a.iter_mut() {
        if *link == Some(j) {
            *link = if coalesced { Some(j + 1) } else { None };
        }
    }
    !coalesced
}

fn redirect(a: &mut [Option<usize>], from: usize, to: usize) {
    for link in a.iter_mut() {
        if *link == Some(from) {
            *link = Some(to);
        }
    }
}

struct Ctx<'a, K: Kernel + ?Sized> {
    kernel: &'a K,
    config: &'a RunConfig,
    coupling: Coupling,
    shape: BlockShape,
    master_seed: u64,
    set_index: u64,
    audit: Option<Audit>,
    upper_blocks: Vec<RandomBlock>,
    cells: usize,
}

impl<K: Kernel + ?Sized> Ctx<'_, K> {
    fn block_id(&self, c: usize) -> BlockId {
        BlockId::new(self.master_seed, self.set_index, c as u64)
    }

    fn column_block(&mut self, c: usize, phase: Phase) -> RandomBlock {
        let block = rand_block(self.block_id(c), &self.shape);
        if let Some(audit) = self.audit.as_mut() {
            match phase {
                Phase::Upper => self.upper_blocks.push(block.clone()),
                Phase::Lower => {
                    if self.upper_blocks[c] != block {
                        audit.replay_mismatches += 1;
                    }
                }
            }
        }
        block
    }

    fn record_cell(&mut self, row: usize, column: usize, phase: Phase, block: &RandomBlock) {
        self.cells += 1;
        let id = self.block_id(column);
        if let Some(audit) = self.audit.as_mut() {
            audit.cells.push(CellRecord {
                row,
                column,
                phase,
                block: id,
                fingerprint: block.fingerprint(),
            });
        }
    }

    fn starts(&self) -> Vec<ChainState> {
        (0..self.config.set_size)
            .map(|r| {
                self.kernel
                    .start(start_key(self.master_seed, self.set_index, r as u64))
            })
            .collect()
    }

    /// Extends pair `row` from `X_K` and `Y_{K-1}` with fresh blocks.
    fn extend(&self, row: usize, x: ChainState, y: ChainState) -> Result<(StringSample, usize)> {
        let k = self.config.set_size;
        let trace = CoupledTrace {
            k,
            lag: self.config.block_len,
            xs: Vec::new(),
            ys: Vec::new(),
            tau: None,
        };
        let (seed, set) = (self.master_seed, self.set_index);
        let trace = continue_coupled(
            self.kernel,
            self.coupling,
            &self.shape,
            trace,
            x,
            y,
            k,
            k + self.config.tail_cap,
            |t| BlockId::new(seed, set, tail_block_index(row, t - k)),
        )?;
        let tau = trace.tau.ok_or(Error::TailUnresolved {
            set_index: self.set_index,
            row,
            blocks: self.config.tail_cap,
        })?;
        Ok((sample_string(&trace)?, tau))
    }

    fn finish(
        mut self,
        tracker: PairTracker,
        error: bool,
        row0: Vec<ChainState>,
    ) -> Result<SampleSet> {
        let k = self.config.set_size;
        let mut points = Vec::with_capacity(k);
        let mut pair_blocks = Vec::with_capacity(k);
        let mut tail_blocks = 0;
        for r in 0..k {
            let x = tracker.x_final[r].clone().expect("every pair is finalised");
            match tracker.blocks[r] {
                Some(b) => {
                    points.push(StringSample::single(x));
                    pair_blocks.push(b.max(1));
                }
                None => {
                    let y = tracker.y_final[r].clone().expect("every pair is finalised");
                    let (string, tau) = self.extend(r, x, y)?;
                    tail_blocks += tau - k;
                    points.push(string);
                    pair_blocks.push(tau - 1);
                }
            }
        }
        let blocks_to_coalesce = (0..k)
            .map(|i| tracker.linked[i].unwrap_or(pair_blocks[(i + k - 1) % k]))
            .collect();
        if let Some(audit) = self.audit.as_mut() {
            audit.row0 = row0;
        }
        Ok(SampleSet {
            set_index: self.set_index,
            points,
            blocks_to_coalesce,
            pair_blocks,
            error,
            k_effective: k * self.config.block_len,
            cells_evaluated: self.cells,
            tail_blocks,
            audit: self.audit,
        })
    }

    /// K = 1: the lone chain is paired with an independent second start.
    fn single_chain(mut self, coupling: Coupling) -> Result<SampleSet> {
        let x0 = self.kernel.start(start_key(self.master_seed, self.set_index, 0));
        let y0 = self.kernel.start(start_key(self.master_seed, self.set_index, 1));
        let block = self.column_block(0, Phase::Upper);
        self.record_cell(0, 0, Phase::Upper, &block);
        let x1 = crate::pair::advance_free(self.kernel, coupling, &x0, &block)?;
        let mut tracker = PairTracker::new(1);
        tracker.note(0, 1, &x1, &y0);
        tracker.x_final[0] = Some(x1.clone());
        tracker.y_final[0] = Some(y0);
        let error = tracker.blocks[0].is_none();
        self.finish(tracker, error, vec![x1])
    }
}

fn make_ctx<'a, K: Kernel + ?Sized>(
    kernel: &'a K,
    config: &'a RunConfig,
    coupling: Coupling,
    master_seed: u64,
    set_index: u64,
    audit: bool,
) -> Result<Ctx<'a, K>> {
    config.validate()?;
    Ok(Ctx {
        kernel,
        config,
        coupling,
        shape: block_shape(kernel, config.block_len, coupling)?,
        master_seed,
        set_index,
        audit: audit.then(Audit::default),
        upper_blocks: Vec::new(),
        cells: 0,
    })
}

/// One sample set with common random numbers only.
pub fn run_sample_set<K: Kernel + ?Sized>(
    kernel: &K,
    config: &RunConfig,
    master_seed: u64,
    set_index: u64,
) -> Result<SampleSet> {
    plain(make_ctx(kernel, config, Coupling::Common, master_seed, set_index, false)?)
}

/// [`run_sample_set`] recording an [`Audit`].
pub fn run_sample_set_audited<K: Kernel + ?Sized>(
    kernel: &K,
    config: &RunConfig,
    master_seed: u64,
    set_index: u64,
) -> Result<SampleSet> {
    plain(make_ctx(kernel, config, Coupling::Common, master_seed, set_index, true)?)
}

#[allow(clippy::needless_range_loop)]
fn plain<K: Kernel + ?Sized>(mut ctx: Ctx<'_, K>) -> Result<SampleSet> {
    let k = ctx.config.set_size;
    if k == 1 {
        return ctx.single_chain(Coupling::Common);
    }
    let metric: Metric = ctx.kernel.spec().metric;
    let b = ctx.config.block_len;
    let mut q = ctx.starts();
    let mut row0 = Vec::with_capacity(k);
    let mut a: Vec<Option<usize>> = vec![None; k];
    let mut tracker = PairTracker::new(k);
    let mut error = false;

    for c in 0..k {
        let block = ctx.column_block(c, Phase::Upper);
        for i in 0..=c {
            if let Some(m) = a[i] {
                q[i] = q[m].clone();
                continue;
            }
            q[i] = mcmc(ctx.kernel, &q[i], &block, 0, b)?;
            ctx.record_cell(i, c, Phase::Upper, &block);
            if i == 0 {
                row0.push(q[0].clone());
            } else {
                let m = min_ind(&q, 0, i, metric)?;
                if q[i] == q[m] {
                    a[i] = Some(m);
                    tracker.link_upper(i, c);
                }
            }
        }
        tracker.after_upper(c, &q);
    }

    for j in 0..k - 1 {
        error |= retire_row(&mut a, j);
        q[0] = row0[j].clone();
        let block = ctx.column_block(j, Phase::Lower);
        for i in j + 1..k {
            if let Some(m) = a[i] {
                q[i] = q[m].clone();
                continue;
            }
            q[i] = mcmc(ctx.kernel, &q[i], &block, 0, b)?;
            ctx.record_cell(i, j, Phase::Lower, &block);
            let m = if i == j + 1 {
                0
            } else {
                min_ind(&q, j + 1, i, metric)?
            };
            if q[i] == q[m] {
                a[i] = Some(m);
                tracker.link_lower(i, j);
            }
        }
        tracker.after_lower(j, &q);
    }
    error |= a[k - 1] != Some(0);
    ctx.finish(tracker, error, row0)
}

/// One sample set with a maximally coupled M–H jump after every `M` kernel
/// iterations. Row 0 jumps freely; every other active row couples its jump
/// to the row whose pre-jump value is closest to its own.
pub fn run_sample_set_maximal<K: Kernel + ?Sized>(
    kernel: &K,
    config: &RunConfig,
    master_seed: u64,
    set_index: u64,
) -> Result<SampleSet> {
    let coupling = config.maximal();
    maximal(make_ctx(kernel, config, coupling, master_seed, set_index, false)?)
}

/// [`run_sample_set_maximal`] recording an [`Audit`].
pub fn run_sample_set_maximal_audited<K: Kernel + ?Sized>(
    kernel: &K,
    config: &RunConfig,
    master_seed: u64,
    set_index: u64,
) -> Result<SampleSet> {
    let coupling = config.maximal();
    maximal(make_ctx(kernel, config, coupling, master_seed, set_index, true)?)
}

/// Pre-jump, proposed and accepted values of row 0 for one sub-block.
#[derive(Clone)]
struct Row0Step {
    pre: ChainState,
    star: Vec<f64>,
    post: ChainState,
}

#[allow(clippy::needless_range_loop)]
fn maximal<K: Kernel + ?Sized>(mut ctx: Ctx<'_, K>) -> Result<SampleSet> {
    let k = ctx.config.set_size;
    let coupling = ctx.coupling;
    if k == 1 {
        return ctx.single_chain(coupling);
    }
    if ctx.kernel.spec().metric != Metric::Euclidean {
        return Err(Error::Unsupported("maximal coupling without a Euclidean metric"));
    }
    let m_len = ctx.config.coupling_interval;
    let subs = ctx.config.block_len / m_len;
    let radius = ctx.config.radius;
    let metric = Metric::Euclidean;

    let mut q = ctx.starts();
    let mut q_pre = q.clone();
    let mut q_star: Vec<Vec<f64>> = vec![Vec::new(); k];
    let mut cache: Vec<Vec<Row0Step>> = Vec::with_capacity(k);
    let mut a: Vec<Option<usize>> = vec![None; k];
    let mut tracker = PairTracker::new(k);
    let mut error = false;

    for c in 0..k {
        let block = ctx.column_block(c, Phase::Upper);
        let mut ran = vec![false; c + 1];
        let mut column_cache = Vec::with_capacity(subs);
        for sub in 0..subs {
            let draws = block.coupling(sub)?;
            for i in 0..=c {
                if let Some(m) = a[i] {
                    q[i] = q[m].clone();
                    q_pre[i] = q_pre[m].clone();
                    q_star[i] = q_star[m].clone();
                    continue;
                }
                ran[i] = true;
                q_pre[i] = mcmc(ctx.kernel, &q[i], &block, sub * m_len, m_len)?;
                if i == 0 {
                    let out = jump_free(ctx.kernel, &q_pre[0], draws, radius)?;
                    q_star[0] = out.star;
                    q[0] = out.post;
                    column_cache.push(Row0Step {
                        pre: q_pre[0].clone(),
                        star: q_star[0].clone(),
                        post: q[0].clone(),
                    });
                    continue;
                }
                let mut m = min_ind(&q_pre, 0, i, metric)?;
                let out =
                    jump_coupled(ctx.kernel, &q_pre[i], &q_pre[m], &q_star[m], draws, radius)?;
                q_star[i] = out.star;
                q[i] = out.post;
                if q[i] == q[m] {
                    if let Some(earliest) = a[m] {
                        m = earliest;
                    }
                    a[i] = Some(m);
                    tracker.link_upper(i, c);
                    redirect(&mut a, i, m);
                }
            }
        }
        for (i, _) in ran.iter().enumerate().filter(|(_, r)| **r) {
            ctx.record_cell(i, c, Phase::Upper, &block);
        }
        cache.push(column_cache);
        tracker.after_upper(c, &q);
    }

    for j in 0..k - 1 {
        error |= retire_row(&mut a, j);
        let block = ctx.column_block(j, Phase::Lower);
        let mut ran = vec![false; k];
        for sub in 0..subs {
            let step = &cache[j][sub];
            q_pre[0] = step.pre.clone();
            q_star[0] = step.star.clone();
            q[0] = step.post.clone();
            let draws = block.coupling(sub)?;
            for i in j + 1..k {
                if let Some(m) = a[i] {
                    q[i] = q[m].clone();
                    q_pre[i] = q_pre[m].clone();
                    q_star[i] = q_star[m].clone();
                    continue;
                }
                ran[i] = true;
                q_pre[i] = mcmc(ctx.kernel, &q[i], &block, sub * m_len, m_len)?;
                let mut m = if i == j + 1 {
                    0
                } else {
                    min_ind(&q_pre, j + 1, i, metric)?
                };
                let out =
                    jump_coupled(ctx.kernel, &q_pre[i], &q_pre[m], &q_star[m], draws, radius)?;
                q_star[i] = out.star;
                q[i] = out.post;
                if q[i] == q[m] {
                    if let Some(earliest) = a[m].filter(|e| *e > 0) {
                        m = earliest;
                    }
                    a[i] = Some(m);
                    tracker.link_lower(i, j);
                    if m > 0 {
                        redirect(&mut a, i, m);
                    }
                }
            }
        }
        for (i, _) in ran.iter().enumerate().filter(|(_, r)| **r) {
            ctx.record_cell(i, j, Phase::Lower, &block);
        }
        tracker.after_lower(j, &q);
    }
    error |= a[k - 1] != Some(0);
    let row0 = cache
        .iter()
        .map(|col| col.last().expect("at least one sub-block").post.clone())
        .collect();
    ctx.finish(tracker, error, row0)
}
