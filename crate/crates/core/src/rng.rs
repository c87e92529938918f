//! Keyed, replayable random streams.
//!
//! Every stream is a pure function of a [`StreamKey`]: the master seed, set
//! index and block index form the ChaCha8 key and the substream selects the
//! ChaCha stream id. "Restoring the seed" to regenerate an earlier block is
//! therefore just re-deriving the stream from the same key; nothing global is
//! mutated and sample sets can be generated in any order or in parallel.
//!
//! Uniforms are open-interval `(0, 1)` doubles built from the top 53 bits of a
//! 64-bit output. Standard normals use the Box–Muller transform on two such
//! uniforms (cosine branch first, sine branch cached for the next call),
//! evaluated with `libm` so the results do not depend on the platform's libm.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Role of a stream within one block of randomness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Substream {
    /// Draws consumed by the internal MCMC kernel.
    Mcmc,
    /// Standard normals giving the direction of maximal-coupling jumps.
    Dir,
    /// Uniforms giving the magnitude of maximal-coupling jumps.
    Mag,
    /// Uniforms for the Metropolis–Hastings test after a coupling jump.
    Mh,
    /// Starting points, one key per chain row.
    Start,
}

impl Substream {
    fn stream_id(self) -> u64 {
        match self {
            Substream::Mcmc => 0,
            Substream::Dir => 1,
            Substream::Mag => 2,
            Substream::Mh => 3,
            Substream::Start => 4,
        }
    }
}

/// Full address of one random stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StreamKey {
    pub master_seed: u64,
    pub set_index: u64,
    pub block_index: u64,
    pub substream: Substream,
}

/// Address of one block of randomness (all four substreams).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BlockId {
    pub master_seed: u64,
    pub set_index: u64,
    pub block_index: u64,
}

impl BlockId {
    pub fn new(master_seed: u64, set_index: u64, block_index: u64) -> Self {
        BlockId {
            master_seed,
            set_index,
            block_index,
        }
    }

    pub fn stream(self, substream: Substream) -> StreamKey {
        StreamKey {
            master_seed: self.master_seed,
            set_index: self.set_index,
            block_index: self.block_index,
            substream,
        }
    }
}

/// Key of the starting-point stream for chain `row` of a set.
pub fn start_key(master_seed: u64, set_index: u64, row: u64) -> StreamKey {
    BlockId::new(master_seed, set_index, row).stream(Substream::Start)
}

const KEY_DOMAIN: u64 = 0x7065_7266_7369_6d31; // "perfsim1"

/// A generator positioned at the start of a keyed stream.
///
/// Handles are single-owner; derive a fresh one wherever a stream is needed.
#[derive(Debug, Clone)]
pub struct KeyedStream {
    rng: ChaCha8Rng,
    spare_normal: Option<f64>,
}

/// Derives the stream for `key`. Deriving twice restarts the same sequence.
pub fn derive_stream(key: StreamKey) -> KeyedStream {
    let mut seed = [0u8; 32];
    seed[0..8].copy_from_slice(&key.master_seed.to_le_bytes());
    seed[8..16].copy_from_slice(&key.set_index.to_le_bytes());
    seed[16..24].copy_from_slice(&key.block_index.to_le_bytes());
    seed[24..32].copy_from_slice(&KEY_DOMAIN.to_le_bytes());
    let mut rng = ChaCha8Rng::from_seed(seed);
    rng.set_stream(key.substream.stream_id());
    KeyedStream {
        rng,
        spare_normal: None,
    }
}

impl KeyedStream {
    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Uniform on the open interval (0, 1).
    pub fn uniform(&mut self) -> f64 {
        const SCALE: f64 = 1.0 / (1u64 << 53) as f64;
        ((self.next_u64() >> 11) as f64 + 0.5) * SCALE
    }

    /// Standard normal via Box–Muller.
    pub fn normal(&mut self) -> f64 {
        if let Some(z) = self.spare_normal.take() {
            return z;
        }
        let u1 = self.uniform();
        let u2 = self.uniform();
        let radius = libm::sqrt(-2.0 * libm::log(u1));
        let angle = 2.0 * std::f64::consts::PI * u2;
        self.spare_normal = Some(radius * libm::sin(angle));
        radius * libm::cos(angle)
    }
}

/// Per-iteration draw requirements of a kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DrawLayout {
    pub normals: usize,
    pub uniforms: usize,
}

/// Dimensions of one block of randomness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockShape {
    /// Kernel iterations per block (B).
    pub iterations: usize,
    /// Kernel iterations per maximal-coupling step (M), if coupling is used.
    pub coupling_interval: Option<usize>,
    /// State dimension, the length of each jump direction.
    pub dim: usize,
    pub layout: DrawLayout,
}

impl BlockShape {
    pub fn new(
        iterations: usize,
        coupling_interval: Option<usize>,
        dim: usize,
        layout: DrawLayout,
    ) -> Result<Self> {
        if iterations == 0 {
            return Err(invalid("block length B must be at least 1"));
        }
        if dim == 0 {
            return Err(invalid("dimension must be at least 1"));
        }
        if let Some(m) = coupling_interval {
            if m == 0 || !iterations.is_multiple_of(m) {
                return Err(invalid(format!(
                    "coupling interval M = {m} must divide block length B = {iterations}"
                )));
            }
        }
        Ok(BlockShape {
            iterations,
            coupling_interval,
            dim,
            layout,
        })
    }

    /// Number of coupling steps per block (B / M), zero without coupling.
    pub fn coupling_steps(&self) -> usize {
        self.coupling_interval
            .map_or(0, |m| self.iterations / m)
    }
}

/// Draws for one kernel iteration.
#[derive(Debug, Clone, Copy)]
pub struct IterationDraws<'a> {
    pub normals: &'a [f64],
    pub uniforms: &'a [f64],
}

/// Draws for one maximal-coupling step.
#[derive(Debug, Clone, Copy)]
pub struct CouplingDraws<'a> {
    pub dir: &'a [f64],
    pub mag: f64,
    pub mh: f64,
}

/// All random numbers used by one column of the chain × block matrix.
#[derive(Debug, Clone)]
pub struct RandomBlock {
    shape: BlockShape,
    mcmc_normals: Vec<f64>,
    mcmc_uniforms: Vec<f64>,
    dir: Vec<f64>,
    mag: Vec<f64>,
    mh: Vec<f64>,
}

/// Generates the full bundle for one block.
pub fn rand_block(id: BlockId, shape: &BlockShape) -> RandomBlock {
    let b = shape.iterations;
    let DrawLayout { normals, uniforms } = shape.layout;
    let mut mcmc_normals = Vec::with_capacity(b * normals);
    let mut mcmc_uniforms = Vec::with_capacity(b * uniforms);
    if normals + uniforms > 0 {
        let mut s = derive_stream(id.stream(Substream::Mcmc));
        for _ in 0..b {
            for _ in 0..normals {
                mcmc_normals.push(s.normal());
            }
            for _ in 0..uniforms {
                mcmc_uniforms.push(s.uniform());
            }
        }
    }

    let steps = shape.coupling_steps();
    let (mut dir, mut mag, mut mh) = (Vec::new(), Vec::new(), Vec::new());
    if steps > 0 {
        let mut s = derive_stream(id.stream(Substream::Dir));
        dir = (0..steps * shape.dim).map(|_| s.normal()).collect();
        let mut s = derive_stream(id.stream(Substream::Mag));
        mag = (0..steps).map(|_| s.uniform()).collect();
        let mut s = derive_stream(id.stream(Substream::Mh));
        mh = (0..steps).map(|_| s.uniform()).collect();
    }

    RandomBlock {
        shape: *shape,
        mcmc_normals,
        mcmc_uniforms,
        dir,
        mag,
        mh,
    }
}

impl RandomBlock {
    pub fn shape(&self) -> &BlockShape {
        &self.shape
    }

    pub fn iterations(&self) -> usize {
        self.shape.iterations
    }

    pub fn coupling_steps(&self) -> usize {
        self.shape.coupling_steps()
    }

    pub fn iteration(&self, t: usize) -> Result<IterationDraws<'_>> {
        if t >= self.shape.iterations {
            return Err(Error::BlockExhausted {
                start: t,
                end: t + 1,
                available: self.shape.iterations,
            });
        }
        let DrawLayout { normals, uniforms } = self.shape.layout;
        Ok(IterationDraws {
            normals: &self.mcmc_normals[t * normals..(t + 1) * normals],
            uniforms: &self.mcmc_uniforms[t * uniforms..(t + 1) * uniforms],
        })
    }

    pub fn coupling(&self, step: usize) -> Result<CouplingDraws<'_>> {
        let steps = self.coupling_steps();
        if step >= steps {
            return Err(invalid(format!(
                "coupling step {step} out of range (block has {steps})"
            )));
        }
        let d = self.shape.dim;
        Ok(CouplingDraws {
            dir: &self.dir[step * d..(step + 1) * d],
            mag: self.mag[step],
            mh: self.mh[step],
        })
    }

    /// Every uniform held by the block, kernel and coupling draws alike.
    pub fn uniforms(&self) -> impl Iterator<Item = f64> + '_ {
        self.mcmc_uniforms
            .iter()
            .chain(self.mag.iter())
            .chain(self.mh.iter())
            .copied()
    }

    /// FNV-1a over the bit patterns of every draw.
    pub fn fingerprint(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let all = self
            .mcmc_normals
            .iter()
            .chain(&self.mcmc_uniforms)
            .chain(&self.dir)
            .chain(&self.mag)
            .chain(&self.mh);
        for x in all {
            for byte in x.to_bits().to_le_bytes() {
                h ^= u64::from(byte);
                h = h.wrapping_mul(0x0000_0100_0000_01b3);
            }
        }
        h
    }
}

impl PartialEq for RandomBlock {
    fn eq(&self, other: &Self) -> bool {
        fn bits_eq(a: &[f64], b: &[f64]) -> bool {
            a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits())
        }
        self.shape == other.shape
            && bits_eq(&self.mcmc_normals, &other.mcmc_normals)
            && bits_eq(&self.mcmc_uniforms, &other.mcmc_uniforms)
            && bits_eq(&self.dir, &other.dir)
            && bits_eq(&self.mag, &other.mag)
            && bits_eq(&self.mh, &other.mh)
    }
}

/// Parses a master seed given in decimal or `0x`-prefixed hex.
pub fn parse_seed(text: &str) -> Result<u64> {
    let t = text.trim();
    let parsed = match t.strip_prefix("0x").or_else(|| t.strip_prefix("0X")) {
        Some(hex) => u64::from_str_radix(&hex.replace('_', ""), 16),
        None => t.replace('_', "").parse::<u64>(),
    };
    parsed.map_err(|_| invalid(format!("seed `{text}` is not a 64-bit unsigned integer")))
}
