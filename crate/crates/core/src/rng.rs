//! Reproducible random streams.
//!
//! Every draw is addressed by `(seed, stream_id, tag, position)`. The key of a
//! ChaCha8 generator is built from the seed and the substream tag, and the
//! 64-bit ChaCha stream selector is the replicate id, so two replicates never
//! share key material and no replicate depends on how many draws another one
//! consumed. Parallel schedules therefore reproduce serial output bit for bit.
//!
//! Gaussians come from the ziggurat sampler in `rand_distr`; the sampler is
//! fixed for a release because it determines the exact output sequence.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::model::XiSampler;

const DOMAIN: u64 = 0x7265_7364_655f_7631; // "resde_v1"

/// Independent substreams of one replicate stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SubstreamTag {
    /// Brownian increments.
    Wiener,
    /// Drift randomization samples.
    Xi,
    /// Drift randomization for the fine run of a coupled pair.
    XiFine,
    /// Auxiliary draws (initial points, verification sampling).
    Aux,
}

impl SubstreamTag {
    fn code(self) -> u64 {
        match self {
            SubstreamTag::Wiener => 1,
            SubstreamTag::Xi => 2,
            SubstreamTag::XiFine => 3,
            SubstreamTag::Aux => 4,
        }
    }
}

/// Seed and replicate index. Cheap to copy; every call to [`RandomStream::substream`]
/// starts the substream from its first draw.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RandomStream {
    pub seed: u64,
    pub stream_id: u64,
}

pub fn make_stream(seed: u64, stream_id: u64) -> RandomStream {
    RandomStream { seed, stream_id }
}

impl RandomStream {
    pub fn substream(&self, tag: SubstreamTag) -> Substream {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&self.seed.to_le_bytes());
        key[8..16].copy_from_slice(&tag.code().to_le_bytes());
        key[16..24].copy_from_slice(&DOMAIN.to_le_bytes());
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(self.stream_id);
        Substream { tag, rng }
    }

    pub fn wiener(&self) -> Substream {
        self.substream(SubstreamTag::Wiener)
    }

    pub fn xi(&self) -> Substream {
        self.substream(SubstreamTag::Xi)
    }
}

/// A positioned generator. Clone it to record a tape of upcoming draws.
#[derive(Debug, Clone)]
pub struct Substream {
    tag: SubstreamTag,
    rng: ChaCha8Rng,
}

impl Substream {
    pub fn tag(&self) -> SubstreamTag {
        self.tag
    }

    pub fn gaussian(&mut self) -> f64 {
        StandardNormal.sample(&mut self.rng)
    }

    /// Uniform on `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        // 53 random mantissa bits.
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn fill_gaussian(&mut self, out: &mut [f64]) {
        for v in out {
            *v = self.gaussian();
        }
    }

    /// One Brownian increment over a step of length `h`, written coordinate-wise.
    pub fn increment(&mut self, sqrt_h: f64, out: &mut [f64]) {
        for v in out {
            *v = sqrt_h * self.gaussian();
        }
    }
}

impl RngCore for Substream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

/// `n` Brownian increments on an equidistant grid over `[0, t_end]`, row-major `n × m`.
pub fn wiener_increments(sub: &mut Substream, t_end: f64, m: usize, n: usize) -> Vec<f64> {
    let sqrt_h = (t_end / n as f64).sqrt();
    let mut out = vec![0.0; n * m];
    for row in out.chunks_exact_mut(m.max(1)) {
        sub.increment(sqrt_h, row);
    }
    out
}

/// `count` i.i.d. draws, flattened `count × dist.dim()`.
pub fn sample_xi<S: XiSampler + ?Sized>(
    sub: &mut Substream,
    dist: &S,
    count: usize,
) -> Result<Vec<f64>> {
    if count == 0 {
        return Err(Error::input("sample_xi needs count >= 1"));
    }
    dist.validate()?;
    let q = dist.dim();
    let mut out = vec![0.0; count * q];
    for row in out.chunks_exact_mut(q) {
        dist.sample_into(sub, row);
    }
    Ok(out)
}

/// Brownian increments of one path seen on two equidistant grids.
#[derive(Debug, Clone, PartialEq)]
pub struct CoupledIncrements {
    pub t_end: f64,
    pub m: usize,
    pub n_coarse: usize,
    pub n_fine: usize,
    /// `n_coarse × m`
    pub coarse: Vec<f64>,
    /// `n_fine × m`
    pub fine: Vec<f64>,
    /// Increments on the least-common-multiple grid, `lcm × m`.
    pub lcm_grid: Vec<f64>,
}

impl CoupledIncrements {
    pub fn coarse_row(&self, k: usize) -> &[f64] {
        &self.coarse[k * self.m..(k + 1) * self.m]
    }

    pub fn fine_row(&self, k: usize) -> &[f64] {
        &self.fine[k * self.m..(k + 1) * self.m]
    }

    pub fn lcm_cells(&self) -> usize {
        self.lcm_grid.len() / self.m
    }
}

/// Generate coupled increments on the LCM grid and aggregate them onto both grids.
pub fn coupled_wiener(
    stream: &RandomStream,
    t_end: f64,
    m: usize,
    n_coarse: usize,
    n_fine: usize,
) -> Result<CoupledIncrements> {
    let mut sub = stream.wiener();
    let grid = LcmGrid::new(n_coarse, n_fine)?;
    let mut out = CoupledIncrements {
        t_end,
        m,
        n_coarse,
        n_fine,
        coarse: Vec::with_capacity(n_coarse * m),
        fine: Vec::with_capacity(n_fine * m),
        lcm_grid: Vec::with_capacity(grid.cells * m),
    };
    walk_coupled(&mut sub, t_end, m, &grid, |ev| {
        match ev {
            GridEvent::Cell(g) => out.lcm_grid.extend_from_slice(g),
            GridEvent::Fine(dw) => out.fine.extend_from_slice(dw),
            GridEvent::Coarse(dw) => out.coarse.extend_from_slice(dw),
        }
        Ok(())
    })?;
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct LcmGrid {
    pub cells: usize,
    pub per_coarse: usize,
    pub per_fine: usize,
}

impl LcmGrid {
    pub fn new(n_coarse: usize, n_fine: usize) -> Result<Self> {
        if n_coarse == 0 || n_fine == 0 {
            return Err(Error::input("grid step counts must be >= 1"));
        }
        let g = gcd(n_coarse, n_fine);
        let cells = (n_coarse / g)
            .checked_mul(n_fine)
            .ok_or(Error::Overflow(n_coarse as u64, n_fine as u64))?;
        Ok(LcmGrid {
            cells,
            per_coarse: cells / n_coarse,
            per_fine: cells / n_fine,
        })
    }
}

fn gcd(mut a: usize, mut b: usize) -> usize {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

pub(crate) enum GridEvent<'a> {
    Cell(&'a [f64]),
    Fine(&'a [f64]),
    Coarse(&'a [f64]),
}

/// Walk the LCM grid cell by cell. A grid's increment is emitted as soon as the
/// cells covering its step are complete; fine before coarse when both close.
pub(crate) fn walk_coupled<F>(
    sub: &mut Substream,
    t_end: f64,
    m: usize,
    grid: &LcmGrid,
    mut visit: F,
) -> Result<()>
where
    F: FnMut(GridEvent<'_>) -> Result<()>,
{
    let sqrt_h = (t_end / grid.cells as f64).sqrt();
    let mut cell = vec![0.0; m];
    let mut acc_fine = vec![0.0; m];
    let mut acc_coarse = vec![0.0; m];
    for c in 1..=grid.cells {
        sub.increment(sqrt_h, &mut cell);
        visit(GridEvent::Cell(&cell))?;
        for i in 0..m {
            acc_fine[i] += cell[i];
            acc_coarse[i] += cell[i];
        }
        if c % grid.per_fine == 0 {
            visit(GridEvent::Fine(&acc_fine))?;
            acc_fine.fill(0.0);
        }
        if c % grid.per_coarse == 0 {
            visit(GridEvent::Coarse(&acc_coarse))?;
            acc_coarse.fill(0.0);
        }
    }
    Ok(())
}
