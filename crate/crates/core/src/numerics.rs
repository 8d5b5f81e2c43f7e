//! Seeded sampling, complex vector helpers and the fast structured transforms
//! (Walsh–Hadamard, partial DFT) that every sensing operator is built from.
//!
//! Transforms are unnormalized: the Sylvester–Hadamard matrix `H` of order `m`
//! satisfies `H·H = m·I`, and the DFT `F` with `F[j][k] = exp(-2πi·jk/N)`
//! satisfies `F*·F = N·I`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

/// Reproducible random source. The same seed always yields the same sequence
/// of draws, on every platform.
#[derive(Clone)]
pub struct RandomStream {
    seed: u64,
    rng: ChaCha8Rng,
    spare_normal: Option<f64>,
}

impl fmt::Debug for RandomStream {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RandomStream").field("seed", &self.seed).finish_non_exhaustive()
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

impl RandomStream {
    pub fn new(seed: u64) -> Self {
        Self { seed, rng: ChaCha8Rng::seed_from_u64(seed), spare_normal: None }
    }

    /// Independent stream for task `task` of an experiment seeded with `seed`.
    pub fn derive(seed: u64, task: u64) -> Self {
        Self::new(splitmix64(seed ^ splitmix64(task.wrapping_add(0x5EED))))
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Uniform on `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    pub fn uniform_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Uniform integer in `0..n`.
    pub fn below(&mut self, n: usize) -> usize {
        self.rng.random_range(0..n)
    }

    /// Standard normal via Box–Muller; the second variate of each pair is cached.
    pub fn standard_normal(&mut self) -> f64 {
        if let Some(z) = self.spare_normal.take() {
            return z;
        }
        // 1 - U lies in (0, 1], so the log is finite.
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = 2.0 * PI * u2;
        self.spare_normal = Some(r * theta.sin());
        r * theta.cos()
    }

    /// `N(0,1)/√2 + i·N(0,1)/√2`, so that `E|z|² = 1`.
    pub fn complex_gaussian(&mut self) -> C64 {
        let re = self.standard_normal();
        let im = self.standard_normal();
        C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
    }

    pub fn sign(&mut self) -> f64 {
        if self.rng.random::<bool>() {
            1.0
        } else {
            -1.0
        }
    }

    pub fn unit_phase(&mut self) -> C64 {
        C64::from_polar(1.0, 2.0 * PI * self.uniform())
    }
}

fn require_positive(n: usize) -> Result<()> {
    if n == 0 {
        Err(Error::InvalidDimension("sample length must be at least 1".into()))
    } else {
        Ok(())
    }
}

pub fn sample_complex_gaussian(stream: &mut RandomStream, n: usize) -> Result<Vec<C64>> {
    require_positive(n)?;
    Ok((0..n).map(|_| stream.complex_gaussian()).collect())
}

/// Entries `±1` with equal probability (zero imaginary part).
pub fn sample_rademacher(stream: &mut RandomStream, n: usize) -> Result<Vec<C64>> {
    require_positive(n)?;
    Ok((0..n).map(|_| C64::new(stream.sign(), 0.0)).collect())
}

/// Entries uniform on the complex unit circle.
pub fn sample_steinhaus(stream: &mut RandomStream, n: usize) -> Result<Vec<C64>> {
    require_positive(n)?;
    Ok((0..n).map(|_| stream.unit_phase()).collect())
}

/// Distinct indices drawn from `0..universe`, kept in the given order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexSet {
    indices: Vec<usize>,
    universe: usize,
}

impl IndexSet {
    pub fn new(indices: Vec<usize>, universe: usize) -> Result<Self> {
        if universe == 0 {
            return Err(Error::InvalidDimension("index universe must be positive".into()));
        }
        if let Some(&bad) = indices.iter().find(|&&i| i >= universe) {
            return Err(Error::InvalidIndex { index: bad, universe });
        }
        let mut sorted = indices.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidInput("duplicate index in index set".into()));
        }
        Ok(Self { indices, universe })
    }

    pub fn range(len: usize, universe: usize) -> Result<Self> {
        Self::new((0..len).collect(), universe)
    }

    pub fn full(universe: usize) -> Result<Self> {
        Self::range(universe, universe)
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn universe(&self) -> usize {
        self.universe
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// `0..universe` in natural order.
    pub fn is_full(&self) -> bool {
        self.indices.len() == self.universe && self.indices.iter().enumerate().all(|(k, &i)| k == i)
    }
}

/// Uniform random ordered `k`-selection from `0..universe` by partial
/// Fisher–Yates shuffle.
pub fn sample_without_replacement(stream: &mut RandomStream, k: usize, universe: usize) -> Result<IndexSet> {
    if k == 0 || k > universe {
        return Err(Error::InvalidDimension(format!("cannot draw {k} distinct indices from a universe of {universe}")));
    }
    let mut pool: Vec<usize> = (0..universe).collect();
    for i in 0..k {
        let j = i + stream.below(universe - i);
        pool.swap(i, j);
    }
    pool.truncate(k);
    IndexSet::new(pool, universe)
}

// ---------------------------------------------------------------------------
// vector arithmetic

pub fn norm_sq(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

pub fn norm(v: &[C64]) -> f64 {
    norm_sq(v).sqrt()
}

/// `⟨u, v⟩ = u* v`, conjugate-linear in the first argument.
pub fn dot(u: &[C64], v: &[C64]) -> C64 {
    u.iter().zip(v).map(|(a, b)| a.conj() * b).sum()
}

/// `y ← y + a·x`
pub fn axpy(a: C64, x: &[C64], y: &mut [C64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

pub fn scale(a: C64, v: &mut [C64]) {
    for z in v {
        *z *= a;
    }
}

pub fn sub(u: &[C64], v: &[C64]) -> Vec<C64> {
    u.iter().zip(v).map(|(a, b)| a - b).collect()
}

pub fn unit_vector(n: usize, i: usize) -> Vec<C64> {
    let mut e = vec![ZERO; n];
    e[i] = ONE;
    e
}

pub fn is_finite(v: &[C64]) -> bool {
    v.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

// ---------------------------------------------------------------------------
// transforms

pub fn is_power_of_two(m: usize) -> bool {
    m != 0 && m & (m - 1) == 0
}

/// In-place unnormalized fast Walsh–Hadamard transform (Sylvester order).
pub fn fwht_in_place(v: &mut [C64]) -> Result<()> {
    let m = v.len();
    if !is_power_of_two(m) {
        return Err(Error::UnsupportedDimension(m));
    }
    let mut h = 1;
    while h < m {
        for block in v.chunks_exact_mut(2 * h) {
            let (lo, hi) = block.split_at_mut(h);
            for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                let (x, y) = (*a, *b);
                *a = x + y;
                *b = x - y;
            }
        }
        h *= 2;
    }
    Ok(())
}

pub fn fwht(v: &[C64]) -> Result<Vec<C64>> {
    let mut out = v.to_vec();
    fwht_in_place(&mut out)?;
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Adjoint,
}

/// A full square transform applied matrix-free.
#[derive(Clone)]
pub enum FullTransform {
    Hadamard {
        len: usize,
    },
    Dft {
        len: usize,
        forward: Arc<dyn Fft<f64>>,
        inverse: Arc<dyn Fft<f64>>,
    },
    /// Separable 2-D DFT over a row-major `rows × cols` grid.
    Dft2d {
        rows: usize,
        cols: usize,
        row_fwd: Arc<dyn Fft<f64>>,
        row_inv: Arc<dyn Fft<f64>>,
        col_fwd: Arc<dyn Fft<f64>>,
        col_inv: Arc<dyn Fft<f64>>,
    },
}

impl fmt::Debug for FullTransform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Hadamard { len } => write!(f, "Hadamard({len})"),
            Self::Dft { len, .. } => write!(f, "Dft({len})"),
            Self::Dft2d { rows, cols, .. } => write!(f, "Dft2d({rows}x{cols})"),
        }
    }
}

impl FullTransform {
    pub fn hadamard(len: usize) -> Result<Self> {
        if !is_power_of_two(len) {
            return Err(Error::UnsupportedDimension(len));
        }
        Ok(Self::Hadamard { len })
    }

    pub fn dft(len: usize) -> Result<Self> {
        if len == 0 {
            return Err(Error::InvalidDimension("DFT length must be positive".into()));
        }
        let mut planner = FftPlanner::new();
        Ok(Self::Dft { len, forward: planner.plan_fft_forward(len), inverse: planner.plan_fft_inverse(len) })
    }

    pub fn dft2d(rows: usize, cols: usize) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidDimension("2-D DFT sides must be positive".into()));
        }
        let mut planner = FftPlanner::new();
        Ok(Self::Dft2d {
            rows,
            cols,
            row_fwd: planner.plan_fft_forward(cols),
            row_inv: planner.plan_fft_inverse(cols),
            col_fwd: planner.plan_fft_forward(rows),
            col_inv: planner.plan_fft_inverse(rows),
        })
    }

    pub fn len(&self) -> usize {
        match self {
            Self::Hadamard { len } | Self::Dft { len, .. } => *len,
            Self::Dft2d { rows, cols, .. } => rows * cols,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Applies the transform (or its conjugate transpose) in place.
    pub fn apply_in_place(&self, buf: &mut [C64], direction: Direction) -> Result<()> {
        crate::error::check_len(self.len(), buf.len())?;
        match self {
            Self::Hadamard { .. } => fwht_in_place(buf),
            Self::Dft { forward, inverse, .. } => {
                match direction {
                    Direction::Forward => forward.process(buf),
                    Direction::Adjoint => inverse.process(buf),
                }
                Ok(())
            }
            Self::Dft2d { rows, cols, row_fwd, row_inv, col_fwd, col_inv } => {
                let (row_fft, col_fft) = match direction {
                    Direction::Forward => (row_fwd, col_fwd),
                    Direction::Adjoint => (row_inv, col_inv),
                };
                row_fft.process(buf);
                let mut column = vec![ZERO; *rows];
                for c in 0..*cols {
                    for r in 0..*rows {
                        column[r] = buf[r * cols + c];
                    }
                    col_fft.process(&mut column);
                    for r in 0..*rows {
                        buf[r * cols + c] = column[r];
                    }
                }
                Ok(())
            }
        }
    }
}

/// Submatrix of a full transform selected by row and column index sets.
#[derive(Debug, Clone)]
pub struct PartialTransform {
    full: FullTransform,
    rows: IndexSet,
    cols: IndexSet,
}

impl PartialTransform {
    pub fn new(full: FullTransform, rows: IndexSet, cols: IndexSet) -> Result<Self> {
        let n = full.len();
        for set in [&rows, &cols] {
            if set.universe() != n {
                return Err(Error::DimensionMismatch { expected: n, actual: set.universe() });
            }
        }
        Ok(Self { full, rows, cols })
    }

    pub fn full(&self) -> &FullTransform {
        &self.full
    }

    pub fn rows(&self) -> &IndexSet {
        &self.rows
    }

    pub fn cols(&self) -> &IndexSet {
        &self.cols
    }

    pub fn output_len(&self, direction: Direction) -> usize {
        match direction {
            Direction::Forward => self.rows.len(),
            Direction::Adjoint => self.cols.len(),
        }
    }

    /// Scatter into a full-length buffer, transform, gather.
    pub fn apply(&self, v: &[C64], direction: Direction) -> Result<Vec<C64>> {
        let (input, output) = match direction {
            Direction::Forward => (&self.cols, &self.rows),
            Direction::Adjoint => (&self.rows, &self.cols),
        };
        crate::error::check_len(input.len(), v.len())?;
        let mut buf = vec![ZERO; self.full.len()];
        for (&i, &x) in input.indices().iter().zip(v) {
            buf[i] = x;
        }
        self.full.apply_in_place(&mut buf, direction)?;
        if output.is_full() {
            return Ok(buf);
        }
        Ok(output.indices().iter().map(|&i| buf[i]).collect())
    }
}

/// Applies the `rows × cols` submatrix of the unnormalized `N × N` DFT
/// (`N = rows.universe()`), or its conjugate transpose.
pub fn dft_partial(v: &[C64], rows: &IndexSet, cols: &IndexSet, direction: Direction) -> Result<Vec<C64>> {
    if rows.universe() != cols.universe() {
        return Err(Error::DimensionMismatch { expected: rows.universe(), actual: cols.universe() });
    }
    let plan = PartialTransform::new(FullTransform::dft(rows.universe())?, rows.clone(), cols.clone())?;
    plan.apply(v, direction)
}
