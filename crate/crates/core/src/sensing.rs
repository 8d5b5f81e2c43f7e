//! Sensing operators `A_l`: dense complex Gaussian matrices and masked
//! DFT/Hadamard products `H·M_l` applied through fast transforms.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::numerics::{
    is_power_of_two, sample_without_replacement, unit_vector, Direction, FullTransform, IndexSet, PartialTransform,
    RandomStream, C64, ZERO,
};

/// Default limit on `m·n` for dense materialization.
pub const MATERIALIZE_CAP: usize = 1 << 22;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SensingKind {
    /// i.i.d. `N(0,1)/√2 + i·N(0,1)/√2` entries.
    Gaussian,
    /// `n` columns of the `m×m` DFT times a `±1` mask; `A*A = m·I`.
    TallDft,
    TallHadamard,
    /// `m` rows of the `n×n` DFT times a `±1` mask; `A·A* = n·I`.
    FatDft,
    FatHadamard,
    /// `n` columns drawn without replacement from the `m×m` transform, times a mask.
    SubsampledHadamard,
    SubsampledDft,
    /// `m = s²` low-frequency rows of the 2-D DFT on an `N×N` grid (`n = N²`).
    #[serde(rename = "fat-dft-2d")]
    FatDft2d,
}

impl SensingKind {
    pub fn is_hadamard(self) -> bool {
        matches!(self, Self::TallHadamard | Self::FatHadamard | Self::SubsampledHadamard)
    }

    pub fn is_fat(self) -> bool {
        matches!(self, Self::FatDft | Self::FatHadamard | Self::FatDft2d)
    }
}

/// Which rows (fat kinds) or columns (tall kinds) of the full transform are kept.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Selection {
    /// Indices `0..k` in natural order.
    #[default]
    Leading,
    /// Uniformly random without replacement.
    Random,
    /// The `k` frequencies of smallest magnitude, centered on DC (DFT kinds).
    LowFrequency,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SensingSpec {
    pub kind: SensingKind,
    pub m: usize,
    pub n: usize,
    #[serde(default)]
    pub selection: Selection,
}

impl SensingSpec {
    pub fn new(kind: SensingKind, m: usize, n: usize) -> Self {
        Self { kind, m, n, selection: Selection::Leading }
    }

    pub fn with_selection(mut self, selection: Selection) -> Self {
        self.selection = selection;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let Self { kind, m, n, selection } = *self;
        let fail = |msg: String| Err(Error::InvalidSpec(msg));
        if m == 0 || n == 0 {
            return fail(format!("dimensions must be positive (m={m}, n={n})"));
        }
        match kind {
            SensingKind::Gaussian => {}
            SensingKind::TallDft | SensingKind::TallHadamard => {
                if m < n {
                    return fail(format!("tall kinds need m >= n (m={m}, n={n})"));
                }
            }
            SensingKind::SubsampledDft | SensingKind::SubsampledHadamard => {
                if m < n {
                    return fail(format!("subsampled kinds need n <= m (m={m}, n={n})"));
                }
            }
            SensingKind::FatDft | SensingKind::FatHadamard => {
                if m > n {
                    return fail(format!("fat kinds need m <= n (m={m}, n={n})"));
                }
            }
            SensingKind::FatDft2d => {
                let (Some(s), Some(side)) = (exact_sqrt(m), exact_sqrt(n)) else {
                    return fail(format!("2-D kind needs square m and n (m={m}, n={n})"));
                };
                if s > side {
                    return fail(format!("support {s} exceeds image side {side}"));
                }
                if selection == Selection::Random {
                    return fail("2-D kind supports leading or low-frequency selection only".into());
                }
            }
        }
        if kind.is_hadamard() {
            let full = if kind.is_fat() { n } else { m };
            if !is_power_of_two(full) {
                return fail(format!("Hadamard transform size {full} is not a power of two"));
            }
            if selection == Selection::LowFrequency {
                return fail("low-frequency selection applies to DFT kinds only".into());
            }
        }
        Ok(())
    }
}

fn exact_sqrt(x: usize) -> Option<usize> {
    let r = (x as f64).sqrt().round() as usize;
    (r * r == x).then_some(r)
}

/// Signed frequency of DFT bin `k` on a grid of `len`, in `[-len/2, len/2)`.
pub fn signed_frequency(k: usize, len: usize) -> i64 {
    if 2 * k >= len {
        k as i64 - len as i64
    } else {
        k as i64
    }
}

/// Bins of the `count` smallest-magnitude frequencies (ties: negative first).
pub fn low_frequency_bins(count: usize, len: usize) -> Vec<usize> {
    let mut bins: Vec<usize> = (0..len).collect();
    bins.sort_by_key(|&k| {
        let f = signed_frequency(k, len);
        (f.abs(), f)
    });
    bins.truncate(count);
    bins
}

fn select(selection: Selection, count: usize, len: usize, stream: &mut RandomStream) -> Result<IndexSet> {
    match selection {
        Selection::Leading => IndexSet::range(count, len),
        Selection::Random => sample_without_replacement(stream, count, len),
        Selection::LowFrequency => IndexSet::new(low_frequency_bins(count, len), len),
    }
}

#[derive(Debug, Clone)]
enum Body {
    /// Row-major `m × n`.
    Dense(Vec<C64>),
    /// `v ↦ P(mask ⊙ v)` for a partial transform `P`.
    Masked { transform: PartialTransform, mask: Vec<f64> },
}

/// One linear map `A: C^n → C^m` with its adjoint. Immutable once built.
#[derive(Debug, Clone)]
pub struct SensingOperator {
    spec: SensingSpec,
    body: Body,
}

/// Draws a fresh operator for `spec` from `stream`.
pub fn make_sensing(spec: SensingSpec, stream: &mut RandomStream) -> Result<SensingOperator> {
    spec.validate()?;
    let SensingSpec { kind, m, n, selection } = spec;
    let body = match kind {
        SensingKind::Gaussian => Body::Dense((0..m * n).map(|_| stream.complex_gaussian()).collect()),
        SensingKind::TallDft | SensingKind::TallHadamard => {
            let full = full_transform(kind, m)?;
            let cols = select(selection, n, m, stream)?;
            masked(PartialTransform::new(full, IndexSet::full(m)?, cols)?, n, stream)
        }
        SensingKind::SubsampledDft | SensingKind::SubsampledHadamard => {
            let full = full_transform(kind, m)?;
            let cols = sample_without_replacement(stream, n, m)?;
            masked(PartialTransform::new(full, IndexSet::full(m)?, cols)?, n, stream)
        }
        SensingKind::FatDft | SensingKind::FatHadamard => {
            let full = full_transform(kind, n)?;
            let rows = select(selection, m, n, stream)?;
            masked(PartialTransform::new(full, rows, IndexSet::full(n)?)?, n, stream)
        }
        SensingKind::FatDft2d => {
            let side = exact_sqrt(n).expect("validated");
            let support = exact_sqrt(m).expect("validated");
            let bins = match selection {
                Selection::LowFrequency => low_frequency_bins(support, side),
                _ => (0..support).collect(),
            };
            let rows: Vec<usize> = bins.iter().flat_map(|&r| bins.iter().map(move |&c| r * side + c)).collect();
            let full = FullTransform::dft2d(side, side)?;
            masked(PartialTransform::new(full, IndexSet::new(rows, n)?, IndexSet::full(n)?)?, n, stream)
        }
    };
    let op = SensingOperator { spec, body };
    Ok(op)
}

fn full_transform(kind: SensingKind, len: usize) -> Result<FullTransform> {
    if kind.is_hadamard() {
        FullTransform::hadamard(len)
    } else {
        FullTransform::dft(len)
    }
}

fn masked(transform: PartialTransform, n: usize, stream: &mut RandomStream) -> Body {
    let mask = (0..n).map(|_| stream.sign()).collect();
    Body::Masked { transform, mask }
}

impl SensingOperator {
    /// Wraps an explicit dense matrix (row-major, `m × n`) as a Gaussian-kind operator.
    pub fn from_dense(m: usize, n: usize, entries: Vec<C64>) -> Result<Self> {
        check_len(m * n, entries.len())?;
        Ok(Self { spec: SensingSpec::new(SensingKind::Gaussian, m, n), body: Body::Dense(entries) })
    }

    pub fn spec(&self) -> &SensingSpec {
        &self.spec
    }

    pub fn rows(&self) -> usize {
        self.spec.m
    }

    pub fn cols(&self) -> usize {
        self.spec.n
    }

    /// The `±1` diagonal `M_l`, if this is a masked kind.
    pub fn mask(&self) -> Option<&[f64]> {
        match &self.body {
            Body::Masked { mask, .. } => Some(mask),
            Body::Dense(_) => None,
        }
    }

    pub fn apply(&self, v: &[C64]) -> Result<Vec<C64>> {
        let (m, n) = (self.spec.m, self.spec.n);
        check_len(n, v.len())?;
        match &self.body {
            Body::Dense(a) => Ok(a.chunks_exact(n).map(|row| row.iter().zip(v).map(|(x, y)| x * y).sum()).collect()),
            Body::Masked { transform, mask } => {
                let input: Vec<C64> = v.iter().zip(mask).map(|(z, s)| z * s).collect();
                let out = transform.apply(&input, Direction::Forward)?;
                debug_assert_eq!(out.len(), m);
                Ok(out)
            }
        }
    }

    pub fn adjoint(&self, u: &[C64]) -> Result<Vec<C64>> {
        let (m, n) = (self.spec.m, self.spec.n);
        check_len(m, u.len())?;
        match &self.body {
            Body::Dense(a) => {
                let mut out = vec![ZERO; n];
                for (row, ui) in a.chunks_exact(n).zip(u) {
                    for (o, x) in out.iter_mut().zip(row) {
                        *o += x.conj() * ui;
                    }
                }
                Ok(out)
            }
            Body::Masked { transform, mask } => {
                let mut out = transform.apply(u, Direction::Adjoint)?;
                for (z, s) in out.iter_mut().zip(mask) {
                    *z *= s;
                }
                Ok(out)
            }
        }
    }

    /// Squared Euclidean norm of every column.
    pub fn column_norms_sq(&self) -> Vec<f64> {
        let (m, n) = (self.spec.m, self.spec.n);
        match &self.body {
            Body::Dense(a) => {
                let mut out = vec![0.0; n];
                for row in a.chunks_exact(n) {
                    for (o, x) in out.iter_mut().zip(row) {
                        *o += x.norm_sqr();
                    }
                }
                out
            }
            // every entry of a masked DFT/Hadamard submatrix has unit modulus
            Body::Masked { .. } => vec![m as f64; n],
        }
    }

    /// `c` such that `A*A = c·I`, when the structure guarantees it.
    pub fn gram_scale(&self) -> Option<f64> {
        match self.spec.kind {
            SensingKind::TallDft
            | SensingKind::TallHadamard
            | SensingKind::SubsampledDft
            | SensingKind::SubsampledHadamard => Some(self.spec.m as f64),
            _ => None,
        }
    }

    /// `‖A‖²` when known exactly from the structure.
    pub fn exact_norm_sq(&self) -> Option<f64> {
        if self.spec.kind.is_fat() {
            // A·A* = n·I
            Some(self.spec.n as f64)
        } else {
            self.gram_scale()
        }
    }

    /// Dense `m × n` matrix with column `j` equal to `apply(e_j)`.
    pub fn materialize(&self) -> Result<DMatrix<C64>> {
        self.materialize_with_cap(MATERIALIZE_CAP)
    }

    pub fn materialize_with_cap(&self, cap: usize) -> Result<DMatrix<C64>> {
        let (m, n) = (self.spec.m, self.spec.n);
        if m * n > cap {
            return Err(Error::Resource(format!("{m}x{n} operator exceeds dense cap of {cap} entries")));
        }
        let mut out = DMatrix::zeros(m, n);
        for j in 0..n {
            let col = self.apply(&unit_vector(n, j))?;
            out.set_column(j, &nalgebra::DVector::from_vec(col));
        }
        Ok(out)
    }

    /// Dense `n × m` matrix with column `i` equal to `adjoint(e_i)`.
    pub fn materialize_adjoint(&self) -> Result<DMatrix<C64>> {
        let (m, n) = (self.spec.m, self.spec.n);
        if m * n > MATERIALIZE_CAP {
            return Err(Error::Resource(format!("{m}x{n} operator exceeds dense cap")));
        }
        let mut out = DMatrix::zeros(n, m);
        for i in 0..m {
            let col = self.adjoint(&unit_vector(m, i))?;
            out.set_column(i, &nalgebra::DVector::from_vec(col));
        }
        Ok(out)
    }
}
