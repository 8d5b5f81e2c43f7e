//! Moment identities for Rademacher, Gaussian and randomly masked partial
//! transform vectors: exact enumeration or Monte Carlo against closed forms.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{check_len, Error, Result};
use crate::numerics::{norm, norm_sq, RandomStream, C64, ONE, ZERO};
use crate::sensing::{make_sensing, SensingKind, SensingSpec};

/// Largest vector length the exact Rademacher enumeration accepts.
pub const MAX_ENUMERATION: usize = 14;
/// Monte-Carlo means must lie within this many standard errors.
pub const SE_THRESHOLD: f64 = 5.0;
const CHUNKS: u64 = 64;

type CMat = DMatrix<C64>;

fn outer(u: &[C64], v: &[C64]) -> CMat {
    CMat::from_fn(u.len(), v.len(), |i, j| u[i] * v[j].conj())
}

fn max_abs(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn scaled_gap(got: &CMat, want: &CMat) -> f64 {
    max_abs(&(got - want)) / max_abs(want).max(1.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExactReport {
    /// Scaled maximum entry error of each identity, in order.
    pub errors: [f64; 4],
}

impl ExactReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.errors.iter().all(|e| *e <= tol)
    }
}

/// Exact expectations over all `2^n` sign vectors compared with:
/// `E‖a‖²aa* = nI`, `E(a*Xa)aa* = Tr(X)I + X + Xᵀ − 2ΣX_kk E_kk`,
/// `E|⟨a,x⟩|²aa* = ‖x‖²I + xx* + conj(xx*) − 2diag(x)diag(x̄)` and
/// `E|⟨a,x⟩|⁴ = 2‖x‖⁴ + |Σx_k²|² − 2Σ|x_k|⁴`.
pub fn rademacher_moment_oracle(x: &[C64], xm: &CMat) -> Result<ExactReport> {
    let n = x.len();
    if n == 0 {
        return Err(Error::InvalidDimension("empty vector".into()));
    }
    if n > MAX_ENUMERATION {
        return Err(Error::Resource(format!("enumeration over 2^{n} sign vectors exceeds 2^{MAX_ENUMERATION}")));
    }
    if xm.shape() != (n, n) {
        return Err(Error::DimensionMismatch { expected: n * n, actual: xm.len() });
    }
    let mut m1 = CMat::from_element(n, n, ZERO);
    let mut m2 = m1.clone();
    let mut m3 = m1.clone();
    let mut e4 = 0.0;
    let mut a = vec![0.0f64; n];
    let count = 1usize << n;
    for bits in 0..count {
        for (k, ak) in a.iter_mut().enumerate() {
            *ak = if bits >> k & 1 == 1 { -1.0 } else { 1.0 };
        }
        let mut quad = ZERO;
        for i in 0..n {
            for j in 0..n {
                quad += xm[(i, j)] * (a[i] * a[j]);
            }
        }
        let ax: C64 = a.iter().zip(x).map(|(ak, xk)| xk * *ak).sum();
        let w3 = ax.norm_sqr();
        e4 += w3 * w3;
        for i in 0..n {
            for j in 0..n {
                let aa = a[i] * a[j];
                m1[(i, j)] += n as f64 * aa;
                m2[(i, j)] += quad * aa;
                m3[(i, j)] += w3 * aa;
            }
        }
    }
    let inv = 1.0 / count as f64;
    let (m1, m2, m3, e4) = (m1 * C64::from(inv), m2 * C64::from(inv), m3 * C64::from(inv), e4 * inv);

    let id = CMat::identity(n, n);
    let c1 = &id * C64::from(n as f64);
    let diag_x = CMat::from_diagonal(&xm.diagonal());
    let c2 = &id * xm.trace() + xm + xm.transpose() - diag_x * C64::from(2.0);
    let xx = outer(x, x);
    let mods = CMat::from_fn(n, n, |i, j| if i == j { C64::from(x[i].norm_sqr()) } else { ZERO });
    let c3 = &id * C64::from(norm_sq(x)) + &xx + xx.map(|z| z.conj()) - mods * C64::from(2.0);
    let sum_sq: C64 = x.iter().map(|z| z * z).sum();
    let quartic: f64 = x.iter().map(|z| z.norm_sqr().powi(2)).sum();
    let c4 = 2.0 * norm_sq(x).powi(2) + sum_sq.norm_sqr() - 2.0 * quartic;
    Ok(ExactReport {
        errors: [scaled_gap(&m1, &c1), scaled_gap(&m2, &c2), scaled_gap(&m3, &c3), (e4 - c4).abs() / c4.abs().max(1.0)],
    })
}

/// Per-component mean and standard error of a Monte-Carlo estimate.
#[derive(Debug, Clone)]
struct Moments {
    sum: Vec<f64>,
    sum_sq: Vec<f64>,
    count: usize,
}

impl Moments {
    fn new(width: usize) -> Self {
        Self { sum: vec![0.0; width], sum_sq: vec![0.0; width], count: 0 }
    }

    fn push(&mut self, sample: &[f64]) {
        for ((s, q), v) in self.sum.iter_mut().zip(&mut self.sum_sq).zip(sample) {
            *s += v;
            *q += v * v;
        }
        self.count += 1;
    }

    fn merge(mut self, other: Self) -> Self {
        for (a, b) in self.sum.iter_mut().zip(&other.sum) {
            *a += b;
        }
        for (a, b) in self.sum_sq.iter_mut().zip(&other.sum_sq) {
            *a += b;
        }
        self.count += other.count;
        self
    }

    /// Worst `|mean − target| / SE` over `range`. Zero-variance components
    /// must match to rounding.
    fn worst_z(&self, range: std::ops::Range<usize>, target: &[f64]) -> f64 {
        let n = self.count as f64;
        range
            .zip(target)
            .map(|(k, t)| {
                let mean = self.sum[k] / n;
                let var = (self.sum_sq[k] / n - mean * mean).max(0.0) * n / (n - 1.0);
                let se = (var / n).sqrt();
                let gap = (mean - t).abs();
                if se > 1e-8 * t.abs().max(1.0) {
                    gap / se
                } else if gap <= 1e-10 * t.abs().max(1.0) {
                    0.0
                } else {
                    f64::INFINITY
                }
            })
            .fold(0.0, f64::max)
    }
}

fn monte_carlo<F>(trials: usize, seed: u64, width: usize, sample: F) -> Result<Moments>
where
    F: Fn(&mut RandomStream, &mut [f64]) -> Result<()> + Sync,
{
    let per = trials as u64 / CHUNKS;
    let extra = trials as u64 % CHUNKS;
    (0..CHUNKS)
        .into_par_iter()
        .map(|chunk| {
            let mut stream = RandomStream::derive(seed, chunk);
            let mut acc = Moments::new(width);
            let mut buf = vec![0.0; width];
            for _ in 0..per + u64::from(chunk < extra) {
                sample(&mut stream, &mut buf)?;
                acc.push(&buf);
            }
            Ok(acc)
        })
        .try_reduce(|| Moments::new(width), |a, b| Ok(a.merge(b)))
}

fn flatten(m: &CMat, out: &mut [f64]) {
    for (k, z) in m.iter().enumerate() {
        out[2 * k] = z.re;
        out[2 * k + 1] = z.im;
    }
}

fn flat(m: &CMat) -> Vec<f64> {
    let mut v = vec![0.0; 2 * m.len()];
    flatten(m, &mut v);
    v
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloReport {
    pub names: Vec<&'static str>,
    /// Worst entrywise distance from the closed form in standard errors.
    pub worst_z: Vec<f64>,
    pub trials: usize,
}

impl MonteCarloReport {
    pub fn passes(&self) -> bool {
        self.worst_z.iter().all(|z| *z <= SE_THRESHOLD)
    }
}

/// Monte Carlo over `a ~ CN(0, I_n)` against `E‖a‖²aa* = (n+1)I`,
/// `E(a*Xa)aa* = X + Tr(X)I`, `E|⟨a,x⟩|²aa* = ‖x‖²I + xx*`,
/// `E|⟨a,x⟩|⁴ = 2‖x‖⁴` and `E(aa* − I)² = nI`.
pub fn gaussian_moment_oracle(x: &[C64], xm: &CMat, trials: usize, seed: u64) -> Result<MonteCarloReport> {
    let n = x.len();
    if n == 0 {
        return Err(Error::InvalidDimension("empty vector".into()));
    }
    if xm.shape() != (n, n) {
        return Err(Error::DimensionMismatch { expected: n * n, actual: xm.len() });
    }
    if trials < 10_000 {
        return Err(Error::InvalidInput(format!("need at least 10^4 trials, got {trials}")));
    }
    let block = 2 * n * n;
    let width = 4 * block + 1;
    let moments = monte_carlo(trials, seed, width, |stream, out| {
        let a: Vec<C64> = (0..n).map(|_| stream.complex_gaussian()).collect();
        let aa = outer(&a, &a);
        let na = norm_sq(&a);
        let quad: C64 =
            (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).map(|(i, j)| a[i].conj() * xm[(i, j)] * a[j]).sum();
        let ax: C64 = a.iter().zip(x).map(|(ak, xk)| ak.conj() * xk).sum();
        let w = ax.norm_sqr();
        flatten(&(&aa * C64::from(na)), &mut out[..block]);
        flatten(&(&aa * quad), &mut out[block..2 * block]);
        flatten(&(&aa * C64::from(w)), &mut out[2 * block..3 * block]);
        let sq = &aa * C64::from(na - 2.0) + CMat::identity(n, n);
        flatten(&sq, &mut out[3 * block..4 * block]);
        out[4 * block] = w * w;
        Ok(())
    })?;

    let id = CMat::identity(n, n);
    let targets = [
        flat(&(&id * C64::from(n as f64 + 1.0))),
        flat(&(xm + &id * xm.trace())),
        flat(&(&id * C64::from(norm_sq(x)) + outer(x, x))),
        flat(&(&id * C64::from(n as f64))),
    ];
    let mut worst_z: Vec<f64> = (0..3).map(|k| moments.worst_z(k * block..(k + 1) * block, &targets[k])).collect();
    worst_z.push(moments.worst_z(4 * block..width, &[2.0 * norm_sq(x).powi(2)]));
    worst_z.push(moments.worst_z(3 * block..4 * block, &targets[3]));
    Ok(MonteCarloReport {
        names: vec!["E|a|^2 aa*", "E(a*Xa)aa*", "E|<a,x>|^2 aa*", "E|<a,x>|^4", "E(aa*-I)^2"],
        worst_z,
        trials,
    })
}

/// `(n−1)(mI − 11ᵀ)/(m−1) + 11ᵀ`, and `1` when `m = n = 1`.
pub fn laal_closed_form(m: usize, n: usize) -> CMat {
    if m == 1 {
        return CMat::from_element(1, 1, ONE);
    }
    let k = (n as f64 - 1.0) / (m as f64 - 1.0);
    CMat::from_fn(m, m, |i, j| if i == j { C64::from(k * (m as f64 - 1.0) + 1.0) } else { C64::from(1.0 - k) })
}

/// Monte Carlo over fresh column samples and masks of an `m×n` partial
/// transform `A`, averaging `ΛAA*Λ*` with `Λ = diag(conj(Av))`.
pub fn laal_oracle(
    m: usize,
    n: usize,
    hadamard: bool,
    v: Option<&[C64]>,
    trials: usize,
    seed: u64,
) -> Result<MonteCarloReport> {
    if n == 0 || n > m {
        return Err(Error::InvalidDimension(format!("need 1 ≤ n ≤ m (m={m}, n={n})")));
    }
    let kind = if hadamard { SensingKind::SubsampledHadamard } else { SensingKind::SubsampledDft };
    let spec = SensingSpec::new(kind, m, n);
    spec.validate()?;
    if trials < 10_000 {
        return Err(Error::InvalidInput(format!("need at least 10^4 trials, got {trials}")));
    }
    let v: Vec<C64> = match v {
        Some(v) => {
            check_len(n, v.len())?;
            let k = norm(v);
            if k == 0.0 {
                return Err(Error::InvalidInput("v must be nonzero".into()));
            }
            v.iter().map(|z| z / k).collect()
        }
        None => {
            let mut s = RandomStream::derive(seed, u64::MAX);
            let raw: Vec<C64> = (0..n).map(|_| s.complex_gaussian()).collect();
            let k = norm(&raw);
            raw.iter().map(|z| z / k).collect()
        }
    };
    let block = 2 * m * m;
    let moments = monte_carlo(trials, seed, block, |stream, out| {
        let op = make_sensing(spec, stream)?;
        let a = op.materialize()?;
        let av = op.apply(&v)?;
        let gram = &a * a.adjoint();
        let laal = CMat::from_fn(m, m, |i, j| av[i].conj() * gram[(i, j)] * av[j]);
        flatten(&laal, out);
        Ok(())
    })?;
    let target = flat(&laal_closed_form(m, n));
    Ok(MonteCarloReport { names: vec!["E(LAA*L*)"], worst_z: vec![moments.worst_z(0..block, &target)], trials })
}
