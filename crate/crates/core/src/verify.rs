//! Verification suites over the diagnostics oracles: moment identities,
//! deterministic inequalities and the probabilistic bound evaluators.

use std::fmt;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::diagnostics::dense::{condition_number, materialize_system, singular_values, spectral_norm};
use crate::diagnostics::{
    block_psd_bound_check, bound_report, check_congruence_sigma2, check_perturbation_bound, check_svd2_bound,
    gaussian_moment_oracle, laal_oracle, rademacher_moment_oracle, CheckOutcome,
};
use crate::error::Result;
use crate::numerics::{RandomStream, C64};
use crate::sensing::{SensingKind, SensingSpec};
use crate::spectral::lambda_bound;
use crate::system::{default_w, synthesize_problem, ModelKind, ProblemConfig, StackedSystem, WeightHint};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    /// Moment identities and deterministic inequalities.
    Lemmas,
    /// Probabilistic bound evaluators against dense computation.
    Bounds,
    All,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckLine {
    pub name: String,
    pub passed: usize,
    pub total: usize,
    /// Passes needed for the line to count as a success.
    pub required: usize,
    pub detail: String,
}

impl CheckLine {
    pub fn ok(&self) -> bool {
        self.passed >= self.required
    }

    fn all(name: &str, passed: usize, total: usize, detail: String) -> Self {
        Self { name: name.into(), passed, total, required: total, detail }
    }
}

impl fmt::Display for CheckLine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.ok() { "PASS" } else { "FAIL" };
        write!(f, "{tag} {} {}/{} (need {})", self.name, self.passed, self.total, self.required)?;
        if !self.detail.is_empty() {
            write!(f, " {}", self.detail)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct VerifyReport {
    pub lines: Vec<CheckLine>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.lines.iter().all(CheckLine::ok)
    }
}

fn random_matrix(rows: usize, cols: usize, s: &mut RandomStream) -> DMatrix<C64> {
    DMatrix::from_fn(rows, cols, |_, _| s.complex_gaussian())
}

fn random_vec(n: usize, s: &mut RandomStream) -> Vec<C64> {
    (0..n).map(|_| s.complex_gaussian()).collect()
}

/// Exact Rademacher enumeration for `n = 1..=max_n`, then Gaussian and
/// masked-transform Monte Carlo.
pub fn moment_checks(max_n: usize, trials: usize, seed: u64) -> Result<Vec<CheckLine>> {
    let mut worst = 0.0f64;
    let mut passed = 0;
    for n in 1..=max_n {
        let mut s = RandomStream::derive(seed, n as u64);
        let x = random_vec(n, &mut s);
        let xm = random_matrix(n, n, &mut s);
        let r = rademacher_moment_oracle(&x, &xm)?;
        worst = r.errors.iter().copied().fold(worst, f64::max);
        passed += usize::from(r.passes(1e-12));
    }
    let mut lines = vec![CheckLine::all("rademacher-moments", passed, max_n, format!("max error {worst:.2e}"))];

    let mut s = RandomStream::derive(seed, 100);
    let x = random_vec(3, &mut s);
    let xm = random_matrix(3, 3, &mut s);
    let g = gaussian_moment_oracle(&x, &xm, trials, seed)?;
    let worst = g.worst_z.iter().copied().fold(0.0, f64::max);
    let passed = g.worst_z.iter().filter(|z| **z <= crate::diagnostics::moments::SE_THRESHOLD).count();
    lines.push(CheckLine::all("gaussian-moments", passed, g.worst_z.len(), format!("worst {worst:.2} SE")));

    for (name, hadamard) in [("masked-dft-moment", false), ("masked-hadamard-moment", true)] {
        let r = laal_oracle(8, 3, hadamard, None, trials, seed ^ 0x5a)?;
        let passed = usize::from(r.passes());
        lines.push(CheckLine::all(name, passed, 1, format!("worst {:.2} SE", r.worst_z[0])));
    }
    Ok(lines)
}

/// `lower` marks inequalities of the form `lhs ≥ rhs`.
fn tally<F>(name: &str, lower: bool, instances: usize, seed: u64, mut check: F) -> Result<CheckLine>
where
    F: FnMut(&mut RandomStream) -> Result<CheckOutcome>,
{
    let mut passed = 0;
    let mut worst_margin = f64::INFINITY;
    for i in 0..instances {
        let out = check(&mut RandomStream::derive(seed, i as u64))?;
        passed += usize::from(out.holds());
        let margin = if lower { out.lhs - out.rhs } else { out.rhs - out.lhs };
        worst_margin = worst_margin.min(margin);
    }
    Ok(CheckLine::all(name, passed, instances, format!("smallest margin {worst_margin:.3e}")))
}

/// Each inequality on `instances` random instances with hypotheses met by
/// construction.
pub fn deterministic_checks(instances: usize, seed: u64) -> Result<Vec<CheckLine>> {
    let perturbation = tally("perturbation-bound", false, instances, seed, |s| {
        let a0 = random_matrix(8, 4, s);
        let u0 = random_matrix(4, 1, s);
        let b: Vec<C64> = (&a0 * &u0).iter().copied().collect();
        let mut da = random_matrix(8, 4, s);
        let target = s.uniform_range(0.01, 0.9) / condition_number(&a0) * spectral_norm(&a0);
        da *= C64::from(target / spectral_norm(&da));
        check_perturbation_bound(&a0, &da, &b)
    })?;

    let svd2 = tally("nullvector-perturbation", false, instances, seed ^ 1, |s| {
        let (rows, cols) = (12, 6);
        let mut s0 = random_matrix(rows, cols, s);
        let kernel = random_vec(cols, s);
        // project every row onto the orthogonal complement of `kernel`
        let k = DMatrix::from_column_slice(cols, 1, &kernel);
        let proj = DMatrix::<C64>::identity(cols, cols) - &k * k.adjoint() / C64::from(k.norm_squared());
        s0 = &s0 * proj;
        let sigma2 = singular_values(&s0)[1];
        let mut ds = random_matrix(rows, cols, s);
        ds *= C64::from(s.uniform_range(0.01, 1.2) * sigma2 / spectral_norm(&ds));
        check_svd2_bound(&s0, &ds)
    })?;

    let congruence = tally("congruence-sigma2", true, instances, seed ^ 2, |s| {
        let n = 2 + s.below(15);
        let b = random_matrix(n, n - 1, s);
        check_congruence_sigma2(&random_matrix(n, n, s), &(&b * b.adjoint()))
    })?;

    let block = tally("block-diagonal-domination", true, instances, seed ^ 3, |s| {
        let n = 2 + s.below(15);
        let rank = 1 + s.below(n);
        let b = random_matrix(n, rank, s);
        block_psd_bound_check(&(&b * b.adjoint()), 1 + s.below(n - 1))
    })?;
    Ok(vec![perturbation, svd2, congruence, block])
}

/// Dense `κ(A_w)`, `σ₂(S₀)` and `‖S‖²` against the closed-form evaluators on
/// repeated-measurement problems with `m = 24, n = 4, p = 12`.
pub fn bound_checks(seeds: usize, seed: u64) -> Result<Vec<CheckLine>> {
    let (m, n, p) = (24, 4, 12);
    let required = (seeds * 9).div_ceil(10);
    let (mut kappa_ok, mut sigma_ok, mut lambda_ok) = (0, 0, 0);
    let mut worst_lambda_ratio = f64::INFINITY;
    for i in 0..seeds {
        let cfg = ProblemConfig::new(ModelKind::RepeatedMeasurements, SensingSpec::new(SensingKind::TallDft, m, n), p)
            .with_snr_db(10.0);
        let problem = synthesize_problem(&cfg, &mut RandomStream::derive(seed, i as u64))?;
        let w = default_w(problem.model, m, n, p, &WeightHint::Ones)?;
        let report = bound_report(&problem, &w)?;

        let clean = StackedSystem::noiseless(&problem, w.clone(), C64::from(1.0))?;
        let (aw, s0) = materialize_system(&clean)?;
        kappa_ok += usize::from(condition_number(&aw) <= report.kappa_upper);
        sigma_ok += usize::from(singular_values(&s0)[1] >= report.sigma2_lower);

        let noisy = StackedSystem::unconstrained(&problem);
        let (_, s) = materialize_system(&noisy)?;
        let top = spectral_norm(&s).powi(2);
        let lambda = lambda_bound(&noisy)?;
        worst_lambda_ratio = worst_lambda_ratio.min(lambda / top);
        lambda_ok += usize::from(lambda >= top);
    }
    Ok(vec![
        CheckLine { name: "kappa-bound".into(), passed: kappa_ok, total: seeds, required, detail: String::new() },
        CheckLine { name: "sigma2-bound".into(), passed: sigma_ok, total: seeds, required, detail: String::new() },
        CheckLine::all("lambda-bound", lambda_ok, seeds, format!("min lambda/|S|^2 {worst_lambda_ratio:.4}")),
    ])
}

pub fn run_suite(suite: Suite, seed: u64) -> Result<VerifyReport> {
    let mut lines = Vec::new();
    if matches!(suite, Suite::Lemmas | Suite::All) {
        lines.extend(moment_checks(10, 100_000, seed)?);
        lines.extend(deterministic_checks(100, seed)?);
    }
    if matches!(suite, Suite::Bounds | Suite::All) {
        lines.extend(bound_checks(100, seed)?);
    }
    Ok(VerifyReport { lines })
}
