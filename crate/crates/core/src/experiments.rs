//! Monte-Carlo sweeps over SNR with CSV output.

use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diagnostics::bound_report;
use crate::error::{Error, Result};
use crate::lls::{solve_lls, LlsConfig, SolveReport};
use crate::metrics::rel_error_report;
use crate::numerics::{RandomStream, C64};
use crate::sensing::{SensingKind, SensingSpec};
use crate::spectral::{solve_spectral, SpectralConfig};
use crate::system::{
    default_w, synthesize_problem, GainDist, ModelKind, ProblemConfig, ProblemInstance, StackedSystem, WeightHint,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum SolverChoice {
    #[default]
    Lls,
    Spectral,
    Both,
}

impl SolverChoice {
    pub fn solvers(self) -> &'static [SolverKind] {
        match self {
            Self::Lls => &[SolverKind::Lls],
            Self::Spectral => &[SolverKind::Spectral],
            Self::Both => &[SolverKind::Lls, SolverKind::Spectral],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverKind {
    Lls,
    Spectral,
}

/// SNR values in JSON: numbers, or `"inf"` for noiseless.
pub mod snr_serde {
    use serde::{de, Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn parse(text: &str) -> Result<f64, String> {
        match text.trim().to_ascii_lowercase().as_str() {
            "inf" | "+inf" | "infinity" | "+infinity" => Ok(f64::INFINITY),
            other => {
                let v: f64 = other.parse().map_err(|_| format!("invalid SNR value '{text}'"))?;
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(format!("invalid SNR value '{text}'"))
                }
            }
        }
    }

    fn to_repr(v: f64) -> Repr {
        if v.is_finite() {
            Repr::Num(v)
        } else {
            Repr::Text("inf".into())
        }
    }

    fn from_repr<E: de::Error>(r: Repr) -> Result<f64, E> {
        match r {
            Repr::Num(v) => Ok(v),
            Repr::Text(t) => parse(&t).map_err(E::custom),
        }
    }

    pub fn serialize<S: Serializer>(values: &[f64], s: S) -> Result<S::Ok, S::Error> {
        values.iter().map(|v| to_repr(*v)).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        Vec::<Repr>::deserialize(d)?.into_iter().map(from_repr).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelKind,
    pub m: usize,
    pub n: usize,
    pub p: usize,
    pub sensing: SensingKind,
    pub gain_dist: GainDist,
    pub w: WeightHint,
    pub c: f64,
    #[serde(with = "snr_serde")]
    pub snr: Vec<f64>,
    pub trials: usize,
    pub solver: SolverChoice,
    pub seed: u64,
    pub out: Option<std::path::PathBuf>,
    pub lls: LlsConfig,
    pub spectral: SpectralConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            model: ModelKind::DiverseInputs,
            m: 64,
            n: 16,
            p: 8,
            sensing: SensingKind::SubsampledHadamard,
            gain_dist: GainDist::Uniform,
            w: WeightHint::OnesOnGains,
            c: 1.0,
            snr: vec![10.0, 20.0, 30.0, 40.0],
            trials: 10,
            solver: SolverChoice::Lls,
            seed: 0,
            out: None,
            lls: LlsConfig::default(),
            spectral: SpectralConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.m == 0 || self.n == 0 || self.p == 0 {
            return Err(Error::InvalidDimension(format!(
                "m, n, p must be positive ({}, {}, {})",
                self.m, self.n, self.p
            )));
        }
        if self.trials == 0 {
            return Err(Error::InvalidInput("trials must be at least 1".into()));
        }
        if self.snr.is_empty() {
            return Err(Error::InvalidInput("SNR grid is empty".into()));
        }
        if let Some(bad) = self.snr.iter().find(|v| v.is_nan() || **v == f64::NEG_INFINITY) {
            return Err(Error::InvalidInput(format!("SNR values must be finite or inf (got {bad})")));
        }
        if !self.c.is_finite() || (self.c == 0.0 && self.solver != SolverChoice::Spectral) {
            return Err(Error::InvalidInput("c must be finite and nonzero for least squares".into()));
        }
        SensingSpec::new(self.sensing, self.m, self.n).validate()?;
        default_w(self.model, self.m, self.n, self.p, &self.w)?;
        self.lls.validate()?;
        self.spectral.validate()
    }

    pub fn problem_config(&self, snr_db: f64) -> ProblemConfig {
        ProblemConfig::new(self.model, SensingSpec::new(self.sensing, self.m, self.n), self.p)
            .with_gains(self.gain_dist.clone())
            .with_snr_db(snr_db)
    }

    /// The instance for `trial`. Gains, signals, operators and the raw noise
    /// direction depend only on `(seed, trial)`, so every SNR level and every
    /// solver sees the same underlying draw.
    pub fn instance(&self, snr_db: f64, trial: usize) -> Result<ProblemInstance> {
        synthesize_problem(&self.problem_config(snr_db), &mut RandomStream::derive(self.seed, trial as u64))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvRow {
    pub model: ModelKind,
    pub solver: SolverKind,
    pub m: usize,
    pub n: usize,
    pub p: usize,
    pub snr_db: f64,
    pub trial: usize,
    pub rel_error_db: f64,
    pub iterations: usize,
    pub converged: bool,
    pub kappa_bound: f64,
    pub eta: f64,
    pub sigma2_bound: f64,
    pub wall_time: f64,
}

pub fn solve_with(
    solver: SolverKind,
    problem: &ProblemInstance,
    w: &[C64],
    c: C64,
    lls: &LlsConfig,
    spectral: &SpectralConfig,
) -> Result<SolveReport> {
    match solver {
        SolverKind::Lls => solve_lls(&StackedSystem::new(problem, w.to_vec(), c)?, lls),
        SolverKind::Spectral => solve_spectral(&StackedSystem::unconstrained(problem), spectral),
    }
}

/// Rows for one `(snr, trial)` point, one per requested solver.
pub fn run_trial(cfg: &ExperimentConfig, snr_db: f64, trial: usize) -> Result<Vec<CsvRow>> {
    let problem = cfg.instance(snr_db, trial)?;
    let w = default_w(cfg.model, cfg.m, cfg.n, cfg.p, &cfg.w)?;
    let bounds = bound_report(&problem, &w)?;
    cfg.solver
        .solvers()
        .iter()
        .map(|&solver| {
            let start = Instant::now();
            let report = solve_with(solver, &problem, &w, C64::from(cfg.c), &cfg.lls, &cfg.spectral)?;
            let err = rel_error_report(&report.z_hat, &problem)?;
            Ok(CsvRow {
                model: cfg.model,
                solver,
                m: cfg.m,
                n: cfg.n,
                p: cfg.p,
                snr_db,
                trial,
                rel_error_db: err.rel_error_db,
                iterations: report.iterations,
                converged: report.converged,
                kappa_bound: bounds.kappa_upper,
                eta: bounds.eta,
                sigma2_bound: bounds.sigma2_lower,
                wall_time: start.elapsed().as_secs_f64(),
            })
        })
        .collect()
}

/// All rows in `(snr, trial, solver)` order; trials run in parallel.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<Vec<CsvRow>> {
    cfg.validate()?;
    let tasks: Vec<(f64, usize)> = cfg.snr.iter().flat_map(|&s| (0..cfg.trials).map(move |t| (s, t))).collect();
    let chunks: Vec<Vec<CsvRow>> =
        tasks.par_iter().map(|&(snr, trial)| run_trial(cfg, snr, trial)).collect::<Result<_>>()?;
    Ok(chunks.into_iter().flatten().collect())
}

/// Paired least-squares and spectral rows on identical instances.
pub fn run_compare(cfg: &ExperimentConfig) -> Result<Vec<CsvRow>> {
    let cfg = ExperimentConfig { solver: SolverChoice::Both, ..cfg.clone() };
    run_sweep(&cfg)
}

pub fn write_csv<W: Write>(rows: &[CsvRow], out: W) -> Result<()> {
    let mut writer = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    if rows.is_empty() {
        writer.write_record([
            "model",
            "solver",
            "m",
            "n",
            "p",
            "snr_db",
            "trial",
            "rel_error_db",
            "iterations",
            "converged",
            "kappa_bound",
            "eta",
            "sigma2_bound",
            "wall_time",
        ])?;
    }
    for row in rows {
        writer.serialize(row)?;
    }
    writer.flush()?;
    Ok(())
}

pub fn read_csv<R: std::io::Read>(input: R) -> Result<Vec<CsvRow>> {
    csv::Reader::from_reader(input).deserialize().map(|r| r.map_err(Error::from)).collect()
}

pub fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let k = values.len() / 2;
    Some(if values.len() % 2 == 1 { values[k] } else { 0.5 * (values[k - 1] + values[k]) })
}

/// Median `rel_error_db` per SNR level for one solver, in grid order.
pub fn median_by_snr(rows: &[CsvRow], solver: SolverKind) -> Vec<(f64, f64)> {
    let mut levels: Vec<f64> = Vec::new();
    for r in rows.iter().filter(|r| r.solver == solver) {
        if !levels.contains(&r.snr_db) {
            levels.push(r.snr_db);
        }
    }
    levels
        .into_iter()
        .filter_map(|snr| {
            let mut vals: Vec<f64> =
                rows.iter().filter(|r| r.solver == solver && r.snr_db == snr).map(|r| r.rel_error_db).collect();
            median(&mut vals).map(|m| (snr, m))
        })
        .collect()
}

/// Least-squares slope of `y` against `x`.
pub fn fit_slope(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let k = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / k;
    let my = points.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ExperimentConfig {
        ExperimentConfig { m: 32, n: 8, p: 4, trials: 3, snr: vec![10.0, 20.0], ..Default::default() }
    }

    #[test]
    fn row_count_and_order() {
        let rows = run_sweep(&ExperimentConfig { solver: SolverChoice::Both, ..small() }).unwrap();
        assert_eq!(rows.len(), 2 * 3 * 2);
        assert_eq!((rows[0].snr_db, rows[0].trial, rows[0].solver), (10.0, 0, SolverKind::Lls));
        assert_eq!((rows[1].snr_db, rows[1].trial, rows[1].solver), (10.0, 0, SolverKind::Spectral));
        assert_eq!((rows[11].snr_db, rows[11].trial), (20.0, 2));
    }

    #[test]
    fn csv_is_deterministic_modulo_wall_time() {
        let strip = |rows: Vec<CsvRow>| -> Vec<u8> {
            let rows: Vec<CsvRow> = rows.into_iter().map(|r| CsvRow { wall_time: 0.0, ..r }).collect();
            let mut buf = Vec::new();
            write_csv(&rows, &mut buf).unwrap();
            buf
        };
        let a = strip(run_sweep(&small()).unwrap());
        let b = strip(run_sweep(&small()).unwrap());
        assert_eq!(a, b);
        let text = String::from_utf8(a).unwrap();
        assert_eq!(text.lines().filter(|l| l.starts_with("model,")).count(), 1);
        assert!(!text.contains('\r'));
    }

    #[test]
    fn csv_round_trip_with_infinite_snr() {
        let cfg = ExperimentConfig { snr: vec![f64::INFINITY], trials: 1, ..small() };
        let rows = run_sweep(&cfg).unwrap();
        let mut buf = Vec::new();
        write_csv(&rows, &mut buf).unwrap();
        let back = read_csv(buf.as_slice()).unwrap();
        assert_eq!(back.len(), 1);
        assert_eq!(back[0].snr_db, f64::INFINITY);
        assert!(back[0].rel_error_db <= -120.0, "{}", back[0].rel_error_db);
    }

    #[test]
    fn same_instance_across_solvers_and_snr() {
        let cfg = small();
        let a = cfg.instance(10.0, 1).unwrap();
        let b = cfg.instance(10.0, 1).unwrap();
        assert_eq!(a.y, b.y);
        let c = cfg.instance(20.0, 1).unwrap();
        assert_eq!(a.y_clean, c.y_clean);
    }

    #[test]
    fn config_json_round_trip_and_validation() {
        let cfg = ExperimentConfig { snr: vec![5.0, f64::INFINITY], ..small() };
        let text = serde_json::to_string(&cfg).unwrap();
        assert!(text.contains("\"inf\""));
        let back: ExperimentConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, cfg);
        let partial: ExperimentConfig = serde_json::from_str(r#"{"model": 3, "snr": [10, "inf"]}"#).unwrap();
        assert_eq!(partial.model, ModelKind::MultipleSnapshots);
        assert!(serde_json::from_str::<ExperimentConfig>(r#"{"bogus": 1}"#).is_err());
        assert!(ExperimentConfig { trials: 0, ..small() }.validate().is_err());
        assert!(ExperimentConfig { snr: vec![f64::NAN], ..small() }.validate().is_err());
        assert!(ExperimentConfig { c: 0.0, ..small() }.validate().is_err());
    }

    #[test]
    fn slope_and_median() {
        assert_eq!(fit_slope(&[(0.0, 1.0), (1.0, -1.0), (2.0, -3.0)]), Some(-2.0));
        assert_eq!(median(&mut [3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(&mut [4.0, 1.0, 2.0, 3.0]), Some(2.5));
        assert_eq!(median(&mut []), None);
    }
}
