use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::Serialize;

use selfcal::deblur::{run_deblur, test_pattern, DeblurConfig};
use selfcal::diagnostics::bound_report;
use selfcal::experiments::{run_compare, run_sweep, snr_serde, solve_with, write_csv, ExperimentConfig, SolverChoice};
use selfcal::pgm::{read_pgm, write_pgm};
use selfcal::system::{default_w, ModelKind};
use selfcal::verify::{run_suite, Suite};
use selfcal::{rel_error_report, Error, C64};

const EXIT_NOT_CONVERGED: u8 = 1;
const EXIT_INVALID: u8 = 2;
const EXIT_VERIFY_FAILED: u8 = 3;

#[derive(Parser)]
#[command(
    name = "selfcal",
    version,
    about = "Self-calibration experiments: generate, solve, sweep, compare, deblur, verify"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize one instance and dump it as JSON.
    Generate(ExperimentArgs),
    /// Solve one instance and report the errors and bounds.
    Solve(ExperimentArgs),
    /// Monte-Carlo sweep over the SNR grid, CSV out.
    Sweep(ExperimentArgs),
    /// Paired least-squares and spectral runs on identical instances, CSV out.
    Compare(ExperimentArgs),
    /// Random-mask deblurring demo with PGM output.
    Deblur(DeblurArgs),
    /// Run the verification suites.
    Verify(VerifyArgs),
}

fn parse_kebab<T: DeserializeOwned>(text: &str) -> Result<T, String> {
    serde_json::from_value(serde_json::Value::String(text.to_owned())).map_err(|e| e.to_string())
}

fn parse_model(text: &str) -> Result<ModelKind, String> {
    let v: u8 = text.parse().map_err(|_| format!("model must be 1, 2 or 3 (got '{text}')"))?;
    ModelKind::try_from(v)
}

#[derive(Clone)]
struct SnrGrid(Vec<f64>);

fn parse_snr_list(text: &str) -> Result<SnrGrid, String> {
    text.split(',').map(snr_serde::parse).collect::<Result<_, _>>().map(SnrGrid)
}

#[derive(Args)]
struct ExperimentArgs {
    /// JSON experiment config; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_parser = parse_model)]
    model: Option<ModelKind>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    p: Option<usize>,
    /// gaussian, tall-dft, tall-hadamard, fat-dft, fat-hadamard, subsampled-dft, subsampled-hadamard
    #[arg(long, value_parser = parse_kebab::<selfcal::SensingKind>)]
    sensing: Option<selfcal::SensingKind>,
    /// uniform or steinhaus
    #[arg(long, value_parser = parse_kebab::<selfcal::system::GainDist>)]
    gain_dist: Option<selfcal::system::GainDist>,
    /// ones, ones-on-x, ones-on-gains or scaled-e1
    #[arg(long, value_parser = parse_kebab::<selfcal::system::WeightHint>)]
    w: Option<selfcal::system::WeightHint>,
    #[arg(long)]
    c: Option<f64>,
    /// Comma-separated dB values; `inf` for noiseless.
    #[arg(long, value_parser = parse_snr_list)]
    snr: Option<SnrGrid>,
    #[arg(long)]
    trials: Option<usize>,
    /// lls, spectral or both
    #[arg(long, value_parser = parse_kebab::<SolverChoice>)]
    solver: Option<SolverChoice>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, Error> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::InvalidInput(format!("{}: {e}", path.display())))
}

impl ExperimentArgs {
    fn resolve(self) -> Result<ExperimentConfig, Error> {
        let mut cfg: ExperimentConfig = match &self.config {
            Some(path) => read_json(path)?,
            None => ExperimentConfig::default(),
        };
        macro_rules! take {
            ($($field:ident),*) => { $(if let Some(v) = self.$field { cfg.$field = v; })* };
        }
        take!(model, m, n, p, sensing, gain_dist, w, c, trials, solver, seed);
        if let Some(SnrGrid(grid)) = self.snr {
            cfg.snr = grid;
        }
        if self.out.is_some() {
            cfg.out = self.out;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct DeblurArgs {
    /// JSON deblur config; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Square P5 PGM with a power-of-two side; a built-in test pattern when absent.
    #[arg(long)]
    image: Option<PathBuf>,
    /// Side of the built-in test pattern.
    #[arg(long, default_value_t = 32)]
    size: usize,
    /// Side of the square frequency support.
    #[arg(long)]
    support: Option<usize>,
    #[arg(long)]
    p: Option<usize>,
    #[arg(long, value_parser = snr_serde::parse)]
    snr: Option<f64>,
    /// Width of the Gaussian frequency response in bins.
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for the PGM images.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct VerifyArgs {
    /// lemmas, bounds or all
    #[arg(long, default_value = "all", value_parser = parse_kebab::<Suite>)]
    suite: Suite,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>, Error> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn write_json<T: Serialize>(value: &T, path: Option<&Path>) -> Result<(), Error> {
    let mut out = output(path)?;
    serde_json::to_writer_pretty(&mut out, value).map_err(|e| Error::Io(e.into()))?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

fn pairs(v: &[C64]) -> Vec<[f64; 2]> {
    v.iter().map(|z| [z.re, z.im]).collect()
}

#[derive(Serialize)]
struct InstanceDump {
    model: ModelKind,
    m: usize,
    n: usize,
    p: usize,
    snr_db: Option<f64>,
    seed: u64,
    d0: Vec<[f64; 2]>,
    signals: Vec<Vec<[f64; 2]>>,
    y: Vec<Vec<[f64; 2]>>,
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

fn first_snr(cfg: &ExperimentConfig) -> f64 {
    cfg.snr[0]
}

fn cmd_generate(cfg: ExperimentConfig) -> Result<ExitCode, Error> {
    let pr = cfg.instance(first_snr(&cfg), 0)?;
    let dump = InstanceDump {
        model: pr.model,
        m: pr.m,
        n: pr.n,
        p: pr.p,
        snr_db: finite(pr.snr_db),
        seed: pr.seed,
        d0: pairs(&pr.d0),
        signals: pr.signals.iter().map(|x| pairs(x)).collect(),
        y: pr.y.iter().map(|y| pairs(y)).collect(),
    };
    write_json(&dump, cfg.out.as_deref())?;
    Ok(ExitCode::SUCCESS)
}

#[derive(Serialize)]
struct SolveSummary {
    solver: selfcal::experiments::SolverKind,
    rel_error: f64,
    rel_error_db: Option<f64>,
    gain_error: f64,
    signal_error: f64,
    iterations: usize,
    converged: bool,
    residual_upticks: usize,
    wall_time: f64,
}

#[derive(Serialize)]
struct SolveOutput {
    model: ModelKind,
    m: usize,
    n: usize,
    p: usize,
    snr_db: Option<f64>,
    seed: u64,
    kappa_bound: Option<f64>,
    eta: f64,
    predicted_error_upper: Option<f64>,
    sigma2_bound: f64,
    results: Vec<SolveSummary>,
}

fn cmd_solve(cfg: ExperimentConfig) -> Result<ExitCode, Error> {
    let pr = cfg.instance(first_snr(&cfg), 0)?;
    let w = default_w(cfg.model, cfg.m, cfg.n, cfg.p, &cfg.w)?;
    let bounds = bound_report(&pr, &w)?;
    let mut results = Vec::new();
    for &solver in cfg.solver.solvers() {
        let report = solve_with(solver, &pr, &w, C64::from(cfg.c), &cfg.lls, &cfg.spectral)?;
        let err = rel_error_report(&report.z_hat, &pr)?;
        results.push(SolveSummary {
            solver,
            rel_error: err.rel_error,
            rel_error_db: finite(err.rel_error_db),
            gain_error: err.gain_error,
            signal_error: err.signal_error,
            iterations: report.iterations,
            converged: report.converged,
            residual_upticks: report.residual_upticks,
            wall_time: report.wall_time,
        });
    }
    let converged = results.iter().all(|r| r.converged);
    let out = SolveOutput {
        model: pr.model,
        m: pr.m,
        n: pr.n,
        p: pr.p,
        snr_db: finite(pr.snr_db),
        seed: pr.seed,
        kappa_bound: finite(bounds.kappa_upper),
        eta: bounds.eta,
        predicted_error_upper: finite(bounds.predicted_error_upper),
        sigma2_bound: bounds.sigma2_lower,
        results,
    };
    write_json(&out, cfg.out.as_deref())?;
    Ok(if converged { ExitCode::SUCCESS } else { ExitCode::from(EXIT_NOT_CONVERGED) })
}

fn cmd_csv(cfg: ExperimentConfig, compare: bool) -> Result<ExitCode, Error> {
    let rows = if compare { run_compare(&cfg)? } else { run_sweep(&cfg)? };
    let out = output(cfg.out.as_deref())?;
    write_csv(&rows, out)?;
    Ok(ExitCode::SUCCESS)
}

#[derive(Serialize)]
struct DeblurSummary {
    side: usize,
    support: usize,
    p: usize,
    snr_db: Option<f64>,
    seed: u64,
    rel_error: f64,
    uncalibrated_rel_error: f64,
    iterations: usize,
    converged: bool,
    outputs: Vec<PathBuf>,
}

fn cmd_deblur(args: DeblurArgs) -> Result<ExitCode, Error> {
    let mut cfg: DeblurConfig = match &args.config {
        Some(path) => read_json(path)?,
        None => DeblurConfig::default(),
    };
    if let Some(v) = args.support {
        cfg.support = v;
    }
    if let Some(v) = args.p {
        cfg.p = v;
    }
    if let Some(v) = args.snr {
        cfg.snr_db = v;
    }
    if let Some(v) = args.seed {
        cfg.seed = v;
    }
    if args.sigma.is_some() {
        cfg.sigma = args.sigma;
    }
    let image = match &args.image {
        Some(path) => read_pgm(path)?,
        None => test_pattern(args.size),
    };
    let outcome = run_deblur(&image, &cfg)?;
    std::fs::create_dir_all(&args.out)?;
    let mut outputs = Vec::new();
    for (name, img) in [
        ("original.pgm", &image),
        ("blurred.pgm", &outcome.blurred),
        ("uncalibrated.pgm", &outcome.uncalibrated),
        ("recovered.pgm", &outcome.recovered),
    ] {
        let path = args.out.join(name);
        write_pgm(img, &path)?;
        outputs.push(path);
    }
    let summary = DeblurSummary {
        side: image.width,
        support: cfg.support,
        p: cfg.p,
        snr_db: finite(cfg.snr_db),
        seed: cfg.seed,
        rel_error: outcome.rel_error,
        uncalibrated_rel_error: outcome.uncalibrated_rel_error,
        iterations: outcome.report.iterations,
        converged: outcome.report.converged,
        outputs,
    };
    write_json(&summary, None)?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_verify(args: VerifyArgs) -> Result<ExitCode, Error> {
    let report = run_suite(args.suite, args.seed)?;
    let mut out = io::stdout().lock();
    for line in &report.lines {
        writeln!(out, "{line}")?;
    }
    Ok(if report.passed() { ExitCode::SUCCESS } else { ExitCode::from(EXIT_VERIFY_FAILED) })
}

fn run(cli: Cli) -> Result<ExitCode, Error> {
    match cli.command {
        Command::Generate(a) => cmd_generate(a.resolve()?),
        Command::Solve(a) => cmd_solve(a.resolve()?),
        Command::Sweep(a) => cmd_csv(a.resolve()?, false),
        Command::Compare(a) => cmd_csv(a.resolve()?, true),
        Command::Deblur(a) => cmd_deblur(a),
        Command::Verify(a) => cmd_verify(a),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_INVALID)
        }
    }
}
