//! Problem synthesis for the three self-calibration models and the
//! linearized block operators built from them.
//!
//! With `s = 1/d` entrywise, `y_l = diag(d)·A_l·x_l` becomes
//! `diag(y_l)·s − A_l·x_l = 0`, which is linear in `z = (s, x_1, …)`. The
//! stacked map `S` has one `m`-row block per observation; `A_w` appends the
//! single row `w*` whose right-hand side is `c`.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::numerics::{norm_sq, RandomStream, C64, ONE, ZERO};
use crate::sensing::{make_sensing, SensingOperator, SensingSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum ModelKind {
    /// `y_l = D·A_l·x`: one signal, `p` sensing matrices.
    RepeatedMeasurements,
    /// `y_l = D·A_l·x_l`: `p` signals, `p` sensing matrices.
    DiverseInputs,
    /// `y_l = D·A·x_l`: `p` signals, one shared sensing matrix.
    MultipleSnapshots,
}

impl ModelKind {
    pub fn index(self) -> u8 {
        match self {
            Self::RepeatedMeasurements => 1,
            Self::DiverseInputs => 2,
            Self::MultipleSnapshots => 3,
        }
    }

    /// Length of the unknown `z`.
    pub fn unknowns(self, m: usize, n: usize, p: usize) -> usize {
        match self {
            Self::RepeatedMeasurements => m + n,
            _ => m + n * p,
        }
    }

    pub fn signal_count(self, p: usize) -> usize {
        match self {
            Self::RepeatedMeasurements => 1,
            _ => p,
        }
    }

    pub fn operator_count(self, p: usize) -> usize {
        match self {
            Self::MultipleSnapshots => 1,
            _ => p,
        }
    }
}

impl TryFrom<u8> for ModelKind {
    type Error = String;

    fn try_from(v: u8) -> std::result::Result<Self, String> {
        match v {
            1 => Ok(Self::RepeatedMeasurements),
            2 => Ok(Self::DiverseInputs),
            3 => Ok(Self::MultipleSnapshots),
            other => Err(format!("model must be 1, 2 or 3 (got {other})")),
        }
    }
}

impl From<ModelKind> for u8 {
    fn from(m: ModelKind) -> u8 {
        m.index()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GainDist {
    /// Real gains uniform on `[0.5, 1.5]`.
    #[default]
    Uniform,
    /// Unit-modulus gains with uniform phase.
    Steinhaus,
    #[serde(skip)]
    Custom(Vec<C64>),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SignalDist {
    #[default]
    ComplexGaussian,
    RealGaussian,
    #[serde(skip)]
    Custom(Vec<Vec<C64>>),
}

#[derive(Debug, Clone)]
pub struct ProblemConfig {
    pub model: ModelKind,
    pub m: usize,
    pub n: usize,
    pub p: usize,
    pub gains: GainDist,
    pub signals: SignalDist,
    pub sensing: SensingSpec,
    /// `f64::INFINITY` means noiseless.
    pub snr_db: f64,
}

impl ProblemConfig {
    pub fn new(model: ModelKind, sensing: SensingSpec, p: usize) -> Self {
        Self {
            model,
            m: sensing.m,
            n: sensing.n,
            p,
            gains: GainDist::Uniform,
            signals: SignalDist::ComplexGaussian,
            sensing,
            snr_db: f64::INFINITY,
        }
    }

    pub fn with_gains(mut self, gains: GainDist) -> Self {
        self.gains = gains;
        self
    }

    pub fn with_signals(mut self, signals: SignalDist) -> Self {
        self.signals = signals;
        self
    }

    pub fn with_snr_db(mut self, snr_db: f64) -> Self {
        self.snr_db = snr_db;
        self
    }
}

/// Ground truth, sensing operators and observations for one instance.
#[derive(Debug, Clone)]
pub struct ProblemInstance {
    pub model: ModelKind,
    pub m: usize,
    pub n: usize,
    pub p: usize,
    pub d0: Vec<C64>,
    pub s0: Vec<C64>,
    /// One signal for model 1, `p` signals otherwise.
    pub signals: Vec<Vec<C64>>,
    /// `p` operators for models 1 and 2, one shared operator for model 3.
    pub operators: Vec<SensingOperator>,
    pub y_clean: Vec<Vec<C64>>,
    pub y: Vec<Vec<C64>>,
    pub eps: Vec<Vec<C64>>,
    pub snr_db: f64,
    pub seed: u64,
}

pub fn synthesize_problem(cfg: &ProblemConfig, stream: &mut RandomStream) -> Result<ProblemInstance> {
    let ProblemConfig { model, m, n, p, .. } = *cfg;
    if m == 0 || n == 0 || p == 0 {
        return Err(Error::InvalidDimension(format!("m, n, p must be positive (m={m}, n={n}, p={p})")));
    }
    if cfg.sensing.m != m || cfg.sensing.n != n {
        return Err(Error::InvalidSpec(format!(
            "sensing spec is {}x{} but problem is {m}x{n}",
            cfg.sensing.m, cfg.sensing.n
        )));
    }
    cfg.sensing.validate()?;
    if cfg.snr_db.is_nan() || cfg.snr_db == f64::NEG_INFINITY {
        return Err(Error::InvalidInput(format!("snr_db must be finite or +inf (got {})", cfg.snr_db)));
    }
    let seed = stream.seed();

    let d0 = match &cfg.gains {
        GainDist::Uniform => (0..m).map(|_| C64::new(stream.uniform_range(0.5, 1.5), 0.0)).collect(),
        GainDist::Steinhaus => (0..m).map(|_| stream.unit_phase()).collect(),
        GainDist::Custom(d) => {
            check_len(m, d.len())?;
            d.clone()
        }
    };

    let count = model.signal_count(p);
    let signals = match &cfg.signals {
        SignalDist::ComplexGaussian => {
            (0..count).map(|_| (0..n).map(|_| stream.complex_gaussian()).collect()).collect()
        }
        SignalDist::RealGaussian => {
            (0..count).map(|_| (0..n).map(|_| C64::new(stream.standard_normal(), 0.0)).collect()).collect()
        }
        SignalDist::Custom(x) => {
            check_len(count, x.len())?;
            for xl in x {
                check_len(n, xl.len())?;
            }
            x.clone()
        }
    };

    let operators =
        (0..model.operator_count(p)).map(|_| make_sensing(cfg.sensing, stream)).collect::<Result<Vec<_>>>()?;

    let mut instance = ProblemInstance::from_parts(model, p, d0, signals, operators)?;
    instance.seed = seed;
    if cfg.snr_db.is_finite() {
        let raw: Vec<Vec<C64>> = (0..p).map(|_| (0..m).map(|_| stream.complex_gaussian()).collect()).collect();
        instance.set_noise_for_snr(raw, cfg.snr_db)?;
    }
    Ok(instance)
}

impl ProblemInstance {
    /// Noiseless instance from explicit parts; observations are computed.
    pub fn from_parts(
        model: ModelKind,
        p: usize,
        d0: Vec<C64>,
        signals: Vec<Vec<C64>>,
        operators: Vec<SensingOperator>,
    ) -> Result<Self> {
        let m = d0.len();
        check_len(model.signal_count(p), signals.len())?;
        check_len(model.operator_count(p), operators.len())?;
        let n = operators.first().map(|op| op.cols()).unwrap_or(0);
        if m == 0 || n == 0 || p == 0 {
            return Err(Error::InvalidDimension("empty problem".into()));
        }
        for op in &operators {
            check_len(m, op.rows())?;
            check_len(n, op.cols())?;
        }
        for x in &signals {
            check_len(n, x.len())?;
        }
        if d0.iter().any(|d| d.norm() == 0.0) {
            return Err(Error::InvalidInput("gains must be nonzero (D invertible)".into()));
        }
        let s0 = d0.iter().map(|d| d.inv()).collect();
        let mut instance = Self {
            model,
            m,
            n,
            p,
            d0,
            s0,
            signals,
            operators,
            y_clean: Vec::new(),
            y: Vec::new(),
            eps: vec![vec![ZERO; m]; p],
            snr_db: f64::INFINITY,
            seed: 0,
        };
        instance.y_clean = (0..p)
            .map(|l| {
                let ax = instance.operator(l).apply(instance.signal(l))?;
                Ok(ax.iter().zip(&instance.d0).map(|(a, d)| a * d).collect())
            })
            .collect::<Result<_>>()?;
        instance.y = instance.y_clean.clone();
        Ok(instance)
    }

    /// Scales `raw` so that `10·log10(Σ‖y_clean‖² / Σ‖ε‖²)` equals `snr_db`.
    pub fn set_noise_for_snr(&mut self, mut raw: Vec<Vec<C64>>, snr_db: f64) -> Result<()> {
        check_len(self.p, raw.len())?;
        for e in &raw {
            check_len(self.m, e.len())?;
        }
        let signal: f64 = self.y_clean.iter().map(|y| norm_sq(y)).sum();
        let noise: f64 = raw.iter().map(|e| norm_sq(e)).sum();
        if noise == 0.0 || signal == 0.0 {
            return Err(Error::InvalidInput("cannot scale noise: zero signal or zero noise energy".into()));
        }
        let factor = (signal / (noise * 10f64.powf(snr_db / 10.0))).sqrt();
        for e in raw.iter_mut().flatten() {
            *e *= factor;
        }
        self.y = self.y_clean.iter().zip(&raw).map(|(y, e)| y.iter().zip(e).map(|(a, b)| a + b).collect()).collect();
        self.eps = raw;
        self.snr_db = snr_db;
        Ok(())
    }

    pub fn operator(&self, l: usize) -> &SensingOperator {
        match self.model {
            ModelKind::MultipleSnapshots => &self.operators[0],
            _ => &self.operators[l],
        }
    }

    pub fn signal(&self, l: usize) -> &[C64] {
        match self.model {
            ModelKind::RepeatedMeasurements => &self.signals[0],
            _ => &self.signals[l],
        }
    }

    /// Length of `z`.
    pub fn dim(&self) -> usize {
        self.model.unknowns(self.m, self.n, self.p)
    }

    /// Ground truth `z0 = (s0, x0)` or `(s0, x_1, …, x_p)`.
    pub fn z0(&self) -> Vec<C64> {
        let mut z = self.s0.clone();
        for x in &self.signals {
            z.extend_from_slice(x);
        }
        z
    }

    pub fn signal_norms(&self) -> Vec<f64> {
        self.signals.iter().map(|x| norm_sq(x).sqrt()).collect()
    }

    pub fn is_noiseless(&self) -> bool {
        self.eps.iter().flatten().all(|e| *e == ZERO)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeightHint {
    /// `1_{dim}`
    Ones,
    /// `(0_m, 1)`: weight on the signal part only.
    OnesOnX,
    /// `(1_m, 0)`: weight on the gain part only.
    OnesOnGains,
    /// `(√m·e_1, 0)`
    ScaledE1,
    #[serde(skip)]
    Custom(Vec<C64>),
}

pub fn default_w(model: ModelKind, m: usize, n: usize, p: usize, hint: &WeightHint) -> Result<Vec<C64>> {
    let dim = model.unknowns(m, n, p);
    let mut w = vec![ZERO; dim];
    match hint {
        WeightHint::Ones => w.fill(ONE),
        WeightHint::OnesOnX => w[m..].fill(ONE),
        WeightHint::OnesOnGains => w[..m].fill(ONE),
        WeightHint::ScaledE1 => w[0] = C64::new((m as f64).sqrt(), 0.0),
        WeightHint::Custom(v) => {
            if v.len() != dim {
                return Err(Error::InvalidInput(format!(
                    "custom w has length {} but the model has {dim} unknowns",
                    v.len()
                )));
            }
            w.copy_from_slice(v);
        }
    }
    Ok(w)
}

/// `‖δA‖ = max_i sqrt(Σ_l |ε_l(i)|²)`. Exact: the blocks `diag(ε_l)` stack
/// into a matrix whose Gram matrix is diagonal.
pub fn delta_a_norm(eps: &[Vec<C64>]) -> f64 {
    let m = eps.iter().map(Vec::len).max().unwrap_or(0);
    (0..m).map(|i| eps.iter().filter_map(|e| e.get(i)).map(|z| z.norm_sqr()).sum::<f64>()).fold(0.0, f64::max).sqrt()
}

/// The matrix-free stacked operator `S` and its constrained form `A_w`.
#[derive(Debug, Clone)]
pub struct StackedSystem<'a> {
    problem: &'a ProblemInstance,
    observations: &'a [Vec<C64>],
    w: Vec<C64>,
    c: C64,
}

impl<'a> StackedSystem<'a> {
    /// System built from the noisy observations `y`.
    pub fn new(problem: &'a ProblemInstance, w: Vec<C64>, c: C64) -> Result<Self> {
        check_len(problem.dim(), w.len())?;
        Ok(Self { problem, observations: &problem.y, w, c })
    }

    /// System built from `y_clean`, i.e. `S_0` and `A_{w,0}`.
    pub fn noiseless(problem: &'a ProblemInstance, w: Vec<C64>, c: C64) -> Result<Self> {
        check_len(problem.dim(), w.len())?;
        Ok(Self { problem, observations: &problem.y_clean, w, c })
    }

    /// `S` alone (w = 0, c = 0), as used by the spectral method.
    pub fn unconstrained(problem: &'a ProblemInstance) -> Self {
        Self { problem, observations: &problem.y, w: vec![ZERO; problem.dim()], c: ZERO }
    }

    pub fn problem(&self) -> &'a ProblemInstance {
        self.problem
    }

    pub fn observations(&self) -> &'a [Vec<C64>] {
        self.observations
    }

    pub fn w(&self) -> &[C64] {
        &self.w
    }

    pub fn c(&self) -> C64 {
        self.c
    }

    pub fn dim(&self) -> usize {
        self.problem.dim()
    }

    /// Rows of `S` (`m·p`).
    pub fn s_rows(&self) -> usize {
        self.problem.m * self.problem.p
    }

    /// `b = (0, …, 0, c)`.
    pub fn rhs(&self) -> Vec<C64> {
        let mut b = vec![ZERO; self.s_rows() + 1];
        b[self.s_rows()] = self.c;
        b
    }

    /// Block `l` is `diag(y_l)·s − A_l·x_l`.
    pub fn apply_s(&self, z: &[C64]) -> Result<Vec<C64>> {
        check_len(self.dim(), z.len())?;
        let ProblemInstance { m, n, p, model, .. } = *self.problem;
        let s = &z[..m];
        let mut out = Vec::with_capacity(m * p);
        for l in 0..p {
            let x = match model {
                ModelKind::RepeatedMeasurements => &z[m..],
                _ => &z[m + l * n..m + (l + 1) * n],
            };
            let ax = self.problem.operator(l).apply(x)?;
            out.extend(self.observations[l].iter().zip(s).zip(&ax).map(|((y, si), a)| y * si - a));
        }
        Ok(out)
    }

    pub fn apply_s_adjoint(&self, r: &[C64]) -> Result<Vec<C64>> {
        check_len(self.s_rows(), r.len())?;
        let ProblemInstance { m, n, model, .. } = *self.problem;
        let mut z = vec![ZERO; self.dim()];
        for (l, block) in r.chunks_exact(m).enumerate() {
            for ((zi, y), ri) in z[..m].iter_mut().zip(&self.observations[l]).zip(block) {
                *zi += y.conj() * ri;
            }
            let atr = self.problem.operator(l).adjoint(block)?;
            let target = match model {
                ModelKind::RepeatedMeasurements => &mut z[m..m + n],
                _ => &mut z[m + l * n..m + (l + 1) * n],
            };
            for (t, a) in target.iter_mut().zip(&atr) {
                *t -= a;
            }
        }
        Ok(z)
    }

    /// `(S·z, w*·z)`.
    pub fn apply_aw(&self, z: &[C64]) -> Result<Vec<C64>> {
        let mut out = self.apply_s(z)?;
        out.push(crate::numerics::dot(&self.w, z));
        Ok(out)
    }

    /// `S*·r + w·t` for `u = (r, t)`.
    pub fn apply_aw_adjoint(&self, u: &[C64]) -> Result<Vec<C64>> {
        check_len(self.s_rows() + 1, u.len())?;
        let (r, t) = u.split_at(self.s_rows());
        let mut z = self.apply_s_adjoint(r)?;
        crate::numerics::axpy(t[0], &self.w, &mut z);
        Ok(z)
    }

    /// Euclidean norm of every column of `A_w`; zero columns map to 1.
    pub fn column_scales(&self) -> Vec<f64> {
        let ProblemInstance { m, n, p, model, .. } = *self.problem;
        let mut sq = vec![0.0; self.dim()];
        for y in self.observations {
            for (c, yi) in sq[..m].iter_mut().zip(y) {
                *c += yi.norm_sqr();
            }
        }
        match model {
            ModelKind::RepeatedMeasurements => {
                for l in 0..p {
                    for (c, a) in sq[m..].iter_mut().zip(self.problem.operator(l).column_norms_sq()) {
                        *c += a;
                    }
                }
            }
            ModelKind::DiverseInputs | ModelKind::MultipleSnapshots => {
                for l in 0..p {
                    let cols = self.problem.operator(l).column_norms_sq();
                    for (c, a) in sq[m + l * n..m + (l + 1) * n].iter_mut().zip(cols) {
                        *c += a;
                    }
                }
            }
        }
        sq.iter()
            .zip(&self.w)
            .map(|(c, w)| {
                let norm = (c + w.norm_sqr()).sqrt();
                if norm > 0.0 {
                    norm
                } else {
                    1.0
                }
            })
            .collect()
    }
}
