//! Run configuration: a TOML document with one table per component.
//!
//! ```toml
//! experiment = "simulate"        # optional, the CLI subcommand wins
//! out_dir = "out"
//!
//! [model]                        # kappa, gamma_x, r_scatter, p_l, p_r required
//! kappa = 10.0
//! gamma_x = 2.0
//! r_scatter = 0.02
//! p_l = 1080.0
//! p_r = 1020.0
//! eta = 0.3
//! j_coupling = 1.0               # or [re, im]
//!
//! [integration]
//! dt = 1e-3
//! t_end = 500.0
//! seed_amp_l = [0.1, 0.0]
//!
//! [noise]
//! xi = 0.05
//! ```
//!
//! Rates and energies are in units of J, times in units of 1/J.

use std::path::PathBuf;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::correlation::{DEFAULT_FIT_FLOOR, DEFAULT_T0, DEFAULT_WINDOW};
use crate::ensemble::{EnsembleConfig, DEFAULT_REALIZATIONS};
use crate::error::{Error, Result};
use crate::integrator::{
    IntegrationConfig, InitialReservoir, NoiseConfig, Well, DEFAULT_DIVERGENCE_BOUND, DEFAULT_DT,
    DEFAULT_SEED_AMPLITUDE,
};
use crate::model::ModelParams;
use crate::spectral::EP_RELATIVE_TOLERANCE;

/// Largest seed representable as a TOML integer.
pub const MAX_SEED: u64 = i64::MAX as u64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    Simulate,
    Ensemble,
    Steady,
    Spectrum,
    Correlate,
    Sweep,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Simulate => "simulate",
            Experiment::Ensemble => "ensemble",
            Experiment::Steady => "steady",
            Experiment::Spectrum => "spectrum",
            Experiment::Correlate => "correlate",
            Experiment::Sweep => "sweep",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    Ensemble,
    TimeAveraged,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrelationSettings {
    /// Reference time of the ensemble estimator and start of the averaging window.
    pub t0: f64,
    /// Length t_f - t_i of the time-averaging window.
    pub window: f64,
    pub max_lag: f64,
    pub fit_floor: f64,
    pub well: Well,
    pub estimator: EstimatorKind,
}

impl Default for CorrelationSettings {
    fn default() -> Self {
        CorrelationSettings {
            t0: DEFAULT_T0,
            window: DEFAULT_WINDOW,
            max_lag: 100.0,
            fit_floor: DEFAULT_FIT_FLOOR,
            well: Well::Left,
            estimator: EstimatorKind::Ensemble,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrumSettings {
    pub gamma_min: f64,
    pub gamma_max: f64,
    pub steps: usize,
    /// Half-width of the exceptional-point band.
    pub tolerance: f64,
}

impl Default for SpectrumSettings {
    fn default() -> Self {
        SpectrumSettings {
            gamma_min: 0.0,
            gamma_max: 2.0,
            steps: 201,
            tolerance: EP_RELATIVE_TOLERANCE,
        }
    }
}

/// Evenly spaced values `min..=max`; a single step yields `min`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Range {
    pub min: f64,
    pub max: f64,
    pub steps: usize,
}

impl Range {
    pub fn values(&self) -> Vec<f64> {
        if self.steps <= 1 {
            return vec![self.min];
        }
        let span = self.max - self.min;
        (0..self.steps)
            .map(|k| self.min + span * k as f64 / (self.steps - 1) as f64)
            .collect()
    }

    fn validate(&self, key: &str) -> Result<()> {
        if !(self.min.is_finite() && self.max.is_finite() && self.min >= 0.0 && self.max >= self.min) {
            return Err(Error::invalid(key, "range needs 0 <= min <= max"));
        }
        if self.steps == 0 {
            return Err(Error::invalid(key, "steps must be >= 1"));
        }
        Ok(())
    }
}

/// Grid of pump values for `sweep`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepSettings {
    pub p_l: Range,
    pub p_r: Range,
}

impl Default for SweepSettings {
    fn default() -> Self {
        let r = Range {
            min: 900.0,
            max: 1100.0,
            steps: 5,
        };
        SweepSettings { p_l: r, p_r: r }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub experiment: Option<Experiment>,
    pub out_dir: PathBuf,
    pub params: ModelParams,
    pub integration: IntegrationConfig,
    pub noise: NoiseConfig,
    pub n_realizations: usize,
    pub base_seed: u64,
    pub correlation: CorrelationSettings,
    pub spectrum: SpectrumSettings,
    pub sweep: SweepSettings,
}

impl RunConfig {
    /// Defaults everywhere except the model, which has no default pumping.
    pub fn new(params: ModelParams) -> Self {
        RunConfig {
            experiment: None,
            out_dir: PathBuf::from("out"),
            params,
            integration: IntegrationConfig::default(),
            noise: NoiseConfig::disabled(),
            n_realizations: DEFAULT_REALIZATIONS,
            base_seed: 0,
            correlation: CorrelationSettings::default(),
            spectrum: SpectrumSettings::default(),
            sweep: SweepSettings::default(),
        }
    }

    pub fn ensemble(&self) -> EnsembleConfig {
        EnsembleConfig {
            n_realizations: self.n_realizations,
            base_seed: self.base_seed,
            params: self.params,
            integration: self.integration,
            noise: self.noise,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.integration.validate(&self.noise)?;
        if self.n_realizations == 0 {
            return Err(Error::invalid("n_realizations", "must be >= 1"));
        }
        if self.base_seed > MAX_SEED {
            return Err(Error::invalid("base_seed", format!("must be <= {MAX_SEED}")));
        }
        let c = &self.correlation;
        for (key, v) in [("t0", c.t0), ("window", c.window), ("max_lag", c.max_lag)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::invalid(key, format!("must be >= 0, got {v}")));
            }
        }
        if !(c.window >= c.max_lag) {
            return Err(Error::invalid("window", "must be >= max_lag"));
        }
        if !(c.fit_floor > 0.0 && c.fit_floor < 1.0) {
            return Err(Error::invalid("fit_floor", "must lie in (0, 1)"));
        }
        let s = &self.spectrum;
        if !(s.gamma_min.is_finite() && s.gamma_max.is_finite() && s.gamma_min < s.gamma_max) {
            return Err(Error::invalid("gamma_max", "must exceed gamma_min"));
        }
        if s.steps < 2 {
            return Err(Error::invalid("steps", "must be >= 2"));
        }
        if !(s.tolerance > 0.0) {
            return Err(Error::invalid("tolerance", "must be > 0"));
        }
        self.sweep.p_l.validate("sweep.p_l")?;
        self.sweep.p_r.validate("sweep.p_r")
    }

    /// Effective configuration as a TOML document that parses back to `self`.
    pub fn emit(&self) -> String {
        let doc = Document::from(self);
        toml::to_string(&doc).expect("configuration document is always serializable")
    }
}

pub fn parse_config(text: &str) -> Result<RunConfig> {
    let doc: Document = toml::from_str(text).map_err(from_toml)?;
    let cfg = doc.into_config()?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &std::path::Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_config(&text)
}

fn from_toml(e: toml::de::Error) -> Error {
    let msg = e.message().to_string();
    if let Some(rest) = msg.strip_prefix("unknown field `") {
        if let Some(end) = rest.find('`') {
            return Error::invalid(&rest[..end], "unknown key");
        }
    }
    Error::Parse(e.to_string())
}

/// A number (real) or a `[re, im]` pair.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(untagged)]
enum ComplexValue {
    Real(f64),
    Pair([f64; 2]),
}

impl From<ComplexValue> for Complex64 {
    fn from(v: ComplexValue) -> Self {
        match v {
            ComplexValue::Real(re) => Complex64::new(re, 0.0),
            ComplexValue::Pair([re, im]) => Complex64::new(re, im),
        }
    }
}

impl From<Complex64> for ComplexValue {
    fn from(z: Complex64) -> Self {
        ComplexValue::Pair([z.re, z.im])
    }
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Document {
    #[serde(skip_serializing_if = "Option::is_none")]
    experiment: Option<Experiment>,
    #[serde(skip_serializing_if = "Option::is_none")]
    out_dir: Option<PathBuf>,
    model: Option<ModelTable>,
    integration: Option<IntegrationTable>,
    noise: Option<NoiseTable>,
    ensemble: Option<EnsembleTable>,
    correlation: Option<CorrelationTable>,
    spectrum: Option<SpectrumTable>,
    sweep: Option<SweepTable>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelTable {
    kappa: Option<f64>,
    gamma_x: Option<f64>,
    r_scatter: Option<f64>,
    p_l: Option<f64>,
    p_r: Option<f64>,
    eps_l: Option<f64>,
    eps_r: Option<f64>,
    eta: Option<f64>,
    j_coupling: Option<ComplexValue>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct IntegrationTable {
    dt: Option<f64>,
    t_end: Option<f64>,
    record_stride: Option<usize>,
    seed_amp_l: Option<ComplexValue>,
    seed_amp_r: Option<ComplexValue>,
    /// Explicit initial reservoirs; both or neither. Default n = P/Γ.
    #[serde(skip_serializing_if = "Option::is_none")]
    n0_l: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    n0_r: Option<f64>,
    divergence_bound: Option<f64>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NoiseTable {
    xi: Option<f64>,
    noise_dt: Option<f64>,
    /// Defaults to true when the table is present.
    enabled: Option<bool>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EnsembleTable {
    n_realizations: Option<usize>,
    base_seed: Option<i64>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CorrelationTable {
    t0: Option<f64>,
    window: Option<f64>,
    max_lag: Option<f64>,
    fit_floor: Option<f64>,
    well: Option<Well>,
    estimator: Option<EstimatorKind>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpectrumTable {
    gamma_min: Option<f64>,
    gamma_max: Option<f64>,
    steps: Option<usize>,
    tolerance: Option<f64>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SweepTable {
    p_l: Option<Range>,
    p_r: Option<Range>,
}

fn required(v: Option<f64>, key: &str) -> Result<f64> {
    v.ok_or_else(|| Error::MissingKey(key.to_string()))
}

impl Document {
    fn into_config(self) -> Result<RunConfig> {
        let m = self.model.ok_or_else(|| Error::MissingKey("model".into()))?;
        let defaults = ModelParams::default();
        let params = ModelParams {
            kappa: required(m.kappa, "kappa")?,
            gamma_x: required(m.gamma_x, "gamma_x")?,
            r_scatter: required(m.r_scatter, "r_scatter")?,
            p_l: required(m.p_l, "p_l")?,
            p_r: required(m.p_r, "p_r")?,
            eps_l: m.eps_l.unwrap_or(defaults.eps_l),
            eps_r: m.eps_r.unwrap_or(defaults.eps_r),
            eta: m.eta.unwrap_or(defaults.eta),
            j_coupling: m.j_coupling.map_or(defaults.j_coupling, Into::into),
        };
        let mut cfg = RunConfig::new(params);
        cfg.experiment = self.experiment;
        if let Some(dir) = self.out_dir {
            cfg.out_dir = dir;
        }

        let i = self.integration.unwrap_or_default();
        let seed = Complex64::new(DEFAULT_SEED_AMPLITUDE, 0.0);
        cfg.integration = IntegrationConfig {
            dt: i.dt.unwrap_or(DEFAULT_DT),
            t_end: i.t_end.unwrap_or(cfg.integration.t_end),
            record_stride: i.record_stride.unwrap_or(cfg.integration.record_stride),
            seed_amp_l: i.seed_amp_l.map_or(seed, Into::into),
            seed_amp_r: i.seed_amp_r.map_or(seed, Into::into),
            n0_policy: match (i.n0_l, i.n0_r) {
                (None, None) => InitialReservoir::PumpOverGamma,
                (Some(n_l), Some(n_r)) => InitialReservoir::Explicit { n_l, n_r },
                (Some(_), None) => return Err(Error::MissingKey("n0_r".into())),
                (None, Some(_)) => return Err(Error::MissingKey("n0_l".into())),
            },
            divergence_bound: i.divergence_bound.unwrap_or(DEFAULT_DIVERGENCE_BOUND),
        };

        if let Some(n) = self.noise {
            cfg.noise = NoiseConfig {
                xi: n.xi.unwrap_or(0.0),
                noise_dt: n.noise_dt.unwrap_or(cfg.integration.dt),
                enabled: n.enabled.unwrap_or(true),
            };
        }

        let e = self.ensemble.unwrap_or_default();
        cfg.n_realizations = e.n_realizations.unwrap_or(DEFAULT_REALIZATIONS);
        if let Some(seed) = e.base_seed {
            cfg.base_seed = u64::try_from(seed).map_err(|_| Error::invalid("base_seed", "must be >= 0"))?;
        }

        let c = self.correlation.unwrap_or_default();
        let d = CorrelationSettings::default();
        cfg.correlation = CorrelationSettings {
            t0: c.t0.unwrap_or(d.t0),
            window: c.window.unwrap_or(d.window),
            max_lag: c.max_lag.unwrap_or(d.max_lag),
            fit_floor: c.fit_floor.unwrap_or(d.fit_floor),
            well: c.well.unwrap_or(d.well),
            estimator: c.estimator.unwrap_or(d.estimator),
        };

        let s = self.spectrum.unwrap_or_default();
        let d = SpectrumSettings::default();
        cfg.spectrum = SpectrumSettings {
            gamma_min: s.gamma_min.unwrap_or(d.gamma_min),
            gamma_max: s.gamma_max.unwrap_or(d.gamma_max),
            steps: s.steps.unwrap_or(d.steps),
            tolerance: s.tolerance.unwrap_or(d.tolerance),
        };

        let w = self.sweep.unwrap_or_default();
        let d = SweepSettings::default();
        cfg.sweep = SweepSettings {
            p_l: w.p_l.unwrap_or(d.p_l),
            p_r: w.p_r.unwrap_or(d.p_r),
        };
        Ok(cfg)
    }
}

impl From<&RunConfig> for Document {
    fn from(cfg: &RunConfig) -> Self {
        let p = &cfg.params;
        let i = &cfg.integration;
        let (n0_l, n0_r) = match i.n0_policy {
            InitialReservoir::PumpOverGamma => (None, None),
            InitialReservoir::Explicit { n_l, n_r } => (Some(n_l), Some(n_r)),
        };
        Document {
            experiment: cfg.experiment,
            out_dir: Some(cfg.out_dir.clone()),
            model: Some(ModelTable {
                kappa: Some(p.kappa),
                gamma_x: Some(p.gamma_x),
                r_scatter: Some(p.r_scatter),
                p_l: Some(p.p_l),
                p_r: Some(p.p_r),
                eps_l: Some(p.eps_l),
                eps_r: Some(p.eps_r),
                eta: Some(p.eta),
                j_coupling: Some(p.j_coupling.into()),
            }),
            integration: Some(IntegrationTable {
                dt: Some(i.dt),
                t_end: Some(i.t_end),
                record_stride: Some(i.record_stride),
                seed_amp_l: Some(i.seed_amp_l.into()),
                seed_amp_r: Some(i.seed_amp_r.into()),
                n0_l,
                n0_r,
                divergence_bound: Some(i.divergence_bound),
            }),
            noise: Some(NoiseTable {
                xi: Some(cfg.noise.xi),
                noise_dt: Some(cfg.noise.noise_dt),
                enabled: Some(cfg.noise.enabled),
            }),
            ensemble: Some(EnsembleTable {
                n_realizations: Some(cfg.n_realizations),
                base_seed: Some(cfg.base_seed.min(MAX_SEED) as i64),
            }),
            correlation: Some(CorrelationTable {
                t0: Some(cfg.correlation.t0),
                window: Some(cfg.correlation.window),
                max_lag: Some(cfg.correlation.max_lag),
                fit_floor: Some(cfg.correlation.fit_floor),
                well: Some(cfg.correlation.well),
                estimator: Some(cfg.correlation.estimator),
            }),
            spectrum: Some(SpectrumTable {
                gamma_min: Some(cfg.spectrum.gamma_min),
                gamma_max: Some(cfg.spectrum.gamma_max),
                steps: Some(cfg.spectrum.steps),
                tolerance: Some(cfg.spectrum.tolerance),
            }),
            sweep: Some(SweepTable {
                p_l: Some(cfg.sweep.p_l),
                p_r: Some(cfg.sweep.p_r),
            }),
        }
    }
}
