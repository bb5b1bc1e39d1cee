//! Physical and experiment configuration.
//!
//! Everything that faces a user (config files, CLI flags, CSV columns) is an
//! ordinary frequency in MHz. Internally all frequencies and rates are angular,
//! in rad/us, and times are in us. The conversion happens once, in
//! [`validate_params`] and [`Tone::from_config`].

use std::f64::consts::TAU;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Converts an ordinary frequency in MHz to rad/us.
pub fn mhz_to_angular(f_mhz: f64) -> f64 {
    f_mhz * TAU
}

/// Converts rad/us back to MHz.
pub fn angular_to_mhz(w: f64) -> f64 {
    w / TAU
}

/// Drive target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Qubit,
    Cavity,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mode::Qubit => write!(f, "qubit"),
            Mode::Cavity => write!(f, "cavity"),
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "qubit" | "q" => Ok(Mode::Qubit),
            "cavity" | "c" => Ok(Mode::Cavity),
            other => Err(Error::validation("target", format!("unknown mode `{other}`"))),
        }
    }
}

/// Normal-mode system constants as they appear in a config file (MHz).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemParams {
    #[serde(rename = "omega_q_MHz")]
    pub omega_q: f64,
    #[serde(rename = "omega_c_MHz")]
    pub omega_c: f64,
    #[serde(rename = "alpha_MHz")]
    pub alpha: f64,
    #[serde(rename = "kerr_c_MHz")]
    pub kerr_c: f64,
    #[serde(rename = "chi_MHz")]
    pub chi: f64,
    #[serde(rename = "kappa_q_MHz", default)]
    pub kappa_q: f64,
    #[serde(rename = "kappa_c_MHz", default)]
    pub kappa_c: f64,
    #[serde(rename = "kappa_d_MHz", default)]
    pub kappa_d: f64,
}

impl SystemParams {
    /// Device constants of the reference transmon-cavity sample. No decay
    /// rates are published for it, so all kappas are zero.
    pub fn reference_device() -> Self {
        SystemParams {
            omega_q: 5311.0,
            omega_c: 3579.0,
            alpha: 229.9,
            kerr_c: 0.0022,
            chi: 1.923,
            kappa_q: 0.0,
            kappa_c: 0.0,
            kappa_d: 0.0,
        }
    }
}

/// Validated system constants in angular units (rad/us).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Params {
    pub omega_q: f64,
    pub omega_c: f64,
    pub alpha: f64,
    pub kerr_c: f64,
    pub chi: f64,
    pub kappa_q: f64,
    pub kappa_c: f64,
    pub kappa_d: f64,
}

impl Params {
    pub fn mode_frequency(&self, mode: Mode) -> f64 {
        match mode {
            Mode::Qubit => self.omega_q,
            Mode::Cavity => self.omega_c,
        }
    }

    pub fn kappa(&self, mode: Mode) -> f64 {
        match mode {
            Mode::Qubit => self.kappa_q,
            Mode::Cavity => self.kappa_c,
        }
    }

    /// Back to config units.
    pub fn to_mhz(&self) -> SystemParams {
        SystemParams {
            omega_q: angular_to_mhz(self.omega_q),
            omega_c: angular_to_mhz(self.omega_c),
            alpha: angular_to_mhz(self.alpha),
            kerr_c: angular_to_mhz(self.kerr_c),
            chi: angular_to_mhz(self.chi),
            kappa_q: angular_to_mhz(self.kappa_q),
            kappa_c: angular_to_mhz(self.kappa_c),
            kappa_d: angular_to_mhz(self.kappa_d),
        }
    }

    /// Soft warnings that do not reject the parameter set.
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.chi >= self.alpha {
            out.push(format!(
                "chi ({:.4} MHz) is not below alpha ({:.4} MHz); outside the dispersive regime",
                angular_to_mhz(self.chi),
                angular_to_mhz(self.alpha)
            ));
        }
        out
    }
}

fn require(cond: bool, field: &str, reason: &str) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::validation(field, reason))
    }
}

/// Checks every constraint on `raw` and converts to angular units.
pub fn validate_params(raw: &SystemParams) -> Result<Params> {
    let finite = [
        ("omega_q", raw.omega_q),
        ("omega_c", raw.omega_c),
        ("alpha", raw.alpha),
        ("kerr_c", raw.kerr_c),
        ("chi", raw.chi),
        ("kappa_q", raw.kappa_q),
        ("kappa_c", raw.kappa_c),
        ("kappa_d", raw.kappa_d),
    ];
    for (name, v) in finite {
        require(v.is_finite(), name, "must be finite")?;
    }
    require(raw.omega_q > 0.0, "omega_q", "must be > 0")?;
    require(raw.omega_c > 0.0, "omega_c", "must be > 0")?;
    require(raw.alpha > 0.0, "alpha", "must be > 0")?;
    require(raw.kerr_c >= 0.0, "kerr_c", "must be >= 0")?;
    require(raw.chi >= 0.0, "chi", "must be >= 0")?;
    require(raw.kappa_q >= 0.0, "kappa_q", "must be >= 0")?;
    require(raw.kappa_c >= 0.0, "kappa_c", "must be >= 0")?;
    require(raw.kappa_d >= 0.0, "kappa_d", "must be >= 0")?;

    let p = Params {
        omega_q: mhz_to_angular(raw.omega_q),
        omega_c: mhz_to_angular(raw.omega_c),
        alpha: mhz_to_angular(raw.alpha),
        kerr_c: mhz_to_angular(raw.kerr_c),
        chi: mhz_to_angular(raw.chi),
        kappa_q: mhz_to_angular(raw.kappa_q),
        kappa_c: mhz_to_angular(raw.kappa_c),
        kappa_d: mhz_to_angular(raw.kappa_d),
    };
    for w in p.warnings() {
        log::warn!("{w}");
    }
    Ok(p)
}

/// One cosine drive as written in a config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriveTone {
    pub target: Mode,
    #[serde(rename = "epsilon_MHz")]
    pub epsilon: f64,
    /// Offset of the drive from the target mode frequency.
    #[serde(rename = "detuning_MHz")]
    pub detuning: f64,
    #[serde(rename = "phase_rad", default)]
    pub phase: f64,
}

impl DriveTone {
    pub fn new(target: Mode, epsilon_mhz: f64, detuning_mhz: f64) -> Self {
        DriveTone {
            target,
            epsilon: epsilon_mhz,
            detuning: detuning_mhz,
            phase: 0.0,
        }
    }

    pub fn with_phase(mut self, phase: f64) -> Self {
        self.phase = phase;
        self
    }
}

/// A validated drive in angular units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tone {
    pub target: Mode,
    pub epsilon: f64,
    pub detuning: f64,
    pub phase: f64,
}

impl Tone {
    pub fn from_config(raw: &DriveTone, params: &Params) -> Result<Tone> {
        require(raw.epsilon.is_finite(), "epsilon", "must be finite")?;
        require(raw.detuning.is_finite(), "detuning", "must be finite")?;
        require(raw.phase.is_finite(), "phase", "must be finite")?;
        require(raw.epsilon >= 0.0, "epsilon", "must be >= 0")?;
        let detuning = mhz_to_angular(raw.detuning);
        require(
            detuning.abs() < params.omega_q.min(params.omega_c),
            "detuning",
            "|detuning| must stay below both mode frequencies",
        )?;
        Ok(Tone {
            target: raw.target,
            epsilon: mhz_to_angular(raw.epsilon),
            detuning,
            phase: raw.phase,
        })
    }

    /// Absolute drive frequency (rad/us).
    pub fn drive_frequency(&self, params: &Params) -> f64 {
        params.mode_frequency(self.target) + self.detuning
    }

    pub fn to_config(&self) -> DriveTone {
        DriveTone {
            target: self.target,
            epsilon: angular_to_mhz(self.epsilon),
            detuning: angular_to_mhz(self.detuning),
            phase: self.phase,
        }
    }
}

pub fn validate_tones(raw: &[DriveTone], params: &Params) -> Result<Vec<Tone>> {
    raw.iter()
        .enumerate()
        .map(|(i, t)| {
            Tone::from_config(t, params).map_err(|e| match e {
                Error::Validation { field, reason } => {
                    Error::validation(format!("drives[{i}].{field}"), reason)
                }
                other => other,
            })
        })
        .collect()
}

fn default_n_q() -> usize {
    4
}

fn default_n_c() -> usize {
    12
}

/// Fock truncation of both modes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HilbertSpec {
    #[serde(default = "default_n_q")]
    pub n_q: usize,
    #[serde(default = "default_n_c")]
    pub n_c: usize,
}

impl Default for HilbertSpec {
    fn default() -> Self {
        HilbertSpec { n_q: 4, n_c: 12 }
    }
}

impl HilbertSpec {
    pub fn new(n_q: usize, n_c: usize) -> Self {
        HilbertSpec { n_q, n_c }
    }

    pub fn dim(&self) -> usize {
        self.n_q * self.n_c
    }

    pub fn validate(&self) -> Result<()> {
        require(self.n_q >= 3, "hilbert.n_q", "needs at least 3 levels")?;
        require(self.n_c >= 2, "hilbert.n_c", "needs at least 2 levels")
    }
}

fn default_rtol() -> f64 {
    1e-10
}

fn default_atol() -> f64 {
    1e-12
}

fn default_max_step_ns() -> f64 {
    5.0
}

/// Adaptive integrator settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    #[serde(default = "default_rtol")]
    pub rtol: f64,
    #[serde(default = "default_atol")]
    pub atol: f64,
    #[serde(default = "default_max_step_ns")]
    pub max_step_ns: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            rtol: default_rtol(),
            atol: default_atol(),
            max_step_ns: default_max_step_ns(),
        }
    }
}

impl SolverConfig {
    pub fn max_step_us(&self) -> f64 {
        self.max_step_ns * 1e-3
    }

    pub fn validate(&self) -> Result<()> {
        require(
            (1e-12..=1e-6).contains(&self.rtol),
            "solver.rtol",
            "must lie in [1e-12, 1e-6]",
        )?;
        require(
            self.atol > 0.0 && self.atol.is_finite(),
            "solver.atol",
            "must be > 0",
        )?;
        require(
            self.max_step_ns > 0.0 && self.max_step_ns.is_finite(),
            "solver.max_step_ns",
            "must be > 0",
        )
    }
}

/// One named sweep axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisSpec {
    pub name: String,
    pub values: Vec<f64>,
}

/// Per-run experiment settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentBlock {
    #[serde(default)]
    pub axes: Vec<AxisSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gate_time_us: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_state: Option<String>,
}

impl ExperimentBlock {
    pub fn axis(&self, name: &str) -> Option<&[f64]> {
        self.axes
            .iter()
            .find(|a| a.name == name)
            .map(|a| a.values.as_slice())
    }

    pub fn validate(&self) -> Result<()> {
        require(!self.axes.is_empty(), "experiment.axes", "must not be empty")?;
        for axis in &self.axes {
            let field = format!("experiment.axes.{}", axis.name);
            require(!axis.values.is_empty(), &field, "must not be empty")?;
            require(
                axis.values.iter().all(|v| v.is_finite()),
                &field,
                "values must be finite",
            )?;
            require(
                is_strictly_monotone(&axis.values),
                &field,
                "values must be strictly monotone",
            )?;
        }
        if let Some(t) = self.gate_time_us {
            require(
                t > 0.0 && t.is_finite(),
                "experiment.gate_time_us",
                "must be > 0",
            )?;
        }
        if let Some(label) = &self.initial_state {
            crate::fockspace::BasisLabel::parse(label)
                .map_err(|_| Error::validation("experiment.initial_state", "unknown label"))?;
        }
        Ok(())
    }
}

pub fn is_strictly_monotone(values: &[f64]) -> bool {
    let up = values.windows(2).all(|w| w[1] > w[0]);
    let down = values.windows(2).all(|w| w[1] < w[0]);
    up || down
}

/// Top-level config document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub system: SystemParams,
    #[serde(default)]
    pub drives: Vec<DriveTone>,
    #[serde(default)]
    pub hilbert: HilbertSpec,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub experiment: Option<ExperimentBlock>,
}

impl ExperimentConfig {
    pub fn new(system: SystemParams) -> Self {
        ExperimentConfig {
            system,
            drives: Vec::new(),
            hilbert: HilbertSpec::default(),
            solver: SolverConfig::default(),
            experiment: None,
        }
    }

    pub fn params(&self) -> Result<Params> {
        validate_params(&self.system)
    }

    pub fn tones(&self) -> Result<Vec<Tone>> {
        validate_tones(&self.drives, &self.params()?)
    }

    pub fn validate(&self) -> Result<()> {
        let params = self.params()?;
        validate_tones(&self.drives, &params)?;
        self.hilbert.validate()?;
        self.solver.validate()?;
        if let Some(exp) = &self.experiment {
            exp.validate()?;
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

/// Parses and validates a JSON config document.
pub fn load_config(text: &str) -> Result<ExperimentConfig> {
    let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| Error::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    cfg.validate()?;
    Ok(cfg)
}
