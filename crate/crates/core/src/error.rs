use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid value for `{field}`: {reason}")]
    Validation { field: String, reason: String },

    #[error("config parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("degenerate drive: |-2Δ - iκ| = {denominator:e} is below the displacement threshold")]
    DegenerateDrive { denominator: f64 },

    #[error("term `{signature}` keeps rotation {rotation_mhz:.6} MHz in the drive frame")]
    Frame { signature: String, rotation_mhz: f64 },

    #[error("operator is not Hermitian (defect {defect:e})")]
    NotHermitian { defect: f64 },

    #[error("step size underflow at t = {t} us (h = {h:e})")]
    StepSizeUnderflow { t: f64, h: f64 },

    #[error("invalid solver tolerance: {0}")]
    Tolerance(String),

    #[error("phase unwrap failed at t = {t} us: jump of {jump:.3} rad")]
    PhaseUnwrap { t: f64, jump: f64 },

    #[error("overlap with |{label}> fell to {overlap:.3e} at t = {t} us")]
    LowOverlap { label: String, t: f64, overlap: f64 },

    #[error("calibration failed: {0}")]
    Calibration(String),

    #[error("unknown state label `{0}`")]
    Label(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn validation(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Validation {
            field: field.into(),
            reason: reason.into(),
        }
    }

    /// Short machine-readable tag used in CSV error cells.
    pub fn tag(&self) -> &'static str {
        match self {
            Error::Validation { .. } => "validation",
            Error::Parse { .. } => "parse",
            Error::Dimension(_) => "dimension",
            Error::DegenerateDrive { .. } => "degenerate_drive",
            Error::Frame { .. } => "frame",
            Error::NotHermitian { .. } => "not_hermitian",
            Error::StepSizeUnderflow { .. } => "step_size_underflow",
            Error::Tolerance(_) => "tolerance",
            Error::PhaseUnwrap { .. } => "phase_unwrap",
            Error::LowOverlap { .. } => "low_overlap",
            Error::Calibration(_) => "calibration",
            Error::Label(_) => "label",
            Error::Io(_) => "io",
            Error::Csv(_) => "csv",
        }
    }

    /// True for errors that come from bad input rather than numerics.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Validation { .. } | Error::Parse { .. } | Error::Label(_) | Error::Tolerance(_)
        )
    }
}
