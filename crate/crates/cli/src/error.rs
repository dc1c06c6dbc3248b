//! CLI error taxonomy and exit-code mapping.
//!
//! Exit codes: 0 success, 2 validation (bad flags, malformed config or
//! input files, missing files), 3 numeric/extraction failures. Every error
//! prints a single machine-parsable line: `error[CODE]: message`.

use evshock::blast::BlastError;
use evshock::calib::CalibError;
use evshock::event::EventError;
use evshock::fit::FitError;
use evshock::front::FrontError;
use evshock::geom::GeomError;
use evshock::synth::SynthError;

#[derive(Debug)]
pub enum CliError {
    /// Bad invocation, config or input file. Exit code 2.
    Validation { code: &'static str, msg: String },
    /// The computation itself failed. Exit code 3.
    Numeric { code: &'static str, msg: String },
}

impl CliError {
    pub fn validation(code: &'static str, msg: impl Into<String>) -> Self {
        CliError::Validation { code, msg: msg.into() }
    }

    pub fn numeric(code: &'static str, msg: impl Into<String>) -> Self {
        CliError::Numeric { code, msg: msg.into() }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation { .. } => 2,
            CliError::Numeric { .. } => 3,
        }
    }

    pub fn render(&self) -> String {
        match self {
            CliError::Validation { code, msg } | CliError::Numeric { code, msg } => {
                format!("error[{code}]: {msg}")
            }
        }
    }
}

impl From<EventError> for CliError {
    fn from(e: EventError) -> Self {
        CliError::validation("E_EVENTS", e.to_string())
    }
}

impl From<CalibError> for CliError {
    fn from(e: CalibError) -> Self {
        match e {
            CalibError::Parse { .. } | CalibError::Io(_) | CalibError::Validation(_) => {
                CliError::validation("E_CALIB", e.to_string())
            }
            _ => CliError::numeric("E_CALIB", e.to_string()),
        }
    }
}

impl From<FrontError> for CliError {
    fn from(e: FrontError) -> Self {
        match e {
            FrontError::Config(_) => CliError::validation("E_FRONT", e.to_string()),
            _ => CliError::numeric("E_FRONT", e.to_string()),
        }
    }
}

impl From<GeomError> for CliError {
    fn from(e: GeomError) -> Self {
        CliError::numeric("E_GEOM", e.to_string())
    }
}

impl From<FitError> for CliError {
    fn from(e: FitError) -> Self {
        CliError::numeric("E_FIT", e.to_string())
    }
}

impl From<BlastError> for CliError {
    fn from(e: BlastError) -> Self {
        match e {
            BlastError::Domain(_) => CliError::validation("E_BLAST", e.to_string()),
            _ => CliError::numeric("E_BLAST", e.to_string()),
        }
    }
}

impl From<SynthError> for CliError {
    fn from(e: SynthError) -> Self {
        match e {
            SynthError::Config(_) => CliError::validation("E_SCENE", e.to_string()),
            _ => CliError::numeric("E_SCENE", e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::validation("E_IO", e.to_string())
    }
}
