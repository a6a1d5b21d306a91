use polarlens_core::dipstat::DipError;
use polarlens_core::flows::FlowError;
use polarlens_core::ideology::IdeologyError;
use polarlens_core::simnet::SimnetError;
use thiserror::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Data(_) => EXIT_DATA,
            CliError::Numerical(_) => EXIT_NUMERIC,
        }
    }

    pub fn io(path: &std::path::Path, e: std::io::Error) -> Self {
        CliError::Data(format!("{}: {e}", path.display()))
    }

    pub fn ideology(year: i32, e: IdeologyError) -> Self {
        let msg = format!("year {year}: {e}");
        match e {
            IdeologyError::AnchorAbsent(_) => CliError::Data(msg),
            _ => CliError::Numerical(msg),
        }
    }

    pub fn simnet(year: i32, e: SimnetError) -> Self {
        let msg = format!("year {year}: {e}");
        match e {
            SimnetError::UnknownInfluencer(_) => CliError::Data(msg),
            _ => CliError::Numerical(msg),
        }
    }

    pub fn flows(year: i32, e: FlowError) -> Self {
        CliError::Data(format!("year {year}: {e}"))
    }

    pub fn dip(what: &str, e: DipError) -> Self {
        let msg = format!("{what}: {e}");
        match e {
            DipError::InvalidBootstrap(_) => CliError::Usage(msg),
            DipError::InsufficientSample(_) => CliError::Numerical(msg),
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
