use batchkit::align::AlignError;
use batchkit::fpca::FpcaError;
use batchkit::screen::ScreenError;
use batchkit::spc::SpcError;
use batchkit::Error;
use thiserror::Error as ThisError;

/// Failure of a command, classified by exit code.
#[derive(Debug, ThisError)]
pub enum CliError {
    /// Bad input files or arguments (exit 2).
    #[error("{0}")]
    Input(String),
    /// Valid input on which the requested analysis cannot be carried out (exit 3).
    #[error("{0}")]
    Infeasible(String),
    /// Anything else, e.g. failing to write outputs (exit 4).
    #[error("{0}")]
    Internal(String),
}

impl CliError {
    pub fn code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Infeasible(_) => 3,
            CliError::Internal(_) => 4,
        }
    }

    pub fn io(context: &str, e: impl std::fmt::Display) -> Self {
        CliError::Internal(format!("{context}: {e}"))
    }
}

fn fpca_is_input(e: &FpcaError) -> bool {
    !matches!(e, FpcaError::TooFewPointsForBasis { .. } | FpcaError::TooFewBatches(_))
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let input = match &e {
            Error::Ingest(_) | Error::Feature(_) => true,
            Error::Align(a) => matches!(
                a,
                AlignError::Ingest(_)
                    | AlignError::InvalidConfig(_)
                    | AlignError::UnknownBatch(_)
                    | AlignError::MissingTag { .. }
                    | AlignError::ZeroVarianceTag(_)
                    | AlignError::EmptyTagSet
                    | AlignError::InconsistentPhaseSequence(_)
                    | AlignError::PhaseMissing { .. }
            ),
            Error::Screen(s) => !matches!(s, ScreenError::TooFewRows(_)),
            Error::Fpca(f) => fpca_is_input(f),
            Error::Spc(s) => match s {
                SpcError::InvalidConfig(_) | SpcError::MissingFeature(_) | SpcError::NonFiniteValue(_) => true,
                SpcError::Fpca(f) => fpca_is_input(f),
                _ => false,
            },
        };
        if input {
            CliError::Input(e.to_string())
        } else {
            CliError::Infeasible(e.to_string())
        }
    }
}

macro_rules! from_lib {
    ($($t:ty),*) => {
        $(impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                Error::from(e).into()
            }
        })*
    };
}

from_lib!(
    batchkit::ingest::IngestError,
    AlignError,
    batchkit::landmarks::FeatureError,
    ScreenError,
    FpcaError,
    SpcError
);
