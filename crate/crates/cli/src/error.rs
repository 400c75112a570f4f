use emonmt_core::decode::DecodeError;
use emonmt_core::harness::HarnessError;
use emonmt_core::model::ModelError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Clap(clap::Error),
    #[error("usage: {0}")]
    Usage(String),
    #[error("data: {0}")]
    Data(String),
    #[error("training failed: {0}")]
    Training(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            // Help and version requests are not errors.
            CliError::Clap(e) if !e.use_stderr() => 0,
            CliError::Clap(_) | CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Training(_) => 3,
        }
    }
}

impl From<HarnessError> for CliError {
    fn from(e: HarnessError) -> Self {
        let msg = e.to_string();
        match e {
            _ if e.is_training_failure() => CliError::Training(msg),
            HarnessError::Model(ModelError::InvalidConfig(_))
            | HarnessError::Decode(DecodeError::InvalidConfig(_))
            | HarnessError::NoVariants
            | HarnessError::UnknownVariant(_) => CliError::Usage(msg),
            _ => CliError::Data(msg),
        }
    }
}

/// Everything without a more specific category is a data problem.
macro_rules! data_errors {
    ($($t:ty),*) => {
        $(impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                HarnessError::from(e).into()
            }
        })*
    };
}

data_errors!(
    emonmt_core::corpus::CorpusError,
    emonmt_core::emotion::EmotionError,
    emonmt_core::tokenizer::TokenizerError,
    emonmt_core::tokenizer::LoadError,
    emonmt_core::metrics::BleuError,
    ModelError,
    DecodeError
);
