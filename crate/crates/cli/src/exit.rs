//! Exit-code contract.

use isospec_core::{Error, Verdict};

pub const OK: u8 = 0;
/// I/O, schema and usage errors.
pub const USAGE: u8 = 2;
pub const INADMISSIBLE: u8 = 3;
/// Certificate fail, including violated hypotheses.
pub const FAIL: u8 = 4;
pub const INCONCLUSIVE: u8 = 5;
pub const SOLVER: u8 = 6;

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        Self {
            code: USAGE,
            message: message.into(),
        }
    }

    /// Core error with a location prefix, e.g. the file it came from.
    pub fn at(context: impl std::fmt::Display, err: Error) -> Self {
        let mut e = Self::from(err);
        e.message = format!("{context}: {}", e.message);
        e
    }
}

pub fn code_of(err: &Error) -> u8 {
    match err.root() {
        Error::Io(_) | Error::Csv(_) | Error::Schema { .. } | Error::InvalidGrid(_) | Error::InvalidSpectrum(_) => USAGE,
        Error::Inadmissible { .. } | Error::Coverage { .. } => INADMISSIBLE,
        Error::Hypothesis(_) => FAIL,
        _ => SOLVER,
    }
}

impl From<Error> for CliError {
    fn from(err: Error) -> Self {
        Self {
            code: code_of(&err),
            message: err.to_string(),
        }
    }
}

pub fn verdict_code(v: Verdict) -> u8 {
    match v {
        Verdict::Pass => OK,
        Verdict::Fail => FAIL,
        Verdict::Inconclusive => INCONCLUSIVE,
    }
}
