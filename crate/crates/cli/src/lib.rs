//! Experiment runner binding the pssMp toolkit: config parsing, seed and
//! budget management, result persistence, plot-data emission and the
//! verification suite.

pub mod config;
pub mod runner;
pub mod verify;

/// Process exit codes: 0 pass, 1 gate failure, 2 configuration error,
/// 3 budget exhausted.
pub fn exit_code_for(err: &pssmp_core::Error) -> i32 {
    use pssmp_core::Error::*;
    match err {
        ConfigError(_) | UnsupportedSpec(_) | UnknownFunctional(_) | InconsistentInputs(_) => 2,
        BudgetExceeded(_) | HorizonTooShort(_) | InvalidGrid(_) => 3,
        _ => 1,
    }
}
