//! Scenario runner: the scaling study, the factorization table, the secular demonstration,
//! their file outputs and the command-line front end.

#[cfg(feature = "cli")]
pub mod cli;
pub mod config;
mod output;
mod secular;
mod study;

use serde::Serialize;

pub use config::{ModelConfig, RecipeConfig, Setup, StudyConfig};
pub use output::{read_study_csv, study_csv, write_study_outputs, CSV_HEADER};
pub use secular::{linear_fit, secular_demo, LinearFit, SecularReport, SECULAR_TOL};
pub use study::{
    factorization_decay, scaling_study, FactorizationReport, FactorizationRow, LambdaSummary,
    StudyMetadata, StudyResult, StudyRow, ETA_STABILITY, FACTORIZATION_TAUS, I_RATIO_RANGE,
};

/// A named pass/fail outcome with a human-readable detail line.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: &str, passed: bool, detail: String) -> Self {
        Self { name: name.to_string(), passed, detail }
    }
}

/// Wall-clock timer; reads zero on targets without a clock.
pub(crate) struct Stopwatch {
    #[cfg(not(target_arch = "wasm32"))]
    start: std::time::Instant,
}

impl Stopwatch {
    pub fn start() -> Self {
        Self {
            #[cfg(not(target_arch = "wasm32"))]
            start: std::time::Instant::now(),
        }
    }

    pub fn elapsed_ms(&self) -> f64 {
        #[cfg(not(target_arch = "wasm32"))]
        {
            self.start.elapsed().as_secs_f64() * 1e3
        }
        #[cfg(target_arch = "wasm32")]
        {
            0.0
        }
    }
}

pub(crate) fn elapsed_ms(clock: &Stopwatch) -> f64 {
    clock.elapsed_ms()
}
