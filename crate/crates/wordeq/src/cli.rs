//! Equation files and subcommand implementations (under construction).

use crate::Result;

/// Parsed equation file.
pub struct EquationFile;

impl std::str::FromStr for EquationFile {
    type Err = crate::Error;
    fn from_str(_s: &str) -> Result<Self> {
        todo!()
    }
}

/// Options controlling a solve run.
#[derive(Default)]
pub struct SolveOptions;

/// Result of a solve run.
pub struct SolveOutcome;

impl SolveOutcome {
    pub fn sat(&self) -> bool {
        todo!()
    }
}

/// Compile and classify an equation file.
pub fn solve(_file: &EquationFile, _opts: &SolveOptions) -> Result<SolveOutcome> {
    todo!()
}
