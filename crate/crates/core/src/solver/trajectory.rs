//! Per-iteration records and their CSV form.

use std::fmt;
use std::io::{self, Write};

use serde::Serialize;

pub const CSV_HEADER: &str = "k,g_norm,step_type,i,j,r_gap,r_primal,r_dual,objective,elapsed_s";

/// What the solver did at an iterate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum StepType {
    /// Accelerated step: the safeguard passed and the AA candidate was used.
    Aa,
    /// Plain PDHG step.
    Pdhg,
    /// No step was taken (the run stopped at this iterate).
    Stop,
}

impl fmt::Display for StepType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StepType::Aa => "AA",
            StepType::Pdhg => "PDHG",
            StepType::Stop => "STOP",
        })
    }
}

/// One row of the trajectory.
///
/// Row `k` describes the iterate `u^k`: its residual norm and KKT metrics,
/// the step taken from it, and the counters `i` (AA steps) and `j` (PDHG
/// steps) as they stood when the safeguard was checked, so `i + j = k`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectoryRecord {
    pub k: usize,
    pub g_norm: f64,
    pub step_type: StepType,
    pub i: usize,
    pub j: usize,
    pub r_gap: f64,
    pub r_primal: f64,
    pub r_dual: f64,
    pub objective: f64,
    pub elapsed_s: f64,
}

impl TrajectoryRecord {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            self.k,
            self.g_norm,
            self.step_type,
            self.i,
            self.j,
            self.r_gap,
            self.r_primal,
            self.r_dual,
            self.objective,
            self.elapsed_s
        )
    }
}

pub fn write_csv<W: Write>(records: &[TrajectoryRecord], mut w: W) -> io::Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for r in records {
        writeln!(w, "{}", r.csv_row())?;
    }
    w.flush()
}
