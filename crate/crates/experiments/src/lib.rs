//! Desk-scale stability experiments for `(1+ε)`-biLipschitz maps of the
//! Heisenberg group.
//!
//! Each harness runs a map family over a descending grid of ε values,
//! measures an error, compares it with a bound of the form `C·ε^a` and fits
//! the decay exponent. Reports are deterministic functions of the
//! configuration and seed.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod checks;
pub mod family;
pub mod fit;
pub mod harness;
pub mod report;

use heis_core::HeisError;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use checks::{appendix_inequality_check, check_cartozzo_b, check_sesto, SestoConfig};
pub use family::{normalized, MapFamily};
pub use fit::{fit_isometry, FitResult};
pub use harness::{run_theorem_a, run_theorem_b, run_theorem_c, run_theorem_d, run_theorem_e, HarnessConfig};
pub use report::{loglog_slope, Check, ExperimentReport, Row};

#[derive(Debug, Error)]
pub enum ExpError {
    #[error(transparent)]
    Core(#[from] HeisError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type ExpResult<T> = std::result::Result<T, ExpError>;

fn invalid<T>(msg: impl Into<String>) -> ExpResult<T> {
    Err(HeisError::InvalidArgument(msg.into()).into())
}

/// Strictly decreasing ε values in `(0, 1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EpsGrid(Vec<f64>);

impl EpsGrid {
    pub const DEFAULT: [f64; 7] = [1e-1, 3e-2, 1e-2, 3e-3, 1e-3, 3e-4, 1e-4];

    pub fn new(values: Vec<f64>) -> ExpResult<Self> {
        if values.is_empty() {
            return invalid("eps grid is empty");
        }
        if values.iter().any(|&e| !(e > 0.0 && e < 1.0)) {
            return invalid("eps values must lie in (0, 1)");
        }
        if values.windows(2).any(|w| w[1] >= w[0]) {
            return invalid("eps grid must be strictly decreasing");
        }
        Ok(EpsGrid(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    /// Comma-separated list, e.g. `1e-1,1e-2,1e-3`.
    pub fn parse(s: &str) -> ExpResult<Self> {
        let v = s
            .split(',')
            .map(|x| x.trim().parse::<f64>().map_err(|_| HeisError::InvalidArgument(format!("bad eps value '{x}'"))))
            .collect::<Result<Vec<_>, _>>()?;
        EpsGrid::new(v)
    }
}

impl Default for EpsGrid {
    fn default() -> Self {
        EpsGrid(Self::DEFAULT.to_vec())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_validation() {
        assert!(EpsGrid::new(vec![0.1, 0.01]).is_ok());
        assert!(EpsGrid::new(vec![0.01, 0.1]).is_err());
        assert!(EpsGrid::new(vec![0.1, 0.1]).is_err());
        assert!(EpsGrid::new(vec![1.0]).is_err());
        assert!(EpsGrid::new(vec![]).is_err());
        assert_eq!(EpsGrid::parse("1e-1, 1e-3").unwrap().values(), &[0.1, 0.001]);
        assert!(EpsGrid::parse("a").is_err());
        assert_eq!(EpsGrid::default().values().len(), 7);
    }
}
