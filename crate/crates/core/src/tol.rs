//! Numerical tolerances shared across the crate.

use serde::{Deserialize, Serialize};

/// Tolerance set used by integration, rank decisions and frame construction.
///
/// All rank-style thresholds are relative to the natural scale of the data
/// they are applied to (largest singular value of the full phase-space
/// evaluation, Frobenius norm of the transfer matrix, ...).
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct Tolerances {
    /// Admissible symplectic defect of transfer matrices.
    pub sympl: f64,
    /// Integrator error per unit time, relative to the solution scale.
    pub step: f64,
    /// Relative singular value threshold for rank decisions.
    pub rank: f64,
    /// Admissible relative omega-Gram entry for isotropic frames.
    pub iso: f64,
    /// Localization radius for focal point refinement.
    pub loc: f64,
    /// Admissible parallelism residual of horizontal frames.
    pub frame: f64,
    /// Target accuracy of dense (interpolated) output.
    pub dense: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            sympl: 1e-9,
            step: 1e-10,
            rank: 1e-7,
            iso: 1e-8,
            loc: 1e-9,
            frame: 1e-6,
            dense: 1e-9,
        }
    }
}
