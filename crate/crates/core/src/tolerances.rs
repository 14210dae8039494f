//! Central tolerance ladder.
//!
//! Quadrature-limited quantities (everything that goes through the singular
//! Biot-Savart double integral) follow the staggered-grid convergence of the
//! operator, roughly second order in the grid spacing; spectral quantities
//! (periods, weak residuals, frames) sit near machine precision.

/// Frame orthogonality and unit-normal checks.
pub const FRAME_TOL: f64 = 1e-12;

/// Canonical period conditions of the harmonic basis.
pub const PERIOD_TOL: f64 = 1e-8;

/// Weak divergence / curl residuals of harmonic fields on a 64^2 grid.
pub const WEAK_TOL: f64 = 1e-8;

/// Hodge reconstruction residual.
pub const HODGE_TOL: f64 = 1e-7;

/// Relative accuracy of the singular Biot-Savart quadrature on an n x n grid.
/// Empirically second order with the symmetrised staggered source grids.
pub fn quadrature_tol(n: usize) -> f64 {
    1e-2 * (64.0 / n as f64).powi(2)
}

/// Exactness threshold for identities that hold to rounding.
pub const ROUNDING_TOL: f64 = 1e-10;

/// Symmetry of the cross-helicity bilinear form.
pub const SYMMETRY_TOL: f64 = 1e-8;

/// Constraint tolerance for simple currents.
pub const SIMPLE_CONSTRAINT_TOL: f64 = 1e-12;

#[cfg(test)]
mod tests {
    #[test]
    fn ladder_halves_per_refinement() {
        assert!((super::quadrature_tol(64) - 1e-2).abs() < 1e-15);
        assert!((super::quadrature_tol(128) - 2.5e-3).abs() < 1e-15);
    }
}
