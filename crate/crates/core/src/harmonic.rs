//! The harmonic basis of a toroidal surface and the Hodge projection of
//! divergence-free tangent fields.
//!
//! Two closed fields (the surface gradients of the multivalued chart angles)
//! are corrected to harmonic by single-valued potentials, then combined so
//! that the canonical period conditions hold:
//! `int_{sigma_p} gamma_t = 0 = int_{sigma_t} gamma_p`,
//! `int_{sigma_p} gamma_p = 1 = int_{sigma_t} gamma_t`.
//! The normalised pair is `gamma = gamma_t / |gamma_t|`,
//! `gamma_tilde = gamma x N`.

use crate::calculus::{
    surface_curl, surface_divergence, surface_gradient, weak_curl_residual,
    weak_divergence_residual, LaplaceSolver,
};
use crate::curves::{line_integral, ChartCurve};
use crate::error::{Error, Result};
use crate::fields::{inner_product, norm, TangentField};
use crate::geometry::SurfaceGrid;
use std::f64::consts::{PI, TAU};

/// Locations and orientations of the canonical poloidal/toroidal curves.
///
/// `sigma_p` is the coordinate circle `phi = phi_p` and `sigma_t` the circle
/// `theta = theta_t` (optionally composed with `extra_poloidal_turns` copies
/// of `sigma_p`, which changes its surface homotopy class but not its class
/// in the solid torus). Orientations are relative to increasing angles.
#[derive(Debug, Clone, Copy)]
pub struct CanonicalCurves {
    pub phi_p: f64,
    pub theta_t: f64,
    /// +-1, direction of sigma_p relative to +theta.
    pub orient_p: f64,
    /// +-1, direction of sigma_t relative to +phi.
    pub orient_t: f64,
    /// P in `sigma_t (+) P sigma_p`.
    pub extra_poloidal_turns: i32,
    /// Samples per curve for period integrals.
    pub samples: usize,
}

impl CanonicalCurves {
    /// Default curves: `sigma_p` at `phi = 0`, `sigma_t` on the inner side
    /// `theta = pi`, oriented so that (sigma_p-dot, sigma_t-dot, N) is a
    /// right-handed frame at their crossing.
    pub fn standard(grid: &SurfaceGrid) -> Self {
        Self {
            phi_p: 0.0,
            theta_t: PI,
            orient_p: grid.handedness,
            orient_t: 1.0,
            extra_poloidal_turns: 0,
            samples: 1024,
        }
    }

    pub fn with_orientations(mut self, orient_p: f64, orient_t: f64) -> Self {
        self.orient_p = orient_p;
        self.orient_t = orient_t;
        self
    }

    pub fn with_extra_poloidal_turns(mut self, p: i32) -> Self {
        self.extra_poloidal_turns = p;
        self
    }

    /// The purely poloidal curve.
    pub fn sigma_p(&self) -> ChartCurve {
        ChartCurve::line(self.theta_t, self.phi_p, self.orient_p * TAU, 0.0, self.samples)
    }

    /// The toroidal curve (possibly composed with poloidal turns).
    pub fn sigma_t(&self) -> ChartCurve {
        ChartCurve::line(
            self.theta_t,
            self.phi_p,
            self.extra_poloidal_turns as f64 * self.orient_p * TAU,
            self.orient_t * TAU,
            self.samples,
        )
    }
}

/// Period integrals (over sigma_p, over sigma_t) of each basis field.
#[derive(Debug, Clone, Copy)]
pub struct BasisPeriods {
    pub gamma_p: (f64, f64),
    pub gamma_t: (f64, f64),
    pub gamma: (f64, f64),
    pub gamma_tilde: (f64, f64),
}

/// Residuals recorded while building the basis.
#[derive(Debug, Clone, Copy)]
pub struct BasisDiagnostics {
    pub max_weak_div: f64,
    pub max_weak_curl: f64,
    /// Periods of the two corrected closed fields before the 2x2 solve.
    pub period_matrix: [[f64; 2]; 2],
}

pub struct HarmonicBasis {
    pub gamma_p: TangentField,
    pub gamma_t: TangentField,
    /// L2-normalised gamma_t.
    pub gamma: TangentField,
    /// gamma x N.
    pub gamma_tilde: TangentField,
    pub norm_gamma_t: f64,
    pub curves: CanonicalCurves,
    pub periods: BasisPeriods,
    pub diagnostics: BasisDiagnostics,
}

/// The two curl-free coordinate fields `grad theta` and `grad phi` (gradients
/// of the multivalued chart angles, represented as vector fields).
pub fn closed_coordinate_fields(grid: &SurfaceGrid) -> (TangentField, TangentField) {
    let n = grid.len();
    let ones = vec![1.0; n];
    let zeros = vec![0.0; n];
    let c_theta = crate::calculus::raise_covariant(grid, &ones, &zeros);
    let c_phi = crate::calculus::raise_covariant(grid, &zeros, &ones);
    (c_theta, c_phi)
}

/// Build the harmonic basis for the given canonical curves.
pub fn harmonic_basis(grid: &SurfaceGrid, curves: &CanonicalCurves) -> Result<HarmonicBasis> {
    let solver = LaplaceSolver::new(grid);
    let (c_theta, c_phi) = closed_coordinate_fields(grid);

    let harmonise = |closed: &TangentField| -> Result<TangentField> {
        let div = surface_divergence(grid, closed);
        let rhs: Vec<f64> = div.iter().map(|d| -d).collect();
        let f = solver.solve(&rhs)?;
        let corr = surface_gradient(grid, &f);
        Ok(closed.linear_comb(1.0, &corr, 1.0))
    };
    let h1 = harmonise(&c_theta)?;
    let h2 = harmonise(&c_phi)?;

    let sp = curves.sigma_p();
    let st = curves.sigma_t();
    let pm = [
        [line_integral(grid, &h1, &sp)?, line_integral(grid, &h2, &sp)?],
        [line_integral(grid, &h1, &st)?, line_integral(grid, &h2, &st)?],
    ];
    let det = pm[0][0] * pm[1][1] - pm[0][1] * pm[1][0];
    if det.abs() < 1e-8 * TAU * TAU {
        return Err(Error::Topology(format!(
            "singular period matrix, det = {det:.3e}"
        )));
    }
    // gamma_p has periods (1, 0), gamma_t has periods (0, 1)
    let a = [pm[1][1] / det, -pm[1][0] / det];
    let b = [-pm[0][1] / det, pm[0][0] / det];
    let gamma_p = h1.linear_comb(a[0], &h2, a[1]);
    let gamma_t = h1.linear_comb(b[0], &h2, b[1]);

    let norm_gamma_t = norm(grid, &gamma_t);
    let gamma = gamma_t.scaled(1.0 / norm_gamma_t);
    let gamma_tilde = gamma.cross_normal(grid);

    let periods = BasisPeriods {
        gamma_p: (line_integral(grid, &gamma_p, &sp)?, line_integral(grid, &gamma_p, &st)?),
        gamma_t: (line_integral(grid, &gamma_t, &sp)?, line_integral(grid, &gamma_t, &st)?),
        gamma: (line_integral(grid, &gamma, &sp)?, line_integral(grid, &gamma, &st)?),
        gamma_tilde: (
            line_integral(grid, &gamma_tilde, &sp)?,
            line_integral(grid, &gamma_tilde, &st)?,
        ),
    };

    let diagnostics = BasisDiagnostics {
        max_weak_div: [&gamma_p, &gamma_t, &gamma, &gamma_tilde]
            .iter()
            .map(|f| weak_divergence_residual(grid, f))
            .fold(0.0, f64::max),
        max_weak_curl: [&gamma_p, &gamma_t, &gamma, &gamma_tilde]
            .iter()
            .map(|f| weak_curl_residual(grid, f))
            .fold(0.0, f64::max),
        period_matrix: pm,
    };

    Ok(HarmonicBasis {
        gamma_p,
        gamma_t,
        gamma,
        gamma_tilde,
        norm_gamma_t,
        curves: *curves,
        periods,
        diagnostics,
    })
}

/// Hodge decomposition of a weakly divergence-free field:
/// `v = grad f x N + alpha gamma + beta gamma_tilde`.
#[derive(Debug, Clone)]
pub struct HodgeDecomposition {
    pub potential: Vec<f64>,
    pub alpha: f64,
    pub beta: f64,
    /// Relative reconstruction error.
    pub residual: f64,
}

pub fn hodge_project(
    grid: &SurfaceGrid,
    basis: &HarmonicBasis,
    v: &TangentField,
) -> Result<HodgeDecomposition> {
    let div_res = weak_divergence_residual(grid, v);
    if div_res > 1e-6 {
        return Err(Error::Decomposition(format!(
            "input is not weakly divergence-free (residual {div_res:.3e})"
        )));
    }
    let alpha = inner_product(grid, &basis.gamma, v);
    let beta = inner_product(grid, &basis.gamma_tilde, v);
    let remainder = v
        .linear_comb(1.0, &basis.gamma, -alpha)
        .linear_comb(1.0, &basis.gamma_tilde, -beta);
    // curl(grad f x N) = -lap f, so lap f = -curl(remainder)
    let curl = surface_curl(grid, &remainder);
    let rhs: Vec<f64> = curl.iter().map(|c| -c).collect();
    let solver = LaplaceSolver::new(grid);
    let f = solver.solve(&rhs)?;
    let rebuilt = surface_gradient(grid, &f)
        .cross_normal(grid)
        .linear_comb(1.0, &basis.gamma, alpha)
        .linear_comb(1.0, &basis.gamma_tilde, beta);
    let err = norm(grid, &v.linear_comb(1.0, &rebuilt, -1.0));
    let vnorm = norm(grid, v);
    let residual = if vnorm > 0.0 { err / vnorm } else { err };
    if vnorm > 0.0 && residual > 1e-7 {
        return Err(Error::Decomposition(format!(
            "Hodge reconstruction residual {residual:.3e} exceeds 1e-7"
        )));
    }
    Ok(HodgeDecomposition { potential: f, alpha, beta, residual })
}
