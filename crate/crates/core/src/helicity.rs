//! Helicity functionals, the harmonic-sector matrix and its eigenfields.

use crate::biot_savart::bs_surface;
use crate::error::{Error, Result};
use crate::fields::{inner_product, norm, TangentField};
use crate::geometry::{build_grid, SurfaceGrid};
use crate::harmonic::{harmonic_basis, CanonicalCurves, HarmonicBasis};
use serde::Serialize;

/// Cross-helicity `H_c(v, w) = <v, BS_Sigma(w)>`.
pub fn cross_helicity(grid: &SurfaceGrid, v: &TangentField, w: &TangentField) -> f64 {
    inner_product(grid, v, &bs_surface(grid, w))
}

/// Surface helicity `H(v) = H_c(v, v)`.
pub fn helicity(grid: &SurfaceGrid, v: &TangentField) -> f64 {
    cross_helicity(grid, v, v)
}

/// The restriction of the projected Biot-Savart operator to the harmonic
/// sector, in the orthonormal basis {gamma, gamma_tilde}.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct HelicityMatrix {
    /// [[H(gamma), H_c(gamma, gamma_tilde)], [H_c(gamma_tilde, gamma), H(gamma_tilde)]]
    pub entries: [[f64; 2]; 2],
}

impl HelicityMatrix {
    pub fn det(&self) -> f64 {
        self.entries[0][0] * self.entries[1][1] - self.entries[0][1] * self.entries[1][0]
    }

    pub fn trace(&self) -> f64 {
        self.entries[0][0] + self.entries[1][1]
    }

    pub fn asymmetry(&self) -> f64 {
        (self.entries[0][1] - self.entries[1][0]).abs()
    }

    /// Quadratic form `H(a gamma + b gamma_tilde)` in the harmonic sector.
    pub fn quadratic(&self, a: f64, b: f64) -> f64 {
        a * a * self.entries[0][0]
            + a * b * (self.entries[0][1] + self.entries[1][0])
            + b * b * self.entries[1][1]
    }
}

/// Assemble the 2x2 matrix by two operator applies and four quadratures.
pub fn helicity_matrix(grid: &SurfaceGrid, basis: &HarmonicBasis) -> HelicityMatrix {
    let bs_g = bs_surface(grid, &basis.gamma);
    let bs_gt = bs_surface(grid, &basis.gamma_tilde);
    HelicityMatrix {
        entries: [
            [
                inner_product(grid, &basis.gamma, &bs_g),
                inner_product(grid, &basis.gamma, &bs_gt),
            ],
            [
                inner_product(grid, &basis.gamma_tilde, &bs_g),
                inner_product(grid, &basis.gamma_tilde, &bs_gt),
            ],
        ],
    }
}

/// Matrix at resolution n and 2n plus the Richardson extrapolation assuming
/// second-order quadrature error.
pub fn helicity_matrix_refined(
    surface: &crate::geometry::FourierTorus,
    n: usize,
) -> Result<(HelicityMatrix, HelicityMatrix, HelicityMatrix)> {
    let coarse_grid = build_grid(surface, n, n)?;
    let fine_grid = build_grid(surface, 2 * n, 2 * n)?;
    let mc = helicity_matrix(&coarse_grid, &harmonic_basis(&coarse_grid, &CanonicalCurves::standard(&coarse_grid))?);
    let mf = helicity_matrix(&fine_grid, &harmonic_basis(&fine_grid, &CanonicalCurves::standard(&fine_grid))?);
    let mut ex = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            ex[i][j] = (4.0 * mf.entries[i][j] - mc.entries[i][j]) / 3.0;
        }
    }
    Ok((mc, mf, HelicityMatrix { entries: ex }))
}

/// `H(gamma)` from two line integrals: valid when the toroidal curve spans a
/// surface on the outside of the solid torus (the plain coordinate circle).
pub fn helicity_gamma_line(basis: &HarmonicBasis) -> Result<f64> {
    if basis.curves.extra_poloidal_turns != 0 {
        return Err(Error::Config(
            "line-integral helicity route needs the purely toroidal curve".into(),
        ));
    }
    let it_gamma = basis.periods.gamma.1;
    if it_gamma.abs() < 1e-10 {
        return Err(Error::DegeneratePeriod(format!(
            "toroidal period of gamma is {it_gamma:.3e}; gamma would be a gradient field"
        )));
    }
    // gamma is L2-normalised, so |gamma|^2 = 1
    Ok(-basis.periods.gamma_tilde.1 / it_gamma)
}

/// Extremal helicity-to-energy ratios and the fields realising them.
pub struct EigenResult {
    /// Positive eigenvalue of the restricted operator (= Lambda_plus).
    pub lambda_plus: f64,
    /// Negative eigenvalue (= -Lambda_minus).
    pub lambda_minus: f64,
    /// max(Lambda_plus, Lambda_minus).
    pub big_lambda: f64,
    pub v_plus: TangentField,
    pub v_minus: TangentField,
}

/// Closed-form eigenfields of the harmonic 2x2 sector:
/// `Lambda_+- = (sqrt(H(gamma)^2 + 1) +- H(gamma)) / 2`, with eigenfields
/// spanned by `(sqrt(H^2+1)+H) gamma + gamma_tilde` and
/// `gamma - (sqrt(H^2+1)+H) gamma_tilde`.
pub fn eigenfields(grid: &SurfaceGrid, basis: &HarmonicBasis, h_gamma: f64) -> EigenResult {
    let s = (h_gamma * h_gamma + 1.0).sqrt();
    let lambda_plus = 0.5 * (s + h_gamma);
    let lambda_minus_mag = 0.5 * (s - h_gamma);
    let mu = s + h_gamma;
    let v_plus_raw = basis.gamma.linear_comb(mu, &basis.gamma_tilde, 1.0);
    let v_minus_raw = basis.gamma.linear_comb(1.0, &basis.gamma_tilde, -mu);
    let v_plus = v_plus_raw.scaled(1.0 / norm(grid, &v_plus_raw));
    let v_minus = v_minus_raw.scaled(1.0 / norm(grid, &v_minus_raw));
    EigenResult {
        lambda_plus,
        lambda_minus: -lambda_minus_mag,
        big_lambda: lambda_plus.max(lambda_minus_mag),
        v_plus,
        v_minus,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::FourierTorus;

    #[test]
    fn eigen_closed_forms() {
        let g = build_grid(&FourierTorus::standard(), 24, 24).unwrap();
        let basis = harmonic_basis(&g, &CanonicalCurves::standard(&g)).unwrap();
        // H(gamma) = 0 -> Lambda_+- = 1/2, fields prop. to gamma +- gamma_tilde
        let e = eigenfields(&g, &basis, 0.0);
        assert!((e.lambda_plus - 0.5).abs() < 1e-14);
        assert!((e.lambda_minus + 0.5).abs() < 1e-14);
        assert!((e.big_lambda - 0.5).abs() < 1e-14);
        let ref_plus = basis.gamma.linear_comb(1.0, &basis.gamma_tilde, 1.0);
        let ref_plus = ref_plus.scaled(1.0 / norm(&g, &ref_plus));
        let diff = norm(&g, &e.v_plus.linear_comb(1.0, &ref_plus, -1.0));
        assert!(diff < 1e-12);

        // H(gamma) = 3/4 -> Lambda_+ = 1, Lambda_- = 1/4
        let e = eigenfields(&g, &basis, 0.75);
        assert!((e.lambda_plus - 1.0).abs() < 1e-14);
        assert!((e.lambda_minus + 0.25).abs() < 1e-14);
        // product identity Lambda_+ Lambda_- = 1/4
        assert!((e.lambda_plus * (-e.lambda_minus) - 0.25).abs() < 1e-14);
    }

    #[test]
    fn rayleigh_quotient_maximised_in_harmonic_sector() {
        let g = build_grid(&FourierTorus::standard(), 32, 32).unwrap();
        let basis = harmonic_basis(&g, &CanonicalCurves::standard(&g)).unwrap();
        let m = helicity_matrix(&g, &basis);
        let h_gamma = m.entries[0][0];
        let e = eigenfields(&g, &basis, h_gamma);
        // the matrix quadratic form at v_plus beats 100 random harmonic fields
        let quad_plus = {
            let a = inner_product(&g, &basis.gamma, &e.v_plus);
            let b = inner_product(&g, &basis.gamma_tilde, &e.v_plus);
            m.quadratic(a, b)
        };
        let mut rng = 0x9e3779b97f4a7c15_u64;
        for _ in 0..100 {
            rng = rng.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let t = (rng >> 11) as f64 / (1u64 << 53) as f64 * std::f64::consts::TAU;
            let q = m.quadratic(t.cos(), t.sin());
            assert!(quad_plus >= q - 1e-9);
        }
    }
}
