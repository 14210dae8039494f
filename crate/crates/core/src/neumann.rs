//! The axisymmetric harmonic Neumann field of a solid torus and the volume /
//! flux quadratures attached to it.
//!
//! With the symmetry axis on z, the field is `Gamma(x) = Y/|Y|^2` with
//! `Y = (-y, x, 0)`: curl-free and divergence-free away from the axis and
//! tangent to every axisymmetric torus.

use crate::curves::ChartCurve;
use crate::geometry::{FourierTorus, SurfaceGrid};
use crate::math::{compensated_sum, cross3, dot3, gauss_legendre, sub3, Vec3};
use crate::fields::TangentField;
use std::f64::consts::TAU;

/// Evaluate `Gamma = Y/|Y|^2`.
#[inline]
pub fn gamma_field(x: Vec3) -> Vec3 {
    let rho2 = x[0] * x[0] + x[1] * x[1];
    [-x[1] / rho2, x[0] / rho2, 0.0]
}

/// Gamma restricted to a grid as a tangent field (exact for axisymmetric
/// surfaces; on shaped tori this is only the tangential part).
pub fn gamma_surface_field(grid: &SurfaceGrid) -> TangentField {
    TangentField::from_ambient(grid, gamma_field)
}

/// Interior chart of the solid torus: sections are shrunk toward their
/// centroid curve. Returns position and the three partials (ds, dalpha, dphi).
fn solid_torus_chart(
    surface: &FourierTorus,
    s: f64,
    alpha: f64,
    phi: f64,
) -> (Vec3, Vec3, Vec3, Vec3) {
    // boundary point and derivatives
    let (b, b_a, b_p) = surface.position_and_tangents(alpha, phi);
    // centroid of the phi-section: only m = 0 modes survive the alpha-average
    let nfp = surface.nfp as f64;
    let (mut rbar, mut zbar, mut rbar_p, mut zbar_p) = (0.0, 0.0, 0.0, 0.0);
    for md in &surface.modes {
        if md.m != 0 {
            continue;
        }
        let n = md.n as f64 * nfp;
        let (sn, cn) = (n * phi).sin_cos();
        rbar += md.r * cn;
        zbar += -md.z * sn;
        rbar_p += -md.r * n * sn;
        zbar_p += -md.z * n * cn;
    }
    let (sp, cp) = phi.sin_cos();
    let c = [rbar * cp, rbar * sp, zbar];
    let c_p = [rbar_p * cp - rbar * sp, rbar_p * sp + rbar * cp, zbar_p];

    let d = sub3(b, c);
    let x = [c[0] + s * d[0], c[1] + s * d[1], c[2] + s * d[2]];
    let x_s = d;
    let x_a = [s * b_a[0], s * b_a[1], s * b_a[2]];
    let x_p = [
        c_p[0] + s * (b_p[0] - c_p[0]),
        c_p[1] + s * (b_p[1] - c_p[1]),
        c_p[2] + s * (b_p[2] - c_p[2]),
    ];
    (x, x_s, x_a, x_p)
}

/// Tensor-product quadrature nodes and weights filling the solid torus
/// bounded by `surface`: Gauss-Legendre radially, trapezoid in both angles.
pub fn volume_quadrature(
    surface: &FourierTorus,
    n_s: usize,
    n_alpha: usize,
    n_phi: usize,
) -> (Vec<Vec3>, Vec<f64>) {
    let (s_nodes, s_weights) = gauss_legendre(n_s);
    let angular = TAU * TAU / (n_alpha * n_phi) as f64;
    let mut nodes = Vec::with_capacity(n_s * n_alpha * n_phi);
    let mut weights = Vec::with_capacity(n_s * n_alpha * n_phi);
    for (si, &s) in s_nodes.iter().enumerate() {
        for ia in 0..n_alpha {
            let alpha = TAU * ia as f64 / n_alpha as f64;
            for ip in 0..n_phi {
                let phi = TAU * ip as f64 / n_phi as f64;
                let (x, xs, xa, xp) = solid_torus_chart(surface, s, alpha, phi);
                let jac = dot3(xs, cross3(xa, xp)).abs();
                nodes.push(x);
                weights.push(jac * s_weights[si] * angular);
            }
        }
    }
    (nodes, weights)
}

/// Volume integral of `f` over the solid torus bounded by `surface`.
pub fn volume_integral(
    surface: &FourierTorus,
    n_s: usize,
    n_alpha: usize,
    n_phi: usize,
    f: impl Fn(Vec3) -> f64,
) -> f64 {
    let (nodes, weights) = volume_quadrature(surface, n_s, n_alpha, n_phi);
    compensated_sum(nodes.iter().zip(&weights).map(|(x, w)| f(*x) * w))
}

/// `|Gamma|^2` integrated over the solid torus.
pub fn gamma_volume_norm_sq(surface: &FourierTorus, n_s: usize, n_alpha: usize, n_phi: usize) -> f64 {
    volume_integral(surface, n_s, n_alpha, n_phi, |x| {
        let g = gamma_field(x);
        dot3(g, g)
    })
}

/// Flux of `Gamma` through the poloidal disc spanned by the section
/// `phi = phi_p`, oriented compatibly with a poloidal curve of orientation
/// `orient_p` (relative to +theta) via Stokes' theorem.
pub fn gamma_poloidal_flux(surface: &FourierTorus, phi_p: f64, orient_p: f64, n_s: usize, n_alpha: usize) -> f64 {
    let (s_nodes, s_weights) = gauss_legendre(n_s);
    let mut vals = Vec::with_capacity(n_s * n_alpha);
    for (si, &s) in s_nodes.iter().enumerate() {
        for ia in 0..n_alpha {
            let alpha = TAU * ia as f64 / n_alpha as f64;
            let (x, xs, xa, _) = solid_torus_chart(surface, s, alpha, phi_p);
            // boundary traversed with increasing alpha pairs with n dA = xs x xa
            let n_da = cross3(xs, xa);
            vals.push(dot3(gamma_field(x), n_da) * s_weights[si]);
        }
    }
    orient_p * compensated_sum(vals.into_iter()) * TAU / n_alpha as f64
}

/// Circulation of `Gamma` along a chart curve on the surface.
pub fn gamma_circulation(surface: &FourierTorus, curve: &ChartCurve) -> f64 {
    crate::curves::line_integral_ambient(surface, gamma_field, curve)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::build_grid;
    use std::f64::consts::PI;

    #[test]
    fn gamma_is_pointwise_harmonic_off_axis() {
        // finite-difference curl and divergence at a generic point
        let x0 = [1.7, -0.6, 0.4];
        let h = 1e-5;
        let mut div = 0.0;
        let mut curl = [0.0_f64; 3];
        let mut basis = [[0.0; 3]; 3];
        for k in 0..3 {
            basis[k][k] = 1.0;
        }
        let mut jac = [[0.0_f64; 3]; 3];
        for k in 0..3 {
            let mut xp = x0;
            let mut xm = x0;
            xp[k] += h;
            xm[k] -= h;
            let gp = gamma_field(xp);
            let gm = gamma_field(xm);
            for c in 0..3 {
                jac[c][k] = (gp[c] - gm[c]) / (2.0 * h);
            }
        }
        for k in 0..3 {
            div += jac[k][k];
        }
        curl[0] = jac[2][1] - jac[1][2];
        curl[1] = jac[0][2] - jac[2][0];
        curl[2] = jac[1][0] - jac[0][1];
        assert!(div.abs() < 1e-8);
        for c in curl {
            assert!(c.abs() < 1e-8);
        }
    }

    #[test]
    fn gamma_tangent_to_axisymmetric_torus() {
        let g = build_grid(&FourierTorus::standard(), 16, 16).unwrap();
        for i in 0..g.len() {
            let gam = gamma_field(g.position[i]);
            assert!(dot3(gam, g.normal[i]).abs() < 1e-13);
        }
    }

    #[test]
    fn analytic_constants_of_standard_torus() {
        let t = FourierTorus::standard();
        let norm_sq = gamma_volume_norm_sq(&t, 32, 64, 16);
        let expect = 4.0 * PI * PI * (2.0 - 3.0_f64.sqrt());
        assert!(
            (norm_sq - expect).abs() < 1e-6,
            "norm^2 {norm_sq} vs {expect}"
        );

        // sigma_p oriented against +theta on this parametrisation
        let flux = gamma_poloidal_flux(&t, 0.0, -1.0, 32, 64);
        let expect_flux = TAU * (2.0 - 3.0_f64.sqrt());
        assert!(
            (flux - expect_flux).abs() < 1e-6,
            "flux {flux} vs {expect_flux}"
        );

        let curve = ChartCurve::line(PI, 0.0, 0.0, TAU, 512);
        let circ = gamma_circulation(&t, &curve);
        assert!((circ - TAU).abs() < 1e-10, "{circ}");
    }

    #[test]
    fn volume_of_standard_torus() {
        // |Omega| = 2 pi^2 R0 r^2
        let t = FourierTorus::standard();
        let vol = volume_integral(&t, 24, 48, 12, |_| 1.0);
        let expect = 2.0 * PI * PI * 2.0;
        assert!((vol - expect).abs() < 1e-8, "{vol} vs {expect}");
    }
}
