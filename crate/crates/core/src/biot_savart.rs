//! The surface Biot-Savart operator and off-surface field evaluation.
//!
//! On-surface evaluation uses staggered source grids: targets sit on the
//! primal nodes while sources sit on the half-shifted grid, which steps
//! around the 1/|x-y| singularity without explicit subtraction. The operator
//! averages the +shift and -shift source grids; the two one-sided lattice
//! sums are exact transposes of each other, so the induced bilinear form
//! `<v, BS w>` is symmetric to rounding.

use crate::error::{Error, Result};
use crate::fields::TangentField;
use crate::geometry::{GeometryConstants, SurfaceGrid};
use crate::math::{cross3, dot3, norm3, scale3, sub3, Accumulator, Vec3};
use rayon::prelude::*;
use std::f64::consts::FRAC_1_PI;

/// Weighted source set for one staggered lattice.
struct SourceSet {
    positions: Vec<Vec3>,
    /// current vector times area weight J d_theta d_phi
    weighted: Vec<Vec3>,
}

fn staggered_sources(grid: &SurfaceGrid, v: &TangentField, frac_t: f64, frac_p: f64) -> SourceSet {
    let (nt, np) = (grid.n_theta, grid.n_phi);
    let (dt, dp) = (grid.d_theta * frac_t, grid.d_phi * frac_p);
    let vt = grid.spectral.shifted(&v.comp_theta, dt, dp);
    let vp = grid.spectral.shifted(&v.comp_phi, dt, dp);
    let w = grid.d_theta * grid.d_phi;
    let mut positions = Vec::with_capacity(nt * np);
    let mut weighted = Vec::with_capacity(nt * np);
    for i in 0..nt {
        let th = grid.theta(i) + dt;
        for j in 0..np {
            let ph = grid.phi(j) + dp;
            let (x, et, ep) = grid.surface.position_and_tangents(th, ph);
            let jac = norm3(cross3(et, ep));
            let idx = i * np + j;
            let cur = [
                vt[idx] * et[0] + vp[idx] * ep[0],
                vt[idx] * et[1] + vp[idx] * ep[1],
                vt[idx] * et[2] + vp[idx] * ep[2],
            ];
            positions.push(x);
            weighted.push(scale3(cur, jac * w));
        }
    }
    SourceSet { positions, weighted }
}

/// Raw Biot-Savart sum at arbitrary targets from a weighted source set.
/// Parallel over targets; the per-target source loop runs in fixed order with
/// compensated accumulation, so results do not depend on the thread count.
fn bs_sum(sources: &SourceSet, targets: &[Vec3]) -> Vec<Vec3> {
    targets
        .par_iter()
        .map(|&x| {
            let mut acc = [Accumulator::new(), Accumulator::new(), Accumulator::new()];
            for (y, cur) in sources.positions.iter().zip(&sources.weighted) {
                let d = sub3(x, *y);
                let r2 = dot3(d, d);
                let inv_r3 = 1.0 / (r2 * r2.sqrt());
                let contrib = cross3(*cur, d);
                acc[0].add(contrib[0] * inv_r3);
                acc[1].add(contrib[1] * inv_r3);
                acc[2].add(contrib[2] * inv_r3);
            }
            [
                0.25 * FRAC_1_PI * acc[0].total(),
                0.25 * FRAC_1_PI * acc[1].total(),
                0.25 * FRAC_1_PI * acc[2].total(),
            ]
        })
        .collect()
}

/// Tangentially projected surface Biot-Savart operator with the default
/// half-grid staggering.
pub fn bs_surface(grid: &SurfaceGrid, v: &TangentField) -> TangentField {
    bs_surface_with_shift(grid, v, 0.5)
}

/// Same operator with a custom source-grid shift fraction (in units of the
/// grid spacing). The +shift and -shift lattices are averaged.
pub fn bs_surface_with_shift(grid: &SurfaceGrid, v: &TangentField, frac: f64) -> TangentField {
    assert!(v.same_grid(grid));
    assert!(frac > 0.0 && frac < 1.0, "shift fraction must be in (0,1)");
    let plus = staggered_sources(grid, v, frac, frac);
    let minus = staggered_sources(grid, v, -frac, -frac);
    let b_plus = bs_sum(&plus, &grid.position);
    let b_minus = bs_sum(&minus, &grid.position);

    let n = grid.len();
    let mut cov_t = Vec::with_capacity(n);
    let mut cov_p = Vec::with_capacity(n);
    for i in 0..n {
        let b = [
            0.5 * (b_plus[i][0] + b_minus[i][0]),
            0.5 * (b_plus[i][1] + b_minus[i][1]),
            0.5 * (b_plus[i][2] + b_minus[i][2]),
        ];
        // tangential projection via the covariant components
        cov_t.push(dot3(b, grid.e_theta[i]));
        cov_p.push(dot3(b, grid.e_phi[i]));
    }
    crate::calculus::raise_covariant(grid, &cov_t, &cov_p)
}

/// Largest effective grid step (for separation checks).
pub fn max_grid_step(grid: &SurfaceGrid) -> f64 {
    (0..grid.len())
        .map(|i| {
            (norm3(grid.e_theta[i]) * grid.d_theta).max(norm3(grid.e_phi[i]) * grid.d_phi)
        })
        .fold(0.0, f64::max)
}

/// Field of a surface current at points away from the surface (plain primal
/// quadrature, spectrally accurate for separated smooth targets).
///
/// Errors if any point comes within two grid steps of the surface nodes.
pub fn bs_at_points(grid: &SurfaceGrid, j: &TangentField, points: &[Vec3]) -> Result<Vec<Vec3>> {
    assert!(j.same_grid(grid));
    let h = max_grid_step(grid);
    for (k, p) in points.iter().enumerate() {
        let mut dmin = f64::INFINITY;
        for q in &grid.position {
            dmin = dmin.min(norm3(sub3(*p, *q)));
        }
        if dmin <= 2.0 * h {
            return Err(Error::Proximity(format!(
                "evaluation point {k} is {dmin:.3e} from the surface, need > {:.3e}",
                2.0 * h
            )));
        }
    }
    let w = grid.d_theta * grid.d_phi;
    let sources = SourceSet {
        positions: grid.position.clone(),
        weighted: (0..grid.len())
            .map(|i| scale3(j.at(grid, i), grid.jacobian[i] * w))
            .collect(),
    };
    Ok(bs_sum(&sources, points))
}

/// Worst sampled ratio `|tangential integrand| * |x-y| / |v(y)|` of the
/// surface kernel; the flatness constant plus the normal's Lipschitz constant
/// bound it from above.
pub fn kernel_bound_worst_ratio(grid: &SurfaceGrid, v: &TangentField) -> f64 {
    let n = grid.len();
    (0..n)
        .into_par_iter()
        .map(|a| {
            let mut worst = 0.0_f64;
            let x = grid.position[a];
            let nx = grid.normal[a];
            for b in 0..n {
                if a == b {
                    continue;
                }
                let vy = v.at(grid, b);
                let vmag = norm3(vy);
                if vmag < 1e-300 {
                    continue;
                }
                let d = sub3(x, grid.position[b]);
                let r = norm3(d);
                let k = scale3(d, 1.0 / (r * r * r));
                let integrand = cross3(vy, k);
                let tangential = sub3(integrand, scale3(nx, dot3(integrand, nx)));
                worst = worst.max(norm3(tangential) * r / vmag);
            }
            worst
        })
        .reduce(|| 0.0, f64::max)
}

/// Sampled Lipschitz constant of the outward normal.
pub fn normal_lipschitz(grid: &SurfaceGrid) -> f64 {
    let n = grid.len();
    (0..n)
        .into_par_iter()
        .map(|a| {
            let mut worst = 0.0_f64;
            for b in (a + 1)..n {
                let dn = norm3(sub3(grid.normal[a], grid.normal[b]));
                let dx = norm3(sub3(grid.position[a], grid.position[b]));
                worst = worst.max(dn / dx);
            }
            worst
        })
        .reduce(|| 0.0, f64::max)
}

/// Check the projected-kernel bound `|integrand| <= C |v(y)| / |x-y|` with
/// `C = c + Lip(N)` on all sampled pairs.
pub fn kernel_bound_holds(grid: &SurfaceGrid, v: &TangentField, constants: &GeometryConstants) -> bool {
    let c_bound = constants.c + normal_lipschitz(grid);
    kernel_bound_worst_ratio(grid, v) <= c_bound * (1.0 + 1e-9)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{inner_product, norm};
    use crate::geometry::{build_grid, estimate_constants, FourierTorus};

    #[test]
    fn zero_current_gives_zero_field() {
        let g = build_grid(&FourierTorus::standard(), 16, 16).unwrap();
        let z = TangentField::zeros(&g);
        let b = bs_surface(&g, &z);
        assert!(norm(&g, &b) == 0.0);
        let pts = vec![[0.0, 0.0, 0.0]];
        let bp = bs_at_points(&g, &z, &pts).unwrap();
        assert_eq!(bp[0], [0.0, 0.0, 0.0]);
    }

    #[test]
    fn bilinear_form_symmetric_to_rounding() {
        let g = build_grid(&FourierTorus::rotating_ellipse(), 24, 24).unwrap();
        let v = TangentField::from_ambient(&g, |x| [-x[1], x[0], 0.1 * x[2]]);
        let w = TangentField::from_ambient(&g, |x| [x[2], 0.3 * x[0], -x[1]]);
        let a = inner_product(&g, &v, &bs_surface(&g, &w));
        let b = inner_product(&g, &w, &bs_surface(&g, &v));
        let scale = norm(&g, &v) * norm(&g, &w);
        assert!(
            (a - b).abs() <= 1e-8 * scale,
            "asymmetry {:.3e} vs scale {scale:.3e}",
            (a - b).abs()
        );
    }

    #[test]
    fn proximity_guard_fires() {
        let g = build_grid(&FourierTorus::standard(), 16, 16).unwrap();
        let v = TangentField::from_ambient(&g, |x| [-x[1], x[0], 0.0]);
        // a point on the surface itself
        let err = bs_at_points(&g, &v, &[g.position[3]]).unwrap_err();
        assert!(matches!(err, Error::Proximity(_)));
    }

    #[test]
    fn kernel_bound_on_standard_torus() {
        let g = build_grid(&FourierTorus::standard(), 24, 24).unwrap();
        let v = TangentField::from_ambient(&g, |x| {
            let rho2 = x[0] * x[0] + x[1] * x[1];
            [-x[1] / rho2, x[0] / rho2, 0.0]
        });
        let k = estimate_constants(&g);
        assert!(kernel_bound_holds(&g, &v, &k));
    }

    #[test]
    fn toroidal_solenoid_interior_and_exterior_field() {
        // poloidal sheet current: interior B_phi ~ K/rho, exterior ~ 0
        let g = build_grid(&FourierTorus::standard(), 48, 48).unwrap();
        let gamma_dir = TangentField::from_ambient(&g, |x| {
            let rho2 = x[0] * x[0] + x[1] * x[1];
            [-x[1] / rho2, x[0] / rho2, 0.0]
        });
        let j = gamma_dir.cross_normal(&g);
        // interior samples on the circle rho = 2 (z=0), which is well inside
        let interior: Vec<Vec3> = (0..8)
            .map(|k| {
                let a = std::f64::consts::TAU * k as f64 / 8.0;
                [2.0 * a.cos(), 2.0 * a.sin(), 0.0]
            })
            .collect();
        // a second interior radius to check the 1/rho profile
        let interior2: Vec<Vec3> = (0..8)
            .map(|k| {
                let a = std::f64::consts::TAU * k as f64 / 8.0;
                [2.4 * a.cos(), 2.4 * a.sin(), 0.1]
            })
            .collect();
        let exterior: Vec<Vec3> = vec![[0.0, 0.0, 0.0], [4.5, 0.0, 0.0], [0.0, 0.0, 3.0]];
        let bi = bs_at_points(&g, &j, &interior).unwrap();
        let bi2 = bs_at_points(&g, &j, &interior2).unwrap();
        let be = bs_at_points(&g, &j, &exterior).unwrap();
        // fit K from the first ring
        let mut k_sum = 0.0;
        for (p, b) in interior.iter().zip(&bi) {
            let rho = (p[0] * p[0] + p[1] * p[1]).sqrt();
            let ephi = [-p[1] / rho, p[0] / rho, 0.0];
            k_sum += dot3(*b, ephi) * rho;
        }
        let kfit = k_sum / interior.len() as f64;
        let mut max_int = 0.0_f64;
        for (p, b) in interior.iter().zip(&bi).chain(interior2.iter().zip(&bi2)) {
            let rho = (p[0] * p[0] + p[1] * p[1]).sqrt();
            let ephi = [-p[1] / rho, p[0] / rho, 0.0];
            let model = kfit / rho;
            let bphi = dot3(*b, ephi);
            assert!(
                (bphi - model).abs() <= 1e-3 * model.abs(),
                "B_phi {bphi} vs K/rho {model}"
            );
            // field should be essentially toroidal
            let resid = sub3(*b, scale3(ephi, bphi));
            assert!(norm3(resid) <= 1e-3 * bphi.abs());
            max_int = max_int.max(norm3(*b));
        }
        for b in &be {
            assert!(norm3(*b) <= 1e-3 * max_int, "exterior leak {:?}", b);
        }
    }

    #[test]
    fn ring_current_matches_loop_formula_on_axis() {
        // toroidal (ring-like) surface current; on-axis field = superposition
        // of circular loops
        let g = build_grid(&FourierTorus::standard(), 48, 48).unwrap();
        let j = TangentField::from_ambient(&g, |x| {
            let rho = (x[0] * x[0] + x[1] * x[1]).sqrt();
            [-x[1] / rho, x[0] / rho, 0.0]
        });
        let pts: Vec<Vec3> = vec![[0.0, 0.0, 0.0], [0.0, 0.0, 1.5], [0.0, 0.0, -2.0]];
        let b = bs_at_points(&g, &j, &pts).unwrap();
        // loop oracle: each theta-ring at (a(th), z(th)) carries dI = |j| r_pol dtheta / (2 pi / (2 pi)) ...
        // surface current density K = 1 (unit vector), so dI = K * dl_poloidal
        let nth = 4096;
        for (p, bf) in pts.iter().zip(&b) {
            let mut acc = 0.0;
            for it in 0..nth {
                let th = std::f64::consts::TAU * it as f64 / nth as f64;
                let a = 2.0 + th.cos();
                let zr = th.sin();
                // poloidal arc length of the (2,1) torus per dtheta is 1
                let di = std::f64::consts::TAU / nth as f64 * (nth as f64 / std::f64::consts::TAU)
                    * (std::f64::consts::TAU / nth as f64);
                let d = p[2] - zr;
                acc += a * a * di / (2.0 * (a * a + d * d).powf(1.5));
            }
            assert!(
                (bf[2] - acc).abs() <= 1e-3 * acc.abs(),
                "on-axis {} vs loop {}",
                bf[2],
                acc
            );
            assert!(bf[0].abs() < 1e-10 && bf[1].abs() < 1e-10);
        }
    }
}
