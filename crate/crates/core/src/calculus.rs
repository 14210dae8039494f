//! Surface differential operators and the Laplace-Beltrami solve.
//!
//! All operators are pseudospectral: fields are differentiated through the
//! grid DFT and combined with the exact metric of the Fourier surface. The
//! scalar curl carries the frame handedness so that the Hodge identity
//! `curl(grad f x N) = -lap f` holds regardless of the parametrisation's
//! orientation.

use crate::error::{Error, Result};
use crate::fields::{norm, scalar_norm, TangentField};
use crate::geometry::SurfaceGrid;
use crate::math::compensated_sum;
use crate::spectral::freq;
use num_complex::Complex64;

/// Surface gradient of a scalar sample: contravariant components obtained by
/// raising the spectral partial derivatives with the inverse metric.
pub fn surface_gradient(grid: &SurfaceGrid, f: &[f64]) -> TangentField {
    assert_eq!(f.len(), grid.len());
    let ft = grid.spectral.d_theta(f);
    let fp = grid.spectral.d_phi(f);
    raise_covariant(grid, &ft, &fp)
}

/// Turn covariant components into a contravariant tangent field.
pub fn raise_covariant(grid: &SurfaceGrid, cov_t: &[f64], cov_p: &[f64]) -> TangentField {
    let n = grid.len();
    let mut vt = Vec::with_capacity(n);
    let mut vp = Vec::with_capacity(n);
    for i in 0..n {
        let det = grid.jacobian[i] * grid.jacobian[i];
        vt.push((grid.g_pp[i] * cov_t[i] - grid.g_tp[i] * cov_p[i]) / det);
        vp.push((grid.g_tt[i] * cov_p[i] - grid.g_tp[i] * cov_t[i]) / det);
    }
    TangentField::from_components(grid, vt, vp)
}

/// Strong-form surface divergence `(1/J)[d_theta(J v^theta) + d_phi(J v^phi)]`.
pub fn surface_divergence(grid: &SurfaceGrid, v: &TangentField) -> Vec<f64> {
    assert!(v.same_grid(grid));
    let n = grid.len();
    let jt: Vec<f64> = (0..n).map(|i| grid.jacobian[i] * v.comp_theta[i]).collect();
    let jp: Vec<f64> = (0..n).map(|i| grid.jacobian[i] * v.comp_phi[i]).collect();
    let dt = grid.spectral.d_theta(&jt);
    let dp = grid.spectral.d_phi(&jp);
    (0..n).map(|i| (dt[i] + dp[i]) / grid.jacobian[i]).collect()
}

/// Strong-form scalar curl, oriented by the frame handedness:
/// `curl v = (h/J)[d_theta(v . e_phi) - d_phi(v . e_theta)]`.
pub fn surface_curl(grid: &SurfaceGrid, v: &TangentField) -> Vec<f64> {
    assert!(v.same_grid(grid));
    let n = grid.len();
    let mut cov_t = Vec::with_capacity(n);
    let mut cov_p = Vec::with_capacity(n);
    for i in 0..n {
        let (ct, cp) = v.covariant(grid, i);
        cov_t.push(ct);
        cov_p.push(cp);
    }
    let dt = grid.spectral.d_theta(&cov_p);
    let dp = grid.spectral.d_phi(&cov_t);
    (0..n)
        .map(|i| grid.handedness * (dt[i] - dp[i]) / grid.jacobian[i])
        .collect()
}

/// Forward Laplace-Beltrami, `div(grad f)`.
pub fn laplace_beltrami(grid: &SurfaceGrid, f: &[f64]) -> Vec<f64> {
    surface_divergence(grid, &surface_gradient(grid, f))
}

/// Largest weak-divergence residual of `v` against a battery of band-limited
/// test functions, relative to `|v| |grad a|`.
pub fn weak_divergence_residual(grid: &SurfaceGrid, v: &TangentField) -> f64 {
    weak_residual(grid, v, false)
}

/// Largest weak-curl residual (tests `int v . (grad a x N)`).
pub fn weak_curl_residual(grid: &SurfaceGrid, v: &TangentField) -> f64 {
    weak_residual(grid, v, true)
}

fn weak_residual(grid: &SurfaceGrid, v: &TangentField, rotated: bool) -> f64 {
    let vnorm = norm(grid, v);
    if vnorm == 0.0 {
        return 0.0;
    }
    let mut worst = 0.0_f64;
    for p in -3i64..=3 {
        for q in -3i64..=3 {
            if p == 0 && q == 0 {
                continue;
            }
            for phase in [0.0, std::f64::consts::FRAC_PI_2] {
                let alpha: Vec<f64> = (0..grid.n_theta)
                    .flat_map(|i| {
                        let th = grid.theta(i);
                        (0..grid.n_phi).map(move |j| (p as f64 * th + q as f64 * grid.phi(j) + phase).cos())
                    })
                    .collect();
                let grad = surface_gradient(grid, &alpha);
                let test = if rotated { grad.cross_normal(grid) } else { grad };
                let pairing = compensated_sum(
                    v.pointwise_dot(grid, &test)
                        .iter()
                        .enumerate()
                        .map(|(i, x)| x * grid.weight(i)),
                );
                let gnorm = norm(grid, &test);
                worst = worst.max(pairing.abs() / (vnorm * gnorm));
            }
        }
    }
    worst
}

/// Matrix-free Laplace-Beltrami solver.
///
/// The discrete operator is `A = D^T W D` built from the exact skew-adjoint
/// spectral derivative matrices and the pointwise SPD matrix `W = J g^{ab}`,
/// so `A` is symmetric positive semidefinite with kernel = constants on the
/// de-aliased band. `A f = -J rhs` is solved by conjugate gradients with a
/// constant-coefficient Fourier preconditioner; the result is gauged to zero
/// surface mean.
pub struct LaplaceSolver<'g> {
    grid: &'g SurfaceGrid,
    /// Fourier multiplier of the averaged-coefficient operator.
    precond: Vec<f64>,
    pub tol: f64,
    pub max_iter: usize,
}

impl<'g> LaplaceSolver<'g> {
    pub fn new(grid: &'g SurfaceGrid) -> Self {
        let n = grid.len() as f64;
        let (mut w_tt, mut w_tp, mut w_pp) = (0.0, 0.0, 0.0);
        for i in 0..grid.len() {
            let j = grid.jacobian[i];
            w_tt += grid.g_pp[i] / j;
            w_tp += -grid.g_tp[i] / j;
            w_pp += grid.g_tt[i] / j;
        }
        w_tt /= n;
        w_tp /= n;
        w_pp /= n;
        let (nt, np) = (grid.n_theta, grid.n_phi);
        let mut precond = vec![1.0; nt * np];
        for i in 0..nt {
            let m = freq(i, nt) as f64;
            for j in 0..np {
                let k = freq(j, np) as f64;
                let idx = i * np + j;
                let val = w_tt * m * m + 2.0 * w_tp * m * k + w_pp * k * k;
                precond[idx] = if val > 0.0 { val } else { 1.0 };
            }
        }
        Self { grid, precond, tol: 1e-12, max_iter: 800 }
    }

    /// Apply `A = -[d_theta(W11 f_t + W12 f_p) + d_phi(W21 f_t + W22 f_p)]`
    /// restricted to the de-aliased band: pointwise metric products scatter
    /// outside the band, so the output is projected back. `P A P` stays
    /// symmetric positive semidefinite because the spectral projection is
    /// orthogonal.
    fn apply(&self, f: &[f64]) -> Vec<f64> {
        let g = self.grid;
        let n = g.len();
        let ft = g.spectral.d_theta(f);
        let fp = g.spectral.d_phi(f);
        let mut qt = Vec::with_capacity(n);
        let mut qp = Vec::with_capacity(n);
        for i in 0..n {
            let j = g.jacobian[i];
            qt.push((g.g_pp[i] * ft[i] - g.g_tp[i] * fp[i]) / j);
            qp.push((g.g_tt[i] * fp[i] - g.g_tp[i] * ft[i]) / j);
        }
        let dt = g.spectral.d_theta(&qt);
        let dp = g.spectral.d_phi(&qp);
        let raw: Vec<f64> = (0..n).map(|i| -(dt[i] + dp[i])).collect();
        self.project(&raw)
    }

    /// Spectral projection onto the solvable band: removes the constant and
    /// every Nyquist line.
    fn project(&self, f: &[f64]) -> Vec<f64> {
        let g = self.grid;
        let (nt, np) = (g.n_theta, g.n_phi);
        let mut c = g.spectral.forward(f);
        for i in 0..nt {
            for j in 0..np {
                let kill = (i == 0 && j == 0)
                    || (nt % 2 == 0 && i == nt / 2)
                    || (np % 2 == 0 && j == np / 2);
                if kill {
                    c[i * np + j] = Complex64::default();
                }
            }
        }
        g.spectral.inverse(&c)
    }

    fn precondition(&self, r: &[f64]) -> Vec<f64> {
        let g = self.grid;
        let mut c = g.spectral.forward(r);
        for (z, p) in c.iter_mut().zip(&self.precond) {
            *z /= *p;
        }
        let out = g.spectral.inverse(&c);
        self.project(&out)
    }

    /// Solve `lap f = rhs` with `int f dsigma = 0`.
    ///
    /// Errors if the compatibility condition `int rhs dsigma = 0` fails
    /// (relative to the rhs norm) or CG stalls.
    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let g = self.grid;
        let n = g.len();
        assert_eq!(rhs.len(), n);
        let rhs_norm = scalar_norm(g, rhs);
        if rhs_norm == 0.0 {
            return Ok(vec![0.0; n]);
        }
        let mean = g.integrate(rhs);
        if mean.abs() > 1e-10 * rhs_norm.max(1.0) * g.area().sqrt() {
            return Err(Error::Solve(format!(
                "Laplace-Beltrami rhs has non-zero surface mean {mean:.3e}"
            )));
        }
        // b = -J rhs, projected onto the solvable band
        let b_raw: Vec<f64> = (0..n).map(|i| -g.jacobian[i] * rhs[i]).collect();
        let b = self.project(&b_raw);
        let b_norm = l2(&b);

        let mut x = vec![0.0; n];
        let mut r = b.clone();
        let mut z = self.precondition(&r);
        let mut p = z.clone();
        let mut rz = dot(&r, &z);
        let mut converged = false;
        for _ in 0..self.max_iter {
            if l2(&r) <= self.tol * b_norm {
                converged = true;
                break;
            }
            let ap = self.apply(&p);
            let pap = dot(&p, &ap);
            if pap <= 0.0 {
                return Err(Error::Solve("Laplace CG lost positive-definiteness".into()));
            }
            let alpha = rz / pap;
            for i in 0..n {
                x[i] += alpha * p[i];
                r[i] -= alpha * ap[i];
            }
            z = self.precondition(&r);
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            for i in 0..n {
                p[i] = z[i] + beta * p[i];
            }
        }
        if !converged && l2(&r) > self.tol * b_norm {
            return Err(Error::Solve(format!(
                "Laplace CG stalled at relative residual {:.3e}",
                l2(&r) / b_norm
            )));
        }
        // zero-mean gauge
        let fbar = g.integrate(&x) / g.area();
        for xi in &mut x {
            *xi -= fbar;
        }
        Ok(x)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    compensated_sum(a.iter().zip(b).map(|(x, y)| x * y))
}

fn l2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::scalar_inner_product;
    use crate::geometry::{build_grid, FourierTorus};

    fn sample(grid: &SurfaceGrid, f: impl Fn(f64, f64) -> f64 + Copy) -> Vec<f64> {
        (0..grid.n_theta)
            .flat_map(|i| (0..grid.n_phi).map(move |j| f(grid.theta(i), grid.phi(j))))
            .collect()
    }

    #[test]
    fn gradient_of_constant_vanishes() {
        let g = build_grid(&FourierTorus::standard(), 16, 16).unwrap();
        let grad = surface_gradient(&g, &vec![3.5; g.len()]);
        assert!(norm(&g, &grad) < 1e-13);
    }

    #[test]
    fn gradient_closed_forms_on_standard_torus() {
        let g = build_grid(&FourierTorus::standard(), 32, 32).unwrap();
        // grad(sin theta) = (cos theta / r) * unit poloidal, r = 1
        let grad = surface_gradient(&g, &sample(&g, |t, _| t.sin()));
        for i in 0..g.len() {
            let th = g.theta(i / g.n_phi);
            let mag = crate::math::norm3(grad.at(&g, i));
            assert!((mag - th.cos().abs()).abs() < 1e-10, "node {i}");
            // direction: purely poloidal
            assert!(grad.comp_phi[i].abs() < 1e-12);
        }
        // grad(sin phi) = (cos phi / rho) * unit toroidal
        let grad = surface_gradient(&g, &sample(&g, |_, p| p.sin()));
        for i in 0..g.len() {
            let th = g.theta(i / g.n_phi);
            let ph = g.phi(i % g.n_phi);
            let rho = 2.0 + th.cos();
            let mag = crate::math::norm3(grad.at(&g, i));
            assert!((mag - (ph.cos() / rho).abs()).abs() < 1e-10);
            assert!(grad.comp_theta[i].abs() < 1e-12);
        }
    }

    #[test]
    fn divergence_of_unit_toroidal_over_rho_vanishes() {
        // e_phi/rho is the axisymmetric harmonic direction
        let g = build_grid(&FourierTorus::standard(), 32, 32).unwrap();
        let v = TangentField::from_ambient(&g, |x| {
            let rho2 = x[0] * x[0] + x[1] * x[1];
            [-x[1] / rho2, x[0] / rho2, 0.0]
        });
        let div = surface_divergence(&g, &v);
        for d in &div {
            assert!(d.abs() < 1e-10);
        }
    }

    #[test]
    fn curl_of_gradient_and_hodge_star_identity() {
        let g = build_grid(&FourierTorus::rotating_ellipse(), 32, 48).unwrap();
        let f = sample(&g, |t, p| (t - 2.0 * p).sin() + 0.3 * (2.0 * t).cos());
        let grad = surface_gradient(&g, &f);
        let curl = surface_curl(&g, &grad);
        let scale = scalar_norm(&g, &f);
        for c in &curl {
            assert!(c.abs() < 1e-8 * scale);
        }
        // curl(grad f x N) = -lap f
        let rotated = grad.cross_normal(&g);
        let curl_rot = surface_curl(&g, &rotated);
        let lap = laplace_beltrami(&g, &f);
        let lscale = scalar_norm(&g, &lap);
        for i in 0..g.len() {
            assert!((curl_rot[i] + lap[i]).abs() < 1e-8 * lscale);
        }
        // div(grad f x N) = 0
        let div_rot = surface_divergence(&g, &rotated);
        for d in &div_rot {
            assert!(d.abs() < 1e-8 * lscale);
        }
    }

    #[test]
    fn divergence_equals_laplacian_on_gradients() {
        let g = build_grid(&FourierTorus::rotating_ellipse(), 24, 36).unwrap();
        let f = sample(&g, |t, p| (2.0 * t + p).cos() + (t).sin() * 0.4);
        let div = surface_divergence(&g, &surface_gradient(&g, &f));
        let lap = laplace_beltrami(&g, &f);
        for i in 0..g.len() {
            assert!((div[i] - lap[i]).abs() < 1e-10 * (1.0 + lap[i].abs()));
        }
    }

    #[test]
    fn laplace_solver_round_trip() {
        let g = build_grid(&FourierTorus::rotating_ellipse(), 32, 48).unwrap();
        let solver = LaplaceSolver::new(&g);
        // rhs = 0 -> f = 0
        assert!(scalar_norm(&g, &solver.solve(&vec![0.0; g.len()]).unwrap()) < 1e-12);
        // forward-then-solve reproduces sin(theta) (mean-zero on this metric? gauge both)
        let f_ref = sample(&g, |t, _| t.sin());
        let rhs = laplace_beltrami(&g, &f_ref);
        let f = solver.solve(&rhs).unwrap();
        let mean_ref = g.integrate(&f_ref) / g.area();
        let mut worst = 0.0_f64;
        for i in 0..g.len() {
            worst = worst.max((f[i] - (f_ref[i] - mean_ref)).abs());
        }
        assert!(worst < 1e-8, "round-trip error {worst:.3e}");
        // residual check
        let lap_f = laplace_beltrami(&g, &f);
        let res: Vec<f64> = (0..g.len()).map(|i| lap_f[i] - rhs[i]).collect();
        assert!(scalar_norm(&g, &res) <= 1e-9 * scalar_norm(&g, &rhs));
    }

    #[test]
    fn laplace_rejects_incompatible_rhs() {
        let g = build_grid(&FourierTorus::standard(), 16, 16).unwrap();
        let solver = LaplaceSolver::new(&g);
        let err = solver.solve(&vec![1.0; g.len()]).unwrap_err();
        assert!(matches!(err, Error::Solve(_)));
    }

    #[test]
    fn weak_residuals_flag_non_divfree_fields() {
        let g = build_grid(&FourierTorus::standard(), 32, 32).unwrap();
        let f = sample(&g, |t, p| (t + p).sin());
        let grad = surface_gradient(&g, &f);
        // a gradient is curl-free but not divergence-free
        assert!(weak_curl_residual(&g, &grad) < 1e-10);
        assert!(weak_divergence_residual(&g, &grad) > 1e-3);
        // its rotation is divergence-free but not curl-free
        let rot = grad.cross_normal(&g);
        assert!(weak_divergence_residual(&g, &rot) < 1e-10);
        assert!(weak_curl_residual(&g, &rot) > 1e-3);
    }
}
