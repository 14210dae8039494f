//! Closed curves on the surface in chart coordinates, and line integrals of
//! tangent fields along them.

use crate::error::{Error, Result};
use crate::fields::TangentField;
use crate::geometry::{FourierTorus, SurfaceGrid};
use crate::math::{compensated_sum, dot3, norm3, sub3, Vec3};
use num_complex::Complex64;
use rustfft::FftPlanner;
use std::f64::consts::TAU;

/// A closed curve on the torus given by unwrapped chart samples at the
/// uniform parameters `t_k = k/n`, `k = 0..n-1`. After one parameter period
/// the angles advance by whole numbers of turns.
#[derive(Debug, Clone)]
pub struct ChartCurve {
    pub theta: Vec<f64>,
    pub phi: Vec<f64>,
    /// theta(1) - theta(0); a multiple of 2 pi.
    pub theta_winding: f64,
    /// phi(1) - phi(0); a multiple of 2 pi.
    pub phi_winding: f64,
}

impl ChartCurve {
    /// Straight chart line from (theta0, phi0) with the given total advances.
    pub fn line(theta0: f64, phi0: f64, d_theta: f64, d_phi: f64, n: usize) -> Self {
        let theta = (0..n).map(|k| theta0 + d_theta * k as f64 / n as f64).collect();
        let phi = (0..n).map(|k| phi0 + d_phi * k as f64 / n as f64).collect();
        Self { theta, phi, theta_winding: d_theta, phi_winding: d_phi }
    }

    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }

    /// Chart velocities (d theta/dt, d phi/dt) at the samples, by spectral
    /// differentiation of the periodic part plus the winding slope.
    pub fn tangents(&self) -> (Vec<f64>, Vec<f64>) {
        let n = self.len();
        let periodic_t: Vec<f64> = (0..n)
            .map(|k| self.theta[k] - self.theta_winding * k as f64 / n as f64)
            .collect();
        let periodic_p: Vec<f64> = (0..n)
            .map(|k| self.phi[k] - self.phi_winding * k as f64 / n as f64)
            .collect();
        let dt = fourier_derivative_1d(&periodic_t);
        let dp = fourier_derivative_1d(&periodic_p);
        (
            dt.iter().map(|d| d + self.theta_winding).collect(),
            dp.iter().map(|d| d + self.phi_winding).collect(),
        )
    }

    /// Ambient positions of the samples.
    pub fn positions(&self, surface: &FourierTorus) -> Vec<Vec3> {
        (0..self.len())
            .map(|k| surface.position_and_tangents(self.theta[k], self.phi[k]).0)
            .collect()
    }

    /// Invert 3-D points lying on the grid's surface back into unwrapped
    /// chart samples. Errors if any point is farther from the surface than
    /// `tol` times the surface scale.
    pub fn from_points_3d(grid: &SurfaceGrid, points: &[Vec3], tol: f64) -> Result<Self> {
        if points.len() < 8 {
            return Err(Error::Config("need at least 8 curve points".into()));
        }
        let surface = &grid.surface;
        let scale = grid
            .position
            .iter()
            .map(|p| norm3(*p))
            .fold(0.0_f64, f64::max);
        let mut theta = Vec::with_capacity(points.len());
        let mut phi = Vec::with_capacity(points.len());
        let mut guess: Option<(f64, f64)> = None;
        for (k, p) in points.iter().enumerate() {
            let (mut th, mut ph) = match guess {
                Some(g) => g,
                None => {
                    // nearest grid node as the initial guess
                    let mut best = (0usize, f64::INFINITY);
                    for (i, q) in grid.position.iter().enumerate() {
                        let d = norm3(sub3(*p, *q));
                        if d < best.1 {
                            best = (i, d);
                        }
                    }
                    (
                        grid.theta(best.0 / grid.n_phi),
                        grid.phi(best.0 % grid.n_phi),
                    )
                }
            };
            // Gauss-Newton on the tangential residual
            let mut ok = false;
            for _ in 0..50 {
                let (x, et, ep) = surface.position_and_tangents(th, ph);
                let d = sub3(x, *p);
                let rt = dot3(d, et);
                let rp = dot3(d, ep);
                let (gtt, gtp, gpp) = (dot3(et, et), dot3(et, ep), dot3(ep, ep));
                let det = gtt * gpp - gtp * gtp;
                let dth = (gpp * rt - gtp * rp) / det;
                let dph = (gtt * rp - gtp * rt) / det;
                th -= dth;
                ph -= dph;
                if dth.abs() + dph.abs() < 1e-14 {
                    ok = true;
                    break;
                }
            }
            let (x, _, _) = surface.position_and_tangents(th, ph);
            if !ok || norm3(sub3(x, *p)) > tol * scale {
                return Err(Error::Geometry(format!(
                    "curve point {k} is {:.3e} off the surface",
                    norm3(sub3(x, *p))
                )));
            }
            // continuity: unwrap against the previous sample
            if let Some(&prev) = theta.last() {
                th = prev + crate::math::angle_diff(th, prev);
            }
            if let Some(&prev) = phi.last() {
                ph = prev + crate::math::angle_diff(ph, prev);
            }
            theta.push(th);
            phi.push(ph);
            guess = Some((th, ph));
        }
        // windings from the closure step
        let th_gap = crate::math::angle_diff(theta[0], *theta.last().unwrap());
        let ph_gap = crate::math::angle_diff(phi[0], *phi.last().unwrap());
        let n = points.len() as f64;
        let theta_winding =
            ((theta.last().unwrap() + th_gap - theta[0]) * n / (n - 1.0) / TAU).round() * TAU;
        let phi_winding =
            ((phi.last().unwrap() + ph_gap - phi[0]) * n / (n - 1.0) / TAU).round() * TAU;
        Ok(Self { theta, phi, theta_winding, phi_winding })
    }
}

fn fourier_derivative_1d(f: &[f64]) -> Vec<f64> {
    let n = f.len();
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let mut data: Vec<Complex64> = f.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    fwd.process(&mut data);
    for (i, z) in data.iter_mut().enumerate() {
        let k = crate::spectral::freq(i, n);
        *z = if n % 2 == 0 && i == n / 2 {
            Complex64::default()
        } else {
            *z * Complex64::new(0.0, k as f64 / n as f64)
        };
    }
    inv.process(&mut data);
    data.iter().map(|z| z.re).collect()
}

/// Circulation of a tangent field along a closed chart curve,
/// `int v . sigma-dot dt` over one parameter period.
///
/// The field components are evaluated by trigonometric interpolation; the
/// metric pairing uses the exact surface frame at the samples.
pub fn line_integral(grid: &SurfaceGrid, v: &TangentField, curve: &ChartCurve) -> Result<f64> {
    if curve.len() < 256 {
        return Err(Error::Config(format!(
            "curve sampled with {} points, need at least 256",
            curve.len()
        )));
    }
    if !v.same_grid(grid) {
        return Err(Error::Config("field and grid resolutions differ".into()));
    }
    let it = grid.spectral.interpolant(&v.comp_theta, 1e-14);
    let ip = grid.spectral.interpolant(&v.comp_phi, 1e-14);
    let (td, pd) = curve.tangents();
    let n = curve.len();
    let vals = (0..n).map(|k| {
        let (th, ph) = (curve.theta[k], curve.phi[k]);
        let (_, et, ep) = grid.surface.position_and_tangents(th, ph);
        let (gtt, gtp, gpp) = (dot3(et, et), dot3(et, ep), dot3(ep, ep));
        let vt = it.eval(th, ph);
        let vp = ip.eval(th, ph);
        gtt * vt * td[k] + gtp * (vt * pd[k] + vp * td[k]) + gpp * vp * pd[k]
    });
    Ok(compensated_sum(vals) / n as f64)
}

/// Circulation of an ambient (3-D) vector field along a chart curve.
pub fn line_integral_ambient(
    surface: &FourierTorus,
    field: impl Fn(Vec3) -> Vec3,
    curve: &ChartCurve,
) -> f64 {
    let (td, pd) = curve.tangents();
    let n = curve.len();
    let vals = (0..n).map(|k| {
        let (x, et, ep) = surface.position_and_tangents(curve.theta[k], curve.phi[k]);
        let w = field(x);
        dot3(w, et) * td[k] + dot3(w, ep) * pd[k]
    });
    compensated_sum(vals) / n as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::build_grid;
    use std::f64::consts::PI;

    #[test]
    fn circulation_of_toroidal_field_on_sigma_t() {
        // e_phi/rho around the theta = pi coordinate circle gives 2 pi;
        // 1/rho^2 needs the full 64-mode band for its spectral tail
        let g = build_grid(&FourierTorus::standard(), 64, 64).unwrap();
        let v = TangentField::from_ambient(&g, |x| {
            let rho2 = x[0] * x[0] + x[1] * x[1];
            [-x[1] / rho2, x[0] / rho2, 0.0]
        });
        let curve = ChartCurve::line(PI, 0.0, 0.0, TAU, 512);
        let val = line_integral(&g, &v, &curve).unwrap();
        assert!((val - TAU).abs() < 1e-8, "{val}");
        // and zero along a poloidal circle
        let pol = ChartCurve::line(0.0, 0.0, TAU, 0.0, 512);
        assert!(line_integral(&g, &v, &pol).unwrap().abs() < 1e-10);
    }

    #[test]
    fn chart_inversion_round_trip() {
        let g = build_grid(&FourierTorus::rotating_ellipse(), 32, 48).unwrap();
        let curve = ChartCurve::line(0.3, 1.1, -TAU, TAU, 300);
        let pts = curve.positions(&g.surface);
        let back = ChartCurve::from_points_3d(&g, &pts, 1e-9).unwrap();
        assert_eq!(back.theta_winding, -TAU);
        assert_eq!(back.phi_winding, TAU);
        for k in 0..pts.len() {
            assert!(crate::math::angle_diff(back.theta[k], curve.theta[k]).abs() < 1e-9);
            assert!(crate::math::angle_diff(back.phi[k], curve.phi[k]).abs() < 1e-9);
        }
    }

    #[test]
    fn off_surface_points_rejected() {
        let g = build_grid(&FourierTorus::standard(), 16, 16).unwrap();
        let pts: Vec<Vec3> = (0..32)
            .map(|k| {
                let a = TAU * k as f64 / 32.0;
                [5.0 * a.cos(), 5.0 * a.sin(), 0.0]
            })
            .collect();
        assert!(ChartCurve::from_points_3d(&g, &pts, 1e-9).is_err());
    }
}
