//! Field-line tracing, asymptotic winding numbers, rotational transform and
//! the winding formulas for helicity.

use crate::error::{Error, Result};
use crate::fields::{inner_product, norm, TangentField};
use crate::geometry::SurfaceGrid;
use crate::harmonic::HarmonicBasis;
use crate::neumann;
use crate::ode::{integrate, AcceptedStep, OdeOptions, OdeStats, StepControl};
use crate::spectral::Interpolant;
use std::f64::consts::TAU;

/// A traced field line in unwrapped chart coordinates.
#[derive(Debug, Clone)]
pub struct FieldLine {
    pub times: Vec<f64>,
    pub theta: Vec<f64>,
    pub phi: Vec<f64>,
    pub stats: OdeStats,
}

impl FieldLine {
    pub fn start(&self) -> (f64, f64) {
        (self.theta[0], self.phi[0])
    }

    pub fn end(&self) -> (f64, f64) {
        (*self.theta.last().unwrap(), *self.phi.last().unwrap())
    }

    pub fn duration(&self) -> f64 {
        *self.times.last().unwrap() - self.times[0]
    }
}

/// Spectral interpolants of the contravariant components of a field.
pub struct FieldInterpolant {
    pub comp_theta: Interpolant,
    pub comp_phi: Interpolant,
}

impl FieldInterpolant {
    pub fn new(grid: &SurfaceGrid, v: &TangentField) -> Self {
        Self {
            comp_theta: grid.spectral.interpolant(&v.comp_theta, 1e-13),
            comp_phi: grid.spectral.interpolant(&v.comp_phi, 1e-13),
        }
    }

    #[inline]
    pub fn eval(&self, theta: f64, phi: f64) -> (f64, f64) {
        (self.comp_theta.eval(theta, phi), self.comp_phi.eval(theta, phi))
    }
}

fn tracing_options() -> OdeOptions {
    OdeOptions { rtol: 1e-10, atol: 1e-12, max_step: 0.5, max_steps: 40_000_000 }
}

/// Integrate the chart flow `(theta-dot, phi-dot) = (v^theta, v^phi)` for a
/// time `t_end`, storing every accepted step (unwrapped angles).
pub fn trace_field_line(
    grid: &SurfaceGrid,
    v: &TangentField,
    start: (f64, f64),
    t_end: f64,
) -> Result<FieldLine> {
    if t_end <= 0.0 {
        return Err(Error::Config("trace duration must be positive".into()));
    }
    let itp = FieldInterpolant::new(grid, v);
    let speed_scale = v.sup_norm(grid);
    let (vt0, vp0) = itp.eval(start.0, start.1);
    if (vt0.abs() + vp0.abs()) < 1e-14 * speed_scale.max(1e-300) {
        return Err(Error::Tracing("field vanishes at the start point".into()));
    }
    let mut times = vec![0.0];
    let mut theta = vec![start.0];
    let mut phi = vec![start.1];
    let rhs = |_t: f64, y: &[f64], dy: &mut [f64]| {
        let (vt, vp) = itp.eval(y[0], y[1]);
        dy[0] = vt;
        dy[1] = vp;
    };
    let (_, _, stats) = integrate(rhs, 0.0, &[start.0, start.1], t_end, &tracing_options(), |s| {
        times.push(s.t1);
        theta.push(s.y1[0]);
        phi.push(s.y1[1]);
        StepControl::Continue
    })?;
    Ok(FieldLine { times, theta, phi, stats })
}

/// Finite-horizon estimate of the weighted asymptotic windings of the field
/// line through `start`, with a tail-based error estimate.
#[derive(Debug, Clone, Copy)]
pub struct WindingEstimate {
    pub q_hat: f64,
    pub p_hat: f64,
    /// Relative change of the running averages over the final octave of time.
    pub tail_change: f64,
    pub converged: bool,
}

/// Time-average `(1/T) int v.gamma_t` and `(1/T) int v.gamma_p` along the
/// traced line, by augmenting the flow with the two quadratures.
pub fn asymptotic_windings(
    grid: &SurfaceGrid,
    v: &TangentField,
    basis: &HarmonicBasis,
    start: (f64, f64),
    t_end: f64,
) -> Result<WindingEstimate> {
    let itp = FieldInterpolant::new(grid, v);
    let f_q = grid
        .spectral
        .interpolant(&v.pointwise_dot(grid, &basis.gamma_t), 1e-13);
    let f_p = grid
        .spectral
        .interpolant(&v.pointwise_dot(grid, &basis.gamma_p), 1e-13);
    let rhs = |_t: f64, y: &[f64], dy: &mut [f64]| {
        let (vt, vp) = itp.eval(y[0], y[1]);
        dy[0] = vt;
        dy[1] = vp;
        dy[2] = f_q.eval(y[0], y[1]);
        dy[3] = f_p.eval(y[0], y[1]);
    };
    // snapshot the half-time averages for the tail estimate
    let t_half = 0.5 * t_end;
    let mut half: Option<(f64, f64)> = None;
    let (t_fin, y_fin, _) = integrate(
        rhs,
        0.0,
        &[start.0, start.1, 0.0, 0.0],
        t_end,
        &tracing_options(),
        |s| {
            if half.is_none() && s.t1 >= t_half {
                half = Some((s.interpolate(2, t_half) / t_half, s.interpolate(3, t_half) / t_half));
            }
            StepControl::Continue
        },
    )?;
    let q_hat = y_fin[2] / t_fin;
    let p_hat = y_fin[3] / t_fin;
    let (qh, ph) = half.unwrap_or((q_hat, p_hat));
    let scale = q_hat.abs().max(p_hat.abs()).max(1e-30);
    let tail_change = ((q_hat - qh).abs().max((p_hat - ph).abs())) / scale;
    Ok(WindingEstimate { q_hat, p_hat, tail_change, converged: tail_change < 1e-3 })
}

/// Surface-average windings `(Q_bar, P_bar)` by quadrature of `v.gamma_t` and
/// `v.gamma_p` over the surface.
pub fn average_windings(grid: &SurfaceGrid, v: &TangentField, basis: &HarmonicBasis) -> (f64, f64) {
    let area = grid.area();
    (
        inner_product(grid, v, &basis.gamma_t) / area,
        inner_product(grid, v, &basis.gamma_p) / area,
    )
}

/// Rotational transform by the ratio of surface integrals,
/// `iota = <w, gamma_p> / <w, gamma_t>`. Undefined when `Q_bar(w)` vanishes.
pub fn iota_formula(grid: &SurfaceGrid, w: &TangentField, basis: &HarmonicBasis) -> Result<f64> {
    let area = grid.area();
    let q = inner_product(grid, w, &basis.gamma_t);
    let p = inner_product(grid, w, &basis.gamma_p);
    let scale = norm(grid, w) * norm(grid, &basis.gamma_t) / area.sqrt();
    if (q / area).abs() <= 1e-10 * scale.max(1e-300) {
        return Err(Error::UndefinedIota(format!(
            "Q_bar = {:.3e} vanishes; rotational transform undefined",
            q / area
        )));
    }
    Ok(p / q)
}

/// Physical rotational transform by transit counting: unwrapped poloidal
/// angle accumulated over `n_transits` toroidal transits, measured against
/// the canonical curve orientations.
///
/// Requires transversality: the toroidal velocity must keep the sign of the
/// toroidal curve orientation along the whole trace.
pub fn iota_traced(
    grid: &SurfaceGrid,
    v: &TangentField,
    basis: &HarmonicBasis,
    start: (f64, f64),
    n_transits: usize,
) -> Result<f64> {
    if n_transits == 0 {
        return Err(Error::Config("need at least one toroidal transit".into()));
    }
    let orient_p = basis.curves.orient_p;
    let orient_t = basis.curves.orient_t;
    let itp = FieldInterpolant::new(grid, v);
    let rhs = |_t: f64, y: &[f64], dy: &mut [f64]| {
        let (vt, vp) = itp.eval(y[0], y[1]);
        dy[0] = vt;
        dy[1] = vp;
    };
    let phi_target = start.1 + orient_t * TAU * n_transits as f64;
    let mut theta_at_target: Option<f64> = None;
    let mut transversality: Option<String> = None;
    // generous time cap; the callback stops the run at the final transit
    let speed = v.sup_norm(grid);
    let t_cap = 1e4 * TAU * (n_transits as f64 + 1.0)
        * (grid.area().sqrt() / speed.max(1e-300)).max(1.0);
    integrate(rhs, 0.0, &[start.0, start.1], t_cap, &tracing_options(), |s: &AcceptedStep| {
        // transversality check on the step endpoints
        if s.f0[1] * orient_t <= 0.0 || s.f1[1] * orient_t <= 0.0 {
            transversality = Some(format!(
                "toroidal velocity changed sign near t={:.4e}",
                s.t0
            ));
            return StepControl::Stop;
        }
        let passed = (s.y1[1] - phi_target) * orient_t >= 0.0;
        if passed {
            // locate the crossing time inside the step by bisection on the
            // Hermite interpolant (phi is monotone within the step)
            let (mut lo, mut hi) = (s.t0, s.t1);
            for _ in 0..80 {
                let mid = 0.5 * (lo + hi);
                if (s.interpolate(1, mid) - phi_target) * orient_t >= 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            theta_at_target = Some(s.interpolate(0, 0.5 * (lo + hi)));
            return StepControl::Stop;
        }
        StepControl::Continue
    })?;
    if let Some(msg) = transversality {
        return Err(Error::Transversality(msg));
    }
    let theta_end = theta_at_target.ok_or_else(|| {
        Error::Tracing("trace ended before completing the requested transits".into())
    })?;
    let d_theta = theta_end - start.0;
    Ok(orient_p * d_theta / (TAU * n_transits as f64))
}

/// Helicity from the surface-average winding formula.
///
/// With the purely toroidal canonical curve the bracket term vanishes and
/// `H(v) = |Sigma|^2 Q_bar P_bar (int_{sigma_t} gamma)(int_{sigma_p} gamma_tilde)`.
/// For a toroidal curve composed with poloidal turns the bracket
/// `[H(gamma) (int_{sigma_t} gamma)^2 + int_{sigma_t} gamma int_{sigma_t}
/// gamma_tilde] Q_bar^2` is restored, which requires `H(gamma)`.
pub fn helicity_from_windings(
    grid: &SurfaceGrid,
    v: &TangentField,
    basis: &HarmonicBasis,
    h_gamma: Option<f64>,
) -> Result<f64> {
    let (q_bar, p_bar) = average_windings(grid, v, basis);
    let area = grid.area();
    let it_gamma = basis.periods.gamma.1;
    let ip_gtilde = basis.periods.gamma_tilde.0;
    let main = q_bar * p_bar * it_gamma * ip_gtilde;
    let bracket = if basis.curves.extra_poloidal_turns == 0 {
        0.0
    } else {
        let h = h_gamma.ok_or_else(|| {
            Error::Config(
                "composite toroidal curve: helicity-from-windings needs H(gamma)".into(),
            )
        })?;
        let it_gtilde = basis.periods.gamma_tilde.1;
        (h * it_gamma * it_gamma + it_gamma * it_gtilde) * q_bar * q_bar
    };
    Ok(area * area * (main + bracket))
}

/// Axisymmetric flux route: `H(v)/|Sigma|^2 = Q_bar P_bar (int_{sigma_t}
/// Gamma) Flux(Gamma) / |Gamma|^2_{L2(Omega)}` with the explicit harmonic
/// Neumann field `Gamma = Y/|Y|^2`. Only valid on axisymmetric surfaces.
pub fn helicity_axisymmetric_flux_route(
    grid: &SurfaceGrid,
    v: &TangentField,
    basis: &HarmonicBasis,
) -> Result<f64> {
    if grid.surface.modes.iter().any(|m| m.n != 0) {
        return Err(Error::Config(
            "flux route requires an axisymmetric surface".into(),
        ));
    }
    let (q_bar, p_bar) = average_windings(grid, v, basis);
    let area = grid.area();
    let curves = &basis.curves;
    let circ = neumann::gamma_circulation(&grid.surface, &curves.sigma_t());
    let flux = neumann::gamma_poloidal_flux(&grid.surface, curves.phi_p, curves.orient_p, 32, 128);
    let vol_norm_sq = neumann::gamma_volume_norm_sq(&grid.surface, 32, 128, 8);
    Ok(area * area * q_bar * p_bar * circ * flux / vol_norm_sq)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_grid, FourierTorus};
    use crate::harmonic::{harmonic_basis, CanonicalCurves};

    fn standard_setup(n: usize) -> (SurfaceGrid, HarmonicBasis) {
        let g = build_grid(&FourierTorus::standard(), n, n).unwrap();
        let basis = harmonic_basis(&g, &CanonicalCurves::standard(&g)).unwrap();
        (g, basis)
    }

    /// unit toroidal field e_phi-hat
    fn unit_toroidal(g: &SurfaceGrid) -> TangentField {
        TangentField::from_ambient(g, |x| {
            let rho = (x[0] * x[0] + x[1] * x[1]).sqrt();
            [-x[1] / rho, x[0] / rho, 0.0]
        })
    }

    #[test]
    fn purely_toroidal_transit_time() {
        // v = e_phi-hat from theta=0: one transit takes 2 pi rho = 6 pi
        let (g, _) = standard_setup(32);
        let v = unit_toroidal(&g);
        let line = trace_field_line(&g, &v, (0.0, 0.0), 6.0 * std::f64::consts::PI).unwrap();
        let (th_end, ph_end) = line.end();
        assert!((ph_end - TAU).abs() < 1e-8, "phi after 6pi: {ph_end}");
        assert!((th_end - 0.0).abs() < 1e-9, "theta drifted: {th_end}");
    }

    #[test]
    fn stagnation_is_reported() {
        let (g, _) = standard_setup(16);
        let v = TangentField::zeros(&g);
        assert!(matches!(
            trace_field_line(&g, &v, (0.1, 0.2), 1.0),
            Err(Error::Tracing(_))
        ));
    }

    #[test]
    fn toroidal_field_windings() {
        let (g, basis) = standard_setup(32);
        let v = unit_toroidal(&g);
        // p_hat = 0 pointwise; q_hat = 1/(2 pi rho(theta0)) on the line
        let est = asymptotic_windings(&g, &v, &basis, (0.0, 0.3), 200.0).unwrap();
        assert!(est.p_hat.abs() < 1e-8, "p_hat = {}", est.p_hat);
        let expected_q = 1.0 / (TAU * 3.0); // rho = 3 on the theta=0 line
        assert!(
            (est.q_hat - expected_q).abs() < 1e-6,
            "q_hat {} vs {}",
            est.q_hat,
            expected_q
        );
        // closed line: q_hat = Q / period with Q = 1, period = 6 pi
        assert!((est.q_hat - 1.0 / (6.0 * std::f64::consts::PI)).abs() < 1e-6);

        let (q_bar, p_bar) = average_windings(&g, &v, &basis);
        assert!((q_bar - 1.0 / (4.0 * std::f64::consts::PI)).abs() < 1e-8);
        assert!(p_bar.abs() < 1e-10);

        // iota = 0 for a purely toroidal field
        assert!(iota_formula(&g, &v, &basis).unwrap().abs() < 1e-10);
        let it = iota_traced(&g, &v, &basis, (0.0, 0.0), 3).unwrap();
        assert!(it.abs() < 1e-10);
    }

    #[test]
    fn simple_current_example_has_zero_average_windings() {
        // j = sin(theta) e_phi-hat is divergence-free with Q_bar = 0
        let (g, basis) = standard_setup(32);
        let j = TangentField::from_ambient(&g, |x| {
            let rho = (x[0] * x[0] + x[1] * x[1]).sqrt();
            let z = x[2];
            // sin(theta) = z / r on the standard torus (r = 1)
            [-x[1] / rho * z, x[0] / rho * z, 0.0]
        });
        assert!(crate::calculus::weak_divergence_residual(&g, &j) < 1e-9);
        let (q_bar, _) = average_windings(&g, &j, &basis);
        assert!(q_bar.abs() < 1e-10, "Q_bar = {q_bar}");
        // iota is undefined for such a field
        assert!(matches!(
            iota_formula(&g, &j, &basis),
            Err(Error::UndefinedIota(_))
        ));
    }

    #[test]
    fn poloidal_field_iota_errors() {
        let (g, basis) = standard_setup(32);
        let v = unit_toroidal(&g).cross_normal(&g);
        assert!(matches!(
            iota_formula(&g, &v, &basis),
            Err(Error::UndefinedIota(_))
        ));
        assert!(matches!(
            iota_traced(&g, &v, &basis, (0.2, 0.1), 2),
            Err(Error::Transversality(_))
        ));
    }

    #[test]
    fn gamma_tilde_has_zero_average_toroidal_winding() {
        let (g, basis) = standard_setup(32);
        let (q_bar, _) = average_windings(&g, &basis.gamma_tilde, &basis);
        assert!(q_bar.abs() < 1e-10);
    }
}
