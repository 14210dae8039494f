//! Adaptive Dormand-Prince 5(4) integrator with step callbacks.

use crate::error::{Error, Result};

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
// 5th-order weights (also the last stage position: FSAL)
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// embedded 4th-order weights
const E1: f64 = 5179.0 / 57600.0;
const E3: f64 = 7571.0 / 16695.0;
const E4: f64 = 393.0 / 640.0;
const E5: f64 = -92097.0 / 339200.0;
const E6: f64 = 187.0 / 2100.0;
const E7: f64 = 1.0 / 40.0;

#[derive(Debug, Clone, Copy)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub max_step: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self { rtol: 1e-10, atol: 1e-12, max_step: f64::INFINITY, max_steps: 2_000_000 }
    }
}

#[derive(Debug, Default, Clone, Copy)]
pub struct OdeStats {
    pub accepted: usize,
    pub rejected: usize,
    pub f_evals: usize,
}

/// One accepted step handed to the callback.
pub struct AcceptedStep<'a> {
    pub t0: f64,
    pub t1: f64,
    pub y0: &'a [f64],
    pub y1: &'a [f64],
    pub f0: &'a [f64],
    pub f1: &'a [f64],
}

impl AcceptedStep<'_> {
    /// Cubic Hermite interpolation of component `c` at time `t` in [t0, t1].
    pub fn interpolate(&self, c: usize, t: f64) -> f64 {
        let h = self.t1 - self.t0;
        let s = (t - self.t0) / h;
        let (s2, s3) = (s * s, s * s * s);
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        h00 * self.y0[c] + h10 * h * self.f0[c] + h01 * self.y1[c] + h11 * h * self.f1[c]
    }
}

pub enum StepControl {
    Continue,
    Stop,
}

/// Integrate `dy/dt = f(t, y)` from `t0` to `t_end` (t_end > t0), invoking
/// `on_step` after every accepted step. The callback may stop the run early.
pub fn integrate<F, C>(
    f: F,
    t0: f64,
    y0: &[f64],
    t_end: f64,
    opts: &OdeOptions,
    mut on_step: C,
) -> Result<(f64, Vec<f64>, OdeStats)>
where
    F: Fn(f64, &[f64], &mut [f64]),
    C: FnMut(&AcceptedStep) -> StepControl,
{
    let dim = y0.len();
    let mut stats = OdeStats::default();
    let mut t = t0;
    let mut y = y0.to_vec();
    let mut k1 = vec![0.0; dim];
    f(t, &y, &mut k1);
    stats.f_evals += 1;

    // initial step from the derivative scale
    let y_scale: f64 = y.iter().map(|v| v.abs()).fold(opts.atol, f64::max);
    let f_scale: f64 = k1.iter().map(|v| v.abs()).fold(1e-30, f64::max);
    let mut h = (0.01 * y_scale.max(1.0) / f_scale)
        .min(opts.max_step)
        .min(t_end - t0);

    let mut k2 = vec![0.0; dim];
    let mut k3 = vec![0.0; dim];
    let mut k4 = vec![0.0; dim];
    let mut k5 = vec![0.0; dim];
    let mut k6 = vec![0.0; dim];
    let mut k7 = vec![0.0; dim];
    let mut ytmp = vec![0.0; dim];
    let mut ynew = vec![0.0; dim];

    while t < t_end {
        if stats.accepted + stats.rejected >= opts.max_steps {
            return Err(Error::Tracing(format!(
                "integrator exceeded {} steps at t={t:.6e} (step size {h:.3e}); likely stagnation at a field zero",
                opts.max_steps
            )));
        }
        h = h.min(t_end - t);
        if h < 1e-14 * (1.0 + t.abs()) {
            return Err(Error::Tracing(format!(
                "step size collapsed at t={t:.6e}; likely stagnation at a field zero"
            )));
        }

        for i in 0..dim {
            ytmp[i] = y[i] + h * A21 * k1[i];
        }
        f(t + h / 5.0, &ytmp, &mut k2);
        for i in 0..dim {
            ytmp[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i]);
        }
        f(t + 3.0 * h / 10.0, &ytmp, &mut k3);
        for i in 0..dim {
            ytmp[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
        }
        f(t + 4.0 * h / 5.0, &ytmp, &mut k4);
        for i in 0..dim {
            ytmp[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
        }
        f(t + 8.0 * h / 9.0, &ytmp, &mut k5);
        for i in 0..dim {
            ytmp[i] =
                y[i] + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
        }
        f(t + h, &ytmp, &mut k6);
        for i in 0..dim {
            ynew[i] = y[i] + h * (B1 * k1[i] + B3 * k3[i] + B4 * k4[i] + B5 * k5[i] + B6 * k6[i]);
        }
        f(t + h, &ynew, &mut k7);
        stats.f_evals += 6;

        // embedded error estimate
        let mut err = 0.0_f64;
        for i in 0..dim {
            let y4 = y[i]
                + h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            let sc = opts.atol + opts.rtol * y[i].abs().max(ynew[i].abs());
            let e = (ynew[i] - y4) / sc;
            err += e * e;
        }
        err = (err / dim as f64).sqrt();

        if err <= 1.0 {
            let step = AcceptedStep { t0: t, t1: t + h, y0: &y, y1: &ynew, f0: &k1, f1: &k7 };
            let control = on_step(&step);
            t += h;
            std::mem::swap(&mut y, &mut ynew);
            std::mem::swap(&mut k1, &mut k7); // FSAL
            stats.accepted += 1;
            if let StepControl::Stop = control {
                break;
            }
        } else {
            stats.rejected += 1;
        }
        let factor = if err > 0.0 {
            (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
        } else {
            5.0
        };
        h = (h * factor).min(opts.max_step);
    }
    Ok((t, y, stats))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integrates_circular_motion_to_tolerance() {
        let opts = OdeOptions::default();
        let f = |_t: f64, y: &[f64], dy: &mut [f64]| {
            dy[0] = -y[1];
            dy[1] = y[0];
        };
        let (t, y, stats) =
            integrate(f, 0.0, &[1.0, 0.0], 10.0 * std::f64::consts::TAU, &opts, |_| {
                StepControl::Continue
            })
            .unwrap();
        assert!((t - 10.0 * std::f64::consts::TAU).abs() < 1e-12);
        assert!((y[0] - 1.0).abs() < 1e-7, "{y:?} after {stats:?}");
        assert!(y[1].abs() < 1e-7);
    }

    #[test]
    fn hermite_interpolation_is_consistent() {
        // cubic Hermite error scales like h^4/384 * |y''''|
        let h = 0.05;
        let opts = OdeOptions { max_step: h, ..Default::default() };
        let f = |t: f64, _y: &[f64], dy: &mut [f64]| {
            dy[0] = t.cos();
        };
        let mut worst = 0.0_f64;
        integrate(f, 0.0, &[0.0], 3.0, &opts, |s| {
            let tm = 0.5 * (s.t0 + s.t1);
            worst = worst.max((s.interpolate(0, tm) - tm.sin()).abs());
            StepControl::Continue
        })
        .unwrap();
        let bound = 2.0 * h.powi(4) / 384.0;
        assert!(worst < bound, "hermite error {worst:.2e} vs bound {bound:.2e}");
    }
}
