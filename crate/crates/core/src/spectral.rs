//! 2-D Fourier machinery on the uniform (theta, phi) tensor grid.
//!
//! Fields are stored row-major with theta as the slow index:
//! `idx = i_theta * n_phi + i_phi`. All derivatives, half-grid shifts and
//! off-grid evaluations go through the DFT, so they are spectrally accurate
//! for smooth periodic data. Odd-derivative multipliers zero the Nyquist mode,
//! which keeps differentiation real and exactly skew-symmetric; shifts and
//! point evaluation drop the Nyquist band as well.

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

#[derive(Clone)]
pub struct Spectral2D {
    pub n_theta: usize,
    pub n_phi: usize,
    fwd_theta: Arc<dyn Fft<f64>>,
    inv_theta: Arc<dyn Fft<f64>>,
    fwd_phi: Arc<dyn Fft<f64>>,
    inv_phi: Arc<dyn Fft<f64>>,
}

/// Signed integer frequency for bin `i` of an `n`-point DFT.
#[inline]
pub fn freq(i: usize, n: usize) -> i64 {
    if 2 * i < n {
        i as i64
    } else {
        i as i64 - n as i64
    }
}

impl Spectral2D {
    pub fn new(n_theta: usize, n_phi: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            n_theta,
            n_phi,
            fwd_theta: planner.plan_fft_forward(n_theta),
            inv_theta: planner.plan_fft_inverse(n_theta),
            fwd_phi: planner.plan_fft_forward(n_phi),
            inv_phi: planner.plan_fft_inverse(n_phi),
        }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.n_theta * self.n_phi
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Forward 2-D DFT of a real field, normalised so that
    /// `f(theta,phi) = sum_{m,k} c[m,k] exp(i(m theta + k phi))`.
    pub fn forward(&self, f: &[f64]) -> Vec<Complex64> {
        assert_eq!(f.len(), self.len());
        let (nt, np) = (self.n_theta, self.n_phi);
        let mut data: Vec<Complex64> = f.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        // phi direction: rows are contiguous
        for row in data.chunks_exact_mut(np) {
            self.fwd_phi.process(row);
        }
        // theta direction: gather strided columns
        let mut col = vec![Complex64::default(); nt];
        for j in 0..np {
            for i in 0..nt {
                col[i] = data[i * np + j];
            }
            self.fwd_theta.process(&mut col);
            for i in 0..nt {
                data[i * np + j] = col[i];
            }
        }
        let scale = 1.0 / (nt * np) as f64;
        for c in &mut data {
            *c *= scale;
        }
        data
    }

    /// Inverse of [`forward`]; returns the real part.
    pub fn inverse(&self, coeffs: &[Complex64]) -> Vec<f64> {
        assert_eq!(coeffs.len(), self.len());
        let (nt, np) = (self.n_theta, self.n_phi);
        let mut data = coeffs.to_vec();
        let mut col = vec![Complex64::default(); nt];
        for j in 0..np {
            for i in 0..nt {
                col[i] = data[i * np + j];
            }
            self.inv_theta.process(&mut col);
            for i in 0..nt {
                data[i * np + j] = col[i];
            }
        }
        for row in data.chunks_exact_mut(np) {
            self.inv_phi.process(row);
        }
        data.iter().map(|c| c.re).collect()
    }

    fn derivative(&self, f: &[f64], wrt_theta: bool) -> Vec<f64> {
        let (nt, np) = (self.n_theta, self.n_phi);
        let mut c = self.forward(f);
        for i in 0..nt {
            let m = freq(i, nt);
            for j in 0..np {
                let k = freq(j, np);
                let q = if wrt_theta { m } else { k };
                // zero the Nyquist bin so the derivative stays real and skew-adjoint
                let nyq = if wrt_theta {
                    nt % 2 == 0 && i == nt / 2
                } else {
                    np % 2 == 0 && j == np / 2
                };
                let idx = i * np + j;
                c[idx] = if nyq {
                    Complex64::default()
                } else {
                    c[idx] * Complex64::new(0.0, q as f64)
                };
            }
        }
        self.inverse(&c)
    }

    /// d/dtheta by Fourier multiplier.
    pub fn d_theta(&self, f: &[f64]) -> Vec<f64> {
        self.derivative(f, true)
    }

    /// d/dphi by Fourier multiplier.
    pub fn d_phi(&self, f: &[f64]) -> Vec<f64> {
        self.derivative(f, false)
    }

    /// Resample `f` on the grid shifted by (d_theta, d_phi). Nyquist bins are
    /// dropped (trigonometric interpolation on the open band).
    pub fn shifted(&self, f: &[f64], d_theta: f64, d_phi: f64) -> Vec<f64> {
        let (nt, np) = (self.n_theta, self.n_phi);
        let mut c = self.forward(f);
        for i in 0..nt {
            let m = freq(i, nt);
            let nyq_t = nt % 2 == 0 && i == nt / 2;
            for j in 0..np {
                let k = freq(j, np);
                let nyq_p = np % 2 == 0 && j == np / 2;
                let idx = i * np + j;
                if nyq_t || nyq_p {
                    c[idx] = Complex64::default();
                } else {
                    let phase = m as f64 * d_theta + k as f64 * d_phi;
                    c[idx] *= Complex64::from_polar(1.0, phase);
                }
            }
        }
        self.inverse(&c)
    }

    /// Build a compressed trigonometric interpolant of `f`. Modes below
    /// `rel_cutoff` times the largest coefficient magnitude are discarded.
    pub fn interpolant(&self, f: &[f64], rel_cutoff: f64) -> Interpolant {
        let (nt, np) = (self.n_theta, self.n_phi);
        let c = self.forward(f);
        let max_mag = c.iter().map(|z| z.norm()).fold(0.0_f64, f64::max);
        let cut = max_mag * rel_cutoff;
        let mut terms = Vec::new();
        let mut constant = 0.0;
        for i in 0..nt {
            let m = freq(i, nt);
            if nt % 2 == 0 && i == nt / 2 {
                continue;
            }
            for j in 0..np {
                let k = freq(j, np);
                if np % 2 == 0 && j == np / 2 {
                    continue;
                }
                let z = c[i * np + j];
                if m == 0 && k == 0 {
                    constant = z.re;
                    continue;
                }
                // keep one representative of each Hermitian pair
                if k < 0 || (k == 0 && m < 0) {
                    continue;
                }
                if z.norm() > cut {
                    terms.push(SpectralTerm {
                        m: m as f64,
                        k: k as f64,
                        re: z.re,
                        im: z.im,
                    });
                }
            }
        }
        Interpolant { constant, terms }
    }
}

#[derive(Debug, Clone, Copy)]
struct SpectralTerm {
    m: f64,
    k: f64,
    re: f64,
    im: f64,
}

/// Compressed band-limited evaluator `f(theta, phi)`, one Hermitian
/// representative per retained mode.
#[derive(Debug, Clone)]
pub struct Interpolant {
    constant: f64,
    terms: Vec<SpectralTerm>,
}

impl Interpolant {
    #[inline]
    pub fn eval(&self, theta: f64, phi: f64) -> f64 {
        let mut acc = self.constant;
        for t in &self.terms {
            let arg = t.m * theta + t.k * phi;
            let (s, c) = arg.sin_cos();
            acc += 2.0 * (t.re * c - t.im * s);
        }
        acc
    }

    pub fn n_terms(&self) -> usize {
        self.terms.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::TAU;

    fn grid_fn(nt: usize, np: usize, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        let mut out = Vec::with_capacity(nt * np);
        for i in 0..nt {
            let th = TAU * i as f64 / nt as f64;
            for j in 0..np {
                let ph = TAU * j as f64 / np as f64;
                out.push(f(th, ph));
            }
        }
        out
    }

    #[test]
    fn derivative_exact_on_band_limited() {
        let (nt, np) = (16, 12);
        let sp = Spectral2D::new(nt, np);
        let f = grid_fn(nt, np, |t, p| (2.0 * t - 3.0 * p).sin() + (t).cos());
        let ft = sp.d_theta(&f);
        let fp = sp.d_phi(&f);
        let ft_ref = grid_fn(nt, np, |t, p| 2.0 * (2.0 * t - 3.0 * p).cos() - t.sin());
        let fp_ref = grid_fn(nt, np, |t, p| -3.0 * (2.0 * t - 3.0 * p).cos());
        for i in 0..nt * np {
            assert!((ft[i] - ft_ref[i]).abs() < 1e-12, "d_theta mismatch");
            assert!((fp[i] - fp_ref[i]).abs() < 1e-12, "d_phi mismatch");
        }
    }

    #[test]
    fn shift_matches_exact_translation() {
        let (nt, np) = (16, 16);
        let sp = Spectral2D::new(nt, np);
        let f = grid_fn(nt, np, |t, p| (3.0 * t + p).cos() + 0.5 * (2.0 * p).sin());
        let (dt, dp) = (TAU / (2.0 * nt as f64), TAU / (2.0 * np as f64));
        let g = sp.shifted(&f, dt, dp);
        let g_ref = grid_fn(nt, np, |t, p| {
            (3.0 * (t + dt) + (p + dp)).cos() + 0.5 * (2.0 * (p + dp)).sin()
        });
        for i in 0..nt * np {
            assert!((g[i] - g_ref[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn interpolant_reproduces_off_grid_values() {
        let (nt, np) = (24, 24);
        let sp = Spectral2D::new(nt, np);
        let func = |t: f64, p: f64| 1.3 + (t - 2.0 * p).sin() + 0.2 * (3.0 * t).cos();
        let f = grid_fn(nt, np, func);
        let itp = sp.interpolant(&f, 1e-13);
        for &(t, p) in &[(0.13, 5.1), (2.7, 0.02), (4.4, 3.3)] {
            assert!((itp.eval(t, p) - func(t, p)).abs() < 1e-11);
        }
    }
}
