//! Scalar and tangent fields sampled on a [`SurfaceGrid`].
//!
//! Tangent fields carry contravariant components, `v = v^theta e_theta +
//! v^phi e_phi`, so tangency is structural. All L2 pairings run through the
//! metric with compensated summation.

use crate::error::{Error, Result};
use crate::geometry::SurfaceGrid;
use crate::math::{add3, compensated_sum, scale3, Accumulator, Vec3};
use serde::{Deserialize, Serialize};
use std::io::{BufRead, Write};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct TangentField {
    pub n_theta: usize,
    pub n_phi: usize,
    /// Contravariant theta components, row-major.
    pub comp_theta: Vec<f64>,
    /// Contravariant phi components, row-major.
    pub comp_phi: Vec<f64>,
}

impl TangentField {
    pub fn zeros(grid: &SurfaceGrid) -> Self {
        Self {
            n_theta: grid.n_theta,
            n_phi: grid.n_phi,
            comp_theta: vec![0.0; grid.len()],
            comp_phi: vec![0.0; grid.len()],
        }
    }

    pub fn from_components(grid: &SurfaceGrid, vt: Vec<f64>, vp: Vec<f64>) -> Self {
        assert_eq!(vt.len(), grid.len());
        assert_eq!(vp.len(), grid.len());
        Self {
            n_theta: grid.n_theta,
            n_phi: grid.n_phi,
            comp_theta: vt,
            comp_phi: vp,
        }
    }

    /// Sample an ambient vector function and keep its tangential part.
    pub fn from_ambient(grid: &SurfaceGrid, f: impl Fn(Vec3) -> Vec3) -> Self {
        let n = grid.len();
        let mut vt = Vec::with_capacity(n);
        let mut vp = Vec::with_capacity(n);
        for i in 0..n {
            let w = f(grid.position[i]);
            let wt = crate::math::dot3(w, grid.e_theta[i]);
            let wp = crate::math::dot3(w, grid.e_phi[i]);
            let det = grid.g_tt[i] * grid.g_pp[i] - grid.g_tp[i] * grid.g_tp[i];
            vt.push((grid.g_pp[i] * wt - grid.g_tp[i] * wp) / det);
            vp.push((grid.g_tt[i] * wp - grid.g_tp[i] * wt) / det);
        }
        Self::from_components(grid, vt, vp)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.comp_theta.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.comp_theta.is_empty()
    }

    pub fn same_grid(&self, grid: &SurfaceGrid) -> bool {
        self.n_theta == grid.n_theta && self.n_phi == grid.n_phi
    }

    /// Ambient 3-vector at a node.
    #[inline]
    pub fn at(&self, grid: &SurfaceGrid, idx: usize) -> Vec3 {
        add3(
            scale3(grid.e_theta[idx], self.comp_theta[idx]),
            scale3(grid.e_phi[idx], self.comp_phi[idx]),
        )
    }

    /// Covariant components (v . e_theta, v . e_phi) at a node.
    #[inline]
    pub fn covariant(&self, grid: &SurfaceGrid, idx: usize) -> (f64, f64) {
        let vt = self.comp_theta[idx];
        let vp = self.comp_phi[idx];
        (
            grid.g_tt[idx] * vt + grid.g_tp[idx] * vp,
            grid.g_tp[idx] * vt + grid.g_pp[idx] * vp,
        )
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            n_theta: self.n_theta,
            n_phi: self.n_phi,
            comp_theta: self.comp_theta.iter().map(|x| x * s).collect(),
            comp_phi: self.comp_phi.iter().map(|x| x * s).collect(),
        }
    }

    /// `a*self + b*other`.
    pub fn linear_comb(&self, a: f64, other: &Self, b: f64) -> Self {
        assert_eq!(self.len(), other.len());
        Self {
            n_theta: self.n_theta,
            n_phi: self.n_phi,
            comp_theta: self
                .comp_theta
                .iter()
                .zip(&other.comp_theta)
                .map(|(x, y)| a * x + b * y)
                .collect(),
            comp_phi: self
                .comp_phi
                .iter()
                .zip(&other.comp_phi)
                .map(|(x, y)| a * x + b * y)
                .collect(),
        }
    }

    /// Pointwise Euclidean dot with another tangent field, as a scalar field.
    pub fn pointwise_dot(&self, grid: &SurfaceGrid, other: &Self) -> Vec<f64> {
        (0..self.len())
            .map(|i| {
                grid.g_tt[i] * self.comp_theta[i] * other.comp_theta[i]
                    + grid.g_tp[i]
                        * (self.comp_theta[i] * other.comp_phi[i]
                            + self.comp_phi[i] * other.comp_theta[i])
                    + grid.g_pp[i] * self.comp_phi[i] * other.comp_phi[i]
            })
            .collect()
    }

    /// Pointwise magnitude |v| as a scalar field.
    pub fn magnitude(&self, grid: &SurfaceGrid) -> Vec<f64> {
        self.pointwise_dot(grid, self)
            .iter()
            .map(|x| x.max(0.0).sqrt())
            .collect()
    }

    pub fn sup_norm(&self, grid: &SurfaceGrid) -> f64 {
        self.magnitude(grid).iter().fold(0.0_f64, |a, &b| a.max(b))
    }

    /// Cross product with the outward unit normal, `v x N`, staying in-chart.
    pub fn cross_normal(&self, grid: &SurfaceGrid) -> Self {
        let n = self.len();
        let h = grid.handedness;
        let mut vt = Vec::with_capacity(n);
        let mut vp = Vec::with_capacity(n);
        for i in 0..n {
            let (cov_t, cov_p) = self.covariant(grid, i);
            let s = h / grid.jacobian[i];
            vt.push(s * cov_p);
            vp.push(-s * cov_t);
        }
        Self::from_components(grid, vt, vp)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "i,j,v_theta,v_phi")?;
        for i in 0..self.n_theta {
            for j in 0..self.n_phi {
                let idx = i * self.n_phi + j;
                writeln!(
                    w,
                    "{i},{j},{:.17e},{:.17e}",
                    self.comp_theta[idx], self.comp_phi[idx]
                )?;
            }
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R, n_theta: usize, n_phi: usize) -> Result<Self> {
        let mut vt = vec![0.0; n_theta * n_phi];
        let mut vp = vec![0.0; n_theta * n_phi];
        let mut seen = 0usize;
        for (ln, line) in r.lines().enumerate() {
            let line = line?;
            if ln == 0 || line.trim().is_empty() {
                continue;
            }
            let parts: Vec<&str> = line.trim().split(',').collect();
            if parts.len() != 4 {
                return Err(Error::Config(format!("bad field row: {line}")));
            }
            let i: usize = parts[0].parse().map_err(|_| Error::Config(format!("bad index: {line}")))?;
            let j: usize = parts[1].parse().map_err(|_| Error::Config(format!("bad index: {line}")))?;
            if i >= n_theta || j >= n_phi {
                return Err(Error::Config(format!("index out of range: {line}")));
            }
            let idx = i * n_phi + j;
            vt[idx] = parts[2].parse().map_err(|_| Error::Config(format!("bad value: {line}")))?;
            vp[idx] = parts[3].parse().map_err(|_| Error::Config(format!("bad value: {line}")))?;
            seen += 1;
        }
        if seen != n_theta * n_phi {
            return Err(Error::Config(format!(
                "field table has {seen} rows, expected {}",
                n_theta * n_phi
            )));
        }
        Ok(Self { n_theta, n_phi, comp_theta: vt, comp_phi: vp })
    }
}

/// L2(Sigma) inner product of two tangent fields.
pub fn inner_product(grid: &SurfaceGrid, u: &TangentField, v: &TangentField) -> f64 {
    assert!(u.same_grid(grid) && v.same_grid(grid), "fields on different grids");
    let mut acc = Accumulator::new();
    for i in 0..grid.len() {
        let val = grid.g_tt[i] * u.comp_theta[i] * v.comp_theta[i]
            + grid.g_tp[i] * (u.comp_theta[i] * v.comp_phi[i] + u.comp_phi[i] * v.comp_theta[i])
            + grid.g_pp[i] * u.comp_phi[i] * v.comp_phi[i];
        acc.add(val * grid.weight(i));
    }
    acc.total()
}

/// L2(Sigma) norm.
pub fn norm(grid: &SurfaceGrid, v: &TangentField) -> f64 {
    inner_product(grid, v, v).max(0.0).sqrt()
}

/// L2 inner product of scalar fields.
pub fn scalar_inner_product(grid: &SurfaceGrid, f: &[f64], g: &[f64]) -> f64 {
    compensated_sum((0..grid.len()).map(|i| f[i] * g[i] * grid.weight(i)))
}

pub fn scalar_norm(grid: &SurfaceGrid, f: &[f64]) -> f64 {
    scalar_inner_product(grid, f, f).max(0.0).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_grid, FourierTorus};
    use crate::math::{dot3, norm3};

    #[test]
    fn cross_normal_is_isometry_and_orthogonal() {
        let g = build_grid(&FourierTorus::rotating_ellipse(), 24, 36).unwrap();
        let v = TangentField::from_ambient(&g, |x| [x[1], -x[2], x[0] * 0.3]);
        let w = v.cross_normal(&g);
        for i in 0..g.len() {
            let a = v.at(&g, i);
            let b = w.at(&g, i);
            assert!((norm3(a) - norm3(b)).abs() < 1e-10 * (1.0 + norm3(a)));
            assert!(dot3(a, b).abs() < 1e-10 * (1.0 + norm3(a) * norm3(a)));
            // w really is v x N
            let vxn = crate::math::cross3(a, g.normal[i]);
            for k in 0..3 {
                assert!((vxn[k] - b[k]).abs() < 1e-10 * (1.0 + norm3(a)));
            }
        }
        // double cross gives -v
        let ww = w.cross_normal(&g);
        for i in 0..g.len() {
            assert!((ww.comp_theta[i] + v.comp_theta[i]).abs() < 1e-12 * (1.0 + v.comp_theta[i].abs()));
            assert!((ww.comp_phi[i] + v.comp_phi[i]).abs() < 1e-12 * (1.0 + v.comp_phi[i].abs()));
        }
    }

    #[test]
    fn csv_round_trip() {
        let g = build_grid(&FourierTorus::standard(), 8, 8).unwrap();
        let v = TangentField::from_ambient(&g, |x| [-x[1], x[0], 0.1]);
        let mut buf = Vec::new();
        v.write_csv(&mut buf).unwrap();
        let back = TangentField::read_csv(std::io::BufReader::new(&buf[..]), 8, 8).unwrap();
        assert_eq!(v, back);
    }
}
