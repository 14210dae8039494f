//! Toroidal surface geometry: double-Fourier surfaces, quadrature grids with
//! tangent frames, normal-offset surfaces and the flatness/normal-alignment
//! constants used by the field-line closing construction.

use crate::error::{Error, Result};
use crate::math::{add3, compensated_sum, cross3, dot3, norm3, scale3, sub3, unit3, Vec3};
use crate::spectral::Spectral2D;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

/// One double-Fourier mode of a stellarator-symmetric surface:
/// `R += R_mn cos(m theta - n nfp phi)`, `Z += Z_mn sin(m theta - n nfp phi)`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct FourierMode {
    pub m: i32,
    pub n: i32,
    #[serde(rename = "R")]
    pub r: f64,
    #[serde(rename = "Z")]
    pub z: f64,
}

/// VMEC-style boundary: cosine series for the cylindrical radius and sine
/// series for the height, with an `nfp`-fold field period.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct FourierTorus {
    pub nfp: u32,
    pub modes: Vec<FourierMode>,
}

impl FourierTorus {
    /// Axisymmetric torus with major radius `r0` and minor radius `r`.
    pub fn axisymmetric(r0: f64, r: f64) -> Self {
        Self {
            nfp: 1,
            modes: vec![
                FourierMode { m: 0, n: 0, r: r0, z: 0.0 },
                FourierMode { m: 1, n: 0, r, z: r },
            ],
        }
    }

    /// The (R0=2, r=1) reference torus.
    pub fn standard() -> Self {
        Self::axisymmetric(2.0, 1.0)
    }

    /// Three-period rotating-ellipse test surface.
    pub fn rotating_ellipse() -> Self {
        Self {
            nfp: 3,
            modes: vec![
                FourierMode { m: 0, n: 0, r: 2.0, z: 0.0 },
                FourierMode { m: 1, n: 0, r: 1.0, z: 1.0 },
                FourierMode { m: 1, n: 1, r: 0.2, z: 0.2 },
            ],
        }
    }

    /// Surface rescaled by a factor `lambda` about the origin.
    pub fn scaled(&self, lambda: f64) -> Self {
        Self {
            nfp: self.nfp,
            modes: self
                .modes
                .iter()
                .map(|md| FourierMode { m: md.m, n: md.n, r: md.r * lambda, z: md.z * lambda })
                .collect(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let s: Self = serde_json::from_str(text)?;
        if s.modes.is_empty() {
            return Err(Error::Config("surface has no Fourier modes".into()));
        }
        if s.nfp == 0 {
            return Err(Error::Config("nfp must be >= 1".into()));
        }
        Ok(s)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("surface serialization")
    }

    /// R, Z and their first derivatives at (theta, phi).
    fn rz_jet1(&self, theta: f64, phi: f64) -> [f64; 6] {
        let nfp = self.nfp as f64;
        let (mut r, mut z) = (0.0, 0.0);
        let (mut rt, mut rp, mut zt, mut zp) = (0.0, 0.0, 0.0, 0.0);
        for md in &self.modes {
            let (m, n) = (md.m as f64, md.n as f64 * nfp);
            let arg = m * theta - n * phi;
            let (s, c) = arg.sin_cos();
            r += md.r * c;
            z += md.z * s;
            rt += -md.r * m * s;
            rp += md.r * n * s;
            zt += md.z * m * c;
            zp += -md.z * n * c;
        }
        [r, z, rt, rp, zt, zp]
    }

    /// Second derivatives (R_tt, R_tp, R_pp, Z_tt, Z_tp, Z_pp).
    fn rz_jet2(&self, theta: f64, phi: f64) -> [f64; 6] {
        let nfp = self.nfp as f64;
        let mut out = [0.0; 6];
        for md in &self.modes {
            let (m, n) = (md.m as f64, md.n as f64 * nfp);
            let arg = m * theta - n * phi;
            let (s, c) = arg.sin_cos();
            out[0] += -md.r * m * m * c;
            out[1] += md.r * m * n * c;
            out[2] += -md.r * n * n * c;
            out[3] += -md.z * m * m * s;
            out[4] += md.z * m * n * s;
            out[5] += -md.z * n * n * s;
        }
        out
    }

    /// Embedding map and coordinate tangents (no normal orientation applied).
    pub fn position_and_tangents(&self, theta: f64, phi: f64) -> (Vec3, Vec3, Vec3) {
        let [r, z, rt, rp, zt, zp] = self.rz_jet1(theta, phi);
        let (sp, cp) = phi.sin_cos();
        let x = [r * cp, r * sp, z];
        let e_theta = [rt * cp, rt * sp, zt];
        let e_phi = [rp * cp - r * sp, rp * sp + r * cp, zp];
        (x, e_theta, e_phi)
    }

    /// Maximum |principal curvature| at (theta, phi), given the outward sign.
    fn max_abs_curvature(&self, theta: f64, phi: f64, sign: f64) -> f64 {
        let (_, et, ep) = self.position_and_tangents(theta, phi);
        let [rtt, rtp, rpp, ztt, ztp, zpp] = self.rz_jet2(theta, phi);
        let [r, _z, rt, rp, _zt, _zp] = self.rz_jet1(theta, phi);
        let (sp, cp) = phi.sin_cos();
        let x_tt = [rtt * cp, rtt * sp, ztt];
        let x_tp = [rtp * cp - rt * sp, rtp * sp + rt * cp, ztp];
        let x_pp = [
            rpp * cp - 2.0 * rp * sp - r * cp,
            rpp * sp + 2.0 * rp * cp - r * sp,
            zpp,
        ];
        let nvec = cross3(et, ep);
        let nn = scale3(nvec, sign / norm3(nvec));
        let (l, m, n2) = (dot3(x_tt, nn), dot3(x_tp, nn), dot3(x_pp, nn));
        let (gtt, gtp, gpp) = (dot3(et, et), dot3(et, ep), dot3(ep, ep));
        let det = gtt * gpp - gtp * gtp;
        // shape operator S = G^{-1} II; eigenvalues are the principal curvatures
        let s11 = (gpp * l - gtp * m) / det;
        let s12 = (gpp * m - gtp * n2) / det;
        let s21 = (gtt * m - gtp * l) / det;
        let s22 = (gtt * n2 - gtp * m) / det;
        let tr = s11 + s22;
        let dd = s11 * s22 - s12 * s21;
        let disc = (tr * tr - 4.0 * dd).max(0.0).sqrt();
        let k1 = 0.5 * (tr + disc);
        let k2 = 0.5 * (tr - disc);
        k1.abs().max(k2.abs())
    }
}

/// Complete frame at one surface point.
#[derive(Debug, Clone, Copy)]
pub struct Node {
    pub position: Vec3,
    pub e_theta: Vec3,
    pub e_phi: Vec3,
    /// Outward unit normal.
    pub normal: Vec3,
    /// Area density |e_theta x e_phi|.
    pub jacobian: f64,
}

/// Uniform tensor-product quadrature grid over a [`FourierTorus`].
///
/// The outward normal is `sign * (e_theta x e_phi)/J` with a single global
/// `sign` fixed by a ray-parity test, so `sign` is also the handedness of the
/// (theta, phi, N) frame.
#[derive(Clone)]
pub struct SurfaceGrid {
    pub surface: FourierTorus,
    pub n_theta: usize,
    pub n_phi: usize,
    pub d_theta: f64,
    pub d_phi: f64,
    /// +1 if (e_theta, e_phi, N) is right-handed, -1 otherwise.
    pub handedness: f64,
    pub position: Vec<Vec3>,
    pub e_theta: Vec<Vec3>,
    pub e_phi: Vec<Vec3>,
    pub normal: Vec<Vec3>,
    pub jacobian: Vec<f64>,
    /// Metric coefficients.
    pub g_tt: Vec<f64>,
    pub g_tp: Vec<f64>,
    pub g_pp: Vec<f64>,
    pub spectral: Spectral2D,
}

/// Evaluate the oriented frame at a single point of a surface. The normal
/// orientation is established with a coarse parity probe, so prefer
/// [`SurfaceGrid`] when evaluating many points.
pub fn eval_point(surface: &FourierTorus, theta: f64, phi: f64) -> Result<Node> {
    let sign = outward_sign(surface)?;
    eval_point_with_sign(surface, theta, phi, sign)
}

fn eval_point_with_sign(surface: &FourierTorus, theta: f64, phi: f64, sign: f64) -> Result<Node> {
    let (x, et, ep) = surface.position_and_tangents(theta, phi);
    let nvec = cross3(et, ep);
    let j = norm3(nvec);
    let scale = norm3(et).max(norm3(ep));
    if !(j > 1e-12 * scale * scale) {
        return Err(Error::Geometry(format!(
            "degenerate Jacobian J={j:.3e} at theta={theta:.4}, phi={phi:.4}"
        )));
    }
    Ok(Node {
        position: x,
        e_theta: et,
        e_phi: ep,
        normal: scale3(nvec, sign / j),
        jacobian: j,
    })
}

/// Determine the global orientation sign of `(e_theta x e_phi)` by shooting a
/// ray along the raw normal from a probe vertex and counting surface
/// crossings: an even count means the raw normal already points to the
/// unbounded side.
///
/// The probe sits exactly on the triangulated surface; its incident triangles
/// are skipped and the ray is tilted slightly off the normal so that generic
/// crossings stay away from edges. Marginal hits trigger a retry with a
/// different probe or tilt.
pub fn outward_sign(surface: &FourierTorus) -> Result<f64> {
    let n = 24;
    let mut pts = Vec::with_capacity(n * n);
    let mut frames = Vec::with_capacity(n * n);
    for i in 0..n {
        let th = TAU * i as f64 / n as f64;
        for j in 0..n {
            let ph = TAU * j as f64 / n as f64;
            let (x, et, ep) = surface.position_and_tangents(th, ph);
            pts.push(x);
            frames.push((unit3(et), unit3(ep), unit3(cross3(et, ep))));
        }
    }
    let tris = triangulate(n, n);
    for probe in [0usize, n * n / 3 + 5, 2 * n * n / 3 + 11, 7 * n + 3] {
        for tilt in [0.01, 0.03, 0.07] {
            let (t_hat, p_hat, n_raw) = frames[probe];
            let dir = unit3([
                n_raw[0] + tilt * (t_hat[0] + 0.618 * p_hat[0]),
                n_raw[1] + tilt * (t_hat[1] + 0.618 * p_hat[1]),
                n_raw[2] + tilt * (t_hat[2] + 0.618 * p_hat[2]),
            ]);
            if let Some(crossings) = count_ray_crossings(&pts, &tris, probe, dir) {
                return Ok(if crossings % 2 == 0 { 1.0 } else { -1.0 });
            }
        }
    }
    Err(Error::Geometry(
        "ray-parity orientation test failed at every probe node".into(),
    ))
}

fn triangulate(nt: usize, np: usize) -> Vec<[usize; 3]> {
    let mut tris = Vec::with_capacity(2 * nt * np);
    for i in 0..nt {
        let i1 = (i + 1) % nt;
        for j in 0..np {
            let j1 = (j + 1) % np;
            let a = i * np + j;
            let b = i1 * np + j;
            let c = i1 * np + j1;
            let d = i * np + j1;
            tris.push([a, b, c]);
            tris.push([a, c, d]);
        }
    }
    tris
}

/// Moeller-Trumbore crossing count for the ray from vertex `origin_idx`
/// along `dir`, skipping the triangles incident to the origin. Returns
/// `None` when a hit is too close to a triangle edge to be trusted.
fn count_ray_crossings(
    pts: &[Vec3],
    tris: &[[usize; 3]],
    origin_idx: usize,
    dir: Vec3,
) -> Option<usize> {
    let origin = pts[origin_idx];
    let scale = pts.iter().map(|p| norm3(*p)).fold(0.0_f64, f64::max);
    let t_min = 1e-6 * scale;
    let margin = 1e-9;
    let mut count = 0;
    for tri in tris {
        if tri.contains(&origin_idx) {
            continue;
        }
        let (p0, p1, p2) = (pts[tri[0]], pts[tri[1]], pts[tri[2]]);
        let e1 = sub3(p1, p0);
        let e2 = sub3(p2, p0);
        let h = cross3(dir, e2);
        let a = dot3(e1, h);
        if a.abs() < 1e-14 * scale * scale {
            continue;
        }
        let f = 1.0 / a;
        let s = sub3(origin, p0);
        let u = f * dot3(s, h);
        if u < -margin || u > 1.0 + margin {
            continue;
        }
        let q = cross3(s, e1);
        let v = f * dot3(dir, q);
        if v < -margin || u + v > 1.0 + margin {
            continue;
        }
        let t = f * dot3(e2, q);
        if t <= t_min {
            continue;
        }
        let edge_dist = u.min(v).min(1.0 - u - v);
        if edge_dist.abs() < 1e-7 {
            return None; // grazing hit; caller retries from another probe
        }
        count += 1;
    }
    Some(count)
}

/// Build a uniform-angle quadrature grid. `n_theta, n_phi >= 4`.
pub fn build_grid(surface: &FourierTorus, n_theta: usize, n_phi: usize) -> Result<SurfaceGrid> {
    if n_theta < 4 || n_phi < 4 {
        return Err(Error::Config(format!(
            "grid resolution {n_theta}x{n_phi} below the 4x4 minimum"
        )));
    }
    if surface.modes.is_empty() {
        return Err(Error::Config("surface has no Fourier modes".into()));
    }
    let sign = outward_sign(surface)?;
    let len = n_theta * n_phi;
    let mut grid = SurfaceGrid {
        surface: surface.clone(),
        n_theta,
        n_phi,
        d_theta: TAU / n_theta as f64,
        d_phi: TAU / n_phi as f64,
        handedness: sign,
        position: Vec::with_capacity(len),
        e_theta: Vec::with_capacity(len),
        e_phi: Vec::with_capacity(len),
        normal: Vec::with_capacity(len),
        jacobian: Vec::with_capacity(len),
        g_tt: Vec::with_capacity(len),
        g_tp: Vec::with_capacity(len),
        g_pp: Vec::with_capacity(len),
        spectral: Spectral2D::new(n_theta, n_phi),
    };
    for i in 0..n_theta {
        let th = grid.d_theta * i as f64;
        for j in 0..n_phi {
            let ph = grid.d_phi * j as f64;
            let node = eval_point_with_sign(surface, th, ph, sign)?;
            grid.position.push(node.position);
            grid.e_theta.push(node.e_theta);
            grid.e_phi.push(node.e_phi);
            grid.normal.push(node.normal);
            grid.jacobian.push(node.jacobian);
            grid.g_tt.push(dot3(node.e_theta, node.e_theta));
            grid.g_tp.push(dot3(node.e_theta, node.e_phi));
            grid.g_pp.push(dot3(node.e_phi, node.e_phi));
        }
    }
    Ok(grid)
}

impl SurfaceGrid {
    #[inline]
    pub fn len(&self) -> usize {
        self.n_theta * self.n_phi
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        i * self.n_phi + j
    }

    #[inline]
    pub fn theta(&self, i: usize) -> f64 {
        self.d_theta * i as f64
    }

    #[inline]
    pub fn phi(&self, j: usize) -> f64 {
        self.d_phi * j as f64
    }

    /// Area quadrature weight of one node.
    #[inline]
    pub fn weight(&self, idx: usize) -> f64 {
        self.jacobian[idx] * self.d_theta * self.d_phi
    }

    pub fn node(&self, idx: usize) -> Node {
        Node {
            position: self.position[idx],
            e_theta: self.e_theta[idx],
            e_phi: self.e_phi[idx],
            normal: self.normal[idx],
            jacobian: self.jacobian[idx],
        }
    }

    /// Surface area by the grid quadrature (compensated sum).
    pub fn area(&self) -> f64 {
        compensated_sum((0..self.len()).map(|i| self.weight(i)))
    }

    /// Area-weighted integral of a scalar sampled on the grid.
    pub fn integrate(&self, f: &[f64]) -> f64 {
        assert_eq!(f.len(), self.len());
        compensated_sum((0..self.len()).map(|i| f[i] * self.weight(i)))
    }

    /// Smallest distance between grid-adjacent nodes.
    pub fn min_node_spacing(&self) -> f64 {
        let mut best = f64::INFINITY;
        for i in 0..self.n_theta {
            for j in 0..self.n_phi {
                let a = self.position[self.idx(i, j)];
                let bn = self.position[self.idx((i + 1) % self.n_theta, j)];
                let cn = self.position[self.idx(i, (j + 1) % self.n_phi)];
                best = best.min(norm3(sub3(a, bn))).min(norm3(sub3(a, cn)));
            }
        }
        best
    }

    /// Largest pairwise node distance (extrinsic diameter estimate).
    pub fn diameter(&self) -> f64 {
        let n = self.len();
        (0..n)
            .into_par_iter()
            .map(|a| {
                let mut best = 0.0_f64;
                for b in (a + 1)..n {
                    best = best.max(norm3(sub3(self.position[a], self.position[b])));
                }
                best
            })
            .reduce(|| 0.0, f64::max)
    }
}

/// Normal-offset image `Psi_tau(Sigma)` of a grid, node-for-node.
#[derive(Debug)]
pub struct OffsetSurface {
    pub tau: f64,
    pub n_theta: usize,
    pub n_phi: usize,
    pub d_theta: f64,
    pub d_phi: f64,
    pub position: Vec<Vec3>,
    pub e_theta: Vec<Vec3>,
    pub e_phi: Vec<Vec3>,
    pub normal: Vec<Vec3>,
    pub jacobian: Vec<f64>,
}

/// Flatness / normal-alignment constants of the closing construction, sampled
/// on the grid's node pairs.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct GeometryConstants {
    /// `|N(x).(x-y)| <= c |x-y|^2` on all sampled pairs (with 1.1 safety).
    pub c: f64,
    /// `N(x).N(y) >= 1/2` whenever `|x-y| < delta`.
    pub delta: f64,
    /// Admissible normal offset: `min(delta/3, 1/(6c), focal estimate)`.
    pub tau_max: f64,
    /// Smallest reciprocal principal curvature over the nodes.
    pub focal_distance: f64,
}

/// Estimate the constants of the product-neighbourhood construction from the
/// sampled node pairs plus a focal-distance cap from the shape operator.
pub fn estimate_constants(grid: &SurfaceGrid) -> GeometryConstants {
    let n = grid.len();
    // c: worst flatness ratio over ordered pairs
    let c_raw = (0..n)
        .into_par_iter()
        .map(|a| {
            let mut worst = 0.0_f64;
            let na = grid.normal[a];
            let xa = grid.position[a];
            for b in 0..n {
                if a == b {
                    continue;
                }
                let d = sub3(xa, grid.position[b]);
                let d2 = dot3(d, d);
                worst = worst.max(dot3(na, d).abs() / d2);
            }
            worst
        })
        .reduce(|| 0.0, f64::max);
    let c = 1.1 * c_raw;

    // delta: smallest pair distance at which the normals tilt past 60 degrees
    let delta_raw = (0..n)
        .into_par_iter()
        .map(|a| {
            let mut closest = f64::INFINITY;
            let na = grid.normal[a];
            let xa = grid.position[a];
            for b in (a + 1)..n {
                if dot3(na, grid.normal[b]) < 0.5 {
                    closest = closest.min(norm3(sub3(xa, grid.position[b])));
                }
            }
            closest
        })
        .reduce(|| f64::INFINITY, f64::min);
    let delta = if delta_raw.is_finite() {
        0.999 * delta_raw
    } else {
        grid.diameter()
    };

    let focal = (0..grid.n_theta)
        .into_par_iter()
        .map(|i| {
            let mut worst = 0.0_f64;
            for j in 0..grid.n_phi {
                worst = worst.max(grid.surface.max_abs_curvature(
                    grid.theta(i),
                    grid.phi(j),
                    grid.handedness,
                ));
            }
            worst
        })
        .reduce(|| 0.0, f64::max);
    let focal_distance = 1.0 / focal;

    GeometryConstants {
        c,
        delta,
        tau_max: (delta / 3.0).min(1.0 / (6.0 * c)).min(0.9 * focal_distance),
        focal_distance,
    }
}

/// Offset every node by `tau` along the outward normal and rebuild the frame
/// from the offset map. Positions are exactly `x + tau N(x)`.
pub fn offset_surface(grid: &SurfaceGrid, tau: f64) -> Result<OffsetSurface> {
    let constants = estimate_constants(grid);
    offset_surface_with_constants(grid, tau, &constants)
}

pub fn offset_surface_with_constants(
    grid: &SurfaceGrid,
    tau: f64,
    constants: &GeometryConstants,
) -> Result<OffsetSurface> {
    if tau.abs() > constants.tau_max {
        return Err(Error::Offset(format!(
            "|tau|={:.4e} exceeds tau_max={:.4e}",
            tau.abs(),
            constants.tau_max
        )));
    }
    let n = grid.len();
    let position: Vec<Vec3> = (0..n)
        .map(|i| add3(grid.position[i], scale3(grid.normal[i], tau)))
        .collect();

    // frame of the offset map: e'_a = e_a + tau dN/da, with dN by FFT
    let sp = &grid.spectral;
    let mut nx = vec![0.0; n];
    let mut ny = vec![0.0; n];
    let mut nz = vec![0.0; n];
    for i in 0..n {
        nx[i] = grid.normal[i][0];
        ny[i] = grid.normal[i][1];
        nz[i] = grid.normal[i][2];
    }
    let (nxt, nyt, nzt) = (sp.d_theta(&nx), sp.d_theta(&ny), sp.d_theta(&nz));
    let (nxp, nyp, nzp) = (sp.d_phi(&nx), sp.d_phi(&ny), sp.d_phi(&nz));

    let mut out = OffsetSurface {
        tau,
        n_theta: grid.n_theta,
        n_phi: grid.n_phi,
        d_theta: grid.d_theta,
        d_phi: grid.d_phi,
        position,
        e_theta: Vec::with_capacity(n),
        e_phi: Vec::with_capacity(n),
        normal: Vec::with_capacity(n),
        jacobian: Vec::with_capacity(n),
    };
    for i in 0..n {
        let et = add3(grid.e_theta[i], scale3([nxt[i], nyt[i], nzt[i]], tau));
        let ep = add3(grid.e_phi[i], scale3([nxp[i], nyp[i], nzp[i]], tau));
        let nvec = cross3(et, ep);
        let j = norm3(nvec);
        if j <= 0.0 || !j.is_finite() {
            return Err(Error::Offset(format!("offset frame degenerate at node {i}")));
        }
        let mut nn = scale3(nvec, 1.0 / j);
        if dot3(nn, grid.normal[i]) < 0.0 {
            nn = scale3(nn, -1.0);
        }
        out.e_theta.push(et);
        out.e_phi.push(ep);
        out.normal.push(nn);
        out.jacobian.push(j);
    }

    // injectivity guard: offset nodes must stay separated
    let min_spacing = grid.min_node_spacing();
    let threshold = 0.5 * min_spacing;
    let violated = (0..n).into_par_iter().any(|a| {
        let xa = out.position[a];
        ((a + 1)..n).any(|b| norm3(sub3(xa, out.position[b])) < threshold)
    });
    if violated {
        return Err(Error::Offset(format!(
            "offset tau={tau:.4e} brings node pairs closer than half the base spacing"
        )));
    }
    Ok(out)
}

impl OffsetSurface {
    pub fn len(&self) -> usize {
        self.n_theta * self.n_phi
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn area(&self) -> f64 {
        let w = self.d_theta * self.d_phi;
        compensated_sum(self.jacobian.iter().map(|j| j * w))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn assert_vec3_close(a: Vec3, b: Vec3, tol: f64) {
        for k in 0..3 {
            assert!(
                (a[k] - b[k]).abs() < tol,
                "component {k}: {a:?} vs {b:?}"
            );
        }
    }

    #[test]
    fn eval_point_symmetry_points() {
        let t = FourierTorus::standard();
        let n0 = eval_point(&t, 0.0, 0.0).unwrap();
        assert_vec3_close(n0.position, [3.0, 0.0, 0.0], 1e-14);
        assert_vec3_close(n0.normal, [1.0, 0.0, 0.0], 1e-14);

        let n1 = eval_point(&t, PI, 0.0).unwrap();
        assert_vec3_close(n1.position, [1.0, 0.0, 0.0], 1e-14);
        assert_vec3_close(n1.normal, [-1.0, 0.0, 0.0], 1e-14);

        let n2 = eval_point(&t, PI / 2.0, PI / 2.0).unwrap();
        assert_vec3_close(n2.position, [0.0, 2.0, 1.0], 1e-14);
        assert_vec3_close(n2.normal, [0.0, 0.0, 1.0], 1e-14);
    }

    #[test]
    fn grid_counts_and_area() {
        let t = FourierTorus::standard();
        let g4 = build_grid(&t, 4, 4).unwrap();
        assert_eq!(g4.len(), 16);

        let g = build_grid(&t, 64, 64).unwrap();
        let area = g.area();
        let exact = 8.0 * PI * PI;
        assert!(
            (area - exact).abs() < 1e-10,
            "area {area} vs {exact}"
        );
    }

    #[test]
    fn grid_frame_invariants() {
        let t = FourierTorus::rotating_ellipse();
        let g = build_grid(&t, 32, 48).unwrap();
        for i in 0..g.len() {
            assert!(g.jacobian[i] > 0.0, "J>0 (embedding) at node {i}");
            let n = g.normal[i];
            assert!((norm3(n) - 1.0).abs() < 1e-12);
            assert!(dot3(n, g.e_theta[i]).abs() < 1e-12 * norm3(g.e_theta[i]));
            assert!(dot3(n, g.e_phi[i]).abs() < 1e-12 * norm3(g.e_phi[i]));
        }
    }

    #[test]
    fn area_converges_second_order_or_better() {
        // the rotating ellipse has a non-band-limited Jacobian
        let t = FourierTorus::rotating_ellipse();
        let a16 = build_grid(&t, 16, 16).unwrap().area();
        let a32 = build_grid(&t, 32, 32).unwrap().area();
        let a64 = build_grid(&t, 64, 64).unwrap().area();
        let e16 = (a16 - a64).abs();
        let e32 = (a32 - a64).abs();
        assert!(e32 < e16 / 4.0 + 1e-12, "e16={e16:.3e} e32={e32:.3e}");
    }

    #[test]
    fn offset_identity_and_axisymmetric_areas() {
        let t = FourierTorus::standard();
        let g = build_grid(&t, 48, 48).unwrap();
        let o0 = offset_surface(&g, 0.0).unwrap();
        for i in 0..g.len() {
            assert_vec3_close(o0.position[i], g.position[i], 0.0);
        }
        let op = offset_surface(&g, 0.1).unwrap();
        let om = offset_surface(&g, -0.1).unwrap();
        let a_plus = 4.0 * PI * PI * 2.0 * 1.1;
        let a_minus = 4.0 * PI * PI * 2.0 * 0.9;
        assert!((op.area() - a_plus).abs() < 1e-6, "{}", op.area());
        assert!((om.area() - a_minus).abs() < 1e-6, "{}", om.area());
        // exact single-offset definition x + tau N(x)
        for i in 0..g.len() {
            let expect = add3(g.position[i], scale3(g.normal[i], 0.1));
            assert_vec3_close(op.position[i], expect, 0.0);
        }
    }

    #[test]
    fn constants_on_standard_torus() {
        let t = FourierTorus::standard();
        let g = build_grid(&t, 48, 48).unwrap();
        let k = estimate_constants(&g);
        assert!(k.tau_max > 0.0 && k.tau_max < 1.0, "tau_max={}", k.tau_max);
        // focal distance of the (2,1) torus is min(r, R0-r) = 1
        assert!((k.focal_distance - 1.0).abs() < 1e-3, "focal={}", k.focal_distance);
        // EX3/EX4 style inequalities hold on all sampled pairs by construction
        for a in (0..g.len()).step_by(17) {
            for b in (0..g.len()).step_by(13) {
                if a == b {
                    continue;
                }
                let d = sub3(g.position[a], g.position[b]);
                assert!(dot3(g.normal[a], d).abs() <= k.c * dot3(d, d) + 1e-12);
                if norm3(d) < k.delta {
                    assert!(dot3(g.normal[a], g.normal[b]) >= 0.5);
                }
            }
        }
    }

    #[test]
    fn constants_stable_under_refinement() {
        let t = FourierTorus::standard();
        let c64 = estimate_constants(&build_grid(&t, 64, 64).unwrap()).c;
        let c128 = estimate_constants(&build_grid(&t, 128, 128).unwrap()).c;
        assert!(
            (c64 - c128).abs() / c128 < 0.05,
            "c64={c64} c128={c128}"
        );
    }

    #[test]
    fn oversized_offset_rejected() {
        let t = FourierTorus::standard();
        let g = build_grid(&t, 32, 32).unwrap();
        let err = offset_surface(&g, 5.0).unwrap_err();
        assert!(matches!(err, Error::Offset(_)));
    }

    #[test]
    fn surface_json_round_trip() {
        let t = FourierTorus::rotating_ellipse();
        let s = t.to_json();
        let back = FourierTorus::from_json(&s).unwrap();
        assert_eq!(t, back);
        assert!(FourierTorus::from_json("{\"nfp\":0,\"modes\":[]}").is_err());
    }
}
