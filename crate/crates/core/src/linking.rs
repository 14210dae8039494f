//! Gauss linking numbers of closed polyline curves, the field-line closing
//! construction through normal-offset surfaces, and the Monte-Carlo linking
//! estimate of surface helicity.

use crate::error::{Error, Result};
use crate::fields::TangentField;
use crate::geometry::{
    estimate_constants, offset_surface_with_constants, GeometryConstants, SurfaceGrid,
};
use crate::math::{add3, angle_diff, cross3, dot3, norm3, scale3, sub3, Accumulator, Vec3};
use crate::ode::{integrate, OdeOptions, StepControl};
use crate::windings::{FieldInterpolant, FieldLine};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::{FRAC_1_PI, TAU};

/// Closed curve as ordered samples; the segment from the last point back to
/// the first closes it.
#[derive(Debug, Clone)]
pub struct ClosedCurve {
    pub points: Vec<Vec3>,
}

impl ClosedCurve {
    pub fn new(points: Vec<Vec3>) -> Self {
        Self { points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn reversed(&self) -> Self {
        let mut p = self.points.clone();
        p.reverse();
        Self { points: p }
    }

    pub fn diameter(&self) -> f64 {
        let n = self.len();
        let stride = (n / 128).max(1);
        let mut best = 0.0_f64;
        for i in (0..n).step_by(stride) {
            for j in (i + 1..n).step_by(stride) {
                best = best.max(norm3(sub3(self.points[i], self.points[j])));
            }
        }
        best
    }

    pub fn total_length(&self) -> f64 {
        let n = self.len();
        (0..n)
            .map(|i| norm3(sub3(self.points[(i + 1) % n], self.points[i])))
            .sum()
    }

    fn segments(&self) -> Vec<(Vec3, Vec3)> {
        let n = self.len();
        (0..n)
            .map(|i| {
                let a = self.points[i];
                let b = self.points[(i + 1) % n];
                (scale3(add3(a, b), 0.5), sub3(b, a))
            })
            .collect()
    }

    /// Minimum distance between the segments of two curves.
    pub fn min_distance_to(&self, other: &Self) -> f64 {
        let n = self.len();
        let m = other.len();
        (0..n)
            .into_par_iter()
            .map(|i| {
                let a0 = self.points[i];
                let a1 = self.points[(i + 1) % n];
                let mut best = f64::INFINITY;
                for j in 0..m {
                    let b0 = other.points[j];
                    let b1 = other.points[(j + 1) % m];
                    best = best.min(segment_distance(a0, a1, b0, b1));
                }
                best
            })
            .reduce(|| f64::INFINITY, f64::min)
    }
}

/// Closest distance between two 3-D segments.
fn segment_distance(p0: Vec3, p1: Vec3, q0: Vec3, q1: Vec3) -> f64 {
    let u = sub3(p1, p0);
    let v = sub3(q1, q0);
    let w = sub3(p0, q0);
    let a = dot3(u, u);
    let b = dot3(u, v);
    let c = dot3(v, v);
    let d = dot3(u, w);
    let e = dot3(v, w);
    let denom = a * c - b * b;
    let (mut s, mut t);
    if denom > 1e-14 * a * c + 1e-300 {
        s = ((b * e - c * d) / denom).clamp(0.0, 1.0);
    } else {
        s = 0.0;
    }
    t = (b * s + e) / c.max(1e-300);
    if t < 0.0 {
        t = 0.0;
        s = (-d / a.max(1e-300)).clamp(0.0, 1.0);
    } else if t > 1.0 {
        t = 1.0;
        s = ((b - d) / a.max(1e-300)).clamp(0.0, 1.0);
    }
    let pa = add3(p0, scale3(u, s));
    let qb = add3(q0, scale3(v, t));
    norm3(sub3(pa, qb))
}

/// Gauss linking integral of two disjoint closed curves by the midpoint rule
/// over segment pairs. Errors when the curves come within `1e-6` of the
/// larger curve diameter.
pub fn gauss_linking(a: &ClosedCurve, b: &ClosedCurve) -> Result<f64> {
    let scale = a.diameter().max(b.diameter());
    let dmin = a.min_distance_to(b);
    if dmin <= 1e-6 * scale {
        return Err(Error::Proximity(format!(
            "curves are {dmin:.3e} apart (scale {scale:.3e}); linking undefined"
        )));
    }
    Ok(linking_sum(&a.segments(), &b.segments()))
}

fn linking_sum(sa: &[(Vec3, Vec3)], sb: &[(Vec3, Vec3)]) -> f64 {
    let partial: Vec<f64> = sa
        .par_iter()
        .map(|(ma, da)| {
            let mut acc = Accumulator::new();
            for (mb, db) in sb {
                let r = sub3(*ma, *mb);
                let r2 = dot3(r, r);
                let inv = 1.0 / (r2 * r2.sqrt());
                acc.add(dot3(cross3(*da, *db), r) * inv);
            }
            acc.total()
        })
        .collect();
    let mut acc = Accumulator::new();
    for p in partial {
        acc.add(p);
    }
    0.25 * FRAC_1_PI * acc.total()
}

/// How a traced segment is turned into a closed curve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum LinkMode {
    /// Closing construction through the offset surfaces `Sigma_{+-tau}`.
    Offset,
    /// All field lines periodic: close by following the flow.
    Periodic,
}

/// Close a traced field-line segment through the offset surface on the given
/// side (+1 outward, -1 inward): normal ascent at the end point, a
/// chart-interpolated connector on `Sigma_{side tau}`, and normal descent
/// back to the start.
pub fn close_segment(
    grid: &SurfaceGrid,
    line: &FieldLine,
    tau: f64,
    side: i8,
    constants: &GeometryConstants,
) -> Result<ClosedCurve> {
    if tau <= 0.0 {
        return Err(Error::Config("offset tau must be positive".into()));
    }
    if tau > constants.tau_max {
        return Err(Error::Offset(format!(
            "tau={tau:.3e} exceeds tau_max={:.3e}",
            constants.tau_max
        )));
    }
    let signed_tau = tau * side as f64;
    let surface = &grid.surface;
    let normal_at = |th: f64, ph: f64| -> Vec3 {
        let (_, et, ep) = surface.position_and_tangents(th, ph);
        let nvec = cross3(et, ep);
        scale3(nvec, grid.handedness / norm3(nvec))
    };
    let point_at = |th: f64, ph: f64| surface.position_and_tangents(th, ph).0;

    let n_line = line.theta.len();
    let mut points: Vec<Vec3> = Vec::with_capacity(n_line + 96);
    for k in 0..n_line {
        points.push(point_at(line.theta[k], line.phi[k]));
    }
    let (th_end, ph_end) = line.end();
    let (th_start, ph_start) = line.start();

    // normal ascent at the end point
    let n_end = normal_at(th_end, ph_end);
    let end_pt = *points.last().unwrap();
    let k_norm = 8;
    for k in 1..=k_norm {
        points.push(add3(end_pt, scale3(n_end, signed_tau * k as f64 / k_norm as f64)));
    }
    // connector on the offset surface along the shortest chart path
    let d_th = angle_diff(th_start, th_end);
    let d_ph = angle_diff(ph_start, ph_end);
    let m_conn = 64;
    for k in 1..=m_conn {
        let u = k as f64 / m_conn as f64;
        let th = th_end + u * d_th;
        let ph = ph_end + u * d_ph;
        points.push(add3(point_at(th, ph), scale3(normal_at(th, ph), signed_tau)));
    }
    // normal descent at the start point
    let n_start = normal_at(th_start, ph_start);
    let start_pt = points[0];
    for k in (1..k_norm).rev() {
        points.push(add3(start_pt, scale3(n_start, signed_tau * k as f64 / k_norm as f64)));
    }
    Ok(ClosedCurve::new(points))
}

/// Close an (already periodic) traced line by snapping its end to its start.
/// Errors if the end point misses the start by more than `tol` of the curve
/// diameter.
pub fn close_periodic(grid: &SurfaceGrid, line: &FieldLine, tol: f64) -> Result<ClosedCurve> {
    let surface = &grid.surface;
    let points: Vec<Vec3> = (0..line.theta.len())
        .map(|k| surface.position_and_tangents(line.theta[k], line.phi[k]).0)
        .collect();
    let curve = ClosedCurve::new(points);
    let gap = norm3(sub3(curve.points[0], *curve.points.last().unwrap()));
    let diam = curve.diameter();
    if gap > tol * diam {
        return Err(Error::Tracing(format!(
            "line is not periodic: closure gap {gap:.3e} vs diameter {diam:.3e}"
        )));
    }
    Ok(curve)
}

/// Result of the Monte-Carlo linking estimate.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct LinkingEstimate {
    pub estimate: f64,
    pub stderr: f64,
    pub n_pairs: usize,
    pub rejected: usize,
    pub mode: LinkMode,
}

/// Find the period of a closed transversal field line starting at `start`:
/// the first toroidal transit count at which the poloidal angle also returns.
fn find_period(
    itp: &FieldInterpolant,
    start: (f64, f64),
    max_transits: usize,
    max_step: f64,
) -> Result<(f64, Vec<(f64, f64, f64)>)> {
    let rhs = |_t: f64, y: &[f64], dy: &mut [f64]| {
        let (vt, vp) = itp.eval(y[0], y[1]);
        dy[0] = vt;
        dy[1] = vp;
    };
    let opts = OdeOptions { max_step, ..OdeOptions { rtol: 1e-10, atol: 1e-12, max_step, max_steps: 20_000_000 } };
    let mut samples: Vec<(f64, f64, f64)> = vec![(0.0, start.0, start.1)];
    let mut period: Option<f64> = None;
    let mut orient: Option<f64> = None;
    let t_cap = f64::INFINITY;
    integrate(rhs, 0.0, &[start.0, start.1], t_cap, &opts, |s| {
        samples.push((s.t1, s.y1[0], s.y1[1]));
        let o = *orient.get_or_insert(if s.f0[1] >= 0.0 { 1.0 } else { -1.0 });
        if s.f1[1] * o <= 0.0 {
            return StepControl::Stop; // transversality lost
        }
        let transits_done = ((s.y1[1] - start.1) * o / TAU).floor() as usize;
        if transits_done > max_transits {
            return StepControl::Stop;
        }
        // check each toroidal transit mark crossed within this step
        let k0 = ((s.y0[1] - start.1) * o / TAU).floor() as i64;
        let k1 = ((s.y1[1] - start.1) * o / TAU).floor() as i64;
        for k in (k0 + 1)..=k1 {
            let phi_mark = start.1 + o * TAU * k as f64;
            let (mut lo, mut hi) = (s.t0, s.t1);
            for _ in 0..80 {
                let mid = 0.5 * (lo + hi);
                if (s.interpolate(1, mid) - phi_mark) * o >= 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            let t_mark = 0.5 * (lo + hi);
            let th_mark = s.interpolate(0, t_mark);
            if angle_diff(th_mark, start.0).abs() < 1e-7 {
                period = Some(t_mark);
                return StepControl::Stop;
            }
        }
        StepControl::Continue
    })?;
    match period {
        Some(p) => Ok((p, samples)),
        None => Err(Error::Tracing(format!(
            "field line from ({:.3}, {:.3}) did not close within {max_transits} transits",
            start.0, start.1
        ))),
    }
}

fn area_weighted_start(grid: &SurfaceGrid, rng: &mut ChaCha8Rng, j_max: f64) -> (f64, f64) {
    loop {
        let th = rng.gen::<f64>() * TAU;
        let ph = rng.gen::<f64>() * TAU;
        let (_, et, ep) = grid.surface.position_and_tangents(th, ph);
        let j = norm3(cross3(et, ep));
        if rng.gen::<f64>() * j_max <= j {
            return (th, ph);
        }
    }
}

/// Monte-Carlo estimate of `H(v)` as the area-pair average of
/// `lk(closed_x, closed_y)/(T S)`, with start points sampled uniformly in
/// area and per-pair RNG streams derived from `seed`.
///
/// In `Offset` mode both lines run for time `horizon` and are closed through
/// `Sigma_{+tau}` and `Sigma_{-tau}`; in `Periodic` mode each line is traced
/// to its own period (error if a line fails to close within the transit cap).
pub fn helicity_via_linking(
    grid: &SurfaceGrid,
    v: &TangentField,
    n_pairs: usize,
    horizon: f64,
    mode: LinkMode,
    tau: Option<f64>,
    seed: u64,
) -> Result<LinkingEstimate> {
    if n_pairs == 0 {
        return Err(Error::Config("need at least one pair".into()));
    }
    let constants = estimate_constants(grid);
    let tau = tau.unwrap_or(0.5 * constants.tau_max);
    if matches!(mode, LinkMode::Offset) {
        // validate the offsets once; errors early if tau is inadmissible
        offset_surface_with_constants(grid, tau, &constants)?;
        offset_surface_with_constants(grid, -tau, &constants)?;
    }
    let itp = FieldInterpolant::new(grid, v);
    let j_max = grid.jacobian.iter().fold(0.0_f64, |a, &b| a.max(b)) * 1.0001;
    let area = grid.area();
    let diam = grid.diameter();
    let reject_dist = 1e-4 * diam;
    // bound the arc step so polylines resolve the curves
    let speed = v.sup_norm(grid).max(1e-300);
    let max_step = (horizon / 512.0).min(0.2 * diam / speed).max(1e-6);

    let results: Vec<std::result::Result<(f64, usize), Error>> = (0..n_pairs)
        .into_par_iter()
        .map(|pair| {
            let mut rng = ChaCha8Rng::seed_from_u64(
                seed ^ (pair as u64).wrapping_mul(0x9e3779b97f4a7c15),
            );
            let mut rejected = 0usize;
            loop {
                if rejected > 64 {
                    return Err(Error::Sampling(format!(
                        "pair {pair}: rejected {rejected} candidate pairs"
                    )));
                }
                let sx = area_weighted_start(grid, &mut rng, j_max);
                let sy = area_weighted_start(grid, &mut rng, j_max);
                let built = build_pair(grid, v, &itp, sx, sy, horizon, mode, tau, &constants, max_step);
                let (cx, cy, t_x, t_y) = match built {
                    Ok(b) => b,
                    Err(e) => return Err(e),
                };
                if cx.min_distance_to(&cy) <= reject_dist {
                    rejected += 1;
                    continue;
                }
                let lk = linking_sum(
                    &cx.points
                        .iter()
                        .enumerate()
                        .map(|(i, _)| {
                            let a = cx.points[i];
                            let b = cx.points[(i + 1) % cx.len()];
                            (scale3(add3(a, b), 0.5), sub3(b, a))
                        })
                        .collect::<Vec<_>>(),
                    &cy.points
                        .iter()
                        .enumerate()
                        .map(|(i, _)| {
                            let a = cy.points[i];
                            let b = cy.points[(i + 1) % cy.len()];
                            (scale3(add3(a, b), 0.5), sub3(b, a))
                        })
                        .collect::<Vec<_>>(),
                );
                return Ok((lk / (t_x * t_y), rejected));
            }
        })
        .collect();

    let mut values = Vec::with_capacity(n_pairs);
    let mut rejected = 0usize;
    for r in results {
        let (val, rej) = r?;
        values.push(val);
        rejected += rej;
    }
    if rejected * 20 > n_pairs {
        return Err(Error::Sampling(format!(
            "{rejected} rejected pairs out of {n_pairs} exceeds the 5% budget"
        )));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0).max(1.0);
    Ok(LinkingEstimate {
        estimate: area * area * mean,
        stderr: area * area * (var / n).sqrt(),
        n_pairs,
        rejected,
        mode,
    })
}

#[allow(clippy::too_many_arguments)]
fn build_pair(
    grid: &SurfaceGrid,
    v: &TangentField,
    itp: &FieldInterpolant,
    sx: (f64, f64),
    sy: (f64, f64),
    horizon: f64,
    mode: LinkMode,
    tau: f64,
    constants: &GeometryConstants,
    max_step: f64,
) -> Result<(ClosedCurve, ClosedCurve, f64, f64)> {
    match mode {
        LinkMode::Offset => {
            let lx = trace_dense(grid, v, sx, horizon, max_step)?;
            let ly = trace_dense(grid, v, sy, horizon, max_step)?;
            let cx = close_segment(grid, &lx, tau, 1, constants)?;
            let cy = close_segment(grid, &ly, tau, -1, constants)?;
            Ok((cx, cy, horizon, horizon))
        }
        LinkMode::Periodic => {
            let (tx, samples_x) = find_period(itp, sx, 64, max_step)?;
            let (ty, samples_y) = find_period(itp, sy, 64, max_step)?;
            let to_curve = |samples: &[(f64, f64, f64)], period: f64| {
                let pts: Vec<Vec3> = samples
                    .iter()
                    .take_while(|(t, _, _)| *t < period)
                    .map(|(_, th, ph)| grid.surface.position_and_tangents(*th, *ph).0)
                    .collect();
                ClosedCurve::new(pts)
            };
            Ok((to_curve(&samples_x, tx), to_curve(&samples_y, ty), tx, ty))
        }
    }
}

fn trace_dense(
    grid: &SurfaceGrid,
    v: &TangentField,
    start: (f64, f64),
    t_end: f64,
    max_step: f64,
) -> Result<FieldLine> {
    let itp = FieldInterpolant::new(grid, v);
    let rhs = |_t: f64, y: &[f64], dy: &mut [f64]| {
        let (vt, vp) = itp.eval(y[0], y[1]);
        dy[0] = vt;
        dy[1] = vp;
    };
    let opts = OdeOptions { rtol: 1e-10, atol: 1e-12, max_step, max_steps: 20_000_000 };
    let mut times = vec![0.0];
    let mut theta = vec![start.0];
    let mut phi = vec![start.1];
    let (_, _, stats) = integrate(rhs, 0.0, &[start.0, start.1], t_end, &opts, |s| {
        times.push(s.t1);
        theta.push(s.y1[0]);
        phi.push(s.y1[1]);
        StepControl::Continue
    })?;
    Ok(FieldLine { times, theta, phi, stats })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn circle(center: Vec3, radius: f64, n: usize, plane: u8) -> ClosedCurve {
        let pts = (0..n)
            .map(|k| {
                let a = TAU * k as f64 / n as f64;
                match plane {
                    0 => add3(center, [radius * a.cos(), radius * a.sin(), 0.0]),
                    _ => add3(center, [radius * a.cos(), 0.0, radius * a.sin()]),
                }
            })
            .collect();
        ClosedCurve::new(pts)
    }

    #[test]
    fn unlinked_circles() {
        let a = circle([0.0, 0.0, 0.0], 1.0, 512, 0);
        let b = circle([10.0, 0.0, 0.0], 1.0, 512, 0);
        let lk = gauss_linking(&a, &b).unwrap();
        assert!(lk.abs() < 1e-6, "{lk}");
    }

    #[test]
    fn hopf_pair_links_once() {
        let a = circle([0.0, 0.0, 0.0], 1.0, 512, 0);
        let b = circle([1.0, 0.0, 0.0], 1.0, 512, 1);
        let lk = gauss_linking(&a, &b).unwrap();
        assert!((lk.abs() - 1.0).abs() < 1e-6, "{lk}");
        // symmetry and orientation
        let lk_ba = gauss_linking(&b, &a).unwrap();
        assert!((lk - lk_ba).abs() < 1e-10);
        let lk_rev = gauss_linking(&a.reversed(), &b).unwrap();
        assert!((lk + lk_rev).abs() < 1e-12);
    }

    #[test]
    fn near_intersection_rejected() {
        let a = circle([0.0, 0.0, 0.0], 1.0, 128, 0);
        let b = circle([1e-9, 0.0, 0.0], 1.0, 128, 0);
        assert!(matches!(gauss_linking(&a, &b), Err(Error::Proximity(_))));
    }
}
