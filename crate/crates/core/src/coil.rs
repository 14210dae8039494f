//! Divergence-free sheet currents on a coil winding surface, the simple
//! (zero average toroidal winding) constraint, kernel extraction and the
//! Tikhonov-regularised target-field solves.

use crate::biot_savart::bs_at_points;
use crate::error::{Error, Result};
use crate::fields::{inner_product, TangentField};
use crate::geometry::{FourierTorus, SurfaceGrid};
use crate::harmonic::HarmonicBasis;
use crate::math::{norm3, Vec3};
use crate::neumann;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

/// One Fourier mode of the single-valued current potential, argument
/// `m theta - n nfp phi`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PotentialMode {
    pub m: i32,
    pub n: i32,
}

/// A divergence-free surface current: rotated gradient of a single-valued
/// potential plus the two secular (net-winding) terms.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CurrentPotential {
    pub modes: Vec<PotentialMode>,
    /// sin / cos coefficients per mode.
    pub sin_coeffs: Vec<f64>,
    pub cos_coeffs: Vec<f64>,
    /// Coefficient of `N x grad theta`.
    pub a_pol: f64,
    /// Coefficient of `N x grad phi`.
    pub b_tor: f64,
}

/// Degree-of-freedom basis of sheet currents on a fixed grid. Coefficient
/// layout: `[sin(mode 0), cos(mode 0), sin(mode 1), ..., a_pol, b_tor]`.
pub struct CurrentBasis {
    pub modes: Vec<PotentialMode>,
    pub fields: Vec<TangentField>,
}

impl CurrentBasis {
    pub fn n_dofs(&self) -> usize {
        self.fields.len()
    }

    pub fn realize(&self, grid: &SurfaceGrid, coeffs: &DVector<f64>) -> TangentField {
        assert_eq!(coeffs.len(), self.n_dofs());
        let mut out = TangentField::zeros(grid);
        for (f, &c) in self.fields.iter().zip(coeffs.iter()) {
            if c != 0.0 {
                out = out.linear_comb(1.0, f, c);
            }
        }
        out
    }

    pub fn to_potential(&self, coeffs: &DVector<f64>) -> CurrentPotential {
        let nm = self.modes.len();
        CurrentPotential {
            modes: self.modes.clone(),
            sin_coeffs: (0..nm).map(|k| coeffs[2 * k]).collect(),
            cos_coeffs: (0..nm).map(|k| coeffs[2 * k + 1]).collect(),
            a_pol: coeffs[2 * nm],
            b_tor: coeffs[2 * nm + 1],
        }
    }

    pub fn from_potential(&self, pot: &CurrentPotential) -> Result<DVector<f64>> {
        if pot.modes != self.modes {
            return Err(Error::Config("potential mode set differs from basis".into()));
        }
        let nm = self.modes.len();
        let mut c = DVector::zeros(self.n_dofs());
        for k in 0..nm {
            c[2 * k] = pot.sin_coeffs[k];
            c[2 * k + 1] = pot.cos_coeffs[k];
        }
        c[2 * nm] = pot.a_pol;
        c[2 * nm + 1] = pot.b_tor;
        Ok(c)
    }
}

/// Build the truncated current basis: potential modes `m <= m_max`,
/// `|n| <= n_max` (sin and cos), plus the two secular currents.
pub fn current_basis(grid: &SurfaceGrid, m_max: i32, n_max: i32) -> CurrentBasis {
    let nfp = grid.surface.nfp as f64;
    let mut modes = Vec::new();
    for m in 0..=m_max {
        for n in -n_max..=n_max {
            if m == 0 && n <= 0 {
                continue; // (0,0) is constant; (0,-n) duplicates (0,n)
            }
            modes.push(PotentialMode { m, n });
        }
    }
    let npts = grid.len();
    let mut fields = Vec::with_capacity(2 * modes.len() + 2);
    for mode in &modes {
        let (mf, nf) = (mode.m as f64, mode.n as f64 * nfp);
        // covariant gradient components of sin(arg) and cos(arg)
        let mut sin_ct = Vec::with_capacity(npts);
        let mut sin_cp = Vec::with_capacity(npts);
        let mut cos_ct = Vec::with_capacity(npts);
        let mut cos_cp = Vec::with_capacity(npts);
        for i in 0..grid.n_theta {
            let th = grid.theta(i);
            for j in 0..grid.n_phi {
                let arg = mf * th - nf * grid.phi(j);
                let (s, c) = arg.sin_cos();
                sin_ct.push(mf * c);
                sin_cp.push(-nf * c);
                cos_ct.push(-mf * s);
                cos_cp.push(nf * s);
            }
        }
        // j = N x grad(Phi) = -(grad(Phi) x N)
        let grad_sin = crate::calculus::raise_covariant(grid, &sin_ct, &sin_cp);
        let grad_cos = crate::calculus::raise_covariant(grid, &cos_ct, &cos_cp);
        fields.push(grad_sin.cross_normal(grid).scaled(-1.0));
        fields.push(grad_cos.cross_normal(grid).scaled(-1.0));
    }
    let (c_theta, c_phi) = crate::harmonic::closed_coordinate_fields(grid);
    fields.push(c_theta.cross_normal(grid).scaled(-1.0));
    fields.push(c_phi.cross_normal(grid).scaled(-1.0));
    CurrentBasis { modes, fields }
}

/// Magnetic field of a straight wire of current `I` on the z-axis.
/// Errors if a point sits on the axis.
pub fn target_wire_field(points: &[Vec3], current: f64) -> Result<Vec<Vec3>> {
    let mut out = Vec::with_capacity(points.len());
    for (k, p) in points.iter().enumerate() {
        let rho2 = p[0] * p[0] + p[1] * p[1];
        if rho2 < 1e-24 {
            return Err(Error::Geometry(format!(
                "point {k} lies on the wire axis; field singular"
            )));
        }
        let s = current / (2.0 * std::f64::consts::PI * rho2);
        out.push([-p[1] * s, p[0] * s, 0.0]);
    }
    Ok(out)
}

/// Worst div/curl residual of a field closure over probe points, by
/// fourth-order central differences with spacing `h`.
pub fn field_harmonicity_residual(
    field: impl Fn(Vec3) -> Vec3,
    probes: &[Vec3],
    h: f64,
) -> f64 {
    let mut worst = 0.0_f64;
    for p in probes {
        let mut jac = [[0.0_f64; 3]; 3];
        for k in 0..3 {
            let mut p1 = *p;
            let mut p2 = *p;
            let mut m1 = *p;
            let mut m2 = *p;
            p1[k] += h;
            p2[k] += 2.0 * h;
            m1[k] -= h;
            m2[k] -= 2.0 * h;
            let (f_p1, f_p2, f_m1, f_m2) = (field(p1), field(p2), field(m1), field(m2));
            for c in 0..3 {
                jac[c][k] = (-f_p2[c] + 8.0 * f_p1[c] - 8.0 * f_m1[c] + f_m2[c]) / (12.0 * h);
            }
        }
        let div = jac[0][0] + jac[1][1] + jac[2][2];
        let curl = [
            jac[2][1] - jac[1][2],
            jac[0][2] - jac[2][0],
            jac[1][0] - jac[0][1],
        ];
        worst = worst.max(div.abs()).max(norm3(curl));
    }
    worst
}

/// Volume quadrature of the plasma region with samples of the target field.
pub struct PlasmaTarget {
    pub plasma: FourierTorus,
    pub nodes: Vec<Vec3>,
    pub weights: Vec<f64>,
    pub b_target: Vec<Vec3>,
}

/// Build the plasma target for the straight-wire field threading the hole.
/// Validates harmonicity of the samples on a probe stencil.
pub fn plasma_target_wire(
    plasma: &FourierTorus,
    current: f64,
    n_s: usize,
    n_alpha: usize,
    n_phi: usize,
) -> Result<PlasmaTarget> {
    let (nodes, weights) = neumann::volume_quadrature(plasma, n_s, n_alpha, n_phi);
    let b_target = target_wire_field(&nodes, current)?;
    let b_scale = b_target.iter().map(|b| norm3(*b)).fold(0.0_f64, f64::max);
    let wire = |p: Vec3| {
        let rho2 = p[0] * p[0] + p[1] * p[1];
        let s = current / (2.0 * std::f64::consts::PI * rho2);
        [-p[1] * s, p[0] * s, 0.0]
    };
    let stride = (nodes.len() / 16).max(1);
    let probes: Vec<Vec3> = nodes.iter().step_by(stride).copied().collect();
    let resid = field_harmonicity_residual(wire, &probes, 1e-3);
    if resid > 1e-6 * b_scale.max(1e-300) {
        return Err(Error::Solve(format!(
            "target field fails the harmonicity stencil: residual {resid:.3e}"
        )));
    }
    Ok(PlasmaTarget { plasma: plasma.clone(), nodes, weights, b_target })
}

/// Dense linear map from current coefficients to the (weighted) field values
/// at the plasma nodes, plus the Gram matrix and the simple-constraint
/// pairing vector.
pub struct BsMatrix {
    /// (3 n_p) x n_dof, rows scaled by sqrt(weight).
    pub matrix: DMatrix<f64>,
    /// sqrt(weight)-scaled target samples.
    pub rhs: DVector<f64>,
    /// L2(Sigma) Gram matrix of the basis currents.
    pub gram: DMatrix<f64>,
    /// `<j_d, gamma_t>` per degree of freedom.
    pub gamma_t_pairing: DVector<f64>,
    /// Surface area (for Q_bar).
    pub area: f64,
}

/// Assemble the Biot-Savart matrix column by column. The separation
/// precondition (plasma nodes at least two grid steps from the surface) is
/// enforced by the point evaluator.
pub fn assemble_bs_matrix(
    grid: &SurfaceGrid,
    basis: &CurrentBasis,
    target: &PlasmaTarget,
    harmonic: &HarmonicBasis,
) -> Result<BsMatrix> {
    let n_p = target.nodes.len();
    let n_dof = basis.n_dofs();
    let sqrt_w: Vec<f64> = target.weights.iter().map(|w| w.sqrt()).collect();
    let mut matrix = DMatrix::zeros(3 * n_p, n_dof);
    for (d, jf) in basis.fields.iter().enumerate() {
        let b = bs_at_points(grid, jf, &target.nodes)?;
        for i in 0..n_p {
            for c in 0..3 {
                matrix[(3 * i + c, d)] = sqrt_w[i] * b[i][c];
            }
        }
    }
    let mut rhs = DVector::zeros(3 * n_p);
    for i in 0..n_p {
        for c in 0..3 {
            rhs[3 * i + c] = sqrt_w[i] * target.b_target[i][c];
        }
    }
    // Gram matrix via the pointwise Cholesky factor of the weighted metric
    let npts = grid.len();
    let mut m = DMatrix::zeros(2 * npts, n_dof);
    for i in 0..npts {
        let w = grid.weight(i);
        let l11 = (grid.g_tt[i] * w).sqrt();
        let l21 = grid.g_tp[i] * w / l11;
        let l22 = (grid.g_pp[i] * w - l21 * l21).max(0.0).sqrt();
        for (d, jf) in basis.fields.iter().enumerate() {
            m[(2 * i, d)] = l11 * jf.comp_theta[i] + l21 * jf.comp_phi[i];
            m[(2 * i + 1, d)] = l22 * jf.comp_phi[i];
        }
    }
    let gram = m.transpose() * &m;
    let gamma_t_pairing = DVector::from_iterator(
        n_dof,
        basis
            .fields
            .iter()
            .map(|jf| inner_product(grid, jf, &harmonic.gamma_t)),
    );
    Ok(BsMatrix { matrix, rhs, gram, gamma_t_pairing, area: grid.area() })
}

/// Discrete kernel of the Biot-Savart map.
pub struct KernelReport {
    pub coeffs: DVector<f64>,
    /// sigma_min / sigma_max.
    pub sigma_min_ratio: f64,
    /// second-smallest / largest singular value.
    pub sigma_second_ratio: f64,
    /// `||A j0|| / sigma_max` after L2 normalisation.
    pub residual_ratio: f64,
}

/// Smallest right-singular vector of the assembled map, L2(Sigma)-normalised
/// and oriented so that `<j0, gamma_t> > 0`. Errors if the smallest singular
/// value is not separated by a factor 10 from the next one.
pub fn kernel_current(bs: &BsMatrix) -> Result<KernelReport> {
    let svd = bs.matrix.clone().svd(false, true);
    let v_t = svd.v_t.as_ref().expect("V^T requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| {
        svd.singular_values[a]
            .partial_cmp(&svd.singular_values[b])
            .unwrap()
    });
    let s_min = svd.singular_values[order[0]];
    let s_second = svd.singular_values[order[1]];
    let s_max = svd.singular_values[order[order.len() - 1]];
    if s_second < 10.0 * s_min {
        return Err(Error::KernelResolution(format!(
            "kernel not separated: sigma_min={s_min:.3e}, next={s_second:.3e}"
        )));
    }
    let mut coeffs: DVector<f64> = v_t.row(order[0]).transpose().into_owned();
    // L2(Sigma) normalisation and a deterministic sign
    let norm_sq = (coeffs.transpose() * &bs.gram * &coeffs)[(0, 0)];
    coeffs /= norm_sq.sqrt();
    let pairing = bs.gamma_t_pairing.dot(&coeffs);
    if pairing < 0.0 {
        coeffs = -coeffs;
    }
    let residual = (&bs.matrix * &coeffs).norm();
    Ok(KernelReport {
        coeffs,
        sigma_min_ratio: s_min / s_max,
        sigma_second_ratio: s_second / s_max,
        residual_ratio: residual / s_max,
    })
}

/// Shift a current along the kernel direction so that `Q_bar = 0`, leaving
/// the plasma field unchanged: `j' = j + alpha j0` with
/// `alpha = -<j, gamma_t> / <j0, gamma_t>`.
///
/// The pairing is snapped to zero near rounding level, which makes the map
/// exactly idempotent.
pub fn simplify_current(
    bs: &BsMatrix,
    coeffs: &DVector<f64>,
    kernel: &KernelReport,
) -> Result<DVector<f64>> {
    let g = &bs.gamma_t_pairing;
    let denom = g.dot(&kernel.coeffs);
    if denom.abs() < 1e-12 * g.norm() * kernel.coeffs.norm() {
        return Err(Error::DegeneratePeriod(
            "kernel current pairs to zero with gamma_t".into(),
        ));
    }
    let mut pairing = g.dot(coeffs);
    let snap = 1e3 * f64::EPSILON * g.norm() * coeffs.norm();
    if pairing.abs() <= snap {
        pairing = 0.0;
    }
    let alpha = -pairing / denom;
    if alpha == 0.0 {
        return Ok(coeffs.clone());
    }
    Ok(coeffs + kernel.coeffs.scale(alpha))
}

/// One Tikhonov solve.
#[derive(Debug, Clone, Serialize)]
pub struct SolveResult {
    pub lambda: f64,
    /// `||BS(j) - B_T||^2_{L2(P)}`.
    pub misfit: f64,
    /// `||j||^2_{L2(Sigma)}`.
    pub penalty: f64,
    pub objective: f64,
    pub q_bar: f64,
    /// Relative residual of the (projected) normal equations.
    pub normal_residual: f64,
    #[serde(skip)]
    pub coeffs: DVector<f64>,
}

/// Minimise `||BS(j) - B_T||^2_{L2(P)} + lambda ||j||^2_{L2(Sigma)}`,
/// optionally over the simple subspace `<j, gamma_t> = 0` (eliminated by a
/// Householder null-space parametrisation).
pub fn solve_current(bs: &BsMatrix, lambda: f64, simple: bool) -> Result<SolveResult> {
    if lambda <= 0.0 {
        return Err(Error::Config(format!("lambda must be positive, got {lambda}")));
    }
    let h = bs.matrix.transpose() * &bs.matrix + bs.gram.scale(lambda);
    let rhs = bs.matrix.transpose() * &bs.rhs;

    let coeffs = if simple {
        let z = householder_null_space(&bs.gamma_t_pairing);
        let hz = z.transpose() * &h * &z;
        let rz = z.transpose() * &rhs;
        let y = solve_spd(&hz, &rz)?;
        &z * y
    } else {
        solve_spd(&h, &rhs)?
    };

    let resid_vec = &bs.matrix * &coeffs - &bs.rhs;
    let misfit = resid_vec.norm_squared();
    let penalty = (coeffs.transpose() * &bs.gram * &coeffs)[(0, 0)];
    let normal_res = {
        let full = &h * &coeffs - &rhs;
        let r = if simple {
            let z = householder_null_space(&bs.gamma_t_pairing);
            (z.transpose() * &full).norm()
        } else {
            full.norm()
        };
        r / rhs.norm().max(1e-300)
    };
    Ok(SolveResult {
        lambda,
        misfit,
        penalty,
        objective: misfit + lambda * penalty,
        q_bar: bs.gamma_t_pairing.dot(&coeffs) / bs.area,
        normal_residual: normal_res,
        coeffs,
    })
}

/// Per-lambda solves, descending lambda.
pub fn lambda_sweep(bs: &BsMatrix, lambdas: &[f64], simple: bool) -> Result<Vec<SolveResult>> {
    let mut out = Vec::with_capacity(lambdas.len());
    for &l in lambdas {
        out.push(solve_current(bs, l, simple)?);
    }
    Ok(out)
}

/// Orthonormal basis of the hyperplane `g . c = 0` from a Householder
/// reflector mapping g to a coordinate axis.
fn householder_null_space(g: &DVector<f64>) -> DMatrix<f64> {
    let n = g.len();
    let gn = g.norm();
    if gn == 0.0 {
        return DMatrix::identity(n, n);
    }
    let mut v = g / gn;
    let s = if v[0] >= 0.0 { 1.0 } else { -1.0 };
    v[0] += s;
    let vn2 = v.norm_squared();
    let mut z = DMatrix::zeros(n, n - 1);
    for col in 1..n {
        // column `col` of Q = I - 2 v v^T / |v|^2
        for row in 0..n {
            let id = if row == col { 1.0 } else { 0.0 };
            z[(row, col - 1)] = id - 2.0 * v[row] * v[col] / vn2;
        }
    }
    z
}

/// Cholesky solve with one step of iterative refinement.
fn solve_spd(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    let chol = a
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Solve("normal matrix not positive definite".into()))?;
    let mut x = chol.solve(b);
    let r = b - a * &x;
    x += chol.solve(&r);
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calculus::weak_divergence_residual;
    use crate::geometry::build_grid;
    use crate::harmonic::{harmonic_basis, CanonicalCurves};

    #[test]
    fn wire_field_value_and_harmonicity() {
        let b = target_wire_field(&[[2.0, 0.0, 0.0]], 1.0).unwrap();
        let expect = 1.0 / (4.0 * std::f64::consts::PI);
        assert!((b[0][0]).abs() < 1e-15);
        assert!((b[0][1] - expect).abs() < 1e-15);
        assert!((b[0][2]).abs() < 1e-15);
        assert!(target_wire_field(&[[0.0, 0.0, 1.0]], 1.0).is_err());
        assert!(target_wire_field(&[[2.0, 0.0, 0.0]], 0.0).unwrap()[0] == [0.0, 0.0, 0.0]);
    }

    #[test]
    fn basis_currents_are_divergence_free() {
        let g = build_grid(&FourierTorus::standard(), 24, 24).unwrap();
        let basis = current_basis(&g, 2, 1);
        for f in basis.fields.iter().step_by(3) {
            assert!(weak_divergence_residual(&g, f) < 1e-8);
        }
    }

    #[test]
    fn only_secular_dofs_pair_with_gamma_t() {
        let g = build_grid(&FourierTorus::standard(), 32, 32).unwrap();
        let hb = harmonic_basis(&g, &CanonicalCurves::standard(&g)).unwrap();
        let basis = current_basis(&g, 2, 2);
        let nd = basis.n_dofs();
        for (d, f) in basis.fields.iter().enumerate() {
            let p = inner_product(&g, f, &hb.gamma_t);
            if d < nd - 2 {
                assert!(p.abs() < 1e-10, "dof {d} pairing {p:.3e}");
            }
        }
        // at least one secular dof must pair nontrivially
        let p_sec = inner_product(&g, &basis.fields[nd - 1], &hb.gamma_t).abs()
            + inner_product(&g, &basis.fields[nd - 2], &hb.gamma_t).abs();
        assert!(p_sec > 1e-3);
    }

    #[test]
    fn householder_null_space_is_orthonormal_annihilator() {
        let g = DVector::from_vec(vec![0.3, -1.2, 0.05, 2.0]);
        let z = householder_null_space(&g);
        let gz = g.transpose() * &z;
        assert!(gz.norm() < 1e-14);
        let ztz = z.transpose() * &z;
        assert!((ztz - DMatrix::identity(3, 3)).norm() < 1e-13);
    }
}
