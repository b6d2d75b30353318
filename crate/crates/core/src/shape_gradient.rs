//! Exact derivative of the penalized objective with respect to the surface
//! Fourier coefficients.
//!
//! At the inner optimum the current coefficients need no differentiation
//! (envelope argument: the inner stationarity kills their sensitivity), and
//! the derivative of the confinement cost in direction `theta` reduces to
//! two surface fields,
//!
//! ```text
//!   dC(S; theta) = int_S ( <theta, X1> + Dtheta : X2 ) dmu_S,
//!   X1 = -2 Zhat(residual, j),
//!   X2 = -2 Z(residual) j^T + 2 lambda j j^T - lambda |j|^2 (I - nu nu^T),
//! ```
//!
//! with `Z`/`Zhat` from [`crate::biot_savart::adjoint_fields`] and the
//! residual measure `k = <BS j - B_T, nu> nu` on the plasma cloud. Every
//! row of `X2` is tangential, so `Dtheta : X2` needs only tangential
//! derivatives of `theta`, available analytically for the coefficient
//! perturbations. The same quadrature as the cost itself makes the
//! contraction agree with central finite differences of the discrete cost
//! to truncation error.

use rayon::prelude::*;

use crate::basis::{CoeffId, CoefficientBasis};
use crate::biot_savart::{adjoint_fields, bs_field, TargetSpec};
use crate::currents::push_forward;
use crate::error::{CoreError, Result};
use crate::inverse::{eval_cost_full, CostEvaluation, SolveSettings};
use crate::penalties::{penalty_eval, PenaltyConfig, PenaltyValues};
use crate::surfaces::{eval_mesh, FourierSurface, SurfaceMesh};
use crate::{Mat3, Vec3};

/// Inner-solve stationarity required before gradients are trusted.
pub const STATIONARITY_TOL: f64 = 1e-8;

/// Per-coefficient derivative of the objective, split by term.
#[derive(Debug, Clone)]
pub struct ShapeGradient {
    pub ids: Vec<CoeffId>,
    /// Derivative of the confinement cost `C = chi2_b + lambda chi2_j`.
    pub d_cost: Vec<f64>,
    pub d_perimeter: Vec<f64>,
    pub d_distance: Vec<f64>,
    pub d_reach: Vec<f64>,
    /// Elementwise sum of the four parts.
    pub d_total: Vec<f64>,
}

impl ShapeGradient {
    pub fn total_norm(&self) -> f64 {
        self.d_total.iter().map(|g| g * g).sum::<f64>().sqrt()
    }
}

/// Objective value bundle corresponding to a [`ShapeGradient`].
#[derive(Debug, Clone)]
pub struct ObjectiveValue {
    pub cost: f64,
    pub chi2_b: f64,
    pub chi2_j: f64,
    pub penalties: PenaltyValues,
    /// `cost + penalties.total`.
    pub total: f64,
}

/// The two shape-derivative fields on the CWS grid.
///
/// Fails with [`CoreError::NotStationary`] unless the inner solve met its
/// optimality tolerance.
pub fn compute_x1_x2(
    mesh: &SurfaceMesh,
    target: &TargetSpec,
    ev: &CostEvaluation,
    guard: f64,
) -> Result<(Vec<Vec3>, Vec<Mat3>)> {
    if ev.result.stationarity > STATIONARITY_TOL {
        return Err(CoreError::NotStationary {
            residual: ev.result.stationarity,
            tol: STATIONARITY_TOL,
        });
    }
    let lambda = ev.result.lambda;
    let pot = ev
        .basis
        .potential(&ev.result.phi_opt, ev.op.i_pol, ev.op.i_tor);
    let current = push_forward(&pot, mesh);

    // residual measure on the plasma cloud, k = <BS j - g> nu
    let fields = bs_field(mesh, &current, &target.points, guard)?;
    let k_cloud: Vec<Vec3> = (0..target.cloud_len())
        .map(|p| target.normals[p] * (fields[p].dot(&target.normals[p]) - target.g_target[p]))
        .collect();

    let (z, zhat) = adjoint_fields(mesh, target, &k_cloud, &current, guard)?;

    let eye = Mat3::identity();
    let mut x1 = Vec::with_capacity(mesh.len());
    let mut x2 = Vec::with_capacity(mesh.len());
    for k in 0..mesh.len() {
        let j = current.vectors[k];
        let nu = mesh.normal[k];
        x1.push(-2.0 * zhat[k]);
        let proj = eye - nu * nu.transpose();
        x2.push(
            -2.0 * z[k] * j.transpose() + 2.0 * lambda * j * j.transpose()
                - lambda * j.norm_squared() * proj,
        );
    }
    Ok((x1, x2))
}

/// Contract the shape-derivative fields against each coefficient
/// perturbation:
/// `dC_k = N_p sum_s w_s ( <theta_k, X1> + sum_i <grad_S (theta_k)_i, (X2)_i:> )`.
pub fn contract_gradient(
    mesh: &SurfaceMesh,
    x1: &[Vec3],
    x2: &[Mat3],
    basis: &CoefficientBasis,
) -> Vec<f64> {
    // collapse X2 against the metric once:
    // sum_i <grad_S th_i, r_i> = <th_u, Wu> + <th_v, Wv>,
    // W_b = sum_a g^{ba} (X2 psi_a)
    let n = mesh.len();
    let mut wu = vec![Vec3::zeros(); n];
    let mut wv = vec![Vec3::zeros(); n];
    for k in 0..n {
        let g = &mesh.metric[k];
        let xu = x2[k] * mesh.du_tan[k];
        let xv = x2[k] * mesh.dv_tan[k];
        wu[k] = xu * g.inv_uu + xv * g.inv_uv;
        wv[k] = xu * g.inv_uv + xv * g.inv_vv;
    }

    let full = mesh.n_fp as f64;
    basis
        .ids
        .par_iter()
        .map(|&id| {
            let f = basis.field(id);
            let mut acc = 0.0;
            for k in 0..n {
                acc += (f.theta[k].dot(&x1[k]) + f.theta_u[k].dot(&wu[k]) + f.theta_v[k].dot(&wv[k]))
                    * mesh.weight(k);
            }
            full * acc
        })
        .collect()
}

/// Evaluate the full objective and its gradient at a surface.
pub fn objective_with_gradient(
    surface: &FourierSurface,
    target: &TargetSpec,
    settings: &SolveSettings,
    pen_cfg: &PenaltyConfig,
) -> Result<(ObjectiveValue, ShapeGradient)> {
    let ev = eval_cost_full(surface, target, settings)?;
    let (x1, x2) = compute_x1_x2(&ev.mesh, target, &ev, settings.guard_dist)?;
    let basis = CoefficientBasis::for_surface(surface, &ev.mesh);
    let d_cost = contract_gradient(&ev.mesh, &x1, &x2, &basis);
    let (pen_values, pen_grads) = penalty_eval(&ev.mesh, target, &basis, pen_cfg);

    let d_total: Vec<f64> = (0..basis.len())
        .map(|k| d_cost[k] + pen_grads.perimeter[k] + pen_grads.distance[k] + pen_grads.reach[k])
        .collect();
    let value = ObjectiveValue {
        cost: ev.result.cost,
        chi2_b: ev.result.chi2_b,
        chi2_j: ev.result.chi2_j,
        penalties: pen_values,
        total: ev.result.cost + pen_values.total,
    };
    let grad = ShapeGradient {
        ids: basis.ids.clone(),
        d_cost,
        d_perimeter: pen_grads.perimeter,
        d_distance: pen_grads.distance,
        d_reach: pen_grads.reach,
        d_total,
    };
    Ok((value, grad))
}

/// Total objective value only (used by finite-difference probes and line
/// searches).
pub fn objective_value(
    surface: &FourierSurface,
    target: &TargetSpec,
    settings: &SolveSettings,
    pen_cfg: &PenaltyConfig,
) -> Result<f64> {
    let result = crate::inverse::eval_cost(surface, target, settings)?;
    let mesh = eval_mesh(surface, settings.n_u, settings.n_v)?;
    let pen = crate::penalties::penalty_values(&mesh, target, pen_cfg);
    Ok(result.cost + pen.total)
}

/// Apply a coefficient step to a surface (missing modes are created).
pub fn apply_step(surface: &FourierSurface, ids: &[CoeffId], step: &[f64]) -> FourierSurface {
    assert_eq!(ids.len(), step.len());
    let mut out = surface.clone();
    for (id, &h) in ids.iter().zip(step) {
        if h == 0.0 {
            continue;
        }
        match id.kind {
            crate::basis::CoeffKind::RCos => out.set_r(id.m, id.n, out.r(id.m, id.n) + h),
            crate::basis::CoeffKind::ZSin => out.set_z(id.m, id.n, out.z(id.m, id.n) + h),
        }
    }
    out
}

/// One row of a finite-difference verification report.
#[derive(Debug, Clone)]
pub struct FdEntry {
    pub id: CoeffId,
    pub analytic: f64,
    pub fd: f64,
    pub rel_err: f64,
    /// Components with `|analytic|` below `1e-8 * ||grad||` are judged
    /// against the looser small-component tolerance.
    pub small: bool,
}

/// Outcome of [`fd_gradient_check`].
#[derive(Debug, Clone)]
pub struct FdReport {
    pub entries: Vec<FdEntry>,
    pub max_rel: f64,
    pub max_rel_small: f64,
    pub median_rel: f64,
    pub step: f64,
}

impl FdReport {
    /// Error with the worst direction if any component exceeds `tol`
    /// (small components judged against `small_tol`).
    pub fn ensure_within(&self, tol: f64, small_tol: f64) -> Result<()> {
        for e in &self.entries {
            let lim = if e.small { small_tol } else { tol };
            if e.rel_err > lim {
                return Err(CoreError::ToleranceExceeded {
                    max_rel: e.rel_err,
                    tol: lim,
                    worst: e.id.to_string(),
                });
            }
        }
        Ok(())
    }
}

/// Compare the analytic gradient against central finite differences of the
/// total objective along `n_probe` coefficient directions (deterministic
/// choice: evenly strided through the basis ordering).
pub fn fd_gradient_check(
    surface: &FourierSurface,
    target: &TargetSpec,
    settings: &SolveSettings,
    pen_cfg: &PenaltyConfig,
    n_probe: usize,
    step: f64,
) -> Result<FdReport> {
    assert!((1e-8..=1e-3).contains(&step), "fd step outside [1e-8, 1e-3]");
    let (_, grad) = objective_with_gradient(surface, target, settings, pen_cfg)?;
    let dim = grad.ids.len();
    let n_probe = n_probe.min(dim).max(1);
    let stride = dim.div_ceil(n_probe);
    let grad_norm = grad.total_norm();

    let mut entries = Vec::new();
    for idx in (0..dim).step_by(stride) {
        let id = grad.ids[idx];
        let mut dir = vec![0.0; dim];
        dir[idx] = step;
        let f_plus = objective_value(&apply_step(surface, &grad.ids, &dir), target, settings, pen_cfg)?;
        dir[idx] = -step;
        let f_minus = objective_value(&apply_step(surface, &grad.ids, &dir), target, settings, pen_cfg)?;
        let fd = (f_plus - f_minus) / (2.0 * step);
        let analytic = grad.d_total[idx];
        let scale = analytic.abs().max(fd.abs());
        let rel_err = if scale == 0.0 {
            0.0
        } else {
            (analytic - fd).abs() / scale
        };
        entries.push(FdEntry {
            id,
            analytic,
            fd,
            rel_err,
            small: analytic.abs() < 1e-8 * grad_norm,
        });
    }

    let mut rels: Vec<f64> = entries.iter().map(|e| e.rel_err).collect();
    rels.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median_rel = rels[rels.len() / 2];
    let max_rel = entries
        .iter()
        .filter(|e| !e.small)
        .map(|e| e.rel_err)
        .fold(0.0, f64::max);
    let max_rel_small = entries
        .iter()
        .filter(|e| e.small)
        .map(|e| e.rel_err)
        .fold(0.0, f64::max);
    Ok(FdReport {
        entries,
        max_rel,
        max_rel_small,
        median_rel,
        step,
    })
}
