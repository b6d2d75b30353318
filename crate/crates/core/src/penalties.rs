//! Smooth one-sided barriers on perimeter, plasma distance and reach, with
//! analytic gradients with respect to the surface Fourier coefficients.
//!
//! Each barrier is `w * max(0, violation_ratio)^p` (cubic by default, so
//! value and slope vanish at the threshold). The penalized quantities are
//! smoothed so the barriers are differentiable:
//!
//! * perimeter: the full-surface area (already smooth in the coefficients);
//! * distance: a log-sum-exp soft minimum over (CWS node, plasma node)
//!   pairs — reported distances stay hard minima;
//! * reach: soft minimum of two branches, the inverse of a soft maximum of
//!   the pointwise curvature bound `|H| + sqrt(H^2 - K)`, and a soft
//!   minimum of the pair bound `|y-x|^2 / (2 |<y-x, nu(x)>|)` over
//!   chart-far pairs.
//!
//! Soft minima underestimate and the soft maximum overestimates, so every
//! smoothing error pushes the barrier toward activating slightly early.
//! Gradients are assembled by accumulating per-node adjoint vectors over
//! the pair scans once, then contracting with each coefficient's
//! perturbation field.

use rayon::prelude::*;

use crate::basis::{CoefficientBasis, PerturbationField};
use crate::biot_savart::TargetSpec;
use crate::geometry::{full_chart_coords, wrap_dist};
use crate::surfaces::SurfaceMesh;
use crate::Vec3;

/// Thresholds, weights and smoothing temperatures of the three barriers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PenaltyConfig {
    /// Perimeter barrier activates above this area, m^2.
    pub perimeter_max: f64,
    pub perimeter_weight: f64,
    /// Distance barrier activates below this CWS-plasma distance, m.
    pub distance_min: f64,
    pub distance_weight: f64,
    /// Reach barrier activates below this reach estimate, m.
    pub reach_min: f64,
    pub reach_weight: f64,
    /// Barrier exponent; 3 keeps the barrier C^1 at the threshold.
    pub barrier_power: i32,
    /// Log-sum-exp temperature for distance/bottleneck soft minima, m.
    pub lse_temp: f64,
    /// Soft-max temperature for the curvature bound, 1/m.
    pub curvature_temp: f64,
    /// Chart-distance cutoff separating "far" pairs in the bottleneck scan.
    pub chart_cutoff: f64,
}

impl Default for PenaltyConfig {
    fn default() -> Self {
        Self {
            perimeter_max: 56.0,
            perimeter_weight: 1.0,
            distance_min: 0.20,
            distance_weight: 1.0,
            reach_min: 0.0769,
            reach_weight: 1.0,
            barrier_power: 3,
            lse_temp: 0.01,
            curvature_temp: 0.02,
            chart_cutoff: 0.25,
        }
    }
}

/// Barrier values plus the geometric diagnostics they were derived from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PenaltyValues {
    pub perimeter: f64,
    pub distance: f64,
    pub reach: f64,
    /// Sum of the three barrier values.
    pub total: f64,
    pub area: f64,
    pub distance_hard: f64,
    pub distance_smooth: f64,
    pub reach_hard: f64,
    pub reach_smooth: f64,
    pub kappa_max: f64,
}

/// Per-coefficient barrier gradients, in the ordering of the basis.
#[derive(Debug, Clone)]
pub struct PenaltyGradients {
    pub perimeter: Vec<f64>,
    pub distance: Vec<f64>,
    pub reach: Vec<f64>,
}

/// `w * relu(r)^p` and its derivative with respect to `r`.
fn barrier(ratio: f64, weight: f64, power: i32) -> (f64, f64) {
    if ratio <= 0.0 || weight == 0.0 {
        return (0.0, 0.0);
    }
    let v = weight * ratio.powi(power);
    let dv = weight * power as f64 * ratio.powi(power - 1);
    (v, dv)
}

/// Pointwise curvature bound and the pieces needed for its derivative.
struct CurvatureNode {
    kappa: f64,
    h: f64,
    s: f64, // sqrt(H^2 - K), clamped away from zero
    l: f64, // second fundamental form against n_hat = -nu
    m2: f64,
    n2: f64,
}

fn curvature_node(mesh: &SurfaceMesh, k: usize) -> CurvatureNode {
    let g = &mesh.metric[k];
    let n_hat = -mesh.normal[k];
    let l = mesh.d2_uu[k].dot(&n_hat);
    let m2 = mesh.d2_uv[k].dot(&n_hat);
    let n2 = mesh.d2_vv[k].dot(&n_hat);
    let det = g.g_uu * g.g_vv - g.g_uv * g.g_uv;
    let h = (g.g_vv * l - 2.0 * g.g_uv * m2 + g.g_uu * n2) / (2.0 * det);
    let kg = (l * n2 - m2 * m2) / det;
    let s = (h * h - kg).max(0.0).sqrt().max(1e-9);
    CurvatureNode {
        kappa: h.abs() + s,
        h,
        s,
        l,
        m2,
        n2,
    }
}

/// Derivative of the curvature bound at node `k` along a perturbation jet.
fn kappa_derivative(mesh: &SurfaceMesh, k: usize, node: &CurvatureNode, f: &PerturbationField) -> f64 {
    let g = &mesh.metric[k];
    let a = mesh.area_elem[k];
    let n_hat = -mesh.normal[k];
    let (pu, pv) = (mesh.du_tan[k], mesh.dv_tan[k]);

    let dg_uu = 2.0 * f.theta_u[k].dot(&pu);
    let dg_uv = f.theta_u[k].dot(&pv) + pu.dot(&f.theta_v[k]);
    let dg_vv = 2.0 * f.theta_v[k].dot(&pv);

    let dcross = f.theta_u[k].cross(&pv) + pu.cross(&f.theta_v[k]);
    let da = n_hat.dot(&dcross);
    let dn_hat = (dcross - n_hat * da) / a;

    let dl = f.theta_uu[k].dot(&n_hat) + mesh.d2_uu[k].dot(&dn_hat);
    let dm = f.theta_uv[k].dot(&n_hat) + mesh.d2_uv[k].dot(&dn_hat);
    let dn = f.theta_vv[k].dot(&n_hat) + mesh.d2_vv[k].dot(&dn_hat);

    let det = a * a;
    let ddet = 2.0 * a * da;
    let num_h = g.g_vv * node.l - 2.0 * g.g_uv * node.m2 + g.g_uu * node.n2;
    let dnum_h = dg_vv * node.l + g.g_vv * dl - 2.0 * (dg_uv * node.m2 + g.g_uv * dm)
        + dg_uu * node.n2
        + g.g_uu * dn;
    let dh = dnum_h / (2.0 * det) - num_h * ddet / (2.0 * det * det);
    let kg_num = node.l * node.n2 - node.m2 * node.m2;
    let dkg = (dl * node.n2 + node.l * dn - 2.0 * node.m2 * dm) / det - kg_num * ddet / (det * det);

    node.h.signum() * dh + (2.0 * node.h * dh - dkg) / (2.0 * node.s)
}

/// Soft minimum of `values` with temperature `tau`; returns the value and
/// the softmax weights (which sum to 1).
fn soft_min(values: &[f64], tau: f64) -> (f64, Vec<f64>) {
    let vmin = values.iter().copied().fold(f64::INFINITY, f64::min);
    if !vmin.is_finite() {
        return (f64::INFINITY, vec![0.0; values.len()]);
    }
    let mut weights: Vec<f64> = values.iter().map(|&v| (-(v - vmin) / tau).exp()).collect();
    let sum: f64 = weights.iter().sum();
    for w in &mut weights {
        *w /= sum;
    }
    (vmin - tau * sum.ln(), weights)
}

/// Per-node adjoint state accumulated by the pair scans: gradients later
/// contract as `sum_k <q.at[k], theta(k)> + <q.at_u[k], theta_u(k)> + ...`.
#[derive(Clone)]
struct NodeAdjoint {
    at: Vec<Vec3>,
    at_u: Vec<Vec3>,
    at_v: Vec<Vec3>,
}

impl NodeAdjoint {
    fn zeros(n: usize) -> Self {
        Self {
            at: vec![Vec3::zeros(); n],
            at_u: vec![Vec3::zeros(); n],
            at_v: vec![Vec3::zeros(); n],
        }
    }

    fn contract(&self, f: &PerturbationField) -> f64 {
        let mut acc = 0.0;
        for k in 0..self.at.len() {
            acc += self.at[k].dot(&f.theta[k])
                + self.at_u[k].dot(&f.theta_u[k])
                + self.at_v[k].dot(&f.theta_v[k]);
        }
        acc
    }
}

/// Distance scan: hard minimum, soft minimum and its adjoint (derivative of
/// the soft minimum collapses onto per-CWS-node vectors since the plasma is
/// fixed).
fn distance_scan(mesh: &SurfaceMesh, target: &TargetSpec, tau: f64) -> (f64, f64, NodeAdjoint) {
    let n = mesh.len();
    let hard = mesh
        .points
        .par_iter()
        .map(|p| {
            target
                .points
                .iter()
                .map(|q| (p - q).norm())
                .fold(f64::INFINITY, f64::min)
        })
        .collect::<Vec<_>>();
    let d_hard = hard.iter().copied().fold(f64::INFINITY, f64::min);

    // per-node partial sums of exp(-(d - d_hard)/tau) and weighted unit vectors
    let partials: Vec<(f64, Vec3)> = (0..n)
        .into_par_iter()
        .map(|k| {
            let x = mesh.points[k];
            let mut sum = 0.0;
            let mut vec = Vec3::zeros();
            for q in &target.points {
                let d = (x - q).norm();
                let e = (-(d - d_hard) / tau).exp();
                if e > 0.0 {
                    sum += e;
                    vec += (x - q) * (e / d);
                }
            }
            (sum, vec)
        })
        .collect();

    let total: f64 = partials.iter().map(|(s, _)| s).sum();
    let d_smooth = d_hard - tau * total.ln();
    let mut adj = NodeAdjoint::zeros(n);
    for k in 0..n {
        adj.at[k] = partials[k].1 / total;
    }
    (d_hard, d_smooth, adj)
}

/// Bottleneck scan over chart-far pairs of the full surface: hard and soft
/// minima of the pair reach bound plus the adjoint of the soft minimum.
fn bottleneck_scan(
    mesh: &SurfaceMesh,
    cutoff: f64,
    tau: f64,
) -> (f64, f64, NodeAdjoint) {
    let n = mesh.len();
    let n_fp = mesh.n_fp as usize;
    let coords = full_chart_coords(mesh);
    let mut cloud = Vec::with_capacity(n * n_fp);
    let mut rotations = Vec::with_capacity(n_fp);
    for p in 0..n_fp {
        let rot = mesh.period_rotation(p as u32);
        for k in 0..n {
            cloud.push(rot * mesh.points[k]);
        }
        rotations.push(rot);
    }
    let cutoff2 = cutoff * cutoff;

    let pair_bound = |a: usize, b: usize| -> Option<(f64, f64, f64)> {
        // returns (q, |d|^2, t = <d, nu_a>) for an admissible pair
        let (ua, va) = coords[a];
        let (ub, vb) = coords[b];
        let du = wrap_dist(ua, ub);
        let dv = wrap_dist(va, vb);
        if du * du + dv * dv <= cutoff2 {
            return None;
        }
        let d = cloud[b] - cloud[a];
        let d2 = d.norm_squared();
        let t = d.dot(&mesh.normal[a]);
        if t.abs() < 1e-12 * d2.sqrt() {
            return None;
        }
        Some((d2 / (2.0 * t.abs()), d2, t))
    };

    // pass 1: hard minimum
    let q_hard = (0..n)
        .into_par_iter()
        .map(|a| {
            let mut best = f64::INFINITY;
            for b in 0..cloud.len() {
                if let Some((q, _, _)) = pair_bound(a, b) {
                    best = best.min(q);
                }
            }
            best
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    if !q_hard.is_finite() {
        return (f64::INFINITY, f64::INFINITY, NodeAdjoint::zeros(n));
    }

    // pass 2: softmax-weighted adjoint, parallel over source-node ranges
    // with an ordered merge (contributions to node b cross chunk bounds)
    const SCAN_CHUNK: usize = 256;
    let starts: Vec<usize> = (0..n).step_by(SCAN_CHUNK).collect();
    let chunks: Vec<(f64, NodeAdjoint)> = starts
        .into_par_iter()
        .map(|start| {
            let stop = (start + SCAN_CHUNK).min(n);
            let mut local_sum = 0.0;
            let mut adj = NodeAdjoint::zeros(n);
            for a in start..stop {
                let nu_a = mesh.normal[a];
                let a_elem = mesh.area_elem[a];
                let n_hat = -nu_a;
                let (pu, pv) = (mesh.du_tan[a], mesh.dv_tan[a]);
                for b in 0..cloud.len() {
                    let Some((q, d2, t)) = pair_bound(a, b) else {
                        continue;
                    };
                    let e = (-(q - q_hard) / tau).exp();
                    if e == 0.0 {
                        continue;
                    }
                    local_sum += e;
                    let d = cloud[b] - cloud[a];
                    let den = 2.0 * t.abs();
                    let c1 = 2.0 / den;
                    let c2 = 2.0 * d2 * t.signum() / (den * den);
                    // dq = <vec_d, theta(b) - theta(a)> + (c2/A) <P d, dcross(a)>
                    let vec_d = d * c1 - nu_a * c2;
                    adj.at[a] -= vec_d * e;
                    let b0 = b % n;
                    let rot_t = rotations[b / n].transpose();
                    adj.at[b0] += (rot_t * vec_d) * e;
                    // normal variation: <d, d nu_a> = -<P d, dcross>/A
                    let pd = d - n_hat * n_hat.dot(&d);
                    let w = pd * (c2 / a_elem * e);
                    adj.at_u[a] += pv.cross(&w);
                    adj.at_v[a] += w.cross(&pu);
                }
            }
            (local_sum, adj)
        })
        .collect();

    let total: f64 = chunks.iter().map(|(s, _)| s).sum();
    let q_smooth = q_hard - tau * total.ln();
    let mut adj = NodeAdjoint::zeros(n);
    for (_, c) in &chunks {
        for k in 0..n {
            adj.at[k] += c.at[k] / total;
            adj.at_u[k] += c.at_u[k] / total;
            adj.at_v[k] += c.at_v[k] / total;
        }
    }
    (q_hard, q_smooth, adj)
}

/// Evaluate the three barriers and their gradients with respect to every
/// coefficient of `basis`.
pub fn penalty_eval(
    mesh: &SurfaceMesh,
    target: &TargetSpec,
    basis: &CoefficientBasis,
    cfg: &PenaltyConfig,
) -> (PenaltyValues, PenaltyGradients) {
    let n = mesh.len();
    let full = mesh.n_fp as f64;
    let node_w = 1.0 / (mesh.n_u * mesh.n_v) as f64;

    // ---- perimeter ----
    let area = mesh.area();
    let (pen_perim, dpen_perim) = barrier(
        (area - cfg.perimeter_max) / cfg.perimeter_max,
        cfg.perimeter_weight,
        cfg.barrier_power,
    );

    // ---- distance ----
    let (d_hard, d_smooth, d_adj) = distance_scan(mesh, target, cfg.lse_temp);
    let (pen_dist, dpen_dist) = barrier(
        (cfg.distance_min - d_smooth) / cfg.distance_min,
        cfg.distance_weight,
        cfg.barrier_power,
    );

    // ---- reach ----
    let curv: Vec<CurvatureNode> = (0..n).map(|k| curvature_node(mesh, k)).collect();
    let kappa_hard = curv.iter().map(|c| c.kappa).fold(0.0, f64::max);
    let neg_kappa: Vec<f64> = curv.iter().map(|c| -c.kappa).collect();
    let (neg_soft, kappa_weights) = soft_min(&neg_kappa, cfg.curvature_temp);
    let kappa_soft = -neg_soft; // soft max >= hard max
    let (bneck_hard, bneck_smooth, bneck_adj) =
        bottleneck_scan(mesh, cfg.chart_cutoff, cfg.lse_temp);
    let reach_hard = (1.0 / kappa_hard).min(bneck_hard);
    let branches = [1.0 / kappa_soft, bneck_smooth];
    let (reach_smooth, branch_w) = soft_min(&branches, cfg.lse_temp);
    let (pen_reach, dpen_reach) = barrier(
        (cfg.reach_min - reach_smooth) / cfg.reach_min,
        cfg.reach_weight,
        cfg.barrier_power,
    );

    let values = PenaltyValues {
        perimeter: pen_perim,
        distance: pen_dist,
        reach: pen_reach,
        total: pen_perim + pen_dist + pen_reach,
        area,
        distance_hard: d_hard,
        distance_smooth: d_smooth,
        reach_hard,
        reach_smooth,
        kappa_max: kappa_hard,
    };

    // ---- gradients, one contraction per coefficient ----
    let need_perim = dpen_perim != 0.0;
    let need_dist = dpen_dist != 0.0;
    let need_reach = dpen_reach != 0.0;

    let grads: Vec<(f64, f64, f64)> = basis
        .ids
        .par_iter()
        .map(|&id| {
            let f = basis.field(id);
            let mut g_perim = 0.0;
            let mut g_dist = 0.0;
            let mut g_reach = 0.0;

            if need_perim {
                // d(area)/dc = N_p sum_k w <n_hat, theta_u x psi_v + psi_u x theta_v>
                let mut darea = 0.0;
                for k in 0..n {
                    let n_hat = -mesh.normal[k];
                    let dcross =
                        f.theta_u[k].cross(&mesh.dv_tan[k]) + mesh.du_tan[k].cross(&f.theta_v[k]);
                    darea += n_hat.dot(&dcross);
                }
                darea *= full * node_w;
                g_perim = dpen_perim * darea / cfg.perimeter_max;
            }

            if need_dist {
                let dd = d_adj.contract(&f);
                g_dist = dpen_dist * (-dd / cfg.distance_min);
            }

            if need_reach {
                // curvature branch: d(1/kappa) = -dkappa / kappa^2
                let mut dkappa = 0.0;
                for k in 0..n {
                    if kappa_weights[k] != 0.0 {
                        dkappa += kappa_weights[k] * kappa_derivative(mesh, k, &curv[k], &f);
                    }
                }
                let d_branch_curv = -dkappa / (kappa_soft * kappa_soft);
                let d_branch_bneck = if bneck_smooth.is_finite() {
                    bneck_adj.contract(&f)
                } else {
                    0.0
                };
                let dreach = branch_w[0] * d_branch_curv + branch_w[1] * d_branch_bneck;
                g_reach = dpen_reach * (-dreach / cfg.reach_min);
            }

            (g_perim, g_dist, g_reach)
        })
        .collect();

    let gradients = PenaltyGradients {
        perimeter: grads.iter().map(|g| g.0).collect(),
        distance: grads.iter().map(|g| g.1).collect(),
        reach: grads.iter().map(|g| g.2).collect(),
    };
    (values, gradients)
}

/// Values-only variant (same smoothing, no gradient work).
pub fn penalty_values(mesh: &SurfaceMesh, target: &TargetSpec, cfg: &PenaltyConfig) -> PenaltyValues {
    let area = mesh.area();
    let (pen_perim, _) = barrier(
        (area - cfg.perimeter_max) / cfg.perimeter_max,
        cfg.perimeter_weight,
        cfg.barrier_power,
    );
    let (d_hard, d_smooth, _) = distance_scan(mesh, target, cfg.lse_temp);
    let (pen_dist, _) = barrier(
        (cfg.distance_min - d_smooth) / cfg.distance_min,
        cfg.distance_weight,
        cfg.barrier_power,
    );
    let curv: Vec<CurvatureNode> = (0..mesh.len()).map(|k| curvature_node(mesh, k)).collect();
    let kappa_hard = curv.iter().map(|c| c.kappa).fold(0.0, f64::max);
    let neg_kappa: Vec<f64> = curv.iter().map(|c| -c.kappa).collect();
    let (neg_soft, _) = soft_min(&neg_kappa, cfg.curvature_temp);
    let kappa_soft = -neg_soft;
    let (bneck_hard, bneck_smooth, _) = bottleneck_scan(mesh, cfg.chart_cutoff, cfg.lse_temp);
    let reach_hard = (1.0 / kappa_hard).min(bneck_hard);
    let (reach_smooth, _) = soft_min(&[1.0 / kappa_soft, bneck_smooth], cfg.lse_temp);
    let (pen_reach, _) = barrier(
        (cfg.reach_min - reach_smooth) / cfg.reach_min,
        cfg.reach_weight,
        cfg.barrier_power,
    );
    PenaltyValues {
        perimeter: pen_perim,
        distance: pen_dist,
        reach: pen_reach,
        total: pen_perim + pen_dist + pen_reach,
        area,
        distance_hard: d_hard,
        distance_smooth: d_smooth,
        reach_hard,
        reach_smooth,
        kappa_max: kappa_hard,
    }
}
