//! Geometric diagnostics of meshed surfaces: area, inter-surface distance,
//! curvature and a reach estimate.
//!
//! The reach of a closed surface is bounded above both by the smallest
//! principal curvature radius and by every "bottleneck": for any two surface
//! points `x`, `y`,
//!
//! ```text
//!   reach(S) <= |y - x|^2 / (2 |<y - x, nu(x)>|),
//! ```
//!
//! which degenerates to the curvature radius as `y -> x` and to half the
//! gap width where two sheets face each other. The estimate below takes the
//! minimum of `1/kappa_max` over the grid and of the pair bound over all
//! point pairs that are far apart in the `(u,v)` chart (so that the local
//! neighborhood, already covered by the curvature term, is excluded).

use rayon::prelude::*;

use crate::surfaces::SurfaceMesh;
use crate::Vec3;

/// Tuning knobs for [`geometry_report_with`].
#[derive(Debug, Clone, Copy)]
pub struct GeometryOptions {
    /// Pairs closer than this in wrapped `(u,v)`-chart distance are skipped
    /// by the bottleneck scan.
    pub chart_cutoff: f64,
}

impl Default for GeometryOptions {
    fn default() -> Self {
        Self { chart_cutoff: 0.25 }
    }
}

/// Scalar geometry summary of a CWS/plasma pair.
#[derive(Debug, Clone, Copy)]
pub struct GeometryReport {
    /// Full-surface area, m^2.
    pub area: f64,
    /// Hard minimum distance to the companion surface, m.
    pub min_distance_to: f64,
    /// Largest absolute principal curvature over the grid, 1/m.
    pub kappa_max: f64,
    /// `min(1/kappa_max, bottleneck bound)`, m.
    pub reach_estimate: f64,
}

/// Mean curvature `H` (half-trace convention) and Gaussian curvature `K`
/// at node `k`, signed with respect to the inward `-nu` normal; only the
/// invariants `|H|` and `K` are consumed downstream.
pub fn curvature_invariants(mesh: &SurfaceMesh, k: usize) -> (f64, f64) {
    let m = &mesh.metric[k];
    let n = mesh.normal[k];
    let ii_uu = mesh.d2_uu[k].dot(&n);
    let ii_uv = mesh.d2_uv[k].dot(&n);
    let ii_vv = mesh.d2_vv[k].dot(&n);
    let det = m.g_uu * m.g_vv - m.g_uv * m.g_uv;
    let h = (m.g_vv * ii_uu - 2.0 * m.g_uv * ii_uv + m.g_uu * ii_vv) / (2.0 * det);
    let kg = (ii_uu * ii_vv - ii_uv * ii_uv) / det;
    (h, kg)
}

/// Largest absolute principal curvature at node `k`:
/// `|kappa|_max = |H| + sqrt(H^2 - K)` (principal curvatures are the roots
/// of `kappa^2 - 2 H kappa + K`).
pub fn point_curvature_bound(mesh: &SurfaceMesh, k: usize) -> f64 {
    let (h, kg) = curvature_invariants(mesh, k);
    h.abs() + (h * h - kg).max(0.0).sqrt()
}

/// Max absolute principal curvature over the grid.
pub fn max_curvature(mesh: &SurfaceMesh) -> f64 {
    (0..mesh.len())
        .map(|k| point_curvature_bound(mesh, k))
        .fold(0.0, f64::max)
}

/// Hard minimum distance between one period of `mesh` and the full
/// (period-replicated) point cloud of `other`.
pub fn min_distance(mesh: &SurfaceMesh, other: &SurfaceMesh) -> f64 {
    let cloud = other.replicated_points();
    mesh.points
        .par_iter()
        .map(|p| {
            cloud
                .iter()
                .map(|q| (p - q).norm())
                .fold(f64::INFINITY, f64::min)
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold(f64::INFINITY, f64::min)
}

/// Wrapped distance on the unit circle.
#[inline]
pub(crate) fn wrap_dist(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(1.0);
    d.min(1.0 - d)
}

/// Full-chart coordinates `(u, v_full)` of every node of the replicated
/// cloud, `v_full in [0,1)` spanning the whole torus.
pub(crate) fn full_chart_coords(mesh: &SurfaceMesh) -> Vec<(f64, f64)> {
    let n_fp = mesh.n_fp as usize;
    let mut out = Vec::with_capacity(mesh.len() * n_fp);
    for p in 0..n_fp {
        for i in 0..mesh.n_u {
            for j in 0..mesh.n_v {
                let u = i as f64 / mesh.n_u as f64;
                let vf = (j as f64 / mesh.n_v as f64 + p as f64) / n_fp as f64;
                out.push((u, vf));
            }
        }
    }
    out
}

/// Reach bound from a single ordered point pair. Pairs whose connecting
/// segment is nearly tangential carry no bottleneck information and return
/// infinity.
#[inline]
pub(crate) fn pair_reach_bound(d: Vec3, nu_at_x: Vec3) -> f64 {
    let d2 = d.norm_squared();
    let dn = d.dot(&nu_at_x).abs();
    if dn < 1e-12 * d2.sqrt() {
        f64::INFINITY
    } else {
        d2 / (2.0 * dn)
    }
}

/// Smallest pair reach bound over chart-far pairs of the full surface.
pub fn bottleneck_bound(mesh: &SurfaceMesh, chart_cutoff: f64) -> f64 {
    let cloud = mesh.replicated_points();
    let coords = full_chart_coords(mesh);
    let n_fp = mesh.n_fp as usize;
    // normals replicate by the same rotation as points
    let mut normals = Vec::with_capacity(cloud.len());
    for p in 0..n_fp {
        let rot = mesh.period_rotation(p as u32);
        normals.extend(mesh.normal.iter().map(|n| rot * n));
    }

    (0..mesh.len())
        .into_par_iter()
        .map(|a| {
            let (ua, va) = coords[a];
            let mut best = f64::INFINITY;
            for b in 0..cloud.len() {
                let (ub, vb) = coords[b];
                let du = wrap_dist(ua, ub);
                let dv = wrap_dist(va, vb);
                if du * du + dv * dv <= chart_cutoff * chart_cutoff {
                    continue;
                }
                let bound = pair_reach_bound(cloud[b] - cloud[a], normals[a]);
                best = best.min(bound);
            }
            best
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold(f64::INFINITY, f64::min)
}

/// Geometry summary with default options.
pub fn geometry_report(mesh: &SurfaceMesh, other: &SurfaceMesh) -> GeometryReport {
    geometry_report_with(mesh, other, &GeometryOptions::default())
}

pub fn geometry_report_with(
    mesh: &SurfaceMesh,
    other: &SurfaceMesh,
    opts: &GeometryOptions,
) -> GeometryReport {
    let kappa_max = max_curvature(mesh);
    let bottleneck = bottleneck_bound(mesh, opts.chart_cutoff);
    GeometryReport {
        area: mesh.area(),
        min_distance_to: min_distance(mesh, other),
        kappa_max,
        reach_estimate: (1.0 / kappa_max).min(bottleneck),
    }
}
