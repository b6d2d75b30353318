//! Biot-Savart kernel, field map, and the normal-field operator on the
//! plasma boundary.
//!
//! The kernel convention is `K(x,y) = (x-y)/|x-y|^3` with **no** `mu_0/4pi`
//! prefactor:
//!
//! ```text
//!   BS(j)(y) = int_S K(x,y) x j(x) dmu_S(x),
//! ```
//!
//! so computed fields relate to SI tesla by `B_SI = (mu_0/4pi) * BS` and
//! Ampere's law reads `circulation = 4 pi I_enclosed`. Sources are always
//! integrated over the full surface (all field periods); the plasma side is
//! a weighted point cloud, by default the full plasma boundary grid with
//! area weights and the normal-component residual.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use std::f64::consts::TAU;

use crate::currents::{PotentialBasis, SurfaceCurrent};
use crate::error::{CoreError, Result};
use crate::surfaces::SurfaceMesh;
use crate::Vec3;

/// Default guard on kernel evaluations, meters.
pub const KERNEL_EPS: f64 = 1e-9;
/// Default surface-separation guard, meters.
pub const GUARD_DIST: f64 = 0.05;

/// `K(x,y) = (x-y)/|x-y|^3`.
pub fn kernel(x: Vec3, y: Vec3, eps: f64) -> Result<Vec3> {
    let d = x - y;
    let r = d.norm();
    if r < eps {
        return Err(CoreError::CoincidentPoints { dist: r, guard: eps });
    }
    Ok(d / (r * r * r))
}

/// Directional derivative `D_x K(x,y)(h) = h/|x-y|^3 - 3 <x-y,h> (x-y)/|x-y|^5`.
pub fn kernel_jacobian_apply(x: Vec3, y: Vec3, h: Vec3, eps: f64) -> Result<Vec3> {
    let d = x - y;
    let r = d.norm();
    if r < eps {
        return Err(CoreError::CoincidentPoints { dist: r, guard: eps });
    }
    let r3 = r * r * r;
    Ok(h / r3 - d * (3.0 * d.dot(&h) / (r3 * r * r)))
}

#[inline]
fn kernel_unchecked(d: Vec3, r2: f64) -> Vec3 {
    d / (r2 * r2.sqrt())
}

/// Source quadrature cloud: the full-surface replication of a one-period
/// mesh carrying per-node weighted currents `w_s j_s` (weights folded in,
/// so `BS(y) = sum K(x_s, y) x c_s`).
#[derive(Debug, Clone)]
pub struct SourceCloud {
    pub points: Vec<Vec3>,
    /// `w_s * j(x_s)`, A (current times area weight).
    pub weighted_currents: Vec<Vec3>,
}

impl SourceCloud {
    pub fn new(mesh: &SurfaceMesh, current: &SurfaceCurrent) -> Self {
        assert_eq!(current.vectors.len(), mesh.len());
        let n_fp = mesh.n_fp as usize;
        let mut points = Vec::with_capacity(mesh.len() * n_fp);
        let mut weighted = Vec::with_capacity(mesh.len() * n_fp);
        for p in 0..n_fp {
            let rot = mesh.period_rotation(p as u32);
            for k in 0..mesh.len() {
                points.push(rot * mesh.points[k]);
                weighted.push(rot * (current.vectors[k] * mesh.weight(k)));
            }
        }
        Self {
            points,
            weighted_currents: weighted,
        }
    }

    /// Field at one point; errors if the point is closer than `guard` to a
    /// source node.
    pub fn field_at(&self, y: Vec3, guard: f64) -> Result<Vec3> {
        let guard2 = guard * guard;
        let mut acc = Vec3::zeros();
        for (x, c) in self.points.iter().zip(&self.weighted_currents) {
            let d = x - y;
            let r2 = d.norm_squared();
            if r2 < guard2 {
                return Err(CoreError::TooCloseToSurface {
                    dist: r2.sqrt(),
                    guard,
                });
            }
            acc += kernel_unchecked(d, r2).cross(c);
        }
        Ok(acc)
    }
}

/// Biot-Savart field of a surface current at a list of evaluation points,
/// integrating over all field periods of the source.
pub fn bs_field(
    mesh: &SurfaceMesh,
    current: &SurfaceCurrent,
    eval_points: &[Vec3],
    guard: f64,
) -> Result<Vec<Vec3>> {
    let cloud = SourceCloud::new(mesh, current);
    eval_points
        .par_iter()
        .map(|&y| cloud.field_at(y, guard))
        .collect()
}

/// How the target normal field is specified on the plasma grid.
#[derive(Debug, Clone, PartialEq)]
pub enum BnormSpec {
    /// Identically zero (vacuum toroidal-field targets).
    Zero,
    /// Stellarator-symmetric sine coefficients `B_mn` of
    /// `<B_T, nu>(u,v) = sum B_mn sin(2 pi (m u + n v))`.
    SineCoeffs(Vec<(i32, i32, f64)>),
    /// Raw per-node values on the plasma grid, row-major `i * n_v + j`.
    Grid(Vec<f64>),
}

/// Plasma-side data: boundary mesh, target normal field, and the full
/// (period-replicated) quadrature cloud derived from them.
#[derive(Debug, Clone)]
pub struct TargetSpec {
    pub plasma: SurfaceMesh,
    /// Target normal field on the one-period grid.
    pub b_normal: Vec<f64>,
    /// Full-cloud points (all periods).
    pub points: Vec<Vec3>,
    /// Outward normals at the cloud points.
    pub normals: Vec<Vec3>,
    /// Area quadrature weights `A/(n_u n_v)` per cloud point; they sum to
    /// the full plasma area.
    pub weights: Vec<f64>,
    /// Target values replicated over the cloud.
    pub g_target: Vec<f64>,
}

impl TargetSpec {
    pub fn new(plasma: SurfaceMesh, spec: BnormSpec) -> Self {
        let b_normal = match spec {
            BnormSpec::Zero => vec![0.0; plasma.len()],
            BnormSpec::Grid(values) => {
                assert_eq!(values.len(), plasma.len(), "grid table size mismatch");
                values
            }
            BnormSpec::SineCoeffs(coeffs) => {
                let mut values = vec![0.0; plasma.len()];
                for i in 0..plasma.n_u {
                    let u = i as f64 / plasma.n_u as f64;
                    for j in 0..plasma.n_v {
                        let v = j as f64 / plasma.n_v as f64;
                        let mut b = 0.0;
                        for &(m, n, c) in &coeffs {
                            b += c * (TAU * (m as f64 * u + n as f64 * v)).sin();
                        }
                        values[plasma.idx(i, j)] = b;
                    }
                }
                values
            }
        };

        let n_fp = plasma.n_fp as usize;
        let n = plasma.len();
        let mut points = Vec::with_capacity(n * n_fp);
        let mut normals = Vec::with_capacity(n * n_fp);
        let mut weights = Vec::with_capacity(n * n_fp);
        let mut g_target = Vec::with_capacity(n * n_fp);
        for p in 0..n_fp {
            let rot = plasma.period_rotation(p as u32);
            for k in 0..n {
                points.push(rot * plasma.points[k]);
                normals.push(rot * plasma.normal[k]);
                weights.push(plasma.weight(k));
                g_target.push(b_normal[k]);
            }
        }
        Self {
            plasma,
            b_normal,
            points,
            normals,
            weights,
            g_target,
        }
    }

    pub fn cloud_len(&self) -> usize {
        self.points.len()
    }

    /// Weighted squared norm of the target, `sum w g^2`.
    pub fn target_norm_squared(&self) -> f64 {
        self.weights
            .iter()
            .zip(&self.g_target)
            .map(|(w, g)| w * g * g)
            .sum()
    }
}

/// Dense linear map from potential coefficients to the normal field on the
/// plasma cloud: `<BS(j_x), nu>(y_p) = (A x)_p + a0_p`, with `a0` carrying
/// the net-current (harmonic) part.
#[derive(Debug, Clone)]
pub struct NormalFieldOperator {
    pub a: DMatrix<f64>,
    pub a0: DVector<f64>,
    pub basis: PotentialBasis,
    pub i_pol: f64,
    pub i_tor: f64,
}

const ASSEMBLY_CHUNK: usize = 128;

/// Assemble the normal-field operator: column `k` is the normal component
/// of the Biot-Savart field of basis potential `e_k` on the plasma cloud.
///
/// Uses `<K x j, nu> = <nu x K, j>` and folds the period replication of the
/// source into per-(row, source-node) couplings against `psi_u` and
/// `psi_v`, turning assembly into two matrix products per row chunk.
pub fn assemble_normal_operator(
    mesh: &SurfaceMesh,
    target: &TargetSpec,
    basis: &PotentialBasis,
    i_pol: f64,
    i_tor: f64,
    guard: f64,
) -> Result<NormalFieldOperator> {
    let n_src = mesh.len();
    let n_fp = mesh.n_fp as usize;
    let dim = basis.dim();
    let n_cloud = target.cloud_len();

    // chart components of the basis at the source nodes (period-invariant)
    let mut au = DMatrix::<f64>::zeros(n_src, dim);
    let mut av = DMatrix::<f64>::zeros(n_src, dim);
    for i in 0..mesh.n_u {
        let u = i as f64 / mesh.n_u as f64;
        for j in 0..mesh.n_v {
            let v = j as f64 / mesh.n_v as f64;
            let k = mesh.idx(i, j);
            for c in 0..dim {
                let (xu, xv) = basis.mode_flat_components(c, u, v);
                au[(k, c)] = xu;
                av[(k, c)] = xv;
            }
        }
    }

    // replicated source points and rotated tangents; the weight is
    // 1/(n_u n_v) because the area element cancels against the pushforward
    let w = 1.0 / (mesh.n_u * mesh.n_v) as f64;
    let mut src_pts = Vec::with_capacity(n_src * n_fp);
    let mut src_tu = Vec::with_capacity(n_src * n_fp);
    let mut src_tv = Vec::with_capacity(n_src * n_fp);
    for p in 0..n_fp {
        let rot = mesh.period_rotation(p as u32);
        for k in 0..n_src {
            src_pts.push(rot * mesh.points[k]);
            src_tu.push(rot * (mesh.du_tan[k] * w));
            src_tv.push(rot * (mesh.dv_tan[k] * w));
        }
    }

    let guard2 = guard * guard;
    let mut a = DMatrix::<f64>::zeros(n_cloud, dim);
    let mut a0 = DVector::<f64>::zeros(n_cloud);

    let row_blocks: Vec<(usize, Result<(DMatrix<f64>, DVector<f64>)>)> = (0..n_cloud)
        .step_by(ASSEMBLY_CHUNK)
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|start| {
            let stop = (start + ASSEMBLY_CHUNK).min(n_cloud);
            let rows = stop - start;
            let mut gu = DMatrix::<f64>::zeros(rows, n_src);
            let mut gv = DMatrix::<f64>::zeros(rows, n_src);
            for (r, p) in (start..stop).enumerate() {
                let y = target.points[p];
                let nu = target.normals[p];
                for s_full in 0..n_src * n_fp {
                    let d = src_pts[s_full] - y;
                    let r2 = d.norm_squared();
                    if r2 < guard2 {
                        return (
                            start,
                            Err(CoreError::TooCloseToSurface {
                                dist: r2.sqrt(),
                                guard,
                            }),
                        );
                    }
                    let nu_k = nu.cross(&kernel_unchecked(d, r2));
                    let s = s_full % n_src;
                    gu[(r, s)] += nu_k.dot(&src_tu[s_full]);
                    gv[(r, s)] += nu_k.dot(&src_tv[s_full]);
                }
            }
            let block = &gu * &au + &gv * &av;
            let mut block0 = DVector::<f64>::zeros(rows);
            for r in 0..rows {
                let mut acc = 0.0;
                for s in 0..n_src {
                    acc += i_pol * gu[(r, s)] + i_tor * gv[(r, s)];
                }
                block0[r] = acc;
            }
            (start, Ok((block, block0)))
        })
        .collect();

    for (start, block) in row_blocks {
        let (block, block0) = block?;
        a.rows_mut(start, block.nrows()).copy_from(&block);
        a0.rows_mut(start, block0.nrows()).copy_from(&block0);
    }

    Ok(NormalFieldOperator {
        a,
        a0,
        basis: basis.clone(),
        i_pol,
        i_tor,
    })
}

impl NormalFieldOperator {
    /// Normal field on the cloud for coefficient vector `x`.
    pub fn normal_field(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.a * x + &self.a0
    }
}

/// The two surface fields entering the shape derivative, for a vector field
/// `k` on the plasma cloud:
///
/// ```text
///   Z(x_s)    = sum_p w_p K(x_s, y_p) x k_p
///   Zhat(x_s) = sum_p w_p D_x K(x_s, y_p)^T (k_p x j(x_s))
/// ```
pub fn adjoint_fields(
    mesh: &SurfaceMesh,
    target: &TargetSpec,
    k_cloud: &[Vec3],
    current: &SurfaceCurrent,
    guard: f64,
) -> Result<(Vec<Vec3>, Vec<Vec3>)> {
    assert_eq!(k_cloud.len(), target.cloud_len());
    assert_eq!(current.vectors.len(), mesh.len());
    let guard2 = guard * guard;

    let pairs: Vec<Result<(Vec3, Vec3)>> = (0..mesh.len())
        .into_par_iter()
        .map(|s| {
            let x = mesh.points[s];
            let j = current.vectors[s];
            let mut z = Vec3::zeros();
            let mut zhat = Vec3::zeros();
            for p in 0..target.cloud_len() {
                let w = target.weights[p];
                let d = x - target.points[p];
                let r2 = d.norm_squared();
                if r2 < guard2 {
                    return Err(CoreError::TooCloseToSurface {
                        dist: r2.sqrt(),
                        guard,
                    });
                }
                let r = r2.sqrt();
                let r3 = r2 * r;
                z += ((d / r3).cross(&k_cloud[p])) * w;
                // D_x K is symmetric: h/r^3 - 3 <d,h> d / r^5
                let h = k_cloud[p].cross(&j);
                zhat += (h / r3 - d * (3.0 * d.dot(&h) / (r3 * r2))) * w;
            }
            Ok((z, zhat))
        })
        .collect();

    let mut z_field = Vec::with_capacity(mesh.len());
    let mut zhat_field = Vec::with_capacity(mesh.len());
    for p in pairs {
        let (z, zh) = p?;
        z_field.push(z);
        zhat_field.push(zh);
    }
    Ok((z_field, zhat_field))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::currents::{push_forward, CurrentPotential};
    use crate::surfaces::{eval_mesh, FourierSurface};
    use approx::assert_relative_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn kernel_basics() {
        let k = kernel(Vec3::new(1.0, 0.0, 0.0), Vec3::zeros(), KERNEL_EPS).unwrap();
        assert!((k - Vec3::new(1.0, 0.0, 0.0)).norm() < 1e-15);
        let dk = kernel_jacobian_apply(
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::zeros(),
            Vec3::new(1.0, 0.0, 0.0),
            KERNEL_EPS,
        )
        .unwrap();
        assert!((dk - Vec3::new(-2.0, 0.0, 0.0)).norm() < 1e-15);
        assert!(matches!(
            kernel(Vec3::zeros(), Vec3::zeros(), KERNEL_EPS),
            Err(CoreError::CoincidentPoints { .. })
        ));
    }

    #[test]
    fn kernel_homogeneity_degree_minus_two() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let x = Vec3::from_fn(|_, _| rng.random_range(-2.0..2.0));
            let y = Vec3::from_fn(|_, _| rng.random_range(-2.0..2.0));
            if (x - y).norm() < 0.1 {
                continue;
            }
            let k1 = kernel(x, y, KERNEL_EPS).unwrap();
            let k2 = kernel(2.0 * x, 2.0 * y, KERNEL_EPS).unwrap();
            assert!((k2 - k1 / 4.0).norm() < 1e-12 * k1.norm());
        }
    }

    #[test]
    fn kernel_jacobian_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..50 {
            let x = Vec3::from_fn(|_, _| rng.random_range(-5.0..5.0));
            let y = Vec3::from_fn(|_, _| rng.random_range(-5.0..5.0));
            let r = (x - y).norm();
            if !(0.1..10.0).contains(&r) {
                continue;
            }
            let h = Vec3::from_fn(|_, _| rng.random_range(-1.0..1.0));
            let eps = 1e-6 * r;
            let fd = (kernel(x + eps * h, y, KERNEL_EPS).unwrap()
                - kernel(x - eps * h, y, KERNEL_EPS).unwrap())
                / (2.0 * eps);
            let an = kernel_jacobian_apply(x, y, h, KERNEL_EPS).unwrap();
            assert!(
                (fd - an).norm() <= 1e-7 * an.norm().max(1e-12),
                "fd={fd:?} an={an:?}"
            );
        }
    }

    #[test]
    fn zero_current_zero_field() {
        let mesh = eval_mesh(&FourierSurface::circular_torus(3.0, 1.0), 8, 8).unwrap();
        let j = push_forward(&CurrentPotential::new(0.0, 0.0), &mesh);
        let f = bs_field(&mesh, &j, &[Vec3::new(3.0, 0.0, 0.0)], 0.05).unwrap();
        assert!(f[0].norm() == 0.0);
    }

    #[test]
    fn guard_violation_detected() {
        let mesh = eval_mesh(&FourierSurface::circular_torus(3.0, 1.0), 8, 8).unwrap();
        let j = push_forward(&CurrentPotential::new(1.0, 0.0), &mesh);
        let on_surface = mesh.points[3] + Vec3::new(1e-4, 0.0, 0.0);
        assert!(matches!(
            bs_field(&mesh, &j, &[on_surface], 0.05),
            Err(CoreError::TooCloseToSurface { .. })
        ));
    }

    #[test]
    fn single_point_adjoint_field_values() {
        // one plasma quadrature point at the origin with weight 1,
        // k = e_z, surface point (1,0,0): Z = K x k = (0,-1,0).
        let mesh = eval_mesh(&FourierSurface::circular_torus(3.0, 1.0), 4, 4).unwrap();
        let mut target = TargetSpec::new(
            eval_mesh(&FourierSurface::circular_torus(0.1, 0.05), 4, 4).unwrap(),
            BnormSpec::Zero,
        );
        // collapse the cloud to a single synthetic point
        target.points = vec![Vec3::zeros()];
        target.normals = vec![Vec3::new(0.0, 0.0, 1.0)];
        target.weights = vec![1.0];
        target.g_target = vec![0.0];

        let mut mesh1 = mesh.clone();
        mesh1.points[0] = Vec3::new(1.0, 0.0, 0.0);
        let j = push_forward(&CurrentPotential::new(1.0, 0.0), &mesh1);
        let k_cloud = vec![Vec3::new(0.0, 0.0, 1.0)];
        let (z, _zhat) = adjoint_fields(&mesh1, &target, &k_cloud, &j, 0.01).unwrap();
        assert!((z[0] - Vec3::new(0.0, -1.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn adjoint_identity_against_bs() {
        // <BS j, k>_P = -<j, Z(k)>_S at the quadrature level, for fully
        // random k (N_p = 1, so one period is the full surface).
        let mut s = FourierSurface::circular_torus(3.0, 1.2);
        s.set_r(1, 1, 0.1);
        s.set_z(1, 1, 0.1);
        let cws = eval_mesh(&s, 12, 12).unwrap();
        let plasma_s = FourierSurface::circular_torus(3.0, 0.6);
        let target = TargetSpec::new(eval_mesh(&plasma_s, 10, 10).unwrap(), BnormSpec::Zero);

        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..10 {
            let (ip, it) = (rng.random_range(-2.0..2.0), rng.random_range(-1.0..1.0));
            let mut pot = CurrentPotential::new(ip, it);
            pot.set_phi(1, 0, rng.random_range(-1.0..1.0));
            pot.set_phi(2, 1, rng.random_range(-1.0..1.0));
            let j = push_forward(&pot, &cws);
            let k_cloud: Vec<Vec3> = (0..target.cloud_len())
                .map(|_| Vec3::from_fn(|_, _| rng.random_range(-1.0..1.0)))
                .collect();

            let fields = bs_field(&cws, &j, &target.points, 0.01).unwrap();
            let lhs: f64 = (0..target.cloud_len())
                .map(|p| target.weights[p] * fields[p].dot(&k_cloud[p]))
                .sum();

            let (z, _) = adjoint_fields(&cws, &target, &k_cloud, &j, 0.01).unwrap();
            let rhs: f64 = -(0..cws.len())
                .map(|k| cws.weight(k) * j.vectors[k].dot(&z[k]))
                .sum::<f64>();
            assert_relative_eq!(lhs, rhs, max_relative = 1e-8);
        }
    }

    #[test]
    fn adjoint_identity_multi_period_symmetric_k() {
        // with N_p > 1 the one-period x N_p shortcut for <j, Z(k)> is valid
        // when k is field-period symmetric (the gradient's residual is).
        let mut s = FourierSurface::circular_torus(3.0, 1.2);
        s.n_fp = 3;
        s.set_r(1, 1, 0.1);
        s.set_z(1, 1, 0.1);
        let cws = eval_mesh(&s, 12, 12).unwrap();
        let mut plasma_s = FourierSurface::circular_torus(3.0, 0.6);
        plasma_s.n_fp = 3;
        let target = TargetSpec::new(
            eval_mesh(&plasma_s, 10, 10).unwrap(),
            BnormSpec::SineCoeffs(vec![(1, 0, 0.3), (2, -1, 0.2)]),
        );

        let mut pot = CurrentPotential::new(0.9, -0.2);
        pot.set_phi(1, 1, 0.4);
        let j = push_forward(&pot, &cws);
        // k = g nu is symmetric because g replicates and nu rotates
        let k_cloud: Vec<Vec3> = (0..target.cloud_len())
            .map(|p| target.normals[p] * target.g_target[p])
            .collect();

        let fields = bs_field(&cws, &j, &target.points, 0.01).unwrap();
        let lhs: f64 = (0..target.cloud_len())
            .map(|p| target.weights[p] * fields[p].dot(&k_cloud[p]))
            .sum();
        let (z, _) = adjoint_fields(&cws, &target, &k_cloud, &j, 0.01).unwrap();
        let rhs: f64 = -(0..cws.len())
            .map(|k| cws.n_fp as f64 * cws.weight(k) * j.vectors[k].dot(&z[k]))
            .sum::<f64>();
        assert_relative_eq!(lhs, rhs, max_relative = 1e-8);
    }

    #[test]
    fn operator_matches_direct_field_and_is_linear() {
        let s = FourierSurface::circular_torus(3.0, 1.2);
        let cws = eval_mesh(&s, 16, 16).unwrap();
        let plasma = eval_mesh(&FourierSurface::circular_torus(3.0, 0.6), 8, 8).unwrap();
        let target = TargetSpec::new(plasma, BnormSpec::Zero);
        let basis = PotentialBasis::new(2, 2);
        let (ip, it) = (0.7, -0.4);
        let op = assemble_normal_operator(&cws, &target, &basis, ip, it, 0.05).unwrap();

        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let x = DVector::from_fn(basis.dim(), |_, _| rng.random_range(-1.0..1.0));
        let pot = basis.potential(&x, ip, it);
        let j = push_forward(&pot, &cws);
        let fields = bs_field(&cws, &j, &target.points, 0.05).unwrap();
        let via_op = op.normal_field(&x);
        for p in 0..target.cloud_len() {
            let direct = fields[p].dot(&target.normals[p]);
            assert_relative_eq!(via_op[p], direct, epsilon = 1e-12 * direct.abs().max(1.0));
        }
        // doubling x doubles A x exactly, a0 unchanged
        let f2 = op.normal_field(&(2.0 * &x));
        for p in 0..target.cloud_len() {
            assert_relative_eq!(
                f2[p] - op.a0[p],
                2.0 * (via_op[p] - op.a0[p]),
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn adjoint_identity_sign_convention_spot() {
        // one source node against one plasma point reduces to the scalar
        // triple product (K x j) . k = -j . (K x k).
        let x = Vec3::new(2.0, 0.5, -0.3);
        let y = Vec3::new(0.1, -0.2, 0.7);
        let j = Vec3::new(0.3, -1.0, 0.2);
        let k = Vec3::new(-0.5, 0.4, 1.1);
        let kern = kernel(x, y, KERNEL_EPS).unwrap();
        let lhs = kern.cross(&j).dot(&k);
        let rhs = -j.dot(&kern.cross(&k));
        assert_relative_eq!(lhs, rhs, epsilon = 1e-14);
    }
}
