//! Divergence-free surface currents from a scalar potential on the flat
//! torus.
//!
//! Every admissible current is the pushforward of
//!
//! ```text
//!   X = grad_perp Phi + I_p d_u + I_t d_v,
//!   grad_perp Phi = (dPhi/du) d_v - (dPhi/dv) d_u,
//! ```
//!
//! through the measure-normalized map `j = (Dpsi X) / |d_u psi x d_v psi|`,
//! which sends flat-torus divergence-free fields to surface divergence-free
//! fields. `Phi` is a pure sine series (stellarator symmetry); the harmonic
//! part carries the net poloidal current `I_p` (flux across a `u = const`
//! chart line) and the net toroidal current `I_t` (flux across `v = const`),
//! amperes per field period.

use std::collections::BTreeMap;
use std::f64::consts::TAU;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{CoreError, Result};
use crate::surfaces::SurfaceMesh;
use crate::Vec3;

/// Scalar current potential plus net currents. Coefficients in amperes.
#[derive(Debug, Clone, PartialEq)]
pub struct CurrentPotential {
    /// Sine coefficients `Phi_mn` of `Phi(u,v) = sum Phi_mn sin(2 pi (m u + n v))`.
    pub phi_sin: BTreeMap<(i32, i32), f64>,
    /// Net poloidal current `I_p`, A.
    pub i_pol: f64,
    /// Net toroidal current `I_t`, A.
    pub i_tor: f64,
}

impl CurrentPotential {
    pub fn new(i_pol: f64, i_tor: f64) -> Self {
        Self {
            phi_sin: BTreeMap::new(),
            i_pol,
            i_tor,
        }
    }

    /// Insert/overwrite a sine coefficient; `(0,0)` is identically zero and
    /// `(0, n<0)` duplicates `-(0,-n)`.
    pub fn set_phi(&mut self, m: i32, n: i32, value: f64) {
        assert!(m >= 0, "poloidal index must be non-negative");
        assert!(!(m == 0 && n == 0), "(0,0) sine term is identically zero");
        assert!(m > 0 || n > 0, "(0,n<0) duplicates -(0,-n) for sines");
        self.phi_sin.insert((m, n), value);
    }

    /// Chart derivatives `(dPhi/du, dPhi/dv)` at `(u,v)`.
    pub fn phi_grad(&self, u: f64, v: f64) -> (f64, f64) {
        let mut gu = 0.0;
        let mut gv = 0.0;
        for (&(m, n), &c) in &self.phi_sin {
            let (fm, fn_) = (TAU * m as f64, TAU * n as f64);
            let co = (fm * u + fn_ * v).cos();
            gu += c * fm * co;
            gv += c * fn_ * co;
        }
        (gu, gv)
    }

    /// Flat-torus components `(X_u, X_v)` of the divergence-free field.
    pub fn flat_components(&self, u: f64, v: f64) -> (f64, f64) {
        let (gu, gv) = self.phi_grad(u, v);
        (self.i_pol - gv, self.i_tor + gu)
    }
}

/// Tangent surface current sampled on a mesh grid, A/m.
#[derive(Debug, Clone)]
pub struct SurfaceCurrent {
    pub vectors: Vec<Vec3>,
}

/// Push a current potential forward onto a meshed surface:
/// `j = (X_u psi_u + X_v psi_v) / area_elem` at every node.
pub fn push_forward(pot: &CurrentPotential, mesh: &SurfaceMesh) -> SurfaceCurrent {
    let mut vectors = vec![Vec3::zeros(); mesh.len()];
    for i in 0..mesh.n_u {
        let u = i as f64 / mesh.n_u as f64;
        for j in 0..mesh.n_v {
            let v = j as f64 / mesh.n_v as f64;
            let k = mesh.idx(i, j);
            let (xu, xv) = pot.flat_components(u, v);
            vectors[k] = (mesh.du_tan[k] * xu + mesh.dv_tan[k] * xv) / mesh.area_elem[k];
        }
    }
    SurfaceCurrent { vectors }
}

/// Ordered sine-mode list of a potential truncation: `m` from 0 to `m_max`,
/// `n` from `-n_max` to `n_max`, skipping `(0,0)` and `(0, n<0)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PotentialBasis {
    pub m_max: i32,
    pub n_max: i32,
    pub modes: Vec<(i32, i32)>,
}

impl PotentialBasis {
    pub fn new(m_max: i32, n_max: i32) -> Self {
        let mut modes = Vec::new();
        for m in 0..=m_max {
            let n_lo = if m == 0 { 1 } else { -n_max };
            for n in n_lo..=n_max {
                modes.push((m, n));
            }
        }
        Self {
            m_max,
            n_max,
            modes,
        }
    }

    pub fn dim(&self) -> usize {
        self.modes.len()
    }

    /// Potential with coefficient vector `x` in this basis.
    pub fn potential(&self, x: &DVector<f64>, i_pol: f64, i_tor: f64) -> CurrentPotential {
        assert_eq!(x.len(), self.dim());
        let mut pot = CurrentPotential::new(i_pol, i_tor);
        for (k, &(m, n)) in self.modes.iter().enumerate() {
            pot.set_phi(m, n, x[k]);
        }
        pot
    }

    /// Flat components `(X_u, X_v) = (-de/dv, de/du)` of basis mode `k`
    /// at `(u,v)` (unit coefficient, no net currents).
    #[inline]
    pub fn mode_flat_components(&self, k: usize, u: f64, v: f64) -> (f64, f64) {
        let (m, n) = self.modes[k];
        let (fm, fn_) = (TAU * m as f64, TAU * n as f64);
        let co = (fm * u + fn_ * v).cos();
        (-fn_ * co, fm * co)
    }
}

/// Quadratic form of the current norm:
/// `||j||^2 = x^T M x + 2 m0^T x + s0` over the full surface.
#[derive(Debug, Clone)]
pub struct CurrentGram {
    pub m: DMatrix<f64>,
    pub m0: DVector<f64>,
    pub s0: f64,
}

impl CurrentGram {
    /// Evaluate the norm at coefficient vector `x`.
    pub fn norm_squared(&self, x: &DVector<f64>) -> f64 {
        (x.transpose() * &self.m * x)[(0, 0)] + 2.0 * self.m0.dot(x) + self.s0
    }
}

/// Assemble the Gram matrix of the basis currents, the cross vector against
/// the harmonic (net-current) part, and the harmonic norm, by full-surface
/// quadrature. `M` is checked for positive definiteness.
pub fn current_norm_gram(
    mesh: &SurfaceMesh,
    basis: &PotentialBasis,
    i_pol: f64,
    i_tor: f64,
) -> Result<CurrentGram> {
    let n = mesh.len();
    let dim = basis.dim();
    // chart components of every basis mode at every node
    let mut au = DMatrix::<f64>::zeros(n, dim);
    let mut av = DMatrix::<f64>::zeros(n, dim);
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

    // <j_k, j_l> A^2 = au au' g_uu + (au av' + av au') g_uv + av av' g_vv,
    // quadrature weight w = N_p A / (n_u n_v), overall factor w / A^2.
    let scale = mesh.n_fp as f64 / (mesh.n_u * mesh.n_v) as f64;
    let mut d_uu = DVector::<f64>::zeros(n);
    let mut d_uv = DVector::<f64>::zeros(n);
    let mut d_vv = DVector::<f64>::zeros(n);
    for k in 0..n {
        let g = &mesh.metric[k];
        let w = scale / mesh.area_elem[k];
        d_uu[k] = g.g_uu * w;
        d_uv[k] = g.g_uv * w;
        d_vv[k] = g.g_vv * w;
    }

    // P = D_uu AU + D_uv AV, Q = D_uv AU + D_vv AV; M = AU^T P + AV^T Q.
    let mut p = au.clone();
    let mut q = av.clone();
    for k in 0..n {
        for c in 0..dim {
            p[(k, c)] = d_uu[k] * au[(k, c)] + d_uv[k] * av[(k, c)];
            q[(k, c)] = d_uv[k] * au[(k, c)] + d_vv[k] * av[(k, c)];
        }
    }
    let m = au.transpose() * &p + av.transpose() * &q;
    // symmetrize away rounding asymmetry from the two products
    let m = (&m + m.transpose()) * 0.5;

    let mut m0 = DVector::<f64>::zeros(dim);
    for c in 0..dim {
        let mut acc = 0.0;
        for k in 0..n {
            acc += i_pol * p[(k, c)] + i_tor * q[(k, c)];
        }
        m0[c] = acc;
    }
    let mut s0 = 0.0;
    for k in 0..n {
        s0 += i_pol * i_pol * d_uu[k] + 2.0 * i_pol * i_tor * d_uv[k] + i_tor * i_tor * d_vv[k];
    }

    if dim > 0 && m.clone().cholesky().is_none() {
        return Err(CoreError::SingularGram);
    }
    Ok(CurrentGram { m, m0, s0 })
}

/// Direct quadrature of `||j||^2` over the full surface (the independent
/// route against which the Gram form is checked).
pub fn current_norm_direct(mesh: &SurfaceMesh, current: &SurfaceCurrent) -> f64 {
    let one: f64 = (0..mesh.len())
        .map(|k| current.vectors[k].norm_squared() * mesh.weight(k))
        .sum();
    mesh.n_fp as f64 * one
}

/// Net current crossing each chart grid line.
///
/// Returns `(poloidal, toroidal)` flux profiles: entry `i` of the first is
/// the flux across the line `u = u_i` (integrand `<j, psi_v x (-nu)>`),
/// entry `j` of the second the flux across `v = v_j`
/// (integrand `<j, (-nu) x psi_u>`). For any potential these are `I_p`
/// resp. `I_t` up to quadrature aliasing.
pub fn flux_profiles(mesh: &SurfaceMesh, current: &SurfaceCurrent) -> (Vec<f64>, Vec<f64>) {
    let mut pol = vec![0.0; mesh.n_u];
    let mut tor = vec![0.0; mesh.n_v];
    for i in 0..mesh.n_u {
        for j in 0..mesh.n_v {
            let k = mesh.idx(i, j);
            let n_hat = -mesh.normal[k];
            pol[i] += current.vectors[k].dot(&mesh.dv_tan[k].cross(&n_hat)) / mesh.n_v as f64;
            tor[j] += current.vectors[k].dot(&n_hat.cross(&mesh.du_tan[k])) / mesh.n_u as f64;
        }
    }
    (pol, tor)
}

/// Mean flux across the chart lines: `(I_p estimate, I_t estimate)`.
pub fn flux_check(mesh: &SurfaceMesh, current: &SurfaceCurrent) -> (f64, f64) {
    let (pol, tor) = flux_profiles(mesh, current);
    (
        pol.iter().sum::<f64>() / pol.len() as f64,
        tor.iter().sum::<f64>() / tor.len() as f64,
    )
}

/// Gram assembly for a single potential evaluated against itself and the
/// basis in parallel is not needed; keep a parallel norm helper for large
/// meshes instead.
pub fn current_norm_direct_par(mesh: &SurfaceMesh, current: &SurfaceCurrent) -> f64 {
    let one: f64 = (0..mesh.len())
        .into_par_iter()
        .map(|k| current.vectors[k].norm_squared() * mesh.weight(k))
        .collect::<Vec<_>>()
        .into_iter()
        .sum();
    mesh.n_fp as f64 * one
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surfaces::{eval_mesh, tangential_gradient, FourierSurface};
    use approx::assert_relative_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn random_potential(rng: &mut ChaCha8Rng, order: i32, i_pol: f64, i_tor: f64) -> CurrentPotential {
        let mut pot = CurrentPotential::new(i_pol, i_tor);
        for m in 0..=order {
            let n_lo = if m == 0 { 1 } else { -order };
            for n in n_lo..=order {
                pot.set_phi(m, n, rng.random_range(-1.0..1.0));
            }
        }
        pot
    }

    #[test]
    fn zero_potential_zero_current() {
        let mesh = eval_mesh(&FourierSurface::circular_torus(3.0, 1.0), 8, 8).unwrap();
        let j = push_forward(&CurrentPotential::new(0.0, 0.0), &mesh);
        assert!(j.vectors.iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn poloidal_current_on_torus_axis_point() {
        // (3,1) torus, I_p = 1: at (u,v) = (0,0), psi_u = (0,0,2 pi) and
        // |psi_u x psi_v| = (2 pi)(2 pi R) with R = 4, so j = (0,0,1/(8 pi)).
        let mesh = eval_mesh(&FourierSurface::circular_torus(3.0, 1.0), 16, 16).unwrap();
        let j = push_forward(&CurrentPotential::new(1.0, 0.0), &mesh);
        let expect = Vec3::new(0.0, 0.0, 1.0 / (8.0 * std::f64::consts::PI));
        assert!((j.vectors[mesh.idx(0, 0)] - expect).norm() < 1e-14);
    }

    #[test]
    fn pushforward_is_linear_and_tangent() {
        let mut s = FourierSurface::circular_torus(3.0, 1.0);
        s.n_fp = 3;
        s.set_r(1, 1, 0.15);
        s.set_z(1, 1, 0.12);
        let mesh = eval_mesh(&s, 12, 12).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let pot = random_potential(&mut rng, 3, 0.4, -0.2);
        let j1 = push_forward(&pot, &mesh);
        let mut pot2 = pot.clone();
        for v in pot2.phi_sin.values_mut() {
            *v *= 2.0;
        }
        pot2.i_pol *= 2.0;
        pot2.i_tor *= 2.0;
        let j2 = push_forward(&pot2, &mesh);
        for k in 0..mesh.len() {
            assert!((j2.vectors[k] - j1.vectors[k] * 2.0).norm() < 1e-12);
            assert!(j1.vectors[k].dot(&mesh.normal[k]).abs() < 1e-12 * j1.vectors[k].norm().max(1.0));
        }
    }

    #[test]
    fn flux_equals_net_currents_regardless_of_phi() {
        let mut s = FourierSurface::circular_torus(3.0, 1.0);
        s.set_r(1, 2, 0.1);
        s.set_z(1, 2, 0.1);
        s.n_fp = 2;
        let mesh = eval_mesh(&s, 24, 24).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10 {
            let (ip, it) = (rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0));
            let pot = random_potential(&mut rng, 4, ip, it);
            let j = push_forward(&pot, &mesh);
            let (fp, ft) = flux_check(&mesh, &j);
            assert_relative_eq!(fp, pot.i_pol, epsilon = 1e-8);
            assert_relative_eq!(ft, pot.i_tor, epsilon = 1e-8);
            // every grid line sees the same flux
            let (pol, tor) = flux_profiles(&mesh, &j);
            for f in pol {
                assert!((f - pot.i_pol).abs() < 1e-10);
            }
            for f in tor {
                assert!((f - pot.i_tor).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn pure_potential_has_no_net_flux() {
        let mesh = eval_mesh(&FourierSurface::circular_torus(3.0, 1.0), 16, 16).unwrap();
        let mut pot = CurrentPotential::new(0.0, 0.0);
        pot.set_phi(2, 1, 1.3);
        pot.set_phi(1, -2, -0.7);
        let j = push_forward(&pot, &mesh);
        let (fp, ft) = flux_check(&mesh, &j);
        assert!(fp.abs() < 1e-10);
        assert!(ft.abs() < 1e-10);
    }

    #[test]
    fn gram_matches_direct_norm() {
        let mut s = FourierSurface::circular_torus(3.0, 1.0);
        s.set_r(1, 1, 0.2);
        s.set_z(1, -1, 0.1);
        let mesh = eval_mesh(&s, 32, 32).unwrap();
        let basis = PotentialBasis::new(3, 3);
        let (ip, it) = (0.8, -0.3);
        let gram = current_norm_gram(&mesh, &basis, ip, it).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            let x = DVector::from_fn(basis.dim(), |_, _| rng.random_range(-1.0..1.0));
            let pot = basis.potential(&x, ip, it);
            let j = push_forward(&pot, &mesh);
            let direct = current_norm_direct(&mesh, &j);
            assert_relative_eq!(gram.norm_squared(&x), direct, max_relative = 1e-10);
        }
    }

    #[test]
    fn harmonic_norm_matches_direct_quadrature() {
        let mesh = eval_mesh(&FourierSurface::circular_torus(3.0, 1.0), 32, 32).unwrap();
        let basis = PotentialBasis::new(2, 2);
        let gram = current_norm_gram(&mesh, &basis, 1.0, 0.0).unwrap();
        let j = push_forward(&CurrentPotential::new(1.0, 0.0), &mesh);
        assert_relative_eq!(gram.s0, current_norm_direct(&mesh, &j), max_relative = 1e-10);
    }

    #[test]
    fn norm_is_invariant_under_surface_scaling() {
        // doubling all R,Z coefficients: Dpsi ~ 2, area_elem ~ 4, so
        // j = Dpsi X / area_elem ~ 1/2, |j|^2 ~ 1/4, dmu ~ 4: net factor 1.
        // (Closed form on the torus: every term is g_ab / area_elem.)
        let s1 = FourierSurface::circular_torus(3.0, 1.0);
        let mut s2 = FourierSurface::new(1);
        for (&(m, n), &c) in &s1.r_cos {
            s2.set_r(m, n, 2.0 * c);
        }
        for (&(m, n), &c) in &s1.z_sin {
            s2.set_z(m, n, 2.0 * c);
        }
        let m1 = eval_mesh(&s1, 24, 24).unwrap();
        let m2 = eval_mesh(&s2, 24, 24).unwrap();
        let mut pot = CurrentPotential::new(0.7, 0.1);
        pot.set_phi(1, 1, 0.5);
        let n1 = current_norm_direct(&m1, &push_forward(&pot, &m1));
        let n2 = current_norm_direct(&m2, &push_forward(&pot, &m2));
        assert_relative_eq!(n2, n1, max_relative = 1e-12);
    }

    #[test]
    fn weak_divergence_free() {
        // int <j, grad_S f> dmu = 0 for smooth test functions f.
        let mut s = FourierSurface::circular_torus(3.0, 1.0);
        s.set_r(2, 1, 0.1);
        s.set_z(2, 1, 0.1);
        let mesh = eval_mesh(&s, 32, 32).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..10 {
            let (ip, it) = (rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
            let pot = random_potential(&mut rng, 3, ip, it);
            let j = push_forward(&pot, &mesh);
            // random low-order test function f = sum a cos + b sin
            let (m, n): (i32, i32) = (rng.random_range(0..3), rng.random_range(-2..3));
            let (a, b) = (rng.random_range(-1.0..1.0_f64), rng.random_range(-1.0..1.0_f64));
            let mut acc = 0.0;
            let mut scale = 0.0;
            for i in 0..mesh.n_u {
                let u = i as f64 / mesh.n_u as f64;
                for jj in 0..mesh.n_v {
                    let v = jj as f64 / mesh.n_v as f64;
                    let k = mesh.idx(i, jj);
                    let ang = TAU * (m as f64 * u + n as f64 * v);
                    let f_u = TAU * m as f64 * (-a * ang.sin() + b * ang.cos());
                    let f_v = TAU * n as f64 * (-a * ang.sin() + b * ang.cos());
                    let grad = tangential_gradient(&mesh, k, f_u, f_v);
                    acc += j.vectors[k].dot(&grad) * mesh.weight(k);
                    scale += j.vectors[k].norm() * grad.norm() * mesh.weight(k);
                }
            }
            assert!(acc.abs() <= 1e-8 * scale.max(1e-30), "acc={acc:.3e} scale={scale:.3e}");
        }
    }
}
