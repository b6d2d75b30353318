//! Per-coefficient perturbation fields of the surface parametrization.
//!
//! The embedding depends linearly on its Fourier coefficients, so the
//! perturbation field attached to coefficient `c` is simply
//! `theta_c(u,v) = d psi / d c`, a 3-vector field on the chart together
//! with its analytic chart derivatives. These fields are the directions in
//! which shape derivatives are contracted and in which finite-difference
//! probes step.

use std::f64::consts::TAU;
use std::fmt;

use crate::surfaces::{FourierSurface, SurfaceMesh};
use crate::Vec3;

/// Which coefficient family a perturbation belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CoeffKind {
    RCos,
    ZSin,
}

/// Identifier of one surface Fourier coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CoeffId {
    pub kind: CoeffKind,
    pub m: i32,
    pub n: i32,
}

impl fmt::Display for CoeffId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = match self.kind {
            CoeffKind::RCos => "R",
            CoeffKind::ZSin => "Z",
        };
        write!(f, "{}({},{})", tag, self.m, self.n)
    }
}

/// Canonical optimization ordering of the coefficients of a surface up to
/// truncation `(m_max, n_max)`: all `R` modes first, then all `Z` modes,
/// each lexicographic in `(m, n)` with `m = 0` restricted to `n >= 0`
/// (resp. `n >= 1` for `Z`).
pub fn coefficient_ids(m_max: i32, n_max: i32) -> Vec<CoeffId> {
    let mut ids = Vec::new();
    for m in 0..=m_max {
        let n_lo = if m == 0 { 0 } else { -n_max };
        for n in n_lo..=n_max {
            ids.push(CoeffId {
                kind: CoeffKind::RCos,
                m,
                n,
            });
        }
    }
    for m in 0..=m_max {
        let n_lo = if m == 0 { 1 } else { -n_max };
        for n in n_lo..=n_max {
            ids.push(CoeffId {
                kind: CoeffKind::ZSin,
                m,
                n,
            });
        }
    }
    ids
}

/// `theta = d psi / d c` sampled on the mesh grid, with chart derivatives
/// up to second order.
#[derive(Debug, Clone)]
pub struct PerturbationField {
    pub id: CoeffId,
    pub theta: Vec<Vec3>,
    pub theta_u: Vec<Vec3>,
    pub theta_v: Vec<Vec3>,
    pub theta_uu: Vec<Vec3>,
    pub theta_uv: Vec<Vec3>,
    pub theta_vv: Vec<Vec3>,
}

/// Lazily evaluated family of perturbation fields on a fixed grid.
///
/// Construction cost is zero; each field is synthesized on demand (they are
/// pure trigonometric functions of the grid, independent of the coefficient
/// values themselves).
#[derive(Debug, Clone)]
pub struct CoefficientBasis {
    pub ids: Vec<CoeffId>,
    n_fp: u32,
    n_u: usize,
    n_v: usize,
}

impl CoefficientBasis {
    /// Basis spanning every coefficient present in `surface` (by its
    /// truncation), on the grid of `mesh`.
    pub fn for_surface(surface: &FourierSurface, mesh: &SurfaceMesh) -> Self {
        let (m_max, n_max) = surface.truncation();
        Self {
            ids: coefficient_ids(m_max, n_max),
            n_fp: surface.n_fp,
            n_u: mesh.n_u,
            n_v: mesh.n_v,
        }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Evaluate the perturbation field of `id` on the grid.
    pub fn field(&self, id: CoeffId) -> PerturbationField {
        perturbation_field(id, self.n_fp, self.n_u, self.n_v)
    }
}

/// Evaluate `d psi / d c` for a single coefficient on a uniform grid.
///
/// For `R_mn`: `theta = cos(2 pi (m u + n v)) e_rad(v)` with
/// `e_rad = (cos phi, sin phi, 0)`, `phi = 2 pi v / N_p`.
/// For `Z_mn`: `theta = sin(2 pi (m u + n v)) e_z`.
pub fn perturbation_field(id: CoeffId, n_fp: u32, n_u: usize, n_v: usize) -> PerturbationField {
    let n = n_u * n_v;
    let mut f = PerturbationField {
        id,
        theta: vec![Vec3::zeros(); n],
        theta_u: vec![Vec3::zeros(); n],
        theta_v: vec![Vec3::zeros(); n],
        theta_uu: vec![Vec3::zeros(); n],
        theta_uv: vec![Vec3::zeros(); n],
        theta_vv: vec![Vec3::zeros(); n],
    };
    let fm = TAU * id.m as f64;
    let fn_ = TAU * id.n as f64;
    let phi_v = TAU / n_fp as f64;

    for i in 0..n_u {
        let u = i as f64 / n_u as f64;
        for j in 0..n_v {
            let v = j as f64 / n_v as f64;
            let k = i * n_v + j;
            let ang = fm * u + fn_ * v;
            let (sa, ca) = ang.sin_cos();
            match id.kind {
                CoeffKind::RCos => {
                    let phi = phi_v * v;
                    let (sp, cp) = phi.sin_cos();
                    let e_rad = Vec3::new(cp, sp, 0.0);
                    let e_phi = Vec3::new(-sp, cp, 0.0);
                    f.theta[k] = ca * e_rad;
                    f.theta_u[k] = -fm * sa * e_rad;
                    f.theta_v[k] = -fn_ * sa * e_rad + ca * phi_v * e_phi;
                    f.theta_uu[k] = -fm * fm * ca * e_rad;
                    f.theta_uv[k] = -fm * fn_ * ca * e_rad - fm * sa * phi_v * e_phi;
                    f.theta_vv[k] = (-fn_ * fn_ * ca - ca * phi_v * phi_v) * e_rad
                        - 2.0 * fn_ * sa * phi_v * e_phi;
                }
                CoeffKind::ZSin => {
                    let e_z = Vec3::new(0.0, 0.0, 1.0);
                    f.theta[k] = sa * e_z;
                    f.theta_u[k] = fm * ca * e_z;
                    f.theta_v[k] = fn_ * ca * e_z;
                    f.theta_uu[k] = -fm * fm * sa * e_z;
                    f.theta_uv[k] = -fm * fn_ * sa * e_z;
                    f.theta_vv[k] = -fn_ * fn_ * sa * e_z;
                }
            }
        }
    }
    f
}
