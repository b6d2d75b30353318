//! Fourier representation and meshing of stellarator-symmetric toroidal
//! surfaces.
//!
//! A surface is the image of the flat torus `(u,v) in [0,1)^2` under
//!
//! ```text
//!   psi(u,v) = ( R(u,v) cos(2 pi v / N_p),
//!                R(u,v) sin(2 pi v / N_p),
//!                Z(u,v) ),
//!   R(u,v) = sum R_mn cos(2 pi (m u + n v)),
//!   Z(u,v) = sum Z_mn sin(2 pi (m u + n v)),
//! ```
//!
//! where `N_p` is the number of field periods; the chart covers one period
//! and full-surface integrals carry a factor `N_p`. Stellarator symmetry is
//! structural: `R` has no sine terms and `Z` no cosine terms. `u` is the
//! poloidal direction, `v` the toroidal one.
//!
//! The outward unit normal follows the orientation-reversing convention
//! `nu = -(d_u psi x d_v psi)/|d_u psi x d_v psi|`, i.e. the frame
//! `(d_u psi, d_v psi, -nu)` is direct.

use std::collections::BTreeMap;
use std::f64::consts::TAU;

use crate::error::{CoreError, Result};
use crate::Vec3;

/// Mode index `(m, n)` of a double Fourier series; `m >= 0` poloidal,
/// `n` toroidal (in units of the field period).
pub type ModeIndex = (i32, i32);

/// Truncated double-Fourier description of a stellarator-symmetric toroidal
/// surface. Coefficients in meters.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierSurface {
    /// Number of field periods `N_p >= 1`.
    pub n_fp: u32,
    /// Cosine coefficients of the cylindrical radius, keyed by `(m,n)`.
    pub r_cos: BTreeMap<ModeIndex, f64>,
    /// Sine coefficients of the height, keyed by `(m,n)`.
    pub z_sin: BTreeMap<ModeIndex, f64>,
}

impl FourierSurface {
    /// Empty surface with the given field-period count.
    pub fn new(n_fp: u32) -> Self {
        assert!(n_fp >= 1, "field period count must be >= 1");
        Self {
            n_fp,
            r_cos: BTreeMap::new(),
            z_sin: BTreeMap::new(),
        }
    }

    /// Circular torus `R = r0 + a cos(2 pi u)`, `Z = a sin(2 pi u)`.
    pub fn circular_torus(r0: f64, a: f64) -> Self {
        let mut s = Self::new(1);
        s.set_r(0, 0, r0);
        s.set_r(1, 0, a);
        s.set_z(1, 0, a);
        s
    }

    /// Insert/overwrite an `R_mn` coefficient. Only the canonical half of
    /// the spectrum is representable: `m >= 0`, and `n > 0` when `m = 0`
    /// (for `m = 0`, `cos(2 pi n v)` is even in `n`; `(0,0)` is the major
    /// radius).
    pub fn set_r(&mut self, m: i32, n: i32, value: f64) {
        assert!(m >= 0, "poloidal index must be non-negative");
        assert!(m > 0 || n >= 0, "(0,n<0) duplicates (0,-n) for cosines");
        self.r_cos.insert((m, n), value);
    }

    /// Insert/overwrite a `Z_mn` coefficient. `m >= 0`, `(0,0)` excluded
    /// (`sin 0 = 0`), and `n > 0` when `m = 0` (sine oddness).
    pub fn set_z(&mut self, m: i32, n: i32, value: f64) {
        assert!(m >= 0, "poloidal index must be non-negative");
        assert!(!(m == 0 && n == 0), "(0,0) sine term is identically zero");
        assert!(m > 0 || n > 0, "(0,n<0) duplicates -(0,-n) for sines");
        self.z_sin.insert((m, n), value);
    }

    pub fn r(&self, m: i32, n: i32) -> f64 {
        self.r_cos.get(&(m, n)).copied().unwrap_or(0.0)
    }

    pub fn z(&self, m: i32, n: i32) -> f64 {
        self.z_sin.get(&(m, n)).copied().unwrap_or(0.0)
    }

    /// Largest poloidal / toroidal mode order present.
    pub fn truncation(&self) -> (i32, i32) {
        let mut m_max = 0;
        let mut n_max = 0;
        for &(m, n) in self.r_cos.keys().chain(self.z_sin.keys()) {
            m_max = m_max.max(m);
            n_max = n_max.max(n.abs());
        }
        (m_max, n_max)
    }

    /// `R`, `Z` and their chart derivatives up to second order at `(u,v)`.
    fn eval_rz(&self, u: f64, v: f64) -> CylJet {
        let mut jet = CylJet::default();
        for (&(m, n), &c) in &self.r_cos {
            let (fm, fn_) = (TAU * m as f64, TAU * n as f64);
            let ang = fm * u + fn_ * v;
            let (s, co) = ang.sin_cos();
            jet.r += c * co;
            jet.r_u -= c * fm * s;
            jet.r_v -= c * fn_ * s;
            jet.r_uu -= c * fm * fm * co;
            jet.r_uv -= c * fm * fn_ * co;
            jet.r_vv -= c * fn_ * fn_ * co;
        }
        for (&(m, n), &c) in &self.z_sin {
            let (fm, fn_) = (TAU * m as f64, TAU * n as f64);
            let ang = fm * u + fn_ * v;
            let (s, co) = ang.sin_cos();
            jet.z += c * s;
            jet.z_u += c * fm * co;
            jet.z_v += c * fn_ * co;
            jet.z_uu -= c * fm * fm * s;
            jet.z_uv -= c * fm * fn_ * s;
            jet.z_vv -= c * fn_ * fn_ * s;
        }
        jet
    }

    /// Point on the surface (one field period chart).
    pub fn point(&self, u: f64, v: f64) -> Vec3 {
        let jet = self.eval_rz(u, v);
        let phi = TAU * v / self.n_fp as f64;
        let (s, c) = phi.sin_cos();
        Vec3::new(jet.r * c, jet.r * s, jet.z)
    }
}

#[derive(Debug, Default, Clone, Copy)]
struct CylJet {
    r: f64,
    r_u: f64,
    r_v: f64,
    r_uu: f64,
    r_uv: f64,
    r_vv: f64,
    z: f64,
    z_u: f64,
    z_v: f64,
    z_uu: f64,
    z_uv: f64,
    z_vv: f64,
}

/// First fundamental form at a grid point and its inverse.
#[derive(Debug, Clone, Copy)]
pub struct Metric {
    pub g_uu: f64,
    pub g_uv: f64,
    pub g_vv: f64,
    /// Inverse components; `det = g_uu g_vv - g_uv^2 = area_elem^2`.
    pub inv_uu: f64,
    pub inv_uv: f64,
    pub inv_vv: f64,
}

/// Sampled geometry of one field period on a uniform `(u,v)` grid.
///
/// Grid nodes are `u_i = i/n_u`, `v_j = j/n_v` (periodic, no duplicated
/// seam). Storage is row-major in `i * n_v + j`. The per-node quadrature
/// weight for one-period integrals is `area_elem / (n_u n_v)`; full-surface
/// integrals multiply by `n_fp`.
#[derive(Debug, Clone)]
pub struct SurfaceMesh {
    pub n_u: usize,
    pub n_v: usize,
    pub n_fp: u32,
    /// `psi(u_i, v_j)` in meters.
    pub points: Vec<Vec3>,
    /// `d psi / d u`.
    pub du_tan: Vec<Vec3>,
    /// `d psi / d v`.
    pub dv_tan: Vec<Vec3>,
    /// Outward unit normal `nu = -(d_u psi x d_v psi)/|...|`.
    pub normal: Vec<Vec3>,
    /// `|d_u psi x d_v psi|` per unit `(u,v)`; always `> 0`.
    pub area_elem: Vec<f64>,
    pub metric: Vec<Metric>,
    /// Analytic second derivatives `psi_uu, psi_uv, psi_vv`.
    pub d2_uu: Vec<Vec3>,
    pub d2_uv: Vec<Vec3>,
    pub d2_vv: Vec<Vec3>,
}

impl SurfaceMesh {
    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        i * self.n_v + j
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.n_u * self.n_v
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// One-period quadrature weight of node `k` (multiply totals by `n_fp`
    /// for full-surface integrals).
    #[inline]
    pub fn weight(&self, k: usize) -> f64 {
        self.area_elem[k] / (self.n_u * self.n_v) as f64
    }

    /// Area of the full surface (all field periods), m^2.
    pub fn area(&self) -> f64 {
        let one: f64 = self.area_elem.iter().sum();
        self.n_fp as f64 * one / (self.n_u * self.n_v) as f64
    }

    /// Signed enclosed volume via the divergence theorem,
    /// `V = (1/3) int <x, nu> dmu`. Positive when `nu` points outward.
    pub fn signed_volume(&self) -> f64 {
        let mut acc = 0.0;
        for k in 0..self.len() {
            acc += self.points[k].dot(&self.normal[k]) * self.weight(k);
        }
        self.n_fp as f64 * acc / 3.0
    }

    /// Rotation matrix advancing one field period about the z-axis.
    pub fn period_rotation(&self, period: u32) -> nalgebra::Matrix3<f64> {
        let ang = TAU * period as f64 / self.n_fp as f64;
        let (s, c) = ang.sin_cos();
        nalgebra::Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
    }

    /// All points of the full surface: the one-period grid replicated by
    /// the `n_fp`-fold rotation.
    pub fn replicated_points(&self) -> Vec<Vec3> {
        let mut out = Vec::with_capacity(self.len() * self.n_fp as usize);
        for p in 0..self.n_fp {
            let rot = self.period_rotation(p);
            out.extend(self.points.iter().map(|x| rot * x));
        }
        out
    }
}

/// Sample a Fourier surface on an `n_u x n_v` grid with analytic tangents,
/// outward normal, metric and second derivatives.
///
/// Errors with [`CoreError::NonPositiveRadius`] if the cylindrical radius is
/// not positive at some node, [`CoreError::DegenerateEmbedding`] if the area
/// element vanishes.
pub fn eval_mesh(surface: &FourierSurface, n_u: usize, n_v: usize) -> Result<SurfaceMesh> {
    assert!(n_u >= 4 && n_v >= 4, "grid must be at least 4x4");
    let n_fp = surface.n_fp as f64;
    let phi_v = TAU / n_fp; // d phi / d v

    let n = n_u * n_v;
    let mut mesh = SurfaceMesh {
        n_u,
        n_v,
        n_fp: surface.n_fp,
        points: vec![Vec3::zeros(); n],
        du_tan: vec![Vec3::zeros(); n],
        dv_tan: vec![Vec3::zeros(); n],
        normal: vec![Vec3::zeros(); n],
        area_elem: vec![0.0; n],
        metric: Vec::with_capacity(n),
        d2_uu: vec![Vec3::zeros(); n],
        d2_uv: vec![Vec3::zeros(); n],
        d2_vv: vec![Vec3::zeros(); n],
    };

    for i in 0..n_u {
        let u = i as f64 / n_u as f64;
        for j in 0..n_v {
            let v = j as f64 / n_v as f64;
            let k = i * n_v + j;
            let jet = surface.eval_rz(u, v);
            if jet.r <= 0.0 {
                return Err(CoreError::NonPositiveRadius { u, v, r: jet.r });
            }
            let phi = phi_v * v;
            let (s, c) = phi.sin_cos();

            mesh.points[k] = Vec3::new(jet.r * c, jet.r * s, jet.z);
            mesh.du_tan[k] = Vec3::new(jet.r_u * c, jet.r_u * s, jet.z_u);
            mesh.dv_tan[k] = Vec3::new(
                jet.r_v * c - jet.r * phi_v * s,
                jet.r_v * s + jet.r * phi_v * c,
                jet.z_v,
            );
            mesh.d2_uu[k] = Vec3::new(jet.r_uu * c, jet.r_uu * s, jet.z_uu);
            mesh.d2_uv[k] = Vec3::new(
                jet.r_uv * c - jet.r_u * phi_v * s,
                jet.r_uv * s + jet.r_u * phi_v * c,
                jet.z_uv,
            );
            mesh.d2_vv[k] = Vec3::new(
                jet.r_vv * c - 2.0 * jet.r_v * phi_v * s - jet.r * phi_v * phi_v * c,
                jet.r_vv * s + 2.0 * jet.r_v * phi_v * c - jet.r * phi_v * phi_v * s,
                jet.z_vv,
            );

            let cross = mesh.du_tan[k].cross(&mesh.dv_tan[k]);
            let area = cross.norm();
            if area <= 0.0 {
                return Err(CoreError::DegenerateEmbedding { u, v, area });
            }
            mesh.area_elem[k] = area;
            mesh.normal[k] = -cross / area;

            let g_uu = mesh.du_tan[k].dot(&mesh.du_tan[k]);
            let g_uv = mesh.du_tan[k].dot(&mesh.dv_tan[k]);
            let g_vv = mesh.dv_tan[k].dot(&mesh.dv_tan[k]);
            let det = area * area;
            mesh.metric.push(Metric {
                g_uu,
                g_uv,
                g_vv,
                inv_uu: g_vv / det,
                inv_uv: -g_uv / det,
                inv_vv: g_uu / det,
            });
        }
    }
    Ok(mesh)
}

/// Tangential gradient of a scalar given by chart derivatives:
/// `grad_S f = g^{ab} (d_b f) psi_a`.
#[inline]
pub fn tangential_gradient(mesh: &SurfaceMesh, k: usize, f_u: f64, f_v: f64) -> Vec3 {
    let m = &mesh.metric[k];
    let cu = m.inv_uu * f_u + m.inv_uv * f_v;
    let cv = m.inv_uv * f_u + m.inv_vv * f_v;
    mesh.du_tan[k] * cu + mesh.dv_tan[k] * cv
}
