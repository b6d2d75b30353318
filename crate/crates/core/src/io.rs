//! Line-oriented text formats: surfaces, current potentials, target normal
//! fields, solve records, gradient dumps, history CSV and point clouds.
//!
//! All floats are written with Rust's shortest round-trip formatting, so
//! write -> read reproduces values bit-exactly. `#` starts a comment;
//! blank lines are ignored.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use thiserror::Error;

use crate::basis::CoeffKind;
use crate::biot_savart::BnormSpec;
use crate::currents::{CurrentPotential, PotentialBasis};
use crate::inverse::{InverseSolveResult, SolveSettings};
use crate::optim::HistoryRow;
use crate::shape_gradient::ShapeGradient;
use crate::surfaces::{FourierSurface, SurfaceMesh};

/// Errors raised while reading the text formats.
#[derive(Debug, Error)]
pub enum FormatError {
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl FormatError {
    fn parse(path: &Path, line: usize, msg: impl Into<String>) -> Self {
        Self::Parse {
            path: path.display().to_string(),
            line,
            msg: msg.into(),
        }
    }

    fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

fn read_lines(path: &Path) -> Result<Vec<(usize, String)>, FormatError> {
    let text = fs::read_to_string(path).map_err(|e| FormatError::io(path, e))?;
    Ok(text
        .lines()
        .enumerate()
        .map(|(i, l)| {
            let stripped = match l.find('#') {
                Some(p) => &l[..p],
                None => l,
            };
            (i + 1, stripped.trim().to_string())
        })
        .filter(|(_, l)| !l.is_empty())
        .collect())
}

fn parse_num<T: std::str::FromStr>(
    path: &Path,
    line: usize,
    tok: &str,
    what: &str,
) -> Result<T, FormatError> {
    tok.parse()
        .map_err(|_| FormatError::parse(path, line, format!("invalid {what}: `{tok}`")))
}

// ---------------------------------------------------------------------------
// surface files: `nfp <int>` header, then `m n R_mn Z_mn` per line
// ---------------------------------------------------------------------------

pub fn write_surface(path: &Path, surface: &FourierSurface) -> Result<(), FormatError> {
    let mut out = String::new();
    let _ = writeln!(out, "# toroidal surface: m n R_mn Z_mn");
    let _ = writeln!(out, "nfp {}", surface.n_fp);
    let mut modes: BTreeMap<(i32, i32), (f64, f64)> = BTreeMap::new();
    for (&(m, n), &c) in &surface.r_cos {
        modes.entry((m, n)).or_insert((0.0, 0.0)).0 = c;
    }
    for (&(m, n), &c) in &surface.z_sin {
        modes.entry((m, n)).or_insert((0.0, 0.0)).1 = c;
    }
    for ((m, n), (r, z)) in modes {
        let _ = writeln!(out, "{m} {n} {r} {z}");
    }
    fs::write(path, out).map_err(|e| FormatError::io(path, e))
}

pub fn read_surface(path: &Path) -> Result<FourierSurface, FormatError> {
    let lines = read_lines(path)?;
    let mut n_fp: Option<u32> = None;
    let mut surface = FourierSurface::new(1);
    for (ln, line) in lines {
        let toks: Vec<&str> = line.split_whitespace().collect();
        match toks.as_slice() {
            ["nfp", v] => {
                let fp: u32 = parse_num(path, ln, v, "field period count")?;
                if fp == 0 {
                    return Err(FormatError::parse(path, ln, "nfp must be >= 1"));
                }
                n_fp = Some(fp);
            }
            [m, n, r, z] => {
                let m: i32 = parse_num(path, ln, m, "poloidal index")?;
                let n: i32 = parse_num(path, ln, n, "toroidal index")?;
                let r: f64 = parse_num(path, ln, r, "R coefficient")?;
                let z: f64 = parse_num(path, ln, z, "Z coefficient")?;
                if m < 0 || (m == 0 && n < 0) {
                    return Err(FormatError::parse(
                        path,
                        ln,
                        format!("mode ({m},{n}) outside the canonical half-spectrum"),
                    ));
                }
                if r != 0.0 {
                    surface.set_r(m, n, r);
                }
                if z != 0.0 {
                    if m == 0 && n == 0 {
                        return Err(FormatError::parse(path, ln, "Z(0,0) is identically zero"));
                    }
                    surface.set_z(m, n, z);
                }
            }
            _ => {
                return Err(FormatError::parse(
                    path,
                    ln,
                    format!("expected `nfp <int>` or `m n R Z`, got `{line}`"),
                ))
            }
        }
    }
    surface.n_fp =
        n_fp.ok_or_else(|| FormatError::parse(path, 0, "missing `nfp <int>` header"))?;
    Ok(surface)
}

// ---------------------------------------------------------------------------
// current potential files: `ipol`/`itor` headers, then `m n Phi_mn`
// ---------------------------------------------------------------------------

pub fn write_potential(path: &Path, pot: &CurrentPotential) -> Result<(), FormatError> {
    let mut out = String::new();
    let _ = writeln!(out, "# current potential: m n Phi_mn");
    let _ = writeln!(out, "ipol {}", pot.i_pol);
    let _ = writeln!(out, "itor {}", pot.i_tor);
    for (&(m, n), &c) in &pot.phi_sin {
        let _ = writeln!(out, "{m} {n} {c}");
    }
    fs::write(path, out).map_err(|e| FormatError::io(path, e))
}

pub fn read_potential(path: &Path) -> Result<CurrentPotential, FormatError> {
    let lines = read_lines(path)?;
    let mut pot = CurrentPotential::new(0.0, 0.0);
    let mut saw_ipol = false;
    for (ln, line) in lines {
        let toks: Vec<&str> = line.split_whitespace().collect();
        match toks.as_slice() {
            ["ipol", v] => {
                pot.i_pol = parse_num(path, ln, v, "poloidal current")?;
                saw_ipol = true;
            }
            ["itor", v] => pot.i_tor = parse_num(path, ln, v, "toroidal current")?,
            [m, n, c] => {
                let m: i32 = parse_num(path, ln, m, "poloidal index")?;
                let n: i32 = parse_num(path, ln, n, "toroidal index")?;
                let c: f64 = parse_num(path, ln, c, "Phi coefficient")?;
                if m < 0 || (m == 0 && n <= 0) {
                    return Err(FormatError::parse(
                        path,
                        ln,
                        format!("sine mode ({m},{n}) outside the canonical half-spectrum"),
                    ));
                }
                pot.set_phi(m, n, c);
            }
            _ => {
                return Err(FormatError::parse(
                    path,
                    ln,
                    format!("expected `ipol/itor <float>` or `m n Phi`, got `{line}`"),
                ))
            }
        }
    }
    if !saw_ipol {
        return Err(FormatError::parse(path, 0, "missing `ipol <float>` header"));
    }
    Ok(pot)
}

// ---------------------------------------------------------------------------
// target normal field: `coeffs` + `m n B_mn`, or `grid nu nv` + `i j value`
// ---------------------------------------------------------------------------

pub fn write_bnorm(path: &Path, spec: &BnormSpec) -> Result<(), FormatError> {
    let mut out = String::new();
    match spec {
        BnormSpec::Zero => {
            let _ = writeln!(out, "coeffs");
        }
        BnormSpec::SineCoeffs(coeffs) => {
            let _ = writeln!(out, "coeffs");
            for &(m, n, c) in coeffs {
                let _ = writeln!(out, "{m} {n} {c}");
            }
        }
        BnormSpec::Grid(values) => {
            // grid dims are carried by the plasma mesh; store flat indices
            let _ = writeln!(out, "grid {} 1", values.len());
            for (i, v) in values.iter().enumerate() {
                let _ = writeln!(out, "{i} 0 {v}");
            }
        }
    }
    fs::write(path, out).map_err(|e| FormatError::io(path, e))
}

/// Read a target normal-field file. For the `grid` form the declared
/// `n_u x n_v` must match the plasma mesh the caller evaluates.
pub fn read_bnorm(path: &Path) -> Result<BnormSpec, FormatError> {
    let lines = read_lines(path)?;
    let Some((first_ln, header)) = lines.first() else {
        return Ok(BnormSpec::Zero);
    };
    let toks: Vec<&str> = header.split_whitespace().collect();
    match toks.as_slice() {
        ["coeffs"] => {
            let mut coeffs = Vec::new();
            for (ln, line) in &lines[1..] {
                let t: Vec<&str> = line.split_whitespace().collect();
                let [m, n, c] = t.as_slice() else {
                    return Err(FormatError::parse(path, *ln, "expected `m n B_mn`"));
                };
                coeffs.push((
                    parse_num(path, *ln, m, "poloidal index")?,
                    parse_num(path, *ln, n, "toroidal index")?,
                    parse_num(path, *ln, c, "B coefficient")?,
                ));
            }
            if coeffs.is_empty() {
                Ok(BnormSpec::Zero)
            } else {
                Ok(BnormSpec::SineCoeffs(coeffs))
            }
        }
        ["grid", nu, nv] => {
            let n_u: usize = parse_num(path, *first_ln, nu, "grid rows")?;
            let n_v: usize = parse_num(path, *first_ln, nv, "grid cols")?;
            let mut values = vec![0.0; n_u * n_v];
            let mut seen = vec![false; n_u * n_v];
            for (ln, line) in &lines[1..] {
                let t: Vec<&str> = line.split_whitespace().collect();
                let [i, j, v] = t.as_slice() else {
                    return Err(FormatError::parse(path, *ln, "expected `i j value`"));
                };
                let i: usize = parse_num(path, *ln, i, "row index")?;
                let j: usize = parse_num(path, *ln, j, "col index")?;
                if i >= n_u || j >= n_v {
                    return Err(FormatError::parse(
                        path,
                        *ln,
                        format!("index ({i},{j}) outside {n_u}x{n_v} grid"),
                    ));
                }
                values[i * n_v + j] = parse_num(path, *ln, v, "value")?;
                seen[i * n_v + j] = true;
            }
            if let Some(k) = seen.iter().position(|s| !s) {
                return Err(FormatError::parse(
                    path,
                    0,
                    format!("grid table incomplete: node {k} missing"),
                ));
            }
            Ok(BnormSpec::Grid(values))
        }
        _ => Err(FormatError::parse(
            path,
            *first_ln,
            "first line must be `coeffs` or `grid <n_u> <n_v>`",
        )),
    }
}

// ---------------------------------------------------------------------------
// solve records, gradient dumps, history CSV, point clouds
// ---------------------------------------------------------------------------

/// Text key-value record of an inverse solve plus a CSV block of the
/// optimal coefficients.
pub fn format_solve_record(
    result: &InverseSolveResult,
    basis: &PotentialBasis,
    settings: &SolveSettings,
) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "chi2_b = {}", result.chi2_b);
    let _ = writeln!(out, "chi2_j = {}", result.chi2_j);
    let _ = writeln!(out, "cost = {}", result.cost);
    let _ = writeln!(out, "lambda = {}", result.lambda);
    let _ = writeln!(out, "stationarity = {}", result.stationarity);
    let _ = writeln!(out, "n_u = {}", settings.n_u);
    let _ = writeln!(out, "n_v = {}", settings.n_v);
    let _ = writeln!(out, "pot_m_max = {}", settings.pot_m_max);
    let _ = writeln!(out, "pot_n_max = {}", settings.pot_n_max);
    let _ = writeln!(out, "i_pol = {}", settings.i_pol);
    let _ = writeln!(out, "i_tor = {}", settings.i_tor);
    let _ = writeln!(out, "coefficients:");
    let _ = writeln!(out, "m,n,phi");
    for (k, &(m, n)) in basis.modes.iter().enumerate() {
        let _ = writeln!(out, "{m},{n},{}", result.phi_opt[k]);
    }
    out
}

/// Gradient dump: one CSV row per coefficient and term.
pub fn format_gradient_csv(grad: &ShapeGradient) -> String {
    let mut out = String::from("coeff_type,m,n,term,value\n");
    for (k, id) in grad.ids.iter().enumerate() {
        let tag = match id.kind {
            CoeffKind::RCos => "R",
            CoeffKind::ZSin => "Z",
        };
        for (term, v) in [
            ("cost", grad.d_cost[k]),
            ("perimeter", grad.d_perimeter[k]),
            ("distance", grad.d_distance[k]),
            ("reach", grad.d_reach[k]),
            ("total", grad.d_total[k]),
        ] {
            let _ = writeln!(out, "{tag},{},{},{term},{v}", id.m, id.n);
        }
    }
    out
}

pub const HISTORY_SCHEMA: &str = "# cws-history v1";
pub const HISTORY_COLUMNS: &str = "iter,total,cost,chi2_b,chi2_j,pen_perimeter,pen_distance,pen_reach,distance,area,reach,grad_norm,step_len";

pub fn history_header() -> String {
    format!("{HISTORY_SCHEMA}\n{HISTORY_COLUMNS}\n")
}

pub fn format_history_row(row: &HistoryRow) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
        row.iter,
        row.total,
        row.cost,
        row.chi2_b,
        row.chi2_j,
        row.pen_perimeter,
        row.pen_distance,
        row.pen_reach,
        row.distance,
        row.area,
        row.reach,
        row.grad_norm,
        row.step_len
    )
}

pub fn write_history(path: &Path, rows: &[HistoryRow]) -> Result<(), FormatError> {
    let mut out = history_header();
    for r in rows {
        out.push_str(&format_history_row(r));
    }
    fs::write(path, out).map_err(|e| FormatError::io(path, e))
}

pub fn read_history(path: &Path) -> Result<Vec<HistoryRow>, FormatError> {
    let text = fs::read_to_string(path).map_err(|e| FormatError::io(path, e))?;
    let mut rows = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with("iter,") {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 13 {
            return Err(FormatError::parse(
                path,
                ln + 1,
                format!("expected 13 columns, got {}", f.len()),
            ));
        }
        let num = |i: usize| -> Result<f64, FormatError> {
            parse_num(path, ln + 1, f[i], "history value")
        };
        rows.push(HistoryRow {
            iter: parse_num(path, ln + 1, f[0], "iteration")?,
            total: num(1)?,
            cost: num(2)?,
            chi2_b: num(3)?,
            chi2_j: num(4)?,
            pen_perimeter: num(5)?,
            pen_distance: num(6)?,
            pen_reach: num(7)?,
            distance: num(8)?,
            area: num(9)?,
            reach: num(10)?,
            grad_norm: num(11)?,
            step_len: num(12)?,
        });
    }
    Ok(rows)
}

/// Point-cloud dump of a mesh (one period): `u,v,x,y,z,nx,ny,nz,areath`.
pub fn format_point_cloud(mesh: &SurfaceMesh) -> String {
    let mut out = String::from("u,v,x,y,z,nx,ny,nz,area_elem\n");
    for i in 0..mesh.n_u {
        let u = i as f64 / mesh.n_u as f64;
        for j in 0..mesh.n_v {
            let v = j as f64 / mesh.n_v as f64;
            let k = mesh.idx(i, j);
            let p = mesh.points[k];
            let n = mesh.normal[k];
            let _ = writeln!(
                out,
                "{u},{v},{},{},{},{},{},{},{}",
                p.x, p.y, p.z, n.x, n.y, n.z, mesh.area_elem[k]
            );
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    #[test]
    fn surface_roundtrip_is_exact() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("cws.txt");
        let mut s = FourierSurface::circular_torus(3.0, 1.0);
        s.n_fp = 3;
        s.set_r(2, -1, 0.123456789012345678);
        s.set_z(2, -1, -3.0e-17);
        s.set_r(0, 2, 1.0 / 3.0);
        write_surface(&path, &s).unwrap();
        let back = read_surface(&path).unwrap();
        assert_eq!(s.n_fp, back.n_fp);
        for (&k, &v) in &s.r_cos {
            assert_eq!(v.to_bits(), back.r(k.0, k.1).to_bits());
        }
        for (&k, &v) in &s.z_sin {
            assert_eq!(v.to_bits(), back.z(k.0, k.1).to_bits());
        }
    }

    #[test]
    fn potential_roundtrip_is_exact() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("pot.txt");
        let mut p = CurrentPotential::new(1.0e6, -0.25);
        p.set_phi(1, -2, 0.1 + 1e-16);
        p.set_phi(3, 0, -7.25);
        write_potential(&path, &p).unwrap();
        let back = read_potential(&path).unwrap();
        assert_eq!(p, back);
    }

    #[test]
    fn bnorm_variants_roundtrip() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("b.txt");
        let spec = BnormSpec::SineCoeffs(vec![(1, 0, 0.05), (2, -1, -0.01)]);
        write_bnorm(&path, &spec).unwrap();
        assert_eq!(read_bnorm(&path).unwrap(), spec);

        let grid = BnormSpec::Grid(vec![0.5, -1.25, 3.75]);
        write_bnorm(&path, &grid).unwrap();
        assert_eq!(read_bnorm(&path).unwrap(), grid);
    }

    #[test]
    fn malformed_files_report_line_numbers() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("bad.txt");
        fs::write(&path, "nfp 2\n1 0 1.0\n").unwrap();
        match read_surface(&path) {
            Err(FormatError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
        fs::write(&path, "1 0 1.0 1.0\n").unwrap();
        assert!(read_surface(&path).is_err(), "missing nfp header");
    }

    #[test]
    fn history_roundtrip() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("h.csv");
        let rows = vec![HistoryRow {
            iter: 1,
            total: 0.5,
            cost: 0.25,
            chi2_b: 0.2,
            chi2_j: 50.0,
            pen_perimeter: 0.0,
            pen_distance: 0.25,
            pen_reach: 0.0,
            distance: 0.19,
            area: 55.7,
            reach: 0.084,
            grad_norm: 1e-3,
            step_len: 0.1,
        }];
        write_history(&path, &rows).unwrap();
        let back = read_history(&path).unwrap();
        assert_eq!(back.len(), 1);
        assert_eq!(back[0].total.to_bits(), rows[0].total.to_bits());
        assert_eq!(back[0].reach.to_bits(), rows[0].reach.to_bits());
    }
}
