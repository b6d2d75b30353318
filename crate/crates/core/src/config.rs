//! Run configuration: a flat `key = value` document with strict validation.
//!
//! Unknown keys are rejected, every value is type- and range-checked, and
//! omitted keys fall back to documented defaults. `serialize` emits every
//! key with shortest round-trip float formatting, so
//! `parse(serialize(cfg)) == cfg`.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use thiserror::Error;

use crate::inverse::SolveSettings;
use crate::optim::OptimSettings;
use crate::penalties::PenaltyConfig;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("key `{key}`: expected {expected}, got `{got}`")]
    TypeMismatch {
        key: String,
        expected: &'static str,
        got: String,
    },
    #[error("key `{key}`: {msg}")]
    RangeError { key: String, msg: String },
    #[error("missing required key `{0}`")]
    MissingRequired(String),
    #[error("line {line}: expected `key = value`, got `{text}`")]
    Syntax { line: usize, text: String },
    #[error("duplicate key `{0}`")]
    DuplicateKey(String),
}

/// Full configuration of a run. Grid/truncation defaults follow the usual
/// production choice (64x64 grids, order-12 potential, up to 2000 BFGS
/// steps).
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// Coil winding surface file (required).
    pub cws_file: String,
    /// Plasma boundary surface file (required).
    pub plasma_file: String,
    /// Target normal-field file; empty string means a zero target.
    pub bnorm_file: String,
    /// Output directory for histories, checkpoints and dumps.
    pub out_dir: String,

    pub n_u: usize,
    pub n_v: usize,
    pub pot_m_max: i32,
    pub pot_n_max: i32,
    pub lambda: f64,
    pub i_pol: f64,
    pub i_tor: f64,
    pub guard_dist: f64,
    pub kernel_eps: f64,

    pub perimeter_max: f64,
    pub perimeter_weight: f64,
    pub distance_min: f64,
    pub distance_weight: f64,
    pub reach_min: f64,
    pub reach_weight: f64,
    pub barrier_power: i32,
    pub lse_temp: f64,
    pub curvature_temp: f64,
    pub chart_cutoff: f64,

    pub max_iter: usize,
    pub grad_tol: f64,
    pub step_tol: f64,
    pub wolfe_c1: f64,
    pub wolfe_c2: f64,
    pub ls_max: usize,
    /// Write checkpoint files every this many accepted iterates (0 = off).
    pub checkpoint_every: usize,

    /// Worker threads (0 = library default).
    pub threads: usize,
    /// Seed for randomized diagnostics.
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let pen = PenaltyConfig::default();
        let opt = OptimSettings::default();
        Self {
            cws_file: String::new(),
            plasma_file: String::new(),
            bnorm_file: String::new(),
            out_dir: "out".into(),
            n_u: 64,
            n_v: 64,
            pot_m_max: 12,
            pot_n_max: 12,
            lambda: 2.5e-16,
            i_pol: 1.0,
            i_tor: 0.0,
            guard_dist: crate::biot_savart::GUARD_DIST,
            kernel_eps: crate::biot_savart::KERNEL_EPS,
            perimeter_max: pen.perimeter_max,
            perimeter_weight: pen.perimeter_weight,
            distance_min: pen.distance_min,
            distance_weight: pen.distance_weight,
            reach_min: pen.reach_min,
            reach_weight: pen.reach_weight,
            barrier_power: pen.barrier_power,
            lse_temp: pen.lse_temp,
            curvature_temp: pen.curvature_temp,
            chart_cutoff: pen.chart_cutoff,
            max_iter: opt.max_iter,
            grad_tol: opt.grad_tol,
            step_tol: opt.step_tol,
            wolfe_c1: opt.wolfe_c1,
            wolfe_c2: opt.wolfe_c2,
            ls_max: opt.ls_max,
            checkpoint_every: 50,
            threads: 0,
            seed: 0,
        }
    }
}

impl RunConfig {
    pub fn solve_settings(&self) -> SolveSettings {
        SolveSettings {
            n_u: self.n_u,
            n_v: self.n_v,
            pot_m_max: self.pot_m_max,
            pot_n_max: self.pot_n_max,
            lambda: self.lambda,
            i_pol: self.i_pol,
            i_tor: self.i_tor,
            guard_dist: self.guard_dist,
        }
    }

    pub fn penalty_config(&self) -> PenaltyConfig {
        PenaltyConfig {
            perimeter_max: self.perimeter_max,
            perimeter_weight: self.perimeter_weight,
            distance_min: self.distance_min,
            distance_weight: self.distance_weight,
            reach_min: self.reach_min,
            reach_weight: self.reach_weight,
            barrier_power: self.barrier_power,
            lse_temp: self.lse_temp,
            curvature_temp: self.curvature_temp,
            chart_cutoff: self.chart_cutoff,
        }
    }

    pub fn optim_settings(&self) -> OptimSettings {
        OptimSettings {
            max_iter: self.max_iter,
            grad_tol: self.grad_tol,
            step_tol: self.step_tol,
            wolfe_c1: self.wolfe_c1,
            wolfe_c2: self.wolfe_c2,
            ls_max: self.ls_max,
        }
    }
}

macro_rules! set_field {
    ($cfg:ident, $key:ident, $val:ident, usize: $($name:ident),* ; i32: $($name_i:ident),* ; f64: $($name_f:ident),* ; u64: $($name_u:ident),* ; string: $($name_s:ident),*) => {
        match $key {
            $(stringify!($name) => {
                $cfg.$name = $val.parse().map_err(|_| ConfigError::TypeMismatch {
                    key: $key.into(), expected: "non-negative integer", got: $val.into(),
                })?;
            })*
            $(stringify!($name_i) => {
                $cfg.$name_i = $val.parse().map_err(|_| ConfigError::TypeMismatch {
                    key: $key.into(), expected: "integer", got: $val.into(),
                })?;
            })*
            $(stringify!($name_f) => {
                $cfg.$name_f = $val.parse().map_err(|_| ConfigError::TypeMismatch {
                    key: $key.into(), expected: "float", got: $val.into(),
                })?;
            })*
            $(stringify!($name_u) => {
                $cfg.$name_u = $val.parse().map_err(|_| ConfigError::TypeMismatch {
                    key: $key.into(), expected: "non-negative integer", got: $val.into(),
                })?;
            })*
            $(stringify!($name_s) => {
                $cfg.$name_s = $val.to_string();
            })*
            _ => return Err(ConfigError::UnknownKey($key.into())),
        }
    };
}

/// Parse a configuration document.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let mut cfg = RunConfig::default();
    let mut seen: BTreeMap<String, ()> = BTreeMap::new();

    for (ln, raw) in text.lines().enumerate() {
        let line = match raw.find('#') {
            Some(p) => &raw[..p],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, val)) = line.split_once('=') else {
            return Err(ConfigError::Syntax {
                line: ln + 1,
                text: line.to_string(),
            });
        };
        let key = key.trim();
        let val = val.trim();
        if seen.insert(key.to_string(), ()).is_some() {
            return Err(ConfigError::DuplicateKey(key.to_string()));
        }
        set_field!(cfg, key, val,
            usize: n_u, n_v, max_iter, ls_max, checkpoint_every, threads ;
            i32: pot_m_max, pot_n_max, barrier_power ;
            f64: lambda, i_pol, i_tor, guard_dist, kernel_eps,
                 perimeter_max, perimeter_weight, distance_min, distance_weight,
                 reach_min, reach_weight, lse_temp, curvature_temp, chart_cutoff,
                 grad_tol, step_tol, wolfe_c1, wolfe_c2 ;
            u64: seed ;
            string: cws_file, plasma_file, bnorm_file, out_dir);
    }

    validate(&cfg)?;
    Ok(cfg)
}

fn validate(cfg: &RunConfig) -> Result<(), ConfigError> {
    let positive = [
        ("lambda", cfg.lambda),
        ("guard_dist", cfg.guard_dist),
        ("kernel_eps", cfg.kernel_eps),
        ("perimeter_max", cfg.perimeter_max),
        ("distance_min", cfg.distance_min),
        ("reach_min", cfg.reach_min),
        ("lse_temp", cfg.lse_temp),
        ("curvature_temp", cfg.curvature_temp),
        ("chart_cutoff", cfg.chart_cutoff),
        ("grad_tol", cfg.grad_tol),
        ("step_tol", cfg.step_tol),
    ];
    for (key, v) in positive {
        if !(v > 0.0) || !v.is_finite() {
            return Err(ConfigError::RangeError {
                key: key.into(),
                msg: format!("must be a positive finite number, got {v}"),
            });
        }
    }
    for (key, v) in [
        ("perimeter_weight", cfg.perimeter_weight),
        ("distance_weight", cfg.distance_weight),
        ("reach_weight", cfg.reach_weight),
    ] {
        if !(v >= 0.0) || !v.is_finite() {
            return Err(ConfigError::RangeError {
                key: key.into(),
                msg: format!("must be a non-negative finite number, got {v}"),
            });
        }
    }
    if cfg.n_u < 4 || cfg.n_v < 4 {
        return Err(ConfigError::RangeError {
            key: "n_u/n_v".into(),
            msg: "grid must be at least 4x4".into(),
        });
    }
    if cfg.pot_m_max < 0 || cfg.pot_n_max < 0 {
        return Err(ConfigError::RangeError {
            key: "pot_m_max/pot_n_max".into(),
            msg: "truncation orders must be non-negative".into(),
        });
    }
    if cfg.barrier_power < 1 {
        return Err(ConfigError::RangeError {
            key: "barrier_power".into(),
            msg: "barrier exponent must be at least 1".into(),
        });
    }
    if !(0.0 < cfg.wolfe_c1 && cfg.wolfe_c1 < cfg.wolfe_c2 && cfg.wolfe_c2 < 1.0) {
        return Err(ConfigError::RangeError {
            key: "wolfe_c1/wolfe_c2".into(),
            msg: "need 0 < c1 < c2 < 1".into(),
        });
    }
    if cfg.cws_file.is_empty() {
        return Err(ConfigError::MissingRequired("cws_file".into()));
    }
    if cfg.plasma_file.is_empty() {
        return Err(ConfigError::MissingRequired("plasma_file".into()));
    }
    Ok(())
}

/// Emit every key (semantic round-trip with [`parse_config`]).
pub fn serialize_config(cfg: &RunConfig) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# paths");
    let _ = writeln!(s, "cws_file = {}", cfg.cws_file);
    let _ = writeln!(s, "plasma_file = {}", cfg.plasma_file);
    let _ = writeln!(s, "bnorm_file = {}", cfg.bnorm_file);
    let _ = writeln!(s, "out_dir = {}", cfg.out_dir);
    let _ = writeln!(s, "\n# discretization");
    let _ = writeln!(s, "n_u = {}", cfg.n_u);
    let _ = writeln!(s, "n_v = {}", cfg.n_v);
    let _ = writeln!(s, "pot_m_max = {}", cfg.pot_m_max);
    let _ = writeln!(s, "pot_n_max = {}", cfg.pot_n_max);
    let _ = writeln!(s, "\n# physics");
    let _ = writeln!(s, "lambda = {}", cfg.lambda);
    let _ = writeln!(s, "i_pol = {}", cfg.i_pol);
    let _ = writeln!(s, "i_tor = {}", cfg.i_tor);
    let _ = writeln!(s, "guard_dist = {}", cfg.guard_dist);
    let _ = writeln!(s, "kernel_eps = {}", cfg.kernel_eps);
    let _ = writeln!(s, "\n# penalties");
    let _ = writeln!(s, "perimeter_max = {}", cfg.perimeter_max);
    let _ = writeln!(s, "perimeter_weight = {}", cfg.perimeter_weight);
    let _ = writeln!(s, "distance_min = {}", cfg.distance_min);
    let _ = writeln!(s, "distance_weight = {}", cfg.distance_weight);
    let _ = writeln!(s, "reach_min = {}", cfg.reach_min);
    let _ = writeln!(s, "reach_weight = {}", cfg.reach_weight);
    let _ = writeln!(s, "barrier_power = {}", cfg.barrier_power);
    let _ = writeln!(s, "lse_temp = {}", cfg.lse_temp);
    let _ = writeln!(s, "curvature_temp = {}", cfg.curvature_temp);
    let _ = writeln!(s, "chart_cutoff = {}", cfg.chart_cutoff);
    let _ = writeln!(s, "\n# optimizer");
    let _ = writeln!(s, "max_iter = {}", cfg.max_iter);
    let _ = writeln!(s, "grad_tol = {}", cfg.grad_tol);
    let _ = writeln!(s, "step_tol = {}", cfg.step_tol);
    let _ = writeln!(s, "wolfe_c1 = {}", cfg.wolfe_c1);
    let _ = writeln!(s, "wolfe_c2 = {}", cfg.wolfe_c2);
    let _ = writeln!(s, "ls_max = {}", cfg.ls_max);
    let _ = writeln!(s, "checkpoint_every = {}", cfg.checkpoint_every);
    let _ = writeln!(s, "\n# runtime");
    let _ = writeln!(s, "threads = {}", cfg.threads);
    let _ = writeln!(s, "seed = {}", cfg.seed);
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    const REQUIRED: &str = "cws_file = cws.txt\nplasma_file = plasma.txt\n";

    #[test]
    fn defaults_from_minimal_document() {
        let cfg = parse_config(REQUIRED).unwrap();
        assert_eq!(cfg.n_u, 64);
        assert_eq!(cfg.n_v, 64);
        assert_eq!(cfg.pot_m_max, 12);
        assert_eq!(cfg.pot_n_max, 12);
        assert_eq!(cfg.max_iter, 2000);
        assert_eq!(cfg.lambda, 2.5e-16);
        assert_eq!(cfg.perimeter_max, 56.0);
        assert_eq!(cfg.distance_min, 0.20);
        assert_eq!(cfg.reach_min, 0.0769);
    }

    #[test]
    fn unknown_key_rejected() {
        let doc = format!("{REQUIRED}frobnicate = 3\n");
        match parse_config(&doc) {
            Err(ConfigError::UnknownKey(k)) => assert_eq!(k, "frobnicate"),
            other => panic!("expected UnknownKey, got {other:?}"),
        }
    }

    #[test]
    fn negative_lambda_names_the_key() {
        let doc = format!("{REQUIRED}lambda = -1\n");
        match parse_config(&doc) {
            Err(ConfigError::RangeError { key, .. }) => assert_eq!(key, "lambda"),
            other => panic!("expected RangeError, got {other:?}"),
        }
    }

    #[test]
    fn type_mismatch_names_the_key() {
        let doc = format!("{REQUIRED}n_u = sixty-four\n");
        match parse_config(&doc) {
            Err(ConfigError::TypeMismatch { key, .. }) => assert_eq!(key, "n_u"),
            other => panic!("expected TypeMismatch, got {other:?}"),
        }
    }

    #[test]
    fn missing_paths_rejected() {
        match parse_config("n_u = 16\nn_v = 16\n") {
            Err(ConfigError::MissingRequired(k)) => assert_eq!(k, "cws_file"),
            other => panic!("expected MissingRequired, got {other:?}"),
        }
    }

    #[test]
    fn roundtrip_through_serialize() {
        let doc = format!(
            "{REQUIRED}lambda = 5.1e-19\nn_u = 32\nseed = 17\nreach_weight = 0\nbnorm_file = b.txt\n"
        );
        let cfg = parse_config(&doc).unwrap();
        let cfg2 = parse_config(&serialize_config(&cfg)).unwrap();
        assert_eq!(cfg, cfg2);
    }

    #[test]
    fn duplicate_key_rejected() {
        let doc = format!("{REQUIRED}n_u = 16\nn_u = 32\n");
        assert!(matches!(
            parse_config(&doc),
            Err(ConfigError::DuplicateKey(_))
        ));
    }
}
