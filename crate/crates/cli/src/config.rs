//! Flat `key = value` run configuration.

use std::path::{Path, PathBuf};

use ldgpflow::femspace::QuadratureDegrees;
use ldgpflow::system::{LinearStrategy, Model};
use ldgpflow::verification::StudyConfig;

use crate::CliError;

/// Everything a run needs. Defaults are the standard setup with
/// `(p, ρ) = (2.5, 0.1)`.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub study: StudyConfig,
    /// Level solved by `solve`.
    pub level: usize,
    /// Seed of the randomized checks.
    pub seed: u64,
    /// Random fields per mesh level in the operator checks.
    pub samples: usize,
    pub table: PathBuf,
    pub vtk: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            study: StudyConfig::default(),
            level: 3,
            seed: 2024,
            samples: 100,
            table: PathBuf::from("eoc.csv"),
            vtk: PathBuf::from("solution.vtk"),
        }
    }
}

/// What the configuration is used for; `study` needs at least two levels.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Study,
    Solve,
    Check,
}

/// Recognized keys, in the order `describe` prints them.
pub const KEYS: &[(&str, &str)] = &[
    ("p", "power-law exponent, > 1"),
    ("delta", "regularization, >= 0"),
    ("alpha", "penalty parameter, > 0"),
    ("k", "polynomial degree, 1 or 2"),
    ("model", "p-stokes or p-navier-stokes"),
    ("rho", "regularity of the exact solution, in (0, 1]"),
    ("n0", "cells per side of the level-0 mesh, even"),
    ("levels", "finest refinement level of a study, >= 2"),
    ("level", "level solved by `solve`"),
    ("quad_volume", "volume quadrature degree"),
    ("quad_face", "face quadrature degree"),
    ("tau_abs", "absolute Newton tolerance"),
    ("tau_rel", "relative Newton tolerance"),
    ("max_iter", "Newton iteration limit"),
    ("line_search", "Armijo damping, true or false"),
    ("linear", "auto, direct or krylov"),
    ("krylov_threshold", "unknowns above which `auto` uses GMRES"),
    ("check_jacobian", "compare Jacobians with differences, true or false"),
    ("warm_start", "start from the coarser solution, true or false"),
    ("seed", "seed of the randomized checks"),
    ("samples", "random fields per level in `check`, >= 100"),
    ("table", "CSV output path"),
    ("vtk", "VTK output path"),
];

fn invalid(key: &str, value: &str, what: &str) -> CliError {
    CliError::Config(format!("{key} = {value:?}: {what}"))
}

fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, CliError> {
    value.parse().map_err(|_| invalid(key, value, "not a valid number"))
}

fn flag(key: &str, value: &str) -> Result<bool, CliError> {
    match value {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(invalid(key, value, "expected true or false")),
    }
}

impl RunConfig {
    /// Sets one key. Dashes in `key` are read as underscores.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        let key = key.replace('-', "_");
        let s = &mut self.study;
        let mut quad = s.quadrature.unwrap_or_else(|| QuadratureDegrees::default_for(s.k));
        match key.as_str() {
            "p" => s.p = num(&key, value)?,
            "delta" => s.delta = num(&key, value)?,
            "alpha" => s.alpha = num(&key, value)?,
            "k" => s.k = num(&key, value)?,
            "model" => s.model = value.parse().map_err(|_| invalid(&key, value, "expected p-stokes or p-navier-stokes"))?,
            "rho" => s.rho = num(&key, value)?,
            "n0" => s.n0 = num(&key, value)?,
            "levels" => s.levels = num(&key, value)?,
            "level" => self.level = num(&key, value)?,
            "quad_volume" => {
                quad.volume = num(&key, value)?;
                s.quadrature = Some(quad);
            }
            "quad_face" => {
                quad.face = num(&key, value)?;
                s.quadrature = Some(quad);
            }
            "tau_abs" => s.newton.tau_abs = num(&key, value)?,
            "tau_rel" => s.newton.tau_rel = num(&key, value)?,
            "max_iter" => s.newton.max_iter = num(&key, value)?,
            "line_search" => s.newton.line_search = flag(&key, value)?,
            "linear" => {
                s.newton.linear = match value {
                    "auto" => LinearStrategy::Auto,
                    "direct" => LinearStrategy::Direct,
                    "krylov" => LinearStrategy::Krylov,
                    _ => return Err(invalid(&key, value, "expected auto, direct or krylov")),
                }
            }
            "krylov_threshold" => s.newton.krylov_threshold = num(&key, value)?,
            "check_jacobian" => s.newton.check_jacobian = flag(&key, value)?,
            "warm_start" => s.warm_start = flag(&key, value)?,
            "seed" => self.seed = num(&key, value)?,
            "samples" => self.samples = num(&key, value)?,
            "table" => self.table = PathBuf::from(value),
            "vtk" => self.vtk = PathBuf::from(value),
            _ => return Err(CliError::Config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    /// Applies a `key = value` file. Blank lines and `#` comments are skipped.
    pub fn apply_str(&mut self, text: &str) -> Result<(), CliError> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("line {}: expected `key = value`, got {raw:?}", i + 1)))?;
            self.set(key.trim(), value.trim())
                .map_err(|e| CliError::Config(format!("line {}: {}", i + 1, e.message())))?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<(), CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))?;
        self.apply_str(&text)
    }

    /// Applies `--key value`, `--key=value` and `key=value` arguments.
    pub fn apply_args<S: AsRef<str>>(&mut self, args: &[S]) -> Result<(), CliError> {
        let mut it = args.iter().map(AsRef::as_ref);
        while let Some(arg) = it.next() {
            if let Some(rest) = arg.strip_prefix("--") {
                match rest.split_once('=') {
                    Some((k, v)) => self.set(k, v)?,
                    None => {
                        let v = it.next().ok_or_else(|| CliError::Config(format!("--{rest} needs a value")))?;
                        self.set(rest, v)?;
                    }
                }
            } else if let Some((k, v)) = arg.split_once('=') {
                self.set(k.trim(), v.trim())?;
            } else {
                return Err(CliError::Config(format!("unexpected argument {arg:?}")));
            }
        }
        Ok(())
    }

    pub fn validate(&self, mode: Mode) -> Result<(), CliError> {
        let s = &self.study;
        if mode == Mode::Study && s.levels < 2 {
            return Err(CliError::Config(format!("levels = {}: a study needs at least 2 levels", s.levels)));
        }
        // The library checks the remaining fields; `levels` only matters for studies.
        let probe = StudyConfig { levels: s.levels.max(2), ..s.clone() };
        probe.validate().map_err(|e| CliError::Config(e.to_string()))?;
        if let Some(q) = s.quadrature {
            if q.volume < 2 * s.k || q.face < 2 * s.k {
                return Err(CliError::Config(format!(
                    "quadrature degrees ({}, {}) are below 2k = {}",
                    q.volume,
                    q.face,
                    2 * s.k
                )));
            }
        }
        if mode == Mode::Check && self.samples < 100 {
            return Err(CliError::Config(format!("samples = {}: at least 100 are required", self.samples)));
        }
        if s.model == Model::PNavierStokes && s.p <= 2.0 {
            eprintln!("warning: p = {} <= 2 with the convective model is outside the convergence theory", s.p);
        }
        Ok(())
    }

    /// One `key = value` line per setting; feeding it back through
    /// [`apply_str`](Self::apply_str) reproduces the configuration.
    pub fn describe(&self) -> String {
        let s = &self.study;
        let q = s.quadrature.unwrap_or_else(|| QuadratureDegrees::default_for(s.k));
        let linear = match s.newton.linear {
            LinearStrategy::Auto => "auto",
            LinearStrategy::Direct => "direct",
            LinearStrategy::Krylov => "krylov",
        };
        let values: Vec<String> = vec![
            s.p.to_string(),
            s.delta.to_string(),
            s.alpha.to_string(),
            s.k.to_string(),
            s.model.to_string(),
            s.rho.to_string(),
            s.n0.to_string(),
            s.levels.to_string(),
            self.level.to_string(),
            q.volume.to_string(),
            q.face.to_string(),
            s.newton.tau_abs.to_string(),
            s.newton.tau_rel.to_string(),
            s.newton.max_iter.to_string(),
            s.newton.line_search.to_string(),
            linear.to_string(),
            s.newton.krylov_threshold.to_string(),
            s.newton.check_jacobian.to_string(),
            s.warm_start.to_string(),
            self.seed.to_string(),
            self.samples.to_string(),
            self.table.display().to_string(),
            self.vtk.display().to_string(),
        ];
        KEYS.iter().zip(values).map(|((k, _), v)| format!("{k} = {v}\n")).collect()
    }
}
