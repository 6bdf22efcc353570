//! Flat `key = value` configuration with command-line overrides.
//!
//! Blank lines and lines starting with `#` are ignored. Lists are comma
//! separated. Points for `verify-burgers` and `determinant-check` are
//! written `re:im:r`.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use ginibre_core::finite_n::QuadratureSpec;
use ginibre_core::Execution;
use serde::Serialize;

use crate::error::{config_err, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Density,
    Petermann,
    Greens,
    Characteristics,
    Edge,
    VerifyBurgers,
    DeterminantCheck,
}

impl Experiment {
    pub const ALL: [Experiment; 7] = [
        Experiment::Density,
        Experiment::Petermann,
        Experiment::Greens,
        Experiment::Characteristics,
        Experiment::Edge,
        Experiment::VerifyBurgers,
        Experiment::DeterminantCheck,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Density => "density",
            Experiment::Petermann => "petermann",
            Experiment::Greens => "greens",
            Experiment::Characteristics => "characteristics",
            Experiment::Edge => "edge",
            Experiment::VerifyBurgers => "verify-burgers",
            Experiment::DeterminantCheck => "determinant-check",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| format!("unknown experiment '{s}'"))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Point {
    pub re: f64,
    pub im: f64,
    pub r: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub n: usize,
    pub tau_grid: Vec<f64>,
    pub num_samples: usize,
    pub master_seed: u64,
    /// Explicit contiguous bin edges; overrides `bin_width` and `r_max`.
    pub bin_edges: Option<Vec<f64>>,
    /// Absolute annulus width; `0.05 √τ` when unset.
    pub bin_width: Option<f64>,
    /// Outer radius of uniform bins; `1.3 √τ` when unset.
    pub r_max: Option<f64>,
    /// Bin centers (petermann), evaluation radii (greens), or the radius of
    /// the characteristics fan (first entry).
    pub abs_z: Vec<f64>,
    /// Multiply `abs_z` by `√τ`.
    pub scale_abs_z: bool,
    /// Equal-area petermann bins with this area in units of `πτ`.
    pub bin_area: Option<f64>,
    pub angles: usize,
    pub tau_max: f64,
    pub xi_grid: Vec<f64>,
    pub points_per_line: usize,
    pub eta_min: f64,
    pub eta_max: f64,
    pub eta_points: usize,
    pub points: Vec<Point>,
    pub fd_step: f64,
    pub quad_rel_tol: f64,
    pub quad_max_subdivisions: usize,
    pub quad_cutoff_widths: f64,
    pub condition_threshold: f64,
    pub sequential: bool,
}

impl ExperimentConfig {
    pub fn defaults(experiment: Experiment) -> Self {
        let q = QuadratureSpec::default();
        let (abs_z, points) = match experiment {
            Experiment::Greens => (vec![0.5, 1.5], Vec::new()),
            Experiment::Characteristics => (vec![1.0], Vec::new()),
            Experiment::VerifyBurgers => (
                Vec::new(),
                vec![Point { re: 1.0, im: 0.0, r: 0.5 }, Point { re: 1.0, im: 0.5, r: 0.5 }],
            ),
            Experiment::DeterminantCheck => (
                Vec::new(),
                vec![
                    Point { re: 1.2, im: 0.0, r: 0.3 },
                    Point { re: 0.0, im: 0.0, r: 0.5 },
                    Point { re: 0.5, im: 0.3, r: 0.2 },
                    Point { re: 0.8, im: -0.6, r: 0.6 },
                    Point { re: 1.5, im: 0.5, r: 1.0 },
                ],
            ),
            _ => (vec![0.0, 0.5, 0.8], Vec::new()),
        };
        let scale = matches!(experiment, Experiment::Greens);
        Self {
            experiment,
            n: match experiment {
                Experiment::VerifyBurgers => 10,
                Experiment::DeterminantCheck => 20,
                Experiment::Edge => 200,
                _ => 100,
            },
            tau_grid: vec![1.0],
            num_samples: 1000,
            master_seed: 1,
            bin_edges: None,
            bin_width: None,
            r_max: None,
            abs_z,
            scale_abs_z: scale,
            bin_area: None,
            angles: 64,
            tau_max: 3.0,
            xi_grid: (0..=30).map(|k| k as f64 * 0.1).collect(),
            points_per_line: 50,
            eta_min: -3.0,
            eta_max: 3.0,
            eta_points: 121,
            points,
            fd_step: 1e-3,
            quad_rel_tol: q.rel_tol,
            quad_max_subdivisions: q.max_subdivisions,
            quad_cutoff_widths: q.cutoff_widths,
            condition_threshold: ginibre_core::spectral::DEFAULT_CONDITION_THRESHOLD,
            sequential: false,
        }
    }

    pub fn quadrature(&self) -> QuadratureSpec {
        QuadratureSpec {
            rel_tol: self.quad_rel_tol,
            max_subdivisions: self.quad_max_subdivisions,
            cutoff_widths: self.quad_cutoff_widths,
        }
    }

    pub fn execution(&self) -> Execution {
        if self.sequential {
            Execution::Sequential
        } else {
            Execution::Parallel
        }
    }

    /// `abs_z` at a given time.
    pub fn radii(&self, tau: f64) -> Vec<f64> {
        let s = if self.scale_abs_z { tau.sqrt() } else { 1.0 };
        self.abs_z.iter().map(|a| a * s).collect()
    }

    /// Reads an optional config file, applies `overrides` on top, and
    /// resolves the experiment (a CLI choice beats the file's).
    pub fn load(path: Option<&Path>, overrides: &[String], cli_experiment: Option<Experiment>) -> Result<Self> {
        let mut raw = BTreeMap::new();
        if let Some(p) = path {
            let text = std::fs::read_to_string(p)
                .map_err(|e| config_err(format!("cannot read {}: {e}", p.display())))?;
            parse_into(&text, &mut raw)?;
        }
        for o in overrides {
            let (k, v) = split_pair(o).ok_or_else(|| config_err(format!("override '{o}' is not key=value")))?;
            raw.insert(k, v);
        }
        let experiment = match (cli_experiment, raw.remove("experiment")) {
            (Some(e), _) => e,
            (None, Some(s)) => s.parse().map_err(config_err)?,
            (None, None) => return Err(config_err("no experiment given")),
        };
        Self::from_pairs(experiment, raw)
    }

    pub fn from_pairs(experiment: Experiment, mut raw: BTreeMap<String, String>) -> Result<Self> {
        let mut c = Self::defaults(experiment);
        raw.remove("experiment");
        if let Some(t) = raw.remove("tau") {
            c.tau_grid = vec![parse(&t, "tau")?];
        }
        if let Some(t) = raw.remove("tau_grid") {
            c.tau_grid = parse_list(&t, "tau_grid")?;
        }
        for (key, value) in raw {
            let v = value.as_str();
            let k = key.as_str();
            match k {
                "n" => c.n = parse(v, k)?,
                "num_samples" => c.num_samples = parse(v, k)?,
                "master_seed" => c.master_seed = parse(v, k)?,
                "bin_edges" => c.bin_edges = Some(parse_list(v, k)?),
                "bin_width" => c.bin_width = Some(parse(v, k)?),
                "r_max" => c.r_max = Some(parse(v, k)?),
                "abs_z" => c.abs_z = parse_list(v, k)?,
                "scale_abs_z" => c.scale_abs_z = parse(v, k)?,
                "bin_area" => c.bin_area = Some(parse(v, k)?),
                "angles" => c.angles = parse(v, k)?,
                "tau_max" => c.tau_max = parse(v, k)?,
                "xi_grid" => c.xi_grid = parse_list(v, k)?,
                "points_per_line" => c.points_per_line = parse(v, k)?,
                "eta_min" => c.eta_min = parse(v, k)?,
                "eta_max" => c.eta_max = parse(v, k)?,
                "eta_points" => c.eta_points = parse(v, k)?,
                "points" => c.points = parse_points(v)?,
                "fd_step" => c.fd_step = parse(v, k)?,
                "quad_rel_tol" => c.quad_rel_tol = parse(v, k)?,
                "quad_max_subdivisions" => c.quad_max_subdivisions = parse(v, k)?,
                "quad_cutoff_widths" => c.quad_cutoff_widths = parse(v, k)?,
                "condition_threshold" => c.condition_threshold = parse(v, k)?,
                "execution" => {
                    c.sequential = match v {
                        "sequential" => true,
                        "parallel" => false,
                        _ => return Err(config_err("execution must be 'parallel' or 'sequential'")),
                    }
                }
                _ => return Err(config_err(format!("unknown key '{k}'"))),
            }
        }
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(config_err(m.to_string()));
        if self.n == 0 {
            return bad("n must be >= 1");
        }
        if self.tau_grid.is_empty() || self.tau_grid.iter().any(|t| !(*t > 0.0 && t.is_finite())) {
            return bad("tau values must be positive");
        }
        if self.num_samples < 2 {
            return bad("num_samples must be >= 2");
        }
        if self.abs_z.iter().any(|a| !(*a >= 0.0)) {
            return bad("abs_z values must be >= 0");
        }
        if matches!(self.bin_width, Some(w) if !(w > 0.0)) || matches!(self.r_max, Some(r) if !(r > 0.0)) {
            return bad("bin_width and r_max must be positive");
        }
        if matches!(self.bin_area, Some(a) if !(a > 0.0)) {
            return bad("bin_area must be positive");
        }
        if self.angles == 0 || self.points_per_line < 2 || self.eta_points < 2 {
            return bad("angles >= 1, points_per_line >= 2 and eta_points >= 2 are required");
        }
        if !(self.eta_max > self.eta_min) || !(self.tau_max > 0.0) || !(self.fd_step > 0.0) {
            return bad("need eta_max > eta_min, tau_max > 0 and fd_step > 0");
        }
        if self.xi_grid.iter().any(|x| !(*x >= 0.0)) {
            return bad("xi_grid values must be >= 0");
        }
        self.quadrature().validate().map_err(|e| config_err(e.to_string()))?;
        Ok(())
    }
}

fn split_pair(line: &str) -> Option<(String, String)> {
    let (k, v) = line.split_once('=')?;
    let k = k.trim();
    if k.is_empty() {
        return None;
    }
    Some((k.to_string(), v.trim().to_string()))
}

pub fn parse_into(text: &str, raw: &mut BTreeMap<String, String>) -> Result<()> {
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = split_pair(line).ok_or_else(|| config_err(format!("line {}: expected key = value", i + 1)))?;
        raw.insert(k, v);
    }
    Ok(())
}

fn parse<T: FromStr>(v: &str, key: &str) -> Result<T> {
    v.trim()
        .parse()
        .map_err(|_| config_err(format!("bad value '{v}' for '{key}'")))
}

fn parse_list(v: &str, key: &str) -> Result<Vec<f64>> {
    v.split(',').filter(|s| !s.trim().is_empty()).map(|s| parse(s, key)).collect()
}

fn parse_points(v: &str) -> Result<Vec<Point>> {
    v.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|item| {
            let parts: Vec<&str> = item.split(':').collect();
            if parts.len() != 3 {
                return Err(config_err(format!("point '{item}' must be re:im:r")));
            }
            Ok(Point {
                re: parse(parts[0], "points")?,
                im: parse(parts[1], "points")?,
                r: parse(parts[2], "points")?,
            })
        })
        .collect()
}
