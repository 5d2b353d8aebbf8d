//! Run configuration: defaults, JSON loading and command-line overrides.

use crate::error::{FluctError, Result};
use crate::exit_toolkit::ExitQuery;
use crate::fluct_solver::Grid;
use crate::levy_model::{LevyModel, ModelKind, ModelSpec};
use crate::monte_carlo::{McSettings, SimConfig};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    /// Renewal grid cells.
    pub n: usize,
    pub x_max: f64,
    /// Spatial cells for the measure-valued march.
    pub spatial_cells: usize,
    /// Rows of closed-form tables.
    pub table_points: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            n: 4096,
            x_max: 20.0,
            spatial_cells: 2048,
            table_points: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct McConfig {
    /// Run Monte Carlo cross-checks inside `validate` and `exit-law`.
    pub enabled: bool,
    pub paths: usize,
    pub seed: u64,
    pub dt: Option<f64>,
    pub horizon: Option<f64>,
    pub bridge: bool,
    /// `P(I < -level)` over the horizon.
    pub ruin_level: Option<f64>,
    /// Exit from `[-b, a]`, given as `[a, b]`.
    pub interval: Option<[f64; 2]>,
    /// Amplitude level of the resolvent functional.
    pub resolvent_x: Option<f64>,
    /// Raw paths written to CSV by `mc`.
    pub export_paths: usize,
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            enabled: false,
            paths: 20_000,
            seed: 1,
            dt: Some(1e-3),
            horizon: None,
            bridge: true,
            ruin_level: None,
            interval: None,
            resolvent_x: None,
            export_paths: 0,
        }
    }
}

impl McConfig {
    pub fn settings(&self) -> McSettings {
        McSettings::new(
            self.paths,
            self.seed,
            SimConfig {
                dt: self.dt,
                horizon: self.horizon,
                bridge: self.bridge,
            },
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub wiener_hopf: f64,
    pub closed_form: f64,
    pub solver: f64,
    pub jump_closed: f64,
    pub jump_solved: f64,
    pub wronskian: f64,
    /// Monte Carlo comparisons, in standard errors.
    pub mc_sigmas: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            wiener_hopf: 1e-10,
            closed_form: 1e-8,
            solver: 1e-3,
            jump_closed: 1e-4,
            jump_solved: 5e-3,
            wronskian: 1e-6,
            mc_sigmas: 3.0,
        }
    }
}

/// Everything a command needs; echoed into every output file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelSpec,
    #[serde(default = "default_q")]
    pub q: Vec<f64>,
    /// `λ` values as `[re, im]`.
    #[serde(default = "default_lambda")]
    pub lambda: Vec<[f64; 2]>,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub mc: McConfig,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub exit: Vec<ExitQuery>,
}

fn default_q() -> Vec<f64> {
    vec![1.0]
}

fn default_lambda() -> Vec<[f64; 2]> {
    vec![[0.0, 0.0], [1.0, 0.0]]
}

impl Default for RunConfig {
    /// Driftless Brownian motion killed at rate 1.
    fn default() -> Self {
        Self {
            model: LevyModel::brownian(1.0, 0.0).expect("valid").to_spec(),
            q: default_q(),
            lambda: default_lambda(),
            grid: GridConfig::default(),
            mc: McConfig::default(),
            tolerances: Tolerances::default(),
            exit: Vec::new(),
        }
    }
}

/// Command-line values that replace configuration fields.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub paths: Option<usize>,
    pub grid_n: Option<usize>,
    pub x_max: Option<f64>,
    pub tol: Option<f64>,
}

fn field(path: &str, msg: impl std::fmt::Display) -> FluctError {
    FluctError::InvalidInput(format!("{path}: {msg}"))
}

impl RunConfig {
    /// Parses JSON, reporting the path of the offending field.
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            field(if path == "." { "config" } else { &path }, e.into_inner())
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(s) = o.seed {
            self.mc.seed = s;
        }
        if let Some(p) = o.paths {
            self.mc.paths = p;
        }
        if let Some(n) = o.grid_n {
            self.grid.n = n;
        }
        if let Some(x) = o.x_max {
            self.grid.x_max = x;
        }
        if let Some(t) = o.tol {
            self.tolerances.solver = t;
        }
    }

    /// Checks field ranges and builds the model.
    pub fn validate(&self) -> Result<LevyModel> {
        let model = LevyModel::from_spec(&self.model).map_err(|e| field("model", e))?;
        if self.q.is_empty() {
            return Err(field("q", "at least one killing rate is needed"));
        }
        for (i, &q) in self.q.iter().enumerate() {
            if !(q >= 0.0 && q.is_finite()) {
                return Err(field(&format!("q[{i}]"), "must be finite and nonnegative"));
            }
            if q > 0.0 && model.kind() == ModelKind::Stable {
                return Err(field(
                    &format!("q[{i}]"),
                    "stable models are supported at q = 0 only",
                ));
            }
        }
        for (i, l) in self.lambda.iter().enumerate() {
            if !l.iter().all(|v| v.is_finite()) {
                return Err(field(&format!("lambda[{i}]"), "must be finite"));
            }
        }
        Grid::nested(self.grid.n, self.grid.x_max).map_err(|e| field("grid", e))?;
        if self.grid.spatial_cells < 4 || self.grid.table_points < 1 {
            return Err(field(
                "grid",
                "spatial_cells ≥ 4 and table_points ≥ 1 are required",
            ));
        }
        if self.mc.paths < 2 {
            return Err(field("mc.paths", "at least two paths are needed"));
        }
        if self.mc.dt.is_some_and(|d| !(d > 0.0)) {
            return Err(field("mc.dt", "must be positive"));
        }
        if self.mc.horizon.is_some_and(|h| !(h > 0.0)) {
            return Err(field("mc.horizon", "must be positive"));
        }
        for (name, t) in [
            ("wiener_hopf", self.tolerances.wiener_hopf),
            ("closed_form", self.tolerances.closed_form),
            ("solver", self.tolerances.solver),
            ("jump_closed", self.tolerances.jump_closed),
            ("jump_solved", self.tolerances.jump_solved),
            ("wronskian", self.tolerances.wronskian),
            ("mc_sigmas", self.tolerances.mc_sigmas),
        ] {
            if !(t > 0.0) {
                return Err(field(&format!("tolerances.{name}"), "must be positive"));
            }
        }
        Ok(model)
    }

    pub fn lambdas(&self) -> Vec<Complex64> {
        self.lambda
            .iter()
            .map(|l| Complex64::new(l[0], l[1]))
            .collect()
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::nested(self.grid.n, self.grid.x_max)
    }
}

/// Output directory from the flag, defaulting to `./out`.
pub fn out_dir(flag: Option<PathBuf>) -> PathBuf {
    flag.unwrap_or_else(|| PathBuf::from("out"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let c = RunConfig::default();
        let back = RunConfig::from_json(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
        c.validate().unwrap();
    }

    #[test]
    fn errors_name_the_field() {
        let bad = r#"{"model": {"kind": "brownian", "sigma2": 1.0}, "grid": {"n": "many"}}"#;
        let msg = RunConfig::from_json(bad).unwrap_err().to_string();
        assert!(msg.contains("grid.n"), "{msg}");
        let unknown = r#"{"model": {"kind": "brownian", "sigma2": 1.0}, "mc": {"pathz": 3}}"#;
        assert!(RunConfig::from_json(unknown)
            .unwrap_err()
            .to_string()
            .contains("mc"));
        let c = RunConfig {
            model: LevyModel::stable(1.0, 0.5).unwrap().to_spec(),
            ..RunConfig::default()
        };
        let msg = c.validate().unwrap_err().to_string();
        assert!(msg.contains("q[0]") && msg.contains("q = 0 only"), "{msg}");
    }

    #[test]
    fn overrides_replace_fields() {
        let mut c = RunConfig::default();
        c.apply(&Overrides {
            seed: Some(9),
            paths: Some(10),
            grid_n: Some(64),
            x_max: Some(5.0),
            tol: Some(1e-2),
        });
        assert_eq!(
            (
                c.mc.seed,
                c.mc.paths,
                c.grid.n,
                c.grid.x_max,
                c.tolerances.solver
            ),
            (9, 10, 64, 5.0, 1e-2)
        );
    }
}
