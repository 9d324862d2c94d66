//! Flat `key = value` run configuration.
//!
//! Lines starting with `#` (and anything after a `#`) are ignored. Later
//! assignments override earlier ones, so `--set` pairs appended after a
//! file win. Unset keys fall back to the chosen initial-data preset and
//! the standard parameter set.

use std::collections::BTreeMap;
use std::path::PathBuf;

use kwc_core::analysis::{InitialData, StudyConfig};
use kwc_core::{Field, GridSpec, Mobility, ModelParams, Preset, ThetaMethod, ThetaSolveConfig};
use thiserror::Error;

use crate::expr::Expr;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("{key}: {msg}")]
    Value { key: String, msg: String },
    #[error("{0}")]
    Invalid(String),
}

fn bad(key: &str, msg: impl Into<String>) -> ConfigError {
    ConfigError::Value {
        key: key.to_string(),
        msg: msg.into(),
    }
}

/// Every key the parser accepts.
pub const KEYS: &[&str] = &[
    "params.eps",
    "params.delta0",
    "params.c",
    "params.kappa0",
    "params.kappa",
    "params.nu",
    "grid.K",
    "grid.dt",
    "grid.N",
    "ic",
    "ic.eta",
    "ic.theta",
    "ic.eta_values",
    "ic.theta_values",
    "mobility.alpha0",
    "mobility.lipschitz",
    "solver.method",
    "solver.tol_abs",
    "solver.max_iter",
    "solver.strict_exist",
    "output.dir",
    "output.stride",
    "bounds.c1",
    "converge.levels",
    "converge.floor",
    "converge.dt_per_dx",
    "converge.horizon",
    "converge.reference_factor",
];

/// Splits config text into `(key, value)` pairs in file order.
pub fn parse_pairs(text: &str) -> Result<Vec<(String, String)>, ConfigError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = split_assignment(line).map_err(|msg| ConfigError::Syntax { line: i + 1, msg })?;
        out.push((k, v));
    }
    Ok(out)
}

/// Parses a single `key=value` assignment.
pub fn split_assignment(s: &str) -> Result<(String, String), String> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| format!("expected `key = value`, got `{s}`"))?;
    let k = k.trim();
    if k.is_empty() {
        return Err(format!("missing key in `{s}`"));
    }
    Ok((k.to_string(), v.trim().to_string()))
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitialCondition {
    Preset(Preset),
    /// Profiles given as expressions in `x`.
    Expr { eta: Expr, theta: Expr },
    /// Nodal values at `x_k`, `k = 0..=K`.
    Table { eta: Vec<f64>, theta: Vec<f64> },
}

impl InitialCondition {
    pub fn fields(&self, grid: &GridSpec) -> Result<(Field, Field), ConfigError> {
        let wrap = |e: kwc_core::Error| ConfigError::Invalid(format!("initial data: {e}"));
        match self {
            InitialCondition::Preset(p) => p.initial(grid).map_err(wrap),
            InitialCondition::Expr { eta, theta } => Ok((
                Field::from_fn(grid, |x| eta.eval(0.0, x)).map_err(wrap)?,
                Field::from_fn(grid, |x| theta.eval(0.0, x)).map_err(wrap)?,
            )),
            InitialCondition::Table { eta, theta } => {
                for (name, v) in [("ic.eta_values", eta), ("ic.theta_values", theta)] {
                    if v.len() != grid.k() + 1 {
                        return Err(bad(name, format!("{} values given, K + 1 = {} expected", v.len(), grid.k() + 1)));
                    }
                }
                Ok((
                    Field::from_interior(eta).map_err(wrap)?,
                    Field::from_interior(theta).map_err(wrap)?,
                ))
            }
        }
    }

    /// Grid-independent profiles; `None` for tabulated data.
    pub fn profiles(&self) -> Option<InitialData> {
        match self {
            InitialCondition::Preset(p) => Some(InitialData::from_preset(*p)),
            InitialCondition::Expr { eta, theta } => {
                let (e, t) = (eta.clone(), theta.clone());
                Some(InitialData::new(move |x| e.eval(0.0, x), move |x| t.eval(0.0, x)))
            }
            InitialCondition::Table { .. } => None,
        }
    }

    pub fn label(&self) -> String {
        match self {
            InitialCondition::Preset(p) => p.to_string(),
            InitialCondition::Expr { .. } => "expr".into(),
            InitialCondition::Table { .. } => "table".into(),
        }
    }
}

/// `alpha0(t, x)`; `None` means the constant `delta0`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MobilitySpec {
    pub alpha0: Option<Expr>,
    pub lipschitz: Option<f64>,
}

impl MobilitySpec {
    /// Samples the expression over `[0, t_max] x [0, 1]`.
    pub fn build(&self, params: &ModelParams, t_max: f64) -> Result<Mobility, ConfigError> {
        let wrap = |e: kwc_core::Error| bad("mobility.alpha0", e.to_string());
        let m = match &self.alpha0 {
            None => Mobility::default_for(params),
            Some(e) => match e.as_constant() {
                Some(c) if self.lipschitz.unwrap_or(0.0) == 0.0 => Mobility::constant(c).map_err(wrap)?,
                _ => {
                    let e = e.clone();
                    Mobility::from_fn(move |t, x| e.eval(t, x), self.lipschitz, t_max).map_err(wrap)?
                }
            },
        };
        m.check_against(params).map_err(wrap)?;
        Ok(m)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputSpec {
    pub dir: PathBuf,
    /// Snapshots are written every `stride` steps and at the last step.
    pub stride: usize,
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("kwc-out"),
            stride: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergeSpec {
    pub study: StudyConfig,
    /// Smallest acceptable fitted order.
    pub floor: f64,
}

impl Default for ConvergeSpec {
    fn default() -> Self {
        Self {
            study: StudyConfig::default(),
            floor: 0.9,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub params: ModelParams,
    pub grid: GridSpec,
    pub ic: InitialCondition,
    pub mobility: MobilitySpec,
    pub solver: ThetaSolveConfig,
    pub output: OutputSpec,
    /// `C1` of the error bound; defaults to `max(1, max |H0|)`.
    pub c1: Option<f64>,
    pub converge: ConvergeSpec,
}

struct Keys(BTreeMap<String, String>);

impl Keys {
    fn raw(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(String::as_str)
    }

    fn parse<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>, ConfigError>
    where
        T::Err: std::fmt::Display,
    {
        self.raw(key)
            .map(|v| v.parse::<T>().map_err(|e| bad(key, format!("`{v}`: {e}"))))
            .transpose()
    }

    fn f64_or(&self, key: &str, default: f64) -> Result<f64, ConfigError> {
        Ok(self.parse::<f64>(key)?.unwrap_or(default))
    }

    fn bool(&self, key: &str) -> Result<Option<bool>, ConfigError> {
        self.raw(key)
            .map(|v| match v.to_ascii_lowercase().as_str() {
                "true" | "yes" | "on" | "1" => Ok(true),
                "false" | "no" | "off" | "0" => Ok(false),
                _ => Err(bad(key, format!("`{v}` is not a boolean"))),
            })
            .transpose()
    }

    fn list<T: std::str::FromStr>(&self, key: &str) -> Result<Option<Vec<T>>, ConfigError>
    where
        T::Err: std::fmt::Display,
    {
        self.raw(key)
            .map(|v| {
                v.split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(|s| s.parse::<T>().map_err(|e| bad(key, format!("`{s}`: {e}"))))
                    .collect()
            })
            .transpose()
    }

    fn expr(&self, key: &str) -> Result<Option<Expr>, ConfigError> {
        self.raw(key)
            .map(|v| Expr::parse(v).map_err(|e| bad(key, e.to_string())))
            .transpose()
    }
}

impl RunConfig {
    pub fn from_text(text: &str, default_preset: Preset) -> Result<Self, ConfigError> {
        Self::from_pairs(&parse_pairs(text)?, default_preset)
    }

    /// Builds a config; `default_preset` applies when `ic` is unset.
    pub fn from_pairs(pairs: &[(String, String)], default_preset: Preset) -> Result<Self, ConfigError> {
        let mut map = BTreeMap::new();
        for (k, v) in pairs {
            if !KEYS.contains(&k.as_str()) {
                return Err(ConfigError::UnknownKey(k.clone()));
            }
            map.insert(k.clone(), v.clone());
        }
        let keys = Keys(map);

        let std = ModelParams::standard();
        let params = ModelParams::new(
            keys.f64_or("params.eps", std.eps)?,
            keys.f64_or("params.delta0", std.delta0)?,
            keys.f64_or("params.c", std.c)?,
            keys.f64_or("params.kappa0", std.kappa0)?,
            keys.f64_or("params.kappa", std.kappa)?,
            keys.f64_or("params.nu", std.nu)?,
        )
        .map_err(|e| ConfigError::Invalid(e.to_string()))?;

        let ic_kind = keys.raw("ic").unwrap_or("").to_ascii_lowercase();
        let ic = match ic_kind.as_str() {
            "" => InitialCondition::Preset(default_preset),
            "expr" => InitialCondition::Expr {
                eta: keys.expr("ic.eta")?.ok_or_else(|| bad("ic.eta", "required when ic = expr"))?,
                theta: keys.expr("ic.theta")?.ok_or_else(|| bad("ic.theta", "required when ic = expr"))?,
            },
            "table" => InitialCondition::Table {
                eta: keys.list("ic.eta_values")?.ok_or_else(|| bad("ic.eta_values", "required when ic = table"))?,
                theta: keys
                    .list("ic.theta_values")?
                    .ok_or_else(|| bad("ic.theta_values", "required when ic = table"))?,
            },
            other => InitialCondition::Preset(other.parse::<Preset>().map_err(|e| bad("ic", e))?),
        };
        let unused: &[&str] = match ic {
            InitialCondition::Expr { .. } => &["ic.eta_values", "ic.theta_values"],
            InitialCondition::Table { .. } => &["ic.eta", "ic.theta"],
            InitialCondition::Preset(_) => &["ic.eta", "ic.theta", "ic.eta_values", "ic.theta_values"],
        };
        if let Some(k) = unused.iter().find(|k| keys.raw(k).is_some()) {
            return Err(bad(k, format!("not used with ic = {}", ic.label())));
        }

        let base = match ic {
            InitialCondition::Preset(p) => p.grid(),
            _ => Preset::Example1.grid(),
        };
        let default_k = match &ic {
            InitialCondition::Table { eta, .. } if !eta.is_empty() => eta.len() - 1,
            _ => base.k(),
        };
        let grid = GridSpec::new(
            keys.parse("grid.K")?.unwrap_or(default_k),
            keys.f64_or("grid.dt", base.dt())?,
            keys.parse("grid.N")?.unwrap_or(base.steps()),
        )
        .map_err(|e| ConfigError::Invalid(e.to_string()))?;

        let mobility = MobilitySpec {
            alpha0: keys.expr("mobility.alpha0")?,
            lipschitz: keys.parse("mobility.lipschitz")?,
        };

        let mut solver = ThetaSolveConfig::default();
        if let Some(m) = keys.parse::<ThetaMethod>("solver.method")? {
            solver.method = m;
        }
        solver.tol_abs = keys.f64_or("solver.tol_abs", solver.tol_abs)?;
        solver.max_iter = keys.parse("solver.max_iter")?.unwrap_or(solver.max_iter);
        if let Some(strict) = keys.bool("solver.strict_exist")? {
            solver.warn_only_on_exist_cond = !strict;
        }
        solver.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;

        let mut output = OutputSpec::default();
        if let Some(d) = keys.raw("output.dir") {
            output.dir = PathBuf::from(d);
        }
        output.stride = keys.parse("output.stride")?.unwrap_or(output.stride);
        if output.stride == 0 {
            return Err(bad("output.stride", "must be >= 1"));
        }

        let c1 = keys.parse::<f64>("bounds.c1")?;

        let mut converge = ConvergeSpec::default();
        let study = &mut converge.study;
        if let Some(l) = keys.list("converge.levels")? {
            study.levels = l;
        }
        study.dt_per_dx = keys.f64_or("converge.dt_per_dx", study.dt_per_dx)?;
        study.horizon = keys.f64_or("converge.horizon", study.horizon)?;
        study.reference_factor = keys.parse("converge.reference_factor")?.unwrap_or(study.reference_factor);
        study.solver = solver;
        converge.floor = keys.f64_or("converge.floor", converge.floor)?;
        if !converge.floor.is_finite() {
            return Err(bad("converge.floor", "must be finite"));
        }

        Ok(Self {
            params,
            grid,
            ic,
            mobility,
            solver,
            output,
            c1,
            converge,
        })
    }

    /// The mobility over the run horizon.
    pub fn build_mobility(&self) -> Result<Mobility, ConfigError> {
        self.mobility.build(&self.params, self.grid.horizon())
    }
}
