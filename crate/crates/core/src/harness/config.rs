use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use crate::amr::AmrConfig;
use crate::error::{Error, Result};
use crate::model::{parameter_set, Constant, ModelParams};

pub const ENV_PREFIX: &str = "INVADAPT_";

/// Diameter of the level-9 refinement of the n = 4 root, the resolution of the
/// default reference solution.
pub const DESK_H_MIN: f64 = 0.05412658773652741;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Experiment {
    Uniform,
    Adaptive,
    /// Uniform and adaptive studies against one shared reference.
    Compare,
    MmsSpatial,
    MmsTemporal,
}

impl Experiment {
    pub fn as_str(&self) -> &'static str {
        match self {
            Experiment::Uniform => "uniform",
            Experiment::Adaptive => "adaptive",
            Experiment::Compare => "compare",
            Experiment::MmsSpatial => "mms-spatial",
            Experiment::MmsTemporal => "mms-temporal",
        }
    }
}

impl FromStr for Experiment {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "uniform" => Experiment::Uniform,
            "adaptive" => Experiment::Adaptive,
            "compare" => Experiment::Compare,
            "mms-spatial" => Experiment::MmsSpatial,
            "mms-temporal" => Experiment::MmsTemporal,
            _ => return Err(Error::Config(format!("unknown experiment `{s}`"))),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ErrorNorm {
    /// L2 norm of the u component.
    U,
    /// L2 norm over all three components.
    Composite,
}

impl FromStr for ErrorNorm {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "u" => Ok(ErrorNorm::U),
            "composite" => Ok(ErrorNorm::Composite),
            _ => Err(Error::Config(format!("unknown error norm `{s}` (expected u or composite)"))),
        }
    }
}

impl fmt::Display for ErrorNorm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ErrorNorm::U => "u",
            ErrorNorm::Composite => "composite",
        })
    }
}

/// Optional replacements for entries of the selected parameter set.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamOverrides {
    pub d1: Option<f64>,
    pub d2: Option<f64>,
    pub chi: Option<f64>,
    pub lambda: Option<f64>,
    pub rho: Option<f64>,
    pub eta: Option<f64>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub eps: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub experiment: Experiment,
    pub parameter_set: u32,
    pub overrides: ParamOverrides,
    pub case: String,
    pub root_n: usize,
    /// Uniform bisection levels of the root for uniform and MMS studies.
    pub levels: Vec<usize>,
    pub reference_level: usize,
    /// Starting level of adaptive runs.
    pub base_level: usize,
    pub tau: f64,
    /// Step sizes of the temporal study.
    pub taus: Vec<f64>,
    pub t_final: f64,
    pub amr: AmrConfig,
    /// One adaptive run per entry; empty means a single run with `amr.tol_x`.
    pub tol_ladder: Vec<f64>,
    /// One adaptive run per entry, as node caps; overrides `tol_ladder`.
    pub dofs_ladder: Vec<usize>,
    pub error_norm: ErrorNorm,
    pub output_dir: PathBuf,
    pub write_vtu: bool,
    /// Write every k-th adaptive step as VTU (0 writes only the last).
    pub vtu_every: usize,
    pub threads: usize,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            experiment: Experiment::Adaptive,
            parameter_set: 1,
            overrides: ParamOverrides::default(),
            case: "A".into(),
            root_n: 4,
            levels: vec![3, 4, 5, 6],
            reference_level: 9,
            base_level: 3,
            tau: 0.01,
            taus: vec![0.04, 0.02, 0.01],
            t_final: 1.0,
            amr: AmrConfig {
                min_level: 3,
                h_min: DESK_H_MIN,
                ..AmrConfig::default()
            },
            tol_ladder: Vec::new(),
            dofs_ladder: Vec::new(),
            error_norm: ErrorNorm::U,
            output_dir: PathBuf::from("out"),
            write_vtu: false,
            vtu_every: 0,
            threads: 0,
            seed: 0,
        }
    }
}

fn parse_value<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| Error::Config(format!("invalid value `{v}` for `{key}`")))
}

fn parse_list<T: FromStr>(key: &str, v: &str) -> Result<Vec<T>> {
    if v.trim().is_empty() {
        return Ok(Vec::new());
    }
    v.split(',').map(|x| parse_value(key, x.trim())).collect()
}

fn parse_opt<T: FromStr>(key: &str, v: &str) -> Result<Option<T>> {
    if v == "none" {
        Ok(None)
    } else {
        parse_value(key, v).map(Some)
    }
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(Error::Config(format!("invalid boolean `{v}` for `{key}`"))),
    }
}

fn join<T: fmt::Debug>(xs: &[T]) -> String {
    xs.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(",")
}

fn opt<T: fmt::Debug>(x: &Option<T>) -> String {
    x.as_ref().map_or("none".to_string(), |v| format!("{v:?}"))
}

/// Every accepted key, in print order.
pub const KEYS: &[&str] = &[
    "experiment",
    "parameter_set",
    "d1",
    "d2",
    "chi",
    "lambda",
    "rho",
    "eta",
    "alpha",
    "beta",
    "eps",
    "case",
    "root_n",
    "levels",
    "reference_level",
    "base_level",
    "tau",
    "taus",
    "t_final",
    "tol_x",
    "bulk_theta",
    "coarsen_fraction",
    "max_refine_loops",
    "initial_refine_loops",
    "first_step_initial_term",
    "h_min",
    "max_dofs",
    "coarsen",
    "min_level",
    "tol_ladder",
    "dofs_ladder",
    "error_norm",
    "output_dir",
    "write_vtu",
    "vtu_every",
    "threads",
    "seed",
];

impl RunConfig {
    /// Set one key from its textual value.
    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        let v = v.trim();
        let o = &mut self.overrides;
        match key {
            "experiment" => self.experiment = v.parse()?,
            "parameter_set" => self.parameter_set = parse_value(key, v)?,
            "d1" => o.d1 = parse_opt(key, v)?,
            "d2" => o.d2 = parse_opt(key, v)?,
            "chi" => o.chi = parse_opt(key, v)?,
            "lambda" => o.lambda = parse_opt(key, v)?,
            "rho" => o.rho = parse_opt(key, v)?,
            "eta" => o.eta = parse_opt(key, v)?,
            "alpha" => o.alpha = parse_opt(key, v)?,
            "beta" => o.beta = parse_opt(key, v)?,
            "eps" => o.eps = parse_opt(key, v)?,
            "case" => self.case = v.to_string(),
            "root_n" => self.root_n = parse_value(key, v)?,
            "levels" => self.levels = parse_list(key, v)?,
            "reference_level" => self.reference_level = parse_value(key, v)?,
            "base_level" => self.base_level = parse_value(key, v)?,
            "tau" => self.tau = parse_value(key, v)?,
            "taus" => self.taus = parse_list(key, v)?,
            "t_final" => self.t_final = parse_value(key, v)?,
            "tol_x" => self.amr.tol_x = parse_value(key, v)?,
            "bulk_theta" => self.amr.bulk_theta = parse_value(key, v)?,
            "coarsen_fraction" => self.amr.coarsen_fraction = parse_value(key, v)?,
            "max_refine_loops" => self.amr.max_refine_loops_per_step = parse_value(key, v)?,
            "initial_refine_loops" => self.amr.initial_refine_loops = parse_value(key, v)?,
            "first_step_initial_term" => self.amr.first_step_initial_term = parse_bool(key, v)?,
            "h_min" => self.amr.h_min = parse_value(key, v)?,
            "max_dofs" => self.amr.max_dofs = parse_opt(key, v)?,
            "coarsen" => self.amr.coarsen = parse_bool(key, v)?,
            "min_level" => self.amr.min_level = parse_value(key, v)?,
            "tol_ladder" => self.tol_ladder = parse_list(key, v)?,
            "dofs_ladder" => self.dofs_ladder = parse_list(key, v)?,
            "error_norm" => self.error_norm = v.parse()?,
            "output_dir" => self.output_dir = PathBuf::from(v),
            "write_vtu" => self.write_vtu = parse_bool(key, v)?,
            "vtu_every" => self.vtu_every = parse_value(key, v)?,
            "threads" => self.threads = parse_value(key, v)?,
            "seed" => self.seed = parse_value(key, v)?,
            _ => return Err(Error::Config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    /// Parse `key = value` lines; `#` starts a comment. Keys not given keep
    /// their defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut c = RunConfig::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", i + 1)))?;
            c.set(k.trim(), v).map_err(|e| match e {
                Error::Config(m) => Error::Config(format!("line {}: {m}", i + 1)),
                e => e,
            })?;
        }
        c.validate()?;
        Ok(c)
    }

    /// Apply `INVADAPT_<KEY>` overrides from an environment-like list.
    pub fn apply_env<I, K, V>(&mut self, vars: I) -> Result<()>
    where
        I: IntoIterator<Item = (K, V)>,
        K: AsRef<str>,
        V: AsRef<str>,
    {
        for (k, v) in vars {
            if let Some(key) = k.as_ref().strip_prefix(ENV_PREFIX) {
                self.set(&key.to_ascii_lowercase(), v.as_ref())
                    .map_err(|e| Error::Config(format!("{}: {e}", k.as_ref())))?;
            }
        }
        self.validate()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(1..=2).contains(&self.parameter_set) {
            return bad(format!("parameter_set must be 1 or 2, got {}", self.parameter_set));
        }
        if self.root_n == 0 {
            return bad("root_n must be positive".into());
        }
        if !(self.tau > 0.0) || !(self.t_final > 0.0) {
            return bad("tau and t_final must be positive".into());
        }
        if self.taus.iter().any(|t| !(*t > 0.0)) {
            return bad("taus must be positive".into());
        }
        if matches!(self.experiment, Experiment::Uniform | Experiment::Compare | Experiment::MmsSpatial) && self.levels.is_empty() {
            return bad("levels must not be empty".into());
        }
        if matches!(self.experiment, Experiment::Uniform | Experiment::Adaptive | Experiment::Compare)
            && self.levels.iter().chain([&self.base_level]).any(|&l| l > self.reference_level)
        {
            return bad("levels and base_level must not exceed reference_level".into());
        }
        self.amr.validate()
    }

    pub fn params(&self) -> Result<ModelParams> {
        let mut p = parameter_set(self.parameter_set)?;
        let o = &self.overrides;
        if let Some(x) = o.d1 {
            p = p.with_d1(Constant(x));
        }
        if let Some(x) = o.chi {
            p = p.with_chi(Constant(x));
        }
        for (slot, val) in [
            (&mut p.d2, o.d2),
            (&mut p.lambda, o.lambda),
            (&mut p.rho, o.rho),
            (&mut p.eta, o.eta),
            (&mut p.alpha, o.alpha),
            (&mut p.beta, o.beta),
            (&mut p.eps_ic, o.eps),
        ] {
            if let Some(x) = val {
                *slot = x;
            }
        }
        p.validate()?;
        Ok(p)
    }

    fn value(&self, key: &str) -> String {
        let o = &self.overrides;
        match key {
            "experiment" => self.experiment.as_str().into(),
            "parameter_set" => self.parameter_set.to_string(),
            "d1" => opt(&o.d1),
            "d2" => opt(&o.d2),
            "chi" => opt(&o.chi),
            "lambda" => opt(&o.lambda),
            "rho" => opt(&o.rho),
            "eta" => opt(&o.eta),
            "alpha" => opt(&o.alpha),
            "beta" => opt(&o.beta),
            "eps" => opt(&o.eps),
            "case" => self.case.clone(),
            "root_n" => self.root_n.to_string(),
            "levels" => join(&self.levels),
            "reference_level" => self.reference_level.to_string(),
            "base_level" => self.base_level.to_string(),
            "tau" => format!("{:?}", self.tau),
            "taus" => join(&self.taus),
            "t_final" => format!("{:?}", self.t_final),
            "tol_x" => format!("{:?}", self.amr.tol_x),
            "bulk_theta" => format!("{:?}", self.amr.bulk_theta),
            "coarsen_fraction" => format!("{:?}", self.amr.coarsen_fraction),
            "max_refine_loops" => self.amr.max_refine_loops_per_step.to_string(),
            "initial_refine_loops" => self.amr.initial_refine_loops.to_string(),
            "first_step_initial_term" => self.amr.first_step_initial_term.to_string(),
            "h_min" => format!("{:?}", self.amr.h_min),
            "max_dofs" => opt(&self.amr.max_dofs),
            "coarsen" => self.amr.coarsen.to_string(),
            "min_level" => self.amr.min_level.to_string(),
            "tol_ladder" => join(&self.tol_ladder),
            "dofs_ladder" => join(&self.dofs_ladder),
            "error_norm" => self.error_norm.to_string(),
            "output_dir" => self.output_dir.display().to_string(),
            "write_vtu" => self.write_vtu.to_string(),
            "vtu_every" => self.vtu_every.to_string(),
            "threads" => self.threads.to_string(),
            "seed" => self.seed.to_string(),
            _ => unreachable!("unknown key {key}"),
        }
    }
}

impl fmt::Display for RunConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for k in KEYS {
            writeln!(f, "{k} = {}", self.value(k))?;
        }
        Ok(())
    }
}
