//! Flat key=value run configuration shared by the CLI subcommands.

use std::path::PathBuf;

use crate::analysis::CondPolicy;
use crate::assembly::Scheme;
use crate::error::ConfigError;
use crate::problem::{example1_case, example2_case, ProblemCase};
use crate::quadrature::EMode;
use crate::solver::CondMode;
use crate::tracer::TraceMethod;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProblemSelector {
    Example1,
    Example2,
}

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub problem: ProblemSelector,
    pub gamma1: f64,
    pub gamma2: f64,
    pub phi: f64,
    pub lambda: f64,
    pub alpha: f64,
    pub eps: Vec<f64>,
    /// cells per half-axis, one (I, J) entry per grid
    pub grids: Vec<(i32, i32)>,
    pub scheme: Scheme,
    pub method: TraceMethod,
    pub e_mode: EMode,
    pub step_factor: f64,
    /// Absolute tracer step; when set it overrides the grid-scaled rule.
    pub trace_step: Option<f64>,
    pub cond: CondPolicy,
    pub output: Option<PathBuf>,
    pub dump_matrix: Option<PathBuf>,
    pub dump_quadrature: bool,
}

impl Default for RunConfig {
    fn default() -> RunConfig {
        RunConfig {
            problem: ProblemSelector::Example1,
            gamma1: 0.5,
            gamma2: 0.5,
            phi: 0.0,
            lambda: 0.1,
            alpha: 1.0,
            eps: vec![1e-6],
            grids: vec![(32, 32)],
            scheme: Scheme::Ap,
            method: TraceMethod::Two,
            e_mode: EMode::TwoSided,
            step_factor: 0.25,
            trace_step: None,
            cond: CondPolicy::Skip,
            output: None,
            dump_matrix: None,
            dump_quadrature: false,
        }
    }
}

fn out_of_range(key: &str, value: &str, range: &str) -> ConfigError {
    ConfigError::OutOfRange {
        key: key.into(),
        value: value.into(),
        range: range.into(),
    }
}

fn parse_f64(key: &str, value: &str) -> Result<f64, ConfigError> {
    value
        .parse()
        .map_err(|_| out_of_range(key, value, "a real number"))
}

impl RunConfig {
    /// Apply one key=value assignment (from a config file line or a CLI
    /// --set flag). Unknown keys are rejected by name.
    pub fn apply(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        match key {
            "problem" => {
                self.problem = match value {
                    "example1" => ProblemSelector::Example1,
                    "example2" => ProblemSelector::Example2,
                    _ => return Err(out_of_range(key, value, "example1|example2")),
                }
            }
            "gamma1" => self.gamma1 = parse_f64(key, value)?,
            "gamma2" => self.gamma2 = parse_f64(key, value)?,
            "phi" => self.phi = parse_f64(key, value)?,
            "lambda" => self.lambda = parse_f64(key, value)?,
            "alpha" => self.alpha = parse_f64(key, value)?,
            "step_factor" => {
                let v = parse_f64(key, value)?;
                if !(v > 0.0 && v <= 1.0) {
                    return Err(out_of_range(key, value, "(0, 1]"));
                }
                self.step_factor = v;
            }
            "trace_step" => {
                let v = parse_f64(key, value)?;
                if !(v > 0.0) {
                    return Err(out_of_range(key, value, "positive length"));
                }
                self.trace_step = Some(v);
            }
            "eps" => {
                let mut list = Vec::new();
                for part in value.split(',') {
                    let e = parse_f64(key, part)?;
                    if !(e > 0.0 && e <= 1.0) {
                        return Err(out_of_range(key, part, "(0, 1]"));
                    }
                    list.push(e);
                }
                if list.is_empty() {
                    return Err(out_of_range(key, value, "non-empty list"));
                }
                self.eps = list;
            }
            "grids" => {
                let mut list = Vec::new();
                for part in value.split(',') {
                    // "32" means 32x32; "64x32" sets I and J separately
                    let (si, sj) = match part.split_once('x') {
                        Some((a, b)) => (a, b),
                        None => (part, part),
                    };
                    let i: i32 = si.parse().map_err(|_| {
                        out_of_range(key, part, "N or IxJ with integers >= 2")
                    })?;
                    let j: i32 = sj.parse().map_err(|_| {
                        out_of_range(key, part, "N or IxJ with integers >= 2")
                    })?;
                    if i < 2 || j < 2 {
                        return Err(out_of_range(key, part, "N or IxJ with integers >= 2"));
                    }
                    list.push((i, j));
                }
                if list.is_empty() {
                    return Err(out_of_range(key, value, "non-empty list"));
                }
                self.grids = list;
            }
            "scheme" => {
                self.scheme = match value {
                    "ap" => Scheme::Ap,
                    "baseline" => Scheme::Baseline,
                    _ => return Err(out_of_range(key, value, "ap|baseline")),
                }
            }
            "method" => {
                self.method = match value {
                    "one" => TraceMethod::One,
                    "two" => TraceMethod::Two,
                    _ => return Err(out_of_range(key, value, "one|two")),
                }
            }
            "e_mode" => {
                self.e_mode = match value {
                    "two_sided" => EMode::TwoSided,
                    "single_exp" => EMode::SingleExp,
                    _ => return Err(out_of_range(key, value, "two_sided|single_exp")),
                }
            }
            "cond" => {
                self.cond = match value {
                    "skip" => CondPolicy::Skip,
                    "auto" => CondPolicy::Auto,
                    "dense" => CondPolicy::Force(CondMode::Dense),
                    "iterative" => CondPolicy::Force(CondMode::Iterative),
                    _ => return Err(out_of_range(key, value, "skip|auto|dense|iterative")),
                }
            }
            "output" => self.output = Some(PathBuf::from(value)),
            _ => return Err(ConfigError::UnknownKey(key.to_string())),
        }
        Ok(())
    }

    /// Parse a config file: one key=value per line, '#' comments, blank
    /// lines ignored.
    pub fn apply_file(&mut self, text: &str) -> Result<(), ConfigError> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                ConfigError::Invalid(format!("line {}: expected key=value", lineno + 1))
            })?;
            self.apply(key.trim(), value.trim())?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        // surfaces parameter errors (gamma ranges, lambda != 0) early
        self.build_problem(self.eps[0]).map(|_| ())
    }

    pub fn build_problem(&self, eps: f64) -> Result<ProblemCase, ConfigError> {
        match self.problem {
            ProblemSelector::Example1 => {
                example1_case(self.gamma1, self.gamma2, self.phi, eps, self.alpha)
            }
            ProblemSelector::Example2 => example2_case(self.lambda, eps, self.alpha),
        }
    }

    pub fn label(&self) -> String {
        match self.problem {
            ProblemSelector::Example1 => format!(
                "example1_g1={}_g2={}_phi={}",
                self.gamma1, self.gamma2, self.phi
            ),
            ProblemSelector::Example2 => format!("example2_lambda={}", self.lambda),
        }
    }
}
