//! Benchmark objectives and the external-process objective bridge.

use std::f64::consts::PI;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{ObjectiveError, ProcessError};
use crate::process::{exchange_json, CommandSpec};
use crate::space::{Assignment, ParamSpec, SearchSpace};

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(300);

/// A black-box loss over decoded assignments.
pub trait Objective: Send + Sync {
    fn name(&self) -> &str;
    fn space(&self) -> &SearchSpace;
    fn evaluate(&self, params: &Assignment) -> Result<f64, ObjectiveError>;
}

/// Gramacy & Lee (2012) test function on `[0.5, 2.5]`.
pub fn gramacy_lee(x: f64) -> Result<f64, ObjectiveError> {
    if !(0.5..=2.5).contains(&x) {
        return Err(ObjectiveError::OutOfDomain {
            name: "gramacy_lee",
            point: vec![x],
        });
    }
    Ok((10.0 * PI * x).sin() / (2.0 * x) + (x - 1.0).powi(4))
}

/// Griewank-style bowl shifted so the global minimum 0 sits at `(5, -3)`.
pub fn modified_griewank(x: f64, y: f64) -> Result<f64, ObjectiveError> {
    if !((-20.0..=20.0).contains(&x) && (-20.0..=20.0).contains(&y)) {
        return Err(ObjectiveError::OutOfDomain {
            name: "griewank_modified",
            point: vec![x, y],
        });
    }
    let (u, v) = (x - 5.0, y + 3.0);
    Ok((u * u + v * v) / 40.0 - u.cos() * (v / 2f64.sqrt()).cos() + 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Builtin {
    GramacyLee,
    GriewankModified,
}

impl Builtin {
    pub const ALL: [Builtin; 2] = [Builtin::GramacyLee, Builtin::GriewankModified];

    pub fn name(self) -> &'static str {
        match self {
            Builtin::GramacyLee => "gramacy_lee",
            Builtin::GriewankModified => "griewank_modified",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|b| b.name() == name)
    }

    pub fn default_space(self) -> SearchSpace {
        let params = match self {
            Builtin::GramacyLee => vec![ParamSpec::continuous("x", 0.5, 2.5)],
            Builtin::GriewankModified => vec![
                ParamSpec::continuous("x", -20.0, 20.0),
                ParamSpec::continuous("y", -20.0, 20.0),
            ],
        };
        SearchSpace::new(params).expect("built-in spaces are valid")
    }

    /// Global minimum value of the function on its domain.
    pub fn known_minimum(self) -> Option<f64> {
        match self {
            Builtin::GramacyLee => None,
            Builtin::GriewankModified => Some(0.0),
        }
    }
}

fn numeric(params: &Assignment, key: &str) -> Result<f64, ObjectiveError> {
    params
        .get(key)
        .and_then(|v| v.as_f64())
        .ok_or_else(|| ObjectiveError::MissingParam(key.to_string()))
}

#[derive(Debug, Clone)]
pub struct BuiltinObjective {
    kind: Builtin,
    space: SearchSpace,
}

impl BuiltinObjective {
    pub fn new(kind: Builtin) -> Self {
        Self {
            kind,
            space: kind.default_space(),
        }
    }

    /// Uses a caller-provided space; it must declare the parameters the function reads.
    pub fn with_space(kind: Builtin, space: SearchSpace) -> Self {
        Self { kind, space }
    }

    pub fn kind(&self) -> Builtin {
        self.kind
    }
}

impl Objective for BuiltinObjective {
    fn name(&self) -> &str {
        self.kind.name()
    }

    fn space(&self) -> &SearchSpace {
        &self.space
    }

    fn evaluate(&self, params: &Assignment) -> Result<f64, ObjectiveError> {
        match self.kind {
            Builtin::GramacyLee => gramacy_lee(numeric(params, "x")?),
            Builtin::GriewankModified => {
                modified_griewank(numeric(params, "x")?, numeric(params, "y")?)
            }
        }
    }
}

/// Evaluates each assignment by spawning `command` once and exchanging
/// `{"params": {...}}` for `{"loss": <number>}` over stdio.
#[derive(Debug, Clone)]
pub struct ExternalObjective {
    command: CommandSpec,
    space: SearchSpace,
    timeout: Duration,
    name: String,
}

impl ExternalObjective {
    pub fn new(command: CommandSpec, space: SearchSpace) -> Self {
        let name = format!("external:{}", command.display());
        Self {
            command,
            space,
            timeout: DEFAULT_TIMEOUT,
            name,
        }
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }
}

impl Objective for ExternalObjective {
    fn name(&self) -> &str {
        &self.name
    }

    fn space(&self) -> &SearchSpace {
        &self.space
    }

    fn evaluate(&self, params: &Assignment) -> Result<f64, ObjectiveError> {
        let reply = exchange_json(&self.command, &json!({ "params": params }), self.timeout)?;
        reply
            .get("loss")
            .and_then(serde_json::Value::as_f64)
            .ok_or_else(|| {
                ProcessError::Protocol(format!("expected {{\"loss\": number}}, got {reply}")).into()
            })
    }
}
