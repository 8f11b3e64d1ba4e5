//! Mixed-type search spaces and the encoding into a bounded real box.
//!
//! Every parameter occupies one coordinate of the encoded vector:
//!
//! - continuous parameters map to their raw value, or `log10(value)` on a log scale,
//! - integer parameters map to the value as a real,
//! - categorical parameters map to the 0-based index of the label.
//!
//! Decoding rounds integer and categorical coordinates to the nearest index
//! (half away from zero) and clamps everything into range, so every real
//! vector decodes to a valid assignment.

use std::collections::HashSet;
use std::fmt;

use indexmap::IndexMap;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::SpaceError;

/// A decoded parameter value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Int(i64),
    Real(f64),
    Label(String),
}

impl ParamValue {
    pub fn as_f64(&self) -> Option<f64> {
        match *self {
            ParamValue::Int(v) => Some(v as f64),
            ParamValue::Real(v) => Some(v),
            ParamValue::Label(_) => None,
        }
    }
}

impl fmt::Display for ParamValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamValue::Int(v) => write!(f, "{v}"),
            ParamValue::Real(v) => write!(f, "{v}"),
            ParamValue::Label(s) => f.write_str(s),
        }
    }
}

/// Name to value map in declaration order.
pub type Assignment = IndexMap<String, ParamValue>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ParamKind {
    Continuous {
        lo: f64,
        hi: f64,
        #[serde(default, skip_serializing_if = "std::ops::Not::not")]
        log: bool,
    },
    Integer {
        lo: i64,
        hi: i64,
    },
    Categorical {
        choices: Vec<String>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSpec {
    pub name: String,
    #[serde(flatten)]
    pub kind: ParamKind,
}

impl ParamSpec {
    pub fn continuous(name: impl Into<String>, lo: f64, hi: f64) -> Self {
        Self {
            name: name.into(),
            kind: ParamKind::Continuous { lo, hi, log: false },
        }
    }

    pub fn log_continuous(name: impl Into<String>, lo: f64, hi: f64) -> Self {
        Self {
            name: name.into(),
            kind: ParamKind::Continuous { lo, hi, log: true },
        }
    }

    pub fn integer(name: impl Into<String>, lo: i64, hi: i64) -> Self {
        Self {
            name: name.into(),
            kind: ParamKind::Integer { lo, hi },
        }
    }

    pub fn categorical<S: Into<String>>(
        name: impl Into<String>,
        choices: impl IntoIterator<Item = S>,
    ) -> Self {
        Self {
            name: name.into(),
            kind: ParamKind::Categorical {
                choices: choices.into_iter().map(Into::into).collect(),
            },
        }
    }

    fn validate(&self) -> Result<(), SpaceError> {
        let invalid = |reason: &str| SpaceError::InvalidParam {
            name: self.name.clone(),
            reason: reason.to_string(),
        };
        match &self.kind {
            ParamKind::Continuous { lo, hi, log } => {
                if !(lo.is_finite() && hi.is_finite()) {
                    return Err(invalid("bounds must be finite"));
                }
                if lo >= hi {
                    return Err(invalid("lo must be < hi"));
                }
                if *log && *lo <= 0.0 {
                    return Err(invalid("log-scale bounds must be positive"));
                }
            }
            ParamKind::Integer { lo, hi } => {
                if lo > hi {
                    return Err(invalid("lo must be <= hi"));
                }
            }
            ParamKind::Categorical { choices } => {
                if choices.is_empty() {
                    return Err(invalid("choices must be non-empty"));
                }
                let mut seen = HashSet::new();
                if !choices.iter().all(|c| seen.insert(c.as_str())) {
                    return Err(invalid("choices must be unique"));
                }
            }
        }
        Ok(())
    }

    /// Bounds of this parameter's coordinate in the encoded box.
    pub fn encoded_bounds(&self) -> (f64, f64) {
        match &self.kind {
            ParamKind::Continuous { lo, hi, log: false } => (*lo, *hi),
            ParamKind::Continuous { lo, hi, log: true } => (lo.log10(), hi.log10()),
            ParamKind::Integer { lo, hi } => (*lo as f64, *hi as f64),
            ParamKind::Categorical { choices } => (0.0, (choices.len() - 1) as f64),
        }
    }

    fn encode_value(&self, value: &ParamValue) -> Result<f64, SpaceError> {
        let out_of_domain = || SpaceError::OutOfDomain {
            name: self.name.clone(),
            value: value.to_string(),
        };
        match &self.kind {
            ParamKind::Continuous { lo, hi, log } => {
                let v = value.as_f64().ok_or_else(out_of_domain)?;
                if !(v >= *lo && v <= *hi) {
                    return Err(out_of_domain());
                }
                Ok(if *log { v.log10() } else { v })
            }
            ParamKind::Integer { lo, hi } => {
                let v = match *value {
                    ParamValue::Int(v) => v,
                    ParamValue::Real(r) if r.fract() == 0.0 && r.is_finite() => r as i64,
                    _ => return Err(out_of_domain()),
                };
                if v < *lo || v > *hi {
                    return Err(out_of_domain());
                }
                Ok(v as f64)
            }
            ParamKind::Categorical { choices } => {
                let ParamValue::Label(label) = value else {
                    return Err(out_of_domain());
                };
                choices
                    .iter()
                    .position(|c| c == label)
                    .map(|i| i as f64)
                    .ok_or_else(out_of_domain)
            }
        }
    }

    fn decode_coordinate(&self, x: f64) -> ParamValue {
        let (lo, hi) = self.encoded_bounds();
        match &self.kind {
            ParamKind::Continuous { lo: rlo, hi: rhi, log } => {
                let c = clamp_nan(x, lo, hi);
                if *log {
                    ParamValue::Real(10f64.powf(c).clamp(*rlo, *rhi))
                } else {
                    ParamValue::Real(c)
                }
            }
            ParamKind::Integer { .. } => ParamValue::Int(clamp_nan(x.round(), lo, hi) as i64),
            ParamKind::Categorical { choices } => {
                let idx = clamp_nan(x.round(), lo, hi) as usize;
                ParamValue::Label(choices[idx].clone())
            }
        }
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let (lo, hi) = self.encoded_bounds();
        match &self.kind {
            ParamKind::Continuous { .. } => lo + (hi - lo) * rng.random::<f64>(),
            ParamKind::Integer { lo, hi } => rng.random_range(*lo..=*hi) as f64,
            ParamKind::Categorical { choices } => rng.random_range(0..choices.len()) as f64,
        }
    }
}

/// NaN maps to `lo` so that decoding stays total.
fn clamp_nan(x: f64, lo: f64, hi: f64) -> f64 {
    if x.is_nan() {
        lo
    } else {
        x.clamp(lo, hi)
    }
}

/// An encoded point in the search box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParamVector(pub Vec<f64>);

impl ParamVector {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl From<Vec<f64>> for ParamVector {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

impl std::ops::Index<usize> for ParamVector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// Axis-aligned box in encoded coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Bounds {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Bounds {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Self {
        assert_eq!(lo.len(), hi.len(), "bound vectors differ in length");
        Self { lo, hi }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn width(&self, i: usize) -> f64 {
        self.hi[i] - self.lo[i]
    }

    pub fn clamp(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .enumerate()
            .map(|(i, &v)| clamp_nan(v, self.lo[i], self.hi[i]))
            .collect()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x
                .iter()
                .enumerate()
                .all(|(i, &v)| v >= self.lo[i] && v <= self.hi[i])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<ParamSpec>", into = "Vec<ParamSpec>")]
pub struct SearchSpace {
    params: Vec<ParamSpec>,
    bounds: Bounds,
}

impl TryFrom<Vec<ParamSpec>> for SearchSpace {
    type Error = SpaceError;

    fn try_from(params: Vec<ParamSpec>) -> Result<Self, SpaceError> {
        Self::new(params)
    }
}

impl From<SearchSpace> for Vec<ParamSpec> {
    fn from(space: SearchSpace) -> Self {
        space.params
    }
}

impl SearchSpace {
    pub fn new(params: Vec<ParamSpec>) -> Result<Self, SpaceError> {
        if params.is_empty() {
            return Err(SpaceError::Empty);
        }
        let mut names = HashSet::new();
        for p in &params {
            p.validate()?;
            if !names.insert(p.name.as_str()) {
                return Err(SpaceError::DuplicateName(p.name.clone()));
            }
        }
        let (lo, hi) = params.iter().map(ParamSpec::encoded_bounds).unzip();
        Ok(Self {
            params,
            bounds: Bounds::new(lo, hi),
        })
    }

    pub fn params(&self) -> &[ParamSpec] {
        &self.params
    }

    pub fn dim(&self) -> usize {
        self.params.len()
    }

    pub fn bounds(&self) -> &Bounds {
        &self.bounds
    }

    pub fn encode(&self, assignment: &Assignment) -> Result<ParamVector, SpaceError> {
        if let Some(unknown) = assignment
            .keys()
            .find(|k| !self.params.iter().any(|p| &p.name == *k))
        {
            return Err(SpaceError::UnknownName(unknown.clone()));
        }
        self.params
            .iter()
            .map(|p| {
                let v = assignment
                    .get(&p.name)
                    .ok_or_else(|| SpaceError::Missing(p.name.clone()))?;
                p.encode_value(v)
            })
            .collect::<Result<Vec<_>, _>>()
            .map(ParamVector)
    }

    pub fn decode(&self, x: &ParamVector) -> Result<Assignment, SpaceError> {
        self.check_len(x)?;
        Ok(self
            .params
            .iter()
            .zip(x.as_slice())
            .map(|(p, &v)| (p.name.clone(), p.decode_coordinate(v)))
            .collect())
    }

    /// Snaps a vector onto the lattice of values it decodes to.
    pub fn round_trip(&self, x: &ParamVector) -> Result<ParamVector, SpaceError> {
        self.encode(&self.decode(x)?)
    }

    pub fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> ParamVector {
        ParamVector(self.params.iter().map(|p| p.sample(rng)).collect())
    }

    pub fn clamp(&self, x: &ParamVector) -> Result<ParamVector, SpaceError> {
        self.check_len(x)?;
        Ok(ParamVector(self.bounds.clamp(x.as_slice())))
    }

    pub fn contains(&self, x: &ParamVector) -> bool {
        self.bounds.contains(x.as_slice())
    }

    fn check_len(&self, x: &ParamVector) -> Result<(), SpaceError> {
        if x.len() != self.dim() {
            return Err(SpaceError::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        Ok(())
    }
}
