//! JSON run configuration: one file describes one experiment.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use homopt::objectives::DEFAULT_TIMEOUT;
use homopt::{
    Builtin, BuiltinObjective, CommandSpec, DriverConfig, ExternalObjective, GamConfig, HomotopyConfig,
    NmConfig, Objective, SamplerConfig, SearchSpace,
};

use crate::ConfigError;

/// The base sampler named by a method string.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaseKind {
    Random,
    Tpe,
    Bayes,
    External,
}

impl BaseKind {
    const ALL: [BaseKind; 4] = [BaseKind::Random, BaseKind::Tpe, BaseKind::Bayes, BaseKind::External];

    pub fn as_str(self) -> &'static str {
        match self {
            BaseKind::Random => "random",
            BaseKind::Tpe => "tpe",
            BaseKind::Bayes => "bayes",
            BaseKind::External => "external",
        }
    }

    fn default_sampler(self) -> Option<SamplerConfig> {
        match self {
            BaseKind::Random => Some(SamplerConfig::Random),
            BaseKind::Tpe => Some(SamplerConfig::tpe()),
            BaseKind::Bayes => Some(SamplerConfig::bayes()),
            BaseKind::External => None,
        }
    }
}

/// `"<base>"` or `"homopt+<base>"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Method {
    pub homopt: bool,
    pub base: BaseKind,
}

impl Method {
    pub fn plain(base: BaseKind) -> Self {
        Self { homopt: false, base }
    }

    pub fn augmented(base: BaseKind) -> Self {
        Self { homopt: true, base }
    }

    /// Filesystem-safe form, e.g. `homopt_random`.
    pub fn slug(self) -> String {
        self.to_string().replace('+', "_")
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.homopt {
            write!(f, "homopt+{}", self.base.as_str())
        } else {
            f.write_str(self.base.as_str())
        }
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (homopt, rest) = match s.strip_prefix("homopt+") {
            Some(rest) => (true, rest),
            None => (false, s),
        };
        BaseKind::ALL
            .into_iter()
            .find(|b| b.as_str() == rest)
            .map(|base| Method { homopt, base })
            .ok_or_else(|| {
                format!("unknown method `{s}`; expected random, tpe, bayes or external, optionally prefixed with `homopt+`")
            })
    }
}

impl TryFrom<String> for Method {
    type Error = String;

    fn try_from(s: String) -> Result<Self, String> {
        s.parse()
    }
}

impl From<Method> for String {
    fn from(m: Method) -> String {
        m.to_string()
    }
}

fn default_timeout_s() -> f64 {
    DEFAULT_TIMEOUT.as_secs_f64()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ObjectiveSpec {
    Builtin(String),
    External {
        command: CommandSpec,
        #[serde(default = "default_timeout_s")]
        timeout_s: f64,
    },
}

fn default_trials() -> usize {
    100
}
fn default_warmup() -> usize {
    20
}
fn default_jitter() -> f64 {
    0.005
}
fn default_k() -> f64 {
    0.5
}
fn default_steps() -> usize {
    5
}
fn default_top_count() -> usize {
    10
}
fn default_seeds() -> Vec<u64> {
    vec![0]
}
fn default_output() -> PathBuf {
    PathBuf::from("results")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub objective: ObjectiveSpec,
    /// Required for external objectives; overrides a built-in's default space.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub space: Option<SearchSpace>,
    pub method: Method,
    /// Full sampler settings; defaults follow from `method` when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sampler: Option<SamplerConfig>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_time_s: Option<f64>,
    #[serde(default = "default_warmup")]
    pub warmup: usize,
    #[serde(default = "default_jitter")]
    pub jitter: f64,
    #[serde(default = "default_k")]
    pub k: f64,
    #[serde(default = "default_steps")]
    pub homotopy_steps: usize,
    #[serde(default = "default_top_count")]
    pub top_count: usize,
    #[serde(default)]
    pub gam: GamConfig,
    #[serde(default)]
    pub nelder_mead: NmConfig,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    /// With a `homopt+` method, also run the bare base sampler on the same seeds.
    #[serde(default)]
    pub compare: bool,
    #[serde(default = "default_output")]
    pub output: PathBuf,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| ConfigError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        Self::parse(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("run configs always serialize")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |field: &str, message: String| {
            Err(ConfigError::Invalid {
                field: field.to_string(),
                message,
            })
        };
        if self.trials == 0 {
            return invalid("trials", "trials must be ≥ 1".into());
        }
        if self.seeds.is_empty() {
            return invalid("seeds", "seeds must list at least one seed".into());
        }
        if let Some(t) = self.max_time_s {
            if !(t > 0.0 && t.is_finite()) {
                return invalid("max_time_s", "max_time_s must be > 0".into());
            }
        }
        match &self.objective {
            ObjectiveSpec::Builtin(name) => {
                let Some(kind) = Builtin::from_name(name) else {
                    let known: Vec<&str> = Builtin::ALL.iter().map(|b| b.name()).collect();
                    return invalid(
                        "objective",
                        format!("unknown objective `{name}`; built-ins are {}", known.join(", ")),
                    );
                };
                if let Some(space) = &self.space {
                    let wanted = kind.default_space();
                    for p in wanted.params() {
                        if !space.params().iter().any(|q| q.name == p.name) {
                            return invalid("space", format!("{name} reads parameter `{}`", p.name));
                        }
                    }
                }
            }
            ObjectiveSpec::External { command, timeout_s } => {
                if command.display().trim().is_empty() {
                    return invalid("objective.command", "command must not be empty".into());
                }
                if !(*timeout_s > 0.0 && timeout_s.is_finite()) {
                    return invalid("objective.timeout_s", "timeout_s must be > 0".into());
                }
                if self.space.is_none() {
                    return invalid("space", "external objectives need an explicit space".into());
                }
            }
        }
        let sampler = self.sampler_config()?;
        if let Err(e) = sampler.validate() {
            return invalid("sampler", e.to_string());
        }
        if self.method.homopt {
            if self.warmup == 0 {
                return invalid("warmup", "warmup must be ≥ 1".into());
            }
            if self.trials < self.warmup {
                return invalid(
                    "trials",
                    format!("trials ({}) must be ≥ warmup ({}) for homopt methods", self.trials, self.warmup),
                );
            }
            if !(self.jitter >= 0.0 && self.jitter.is_finite()) {
                return invalid("jitter", "jitter must be finite and ≥ 0".into());
            }
            if !(self.k > 0.0 && self.k <= 1.0) {
                return invalid("k", "k must be in (0, 1]".into());
            }
            if self.homotopy_steps == 0 {
                return invalid("homotopy_steps", "homotopy_steps must be ≥ 1".into());
            }
            if self.top_count == 0 {
                return invalid("top_count", "top_count must be ≥ 1".into());
            }
            if let Err(e) = self.gam.validate() {
                return invalid("gam", e.to_string());
            }
            if let Err(e) = self.nelder_mead.validate() {
                return invalid("nelder_mead", e.to_string());
            }
        }
        Ok(())
    }

    /// The sampler for the configured base method.
    pub fn sampler_config(&self) -> Result<SamplerConfig, ConfigError> {
        let base = self.method.base;
        match (&self.sampler, base.default_sampler()) {
            (Some(s), _) if s.name() != base.as_str() => Err(ConfigError::Invalid {
                field: "sampler".into(),
                message: format!("sampler kind `{}` does not match method `{}`", s.name(), self.method),
            }),
            (Some(s), _) => Ok(s.clone()),
            (None, Some(s)) => Ok(s),
            (None, None) => Err(ConfigError::Invalid {
                field: "sampler".into(),
                message: "method `external` needs a sampler with a command".into(),
            }),
        }
    }

    pub fn search_space(&self) -> Result<SearchSpace, ConfigError> {
        match (&self.space, &self.objective) {
            (Some(space), _) => Ok(space.clone()),
            (None, ObjectiveSpec::Builtin(name)) => Builtin::from_name(name)
                .map(Builtin::default_space)
                .ok_or_else(|| ConfigError::Invalid {
                    field: "objective".into(),
                    message: format!("unknown objective `{name}`"),
                }),
            (None, ObjectiveSpec::External { .. }) => Err(ConfigError::Invalid {
                field: "space".into(),
                message: "external objectives need an explicit space".into(),
            }),
        }
    }

    pub fn build_objective(&self) -> Result<Box<dyn Objective>, ConfigError> {
        let space = self.search_space()?;
        Ok(match &self.objective {
            ObjectiveSpec::Builtin(name) => {
                let kind = Builtin::from_name(name).expect("validated objective name");
                Box::new(BuiltinObjective::with_space(kind, space))
            }
            ObjectiveSpec::External { command, timeout_s } => Box::new(
                ExternalObjective::new(command.clone(), space)
                    .with_timeout(std::time::Duration::from_secs_f64(*timeout_s)),
            ),
        })
    }

    /// Driver settings for `method` on one seed.
    pub fn driver_config(&self, method: Method, seed: u64) -> Result<DriverConfig, ConfigError> {
        let sampler = Self {
            method,
            ..self.clone()
        }
        .sampler_config()?;
        Ok(DriverConfig {
            max_trials: self.trials,
            max_time_s: self.max_time_s,
            warmup: self.warmup,
            jitter: self.jitter,
            k: self.k,
            top_count: self.top_count,
            homotopy: HomotopyConfig {
                n_steps: self.homotopy_steps,
                nm: self.nelder_mead,
            },
            gam: self.gam,
            sampler,
            seed,
            homopt: method.homopt,
        })
    }

    /// Canned run of a built-in illustration: HomOpt+Random against plain
    /// Random, 100 trials on seeds 1 to 5.
    ///
    /// The surrogate is smoother than the experiment defaults (15 splines,
    /// penalty 10). With 25 splines and penalty 1e-4 the additive fit chases
    /// the Griewank ripples and the homotopy step stalls in side basins.
    pub fn illustration(kind: Builtin, output: PathBuf) -> Self {
        Self {
            objective: ObjectiveSpec::Builtin(kind.name().to_string()),
            space: None,
            method: Method::augmented(BaseKind::Random),
            sampler: None,
            trials: 100,
            max_time_s: None,
            warmup: default_warmup(),
            jitter: default_jitter(),
            k: default_k(),
            homotopy_steps: default_steps(),
            top_count: default_top_count(),
            gam: GamConfig {
                n_splines: 15,
                penalty: 10.0,
                ..GamConfig::default()
            },
            nelder_mead: NmConfig::default(),
            seeds: (1..=5).collect(),
            compare: true,
            output,
        }
    }

    /// Methods to run, augmented first.
    pub fn methods(&self) -> Vec<Method> {
        let mut out = vec![self.method];
        if self.compare && self.method.homopt {
            out.push(Method::plain(self.method.base));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{"objective": "gramacy_lee", "method": "random", "seeds": [1], "trials": 50}"#;

    #[test]
    fn minimal_config_gets_defaults() {
        let c = RunConfig::parse(MINIMAL).unwrap();
        assert_eq!(c.trials, 50);
        assert_eq!(c.method, Method::plain(BaseKind::Random));
        assert_eq!((c.warmup, c.jitter, c.k, c.homotopy_steps), (20, 0.005, 0.5, 5));
        assert_eq!((c.gam.n_splines, c.gam.penalty), (25, 1e-4));
        assert_eq!(c.sampler_config().unwrap(), SamplerConfig::Random);
    }

    #[test]
    fn zero_trials_names_the_field() {
        let err = RunConfig::parse(r#"{"objective": "gramacy_lee", "method": "random", "trials": 0}"#).unwrap_err();
        assert_eq!(err.to_string(), "invalid `trials`: trials must be ≥ 1");
    }

    #[test]
    fn parse_errors_carry_position() {
        let err = RunConfig::parse("{\n  \"objective\": \"gramacy_lee\",\n  \"method\": \"random\",\n  \"bogus\": 1\n}").unwrap_err();
        match err {
            ConfigError::Parse { line, .. } => assert_eq!(line, 4),
            other => panic!("{other:?}"),
        }
        assert!(matches!(RunConfig::parse("{"), Err(ConfigError::Parse { .. })));
    }

    #[test]
    fn method_strings() {
        for s in ["random", "tpe", "bayes", "external", "homopt+random", "homopt+tpe", "homopt+bayes"] {
            assert_eq!(s.parse::<Method>().unwrap().to_string(), s);
        }
        assert!("homopt".parse::<Method>().is_err());
        assert!("smac".parse::<Method>().is_err());
        assert_eq!(Method::augmented(BaseKind::Tpe).slug(), "homopt_tpe");
    }

    #[test]
    fn round_trip_of_a_full_config() {
        let text = r#"{
            "objective": {"command": ["python3", "stub.py"], "timeout_s": 5},
            "space": [{"name": "lr", "kind": "continuous", "lo": 0.0001, "hi": 0.1, "log": true},
                      {"name": "depth", "kind": "integer", "lo": 1, "hi": 8},
                      {"name": "act", "kind": "categorical", "choices": ["relu", "tanh"]}],
            "method": "homopt+tpe",
            "sampler": {"kind": "tpe", "gamma": 0.25},
            "trials": 40, "max_time_s": 60, "seeds": [1, 2], "compare": true, "output": "out"
        }"#;
        let c = RunConfig::parse(text).unwrap();
        let again = RunConfig::parse(&c.to_json()).unwrap();
        assert_eq!(c, again);
        assert_eq!(c.methods(), vec![Method::augmented(BaseKind::Tpe), Method::plain(BaseKind::Tpe)]);
        let d = c.driver_config(Method::plain(BaseKind::Tpe), 2).unwrap();
        assert!(!d.homopt);
        assert_eq!(d.max_trials, 40);
    }

    #[test]
    fn illustrations_are_valid() {
        for kind in Builtin::ALL {
            let c = RunConfig::illustration(kind, "out".into());
            c.validate().unwrap();
            assert_eq!(RunConfig::parse(&c.to_json()).unwrap(), c);
        }
    }

    #[test]
    fn semantic_errors() {
        let cases = [
            (r#"{"objective": "nope", "method": "random"}"#, "objective"),
            (r#"{"objective": "gramacy_lee", "method": "homopt+random", "trials": 10}"#, "trials"),
            (r#"{"objective": "gramacy_lee", "method": "random", "seeds": []}"#, "seeds"),
            (r#"{"objective": {"command": "./stub"}, "method": "random"}"#, "space"),
            (r#"{"objective": "gramacy_lee", "method": "external"}"#, "sampler"),
            (r#"{"objective": "gramacy_lee", "method": "tpe", "sampler": {"kind": "random"}}"#, "sampler"),
            (r#"{"objective": "gramacy_lee", "method": "homopt+random", "k": 0}"#, "k"),
            (
                r#"{"objective": "griewank_modified", "method": "random", "space": [{"name": "x", "kind": "continuous", "lo": 0, "hi": 1}]}"#,
                "space",
            ),
        ];
        for (text, field) in cases {
            match RunConfig::parse(text) {
                Err(ConfigError::Invalid { field: f, .. }) => assert_eq!(f, field, "{text}"),
                other => panic!("{text}: {other:?}"),
            }
        }
    }
}
