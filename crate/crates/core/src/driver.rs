//! The HomOpt scheduler.
//!
//! After a warm-up of base-sampler trials, every block of five trials cycles
//! through the branches by `C_T mod 5`:
//!
//! | residue | branch   |
//! |---------|----------|
//! | 0, 2    | Inner    |
//! | 1       | Homotopy |
//! | 3, 4    | Perturb  |
//!
//! *Inner* asks the base sampler, *Perturb* jitters the incumbent by the
//! spread of the best trials, and *Homotopy* fits an old surrogate `f` on the
//! most recent trials and a new one `g` on all of them, then tracks a
//! minimizer from `f` to `g` starting at the incumbent.

use std::fmt;
use std::time::{Duration, Instant};

use log::{debug, warn};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{DriverError, HomotopyStepError, SamplerError};
use crate::gam::{GamConfig, GamSurrogate};
use crate::homotopy::{track_path, HomotopyConfig};
use crate::objectives::Objective;
use crate::rng::{stream_rng, Stream};
use crate::samplers::{Sampler, SamplerConfig};
use crate::space::{Assignment, Bounds, ParamVector, SearchSpace};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    Warmup,
    Inner,
    Perturb,
    Homotopy,
}

impl Branch {
    pub fn as_str(self) -> &'static str {
        match self {
            Branch::Warmup => "warmup",
            Branch::Inner => "inner",
            Branch::Perturb => "perturb",
            Branch::Homotopy => "homotopy",
        }
    }
}

impl fmt::Display for Branch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Branch {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        [Branch::Warmup, Branch::Inner, Branch::Perturb, Branch::Homotopy]
            .into_iter()
            .find(|b| b.as_str() == s)
            .ok_or_else(|| format!("unknown branch `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trial {
    /// Encoded point as proposed (clamped, not rounded).
    pub params: ParamVector,
    pub loss: f64,
    pub index: usize,
    pub branch: Branch,
    /// The objective failed or returned a non-finite value; `loss` is a sentinel.
    pub failed: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct TrialHistory {
    trials: Vec<Trial>,
    best: Option<usize>,
}

impl TrialHistory {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, params: ParamVector, loss: f64, branch: Branch, failed: bool) -> &Trial {
        let index = self.trials.len();
        if self.best.is_none_or(|b| loss < self.trials[b].loss) {
            self.best = Some(index);
        }
        self.trials.push(Trial {
            params,
            loss,
            index,
            branch,
            failed,
        });
        &self.trials[index]
    }

    pub fn len(&self) -> usize {
        self.trials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trials.is_empty()
    }

    pub fn trials(&self) -> &[Trial] {
        &self.trials
    }

    /// Lowest-loss trial; the earliest one wins ties.
    pub fn best(&self) -> Option<&Trial> {
        self.best.map(|i| &self.trials[i])
    }

    pub fn best_so_far(&self) -> Vec<f64> {
        self.trials
            .iter()
            .scan(f64::INFINITY, |best, t| {
                *best = best.min(t.loss);
                Some(*best)
            })
            .collect()
    }

    pub fn losses(&self) -> Vec<f64> {
        self.trials.iter().map(|t| t.loss).collect()
    }

    /// The `k` lowest-loss trials, ties broken by index.
    pub fn top(&self, k: usize) -> Vec<&Trial> {
        let mut sorted: Vec<&Trial> = self.trials.iter().collect();
        sorted.sort_by(|a, b| a.loss.total_cmp(&b.loss).then(a.index.cmp(&b.index)));
        sorted.truncate(k);
        sorted
    }

    fn max_healthy_loss(&self) -> Option<f64> {
        self.trials
            .iter()
            .filter(|t| !t.failed)
            .map(|t| t.loss)
            .reduce(f64::max)
    }

    /// Loss recorded for a failed evaluation: the worst healthy loss plus an
    /// order of magnitude, or `1e30` if nothing has succeeded yet.
    pub fn sentinel_loss(&self) -> f64 {
        match self.max_healthy_loss() {
            Some(m) => m + 10.0 * m.abs().max(1.0),
            None => 1e30,
        }
    }

    fn observations(&self, from: usize) -> Vec<(ParamVector, f64)> {
        self.trials[from..]
            .iter()
            .map(|t| (t.params.clone(), t.loss))
            .collect()
    }
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DriverConfig {
    pub max_trials: usize,
    /// Wall-clock budget in seconds; checked before each trial.
    pub max_time_s: Option<f64>,
    pub warmup: usize,
    /// Jitter strength: scale on the variance of the best trials.
    pub jitter: f64,
    /// Fraction of the history used to fit the old surrogate.
    pub k: f64,
    /// How many best trials feed the perturbation variance.
    pub top_count: usize,
    pub homotopy: HomotopyConfig,
    pub gam: GamConfig,
    pub sampler: SamplerConfig,
    pub seed: u64,
    /// `false` runs the base sampler alone.
    #[serde(default = "default_true")]
    pub homopt: bool,
}

impl Default for DriverConfig {
    fn default() -> Self {
        Self {
            max_trials: 100,
            max_time_s: None,
            warmup: 20,
            jitter: 0.005,
            k: 0.5,
            top_count: 10,
            homotopy: HomotopyConfig::default(),
            gam: GamConfig::default(),
            sampler: SamplerConfig::Random,
            seed: 0,
            homopt: true,
        }
    }
}

impl DriverConfig {
    pub fn validate(&self) -> Result<(), DriverError> {
        let bad = |m: String| Err(DriverError::InvalidConfig(m));
        if self.max_trials == 0 {
            return bad("max_trials must be >= 1".into());
        }
        if let Some(t) = self.max_time_s {
            if t.is_nan() || t <= 0.0 {
                return bad("max_time_s must be > 0".into());
            }
        }
        if self.homopt {
            if self.max_trials < self.warmup {
                return bad(format!(
                    "max_trials ({}) must be >= warmup ({})",
                    self.max_trials, self.warmup
                ));
            }
            if !(self.k > 0.0 && self.k <= 1.0) {
                return bad("k must be in (0, 1]".into());
            }
            if !(self.jitter >= 0.0 && self.jitter.is_finite()) {
                return bad("jitter must be finite and >= 0".into());
            }
            if self.top_count == 0 {
                return bad("top_count must be >= 1".into());
            }
            if self.homotopy.n_steps == 0 {
                return bad("homotopy n_steps must be >= 1".into());
            }
            self.gam
                .validate()
                .map_err(|e| DriverError::InvalidConfig(e.to_string()))?;
            self.homotopy
                .nm
                .validate()
                .map_err(|e| DriverError::InvalidConfig(e.to_string()))?;
        }
        self.sampler.validate()?;
        Ok(())
    }
}

pub fn select_branch(completed: usize, warmup: usize) -> Branch {
    if completed < warmup {
        return Branch::Warmup;
    }
    match completed % 5 {
        0 | 2 => Branch::Inner,
        3 | 4 => Branch::Perturb,
        _ => Branch::Homotopy,
    }
}

/// Incumbent plus coordinatewise uniform noise on `[-svar_j, svar_j]`, where
/// `svar_j = jitter * Var_j(best top_count trials)`.
pub fn perturb_best<R: Rng + ?Sized>(
    history: &TrialHistory,
    jitter: f64,
    top_count: usize,
    bounds: &Bounds,
    rng: &mut R,
) -> Option<ParamVector> {
    let best = history.best()?;
    let svar = top_variance(history, top_count)
        .into_iter()
        .map(|v| v * jitter)
        .collect::<Vec<_>>();
    let moved: Vec<f64> = best
        .params
        .as_slice()
        .iter()
        .zip(&svar)
        .map(|(&x, &s)| if s > 0.0 { x + rng.random_range(-s..=s) } else { x })
        .collect();
    Some(ParamVector(bounds.clamp(&moved)))
}

/// Per-coordinate population variance of the `top_count` best trials.
pub fn top_variance(history: &TrialHistory, top_count: usize) -> Vec<f64> {
    let top = history.top(top_count);
    let Some(first) = top.first() else {
        return Vec::new();
    };
    let m = top.len() as f64;
    (0..first.params.len())
        .map(|j| {
            let mean = top.iter().map(|t| t.params[j]).sum::<f64>() / m;
            top.iter().map(|t| (t.params[j] - mean).powi(2)).sum::<f64>() / m
        })
        .collect()
}

/// `round(k * completed)`, the size of the old surrogate's training window.
pub fn recent_count(k: f64, completed: usize) -> usize {
    (k * completed as f64).round() as usize
}

pub fn homotopy_step(
    history: &TrialHistory,
    k: f64,
    homotopy: &HomotopyConfig,
    gam: &GamConfig,
    bounds: &Bounds,
) -> Result<ParamVector, HomotopyStepError> {
    let n = history.len();
    let recent = recent_count(k, n).min(n);
    if n < 2 || recent < 2 {
        return Err(HomotopyStepError::TooFewTrials { history: n, recent });
    }
    let f = GamSurrogate::fit(&history.observations(n - recent), gam)?;
    let g = GamSurrogate::fit(&history.observations(0), gam)?;
    let start = &history.best().expect("history is non-empty").params;
    let path = track_path(&f, &g, start, bounds, homotopy)?;
    let scores = g.predict_batch_seq(&path.points)?;
    let (best, _) = scores
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, &s)| if s < acc.1 { (i, s) } else { acc });
    Ok(ParamVector(bounds.clamp(path.points[best].as_slice())))
}

/// One completed trial, as reported to observers.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialEvent {
    pub index: usize,
    pub branch: Branch,
    pub params: Assignment,
    pub loss: f64,
    pub best_so_far: f64,
    pub elapsed_s: f64,
    pub failed: bool,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub history: TrialHistory,
    pub events: Vec<TrialEvent>,
}

impl RunOutcome {
    pub fn best(&self) -> Option<&Trial> {
        self.history.best()
    }
}

pub fn run<O: Objective + ?Sized>(objective: &O, config: &DriverConfig) -> Result<RunOutcome, DriverError> {
    let mut events = Vec::with_capacity(config.max_trials);
    let history = run_with_observer(objective, config, |e| events.push(e.clone()))?;
    Ok(RunOutcome { history, events })
}

pub fn run_with_observer<O, F>(
    objective: &O,
    config: &DriverConfig,
    mut observer: F,
) -> Result<TrialHistory, DriverError>
where
    O: Objective + ?Sized,
    F: FnMut(&TrialEvent),
{
    config.validate()?;
    let space = objective.space();
    let bounds = space.bounds();
    let mut sampler = Sampler::new(config.sampler.clone(), config.seed)?;
    let mut history = TrialHistory::new();
    let budget = config.max_time_s.map(Duration::from_secs_f64);
    let started = Instant::now();

    while history.len() < config.max_trials {
        if budget.is_some_and(|b| started.elapsed() >= b) {
            debug!("time budget exhausted after {} trials", history.len());
            break;
        }
        let completed = history.len();
        let scheduled = if config.homopt {
            select_branch(completed, config.warmup)
        } else {
            Branch::Inner
        };
        let (candidate, branch) = match scheduled {
            Branch::Warmup | Branch::Inner => (propose(&mut sampler, &history, space, config.seed)?, scheduled),
            Branch::Perturb => {
                let mut rng = stream_rng(config.seed, Stream::Perturb, completed as u64);
                let x = perturb_best(&history, config.jitter, config.top_count, bounds, &mut rng)
                    .expect("perturbation only runs after warm-up");
                (x, Branch::Perturb)
            }
            Branch::Homotopy => {
                match homotopy_step(&history, config.k, &config.homotopy, &config.gam, bounds) {
                    Ok(x) => (x, Branch::Homotopy),
                    Err(e) => {
                        debug!("homotopy step {completed} fell back to the base sampler: {e}");
                        (propose(&mut sampler, &history, space, config.seed)?, Branch::Inner)
                    }
                }
            }
        };
        let candidate = space.clamp(&candidate)?;
        let params = space.decode(&candidate)?;
        let (loss, failed) = match objective.evaluate(&params) {
            Ok(v) if v.is_finite() => (v, false),
            Ok(v) => {
                warn!("trial {completed}: objective returned {v}; recording sentinel loss");
                (history.sentinel_loss(), true)
            }
            Err(e) => {
                warn!("trial {completed}: evaluation failed ({e}); recording sentinel loss");
                (history.sentinel_loss(), true)
            }
        };
        history.push(candidate, loss, branch, failed);
        let best_so_far = history.best().map_or(loss, |t| t.loss);
        observer(&TrialEvent {
            index: completed,
            branch,
            params,
            loss,
            best_so_far,
            elapsed_s: started.elapsed().as_secs_f64(),
            failed,
        });
    }
    Ok(history)
}

fn propose(
    sampler: &mut Sampler,
    history: &TrialHistory,
    space: &SearchSpace,
    seed: u64,
) -> Result<ParamVector, DriverError> {
    match sampler.propose(history, space) {
        Ok(x) => Ok(x),
        Err(SamplerError::SingularKernel(jitter)) => {
            warn!("GP kernel singular (jitter {jitter}); sampling uniformly for this trial");
            let mut rng = stream_rng(seed, Stream::Sampler, history.len() as u64);
            Ok(space.sample_uniform(&mut rng))
        }
        Err(e) => Err(e.into()),
    }
}
