//! Base sampling strategies that propose the next point to evaluate.
//!
//! Proposals are a pure function of `(seed, history)`: each call derives its
//! random stream from the seed and the current history length.

use std::sync::Arc;
use std::time::Duration;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use serde_json::json;
use statrs::function::erf::erfc;

use crate::driver::TrialHistory;
use crate::error::{ProcessError, SamplerError};
use crate::process::{exchange_json, CommandSpec};
use crate::rng::{stream_rng, Stream};
use crate::space::{Assignment, ParamVector, SearchSpace};

fn default_gamma() -> f64 {
    0.20
}
fn default_tpe_candidates() -> usize {
    10
}
fn default_tpe_startup() -> usize {
    10
}
fn default_bayes_startup() -> usize {
    20
}
fn default_bayes_candidates() -> usize {
    10
}
fn default_noise() -> f64 {
    1e-6
}
fn default_timeout_s() -> f64 {
    300.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum SamplerConfig {
    Random,
    Tpe {
        #[serde(default = "default_gamma")]
        gamma: f64,
        #[serde(default = "default_tpe_candidates")]
        n_candidates: usize,
        #[serde(default = "default_tpe_startup")]
        n_startup: usize,
    },
    Bayes {
        #[serde(default = "default_bayes_startup")]
        n_startup: usize,
        #[serde(default = "default_bayes_candidates")]
        n_candidates: usize,
        #[serde(default = "default_noise")]
        noise: f64,
    },
    /// A user-supplied process speaking the sampler stdio protocol.
    External {
        command: CommandSpec,
        #[serde(default = "default_timeout_s")]
        timeout_s: f64,
    },
}

impl SamplerConfig {
    pub fn tpe() -> Self {
        SamplerConfig::Tpe {
            gamma: default_gamma(),
            n_candidates: default_tpe_candidates(),
            n_startup: default_tpe_startup(),
        }
    }

    pub fn bayes() -> Self {
        SamplerConfig::Bayes {
            n_startup: default_bayes_startup(),
            n_candidates: default_bayes_candidates(),
            noise: default_noise(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            SamplerConfig::Random => "random",
            SamplerConfig::Tpe { .. } => "tpe",
            SamplerConfig::Bayes { .. } => "bayes",
            SamplerConfig::External { .. } => "external",
        }
    }

    pub fn validate(&self) -> Result<(), SamplerError> {
        let bad = |m: &str| Err(SamplerError::InvalidConfig(m.to_string()));
        match *self {
            SamplerConfig::Random => {}
            SamplerConfig::Tpe { gamma, n_candidates, .. } => {
                if !(gamma > 0.0 && gamma <= 1.0) {
                    return bad("tpe gamma must be in (0, 1]");
                }
                if n_candidates == 0 {
                    return bad("tpe n_candidates must be >= 1");
                }
            }
            SamplerConfig::Bayes { n_candidates, noise, .. } => {
                if n_candidates == 0 {
                    return bad("bayes n_candidates must be >= 1");
                }
                if !(noise >= 0.0 && noise.is_finite()) {
                    return bad("bayes noise must be finite and >= 0");
                }
            }
            SamplerConfig::External { timeout_s, .. } => {
                if !(timeout_s > 0.0 && timeout_s.is_finite()) {
                    return bad("external timeout_s must be > 0");
                }
            }
        }
        Ok(())
    }
}

/// A sampler bound to a seed, with a small model cache.
#[derive(Debug, Clone)]
pub struct Sampler {
    config: SamplerConfig,
    seed: u64,
    gp_cache: Option<(usize, Arc<GpModel>)>,
}

impl Sampler {
    pub fn new(config: SamplerConfig, seed: u64) -> Result<Self, SamplerError> {
        config.validate()?;
        Ok(Self {
            config,
            seed,
            gp_cache: None,
        })
    }

    pub fn config(&self) -> &SamplerConfig {
        &self.config
    }

    pub fn propose(
        &mut self,
        history: &TrialHistory,
        space: &SearchSpace,
    ) -> Result<ParamVector, SamplerError> {
        if space.dim() == 0 {
            return Err(SamplerError::EmptySpace);
        }
        let mut rng = stream_rng(self.seed, Stream::Sampler, history.len() as u64);
        match self.config.clone() {
            SamplerConfig::Random => Ok(space.sample_uniform(&mut rng)),
            SamplerConfig::Tpe {
                gamma,
                n_candidates,
                n_startup,
            } => {
                if history.len() < n_startup.max(2) {
                    return Ok(space.sample_uniform(&mut rng));
                }
                Ok(tpe_propose(history, space, gamma, n_candidates, &mut rng))
            }
            SamplerConfig::Bayes {
                n_startup,
                n_candidates,
                noise,
            } => {
                if history.len() < n_startup.max(2) {
                    return Ok(space.sample_uniform(&mut rng));
                }
                let model = match &self.gp_cache {
                    Some((len, model)) if *len == history.len() => Arc::clone(model),
                    _ => {
                        let model = Arc::new(GpModel::fit(history, noise)?);
                        self.gp_cache = Some((history.len(), Arc::clone(&model)));
                        model
                    }
                };
                let mut candidates: Vec<ParamVector> =
                    (0..n_candidates).map(|_| space.sample_uniform(&mut rng)).collect();
                let scores: Vec<f64> = candidates.iter().map(|c| model.expected_improvement(c)).collect();
                Ok(candidates.swap_remove(argmax(&scores)))
            }
            SamplerConfig::External { command, timeout_s } => {
                external_propose(&command, Duration::from_secs_f64(timeout_s), history, space)
            }
        }
    }
}

fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in xs.iter().enumerate() {
        if v > xs[best] {
            best = i;
        }
    }
    best
}

/// Indices (into the history) of the good and bad sets for a TPE split.
///
/// The good set holds the `ceil(gamma * n)` lowest-loss trials, ties broken by
/// trial order.
pub fn tpe_split(history: &TrialHistory, gamma: f64) -> (Vec<usize>, Vec<usize>) {
    let n = history.len();
    if n == 0 {
        return (Vec::new(), Vec::new());
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        history.trials()[a]
            .loss
            .total_cmp(&history.trials()[b].loss)
            .then(a.cmp(&b))
    });
    // the epsilon keeps e.g. 0.2 * 35 from ceiling to 8
    let n_good = ((gamma * n as f64 - 1e-9).ceil() as usize).clamp(1, n);
    let bad = order.split_off(n_good);
    (order, bad)
}

/// Per-dimension Gaussian Parzen estimator.
///
/// Each coordinate's mixture has one kernel per member point plus a broad
/// prior kernel centred on the box with the box width as its bandwidth. The
/// prior keeps some mass everywhere, so the sampler can leave a basin the
/// good set has collapsed onto.
#[derive(Debug, Clone)]
pub struct Parzen {
    /// `centers[j]` holds the coordinate `j` of every member point.
    centers: Vec<Vec<f64>>,
    bandwidths: Vec<f64>,
    /// `(centre, bandwidth)` of the prior kernel per coordinate.
    prior: Vec<(f64, f64)>,
}

impl Parzen {
    pub fn fit(points: &[&ParamVector], space: &SearchSpace) -> Self {
        let bounds = space.bounds();
        let m = points.len();
        let mut centers = Vec::with_capacity(space.dim());
        let mut bandwidths = Vec::with_capacity(space.dim());
        for j in 0..space.dim() {
            let col: Vec<f64> = points.iter().map(|p| p[j]).collect();
            let mean = col.iter().sum::<f64>() / m as f64;
            let var = if m > 1 {
                col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1) as f64
            } else {
                0.0
            };
            let silverman = 1.06 * var.sqrt() * (m as f64).powf(-0.2);
            bandwidths.push(silverman.max(1e-3 * bounds.width(j)));
            centers.push(col);
        }
        let prior = (0..space.dim())
            .map(|j| (0.5 * (bounds.lo[j] + bounds.hi[j]), bounds.width(j)))
            .collect();
        Self {
            centers,
            bandwidths,
            prior,
        }
    }

    pub fn bandwidths(&self) -> &[f64] {
        &self.bandwidths
    }

    pub fn log_density(&self, x: &ParamVector) -> f64 {
        let mut total = 0.0;
        for (j, (centers, &h)) in self.centers.iter().zip(&self.bandwidths).enumerate() {
            let (pc, ph) = self.prior[j];
            if ph <= 0.0 {
                continue; // frozen axis, identical factor for every estimator
            }
            // log of each kernel's normal density, prior last
            let logs: Vec<f64> = centers
                .iter()
                .map(|&c| (c, h))
                .chain(std::iter::once((pc, ph)))
                .map(|(c, h)| {
                    let z = (x[j] - c) / h;
                    -0.5 * z * z - h.ln()
                })
                .collect();
            let max = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let sum: f64 = logs.iter().map(|l| (l - max).exp()).sum();
            total += max + (sum / logs.len() as f64).ln() - 0.5 * (2.0 * std::f64::consts::PI).ln();
        }
        total
    }

    pub fn sample<R: Rng + ?Sized>(&self, space: &SearchSpace, rng: &mut R) -> ParamVector {
        let raw: Vec<f64> = self
            .centers
            .iter()
            .zip(&self.bandwidths)
            .zip(&self.prior)
            .map(|((centers, &h), &(pc, ph))| {
                let pick = rng.random_range(0..=centers.len());
                let (c, h) = if pick < centers.len() { (centers[pick], h) } else { (pc, ph) };
                let z: f64 = StandardNormal.sample(rng);
                c + h * z
            })
            .collect();
        ParamVector(space.bounds().clamp(&raw))
    }
}

/// Log-ratio `log l(x) - log g(x)` used to rank TPE candidates.
pub fn tpe_score(good: &Parzen, bad: Option<&Parzen>, space: &SearchSpace, x: &ParamVector) -> f64 {
    let log_bad = match bad {
        Some(b) => b.log_density(x),
        None => -(0..space.dim())
            .map(|j| space.bounds().width(j))
            .filter(|w| *w > 0.0)
            .map(f64::ln)
            .sum::<f64>(),
    };
    good.log_density(x) - log_bad
}

fn tpe_propose(
    history: &TrialHistory,
    space: &SearchSpace,
    gamma: f64,
    n_candidates: usize,
    rng: &mut ChaCha8Rng,
) -> ParamVector {
    let (good_idx, bad_idx) = tpe_split(history, gamma);
    let pick = |idx: &[usize]| -> Vec<&ParamVector> {
        idx.iter().map(|&i| &history.trials()[i].params).collect()
    };
    let good = Parzen::fit(&pick(&good_idx), space);
    let bad = (!bad_idx.is_empty()).then(|| Parzen::fit(&pick(&bad_idx), space));
    let candidates: Vec<ParamVector> = (0..n_candidates).map(|_| good.sample(space, rng)).collect();
    let scores: Vec<f64> = candidates
        .iter()
        .map(|c| tpe_score(&good, bad.as_ref(), space, c))
        .collect();
    let i = argmax(&scores);
    candidates.into_iter().nth(i).expect("n_candidates >= 1")
}

/// Standard normal CDF.
pub fn norm_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

pub fn norm_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Expected improvement below `best` for a Gaussian prediction `N(mu, sigma^2)`.
pub fn expected_improvement(mu: f64, sigma: f64, best: f64) -> f64 {
    let gain = best - mu;
    if sigma <= 0.0 {
        return gain.max(0.0);
    }
    let z = gain / sigma;
    (gain * norm_cdf(z) + sigma * norm_pdf(z)).max(0.0)
}

/// Zero-mean GP with a squared-exponential kernel on standardized losses.
#[derive(Debug, Clone)]
pub struct GpModel {
    points: Vec<Vec<f64>>,
    chol: Cholesky<f64, Dyn>,
    alpha: DVector<f64>,
    length_scale: f64,
    signal_var: f64,
    best: f64,
}

impl GpModel {
    pub fn fit(history: &TrialHistory, noise: f64) -> Result<Self, SamplerError> {
        let points: Vec<Vec<f64>> = history.trials().iter().map(|t| t.params.0.clone()).collect();
        let losses: Vec<f64> = history.trials().iter().map(|t| t.loss).collect();
        let n = points.len();
        let mean = losses.iter().sum::<f64>() / n as f64;
        let sd = (losses.iter().map(|l| (l - mean).powi(2)).sum::<f64>() / n as f64).sqrt();
        let sd = if sd > 0.0 { sd } else { 1.0 };
        let y: Vec<f64> = losses.iter().map(|l| (l - mean) / sd).collect();
        let y_mean = y.iter().sum::<f64>() / n as f64;
        let signal_var = y.iter().map(|v| (v - y_mean).powi(2)).sum::<f64>() / n as f64;
        let signal_var = if signal_var > 0.0 { signal_var } else { 1.0 };
        let length_scale = median_pairwise_distance(&points).filter(|d| *d > 0.0).unwrap_or(1.0);

        let base = DMatrix::from_fn(n, n, |i, j| {
            sq_exp(&points[i], &points[j], length_scale, signal_var)
        });
        let mut jitter = noise.max(1e-12);
        let chol = loop {
            let mut k = base.clone();
            for i in 0..n {
                k[(i, i)] += jitter;
            }
            if let Some(c) = k.cholesky() {
                break c;
            }
            jitter *= 10.0;
            if jitter > 1e-2 * signal_var {
                return Err(SamplerError::SingularKernel(jitter));
            }
        };
        let yv = DVector::from_vec(y.clone());
        let alpha = chol.solve(&yv);
        let best = y.iter().cloned().fold(f64::INFINITY, f64::min);
        Ok(Self {
            points,
            chol,
            alpha,
            length_scale,
            signal_var,
            best,
        })
    }

    pub fn length_scale(&self) -> f64 {
        self.length_scale
    }

    /// Posterior mean and standard deviation in standardized loss units.
    pub fn predict(&self, x: &ParamVector) -> (f64, f64) {
        let k_star = DVector::from_iterator(
            self.points.len(),
            self.points
                .iter()
                .map(|p| sq_exp(p, x.as_slice(), self.length_scale, self.signal_var)),
        );
        let mu = k_star.dot(&self.alpha);
        let v = self
            .chol
            .l()
            .solve_lower_triangular(&k_star)
            .expect("cholesky factor has a positive diagonal");
        let var = (self.signal_var - v.dot(&v)).max(0.0);
        (mu, var.sqrt())
    }

    pub fn expected_improvement(&self, x: &ParamVector) -> f64 {
        let (mu, sigma) = self.predict(x);
        expected_improvement(mu, sigma, self.best)
    }
}

fn sq_exp(a: &[f64], b: &[f64], length_scale: f64, signal_var: f64) -> f64 {
    let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
    signal_var * (-0.5 * d2 / (length_scale * length_scale)).exp()
}

fn median_pairwise_distance(points: &[Vec<f64>]) -> Option<f64> {
    let mut d = Vec::with_capacity(points.len() * points.len().saturating_sub(1) / 2);
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            let d2: f64 = points[i].iter().zip(&points[j]).map(|(a, b)| (a - b).powi(2)).sum();
            d.push(d2.sqrt());
        }
    }
    if d.is_empty() {
        return None;
    }
    d.sort_by(f64::total_cmp);
    let mid = d.len() / 2;
    Some(if d.len() % 2 == 0 {
        0.5 * (d[mid - 1] + d[mid])
    } else {
        d[mid]
    })
}

fn external_propose(
    command: &CommandSpec,
    timeout: Duration,
    history: &TrialHistory,
    space: &SearchSpace,
) -> Result<ParamVector, SamplerError> {
    let trials: Vec<serde_json::Value> = history
        .trials()
        .iter()
        .map(|t| -> Result<_, SamplerError> {
            Ok(json!({ "params": space.decode(&t.params)?, "loss": t.loss }))
        })
        .collect::<Result<_, _>>()?;
    let request = json!({ "space": space, "history": trials });
    let reply = exchange_json(command, &request, timeout)?;
    let params: Assignment = reply
        .get("params")
        .cloned()
        .ok_or_else(|| ProcessError::Protocol("reply lacks \"params\"".into()))
        .and_then(|p| serde_json::from_value(p).map_err(|e| ProcessError::Protocol(e.to_string())))?;
    Ok(space.encode(&params)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::driver::Branch;
    use crate::space::ParamSpec;
    use rand::SeedableRng;

    fn unit_space(dim: usize) -> SearchSpace {
        SearchSpace::new((0..dim).map(|i| ParamSpec::continuous(format!("x{i}"), 0.0, 1.0)).collect())
            .unwrap()
    }

    fn history_from(points: Vec<(Vec<f64>, f64)>) -> TrialHistory {
        let mut h = TrialHistory::new();
        for (x, loss) in points {
            h.push(ParamVector(x), loss, Branch::Inner, false);
        }
        h
    }

    fn random_history(n: usize, dim: usize, seed: u64) -> TrialHistory {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        history_from(
            (0..n)
                .map(|_| {
                    let x: Vec<f64> = (0..dim).map(|_| rng.random::<f64>()).collect();
                    let loss = x.iter().map(|v| (v - 0.3).powi(2)).sum::<f64>() + 0.1 * rng.random::<f64>();
                    (x, loss)
                })
                .collect(),
        )
    }

    #[test]
    fn random_is_deterministic() {
        let space = unit_space(3);
        let h = random_history(7, 3, 1);
        let mut s = Sampler::new(SamplerConfig::Random, 42).unwrap();
        let a = s.propose(&h, &space).unwrap();
        let b = s.propose(&h, &space).unwrap();
        assert_eq!(a, b);
        let mut other = Sampler::new(SamplerConfig::Random, 43).unwrap();
        assert_ne!(a, other.propose(&h, &space).unwrap());
    }

    #[test]
    fn tpe_good_set_is_lowest_fifth() {
        let h = random_history(100, 2, 3);
        let (good, bad) = tpe_split(&h, 0.20);
        assert_eq!(good.len(), 20);
        assert_eq!(bad.len(), 80);
        let mut losses: Vec<f64> = h.trials().iter().map(|t| t.loss).collect();
        losses.sort_by(f64::total_cmp);
        let worst_good = good.iter().map(|&i| h.trials()[i].loss).fold(f64::MIN, f64::max);
        assert_eq!(worst_good, losses[19]);
        assert!(bad.iter().all(|&i| h.trials()[i].loss >= losses[20]));
    }

    #[test]
    fn tpe_split_sizes_round_up() {
        for (n, want) in [(10, 2), (11, 3), (35, 7), (1, 1)] {
            let h = random_history(n, 1, n as u64);
            assert_eq!(tpe_split(&h, 0.2).0.len(), want, "n={n}");
        }
    }

    #[test]
    fn tpe_score_invariant_to_loss_shift() {
        let space = unit_space(2);
        let h = random_history(40, 2, 9);
        let shifted = history_from(h.trials().iter().map(|t| (t.params.0.clone(), t.loss + 123.0)).collect());
        let mut a = Sampler::new(SamplerConfig::tpe(), 5).unwrap();
        let mut b = Sampler::new(SamplerConfig::tpe(), 5).unwrap();
        assert_eq!(a.propose(&h, &space).unwrap(), b.propose(&shifted, &space).unwrap());
        let (g1, _) = tpe_split(&h, 0.2);
        let (g2, _) = tpe_split(&shifted, 0.2);
        assert_eq!(g1, g2);
    }

    #[test]
    fn tpe_concentrates_near_good_region() {
        let space = unit_space(1);
        let h = random_history(60, 1, 11);
        let mut s = Sampler::new(SamplerConfig::tpe(), 0).unwrap();
        let mean: f64 = (0..50)
            .map(|i| {
                s.seed = i;
                s.propose(&h, &space).unwrap()[0]
            })
            .sum::<f64>()
            / 50.0;
        assert!((mean - 0.3).abs() < 0.15, "{mean}");
    }

    #[test]
    fn parzen_bandwidth_floor() {
        let space = unit_space(1);
        let p = ParamVector(vec![0.5]);
        let est = Parzen::fit(&[&p, &p, &p], &space);
        assert_eq!(est.bandwidths()[0], 1e-3);
    }

    #[test]
    fn bayes_startup_is_uniform() {
        let space = unit_space(1);
        let h = random_history(5, 1, 2);
        let bins = 10;
        let draws = 1000;
        let mut counts = vec![0usize; bins];
        for seed in 0..draws {
            let mut s = Sampler::new(SamplerConfig::bayes(), seed).unwrap();
            let x = s.propose(&h, &space).unwrap()[0];
            counts[((x * bins as f64) as usize).min(bins - 1)] += 1;
        }
        let expected = draws as f64 / bins as f64;
        let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
        // chi-square critical value, 9 degrees of freedom, p = 0.001
        assert!(chi2 < 27.877, "chi2 = {chi2}");
    }

    #[test]
    fn expected_improvement_properties() {
        assert_eq!(expected_improvement(0.0, 0.0, 0.0), 0.0);
        assert_eq!(expected_improvement(-1.0, 0.0, 0.0), 1.0);
        // closed form at z = 0: sigma * phi(0)
        let ei = expected_improvement(1.0, 2.0, 1.0);
        assert!((ei - 2.0 / (2.0 * std::f64::consts::PI).sqrt()).abs() < 1e-12);
        // against an independent quadrature of E[max(best - Y, 0)]
        for (mu, sigma, best) in [(0.3, 0.7, 0.1), (-0.5, 1.3, 0.2), (2.0, 0.4, 0.0)] {
            let n = 200_000;
            let (lo, hi) = (mu - 12.0 * sigma, mu + 12.0 * sigma);
            let h = (hi - lo) / n as f64;
            let quad: f64 = (0..n)
                .map(|i| {
                    let y = lo + h * (i as f64 + 0.5);
                    let z = (y - mu) / sigma;
                    (best - y).max(0.0) * norm_pdf(z) / sigma * h
                })
                .sum();
            let ei = expected_improvement(mu, sigma, best);
            assert!((ei - quad).abs() < 1e-6, "{ei} vs {quad}");
        }
        assert!((norm_cdf(0.0) - 0.5).abs() < 1e-15);
        assert!((norm_cdf(1.959_963_984_540_054) - 0.975).abs() < 1e-9);
    }

    #[test]
    fn gp_interpolates_and_incumbent_has_no_ei() {
        let h = random_history(25, 2, 4);
        let model = GpModel::fit(&h, 1e-10).unwrap();
        let best_trial = h.best().unwrap();
        let (_, sigma) = model.predict(&best_trial.params);
        assert!(sigma < 1e-3, "{sigma}");
        assert!(model.expected_improvement(&best_trial.params) < 1e-3);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..200 {
            let x = unit_space(2).sample_uniform(&mut rng);
            assert!(model.expected_improvement(&x) >= 0.0);
        }
    }

    #[test]
    fn bayes_proposes_after_startup() {
        let space = unit_space(2);
        let h = random_history(30, 2, 8);
        let mut s = Sampler::new(SamplerConfig::bayes(), 1).unwrap();
        let a = s.propose(&h, &space).unwrap();
        let b = s.propose(&h, &space).unwrap();
        assert_eq!(a, b);
        assert!(space.contains(&a));
    }

    #[test]
    fn gp_handles_duplicate_points() {
        let h = history_from(vec![(vec![0.5], 1.0); 30]);
        assert!(GpModel::fit(&h, 1e-6).is_ok());
    }

    #[test]
    fn proposals_stay_in_box() {
        let space = SearchSpace::new(vec![
            ParamSpec::continuous("a", -3.0, 2.0),
            ParamSpec::integer("b", 1, 5),
            ParamSpec::categorical("c", ["x", "y", "z"]),
        ])
        .unwrap();
        for config in [SamplerConfig::Random, SamplerConfig::tpe(), SamplerConfig::bayes()] {
            let mut sampler = Sampler::new(config.clone(), 77).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(3);
            for round in 0..10 {
                let h = history_from(
                    (0..25 + round)
                        .map(|_| {
                            let x = space.sample_uniform(&mut rng);
                            let l = x[0].powi(2) + rng.random::<f64>();
                            (x.0, l)
                        })
                        .collect(),
                );
                // Bayes refits a GP per history; fewer draws keep this fast
                let draws = if matches!(config, SamplerConfig::Bayes { .. }) { 100 } else { 1000 };
                for s in 0..draws {
                    sampler.seed = s;
                    let x = sampler.propose(&h, &space).unwrap();
                    assert!(space.contains(&x), "{config:?} proposed {x:?}");
                }
            }
        }
    }

    #[test]
    fn config_validation_and_serde() {
        assert!(Sampler::new(SamplerConfig::Tpe { gamma: 0.0, n_candidates: 10, n_startup: 10 }, 0).is_err());
        assert!(Sampler::new(SamplerConfig::Bayes { n_startup: 20, n_candidates: 0, noise: 1e-6 }, 0).is_err());
        let c: SamplerConfig = serde_json::from_str(r#"{"kind": "tpe"}"#).unwrap();
        assert_eq!(c, SamplerConfig::tpe());
        let c: SamplerConfig = serde_json::from_str(r#"{"kind": "bayes", "noise": 1e-4}"#).unwrap();
        assert!(matches!(c, SamplerConfig::Bayes { n_startup: 20, noise, .. } if noise == 1e-4));
        assert!(serde_json::from_str::<SamplerConfig>(r#"{"kind": "tpe", "bogus": 1}"#).is_err());
    }

    #[test]
    fn external_sampler_protocol() {
        let space = unit_space(1);
        let h = random_history(3, 1, 0);
        let cmd = CommandSpec::Shell(
            r#"read req; case "$req" in *'"history":[{'*) echo '{"params": {"x0": 0.25}}';; *) exit 4;; esac"#
                .into(),
        );
        let mut s = Sampler::new(SamplerConfig::External { command: cmd, timeout_s: 10.0 }, 0).unwrap();
        assert_eq!(s.propose(&h, &space).unwrap(), ParamVector(vec![0.25]));
        let bad = CommandSpec::Shell("read req; echo '{\"params\": {\"x0\": 7}}'".into());
        let mut s = Sampler::new(SamplerConfig::External { command: bad, timeout_s: 10.0 }, 0).unwrap();
        assert!(matches!(s.propose(&h, &space), Err(SamplerError::Space(_))));
    }
}
