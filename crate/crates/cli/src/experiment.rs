//! Seeded experiment execution and result files.
//!
//! Every method runs on every seed. Seeds run in parallel and rows are
//! written in seed order afterwards, so output files do not depend on
//! scheduling. Regret uses the lowest loss seen by any run of the
//! experiment as its reference.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use indexmap::IndexMap;
use log::info;
use serde::{Deserialize, Serialize};

use homopt::metrics::{self, mean_and_se, mean_trace, percent_improvement, regret_svg, SvgSeries};
use homopt::{parallel, run, Assignment, Branch, ImprovementSummary, TrialEvent};

use crate::config::{Method, RunConfig};
use crate::CliError;

/// One row of a trials CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRow {
    pub run_id: String,
    pub seed: u64,
    pub method: String,
    pub trial_index: usize,
    pub branch: Branch,
    pub loss: f64,
    pub best_so_far: f64,
    pub regret: f64,
    pub elapsed_s: f64,
}

pub const CSV_HEADER: &str = "run_id,seed,method,trial_index,branch,loss,best_so_far,regret,elapsed_s";

#[derive(Debug, Clone)]
pub struct SeedRun {
    pub seed: u64,
    pub events: Vec<TrialEvent>,
}

impl SeedRun {
    pub fn losses(&self) -> Vec<f64> {
        self.events.iter().map(|e| e.loss).collect()
    }

    pub fn best(&self) -> Option<&TrialEvent> {
        self.events
            .iter()
            .reduce(|best, e| if e.loss < best.loss { e } else { best })
    }
}

#[derive(Debug, Clone)]
pub struct MethodRuns {
    pub method: Method,
    pub runs: Vec<SeedRun>,
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub objective: String,
    pub trials: usize,
    pub methods: Vec<MethodRuns>,
    /// Pooled minimum over every trial of every run.
    pub global_min: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SeedSummary {
    pub seed: u64,
    pub final_best: f64,
    pub argmin: Assignment,
    pub failed_trials: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct MethodSummary {
    pub method: String,
    pub final_best_mean: f64,
    pub final_best_se: f64,
    pub auc_mean: f64,
    pub auc_se: f64,
    /// Lowest loss over all seeds and where it was found.
    pub best: SeedSummary,
    pub per_seed: Vec<SeedSummary>,
    pub mean_regret: Vec<f64>,
    pub regret_se: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub objective: String,
    pub trials: usize,
    pub global_min: f64,
    pub methods: Vec<MethodSummary>,
    /// Augmented versus bare base sampler, when both ran.
    pub percent_improvement: Option<ImprovementSummary>,
}

/// Runs every configured method on every seed.
pub fn execute(cfg: &RunConfig) -> Result<ExperimentResult, CliError> {
    cfg.validate()?;
    let objective = cfg.build_objective()?;
    let mut methods = Vec::new();
    for method in cfg.methods() {
        let drivers = cfg
            .seeds
            .iter()
            .map(|&seed| cfg.driver_config(method, seed))
            .collect::<Result<Vec<_>, _>>()?;
        info!("running {method} on {} seeds", drivers.len());
        let outcomes = parallel::map(&drivers, |d| run(objective.as_ref(), d));
        let mut runs = Vec::with_capacity(outcomes.len());
        for (d, outcome) in drivers.iter().zip(outcomes) {
            runs.push(SeedRun {
                seed: d.seed,
                events: outcome?.events,
            });
        }
        methods.push(MethodRuns { method, runs });
    }
    let all: Vec<Vec<f64>> = methods.iter().flat_map(|m| m.runs.iter().map(SeedRun::losses)).collect();
    let global_min = metrics::pooled_minimum(all.iter().map(Vec::as_slice)).unwrap_or(0.0);
    Ok(ExperimentResult {
        objective: objective.name().to_string(),
        trials: cfg.trials,
        methods,
        global_min,
    })
}

impl ExperimentResult {
    pub fn rows(&self, method: &MethodRuns) -> Vec<TrialRow> {
        let name = method.method.to_string();
        method
            .runs
            .iter()
            .flat_map(|r| {
                let run_id = format!("{}-s{}", method.method.slug(), r.seed);
                let name = name.clone();
                r.events.iter().map(move |e| TrialRow {
                    run_id: run_id.clone(),
                    seed: r.seed,
                    method: name.clone(),
                    trial_index: e.index,
                    branch: e.branch,
                    loss: e.loss,
                    best_so_far: e.best_so_far,
                    regret: e.best_so_far - self.global_min,
                    elapsed_s: e.elapsed_s,
                })
            })
            .collect()
    }

    fn regret_traces(&self, method: &MethodRuns) -> Result<Vec<Vec<f64>>, CliError> {
        method
            .runs
            .iter()
            .map(|r| Ok(metrics::regret(&r.losses(), self.global_min)?.per_iteration))
            .collect()
    }

    pub fn summary(&self) -> Result<Summary, CliError> {
        let mut methods = Vec::new();
        for m in &self.methods {
            let traces = self.regret_traces(m)?;
            let per_seed: Vec<SeedSummary> = m
                .runs
                .iter()
                .map(|r| {
                    let best = r.best().expect("runs hold at least one trial");
                    SeedSummary {
                        seed: r.seed,
                        final_best: best.loss,
                        argmin: best.params.clone(),
                        failed_trials: r.events.iter().filter(|e| e.failed).count(),
                    }
                })
                .collect();
            let finals: Vec<f64> = per_seed.iter().map(|s| s.final_best).collect();
            let aucs: Vec<f64> = traces.iter().map(|t| metrics::area_under_curve(t)).collect();
            let (final_best_mean, final_best_se) = mean_and_se(&finals);
            let (auc_mean, auc_se) = mean_and_se(&aucs);
            let mean_regret = mean_trace(&traces);
            let regret_se = (0..mean_regret.len())
                .map(|t| mean_and_se(&traces.iter().map(|tr| tr[t]).collect::<Vec<_>>()).1)
                .collect();
            let best = per_seed
                .iter()
                .reduce(|a, b| if b.final_best < a.final_best { b } else { a })
                .expect("at least one seed")
                .clone();
            methods.push(MethodSummary {
                method: m.method.to_string(),
                final_best_mean,
                final_best_se,
                auc_mean,
                auc_se,
                best,
                per_seed,
                mean_regret,
                regret_se,
            });
        }
        let percent_improvement = match self.methods.as_slice() {
            [aug, base] if aug.method.homopt && !base.method.homopt => {
                let finals = |m: &MethodRuns| -> Vec<f64> {
                    m.runs.iter().map(|r| r.best().expect("non-empty run").loss).collect()
                };
                percent_improvement(&finals(base), &finals(aug)).ok()
            }
            _ => None,
        };
        Ok(Summary {
            objective: self.objective.clone(),
            trials: self.trials,
            global_min: self.global_min,
            methods,
            percent_improvement,
        })
    }
}

/// Path of the trials CSV for `method` inside `dir`.
pub fn trials_path(dir: &Path, method: Method) -> PathBuf {
    dir.join(format!("trials_{}.csv", method.slug()))
}

pub fn write_rows<W: Write>(writer: W, rows: &[TrialRow]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(writer);
    for row in rows {
        w.serialize(row)?;
    }
    if rows.is_empty() {
        w.write_record(CSV_HEADER.split(','))?;
    }
    w.flush().map_err(CliError::io("csv output"))?;
    Ok(())
}

/// Writes one trials CSV per method, `summary.json`, and optionally
/// `regret.svg` into `dir`. Returns the files written.
pub fn write_outputs(result: &ExperimentResult, dir: &Path, svg: bool) -> Result<Vec<PathBuf>, CliError> {
    fs::create_dir_all(dir).map_err(CliError::io(dir))?;
    let mut written = Vec::new();
    for m in &result.methods {
        let path = trials_path(dir, m.method);
        let file = fs::File::create(&path).map_err(CliError::io(&path))?;
        write_rows(std::io::BufWriter::new(file), &result.rows(m))?;
        written.push(path);
    }
    let summary = result.summary()?;
    let path = dir.join("summary.json");
    let json = serde_json::to_string_pretty(&summary).expect("summaries always serialize");
    fs::write(&path, json + "\n").map_err(CliError::io(&path))?;
    written.push(path);
    if svg {
        let series: Vec<SvgSeries<'_>> = summary
            .methods
            .iter()
            .map(|m| SvgSeries {
                label: &m.method,
                mean: &m.mean_regret,
                se: &m.regret_se,
            })
            .collect();
        let path = dir.join("regret.svg");
        fs::write(&path, regret_svg(&series)).map_err(CliError::io(&path))?;
        written.push(path);
    }
    Ok(written)
}

/// Runs `cfg` and writes its results to `cfg.output`.
pub fn run_experiment(cfg: &RunConfig, svg: bool) -> Result<(ExperimentResult, Vec<PathBuf>), CliError> {
    let result = execute(cfg)?;
    let files = write_outputs(&result, &cfg.output, svg)?;
    Ok((result, files))
}

/// Reads trials CSVs and recomputes every row's regret against the lowest
/// loss across all of them.
pub fn recompute_regret(paths: &[PathBuf]) -> Result<Vec<TrialRow>, CliError> {
    let mut rows: Vec<TrialRow> = Vec::new();
    for path in paths {
        let mut reader = csv::Reader::from_path(path)?;
        for row in reader.deserialize() {
            rows.push(row?);
        }
    }
    // group rows by run, keeping first-seen run order and trial order
    let mut runs: IndexMap<String, Vec<TrialRow>> = IndexMap::new();
    for row in rows {
        runs.entry(row.run_id.clone()).or_default().push(row);
    }
    let losses: Vec<Vec<f64>> = runs.values().map(|r| r.iter().map(|t| t.loss).collect()).collect();
    let global_min = metrics::pooled_minimum(losses.iter().map(Vec::as_slice)).ok_or(homopt::MetricsError::Empty)?;
    let mut out = Vec::new();
    for (mut run, losses) in runs.into_values().zip(&losses) {
        run.sort_by_key(|t| t.trial_index);
        let trace = metrics::regret(losses, global_min)?;
        for (row, r) in run.iter_mut().zip(&trace.per_iteration) {
            row.best_so_far = r + global_min;
            row.regret = *r;
        }
        out.extend(run);
    }
    Ok(out)
}
