//! Configuration, seeding, and orchestration of experiments and bound
//! verification runs.
//!
//! Trials are independent and run in parallel over `(n, trial)` pairs.
//! Each trial's seed is derived from the master seed, `n`, and the trial
//! index, and results are collected in grid order, so outputs do not depend
//! on the number of threads.

mod bounds;
mod config;
mod pipeline;

use std::fs;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use bounds::{random_psd_pair, verify_bounds, BoundsReport, PassRate};
pub use config::{DimRule, ExperimentConfig, OracleConfig, RhoRule};
pub use pipeline::{run_pipeline, Experiment, StageTimings, TrialRecord};

use crate::classify::BayesEstimate;
use crate::error::Result;

/// Evaluation protocol note written into every summary.
pub const PROTOCOL: &str = "all vertices are embedded jointly; the classifier is trained on the \
first (1 - test_fraction) share of vertices (optionally only a label_fraction of them) and \
evaluated on the remaining held-out vertices";

/// A trial that failed, with the failing stage in `error`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialFailure {
    pub n: usize,
    pub trial: usize,
    pub seed: u64,
    pub error: String,
    pub numerical: bool,
}

/// Aggregates over the trials at one n.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub n: usize,
    pub trials: usize,
    pub failures: usize,
    pub mean_test_error: f64,
    pub std_test_error: f64,
    pub mean_train_error: f64,
    pub mean_test_phi_risk: f64,
    pub mean_selected_d: f64,
    pub dim_fallbacks: usize,
    pub mean_point_error: Option<f64>,
    /// Share of trials (with a defined bound) in which the embedding bound held.
    pub embedding_bound_pass_rate: Option<f64>,
}

/// All trial outcomes of an experiment plus per-n aggregates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub records: Vec<TrialRecord>,
    pub failures: Vec<TrialFailure>,
    pub summary: Vec<SummaryRow>,
    pub bayes: Option<BayesEstimate>,
}

/// Run every `(n, trial)` pair of the grid. Failed trials are recorded and
/// the run continues.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    let exp = Experiment::new(cfg.clone())?;
    let jobs: Vec<(usize, usize)> = cfg
        .n_grid
        .iter()
        .flat_map(|&n| (0..cfg.trials).map(move |t| (n, t)))
        .collect();
    let outcomes: Vec<(usize, usize, Result<TrialRecord>)> = jobs
        .par_iter()
        .map(|&(n, t)| (n, t, exp.run_trial(n, t)))
        .collect();

    let mut records = Vec::new();
    let mut failures = Vec::new();
    for (n, trial, outcome) in outcomes {
        match outcome {
            Ok(r) => records.push(r),
            Err(e) => {
                log::warn!("trial {trial} at n = {n} failed: {e}");
                failures.push(TrialFailure {
                    n,
                    trial,
                    seed: exp.trial_seed(n, trial),
                    numerical: e.is_numerical(),
                    error: e.to_string(),
                });
            }
        }
    }
    let summary = cfg
        .n_grid
        .iter()
        .map(|&n| summarize(n, &records, &failures))
        .collect();
    Ok(ExperimentResult {
        records,
        failures,
        summary,
        bayes: exp.bayes,
    })
}

fn mean(xs: impl Iterator<Item = f64>) -> Option<f64> {
    let v: Vec<f64> = xs.collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

fn summarize(n: usize, records: &[TrialRecord], failures: &[TrialFailure]) -> SummaryRow {
    let rs: Vec<&TrialRecord> = records.iter().filter(|r| r.n == n).collect();
    let m = rs.len() as f64;
    let errs: Vec<f64> = rs.iter().map(|r| r.test.zero_one_error).collect();
    let mean_test = mean(errs.iter().copied()).unwrap_or(f64::NAN);
    let std_test = if rs.len() > 1 {
        (errs.iter().map(|e| (e - mean_test).powi(2)).sum::<f64>() / (m - 1.0)).sqrt()
    } else {
        0.0
    };
    let bounds: Vec<bool> = rs
        .iter()
        .filter_map(|r| r.embedding_bound.as_ref().map(|b| b.holds))
        .collect();
    SummaryRow {
        n,
        trials: rs.len(),
        failures: failures.iter().filter(|f| f.n == n).count(),
        mean_test_error: mean_test,
        std_test_error: std_test,
        mean_train_error: mean(rs.iter().map(|r| r.train.zero_one_error)).unwrap_or(f64::NAN),
        mean_test_phi_risk: mean(rs.iter().map(|r| r.test.phi_risk)).unwrap_or(f64::NAN),
        mean_selected_d: mean(rs.iter().map(|r| r.selected_d as f64)).unwrap_or(f64::NAN),
        dim_fallbacks: rs.iter().filter(|r| r.dim_fallback).count(),
        mean_point_error: if rs.iter().all(|r| r.mean_point_error.is_some()) {
            mean(rs.iter().filter_map(|r| r.mean_point_error))
        } else {
            None
        },
        embedding_bound_pass_rate: mean(bounds.iter().map(|&b| if b { 1.0 } else { 0.0 })),
    }
}

#[derive(Serialize)]
struct TrialRow {
    n: usize,
    trial: usize,
    seed: u64,
    rho: f64,
    selected_d: usize,
    dim_fallback: bool,
    gap_estimate: Option<f64>,
    embedding_frobenius_error: Option<f64>,
    mean_point_error: Option<f64>,
    embedding_bound_lhs: Option<f64>,
    embedding_bound_rhs: Option<f64>,
    embedding_bound_holds: Option<bool>,
    n_train_labeled: usize,
    train_phi_risk: f64,
    train_error: f64,
    n_test: usize,
    test_phi_risk: f64,
    test_error: f64,
    bayes_l_star: Option<f64>,
}

#[derive(Serialize)]
struct TimingRow {
    n: usize,
    trial: usize,
    sample_latents: f64,
    sample_adjacency: f64,
    eigendecompose: f64,
    select_dimension: f64,
    spectral_embed: f64,
    train: f64,
    evaluate: f64,
    oracle: f64,
    total: f64,
}

#[derive(Serialize)]
struct Summary<'a> {
    protocol: &'static str,
    config: &'a ExperimentConfig,
    bayes: Option<BayesEstimate>,
    summary: &'a [SummaryRow],
    failures: &'a [TrialFailure],
}

impl ExperimentResult {
    /// One CSV row per successful trial. Deterministic for a fixed config.
    pub fn write_trials_csv(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for r in &self.records {
            let b = r.embedding_bound.as_ref();
            w.serialize(TrialRow {
                n: r.n,
                trial: r.trial,
                seed: r.seed,
                rho: r.rho,
                selected_d: r.selected_d,
                dim_fallback: r.dim_fallback,
                gap_estimate: r.gap_estimate,
                embedding_frobenius_error: r.embedding_frobenius_error,
                mean_point_error: r.mean_point_error,
                embedding_bound_lhs: b.map(|b| b.lhs),
                embedding_bound_rhs: b.map(|b| b.rhs),
                embedding_bound_holds: b.map(|b| b.holds),
                n_train_labeled: r.n_train_labeled,
                train_phi_risk: r.train.phi_risk,
                train_error: r.train.zero_one_error,
                n_test: r.test.n_eval,
                test_phi_risk: r.test.phi_risk,
                test_error: r.test.zero_one_error,
                bayes_l_star: r.bayes_l_star,
            })?;
        }
        w.flush()?;
        Ok(())
    }

    /// Per-stage wall-clock times; kept apart from the deterministic tables.
    pub fn write_timings_csv(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for r in &self.records {
            let t = r.timings;
            w.serialize(TimingRow {
                n: r.n,
                trial: r.trial,
                sample_latents: t.sample_latents,
                sample_adjacency: t.sample_adjacency,
                eigendecompose: t.eigendecompose,
                select_dimension: t.select_dimension,
                spectral_embed: t.spectral_embed,
                train: t.train,
                evaluate: t.evaluate,
                oracle: t.oracle,
                total: t.total,
            })?;
        }
        w.flush()?;
        Ok(())
    }

    /// The summary table with configuration and protocol metadata.
    pub fn summary_json(&self, cfg: &ExperimentConfig) -> Result<String> {
        Ok(serde_json::to_string_pretty(&Summary {
            protocol: PROTOCOL,
            config: cfg,
            bayes: self.bayes,
            summary: &self.summary,
            failures: &self.failures,
        })?)
    }

    /// Write `trials.csv`, `timings.csv`, and `summary.json` into `dir`.
    pub fn write_outputs(&self, cfg: &ExperimentConfig, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        self.write_trials_csv(fs::File::create(dir.join("trials.csv"))?)?;
        self.write_timings_csv(fs::File::create(dir.join("timings.csv"))?)?;
        fs::write(dir.join("summary.json"), self.summary_json(cfg)? + "\n")?;
        Ok(())
    }
}
