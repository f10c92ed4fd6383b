use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::config::{DimRule, ExperimentConfig};
use crate::align::{embedding_check, procrustes_align, BoundCheck};
use crate::classify::{
    bayes_oracle, evaluate_risks, minimize_phi_risk_with, BayesEstimate, OptimizerOptions,
    RiskReport,
};
use crate::error::Result;
use crate::graphgen::{sample_adjacency_from_kernel, sample_latents};
use crate::kernels::{operator_spectrum, FeatureMap, OperatorSpectrum};
use crate::rng::{self, Purpose};
use crate::spectral::{
    decompose_and_select, eigendecompose, embed_decomposition, gap_estimate, EigenCount,
};

/// Wall-clock seconds spent in each stage of one trial.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTimings {
    pub sample_latents: f64,
    pub sample_adjacency: f64,
    pub eigendecompose: f64,
    pub select_dimension: f64,
    pub spectral_embed: f64,
    pub train: f64,
    pub evaluate: f64,
    pub oracle: f64,
    pub total: f64,
}

/// Everything measured in one run of the pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub n: usize,
    pub trial: usize,
    pub seed: u64,
    pub rho: f64,
    pub selected_d: usize,
    /// True when the gap rule found no admissible dimension.
    pub dim_fallback: bool,
    pub gap_estimate: Option<f64>,
    /// ‖ζ W − Φ_d‖_F after Procrustes alignment, if the oracle is enabled.
    pub embedding_frobenius_error: Option<f64>,
    /// (1/n) Σ ‖ζ(X_i) W − Φ_d(X_i)‖.
    pub mean_point_error: Option<f64>,
    pub embedding_bound: Option<BoundCheck>,
    pub n_train_labeled: usize,
    pub train: RiskReport,
    pub test: RiskReport,
    pub bayes_l_star: Option<f64>,
    pub timings: StageTimings,
}

/// Shared, seed-independent state for the trials of one experiment.
#[derive(Debug)]
pub struct Experiment {
    pub cfg: ExperimentConfig,
    pub oracle: Option<OperatorSpectrum>,
    pub bayes: Option<BayesEstimate>,
}

impl Experiment {
    /// Validate the configuration and compute the oracle spectrum and the
    /// Bayes reference.
    pub fn new(cfg: ExperimentConfig) -> Result<Self> {
        cfg.validate()?;
        let oracle = if cfg.oracle.enabled {
            Some(
                operator_spectrum(&cfg.kernel, &cfg.dist, cfg.oracle_m(), cfg.oracle.d_max)
                    .map_err(|e| e.in_stage("oracle"))?,
            )
        } else {
            None
        };
        let bayes = if cfg.bayes_mc > 0 {
            Some(
                bayes_oracle(&cfg.dist, cfg.loss, cfg.bayes_mc, rng::derive_seed(cfg.seed, &[0xBA7E5]))
                    .map_err(|e| e.in_stage("bayes_oracle"))?,
            )
        } else {
            None
        };
        Ok(Self { cfg, oracle, bayes })
    }

    /// Seed of trial `trial` at size `n`.
    pub fn trial_seed(&self, n: usize, trial: usize) -> u64 {
        rng::derive_seed(self.cfg.seed, &[n as u64, trial as u64])
    }

    pub fn run_trial(&self, n: usize, trial: usize) -> Result<TrialRecord> {
        let mut rec = self.run_seed(n, self.trial_seed(n, trial))?;
        rec.trial = trial;
        Ok(rec)
    }

    /// Run the full pipeline for one graph drawn with `seed`.
    pub fn run_seed(&self, n: usize, seed: u64) -> Result<TrialRecord> {
        let cfg = &self.cfg;
        let start = Instant::now();
        let mut t = StageTimings::default();
        let secs = |d: Duration| d.as_secs_f64();

        let clock = Instant::now();
        let sample = sample_latents(&cfg.dist, n, seed).map_err(|e| e.in_stage("sample_latents"))?;
        t.sample_latents = secs(clock.elapsed());

        let clock = Instant::now();
        let rho = cfg.rho_rule.rho(n);
        let a = sample_adjacency_from_kernel(&cfg.kernel, &sample.points, rho, seed)
            .map_err(|e| e.in_stage("sample_adjacency"))?;
        t.sample_adjacency = secs(clock.elapsed());

        let clock = Instant::now();
        let (decomp, d, fallback) = match cfg.dim_rule {
            DimRule::Fixed(d) => {
                let decomp = eigendecompose(&a, EigenCount::Top((d + 1).min(n)))
                    .map_err(|e| e.in_stage("eigendecompose"))?;
                (decomp, d, false)
            }
            DimRule::Gap { epsilon } => {
                let (decomp, s) = decompose_and_select(&a, cfg.loss, epsilon, cfg.dim_constant)
                    .map_err(|e| e.in_stage("select_dimension"))?;
                (decomp, s.d, s.fallback)
            }
        };
        t.eigendecompose = secs(clock.elapsed());

        let clock = Instant::now();
        let gap = gap_estimate(&decomp, d).ok().map(|g| g.value);
        t.select_dimension = secs(clock.elapsed());

        let clock = Instant::now();
        let embedding =
            embed_decomposition(&decomp, d, rho).map_err(|e| e.in_stage("spectral_embed"))?;
        t.spectral_embed = secs(clock.elapsed());

        let clock = Instant::now();
        let n_test = ((cfg.test_fraction * n as f64).round() as usize).clamp(1, n - 1);
        let n_train = n - n_test;
        let n_labeled = ((cfg.label_fraction * n_train as f64).ceil() as usize).clamp(1, n_train);
        let train_idx: Vec<usize> = (0..n_labeled).collect();
        let test_idx: Vec<usize> = (n_train..n).collect();
        let z_train = embedding.select_rows(&train_idx);
        let y_train = &sample.labels[..n_labeled];
        let opts = OptimizerOptions {
            seed: rng::sub_seed(seed, Purpose::Optimizer),
            ..OptimizerOptions::default()
        };
        let radius = cfg.radius.unwrap_or(d as f64);
        let classifier = minimize_phi_risk_with(&z_train, y_train, cfg.loss, radius, &opts)
            .map_err(|e| e.in_stage("train"))?;
        t.train = secs(clock.elapsed());

        let clock = Instant::now();
        let train = evaluate_risks(&classifier, &z_train, y_train, cfg.loss)
            .map_err(|e| e.in_stage("evaluate"))?;
        let z_test = embedding.select_rows(&test_idx);
        let test = evaluate_risks(&classifier, &z_test, &sample.labels[n_train..], cfg.loss)
            .map_err(|e| e.in_stage("evaluate"))?;
        t.evaluate = secs(clock.elapsed());

        let clock = Instant::now();
        let (mut frob, mut mean_err, mut bound) = (None, None, None);
        if let Some(oracle) = &self.oracle {
            match oracle_errors(oracle, &embedding, &sample.points, d, n, rho, cfg.eta) {
                Ok((f, m, b)) => {
                    frob = Some(f);
                    mean_err = Some(m);
                    bound = b.map(|b| b.with_seed(seed));
                }
                Err(e) => log::warn!("oracle comparison skipped at n = {n}, d = {d}: {e}"),
            }
        }
        t.oracle = secs(clock.elapsed());
        t.total = secs(start.elapsed());

        Ok(TrialRecord {
            n,
            trial: 0,
            seed,
            rho,
            selected_d: d,
            dim_fallback: fallback,
            gap_estimate: gap,
            embedding_frobenius_error: frob,
            mean_point_error: mean_err,
            embedding_bound: bound,
            n_train_labeled: n_labeled,
            train,
            test,
            bayes_l_star: self.bayes.map(|b| b.l_star),
            timings: t,
        })
    }
}

/// Aligned Frobenius and mean per-point errors against Φ_d, plus the
/// embedding bound when the oracle gap at `d` is positive.
fn oracle_errors(
    oracle: &OperatorSpectrum,
    embedding: &crate::spectral::Embedding,
    points: &crate::points::PointSet,
    d: usize,
    n: usize,
    rho: f64,
    eta: f64,
) -> Result<(f64, f64, Option<BoundCheck>)> {
    let target = FeatureMap::new(oracle, d)?.eval_many(points)?;
    let al = procrustes_align(embedding.rows(), &target)?;
    let bound = match oracle.gap(d) {
        Ok(delta) if delta > 0.0 => Some(embedding_check(al.frobenius_error, delta, d, n, eta, rho)),
        _ => None,
    };
    Ok((al.frobenius_error, al.mean_point_error(), bound))
}

/// Run one trial of `cfg` at size `n` with an explicit seed.
pub fn run_pipeline(cfg: &ExperimentConfig, n: usize, seed: u64) -> Result<TrialRecord> {
    let exp = Experiment::new(cfg.clone())?;
    exp.run_seed(n, seed)
}
