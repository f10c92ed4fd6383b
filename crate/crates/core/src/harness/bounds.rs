use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, RhoRule};
use crate::align::{
    check_embedding_bound, check_opnorm_bound, check_procrustes_lemma, check_projection_bound,
    check_projector_bound, check_spectra_bound, BoundCheck, BoundName,
};
use crate::error::{Error, Result};
use crate::graphgen::{sample_adjacency, sample_latents, AdjacencyMatrix};
use crate::kernels::{kernel_matrix, operator_spectrum, KernelMatrix, OperatorSpectrum};
use crate::rng::{self, Purpose};

/// Pass statistics of one bound at one n.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PassRate {
    pub name: BoundName,
    pub n: usize,
    pub trials: usize,
    /// Trials whose sample-size hypothesis failed; excluded from the rate.
    pub hypothesis_not_met: usize,
    /// Trials where the check itself could not be evaluated.
    pub errors: usize,
    pub holds: usize,
    /// holds / (trials − hypothesis_not_met − errors).
    pub pass_rate: Option<f64>,
    pub mean_slack_ratio: Option<f64>,
}

/// Every individual check plus the per-(bound, n) pass rates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsReport {
    pub checks: Vec<BoundCheck>,
    pub errors: Vec<String>,
    pub table: Vec<PassRate>,
}

impl BoundsReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// A random pair of PSD matrices of equal rank `d ≤ 5` and size `n ≤ 50`,
/// `A = XXᵀ` and `B = (X + E)(X + E)ᵀ` with Gaussian X and a perturbation E
/// whose scale is log-uniform in [1e-3, 1]. Returns `(A, B, d)`.
pub fn random_psd_pair(seed: u64) -> (DMatrix<f64>, DMatrix<f64>, usize) {
    let mut rng = rng::stream(rng::sub_seed(seed, Purpose::Lemma), 0);
    loop {
        let d = rng.random_range(1..=5usize);
        let n = rng.random_range(d.max(2)..=50usize);
        let x = DMatrix::from_fn(n, d, |_, _| rng.sample::<f64, _>(StandardNormal));
        let scale = 10f64.powf(rng.random_range(-3.0..0.0));
        let y = &x + DMatrix::from_fn(n, d, |_, _| scale * rng.sample::<f64, _>(StandardNormal));
        let well_conditioned = |m: &DMatrix<f64>| {
            let s = m.singular_values();
            s.min() > 1e-3 * s.max()
        };
        if well_conditioned(&x) && well_conditioned(&y) {
            return (&x * x.transpose(), &y * y.transpose(), d);
        }
    }
}

struct Trial {
    n: usize,
    seed: u64,
    checks: Vec<BoundCheck>,
    errors: Vec<(BoundName, String)>,
}

/// Evaluate the named bounds over the config's n grid and trials.
///
/// Graph-based bounds use the config's sparsity rule, except `embedding`
/// (always dense, ρ = 1) and `sparse_embedding` (the config's rule if it is
/// sparse, ρ = (log n)²/n otherwise).
pub fn verify_bounds(cfg: &ExperimentConfig, which: &[BoundName]) -> Result<BoundsReport> {
    cfg.validate()?;
    let mut which = which.to_vec();
    which.sort();
    which.dedup();
    if which.is_empty() {
        return Ok(BoundsReport {
            checks: Vec::new(),
            errors: Vec::new(),
            table: Vec::new(),
        });
    }
    let needs_oracle = which.iter().any(|b| {
        !matches!(b, BoundName::OperatorNorm | BoundName::ProcrustesLemma)
    });
    let oracle = if needs_oracle {
        let d_max = cfg.oracle.d_max.max(cfg.bound_dim + 1);
        Some(
            operator_spectrum(&cfg.kernel, &cfg.dist, cfg.oracle_m(), d_max)
                .map_err(|e| e.in_stage("oracle"))?,
        )
    } else {
        None
    };

    let jobs: Vec<(usize, usize)> = cfg
        .n_grid
        .iter()
        .flat_map(|&n| (0..cfg.trials).map(move |t| (n, t)))
        .collect();
    let trials: Vec<Trial> = jobs
        .par_iter()
        .map(|&(n, t)| {
            let seed = rng::derive_seed(cfg.seed, &[n as u64, t as u64]);
            run_checks(cfg, &which, oracle.as_ref(), n, seed)
        })
        .collect::<Result<_>>()?;

    let mut table = Vec::new();
    for &name in &which {
        for &n in &cfg.n_grid {
            let of_n: Vec<&Trial> = trials.iter().filter(|t| t.n == n).collect();
            let checks: Vec<&BoundCheck> = of_n
                .iter()
                .flat_map(|t| t.checks.iter().filter(|c| c.name == name))
                .collect();
            let errors = of_n
                .iter()
                .flat_map(|t| t.errors.iter().filter(|(b, _)| *b == name))
                .count();
            let counted: Vec<&&BoundCheck> = checks.iter().filter(|c| c.hypothesis_met).collect();
            let holds = counted.iter().filter(|c| c.holds).count();
            let rate = (!counted.is_empty()).then(|| holds as f64 / counted.len() as f64);
            let slack = (!counted.is_empty()).then(|| {
                counted.iter().map(|c| c.slack_ratio()).sum::<f64>() / counted.len() as f64
            });
            table.push(PassRate {
                name,
                n,
                trials: of_n.len(),
                hypothesis_not_met: checks.len() - counted.len(),
                errors,
                holds,
                pass_rate: rate,
                mean_slack_ratio: slack,
            });
        }
    }
    let errors = trials
        .iter()
        .flat_map(|t| {
            t.errors
                .iter()
                .map(move |(b, e)| format!("{b} at n = {}, seed {}: {e}", t.n, t.seed))
        })
        .collect();
    Ok(BoundsReport {
        checks: trials.into_iter().flat_map(|t| t.checks).collect(),
        errors,
        table,
    })
}

fn run_checks(
    cfg: &ExperimentConfig,
    which: &[BoundName],
    oracle: Option<&OperatorSpectrum>,
    n: usize,
    seed: u64,
) -> Result<Trial> {
    let mut trial = Trial {
        n,
        seed,
        checks: Vec::new(),
        errors: Vec::new(),
    };
    let graph_bounds = which.iter().any(|b| *b != BoundName::ProcrustesLemma);
    let (points, k) = if graph_bounds {
        let s = sample_latents(&cfg.dist, n, seed)?;
        let k = kernel_matrix(&cfg.kernel, &s.points)?;
        (Some(s.points), Some(k))
    } else {
        (None, None)
    };
    let sample = |rho: f64, k: &KernelMatrix| -> Result<AdjacencyMatrix> {
        // Distinct graphs for distinct ρ, same latent positions.
        sample_adjacency(k, rho, rng::derive_seed(seed, &[rho.to_bits()]))
    };
    let d = cfg.bound_dim;
    let mut cfg_graph: Option<AdjacencyMatrix> = None;
    for &name in which {
        let outcome = (|| -> Result<BoundCheck> {
            let (Some(points), Some(k)) = (&points, &k) else {
                let (a, b, d) = random_psd_pair(seed);
                return check_procrustes_lemma(&a, &b, d);
            };
            let oracle = || oracle.ok_or_else(|| Error::arg("oracle spectrum unavailable"));
            let mut cfg_a = || -> Result<AdjacencyMatrix> {
                if cfg_graph.is_none() {
                    cfg_graph = Some(sample(cfg.rho_rule.rho(n), k)?);
                }
                Ok(cfg_graph.clone().unwrap())
            };
            match name {
                BoundName::OperatorNorm => check_opnorm_bound(&cfg_a()?, k, cfg.eta),
                BoundName::Projection => check_projection_bound(&cfg_a()?, k, oracle()?, d, cfg.eta),
                BoundName::Embedding => {
                    check_embedding_bound(&sample(1.0, k)?, oracle()?, points, d, cfg.eta)
                        .map(|(c, _)| c)
                }
                BoundName::SparseEmbedding => {
                    let rho = match cfg.rho_rule.rho(n) {
                        r if r < 1.0 => r,
                        _ => RhoRule::LogSquaredOverN.rho(n),
                    };
                    check_embedding_bound(&sample(rho, k)?, oracle()?, points, d, cfg.eta)
                        .map(|(c, _)| c)
                }
                BoundName::Spectra => check_spectra_bound(k, oracle()?, cfg.tau),
                BoundName::Projector => check_projector_bound(k, points, oracle()?, d, cfg.tau),
                BoundName::ProcrustesLemma => {
                    let (a, b, d) = random_psd_pair(seed);
                    check_procrustes_lemma(&a, &b, d)
                }
            }
        })();
        match outcome {
            Ok(c) => trial.checks.push(c.with_seed(seed)),
            Err(e) => trial.errors.push((name, e.to_string())),
        }
    }
    Ok(trial)
}
