//! Norm-constrained linear classifiers trained by surrogate-risk
//! minimization, risk evaluation, and Bayes-risk references for synthetic
//! distributions.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graphgen::{sample_latents, DistributionSpec, Label};
use crate::rng::{self, Purpose};

/// Tolerance used for the first-order optimality test.
pub const KKT_TOL: f64 = 1e-6;

/// A convex, differentiable surrogate for the 0–1 loss with φ′(0) < 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SurrogateLoss {
    /// (1 − x)²
    Squared,
    /// e^{−x}
    Exponential,
    /// log₂(1 + e^{−x})
    Logistic,
}

impl SurrogateLoss {
    pub const ALL: [SurrogateLoss; 3] = [
        SurrogateLoss::Squared,
        SurrogateLoss::Exponential,
        SurrogateLoss::Logistic,
    ];

    pub fn phi(self, x: f64) -> f64 {
        match self {
            SurrogateLoss::Squared => (1.0 - x) * (1.0 - x),
            SurrogateLoss::Exponential => (-x).exp(),
            SurrogateLoss::Logistic => softplus(-x) / std::f64::consts::LN_2,
        }
    }

    pub fn derivative(self, x: f64) -> f64 {
        match self {
            SurrogateLoss::Squared => -2.0 * (1.0 - x),
            SurrogateLoss::Exponential => -(-x).exp(),
            // d/dx log₂(1 + e^{−x}) = −σ(−x) / ln 2
            SurrogateLoss::Logistic => -sigmoid(-x) / std::f64::consts::LN_2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SurrogateLoss::Squared => "squared",
            SurrogateLoss::Exponential => "exponential",
            SurrogateLoss::Logistic => "logistic",
        }
    }

    /// inf_α { η φ(α) + (1 − η) φ(−α) }, the pointwise minimal φ-risk.
    pub fn conditional_minimum(self, eta: f64) -> f64 {
        match self {
            SurrogateLoss::Squared => 4.0 * eta * (1.0 - eta),
            SurrogateLoss::Exponential => 2.0 * (eta * (1.0 - eta)).sqrt(),
            SurrogateLoss::Logistic => {
                let f = |a: f64| eta * self.phi(a) + (1.0 - eta) * self.phi(-a);
                golden_section_min(f, -40.0, 40.0, 1e-10)
            }
        }
    }
}

impl fmt::Display for SurrogateLoss {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SurrogateLoss {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SurrogateLoss::ALL
            .into_iter()
            .find(|l| l.name() == s)
            .ok_or_else(|| Error::config(format!("unknown loss `{s}`")))
    }
}

/// ln(1 + e^x) without overflow.
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Minimize a unimodal `f` on `[a, b]` to interval width `tol`.
fn golden_section_min(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    f(0.5 * (a + b)).min(fc).min(fd)
}

/// C_d = max(|φ′(−d)|, |φ′(d)|).
pub fn surrogate_loss_constant(loss: SurrogateLoss, d: usize) -> f64 {
    let d = d as f64;
    loss.derivative(-d).abs().max(loss.derivative(d).abs())
}

/// Provenance of a trained classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingInfo {
    pub n: usize,
    pub loss: SurrogateLoss,
    pub seed: u64,
    /// Empirical φ-risk at the returned weights.
    pub objective: f64,
    pub iterations: usize,
}

/// `g(z) = +1` iff ⟨w, z⟩ > 0, with ‖w‖ ≤ radius.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearClassifier {
    pub d: usize,
    pub w: Vec<f64>,
    pub loss: SurrogateLoss,
    pub radius: f64,
    pub trained_on: TrainingInfo,
}

impl LinearClassifier {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let c: Self = serde_json::from_str(s)?;
        if c.w.len() != c.d {
            return Err(Error::Parse("classifier weight length differs from d".into()));
        }
        Ok(c)
    }
}

/// Settings for [`minimize_phi_risk_with`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerOptions {
    /// Random starting points in addition to w = 0.
    pub restarts: usize,
    pub max_iterations: usize,
    pub armijo: f64,
    pub shrink: f64,
    pub seed: u64,
}

impl Default for OptimizerOptions {
    fn default() -> Self {
        Self {
            restarts: 5,
            max_iterations: 100_000,
            armijo: 1e-4,
            shrink: 0.5,
            seed: 0,
        }
    }
}

/// The empirical φ-risk (1/n) Σ φ(y_i ⟨w, z_i⟩) and its gradient.
#[derive(Debug, Clone)]
pub struct PhiRisk<'a> {
    z: &'a DMatrix<f64>,
    y: Vec<f64>,
    loss: SurrogateLoss,
}

impl<'a> PhiRisk<'a> {
    pub fn new(z: &'a DMatrix<f64>, y: &[Label], loss: SurrogateLoss) -> Result<Self> {
        if z.nrows() == 0 || z.ncols() == 0 {
            return Err(Error::arg("empty training set"));
        }
        if y.len() != z.nrows() {
            return Err(Error::arg(format!(
                "{} rows but {} labels",
                z.nrows(),
                y.len()
            )));
        }
        if z.iter().any(|v| !v.is_finite()) {
            return Err(Error::arg("training rows contain non-finite values"));
        }
        Ok(Self {
            z,
            y: y.iter().map(|l| l.sign()).collect(),
            loss,
        })
    }

    pub fn dim(&self) -> usize {
        self.z.ncols()
    }

    fn margins(&self, w: &[f64]) -> Vec<f64> {
        (0..self.z.nrows())
            .map(|i| self.y[i] * self.z.row(i).iter().zip(w).map(|(a, b)| a * b).sum::<f64>())
            .collect()
    }

    pub fn value(&self, w: &[f64]) -> f64 {
        let terms: Vec<f64> = self.margins(w).iter().map(|&m| self.loss.phi(m)).collect();
        pairwise_sum(&terms) / self.y.len() as f64
    }

    pub fn gradient(&self, w: &[f64]) -> Vec<f64> {
        let n = self.y.len() as f64;
        let mut g = vec![0.0; self.dim()];
        for (i, m) in self.margins(w).into_iter().enumerate() {
            let c = self.loss.derivative(m) * self.y[i];
            for (gj, zj) in g.iter_mut().zip(self.z.row(i).iter()) {
                *gj += c * zj;
            }
        }
        g.iter_mut().for_each(|v| *v /= n);
        g
    }
}

fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 16 {
        xs.iter().sum()
    } else {
        let (a, b) = xs.split_at(xs.len() / 2);
        pairwise_sum(a) + pairwise_sum(b)
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn project(w: &mut [f64], radius: f64) {
    let r = norm(w);
    if r > radius {
        w.iter_mut().for_each(|v| *v *= radius / r);
    }
}

/// The first-order optimality residual for `min R(w)` on ‖w‖ ≤ radius: the
/// smaller of the interior measure ‖∇R‖ / (1 + |R|) and, on the boundary,
/// ‖w/radius + ∇R/‖∇R‖‖.
pub fn kkt_residual(w: &[f64], grad: &[f64], objective: f64, radius: f64) -> f64 {
    let g = norm(grad);
    let interior = g / (1.0 + objective.abs());
    let wn = norm(w);
    if g == 0.0 || (wn - radius).abs() > KKT_TOL * radius.max(1.0) {
        return interior;
    }
    let boundary = norm(
        &w.iter()
            .zip(grad)
            .map(|(wi, gi)| wi / radius + gi / g)
            .collect::<Vec<_>>(),
    );
    interior.min(boundary)
}

/// Minimize the empirical φ-risk over ‖w‖ ≤ radius with default options.
pub fn minimize_phi_risk(
    z: &DMatrix<f64>,
    y: &[Label],
    loss: SurrogateLoss,
    radius: f64,
) -> Result<LinearClassifier> {
    minimize_phi_risk_with(z, y, loss, radius, &OptimizerOptions::default())
}

/// Projected gradient descent with Barzilai–Borwein steps and Armijo
/// backtracking, from w = 0 and `opts.restarts` random feasible points. The
/// lowest objective among runs that reach the optimality tolerance wins.
pub fn minimize_phi_risk_with(
    z: &DMatrix<f64>,
    y: &[Label],
    loss: SurrogateLoss,
    radius: f64,
    opts: &OptimizerOptions,
) -> Result<LinearClassifier> {
    if !(radius.is_finite() && radius > 0.0) {
        return Err(Error::arg(format!("radius must be positive, got {radius}")));
    }
    let risk = PhiRisk::new(z, y, loss)?;
    let d = risk.dim();
    let mut rng = rng::stream(rng::sub_seed(opts.seed, Purpose::Optimizer), 0);
    let mut starts = vec![vec![0.0; d]];
    for _ in 0..opts.restarts {
        starts.push(random_in_ball(&mut rng, d, radius));
    }

    let mut best: Option<(Vec<f64>, f64, usize)> = None;
    let mut worst_residual = 0.0f64;
    let mut total_iterations = 0;
    for start in starts {
        let run = descend(&risk, start, radius, opts);
        total_iterations += run.iterations;
        if run.converged {
            if best.as_ref().is_none_or(|(_, f, _)| run.objective < *f) {
                best = Some((run.w, run.objective, run.iterations));
            }
        } else {
            worst_residual = worst_residual.max(run.residual);
        }
    }
    let (w, objective, iterations) = best.ok_or_else(|| Error::Convergence {
        iterations: total_iterations,
        diagnostics: format!(
            "projected gradient did not reach the optimality tolerance from any start \
             (best residual {worst_residual:e})"
        ),
    })?;
    Ok(LinearClassifier {
        d,
        w,
        loss,
        radius,
        trained_on: TrainingInfo {
            n: y.len(),
            loss,
            seed: opts.seed,
            objective,
            iterations,
        },
    })
}

fn random_in_ball(rng: &mut impl Rng, d: usize, radius: f64) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        if norm(&v) <= 1.0 {
            return v.into_iter().map(|x| x * radius).collect();
        }
    }
}

struct Run {
    w: Vec<f64>,
    objective: f64,
    residual: f64,
    iterations: usize,
    converged: bool,
}

fn descend(risk: &PhiRisk, mut w: Vec<f64>, radius: f64, opts: &OptimizerOptions) -> Run {
    // Stop a little inside the reported tolerance so rounding in the final
    // check cannot flip the verdict.
    let tol = 0.1 * KKT_TOL;
    let mut f = risk.value(&w);
    let mut g = risk.gradient(&w);
    let mut step = 1.0;
    for it in 0..opts.max_iterations {
        let residual = kkt_residual(&w, &g, f, radius);
        if residual <= tol {
            return Run {
                w,
                objective: f,
                residual,
                iterations: it,
                converged: true,
            };
        }
        let mut t = step;
        let (w_new, f_new) = loop {
            let mut cand: Vec<f64> = w.iter().zip(&g).map(|(wi, gi)| wi - t * gi).collect();
            project(&mut cand, radius);
            let decrease: f64 = g.iter().zip(&cand).zip(&w).map(|((gi, c), wi)| gi * (c - wi)).sum();
            let fc = risk.value(&cand);
            if fc <= f + opts.armijo * decrease || t < 1e-20 {
                break (cand, fc);
            }
            t *= opts.shrink;
        };
        let g_new = risk.gradient(&w_new);
        let s: Vec<f64> = w_new.iter().zip(&w).map(|(a, b)| a - b).collect();
        let yv: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy: f64 = s.iter().zip(&yv).map(|(a, b)| a * b).sum();
        let ss: f64 = s.iter().map(|a| a * a).sum();
        step = if sy > 0.0 { (ss / sy).clamp(1e-12, 1e12) } else { (2.0 * t).min(1e12) };
        let stalled = ss == 0.0;
        w = w_new;
        f = f_new;
        g = g_new;
        if stalled {
            let residual = kkt_residual(&w, &g, f, radius);
            return Run {
                w,
                objective: f,
                residual,
                iterations: it + 1,
                converged: residual <= KKT_TOL,
            };
        }
    }
    let residual = kkt_residual(&w, &g, f, radius);
    Run {
        w,
        objective: f,
        residual,
        iterations: opts.max_iterations,
        converged: residual <= KKT_TOL,
    }
}

/// +1 iff ⟨w, z⟩ > 0.
pub fn classify(c: &LinearClassifier, z: &[f64]) -> Result<Label> {
    if z.len() != c.w.len() {
        return Err(Error::arg(format!(
            "classifier has dimension {}, input has {}",
            c.w.len(),
            z.len()
        )));
    }
    Ok(Label::from_score(c.w.iter().zip(z).map(|(a, b)| a * b).sum()))
}

/// Empirical φ-risk and 0–1 error on an evaluation set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskReport {
    pub phi_risk: f64,
    pub zero_one_error: f64,
    pub n_eval: usize,
}

pub fn evaluate_risks(
    c: &LinearClassifier,
    z: &DMatrix<f64>,
    y: &[Label],
    loss: SurrogateLoss,
) -> Result<RiskReport> {
    if z.nrows() == 0 {
        return Err(Error::arg("empty evaluation set"));
    }
    if z.ncols() != c.w.len() {
        return Err(Error::arg("evaluation rows do not match the classifier dimension"));
    }
    let risk = PhiRisk::new(z, y, loss)?;
    let mut wrong = 0usize;
    for (i, label) in y.iter().enumerate() {
        let row: Vec<f64> = z.row(i).iter().copied().collect();
        if classify(c, &row)? != *label {
            wrong += 1;
        }
    }
    Ok(RiskReport {
        phi_risk: risk.value(&c.w),
        zero_one_error: wrong as f64 / y.len() as f64,
        n_eval: y.len(),
    })
}

/// Monte Carlo estimates of the Bayes risk L* and the minimal φ-risk.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BayesEstimate {
    pub l_star: f64,
    pub r_phi_star: f64,
    pub mc_samples: usize,
    /// Standard error of `l_star`.
    pub std_error: f64,
    /// False when `mc_samples` is below 1000.
    pub reliable: bool,
}

pub fn bayes_oracle(
    dist: &DistributionSpec,
    loss: SurrogateLoss,
    mc: usize,
    seed: u64,
) -> Result<BayesEstimate> {
    if mc == 0 {
        return Err(Error::arg("Monte Carlo sample size must be positive"));
    }
    let reliable = mc >= 1000;
    if !reliable {
        log::warn!("Bayes risk estimated from only {mc} samples");
    }
    let sample = sample_latents(dist, mc, seed)?;
    let etas: Vec<f64> = sample.points.iter().map(|x| dist.eta(x)).collect();
    let l: Vec<f64> = etas.iter().map(|e| e.min(1.0 - e)).collect();
    let r: Vec<f64> = etas.iter().map(|&e| loss.conditional_minimum(e)).collect();
    let m = mc as f64;
    let l_star = pairwise_sum(&l) / m;
    let var = if mc > 1 {
        let sq: Vec<f64> = l.iter().map(|v| (v - l_star).powi(2)).collect();
        pairwise_sum(&sq) / (m - 1.0)
    } else {
        0.0
    };
    Ok(BayesEstimate {
        l_star,
        r_phi_star: pairwise_sum(&r) / m,
        mc_samples: mc,
        std_error: (var / m).sqrt(),
        reliable,
    })
}
