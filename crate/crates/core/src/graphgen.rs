//! Latent positions, labels, and Bernoulli adjacency matrices.
//!
//! Edge `(i, j)` with `i < j` is decided by the `(j − i − 1)`-th uniform draw
//! of random stream `i`, so a graph is a pure function of its edge
//! probabilities and seed, independent of how rows are scheduled.

use std::fmt;
use std::io::{BufRead, Write};

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::kernels::{Kernel, KernelMatrix, LatentDomain};
use crate::points::{dot, PointSet};
use crate::rng::{self, Purpose};
use crate::spectral::{MatrixSource, SymmetricOperator};

/// Expected edge density below which adjacency lists replace the bit matrix.
pub const SPARSE_DENSITY: f64 = 0.05;

/// Tolerance on mixture weights summing to one.
const MIXTURE_SUM_TOL: f64 = 1e-9;

/// Smallest in-domain probability mass accepted for a mixture component.
const MIN_COMPONENT_MASS: f64 = 1e-12;

/// An isotropic Gaussian, truncated to the domain when sampled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureComponent {
    pub mean: Vec<f64>,
    pub std: f64,
}

/// The marginal law of the latent positions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum LatentLaw {
    /// Uniform on the domain (normalized surface measure on spheres).
    Uniform,
    /// A mixture of Gaussians truncated to a rectangular domain.
    GaussianMixture {
        components: Vec<MixtureComponent>,
        weights: Vec<f64>,
    },
    /// `x1` with probability `p`, otherwise `x2`.
    TwoPoint { x1: Vec<f64>, x2: Vec<f64>, p: f64 },
}

/// The posterior η(x) = P[Y = +1 | X = x].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum LabelModel {
    /// η(x) = 1 on the half-space ⟨direction, x⟩ > offset, 0 elsewhere.
    Deterministic { direction: Vec<f64>, offset: f64 },
    /// η(x) = 1 / (1 + exp(−slope·(⟨direction, x⟩ − offset))).
    Logistic {
        direction: Vec<f64>,
        offset: f64,
        slope: f64,
    },
    /// η(x) ≡ level.
    ConstantNoise { level: f64 },
    /// Y = +1 exactly when X was drawn from the first of two mixture
    /// components, so η is the component posterior.
    ComponentMembership,
}

/// A class label in {−1, +1}.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    Negative,
    Positive,
}

impl Label {
    /// Label of a real score: `+1` iff `score > 0`.
    pub fn from_score(score: f64) -> Self {
        if score > 0.0 {
            Label::Positive
        } else {
            Label::Negative
        }
    }

    /// −1.0 or +1.0.
    pub fn sign(self) -> f64 {
        match self {
            Label::Negative => -1.0,
            Label::Positive => 1.0,
        }
    }

    /// The 0/1 encoding used in label files.
    pub fn bit(self) -> u8 {
        match self {
            Label::Negative => 0,
            Label::Positive => 1,
        }
    }

    pub fn from_bit(bit: u8) -> Result<Self> {
        match bit {
            0 => Ok(Label::Negative),
            1 => Ok(Label::Positive),
            other => Err(Error::Parse(format!("label must be 0 or 1, got {other}"))),
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Label::Negative => "-1",
            Label::Positive => "+1",
        })
    }
}

#[derive(Deserialize)]
struct DistributionRepr {
    domain: LatentDomain,
    latent: LatentLaw,
    label: LabelModel,
}

/// The joint law of (X, Y).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DistributionRepr")]
pub struct DistributionSpec {
    domain: LatentDomain,
    latent: LatentLaw,
    label: LabelModel,
}

impl TryFrom<DistributionRepr> for DistributionSpec {
    type Error = Error;

    fn try_from(r: DistributionRepr) -> Result<Self> {
        DistributionSpec::new(r.domain, r.latent, r.label)
    }
}

impl DistributionSpec {
    pub fn new(domain: LatentDomain, latent: LatentLaw, label: LabelModel) -> Result<Self> {
        domain.validate()?;
        let dim = domain.dim();
        let dims = |v: &[f64], what: &str| {
            if v.len() != dim || v.iter().any(|c| !c.is_finite()) {
                Err(Error::config(format!(
                    "{what} must be a finite vector of dimension {dim}"
                )))
            } else {
                Ok(())
            }
        };
        match &latent {
            LatentLaw::Uniform => {}
            LatentLaw::GaussianMixture {
                components,
                weights,
            } => {
                let axes = domain
                    .axes()
                    .ok_or_else(|| Error::config("Gaussian mixtures need a rectangular domain"))?;
                if components.is_empty() || components.len() != weights.len() {
                    return Err(Error::config("mixture needs one weight per component"));
                }
                if weights.iter().any(|w| !(*w >= 0.0)) {
                    return Err(Error::config("mixture weights must be non-negative"));
                }
                let total: f64 = weights.iter().sum();
                if (total - 1.0).abs() > MIXTURE_SUM_TOL {
                    return Err(Error::config(format!(
                        "mixture weights sum to {total}, not 1"
                    )));
                }
                for c in components {
                    dims(&c.mean, "component mean")?;
                    if !(c.std.is_finite() && c.std > 0.0) {
                        return Err(Error::config("component std must be positive"));
                    }
                    if crate::kernels::truncated_mass(c, &axes) < MIN_COMPONENT_MASS {
                        return Err(Error::config(
                            "mixture component has no mass inside the domain",
                        ));
                    }
                }
            }
            LatentLaw::TwoPoint { x1, x2, p } => {
                domain.check(x1)?;
                domain.check(x2)?;
                if !(0.0..=1.0).contains(p) {
                    return Err(Error::config(format!("p must lie in [0, 1], got {p}")));
                }
            }
        }
        match &label {
            LabelModel::Deterministic { direction, offset } => {
                dims(direction, "label direction")?;
                finite("offset", *offset)?;
            }
            LabelModel::Logistic {
                direction,
                offset,
                slope,
            } => {
                dims(direction, "label direction")?;
                finite("offset", *offset)?;
                finite("slope", *slope)?;
            }
            LabelModel::ConstantNoise { level } => {
                if !(0.0..=1.0).contains(level) {
                    return Err(Error::config(format!(
                        "noise level must lie in [0, 1], got {level}"
                    )));
                }
            }
            LabelModel::ComponentMembership => {
                let two = matches!(&latent, LatentLaw::GaussianMixture { components, .. } if components.len() == 2);
                if !two {
                    return Err(Error::config(
                        "component-membership labels need a two-component mixture",
                    ));
                }
            }
        }
        Ok(Self {
            domain,
            latent,
            label,
        })
    }

    pub fn domain(&self) -> &LatentDomain {
        &self.domain
    }

    pub fn latent(&self) -> &LatentLaw {
        &self.latent
    }

    pub fn label(&self) -> &LabelModel {
        &self.label
    }

    /// η(x) = P[Y = +1 | X = x].
    pub fn eta(&self, x: &[f64]) -> f64 {
        match &self.label {
            LabelModel::Deterministic { direction, offset } => {
                if dot(direction, x) > *offset {
                    1.0
                } else {
                    0.0
                }
            }
            LabelModel::Logistic {
                direction,
                offset,
                slope,
            } => 1.0 / (1.0 + (-slope * (dot(direction, x) - offset)).exp()),
            LabelModel::ConstantNoise { level } => *level,
            LabelModel::ComponentMembership => {
                let LatentLaw::GaussianMixture {
                    components,
                    weights,
                } = &self.latent
                else {
                    unreachable!("checked at construction")
                };
                // Truncation masses cancel between numerator and denominator
                // only when they are equal, so keep them.
                let axes = self.domain.axes().unwrap();
                let dens: Vec<f64> = components
                    .iter()
                    .zip(weights)
                    .map(|(c, w)| {
                        w * log_density(c, x)
                            .exp()
                            / crate::kernels::truncated_mass(c, &axes)
                    })
                    .collect();
                let total = dens[0] + dens[1];
                if total > 0.0 {
                    dens[0] / total
                } else {
                    // Both densities underflow; decide by log-density.
                    let a = weights[0].ln() + log_density(&components[0], x);
                    let b = weights[1].ln() + log_density(&components[1], x);
                    1.0 / (1.0 + (b - a).exp())
                }
            }
        }
    }

    /// Draw one latent point and return it with its mixture component, if any.
    fn draw_point<R: Rng>(&self, rng: &mut R, out: &mut Vec<f64>) -> Option<usize> {
        match &self.latent {
            LatentLaw::Uniform => {
                match &self.domain {
                    LatentDomain::Sphere { dim } => {
                        loop {
                            let v: Vec<f64> =
                                (0..*dim).map(|_| rng.sample(StandardNormal)).collect();
                            let len = dot(&v, &v).sqrt();
                            if len > 1e-12 {
                                out.extend(v.iter().map(|c| c / len));
                                break;
                            }
                        }
                    }
                    d => {
                        for [lo, hi] in d.axes().unwrap() {
                            out.push(rng.random_range(lo..=hi));
                        }
                    }
                }
                None
            }
            LatentLaw::GaussianMixture {
                components,
                weights,
            } => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                let mut k = components.len() - 1;
                for (i, w) in weights.iter().enumerate() {
                    acc += w;
                    if u < acc {
                        k = i;
                        break;
                    }
                }
                let c = &components[k];
                let normal = Normal::new(0.0, 1.0).unwrap();
                for (mu, [lo, hi]) in c.mean.iter().zip(self.domain.axes().unwrap()) {
                    // Inverse-CDF sampling of the truncated normal.
                    let a = normal.cdf((lo - mu) / c.std);
                    let b = normal.cdf((hi - mu) / c.std);
                    let p = a + (b - a) * rng.random::<f64>();
                    let x = mu + c.std * normal.inverse_cdf(p);
                    out.push(x.clamp(lo, hi));
                }
                Some(k)
            }
            LatentLaw::TwoPoint { x1, x2, p } => {
                let u: f64 = rng.random();
                out.extend_from_slice(if u < *p { x1 } else { x2 });
                None
            }
        }
    }
}

fn finite(name: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::config(format!("{name} must be finite")))
    }
}

fn log_density(c: &MixtureComponent, x: &[f64]) -> f64 {
    let q: f64 = c
        .mean
        .iter()
        .zip(x)
        .map(|(m, v)| ((v - m) / c.std).powi(2))
        .sum();
    -0.5 * q - c.mean.len() as f64 * (c.std * (2.0 * std::f64::consts::PI).sqrt()).ln()
}

/// n i.i.d. draws of (X, Y).
#[derive(Debug, Clone, PartialEq)]
pub struct LatentSample {
    pub points: PointSet,
    pub labels: Vec<Label>,
    pub seed: u64,
}

impl LatentSample {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// Draw `n` labelled latent positions; a pure function of `(dist, n, seed)`.
pub fn sample_latents(dist: &DistributionSpec, n: usize, seed: u64) -> Result<LatentSample> {
    if n == 0 {
        return Err(Error::arg("sample size must be at least 1"));
    }
    let mut rng = rng::stream(rng::sub_seed(seed, Purpose::Latents), 0);
    let mut coords = Vec::with_capacity(n * dist.domain.dim());
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let start = coords.len();
        let component = dist.draw_point(&mut rng, &mut coords);
        let label = match (&dist.label, component) {
            (LabelModel::ComponentMembership, Some(k)) => {
                if k == 0 {
                    Label::Positive
                } else {
                    Label::Negative
                }
            }
            _ => {
                let eta = dist.eta(&coords[start..]);
                if rng.random::<f64>() < eta {
                    Label::Positive
                } else {
                    Label::Negative
                }
            }
        };
        labels.push(label);
    }
    Ok(LatentSample {
        points: PointSet::new(dist.domain.dim(), coords)?,
        labels,
        seed,
    })
}

#[derive(Debug, Clone, PartialEq)]
enum Storage {
    /// Row-major bit matrix, `words` u64s per row.
    Dense { words: usize, bits: Vec<u64> },
    /// Sorted neighbor lists.
    Sparse(Vec<Vec<u32>>),
}

/// A hollow symmetric 0/1 matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct AdjacencyMatrix {
    n: usize,
    rho: f64,
    seed: u64,
    storage: Storage,
}

impl AdjacencyMatrix {
    /// Build from an edge list. Each unordered pair may appear once in
    /// either orientation; self-loops and out-of-range vertices are errors.
    pub fn from_edges(
        n: usize,
        rho: f64,
        seed: u64,
        edges: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self> {
        check_rho(rho)?;
        if n > u32::MAX as usize {
            return Err(Error::arg("too many vertices"));
        }
        let mut lists = vec![Vec::new(); n];
        for (i, j) in edges {
            if i >= n || j >= n {
                return Err(Error::arg(format!("edge ({i}, {j}) out of range for n = {n}")));
            }
            if i == j {
                return Err(Error::arg(format!("self-loop at vertex {i}")));
            }
            lists[i].push(j as u32);
            lists[j].push(i as u32);
        }
        for (i, l) in lists.iter_mut().enumerate() {
            l.sort_unstable();
            if l.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::arg(format!("duplicate edge at vertex {i}")));
            }
        }
        let pairs = (n * n.saturating_sub(1) / 2).max(1);
        let edges: usize = lists.iter().map(Vec::len).sum::<usize>() / 2;
        let dense = edges as f64 / pairs as f64 >= SPARSE_DENSITY;
        Ok(Self::from_lists(n, rho, seed, lists, dense))
    }

    fn from_lists(n: usize, rho: f64, seed: u64, lists: Vec<Vec<u32>>, dense: bool) -> Self {
        let storage = if dense {
            let words = n.div_ceil(64);
            let mut bits = vec![0u64; n * words];
            for (i, l) in lists.iter().enumerate() {
                for &j in l {
                    let j = j as usize;
                    bits[i * words + j / 64] |= 1 << (j % 64);
                }
            }
            Storage::Dense { words, bits }
        } else {
            Storage::Sparse(lists)
        };
        Self {
            n,
            rho,
            seed,
            storage,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// The sparsity scale ρ used when sampling.
    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn is_sparse(&self) -> bool {
        matches!(self.storage, Storage::Sparse(_))
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        match &self.storage {
            Storage::Dense { words, bits } => bits[i * words + j / 64] >> (j % 64) & 1 == 1,
            Storage::Sparse(lists) => lists[i].binary_search(&(j as u32)).is_ok(),
        }
    }

    /// Neighbors of `i` in increasing order.
    pub fn neighbors(&self, i: usize) -> Vec<usize> {
        let mut out = Vec::new();
        self.for_each_neighbor(i, |j| out.push(j));
        out
    }

    fn for_each_neighbor(&self, i: usize, mut f: impl FnMut(usize)) {
        match &self.storage {
            Storage::Dense { words, bits } => {
                for (w, &word) in bits[i * words..(i + 1) * words].iter().enumerate() {
                    let mut word = word;
                    while word != 0 {
                        let b = word.trailing_zeros() as usize;
                        f(w * 64 + b);
                        word &= word - 1;
                    }
                }
            }
            Storage::Sparse(lists) => lists[i].iter().for_each(|&j| f(j as usize)),
        }
    }

    pub fn degree(&self, i: usize) -> usize {
        match &self.storage {
            Storage::Dense { words, bits } => bits[i * words..(i + 1) * words]
                .iter()
                .map(|w| w.count_ones() as usize)
                .sum(),
            Storage::Sparse(lists) => lists[i].len(),
        }
    }

    pub fn edge_count(&self) -> usize {
        (0..self.n).map(|i| self.degree(i)).sum::<usize>() / 2
    }

    /// All edges `(i, j)` with `i < j`, in lexicographic order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for i in 0..self.n {
            self.for_each_neighbor(i, |j| {
                if i < j {
                    out.push((i, j))
                }
            });
        }
        out
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            self.for_each_neighbor(i, |j| m[(i, j)] = 1.0);
        }
        m
    }
}

impl SymmetricOperator for AdjacencyMatrix {
    fn dim(&self) -> usize {
        self.n
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            let mut s = 0.0;
            self.for_each_neighbor(i, |j| s += x[j]);
            *yi = s;
        }
    }

    fn to_dense(&self) -> DMatrix<f64> {
        AdjacencyMatrix::to_dense(self)
    }

    fn norm_bound(&self) -> f64 {
        max_degree(self) as f64
    }

    fn source(&self) -> MatrixSource {
        MatrixSource::Adjacency
    }
}

/// Δ, the largest vertex degree.
pub fn max_degree(a: &AdjacencyMatrix) -> usize {
    (0..a.n).map(|i| a.degree(i)).max().unwrap_or(0)
}

fn check_rho(rho: f64) -> Result<()> {
    if rho > 0.0 && rho <= 1.0 {
        Ok(())
    } else {
        Err(Error::arg(format!("rho must lie in (0, 1], got {rho}")))
    }
}

/// Sample A with `P[A_ij = 1] = rho · K_ij` independently for `i < j`.
pub fn sample_adjacency(k: &KernelMatrix, rho: f64, seed: u64) -> Result<AdjacencyMatrix> {
    check_rho(rho)?;
    let dense = rho * k.mean() >= SPARSE_DENSITY;
    Ok(sample_with(k.n(), rho, seed, dense, |i, j| k.get(i, j)))
}

/// Like [`sample_adjacency`], but evaluates `K_ij = κ(X_i, X_j)` on the fly
/// instead of materializing K. Produces the same graph for the same seed.
pub fn sample_adjacency_from_kernel(
    kernel: &dyn Kernel,
    points: &PointSet,
    rho: f64,
    seed: u64,
) -> Result<AdjacencyMatrix> {
    check_rho(rho)?;
    if points.is_empty() {
        return Err(Error::arg("cannot sample a graph on zero vertices"));
    }
    let a = sample_with(points.len(), rho, seed, false, |i, j| {
        kernel.eval(points.row(i), points.row(j))
    });
    let n = a.n;
    let pairs = (n * n.saturating_sub(1) / 2).max(1);
    if a.edge_count() as f64 / pairs as f64 >= SPARSE_DENSITY {
        let Storage::Sparse(lists) = a.storage else {
            unreachable!()
        };
        Ok(AdjacencyMatrix::from_lists(n, rho, seed, lists, true))
    } else {
        Ok(a)
    }
}

fn sample_with(
    n: usize,
    rho: f64,
    seed: u64,
    dense: bool,
    prob: impl Fn(usize, usize) -> f64 + Sync,
) -> AdjacencyMatrix {
    let edge_seed = rng::sub_seed(seed, Purpose::Edges);
    let upper: Vec<Vec<u32>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng::stream(edge_seed, i as u64);
            let mut row = Vec::new();
            for j in i + 1..n {
                let u: f64 = rng.random();
                if u < rho * prob(i, j) {
                    row.push(j as u32);
                }
            }
            row
        })
        .collect();
    let mut lists: Vec<Vec<u32>> = vec![Vec::new(); n];
    for (i, row) in upper.iter().enumerate() {
        for &j in row {
            lists[j as usize].push(i as u32);
        }
    }
    // Lower neighbors were pushed in increasing i; append the upper ones.
    for (i, row) in upper.into_iter().enumerate() {
        lists[i].extend(row);
    }
    AdjacencyMatrix::from_lists(n, rho, seed, lists, dense)
}

/// Write the edge-list format: a `n <count> rho <value> seed <value>` header
/// and one `i j` line per edge with `i < j`.
pub fn write_edge_list(a: &AdjacencyMatrix, mut out: impl Write) -> Result<()> {
    writeln!(out, "n {} rho {} seed {}", a.n, a.rho, a.seed)?;
    for (i, j) in a.edges() {
        writeln!(out, "{i} {j}")?;
    }
    Ok(())
}

pub fn read_edge_list(input: impl BufRead) -> Result<AdjacencyMatrix> {
    let mut lines = input.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Parse("empty graph file".into()))??;
    let fields: Vec<&str> = header.split_whitespace().collect();
    let (n, rho, seed) = match fields.as_slice() {
        ["n", n, "rho", rho, "seed", seed] => (
            parse::<usize>(n, "vertex count")?,
            parse::<f64>(rho, "rho")?,
            parse::<u64>(seed, "seed")?,
        ),
        _ => {
            return Err(Error::Parse(format!(
                "expected `n <count> rho <value> seed <value>`, got `{header}`"
            )))
        }
    };
    let mut edges = Vec::new();
    for (lineno, line) in lines.enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut it = line.split_whitespace();
        let (Some(i), Some(j), None) = (it.next(), it.next(), it.next()) else {
            return Err(Error::Parse(format!("line {}: expected `i j`", lineno + 2)));
        };
        let (i, j) = (parse::<usize>(i, "vertex")?, parse::<usize>(j, "vertex")?);
        if i >= j {
            return Err(Error::Parse(format!(
                "line {}: edges must be written with i < j",
                lineno + 2
            )));
        }
        edges.push((i, j));
    }
    AdjacencyMatrix::from_edges(n, rho, seed, edges).map_err(|e| Error::Parse(e.to_string()))
}

/// Write labels as a `vertex label` table with 0/1 labels.
pub fn write_labels(labels: &[Label], mut out: impl Write) -> Result<()> {
    writeln!(out, "vertex label")?;
    for (i, l) in labels.iter().enumerate() {
        writeln!(out, "{i} {}", l.bit())?;
    }
    Ok(())
}

/// Read a label file; vertices must be listed as 0, 1, 2, ... in order.
pub fn read_labels(input: impl BufRead) -> Result<Vec<Label>> {
    let mut lines = input.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Parse("empty label file".into()))??;
    if header.split_whitespace().collect::<Vec<_>>() != ["vertex", "label"] {
        return Err(Error::Parse(format!("expected `vertex label`, got `{header}`")));
    }
    let mut labels = Vec::new();
    for line in lines {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut it = line.split_whitespace();
        let (Some(v), Some(l), None) = (it.next(), it.next(), it.next()) else {
            return Err(Error::Parse(format!("expected `vertex label`, got `{line}`")));
        };
        let v = parse::<usize>(v, "vertex")?;
        if v != labels.len() {
            return Err(Error::Parse(format!(
                "expected vertex {}, found {v}",
                labels.len()
            )));
        }
        labels.push(Label::from_bit(parse::<u8>(l, "label")?)?);
    }
    Ok(labels)
}

fn parse<T: std::str::FromStr>(s: &str, what: &str) -> Result<T> {
    s.parse()
        .map_err(|_| Error::Parse(format!("invalid {what}: `{s}`")))
}
