use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::align::BoundName;
use crate::classify::SurrogateLoss;
use crate::error::{Error, Result};
use crate::graphgen::DistributionSpec;
use crate::kernels::KernelSpec;
use crate::spectral::DEFAULT_DIM_CONSTANT;

/// How the embedding dimension is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum DimRule {
    /// The spectral-gap rule with exponent 1/4 − ε; written `gap:<eps>`.
    Gap { epsilon: f64 },
    /// A fixed dimension; written `fixed:<d>`.
    Fixed(usize),
}

impl FromStr for DimRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("dimension rule must be `gap:<eps>` or `fixed:<d>`, got `{s}`"));
        let (kind, arg) = s.split_once(':').ok_or_else(bad)?;
        match kind.trim() {
            "gap" | "eq69" => {
                let epsilon: f64 = arg.trim().parse().map_err(|_| bad())?;
                if !(epsilon > 0.0 && epsilon < 0.25) {
                    return Err(Error::Config(format!(
                        "epsilon must lie in (0, 1/4), got {epsilon}"
                    )));
                }
                Ok(DimRule::Gap { epsilon })
            }
            "fixed" => {
                let d: usize = arg.trim().parse().map_err(|_| bad())?;
                if d == 0 {
                    return Err(Error::Config("fixed dimension must be at least 1".into()));
                }
                Ok(DimRule::Fixed(d))
            }
            _ => Err(bad()),
        }
    }
}

impl TryFrom<String> for DimRule {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<DimRule> for String {
    fn from(r: DimRule) -> String {
        r.to_string()
    }
}

impl fmt::Display for DimRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DimRule::Gap { epsilon } => write!(f, "gap:{epsilon}"),
            DimRule::Fixed(d) => write!(f, "fixed:{d}"),
        }
    }
}

/// The sparsity scale ρ_n as a function of n.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum RhoRule {
    /// ρ = 1; written `dense`.
    Dense,
    /// ρ = n^{−e}; written `power:<e>`.
    PowerLaw(f64),
    /// ρ = (log n)² / n; written `log2n`.
    LogSquaredOverN,
}

impl RhoRule {
    /// ρ_n, capped at 1.
    pub fn rho(self, n: usize) -> f64 {
        let nf = n as f64;
        let r = match self {
            RhoRule::Dense => 1.0,
            RhoRule::PowerLaw(e) => nf.powf(-e),
            RhoRule::LogSquaredOverN => nf.ln().powi(2) / nf,
        };
        r.min(1.0)
    }
}

impl FromStr for RhoRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "dense" => Ok(RhoRule::Dense),
            "log2n" => Ok(RhoRule::LogSquaredOverN),
            other => match other.split_once(':') {
                Some(("power", e)) => {
                    let e: f64 = e.trim().parse().map_err(|_| {
                        Error::Config(format!("invalid power-law exponent in `{s}`"))
                    })?;
                    if !(0.0..1.0).contains(&e) {
                        return Err(Error::Config(format!(
                            "power-law exponent must lie in [0, 1), got {e}"
                        )));
                    }
                    Ok(RhoRule::PowerLaw(e))
                }
                _ => Err(Error::Config(format!(
                    "sparsity rule must be `dense`, `log2n` or `power:<e>`, got `{s}`"
                ))),
            },
        }
    }
}

impl TryFrom<String> for RhoRule {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<RhoRule> for String {
    fn from(r: RhoRule) -> String {
        r.to_string()
    }
}

impl fmt::Display for RhoRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RhoRule::Dense => f.write_str("dense"),
            RhoRule::PowerLaw(e) => write!(f, "power:{e}"),
            RhoRule::LogSquaredOverN => f.write_str("log2n"),
        }
    }
}

/// Settings for the quadrature oracle of the feature map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OracleConfig {
    pub enabled: bool,
    /// Nodes per axis; defaults to 512 on one axis, 64 on two, 16 otherwise.
    pub m: Option<usize>,
    /// Number of operator eigenpairs retained.
    pub d_max: usize,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            m: None,
            d_max: 16,
        }
    }
}

fn default_trials() -> usize {
    1
}
fn default_loss() -> SurrogateLoss {
    SurrogateLoss::Logistic
}
fn default_dim_rule() -> DimRule {
    DimRule::Gap { epsilon: 0.1 }
}
fn default_dim_constant() -> f64 {
    DEFAULT_DIM_CONSTANT
}
fn default_rho_rule() -> RhoRule {
    RhoRule::Dense
}
fn default_eta() -> f64 {
    0.05
}
fn default_tau() -> f64 {
    3.0
}
fn default_test_fraction() -> f64 {
    0.2
}
fn default_label_fraction() -> f64 {
    1.0
}
fn default_bayes_mc() -> usize {
    1_000_000
}
fn default_bound_dim() -> usize {
    1
}

/// Everything needed to reproduce an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub n_grid: Vec<usize>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    pub kernel: KernelSpec,
    pub dist: DistributionSpec,
    #[serde(default = "default_loss")]
    pub loss: SurrogateLoss,
    #[serde(default = "default_dim_rule")]
    pub dim_rule: DimRule,
    /// Multiplier in the gap rule's threshold.
    #[serde(default = "default_dim_constant")]
    pub dim_constant: f64,
    #[serde(default = "default_rho_rule")]
    pub rho_rule: RhoRule,
    #[serde(default = "default_eta")]
    pub eta: f64,
    #[serde(default = "default_tau")]
    pub tau: f64,
    /// Norm budget of the classifier; defaults to the embedding dimension.
    #[serde(default)]
    pub radius: Option<f64>,
    /// Share of vertices held out for testing (the last ones).
    #[serde(default = "default_test_fraction")]
    pub test_fraction: f64,
    /// Share of the training vertices whose labels are used.
    #[serde(default = "default_label_fraction")]
    pub label_fraction: f64,
    /// Monte Carlo size for the Bayes-risk reference; 0 disables it.
    #[serde(default = "default_bayes_mc")]
    pub bayes_mc: usize,
    /// Embedding dimension used by bound checks.
    #[serde(default = "default_bound_dim")]
    pub bound_dim: usize,
    /// Bounds evaluated by `verify-bounds` when none are named explicitly.
    #[serde(default)]
    pub bounds: Vec<BoundName>,
    #[serde(default)]
    pub oracle: OracleConfig,
}

impl ExperimentConfig {
    /// Parse TOML text, apply `key=value` overrides, and validate.
    ///
    /// Keys may be dotted (`oracle.m=256`, `kernel.bandwidth=0.3`); values
    /// are parsed as TOML and fall back to plain strings.
    pub fn load(text: &str, overrides: &[String]) -> Result<Self> {
        let mut table: toml::Table =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let cfg: ExperimentConfig = table
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::load(&text, overrides)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let cfg = |m: String| Err(Error::Config(m));
        if self.n_grid.is_empty() {
            return cfg("n_grid must not be empty".into());
        }
        if self.n_grid.windows(2).any(|w| w[0] >= w[1]) {
            return cfg("n_grid must be strictly increasing".into());
        }
        if self.n_grid[0] < 5 {
            return cfg("every n in n_grid must be at least 5".into());
        }
        if self.trials == 0 {
            return cfg("trials must be at least 1".into());
        }
        if self.kernel.domain() != self.dist.domain() {
            return cfg(format!(
                "kernel domain {} differs from distribution domain {}",
                self.kernel.domain(),
                self.dist.domain()
            ));
        }
        if !(self.dim_constant.is_finite() && self.dim_constant > 0.0) {
            return cfg("dim_constant must be positive".into());
        }
        if !(self.eta > 0.0 && self.eta < 1.0) {
            return cfg(format!("eta must lie in (0, 1), got {}", self.eta));
        }
        if !(self.tau.is_finite() && self.tau > 0.0) {
            return cfg(format!("tau must be positive, got {}", self.tau));
        }
        if let Some(r) = self.radius {
            if !(r.is_finite() && r > 0.0) {
                return cfg(format!("radius must be positive, got {r}"));
            }
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return cfg("test_fraction must lie in (0, 1)".into());
        }
        if !(self.label_fraction > 0.0 && self.label_fraction <= 1.0) {
            return cfg("label_fraction must lie in (0, 1]".into());
        }
        if self.bound_dim == 0 {
            return cfg("bound_dim must be at least 1".into());
        }
        if self.oracle.d_max == 0 || self.oracle.d_max > self.oracle_nodes() {
            return cfg("oracle.d_max must lie in 1..=number of quadrature nodes".into());
        }
        Ok(())
    }

    /// Quadrature nodes per axis.
    pub fn oracle_m(&self) -> usize {
        self.oracle.m.unwrap_or(match self.dist.domain().dim() {
            1 => 512,
            2 => 64,
            _ => 16,
        })
    }

    fn oracle_nodes(&self) -> usize {
        let m = self.oracle_m();
        match self.dist.domain() {
            crate::kernels::LatentDomain::Sphere { .. } => m,
            d => m.saturating_pow(d.dim() as u32),
        }
    }
}

fn apply_override(table: &mut toml::Table, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override `{assignment}` is not key=value")))?;
    let key = key.trim();
    let raw = raw.trim();
    let value = parse_value(raw);
    let mut parts: Vec<&str> = key.split('.').collect();
    let last = parts.pop().filter(|k| !k.is_empty()).ok_or_else(|| {
        Error::Config(format!("override `{assignment}` has an empty key"))
    })?;
    let mut node = table;
    for p in parts {
        node = node
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("`{p}` in `{key}` is not a table")))?;
    }
    node.insert(last.to_string(), value);
    Ok(())
}

fn parse_value(raw: &str) -> toml::Value {
    // Parse as the right-hand side of a TOML assignment.
    match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
        Ok(mut t) => t.remove("v").unwrap(),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const BASIC: &str = r#"
seed = 7
n_grid = [50, 100]
trials = 2

[kernel]
family = "gaussian"
bandwidth = 0.5
domain = { kind = "interval", lo = 0.0, hi = 1.0 }

[dist]
domain = { kind = "interval", lo = 0.0, hi = 1.0 }
latent = { law = "uniform" }
label = { model = "logistic", direction = [1.0], offset = 0.5, slope = 4.0 }
"#;

    #[test]
    fn defaults() {
        let c = ExperimentConfig::load(BASIC, &[]).unwrap();
        assert_eq!(c.dim_rule, DimRule::Gap { epsilon: 0.1 });
        assert_eq!(c.dim_constant, 32.0);
        assert_eq!(c.rho_rule, RhoRule::Dense);
        assert_eq!(c.oracle_m(), 512);
        assert_eq!(c.loss, SurrogateLoss::Logistic);
    }

    #[test]
    fn overrides() {
        let c = ExperimentConfig::load(
            BASIC,
            &[
                "trials=5".into(),
                "dim_rule=fixed:3".into(),
                "kernel.bandwidth=0.25".into(),
                "oracle.m=128".into(),
                "rho_rule=power:0.5".into(),
                "loss=squared".into(),
            ],
        )
        .unwrap();
        assert_eq!(c.trials, 5);
        assert_eq!(c.dim_rule, DimRule::Fixed(3));
        assert_eq!(c.oracle_m(), 128);
        assert_eq!(c.rho_rule.rho(100), 0.1);
        assert_eq!(c.loss, SurrogateLoss::Squared);
        assert_eq!(
            c.kernel,
            KernelSpec::gaussian(0.25, crate::kernels::LatentDomain::unit_interval()).unwrap()
        );
    }

    #[test]
    fn invalid_configs() {
        for o in [
            "n_grid=[100, 50]",
            "trials=0",
            "dim_rule=gap:0.3",
            "dim_rule=elbow",
            "eta=1.5",
            "kernel.bandwidth=-1",
            "unknown_key=1",
            "rho_rule=power:2",
        ] {
            let r = ExperimentConfig::load(BASIC, &[o.to_string()]);
            assert!(matches!(r, Err(Error::Config(_))), "{o}: {r:?}");
        }
    }

    #[test]
    fn rho_rules() {
        let r = RhoRule::LogSquaredOverN.rho(500);
        assert!((r - 500f64.ln().powi(2) / 500.0).abs() < 1e-15);
        assert!(RhoRule::PowerLaw(0.5).rho(1) <= 1.0 && RhoRule::Dense.rho(7) == 1.0);
        assert_eq!("log2n".parse::<RhoRule>().unwrap(), RhoRule::LogSquaredOverN);
    }

    #[test]
    fn toml_round_trip() {
        let c = ExperimentConfig::load(BASIC, &[]).unwrap();
        let again = ExperimentConfig::load(&c.to_toml().unwrap(), &[]).unwrap();
        assert_eq!(c, again);
    }
}
