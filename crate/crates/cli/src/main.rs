//! `lpgraph`: simulate latent position graphs, embed and classify them, and
//! run bound checks and convergence experiments.
//!
//! Exit status: 0 on success, 2 for invalid configuration or input, 3 for a
//! numerical failure, 1 for anything else (I/O).

use std::fs::{self, File};
use std::io::{self, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use lpgraph::align::BoundName;
use lpgraph::classify::{evaluate_risks, minimize_phi_risk_with, OptimizerOptions, SurrogateLoss};
use lpgraph::graphgen::{
    read_edge_list, read_labels, sample_adjacency_from_kernel, sample_latents, write_edge_list,
    write_labels,
};
use lpgraph::harness::{run_experiment, verify_bounds, DimRule, ExperimentConfig};
use lpgraph::spectral::{
    decompose_and_select, eigendecompose, embed_decomposition, EigenCount, Embedding,
    DEFAULT_DIM_CONSTANT,
};
use lpgraph::Error;

#[derive(Parser)]
#[command(name = "lpgraph", version, about = "Vertex classification on latent position graphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample one graph and its vertex labels.
    Simulate(SimulateArgs),
    /// Spectrally embed a graph read from an edge list.
    Embed(EmbedArgs),
    /// Train a linear classifier on an embedding and report its risks.
    Classify(ClassifyArgs),
    /// Check the concentration bounds and write a pass-rate table.
    VerifyBounds(VerifyArgs),
    /// Run a convergence sweep over the configured sizes.
    Experiment(ExperimentArgs),
}

#[derive(Args)]
struct ConfigArgs {
    /// Experiment configuration (TOML).
    #[arg(long, short)]
    config: PathBuf,
    /// Override a configuration key, e.g. `--set trials=10` or
    /// `--set kernel.bandwidth=0.2`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl ConfigArgs {
    fn load(&self, extra: Vec<String>) -> Result<ExperimentConfig, Error> {
        let text = fs::read_to_string(&self.config).map_err(|e| {
            Error::Config(format!("cannot read {}: {e}", self.config.display()))
        })?;
        let mut overrides = self.overrides.clone();
        overrides.extend(extra);
        ExperimentConfig::load(&text, &overrides)
    }
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Number of vertices; defaults to the first entry of `n_grid`.
    #[arg(long, short)]
    n: Option<usize>,
    /// Overrides `seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides `rho_rule` (`dense`, `power:<e>`, `log2n`).
    #[arg(long)]
    rho: Option<String>,
    /// Output edge list.
    #[arg(long, default_value = "graph.txt")]
    graph: PathBuf,
    /// Output label file.
    #[arg(long, default_value = "labels.txt")]
    labels: PathBuf,
}

#[derive(Args)]
struct EmbedArgs {
    /// Input edge list.
    #[arg(long)]
    graph: PathBuf,
    /// `gap:<eps>` for the spectral-gap rule or `fixed:<d>`.
    #[arg(long, default_value = "gap:0.1")]
    dim: DimRule,
    /// Multiplier in the gap rule's threshold.
    #[arg(long, default_value_t = DEFAULT_DIM_CONSTANT)]
    dim_constant: f64,
    /// Surrogate loss whose constant enters the gap rule.
    #[arg(long, default_value = "logistic")]
    loss: SurrogateLoss,
    /// Output CSV; stdout if omitted.
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ClassifyArgs {
    /// Embedding CSV (`vertex,z1,...,zd`).
    #[arg(long)]
    embedding: PathBuf,
    /// Label file (`vertex label`).
    #[arg(long)]
    labels: PathBuf,
    #[arg(long, default_value = "logistic")]
    loss: SurrogateLoss,
    /// Norm bound on the weights; defaults to the embedding dimension.
    #[arg(long)]
    radius: Option<f64>,
    /// Share of vertices, taken from the end, held out for testing.
    #[arg(long, default_value_t = 0.2)]
    test_fraction: f64,
    /// Seed of the optimizer's random restarts.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output classifier JSON.
    #[arg(long, default_value = "classifier.json")]
    classifier: PathBuf,
    /// Output risk table.
    #[arg(long, default_value = "risks.csv")]
    risks: PathBuf,
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Comma-separated bound names; defaults to the config's `bounds`. An
    /// empty list yields an empty table.
    #[arg(long)]
    bounds: Option<String>,
    /// Output JSON; stdout if omitted.
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExperimentArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Overrides `trials`.
    #[arg(long)]
    trials: Option<usize>,
    /// Output directory for `trials.csv`, `timings.csv`, and `summary.json`.
    #[arg(long, short, default_value = "results")]
    out_dir: PathBuf,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Embed(a) => embed(a),
        Command::Classify(a) => classify(a),
        Command::VerifyBounds(a) => verify(a),
        Command::Experiment(a) => experiment(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    if e.is_numerical() {
        return 3;
    }
    match e.root() {
        Error::Io(_) => 1,
        _ => 2,
    }
}

fn write_output(path: Option<&Path>, text: &str) -> Result<(), Error> {
    match path {
        Some(p) => fs::write(p, text)?,
        None => io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn simulate(a: SimulateArgs) -> Result<(), Error> {
    let mut extra = Vec::new();
    if let Some(seed) = a.seed {
        extra.push(format!("seed={seed}"));
    }
    if let Some(rho) = &a.rho {
        extra.push(format!("rho_rule={rho:?}"));
    }
    if let Some(n) = a.n {
        extra.push(format!("n_grid=[{n}]"));
    }
    let cfg = a.config.load(extra)?;
    let n = cfg.n_grid[0];
    let sample = sample_latents(&cfg.dist, n, cfg.seed)?;
    let graph = sample_adjacency_from_kernel(&cfg.kernel, &sample.points, cfg.rho_rule.rho(n), cfg.seed)?;
    write_edge_list(&graph, File::create(&a.graph)?)?;
    write_labels(&sample.labels, File::create(&a.labels)?)?;
    log::info!("wrote {} edges on {n} vertices", graph.edge_count());
    Ok(())
}

fn embed(a: EmbedArgs) -> Result<(), Error> {
    let graph = read_edge_list(BufReader::new(File::open(&a.graph)?))?;
    let (decomp, d) = match a.dim {
        DimRule::Fixed(d) => {
            if d > graph.n() {
                return Err(Error::Config(format!(
                    "dimension {d} exceeds the vertex count {}",
                    graph.n()
                )));
            }
            (eigendecompose(&graph, EigenCount::Top(d))?, d)
        }
        DimRule::Gap { epsilon } => {
            let (decomp, sel) = decompose_and_select(&graph, a.loss, epsilon, a.dim_constant)?;
            (decomp, sel.d)
        }
    };
    let embedding = embed_decomposition(&decomp, d, graph.rho())?;
    let mut buf = Vec::new();
    embedding.write_csv(&mut buf)?;
    write_output(a.out.as_deref(), &String::from_utf8_lossy(&buf))
}

fn classify(a: ClassifyArgs) -> Result<(), Error> {
    let embedding = Embedding::read_csv(File::open(&a.embedding)?)?;
    let labels = read_labels(BufReader::new(File::open(&a.labels)?))?;
    let n = embedding.n();
    if labels.len() != n {
        return Err(Error::Config(format!(
            "{} labels for an embedding of {n} vertices",
            labels.len()
        )));
    }
    if !(0.0..1.0).contains(&a.test_fraction) {
        return Err(Error::Config(format!(
            "test fraction must lie in [0, 1), got {}",
            a.test_fraction
        )));
    }
    let n_test = (a.test_fraction * n as f64).round() as usize;
    let n_train = n - n_test;
    if n_train == 0 {
        return Err(Error::Config("no vertices left for training".into()));
    }
    let train_idx: Vec<usize> = (0..n_train).collect();
    let z_train = embedding.select_rows(&train_idx);
    let opts = OptimizerOptions {
        seed: a.seed,
        ..OptimizerOptions::default()
    };
    let radius = a.radius.unwrap_or(embedding.d() as f64);
    let classifier = minimize_phi_risk_with(&z_train, &labels[..n_train], a.loss, radius, &opts)?;
    fs::write(&a.classifier, classifier.to_json()? + "\n")?;

    let mut w = csv::Writer::from_writer(File::create(&a.risks)?);
    w.write_record(["split", "n", "phi_risk", "zero_one_error"])?;
    let mut row = |split: &str, idx: Vec<usize>| -> Result<(), Error> {
        let r = evaluate_risks(&classifier, &embedding.select_rows(&idx), &pick(&labels, &idx), a.loss)?;
        w.write_record([
            split.to_string(),
            r.n_eval.to_string(),
            format!("{:.16e}", r.phi_risk),
            format!("{:.16e}", r.zero_one_error),
        ])?;
        Ok(())
    };
    row("train", train_idx)?;
    if n_test > 0 {
        row("test", (n_train..n).collect())?;
    }
    w.flush()?;
    Ok(())
}

fn pick<T: Copy>(xs: &[T], idx: &[usize]) -> Vec<T> {
    idx.iter().map(|&i| xs[i]).collect()
}

fn verify(a: VerifyArgs) -> Result<(), Error> {
    let cfg = a.config.load(Vec::new())?;
    let which = match a.bounds.as_deref() {
        None => cfg.bounds.clone(),
        Some(list) => list
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(str::parse::<BoundName>)
            .collect::<Result<_, _>>()?,
    };
    let report = verify_bounds(&cfg, &which)?;
    for e in &report.errors {
        log::warn!("{e}");
    }
    write_output(a.out.as_deref(), &(report.to_json()? + "\n"))
}

fn experiment(a: ExperimentArgs) -> Result<(), Error> {
    let extra = a.trials.map(|t| format!("trials={t}")).into_iter().collect();
    let cfg = a.config.load(extra)?;
    let result = run_experiment(&cfg)?;
    result.write_outputs(&cfg, &a.out_dir)?;
    for row in &result.summary {
        log::info!(
            "n = {}: mean test error {:.4} over {} trials",
            row.n,
            row.mean_test_error,
            row.trials
        );
    }
    Ok(())
}
