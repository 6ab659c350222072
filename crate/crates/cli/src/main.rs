//! `mdpgrl`: sample MDP graphs, train embeddings and agents, and run
//! benchmark comparisons.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use log::info;

use mdp_grl::assets::load_maze;
use mdp_grl::dqn::{train_agent, AgentConfig};
use mdp_grl::embeddings::{self, EmbeddingTable, Method, StateRepr, TrainSpec};
use mdp_grl::harness::{
    compare_methods, estimate_graph, raw_csv, sweep_dimension, sweep_samples, write_outputs, Comparison,
    ExperimentConfig, RunResult, SampleBudget, SeedRun,
};
use mdp_grl::mdpgraph::{read_edgelist, write_edgelist};

#[derive(Parser)]
#[command(name = "mdpgrl", version, about = "Graph representation learning benchmark for grid-world DQN agents")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Experiment settings. Values come from the defaults, then `--config`,
/// then the individual flags.
#[derive(Args, Debug, Default)]
struct ConfigArgs {
    /// Flat key=value file with any of the keys below.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Built-in maze name (maze1..maze5, desk10) or maze file path.
    #[arg(long)]
    maze: Option<String>,
    /// Method tag, or a comma-separated list for `bench`.
    #[arg(long)]
    method: Option<String>,
    /// Embedding dimension.
    #[arg(long)]
    d: Option<String>,
    /// Transition samples: a count, a percentage of the coupon-collector
    /// estimate such as `25%`, or `full`.
    #[arg(long)]
    samples: Option<String>,
    #[arg(long)]
    episodes: Option<String>,
    #[arg(long)]
    repeats: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    /// Output directory.
    #[arg(long)]
    out: Option<String>,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<ExperimentConfig> {
        let mut config = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                ExperimentConfig::parse(&text).with_context(|| format!("in {}", path.display()))?
            }
            None => ExperimentConfig::default(),
        };
        let flags = [
            ("maze", &self.maze),
            ("method", &self.method),
            ("d", &self.d),
            ("samples", &self.samples),
            ("episodes", &self.episodes),
            ("repeats", &self.repeats),
            ("seed", &self.seed),
            ("out", &self.out),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                config.set(key, v).with_context(|| format!("--{key}"))?;
            }
        }
        config.validate()?;
        Ok(config)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Sample transitions from a maze and write the estimated graph.
    Sample(ConfigArgs),
    /// Train a node embedding on an edgelist.
    Embed {
        /// Edgelist written by `sample`.
        #[arg(long)]
        edgelist: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Train one agent and write its per-step log and network checkpoint.
    Train {
        /// Embedding file written by `embed`. Without it the method in the
        /// config is trained on a freshly sampled graph.
        #[arg(long)]
        embedding: Option<PathBuf>,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Multi-seed comparison of the configured methods.
    Bench(ConfigArgs),
    /// Multi-seed runs over several embedding dimensions.
    SweepDim {
        /// Comma-separated dimensions.
        #[arg(long, value_delimiter = ',', default_value = "20,30,40,50")]
        dims: Vec<usize>,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Multi-seed runs over several sample budgets plus the full graph.
    SweepSamples {
        /// Comma-separated budgets, e.g. `1000,2000,4000` or `10%,25%`.
        #[arg(long, value_delimiter = ',', default_value = "1000,2000,4000")]
        budgets: Vec<String>,
        #[command(flatten)]
        config: ConfigArgs,
    },
}

fn write_file(path: &Path, content: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, content).with_context(|| format!("writing {}", path.display()))?;
    println!("wrote {}", path.display());
    Ok(())
}

fn sample(config: &ExperimentConfig) -> Result<()> {
    let world = load_maze(&config.maze)?;
    let graph = estimate_graph(&world, config.samples, config.seed);
    info!("{} nodes, {} edges", graph.num_nodes(), graph.num_edges());
    write_file(&config.out.join("graph.edgelist"), &write_edgelist(&graph))
}

fn train_spec(config: &ExperimentConfig) -> TrainSpec {
    TrainSpec { d: config.d, seed: config.seed, ..TrainSpec::default() }
}

fn embed(edgelist: &Path, config: &ExperimentConfig) -> Result<()> {
    let method = config.method();
    if method == Method::Matrix {
        bail!("the matrix baseline has no embedding; pick another --method");
    }
    let text = fs::read_to_string(edgelist).with_context(|| format!("reading {}", edgelist.display()))?;
    let graph = read_edgelist(&text)?;
    let table = embeddings::train(method, &graph, &train_spec(config))?;
    write_file(&config.out.join(format!("{method}.emb")), &table.to_text())
}

fn train(embedding: Option<&Path>, config: &ExperimentConfig) -> Result<()> {
    let world = load_maze(&config.maze)?;
    let repr = match (embedding, config.method()) {
        (Some(path), _) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            StateRepr::Embedding(EmbeddingTable::from_text(&text)?)
        }
        (None, Method::Matrix) => StateRepr::Matrix,
        (None, method) => {
            let graph = estimate_graph(&world, config.samples, config.seed);
            StateRepr::Embedding(embeddings::train(method, &graph, &train_spec(config))?)
        }
    };
    let agent = AgentConfig { episodes: config.episodes, seed: config.seed, ..AgentConfig::default() };
    let log = train_agent(&world, &repr, &agent)?;
    let reached = log.episodes.iter().filter(|e| e.reached_goal).count();
    println!("{reached}/{} episodes reached the goal", log.episodes.len());
    let result = RunResult {
        runs: vec![SeedRun { seed: config.seed, coverage: f64::NAN, episodes: log.episodes }],
    };
    write_file(&config.out.join("train_raw.csv"), &raw_csv(&result))?;
    write_file(&config.out.join("checkpoint.mlp"), &log.params.to_text())
}

fn report(comparison: &Comparison, config: &ExperimentConfig, title: &str) -> Result<()> {
    let files = write_outputs(comparison, &config.out, title)?;
    for s in comparison.auc_summaries()? {
        println!("{:>12}  mean AUC {:.4e} +- {:.4e}", s.label, s.mean, s.half_width);
    }
    println!("wrote {} files to {}", files.paths.len(), config.out.display());
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Sample(args) => sample(&args.resolve()?),
        Command::Embed { edgelist, config } => embed(&edgelist, &config.resolve()?),
        Command::Train { embedding, config } => train(embedding.as_deref(), &config.resolve()?),
        Command::Bench(args) => {
            let config = args.resolve()?;
            let comparison = compare_methods(&config)?;
            report(&comparison, &config, &format!("{}: methods", config.maze))
        }
        Command::SweepDim { dims, config } => {
            let config = config.resolve()?;
            let comparison = sweep_dimension(&config, &dims)?;
            report(&comparison, &config, &format!("{}: {} dimension sweep", config.maze, config.method()))
        }
        Command::SweepSamples { budgets, config } => {
            let config = config.resolve()?;
            let budgets = budgets
                .iter()
                .map(|b| b.parse::<SampleBudget>())
                .collect::<Result<Vec<_>, _>>()?;
            let comparison = sweep_samples(&config, &budgets)?;
            report(&comparison, &config, &format!("{}: {} sample sweep", config.maze, config.method()))
        }
    }
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    run(Cli::parse())
}
