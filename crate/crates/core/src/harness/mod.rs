//! Multi-seed experiments: runs, curve aggregation with Student-t
//! confidence intervals, sweeps, and CSV/SVG output.

mod config;
mod output;

use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, StudentsT};

pub use config::{ExperimentConfig, SampleBudget, CONFIG_KEYS};
pub use output::{
    curve_csv, raw_csv, read_curve_csv, read_raw_csv, svg_plot, sweep_csv, write_outputs, RawRow, OutputFiles,
};

use crate::assets::load_maze;
use crate::dqn::{train_agent, AgentConfig, EpisodeLog};
use crate::embeddings::{self, Method, StateRepr, TrainSpec};
use crate::gridworld::GridWorld;
use crate::mdpgraph::{build_graph, coverage, full_graph, sample_transitions, MdpGraph};
use crate::{Error, Result};

/// Two-sided confidence level of every interval.
pub const CONFIDENCE: f64 = 0.90;

/// Logs of one seed's pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct SeedRun {
    pub seed: u64,
    pub coverage: f64,
    pub episodes: Vec<EpisodeLog>,
}

impl SeedRun {
    /// Cumulative reward over the whole run after every environment step.
    pub fn step_series(&self) -> Vec<f64> {
        let mut total = 0.0;
        self.episodes
            .iter()
            .flat_map(|e| e.rewards.iter())
            .map(|r| {
                total += r;
                total
            })
            .collect()
    }

    pub fn total_steps(&self) -> usize {
        self.episodes.iter().map(EpisodeLog::len).sum()
    }
}

/// Seed runs in seed order.
#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub runs: Vec<SeedRun>,
}

impl RunResult {
    pub fn step_series(&self) -> Vec<Vec<f64>> {
        self.runs.iter().map(SeedRun::step_series).collect()
    }

    pub fn max_steps(&self) -> usize {
        self.runs.iter().map(SeedRun::total_steps).max().unwrap_or(0)
    }
}

/// One arm of an experiment: a method with its embedding dimension and
/// sample budget.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Arm {
    pub method: Method,
    pub d: usize,
    pub samples: SampleBudget,
}

/// Graph the agent's embedding is trained on.
pub fn estimate_graph(world: &GridWorld, samples: SampleBudget, seed: u64) -> MdpGraph {
    match samples.resolve(world) {
        None => full_graph(world),
        Some(n) => build_graph(&sample_transitions(world, n, seed)),
    }
}

/// Full pipeline for one seed.
pub fn run_seed(world: &GridWorld, arm: Arm, episodes: usize, seed: u64) -> Result<SeedRun> {
    let (repr, cov) = match arm.method {
        Method::Matrix => (StateRepr::Matrix, 1.0),
        method => {
            let graph = estimate_graph(world, arm.samples, seed);
            let spec = TrainSpec { d: arm.d, seed, ..TrainSpec::default() };
            let table = embeddings::train(method, &graph, &spec)?;
            (StateRepr::Embedding(table), coverage(&graph, world))
        }
    };
    let agent = AgentConfig { episodes, seed, ..AgentConfig::default() };
    let log = train_agent(world, &repr, &agent)?;
    log::debug!("{} seed {seed}: {} steps", arm.method, log.episodes.iter().map(EpisodeLog::len).sum::<usize>());
    Ok(SeedRun { seed, coverage: cov, episodes: log.episodes })
}

/// Runs seeds `base..base + repeats` in parallel; results keep seed order.
pub fn run_arm(world: &GridWorld, arm: Arm, episodes: usize, repeats: usize, base: u64) -> Result<RunResult> {
    let runs = (0..repeats as u64)
        .into_par_iter()
        .map(|i| run_seed(world, arm, episodes, base + i))
        .collect::<Result<Vec<_>>>()?;
    Ok(RunResult { runs })
}

/// Runs the config's first method.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunResult> {
    config.validate()?;
    let world = load_maze(&config.maze)?;
    let arm = Arm { method: config.method(), d: config.d, samples: config.samples };
    run_arm(&world, arm, config.episodes, config.repeats, config.seed)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    Steps,
    Episodes,
}

impl Axis {
    pub fn label(self) -> &'static str {
        match self {
            Axis::Steps => "steps",
            Axis::Episodes => "episodes",
        }
    }
}

/// Pointwise mean with a two-sided confidence band. `x` is one-based.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AggregateCurve {
    pub x: Vec<usize>,
    pub mean: Vec<f64>,
    pub ci_low: Vec<f64>,
    pub ci_high: Vec<f64>,
}

impl AggregateCurve {
    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }
}

/// Two-sided Student-t critical value at [`CONFIDENCE`].
pub fn t_critical(df: usize) -> Result<f64> {
    let dist = StudentsT::new(0.0, 1.0, df as f64).map_err(|e| Error::Stats(format!("Student-t with df={df}: {e}")))?;
    Ok(dist.inverse_cdf(0.5 + CONFIDENCE / 2.0))
}

/// Mean and confidence half-width of `values` (at least two).
pub fn mean_ci(values: &[f64]) -> Result<(f64, f64)> {
    let n = values.len();
    if n < 2 {
        return Err(Error::Stats(format!("a confidence interval needs at least 2 seeds, got {n}")));
    }
    // Shifted by the first value: exact when all values are equal.
    let mean = values[0] + values.iter().map(|v| v - values[0]).sum::<f64>() / n as f64;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    Ok((mean, t_critical(n - 1)? * (var / n as f64).sqrt()))
}

/// Extends `series` to `len` points with its last value (zero if empty).
pub fn pad_series(series: &[f64], len: usize) -> Vec<f64> {
    let last = series.last().copied().unwrap_or(0.0);
    let mut out = series.to_vec();
    if out.len() < len {
        out.resize(len, last);
    }
    out
}

fn curve_from_columns(columns: &[Vec<f64>], len: usize) -> Result<AggregateCurve> {
    let mut curve = AggregateCurve::default();
    let mut column = vec![0.0; columns.len()];
    for i in 0..len {
        for (c, s) in column.iter_mut().zip(columns) {
            *c = s[i];
        }
        let (mean, half) = mean_ci(&column)?;
        curve.x.push(i + 1);
        curve.mean.push(mean);
        curve.ci_low.push(mean - half);
        curve.ci_high.push(mean + half);
    }
    Ok(curve)
}

/// Aggregates over seeds. On the step axis every seed's series is padded to
/// `horizon` steps, or to the longest seed when `horizon` is `None`.
pub fn aggregate_to(result: &RunResult, axis: Axis, horizon: Option<usize>) -> Result<AggregateCurve> {
    if result.runs.len() < 2 {
        return Err(Error::Stats(format!(
            "a confidence interval needs at least 2 seeds, got {}",
            result.runs.len()
        )));
    }
    match axis {
        Axis::Episodes => {
            let columns: Vec<Vec<f64>> = result
                .runs
                .iter()
                .map(|r| r.episodes.iter().map(EpisodeLog::cumulative).collect())
                .collect();
            let len = columns.iter().map(Vec::len).min().unwrap_or(0);
            curve_from_columns(&columns, len)
        }
        Axis::Steps => {
            let len = horizon.unwrap_or(0).max(result.max_steps());
            let columns: Vec<Vec<f64>> = result.step_series().iter().map(|s| pad_series(s, len)).collect();
            curve_from_columns(&columns, len)
        }
    }
}

pub fn aggregate(result: &RunResult, axis: Axis) -> Result<AggregateCurve> {
    aggregate_to(result, axis, None)
}

/// Per-seed area under the padded step-axis series, summed over `horizon`
/// steps.
pub fn seed_aucs(result: &RunResult, horizon: usize) -> Vec<f64> {
    result
        .step_series()
        .iter()
        .map(|s| pad_series(s, horizon).iter().take(horizon).sum())
        .collect()
}

/// Longest run across all `results`, the shared AUC horizon.
pub fn common_horizon<'a>(results: impl IntoIterator<Item = &'a RunResult>) -> usize {
    results.into_iter().map(RunResult::max_steps).max().unwrap_or(0)
}

/// A labeled run inside a comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct ArmResult {
    pub label: String,
    pub arm: Arm,
    pub result: RunResult,
}

/// Arms run on the same maze and seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub arms: Vec<ArmResult>,
}

/// Mean AUC of one arm with its confidence half-width.
#[derive(Debug, Clone, PartialEq)]
pub struct AucSummary {
    pub label: String,
    pub seed_aucs: Vec<f64>,
    pub mean: f64,
    pub half_width: f64,
}

impl Comparison {
    pub fn horizon(&self) -> usize {
        common_horizon(self.arms.iter().map(|a| &a.result))
    }

    pub fn get(&self, label: &str) -> Option<&ArmResult> {
        self.arms.iter().find(|a| a.label == label)
    }

    /// Curves of every arm; step-axis curves share the common horizon.
    pub fn curves(&self, axis: Axis) -> Result<Vec<(String, AggregateCurve)>> {
        let horizon = self.horizon();
        self.arms
            .iter()
            .map(|a| Ok((a.label.clone(), aggregate_to(&a.result, axis, Some(horizon))?)))
            .collect()
    }

    pub fn auc_summaries(&self) -> Result<Vec<AucSummary>> {
        let horizon = self.horizon();
        self.arms
            .iter()
            .map(|a| {
                let seed_aucs = seed_aucs(&a.result, horizon);
                let (mean, half_width) = mean_ci(&seed_aucs)?;
                Ok(AucSummary { label: a.label.clone(), seed_aucs, mean, half_width })
            })
            .collect()
    }
}

fn run_arms(config: &ExperimentConfig, arms: Vec<(String, Arm)>) -> Result<Comparison> {
    config.validate()?;
    let world = load_maze(&config.maze)?;
    let arms = arms
        .into_iter()
        .map(|(label, arm)| {
            log::info!("running arm {label}");
            let result = run_arm(&world, arm, config.episodes, config.repeats, config.seed)?;
            Ok(ArmResult { label, arm, result })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Comparison { arms })
}

/// One arm per configured method.
pub fn compare_methods(config: &ExperimentConfig) -> Result<Comparison> {
    let arms = config
        .methods
        .iter()
        .map(|&method| (method.tag().to_string(), Arm { method, d: config.d, samples: config.samples }))
        .collect();
    run_arms(config, arms)
}

/// One arm per embedding dimension, all with the config's first method.
pub fn sweep_dimension(config: &ExperimentConfig, dims: &[usize]) -> Result<Comparison> {
    if dims.is_empty() {
        return Err(Error::InvalidConfig("dimension sweep needs at least one d".into()));
    }
    let method = config.method();
    let arms = dims
        .iter()
        .map(|&d| (format!("d{d}"), Arm { method, d, samples: config.samples }))
        .collect();
    run_arms(config, arms)
}

/// One arm per sample budget, plus the full-graph baseline when absent.
pub fn sweep_samples(config: &ExperimentConfig, budgets: &[SampleBudget]) -> Result<Comparison> {
    if budgets.is_empty() {
        return Err(Error::InvalidConfig("sample sweep needs at least one budget".into()));
    }
    let mut budgets = budgets.to_vec();
    if !budgets.contains(&SampleBudget::Full) {
        budgets.push(SampleBudget::Full);
    }
    let method = config.method();
    let arms = budgets
        .into_iter()
        .map(|samples| (samples.label(), Arm { method, d: config.d, samples }))
        .collect();
    run_arms(config, arms)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dqn::EpisodeLog;

    fn run(seed: u64, episodes: &[&[f64]]) -> SeedRun {
        SeedRun {
            seed,
            coverage: 1.0,
            episodes: episodes
                .iter()
                .map(|r| EpisodeLog { rewards: r.to_vec(), reached_goal: true })
                .collect(),
        }
    }

    #[test]
    fn episode_means() {
        let result = RunResult {
            runs: vec![run(0, &[&[1.0], &[2.0], &[3.0]]), run(1, &[&[3.0], &[4.0], &[5.0]])],
        };
        let c = aggregate(&result, Axis::Episodes).unwrap();
        assert_eq!(c.x, vec![1, 2, 3]);
        assert_eq!(c.mean, vec![2.0, 3.0, 4.0]);
        // sd = sqrt(2), so the half-width is t(0.95, 1) * sqrt(2) / sqrt(2).
        let half = 6.313751514675;
        assert!((c.ci_high[0] - 2.0 - half).abs() < 1e-9);
    }

    #[test]
    fn t_quantile_df1() {
        assert!((t_critical(1).unwrap() - 6.313751514675).abs() < 1e-9);
        assert!((t_critical(19).unwrap() - 1.729132811521).abs() < 1e-9);
    }

    #[test]
    fn identical_seeds_give_zero_width() {
        let result = RunResult { runs: vec![run(0, &[&[0.5, -0.1]]), run(1, &[&[0.5, -0.1]])] };
        let c = aggregate(&result, Axis::Steps).unwrap();
        assert_eq!(c.ci_low, c.mean);
        assert_eq!(c.ci_high, c.mean);
    }

    #[test]
    fn padding_keeps_final_value() {
        let result = RunResult { runs: vec![run(0, &[&[1.0, 1.0, 1.0]]), run(1, &[&[-1.0]])] };
        let c = aggregate(&result, Axis::Steps).unwrap();
        assert_eq!(c.mean, vec![0.0, 0.5, 1.0]);
        assert_eq!(seed_aucs(&result, 4), vec![1.0 + 2.0 + 3.0 + 3.0, -4.0]);
    }

    #[test]
    fn single_seed_has_no_interval() {
        let result = RunResult { runs: vec![run(0, &[&[1.0]])] };
        assert!(matches!(aggregate(&result, Axis::Episodes), Err(Error::Stats(_))));
    }
}
