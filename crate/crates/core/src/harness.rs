//! Monte Carlo experiments: configuration, the replication loop, parallel
//! aggregation and CSV output.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::boundary::{asymptotic_reference, gamma, make_budget, Criterion, ErrorBudget};
use crate::env::{
    dixon_price_env, ec_case, matyas_env, random_linear_env, replication_rng, standard_linear_env,
    toy_env, DataSource, Environment, EnvironmentFile, RandomLinearConfig, SourceDraw, SourcePlan,
};
use crate::error::{Error, Result};
use crate::linear::{check_stop_p1_linear, check_stop_p2_linear, LinearState};
use crate::sampling::{Mode, SamplingDecision, StateView, StrategyConfig};
use crate::space::{ActionId, ContextId};
use crate::unstructured::{StopTracker, UnstructuredState};

/// Version written in the `# schema=` comment of every CSV file.
pub const CSV_SCHEMA: u32 = 1;

/// Relative tolerance when comparing true values against `optimum - delta`,
/// so that gaps equal to `delta` up to rounding count as delta-optimal.
const VALUE_TOLERANCE: f64 = 1e-12;

/// Built-in environments by name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum BuiltinEnvironment {
    Toy,
    Matyas {
        #[serde(default)]
        seed: u64,
    },
    DixonPrice {
        #[serde(default)]
        seed: u64,
    },
    StandardLinear {
        k: usize,
    },
    RandomLinear(RandomLinearConfig),
    EcCase {
        case: usize,
    },
}

/// Where an experiment's environment comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvironmentRef {
    Builtin(BuiltinEnvironment),
    /// JSON environment file; relative paths resolve against the config file.
    File(PathBuf),
    Inline(EnvironmentFile),
}

impl EnvironmentRef {
    pub fn build(&self) -> Result<Environment> {
        match self {
            EnvironmentRef::Builtin(b) => Ok(match b {
                BuiltinEnvironment::Toy => toy_env().into(),
                BuiltinEnvironment::Matyas { seed } => matyas_env(*seed).into(),
                BuiltinEnvironment::DixonPrice { seed } => dixon_price_env(*seed).into(),
                BuiltinEnvironment::StandardLinear { k } => {
                    if *k == 0 {
                        return Err(Error::Config("k must be positive".into()));
                    }
                    standard_linear_env(*k).into()
                }
                BuiltinEnvironment::RandomLinear(c) => random_linear_env(c)?.into(),
                BuiltinEnvironment::EcCase { case } => ec_case(*case)?.into(),
            }),
            EnvironmentRef::File(path) => EnvironmentFile::load(path)?.build(),
            EnvironmentRef::Inline(file) => file.build(),
        }
    }
}

/// Which model the learner fits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Setting {
    Unstructured,
    Linear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub environment: EnvironmentRef,
    pub setting: Setting,
    pub criterion: Criterion,
    pub alpha: f64,
    pub delta: f64,
    #[serde(default)]
    pub strategy: StrategyConfig,
    /// Stopping is checked every `check_interval` stages; larger values
    /// only delay stopping.
    #[serde(default = "default_check_interval")]
    pub check_interval: u64,
    #[serde(default = "default_source")]
    pub source: DataSource,
    #[serde(default = "default_replications")]
    pub replications: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_t_max")]
    pub t_max: u64,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

fn default_check_interval() -> u64 {
    1
}

fn default_source() -> DataSource {
    DataSource::Simulation
}

fn default_replications() -> u64 {
    100
}

fn default_t_max() -> u64 {
    10_000_000
}

impl ExperimentConfig {
    /// Config with defaults for everything but the essentials.
    pub fn new(
        environment: EnvironmentRef,
        setting: Setting,
        criterion: Criterion,
        alpha: f64,
        delta: f64,
    ) -> Self {
        Self {
            environment,
            setting,
            criterion,
            alpha,
            delta,
            strategy: StrategyConfig::default(),
            check_interval: default_check_interval(),
            source: default_source(),
            replications: default_replications(),
            seed: 0,
            t_max: default_t_max(),
            output: None,
        }
    }

    /// Reads a JSON config; a relative environment file path is resolved
    /// against the config's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let mut config: Self = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        if let EnvironmentRef::File(p) = &mut config.environment {
            if p.is_relative() {
                if let Some(dir) = path.parent() {
                    *p = dir.join(&*p);
                }
            }
        }
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config(format!(
                "alpha must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        if !(self.delta >= 0.0) {
            return Err(Error::Config(format!(
                "delta must be nonnegative, got {}",
                self.delta
            )));
        }
        if self.t_max == 0 {
            return Err(Error::Config("t_max must be at least 1".into()));
        }
        if self.replications == 0 {
            return Err(Error::Config("replications must be at least 1".into()));
        }
        if self.check_interval == 0 {
            return Err(Error::Config("check_interval must be at least 1".into()));
        }
        Ok(())
    }
}

/// Outcome of one replication.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationResult {
    pub rep: u64,
    /// Stopping stage, or `t_max` when censored.
    pub stop_time: u64,
    pub censored: bool,
    /// Selected action per context.
    pub policy: Vec<ActionId>,
    /// Context-weighted fraction of delta-optimal selections.
    pub p1_indicator: f64,
    /// Whether the policy value is within delta of the optimum.
    pub p2_indicator: bool,
}

/// A validated config with its environment built once and shared by all
/// replications.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub config: ExperimentConfig,
    env: Arc<Environment>,
    budget: ErrorBudget,
}

impl Experiment {
    pub fn new(config: ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let env = config.environment.build()?;
        Self::with_environment(config, env)
    }

    /// Uses `env` instead of building `config.environment`.
    pub fn with_environment(config: ExperimentConfig, env: Environment) -> Result<Self> {
        config.validate()?;
        let budget = make_budget(env.space(), config.criterion, config.alpha)?;
        Ok(Self {
            config,
            env: Arc::new(env),
            budget,
        })
    }

    pub fn environment(&self) -> &Environment {
        &self.env
    }

    pub fn budget(&self) -> &ErrorBudget {
        &self.budget
    }

    /// Runs replication `rep` on its own random substream.
    pub fn run_replication(&self, rep: u64) -> Result<ReplicationResult> {
        let (stop_time, censored, policy) = match self.config.setting {
            Setting::Unstructured => self.run_unstructured(rep)?,
            Setting::Linear => self.run_linear(rep)?,
        };
        let policy = self.complete_policy(policy);
        let (p1_indicator, p2_indicator) = self.indicators(&policy)?;
        Ok(ReplicationResult {
            rep,
            stop_time,
            censored,
            policy,
            p1_indicator,
            p2_indicator,
        })
    }

    fn next_decision(
        &self,
        plan: &SourcePlan,
        view: StateView<'_>,
        rng: &mut rand_chacha::ChaCha8Rng,
        stage: u64,
    ) -> Result<SamplingDecision> {
        let mode = match plan.next(rng, stage)? {
            SourceDraw::Pair(context, action) => return Ok(SamplingDecision { context, action }),
            SourceDraw::LearnerChooses => Mode::Simulation,
            SourceDraw::Context(x) => Mode::Online(x),
        };
        self.config
            .strategy
            .decide(view, mode, &self.budget, self.config.delta, rng)
    }

    fn run_unstructured(&self, rep: u64) -> Result<(u64, bool, Vec<Option<ActionId>>)> {
        let c = &self.config;
        let space = self.env.shared_space().clone();
        let plan = SourcePlan::new(&c.source, &space)?;
        let mut rng = replication_rng(c.seed, rep);
        let mut state = UnstructuredState::new(space.clone());
        let mut tracker = StopTracker::new(&space, self.budget.clone(), c.delta);
        let n0 = c.strategy.n0();
        let mut initialized = false;
        for t in 1..=c.t_max {
            let dec = self.next_decision(&plan, StateView::Unstructured(&state), &mut rng, t)?;
            let y = self.env.sample(dec.context, dec.action, &mut rng)?;
            state.update(dec.context, dec.action, y)?;
            tracker.invalidate(dec.context);
            if t % c.check_interval != 0 {
                continue;
            }
            initialized = initialized || StateView::Unstructured(&state).initialized(n0);
            if initialized && tracker.should_stop(&state)? {
                return Ok((t, false, tracker.decide(&state)?.policy));
            }
        }
        Ok((c.t_max, true, tracker.decide(&state)?.policy))
    }

    fn run_linear(&self, rep: u64) -> Result<(u64, bool, Vec<Option<ActionId>>)> {
        let c = &self.config;
        let space = self.env.shared_space().clone();
        let plan = SourcePlan::new(&c.source, &space)?;
        let mut rng = replication_rng(c.seed, rep);
        let mut state = LinearState::new(space)?;
        let design = self.env.design_points().to_vec();
        let n0 = c.strategy.n0();
        let check = match c.criterion {
            Criterion::P1 => check_stop_p1_linear,
            Criterion::P2 => check_stop_p2_linear,
        };
        let mut initialized = false;
        for t in 1..=c.t_max {
            let dec = self.next_decision(&plan, StateView::Linear(&state, &design), &mut rng, t)?;
            let y = self.env.sample(dec.context, dec.action, &mut rng)?;
            state.update(dec.context, dec.action, y)?;
            if t % c.check_interval != 0 {
                continue;
            }
            initialized = initialized || StateView::Linear(&state, &design).initialized(n0);
            if initialized {
                let decision = check(&state, &self.budget, c.delta)?;
                if decision.stop {
                    return Ok((t, false, decision.policy));
                }
            }
        }
        let policy = if state.t0().is_some() {
            check(&state, &self.budget, c.delta)?.policy
        } else {
            vec![None; self.env.space().num_contexts()]
        };
        Ok((c.t_max, true, policy))
    }

    /// Fills contexts without an empirical best (censored before any data)
    /// with their first feasible action.
    fn complete_policy(&self, policy: Vec<Option<ActionId>>) -> Vec<ActionId> {
        let space = self.env.space();
        policy
            .into_iter()
            .enumerate()
            .map(|(i, a)| a.unwrap_or_else(|| space.feasible(ContextId(i))[0]))
            .collect()
    }

    fn indicators(&self, policy: &[ActionId]) -> Result<(f64, bool)> {
        let space = self.env.space();
        let delta = self.config.delta;
        let mut p1 = 0.0;
        for x in space.context_ids() {
            let best = self.env.optimal_value(x);
            let got = self.env.mean(x, policy[x.0])?;
            if within(got, best, delta) {
                p1 += space.prob(x);
            }
        }
        let optimal: Vec<ActionId> = space
            .context_ids()
            .map(|x| self.env.optimal_action(x))
            .collect();
        let p2 = within(
            self.env.policy_value(policy)?,
            self.env.policy_value(&optimal)?,
            delta,
        );
        Ok((p1.min(1.0), p2))
    }

    /// All replications on `workers` threads (`None`: rayon's default).
    /// Results are indexed by replication, so the report does not depend on
    /// the worker count.
    pub fn run(&self, workers: Option<usize>) -> Result<AggregateReport> {
        let start = Instant::now();
        let mut builder = rayon::ThreadPoolBuilder::new();
        if let Some(w) = workers {
            builder = builder.num_threads(w.max(1));
        }
        let pool = builder.build().map_err(|e| Error::Config(e.to_string()))?;
        let results = pool.install(|| {
            (0..self.config.replications)
                .into_par_iter()
                .map(|rep| self.run_replication(rep))
                .collect::<Result<Vec<_>>>()
        })?;
        let mut report = AggregateReport::from_results(self.config.clone(), results);
        report.wall_time_secs = start.elapsed().as_secs_f64();
        Ok(report)
    }
}

fn within(value: f64, optimum: f64, delta: f64) -> bool {
    value >= optimum - delta - VALUE_TOLERANCE * optimum.abs().max(1.0)
}

/// Convenience wrapper: builds the environment and runs one replication.
pub fn run_replication(config: &ExperimentConfig, rep: u64) -> Result<ReplicationResult> {
    Experiment::new(config.clone())?.run_replication(rep)
}

/// Convenience wrapper: builds the environment and runs every replication.
pub fn run_experiment(
    config: &ExperimentConfig,
    workers: Option<usize>,
) -> Result<AggregateReport> {
    Experiment::new(config.clone())?.run(workers)
}

/// Summary over replications. Censored runs count at `t_max`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AggregateReport {
    pub replications: u64,
    pub avg_ssize: f64,
    /// Sample standard deviation (divisor `n - 1`; 0 for one replication).
    pub std_ssize: f64,
    pub empirical_p1: f64,
    pub empirical_p2: f64,
    pub censor_count: u64,
    pub config: ExperimentConfig,
    /// Not part of equality.
    pub wall_time_secs: f64,
    pub results: Vec<ReplicationResult>,
}

impl PartialEq for AggregateReport {
    fn eq(&self, other: &Self) -> bool {
        self.replications == other.replications
            && self.avg_ssize == other.avg_ssize
            && self.std_ssize == other.std_ssize
            && self.empirical_p1 == other.empirical_p1
            && self.empirical_p2 == other.empirical_p2
            && self.censor_count == other.censor_count
            && self.config == other.config
            && self.results == other.results
    }
}

impl AggregateReport {
    /// Aggregates in replication order.
    pub fn from_results(config: ExperimentConfig, mut results: Vec<ReplicationResult>) -> Self {
        results.sort_by_key(|r| r.rep);
        let n = results.len() as f64;
        let avg = results.iter().map(|r| r.stop_time as f64).sum::<f64>() / n;
        let ss: f64 = results
            .iter()
            .map(|r| (r.stop_time as f64 - avg).powi(2))
            .sum();
        let std = if results.len() > 1 {
            (ss / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Self {
            replications: results.len() as u64,
            avg_ssize: avg,
            std_ssize: std,
            empirical_p1: results.iter().map(|r| r.p1_indicator).sum::<f64>() / n,
            empirical_p2: results.iter().filter(|r| r.p2_indicator).count() as f64 / n,
            censor_count: results.iter().filter(|r| r.censored).count() as u64,
            config,
            wall_time_secs: 0.0,
            results,
        }
    }

    /// One row per replication plus a `summary` row. In the summary row,
    /// `rep` holds the replication count, `stop_time` the average, and
    /// `censored` the censor count.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "# schema={CSV_SCHEMA}")?;
        writeln!(out, "kind,rep,stop_time,censored,p1,p2,std_ssize,policy")?;
        for r in &self.results {
            let policy: Vec<String> = r.policy.iter().map(|a| a.0.to_string()).collect();
            writeln!(
                out,
                "replication,{},{},{},{},{},,{}",
                r.rep,
                r.stop_time,
                r.censored as u8,
                r.p1_indicator,
                r.p2_indicator as u8,
                policy.join(";")
            )?;
        }
        writeln!(
            out,
            "summary,{},{},{},{},{},{},",
            self.replications,
            self.avg_ssize,
            self.censor_count,
            self.empirical_p1,
            self.empirical_p2,
            self.std_ssize
        )?;
        Ok(())
    }
}

/// `points` log-spaced integer stages in `[1, t_max]`, deduplicated.
pub fn log_grid(t_max: u64, points: usize) -> Vec<u64> {
    let top = (t_max.max(1) as f64).log10();
    let mut grid: Vec<u64> = (0..points)
        .map(|i| {
            let e = if points > 1 {
                top * i as f64 / (points - 1) as f64
            } else {
                top
            };
            (10f64.powf(e).round() as u64).clamp(1, t_max.max(1))
        })
        .collect();
    grid.dedup();
    grid
}

/// Boundary values `gamma(t, alpha)` against the asymptotic reference
/// `2 ln(1/alpha) + ln(t+1)`, one row per `(alpha, t)`.
pub fn emit_boundary_csv<W: Write>(alphas: &[f64], t_grid: &[u64], mut out: W) -> Result<()> {
    if let Some(a) = alphas.iter().find(|a| !(**a > 0.0 && **a < 1.0)) {
        return Err(Error::Config(format!("alpha must lie in (0, 1), got {a}")));
    }
    writeln!(out, "# schema={CSV_SCHEMA}")?;
    writeln!(out, "t,alpha,gamma,asymptotic_reference")?;
    for &alpha in alphas {
        for &t in t_grid {
            writeln!(
                out,
                "{t},{alpha},{},{}",
                gamma(t, alpha),
                asymptotic_reference(t as f64, alpha)
            )?;
        }
    }
    Ok(())
}
