//! Ground-truth environments, seeded Gaussian sampling and data-source
//! regimes.
//!
//! Random streams use ChaCha8 (`rand_chacha::ChaCha8Rng`): the experiment
//! seed is the key and the replication index selects the stream, so every
//! replication is reproducible and independent of scheduling.

use std::path::Path;
use std::sync::Arc;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::space::{ActionId, Context, ContextId, ContextSpace};
use crate::stats::dot;

/// Random stream `rep` of experiment `seed`.
pub fn replication_rng(seed: u64, rep: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(rep);
    rng
}

/// A mean and noise level for every feasible pair.
#[derive(Debug, Clone)]
pub struct TabularEnvironment {
    space: Arc<ContextSpace>,
    /// Per context, aligned with the feasible set.
    truth: Vec<Vec<f64>>,
    noise_sd: Vec<Vec<f64>>,
}

impl TabularEnvironment {
    pub fn new(space: ContextSpace, truth: Vec<Vec<f64>>, noise_sd: Vec<Vec<f64>>) -> Result<Self> {
        if truth.len() != space.num_contexts() || noise_sd.len() != space.num_contexts() {
            return Err(Error::Config(
                "truth and noise need one row per context".into(),
            ));
        }
        for x in space.context_ids() {
            let k = space.feasible(x).len();
            if truth[x.0].len() != k || noise_sd[x.0].len() != k {
                return Err(Error::Config(format!(
                    "context {x}: need one value per feasible action"
                )));
            }
            if truth[x.0].iter().any(|v| !v.is_finite()) {
                return Err(Error::Config(format!("context {x}: non-finite mean")));
            }
            if noise_sd[x.0].iter().any(|s| !(*s > 0.0 && s.is_finite())) {
                return Err(Error::Config(format!(
                    "context {x}: noise sd must be positive and finite"
                )));
            }
        }
        Ok(Self {
            space: Arc::new(space),
            truth,
            noise_sd,
        })
    }
}

/// Per-action coefficient vectors and noise levels.
#[derive(Debug, Clone)]
pub struct LinearEnvironment {
    space: Arc<ContextSpace>,
    betas: Vec<Vec<f64>>,
    noise_sd: Vec<f64>,
    /// Contexts used as the sampling design; empty means "all contexts".
    design: Vec<ContextId>,
}

impl LinearEnvironment {
    pub fn new(space: ContextSpace, betas: Vec<Vec<f64>>, noise_sd: Vec<f64>) -> Result<Self> {
        let d = space.dimension();
        if betas.len() != space.num_actions() || noise_sd.len() != space.num_actions() {
            return Err(Error::Config(
                "need one coefficient vector and noise level per action".into(),
            ));
        }
        if let Some(b) = betas.iter().find(|b| b.len() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: b.len(),
            });
        }
        if noise_sd.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
            return Err(Error::Config("noise sd must be positive and finite".into()));
        }
        Ok(Self {
            space: Arc::new(space),
            betas,
            noise_sd,
            design: Vec::new(),
        })
    }

    /// Restricts equal allocation to the contexts whose features equal the
    /// given design points.
    pub fn with_design_points(mut self, points: &[Vec<f64>]) -> Result<Self> {
        let mut design = Vec::with_capacity(points.len());
        for p in points {
            let x = self
                .space
                .context_ids()
                .find(|&x| self.space.features(x) == p.as_slice())
                .ok_or_else(|| Error::Config(format!("design point {p:?} is not a context")))?;
            design.push(x);
        }
        self.design = design;
        Ok(self)
    }

    pub fn beta(&self, a: ActionId) -> &[f64] {
        &self.betas[a.0]
    }
}

#[derive(Debug, Clone)]
pub enum Environment {
    Tabular(TabularEnvironment),
    Linear(LinearEnvironment),
}

impl From<TabularEnvironment> for Environment {
    fn from(e: TabularEnvironment) -> Self {
        Environment::Tabular(e)
    }
}

impl From<LinearEnvironment> for Environment {
    fn from(e: LinearEnvironment) -> Self {
        Environment::Linear(e)
    }
}

impl Environment {
    pub fn space(&self) -> &ContextSpace {
        self.shared_space()
    }

    pub fn shared_space(&self) -> &Arc<ContextSpace> {
        match self {
            Environment::Tabular(e) => &e.space,
            Environment::Linear(e) => &e.space,
        }
    }

    fn position(&self, x: ContextId, a: ActionId) -> Result<usize> {
        self.space().position(x, a).ok_or(Error::InfeasiblePair {
            context: x.0,
            action: a.0,
        })
    }

    /// True mean `y(x, a)`.
    pub fn mean(&self, x: ContextId, a: ActionId) -> Result<f64> {
        let p = self.position(x, a)?;
        Ok(match self {
            Environment::Tabular(e) => e.truth[x.0][p],
            Environment::Linear(e) => dot(e.space.features(x), &e.betas[a.0]),
        })
    }

    pub fn noise_sd(&self, x: ContextId, a: ActionId) -> Result<f64> {
        let p = self.position(x, a)?;
        Ok(match self {
            Environment::Tabular(e) => e.noise_sd[x.0][p],
            Environment::Linear(e) => e.noise_sd[a.0],
        })
    }

    /// Design contexts for equal allocation in the linear setting.
    pub fn design_points(&self) -> &[ContextId] {
        match self {
            Environment::Linear(e) => &e.design,
            Environment::Tabular(_) => &[],
        }
    }

    /// Best action in context `x`; ties go to the lowest id.
    pub fn optimal_action(&self, x: ContextId) -> ActionId {
        let mut best = None;
        for &a in self.space().feasible(x) {
            let y = self.mean(x, a).expect("feasible");
            if best.is_none_or(|(_, b)| y > b) {
                best = Some((a, y));
            }
        }
        best.expect("nonempty feasible set").0
    }

    pub fn optimal_value(&self, x: ContextId) -> f64 {
        self.mean(x, self.optimal_action(x)).expect("feasible")
    }

    /// `sum_x p(x) y(x, policy(x))`.
    pub fn policy_value(&self, policy: &[ActionId]) -> Result<f64> {
        let mut v = 0.0;
        for x in self.space().context_ids() {
            v += self.space().prob(x) * self.mean(x, policy[x.0])?;
        }
        Ok(v)
    }

    pub fn sample<R: Rng + ?Sized>(&self, x: ContextId, a: ActionId, rng: &mut R) -> Result<f64> {
        sample(self, x, a, rng)
    }
}

/// One noisy observation `y(x, a) + sigma(x, a) * z` with `z` standard normal.
pub fn sample<R: Rng + ?Sized>(
    env: &Environment,
    x: ContextId,
    a: ActionId,
    rng: &mut R,
) -> Result<f64> {
    let mean = env.mean(x, a)?;
    let sd = env.noise_sd(x, a)?;
    let z: f64 = rng.sample(StandardNormal);
    Ok(mean + sd * z)
}

fn uniform_weights(seed: u64, m: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..m).map(|_| rng.random::<f64>()).collect()
}

fn all_actions(k: usize) -> Vec<String> {
    (1..=k).map(|i| format!("a{i}")).collect()
}

/// Ten contexts and ten actions with `y(x_j, a_i) = |i - j| (0.1 + 0.1 (j - 1))`
/// and `sigma = 0.1 + 0.1 (i - 1) + 0.1 (j - 1)`, uniform context weights.
pub fn toy_env() -> TabularEnvironment {
    let (k, m) = (10usize, 10usize);
    let space = ContextSpace::full(
        (1..=m).map(|j| vec![j as f64]).collect(),
        &vec![1.0; m],
        all_actions(k),
        1,
    )
    .expect("valid toy space");
    let truth = (1..=m)
        .map(|j| {
            (1..=k)
                .map(|i| (i as f64 - j as f64).abs() * (0.1 + 0.1 * (j - 1) as f64))
                .collect()
        })
        .collect();
    let noise = (1..=m)
        .map(|j| {
            (1..=k)
                .map(|i| 0.1 + 0.1 * (i - 1) as f64 + 0.1 * (j - 1) as f64)
                .collect()
        })
        .collect();
    TabularEnvironment::new(space, truth, noise).expect("valid toy environment")
}

/// `y(x, a) = 0.26 (x^2 + a^2) - 0.48 x a` on `x in {0, 0.5, ..., 3}`,
/// `a in {-10, -5, 0, 5, 10}`, unit noise, context weights `U(0,1)` from `seed`.
pub fn matyas_env(seed: u64) -> TabularEnvironment {
    let xs: Vec<f64> = (0..7).map(|i| 0.5 * i as f64).collect();
    let acts = [-10.0, -5.0, 0.0, 5.0, 10.0];
    let w = uniform_weights(seed, xs.len());
    let labels = acts.iter().map(|a| format!("a={a}")).collect();
    let space = ContextSpace::full(xs.iter().map(|&x| vec![x]).collect(), &w, labels, 1)
        .expect("valid space");
    let truth = xs
        .iter()
        .map(|&x| {
            acts.iter()
                .map(|&a| 0.26 * (x * x + a * a) - 0.48 * x * a)
                .collect()
        })
        .collect();
    TabularEnvironment::new(space, truth, vec![vec![1.0; acts.len()]; xs.len()])
        .expect("valid environment")
}

/// Two-dimensional Dixon-Price response
/// `(a1 - x1)^2 + 2 (2 (a2 - x2)^2 - (a1 - x1))^2` with nine actions on
/// `{0, 0.8, 1.6}^2`, 25 contexts on `{-0.2, ..., 0.2}^2`, noise sd `U(0.5, 2)`
/// per pair and context weights `U(0,1)`, all drawn from `seed`.
pub fn dixon_price_env(seed: u64) -> TabularEnvironment {
    let grid_a = [0.0, 0.8, 1.6];
    let grid_x = [-0.2, -0.1, 0.0, 0.1, 0.2];
    let acts: Vec<[f64; 2]> = grid_a
        .iter()
        .flat_map(|&a1| grid_a.iter().map(move |&a2| [a1, a2]))
        .collect();
    let xs: Vec<[f64; 2]> = grid_x
        .iter()
        .flat_map(|&x1| grid_x.iter().map(move |&x2| [x1, x2]))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w: Vec<f64> = (0..xs.len()).map(|_| rng.random::<f64>()).collect();
    let noise = (0..xs.len())
        .map(|_| {
            (0..acts.len())
                .map(|_| rng.random_range(0.5..2.0))
                .collect()
        })
        .collect();
    let labels = acts
        .iter()
        .map(|a| format!("a=({},{})", a[0], a[1]))
        .collect();
    let space = ContextSpace::full(xs.iter().map(|x| x.to_vec()).collect(), &w, labels, 2)
        .expect("valid space");
    let truth = xs
        .iter()
        .map(|x| acts.iter().map(|a| dixon_price(a, x)).collect())
        .collect();
    TabularEnvironment::new(space, truth, noise).expect("valid environment")
}

pub fn dixon_price(a: &[f64; 2], x: &[f64; 2]) -> f64 {
    let g1 = a[0] - x[0];
    let g2 = a[1] - x[1];
    g1 * g1 + 2.0 * (2.0 * g2 * g2 - g1).powi(2)
}

/// Evenly spaced grid on `[0, 1]` per non-intercept dimension, with the
/// intercept first; the last coordinate varies fastest.
pub fn grid_features(d: usize, values_per_dim: usize) -> Vec<Vec<f64>> {
    let vals: Vec<f64> = (0..values_per_dim)
        .map(|i| {
            if values_per_dim == 1 {
                0.0
            } else {
                i as f64 / (values_per_dim - 1) as f64
            }
        })
        .collect();
    let mut out = vec![vec![1.0]];
    for _ in 1..d {
        out = out
            .into_iter()
            .flat_map(|p| {
                vals.iter()
                    .map(move |&v| p.iter().copied().chain([v]).collect::<Vec<_>>())
            })
            .collect();
    }
    out
}

/// Intercept plus every 0/1 combination of the other coordinates.
pub fn corner_design(d: usize) -> Vec<Vec<f64>> {
    grid_features(d, 2)
}

/// Three-dimensional benchmark: `X = (1, X2, X3)` on a 6x6 grid, uniform
/// weights, `beta(a_i) = (0.5 (i-1), 1 + 0.5 (i-1), 1 + 0.5 (i-1))`, unit
/// variance, corner design points.
pub fn standard_linear_env(k: usize) -> LinearEnvironment {
    let feats = grid_features(3, 6);
    let m = feats.len();
    let space = ContextSpace::full(feats, &vec![1.0; m], all_actions(k), 3).expect("valid space");
    let betas = (0..k)
        .map(|i| {
            let s = 0.5 * i as f64;
            vec![s, 1.0 + s, 1.0 + s]
        })
        .collect();
    LinearEnvironment::new(space, betas, vec![1.0; k])
        .and_then(|e| e.with_design_points(&corner_design(3)))
        .expect("valid environment")
}

/// Parameters for a randomly drawn linear instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomLinearConfig {
    pub k: usize,
    pub d: usize,
    pub values_per_dim: usize,
    #[serde(default = "default_beta_range")]
    pub beta_range: (f64, f64),
    #[serde(default = "default_sigma_range")]
    pub sigma_range: (f64, f64),
    /// Context weights per value of each non-intercept coordinate; the
    /// context weight is their product. Uniform when absent.
    #[serde(default)]
    pub dimension_weights: Option<Vec<f64>>,
    pub seed: u64,
}

fn default_beta_range() -> (f64, f64) {
    (0.0, 5.0)
}

fn default_sigma_range() -> (f64, f64) {
    (0.5, 2.0)
}

/// Draws `beta ~ U(beta_range)` and `sigma ~ U(sigma_range)` per action.
pub fn random_linear_env(config: &RandomLinearConfig) -> Result<LinearEnvironment> {
    if config.k == 0 || config.d == 0 || config.values_per_dim == 0 {
        return Err(Error::Config(
            "k, d and values_per_dim must be positive".into(),
        ));
    }
    let feats = grid_features(config.d, config.values_per_dim);
    let weights = match &config.dimension_weights {
        None => vec![1.0; feats.len()],
        Some(w) if w.len() == config.values_per_dim => {
            let index = |v: f64| ((v * (config.values_per_dim - 1) as f64).round()) as usize;
            feats
                .iter()
                .map(|f| f[1..].iter().map(|&v| w[index(v)]).product())
                .collect()
        }
        Some(_) => return Err(Error::Config("one weight per grid value required".into())),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let (bl, bh) = config.beta_range;
    let (sl, sh) = config.sigma_range;
    let betas = (0..config.k)
        .map(|_| (0..config.d).map(|_| rng.random_range(bl..bh)).collect())
        .collect();
    let noise = (0..config.k).map(|_| rng.random_range(sl..sh)).collect();
    let space = ContextSpace::full(feats, &weights, all_actions(config.k), config.d)?;
    LinearEnvironment::new(space, betas, noise)?.with_design_points(&corner_design(config.d))
}

const EC_CASES: [&str; 5] = [
    include_str!("../fixtures/ec_case_1.json"),
    include_str!("../fixtures/ec_case_2.json"),
    include_str!("../fixtures/ec_case_3.json"),
    include_str!("../fixtures/ec_case_4.json"),
    include_str!("../fixtures/ec_case_5.json"),
];

/// The five published random linear instances (cases 1 to 5).
pub fn ec_case(case: usize) -> Result<LinearEnvironment> {
    let text = EC_CASES
        .get(case.wrapping_sub(1))
        .ok_or_else(|| Error::Config(format!("no random case {case}; expected 1..=5")))?;
    match serde_json::from_str::<EnvironmentFile>(text)?.build()? {
        Environment::Linear(e) => Ok(e),
        Environment::Tabular(_) => unreachable!("fixtures are linear"),
    }
}

/// One context in an environment file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextEntry {
    pub id: String,
    /// Defaults to `[1.0]`.
    #[serde(default)]
    pub features: Option<Vec<f64>>,
    /// Feasible action ids; all actions when absent.
    #[serde(default)]
    pub feasible: Option<Vec<String>>,
}

/// On-disk environment description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum EnvironmentFile {
    Tabular {
        #[serde(default)]
        name: Option<String>,
        #[serde(default)]
        schema: Option<u32>,
        contexts: Vec<ContextEntry>,
        actions: Vec<String>,
        /// Per context, one mean per feasible action.
        truth: Vec<Vec<f64>>,
        /// Same shape as `truth`.
        noise: Vec<Vec<f64>>,
        /// Unnormalized context weights; uniform when absent.
        #[serde(default)]
        weights: Option<Vec<f64>>,
    },
    Linear {
        #[serde(default)]
        name: Option<String>,
        #[serde(default)]
        schema: Option<u32>,
        contexts: Vec<ContextEntry>,
        actions: Vec<String>,
        /// One coefficient vector per action.
        betas: Vec<Vec<f64>>,
        /// One noise sd per action.
        noise: Vec<f64>,
        #[serde(default)]
        weights: Option<Vec<f64>>,
        #[serde(default)]
        design_points: Option<Vec<Vec<f64>>>,
    },
}

fn build_space(
    contexts: &[ContextEntry],
    actions: &[String],
    weights: Option<&[f64]>,
) -> Result<ContextSpace> {
    let m = contexts.len();
    let weights = match weights {
        Some(w) if w.len() == m => w.to_vec(),
        Some(w) => {
            return Err(Error::Config(format!(
                "{} weights for {m} contexts",
                w.len()
            )))
        }
        None => vec![1.0; m],
    };
    if weights.iter().any(|w| !(*w > 0.0 && w.is_finite())) {
        return Err(Error::Config("context weights must be positive".into()));
    }
    let total: f64 = weights.iter().sum();
    let d = contexts
        .first()
        .and_then(|c| c.features.as_ref())
        .map_or(1, Vec::len);
    let mut out = Vec::with_capacity(m);
    for (c, w) in contexts.iter().zip(&weights) {
        let feasible = match &c.feasible {
            None => (0..actions.len()).map(ActionId).collect(),
            Some(ids) => ids
                .iter()
                .map(|id| {
                    actions
                        .iter()
                        .position(|a| a == id)
                        .map(ActionId)
                        .ok_or_else(|| {
                            Error::Config(format!("context {:?}: unknown action {id:?}", c.id))
                        })
                })
                .collect::<Result<Vec<_>>>()?,
        };
        out.push(Context {
            label: c.id.clone(),
            features: c.features.clone().unwrap_or_else(|| vec![1.0]),
            prob: w / total,
            feasible,
        });
    }
    // Absorb the rounding residue of the normalization.
    let residue = 1.0 - out.iter().map(|c| c.prob).sum::<f64>();
    if let Some(c) = out.iter_mut().max_by(|a, b| a.prob.total_cmp(&b.prob)) {
        c.prob += residue;
    }
    ContextSpace::new(out, actions.to_vec(), d)
}

impl EnvironmentFile {
    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }

    pub fn build(&self) -> Result<Environment> {
        match self {
            EnvironmentFile::Tabular {
                contexts,
                actions,
                truth,
                noise,
                weights,
                ..
            } => {
                let space = build_space(contexts, actions, weights.as_deref())?;
                Ok(TabularEnvironment::new(space, truth.clone(), noise.clone())?.into())
            }
            EnvironmentFile::Linear {
                contexts,
                actions,
                betas,
                noise,
                weights,
                design_points,
                ..
            } => {
                let space = build_space(contexts, actions, weights.as_deref())?;
                let env = LinearEnvironment::new(space, betas.clone(), noise.clone())?;
                let env = match design_points {
                    Some(p) => env.with_design_points(p)?,
                    None => env,
                };
                Ok(env.into())
            }
        }
    }
}

/// Where the next stage's context (and possibly action) comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum DataSource {
    /// The learner picks both context and action.
    Simulation,
    /// Contexts arrive from `p(x)`; the learner picks the action.
    Online,
    /// A predetermined `(context index, action index)` sequence.
    OfflineLog { log: Vec<(usize, usize)> },
    /// Consecutive segments of the other regimes. Offline segments consume
    /// the shared `log` in order; a segment without `stages` runs forever
    /// and must come last.
    Hybrid {
        segments: Vec<Segment>,
        #[serde(default)]
        log: Vec<(usize, usize)>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Simulation,
    Online,
    Offline,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub regime: Regime,
    #[serde(default)]
    pub stages: Option<u64>,
}

/// What the data source fixes at a given stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SourceDraw {
    LearnerChooses,
    Context(ContextId),
    Pair(ContextId, ActionId),
}

/// A validated data source bound to a context space.
#[derive(Debug, Clone)]
pub struct SourcePlan {
    segments: Vec<(Regime, Option<u64>)>,
    log: Vec<(ContextId, ActionId)>,
    contexts: WeightedIndex<f64>,
}

impl SourcePlan {
    pub fn new(source: &DataSource, space: &ContextSpace) -> Result<Self> {
        let (segments, log) = match source {
            DataSource::Simulation => (vec![(Regime::Simulation, None)], &[][..]),
            DataSource::Online => (vec![(Regime::Online, None)], &[][..]),
            DataSource::OfflineLog { log } => {
                (vec![(Regime::Offline, Some(log.len() as u64))], &log[..])
            }
            DataSource::Hybrid { segments, log } => {
                if segments.is_empty() {
                    return Err(Error::Config("hybrid schedule has no segments".into()));
                }
                if segments[..segments.len() - 1]
                    .iter()
                    .any(|s| s.stages.is_none())
                {
                    return Err(Error::Config(
                        "only the last hybrid segment may be unbounded".into(),
                    ));
                }
                let offline: u64 = segments
                    .iter()
                    .filter(|s| s.regime == Regime::Offline)
                    .map(|s| s.stages.unwrap_or(u64::MAX))
                    .fold(0, u64::saturating_add);
                if offline != u64::MAX && offline > log.len() as u64 {
                    return Err(Error::Config(
                        "offline segments are longer than the log".into(),
                    ));
                }
                (
                    segments.iter().map(|s| (s.regime, s.stages)).collect(),
                    &log[..],
                )
            }
        };
        let log = log
            .iter()
            .map(|&(x, a)| {
                let (x, a) = (ContextId(x), ActionId(a));
                if space.is_feasible(x, a) {
                    Ok((x, a))
                } else {
                    Err(Error::InfeasiblePair {
                        context: x.0,
                        action: a.0,
                    })
                }
            })
            .collect::<Result<Vec<_>>>()?;
        let probs: Vec<f64> = space.contexts().iter().map(|c| c.prob).collect();
        let contexts = WeightedIndex::new(&probs).map_err(|e| Error::Config(e.to_string()))?;
        Ok(Self {
            segments,
            log,
            contexts,
        })
    }

    /// Draw for 1-based `stage`.
    pub fn next<R: Rng + ?Sized>(&self, rng: &mut R, stage: u64) -> Result<SourceDraw> {
        debug_assert!(stage >= 1);
        let mut start = 0u64;
        let mut offline_before = 0u64;
        for &(regime, len) in &self.segments {
            let end = len.map_or(u64::MAX, |l| start.saturating_add(l));
            if stage <= end {
                let offset = stage - start - 1;
                return Ok(match regime {
                    Regime::Simulation => SourceDraw::LearnerChooses,
                    Regime::Online => SourceDraw::Context(ContextId(self.contexts.sample(rng))),
                    Regime::Offline => {
                        let i = (offline_before + offset) as usize;
                        let (x, a) = *self.log.get(i).ok_or(Error::SourceExhausted(stage))?;
                        SourceDraw::Pair(x, a)
                    }
                });
            }
            if regime == Regime::Offline {
                offline_before += len.unwrap_or(0);
            }
            start = end;
        }
        Err(Error::SourceExhausted(stage))
    }
}

/// Convenience wrapper around [`SourcePlan::next`].
pub fn next_context<R: Rng + ?Sized>(
    source: &DataSource,
    space: &ContextSpace,
    rng: &mut R,
    stage: u64,
) -> Result<SourceDraw> {
    SourcePlan::new(source, space)?.next(rng, stage)
}
