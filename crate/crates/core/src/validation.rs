//! Independent checks of the boundary calibration: Gaussian mixture
//! martingales, Ville-type coverage experiments, and a direct
//! constrained-likelihood oracle for the linear quadratic form.
//!
//! Nothing here is used by the stopping rules themselves.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::boundary::{boundary_unstructured, gamma, gamma_l};
use crate::env::replication_rng;
use crate::error::{Error, Result};
use crate::stats::{dot, LinearActionStats, PairStats, SymmetricFactor};

/// Values `G_t` of a test martingale starting at stage `first_stage`.
#[derive(Debug, Clone, PartialEq)]
pub struct MartingalePath {
    pub values: Vec<f64>,
    pub first_stage: u64,
    pub s: f64,
}

impl MartingalePath {
    pub fn sup(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    /// Value at 1-based stage `t`, if emitted.
    pub fn at(&self, t: u64) -> Option<f64> {
        t.checked_sub(self.first_stage)
            .and_then(|i| self.values.get(i as usize))
            .copied()
    }
}

/// Mixture martingale for a Gaussian mean `mu` with unknown variance and
/// prior scale `s`, evaluated on every prefix of `samples`.
pub fn gaussian_mixture_martingale(samples: &[f64], mu: f64, s: f64) -> Result<MartingalePath> {
    if samples.is_empty() {
        return Err(Error::Precondition("need at least one sample".into()));
    }
    if !(s > 0.0) {
        return Err(Error::Precondition("prior scale must be positive".into()));
    }
    let s2 = s * s;
    let mut dev = 0.0;
    let mut sq = 0.0;
    let mut values = Vec::with_capacity(samples.len());
    for (i, &y) in samples.iter().enumerate() {
        let t = (i + 1) as f64;
        dev += y - mu;
        sq += (y - mu) * (y - mu);
        let q = if dev == 0.0 {
            0.0
        } else if sq > 0.0 {
            dev * dev / ((t + s2) * sq)
        } else {
            return Err(Error::Degenerate(
                "zero sum of squares with nonzero deviation".into(),
            ));
        };
        let log_g = 0.5 * (s2 / (t + s2)).ln() - 0.5 * t * (-q).ln_1p();
        values.push(log_g.exp());
    }
    Ok(MartingalePath {
        values,
        first_stage: 1,
        s,
    })
}

/// Mixture martingale for the direction `f` of a least-squares fit, with
/// true coefficients `beta_true`; emitted from the first stage with a
/// well-defined fit.
pub fn linear_mixture_martingale(
    features: &[Vec<f64>],
    ys: &[f64],
    f: &[f64],
    beta_true: &[f64],
    s: f64,
) -> Result<MartingalePath> {
    let d = f.len();
    if beta_true.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: beta_true.len(),
        });
    }
    if features.len() != ys.len() {
        return Err(Error::Config(
            "one response per feature vector required".into(),
        ));
    }
    let s2 = s * s;
    let truth = dot(f, beta_true);
    let mut stats = LinearActionStats::new(d);
    let mut values = Vec::new();
    let mut first_stage = 0;
    for (x, &y) in features.iter().zip(ys) {
        stats.update(x, y)?;
        let Some(factor) = stats.factor() else {
            continue;
        };
        if stats.n as usize <= d {
            continue;
        }
        let fit = stats.ols_solution();
        let lambda = 1.0 / factor.quadratic_inverse(f);
        let dev = dot(f, &fit.beta_hat) - truth;
        let rss = fit.s2 * (stats.n as usize - d) as f64;
        let g = linear_mixture_value(stats.n, d, lambda, s2, rss, dev * dev);
        if values.is_empty() {
            first_stage = stats.n;
        }
        values.push(g);
    }
    Ok(MartingalePath {
        values,
        first_stage,
        s,
    })
}

fn linear_mixture_value(n: u64, d: usize, lambda: f64, s2: f64, rss: f64, dev2: f64) -> f64 {
    let base = (s2 + lambda) * rss;
    let num = base + s2 * dev2 * lambda;
    let den = base + (s2 + lambda) * lambda * dev2;
    let ratio = if den > 0.0 { num / den } else { 1.0 };
    let power = -0.5 * (n as usize - d + 1) as f64;
    (0.5 * (s2 / (s2 + lambda)).ln() + power * ratio.ln()).exp()
}

/// Unit-scale mixture martingale with `n` samples written as a function of
/// the self-normalized deviation `v = n (mean - mu)^2 / (2 S^2)`, where
/// `S^2` is the maximum-likelihood (divisor `n`) variance.
pub fn mixture_value(n: u64, v: f64) -> f64 {
    let n = n as f64;
    let w = 2.0 * v;
    let ratio = (n * n + n + w) / ((n + 1.0) * (n + w));
    (-0.5 * (n + 1.0).ln() - 0.5 * n * ratio.ln()).exp()
}

/// Linear analogue of [`mixture_value`] with information `lambda = 1/Sigma`
/// and `v = dev^2 / (2 S^2 Sigma)`, `S^2` with divisor `n - d`.
pub fn linear_mixture_from_deviation(n: u64, d: usize, lambda: f64, v: f64) -> f64 {
    let dof = (n as usize - d) as f64;
    let w = 2.0 * v;
    let ratio = (dof * (lambda + 1.0) + w) / ((lambda + 1.0) * (dof + w));
    (-0.5 * (lambda + 1.0).ln() - 0.5 * (dof + 1.0) * ratio.ln()).exp()
}

/// Fraction of `reps` generated paths whose supremum reaches `threshold`.
pub fn ville_violation_rate<F>(mut path_generator: F, threshold: f64, reps: u64) -> f64
where
    F: FnMut(u64) -> MartingalePath,
{
    assert!(threshold > 1.0, "threshold must exceed one");
    let hits = (0..reps)
        .filter(|&r| path_generator(r).sup() >= threshold)
        .count();
    hits as f64 / reps as f64
}

/// Pointwise product of two paths over their common stages.
pub fn product_path(a: &MartingalePath, b: &MartingalePath) -> MartingalePath {
    let start = a.first_stage.max(b.first_stage);
    let end = (a.first_stage + a.values.len() as u64).min(b.first_stage + b.values.len() as u64);
    let values = (start..end)
        .map(|t| a.at(t).unwrap() * b.at(t).unwrap())
        .collect();
    MartingalePath {
        values,
        first_stage: start,
        s: a.s,
    }
}

/// Outcome of a coverage experiment against a bound `rate <= bound`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoverageReport {
    pub violations: u64,
    pub reps: u64,
    pub rate: f64,
    /// `alpha + 3 sqrt(alpha (1 - alpha) / reps)`.
    pub bound: f64,
}

impl CoverageReport {
    fn new(violations: u64, reps: u64, alpha: f64) -> Self {
        let rate = violations as f64 / reps as f64;
        Self {
            violations,
            reps,
            rate,
            bound: alpha + 3.0 * (alpha * (1.0 - alpha) / reps as f64).sqrt(),
        }
    }

    pub fn passed(&self) -> bool {
        self.rate <= self.bound
    }
}

/// Two Gaussian streams with means 0 and standard deviations 1 and 2,
/// sampled alternately for `horizon` stages; counts replications where the
/// summed self-normalized deviation ever exceeds the two-stream boundary.
pub fn two_stream_coverage(
    reps: u64,
    horizon: u64,
    alpha: f64,
    seed: u64,
) -> Result<CoverageReport> {
    let sds = [1.0, 2.0];
    let mut violations = 0;
    for rep in 0..reps {
        let mut rng = replication_rng(seed, rep);
        let mut streams = [PairStats::new(), PairStats::new()];
        for t in 0..horizon {
            let r = (t % 2) as usize;
            let z: f64 = rng.sample(StandardNormal);
            streams[r].push(sds[r] * z);
            if !streams.iter().all(PairStats::is_ready) {
                continue;
            }
            let u: f64 = streams
                .iter()
                .map(|s| s.n as f64 * s.mean * s.mean / (2.0 * s.variance().unwrap()))
                .sum();
            let b = boundary_unstructured(streams[0].n, streams[1].n, alpha)?;
            if u > b.value {
                violations += 1;
                break;
            }
        }
    }
    Ok(CoverageReport::new(violations, reps, alpha))
}

/// Linear analogue of [`two_stream_coverage`]: two `d`-dimensional regressions
/// on a bounded random design (intercept plus `U(0,1)` covariates), noise
/// sds 1 and 2, random coefficients and a random direction per replication.
pub fn linear_two_stream_coverage(
    reps: u64,
    horizon: u64,
    alpha: f64,
    d: usize,
    seed: u64,
) -> Result<CoverageReport> {
    let sds = [1.0, 2.0];
    let mut violations = 0;
    for rep in 0..reps {
        let mut rng = replication_rng(seed, rep);
        let draw_point = |rng: &mut rand_chacha::ChaCha8Rng| {
            let mut f = vec![1.0];
            f.extend((1..d).map(|_| rng.random::<f64>()));
            f
        };
        let direction = draw_point(&mut rng);
        let betas: Vec<Vec<f64>> = (0..2)
            .map(|_| (0..d).map(|_| rng.random_range(0.0..5.0)).collect())
            .collect();
        let mut streams = [LinearActionStats::new(d), LinearActionStats::new(d)];
        for t in 0..horizon {
            let r = (t % 2) as usize;
            let x = draw_point(&mut rng);
            let z: f64 = rng.sample(StandardNormal);
            streams[r].update(&x, dot(&x, &betas[r]) + sds[r] * z)?;
            let mut u = 0.0;
            let mut info = [0.0; 2];
            let mut ready = true;
            for (k, s) in streams.iter().enumerate() {
                let fit = s.ols_solution();
                let Some(factor) = s.factor().filter(|_| fit.solved) else {
                    ready = false;
                    break;
                };
                let sigma = factor.quadratic_inverse(&direction);
                let dev = dot(&direction, &fit.beta_hat) - dot(&direction, &betas[k]);
                u += dev * dev / (2.0 * fit.s2 * sigma);
                info[k] = 1.0 / sigma;
            }
            if !ready {
                continue;
            }
            let b1 = 0.5 * gamma_l(streams[0].n, info[0], alpha / (info[1] + 1.0).sqrt(), d)?;
            let b2 = 0.5 * gamma_l(streams[1].n, info[1], alpha / (info[0] + 1.0).sqrt(), d)?;
            if u > b1.max(b2) {
                violations += 1;
                break;
            }
        }
    }
    Ok(CoverageReport::new(violations, reps, alpha))
}

/// Monte Carlo mean and standard error of a statistic over replications.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub reps: u64,
}

fn summarize(values: impl Iterator<Item = f64>) -> MeanEstimate {
    let (mut n, mut mean, mut m2) = (0u64, 0.0, 0.0);
    for v in values {
        n += 1;
        let delta = v - mean;
        mean += delta / n as f64;
        m2 += delta * (v - mean);
    }
    let var = if n > 1 { m2 / (n - 1) as f64 } else { 0.0 };
    MeanEstimate {
        mean,
        std_error: (var / n as f64).sqrt(),
        reps: n,
    }
}

/// Empirical mean of `G_t` (unit prior scale) over `reps` standard normal paths.
pub fn martingale_mean(t: usize, reps: u64, seed: u64) -> MeanEstimate {
    summarize((0..reps).map(|rep| {
        let mut rng = replication_rng(seed, rep);
        let ys: Vec<f64> = (0..t).map(|_| rng.sample(StandardNormal)).collect();
        *gaussian_mixture_martingale(&ys, 0.0, 1.0)
            .expect("nonempty")
            .values
            .last()
            .unwrap()
    }))
}

/// Empirical mean of the linear martingale `extra` stages after the first
/// ready stage, for a `d`-dimensional bounded random design.
pub fn linear_martingale_mean(d: usize, extra: usize, reps: u64, seed: u64) -> MeanEstimate {
    summarize((0..reps).map(|rep| {
        let mut rng = replication_rng(seed, rep);
        let point = |rng: &mut rand_chacha::ChaCha8Rng| {
            let mut f = vec![1.0];
            f.extend((1..d).map(|_| rng.random::<f64>()));
            f
        };
        let direction = point(&mut rng);
        let beta: Vec<f64> = (0..d).map(|_| rng.random_range(0.0..5.0)).collect();
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        loop {
            let x = point(&mut rng);
            let z: f64 = rng.sample(StandardNormal);
            ys.push(dot(&x, &beta) + z);
            xs.push(x);
            let path =
                linear_mixture_martingale(&xs, &ys, &direction, &beta, 1.0).expect("valid input");
            if path.values.len() > extra {
                return path.values[extra];
            }
            if !path.values.is_empty() {
                // Grow to the target stage in one go.
                while xs.len() < path.first_stage as usize + extra {
                    let x = point(&mut rng);
                    let z: f64 = rng.sample(StandardNormal);
                    ys.push(dot(&x, &beta) + z);
                    xs.push(x);
                }
            }
        }
    }))
}

/// `E[G_t]` under the null by quadrature. With unit prior scale,
/// `G_t = (t+1)^(-1/2) (1 - t u/(t+1))^(-t/2)` where `u ~ Beta(1/2, (t-1)/2)`.
pub fn martingale_mean_quadrature(t: u64, intervals: usize) -> f64 {
    beta_mixture_mean(t as f64, t as f64, intervals)
}

/// `E[G^L]` under the null by quadrature, for `dof = n - d` residual degrees
/// of freedom and information `lambda`, conditionally on the design:
/// `G^L = (1+lambda)^(-1/2) (1 - lambda u/(1+lambda))^(-(dof+1)/2)` with
/// `u ~ Beta(1/2, dof/2)`.
pub fn linear_martingale_mean_quadrature(dof: u64, lambda: f64, intervals: usize) -> f64 {
    beta_mixture_mean((dof + 1) as f64, lambda, intervals)
}

/// `E[(1+c)^(-1/2) (1 - c u/(1+c))^(-m/2)]` for `u ~ Beta(1/2, (m-1)/2)`;
/// substituting `u = v^2` removes the endpoint singularity.
fn beta_mixture_mean(m: f64, c: f64, intervals: usize) -> f64 {
    assert!(m >= 2.0 && intervals.is_multiple_of(2));
    let log_weight = |v: f64| 0.5 * (m - 3.0) * (1.0 - v * v).ln();
    let log_g = |v: f64| -0.5 * (c + 1.0).ln() - 0.5 * m * (1.0 - c * v * v / (c + 1.0)).ln();
    let h = 1.0 / intervals as f64;
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..=intervals {
        let v = i as f64 * h;
        let c = if i == 0 || i == intervals {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
        let lw = if i == intervals {
            f64::NEG_INFINITY
        } else {
            log_weight(v)
        };
        den += c * lw.exp();
        num += c * (lw + log_g(v)).exp();
    }
    num / den
}

/// Index of the minimizer of `G1(v1) G2(v - v1)` over an evenly spaced grid
/// of `points` values of `v1` in `[0, v]`.
pub fn endpoint_minimizer(n1: u64, n2: u64, v: f64, points: usize) -> usize {
    let step = v / (points - 1) as f64;
    (0..points)
        .map(|i| {
            let v1 = i as f64 * step;
            (
                i,
                mixture_value(n1, v1).ln() + mixture_value(n2, (v - v1).max(0.0)).ln(),
            )
        })
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap()
        .0
}

/// Same as [`endpoint_minimizer`] for the linear mixture.
pub fn endpoint_minimizer_linear(
    n: [u64; 2],
    lambda: [f64; 2],
    d: usize,
    v: f64,
    points: usize,
) -> usize {
    let step = v / (points - 1) as f64;
    (0..points)
        .map(|i| {
            let v1 = i as f64 * step;
            let g = linear_mixture_from_deviation(n[0], d, lambda[0], v1).ln()
                + linear_mixture_from_deviation(n[1], d, lambda[1], (v - v1).max(0.0)).ln();
            (i, g)
        })
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap()
        .0
}

/// Observations of one regression stream.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RegressionData {
    pub features: Vec<Vec<f64>>,
    pub ys: Vec<f64>,
}

impl RegressionData {
    pub fn push(&mut self, f: Vec<f64>, y: f64) {
        self.features.push(f);
        self.ys.push(y);
    }

    pub fn stats(&self) -> Result<LinearActionStats> {
        let d = self.features.first().map_or(0, Vec::len);
        let mut s = LinearActionStats::new(d);
        for (f, &y) in self.features.iter().zip(&self.ys) {
            s.update(f, y)?;
        }
        Ok(s)
    }

    fn rss(&self, beta: &[f64]) -> f64 {
        self.features
            .iter()
            .zip(&self.ys)
            .map(|(f, y)| (y - dot(f, beta)).powi(2))
            .sum()
    }

    fn normal_equations(&self, d: usize) -> (Vec<f64>, Vec<f64>) {
        let mut gram = vec![0.0; d * d];
        let mut rhs = vec![0.0; d];
        for (f, &y) in self.features.iter().zip(&self.ys) {
            for i in 0..d {
                for j in 0..d {
                    gram[i * d + j] += f[i] * f[j];
                }
                rhs[i] += f[i] * y;
            }
        }
        (gram, rhs)
    }
}

/// Dense Gaussian elimination with partial pivoting.
pub fn solve_dense(mut a: Vec<f64>, mut b: Vec<f64>, n: usize) -> Option<Vec<f64>> {
    for col in 0..n {
        let piv =
            (col..n).max_by(|&i, &j| a[i * n + col].abs().total_cmp(&a[j * n + col].abs()))?;
        if a[piv * n + col].abs() < 1e-300 {
            return None;
        }
        if piv != col {
            for k in 0..n {
                a.swap(col * n + k, piv * n + k);
            }
            b.swap(col, piv);
        }
        for row in (col + 1)..n {
            let factor = a[row * n + col] / a[col * n + col];
            for k in col..n {
                a[row * n + k] -= factor * a[col * n + k];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = ((row + 1)..n).map(|k| a[row * n + k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row * n + row];
    }
    Some(x)
}

/// Maximized Gaussian log likelihood (up to constants) of two regressions
/// with known variances, subject to `f^T beta_a - f^T beta_b + delta >= 0`
/// (`upper = true`) or `<= 0` (`upper = false`).
fn constrained_max(
    a: &RegressionData,
    b: &RegressionData,
    f: &[f64],
    delta: f64,
    var_a: f64,
    var_b: f64,
    upper: bool,
) -> Result<f64> {
    let d = f.len();
    let (ga, ra) = a.normal_equations(d);
    let (gb, rb) = b.normal_equations(d);
    let beta_a = solve_dense(ga.clone(), ra.clone(), d)
        .ok_or_else(|| Error::NotReady("singular design".into()))?;
    let beta_b = solve_dense(gb.clone(), rb.clone(), d)
        .ok_or_else(|| Error::NotReady("singular design".into()))?;
    let loglik = |ba: &[f64], bb: &[f64]| -a.rss(ba) / (2.0 * var_a) - b.rss(bb) / (2.0 * var_b);
    let slack = dot(f, &beta_a) - dot(f, &beta_b) + delta;
    if (upper && slack >= 0.0) || (!upper && slack <= 0.0) {
        return Ok(loglik(&beta_a, &beta_b));
    }
    // Equality-constrained optimum: stationarity of the Lagrangian plus the
    // active constraint, as one (2d + 1)-dimensional linear system.
    let n = 2 * d + 1;
    let mut m = vec![0.0; n * n];
    let mut rhs = vec![0.0; n];
    for i in 0..d {
        for j in 0..d {
            m[i * n + j] = ga[i * d + j] / var_a;
            m[(d + i) * n + d + j] = gb[i * d + j] / var_b;
        }
        m[i * n + 2 * d] = f[i];
        m[(d + i) * n + 2 * d] = -f[i];
        m[2 * d * n + i] = f[i];
        m[2 * d * n + d + i] = -f[i];
        rhs[i] = ra[i] / var_a;
        rhs[d + i] = rb[i] / var_b;
    }
    rhs[2 * d] = -delta;
    let sol =
        solve_dense(m, rhs, n).ok_or_else(|| Error::Degenerate("singular KKT system".into()))?;
    Ok(loglik(&sol[..d], &sol[d..2 * d]))
}

/// Log ratio of the likelihood maximized over `f^T beta_a >= f^T beta_b - delta`
/// to that maximized over the complement, computed by direct constrained
/// optimization of the raw data.
pub fn constrained_log_likelihood_ratio(
    a: &RegressionData,
    b: &RegressionData,
    f: &[f64],
    delta: f64,
    var_a: f64,
    var_b: f64,
) -> Result<f64> {
    let num = constrained_max(a, b, f, delta, var_a, var_b, true)?;
    let den = constrained_max(a, b, f, delta, var_a, var_b, false)?;
    Ok(num - den)
}

/// One random instance for the quadratic-form check: two `d`-dimensional
/// regressions with `n` observations each, a direction, slack and variances.
#[derive(Debug, Clone)]
pub struct OracleInstance {
    pub a: RegressionData,
    pub b: RegressionData,
    pub f: Vec<f64>,
    pub delta: f64,
    pub var_a: f64,
    pub var_b: f64,
}

pub fn random_oracle_instance<R: Rng + ?Sized>(rng: &mut R, d: usize, n: usize) -> OracleInstance {
    let point = |rng: &mut R| {
        let mut f = vec![1.0];
        f.extend((1..d).map(|_| rng.random_range(-1.0..1.0)));
        f
    };
    let var_a: f64 = rng.random_range(0.25..4.0);
    let var_b: f64 = rng.random_range(0.25..4.0);
    let mut streams = [RegressionData::default(), RegressionData::default()];
    for (s, var) in streams.iter_mut().zip([var_a, var_b]) {
        let beta: Vec<f64> = (0..d).map(|_| rng.random_range(-2.0..2.0)).collect();
        for _ in 0..n {
            let f = point(rng);
            let z: f64 = rng.sample(StandardNormal);
            let y = dot(&f, &beta) + var.sqrt() * z;
            s.push(f, y);
        }
    }
    let [a, b] = streams;
    OracleInstance {
        a,
        b,
        f: point(rng),
        delta: rng.random_range(0.0..1.0),
        var_a,
        var_b,
    }
}

/// Quadratic form `(f^T beta_hat_a - f^T beta_hat_b + delta)^2 / (2 (var_a Sigma_a + var_b Sigma_b))`
/// from sufficient statistics.
pub fn known_variance_quadratic_form(inst: &OracleInstance) -> Result<f64> {
    let sa = inst.a.stats()?;
    let sb = inst.b.stats()?;
    let fa: SymmetricFactor = sa
        .factor()
        .ok_or_else(|| Error::NotReady("singular design".into()))?;
    let fb: SymmetricFactor = sb
        .factor()
        .ok_or_else(|| Error::NotReady("singular design".into()))?;
    let gap =
        dot(&inst.f, &fa.solve(&sa.moment)) - dot(&inst.f, &fb.solve(&sb.moment)) + inst.delta;
    let denom =
        inst.var_a * fa.quadratic_inverse(&inst.f) + inst.var_b * fb.quadratic_inverse(&inst.f);
    Ok(0.5 * gap * gap / denom)
}

/// [`known_variance_quadratic_form`] with the sign of the estimated gap
/// `f^T beta_hat_a - f^T beta_hat_b + delta`, which is what the constrained
/// likelihood ratio should equal.
pub fn known_variance_signed_form(inst: &OracleInstance) -> Result<f64> {
    let sa = inst.a.stats()?;
    let sb = inst.b.stats()?;
    let gap = dot(&inst.f, &sa.ols_solution().beta_hat) - dot(&inst.f, &sb.ols_solution().beta_hat)
        + inst.delta;
    Ok(gap.signum() * known_variance_quadratic_form(inst)?)
}

/// Sanity helper: `G(gamma/2)` at the threshold level `beta` equals `1/beta`.
pub fn threshold_identity(n: u64, beta: f64) -> Option<f64> {
    let g = gamma(n, beta);
    g.is_finite().then(|| mixture_value(n, 0.5 * g) * beta)
}
