//! Streaming sufficient statistics for the unstructured (per context-action
//! pair) and linear (per action) settings.
//!
//! Unstructured variances use the `n - 1` divisor; linear residual variances
//! use `n - d`. A linear fit is only reported once the Gram matrix is
//! numerically positive definite and `n >= d + 1`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Count, mean and centered sum of squares of one observation stream
/// (Welford recurrence).
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PairStats {
    pub n: u64,
    pub mean: f64,
    pub m2: f64,
}

impl PairStats {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_samples(ys: &[f64]) -> Self {
        ys.iter().fold(Self::new(), |s, &y| s.update(y))
    }

    #[must_use]
    pub fn update(mut self, y: f64) -> Self {
        self.push(y);
        self
    }

    pub fn push(&mut self, y: f64) {
        self.n += 1;
        let delta = y - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (y - self.mean);
        if self.n <= 1 || self.m2 < 0.0 {
            self.m2 = 0.0;
        }
    }

    /// Sample variance with the `n - 1` divisor; `None` while `n < 2`.
    pub fn variance(&self) -> Option<f64> {
        (self.n >= 2).then(|| self.m2 / (self.n - 1) as f64)
    }

    /// Variance of the sample mean, `S^2 / n`.
    pub fn mean_variance(&self) -> Option<f64> {
        self.variance().map(|v| v / self.n as f64)
    }

    pub fn is_ready(&self) -> bool {
        self.n >= 2
    }
}

/// `L D L^T` factorization of a small symmetric matrix stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricFactor {
    d: usize,
    lower: Vec<f64>,
    pivots: Vec<f64>,
}

impl SymmetricFactor {
    /// Factorizes `matrix` and accepts it only if every pivot exceeds
    /// `1e-10 * trace / d`.
    pub fn positive_definite(matrix: &[f64], d: usize) -> Option<Self> {
        debug_assert_eq!(matrix.len(), d * d);
        let trace: f64 = (0..d).map(|i| matrix[i * d + i]).sum();
        if !(trace > 0.0) || !trace.is_finite() {
            return None;
        }
        let tol = 1e-10 * trace / d as f64;
        let mut lower = vec![0.0; d * d];
        let mut pivots = vec![0.0; d];
        for j in 0..d {
            let mut p = matrix[j * d + j];
            for k in 0..j {
                p -= lower[j * d + k] * lower[j * d + k] * pivots[k];
            }
            if !(p > tol) {
                return None;
            }
            pivots[j] = p;
            lower[j * d + j] = 1.0;
            for i in (j + 1)..d {
                let mut v = matrix[i * d + j];
                for k in 0..j {
                    v -= lower[i * d + k] * lower[j * d + k] * pivots[k];
                }
                lower[i * d + j] = v / p;
            }
        }
        Some(Self { d, lower, pivots })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn min_pivot(&self) -> f64 {
        self.pivots.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let d = self.d;
        let mut z = rhs.to_vec();
        for i in 0..d {
            for k in 0..i {
                z[i] -= self.lower[i * d + k] * z[k];
            }
        }
        for (zi, p) in z.iter_mut().zip(&self.pivots) {
            *zi /= p;
        }
        for i in (0..d).rev() {
            for k in (i + 1)..d {
                z[i] -= self.lower[k * d + i] * z[k];
            }
        }
        z
    }

    /// `f^T M^{-1} f`.
    pub fn quadratic_inverse(&self, f: &[f64]) -> f64 {
        let z = self.solve(f);
        dot(f, &z)
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Gram matrix, moment vector and response energy of one action's data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearActionStats {
    pub n: u64,
    pub d: usize,
    /// `D_t(a) = sum f f^T`, row-major `d x d`.
    pub gram: Vec<f64>,
    /// `sum y f`.
    pub moment: Vec<f64>,
    /// `sum y^2`.
    pub yy: f64,
}

/// Result of a least-squares solve. `solved == false` means "keep sampling".
#[derive(Debug, Clone, PartialEq)]
pub struct OlsFit {
    pub beta_hat: Vec<f64>,
    pub s2: f64,
    pub solved: bool,
}

impl LinearActionStats {
    pub fn new(d: usize) -> Self {
        Self {
            n: 0,
            d,
            gram: vec![0.0; d * d],
            moment: vec![0.0; d],
            yy: 0.0,
        }
    }

    pub fn update(&mut self, f: &[f64], y: f64) -> Result<()> {
        if f.len() != self.d {
            return Err(Error::DimensionMismatch {
                expected: self.d,
                got: f.len(),
            });
        }
        let d = self.d;
        for i in 0..d {
            for j in 0..d {
                self.gram[i * d + j] += f[i] * f[j];
            }
            self.moment[i] += y * f[i];
        }
        self.yy += y * y;
        self.n += 1;
        Ok(())
    }

    pub fn factor(&self) -> Option<SymmetricFactor> {
        SymmetricFactor::positive_definite(&self.gram, self.d)
    }

    /// Ready once `n >= d + 1` and the Gram matrix is positive definite.
    pub fn is_ready(&self) -> bool {
        self.n as usize > self.d && self.factor().is_some()
    }

    pub fn ols_solution(&self) -> OlsFit {
        match self.factor() {
            Some(factor) if self.n as usize > self.d => self.fit_with(&factor),
            _ => OlsFit {
                beta_hat: vec![0.0; self.d],
                s2: 0.0,
                solved: false,
            },
        }
    }

    pub(crate) fn fit_with(&self, factor: &SymmetricFactor) -> OlsFit {
        let beta_hat = factor.solve(&self.moment);
        let rss = (self.yy - dot(&self.moment, &beta_hat)).max(0.0);
        let s2 = rss / (self.n as usize - self.d) as f64;
        OlsFit {
            beta_hat,
            s2,
            solved: true,
        }
    }

    /// `Sigma_t = f^T D^{-1} f` by a linear solve.
    pub fn directional_variance(&self, f: &[f64]) -> Result<f64> {
        if f.len() != self.d {
            return Err(Error::DimensionMismatch {
                expected: self.d,
                got: f.len(),
            });
        }
        let factor = self
            .factor()
            .ok_or_else(|| Error::NotReady("Gram matrix is not positive definite".into()))?;
        Ok(factor.quadratic_inverse(f))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn batch(ys: &[f64]) -> (f64, f64) {
        let n = ys.len() as f64;
        let mean = ys.iter().sum::<f64>() / n;
        let ss = ys.iter().map(|y| (y - mean).powi(2)).sum::<f64>();
        (mean, ss)
    }

    #[test]
    fn single_observation() {
        let s = PairStats::new().update(1.0);
        assert_eq!((s.n, s.mean, s.m2), (1, 1.0, 0.0));
        assert_eq!(s.variance(), None);
    }

    #[test]
    fn three_observations() {
        let s = PairStats::from_samples(&[1.0, 2.0, 3.0]);
        assert_eq!(s.n, 3);
        assert!((s.mean - 2.0).abs() < 1e-15);
        assert!((s.variance().unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn constant_stream_has_zero_variance() {
        let s = PairStats::from_samples(&[5.0; 4]);
        assert_eq!(s.variance(), Some(0.0));
    }

    #[test]
    fn one_dimensional_least_squares() {
        let mut s = LinearActionStats::new(1);
        s.update(&[1.0], 2.0).unwrap();
        s.update(&[1.0], 2.0).unwrap();
        assert_eq!(s.gram, vec![2.0]);
        assert_eq!(s.moment, vec![4.0]);
        let fit = s.ols_solution();
        assert!(fit.solved);
        assert!((fit.beta_hat[0] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn ols_with_residual_variance() {
        let mut s = LinearActionStats::new(1);
        s.update(&[1.0], 1.0).unwrap();
        s.update(&[1.0], 3.0).unwrap();
        let fit = s.ols_solution();
        assert!(fit.solved);
        assert!((fit.beta_hat[0] - 2.0).abs() < 1e-15);
        // (10 - 8) / (2 - 1)
        assert!((fit.s2 - 2.0).abs() < 1e-12);
    }

    #[test]
    fn zero_degrees_of_freedom_is_unsolved() {
        let mut s = LinearActionStats::new(2);
        s.update(&[1.0, 0.0], 1.0).unwrap();
        s.update(&[0.0, 1.0], 1.0).unwrap();
        assert!(s.factor().is_some());
        assert!(!s.ols_solution().solved);
    }

    #[test]
    fn collinear_design_is_singular() {
        let mut s = LinearActionStats::new(2);
        for k in 1..6 {
            let v = k as f64;
            s.update(&[v, 2.0 * v], v).unwrap();
        }
        assert!(s.factor().is_none());
        assert!(!s.ols_solution().solved);
        assert!(matches!(
            s.directional_variance(&[1.0, 0.0]),
            Err(Error::NotReady(_))
        ));
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let mut s = LinearActionStats::new(2);
        assert!(matches!(
            s.update(&[1.0], 0.0),
            Err(Error::DimensionMismatch {
                expected: 2,
                got: 1
            })
        ));
    }

    #[test]
    fn noiseless_spanning_design_interpolates() {
        let beta = [0.5, -1.25, 2.0];
        let mut s = LinearActionStats::new(3);
        for f in [
            [1.0, 0.0, 0.0],
            [1.0, 1.0, 0.0],
            [1.0, 0.0, 1.0],
            [1.0, 1.0, 1.0],
            [1.0, 0.4, 0.8],
        ] {
            s.update(&f, dot(&f, &beta)).unwrap();
        }
        let fit = s.ols_solution();
        assert!(fit.solved);
        for (b, t) in fit.beta_hat.iter().zip(beta) {
            assert!((b - t).abs() < 1e-9);
        }
        assert!(fit.s2 < 1e-12);
    }

    #[test]
    fn directional_variance_examples() {
        let mut s = LinearActionStats::new(2);
        s.gram = vec![1.0, 0.0, 0.0, 1.0];
        assert!((s.directional_variance(&[1.0, 0.0]).unwrap() - 1.0).abs() < 1e-15);
        s.gram = vec![4.0, 0.0, 0.0, 4.0];
        assert!((s.directional_variance(&[1.0, 1.0]).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(s.directional_variance(&[0.0, 0.0]).unwrap(), 0.0);
    }

    #[test]
    fn pivot_threshold_is_scale_relative() {
        // Eigenvalues 1e6 and ~1e-6: relative pivot 1e-12 < 1e-10.
        let m = [1e6, 1e6, 1e6, 1e6 + 1e-6];
        assert!(SymmetricFactor::positive_definite(&m, 2).is_none());
        let m = [1e6, 0.0, 0.0, 1.0];
        assert!(SymmetricFactor::positive_definite(&m, 2).is_some());
    }

    fn gen_design(d: usize) -> impl Strategy<Value = Vec<(Vec<f64>, f64)>> {
        prop::collection::vec(
            (prop::collection::vec(-2.0f64..2.0, d), -5.0f64..5.0),
            (d + 2)..40,
        )
    }

    proptest! {
        #[test]
        fn streaming_matches_two_pass(ys in prop::collection::vec(-1e6f64..1e6, 2..2000)) {
            let s = PairStats::from_samples(&ys);
            let (mean, ss) = batch(&ys);
            let scale = ys.iter().map(|y| y.abs()).fold(1.0, f64::max);
            prop_assert!((s.mean - mean).abs() <= 1e-9 * scale);
            prop_assert!((s.m2 - ss).abs() <= 1e-9 * ss.max(scale * scale * 1e-6));
        }

        #[test]
        fn noiseless_random_designs_recover_beta(
            beta in prop::collection::vec(-3.0f64..3.0, 3),
            design in prop::collection::vec(prop::collection::vec(-1.0f64..1.0, 3), 6..30),
        ) {
            let mut s = LinearActionStats::new(3);
            for f in &design {
                s.update(f, dot(f, &beta)).unwrap();
            }
            let fit = s.ols_solution();
            if fit.solved {
                let spread = s.factor().unwrap().min_pivot();
                prop_assume!(spread > 1e-3);
                for (b, t) in fit.beta_hat.iter().zip(&beta) {
                    prop_assert!((b - t).abs() < 1e-8);
                }
            }
        }

        #[test]
        fn information_only_grows(
            data in gen_design(2),
            extra in prop::collection::vec(-2.0f64..2.0, 2),
            probe in prop::collection::vec(-2.0f64..2.0, 2),
        ) {
            let mut s = LinearActionStats::new(2);
            for (f, y) in &data {
                s.update(f, *y).unwrap();
            }
            prop_assume!(s.factor().is_some());
            let before = s.directional_variance(&probe).unwrap();
            s.update(&extra, 0.0).unwrap();
            let after = s.directional_variance(&probe).unwrap();
            prop_assert!(after <= before * (1.0 + 1e-9) + 1e-15);
        }

        #[test]
        fn accumulation_is_order_invariant(data in gen_design(3), seed in any::<u64>()) {
            let mut forward = LinearActionStats::new(3);
            for (f, y) in &data {
                forward.update(f, *y).unwrap();
            }
            let mut shuffled = data.clone();
            let len = shuffled.len();
            let mut state = seed | 1;
            for i in (1..len).rev() {
                state ^= state << 13;
                state ^= state >> 7;
                state ^= state << 17;
                shuffled.swap(i, (state % (i as u64 + 1)) as usize);
            }
            let mut back = LinearActionStats::new(3);
            for (f, y) in &shuffled {
                back.update(f, *y).unwrap();
            }
            for (a, b) in forward.gram.iter().zip(&back.gram) {
                prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
            }
            for (a, b) in forward.moment.iter().zip(&back.moment) {
                prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
            }
            prop_assert!((forward.yy - back.yy).abs() <= 1e-12 * forward.yy.max(1.0));
        }
    }
}
