//! The statistical-model contract and the built-in normal model.
//!
//! A model in scope must expose a closed-form MLE with the sum structure
//! q(th_hat) = (1/n) sum_i g(x_i), together with the regularity data the
//! bound engine consumes: the Jacobian of q, the expected information matrix
//! for one observation, and sup bounds on the second derivatives of q.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::matrix::{MatrixError, SquareMatrix, SymMatrix};

/// Variance threshold below which a sample is degenerate: downstream
/// standardization would divide by (near-)zero.
pub const DEGENERATE_VARIANCE_THRESHOLD: f64 = 1e-300;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("need at least {min} observations, got {got}")]
    TooFewObservations { got: usize, min: usize },
    #[error("degenerate sample: estimated variance below {threshold:e}")]
    DegenerateSample { threshold: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Matrix(#[from] MatrixError),
}

/// A statistical model whose MLE is a q-transform of a mean of per-observation
/// statistics. Implementations must be stateless: `sample` takes an explicit
/// seed and everything is safe to call concurrently.
pub trait ModelSpec: Sync {
    /// Parameter dimension d.
    fn param_dim(&self) -> usize;

    /// Observation dimension t.
    fn obs_dim(&self) -> usize;

    /// n i.i.d. observations, flattened row-major (length n * obs_dim).
    /// Identical (theta0, n, seed) must yield identical bits.
    fn sample(&self, theta0: &[f64], n: usize, seed: u64) -> Vec<f64>;

    /// Closed-form maximum likelihood estimate.
    fn mle(&self, data: &[f64]) -> Result<Vec<f64>, ModelError>;

    /// The transform q evaluated at theta. The true parameter is passed
    /// explicitly because q may depend on it (the normal model's does).
    fn q(&self, theta: &[f64], theta0: &[f64]) -> Vec<f64>;

    /// Per-observation statistic g.
    fn g(&self, obs: &[f64], theta0: &[f64]) -> Vec<f64>;

    /// Jacobian of q at theta0 (row j = gradient of q_j); must be invertible.
    fn grad_q(&self, theta0: &[f64]) -> SquareMatrix;

    /// Expected information matrix for one observation; must be symmetric
    /// positive definite.
    fn fisher(&self, theta0: &[f64]) -> Result<SymMatrix, ModelError>;

    /// Sup of |d^2 q_j / d theta_k d theta_l| over the eps-box around theta0
    /// (+inf if unbounded). Indices are zero-based.
    fn second_deriv_bound(&self, j: usize, k: usize, l: usize, theta0: &[f64], eps: f64) -> f64;

    /// True when every second derivative of q is uniformly bounded on the
    /// whole parameter space, enabling the epsilon-free bound.
    fn uniformly_bounded_hessian(&self) -> bool;
}

/// Parameters of the N(mu, sigma2) model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalParams {
    pub mu: f64,
    pub sigma2: f64,
}

impl NormalParams {
    pub fn new(mu: f64, sigma2: f64) -> Result<Self, ModelError> {
        if !mu.is_finite() || !sigma2.is_finite() {
            return Err(ModelError::InvalidParameter(format!(
                "parameters must be finite, got mu={mu}, sigma2={sigma2}"
            )));
        }
        if sigma2 <= 0.0 {
            return Err(ModelError::InvalidParameter(format!(
                "sigma2 must be positive, got {sigma2}"
            )));
        }
        Ok(Self { mu, sigma2 })
    }

    pub fn theta(&self) -> [f64; 2] {
        [self.mu, self.sigma2]
    }
}

/// Which divisor the variance estimate uses.
///
/// The maximum likelihood estimator divides by n. The n-1 variant exists
/// only as a deliberate fault for verification: it breaks the structural
/// identity q(mle(x)) = mean g(x_i) and the verify command must catch it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum VarianceDivisor {
    #[default]
    SampleSize,
    SampleSizeMinusOne,
}

/// The normal model with unknown mean and variance, theta = (mu, sigma2).
///
/// q(t1, t2) = (t1, t2 + (t1 - mu)^2) and g(x) = (x, (x - mu)^2), so that
/// q(mle) is exactly the mean of g over the sample.
#[derive(Debug, Clone, Copy, Default)]
pub struct NormalModel {
    divisor: VarianceDivisor,
}

impl NormalModel {
    pub fn new() -> Self {
        Self::default()
    }

    /// Verification hook: deliberately wrong variance divisor (n-1).
    pub fn with_variance_divisor_fault() -> Self {
        Self {
            divisor: VarianceDivisor::SampleSizeMinusOne,
        }
    }

    pub fn divisor(&self) -> VarianceDivisor {
        self.divisor
    }
}

impl ModelSpec for NormalModel {
    fn param_dim(&self) -> usize {
        2
    }

    fn obs_dim(&self) -> usize {
        1
    }

    /// Standard normal draws transformed by x = mu + sqrt(sigma2) * z; the
    /// location-scale construction is part of the contract (scaled and
    /// shifted standard draws from the same seed are bit-identical to draws
    /// at the target parameters).
    fn sample(&self, theta0: &[f64], n: usize, seed: u64) -> Vec<f64> {
        assert_eq!(theta0.len(), 2);
        let mu = theta0[0];
        let sigma = theta0[1].sqrt();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let z: f64 = rng.sample(StandardNormal);
                mu + sigma * z
            })
            .collect()
    }

    /// (x_bar, (1/n) sum (x_i - x_bar)^2).
    ///
    /// The variance divisor is n, not n-1: this is the maximum likelihood
    /// estimator, and the structural identity q(mle) = mean of g holds only
    /// with the biased divisor.
    fn mle(&self, data: &[f64]) -> Result<Vec<f64>, ModelError> {
        let n = data.len();
        if n < 2 {
            return Err(ModelError::TooFewObservations { got: n, min: 2 });
        }
        let nf = n as f64;
        let mean = data.iter().sum::<f64>() / nf;
        let ss = data.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>();
        let div = match self.divisor {
            VarianceDivisor::SampleSize => nf,
            VarianceDivisor::SampleSizeMinusOne => nf - 1.0,
        };
        let var = ss / div;
        if var < DEGENERATE_VARIANCE_THRESHOLD {
            return Err(ModelError::DegenerateSample {
                threshold: DEGENERATE_VARIANCE_THRESHOLD,
            });
        }
        Ok(vec![mean, var])
    }

    fn q(&self, theta: &[f64], theta0: &[f64]) -> Vec<f64> {
        let d = theta[0] - theta0[0];
        vec![theta[0], theta[1] + d * d]
    }

    fn g(&self, obs: &[f64], theta0: &[f64]) -> Vec<f64> {
        let d = obs[0] - theta0[0];
        vec![obs[0], d * d]
    }

    /// Identity: the off-diagonal derivative of q_2 vanishes at theta = theta0.
    fn grad_q(&self, _theta0: &[f64]) -> SquareMatrix {
        SquareMatrix::identity(2)
    }

    fn fisher(&self, theta0: &[f64]) -> Result<SymMatrix, ModelError> {
        let params = NormalParams::new(theta0[0], theta0[1])?;
        let s2 = params.sigma2;
        Ok(SymMatrix::from_diag(&[1.0 / s2, 1.0 / (2.0 * s2 * s2)]))
    }

    /// d^2 q_2 / d theta_1^2 = 2 everywhere; every other second derivative is
    /// zero, so the bound is independent of eps.
    fn second_deriv_bound(&self, j: usize, k: usize, l: usize, _theta0: &[f64], _eps: f64) -> f64 {
        if j == 1 && k == 0 && l == 0 {
            2.0
        } else {
            0.0
        }
    }

    fn uniformly_bounded_hessian(&self) -> bool {
        true
    }
}
