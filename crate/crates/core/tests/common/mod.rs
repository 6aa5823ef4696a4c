//! Test-support model: d-dimensional Gaussian location family with known
//! identity covariance. The MLE is the sample mean, q and g are identities,
//! K = I, and every second derivative of q vanishes. This is the cleanest
//! member of the sum-structure class and exercises the degenerate corners of
//! the bound (zero remainder terms, exact cancellation).

use mlebound::matrix::{SquareMatrix, SymMatrix};
use mlebound::model::{ModelError, ModelSpec};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub struct GaussianLocation {
    pub dim: usize,
}

impl ModelSpec for GaussianLocation {
    fn param_dim(&self) -> usize {
        self.dim
    }

    fn obs_dim(&self) -> usize {
        self.dim
    }

    fn sample(&self, theta0: &[f64], n: usize, seed: u64) -> Vec<f64> {
        assert_eq!(theta0.len(), self.dim);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Vec::with_capacity(n * self.dim);
        for _ in 0..n {
            for &t in theta0 {
                let z: f64 = rng.sample(StandardNormal);
                out.push(t + z);
            }
        }
        out
    }

    fn mle(&self, data: &[f64]) -> Result<Vec<f64>, ModelError> {
        let d = self.dim;
        let n = data.len() / d;
        if n < 1 {
            return Err(ModelError::TooFewObservations { got: n, min: 1 });
        }
        let mut mean = vec![0.0; d];
        for row in data.chunks_exact(d) {
            for (m, &x) in mean.iter_mut().zip(row.iter()) {
                *m += x;
            }
        }
        for m in mean.iter_mut() {
            *m /= n as f64;
        }
        Ok(mean)
    }

    fn q(&self, theta: &[f64], _theta0: &[f64]) -> Vec<f64> {
        theta.to_vec()
    }

    fn g(&self, obs: &[f64], _theta0: &[f64]) -> Vec<f64> {
        obs.to_vec()
    }

    fn grad_q(&self, _theta0: &[f64]) -> SquareMatrix {
        SquareMatrix::identity(self.dim)
    }

    fn fisher(&self, _theta0: &[f64]) -> Result<SymMatrix, ModelError> {
        Ok(SymMatrix::identity(self.dim))
    }

    fn second_deriv_bound(
        &self,
        _j: usize,
        _k: usize,
        _l: usize,
        _theta0: &[f64],
        _eps: f64,
    ) -> f64 {
        0.0
    }

    fn uniformly_bounded_hessian(&self) -> bool {
        true
    }
}
