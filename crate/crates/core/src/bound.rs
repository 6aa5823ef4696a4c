//! The bound engine.
//!
//! For a model whose MLE satisfies q(th_hat) = mean of g(X_i), the distance
//! |E h(W_n) - E h(Z)| between the standardized MLE and a standard normal
//! vector is bounded by three groups of terms:
//!
//!   r1:  the Stein term, driven by moments of the standardized summands
//!        xi_i = K^{-1/2} (g(X_i) - q(theta_0));
//!   mse: a Markov term 2 ||h|| / eps^2 * E sum_j (th_hat_j - th_0j)^2,
//!        present only when a finite conditioning radius eps is used;
//!   a1/a2: delta-method remainder terms, conditioned on the largest
//!        coordinate error staying inside eps (no conditioning when
//!        eps = +inf, which is valid whenever the second derivatives of q
//!        are uniformly bounded).
//!
//! Moments feeding r1 come from one of three sources: exact quadrature for
//! the normal model, Monte Carlo for arbitrary models, or the published
//! Hoelder-bounded values for the normal model (which reproduce the printed
//! closed-form constants).

use thiserror::Error;

use crate::matrix::{MatrixError, SquareMatrix, SymMatrix, DEFAULT_PD_TOL};
use crate::model::{ModelError, ModelSpec};
use crate::par::{batched_fold, indexed_map};
use crate::quad::{normal_expectation, QuadError};
use crate::seed::derive_seed;
use crate::testfn::TestFunction;

/// Minimum Monte Carlo sample count for moment estimation.
pub const MIN_MOMENT_SAMPLES: usize = 10_000;

/// Minimum trial count for the conditioned-expectation estimators.
pub const MIN_TRIALS: usize = 100;

/// Minimum acceptance rate for the conditioning event |Q_(m)| < eps.
pub const MIN_ACCEPTANCE_RATE: f64 = 0.01;

const QUAD_MOMENT_TOL: f64 = 1e-9;
const STREAM_A_TERMS: u64 = 0xA1;
const STREAM_MSE: u64 = 0x51;

#[derive(Debug, Error)]
pub enum BoundError {
    #[error("conditioning acceptance rate {accepted}/{trials} is below 1%; epsilon too small for this n")]
    LowAcceptance { accepted: usize, trials: usize },
    #[error("epsilon must be positive, got {0}")]
    InvalidEpsilon(f64),
    #[error("epsilon must be finite for the Markov term, got {0}")]
    EpsilonNotFinite(f64),
    #[error("need at least {min} samples, got {got}")]
    TooFewSamples { got: usize, min: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("sample size must be at least {min}, got {got}")]
    SampleSizeTooSmall { got: u64, min: u64 },
    #[error(transparent)]
    Matrix(#[from] MatrixError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Quad(#[from] QuadError),
}

/// Reference constants for the normal-model bound assembly.
pub mod constants {
    use std::f64::consts::PI;

    /// Leading factor of the Stein term: sqrt(pi) / (4 sqrt(2)) = sqrt(2 pi) / 8.
    pub fn stein_prefactor() -> f64 {
        (2.0 * PI).sqrt() / 8.0
    }

    /// Per-observation aggregate of third absolute moments under the
    /// Hoelder-bounded normal moment set: 5 sqrt(2/pi) + 3 + 15^(3/4).
    pub fn third_moment_aggregate() -> f64 {
        5.0 * (2.0 / PI).sqrt() + 3.0 + 15.0_f64.powf(0.75)
    }

    /// Printed ceiling for [`third_moment_aggregate`] (the aggregate is
    /// strictly below it).
    pub const THIRD_MOMENT_AGGREGATE_CEILING: f64 = 14.612;

    /// Per-observation aggregate sum |E xi_j xi_k| E|xi_l| = 2 (1 + sqrt(2/pi)).
    pub fn second_moment_aggregate() -> f64 {
        2.0 * (1.0 + (2.0 / PI).sqrt())
    }

    /// Printed value of the assembled first-term coefficient, before its
    /// final rounding up to [`R1_COEFFICIENT_ROUNDED`]. Recomputing the
    /// assembly from the displayed aggregates gives 6.8315; the printed
    /// value carries about 1.5e-3 of rounding slack, absorbed by the final
    /// rounding to 7 either way. See [`r1_coefficient_assembled`].
    pub const R1_COEFFICIENT: f64 = 6.833;

    /// Rounded coefficient used by the closed-form normal-model bound.
    pub const R1_COEFFICIENT_ROUNDED: f64 = 7.0;

    /// The first-term coefficient re-assembled from the aggregates:
    /// stein_prefactor * (third aggregate + 2 * second aggregate).
    pub fn r1_coefficient_assembled() -> f64 {
        stein_prefactor() * (third_moment_aggregate() + 2.0 * second_moment_aggregate())
    }
}

/// Provenance of a moment set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MomentSource {
    /// Exact 1-D quadrature for the normal model.
    AnalyticNormal,
    /// The published Hoelder-bounded values for the normal model.
    PaperHolderBounds,
    /// Plug-in Monte Carlo estimates.
    MonteCarlo { samples: u64, seed: u64 },
}

impl std::fmt::Display for MomentSource {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            MomentSource::AnalyticNormal => write!(f, "analytic-normal"),
            MomentSource::PaperHolderBounds => write!(f, "paper-holder-bounds"),
            MomentSource::MonteCarlo { samples, seed } => {
                write!(f, "monte-carlo({samples},{seed})")
            }
        }
    }
}

/// Moment arrays of the standardized summand xi_1 (i.i.d., so one set covers
/// every observation): E|xi_j xi_k xi_l|, E[xi_j xi_k], E|xi_l|.
#[derive(Debug, Clone)]
pub struct XiMoments {
    dim: usize,
    third_abs: Vec<f64>,
    second: Vec<f64>,
    first_abs: Vec<f64>,
    source: MomentSource,
}

impl XiMoments {
    /// Builds the arrays from canonical entries: `third_canon[(j,k,l)]` for
    /// j <= k <= l and `second_canon[(j,k)]` for j <= k. Mirroring canonical
    /// values makes the permutation symmetry exact by construction.
    pub fn from_canonical(
        dim: usize,
        third_canon: impl Fn(usize, usize, usize) -> f64,
        second_canon: impl Fn(usize, usize) -> f64,
        first_abs: Vec<f64>,
        source: MomentSource,
    ) -> Self {
        assert_eq!(first_abs.len(), dim);
        let mut third_abs = vec![0.0; dim * dim * dim];
        let mut second = vec![0.0; dim * dim];
        for j in 0..dim {
            for k in j..dim {
                let s = second_canon(j, k);
                second[j * dim + k] = s;
                second[k * dim + j] = s;
                for l in k..dim {
                    let t = third_canon(j, k, l);
                    for (a, b, c) in permutations3(j, k, l) {
                        third_abs[(a * dim + b) * dim + c] = t;
                    }
                }
            }
        }
        Self {
            dim,
            third_abs,
            second,
            first_abs,
            source,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn source(&self) -> MomentSource {
        self.source
    }

    #[inline]
    pub fn third_abs(&self, j: usize, k: usize, l: usize) -> f64 {
        self.third_abs[(j * self.dim + k) * self.dim + l]
    }

    #[inline]
    pub fn second(&self, j: usize, k: usize) -> f64 {
        self.second[j * self.dim + k]
    }

    #[inline]
    pub fn first_abs(&self, l: usize) -> f64 {
        self.first_abs[l]
    }

    /// Checks the structural invariants: exact permutation symmetry,
    /// non-negative absolute moments, and E|xi_l| <= sqrt(E xi_l^2)
    /// (Cauchy-Schwarz, with a small slack for Monte Carlo rounding).
    pub fn validate(&self) -> Result<(), String> {
        let d = self.dim;
        for j in 0..d {
            for k in 0..d {
                if self.second(j, k).to_bits() != self.second(k, j).to_bits() {
                    return Err(format!("second-moment asymmetry at ({j},{k})"));
                }
                for l in 0..d {
                    let v = self.third_abs(j, k, l);
                    if v.is_nan() || v < 0.0 {
                        return Err(format!("negative third moment at ({j},{k},{l})"));
                    }
                    for (a, b, c) in permutations3(j, k, l) {
                        if self.third_abs(a, b, c).to_bits() != v.to_bits() {
                            return Err(format!(
                                "third-moment asymmetry at ({j},{k},{l}) vs ({a},{b},{c})"
                            ));
                        }
                    }
                }
            }
            if self.second(j, j) < 0.0 {
                return Err(format!("negative diagonal second moment at {j}"));
            }
            if self.first_abs(j) < 0.0 {
                return Err(format!("negative first absolute moment at {j}"));
            }
            let cs = self.second(j, j).sqrt();
            if self.first_abs(j) > cs * (1.0 + 1e-9) {
                return Err(format!(
                    "Cauchy-Schwarz violated at {j}: E|xi| = {} > sqrt(E xi^2) = {cs}",
                    self.first_abs(j)
                ));
            }
        }
        Ok(())
    }

    /// Sum over all (j,k,l) of E|xi_j xi_k xi_l|.
    pub fn third_aggregate(&self) -> f64 {
        let d = self.dim;
        let mut acc = 0.0;
        for j in 0..d {
            for k in 0..d {
                for l in 0..d {
                    acc += self.third_abs(j, k, l);
                }
            }
        }
        acc
    }

    /// Sum over all (j,k,l) of |E xi_j xi_k| E|xi_l|.
    pub fn second_aggregate(&self) -> f64 {
        let d = self.dim;
        let mut acc = 0.0;
        for j in 0..d {
            for k in 0..d {
                for l in 0..d {
                    acc += self.second(j, k).abs() * self.first_abs(l);
                }
            }
        }
        acc
    }
}

fn permutations3(j: usize, k: usize, l: usize) -> [(usize, usize, usize); 6] {
    [
        (j, k, l),
        (j, l, k),
        (k, j, l),
        (k, l, j),
        (l, j, k),
        (l, k, j),
    ]
}

/// K = [grad q] [I(theta0)]^-1 [grad q]^T, symmetrized to kill roundoff
/// asymmetry from the products.
pub fn compute_k(grad_q: &SquareMatrix, fisher: &SymMatrix) -> Result<SymMatrix, BoundError> {
    let fisher_inv = fisher.inverse(DEFAULT_PD_TOL)?;
    let prod = grad_q
        .matmul(fisher_inv.as_square())?
        .matmul(&grad_q.transpose())?;
    Ok(SymMatrix::symmetrized(prod)?)
}

/// xi = K^{-1/2} (g(x) - q(theta0)); by construction W = n^{-1/2} sum_i xi_i.
pub fn xi_vector(
    g_val: &[f64],
    q_at_theta0: &[f64],
    k_inv_sqrt: &SymMatrix,
) -> Result<Vec<f64>, BoundError> {
    if g_val.len() != q_at_theta0.len() {
        return Err(BoundError::DimensionMismatch {
            expected: q_at_theta0.len(),
            got: g_val.len(),
        });
    }
    let diff: Vec<f64> = g_val
        .iter()
        .zip(q_at_theta0.iter())
        .map(|(g, q)| g - q)
        .collect();
    Ok(k_inv_sqrt.matvec(&diff)?)
}

/// Plug-in Monte Carlo estimates of the xi moment arrays from i.i.d. draws.
pub fn xi_moments_mc<M: ModelSpec>(
    model: &M,
    theta0: &[f64],
    samples: usize,
    seed: u64,
) -> Result<XiMoments, BoundError> {
    if samples < MIN_MOMENT_SAMPLES {
        return Err(BoundError::TooFewSamples {
            got: samples,
            min: MIN_MOMENT_SAMPLES,
        });
    }
    let d = model.param_dim();
    let t = model.obs_dim();
    let q0 = model.q(theta0, theta0);
    let k = compute_k(&model.grad_q(theta0), &model.fisher(theta0)?)?;
    let k_inv_sqrt = k.inv_sqrt(DEFAULT_PD_TOL)?;
    let data = model.sample(theta0, samples, seed);

    let n_third = d * (d + 1) * (d + 2) / 6;
    let n_second = d * (d + 1) / 2;

    struct Acc {
        third: Vec<f64>,
        second: Vec<f64>,
        first: Vec<f64>,
        xi: Vec<f64>,
    }
    let acc = batched_fold(
        samples,
        || Acc {
            third: vec![0.0; n_third],
            second: vec![0.0; n_second],
            first: vec![0.0; d],
            xi: vec![0.0; d],
        },
        |acc, i| {
            let obs = &data[i * t..(i + 1) * t];
            let g_val = model.g(obs, theta0);
            for j in 0..d {
                let mut v = 0.0;
                for l in 0..d {
                    v += k_inv_sqrt.get(j, l) * (g_val[l] - q0[l]);
                }
                acc.xi[j] = v;
            }
            let mut t3 = 0;
            let mut t2 = 0;
            for j in 0..d {
                acc.first[j] += acc.xi[j].abs();
                for k in j..d {
                    acc.second[t2] += acc.xi[j] * acc.xi[k];
                    t2 += 1;
                    for l in k..d {
                        acc.third[t3] += (acc.xi[j] * acc.xi[k] * acc.xi[l]).abs();
                        t3 += 1;
                    }
                }
            }
        },
        |mut a, b| {
            for (x, y) in a.third.iter_mut().zip(b.third.iter()) {
                *x += y;
            }
            for (x, y) in a.second.iter_mut().zip(b.second.iter()) {
                *x += y;
            }
            for (x, y) in a.first.iter_mut().zip(b.first.iter()) {
                *x += y;
            }
            a
        },
    );

    let nf = samples as f64;
    // unpack the canonical (sorted-index) accumulators
    let mut third_map = std::collections::HashMap::new();
    let mut second_map = std::collections::HashMap::new();
    let mut t3 = 0;
    let mut t2 = 0;
    for j in 0..d {
        for k in j..d {
            second_map.insert((j, k), acc.second[t2] / nf);
            t2 += 1;
            for l in k..d {
                third_map.insert((j, k, l), acc.third[t3] / nf);
                t3 += 1;
            }
        }
    }
    let first_abs: Vec<f64> = acc.first.iter().map(|v| v / nf).collect();
    Ok(XiMoments::from_canonical(
        d,
        |j, k, l| third_map[&(j, k, l)],
        |j, k| second_map[&(j, k)],
        first_abs,
        MomentSource::MonteCarlo {
            samples: samples as u64,
            seed,
        },
    ))
}

/// The published moment set for the normal model: exact values where the
/// standard normal moments are closed-form, Hoelder upper bounds for E|xi_2|
/// and E|xi_2|^3, and mixed third absolute moments written as products of
/// lower moments (the factorized expansion used to reach the printed
/// aggregate; the factors are uncorrelated but not independent, so this is
/// an expansion convention, not an exact identity — `xi_moments_normal_analytic`
/// carries the true mixed moments).
pub fn xi_moments_normal_paper() -> XiMoments {
    let e_abs_z = (2.0 / std::f64::consts::PI).sqrt();
    let e_abs_z3 = 2.0 * e_abs_z;
    let e_abs_xi2 = 1.0; // Hoelder bound: (E (Z^2-1)^2 / 2)^(1/2) = 1
    let e_xi2_sq = 1.0;
    let e_abs_xi2_cubed = 15.0_f64.powf(0.75); // Hoelder: (E xi_2^4)^(3/4)
    XiMoments::from_canonical(
        2,
        |j, k, l| match (j, k, l) {
            (0, 0, 0) => e_abs_z3,
            (0, 0, 1) => 1.0 * e_abs_xi2,    // E xi_1^2 * E|xi_2|
            (0, 1, 1) => e_abs_z * e_xi2_sq, // E|xi_1| * E xi_2^2
            (1, 1, 1) => e_abs_xi2_cubed,
            _ => unreachable!(),
        },
        |j, k| if j == k { 1.0 } else { 0.0 },
        vec![e_abs_z, e_abs_xi2],
        MomentSource::PaperHolderBounds,
    )
}

/// Exact xi moments for the normal model by 1-D quadrature over z, using
/// xi_1 = z and xi_2 = (z^2 - 1)/sqrt(2). Mixed absolute moments are genuine
/// expectations E|xi_1^a xi_2^b|, not factorized products. The moments do
/// not depend on (mu, sigma2).
pub fn xi_moments_normal_analytic() -> Result<XiMoments, BoundError> {
    let sqrt2 = 2.0_f64.sqrt();
    let xi2 = move |z: f64| (z * z - 1.0) / sqrt2;
    let kinks = [-1.0, 0.0, 1.0];
    let moment = |f: &dyn Fn(f64) -> f64| normal_expectation(f, &kinks, QUAD_MOMENT_TOL);

    let e_abs_z = moment(&|z: f64| z.abs())?;
    let e_abs_xi2 = moment(&|z: f64| xi2(z).abs())?;
    let e_z_sq = moment(&|z: f64| z * z)?;
    let e_xi2_sq = moment(&|z: f64| xi2(z) * xi2(z))?;
    let e_cross = moment(&|z: f64| z * xi2(z))?;
    let t000 = moment(&|z: f64| (z * z * z).abs())?;
    let t001 = moment(&|z: f64| (z * z * xi2(z)).abs())?;
    let t011 = moment(&|z: f64| (z * xi2(z) * xi2(z)).abs())?;
    let t111 = moment(&|z: f64| (xi2(z) * xi2(z) * xi2(z)).abs())?;

    Ok(XiMoments::from_canonical(
        2,
        move |j, k, l| match (j, k, l) {
            (0, 0, 0) => t000,
            (0, 0, 1) => t001,
            (0, 1, 1) => t011,
            (1, 1, 1) => t111,
            _ => unreachable!(),
        },
        move |j, k| match (j, k) {
            (0, 0) => e_z_sq,
            (1, 1) => e_xi2_sq,
            _ => e_cross,
        },
        vec![e_abs_z, e_abs_xi2],
        MomentSource::AnalyticNormal,
    ))
}

/// The Stein term: sqrt(pi) |h|_2 / (4 sqrt(2) n^(3/2)) multiplied by
/// sum_i sum_jkl { E|xi_j xi_k xi_l| + 2 |E xi_j xi_k| E|xi_l| }, with the
/// i.i.d. sum over i collapsed to a factor n.
pub fn r1_term(moments: &XiMoments, n: u64, h2: f64) -> f64 {
    let per_obs = moments.third_aggregate() + 2.0 * moments.second_aggregate();
    let nf = n as f64;
    (std::f64::consts::PI.sqrt() * h2) / (4.0 * 2.0_f64.sqrt() * nf.powf(1.5)) * nf * per_obs
}

/// Monte Carlo estimates of the delta-method remainder terms.
#[derive(Debug, Clone)]
pub struct ATermEstimates {
    pub a1_term: f64,
    pub a1_std_err: f64,
    pub a2_term: f64,
    pub a2_std_err: f64,
    pub trials: usize,
    pub accepted: usize,
}

struct ModelMatrices {
    /// [I(theta0)]^(1/2) [grad q(theta0)]^(-1)
    scale: SquareMatrix,
    /// scale - K^(-1/2); identically zero for diagonal models
    deviation: SquareMatrix,
}

fn model_matrices<M: ModelSpec>(model: &M, theta0: &[f64]) -> Result<ModelMatrices, BoundError> {
    let fisher = model.fisher(theta0)?;
    let grad_q = model.grad_q(theta0);
    let k = compute_k(&grad_q, &fisher)?;
    let k_inv_sqrt = k.inv_sqrt(DEFAULT_PD_TOL)?;
    let sqrt_fisher = fisher.principal_sqrt(DEFAULT_PD_TOL)?;
    let scale = sqrt_fisher.as_square().matmul(&grad_q.inverse()?)?;
    let deviation = scale.sub(k_inv_sqrt.as_square())?;
    Ok(ModelMatrices { scale, deviation })
}

/// Estimates (|h|_1 / sqrt(n)) * sum_j { E[|A_1j| | |Q_(m)| < eps] +
/// E[|A_2j| | |Q_(m)| < eps] } by simulating datasets. Inside A_2j the
/// unknown intermediate point is replaced by the sup bound from
/// `second_deriv_bound`, so the estimate upper-bounds the target. With
/// eps = +inf no trial is rejected.
pub fn a_terms_mc<M: ModelSpec>(
    model: &M,
    theta0: &[f64],
    n: u64,
    epsilon: f64,
    h1: f64,
    trials: usize,
    seed: u64,
) -> Result<ATermEstimates, BoundError> {
    if trials < MIN_TRIALS {
        return Err(BoundError::TooFewSamples {
            got: trials,
            min: MIN_TRIALS,
        });
    }
    if epsilon.is_nan() || epsilon <= 0.0 {
        return Err(BoundError::InvalidEpsilon(epsilon));
    }
    if n < 2 {
        return Err(BoundError::SampleSizeTooSmall { got: n, min: 2 });
    }
    let d = model.param_dim();
    let mats = model_matrices(model, theta0)?;
    let q0 = model.q(theta0, theta0);
    // sup bounds M_jkl over the eps-box (component j, derivatives k, l)
    let mut m_bounds = vec![0.0; d * d * d];
    for j in 0..d {
        for k in 0..d {
            for l in 0..d {
                m_bounds[(j * d + k) * d + l] = model.second_deriv_bound(j, k, l, theta0, epsilon);
            }
        }
    }

    let per_trial: Vec<Result<Option<(f64, f64)>, ModelError>> = indexed_map(trials, |i| {
        let data = model.sample(theta0, n as usize, derive_seed(seed, n, i as u64));
        let theta_hat = model.mle(&data)?;
        let q_err: Vec<f64> = theta_hat
            .iter()
            .zip(theta0.iter())
            .map(|(a, b)| a - b)
            .collect();
        let q_max = q_err.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if epsilon.is_finite() && q_max >= epsilon {
            return Ok(None);
        }
        let q_hat = model.q(&theta_hat, theta0);
        let nf = n as f64;
        let mut sum_a1 = 0.0;
        let mut sum_a2 = 0.0;
        for j in 0..d {
            let mut a1 = 0.0;
            for k in 0..d {
                a1 += mats.deviation.get(j, k) * (q_hat[k] - q0[k]);
            }
            sum_a1 += (nf * a1).abs();

            let mut a2 = 0.0;
            for k in 0..d {
                let mut inner = 0.0;
                for m in 0..d {
                    for l in 0..d {
                        inner += q_err[m].abs() * q_err[l].abs() * m_bounds[(k * d + m) * d + l];
                    }
                }
                a2 += mats.scale.get(j, k).abs() * inner;
            }
            sum_a2 += 0.5 * nf * a2;
        }
        Ok(Some((sum_a1, sum_a2)))
    });

    let mut accepted = Vec::with_capacity(trials);
    for r in per_trial {
        if let Some(pair) = r? {
            accepted.push(pair);
        }
    }
    let n_acc = accepted.len();
    if n_acc == 0 || (epsilon.is_finite() && (n_acc as f64) < MIN_ACCEPTANCE_RATE * trials as f64) {
        return Err(BoundError::LowAcceptance {
            accepted: n_acc,
            trials,
        });
    }

    let factor = h1 / (n as f64).sqrt();
    let (m1, se1) = mean_and_std_err(accepted.iter().map(|p| p.0));
    let (m2, se2) = mean_and_std_err(accepted.iter().map(|p| p.1));
    Ok(ATermEstimates {
        a1_term: factor * m1,
        a1_std_err: factor * se1,
        a2_term: factor * m2,
        a2_std_err: factor * se2,
        trials,
        accepted: n_acc,
    })
}

/// Monte Carlo estimate of the Markov term 2 ||h|| / eps^2 *
/// E sum_j (th_hat_j - th_0j)^2. Requires a finite eps.
#[derive(Debug, Clone)]
pub struct MseTermEstimate {
    pub value: f64,
    pub std_err: f64,
    pub mean_squared_error: f64,
}

pub fn mse_term_mc<M: ModelSpec>(
    model: &M,
    theta0: &[f64],
    n: u64,
    epsilon: f64,
    sup_h: f64,
    trials: usize,
    seed: u64,
) -> Result<MseTermEstimate, BoundError> {
    if !epsilon.is_finite() {
        return Err(BoundError::EpsilonNotFinite(epsilon));
    }
    if epsilon.is_nan() || epsilon <= 0.0 {
        return Err(BoundError::InvalidEpsilon(epsilon));
    }
    if trials < MIN_TRIALS {
        return Err(BoundError::TooFewSamples {
            got: trials,
            min: MIN_TRIALS,
        });
    }
    if n < 2 {
        return Err(BoundError::SampleSizeTooSmall { got: n, min: 2 });
    }
    let per_trial: Vec<Result<f64, ModelError>> = indexed_map(trials, |i| {
        let data = model.sample(theta0, n as usize, derive_seed(seed, n, i as u64));
        let theta_hat = model.mle(&data)?;
        Ok(theta_hat
            .iter()
            .zip(theta0.iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum())
    });
    let mut sq = Vec::with_capacity(trials);
    for r in per_trial {
        sq.push(r?);
    }
    let (mean, se) = mean_and_std_err(sq.iter().copied());
    let factor = 2.0 * sup_h / (epsilon * epsilon);
    Ok(MseTermEstimate {
        value: factor * mean,
        std_err: factor * se,
        mean_squared_error: mean,
    })
}

fn mean_and_std_err(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count();
    let nf = n as f64;
    let mean = values.clone().sum::<f64>() / nf;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / (nf - 1.0);
    (mean, (var / nf).sqrt())
}

/// How a [`BoundBreakdown`] was assembled.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundMode {
    /// Full bound with a finite conditioning radius (Markov term present).
    General,
    /// Epsilon-free bound, valid when the second derivatives of q are
    /// uniformly bounded: no Markov term, unconditioned remainder terms.
    Simplified,
    /// Parameter-free closed form for the normal model.
    ClosedFormNormal,
    /// The published assembly for the normal model: the rounded first-term
    /// coefficient with Monte Carlo remainder terms.
    PaperConstants,
}

impl BoundMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            BoundMode::General => "general",
            BoundMode::Simplified => "simplified",
            BoundMode::ClosedFormNormal => "closed-form",
            BoundMode::PaperConstants => "paper-constants",
        }
    }
}

/// The computed bound split into its constituents. `total` is always the
/// exact sum of the four terms.
#[derive(Debug, Clone)]
pub struct BoundBreakdown {
    pub n: u64,
    pub mode: BoundMode,
    pub r1_term: f64,
    pub mse_term: f64,
    pub a1_term: f64,
    pub a2_term: f64,
    pub epsilon: f64,
    pub total: f64,
    pub moment_source: Option<MomentSource>,
    /// Summed standard errors of the Monte Carlo terms (0 for deterministic
    /// modes); metadata, not part of the bound.
    pub mc_std_err: f64,
}

impl BoundBreakdown {
    #[allow(clippy::too_many_arguments)]
    fn assemble(
        n: u64,
        mode: BoundMode,
        r1: f64,
        mse: f64,
        a1: f64,
        a2: f64,
        epsilon: f64,
        moment_source: Option<MomentSource>,
        mc_std_err: f64,
    ) -> Self {
        Self {
            n,
            mode,
            r1_term: r1,
            mse_term: mse,
            a1_term: a1,
            a2_term: a2,
            epsilon,
            total: r1 + mse + a1 + a2,
            moment_source,
            mc_std_err,
        }
    }
}

/// Monte Carlo budget for the remainder and Markov terms.
#[derive(Debug, Clone, Copy)]
pub struct McConfig {
    pub trials: usize,
    pub seed: u64,
}

/// Assembles the full bound for a model satisfying the sum structure.
///
/// With eps = +inf and a uniformly bounded Hessian of q the Markov term is
/// dropped and the remainder terms are plain expectations (mode
/// `Simplified`). Moments sourced from the published Hoelder bounds select
/// the published assembly (mode `PaperConstants`), whose first term uses the
/// final rounded coefficient.
pub fn general_bound<M: ModelSpec>(
    model: &M,
    theta0: &[f64],
    n: u64,
    h: &TestFunction,
    epsilon: f64,
    moments: &XiMoments,
    mc: McConfig,
) -> Result<BoundBreakdown, BoundError> {
    let d = model.param_dim();
    if h.dim() != d {
        return Err(BoundError::DimensionMismatch {
            expected: d,
            got: h.dim(),
        });
    }
    if moments.dim() != d {
        return Err(BoundError::DimensionMismatch {
            expected: d,
            got: moments.dim(),
        });
    }
    if epsilon.is_nan() || epsilon <= 0.0 {
        return Err(BoundError::InvalidEpsilon(epsilon));
    }

    let paper_assembly = moments.source() == MomentSource::PaperHolderBounds;
    let r1 = if paper_assembly {
        constants::R1_COEFFICIENT_ROUNDED * h.hess_seminorm() / (n as f64).sqrt()
    } else {
        r1_term(moments, n, h.hess_seminorm())
    };

    let a = a_terms_mc(
        model,
        theta0,
        n,
        epsilon,
        h.grad_seminorm(),
        mc.trials,
        derive_seed(mc.seed, n, STREAM_A_TERMS),
    )?;

    let (mse, mse_se) = if epsilon.is_finite() {
        let est = mse_term_mc(
            model,
            theta0,
            n,
            epsilon,
            h.sup_norm(),
            mc.trials,
            derive_seed(mc.seed, n, STREAM_MSE),
        )?;
        (est.value, est.std_err)
    } else {
        (0.0, 0.0)
    };

    let mode = if paper_assembly {
        BoundMode::PaperConstants
    } else if epsilon.is_infinite() && model.uniformly_bounded_hessian() {
        BoundMode::Simplified
    } else {
        BoundMode::General
    };

    Ok(BoundBreakdown::assemble(
        n,
        mode,
        r1,
        mse,
        a.a1_term,
        a.a2_term,
        epsilon,
        Some(moments.source()),
        a.a1_std_err + a.a2_std_err + mse_se,
    ))
}

/// The parameter-free closed form for the normal model:
/// 7 |h|_2 / sqrt(n) + |h|_1 / sqrt(2 n). Independent of (mu, sigma2).
pub fn closed_form_normal(n: u64, h: &TestFunction) -> Result<BoundBreakdown, BoundError> {
    if h.dim() != 2 {
        return Err(BoundError::DimensionMismatch {
            expected: 2,
            got: h.dim(),
        });
    }
    if n < 1 {
        return Err(BoundError::SampleSizeTooSmall { got: n, min: 1 });
    }
    let nf = n as f64;
    let r1 = constants::R1_COEFFICIENT_ROUNDED * h.hess_seminorm() / nf.sqrt();
    let a2 = h.grad_seminorm() / (2.0 * nf).sqrt();
    Ok(BoundBreakdown::assemble(
        n,
        BoundMode::ClosedFormNormal,
        r1,
        0.0,
        0.0,
        a2,
        f64::INFINITY,
        None,
        0.0,
    ))
}
