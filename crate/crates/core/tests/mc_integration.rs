//! Distributional behavior of the trial harness at integration scale.

mod common;

use common::GaussianLocation;
use mlebound::mc::{
    w_moment_check, w_moment_check_with, per_trial_records, table1, SimConfig, DEFAULT_DIAGNOSTIC_N,
};
use mlebound::model::NormalModel;
use mlebound::par::run_with_workers;
use mlebound::testfn::TestFunction;

#[test]
fn trial_outputs_have_identity_covariance_at_large_n() {
    // 1e5 standardized trials at n = 1000: empirical covariance within 0.02
    // of the identity, per entry.
    let model = NormalModel::new();
    let theta0 = [1.0, 1.0];
    let h = TestFunction::inverse_quadratic();
    let records = per_trial_records(&model, &theta0, 1_000, &h, 100_000, 606).unwrap();
    let nf = records.len() as f64;
    let mut mean = [0.0f64; 2];
    for r in &records {
        mean[0] += r.w[0];
        mean[1] += r.w[1];
    }
    mean[0] /= nf;
    mean[1] /= nf;
    let mut cov = [[0.0f64; 2]; 2];
    for r in &records {
        let d = [r.w[0] - mean[0], r.w[1] - mean[1]];
        for i in 0..2 {
            for j in 0..2 {
                cov[i][j] += d[i] * d[j] / nf;
            }
        }
    }
    for i in 0..2 {
        for j in 0..2 {
            let target = if i == j { 1.0 } else { 0.0 };
            assert!(
                (cov[i][j] - target).abs() < 0.02,
                "cov[{i}][{j}] = {}",
                cov[i][j]
            );
        }
    }
}

#[test]
fn per_coordinate_variance_tightens_at_n_1e4() {
    let model = NormalModel::new();
    let theta0 = [1.0, 1.0];
    let h = TestFunction::inverse_quadratic();
    let records = per_trial_records(&model, &theta0, 10_000, &h, 20_000, 607).unwrap();
    let nf = records.len() as f64;
    for coord in 0..2 {
        let mean = records.iter().map(|r| r.w[coord]).sum::<f64>() / nf;
        let var = records
            .iter()
            .map(|r| (r.w[coord] - mean) * (r.w[coord] - mean))
            .sum::<f64>()
            / nf;
        assert!(mean.abs() < 0.03, "coordinate {coord} mean {mean}");
        assert!(
            (0.97..=1.03).contains(&var),
            "coordinate {coord} variance {var}"
        );
    }
}

#[test]
fn w_moments_identity_model_passes() {
    // q = g = identity, K = I.
    let model = GaussianLocation { dim: 3 };
    let theta0 = [0.0, 1.0, -2.0];
    let report = w_moment_check(&model, &theta0, 20_000, 17).unwrap();
    assert!(
        report.pass,
        "max z: mean {} cov {}",
        report.max_mean_z, report.max_cov_z
    );
}

#[test]
fn w_moments_custom_n_matches_default() {
    let model = NormalModel::new();
    let theta0 = [1.0, 1.0];
    let a = w_moment_check(&model, &theta0, 2_000, 3).unwrap();
    let b = w_moment_check_with(&model, &theta0, DEFAULT_DIAGNOSTIC_N, 2_000, 3, None).unwrap();
    assert_eq!(a.mean, b.mean);
    assert_eq!(a.cov, b.cov);
}

#[test]
fn report_rows_are_bitwise_stable_across_runs_and_workers() {
    let mut config = SimConfig::benchmark_defaults(31_415);
    config.n_list = vec![1_000, 4_000];
    config.trials = 1_000;

    let baseline = table1(&config).unwrap();
    for workers in [Some(1), Some(2), Some(4)] {
        config.workers = workers;
        let report = table1(&config).unwrap();
        for (a, b) in baseline.rows.iter().zip(report.rows.iter()) {
            assert_eq!(a.n, b.n);
            assert_eq!(a.mean_h.to_bits(), b.mean_h.to_bits());
            assert_eq!(a.q_h.to_bits(), b.q_h.to_bits());
            assert_eq!(a.std_err.to_bits(), b.std_err.to_bits());
            assert_eq!(a.bound.to_bits(), b.bound.to_bits());
            assert_eq!(a.error.to_bits(), b.error.to_bits());
        }
    }
}

#[test]
fn ambient_pool_size_does_not_leak_into_results() {
    // Same as above but the whole run executes inside pools of different
    // sizes rather than through SimConfig::workers.
    let mut config = SimConfig::benchmark_defaults(8);
    config.n_list = vec![2_000];
    config.trials = 500;
    let a = run_with_workers(Some(1), || table1(&config).unwrap());
    let b = run_with_workers(Some(3), || table1(&config).unwrap());
    assert_eq!(a.rows[0].mean_h.to_bits(), b.rows[0].mean_h.to_bits());
}

#[test]
fn validity_holds_on_a_moderate_run() {
    let mut config = SimConfig::benchmark_defaults(99);
    config.n_list = vec![1_000, 10_000];
    config.trials = 2_000;
    let report = table1(&config).unwrap();
    for row in &report.rows {
        assert!(row.q_h <= row.bound, "n = {}", row.n);
        assert!(row.error >= 0.0);
        assert_eq!(row.degenerate_retries, 0);
    }
}
