//! Acceptance suite: one test per release criterion, each printing a
//! PASS line with its measured values (visible with --nocapture).
//!
//! Criteria 1-10 live here; criterion 11 (byte-identical CLI output across
//! seeds and worker counts) lives in the CLI crate's acceptance suite.
//! The full-scale n = 1e6 table cell is behind `--include-ignored`.

mod common;

use std::sync::LazyLock;

use common::GaussianLocation;
use mlebound::bound::{
    a_terms_mc, closed_form_normal, constants, general_bound, xi_moments_normal_analytic,
    xi_moments_normal_paper, McConfig,
};
use mlebound::matrix::{SquareMatrix, SymMatrix, DEFAULT_PD_TOL};
use mlebound::mc::{
    expect_h_gaussian, w_moment_check, w_moment_check_with, table1, EhMethod, SimConfig, SimReport,
    DEFAULT_DIAGNOSTIC_N,
};
use mlebound::model::{ModelSpec, NormalModel};
use mlebound::seed::derive_seed;
use mlebound::testfn::TestFunction;

const ACCEPT_SEED: u64 = 20_250_810;
const THETA0: [f64; 2] = [1.0, 1.0];

fn round3(x: f64) -> f64 {
    (x * 1000.0).round() / 1000.0
}

/// Shared desk-scale benchmark run: n in {1e3, 1e4, 1e5}, 1e4 trials,
/// together with its wall-clock cost (the clauses target < 3 minutes).
static BENCHMARK: LazyLock<(SimReport, std::time::Duration)> = LazyLock::new(|| {
    let started = std::time::Instant::now();
    let mut config = SimConfig::benchmark_defaults(ACCEPT_SEED);
    config.n_list = vec![1_000, 10_000, 100_000];
    config.trials = 10_000;
    let report = table1(&config).expect("benchmark run");
    (report, started.elapsed())
});

#[test]
fn criterion_01_closed_form_bound_column() {
    let h = TestFunction::inverse_quadratic();
    let expected = [
        (1_000u64, 0.457),
        (10_000, 0.145),
        (100_000, 0.046),
        (1_000_000, 0.014),
    ];
    for (n, want) in expected {
        let b = closed_form_normal(n, &h).unwrap();
        assert_eq!(round3(b.total), want, "n = {n}: total {}", b.total);
    }
    println!("criterion 01 PASS: closed-form bound column = 0.457 / 0.145 / 0.046 / 0.014");
}

#[test]
fn criterion_02_published_constants() {
    let m = xi_moments_normal_paper();
    let third = m.third_aggregate();
    let second = m.second_aggregate();

    let third_formula = 5.0 * (2.0 / std::f64::consts::PI).sqrt() + 3.0 + 15.0_f64.powf(0.75);
    assert!((third - third_formula).abs() < 1e-12);
    assert!(third < constants::THIRD_MOMENT_AGGREGATE_CEILING);
    assert_eq!(round3(third), 14.611);

    let second_formula = 2.0 * (1.0 + (2.0 / std::f64::consts::PI).sqrt());
    assert!((second - second_formula).abs() < 1e-12);
    assert_eq!(round3(second), 3.596);

    // The carried printed coefficient is 6.833 before the final rounding to
    // 7. Re-assembling from the displayed aggregates gives 6.8315: the
    // printed value contains ~1.5e-3 of upstream rounding, so the
    // consistency check runs at 2 units in the third decimal.
    assert_eq!(round3(constants::R1_COEFFICIENT), 6.833);
    let assembled = constants::r1_coefficient_assembled();
    assert!(
        (assembled - constants::R1_COEFFICIENT).abs() < 2e-3,
        "assembled {assembled} vs printed {}",
        constants::R1_COEFFICIENT
    );
    assert!(assembled < constants::R1_COEFFICIENT_ROUNDED);
    println!(
        "criterion 02 PASS: aggregates {third:.6} (< 14.612) and {second:.6}; \
         assembled r1 coefficient {assembled:.6} vs printed 6.833"
    );
}

/// KNOWN RED. The published Q_h column is not reproducible under the stated
/// protocol, and this test keeps the published tolerance rather than loosen
/// it to force a pass.
///
/// Evidence: with 10^4 trials the estimator's standard error is ~0.002, and
/// the true |E h(W_n) - 0.461| is below 0.001 for n >= 10^3 (confirmed here
/// and by an independent implementation at 2e5 trials: mean_h = 0.46090 at
/// n = 10^3 and 0.46160 at n = 10^4, i.e. q_h of 0.0001-0.0006). The
/// published values 0.011 / 0.010 / 0.009 are 5-6 standard errors above the
/// noise floor and nearly constant across three decades of n, which no
/// O(n^-1/2)-decaying quantity matches. Plug-in standardization and
/// unbiased-variance variants of the protocol were also tested and land at
/// the same noise floor. A +/-0.005 window around the published values
/// therefore excludes every honestly obtainable outcome (joint pass
/// probability ~2e-6 over seeds).
#[test]
fn criterion_03_q_h_column_desk_scale() {
    let (report, elapsed) = &*BENCHMARK;
    assert!(
        elapsed.as_secs() < 180,
        "desk-scale run took {elapsed:?}, target < 3 minutes"
    );
    println!("criterion 03 runtime: {elapsed:?} (target < 3 minutes)");
    println!(
        "criterion 03 measured: q_h = {:.4} (se {:.4}) / {:.4} (se {:.4}) / {:.4} (se {:.4})",
        report.rows[0].q_h,
        report.rows[0].std_err,
        report.rows[1].q_h,
        report.rows[1].std_err,
        report.rows[2].q_h,
        report.rows[2].std_err,
    );

    // convergence: the n = 1e5 estimate is no farther from the reference
    // than the n = 1e3 estimate, up to twice the combined standard error
    let first = &report.rows[0];
    let last = &report.rows[2];
    assert!(last.q_h < first.q_h + 2.0 * (first.std_err + last.std_err));

    let published = [(1_000u64, 0.011), (10_000, 0.010), (100_000, 0.009)];
    for ((n, want), row) in published.iter().zip(report.rows.iter()) {
        assert_eq!(row.n, *n);
        assert!(
            (row.q_h - want).abs() <= 0.005,
            "n = {n}: measured q_h {:.5} (se {:.5}) vs published {want}; the measured \
             value sits at the Monte Carlo noise floor of the stated protocol, \
             which cannot reach the published magnitude (see this test's doc \
             comment for the analysis)",
            row.q_h,
            row.std_err
        );
    }
    println!(
        "criterion 03 PASS: q_h = {:.4} / {:.4} / {:.4} vs published 0.011 / 0.010 / 0.009",
        report.rows[0].q_h, report.rows[1].q_h, report.rows[2].q_h
    );
}

#[test]
#[ignore = "full-scale cell (1e9 draws); run with: cargo test -p mlebound --test acceptance -- --include-ignored"]
fn criterion_03_full_scale_cell() {
    let mut config = SimConfig::benchmark_defaults(ACCEPT_SEED);
    config.n_list = vec![1_000_000];
    config.trials = 1_000;
    let report = table1(&config).unwrap();
    let row = &report.rows[0];
    assert!(
        (row.q_h - 0.006).abs() <= 0.006,
        "q_h {} vs published 0.006 (se {})",
        row.q_h,
        row.std_err
    );
    println!(
        "criterion 03 (full scale) PASS: q_h = {:.4} vs published 0.006",
        row.q_h
    );
}

#[test]
fn criterion_04_e_h_gaussian_cross_check() {
    let h = TestFunction::inverse_quadratic();
    let quad = expect_h_gaussian(&h, EhMethod::Quadrature).unwrap().value;
    assert_eq!(round3(quad), 0.461, "quadrature {quad}");
    let mc = expect_h_gaussian(
        &h,
        EhMethod::MonteCarlo {
            samples: 10_000_000,
            seed: derive_seed(ACCEPT_SEED, 4, 0),
        },
    )
    .unwrap();
    let se = mc.std_err.unwrap();
    assert!(
        (mc.value - quad).abs() <= 4.0 * se,
        "quad {quad} vs mc {} (se {se})",
        mc.value
    );
    println!(
        "criterion 04 PASS: E h(Z) quadrature {quad:.6}, mc {:.6} (se {se:.2e})",
        mc.value
    );
}

#[test]
fn criterion_05_validity_q_h_below_bound() {
    let (report, _) = &*BENCHMARK;
    for row in &report.rows {
        assert!(row.trials >= 1_000);
        assert!(
            row.q_h <= row.bound,
            "n = {}: q_h {} exceeds bound {}",
            row.n,
            row.q_h,
            row.bound
        );
    }
    println!("criterion 05 PASS: q_h <= bound on every row");
}

#[test]
fn criterion_06_order_property() {
    let h = TestFunction::inverse_quadratic();
    // closed form: exact 1/sqrt(n) decay
    for n in [1_000u64, 10_000] {
        let ratio = closed_form_normal(100 * n, &h).unwrap().total
            / closed_form_normal(n, &h).unwrap().total;
        assert!(
            (0.09..=0.11).contains(&ratio),
            "closed-form ratio at n = {n}: {ratio}"
        );
    }
    // general mode with matched seeds
    let model = NormalModel::new();
    let moments = xi_moments_normal_analytic().unwrap();
    let mc = McConfig {
        trials: 1_000,
        seed: derive_seed(ACCEPT_SEED, 6, 0),
    };
    let mut ratios = Vec::new();
    for n in [1_000u64, 10_000] {
        let low = general_bound(&model, &THETA0, n, &h, f64::INFINITY, &moments, mc).unwrap();
        let high =
            general_bound(&model, &THETA0, 100 * n, &h, f64::INFINITY, &moments, mc).unwrap();
        let ratio = high.total / low.total;
        assert!(
            (0.09..=0.11).contains(&ratio),
            "general-mode ratio at n = {n}: {ratio}"
        );
        ratios.push(ratio);
    }
    println!(
        "criterion 06 PASS: total(100n)/total(n) in [0.09, 0.11] (general mode: {:.4}, {:.4})",
        ratios[0], ratios[1]
    );
}

#[test]
fn criterion_07_w_diagnostic_and_fault() {
    let model = NormalModel::new();
    let report = w_moment_check(&model, &THETA0, 100_000, derive_seed(ACCEPT_SEED, 7, 0)).unwrap();
    assert!(
        report.pass,
        "mean z {} cov z {}",
        report.max_mean_z, report.max_cov_z
    );

    // injected fault: K/2 must fail the same check
    let k = mlebound::bound::compute_k(&model.grad_q(&THETA0), &model.fisher(&THETA0).unwrap())
        .unwrap();
    let mut halved = SquareMatrix::zeros(2);
    for i in 0..2 {
        for j in 0..2 {
            halved.set(i, j, k.get(i, j) / 2.0);
        }
    }
    let halved = SymMatrix::new(halved).unwrap();
    let faulty = w_moment_check_with(
        &model,
        &THETA0,
        DEFAULT_DIAGNOSTIC_N,
        100_000,
        derive_seed(ACCEPT_SEED, 7, 0),
        Some(&halved),
    )
    .unwrap();
    assert!(!faulty.pass, "mis-scaled K passed the diagnostic");
    println!(
        "criterion 07 PASS: W diagnostic max z = {:.2} (mean) / {:.2} (cov); K/2 fault detected",
        report.max_mean_z, report.max_cov_z
    );
}

#[test]
fn criterion_08_structural_identity_and_fault() {
    let residual = |model: &NormalModel| -> f64 {
        let mut worst = 0.0f64;
        for case in 0..200u64 {
            let n = 2 + (derive_seed(ACCEPT_SEED, 8, case) % 49) as usize;
            let mu = -3.0 + 6.0 * (derive_seed(ACCEPT_SEED, 88, case) as f64 / u64::MAX as f64);
            let s2 = 0.1 + 3.9 * (derive_seed(ACCEPT_SEED, 888, case) as f64 / u64::MAX as f64);
            let theta0 = [mu, s2];
            let x = model.sample(&theta0, n, derive_seed(ACCEPT_SEED, 8888, case));
            let qv = model.q(&model.mle(&x).unwrap(), &theta0);
            let mut gsum = [0.0f64; 2];
            for xi in &x {
                let gv = model.g(std::slice::from_ref(xi), &theta0);
                gsum[0] += gv[0];
                gsum[1] += gv[1];
            }
            let nf = n as f64;
            worst = worst
                .max((qv[0] - gsum[0] / nf).abs())
                .max((qv[1] - gsum[1] / nf).abs());
        }
        worst
    };

    let honest = residual(&NormalModel::new());
    assert!(honest <= 1e-10, "structural residual {honest}");
    let faulty = residual(&NormalModel::with_variance_divisor_fault());
    assert!(faulty > 1e-10, "divisor fault went undetected: {faulty}");
    println!(
        "criterion 08 PASS: structural residual {honest:.2e}; divisor fault residual {faulty:.2e}"
    );
}

#[test]
fn criterion_09_matrix_oracle_suite() {
    // 1000 random SPD matrices, d <= 6, spectra in [0.1, 10]
    let mut worst_sqrt = 0.0f64;
    let mut worst_inv = 0.0f64;
    let mut worst_cross = 0.0f64;
    for case in 0..1_000u64 {
        let d = 1 + (derive_seed(ACCEPT_SEED, 9, case) % 6) as usize;
        let mut q = SquareMatrix::identity(d);
        let mut stream = 0u64;
        let next_unit = |stream: &mut u64| {
            *stream += 1;
            derive_seed(ACCEPT_SEED, 90 + *stream, case) as f64 / u64::MAX as f64
        };
        for i in 0..d {
            for j in (i + 1)..d {
                let angle = (next_unit(&mut stream) - 0.5) * 6.2;
                let (s, c) = angle.sin_cos();
                let mut rot = SquareMatrix::identity(d);
                rot.set(i, i, c);
                rot.set(j, j, c);
                rot.set(i, j, -s);
                rot.set(j, i, s);
                q = q.matmul(&rot).unwrap();
            }
        }
        let mut lam = SquareMatrix::zeros(d);
        for i in 0..d {
            lam.set(i, i, 0.1 + 9.9 * next_unit(&mut stream));
        }
        let a = SymMatrix::symmetrized(q.matmul(&lam).unwrap().matmul(&q.transpose()).unwrap())
            .unwrap();
        let scale = a.as_square().frobenius_norm();

        let s = a.principal_sqrt(DEFAULT_PD_TOL).unwrap();
        let ss = s.as_square().matmul(s.as_square()).unwrap();
        worst_sqrt = worst_sqrt.max(ss.sub(a.as_square()).unwrap().frobenius_norm() / scale);

        let inv = a.inverse(DEFAULT_PD_TOL).unwrap();
        let prod = a.as_square().matmul(inv.as_square()).unwrap();
        worst_inv = worst_inv.max(
            prod.sub(&SquareMatrix::identity(d))
                .unwrap()
                .frobenius_norm(),
        );

        let sqrt_inv = inv.principal_sqrt(DEFAULT_PD_TOL).unwrap();
        let inv_sqrt = s.inverse(DEFAULT_PD_TOL).unwrap();
        let cross = sqrt_inv
            .as_square()
            .sub(inv_sqrt.as_square())
            .unwrap()
            .frobenius_norm()
            / inv_sqrt.as_square().frobenius_norm();
        worst_cross = worst_cross.max(cross);
    }
    assert!(worst_sqrt <= 1e-10, "sqrt roundtrip {worst_sqrt}");
    assert!(worst_inv <= 1e-10, "inverse roundtrip {worst_inv}");
    assert!(
        worst_cross <= 1e-9,
        "sqrt/inverse consistency {worst_cross}"
    );
    println!(
        "criterion 09 PASS: worst sqrt {worst_sqrt:.2e}, inverse {worst_inv:.2e}, \
         cross {worst_cross:.2e} over 1000 matrices"
    );
}

#[test]
fn criterion_10_normal_a_terms() {
    let model = NormalModel::new();
    let h = TestFunction::inverse_quadratic();
    let n = 1_000u64;
    let est = a_terms_mc(
        &model,
        &THETA0,
        n,
        f64::INFINITY,
        h.grad_seminorm(),
        10_000,
        derive_seed(ACCEPT_SEED, 10, 0),
    )
    .unwrap();
    assert!(
        est.a1_term.abs() <= 1e-12,
        "a1 must vanish to machine precision, got {}",
        est.a1_term
    );
    let expected = h.grad_seminorm() / (2.0 * n as f64).sqrt();
    assert!(
        (est.a2_term - expected).abs() <= 3.0 * est.a2_std_err,
        "a2 {} vs analytic {expected} (se {})",
        est.a2_term,
        est.a2_std_err
    );
    println!(
        "criterion 10 PASS: a1 = {:.1e}, a2 = {:.6} vs analytic {expected:.6} (se {:.1e})",
        est.a1_term, est.a2_term, est.a2_std_err
    );
}

#[test]
fn identity_class_sanity_for_the_shared_model_path() {
    // Supplementary: the identity-transform member of the class passes the
    // covariance diagnostic, tying the acceptance harness to the abstract
    // contract rather than the normal model alone.
    let model = GaussianLocation { dim: 2 };
    let report = w_moment_check(
        &model,
        &[0.25, -0.75],
        20_000,
        derive_seed(ACCEPT_SEED, 11, 0),
    )
    .unwrap();
    assert!(report.pass);
}
