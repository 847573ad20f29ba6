//! End-to-end acceptance checks. Each test prints one PASS/FAIL line.
//! Run with `cargo test --release -p spikeslab --test acceptance -- --nocapture`.

mod common;

use common::{inverse_gaussian_cdf, ks_distance, ks_p_value, laplace_cdf, mean_se, report, truncated_normal_cdf};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use spikeslab::bgl_ss::run_bgl_ss;
use spikeslab::bsgl::run_bsgl;
use spikeslab::chain::summarize;
use spikeslab::dists::*;
use spikeslab::freq::{
    group_lasso_kkt, solve_group_lasso, solve_sparse_group_lasso, sparse_group_lasso_kkt, BlockCache,
    PenalizedMethod, SolverOptions,
};
use spikeslab::geweke::{geweke_bgl_ss, geweke_bsgl, geweke_bsgs_ss, GewekeProblem};
use spikeslab::model::{BsglLambdas, InvGammaPrior, Pi0Prior, Tuning};
use spikeslab::sim::{default_pi0_settings, run_benchmark, run_sensitivity, BenchmarkConfig, Method};
use spikeslab::thresholding::{group_lasso_threshold, orthogonal_design, orthogonal_least_squares, OrthogonalContext};
use spikeslab::{selection_of, GroupedCoefficients, GroupedDesign, SamplerConfig};
use statrs::distribution::{Beta, ContinuousCDF, Gamma, InverseGamma, Normal};

const SEED: u64 = 20_150_101;
const REPS: usize = 50;

fn sel_row<'a>(
    report: &'a spikeslab::sim::BenchmarkReport,
    example: usize,
    method: Method,
    rule: &str,
) -> &'a spikeslab::sim::SelectionRow {
    report
        .selection
        .iter()
        .find(|r| r.example == example && r.method == method && r.rule == rule)
        .expect("selection row present")
}

fn mse_row(report: &spikeslab::sim::BenchmarkReport, example: usize, method: Method, est: &str) -> f64 {
    report
        .prediction
        .iter()
        .find(|r| r.example == example && r.method == method && r.estimator == est)
        .and_then(|r| r.median_mse)
        .expect("prediction row present")
}

#[test]
fn criterion_01_example3_group_selection() {
    let cfg = BenchmarkConfig::new(vec![3], vec![Method::BglSs], REPS, SamplerConfig::default());
    let rep = run_benchmark(&cfg).unwrap();
    let row = sel_row(&rep, 3, Method::BglSs, "mtm");
    let (tpr, fpr) = (row.mean_tpr.unwrap(), row.mean_fpr.unwrap());
    let pass = tpr >= 0.98 && fpr <= 0.02 && row.n_reps == REPS;
    report(1, "example 3 BGL-SS median-model rates", pass, &format!("TPR {tpr:.3}, FPR {fpr:.3} over {} reps", row.n_reps));
    assert!(pass);
}

#[test]
fn criterion_02_example1_fpr_versus_group_lasso() {
    let cfg = BenchmarkConfig::new(vec![1], vec![Method::BglSs, Method::GroupLasso], REPS, SamplerConfig::default());
    let rep = run_benchmark(&cfg).unwrap();
    let bgl = sel_row(&rep, 1, Method::BglSs, "mtm").mean_fpr.unwrap();
    let gl = sel_row(&rep, 1, Method::GroupLasso, "support").mean_fpr.unwrap();
    let pass = (0.08..=0.38).contains(&bgl) && gl >= 0.45 && gl - bgl >= 0.2;
    report(2, "example 1 FPR, BGL-SS vs cross-validated GL", pass, &format!("BGL-SS {bgl:.3}, GL {gl:.3}"));
    assert!(pass);
}

#[test]
fn criterion_03_prediction_error() {
    let cfg = BenchmarkConfig::new(vec![1], vec![Method::BglSs], REPS, SamplerConfig::default());
    let ex1 = mse_row(&run_benchmark(&cfg).unwrap(), 1, Method::BglSs, "mean");
    let cfg = BenchmarkConfig::new(vec![4], vec![Method::BsgsSs, Method::GroupLasso], REPS, SamplerConfig::default());
    let rep4 = run_benchmark(&cfg).unwrap();
    let bsgs = mse_row(&rep4, 4, Method::BsgsSs, "mean");
    let gl = mse_row(&rep4, 4, Method::GroupLasso, "estimate");
    let pass = (8.5..=11.5).contains(&ex1) && bsgs < gl;
    report(
        3,
        "median test MSE",
        pass,
        &format!("example 1 BGL-SS {ex1:.2}; example 4 BSGS-SS {bsgs:.2} vs GL {gl:.2}"),
    );
    assert!(pass);
}

#[test]
fn criterion_04_pi0_sensitivity() {
    let r = run_sensitivity(1, &default_pi0_settings(), 20, &SamplerConfig::default(), SEED).unwrap();
    let vals: Vec<f64> = r.rows.iter().map(|row| row.mtm_misclassification.unwrap()).collect();
    let max = vals.iter().copied().fold(f64::MIN, f64::max);
    let min = vals.iter().copied().fold(f64::MAX, f64::min);
    let pass = max <= 0.20 && max - min <= 0.15 && r.rows.iter().all(|row| row.n_failed == 0);
    let detail = r
        .rows
        .iter()
        .map(|row| format!("{} {:.3}", row.setting, row.mtm_misclassification.unwrap()))
        .collect::<Vec<_>>()
        .join(", ");
    report(4, "median-model misclassification across pi0 settings", pass, &format!("{detail}; spread {:.3}", max - min));
    assert!(pass);
}

/// Marginal posterior median of each coefficient from BGL-SS with fixed
/// (τ², σ², π₀) against the closed form on an orthogonal design.
#[test]
fn criterion_05_closed_form_median() {
    let mut rng = RngStream::new(SEED, 5);
    let n_draws = 20_000;
    let mut value_ok = 0;
    let mut pattern_ok = 0;
    for _ in 0..50 {
        let n_groups = rng.random_range(2..=4);
        let sizes: Vec<usize> = (0..n_groups).map(|_| rng.random_range(1..=3)).collect();
        let p: usize = sizes.iter().sum();
        let n = rng.random_range(20..=80);
        let sigma = rng.random_range(0.5..2.0);
        let pi0 = rng.random_range(0.2..0.8);
        let tau2: Vec<f64> = (0..n_groups).map(|_| rng.random_range(0.01..1.0)).collect();
        let beta: Vec<f64> = (0..p)
            .map(|_| if rng.random_bool(0.4) { 0.0 } else { rng.random_range(-1.0..1.0) })
            .collect();
        let design = orthogonal_design(n, &sizes, &beta, sigma, &mut rng).unwrap();
        let ls = orthogonal_least_squares(&design);
        let closed = OrthogonalContext::new(n, sigma, tau2.clone(), pi0, ls).unwrap().median_threshold();
        let mut cfg = SamplerConfig::default();
        cfg.n_burn = 200;
        cfg.n_iter = n_draws + cfg.n_burn;
        cfg.fixed_sigma2 = Some(sigma * sigma);
        cfg.bgl.fixed_tau2 = Some(tau2);
        cfg.bgl.pi0 = Pi0Prior::Fixed { value: pi0 };
        let draws = run_bgl_ss(&design, &cfg, 1.0, &mut rng).unwrap();
        let summary = summarize(&draws).unwrap();
        let se = (0.25 / n_draws as f64).sqrt();
        let mut inst_value = true;
        for j in 0..p {
            let m = closed.values()[j];
            let trace = draws.coefficient_trace(j);
            let below = trace.iter().filter(|&&v| v < m).count() as f64 / n_draws as f64;
            let at_or_below = trace.iter().filter(|&&v| v <= m).count() as f64 / n_draws as f64;
            if !(below - 3.0 * se <= 0.5 && 0.5 <= at_or_below + 3.0 * se) {
                inst_value = false;
            }
        }
        value_ok += inst_value as usize;
        pattern_ok += (selection_of(&summary.coef_median) == selection_of(&closed)) as usize;
    }
    let pass = value_ok >= 48 && pattern_ok >= 48;
    report(
        5,
        "closed-form median vs Gibbs median",
        pass,
        &format!("within 3 MC SE in {value_ok}/50, zero pattern identical in {pattern_ok}/50"),
    );
    assert!(pass);
}

#[test]
fn criterion_06_marginal_prior_equivalence() {
    let mut rng = RngStream::new(SEED, 6);
    let n = 100_000;
    let (lambda, sigma) = (1.5, 0.8);
    let draws: Vec<f64> = (0..n)
        .map(|_| {
            let tau2 = draw_gamma(1.0, 0.5 * lambda * lambda, &mut rng).unwrap();
            (sigma * sigma * tau2).sqrt() * std_normal(&mut rng)
        })
        .collect();
    let d_bgl = ks_distance(&draws, |x| laplace_cdf(x, lambda / sigma));

    // BSGL with an all-zero design samples its prior
    let (l1, l2, s2) = (1.0f64, 2.25f64, 0.64f64);
    let design = GroupedDesign::new(DVector::zeros(10), DMatrix::zeros(10, 1), vec![1]).unwrap();
    let mut cfg = SamplerConfig::default();
    cfg.n_burn = 1000;
    cfg.n_iter = n + cfg.n_burn;
    cfg.fixed_sigma2 = Some(s2);
    cfg.bsgl.lambdas = BsglLambdas::Fixed { lambda1_sq: l1, lambda2_sq: l2 };
    let chain = run_bsgl(&design, &cfg, &mut rng).unwrap();
    let d_bsgl = ks_distance(&chain.coefficient_trace(0), |x| laplace_cdf(x, (l1.sqrt() + l2.sqrt()) / s2.sqrt()));
    let pass = d_bgl <= 0.02 && d_bsgl <= 0.02;
    report(
        6,
        "scale-mixture priors vs double exponential",
        pass,
        &format!("KS group-lasso prior {d_bgl:.4}, sparse-group-lasso prior {d_bsgl:.4}"),
    );
    assert!(pass);
}

#[test]
fn criterion_07_joint_distribution_checks() {
    let n_draws = 50_000;
    let mut rng = RngStream::new(SEED, 7);
    let mut cfg = SamplerConfig::default();
    cfg.bgl.lambda = Tuning::Fixed { value: 1.0 };
    cfg.bgl.sigma2_prior = InvGammaPrior { shape: 3.0, scale: 2.0 };
    let bgl = geweke_bgl_ss(&GewekeProblem::random(15, vec![2, 2], &mut rng), &cfg, n_draws, &mut rng).unwrap();
    cfg.bsgl.lambdas = BsglLambdas::Fixed { lambda1_sq: 1.0, lambda2_sq: 1.0 };
    cfg.bsgl.sigma2_prior = InvGammaPrior { shape: 3.0, scale: 2.0 };
    let bsgl = geweke_bsgl(&GewekeProblem::random(12, vec![2, 1], &mut rng), &cfg, n_draws, &mut rng).unwrap();
    cfg.bsgs.t = Tuning::Fixed { value: 1.0 };
    cfg.bsgs.sigma2_prior = InvGammaPrior { shape: 3.0, scale: 2.0 };
    let bsgs = geweke_bsgs_ss(&GewekeProblem::random(12, vec![2, 2], &mut rng), &cfg, n_draws, &mut rng).unwrap();
    let pass = bgl.passes(4.0) && bsgl.passes(4.0) && bsgs.passes(4.0);
    report(
        7,
        "Geweke joint-distribution tests",
        pass,
        &format!(
            "max |z|: BGL-SS {:.2} ({} moments), BSGL {:.2} ({}), BSGS-SS {:.2} ({})",
            bgl.max_abs_z(),
            bgl.moments.len(),
            bsgl.max_abs_z(),
            bsgl.moments.len(),
            bsgs.max_abs_z(),
            bsgs.moments.len()
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_08_solver_certification() {
    let mut rng = RngStream::new(SEED, 8);
    let mut worst_kkt: f64 = 0.0;
    let mut fits = 0;
    for inst in 0..100 {
        let n_groups = rng.random_range(2..=6);
        let sizes: Vec<usize> = (0..n_groups).map(|_| rng.random_range(1..=4)).collect();
        let p: usize = sizes.iter().sum();
        let n = rng.random_range(10..=60);
        let z0: Vec<f64> = (0..n).map(|_| std_normal(&mut rng)).collect();
        let x = DMatrix::from_fn(n, p, |i, _| 0.6 * z0[i] + std_normal(&mut rng));
        let beta: Vec<f64> = (0..p).map(|_| if rng.random_bool(0.5) { 0.0 } else { 2.0 * std_normal(&mut rng) }).collect();
        let mu = &x * DVector::from_column_slice(&beta);
        let y = DVector::from_fn(n, |i, _| mu[i] + std_normal(&mut rng));
        let d = GroupedDesign::new(y, x, sizes).unwrap();
        let cache = BlockCache::new(&d);
        let frac = rng.random_range(0.01..0.9);
        if inst % 2 == 0 {
            let lambda = frac * PenalizedMethod::GroupLasso.lambda_max(&d);
            let fit = solve_group_lasso(&d, lambda, &cache, None, SolverOptions::default()).unwrap();
            worst_kkt = worst_kkt.max(group_lasso_kkt(&d, &fit.coef, lambda));
        } else {
            let alpha = [0.25, 0.5, 0.75][inst % 3];
            let lambda = frac * PenalizedMethod::SparseGroupLasso { alpha }.lambda_max(&d);
            let (l1, l2) = (alpha * lambda, (1.0 - alpha) * lambda);
            let fit = solve_sparse_group_lasso(&d, l1, l2, &cache, None, SolverOptions::default()).unwrap();
            worst_kkt = worst_kkt.max(sparse_group_lasso_kkt(&d, &fit.coef, l1, l2));
        }
        fits += 1;
    }
    let mut worst_gap: f64 = 0.0;
    for _ in 0..100 {
        let sizes = vec![2, 3, 1, 2];
        let beta: Vec<f64> = (0..8).map(|_| if rng.random_bool(0.4) { 0.0 } else { std_normal(&mut rng) }).collect();
        let n = rng.random_range(10..=50);
        let d = orthogonal_design(n, &sizes, &beta, 1.0, &mut rng).unwrap();
        let ls = orthogonal_least_squares(&d);
        let lambda = rng.random_range(0.05..1.2) * PenalizedMethod::GroupLasso.lambda_max(&d);
        let fit = solve_group_lasso(&d, lambda, &BlockCache::new(&d), None, SolverOptions::default()).unwrap();
        let closed = group_lasso_threshold(&ls, n, lambda / 2.0).unwrap();
        for (a, b) in fit.coef.values().iter().zip(closed.values()) {
            worst_gap = worst_gap.max((a - b).abs());
        }
    }
    let pass = worst_kkt <= 1e-6 && worst_gap <= 1e-10;
    report(
        8,
        "penalized solvers",
        pass,
        &format!("worst KKT residual {worst_kkt:.2e} over {fits} fits; orthogonal closed-form gap {worst_gap:.2e}"),
    );
    assert!(pass);
}

#[test]
fn criterion_09_empirical_asymptotics() {
    let mut rng = RngStream::new(SEED, 9);
    let sizes = vec![2, 2, 1, 3];
    let truth = GroupedCoefficients::new(vec![0.3, -0.2, 0.0, 0.0, 0.25, 0.0, 0.0, 0.0], sizes.clone()).unwrap();
    let true_sel = selection_of(&truth);
    let reps = 200;
    let mut acc = Vec::new();
    for n in [50usize, 500, 5000] {
        let sd = 1.0 / (n as f64).sqrt();
        let mut hits = 0;
        for _ in 0..reps {
            let ls: Vec<f64> = truth.values().iter().map(|b| b + sd * std_normal(&mut rng)).collect();
            let ls = GroupedCoefficients::new(ls, sizes.clone()).unwrap();
            let tau2 = (n as f64).powf(0.75);
            let est = OrthogonalContext::with_common_tau2(n, 1.0, tau2, 0.5, ls).unwrap().median_threshold();
            hits += (selection_of(&est) == true_sel) as usize;
        }
        acc.push(hits as f64 / reps as f64);
    }
    // a size-2 null group under group-lasso thresholding with λ_n = √n
    let mut null_rates = Vec::new();
    for n in [100usize, 10_000] {
        let sd = 1.0 / (n as f64).sqrt();
        let mut zeros = 0;
        for _ in 0..reps {
            let ls = GroupedCoefficients::new(vec![0.8, -0.5, sd * std_normal(&mut rng), sd * std_normal(&mut rng)], vec![2, 2])
                .unwrap();
            let gl = group_lasso_threshold(&ls, n, (n as f64).sqrt()).unwrap();
            zeros += (gl.group_norm(1) == 0.0) as usize;
        }
        null_rates.push(zeros as f64 / reps as f64);
    }
    let monotone = acc.windows(2).all(|w| w[0] <= w[1]);
    let pass = monotone && acc[2] >= 0.99 && null_rates.iter().all(|&r| r <= 0.95);
    report(
        9,
        "selection consistency of the median threshold vs group lasso",
        pass,
        &format!(
            "median-threshold accuracy {:.3}/{:.3}/{:.3} at n=50/500/5000; GL null-group zero rate {:.3} (n=1e2), {:.3} (n=1e4)",
            acc[0], acc[1], acc[2], null_rates[0], null_rates[1]
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_10_distribution_suite() {
    let n = 100_000;
    let mut rng = RngStream::new(SEED, 10);
    let mut failures = Vec::new();
    let mut checks = 0;
    fn ks(name: String, xs: Vec<f64>, cdf: &dyn Fn(f64) -> f64, failures: &mut Vec<String>, checks: &mut usize) {
        let d = ks_distance(&xs, cdf);
        let p = ks_p_value(d, xs.len());
        *checks += 1;
        if p <= 0.001 {
            failures.push(format!("{name} (D={d:.4}, p={p:.2e})"));
        }
    }
    let std_norm = Normal::new(0.0, 1.0).unwrap();
    ks("normal".into(), (0..n).map(|_| std_normal(&mut rng)).collect(), &|x| std_norm.cdf(x), &mut failures, &mut checks);
    for (shape, rate) in [(0.5, 1.0), (2.0, 3.0), (7.5, 0.5)] {
        let xs = (0..n).map(|_| draw_gamma(shape, rate, &mut rng).unwrap()).collect();
        let d = Gamma::new(shape, rate).unwrap();
        ks(format!("gamma({shape},{rate})"), xs, &|x| d.cdf(x), &mut failures, &mut checks);
    }
    for (shape, scale) in [(1.0, 1.0), (3.0, 2.0), (10.0, 0.5)] {
        let xs = (0..n).map(|_| draw_inverse_gamma(shape, scale, &mut rng).unwrap()).collect();
        let d = InverseGamma::new(shape, scale).unwrap();
        ks(format!("inverse-gamma({shape},{scale})"), xs, &|x| d.cdf(x), &mut failures, &mut checks);
    }
    for (mean, shape) in [(1.0, 1.0), (0.2, 5.0), (4.0, 0.5)] {
        let xs: Vec<f64> = (0..n).map(|_| draw_inverse_gaussian(mean, shape, &mut rng).unwrap()).collect();
        let recips: Vec<f64> = xs.iter().map(|x| 1.0 / x).collect();
        let (m, se) = mean_se(&recips);
        checks += 1;
        if (m - (1.0 / mean + 1.0 / shape)).abs() > 3.0 * se {
            failures.push(format!("inverse-Gaussian({mean},{shape}) reciprocal mean {m:.4}"));
        }
        ks(format!("inverse-Gaussian({mean},{shape})"), xs, &|x| inverse_gaussian_cdf(x, mean, shape), &mut failures, &mut checks);
    }
    for (loc, sd) in [(0.0, 1.0), (1.5, 0.7), (-6.0, 1.0)] {
        let xs = (0..n).map(|_| draw_truncated_normal_positive(loc, sd, &mut rng).unwrap()).collect();
        ks(format!("truncated-normal({loc},{sd})"), xs, &|x| truncated_normal_cdf(x, loc, sd), &mut failures, &mut checks);
    }
    for (a, b) in [(0.5, 0.5), (2.0, 5.0), (30.0, 3.0)] {
        let xs = (0..n).map(|_| draw_beta(a, b, &mut rng).unwrap()).collect();
        let d = Beta::new(a, b).unwrap();
        ks(format!("beta({a},{b})"), xs, &|x| d.cdf(x), &mut failures, &mut checks);
    }
    let s = 1.7;
    let xs: Vec<f64> = (0..n).map(|_| draw_truncated_normal_positive(0.0, s, &mut rng).unwrap()).collect();
    let (m, se) = mean_se(&xs);
    checks += 1;
    if (m - s * (2.0 / std::f64::consts::PI).sqrt()).abs() > 3.0 * se {
        failures.push(format!("half-normal mean {m:.4}"));
    }
    let a: Vec<f64> = {
        let mut r = RngStream::new(1, 2);
        (0..100).map(|_| draw_gamma(2.0, 1.0, &mut r).unwrap()).collect()
    };
    let b: Vec<f64> = {
        let mut r = RngStream::new(1, 2);
        (0..100).map(|_| draw_gamma(2.0, 1.0, &mut r).unwrap()).collect()
    };
    checks += 1;
    if a != b {
        failures.push("stream determinism".into());
    }
    let pass = failures.is_empty();
    report(
        10,
        "distribution suite",
        pass,
        &if pass { format!("{checks} checks") } else { format!("failed: {}", failures.join("; ")) },
    );
    assert!(pass);
}
