//! Joint-distribution ("getting it right") checks for the Gibbs samplers.
//!
//! The marginal-conditional simulator draws parameters from the prior and
//! data given parameters. The successive-conditional simulator alternates
//! one sampler sweep with a fresh data draw. Both target the same joint, so
//! the means of any test function must agree.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::Serialize;

use crate::bgl_ss::{BglSampler, BglState};
use crate::bsgl::{self, BsglState};
use crate::bsgs_ss::{draw_prior_coefficients, BsgsSampler, BsgsState};
use crate::dists::{draw_beta, draw_gamma, draw_inverse_gamma, draw_uniform, std_normal};
use crate::error::{Error, Result};
use crate::model::{BsglLambdas, GroupedCoefficients, GroupedDesign, Pi0Prior, SamplerConfig, Tuning};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentComparison {
    pub name: String,
    pub marginal_mean: f64,
    pub marginal_se: f64,
    pub successive_mean: f64,
    pub successive_se: f64,
    pub z: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GewekeReport {
    pub n_draws: usize,
    pub moments: Vec<MomentComparison>,
}

impl GewekeReport {
    pub fn max_abs_z(&self) -> f64 {
        self.moments.iter().map(|m| m.z.abs()).fold(0.0, f64::max)
    }

    pub fn passes(&self, bound: f64) -> bool {
        self.moments.iter().all(|m| m.z.abs() < bound)
    }
}

fn mean_var(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    (m, x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0))
}

/// Standard error of the mean of a correlated trace from batch means: 50
/// batches, or √n of them for short traces.
pub fn batch_means_se(trace: &[f64]) -> f64 {
    let n = trace.len();
    let n_batches = ((n as f64).sqrt() as usize).min(50);
    if n_batches < 2 {
        return f64::NAN;
    }
    let size = n / n_batches;
    let means: Vec<f64> = (0..n_batches)
        .map(|b| trace[b * size..(b + 1) * size].iter().sum::<f64>() / size as f64)
        .collect();
    (mean_var(&means).1 / n_batches as f64).sqrt()
}

/// Compares column-wise means. `marginal` rows are independent;
/// `successive` rows form a Markov chain.
pub fn compare(names: &[String], marginal: &[Vec<f64>], successive: &[Vec<f64>]) -> GewekeReport {
    let moments = names
        .iter()
        .enumerate()
        .map(|(k, name)| {
            let a: Vec<f64> = marginal.iter().map(|r| r[k]).collect();
            let b: Vec<f64> = successive.iter().map(|r| r[k]).collect();
            let (ma, va) = mean_var(&a);
            let se_a = (va / a.len() as f64).sqrt();
            let mb = b.iter().sum::<f64>() / b.len() as f64;
            let se_b = batch_means_se(&b);
            let denom = (se_a * se_a + se_b * se_b).sqrt();
            let z = if denom > 0.0 {
                (ma - mb) / denom
            } else if ma == mb {
                0.0
            } else {
                f64::INFINITY
            };
            MomentComparison {
                name: name.clone(),
                marginal_mean: ma,
                marginal_se: se_a,
                successive_mean: mb,
                successive_se: se_b,
                z,
            }
        })
        .collect();
    GewekeReport {
        n_draws: marginal.len(),
        moments,
    }
}

/// A fixed covariate matrix with its grouping.
#[derive(Debug, Clone)]
pub struct GewekeProblem {
    pub x: DMatrix<f64>,
    pub group_sizes: Vec<usize>,
}

impl GewekeProblem {
    pub fn random<R: Rng + ?Sized>(n: usize, group_sizes: Vec<usize>, rng: &mut R) -> Self {
        let p = group_sizes.iter().sum();
        Self {
            x: DMatrix::from_fn(n, p, |_, _| std_normal(rng)),
            group_sizes,
        }
    }

    fn design<R: Rng + ?Sized>(&self, beta: &[f64], sigma2: f64, rng: &mut R) -> Result<GroupedDesign> {
        let mean = &self.x * DVector::from_column_slice(beta);
        let sd = sigma2.sqrt();
        let y = DVector::from_fn(self.x.nrows(), |i, _| mean[i] + sd * std_normal(rng));
        GroupedDesign::new(y, self.x.clone(), self.group_sizes.clone())
    }
}

fn require_proper_sigma2(shape: f64, scale: f64) -> Result<()> {
    if shape > 2.0 && scale > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!(
            "the joint check needs an inverse-gamma sigma2 prior with shape > 2, got ({shape}, {scale})"
        )))
    }
}

fn bgl_moments(state: &BglState) -> Vec<f64> {
    let mut out: Vec<f64> = state.beta.values().to_vec();
    for g in 0..state.tau2.len() {
        out.push(state.beta.group_norm(g).powi(2));
    }
    out.extend(&state.tau2);
    out.push(state.sigma2);
    out.push(state.pi0);
    out
}

fn bgl_names(sizes: &[usize]) -> Vec<String> {
    let p: usize = sizes.iter().sum();
    let mut names: Vec<String> = (0..p).map(|j| format!("beta[{j}]")).collect();
    names.extend((0..sizes.len()).map(|g| format!("|beta_{g}|^2")));
    names.extend((0..sizes.len()).map(|g| format!("tau2[{g}]")));
    names.push("sigma2".into());
    names.push("pi0".into());
    names
}

fn bgl_prior_draw<R: Rng + ?Sized>(sizes: &[usize], config: &SamplerConfig, lambda: f64, rng: &mut R) -> Result<BglState> {
    let pi0 = match config.bgl.pi0 {
        Pi0Prior::Fixed { value } => value,
        Pi0Prior::Beta { a, b } => draw_beta(a, b, rng)?,
    };
    let prior = config.bgl.sigma2_prior;
    let sigma2 = draw_inverse_gamma(prior.shape, prior.scale, rng)?;
    let mut beta = GroupedCoefficients::zeros(sizes);
    let mut tau2 = Vec::with_capacity(sizes.len());
    let mut z = Vec::with_capacity(sizes.len());
    for (g, &m) in sizes.iter().enumerate() {
        let t = draw_gamma(0.5 * (m as f64 + 1.0), 0.5 * lambda * lambda, rng)?;
        tau2.push(t);
        let slab = draw_uniform(rng) >= pi0;
        z.push(slab);
        if slab {
            let sd = (sigma2 * t).sqrt();
            for j in beta.group_range(g) {
                beta.values_mut()[j] = sd * std_normal(rng);
            }
        }
    }
    Ok(BglState {
        beta,
        tau2,
        sigma2,
        pi0,
        lambda,
        z,
    })
}

/// Joint check for the group spike-and-slab lasso sampler. Requires a fixed
/// λ and an inverse-gamma σ² prior with finite variance.
pub fn geweke_bgl_ss<R: Rng + ?Sized>(
    problem: &GewekeProblem,
    config: &SamplerConfig,
    n_draws: usize,
    rng: &mut R,
) -> Result<GewekeReport> {
    let lambda = match config.bgl.lambda {
        Tuning::Fixed { value } => value,
        Tuning::Em { .. } => return Err(Error::InvalidConfig("the joint check needs a fixed lambda".into())),
    };
    let prior = config.bgl.sigma2_prior;
    require_proper_sigma2(prior.shape, prior.scale)?;
    let sizes = &problem.group_sizes;
    let mut marginal = Vec::with_capacity(n_draws);
    for _ in 0..n_draws {
        marginal.push(bgl_moments(&bgl_prior_draw(sizes, config, lambda, rng)?));
    }
    let mut state = bgl_prior_draw(sizes, config, lambda, rng)?;
    let mut design = problem.design(state.beta.values(), state.sigma2, rng)?;
    let mut successive = Vec::with_capacity(n_draws);
    for _ in 0..n_draws {
        BglSampler::new(&design, config)?.sweep(&mut state, rng)?;
        design = problem.design(state.beta.values(), state.sigma2, rng)?;
        successive.push(bgl_moments(&state));
    }
    Ok(compare(&bgl_names(sizes), &marginal, &successive))
}

/// β | σ from the prior ∝ exp(−(λ₁/σ)‖β‖₁ − (λ₂/σ)Σ‖β_g‖₂), by rejection
/// from independent Laplace proposals.
pub fn draw_bsgl_prior_beta<R: Rng + ?Sized>(
    sizes: &[usize],
    sigma: f64,
    lambda1: f64,
    lambda2: f64,
    rng: &mut R,
) -> Result<GroupedCoefficients> {
    let rate = lambda1 / sigma;
    let mut beta = GroupedCoefficients::zeros(sizes);
    loop {
        for v in beta.values_mut() {
            let e = draw_gamma(1.0, rate, rng)?;
            *v = if draw_uniform(rng) < 0.5 { e } else { -e };
        }
        let pen: f64 = (0..sizes.len()).map(|g| beta.group_norm(g)).sum();
        if draw_uniform(rng) < (-lambda2 / sigma * pen).exp() {
            return Ok(beta);
        }
    }
}

fn bsgl_moments(beta: &[f64], sigma2: f64) -> Vec<f64> {
    let mut out = beta.to_vec();
    out.extend(beta.iter().map(|b| b * b));
    out.push(sigma2);
    out
}

/// Joint check for the Bayesian sparse group lasso sampler; λ's must be fixed.
pub fn geweke_bsgl<R: Rng + ?Sized>(
    problem: &GewekeProblem,
    config: &SamplerConfig,
    n_draws: usize,
    rng: &mut R,
) -> Result<GewekeReport> {
    let (l1, l2) = match config.bsgl.lambdas {
        BsglLambdas::Fixed { lambda1_sq, lambda2_sq } => (lambda1_sq, lambda2_sq),
        BsglLambdas::Sampled { .. } => return Err(Error::InvalidConfig("the joint check needs fixed lambdas".into())),
    };
    let prior = config.bsgl.sigma2_prior;
    require_proper_sigma2(prior.shape, prior.scale)?;
    let sizes = &problem.group_sizes;
    let p: usize = sizes.iter().sum();
    let (lambda1, lambda2) = (l1.sqrt(), l2.sqrt());
    let mut marginal = Vec::with_capacity(n_draws);
    for _ in 0..n_draws {
        let sigma2 = draw_inverse_gamma(prior.shape, prior.scale, rng)?;
        let beta = draw_bsgl_prior_beta(sizes, sigma2.sqrt(), lambda1, lambda2, rng)?;
        marginal.push(bsgl_moments(beta.values(), sigma2));
    }
    let sigma2 = draw_inverse_gamma(prior.shape, prior.scale, rng)?;
    let beta = draw_bsgl_prior_beta(sizes, sigma2.sqrt(), lambda1, lambda2, rng)?;
    let mut state = BsglState::new(beta, vec![1.0; p], vec![1.0; sizes.len()], sigma2, l1, l2)?;
    // latent variances from their conditionals given the prior β
    bsgl::step_gamma2(&mut state, rng)?;
    bsgl::step_tau2_bsgl(&mut state, rng)?;
    let mut design = problem.design(state.beta.values(), state.sigma2, rng)?;
    let mut successive = Vec::with_capacity(n_draws);
    for _ in 0..n_draws {
        bsgl::sweep(&mut state, &design, config, rng)?;
        design = problem.design(state.beta.values(), state.sigma2, rng)?;
        successive.push(bsgl_moments(state.beta.values(), state.sigma2));
    }
    let mut names: Vec<String> = (0..p).map(|j| format!("beta[{j}]")).collect();
    names.extend((0..p).map(|j| format!("beta[{j}]^2")));
    names.push("sigma2".into());
    Ok(compare(&names, &marginal, &successive))
}

fn bsgs_moments(state: &BsgsState) -> Vec<f64> {
    let beta = state.beta().values();
    let mut out: Vec<f64> = beta.iter().map(|&b| (b != 0.0) as u8 as f64).collect();
    out.extend(beta.iter().map(|b| b.atan().powi(2)));
    out.extend([state.pi0, state.pi1, 1.0 / state.s2, 1.0 / state.sigma2]);
    out
}

fn bsgs_prior_draw<R: Rng + ?Sized>(sizes: &[usize], config: &SamplerConfig, t: f64, rng: &mut R) -> Result<BsgsState> {
    let h = &config.bsgs;
    let pi0 = draw_beta(h.a1, h.a2, rng)?;
    let pi1 = draw_beta(h.c1, h.c2, rng)?;
    let s2 = draw_inverse_gamma(1.0, t, rng)?;
    let sigma2 = draw_inverse_gamma(h.sigma2_prior.shape, h.sigma2_prior.scale, rng)?;
    let (b, tau) = draw_prior_coefficients(sizes, pi0, pi1, s2, rng)?;
    BsgsState::new(b, tau, sigma2, pi0, pi1, s2, t)
}

/// Joint check for the bi-level spike-and-slab sampler; t must be fixed.
pub fn geweke_bsgs_ss<R: Rng + ?Sized>(
    problem: &GewekeProblem,
    config: &SamplerConfig,
    n_draws: usize,
    rng: &mut R,
) -> Result<GewekeReport> {
    let t = match config.bsgs.t {
        Tuning::Fixed { value } => value,
        Tuning::Em { .. } => return Err(Error::InvalidConfig("the joint check needs a fixed t".into())),
    };
    let prior = config.bsgs.sigma2_prior;
    require_proper_sigma2(prior.shape, prior.scale)?;
    let sizes = &problem.group_sizes;
    let p: usize = sizes.iter().sum();
    let mut marginal = Vec::with_capacity(n_draws);
    for _ in 0..n_draws {
        marginal.push(bsgs_moments(&bsgs_prior_draw(sizes, config, t, rng)?));
    }
    let mut state = bsgs_prior_draw(sizes, config, t, rng)?;
    let mut design = problem.design(state.beta().values(), state.sigma2, rng)?;
    let mut successive = Vec::with_capacity(n_draws);
    for _ in 0..n_draws {
        BsgsSampler::new(&design, config)?.sweep(&mut state, rng)?;
        design = problem.design(state.beta().values(), state.sigma2, rng)?;
        successive.push(bsgs_moments(&state));
    }
    let mut names: Vec<String> = (0..p).map(|j| format!("beta[{j}] != 0")).collect();
    names.extend((0..p).map(|j| format!("atan(beta[{j}])^2")));
    names.extend(["pi0", "pi1", "1/s2", "1/sigma2"].map(String::from));
    Ok(compare(&names, &marginal, &successive))
}
