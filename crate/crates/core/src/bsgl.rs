//! Bayesian sparse group lasso.
//!
//! The sparse-group-lasso penalty is written as a scale mixture of normals
//! with one variance per coefficient and one per group:
//!
//! ```text
//! β | τ², γ², σ² ~ N(0, σ² V),   V_gj = (1/τ_gj² + 1/γ_g²)⁻¹
//! ```
//!
//! The λ hyperpriors absorb the mixing normaliser, leaving the conditionals
//! λ₁² ~ Gamma(p + 1, Στ²/2 + d₁) and λ₂² ~ Gamma(G/2 + 1, Σγ²/2 + d₂).
//!
//! The posterior is continuous, so draws never contain exact zeros.

use log::debug;
use nalgebra::DVector;
use rand::Rng;

use crate::chain::{summarize, ChainDraws, PosteriorSummary};
use crate::dists::{draw_from_precision_factor, draw_gamma, draw_inverse_gamma, draw_inverse_gaussian, RngStream};
use crate::error::{Error, Result};
use crate::linalg::{chol_solve, cholesky_lower, residual, ridge_estimate};
use crate::model::{BsglLambdas, GroupedCoefficients, GroupedDesign, SamplerConfig};

/// Magnitudes below this use the limiting Gamma draw instead of an
/// inverse-Gaussian with an unbounded mean.
pub const ZERO_GUARD: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct BsglState {
    pub beta: GroupedCoefficients,
    /// τ_gj², one per coefficient.
    pub tau2: Vec<f64>,
    /// γ_g², one per group.
    pub gamma2: Vec<f64>,
    pub sigma2: f64,
    pub lambda1_sq: f64,
    pub lambda2_sq: f64,
    v: Vec<f64>,
}

impl BsglState {
    pub fn new(
        beta: GroupedCoefficients,
        tau2: Vec<f64>,
        gamma2: Vec<f64>,
        sigma2: f64,
        lambda1_sq: f64,
        lambda2_sq: f64,
    ) -> Result<Self> {
        if tau2.len() != beta.len() || gamma2.len() != beta.n_groups() {
            return Err(Error::DimensionMismatch("variance vectors do not match coefficients".into()));
        }
        let mut s = Self {
            beta,
            tau2,
            gamma2,
            sigma2,
            lambda1_sq,
            lambda2_sq,
            v: Vec::new(),
        };
        s.refresh_v();
        Ok(s)
    }

    /// Ridge β, unit variances, σ² from the ridge residuals, unit λ's (or
    /// the fixed values).
    pub fn initial(design: &GroupedDesign, config: &SamplerConfig) -> Result<Self> {
        let ridge = ridge_estimate(design, 1.0)?;
        let beta = GroupedCoefficients::new(ridge.as_slice().to_vec(), design.group_sizes().to_vec())?;
        let mut sigma2 = residual(design, beta.values()).norm_squared() / design.n() as f64;
        if !(sigma2 > 1e-12) {
            sigma2 = 1.0;
        }
        if let Some(s) = config.fixed_sigma2 {
            sigma2 = s;
        }
        let (l1, l2) = match config.bsgl.lambdas {
            BsglLambdas::Fixed { lambda1_sq, lambda2_sq } => (lambda1_sq, lambda2_sq),
            BsglLambdas::Sampled { .. } => (1.0, 1.0),
        };
        Self::new(beta, vec![1.0; design.p()], vec![1.0; design.n_groups()], sigma2, l1, l2)
    }

    /// Diagonal of V.
    pub fn v(&self) -> &[f64] {
        &self.v
    }

    fn refresh_v(&mut self) {
        let sizes = self.beta.group_sizes().to_vec();
        self.v.clear();
        let mut j = 0;
        for (g, &m) in sizes.iter().enumerate() {
            for _ in 0..m {
                self.v.push(1.0 / (1.0 / self.tau2[j] + 1.0 / self.gamma2[g]));
                j += 1;
            }
        }
    }

    /// βᵀV⁻¹β.
    pub fn penalty_quadratic(&self) -> f64 {
        self.beta.values().iter().zip(&self.v).map(|(b, v)| b * b / v).sum()
    }
}

/// Mean and lower precision factor of β | rest: N(A⁻¹Xᵀy, σ²A⁻¹), A = XᵀX + V⁻¹.
pub fn beta_conditional(state: &BsglState, design: &GroupedDesign) -> Result<(DVector<f64>, nalgebra::DMatrix<f64>)> {
    let x = design.x();
    let mut a = x.tr_mul(x);
    for (j, v) in state.v.iter().enumerate() {
        a[(j, j)] += 1.0 / v;
    }
    let l = cholesky_lower(a)?;
    let mean = chol_solve(&l, &x.tr_mul(design.y()));
    Ok((mean, l))
}

pub fn step_beta_full<R: Rng + ?Sized>(state: &mut BsglState, design: &GroupedDesign, rng: &mut R) -> Result<()> {
    let (mean, l) = beta_conditional(state, design)?;
    let draw = draw_from_precision_factor(&mean, &l, state.sigma2.sqrt(), rng);
    state.beta.values_mut().copy_from_slice(draw.as_slice());
    Ok(())
}

/// Draws a variance w whose reciprocal is InvGaussian(σλ/a, λ²); for
/// a below the guard the limit w ~ Gamma(½, rate λ²/2) is used.
fn draw_mixing_variance<R: Rng + ?Sized>(magnitude: f64, sigma: f64, lambda_sq: f64, rng: &mut R) -> Result<f64> {
    if magnitude < ZERO_GUARD {
        debug!("coefficient magnitude {magnitude:e} below guard; using limiting gamma draw");
        return draw_gamma(0.5, 0.5 * lambda_sq, rng);
    }
    let mean = sigma * lambda_sq.sqrt() / magnitude;
    Ok(1.0 / draw_inverse_gaussian(mean, lambda_sq, rng)?)
}

fn require_lambda(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")))
    }
}

pub fn step_gamma2<R: Rng + ?Sized>(state: &mut BsglState, rng: &mut R) -> Result<()> {
    require_lambda("lambda2", state.lambda2_sq)?;
    let sigma = state.sigma2.sqrt();
    for g in 0..state.gamma2.len() {
        state.gamma2[g] = draw_mixing_variance(state.beta.group_norm(g), sigma, state.lambda2_sq, rng)?;
    }
    state.refresh_v();
    Ok(())
}

pub fn step_tau2_bsgl<R: Rng + ?Sized>(state: &mut BsglState, rng: &mut R) -> Result<()> {
    require_lambda("lambda1", state.lambda1_sq)?;
    let sigma = state.sigma2.sqrt();
    for j in 0..state.tau2.len() {
        state.tau2[j] = draw_mixing_variance(state.beta.values()[j].abs(), sigma, state.lambda1_sq, rng)?;
    }
    state.refresh_v();
    Ok(())
}

pub fn step_sigma2_bsgl<R: Rng + ?Sized>(
    state: &mut BsglState,
    design: &GroupedDesign,
    config: &SamplerConfig,
    rng: &mut R,
) -> Result<()> {
    if let Some(s) = config.fixed_sigma2 {
        state.sigma2 = s;
        return Ok(());
    }
    let prior = config.bsgl.sigma2_prior;
    let rss = residual(design, state.beta.values()).norm_squared();
    let shape = 0.5 * (design.n() + design.p()) as f64 + prior.shape;
    let scale = 0.5 * rss + 0.5 * state.penalty_quadratic() + prior.scale;
    state.sigma2 = draw_inverse_gamma(shape, scale, rng)?;
    Ok(())
}

/// Gamma parameters (shape, rate) of the λ₁² and λ₂² updates.
pub fn lambda_posterior_params(state: &BsglState, d1: f64, d2: f64) -> Result<((f64, f64), (f64, f64))> {
    if !(d1 > 0.0 && d2 > 0.0) {
        return Err(Error::InvalidParameter(format!("d1 and d2 must be positive, got {d1}, {d2}")));
    }
    let p = state.tau2.len() as f64;
    let g = state.gamma2.len() as f64;
    let sum_tau2: f64 = state.tau2.iter().sum();
    let sum_gamma2: f64 = state.gamma2.iter().sum();
    Ok(((p + 1.0, 0.5 * sum_tau2 + d1), (0.5 * g + 1.0, 0.5 * sum_gamma2 + d2)))
}

pub fn step_lambdas<R: Rng + ?Sized>(state: &mut BsglState, lambdas: BsglLambdas, rng: &mut R) -> Result<()> {
    match lambdas {
        BsglLambdas::Fixed { lambda1_sq, lambda2_sq } => {
            state.lambda1_sq = lambda1_sq;
            state.lambda2_sq = lambda2_sq;
        }
        BsglLambdas::Sampled { d1, d2 } => {
            let ((s1, r1), (s2, r2)) = lambda_posterior_params(state, d1, d2)?;
            state.lambda1_sq = draw_gamma(s1, r1, rng)?;
            state.lambda2_sq = draw_gamma(s2, r2, rng)?;
        }
    }
    Ok(())
}

/// One sweep in the order β, γ², τ², σ², λ².
pub fn sweep<R: Rng + ?Sized>(
    state: &mut BsglState,
    design: &GroupedDesign,
    config: &SamplerConfig,
    rng: &mut R,
) -> Result<()> {
    step_beta_full(state, design, rng)?;
    step_gamma2(state, rng)?;
    step_tau2_bsgl(state, rng)?;
    step_sigma2_bsgl(state, design, config, rng)?;
    step_lambdas(state, config.bsgl.lambdas, rng)
}

pub fn run_bsgl<R: Rng + ?Sized>(design: &GroupedDesign, config: &SamplerConfig, rng: &mut R) -> Result<ChainDraws> {
    config.validate()?;
    let mut state = BsglState::initial(design, config)?;
    let mut draws = ChainDraws::new(design.group_sizes(), config.n_stored(), false);
    for it in 0..config.n_iter {
        sweep(&mut state, design, config, rng)?;
        if it >= config.n_burn {
            draws.push(state.beta.values(), state.sigma2);
            draws.push_scalar("lambda1_sq", state.lambda1_sq);
            draws.push_scalar("lambda2_sq", state.lambda2_sq);
        }
    }
    Ok(draws)
}

#[derive(Debug, Clone)]
pub struct BsglFit {
    pub draws: ChainDraws,
    pub summary: PosteriorSummary,
}

pub fn fit_bsgl(design: &GroupedDesign, config: &SamplerConfig, rng: &mut RngStream) -> Result<BsglFit> {
    let draws = run_bsgl(design, config, rng)?;
    let summary = summarize(&draws)?;
    Ok(BsglFit { draws, summary })
}
