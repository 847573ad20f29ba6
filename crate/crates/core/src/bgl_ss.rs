//! Bayesian group lasso with a group-level spike-and-slab prior.
//!
//! Hierarchy, for each group g with m_g coefficients:
//!
//! ```text
//! β_g | σ², τ_g² ~ (1 − π₀) N(0, σ² τ_g² I) + π₀ δ₀
//! τ_g²           ~ Gamma(shape (m_g + 1)/2, rate λ²/2)
//! σ²             ~ InvGamma(α, γ)        (α = γ = 0: improper 1/σ²)
//! π₀             ~ Beta(a, b)            (or held fixed)
//! ```
//!
//! The sampler is a systematic scan over β_1..β_G, τ², σ², π₀. λ is either
//! fixed or tuned beforehand by Monte Carlo EM.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::chain::{summarize, ChainDraws, PosteriorSummary};
use crate::dists::{
    branch_probability, draw_beta, draw_from_precision_factor, draw_gamma, draw_inverse_gamma,
    draw_inverse_gaussian, draw_uniform, RngStream,
};
use crate::error::{Error, Result};
use crate::linalg::{chol_solve, cholesky_lower, half_log_det, residual, ridge_estimate, GroupBlocks};
use crate::model::{GroupedCoefficients, GroupedDesign, Pi0Prior, SamplerConfig, Tuning};

/// Blocks whose norm falls below this are treated as exactly zero in the
/// τ² update.
const NORM_FLOOR: f64 = 1e-300;

#[derive(Debug, Clone, PartialEq)]
pub struct BglState {
    pub beta: GroupedCoefficients,
    /// τ_g², one per group.
    pub tau2: Vec<f64>,
    pub sigma2: f64,
    pub pi0: f64,
    pub lambda: f64,
    /// Z_g: true when group g is nonzero.
    pub z: Vec<bool>,
}

impl BglState {
    /// Deterministic start: ridge β, τ² = 1, σ² from the ridge residuals,
    /// π₀ = ½ (or the fixed value).
    pub fn initial(design: &GroupedDesign, config: &SamplerConfig, lambda: f64) -> Result<Self> {
        let ridge = ridge_estimate(design, 1.0)?;
        let beta = GroupedCoefficients::new(ridge.as_slice().to_vec(), design.group_sizes().to_vec())?;
        let r = residual(design, beta.values());
        let mut sigma2 = r.norm_squared() / design.n() as f64;
        if !(sigma2 > 1e-12) {
            sigma2 = 1.0;
        }
        if let Some(s) = config.fixed_sigma2 {
            sigma2 = s;
        }
        let tau2 = config
            .bgl
            .fixed_tau2
            .clone()
            .unwrap_or_else(|| vec![1.0; design.n_groups()]);
        if tau2.len() != design.n_groups() {
            return Err(Error::InvalidConfig(format!(
                "{} fixed tau2 values for {} groups",
                tau2.len(),
                design.n_groups()
            )));
        }
        let pi0 = match config.bgl.pi0 {
            Pi0Prior::Fixed { value } => value,
            Pi0Prior::Beta { .. } => 0.5,
        };
        let z = (0..design.n_groups()).map(|g| beta.group_norm(g) != 0.0).collect();
        Ok(Self {
            beta,
            tau2,
            sigma2,
            pi0,
            lambda,
            z,
        })
    }

    /// Σ_g m_g Z_g.
    pub fn active_coefficients(&self) -> usize {
        self.z
            .iter()
            .zip(self.beta.group_sizes())
            .filter(|(&z, _)| z)
            .map(|(_, &m)| m)
            .sum()
    }

    /// βᵀ D_τ⁻¹ β; zero groups contribute nothing.
    pub fn penalty_quadratic(&self) -> f64 {
        (0..self.tau2.len())
            .filter(|&g| self.z[g])
            .map(|g| self.beta.group_norm(g).powi(2) / self.tau2[g])
            .sum()
    }
}

/// Full conditional of β_g: `l δ₀ + (1 − l) N(μ, σ² Σ)` with
/// `Σ = (X_gᵀX_g + τ_g⁻² I)⁻¹`.
#[derive(Debug, Clone)]
pub struct GroupConditional {
    pub spike_prob: f64,
    pub mean: DVector<f64>,
    /// Lower Cholesky factor of Σ⁻¹.
    pub precision_factor: DMatrix<f64>,
    pub log_spike_weight: f64,
    pub log_slab_weight: f64,
}

impl GroupConditional {
    pub fn covariance(&self) -> DMatrix<f64> {
        let m = self.mean.len();
        let l = &self.precision_factor;
        let mut out = DMatrix::zeros(m, m);
        for j in 0..m {
            let mut e = DVector::zeros(m);
            e[j] = 1.0;
            out.set_column(j, &chol_solve(l, &e));
        }
        out
    }
}

/// Everything the conditional needs, so callers can pass a cached Gram
/// matrix and partial residual.
pub(crate) fn group_conditional_from_parts(
    gram: &DMatrix<f64>,
    xtr: &DVector<f64>,
    tau2: f64,
    sigma2: f64,
    pi0: f64,
    group: usize,
) -> Result<GroupConditional> {
    let m = gram.nrows();
    let mut a = gram.clone();
    for i in 0..m {
        a[(i, i)] += 1.0 / tau2;
    }
    let l = cholesky_lower(a).map_err(|_| Error::SingularCovariance(group))?;
    let mean = chol_solve(&l, xtr);
    let quad = xtr.dot(&mean);
    let log_spike = if pi0 > 0.0 { pi0.ln() } else { f64::NEG_INFINITY };
    let log_slab = if pi0 < 1.0 {
        (1.0 - pi0).ln() - 0.5 * m as f64 * tau2.ln() - half_log_det(&l) + quad / (2.0 * sigma2)
    } else {
        f64::NEG_INFINITY
    };
    Ok(GroupConditional {
        spike_prob: branch_probability(log_spike, log_slab),
        mean,
        precision_factor: l,
        log_spike_weight: log_spike,
        log_slab_weight: log_slab,
    })
}

/// Conditional of β_g given the rest, computed from the residual that
/// excludes group g.
pub fn beta_group_conditional(
    g: usize,
    state: &BglState,
    design: &GroupedDesign,
) -> Result<GroupConditional> {
    if g >= design.n_groups() {
        return Err(Error::IndexOutOfRange {
            index: g,
            len: design.n_groups(),
        });
    }
    let xg = design.group_columns(g);
    let mut r = residual(design, state.beta.values());
    let bg = DVector::from_column_slice(state.beta.group_view(g)?);
    r += &xg * bg;
    let xtr = xg.tr_mul(&r);
    group_conditional_from_parts(&xg.tr_mul(&xg), &xtr, state.tau2[g], state.sigma2, state.pi0, g)
}

/// Gibbs sweeps for one design; caches group blocks.
pub struct BglSampler<'a> {
    design: &'a GroupedDesign,
    config: &'a SamplerConfig,
    blocks: GroupBlocks,
}

impl<'a> BglSampler<'a> {
    pub fn new(design: &'a GroupedDesign, config: &'a SamplerConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            design,
            config,
            blocks: GroupBlocks::new(design),
        })
    }

    pub fn design(&self) -> &GroupedDesign {
        self.design
    }

    /// Redraws every β_g in order, refreshing the residual after each group.
    pub fn step_beta<R: Rng + ?Sized>(&self, state: &mut BglState, rng: &mut R) -> Result<()> {
        let mut r = residual(self.design, state.beta.values());
        for g in 0..self.design.n_groups() {
            let range = self.design.group_range(g);
            let xg = &self.blocks.columns[g];
            let old = DVector::from_column_slice(&state.beta.values()[range.clone()]);
            if state.z[g] {
                r += xg * &old;
            }
            let xtr = xg.tr_mul(&r);
            let cond = group_conditional_from_parts(
                &self.blocks.grams[g],
                &xtr,
                state.tau2[g],
                state.sigma2,
                state.pi0,
                g,
            )?;
            let u = draw_uniform(rng);
            let vals = &mut state.beta.values_mut()[range];
            if u < cond.spike_prob {
                vals.iter_mut().for_each(|v| *v = 0.0);
                state.z[g] = false;
            } else {
                let draw = draw_from_precision_factor(
                    &cond.mean,
                    &cond.precision_factor,
                    state.sigma2.sqrt(),
                    rng,
                );
                vals.copy_from_slice(draw.as_slice());
                state.z[g] = draw.iter().any(|&v| v != 0.0);
                r -= xg * draw;
            }
        }
        Ok(())
    }

    pub fn step_tau2<R: Rng + ?Sized>(&self, state: &mut BglState, rng: &mut R) -> Result<()> {
        step_tau2(state, self.config, rng)
    }

    pub fn step_sigma2<R: Rng + ?Sized>(&self, state: &mut BglState, rng: &mut R) -> Result<()> {
        if let Some(s) = self.config.fixed_sigma2 {
            state.sigma2 = s;
            return Ok(());
        }
        let prior = self.config.bgl.sigma2_prior;
        let rss = residual(self.design, state.beta.values()).norm_squared();
        let shape = 0.5 * self.design.n() as f64 + 0.5 * state.active_coefficients() as f64 + prior.shape;
        let scale = 0.5 * (rss + state.penalty_quadratic()) + prior.scale;
        state.sigma2 = draw_inverse_gamma(shape, scale, rng)?;
        Ok(())
    }

    pub fn step_pi0<R: Rng + ?Sized>(&self, state: &mut BglState, rng: &mut R) -> Result<()> {
        step_pi0(state, self.config.bgl.pi0, rng)
    }

    /// One systematic-scan sweep.
    pub fn sweep<R: Rng + ?Sized>(&self, state: &mut BglState, rng: &mut R) -> Result<()> {
        self.step_beta(state, rng)?;
        self.step_tau2(state, rng)?;
        self.step_sigma2(state, rng)?;
        self.step_pi0(state, rng)
    }
}

/// Updates τ_g² through α_g² = 1/τ_g²: inverse-gamma (shape (m+1)/2,
/// scale λ²/2) for zero groups, i.e. τ_g² ~ Gamma(shape (m+1)/2, rate λ²/2),
/// and inverse-Gaussian(λσ/‖β_g‖, λ²) otherwise.
pub fn step_tau2<R: Rng + ?Sized>(state: &mut BglState, config: &SamplerConfig, rng: &mut R) -> Result<()> {
    if let Some(fixed) = &config.bgl.fixed_tau2 {
        state.tau2.copy_from_slice(fixed);
        return Ok(());
    }
    let lambda = state.lambda;
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidParameter(format!("lambda must be positive, got {lambda}")));
    }
    let lambda2 = lambda * lambda;
    let sigma = state.sigma2.sqrt();
    for g in 0..state.tau2.len() {
        let m = state.beta.group_sizes()[g] as f64;
        let norm = state.beta.group_norm(g);
        state.tau2[g] = if state.z[g] && norm > NORM_FLOOR {
            let mean = lambda * sigma / norm;
            if mean.is_finite() {
                1.0 / draw_inverse_gaussian(mean, lambda2, rng)?
            } else {
                draw_gamma(0.5 * (m + 1.0), 0.5 * lambda2, rng)?
            }
        } else {
            draw_gamma(0.5 * (m + 1.0), 0.5 * lambda2, rng)?
        };
    }
    Ok(())
}

/// π₀ | rest ~ Beta(a + #zero groups, b + #nonzero groups).
pub fn step_pi0<R: Rng + ?Sized>(state: &mut BglState, prior: Pi0Prior, rng: &mut R) -> Result<()> {
    match prior {
        Pi0Prior::Fixed { value } => state.pi0 = value,
        Pi0Prior::Beta { a, b } => {
            let (a_post, b_post) = pi0_posterior_params(&state.z, a, b);
            state.pi0 = draw_beta(a_post, b_post, rng)?;
        }
    }
    Ok(())
}

/// Beta parameters of the π₀ update for the given group flags.
pub fn pi0_posterior_params(z: &[bool], a: f64, b: f64) -> (f64, f64) {
    let nonzero = z.iter().filter(|&&f| f).count();
    let zero = z.len() - nonzero;
    (a + zero as f64, b + nonzero as f64)
}

/// One EM update: λ = sqrt((p + G) / Σ_g E[τ_g² | Y]).
pub fn em_update_lambda(p: usize, n_groups: usize, sum_expected_tau2: f64) -> Result<f64> {
    if !(sum_expected_tau2 > 0.0 && sum_expected_tau2.is_finite()) {
        return Err(Error::DegenerateEstimate(format!(
            "sum of E[tau2] is {sum_expected_tau2}"
        )));
    }
    Ok(((p + n_groups) as f64 / sum_expected_tau2).sqrt())
}

/// Result of a Monte Carlo EM run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmEstimate {
    pub value: f64,
    /// Estimate after each round, starting with the initial value.
    pub trajectory: Vec<f64>,
}

impl EmEstimate {
    /// Largest relative change over the last `rounds` updates.
    pub fn recent_relative_change(&self, rounds: usize) -> f64 {
        let t = &self.trajectory;
        let start = t.len().saturating_sub(rounds + 1);
        t[start..]
            .windows(2)
            .map(|w| ((w[1] - w[0]) / w[0]).abs())
            .fold(0.0, f64::max)
    }
}

/// Tunes λ by Monte Carlo EM, each round averaging τ² over
/// `em_inner_iters` sweeps of a chain that carries over between rounds.
pub fn mc_em_lambda<R: Rng + ?Sized>(
    design: &GroupedDesign,
    config: &SamplerConfig,
    rng: &mut R,
) -> Result<EmEstimate> {
    let initial = match config.bgl.lambda {
        Tuning::Em { initial } => initial,
        Tuning::Fixed { value } => value,
    };
    if config.em_rounds == 0 {
        return Err(Error::InvalidConfig("em_rounds must be at least 1".into()));
    }
    let sampler = BglSampler::new(design, config)?;
    let mut state = BglState::initial(design, config, initial)?;
    let mut trajectory = vec![initial];
    for _ in 0..config.em_rounds {
        let mut acc = 0.0;
        for _ in 0..config.em_inner_iters {
            sampler.sweep(&mut state, rng)?;
            acc += state.tau2.iter().sum::<f64>();
        }
        let lambda = em_update_lambda(design.p(), design.n_groups(), acc / config.em_inner_iters as f64)?;
        state.lambda = lambda;
        trajectory.push(lambda);
    }
    Ok(EmEstimate {
        value: *trajectory.last().unwrap(),
        trajectory,
    })
}

/// Runs the chain at fixed λ and stores all post burn-in draws.
pub fn run_bgl_ss<R: Rng + ?Sized>(
    design: &GroupedDesign,
    config: &SamplerConfig,
    lambda: f64,
    rng: &mut R,
) -> Result<ChainDraws> {
    let sampler = BglSampler::new(design, config)?;
    let mut state = BglState::initial(design, config, lambda)?;
    let mut draws = ChainDraws::new(design.group_sizes(), config.n_stored(), true);
    for it in 0..config.n_iter {
        sampler.sweep(&mut state, rng)?;
        if it >= config.n_burn {
            draws.push(state.beta.values(), state.sigma2);
            draws.push_trace("tau2", &state.tau2);
            draws.push_scalar("pi0", state.pi0);
        }
    }
    Ok(draws)
}

#[derive(Debug, Clone)]
pub struct BglFit {
    pub lambda: EmEstimate,
    pub draws: ChainDraws,
    pub summary: PosteriorSummary,
}

/// λ tuning (if configured) followed by the main chain.
pub fn fit_bgl_ss(design: &GroupedDesign, config: &SamplerConfig, rng: &mut RngStream) -> Result<BglFit> {
    config.validate()?;
    let lambda = match config.bgl.lambda {
        Tuning::Fixed { value } => EmEstimate {
            value,
            trajectory: vec![value],
        },
        Tuning::Em { .. } => mc_em_lambda(design, config, rng)?,
    };
    let draws = run_bgl_ss(design, config, lambda.value, rng)?;
    let summary = summarize(&draws)?;
    Ok(BglFit {
        lambda,
        draws,
        summary,
    })
}
