//! Bi-level spike-and-slab sparse group selection.
//!
//! Coefficients are written β_g = diag(τ_g) b_g with
//!
//! ```text
//! b_g   ~ (1 − π₀) N(0, I) + π₀ δ₀
//! τ_gj  ~ (1 − π₁) N⁺(0, s²) + π₁ δ₀
//! s²    ~ InvGamma(1, t)
//! σ²    ~ InvGamma(α, γ),  π₀ ~ Beta(a₁, a₂),  π₁ ~ Beta(c₁, c₂)
//! ```
//!
//! so a whole group drops out when b_g = 0 and single coefficients drop out
//! when τ_gj = 0. t is fixed or tuned by Monte Carlo EM.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::bgl_ss::EmEstimate;
use crate::chain::{summarize, ChainDraws, PosteriorSummary};
use crate::dists::{
    branch_probability, draw_beta, draw_from_precision_factor, draw_inverse_gamma,
    draw_truncated_normal_positive, draw_uniform, normal_ln_cdf, std_normal, RngStream,
};
use crate::error::{Error, Result};
use crate::linalg::{chol_solve, cholesky_lower, half_log_det, residual, sample_variance, GroupBlocks};
use crate::model::{BsgsHyper, GroupedCoefficients, GroupedDesign, SamplerConfig, Tuning};

#[derive(Debug, Clone, PartialEq)]
pub struct BsgsState {
    pub b: GroupedCoefficients,
    /// τ_gj ≥ 0 on the standard-deviation scale.
    pub tau: Vec<f64>,
    pub sigma2: f64,
    pub pi0: f64,
    pub pi1: f64,
    pub s2: f64,
    pub t: f64,
    beta: GroupedCoefficients,
}

impl BsgsState {
    pub fn new(b: GroupedCoefficients, tau: Vec<f64>, sigma2: f64, pi0: f64, pi1: f64, s2: f64, t: f64) -> Result<Self> {
        if tau.len() != b.len() {
            return Err(Error::DimensionMismatch(format!("{} tau values for {} coefficients", tau.len(), b.len())));
        }
        if tau.iter().any(|&v| !(v >= 0.0)) {
            return Err(Error::InvalidParameter("tau must be non-negative".into()));
        }
        let beta = b.clone();
        let mut s = Self {
            b,
            tau,
            sigma2,
            pi0,
            pi1,
            s2,
            t,
            beta,
        };
        s.refresh_beta();
        Ok(s)
    }

    /// Dispersed start: b ~ N(0, I), τ ~ |N(0, 1)|, σ² = var(y),
    /// π₀ = π₁ = ½, s² = 1.
    pub fn initial<R: Rng + ?Sized>(design: &GroupedDesign, config: &SamplerConfig, t: f64, rng: &mut R) -> Result<Self> {
        let p = design.p();
        let b: Vec<f64> = (0..p).map(|_| std_normal(rng)).collect();
        let tau: Vec<f64> = (0..p).map(|_| std_normal(rng).abs()).collect();
        let mut sigma2 = sample_variance(design.y());
        if !(sigma2 > 1e-12) {
            sigma2 = 1.0;
        }
        if let Some(s) = config.fixed_sigma2 {
            sigma2 = s;
        }
        let b = GroupedCoefficients::new(b, design.group_sizes().to_vec())?;
        Self::new(b, tau, sigma2, 0.5, 0.5, 1.0, t)
    }

    /// β = τ ∘ b.
    pub fn beta(&self) -> &GroupedCoefficients {
        &self.beta
    }

    fn refresh_beta(&mut self) {
        let vals: Vec<f64> = self.b.values().iter().zip(&self.tau).map(|(b, t)| b * t).collect();
        self.beta.values_mut().copy_from_slice(&vals);
    }

    /// Groups whose latent b_g is exactly zero.
    pub fn group_zero_flags(&self) -> Vec<bool> {
        (0..self.b.n_groups()).map(|g| self.b.group_norm(g) == 0.0).collect()
    }
}

/// Conditional of b_g: `l δ₀ + (1 − l) N(μ, Σ)`.
#[derive(Debug, Clone)]
pub struct BConditional {
    pub spike_prob: f64,
    pub mean: DVector<f64>,
    /// Lower Cholesky factor of Σ⁻¹ = I + σ⁻² V^{1/2} XᵀX V^{1/2}.
    pub precision_factor: DMatrix<f64>,
}

impl BConditional {
    pub fn covariance(&self) -> DMatrix<f64> {
        let m = self.mean.len();
        let mut out = DMatrix::zeros(m, m);
        for j in 0..m {
            let mut e = DVector::zeros(m);
            e[j] = 1.0;
            out.set_column(j, &chol_solve(&self.precision_factor, &e));
        }
        out
    }
}

fn b_conditional_from_parts(
    gram: &DMatrix<f64>,
    xtr: &DVector<f64>,
    tau: &[f64],
    sigma2: f64,
    pi0: f64,
) -> Result<BConditional> {
    let m = tau.len();
    let mut a = DMatrix::identity(m, m);
    for i in 0..m {
        for k in 0..m {
            a[(i, k)] += tau[i] * gram[(i, k)] * tau[k] / sigma2;
        }
    }
    let c = DVector::from_fn(m, |i, _| tau[i] * xtr[i] / sigma2);
    let l = cholesky_lower(a)?;
    let mean = chol_solve(&l, &c);
    let log_spike = if pi0 > 0.0 { pi0.ln() } else { f64::NEG_INFINITY };
    let log_slab = if pi0 < 1.0 {
        (1.0 - pi0).ln() - half_log_det(&l) + 0.5 * c.dot(&mean)
    } else {
        f64::NEG_INFINITY
    };
    Ok(BConditional {
        spike_prob: branch_probability(log_spike, log_slab),
        mean,
        precision_factor: l,
    })
}

fn check_group(g: usize, design: &GroupedDesign) -> Result<()> {
    if g >= design.n_groups() {
        return Err(Error::IndexOutOfRange {
            index: g,
            len: design.n_groups(),
        });
    }
    Ok(())
}

pub fn b_group_conditional(g: usize, state: &BsgsState, design: &GroupedDesign) -> Result<BConditional> {
    check_group(g, design)?;
    let xg = design.group_columns(g);
    let range = design.group_range(g);
    let mut r = residual(design, state.beta.values());
    r += &xg * DVector::from_column_slice(&state.beta.values()[range.clone()]);
    b_conditional_from_parts(&xg.tr_mul(&xg), &xg.tr_mul(&r), &state.tau[range], state.sigma2, state.pi0)
}

/// Conditional of τ_gj: `q δ₀ + (1 − q) N⁺(u, v²)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TauConditional {
    pub spike_prob: f64,
    pub location: f64,
    pub variance: f64,
}

fn tau_conditional_from_parts(xtx: f64, xtr: f64, b: f64, sigma2: f64, s2: f64, pi1: f64) -> TauConditional {
    let v2 = 1.0 / (1.0 / s2 + xtx * b * b / sigma2);
    let u = v2 * xtr * b / sigma2;
    let log_spike = if pi1 > 0.0 { pi1.ln() } else { f64::NEG_INFINITY };
    let log_slab = if pi1 < 1.0 {
        let sd = v2.sqrt();
        (1.0 - pi1).ln() + std::f64::consts::LN_2 - 0.5 * s2.ln() + 0.5 * v2.ln()
            + u * u / (2.0 * v2)
            + normal_ln_cdf(u / sd)
    } else {
        f64::NEG_INFINITY
    };
    TauConditional {
        spike_prob: branch_probability(log_spike, log_slab),
        location: u,
        variance: v2,
    }
}

/// Conditional of τ for coefficient `j` (0-based global index).
pub fn tau_conditional(j: usize, state: &BsgsState, design: &GroupedDesign) -> Result<TauConditional> {
    if j >= design.p() {
        return Err(Error::IndexOutOfRange { index: j, len: design.p() });
    }
    let x = design.x().column(j);
    let mut r = residual(design, state.beta.values());
    r += x * state.beta.values()[j];
    Ok(tau_conditional_from_parts(
        x.norm_squared(),
        x.dot(&r),
        state.b.values()[j],
        state.sigma2,
        state.s2,
        state.pi1,
    ))
}

pub struct BsgsSampler<'a> {
    design: &'a GroupedDesign,
    config: &'a SamplerConfig,
    blocks: GroupBlocks,
}

impl<'a> BsgsSampler<'a> {
    pub fn new(design: &'a GroupedDesign, config: &'a SamplerConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            design,
            config,
            blocks: GroupBlocks::new(design),
        })
    }

    fn hyper(&self) -> &BsgsHyper {
        &self.config.bsgs
    }

    pub fn step_b<R: Rng + ?Sized>(&self, state: &mut BsgsState, rng: &mut R) -> Result<()> {
        let mut r = residual(self.design, state.beta.values());
        for g in 0..self.design.n_groups() {
            let range = self.design.group_range(g);
            let xg = &self.blocks.columns[g];
            let old = DVector::from_column_slice(&state.beta.values()[range.clone()]);
            r += xg * &old;
            let cond = b_conditional_from_parts(
                &self.blocks.grams[g],
                &xg.tr_mul(&r),
                &state.tau[range.clone()],
                state.sigma2,
                state.pi0,
            )?;
            let new_b = if draw_uniform(rng) < cond.spike_prob {
                DVector::zeros(range.len())
            } else {
                draw_from_precision_factor(&cond.mean, &cond.precision_factor, 1.0, rng)
            };
            let mut beta_g = DVector::zeros(range.len());
            for (k, j) in range.clone().enumerate() {
                state.b.values_mut()[j] = new_b[k];
                beta_g[k] = new_b[k] * state.tau[j];
                state.beta.values_mut()[j] = beta_g[k];
            }
            r -= xg * beta_g;
        }
        Ok(())
    }

    /// Coordinate-wise τ updates, refreshing the residual after each one.
    pub fn step_tau<R: Rng + ?Sized>(&self, state: &mut BsgsState, rng: &mut R) -> Result<()> {
        let mut r = residual(self.design, state.beta.values());
        for g in 0..self.design.n_groups() {
            let range = self.design.group_range(g);
            let start = range.start;
            for j in range {
                let x = self.blocks.columns[g].column(j - start);
                let xtx = self.blocks.grams[g][(j - start, j - start)];
                r.axpy(state.beta.values()[j], &x, 1.0);
                let cond = tau_conditional_from_parts(
                    xtx,
                    x.dot(&r),
                    state.b.values()[j],
                    state.sigma2,
                    state.s2,
                    state.pi1,
                );
                state.tau[j] = if draw_uniform(rng) < cond.spike_prob {
                    0.0
                } else {
                    draw_truncated_normal_positive(cond.location, cond.variance.sqrt(), rng)?
                };
                let beta_j = state.tau[j] * state.b.values()[j];
                state.beta.values_mut()[j] = beta_j;
                r.axpy(-beta_j, &x, 1.0);
            }
        }
        Ok(())
    }

    pub fn step_sigma2<R: Rng + ?Sized>(&self, state: &mut BsgsState, rng: &mut R) -> Result<()> {
        if let Some(s) = self.config.fixed_sigma2 {
            state.sigma2 = s;
            return Ok(());
        }
        let prior = self.hyper().sigma2_prior;
        let rss = residual(self.design, state.beta.values()).norm_squared();
        state.sigma2 = draw_inverse_gamma(0.5 * self.design.n() as f64 + prior.shape, 0.5 * rss + prior.scale, rng)?;
        Ok(())
    }

    pub fn step_pi<R: Rng + ?Sized>(&self, state: &mut BsgsState, rng: &mut R) -> Result<()> {
        step_pi(state, self.hyper(), rng)
    }

    pub fn step_s2<R: Rng + ?Sized>(&self, state: &mut BsgsState, rng: &mut R) -> Result<()> {
        step_s2(state, rng)
    }

    /// Sweep order: b groups, τ coordinates, σ², π₀ and π₁, s².
    pub fn sweep<R: Rng + ?Sized>(&self, state: &mut BsgsState, rng: &mut R) -> Result<()> {
        self.step_b(state, rng)?;
        self.step_tau(state, rng)?;
        self.step_sigma2(state, rng)?;
        self.step_pi(state, rng)?;
        self.step_s2(state, rng)
    }
}

/// Beta parameters ((π₀), (π₁)) given the current zero counts.
pub fn pi_posterior_params(state: &BsgsState, hyper: &BsgsHyper) -> ((f64, f64), (f64, f64)) {
    let g = state.b.n_groups();
    let b_zero = state.group_zero_flags().iter().filter(|&&z| z).count();
    let p = state.tau.len();
    let tau_zero = state.tau.iter().filter(|&&t| t == 0.0).count();
    (
        (b_zero as f64 + hyper.a1, (g - b_zero) as f64 + hyper.a2),
        (tau_zero as f64 + hyper.c1, (p - tau_zero) as f64 + hyper.c2),
    )
}

pub fn step_pi<R: Rng + ?Sized>(state: &mut BsgsState, hyper: &BsgsHyper, rng: &mut R) -> Result<()> {
    let ((a, b), (c, d)) = pi_posterior_params(state, hyper);
    state.pi0 = draw_beta(a, b, rng)?;
    state.pi1 = draw_beta(c, d, rng)?;
    Ok(())
}

/// InvGamma parameters of s² | rest: (1 + ½#(τ ≠ 0), t + ½Στ²).
pub fn s2_posterior_params(state: &BsgsState) -> Result<(f64, f64)> {
    if !(state.t > 0.0 && state.t.is_finite()) {
        return Err(Error::InvalidParameter(format!("t must be positive, got {}", state.t)));
    }
    let nonzero = state.tau.iter().filter(|&&t| t != 0.0).count();
    let sum_sq: f64 = state.tau.iter().map(|t| t * t).sum();
    Ok((1.0 + 0.5 * nonzero as f64, state.t + 0.5 * sum_sq))
}

pub fn step_s2<R: Rng + ?Sized>(state: &mut BsgsState, rng: &mut R) -> Result<()> {
    let (shape, scale) = s2_posterior_params(state)?;
    state.s2 = draw_inverse_gamma(shape, scale, rng)?;
    Ok(())
}

/// t = 1 / E[1/s²].
pub fn em_update_t(expected_inv_s2: f64) -> Result<f64> {
    if !(expected_inv_s2 > 0.0 && expected_inv_s2.is_finite()) {
        return Err(Error::DegenerateEstimate(format!("E[1/s2] is {expected_inv_s2}")));
    }
    Ok(1.0 / expected_inv_s2)
}

fn initial_t(config: &SamplerConfig) -> f64 {
    match config.bsgs.t {
        Tuning::Em { initial } => initial,
        Tuning::Fixed { value } => value,
    }
}

pub fn mc_em_t<R: Rng + ?Sized>(design: &GroupedDesign, config: &SamplerConfig, rng: &mut R) -> Result<EmEstimate> {
    if config.em_rounds == 0 {
        return Err(Error::InvalidConfig("em_rounds must be at least 1".into()));
    }
    let sampler = BsgsSampler::new(design, config)?;
    let t0 = initial_t(config);
    let mut state = BsgsState::initial(design, config, t0, rng)?;
    let mut trajectory = vec![t0];
    for _ in 0..config.em_rounds {
        let mut acc = 0.0;
        for _ in 0..config.em_inner_iters {
            sampler.sweep(&mut state, rng)?;
            acc += 1.0 / state.s2;
        }
        state.t = em_update_t(acc / config.em_inner_iters as f64)?;
        trajectory.push(state.t);
    }
    Ok(EmEstimate {
        value: state.t,
        trajectory,
    })
}

pub fn run_bsgs_ss<R: Rng + ?Sized>(design: &GroupedDesign, config: &SamplerConfig, t: f64, rng: &mut R) -> Result<ChainDraws> {
    let sampler = BsgsSampler::new(design, config)?;
    let mut state = BsgsState::initial(design, config, t, rng)?;
    let mut draws = ChainDraws::new(design.group_sizes(), config.n_stored(), true);
    for it in 0..config.n_iter {
        sampler.sweep(&mut state, rng)?;
        if it >= config.n_burn {
            draws.push(state.beta.values(), state.sigma2);
            draws.push_scalar("pi0", state.pi0);
            draws.push_scalar("pi1", state.pi1);
            draws.push_scalar("s2", state.s2);
        }
    }
    Ok(draws)
}

#[derive(Debug, Clone)]
pub struct BsgsFit {
    pub t: EmEstimate,
    pub draws: ChainDraws,
    pub summary: PosteriorSummary,
}

pub fn fit_bsgs_ss(design: &GroupedDesign, config: &SamplerConfig, rng: &mut RngStream) -> Result<BsgsFit> {
    config.validate()?;
    let t = match config.bsgs.t {
        Tuning::Fixed { value } => EmEstimate {
            value,
            trajectory: vec![value],
        },
        Tuning::Em { .. } => mc_em_t(design, config, rng)?,
    };
    let draws = run_bsgs_ss(design, config, t.value, rng)?;
    let summary = summarize(&draws)?;
    Ok(BsgsFit { t, draws, summary })
}

/// One draw of (b, τ) from the prior given π₀, π₁ and s².
pub fn draw_prior_coefficients<R: Rng + ?Sized>(
    group_sizes: &[usize],
    pi0: f64,
    pi1: f64,
    s2: f64,
    rng: &mut R,
) -> Result<(GroupedCoefficients, Vec<f64>)> {
    let mut b = GroupedCoefficients::zeros(group_sizes);
    let mut tau = vec![0.0; b.len()];
    for g in 0..group_sizes.len() {
        let slab = draw_uniform(rng) >= pi0;
        for j in b.group_range(g) {
            if slab {
                b.values_mut()[j] = std_normal(rng);
            }
        }
    }
    let s = s2.sqrt();
    for t in tau.iter_mut() {
        if draw_uniform(rng) >= pi1 {
            *t = draw_truncated_normal_positive(0.0, s, rng)?;
        }
    }
    Ok((b, tau))
}
