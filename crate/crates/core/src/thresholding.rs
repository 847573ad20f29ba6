//! Closed-form estimators for orthogonal designs (XᵀX = nI).
//!
//! Under BGL-SS with τ², σ², π₀ held fixed, the posterior of each group is
//! again a spike and slab: the slab is N((1 − B)β̂_g, σ²(1 − B)/n · I) with
//! B = 1/(1 + nτ²), and the marginal posterior median of each coefficient
//! is a soft-thresholded least-squares estimate.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::dists::{branch_probability, normal_quantile, std_normal};
use crate::error::{Error, Result};
use crate::model::{GroupedCoefficients, GroupedDesign};

#[derive(Debug, Clone, PartialEq)]
pub struct OrthogonalContext {
    n: usize,
    sigma: f64,
    tau2: Vec<f64>,
    pi0: f64,
    beta_ls: GroupedCoefficients,
}

impl OrthogonalContext {
    /// The caller asserts XᵀX = nI; only the scalar parameters are checked.
    pub fn new(n: usize, sigma: f64, tau2: Vec<f64>, pi0: f64, beta_ls: GroupedCoefficients) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("n must be positive".into()));
        }
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidParameter(format!("sigma must be positive, got {sigma}")));
        }
        if !(0.0..=1.0).contains(&pi0) {
            return Err(Error::InvalidParameter(format!("pi0 must lie in [0, 1], got {pi0}")));
        }
        if tau2.len() != beta_ls.n_groups() {
            return Err(Error::DimensionMismatch(format!(
                "{} tau2 values for {} groups",
                tau2.len(),
                beta_ls.n_groups()
            )));
        }
        if let Some(t) = tau2.iter().find(|t| !(**t > 0.0 && t.is_finite())) {
            return Err(Error::InvalidParameter(format!("tau2 must be positive, got {t}")));
        }
        if beta_ls.values().iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteInput("least-squares estimate".into()));
        }
        Ok(Self {
            n,
            sigma,
            tau2,
            pi0,
            beta_ls,
        })
    }

    /// Same slab variance for every group.
    pub fn with_common_tau2(n: usize, sigma: f64, tau2: f64, pi0: f64, beta_ls: GroupedCoefficients) -> Result<Self> {
        let g = beta_ls.n_groups();
        Self::new(n, sigma, vec![tau2; g], pi0, beta_ls)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn tau2(&self) -> &[f64] {
        &self.tau2
    }

    pub fn pi0(&self) -> f64 {
        self.pi0
    }

    pub fn beta_ls(&self) -> &GroupedCoefficients {
        &self.beta_ls
    }

    /// B_g = 1/(1 + nτ_g²).
    pub fn shrinkage_factor(&self, g: usize) -> f64 {
        1.0 / (1.0 + self.n as f64 * self.tau2[g])
    }

    /// Posterior probability that group `g` is exactly zero.
    ///
    /// # Panics
    /// If `g` is not a valid group index.
    pub fn spike_prob(&self, g: usize) -> f64 {
        let n = self.n as f64;
        let m = self.beta_ls.group_sizes()[g] as f64;
        let nt = n * self.tau2[g];
        let one_minus_b = nt / (1.0 + nt);
        let norm2 = self.beta_ls.group_norm(g).powi(2);
        let log_spike = if self.pi0 > 0.0 { self.pi0.ln() } else { f64::NEG_INFINITY };
        let log_slab = if self.pi0 < 1.0 {
            (1.0 - self.pi0).ln() - 0.5 * m * nt.ln_1p()
                + one_minus_b * n * norm2 / (2.0 * self.sigma * self.sigma)
        } else {
            f64::NEG_INFINITY
        };
        branch_probability(log_spike, log_slab)
    }

    /// Q_g = Φ⁻¹(1 / (2(1 − min(½, l_g)))); +∞ once l_g reaches ½.
    pub fn quantile_offset(&self, g: usize) -> f64 {
        let l = self.spike_prob(g).min(0.5);
        if l >= 0.5 {
            return f64::INFINITY;
        }
        normal_quantile(1.0 / (2.0 * (1.0 - l)))
    }

    /// Marginal posterior medians.
    pub fn median_threshold(&self) -> GroupedCoefficients {
        let mut out = GroupedCoefficients::zeros(self.beta_ls.group_sizes());
        let sqrt_n = (self.n as f64).sqrt();
        for g in 0..self.beta_ls.n_groups() {
            let one_minus_b = 1.0 - self.shrinkage_factor(g);
            let q = self.quantile_offset(g);
            let cut = self.sigma / sqrt_n * q * one_minus_b.sqrt();
            let range = self.beta_ls.group_range(g);
            for j in range {
                let b = self.beta_ls.values()[j];
                let mag = one_minus_b * b.abs() - cut;
                out.values_mut()[j] = if mag > 0.0 { b.signum() * mag } else { 0.0 };
            }
        }
        out
    }
}

/// Group soft-thresholding: (1 − λ_n / (n‖β̂_g‖))₊ β̂_g, with exact zero
/// at equality.
pub fn group_lasso_threshold(beta_ls: &GroupedCoefficients, n: usize, lambda_n: f64) -> Result<GroupedCoefficients> {
    if !(lambda_n >= 0.0 && lambda_n.is_finite()) {
        return Err(Error::InvalidParameter(format!("lambda_n must be non-negative, got {lambda_n}")));
    }
    if n == 0 {
        return Err(Error::InvalidParameter("n must be positive".into()));
    }
    let mut out = beta_ls.clone();
    if lambda_n == 0.0 {
        return Ok(out);
    }
    for g in 0..beta_ls.n_groups() {
        let scaled = n as f64 * beta_ls.group_norm(g);
        let factor = if scaled > lambda_n { 1.0 - lambda_n / scaled } else { 0.0 };
        for j in beta_ls.group_range(g) {
            out.values_mut()[j] *= factor;
        }
    }
    Ok(out)
}

/// Random design with XᵀX = nI (scaled orthonormal columns from a QR
/// factorisation) and response `Xβ + σε`.
pub fn orthogonal_design<R: Rng + ?Sized>(
    n: usize,
    group_sizes: &[usize],
    beta: &[f64],
    sigma: f64,
    rng: &mut R,
) -> Result<GroupedDesign> {
    let p: usize = group_sizes.iter().sum();
    if p > n {
        return Err(Error::InsufficientData(format!("orthogonal design needs n >= p, got n={n}, p={p}")));
    }
    if beta.len() != p {
        return Err(Error::DimensionMismatch(format!("beta has {} entries, expected {p}", beta.len())));
    }
    let z = DMatrix::from_fn(n, p, |_, _| std_normal(rng));
    let q = z.qr().q();
    let x = q * (n as f64).sqrt();
    let y = &x * DVector::from_column_slice(beta) + DVector::from_fn(n, |_, _| sigma * std_normal(rng));
    GroupedDesign::new(y, x, group_sizes.to_vec())
}

/// β̂ = Xᵀy / n for an orthogonal design.
pub fn orthogonal_least_squares(design: &GroupedDesign) -> GroupedCoefficients {
    let b = design.x().tr_mul(design.y()) / design.n() as f64;
    GroupedCoefficients::new(b.as_slice().to_vec(), design.group_sizes().to_vec())
        .expect("sizes come from a valid design")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bgl_ss::{beta_group_conditional, BglState};
    use crate::dists::{draw_uniform, RngStream};
    use proptest::prelude::*;

    fn coefs(v: &[f64], sizes: &[usize]) -> GroupedCoefficients {
        GroupedCoefficients::new(v.to_vec(), sizes.to_vec()).unwrap()
    }

    #[test]
    fn zero_prior_weight_gives_zero_spike() {
        let c = OrthogonalContext::with_common_tau2(10, 1.0, 1.0, 0.0, coefs(&[0.1, 0.2], &[2])).unwrap();
        assert_eq!(c.spike_prob(0), 0.0);
        let c = OrthogonalContext::with_common_tau2(10, 1.0, 1.0, 1.0, coefs(&[0.1, 0.2], &[2])).unwrap();
        assert_eq!(c.spike_prob(0), 1.0);
    }

    #[test]
    fn null_estimate_spike_prob() {
        // nτ² = 99, m = 2: l = 0.5/(0.5 + 0.5/100) = 100/101
        let c = OrthogonalContext::with_common_tau2(99, 1.0, 1.0, 0.5, coefs(&[0.0, 0.0], &[2])).unwrap();
        assert!((c.spike_prob(0) - 100.0 / 101.0).abs() < 1e-15);
    }

    #[test]
    fn spike_half_or_more_zeroes_group() {
        let c = OrthogonalContext::with_common_tau2(99, 1.0, 1.0, 0.5, coefs(&[0.01, -0.02, 3.0], &[2, 1])).unwrap();
        assert!(c.spike_prob(0) >= 0.5);
        assert_eq!(c.quantile_offset(0), f64::INFINITY);
        let med = c.median_threshold();
        assert_eq!(&med.values()[..2], &[0.0, 0.0]);
        assert!(med.values()[2] > 0.0);
    }

    #[test]
    fn identity_when_no_spike_and_no_shrinkage() {
        // B → 0 needs nτ² huge; π₀ = 0 makes l = 0 and Q = 0.
        let b = coefs(&[1.5, -0.7, 0.2], &[2, 1]);
        let c = OrthogonalContext::with_common_tau2(10, 1.0, 1e300, 0.0, b.clone()).unwrap();
        assert_eq!(c.quantile_offset(0), 0.0);
        let med = c.median_threshold();
        for (a, e) in med.values().iter().zip(b.values()) {
            assert!((a - e).abs() < 1e-12);
        }
    }

    #[test]
    fn invalid_context_rejected() {
        let b = coefs(&[1.0], &[1]);
        assert!(OrthogonalContext::with_common_tau2(10, 0.0, 1.0, 0.5, b.clone()).is_err());
        assert!(OrthogonalContext::with_common_tau2(10, 1.0, -1.0, 0.5, b.clone()).is_err());
        assert!(OrthogonalContext::with_common_tau2(10, 1.0, 1.0, 1.5, b.clone()).is_err());
        assert!(OrthogonalContext::new(10, 1.0, vec![1.0, 1.0], 0.5, b).is_err());
    }

    #[test]
    fn group_lasso_examples() {
        let b = coefs(&[3.0, 4.0], &[2]);
        assert_eq!(group_lasso_threshold(&b, 10, 0.0).unwrap(), b);
        let out = group_lasso_threshold(&b, 10, 5.0).unwrap();
        assert!((out.values()[0] - 2.7).abs() < 1e-15);
        assert!((out.values()[1] - 3.6).abs() < 1e-15);
        let out = group_lasso_threshold(&b, 10, 50.0).unwrap();
        assert_eq!(out.values(), &[0.0, 0.0]);
        assert!(group_lasso_threshold(&b, 10, -1.0).is_err());
    }

    #[test]
    fn matches_gibbs_conditional_on_orthogonal_design() {
        let mut rng = RngStream::new(5, 0);
        let sizes = [2, 3, 1];
        let d = orthogonal_design(40, &sizes, &[1.0, 0.0, 0.5, -0.5, 0.2, 0.0], 1.0, &mut rng).unwrap();
        let xtx = d.x().tr_mul(d.x());
        assert!((xtx - DMatrix::identity(6, 6) * 40.0).abs().max() < 1e-9);
        let ls = orthogonal_least_squares(&d);
        let (sigma2, tau2, pi0): (f64, f64, f64) = (1.7, 0.08, 0.4);
        let ctx = OrthogonalContext::with_common_tau2(40, sigma2.sqrt(), tau2, pi0, ls).unwrap();
        let state = BglState {
            beta: GroupedCoefficients::zeros(&sizes),
            tau2: vec![tau2; 3],
            sigma2,
            pi0,
            lambda: 1.0,
            z: vec![false; 3],
        };
        for g in 0..3 {
            let gibbs = beta_group_conditional(g, &state, &d).unwrap().spike_prob;
            assert!((gibbs - ctx.spike_prob(g)).abs() < 1e-8, "group {g}");
        }
    }

    #[test]
    fn median_matches_mixture_simulation() {
        // n = 100, σ = 1, τ² = 1, π₀ = ½, m = 1, β̂ = 0.3
        let c = OrthogonalContext::with_common_tau2(100, 1.0, 1.0, 0.5, coefs(&[0.3], &[1])).unwrap();
        let l = c.spike_prob(0);
        let one_minus_b = 1.0 - c.shrinkage_factor(0);
        let mean = one_minus_b * 0.3;
        let sd = (one_minus_b / 100.0).sqrt();
        let mut rng = RngStream::new(77, 0);
        let draws = 200_000;
        let mut v: Vec<f64> = (0..draws)
            .map(|_| if draw_uniform(&mut rng) < l { 0.0 } else { mean + sd * std_normal(&mut rng) })
            .collect();
        v.sort_by(f64::total_cmp);
        let sim = crate::chain::median_sorted(&v);
        let want = c.median_threshold().values()[0];
        // MC error of a sample median: 1/(2 f(m) √N), with f the slab density
        // weight at the median.
        let z = (want - mean) / sd;
        let dens = (1.0 - l) * (-0.5 * z * z).exp() / (sd * (2.0 * std::f64::consts::PI).sqrt());
        let se = 1.0 / (2.0 * dens * (draws as f64).sqrt());
        assert!(want > 0.0);
        assert!((sim - want).abs() < 3.0 * se, "{sim} vs {want} (se {se})");
    }

    #[test]
    fn zero_region_contains_origin() {
        let n = 50;
        let mut zero_flags = Vec::new();
        for k in 0..=400 {
            let r = k as f64 * 0.005;
            let b = coefs(&[r * 0.6, r * 0.8], &[2]);
            let c = OrthogonalContext::with_common_tau2(n, 1.0, 1.0, 0.7, b).unwrap();
            zero_flags.push(c.median_threshold().values().iter().all(|&v| v == 0.0));
        }
        assert!(zero_flags[0]);
        let first_nonzero = zero_flags.iter().position(|z| !z).expect("large estimates survive");
        assert!(first_nonzero > 0);
        assert!(zero_flags[first_nonzero..].iter().all(|z| !z));
    }

    proptest! {
        #[test]
        fn median_is_shrinkage(
            vals in proptest::collection::vec(-5.0f64..5.0, 1..6),
            n in 1usize..500,
            sigma in 0.1f64..4.0,
            tau2 in 1e-3f64..10.0,
            pi0 in 0.0f64..=1.0,
        ) {
            let p = vals.len();
            let c = OrthogonalContext::with_common_tau2(n, sigma, tau2, pi0, coefs(&vals, &[p])).unwrap();
            let med = c.median_threshold();
            for (m, b) in med.values().iter().zip(&vals) {
                prop_assert!(m.abs() <= b.abs());
                prop_assert!(*m == 0.0 || m.signum() == b.signum());
            }
            let l = c.spike_prob(0);
            prop_assert!((0.0..=1.0).contains(&l));
        }

        #[test]
        fn group_lasso_zero_iff_below_threshold(
            vals in proptest::collection::vec(-5.0f64..5.0, 1..6),
            n in 1usize..100,
            lambda in 0.0f64..200.0,
        ) {
            let p = vals.len();
            let b = coefs(&vals, &[p]);
            let out = group_lasso_threshold(&b, n, lambda).unwrap();
            let zero = out.values().iter().all(|&v| v == 0.0);
            let below = n as f64 * b.group_norm(0) <= lambda;
            prop_assert_eq!(zero, below || vals.iter().all(|&v| v == 0.0));
        }
    }
}
