//! Grouped regression problems, coefficient containers and sampler configuration.

use std::ops::Range;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Response, covariates and a contiguous partition of the columns into groups.
///
/// Immutable once built; group offsets are computed at construction.
#[derive(Debug, Clone)]
pub struct GroupedDesign {
    y: DVector<f64>,
    x: DMatrix<f64>,
    group_sizes: Vec<usize>,
    offsets: Vec<usize>,
}

fn offsets_of(group_sizes: &[usize]) -> Vec<usize> {
    let mut offsets = Vec::with_capacity(group_sizes.len() + 1);
    offsets.push(0);
    for &m in group_sizes {
        offsets.push(offsets.last().unwrap() + m);
    }
    offsets
}

fn check_sizes(group_sizes: &[usize]) -> Result<()> {
    if group_sizes.is_empty() {
        return Err(Error::DimensionMismatch("at least one group is required".into()));
    }
    if let Some(g) = group_sizes.iter().position(|&m| m == 0) {
        return Err(Error::DimensionMismatch(format!("group {g} has size 0")));
    }
    Ok(())
}

impl GroupedDesign {
    pub fn new(y: DVector<f64>, x: DMatrix<f64>, group_sizes: Vec<usize>) -> Result<Self> {
        check_sizes(&group_sizes)?;
        if y.is_empty() {
            return Err(Error::DimensionMismatch("response has no observations".into()));
        }
        if y.len() != x.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "response has {} rows but covariates have {}",
                y.len(),
                x.nrows()
            )));
        }
        let p: usize = group_sizes.iter().sum();
        if p != x.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "group sizes sum to {p} but covariates have {} columns",
                x.ncols()
            )));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteInput("response".into()));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteInput("covariates".into()));
        }
        let offsets = offsets_of(&group_sizes);
        Ok(Self {
            y,
            x,
            group_sizes,
            offsets,
        })
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn group_sizes(&self) -> &[usize] {
        &self.group_sizes
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn n_groups(&self) -> usize {
        self.group_sizes.len()
    }

    /// Column range owned by group `g` (0-based).
    pub fn group_range(&self, g: usize) -> Range<usize> {
        self.offsets[g]..self.offsets[g + 1]
    }

    /// Covariate columns of group `g` as an owned `n × m_g` matrix.
    pub fn group_columns(&self, g: usize) -> DMatrix<f64> {
        let r = self.group_range(g);
        self.x.columns(r.start, r.len()).into_owned()
    }

    /// Same covariates and groups with a different response.
    pub fn with_response(&self, y: DVector<f64>) -> Result<Self> {
        Self::new(y, self.x.clone(), self.group_sizes.clone())
    }

    /// Row subset, used for cross-validation folds.
    pub fn select_rows(&self, rows: &[usize]) -> Result<Self> {
        let y = DVector::from_iterator(rows.len(), rows.iter().map(|&i| self.y[i]));
        let x = self.x.select_rows(rows.iter());
        Self::new(y, x, self.group_sizes.clone())
    }
}

/// Convenience constructor mirroring [`GroupedDesign::new`] on plain slices.
///
/// `x` is row-major with `y.len()` rows.
pub fn make_design(y: &[f64], x: &[Vec<f64>], group_sizes: &[usize]) -> Result<GroupedDesign> {
    let n = y.len();
    if x.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "response has {n} rows but covariates have {}",
            x.len()
        )));
    }
    let p = x.first().map_or(0, Vec::len);
    if let Some(i) = x.iter().position(|row| row.len() != p) {
        return Err(Error::DimensionMismatch(format!("row {i} is ragged")));
    }
    let xm = DMatrix::from_fn(n, p, |i, j| x[i][j]);
    GroupedDesign::new(DVector::from_column_slice(y), xm, group_sizes.to_vec())
}

/// Coefficient vector together with its group partition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupedCoefficients {
    values: Vec<f64>,
    group_sizes: Vec<usize>,
    #[serde(skip)]
    offsets: Vec<usize>,
}

impl GroupedCoefficients {
    pub fn new(values: Vec<f64>, group_sizes: Vec<usize>) -> Result<Self> {
        check_sizes(&group_sizes)?;
        let p: usize = group_sizes.iter().sum();
        if p != values.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} coefficients for groups summing to {p}",
                values.len()
            )));
        }
        let offsets = offsets_of(&group_sizes);
        Ok(Self {
            values,
            group_sizes,
            offsets,
        })
    }

    pub fn zeros(group_sizes: &[usize]) -> Self {
        let p = group_sizes.iter().sum();
        Self {
            values: vec![0.0; p],
            group_sizes: group_sizes.to_vec(),
            offsets: offsets_of(group_sizes),
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn group_sizes(&self) -> &[usize] {
        &self.group_sizes
    }

    pub fn n_groups(&self) -> usize {
        self.group_sizes.len()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn group_range(&self, g: usize) -> Range<usize> {
        if self.offsets.len() != self.group_sizes.len() + 1 {
            // deserialized values skip the offsets
            let offsets = offsets_of(&self.group_sizes);
            return offsets[g]..offsets[g + 1];
        }
        self.offsets[g]..self.offsets[g + 1]
    }

    /// Read-only slice of group `g` (0-based).
    pub fn group_view(&self, g: usize) -> Result<&[f64]> {
        if g >= self.group_sizes.len() {
            return Err(Error::IndexOutOfRange {
                index: g,
                len: self.group_sizes.len(),
            });
        }
        Ok(&self.values[self.group_range(g)])
    }

    pub fn group_norm(&self, g: usize) -> f64 {
        self.values[self.group_range(g)]
            .iter()
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }

    pub fn to_dvector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.values)
    }

    /// Zero/nonzero pattern, using exact comparison with 0.0.
    pub fn selection(&self) -> SelectionPattern {
        selection_of(self)
    }
}

/// Group-level and coefficient-level inclusion flags.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SelectionPattern {
    pub group_included: Vec<bool>,
    pub coef_included: Vec<bool>,
}

impl SelectionPattern {
    /// Builds a pattern from coefficient flags; a group is included when any
    /// of its members is.
    pub fn from_coef_flags(coef_included: Vec<bool>, group_sizes: &[usize]) -> Self {
        let mut group_included = Vec::with_capacity(group_sizes.len());
        let mut start = 0;
        for &m in group_sizes {
            group_included.push(coef_included[start..start + m].iter().any(|&f| f));
            start += m;
        }
        Self {
            group_included,
            coef_included,
        }
    }

    /// Every coefficient of an included group is included.
    pub fn from_group_flags(group_included: Vec<bool>, group_sizes: &[usize]) -> Self {
        let coef_included = group_included
            .iter()
            .zip(group_sizes)
            .flat_map(|(&f, &m)| std::iter::repeat_n(f, m))
            .collect();
        Self {
            group_included,
            coef_included,
        }
    }

    pub fn n_groups_included(&self) -> usize {
        self.group_included.iter().filter(|&&f| f).count()
    }

    pub fn n_coefs_included(&self) -> usize {
        self.coef_included.iter().filter(|&&f| f).count()
    }

    /// Compact "1010" rendering of the coefficient flags.
    pub fn coef_key(&self) -> String {
        self.coef_included
            .iter()
            .map(|&f| if f { '1' } else { '0' })
            .collect()
    }
}

pub fn selection_of(beta: &GroupedCoefficients) -> SelectionPattern {
    let coef_included = beta.values().iter().map(|&v| v != 0.0).collect();
    SelectionPattern::from_coef_flags(coef_included, beta.group_sizes())
}

/// Prior on the BGL-SS spike weight.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Pi0Prior {
    Beta { a: f64, b: f64 },
    Fixed { value: f64 },
}

/// How a penalty-type hyperparameter (λ for BGL-SS, t for BSGS-SS) is set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Tuning {
    /// Monte Carlo EM starting from `initial`.
    Em { initial: f64 },
    Fixed { value: f64 },
}

/// Inverse-gamma prior on σ² (shape, scale). `shape = scale = 0` is the
/// improper prior 1/σ².
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InvGammaPrior {
    pub shape: f64,
    pub scale: f64,
}

impl InvGammaPrior {
    pub const IMPROPER: Self = Self {
        shape: 0.0,
        scale: 0.0,
    };
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BglHyper {
    pub pi0: Pi0Prior,
    pub lambda: Tuning,
    pub sigma2_prior: InvGammaPrior,
    /// Holds τ_g² at these values instead of sampling them.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixed_tau2: Option<Vec<f64>>,
}

impl Default for BglHyper {
    fn default() -> Self {
        Self {
            pi0: Pi0Prior::Beta { a: 1.0, b: 1.0 },
            lambda: Tuning::Em { initial: 1.0 },
            sigma2_prior: InvGammaPrior::IMPROPER,
            fixed_tau2: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BsgsHyper {
    pub a1: f64,
    pub a2: f64,
    pub c1: f64,
    pub c2: f64,
    /// Inverse-gamma (α, γ) prior on σ².
    pub sigma2_prior: InvGammaPrior,
    pub t: Tuning,
}

impl Default for BsgsHyper {
    fn default() -> Self {
        Self {
            a1: 1.0,
            a2: 1.0,
            c1: 1.0,
            c2: 1.0,
            sigma2_prior: InvGammaPrior {
                shape: 0.1,
                scale: 0.1,
            },
            t: Tuning::Em { initial: 1.0 },
        }
    }
}

/// λ₁², λ₂² handling for BSGL.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BsglLambdas {
    /// Gamma hyperprior with rates d1, d2.
    Sampled { d1: f64, d2: f64 },
    Fixed { lambda1_sq: f64, lambda2_sq: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BsglHyper {
    pub lambdas: BsglLambdas,
    pub sigma2_prior: InvGammaPrior,
}

impl Default for BsglHyper {
    fn default() -> Self {
        Self {
            lambdas: BsglLambdas::Sampled { d1: 0.1, d2: 0.1 },
            sigma2_prior: InvGammaPrior::IMPROPER,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub n_iter: usize,
    pub n_burn: usize,
    pub seed: u64,
    pub em_rounds: usize,
    pub em_inner_iters: usize,
    /// Holds σ² fixed at this value in every sampler.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixed_sigma2: Option<f64>,
    pub bgl: BglHyper,
    pub bsgs: BsgsHyper,
    pub bsgl: BsglHyper,
}

pub const DEFAULT_SEED: u64 = 20_150_101;

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            n_iter: 10_000,
            n_burn: 5_000,
            seed: DEFAULT_SEED,
            em_rounds: 20,
            em_inner_iters: 1_000,
            fixed_sigma2: None,
            bgl: BglHyper::default(),
            bsgs: BsgsHyper::default(),
            bsgl: BsglHyper::default(),
        }
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!("{name} must be positive, got {v}")))
    }
}

fn check_ig(name: &str, prior: InvGammaPrior) -> Result<()> {
    let ok = |v: f64| v >= 0.0 && v.is_finite();
    if ok(prior.shape) && ok(prior.scale) {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!("{name} prior parameters must be non-negative")))
    }
}

fn check_tuning(name: &str, t: Tuning) -> Result<()> {
    match t {
        Tuning::Em { initial } => positive(name, initial),
        Tuning::Fixed { value } => positive(name, value),
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_iter == 0 {
            return Err(Error::InvalidConfig("n_iter must be positive".into()));
        }
        if self.n_burn >= self.n_iter {
            return Err(Error::InvalidConfig(format!(
                "n_burn ({}) must be smaller than n_iter ({})",
                self.n_burn, self.n_iter
            )));
        }
        if self.em_inner_iters == 0 {
            return Err(Error::InvalidConfig("em_inner_iters must be positive".into()));
        }
        if let Some(s) = self.fixed_sigma2 {
            positive("fixed sigma2", s)?;
        }
        match self.bgl.pi0 {
            Pi0Prior::Beta { a, b } => {
                positive("a", a)?;
                positive("b", b)?;
            }
            Pi0Prior::Fixed { value } => {
                if !(0.0..=1.0).contains(&value) {
                    return Err(Error::InvalidConfig(format!("pi0 must lie in [0, 1], got {value}")));
                }
            }
        }
        check_tuning("lambda", self.bgl.lambda)?;
        check_ig("sigma2", self.bgl.sigma2_prior)?;
        if let Some(t) = &self.bgl.fixed_tau2 {
            for &v in t {
                positive("fixed tau2", v)?;
            }
        }
        let s = &self.bsgs;
        for (name, v) in [("a1", s.a1), ("a2", s.a2), ("c1", s.c1), ("c2", s.c2)] {
            positive(name, v)?;
        }
        check_ig("sigma2", s.sigma2_prior)?;
        check_tuning("t", s.t)?;
        match self.bsgl.lambdas {
            BsglLambdas::Sampled { d1, d2 } => {
                positive("d1", d1)?;
                positive("d2", d2)?;
            }
            BsglLambdas::Fixed {
                lambda1_sq,
                lambda2_sq,
            } => {
                positive("lambda1_sq", lambda1_sq)?;
                positive("lambda2_sq", lambda2_sq)?;
            }
        }
        check_ig("sigma2", self.bsgl.sigma2_prior)?;
        Ok(())
    }

    pub fn n_stored(&self) -> usize {
        self.n_iter.saturating_sub(self.n_burn)
    }
}

/// Column means and standard deviations estimated on training data.
#[derive(Debug, Clone)]
pub struct Standardizer {
    pub means: Vec<f64>,
    pub sds: Vec<f64>,
    pub y_mean: f64,
}

impl Standardizer {
    /// Fits on `design`; constant columns keep sd 1 so they map to zero.
    pub fn fit(design: &GroupedDesign) -> Self {
        let n = design.n() as f64;
        let x = design.x();
        let mut means = Vec::with_capacity(design.p());
        let mut sds = Vec::with_capacity(design.p());
        for col in x.column_iter() {
            let mean = col.sum() / n;
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
            means.push(mean);
            sds.push(if var > 0.0 { var.sqrt() } else { 1.0 });
        }
        let y_mean = design.y().sum() / n;
        Self { means, sds, y_mean }
    }

    pub fn transform_x(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| {
            (x[(i, j)] - self.means[j]) / self.sds[j]
        })
    }

    /// Standardized covariates and centered response.
    pub fn transform(&self, design: &GroupedDesign) -> Result<GroupedDesign> {
        let y = design.y().map(|v| v - self.y_mean);
        GroupedDesign::new(y, self.transform_x(design.x()), design.group_sizes().to_vec())
    }

    /// Prediction on the original response scale for raw covariates.
    pub fn predict(&self, x_raw: &DMatrix<f64>, beta_std: &[f64]) -> DVector<f64> {
        let xs = self.transform_x(x_raw);
        let b = DVector::from_column_slice(beta_std);
        (xs * b).add_scalar(self.y_mean)
    }
}
