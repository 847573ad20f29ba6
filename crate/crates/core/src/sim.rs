//! Simulation examples, evaluation metrics and the replication runner.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bgl_ss::fit_bgl_ss;
use crate::bsgl::fit_bsgl;
use crate::bsgs_ss::fit_bsgs_ss;
use crate::chain::{median_sorted, ChainDraws, PosteriorSummary};
use crate::dists::{normal_quantile, std_normal, RngStream};
use crate::error::{Error, Result};
use crate::freq::{fit_cv, fit_ols, fit_sgl_cv, CvResult, PenalizedMethod};
use crate::model::{
    selection_of, GroupedCoefficients, GroupedDesign, Pi0Prior, SamplerConfig, SelectionPattern, Standardizer,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "bgl-ss")]
    BglSs,
    #[serde(rename = "bsgl")]
    Bsgl,
    #[serde(rename = "bsgs-ss")]
    BsgsSs,
    #[serde(rename = "gl")]
    GroupLasso,
    #[serde(rename = "sgl")]
    SparseGroupLasso,
    #[serde(rename = "ols")]
    Ols,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::BglSs,
        Method::Bsgl,
        Method::BsgsSs,
        Method::GroupLasso,
        Method::SparseGroupLasso,
        Method::Ols,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Method::BglSs => "bgl-ss",
            Method::Bsgl => "bsgl",
            Method::BsgsSs => "bsgs-ss",
            Method::GroupLasso => "gl",
            Method::SparseGroupLasso => "sgl",
            Method::Ols => "ols",
        }
    }

    fn index(&self) -> u64 {
        Method::ALL.iter().position(|m| m == self).expect("listed") as u64
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .iter()
            .find(|m| m.name() == s)
            .copied()
            .ok_or_else(|| Error::InvalidConfig(format!("unknown method '{s}'")))
    }
}

/// How covariates are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum CovariateRecipe {
    /// Equicorrelated Gaussian with the given pairwise correlation.
    CompoundSymmetric { rho: f64 },
    /// X_gj = z_g + z_gj.
    SharedGroupFactor,
    /// X_i = (Z_i + W)/√2, cubic expansions of the first half and
    /// three-level indicators of the second half.
    PolynomialAndFactors { n_poly: usize, n_factor: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExampleSpec {
    pub id: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub beta: GroupedCoefficients,
    pub sigma: f64,
    pub recipe: CovariateRecipe,
}

fn blocks_of(parts: &[&[f64]]) -> (Vec<f64>, Vec<usize>) {
    let sizes = parts.iter().map(|p| p.len()).collect();
    (parts.concat(), sizes)
}

impl ExampleSpec {
    pub fn new(id: usize) -> Result<Self> {
        let z5 = [0.0; 5];
        let z10 = [0.0; 10];
        let (values, sizes, n_train, n_test, sigma, recipe) = match id {
            1 => {
                let (v, s) = blocks_of(&[&[0.3, -1.0, 0.0, 0.5, 0.01], &z5, &[0.8; 5], &z5]);
                (v, s, 60, 40, 3.0, CovariateRecipe::CompoundSymmetric { rho: 0.5 })
            }
            2 => {
                let mut parts: Vec<&[f64]> = vec![&[1.0, 2.0, 3.0, 4.0, 5.0], &z5, &[0.1, 0.2, 0.3, 0.4, 0.5]];
                parts.extend(std::iter::repeat_n(&z5 as &[f64], 13));
                let (v, s) = blocks_of(&parts);
                (v, s, 40, 20, 2.0, CovariateRecipe::SharedGroupFactor)
            }
            3 => {
                let (v, s) = blocks_of(&[&z10, &[2.0; 10], &z10, &[2.0; 10]]);
                (v, s, 60, 40, 2.0, CovariateRecipe::SharedGroupFactor)
            }
            4 => {
                let half = [2.0, 2.0, 2.0, 2.0, 2.0, 0.0, 0.0, 0.0, 0.0, 0.0];
                let (v, s) = blocks_of(&[&z10, &half, &z10, &half]);
                (v, s, 60, 40, 2.0, CovariateRecipe::SharedGroupFactor)
            }
            5 => {
                let mut parts: Vec<&[f64]> = Vec::new();
                let cubic_3 = [1.0, 1.0, 1.0];
                let cubic_6 = [2.0 / 3.0, -1.0, 1.0 / 3.0];
                let z3 = [0.0; 3];
                let z2 = [0.0; 2];
                for k in 1..=10 {
                    parts.push(match k {
                        3 => &cubic_3,
                        6 => &cubic_6,
                        _ => &z3,
                    });
                }
                let factor_11 = [2.0, 1.0];
                for k in 11..=20 {
                    parts.push(if k == 11 { &factor_11 } else { &z2 });
                }
                let (v, s) = blocks_of(&parts);
                (
                    v,
                    s,
                    100,
                    100,
                    2.0,
                    CovariateRecipe::PolynomialAndFactors {
                        n_poly: 10,
                        n_factor: 10,
                    },
                )
            }
            other => return Err(Error::UnknownExample(other)),
        };
        Ok(Self {
            id,
            n_train,
            n_test,
            beta: GroupedCoefficients::new(values, sizes)?,
            sigma,
            recipe,
        })
    }

    pub fn with_sigma(mut self, sigma: f64) -> Self {
        self.sigma = sigma;
        self
    }

    pub fn group_sizes(&self) -> &[usize] {
        self.beta.group_sizes()
    }

    pub fn p(&self) -> usize {
        self.beta.len()
    }

    pub fn truth(&self) -> SelectionPattern {
        selection_of(&self.beta)
    }

    /// Covariate matrix with `n` rows.
    pub fn draw_covariates<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> DMatrix<f64> {
        let p = self.p();
        match self.recipe {
            CovariateRecipe::CompoundSymmetric { rho } => {
                let (a, b) = (rho.sqrt(), (1.0 - rho).sqrt());
                let mut x = DMatrix::zeros(n, p);
                for i in 0..n {
                    let z0 = std_normal(rng);
                    for j in 0..p {
                        x[(i, j)] = a * z0 + b * std_normal(rng);
                    }
                }
                x
            }
            CovariateRecipe::SharedGroupFactor => {
                let sizes = self.group_sizes().to_vec();
                let mut x = DMatrix::zeros(n, p);
                for i in 0..n {
                    let mut j = 0;
                    for &m in &sizes {
                        let zg = std_normal(rng);
                        for _ in 0..m {
                            x[(i, j)] = zg + std_normal(rng);
                            j += 1;
                        }
                    }
                }
                x
            }
            CovariateRecipe::PolynomialAndFactors { n_poly, n_factor } => {
                let lo = normal_quantile(1.0 / 3.0);
                let hi = normal_quantile(2.0 / 3.0);
                let mut x = DMatrix::zeros(n, p);
                for i in 0..n {
                    let w = std_normal(rng);
                    let latent: Vec<f64> = (0..n_poly + n_factor)
                        .map(|_| (std_normal(rng) + w) / std::f64::consts::SQRT_2)
                        .collect();
                    let mut j = 0;
                    for &v in &latent[..n_poly] {
                        x[(i, j)] = v;
                        x[(i, j + 1)] = v * v;
                        x[(i, j + 2)] = v * v * v;
                        j += 3;
                    }
                    for &v in &latent[n_poly..] {
                        // level 0 below the lower cut, 1 above the upper cut,
                        // 2 (baseline) in between
                        x[(i, j)] = if v < lo { 1.0 } else { 0.0 };
                        x[(i, j + 1)] = if v > hi { 1.0 } else { 0.0 };
                        j += 2;
                    }
                }
                x
            }
        }
    }

    pub fn generate<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<ExampleData> {
        let n = self.n_train + self.n_test;
        let x = self.draw_covariates(n, rng);
        let mean = &x * self.beta.to_dvector();
        let y = DVector::from_fn(n, |i, _| mean[i] + self.sigma * std_normal(rng));
        let full = GroupedDesign::new(y, x, self.group_sizes().to_vec())?;
        // a random split of the pooled sample
        let mut rows: Vec<usize> = (0..n).collect();
        use rand::seq::SliceRandom;
        rows.shuffle(rng);
        let train = full.select_rows(&rows[..self.n_train])?;
        let test = full.select_rows(&rows[self.n_train..])?;
        Ok(ExampleData {
            train,
            test,
            beta: self.beta.clone(),
            sigma: self.sigma,
        })
    }
}

#[derive(Debug, Clone)]
pub struct ExampleData {
    pub train: GroupedDesign,
    pub test: GroupedDesign,
    pub beta: GroupedCoefficients,
    pub sigma: f64,
}

pub fn generate_example<R: Rng + ?Sized>(id: usize, rng: &mut R) -> Result<ExampleData> {
    ExampleSpec::new(id)?.generate(rng)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Level {
    Group,
    Coefficient,
}

impl FromStr for Level {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "group" => Ok(Level::Group),
            "coef" | "coefficient" => Ok(Level::Coefficient),
            other => Err(Error::InvalidConfig(format!("unknown level '{other}'"))),
        }
    }
}

/// True and false positive rates; `None` when the truth has no positives
/// (or no negatives) at that level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rates {
    pub tpr: Option<f64>,
    pub fpr: Option<f64>,
}

pub fn tpr_fpr(selected: &SelectionPattern, truth: &SelectionPattern, level: Level) -> Result<Rates> {
    let (s, t) = match level {
        Level::Group => (&selected.group_included, &truth.group_included),
        Level::Coefficient => (&selected.coef_included, &truth.coef_included),
    };
    if s.len() != t.len() {
        return Err(Error::DimensionMismatch(format!(
            "selection has {} entries, truth has {}",
            s.len(),
            t.len()
        )));
    }
    let (mut tp, mut pos, mut fp, mut neg) = (0usize, 0usize, 0usize, 0usize);
    for (&sel, &tru) in s.iter().zip(t) {
        if tru {
            pos += 1;
            tp += sel as usize;
        } else {
            neg += 1;
            fp += sel as usize;
        }
    }
    Ok(Rates {
        tpr: (pos > 0).then(|| tp as f64 / pos as f64),
        fpr: (neg > 0).then(|| fp as f64 / neg as f64),
    })
}

/// Fraction of coefficients whose inclusion flag disagrees with the truth.
pub fn misclassification(selected: &SelectionPattern, truth: &SelectionPattern) -> Result<f64> {
    let (s, t) = (&selected.coef_included, &truth.coef_included);
    if s.len() != t.len() || s.is_empty() {
        return Err(Error::DimensionMismatch("selection and truth differ in length".into()));
    }
    Ok(s.iter().zip(t).filter(|(a, b)| a != b).count() as f64 / s.len() as f64)
}

pub const DEFAULT_BOOT_REPS: usize = 1000;

/// Sample median and its bootstrap standard error.
pub fn median_mse<R: Rng + ?Sized>(values: &[f64], boot_reps: usize, rng: &mut R) -> Result<(f64, f64)> {
    if values.len() < 2 {
        return Err(Error::InsufficientReplications {
            needed: 2,
            got: values.len(),
        });
    }
    if boot_reps < 100 {
        return Err(Error::InvalidParameter(format!("need at least 100 bootstrap resamples, got {boot_reps}")));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let med = median_sorted(&sorted);
    let n = values.len();
    let mut meds = Vec::with_capacity(boot_reps);
    let mut buf = vec![0.0; n];
    for _ in 0..boot_reps {
        for slot in buf.iter_mut() {
            *slot = sorted[rng.random_range(0..n)];
        }
        buf.sort_by(f64::total_cmp);
        meds.push(median_sorted(&buf));
    }
    let mean = meds.iter().sum::<f64>() / boot_reps as f64;
    let var = meds.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / (boot_reps - 1) as f64;
    Ok((med, var.sqrt()))
}

/// Output of one method on one (standardized) training design.
#[derive(Debug, Clone)]
pub struct MethodFit {
    pub method: Method,
    /// Point estimates keyed by estimator ("mean", "median", "estimate").
    pub estimates: BTreeMap<String, GroupedCoefficients>,
    /// Selected models keyed by rule ("mtm", "hppm", "support").
    pub selections: BTreeMap<String, SelectionPattern>,
    pub summary: Option<PosteriorSummary>,
    pub draws: Option<ChainDraws>,
    /// Tuned hyperparameters (λ, t, CV penalty, SGL ratio).
    pub tuning: BTreeMap<String, f64>,
    pub cv: Option<CvResult>,
}

impl MethodFit {
    fn new(method: Method) -> Self {
        Self {
            method,
            estimates: BTreeMap::new(),
            selections: BTreeMap::new(),
            summary: None,
            draws: None,
            tuning: BTreeMap::new(),
            cv: None,
        }
    }

    fn bayes(method: Method, summary: PosteriorSummary, draws: ChainDraws) -> Self {
        let mut fit = Self::new(method);
        fit.estimates.insert("mean".into(), summary.coef_mean.clone());
        fit.estimates.insert("median".into(), summary.coef_median.clone());
        if let Some(m) = &summary.mtm {
            fit.selections.insert("mtm".into(), m.clone());
        }
        if let Some(h) = &summary.hppm {
            fit.selections.insert("hppm".into(), h.pattern.clone());
        }
        fit.summary = Some(summary);
        fit.draws = Some(draws);
        fit
    }
}

pub const CV_FOLDS: usize = 5;

/// Fits `method` on an already standardized design.
pub fn fit_method(method: Method, design: &GroupedDesign, config: &SamplerConfig, rng: &mut RngStream) -> Result<MethodFit> {
    match method {
        Method::BglSs => {
            let f = fit_bgl_ss(design, config, rng)?;
            let mut out = MethodFit::bayes(method, f.summary, f.draws);
            out.tuning.insert("lambda".into(), f.lambda.value);
            Ok(out)
        }
        Method::Bsgl => {
            let f = fit_bsgl(design, config, rng)?;
            Ok(MethodFit::bayes(method, f.summary, f.draws))
        }
        Method::BsgsSs => {
            let f = fit_bsgs_ss(design, config, rng)?;
            let mut out = MethodFit::bayes(method, f.summary, f.draws);
            out.tuning.insert("t".into(), f.t.value);
            Ok(out)
        }
        Method::GroupLasso | Method::SparseGroupLasso => {
            let (coef, cv) = if method == Method::GroupLasso {
                fit_cv(design, PenalizedMethod::GroupLasso, CV_FOLDS, rng)?
            } else {
                fit_sgl_cv(design, CV_FOLDS, rng)?
            };
            let mut out = MethodFit::new(method);
            out.selections.insert("support".into(), selection_of(&coef));
            out.estimates.insert("estimate".into(), coef);
            out.tuning.insert("penalty".into(), cv.best_penalty);
            if let PenalizedMethod::SparseGroupLasso { alpha } = cv.method {
                out.tuning.insert("alpha".into(), alpha);
            }
            out.cv = Some(cv);
            Ok(out)
        }
        Method::Ols => {
            let mut out = MethodFit::new(method);
            out.estimates.insert("estimate".into(), fit_ols(design)?);
            Ok(out)
        }
    }
}

/// Mean squared prediction error on raw test data.
pub fn test_mse(standardizer: &Standardizer, test: &GroupedDesign, beta_std: &GroupedCoefficients) -> f64 {
    let pred = standardizer.predict(test.x(), beta_std.values());
    (test.y() - pred).norm_squared() / test.n() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionRecord {
    pub coefficient: Rates,
    pub group: Rates,
    pub misclassification: f64,
}

/// Everything measured for one (example, replication, method).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationRecord {
    pub example: usize,
    pub replication: usize,
    pub method: Method,
    /// Stream used for the method's RNG (data use a separate stream).
    pub stream: u64,
    pub mse: BTreeMap<String, f64>,
    pub selection: BTreeMap<String, SelectionRecord>,
    pub tuning: BTreeMap<String, f64>,
    pub error: Option<String>,
}

/// Stream index for the data of one replication.
pub fn data_stream(example: usize, replication: usize) -> u64 {
    (example as u64) << 40 | (replication as u64) << 8 | 0xff
}

/// Stream index for one method's fit on one replication.
pub fn method_stream(example: usize, replication: usize, method: Method) -> u64 {
    (example as u64) << 40 | (replication as u64) << 8 | method.index()
}

/// Fits one method on one replication's data and scores it.
pub fn evaluate_method(
    data: &ExampleData,
    example: usize,
    replication: usize,
    method: Method,
    config: &SamplerConfig,
    seed: u64,
) -> ReplicationRecord {
    let stream = method_stream(example, replication, method);
    let mut record = ReplicationRecord {
        example,
        replication,
        method,
        stream,
        mse: BTreeMap::new(),
        selection: BTreeMap::new(),
        tuning: BTreeMap::new(),
        error: None,
    };
    let result = (|| -> Result<()> {
        let std = Standardizer::fit(&data.train);
        let train = std.transform(&data.train)?;
        let mut rng = RngStream::new(seed, stream);
        let fit = fit_method(method, &train, config, &mut rng)?;
        let truth = selection_of(&data.beta);
        for (name, coef) in &fit.estimates {
            record.mse.insert(name.clone(), test_mse(&std, &data.test, coef));
        }
        for (name, sel) in &fit.selections {
            record.selection.insert(
                name.clone(),
                SelectionRecord {
                    coefficient: tpr_fpr(sel, &truth, Level::Coefficient)?,
                    group: tpr_fpr(sel, &truth, Level::Group)?,
                    misclassification: misclassification(sel, &truth)?,
                },
            );
        }
        record.tuning = fit.tuning;
        Ok(())
    })();
    if let Err(e) = result {
        record.error = Some(e.to_string());
    }
    record
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkConfig {
    pub examples: Vec<usize>,
    pub methods: Vec<Method>,
    pub n_reps: usize,
    pub seed: u64,
    pub boot_reps: usize,
    pub sampler: SamplerConfig,
    /// Noise standard deviation override (e.g. a high-SNR variant).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
}

impl BenchmarkConfig {
    pub fn new(examples: Vec<usize>, methods: Vec<Method>, n_reps: usize, sampler: SamplerConfig) -> Self {
        Self {
            examples,
            methods,
            n_reps,
            seed: sampler.seed,
            boot_reps: DEFAULT_BOOT_REPS,
            sampler,
            sigma: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_reps == 0 {
            return Err(Error::InvalidConfig("number of replications must be at least 1".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::InvalidConfig("no methods selected".into()));
        }
        for &e in &self.examples {
            ExampleSpec::new(e)?;
        }
        self.sampler.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRow {
    pub example: usize,
    pub method: Method,
    pub estimator: String,
    pub n_reps: usize,
    pub n_failed: usize,
    pub median_mse: Option<f64>,
    /// Bootstrap SE of the median; `None` with fewer than two values.
    pub median_mse_se: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionRow {
    pub example: usize,
    pub method: Method,
    pub rule: String,
    pub n_reps: usize,
    pub mean_tpr: Option<f64>,
    pub mean_fpr: Option<f64>,
    pub mean_tpr_group: Option<f64>,
    pub mean_fpr_group: Option<f64>,
    pub mean_misclassification: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub config: BenchmarkConfig,
    pub prediction: Vec<PredictionRow>,
    pub selection: Vec<SelectionRow>,
    pub replications: Vec<ReplicationRecord>,
}

fn mean_of(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let v: Vec<f64> = values.flatten().collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

/// Aggregates replication records. Records are sorted first, so the
/// result does not depend on their order.
pub fn aggregate(config: &BenchmarkConfig, mut records: Vec<ReplicationRecord>) -> BenchmarkReport {
    records.sort_by_key(|r| (r.example, r.method, r.replication));
    let mut prediction = Vec::new();
    let mut selection = Vec::new();
    for &example in &config.examples {
        for &method in &config.methods {
            let recs: Vec<&ReplicationRecord> = records
                .iter()
                .filter(|r| r.example == example && r.method == method)
                .collect();
            let n_failed = recs.iter().filter(|r| r.error.is_some()).count();
            let mut estimators: Vec<&String> = recs.iter().flat_map(|r| r.mse.keys()).collect();
            estimators.sort();
            estimators.dedup();
            if estimators.is_empty() {
                prediction.push(PredictionRow {
                    example,
                    method,
                    estimator: "estimate".into(),
                    n_reps: recs.len(),
                    n_failed,
                    median_mse: None,
                    median_mse_se: None,
                });
            }
            for est in estimators {
                let vals: Vec<f64> = recs.iter().filter_map(|r| r.mse.get(est).copied()).collect();
                let mut boot = RngStream::new(config.seed, (example as u64) << 40 | 0xfe << 8 | method.index());
                let (median_mse, median_mse_se) = match median_mse(&vals, config.boot_reps.max(100), &mut boot) {
                    Ok((m, se)) => (Some(m), Some(se)),
                    Err(_) => (vals.first().copied(), None),
                };
                prediction.push(PredictionRow {
                    example,
                    method,
                    estimator: est.clone(),
                    n_reps: recs.len(),
                    n_failed,
                    median_mse,
                    median_mse_se,
                });
            }
            let mut rules: Vec<&String> = recs.iter().flat_map(|r| r.selection.keys()).collect();
            rules.sort();
            rules.dedup();
            for rule in rules {
                let sel: Vec<&SelectionRecord> = recs.iter().filter_map(|r| r.selection.get(rule)).collect();
                selection.push(SelectionRow {
                    example,
                    method,
                    rule: rule.clone(),
                    n_reps: sel.len(),
                    mean_tpr: mean_of(sel.iter().map(|s| s.coefficient.tpr)),
                    mean_fpr: mean_of(sel.iter().map(|s| s.coefficient.fpr)),
                    mean_tpr_group: mean_of(sel.iter().map(|s| s.group.tpr)),
                    mean_fpr_group: mean_of(sel.iter().map(|s| s.group.fpr)),
                    mean_misclassification: mean_of(sel.iter().map(|s| Some(s.misclassification))),
                });
            }
        }
    }
    BenchmarkReport {
        config: config.clone(),
        prediction,
        selection,
        replications: records,
    }
}

/// Runs every (example, replication, method) combination. Replications run
/// in parallel on the current rayon pool.
pub fn run_benchmark(config: &BenchmarkConfig) -> Result<BenchmarkReport> {
    config.validate()?;
    let mut tasks = Vec::new();
    for &example in &config.examples {
        for rep in 0..config.n_reps {
            tasks.push((example, rep));
        }
    }
    let records: Vec<Vec<ReplicationRecord>> = tasks
        .par_iter()
        .map(|&(example, rep)| {
            let spec = ExampleSpec::new(example).expect("validated");
            let spec = match config.sigma {
                Some(s) => spec.with_sigma(s),
                None => spec,
            };
            let mut data_rng = RngStream::new(config.seed, data_stream(example, rep));
            match spec.generate(&mut data_rng) {
                Ok(data) => config
                    .methods
                    .iter()
                    .map(|&m| evaluate_method(&data, example, rep, m, &config.sampler, config.seed))
                    .collect(),
                Err(e) => config
                    .methods
                    .iter()
                    .map(|&m| ReplicationRecord {
                        example,
                        replication: rep,
                        method: m,
                        stream: method_stream(example, rep, m),
                        mse: BTreeMap::new(),
                        selection: BTreeMap::new(),
                        tuning: BTreeMap::new(),
                        error: Some(e.to_string()),
                    })
                    .collect(),
            }
        })
        .collect();
    Ok(aggregate(config, records.into_iter().flatten().collect()))
}

/// One π₀ specification in the sensitivity sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pi0Setting {
    pub label: &'static str,
    pub prior: Pi0Prior,
}

pub fn default_pi0_settings() -> Vec<Pi0Setting> {
    vec![
        Pi0Setting { label: "fixed 0.20", prior: Pi0Prior::Fixed { value: 0.2 } },
        Pi0Setting { label: "fixed 0.50", prior: Pi0Prior::Fixed { value: 0.5 } },
        Pi0Setting { label: "fixed 0.80", prior: Pi0Prior::Fixed { value: 0.8 } },
        Pi0Setting { label: "beta 0.50", prior: Pi0Prior::Beta { a: 0.5, b: 0.5 } },
        Pi0Setting { label: "beta 1.00", prior: Pi0Prior::Beta { a: 1.0, b: 1.0 } },
        Pi0Setting { label: "beta 1.50", prior: Pi0Prior::Beta { a: 1.5, b: 1.5 } },
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityRow {
    pub setting: String,
    pub prior: Pi0Prior,
    pub mtm_misclassification: Option<f64>,
    pub hppm_misclassification: Option<f64>,
    pub n_failed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityReport {
    pub example: usize,
    pub n_reps: usize,
    pub seed: u64,
    pub rows: Vec<SensitivityRow>,
    /// Cross-validated group lasso on the same data sets.
    pub gl_misclassification: Option<f64>,
}

/// Per-setting (MTM, HPPM) misclassification and the group-lasso value.
type RepOutcome = (Vec<Option<(f64, f64)>>, Option<f64>);

/// BGL-SS misclassification under several π₀ specifications, each fitted to
/// the same replicated data sets.
pub fn run_sensitivity(
    example: usize,
    settings: &[Pi0Setting],
    n_reps: usize,
    config: &SamplerConfig,
    seed: u64,
) -> Result<SensitivityReport> {
    if n_reps == 0 {
        return Err(Error::InvalidConfig("number of replications must be at least 1".into()));
    }
    let spec = ExampleSpec::new(example)?;
    config.validate()?;
    let per_rep: Vec<Result<RepOutcome>> = (0..n_reps)
        .into_par_iter()
        .map(|rep| {
            let data = spec.generate(&mut RngStream::new(seed, data_stream(example, rep)))?;
            let truth = selection_of(&data.beta);
            let std = Standardizer::fit(&data.train);
            let train = std.transform(&data.train)?;
            let mut out = Vec::with_capacity(settings.len());
            for (k, s) in settings.iter().enumerate() {
                let mut cfg = config.clone();
                cfg.bgl.pi0 = s.prior;
                let stream = method_stream(example, rep, Method::BglSs) | (k as u64 + 1) << 32;
                let fit = fit_method(Method::BglSs, &train, &cfg, &mut RngStream::new(seed, stream));
                out.push(fit.ok().and_then(|f| {
                    let mtm = misclassification(f.selections.get("mtm")?, &truth).ok()?;
                    let hppm = misclassification(f.selections.get("hppm")?, &truth).ok()?;
                    Some((mtm, hppm))
                }));
            }
            let gl = fit_method(
                Method::GroupLasso,
                &train,
                config,
                &mut RngStream::new(seed, method_stream(example, rep, Method::GroupLasso)),
            )
            .ok()
            .and_then(|f| misclassification(f.selections.get("support")?, &truth).ok());
            Ok((out, gl))
        })
        .collect();
    let mut rows = Vec::new();
    for (k, s) in settings.iter().enumerate() {
        let vals: Vec<Option<(f64, f64)>> = per_rep
            .iter()
            .map(|r| r.as_ref().ok().and_then(|(v, _)| v[k]))
            .collect();
        rows.push(SensitivityRow {
            setting: s.label.to_string(),
            prior: s.prior,
            mtm_misclassification: mean_of(vals.iter().map(|v| v.map(|x| x.0))),
            hppm_misclassification: mean_of(vals.iter().map(|v| v.map(|x| x.1))),
            n_failed: vals.iter().filter(|v| v.is_none()).count(),
        });
    }
    let gl = mean_of(per_rep.iter().map(|r| r.as_ref().ok().and_then(|(_, g)| *g)));
    Ok(SensitivityReport {
        example,
        n_reps,
        seed,
        rows,
        gl_misclassification: gl,
    })
}

/// Posterior mean and median of BGL-SS and BSGS-SS on one data set drawn
/// from `spec`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientTable {
    pub truth: Vec<f64>,
    pub columns: BTreeMap<String, Vec<f64>>,
}

pub fn coefficient_table(spec: &ExampleSpec, config: &SamplerConfig, seed: u64) -> Result<CoefficientTable> {
    let data = spec.generate(&mut RngStream::new(seed, data_stream(spec.id, 0)))?;
    let std = Standardizer::fit(&data.train);
    let train = std.transform(&data.train)?;
    let mut columns = BTreeMap::new();
    for method in [Method::BglSs, Method::BsgsSs] {
        let fit = fit_method(method, &train, config, &mut RngStream::new(seed, method_stream(spec.id, 0, method)))?;
        for (est, coef) in &fit.estimates {
            // back to the raw covariate scale
            let raw: Vec<f64> = coef.values().iter().zip(&std.sds).map(|(b, s)| b / s).collect();
            columns.insert(format!("{method} {est}"), raw);
        }
    }
    Ok(CoefficientTable {
        truth: data.beta.values().to_vec(),
        columns,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pattern(flags: &[bool]) -> SelectionPattern {
        SelectionPattern::from_coef_flags(flags.to_vec(), &[flags.len()])
    }

    #[test]
    fn rates_examples() {
        let truth = pattern(&[true, true, false, false]);
        let r = tpr_fpr(&truth, &truth, Level::Coefficient).unwrap();
        assert_eq!((r.tpr, r.fpr), (Some(1.0), Some(0.0)));
        let all = pattern(&[true; 4]);
        let r = tpr_fpr(&all, &truth, Level::Coefficient).unwrap();
        assert_eq!((r.tpr, r.fpr), (Some(1.0), Some(1.0)));
        let sel = pattern(&[true, false, true, false]);
        let r = tpr_fpr(&sel, &truth, Level::Coefficient).unwrap();
        assert_eq!((r.tpr, r.fpr), (Some(0.5), Some(0.5)));
        let r = tpr_fpr(&sel, &pattern(&[false; 4]), Level::Coefficient).unwrap();
        assert_eq!(r.tpr, None);
        assert!(tpr_fpr(&sel, &pattern(&[true; 3]), Level::Coefficient).is_err());
        assert_eq!(misclassification(&truth, &truth).unwrap(), 0.0);
        assert_eq!(misclassification(&sel, &truth).unwrap(), 0.5);
    }

    #[test]
    fn median_and_bootstrap() {
        let mut rng = RngStream::new(1, 0);
        assert_eq!(median_mse(&[1.0, 2.0, 3.0], 100, &mut rng).unwrap().0, 2.0);
        assert_eq!(median_mse(&[4.0; 10], 200, &mut rng).unwrap(), (4.0, 0.0));
        assert!(matches!(median_mse(&[1.0], 100, &mut rng), Err(Error::InsufficientReplications { .. })));
        let a = median_mse(&[1.0, 5.0, 2.0, 8.0], 500, &mut RngStream::new(3, 0)).unwrap();
        let b = median_mse(&[1.0, 5.0, 2.0, 8.0], 500, &mut RngStream::new(3, 0)).unwrap();
        assert_eq!(a, b);
        // 50 N(10, 1) draws: SE ≈ sqrt(π/2)/√50 ≈ 0.18
        let vals: Vec<f64> = (0..50).map(|_| 10.0 + std_normal(&mut rng)).collect();
        let (m, se) = median_mse(&vals, 1000, &mut rng).unwrap();
        assert!((m - 10.0).abs() < 0.6);
        assert!(se > 0.08 && se < 0.35, "{se}");
    }

    #[test]
    fn example_shapes() {
        let e1 = ExampleSpec::new(1).unwrap();
        assert_eq!((e1.p(), e1.group_sizes().len(), e1.n_train, e1.sigma), (20, 4, 60, 3.0));
        let e2 = ExampleSpec::new(2).unwrap();
        assert_eq!((e2.p(), e2.group_sizes().len(), e2.n_train, e2.n_test), (80, 16, 40, 20));
        let e3 = ExampleSpec::new(3).unwrap();
        assert_eq!(e3.beta.values()[10..20], [2.0; 10]);
        let e4 = ExampleSpec::new(4).unwrap();
        assert_eq!(e4.truth().n_coefs_included(), 10);
        let e5 = ExampleSpec::new(5).unwrap();
        assert_eq!((e5.p(), e5.group_sizes().len(), e5.n_train, e5.n_test), (50, 20, 100, 100));
        assert_eq!(e5.truth().n_groups_included(), 3);
        assert!(matches!(ExampleSpec::new(6), Err(Error::UnknownExample(6))));
        let mut rng = RngStream::new(2, 0);
        let d = generate_example(2, &mut rng).unwrap();
        assert_eq!((d.train.n(), d.test.n(), d.train.p()), (40, 20, 80));
    }

    fn correlation(x: &DMatrix<f64>, a: usize, b: usize) -> f64 {
        let n = x.nrows() as f64;
        let (ca, cb) = (x.column(a), x.column(b));
        let (ma, mb) = (ca.sum() / n, cb.sum() / n);
        let cov = ca.iter().zip(cb.iter()).map(|(u, v)| (u - ma) * (v - mb)).sum::<f64>();
        let va = ca.iter().map(|u| (u - ma).powi(2)).sum::<f64>();
        let vb = cb.iter().map(|v| (v - mb).powi(2)).sum::<f64>();
        cov / (va * vb).sqrt()
    }

    #[test]
    fn covariate_correlations() {
        let mut rng = RngStream::new(4, 0);
        let x = ExampleSpec::new(1).unwrap().draw_covariates(10_000, &mut rng);
        for (a, b) in [(0, 1), (0, 19), (7, 12)] {
            assert!((correlation(&x, a, b) - 0.5).abs() < 0.05);
        }
        let x = ExampleSpec::new(2).unwrap().draw_covariates(10_000, &mut rng);
        assert!((correlation(&x, 0, 4) - 0.5).abs() < 0.05);
        assert!(correlation(&x, 0, 5).abs() < 0.05);
        let x = ExampleSpec::new(5).unwrap().draw_covariates(10_000, &mut rng);
        // latent factors share W: corr(X_1, X_2) = ½
        assert!((correlation(&x, 0, 3) - 0.5).abs() < 0.05);
        // each indicator is on with probability ⅓
        let ones = x.column(30).sum() / 10_000.0;
        assert!((ones - 1.0 / 3.0).abs() < 0.03);
        let both = (0..10_000).filter(|&i| x[(i, 30)] == 1.0 && x[(i, 31)] == 1.0).count();
        assert_eq!(both, 0);
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
        assert!("foo".parse::<Method>().is_err());
    }

    #[test]
    fn aggregation_is_order_invariant() {
        let mut sampler = SamplerConfig::default();
        sampler.n_iter = 200;
        sampler.n_burn = 100;
        sampler.em_rounds = 2;
        sampler.em_inner_iters = 50;
        let cfg = BenchmarkConfig::new(vec![3], vec![Method::BglSs, Method::GroupLasso], 3, sampler);
        let report = run_benchmark(&cfg).unwrap();
        let mut shuffled = report.replications.clone();
        shuffled.reverse();
        let again = aggregate(&cfg, shuffled);
        assert_eq!(again, report);
        assert_eq!(report.replications.len(), 6);
        let rerun = run_benchmark(&cfg).unwrap();
        assert_eq!(serde_json::to_string(&rerun).unwrap(), serde_json::to_string(&report).unwrap());
    }

    #[test]
    fn single_replication_has_no_se() {
        let mut sampler = SamplerConfig::default();
        sampler.n_iter = 50;
        sampler.n_burn = 10;
        sampler.em_rounds = 1;
        sampler.em_inner_iters = 10;
        let cfg = BenchmarkConfig::new(vec![1], vec![Method::Ols], 1, sampler);
        let report = run_benchmark(&cfg).unwrap();
        assert_eq!(report.prediction.len(), 1);
        assert!(report.prediction[0].median_mse.is_some());
        assert_eq!(report.prediction[0].median_mse_se, None);
        let mut bad = cfg.clone();
        bad.n_reps = 0;
        assert!(run_benchmark(&bad).is_err());
    }

    #[test]
    fn ols_fails_on_wide_example() {
        let mut sampler = SamplerConfig::default();
        sampler.n_iter = 50;
        sampler.n_burn = 10;
        let cfg = BenchmarkConfig::new(vec![2], vec![Method::Ols], 2, sampler);
        let report = run_benchmark(&cfg).unwrap();
        assert_eq!(report.prediction[0].n_failed, 2);
        assert_eq!(report.prediction[0].median_mse, None);
    }
}
