//! Frequentist comparators: group lasso, sparse group lasso, OLS and
//! K-fold cross-validation over a penalty grid.
//!
//! Objectives use the unhalved squared loss:
//!
//! ```text
//! group lasso:         ‖y − Xβ‖² + λ Σ_g ‖β_g‖
//! sparse group lasso:  ‖y − Xβ‖² + λ₁ ‖β‖₁ + λ₂ Σ_g ‖β_g‖
//! ```

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{chol_solve, cholesky_lower, residual, GroupBlocks};
use crate::model::{GroupedCoefficients, GroupedDesign};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Stop once the largest coefficient change in a sweep is below this.
    pub tol: f64,
    /// Required KKT residual; sweeps continue with a tighter `tol` until met.
    pub kkt_tol: f64,
    pub max_sweeps: usize,
    pub record_objective: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            kkt_tol: 1e-6,
            max_sweeps: 100_000,
            record_objective: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PenalizedFit {
    pub coef: GroupedCoefficients,
    pub sweeps: usize,
    pub kkt_residual: f64,
    /// Objective after each sweep when requested.
    pub objective_trace: Vec<f64>,
}

fn check_penalty(name: &str, v: f64) -> Result<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must be non-negative, got {v}")))
    }
}

fn soft(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

fn soft_vec(v: &DVector<f64>, t: f64) -> DVector<f64> {
    v.map(|x| soft(x, t))
}

/// Per-design quantities reused across penalties.
pub struct BlockCache {
    blocks: GroupBlocks,
    eigen: Vec<SymmetricEigen<f64, nalgebra::Dyn>>,
    lipschitz: Vec<f64>,
}

impl BlockCache {
    pub fn new(design: &GroupedDesign) -> Self {
        let blocks = GroupBlocks::new(design);
        let eigen: Vec<_> = blocks.grams.iter().map(|a| a.clone().symmetric_eigen()).collect();
        let lipschitz = eigen
            .iter()
            .map(|e| 2.0 * e.eigenvalues.iter().cloned().fold(0.0, f64::max))
            .collect();
        Self {
            blocks,
            eigen,
            lipschitz,
        }
    }
}

pub fn group_lasso_objective(design: &GroupedDesign, beta: &GroupedCoefficients, lambda: f64) -> f64 {
    let rss = residual(design, beta.values()).norm_squared();
    rss + lambda * (0..beta.n_groups()).map(|g| beta.group_norm(g)).sum::<f64>()
}

pub fn sparse_group_lasso_objective(design: &GroupedDesign, beta: &GroupedCoefficients, lambda1: f64, lambda2: f64) -> f64 {
    let rss = residual(design, beta.values()).norm_squared();
    rss + lambda1 * beta.values().iter().map(|v| v.abs()).sum::<f64>()
        + lambda2 * (0..beta.n_groups()).map(|g| beta.group_norm(g)).sum::<f64>()
}

/// Exact minimiser of ‖r − X_g β‖² + λ‖β‖ given c = X_gᵀr and the eigen
/// decomposition of X_gᵀX_g.
fn group_block_solve(eig: &SymmetricEigen<f64, nalgebra::Dyn>, c: &DVector<f64>, lambda: f64) -> DVector<f64> {
    let half = 0.5 * lambda;
    let cn = c.norm();
    if cn <= half {
        return DVector::zeros(c.len());
    }
    let d = eig.eigenvectors.tr_mul(c);
    let vals = &eig.eigenvalues;
    if half == 0.0 {
        // plain least squares on the block (pseudo-inverse for null directions)
        let w = DVector::from_fn(d.len(), |i, _| if vals[i] > 1e-12 { d[i] / vals[i] } else { 0.0 });
        return &eig.eigenvectors * w;
    }
    // κ‖(Λ + κ)⁻¹ d‖ is increasing in κ and tends to ‖d‖ > λ/2.
    let f = |k: f64| -> f64 {
        d.iter()
            .zip(vals.iter())
            .map(|(di, li)| (k * di / (li.max(0.0) + k)).powi(2))
            .sum::<f64>()
            .sqrt()
    };
    let lmax = vals.iter().cloned().fold(0.0, f64::max);
    let mut lo = 0.0;
    let mut hi = (lmax * half / (cn - half)).max(f64::MIN_POSITIVE) * 2.0 + 1e-300;
    while f(hi) < half {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) < half {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let kappa = 0.5 * (lo + hi);
    let w = DVector::from_fn(d.len(), |i, _| d[i] / (vals[i].max(0.0) + kappa));
    &eig.eigenvectors * w
}

/// Largest KKT violation of a group-lasso solution.
pub fn group_lasso_kkt(design: &GroupedDesign, beta: &GroupedCoefficients, lambda: f64) -> f64 {
    let r = residual(design, beta.values());
    let mut worst: f64 = 0.0;
    for g in 0..design.n_groups() {
        let grad = design.group_columns(g).tr_mul(&r) * -2.0;
        let norm = beta.group_norm(g);
        let v = if norm == 0.0 {
            (grad.norm() - lambda).max(0.0)
        } else {
            let bg = DVector::from_column_slice(beta.group_view(g).expect("valid group"));
            (grad + bg * (lambda / norm)).norm()
        };
        worst = worst.max(v);
    }
    worst
}

/// Largest KKT violation of a sparse-group-lasso solution.
pub fn sparse_group_lasso_kkt(design: &GroupedDesign, beta: &GroupedCoefficients, lambda1: f64, lambda2: f64) -> f64 {
    let r = residual(design, beta.values());
    let mut worst: f64 = 0.0;
    for g in 0..design.n_groups() {
        let neg_grad = design.group_columns(g).tr_mul(&r) * 2.0;
        let norm = beta.group_norm(g);
        let bg = beta.group_view(g).expect("valid group");
        if norm == 0.0 {
            worst = worst.max((soft_vec(&neg_grad, lambda1).norm() - lambda2).max(0.0));
            continue;
        }
        for (k, &b) in bg.iter().enumerate() {
            let v = if b == 0.0 {
                (neg_grad[k].abs() - lambda1).max(0.0)
            } else {
                (-neg_grad[k] + lambda1 * b.signum() + lambda2 * b / norm).abs()
            };
            worst = worst.max(v);
        }
    }
    worst
}

fn run_bcd<F>(
    design: &GroupedDesign,
    start: Option<&GroupedCoefficients>,
    opts: SolverOptions,
    mut block_update: F,
    kkt: impl Fn(&GroupedCoefficients) -> f64,
    objective: impl Fn(&GroupedCoefficients) -> f64,
) -> Result<PenalizedFit>
where
    F: FnMut(usize, &DVector<f64>, &DVector<f64>, f64) -> DVector<f64>,
{
    let mut beta = match start {
        Some(b) => {
            if b.group_sizes() != design.group_sizes() {
                return Err(Error::DimensionMismatch("warm start does not match design".into()));
            }
            b.clone()
        }
        None => GroupedCoefficients::zeros(design.group_sizes()),
    };
    let columns: Vec<DMatrix<f64>> = (0..design.n_groups()).map(|g| design.group_columns(g)).collect();
    let mut r = residual(design, beta.values());
    let mut tol = opts.tol;
    let mut trace = Vec::new();
    let mut sweeps = 0;
    loop {
        let mut max_change: f64 = 0.0;
        for (g, xg) in columns.iter().enumerate() {
            let range = design.group_range(g);
            let old = DVector::from_column_slice(&beta.values()[range.clone()]);
            let c = xg.tr_mul(&r) + design_gram_times(xg, &old);
            let new = block_update(g, &c, &old, tol);
            let delta = &new - &old;
            let change = delta.amax();
            if change > 0.0 {
                r -= xg * &delta;
                beta.values_mut()[range].copy_from_slice(new.as_slice());
            }
            max_change = max_change.max(change);
        }
        sweeps += 1;
        if opts.record_objective {
            trace.push(objective(&beta));
        }
        if max_change < tol {
            let v = kkt(&beta);
            if v <= opts.kkt_tol || tol < 1e-15 {
                // exact zeros are kept exact by construction
                return Ok(PenalizedFit {
                    coef: beta,
                    sweeps,
                    kkt_residual: v,
                    objective_trace: trace,
                });
            }
            tol *= 0.01;
            r = residual(design, beta.values());
        }
        if sweeps >= opts.max_sweeps {
            return Err(Error::MaxIterationsExceeded(sweeps));
        }
    }
}

fn design_gram_times(xg: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    if b.iter().all(|&v| v == 0.0) {
        DVector::zeros(b.len())
    } else {
        xg.tr_mul(&(xg * b))
    }
}

pub fn solve_group_lasso(
    design: &GroupedDesign,
    lambda: f64,
    cache: &BlockCache,
    start: Option<&GroupedCoefficients>,
    opts: SolverOptions,
) -> Result<PenalizedFit> {
    check_penalty("lambda", lambda)?;
    if lambda == 0.0 {
        if let Ok(coef) = fit_ols(design) {
            let kkt_residual = group_lasso_kkt(design, &coef, 0.0);
            return Ok(PenalizedFit {
                coef,
                sweeps: 0,
                kkt_residual,
                objective_trace: Vec::new(),
            });
        }
    }
    run_bcd(
        design,
        start,
        opts,
        |g, c, _, _| group_block_solve(&cache.eigen[g], c, lambda),
        |b| group_lasso_kkt(design, b, lambda),
        |b| group_lasso_objective(design, b, lambda),
    )
}

pub fn fit_group_lasso(design: &GroupedDesign, lambda: f64) -> Result<GroupedCoefficients> {
    let cache = BlockCache::new(design);
    Ok(solve_group_lasso(design, lambda, &cache, None, SolverOptions::default())?.coef)
}

/// Minimises ‖r − X_gβ‖² + λ₁‖β‖₁ + λ₂‖β‖ over one block by accelerated
/// proximal gradient with restarts.
fn sgl_block_solve(
    gram: &DMatrix<f64>,
    c: &DVector<f64>,
    start: &DVector<f64>,
    lipschitz: f64,
    lambda1: f64,
    lambda2: f64,
    tol: f64,
) -> DVector<f64> {
    if soft_vec(&(c * 2.0), lambda1).norm() <= lambda2 {
        return DVector::zeros(c.len());
    }
    let m = c.len();
    if m == 1 {
        let a = gram[(0, 0)];
        return DVector::from_element(1, soft(2.0 * c[0], lambda1 + lambda2) / (2.0 * a));
    }
    let step = 1.0 / lipschitz;
    let prox = |u: &DVector<f64>| -> DVector<f64> {
        let s = soft_vec(u, step * lambda1);
        let n = s.norm();
        if n <= step * lambda2 {
            DVector::zeros(m)
        } else {
            s * (1.0 - step * lambda2 / n)
        }
    };
    let block_obj = |b: &DVector<f64>| -> f64 {
        b.dot(&(gram * b)) - 2.0 * c.dot(b) + lambda1 * b.iter().map(|v| v.abs()).sum::<f64>() + lambda2 * b.norm()
    };
    let mut x = start.clone();
    let mut y = x.clone();
    let mut t = 1.0f64;
    let mut f_prev = block_obj(&x);
    for _ in 0..100_000 {
        let grad = (gram * &y - c) * 2.0;
        let x_new = prox(&(&y - grad * step));
        let f_new = block_obj(&x_new);
        if f_new > f_prev {
            if t == 1.0 {
                // a plain step cannot descend: converged up to rounding
                break;
            }
            y = x.clone();
            t = 1.0;
            continue;
        }
        let t_new = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let diff = (&x_new - &x).amax();
        y = &x_new + (&x_new - &x) * ((t - 1.0) / t_new);
        x = x_new;
        t = t_new;
        f_prev = f_new;
        if diff < tol {
            break;
        }
    }
    polish_on_support(gram, c, &x, lambda1, lambda2).unwrap_or(x)
}

/// Re-solves the block exactly on the support and signs found by the
/// iterative solver. With signs fixed the ℓ₁ term is linear, leaving a
/// group-lasso block problem. Returns `None` if the exact solution leaves
/// that support or violates the zero conditions.
fn polish_on_support(
    gram: &DMatrix<f64>,
    c: &DVector<f64>,
    x: &DVector<f64>,
    lambda1: f64,
    lambda2: f64,
) -> Option<DVector<f64>> {
    let support: Vec<usize> = (0..x.len()).filter(|&j| x[j] != 0.0).collect();
    if support.is_empty() {
        return None;
    }
    let k = support.len();
    let sub_gram = DMatrix::from_fn(k, k, |a, b| gram[(support[a], support[b])]);
    let sub_c = DVector::from_fn(k, |a, _| c[support[a]] - 0.5 * lambda1 * x[support[a]].signum());
    let b = group_block_solve(&SymmetricEigen::new(sub_gram), &sub_c, lambda2);
    if support.iter().enumerate().any(|(a, &j)| b[a] * x[j].signum() <= 0.0) {
        return None;
    }
    let mut full = DVector::zeros(x.len());
    for (a, &j) in support.iter().enumerate() {
        full[j] = b[a];
    }
    let g = gram * &full;
    let slack = 1e-12 * (1.0 + lambda1);
    if (0..x.len()).any(|j| x[j] == 0.0 && (2.0 * (c[j] - g[j])).abs() > lambda1 + slack) {
        return None;
    }
    Some(full)
}

pub fn solve_sparse_group_lasso(
    design: &GroupedDesign,
    lambda1: f64,
    lambda2: f64,
    cache: &BlockCache,
    start: Option<&GroupedCoefficients>,
    opts: SolverOptions,
) -> Result<PenalizedFit> {
    check_penalty("lambda1", lambda1)?;
    check_penalty("lambda2", lambda2)?;
    run_bcd(
        design,
        start,
        opts,
        |g, c, old, tol| {
            let lip = cache.lipschitz[g].max(1e-300);
            sgl_block_solve(&cache.blocks.grams[g], c, old, lip, lambda1, lambda2, tol * 1e-3)
        },
        |b| sparse_group_lasso_kkt(design, b, lambda1, lambda2),
        |b| sparse_group_lasso_objective(design, b, lambda1, lambda2),
    )
}

pub fn fit_sparse_group_lasso(design: &GroupedDesign, lambda1: f64, lambda2: f64) -> Result<GroupedCoefficients> {
    let cache = BlockCache::new(design);
    Ok(solve_sparse_group_lasso(design, lambda1, lambda2, &cache, None, SolverOptions::default())?.coef)
}

/// Ordinary least squares; `RankDeficient` when p ≥ n or XᵀX is singular.
pub fn fit_ols(design: &GroupedDesign) -> Result<GroupedCoefficients> {
    if design.p() >= design.n() {
        return Err(Error::RankDeficient);
    }
    let x = design.x();
    let xtx = x.tr_mul(x);
    let l = cholesky_lower(xtx).map_err(|_| Error::RankDeficient)?;
    let diag = l.diagonal();
    let (dmin, dmax) = diag.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &v| (a.min(v), b.max(v)));
    if dmin <= dmax * 1e-10 {
        return Err(Error::RankDeficient);
    }
    let b = chol_solve(&l, &x.tr_mul(design.y()));
    GroupedCoefficients::new(b.as_slice().to_vec(), design.group_sizes().to_vec())
}

/// Decreasing positive penalty values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PenaltyGrid {
    values: Vec<f64>,
}

impl PenaltyGrid {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidParameter("penalty grid is empty".into()));
        }
        if values.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::InvalidParameter("penalty grid values must be positive".into()));
        }
        if values.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::InvalidParameter("penalty grid must be strictly decreasing".into()));
        }
        Ok(Self { values })
    }

    /// `count` log-spaced points from `max` down to `min_ratio · max`.
    pub fn log_spaced(max: f64, min_ratio: f64, count: usize) -> Result<Self> {
        if count == 1 {
            return Self::new(vec![max]);
        }
        let (hi, lo) = (max.ln(), (max * min_ratio).ln());
        Self::new(
            (0..count)
                .map(|k| (hi + (lo - hi) * k as f64 / (count - 1) as f64).exp())
                .collect(),
        )
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

pub const GRID_POINTS: usize = 50;
pub const GRID_MIN_RATIO: f64 = 1e-3;
pub const SGL_RATIOS: [f64; 3] = [0.25, 0.5, 0.75];

/// Penalised comparator; for SGL the total λ is split as λ₁ = αλ,
/// λ₂ = (1 − α)λ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum PenalizedMethod {
    GroupLasso,
    SparseGroupLasso { alpha: f64 },
}

impl PenalizedMethod {
    fn split(&self, lambda: f64) -> (f64, f64) {
        match self {
            Self::GroupLasso => (0.0, lambda),
            Self::SparseGroupLasso { alpha } => (alpha * lambda, (1.0 - alpha) * lambda),
        }
    }

    pub fn solve(
        &self,
        design: &GroupedDesign,
        lambda: f64,
        cache: &BlockCache,
        start: Option<&GroupedCoefficients>,
    ) -> Result<PenalizedFit> {
        match self {
            Self::GroupLasso => solve_group_lasso(design, lambda, cache, start, SolverOptions::default()),
            Self::SparseGroupLasso { .. } => {
                let (l1, l2) = self.split(lambda);
                solve_sparse_group_lasso(design, l1, l2, cache, start, SolverOptions::default())
            }
        }
    }

    /// Smallest total penalty at which every group is zero.
    pub fn lambda_max(&self, design: &GroupedDesign) -> f64 {
        let cs: Vec<DVector<f64>> = (0..design.n_groups())
            .map(|g| design.group_columns(g).tr_mul(design.y()) * 2.0)
            .collect();
        match self {
            Self::GroupLasso => cs.iter().map(|c| c.norm()).fold(0.0, f64::max),
            Self::SparseGroupLasso { alpha } => cs
                .iter()
                .map(|c| {
                    // ‖S(c, αλ)‖ − (1 − α)λ is decreasing in λ
                    let zero = |l: f64| soft_vec(c, alpha * l).norm() <= (1.0 - alpha) * l;
                    let mut hi = c.amax() / alpha.max(1e-12) + c.norm() / (1.0 - alpha).max(1e-12);
                    let mut lo = 0.0;
                    if zero(lo) {
                        return 0.0;
                    }
                    while !zero(hi) {
                        hi *= 2.0;
                    }
                    for _ in 0..200 {
                        let mid = 0.5 * (lo + hi);
                        if zero(mid) {
                            hi = mid;
                        } else {
                            lo = mid;
                        }
                    }
                    hi
                })
                .fold(0.0, f64::max),
        }
    }

    pub fn default_grid(&self, design: &GroupedDesign) -> Result<PenaltyGrid> {
        let max = self.lambda_max(design);
        if !(max > 0.0) {
            return Err(Error::DegenerateEstimate("response is orthogonal to every column".into()));
        }
        PenaltyGrid::log_spaced(max, GRID_MIN_RATIO, GRID_POINTS)
    }
}

/// Warm-started fits along a grid.
pub fn fit_path(design: &GroupedDesign, method: PenalizedMethod, grid: &PenaltyGrid) -> Result<Vec<PenalizedFit>> {
    let cache = BlockCache::new(design);
    let mut out: Vec<PenalizedFit> = Vec::with_capacity(grid.len());
    for &lambda in grid.values() {
        let fit = method.solve(design, lambda, &cache, out.last().map(|f| &f.coef))?;
        out.push(fit);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub method: PenalizedMethod,
    pub grid: PenaltyGrid,
    /// Mean held-out squared error per grid point.
    pub curve: Vec<f64>,
    pub best_index: usize,
    pub best_penalty: f64,
}

/// Fold labels from a random permutation: observation i goes to fold
/// `position(i) mod k`.
pub fn assign_folds<R: Rng + ?Sized>(n: usize, k: usize, rng: &mut R) -> Result<Vec<usize>> {
    if k < 2 {
        return Err(Error::InsufficientData(format!("need at least 2 folds, got {k}")));
    }
    if n < k {
        return Err(Error::InsufficientData(format!("{n} observations for {k} folds")));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(rng);
    let mut folds = vec![0; n];
    for (pos, &i) in perm.iter().enumerate() {
        folds[i] = pos % k;
    }
    Ok(folds)
}

pub fn cross_validate<R: Rng + ?Sized>(
    design: &GroupedDesign,
    method: PenalizedMethod,
    grid: &PenaltyGrid,
    k: usize,
    rng: &mut R,
) -> Result<CvResult> {
    let folds = assign_folds(design.n(), k, rng)?;
    let mut sums = vec![0.0; grid.len()];
    for fold in 0..k {
        let train: Vec<usize> = (0..design.n()).filter(|&i| folds[i] != fold).collect();
        let test: Vec<usize> = (0..design.n()).filter(|&i| folds[i] == fold).collect();
        let train_d = design.select_rows(&train)?;
        let test_d = design.select_rows(&test)?;
        for (idx, fit) in fit_path(&train_d, method, grid)?.iter().enumerate() {
            sums[idx] += residual(&test_d, fit.coef.values()).norm_squared();
        }
    }
    let curve: Vec<f64> = sums.iter().map(|s| s / design.n() as f64).collect();
    let mut best_index = 0;
    for (i, &v) in curve.iter().enumerate() {
        if v < curve[best_index] {
            best_index = i;
        }
    }
    Ok(CvResult {
        method,
        grid: grid.clone(),
        best_penalty: grid.values()[best_index],
        best_index,
        curve,
    })
}

/// CV over the default grid, then a full-data refit along the path down
/// to the chosen penalty.
pub fn fit_cv<R: Rng + ?Sized>(
    design: &GroupedDesign,
    method: PenalizedMethod,
    k: usize,
    rng: &mut R,
) -> Result<(GroupedCoefficients, CvResult)> {
    let grid = method.default_grid(design)?;
    let cv = cross_validate(design, method, &grid, k, rng)?;
    let head = PenaltyGrid::new(grid.values()[..=cv.best_index].to_vec())?;
    let path = fit_path(design, method, &head)?;
    let coef = path.into_iter().last().expect("grid is nonempty").coef;
    Ok((coef, cv))
}

/// SGL with the mixing ratio chosen by CV from `SGL_RATIOS`, using the same
/// folds for every ratio.
pub fn fit_sgl_cv<R: Rng + ?Sized>(design: &GroupedDesign, k: usize, rng: &mut R) -> Result<(GroupedCoefficients, CvResult)> {
    let seed: u64 = rng.random();
    let mut best: Option<(GroupedCoefficients, CvResult)> = None;
    for &alpha in &SGL_RATIOS {
        let mut fold_rng = crate::dists::RngStream::new(seed, 0);
        let (coef, cv) = fit_cv(design, PenalizedMethod::SparseGroupLasso { alpha }, k, &mut fold_rng)?;
        let better = match &best {
            None => true,
            Some((_, b)) => cv.curve[cv.best_index] < b.curve[b.best_index],
        };
        if better {
            best = Some((coef, cv));
        }
    }
    Ok(best.expect("at least one ratio"))
}
