//! Stored Gibbs draws and their posterior summaries.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{GroupedCoefficients, SelectionPattern};

/// Post burn-in draws from one chain.
///
/// `beta` is stored row-major: draw `k`, coefficient `j` lives at
/// `k * p + j`. Memory is `(n_iter - n_burn) × (p + extras)` reals.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChainDraws {
    pub group_sizes: Vec<usize>,
    pub beta: Vec<f64>,
    pub sigma2: Vec<f64>,
    /// Vector-valued traces (e.g. `tau2`), keyed by name; each inner vector
    /// is one draw.
    pub traces: BTreeMap<String, Vec<Vec<f64>>>,
    /// Scalar traces (e.g. `pi0`, `lambda1_sq`).
    pub scalars: BTreeMap<String, Vec<f64>>,
    /// Visits per coefficient-level inclusion pattern ("1100..." keys).
    pub model_visits: BTreeMap<String, usize>,
    /// Visits per group-level inclusion pattern.
    pub group_visits: BTreeMap<String, usize>,
    /// False when the posterior is continuous (no exact zeros), in which
    /// case median-thresholding and highest-probability models are undefined.
    pub sparse: bool,
}

fn key_of(flags: &[bool]) -> String {
    flags.iter().map(|&f| if f { '1' } else { '0' }).collect()
}

fn flags_of(key: &str) -> Vec<bool> {
    key.chars().map(|c| c == '1').collect()
}

impl ChainDraws {
    pub fn new(group_sizes: &[usize], capacity: usize, sparse: bool) -> Self {
        let p: usize = group_sizes.iter().sum();
        Self {
            group_sizes: group_sizes.to_vec(),
            beta: Vec::with_capacity(capacity * p),
            sigma2: Vec::with_capacity(capacity),
            traces: BTreeMap::new(),
            scalars: BTreeMap::new(),
            model_visits: BTreeMap::new(),
            group_visits: BTreeMap::new(),
            sparse,
        }
    }

    pub fn p(&self) -> usize {
        self.group_sizes.iter().sum()
    }

    pub fn n_draws(&self) -> usize {
        self.sigma2.len()
    }

    pub fn draw(&self, k: usize) -> &[f64] {
        let p = self.p();
        &self.beta[k * p..(k + 1) * p]
    }

    pub fn coefficient_trace(&self, j: usize) -> Vec<f64> {
        let p = self.p();
        self.beta.iter().skip(j).step_by(p).copied().collect()
    }

    /// Appends one draw and tabulates its inclusion pattern.
    pub fn push(&mut self, beta: &[f64], sigma2: f64) {
        self.beta.extend_from_slice(beta);
        self.sigma2.push(sigma2);
        if self.sparse {
            let coef: Vec<bool> = beta.iter().map(|&v| v != 0.0).collect();
            let pattern = SelectionPattern::from_coef_flags(coef, &self.group_sizes);
            *self.model_visits.entry(key_of(&pattern.coef_included)).or_insert(0) += 1;
            *self
                .group_visits
                .entry(key_of(&pattern.group_included))
                .or_insert(0) += 1;
        }
    }

    pub fn push_trace(&mut self, name: &str, values: &[f64]) {
        self.traces
            .entry(name.to_string())
            .or_default()
            .push(values.to_vec());
    }

    pub fn push_scalar(&mut self, name: &str, value: f64) {
        self.scalars.entry(name.to_string()).or_default().push(value);
    }

    /// Fraction of stored draws in which each group is exactly zero.
    pub fn group_zero_frequency(&self) -> Vec<f64> {
        let n = self.n_draws().max(1) as f64;
        let mut counts = vec![0usize; self.group_sizes.len()];
        for k in 0..self.n_draws() {
            let d = self.draw(k);
            let mut start = 0;
            for (g, &m) in self.group_sizes.iter().enumerate() {
                if d[start..start + m].iter().all(|&v| v == 0.0) {
                    counts[g] += 1;
                }
                start += m;
            }
        }
        counts.into_iter().map(|c| c as f64 / n).collect()
    }
}

/// Equal-tail credible interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelEstimate {
    pub pattern: SelectionPattern,
    pub frequency: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSummary {
    pub coef_mean: GroupedCoefficients,
    pub coef_median: GroupedCoefficients,
    pub intervals: Vec<Interval>,
    /// Zero pattern of the marginal medians; `None` for continuous posteriors.
    pub mtm: Option<SelectionPattern>,
    /// Most visited coefficient-level pattern.
    pub hppm: Option<ModelEstimate>,
    /// Most visited group-level pattern.
    pub hppm_group: Option<ModelEstimate>,
    pub group_zero_frequency: Vec<f64>,
    pub n_draws: usize,
}

/// Linear-interpolation quantile of sorted data (type 7).
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    let frac = h - lo as f64;
    if frac == 0.0 {
        sorted[lo]
    } else {
        sorted[lo] + frac * (sorted[hi] - sorted[lo])
    }
}

/// Sample median; even counts average the two middle order statistics.
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    median_sorted(&v)
}

pub fn median_sorted(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

fn most_visited(visits: &BTreeMap<String, usize>, n: usize, sizes: &[usize], groups: bool) -> Option<ModelEstimate> {
    // ties go to the lexicographically smallest key (fewest leading inclusions)
    let (key, count) = visits
        .iter()
        .max_by(|a, b| a.1.cmp(b.1).then_with(|| b.0.cmp(a.0)))?;
    let flags = flags_of(key);
    let pattern = if groups {
        SelectionPattern::from_group_flags(flags, sizes)
    } else {
        SelectionPattern::from_coef_flags(flags, sizes)
    };
    Some(ModelEstimate {
        pattern,
        frequency: *count as f64 / n as f64,
    })
}

pub fn summarize(draws: &ChainDraws) -> Result<PosteriorSummary> {
    let n = draws.n_draws();
    if n == 0 {
        return Err(Error::EmptyChain);
    }
    let p = draws.p();
    let mut means = Vec::with_capacity(p);
    let mut medians = Vec::with_capacity(p);
    let mut intervals = Vec::with_capacity(p);
    for j in 0..p {
        let mut trace = draws.coefficient_trace(j);
        means.push(trace.iter().sum::<f64>() / n as f64);
        trace.sort_by(f64::total_cmp);
        medians.push(median_sorted(&trace));
        intervals.push(Interval {
            lower: quantile_sorted(&trace, 0.025),
            upper: quantile_sorted(&trace, 0.975),
        });
    }
    let sizes = draws.group_sizes.clone();
    let coef_median = GroupedCoefficients::new(medians, sizes.clone())?;
    let (mtm, hppm, hppm_group) = if draws.sparse {
        (
            Some(coef_median.selection()),
            most_visited(&draws.model_visits, n, &sizes, false),
            most_visited(&draws.group_visits, n, &sizes, true),
        )
    } else {
        (None, None, None)
    };
    Ok(PosteriorSummary {
        coef_mean: GroupedCoefficients::new(means, sizes)?,
        coef_median,
        intervals,
        mtm,
        hppm,
        hppm_group,
        group_zero_frequency: draws.group_zero_frequency(),
        n_draws: n,
    })
}

/// Effective sample size from the initial positive sequence of
/// autocorrelation pairs.
pub fn effective_sample_size(trace: &[f64]) -> f64 {
    let n = trace.len();
    if n < 4 {
        return n as f64;
    }
    let mean = trace.iter().sum::<f64>() / n as f64;
    let centered: Vec<f64> = trace.iter().map(|v| v - mean).collect();
    let var = centered.iter().map(|v| v * v).sum::<f64>() / n as f64;
    if var == 0.0 {
        return n as f64;
    }
    let acf = |lag: usize| -> f64 {
        centered[..n - lag]
            .iter()
            .zip(&centered[lag..])
            .map(|(a, b)| a * b)
            .sum::<f64>()
            / (n as f64 * var)
    };
    let mut sum = 0.0;
    let mut lag = 1;
    while lag + 1 < n {
        let pair = acf(lag) + acf(lag + 1);
        if pair <= 0.0 {
            break;
        }
        sum += pair;
        lag += 2;
    }
    let tau = 1.0 + 2.0 * sum;
    (n as f64 / tau.max(1e-12)).min(n as f64)
}
