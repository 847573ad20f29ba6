#![allow(dead_code)]

use spikeslab::dists::normal_cdf;

/// Kolmogorov–Smirnov distance between a sample and a continuous CDF.
pub fn ks_distance(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// Asymptotic Kolmogorov tail probability P(D_n ≥ d).
pub fn ks_p_value(d: f64, n: usize) -> f64 {
    let sn = (n as f64).sqrt();
    let t = (sn + 0.12 + 0.11 / sn) * d;
    if t < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let k = k as f64;
        let term = 2.0 * (-1f64).powf(k - 1.0) * (-2.0 * k * k * t * t).exp();
        sum += term;
        if term.abs() < 1e-12 {
            break;
        }
    }
    sum.clamp(0.0, 1.0)
}

pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (v / n).sqrt())
}

pub fn laplace_cdf(x: f64, rate: f64) -> f64 {
    if x < 0.0 {
        0.5 * (rate * x).exp()
    } else {
        1.0 - 0.5 * (-rate * x).exp()
    }
}

pub fn inverse_gaussian_cdf(x: f64, mean: f64, shape: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let r = (shape / x).sqrt();
    let a = normal_cdf(r * (x / mean - 1.0));
    // e^{2λ/μ} Φ(−r(x/μ + 1)) evaluated in log space
    let ln_b = 2.0 * shape / mean + spikeslab::dists::normal_ln_cdf(-r * (x / mean + 1.0));
    (a + ln_b.exp()).min(1.0)
}

pub fn truncated_normal_cdf(x: f64, location: f64, sd: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let lo = normal_cdf(-location / sd);
    (normal_cdf((x - location) / sd) - lo) / (1.0 - lo)
}

/// One PASS/FAIL line for an acceptance criterion.
pub fn report(id: usize, title: &str, pass: bool, detail: &str) {
    println!("criterion {id:>2} [{}] {title}: {detail}", if pass { "PASS" } else { "FAIL" });
}
