//! Goodness-of-fit tests and summary statistics used by the experiments.

use std::f64::consts::{FRAC_2_PI, PI};

use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{ensure, Result};

/// Sample mean and (n − 1) standard deviation.
pub fn mean_std(xs: &[f64]) -> Result<(f64, f64)> {
    ensure(xs.len() >= 2, "samples", || "need at least two samples".into())?;
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok((mean, var.sqrt()))
}

/// CDF of the arcsine law on `[0, 1]`: `(2/π) asin(√x)`.
pub fn arcsine_cdf(x: f64) -> f64 {
    FRAC_2_PI * x.clamp(0.0, 1.0).sqrt().asin()
}

/// Arcsine law stretched onto `[lo, hi]`.
pub fn scaled_arcsine_cdf(x: f64, lo: f64, hi: f64) -> f64 {
    arcsine_cdf((x - lo) / (hi - lo))
}

/// Kolmogorov limiting survival function `Q_KS(λ)`.
pub fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 1.18 {
        let y = (-PI * PI / (8.0 * lambda * lambda)).exp();
        let mut s = 0.0;
        for j in 0..50 {
            let k = (2 * j + 1) as f64;
            let term = y.powf(k * k);
            s += term;
            if term < 1e-17 {
                break;
            }
        }
        (1.0 - (2.0 * PI).sqrt() / lambda * s).clamp(0.0, 1.0)
    } else {
        let x = (-2.0 * lambda * lambda).exp();
        let mut s = 0.0;
        let mut sign = 1.0;
        for j in 1..100 {
            let term = x.powi(j * j);
            s += sign * term;
            sign = -sign;
            if term < 1e-17 {
                break;
            }
        }
        (2.0 * s).clamp(0.0, 1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KsResult {
    pub n: usize,
    pub statistic: f64,
    pub p_value: f64,
}

/// One-sample Kolmogorov-Smirnov test against a continuous CDF.
pub fn ks_test(samples: &[f64], cdf: impl Fn(f64) -> f64) -> Result<KsResult> {
    ensure(!samples.is_empty(), "samples", || "must not be empty".into())?;
    ensure(samples.iter().all(|x| x.is_finite()), "samples", || "must be finite".into())?;
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        d = d.max(((i + 1) as f64 / n - f).abs()).max((f - i as f64 / n).abs());
    }
    let sq = n.sqrt();
    let p = kolmogorov_q((sq + 0.12 + 0.11 / sq) * d);
    Ok(KsResult {
        n: xs.len(),
        statistic: d,
        p_value: p,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChiSquareResult {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

/// Pearson chi-square test of equal expected counts across bins.
pub fn chi_square_uniform(counts: &[u64]) -> Result<ChiSquareResult> {
    ensure(counts.len() >= 2, "counts", || "need at least two bins".into())?;
    let total: u64 = counts.iter().sum();
    ensure(total > 0, "counts", || "all bins are empty".into())?;
    let expected = total as f64 / counts.len() as f64;
    let statistic = counts
        .iter()
        .map(|&c| (c as f64 - expected).powi(2) / expected)
        .sum::<f64>();
    let dof = counts.len() - 1;
    let dist = ChiSquared::new(dof as f64).expect("dof >= 1");
    Ok(ChiSquareResult {
        statistic,
        dof,
        p_value: dist.sf(statistic),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    pub counts: Vec<u64>,
}

impl Histogram {
    /// Bins samples into `bins` equal-width bins on `[lo, hi]`; samples
    /// outside the range are clamped into the edge bins.
    pub fn new(samples: &[f64], lo: f64, hi: f64, bins: usize) -> Result<Self> {
        ensure(bins >= 1, "bins", || "must be >= 1".into())?;
        ensure(lo.is_finite() && hi.is_finite() && hi > lo, "range", || {
            format!("need finite lo < hi, got [{lo}, {hi}]")
        })?;
        let mut counts = vec![0u64; bins];
        let width = (hi - lo) / bins as f64;
        for &x in samples {
            let i = ((x - lo) / width).floor();
            let i = if i.is_nan() { 0 } else { (i.max(0.0) as usize).min(bins - 1) };
            counts[i] += 1;
        }
        Ok(Self { lo, hi, counts })
    }

    pub fn bin_width(&self) -> f64 {
        (self.hi - self.lo) / self.counts.len() as f64
    }

    pub fn bin_center(&self, i: usize) -> f64 {
        self.lo + (i as f64 + 0.5) * self.bin_width()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}
