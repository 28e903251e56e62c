//! Descriptive statistics and the two-sample test used on group incomes.

mod special;

pub use special::{ln_gamma, regularized_incomplete_beta, student_t_cdf, student_t_two_sided};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geo::Zone;
use crate::network::{Group, ZoneMetrics};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("{what} needs at least {needed} values, got {got}")]
    TooFewValues {
        what: &'static str,
        needed: usize,
        got: usize,
    },
    #[error("{0}: non-finite input value")]
    NonFinite(&'static str),
    #[error("{0}: variance is zero")]
    ZeroVariance(&'static str),
    #[error("alpha must lie strictly between 0 and 1, got {0}")]
    InvalidAlpha(f64),
    #[error("histogram needs at least one bin")]
    NoBins,
}

fn check_finite(values: &[f64], what: &'static str) -> Result<(), StatsError> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(StatsError::NonFinite(what))
    }
}

fn sorted(values: &[f64]) -> Vec<f64> {
    let mut s = values.to_vec();
    s.sort_by(f64::total_cmp);
    s
}

pub fn mean(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        None
    } else {
        Some(values.iter().sum::<f64>() / values.len() as f64)
    }
}

/// Interpolated median: the average of the two central values for even n.
pub fn median(values: &[f64]) -> Result<f64, StatsError> {
    if values.is_empty() {
        return Err(StatsError::TooFewValues {
            what: "median",
            needed: 1,
            got: 0,
        });
    }
    check_finite(values, "median")?;
    let s = sorted(values);
    let n = s.len();
    Ok(if n % 2 == 1 {
        s[n / 2]
    } else {
        (s[n / 2 - 1] + s[n / 2]) / 2.0
    })
}

/// A median and, per input value, whether it is at or above the median.
#[derive(Debug, Clone, PartialEq)]
pub struct MedianSplit {
    pub median: f64,
    pub high: Vec<bool>,
}

/// Splits values at their median, at-or-above counting as high.
///
/// The comparison uses the order statistics rather than the rounded
/// midpoint, so the split depends only on the ranks of the values.
pub fn median_split(values: &[f64]) -> Result<MedianSplit, StatsError> {
    let median = median(values)?;
    let s = sorted(values);
    let n = s.len();
    let high: Vec<bool> = if n % 2 == 1 {
        let mid = s[n / 2];
        values.iter().map(|&v| v >= mid).collect()
    } else {
        let (lo, hi) = (s[n / 2 - 1], s[n / 2]);
        if lo == hi {
            values.iter().map(|&v| v >= lo).collect()
        } else {
            values.iter().map(|&v| v > lo).collect()
        }
    };
    Ok(MedianSplit { median, high })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SkewnessVariant {
    /// Adjusted Fisher–Pearson coefficient G1.
    #[default]
    Adjusted,
    /// Moment coefficient g1 = m3 / m2^1.5.
    Biased,
}

impl fmt::Display for SkewnessVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SkewnessVariant::Adjusted => "adjusted",
            SkewnessVariant::Biased => "biased",
        })
    }
}

impl FromStr for SkewnessVariant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "adjusted" => Ok(SkewnessVariant::Adjusted),
            "biased" => Ok(SkewnessVariant::Biased),
            other => Err(format!("unknown skewness variant {other:?}")),
        }
    }
}

pub fn skewness(values: &[f64], variant: SkewnessVariant) -> Result<f64, StatsError> {
    let n = values.len();
    if n < 3 {
        return Err(StatsError::TooFewValues {
            what: "skewness",
            needed: 3,
            got: n,
        });
    }
    check_finite(values, "skewness")?;
    let nf = n as f64;
    let m = values.iter().sum::<f64>() / nf;
    let (mut m2, mut m3) = (0.0, 0.0);
    for &v in values {
        let d = v - m;
        m2 += d * d;
        m3 += d * d * d;
    }
    m2 /= nf;
    m3 /= nf;
    let scale = values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if m2 <= (1e-14 * scale).powi(2) {
        return Err(StatsError::ZeroVariance("skewness"));
    }
    let g1 = m3 / m2.powf(1.5);
    Ok(match variant {
        SkewnessVariant::Biased => g1,
        SkewnessVariant::Adjusted => g1 * (nf * (nf - 1.0)).sqrt() / (nf - 2.0),
    })
}

fn sample_variance(values: &[f64], m: f64) -> f64 {
    values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (values.len() - 1) as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TTestResult {
    pub mean_a: f64,
    pub mean_b: f64,
    pub n_a: usize,
    pub n_b: usize,
    pub t_statistic: f64,
    pub degrees_of_freedom: f64,
    /// Two-sided.
    pub p_value: f64,
    pub alpha: f64,
    pub significant: bool,
}

/// Welch's unequal-variance two-sample t-test, two-sided.
pub fn welch_t_test(a: &[f64], b: &[f64], alpha: f64) -> Result<TTestResult, StatsError> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(StatsError::InvalidAlpha(alpha));
    }
    for s in [a, b] {
        if s.len() < 2 {
            return Err(StatsError::TooFewValues {
                what: "t-test sample",
                needed: 2,
                got: s.len(),
            });
        }
        check_finite(s, "t-test")?;
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (ma, mb) = (mean(a).unwrap(), mean(b).unwrap());
    let (va, vb) = (sample_variance(a, ma), sample_variance(b, mb));
    if va == 0.0 && vb == 0.0 {
        return Err(StatsError::ZeroVariance("t-test"));
    }
    let (qa, qb) = (va / na, vb / nb);
    let se2 = qa + qb;
    let t = (ma - mb) / se2.sqrt();
    let df = se2 * se2 / (qa * qa / (na - 1.0) + qb * qb / (nb - 1.0));
    let p = student_t_two_sided(t, df);
    Ok(TTestResult {
        mean_a: ma,
        mean_b: mb,
        n_a: a.len(),
        n_b: b.len(),
        t_statistic: t,
        degrees_of_freedom: df,
        p_value: p,
        alpha,
        significant: p < alpha,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupSummary {
    pub group: Group,
    pub count: usize,
    /// Mean over zones with a known income; `None` if there are none.
    pub mean_income: Option<f64>,
    pub income_missing: usize,
}

/// Incomes of the zones in `group`, skipping zones without one.
pub fn group_incomes(metrics: &[ZoneMetrics], zones: &[Zone], group: Group) -> Vec<f64> {
    let income: std::collections::HashMap<&str, Option<f64>> = zones
        .iter()
        .map(|z| (z.zone_id.as_str(), z.median_household_income))
        .collect();
    metrics
        .iter()
        .filter(|m| m.group == Some(group))
        .filter_map(|m| income.get(m.zone_id.as_str()).copied().flatten())
        .collect()
}

/// Per-group zone counts and mean income, G1 through G4.
pub fn group_income_summary(metrics: &[ZoneMetrics], zones: &[Zone]) -> Vec<GroupSummary> {
    Group::ALL
        .iter()
        .map(|&g| {
            let count = metrics.iter().filter(|m| m.group == Some(g)).count();
            let incomes = group_incomes(metrics, zones, g);
            GroupSummary {
                group: g,
                count,
                mean_income: mean(&incomes),
                income_missing: count - incomes.len(),
            }
        })
        .collect()
}

/// Equal-width histogram; the last bin is closed on the right.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Histogram {
    /// `bins + 1` edges.
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
}

impl Histogram {
    /// Bins `values` over `range`, or over [min, max] of the data when
    /// `range` is `None`. Values outside an explicit range are not counted.
    pub fn new(values: &[f64], bins: usize, range: Option<(f64, f64)>) -> Result<Self, StatsError> {
        if bins == 0 {
            return Err(StatsError::NoBins);
        }
        check_finite(values, "histogram")?;
        let (lo, hi) = match range {
            Some(r) => r,
            None if values.is_empty() => (0.0, 1.0),
            None => {
                let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                (lo, hi)
            }
        };
        let (lo, hi) = if hi > lo {
            (lo, hi)
        } else {
            (lo - 0.5, lo + 0.5)
        };
        let width = (hi - lo) / bins as f64;
        let edges: Vec<f64> = (0..=bins)
            .map(|i| if i == bins { hi } else { lo + width * i as f64 })
            .collect();
        let mut counts = vec![0u64; bins];
        for &v in values {
            if v < lo || v > hi {
                continue;
            }
            let mut k = (((v - lo) / width) as usize).min(bins - 1);
            // Correct for rounding so every value lands in [edges[k], edges[k+1]).
            while k > 0 && v < edges[k] {
                k -= 1;
            }
            while k + 1 < bins && v >= edges[k + 1] {
                k += 1;
            }
            counts[k] += 1;
        }
        Ok(Histogram { edges, counts })
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}
