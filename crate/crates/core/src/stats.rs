//! One-way ANOVA family and the F distribution.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("need at least 2 groups, got {0}")]
    TooFewGroups(usize),
    #[error("group {0} has fewer than 2 values")]
    TooFewValues(usize),
    #[error("group {0} has zero variance")]
    ZeroVariance(usize),
    #[error("argument out of domain: {0}")]
    Domain(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnovaResult {
    pub f: f64,
    pub df1: f64,
    pub df2: f64,
    pub p: f64,
}

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// Natural log of the gamma function for `x > 0`.
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // reflection
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let t = x + LANCZOS_G + 0.5;
    let series = LANCZOS[1..].iter().enumerate().fold(LANCZOS[0], |acc, (i, c)| acc + c / (x + i as f64 + 1.0));
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + series.ln()
}

/// Continued fraction for the incomplete beta function (modified Lentz).
fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-15;
    let (qab, qap, qam) = (a + b, a + 1.0, a - 1.0);
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=300 {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Regularised incomplete beta `I_x(a, b)`.
pub fn inc_beta(x: f64, a: f64, b: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    if x < (a + 1.0) / (a + b + 2.0) {
        ln_front.exp() * beta_cf(a, b, x) / a
    } else {
        1.0 - ln_front.exp() * beta_cf(b, a, 1.0 - x) / b
    }
}

/// CDF of the F distribution with `(d1, d2)` degrees of freedom.
pub fn f_cdf(x: f64, d1: f64, d2: f64) -> Result<f64, StatsError> {
    if !(d1 > 0.0 && d2 > 0.0) {
        return Err(StatsError::Domain(format!("degrees of freedom ({d1}, {d2}) must be positive")));
    }
    if x.is_nan() || x < 0.0 {
        return Err(StatsError::Domain(format!("F value {x} must be non-negative")));
    }
    if x.is_infinite() {
        return Ok(1.0);
    }
    Ok(inc_beta(d1 * x / (d1 * x + d2), d1 / 2.0, d2 / 2.0))
}

/// Upper-tail probability of the F distribution.
pub fn f_sf(x: f64, d1: f64, d2: f64) -> Result<f64, StatsError> {
    if !(d1 > 0.0 && d2 > 0.0) || x.is_nan() || x < 0.0 {
        return f_cdf(x, d1, d2);
    }
    if x.is_infinite() {
        return Ok(0.0);
    }
    // complement evaluated directly keeps precision for tiny p
    Ok(inc_beta(d2 / (d2 + d1 * x), d2 / 2.0, d1 / 2.0))
}

fn check_groups(groups: &[Vec<f64>]) -> Result<(), StatsError> {
    if groups.len() < 2 {
        return Err(StatsError::TooFewGroups(groups.len()));
    }
    if let Some(i) = groups.iter().position(|g| g.len() < 2) {
        return Err(StatsError::TooFewValues(i));
    }
    Ok(())
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn sample_var(v: &[f64]) -> f64 {
    let m = mean(v);
    v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() - 1) as f64
}

/// Classical one-way ANOVA. `F` is 0 when both sums of squares vanish and
/// infinite when only the within-group sum does.
pub fn one_way_anova(groups: &[Vec<f64>]) -> Result<AnovaResult, StatsError> {
    check_groups(groups)?;
    let k = groups.len() as f64;
    let n: usize = groups.iter().map(Vec::len).sum();
    let grand = groups.iter().flatten().sum::<f64>() / n as f64;
    let ssb: f64 = groups.iter().map(|g| g.len() as f64 * (mean(g) - grand).powi(2)).sum();
    let ssw: f64 = groups.iter().map(|g| {
        let m = mean(g);
        g.iter().map(|x| (x - m) * (x - m)).sum::<f64>()
    }).sum();
    let (df1, df2) = (k - 1.0, n as f64 - k);
    let f = if ssw > 0.0 {
        (ssb / df1) / (ssw / df2)
    } else if ssb > 0.0 {
        f64::INFINITY
    } else {
        0.0
    };
    Ok(AnovaResult { f, df1, df2, p: f_sf(f, df1, df2)? })
}

/// Welch's heteroscedastic one-way ANOVA.
pub fn welch_anova(groups: &[Vec<f64>]) -> Result<AnovaResult, StatsError> {
    check_groups(groups)?;
    let k = groups.len() as f64;
    let mut w = Vec::with_capacity(groups.len());
    for (i, g) in groups.iter().enumerate() {
        let v = sample_var(g);
        if !(v > 0.0) {
            return Err(StatsError::ZeroVariance(i));
        }
        w.push(g.len() as f64 / v);
    }
    let sw: f64 = w.iter().sum();
    let means: Vec<f64> = groups.iter().map(|g| mean(g)).collect();
    let weighted_mean = w.iter().zip(&means).map(|(w, m)| w * m).sum::<f64>() / sw;
    let between = w.iter().zip(&means).map(|(w, m)| w * (m - weighted_mean).powi(2)).sum::<f64>() / (k - 1.0);
    let tmp = groups
        .iter()
        .zip(&w)
        .map(|(g, wi)| (1.0 - wi / sw).powi(2) / (g.len() as f64 - 1.0))
        .sum::<f64>()
        / (k * k - 1.0);
    let f = between / (1.0 + 2.0 * (k - 2.0) * tmp);
    let (df1, df2) = (k - 1.0, 1.0 / (3.0 * tmp));
    Ok(AnovaResult { f, df1, df2, p: f_sf(f, df1, df2)? })
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(|a, b| a.total_cmp(b));
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        (s[n / 2 - 1] + s[n / 2]) / 2.0
    }
}

/// Brown–Forsythe form of Levene's test: ANOVA on absolute deviations from
/// each group's median.
pub fn levene_bf(groups: &[Vec<f64>]) -> Result<AnovaResult, StatsError> {
    check_groups(groups)?;
    let deviations: Vec<Vec<f64>> = groups
        .iter()
        .map(|g| {
            let m = median(g);
            g.iter().map(|x| (x - m).abs()).collect()
        })
        .collect();
    one_way_anova(&deviations)
}

/// Bonferroni-adjusted p-values, capped at 1.
pub fn bonferroni(p: &[f64]) -> Vec<f64> {
    let m = p.len() as f64;
    p.iter().map(|v| (v * m).min(1.0)).collect()
}
