//! Granger-style causal summaries between two metric series.
//!
//! For a pair `(x, y)` two directional models are fitted ("x helps predict
//! y" and the reverse) together with a contemporaneous correlational model.
//! Effect size is the difference of the two directional partial η²;
//! significance is the better directional η² minus the correlational η².
//! The pair is then placed in one of four quadrants.

use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{ridge_fit, sse};

pub const DEFAULT_MAX_LAG: usize = 10;
const RIDGE: f64 = 1e-10;

#[derive(Debug, Error, PartialEq)]
pub enum CausalityError {
    #[error("series too short: n = {n} needs more than {needed} for lag {lag}")]
    TooShort { n: usize, lag: usize, needed: usize },
    #[error("series has zero variance after detrending")]
    DegenerateSeries,
    #[error("series lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("lag must be at least 1")]
    ZeroLag,
    #[error("no results to summarise")]
    Empty,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Quadrant {
    I,
    II,
    III,
    IV,
}

impl Quadrant {
    pub const ALL: [Quadrant; 4] = [Quadrant::I, Quadrant::II, Quadrant::III, Quadrant::IV];

    /// A positive significance with exactly zero effect is placed in IV.
    pub fn classify(significance: f64, effect_size: f64) -> Quadrant {
        match (significance > 0.0, effect_size > 0.0) {
            (true, true) => Quadrant::I,
            (true, false) => Quadrant::IV,
            (false, true) => Quadrant::II,
            (false, false) => Quadrant::III,
        }
    }
}

impl fmt::Display for Quadrant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Quadrant::I => "I",
            Quadrant::II => "II",
            Quadrant::III => "III",
            Quadrant::IV => "IV",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Eta2 {
    pub eta2_xy: f64,
    pub eta2_yx: f64,
    pub eta2_corr: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CausalityResult {
    pub eta2_xy: f64,
    pub eta2_yx: f64,
    pub eta2_corr: f64,
    pub effect_size: f64,
    pub significance: f64,
    pub lag: usize,
    pub quadrant: Quadrant,
}

fn min_len(lag: usize) -> usize {
    3 * lag + 5
}

/// Removes the least-squares line and scales to unit variance.
fn detrend_standardize(v: &[f64]) -> Result<Vec<f64>, CausalityError> {
    let n = v.len() as f64;
    let t_mean = (n - 1.0) / 2.0;
    let v_mean = v.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (i, &y) in v.iter().enumerate() {
        let dt = i as f64 - t_mean;
        sxy += dt * (y - v_mean);
        sxx += dt * dt;
    }
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let resid: Vec<f64> = v.iter().enumerate().map(|(i, &y)| y - v_mean - slope * (i as f64 - t_mean)).collect();
    let var = resid.iter().map(|r| r * r).sum::<f64>() / n;
    let scale = v.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(1.0);
    if !(var.sqrt() > 1e-12 * scale) {
        return Err(CausalityError::DegenerateSeries);
    }
    let sd = var.sqrt();
    Ok(resid.into_iter().map(|r| r / sd).collect())
}

fn prepare(x: &[f64], y: &[f64], lag: usize) -> Result<(Vec<f64>, Vec<f64>), CausalityError> {
    if x.len() != y.len() {
        return Err(CausalityError::LengthMismatch(x.len(), y.len()));
    }
    if lag == 0 {
        return Err(CausalityError::ZeroLag);
    }
    if x.len() <= min_len(lag) {
        return Err(CausalityError::TooShort { n: x.len(), lag, needed: min_len(lag) });
    }
    Ok((detrend_standardize(x)?, detrend_standardize(y)?))
}

/// Design rows for predicting `target[t]`, `t in start..n`, from an intercept,
/// `lag` own lags and, if given, `lag` lags of `other`.
fn design(target: &[f64], other: Option<&[f64]>, lag: usize, start: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
    let n = target.len();
    let rows = (start..n)
        .map(|t| {
            let mut r = Vec::with_capacity(1 + 2 * lag);
            r.push(1.0);
            r.extend((1..=lag).map(|k| target[t - k]));
            if let Some(o) = other {
                r.extend((1..=lag).map(|k| o[t - k]));
            }
            r
        })
        .collect();
    (rows, target[start..].to_vec())
}

fn fit_sse(target: &[f64], other: Option<&[f64]>, lag: usize, start: usize) -> f64 {
    let (rows, y) = design(target, other, lag, start);
    let beta = ridge_fit(&rows, &y, RIDGE).expect("ridge-regularised Gram matrix is positive definite");
    sse(&rows, &y, &beta)
}

fn partial_eta2(target: &[f64], other: &[f64], lag: usize, start: usize) -> f64 {
    let restricted = fit_sse(target, None, lag, start);
    let full = fit_sse(target, Some(other), lag, start);
    if restricted <= 0.0 {
        return 0.0;
    }
    ((restricted - full) / restricted).clamp(0.0, 1.0)
}

fn pearson_sq(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return 0.0;
    }
    (sxy * sxy / (sxx * syy)).clamp(0.0, 1.0)
}

fn eta2_prepared(x: &[f64], y: &[f64], lag: usize) -> Eta2 {
    Eta2 {
        eta2_xy: partial_eta2(y, x, lag, lag),
        eta2_yx: partial_eta2(x, y, lag, lag),
        eta2_corr: pearson_sq(x, y),
    }
}

/// Directional partial η² and contemporaneous η² at a fixed lag.
pub fn eta2_models(x: &[f64], y: &[f64], lag: usize) -> Result<Eta2, CausalityError> {
    let (xs, ys) = prepare(x, y, lag)?;
    Ok(eta2_prepared(&xs, &ys, lag))
}

/// BIC of both full directional models at `lag`, fitted on the common
/// sample starting at `start`.
fn joint_bic(x: &[f64], y: &[f64], lag: usize, start: usize) -> f64 {
    let n_eff = (x.len() - start) as f64;
    let sse_y = fit_sse(y, Some(x), lag, start).max(f64::MIN_POSITIVE);
    let sse_x = fit_sse(x, Some(y), lag, start).max(f64::MIN_POSITIVE);
    let params = 2.0 * (2 * lag + 1) as f64;
    n_eff * (sse_y / n_eff).ln() + n_eff * (sse_x / n_eff).ln() + params * n_eff.ln()
}

/// Selects one lag for both directions by BIC over `1..=max_lag` (capped so
/// that the series stays long enough) and summarises the pair.
pub fn causality_summary(x: &[f64], y: &[f64], max_lag: usize) -> Result<CausalityResult, CausalityError> {
    let (xs, ys) = prepare(x, y, 1)?;
    if max_lag == 0 {
        return Err(CausalityError::ZeroLag);
    }
    let n = xs.len();
    let top = (1..=max_lag).take_while(|&l| n > min_len(l)).last().unwrap_or(1);
    let lag = (1..=top)
        .map(|l| (l, joint_bic(&xs, &ys, l, top)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(l, _)| l)
        .unwrap_or(1);
    let e = eta2_prepared(&xs, &ys, lag);
    let effect_size = e.eta2_xy - e.eta2_yx;
    let significance = e.eta2_xy.max(e.eta2_yx) - e.eta2_corr;
    Ok(CausalityResult {
        eta2_xy: e.eta2_xy,
        eta2_yx: e.eta2_yx,
        eta2_corr: e.eta2_corr,
        effect_size,
        significance,
        lag,
        quadrant: Quadrant::classify(significance, effect_size),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadrantCounts {
    #[serde(rename = "I")]
    pub i: usize,
    #[serde(rename = "II")]
    pub ii: usize,
    #[serde(rename = "III")]
    pub iii: usize,
    #[serde(rename = "IV")]
    pub iv: usize,
}

impl QuadrantCounts {
    pub fn get(&self, q: Quadrant) -> usize {
        match q {
            Quadrant::I => self.i,
            Quadrant::II => self.ii,
            Quadrant::III => self.iii,
            Quadrant::IV => self.iv,
        }
    }

    pub fn total(&self) -> usize {
        self.i + self.ii + self.iii + self.iv
    }
}

pub fn quadrant_summary(results: &[(String, CausalityResult)]) -> Result<QuadrantCounts, CausalityError> {
    if results.is_empty() {
        return Err(CausalityError::Empty);
    }
    let mut c = QuadrantCounts { i: 0, ii: 0, iii: 0, iv: 0 };
    for (_, r) in results {
        match r.quadrant {
            Quadrant::I => c.i += 1,
            Quadrant::II => c.ii += 1,
            Quadrant::III => c.iii += 1,
            Quadrant::IV => c.iv += 1,
        }
    }
    Ok(c)
}

/// Scatter CSV: `dyad_id,significance,effect_size,quadrant,lag`.
pub fn write_scatter_csv<W: Write>(results: &[(String, CausalityResult)], mut out: W) -> std::io::Result<()> {
    writeln!(out, "dyad_id,significance,effect_size,quadrant,lag")?;
    for (id, r) in results {
        writeln!(out, "{id},{},{},{},{}", r.significance, r.effect_size, r.quadrant, r.lag)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn noise(seed: u64, n: usize) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
    }

    #[test]
    fn exact_lag_is_recovered() {
        let x = noise(1, 300);
        let mut y = vec![0.0];
        y.extend_from_slice(&x[..299]);
        let e = eta2_models(&x, &y, 1).unwrap();
        assert!(e.eta2_xy > 0.99, "{e:?}");
        assert!(e.eta2_yx < 0.05, "{e:?}");
        let r = causality_summary(&x, &y, 10).unwrap();
        assert_eq!(r.quadrant, Quadrant::I);
        let r = causality_summary(&y, &x, 10).unwrap();
        assert_eq!(r.quadrant, Quadrant::IV);
    }

    #[test]
    fn independent_noise_gives_small_eta2() {
        let ok = (0..100u64)
            .filter(|&s| {
                let e = eta2_models(&noise(2 * s, 500), &noise(2 * s + 1, 500), 2).unwrap();
                e.eta2_xy < 0.05 && e.eta2_yx < 0.05 && e.eta2_corr < 0.05
            })
            .count();
        assert!(ok >= 95, "{ok}");
    }

    #[test]
    fn identical_series_are_correlational() {
        let x = noise(3, 200);
        let r = causality_summary(&x, &x, 5).unwrap();
        assert!((r.eta2_corr - 1.0).abs() < 1e-12);
        assert!(r.significance <= 0.0);
    }

    #[test]
    fn errors() {
        let x = noise(4, 8);
        assert!(matches!(eta2_models(&x, &x, 1), Err(CausalityError::TooShort { .. })));
        assert_eq!(eta2_models(&x, &x[..7], 1), Err(CausalityError::LengthMismatch(8, 7)));
        let flat = vec![1.0; 50];
        assert_eq!(eta2_models(&flat, &noise(5, 50), 2), Err(CausalityError::DegenerateSeries));
        let ramp: Vec<f64> = (0..50).map(|i| i as f64).collect();
        assert_eq!(eta2_models(&ramp, &noise(5, 50), 2), Err(CausalityError::DegenerateSeries));
        assert_eq!(quadrant_summary(&[]), Err(CausalityError::Empty));
    }

    #[test]
    fn quadrant_rule() {
        assert_eq!(Quadrant::classify(0.1, 0.2), Quadrant::I);
        assert_eq!(Quadrant::classify(-0.1, 0.2), Quadrant::II);
        assert_eq!(Quadrant::classify(0.0, 0.2), Quadrant::II);
        assert_eq!(Quadrant::classify(-0.1, -0.2), Quadrant::III);
        assert_eq!(Quadrant::classify(0.0, 0.0), Quadrant::III);
        assert_eq!(Quadrant::classify(0.1, -0.2), Quadrant::IV);
    }

    fn result(sig: f64, eff: f64) -> CausalityResult {
        CausalityResult {
            eta2_xy: 0.0,
            eta2_yx: 0.0,
            eta2_corr: 0.0,
            effect_size: eff,
            significance: sig,
            lag: 1,
            quadrant: Quadrant::classify(sig, eff),
        }
    }

    #[test]
    fn summary_counts_and_csv() {
        let all_i: Vec<_> = (0..3).map(|i| (format!("d{i}"), result(0.1, 0.1))).collect();
        assert_eq!(quadrant_summary(&all_i).unwrap(), QuadrantCounts { i: 3, ii: 0, iii: 0, iv: 0 });
        let mixed = vec![
            ("a".to_string(), result(0.1, 0.1)),
            ("b".to_string(), result(-0.1, 0.1)),
            ("c".to_string(), result(-0.1, -0.1)),
            ("d".to_string(), result(0.1, -0.1)),
            ("e".to_string(), result(0.2, -0.3)),
        ];
        let c = quadrant_summary(&mixed).unwrap();
        assert_eq!((c.i, c.ii, c.iii, c.iv, c.total()), (1, 1, 1, 2, 5));
        let mut buf = Vec::new();
        write_scatter_csv(&mixed[..1], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "dyad_id,significance,effect_size,quadrant,lag\na,0.1,0.1,I,1\n");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn swap_antisymmetry(seed in 0u64..10_000, mix in 0.0f64..1.0) {
            let x = noise(seed, 120);
            let z = noise(seed + 1, 120);
            let y: Vec<f64> = (0..120).map(|t| mix * if t > 0 { x[t - 1] } else { 0.0 } + z[t]).collect();
            let r = causality_summary(&x, &y, 6).unwrap();
            let s = causality_summary(&y, &x, 6).unwrap();
            prop_assert_eq!(r.lag, s.lag);
            prop_assert!((r.effect_size + s.effect_size).abs() < 1e-12);
            prop_assert!((r.significance - s.significance).abs() < 1e-12);
        }

        #[test]
        fn affine_invariance(seed in 0u64..10_000, a in 0.1f64..50.0, b in -100.0f64..100.0) {
            let x = noise(seed, 80);
            let y: Vec<f64> = noise(seed + 7, 80).iter().zip(&x).map(|(z, v)| z + 0.5 * v).collect();
            let e1 = eta2_models(&x, &y, 3).unwrap();
            let xt: Vec<f64> = x.iter().map(|v| a * v + b).collect();
            let e2 = eta2_models(&xt, &y, 3).unwrap();
            prop_assert!((e1.eta2_xy - e2.eta2_xy).abs() < 1e-9);
            prop_assert!((e1.eta2_yx - e2.eta2_yx).abs() < 1e-9);
            prop_assert!((e1.eta2_corr - e2.eta2_corr).abs() < 1e-9);
        }

        #[test]
        fn eta2_in_unit_interval(seed in 0u64..10_000, lag in 1usize..6) {
            let e = eta2_models(&noise(seed, 60), &noise(seed + 3, 60), lag).unwrap();
            for v in [e.eta2_xy, e.eta2_yx, e.eta2_corr] {
                prop_assert!((0.0..=1.0).contains(&v));
            }
        }
    }
}
