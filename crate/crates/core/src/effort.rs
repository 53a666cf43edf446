//! Individual mental effort from pupil activity, and joint mental effort.
//!
//! Mental effort (ME) is the Index of Pupillary Activity: the rate of
//! significant high-frequency modulus maxima in a one-level wavelet
//! decomposition of the pupil diameter. It is evaluated on sliding windows,
//! giving one ME sample per step. Joint mental effort (JME) compares the two
//! participants' ME samples inside each analysis window, either by
//! cross-recurrence of quantile-discretised values or by cosine similarity.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metric::{MetricName, MetricSeries};
use crate::session::{slice_window, DyadSession, Participant, PupilSample, SessionError, WindowGrid};
use crate::wavelet::{detail_coefficients, Wavelet};

/// Minimum number of valid samples for an IPA estimate.
pub const MIN_IPA_SAMPLES: usize = 8;

// Consistency constant turning a median absolute deviation into a Gaussian sd.
const MAD_TO_SD: f64 = 0.6745;

#[derive(Debug, Error, PartialEq)]
pub enum EffortError {
    #[error("need at least {MIN_IPA_SAMPLES} valid pupil samples, got {0}")]
    TooFewSamples(usize),
    #[error("series lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("empty series")]
    Empty,
    #[error("invalid effort configuration: {0}")]
    InvalidConfig(String),
    #[error("{0}")]
    Session(String),
}

impl From<SessionError> for EffortError {
    fn from(e: SessionError) -> Self {
        EffortError::Session(e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JmeMethod {
    #[default]
    Crqa,
    Cosine,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EffortConfig {
    pub ipa_window_s: f64,
    pub me_step_s: f64,
    pub n_bins: u32,
    pub jme_method: JmeMethod,
    pub jme_window_s: f64,
    pub wavelet: Wavelet,
    /// Longest invalid gap (between flanking valid samples) that is bridged
    /// by linear interpolation.
    pub blink_max_ms: u64,
}

impl Default for EffortConfig {
    fn default() -> Self {
        Self {
            ipa_window_s: 10.0,
            me_step_s: 1.0,
            n_bins: 21,
            jme_method: JmeMethod::Crqa,
            jme_window_s: 10.0,
            wavelet: Wavelet::Sym16,
            blink_max_ms: 500,
        }
    }
}

impl EffortConfig {
    pub fn validate(&self) -> Result<(), EffortError> {
        if self.n_bins < 2 {
            return Err(EffortError::InvalidConfig("n_bins must be at least 2".into()));
        }
        if !(self.me_step_s > 0.0 && self.ipa_window_s > 0.0 && self.jme_window_s > 0.0) {
            return Err(EffortError::InvalidConfig("window lengths must be positive".into()));
        }
        if self.me_step_s > self.jme_window_s {
            return Err(EffortError::InvalidConfig("me_step_s must not exceed jme_window_s".into()));
        }
        Ok(())
    }

    fn ipa_window_ms(&self) -> u64 {
        (self.ipa_window_s * 1000.0).round() as u64
    }

    fn step_ms(&self) -> u64 {
        ((self.me_step_s * 1000.0).round() as u64).max(1)
    }

    /// ME samples expected per JME window.
    pub fn samples_per_window(&self) -> usize {
        (self.jme_window_s / self.me_step_s).round() as usize
    }
}

/// Bridges short invalid runs (blinks) by linear interpolation between the
/// flanking valid samples. Runs whose flanking gap exceeds `max_gap_ms`, and
/// leading or trailing invalid runs, are left untouched.
pub fn clean_pupil(series: &[PupilSample], max_gap_ms: u64) -> Vec<PupilSample> {
    let mut out = series.to_vec();
    let mut prev_valid: Option<usize> = None;
    let mut i = 0;
    while i < out.len() {
        if out[i].valid {
            prev_valid = Some(i);
            i += 1;
            continue;
        }
        let run_start = i;
        while i < out.len() && !out[i].valid {
            i += 1;
        }
        let (Some(lo), true) = (prev_valid, i < out.len()) else { continue };
        let (left, right) = (out[lo], out[i]);
        if right.t_ms - left.t_ms > max_gap_ms {
            continue;
        }
        let span = (right.t_ms - left.t_ms) as f64;
        for s in &mut out[run_start..i] {
            let frac = if span > 0.0 { (s.t_ms - left.t_ms) as f64 / span } else { 0.5 };
            s.d_mm = left.d_mm + frac * (right.d_mm - left.d_mm);
            s.valid = true;
        }
    }
    out
}

/// Linearly resamples the valid samples onto a uniform grid at `rate_hz`.
fn resample_uniform(window: &[PupilSample], rate_hz: f64) -> Result<Vec<f64>, EffortError> {
    let valid: Vec<(f64, f64)> = window.iter().filter(|s| s.valid).map(|s| (s.t_ms as f64, s.d_mm)).collect();
    if valid.len() < MIN_IPA_SAMPLES {
        return Err(EffortError::TooFewSamples(valid.len()));
    }
    let t0 = valid[0].0;
    let span = valid[valid.len() - 1].0 - t0;
    let period = 1000.0 / rate_hz;
    let n = (span / period + 1e-9).floor() as usize + 1;
    if n < MIN_IPA_SAMPLES {
        return Err(EffortError::TooFewSamples(n));
    }
    let mut out = Vec::with_capacity(n);
    let mut j = 0;
    for i in 0..n {
        let t = t0 + i as f64 * period;
        while j + 2 < valid.len() && valid[j + 1].0 <= t {
            j += 1;
        }
        let (ta, da) = valid[j];
        let (tb, db) = valid[(j + 1).min(valid.len() - 1)];
        let v = if tb > ta { da + (db - da) * ((t - ta) / (tb - ta)).clamp(0.0, 1.0) } else { da };
        out.push(v);
    }
    Ok(out)
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.total_cmp(b));
    let n = values.len();
    if n == 0 {
        0.0
    } else if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Index of Pupillary Activity over one window, in maxima per second.
pub fn ipa(window: &[PupilSample], rate_hz: f64) -> Result<f64, EffortError> {
    ipa_with(window, rate_hz, Wavelet::Sym16)
}

pub fn ipa_with(window: &[PupilSample], rate_hz: f64, wavelet: Wavelet) -> Result<f64, EffortError> {
    let mut x = resample_uniform(window, rate_hz)?;
    let duration_s = x.len() as f64 / rate_hz;
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    x.iter_mut().for_each(|v| *v -= mean);
    let scale = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        return Ok(0.0);
    }
    // coefficients at rounding-noise level are not oscillations
    let floor = 1e-10 * scale;
    let modulus: Vec<f64> = detail_coefficients(&x, wavelet).iter().map(|c| c.abs()).collect();
    let m = modulus.len();
    if m < 2 {
        return Ok(0.0);
    }
    let sigma = median(&mut modulus.clone()) / MAD_TO_SD;
    let lambda = sigma * (2.0 * (m as f64).ln()).sqrt();
    let count = (0..m)
        .filter(|&i| {
            let c = modulus[i];
            let left = if i > 0 { modulus[i - 1] } else { 0.0 };
            let right = if i + 1 < m { modulus[i + 1] } else { 0.0 };
            c > lambda && c > floor && c >= left && c >= right && (c > left || c > right)
        })
        .count();
    Ok(count as f64 / duration_s)
}

/// ME signal of one participant over the whole recording. Each value is
/// stamped with the start of its IPA window; the window centre is
/// `start + ipa_window_s / 2`. Windows with too few samples are skipped.
pub fn me_series(session: &DyadSession, participant: Participant, cfg: &EffortConfig) -> Result<MetricSeries, EffortError> {
    cfg.validate()?;
    let name = match participant {
        Participant::A => MetricName::MeA,
        Participant::B => MetricName::MeB,
    };
    let cleaned = clean_pupil(&session.pupil[participant], cfg.blink_max_ms);
    let window_ms = cfg.ipa_window_ms();
    let step_ms = cfg.step_ms();
    let mut series = MetricSeries::new(name, cfg.ipa_window_s);
    let mut start = 0u64;
    while start + window_ms <= session.meta.duration_ms {
        let samples = slice_window(&cleaned, start, start + window_ms);
        match ipa_with(samples, session.meta.pupil_rate_hz, cfg.wavelet) {
            Ok(v) => series.values.push((start, v)),
            Err(EffortError::TooFewSamples(_)) => {}
            Err(e) => return Err(e),
        }
        start += step_ms;
    }
    Ok(series)
}

/// Per-participant quantile discretisation into `0..n_bins`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileBins {
    pub edges: Vec<f64>,
}

impl QuantileBins {
    pub fn fit(values: &[f64], n_bins: u32) -> Self {
        let mut sorted = values.to_vec();
        sorted.sort_by(|a, b| a.total_cmp(b));
        let n = sorted.len();
        let edges = if n == 0 {
            Vec::new()
        } else {
            (1..n_bins as usize).map(|i| sorted[(i * n / n_bins as usize).min(n - 1)]).collect()
        };
        Self { edges }
    }

    pub fn bin(&self, v: f64) -> u32 {
        self.edges.partition_point(|&e| e <= v) as u32
    }
}

/// Cross-recurrence rate (radius 0, delay 1, embedding 1): the fraction of
/// index pairs `(i, j)` with `a[i] == b[j]`.
pub fn crqa_rr(a: &[u32], b: &[u32]) -> Result<f64, EffortError> {
    if a.len() != b.len() {
        return Err(EffortError::LengthMismatch(a.len(), b.len()));
    }
    if a.is_empty() {
        return Err(EffortError::Empty);
    }
    let matches: usize = a.iter().map(|x| b.iter().filter(|y| *y == x).count()).sum();
    Ok(matches as f64 / (a.len() * a.len()) as f64)
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let na: f64 = a.iter().map(|v| v * v).sum();
    let nb: f64 = b.iter().map(|v| v * v).sum();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    (dot / (na * nb).sqrt()).clamp(0.0, 1.0)
}

/// ME samples whose window centre falls in `[start, end)`.
fn me_in_window(me: &MetricSeries, half_ms: u64, start: u64, end: u64) -> &[(u64, f64)] {
    let lo = me.values.partition_point(|&(t, _)| t + half_ms < start);
    let hi = me.values.partition_point(|&(t, _)| t + half_ms < end);
    &me.values[lo..hi.max(lo)]
}

/// Mean ME per window of `grid`; windows without ME samples are omitted.
pub fn windowed_me(me: &MetricSeries, grid: &WindowGrid) -> MetricSeries {
    let half_ms = (me.window_s * 500.0).round() as u64;
    let mut out = MetricSeries::new(me.name, grid.window_ms as f64 / 1000.0);
    for (start, end) in grid.iter() {
        let vals = me_in_window(me, half_ms, start, end);
        if !vals.is_empty() {
            out.values.push((start, vals.iter().map(|(_, v)| v).sum::<f64>() / vals.len() as f64));
        }
    }
    out
}

/// Discretisers fitted on each participant's full ME series.
pub fn fit_bins(me_a: &MetricSeries, me_b: &MetricSeries, cfg: &EffortConfig) -> (QuantileBins, QuantileBins) {
    (QuantileBins::fit(&me_a.raw(), cfg.n_bins), QuantileBins::fit(&me_b.raw(), cfg.n_bins))
}

/// JME on an arbitrary grid. Windows where either participant lacks the
/// full complement of ME samples are skipped.
pub fn jme_on_grid(
    me_a: &MetricSeries,
    me_b: &MetricSeries,
    bins: &(QuantileBins, QuantileBins),
    cfg: &EffortConfig,
    grid: &WindowGrid,
) -> MetricSeries {
    let half_ms = (cfg.ipa_window_s * 500.0).round() as u64;
    let k = cfg.samples_per_window();
    let mut out = MetricSeries::new(MetricName::Jme, grid.window_ms as f64 / 1000.0);
    for (start, end) in grid.iter() {
        let wa = me_in_window(me_a, half_ms, start, end);
        let wb = me_in_window(me_b, half_ms, start, end);
        if wa.len() != k || wb.len() != k {
            continue;
        }
        let value = match cfg.jme_method {
            JmeMethod::Crqa => {
                let da: Vec<u32> = wa.iter().map(|&(_, v)| bins.0.bin(v)).collect();
                let db: Vec<u32> = wb.iter().map(|&(_, v)| bins.1.bin(v)).collect();
                crqa_rr(&da, &db).expect("equal non-empty windows")
            }
            JmeMethod::Cosine => {
                let va: Vec<f64> = wa.iter().map(|&(_, v)| v).collect();
                let vb: Vec<f64> = wb.iter().map(|&(_, v)| v).collect();
                cosine(&va, &vb)
            }
        };
        out.values.push((start, value));
    }
    out
}

/// Per-window JME over the task span.
pub fn jme_series(session: &DyadSession, cfg: &EffortConfig) -> Result<MetricSeries, EffortError> {
    let me_a = me_series(session, Participant::A, cfg)?;
    let me_b = me_series(session, Participant::B, cfg)?;
    let grid = session.task_grid(cfg.jme_window_s)?;
    Ok(jme_on_grid(&me_a, &me_b, &fit_bins(&me_a, &me_b, cfg), cfg, &grid))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn samples(values: &[f64], rate_hz: f64) -> Vec<PupilSample> {
        values
            .iter()
            .enumerate()
            .map(|(i, &d)| PupilSample::new((i as f64 * 1000.0 / rate_hz).round() as u64, Participant::A, d, true))
            .collect()
    }

    #[test]
    fn clean_keeps_valid_series() {
        let s = samples(&[3.0, 3.1, 3.2, 3.3], 10.0);
        assert_eq!(clean_pupil(&s, 500), s);
    }

    #[test]
    fn clean_interpolates_short_gap() {
        let mut s = samples(&[3.0, 9.9, 4.0], 10.0);
        s[1].t_ms = 100;
        s[2].t_ms = 200;
        s[1].valid = false;
        let c = clean_pupil(&s, 500);
        assert!(c[1].valid);
        assert!((c[1].d_mm - 3.5).abs() < 1e-12);
    }

    #[test]
    fn clean_leaves_long_gap_and_edges() {
        let mut s = samples(&[3.0; 40], 20.0);
        for x in &mut s[5..=35] {
            x.valid = false;
        }
        s[0].valid = false;
        let c = clean_pupil(&s, 500);
        assert!(c[5..=35].iter().all(|x| !x.valid));
        assert!(!c[0].valid);
    }

    #[test]
    fn ipa_constant_is_zero() {
        let s = samples(&[4.2; 600], 60.0);
        assert_eq!(ipa(&s, 60.0).unwrap(), 0.0);
    }

    #[test]
    fn ipa_too_few_samples() {
        let s = samples(&[4.0; 5], 60.0);
        assert_eq!(ipa(&s, 60.0), Err(EffortError::TooFewSamples(5)));
    }

    fn noisy_ramp(seed: u64, n: usize) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|i| 3.0 + 0.0005 * i as f64 + 0.002 * (rng.random::<f64>() - 0.5)).collect()
    }

    #[test]
    fn ipa_detects_added_high_frequency_bursts() {
        let base = noisy_ramp(5, 600);
        let mut bursty = base.clone();
        for centre in [50usize, 130, 220, 300, 410, 520] {
            for (k, v) in bursty.iter_mut().enumerate() {
                let dist = k as f64 - centre as f64;
                *v += 0.05 * (-dist * dist / 8.0).exp() * if k % 2 == 0 { 1.0 } else { -1.0 };
            }
        }
        let plain = ipa(&samples(&base, 60.0), 60.0).unwrap();
        let with = ipa(&samples(&bursty, 60.0), 60.0).unwrap();
        assert!(with > plain, "{with} <= {plain}");
        // six bursts in ten seconds
        assert!((with - 0.6).abs() < 0.25, "{with}");
    }

    #[test]
    fn ipa_stable_under_window_doubling() {
        // stationary bursts at a fixed 1.5/s rate
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 1200;
        let mut x: Vec<f64> = (0..n).map(|_| 3.0 + 0.004 * (rng.random::<f64>() - 0.5)).collect();
        let mut centre = 20.0;
        while centre < n as f64 - 20.0 {
            for (k, v) in x.iter_mut().enumerate() {
                let d = k as f64 - centre;
                *v += 0.05 * (-d * d / 8.0).exp() * if k % 2 == 0 { 1.0 } else { -1.0 };
            }
            centre += 40.0;
        }
        let short = ipa(&samples(&x[..600], 60.0), 60.0).unwrap();
        let long = ipa(&samples(&x, 60.0), 60.0).unwrap();
        assert!(((long - short) / short).abs() < 0.2, "{short} vs {long}");
    }

    #[test]
    fn crqa_fixtures() {
        assert_eq!(crqa_rr(&[4, 4, 4], &[4, 4, 4]).unwrap(), 1.0);
        assert!((crqa_rr(&[1, 2, 3], &[1, 2, 3]).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(crqa_rr(&[1, 2, 3], &[4, 5, 6]).unwrap(), 0.0);
        assert_eq!(crqa_rr(&[1, 2], &[1]), Err(EffortError::LengthMismatch(2, 1)));
        assert_eq!(crqa_rr(&[], &[]), Err(EffortError::Empty));
    }

    #[test]
    fn cosine_zero_window() {
        assert_eq!(cosine(&[0.0; 10], &[1.0; 10]), 0.0);
        assert!((cosine(&[1.0, 2.0], &[2.0, 4.0]) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn quantile_bins_ties_share_a_bin() {
        let bins = QuantileBins::fit(&[0.0; 30], 21);
        assert!((0..5).all(|_| bins.bin(0.0) == bins.bin(0.0)));
        let b = QuantileBins::fit(&[1.0, 2.0, 3.0, 4.0], 2);
        assert_eq!((b.bin(1.0), b.bin(2.0), b.bin(3.0), b.bin(4.0)), (0, 0, 1, 1));
    }

    #[test]
    fn config_validation() {
        assert!(EffortConfig::default().validate().is_ok());
        let bad = EffortConfig { n_bins: 1, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = EffortConfig { me_step_s: 20.0, ..Default::default() };
        assert!(bad.validate().is_err());
    }

    proptest! {
        #[test]
        fn quantile_occupancy_near_uniform(values in prop::collection::hash_set(-1_000_000i64..1_000_000, 1..400), n_bins in 2u32..30) {
            let values: Vec<f64> = values.into_iter().map(|v| v as f64 / 1000.0).collect();
            let bins = QuantileBins::fit(&values, n_bins);
            let mut occ = vec![0usize; n_bins as usize];
            for &v in &values {
                occ[bins.bin(v) as usize] += 1;
            }
            let expected = values.len() as f64 / n_bins as f64;
            for o in occ {
                prop_assert!((o as f64 - expected).abs() < 2.0);
            }
        }

        #[test]
        fn crqa_invariant_under_relabeling(a in prop::collection::vec(0u32..6, 1..30), seed in 0u64..100) {
            let b: Vec<u32> = a.iter().map(|x| (x * 7 + seed as u32) % 6).collect();
            let perm = [3u32, 0, 5, 1, 4, 2];
            let pa: Vec<u32> = a.iter().map(|&x| perm[x as usize] + 10).collect();
            let pb: Vec<u32> = b.iter().map(|&x| perm[x as usize] + 10).collect();
            prop_assert_eq!(crqa_rr(&a, &b).unwrap(), crqa_rr(&pa, &pb).unwrap());
            prop_assert_eq!(crqa_rr(&a, &b).unwrap(), crqa_rr(&b, &a).unwrap());
        }

        #[test]
        fn ipa_non_negative(values in prop::collection::vec(2.0f64..6.0, 8..200)) {
            let v = ipa(&samples(&values, 60.0), 60.0).unwrap();
            prop_assert!(v >= 0.0);
        }
    }
}
