//! Median-cut episode classification of aligned JME and JVA windows.

use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metric::MetricSeries;

#[derive(Debug, Error, PartialEq)]
pub enum EpisodeError {
    #[error("window grids differ at index {index}: JME starts {jme_ms} ms, JVA starts {jva_ms} ms")]
    Alignment { index: usize, jme_ms: u64, jva_ms: u64 },
    #[error("window grids differ in length: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("no classified windows")]
    Empty,
}

/// First letter is JME, second is JVA.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EpisodeLabel {
    HH,
    HL,
    LH,
    LL,
}

impl EpisodeLabel {
    pub const ALL: [EpisodeLabel; 4] = [EpisodeLabel::HH, EpisodeLabel::HL, EpisodeLabel::LH, EpisodeLabel::LL];

    pub fn from_levels(high_jme: bool, high_jva: bool) -> Self {
        match (high_jme, high_jva) {
            (true, true) => EpisodeLabel::HH,
            (true, false) => EpisodeLabel::HL,
            (false, true) => EpisodeLabel::LH,
            (false, false) => EpisodeLabel::LL,
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for EpisodeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSeries {
    pub window_s: f64,
    pub labels: Vec<(u64, EpisodeLabel)>,
    pub jme_median: f64,
    pub jva_median: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeProportions {
    #[serde(rename = "HH")]
    pub hh: f64,
    #[serde(rename = "HL")]
    pub hl: f64,
    #[serde(rename = "LH")]
    pub lh: f64,
    #[serde(rename = "LL")]
    pub ll: f64,
}

impl EpisodeProportions {
    pub fn get(&self, label: EpisodeLabel) -> f64 {
        match label {
            EpisodeLabel::HH => self.hh,
            EpisodeLabel::HL => self.hl,
            EpisodeLabel::LH => self.lh,
            EpisodeLabel::LL => self.ll,
        }
    }
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// Classifies each window as high (strictly above the dyad's median) or low
/// on both dimensions. Both series must share the same window starts.
pub fn classify_episodes(jme: &MetricSeries, jva: &MetricSeries) -> Result<EpisodeSeries, EpisodeError> {
    if jme.len() != jva.len() {
        return Err(EpisodeError::LengthMismatch(jme.len(), jva.len()));
    }
    if let Some((index, (a, b))) =
        jme.values.iter().zip(&jva.values).enumerate().find(|(_, (a, b))| a.0 != b.0)
    {
        return Err(EpisodeError::Alignment { index, jme_ms: a.0, jva_ms: b.0 });
    }
    let jme_median = median(&jme.raw());
    let jva_median = median(&jva.raw());
    let labels = jme
        .values
        .iter()
        .zip(&jva.values)
        .map(|(&(t, e), &(_, a))| (t, EpisodeLabel::from_levels(e > jme_median, a > jva_median)))
        .collect();
    Ok(EpisodeSeries { window_s: jme.window_s, labels, jme_median, jva_median })
}

/// Keeps only windows present in both series, then classifies.
pub fn classify_intersection(jme: &MetricSeries, jva: &MetricSeries) -> Result<EpisodeSeries, EpisodeError> {
    let mut a = MetricSeries::new(jme.name, jme.window_s);
    let mut b = MetricSeries::new(jva.name, jva.window_s);
    for &(t, v) in &jme.values {
        if let Some(w) = jva.value_at(t) {
            a.values.push((t, v));
            b.values.push((t, w));
        }
    }
    classify_episodes(&a, &b)
}

pub fn episode_proportions(e: &EpisodeSeries) -> Result<EpisodeProportions, EpisodeError> {
    if e.labels.is_empty() {
        return Err(EpisodeError::Empty);
    }
    let mut counts = [0usize; 4];
    for (_, l) in &e.labels {
        counts[l.index()] += 1;
    }
    let n = e.labels.len() as f64;
    Ok(EpisodeProportions {
        hh: counts[0] as f64 / n,
        hl: counts[1] as f64 / n,
        lh: counts[2] as f64 / n,
        ll: counts[3] as f64 / n,
    })
}

/// CSV: `window_start_ms,label`.
pub fn write_episodes_csv<W: Write>(e: &EpisodeSeries, mut out: W) -> std::io::Result<()> {
    writeln!(out, "window_start_ms,label")?;
    for (t, l) in &e.labels {
        writeln!(out, "{t},{l}")?;
    }
    Ok(())
}
