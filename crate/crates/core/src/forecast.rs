//! Thirty-second-ahead forecasts of the four metrics.
//!
//! The default model is a per-metric ridge-regularised linear autoregression
//! on the last `lags` window values plus their rolling mean and sd, trained to
//! predict the value `horizon` windows ahead. Any [`Forecaster`] can drive the
//! proactive feedback engine.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::ridge_fit;
use crate::metric::{MetricFrame, MetricName};

#[derive(Debug, Error, PartialEq)]
pub enum ForecastError {
    #[error("need at least {needed} usable windows, got {got}")]
    InsufficientHistory { needed: usize, got: usize },
    #[error("invalid forecast configuration: {0}")]
    InvalidConfig(String),
    #[error("ridge system is singular for {0}")]
    Singular(MetricName),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ForecastConfig {
    pub lags: usize,
    pub ridge: f64,
    /// Steps ahead, in windows.
    pub horizon: usize,
    pub window_s: f64,
}

impl Default for ForecastConfig {
    fn default() -> Self {
        Self { lags: 6, ridge: 1.0, horizon: 3, window_s: 10.0 }
    }
}

impl ForecastConfig {
    pub fn horizon_ms(&self) -> u64 {
        (self.horizon as f64 * self.window_s * 1000.0).round() as u64
    }

    fn validate(&self) -> Result<(), ForecastError> {
        if self.lags == 0 || self.horizon == 0 {
            return Err(ForecastError::InvalidConfig("lags and horizon must be positive".into()));
        }
        if !(self.ridge >= 0.0) || !(self.window_s > 0.0) {
            return Err(ForecastError::InvalidConfig("ridge must be non-negative and window_s positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastFrame {
    /// Issue time: end of the latest window in the history.
    pub t_ms: u64,
    pub horizon_ms: u64,
    pub predicted: BTreeMap<MetricName, f64>,
    pub model_id: String,
}

impl ForecastFrame {
    /// The prediction as a metric frame stamped at the target time.
    pub fn as_frame(&self) -> MetricFrame {
        let mut f = MetricFrame { t_ms: self.t_ms + self.horizon_ms, jva: None, jme: None, me_a: None, me_b: None };
        for (&m, &v) in &self.predicted {
            f.set(m, Some(v));
        }
        f
    }
}

pub trait Forecaster {
    fn model_id(&self) -> &str;
    fn horizon_ms(&self) -> u64;
    /// Minimum number of history frames accepted by [`Forecaster::predict`].
    fn min_history(&self) -> usize;
    /// Forecast from `history`, oldest first. Must use nothing but `history`.
    fn predict(&self, history: &[MetricFrame]) -> Result<ForecastFrame, ForecastError>;
}

/// One metric's series with gaps forward-filled; leading gaps stay `None`.
fn filled(frames: &[MetricFrame], m: MetricName) -> Vec<Option<f64>> {
    let mut last = None;
    frames
        .iter()
        .map(|f| {
            if let Some(v) = f.get(m) {
                last = Some(v);
            }
            last
        })
        .collect()
}

/// Features ending at index `i` (inclusive): lags newest first, then the
/// rolling mean and population sd of those lags.
fn features(series: &[Option<f64>], i: usize, lags: usize) -> Option<Vec<f64>> {
    if i + 1 < lags {
        return None;
    }
    let vals: Vec<f64> = (0..lags).map(|j| series[i - j]).collect::<Option<_>>()?;
    let mean = vals.iter().sum::<f64>() / lags as f64;
    let sd = (vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / lags as f64).sqrt();
    let mut out = vals;
    out.push(mean);
    out.push(sd);
    Some(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricModel {
    pub intercept: f64,
    /// Lag coefficients (newest first), then rolling mean, then rolling sd.
    pub coefficients: Vec<f64>,
}

impl MetricModel {
    fn apply(&self, x: &[f64]) -> f64 {
        self.intercept + self.coefficients.iter().zip(x).map(|(b, v)| b * v).sum::<f64>()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearArModel {
    pub model_id: String,
    pub config: ForecastConfig,
    pub models: BTreeMap<MetricName, MetricModel>,
}

/// Ridge fit with an unpenalised intercept (columns and target centred).
fn fit_metric(rows: &[Vec<f64>], y: &[f64], ridge: f64, name: MetricName) -> Result<MetricModel, ForecastError> {
    let n = rows.len() as f64;
    let k = rows[0].len();
    let x_mean: Vec<f64> = (0..k).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n).collect();
    let y_mean = y.iter().sum::<f64>() / n;
    let centred: Vec<Vec<f64>> = rows.iter().map(|r| r.iter().zip(&x_mean).map(|(v, m)| v - m).collect()).collect();
    let yc: Vec<f64> = y.iter().map(|v| v - y_mean).collect();
    // a tiny floor keeps the collinear lag/mean block solvable at ridge = 0
    let beta = ridge_fit(&centred, &yc, ridge.max(1e-9)).ok_or(ForecastError::Singular(name))?;
    let intercept = y_mean - beta.iter().zip(&x_mean).map(|(b, m)| b * m).sum::<f64>();
    Ok(MetricModel { intercept, coefficients: beta })
}

/// Trains one model per metric on every session's frames.
pub fn fit_forecaster(sessions: &[Vec<MetricFrame>], cfg: &ForecastConfig) -> Result<LinearArModel, ForecastError> {
    cfg.validate()?;
    let needed = cfg.lags + cfg.horizon + 1;
    let longest = sessions.iter().map(Vec::len).max().unwrap_or(0);
    if longest < needed {
        return Err(ForecastError::InsufficientHistory { needed, got: longest });
    }
    let mut models = BTreeMap::new();
    for m in MetricName::ALL {
        let mut rows = Vec::new();
        let mut y = Vec::new();
        for frames in sessions {
            let series = filled(frames, m);
            for i in 0..frames.len().saturating_sub(cfg.horizon) {
                if let (Some(x), Some(t)) = (features(&series, i, cfg.lags), frames[i + cfg.horizon].get(m)) {
                    rows.push(x);
                    y.push(t);
                }
            }
        }
        if rows.is_empty() {
            return Err(ForecastError::InsufficientHistory { needed, got: 0 });
        }
        models.insert(m, fit_metric(&rows, &y, cfg.ridge, m)?);
    }
    Ok(LinearArModel { model_id: format!("ridge-ar-k{}-h{}", cfg.lags, cfg.horizon), config: *cfg, models })
}

impl Forecaster for LinearArModel {
    fn model_id(&self) -> &str {
        &self.model_id
    }

    fn horizon_ms(&self) -> u64 {
        self.config.horizon_ms()
    }

    fn min_history(&self) -> usize {
        self.config.lags
    }

    fn predict(&self, history: &[MetricFrame]) -> Result<ForecastFrame, ForecastError> {
        let needed = self.config.lags;
        let last = history.last().ok_or(ForecastError::InsufficientHistory { needed, got: 0 })?;
        let mut predicted = BTreeMap::new();
        for (&m, model) in &self.models {
            let series = filled(history, m);
            let x = features(&series, history.len() - 1, needed)
                .ok_or(ForecastError::InsufficientHistory { needed, got: series.iter().flatten().count() })?;
            predicted.insert(m, m.clamp(model.apply(&x)));
        }
        Ok(ForecastFrame { t_ms: last.t_ms, horizon_ms: self.horizon_ms(), predicted, model_id: self.model_id.clone() })
    }
}

/// Predicts the latest observed value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Persistence {
    pub horizon_ms: u64,
}

impl Default for Persistence {
    fn default() -> Self {
        Self { horizon_ms: ForecastConfig::default().horizon_ms() }
    }
}

impl Forecaster for Persistence {
    fn model_id(&self) -> &str {
        "persistence"
    }

    fn horizon_ms(&self) -> u64 {
        self.horizon_ms
    }

    fn min_history(&self) -> usize {
        1
    }

    fn predict(&self, history: &[MetricFrame]) -> Result<ForecastFrame, ForecastError> {
        let last = history.last().ok_or(ForecastError::InsufficientHistory { needed: 1, got: 0 })?;
        let mut predicted = BTreeMap::new();
        for m in MetricName::ALL {
            if let Some(v) = filled(history, m).last().copied().flatten() {
                predicted.insert(m, m.clamp(v));
            }
        }
        Ok(ForecastFrame { t_ms: last.t_ms, horizon_ms: self.horizon_ms, predicted, model_id: "persistence".into() })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricEval {
    pub n: usize,
    pub mae: f64,
    pub persistence_mae: f64,
    /// `1 - mae / persistence_mae`; `None` when persistence is exact.
    pub skill: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub model_id: String,
    pub metrics: BTreeMap<MetricName, MetricEval>,
}

/// Scores `model` against persistence on held-out sessions, issuing one
/// forecast per window once `min_history` windows are available.
pub fn eval_forecaster(model: &dyn Forecaster, sessions: &[Vec<MetricFrame>], horizon: usize) -> EvalReport {
    let mut acc: BTreeMap<MetricName, (usize, f64, f64)> = BTreeMap::new();
    for frames in sessions {
        let filled_all: BTreeMap<MetricName, Vec<Option<f64>>> =
            MetricName::ALL.iter().map(|&m| (m, filled(frames, m))).collect();
        for i in model.min_history().saturating_sub(1)..frames.len().saturating_sub(horizon) {
            let Ok(pred) = model.predict(&frames[..=i]) else { continue };
            for m in MetricName::ALL {
                let (Some(actual), Some(&p), Some(last)) = (frames[i + horizon].get(m), pred.predicted.get(&m), filled_all[&m][i])
                else {
                    continue;
                };
                let e = acc.entry(m).or_insert((0, 0.0, 0.0));
                e.0 += 1;
                e.1 += (p - actual).abs();
                e.2 += (last - actual).abs();
            }
        }
    }
    let metrics = acc
        .into_iter()
        .map(|(m, (n, err, perr))| {
            let mae = err / n as f64;
            let persistence_mae = perr / n as f64;
            let skill = if persistence_mae > 0.0 { Some(1.0 - mae / persistence_mae) } else { None };
            (m, MetricEval { n, mae, persistence_mae, skill })
        })
        .collect();
    EvalReport { model_id: model.model_id().to_string(), metrics }
}
