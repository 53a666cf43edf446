//! End-to-end metric computation for one session.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::attention::{jva_on_grid, GridSpec};
use crate::effort::{fit_bins, jme_on_grid, me_series, windowed_me, EffortConfig, EffortError};
use crate::metric::{MetricFrame, MetricSeries};
use crate::session::{DyadSession, Participant, PerParticipant, SessionError, WindowGrid, MIN_CALIBRATION_MS};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Session(#[from] SessionError),
    #[error(transparent)]
    Effort(#[from] EffortError),
    #[error("calibration segment is {0} ms, need at least {MIN_CALIBRATION_MS} ms")]
    ShortCalibration(u64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub grid: GridSpec,
    pub effort: EffortConfig,
    /// Window of the reported JVA series. Episodes, frames and causality use
    /// the JME window for both joint measures.
    pub jva_window_s: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self { grid: GridSpec::default(), effort: EffortConfig::default(), jva_window_s: 30.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Analysis {
    pub jva: MetricSeries,
    /// JVA on the JME window grid.
    pub jva_fine: MetricSeries,
    /// ME over the whole recording, calibration included.
    pub me: PerParticipant<MetricSeries>,
    pub jme: MetricSeries,
    /// Task-span frames on the JME grid, stamped at window end.
    pub frames: Vec<MetricFrame>,
    /// Calibration-span frames on the JME grid.
    pub calibration_frames: Vec<MetricFrame>,
}

impl Analysis {
    /// Aligned `(JME, JVA)` values over windows where both exist.
    pub fn joint_pair(&self) -> (Vec<f64>, Vec<f64>) {
        self.jme.values.iter().filter_map(|&(t, e)| self.jva_fine.value_at(t).map(|a| (e, a))).unzip()
    }
}

fn frames_on_grid(
    session: &DyadSession,
    grid: &WindowGrid,
    me: &PerParticipant<MetricSeries>,
    bins: &(crate::effort::QuantileBins, crate::effort::QuantileBins),
    cfg: &PipelineConfig,
) -> (Vec<MetricFrame>, MetricSeries, MetricSeries) {
    let jva = jva_on_grid(session, &cfg.grid, grid);
    let jme = jme_on_grid(&me.a, &me.b, bins, &cfg.effort, grid);
    let me_a = windowed_me(&me.a, grid);
    let me_b = windowed_me(&me.b, grid);
    let frames = grid
        .iter()
        .map(|(start, end)| MetricFrame {
            t_ms: end,
            jva: jva.value_at(start),
            jme: jme.value_at(start),
            me_a: me_a.value_at(start),
            me_b: me_b.value_at(start),
        })
        .collect();
    (frames, jva, jme)
}

pub fn analyze(session: &DyadSession, cfg: &PipelineConfig) -> Result<Analysis, PipelineError> {
    cfg.effort.validate()?;
    let (cal_start, cal_end) = session.calibration_span();
    if cal_end < MIN_CALIBRATION_MS {
        return Err(PipelineError::ShortCalibration(cal_end));
    }
    let me = PerParticipant::new(
        me_series(session, Participant::A, &cfg.effort)?,
        me_series(session, Participant::B, &cfg.effort)?,
    );
    let bins = fit_bins(&me.a, &me.b, &cfg.effort);
    let jva = jva_on_grid(session, &cfg.grid, &session.task_grid(cfg.jva_window_s)?);
    let task_grid = session.task_grid(cfg.effort.jme_window_s)?;
    let (frames, jva_fine, jme) = frames_on_grid(session, &task_grid, &me, &bins, cfg);
    let cal_grid = WindowGrid::over(cal_start, cal_end, cfg.effort.jme_window_s)?;
    let (calibration_frames, _, _) = frames_on_grid(session, &cal_grid, &me, &bins, cfg);
    Ok(Analysis { jva, jva_fine, me, jme, frames, calibration_frames })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{gen_dyad, SynthConfig};

    #[test]
    fn frames_cover_task_and_calibration() {
        let (s, _) = gen_dyad(&SynthConfig { seed: 5, duration_s: 150.0, calibration_s: 40.0, ..Default::default() }).unwrap();
        let a = analyze(&s, &PipelineConfig::default()).unwrap();
        assert_eq!(a.frames.len(), 11);
        assert_eq!(a.frames[0].t_ms, 50_000);
        assert_eq!(a.calibration_frames.len(), 4);
        assert_eq!(a.jva.len(), 3);
        assert_eq!(a.jva_fine.len(), 11);
        // the first calibration window lacks a full set of centred ME samples
        assert!(a.calibration_frames[0].jme.is_none());
        assert!(a.frames[..10].iter().all(|f| f.jme.is_some() && f.jva.is_some() && f.me_a.is_some()));
        // ME windows end with the recording, so the last window's centres run short
        assert!(a.frames[10].jme.is_none());
        let (x, y) = a.joint_pair();
        assert_eq!(x.len(), 10);
        assert_eq!(y.len(), 10);
    }

    #[test]
    fn short_calibration_is_rejected() {
        let (s, _) = gen_dyad(&SynthConfig { seed: 5, duration_s: 90.0, calibration_s: 20.0, ..Default::default() }).unwrap();
        assert!(matches!(analyze(&s, &PipelineConfig::default()), Err(PipelineError::ShortCalibration(20_000))));
    }
}
