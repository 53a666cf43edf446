//! Synthetic dyads with planted ground truth.
//!
//! Gaze follows Markov target processes over a code document: in each
//! fixation step both participants share one target with the window's
//! shared-focus probability, otherwise each follows their own target. Each
//! participant's viewport scrolls whenever their target leaves the view.
//!
//! Latent effort is an AR(1) process per participant; B's effort follows A's
//! previous-second effort with weight `coupling_kappa`. The pupil trace is a
//! slow baseline plus sensor noise plus short high-frequency oscillation
//! bursts whose rate (bursts per second) equals the latent effort, so the
//! pupillary activity index recovers the latent effort.
//!
//! With an [`AttentionLink`] other than `None`, a per-window binary sync
//! signal gates both the effort coupling and the shared-focus probability,
//! optionally with a lag, planting a known direction between joint effort and
//! joint attention.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metric::{MetricFrame, MetricName};
use crate::session::{DyadSession, GazeSample, Participant, PerParticipant, PupilSample, SessionMeta, ViewportState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttentionLink {
    /// Constant shared focus and coupling.
    #[default]
    None,
    /// Joint effort in window `w` drives shared focus in window `w + lag`.
    EffortLeads,
    /// Shared focus in window `w` drives effort coupling in window `w + lag`.
    AttentionLeads,
    /// Both are driven by the same window's sync signal, with no lag.
    Concurrent,
}

/// Common rise of both participants' effort after a marker.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Drift {
    pub marker_s: f64,
    /// Onset delay after the marker is uniform in `[onset_min_s, onset_max_s]`.
    pub onset_min_s: f64,
    pub onset_max_s: f64,
    pub ramp_s: f64,
    /// Added latent effort at the end of the ramp (bursts per second).
    pub amplitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthConfig {
    pub seed: u64,
    pub duration_s: f64,
    pub calibration_s: f64,
    pub shared_focus_p: f64,
    pub coupling_kappa: f64,
    /// Sensor noise on the pupil trace (mm).
    pub noise_sd: f64,
    /// Mean latent effort, in oscillation bursts per second.
    pub me_base: f64,
    /// Stationary sd of each participant's own effort process.
    pub effort_sd: f64,
    /// Per-second autoregressive coefficient of the own effort process.
    pub effort_ar: f64,
    /// Stationary sd of own effort during calibration; `None` uses `effort_sd`.
    pub calibration_effort_sd: Option<f64>,
    /// Per-sample gaze jitter around the fixation target, in code lines.
    pub gaze_jitter: f64,
    pub blink_rate_hz: f64,
    /// Relative jitter of inter-burst intervals; 0 gives periodic bursts.
    pub event_jitter: f64,
    pub link: AttentionLink,
    pub link_lag_windows: u32,
    pub link_window_s: f64,
    /// How far the sync signal lowers shared focus when off (fraction).
    pub link_depth: f64,
    pub drift: Option<Drift>,
    pub gaze_rate_hz: f64,
    pub pupil_rate_hz: f64,
    pub doc_lines: u32,
    pub fixation_ms: u64,
    /// Position in the view (fraction from the top) where a scrolled-to
    /// target lands.
    pub scroll_anchor: f64,
    pub bugs_solved: u32,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            duration_s: 600.0,
            calibration_s: 60.0,
            shared_focus_p: 0.6,
            coupling_kappa: 0.5,
            noise_sd: 0.004,
            me_base: 1.8,
            effort_sd: 0.8,
            effort_ar: 0.95,
            calibration_effort_sd: None,
            gaze_jitter: 0.4,
            blink_rate_hz: 0.2,
            event_jitter: 0.5,
            link: AttentionLink::None,
            link_lag_windows: 1,
            link_window_s: 10.0,
            link_depth: 0.9,
            drift: None,
            gaze_rate_hz: 60.0,
            pupil_rate_hz: 60.0,
            doc_lines: 600,
            fixation_ms: 500,
            scroll_anchor: 1.0 / 3.0,
            bugs_solved: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SynthConfigError {
    #[error("synthetic config field {0} is out of range")]
    OutOfRange(&'static str),
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), SynthConfigError> {
        use SynthConfigError::OutOfRange;
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        if !(self.duration_s >= 60.0) {
            return Err(OutOfRange("duration_s"));
        }
        if !(self.calibration_s > 0.0 && self.calibration_s < self.duration_s) {
            return Err(OutOfRange("calibration_s"));
        }
        if !unit(self.shared_focus_p) {
            return Err(OutOfRange("shared_focus_p"));
        }
        if !(0.0..1.0).contains(&self.coupling_kappa) {
            return Err(OutOfRange("coupling_kappa"));
        }
        if !unit(self.link_depth) || !unit(self.event_jitter) || !unit(self.scroll_anchor) {
            return Err(OutOfRange("link_depth/event_jitter/scroll_anchor"));
        }
        if !(self.effort_ar.abs() < 1.0) || self.effort_sd < 0.0 || self.calibration_effort_sd.is_some_and(|v| v < 0.0) || self.noise_sd < 0.0 || self.gaze_jitter < 0.0 {
            return Err(OutOfRange("effort_ar/effort_sd/noise_sd/gaze_jitter"));
        }
        if !(self.me_base > 0.0 && self.gaze_rate_hz > 0.0 && self.pupil_rate_hz > 0.0 && self.link_window_s > 0.0) {
            return Err(OutOfRange("me_base/rates/link_window_s"));
        }
        if self.blink_rate_hz < 0.0 || self.doc_lines < 60 || self.fixation_ms == 0 {
            return Err(OutOfRange("blink_rate_hz/doc_lines/fixation_ms"));
        }
        if let Some(d) = &self.drift {
            if !(d.onset_min_s >= 0.0 && d.onset_max_s >= d.onset_min_s && d.ramp_s > 0.0) {
                return Err(OutOfRange("drift"));
            }
        }
        Ok(())
    }

    /// A steady dyad: constant latent effort, periodic bursts, no blinks.
    pub fn calm(seed: u64) -> Self {
        Self { seed, effort_sd: 0.0, event_jitter: 0.0, blink_rate_hz: 0.0, ..Default::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlantedDirection {
    ACausesB,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub planted_direction: PlantedDirection,
    pub shared_focus_p: f64,
    pub coupling_kappa: f64,
    pub link: AttentionLink,
    /// Latent effort per second, bursts per second.
    pub latent_effort: PerParticipant<Vec<f64>>,
    /// Sync signal per link window over the task span.
    pub sync: Vec<bool>,
    pub drift_marker_ms: Option<u64>,
    pub drift_onset_ms: Option<u64>,
}

const SCREEN_W: f64 = 1920.0;
const SCREEN_H: f64 = 1080.0;
const LINE_HEIGHT: f64 = 20.0;
const TOP_OFFSET: f64 = 80.0;
const BURST_AMPLITUDE_MM: f64 = 0.05;
const BURST_WIDTH_SAMPLES: f64 = 1.0;
const MIN_EFFORT: f64 = 0.05;

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn sample_times(duration_ms: u64, rate_hz: f64) -> Vec<u64> {
    let n = (duration_ms as f64 * rate_hz / 1000.0).floor() as usize;
    (0..n).map(|i| (i as f64 * 1000.0 / rate_hz).round() as u64).filter(|&t| t < duration_ms).collect()
}

struct Plan {
    /// shared-focus probability per second
    focus_p: Vec<f64>,
    /// effort coupling per second
    kappa: Vec<f64>,
    sync: Vec<bool>,
}

fn plan(cfg: &SynthConfig, seconds: usize) -> Plan {
    let mut rng = stream_rng(cfg.seed, 1);
    let cal = cfg.calibration_s;
    let task_windows = ((cfg.duration_s - cal) / cfg.link_window_s).ceil() as usize + 1;
    let lag = cfg.link_lag_windows as usize;
    // sync for windows -lag .. task_windows, stored with an offset of `lag`
    let raw: Vec<bool> = (0..task_windows + lag).map(|_| rng.random_bool(0.5)).collect();
    let sync_at = |w: usize, back: usize| raw[w + lag - back];
    let p_on = cfg.shared_focus_p;
    let p_off = cfg.shared_focus_p * (1.0 - cfg.link_depth);
    let k_on = cfg.coupling_kappa;
    let k_off = cfg.coupling_kappa * (1.0 - cfg.link_depth);
    let mut focus_p = vec![0.0; seconds];
    let mut kappa = vec![0.0; seconds];
    for s in 0..seconds {
        let t = s as f64;
        if t < cal {
            continue;
        }
        let w = ((t - cal) / cfg.link_window_s).floor() as usize;
        let (focus_on, effort_on) = match cfg.link {
            AttentionLink::None => (true, true),
            AttentionLink::EffortLeads => (sync_at(w, lag), sync_at(w, 0)),
            AttentionLink::AttentionLeads => (sync_at(w, 0), sync_at(w, lag)),
            AttentionLink::Concurrent => (sync_at(w, 0), sync_at(w, 0)),
        };
        focus_p[s] = if focus_on { p_on } else { p_off };
        kappa[s] = if effort_on { k_on } else { k_off };
    }
    let sync = match cfg.link {
        AttentionLink::None => Vec::new(),
        _ => raw[lag..].to_vec(),
    };
    Plan { focus_p, kappa, sync }
}

fn drift_at(cfg: &SynthConfig, onset_s: Option<f64>, t: f64) -> f64 {
    match (cfg.drift, onset_s) {
        (Some(d), Some(onset)) if t > onset => d.amplitude * ((t - onset) / d.ramp_s).min(1.0),
        _ => 0.0,
    }
}

fn latent_effort(cfg: &SynthConfig, plan: &Plan, onset_s: Option<f64>) -> PerParticipant<Vec<f64>> {
    let mut rng = stream_rng(cfg.seed, 2);
    let n = plan.kappa.len();
    let innov = (1.0 - cfg.effort_ar * cfg.effort_ar).sqrt();
    let cal_sd = cfg.calibration_effort_sd.unwrap_or(cfg.effort_sd);
    // unit-variance AR(1) deviations, scaled per phase
    let mut za: f64 = normal(&mut rng);
    let mut zb: f64 = normal(&mut rng);
    let mut a = Vec::with_capacity(n);
    let mut b = Vec::with_capacity(n);
    for s in 0..n {
        if s > 0 {
            za = cfg.effort_ar * za + innov * normal(&mut rng);
            zb = cfg.effort_ar * zb + innov * normal(&mut rng);
        }
        let sd = if (s as f64) < cfg.calibration_s { cal_sd } else { cfg.effort_sd };
        let drift = drift_at(cfg, onset_s, s as f64);
        let ma = (cfg.me_base + sd * za + drift).max(MIN_EFFORT);
        let k = plan.kappa[s];
        let lead = if s > 0 { a[s - 1] } else { ma };
        let mb = (k * lead + (1.0 - k) * (cfg.me_base + sd * zb + drift)).max(MIN_EFFORT);
        a.push(ma);
        b.push(mb);
    }
    PerParticipant::new(a, b)
}

/// Linear interpolation of a per-second series.
fn at_second(series: &[f64], t_s: f64) -> f64 {
    let i = t_s.floor().max(0.0) as usize;
    if i + 1 >= series.len() {
        return series[series.len() - 1];
    }
    let f = t_s - i as f64;
    series[i] * (1.0 - f) + series[i + 1] * f
}

/// Blink intervals `[start, end)` in ms.
fn blinks(cfg: &SynthConfig, stream: u64, duration_ms: u64) -> Vec<(u64, u64)> {
    let mut rng = stream_rng(cfg.seed, stream);
    let mut out = Vec::new();
    if cfg.blink_rate_hz <= 0.0 {
        return out;
    }
    let mut t = 0.0f64;
    loop {
        t += -(1.0 - rng.random::<f64>()).ln() / cfg.blink_rate_hz * 1000.0;
        if t >= duration_ms as f64 {
            break;
        }
        let len = rng.random_range(100.0..300.0);
        out.push((t as u64, (t + len) as u64));
        t += len;
    }
    out
}

fn in_blink(blinks: &[(u64, u64)], t: u64) -> bool {
    let idx = blinks.partition_point(|&(s, _)| s <= t);
    idx > 0 && t < blinks[idx - 1].1
}

fn pupil_stream(
    cfg: &SynthConfig,
    p: Participant,
    effort: &[f64],
    blinks: &[(u64, u64)],
    duration_ms: u64,
) -> Vec<PupilSample> {
    let stream = match p {
        Participant::A => 10,
        Participant::B => 11,
    };
    let mut rng = stream_rng(cfg.seed, stream);
    let times = sample_times(duration_ms, cfg.pupil_rate_hz);
    let n = times.len();
    let period_s = 1.0 / cfg.pupil_rate_hz;
    let phase = rng.random_range(0.0..std::f64::consts::TAU);
    let mut d: Vec<f64> = times
        .iter()
        .map(|&t| {
            let ts = t as f64 / 1000.0;
            let slow = 0.12 * (std::f64::consts::TAU * ts / 240.0 + phase).sin();
            let dilation = 0.25 * (at_second(effort, ts) - cfg.me_base);
            3.4 + slow + dilation + cfg.noise_sd * normal(&mut rng)
        })
        .collect();
    // oscillation bursts, one per 1/effort seconds
    let mut t_s = rng.random_range(0.0..1.0) / at_second(effort, 0.0);
    let total_s = duration_ms as f64 / 1000.0;
    let reach = (4.0 * BURST_WIDTH_SAMPLES).ceil() as i64;
    while t_s < total_s {
        let centre = t_s / period_s;
        let amp = BURST_AMPLITUDE_MM * (0.85 + 0.3 * rng.random::<f64>());
        let c = centre.round() as i64;
        for k in (c - reach).max(0)..=(c + reach).min(n as i64 - 1) {
            let dist = k as f64 - centre;
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            d[k as usize] += amp * sign * (-dist * dist / (2.0 * BURST_WIDTH_SAMPLES * BURST_WIDTH_SAMPLES)).exp();
        }
        let rate = at_second(effort, t_s).max(MIN_EFFORT);
        let jitter = 1.0 + cfg.event_jitter * (2.0 * rng.random::<f64>() - 1.0);
        t_s += jitter / rate;
    }
    times
        .iter()
        .zip(d)
        .map(|(&t, dm)| {
            if in_blink(blinks, t) {
                PupilSample { t_ms: t, participant: p, d_mm: 0.0, valid: false }
            } else {
                PupilSample::new(t, p, dm, true)
            }
        })
        .collect()
}

#[derive(Clone, Copy)]
struct Target {
    line: f64,
    x: f64,
}

fn step_target(rng: &mut ChaCha8Rng, t: Target, doc_lines: f64) -> Target {
    let u: f64 = rng.random();
    let mut next = t;
    if u < 0.15 {
        next.line = rng.random_range(1.0..doc_lines - 1.0);
        next.x = rng.random_range(0.02..0.9);
    } else if u < 0.85 {
        next.line = (t.line + 3.0 * normal(rng)).clamp(1.0, doc_lines - 1.0);
        next.x = (t.x + 0.08 * normal(rng)).clamp(0.02, 0.95);
    }
    next
}

struct GazePlan {
    /// Per fixation step, per participant.
    targets: PerParticipant<Vec<Target>>,
}

fn gaze_targets(cfg: &SynthConfig, plan: &Plan, steps: usize, visible: f64) -> GazePlan {
    let mut rng = stream_rng(cfg.seed, 3);
    let doc = cfg.doc_lines as f64;
    let start = |rng: &mut ChaCha8Rng| Target {
        line: rng.random_range(visible.min(doc - 2.0)..doc - 1.0),
        x: rng.random_range(0.05..0.9),
    };
    let mut joint = start(&mut rng);
    let mut own_a = start(&mut rng);
    let mut own_b = start(&mut rng);
    let mut ta = Vec::with_capacity(steps);
    let mut tb = Vec::with_capacity(steps);
    for k in 0..steps {
        if k > 0 {
            joint = step_target(&mut rng, joint, doc);
            own_a = step_target(&mut rng, own_a, doc);
            own_b = step_target(&mut rng, own_b, doc);
        }
        let second = ((k as u64 * cfg.fixation_ms) / 1000) as usize;
        let p = plan.focus_p[second.min(plan.focus_p.len() - 1)];
        if rng.random_bool(p) {
            ta.push(joint);
            tb.push(joint);
        } else {
            ta.push(own_a);
            tb.push(own_b);
        }
    }
    GazePlan { targets: PerParticipant::new(ta, tb) }
}

fn gaze_and_viewport(
    cfg: &SynthConfig,
    p: Participant,
    targets: &[Target],
    blinks: &[(u64, u64)],
    duration_ms: u64,
    visible: f64,
) -> (Vec<GazeSample>, Vec<ViewportState>) {
    let stream = match p {
        Participant::A => 20,
        Participant::B => 21,
    };
    let mut rng = stream_rng(cfg.seed, stream);
    let viewport = |t_ms: u64, first: f64| ViewportState {
        t_ms,
        participant: p,
        first_visible_line: first,
        line_height_px: LINE_HEIGHT,
        top_offset_px: TOP_OFFSET,
        screen_h_px: SCREEN_H,
        screen_w_px: SCREEN_W,
    };
    let margin = 3.0;
    let mut first = 0.0f64;
    let mut viewports = vec![viewport(0, first)];
    let mut firsts = Vec::with_capacity(targets.len());
    for (k, t) in targets.iter().enumerate() {
        if t.line < first + margin || t.line > first + visible - margin {
            first = (t.line - cfg.scroll_anchor * visible).max(0.0).floor();
            viewports.push(viewport(k as u64 * cfg.fixation_ms, first));
        }
        firsts.push(first);
    }
    let gaze = sample_times(duration_ms, cfg.gaze_rate_hz)
        .into_iter()
        .map(|t| {
            let k = ((t / cfg.fixation_ms) as usize).min(targets.len() - 1);
            let target = targets[k];
            let (dl, dx) = (normal(&mut rng), normal(&mut rng));
            if in_blink(blinks, t) {
                return GazeSample { t_ms: t, participant: p, x_pct: 0.0, y_pct: 0.0, valid: false };
            }
            let line = (target.line + cfg.gaze_jitter * dl).clamp(firsts[k], firsts[k] + visible);
            let x = (target.x + 0.02 * cfg.gaze_jitter * dx).clamp(0.0, 1.0);
            let y = ((line - firsts[k]) * LINE_HEIGHT + TOP_OFFSET) / SCREEN_H;
            GazeSample { t_ms: t, participant: p, x_pct: x, y_pct: y.clamp(0.0, 1.0), valid: true }
        })
        .collect();
    // viewport records at the same time: keep the last one
    viewports.dedup_by(|later, earlier| {
        if later.t_ms == earlier.t_ms {
            *earlier = *later;
            true
        } else {
            false
        }
    });
    (gaze, viewports)
}

/// Generates a session and its ground truth. Deterministic in `cfg`.
pub fn gen_dyad(cfg: &SynthConfig) -> Result<(DyadSession, GroundTruth), SynthConfigError> {
    cfg.validate()?;
    let duration_ms = (cfg.duration_s * 1000.0).round() as u64;
    let calibration_ms = (cfg.calibration_s * 1000.0).round() as u64;
    let seconds = (cfg.duration_s.ceil() as usize) + 2;
    let plan = plan(cfg, seconds);

    let mut onset_rng = stream_rng(cfg.seed, 4);
    let onset_s = cfg.drift.map(|d| {
        let delay = if d.onset_max_s > d.onset_min_s {
            onset_rng.random_range(d.onset_min_s..=d.onset_max_s)
        } else {
            d.onset_min_s
        };
        d.marker_s + delay
    });
    let effort = latent_effort(cfg, &plan, onset_s);

    let visible = (SCREEN_H - TOP_OFFSET) / LINE_HEIGHT;
    let steps = (duration_ms / cfg.fixation_ms) as usize + 1;
    let gaze_plan = gaze_targets(cfg, &plan, steps, visible);

    let mut gaze = PerParticipant::<Vec<GazeSample>>::default();
    let mut pupil = PerParticipant::<Vec<PupilSample>>::default();
    let mut viewport = PerParticipant::<Vec<ViewportState>>::default();
    for (p, blink_stream) in [(Participant::A, 30), (Participant::B, 31)] {
        let bl = blinks(cfg, blink_stream, duration_ms);
        pupil[p] = pupil_stream(cfg, p, &effort[p], &bl, duration_ms);
        let (g, v) = gaze_and_viewport(cfg, p, &gaze_plan.targets[p], &bl, duration_ms, visible);
        gaze[p] = g;
        viewport[p] = v;
    }

    let session = DyadSession {
        meta: SessionMeta {
            session_id: format!("synth-{}", cfg.seed),
            dyad_id: format!("dyad-{}", cfg.seed),
            calibration_end_ms: calibration_ms,
            duration_ms,
            screen_w_px: SCREEN_W,
            screen_h_px: SCREEN_H,
            gaze_rate_hz: cfg.gaze_rate_hz,
            pupil_rate_hz: cfg.pupil_rate_hz,
            bugs_solved: cfg.bugs_solved,
        },
        gaze,
        pupil,
        viewport,
    };
    let truth = GroundTruth {
        planted_direction: if cfg.coupling_kappa > 0.0 { PlantedDirection::ACausesB } else { PlantedDirection::None },
        shared_focus_p: cfg.shared_focus_p,
        coupling_kappa: cfg.coupling_kappa,
        link: cfg.link,
        latent_effort: effort,
        sync: plan.sync,
        drift_marker_ms: cfg.drift.map(|d| (d.marker_s * 1000.0).round() as u64),
        drift_onset_ms: onset_s.map(|s| (s * 1000.0).round() as u64),
    };
    Ok((session, truth))
}

/// Window-level metric frames where each metric is an independent AR(1)
/// process with coefficient `phi` (0 gives white noise), clamped to its domain.
pub fn ar_frames(seed: u64, windows: usize, phi: f64) -> Vec<MetricFrame> {
    // (mean, stationary sd) per metric
    let spec = [(MetricName::Jva, 0.5, 0.12), (MetricName::Jme, 0.3, 0.08), (MetricName::MeA, 1.8, 0.5), (MetricName::MeB, 1.8, 0.5)];
    let mut rng = stream_rng(seed, 40);
    let innov = (1.0 - phi * phi).sqrt();
    let mut dev: Vec<f64> = spec.iter().map(|_| normal(&mut rng)).collect();
    (0..windows)
        .map(|i| {
            let mut f = MetricFrame { t_ms: (i as u64 + 1) * 10_000, jva: None, jme: None, me_a: None, me_b: None };
            for (j, &(m, mean, sd)) in spec.iter().enumerate() {
                if i > 0 {
                    dev[j] = phi * dev[j] + innov * normal(&mut rng);
                }
                f.set(m, Some(m.clamp(mean + sd * dev[j])));
            }
            f
        })
        .collect()
}

/// Window-level metric frames where each metric is a random walk reflected
/// into its domain.
pub fn random_walk_frames(seed: u64, windows: usize, step_sd: f64) -> Vec<MetricFrame> {
    let start = [0.5, 0.3, 1.8, 1.8];
    let mut rng = stream_rng(seed, 41);
    let mut level = start;
    (0..windows)
        .map(|i| {
            let mut f = MetricFrame { t_ms: (i as u64 + 1) * 10_000, jva: None, jme: None, me_a: None, me_b: None };
            for (j, m) in MetricName::ALL.into_iter().enumerate() {
                if i > 0 {
                    let scale = if j < 2 { 1.0 } else { 4.0 };
                    let mut v = level[j] + scale * step_sd * normal(&mut rng);
                    let hi = if j < 2 { 1.0 } else { f64::INFINITY };
                    if v < 0.0 {
                        v = -v;
                    }
                    if v > hi {
                        v = 2.0 * hi - v;
                    }
                    level[j] = v;
                }
                f.set(m, Some(level[j]));
            }
            f
        })
        .collect()
}
