//! Reactive and proactive feedback engines.
//!
//! Metric frames are discretised against a resting baseline: individual
//! effort into three levels by the 2SD rule, joint measures into high/low
//! around the baseline mean. The resulting collaboration state is looked up
//! in the scenario table to choose actions. Per-action cooldowns and a
//! persistence gate on task hints (A5) decide what is actually emitted.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::forecast::{ForecastError, ForecastFrame, Forecaster};
use crate::metric::{MetricFrame, MetricName};
use crate::session::MIN_CALIBRATION_MS;

pub const TABLE_ROWS: usize = 22;
const SHIPPED_TABLE: &str = include_str!("../data/scenario_table.csv");

#[derive(Debug, Error)]
pub enum FeedbackError {
    #[error("bad scenario table: {0}")]
    BadTable(String),
    #[error("no scenario row matches {0}")]
    NoMatch(CollabState),
    #[error("calibration segment is {0} ms, need at least {MIN_CALIBRATION_MS} ms")]
    ShortCalibration(u64),
    #[error("calibration has no values for {0}")]
    EmptyCalibration(MetricName),
    #[error("input at {t_ms} ms arrived after {last_ms} ms")]
    OutOfOrder { t_ms: u64, last_ms: u64 },
    #[error(transparent)]
    Forecast(#[from] ForecastError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Level {
    L,
    #[serde(rename = "AVG")]
    Avg,
    H,
}

impl Level {
    fn rank(self) -> i32 {
        self as i32
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Level::L => "L",
            Level::Avg => "AVG",
            Level::H => "H",
        })
    }
}

impl FromStr for Level {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim() {
            "H" => Ok(Level::H),
            "L" => Ok(Level::L),
            "AVG" | "Avg" => Ok(Level::Avg),
            other => Err(format!("unknown level {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Action {
    A1,
    A2,
    A3,
    A4,
    A5,
}

impl Action {
    pub const ALL: [Action; 5] = [Action::A1, Action::A2, Action::A3, Action::A4, Action::A5];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CollabState {
    pub jva: Level,
    pub jme: Level,
    pub me_a: Level,
    pub me_b: Level,
}

impl CollabState {
    pub fn new(jva: Level, jme: Level, me_a: Level, me_b: Level) -> Self {
        Self { jva, jme, me_a, me_b }
    }

    fn has_extreme_me(&self) -> bool {
        self.me_a != Level::Avg || self.me_b != Level::Avg
    }
}

impl fmt::Display for CollabState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{},{},{})", self.jva, self.jme, self.me_a, self.me_b)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioRow {
    pub scenario: u32,
    pub pattern: CollabState,
    pub actions: BTreeSet<Action>,
}

/// Rows sharing one input pattern.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditGroup {
    pub pattern: CollabState,
    pub rows: Vec<u32>,
    /// The rows prescribe different action sets.
    pub conflicting: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioTable {
    pub rows: Vec<ScenarioRow>,
    pub audit: Vec<AuditGroup>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TableRecord {
    scenario: u32,
    jva: String,
    jme: String,
    me1: String,
    me2: String,
    a1: u8,
    a2: u8,
    a3: u8,
    a4: u8,
    a5: u8,
}

/// Parses a scenario table from CSV with columns
/// `scenario,jva,jme,me1,me2,a1,a2,a3,a4,a5` (action cells 0 or 1).
pub fn load_scenario_table<R: Read>(source: R) -> Result<ScenarioTable, FeedbackError> {
    let bad = |m: String| FeedbackError::BadTable(m);
    let mut rows = Vec::new();
    for (i, rec) in csv::Reader::from_reader(source).deserialize::<TableRecord>().enumerate() {
        let rec = rec.map_err(|e| bad(format!("row {}: {e}", i + 1)))?;
        let level = |s: &str| s.parse::<Level>().map_err(|e| bad(format!("scenario {}: {e}", rec.scenario)));
        let pattern = CollabState::new(level(&rec.jva)?, level(&rec.jme)?, level(&rec.me1)?, level(&rec.me2)?);
        if pattern.jva == Level::Avg || pattern.jme == Level::Avg {
            return Err(bad(format!("scenario {}: joint measures must be H or L", rec.scenario)));
        }
        let mut actions = BTreeSet::new();
        for (a, cell) in Action::ALL.into_iter().zip([rec.a1, rec.a2, rec.a3, rec.a4, rec.a5]) {
            match cell {
                0 => {}
                1 => {
                    actions.insert(a);
                }
                other => return Err(bad(format!("scenario {}: action cell {other} is not 0 or 1", rec.scenario))),
            }
        }
        if actions.is_empty() {
            return Err(bad(format!("scenario {} has no actions", rec.scenario)));
        }
        rows.push(ScenarioRow { scenario: rec.scenario, pattern, actions });
    }
    if rows.len() != TABLE_ROWS {
        return Err(bad(format!("expected {TABLE_ROWS} rows, found {}", rows.len())));
    }
    let mut groups: Vec<AuditGroup> = Vec::new();
    for row in &rows {
        match groups.iter_mut().find(|g| g.pattern == row.pattern) {
            Some(g) => g.rows.push(row.scenario),
            None => groups.push(AuditGroup { pattern: row.pattern, rows: vec![row.scenario], conflicting: false }),
        }
    }
    groups.retain(|g| g.rows.len() > 1);
    for g in &mut groups {
        let sets: BTreeSet<&BTreeSet<Action>> =
            rows.iter().filter(|r| g.rows.contains(&r.scenario)).map(|r| &r.actions).collect();
        g.conflicting = sets.len() > 1;
    }
    Ok(ScenarioTable { rows, audit: groups })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ScenarioMatch {
    pub actions: BTreeSet<Action>,
    pub row: u32,
    /// No row matched exactly; the nearest row was used.
    pub fallback: bool,
}

impl ScenarioTable {
    /// The table shipped with the crate.
    pub fn shipped() -> Self {
        load_scenario_table(SHIPPED_TABLE.as_bytes()).expect("shipped scenario table is valid")
    }

    /// First row whose pattern matches. Otherwise, among rows with the same
    /// joint levels, the row nearest in individual-effort levels, preferring
    /// lower levels and then earlier rows.
    pub fn match_scenario(&self, state: &CollabState) -> Result<ScenarioMatch, FeedbackError> {
        if let Some(row) = self.rows.iter().find(|r| r.pattern == *state) {
            return Ok(ScenarioMatch { actions: row.actions.clone(), row: row.scenario, fallback: false });
        }
        let distance = |p: &CollabState| (p.me_a.rank() - state.me_a.rank()).abs() + (p.me_b.rank() - state.me_b.rank()).abs();
        self.rows
            .iter()
            .enumerate()
            .filter(|(_, r)| r.pattern.jva == state.jva && r.pattern.jme == state.jme)
            .min_by_key(|(i, r)| (distance(&r.pattern), r.pattern.me_a.rank() + r.pattern.me_b.rank(), *i))
            .map(|(_, r)| ScenarioMatch { actions: r.actions.clone(), row: r.scenario, fallback: true })
            .ok_or(FeedbackError::NoMatch(*state))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    /// Population sd.
    pub sd: f64,
}

impl Stat {
    pub fn of(values: &[f64]) -> Option<Stat> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let sd = (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt();
        Some(Stat { mean, sd })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Baseline {
    pub jva: Stat,
    pub jme: Stat,
    pub me_a: Stat,
    pub me_b: Stat,
}

impl Baseline {
    /// Raises every sd to at least `fraction * |mean|`, so a flat calibration
    /// does not collapse the 2SD band to a point.
    pub fn with_sd_floor(&self, fraction: f64) -> Baseline {
        let floor = |s: Stat| Stat { mean: s.mean, sd: s.sd.max(fraction * s.mean.abs()) };
        Baseline { jva: floor(self.jva), jme: floor(self.jme), me_a: floor(self.me_a), me_b: floor(self.me_b) }
    }

    pub fn get(&self, m: MetricName) -> &Stat {
        match m {
            MetricName::Jva => &self.jva,
            MetricName::Jme => &self.jme,
            MetricName::MeA => &self.me_a,
            MetricName::MeB => &self.me_b,
        }
    }
}

/// Baseline from the calibration-span frames.
pub fn compute_baselines(calibration_frames: &[MetricFrame], calibration_ms: u64) -> Result<Baseline, FeedbackError> {
    if calibration_ms < MIN_CALIBRATION_MS {
        return Err(FeedbackError::ShortCalibration(calibration_ms));
    }
    let stat = |m: MetricName| {
        let vals: Vec<f64> = calibration_frames.iter().filter_map(|f| f.get(m)).collect();
        Stat::of(&vals).ok_or(FeedbackError::EmptyCalibration(m))
    };
    Ok(Baseline { jva: stat(MetricName::Jva)?, jme: stat(MetricName::Jme)?, me_a: stat(MetricName::MeA)?, me_b: stat(MetricName::MeB)? })
}

/// Three-level 2SD rule.
pub fn discretize_level(value: f64, baseline: &Stat) -> Level {
    if value > baseline.mean + 2.0 * baseline.sd {
        Level::H
    } else if value < baseline.mean - 2.0 * baseline.sd {
        Level::L
    } else {
        Level::Avg
    }
}

/// High/low split at the baseline mean, for joint measures.
pub fn binarize_level(value: f64, baseline: &Stat) -> Level {
    if value >= baseline.mean {
        Level::H
    } else {
        Level::L
    }
}

/// Collaboration state of a frame; `None` unless all four metrics exist.
pub fn collab_state(frame: &MetricFrame, baseline: &Baseline) -> Option<CollabState> {
    Some(CollabState {
        jva: binarize_level(frame.jva?, &baseline.jva),
        jme: binarize_level(frame.jme?, &baseline.jme),
        me_a: discretize_level(frame.me_a?, &baseline.me_a),
        me_b: discretize_level(frame.me_b?, &baseline.me_b),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Mode {
    Reactive,
    Proactive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Policy {
    pub cooldown_s: f64,
    pub persistence_s: f64,
    /// States in which the proactive engine stays silent.
    pub desired: Vec<CollabState>,
    /// Reactive trigger also fires when a joint measure falls below its
    /// baseline mean minus 2SD.
    pub joint_low_trigger: bool,
    /// Lower bound on each baseline sd, as a fraction of the baseline mean.
    pub min_sd_fraction: f64,
}

impl Default for Policy {
    fn default() -> Self {
        Self {
            cooldown_s: 30.0,
            persistence_s: 60.0,
            desired: vec![CollabState::new(Level::H, Level::H, Level::Avg, Level::Avg)],
            joint_low_trigger: false,
            min_sd_fraction: 0.05,
        }
    }
}

impl Policy {
    fn cooldown_ms(&self) -> u64 {
        (self.cooldown_s * 1000.0).round() as u64
    }

    fn persistence_ms(&self) -> u64 {
        (self.persistence_s * 1000.0).round() as u64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SuppressReason {
    Cooldown,
    Persistence,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Suppressed {
    pub action: Action,
    pub reason: SuppressReason,
}

fn is_false(b: &bool) -> bool {
    !*b
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeedbackEvent {
    pub t_ms: u64,
    pub mode: Mode,
    pub state: CollabState,
    pub actions: Vec<Action>,
    pub row: u32,
    pub suppressed: Vec<Suppressed>,
    #[serde(default, skip_serializing_if = "is_false")]
    pub fallback: bool,
}

/// One engine instance per mode and session. Inputs must arrive in
/// non-decreasing time order.
#[derive(Debug, Clone)]
pub struct Engine {
    mode: Mode,
    policy: Policy,
    table: ScenarioTable,
    baseline: Baseline,
    last_t_ms: Option<u64>,
    last_emit_ms: Option<u64>,
    was_triggered: bool,
    action_clock: BTreeMap<Action, u64>,
    /// Extreme (ME_A, ME_B) levels and when they started.
    persistence: Option<((Level, Level), u64)>,
}

impl Engine {
    /// The policy's sd floor is applied to `baseline`.
    pub fn new(mode: Mode, policy: Policy, table: ScenarioTable, baseline: Baseline) -> Self {
        Self {
            mode,
            baseline: baseline.with_sd_floor(policy.min_sd_fraction),
            policy,
            table,
            last_t_ms: None,
            last_emit_ms: None,
            was_triggered: false,
            action_clock: BTreeMap::new(),
            persistence: None,
        }
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    fn reactive_trigger(&self, frame: &MetricFrame, state: &CollabState) -> bool {
        let joint_low = |m: MetricName| {
            let b = self.baseline.get(m);
            frame.get(m).is_some_and(|v| v < b.mean - 2.0 * b.sd)
        };
        state.has_extreme_me() || (self.policy.joint_low_trigger && (joint_low(MetricName::Jva) || joint_low(MetricName::Jme)))
    }

    /// Processes an observed frame (reactive) or a predicted frame
    /// (proactive), stamped `t_ms`.
    fn step_at(&mut self, t_ms: u64, frame: &MetricFrame) -> Result<Option<FeedbackEvent>, FeedbackError> {
        if let Some(last) = self.last_t_ms {
            if t_ms < last {
                return Err(FeedbackError::OutOfOrder { t_ms, last_ms: last });
            }
        }
        self.last_t_ms = Some(t_ms);
        let Some(state) = collab_state(frame, &self.baseline) else {
            self.was_triggered = false;
            self.persistence = None;
            return Ok(None);
        };
        let pair = (state.me_a, state.me_b);
        self.persistence = match self.persistence {
            Some((p, since)) if p == pair && state.has_extreme_me() => Some((p, since)),
            _ if state.has_extreme_me() => Some((pair, t_ms)),
            _ => None,
        };
        let triggered = match self.mode {
            Mode::Reactive => self.reactive_trigger(frame, &state),
            Mode::Proactive => !self.policy.desired.contains(&state),
        };
        let edge = triggered && !self.was_triggered;
        self.was_triggered = triggered;
        let cooldown = self.policy.cooldown_ms();
        let due = self.last_emit_ms.is_none_or(|last| t_ms - last >= cooldown);
        if !triggered || !(edge || due) {
            return Ok(None);
        }
        let matched = self.table.match_scenario(&state)?;
        let persisted = self.persistence.map_or(0, |(_, since)| t_ms - since);
        let mut actions = Vec::new();
        let mut suppressed = Vec::new();
        for &a in &matched.actions {
            if self.action_clock.get(&a).is_some_and(|&last| t_ms - last < cooldown) {
                suppressed.push(Suppressed { action: a, reason: SuppressReason::Cooldown });
            } else if a == Action::A5 && persisted < self.policy.persistence_ms() {
                suppressed.push(Suppressed { action: a, reason: SuppressReason::Persistence });
            } else {
                actions.push(a);
            }
        }
        if actions.is_empty() {
            return Ok(None);
        }
        for &a in &actions {
            self.action_clock.insert(a, t_ms);
        }
        self.last_emit_ms = Some(t_ms);
        Ok(Some(FeedbackEvent { t_ms, mode: self.mode, state, actions, row: matched.row, suppressed, fallback: matched.fallback }))
    }

    /// Reactive input: an observed frame stamped at its window end.
    pub fn step_frame(&mut self, frame: &MetricFrame) -> Result<Option<FeedbackEvent>, FeedbackError> {
        self.step_at(frame.t_ms, frame)
    }

    /// Proactive input: a forecast, acted on at its issue time.
    pub fn step_forecast(&mut self, forecast: &ForecastFrame) -> Result<Option<FeedbackEvent>, FeedbackError> {
        self.step_at(forecast.t_ms, &forecast.as_frame())
    }
}

/// Runs a reactive engine over a session's frames.
pub fn run_reactive(frames: &[MetricFrame], engine: &mut Engine) -> Result<Vec<FeedbackEvent>, FeedbackError> {
    let mut events = Vec::new();
    for f in frames {
        events.extend(engine.step_frame(f)?);
    }
    Ok(events)
}

/// Runs a proactive engine, forecasting from each prefix of `frames` once
/// enough history exists.
pub fn run_proactive(
    frames: &[MetricFrame],
    forecaster: &dyn Forecaster,
    engine: &mut Engine,
) -> Result<Vec<FeedbackEvent>, FeedbackError> {
    let mut events = Vec::new();
    for i in forecaster.min_history().saturating_sub(1)..frames.len() {
        match forecaster.predict(&frames[..=i]) {
            Ok(forecast) => events.extend(engine.step_forecast(&forecast)?),
            Err(ForecastError::InsufficientHistory { .. }) => {}
            Err(e) => return Err(e.into()),
        }
    }
    Ok(events)
}

pub fn write_events_jsonl<W: Write>(events: &[FeedbackEvent], mut out: W) -> Result<(), FeedbackError> {
    for e in events {
        serde_json::to_writer(&mut out, e).map_err(std::io::Error::from)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use Level::{Avg, H, L};

    fn st(jva: Level, jme: Level, a: Level, b: Level) -> CollabState {
        CollabState::new(jva, jme, a, b)
    }

    fn set(actions: &[Action]) -> BTreeSet<Action> {
        actions.iter().copied().collect()
    }

    fn baseline() -> Baseline {
        let s = Stat { mean: 0.5, sd: 0.1 };
        Baseline { jva: s, jme: s, me_a: Stat { mean: 2.0, sd: 0.2 }, me_b: Stat { mean: 2.0, sd: 0.2 } }
    }

    fn frame(t_ms: u64, jva: f64, jme: f64, me_a: f64, me_b: f64) -> MetricFrame {
        MetricFrame { t_ms, jva: Some(jva), jme: Some(jme), me_a: Some(me_a), me_b: Some(me_b) }
    }

    #[test]
    fn shipped_table_and_audit() {
        let t = ScenarioTable::shipped();
        assert_eq!(t.rows.len(), 22);
        assert_eq!(t.rows[1].pattern, st(H, H, Avg, Avg));
        assert_eq!(t.rows[1].actions, set(&[Action::A1]));
        let groups: Vec<(Vec<u32>, bool)> = t.audit.iter().map(|g| (g.rows.clone(), g.conflicting)).collect();
        assert_eq!(
            groups,
            vec![(vec![4, 10], true), (vec![6, 8, 9, 11], true), (vec![12, 13, 14], true), (vec![21, 22], true)]
        );
    }

    #[test]
    fn bad_tables() {
        let short: String = SHIPPED_TABLE.lines().take(22).collect::<Vec<_>>().join("\n");
        assert!(matches!(load_scenario_table(short.as_bytes()), Err(FeedbackError::BadTable(_))));
        let bad_cell = SHIPPED_TABLE.replacen("1,H,H,H,H,0,1,0,0,1", "1,H,H,H,H,0,2,0,0,1", 1);
        assert!(matches!(load_scenario_table(bad_cell.as_bytes()), Err(FeedbackError::BadTable(_))));
        let extra_col = SHIPPED_TABLE.replacen("a5\n", "a5,a6\n", 1);
        assert!(matches!(load_scenario_table(extra_col.as_bytes()), Err(FeedbackError::BadTable(_))));
        let avg_joint = SHIPPED_TABLE.replacen("3,H,H,L,L", "3,AVG,H,L,L", 1);
        assert!(matches!(load_scenario_table(avg_joint.as_bytes()), Err(FeedbackError::BadTable(_))));
    }

    #[test]
    fn matching_examples() {
        let t = ScenarioTable::shipped();
        let m = t.match_scenario(&st(H, H, Avg, Avg)).unwrap();
        assert_eq!((m.actions, m.row, m.fallback), (set(&[Action::A1]), 2, false));
        let m = t.match_scenario(&st(L, H, L, L)).unwrap();
        assert_eq!((m.actions, m.row), (set(&[Action::A2, Action::A3, Action::A5]), 12));
        let m = t.match_scenario(&st(L, L, H, H)).unwrap();
        assert_eq!((m.actions, m.row), (set(&[Action::A2, Action::A3, Action::A4, Action::A5]), 15));
        let m = t.match_scenario(&st(L, L, L, L)).unwrap();
        assert_eq!(m.row, 21);
    }

    #[test]
    fn fallback_prefers_nearest_then_lower() {
        let t = ScenarioTable::shipped();
        // (H,H,AVG,L): rows 2 (AVG,AVG) and 3 (L,L) are both one step away; row 2 has distance 1, row 3 distance 1 -> lower sum wins
        let m = t.match_scenario(&st(H, H, Avg, L)).unwrap();
        assert_eq!((m.row, m.fallback), (3, true));
        // (H,H,H,AVG): row 1 (H,H) distance 1, row 2 distance 1 -> lower sum is row 2
        let m = t.match_scenario(&st(H, H, H, Avg)).unwrap();
        assert_eq!(m.row, 2);
        // (L,H,AVG,AVG): only L,L rows exist for (L,H); nearest is row 12
        let m = t.match_scenario(&st(L, H, Avg, Avg)).unwrap();
        assert_eq!(m.row, 12);
    }

    #[test]
    fn every_state_matches() {
        let t = ScenarioTable::shipped();
        for jva in [H, L] {
            for jme in [H, L] {
                for a in [L, Avg, H] {
                    for b in [L, Avg, H] {
                        assert!(t.match_scenario(&st(jva, jme, a, b)).is_ok());
                    }
                }
            }
        }
    }

    #[test]
    fn baselines() {
        let cal = |vals: &[f64]| -> Vec<MetricFrame> { vals.iter().map(|&v| frame(0, v, v, v, v)).collect() };
        let b = compute_baselines(&cal(&[2.0, 2.0, 2.0]), 60_000).unwrap();
        assert_eq!(b.me_a, Stat { mean: 2.0, sd: 0.0 });
        let b = compute_baselines(&cal(&[1.0, 3.0]), 60_000).unwrap();
        assert_eq!(b.me_b, Stat { mean: 2.0, sd: 1.0 });
        assert!(matches!(compute_baselines(&cal(&[1.0]), 10_000), Err(FeedbackError::ShortCalibration(10_000))));
        assert!(matches!(compute_baselines(&[], 60_000), Err(FeedbackError::EmptyCalibration(_))));
    }

    #[test]
    fn levels() {
        let s = Stat { mean: 0.5, sd: 0.1 };
        assert_eq!(discretize_level(0.75, &s), H);
        assert_eq!(discretize_level(0.5, &s), Avg);
        assert_eq!(discretize_level(0.2, &s), L);
        let zero = Stat { mean: 0.5, sd: 0.0 };
        assert_eq!(discretize_level(0.6, &zero), H);
        assert_eq!(discretize_level(0.4, &zero), L);
        assert_eq!(discretize_level(0.5, &zero), Avg);
        assert_eq!(binarize_level(0.5, &s), H);
        assert_eq!(binarize_level(0.49, &s), L);
        assert!(L < Avg && Avg < H);
    }

    fn reactive() -> Engine {
        Engine::new(Mode::Reactive, Policy::default(), ScenarioTable::shipped(), baseline())
    }

    #[test]
    fn calm_stream_is_silent() {
        let mut e = reactive();
        let frames: Vec<MetricFrame> = (1..=60).map(|i| frame(i * 10_000, 0.6, 0.6, 2.1, 1.9)).collect();
        assert!(run_reactive(&frames, &mut e).unwrap().is_empty());
    }

    #[test]
    fn sustained_high_effort_escalates_to_hint() {
        let mut e = reactive();
        let frames: Vec<MetricFrame> = (1..=10).map(|i| frame(i * 10_000, 0.6, 0.6, 3.0, 3.0)).collect();
        let events = run_reactive(&frames, &mut e).unwrap();
        assert_eq!(events[0].actions, vec![Action::A2]);
        assert_eq!(events[0].row, 1);
        assert_eq!(events[0].suppressed, vec![Suppressed { action: Action::A5, reason: SuppressReason::Persistence }]);
        let first_a5 = events.iter().find(|ev| ev.actions.contains(&Action::A5)).unwrap();
        assert!(first_a5.t_ms - 10_000 >= 60_000);
        assert_eq!(first_a5.actions, vec![Action::A2, Action::A5]);
    }

    #[test]
    fn constant_out_of_band_fires_once_per_cooldown() {
        for windows in [1u64, 3, 4, 9, 30, 31] {
            let mut e = reactive();
            let frames: Vec<MetricFrame> = (1..=windows).map(|i| frame(i * 10_000, 0.6, 0.6, 2.0, 3.0)).collect();
            let events = run_reactive(&frames, &mut e).unwrap();
            assert_eq!(events.len() as u64, (windows * 10).div_ceil(30), "{windows} windows");
        }
    }

    #[test]
    fn re_entry_is_an_edge() {
        let mut e = reactive();
        let frames = [
            frame(10_000, 0.6, 0.6, 3.0, 2.0),
            frame(20_000, 0.6, 0.6, 2.0, 2.0),
            frame(30_000, 0.6, 0.6, 2.0, 3.0),
        ];
        let events = run_reactive(&frames, &mut e).unwrap();
        // both out-of-band states fall back to row 2; its action is still cooling down at 30 s
        assert_eq!(events.len(), 1);
        let frames = [frame(40_000, 0.6, 0.6, 2.0, 2.0), frame(50_000, 0.6, 0.6, 1.0, 1.0)];
        let events = run_reactive(&frames, &mut e).unwrap();
        assert_eq!(events.len(), 1);
        assert_eq!(events[0].row, 3);
    }

    #[test]
    fn joint_low_trigger_is_opt_in() {
        let dip = [frame(10_000, 0.1, 0.1, 2.0, 2.0)];
        assert!(run_reactive(&dip, &mut reactive()).unwrap().is_empty());
        let policy = Policy { joint_low_trigger: true, ..Policy::default() };
        let mut e = Engine::new(Mode::Reactive, policy, ScenarioTable::shipped(), baseline());
        let events = run_reactive(&dip, &mut e).unwrap();
        assert_eq!(events.len(), 1);
        assert_eq!(events[0].state, st(L, L, Avg, Avg));
    }

    #[test]
    fn flat_calibration_gets_an_sd_floor() {
        let flat = Baseline { me_a: Stat { mean: 2.0, sd: 0.0 }, me_b: Stat { mean: 2.0, sd: 0.0 }, ..baseline() };
        let mut e = Engine::new(Mode::Reactive, Policy::default(), ScenarioTable::shipped(), flat.clone());
        // floor is 0.05 * 2.0 = 0.1, so the band is 1.8..2.2
        let wobble = [frame(10_000, 0.6, 0.6, 2.15, 1.85)];
        assert!(run_reactive(&wobble, &mut e).unwrap().is_empty());
        let policy = Policy { min_sd_fraction: 0.0, ..Policy::default() };
        let mut e = Engine::new(Mode::Reactive, policy, ScenarioTable::shipped(), flat);
        assert_eq!(run_reactive(&wobble, &mut e).unwrap().len(), 1);
    }

    #[test]
    fn out_of_order_is_rejected() {
        let mut e = reactive();
        e.step_frame(&frame(20_000, 0.6, 0.6, 2.0, 2.0)).unwrap();
        assert!(matches!(e.step_frame(&frame(10_000, 0.6, 0.6, 2.0, 2.0)), Err(FeedbackError::OutOfOrder { .. })));
    }

    #[test]
    fn proactive_desired_state_is_silent() {
        let mut e = Engine::new(Mode::Proactive, Policy::default(), ScenarioTable::shipped(), baseline());
        let mut predicted = BTreeMap::new();
        for (m, v) in [(MetricName::Jva, 0.6), (MetricName::Jme, 0.6), (MetricName::MeA, 2.0), (MetricName::MeB, 2.0)] {
            predicted.insert(m, v);
        }
        let mut f = ForecastFrame { t_ms: 60_000, horizon_ms: 30_000, predicted, model_id: "x".into() };
        assert_eq!(e.step_forecast(&f).unwrap(), None);
        f.t_ms = 70_000;
        f.predicted.insert(MetricName::Jva, 0.1);
        let ev = e.step_forecast(&f).unwrap().unwrap();
        assert_eq!(ev.mode, Mode::Proactive);
        assert_eq!(ev.state, st(L, H, Avg, Avg));
        assert!(ev.fallback);
    }

    #[test]
    fn jsonl_shape() {
        let ev = FeedbackEvent {
            t_ms: 5,
            mode: Mode::Reactive,
            state: st(H, L, H, L),
            actions: vec![Action::A4],
            row: 5,
            suppressed: vec![],
            fallback: false,
        };
        let mut buf = Vec::new();
        write_events_jsonl(&[ev.clone(), FeedbackEvent { fallback: true, suppressed: vec![Suppressed { action: Action::A5, reason: SuppressReason::Cooldown }], ..ev }], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(
            lines[0],
            r#"{"t_ms":5,"mode":"REACTIVE","state":{"jva":"H","jme":"L","me_a":"H","me_b":"L"},"actions":["A4"],"row":5,"suppressed":[]}"#
        );
        assert!(lines[1].ends_with(r#""suppressed":[{"action":"A5","reason":"cooldown"}],"fallback":true}"#));
    }
}
