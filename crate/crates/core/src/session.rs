//! Session data model, JSONL reader/writer, validation and time windowing.
//!
//! A session file is newline-delimited JSON. The first record is a `meta`
//! record; the remaining records are `gaze`, `pupil` and `viewport` samples
//! for participants `A` and `B` in any order. Samples are sorted by time per
//! participant on load.

use std::fmt;
use std::io::{BufRead, Write};
use std::ops::{Index, IndexMut};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

/// Pupil diameters outside this band (mm) are not physiologically plausible
/// and are flagged invalid on construction.
pub const PUPIL_PLAUSIBLE_MM: (f64, f64) = (1.0, 10.0);

/// Minimum resting-baseline length used by validation and baselines.
pub const MIN_CALIBRATION_MS: u64 = 30_000;

const MAX_GAP_MS: u64 = 1_000;
const MIN_VALID_FRACTION: f64 = 0.75;

#[derive(Debug, Error)]
pub enum SessionError {
    #[error("missing meta record: {0}")]
    MissingMeta(String),
    #[error("line {line}: {message}")]
    SchemaError { line: usize, message: String },
    #[error("participant {participant} has no {stream} samples")]
    EmptyStream { participant: Participant, stream: Channel },
    #[error("window of {window_ms} ms exceeds the {span_ms} ms span")]
    WindowTooLong { window_ms: u64, span_ms: u64 },
    #[error("window length must be positive")]
    ZeroWindow,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Participant {
    A,
    B,
}

impl Participant {
    pub const BOTH: [Participant; 2] = [Participant::A, Participant::B];
}

impl fmt::Display for Participant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Participant::A => f.write_str("A"),
            Participant::B => f.write_str("B"),
        }
    }
}

/// A pair of values, one per participant.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PerParticipant<T> {
    pub a: T,
    pub b: T,
}

impl<T> PerParticipant<T> {
    pub fn new(a: T, b: T) -> Self {
        Self { a, b }
    }

    pub fn map<U>(&self, mut f: impl FnMut(Participant, &T) -> U) -> PerParticipant<U> {
        PerParticipant { a: f(Participant::A, &self.a), b: f(Participant::B, &self.b) }
    }
}

impl<T> Index<Participant> for PerParticipant<T> {
    type Output = T;
    fn index(&self, p: Participant) -> &T {
        match p {
            Participant::A => &self.a,
            Participant::B => &self.b,
        }
    }
}

impl<T> IndexMut<Participant> for PerParticipant<T> {
    fn index_mut(&mut self, p: Participant) -> &mut T {
        match p {
            Participant::A => &mut self.a,
            Participant::B => &mut self.b,
        }
    }
}

/// Stream kinds carried by a session.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Channel {
    Gaze,
    Pupil,
    Viewport,
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Channel::Gaze => f.write_str("gaze"),
            Channel::Pupil => f.write_str("pupil"),
            Channel::Viewport => f.write_str("viewport"),
        }
    }
}

/// Anything stamped with a session-relative time.
pub trait Timed {
    fn t_ms(&self) -> u64;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GazeSample {
    pub t_ms: u64,
    pub participant: Participant,
    /// Fraction of screen width, in `[0, 1]` when valid.
    pub x_pct: f64,
    /// Fraction of screen height, in `[0, 1]` when valid.
    pub y_pct: f64,
    pub valid: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PupilSample {
    pub t_ms: u64,
    pub participant: Participant,
    pub d_mm: f64,
    pub valid: bool,
}

impl PupilSample {
    /// Builds a sample, forcing `valid = false` outside the plausibility band.
    pub fn new(t_ms: u64, participant: Participant, d_mm: f64, valid: bool) -> Self {
        let plausible = d_mm.is_finite() && d_mm >= PUPIL_PLAUSIBLE_MM.0 && d_mm <= PUPIL_PLAUSIBLE_MM.1;
        Self { t_ms, participant, d_mm, valid: valid && plausible }
    }
}

/// Editor viewport of one participant. The state at time `t` is the latest
/// record with `t_ms <= t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ViewportState {
    pub t_ms: u64,
    pub participant: Participant,
    pub first_visible_line: f64,
    pub line_height_px: f64,
    pub top_offset_px: f64,
    pub screen_h_px: f64,
    pub screen_w_px: f64,
}

impl Timed for GazeSample {
    fn t_ms(&self) -> u64 {
        self.t_ms
    }
}

impl Timed for PupilSample {
    fn t_ms(&self) -> u64 {
        self.t_ms
    }
}

impl Timed for ViewportState {
    fn t_ms(&self) -> u64 {
        self.t_ms
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionMeta {
    pub session_id: String,
    pub dyad_id: String,
    pub calibration_end_ms: u64,
    pub duration_ms: u64,
    pub screen_w_px: f64,
    pub screen_h_px: f64,
    pub gaze_rate_hz: f64,
    pub pupil_rate_hz: f64,
    /// Bugs fixed in the task time, plus the one in progress at the end.
    pub bugs_solved: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DyadSession {
    pub meta: SessionMeta,
    pub gaze: PerParticipant<Vec<GazeSample>>,
    pub pupil: PerParticipant<Vec<PupilSample>>,
    pub viewport: PerParticipant<Vec<ViewportState>>,
}

impl DyadSession {
    /// Post-calibration task span `[calibration_end_ms, duration_ms)`.
    pub fn task_span(&self) -> (u64, u64) {
        (self.meta.calibration_end_ms, self.meta.duration_ms)
    }

    /// Resting-baseline span `[0, calibration_end_ms)`.
    pub fn calibration_span(&self) -> (u64, u64) {
        (0, self.meta.calibration_end_ms)
    }

    /// Window grid over the task span. See [`WindowGrid::over`].
    pub fn task_grid(&self, window_s: f64) -> Result<WindowGrid, SessionError> {
        let (start, end) = self.task_span();
        WindowGrid::over(start, end, window_s)
    }

    /// Windows over the task span for one stream kind, both participants.
    pub fn window_iter(&self, window_s: f64, channel: Channel) -> Result<Vec<SessionWindow<'_>>, SessionError> {
        let grid = self.task_grid(window_s)?;
        Ok(grid
            .iter()
            .map(|(start, end)| {
                let slice = |p: Participant| match channel {
                    Channel::Gaze => ChannelSlice::Gaze(slice_window(&self.gaze[p], start, end)),
                    Channel::Pupil => ChannelSlice::Pupil(slice_window(&self.pupil[p], start, end)),
                    Channel::Viewport => ChannelSlice::Viewport(slice_window(&self.viewport[p], start, end)),
                };
                SessionWindow { start_ms: start, end_ms: end, a: slice(Participant::A), b: slice(Participant::B) }
            })
            .collect())
    }

    pub fn sort_streams(&mut self) {
        for p in Participant::BOTH {
            self.gaze[p].sort_by_key(|s| s.t_ms);
            self.pupil[p].sort_by_key(|s| s.t_ms);
            self.viewport[p].sort_by_key(|s| s.t_ms);
        }
    }
}

/// Contiguous, non-overlapping windows `[start + i*w, start + (i+1)*w)`.
/// A trailing partial window is dropped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WindowGrid {
    pub start_ms: u64,
    pub window_ms: u64,
    pub count: usize,
}

impl WindowGrid {
    pub fn over(start_ms: u64, end_ms: u64, window_s: f64) -> Result<Self, SessionError> {
        let window_ms = (window_s * 1000.0).round();
        if !(window_ms >= 1.0) {
            return Err(SessionError::ZeroWindow);
        }
        let window_ms = window_ms as u64;
        let span_ms = end_ms.saturating_sub(start_ms);
        if window_ms > span_ms {
            return Err(SessionError::WindowTooLong { window_ms, span_ms });
        }
        Ok(Self { start_ms, window_ms, count: (span_ms / window_ms) as usize })
    }

    pub fn iter(&self) -> impl Iterator<Item = (u64, u64)> + '_ {
        (0..self.count).map(move |i| {
            let s = self.start_ms + i as u64 * self.window_ms;
            (s, s + self.window_ms)
        })
    }

    pub fn end_ms(&self) -> u64 {
        self.start_ms + self.count as u64 * self.window_ms
    }
}

#[derive(Debug, Clone, Copy)]
pub enum ChannelSlice<'a> {
    Gaze(&'a [GazeSample]),
    Pupil(&'a [PupilSample]),
    Viewport(&'a [ViewportState]),
}

impl ChannelSlice<'_> {
    pub fn len(&self) -> usize {
        match self {
            ChannelSlice::Gaze(s) => s.len(),
            ChannelSlice::Pupil(s) => s.len(),
            ChannelSlice::Viewport(s) => s.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SessionWindow<'a> {
    pub start_ms: u64,
    pub end_ms: u64,
    pub a: ChannelSlice<'a>,
    pub b: ChannelSlice<'a>,
}

/// Samples with `start <= t_ms < end` from a time-sorted slice.
pub fn slice_window<T: Timed>(samples: &[T], start_ms: u64, end_ms: u64) -> &[T] {
    let lo = samples.partition_point(|s| s.t_ms() < start_ms);
    let hi = samples.partition_point(|s| s.t_ms() < end_ms);
    &samples[lo..hi.max(lo)]
}

// ---------------------------------------------------------------------------
// JSONL
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MetaRecord {
    #[serde(rename = "type")]
    kind: String,
    session_id: String,
    dyad_id: String,
    calibration_end_ms: u64,
    duration_ms: u64,
    screen_w_px: f64,
    screen_h_px: f64,
    gaze_rate_hz: f64,
    pupil_rate_hz: f64,
    bugs_solved: u32,
}

impl From<MetaRecord> for SessionMeta {
    fn from(r: MetaRecord) -> Self {
        SessionMeta {
            session_id: r.session_id,
            dyad_id: r.dyad_id,
            calibration_end_ms: r.calibration_end_ms,
            duration_ms: r.duration_ms,
            screen_w_px: r.screen_w_px,
            screen_h_px: r.screen_h_px,
            gaze_rate_hz: r.gaze_rate_hz,
            pupil_rate_hz: r.pupil_rate_hz,
            bugs_solved: r.bugs_solved,
        }
    }
}

impl From<&SessionMeta> for MetaRecord {
    fn from(m: &SessionMeta) -> Self {
        MetaRecord {
            kind: "meta".into(),
            session_id: m.session_id.clone(),
            dyad_id: m.dyad_id.clone(),
            calibration_end_ms: m.calibration_end_ms,
            duration_ms: m.duration_ms,
            screen_w_px: m.screen_w_px,
            screen_h_px: m.screen_h_px,
            gaze_rate_hz: m.gaze_rate_hz,
            pupil_rate_hz: m.pupil_rate_hz,
            bugs_solved: m.bugs_solved,
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GazeRecord {
    #[serde(rename = "type")]
    kind: String,
    p: Participant,
    t_ms: u64,
    x: f64,
    y: f64,
    valid: bool,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PupilRecord {
    #[serde(rename = "type")]
    kind: String,
    p: Participant,
    t_ms: u64,
    d_mm: f64,
    valid: bool,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ViewportRecord {
    #[serde(rename = "type")]
    kind: String,
    p: Participant,
    t_ms: u64,
    first_visible_line: f64,
    line_height_px: f64,
    top_offset_px: f64,
}

fn schema(line: usize, message: impl Into<String>) -> SessionError {
    SessionError::SchemaError { line, message: message.into() }
}

fn decode<T: serde::de::DeserializeOwned>(value: Value, line: usize) -> Result<T, SessionError> {
    serde_json::from_value(value).map_err(|e| schema(line, e.to_string()))
}

/// Reads a JSONL session. Line numbers in errors are 1-based.
pub fn parse_session<R: BufRead>(reader: R) -> Result<DyadSession, SessionError> {
    let mut meta: Option<SessionMeta> = None;
    let mut gaze = PerParticipant::<Vec<GazeSample>>::default();
    let mut pupil = PerParticipant::<Vec<PupilSample>>::default();
    let mut viewport = PerParticipant::<Vec<ViewportState>>::default();
    // Viewport screen dimensions come from the meta record, which must be first.
    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let value: Value = serde_json::from_str(&line).map_err(|e| schema(lineno, e.to_string()))?;
        let kind = value
            .get("type")
            .and_then(Value::as_str)
            .ok_or_else(|| schema(lineno, "record has no string \"type\" field"))?
            .to_owned();
        if kind != "meta" && meta.is_none() {
            return Err(SessionError::MissingMeta(format!("line {lineno}: first record is \"{kind}\", expected \"meta\"")));
        }
        match kind.as_str() {
            "meta" => {
                if meta.is_some() {
                    return Err(SessionError::MissingMeta(format!("line {lineno}: duplicate meta record")));
                }
                let rec: MetaRecord = decode(value, lineno)?;
                let m = SessionMeta::from(rec);
                if m.calibration_end_ms == 0 || m.calibration_end_ms >= m.duration_ms {
                    return Err(schema(lineno, "require 0 < calibration_end_ms < duration_ms"));
                }
                if !(m.screen_w_px > 0.0 && m.screen_h_px > 0.0) {
                    return Err(schema(lineno, "screen dimensions must be positive"));
                }
                if !(m.gaze_rate_hz > 0.0 && m.pupil_rate_hz > 0.0) {
                    return Err(schema(lineno, "sampling rates must be positive"));
                }
                meta = Some(m);
            }
            "gaze" => {
                let r: GazeRecord = decode(value, lineno)?;
                if r.valid && !((0.0..=1.0).contains(&r.x) && (0.0..=1.0).contains(&r.y)) {
                    return Err(schema(lineno, format!("gaze x={} y={} outside [0, 1]", r.x, r.y)));
                }
                gaze[r.p].push(GazeSample { t_ms: r.t_ms, participant: r.p, x_pct: r.x, y_pct: r.y, valid: r.valid });
            }
            "pupil" => {
                let r: PupilRecord = decode(value, lineno)?;
                if !r.d_mm.is_finite() {
                    return Err(schema(lineno, "pupil d_mm is not finite"));
                }
                pupil[r.p].push(PupilSample::new(r.t_ms, r.p, r.d_mm, r.valid));
            }
            "viewport" => {
                let r: ViewportRecord = decode(value, lineno)?;
                if !(r.line_height_px > 0.0) || r.first_visible_line < 0.0 || r.top_offset_px < 0.0 {
                    return Err(schema(
                        lineno,
                        "viewport requires line_height_px > 0, first_visible_line >= 0, top_offset_px >= 0",
                    ));
                }
                let m = meta.as_ref().expect("meta checked above");
                viewport[r.p].push(ViewportState {
                    t_ms: r.t_ms,
                    participant: r.p,
                    first_visible_line: r.first_visible_line,
                    line_height_px: r.line_height_px,
                    top_offset_px: r.top_offset_px,
                    screen_h_px: m.screen_h_px,
                    screen_w_px: m.screen_w_px,
                });
            }
            other => return Err(schema(lineno, format!("unknown record type \"{other}\""))),
        }
    }
    let meta = meta.ok_or_else(|| SessionError::MissingMeta("no meta record".into()))?;
    for p in Participant::BOTH {
        if gaze[p].is_empty() {
            return Err(SessionError::EmptyStream { participant: p, stream: Channel::Gaze });
        }
        if pupil[p].is_empty() {
            return Err(SessionError::EmptyStream { participant: p, stream: Channel::Pupil });
        }
        if viewport[p].is_empty() {
            return Err(SessionError::EmptyStream { participant: p, stream: Channel::Viewport });
        }
    }
    let mut session = DyadSession { meta, gaze, pupil, viewport };
    session.sort_streams();
    Ok(session)
}

pub fn read_session_file(path: &std::path::Path) -> Result<DyadSession, SessionError> {
    let file = std::fs::File::open(path)?;
    parse_session(std::io::BufReader::new(file))
}

/// Writes the session as JSONL: meta first, then per participant the
/// viewport, gaze and pupil records in time order.
pub fn write_session<W: Write>(session: &DyadSession, mut out: W) -> Result<(), SessionError> {
    let to_io = |e: serde_json::Error| SessionError::Io(e.into());
    let meta = MetaRecord::from(&session.meta);
    serde_json::to_writer(&mut out, &meta).map_err(to_io)?;
    out.write_all(b"\n")?;
    for p in Participant::BOTH {
        for v in &session.viewport[p] {
            let rec = ViewportRecord {
                kind: "viewport".into(),
                p,
                t_ms: v.t_ms,
                first_visible_line: v.first_visible_line,
                line_height_px: v.line_height_px,
                top_offset_px: v.top_offset_px,
            };
            serde_json::to_writer(&mut out, &rec).map_err(to_io)?;
            out.write_all(b"\n")?;
        }
        for g in &session.gaze[p] {
            let rec = GazeRecord { kind: "gaze".into(), p, t_ms: g.t_ms, x: g.x_pct, y: g.y_pct, valid: g.valid };
            serde_json::to_writer(&mut out, &rec).map_err(to_io)?;
            out.write_all(b"\n")?;
        }
        for s in &session.pupil[p] {
            let rec = PupilRecord { kind: "pupil".into(), p, t_ms: s.t_ms, d_mm: s.d_mm, valid: s.valid };
            serde_json::to_writer(&mut out, &rec).map_err(to_io)?;
            out.write_all(b"\n")?;
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind")]
pub enum Issue {
    Gap { participant: Participant, stream: Channel, start_ms: u64, end_ms: u64 },
    LowValidFraction { participant: Participant, stream: Channel, fraction: f64 },
    ShortCalibration { calibration_ms: u64 },
    NonMonotonic { participant: Participant, stream: Channel, index: usize },
}

impl Issue {
    pub fn is_fatal(&self) -> bool {
        matches!(self, Issue::NonMonotonic { .. })
    }
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Issue::Gap { participant, stream, start_ms, end_ms } => {
                write!(f, "warning: {stream} gap for {participant} from {start_ms} to {end_ms} ms")
            }
            Issue::LowValidFraction { participant, stream, fraction } => {
                write!(f, "warning: only {:.1}% valid {stream} samples for {participant}", fraction * 100.0)
            }
            Issue::ShortCalibration { calibration_ms } => {
                write!(f, "warning: calibration segment is {calibration_ms} ms (< {MIN_CALIBRATION_MS} ms)")
            }
            Issue::NonMonotonic { participant, stream, index } => {
                write!(f, "fatal: {stream} samples for {participant} go back in time at index {index}")
            }
        }
    }
}

fn stream_issues<T: Timed>(
    samples: &[T],
    valid: impl Fn(&T) -> bool,
    participant: Participant,
    stream: Channel,
    issues: &mut Vec<Issue>,
) {
    for (i, pair) in samples.windows(2).enumerate() {
        let (prev, next) = (pair[0].t_ms(), pair[1].t_ms());
        if next < prev {
            issues.push(Issue::NonMonotonic { participant, stream, index: i + 1 });
        } else if next - prev > MAX_GAP_MS {
            issues.push(Issue::Gap { participant, stream, start_ms: prev, end_ms: next });
        }
    }
    if !samples.is_empty() {
        let fraction = samples.iter().filter(|s| valid(s)).count() as f64 / samples.len() as f64;
        if fraction < MIN_VALID_FRACTION {
            issues.push(Issue::LowValidFraction { participant, stream, fraction });
        }
    }
}

/// Data-quality warnings and fatal ordering problems; empty means clean.
pub fn validate_session(session: &DyadSession) -> Vec<Issue> {
    let mut issues = Vec::new();
    if session.meta.calibration_end_ms < MIN_CALIBRATION_MS {
        issues.push(Issue::ShortCalibration { calibration_ms: session.meta.calibration_end_ms });
    }
    for p in Participant::BOTH {
        stream_issues(&session.gaze[p], |g| g.valid, p, Channel::Gaze, &mut issues);
        stream_issues(&session.pupil[p], |s| s.valid, p, Channel::Pupil, &mut issues);
        for (i, pair) in session.viewport[p].windows(2).enumerate() {
            if pair[1].t_ms < pair[0].t_ms {
                issues.push(Issue::NonMonotonic { participant: p, stream: Channel::Viewport, index: i + 1 });
            }
        }
    }
    issues
}
