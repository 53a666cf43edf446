//! Joint visual attention.
//!
//! Gaze is mapped onto a grid anchored to the code document rather than the
//! screen: rows are fixed blocks of code lines, columns are horizontal screen
//! fractions. Each participant's mapped gaze is counted per window and the two
//! histograms are compared by cosine similarity.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::metric::{MetricName, MetricSeries};
use crate::session::{slice_window, DyadSession, GazeSample, Participant, SessionError, ViewportState, WindowGrid};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSpec {
    pub row_lines: u32,
    pub n_cols: u32,
    pub max_rows: u32,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { row_lines: 6, n_cols: 10, max_rows: 100_000 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Cell {
    pub row: u32,
    pub col: u32,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct AttentionHistogram {
    pub counts: BTreeMap<Cell, u64>,
    pub total: u64,
    pub window_start_ms: u64,
}

impl AttentionHistogram {
    pub fn add(&mut self, cell: Cell) {
        *self.counts.entry(cell).or_insert(0) += 1;
        self.total += 1;
    }

    fn sum_squares(&self) -> f64 {
        self.counts.values().map(|&c| (c as f64) * (c as f64)).sum()
    }
}

/// Maps one gaze sample to a document-anchored grid cell. `None` for invalid
/// samples, gaze above the code pane, and rows beyond `max_rows`.
pub fn gaze_to_cell(g: &GazeSample, v: &ViewportState, spec: &GridSpec) -> Option<Cell> {
    if !g.valid {
        return None;
    }
    let codeline = v.first_visible_line + (g.y_pct * v.screen_h_px - v.top_offset_px) / v.line_height_px;
    if !(codeline >= 0.0) {
        return None;
    }
    let row = (codeline / spec.row_lines as f64).floor();
    if row >= spec.max_rows as f64 {
        return None;
    }
    let col = ((g.x_pct * spec.n_cols as f64).floor() as i64).clamp(0, spec.n_cols as i64 - 1) as u32;
    Some(Cell { row: row as u32, col })
}

/// Latest viewport state at or before `t_ms`.
pub fn viewport_at(viewports: &[ViewportState], t_ms: u64) -> Option<&ViewportState> {
    let idx = viewports.partition_point(|v| v.t_ms <= t_ms);
    idx.checked_sub(1).map(|i| &viewports[i])
}

/// Histogram of one participant's gaze within one window. `viewports` is that
/// participant's full time-sorted viewport stream.
pub fn build_histogram(
    samples: &[GazeSample],
    viewports: &[ViewportState],
    spec: &GridSpec,
    window_start_ms: u64,
) -> AttentionHistogram {
    let mut hist = AttentionHistogram { window_start_ms, ..Default::default() };
    for g in samples {
        if let Some(cell) = viewport_at(viewports, g.t_ms).and_then(|v| gaze_to_cell(g, v, spec)) {
            hist.add(cell);
        }
    }
    hist
}

/// Cosine similarity of two count histograms; 0 when either is empty.
pub fn cosine_sim(h1: &AttentionHistogram, h2: &AttentionHistogram) -> f64 {
    if h1.total == 0 || h2.total == 0 {
        return 0.0;
    }
    let (small, large) = if h1.counts.len() <= h2.counts.len() { (h1, h2) } else { (h2, h1) };
    let dot: f64 = small
        .counts
        .iter()
        .filter_map(|(cell, &c)| large.counts.get(cell).map(|&d| c as f64 * d as f64))
        .sum();
    if dot == 0.0 {
        return 0.0;
    }
    // sqrt(n1 * n2) rather than sqrt(n1) * sqrt(n2): exact for identical integer histograms.
    (dot / (h1.sum_squares() * h2.sum_squares()).sqrt()).clamp(0.0, 1.0)
}

/// JVA on an arbitrary window grid.
pub fn jva_on_grid(session: &DyadSession, spec: &GridSpec, grid: &WindowGrid) -> MetricSeries {
    let mut series = MetricSeries::new(MetricName::Jva, grid.window_ms as f64 / 1000.0);
    for (start, end) in grid.iter() {
        let hist = |p: Participant| {
            build_histogram(slice_window(&session.gaze[p], start, end), &session.viewport[p], spec, start)
        };
        series.values.push((start, cosine_sim(&hist(Participant::A), &hist(Participant::B))));
    }
    series
}

/// Per-window JVA over the task span.
pub fn jva_series(session: &DyadSession, spec: &GridSpec, window_s: f64) -> Result<MetricSeries, SessionError> {
    let grid = session.task_grid(window_s)?;
    Ok(jva_on_grid(session, spec, &grid))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn vp(first: f64) -> ViewportState {
        ViewportState {
            t_ms: 0,
            participant: Participant::A,
            first_visible_line: first,
            line_height_px: 20.0,
            top_offset_px: 0.0,
            screen_h_px: 1000.0,
            screen_w_px: 1600.0,
        }
    }

    fn gaze(t_ms: u64, x: f64, y: f64) -> GazeSample {
        GazeSample { t_ms, participant: Participant::A, x_pct: x, y_pct: y, valid: true }
    }

    fn hist(cells: &[(u32, u32, u64)]) -> AttentionHistogram {
        let mut h = AttentionHistogram::default();
        for &(row, col, n) in cells {
            h.counts.insert(Cell { row, col }, n);
            h.total += n;
        }
        h
    }

    #[test]
    fn maps_gaze_to_cell() {
        let cell = gaze_to_cell(&gaze(0, 0.95, 0.5), &vp(100.0), &GridSpec::default()).unwrap();
        // codeline 125 -> row 20, x 0.95 -> col 9
        assert_eq!(cell, Cell { row: 20, col: 9 });
        let mut g = gaze(0, 0.95, 0.5);
        g.valid = false;
        assert_eq!(gaze_to_cell(&g, &vp(100.0), &GridSpec::default()), None);
        assert_eq!(gaze_to_cell(&gaze(0, 1.0, 0.5), &vp(0.0), &GridSpec::default()).unwrap().col, 9);
    }

    #[test]
    fn above_code_pane_is_unmapped() {
        let mut v = vp(0.0);
        v.top_offset_px = 100.0;
        assert_eq!(gaze_to_cell(&gaze(0, 0.5, 0.05), &v, &GridSpec::default()), None);
    }

    #[test]
    fn scroll_changes_screen_to_row_mapping() {
        let spec = GridSpec::default();
        let before = gaze_to_cell(&gaze(0, 0.5, 0.5), &vp(0.0), &spec).unwrap();
        let after = gaze_to_cell(&gaze(0, 0.5, 0.5), &vp(100.0), &spec).unwrap();
        assert_ne!(before.row, after.row);
        // codeline 125 seen at y=0.5 with top line 100, and at y=0.25 with top line 120
        let a = gaze_to_cell(&gaze(0, 0.5, 0.5), &vp(100.0), &spec).unwrap();
        let b = gaze_to_cell(&gaze(0, 0.5, 0.1), &vp(120.0), &spec).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn histogram_counts() {
        let spec = GridSpec::default();
        let vps = [vp(0.0)];
        // y = 0.25 -> codeline 12.5 -> row 2; x = 0.15 -> col 1
        let samples = [gaze(1, 0.15, 0.25), gaze(2, 0.15, 0.25), gaze(3, 0.15, 0.25)];
        let h = build_histogram(&samples, &vps, &spec, 0);
        assert_eq!(h.total, 3);
        assert_eq!(h.counts.get(&Cell { row: 2, col: 1 }), Some(&3));
        let h = build_histogram(&[], &vps, &spec, 0);
        assert_eq!(h.total, 0);
        assert!(h.counts.is_empty());
    }

    #[test]
    fn histogram_across_scroll_matches_per_sample_mapping() {
        let spec = GridSpec::default();
        let mut v2 = vp(37.5);
        v2.t_ms = 500;
        let mut v3 = vp(80.0);
        v3.t_ms = 900;
        let vps = [vp(0.0), v2, v3];
        let samples: Vec<GazeSample> =
            (0..1000).map(|i| gaze(i, (i as f64 * 0.013) % 1.0, (i as f64 * 0.0071) % 1.0)).collect();
        let h = build_histogram(&samples, &vps, &spec, 0);
        // brute force: look up the viewport by linear scan for every sample
        let mut expected = BTreeMap::new();
        for g in &samples {
            let v = vps.iter().filter(|v| v.t_ms <= g.t_ms).last().unwrap();
            let line = v.first_visible_line + g.y_pct * 1000.0 / 20.0;
            let row = (line / 6.0).floor() as u32;
            let col = ((g.x_pct * 10.0).floor() as u32).min(9);
            *expected.entry(Cell { row, col }).or_insert(0u64) += 1;
        }
        assert_eq!(h.counts, expected);
        assert_eq!(h.total, 1000);
    }

    #[test]
    fn cosine_cases() {
        let h = hist(&[(0, 0, 3), (1, 2, 5)]);
        assert_eq!(cosine_sim(&h, &h), 1.0);
        assert_eq!(cosine_sim(&hist(&[(0, 0, 1)]), &hist(&[(0, 1, 1)])), 0.0);
        let v = cosine_sim(&hist(&[(0, 0, 1), (0, 1, 1)]), &hist(&[(0, 0, 1), (0, 2, 1)]));
        assert!((v - 0.5).abs() < 1e-15);
        assert_eq!(cosine_sim(&hist(&[]), &hist(&[])), 0.0);
        assert_eq!(cosine_sim(&h, &hist(&[])), 0.0);
    }

    fn arb_hist() -> impl Strategy<Value = AttentionHistogram> {
        prop::collection::vec((0u32..8, 0u32..4, 1u64..50), 0..12).prop_map(|cells| {
            let mut h = AttentionHistogram::default();
            for (row, col, n) in cells {
                for _ in 0..n {
                    h.add(Cell { row, col });
                }
            }
            h
        })
    }

    proptest! {
        #[test]
        fn cosine_symmetric_and_bounded(a in arb_hist(), b in arb_hist()) {
            let ab = cosine_sim(&a, &b);
            prop_assert_eq!(ab, cosine_sim(&b, &a));
            prop_assert!((0.0..=1.0).contains(&ab));
        }

        #[test]
        fn histogram_ignores_sample_order(seed in 0u64..1000) {
            let spec = GridSpec::default();
            let vps = [vp(12.0)];
            let mut samples: Vec<GazeSample> = (0..200)
                .map(|i| gaze(i, ((i * 37 + seed) % 101) as f64 / 100.0, ((i * 53 + seed) % 97) as f64 / 96.0))
                .collect();
            let h1 = build_histogram(&samples, &vps, &spec, 0);
            samples.reverse();
            samples.rotate_left((seed % 200) as usize);
            let h2 = build_histogram(&samples, &vps, &spec, 0);
            prop_assert_eq!(h1, h2);
        }
    }
}
