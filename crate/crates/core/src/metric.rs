//! Windowed metric series and per-window metric frames.

use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum MetricName {
    #[serde(rename = "JVA")]
    Jva,
    #[serde(rename = "JME")]
    Jme,
    #[serde(rename = "ME_A")]
    MeA,
    #[serde(rename = "ME_B")]
    MeB,
}

impl MetricName {
    pub const ALL: [MetricName; 4] = [MetricName::Jva, MetricName::Jme, MetricName::MeA, MetricName::MeB];

    /// Joint measures live in `[0, 1]`; individual effort is only bounded below.
    pub fn clamp(self, v: f64) -> f64 {
        match self {
            MetricName::Jva | MetricName::Jme => v.clamp(0.0, 1.0),
            MetricName::MeA | MetricName::MeB => v.max(0.0),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            MetricName::Jva => "JVA",
            MetricName::Jme => "JME",
            MetricName::MeA => "ME_A",
            MetricName::MeB => "ME_B",
        }
    }
}

impl fmt::Display for MetricName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MetricName {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "JVA" => Ok(MetricName::Jva),
            "JME" => Ok(MetricName::Jme),
            "ME_A" => Ok(MetricName::MeA),
            "ME_B" => Ok(MetricName::MeB),
            other => Err(format!("unknown metric name {other:?}")),
        }
    }
}

/// `(window_start_ms, value)` pairs with strictly increasing starts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSeries {
    pub name: MetricName,
    pub window_s: f64,
    pub values: Vec<(u64, f64)>,
}

impl MetricSeries {
    pub fn new(name: MetricName, window_s: f64) -> Self {
        Self { name, window_s, values: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn mean(&self) -> Option<f64> {
        if self.values.is_empty() {
            None
        } else {
            Some(self.values.iter().map(|(_, v)| v).sum::<f64>() / self.values.len() as f64)
        }
    }

    pub fn raw(&self) -> Vec<f64> {
        self.values.iter().map(|&(_, v)| v).collect()
    }

    pub fn value_at(&self, start_ms: u64) -> Option<f64> {
        self.values.binary_search_by_key(&start_ms, |&(t, _)| t).ok().map(|i| self.values[i].1)
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "# name={} window_s={}", self.name, self.window_s)?;
        writeln!(out, "window_start_ms,value")?;
        for (t, v) in &self.values {
            writeln!(out, "{t},{v}")?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(reader: R) -> Result<Self, String> {
        let mut lines = reader.lines();
        let header = lines.next().ok_or("empty metric file")?.map_err(|e| e.to_string())?;
        let mut name = None;
        let mut window_s = None;
        for tok in header.trim_start_matches('#').split_whitespace() {
            if let Some(v) = tok.strip_prefix("name=") {
                name = Some(v.parse::<MetricName>()?);
            } else if let Some(v) = tok.strip_prefix("window_s=") {
                window_s = Some(v.parse::<f64>().map_err(|e| e.to_string())?);
            }
        }
        let mut series = MetricSeries::new(
            name.ok_or("header lacks name=")?,
            window_s.ok_or("header lacks window_s=")?,
        );
        for (i, line) in lines.enumerate() {
            let line = line.map_err(|e| e.to_string())?;
            if i == 0 && line.starts_with("window_start_ms") || line.trim().is_empty() {
                continue;
            }
            let (t, v) = line.split_once(',').ok_or_else(|| format!("bad row {line:?}"))?;
            let t: u64 = t.parse().map_err(|e| format!("bad time {t:?}: {e}"))?;
            let v: f64 = v.parse().map_err(|e| format!("bad value {v:?}: {e}"))?;
            series.values.push((t, v));
        }
        Ok(series)
    }
}

/// All four metrics for one analysis window. `t_ms` is the window end, the
/// moment the values become available.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricFrame {
    pub t_ms: u64,
    pub jva: Option<f64>,
    pub jme: Option<f64>,
    pub me_a: Option<f64>,
    pub me_b: Option<f64>,
}

impl MetricFrame {
    pub fn get(&self, name: MetricName) -> Option<f64> {
        match name {
            MetricName::Jva => self.jva,
            MetricName::Jme => self.jme,
            MetricName::MeA => self.me_a,
            MetricName::MeB => self.me_b,
        }
    }

    pub fn set(&mut self, name: MetricName, value: Option<f64>) {
        match name {
            MetricName::Jva => self.jva = value,
            MetricName::Jme => self.jme = value,
            MetricName::MeA => self.me_a = value,
            MetricName::MeB => self.me_b = value,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip() {
        let mut s = MetricSeries::new(MetricName::Jva, 30.0);
        s.values = vec![(0, 0.25), (30_000, 1.0)];
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("# name=JVA window_s=30\nwindow_start_ms,value\n0,0.25\n"));
        assert_eq!(MetricSeries::read_csv(buf.as_slice()).unwrap(), s);
    }

    #[test]
    fn clamping() {
        assert_eq!(MetricName::Jva.clamp(1.3), 1.0);
        assert_eq!(MetricName::Jme.clamp(-0.1), 0.0);
        assert_eq!(MetricName::MeA.clamp(-2.0), 0.0);
        assert_eq!(MetricName::MeB.clamp(7.0), 7.0);
    }
}
