//! Cross-cohort comparison tables: descriptives, omnibus tests and pairwise
//! tests per dependent measure.

use std::path::PathBuf;

use anyhow::Context;
use serde::Serialize;

use dyadlens::causality::causality_summary;
use dyadlens::episodes::{classify_intersection, episode_proportions, EpisodeLabel};
use dyadlens::stats::{bonferroni, levene_bf, one_way_anova, welch_anova, AnovaResult, StatsError};

use crate::commands::{analyze_file, expand_sessions};
use crate::config::{usage, RunConfig};

const MEASURES: [&str; 9] = [
    "debugging_success",
    "jva",
    "jme",
    "causality_effect_size",
    "causality_significance",
    "episodes_HH",
    "episodes_HL",
    "episodes_LH",
    "episodes_LL",
];

#[derive(Debug, Serialize)]
struct Test {
    #[serde(skip_serializing_if = "Option::is_none")]
    result: Option<AnovaResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

impl From<Result<AnovaResult, StatsError>> for Test {
    fn from(r: Result<AnovaResult, StatsError>) -> Self {
        match r {
            Ok(result) => Test { result: Some(result), error: None },
            Err(e) => Test { result: None, error: Some(e.to_string()) },
        }
    }
}

#[derive(Debug, Serialize)]
struct Descriptive {
    cohort: String,
    n: usize,
    mean: f64,
    sd: f64,
}

#[derive(Debug, Serialize)]
struct Pairwise {
    a: String,
    b: String,
    anova: Test,
    welch: Test,
    /// Classical p multiplied by the number of pairs, capped at 1.
    #[serde(skip_serializing_if = "Option::is_none")]
    p_bonferroni: Option<f64>,
}

#[derive(Debug, Serialize)]
struct MeasureTable {
    measure: &'static str,
    descriptives: Vec<Descriptive>,
    anova: Test,
    welch: Test,
    levene: Test,
    pairwise: Vec<Pairwise>,
}

#[derive(Debug, Serialize)]
struct Cohort {
    name: String,
    n: usize,
}

#[derive(Debug, Serialize)]
struct Report {
    cohorts: Vec<Cohort>,
    tables: Vec<MeasureTable>,
}

fn parse_cohorts(specs: &[String]) -> anyhow::Result<Vec<(String, Vec<PathBuf>)>> {
    let mut cohorts: Vec<(String, Vec<PathBuf>)> = Vec::new();
    for spec in specs {
        let (name, path) = spec
            .split_once('=')
            .filter(|(n, p)| !n.is_empty() && !p.is_empty())
            .ok_or_else(|| usage(format!("--cohort expects NAME=PATH, got {spec:?}")))?;
        match cohorts.iter_mut().find(|(n, _)| n == name) {
            Some((_, paths)) => paths.push(PathBuf::from(path)),
            None => cohorts.push((name.to_string(), vec![PathBuf::from(path)])),
        }
    }
    if cohorts.len() < 2 {
        return Err(usage("compare needs at least two cohorts"));
    }
    Ok(cohorts)
}

/// One row per dyad, columns in `MEASURES` order.
fn dyad_measures(cfg: &RunConfig, paths: &[PathBuf]) -> anyhow::Result<Vec<[f64; 9]>> {
    let mut rows = Vec::new();
    for path in expand_sessions(paths)? {
        let (session, a) = analyze_file(cfg, &path)?;
        let ctx = || format!("measures of {}", path.display());
        let e = classify_intersection(&a.jme, &a.jva_fine).with_context(ctx)?;
        let p = episode_proportions(&e).with_context(ctx)?;
        let (jme, jva) = a.joint_pair();
        let c = causality_summary(&jme, &jva, cfg.max_lag).with_context(ctx)?;
        rows.push([
            session.meta.bugs_solved as f64,
            a.jva.mean().unwrap_or(f64::NAN),
            a.jme.mean().unwrap_or(f64::NAN),
            c.effect_size,
            c.significance,
            p.get(EpisodeLabel::HH),
            p.get(EpisodeLabel::HL),
            p.get(EpisodeLabel::LH),
            p.get(EpisodeLabel::LL),
        ]);
    }
    Ok(rows)
}

fn describe(cohort: &str, v: &[f64]) -> Descriptive {
    let n = v.len();
    let mean = v.iter().sum::<f64>() / n as f64;
    let sd = if n > 1 { (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt() } else { f64::NAN };
    Descriptive { cohort: cohort.to_string(), n, mean, sd }
}

pub fn compare(cfg: &RunConfig, specs: &[String]) -> anyhow::Result<()> {
    let cohorts = parse_cohorts(specs)?;
    let data: Vec<(String, Vec<[f64; 9]>)> =
        cohorts.iter().map(|(name, paths)| dyad_measures(cfg, paths).map(|rows| (name.clone(), rows))).collect::<anyhow::Result<_>>()?;
    let n_pairs = data.len() * (data.len() - 1) / 2;
    let tables = MEASURES
        .iter()
        .enumerate()
        .map(|(k, &measure)| {
            let groups: Vec<Vec<f64>> = data.iter().map(|(_, rows)| rows.iter().map(|r| r[k]).collect()).collect();
            let mut pairwise = Vec::new();
            for i in 0..data.len() {
                for j in i + 1..data.len() {
                    let pair = [groups[i].clone(), groups[j].clone()];
                    let anova = one_way_anova(&pair);
                    let p_bonferroni = anova.as_ref().ok().map(|r| bonferroni(&vec![r.p; n_pairs])[0]);
                    pairwise.push(Pairwise {
                        a: data[i].0.clone(),
                        b: data[j].0.clone(),
                        anova: anova.into(),
                        welch: welch_anova(&pair).into(),
                        p_bonferroni,
                    });
                }
            }
            MeasureTable {
                measure,
                descriptives: data.iter().zip(&groups).map(|((name, _), g)| describe(name, g)).collect(),
                anova: one_way_anova(&groups).into(),
                welch: welch_anova(&groups).into(),
                levene: levene_bf(&groups).into(),
                pairwise,
            }
        })
        .collect();
    let report = Report { cohorts: data.iter().map(|(name, rows)| Cohort { name: name.clone(), n: rows.len() }).collect(), tables };
    let path = cfg.out_file("comparison.json")?;
    let mut text = serde_json::to_string_pretty(&report)?;
    text.push('\n');
    std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))
}
