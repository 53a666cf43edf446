use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::{Args, Subcommand, ValueEnum};
use serde::Serialize;

use dyadlens::causality::{causality_summary, quadrant_summary, write_scatter_csv, CausalityResult};
use dyadlens::episodes::{classify_intersection, episode_proportions, write_episodes_csv};
use dyadlens::feedback::{
    compute_baselines, run_proactive, run_reactive, write_events_jsonl, Engine, Mode, ScenarioTable,
};
use dyadlens::forecast::{eval_forecaster, fit_forecaster, LinearArModel};
use dyadlens::metric::{MetricFrame, MetricSeries};
use dyadlens::pipeline::{analyze as run_pipeline, Analysis};
use dyadlens::session::{read_session_file, validate_session, write_session, DyadSession};
use dyadlens::synth::{gen_dyad, AttentionLink};

use crate::config::{usage, RunConfig};

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum LinkArg {
    None,
    EffortLeads,
    AttentionLeads,
    Concurrent,
}

impl From<LinkArg> for AttentionLink {
    fn from(l: LinkArg) -> Self {
        match l {
            LinkArg::None => AttentionLink::None,
            LinkArg::EffortLeads => AttentionLink::EffortLeads,
            LinkArg::AttentionLeads => AttentionLink::AttentionLeads,
            LinkArg::Concurrent => AttentionLink::Concurrent,
        }
    }
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Probability that both participants share a fixation target.
    #[arg(long = "shared-focus")]
    shared_focus: Option<f64>,
    /// Coupling of B's effort to A's.
    #[arg(long)]
    kappa: Option<f64>,
    #[arg(long = "duration-s")]
    duration_s: Option<f64>,
    #[arg(long = "calibration-s")]
    calibration_s: Option<f64>,
    /// Planted relation between joint effort and joint attention.
    #[arg(long, value_enum)]
    link: Option<LinkArg>,
    /// Number of dyads; seeds run consecutively from --seed.
    #[arg(long, default_value_t = 1)]
    count: u64,
}

#[derive(Debug, Subcommand)]
pub enum ForecastCommand {
    /// Fit the default forecaster on a cohort.
    Train {
        #[arg(required = true)]
        sessions: Vec<PathBuf>,
    },
    /// Score a trained model against persistence on held-out sessions.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(required = true)]
        sessions: Vec<PathBuf>,
    },
}

fn create(cfg: &RunConfig, name: &str) -> anyhow::Result<BufWriter<File>> {
    let path = cfg.out_file(name)?;
    let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(file))
}

fn write_json<T: Serialize>(cfg: &RunConfig, name: &str, value: &T) -> anyhow::Result<()> {
    let mut out = create(cfg, name)?;
    serde_json::to_writer_pretty(&mut out, value)?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}

fn write_series(cfg: &RunConfig, name: &str, series: &MetricSeries) -> anyhow::Result<()> {
    let mut out = create(cfg, name)?;
    series.write_csv(&mut out)?;
    out.flush()?;
    Ok(())
}

pub fn load_session(path: &Path) -> anyhow::Result<DyadSession> {
    if !path.is_file() {
        return Err(usage(format!("session {} does not exist", path.display())));
    }
    let session = read_session_file(path).with_context(|| format!("reading session {}", path.display()))?;
    for issue in validate_session(&session) {
        eprintln!("{}: {issue}", path.display());
    }
    Ok(session)
}

pub fn analyze_file(cfg: &RunConfig, path: &Path) -> anyhow::Result<(DyadSession, Analysis)> {
    let session = load_session(path)?;
    let analysis = run_pipeline(&session, &cfg.pipeline).with_context(|| format!("analysing {}", path.display()))?;
    Ok((session, analysis))
}

/// Expands directories into their `*.jsonl` files, sorted by name.
pub fn expand_sessions(paths: &[PathBuf]) -> anyhow::Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for p in paths {
        if p.is_dir() {
            let mut found: Vec<PathBuf> = std::fs::read_dir(p)
                .with_context(|| format!("listing {}", p.display()))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| f.extension().is_some_and(|x| x == "jsonl"))
                .collect();
            found.sort();
            if found.is_empty() {
                return Err(usage(format!("{} holds no .jsonl sessions", p.display())));
            }
            out.extend(found);
        } else if p.exists() {
            out.push(p.clone());
        } else {
            return Err(usage(format!("{} does not exist", p.display())));
        }
    }
    Ok(out)
}

fn dyad_id(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| path.display().to_string())
}

pub fn simulate(cfg: &RunConfig, args: &SimulateArgs) -> anyhow::Result<()> {
    if args.count == 0 {
        return Err(usage("--count must be at least 1"));
    }
    let mut synth = cfg.synth.clone();
    if let Some(p) = args.shared_focus {
        synth.shared_focus_p = p;
    }
    if let Some(k) = args.kappa {
        synth.coupling_kappa = k;
    }
    if let Some(d) = args.duration_s {
        synth.duration_s = d;
    }
    if let Some(c) = args.calibration_s {
        synth.calibration_s = c;
    }
    if let Some(l) = args.link {
        synth.link = l.into();
    }
    synth.validate().map_err(|e| usage(e.to_string()))?;
    for i in 0..args.count {
        let seed = cfg.seed + i;
        let (session, truth) = gen_dyad(&dyadlens::synth::SynthConfig { seed, ..synth.clone() })?;
        let stem = format!("dyad-{seed:04}");
        let mut out = create(cfg, &format!("{stem}.jsonl"))?;
        write_session(&session, &mut out)?;
        out.flush()?;
        write_json(cfg, &format!("{stem}.truth.json"), &truth)?;
    }
    Ok(())
}

fn write_frames(cfg: &RunConfig, name: &str, frames: &[MetricFrame]) -> anyhow::Result<()> {
    let mut out = create(cfg, name)?;
    writeln!(out, "t_ms,jva,jme,me_a,me_b")?;
    let cell = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for f in frames {
        writeln!(out, "{},{},{},{},{}", f.t_ms, cell(f.jva), cell(f.jme), cell(f.me_a), cell(f.me_b))?;
    }
    out.flush()?;
    Ok(())
}

pub fn analyze(cfg: &RunConfig, path: &Path) -> anyhow::Result<()> {
    let (_, a) = analyze_file(cfg, path)?;
    write_series(cfg, "jva.csv", &a.jva)?;
    write_series(cfg, "jva_fine.csv", &a.jva_fine)?;
    write_series(cfg, "me_a.csv", &a.me.a)?;
    write_series(cfg, "me_b.csv", &a.me.b)?;
    write_series(cfg, "jme.csv", &a.jme)?;
    write_frames(cfg, "frames.csv", &a.frames)
}

pub fn episodes(cfg: &RunConfig, path: &Path) -> anyhow::Result<()> {
    let (_, a) = analyze_file(cfg, path)?;
    let e = classify_intersection(&a.jme, &a.jva_fine).with_context(|| format!("episodes of {}", path.display()))?;
    let p = episode_proportions(&e).with_context(|| format!("episodes of {}", path.display()))?;
    let mut out = create(cfg, "episodes.csv")?;
    write_episodes_csv(&e, &mut out)?;
    out.flush()?;
    write_json(cfg, "proportions.json", &p)
}

pub fn causality(cfg: &RunConfig, paths: &[PathBuf]) -> anyhow::Result<()> {
    let mut results: Vec<(String, CausalityResult)> = Vec::new();
    for path in expand_sessions(paths)? {
        let (_, a) = analyze_file(cfg, &path)?;
        let (jme, jva) = a.joint_pair();
        let r = causality_summary(&jme, &jva, cfg.max_lag).with_context(|| format!("causal models for {}", path.display()))?;
        results.push((dyad_id(&path), r));
    }
    let mut out = create(cfg, "scatter.csv")?;
    write_scatter_csv(&results, &mut out)?;
    out.flush()?;
    write_json(cfg, "quadrants.json", &quadrant_summary(&results)?)
}

pub fn feedback(cfg: &RunConfig, path: &Path, model: Option<&Path>) -> anyhow::Result<()> {
    let model = match (cfg.mode.proactive(), model) {
        (true, None) => return Err(usage("proactive mode needs --model")),
        (true, Some(m)) => Some(load_model(m)?),
        (false, _) => None,
    };
    let (session, a) = analyze_file(cfg, path)?;
    let baseline = compute_baselines(&a.calibration_frames, session.meta.calibration_end_ms)
        .with_context(|| format!("baseline of {}", path.display()))?;
    write_json(cfg, "baseline.json", &baseline)?;
    let engine = |mode| Engine::new(mode, cfg.policy.clone(), ScenarioTable::shipped(), baseline.clone());
    if cfg.mode.reactive() {
        let events = run_reactive(&a.frames, &mut engine(Mode::Reactive))?;
        let mut out = create(cfg, "events_reactive.jsonl")?;
        write_events_jsonl(&events, &mut out)?;
        out.flush()?;
    }
    if let Some(model) = model {
        let events = run_proactive(&a.frames, &model, &mut engine(Mode::Proactive))?;
        let mut out = create(cfg, "events_proactive.jsonl")?;
        write_events_jsonl(&events, &mut out)?;
        out.flush()?;
    }
    Ok(())
}

fn load_model(path: &Path) -> anyhow::Result<LinearArModel> {
    if !path.is_file() {
        return Err(usage(format!("model {} does not exist", path.display())));
    }
    let text = std::fs::read_to_string(path).with_context(|| format!("reading model {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing model {}", path.display()))
}

fn cohort_frames(cfg: &RunConfig, paths: &[PathBuf]) -> anyhow::Result<Vec<Vec<MetricFrame>>> {
    expand_sessions(paths)?.iter().map(|p| analyze_file(cfg, p).map(|(_, a)| a.frames)).collect()
}

pub fn forecast(cfg: &RunConfig, cmd: &ForecastCommand) -> anyhow::Result<()> {
    match cmd {
        ForecastCommand::Train { sessions } => {
            let frames = cohort_frames(cfg, sessions)?;
            let model = fit_forecaster(&frames, &cfg.forecast)?;
            write_json(cfg, "model.json", &model)
        }
        ForecastCommand::Eval { model, sessions } => {
            let model = load_model(model)?;
            let frames = cohort_frames(cfg, sessions)?;
            write_json(cfg, "skill.json", &eval_forecaster(&model, &frames, model.config.horizon))
        }
    }
}
