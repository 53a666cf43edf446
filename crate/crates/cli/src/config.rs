use std::fmt;
use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

use dyadlens::effort::JmeMethod;
use dyadlens::feedback::Policy;
use dyadlens::forecast::ForecastConfig;
use dyadlens::pipeline::PipelineConfig;
use dyadlens::synth::SynthConfig;

pub const CONFIG_ENV: &str = "DYADLENS_CONFIG";

/// Bad flags, bad config, or a missing required input. Maps to exit code 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodArg {
    Crqa,
    Cosine,
}

impl From<MethodArg> for JmeMethod {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Crqa => JmeMethod::Crqa,
            MethodArg::Cosine => JmeMethod::Cosine,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeArg {
    Reactive,
    Proactive,
    Both,
}

impl ModeArg {
    pub fn reactive(self) -> bool {
        matches!(self, ModeArg::Reactive | ModeArg::Both)
    }

    pub fn proactive(self) -> bool {
        matches!(self, ModeArg::Proactive | ModeArg::Both)
    }
}

/// Flags shared by every subcommand. They override the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct GlobalArgs {
    /// Seed for every random draw.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// JVA window length in seconds.
    #[arg(long = "window-jva", global = true, value_name = "SECONDS")]
    pub window_jva: Option<f64>,
    /// JME window length in seconds (also the frame and episode grid).
    #[arg(long = "window-jme", global = true, value_name = "SECONDS")]
    pub window_jme: Option<f64>,
    #[arg(long = "jme-method", global = true, value_enum)]
    pub jme_method: Option<MethodArg>,
    /// Largest lag tried in the causal models.
    #[arg(long = "max-lag", global = true)]
    pub max_lag: Option<usize>,
    /// Per-action cooldown of the feedback engines.
    #[arg(long = "cooldown-s", global = true, value_name = "SECONDS")]
    pub cooldown_s: Option<f64>,
    /// How long an extreme effort pair must last before a task hint.
    #[arg(long = "persistence-s", global = true, value_name = "SECONDS")]
    pub persistence_s: Option<f64>,
    #[arg(long, global = true, value_enum)]
    pub mode: Option<ModeArg>,
    /// Output directory.
    #[arg(long, short = 'o', global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

/// Contents of the file named by `DYADLENS_CONFIG`.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub pipeline: PipelineConfig,
    pub policy: Policy,
    pub forecast: ForecastConfig,
    pub max_lag: Option<usize>,
    pub mode: Option<ModeArg>,
    pub synth: SynthConfig,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub seed: u64,
    pub pipeline: PipelineConfig,
    pub policy: Policy,
    pub forecast: ForecastConfig,
    pub max_lag: usize,
    pub mode: ModeArg,
    pub synth: SynthConfig,
    pub out: PathBuf,
}

fn load_file(path: &Path) -> anyhow::Result<FileConfig> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| usage(format!("config {}: {e}", path.display())))
}

fn positive(name: &str, v: Option<f64>) -> anyhow::Result<Option<f64>> {
    match v {
        Some(x) if !(x > 0.0 && x.is_finite()) => Err(usage(format!("--{name} must be a positive number, got {x}"))),
        _ => Ok(v),
    }
}

impl RunConfig {
    /// Merges flags over the config file named by `DYADLENS_CONFIG`, if set.
    pub fn resolve(args: &GlobalArgs) -> anyhow::Result<Self> {
        let file = match std::env::var_os(CONFIG_ENV) {
            Some(p) if !p.is_empty() => load_file(Path::new(&p))?,
            _ => FileConfig::default(),
        };
        let mut cfg = RunConfig {
            seed: file.seed.unwrap_or(file.synth.seed),
            pipeline: file.pipeline,
            policy: file.policy,
            forecast: file.forecast,
            max_lag: file.max_lag.unwrap_or(dyadlens::causality::DEFAULT_MAX_LAG),
            mode: file.mode.unwrap_or(ModeArg::Reactive),
            synth: file.synth,
            out: file.out.unwrap_or_else(|| PathBuf::from(".")),
        };
        if let Some(s) = args.seed {
            cfg.seed = s;
        }
        if let Some(w) = positive("window-jva", args.window_jva)? {
            cfg.pipeline.jva_window_s = w;
        }
        if let Some(w) = positive("window-jme", args.window_jme)? {
            cfg.pipeline.effort.jme_window_s = w;
        }
        if let Some(m) = args.jme_method {
            cfg.pipeline.effort.jme_method = m.into();
        }
        if let Some(l) = args.max_lag {
            cfg.max_lag = l;
        }
        if let Some(c) = positive("cooldown-s", args.cooldown_s)? {
            cfg.policy.cooldown_s = c;
        }
        if let Some(p) = args.persistence_s {
            if !(p >= 0.0 && p.is_finite()) {
                return Err(usage(format!("--persistence-s must be non-negative, got {p}")));
            }
            cfg.policy.persistence_s = p;
        }
        if let Some(m) = args.mode {
            cfg.mode = m;
        }
        if let Some(o) = &args.out {
            cfg.out = o.clone();
        }
        cfg.synth.seed = cfg.seed;
        cfg.pipeline.effort.validate().map_err(|e| usage(e.to_string()))?;
        if !(cfg.pipeline.jva_window_s > 0.0) {
            return Err(usage("jva_window_s must be positive"));
        }
        if cfg.max_lag == 0 {
            return Err(usage("--max-lag must be at least 1"));
        }
        Ok(cfg)
    }

    pub fn out_file(&self, name: &str) -> anyhow::Result<PathBuf> {
        std::fs::create_dir_all(&self.out).with_context(|| format!("creating output directory {}", self.out.display()))?;
        Ok(self.out.join(name))
    }
}
