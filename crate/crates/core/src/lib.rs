//! Measurement and adaptive-support pipeline for pair-programming dyads.
//!
//! Dual gaze and pupil streams are turned into joint visual attention (JVA),
//! per-participant mental effort (ME) and joint mental effort (JME) series.
//! On top of those sit episode classification, Granger-style causal
//! summaries, a 30-second forecaster, and reactive/proactive feedback engines.

pub mod attention;
pub mod causality;
pub mod effort;
pub mod episodes;
pub mod feedback;
pub mod forecast;
pub(crate) mod linalg;
pub mod metric;
pub mod pipeline;
pub mod session;
pub mod stats;
pub mod synth;
pub mod wavelet;
