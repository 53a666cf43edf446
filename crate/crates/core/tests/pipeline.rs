//! End-to-end properties through the public API on synthetic sessions.

use dyadlens::episodes::{classify_intersection, episode_proportions, EpisodeLabel};
use dyadlens::feedback::{compute_baselines, run_reactive, write_events_jsonl, Engine, Mode, Policy, ScenarioTable};
use dyadlens::pipeline::{analyze, PipelineConfig};
use dyadlens::session::{parse_session, validate_session, write_session};
use dyadlens::synth::{gen_dyad, SynthConfig};
use proptest::prelude::*;

fn short(seed: u64) -> SynthConfig {
    SynthConfig { seed, duration_s: 240.0, calibration_s: 60.0, ..SynthConfig::default() }
}

#[test]
fn session_jsonl_round_trips() {
    let (session, _) = gen_dyad(&short(11)).unwrap();
    let mut first = Vec::new();
    write_session(&session, &mut first).unwrap();
    let back = parse_session(first.as_slice()).unwrap();
    let mut second = Vec::new();
    write_session(&back, &mut second).unwrap();
    assert_eq!(first, second);
    assert!(validate_session(&back).iter().all(|i| !i.is_fatal()));
}

#[test]
fn analysis_is_identical_after_round_trip() {
    let (session, _) = gen_dyad(&short(12)).unwrap();
    let mut buf = Vec::new();
    write_session(&session, &mut buf).unwrap();
    let back = parse_session(buf.as_slice()).unwrap();
    let cfg = PipelineConfig::default();
    let (a, b) = (analyze(&session, &cfg).unwrap(), analyze(&back, &cfg).unwrap());
    assert_eq!(a.frames, b.frames);
    assert_eq!(a.jme, b.jme);
}

#[test]
fn frames_are_strictly_increasing_and_after_calibration() {
    let (session, _) = gen_dyad(&short(13)).unwrap();
    let a = analyze(&session, &PipelineConfig::default()).unwrap();
    assert!(!a.frames.is_empty());
    assert!(a.frames.windows(2).all(|w| w[0].t_ms < w[1].t_ms));
    assert!(a.frames.iter().all(|f| f.t_ms > session.meta.calibration_end_ms));
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 8, ..ProptestConfig::default() })]

    #[test]
    fn episode_proportions_sum_to_one(seed in 0u64..10_000, kappa in 0.0f64..1.0, p in 0.0f64..1.0) {
        let cfg = SynthConfig { coupling_kappa: kappa, shared_focus_p: p, ..short(seed) };
        let (session, _) = gen_dyad(&cfg).unwrap();
        let a = analyze(&session, &PipelineConfig::default()).unwrap();
        let e = classify_intersection(&a.jme, &a.jva_fine).unwrap();
        let props = episode_proportions(&e).unwrap();
        let total: f64 = [EpisodeLabel::HH, EpisodeLabel::HL, EpisodeLabel::LH, EpisodeLabel::LL].iter().map(|&l| props.get(l)).sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn reactive_replay_is_deterministic(seed in 0u64..10_000) {
        let (session, _) = gen_dyad(&short(seed)).unwrap();
        let a = analyze(&session, &PipelineConfig::default()).unwrap();
        let baseline = compute_baselines(&a.calibration_frames, session.meta.calibration_end_ms).unwrap();
        let log = || {
            let mut engine = Engine::new(Mode::Reactive, Policy::default(), ScenarioTable::shipped(), baseline.clone());
            let events = run_reactive(&a.frames, &mut engine).unwrap();
            let mut buf = Vec::new();
            write_events_jsonl(&events, &mut buf).unwrap();
            buf
        };
        prop_assert_eq!(log(), log());
    }
}
