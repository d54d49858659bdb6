mod common;

use std::io::Write;
use std::sync::Arc;
use std::time::Instant;

use bci_core::paradigm::{validate_paradigm, BlockRole};
use bci_core::signal::{AcquisitionConfig, EegTrial};
use bci_gateway::GatewayError;
use bci_session::calibrate::gaze_trial;
use bci_session::{
    replay, replay_reader, ConfirmReason, ErrorStage, EventBody, Phase, ReplayError, SessionBuilder, SessionError,
    SessionSettings, SessionState,
};
use common::{assert_lawful, lamp_power, model, session, FailingClient};

fn kinds(events: &[bci_session::SessionEvent]) -> Vec<&'static str> {
    events.iter().map(|e| e.body.kind()).collect()
}

#[test]
fn calibration_grid_covers_the_band() {
    let start = Instant::now();
    let m = model();
    eprintln!("40-class calibration: {:?}", start.elapsed());
    let f = &m.config.class_freqs_hz;
    assert_eq!(f.len(), 40);
    assert!((f[0] - 8.0).abs() < 1e-9 && (f[39] - 15.8).abs() < 1e-9);
}

#[test]
fn home_phrase_builds_a_device_paradigm() {
    let mut s = session(SessionSettings::default());
    let out = s
        .submit_spelled_text("I want to control home appliances", Some("en"))
        .unwrap();
    assert_eq!(
        kinds(&out.events),
        ["spelled", "llm_request", "llm_response", "paradigm_updated"]
    );
    let st = s.state();
    assert_eq!(st.phase, Phase::ParadigmActive);
    let p = st.active_paradigm().unwrap();
    validate_paradigm(p).unwrap();
    assert!(p.block("living-room-light:on").is_some());
    assert!(p.block("air-conditioner:set-22").is_some());
    assert!(p.blocks.iter().any(|b| b.role == BlockRole::Confirm));
    let grid = &model().config.class_freqs_hz;
    assert!(p
        .blocks
        .iter()
        .all(|b| grid.iter().any(|f| (f - b.freq_hz).abs() < 1e-9)));
    assert_lawful(st);
}

#[test]
fn gibberish_prompts_and_stays_spelling() {
    let mut s = session(SessionSettings::default());
    let out = s.submit_spelled_text("qwxz plorb", Some("en")).unwrap();
    assert_eq!(kinds(&out.events), ["spelled", "llm_request", "llm_response", "prompt"]);
    assert_eq!(s.state().phase, Phase::Spelling);
    assert!(s.state().prompt.is_some());
    assert_lawful(s.state());
}

#[test]
fn gateway_timeout_is_a_recoverable_error() {
    let client = Arc::new(FailingClient(GatewayError::Timeout(20)));
    let mut s = SessionBuilder::new(SessionSettings::default(), client)
        .start("t")
        .unwrap();
    let out = s.submit_spelled_text("turn on the light", None).unwrap();
    assert_eq!(kinds(&out.events), ["spelled", "llm_request", "error"]);
    assert_eq!(s.state().phase, Phase::Error);
    let fault = s.state().last_error.clone().unwrap();
    assert_eq!(fault.stage, ErrorStage::Gateway);
    assert!(fault.recoverable);
    assert!(matches!(
        s.submit_spelled_text("again", None),
        Err(SessionError::WrongPhase { .. })
    ));
    s.reset().unwrap();
    assert_eq!(s.state().phase, Phase::Spelling);
    assert_lawful(s.state());
}

#[test]
fn choosing_the_lamp_block_turns_it_on() {
    let mut s = session(SessionSettings::default());
    s.submit_spelled_text("turn on the light", Some("en")).unwrap();
    assert_eq!(lamp_power(s.state(), "living room light"), "off");
    let out = s.submit_block_choice("living-room-light:on").unwrap();
    assert_eq!(kinds(&out.events), ["gaze_decoded", "instruction_executed"]);
    assert_eq!(lamp_power(s.state(), "living room light"), "on");
    assert_eq!(lamp_power(s.state(), "bedroom light"), "off");
    assert_eq!(s.state().phase, Phase::ParadigmActive);
    assert!(matches!(
        s.submit_block_choice("toaster:on"),
        Err(SessionError::UnknownBlock(_))
    ));
    assert_lawful(s.state());
}

#[test]
fn decoded_gaze_trial_turns_the_lamp_on() {
    let mut s = session(SessionSettings::default());
    s.submit_spelled_text("enciende la luz", Some("es")).unwrap();
    let block = s
        .state()
        .active_paradigm()
        .unwrap()
        .block("living-room-light:on")
        .unwrap()
        .clone();
    assert!(block.label.contains("encender"));
    let trial = gaze_trial(&model(), block.freq_hz, 20.0, 42).unwrap();
    let out = s.submit_gaze_trial(&trial).unwrap();
    let d = out.decision.unwrap();
    assert!((d.decided_freq_hz - block.freq_hz).abs() < 1e-9);
    assert!(d.margin >= 0.05);
    assert_eq!(kinds(&out.events), ["gaze_decoded", "instruction_executed"]);
    assert_eq!(lamp_power(s.state(), "living room light"), "on");
    assert_lawful(s.state());
}

#[test]
fn low_margin_asks_for_confirmation() {
    // Every real margin is below 2, so every action needs confirming.
    let settings = SessionSettings {
        margin_threshold: 2.0,
        ..SessionSettings::default()
    };
    let mut s = session(settings);
    s.submit_spelled_text("turn on the light", Some("en")).unwrap();
    let block = s
        .state()
        .active_paradigm()
        .unwrap()
        .block("living-room-light:on")
        .unwrap()
        .clone();
    let trial = gaze_trial(&model(), block.freq_hz, 20.0, 3).unwrap();
    let out = s.submit_gaze_trial(&trial).unwrap();
    assert_eq!(kinds(&out.events), ["gaze_decoded", "confirm_required"]);
    let pending = s.state().pending_confirm.clone().unwrap();
    assert!(matches!(pending.reason, ConfirmReason::LowMargin { threshold, .. } if threshold == 2.0));
    assert_eq!(lamp_power(s.state(), "living room light"), "off");
    // The confirm block itself is picked without a decode, so it acts.
    let out = s.submit_block_choice("nav:confirm").unwrap();
    assert_eq!(kinds(&out.events), ["gaze_decoded", "instruction_executed"]);
    assert_eq!(lamp_power(s.state(), "living room light"), "on");
    assert!(s.state().pending_confirm.is_none());
    assert_lawful(s.state());
}

#[test]
fn low_margin_on_navigation_is_ignored_but_logged() {
    let settings = SessionSettings {
        margin_threshold: 2.0,
        ..SessionSettings::default()
    };
    let mut s = session(settings);
    s.submit_spelled_text("turn on the light", Some("en")).unwrap();
    let back = s.state().active_paradigm().unwrap().block("nav:back").unwrap().clone();
    let trial = gaze_trial(&model(), back.freq_hz, 20.0, 5).unwrap();
    let out = s.submit_gaze_trial(&trial).unwrap();
    assert_eq!(kinds(&out.events), ["gaze_decoded", "error"]);
    assert_eq!(s.state().phase, Phase::ParadigmActive);
    assert_eq!(s.state().last_error.as_ref().unwrap().stage, ErrorStage::Decode);
}

#[test]
fn mismatched_trials_are_rejected_without_events() {
    let mut s = session(SessionSettings::default());
    s.submit_spelled_text("turn on the light", Some("en")).unwrap();
    let before = s.state().last_seq();
    let wrong = EegTrial::zeros(AcquisitionConfig::new(4, 250.0, 250).unwrap());
    assert!(matches!(
        s.submit_gaze_trial(&wrong),
        Err(SessionError::TrialMismatch(_))
    ));
    assert_eq!(s.state().last_seq(), before);

    let mut fresh = session(SessionSettings::default());
    let trial = gaze_trial(&model(), 8.0, 20.0, 1).unwrap();
    assert!(matches!(
        fresh.submit_gaze_trial(&trial),
        Err(SessionError::WrongPhase { .. })
    ));

    let mut no_model = SessionBuilder::new(SessionSettings::default(), common::mock())
        .start("x")
        .unwrap();
    no_model.submit_spelled_text("turn on the light", Some("en")).unwrap();
    assert!(matches!(no_model.submit_gaze_trial(&trial), Err(SessionError::NoModel)));
}

#[test]
fn synthesized_gaze_needs_a_model() {
    let settings = SessionSettings {
        synthesize_gaze_snr_db: Some(20.0),
        ..SessionSettings::default()
    };
    assert!(matches!(
        SessionBuilder::new(settings, common::mock()).start("x"),
        Err(SessionError::Config(_))
    ));
}

#[test]
fn synthesized_gaze_decodes_the_chosen_block() {
    let settings = SessionSettings {
        synthesize_gaze_snr_db: Some(20.0),
        seed: 11,
        ..SessionSettings::default()
    };
    let mut s = session(settings);
    s.submit_spelled_text("I want to control home appliances", Some("en"))
        .unwrap();
    let out = s.submit_block_choice("tv:on").unwrap();
    let EventBody::GazeDecoded {
        block_id,
        chosen_block,
        trial_seed,
        ..
    } = &out.events[0].body
    else {
        panic!()
    };
    assert_eq!(block_id, "tv:on");
    assert_eq!(chosen_block.as_deref(), Some("tv:on"));
    assert!(trial_seed.is_some());
    assert_eq!(s.state().fleet.query_state("tv").unwrap().status()["power"], "on");
    assert_lawful(s.state());
}

#[test]
fn arm_plan_needs_explicit_confirmation() {
    let mut s = session(SessionSettings::default());
    s.submit_spelled_text("grab the object and place it in the designated position", Some("en"))
        .unwrap();
    let st = s.state();
    assert_eq!(st.phase, Phase::ParadigmActive);
    assert_eq!(st.pending_plan.as_ref().unwrap().steps.len(), 4);
    let out = s.submit_block_choice("step:1").unwrap();
    assert_eq!(kinds(&out.events), ["gaze_decoded", "confirm_required"]);
    assert!(matches!(
        s.state().pending_confirm.as_ref().unwrap().reason,
        ConfirmReason::UnsafeDevice { .. }
    ));
    let before = s.state().fleet.query_state("robot arm").unwrap();
    // Back cancels the pending action without leaving the paradigm.
    s.submit_block_choice("nav:back").unwrap();
    assert!(s.state().pending_confirm.is_none());
    assert_eq!(s.state().phase, Phase::ParadigmActive);
    for step in ["step:1", "step:2", "step:3", "step:4"] {
        s.submit_block_choice(step).unwrap();
        let out = s.submit_block_choice("nav:confirm").unwrap();
        assert_eq!(kinds(&out.events), ["gaze_decoded", "instruction_executed"], "{step}");
    }
    let after = s.state().fleet.query_state("robot arm").unwrap();
    assert_ne!(before, after);
    assert_eq!(after.status()["holding"], "nothing");
    // Nothing pending now: confirm is reported, not silently dropped.
    let out = s.submit_block_choice("nav:confirm").unwrap();
    assert_eq!(kinds(&out.events), ["gaze_decoded", "error"]);
    assert_lawful(s.state());
}

#[test]
fn device_refusal_is_an_event() {
    let mut s = session(SessionSettings::default());
    s.submit_spelled_text("fly the drone and take a photo", Some("en"))
        .unwrap();
    let ok = s.submit_block_choice("step:2").unwrap();
    assert_eq!(kinds(&ok.events), ["gaze_decoded", "confirm_required"]);
    s.submit_block_choice("nav:confirm").unwrap();
    assert_eq!(
        s.state().fleet.query_state("quadcopter").unwrap().status()["speed_mps"],
        "5"
    );

    // Without a quadcopter in the fleet the same plan cannot run.
    let demo = bci_core::devices::Fleet::demo();
    let fleet = bci_core::devices::Fleet::new(
        demo.devices()
            .iter()
            .filter(|d| d.name != "quadcopter")
            .cloned()
            .collect(),
    )
    .unwrap();
    let mut s = SessionBuilder::new(SessionSettings::default(), common::mock())
        .model(model())
        .fleet(fleet)
        .start("nofly")
        .unwrap();
    s.submit_spelled_text("fly the drone and take a photo", Some("en"))
        .unwrap();
    let out = s.submit_block_choice("step:3").unwrap();
    assert_eq!(kinds(&out.events), ["gaze_decoded", "error"]);
    assert_eq!(s.state().last_error.as_ref().unwrap().stage, ErrorStage::Device);
    assert_eq!(s.state().phase, Phase::ParadigmActive);
    assert_lawful(s.state());
}

#[test]
fn navigation_back_and_home() {
    let mut s = session(SessionSettings::default());
    s.submit_spelled_text("turn on the light", Some("en")).unwrap();
    s.submit_block_choice("nav:back").unwrap();
    assert_eq!(s.state().phase, Phase::Spelling);
    assert_eq!(s.state().spelled_buffer, "turn on the light");
    assert!(s.state().active_paradigm().is_none());
    s.submit_spelled_text("turn off the light", Some("en")).unwrap();
    assert_eq!(s.state().revision, 2);
    s.submit_block_choice("nav:home").unwrap();
    assert_eq!(s.state().phase, Phase::Spelling);
    assert!(s.state().spelled_buffer.is_empty());
    assert!(matches!(
        s.submit_block_choice("nav:home"),
        Err(SessionError::WrongPhase { .. })
    ));
    assert!(matches!(
        s.submit_spelled_text("   ", None),
        Err(SessionError::EmptyText)
    ));
    assert_lawful(s.state());
}

#[test]
fn pages_are_navigable() {
    // A narrow band holds only 8 blocks, so the full catalog spans pages.
    let grid = bci_session::calibrate::model_grid((8.0, 9.4), 0.2);
    assert_eq!(grid.len(), 8);
    let mut settings = SessionSettings::default();
    settings.paradigm.band_hz = (8.0, 9.4);
    let mut s = session(settings);
    s.submit_spelled_text("I want to control home appliances", Some("en"))
        .unwrap();
    let count = s.state().pages.len();
    assert!(count > 1);
    for i in 1..count {
        s.submit_block_choice("nav:next").unwrap();
        assert_eq!(s.state().page, i);
    }
    s.submit_block_choice("nav:prev").unwrap();
    assert_eq!(s.state().page, count - 2);
    let trial = gaze_trial(
        &model(),
        s.state().active_paradigm().unwrap().blocks[0].freq_hz,
        20.0,
        8,
    )
    .unwrap();
    s.submit_gaze_trial(&trial).unwrap();
    assert_lawful(s.state());
}

#[test]
fn language_is_detected_when_omitted() {
    let store =
        Arc::new(bci_core::langmodel::LanguageStore::bundled(3, bci_core::langmodel::Smoothing::Laplace).unwrap());
    let mut s = SessionBuilder::new(SessionSettings::default(), common::mock())
        .language_store(store)
        .start("d")
        .unwrap();
    s.submit_spelled_text("enciende la luz de la sala, por favor", None)
        .unwrap();
    assert_eq!(s.state().language, "es");
    assert!(s
        .state()
        .active_paradigm()
        .unwrap()
        .blocks
        .iter()
        .any(|b| b.label.contains("encender")));
}

#[test]
fn subscribers_get_every_event_once_in_order() {
    let mut s = session(SessionSettings::default());
    let (backlog, mut rx) = s.subscribe(0);
    assert_eq!(backlog.len(), 1);
    s.submit_spelled_text("turn on the light", Some("en")).unwrap();
    s.submit_block_choice("living-room-light:on").unwrap();
    let (late_backlog, _late) = s.subscribe(3);
    assert_eq!(late_backlog.first().unwrap().seq, 4);
    let mut seqs = vec![backlog[0].seq];
    while let Ok(e) = rx.try_recv() {
        seqs.push(e.seq);
    }
    let expected: Vec<u64> = (1..=s.state().last_seq()).collect();
    assert_eq!(seqs, expected);
}

#[test]
fn log_replays_to_the_same_state() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.jsonl");
    let settings = SessionSettings {
        synthesize_gaze_snr_db: Some(20.0),
        seed: 5,
        ..SessionSettings::default()
    };
    let mut s = SessionBuilder::new(settings.clone(), common::mock())
        .model(model())
        .log_to(&path)
        .unwrap()
        .start("replayed")
        .unwrap();
    s.submit_spelled_text("I want to control home appliances", Some("en"))
        .unwrap();
    s.submit_block_choice("living-room-light:on").unwrap();
    s.submit_block_choice("air-conditioner:set-22").unwrap();
    s.submit_block_choice("nav:back").unwrap();
    s.submit_spelled_text("grab the cube", Some("en")).unwrap();
    s.submit_block_choice("step:1").unwrap();
    s.submit_block_choice("nav:confirm").unwrap();
    let replayed = replay(&path).unwrap();
    assert_eq!(&replayed, s.state());
    assert_lawful(&replayed);

    // A resumed session keeps appending after the last event.
    let mut resumed = SessionBuilder::new(settings, common::mock())
        .model(model())
        .log_to(&path)
        .unwrap()
        .resume(replayed)
        .unwrap();
    resumed.submit_block_choice("nav:home").unwrap();
    assert_eq!(&replay(&path).unwrap(), resumed.state());
}

#[test]
fn empty_log_is_a_fresh_session() {
    assert_eq!(replay_reader(&b""[..]).unwrap(), SessionState::fresh());
    assert_eq!(replay_reader(&b"\n\n"[..]).unwrap(), SessionState::fresh());
}

#[test]
fn corrupted_line_stops_replay_with_its_number() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.jsonl");
    let mut s = SessionBuilder::new(SessionSettings::default(), common::mock())
        .log_to(&path)
        .unwrap()
        .start("c")
        .unwrap();
    s.submit_spelled_text("turn on the light", Some("en")).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    assert_eq!(lines.len(), 5);
    lines[2] = lines[2][..lines[2].len() / 2].to_string();
    let mut f = std::fs::File::create(&path).unwrap();
    writeln!(f, "{}", lines.join("\n")).unwrap();
    let err = replay(&path).unwrap_err();
    assert_eq!(err.line(), Some(3));
    assert!(matches!(err, ReplayError::Corrupt { .. }));

    // Well-formed JSON that breaks the sequence is caught as well.
    lines.remove(2);
    let joined = lines.join("\n");
    let err = replay_reader(joined.as_bytes()).unwrap_err();
    assert_eq!(err.line(), Some(3));
    assert!(matches!(err, ReplayError::State { .. }));
}

#[test]
fn forged_device_change_is_refused() {
    let mut s = session(SessionSettings::default());
    s.submit_spelled_text("turn on the light", Some("en")).unwrap();
    s.submit_block_choice("living-room-light:on").unwrap();
    let mut events = s.state().transcript.clone();
    // Drop the decode that justified the execution.
    let i = events.iter().position(|e| e.body.kind() == "gaze_decoded").unwrap();
    events.remove(i);
    for (k, e) in events.iter_mut().enumerate() {
        e.seq = k as u64 + 1;
    }
    assert!(matches!(
        SessionState::replay(&events),
        Err(bci_session::StateError::Unprompted)
    ));
}
