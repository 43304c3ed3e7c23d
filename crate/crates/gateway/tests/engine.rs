mod common;

use std::sync::Arc;

use common::{drain, small_bundle_config, subscriber, tiny_bundle};
use emg_core::decoder::Mode;
use emg_core::ingest::CuePreset;
use emg_core::Gesture;
use emg_gateway::{ClientCommand, Engine, ErrorCode, EventBody, EventMessage, GatewayConfig, Hub, Phase, SourceDescriptor};

fn decoding_engine(hub: &Arc<Hub>) -> Engine {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("b.json");
    tiny_bundle().save(&path).unwrap();
    let mut e = Engine::new(GatewayConfig::default(), hub.clone()).unwrap();
    e.handle_command(ClientCommand::LoadBundle {
        path: path.to_string_lossy().into(),
    })
    .unwrap();
    e.handle_command(ClientCommand::StartSession).unwrap();
    assert_eq!(e.phase(), Phase::Decoding);
    e
}

fn kinds(events: &[EventMessage]) -> Vec<&'static str> {
    events.iter().map(|e| e.body.kind()).collect()
}

fn inject(e: &mut Engine, g: Gesture) {
    e.handle_command(ClientCommand::InjectGesture { gesture: g }).unwrap();
}

#[test]
fn each_tick_emits_one_prediction_and_one_confidence() {
    let hub = Arc::new(Hub::default());
    let mut e = decoding_engine(&hub);
    let mut sub = subscriber(&hub);
    for t in 0..12 {
        e.tick();
        let events = drain(&mut sub);
        assert!(events.iter().all(|m| m.tick == t));
        let k = kinds(&events);
        assert_eq!(k.iter().filter(|&&x| x == "prediction").count(), 1, "{k:?}");
        assert_eq!(k.iter().filter(|&&x| x == "confidence").count(), 1);
        assert_eq!(k.iter().filter(|&&x| x == "robot_state").count(), 1);
        assert!(events.windows(2).all(|w| w[0].seq < w[1].seq));
    }
}

#[test]
fn injection_marks_one_tick_only() {
    let hub = Arc::new(Hub::default());
    let mut e = decoding_engine(&hub);
    let mut sub = subscriber(&hub);
    inject(&mut e, Gesture::WristUp);
    e.tick();
    e.tick();
    let preds: Vec<EventBody> = drain(&mut sub)
        .into_iter()
        .map(|m| m.body)
        .filter(|b| b.kind() == "prediction")
        .collect();
    match &preds[..] {
        [EventBody::Prediction { injected: true, raw: Gesture::WristUp, .. }, EventBody::Prediction { injected: false, .. }] => {}
        other => panic!("{other:?}"),
    }
}

#[test]
fn sustained_injection_drives_the_decoder_and_the_robot() {
    let hub = Arc::new(Hub::default());
    let mut e = decoding_engine(&hub);
    let mut sub = subscriber(&hub);
    // Hold Pinch until the mode flips to ArmDrive.
    let mut mode_events = Vec::new();
    for _ in 0..30 {
        inject(&mut e, Gesture::PinchFingers);
        e.tick();
        for m in drain(&mut sub) {
            if let EventBody::Mode { mode, previous } = m.body {
                mode_events.push((mode, previous));
            }
        }
    }
    assert_eq!(mode_events, vec![(Mode::ArmDrive, Mode::WristGripper)]);
    assert_eq!(e.session().mode, Mode::ArmDrive);
    // Two seconds of Wrist Right drives the base forward.
    let mut xs = Vec::new();
    for _ in 0..12 {
        inject(&mut e, Gesture::WristRight);
        e.tick();
        for m in drain(&mut sub) {
            if let EventBody::RobotState(s) = m.body {
                xs.push(s.base_pose.x);
            }
        }
    }
    assert!(xs.last().unwrap() > &0.01, "{xs:?}");
    assert!(xs.windows(2).all(|w| w[1] >= w[0]));
    // Releasing to Rest brings velocities back to zero.
    for _ in 0..12 {
        inject(&mut e, Gesture::Rest);
        e.tick();
    }
    let last = drain(&mut sub)
        .into_iter()
        .filter_map(|m| match m.body {
            EventBody::RobotState(s) => Some(s),
            _ => None,
        })
        .last()
        .unwrap();
    assert!(last.velocities.0.iter().all(|v| v.abs() < 1e-3), "{:?}", last.velocities);
}

#[test]
fn phase_rules() {
    let hub = Arc::new(Hub::default());
    let mut e = Engine::new(GatewayConfig::default(), hub.clone()).unwrap();
    let err = e.handle_command(ClientCommand::StartSession).unwrap_err();
    assert_eq!(err.0, ErrorCode::IllegalTransition);
    let err = e
        .handle_command(ClientCommand::InjectGesture {
            gesture: Gesture::WristUp,
        })
        .unwrap_err();
    assert_eq!(err.0, ErrorCode::IllegalTransition);
    let err = e
        .handle_command(ClientCommand::LoadBundle {
            path: "/nonexistent/bundle.json".into(),
        })
        .unwrap_err();
    assert_eq!(err.0, ErrorCode::BundleNotFound);
    assert!(err.1.contains("bundle not found"));
    assert_eq!(e.phase(), Phase::Idle);

    // Calibration needs no bundle.
    e.handle_command(ClientCommand::StartCues {
        preset: CuePreset::Recalibration,
        seed: 0,
        train: false,
        epochs: None,
        save_to: None,
    })
    .unwrap();
    assert_eq!(e.phase(), Phase::Calibrating);
    let err = e
        .handle_command(ClientCommand::SetSource {
            source: SourceDescriptor::None,
        })
        .unwrap_err();
    assert_eq!(err.0, ErrorCode::IllegalTransition);
    e.handle_command(ClientCommand::Stop).unwrap();
    assert_eq!(e.phase(), Phase::Idle);
}

#[test]
fn cue_playback_without_a_source_follows_the_tick_clock() {
    let hub = Arc::new(Hub::default());
    let mut e = Engine::new(GatewayConfig::default(), hub.clone()).unwrap();
    let mut sub = subscriber(&hub);
    e.handle_command(ClientCommand::StartCues {
        preset: CuePreset::Recalibration,
        seed: 4,
        train: false,
        epochs: None,
        save_to: None,
    })
    .unwrap();
    let mut cues = Vec::new();
    let mut ticks = 0;
    while e.phase() == Phase::Calibrating {
        e.tick();
        ticks += 1;
        cues.extend(drain(&mut sub).into_iter().filter_map(|m| match m.body {
            EventBody::Cue { index, phase, labeled, .. } => Some((index, phase, labeled)),
            _ => None,
        }));
    }
    // 50 cues of 5.5 s at 6 Hz.
    assert_eq!(ticks, 50 * 33 + 1);
    let indices: std::collections::BTreeSet<usize> = cues.iter().map(|c| c.0).collect();
    assert_eq!(indices.len(), 50);
    // Labeled ticks cover the final 2 s of each hold: 12 per cue.
    assert_eq!(cues.iter().filter(|c| c.2).count(), 50 * 12);
}

#[test]
fn calibration_on_a_synthetic_source_trains_and_starts_decoding() {
    let hub = Arc::new(Hub::default());
    let config = GatewayConfig {
        bundle_config: small_bundle_config(),
        ..GatewayConfig::default()
    };
    let mut e = Engine::new(config, hub.clone()).unwrap();
    e.handle_command(ClientCommand::SetSource {
        source: SourceDescriptor::Synth {
            seed: 11,
            setup_seed: 2,
            preset: CuePreset::Recalibration,
            cue_seed: 3,
        },
    })
    .unwrap();
    e.handle_command(ClientCommand::StartCues {
        preset: CuePreset::Recalibration,
        seed: 0,
        train: true,
        epochs: Some(40),
        save_to: None,
    })
    .unwrap();
    let mut ticks = 0;
    while e.phase() != Phase::Decoding {
        e.tick();
        ticks += 1;
        assert!(ticks < 5_000, "stuck in {:?}", e.phase());
        if e.phase() == Phase::Training {
            std::thread::sleep(std::time::Duration::from_millis(20));
        }
        assert_ne!(e.phase(), Phase::Idle, "training did not complete");
    }
    assert!(e.session().bundle.unwrap().starts_with("trained:"));
    // The source keeps running after calibration; decoding consumes it.
    let mut sub = subscriber(&hub);
    e.tick();
    assert!(drain(&mut sub).iter().any(|m| m.body.kind() == "prediction"));
}
