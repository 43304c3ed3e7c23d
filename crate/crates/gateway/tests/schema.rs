mod common;

use std::sync::Arc;

use common::{subscriber, tiny_bundle};
use emg_core::Gesture;
use emg_gateway::{ClientStream, Engine, GatewayConfig, Hub, COMMAND_TYPES};
use serde_json::{json, Value};

fn schema_doc() -> Value {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../docs/gateway.schema.json");
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

/// Validator for one entry of `$defs`, resolving refs against the whole document.
fn validator(def: &str) -> jsonschema::Validator {
    let mut doc = schema_doc();
    doc["$ref"] = json!(format!("#/$defs/{def}"));
    jsonschema::draft202012::new(&doc).unwrap()
}

fn check(v: &jsonschema::Validator, value: &Value) {
    let errors: Vec<String> = v.iter_errors(value).map(|e| format!("{e} at {}", e.instance_path)).collect();
    assert!(errors.is_empty(), "{value}\n{errors:#?}");
}

fn drain_raw(stream: &mut ClientStream) -> Vec<Value> {
    let rt = tokio::runtime::Builder::new_current_thread().enable_time().build().unwrap();
    let mut out = Vec::new();
    rt.block_on(async {
        while let Ok(Some(o)) = tokio::time::timeout(std::time::Duration::from_millis(5), stream.next()).await {
            out.push(serde_json::from_str(&o.text).unwrap());
        }
    });
    out
}

#[test]
fn emitted_events_and_state_match_the_schema() {
    let dir = tempfile::tempdir().unwrap();
    let bundle = dir.path().join("b.json");
    tiny_bundle().save(&bundle).unwrap();

    let hub = Arc::new(Hub::default());
    let mut e = Engine::new(GatewayConfig::default(), hub.clone()).unwrap();
    let mut sub = subscriber(&hub);
    let me = sub.id();

    e.handle_text(me, r#"{"type":"start_cues","preset":"realtime","seed":1}"#);
    for _ in 0..40 {
        e.tick();
    }
    e.handle_text(me, r#"{"type":"stop"}"#);
    e.handle_text(me, &json!({"type": "load_bundle", "path": bundle}).to_string());
    e.handle_text(me, r#"{"type":"start_session"}"#);
    // Hold Pinch Fingers long enough to cross the mode switch, then drive the wrist.
    for t in 0..80 {
        let g = if t < 30 { "pinch_fingers" } else { "Wrist Up" };
        e.handle_text(me, &json!({"type": "inject_gesture", "gesture": g}).to_string());
        e.tick();
    }
    e.handle_text(me, r#"{"type":"set_source","source":{"kind":"none"}}"#);
    e.handle_text(me, r#"{"type":"fly"}"#);
    e.handle_text(me, r#"{"type":"load_bundle","path":"/nonexistent/b.json"}"#);
    e.handle_text(me, "not json");

    let events = drain_raw(&mut sub);
    let v = validator("event");
    for ev in &events {
        check(&v, ev);
    }
    let seen: std::collections::BTreeSet<&str> = events.iter().map(|e| e["type"].as_str().unwrap()).collect();
    for kind in ["cue", "prediction", "confidence", "robot_state", "mode", "session", "error"] {
        assert!(seen.contains(kind), "no {kind} event among {seen:?}");
    }

    let snapshot = serde_json::to_value(&*e.snapshot_handle().read().unwrap()).unwrap();
    assert!(!snapshot["robot"].is_null() && !snapshot["last_prediction"].is_null());
    check(&validator("state_response"), &snapshot);
}

#[test]
fn documented_commands_parse_and_validate() {
    let v = validator("client_command");
    let accepted = [
        json!({"type": "start_session"}),
        json!({"type": "load_bundle", "path": "model.json"}),
        json!({"type": "start_cues"}),
        json!({"type": "start_cues", "preset": "recalibration", "seed": 4, "train": true, "epochs": 50, "save_to": "out.json"}),
        json!({"type": "inject_gesture", "gesture": "Pinch Fingers"}),
        json!({"type": "set_source", "source": {"kind": "synth", "seed": 3}}),
        json!({"type": "set_source", "source": {"kind": "recording", "path": "r.emg", "cues": "r.cues.json"}}),
        json!({"type": "set_source", "source": {"kind": "tcp", "addr": "127.0.0.1:9000"}}),
        json!({"type": "stop"}),
    ];
    for cmd in &accepted {
        check(&v, cmd);
        emg_gateway::parse_client_command(&cmd.to_string()).unwrap_or_else(|e| panic!("{cmd}: {e:?}"));
    }
    let rejected = [
        json!({"type": "start_session", "extra": 1}),
        json!({"type": "load_bundle"}),
        json!({"type": "start_cues", "preset": "weekly"}),
        json!({"type": "set_source", "source": {"kind": "serial"}}),
        json!({"type": "teleport"}),
    ];
    for cmd in &rejected {
        assert!(!v.is_valid(cmd), "schema accepted {cmd}");
        assert!(emg_gateway::parse_client_command(&cmd.to_string()).is_err(), "parser accepted {cmd}");
    }
}

#[test]
fn schema_lists_every_command_type() {
    let doc = schema_doc();
    let mut listed: Vec<String> = doc["$defs"]["client_command"]["oneOf"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| c["properties"]["type"]["const"].as_str().unwrap().to_owned())
        .collect();
    listed.sort();
    let mut known: Vec<String> = COMMAND_TYPES.iter().map(|s| s.to_string()).collect();
    known.sort();
    assert_eq!(listed, known);
    let gestures: Vec<&str> = doc["$defs"]["gesture"]["enum"].as_array().unwrap().iter().map(|g| g.as_str().unwrap()).collect();
    assert_eq!(gestures, Gesture::ALL.map(|g| g.name()).to_vec());
}
