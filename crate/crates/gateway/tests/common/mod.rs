#![allow(dead_code)]

use std::sync::Arc;

use emg_core::bundle::{train_bundle, BundleConfig, ModelBundle};
use emg_core::classifier::TrainConfig;
use emg_core::pipeline::{ChannelMask, Preprocessor, RmsVector};
use emg_core::Gesture;
use emg_gateway::{ClientStream, EventMessage, Hub};

pub fn small_bundle_config() -> BundleConfig {
    BundleConfig {
        components: 12,
        train: TrainConfig {
            epochs: 30,
            hidden: vec![48],
            ..TrainConfig::default()
        },
    }
}

/// A small model over 64 channels trained on separable RMS patterns. Good
/// enough to satisfy "a bundle is loaded"; injected gestures bypass it.
pub fn tiny_bundle() -> ModelBundle {
    let mut rms = Vec::new();
    let mut labels = Vec::new();
    for g in Gesture::ALL {
        for i in 0..20 {
            let v = (0..64)
                .map(|c| if c % 10 == g.id() { 3.0 } else { 1.0 } + 0.01 * ((i * 7 + c) % 5) as f64)
                .collect();
            rms.push(RmsVector(v));
            labels.push(g);
        }
    }
    let pre = Preprocessor::standard(ChannelMask::all(64), 4000.0).unwrap();
    train_bundle(pre, &rms, &labels, &small_bundle_config()).unwrap()
}

pub fn save_tiny_bundle(dir: &std::path::Path) -> String {
    let path = dir.join("tiny.bundle.json");
    tiny_bundle().save(&path).unwrap();
    path.to_string_lossy().into_owned()
}

/// Everything queued for a hub subscriber right now.
pub fn drain(stream: &mut ClientStream) -> Vec<EventMessage> {
    let rt = tokio::runtime::Builder::new_current_thread().enable_time().build().unwrap();
    let mut out = Vec::new();
    rt.block_on(async {
        while let Ok(Some(o)) = tokio::time::timeout(std::time::Duration::from_millis(5), stream.next()).await {
            out.push(serde_json::from_str(&o.text).unwrap());
        }
    });
    out
}

pub fn subscriber(hub: &Arc<Hub>) -> ClientStream {
    ClientStream::new(hub.subscribe())
}
