mod decode;
mod eval;
mod input;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::atomic::AtomicBool;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use emg_core::bundle::{BundleConfig, ModelBundle};
use emg_core::decoder::DecoderConfig;
use emg_core::ingest::{
    CuePreset, CueSchedule, Recording, ReplayOptions, ReplayServer, SampleSource, SynthConfig, SynthSession,
};
use emg_core::pipeline::DEFAULT_IMPEDANCE_THRESHOLD_OHMS;
use emg_gateway::{ClientCommand, Gateway, GatewayConfig, DEFAULT_GATEWAY_PORT};
use emg_robot::{serve_simulator, CommandReceiver, RobotConfig, Simulator, DEFAULT_UDP_PORT};

#[derive(Parser)]
#[command(name = "emgctl", version, about = "HD-EMG gesture decoding and robot teleoperation toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the channel mask, filter, component count and explained variance of a bundle.
    PipelineInfo { bundle: PathBuf },
    /// Train a model bundle from a recording and its cue sidecar.
    Train {
        #[arg(long)]
        recording: PathBuf,
        #[arg(long)]
        cues: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Seed for the split, initialization and shuffling.
        #[arg(long)]
        seed: Option<u64>,
        /// Bundle configuration JSON; missing fields take defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Recalibrate: keep this bundle's channel mask and filter.
        #[arg(long)]
        from: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_IMPEDANCE_THRESHOLD_OHMS)]
        impedance_threshold: f64,
    },
    /// Accuracy report or session analytics.
    Eval(eval::EvalArgs),
    /// Run the real-time decoder over a source and write one JSON line per tick.
    Decode {
        #[arg(long)]
        bundle: PathBuf,
        /// Recording path, `synth[:seed]` or `tcp:host:port`.
        #[arg(long)]
        source: String,
        /// Cue preset for a synthetic source.
        #[arg(long, default_value = "realtime")]
        preset: CuePreset,
        #[arg(long)]
        out: PathBuf,
        /// Decoder configuration JSON; missing fields take defaults.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Run the robot simulator behind a UDP command listener.
    Simulate {
        #[arg(long, default_value_t = format!("127.0.0.1:{DEFAULT_UDP_PORT}"))]
        listen: String,
        /// Do not print per-tick state.
        #[arg(long)]
        headless: bool,
        /// Append every state to this JSONL file.
        #[arg(long)]
        record: Option<PathBuf>,
        /// Robot configuration JSON; missing fields take defaults.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Generate a synthetic recording for a cue schedule.
    Synth {
        /// Synthesis configuration JSON; missing fields take defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        cues: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Serve a recording over the TCP sample stream protocol.
    Replay {
        #[arg(long)]
        rec: PathBuf,
        #[arg(long)]
        listen: String,
        /// Playback speed relative to real time; 0 sends as fast as possible.
        #[arg(long, default_value_t = 1.0)]
        speed: f64,
        /// Exit after serving one client.
        #[arg(long)]
        once: bool,
    },
    /// Write a randomized cue schedule.
    Cues {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "initial")]
        preset: CuePreset,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the session gateway for the operator console.
    Serve {
        /// `none`, `synth[:seed]`, `tcp:host:port` or a recording path.
        #[arg(long, default_value = "none")]
        source: String,
        /// Cue sidecar for a recording source.
        #[arg(long)]
        cues: Option<String>,
        #[arg(long)]
        bundle: Option<PathBuf>,
        /// UDP address of an external simulator; without it the robot runs in-process.
        #[arg(long)]
        sim: Option<String>,
        #[arg(long, default_value_t = SocketAddr::from(([127, 0, 0, 1], DEFAULT_GATEWAY_PORT)))]
        listen: SocketAddr,
        /// Load the bundle but wait for a client to start the session.
        #[arg(long)]
        idle: bool,
    },
}

fn main() -> Result<()> {
    tracing_subscriber::fmt().with_writer(std::io::stderr).init();
    match Cli::parse().command {
        Command::PipelineInfo { bundle } => pipeline_info(&bundle),
        Command::Train {
            recording,
            cues,
            out,
            seed,
            config,
            from,
            impedance_threshold,
        } => train(&recording, &cues, &out, seed, config.as_deref(), from.as_deref(), impedance_threshold),
        Command::Eval(args) => eval::run(args),
        Command::Decode {
            bundle,
            source,
            preset,
            out,
            config,
        } => {
            let config: DecoderConfig = input::load_json_or_default(config.as_deref())?;
            let bundle = ModelBundle::load(&bundle).with_context(|| format!("loading {}", bundle.display()))?;
            let source = input::DecodeSource::open(&source, preset)?;
            let mut w = BufWriter::new(File::create(&out).with_context(|| format!("creating {}", out.display()))?);
            let ticks = decode::run(&bundle, &source, config, |o| {
                serde_json::to_writer(&mut w, o)?;
                w.write_all(b"\n")?;
                Ok(())
            })?;
            w.flush()?;
            eprintln!("{ticks} ticks written to {}", out.display());
            Ok(())
        }
        Command::Simulate {
            listen,
            headless,
            record,
            config,
        } => simulate(&listen, headless, record.as_deref(), config.as_deref()),
        Command::Synth { config, cues, out } => {
            let config: SynthConfig = input::load_json_or_default(config.as_deref())?;
            let schedule = CueSchedule::load(&cues).with_context(|| format!("loading {}", cues.display()))?;
            let session = SynthSession::new(config, schedule)?;
            let rec = Recording::from_source(&session)?;
            rec.write(&out).with_context(|| format!("writing {}", out.display()))?;
            eprintln!(
                "{} samples x {} channels at {} Hz written to {}",
                rec.len(),
                rec.channel_count,
                rec.sample_rate_hz,
                out.display()
            );
            Ok(())
        }
        Command::Replay {
            rec,
            listen,
            speed,
            once,
        } => {
            let rec = Recording::read(&rec).with_context(|| format!("reading {}", rec.display()))?;
            let server = ReplayServer::bind(listen.as_str()).with_context(|| format!("binding {listen}"))?;
            eprintln!("replaying on {}", server.local_addr()?);
            let options = ReplayOptions {
                speed,
                ..ReplayOptions::default()
            };
            if once {
                let stats = server.serve_one(&rec, &options)?;
                eprintln!("{} samples in {} frames", stats.samples, stats.frames);
            } else {
                server.serve_forever(&rec, &options)?;
            }
            Ok(())
        }
        Command::Cues { seed, preset, out } => {
            let schedule = CueSchedule::preset(preset, seed)?;
            schedule.save(&out).with_context(|| format!("writing {}", out.display()))?;
            eprintln!("{} cues, {:.1} s written to {}", schedule.len(), schedule.duration_s(), out.display());
            Ok(())
        }
        Command::Serve {
            source,
            cues,
            bundle,
            sim,
            listen,
            idle,
        } => serve(&source, cues, bundle, sim, listen, idle),
    }
}

fn pipeline_info(path: &Path) -> Result<()> {
    let b = ModelBundle::load(path).with_context(|| format!("loading {}", path.display()))?;
    let pre = &b.pipeline.pre;
    let explained = b.pipeline.basis.explained_variance_ratio();
    let info = serde_json::json!({
        "channels": pre.mask.channel_count(),
        "accepted": pre.mask.count(),
        "rejected": (0..pre.mask.channel_count()).filter(|&c| !pre.mask.accepted()[c]).collect::<Vec<_>>(),
        "filter": {
            "order": pre.filter.order,
            "cutoff_hz": pre.filter.cutoff_hz,
            "sample_rate_hz": pre.filter.sample_rate_hz,
            "sections": pre.filter.sections.len(),
        },
        "window_len": pre.window_len,
        "components": b.pipeline.k(),
        "explained_variance": explained.iter().take(b.pipeline.k()).sum::<f64>(),
        "explained_variance_ratio": &explained[..b.pipeline.k()],
        "hidden": &b.config.train.hidden,
        "test_accuracy": b.test_accuracy(),
    });
    println!("{}", serde_json::to_string_pretty(&info)?);
    Ok(())
}

fn train(
    recording: &Path,
    cues: &Path,
    out: &Path,
    seed: Option<u64>,
    config: Option<&Path>,
    from: Option<&Path>,
    impedance_threshold: f64,
) -> Result<()> {
    let mut config: BundleConfig = input::load_json_or_default(config)?;
    if let Some(seed) = seed {
        config.train.seed = seed;
    }
    let rec = Recording::read(recording).with_context(|| format!("reading {}", recording.display()))?;
    let schedule = CueSchedule::load(cues).with_context(|| format!("loading {}", cues.display()))?;
    let previous = from
        .map(|p| ModelBundle::load(p).with_context(|| format!("loading {}", p.display())))
        .transpose()?;
    let bundle = emg_gateway::engine::train_from_recording(&rec, &schedule, previous.as_ref(), &config, impedance_threshold)
        .map_err(anyhow::Error::msg)?;
    bundle.save(out).with_context(|| format!("writing {}", out.display()))?;
    match &bundle.test {
        Some(cm) => eprintln!(
            "test accuracy {:.4} over {} windows; bundle written to {}",
            cm.accuracy(),
            cm.total(),
            out.display()
        ),
        None => eprintln!("bundle written to {}", out.display()),
    }
    Ok(())
}

fn simulate(listen: &str, headless: bool, record: Option<&Path>, config: Option<&Path>) -> Result<()> {
    let config = match config {
        Some(p) => RobotConfig::load(p).with_context(|| format!("loading {}", p.display()))?,
        None => RobotConfig::default(),
    };
    config.validate()?;
    let interval = Duration::from_secs_f64(config.tick_dt());
    let mut sim = Simulator::new(config);
    let mut rx = CommandReceiver::bind(listen).with_context(|| format!("binding {listen}"))?;
    eprintln!("simulator listening on {}", rx.local_addr()?);
    let mut log = record
        .map(|p| File::create(p).map(BufWriter::new).with_context(|| format!("creating {}", p.display())))
        .transpose()?;
    let stop = AtomicBool::new(false);
    let mut failure = None;
    serve_simulator(&mut rx, &mut sim, interval, &stop, |state| {
        if let Some(w) = log.as_mut() {
            let line = serde_json::to_writer(&mut *w, state)
                .map_err(anyhow::Error::from)
                .and_then(|_| w.write_all(b"\n").and_then(|_| w.flush()).map_err(Into::into));
            if let Err(e) = line {
                failure.get_or_insert(e);
                stop.store(true, std::sync::atomic::Ordering::Relaxed);
            }
        }
        if !headless {
            let p = &state.base_pose;
            println!(
                "tick {:>6} mode {:?} base ({:+.3}, {:+.3}, {:+.3}) lift {:.3} arm {:.3} gripper {:.3}",
                state.tick, state.mode, p.x, p.y, p.heading, state.lift, state.arm_extension, state.gripper
            );
        }
    })?;
    match failure {
        Some(e) => Err(e.context("recording states")),
        None => Ok(()),
    }
}

fn serve(
    source: &str,
    cues: Option<String>,
    bundle: Option<PathBuf>,
    sim: Option<String>,
    listen: SocketAddr,
    idle: bool,
) -> Result<()> {
    let source = input::source_descriptor(source, cues)?;
    let has_source = !matches!(source, emg_gateway::SourceDescriptor::None);
    let mut initial = vec![ClientCommand::SetSource { source }];
    if let Some(b) = &bundle {
        initial.push(ClientCommand::LoadBundle {
            path: b.to_string_lossy().into_owned(),
        });
        if has_source && !idle {
            initial.push(ClientCommand::StartSession);
        }
    } else if idle {
        bail!("--idle only applies with --bundle");
    }
    let config = GatewayConfig {
        sim_addr: sim,
        ..GatewayConfig::default()
    };
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(async move {
        let gateway = Gateway::start(config, listen, initial).await?;
        eprintln!("gateway on http://{}  (ws: /ws, state: /state)", gateway.local_addr());
        tokio::signal::ctrl_c().await?;
        gateway.shutdown().await;
        Ok(())
    })
}
