//! `emgctl eval`: model accuracy and session analytics reports.

use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, Subcommand, ValueEnum};
use emg_core::analysis::{
    impedance_drift, kruskal_wallis, mean_rms_heatmap, pairwise_matrix, realtime_accuracy, session_snr,
    summarize_impedances, wilcoxon_signed_rank, BundlePredictor, DatasetTag, HarnessConfig, Metric, SourceWindows,
    StreamWindows, Tail, TickWindows,
};
use emg_core::bundle::ModelBundle;
use emg_core::ingest::{label_windows, rms_dataset, CueSchedule, Recording, SampleSource, StreamClient};
use emg_core::pipeline::{
    reject_channels, ChannelMask, ElectrodeArray, Preprocessor, RmsVector, DEFAULT_IMPEDANCE_THRESHOLD_OHMS,
};
use emg_core::Gesture;
use serde::Serialize;

#[derive(Args)]
#[command(args_conflicts_with_subcommands = true)]
pub struct EvalArgs {
    #[command(subcommand)]
    command: Option<EvalCommand>,
    #[arg(long)]
    bundle: Option<PathBuf>,
    #[arg(long)]
    recording: Option<PathBuf>,
    #[arg(long)]
    cues: Option<PathBuf>,
    /// Where to write the JSON report; stdout when absent.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Subcommand)]
enum EvalCommand {
    /// Pooled SNR of a gesture against Rest, with an impedance summary when available.
    Snr {
        #[command(flatten)]
        session: SessionArgs,
        #[arg(long, default_value = "Fingers Closed")]
        gesture: Gesture,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Mean RMS heatmap of every gesture.
    Heatmaps {
        #[command(flatten)]
        session: SessionArgs,
        #[arg(long, default_value_t = 8)]
        grid_rows: usize,
        #[arg(long, default_value_t = 8)]
        grid_cols: usize,
        #[arg(long)]
        report: Option<PathBuf>,
        /// Directory for one CSV grid per gesture.
        #[arg(long)]
        csv_dir: Option<PathBuf>,
    },
    /// Distance or similarity matrix between the heatmaps of two sessions.
    Matrix {
        #[arg(long)]
        a_recording: PathBuf,
        #[arg(long)]
        a_cues: PathBuf,
        #[arg(long)]
        b_recording: PathBuf,
        #[arg(long)]
        b_cues: PathBuf,
        #[arg(long, value_enum, default_value_t = MetricArg::Cosine)]
        metric: MetricArg,
        #[arg(long, default_value_t = DEFAULT_IMPEDANCE_THRESHOLD_OHMS)]
        impedance_threshold: f64,
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Per-cue accuracy of raw predictions at decoder ticks during holds.
    RtAccuracy {
        #[arg(long)]
        bundle: PathBuf,
        /// Recording path or `tcp:host:port` serving the same session.
        #[arg(long)]
        source: String,
        #[arg(long)]
        cues: PathBuf,
        #[arg(long, default_value_t = 6.0)]
        tick_rate: f64,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Rank tests: impedance drift between two recordings and/or Kruskal-Wallis over groups.
    Stats {
        /// Recording whose impedances are the first measurement.
        #[arg(long, requires = "after")]
        before: Option<PathBuf>,
        #[arg(long, requires = "before")]
        after: Option<PathBuf>,
        /// JSON array of arrays of observations, one per group.
        #[arg(long)]
        groups: Option<PathBuf>,
        /// JSON array of `[x, y]` pairs for a two-sided signed-rank test.
        #[arg(long)]
        pairs: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_IMPEDANCE_THRESHOLD_OHMS)]
        impedance_threshold: f64,
        #[arg(long)]
        report: Option<PathBuf>,
    },
}

#[derive(Args)]
struct SessionArgs {
    #[arg(long)]
    recording: PathBuf,
    #[arg(long)]
    cues: PathBuf,
    /// Electrodes above this impedance are excluded.
    #[arg(long, default_value_t = DEFAULT_IMPEDANCE_THRESHOLD_OHMS)]
    impedance_threshold: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum MetricArg {
    Euclidean,
    Cosine,
}

impl From<MetricArg> for Metric {
    fn from(m: MetricArg) -> Self {
        match m {
            MetricArg::Euclidean => Metric::Euclidean,
            MetricArg::Cosine => Metric::Cosine,
        }
    }
}

pub fn run(args: EvalArgs) -> Result<()> {
    match args.command {
        None => {
            let (Some(bundle), Some(recording), Some(cues)) = (args.bundle, args.recording, args.cues) else {
                bail!("eval needs --bundle, --recording and --cues, or an analysis subcommand");
            };
            accuracy(&bundle, &recording, &cues, args.report.as_deref())
        }
        Some(EvalCommand::Snr {
            session,
            gesture,
            report,
        }) => {
            let s = Session::open(&session.recording, &session.cues, session.impedance_threshold)?;
            let snr = session_snr(&s.pre, &s.rec, &s.schedule, gesture)?;
            let impedances = s
                .rec
                .impedances
                .as_deref()
                .map(|z| summarize_impedances(z, session.impedance_threshold))
                .transpose()?;
            write_report(report.as_deref(), &serde_json::json!({ "snr": snr, "impedances": impedances }))
        }
        Some(EvalCommand::Heatmaps {
            session,
            grid_rows,
            grid_cols,
            report,
            csv_dir,
        }) => {
            let s = Session::open(&session.recording, &session.cues, session.impedance_threshold)?;
            let array = ElectrodeArray::grid(grid_rows, grid_cols);
            let (rms, labels) = s.rms()?;
            let maps = Gesture::ALL
                .into_iter()
                .filter(|g| labels.contains(g))
                .map(|g| mean_rms_heatmap(&rms, &labels, g, &array, &s.pre.mask, DatasetTag::Initial))
                .collect::<emg_core::Result<Vec<_>>>()?;
            if let Some(dir) = csv_dir {
                std::fs::create_dir_all(&dir)?;
                for m in &maps {
                    let name = m.gesture.name().to_lowercase().replace(' ', "_");
                    std::fs::write(dir.join(format!("{name}.csv")), m.to_csv())?;
                }
            }
            write_report(report.as_deref(), &maps)
        }
        Some(EvalCommand::Matrix {
            a_recording,
            a_cues,
            b_recording,
            b_cues,
            metric,
            impedance_threshold,
            report,
            csv,
        }) => {
            let mut a = Session::open(&a_recording, &a_cues, impedance_threshold)?;
            let mut b = Session::open(&b_recording, &b_cues, impedance_threshold)?;
            // Both datasets go through the same channels.
            let shared: Vec<bool> = a
                .pre
                .mask
                .accepted()
                .iter()
                .zip(b.pre.mask.accepted())
                .map(|(x, y)| *x && *y)
                .collect();
            let mask = ChannelMask::from_accepted(shared)?;
            a.pre.mask = mask.clone();
            b.pre.mask = mask;
            let (ra, la) = a.rms()?;
            let (rb, lb) = b.rms()?;
            let m = pairwise_matrix((&ra, &la), (&rb, &lb), metric.into())?;
            if let Some(path) = csv {
                std::fs::write(&path, m.to_csv()).with_context(|| format!("writing {}", path.display()))?;
            }
            write_report(report.as_deref(), &m)
        }
        Some(EvalCommand::RtAccuracy {
            bundle,
            source,
            cues,
            tick_rate,
            report,
        }) => {
            let bundle = ModelBundle::load(&bundle).with_context(|| format!("loading {}", bundle.display()))?;
            let schedule = CueSchedule::load(&cues).with_context(|| format!("loading {}", cues.display()))?;
            let config = HarnessConfig {
                tick_rate_hz: tick_rate,
                window_len: bundle.pipeline.pre.window_len,
                ..HarnessConfig::default()
            };
            let mut predictor = BundlePredictor(&bundle);
            let result = if let Some(addr) = source.strip_prefix("tcp:") {
                let client = StreamClient::connect(addr, 120_000).with_context(|| format!("connecting to {addr}"))?;
                let mut windows = StreamWindows {
                    client: &client,
                    timeout: Duration::from_secs(10),
                };
                realtime_accuracy(&mut predictor, &mut windows as &mut dyn TickWindows, &schedule, &config)?
            } else {
                let rec = Recording::read(&source).with_context(|| format!("reading {source}"))?;
                realtime_accuracy(&mut predictor, &mut SourceWindows(&rec), &schedule, &config)?
            };
            if result.skipped_ticks > 0 {
                eprintln!(
                    "warning: {} ticks fell outside the buffered stream; replay more slowly",
                    result.skipped_ticks
                );
            }
            eprintln!("mean per-cue accuracy {:.4} over {} cues", result.mean_accuracy, result.cues.len());
            write_report(report.as_deref(), &result)
        }
        Some(EvalCommand::Stats {
            before,
            after,
            groups,
            pairs,
            impedance_threshold,
            report,
        }) => {
            if before.is_none() && groups.is_none() && pairs.is_none() {
                bail!("stats needs --before/--after, --groups or --pairs");
            }
            let mut out = serde_json::Map::new();
            if let (Some(before), Some(after)) = (before, after) {
                let zb = impedances(&before)?;
                let za = impedances(&after)?;
                out.insert("impedance_before".into(), serde_json::to_value(summarize_impedances(&zb, impedance_threshold)?)?);
                out.insert("impedance_after".into(), serde_json::to_value(summarize_impedances(&za, impedance_threshold)?)?);
                out.insert("impedance_drift".into(), serde_json::to_value(impedance_drift(&zb, &za)?)?);
            }
            if let Some(path) = groups {
                let g: Vec<Vec<f64>> = read_json(&path)?;
                out.insert("kruskal_wallis".into(), serde_json::to_value(kruskal_wallis(&g)?)?);
            }
            if let Some(path) = pairs {
                let p: Vec<(f64, f64)> = read_json(&path)?;
                out.insert("wilcoxon".into(), serde_json::to_value(wilcoxon_signed_rank(&p, Tail::Two)?)?);
            }
            write_report(report.as_deref(), &out)
        }
    }
}

#[derive(Serialize)]
struct AccuracyReport {
    windows: u64,
    accuracy: f64,
    labels: Vec<String>,
    /// Rows are true classes, columns predictions.
    confusion: Vec<Vec<u64>>,
    recall: Vec<Option<f64>>,
}

fn accuracy(bundle: &Path, recording: &Path, cues: &Path, report: Option<&Path>) -> Result<()> {
    let bundle = ModelBundle::load(bundle).with_context(|| format!("loading {}", bundle.display()))?;
    let rec = Recording::read(recording).with_context(|| format!("reading {}", recording.display()))?;
    let schedule = CueSchedule::load(cues).with_context(|| format!("loading {}", cues.display()))?;
    let pre = &bundle.pipeline.pre;
    let labeled = label_windows(rec.len(), rec.sample_rate_hz, &schedule, pre.window_len, "eval")?;
    let (rms, labels) = rms_dataset(pre, &rec, &labeled)?;
    let cm = bundle.evaluate_rms(&rms, &labels)?;
    let out = AccuracyReport {
        windows: cm.total(),
        accuracy: cm.accuracy(),
        labels: bundle.labels.clone(),
        confusion: cm.counts.clone(),
        recall: (0..cm.counts.len()).map(|c| cm.recall(c)).collect(),
    };
    eprintln!("accuracy {:.4} over {} windows", out.accuracy, out.windows);
    write_report(report, &out)
}

/// A recording with its cues and an impedance-based preprocessor.
struct Session {
    rec: Recording,
    schedule: CueSchedule,
    pre: Preprocessor,
}

impl Session {
    fn open(recording: &Path, cues: &Path, threshold: f64) -> Result<Self> {
        let rec = Recording::read(recording).with_context(|| format!("reading {}", recording.display()))?;
        let schedule = CueSchedule::load(cues).with_context(|| format!("loading {}", cues.display()))?;
        let mask = match &rec.impedances {
            Some(z) => reject_channels(z, threshold)?,
            None => ChannelMask::all(rec.channel_count),
        };
        let pre = Preprocessor::standard(mask, rec.sample_rate_hz)?;
        Ok(Self { rec, schedule, pre })
    }

    fn rms(&self) -> Result<(Vec<RmsVector>, Vec<Gesture>)> {
        let labeled = label_windows(self.rec.len(), self.rec.sample_rate_hz, &self.schedule, self.pre.window_len, "eval")?;
        Ok(rms_dataset(&self.pre, &self.rec, &labeled)?)
    }
}

fn impedances(path: &Path) -> Result<Vec<f64>> {
    let rec = Recording::read(path).with_context(|| format!("reading {}", path.display()))?;
    rec.impedances
        .with_context(|| format!("{} carries no impedance measurements", path.display()))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn write_report(path: Option<&Path>, value: &impl Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    match path {
        Some(p) => std::fs::write(p, text + "\n").with_context(|| format!("writing {}", p.display())),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}
