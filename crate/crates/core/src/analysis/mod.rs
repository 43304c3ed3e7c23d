//! Session analytics: SNR, impedance summaries, heatmaps and pairwise
//! matrices, the real-time accuracy harness and the rank tests.

pub mod heatmap;
pub mod realtime;
pub mod snr;
pub mod stats;

pub use heatmap::{cosine, euclidean, mean_rms_heatmap, pairwise_matrix, DatasetTag, Heatmap, Metric, PairwiseMatrix};
pub use realtime::{
    realtime_accuracy, BundlePredictor, CueAccuracy, HarnessConfig, RealtimeReport, SourceWindows, StreamWindows,
    TickPredictor, TickWindows, MIN_PREDICTIONS_PER_HOLD,
};
pub use snr::{
    hold_tail_windows, impedance_drift, pooled_snr, session_snr, snr, summarize_impedances, ImpedanceDrift,
    ImpedanceSummary, SnrReport,
};
pub use stats::{
    kruskal_wallis, kruskal_wallis_exact, linear_trend, midranks, wilcoxon_signed_rank, LinearFit, PMethod, Tail, TestResult,
    WILCOXON_EXACT_MAX_N,
};
