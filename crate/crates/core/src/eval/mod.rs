//! Metrics, ablation and sweep runners, and report files.

mod experiments;
mod metrics;
mod report;

pub use experiments::{
    ablate_trained, run_ablation, run_sensitivity, Ablation, SweepParam, SweepRow, Variant,
    SWEEP_GRID,
};
pub use metrics::{compute_metrics, ConfusionMatrix, MetricsReport};
pub use report::{
    bar_chart_svg, config_fingerprint, emit_report, line_chart_svg, read_csv, write_csv,
    write_line_chart, CsvRow, ReportFormat, ReportRow,
};
