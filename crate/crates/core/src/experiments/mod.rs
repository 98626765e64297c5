//! Config-driven convergence studies and their reports.

pub mod config;
pub mod fit;
pub mod report;
pub mod studies;

use std::path::{Path, PathBuf};

pub use config::{ExperimentConfig, KernelConfig, QNorm, ReferenceCoupling, RhsKind, StudyKind, TestFunction};
pub use fit::{fit_loglog_slope, m_schedule, LogLogFit};
pub use report::{StudyReport, StudyRow, CSV_HEADER};
pub use studies::{
    dobrushin_rate, run_chaos_study, run_dobrushin_study, run_joint_limit_study, run_monokinetic_check,
    run_multiwise_limit_study, run_sampling_rate_study, run_study,
};

/// Runs the configured study and writes its CSV and metadata sidecar into
/// `out_dir` (or the config's `output`, or the working directory).
pub fn run_and_write(config: &ExperimentConfig, out_dir: Option<&Path>) -> crate::error::Result<(StudyReport, PathBuf)> {
    let report = run_study(config)?;
    let dir = out_dir
        .map(Path::to_path_buf)
        .or_else(|| config.output.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    let (csv, _) = report.write(&dir, config.output_stem())?;
    Ok((report, csv))
}
