//! Method × trial experiment harness: common random numbers across methods,
//! regret aggregation, CSV and SVG output.

mod aggregate;
mod config;
mod io;
mod plot;
mod presets;
mod run;

use std::path::{Path, PathBuf};

pub use aggregate::{aggregate, median, CiMethod, SummaryRow};
pub use config::{
    AcquisitionConfig, ExperimentConfig, FixedHyper, FleetEntry, KappaConfig, KernelConfig, Method, MethodSpec,
    ScheduleConfig, ScheduleMode, TModeConfig,
};
pub use io::{fmt_num, read_summary, read_traces, summary_to_csv, traces_to_csv, write_summary, write_traces};
pub use plot::{emit_plot, render_svg};
pub use presets::{preset, Preset, PRESETS};
pub use run::{objective_for_trial, run_experiment, trial_seed, ExperimentOutput, RegretTrace, TraceRow, TrialFailure};

use crate::error::Result;

/// Output options that do not change the runs themselves.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ReportOptions {
    /// Count evaluations after the initial design only.
    pub post_init_index: bool,
    pub ci: CiMethod,
}

#[derive(Clone, Debug)]
pub struct Report {
    pub traces_csv: PathBuf,
    pub summary_csv: PathBuf,
    pub plot_svg: PathBuf,
    pub summary: Vec<SummaryRow>,
    pub output: ExperimentOutput,
}

/// Runs `config` and writes `traces.csv`, `summary.csv` and `regret.svg` under `dir`.
pub fn run_and_report(config: &ExperimentConfig, dir: &Path, title: &str, opts: ReportOptions) -> Result<Report> {
    let output = run_experiment(config)?;
    let traces: Vec<RegretTrace> = if opts.post_init_index {
        output.traces.iter().map(RegretTrace::post_init).collect()
    } else {
        output.traces.clone()
    };
    let summary = aggregate(&traces, opts.ci)?;
    let report = Report {
        traces_csv: dir.join("traces.csv"),
        summary_csv: dir.join("summary.csv"),
        plot_svg: dir.join("regret.svg"),
        summary,
        output,
    };
    write_traces(&report.traces_csv, &traces)?;
    write_summary(&report.summary_csv, &report.summary)?;
    emit_plot(&report.summary, title, &report.plot_svg)?;
    Ok(report)
}
