use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use dbo_core::experiment::{
    emit_plot, preset, read_summary, run_and_report, CiMethod, ExperimentConfig, Method, Report, ReportOptions, PRESETS,
};
use dbo_core::objectives::REGISTRY;

#[derive(Parser)]
#[command(name = "dbo", version, about = "Distributed Bayesian optimization experiments")]
struct Cli {
    /// Master seed, overriding the one in the config or preset.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Count evaluations after the initial design only.
    #[arg(long, global = true)]
    post_init: bool,
    /// Use a Student-t multiplier for the 95% intervals instead of 1.96.
    #[arg(long, global = true)]
    student_t: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a JSON config file.
    Run {
        config: PathBuf,
        /// Overrides `output_dir`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a named preset bundle (see `bench --list`).
    Bench {
        #[arg(required_unless_present = "list")]
        preset: Option<String>,
        #[arg(long)]
        list: bool,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Overrides the number of trials.
        #[arg(long)]
        trials: Option<usize>,
    },
    /// Render a summary CSV as an SVG regret plot.
    Plot {
        summary: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
        #[arg(long, default_value = "")]
        title: String,
    },
    ListObjectives,
    ListMethods,
}

fn report(config: &ExperimentConfig, dir: &Path, label: &str, opts: ReportOptions) -> Result<Report> {
    eprintln!("running {label} ({} trials) -> {}", config.trials, dir.display());
    let r = run_and_report(config, dir, label, opts).with_context(|| format!("experiment '{label}' failed"))?;
    for f in &r.output.failures {
        eprintln!("warning: {} trial {} failed: {}", f.method, f.trial, f.error);
    }
    let flagged: usize = r.output.traces.iter().map(|t| t.flags).sum();
    if flagged > 0 {
        eprintln!("note: {flagged} diagnostic flags raised (low MH acceptance, fit fallbacks, drain limits)");
    }
    let mut seen = Vec::new();
    for row in r.summary.iter().rev() {
        if !seen.contains(&row.method) {
            seen.push(row.method.clone());
            println!(
                "{label}\t{}\tfinal mean {:.6e}\tmedian {:.6e}\t95% CI [{:.6e}, {:.6e}]",
                row.method, row.mean, row.median, row.ci_lo, row.ci_hi
            );
        }
    }
    Ok(r)
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let opts = ReportOptions {
        post_init_index: cli.post_init,
        ci: if cli.student_t { CiMethod::StudentT } else { CiMethod::Normal },
    };
    match cli.command {
        Command::Run { config, out } => {
            let text = std::fs::read_to_string(&config).with_context(|| format!("reading {}", config.display()))?;
            let mut cfg = ExperimentConfig::from_json(&text).with_context(|| format!("parsing {}", config.display()))?;
            if let Some(s) = cli.seed {
                cfg.seed = s;
            }
            let dir = out.unwrap_or_else(|| cfg.output_dir.clone());
            let label = config.file_stem().and_then(|s| s.to_str()).unwrap_or("run").to_string();
            report(&cfg, &dir, &label, opts)?;
        }
        Command::Bench { preset: name, list, out, trials } => {
            if list {
                for p in PRESETS {
                    println!("{:<10} {}", p.name, p.description);
                }
                return Ok(());
            }
            let name = name.expect("clap enforces a preset");
            for (label, mut cfg) in preset(&name)? {
                if let Some(s) = cli.seed {
                    cfg.seed = s;
                }
                if let Some(t) = trials {
                    cfg.trials = t;
                }
                let root = out.clone().unwrap_or_else(|| cfg.output_dir.clone());
                report(&cfg, &root.join(&label), &label, opts)?;
            }
        }
        Command::Plot { summary, output, title } => {
            let rows = read_summary(&summary).with_context(|| format!("reading {}", summary.display()))?;
            if rows.is_empty() {
                bail!("{} has no rows", summary.display());
            }
            let output = output.unwrap_or_else(|| summary.with_extension("svg"));
            emit_plot(&rows, &title, &output)?;
            println!("{}", output.display());
        }
        Command::ListObjectives => {
            for e in REGISTRY {
                println!("{:<12} {}", e.name, e.description);
            }
        }
        Command::ListMethods => {
            for m in Method::ALL {
                println!("{:<13} {}", m.name(), m.description());
            }
        }
    }
    Ok(())
}
