use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use bearing_transfer::bench::harness::{
    fault_set, lambda_sweep_with, roc_study_with, run_transfer_matrix_with, write_models,
};
use bearing_transfer::bench::{emit_report, ExperimentConfig, Method, ReportFormat, TransferReport};
use bearing_transfer::error::{Error, Result};
use bearing_transfer::ingest::{write_corpus, SampleFormat};
use bearing_transfer::par::{with_jobs, Exec};
use bearing_transfer::signal_synth::synth_dataset_with;

#[derive(Parser)]
#[command(version, about = "Cross-condition bearing fault diagnosis experiments")]
struct Cli {
    /// Experiment config (JSON); built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Overrides the config's seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for independent tests.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the synthetic corpus and its manifest.
    Synth {
        #[arg(long, default_value = "raw-f64le")]
        format: SampleFormat,
    },
    /// Run the transfer matrix.
    Run,
    /// DATF accuracy over a λ grid.
    Sweep {
        /// Comma-separated; the config's grid when omitted.
        #[arg(long, value_delimiter = ',')]
        lambdas: Option<Vec<f64>>,
    },
    /// One-vs-rest ROC curves at selected refinement iterations.
    Roc {
        /// Comma-separated; the config's list when omitted.
        #[arg(long, value_delimiter = ',')]
        iterations: Option<Vec<usize>>,
    },
    /// Re-emit a saved report.json in the configured formats.
    Report {
        #[arg(long)]
        input: PathBuf,
    },
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut config = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    config.validate()?;
    Ok(config)
}

fn emit(report: &TransferReport, out: &Path, formats: &[ReportFormat]) -> Result<()> {
    for path in emit_report(report, out, formats)? {
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn summarize(report: &TransferReport) {
    let mut methods: Vec<Method> = report.tests.iter().map(|t| t.method).collect();
    methods.sort();
    methods.dedup();
    for m in methods {
        if let Some(acc) = report.mean_off_diagonal(m) {
            println!("{m:>8}: mean off-diagonal accuracy {:.2}%", 100.0 * acc);
        }
    }
}

fn execute(cli: &Cli) -> Result<()> {
    let exec = Exec::default();
    match &cli.command {
        Command::Synth { format } => {
            let config = load_config(cli)?;
            let params = config
                .synth_params()
                .ok_or_else(|| Error::Config("`synth` needs a synthetic corpus in the config".into()))?;
            let corpus = synth_dataset_with(
                &config.conditions,
                &fault_set(&config.fault_sizes),
                config.samples_per_class,
                &params,
                exec,
            )?;
            let manifest = write_corpus(&corpus, &cli.out, *format)?;
            println!("wrote {} recordings and {}", corpus.recordings.len(), manifest.display());
        }
        Command::Run => {
            let config = load_config(cli)?;
            let out = run_transfer_matrix_with(&config, exec)?;
            summarize(&out.report);
            emit(&out.report, &cli.out, &config.formats)?;
            if !out.models.is_empty() {
                let dir = cli.out.join("models");
                write_models(&out.models, &dir)?;
                println!("wrote {} models to {}", out.models.len(), dir.display());
            }
        }
        Command::Sweep { lambdas } => {
            let config = load_config(cli)?;
            let lambdas = lambdas.clone().unwrap_or_else(|| config.lambdas.clone());
            let report = lambda_sweep_with(&config, &lambdas, exec)?;
            for &l in &lambdas {
                let accs: Vec<f64> = report.sweep.iter().filter(|s| s.lambda == l).map(|s| s.accuracy).collect();
                let mean = accs.iter().sum::<f64>() / accs.len().max(1) as f64;
                println!("lambda {l}: mean accuracy {:.2}%", 100.0 * mean);
            }
            emit(&report, &cli.out, &config.formats)?;
        }
        Command::Roc { iterations } => {
            let config = load_config(cli)?;
            let iterations = iterations.clone().unwrap_or_else(|| config.roc_iterations());
            let report = roc_study_with(&config, &iterations, exec)?;
            for &it in &iterations {
                let aucs: Vec<f64> = report.roc.iter().filter(|e| e.iteration == it).map(|e| e.auc).collect();
                if !aucs.is_empty() {
                    println!("iteration {it}: mean AUC {:.4}", aucs.iter().sum::<f64>() / aucs.len() as f64);
                }
            }
            emit(&report, &cli.out, &config.formats)?;
        }
        Command::Report { input } => {
            let report = TransferReport::load(input)?;
            let formats = match &cli.config {
                Some(_) => load_config(cli)?.formats,
                None => report.config.formats.clone(),
            };
            summarize(&report);
            emit(&report, &cli.out, &formats)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match with_jobs(cli.jobs, || execute(&cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
