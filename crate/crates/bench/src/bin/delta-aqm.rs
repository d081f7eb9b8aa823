use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use delta_aqm::predictor::{EmOptions, LinkInfo};
use delta_aqm::{collect_dataset, FitOptions, GammaService, LatencyModel, TrainingScenario};
use delta_aqm_bench::config::load_scenario;
use delta_aqm_bench::dataset_io::{load_dataset, save_dataset};
use delta_aqm_bench::report::{format_summary, read_report, summarize, write_rows};
use delta_aqm_bench::{calibrate_targets, BenchError, RunOptions, Runner, ScenarioConfig, Suite, TargetSpec};

#[derive(Parser)]
#[command(name = "delta-aqm", version, about = "Deadline-aware AQM experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Copy)]
struct LinkArgs {
    /// Gamma service shape.
    #[arg(long, default_value_t = 5.0)]
    concentration: f64,
    /// Gamma service rate.
    #[arg(long, default_value_t = 0.5)]
    rate: f64,
    /// Arrival rate over service rate, in (0, 1).
    #[arg(long)]
    utilization: f64,
}

#[derive(Subcommand)]
enum Command {
    /// Target delays for the given quantiles of the no-AQM sojourn time.
    Calibrate {
        #[command(flatten)]
        link: LinkArgs,
        #[arg(long, value_delimiter = ',', required = true)]
        quantiles: Vec<f64>,
        #[arg(long, default_value_t = 200_000)]
        packets: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Records (predecessors, sojourn) pairs from a run without AQM.
    Collect {
        #[command(flatten)]
        link: LinkArgs,
        #[arg(long)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fits the conditional latency model and writes the model file.
    Train {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Mixture components per predecessor count.
        #[arg(long, default_value_t = 4)]
        components: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Runs one scenario file and prints its report rows.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the seeds in the file.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Runs a suite file and writes the report CSV.
    Bench {
        #[arg(long)]
        suite: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Worker threads; defaults to $DELTA_AQM_JOBS, then the core count.
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Summarizes a report CSV per scenario and AQM.
    Report {
        #[arg(long)]
        csv: PathBuf,
    },
}

/// Exit status when some suite rows failed but the report was written.
const ROW_ERRORS: u8 = 3;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            let (kind, message) = match e.downcast_ref::<BenchError>() {
                Some(b) => (b.kind(), format!("{e:#}")),
                None => ("error", format!("{e:#}")),
            };
            eprintln!("error: {kind}: {}", message.replace('\n', " "));
            ExitCode::FAILURE
        }
    }
}

fn service(link: &LinkArgs) -> anyhow::Result<GammaService<f64>> {
    GammaService::new(link.concentration, link.rate).map_err(|e| BenchError::from(e).into())
}

fn run(command: Command) -> anyhow::Result<ExitCode> {
    match command {
        Command::Calibrate {
            link,
            quantiles,
            packets,
            seed,
        } => {
            let mut base = ScenarioConfig::new("calibrate", link.utilization, TargetSpec::Delay(1.0));
            base.gamma.concentration = link.concentration;
            base.gamma.rate = link.rate;
            base.num_packets = packets;
            base.validate()?;
            let targets = calibrate_targets(&base, seed, &quantiles)?;
            let mut out = std::io::stdout().lock();
            writeln!(out, "quantile,target_delay")?;
            for (q, t) in quantiles.iter().zip(targets) {
                writeln!(out, "{q},{t}")?;
            }
        }
        Command::Collect {
            link,
            samples,
            seed,
            out,
        } => {
            let scenario = TrainingScenario {
                service: service(&link)?,
                utilization: link.utilization,
                seed,
            };
            let data = collect_dataset(&scenario, samples).map_err(BenchError::from)?;
            save_dataset(&out, &data)?;
            eprintln!("wrote {} samples to {}", data.len(), out.display());
        }
        Command::Train {
            data,
            out,
            components,
            seed,
        } => {
            let dataset = load_dataset(&data)?;
            let options = FitOptions {
                em: EmOptions {
                    components,
                    ..Default::default()
                },
                seed,
            };
            let model = LatencyModel::fit(&dataset, &options).map_err(BenchError::from)?;
            model.save_to_path(&out).map_err(|e| BenchError::Model {
                path: out.display().to_string(),
                reason: e.to_string(),
            })?;
            // Read back so a written file is always a loadable one.
            LatencyModel::load_from_path(&out).map_err(|e| BenchError::Model {
                path: out.display().to_string(),
                reason: e.to_string(),
            })?;
            let link = dataset.link.unwrap_or(LinkInfo::default());
            eprintln!(
                "trained on {} samples ({} conditions, utilization {}) -> {}",
                dataset.len(),
                model.max_condition() + 1,
                link.utilization.map_or("unknown".to_string(), |u| u.to_string()),
                out.display()
            );
        }
        Command::Simulate { config, seed } => {
            let mut scenario = load_scenario(&config)?;
            if let Some(s) = seed {
                scenario.seed = Some(s);
                scenario.seeds = None;
            }
            let suite = Suite {
                scenarios: vec![scenario],
            };
            let report = Runner::new().run_suite(&suite, &RunOptions { jobs: Some(1), ..Default::default() })?;
            if let Some(e) = report.errors.first() {
                return Err(BenchError::Config {
                    field: format!("scenario[{}]", e.scenario_id),
                    reason: e.error.clone(),
                }
                .into());
            }
            write_rows(std::io::stdout().lock(), &report.rows)?;
        }
        Command::Bench { suite, out, jobs } => {
            let parsed = Suite::load(&suite).with_context(|| format!("suite {}", suite.display()))?;
            let partial = sibling(&out, "partial");
            let options = RunOptions {
                jobs,
                partial_path: Some(partial.clone()),
            };
            let report = Runner::new().run_suite(&parsed, &options)?;
            let file = std::fs::File::create(&out).map_err(|e| BenchError::io(&out, e))?;
            report.write_csv(std::io::BufWriter::new(file))?;
            let _ = std::fs::remove_file(&partial);
            eprintln!("wrote {} rows to {}", report.rows.len(), out.display());
            if !report.errors.is_empty() {
                let errors = sibling(&out, "errors.csv");
                let file = std::fs::File::create(&errors).map_err(|e| BenchError::io(&errors, e))?;
                report.write_errors(file)?;
                for e in &report.errors {
                    eprintln!("error: row: {} seed {}: {}", e.scenario_id, e.seed, e.error);
                }
                return Ok(ExitCode::from(ROW_ERRORS));
            }
        }
        Command::Report { csv } => {
            let rows = read_report(&csv)?;
            print!("{}", format_summary(&summarize(&rows)));
        }
    }
    Ok(ExitCode::SUCCESS)
}

/// `report.csv` -> `report.csv.<suffix>`.
fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut name = path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(format!(".{suffix}"));
    path.with_file_name(name)
}
