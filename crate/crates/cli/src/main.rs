use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gridshap::dataset::synthetic::{self, SyntheticSpec};
use gridshap_cli::pipeline::{
    collect_reports, metrics_confusion_text, metrics_report_text, ExplainRequest,
};
use gridshap_cli::{explain, ingest, run, InputError, RunConfig};

const EXIT_PARTIAL: u8 = 1;
const EXIT_INPUT: u8 = 2;

#[derive(Parser)]
#[command(name = "gridshap", version, about = "PMU event classification with exact SHAP explanations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// TOML run configuration; defaults apply to missing keys.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Overrides the configured input file.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Overrides the configured output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<RunConfig, String> {
        let mut config = match &self.config {
            Some(p) => RunConfig::read(p).map_err(|e| e.to_string())?,
            None => RunConfig::default(),
        };
        if let Some(i) = &self.input {
            config.input = i.clone();
        }
        if let Some(o) = &self.out {
            config.out_dir = o.clone();
        }
        if let Some(s) = self.seed {
            config.seed = s;
        }
        config.validate().map_err(|e| e.to_string())?;
        Ok(config)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Clean an event file and write a binary cache plus a cleaning report.
    Ingest(ConfigArgs),
    /// Run every configured pairwise experiment.
    Run(ConfigArgs),
    /// Explain one row with a saved model.
    Explain {
        #[arg(long)]
        model: PathBuf,
        /// Event CSV or binary cache holding the row.
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        row: usize,
        /// Scaler sidecar to standardize raw data before explaining.
        #[arg(long)]
        scaler: Option<PathBuf>,
        /// Background rows; defaults to a sample of `--data`.
        #[arg(long)]
        background: Option<PathBuf>,
        #[arg(long, default_value_t = 256)]
        background_size: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = gridshap::viz::WATERFALL_MAX_FEATURES)]
        max_features: usize,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Prefix for the output file names.
        #[arg(long, default_value = "explain")]
        name: String,
    },
    /// Print the classification reports found in an output directory.
    Report {
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Print the metrics JSON instead of text.
        #[arg(long)]
        json: bool,
    },
    /// Show or check run configurations.
    Config {
        #[arg(long)]
        print_defaults: bool,
        /// Validate a configuration file and print it with defaults filled in.
        #[arg(long)]
        check: Option<PathBuf>,
    },
    /// Write the synthetic event file used for testing.
    Synth {
        #[arg(long, default_value_t = 2000)]
        rows: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Do not plant infinite cells.
        #[arg(long)]
        no_infinities: bool,
        #[arg(long)]
        out: PathBuf,
    },
}

fn input_failure(e: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(EXIT_INPUT)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Ingest(args) => {
            let config = match args.resolve() {
                Ok(c) => c,
                Err(e) => return input_failure(e),
            };
            match ingest(&config) {
                Ok(r) => {
                    println!(
                        "ingested {} rows ({} dropped), {} feature columns -> {}",
                        r.rows_in - r.rows_dropped,
                        r.rows_dropped,
                        r.columns,
                        config.out_dir.join("events.gshd").display()
                    );
                    ExitCode::SUCCESS
                }
                Err(e) => input_failure(e),
            }
        }
        Command::Run(args) => {
            let config = match args.resolve() {
                Ok(c) => c,
                Err(e) => return input_failure(e),
            };
            match run(&config) {
                Ok(summary) => {
                    for outcome in &summary.outcomes {
                        match outcome {
                            Ok(o) => {
                                let r = &o.metrics.selected_features.report;
                                println!(
                                    "{}: accuracy {:.2} with top {} features ({} files)",
                                    o.name,
                                    r.accuracy,
                                    o.metrics.selected_features.features.len(),
                                    o.files.len()
                                );
                            }
                            Err(e) => eprintln!("pair failed: {e}"),
                        }
                    }
                    println!("manifest: {}", config.out_dir.join("manifest.json").display());
                    if summary.failures() > 0 {
                        ExitCode::from(EXIT_PARTIAL)
                    } else {
                        ExitCode::SUCCESS
                    }
                }
                Err(e) => input_failure(e),
            }
        }
        Command::Explain {
            model,
            data,
            row,
            scaler,
            background,
            background_size,
            seed,
            max_features,
            out,
            name,
        } => {
            let req = ExplainRequest {
                model: &model,
                data: &data,
                row,
                scaler: scaler.as_deref(),
                background: background.as_deref(),
                background_size,
                seed,
                waterfall_max_features: max_features,
                out_dir: &out,
                name: &name,
            };
            match explain(&req) {
                Ok(o) => {
                    let e = &o.explanation;
                    println!("row {row}: base {:.6}, f(x) {:.6}", e.base_value, e.fx);
                    for f in &o.files {
                        println!("  {}", f.display());
                    }
                    ExitCode::SUCCESS
                }
                Err(e) => input_failure(e),
            }
        }
        Command::Report { out, json } => match collect_reports(&out) {
            Ok(reports) if reports.is_empty() => input_failure(InputError::Invalid(format!(
                "no reports under {}",
                out.display()
            ))),
            Ok(reports) => {
                for m in &reports {
                    if json {
                        println!("{}", serde_json::to_string_pretty(m).expect("serializable"));
                    } else {
                        println!("{}\n{}", metrics_confusion_text(m), metrics_report_text(m));
                    }
                }
                ExitCode::SUCCESS
            }
            Err(e) => input_failure(e),
        },
        Command::Config { print_defaults, check } => {
            if let Some(path) = check {
                return match RunConfig::read(&path) {
                    Ok(c) => {
                        print!("{}", c.to_toml());
                        ExitCode::SUCCESS
                    }
                    Err(e) => input_failure(e),
                };
            }
            if print_defaults {
                print!("{}", RunConfig::defaults_text());
                ExitCode::SUCCESS
            } else {
                input_failure("config needs --print-defaults or --check <file>")
            }
        }
        Command::Synth {
            rows,
            seed,
            no_infinities,
            out,
        } => {
            let spec = SyntheticSpec {
                rows,
                seed,
                inject_infinities: !no_infinities,
            };
            let result = std::fs::File::create(&out).and_then(|f| {
                let mut w = std::io::BufWriter::new(f);
                synthetic::write_csv(&mut w, &spec)?;
                w.flush()
            });
            match result {
                Ok(()) => {
                    println!("wrote {rows} rows to {}", out.display());
                    ExitCode::SUCCESS
                }
                Err(e) => input_failure(format!("{}: {e}", out.display())),
            }
        }
    }
}
