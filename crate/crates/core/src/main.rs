//! Command-line front end: simulate scenario batches, build datasets,
//! evaluate the model roster, and render report charts.

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use faultloc::baselines::{impedance_locate, ImpedanceInputs};
use faultloc::dataset::{build_matrix, save_dataset, ChannelMode, StandardScaler};
use faultloc::error::{Error, Result};
use faultloc::harness::{self, plot, report, ExperimentConfig, ModelSpec};
use faultloc::sim::{generate_scenarios, load_waveforms, write_waveforms, Simulator};

#[derive(Parser)]
#[command(
    name = "faultloc",
    about = "Fault-location workbench for a radial three-terminal HVDC network",
    version
)]
struct Cli {
    /// Experiment config (JSON). Built-in defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Override the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads for scenario simulation (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate the scenario batch; write per-scenario waveform CSVs and a
    /// JSON manifest.
    Simulate {
        /// Output directory for the waveforms.
        #[arg(long)]
        out: PathBuf,
    },
    /// Window simulated waveforms into a labeled dataset CSV (plus a scaler
    /// file fitted on the exported rows).
    BuildDataset {
        /// Directory holding waveform CSVs and manifest.json.
        #[arg(long = "in")]
        input: PathBuf,
        /// Dataset CSV to write.
        #[arg(long)]
        out: PathBuf,
        /// Feature window length in samples (default: config value).
        #[arg(long)]
        window: Option<usize>,
        /// Channels: v, i, or vi (default: config value).
        #[arg(long)]
        channels: Option<String>,
    },
    /// 7-fold cross-validation of the roster on voltage and current data;
    /// writes kfold.csv, timing.csv, and impedance.csv.
    Evaluate,
    /// Learning curve for one roster model; writes curve_<model>.csv.
    Curve {
        /// Roster model name: gb, ols, knn, dtree, or mean.
        #[arg(long)]
        model: String,
    },
    /// Fault vs load-step classification; writes classify.csv.
    Classify,
    /// Repeat the evaluation at each configured SNR; writes noise.csv.
    Noise,
    /// Run the impedance locator on one generated scenario.
    Locate {
        /// Scenario index within the generated batch.
        #[arg(long)]
        scenario: usize,
        /// Assumed fault resistance (ohm).
        #[arg(long, default_value_t = 0.0)]
        rf_assumed: f64,
        /// Use the simulator's true fault current instead of the terminal
        /// current.
        #[arg(long)]
        oracle_if: bool,
    },
    /// Render SVG charts from the report CSVs in a directory.
    Plot {
        #[arg(long = "in")]
        input: PathBuf,
    },
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("{}", serde_json::json!({ "error": e.to_string() }));
        std::process::exit(1);
    }
}

fn run(cli: Cli) -> Result<()> {
    let mut config = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(jobs) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    }

    match cli.command {
        Command::Simulate { out } => {
            let records = harness::build_records(&config)?;
            write_waveforms(&records, &out)?;
            println!(
                "wrote {} waveforms and manifest.json to {}",
                records.len(),
                out.display()
            );
        }
        Command::BuildDataset {
            input,
            out,
            window,
            channels,
        } => {
            let records = load_waveforms(&input)?;
            let n_window = window.unwrap_or(config.n_window);
            let mode = match channels {
                Some(s) => ChannelMode::parse(&s)?,
                None => config.channel_mode,
            };
            let matrix = build_matrix(&records, n_window, mode, config.k_folds, config.seed)?;
            save_dataset(&matrix, &out)?;
            println!(
                "wrote {} rows x {} features to {}",
                matrix.n_rows(),
                matrix.n_features(),
                out.display()
            );
            let scaler = StandardScaler::fit(matrix.rows.iter().map(|r| r.values.as_slice()))?;
            let scaler_path = out.with_extension("scaler.json");
            scaler.save(&scaler_path)?;
            println!("wrote {}", scaler_path.display());
        }
        Command::Evaluate => {
            let records = harness::build_records(&config)?;
            let eval = harness::run_kfold(&config, &records)?;
            let dir = &config.out_dir;
            let path = report::write_artifact(dir, "kfold.csv", &report::kfold_csv(&eval))?;
            println!("wrote {}", path.display());
            let path = report::write_artifact(dir, "timing.csv", &report::timing_csv(&eval))?;
            println!("wrote {}", path.display());
            let rows = harness::impedance_rows(&config, &records)?;
            let path = report::write_artifact(dir, "impedance.csv", &report::impedance_csv(&rows))?;
            println!("wrote {}", path.display());
            println!("config fingerprint {}", eval.fingerprint);
            for channel in &eval.channels {
                for model in &channel.models {
                    println!(
                        "{} {}: mean MAE {:.3} km ({:.2} s fit)",
                        channel.channel, model.name, model.mean_mae, model.fit_seconds
                    );
                    for failure in &model.failures {
                        eprintln!("note: {} {}: {}", channel.channel, model.name, failure);
                    }
                }
            }
        }
        Command::Curve { model } => {
            let spec = config
                .roster
                .iter()
                .find(|s| s.name() == model)
                .cloned()
                .ok_or_else(|| {
                    Error::Config(format!(
                        "model {model:?} is not in the roster ({})",
                        config
                            .roster
                            .iter()
                            .map(ModelSpec::name)
                            .collect::<Vec<_>>()
                            .join(", ")
                    ))
                })?;
            let records = harness::build_records(&config)?;
            let matrix = harness::regression_matrix(&records, &config, config.channel_mode)?;
            let (train_idx, _) = matrix.split_fold(0);
            let grid = harness::default_grid(train_idx.len());
            let curve = harness::learning_curve(&config, &records, &spec, &grid)?;
            let name = format!("curve_{model}.csv");
            let path = report::write_artifact(&config.out_dir, &name, &report::curve_csv(&curve))?;
            println!("wrote {}", path.display());
            for p in &curve.points {
                println!(
                    "n={:<5} train {:.3} km  val {:.3} km  fit {:.4} s",
                    p.n_train, p.train_mae, p.val_mae, p.fit_seconds
                );
            }
        }
        Command::Classify => {
            let records = harness::build_records(&config)?;
            let result = harness::classify_events(&config, &records)?;
            let path = report::write_artifact(
                &config.out_dir,
                "classify.csv",
                &report::classify_csv(&result),
            )?;
            println!("wrote {}", path.display());
            println!(
                "accuracy {:.4} (fault hits {}, misses {}; non-fault hits {}, misses {})",
                result.accuracy,
                result.confusion.true_fault,
                result.confusion.false_nonfault,
                result.confusion.true_nonfault,
                result.confusion.false_fault
            );
        }
        Command::Noise => {
            let records = harness::build_records(&config)?;
            let sweep = harness::noise_sweep(&config, &records)?;
            let path =
                report::write_artifact(&config.out_dir, "noise.csv", &report::noise_csv(&sweep))?;
            println!("wrote {}", path.display());
        }
        Command::Locate {
            scenario,
            rf_assumed,
            oracle_if,
        } => {
            let scenarios = generate_scenarios(
                &config.network,
                config.seed,
                config.n_fault,
                config.n_nonfault,
                &config.ranges,
                config.inception_time,
            )?;
            let sc = scenarios.get(scenario).ok_or_else(|| {
                Error::InvalidParameter(format!(
                    "scenario {scenario} out of range (batch holds {})",
                    scenarios.len()
                ))
            })?;
            let Some(true_km) = sc.label().distance() else {
                return Err(Error::InvalidParameter(format!(
                    "scenario {scenario} is a load step; the locator needs a fault"
                )));
            };
            let sim = Simulator::for_scenario(&config.network, sc)?;
            let record = sim.simulate(sc, config.duration)?;
            let start = record.sample_index_at_or_after(sc.inception_time);
            let avg = |xs: &[f64]| xs[start..start + 5].iter().sum::<f64>() / 5.0;
            let i_s = avg(&record.current);
            let i_f = if oracle_if {
                avg(record.fault_current.as_ref().expect("fault record"))
            } else {
                i_s
            };
            let estimate = impedance_locate(&ImpedanceInputs {
                v_s: avg(&record.voltage),
                i_s,
                i_f,
                r_f_assumed: rf_assumed,
                z_total: config.network.branches[config.network.measuring_terminal].r_per_km
                    * config.network.reachable_path_km(),
                line_length: config.network.reachable_path_km(),
            })?;
            println!(
                "{}",
                serde_json::json!({
                    "scenario": scenario,
                    "true_km": true_km,
                    "estimate_km": estimate,
                    "error_km": estimate - true_km,
                    "fault_resistance_ohm": sc.fault_resistance,
                    "rf_assumed_ohm": rf_assumed,
                    "oracle_if": oracle_if,
                })
            );
        }
        Command::Plot { input } => {
            for path in plot::emit_plots(&input)? {
                println!("wrote {}", path.display());
            }
        }
    }
    Ok(())
}
