//! `ncdd` command-line front end.
//!
//! Every subcommand writes its outputs under `--out`. Exit codes: 0 success,
//! 1 usage or configuration error, 2 data error, 3 numerical failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ncdd::config::RunConfig;
use ncdd::io::{
    read_adjacency, read_dataset, read_parameters, read_similarities, write_adjacency, write_dataset, write_json,
    write_parameters, write_scores, write_similarities, ScoreRow,
};
use ncdd::pipeline::{benchmark, classify_similarities, fit_topology, infer_all, train_model, training_indices};
use ncdd::synth::generate;
use ncdd::{Error, ErrorKind, GraphSignalSample};

#[derive(Debug, Parser)]
#[command(name = "ncdd", version, about = "Node-centric data-driven graph learning")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct ConfigArgs {
    /// TOML configuration file.
    #[arg(long, short)]
    config: PathBuf,
    /// Override a configuration value, e.g. `--set training.epochs=5`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl ConfigArgs {
    fn load(&self) -> ncdd::Result<RunConfig> {
        RunConfig::from_file(&self.config, &self.overrides)
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a labelled synthetic dataset (manifest.json and samples/).
    Synth {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Learn the topology from the training half of a dataset (adjacency.csv).
    Topology {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, short)]
        manifest: PathBuf,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Train the model on the training half (model.params, loss_trace.json).
    Train {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, short)]
        manifest: PathBuf,
        #[arg(long, short)]
        adjacency: PathBuf,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Compute one similarity matrix per sample (similarity_<index>.csv).
    Infer {
        #[arg(long, short)]
        manifest: PathBuf,
        #[arg(long, short)]
        adjacency: PathBuf,
        #[arg(long, short)]
        params: PathBuf,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Forest classification of similarity matrices (scores.csv, metrics.json).
    Classify {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, short)]
        manifest: PathBuf,
        /// Directory written by `infer`.
        #[arg(long, short)]
        similarities: PathBuf,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Test-half AUC (metrics.json). Without `--similarities`, runs every
    /// stage first and also writes their outputs.
    Evaluate {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, short)]
        manifest: PathBuf,
        #[arg(long, short)]
        similarities: Option<PathBuf>,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Per-sample inference time over the configured node counts
    /// (benchmark.json).
    Benchmark {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, short)]
        out: PathBuf,
    },
}

fn training_samples(samples: &[GraphSignalSample]) -> ncdd::Result<Vec<GraphSignalSample>> {
    Ok(training_indices(samples)?.into_iter().map(|i| samples[i].clone()).collect())
}

fn create_dir(dir: &Path) -> ncdd::Result<()> {
    std::fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.to_path_buf(),
        source,
    })
}

fn report(path: &Path) {
    println!("wrote {}", path.display());
}

fn classify(samples: &[GraphSignalSample], sims: &[ncdd::SimilarityMatrix], cfg: &RunConfig, out: &Path) -> ncdd::Result<f64> {
    let result = classify_similarities(sims, samples, cfg)?;
    let rows: Vec<ScoreRow> = result
        .test_indices
        .iter()
        .zip(&result.scores)
        .map(|(&i, &score)| ScoreRow {
            index: samples[i].index,
            label: samples[i].label.unwrap_or(0),
            score,
        })
        .collect();
    let scores = out.join("scores.csv");
    write_scores(&scores, &rows)?;
    report(&scores);
    let metrics = out.join("metrics.json");
    write_json(&metrics, &result.report)?;
    report(&metrics);
    Ok(result.report.auc)
}

fn run(command: Command) -> ncdd::Result<()> {
    match command {
        Command::Synth { config, out } => {
            let cfg = config.load()?;
            let synth = cfg.synth_config();
            let samples = generate(&synth)?;
            report(&write_dataset(&out, &samples, synth.sampling_rate_hz)?);
        }
        Command::Topology { config, manifest, out } => {
            let cfg = config.load()?;
            let (_, samples) = read_dataset(&manifest)?;
            let topology = fit_topology(&training_samples(&samples)?, &cfg)?;
            let path = out.join("adjacency.csv");
            write_adjacency(&topology, &path)?;
            report(&path);
        }
        Command::Train {
            config,
            manifest,
            adjacency,
            out,
        } => {
            let cfg = config.load()?;
            let (m, samples) = read_dataset(&manifest)?;
            let topology = read_adjacency(&adjacency)?;
            let trained = train_model(&training_samples(&samples)?, &topology, &cfg, m.sampling_rate_hz)?;
            let params = out.join("model.params");
            write_parameters(&trained.params, &params)?;
            report(&params);
            let trace = out.join("loss_trace.json");
            write_json(&trace, &trained.trace)?;
            report(&trace);
        }
        Command::Infer {
            manifest,
            adjacency,
            params,
            out,
        } => {
            let (_, samples) = read_dataset(&manifest)?;
            let topology = read_adjacency(&adjacency)?;
            let params = read_parameters(&params)?;
            let sims = infer_all(&samples, &topology, &params)?;
            create_dir(&out)?;
            write_similarities(&out, &samples, &sims)?;
            println!("wrote {} similarity matrices to {}", sims.len(), out.display());
        }
        Command::Classify {
            config,
            manifest,
            similarities,
            out,
        } => {
            let cfg = config.load()?;
            let (_, samples) = read_dataset(&manifest)?;
            let sims = read_similarities(&similarities, &samples)?;
            let auc = classify(&samples, &sims, &cfg, &out)?;
            println!("AUC {auc:.4}");
        }
        Command::Evaluate {
            config,
            manifest,
            similarities,
            out,
        } => {
            let cfg = config.load()?;
            let (m, samples) = read_dataset(&manifest)?;
            let sims = match similarities {
                Some(dir) => read_similarities(&dir, &samples)?,
                None => {
                    let train = training_samples(&samples)?;
                    let topology = fit_topology(&train, &cfg)?;
                    let adjacency = out.join("adjacency.csv");
                    write_adjacency(&topology, &adjacency)?;
                    report(&adjacency);
                    let trained = train_model(&train, &topology, &cfg, m.sampling_rate_hz)?;
                    let params = out.join("model.params");
                    write_parameters(&trained.params, &params)?;
                    report(&params);
                    let trace = out.join("loss_trace.json");
                    write_json(&trace, &trained.trace)?;
                    report(&trace);
                    let sims = infer_all(&samples, &topology, &trained.params)?;
                    let dir = out.join("similarities");
                    create_dir(&dir)?;
                    write_similarities(&dir, &samples, &sims)?;
                    sims
                }
            };
            let auc = classify(&samples, &sims, &cfg, &out)?;
            println!("AUC {auc:.4}");
        }
        Command::Benchmark { config, out } => {
            let cfg = config.load()?;
            let rows = benchmark(&cfg)?;
            for r in &rows {
                println!(
                    "N = {:3}  I = {:5}  {:10.1} us/sample",
                    r.n_nodes,
                    r.train_size,
                    r.seconds_per_sample * 1e6
                );
            }
            let path = out.join("benchmark.json");
            write_json(&path, &rows)?;
            report(&path);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e.kind() {
                ErrorKind::Usage => 1,
                ErrorKind::Data => 2,
                ErrorKind::Numerical => 3,
            })
        }
    }
}
