//! Command-line driver: fit models on CSV data, run the built-in
//! experiments, and generate datasets.
//!
//! Exit codes: 0 on success, 2 for configuration or input errors, 3 for
//! numerical failures.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use maxmean::baselines::least_squares_fit;
use maxmean::data::{
    generate_example41, generate_synthetic_unbalanced, load_csv, CsvSchema, GroupedDataset,
    SyntheticConfig,
};
use maxmean::experiments::{run_example41, run_unbalanced_ml, MlExperimentConfig};
use maxmean::loss::average_loss;
use maxmean::model::Model;
use maxmean::report::{emit_report, ExperimentReport, ReportFormat};
use maxmean::solver::{solve, SolverConfig};
use maxmean::Error;

#[derive(Parser)]
#[command(
    name = "maxmean",
    about = "Fit regression models by minimizing the worst per-group mean squared loss",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a model by minimizing the worst-group loss on a CSV dataset.
    FitMinimax(FitArgs),
    /// Fit the least-squares baseline on a CSV dataset.
    FitLsq(LsqArgs),
    /// Run the 1517-sample linear benchmark experiment.
    Exp41(ExpArgs),
    /// Run the unbalanced synthetic classification experiment.
    ExpMl(ExpMlArgs),
    /// Generate a dataset CSV.
    GenData(GenDataArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelKind {
    Linear,
    Sigmoid,
}

#[derive(Args)]
struct SolverFlags {
    /// Termination accuracy on the direction norm.
    #[arg(long)]
    xi: Option<f64>,
    /// QP gap tolerance.
    #[arg(long)]
    delta: Option<f64>,
    /// Backtracking step factor in (0,1).
    #[arg(long)]
    sigma: Option<f64>,
    /// Iteration cap.
    #[arg(long = "max-iter")]
    max_iter: Option<usize>,
    /// JSON file with solver settings (same field names as the defaults).
    #[arg(long)]
    config: Option<PathBuf>,
}

impl SolverFlags {
    fn build(&self) -> Result<SolverConfig, Error> {
        let mut config = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)?;
                serde_json::from_str(&text)
                    .map_err(|e| Error::Config(format!("bad solver config: {e}")))?
            }
            None => SolverConfig::default(),
        };
        if let Some(xi) = self.xi {
            config.xi = xi;
        }
        if let Some(delta) = self.delta {
            config.delta = delta;
        }
        if let Some(sigma) = self.sigma {
            config.sigma = sigma;
        }
        if let Some(max_iter) = self.max_iter {
            config.max_iterations = max_iter;
        }
        config.validate()?;
        Ok(config)
    }
}

#[derive(Args)]
struct FitArgs {
    /// Input CSV with columns group,y,x1..xd.
    #[arg(long)]
    data: PathBuf,
    /// Model family to fit.
    #[arg(long, value_enum, default_value = "linear")]
    model: ModelKind,
    /// Directory for report files (omit to print to stdout only).
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    solver: SolverFlags,
}

#[derive(Args)]
struct LsqArgs {
    /// Input CSV with columns group,y,x1..xd.
    #[arg(long)]
    data: PathBuf,
    /// Directory for report files (omit to print to stdout only).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExpArgs {
    /// Output directory for report.json and curve CSVs.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[command(flatten)]
    solver: SolverFlags,
}

#[derive(Args)]
struct ExpMlArgs {
    /// Output directory for report.json and curve CSVs.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Generator seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Training iterations for both methods.
    #[arg(long, default_value_t = 100)]
    steps: usize,
    /// Input dimension of the synthetic clusters.
    #[arg(short = 'd', long, default_value_t = 5)]
    dim: usize,
    #[command(flatten)]
    solver: SolverFlags,
}

#[derive(Clone, Copy, ValueEnum)]
enum DatasetKind {
    Example41,
    Synthetic,
}

#[derive(Args)]
struct GenDataArgs {
    /// Which dataset to generate.
    #[arg(long, value_enum, default_value = "example41")]
    kind: DatasetKind,
    /// Output directory for dataset.csv.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Generator seed (synthetic only).
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Input dimension (synthetic only).
    #[arg(short = 'd', long, default_value_t = 5)]
    dim: usize,
    /// Number of groups (synthetic only).
    #[arg(long, default_value_t = 20)]
    groups: usize,
    /// Samples per group (synthetic only).
    #[arg(long, default_value_t = 1000)]
    group_size: usize,
    /// Fraction of positive samples (synthetic only).
    #[arg(long, default_value_t = 0.05)]
    positive_fraction: f64,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            if err.is_input_error() {
                ExitCode::from(2)
            } else {
                ExitCode::from(3)
            }
        }
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::FitMinimax(args) => fit_minimax(args),
        Command::FitLsq(args) => fit_lsq(args),
        Command::Exp41(args) => exp41(args),
        Command::ExpMl(args) => exp_ml(args),
        Command::GenData(args) => gen_data(args),
    }
}

fn load(path: &Path) -> Result<GroupedDataset, Error> {
    load_csv(path, &CsvSchema::default())
}

fn emit_all(report: &ExperimentReport, out: &Path) -> Result<(), Error> {
    let mut files = emit_report(report, ReportFormat::Json, out)?;
    files.extend(emit_report(report, ReportFormat::CsvCurves, out)?);
    for f in files {
        eprintln!("wrote {}", f.display());
    }
    Ok(())
}

fn fit_minimax(args: FitArgs) -> Result<(), Error> {
    let config = args.solver.build()?;
    let dataset = load(&args.data)?;
    let model = match args.model {
        ModelKind::Linear => Model::linear(dataset.dim()),
        ModelKind::Sigmoid => Model::sigmoid_unit(dataset.dim()),
    };
    let started = Instant::now();
    let report = solve(&model, &dataset, &config)?;
    let elapsed = started.elapsed();
    println!("params = {:?}", report.final_params.as_slice());
    println!("phi = {}", report.final_phi);
    println!(
        "status = {:?} after {} iterations",
        report.status,
        report.trajectory.len()
    );
    eprintln!("solve took {:.3} s", elapsed.as_secs_f64());
    if let Some(out) = args.out {
        std::fs::create_dir_all(&out)?;
        let path = out.join("solve.json");
        std::fs::write(&path, serde_json::to_string_pretty(&report).unwrap())?;
        eprintln!("wrote {}", path.display());
    }
    Ok(())
}

fn fit_lsq(args: LsqArgs) -> Result<(), Error> {
    let dataset = load(&args.data)?;
    let started = Instant::now();
    let params = least_squares_fit(&dataset)?;
    let elapsed = started.elapsed();
    let model = Model::linear(dataset.dim());
    let (loss, _) = average_loss(&model, &params, &dataset)?;
    println!("params = {:?}", params.as_slice());
    println!("average_loss = {loss}");
    eprintln!("fit took {:.3} s", elapsed.as_secs_f64());
    if let Some(out) = args.out {
        std::fs::create_dir_all(&out)?;
        let path = out.join("least_squares.json");
        let doc = serde_json::json!({"params": params, "average_loss": loss});
        std::fs::write(&path, serde_json::to_string_pretty(&doc).unwrap())?;
        eprintln!("wrote {}", path.display());
    }
    Ok(())
}

fn exp41(args: ExpArgs) -> Result<(), Error> {
    let config = args.solver.build()?;
    let started = Instant::now();
    let report = run_example41(&config)?;
    eprintln!("experiment took {:.3} s", started.elapsed().as_secs_f64());
    for (name, fit) in &report.fits {
        println!(
            "{name}: params = {:?}, objective = {}",
            fit.params.as_slice(),
            fit.objective
        );
    }
    for (name, value) in &report.metrics {
        println!("{name} = {value}");
    }
    emit_all(&report, &args.out)
}

fn exp_ml(args: ExpMlArgs) -> Result<(), Error> {
    let mut config = MlExperimentConfig {
        steps: args.steps,
        ..MlExperimentConfig::default()
    };
    config.generator.dim = args.dim;
    config.solver = args.solver.build()?;
    let started = Instant::now();
    let report = run_unbalanced_ml(args.seed, &config)?;
    eprintln!("experiment took {:.3} s", started.elapsed().as_secs_f64());
    for (name, value) in &report.metrics {
        println!("{name} = {value}");
    }
    emit_all(&report, &args.out)
}

fn gen_data(args: GenDataArgs) -> Result<(), Error> {
    let dataset = match args.kind {
        DatasetKind::Example41 => generate_example41(),
        DatasetKind::Synthetic => {
            let cfg = SyntheticConfig {
                dim: args.dim,
                groups: args.groups,
                group_size: args.group_size,
                positive_fraction: args.positive_fraction,
            };
            generate_synthetic_unbalanced(args.seed, &cfg)?
        }
    };
    std::fs::create_dir_all(&args.out)?;
    let path = args.out.join("dataset.csv");
    dataset.save_csv(&path)?;
    println!(
        "wrote {} ({} samples in {} groups)",
        path.display(),
        dataset.total_samples(),
        dataset.n_groups()
    );
    Ok(())
}
