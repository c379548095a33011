//! Command-line front end: `train`, `grow`, `prune`, `eval`, `verify`, and
//! `bench`. Exit codes: 0 success, 2 usage, 3 data or shape problems,
//! 4 numerical degeneracy. Every mutating command re-checks its output
//! against the direct solver before writing it.

use std::ffi::OsString;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use crate::bench::{run_bench, BenchConfig};
use crate::csvio;
use crate::error::{Error, Result};
use crate::model::{mse, Activation, Dataset};
use crate::modelfile::ModelFile;
use crate::session::{Session, SessionConfig, Variant, VerifyReport};
use crate::solve::direct_weights;

/// Deviation a mutating command may leave between its state and the direct
/// solver before it refuses to write the model.
const VERIFY_BUDGET: f64 = 1e-8;

#[derive(Parser)]
#[command(
    name = "elm",
    version,
    about = "Train, grow, and prune regularized extreme-learning-machine models"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Fit a fresh model on a dataset
    Train(TrainArgs),
    /// Add hidden nodes to a saved model without retraining
    Grow(GrowArgs),
    /// Remove hidden nodes from a saved model without retraining
    Prune(PruneArgs),
    /// Predict with a saved model and optionally score it
    Eval(EvalArgs),
    /// Compare a saved model's state against the direct solver
    Verify(VerifyArgs),
    /// Time incremental updates against full retrains
    Bench(BenchArgs),
}

#[derive(Args)]
struct DataArgs {
    /// Input CSV, one sample per row
    #[arg(long)]
    x: PathBuf,
    /// Target CSV, one sample per row
    #[arg(long)]
    y: PathBuf,
    /// Skip one header line in the CSV files
    #[arg(long)]
    header: bool,
}

impl DataArgs {
    fn load(&self) -> Result<Dataset> {
        let x = csvio::load_columns(&self.x, self.header)?;
        let y = csvio::load_columns(&self.y, self.header)?;
        Dataset::new(x, y)
    }
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Number of hidden nodes to draw
    #[arg(long)]
    hidden: usize,
    /// Regularization factor added to the Gram diagonal
    #[arg(long, default_value_t = 1.0)]
    reg: f64,
    #[arg(long, default_value = "ldl", value_parser = parse_variant)]
    variant: Variant,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "sigmoid", value_parser = parse_activation)]
    activation: Activation,
    /// Where to write the model
    #[arg(long)]
    out: PathBuf,
    /// Save only parameters and weights (no incremental state)
    #[arg(long)]
    light: bool,
    /// Permit a zero regularization factor
    #[arg(long)]
    allow_zero_reg: bool,
    /// Append a JSON record per action to this file
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct GrowArgs {
    /// Model to extend
    #[arg(long)]
    model: PathBuf,
    /// How many nodes to add
    #[arg(long)]
    nodes: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    light: bool,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct PruneArgs {
    /// Model to shrink
    #[arg(long)]
    model: PathBuf,
    /// Comma-separated 0-based node indices to remove
    #[arg(long, value_parser = parse_index_list)]
    indices: std::vec::Vec<usize>,
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    light: bool,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    x: PathBuf,
    /// Optional targets; when given, the mean squared error is printed
    #[arg(long)]
    y: Option<PathBuf>,
    #[arg(long)]
    header: bool,
    /// Optional CSV to write predictions to (one sample per row)
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long)]
    model: PathBuf,
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// Hidden-layer sizes, comma separated (empty for none)
    #[arg(long, default_value = "256", value_parser = parse_count_list)]
    hidden: std::vec::Vec<usize>,
    /// Block sizes to insert, comma separated
    #[arg(long, default_value = "8", value_parser = parse_count_list)]
    nodes: std::vec::Vec<usize>,
    /// Sample counts, comma separated
    #[arg(long, default_value = "4096", value_parser = parse_count_list)]
    samples: std::vec::Vec<usize>,
    /// Variants to measure, comma separated
    #[arg(long, default_value = "q,ldl", value_parser = parse_variant_list)]
    variants: std::vec::Vec<Variant>,
    #[arg(long, default_value_t = 8)]
    inputs: usize,
    #[arg(long, default_value_t = 2)]
    outputs: usize,
    #[arg(long, default_value_t = 1.0)]
    reg: f64,
    /// Repetitions per cell; the median is reported
    #[arg(long, default_value_t = 5)]
    reps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    report: Option<PathBuf>,
}

fn parse_variant(s: &str) -> std::result::Result<Variant, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_activation(s: &str) -> std::result::Result<Activation, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_index_list(s: &str) -> std::result::Result<Vec<usize>, String> {
    if s.trim().is_empty() {
        return Err("index list must not be empty".into());
    }
    s.split(',')
        .map(|tok| {
            tok.trim()
                .parse::<usize>()
                .map_err(|_| format!("bad index '{}'", tok.trim()))
        })
        .collect()
}

fn parse_count_list(s: &str) -> std::result::Result<Vec<usize>, String> {
    if s.trim().is_empty() {
        return Ok(Vec::new());
    }
    s.split(',')
        .map(|tok| {
            tok.trim()
                .parse::<usize>()
                .map_err(|_| format!("bad count '{}'", tok.trim()))
        })
        .collect()
}

fn parse_variant_list(s: &str) -> std::result::Result<Vec<Variant>, String> {
    if s.trim().is_empty() {
        return Ok(Vec::new());
    }
    s.split(',').map(|tok| parse_variant(tok.trim())).collect()
}

/// Parses and executes one command, returning the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let result = match cli.command {
        Cmd::Train(args) => cmd_train(args),
        Cmd::Grow(args) => cmd_grow(args),
        Cmd::Prune(args) => cmd_prune(args),
        Cmd::Eval(args) => cmd_eval(args),
        Cmd::Verify(args) => cmd_verify(args),
        Cmd::Bench(args) => cmd_bench(args),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", e);
            exit_code(&e)
        }
    }
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Singular(_) | Error::Degenerate(_) => 4,
        _ => 3,
    }
}

fn enforce_budget(report: &VerifyReport) -> Result<()> {
    if report.weight_deviation > VERIFY_BUDGET || report.gram_deviation > VERIFY_BUDGET {
        return Err(Error::Degenerate(format!(
            "state drifted beyond the verification budget (weights {:.3e}, gram {:.3e} > {:.0e}); \
             the supplied data may not match the model",
            report.weight_deviation, report.gram_deviation, VERIFY_BUDGET
        )));
    }
    Ok(())
}

fn print_report(report: &VerifyReport) {
    println!(
        "variant: {}  nodes: {}  samples: {}",
        report.variant, report.node_count, report.sample_count
    );
    println!("mse: {:.6e}", report.mse);
    println!(
        "deviation vs direct solve: weights {:.3e}, gram inverse {:.3e}",
        report.weight_deviation, report.gram_deviation
    );
}

fn append_record(path: &Path, record: &serde_json::Value) -> Result<()> {
    let mut file = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)?;
    writeln!(file, "{}", record)?;
    Ok(())
}

fn report_value(command: &str, model_path: &Path, report: &VerifyReport) -> serde_json::Value {
    json!({
        "command": command,
        "model": model_path.display().to_string(),
        "variant": report.variant,
        "nodes": report.node_count,
        "samples": report.sample_count,
        "mse": report.mse,
        "weight_deviation": report.weight_deviation,
        "gram_deviation": report.gram_deviation,
    })
}

fn cmd_train(args: TrainArgs) -> Result<()> {
    let data = args.data.load()?;
    let session = Session::init(
        data,
        &SessionConfig {
            initial_nodes: args.hidden,
            ridge: args.reg,
            variant: args.variant,
            seed: args.seed,
            activation: args.activation,
            allow_zero_ridge: args.allow_zero_reg,
        },
    )?;
    let report = session.verify()?;
    enforce_budget(&report)?;
    ModelFile::from_session(&session, args.light).save(&args.out)?;
    print_report(&report);
    println!("model written to {}", args.out.display());
    if let Some(path) = &args.report {
        append_record(path, &report_value("train", &args.out, &report))?;
    }
    Ok(())
}

fn cmd_grow(args: GrowArgs) -> Result<()> {
    let file = ModelFile::load(&args.model)?;
    let stored = file.stored_state()?;
    let data = args.data.load()?;
    let session = Session::resume(file.to_model(), data, file.ridge, stored)?;
    let grown = session.add_nodes(args.nodes, args.seed)?;
    let report = grown.verify()?;
    enforce_budget(&report)?;
    ModelFile::from_session(&grown, args.light).save(&args.out)?;
    println!("added {} nodes", args.nodes);
    print_report(&report);
    println!("model written to {}", args.out.display());
    if let Some(path) = &args.report {
        append_record(path, &report_value("grow", &args.out, &report))?;
    }
    Ok(())
}

fn cmd_prune(args: PruneArgs) -> Result<()> {
    let file = ModelFile::load(&args.model)?;
    let stored = file.stored_state()?;
    let data = args.data.load()?;
    let session = Session::resume(file.to_model(), data, file.ridge, stored)?;
    let pruned = session.remove_nodes(&args.indices)?;
    let report = pruned.verify()?;
    enforce_budget(&report)?;
    ModelFile::from_session(&pruned, args.light).save(&args.out)?;
    println!("removed {} nodes", args.indices.len());
    print_report(&report);
    println!("model written to {}", args.out.display());
    if let Some(path) = &args.report {
        append_record(path, &report_value("prune", &args.out, &report))?;
    }
    Ok(())
}

fn cmd_eval(args: EvalArgs) -> Result<()> {
    let file = ModelFile::load(&args.model)?;
    let model = file.to_model();
    let x = csvio::load_columns(&args.x, args.header)?;
    let hidden = model.compute_hidden(&x)?;
    let predictions = model.predict(&hidden)?;
    println!(
        "evaluated {} samples with {} nodes",
        predictions.cols(),
        model.hidden_count()
    );
    let mut record = json!({
        "command": "eval",
        "model": args.model.display().to_string(),
        "nodes": model.hidden_count(),
        "samples": predictions.cols(),
    });
    if let Some(y_path) = &args.y {
        let y = csvio::load_columns(y_path, args.header)?;
        let e = mse(&y, &predictions)?;
        println!("mse: {:.6e}", e);
        record["mse"] = json!(e);
    }
    if let Some(out) = &args.out {
        csvio::save_columns(out, &predictions)?;
        println!("predictions written to {}", out.display());
        record["predictions"] = json!(out.display().to_string());
    }
    if let Some(path) = &args.report {
        append_record(path, &record)?;
    }
    Ok(())
}

fn cmd_verify(args: VerifyArgs) -> Result<()> {
    let file = ModelFile::load(&args.model)?;
    let data = args.data.load()?;
    if file.is_light() {
        // no incremental state on file: check the stored weights only
        let model = file.to_model();
        let hidden = model.compute_hidden(&data.x)?;
        let oracle = direct_weights(&hidden, &data.y, file.ridge)?;
        let weight_deviation = file.output_weights.relative_deviation(&oracle);
        let z = file.output_weights.matmul(&hidden)?;
        let e = mse(&data.y, &z)?;
        println!(
            "variant: {} (light)  nodes: {}  samples: {}",
            file.variant,
            file.hidden_count(),
            data.sample_count()
        );
        println!("mse: {:.6e}", e);
        println!("deviation vs direct solve: weights {:.3e}, gram inverse n/a", weight_deviation);
        if let Some(path) = &args.report {
            append_record(
                path,
                &json!({
                    "command": "verify",
                    "model": args.model.display().to_string(),
                    "variant": file.variant,
                    "light": true,
                    "nodes": file.hidden_count(),
                    "samples": data.sample_count(),
                    "mse": e,
                    "weight_deviation": weight_deviation,
                }),
            )?;
        }
        return Ok(());
    }
    let stored = file.stored_state()?;
    let session = Session::resume(file.to_model(), data, file.ridge, stored)?;
    let report = session.verify()?;
    print_report(&report);
    if let Some(path) = &args.report {
        append_record(path, &report_value("verify", &args.model, &report))?;
    }
    Ok(())
}

fn cmd_bench(args: BenchArgs) -> Result<()> {
    let config = BenchConfig {
        hidden_sizes: args.hidden,
        block_sizes: args.nodes,
        sample_counts: args.samples,
        variants: args.variants,
        inputs: args.inputs,
        outputs: args.outputs,
        ridge: args.reg,
        repetitions: args.reps,
        seed: args.seed,
    };
    let rows = run_bench(&config)?;
    if rows.is_empty() {
        println!("empty benchmark grid; nothing to measure");
        return Ok(());
    }
    println!(
        "{:>7} {:>6} {:>8} {:>8} {:>12} {:>12} {:>9} {:>12}",
        "hidden", "added", "samples", "variant", "update(s)", "retrain(s)", "speedup", "deviation"
    );
    for row in &rows {
        println!(
            "{:>7} {:>6} {:>8} {:>8} {:>12.6} {:>12.6} {:>9.2} {:>12.3e}",
            row.hidden,
            row.added,
            row.samples,
            row.variant.to_string(),
            row.update_seconds,
            row.retrain_seconds,
            row.speedup,
            row.weight_deviation
        );
        if row.speedup < 2.0 {
            println!(
                "warning: speedup {:.2} below 2.0 for hidden={} added={} samples={} variant={} (hardware-dependent)",
                row.speedup, row.hidden, row.added, row.samples, row.variant
            );
        }
        if let Some(path) = &args.report {
            append_record(path, &serde_json::to_value(row).expect("serializable row"))?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_list_parser() {
        assert_eq!(parse_index_list("3,5").unwrap(), vec![3, 5]);
        assert_eq!(parse_index_list(" 1 , 2 ").unwrap(), vec![1, 2]);
        assert!(parse_index_list("").is_err());
        assert!(parse_index_list("1,x").is_err());
    }

    #[test]
    fn count_list_parser_accepts_empty() {
        assert_eq!(parse_count_list("").unwrap(), Vec::<usize>::new());
        assert_eq!(parse_count_list("64,256").unwrap(), vec![64, 256]);
    }

    #[test]
    fn usage_errors_exit_with_two() {
        assert_eq!(run(["elm", "train"]), 2);
        assert_eq!(run(["elm", "nonsense"]), 2);
        assert_eq!(run(["elm", "train", "--variant", "bogus"]), 2);
    }

    #[test]
    fn help_exits_zero() {
        assert_eq!(run(["elm", "--help"]), 0);
    }

    #[test]
    fn missing_file_is_a_data_error() {
        assert_eq!(
            run([
                "elm", "train", "--x", "/nonexistent/x.csv", "--y", "/nonexistent/y.csv",
                "--hidden", "4", "--out", "/tmp/m.elm"
            ]),
            3
        );
    }
}
