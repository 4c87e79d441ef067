use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use grbm_amp::data::load_signals;
use grbm_amp::experiment::records::aggregate_file;
use grbm_amp::experiment::sweep::{cell_instance, prepare, run_cell};
use grbm_amp::experiment::{run_phase_sweep, ExperimentSpec};
use grbm_amp::tap::{self, TapOptions};
use grbm_amp::training::{train, TrainConfig};
use grbm_amp::{model_io, Error, Prior};

const THREADS_VAR: &str = "GRBM_AMP_THREADS";

#[derive(Parser)]
#[command(name = "grbm-amp", version, about = "Compressed sensing with AMP and GRBM signal priors")]
struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a GRBM by contrastive divergence.
    Train(TrainArgs),
    /// Run a phase-diagram sweep and write records.csv and grid.csv.
    Sweep(SpecArgs),
    /// Reconstruct a single instance and print its metrics.
    Reconstruct(ReconstructArgs),
    /// Rebuild a grid CSV from a records CSV.
    Aggregate(AggregateArgs),
    /// Print a summary of a model file.
    InspectModel(InspectArgs),
}

#[derive(Args)]
struct TrainArgs {
    /// IDX file or signal cache with the training signals.
    #[arg(long)]
    data: PathBuf,
    /// Number of leading signals to train on.
    #[arg(long, default_value_t = 5000)]
    images: usize,
    /// Where to write the model; a `.txt` extension selects the text format.
    #[arg(long)]
    out: PathBuf,
    /// Per-epoch training log CSV.
    #[arg(long)]
    log: Option<PathBuf>,
    #[arg(long, default_value_t = 100)]
    hidden: usize,
    #[arg(long, default_value_t = 20)]
    epochs: usize,
    #[arg(long, default_value_t = 0.01)]
    learning_rate: f64,
    #[arg(long, default_value_t = 0.001)]
    weight_decay: f64,
    #[arg(long, default_value_t = 0.5)]
    momentum: f64,
    #[arg(long, default_value_t = 100)]
    batch_size: usize,
    #[arg(long, default_value_t = 1)]
    cd_steps: usize,
    /// Slab truncation `lo,hi`.
    #[arg(long, default_value = "0,1")]
    bounds: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Binarize the signals at this threshold before training.
    #[arg(long)]
    binarize: Option<f64>,
}

/// Every sweep setting as a flag. Unset flags leave the config file value
/// (or the default) in place.
#[derive(Args, Default)]
struct SpecArgs {
    /// `key = value` config file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    dataset: Option<String>,
    #[arg(long)]
    images: Option<String>,
    #[arg(long)]
    train_dataset: Option<String>,
    #[arg(long)]
    train_images: Option<String>,
    #[arg(long)]
    model: Option<String>,
    /// iid, noniid or grbm.
    #[arg(long)]
    mode: Option<String>,
    /// Comma-separated measurement rates.
    #[arg(long)]
    alphas: Option<String>,
    #[arg(long)]
    repetitions: Option<String>,
    #[arg(long)]
    delta: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    out_dir: Option<String>,
    #[arg(long)]
    rho_bin_width: Option<String>,
    #[arg(long)]
    damping: Option<String>,
    #[arg(long)]
    tol_out: Option<String>,
    #[arg(long)]
    max_outer: Option<String>,
    #[arg(long)]
    tol_in: Option<String>,
    #[arg(long)]
    max_inner: Option<String>,
    /// unit-column or sqrt-n.
    #[arg(long)]
    scaling: Option<String>,
    #[arg(long)]
    bounds: Option<String>,
    #[arg(long)]
    binarize: Option<String>,
    /// pearson or unnormalized.
    #[arg(long)]
    correlation: Option<String>,
}

impl SpecArgs {
    fn overrides(&self) -> [(&'static str, &Option<String>); 21] {
        [
            ("dataset", &self.dataset),
            ("images", &self.images),
            ("train_dataset", &self.train_dataset),
            ("train_images", &self.train_images),
            ("model", &self.model),
            ("mode", &self.mode),
            ("alphas", &self.alphas),
            ("repetitions", &self.repetitions),
            ("delta", &self.delta),
            ("seed", &self.seed),
            ("out_dir", &self.out_dir),
            ("rho_bin_width", &self.rho_bin_width),
            ("damping", &self.damping),
            ("tol_out", &self.tol_out),
            ("max_outer", &self.max_outer),
            ("tol_in", &self.tol_in),
            ("max_inner", &self.max_inner),
            ("scaling", &self.scaling),
            ("bounds", &self.bounds),
            ("binarize", &self.binarize),
            ("correlation", &self.correlation),
        ]
    }

    fn spec(&self) -> grbm_amp::Result<ExperimentSpec> {
        let mut spec = match &self.config {
            Some(p) => ExperimentSpec::from_file(p).map_err(|e| match e {
                Error::Io { .. } => Error::Config(e.to_string()),
                e => e,
            })?,
            None => ExperimentSpec::default(),
        };
        for (key, value) in self.overrides() {
            if let Some(v) = value {
                spec.set(key, v)?;
            }
        }
        Ok(spec)
    }
}

#[derive(Args)]
struct ReconstructArgs {
    #[command(flatten)]
    spec: SpecArgs,
    /// Index of the test signal.
    #[arg(long, default_value_t = 0)]
    image: usize,
    /// Measurement rate; defaults to the first of `alphas`.
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long, default_value_t = 0)]
    rep: usize,
    /// Write the reconstructed signal here, one value per line.
    #[arg(long)]
    estimate: Option<PathBuf>,
}

#[derive(Args)]
struct AggregateArgs {
    #[arg(long)]
    records: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0.025)]
    rho_bin_width: f64,
}

#[derive(Args)]
struct InspectArgs {
    model: PathBuf,
    /// Also run TAP at zero external field and summarize the marginals.
    #[arg(long)]
    marginals: bool,
    /// Re-save the model here (format from the extension).
    #[arg(long)]
    convert: Option<PathBuf>,
}

enum Failure {
    /// Bad settings, missing files, unreadable inputs.
    Config(String),
    /// Some reconstructions failed; the outputs are complete otherwise.
    Partial(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Config(e.to_string())
    }
}

fn parse_bounds(s: &str) -> Result<(f64, f64), Failure> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| Failure::Config(format!("bounds `{s}`: {e}")))?;
    match parts[..] {
        [lo, hi] => Ok((lo, hi)),
        _ => Err(Failure::Config(format!("bounds `{s}`: expected lo,hi"))),
    }
}

fn cmd_train(a: &TrainArgs) -> Result<(), Failure> {
    let mut data = load_signals(&a.data)?.head(a.images);
    if let Some(t) = a.binarize {
        data = data.binarized(t);
    }
    let cfg = TrainConfig {
        hidden: a.hidden,
        epochs: a.epochs,
        learning_rate: a.learning_rate,
        weight_decay: a.weight_decay,
        momentum: a.momentum,
        batch_size: a.batch_size,
        cd_steps: a.cd_steps,
        bounds: parse_bounds(&a.bounds)?,
        seed: a.seed,
        ..TrainConfig::default()
    };
    let (model, log) = train(&data, &cfg)?;
    model_io::save(&model, &a.out)?;
    if let Some(p) = &a.log {
        log.write_csv(p)?;
    }
    if let Some(last) = log.epochs.last() {
        println!(
            "trained {}x{} on {} signals: reconstruction error {:.6}, |W| {:.4}, {:.1}s",
            model.n_visible(),
            model.n_hidden(),
            data.len(),
            last.reconstruction_error,
            last.weight_norm,
            last.elapsed_secs
        );
    }
    Ok(())
}

fn cmd_sweep(a: &SpecArgs) -> Result<(), Failure> {
    let spec = a.spec()?;
    let s = run_phase_sweep(&spec)?;
    println!(
        "{} cells: {} computed, {} reused, {} failed; results in {}",
        s.total,
        s.computed,
        s.skipped,
        s.failed,
        spec.out_dir.display()
    );
    if s.failed > 0 {
        return Err(Failure::Partial(format!("{} reconstructions failed", s.failed)));
    }
    Ok(())
}

fn cmd_reconstruct(a: &ReconstructArgs) -> Result<(), Failure> {
    let mut spec = a.spec.spec()?;
    if let Some(alpha) = a.alpha {
        spec.alphas = vec![alpha];
    }
    spec.images = spec.images.max(a.image + 1);
    let (signals, options) = prepare(&spec)?;
    if a.image >= signals.len() {
        return Err(Failure::Config(format!(
            "image {} out of range, dataset has {}",
            a.image,
            signals.len()
        )));
    }
    let (r, t) = run_cell(&spec, &signals, &options, a.image, 0, a.rep);
    println!("image {}  k {}  rho {:.4}", r.image, r.k, r.rho);
    println!("alpha {}  m {}  mode {}", r.alpha, r.m, r.mode);
    println!("mse_db {:.3}", r.mse_db);
    println!("correlation {:.6}", r.correlation);
    println!(
        "outer {}  inner {}  converged {}  {:.2}s",
        r.outer_iterations, r.inner_iterations, r.converged, t.wall_secs
    );
    println!("status {}", r.status);
    if let Some(path) = &a.estimate {
        let inst = cell_instance(&spec, &signals, a.image, 0, a.rep)?;
        if let Ok(rec) = grbm_amp::reconstruct(&inst, &options) {
            let text: String = rec.mean().iter().map(|v| format!("{v}\n")).collect();
            std::fs::write(path, text).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
        }
    }
    if r.failed() {
        return Err(Failure::Partial(r.status));
    }
    Ok(())
}

fn cmd_aggregate(a: &AggregateArgs) -> Result<(), Failure> {
    let rows = aggregate_file(&a.records, &a.out, a.rho_bin_width)?;
    println!("{} grid rows written to {}", rows.len(), a.out.display());
    Ok(())
}

fn describe(layer: &[Prior]) -> String {
    let mut kinds = [0usize; 3];
    let mut rho = Vec::new();
    for p in layer {
        match p {
            Prior::Bernoulli { .. } => kinds[0] += 1,
            Prior::GaussBernoulli { rho: r, .. } => {
                kinds[1] += 1;
                rho.push(*r)
            }
            Prior::TruncGaussBernoulli(t) => {
                kinds[2] += 1;
                rho.push(t.rho())
            }
        }
    }
    let mut s = format!(
        "{} bernoulli, {} gauss-bernoulli, {} truncated",
        kinds[0], kinds[1], kinds[2]
    );
    if !rho.is_empty() {
        s += &format!(", mean rho {:.4}", rho.iter().sum::<f64>() / rho.len() as f64);
    }
    s
}

fn cmd_inspect(a: &InspectArgs) -> Result<(), Failure> {
    let model = model_io::load(&a.model)?;
    let w = model.weights();
    let norm = w.iter().map(|v| v * v).sum::<f64>().sqrt();
    let max = w.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    println!("{}", a.model.display());
    println!("visible {}: {}", model.n_visible(), describe(model.visible_priors()));
    println!("hidden {}: {}", model.n_hidden(), describe(model.hidden_priors()));
    println!("couplings: |W| {norm:.6}, max |w| {max:.6}");
    if a.marginals {
        let out = tap::marginals(&model, &TapOptions::default())?;
        println!(
            "tap: converged {} in {} sweeps, mean visible {:.6}, mean hidden {:.6}",
            out.converged,
            out.sweeps,
            out.state.visible_mean.mean().unwrap_or(f64::NAN),
            out.state.hidden_mean.mean().unwrap_or(f64::NAN)
        );
    }
    if let Some(p) = &a.convert {
        model_io::save(&model, p)?;
        println!("saved {}", p.display());
    }
    Ok(())
}

fn configure_threads() -> Result<(), Failure> {
    let Ok(v) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Failure::Config(format!("{THREADS_VAR}=`{v}` is not a positive integer")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure::Config(e.to_string()))
}

fn run(cli: &Cli) -> Result<(), Failure> {
    configure_threads()?;
    match &cli.command {
        Command::Train(a) => cmd_train(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Reconstruct(a) => cmd_reconstruct(a),
        Command::Aggregate(a) => cmd_aggregate(a),
        Command::InspectModel(a) => cmd_inspect(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = ["warn", "info", "debug"][cli.verbose.min(2) as usize];
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Partial(m)) => {
            eprintln!("warning: {m}");
            ExitCode::from(2)
        }
    }
}
