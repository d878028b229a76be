//! `rejopt`: generate benchmark data, train reject-option models, and run
//! repeated-split Accuracy-Reject experiments, all reproducibly.
//!
//! Exit codes: 0 success; 1 for failures arising during training or
//! evaluation (divergence, degenerate splits, non-finite numerics); 2 for
//! usage, config, and input-file problems.

mod config;
mod manifest;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};

use rejopt_core::dataset::write_csv;
use rejopt_core::evaluation::{
    aggregate_csv, ar_curve, confusion_csv, results_csv, train_method, HyperPoint,
};
use rejopt_core::model::ExtendedClassifier;
use rejopt_core::serialize::write_model;
use rejopt_core::svm::induced_offsets;
use rejopt_core::synthetic::{
    generate_synthetic_i, generate_synthetic_ii, generate_synthetic_iii, generate_synthetic_iv,
};
use rejopt_core::{Error, KernelSpec, LabeledDataset, Method, Result, TrainedModel};

use manifest::Manifest;

#[derive(Parser)]
#[command(
    name = "rejopt",
    version,
    about = "Classification with reject option via data replication"
)]
struct Cli {
    /// Worker threads for repetition fan-out (0 = one per CPU core).
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a seeded synthetic benchmark dataset as CSV.
    Generate {
        /// One of: synthetic-i, synthetic-ii, synthetic-iii, synthetic-iv.
        name: String,
        /// Number of points (even for two-class sets, divisible by the
        /// class count otherwise).
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output CSV path [default: <name>.csv].
        #[arg(long)]
        out: Option<PathBuf>,
        /// Manifest path [default: <out>.manifest].
        #[arg(long)]
        manifest: Option<PathBuf>,
    },
    /// Train one model at a fixed rejection cost and save it.
    Train {
        /// One of: rejosvm, rejonn, single-threshold, independent-pair.
        #[arg(long)]
        method: String,
        /// Training dataset CSV (header x1..xp,y; labels 1..K).
        #[arg(long)]
        data: PathBuf,
        /// Rejection cost, 0 <= w_r < 0.5.
        #[arg(long)]
        w_r: f64,
        /// Extension constant of the replicated space.
        #[arg(long, default_value_t = 1.0)]
        h: f64,
        /// Kernel for SVM-backed methods: `linear` or `rbf:<gamma>`.
        #[arg(long, default_value = "linear")]
        kernel: String,
        /// SVM trade-off constant.
        #[arg(long, default_value_t = 1.0)]
        c: f64,
        /// Network hidden layers, comma-joined (`8,4`), or `none` for affine.
        #[arg(long, default_value = "8")]
        hidden: String,
        /// Network learning rate.
        #[arg(long, default_value_t = 0.1)]
        lr: f64,
        /// Network training epochs.
        #[arg(long, default_value_t = 200)]
        epochs: usize,
        /// Network mini-batch size.
        #[arg(long, default_value_t = 32)]
        batch_size: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output model path.
        #[arg(long)]
        out: PathBuf,
        /// Manifest path [default: <out>.manifest].
        #[arg(long)]
        manifest: Option<PathBuf>,
    },
    /// Run the repeated-split experiment described by a config file.
    ArCurve {
        /// Experiment config (`key = value` lines; see README).
        #[arg(long)]
        config: PathBuf,
        /// Directory for results.csv, aggregate.csv, confusion.csv and
        /// run.manifest.
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if cli.jobs > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.jobs).build_global() {
            eprintln!("error: cannot size worker pool: {e}");
            return ExitCode::from(2);
        }
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

/// Input and validation problems exit 2; failures during the numeric work
/// itself exit 1.
fn exit_code(e: &Error) -> u8 {
    match e {
        Error::SingleClass
        | Error::NonFinite(_)
        | Error::Divergence { .. }
        | Error::DegenerateSplit(_) => 1,
        _ => 2,
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Generate { name, n, seed, out, manifest } => {
            cmd_generate(&name, n, seed, out, manifest)
        }
        Command::Train {
            method,
            data,
            w_r,
            h,
            kernel,
            c,
            hidden,
            lr,
            epochs,
            batch_size,
            seed,
            out,
            manifest,
        } => {
            let flags = TrainFlags {
                method,
                data,
                w_r,
                h,
                kernel,
                c,
                hidden,
                lr,
                epochs,
                batch_size,
                seed,
                out,
                manifest,
            };
            cmd_train(flags)
        }
        Command::ArCurve { config, out_dir } => cmd_ar_curve(&config, &out_dir),
    }
}

fn read_data(path: &Path) -> Result<LabeledDataset> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::InvalidParam(format!("cannot read dataset {}: {e}", path.display())))?;
    rejopt_core::dataset::parse_csv(&text)
}

fn manifest_path(explicit: Option<PathBuf>, out: &Path) -> PathBuf {
    explicit.unwrap_or_else(|| {
        let mut os = out.as_os_str().to_owned();
        os.push(".manifest");
        PathBuf::from(os)
    })
}

fn cmd_generate(
    name: &str,
    n: usize,
    seed: u64,
    out: Option<PathBuf>,
    manifest: Option<PathBuf>,
) -> Result<()> {
    let started = Instant::now();
    let data = match name {
        "synthetic-i" => generate_synthetic_i(n, seed)?,
        "synthetic-ii" => generate_synthetic_ii(n, seed)?,
        "synthetic-iii" => generate_synthetic_iii(n, seed)?,
        "synthetic-iv" => generate_synthetic_iv(n, seed)?,
        other => {
            return Err(Error::InvalidParam(format!(
                "unknown dataset `{other}` (expected synthetic-i, -ii, -iii or -iv)"
            )))
        }
    };
    let out = out.unwrap_or_else(|| PathBuf::from(format!("{name}.csv")));
    write_csv(&data, &out)?;

    let mut echo = String::new();
    let _ = writeln!(echo, "command = generate");
    let _ = writeln!(echo, "name = {name}");
    let _ = writeln!(echo, "n = {n}");
    let _ = writeln!(echo, "seed = {seed}");
    let _ = writeln!(echo, "out = {}", out.display());
    let mut m = Manifest::new("generate", seed, echo);
    m.add_output(&out)?;
    m.set_elapsed(started.elapsed());
    m.write(&manifest_path(manifest, &out))?;
    println!("wrote {} ({} rows, {} classes)", out.display(), data.n_rows(), data.k());
    Ok(())
}

struct TrainFlags {
    method: String,
    data: PathBuf,
    w_r: f64,
    h: f64,
    kernel: String,
    c: f64,
    hidden: String,
    lr: f64,
    epochs: usize,
    batch_size: usize,
    seed: u64,
    out: PathBuf,
    manifest: Option<PathBuf>,
}

fn cmd_train(flags: TrainFlags) -> Result<()> {
    let started = Instant::now();
    let method = Method::parse(&flags.method)?;
    let data = read_data(&flags.data)?;
    let point = match method {
        Method::RejoNn => HyperPoint::Mlp {
            hidden: config::parse_hidden(&flags.hidden)?,
            lr: flags.lr,
            epochs: flags.epochs,
        },
        _ => HyperPoint::Svm { kernel: config::parse_kernel(&flags.kernel)?, c: flags.c },
    };
    let model = match (&point, method) {
        // the CLI exposes batch size, which the grid search keeps fixed
        (HyperPoint::Mlp { hidden, lr, epochs }, Method::RejoNn) => {
            let cfg = rejopt_core::mlp::MlpConfig {
                hidden: hidden.clone(),
                lr: *lr,
                epochs: *epochs,
                batch_size: flags.batch_size,
                seed: flags.seed,
            };
            TrainedModel::Rejo(rejopt_core::model::train_rejo_nn(
                &data, flags.h, flags.w_r, &cfg,
            )?)
        }
        _ => train_method(method, &data, &point, flags.w_r, flags.h, flags.seed)?,
    };
    write_model(&flags.out, &model)?;

    if let TrainedModel::Rejo(m) = &model {
        if let ExtendedClassifier::Svm(svm) = &m.classifier {
            if svm.kernel() == KernelSpec::Linear {
                let offsets = induced_offsets(svm, m.h, m.k)?;
                let rendered: Vec<String> = offsets.iter().map(f64::to_string).collect();
                println!("induced offsets: {}", rendered.join(" "));
            }
        }
    }

    let mut echo = String::new();
    let _ = writeln!(echo, "command = train");
    let _ = writeln!(echo, "method = {}", method.name());
    let _ = writeln!(echo, "data = {}", flags.data.display());
    let _ = writeln!(echo, "w_r = {}", flags.w_r);
    let _ = writeln!(echo, "h = {}", flags.h);
    match &point {
        HyperPoint::Svm { kernel, c } => {
            let k = match kernel {
                KernelSpec::Linear => "linear".to_string(),
                KernelSpec::Rbf { gamma } => format!("rbf:{gamma}"),
            };
            let _ = writeln!(echo, "kernel = {k}");
            let _ = writeln!(echo, "c = {c}");
        }
        HyperPoint::Mlp { hidden, lr, epochs } => {
            let arch: Vec<String> = hidden.iter().map(usize::to_string).collect();
            let _ = writeln!(
                echo,
                "hidden = {}",
                if arch.is_empty() { "none".to_string() } else { arch.join(",") }
            );
            let _ = writeln!(echo, "lr = {lr}");
            let _ = writeln!(echo, "epochs = {epochs}");
            let _ = writeln!(echo, "batch_size = {}", flags.batch_size);
        }
    }
    let _ = writeln!(echo, "seed = {}", flags.seed);
    let _ = writeln!(echo, "out = {}", flags.out.display());
    let mut m = Manifest::new("train", flags.seed, echo);
    m.add_output(&flags.out)?;
    m.set_elapsed(started.elapsed());
    m.write(&manifest_path(flags.manifest, &flags.out))?;
    println!("wrote {} ({})", flags.out.display(), model.kind());
    Ok(())
}

fn cmd_ar_curve(config_path: &Path, out_dir: &Path) -> Result<()> {
    let started = Instant::now();
    let text = std::fs::read_to_string(config_path).map_err(|e| {
        Error::InvalidParam(format!("cannot read config {}: {e}", config_path.display()))
    })?;
    let mut parsed = config::parse_config(&text)?;
    if let Ok(override_seed) = std::env::var("REJOPT_SEED") {
        let seed: u64 = override_seed.parse().map_err(|_| {
            Error::InvalidParam(format!("REJOPT_SEED must be an integer, got `{override_seed}`"))
        })?;
        parsed.experiment.base_seed = seed;
    }
    let data = read_data(&parsed.data)?;
    let result = ar_curve(&data, &parsed.experiment)?;

    std::fs::create_dir_all(out_dir)?;
    let outputs = [
        ("results.csv", results_csv(&parsed.experiment, &result)),
        ("aggregate.csv", aggregate_csv(&parsed.experiment, &result)),
        ("confusion.csv", confusion_csv(&parsed.experiment, &result)),
    ];
    let mut m = Manifest::new("ar-curve", parsed.experiment.base_seed, text);
    for (name, content) in &outputs {
        let path = out_dir.join(name);
        std::fs::write(&path, content)?;
        m.add_output(&path)?;
    }
    m.set_elapsed(started.elapsed());
    m.write(&out_dir.join("run.manifest"))?;
    println!(
        "wrote {} rows over {} cells to {}",
        result.rows.len(),
        result.aggregates.len(),
        out_dir.display()
    );
    Ok(())
}
