use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use sha2::{Digest, Sha256};

use predvar::benchmark::{run_benchmark, BenchmarkConfig, Quantiles};
use predvar::datagen::{lorenz_series, mix_observations, rrvar_series, LorenzConfig, MixingConfig, RrvarConfig};
use predvar::estimation::check_optimality;
use predvar::io::{default_header, read_csv, write_csv, ModelFile, Provenance};
use predvar::selection::select;
use predvar::{fit, Error, FitOptions, Matrix, TimeSeries, Variant};

#[derive(Parser)]
#[command(name = "predvar", version, about = "Latent VAR extraction for multivariate time series")]
struct Cli {
    /// Diagnostic verbosity on stderr.
    #[arg(long, global = true, default_value = "warn")]
    log: LogLevel,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum LogLevel {
    Error,
    Warn,
    Info,
    Debug,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic series.
    Simulate(SimulateArgs),
    /// Fit a model and write it as JSON.
    Fit(FitArgs),
    /// One-step predictions or decompositions from a saved model.
    Predict(PredictArgs),
    /// Choose (ell, s) by log-RRMFPE over a grid.
    Select(SelectArgs),
    /// Monte-Carlo comparison on Lorenz-driven data.
    Benchmark(BenchmarkArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Lorenz,
    Rrvar,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, value_enum)]
    kind: Kind,
    #[arg(long, default_value_t = 10_000)]
    n: usize,
    #[arg(long, default_value_t = 6)]
    p: usize,
    #[arg(long, default_value_t = 3)]
    ell: usize,
    #[arg(long, default_value_t = 2)]
    s: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Static-noise variance relative to the latent variance (lorenz) or
    /// static-noise variance itself (rrvar).
    #[arg(long, default_value_t = 1.0)]
    noise_scale: f64,
    /// Latent companion spectral radius (rrvar only).
    #[arg(long, default_value_t = 0.8)]
    spectral_radius: f64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    truth_out: Option<PathBuf>,
}

#[derive(Args)]
struct FitArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    ell: usize,
    #[arg(long)]
    s: usize,
    #[arg(long, default_value = "predvar", value_parser = parse_variant)]
    variant: Variant,
    #[arg(long, default_value_t = 500)]
    max_iter: usize,
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    #[arg(long)]
    model_out: PathBuf,
    /// Record the wall-clock time in the model provenance.
    #[arg(long)]
    timestamp: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Emit {
    Yhat,
    Vhat,
    Scores,
    Static,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "yhat")]
    emit: Emit,
}

#[derive(Args)]
struct SelectArgs {
    #[arg(long)]
    data: PathBuf,
    /// Inclusive range `a:b`.
    #[arg(long, value_parser = parse_range)]
    ell_range: (usize, usize),
    #[arg(long, value_parser = parse_range)]
    s_range: (usize, usize),
    /// Worker threads; 0 uses all cores.
    #[arg(long, default_value_t = 1)]
    parallel: usize,
    #[arg(long, default_value = "predvar", value_parser = parse_variant)]
    variant: Variant,
    /// Grid CSV destination; printed to stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchmarkArgs {
    #[arg(long, default_value_t = 200)]
    trials: usize,
    /// Comma-separated list of predvar, lavar, oneshot.
    #[arg(long, default_value = "predvar,oneshot", value_delimiter = ',', value_parser = parse_variant)]
    variants: Vec<Variant>,
    #[arg(long, default_value_t = 10_000)]
    n: usize,
    #[arg(long, default_value_t = 7000)]
    train: usize,
    #[arg(long, default_value_t = 6)]
    p: usize,
    #[arg(long, default_value_t = 3)]
    ell: usize,
    #[arg(long, default_value_t = 2)]
    s: usize,
    #[arg(long, default_value_t = 1.0)]
    noise_scale: f64,
    #[arg(long, default_value_t = 0)]
    seed_base: u64,
    #[arg(long, default_value_t = 1)]
    parallel: usize,
    /// Add a train_time column (output then differs between runs).
    #[arg(long)]
    timing: bool,
    #[arg(long)]
    out: PathBuf,
}

fn parse_variant(s: &str) -> Result<Variant, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_range(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s.split_once(':').ok_or("expected a:b")?;
    let a: usize = a.trim().parse().map_err(|_| format!("bad range start {a:?}"))?;
    let b: usize = b.trim().parse().map_err(|_| format!("bad range end {b:?}"))?;
    if a == 0 || a > b {
        return Err(format!("need 1 <= a <= b, got {a}:{b}"));
    }
    Ok((a, b))
}

/// Usage problems detected after argument parsing.
struct UsageError(String);

enum Failure {
    Usage(String),
    Run(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Run(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Run(Error::Io(e))
    }
}

impl From<UsageError> for Failure {
    fn from(e: UsageError) -> Self {
        Failure::Usage(e.0)
    }
}

type CmdResult = Result<(), Failure>;

fn command_line() -> String {
    std::env::args().collect::<Vec<_>>().join(" ")
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    let f = File::create(path).map_err(|e| {
        Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
    })?;
    Ok(BufWriter::new(f))
}

fn read_bytes(path: &Path) -> Result<Vec<u8>, Failure> {
    fs::read(path)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))).into())
}

fn load_series(path: &Path) -> Result<(TimeSeries, String), Failure> {
    let bytes = read_bytes(path)?;
    let digest = hex::encode(Sha256::digest(&bytes));
    let (_, y) = read_csv(BufReader::new(bytes.as_slice()))?;
    Ok((y, digest))
}

fn write_text(path: &Path, text: &str) -> CmdResult {
    let mut w = create(path)?;
    w.write_all(text.as_bytes())?;
    w.flush()?;
    Ok(())
}

fn simulate(a: &SimulateArgs) -> CmdResult {
    let provenance = Provenance {
        command_line: command_line(),
        data_digest: None,
        timestamp: None,
    };
    let (y, truth) = match a.kind {
        Kind::Lorenz => {
            if a.ell != 3 {
                return Err(UsageError(format!("the Lorenz system has 3 latent variables, got --ell {}", a.ell)).into());
            }
            let latent = lorenz_series(&LorenzConfig {
                n_samples: a.n,
                seed: a.seed,
                ..LorenzConfig::default()
            })?;
            let mixed = mix_observations(
                &latent,
                &MixingConfig {
                    noise_scale: a.noise_scale,
                    ..MixingConfig::new(a.p, a.ell, a.seed)
                },
            )?;
            let (r, rbar) = mixed.loadings.weights()?;
            let mut truth = ModelFile::loadings_only(&mixed.loadings.p, &mixed.loadings.pbar, &r, &rbar);
            truth.provenance = provenance;
            (mixed.y, truth)
        }
        Kind::Rrvar => {
            let cfg = RrvarConfig {
                static_variance: a.noise_scale,
                ..RrvarConfig::new(a.p, a.ell, a.s, a.n, a.seed, a.spectral_radius)
            };
            let (y, model) = rrvar_series(&cfg)?;
            (y, ModelFile::from_model(&model, None, provenance))
        }
    };
    let mut w = create(&a.out)?;
    write_csv(&mut w, &default_header(y.ncols()), y.as_matrix())?;
    w.flush()?;
    if let Some(path) = &a.truth_out {
        write_text(path, &truth.to_json()?)?;
    }
    Ok(())
}

fn fmt_list(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.6}")).collect::<Vec<_>>().join(" ")
}

fn fit_cmd(a: &FitArgs) -> CmdResult {
    let (y, digest) = load_series(&a.data)?;
    let opts = FitOptions {
        max_iter: a.max_iter,
        tol: a.tol,
        variant: a.variant,
        ..FitOptions::new(a.ell, a.s)
    };
    let (model, report) = fit(&y, &opts)?;
    let timestamp = a.timestamp.then(|| {
        let secs = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
        format!("unix:{secs}")
    });
    let provenance = Provenance {
        command_line: command_line(),
        data_digest: Some(digest),
        timestamp,
    };
    let file = ModelFile::from_model(&model, Some(&report), provenance);
    write_text(&a.model_out, &file.to_json()?)?;

    let opt = check_optimality(&model, &y)?;
    println!("variant: {}", report.variant);
    println!("rank: {}", model.r);
    println!("iterations: {}", report.iterations);
    println!("converged: {}", report.converged);
    println!("spectrum: {}", fmt_list(&report.final_spectrum[..a.ell]));
    println!("optimality.innovation_projection: {:.3e}", opt.innovation_projection);
    println!("optimality.innovation_cross: {:.3e}", opt.innovation_cross);
    println!("optimality.latent_static_cross: {:.3e}", opt.latent_static_cross);
    println!("optimality.innovation_static_correlation: {:.3e}", opt.innovation_static_correlation);
    Ok(())
}

fn predict(a: &PredictArgs) -> CmdResult {
    let text = fs::read_to_string(&a.model)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", a.model.display()))))?;
    let model = ModelFile::from_json(&text)?.to_model()?;
    let (y, _) = load_series(&a.data)?;
    let pred = model.predict_one_step(&y)?;
    let (s, rows) = (model.s, pred.vhat.nrows());
    let (values, prefix): (Matrix, &str) = match a.emit {
        Emit::Yhat => (pred.yhat, "y"),
        Emit::Vhat => (pred.vhat, "v"),
        Emit::Scores => (model.latent_scores(&y)?.rows(s, rows).into_owned(), "v"),
        Emit::Static => (model.static_noise(&y)?.rows(s, rows).into_owned(), "e"),
    };
    let k = values.ncols();
    let mut out = Matrix::zeros(rows, k + 1);
    for i in 0..rows {
        out[(i, 0)] = (s + i + 1) as f64;
    }
    out.columns_mut(1, k).copy_from(&values);
    let mut header = vec!["t".to_string()];
    header.extend((1..=k).map(|j| format!("{prefix}{j}")));
    let mut w = create(&a.out)?;
    write_csv(&mut w, &header, &out)?;
    w.flush()?;
    Ok(())
}

fn select_cmd(a: &SelectArgs) -> CmdResult {
    let (y, _) = load_series(&a.data)?;
    let ells: Vec<usize> = (a.ell_range.0..=a.ell_range.1).collect();
    let orders: Vec<usize> = (a.s_range.0..=a.s_range.1).collect();
    let base = FitOptions::new(1, 1).with_variant(a.variant);
    let grid = select(&y, &ells, &orders, &base, a.parallel)?;

    let mut buf = Vec::new();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        w.write_record(["ell", "s", "rrmfpe", "log_rrmfpe", "converged"]).map_err(csv_err)?;
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for e in &grid.entries {
            w.write_record([
                e.ell.to_string(),
                e.s.to_string(),
                opt(e.rrmfpe),
                opt(e.log_rrmfpe),
                e.converged.to_string(),
            ])
            .map_err(csv_err)?;
        }
        w.flush()?;
    }
    match &a.out {
        Some(path) => write_text(path, std::str::from_utf8(&buf).expect("csv is utf-8"))?,
        None => std::io::stdout().write_all(&buf)?,
    }
    let best = grid.best_entry();
    println!(
        "selected: ell={} s={} log_rrmfpe={}",
        best.ell,
        best.s,
        best.log_rrmfpe.map(|v| format!("{v:.6}")).unwrap_or_default()
    );
    Ok(())
}

fn csv_err(e: csv::Error) -> Failure {
    Failure::Run(Error::Io(std::io::Error::other(e)))
}

fn fmt_quantiles(q: &Option<Quantiles>) -> String {
    match q {
        Some(q) => format!(
            "min {:.4}  q25 {:.4}  median {:.4}  q75 {:.4}  max {:.4}",
            q.min, q.q25, q.median, q.q75, q.max
        ),
        None => "no successful trials".into(),
    }
}

fn benchmark(a: &BenchmarkArgs) -> CmdResult {
    let cfg = BenchmarkConfig {
        n: a.n,
        train: a.train,
        p: a.p,
        ell: a.ell,
        s: a.s,
        noise_scale: a.noise_scale,
        seed_base: a.seed_base,
        threads: a.parallel,
        timing: a.timing,
        ..BenchmarkConfig::new(a.trials, a.variants.clone())
    };
    let report = run_benchmark(&cfg)?;
    let mut w = create(&a.out)?;
    report.write_csv(&mut w)?;
    w.flush()?;
    for s in report.summary() {
        println!("{} ({} failed)", s.variant, s.failures);
        println!("  d_distance               {}", fmt_quantiles(&s.d_distance));
        println!("  avg_corr_reconstruction  {}", fmt_quantiles(&s.avg_corr_reconstruction));
        println!("  avg_corr_prediction      {}", fmt_quantiles(&s.avg_corr_prediction));
        println!("  avg_corr_recon_vs_pred   {}", fmt_quantiles(&s.avg_corr_recon_vs_pred));
    }
    Ok(())
}

fn exit_code(e: &Error) -> u8 {
    if e.is_numerical() {
        4
    } else {
        3
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.log {
        LogLevel::Error => log::LevelFilter::Error,
        LogLevel::Warn => log::LevelFilter::Warn,
        LogLevel::Info => log::LevelFilter::Info,
        LogLevel::Debug => log::LevelFilter::Debug,
    };
    env_logger::Builder::new()
        .filter_level(level)
        .format_timestamp(None)
        .init();

    let outcome = match &cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Fit(a) => fit_cmd(a),
        Command::Predict(a) => predict(a),
        Command::Select(a) => select_cmd(a),
        Command::Benchmark(a) => benchmark(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Run(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
