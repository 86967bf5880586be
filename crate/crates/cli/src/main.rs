use std::fs;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use wcm_core::block_model::{equivalent_dictionary, Dict};
use wcm_core::bomp::{bomp_decode_columns, BompConfig};
use wcm_core::experiment::{
    gen_dictionary, run_histogram, run_sweep, BlockSpec, DictFamily, ExperimentConfig,
};
use wcm_core::io::{
    format_g17, read_dict, read_equivalent, read_matrix_csv, write_dict, write_equivalent,
    write_matrix_csv,
};
use wcm_core::{design_ds, run_wcm, Alpha, CoherenceReport, Init, SensingMatrix, WcmConfig};

/// Sensing-matrix design by weighted coherence minimization.
#[derive(Parser)]
#[command(name = "wcm", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Design a sensing matrix for a dictionary.
    #[command(subcommand)]
    Design(Design),
    /// Recover block-sparse coefficients from measurements.
    #[command(subcommand)]
    Decode(Decode),
    /// Run the recovery/classification experiment over designers and α.
    Sweep(SweepArgs),
    /// Final objective values of WCM runs from random starts.
    Histogram(HistogramArgs),
    /// Write a random unit-column dictionary.
    GenDict(GenDictArgs),
    /// Coherence report of `E = A·D` as JSON.
    Report(ReportArgs),
}

#[derive(Subcommand)]
enum Design {
    /// Closed-form minimizer of ‖E'E − I‖².
    Ds(DsArgs),
    /// Weighted coherence minimization.
    Wcm(WcmArgs),
}

#[derive(Subcommand)]
enum Decode {
    /// Block orthogonal matching pursuit.
    Bomp(BompArgs),
}

#[derive(Args)]
struct DsArgs {
    /// Dictionary JSON.
    #[arg(long)]
    dict: PathBuf,
    #[arg(short = 'M')]
    m: usize,
    /// Sensing matrix CSV.
    #[arg(long)]
    out: PathBuf,
    /// Also write the equivalent dictionary `A·D` as JSON.
    #[arg(long)]
    equiv_out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum InitKind {
    Ds,
    Random,
}

#[derive(Args)]
struct WcmArgs {
    #[arg(long)]
    dict: PathBuf,
    #[arg(short = 'M')]
    m: usize,
    #[arg(long)]
    alpha: f64,
    #[arg(long, value_enum, default_value = "ds")]
    init: InitKind,
    /// Seed for `--init random`.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = WcmConfig::DEFAULT_MAX_ITERS)]
    max_iters: usize,
    #[arg(long, default_value_t = WcmConfig::DEFAULT_REL_TOL)]
    tol: f64,
    #[arg(long)]
    out: PathBuf,
    /// Per-iteration CSV: iter,f,total_inter,total_sub,norm_penalty.
    #[arg(long)]
    trace: Option<PathBuf>,
    #[arg(long)]
    equiv_out: Option<PathBuf>,
}

#[derive(Args)]
struct BompArgs {
    /// Equivalent dictionary JSON.
    #[arg(long)]
    equiv: PathBuf,
    /// M×L CSV, one measurement vector per column.
    #[arg(long)]
    measurements: PathBuf,
    /// Number of blocks to select.
    #[arg(short = 'k')]
    k: usize,
    /// K×L coefficient CSV.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    Desk,
}

#[derive(Args)]
struct SweepArgs {
    /// Experiment config JSON; defaults are used for missing keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Shrinks L and trials to 200 and 20.
    #[arg(long, value_enum)]
    preset: Option<Preset>,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct HistogramArgs {
    #[arg(long)]
    dict: PathBuf,
    #[arg(short = 'M')]
    m: usize,
    #[arg(long)]
    alpha: f64,
    #[arg(long, default_value_t = 100)]
    replicates: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = WcmConfig::DEFAULT_MAX_ITERS)]
    max_iters: usize,
    #[arg(long, default_value_t = WcmConfig::DEFAULT_REL_TOL)]
    tol: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Family {
    Gaussian,
    DctRows,
}

#[derive(Args)]
struct GenDictArgs {
    #[arg(short = 'N')]
    n: usize,
    #[arg(short = 'K')]
    k: usize,
    /// Uniform block size.
    #[arg(long, default_value_t = 3)]
    block_size: usize,
    #[arg(long, value_enum, default_value = "gaussian")]
    family: Family,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long)]
    dict: PathBuf,
    /// Sensing matrix CSV.
    #[arg(long)]
    sensing: PathBuf,
    /// Include the objective for this α.
    #[arg(long)]
    alpha: Option<f64>,
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Design(Design::Ds(args)) => design_ds_cmd(args),
        Command::Design(Design::Wcm(args)) => design_wcm_cmd(args),
        Command::Decode(Decode::Bomp(args)) => decode_cmd(args),
        Command::Sweep(args) => sweep_cmd(args),
        Command::Histogram(args) => histogram_cmd(args),
        Command::GenDict(args) => gen_dict_cmd(args),
        Command::Report(args) => report_cmd(args),
    }
}

fn load_dict(path: &PathBuf) -> Result<Dict> {
    read_dict(path).with_context(|| format!("reading dictionary {}", path.display()))
}

fn finish_design(
    a: &SensingMatrix,
    dict: &Dict,
    alpha: Option<Alpha>,
    out: &PathBuf,
    equiv_out: Option<&PathBuf>,
) -> Result<()> {
    write_matrix_csv(out, a.matrix())?;
    if let Some(path) = equiv_out {
        write_equivalent(path, &equivalent_dictionary(a.matrix(), dict)?)?;
    }
    let report = CoherenceReport::from_gram(&a.gram(dict)?, alpha)?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}

fn design_ds_cmd(args: DsArgs) -> Result<()> {
    let dict = load_dict(&args.dict)?;
    let a = design_ds(&dict, args.m)?;
    finish_design(&a, &dict, None, &args.out, args.equiv_out.as_ref())
}

fn design_wcm_cmd(args: WcmArgs) -> Result<()> {
    let dict = load_dict(&args.dict)?;
    let alpha = Alpha::new(args.alpha)?;
    let init = match args.init {
        InitKind::Ds => Init::Ds,
        InitKind::Random => Init::Random { seed: args.seed },
    };
    let cfg = WcmConfig::new(alpha)
        .with_init(init)
        .with_max_iters(args.max_iters)
        .with_rel_tol(args.tol);
    let rep = run_wcm(&dict, args.m, &cfg)?;
    if let Some(path) = &args.trace {
        fs::write(path, rep.trace_csv())?;
    }
    if !rep.converged {
        eprintln!(
            "warning: stopped after {} iterations without meeting the tolerance",
            rep.iterations
        );
    }
    finish_design(
        &rep.sensing,
        &dict,
        Some(alpha),
        &args.out,
        args.equiv_out.as_ref(),
    )
}

fn decode_cmd(args: BompArgs) -> Result<()> {
    let e = read_equivalent(&args.equiv)
        .with_context(|| format!("reading equivalent dictionary {}", args.equiv.display()))?;
    let y = read_matrix_csv(&args.measurements)
        .with_context(|| format!("reading measurements {}", args.measurements.display()))?;
    let theta = bomp_decode_columns(&e, &y, &BompConfig::new(args.k))?;
    write_matrix_csv(&args.out, &theta)?;
    Ok(())
}

fn sweep_cmd(args: SweepArgs) -> Result<()> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading config {}", path.display()))?;
            serde_json::from_str::<ExperimentConfig>(&text)
                .with_context(|| format!("parsing config {}", path.display()))?
        }
        None => ExperimentConfig::default(),
    };
    if let Some(Preset::Desk) = args.preset {
        cfg = cfg.desk();
    }
    let results = run_sweep(&cfg)?;
    results.write_dir(&args.out_dir, &cfg)?;
    for row in &results.summary {
        let alpha = row.alpha.map_or_else(|| "-".to_string(), |a| a.to_string());
        eprintln!(
            "{:<6} alpha={:<5} e={:.4} r={:.4}",
            row.designer.label(),
            alpha,
            row.e_mean,
            row.r_mean
        );
    }
    Ok(())
}

fn histogram_cmd(args: HistogramArgs) -> Result<()> {
    if args.replicates == 0 {
        bail!("--replicates must be positive");
    }
    let dict = load_dict(&args.dict)?;
    let cfg = WcmConfig::new(Alpha::new(args.alpha)?)
        .with_max_iters(args.max_iters)
        .with_rel_tol(args.tol);
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let values = run_histogram(&dict, args.m, &cfg, args.replicates, &mut rng)?;
    let mut out = String::from("replicate,objective\n");
    for (i, v) in values.iter().enumerate() {
        out.push_str(&format!("{i},{}\n", format_g17(*v)));
    }
    fs::write(&args.out, out)?;
    Ok(())
}

fn gen_dict_cmd(args: GenDictArgs) -> Result<()> {
    let family = match args.family {
        Family::Gaussian => DictFamily::Gaussian,
        Family::DctRows => DictFamily::DctRows,
    };
    let cfg = ExperimentConfig {
        dict_family: family,
        signal_dim: args.n,
        atoms: args.k,
        block_sizes: BlockSpec::Fixed(args.block_size),
        ..ExperimentConfig::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let dict = gen_dictionary(&cfg, &mut rng)?;
    write_dict(&args.out, &dict)?;
    Ok(())
}

fn report_cmd(args: ReportArgs) -> Result<()> {
    let dict = load_dict(&args.dict)?;
    let a = SensingMatrix::new(read_matrix_csv(&args.sensing)?)?;
    let alpha = args.alpha.map(Alpha::new).transpose()?;
    let report = CoherenceReport::from_gram(&a.gram(&dict)?, alpha)?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}
