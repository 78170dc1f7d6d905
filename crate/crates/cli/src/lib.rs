//! `bsrbench`: benchmark grid, single-shape tuning, matrix generation and
//! schedule verification.
//!
//! Exit codes: 0 success, 1 verification failure, 2 usage or input error.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::PathBuf;

use blocksparse::autotune::{
    candidate_lanes, save_records, tune, RecordMeta, SearchSpace, TuneOptions, TuneResult, DEFAULT_BUDGET,
    DEFAULT_LANE_CAP,
};
use blocksparse::bench::{emit_table, parse_shape, run_suite_with, BenchConfig, Outcome, ReferenceColumns};
use blocksparse::io::{load_bsr, load_dense, AnyBsr, AnyDense};
use blocksparse::kernels::{run_schedule_on, Exec, Schedule};
use blocksparse::oracle::{tolerance, Reference};
use blocksparse::{generate_bsr, generate_dense, BsrMatrix, DenseMatrix, Error, GenSpec, Scalar, ScalarKind, ValueMode};
use clap::{Args, Parser, Subcommand};

pub const EXIT_OK: u8 = 0;
pub const EXIT_VERIFY: u8 = 1;
pub const EXIT_USAGE: u8 = 2;

#[derive(Debug, Parser)]
#[command(name = "bsrbench", version, about = "Block-sparse SpMM schedules: benchmark, tune, generate, verify")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the benchmark grid and print a timing table.
    Bench(Box<BenchArgs>),
    /// Auto-tune the PRWB lane count for one problem.
    Tune(TuneArgs),
    /// Write a generated BSR weight (or dense operand) file.
    Gen(GenArgs),
    /// Compare every schedule against the dense reference on stored matrices.
    Verify(VerifyArgs),
}

#[derive(Debug, Args)]
struct BenchArgs {
    /// Config file: flat JSON object keyed by flag names.
    #[arg(long)]
    config: Option<PathBuf>,
    /// MxKxN[,..]
    #[arg(long)]
    shapes: Option<String>,
    /// B[,..] (square blocks)
    #[arg(long)]
    blocks: Option<String>,
    /// F[,..]
    #[arg(long)]
    sparsities: Option<String>,
    /// pep,ptp,prob,prwb,prwb+at
    #[arg(long)]
    schedules: Option<String>,
    /// PTP tile RxC
    #[arg(long)]
    tile: Option<String>,
    /// PRWB lane count (default: block size)
    #[arg(long)]
    lanes: Option<String>,
    #[arg(long)]
    repeats: Option<String>,
    #[arg(long)]
    warmup: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    /// f32|f64
    #[arg(long)]
    kind: Option<String>,
    /// md|csv
    #[arg(long)]
    format: Option<String>,
    /// Trial budget for prwb+at
    #[arg(long)]
    budget: Option<String>,
    /// Largest lane count considered by prwb+at
    #[arg(long)]
    cap: Option<String>,
    /// Write the table here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Append prwb+at tuning trials to this record file.
    #[arg(long)]
    records: Option<PathBuf>,
    /// CSV of static reference columns (m,k,n,block,sparsity,<name>..).
    #[arg(long)]
    reference: Option<PathBuf>,
    /// Suppress per-cell progress on stderr.
    #[arg(long)]
    quiet: bool,
}

#[derive(Debug, Args)]
struct TuneArgs {
    /// MxKxN of a generated problem.
    #[arg(long, default_value = "1x128x768")]
    shapes: String,
    #[arg(long, default_value_t = 8)]
    blocks: usize,
    #[arg(long, default_value_t = 0.8)]
    sparsities: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "f32")]
    kind: ScalarKind,
    #[arg(long, default_value_t = 11)]
    repeats: usize,
    #[arg(long, default_value_t = DEFAULT_BUDGET)]
    budget: usize,
    #[arg(long, default_value_t = DEFAULT_LANE_CAP)]
    cap: usize,
    /// Dense operand file; with --w replaces the generated problem.
    #[arg(long, requires = "w")]
    x: Option<PathBuf>,
    /// BSR weight file.
    #[arg(long, requires = "x")]
    w: Option<PathBuf>,
    /// Append every trial to this record file.
    #[arg(long)]
    records: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct GenArgs {
    /// Rows of W_B.
    #[arg(long)]
    n: Option<usize>,
    /// Columns of W_B.
    #[arg(long)]
    k: Option<usize>,
    /// Square block size; overridden by --block-rows/--block-cols.
    #[arg(long, default_value_t = 8)]
    block: usize,
    #[arg(long)]
    block_rows: Option<usize>,
    #[arg(long)]
    block_cols: Option<usize>,
    #[arg(long, default_value_t = 0.8)]
    sparsity: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "f32")]
    kind: ScalarKind,
    /// uniform|int
    #[arg(long, default_value = "uniform")]
    values: ValueMode,
    /// Generate a dense RxC operand instead of a BSR weight.
    #[arg(long, conflicts_with_all = ["n", "k"])]
    dense: Option<String>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    /// Dense operand X (m x k).
    #[arg(long)]
    x: PathBuf,
    /// BSR weight W_B (n x k).
    #[arg(long)]
    w: PathBuf,
    /// PTP tile RxC.
    #[arg(long, default_value = "1x8")]
    tile: String,
    /// PRWB lane counts to check (default: every divisor of k up to 1024).
    #[arg(long, value_delimiter = ',')]
    lanes: Vec<usize>,
    /// Worker threads (default: all).
    #[arg(long)]
    workers: Option<usize>,
}

/// A failure with the exit code it maps to.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = if matches!(e, Error::NoValidCandidate) { EXIT_VERIFY } else { EXIT_USAGE };
        Failure { code, message: e.to_string() }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure { code: EXIT_USAGE, message: e.to_string() }
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure { code: EXIT_USAGE, message: message.into() }
}

/// Parses `argv` (program name first) and runs the subcommand.
pub fn cli_main<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            return if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(out, "{}", e.render());
                EXIT_OK
            } else {
                let _ = write!(err, "{}", e.render());
                EXIT_USAGE
            };
        }
    };
    let result = match cli.command {
        Command::Bench(args) => bench(*args, out, err),
        Command::Tune(args) => tune_cmd(args, out),
        Command::Gen(args) => gen(args, out),
        Command::Verify(args) => verify(args, out),
    };
    match result {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message);
            f.code
        }
    }
}

fn bench(args: BenchArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<u8, Failure> {
    let mut cfg = BenchConfig::default();
    if let Some(path) = &args.config {
        cfg.apply_config_text(&fs::read_to_string(path)?)?;
    }
    let flags = [
        ("shapes", &args.shapes),
        ("blocks", &args.blocks),
        ("sparsities", &args.sparsities),
        ("schedules", &args.schedules),
        ("tile", &args.tile),
        ("lanes", &args.lanes),
        ("repeats", &args.repeats),
        ("warmup", &args.warmup),
        ("seed", &args.seed),
        ("kind", &args.kind),
        ("format", &args.format),
        ("budget", &args.budget),
        ("cap", &args.cap),
    ];
    for (key, value) in flags {
        if let Some(v) = value {
            cfg.apply(key, v)?;
        }
    }
    cfg.validate()?;
    let reference = args.reference.as_ref().map(ReferenceColumns::load).transpose()?;

    let total = cfg.cell_count();
    let cells = run_suite_with(&cfg, |cell| {
        if !args.quiet {
            let status = if cell.verified() { "ok" } else { "FAILED" };
            let _ = writeln!(
                err,
                "[{}/{total}] ({}, {}, {}) b={} s={} nnzb={} {status}",
                cell.index + 1,
                cell.m,
                cell.k,
                cell.n,
                cell.block,
                cell.sparsity,
                cell.nnzb
            );
            for r in &cell.results {
                if let Outcome::Failed(msg) = &r.outcome {
                    let _ = writeln!(err, "    {}: {msg}", r.schedule);
                }
            }
        }
    })?;

    let table = emit_table(&cells, cfg.format, reference.as_ref());
    match &args.out {
        Some(path) => fs::write(path, &table)?,
        None => out.write_all(table.as_bytes())?,
    }
    if let Some(path) = &args.records {
        let trials: Vec<_> = cells.iter().flat_map(|c| c.tuning.iter().cloned()).collect();
        save_records(&trials, path)?;
    }
    Ok(if cells.iter().all(|c| c.verified()) { EXIT_OK } else { EXIT_VERIFY })
}

fn print_tune(res: &TuneResult, out: &mut dyn Write) -> std::io::Result<()> {
    writeln!(out, "| t | median (ms) | min (ms) | valid |")?;
    writeln!(out, "| ---: | ---: | ---: | :---: |")?;
    for r in &res.all_trials {
        let lanes = r.schedule.lanes().unwrap_or(0);
        let (med, min) = if r.valid {
            (blocksparse::bench::format_ms(r.median_ns as f64 / 1e6), blocksparse::bench::format_ms(r.min_ns as f64 / 1e6))
        } else {
            ("-".into(), "-".into())
        };
        writeln!(out, "| {lanes} | {med} | {min} | {} |", if r.valid { "yes" } else { "no" })?;
    }
    writeln!(
        out,
        "best: t={} median {} ms ({} of budget used)",
        res.best_lanes(),
        blocksparse::bench::format_ms(res.best.median_ns as f64 / 1e6),
        res.budget_used
    )
}

fn tune_typed<T: Scalar>(
    x: &DenseMatrix<T>,
    w: &BsrMatrix<T>,
    args: &TuneArgs,
    meta: &RecordMeta,
) -> Result<TuneResult, Failure> {
    let space: SearchSpace = candidate_lanes(w.k(), args.cap);
    let opts = TuneOptions { budget: args.budget, repeats: args.repeats, plan_seed: args.seed, exec: Exec::global() };
    Ok(tune(x, w, &space, &opts, meta)?)
}

fn tune_cmd(args: TuneArgs, out: &mut dyn Write) -> Result<u8, Failure> {
    let res = match (&args.x, &args.w) {
        (Some(xp), Some(wp)) => {
            let meta = RecordMeta::new(f64::NAN, args.seed);
            match (load_dense(xp)?, load_bsr(wp)?) {
                (AnyDense::F32(x), AnyBsr::F32(w)) => {
                    let meta = RecordMeta { sparsity: 1.0 - block_density(&w), ..meta };
                    tune_typed(&x, &w, &args, &meta)?
                }
                (AnyDense::F64(x), AnyBsr::F64(w)) => {
                    let meta = RecordMeta { sparsity: 1.0 - block_density(&w), ..meta };
                    tune_typed(&x, &w, &args, &meta)?
                }
                (x, w) => return Err(Error::KindMismatch { left: x.kind(), right: w.kind() }.into()),
            }
        }
        _ => {
            let (m, k, n) = parse_shape(&args.shapes).map_err(usage)?;
            let spec = GenSpec {
                n,
                k,
                b_r: args.blocks,
                b_c: args.blocks,
                sparsity: args.sparsities,
                seed: args.seed,
                value_mode: ValueMode::UniformReal,
            };
            let meta = RecordMeta::new(args.sparsities, args.seed);
            match args.kind {
                ScalarKind::F32 => {
                    let x = generate_dense::<f32>(m, k, args.seed.wrapping_add(1), ValueMode::UniformReal)?;
                    tune_typed(&x, &generate_bsr::<f32>(&spec)?, &args, &meta)?
                }
                ScalarKind::F64 => {
                    let x = generate_dense::<f64>(m, k, args.seed.wrapping_add(1), ValueMode::UniformReal)?;
                    tune_typed(&x, &generate_bsr::<f64>(&spec)?, &args, &meta)?
                }
            }
        }
    };
    print_tune(&res, out)?;
    if let Some(path) = &args.records {
        save_records(&res.all_trials, path)?;
    }
    Ok(EXIT_OK)
}

fn block_density<T: Scalar>(w: &BsrMatrix<T>) -> f64 {
    w.nnzb() as f64 / (w.block_rows() * w.block_cols()) as f64
}

fn gen(args: GenArgs, out: &mut dyn Write) -> Result<u8, Failure> {
    if let Some(dims) = &args.dense {
        let (rows, cols) = blocksparse::kernels::parse_pair(dims).map_err(usage)?;
        let d: AnyDense = match args.kind {
            ScalarKind::F32 => generate_dense::<f32>(rows, cols, args.seed, args.values)?.into(),
            ScalarKind::F64 => generate_dense::<f64>(rows, cols, args.seed, args.values)?.into(),
        };
        d.save(&args.out)?;
        writeln!(out, "wrote {rows}x{cols} {} dense matrix to {}", args.kind, args.out.display())?;
        return Ok(EXIT_OK);
    }
    let (n, k) = match (args.n, args.k) {
        (Some(n), Some(k)) => (n, k),
        _ => return Err(usage("gen needs --n and --k (or --dense RxC)")),
    };
    let spec = GenSpec {
        n,
        k,
        b_r: args.block_rows.unwrap_or(args.block),
        b_c: args.block_cols.unwrap_or(args.block),
        sparsity: args.sparsity,
        seed: args.seed,
        value_mode: args.values,
    };
    let w: AnyBsr = match args.kind {
        ScalarKind::F32 => generate_bsr::<f32>(&spec)?.into(),
        ScalarKind::F64 => generate_bsr::<f64>(&spec)?.into(),
    };
    w.save(&args.out)?;
    writeln!(
        out,
        "wrote {n}x{k} {} BSR matrix ({}x{} blocks, {} stored) to {}",
        args.kind,
        spec.b_r,
        spec.b_c,
        spec.stored_blocks(),
        args.out.display()
    )?;
    Ok(EXIT_OK)
}

fn verify_typed<T: Scalar>(
    x: &DenseMatrix<T>,
    w: &BsrMatrix<T>,
    args: &VerifyArgs,
    out: &mut dyn Write,
) -> Result<u8, Failure> {
    let exec = match args.workers {
        Some(n) => Exec::with_workers(n)?,
        None => Exec::global(),
    };
    let (tile_rows, tile_cols) = blocksparse::kernels::parse_pair(&args.tile).map_err(usage)?;
    let lanes = if args.lanes.is_empty() {
        candidate_lanes(w.k(), DEFAULT_LANE_CAP).candidates().to_vec()
    } else {
        args.lanes.clone()
    };
    let mut schedules = vec![Schedule::Pep, Schedule::Ptp { tile_rows, tile_cols }, Schedule::Prob];
    schedules.extend(lanes.into_iter().map(|lanes| Schedule::Prwb { lanes }));
    for s in &schedules {
        s.check(w.k())?;
    }

    let reference = Reference::compute(x, w)?;
    let tol = tolerance(T::KIND);
    let mut all_ok = true;
    writeln!(out, "X {}x{}, W_B {}x{} ({} blocks), {}", x.rows(), x.cols(), w.n(), w.k(), w.nnzb(), T::KIND)?;
    for s in schedules {
        let dev = reference.check(&run_schedule_on(&exec, x, w, s)?)?;
        let ok = dev.within(tol);
        all_ok &= ok;
        writeln!(
            out,
            "{:<12} {}  error {:.3e} (tol {tol:.0e}), max abs {:.3e}",
            s.to_string(),
            if ok { "ok  " } else { "FAIL" },
            dev.max_scaled,
            dev.max_abs
        )?;
    }
    Ok(if all_ok { EXIT_OK } else { EXIT_VERIFY })
}

fn verify(args: VerifyArgs, out: &mut dyn Write) -> Result<u8, Failure> {
    match (load_dense(&args.x)?, load_bsr(&args.w)?) {
        (AnyDense::F32(x), AnyBsr::F32(w)) => verify_typed(&x, &w, &args, out),
        (AnyDense::F64(x), AnyBsr::F64(w)) => verify_typed(&x, &w, &args, out),
        (x, w) => Err(Error::KindMismatch { left: x.kind(), right: w.kind() }.into()),
    }
}
