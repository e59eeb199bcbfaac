//! Subcommand definitions and their implementations.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use cpcode::codegen::{build_generator, build_parity_check, coefficient_report, column_offsets, column_spans, compute_z, verify_orthogonality, CodeParams};
use cpcode::peeling::{assemble_result, decode, DecodeMode, StragglerSet};
use cpcode::planner::{build_plan, JobPlan, StorageBudget};
use cpcode::rs_baseline::{condition_number, rs_decode, RsConfig};
use cpcode::runtime::io::{load_matrix, load_vector, save_matrix, save_vector};
use cpcode::runtime::master::{error_percentage, Collection, CpDeployment, MasterError, RsDeployment};
use cpcode::runtime::matrix::{band_for_sparsity, gen_banded, gen_dense, gen_vector};
use cpcode::runtime::sim::{run, NoiseModel, SimConfig, StragglerPolicy};
use cpcode::{Matrix64, PolyMat};

use crate::config::{layered, Config};
use crate::dump::{self, Manifest, Scheme};
use crate::error::CliError;
use crate::experiments::{plan_for_budget, snr_sweep, sparsity_bench, NoiseReference, SnrSweep, SparsityBench, Timing};

#[derive(Debug, Parser)]
#[command(name = "cpcode", version, about = "Straggler-resilient coded matrix-vector multiplication")]
pub struct Cli {
    /// RNG seed for generated data, delays and noise.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true, value_enum)]
    pub scheme: Option<SchemeArg>,
    /// Flat key = value file; flags override its keys.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output file or directory, depending on the command.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Use the full-size experiment dimensions.
    #[arg(long = "paper-scale", global = true)]
    pub full_scale: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SchemeArg {
    Cp,
    Rs,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build G for CP(n, k) and check it against H.
    Verify(CodeArgs),
    /// Print the per-worker task table.
    Plan(PlanArgs),
    /// Write each worker's coded submatrices.
    Encode(EncodeArgs),
    /// Run workers and dump what the master receives.
    Simulate(SimulateArgs),
    /// Recover A x from a simulation dump.
    Decode(DecodeArgs),
    /// Output error versus SNR for both schemes.
    SnrSweep(SnrArgs),
    /// Worker time and stored sparsity on banded matrices.
    SparsityBench(BenchArgs),
}

#[derive(Debug, Clone, Args, Default)]
pub struct CodeArgs {
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub k: Option<usize>,
}

#[derive(Debug, Clone, Args, Default)]
pub struct LayoutArgs {
    #[command(flatten)]
    pub code: CodeArgs,
    /// Storage fraction as `p/q` or a decimal.
    #[arg(long)]
    pub gamma: Option<String>,
    /// Explicit block count, overriding the storage-derived choice.
    #[arg(long)]
    pub delta: Option<usize>,
    /// RS block count.
    #[arg(long)]
    pub delta_rs: Option<usize>,
    /// RS jobs per worker.
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Default)]
pub enum PlanFormat {
    #[default]
    Text,
    Csv,
}

#[derive(Debug, Clone, Args)]
pub struct PlanArgs {
    #[command(flatten)]
    pub layout: LayoutArgs,
    #[arg(long, value_enum)]
    pub format: Option<PlanFormat>,
}

#[derive(Debug, Clone, Args, Default)]
pub struct MatrixArgs {
    /// `.mtx` (Matrix Market) or raw binary matrix.
    #[arg(long)]
    pub matrix: Option<PathBuf>,
    /// Generated dense matrix rows.
    #[arg(long)]
    pub rows: Option<usize>,
    /// Generated dense matrix columns.
    #[arg(long)]
    pub cols: Option<usize>,
    /// Generate an N x N banded matrix instead.
    #[arg(long)]
    pub banded: Option<usize>,
    /// Target sparsity of the banded matrix.
    #[arg(long)]
    pub sparsity: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct EncodeArgs {
    #[command(flatten)]
    pub layout: LayoutArgs,
    #[command(flatten)]
    pub matrix: MatrixArgs,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub layout: LayoutArgs,
    #[command(flatten)]
    pub matrix: MatrixArgs,
    /// Raw binary input vector; generated from the seed if absent.
    #[arg(long)]
    pub vector: Option<PathBuf>,
    /// Comma-separated workers that never respond.
    #[arg(long)]
    pub stragglers: Option<String>,
    /// Mean of the exponential start delay applied to every worker.
    #[arg(long)]
    pub random_delay: Option<f64>,
    /// Number of workers that fail, chosen at random.
    #[arg(long)]
    pub fail_random: Option<usize>,
    /// Additive white Gaussian noise level in dB.
    #[arg(long)]
    pub snr: Option<f64>,
    #[arg(long, value_enum)]
    pub noise_reference: Option<NoiseRefArg>,
    /// Keep every finished CP worker instead of the fastest n - s.
    #[arg(long)]
    pub all_finishers: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum NoiseRefArg {
    Task,
    Global,
}

#[derive(Debug, Clone, Args)]
pub struct DecodeArgs {
    /// Directory written by `simulate`.
    #[arg(long)]
    pub input: PathBuf,
    /// Write the peeling trace as CSV.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Recover parity columns as well.
    #[arg(long)]
    pub full: bool,
}

#[derive(Debug, Clone, Args)]
pub struct SnrArgs {
    #[arg(long)]
    pub trials: Option<usize>,
    /// Comma-separated SNR levels in dB; `inf` disables noise.
    #[arg(long)]
    pub snr: Option<String>,
    #[arg(long)]
    pub rows: Option<usize>,
    #[arg(long)]
    pub cols: Option<usize>,
    #[arg(long)]
    pub stragglers: Option<usize>,
    #[arg(long, value_enum)]
    pub noise_reference: Option<NoiseRefArg>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TimingArg {
    Virtual,
    Wall,
}

#[derive(Debug, Clone, Args)]
pub struct BenchArgs {
    #[arg(long)]
    pub size: Option<usize>,
    /// Comma-separated sparsity levels.
    #[arg(long)]
    pub levels: Option<String>,
    #[arg(long, value_enum)]
    pub timing: Option<TimingArg>,
    #[arg(long)]
    pub reps: Option<usize>,
}

/// Global settings after merging flags, config and defaults.
struct Ctx {
    seed: u64,
    scheme: Scheme,
    config: Config,
    out: Option<PathBuf>,
    full_scale: bool,
}

fn parse_list(s: &str) -> Result<Vec<f64>, CliError> {
    s.split(',')
        .map(|v| v.trim().parse::<f64>().map_err(|_| CliError::config(format!("'{v}' is not a number"))))
        .collect()
}

fn parse_usize_list(s: &str) -> Result<Vec<usize>, CliError> {
    s.split(',')
        .filter(|v| !v.trim().is_empty())
        .map(|v| v.trim().parse::<usize>().map_err(|_| CliError::config(format!("'{v}' is not a worker index"))))
        .collect()
}

/// Runs a parsed command line, returning text for stdout.
pub fn execute(cli: Cli) -> Result<String, CliError> {
    let config = Config::load(cli.config.as_deref())?;
    let scheme = match (cli.scheme, config.string("scheme")?.as_deref()) {
        (Some(SchemeArg::Cp), _) | (None, None | Some("cp")) => Scheme::Cp,
        (Some(SchemeArg::Rs), _) | (None, Some("rs")) => Scheme::Rs,
        (None, Some(other)) => return Err(CliError::config(format!("unknown scheme '{other}'"))),
    };
    let ctx = Ctx {
        seed: layered(cli.seed, config.u64("seed")?, 1),
        scheme,
        out: cli.out,
        full_scale: cli.full_scale || config.bool("paper_scale")?.unwrap_or(false),
        config,
    };
    match cli.command {
        Command::Verify(a) => cmd_verify(&ctx, &a),
        Command::Plan(a) => cmd_plan(&ctx, &a),
        Command::Encode(a) => cmd_encode(&ctx, &a),
        Command::Simulate(a) => cmd_simulate(&ctx, &a),
        Command::Decode(a) => cmd_decode(&ctx, &a),
        Command::SnrSweep(a) => cmd_snr_sweep(&ctx, &a),
        Command::SparsityBench(a) => cmd_sparsity_bench(&ctx, &a),
    }
}

fn params(ctx: &Ctx, a: &CodeArgs) -> Result<CodeParams, CliError> {
    let n = layered(a.n, ctx.config.usize("n")?, 4);
    let k = layered(a.k, ctx.config.usize("k")?, 2);
    Ok(CodeParams::new(n, k)?)
}

fn budget(ctx: &Ctx, a: &LayoutArgs, default: &str) -> Result<StorageBudget, CliError> {
    let text = layered(a.gamma.clone(), ctx.config.string("gamma")?, default.to_string());
    text.parse().map_err(CliError::config)
}

fn cp_plan(ctx: &Ctx, a: &LayoutArgs) -> Result<JobPlan, CliError> {
    let params = params(ctx, &a.code)?;
    match a.delta.or(ctx.config.usize("delta")?) {
        Some(delta) => Ok(build_plan(params, delta)?),
        None => plan_for_budget(params, budget(ctx, a, "3/4")?),
    }
}

fn rs_config(ctx: &Ctx, a: &LayoutArgs) -> Result<RsConfig<f64>, CliError> {
    let n = layered(a.code.n, ctx.config.usize("n")?, 4);
    let delta = layered(a.delta_rs, ctx.config.usize("delta_rs")?, 2);
    let jobs = layered(a.jobs, ctx.config.usize("jobs_per_worker")?, 1);
    Ok(RsConfig::new(n, delta, jobs)?)
}

/// Writes `text` to `--out` when given, otherwise returns it for stdout.
fn emit(ctx: &Ctx, text: String) -> Result<String, CliError> {
    match &ctx.out {
        Some(p) => {
            fs::write(p, &text).map_err(|e| CliError::io(format!("{}: {e}", p.display())))?;
            Ok(String::new())
        }
        None => Ok(text),
    }
}

fn out_dir(ctx: &Ctx) -> Result<&Path, CliError> {
    ctx.out.as_deref().ok_or_else(|| CliError::config("--out DIR is required"))
}

fn cmd_verify(ctx: &Ctx, a: &CodeArgs) -> Result<String, CliError> {
    let params = params(ctx, a)?;
    let g: PolyMat = build_generator(params)?;
    let h: PolyMat = build_parity_check(params);
    let z: PolyMat = compute_z(params)?;
    let ok = verify_orthogonality(&g, &h)?;
    let mut out = String::new();
    writeln!(out, "{params}").unwrap();
    writeln!(out, "G =\n{g}").unwrap();
    writeln!(out, "H =\n{h}").unwrap();
    writeln!(out, "offsets = {:?}", column_offsets(&g)?).unwrap();
    writeln!(out, "spans = {:?}", column_spans(&g)?).unwrap();
    writeln!(out, "G H^T = 0: {ok}").unwrap();
    write!(out, "{}", coefficient_report(&z, params)).unwrap();
    if !ok {
        return Err(CliError::config(format!("{params}: generator is not orthogonal to H\n{out}")));
    }
    emit(ctx, out)
}

fn cmd_plan(ctx: &Ctx, a: &PlanArgs) -> Result<String, CliError> {
    let format = match (a.format, ctx.config.string("format")?.as_deref()) {
        (Some(f), _) => f,
        (None, Some("csv")) => PlanFormat::Csv,
        _ => PlanFormat::Text,
    };
    if ctx.scheme == Scheme::Rs {
        let cfg = rs_config(ctx, &a.layout)?;
        let mut out = String::from("worker,slot,point_index,point\n");
        for w in 0..cfg.n() {
            for (t, p) in cfg.worker_points(w).into_iter().enumerate() {
                writeln!(out, "{w},{t},{p},{:?}", cfg.points()[p]).unwrap();
            }
        }
        return emit(ctx, out);
    }
    let plan = cp_plan(ctx, &a.layout)?;
    emit(ctx, if format == PlanFormat::Csv { plan.render_csv() } else { plan.render_text() })
}

fn load_source(ctx: &Ctx, m: &MatrixArgs) -> Result<Matrix64, CliError> {
    if let Some(p) = m.matrix.clone().or(ctx.config.string("matrix")?.map(PathBuf::from)) {
        return Ok(load_matrix(&p)?);
    }
    if let Some(size) = m.banded.or(ctx.config.usize("banded")?) {
        let sp = layered(m.sparsity, ctx.config.f64("sparsity")?, 0.9);
        if !(0.0..1.0).contains(&sp) {
            return Err(CliError::config(format!("sparsity {sp} outside [0, 1)")));
        }
        return Ok(gen_banded(size, band_for_sparsity(size, sp), ctx.seed));
    }
    let rows = layered(m.rows, ctx.config.usize("rows")?, 40);
    let cols = layered(m.cols, ctx.config.usize("cols")?, 30);
    Ok(gen_dense(rows, cols, ctx.seed))
}

fn cmd_encode(ctx: &Ctx, a: &EncodeArgs) -> Result<String, CliError> {
    let dir = out_dir(ctx)?;
    let matrix = load_source(ctx, &a.matrix)?;
    fs::create_dir_all(dir)?;
    let ext = if matrix.is_sparse() { "mtx" } else { "bin" };
    let mut index = String::from("worker,task_index,file,rows,cols,nnz\n");
    let loads = match ctx.scheme {
        Scheme::Cp => CpDeployment::new(cp_plan(ctx, &a.layout)?, &matrix)?.loads().to_vec(),
        Scheme::Rs => RsDeployment::new(rs_config(ctx, &a.layout)?, &matrix)?.loads().to_vec(),
    };
    for (w, load) in loads.iter().enumerate() {
        for (t, m) in load.tasks.iter().enumerate() {
            let file = format!("w{w}_t{t}.{ext}");
            save_matrix(&dir.join(&file), m)?;
            writeln!(index, "{w},{t},{file},{},{},{}", m.rows(), m.cols(), m.nnz()).unwrap();
        }
    }
    fs::write(dir.join("index.csv"), &index)?;
    Ok(format!("wrote {} coded submatrices to {}\n", index.lines().count() - 1, dir.display()))
}

fn sim_config(ctx: &Ctx, a: &SimulateArgs) -> Result<SimConfig, CliError> {
    let stragglers = a.stragglers.clone().or(ctx.config.string("stragglers")?);
    let delay = a.random_delay.or(ctx.config.f64("random_delay")?);
    let fail = a.fail_random.or(ctx.config.usize("fail_random")?);
    let policy = match (stragglers, delay, fail) {
        (Some(s), None, None) => StragglerPolicy::Explicit(parse_usize_list(&s)?),
        (None, Some(mean), None) => StragglerPolicy::RandomDelay { mean },
        (None, None, Some(count)) => StragglerPolicy::FailStopRandom { count },
        (None, None, None) => StragglerPolicy::None,
        _ => return Err(CliError::config("choose at most one of --stragglers, --random-delay, --fail-random")),
    };
    let reference = match (a.noise_reference, ctx.config.string("noise_reference")?.as_deref()) {
        (Some(NoiseRefArg::Global), _) | (None, Some("global")) => NoiseReference::Global,
        _ => NoiseReference::Task,
    };
    let noise = match a.snr.or(ctx.config.f64("snr")?) {
        None => NoiseModel::None,
        Some(s) if s.is_infinite() => NoiseModel::None,
        Some(snr_db) if reference == NoiseReference::Global => NoiseModel::Global { snr_db },
        Some(snr_db) => NoiseModel::PerTask { snr_db },
    };
    Ok(SimConfig { policy, noise, seed: ctx.seed, ..Default::default() })
}

fn cmd_simulate(ctx: &Ctx, a: &SimulateArgs) -> Result<String, CliError> {
    let dir = out_dir(ctx)?;
    let matrix = load_source(ctx, &a.matrix)?;
    let x = match a.vector.clone().or(ctx.config.string("vector")?.map(PathBuf::from)) {
        Some(p) => load_vector(&p)?,
        None => gen_vector(matrix.cols(), ctx.seed.wrapping_add(1)),
    };
    let reference = matrix.matvec(&x).map_err(CliError::config)?;
    let sim = sim_config(ctx, a)?;
    fs::create_dir_all(dir)?;
    save_vector(&dir.join("x.bin"), &x)?;
    match ctx.scheme {
        Scheme::Cp => {
            let dep = CpDeployment::new(cp_plan(ctx, &a.layout)?, &matrix)?;
            let exec = run(dep.loads(), &x, &sim)?;
            let params = dep.plan().params();
            let mut order: Vec<(usize, f64)> =
                (0..params.n()).filter_map(|w| exec.trace.finish_time(w).map(|t| (w, t))).collect();
            order.sort_by(|p, q| p.1.total_cmp(&q.1).then(p.0.cmp(&q.0)));
            let collection = if a.all_finishers || ctx.config.bool("all_finishers")?.unwrap_or(false) {
                Collection::AllFinishers
            } else {
                Collection::Threshold
            };
            if collection == Collection::Threshold {
                order.truncate(params.k());
            }
            let used: Vec<usize> = order.iter().map(|p| p.0).collect();
            let manifest = Manifest {
                scheme: Scheme::Cp,
                n: params.n(),
                k: params.k(),
                delta: dep.plan().delta(),
                jobs_per_worker: 0,
                rows: dep.rows(),
                block_len: dep.block_rows(),
                seed: ctx.seed,
            };
            dump::write_cp(dir, &manifest, dep.plan(), &exec, &used, &reference)?;
            if used.len() < params.k() {
                return Err(MasterError::Unrecoverable { got: used.len(), need: params.k() }.into());
            }
            let missing: Vec<usize> = (0..params.n()).filter(|w| !used.contains(w)).collect();
            Ok(format!("{}: collected workers {used:?}, stragglers {missing:?}\n", params))
        }
        Scheme::Rs => {
            let dep = RsDeployment::new(rs_config(ctx, &a.layout)?, &matrix)?;
            let exec = run(dep.loads(), &x, &sim)?;
            let cfg = dep.config();
            let manifest = Manifest {
                scheme: Scheme::Rs,
                n: cfg.n(),
                k: 0,
                delta: cfg.delta(),
                jobs_per_worker: cfg.jobs_per_worker(),
                rows: dep.rows(),
                block_len: matrix.rows().div_ceil(cfg.delta()),
                seed: ctx.seed,
            };
            dump::write_rs(dir, &manifest, cfg, &exec, &reference)?;
            let responses = exec.outputs.iter().flatten().map(Vec::len).sum::<usize>();
            if responses < cfg.delta() {
                return Err(MasterError::Unrecoverable { got: responses, need: cfg.delta() }.into());
            }
            Ok(format!("RS delta={}: failed workers {:?}\n", cfg.delta(), exec.trace.failed))
        }
    }
}

fn cmd_decode(ctx: &Ctx, a: &DecodeArgs) -> Result<String, CliError> {
    let manifest = Manifest::read(&a.input)?;
    let mut report = String::new();
    let y = match manifest.scheme {
        Scheme::Cp => {
            let plan = manifest.plan()?;
            let mut grid = dump::read_cp(&a.input, &manifest, &plan)?;
            let stragglers = StragglerSet::new(grid.unknown_columns(), manifest.n)?;
            let mode = if a.full { DecodeMode::Full } else { DecodeMode::SystematicOnly };
            let trace = decode(&mut grid, &stragglers, mode)?;
            if let Some(p) = &a.trace {
                fs::write(p, trace.to_csv())?;
            }
            writeln!(report, "stragglers {:?}, {} symbols peeled", stragglers.indices(), trace.peeled().count()).unwrap();
            assemble_result(&grid, &plan, manifest.rows)?
        }
        Scheme::Rs => {
            let responses = dump::read_rs(&a.input)?;
            let blocks = rs_decode(&responses, manifest.delta)?;
            let pts: Vec<f64> = responses.iter().take(manifest.delta).map(|r| r.point).collect();
            writeln!(report, "{} responses, condition number {:.3e}", responses.len(), condition_number(&pts)).unwrap();
            let mut y: Vec<f64> = blocks.concat();
            y.truncate(manifest.rows);
            y
        }
    };
    if let Some(reference) = dump::read_reference(&a.input)? {
        writeln!(report, "error percentage {:e}", error_percentage(&reference, &y).map_err(CliError::from)?).unwrap();
    }
    let out = ctx.out.clone().unwrap_or_else(|| a.input.join("result.bin"));
    save_vector(&out, &y)?;
    writeln!(report, "wrote {}", out.display()).unwrap();
    Ok(report)
}

fn write_report(ctx: &Ctx, r: &crate::experiments::ExperimentReport) -> Result<String, CliError> {
    if let Some(p) = &ctx.out {
        let echo = p.with_extension("config.toml");
        fs::write(&echo, r.config_echo()).map_err(|e| CliError::io(format!("{}: {e}", echo.display())))?;
    }
    emit(ctx, r.to_csv())
}

fn cmd_snr_sweep(ctx: &Ctx, a: &SnrArgs) -> Result<String, CliError> {
    let c = &ctx.config;
    let base = if ctx.full_scale { SnrSweep::full_scale() } else { SnrSweep::desk() };
    let snrs = match &a.snr {
        Some(s) => parse_list(s)?,
        None => c.f64_list("snr")?.unwrap_or(base.snrs.clone()),
    };
    let reference = match (a.noise_reference, c.string("noise_reference")?.as_deref()) {
        (Some(NoiseRefArg::Global), _) | (None, Some("global")) => NoiseReference::Global,
        _ => base.reference,
    };
    let gamma = match c.string("gamma")? {
        Some(g) => g.parse().map_err(CliError::config)?,
        None => base.gamma,
    };
    let cfg = SnrSweep {
        rows: layered(a.rows, c.usize("rows")?, base.rows),
        cols: layered(a.cols, c.usize("cols")?, base.cols),
        n: layered(None, c.usize("n")?, base.n),
        k: layered(None, c.usize("k")?, base.k),
        gamma,
        delta_rs: layered(None, c.usize("delta_rs")?, base.delta_rs),
        jobs_per_worker: layered(None, c.usize("jobs_per_worker")?, base.jobs_per_worker),
        stragglers: layered(a.stragglers, c.usize("stragglers")?, base.stragglers),
        trials: layered(a.trials, c.usize("trials")?, base.trials),
        snrs,
        reference,
        seed: ctx.seed,
    };
    write_report(ctx, &snr_sweep(&cfg)?)
}

fn cmd_sparsity_bench(ctx: &Ctx, a: &BenchArgs) -> Result<String, CliError> {
    let c = &ctx.config;
    let base = if ctx.full_scale { SparsityBench::full_scale() } else { SparsityBench::desk() };
    let levels = match &a.levels {
        Some(s) => parse_list(s)?,
        None => c.f64_list("levels")?.unwrap_or(base.levels.clone()),
    };
    let timing = match (a.timing, c.string("timing")?.as_deref()) {
        (Some(TimingArg::Wall), _) | (None, Some("wall")) => Timing::Wall,
        _ => Timing::Virtual,
    };
    let gamma = match c.string("gamma")? {
        Some(g) => g.parse().map_err(CliError::config)?,
        None => base.gamma,
    };
    let cfg = SparsityBench {
        size: layered(a.size, c.usize("size")?, base.size),
        levels,
        n: layered(None, c.usize("n")?, base.n),
        k: layered(None, c.usize("k")?, base.k),
        gamma,
        delta_rs: layered(None, c.usize("delta_rs")?, base.delta_rs),
        jobs_per_worker: layered(None, c.usize("jobs_per_worker")?, base.jobs_per_worker),
        timing,
        reps: layered(a.reps, c.usize("reps")?, base.reps),
        seed: ctx.seed,
    };
    write_report(ctx, &sparsity_bench(&cfg)?)
}
