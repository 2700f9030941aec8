use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use fxqubo::bench::timing::{
    aggregate_timing_log, emit_timing_means, load_timing_log, with_overhead, DEFAULT_OVERHEAD_US, REFERENCE_TIMINGS,
};
use fxqubo::bench::{emit_report, qpu_access_time, run_batches_with_optimum, BenchReport, QpuTimingModel, ReportFormat};
use fxqubo::oracle::{best_cycle_bruteforce, has_arbitrage_bellman_ford};
use fxqubo::rates::{generate_consistent, generate_noisy, load_rates, plant_cycle, to_log_weights, write_rates};
use fxqubo::solvers::ground_state;
use fxqubo::{
    ArbitrageModel, HamiltonianWeights, ProblemShape, RateFormat, Rates, Sampler, SamplerParams, SolverKind,
};

mod error;

use error::Failure;

/// Products at or below `1 + PROFIT_EPS` are not reported as arbitrage.
const PROFIT_EPS: f64 = 1e-9;

#[derive(Parser)]
#[command(name = "fxqubo", version, about = "Currency arbitrage as a QUBO: generate, solve, benchmark")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a rate table, optionally with a planted arbitrage loop.
    Gen(GenArgs),
    /// Build the QUBO for a rate table, sample it and decode the best loop.
    Solve(SolveArgs),
    /// Reads-to-optimum benchmark over solvers and read counts.
    Bench(BenchArgs),
    /// Annealer access-time calculator.
    Timing(TimingArgs),
    /// Exhaustive best loop and Bellman-Ford arbitrage check.
    Oracle(OracleArgs),
}

#[derive(Args)]
struct GenArgs {
    /// Number of currencies (at least 2).
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Half-width of uniform noise added to each log-rate; 0 keeps the table arbitrage-free.
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    /// Currency indices of a loop to make profitable, e.g. 0,1,2.
    #[arg(long, value_delimiter = ',')]
    plant: Vec<usize>,
    /// Product of the planted loop.
    #[arg(long, default_value_t = 1.05)]
    strength: f64,
    /// Output file (format from extension, CSV unless .json); stdout if omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ModelArgs {
    /// Rate table, CSV (`from,to,rate`) or JSON by extension.
    #[arg(long)]
    rates: PathBuf,
    /// Loop positions including the closing repeat of the start currency.
    #[arg(long, default_value_t = 4)]
    k: usize,
    /// Rate weight A (> 0); the calibrated B..E scale with it.
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    a: f64,
    /// One-hot weight B; calibrated from the rates if omitted.
    #[arg(long, allow_negative_numbers = true)]
    b: Option<f64>,
    /// Endpoint weight C; calibrated (negative) if omitted.
    #[arg(long, allow_negative_numbers = true)]
    c: Option<f64>,
    /// Consecutive-repeat weight D; negative favours shorter loops [default: 0].
    #[arg(long, allow_negative_numbers = true)]
    d: Option<f64>,
    /// Per-variable weight E; calibrated if omitted.
    #[arg(long, allow_negative_numbers = true)]
    e: Option<f64>,
}

#[derive(Args)]
struct SamplerArgs {
    #[arg(long, default_value_t = 100)]
    num_reads: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Simulated annealing sweeps per read.
    #[arg(long, default_value_t = 1000)]
    sweeps: usize,
    /// Initial inverse temperature, in units of 1/max|q|.
    #[arg(long, default_value_t = 0.1, allow_negative_numbers = true)]
    beta_start: f64,
    /// Final inverse temperature, in units of 1/max|q|.
    #[arg(long, default_value_t = 10.0)]
    beta_end: f64,
    /// Tabu tenure [default: ceil(n_vars / 4)].
    #[arg(long)]
    tenure: Option<usize>,
    /// Tabu iterations without improvement before a read stops [default: 50 n_vars].
    #[arg(long)]
    max_iter: Option<usize>,
}

impl SamplerArgs {
    fn params(&self) -> SamplerParams {
        SamplerParams {
            num_reads: self.num_reads,
            seed: self.seed,
            sweeps_per_read: self.sweeps,
            beta_start: self.beta_start,
            beta_end: self.beta_end,
            tabu_tenure: self.tenure,
            max_iterations_per_read: self.max_iter,
        }
    }
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// exact, sa or tabu.
    #[arg(long, default_value = "tabu")]
    solver: String,
    #[command(flatten)]
    sampler: SamplerArgs,
    /// Write the sample set as JSON.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write the QUBO as JSON.
    #[arg(long)]
    qubo_out: Option<PathBuf>,
    /// Write shape, weights and labels as JSON.
    #[arg(long)]
    model_out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Stochastic solvers to compare.
    #[arg(long, value_delimiter = ',', default_value = "sa,tabu")]
    solvers: Vec<String>,
    /// Reads per sampler call.
    #[arg(long = "num-reads", value_delimiter = ',', default_value = "50,500")]
    num_reads: Vec<usize>,
    /// Sampler calls per (solver, reads) pair.
    #[arg(long, default_value_t = 2)]
    batches: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1000)]
    sweeps: usize,
    /// csv or json [default: from --out extension, else csv].
    #[arg(long)]
    format: Option<String>,
    /// Report file; stdout if omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TimingArgs {
    /// Read counts to evaluate.
    #[arg(long, value_delimiter = ',', default_value = "1,10,100,500")]
    reads: Vec<usize>,
    /// Programming time T_p (us).
    #[arg(long, default_value_t = 15782.0, allow_negative_numbers = true)]
    programming: f64,
    /// Anneal time per sample T_a (us).
    #[arg(long, default_value_t = 50.0, allow_negative_numbers = true)]
    anneal: f64,
    /// Readout time per sample T_r (us).
    #[arg(long, default_value_t = 47.0, allow_negative_numbers = true)]
    readout: f64,
    /// Delay time per sample T_d (us).
    #[arg(long, default_value_t = 20.0, allow_negative_numbers = true)]
    delay: f64,
    /// Access overhead (us), added with --include-overhead.
    #[arg(long, default_value_t = DEFAULT_OVERHEAD_US, allow_negative_numbers = true)]
    overhead: f64,
    #[arg(long)]
    include_overhead: bool,
    /// Use the measured per-column parameters for 1, 10, 100 and 500 reads
    /// and compare against the measured access time.
    #[arg(long)]
    reference: bool,
    /// An observed access time (us); prints it with the overhead added.
    #[arg(long, allow_negative_numbers = true)]
    observed: Option<f64>,
    /// Timing log CSV (`system,num_reads,batch,qpu_access_time_us`); prints per-group means.
    #[arg(long)]
    log: Option<PathBuf>,
    /// Output file for the table; stdout if omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long)]
    rates: PathBuf,
    /// Longest loop considered, in positions including the closing repeat.
    #[arg(long, default_value_t = 4)]
    k: usize,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Gen(a) => cmd_gen(a),
        Command::Solve(a) => cmd_solve(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Timing(a) => cmd_timing(a),
        Command::Oracle(a) => cmd_oracle(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            f.exit_code()
        }
    }
}

fn open(path: &Path) -> Result<BufReader<File>, Failure> {
    File::open(path).map(BufReader::new).map_err(|e| Failure::io(path.display(), e))
}

/// File sink, or stdout when `path` is `None`.
fn sink(path: Option<&Path>) -> Result<Box<dyn Write>, Failure> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).map_err(|e| Failure::io(p.display(), e))?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn finish(mut w: Box<dyn Write>) -> Result<(), Failure> {
    w.flush().map_err(|e| Failure::io("write", e))
}

fn join_labels(cycle: &[usize], labels: &[String]) -> String {
    cycle.iter().map(|&c| labels[c].as_str()).collect::<Vec<_>>().join("->")
}

fn read_rates(path: &Path) -> Result<Rates, Failure> {
    Ok(load_rates(open(path)?, RateFormat::from_path(path))?)
}

fn cmd_gen(a: GenArgs) -> Result<(), Failure> {
    if !(a.noise.is_finite() && a.noise >= 0.0) {
        return Err(Failure::usage(format!("noise must be >= 0, got {}", a.noise)));
    }
    let mut rates = if a.noise > 0.0 {
        generate_noisy::<f64>(a.n, a.seed, a.noise)?
    } else {
        generate_consistent::<f64>(a.n, a.seed)?
    };
    if !a.plant.is_empty() {
        rates = plant_cycle(&rates, &a.plant, a.strength)?;
    }
    let format = a.out.as_deref().map_or(RateFormat::Csv, RateFormat::from_path);
    let mut out = sink(a.out.as_deref())?;
    write_rates(&rates, &mut out, format)?;
    finish(out)
}

fn build_model(m: &ModelArgs) -> Result<ArbitrageModel<f64>, Failure> {
    let rates = read_rates(&m.rates)?;
    let shape = ProblemShape::new(rates.n(), m.k)?;
    if !(m.a.is_finite() && m.a > 0.0) {
        return Err(Failure::usage(format!("rate weight A must be > 0, got {}", m.a)));
    }
    let calibrated = HamiltonianWeights::calibrated(&to_log_weights(&rates), shape, m.a)?;
    let weights = HamiltonianWeights::new(
        m.a,
        m.b.unwrap_or(calibrated.one_hot),
        m.c.unwrap_or(calibrated.endpoints),
        m.d.unwrap_or(calibrated.consecutive),
        m.e.unwrap_or(calibrated.fill),
    )?;
    Ok(ArbitrageModel::build(rates, shape, weights)?)
}

fn parse_solver(s: &str) -> Result<SolverKind, Failure> {
    s.parse::<SolverKind>().map_err(Failure::from)
}

fn cmd_solve(a: SolveArgs) -> Result<(), Failure> {
    let solver = parse_solver(&a.solver)?;
    let model = build_model(&a.model)?;
    let params = a.sampler.params();
    params.validate()?;
    if let Some(p) = &a.qubo_out {
        let mut w = sink(Some(p))?;
        model.qubo.write_json(&mut w)?;
        finish(w)?;
    }
    if let Some(p) = &a.model_out {
        let mut w = sink(Some(p))?;
        model.description().write_json(&mut w)?;
        finish(w)?;
    }
    let set = solver.sample(&model.qubo, &params)?;
    if let Some(p) = &a.out {
        let mut w = sink(Some(p))?;
        set.write_json(&mut w)?;
        finish(w)?;
    }
    let best = set.best().ok_or_else(|| Failure::usage("solver returned no samples"))?;
    let decoded = model.decode(&best.bits)?;
    let labels = model.rates.labels();
    println!("solver: {solver}");
    println!("best energy: {}", best.energy);
    if !decoded.is_feasible() {
        println!("loop: {}", decoded.describe(labels));
        for v in &decoded.violations {
            println!("violation: {v}");
        }
        return Err(Failure::Infeasible);
    }
    let p = decoded.profitability.unwrap_or(1.0);
    let cycle = decoded.canonical_cycle().unwrap_or_default();
    println!("loop: {}, P={p:.5}", join_labels(&cycle, labels));
    if p <= 1.0 + PROFIT_EPS {
        println!("no profitable loop");
    }
    Ok(())
}

fn report_format(explicit: Option<&str>, out: Option<&Path>) -> Result<ReportFormat, Failure> {
    match explicit.map(str::to_ascii_lowercase).as_deref() {
        Some("csv") => Ok(ReportFormat::Csv),
        Some("json") => Ok(ReportFormat::Json),
        Some(other) => Err(Failure::usage(format!("unknown report format {other:?}"))),
        None => Ok(match out.map(RateFormat::from_path) {
            Some(RateFormat::Json) => ReportFormat::Json,
            _ => ReportFormat::Csv,
        }),
    }
}

fn cmd_bench(a: BenchArgs) -> Result<(), Failure> {
    let format = report_format(a.format.as_deref(), a.out.as_deref())?;
    let solvers = a.solvers.iter().map(|s| parse_solver(s)).collect::<Result<Vec<_>, _>>()?;
    if solvers.contains(&SolverKind::Exact) {
        return Err(Failure::usage("bench compares stochastic samplers; exact has no read order"));
    }
    if a.batches == 0 || a.num_reads.is_empty() || solvers.is_empty() {
        return Err(Failure::usage("need at least one solver, one read count and one batch"));
    }
    let model = build_model(&a.model)?;
    let (_, optimum) = ground_state(&model.qubo)?;
    let mut report = BenchReport::default();
    for solver in &solvers {
        for &reads in &a.num_reads {
            let params = SamplerParams { sweeps_per_read: a.sweeps, ..SamplerParams::with_reads(reads, a.seed) };
            report = report.merge(run_batches_with_optimum(solver, &model.qubo, &params, a.batches, optimum)?);
        }
    }
    let mut out = sink(a.out.as_deref())?;
    emit_report(&report, format, &mut out)?;
    finish(out)
}

fn cmd_timing(a: TimingArgs) -> Result<(), Failure> {
    if let Some(path) = &a.log {
        let means = aggregate_timing_log(&load_timing_log(open(path)?)?);
        let mut out = sink(a.out.as_deref())?;
        emit_timing_means(&means, &mut out)?;
        return finish(out);
    }
    if !(a.overhead.is_finite() && a.overhead >= 0.0) {
        return Err(Failure::usage(format!("overhead must be >= 0, got {}", a.overhead)));
    }
    if let Some(observed) = a.observed {
        if !(observed.is_finite() && observed >= 0.0) {
            return Err(Failure::usage(format!("observed time must be >= 0, got {observed}")));
        }
        println!("{}", with_overhead(observed, a.overhead));
        return Ok(());
    }
    let mut out = sink(a.out.as_deref())?;
    let line = |out: &mut Box<dyn Write>, s: String| writeln!(out, "{s}").map_err(|e| Failure::io("write", e));
    if a.reference {
        line(&mut out, "num_reads,qpu_access_time_us,measured_us,relative_error".into())?;
        for col in REFERENCE_TIMINGS {
            let t = qpu_access_time(&col.model(a.overhead), col.num_reads, a.include_overhead);
            let measured = col.qpu_access_time + if a.include_overhead { a.overhead } else { 0.0 };
            let rel = (t - measured).abs() / measured;
            line(&mut out, format!("{},{t},{measured},{rel:.6}", col.num_reads))?;
        }
    } else {
        let model = QpuTimingModel::new(a.programming, a.overhead, a.anneal, a.readout, a.delay)?;
        line(&mut out, "num_reads,qpu_access_time_us".into())?;
        for &r in &a.reads {
            line(&mut out, format!("{r},{}", qpu_access_time(&model, r, a.include_overhead)))?;
        }
    }
    finish(out)
}

fn cmd_oracle(a: OracleArgs) -> Result<(), Failure> {
    let rates = read_rates(&a.rates)?;
    let result = best_cycle_bruteforce(&rates, a.k)?;
    let labels = rates.labels();
    println!(
        "best loop (<= {} positions): {}, P={:.5}",
        a.k,
        join_labels(&result.best_cycle, labels),
        result.best_profit
    );
    println!("arbitrage within {} positions: {}", a.k, result.has_arbitrage);
    println!("arbitrage at any length (Bellman-Ford): {}", has_arbitrage_bellman_ford(&to_log_weights(&rates)));
    Ok(())
}
