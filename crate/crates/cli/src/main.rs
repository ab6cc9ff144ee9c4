//! `cohising`: command-line surface over the solver-model toolkit.
//!
//! Machine-readable JSON goes to stdout; logs and human summaries go to
//! stderr. Decision subcommands exit 0 for YES, 1 for NO, 2 for errors.
//! Every randomized subcommand either takes an explicit seed or logs the
//! auto-generated one.

use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use cohising::dynamics::{estimate_success, SelectionRule, TrialConfig};
use cohising::generate::{generate_hard, generate_ladder, generate_random, HardOptions};
use cohising::harness::{
    fit_decay, read_csv, read_jsonl, run_sweep_write, sort_records, write_csv, FitColumn,
    SweepSpec,
};
use cohising::locking::{analyze_with_spectrum, trial_plan};
use cohising::noise::{k_prime, KPrimeMode, KPrimeSpec, NoiseDistribution, NoiseModel};
use cohising::spectrum::{
    branch_and_bound_ground, decide, enumerate_spectrum, ground_states_with, spectrum_stats,
};
use cohising::{DecisionInstance, Energy, IsingInstance, SpinConfig};

#[derive(Parser)]
#[command(name = "cohising", version, about = "Exact-spectrum Ising solver-model toolkit")]
struct Cli {
    /// Worker threads for enumeration (default: COHISING_THREADS or all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate an instance file.
    Gen(GenArgs),
    /// Find the ground energy and a ground configuration.
    Solve(SolveArgs),
    /// Decide whether an eigenvalue below K exists.
    Decide(DecideArgs),
    /// Report the exact spectrum.
    Spectrum(SpectrumArgs),
    /// Analytic locking-band analysis at a noise point.
    Locking(LockingArgs),
    /// Stochastic mode-selection trials.
    Simulate(SimulateArgs),
    /// Run a sweep spec over an instance grid.
    Sweep(SweepArgs),
    /// Fit the per-n decay of a success column in sweep output.
    Fit(FitArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum FamilyArg {
    Random,
    Ladder,
    Hard,
}

#[derive(Clone, Copy, ValueEnum)]
enum DistArg {
    Gaussian,
    Uniform,
}

impl From<DistArg> for NoiseDistribution {
    fn from(d: DistArg) -> Self {
        match d {
            DistArg::Gaussian => NoiseDistribution::Gaussian,
            DistArg::Uniform => NoiseDistribution::Uniform,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    PaperLinear,
    CltQuadrature,
}

impl From<ModeArg> for KPrimeMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::PaperLinear => KPrimeMode::PaperLinear,
            ModeArg::CltQuadrature => KPrimeMode::CltQuadrature,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum RuleArg {
    PaperWindow,
    PerturbedThreshold,
}

#[derive(Clone, Copy, ValueEnum)]
enum ColumnArg {
    Analytic,
    Envelope,
    Empirical,
}

/// Noise-model flags shared by analysis subcommands.
#[derive(Args)]
struct NoiseArgs {
    /// Coupler noise standard deviation.
    #[arg(long, default_value_t = 0.0)]
    sigma_eps: f64,
    /// Field noise standard deviation.
    #[arg(long, default_value_t = 0.0)]
    sigma_kappa: f64,
    #[arg(long, value_enum, default_value_t = DistArg::Gaussian)]
    distribution: DistArg,
}

impl NoiseArgs {
    fn model(&self) -> Result<NoiseModel> {
        Ok(NoiseModel::new(self.sigma_eps, self.sigma_kappa, self.distribution.into())?)
    }
}

/// Band-width flags: a fixed K' wins over a derived mode.
#[derive(Args)]
struct WidthArgs {
    /// Fixed band width K' (overrides --mode).
    #[arg(long, allow_hyphen_values = true)]
    k_prime: Option<f64>,
    #[arg(long, value_enum, default_value_t = ModeArg::PaperLinear)]
    mode: ModeArg,
}

impl WidthArgs {
    fn spec(&self) -> KPrimeSpec {
        match self.k_prime {
            Some(v) => KPrimeSpec::Fixed(v),
            None => KPrimeSpec::Mode(self.mode.into()),
        }
    }
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    n: usize,
    #[arg(long, value_enum)]
    family: FamilyArg,
    /// Generator seed; auto-generated and logged when omitted.
    #[arg(long)]
    seed: Option<u64>,
    /// Coupling density for random/hard families.
    #[arg(long, default_value_t = cohising::generate::DEFAULT_DENSITY)]
    density: f64,
    /// Ground-degeneracy cap for the hard family.
    #[arg(long, default_value_t = 4)]
    d_max: u64,
    #[arg(long, default_value_t = 10_000)]
    max_attempts: u64,
    /// Output path (stdout when omitted).
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Enumerate,
    Bnb,
    Both,
}

#[derive(Args)]
struct SolveArgs {
    input: PathBuf,
    #[arg(long, value_enum, default_value_t = MethodArg::Enumerate)]
    method: MethodArg,
    /// Node budget for branch-and-bound.
    #[arg(long, default_value_t = u64::MAX)]
    node_budget: u64,
}

#[derive(Args)]
struct DecideArgs {
    input: PathBuf,
    /// Decision threshold; overrides any K stored in the file.
    #[arg(long = "K", allow_hyphen_values = true)]
    k: Option<Energy>,
}

#[derive(Args)]
struct SpectrumArgs {
    input: PathBuf,
    /// Also write the level histogram as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct LockingArgs {
    input: PathBuf,
    #[arg(long = "K", allow_hyphen_values = true)]
    k: Option<Energy>,
    #[command(flatten)]
    noise: NoiseArgs,
    #[command(flatten)]
    width: WidthArgs,
}

#[derive(Args)]
struct SimulateArgs {
    input: PathBuf,
    #[arg(long = "K", allow_hyphen_values = true)]
    k: Option<Energy>,
    #[command(flatten)]
    noise: NoiseArgs,
    #[command(flatten)]
    width: WidthArgs,
    #[arg(long, value_enum, default_value_t = RuleArg::PaperWindow)]
    rule: RuleArg,
    #[arg(long, default_value_t = 1000)]
    trials: u64,
    /// Master seed; auto-generated and logged when omitted.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct SweepArgs {
    /// Sweep spec file (JSON mirroring the SweepSpec schema).
    #[arg(long)]
    spec: PathBuf,
    /// JSONL output path (streams to stdout when omitted).
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Also write records as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Exit 1 if any cell failed.
    #[arg(long)]
    strict: bool,
    /// Record per-cell wall time (breaks byte-identical reruns).
    #[arg(long)]
    timing: bool,
}

#[derive(Args)]
struct FitArgs {
    /// Sweep records: .jsonl, or .csv by extension.
    input: PathBuf,
    #[arg(long, value_enum, default_value_t = ColumnArg::Analytic)]
    column: ColumnArg,
    /// Bootstrap resamples for the slope interval (0 disables).
    #[arg(long, default_value_t = 200)]
    resamples: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Confidence level for the per-n trial budgets.
    #[arg(long, default_value_t = 0.99)]
    confidence: f64,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let threads = cli.threads.or_else(|| {
        std::env::var("COHISING_THREADS").ok().and_then(|v| v.parse().ok())
    });
    if let Some(t) = threads {
        // Fails only if a pool already exists, which keeps that pool.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
    match run(cli.cmd) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cmd: Cmd) -> Result<u8> {
    match cmd {
        Cmd::Gen(a) => cmd_gen(a),
        Cmd::Solve(a) => cmd_solve(a),
        Cmd::Decide(a) => cmd_decide(a),
        Cmd::Spectrum(a) => cmd_spectrum(a),
        Cmd::Locking(a) => cmd_locking(a),
        Cmd::Simulate(a) => cmd_simulate(a),
        Cmd::Sweep(a) => cmd_sweep(a),
        Cmd::Fit(a) => cmd_fit(a),
    }
}

/// Explicit seed, or a fresh one logged to stderr.
fn resolve_seed(seed: Option<u64>) -> u64 {
    seed.unwrap_or_else(|| {
        let s: u64 = rand::random();
        eprintln!("seed: {s} (auto-generated)");
        s
    })
}

fn load_instance(path: &Path) -> Result<(IsingInstance, Option<Energy>)> {
    IsingInstance::read_file(path).with_context(|| format!("reading {}", path.display()))
}

/// K precedence: flag beats the file's stored K; neither is an error.
fn resolve_k(flag: Option<Energy>, file_k: Option<Energy>) -> Result<Energy> {
    flag.or(file_k)
        .context("no decision threshold: pass --K or use a file that stores one")
}

fn witness_json(w: &SpinConfig) -> serde_json::Value {
    json!({"bits": w.bits(), "spins": w.spins_string()})
}

fn print_json(v: &serde_json::Value) -> Result<()> {
    let mut out = std::io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, v)?;
    out.write_all(b"\n")?;
    Ok(())
}

fn cmd_gen(a: GenArgs) -> Result<u8> {
    let seed = resolve_seed(a.seed);
    let (inst, k, hard_summary) = match a.family {
        FamilyArg::Random => (generate_random(a.n, seed, a.density)?, None, None),
        FamilyArg::Ladder => (generate_ladder(a.n, seed)?, None, None),
        FamilyArg::Hard => {
            let opts = HardOptions {
                density: a.density,
                d_max: a.d_max,
                max_attempts: a.max_attempts,
            };
            let hard = generate_hard(a.n, seed, &opts)?;
            let summary = json!({
                "lambda_g": hard.lambda_g(),
                "d_g": hard.d_g(),
                "K": hard.decision.k,
                "attempts": hard.attempts,
                "seed": seed,
            });
            (hard.decision.instance, Some(hard.decision.k), Some(summary))
        }
    };
    match &a.output {
        Some(path) => {
            inst.write_file(path, k)?;
            eprintln!("wrote {}", path.display());
            if let Some(summary) = hard_summary {
                print_json(&summary)?;
            }
        }
        None => {
            // Instance JSON owns stdout; the hard summary goes to the log.
            print!("{}", inst.to_json(k));
            if let Some(s) = hard_summary {
                eprintln!(
                    "hard instance: lambda_g={} d_g={} K={} attempts={}",
                    s["lambda_g"], s["d_g"], s["K"], s["attempts"]
                );
            }
        }
    }
    Ok(0)
}

fn cmd_solve(a: SolveArgs) -> Result<u8> {
    let (inst, _) = load_instance(&a.input)?;
    let enumerate = |inst: &IsingInstance| -> Result<serde_json::Value> {
        let spectrum = enumerate_spectrum(inst)?;
        let witness = ground_states_with(inst, &spectrum, 1)?.remove(0);
        Ok(json!({
            "lambda_g": spectrum.lambda_g(),
            "d_g": spectrum.d_g(),
            "witness": witness_json(&witness),
        }))
    };
    let bnb = |inst: &IsingInstance| -> Result<serde_json::Value> {
        let out = branch_and_bound_ground(inst, a.node_budget)?;
        Ok(json!({
            "lambda_g": out.lambda_g,
            "witness": witness_json(&out.witness),
            "optimal": out.optimal,
            "nodes": out.nodes,
        }))
    };
    let report = match a.method {
        MethodArg::Enumerate => {
            let mut v = enumerate(&inst)?;
            v["method"] = "enumerate".into();
            v
        }
        MethodArg::Bnb => {
            let mut v = bnb(&inst)?;
            v["method"] = "bnb".into();
            v
        }
        MethodArg::Both => {
            let e = enumerate(&inst)?;
            let b = bnb(&inst)?;
            if b["optimal"] == json!(true) && e["lambda_g"] != b["lambda_g"] {
                bail!(
                    "solver disagreement: enumerate {} vs branch-and-bound {}",
                    e["lambda_g"], b["lambda_g"]
                );
            }
            json!({"method": "both", "enumerate": e, "bnb": b})
        }
    };
    print_json(&report)?;
    Ok(0)
}

fn cmd_decide(a: DecideArgs) -> Result<u8> {
    let (inst, file_k) = load_instance(&a.input)?;
    let k = resolve_k(a.k, file_k)?;
    let d = decide(&DecisionInstance { instance: inst, k })?;
    let report = json!({
        "answer": if d.yes { "YES" } else { "NO" },
        "K": k,
        "lambda_g": d.lambda_g,
        "witness": d.witness.as_ref().map(witness_json),
    });
    print_json(&report)?;
    Ok(if d.yes { 0 } else { 1 })
}

fn cmd_spectrum(a: SpectrumArgs) -> Result<u8> {
    let (inst, _) = load_instance(&a.input)?;
    let spectrum = enumerate_spectrum(&inst)?;
    let stats = spectrum_stats(&spectrum);
    if let Some(path) = &a.csv {
        let mut out = String::from("energy,degeneracy\n");
        for &(l, d) in spectrum.levels() {
            out.push_str(&format!("{l},{d}\n"));
        }
        std::fs::write(path, out).with_context(|| format!("writing {}", path.display()))?;
        eprintln!("wrote {}", path.display());
    }
    let report = json!({
        "n": spectrum.n(),
        "terms": inst.term_count(),
        "lambda_g": spectrum.lambda_g(),
        "d_g": spectrum.d_g(),
        "mean": stats.mean,
        "std_dev": stats.std_dev,
        "c_g": stats.c_g,
        "ks_normal": stats.ks_normal,
        "distinct_levels": spectrum.levels().len(),
        "levels": spectrum.levels(),
    });
    print_json(&report)?;
    Ok(0)
}

fn cmd_locking(a: LockingArgs) -> Result<u8> {
    let (inst, file_k) = load_instance(&a.input)?;
    let k = resolve_k(a.k, file_k)?;
    let model = a.noise.model()?;
    let spectrum = enumerate_spectrum(&inst)?;
    let analysis = analyze_with_spectrum(&inst, &spectrum, k, &model, a.width.spec())?;
    let support = Some((inst.coupling_count(), inst.field_count()));
    let report = json!({
        "analysis": analysis,
        "k_prime_linear": k_prime(inst.n(), &model, KPrimeMode::PaperLinear, support),
        "k_prime_quadrature": k_prime(inst.n(), &model, KPrimeMode::CltQuadrature, support),
        "tau_99": trial_plan(analysis.p_s, 0.99).ok().map(|p| p.tau),
    });
    print_json(&report)?;
    Ok(0)
}

fn cmd_simulate(a: SimulateArgs) -> Result<u8> {
    let (inst, file_k) = load_instance(&a.input)?;
    let k = resolve_k(a.k, file_k)?;
    let model = a.noise.model()?;
    let seed = resolve_seed(a.seed);
    let width = a.width.spec();
    let (rule, rule_name) = match a.rule {
        RuleArg::PaperWindow => (SelectionRule::PaperWindow { k_prime: width }, "paper-window"),
        RuleArg::PerturbedThreshold => {
            (SelectionRule::PerturbedThreshold { width }, "perturbed-threshold")
        }
    };
    let cfg = TrialConfig { k, model, rule };
    let est = estimate_success(&inst, &cfg, a.trials, seed)?;
    let spectrum = enumerate_spectrum(&inst)?;
    let analysis = analyze_with_spectrum(&inst, &spectrum, k, &model, width)?;
    let report = json!({
        "p_hat": est.p_hat,
        "stderr": est.stderr,
        "successes": est.successes,
        "trials": est.trials,
        "seed": seed,
        "rule": rule_name,
        "analytic_p_s": analysis.p_s,
    });
    print_json(&report)?;
    Ok(0)
}

fn cmd_sweep(a: SweepArgs) -> Result<u8> {
    let text = std::fs::read_to_string(&a.spec)
        .with_context(|| format!("reading {}", a.spec.display()))?;
    let mut spec: SweepSpec = serde_json::from_str(&text)
        .with_context(|| format!("parsing {}", a.spec.display()))?;
    if a.timing {
        spec.record_timing = true;
    }
    let mut records = match &a.output {
        Some(path) => {
            let file = std::fs::File::create(path)
                .with_context(|| format!("creating {}", path.display()))?;
            let mut sink = std::io::BufWriter::new(file);
            let records = run_sweep_write(&spec, &mut sink)?;
            eprintln!("wrote {} ({} records)", path.display(), records.len());
            records
        }
        None => run_sweep_write(&spec, &mut std::io::stdout().lock())?,
    };
    sort_records(&mut records);
    if let Some(path) = &a.csv {
        write_csv(&records, path)?;
        eprintln!("wrote {}", path.display());
    }
    let failed = records.iter().filter(|r| r.reason.is_some()).count();
    if failed > 0 {
        eprintln!("{failed} of {} cells failed", records.len());
    }
    Ok(if a.strict && failed > 0 { 1 } else { 0 })
}

fn cmd_fit(a: FitArgs) -> Result<u8> {
    let records = if a.input.extension().is_some_and(|e| e == "csv") {
        read_csv(&a.input)?
    } else {
        read_jsonl(&a.input)?
    };
    let column = match a.column {
        ColumnArg::Analytic => FitColumn::Analytic,
        ColumnArg::Envelope => FitColumn::Envelope,
        ColumnArg::Empirical => FitColumn::Empirical,
    };
    let fit = fit_decay(&records, column, a.resamples, a.seed)?;
    let rows: Vec<serde_json::Value> = fit
        .medians
        .iter()
        .map(|&(n, med)| {
            let tau = trial_plan(med, a.confidence).ok().map(|p| p.tau);
            json!({"n": n, "median": med, "tau": tau})
        })
        .collect();

    // Human-readable summary on the log stream.
    match fit.slope_ci {
        Some((lo, hi)) => eprintln!(
            "slope {:.4} (95% CI [{lo:.4}, {hi:.4}]), r^2 {:.4}",
            fit.slope, fit.r_squared
        ),
        None => eprintln!("slope {:.4}, r^2 {:.4}", fit.slope, fit.r_squared),
    }
    eprintln!("{:>4}  {:>12}  {:>12}", "n", "median", format!("tau({:.0}%)", a.confidence * 100.0));
    for row in &rows {
        let tau = row["tau"]
            .as_u64()
            .map_or_else(|| "-".to_string(), |t| t.to_string());
        eprintln!("{:>4}  {:>12.6e}  {:>12}", row["n"].as_u64().unwrap(), row["median"].as_f64().unwrap(), tau);
    }

    let report = json!({
        "column": fit.column,
        "slope": fit.slope,
        "intercept": fit.intercept,
        "r_squared": fit.r_squared,
        "slope_ci": fit.slope_ci,
        "resamples": fit.resamples,
        "excluded": fit.excluded,
        "rows": rows,
    });
    print_json(&report)?;
    Ok(0)
}
