//! Sweep harness: grids of (n, instance, noise) cells, flat-record exports,
//! and scaling fits over the results.
//!
//! Reruns with the same spec are byte-identical: cells execute in a fixed
//! order, every random stream derives from the spec's master seed, and timing
//! is only recorded when asked for.

use std::io::Write as IoWrite;
use std::path::Path;
use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::{estimate_success, SelectionRule, TrialConfig};
use crate::error::{Error, Result};
use crate::generate::{generate_hard, generate_ladder, generate_random, HardOptions};
use crate::instance::IsingInstance;
use crate::locking::{analyze_with_spectrum, trial_plan};
use crate::noise::{k_prime, KPrimeMode, NoiseDistribution, NoiseModel};
use crate::real::{fit_line, median};
use crate::rng::{derive_seed, rng_from, STREAM_BOOTSTRAP, STREAM_TRIALS};
use crate::spectrum::{enumerate_spectrum, Spectrum};
use crate::Energy;

/// Instance family swept over.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Hard,
    Random,
    Ladder,
}

/// How the decision threshold K of each cell is chosen.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KRule {
    /// `K = lambda_g + 1`: every instance is a YES instance with the ground
    /// manifold as its only solutions.
    GroundPlusOne,
    Fixed(Energy),
}

impl Default for KRule {
    fn default() -> Self {
        KRule::GroundPlusOne
    }
}

/// Trial settings applied to every cell. `trials = 0` skips simulation and
/// leaves the empirical columns null.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrialTemplate {
    pub rule: SelectionRule,
    pub trials: u64,
}

fn default_density() -> f64 {
    crate::generate::DEFAULT_DENSITY
}

fn default_d_max() -> u64 {
    4
}

fn default_max_attempts() -> u64 {
    10_000
}

/// Declarative sweep description, loadable from JSON.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub n_values: Vec<usize>,
    pub instances_per_n: usize,
    pub noise_grid: Vec<NoiseModel>,
    pub family: Family,
    #[serde(default = "default_density")]
    pub density: f64,
    /// Ground-degeneracy cap for the hard family.
    #[serde(default = "default_d_max")]
    pub d_max: u64,
    #[serde(default = "default_max_attempts")]
    pub max_attempts: u64,
    #[serde(default)]
    pub k_rule: KRule,
    pub trial: TrialTemplate,
    pub master_seed: u64,
    /// Off by default so reruns of a spec are byte-identical.
    #[serde(default)]
    pub record_timing: bool,
}

impl SweepSpec {
    fn validate(&self) -> Result<()> {
        if self.n_values.is_empty() {
            return Err(Error::InvalidParameter("n_values must be nonempty".into()));
        }
        if self.instances_per_n == 0 {
            return Err(Error::InvalidParameter("instances_per_n must be positive".into()));
        }
        if self.noise_grid.is_empty() {
            return Err(Error::InvalidParameter("noise_grid must be nonempty".into()));
        }
        for model in &self.noise_grid {
            model.validate()?;
        }
        Ok(())
    }
}

/// One sweep cell, flattened for JSONL/CSV export. Null columns mean the
/// quantity was not computed for this cell; `reason` says why when the cell
/// failed outright.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub n: usize,
    pub instance_index: usize,
    pub noise_index: usize,
    pub instance_seed: u64,
    pub sigma_eps: f64,
    pub sigma_kappa: f64,
    pub distribution: NoiseDistribution,
    pub lambda_g: Option<Energy>,
    pub d_g: Option<u64>,
    pub k: Option<Energy>,
    pub k_prime_linear: Option<f64>,
    pub k_prime_quadrature: Option<f64>,
    pub size_y: Option<u64>,
    pub size_z: Option<u64>,
    pub p_s: Option<f64>,
    pub gaussian_pz0: Option<f64>,
    /// Envelope-channel success estimate `|Y| / (|Y| + gaussian_pz0)`.
    pub p_s_envelope: Option<f64>,
    pub p_hat: Option<f64>,
    pub p_hat_stderr: Option<f64>,
    /// Trials needed for 99% overall success at the analytic `p_s`.
    pub tau_99: Option<u64>,
    pub wall_ms: Option<u64>,
    pub reason: Option<String>,
}

impl SweepRecord {
    fn blank(
        n: usize,
        instance_index: usize,
        noise_index: usize,
        instance_seed: u64,
        model: &NoiseModel,
    ) -> Self {
        SweepRecord {
            n,
            instance_index,
            noise_index,
            instance_seed,
            sigma_eps: model.sigma_eps,
            sigma_kappa: model.sigma_kappa,
            distribution: model.distribution,
            lambda_g: None,
            d_g: None,
            k: None,
            k_prime_linear: None,
            k_prime_quadrature: None,
            size_y: None,
            size_z: None,
            p_s: None,
            gaussian_pz0: None,
            p_s_envelope: None,
            p_hat: None,
            p_hat_stderr: None,
            tau_99: None,
            wall_ms: None,
            reason: None,
        }
    }
}

fn build_instance(
    spec: &SweepSpec,
    n: usize,
    seed: u64,
) -> Result<(IsingInstance, Spectrum, Option<Energy>)> {
    match spec.family {
        Family::Hard => {
            let opts = HardOptions {
                density: spec.density,
                d_max: spec.d_max,
                max_attempts: spec.max_attempts,
            };
            let hard = generate_hard(n, seed, &opts)?;
            Ok((hard.decision.instance, hard.spectrum, Some(hard.decision.k)))
        }
        Family::Random => {
            let inst = generate_random(n, seed, spec.density)?;
            let spectrum = enumerate_spectrum(&inst)?;
            Ok((inst, spectrum, None))
        }
        Family::Ladder => {
            let inst = generate_ladder(n, seed)?;
            let spectrum = enumerate_spectrum(&inst)?;
            Ok((inst, spectrum, None))
        }
    }
}

fn rule_width(rule: &SelectionRule) -> crate::noise::KPrimeSpec {
    match rule {
        SelectionRule::PaperWindow { k_prime } => *k_prime,
        SelectionRule::PerturbedThreshold { width } => *width,
    }
}

/// Runs the sweep, streaming each finished record as one JSONL line to
/// `sink` (flushed per line so partial output survives interruption), and
/// returns all records.
pub fn run_sweep_write(spec: &SweepSpec, sink: &mut dyn IoWrite) -> Result<Vec<SweepRecord>> {
    spec.validate()?;
    let mut records =
        Vec::with_capacity(spec.n_values.len() * spec.instances_per_n * spec.noise_grid.len());
    for &n in &spec.n_values {
        let n_seed = derive_seed(spec.master_seed, n as u64);
        for idx in 0..spec.instances_per_n {
            let inst_seed = derive_seed(n_seed, idx as u64);
            let built = build_instance(spec, n, inst_seed);
            for (noise_idx, model) in spec.noise_grid.iter().enumerate() {
                let started = Instant::now();
                let mut rec = SweepRecord::blank(n, idx, noise_idx, inst_seed, model);
                match &built {
                    Ok((inst, spectrum, hard_k)) => {
                        let k = match spec.k_rule {
                            KRule::GroundPlusOne => hard_k.unwrap_or(spectrum.lambda_g() + 1),
                            KRule::Fixed(k) => k,
                        };
                        fill_cell(&mut rec, spec, inst, spectrum, k, noise_idx, model);
                    }
                    Err(e) => rec.reason = Some(e.to_string()),
                }
                if spec.record_timing {
                    rec.wall_ms = Some(started.elapsed().as_millis() as u64);
                }
                writeln!(sink, "{}", serde_json::to_string(&rec).map_err(Error::from)?)?;
                sink.flush()?;
                records.push(rec);
            }
        }
    }
    Ok(records)
}

fn fill_cell(
    rec: &mut SweepRecord,
    spec: &SweepSpec,
    inst: &IsingInstance,
    spectrum: &Spectrum,
    k: Energy,
    noise_idx: usize,
    model: &NoiseModel,
) {
    rec.lambda_g = Some(spectrum.lambda_g());
    rec.d_g = Some(spectrum.d_g());
    rec.k = Some(k);
    let support = Some((inst.coupling_count(), inst.field_count()));
    rec.k_prime_linear = Some(k_prime(inst.n(), model, KPrimeMode::PaperLinear, support));
    rec.k_prime_quadrature = Some(k_prime(inst.n(), model, KPrimeMode::CltQuadrature, support));
    let width = rule_width(&spec.trial.rule);
    match analyze_with_spectrum(inst, spectrum, k, model, width) {
        Ok(a) => {
            rec.size_y = Some(a.size_y);
            rec.size_z = Some(a.size_z);
            rec.p_s = Some(a.p_s);
            rec.gaussian_pz0 = Some(a.gaussian_pz0);
            let denom = a.size_y as f64 + a.gaussian_pz0;
            rec.p_s_envelope = (denom > 0.0).then(|| a.size_y as f64 / denom);
            rec.tau_99 = trial_plan(a.p_s, 0.99).ok().map(|p| p.tau);
        }
        Err(e) => {
            rec.reason = Some(e.to_string());
            return;
        }
    }
    if spec.trial.trials > 0 {
        let cfg = TrialConfig { k, model: *model, rule: spec.trial.rule };
        let cell_seed = derive_seed(derive_seed(rec.instance_seed, STREAM_TRIALS), noise_idx as u64);
        match estimate_success(inst, &cfg, spec.trial.trials, cell_seed) {
            Ok(est) => {
                rec.p_hat = Some(est.p_hat);
                rec.p_hat_stderr = Some(est.stderr);
            }
            Err(e) => rec.reason = Some(e.to_string()),
        }
    }
}

/// As [`run_sweep_write`] without streaming output.
pub fn run_sweep(spec: &SweepSpec) -> Result<Vec<SweepRecord>> {
    run_sweep_write(spec, &mut std::io::sink())
}

/// Which per-cell success column a decay fit reads.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FitColumn {
    /// Exact `p_s` from the enumerated spectrum.
    Analytic,
    /// Gaussian-envelope estimate `p_s_envelope`.
    Envelope,
    /// Simulated `p_hat`.
    Empirical,
}

impl FitColumn {
    fn pick(&self, rec: &SweepRecord) -> Option<f64> {
        match self {
            FitColumn::Analytic => rec.p_s,
            FitColumn::Envelope => rec.p_s_envelope,
            FitColumn::Empirical => rec.p_hat,
        }
    }
}

/// Exponential-decay fit of a success column: `ln median(p) ~ slope * n + b`.
#[derive(Clone, Debug, Serialize)]
pub struct DecayFit {
    pub column: FitColumn,
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// Bootstrap 95% interval for the slope; `None` when `resamples = 0`.
    pub slope_ci: Option<(f64, f64)>,
    /// Per-n medians of the fitted column, ascending in n.
    pub medians: Vec<(usize, f64)>,
    /// Cells dropped because the column was null or not positive.
    pub excluded: usize,
    pub resamples: u64,
}

fn fit_medians(groups: &[(usize, Vec<f64>)]) -> Option<(f64, f64, f64, Vec<(usize, f64)>)> {
    let meds: Vec<(usize, f64)> = groups
        .iter()
        .filter_map(|(n, vals)| median(vals).map(|m| (*n, m)))
        .collect();
    let xs: Vec<f64> = meds.iter().map(|&(n, _)| n as f64).collect();
    let ys: Vec<f64> = meds.iter().map(|&(_, m)| m.ln()).collect();
    fit_line(&xs, &ys).map(|(s, b, r2)| (s, b, r2, meds))
}

/// Fits the per-n decay of a success column across sweep records. Medians are
/// taken per n over cells with a positive value of the column; the fit needs
/// at least four distinct n. A positive `resamples` adds a seeded bootstrap
/// percentile interval for the slope (resampling cells within each n).
pub fn fit_decay(
    records: &[SweepRecord],
    column: FitColumn,
    resamples: u64,
    seed: u64,
) -> Result<DecayFit> {
    let mut ns: Vec<usize> = records.iter().map(|r| r.n).collect();
    ns.sort_unstable();
    ns.dedup();
    let mut excluded = 0usize;
    let mut groups: Vec<(usize, Vec<f64>)> = Vec::new();
    for &n in &ns {
        let vals: Vec<f64> = records
            .iter()
            .filter(|r| r.n == n)
            .filter_map(|r| match column.pick(r) {
                Some(v) if v > 0.0 && v.is_finite() => Some(v),
                _ => {
                    excluded += 1;
                    None
                }
            })
            .collect();
        if !vals.is_empty() {
            groups.push((n, vals));
        }
    }
    if groups.len() < 4 {
        return Err(Error::DegenerateFit(format!(
            "need at least 4 distinct n with positive values, got {}",
            groups.len()
        )));
    }
    let (slope, intercept, r_squared, medians) = fit_medians(&groups)
        .ok_or_else(|| Error::DegenerateFit("median fit is singular".into()))?;
    let slope_ci = (resamples > 0).then(|| {
        let boot_seed = derive_seed(seed, STREAM_BOOTSTRAP);
        let mut slopes: Vec<f64> = (0..resamples)
            .filter_map(|r| {
                let mut rng = rng_from(derive_seed(boot_seed, r));
                let resampled: Vec<(usize, Vec<f64>)> = groups
                    .iter()
                    .map(|(n, vals)| {
                        let draw: Vec<f64> =
                            (0..vals.len()).map(|_| vals[rng.gen_range(0..vals.len())]).collect();
                        (*n, draw)
                    })
                    .collect();
                fit_medians(&resampled).map(|(s, _, _, _)| s)
            })
            .collect();
        slopes.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let rank = |q: f64| slopes[((slopes.len() - 1) as f64 * q).round() as usize];
        (rank(0.025), rank(0.975))
    });
    Ok(DecayFit { column, slope, intercept, r_squared, slope_ci, medians, excluded, resamples })
}

/// Sorts records into the canonical export order.
pub fn sort_records(records: &mut [SweepRecord]) {
    records.sort_by_key(|r| (r.n, r.instance_index, r.noise_index));
}

/// Writes records as newline-terminated JSONL.
pub fn write_jsonl(records: &[SweepRecord], path: &Path) -> Result<()> {
    let mut out = String::new();
    for rec in records {
        out.push_str(&serde_json::to_string(rec)?);
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Reads JSONL records. An unterminated final line (an interrupted write) is
/// ignored; malformed complete lines are errors.
pub fn read_jsonl(path: &Path) -> Result<Vec<SweepRecord>> {
    let content = std::fs::read_to_string(path)?;
    let mut lines: Vec<&str> = content.split('\n').collect();
    lines.pop(); // empty when terminated, partial garbage when truncated
    lines
        .into_iter()
        .filter(|l| !l.is_empty())
        .map(|l| serde_json::from_str(l).map_err(|e| Error::Parse(format!("bad record: {e}"))))
        .collect()
}

/// Writes records as CSV with one column per record field.
pub fn write_csv(records: &[SweepRecord], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Parse(e.to_string()))?;
    for rec in records {
        w.serialize(rec).map_err(|e| Error::Parse(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// Reads records from CSV written by [`write_csv`].
pub fn read_csv(path: &Path) -> Result<Vec<SweepRecord>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::Parse(e.to_string()))?;
    r.deserialize()
        .map(|row| row.map_err(|e| Error::Parse(format!("bad record: {e}"))))
        .collect()
}
