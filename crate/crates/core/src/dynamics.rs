//! Stochastic mode-selection trials against exact spectra.
//!
//! A trial models one power-up of the network: some set of configurations ends
//! up inside the locking band, and the surviving mode is uniform over that set
//! (the model gives every locked mode equal escape probability). Success means
//! the survivor is a true solution, i.e. its exact energy is below K.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::gray::{energy_tables, walk2_range, GrayTables};
use crate::instance::{IsingInstance, SpinConfig};
use crate::noise::{sample_noise, shift_tables, KPrimeSpec, NoiseModel};
use crate::rng::{derive_seed, rng_from, STREAM_NOISE, STREAM_SELECT};
use crate::spectrum::{enumerate_spectrum, Spectrum};
use crate::Energy;

/// Largest locked set materialized into an index; beyond this the paper-window
/// rule streams per trial instead.
const MATERIALIZE_CAP: u64 = 1 << 22;

/// How the locked set of one trial is formed.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionRule {
    /// Deterministic band on true energies: locked means `E <= K + K'`.
    /// Noise enters only through the width K'.
    PaperWindow { k_prime: KPrimeSpec },
    /// Fresh noise draw per trial; locked means the perturbed energy lies
    /// within `width` of the perturbed minimum.
    PerturbedThreshold { width: KPrimeSpec },
}

/// Configuration of a trial experiment.
#[derive(Clone, Debug)]
pub struct TrialConfig {
    pub k: Energy,
    pub model: NoiseModel,
    pub rule: SelectionRule,
}

/// One trial's outcome.
#[derive(Clone, Debug)]
pub struct TrialOutcome {
    pub chosen: SpinConfig,
    pub true_energy: Energy,
    /// True energy below K: the survivor certifies a YES answer.
    pub success: bool,
    /// Number of locked configurations the survivor was drawn from.
    pub locked: u64,
    /// Seed of the noise draw (`None` for the noiseless paper-window rule).
    pub draw_seed: Option<u64>,
}

/// Aggregate of repeated trials.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct SuccessEstimate {
    pub p_hat: f64,
    pub stderr: f64,
    pub successes: u64,
    pub trials: u64,
}

/// Outcome of a repeat-until-success run.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct RepeatedOutcome {
    pub found: bool,
    pub trials_used: u64,
}

enum Prepared {
    Paper {
        /// Locked count `|{E <= v}|`.
        total: u64,
        v: f64,
        /// Energies of the locked configurations in walk order, when small
        /// enough to hold.
        index: Option<LockedIndex>,
    },
    Perturbed { width: f64 },
}

struct LockedIndex {
    bits: Vec<u64>,
    energy: Vec<Energy>,
}

/// Reusable trial state: spectrum and locked-set index are computed once, so
/// repeated trials cost O(1) under the paper-window rule and O(2^n) walks
/// under the perturbed-threshold rule.
pub struct TrialEngine<'a> {
    inst: &'a IsingInstance,
    k: Energy,
    model: NoiseModel,
    spectrum: Spectrum,
    tables: GrayTables<i64>,
    prepared: Prepared,
}

impl<'a> TrialEngine<'a> {
    pub fn new(inst: &'a IsingInstance, cfg: &TrialConfig) -> Result<Self> {
        cfg.model.validate()?;
        let spectrum = enumerate_spectrum(inst)?;
        let tables = energy_tables(inst);
        let support = Some((inst.coupling_count(), inst.field_count()));
        let prepared = match cfg.rule {
            SelectionRule::PaperWindow { k_prime } => {
                let kp = k_prime.resolve(inst.n(), &cfg.model, support);
                if !(kp >= 0.0 && kp.is_finite()) {
                    return Err(Error::InvalidParameter(format!(
                        "resolved band width must be finite and nonnegative, got {kp}"
                    )));
                }
                let v = cfg.k as f64 + kp;
                let total: u64 = spectrum
                    .levels()
                    .iter()
                    .filter(|&&(l, _)| (l as f64) <= v)
                    .map(|&(_, d)| d)
                    .sum();
                if total == 0 {
                    return Err(Error::EmptyLockedSet);
                }
                let index = (total <= MATERIALIZE_CAP).then(|| {
                    let mut bits = Vec::with_capacity(total as usize);
                    let mut energy = Vec::with_capacity(total as usize);
                    tables.walk_range(0, 1u64 << inst.n(), |b, e| {
                        if (e as f64) <= v {
                            bits.push(b);
                            energy.push(e);
                        }
                    });
                    LockedIndex { bits, energy }
                });
                Prepared::Paper { total, v, index }
            }
            SelectionRule::PerturbedThreshold { width } => {
                let w = width.resolve(inst.n(), &cfg.model, support);
                if !(w >= 0.0 && w.is_finite()) {
                    return Err(Error::InvalidParameter(format!(
                        "resolved band width must be finite and nonnegative, got {w}"
                    )));
                }
                Prepared::Perturbed { width: w }
            }
        };
        Ok(TrialEngine { inst, k: cfg.k, model: cfg.model, spectrum, tables, prepared })
    }

    pub fn spectrum(&self) -> &Spectrum {
        &self.spectrum
    }

    /// Runs one trial. All randomness derives from `trial_seed`.
    pub fn run(&self, trial_seed: u64) -> Result<TrialOutcome> {
        let mut select = rng_from(derive_seed(trial_seed, STREAM_SELECT));
        let n = self.inst.n();
        match &self.prepared {
            Prepared::Paper { total, v, index } => {
                let pick = select.gen_range(0..*total);
                let (bits, e) = match index {
                    Some(ix) => (ix.bits[pick as usize], ix.energy[pick as usize]),
                    None => {
                        let mut seen = 0u64;
                        let mut found = None;
                        // Stream the walk until the pick-th locked config.
                        self.tables.walk_range(0, 1u64 << n, |b, e| {
                            if found.is_none() && (e as f64) <= *v {
                                if seen == pick {
                                    found = Some((b, e));
                                }
                                seen += 1;
                            }
                        });
                        found.expect("pick below counted total")
                    }
                };
                Ok(TrialOutcome {
                    chosen: SpinConfig::new(bits, n)?,
                    true_energy: e,
                    success: e < self.k,
                    locked: *total,
                    draw_seed: None,
                })
            }
            Prepared::Perturbed { width } => {
                let noise_seed = derive_seed(trial_seed, STREAM_NOISE);
                let draw = sample_noise(self.inst, &self.model, noise_seed)?;
                let shift = shift_tables(self.inst, &draw);
                let end = 1u64 << n;

                let mut min = f64::INFINITY;
                walk2_range(&self.tables, &shift, 0, end, |_, e, s| {
                    let v = e as f64 + s;
                    if v < min {
                        min = v;
                    }
                });
                let threshold = min + width;
                let mut locked = 0u64;
                walk2_range(&self.tables, &shift, 0, end, |_, e, s| {
                    if e as f64 + s <= threshold {
                        locked += 1;
                    }
                });
                let pick = select.gen_range(0..locked);
                let mut seen = 0u64;
                let mut found = None;
                walk2_range(&self.tables, &shift, 0, end, |b, e, s| {
                    if found.is_none() && e as f64 + s <= threshold {
                        if seen == pick {
                            found = Some((b, e));
                        }
                        seen += 1;
                    }
                });
                let (bits, e) = found.expect("pick below counted total");
                Ok(TrialOutcome {
                    chosen: SpinConfig::new(bits, n)?,
                    true_energy: e,
                    success: e < self.k,
                    locked,
                    draw_seed: Some(noise_seed),
                })
            }
        }
    }
}

/// Runs a single trial without keeping the engine.
pub fn run_trial(inst: &IsingInstance, cfg: &TrialConfig, trial_seed: u64) -> Result<TrialOutcome> {
    TrialEngine::new(inst, cfg)?.run(trial_seed)
}

/// Estimates the per-trial success probability over `trials` independent
/// trials with per-trial seeds derived from `master_seed`. The result is
/// independent of execution order and thread count.
pub fn estimate_success(
    inst: &IsingInstance,
    cfg: &TrialConfig,
    trials: u64,
    master_seed: u64,
) -> Result<SuccessEstimate> {
    if trials == 0 {
        return Err(Error::InvalidParameter("trial count must be positive".into()));
    }
    let engine = TrialEngine::new(inst, cfg)?;
    let parallel = matches!(cfg.rule, SelectionRule::PerturbedThreshold { .. }) && trials >= 64;
    let successes = if parallel {
        (0..trials)
            .into_par_iter()
            .map(|t| engine.run(derive_seed(master_seed, t)).map(|o| o.success as u64))
            .try_reduce(|| 0, |a, b| Ok(a + b))?
    } else {
        let mut acc = 0u64;
        for t in 0..trials {
            acc += engine.run(derive_seed(master_seed, t))?.success as u64;
        }
        acc
    };
    let p_hat = successes as f64 / trials as f64;
    let stderr = (p_hat * (1.0 - p_hat) / trials as f64).sqrt();
    Ok(SuccessEstimate { p_hat, stderr, successes, trials })
}

/// Repeats trials until one succeeds or `budget` trials are spent.
pub fn repeated_until_success(
    inst: &IsingInstance,
    cfg: &TrialConfig,
    budget: u64,
    master_seed: u64,
) -> Result<RepeatedOutcome> {
    let engine = TrialEngine::new(inst, cfg)?;
    for t in 0..budget {
        if engine.run(derive_seed(master_seed, t))?.success {
            return Ok(RepeatedOutcome { found: true, trials_used: t + 1 });
        }
    }
    Ok(RepeatedOutcome { found: false, trials_used: budget })
}
