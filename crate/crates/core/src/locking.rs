//! Locking-window analytics: Y/Z populations under the uniform initial
//! condition, per-trial success probability, gaussian-envelope cross-checks,
//! trial budgets, and asymptotic decay reports.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::instance::IsingInstance;
use crate::noise::{KPrimeSpec, NoiseModel};
use crate::real::{fit_line, fit_linear_log, normal_cdf, RealScalar};
use crate::spectrum::{enumerate_spectrum, threshold_sets, Spectrum};
use crate::Energy;

/// Gaussian envelope of a spectrum: 2^n modes under N(0, sigma_lambda^2).
#[derive(Clone, Copy, Debug)]
pub struct PopulationModel {
    pub n: usize,
    pub sigma_lambda: f64,
}

impl PopulationModel {
    /// Envelope with the exact spectral std of `spectrum`.
    pub fn from_spectrum(spectrum: &Spectrum) -> Self {
        PopulationModel { n: spectrum.n(), sigma_lambda: spectrum.sigma_lambda() }
    }

    /// Total mode count `M = 2^n`.
    pub fn total_modes(&self) -> f64 {
        (1u64 << self.n) as f64
    }

    /// Envelope probability mass on `[a, b]` (zero for a degenerate envelope).
    pub fn window_mass(&self, a: f64, b: f64) -> f64 {
        if self.sigma_lambda <= 0.0 {
            return 0.0;
        }
        erf_window_mass(a, b - a, self.sigma_lambda).unwrap_or(0.0)
    }

    /// Expected mode population of `[a, b]` under the envelope.
    pub fn window_population(&self, a: f64, b: f64) -> f64 {
        self.total_modes() * self.window_mass(a, b)
    }
}

/// Normal mass of the band `[k, k + k_prime]` for a centered gaussian with
/// std `sigma`: `Phi((k + k') / sigma) - Phi(k / sigma)`.
pub fn erf_window_mass<R: RealScalar>(k: R, k_prime: R, sigma: R) -> Result<R> {
    if !(sigma > R::zero() && sigma.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "sigma must be finite and positive, got {sigma}"
        )));
    }
    if !(k_prime >= R::zero() && k_prime.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "band width must be finite and nonnegative, got {k_prime}"
        )));
    }
    Ok(normal_cdf((k + k_prime) / sigma) - normal_cdf(k / sigma))
}

/// Full analysis of one (instance, K, noise model) triple.
#[derive(Clone, Debug, Serialize)]
pub struct LockingAnalysis {
    pub n: usize,
    pub k: Energy,
    pub k_prime: f64,
    /// Upper band edge `k + k_prime`.
    pub v: f64,
    pub size_y: u64,
    pub size_z: u64,
    /// Uniform initial population of Y (one unit per mode): `|Y|`.
    pub p_y0: f64,
    /// Uniform initial population of Z: `|Z|`.
    pub p_z0: f64,
    /// `P_Y0 / P_Z0`; `None` when Z is empty (the ratio diverges).
    pub ratio: Option<f64>,
    /// Per-trial success probability `|Y| / (|Y| + |Z|)` (0 when both empty).
    pub p_s: f64,
    /// Set when the instance is a NO instance for this K (`|Y| = 0`).
    pub no_solutions: bool,
    /// Exact spectral std backing the envelope columns.
    pub sigma_lambda: f64,
    /// Gaussian-envelope estimate of `P_Z0`: `2^n [Phi(v/s) - Phi(K/s)]`.
    pub gaussian_pz0: f64,
}

/// Analyzes `inst` at threshold `k` under `model`, enumerating the spectrum.
pub fn analyze(
    inst: &IsingInstance,
    k: Energy,
    model: &NoiseModel,
    k_prime: KPrimeSpec,
) -> Result<LockingAnalysis> {
    let spectrum = enumerate_spectrum(inst)?;
    analyze_with_spectrum(inst, &spectrum, k, model, k_prime)
}

/// As [`analyze`], reusing a spectrum already in hand. The window width uses
/// the instance's exact supports when derived from the model.
pub fn analyze_with_spectrum(
    inst: &IsingInstance,
    spectrum: &Spectrum,
    k: Energy,
    model: &NoiseModel,
    k_prime: KPrimeSpec,
) -> Result<LockingAnalysis> {
    model.validate()?;
    let kp = k_prime.resolve(inst.n(), model, Some((inst.coupling_count(), inst.field_count())));
    if !(kp >= 0.0 && kp.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "resolved band width must be finite and nonnegative, got {kp}"
        )));
    }
    let sets = threshold_sets(spectrum, k, kp)?;
    let p_y0 = sets.size_y as f64;
    let p_z0 = sets.size_z as f64;
    let denom = p_y0 + p_z0;
    let p_s = if denom > 0.0 { p_y0 / denom } else { 0.0 };
    let envelope = PopulationModel::from_spectrum(spectrum);
    Ok(LockingAnalysis {
        n: inst.n(),
        k,
        k_prime: kp,
        v: sets.v,
        size_y: sets.size_y,
        size_z: sets.size_z,
        p_y0,
        p_z0,
        ratio: (sets.size_z > 0).then(|| p_y0 / p_z0),
        p_s,
        no_solutions: sets.size_y == 0,
        sigma_lambda: envelope.sigma_lambda,
        gaussian_pz0: envelope.window_population(k as f64, sets.v),
    })
}

/// A repetition budget: `tau` trials make the overall success probability
/// reach `confidence` when each trial succeeds with probability `p_s`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct TrialPlan {
    pub p_s: f64,
    pub confidence: f64,
    pub tau: u64,
}

/// Smallest `tau` with `1 - (1 - p_s)^tau >= confidence`.
///
/// Evaluated through `ln_1p` so success probabilities down to 2^-40 and
/// beyond stay accurate; `p_s = 0` has no finite budget and errors.
pub fn trial_plan(p_s: f64, confidence: f64) -> Result<TrialPlan> {
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "confidence must lie in (0, 1), got {confidence}"
        )));
    }
    if !(p_s >= 0.0 && p_s <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "success probability must lie in [0, 1], got {p_s}"
        )));
    }
    if p_s == 0.0 {
        return Err(Error::UnboundedTrialPlan);
    }
    if p_s == 1.0 {
        return Ok(TrialPlan { p_s, confidence, tau: 1 });
    }
    let log_miss = (-p_s).ln_1p();
    let reached = |t: u64| -(t as f64 * log_miss).exp_m1() >= confidence;
    let mut tau = ((-confidence).ln_1p() / log_miss).ceil().max(1.0) as u64;
    // Float boundaries can land one off; walk to the exact minimum.
    while !reached(tau) {
        tau += 1;
    }
    while tau > 1 && reached(tau - 1) {
        tau -= 1;
    }
    Ok(TrialPlan { p_s, confidence, tau })
}

/// One row of an asymptotic report.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct ReportRow {
    pub n: usize,
    pub p_s: f64,
    /// Budget for 99% overall success; `None` when `p_s = 0`.
    pub tau_99: Option<u64>,
}

/// Exponential-decay fit of `ln p_s` against `n` with an optional
/// poly(n)-prefactor refinement.
#[derive(Clone, Debug, Serialize)]
pub struct AsymptoticReport {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// Coefficients of `ln p_s ~ a n + b ln n + c` when fittable.
    pub poly_prefactor: Option<(f64, f64, f64)>,
    pub rows: Vec<ReportRow>,
}

/// Fits decay across a sweep of analyses. Rows with `p_s = 0` are excluded
/// from the regression; an all-saturated sweep (every `p_s = 1`) or fewer
/// than two distinct `n` among the positive rows is a degenerate-fit error.
pub fn asymptotic_report(analyses: &[LockingAnalysis]) -> Result<AsymptoticReport> {
    let rows: Vec<ReportRow> = analyses
        .iter()
        .map(|a| ReportRow {
            n: a.n,
            p_s: a.p_s,
            tau_99: trial_plan(a.p_s, 0.99).ok().map(|p| p.tau),
        })
        .collect();
    if rows.is_empty() {
        return Err(Error::DegenerateFit("no analyses supplied".into()));
    }
    if rows.iter().all(|r| r.p_s == 1.0) {
        return Err(Error::DegenerateFit(
            "every analysis has p_s = 1 (no decay to fit; the band captures no extra modes)"
                .into(),
        ));
    }
    let xs: Vec<f64> = rows.iter().filter(|r| r.p_s > 0.0).map(|r| r.n as f64).collect();
    let ys: Vec<f64> = rows.iter().filter(|r| r.p_s > 0.0).map(|r| r.p_s.ln()).collect();
    let (slope, intercept, r_squared) = fit_line(&xs, &ys).ok_or_else(|| {
        Error::DegenerateFit("need at least two distinct n with positive p_s".into())
    })?;
    Ok(AsymptoticReport {
        slope,
        intercept,
        r_squared,
        poly_prefactor: fit_linear_log(&xs, &ys),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generate::{generate_hard, HardOptions};
    use crate::instance::{IsingInstance, SpinConfig};
    use crate::noise::{KPrimeMode, NoiseDistribution};

    fn bond() -> IsingInstance {
        IsingInstance::new(2, vec![(0, 1, 1)], vec![0, 0], None).unwrap()
    }

    fn linear() -> KPrimeSpec {
        KPrimeSpec::Mode(KPrimeMode::PaperLinear)
    }

    #[test]
    fn window_mass_reference_values() {
        // Entire support.
        let all: f64 = erf_window_mass(-12.0, 24.0, 1.0).unwrap();
        assert!((all - 1.0).abs() < 1e-9);
        // Zero width.
        assert_eq!(erf_window_mass(0.3, 0.0, 2.0).unwrap(), 0.0);
        // One-sigma two-sided band vs Simpson integration of the density.
        let mass: f64 = erf_window_mass(-1.0, 2.0, 1.0).unwrap();
        let simpson: f64 = {
            let f = |x: f64| (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
            let steps = 4000;
            let h = 2.0 / steps as f64;
            let mut acc = f(-1.0) + f(1.0);
            for i in 1..steps {
                let x = -1.0 + i as f64 * h;
                acc += f(x) * if i % 2 == 1 { 4.0 } else { 2.0 };
            }
            acc * h / 3.0
        };
        assert!((mass - simpson).abs() < 1e-9, "{mass} vs {simpson}");
        assert!((mass - 0.682_689_492_137).abs() < 1e-9);

        assert!(erf_window_mass(0.0, -1.0, 1.0).is_err());
        assert!(erf_window_mass(0.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn noiseless_bond_analysis() {
        let a = analyze(&bond(), 0, &NoiseModel::zero(), linear()).unwrap();
        assert_eq!(a.k_prime, 0.0);
        assert_eq!((a.size_y, a.size_z), (2, 0));
        assert_eq!(a.p_s, 1.0);
        assert_eq!(a.ratio, None);
        assert!(!a.no_solutions);
        // Exact envelope std for one +/-1 coupling is 1.
        assert!((a.sigma_lambda - 1.0).abs() < 1e-12);
    }

    #[test]
    fn forced_window_bond_analysis() {
        let a = analyze(&bond(), 0, &NoiseModel::zero(), KPrimeSpec::Fixed(2.0)).unwrap();
        assert_eq!((a.size_y, a.size_z), (2, 2));
        assert_eq!(a.p_s, 0.5);
        assert_eq!(a.ratio, Some(1.0));
        // Envelope cross-check: 4 * [Phi(2) - Phi(0)].
        let expect = 4.0 * (normal_cdf(2.0f64) - 0.5);
        assert!((a.gaussian_pz0 - expect).abs() < 1e-12);
    }

    #[test]
    fn no_instance_is_flagged() {
        let a = analyze(&bond(), -1, &NoiseModel::zero(), KPrimeSpec::Fixed(5.0)).unwrap();
        assert!(a.no_solutions);
        assert_eq!(a.size_y, 0);
        assert_eq!(a.p_s, 0.0);
        assert_eq!(a.ratio, Some(0.0));
    }

    #[test]
    fn hard_instance_p_s_matches_naive_scan() {
        let hard = generate_hard(12, 7, &HardOptions::default()).unwrap();
        let inst = &hard.decision.instance;
        let model =
            NoiseModel::new(0.05, 0.05, NoiseDistribution::Gaussian).unwrap();
        let a = analyze(inst, hard.decision.k, &model, linear()).unwrap();

        let mut y = 0u64;
        let mut z = 0u64;
        for bits in 0..1u64 << 12 {
            let e = inst.energy(&SpinConfig::new(bits, 12).unwrap()).unwrap();
            if e < hard.decision.k {
                y += 1;
            } else if (e as f64) <= hard.decision.k as f64 + a.k_prime {
                z += 1;
            }
        }
        assert_eq!((a.size_y, a.size_z), (y, z));
        assert_eq!(a.p_s, y as f64 / (y + z) as f64);
    }

    #[test]
    fn p_s_is_monotone_nonincreasing_in_band_width() {
        let hard = generate_hard(10, 3, &HardOptions::default()).unwrap();
        let inst = &hard.decision.instance;
        let mut last = f64::INFINITY;
        for w in 0..16 {
            let a = analyze(inst, hard.decision.k, &NoiseModel::zero(),
                KPrimeSpec::Fixed(w as f64 * 0.5)).unwrap();
            assert!(a.p_s <= last);
            last = a.p_s;
        }
    }

    #[test]
    fn trial_plan_reference_points() {
        assert_eq!(trial_plan(1.0, 0.99).unwrap().tau, 1);
        // Classic coin example: miss probability 0.25 after two trials.
        assert_eq!(trial_plan(0.5, 0.75).unwrap().tau, 2);
        assert_eq!(trial_plan(0.5, 0.76).unwrap().tau, 3);
        // Reference: p = 2^-10 at 99% needs 4714 trials.
        assert_eq!(trial_plan(2f64.powi(-10), 0.99).unwrap().tau, 4714);
        // Deep tail stays finite and sane.
        let deep = trial_plan(2f64.powi(-40), 0.99).unwrap();
        assert!(deep.tau > 5_000_000_000_000);

        assert!(matches!(trial_plan(0.0, 0.9), Err(Error::UnboundedTrialPlan)));
        assert!(trial_plan(0.5, 0.0).is_err());
        assert!(trial_plan(0.5, 1.0).is_err());
        assert!(trial_plan(1.5, 0.9).is_err());
    }

    #[test]
    fn trial_plan_is_minimal_in_float_semantics() {
        let reached = |p: f64, c: f64, t: u64| -(t as f64 * (-p).ln_1p()).exp_m1() >= c;
        for &p in &[0.9, 0.5, 0.1, 0.01, 1e-6, 2f64.powi(-20)] {
            for &c in &[0.5, 0.9, 0.99, 0.999] {
                let tau = trial_plan(p, c).unwrap().tau;
                assert!(reached(p, c, tau), "p={p} c={c} tau={tau}");
                if tau > 1 {
                    assert!(!reached(p, c, tau - 1), "p={p} c={c} tau={tau} not minimal");
                }
            }
        }
    }

    #[test]
    fn asymptotic_report_on_synthetic_decay() {
        let mk = |n: usize, p_s: f64| LockingAnalysis {
            n,
            k: 0,
            k_prime: 0.0,
            v: 0.0,
            size_y: 1,
            size_z: 0,
            p_y0: 1.0,
            p_z0: 0.0,
            ratio: None,
            p_s,
            no_solutions: false,
            sigma_lambda: 1.0,
            gaussian_pz0: 0.0,
        };
        // Pure 2^-n decay: slope is exactly -ln 2.
        let sweep: Vec<_> = (4..=12).map(|n| mk(n, 2f64.powi(-(n as i32)))).collect();
        let rep = asymptotic_report(&sweep).unwrap();
        assert!((rep.slope + std::f64::consts::LN_2).abs() < 1e-9);
        assert!((rep.r_squared - 1.0).abs() < 1e-9);
        assert_eq!(rep.rows.len(), 9);
        assert_eq!(rep.rows[0].tau_99, Some(trial_plan(2f64.powi(-4), 0.99).unwrap().tau));

        // Constant p_s < 1: slope 0.
        let flat: Vec<_> = (4..=8).map(|n| mk(n, 0.25)).collect();
        assert_eq!(asymptotic_report(&flat).unwrap().slope, 0.0);

        // Saturated sweep is flagged, not fitted.
        let ones: Vec<_> = (4..=8).map(|n| mk(n, 1.0)).collect();
        assert!(matches!(asymptotic_report(&ones), Err(Error::DegenerateFit(_))));

        // Zero rows are excluded but still reported.
        let mut mixed: Vec<_> = (4..=8).map(|n| mk(n, 2f64.powi(-(n as i32)))).collect();
        mixed.push(mk(9, 0.0));
        let rep = asymptotic_report(&mixed).unwrap();
        assert_eq!(rep.rows.len(), 6);
        assert_eq!(rep.rows[5].tau_99, None);
        assert!((rep.slope + std::f64::consts::LN_2).abs() < 1e-9);
    }
}
