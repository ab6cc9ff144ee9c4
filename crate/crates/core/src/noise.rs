//! Calibration-noise models: per-coefficient offsets, perturbed energies, and
//! the induced locking-window width K'.
//!
//! Noise attaches only to nonzero coefficients — a missing coupling cannot
//! drift — so a draw's support always equals the instance's support.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gray::GrayTables;
use crate::instance::{IsingInstance, SpinConfig};
use crate::rng::rng_from;

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseDistribution {
    Gaussian,
    /// Mean-zero uniform with the stated standard deviation
    /// (half-width `sigma * sqrt(3)`).
    Uniform,
}

/// Per-coefficient offset model: couplings drift by sigma_eps, fields by
/// sigma_kappa, independently.
#[derive(Clone, Copy, PartialEq, Debug, Serialize, Deserialize)]
pub struct NoiseModel {
    pub sigma_eps: f64,
    pub sigma_kappa: f64,
    pub distribution: NoiseDistribution,
}

impl NoiseModel {
    pub fn new(sigma_eps: f64, sigma_kappa: f64, distribution: NoiseDistribution) -> Result<Self> {
        let model = NoiseModel { sigma_eps, sigma_kappa, distribution };
        model.validate()?;
        Ok(model)
    }

    /// The noiseless model.
    pub fn zero() -> Self {
        NoiseModel { sigma_eps: 0.0, sigma_kappa: 0.0, distribution: NoiseDistribution::Gaussian }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("sigma_eps", self.sigma_eps), ("sigma_kappa", self.sigma_kappa)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be finite and nonnegative, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// One realization of coefficient offsets for a specific instance.
///
/// `eps[k]` aligns with `instance.couplings()[k]`; `kappa` lists
/// `(site, offset)` for nonzero fields only, ascending by site.
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseDraw {
    eps: Vec<f64>,
    kappa: Vec<(usize, f64)>,
    seed: u64,
}

impl NoiseDraw {
    pub fn eps(&self) -> &[f64] {
        &self.eps
    }

    pub fn kappa(&self) -> &[(usize, f64)] {
        &self.kappa
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }
}

fn standard_sample(rng: &mut impl Rng, distribution: NoiseDistribution) -> f64 {
    match distribution {
        NoiseDistribution::Gaussian => StandardNormal.sample(rng),
        NoiseDistribution::Uniform => (rng.gen::<f64>() - 0.5) * (2.0 * 3.0f64.sqrt()),
    }
}

/// Draws offsets for every nonzero coefficient of `inst`: couplings in their
/// canonical order first, then nonzero fields by site. A zero sigma yields
/// exact 0.0 offsets, so the zero model reproduces exact energies bit-for-bit.
pub fn sample_noise(inst: &IsingInstance, model: &NoiseModel, seed: u64) -> Result<NoiseDraw> {
    model.validate()?;
    let mut rng = rng_from(seed);
    let eps = inst
        .couplings()
        .iter()
        .map(|_| model.sigma_eps * standard_sample(&mut rng, model.distribution))
        .collect();
    let kappa = inst
        .fields()
        .iter()
        .enumerate()
        .filter(|&(_, &b)| b != 0)
        .map(|(i, _)| (i, model.sigma_kappa * standard_sample(&mut rng, model.distribution)))
        .collect();
    Ok(NoiseDraw { eps, kappa, seed })
}

/// Energy shift of configuration `s` under a draw:
/// `sum eps_ij s_i s_j + sum kappa_i s_i`.
pub fn shift(inst: &IsingInstance, draw: &NoiseDraw, s: &SpinConfig) -> Result<f64> {
    if draw.eps.len() != inst.coupling_count() {
        return Err(Error::InvalidParameter(
            "noise draw does not align with this instance's couplings".into(),
        ));
    }
    if s.n() != inst.n() {
        return Err(Error::SpinCountMismatch { expected: inst.n(), got: s.n() });
    }
    let mut acc = 0.0;
    for (c, &e) in inst.couplings().iter().zip(&draw.eps) {
        acc += e * (s.spin(c.i) * s.spin(c.j)) as f64;
    }
    for &(i, k) in &draw.kappa {
        acc += k * s.spin(i) as f64;
    }
    Ok(acc)
}

/// An instance viewed through one noise realization.
#[derive(Clone, Debug)]
pub struct PerturbedInstance<'a> {
    base: &'a IsingInstance,
    draw: NoiseDraw,
}

impl<'a> PerturbedInstance<'a> {
    pub fn new(base: &'a IsingInstance, draw: NoiseDraw) -> Result<Self> {
        if draw.eps.len() != base.coupling_count() {
            return Err(Error::InvalidParameter(
                "noise draw does not align with this instance's couplings".into(),
            ));
        }
        Ok(PerturbedInstance { base, draw })
    }

    pub fn base(&self) -> &IsingInstance {
        self.base
    }

    pub fn draw(&self) -> &NoiseDraw {
        &self.draw
    }

    /// Perturbed energy: exact integer energy plus the real-valued shift.
    pub fn energy(&self, s: &SpinConfig) -> Result<f64> {
        Ok(self.base.energy(s)? as f64 + shift(self.base, &self.draw, s)?)
    }
}

/// Gray tables evaluating the shift of a draw (for streaming sweeps).
pub fn shift_tables(inst: &IsingInstance, draw: &NoiseDraw) -> GrayTables<f64> {
    let pairs = inst
        .couplings()
        .iter()
        .zip(&draw.eps)
        .map(|(c, &e)| (c.i, c.j, e))
        .collect();
    let mut fields = vec![0.0; inst.n()];
    for &(i, k) in &draw.kappa {
        fields[i] = k;
    }
    GrayTables::new(inst.n(), pairs, fields)
}

/// How the window width K' is obtained from a noise model.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KPrimeMode {
    /// Linear sum of the two deviation scales:
    /// `sigma_eps sqrt(m_J) + sigma_kappa sqrt(m_B)`.
    PaperLinear,
    /// Quadrature combination: `sqrt(sigma_eps^2 m_J + sigma_kappa^2 m_B)`,
    /// the exact std of the total shift at fixed configuration.
    CltQuadrature,
}

/// A window width: derived from a model, or forced to a fixed value.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KPrimeSpec {
    Mode(KPrimeMode),
    Fixed(f64),
}

impl KPrimeSpec {
    pub fn resolve(
        &self,
        n: usize,
        model: &NoiseModel,
        support: Option<(usize, usize)>,
    ) -> f64 {
        match *self {
            KPrimeSpec::Mode(mode) => k_prime(n, model, mode, support),
            KPrimeSpec::Fixed(v) => v,
        }
    }
}

/// Window width K'(n) for a model.
///
/// `support` gives the exact nonzero counts `(m_J, m_B)` when the instance is
/// in hand; otherwise the density-2/3 expectations `n(n-1)/3` and `2n/3` are
/// used.
pub fn k_prime(
    n: usize,
    model: &NoiseModel,
    mode: KPrimeMode,
    support: Option<(usize, usize)>,
) -> f64 {
    let (m_j, m_b) = match support {
        Some((mj, mb)) => (mj as f64, mb as f64),
        None => ((n * n.saturating_sub(1)) as f64 / 3.0, 2.0 * n as f64 / 3.0),
    };
    match mode {
        KPrimeMode::PaperLinear => {
            model.sigma_eps * m_j.sqrt() + model.sigma_kappa * m_b.sqrt()
        }
        KPrimeMode::CltQuadrature => {
            (model.sigma_eps * model.sigma_eps * m_j + model.sigma_kappa * model.sigma_kappa * m_b)
                .sqrt()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generate::generate_random;

    fn gaussian(se: f64, sk: f64) -> NoiseModel {
        NoiseModel::new(se, sk, NoiseDistribution::Gaussian).unwrap()
    }

    #[test]
    fn model_validation() {
        assert!(NoiseModel::new(-0.1, 0.0, NoiseDistribution::Gaussian).is_err());
        assert!(NoiseModel::new(0.0, f64::NAN, NoiseDistribution::Uniform).is_err());
        assert!(NoiseModel::new(0.1, 0.2, NoiseDistribution::Uniform).is_ok());
    }

    #[test]
    fn draw_support_matches_instance() {
        let inst = generate_random(10, 4, 2.0 / 3.0).unwrap();
        let draw = sample_noise(&inst, &gaussian(0.1, 0.2), 9).unwrap();
        assert_eq!(draw.eps().len(), inst.coupling_count());
        assert_eq!(draw.kappa().len(), inst.field_count());
        for &(i, _) in draw.kappa() {
            assert_ne!(inst.fields()[i], 0);
        }
    }

    #[test]
    fn zero_sigma_is_exactly_zero() {
        let inst = generate_random(8, 1, 2.0 / 3.0).unwrap();
        let draw = sample_noise(&inst, &NoiseModel::zero(), 5).unwrap();
        assert!(draw.eps().iter().all(|&e| e == 0.0));
        assert!(draw.kappa().iter().all(|&(_, k)| k == 0.0));
        let p = PerturbedInstance::new(&inst, draw).unwrap();
        for bits in 0..256u64 {
            let s = SpinConfig::new(bits, 8).unwrap();
            assert_eq!(p.energy(&s).unwrap(), inst.energy(&s).unwrap() as f64);
        }
    }

    #[test]
    fn draws_are_deterministic_per_seed() {
        let inst = generate_random(9, 2, 2.0 / 3.0).unwrap();
        let m = gaussian(0.1, 0.1);
        assert_eq!(sample_noise(&inst, &m, 3).unwrap(), sample_noise(&inst, &m, 3).unwrap());
        assert_ne!(sample_noise(&inst, &m, 3).unwrap(), sample_noise(&inst, &m, 4).unwrap());
    }

    #[test]
    fn sample_moments_match_model() {
        // Single-coupling instance isolates one offset stream.
        let inst = IsingInstance::new(2, vec![(0, 1, 1)], vec![0, 0], None).unwrap();
        for dist in [NoiseDistribution::Gaussian, NoiseDistribution::Uniform] {
            let model = NoiseModel::new(0.05, 0.0, dist).unwrap();
            let n = 100_000;
            let mut sum = 0.0;
            let mut sum_sq = 0.0;
            for seed in 0..n {
                let e = sample_noise(&inst, &model, seed).unwrap().eps()[0];
                sum += e;
                sum_sq += e * e;
            }
            let mean = sum / n as f64;
            let std = (sum_sq / n as f64 - mean * mean).sqrt();
            assert!(mean.abs() < 4.0 * 0.05 / (n as f64).sqrt(), "{dist:?} mean {mean}");
            assert!((std - 0.05).abs() < 0.02 * 0.05, "{dist:?} std {std}");
        }
    }

    #[test]
    fn perturbed_energy_decomposes_into_shift() {
        let inst = generate_random(7, 8, 2.0 / 3.0).unwrap();
        let draw = sample_noise(&inst, &gaussian(0.2, 0.3), 21).unwrap();
        // Independent evaluation straight from the coefficient lists.
        for bits in [0u64, 1, 37, 100, 127] {
            let s = SpinConfig::new(bits, 7).unwrap();
            let mut expect = 0.0;
            for (c, &e) in inst.couplings().iter().zip(draw.eps()) {
                expect += (c.value as f64 + e) * (s.spin(c.i) * s.spin(c.j)) as f64;
            }
            let mut kappa_iter = draw.kappa().iter();
            for (i, &b) in inst.fields().iter().enumerate() {
                if b != 0 {
                    let &(site, k) = kappa_iter.next().unwrap();
                    assert_eq!(site, i);
                    expect += (b as f64 + k) * s.spin(i) as f64;
                }
            }
            let p = PerturbedInstance::new(&inst, draw.clone()).unwrap();
            assert!((p.energy(&s).unwrap() - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn field_noise_example_single_spin() {
        // B = 1 with kappa = -0.1: perturbed energy of spin-down is
        // -(1 - 0.1) = -0.9.
        let inst = IsingInstance::new(1, vec![], vec![1], None).unwrap();
        let draw = NoiseDraw { eps: vec![], kappa: vec![(0, -0.1)], seed: 0 };
        let p = PerturbedInstance::new(&inst, draw).unwrap();
        let down = SpinConfig::new(1, 1).unwrap();
        assert!((p.energy(&down).unwrap() - (-0.9)).abs() < 1e-15);
    }

    #[test]
    fn shift_tables_agree_with_shift() {
        let inst = generate_random(8, 14, 2.0 / 3.0).unwrap();
        let draw = sample_noise(&inst, &gaussian(0.1, 0.07), 2).unwrap();
        let tables = shift_tables(&inst, &draw);
        for bits in 0..256u64 {
            let s = SpinConfig::new(bits, 8).unwrap();
            let direct = shift(&inst, &draw, &s).unwrap();
            assert!((tables.eval(bits) - direct).abs() < 1e-12);
        }
    }

    #[test]
    fn k_prime_reference_value() {
        // n = 4 with expected supports 4 and 8/3:
        // 0.01 * 2 + 0.02 * sqrt(8/3) = 0.052659...
        let model = gaussian(0.01, 0.02);
        let v = k_prime(4, &model, KPrimeMode::PaperLinear, None);
        assert!((v - 0.052_659_863_237).abs() < 1e-9, "got {v}");
    }

    #[test]
    fn k_prime_modes_and_support() {
        let model = gaussian(0.05, 0.05);
        // Zero model gives zero width in both modes.
        for mode in [KPrimeMode::PaperLinear, KPrimeMode::CltQuadrature] {
            assert_eq!(k_prime(10, &NoiseModel::zero(), mode, None), 0.0);
        }
        // Linear dominates quadrature whenever both sigmas act.
        for n in [2, 4, 8, 16, 30] {
            let lin = k_prime(n, &model, KPrimeMode::PaperLinear, None);
            let quad = k_prime(n, &model, KPrimeMode::CltQuadrature, None);
            assert!(lin >= quad, "n = {n}: {lin} < {quad}");
        }
        // With a single active channel the two modes coincide.
        let single = gaussian(0.05, 0.0);
        for n in [2, 5, 9] {
            let lin = k_prime(n, &single, KPrimeMode::PaperLinear, Some((7, 3)));
            let quad = k_prime(n, &single, KPrimeMode::CltQuadrature, Some((7, 3)));
            assert!((lin - quad).abs() < 1e-15);
        }
        // Exact support overrides the expectation.
        let v = k_prime(4, &gaussian(0.1, 0.0), KPrimeMode::PaperLinear, Some((9, 0)));
        assert!((v - 0.3).abs() < 1e-15);
    }

    #[test]
    fn k_prime_spec_resolution() {
        let model = gaussian(0.01, 0.02);
        let spec = KPrimeSpec::Mode(KPrimeMode::PaperLinear);
        assert_eq!(
            spec.resolve(4, &model, None),
            k_prime(4, &model, KPrimeMode::PaperLinear, None)
        );
        assert_eq!(KPrimeSpec::Fixed(2.0).resolve(4, &model, None), 2.0);
    }

    #[test]
    fn shift_scales_linearly_in_sigma() {
        // Same seed, sigma doubled: every offset doubles exactly.
        let inst = generate_random(9, 6, 2.0 / 3.0).unwrap();
        let d1 = sample_noise(&inst, &gaussian(0.1, 0.05), 77).unwrap();
        let d2 = sample_noise(&inst, &gaussian(0.2, 0.1), 77).unwrap();
        for (a, b) in d1.eps().iter().zip(d2.eps()) {
            assert!((2.0 * a - b).abs() < 1e-15);
        }
        for (&(i, a), &(j, b)) in d1.kappa().iter().zip(d2.kappa()) {
            assert_eq!(i, j);
            assert!((2.0 * a - b).abs() < 1e-15);
        }
    }
}
