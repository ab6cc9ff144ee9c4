//! Instance generators: random ensembles, ladder graphs, and rejection-sampled
//! hard decision instances.
//!
//! Every generator is a pure function of its seed. Coefficients are drawn in a
//! fixed order (couplings lexicographic, then fields by site) so a seed pins
//! the instance bit-for-bit.

use rand::Rng;

use crate::error::{Error, Result};
use crate::instance::{DecisionInstance, IsingInstance};
use crate::rng::{derive_seed, rng_from};
use crate::spectrum::{enumerate_spectrum, Spectrum};

/// Default probability that any given coupling or field coefficient is nonzero
/// (uniform over {-1, 0, +1}).
pub const DEFAULT_DENSITY: f64 = 2.0 / 3.0;

/// Random instance: each of the n(n-1)/2 couplings and n fields is nonzero
/// with probability `density`, sign fair.
pub fn generate_random(n: usize, seed: u64, density: f64) -> Result<IsingInstance> {
    if !(density > 0.0 && density <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "density must lie in (0, 1], got {density}"
        )));
    }
    let mut rng = rng_from(seed);
    let mut couplings = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.gen::<f64>() < density {
                let value = if rng.gen::<bool>() { 1 } else { -1 };
                couplings.push((i, j, value));
            }
        }
    }
    let mut fields = Vec::with_capacity(n);
    for _ in 0..n {
        if rng.gen::<f64>() < density {
            fields.push(if rng.gen::<bool>() { 1 } else { -1 });
        } else {
            fields.push(0);
        }
    }
    IsingInstance::new(n, couplings, fields, Some(format!(
        "random/seed={seed}/density={density:.3}"
    )))
}

/// Two-rail ladder: rails `0..n/2` and `n/2..n` with nearest-neighbour bonds
/// plus rungs `(i, i + n/2)`, giving 3n/2 - 2 couplings. All couplings and
/// fields are drawn uniformly from {-1, +1}. Requires even `n >= 4`.
pub fn generate_ladder(n: usize, seed: u64) -> Result<IsingInstance> {
    if n < 4 || n % 2 != 0 {
        return Err(Error::InvalidParameter(format!(
            "ladder requires even n >= 4, got {n}"
        )));
    }
    let half = n / 2;
    let mut edges = Vec::with_capacity(3 * half - 2);
    for i in 0..half - 1 {
        edges.push((i, i + 1));
        edges.push((half + i, half + i + 1));
    }
    for i in 0..half {
        edges.push((i, i + half));
    }
    edges.sort_unstable();
    let mut rng = rng_from(seed);
    let couplings = edges
        .into_iter()
        .map(|(i, j)| (i, j, if rng.gen::<bool>() { 1 } else { -1 }))
        .collect();
    let fields = (0..n).map(|_| if rng.gen::<bool>() { 1 } else { -1 }).collect();
    IsingInstance::new(n, couplings, fields, Some(format!("ladder/seed={seed}")))
}

/// Knobs for hard-instance rejection sampling.
#[derive(Clone, Copy, Debug)]
pub struct HardOptions {
    pub density: f64,
    /// Largest acceptable ground-state degeneracy.
    pub d_max: u64,
    pub max_attempts: u64,
}

impl Default for HardOptions {
    fn default() -> Self {
        HardOptions { density: DEFAULT_DENSITY, d_max: 4, max_attempts: 10_000 }
    }
}

/// A hard decision instance together with the spectrum that certified it.
#[derive(Clone, Debug)]
pub struct HardInstance {
    pub decision: DecisionInstance,
    pub spectrum: Spectrum,
    pub attempts: u64,
}

impl HardInstance {
    pub fn lambda_g(&self) -> crate::Energy {
        self.spectrum.lambda_g()
    }

    pub fn d_g(&self) -> u64 {
        self.spectrum.d_g()
    }
}

/// Draws random instances until one has a connected coupling graph and ground
/// degeneracy at most `d_max`, then sets `K = lambda_g + 1` so the solution
/// set Y is exactly the ground manifold while the answer stays YES.
pub fn generate_hard(n: usize, seed: u64, opts: &HardOptions) -> Result<HardInstance> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!(
            "hard instances need n >= 2, got {n}"
        )));
    }
    for attempt in 0..opts.max_attempts {
        let child = derive_seed(seed, attempt);
        let inst = generate_random(n, child, opts.density)?
            .with_label(format!("hard/seed={seed}/attempt={attempt}"));
        if !inst.connected() {
            continue;
        }
        let spectrum = enumerate_spectrum(&inst)?;
        if spectrum.d_g() <= opts.d_max {
            let k = spectrum.lambda_g() + 1;
            return Ok(HardInstance {
                decision: DecisionInstance { instance: inst, k },
                spectrum,
                attempts: attempt + 1,
            });
        }
    }
    Err(Error::GenerationExhausted { attempts: opts.max_attempts })
}
