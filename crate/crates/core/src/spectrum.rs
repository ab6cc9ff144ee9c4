//! Exact spectra by streaming Gray-code enumeration, threshold-set counts,
//! normality diagnostics, and a branch-and-bound ground-state solver.

use rayon::prelude::*;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};
use crate::gray::energy_tables;
use crate::instance::{DecisionInstance, IsingInstance, SpinConfig};
use crate::real::normal_cdf;
use crate::Energy;

/// Largest `n` enumeration accepts unless the caller raises the cap.
pub const DEFAULT_ENUM_CAP: usize = crate::instance::MAX_SPINS;

/// Below this size the parallel split costs more than it saves.
const SERIAL_CUTOFF: usize = 14;

/// Exact eigenvalue histogram of one instance: every level with its
/// multiplicity, ascending.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Spectrum {
    n: usize,
    levels: Vec<(Energy, u64)>,
}

impl Spectrum {
    pub fn n(&self) -> usize {
        self.n
    }

    /// `(lambda, multiplicity)` pairs, ascending in `lambda`.
    pub fn levels(&self) -> &[(Energy, u64)] {
        &self.levels
    }

    /// Ground energy.
    pub fn lambda_g(&self) -> Energy {
        self.levels[0].0
    }

    /// Ground-state degeneracy.
    pub fn d_g(&self) -> u64 {
        self.levels[0].1
    }

    /// Total number of configurations, `2^n`.
    pub fn total(&self) -> u64 {
        1u64 << self.n
    }

    pub fn multiplicity(&self, lambda: Energy) -> u64 {
        self.levels
            .binary_search_by_key(&lambda, |&(l, _)| l)
            .map(|i| self.levels[i].1)
            .unwrap_or(0)
    }

    /// Number of configurations with energy strictly below `k`.
    pub fn count_below(&self, k: Energy) -> u64 {
        self.levels.iter().take_while(|&&(l, _)| l < k).map(|&(_, d)| d).sum()
    }

    /// Number of configurations with `k <= lambda <= upper`.
    pub fn count_in_window(&self, k: Energy, upper: f64) -> u64 {
        self.levels
            .iter()
            .filter(|&&(l, _)| l >= k && (l as f64) <= upper)
            .map(|&(_, d)| d)
            .sum()
    }

    /// Exact spectral sum `sum_lambda d_lambda lambda` (zero for every
    /// instance: both term kinds are balanced over the hypercube).
    pub fn sum(&self) -> i128 {
        self.levels.iter().map(|&(l, d)| l as i128 * d as i128).sum()
    }

    /// Exact `sum_lambda d_lambda lambda^2`.
    pub fn sum_sq(&self) -> i128 {
        self.levels
            .iter()
            .map(|&(l, d)| (l as i128) * (l as i128) * d as i128)
            .sum()
    }

    /// Exact standard deviation `sqrt(sum_sq / 2^n)` of the spectrum (the mean
    /// is identically zero).
    pub fn sigma_lambda(&self) -> f64 {
        (self.sum_sq() as f64 / self.total() as f64).sqrt()
    }
}

/// Enumerates the full spectrum with the default size cap.
pub fn enumerate_spectrum(inst: &IsingInstance) -> Result<Spectrum> {
    enumerate_spectrum_capped(inst, DEFAULT_ENUM_CAP)
}

/// Enumerates the full spectrum, refusing when `n > cap`.
///
/// Streams the 2^n Gray-code walk into a dense offset histogram: O(2^n) time,
/// O(m) memory. Large systems split the walk index range across the rayon
/// pool; histogram merging is an elementwise sum, so chunk order cannot
/// change the result.
pub fn enumerate_spectrum_capped(inst: &IsingInstance, cap: usize) -> Result<Spectrum> {
    let n = inst.n();
    if n > cap {
        return Err(Error::EnumerationTooLarge { n, cap });
    }
    let tables = energy_tables(inst);
    let m = inst.term_count() as i64;
    let len = (2 * m + 1) as usize;
    let total = 1u64 << n;

    let hist = if n < SERIAL_CUTOFF {
        let mut h = vec![0u64; len];
        tables.walk_range(0, total, |_, e| h[(e + m) as usize] += 1);
        h
    } else {
        let chunks = (rayon::current_num_threads() as u64 * 8).clamp(1, total);
        let chunk_len = total.div_ceil(chunks);
        (0..chunks)
            .into_par_iter()
            .map(|c| {
                let mut h = vec![0u64; len];
                let k0 = c * chunk_len;
                let k1 = (k0 + chunk_len).min(total);
                tables.walk_range(k0, k1, |_, e| h[(e + m) as usize] += 1);
                h
            })
            .reduce(
                || vec![0u64; len],
                |mut a, b| {
                    for (x, y) in a.iter_mut().zip(b) {
                        *x += y;
                    }
                    a
                },
            )
    };

    let levels: Vec<(Energy, u64)> = hist
        .into_iter()
        .enumerate()
        .filter(|&(_, d)| d > 0)
        .map(|(idx, d)| (idx as i64 - m, d))
        .collect();
    Ok(Spectrum { n, levels })
}

/// The `limit` ground configurations with the smallest bitmasks, ascending.
pub fn ground_states(inst: &IsingInstance, limit: usize) -> Result<Vec<SpinConfig>> {
    let spectrum = enumerate_spectrum(inst)?;
    ground_states_with(inst, &spectrum, limit)
}

/// As [`ground_states`], reusing an already-computed spectrum.
pub fn ground_states_with(
    inst: &IsingInstance,
    spectrum: &Spectrum,
    limit: usize,
) -> Result<Vec<SpinConfig>> {
    if limit == 0 {
        return Ok(Vec::new());
    }
    let n = inst.n();
    let lambda_g = spectrum.lambda_g();
    let tables = energy_tables(inst);
    let total = 1u64 << n;

    // Capped max-heaps keep the smallest `limit` bitmasks per chunk; merging
    // re-caps, so the global result is the set minimum regardless of order.
    let merge = |mut a: BinaryHeap<u64>, b: BinaryHeap<u64>| {
        for bits in b {
            a.push(bits);
            if a.len() > limit {
                a.pop();
            }
        }
        a
    };
    let scan = |k0: u64, k1: u64| {
        let mut heap = BinaryHeap::new();
        tables.walk_range(k0, k1, |bits, e| {
            if e == lambda_g {
                heap.push(bits);
                if heap.len() > limit {
                    heap.pop();
                }
            }
        });
        heap
    };

    let heap = if n < SERIAL_CUTOFF {
        scan(0, total)
    } else {
        let chunks = (rayon::current_num_threads() as u64 * 8).clamp(1, total);
        let chunk_len = total.div_ceil(chunks);
        (0..chunks)
            .into_par_iter()
            .map(|c| scan(c * chunk_len, ((c + 1) * chunk_len).min(total)))
            .reduce(BinaryHeap::new, merge)
    };

    let mut bits: Vec<u64> = heap.into_vec();
    bits.sort_unstable();
    bits.into_iter().map(|b| SpinConfig::new(b, n)).collect()
}

/// Outcome of the threshold decision problem "is lambda_g < K?".
#[derive(Clone, Debug)]
pub struct Decision {
    pub yes: bool,
    pub lambda_g: Energy,
    /// A certifying ground configuration when the answer is YES.
    pub witness: Option<SpinConfig>,
}

/// Decides `lambda_g < K` by exact enumeration.
pub fn decide(d: &DecisionInstance) -> Result<Decision> {
    let spectrum = enumerate_spectrum(&d.instance)?;
    let yes = spectrum.lambda_g() < d.k;
    let witness = if yes {
        ground_states_with(&d.instance, &spectrum, 1)?.into_iter().next()
    } else {
        None
    };
    Ok(Decision { yes, lambda_g: spectrum.lambda_g(), witness })
}

/// Counts of the threshold partition: Y below `k`, Z inside `[k, k + k']`,
/// and the rest above.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ThresholdSets {
    pub k: Energy,
    /// Upper edge of the band, `k + k_prime`.
    pub v: f64,
    pub size_y: u64,
    pub size_z: u64,
    pub size_rest: u64,
}

/// Partitions the spectrum at threshold `k` with band width `k_prime >= 0`.
pub fn threshold_sets(spectrum: &Spectrum, k: Energy, k_prime: f64) -> Result<ThresholdSets> {
    if !(k_prime >= 0.0 && k_prime.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "band width must be finite and nonnegative, got {k_prime}"
        )));
    }
    let v = k as f64 + k_prime;
    let size_y = spectrum.count_below(k);
    let size_z = spectrum.count_in_window(k, v);
    let size_rest = spectrum.total() - size_y - size_z;
    Ok(ThresholdSets { k, v, size_y, size_z, size_rest })
}

/// Summary statistics of a spectrum.
#[derive(Clone, Copy, Debug)]
pub struct SpectrumStats {
    pub mean: f64,
    pub std_dev: f64,
    /// Ground-state energy density `lambda_g / n`.
    pub c_g: f64,
    /// Two-sided Kolmogorov-Smirnov distance between the standardized
    /// spectrum and the standard normal (1.0 for a degenerate spectrum).
    pub ks_normal: f64,
}

pub fn spectrum_stats(spectrum: &Spectrum) -> SpectrumStats {
    let total = spectrum.total() as f64;
    let mean = spectrum.sum() as f64 / total;
    let var = spectrum.sum_sq() as f64 / total - mean * mean;
    let std_dev = var.max(0.0).sqrt();
    let c_g = spectrum.lambda_g() as f64 / spectrum.n() as f64;

    let ks_normal = if std_dev == 0.0 {
        1.0
    } else {
        let mut cum = 0u64;
        let mut ks: f64 = 0.0;
        for &(l, d) in spectrum.levels() {
            let before = cum as f64 / total;
            cum += d;
            let after = cum as f64 / total;
            let phi = normal_cdf((l as f64 - mean) / std_dev);
            ks = ks.max((before - phi).abs()).max((after - phi).abs());
        }
        ks
    };
    SpectrumStats { mean, std_dev, c_g, ks_normal }
}

/// Branch-and-bound result. `optimal` is false when the node budget cut the
/// search short; `lambda_g`/`witness` then hold the best configuration found.
#[derive(Clone, Debug)]
pub struct BnbOutcome {
    pub lambda_g: Energy,
    pub witness: SpinConfig,
    pub optimal: bool,
    pub nodes: u64,
}

/// Depth-first branch and bound over spins in index order with the admissible
/// bound `partial - (number of undecided terms)`: every undecided +/-1 term
/// can contribute at most -1.
pub fn branch_and_bound_ground(inst: &IsingInstance, node_budget: u64) -> Result<BnbOutcome> {
    let n = inst.n();
    // Couplings incident to site j from below: decided once spins 0..=j are set.
    let mut adj_low: Vec<Vec<(usize, Energy)>> = vec![Vec::new(); n];
    for c in inst.couplings() {
        adj_low[c.j].push((c.i, c.value));
    }
    // undecided[d] = terms still open when spins 0..d are fixed.
    let mut undecided = vec![0i64; n + 1];
    for d in (0..n).rev() {
        let here = adj_low[d].len() as i64 + i64::from(inst.fields()[d] != 0);
        undecided[d] = undecided[d + 1] + here;
    }

    struct Search<'a> {
        n: usize,
        fields: &'a [Energy],
        adj_low: &'a [Vec<(usize, Energy)>],
        undecided: &'a [i64],
        best: Energy,
        best_bits: u64,
        nodes: u64,
        budget: u64,
        truncated: bool,
    }

    impl Search<'_> {
        fn spin(bits: u64, i: usize) -> Energy {
            1 - 2 * ((bits >> i) & 1) as Energy
        }

        fn descend(&mut self, depth: usize, bits: u64, partial: Energy) {
            if self.truncated {
                return;
            }
            self.nodes += 1;
            if self.nodes > self.budget {
                self.truncated = true;
                return;
            }
            if depth == self.n {
                if partial < self.best {
                    self.best = partial;
                    self.best_bits = bits;
                }
                return;
            }
            if partial - self.undecided[depth] >= self.best {
                return;
            }
            for bit in [0u64, 1u64] {
                let next = bits | (bit << depth);
                let s = Self::spin(next, depth);
                let mut gain = self.fields[depth] * s;
                for &(i, v) in &self.adj_low[depth] {
                    gain += v * Self::spin(next, i) * s;
                }
                self.descend(depth + 1, next, partial + gain);
            }
        }
    }

    // Start from the all-up incumbent so even a truncated search returns a
    // real configuration.
    let all_up = SpinConfig::all_up(n);
    let incumbent = inst.energy(&all_up)?;
    let mut search = Search {
        n,
        fields: inst.fields(),
        adj_low: &adj_low,
        undecided: &undecided,
        best: incumbent,
        best_bits: 0,
        nodes: 0,
        budget: node_budget,
        truncated: false,
    };
    search.descend(0, 0, 0);
    Ok(BnbOutcome {
        lambda_g: search.best,
        witness: SpinConfig::new(search.best_bits, n)?,
        optimal: !search.truncated,
        nodes: search.nodes,
    })
}

/// Naive reference used in tests: evaluate every configuration directly.
#[cfg(test)]
fn naive_spectrum(inst: &IsingInstance) -> Vec<(Energy, u64)> {
    use std::collections::BTreeMap;
    let mut hist = BTreeMap::new();
    for bits in 0..1u64 << inst.n() {
        let e = inst.energy(&SpinConfig::new(bits, inst.n()).unwrap()).unwrap();
        *hist.entry(e).or_insert(0u64) += 1;
    }
    hist.into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generate::{generate_hard, generate_ladder, generate_random, HardOptions};

    fn triangle() -> IsingInstance {
        IsingInstance::new(3, vec![(0, 1, 1), (0, 2, 1), (1, 2, 1)], vec![0, 0, 0], None)
            .unwrap()
    }

    fn bond(n: usize, value: Energy) -> IsingInstance {
        IsingInstance::new(n, vec![(0, 1, value)], vec![0; n], None).unwrap()
    }

    #[test]
    fn triangle_spectrum() {
        let s = enumerate_spectrum(&triangle()).unwrap();
        // Frustration: six configurations at -1, two at +3.
        assert_eq!(s.levels(), &[(-1, 6), (3, 2)]);
        assert_eq!(s.lambda_g(), -1);
        assert_eq!(s.d_g(), 6);
    }

    #[test]
    fn two_spin_bond_spectrum() {
        let s = enumerate_spectrum(&bond(2, 1)).unwrap();
        assert_eq!(s.levels(), &[(-1, 2), (1, 2)]);
    }

    #[test]
    fn enumeration_matches_naive_on_random_instances() {
        for seed in 0..10 {
            let n = 6 + (seed as usize % 5);
            let inst = generate_random(n, seed, 2.0 / 3.0).unwrap();
            let s = enumerate_spectrum(&inst).unwrap();
            assert_eq!(s.levels(), naive_spectrum(&inst).as_slice(), "seed {seed}");
        }
    }

    #[test]
    fn moment_identities_and_parity() {
        for seed in 0..10 {
            let inst = generate_random(10, 100 + seed, 2.0 / 3.0).unwrap();
            let s = enumerate_spectrum(&inst).unwrap();
            assert_eq!(s.sum(), 0, "first moment");
            let expect = inst.sum_sq_coefficients() as i128 * s.total() as i128;
            assert_eq!(s.sum_sq(), expect, "second moment");
            // All levels share the parity of the term count.
            let m = inst.term_count() as i64;
            assert!(s.levels().iter().all(|&(l, _)| (l - m) % 2 == 0));
            assert_eq!(s.levels().iter().map(|&(_, d)| d).sum::<u64>(), s.total());
        }
    }

    #[test]
    fn zero_field_multiplicities_are_even() {
        // Global flip pairs configurations of equal energy when B = 0.
        let inst = IsingInstance::new(
            6,
            vec![(0, 1, 1), (1, 2, -1), (2, 3, 1), (3, 4, 1), (4, 5, -1), (0, 5, 1)],
            vec![0; 6],
            None,
        )
        .unwrap();
        let s = enumerate_spectrum(&inst).unwrap();
        assert!(s.levels().iter().all(|&(_, d)| d % 2 == 0));
    }

    #[test]
    fn enumeration_cap_refuses() {
        let inst = generate_random(12, 1, 0.5).unwrap();
        assert!(matches!(
            enumerate_spectrum_capped(&inst, 10),
            Err(Error::EnumerationTooLarge { n: 12, cap: 10 })
        ));
    }

    #[test]
    fn parallel_path_agrees_with_serial() {
        // n = 15 exercises the chunked path; compare against a 1-thread pool.
        let inst = generate_random(15, 9, 2.0 / 3.0).unwrap();
        let par = enumerate_spectrum(&inst).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let ser = pool.install(|| enumerate_spectrum(&inst)).unwrap();
        assert_eq!(par, ser);
    }

    #[test]
    fn ground_states_of_two_spin_bonds() {
        // Antiparallel pair for J = +1, ascending bitmask order.
        let g = ground_states(&bond(2, 1), 10).unwrap();
        assert_eq!(g.iter().map(|c| c.bits()).collect::<Vec<_>>(), vec![0b01, 0b10]);
        // Parallel pair for J = -1.
        let g = ground_states(&bond(2, -1), 10).unwrap();
        assert_eq!(g.iter().map(|c| c.bits()).collect::<Vec<_>>(), vec![0b00, 0b11]);
        // Limit truncates to the smallest bitmasks.
        let g = ground_states(&triangle(), 2).unwrap();
        assert_eq!(g.iter().map(|c| c.bits()).collect::<Vec<_>>(), vec![0b001, 0b010]);
    }

    #[test]
    fn ground_states_closed_under_global_flip_without_fields() {
        for seed in 0..6 {
            let inst = generate_random(8, 40 + seed, 0.5).unwrap();
            let zero_b = IsingInstance::new(
                8,
                inst.couplings().iter().map(|c| (c.i, c.j, c.value)).collect(),
                vec![0; 8],
                None,
            )
            .unwrap();
            let g = ground_states(&zero_b, 1 << 8).unwrap();
            let bits: std::collections::HashSet<u64> = g.iter().map(|c| c.bits()).collect();
            for c in &g {
                assert!(bits.contains(&c.flip_all().bits()));
            }
        }
    }

    #[test]
    fn decide_triangle_and_hard() {
        let d = DecisionInstance { instance: triangle(), k: 0 };
        let out = decide(&d).unwrap();
        assert!(out.yes);
        let w = out.witness.unwrap();
        assert_eq!(d.instance.energy(&w).unwrap(), -1);

        let d = DecisionInstance { instance: triangle(), k: -1 };
        let out = decide(&d).unwrap();
        assert!(!out.yes);
        assert!(out.witness.is_none());

        let hard = generate_hard(8, 11, &HardOptions::default()).unwrap();
        let out = decide(&hard.decision).unwrap();
        assert!(out.yes);
        let w = out.witness.unwrap();
        assert_eq!(hard.decision.instance.energy(&w).unwrap(), hard.lambda_g());
    }

    #[test]
    fn threshold_partition_counts() {
        let s = enumerate_spectrum(&bond(2, 1)).unwrap();
        let t = threshold_sets(&s, 0, 0.0).unwrap();
        assert_eq!((t.size_y, t.size_z, t.size_rest), (2, 0, 2));
        let t = threshold_sets(&s, 0, 2.0).unwrap();
        assert_eq!((t.size_y, t.size_z, t.size_rest), (2, 2, 0));
        // Band growth is monotone in k'.
        let s = enumerate_spectrum(&generate_random(9, 5, 2.0 / 3.0).unwrap()).unwrap();
        let mut last = 0;
        for kp in 0..12 {
            let t = threshold_sets(&s, s.lambda_g() + 1, kp as f64).unwrap();
            assert!(t.size_z >= last);
            last = t.size_z;
        }
        assert!(threshold_sets(&s, 0, -1.0).is_err());
        assert!(threshold_sets(&s, 0, f64::NAN).is_err());
    }

    #[test]
    fn stats_match_exact_identities() {
        let inst = generate_random(12, 3, 2.0 / 3.0).unwrap();
        let s = enumerate_spectrum(&inst).unwrap();
        let st = spectrum_stats(&s);
        assert_eq!(st.mean, 0.0);
        let expect = (inst.sum_sq_coefficients() as f64).sqrt();
        assert!((st.std_dev - expect).abs() < 1e-9);
        assert_eq!(st.c_g, s.lambda_g() as f64 / 12.0);
        assert!(st.ks_normal > 0.0 && st.ks_normal < 1.0);

        // Degenerate spectrum: an instance with a single +/-0 term set.
        let empty = IsingInstance::new(2, vec![], vec![0, 0], None).unwrap();
        let st = spectrum_stats(&enumerate_spectrum(&empty).unwrap());
        assert_eq!(st.std_dev, 0.0);
        assert_eq!(st.ks_normal, 1.0);
    }

    #[test]
    fn random_spectrum_std_tracks_term_count() {
        // At density 2/3 the term count concentrates near n(n+1)/3, so the
        // exact std should sit within 10% of sqrt(n(n+1)/3) at n = 20.
        let n = 20;
        let inst = generate_random(n, 77, 2.0 / 3.0).unwrap();
        let s = enumerate_spectrum(&inst).unwrap();
        let predicted = ((n * (n + 1)) as f64 / 3.0).sqrt();
        let actual = spectrum_stats(&s).std_dev;
        assert!(
            (actual - predicted).abs() < 0.1 * predicted,
            "std {actual} vs prediction {predicted}"
        );
    }

    #[test]
    fn branch_and_bound_matches_enumeration() {
        let out = branch_and_bound_ground(&triangle(), u64::MAX).unwrap();
        assert_eq!(out.lambda_g, -1);
        assert!(out.optimal);

        for seed in 0..20 {
            let n = 8 + (seed as usize % 7);
            let inst = generate_random(n, 200 + seed, 2.0 / 3.0).unwrap();
            let s = enumerate_spectrum(&inst).unwrap();
            let out = branch_and_bound_ground(&inst, u64::MAX).unwrap();
            assert!(out.optimal);
            assert_eq!(out.lambda_g, s.lambda_g(), "seed {seed}");
            assert_eq!(inst.energy(&out.witness).unwrap(), out.lambda_g);
        }

        let ladder = generate_ladder(12, 4).unwrap();
        let s = enumerate_spectrum(&ladder).unwrap();
        let out = branch_and_bound_ground(&ladder, u64::MAX).unwrap();
        assert_eq!(out.lambda_g, s.lambda_g());
    }

    #[test]
    fn branch_and_bound_budget_truncates_honestly() {
        let inst = generate_random(14, 5, 2.0 / 3.0).unwrap();
        let out = branch_and_bound_ground(&inst, 10).unwrap();
        assert!(!out.optimal);
        // Still a real configuration with its true energy.
        assert_eq!(inst.energy(&out.witness).unwrap(), out.lambda_g);
    }
}
