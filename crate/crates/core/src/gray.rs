//! Gray-code streaming over the 2^n configuration hypercube.
//!
//! Successive Gray codes differ in one bit, so an energy-like sum of pairwise
//! and linear +/-1 terms updates in O(degree) per step instead of O(terms).
//! The walker is generic over the term scalar: exact integer energies and
//! real-valued noise shifts share the same sweep.

use num_traits::Zero;
use std::ops::{Add, AddAssign, Neg, Sub};

use crate::instance::IsingInstance;

/// Term scalar the walker accumulates: signed addition is all it needs.
pub trait Scalar:
    Copy + Zero + Add<Output = Self> + Sub<Output = Self> + Neg<Output = Self> + AddAssign
{
}

impl<T> Scalar for T where
    T: Copy + Zero + Add<Output = T> + Sub<Output = T> + Neg<Output = T> + AddAssign
{
}

/// The k-th configuration of the canonical walk (reflected binary code).
pub fn gray_code(k: u64) -> u64 {
    k ^ (k >> 1)
}

/// Coefficient tables for one quadratic-plus-linear form over spins
/// `s_i = 1 - 2*bit_i`.
#[derive(Clone, Debug)]
pub struct GrayTables<T> {
    n: usize,
    pairs: Vec<(usize, usize, T)>,
    adj: Vec<Vec<(usize, T)>>,
    fields: Vec<T>,
}

impl<T: Scalar> GrayTables<T> {
    /// Builds tables for `sum_{(i,j)} v s_i s_j + sum_i field_i s_i`.
    /// Pair indices must be distinct and below `n`; `fields` must have length `n`.
    pub fn new(n: usize, pairs: Vec<(usize, usize, T)>, fields: Vec<T>) -> Self {
        assert!(n >= 1 && n <= 63, "walker supports 1 <= n <= 63");
        assert_eq!(fields.len(), n);
        let mut adj = vec![Vec::new(); n];
        for &(i, j, v) in &pairs {
            assert!(i < n && j < n && i != j);
            adj[i].push((j, v));
            adj[j].push((i, v));
        }
        GrayTables { n, pairs, adj, fields }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of nonzero terms (pairs plus nonzero fields).
    pub fn term_count(&self) -> usize {
        self.pairs.len() + self.fields.iter().filter(|f| !f.is_zero()).count()
    }

    /// Full evaluation at one configuration, O(terms).
    pub fn eval(&self, bits: u64) -> T {
        let mut acc = T::zero();
        for &(i, j, v) in &self.pairs {
            if (bits >> i ^ bits >> j) & 1 == 0 {
                acc += v;
            } else {
                acc += -v;
            }
        }
        for (i, &f) in self.fields.iter().enumerate() {
            if bits >> i & 1 == 0 {
                acc += f;
            } else {
                acc += -f;
            }
        }
        acc
    }

    /// Change in value when flipping spin `flip` out of configuration `bits`:
    /// `-2 s_flip (sum_j v_{flip,j} s_j + field_flip)`.
    pub fn delta(&self, bits: u64, flip: usize) -> T {
        let mut inner = self.fields[flip];
        for &(j, v) in &self.adj[flip] {
            if bits >> j & 1 == 0 {
                inner += v;
            } else {
                inner += -v;
            }
        }
        let twice = inner + inner;
        if bits >> flip & 1 == 0 {
            -twice
        } else {
            twice
        }
    }

    /// Visits configurations `gray_code(k)` for `k` in `k0..k1`, passing the
    /// current bits and value. Any sub-range of the canonical walk works, so
    /// parallel callers partition `0..2^n` into chunks.
    pub fn walk_range(&self, k0: u64, k1: u64, mut visit: impl FnMut(u64, T)) {
        debug_assert!(k1 <= 1u64 << self.n);
        if k0 >= k1 {
            return;
        }
        let mut bits = gray_code(k0);
        let mut value = self.eval(bits);
        let mut k = k0;
        loop {
            visit(bits, value);
            k += 1;
            if k == k1 {
                break;
            }
            let flip = k.trailing_zeros() as usize;
            value += self.delta(bits, flip);
            bits ^= 1u64 << flip;
        }
    }
}

/// Exact-energy tables for an instance.
pub fn energy_tables(inst: &IsingInstance) -> GrayTables<i64> {
    let pairs = inst
        .couplings()
        .iter()
        .map(|c| (c.i, c.j, c.value))
        .collect();
    GrayTables::new(inst.n(), pairs, inst.fields().to_vec())
}

/// Walks two tables of equal size in lockstep along the canonical walk.
pub fn walk2_range<A: Scalar, B: Scalar>(
    ta: &GrayTables<A>,
    tb: &GrayTables<B>,
    k0: u64,
    k1: u64,
    mut visit: impl FnMut(u64, A, B),
) {
    assert_eq!(ta.n, tb.n);
    debug_assert!(k1 <= 1u64 << ta.n);
    if k0 >= k1 {
        return;
    }
    let mut bits = gray_code(k0);
    let mut va = ta.eval(bits);
    let mut vb = tb.eval(bits);
    let mut k = k0;
    loop {
        visit(bits, va, vb);
        k += 1;
        if k == k1 {
            break;
        }
        let flip = k.trailing_zeros() as usize;
        va += ta.delta(bits, flip);
        vb += tb.delta(bits, flip);
        bits ^= 1u64 << flip;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gray_codes_differ_in_one_bit() {
        for k in 0..1023u64 {
            let diff = gray_code(k) ^ gray_code(k + 1);
            assert_eq!(diff.count_ones(), 1);
        }
    }

    #[test]
    fn walk_matches_full_evaluation() {
        // Small fixed form: pairs (0,1,+1), (1,2,-1), fields (1, 0, -1).
        let t = GrayTables::new(3, vec![(0, 1, 1i64), (1, 2, -1)], vec![1, 0, -1]);
        let mut seen = Vec::new();
        t.walk_range(0, 8, |bits, v| seen.push((bits, v)));
        assert_eq!(seen.len(), 8);
        for &(bits, v) in &seen {
            assert_eq!(v, t.eval(bits), "bits {bits:b}");
        }
        // Visitation covers each configuration exactly once.
        let mut bits: Vec<u64> = seen.iter().map(|&(b, _)| b).collect();
        bits.sort_unstable();
        assert_eq!(bits, (0..8).collect::<Vec<_>>());
    }

    #[test]
    fn chunked_walks_agree_with_single_walk() {
        let t = GrayTables::new(4, vec![(0, 3, 1i64), (1, 2, 1), (2, 3, -1)], vec![0, 1, -1, 1]);
        let mut whole = Vec::new();
        t.walk_range(0, 16, |b, v| whole.push((b, v)));
        let mut chunked = Vec::new();
        for (a, b) in [(0, 5), (5, 6), (6, 13), (13, 16)] {
            t.walk_range(a, b, |bi, v| chunked.push((bi, v)));
        }
        assert_eq!(whole, chunked);
    }

    #[test]
    fn lockstep_walk_tracks_both_tables() {
        let ti = GrayTables::new(3, vec![(0, 1, 1i64)], vec![0, 0, 1]);
        let tf = GrayTables::new(3, vec![(0, 1, 0.25f64)], vec![0.0, 0.0, -0.5]);
        walk2_range(&ti, &tf, 0, 8, |bits, a, b| {
            assert_eq!(a, ti.eval(bits));
            assert_eq!(b, tf.eval(bits));
        });
    }
}
