//! Problem instances: spin configurations, +/-1 couplings and fields, exact
//! energies, and the versioned JSON file format.
//!
//! Spins are encoded bitwise with `s_i = 1 - 2*bit_i`, so bit 0 is spin +1 and
//! the all-zero word is the all-up configuration. With coefficients in
//! {0, +/-1} every energy is an integer.

use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::error::{Error, Result};
use crate::Energy;

/// Largest spin count full enumeration will ever be asked to handle.
pub const MAX_SPINS: usize = 30;

/// One spin configuration of a fixed-size system.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub struct SpinConfig {
    bits: u64,
    n: usize,
}

impl SpinConfig {
    pub fn new(bits: u64, n: usize) -> Result<Self> {
        if n == 0 || n > MAX_SPINS {
            return Err(Error::InvalidParameter(format!(
                "spin count must be in 1..={MAX_SPINS}, got {n}"
            )));
        }
        if bits >> n != 0 {
            return Err(Error::InvalidParameter(format!(
                "configuration bits 0x{bits:x} exceed n = {n}"
            )));
        }
        Ok(SpinConfig { bits, n })
    }

    /// The all-up configuration (every spin +1).
    pub fn all_up(n: usize) -> Self {
        SpinConfig::new(0, n).expect("valid n")
    }

    pub fn bits(&self) -> u64 {
        self.bits
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Spin value +1 or -1 at site `i`.
    pub fn spin(&self, i: usize) -> Energy {
        assert!(i < self.n, "spin index {i} out of range for n = {}", self.n);
        1 - 2 * ((self.bits >> i) & 1) as Energy
    }

    pub fn flip(&self, i: usize) -> Self {
        assert!(i < self.n);
        SpinConfig { bits: self.bits ^ (1 << i), n: self.n }
    }

    /// Global spin reversal.
    pub fn flip_all(&self) -> Self {
        let mask = (1u64 << self.n) - 1;
        SpinConfig { bits: self.bits ^ mask, n: self.n }
    }

    /// Sign string, site 0 first: `++-+...`.
    pub fn spins_string(&self) -> String {
        (0..self.n)
            .map(|i| if self.spin(i) > 0 { '+' } else { '-' })
            .collect()
    }
}

/// One pairwise coupling `value * s_i * s_j` with `i < j`.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct Coupling {
    pub i: usize,
    pub j: usize,
    pub value: Energy,
}

/// An Ising instance with couplings and fields in {0, +/-1}.
///
/// Couplings are kept sorted lexicographically by `(i, j)`; that order is the
/// canonical one for files, noise-draw alignment, and generator determinism.
#[derive(Clone, PartialEq, Debug)]
pub struct IsingInstance {
    n: usize,
    couplings: Vec<Coupling>,
    fields: Vec<Energy>,
    label: Option<String>,
}

impl IsingInstance {
    pub fn new(
        n: usize,
        couplings: Vec<(usize, usize, Energy)>,
        fields: Vec<Energy>,
        label: Option<String>,
    ) -> Result<Self> {
        if n == 0 || n > MAX_SPINS {
            return Err(Error::InvalidInstance(format!(
                "spin count must be in 1..={MAX_SPINS}, got {n}"
            )));
        }
        if fields.len() != n {
            return Err(Error::InvalidInstance(format!(
                "expected {n} fields, got {}",
                fields.len()
            )));
        }
        for (i, &b) in fields.iter().enumerate() {
            if !(-1..=1).contains(&b) {
                return Err(Error::InvalidInstance(format!(
                    "field B_{i} = {b} outside {{-1, 0, 1}}"
                )));
            }
        }
        let mut sorted: Vec<Coupling> = Vec::with_capacity(couplings.len());
        for (i, j, value) in couplings {
            if i >= j {
                return Err(Error::InvalidInstance(format!(
                    "coupling ({i}, {j}) must have i < j"
                )));
            }
            if j >= n {
                return Err(Error::InvalidInstance(format!(
                    "coupling ({i}, {j}) out of range for n = {n}"
                )));
            }
            if value != 1 && value != -1 {
                return Err(Error::InvalidInstance(format!(
                    "coupling ({i}, {j}) value {value} outside {{-1, 1}} (omit zero couplings)"
                )));
            }
            sorted.push(Coupling { i, j, value });
        }
        sorted.sort_by_key(|c| (c.i, c.j));
        for w in sorted.windows(2) {
            if (w[0].i, w[0].j) == (w[1].i, w[1].j) {
                return Err(Error::InvalidInstance(format!(
                    "duplicate coupling ({}, {})",
                    w[0].i, w[0].j
                )));
            }
        }
        Ok(IsingInstance { n, couplings: sorted, fields, label })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn couplings(&self) -> &[Coupling] {
        &self.couplings
    }

    pub fn fields(&self) -> &[Energy] {
        &self.fields
    }

    pub fn label(&self) -> Option<&str> {
        self.label.as_deref()
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }

    pub fn coupling_count(&self) -> usize {
        self.couplings.len()
    }

    /// Number of nonzero fields.
    pub fn field_count(&self) -> usize {
        self.fields.iter().filter(|&&b| b != 0).count()
    }

    /// Total nonzero terms `m`; the spectrum lies in `[-m, m]` and shares the
    /// parity of `m`.
    pub fn term_count(&self) -> usize {
        self.coupling_count() + self.field_count()
    }

    /// `sum J^2 + sum B^2` (equals [`Self::term_count`] for +/-1 coefficients);
    /// exactly the spectral second moment `2^-n sum_s E(s)^2`.
    pub fn sum_sq_coefficients(&self) -> Energy {
        self.term_count() as Energy
    }

    fn check_config(&self, s: &SpinConfig) -> Result<()> {
        if s.n() != self.n {
            return Err(Error::SpinCountMismatch { expected: self.n, got: s.n() });
        }
        Ok(())
    }

    /// Exact energy `sum J_ij s_i s_j + sum B_i s_i`.
    pub fn energy(&self, s: &SpinConfig) -> Result<Energy> {
        self.check_config(s)?;
        let mut e = 0;
        for c in &self.couplings {
            e += c.value * s.spin(c.i) * s.spin(c.j);
        }
        for (i, &b) in self.fields.iter().enumerate() {
            e += b * s.spin(i);
        }
        Ok(e)
    }

    /// Energy change from flipping spin `flip`:
    /// `-2 s_flip (sum_j J_{flip,j} s_j + B_flip)`.
    pub fn energy_delta(&self, s: &SpinConfig, flip: usize) -> Result<Energy> {
        self.check_config(s)?;
        if flip >= self.n {
            return Err(Error::SpinIndexOutOfRange { index: flip, n: self.n });
        }
        let mut inner = self.fields[flip];
        for c in &self.couplings {
            if c.i == flip {
                inner += c.value * s.spin(c.j);
            } else if c.j == flip {
                inner += c.value * s.spin(c.i);
            }
        }
        Ok(-2 * s.spin(flip) * inner)
    }

    /// Whether the coupling graph connects all `n` sites (fields do not count;
    /// an isolated site means `false` for n > 1).
    pub fn connected(&self) -> bool {
        if self.n == 1 {
            return true;
        }
        let mut parent: Vec<usize> = (0..self.n).collect();
        fn find(parent: &mut Vec<usize>, mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        let mut components = self.n;
        for c in &self.couplings {
            let (a, b) = (find(&mut parent, c.i), find(&mut parent, c.j));
            if a != b {
                parent[a] = b;
                components -= 1;
            }
        }
        components == 1
    }

    /// Serializes to the version-1 JSON file format, optionally embedding a
    /// decision threshold `K`.
    pub fn to_json(&self, k: Option<Energy>) -> String {
        let repr = FileRepr {
            version: 1,
            n: self.n,
            couplings: self.couplings.iter().map(|c| (c.i, c.j, c.value)).collect(),
            fields: self.fields.clone(),
            label: self.label.clone(),
            k,
        };
        let mut s = serde_json::to_string_pretty(&repr).expect("serializable");
        s.push('\n');
        s
    }

    /// Parses the version-1 JSON file format; returns the instance and the
    /// embedded threshold, if any.
    pub fn from_json(text: &str) -> Result<(Self, Option<Energy>)> {
        let repr: FileRepr = serde_json::from_str(text)?;
        if repr.version != 1 {
            return Err(Error::Parse(format!(
                "unsupported file version {} (this build reads version 1)",
                repr.version
            )));
        }
        let inst = IsingInstance::new(repr.n, repr.couplings, repr.fields, repr.label)?;
        Ok((inst, repr.k))
    }

    pub fn write_file(&self, path: impl AsRef<Path>, k: Option<Energy>) -> Result<()> {
        std::fs::write(path, self.to_json(k))?;
        Ok(())
    }

    pub fn read_file(path: impl AsRef<Path>) -> Result<(Self, Option<Energy>)> {
        let text = std::fs::read_to_string(path)?;
        IsingInstance::from_json(&text)
    }
}

/// An instance paired with a decision threshold: is the ground energy below `k`?
#[derive(Clone, Debug)]
pub struct DecisionInstance {
    pub instance: IsingInstance,
    pub k: Energy,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileRepr {
    version: u32,
    n: usize,
    couplings: Vec<(usize, usize, Energy)>,
    fields: Vec<Energy>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    label: Option<String>,
    #[serde(rename = "K", default, skip_serializing_if = "Option::is_none")]
    k: Option<Energy>,
}
