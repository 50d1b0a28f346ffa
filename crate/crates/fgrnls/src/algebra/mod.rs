//! Polynomial Hamiltonians in `(z, zbar, f, fbar)` with explicit time harmonics.

mod expansion;
mod gradient;
mod lie;
mod potential;
mod reality;
mod term;

use std::collections::hash_map::DefaultHasher;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::sync::Arc;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

pub use expansion::{HamExpansion, TermKey};
pub use gradient::{gradient_fbar, gradient_zbar, VectorExpansion, VectorPart, VectorTerm};
pub use lie::{
    bracket_hf, generator_order, lie_derivative, lie_series, DropLedger, LedgerAudit, LieSeries,
};
pub(crate) use lie::lie_powers;
pub use potential::expand_potential_energy;
pub use reality::{check_reality, random_field, random_point, RealityReport};
pub use term::{Composite, HamTerm, Point, PointBuf, Tail, TermKind};

/// Exponent vector over the modes `0..=n`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MultiIndex(pub Vec<u32>);

impl fmt::Debug for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.0)
    }
}

impl MultiIndex {
    pub fn zeros(len: usize) -> Self {
        MultiIndex(vec![0; len])
    }

    pub fn unit(len: usize, j: usize) -> Self {
        let mut v = vec![0; len];
        v[j] = 1;
        MultiIndex(v)
    }

    pub fn from_slice(v: &[u32]) -> Self {
        MultiIndex(v.to_vec())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn order(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn get(&self, j: usize) -> u32 {
        self.0[j]
    }

    pub fn add(&self, other: &MultiIndex) -> MultiIndex {
        MultiIndex(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    /// `self - e_j`, assuming `self_j >= 1`.
    pub fn lower(&self, j: usize) -> MultiIndex {
        let mut v = self.0.clone();
        v[j] -= 1;
        MultiIndex(v)
    }

    pub fn dot(&self, lambda: &[f64]) -> f64 {
        self.0.iter().zip(lambda).map(|(&a, &l)| a as f64 * l).sum()
    }

    /// `lambda . (self - other)`.
    pub fn freq_diff(&self, other: &MultiIndex, lambda: &[f64]) -> f64 {
        self.dot(lambda) - other.dot(lambda)
    }

    /// Componentwise `self <= other`.
    pub fn le(&self, other: &MultiIndex) -> bool {
        self.0.iter().zip(&other.0).all(|(a, b)| a <= b)
    }

    /// `prod z_j^{e_j}`.
    pub fn monomial(&self, z: &[C64]) -> C64 {
        let mut p = C64::new(1.0, 0.0);
        for (&e, &zj) in self.0.iter().zip(z) {
            for _ in 0..e {
                p *= zj;
            }
        }
        p
    }

    /// `prod_j e_j!`.
    pub fn factorial(&self) -> f64 {
        self.0.iter().map(|&e| (1..=e).map(|k| k as f64).product::<f64>()).product()
    }

    /// All exponent vectors of length `len` with `|e| = order`, lexicographic.
    pub fn all_of_order(len: usize, order: u32) -> Vec<MultiIndex> {
        fn rec(len: usize, left: u32, cur: &mut Vec<u32>, out: &mut Vec<MultiIndex>) {
            if cur.len() + 1 == len {
                cur.push(left);
                out.push(MultiIndex(cur.clone()));
                cur.pop();
                return;
            }
            for e in (0..=left).rev() {
                cur.push(e);
                rec(len, left - e, cur, out);
                cur.pop();
            }
        }
        let mut out = Vec::new();
        if len == 0 {
            return out;
        }
        rec(len, order, &mut Vec::new(), &mut out);
        out.sort();
        out
    }
}

/// Grid-sampled coupling vector, shared and identified by its content.
#[derive(Clone)]
pub struct Coupling {
    data: Arc<[C64]>,
    id: u64,
}

impl fmt::Debug for Coupling {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Coupling(#{:016x}, n={})", self.id, self.data.len())
    }
}

impl PartialEq for Coupling {
    fn eq(&self, other: &Self) -> bool {
        self.id == other.id && self.data == other.data
    }
}

impl Coupling {
    pub fn new(data: Vec<C64>) -> Self {
        let mut hasher = DefaultHasher::new();
        for v in &data {
            v.re.to_bits().hash(&mut hasher);
            v.im.to_bits().hash(&mut hasher);
        }
        Self { id: hasher.finish(), data: data.into() }
    }

    pub fn from_real(data: &[f64]) -> Self {
        Self::new(data.iter().map(|&x| C64::new(x, 0.0)).collect())
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn conj(&self) -> Coupling {
        Coupling::new(self.data.iter().map(|v| v.conj()).collect())
    }

    pub fn scale(&self, c: C64) -> Coupling {
        Coupling::new(self.data.iter().map(|v| v * c).collect())
    }

    pub fn sup_norm(&self) -> f64 {
        self.data.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn l2_norm(&self, h: f64) -> f64 {
        (self.data.iter().map(|v| v.norm_sqr()).sum::<f64>() * h).sqrt()
    }

    /// Bilinear pairing with a grid vector.
    pub fn pair(&self, h: f64, v: &[C64]) -> C64 {
        crate::spectral::pair(h, &self.data, v)
    }
}
