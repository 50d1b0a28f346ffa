use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64 as C64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform periodic grid on `[-L, L)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub half_length: f64,
    pub points: usize,
}

impl GridSpec {
    pub fn new(half_length: f64, points: usize) -> Result<Self> {
        if !(half_length > 0.0) || !half_length.is_finite() {
            return Err(Error::Input(format!("box half-length must be positive, got {half_length}")));
        }
        if points < 64 || !points.is_power_of_two() {
            return Err(Error::Input(format!("point count must be a power of two >= 64, got {points}")));
        }
        Ok(Self { half_length, points })
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_length / self.points as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        -self.half_length + i as f64 * self.spacing()
    }

    pub fn coords(&self) -> Vec<f64> {
        (0..self.points).map(|i| self.x(i)).collect()
    }

    /// Angular wavenumbers in FFT order. The Nyquist bin carries `-pi/h`.
    pub fn wavenumbers(&self) -> Vec<f64> {
        let m = self.points as i64;
        let dk = PI / self.half_length;
        (0..m)
            .map(|n| if n < m / 2 { n as f64 * dk } else { (n - m) as f64 * dk })
            .collect()
    }

    pub fn sample<F: Fn(f64) -> f64>(&self, f: F) -> Vec<f64> {
        (0..self.points).map(|i| f(self.x(i))).collect()
    }

    pub fn sample_complex<F: Fn(f64) -> C64>(&self, f: F) -> Vec<C64> {
        (0..self.points).map(|i| f(self.x(i))).collect()
    }
}

/// Bilinear quadrature pairing `h * sum a_i b_i`.
pub fn pair(h: f64, a: &[C64], b: &[C64]) -> C64 {
    let mut s = C64::new(0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        s += x * y;
    }
    s * h
}

/// Hermitian inner product `h * sum conj(a_i) b_i`.
pub fn inner(h: f64, a: &[C64], b: &[C64]) -> C64 {
    let mut s = C64::new(0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        s += x.conj() * y;
    }
    s * h
}

pub fn pair_real(h: f64, a: &[f64], b: &[C64]) -> C64 {
    let mut s = C64::new(0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        s += y * *x;
    }
    s * h
}

pub fn norm2(h: f64, a: &[C64]) -> f64 {
    (a.iter().map(|v| v.norm_sqr()).sum::<f64>() * h).sqrt()
}

pub fn to_complex(v: &[f64]) -> Vec<C64> {
    v.iter().map(|&x| C64::new(x, 0.0)).collect()
}

/// FFT plans and symbols for one grid.
#[derive(Clone)]
pub struct Fourier {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    pub k: Vec<f64>,
    pub k2: Vec<f64>,
}

impl std::fmt::Debug for Fourier {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Fourier({} points)", self.k.len())
    }
}

impl Fourier {
    pub fn new(grid: &GridSpec) -> Self {
        let mut planner = FftPlanner::new();
        let k = grid.wavenumbers();
        let k2 = k.iter().map(|v| v * v).collect();
        Self {
            forward: planner.plan_fft_forward(grid.points),
            inverse: planner.plan_fft_inverse(grid.points),
            k,
            k2,
        }
    }

    pub fn len(&self) -> usize {
        self.k.len()
    }

    pub fn is_empty(&self) -> bool {
        self.k.is_empty()
    }

    pub fn forward(&self, u: &mut [C64]) {
        self.forward.process(u);
    }

    /// Inverse transform including the `1/M` normalization.
    pub fn inverse(&self, u: &mut [C64]) {
        self.inverse.process(u);
        let s = 1.0 / u.len() as f64;
        for v in u.iter_mut() {
            *v *= s;
        }
    }

    /// Multiply by a Fourier symbol.
    pub fn apply_symbol<F: Fn(usize) -> C64>(&self, u: &mut [C64], symbol: F) {
        self.forward(u);
        for (n, v) in u.iter_mut().enumerate() {
            *v *= symbol(n);
        }
        self.inverse(u);
    }

    /// `-u''` with the spectral symbol `k^2`.
    pub fn neg_laplacian(&self, u: &[C64]) -> Vec<C64> {
        let mut w = u.to_vec();
        self.apply_symbol(&mut w, |n| C64::new(self.k2[n], 0.0));
        w
    }

    /// Spectral first derivative with the Nyquist mode dropped.
    pub fn derivative(&self, u: &[C64]) -> Vec<C64> {
        let m = self.k.len();
        let mut w = u.to_vec();
        self.apply_symbol(&mut w, |n| if n == m / 2 { C64::new(0.0, 0.0) } else { C64::new(0.0, self.k[n]) });
        w
    }
}
