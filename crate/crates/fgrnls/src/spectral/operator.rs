use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;

use super::grid::{inner, norm2, pair_real, Fourier, GridSpec};
use crate::error::{Error, Result};

/// Boundary tolerance for the potential samples.
pub const BOUNDARY_DECAY: f64 = 1e-12;
/// Fraction of `|phi|^2` allowed near the box edge for a state to count as bound.
const EDGE_MASS: f64 = 1e-6;

/// All eigenpairs of the box operator, shifted by `c`.
#[derive(Clone, Debug)]
pub struct BoxSpectrum {
    /// Ascending eigenvalues of `H = -Delta + V + c` on the box.
    pub values: Vec<f64>,
    /// Columns are Euclidean-orthonormal eigenvectors.
    pub vectors: DMatrix<f64>,
}

/// Discretized `H = -Delta + V + c` on a periodic box.
#[derive(Debug)]
pub struct OperatorModel {
    grid: GridSpec,
    potential: Vec<f64>,
    shift: f64,
    eigenvalues: Vec<f64>,
    modes: Vec<Vec<f64>>,
    fourier: Fourier,
    spectrum: OnceLock<BoxSpectrum>,
    /// `c_target - c` when a target was supplied.
    pub shift_mismatch: Option<f64>,
}

/// Mode amplitudes and radiation part of a grid state.
#[derive(Clone, Debug, PartialEq)]
pub struct ModeState {
    pub z: Vec<C64>,
    pub f: Vec<C64>,
    pub t: f64,
}

fn kinetic_matrix(grid: &GridSpec, fourier: &Fourier) -> DMatrix<f64> {
    let m = grid.points;
    let mut col: Vec<C64> = fourier.k2.iter().map(|&v| C64::new(v, 0.0)).collect();
    fourier.inverse(&mut col);
    DMatrix::from_fn(m, m, |i, j| col[(i + m - j) % m].re)
}

fn eigen(matrix: DMatrix<f64>) -> BoxSpectrum {
    let m = matrix.nrows();
    let eig = matrix.symmetric_eigen();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut vectors = DMatrix::<f64>::zeros(m, m);
    for (c, &k) in order.iter().enumerate() {
        let src = eig.eigenvectors.column(k);
        let mut imax = 0;
        for i in 0..m {
            if src[i].abs() > src[imax].abs() {
                imax = i;
            }
        }
        let s = if src[imax] < 0.0 { -1.0 } else { 1.0 };
        for i in 0..m {
            vectors[(i, c)] = s * src[i];
        }
    }
    BoxSpectrum { values, vectors }
}

impl OperatorModel {
    /// Builds the model, tuning `c` so that the ground level sits at zero.
    pub fn build(grid: GridSpec, potential: Vec<f64>, c_target: Option<f64>) -> Result<Self> {
        if potential.len() != grid.points {
            return Err(Error::Input("potential length does not match grid".into()));
        }
        if potential.iter().any(|v| !v.is_finite()) {
            return Err(Error::Input("potential has non-finite samples".into()));
        }
        let edge = potential[0].abs().max(potential[grid.points - 1].abs());
        if edge > BOUNDARY_DECAY {
            return Err(Error::Input(format!("potential does not decay at the box boundary (|V| = {edge:.3e})")));
        }
        let fourier = Fourier::new(&grid);
        let mut mat = kinetic_matrix(&grid, &fourier);
        for i in 0..grid.points {
            mat[(i, i)] += potential[i];
        }
        let raw = eigen(mat);
        let h = grid.spacing();
        let edge_lo = 0.9 * grid.half_length;
        let mut bound = Vec::new();
        for k in 0..grid.points {
            if raw.values[k] >= 0.0 {
                break;
            }
            let col = raw.vectors.column(k);
            let outer: f64 = (0..grid.points).filter(|&i| grid.x(i).abs() >= edge_lo).map(|i| col[i] * col[i]).sum();
            if outer < EDGE_MASS {
                bound.push(k);
            }
        }
        if bound.is_empty() || bound[0] != 0 {
            return Err(Error::Hypothesis("empty discrete spectrum".into()));
        }
        let e0 = raw.values[0];
        let shift = -e0;
        let eigenvalues: Vec<f64> = bound.iter().map(|&k| if k == 0 { 0.0 } else { raw.values[k] - e0 }).collect();
        let inv = 1.0 / h.sqrt();
        let modes = bound.iter().map(|&k| raw.vectors.column(k).iter().map(|v| v * inv).collect()).collect();
        let mut values = raw.values;
        for v in values.iter_mut() {
            *v += shift;
        }
        values[0] = 0.0;
        // keep the box ordering aligned with the discrete list
        if bound.iter().enumerate().any(|(i, &k)| i != k) {
            return Err(Error::Numerical("a delocalized negative box state sits between bound states".into()));
        }
        let spectrum = OnceLock::new();
        let _ = spectrum.set(BoxSpectrum { values, vectors: raw.vectors });
        Ok(Self {
            grid,
            potential,
            shift,
            eigenvalues,
            modes,
            fourier,
            spectrum,
            shift_mismatch: c_target.map(|c| c - shift),
        })
    }

    /// Potential-free operator `-Delta + c` with no discrete modes, used for oracle checks.
    pub fn free(grid: GridSpec, c: f64) -> Self {
        let fourier = Fourier::new(&grid);
        Self {
            potential: vec![0.0; grid.points],
            grid,
            shift: c,
            eigenvalues: Vec::new(),
            modes: Vec::new(),
            fourier,
            spectrum: OnceLock::new(),
            shift_mismatch: None,
        }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn h(&self) -> f64 {
        self.grid.spacing()
    }

    pub fn potential(&self) -> &[f64] {
        &self.potential
    }

    /// The threshold `c` of the continuous spectrum.
    pub fn c(&self) -> f64 {
        self.shift
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn modes(&self) -> &[Vec<f64>] {
        &self.modes
    }

    /// Number of discrete eigenvalues minus one.
    pub fn n_bound(&self) -> usize {
        self.eigenvalues.len().saturating_sub(1)
    }

    pub fn fourier(&self) -> &Fourier {
        &self.fourier
    }

    pub fn spectrum(&self) -> &BoxSpectrum {
        self.spectrum.get_or_init(|| {
            let mut mat = kinetic_matrix(&self.grid, &self.fourier);
            for i in 0..self.grid.points {
                mat[(i, i)] += self.potential[i] + self.shift;
            }
            eigen(mat)
        })
    }

    pub fn check_grid(&self, u: &[C64]) -> Result<()> {
        if u.len() != self.grid.points {
            return Err(Error::Input(format!("grid mismatch: {} samples for a {}-point grid", u.len(), self.grid.points)));
        }
        Ok(())
    }

    /// `H u` through the FFT.
    pub fn apply(&self, u: &[C64]) -> Vec<C64> {
        let mut w = self.fourier.neg_laplacian(u);
        for i in 0..w.len() {
            w[i] += u[i] * (self.potential[i] + self.shift);
        }
        w
    }

    pub fn project_modes(&self, u: &[C64], t: f64) -> Result<ModeState> {
        self.check_grid(u)?;
        let h = self.h();
        let z: Vec<C64> = self.modes.iter().map(|phi| pair_real(h, phi, u)).collect();
        let mut f = u.to_vec();
        for (zj, phi) in z.iter().zip(&self.modes) {
            for i in 0..f.len() {
                f[i] -= zj * phi[i];
            }
        }
        Ok(ModeState { z, f, t })
    }

    pub fn reconstruct(&self, state: &ModeState) -> Vec<C64> {
        let mut u = state.f.clone();
        for (zj, phi) in state.z.iter().zip(&self.modes) {
            for i in 0..u.len() {
                u[i] += zj * phi[i];
            }
        }
        u
    }

    /// Continuous-subspace projection `P_c`.
    pub fn project_continuous(&self, u: &[C64]) -> Vec<C64> {
        let h = self.h();
        let mut f = u.to_vec();
        for phi in &self.modes {
            let zj = pair_real(h, phi, u);
            for i in 0..f.len() {
                f[i] -= zj * phi[i];
            }
        }
        f
    }

    /// Norm of the discrete part of `u`.
    pub fn discrete_norm(&self, u: &[C64]) -> f64 {
        let h = self.h();
        self.modes.iter().map(|phi| pair_real(h, phi, u).norm_sqr()).sum::<f64>().sqrt()
    }

    fn expand(&self, b: &[C64], skip: usize, weight: impl Fn(f64) -> C64) -> Vec<C64> {
        let spec = self.spectrum();
        let m = self.grid.points;
        let re = DVector::from_iterator(m, b.iter().map(|v| v.re));
        let im = DVector::from_iterator(m, b.iter().map(|v| v.im));
        let q = &spec.vectors;
        let cre = q.tr_mul(&re);
        let cim = q.tr_mul(&im);
        let mut wre = DVector::<f64>::zeros(m);
        let mut wim = DVector::<f64>::zeros(m);
        for k in skip..m {
            let c = C64::new(cre[k], cim[k]) * weight(spec.values[k]);
            wre[k] = c.re;
            wim[k] = c.im;
        }
        let xre = q * wre;
        let xim = q * wim;
        (0..m).map(|i| C64::new(xre[i], xim[i])).collect()
    }

    fn check_singular(&self, zeta: C64, skip: usize) -> Result<()> {
        if zeta.im == 0.0 {
            let spec = self.spectrum();
            if let Some(e) = spec.values[skip..].iter().find(|&&e| (e - zeta.re).abs() <= 1e-8) {
                return Err(Error::Singular(format!("zeta = {} hits the box eigenvalue {e}", zeta.re)));
            }
        }
        Ok(())
    }

    /// Box resolvent `(H - zeta)^{-1} b` from the full eigendecomposition.
    pub fn resolvent_apply(&self, zeta: C64, b: &[C64]) -> Result<Vec<C64>> {
        self.check_grid(b)?;
        if !zeta.re.is_finite() || !zeta.im.is_finite() {
            return Err(Error::Input("non-finite spectral parameter".into()));
        }
        self.check_singular(zeta, 0)?;
        let x = self.expand(b, 0, |e| 1.0 / (C64::new(e, 0.0) - zeta));
        let res = self.residual(zeta, &x, b);
        let nb = norm2(self.h(), b).max(f64::MIN_POSITIVE);
        if !(res <= 1e-9 * nb) {
            return Err(Error::Numerical(format!("resolvent residual {res:.3e} above tolerance")));
        }
        Ok(x)
    }

    /// `(H - zeta)^{-1} P_c b`: regular at the discrete eigenvalues.
    pub fn resolvent_continuous(&self, zeta: C64, b: &[C64]) -> Result<Vec<C64>> {
        self.check_grid(b)?;
        let skip = self.eigenvalues.len();
        self.check_singular(zeta, skip)?;
        Ok(self.expand(b, skip, |e| 1.0 / (C64::new(e, 0.0) - zeta)))
    }

    /// `exp(-i H t) u` on the box.
    pub fn propagate(&self, t: f64, u: &[C64]) -> Vec<C64> {
        self.expand(u, 0, |e| C64::from_polar(1.0, -e * t))
    }

    /// `||(H - zeta) x - b||`.
    pub fn residual(&self, zeta: C64, x: &[C64], b: &[C64]) -> f64 {
        let hx = self.apply(x);
        let r: Vec<C64> = (0..x.len()).map(|i| hx[i] - zeta * x[i] - b[i]).collect();
        norm2(self.h(), &r)
    }

    /// Overlaps `|(e_k, b)|^2` with the continuum box states and their energies.
    pub fn continuum_weights(&self, b: &[C64]) -> (Vec<f64>, Vec<f64>) {
        let spec = self.spectrum();
        let m = self.grid.points;
        let skip = self.eigenvalues.len();
        let h = self.h();
        let re = DVector::from_iterator(m, b.iter().map(|v| v.re));
        let im = DVector::from_iterator(m, b.iter().map(|v| v.im));
        let cre = spec.vectors.tr_mul(&re);
        let cim = spec.vectors.tr_mul(&im);
        let e = spec.values[skip..].to_vec();
        let w = (skip..m).map(|k| h * (cre[k] * cre[k] + cim[k] * cim[k])).collect();
        (e, w)
    }

    /// `max_j ||H phi_j - lambda_j phi_j||`.
    pub fn eigen_residual(&self) -> f64 {
        let h = self.h();
        self.modes
            .iter()
            .zip(&self.eigenvalues)
            .map(|(phi, &l)| {
                let u: Vec<C64> = phi.iter().map(|&v| C64::new(v, 0.0)).collect();
                let hu = self.apply(&u);
                let r: Vec<C64> = hu.iter().zip(&u).map(|(a, b)| a - b * l).collect();
                norm2(h, &r)
            })
            .fold(0.0, f64::max)
    }

    pub fn overlap(&self, a: &[C64], b: &[C64]) -> C64 {
        inner(self.h(), a, b)
    }
}
