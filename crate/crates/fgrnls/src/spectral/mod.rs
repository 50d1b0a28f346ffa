//! Discretized Schrödinger operator: grid, eigenpairs, projections, resolvents
//! and the spectral-density form.

mod density;
mod grid;
mod openline;
mod operator;
mod potential;

pub use density::{
    extrapolate_to_zero, histogram_density, plemelj_parts, spectral_density_form, DensityEstimate,
    DEFAULT_EPS_SCHEDULE,
};
pub use grid::{inner, norm2, pair, pair_real, to_complex, Fourier, GridSpec};
pub use openline::{exterior_ratio, outgoing_resolvent};
pub use operator::{BoxSpectrum, ModeState, OperatorModel, BOUNDARY_DECAY};
pub use potential::PotentialPreset;

/// Builds the operator for a preset on a grid.
pub fn build_operator(grid: GridSpec, preset: &PotentialPreset, c_target: Option<f64>) -> crate::Result<OperatorModel> {
    OperatorModel::build(grid, preset.sample(&grid), c_target)
}
