//! Lattice realization of the renormalized KPZ equation.
//!
//! Mollified cylindrical white noise drives a semi-implicit stochastic heat
//! equation; its logarithm is compared against the renormalized height
//! equation through pairings with zero-mean test functions, where divergent
//! x-independent constants are invisible.
//!
//! Everything is generic over the scalar through [`Real`] (`f32`, `f64`);
//! the `*F64` / `*F32` aliases fix it.

pub mod dump;
pub mod dynamics;
pub mod error;
pub mod grid;
pub mod noise;
pub mod quadrature;
pub mod renorm;
pub mod rng;
pub mod scalar;
pub mod stats;
pub mod stencil;
pub mod testfn;

pub use dynamics::{
    cole_hopf, ito_residual, ito_residual_path, solve_kpz, solve_she, InitialProfile, KpzOptions,
    ResidualReport, SolverConfig, Variant,
};
pub use error::{Error, Result};
pub use grid::{make_grid, pair, pair_spatial, FieldPath, GridSpec, SpaceField};
pub use noise::{
    empirical_quadratic_variation, lattice_noise_path, make_mollifier, mollify_noise,
    noise_pairing, sample_noise_window, sample_white_noise, MollifiedNoisePath, MollifierOp,
    NoiseWindow, WhiteNoiseLattice,
};
pub use quadrature::ito_constant;
pub use renorm::{
    associated, derivative_class_check, make_delta_net, nonlinearity_limit, quotient_check,
    section_at_zero, weak_residual, weak_residuals, AssociationReport, Reference, SectionReport,
    SequenceField, StrictDeltaNet, Verdict,
};
pub use rng::derive_seed;
pub use scalar::Real;
pub use stencil::spatial_stencils;
pub use testfn::{
    make_spatial_test_function, make_test_function, Bump, SpaceTimeTestFunction,
    SpatialTestFunction, TestFunctionSpec,
};

pub type GridSpecF64 = GridSpec<f64>;
pub type GridSpecF32 = GridSpec<f32>;
pub type SpaceFieldF64 = SpaceField<f64>;
pub type SpaceFieldF32 = SpaceField<f32>;
pub type FieldPathF64 = FieldPath<f64>;
pub type FieldPathF32 = FieldPath<f32>;
pub type WhiteNoiseF64 = WhiteNoiseLattice<f64>;
pub type WhiteNoiseF32 = WhiteNoiseLattice<f32>;
pub type MollifierF64 = MollifierOp<f64>;
pub type MollifierF32 = MollifierOp<f32>;
pub type NoisePathF64 = MollifiedNoisePath<f64>;
pub type NoisePathF32 = MollifiedNoisePath<f32>;
pub type TestFunctionF64 = SpaceTimeTestFunction<f64>;
pub type TestFunctionF32 = SpaceTimeTestFunction<f32>;
pub type SequenceFieldF64 = SequenceField<f64>;
pub type SequenceFieldF32 = SequenceField<f32>;
