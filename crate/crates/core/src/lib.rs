//! Dimensions of self-affine carpets with translated rows and columns.
//!
//! The crate computes the Hausdorff, packing and box-counting dimensions of
//! carpets built from a grid pattern of rectangles whose columns and rows are
//! translated as blocks, overlapping configurations included. It bundles:
//!
//! - Moran-equation solvers for the axis and box exponents ([`moran`]),
//! - the entropy-ratio functional on the probability simplex whose maximum
//!   is the Hausdorff dimension, with a multi-start maximizer
//!   ([`variational`]),
//! - exact-arithmetic overlap diagnostics for the axis projections
//!   ([`overlap`]),
//! - constructive uniform-fibre approximations and their convergents
//!   ([`approx`]),
//! - an empirical box-counting engine with raster rendering ([`boxcount`]).
//!
//! Data-parallel operations run on rayon by default; disable the `parallel`
//! feature or pass [`ExecMode::Sequential`] for single-threaded execution.
//! Both modes produce identical results.

pub mod approx;
pub mod boxcount;
pub mod exec;
pub mod moran;
pub mod numeric;
pub mod overlap;
pub mod presets;
pub mod sampling;
pub mod system;
pub mod variational;

pub use exec::ExecMode;
pub use moran::{bm_closed_form, box_dimension_analytic, MoranExponents, Orientation};
pub use numeric::Scalar;
pub use system::{
    BaranskiSystem, CarpetKind, Cell, PatternProjections, SystemClass, SystemDefinition,
};
pub use variational::{bm_optimal_weights, eval_g, grad_g, maximize_g, ProbabilityWeights};
