//! The loop space, the Θ geometry with its cutoffs, and the fixed-point operators.

pub mod geometry;
pub mod loop_space;
pub mod operators;

pub use geometry::{
    apriori_bounds, default_alpha0, distance_cutoff, sup_embedding_constant, AprioriBounds, BetaChoice, BetaVariant, CutoffProfile,
    GeometryConfig, ThetaGeometry,
};
pub use loop_space::{FourierLoop, SpectralGrid};
pub use operators::{c_constants, eval_f, eval_f_literal, eval_g, eval_n};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FieldError {
    #[error("a priori bound overflows: exponent {exponent:.3} exceeds the representable range")]
    BoundOverflow { exponent: f64 },
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
}
