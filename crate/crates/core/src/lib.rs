//! Spectral toolkit for discrete Schrodinger operators on finite lattice
//! boxes: exact finite-propagation checks, Chebyshev kernel approximation
//! with certified decay bounds, smoothed spectral projections, cosine
//! transform estimates, and the combinatorics behind square-root scaling.

pub mod cosine_transform;
pub mod error;
pub mod gevrey_comb;
pub mod lattice;
pub mod poly_calculus;
pub mod propagation;
pub mod quadrature;
pub mod scalar;
pub mod smoothfn;
pub mod spectral_locality;

pub use error::{Error, Result};
