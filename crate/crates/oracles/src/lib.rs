//! Slow, direct reference computations for checking the sampler and EM code.
//!
//! Nothing here shares code with the main crate: Gaussian chain posteriors
//! are solved densely, tiny-raster posteriors are integrated on a grid, and
//! M-step maximizers are found by golden-section search.

pub mod dense;
pub mod optimize;
pub mod quadrature;
