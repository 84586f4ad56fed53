//! Two-dimensional state-space model of binary spike rasters.
//!
//! Each bin of a K×R raster is Bernoulli with log-odds `x_k + z_r`, where
//! `x` is a random walk over time bins within a trial and `z` a random walk
//! over trials. Inference runs a Pólya-Gamma augmented block Gibbs sampler
//! inside Monte-Carlo EM; summaries turn the retained draws into
//! within-trial and cross-trial effects and a map of where the firing rate
//! exceeds its baseline on both axes.
//!
//! ```no_run
//! use smurf::{fit_em, simulate_seeded, summarize, BaselineSpec, FitConfig, SimConfig};
//!
//! let raster = simulate_seeded(&SimConfig::default())?;
//! let fit = fit_em(&raster, &FitConfig::default())?;
//! let summary = summarize(&fit.draws, &BaselineSpec::from_raster(&raster)?, raster.delta_s)?;
//! println!("max P = {}", summary.prob_map.max());
//! # Ok::<(), smurf::SmurfError>(())
//! ```

pub mod em;
pub mod error;
pub mod ffbs;
pub mod gibbs;
pub mod io;
pub mod model;
pub mod pg;
pub mod raster;
pub mod rng;
pub mod simulate;
pub mod summaries;
pub mod sweep;

pub use em::{e_step, fit_em, fit_em_observed, initialize, m_step, FitConfig, FitResult, TraceEntry};
pub use error::{Result, SmurfError};
pub use ffbs::{backward_sample, collapse_pseudo_obs, forward_filter, Axis};
pub use gibbs::{gibbs_sweep, SweepStats};
pub use model::{LatentState, ModelParams, PosteriorDraws};
pub use pg::{pg1_mean, sample_pg1};
pub use raster::{cif, validate_raster, Raster, Violation};
pub use rng::{derive_seed, rng_from_seed, SmurfRng};
pub use simulate::{inject_error_trials, simulate_raster, simulate_seeded, SimConfig};
pub use summaries::{
    detect_learning, learning_probability_map, summarize, BaselineSpec, Learning, Surface,
    SummarySurface,
};
pub use sweep::{sensitivity_sweep, SweepConfig, SweepRow};
