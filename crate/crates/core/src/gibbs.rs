//! Block Gibbs sampler over `(w, x, z)`.
//!
//! A sweep draws every `w_{k,r} ~ PG(1, |x_k + z_r|)`, then `x` given
//! `(z, w)`, then `z` given `(x, w)`. The w-field is split into fixed stripes
//! of [`STRIPE_BINS`] time bins; each stripe draws from its own stream seeded
//! from one value taken off the master stream per sweep. The output is
//! therefore identical for any number of worker threads.

use rand::RngCore;
use rayon::prelude::*;

use crate::error::{Result, SmurfError};
use crate::ffbs::{sample_path_given, Axis};
use crate::model::{LatentState, ModelParams, PosteriorDraws};
use crate::pg::{clamp_precision, sample_pg1_unchecked, MAX_TILT};
use crate::raster::Raster;
use crate::rng::{derive_seed, rng_from_seed, SmurfRng};

/// Time bins per w-field stripe.
pub const STRIPE_BINS: usize = 16;

/// Counters accumulated over sweeps.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SweepStats {
    pub sweeps: u64,
    /// PG draws floored before being used as precisions.
    pub clamped: u64,
}

impl SweepStats {
    pub fn merge(&mut self, other: SweepStats) {
        self.sweeps += other.sweeps;
        self.clamped += other.clamped;
    }
}

/// Which blocks a sweep refreshes. The partial modes keep the other path
/// fixed and serve the one-dimensional initialization fits.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Blocks {
    All,
    WithinOnly,
    CrossOnly,
}

/// Returns the state after one full sweep.
pub fn gibbs_sweep(
    state: &LatentState,
    raster: &Raster,
    params: &ModelParams,
    rng: &mut SmurfRng,
) -> Result<LatentState> {
    state.check_against(raster)?;
    params.validate()?;
    let mut next = state.clone();
    sweep_blocks(&mut next, raster, params, rng, Blocks::All)?;
    Ok(next)
}

/// Draws the whole w-field for the current paths.
pub fn refresh_w(state: &mut LatentState, n_trials: usize, rng: &mut SmurfRng) -> Result<u64> {
    let sweep_seed = rng.next_u64();
    let x = &state.x;
    let z = &state.z;
    let stripe_len = STRIPE_BINS * n_trials;
    let fill = |(s, stripe): (usize, &mut [f64])| -> Result<u64> {
        let mut srng = rng_from_seed(derive_seed(sweep_seed, &[s as u64]));
        let mut clamped = 0;
        for (row, w_k) in stripe.chunks_exact_mut(n_trials).enumerate() {
            let xk = x[s * STRIPE_BINS + row];
            for (w, &zr) in w_k.iter_mut().zip(z) {
                let c = xk + zr;
                if !(c.abs() <= MAX_TILT) {
                    return Err(SmurfError::NumericAbort(format!(
                        "PG tilt {c} at bin {} outside [-{MAX_TILT}, {MAX_TILT}]",
                        s * STRIPE_BINS + row + 1
                    )));
                }
                let (value, was_clamped) = clamp_precision(sample_pg1_unchecked(c, &mut srng));
                clamped += u64::from(was_clamped);
                *w = value;
            }
        }
        Ok(clamped)
    };
    let counts: Vec<Result<u64>> = if rayon::current_num_threads() > 1 {
        state
            .w
            .par_chunks_mut(stripe_len)
            .enumerate()
            .map(fill)
            .collect()
    } else {
        state.w.chunks_mut(stripe_len).enumerate().map(fill).collect()
    };
    counts.into_iter().sum()
}

pub(crate) fn sweep_blocks(
    state: &mut LatentState,
    raster: &Raster,
    params: &ModelParams,
    rng: &mut SmurfRng,
    blocks: Blocks,
) -> Result<SweepStats> {
    let clamped = refresh_w(state, raster.n_trials, rng)?;
    if blocks != Blocks::CrossOnly {
        state.x = sample_path_given(raster, &state.z, &state.w, params, Axis::Within, rng)?;
    }
    if blocks != Blocks::WithinOnly {
        state.z = sample_path_given(raster, &state.x, &state.w, params, Axis::Cross, rng)?;
    }
    if state.x.iter().chain(&state.z).any(|v| !v.is_finite()) {
        return Err(SmurfError::NumericAbort("latent path became non-finite".into()));
    }
    Ok(SweepStats {
        sweeps: 1,
        clamped,
    })
}

/// Runs `n_sweeps` sweeps; the first `burn_in` are discarded and the rest
/// retained. `state` is left at the final configuration.
pub(crate) fn run_chain(
    raster: &Raster,
    params: &ModelParams,
    state: &mut LatentState,
    n_sweeps: usize,
    burn_in: usize,
    rng: &mut SmurfRng,
    blocks: Blocks,
    seed: u64,
) -> Result<(PosteriorDraws, SweepStats)> {
    let mut stats = SweepStats::default();
    let keep = n_sweeps.saturating_sub(burn_in);
    let mut draws = PosteriorDraws::with_capacity(
        raster.n_bins,
        raster.n_trials,
        keep,
        *params,
        burn_in,
        seed,
    );
    for i in 0..n_sweeps {
        stats.merge(sweep_blocks(state, raster, params, rng, blocks)?);
        if i >= burn_in {
            draws.push(&state.x, &state.z)?;
        }
    }
    Ok((draws, stats))
}
