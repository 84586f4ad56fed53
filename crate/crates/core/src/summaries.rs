//! Posterior functionals of the retained draws.
//!
//! Every quantity is evaluated per draw on the full λΔ surface and only then
//! averaged, so trial averages are taken after the joint characterization.
//! Draws are processed in fixed-size chunks; chunk partials are combined in
//! chunk order, so results do not depend on the worker count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::model::PosteriorDraws;
use crate::raster::{logistic, Raster};

/// Draws per reduction chunk.
const CHUNK_DRAWS: usize = 32;

/// Pointwise quantile levels reported for the effects.
pub const QUANTILE_LEVELS: [f64; 5] = [0.025, 0.25, 0.5, 0.75, 0.975];

/// Trials `1..=baseline_trials` form the trial-axis baseline; bins
/// `1..=baseline_bins` form the time-axis baseline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BaselineSpec {
    pub baseline_trials: usize,
    pub baseline_bins: usize,
}

impl BaselineSpec {
    /// Habituation trials and pre-cue bins of `raster`.
    pub fn from_raster(raster: &Raster) -> Result<BaselineSpec> {
        let b = BaselineSpec {
            baseline_trials: raster.cond_start_trial.saturating_sub(1),
            baseline_bins: raster.cue_bin.saturating_sub(1),
        };
        b.validate(raster.n_bins, raster.n_trials)?;
        Ok(b)
    }

    pub fn validate(&self, n_bins: usize, n_trials: usize) -> Result<()> {
        if self.baseline_trials < 1 || self.baseline_trials >= n_trials {
            return Err(invalid(format!(
                "baseline_trials must lie in 1..{n_trials}, got {}",
                self.baseline_trials
            )));
        }
        if self.baseline_bins < 1 || self.baseline_bins >= n_bins {
            return Err(invalid(format!(
                "baseline_bins must lie in 1..{n_bins}, got {}",
                self.baseline_bins
            )));
        }
        Ok(())
    }
}

/// K×R matrix in bin-major order, indexed 1-based.
#[derive(Debug, Clone, PartialEq)]
pub struct Surface {
    pub n_bins: usize,
    pub n_trials: usize,
    pub values: Vec<f64>,
}

impl Surface {
    #[inline]
    pub fn get(&self, k: usize, r: usize) -> f64 {
        self.values[(k - 1) * self.n_trials + (r - 1)]
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Per-draw samples of an effect sequence, draw-major.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectSamples {
    pub n_draws: usize,
    pub len: usize,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EffectQuantiles {
    pub index: usize,
    pub q025: f64,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
    pub q975: f64,
}

impl EffectSamples {
    pub fn draw(&self, i: usize) -> &[f64] {
        &self.values[i * self.len..(i + 1) * self.len]
    }

    pub fn posterior_mean(&self) -> Vec<f64> {
        let mut mean = vec![0.0; self.len];
        for row in self.values.chunks_exact(self.len) {
            mean.iter_mut().zip(row).for_each(|(m, v)| *m += v);
        }
        mean.iter_mut().for_each(|m| *m /= self.n_draws as f64);
        mean
    }

    /// Samples of one position across draws.
    pub fn column(&self, j: usize) -> Vec<f64> {
        self.values.iter().skip(j).step_by(self.len).copied().collect()
    }

    /// Pointwise quantiles at [`QUANTILE_LEVELS`], 1-based index.
    pub fn quantiles(&self) -> Vec<EffectQuantiles> {
        (0..self.len)
            .map(|j| {
                let mut col = self.column(j);
                col.sort_by(f64::total_cmp);
                let q = QUANTILE_LEVELS.map(|p| quantile_sorted(&col, p));
                EffectQuantiles {
                    index: j + 1,
                    q025: q[0],
                    q25: q[1],
                    median: q[2],
                    q75: q[3],
                    q975: q[4],
                }
            })
            .collect()
    }

    pub fn scaled(&self, factor: f64) -> EffectSamples {
        EffectSamples {
            values: self.values.iter().map(|v| v * factor).collect(),
            ..self.clone()
        }
    }
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    match sorted.len() {
        0 => f64::NAN,
        1 => sorted[0],
        n => {
            let h = p.clamp(0.0, 1.0) * (n - 1) as f64;
            let lo = h.floor() as usize;
            let hi = (lo + 1).min(n - 1);
            sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
        }
    }
}

/// λΔ surface of one draw, bin-major.
pub fn draw_surface(x: &[f64], z: &[f64], out: &mut Vec<f64>) {
    out.clear();
    for &xk in x {
        out.extend(z.iter().map(|&zr| logistic(xk + zr)));
    }
}

fn within_from_surface(lambda: &[f64], n_trials: usize, out: &mut Vec<f64>) {
    out.clear();
    out.extend(
        lambda
            .chunks_exact(n_trials)
            .map(|row| row.iter().sum::<f64>() / n_trials as f64),
    );
}

fn cross_from_surface(lambda: &[f64], wt: &[f64], n_trials: usize, out: &mut Vec<f64>) {
    out.clear();
    out.resize(n_trials, 0.0);
    for (row, &w) in lambda.chunks_exact(n_trials).zip(wt) {
        out.iter_mut().zip(row).for_each(|(o, l)| *o += l / w);
    }
    let k = wt.len() as f64;
    out.iter_mut().for_each(|o| *o /= k);
}

/// Adds 1 to `counts` wherever both baseline exceedance events hold.
fn exceedance_counts(
    lambda: &[f64],
    n_trials: usize,
    baseline: &BaselineSpec,
    scratch: &mut Vec<f64>,
    counts: &mut [u32],
) {
    let n_bins = lambda.len() / n_trials;
    // time-axis baseline per trial
    scratch.clear();
    scratch.resize(n_trials, 0.0);
    for row in lambda.chunks_exact(n_trials).take(baseline.baseline_bins) {
        scratch.iter_mut().zip(row).for_each(|(s, l)| *s += l);
    }
    let bk = baseline.baseline_bins as f64;
    scratch.iter_mut().for_each(|s| *s /= bk);
    for k in 0..n_bins {
        let row = &lambda[k * n_trials..(k + 1) * n_trials];
        let trial_base =
            row[..baseline.baseline_trials].iter().sum::<f64>() / baseline.baseline_trials as f64;
        let c_row = &mut counts[k * n_trials..(k + 1) * n_trials];
        for ((c, &l), &time_base) in c_row.iter_mut().zip(row).zip(scratch.iter()) {
            if l > trial_base && l > time_base {
                *c += 1;
            }
        }
    }
}

fn require_draws(draws: &PosteriorDraws) -> Result<()> {
    if draws.is_empty() {
        Err(invalid("posterior draws must be non-empty"))
    } else {
        Ok(())
    }
}

/// Pointwise posterior mean of λΔ.
pub fn cif_mean(draws: &PosteriorDraws) -> Result<Surface> {
    require_draws(draws)?;
    let (k_n, r_n) = (draws.n_bins(), draws.n_trials());
    let total = reduce_chunks(draws, vec![0.0; k_n * r_n], |acc, x, z, buf| {
        draw_surface(x, z, buf);
        acc.iter_mut().zip(buf.iter()).for_each(|(a, l)| *a += l);
    }, |a, b| a.iter_mut().zip(b).for_each(|(x, y)| *x += y));
    let n = draws.len() as f64;
    Ok(Surface {
        n_bins: k_n,
        n_trials: r_n,
        values: total.into_iter().map(|v| v / n).collect(),
    })
}

/// Quantiles at [`QUANTILE_LEVELS`] of λΔ at cell `(k, r)`.
pub fn cif_cell_quantiles(draws: &PosteriorDraws, k: usize, r: usize) -> Result<[f64; 5]> {
    require_draws(draws)?;
    if k < 1 || k > draws.n_bins() || r < 1 || r > draws.n_trials() {
        return Err(invalid(format!("cell ({k},{r}) outside the raster")));
    }
    let mut col: Vec<f64> = draws
        .iter()
        .map(|(x, z)| logistic(x[k - 1] + z[r - 1]))
        .collect();
    col.sort_by(f64::total_cmp);
    Ok(QUANTILE_LEVELS.map(|p| quantile_sorted(&col, p)))
}

/// ê^WT_{i,k}: per-draw trial average of λΔ at each bin (per-bin probability;
/// use [`EffectSamples::scaled`] with `1/Δ` for Hz).
pub fn within_trial_effect(draws: &PosteriorDraws) -> Result<EffectSamples> {
    require_draws(draws)?;
    let r_n = draws.n_trials();
    let mut values = Vec::with_capacity(draws.len() * draws.n_bins());
    let (mut lambda, mut wt) = (Vec::new(), Vec::new());
    for (x, z) in draws.iter() {
        draw_surface(x, z, &mut lambda);
        within_from_surface(&lambda, r_n, &mut wt);
        values.extend_from_slice(&wt);
    }
    Ok(EffectSamples {
        n_draws: draws.len(),
        len: draws.n_bins(),
        values,
    })
}

/// ê^CT_{i,r}: per-draw time average of λΔ relative to the same draw's
/// within-trial effect.
pub fn cross_trial_effect(draws: &PosteriorDraws) -> Result<EffectSamples> {
    require_draws(draws)?;
    let r_n = draws.n_trials();
    let mut values = Vec::with_capacity(draws.len() * r_n);
    let (mut lambda, mut wt, mut ct) = (Vec::new(), Vec::new(), Vec::new());
    for (x, z) in draws.iter() {
        draw_surface(x, z, &mut lambda);
        within_from_surface(&lambda, r_n, &mut wt);
        cross_from_surface(&lambda, &wt, r_n, &mut ct);
        values.extend_from_slice(&ct);
    }
    Ok(EffectSamples {
        n_draws: draws.len(),
        len: r_n,
        values,
    })
}

/// Fraction of draws in which λΔ(k, r) strictly exceeds both the mean over
/// baseline trials at bin `k` and the mean over baseline bins in trial `r`.
pub fn learning_probability_map(
    draws: &PosteriorDraws,
    baseline: &BaselineSpec,
) -> Result<Surface> {
    require_draws(draws)?;
    let (k_n, r_n) = (draws.n_bins(), draws.n_trials());
    baseline.validate(k_n, r_n)?;
    let counts = reduce_chunks(
        draws,
        vec![0u32; k_n * r_n],
        |acc, x, z, buf| {
            draw_surface(x, z, buf);
            let mut scratch = Vec::with_capacity(r_n);
            exceedance_counts(buf, r_n, baseline, &mut scratch, acc);
        },
        |a, b| a.iter_mut().zip(b).for_each(|(x, y)| *x += y),
    );
    let n = draws.len() as f64;
    Ok(Surface {
        n_bins: k_n,
        n_trials: r_n,
        values: counts.into_iter().map(|c| f64::from(c) / n).collect(),
    })
}

/// Folds `per_draw` over fixed chunks of draws (possibly in parallel) and
/// combines chunk partials in chunk order.
fn reduce_chunks<A, F, C>(draws: &PosteriorDraws, zero: A, per_draw: F, combine: C) -> A
where
    A: Clone + Send + Sync,
    F: Fn(&mut A, &[f64], &[f64], &mut Vec<f64>) + Sync,
    C: Fn(&mut A, A),
{
    let n_chunks = draws.len().div_ceil(CHUNK_DRAWS);
    let run = |c: usize| {
        let mut acc = zero.clone();
        let mut buf = Vec::new();
        let end = ((c + 1) * CHUNK_DRAWS).min(draws.len());
        for i in c * CHUNK_DRAWS..end {
            per_draw(&mut acc, draws.x(i), draws.z(i), &mut buf);
        }
        acc
    };
    let partials: Vec<A> = if rayon::current_num_threads() > 1 {
        (0..n_chunks).into_par_iter().map(run).collect()
    } else {
        (0..n_chunks).map(run).collect()
    };
    let mut total = zero;
    for p in partials {
        combine(&mut total, p);
    }
    total
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummarySurface {
    pub prob_map: Surface,
    pub cif_mean: Surface,
    /// Within-trial effect in Hz.
    pub wt_effect: EffectSamples,
    /// Cross-trial effect, unitless.
    pub ct_effect: EffectSamples,
    pub n_draws: usize,
}

pub fn summarize(
    draws: &PosteriorDraws,
    baseline: &BaselineSpec,
    delta_s: f64,
) -> Result<SummarySurface> {
    if !(delta_s > 0.0) {
        return Err(invalid(format!("delta_s must be positive, got {delta_s}")));
    }
    Ok(SummarySurface {
        prob_map: learning_probability_map(draws, baseline)?,
        cif_mean: cif_mean(draws)?,
        wt_effect: within_trial_effect(draws)?.scaled(1.0 / delta_s),
        ct_effect: cross_trial_effect(draws)?,
        n_draws: draws.len(),
    })
}

/// First (trial, bin) at which the map reaches `threshold` outside the
/// baseline block; 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Learning {
    pub learning_bin: usize,
    pub learning_trial: usize,
}

impl Learning {
    /// Learning time relative to cue onset.
    pub fn learning_time_ms(&self, cue_bin: usize, delta_s: f64) -> f64 {
        (self.learning_bin as f64 - cue_bin as f64) * delta_s * 1000.0
    }
}

pub fn detect_learning(
    prob_map: &Surface,
    baseline: &BaselineSpec,
    threshold: f64,
) -> Result<Option<Learning>> {
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(invalid(format!("threshold must lie in (0, 1], got {threshold}")));
    }
    baseline.validate(prob_map.n_bins, prob_map.n_trials)?;
    for r in baseline.baseline_trials + 1..=prob_map.n_trials {
        if let Some(k) = (baseline.baseline_bins + 1..=prob_map.n_bins)
            .find(|&k| prob_map.get(k, r) >= threshold)
        {
            return Ok(Some(Learning {
                learning_bin: k,
                learning_trial: r,
            }));
        }
    }
    Ok(None)
}
