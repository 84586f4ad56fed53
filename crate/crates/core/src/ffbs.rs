//! Conditionally linear-Gaussian path sampling.
//!
//! Given the PG auxiliaries and the other axis' path, each bin contributes a
//! Gaussian pseudo-observation `(ΔN − ½)/w − other ~ N(state, 1/w)`. Those
//! collapse into one precision-weighted observation per step, after which a
//! scalar Kalman filter and backward sampler give exact joint path draws.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{check_len, invalid, Result};
use crate::model::ModelParams;
use crate::raster::Raster;

/// Which latent sequence is being sampled.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    /// `x` over time bins, collapsing across trials.
    Within,
    /// `z` over trials, collapsing across time bins.
    Cross,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PseudoObs {
    pub mean: Vec<f64>,
    /// Zero marks a step without information.
    pub precision: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterState {
    pub pred_mean: Vec<f64>,
    pub pred_var: Vec<f64>,
    pub filt_mean: Vec<f64>,
    pub filt_var: Vec<f64>,
}

impl FilterState {
    pub fn len(&self) -> usize {
        self.filt_mean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.filt_mean.is_empty()
    }
}

pub fn collapse_pseudo_obs(
    raster: &Raster,
    other: &[f64],
    w: &[f64],
    axis: Axis,
) -> Result<PseudoObs> {
    let (k_n, r_n) = (raster.n_bins, raster.n_trials);
    check_len("w", k_n * r_n, w.len())?;
    match axis {
        Axis::Within => check_len("z", r_n, other.len())?,
        Axis::Cross => check_len("x", k_n, other.len())?,
    }
    if let Some(bad) = w.iter().find(|&&v| !(v > 0.0) || !v.is_finite()) {
        return Err(invalid(format!("PG auxiliaries must be positive, found {bad}")));
    }
    let obs = match axis {
        Axis::Within => {
            let mut mean = Vec::with_capacity(k_n);
            let mut precision = Vec::with_capacity(k_n);
            for (bins_k, w_k) in raster.bins.chunks_exact(r_n).zip(w.chunks_exact(r_n)) {
                let mut prec = 0.0;
                let mut num = 0.0;
                for ((&dn, &wkr), &zr) in bins_k.iter().zip(w_k).zip(other) {
                    prec += wkr;
                    num += f64::from(dn) - 0.5 - wkr * zr;
                }
                precision.push(prec);
                mean.push(num / prec);
            }
            PseudoObs { mean, precision }
        }
        Axis::Cross => {
            let mut num = vec![0.0; r_n];
            let mut precision = vec![0.0; r_n];
            for ((bins_k, w_k), &xk) in raster
                .bins
                .chunks_exact(r_n)
                .zip(w.chunks_exact(r_n))
                .zip(other)
            {
                for (((n_r, p_r), &dn), &wkr) in
                    num.iter_mut().zip(precision.iter_mut()).zip(bins_k).zip(w_k)
                {
                    *p_r += wkr;
                    *n_r += f64::from(dn) - 0.5 - wkr * xk;
                }
            }
            let mean = num.iter().zip(&precision).map(|(n, p)| n / p).collect();
            PseudoObs { mean, precision }
        }
    };
    Ok(obs)
}

/// Kalman filter for `s_k = ρ s_{k−1} + α u_k + ε_k`, `s_0 = 0`, observed
/// through `obs.mean[k] ~ N(s_k, 1 / obs.precision[k])`.
pub fn forward_filter(
    obs: &PseudoObs,
    rho: f64,
    alpha: f64,
    u: &[u8],
    sigma2: f64,
) -> Result<FilterState> {
    if !(sigma2 > 0.0) || !sigma2.is_finite() {
        return Err(invalid(format!("innovation variance must be positive, got {sigma2}")));
    }
    let n = obs.mean.len();
    check_len("observation precision", n, obs.precision.len())?;
    check_len("input sequence", n, u.len())?;
    if obs.precision.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
        return Err(invalid("observation precisions must be finite and non-negative"));
    }

    let mut fs = FilterState {
        pred_mean: Vec::with_capacity(n),
        pred_var: Vec::with_capacity(n),
        filt_mean: Vec::with_capacity(n),
        filt_var: Vec::with_capacity(n),
    };
    let (mut m, mut v) = (0.0, 0.0);
    for k in 0..n {
        let pm = rho * m + alpha * f64::from(u[k]);
        let pv = rho * rho * v + sigma2;
        let prec = obs.precision[k];
        if prec > 0.0 {
            v = pv / (1.0 + prec * pv);
            m = pm + v * prec * (obs.mean[k] - pm);
        } else {
            v = pv;
            m = pm;
        }
        fs.pred_mean.push(pm);
        fs.pred_var.push(pv);
        fs.filt_mean.push(m);
        fs.filt_var.push(v);
    }
    Ok(fs)
}

/// One joint draw from the smoothing posterior of the filtered model.
pub fn backward_sample<R: Rng + ?Sized>(
    filter: &FilterState,
    rho: f64,
    alpha: f64,
    u: &[u8],
    sigma2: f64,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let n = filter.len();
    check_len("input sequence", n, u.len())?;
    check_len("filtered variances", n, filter.filt_var.len())?;
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut path = vec![0.0; n];
    let last = n - 1;
    let e: f64 = rng.sample(StandardNormal);
    path[last] = filter.filt_mean[last] + filter.filt_var[last].sqrt() * e;
    for k in (0..last).rev() {
        let fm = filter.filt_mean[k];
        let fv = filter.filt_var[k];
        let denom = rho * rho * fv + sigma2;
        let gain = rho * fv / denom;
        let mean = fm + gain * (path[k + 1] - rho * fm - alpha * f64::from(u[k + 1]));
        let var = fv * sigma2 / denom;
        let e: f64 = rng.sample(StandardNormal);
        path[k] = mean + var.sqrt() * e;
    }
    Ok(path)
}

/// Draws one path of `axis` from its full conditional given the other path
/// and the PG auxiliaries.
pub fn sample_path_given<R: Rng + ?Sized>(
    raster: &Raster,
    fixed_other: &[f64],
    w: &[f64],
    params: &ModelParams,
    axis: Axis,
    rng: &mut R,
) -> Result<Vec<f64>> {
    params.validate()?;
    let obs = collapse_pseudo_obs(raster, fixed_other, w, axis)?;
    let (rho, alpha, u, sigma2) = match axis {
        Axis::Within => (params.rho_x, params.alpha_x, &raster.u_x, params.sigma2_eps),
        Axis::Cross => (params.rho_z, params.alpha_z, &raster.u_z, params.sigma2_del),
    };
    let filter = forward_filter(&obs, rho, alpha, u, sigma2)?;
    backward_sample(&filter, rho, alpha, u, sigma2, rng)
}
