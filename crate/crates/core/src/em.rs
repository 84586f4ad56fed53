//! Monte-Carlo EM for θ.
//!
//! Each iteration runs a Gibbs E-step at the current θ (warm-started from
//! the previous E-step's final state) and replaces θ with the closed-form
//! maximizer of the Monte-Carlo Q-function. Iteration stops once both
//! variances move by less than `conv_tol`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result, SmurfError};
use crate::gibbs::{run_chain, Blocks, SweepStats};
use crate::model::{LatentState, ModelParams, PosteriorDraws};
use crate::raster::{validate_raster, Raster};
use crate::rng::{rng_from_seed, SmurfRng};

/// Lower bound applied to both variance estimates.
pub const VARIANCE_FLOOR: f64 = 1.0e-8;

/// Variance estimates above this abort the fit.
pub const VARIANCE_CEILING: f64 = 1.0e3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    pub n_gibbs_per_iter: usize,
    pub burn_in: usize,
    pub max_em_iters: usize,
    pub conv_tol: f64,
    pub seed: u64,
    pub estimate_alpha: bool,
    pub rho_x: f64,
    pub rho_z: f64,
    /// EM iterations of each one-dimensional initialization fit.
    pub init_em_iters: usize,
    /// Gibbs sweeps per initialization EM iteration.
    pub init_gibbs_per_iter: usize,
    pub init_burn_in: usize,
    /// Starting variance of both initialization fits.
    pub init_sigma2: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            n_gibbs_per_iter: 5000,
            burn_in: 500,
            max_em_iters: 100,
            conv_tol: 1e-5,
            seed: 0,
            estimate_alpha: false,
            rho_x: 1.0,
            rho_z: 1.0,
            init_em_iters: 10,
            init_gibbs_per_iter: 300,
            init_burn_in: 100,
            init_sigma2: 0.05,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        if self.burn_in >= self.n_gibbs_per_iter {
            return Err(invalid(format!(
                "burn_in ({}) must be smaller than n_gibbs_per_iter ({})",
                self.burn_in, self.n_gibbs_per_iter
            )));
        }
        if self.init_burn_in >= self.init_gibbs_per_iter {
            return Err(invalid("init_burn_in must be smaller than init_gibbs_per_iter"));
        }
        if !(self.conv_tol > 0.0) {
            return Err(invalid("conv_tol must be positive"));
        }
        if self.max_em_iters == 0 {
            return Err(invalid("max_em_iters must be at least 1"));
        }
        if !(self.init_sigma2 > 0.0) || !self.init_sigma2.is_finite() {
            return Err(invalid("init_sigma2 must be positive"));
        }
        if !self.rho_x.is_finite() || !self.rho_z.is_finite() {
            return Err(invalid("rho_x and rho_z must be finite"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub iteration: usize,
    pub sigma2_eps: f64,
    pub sigma2_del: f64,
    pub alpha_x: f64,
    pub alpha_z: f64,
}

impl TraceEntry {
    fn of(iteration: usize, p: &ModelParams) -> TraceEntry {
        TraceEntry {
            iteration,
            sigma2_eps: p.sigma2_eps,
            sigma2_del: p.sigma2_del,
            alpha_x: p.alpha_x,
            alpha_z: p.alpha_z,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub params_hat: ModelParams,
    pub initial_params: ModelParams,
    /// Retained draws of the final E-step.
    pub draws: PosteriorDraws,
    pub trace: Vec<TraceEntry>,
    pub converged: bool,
    pub iterations: usize,
    pub stats: SweepStats,
}

pub struct EStep {
    pub draws: PosteriorDraws,
    pub final_state: LatentState,
    pub stats: SweepStats,
}

/// Burns in, then retains `n_gibbs_per_iter − burn_in` draws at `params`.
pub fn e_step(
    raster: &Raster,
    params: &ModelParams,
    cfg: &FitConfig,
    rng: &mut SmurfRng,
    init: LatentState,
) -> Result<EStep> {
    cfg.validate()?;
    params.validate()?;
    init.check_against(raster)?;
    let mut state = init;
    let (draws, stats) = run_chain(
        raster,
        params,
        &mut state,
        cfg.n_gibbs_per_iter,
        cfg.burn_in,
        rng,
        Blocks::All,
        cfg.seed,
    )?;
    Ok(EStep {
        draws,
        final_state: state,
        stats,
    })
}

/// Monte-Carlo increment moments of one path family, `d_k = s_k − ρ s_{k−1}`.
struct Increments {
    /// Ê[Σ_k d_k²]
    dd: f64,
    /// Ê[Σ_k d_k u_k]
    du: f64,
    /// Σ_k u_k²
    uu: f64,
    len: usize,
}

fn increments<'a>(paths: impl Iterator<Item = &'a [f64]>, rho: f64, u: &[u8]) -> Increments {
    let (mut dd, mut du, mut count) = (0.0, 0.0, 0usize);
    for path in paths {
        let mut prev = 0.0;
        for (&s, &uk) in path.iter().zip(u) {
            let d = s - rho * prev;
            dd += d * d;
            du += d * f64::from(uk);
            prev = s;
        }
        count += 1;
    }
    let n = count as f64;
    Increments {
        dd: dd / n,
        du: du / n,
        uu: u.iter().map(|&v| f64::from(v) * f64::from(v)).sum(),
        len: u.len(),
    }
}

impl Increments {
    fn alpha(&self) -> f64 {
        if self.uu > 0.0 {
            self.du / self.uu
        } else {
            0.0
        }
    }

    /// Ê[(1/N) Σ_k (d_k − α u_k)²], expanded so one pass over draws suffices.
    fn variance(&self, alpha: f64) -> f64 {
        let v = (self.dd - 2.0 * alpha * self.du + alpha * alpha * self.uu) / self.len as f64;
        v.max(VARIANCE_FLOOR)
    }
}

/// Closed-form maximizer of the Monte-Carlo Q-function. The autoregressive
/// coefficients come from `cfg`; without α estimation the gains are carried
/// over from the parameters the draws were taken under.
pub fn m_step(draws: &PosteriorDraws, raster: &Raster, cfg: &FitConfig) -> Result<ModelParams> {
    draws.check_against(raster)?;
    let prev = draws.theta_at;
    let inc_x = increments(draws.iter().map(|(x, _)| x), cfg.rho_x, &raster.u_x);
    let inc_z = increments(draws.iter().map(|(_, z)| z), cfg.rho_z, &raster.u_z);
    let (alpha_x, alpha_z) = if cfg.estimate_alpha {
        (inc_x.alpha(), inc_z.alpha())
    } else {
        (prev.alpha_x, prev.alpha_z)
    };
    Ok(ModelParams {
        rho_x: cfg.rho_x,
        alpha_x,
        sigma2_eps: inc_x.variance(alpha_x),
        rho_z: cfg.rho_z,
        alpha_z,
        sigma2_del: inc_z.variance(alpha_z),
        estimate_alpha: cfg.estimate_alpha,
    })
}

/// One-dimensional fits with the other axis pinned at zero: the time axis on
/// trial-aggregated data gives `(σ²_ε, x)`, the trial axis on time-aggregated
/// data gives `(σ²_δ, z)`. The trial path is centred, since the time path
/// already carries the overall firing level. `w` starts at its PG means.
pub fn initialize(
    raster: &Raster,
    cfg: &FitConfig,
    rng: &mut SmurfRng,
) -> Result<(ModelParams, LatentState)> {
    cfg.validate()?;
    check_raster(raster)?;
    let mut params = ModelParams {
        rho_x: cfg.rho_x,
        alpha_x: 0.0,
        sigma2_eps: cfg.init_sigma2,
        rho_z: cfg.rho_z,
        alpha_z: 0.0,
        sigma2_del: cfg.init_sigma2,
        estimate_alpha: cfg.estimate_alpha,
    };
    let inner = FitConfig {
        estimate_alpha: false,
        ..cfg.clone()
    };

    let mut x_state = LatentState::zeros(raster.n_bins, raster.n_trials);
    for _ in 0..cfg.init_em_iters {
        let (draws, _) = run_chain(
            raster,
            &params,
            &mut x_state,
            cfg.init_gibbs_per_iter,
            cfg.init_burn_in,
            rng,
            Blocks::WithinOnly,
            cfg.seed,
        )?;
        params.sigma2_eps = m_step(&draws, raster, &inner)?.sigma2_eps;
    }

    let mut z_state = LatentState::zeros(raster.n_bins, raster.n_trials);
    for _ in 0..cfg.init_em_iters {
        let (draws, _) = run_chain(
            raster,
            &params,
            &mut z_state,
            cfg.init_gibbs_per_iter,
            cfg.init_burn_in,
            rng,
            Blocks::CrossOnly,
            cfg.seed,
        )?;
        params.sigma2_del = m_step(&draws, raster, &inner)?.sigma2_del;
    }

    let z_level = z_state.z.iter().sum::<f64>() / raster.n_trials as f64;
    let z_init: Vec<f64> = z_state.z.iter().map(|z| z - z_level).collect();
    check_variances(&params, 0)?;
    Ok((params, LatentState::from_paths(x_state.x, z_init)))
}

fn check_raster(raster: &Raster) -> Result<()> {
    let violations = validate_raster(raster);
    if violations.is_empty() {
        Ok(())
    } else {
        Err(invalid(format!(
            "invalid raster: {}",
            violations
                .iter()
                .map(|v| v.to_string())
                .collect::<Vec<_>>()
                .join("; ")
        )))
    }
}

fn check_variances(p: &ModelParams, iteration: usize) -> Result<()> {
    for (name, v) in [("sigma2_eps", p.sigma2_eps), ("sigma2_del", p.sigma2_del)] {
        if !(VARIANCE_FLOOR..=VARIANCE_CEILING).contains(&v) {
            return Err(SmurfError::NumericAbort(format!(
                "{name} = {v} left [{VARIANCE_FLOOR}, {VARIANCE_CEILING}] at EM iteration {iteration}"
            )));
        }
    }
    Ok(())
}

pub fn fit_em(raster: &Raster, cfg: &FitConfig) -> Result<FitResult> {
    fit_em_observed(raster, cfg, |_| {})
}

/// [`fit_em`] reporting each trace entry as soon as it is computed.
pub fn fit_em_observed(
    raster: &Raster,
    cfg: &FitConfig,
    mut observe: impl FnMut(&TraceEntry),
) -> Result<FitResult> {
    cfg.validate()?;
    check_raster(raster)?;
    let mut rng = rng_from_seed(cfg.seed);
    let (initial_params, mut state) = initialize(raster, cfg, &mut rng)?;
    let mut params = initial_params;
    let mut trace: Vec<TraceEntry> = Vec::with_capacity(cfg.max_em_iters);
    let mut stats = SweepStats::default();
    let mut last_draws = None;
    let mut converged = false;

    for iteration in 1..=cfg.max_em_iters {
        let step = e_step(raster, &params, cfg, &mut rng, state)?;
        state = step.final_state;
        stats.merge(step.stats);
        let next = m_step(&step.draws, raster, cfg)?;
        check_variances(&next, iteration)?;
        let entry = TraceEntry::of(iteration, &next);
        observe(&entry);
        if let Some(prev) = trace.last() {
            converged = (entry.sigma2_eps - prev.sigma2_eps).abs() < cfg.conv_tol
                && (entry.sigma2_del - prev.sigma2_del).abs() < cfg.conv_tol;
        }
        trace.push(entry);
        params = next;
        last_draws = Some(step.draws);
        if converged {
            break;
        }
    }

    Ok(FitResult {
        params_hat: params,
        initial_params,
        draws: last_draws.expect("max_em_iters >= 1"),
        iterations: trace.len(),
        trace,
        converged,
        stats,
    })
}
