//! Synthetic rasters: the two-region conditioning design, error trials, and
//! draws from the generative model itself.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::model::ModelParams;
use crate::raster::{logistic, Raster};
use crate::rng::{rng_from_seed, SmurfRng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorTrials {
    pub start_trial: usize,
    pub count: usize,
}

/// Two-region design: bins at or after the cue in trials at or after
/// `cond_start_trial` fire at `conditioned_rate_hz`, everything else at
/// `baseline_rate_hz`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub n_trials: usize,
    pub trial_len_s: f64,
    pub delta_s: f64,
    pub cue_onset_s: f64,
    pub cond_start_trial: usize,
    pub baseline_rate_hz: f64,
    pub conditioned_rate_hz: f64,
    pub error_trials: Option<ErrorTrials>,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            n_trials: 45,
            trial_len_s: 2.0,
            delta_s: 0.001,
            cue_onset_s: 1.0,
            cond_start_trial: 16,
            baseline_rate_hz: 20.0,
            conditioned_rate_hz: 60.0,
            error_trials: None,
            seed: 0,
        }
    }
}

impl SimConfig {
    pub fn n_bins(&self) -> usize {
        (self.trial_len_s / self.delta_s).round() as usize
    }

    /// First bin (1-based) starting at or after cue onset.
    pub fn cue_bin(&self) -> usize {
        (self.cue_onset_s / self.delta_s).round() as usize + 1
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta_s > 0.0) || !self.delta_s.is_finite() {
            return Err(invalid("delta_s must be positive"));
        }
        if !(self.trial_len_s > 0.0) || self.n_bins() == 0 {
            return Err(invalid("trial_len_s must span at least one bin"));
        }
        if !(self.cue_onset_s >= 0.0 && self.cue_onset_s < self.trial_len_s) {
            return Err(invalid(format!(
                "cue_onset_s ({}) must lie in [0, trial_len_s = {})",
                self.cue_onset_s, self.trial_len_s
            )));
        }
        if self.cue_bin() > self.n_bins() {
            return Err(invalid("cue onset falls past the last bin"));
        }
        if self.n_trials == 0 || self.cond_start_trial < 1 || self.cond_start_trial > self.n_trials
        {
            return Err(invalid(format!(
                "cond_start_trial ({}) must lie in 1..={}",
                self.cond_start_trial, self.n_trials
            )));
        }
        for (name, rate) in [
            ("baseline_rate_hz", self.baseline_rate_hz),
            ("conditioned_rate_hz", self.conditioned_rate_hz),
        ] {
            if !(rate >= 0.0) || !rate.is_finite() {
                return Err(invalid(format!("{name} must be non-negative, got {rate}")));
            }
            if rate * self.delta_s > 1.0 {
                return Err(invalid(format!(
                    "{name} * delta_s = {} exceeds 1",
                    rate * self.delta_s
                )));
            }
        }
        if let Some(e) = self.error_trials {
            check_error_range(e.start_trial, e.count, self.n_trials)?;
        }
        Ok(())
    }
}

pub fn simulate_raster(cfg: &SimConfig, rng: &mut SmurfRng) -> Result<Raster> {
    cfg.validate()?;
    let (k_n, r_n) = (cfg.n_bins(), cfg.n_trials);
    let cue_bin = cfg.cue_bin();
    let p_base = cfg.baseline_rate_hz * cfg.delta_s;
    let p_cond = cfg.conditioned_rate_hz * cfg.delta_s;
    let mut bins = Vec::with_capacity(k_n * r_n);
    for k in 1..=k_n {
        for r in 1..=r_n {
            let p = if k >= cue_bin && r >= cfg.cond_start_trial {
                p_cond
            } else {
                p_base
            };
            bins.push(u8::from(rng.gen::<f64>() < p));
        }
    }
    let raster = Raster::new(k_n, r_n, bins, cfg.delta_s, cue_bin, cfg.cond_start_trial)?;
    match cfg.error_trials {
        Some(e) => inject_error_trials(&raster, e.start_trial, e.count),
        None => Ok(raster),
    }
}

/// [`simulate_raster`] driven by `cfg.seed`.
pub fn simulate_seeded(cfg: &SimConfig) -> Result<Raster> {
    simulate_raster(cfg, &mut rng_from_seed(cfg.seed))
}

fn check_error_range(start_trial: usize, count: usize, n_trials: usize) -> Result<()> {
    if count == 0 {
        return Ok(());
    }
    if start_trial < 1 || start_trial + count - 1 > n_trials {
        return Err(invalid(format!(
            "error trials {start_trial}..{} outside 1..={n_trials}",
            start_trial + count - 1
        )));
    }
    Ok(())
}

/// Copy of `raster` with trials `start_trial..start_trial + count` silenced.
pub fn inject_error_trials(raster: &Raster, start_trial: usize, count: usize) -> Result<Raster> {
    check_error_range(start_trial, count, raster.n_trials)?;
    let mut out = raster.clone();
    for k in 1..=out.n_bins {
        for r in start_trial..start_trial + count {
            out.set(k, r, 0);
        }
    }
    Ok(out)
}

/// Draws `(x, z)` from the state equations and Bernoulli bins from the
/// logistic link. Inputs follow the cue/conditioning indicators.
pub fn simulate_from_model(
    n_bins: usize,
    n_trials: usize,
    params: &ModelParams,
    delta_s: f64,
    cue_bin: usize,
    cond_start_trial: usize,
    rng: &mut SmurfRng,
) -> Result<(Raster, Vec<f64>, Vec<f64>)> {
    params.validate()?;
    let template = Raster::zeros(n_bins, n_trials, delta_s, cue_bin, cond_start_trial)?;
    let walk = |n: usize, rho: f64, alpha: f64, s2: f64, u: &[u8], rng: &mut SmurfRng| {
        let sd = s2.sqrt();
        let mut prev = 0.0;
        (0..n)
            .map(|i| {
                let e: f64 = rng.sample(StandardNormal);
                prev = rho * prev + alpha * f64::from(u[i]) + sd * e;
                prev
            })
            .collect::<Vec<f64>>()
    };
    let x = walk(n_bins, params.rho_x, params.alpha_x, params.sigma2_eps, &template.u_x, rng);
    let z = walk(n_trials, params.rho_z, params.alpha_z, params.sigma2_del, &template.u_z, rng);
    let mut bins = Vec::with_capacity(n_bins * n_trials);
    for &xk in &x {
        for &zr in &z {
            bins.push(u8::from(rng.gen::<f64>() < logistic(xk + zr)));
        }
    }
    let raster = Raster { bins, ..template };
    Ok((raster, x, z))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::validate_raster;

    #[test]
    fn default_geometry() {
        let cfg = SimConfig::default();
        assert_eq!(cfg.n_bins(), 2000);
        assert_eq!(cfg.cue_bin(), 1001);
        assert!((cfg.baseline_rate_hz * cfg.delta_s - 0.02).abs() < 1e-15);
        assert!((cfg.conditioned_rate_hz * cfg.delta_s - 0.06).abs() < 1e-15);
        let coarse = SimConfig {
            delta_s: 0.005,
            ..SimConfig::default()
        };
        assert_eq!((coarse.n_bins(), coarse.cue_bin()), (400, 201));
    }

    #[test]
    fn same_seed_same_raster() {
        let cfg = SimConfig {
            seed: 3,
            ..SimConfig::default()
        };
        let a = simulate_seeded(&cfg).unwrap();
        assert_eq!(a, simulate_seeded(&cfg).unwrap());
        assert!(validate_raster(&a).is_empty());
        let b = simulate_seeded(&SimConfig { seed: 4, ..cfg }).unwrap();
        assert_ne!(a, b);
    }

    #[test]
    fn indicators_follow_landmarks() {
        let r = simulate_seeded(&SimConfig::default()).unwrap();
        assert_eq!(r.u_x.iter().position(|&u| u == 1), Some(1000));
        assert_eq!(r.u_z.iter().position(|&u| u == 1), Some(15));
    }

    #[test]
    fn invalid_configs() {
        let too_fast = SimConfig {
            conditioned_rate_hz: 2000.0,
            ..SimConfig::default()
        };
        assert!(too_fast.validate().is_err());
        let late_cue = SimConfig {
            cue_onset_s: 2.0,
            ..SimConfig::default()
        };
        assert!(late_cue.validate().is_err());
        let bad_start = SimConfig {
            cond_start_trial: 46,
            ..SimConfig::default()
        };
        assert!(bad_start.validate().is_err());
        let negative = SimConfig {
            baseline_rate_hz: -1.0,
            ..SimConfig::default()
        };
        assert!(negative.validate().is_err());
    }

    #[test]
    fn error_trials_are_silenced() {
        let cfg = SimConfig {
            delta_s: 0.005,
            seed: 1,
            ..SimConfig::default()
        };
        let r = simulate_seeded(&cfg).unwrap();
        let e = inject_error_trials(&r, 21, 3).unwrap();
        for k in 1..=r.n_bins {
            for t in 1..=r.n_trials {
                if (21..=23).contains(&t) {
                    assert_eq!(e.get(k, t), 0);
                } else {
                    assert_eq!(e.get(k, t), r.get(k, t));
                }
            }
        }
        assert_eq!(inject_error_trials(&e, 21, 3).unwrap(), e);
        assert_eq!(inject_error_trials(&r, 10, 0).unwrap(), r);
        assert!(inject_error_trials(&r, 46, 1).is_err());
        assert!(inject_error_trials(&r, 44, 3).is_err());
        assert!(inject_error_trials(&r, 0, 1).is_err());
    }

    #[test]
    fn config_error_trials_applied() {
        let cfg = SimConfig {
            delta_s: 0.005,
            conditioned_rate_hz: 200.0,
            error_trials: Some(ErrorTrials {
                start_trial: 21,
                count: 3,
            }),
            ..SimConfig::default()
        };
        let r = simulate_seeded(&cfg).unwrap();
        let silent: u32 = (1..=r.n_bins).map(|k| u32::from(r.get(k, 22))).sum();
        assert_eq!(silent, 0);
        assert!(r.total_events() > 0);
    }

    #[test]
    fn model_draws_have_consistent_shapes() {
        let mut rng = rng_from_seed(2);
        let p = ModelParams {
            sigma2_eps: 0.01,
            sigma2_del: 0.05,
            ..ModelParams::default()
        };
        let (r, x, z) = simulate_from_model(30, 8, &p, 0.001, 10, 4, &mut rng).unwrap();
        assert_eq!((x.len(), z.len()), (30, 8));
        assert!(validate_raster(&r).is_empty());
    }
}
