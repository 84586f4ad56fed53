//! Rate-ratio sensitivity sweep.
//!
//! For each conditioned rate, independent replicate rasters are simulated,
//! fitted and scanned for learning. A replicate without a detection reports
//! the last bin and last trial. Every (rate, replicate) cell draws its seeds
//! from `derive_seed(base.seed, [rate_index, replicate, stream])`, so the
//! table does not depend on the order in which cells run.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::em::{fit_em, FitConfig};
use crate::error::{invalid, Result};
use crate::rng::{derive_seed, rng_from_seed};
use crate::simulate::{simulate_raster, SimConfig};
use crate::summaries::{detect_learning, learning_probability_map, BaselineSpec, Learning};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default)]
    pub base: SimConfig,
    pub conditioned_rates_hz: Vec<f64>,
    pub replicates: usize,
    #[serde(default)]
    pub fit: FitConfig,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    /// Defaults to the habituation trials and pre-cue bins.
    #[serde(default)]
    pub baseline: Option<BaselineSpec>,
}

fn default_threshold() -> f64 {
    0.95
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(invalid("replicates must be at least 1"));
        }
        if self.conditioned_rates_hz.is_empty() {
            return Err(invalid("conditioned_rates_hz must not be empty"));
        }
        if !(self.base.baseline_rate_hz > 0.0) {
            return Err(invalid("baseline_rate_hz must be positive for a ratio sweep"));
        }
        for &rate in &self.conditioned_rates_hz {
            SimConfig {
                conditioned_rate_hz: rate,
                ..self.base.clone()
            }
            .validate()?;
        }
        if !(self.threshold > 0.0 && self.threshold <= 1.0) {
            return Err(invalid("threshold must lie in (0, 1]"));
        }
        self.fit.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReplicateOutcome {
    pub rate_index: usize,
    pub replicate: usize,
    pub detected: Option<Learning>,
    /// Detected values, or the last-bin/last-trial sentinel.
    pub learning_time_ms: f64,
    pub learning_trial: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub conditioned_rate_hz: f64,
    pub ratio: f64,
    pub detections: usize,
    pub mean_learning_time_ms: f64,
    pub mean_learning_trial: f64,
}

/// Simulates, fits and scans one replicate.
pub fn run_replicate(
    cfg: &SweepConfig,
    rate_index: usize,
    replicate: usize,
) -> Result<ReplicateOutcome> {
    let sim = SimConfig {
        conditioned_rate_hz: cfg.conditioned_rates_hz[rate_index],
        seed: derive_seed(cfg.base.seed, &[rate_index as u64, replicate as u64, 0]),
        ..cfg.base.clone()
    };
    let raster = simulate_raster(&sim, &mut rng_from_seed(sim.seed))?;
    let fit_cfg = FitConfig {
        seed: derive_seed(cfg.base.seed, &[rate_index as u64, replicate as u64, 1]),
        ..cfg.fit.clone()
    };
    let fit = fit_em(&raster, &fit_cfg)?;
    let baseline = match cfg.baseline {
        Some(b) => b,
        None => BaselineSpec::from_raster(&raster)?,
    };
    let map = learning_probability_map(&fit.draws, &baseline)?;
    let detected = detect_learning(&map, &baseline, cfg.threshold)?;
    let (bin, trial) = match detected {
        Some(l) => (l.learning_bin, l.learning_trial),
        None => (raster.n_bins, raster.n_trials),
    };
    Ok(ReplicateOutcome {
        rate_index,
        replicate,
        detected,
        learning_time_ms: (bin as f64 - raster.cue_bin as f64) * raster.delta_s * 1000.0,
        learning_trial: trial,
        converged: fit.converged,
    })
}

/// Runs every (rate, replicate) cell, in parallel on the current rayon pool.
pub fn sweep_outcomes(cfg: &SweepConfig) -> Result<Vec<ReplicateOutcome>> {
    cfg.validate()?;
    let cells: Vec<(usize, usize)> = (0..cfg.conditioned_rates_hz.len())
        .flat_map(|i| (0..cfg.replicates).map(move |j| (i, j)))
        .collect();
    cells
        .par_iter()
        .map(|&(i, j)| run_replicate(cfg, i, j))
        .collect()
}

/// Averages replicate outcomes per rate.
pub fn tabulate(cfg: &SweepConfig, outcomes: &[ReplicateOutcome]) -> Vec<SweepRow> {
    cfg.conditioned_rates_hz
        .iter()
        .enumerate()
        .map(|(i, &rate)| {
            let cell: Vec<&ReplicateOutcome> =
                outcomes.iter().filter(|o| o.rate_index == i).collect();
            let n = cell.len().max(1) as f64;
            SweepRow {
                conditioned_rate_hz: rate,
                ratio: rate / cfg.base.baseline_rate_hz,
                detections: cell.iter().filter(|o| o.detected.is_some()).count(),
                mean_learning_time_ms: cell.iter().map(|o| o.learning_time_ms).sum::<f64>() / n,
                mean_learning_trial: cell.iter().map(|o| o.learning_trial as f64).sum::<f64>()
                    / n,
            }
        })
        .collect()
}

pub fn sensitivity_sweep(cfg: &SweepConfig) -> Result<Vec<SweepRow>> {
    let outcomes = sweep_outcomes(cfg)?;
    Ok(tabulate(cfg, &outcomes))
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out =
        String::from("conditioned_rate_hz,ratio,detections,mean_learning_time_ms,mean_learning_trial\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.conditioned_rate_hz, r.ratio, r.detections, r.mean_learning_time_ms, r.mean_learning_trial
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_sweep() -> SweepConfig {
        SweepConfig {
            base: SimConfig {
                n_trials: 8,
                trial_len_s: 0.2,
                delta_s: 0.005,
                cue_onset_s: 0.1,
                cond_start_trial: 4,
                seed: 5,
                ..SimConfig::default()
            },
            conditioned_rates_hz: vec![20.0, 25.0, 30.0, 35.0, 40.0, 45.0],
            replicates: 1,
            fit: FitConfig {
                n_gibbs_per_iter: 30,
                burn_in: 10,
                max_em_iters: 2,
                init_em_iters: 1,
                init_gibbs_per_iter: 20,
                init_burn_in: 5,
                ..FitConfig::default()
            },
            threshold: 0.95,
            baseline: None,
        }
    }

    #[test]
    fn one_row_per_rate_with_ratios() {
        let cfg = tiny_sweep();
        let rows = sensitivity_sweep(&cfg).unwrap();
        assert_eq!(rows.len(), 6);
        let ratios: Vec<f64> = rows.iter().map(|r| r.ratio).collect();
        assert_eq!(ratios, vec![1.0, 1.25, 1.5, 1.75, 2.0, 2.25]);
        let csv = sweep_csv(&rows);
        assert_eq!(csv.lines().count(), 7);
        assert!(csv.starts_with("conditioned_rate_hz,ratio,detections"));
    }

    #[test]
    fn sentinel_is_last_bin_and_trial() {
        let cfg = tiny_sweep();
        let o = run_replicate(&cfg, 0, 0).unwrap();
        if o.detected.is_none() {
            assert_eq!(o.learning_trial, 8);
            assert!((o.learning_time_ms - (40.0 - 21.0) * 5.0).abs() < 1e-9);
        }
    }

    #[test]
    fn outcomes_do_not_depend_on_thread_count() {
        let cfg = SweepConfig {
            conditioned_rates_hz: vec![20.0, 60.0],
            replicates: 2,
            ..tiny_sweep()
        };
        let one = sweep_outcomes(&cfg).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let three = pool.install(|| sweep_outcomes(&cfg).unwrap());
        assert_eq!(one, three);
    }

    #[test]
    fn rejects_bad_configs() {
        let mut cfg = tiny_sweep();
        cfg.replicates = 0;
        assert!(cfg.validate().is_err());
        let mut cfg = tiny_sweep();
        cfg.conditioned_rates_hz = vec![300.0];
        assert!(cfg.validate().is_err());
    }
}
