use smurf::em::{fit_em, fit_em_observed, initialize, FitConfig, VARIANCE_FLOOR};
use smurf::summaries::{detect_learning, learning_probability_map, BaselineSpec};
use smurf::{rng_from_seed, simulate_seeded, Raster, SimConfig};

fn quick() -> FitConfig {
    FitConfig {
        n_gibbs_per_iter: 300,
        burn_in: 50,
        max_em_iters: 6,
        init_em_iters: 3,
        init_gibbs_per_iter: 100,
        init_burn_in: 20,
        seed: 17,
        ..FitConfig::default()
    }
}

fn small_design(rate: f64, seed: u64) -> Raster {
    simulate_seeded(&SimConfig {
        n_trials: 20,
        trial_len_s: 0.4,
        delta_s: 0.005,
        cue_onset_s: 0.2,
        cond_start_trial: 8,
        baseline_rate_hz: 20.0,
        conditioned_rate_hz: rate,
        seed,
        ..SimConfig::default()
    })
    .unwrap()
}

#[test]
fn fit_is_reproducible_and_trace_is_consistent() {
    let raster = small_design(80.0, 1);
    let a = fit_em(&raster, &quick()).unwrap();
    let b = fit_em(&raster, &quick()).unwrap();
    assert_eq!(a.trace, b.trace);
    assert_eq!(a.draws, b.draws);
    assert_eq!(a.trace.len(), a.iterations);
    assert_eq!(a.draws.len(), 250);
    assert_eq!(a.stats.sweeps as usize, a.iterations * 300);
    for e in &a.trace {
        assert!(e.sigma2_eps >= VARIANCE_FLOOR && e.sigma2_eps <= 1e3);
        assert!(e.sigma2_del >= VARIANCE_FLOOR && e.sigma2_del <= 1e3);
    }
    if a.converged {
        let n = a.trace.len();
        assert!(n >= 2);
        let (p, q) = (a.trace[n - 2], a.trace[n - 1]);
        assert!((p.sigma2_eps - q.sigma2_eps).abs() < 1e-5);
        assert!((p.sigma2_del - q.sigma2_del).abs() < 1e-5);
    }
    let c = fit_em(&raster, &FitConfig { seed: 18, ..quick() }).unwrap();
    assert_ne!(a.trace, c.trace);
}

#[test]
fn observer_sees_every_iteration() {
    let raster = small_design(80.0, 2);
    let mut seen = Vec::new();
    let fit = fit_em_observed(&raster, &quick(), |e| seen.push(e.iteration)).unwrap();
    assert_eq!(seen, (1..=fit.iterations).collect::<Vec<_>>());
}

#[test]
fn loose_tolerance_converges_early() {
    let raster = small_design(80.0, 3);
    let fit = fit_em(&raster, &FitConfig { conv_tol: 10.0, ..quick() }).unwrap();
    assert!(fit.converged);
    assert_eq!(fit.iterations, 2);
}

#[test]
fn initialization_is_deterministic_and_positive() {
    let raster = small_design(20.0, 4);
    let (p1, s1) = initialize(&raster, &quick(), &mut rng_from_seed(5)).unwrap();
    let (p2, s2) = initialize(&raster, &quick(), &mut rng_from_seed(5)).unwrap();
    assert_eq!((p1, &s1), (p2, &s2));
    assert!(p1.sigma2_eps > 0.0 && p1.sigma2_del > 0.0);
    // constant-rate data: initial x path stays near logit(0.1)
    let target = (0.1f64 / 0.9).ln();
    let mean = s1.x.iter().sum::<f64>() / s1.x.len() as f64;
    assert!((mean - target).abs() < 0.5, "mean initial x {mean} vs {target}");
    assert!(s1.w.iter().all(|&w| w > 0.0));
}

#[test]
fn all_zero_raster_is_handled_without_abort() {
    // Silent data favour larger variances (more prior mass on very negative
    // logits), so σ²_δ climbs rather than collapsing; short fits still
    // return normally.
    let raster = Raster::zeros(60, 12, 0.005, 20, 5).unwrap();
    let fit = fit_em(&raster, &FitConfig { max_em_iters: 10, ..quick() }).unwrap();
    let first = fit.trace.first().unwrap().sigma2_del;
    let last = fit.trace.last().unwrap().sigma2_del;
    assert!(last > first, "sigma2_del {first} -> {last}");
    assert!(fit.params_hat.sigma2_eps >= VARIANCE_FLOOR);
}

#[test]
fn strong_conditioning_is_detected_near_onset() {
    let raster = small_design(100.0, 6);
    let fit = fit_em(&raster, &quick()).unwrap();
    let base = BaselineSpec::from_raster(&raster).unwrap();
    let map = learning_probability_map(&fit.draws, &base).unwrap();
    let learning = detect_learning(&map, &base, 0.95).unwrap().expect("detected");
    assert!((8..=10).contains(&learning.learning_trial), "{learning:?}");
    assert!(learning.learning_time_ms(raster.cue_bin, raster.delta_s) <= 100.0);
}
