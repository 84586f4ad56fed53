use proptest::prelude::*;
use smurf::raster::{cif, logistic};
use smurf::summaries::{cross_trial_effect, detect_learning, learning_probability_map, BaselineSpec};
use smurf::{rng_from_seed, sample_pg1, simulate_raster, validate_raster, ModelParams, PosteriorDraws, Raster, SimConfig};

fn draw_set(n: usize, k_n: usize, r_n: usize, seed: u64) -> PosteriorDraws {
    use rand::Rng;
    let mut rng = rng_from_seed(seed);
    let pairs: Vec<(Vec<f64>, Vec<f64>)> = (0..n)
        .map(|_| {
            (
                (0..k_n).map(|_| rng.gen_range(-4.0..0.0)).collect(),
                (0..r_n).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            )
        })
        .collect();
    PosteriorDraws::from_pairs(&pairs, ModelParams::default()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn cif_is_symmetric_bounded_and_monotone(x in -50.0f64..50.0, z in -50.0f64..50.0, d in 0.01f64..5.0) {
        let a = cif(x, z).unwrap();
        prop_assert_eq!(a, cif(z, x).unwrap());
        prop_assert!(a > 0.0 && a < 1.0);
        prop_assert!(cif(x + d, z).unwrap() >= a);
        prop_assert!((logistic(x) + logistic(-x) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn simulated_rasters_validate(
        n_trials in 2usize..20,
        bins in 4usize..60,
        cue_frac in 0.0f64..0.9,
        rate in 0.0f64..150.0,
        seed in any::<u64>(),
    ) {
        let cfg = SimConfig {
            n_trials,
            trial_len_s: bins as f64 * 0.005,
            delta_s: 0.005,
            cue_onset_s: (cue_frac * bins as f64).floor() * 0.005,
            cond_start_trial: 1 + n_trials / 2,
            conditioned_rate_hz: rate,
            seed,
            ..SimConfig::default()
        };
        let r = simulate_raster(&cfg, &mut rng_from_seed(seed)).unwrap();
        prop_assert!(validate_raster(&r).is_empty());
        prop_assert_eq!((r.n_bins, r.n_trials), (bins, n_trials));
    }

    #[test]
    fn raster_json_and_csv_round_trip(k_n in 1usize..12, r_n in 1usize..8, seed in any::<u64>()) {
        use rand::Rng;
        let mut rng = rng_from_seed(seed);
        let bins: Vec<u8> = (0..k_n * r_n).map(|_| u8::from(rng.gen_bool(0.3))).collect();
        let r = Raster::new(k_n, r_n, bins, 0.002, 1, 1).unwrap();
        prop_assert_eq!(&Raster::from_json(&r.to_json().unwrap()).unwrap(), &r);
        prop_assert_eq!(&Raster::from_csv(&r.to_csv(), 0.002, 1, 1).unwrap(), &r);
    }

    #[test]
    fn pg_draws_are_positive_and_finite(c in -60.0f64..60.0, seed in any::<u64>()) {
        let mut rng = rng_from_seed(seed);
        for _ in 0..20 {
            let w = sample_pg1(c, &mut rng).unwrap();
            prop_assert!(w.is_finite() && w > 0.0);
        }
    }

    #[test]
    fn cross_trial_effect_averages_to_one(n in 1usize..6, k_n in 1usize..10, r_n in 1usize..8, seed in any::<u64>()) {
        let draws = draw_set(n, k_n, r_n, seed);
        let ct = cross_trial_effect(&draws).unwrap();
        for i in 0..n {
            let s: f64 = ct.draw(i).iter().sum();
            prop_assert!((s - r_n as f64).abs() < 1e-9 * r_n as f64);
        }
    }

    #[test]
    fn probability_map_is_order_free_and_on_the_draw_lattice(n in 1usize..40, seed in any::<u64>()) {
        let draws = draw_set(n, 9, 6, seed);
        let base = BaselineSpec { baseline_trials: 2, baseline_bins: 3 };
        let map = learning_probability_map(&draws, &base).unwrap();
        let pairs: Vec<(Vec<f64>, Vec<f64>)> = (0..n).rev().map(|i| (draws.x(i).to_vec(), draws.z(i).to_vec())).collect();
        let reversed = PosteriorDraws::from_pairs(&pairs, ModelParams::default()).unwrap();
        prop_assert_eq!(&learning_probability_map(&reversed, &base).unwrap(), &map);
        for &p in &map.values {
            prop_assert!((0.0..=1.0).contains(&p));
            let scaled = p * n as f64;
            prop_assert!((scaled - scaled.round()).abs() < 1e-9);
        }
    }

    #[test]
    fn detection_moves_later_with_threshold(n in 5usize..40, seed in any::<u64>(), t1 in 0.05f64..1.0, t2 in 0.05f64..1.0) {
        let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
        let draws = draw_set(n, 9, 6, seed);
        let base = BaselineSpec { baseline_trials: 2, baseline_bins: 3 };
        let map = learning_probability_map(&draws, &base).unwrap();
        let a = detect_learning(&map, &base, lo).unwrap();
        let b = detect_learning(&map, &base, hi).unwrap();
        if let Some(b) = b {
            let a = a.expect("a lower threshold must also detect");
            prop_assert!((a.learning_trial, a.learning_bin) <= (b.learning_trial, b.learning_bin));
        }
    }
}

#[test]
fn simulated_rates_fall_in_binomial_bands() {
    let cfg = SimConfig { seed: 11, ..SimConfig::default() };
    let r = simulate_raster(&cfg, &mut rng_from_seed(cfg.seed)).unwrap();
    let (mut base, mut n_base, mut cond, mut n_cond) = (0u64, 0u64, 0u64, 0u64);
    for k in 1..=r.n_bins {
        for t in 1..=r.n_trials {
            let v = u64::from(r.get(k, t));
            if k >= r.cue_bin && t >= r.cond_start_trial {
                cond += v;
                n_cond += 1;
            } else {
                base += v;
                n_base += 1;
            }
        }
    }
    assert_eq!((n_base, n_cond), (60_000, 30_000));
    let band = |n: u64, p: f64| {
        let (m, sd) = (n as f64 * p, (n as f64 * p * (1.0 - p)).sqrt());
        (m - 4.0 * sd, m + 4.0 * sd)
    };
    let (lo, hi) = band(n_base, 0.02);
    assert!((lo..hi).contains(&(base as f64)), "baseline count {base}");
    let (lo, hi) = band(n_cond, 0.06);
    assert!((lo..hi).contains(&(cond as f64)), "conditioned count {cond}");
}
