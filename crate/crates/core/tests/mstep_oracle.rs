//! Closed-form M-step against numerical maximization of Q̂.

use rand::Rng;
use rand_distr::StandardNormal;
use smurf::em::{m_step, FitConfig};
use smurf::{rng_from_seed, ModelParams, PosteriorDraws, Raster};
use smurf_oracles::optimize::maximize_q;

fn sig4(a: f64, b: f64) -> bool {
    (a - b).abs() <= 5e-5 * a.abs().max(b.abs()).max(1e-12)
}

#[test]
fn closed_form_matches_numerical_maximum() {
    for seed in 0..6 {
        let mut rng = rng_from_seed(seed);
        let k_n = rng.gen_range(3..12);
        let r_n = rng.gen_range(3..8);
        let n = rng.gen_range(2..20);
        let raster = Raster::zeros(k_n, r_n, 0.001, rng.gen_range(1..=k_n), rng.gen_range(1..=r_n)).unwrap();
        let mut walk = |len: usize, drift: f64| {
            let mut s = 0.0;
            (0..len)
                .map(|_| {
                    s += drift + 0.3 * rng.sample::<f64, _>(StandardNormal);
                    s
                })
                .collect::<Vec<f64>>()
        };
        let pairs: Vec<(Vec<f64>, Vec<f64>)> = (0..n).map(|_| (walk(k_n, 0.1), walk(r_n, -0.2))).collect();
        let draws = PosteriorDraws::from_pairs(&pairs, ModelParams::default()).unwrap();
        let cfg = FitConfig { estimate_alpha: seed % 2 == 0, ..FitConfig::default() };
        let p = m_step(&draws, &raster, &cfg).unwrap();

        let xs: Vec<Vec<f64>> = pairs.iter().map(|(x, _)| x.clone()).collect();
        let zs: Vec<Vec<f64>> = pairs.iter().map(|(_, z)| z.clone()).collect();
        let ux: Vec<f64> = raster.u_x.iter().map(|&v| f64::from(v)).collect();
        let uz: Vec<f64> = raster.u_z.iter().map(|&v| f64::from(v)).collect();
        let fixed = (!cfg.estimate_alpha).then_some(0.0);
        let (ax, sx) = maximize_q(&xs, &ux, 1.0, fixed);
        let (az, sz) = maximize_q(&zs, &uz, 1.0, fixed);
        assert!(sig4(p.sigma2_eps, sx), "seed {seed}: {} vs {sx}", p.sigma2_eps);
        assert!(sig4(p.sigma2_del, sz), "seed {seed}: {} vs {sz}", p.sigma2_del);
        if cfg.estimate_alpha {
            assert!(sig4(p.alpha_x, ax) || (p.alpha_x - ax).abs() < 1e-7, "seed {seed}: {} vs {ax}", p.alpha_x);
            assert!(sig4(p.alpha_z, az) || (p.alpha_z - az).abs() < 1e-7, "seed {seed}: {} vs {az}", p.alpha_z);
        }
    }
}
