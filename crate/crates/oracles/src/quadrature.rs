//! Grid integration of tiny-raster posteriors.
//!
//! Both latent chains are written in terms of their standardized innovations
//! `e`, so the prior is a product of N(0, 1) densities and the posterior
//! expectation of any function is a ratio of two integrals over `e`. The
//! trapezoid rule on a wide uniform grid is spectrally accurate for these
//! smooth, Gaussian-weighted integrands.

/// Settings of one latent chain.
#[derive(Debug, Clone, Copy)]
pub struct Chain {
    pub rho: f64,
    pub alpha: f64,
    pub sigma2: f64,
}

fn path(chain: &Chain, u: &[f64], e: &[f64], out: &mut [f64]) {
    let sd = chain.sigma2.sqrt();
    let mut prev = 0.0;
    for i in 0..out.len() {
        prev = chain.rho * prev + chain.alpha * u[i] + sd * e[i];
        out[i] = prev;
    }
}

fn sigmoid(s: f64) -> f64 {
    1.0 / (1.0 + (-s).exp())
}

/// Posterior mean of `P(n_{k,r} = 1)` for every cell, bin-major
/// `[(k−1)·R + (r−1)]`. `bins` uses the same layout.
pub fn posterior_mean_cif(
    bins: &[u8],
    n_bins: usize,
    n_trials: usize,
    x_chain: Chain,
    u_x: &[f64],
    z_chain: Chain,
    u_z: &[f64],
    points: usize,
    half_width: f64,
) -> Vec<f64> {
    assert_eq!(bins.len(), n_bins * n_trials);
    let dims = n_bins + n_trials;
    let h = 2.0 * half_width / (points - 1) as f64;
    let grid: Vec<f64> = (0..points).map(|i| -half_width + h * i as f64).collect();
    let log_phi: Vec<f64> = grid.iter().map(|g| -0.5 * g * g).collect();

    let mut idx = vec![0usize; dims];
    let mut e = vec![0.0; dims];
    let mut x = vec![0.0; n_bins];
    let mut z = vec![0.0; n_trials];
    let mut probs = vec![0.0; bins.len()];
    let mut num = vec![0.0; bins.len()];
    let mut den = 0.0;
    loop {
        let mut log_w = 0.0;
        for d in 0..dims {
            e[d] = grid[idx[d]];
            log_w += log_phi[idx[d]];
        }
        path(&x_chain, u_x, &e[..n_bins], &mut x);
        path(&z_chain, u_z, &e[n_bins..], &mut z);
        for k in 0..n_bins {
            for r in 0..n_trials {
                let p = sigmoid(x[k] + z[r]);
                let i = k * n_trials + r;
                probs[i] = p;
                log_w += if bins[i] == 1 { p.ln() } else { (1.0 - p).ln() };
            }
        }
        let w = log_w.exp();
        den += w;
        for (n, p) in num.iter_mut().zip(&probs) {
            *n += w * p;
        }
        // odometer increment
        let mut d = 0;
        loop {
            if d == dims {
                return num.into_iter().map(|n| n / den).collect();
            }
            idx[d] += 1;
            if idx[d] < points {
                break;
            }
            idx[d] = 0;
            d += 1;
        }
    }
}
