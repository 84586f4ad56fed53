//! Parameters, Gibbs configurations and retained posterior draws.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, invalid, Result};
use crate::pg::pg1_mean;
use crate::raster::Raster;

/// θ = (ρ_x, α_x, σ²_ε, ρ_z, α_z, σ²_δ). The autoregressive coefficients are
/// fixed for the lifetime of a fit; the M-step never touches them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub rho_x: f64,
    pub alpha_x: f64,
    pub sigma2_eps: f64,
    pub rho_z: f64,
    pub alpha_z: f64,
    pub sigma2_del: f64,
    pub estimate_alpha: bool,
}

impl Default for ModelParams {
    fn default() -> Self {
        ModelParams {
            rho_x: 1.0,
            alpha_x: 0.0,
            sigma2_eps: 0.01,
            rho_z: 1.0,
            alpha_z: 0.0,
            sigma2_del: 0.01,
            estimate_alpha: false,
        }
    }
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.rho_x,
            self.alpha_x,
            self.sigma2_eps,
            self.rho_z,
            self.alpha_z,
            self.sigma2_del,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            return Err(invalid("model parameters must be finite"));
        }
        if self.sigma2_eps <= 0.0 || self.sigma2_del <= 0.0 {
            return Err(invalid(format!(
                "innovation variances must be positive (sigma2_eps={}, sigma2_del={})",
                self.sigma2_eps, self.sigma2_del
            )));
        }
        Ok(())
    }

    /// Parameters for the transposed problem (time and trials swapped).
    pub fn swapped(&self) -> ModelParams {
        ModelParams {
            rho_x: self.rho_z,
            alpha_x: self.alpha_z,
            sigma2_eps: self.sigma2_del,
            rho_z: self.rho_x,
            alpha_z: self.alpha_x,
            sigma2_del: self.sigma2_eps,
            estimate_alpha: self.estimate_alpha,
        }
    }
}

/// One configuration of the augmented chain. `w` is bin-major like the raster.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentState {
    pub x: Vec<f64>,
    pub z: Vec<f64>,
    pub w: Vec<f64>,
}

impl LatentState {
    /// Paths as given, with `w` set to the PG(1, |x_k + z_r|) means.
    pub fn from_paths(x: Vec<f64>, z: Vec<f64>) -> LatentState {
        let mut w = Vec::with_capacity(x.len() * z.len());
        for &xk in &x {
            w.extend(z.iter().map(|&zr| pg1_mean(xk + zr)));
        }
        LatentState { x, z, w }
    }

    pub fn zeros(n_bins: usize, n_trials: usize) -> LatentState {
        Self::from_paths(vec![0.0; n_bins], vec![0.0; n_trials])
    }

    pub fn check_against(&self, raster: &Raster) -> Result<()> {
        check_len("x", raster.n_bins, self.x.len())?;
        check_len("z", raster.n_trials, self.z.len())?;
        check_len("w", raster.n_bins * raster.n_trials, self.w.len())?;
        if self.x.iter().chain(&self.z).any(|v| !v.is_finite()) {
            return Err(invalid("latent paths must be finite"));
        }
        if self.w.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
            return Err(invalid("PG auxiliaries must be positive and finite"));
        }
        Ok(())
    }
}

/// Retained `(x, z)` samples drawn at a fixed θ.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorDraws {
    n_bins: usize,
    n_trials: usize,
    /// Draw-major `n * n_bins`.
    x: Vec<f64>,
    /// Draw-major `n * n_trials`.
    z: Vec<f64>,
    pub theta_at: ModelParams,
    pub burn_in_discarded: usize,
    pub seed: u64,
}

impl PosteriorDraws {
    pub fn with_capacity(
        n_bins: usize,
        n_trials: usize,
        capacity: usize,
        theta_at: ModelParams,
        burn_in_discarded: usize,
        seed: u64,
    ) -> PosteriorDraws {
        PosteriorDraws {
            n_bins,
            n_trials,
            x: Vec::with_capacity(capacity * n_bins),
            z: Vec::with_capacity(capacity * n_trials),
            theta_at,
            burn_in_discarded,
            seed,
        }
    }

    /// Builds a draw set from explicit `(x, z)` pairs.
    pub fn from_pairs(
        pairs: &[(Vec<f64>, Vec<f64>)],
        theta_at: ModelParams,
    ) -> Result<PosteriorDraws> {
        let first = pairs
            .first()
            .ok_or_else(|| invalid("posterior draws must be non-empty"))?;
        let mut draws =
            Self::with_capacity(first.0.len(), first.1.len(), pairs.len(), theta_at, 0, 0);
        for (x, z) in pairs {
            draws.push(x, z)?;
        }
        Ok(draws)
    }

    pub fn push(&mut self, x: &[f64], z: &[f64]) -> Result<()> {
        check_len("draw x", self.n_bins, x.len())?;
        check_len("draw z", self.n_trials, z.len())?;
        self.x.extend_from_slice(x);
        self.z.extend_from_slice(z);
        Ok(())
    }

    pub fn len(&self) -> usize {
        if self.n_bins == 0 {
            0
        } else {
            self.x.len() / self.n_bins
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn n_bins(&self) -> usize {
        self.n_bins
    }

    pub fn n_trials(&self) -> usize {
        self.n_trials
    }

    #[inline]
    pub fn x(&self, i: usize) -> &[f64] {
        &self.x[i * self.n_bins..(i + 1) * self.n_bins]
    }

    #[inline]
    pub fn z(&self, i: usize) -> &[f64] {
        &self.z[i * self.n_trials..(i + 1) * self.n_trials]
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f64], &[f64])> + '_ {
        self.x
            .chunks_exact(self.n_bins)
            .zip(self.z.chunks_exact(self.n_trials))
    }

    pub fn check_against(&self, raster: &Raster) -> Result<()> {
        if self.is_empty() {
            return Err(invalid("posterior draws must be non-empty"));
        }
        check_len("draw x", raster.n_bins, self.n_bins)?;
        check_len("draw z", raster.n_trials, self.n_trials)
    }

    /// Posterior mean paths.
    pub fn mean_paths(&self) -> (Vec<f64>, Vec<f64>) {
        let n = self.len() as f64;
        let mut mx = vec![0.0; self.n_bins];
        let mut mz = vec![0.0; self.n_trials];
        for (x, z) in self.iter() {
            mx.iter_mut().zip(x).for_each(|(m, v)| *m += v);
            mz.iter_mut().zip(z).for_each(|(m, v)| *m += v);
        }
        mx.iter_mut().for_each(|m| *m /= n);
        mz.iter_mut().for_each(|m| *m /= n);
        (mx, mz)
    }
}
