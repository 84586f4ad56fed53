//! Polya-Gamma PG(1, c) variates.
//!
//! The default sampler is the exact alternating-series accept/reject scheme
//! for `J*(1, c/2)` (a truncated exponential proposal glued to a truncated
//! inverse-Gaussian proposal at `t = 0.64`), rescaled by 1/4. A truncated
//! sum-of-exponentials sampler is kept for cross-validation in tests.

use std::f64::consts::{FRAC_PI_2, PI};

use rand::Rng;
use rand_distr::{Exp1, StandardNormal};

use crate::error::{invalid, Result};

/// Largest admissible |c|. Larger tilts mean the latent paths diverged.
pub const MAX_TILT: f64 = 1.0e4;

/// Lower bound applied to a draw before it is used as a precision.
pub const PRECISION_FLOOR: f64 = 1.0e-12;

const TRUNC: f64 = 0.64;
const TRUNC_RECIP: f64 = 1.0 / TRUNC;
const PI_SQ_OVER_8: f64 = PI * PI / 8.0;

/// A single realization of W ~ PG(1, c).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PgDraw {
    pub value: f64,
    pub tilt_c: f64,
}

impl PgDraw {
    pub fn sample<R: Rng + ?Sized>(c: f64, rng: &mut R) -> Result<PgDraw> {
        Ok(PgDraw {
            value: sample_pg1(c, rng)?,
            tilt_c: c,
        })
    }

    /// The draw floored at [`PRECISION_FLOOR`], and whether flooring happened.
    pub fn as_precision(&self) -> (f64, bool) {
        clamp_precision(self.value)
    }
}

#[inline]
pub fn clamp_precision(w: f64) -> (f64, bool) {
    if w < PRECISION_FLOOR {
        (PRECISION_FLOOR, true)
    } else {
        (w, false)
    }
}

fn check_tilt(c: f64) -> Result<()> {
    if !c.is_finite() {
        return Err(invalid(format!("PG tilt must be finite, got {c}")));
    }
    if c.abs() > MAX_TILT {
        return Err(invalid(format!(
            "PG tilt |c| = {} exceeds {MAX_TILT}; latent states have diverged",
            c.abs()
        )));
    }
    Ok(())
}

/// One exact draw from PG(1, |c|).
pub fn sample_pg1<R: Rng + ?Sized>(c: f64, rng: &mut R) -> Result<f64> {
    check_tilt(c)?;
    Ok(sample_pg1_unchecked(c, rng))
}

/// [`sample_pg1`] without the tilt checks, for hot loops that validated `c`.
#[inline]
pub(crate) fn sample_pg1_unchecked<R: Rng + ?Sized>(c: f64, rng: &mut R) -> f64 {
    let z = 0.5 * c.abs();
    let fz = PI_SQ_OVER_8 + 0.5 * z * z;
    let p_expon = mass_truncated_exponential(z, fz);
    loop {
        let x = if rng.gen::<f64>() < p_expon {
            let e: f64 = rng.sample(Exp1);
            TRUNC + e / fz
        } else {
            truncated_inverse_gaussian(z, rng)
        };
        let mut s = series_coef(0, x);
        let y = rng.gen::<f64>() * s;
        let mut n = 0u32;
        loop {
            n += 1;
            if n % 2 == 1 {
                s -= series_coef(n, x);
                if y <= s {
                    return 0.25 * x;
                }
            } else {
                s += series_coef(n, x);
                if y > s {
                    break;
                }
            }
        }
    }
}

/// n-th term of the alternating series for the J*(1, 0) density, using the
/// left representation below the truncation point.
#[inline]
fn series_coef(n: u32, x: f64) -> f64 {
    let half = f64::from(n) + 0.5;
    let k = half * PI;
    if x > TRUNC {
        k * (-0.5 * k * k * x).exp()
    } else if x > 0.0 {
        let log_term = -1.5 * (FRAC_PI_2.ln() + x.ln()) + k.ln() - 2.0 * half * half / x;
        log_term.exp()
    } else {
        0.0
    }
}

/// Probability of using the exponential proposal on the right of `TRUNC`.
fn mass_truncated_exponential(z: f64, fz: f64) -> f64 {
    let sqrt_recip = TRUNC_RECIP.sqrt();
    let b = sqrt_recip * (TRUNC * z - 1.0);
    let a = -sqrt_recip * (TRUNC * z + 1.0);
    let x0 = fz.ln() + fz * TRUNC;
    let xb = x0 - z + log_ndtr(b);
    let xa = x0 + z + log_ndtr(a);
    let q_over_p = 4.0 / PI * (xb.exp() + xa.exp());
    1.0 / (1.0 + q_over_p)
}

/// Inverse-Gaussian(1/z, 1) truncated to (0, TRUNC).
fn truncated_inverse_gaussian<R: Rng + ?Sized>(z: f64, rng: &mut R) -> f64 {
    if TRUNC_RECIP > z {
        // mean beyond the truncation point: inverse-chi-square proposal
        loop {
            let (mut e1, mut e2): (f64, f64) = (rng.sample(Exp1), rng.sample(Exp1));
            while e1 * e1 > 2.0 * e2 / TRUNC {
                e1 = rng.sample(Exp1);
                e2 = rng.sample(Exp1);
            }
            let denom = 1.0 + e1 * TRUNC;
            let x = TRUNC / (denom * denom);
            let accept = (-0.5 * z * z * x).exp();
            if rng.gen::<f64>() <= accept {
                return x;
            }
        }
    } else {
        let mu = 1.0 / z;
        loop {
            let n: f64 = rng.sample(StandardNormal);
            let y = n * n;
            let mu_y = mu * y;
            let mut x = mu + 0.5 * mu * mu_y - 0.5 * mu * (4.0 * mu_y + mu_y * mu_y).sqrt();
            if rng.gen::<f64>() > mu / (mu + x) {
                x = mu * mu / x;
            }
            if x <= TRUNC {
                return x;
            }
        }
    }
}

/// log Φ(x) for the standard normal CDF, accurate in the far left tail.
fn log_ndtr(x: f64) -> f64 {
    if x > -20.0 {
        (0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)).ln()
    } else {
        let x2 = x * x;
        -0.5 * x2 - (-x).ln() - 0.5 * (2.0 * PI).ln()
            + (1.0 - 1.0 / x2 + 3.0 / (x2 * x2)).ln()
    }
}

/// E[PG(1, c)] = tanh(c/2) / (2c), with the continuous value 1/4 at c = 0.
pub fn pg1_mean(c: f64) -> f64 {
    let c = c.abs();
    if c < 1e-4 {
        0.25 - c * c / 48.0
    } else {
        (0.5 * c).tanh() / (2.0 * c)
    }
}

/// Var[PG(1, 0)].
pub fn pg1_var0() -> f64 {
    1.0 / 24.0
}

/// Approximate PG(1, c) by the first `n_terms` of its sum-of-exponentials
/// representation. Biased low by the omitted tail; for validation only.
pub fn sample_pg1_truncated<R: Rng + ?Sized>(c: f64, n_terms: usize, rng: &mut R) -> Result<f64> {
    check_tilt(c)?;
    let shift = c * c / (4.0 * PI * PI);
    let sum: f64 = (1..=n_terms)
        .map(|k| {
            let half = k as f64 - 0.5;
            let e: f64 = rng.sample(Exp1);
            e / (half * half + shift)
        })
        .sum();
    Ok(sum / (2.0 * PI * PI))
}
