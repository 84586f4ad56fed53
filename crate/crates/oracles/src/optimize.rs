//! Golden-section maximization of the Monte-Carlo Q-function.

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Maximizer of a unimodal `f` on `[lo, hi]`.
pub fn golden_max(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let mut a = hi - INV_PHI * (hi - lo);
    let mut b = lo + INV_PHI * (hi - lo);
    let (mut fa, mut fb) = (f(a), f(b));
    while (hi - lo).abs() > tol * (1.0 + a.abs().max(b.abs())) {
        if fa < fb {
            lo = a;
            a = b;
            fa = fb;
            b = lo + INV_PHI * (hi - lo);
            fb = f(b);
        } else {
            hi = b;
            b = a;
            fb = fa;
            a = hi - INV_PHI * (hi - lo);
            fa = f(a);
        }
    }
    0.5 * (lo + hi)
}

/// Average over draws of the state-equation log-density of one path family:
/// `Σ_k [−½ log σ² − (s_k − ρ s_{k−1} − α u_k)² / (2σ²)]`, `s_0 = 0`.
pub fn q_hat(paths: &[Vec<f64>], u: &[f64], rho: f64, alpha: f64, sigma2: f64) -> f64 {
    let mut total = 0.0;
    for path in paths {
        let mut prev = 0.0;
        for (s, uk) in path.iter().zip(u) {
            let d = s - rho * prev - alpha * uk;
            total += -0.5 * sigma2.ln() - d * d / (2.0 * sigma2);
            prev = *s;
        }
    }
    total / paths.len() as f64
}

/// Numerical `(α, σ²)` maximizing [`q_hat`]; `α` stays at `fixed_alpha`
/// when given. σ² is searched on the log scale.
pub fn maximize_q(
    paths: &[Vec<f64>],
    u: &[f64],
    rho: f64,
    fixed_alpha: Option<f64>,
) -> (f64, f64) {
    let best_sigma2 = |alpha: f64| {
        let log_s = golden_max(|ls| q_hat(paths, u, rho, alpha, ls.exp()), -30.0, 10.0, 1e-11);
        log_s.exp()
    };
    let alpha = match fixed_alpha {
        Some(a) => a,
        None => golden_max(
            |a| q_hat(paths, u, rho, a, best_sigma2(a)),
            -20.0,
            20.0,
            1e-12,
        ),
    };
    (alpha, best_sigma2(alpha))
}
