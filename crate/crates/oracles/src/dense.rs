//! Dense linear algebra for small Gaussian chains.

/// Row-major square matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    pub n: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(n: usize) -> Matrix {
        Matrix {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] += v;
    }

    /// Inverse by Gauss–Jordan elimination with partial pivoting.
    pub fn inverse(&self) -> Option<Matrix> {
        let n = self.n;
        let mut a = self.data.clone();
        let mut inv = Matrix::zeros(n);
        for i in 0..n {
            inv.data[i * n + i] = 1.0;
        }
        for col in 0..n {
            let pivot = (col..n).max_by(|&p, &q| a[p * n + col].abs().total_cmp(&a[q * n + col].abs()))?;
            if a[pivot * n + col].abs() < 1e-300 {
                return None;
            }
            for j in 0..n {
                a.swap(col * n + j, pivot * n + j);
                inv.data.swap(col * n + j, pivot * n + j);
            }
            let d = a[col * n + col];
            for j in 0..n {
                a[col * n + j] /= d;
                inv.data[col * n + j] /= d;
            }
            for row in 0..n {
                if row != col {
                    let f = a[row * n + col];
                    if f != 0.0 {
                        for j in 0..n {
                            a[row * n + j] -= f * a[col * n + j];
                            inv.data[row * n + j] -= f * inv.data[col * n + j];
                        }
                    }
                }
            }
        }
        Some(inv)
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self.get(i, j) * v[j]).sum())
            .collect()
    }
}

/// Posterior of `s_1..s_N` under `s_k = ρ s_{k−1} + α u_k + N(0, σ²)`,
/// `s_0 = 0`, with independent Gaussian observations `m_k ~ N(s_k, 1/p_k)`
/// (`p_k = 0` means no observation).
///
/// Writing the prior as `D s = α u + e` with `D` unit lower-bidiagonal
/// (`−ρ` below the diagonal), the posterior precision is
/// `DᵀD/σ² + diag(p)` and the linear term `Dᵀ(α u)/σ² + p ∘ m`.
pub fn chain_posterior(
    rho: f64,
    alpha: f64,
    u: &[f64],
    sigma2: f64,
    obs_mean: &[f64],
    obs_prec: &[f64],
) -> (Vec<f64>, Matrix) {
    let n = u.len();
    let mut q = Matrix::zeros(n);
    let mut b = vec![0.0; n];
    // Row k of D has 1 at k and −ρ at k−1.
    for k in 0..n {
        let mut row = vec![(k, 1.0)];
        if k > 0 {
            row.push((k - 1, -rho));
        }
        for &(i, di) in &row {
            for &(j, dj) in &row {
                q.add(i, j, di * dj / sigma2);
            }
            b[i] += di * alpha * u[k] / sigma2;
        }
    }
    for k in 0..n {
        q.add(k, k, obs_prec[k]);
        b[k] += obs_prec[k] * obs_mean[k];
    }
    let cov = q.inverse().expect("posterior precision is positive definite");
    let mean = cov.mul_vec(&b);
    (mean, cov)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_of_known_matrix() {
        let m = Matrix {
            n: 2,
            data: vec![4.0, 7.0, 2.0, 6.0],
        };
        let inv = m.inverse().unwrap();
        let expect = [0.6, -0.7, -0.2, 0.4];
        for (a, b) in inv.data.iter().zip(expect) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn single_step_is_product_of_gaussians() {
        // prior N(α, σ²), observation N(m, 1/p)
        let (mean, cov) = chain_posterior(1.0, 0.3, &[1.0], 2.0, &[1.0], &[4.0]);
        let prec = 0.5 + 4.0;
        assert!((cov.get(0, 0) - 1.0 / prec).abs() < 1e-12);
        assert!((mean[0] - (0.3 * 0.5 + 4.0) / prec).abs() < 1e-12);
    }

    #[test]
    fn unobserved_chain_is_the_prior() {
        // Var(s_k) = k σ² and Cov(s_j, s_k) = min(j, k) σ² for a random walk.
        let (mean, cov) = chain_posterior(1.0, 0.0, &[0.0; 4], 0.5, &[0.0; 4], &[0.0; 4]);
        for j in 0..4 {
            assert!(mean[j].abs() < 1e-12);
            for k in 0..4 {
                assert!((cov.get(j, k) - 0.5 * (j.min(k) + 1) as f64).abs() < 1e-10);
            }
        }
    }
}
