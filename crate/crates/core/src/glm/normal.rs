use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use super::{Design, GlmError, KernelConfig, ModelParams, PRIOR_VARIANCE};

/// Smallest noise variance the kernel will hold; keeps `XᵀX/σ²` finite on
/// noiseless data.
const SIGMA2_FLOOR: f64 = 1e-100;

/// Eigenvalue ratio of `XᵀX` below which the design counts as collinear.
const RANK_TOLERANCE: f64 = 1e-12;

pub(crate) fn check_rank(xtx: &DMatrix<f64>) -> Result<(), GlmError> {
    let eig = xtx.clone().symmetric_eigen();
    let max = eig.eigenvalues.max();
    let min = eig.eigenvalues.min();
    if !(max > 0.0) || min <= RANK_TOLERANCE * max {
        return Err(GlmError::Singular);
    }
    Ok(())
}

/// Runs `config.inner_iterations` two-block Gibbs sweeps for a Normal
/// model and returns the final state.
///
/// Each sweep draws `β | σ², y ~ N(Q⁻¹Xᵀy/σ², Q⁻¹)` with
/// `Q = XᵀX/σ² + I/1000`, then `σ² | β, y ~ InvGamma((n-1)/2, SSR/2)`, which
/// is the conditional under the flat prior on σ. Only `init.sigma2` is read
/// from the starting state.
pub fn sample_theta_normal<R: Rng + ?Sized>(
    design: &Design,
    config: &KernelConfig,
    init: &ModelParams,
    rng: &mut R,
) -> Result<ModelParams, GlmError> {
    let (n, p) = (design.rows(), design.cols());
    if n <= p {
        return Err(GlmError::InsufficientRows { rows: n, cols: p });
    }
    let xt = design.x.transpose();
    let xtx = &xt * &design.x;
    let xty = &xt * &design.y;
    check_rank(&xtx)?;

    let shape = (n as f64 - 1.0) / 2.0;
    let gamma = Gamma::new(shape, 1.0).map_err(|_| GlmError::NonFinite)?;
    let prior_precision = DMatrix::<f64>::identity(p, p) / PRIOR_VARIANCE;

    let mut sigma2 = init.sigma2.ok_or(GlmError::MissingVariance)?;
    let mut beta = DVector::<f64>::from_vec(init.beta.clone());
    for _ in 0..config.inner_iterations.max(1) {
        let precision = &xtx / sigma2 + &prior_precision;
        let chol = precision.cholesky().ok_or(GlmError::Singular)?;
        let mean = chol.solve(&(&xty / sigma2));
        let z = DVector::<f64>::from_fn(p, |_, _| rng.sample(StandardNormal));
        let offset = chol
            .l()
            .transpose()
            .solve_upper_triangular(&z)
            .ok_or(GlmError::Singular)?;
        beta = mean + offset;

        let resid = &design.y - &design.x * &beta;
        let ssr = resid.norm_squared();
        let g: f64 = gamma.sample(rng);
        sigma2 = (0.5 * ssr / g).max(SIGMA2_FLOOR);
        if !sigma2.is_finite() || beta.iter().any(|b| !b.is_finite()) {
            return Err(GlmError::NonFinite);
        }
    }
    Ok(ModelParams {
        beta: beta.iter().copied().collect(),
        sigma2: Some(sigma2),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Solves `m v = rhs` by Gaussian elimination with partial pivoting.
    fn solve(mut m: Vec<Vec<f64>>, mut rhs: Vec<f64>) -> Vec<f64> {
        let n = rhs.len();
        for c in 0..n {
            let piv = (c..n)
                .max_by(|&a, &b| m[a][c].abs().total_cmp(&m[b][c].abs()))
                .unwrap();
            m.swap(c, piv);
            rhs.swap(c, piv);
            for r in c + 1..n {
                let f = m[r][c] / m[c][c];
                for k in c..n {
                    m[r][k] -= f * m[c][k];
                }
                rhs[r] -= f * rhs[c];
            }
        }
        let mut v = vec![0.0; n];
        for r in (0..n).rev() {
            let s: f64 = (r + 1..n).map(|k| m[r][k] * v[k]).sum();
            v[r] = (rhs[r] - s) / m[r][r];
        }
        v
    }

    fn inverse_diag(m: &[Vec<f64>]) -> Vec<f64> {
        let n = m.len();
        (0..n)
            .map(|i| {
                let mut e = vec![0.0; n];
                e[i] = 1.0;
                solve(m.to_vec(), e)[i]
            })
            .collect()
    }

    /// Closed-form `β | σ², y` mean and marginal sds.
    fn conditional(rows: &[Vec<f64>], y: &[f64], sigma2: f64) -> (Vec<f64>, Vec<f64>) {
        let p = rows[0].len();
        let mut q = vec![vec![0.0; p]; p];
        let mut b = vec![0.0; p];
        for (x, &yi) in rows.iter().zip(y) {
            for i in 0..p {
                b[i] += x[i] * yi / sigma2;
                for j in 0..p {
                    q[i][j] += x[i] * x[j] / sigma2;
                }
            }
        }
        for (i, row) in q.iter_mut().enumerate() {
            row[i] += 1.0 / PRIOR_VARIANCE;
        }
        let sd = inverse_diag(&q).into_iter().map(f64::sqrt).collect();
        (solve(q, b), sd)
    }

    fn design_of(rows: &[Vec<f64>], y: &[f64]) -> Design {
        let x = DMatrix::from_fn(rows.len(), rows[0].len(), |i, j| rows[i][j]);
        Design::new(x, DVector::from_vec(y.to_vec())).unwrap()
    }

    #[test]
    fn single_sweep_draws_from_the_conditional() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let rows: Vec<Vec<f64>> = (0..100)
            .map(|i| vec![1.0, (i as f64) / 10.0 - 5.0])
            .collect();
        let y: Vec<f64> = rows.iter().map(|x| 0.5 + 1.5 * x[1]).collect();
        let design = design_of(&rows, &y);
        let (mean, sd) = conditional(&rows, &y, 1.0);
        let init = ModelParams {
            beta: vec![0.0, 0.0],
            sigma2: Some(1.0),
        };
        let cfg = KernelConfig::default();
        for _ in 0..20 {
            let out = sample_theta_normal(&design, &cfg, &init, &mut rng).unwrap();
            for k in 0..2 {
                assert!((out.beta[k] - mean[k]).abs() < 3.0 * sd[k] + 1e-12);
            }
        }
    }

    #[test]
    fn duplicated_column_is_singular() {
        let rows: Vec<Vec<f64>> = (0..20).map(|i| vec![1.0, i as f64, i as f64]).collect();
        let y: Vec<f64> = (0..20).map(|i| i as f64).collect();
        let design = design_of(&rows, &y);
        let init = ModelParams {
            beta: vec![0.0; 3],
            sigma2: Some(1.0),
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(
            sample_theta_normal(&design, &KernelConfig::default(), &init, &mut rng),
            Err(GlmError::Singular)
        );
    }

    #[test]
    fn too_few_rows() {
        let design = design_of(&[vec![1.0, 2.0], vec![1.0, 3.0]], &[0.0, 1.0]);
        let init = ModelParams {
            beta: vec![0.0; 2],
            sigma2: Some(1.0),
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(
            sample_theta_normal(&design, &KernelConfig::default(), &init, &mut rng),
            Err(GlmError::InsufficientRows { .. })
        ));
    }

    #[test]
    fn recovers_generating_values() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 5000;
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| vec![1.0, rng.sample::<f64, _>(StandardNormal)])
            .collect();
        let y: Vec<f64> = rows
            .iter()
            .map(|x| 1.0 + 2.0 * x[1] + 2.0 * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let design = design_of(&rows, &y);
        let mut state = ModelParams {
            beta: vec![0.0; 2],
            sigma2: Some(1.0),
        };
        let cfg = KernelConfig::default();
        let (burn, keep, batches) = (100, 2000, 20);
        let mut draws = Vec::with_capacity(keep);
        for i in 0..burn + keep {
            state = sample_theta_normal(&design, &cfg, &state, &mut rng).unwrap();
            if i >= burn {
                draws.push(state.clone());
            }
        }
        let truth = [1.0, 2.0];
        for k in 0..2 {
            let xs: Vec<f64> = draws.iter().map(|d| d.beta[k]).collect();
            let mean = xs.iter().sum::<f64>() / keep as f64;
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (keep - 1) as f64;
            let size = keep / batches;
            let bmeans: Vec<f64> = xs
                .chunks(size)
                .map(|c| c.iter().sum::<f64>() / size as f64)
                .collect();
            let bvar = bmeans.iter().map(|m| (m - mean).powi(2)).sum::<f64>()
                / (batches - 1) as f64;
            let mcse2 = bvar / batches as f64;
            // The posterior centre differs from the truth by sampling error,
            // so the tolerance combines posterior spread and MC error.
            let tol = 3.0 * (var + mcse2).sqrt();
            assert!((mean - truth[k]).abs() < tol, "beta[{k}] = {mean}, tol {tol}");
        }
        let s2 = draws.iter().map(|d| d.sigma2.unwrap()).sum::<f64>() / keep as f64;
        assert!((s2 - 4.0).abs() < 0.4, "sigma2 = {s2}");
    }
}
