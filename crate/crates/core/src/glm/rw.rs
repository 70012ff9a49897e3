use rand::Rng;
use rand_distr::StandardNormal;

use super::{loglik_eta, Design, GlmError, KernelConfig, PRIOR_VARIANCE};
use crate::formula::Family;

/// Step sizes and acceptance bookkeeping of a random-walk kernel. Lives
/// across calls so adaptation can accumulate over a run.
#[derive(Clone, Debug, PartialEq)]
pub struct RwState {
    pub scales: Vec<f64>,
    pub accepted: u64,
    pub proposed: u64,
    adapt_steps: u64,
}

impl RwState {
    /// Starting scales of about 2.4 conditional posterior sds per coordinate,
    /// from the Fisher information at a typical mean.
    pub fn for_design(family: Family, design: &Design) -> Self {
        let n = design.rows().max(1) as f64;
        let weight = match family {
            Family::Logistic => 0.25,
            Family::Poisson => (design.y.sum() / n).max(0.1),
            Family::Normal => 1.0,
        };
        let scales = design
            .x
            .column_iter()
            .map(|col| 2.4 / (weight * col.norm_squared() + 1.0 / PRIOR_VARIANCE).sqrt())
            .collect();
        RwState {
            scales,
            accepted: 0,
            proposed: 0,
            adapt_steps: 0,
        }
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.proposed == 0 {
            0.0
        } else {
            self.accepted as f64 / self.proposed as f64
        }
    }
}

fn loglik_sum(family: Family, eta: &[f64], y: &[f64]) -> f64 {
    eta.iter()
        .zip(y)
        .map(|(&e, &yi)| loglik_eta(family, e, yi, 1.0))
        .sum()
}

fn log_prior(beta: &[f64]) -> f64 {
    -beta.iter().map(|b| b * b).sum::<f64>() / (2.0 * PRIOR_VARIANCE)
}

/// Unnormalized log posterior of a Logistic or Poisson model.
pub fn log_posterior(family: Family, design: &Design, beta: &[f64]) -> f64 {
    let eta: Vec<f64> = (&design.x * nalgebra::DVector::from_column_slice(beta))
        .iter()
        .copied()
        .collect();
    loglik_sum(family, &eta, design.y.as_slice()) + log_prior(beta)
}

/// Runs `config.inner_iterations` sweeps of coordinate-wise random-walk
/// Metropolis from `beta_init` and returns the final coefficients.
///
/// With `config.adapt` set, each coordinate's log step size moves by a
/// Robbins-Monro step towards `config.target_acceptance` after the call;
/// otherwise the kernel is time-homogeneous.
pub fn sample_theta_rw<R: Rng + ?Sized>(
    family: Family,
    design: &Design,
    beta_init: &[f64],
    config: &KernelConfig,
    state: &mut RwState,
    rng: &mut R,
) -> Result<Vec<f64>, GlmError> {
    if family == Family::Normal {
        return Err(GlmError::WrongFamily(family));
    }
    let p = design.cols();
    if beta_init.len() != p || state.scales.len() != p {
        return Err(GlmError::Dimension {
            expected: p,
            got: beta_init.len(),
        });
    }
    let y = design.y.as_slice();
    let mut beta = beta_init.to_vec();
    let mut eta: Vec<f64> = (&design.x * nalgebra::DVector::from_column_slice(&beta))
        .iter()
        .copied()
        .collect();
    let mut lp = loglik_sum(family, &eta, y) + log_prior(&beta);
    if !lp.is_finite() {
        return Err(GlmError::NonFinite);
    }

    let iterations = config.inner_iterations.max(1);
    let mut accepted = vec![0u32; p];
    let mut proposal = vec![0.0; eta.len()];
    for _ in 0..iterations {
        for k in 0..p {
            let z: f64 = rng.sample(StandardNormal);
            let step = state.scales[k] * z;
            let col = design.x.column(k);
            for ((dst, &e), &x) in proposal.iter_mut().zip(&eta).zip(col.iter()) {
                *dst = e + step * x;
            }
            let old = beta[k];
            beta[k] = old + step;
            let lp_new = loglik_sum(family, &proposal, y) + log_prior(&beta);
            let u: f64 = rng.random();
            if lp_new.is_finite() && u.ln() < lp_new - lp {
                lp = lp_new;
                std::mem::swap(&mut eta, &mut proposal);
                accepted[k] += 1;
            } else {
                beta[k] = old;
            }
        }
    }

    let total: u32 = accepted.iter().sum();
    state.accepted += u64::from(total);
    state.proposed += (iterations * p) as u64;
    if config.adapt {
        state.adapt_steps += 1;
        let gain = (state.adapt_steps as f64).powf(-0.6);
        for (scale, &acc) in state.scales.iter_mut().zip(&accepted) {
            let rate = f64::from(acc) / iterations as f64;
            *scale *= (gain * (rate - config.target_acceptance)).exp();
        }
    }
    Ok(beta)
}
