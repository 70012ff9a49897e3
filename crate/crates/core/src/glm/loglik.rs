use std::f64::consts::PI;

use statrs::function::gamma::ln_gamma;

use super::{GlmError, ModelParams};
use crate::formula::{Family, ModelSpec};

/// `ln(1 + e^x)` without overflow for large `|x|`.
pub fn log1p_exp(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Log density of response `y` given linear predictor `eta`.
///
/// For the Normal family `eta` is the mean and `sigma2` the variance; the
/// other families ignore `sigma2`. May return a non-finite value on overflow.
pub fn loglik_eta(family: Family, eta: f64, y: f64, sigma2: f64) -> f64 {
    match family {
        Family::Normal => {
            let r = y - eta;
            -0.5 * (2.0 * PI * sigma2).ln() - r * r / (2.0 * sigma2)
        }
        Family::Logistic => y * eta - log1p_exp(eta),
        Family::Poisson => y * eta - eta.exp() - ln_gamma(y + 1.0),
    }
}

/// `log f(response | regressors, params)` for one linked pair. `regressors`
/// includes the leading intercept 1.
pub fn loglik_pair(
    spec: &ModelSpec,
    params: &ModelParams,
    regressors: &[f64],
    response: f64,
) -> Result<f64, GlmError> {
    if regressors.len() != params.beta.len() {
        return Err(GlmError::Dimension {
            expected: params.beta.len(),
            got: regressors.len(),
        });
    }
    let sigma2 = match spec.family {
        Family::Normal => params.sigma2.ok_or(GlmError::MissingVariance)?,
        _ => 1.0,
    };
    let eta: f64 = regressors.iter().zip(&params.beta).map(|(x, b)| x * b).sum();
    let ll = loglik_eta(spec.family, eta, response, sigma2);
    if ll.is_finite() {
        Ok(ll)
    } else {
        Err(GlmError::NonFinite)
    }
}
