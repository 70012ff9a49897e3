//! Regression parameters of the model chain and their posterior kernels.
//!
//! Every coefficient has an independent `N(0, 1000)` prior. The Normal
//! family's noise variance has a prior that is flat in the standard
//! deviation, `p(σ²) ∝ (σ²)^(-1/2)`.
//!
//! The Normal kernel alternates exact draws of `β | σ², y` and
//! `σ² | β, y`. Logistic and Poisson models use coordinate-wise random-walk
//! Metropolis whose step sizes adapt only while the caller asks for it.

mod loglik;
mod normal;
mod rw;

pub use loglik::{log1p_exp, loglik_eta, loglik_pair};
pub use normal::sample_theta_normal;
pub(crate) use normal::check_rank;
pub use rw::{log_posterior, sample_theta_rw, RwState};

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::formula::{Family, ModelChain, ModelSpec};

/// Prior variance of every regression coefficient, intercept included.
pub const PRIOR_VARIANCE: f64 = 1e3;

#[derive(Clone, Debug, PartialEq, Error)]
pub enum GlmError {
    #[error("log-likelihood is not finite")]
    NonFinite,
    #[error("design matrix is rank deficient (collinear columns)")]
    Singular,
    #[error("design has {rows} rows for {cols} coefficients")]
    InsufficientRows { rows: usize, cols: usize },
    #[error("{0} kernel does not apply to this family")]
    WrongFamily(Family),
    #[error("regressor vector has length {got}, expected {expected}")]
    Dimension { expected: usize, got: usize },
    #[error("Normal model has no noise variance")]
    MissingVariance,
    #[error("design's first column must be the intercept")]
    NoIntercept,
}

/// Parameters of one model: coefficients with the intercept first, and the
/// noise variance for Normal models.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    pub beta: Vec<f64>,
    pub sigma2: Option<f64>,
}

impl ModelParams {
    /// Zero coefficients; unit variance for Normal models.
    pub fn initial(spec: &ModelSpec) -> Self {
        ModelParams {
            beta: vec![0.0; spec.width()],
            sigma2: (spec.family == Family::Normal).then_some(1.0),
        }
    }
}

/// Parameters of every model in a chain, in chain order.
#[derive(Clone, Debug, PartialEq)]
pub struct Theta {
    pub models: Vec<ModelParams>,
}

impl Theta {
    pub fn initial(chain: &ModelChain) -> Self {
        Theta {
            models: chain.specs().iter().map(ModelParams::initial).collect(),
        }
    }
}

/// Regressors and responses of the currently linked pairs for one model.
#[derive(Clone, Debug, PartialEq)]
pub struct Design {
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
}

impl Design {
    pub fn new(x: DMatrix<f64>, y: DVector<f64>) -> Result<Self, GlmError> {
        if x.nrows() != y.len() {
            return Err(GlmError::Dimension {
                expected: x.nrows(),
                got: y.len(),
            });
        }
        if x.ncols() == 0 || x.column(0).iter().any(|&v| v != 1.0) {
            return Err(GlmError::NoIntercept);
        }
        Ok(Design { x, y })
    }

    /// Builds a design from row-major regressor rows that exclude the
    /// intercept.
    pub fn from_rows(rows: &[Vec<f64>], y: Vec<f64>) -> Result<Self, GlmError> {
        let width = rows.first().map_or(0, Vec::len) + 1;
        let x = DMatrix::from_fn(rows.len(), width, |i, j| if j == 0 { 1.0 } else { rows[i][j - 1] });
        Design::new(x, DVector::from_vec(y))
    }

    pub fn rows(&self) -> usize {
        self.x.nrows()
    }

    pub fn cols(&self) -> usize {
        self.x.ncols()
    }
}

/// Inner-iteration settings for a kernel call.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelConfig {
    pub inner_iterations: usize,
    /// Per-coordinate acceptance rate the random-walk scales steer towards.
    pub target_acceptance: f64,
    /// Whether random-walk scales adapt during this call.
    pub adapt: bool,
}

impl Default for KernelConfig {
    fn default() -> Self {
        KernelConfig {
            inner_iterations: 1,
            target_acceptance: 0.44,
            adapt: false,
        }
    }
}
