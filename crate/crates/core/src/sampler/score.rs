use std::f64::consts::PI;

use statrs::function::gamma::ln_gamma;

use super::BlockState;
use crate::data::DataFile;
use crate::formula::{Family, ModelChain, Source};
use crate::glm::{log1p_exp, Design, GlmError, Theta};

/// Regressor parts of every model, split by file. For a pair `(a, b)` the
/// regressor row of model `p` is `a_part[a] + b_part[b]`, where the A part
/// carries the intercept and file-A predictors and the B part carries
/// responses of earlier models.
#[derive(Clone, Debug)]
pub struct LinkModel {
    models: Vec<ModelParts>,
    n_a: usize,
    n_b: usize,
}

#[derive(Clone, Debug)]
struct ModelParts {
    family: Family,
    width: usize,
    a_part: Vec<f64>,
    b_part: Vec<f64>,
    y: Vec<f64>,
    /// `ln(y!)` for Poisson responses, zero otherwise.
    y_const: Vec<f64>,
}

impl LinkModel {
    /// Extracts regressors and responses. Columns used by the chain are
    /// complete by construction of the chain.
    pub fn new(chain: &ModelChain, a: &DataFile, b: &DataFile) -> Self {
        let (n_a, n_b) = (a.len(), b.len());
        let models = chain
            .specs()
            .iter()
            .map(|spec| {
                let width = spec.width();
                let mut a_part = vec![0.0; n_a * width];
                let mut b_part = vec![0.0; n_b * width];
                for row in 0..n_a {
                    a_part[row * width] = 1.0;
                }
                for (k, pred) in spec.predictors.iter().enumerate() {
                    match pred.source {
                        Source::FileA(c) => {
                            for row in 0..n_a {
                                a_part[row * width + k + 1] = a.value(c, row).unwrap_or(f64::NAN);
                            }
                        }
                        Source::Response { column, .. } => {
                            for row in 0..n_b {
                                b_part[row * width + k + 1] = b.value(column, row).unwrap_or(f64::NAN);
                            }
                        }
                    }
                }
                let y: Vec<f64> = (0..n_b)
                    .map(|row| b.value(spec.response_column, row).unwrap_or(f64::NAN))
                    .collect();
                let y_const = match spec.family {
                    Family::Poisson => y.iter().map(|&v| ln_gamma(v + 1.0)).collect(),
                    _ => vec![0.0; n_b],
                };
                ModelParts {
                    family: spec.family,
                    width,
                    a_part,
                    b_part,
                    y,
                    y_const,
                }
            })
            .collect();
        LinkModel { models, n_a, n_b }
    }

    pub fn len(&self) -> usize {
        self.models.len()
    }

    pub fn is_empty(&self) -> bool {
        self.models.is_empty()
    }

    pub fn n_a(&self) -> usize {
        self.n_a
    }

    pub fn n_b(&self) -> usize {
        self.n_b
    }

    pub fn family(&self, model: usize) -> Family {
        self.models[model].family
    }

    /// Design of model `model` over the given `(a_row, b_row)` pairs.
    pub fn design<I>(&self, model: usize, pairs: I) -> Result<Design, GlmError>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        let m = &self.models[model];
        let w = m.width;
        let mut data = Vec::new();
        let mut y = Vec::new();
        for (a, b) in pairs {
            let (ra, rb) = (&m.a_part[a * w..(a + 1) * w], &m.b_part[b * w..(b + 1) * w]);
            data.extend(ra.iter().zip(rb).map(|(x, z)| x + z));
            y.push(m.y[b]);
        }
        let n = y.len();
        let x = nalgebra::DMatrix::from_row_slice(n, w, &data);
        Design::new(x, nalgebra::DVector::from_vec(y))
    }
}

/// Per-pair log-likelihoods under fixed parameters.
///
/// Linear predictors are split as `eta_a[a] + eta_b[b]` so that scoring a
/// pair costs one addition and one density evaluation per model.
#[derive(Clone, Debug)]
pub struct PairScorer<'m> {
    model: &'m LinkModel,
    eta_a: Vec<Vec<f64>>,
    eta_b: Vec<Vec<f64>>,
    sigma2: Vec<f64>,
    normal_const: Vec<f64>,
}

impl<'m> PairScorer<'m> {
    pub fn new(model: &'m LinkModel, theta: &Theta) -> Self {
        assert_eq!(model.models.len(), theta.models.len(), "theta does not match the chain");
        let mut eta_a = Vec::with_capacity(model.len());
        let mut eta_b = Vec::with_capacity(model.len());
        let mut sigma2 = Vec::with_capacity(model.len());
        let mut normal_const = Vec::with_capacity(model.len());
        for (parts, params) in model.models.iter().zip(&theta.models) {
            let w = parts.width;
            assert_eq!(params.beta.len(), w, "coefficient count does not match the design");
            let dot = |row: &[f64]| row.iter().zip(&params.beta).map(|(x, b)| x * b).sum::<f64>();
            eta_a.push(parts.a_part.chunks_exact(w).map(dot).collect());
            eta_b.push(parts.b_part.chunks_exact(w).map(dot).collect());
            let s2 = params.sigma2.unwrap_or(1.0);
            sigma2.push(s2);
            normal_const.push(-0.5 * (2.0 * PI * s2).ln());
        }
        PairScorer {
            model,
            eta_a,
            eta_b,
            sigma2,
            normal_const,
        }
    }

    /// Joint log-likelihood of all models for the pair `(a_row, b_row)`.
    pub fn pair(&self, a_row: usize, b_row: usize) -> f64 {
        let mut total = 0.0;
        for (p, parts) in self.model.models.iter().enumerate() {
            let eta = self.eta_a[p][a_row] + self.eta_b[p][b_row];
            let y = parts.y[b_row];
            total += match parts.family {
                Family::Normal => {
                    let r = y - eta;
                    self.normal_const[p] - r * r / (2.0 * self.sigma2[p])
                }
                Family::Logistic => y * eta - log1p_exp(eta),
                Family::Poisson => y * eta - eta.exp() - parts.y_const[b_row],
            };
        }
        total
    }

    fn slot(&self, block: &BlockState, slot: usize, b: Option<usize>) -> f64 {
        b.map_or(0.0, |b| self.pair(block.slots[slot].a_row, b))
    }

    /// Log-likelihood of every matched slot in the block.
    pub fn block(&self, block: &BlockState) -> f64 {
        (0..block.len()).map(|s| self.slot(block, s, block.assignment[s])).sum()
    }
}

/// Log acceptance ratio of exchanging the file-B partners of slots `i1` and
/// `i2`.
///
/// The ratio is exactly antisymmetric, and exactly zero when the two slots
/// have identical A-side predictors. An overflowing proposed state gives
/// `-inf`; an overflowing current state gives `+inf`.
pub fn swap_log_ratio(block: &BlockState, i1: usize, i2: usize, scorer: &PairScorer<'_>) -> f64 {
    if i1 == i2 {
        return 0.0;
    }
    let (b1, b2) = (block.assignment[i1], block.assignment[i2]);
    let old = scorer.slot(block, i1, b1) + scorer.slot(block, i2, b2);
    let new = scorer.slot(block, i1, b2) + scorer.slot(block, i2, b1);
    if !new.is_finite() {
        f64::NEG_INFINITY
    } else if !old.is_finite() {
        f64::INFINITY
    } else {
        new - old
    }
}
