//! Linked files built from a permutation sample, and the per-sample
//! analysis fit.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::data::{Column, DataError, DataFile};
use crate::formula::{Family, Formula};
use crate::glm::{log1p_exp, loglik_eta};

/// Newton-Raphson iteration cap of [`fit_analysis`].
pub const MAX_NEWTON_ITERATIONS: usize = 100;

/// Name of the intercept coefficient in a [`Fit`].
pub const INTERCEPT: &str = "(Intercept)";

#[derive(Debug, Error)]
pub enum LinkageError {
    #[error("permutation has {got} entries, file A has {expected} rows")]
    Length { expected: usize, got: usize },
    #[error("A row {a_row} linked to B row {b_row}, but file B has {n_b} rows")]
    OutOfRange { a_row: usize, b_row: usize, n_b: usize },
    #[error("B row {0} is linked more than once")]
    Duplicate(usize),
    #[error("A row {a_row} and B row {b_row} are in different blocks")]
    CrossBlock { a_row: usize, b_row: usize },
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("{0} is not a column of the linked file")]
    UnknownColumn(String),
    #[error("{rows} complete rows for {params} parameters")]
    InsufficientRows { rows: usize, params: usize },
    #[error("analysis design is rank deficient")]
    Singular,
    #[error("Newton-Raphson did not converge in {0} iterations")]
    NoConvergence(usize),
    #[error("response values are outside the {0} family's support")]
    Support(Family),
}

/// File A's columns followed by file B's columns, one row per A record.
///
/// B's block column is dropped since matched rows share A's block. Other B
/// columns whose names clash with A's get a `.b` suffix. Unmatched rows have
/// missing B cells.
pub fn apply_permutation(a: &DataFile, b: &DataFile, column: &[Option<usize>]) -> Result<DataFile, LinkageError> {
    if column.len() != a.len() {
        return Err(LinkageError::Length {
            expected: a.len(),
            got: column.len(),
        });
    }
    let (blocks_a, blocks_b) = (a.block_ids(), b.block_ids());
    let mut used = vec![false; b.len()];
    for (a_row, entry) in column.iter().enumerate() {
        if let Some(b_row) = *entry {
            if b_row >= b.len() {
                return Err(LinkageError::OutOfRange { a_row, b_row, n_b: b.len() });
            }
            if std::mem::replace(&mut used[b_row], true) {
                return Err(LinkageError::Duplicate(b_row));
            }
            if blocks_a[a_row] != blocks_b[b_row] {
                return Err(LinkageError::CrossBlock { a_row, b_row });
            }
        }
    }

    let mut columns: Vec<Column> = a.columns().to_vec();
    for col in b.columns().iter().filter(|c| c.name != b.block_column()) {
        let mut name = col.name.clone();
        while columns.iter().any(|c| c.name == name) {
            name.push_str(".b");
        }
        let values = column.iter().map(|e| e.and_then(|r| col.values[r])).collect();
        columns.push(Column::new(name, col.kind, values));
    }
    Ok(DataFile::new(
        format!("{}+{}", a.name(), b.name()),
        columns,
        a.block_column(),
    )?)
}

/// Coefficients and classical standard errors of an analysis model.
#[derive(Clone, Debug, PartialEq)]
pub struct Fit {
    /// Coefficient names, intercept first.
    pub names: Vec<String>,
    pub coef: Vec<f64>,
    pub se: Vec<f64>,
    /// Complete rows used.
    pub n: usize,
}

impl Fit {
    pub fn get(&self, name: &str) -> Option<(f64, f64)> {
        let i = self.names.iter().position(|n| n == name)?;
        Some((self.coef[i], self.se[i]))
    }
}

/// Fits `formula` on the rows of `data` with no missing referenced cell.
///
/// Normal models use least squares with `σ̂² = SSR/(n-p)`. Logistic and
/// Poisson models use Newton-Raphson maximum likelihood with standard errors
/// from the inverse observed information.
pub fn fit_analysis(formula: &Formula, family: Family, data: &DataFile) -> Result<Fit, LinkageError> {
    let lookup = |name: &str| {
        data.column_index(name)
            .ok_or_else(|| LinkageError::UnknownColumn(name.to_string()))
    };
    let response = lookup(&formula.response)?;
    let predictors = formula
        .predictors
        .iter()
        .map(|p| lookup(p))
        .collect::<Result<Vec<_>, _>>()?;

    let p = predictors.len() + 1;
    let mut rows = Vec::new();
    let mut y = Vec::new();
    'rows: for r in 0..data.len() {
        let Some(yr) = data.value(response, r) else { continue };
        let mut row = Vec::with_capacity(p);
        row.push(1.0);
        for &c in &predictors {
            match data.value(c, r) {
                Some(v) => row.push(v),
                None => continue 'rows,
            }
        }
        rows.extend(row);
        y.push(yr);
    }
    let n = y.len();
    if n <= p {
        return Err(LinkageError::InsufficientRows { rows: n, params: p });
    }
    let x = DMatrix::from_row_slice(n, p, &rows);
    let y = DVector::from_vec(y);
    let (coef, cov) = match family {
        Family::Normal => ols(&x, &y)?,
        Family::Logistic => {
            if y.iter().any(|&v| v != 0.0 && v != 1.0) {
                return Err(LinkageError::Support(family));
            }
            newton(family, &x, &y)?
        }
        Family::Poisson => {
            if y.iter().any(|&v| v < 0.0 || v.fract() != 0.0) {
                return Err(LinkageError::Support(family));
            }
            newton(family, &x, &y)?
        }
    };
    let mut names = vec![INTERCEPT.to_string()];
    names.extend(formula.predictors.iter().cloned());
    Ok(Fit {
        names,
        coef: coef.iter().copied().collect(),
        se: cov.diagonal().iter().map(|v| v.max(0.0).sqrt()).collect(),
        n,
    })
}

fn inverse_spd(m: DMatrix<f64>) -> Result<DMatrix<f64>, LinkageError> {
    crate::glm::check_rank(&m).map_err(|_| LinkageError::Singular)?;
    m.cholesky().map(|c| c.inverse()).ok_or(LinkageError::Singular)
}

fn ols(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<(DVector<f64>, DMatrix<f64>), LinkageError> {
    let xt = x.transpose();
    let inv = inverse_spd(&xt * x)?;
    let coef = &inv * (&xt * y);
    let resid = y - x * &coef;
    let s2 = resid.norm_squared() / (x.nrows() - x.ncols()) as f64;
    Ok((coef, inv * s2))
}

fn glm_loglik(family: Family, eta: &DVector<f64>, y: &DVector<f64>) -> f64 {
    eta.iter().zip(y.iter()).map(|(&e, &v)| loglik_eta(family, e, v, 1.0)).sum()
}

/// Mean and variance function at linear predictor `eta`.
fn mean_var(family: Family, eta: f64) -> (f64, f64) {
    match family {
        Family::Logistic => {
            let mu = (eta - log1p_exp(eta)).exp();
            (mu, mu * (1.0 - mu))
        }
        _ => {
            let mu = eta.exp();
            (mu, mu)
        }
    }
}

fn newton(family: Family, x: &DMatrix<f64>, y: &DVector<f64>) -> Result<(DVector<f64>, DMatrix<f64>), LinkageError> {
    let (n, p) = (x.nrows(), x.ncols());
    let mut beta = DVector::zeros(p);
    if family == Family::Poisson {
        beta[0] = (y.sum() / n as f64).max(1e-8).ln();
    }
    let mut eta = x * &beta;
    let mut ll = glm_loglik(family, &eta, y);
    for _ in 0..MAX_NEWTON_ITERATIONS {
        let mut grad = DVector::zeros(p);
        let mut info = DMatrix::zeros(p, p);
        for i in 0..n {
            let (mu, w) = mean_var(family, eta[i]);
            let xi = x.row(i).transpose();
            grad += &xi * (y[i] - mu);
            info += &xi * xi.transpose() * w;
        }
        let step = info.clone().cholesky().ok_or(LinkageError::Singular)?.solve(&grad);
        let mut scale = 1.0;
        let (mut next, mut next_eta, mut next_ll);
        loop {
            next = &beta + &step * scale;
            next_eta = x * &next;
            next_ll = glm_loglik(family, &next_eta, y);
            if (next_ll.is_finite() && next_ll >= ll - 1e-12 * ll.abs()) || scale < 1e-10 {
                break;
            }
            scale *= 0.5;
        }
        let change = (&next - &beta).amax();
        beta = next;
        eta = next_eta;
        ll = next_ll;
        if change < 1e-10 * (1.0 + beta.amax()) {
            let mut info = DMatrix::zeros(p, p);
            for i in 0..n {
                let xi = x.row(i).transpose();
                info += &xi * xi.transpose() * mean_var(family, eta[i]).1;
            }
            return Ok((beta, inverse_spd(info)?));
        }
    }
    Err(LinkageError::NoConvergence(MAX_NEWTON_ITERATIONS))
}
