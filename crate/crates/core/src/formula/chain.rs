use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use super::parse::{parse_formula, ParseError};
use crate::data::{ColumnType, DataFile};

/// Response distribution of one conditional model.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Family {
    /// Linear regression with Gaussian noise.
    Normal,
    /// Bernoulli response, logit link.
    Logistic,
    /// Poisson response, log link.
    Poisson,
}

impl Family {
    /// Whether a response column of `kind` can be modelled by this family.
    /// Binary columns are valid counts.
    pub fn accepts(self, kind: ColumnType) -> bool {
        use ColumnType::*;
        match self {
            Family::Normal => matches!(kind, Continuous | Count | Binary),
            Family::Logistic => kind == Binary,
            Family::Poisson => matches!(kind, Count | Binary),
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Family::Normal => "normal",
            Family::Logistic => "logistic",
            Family::Poisson => "poisson",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("unknown family {0:?} (expected normal, logistic or poisson)")]
pub struct UnknownFamily(pub String);

impl FromStr for Family {
    type Err = UnknownFamily;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "normal" | "gaussian" => Ok(Family::Normal),
            "logistic" | "binomial" => Ok(Family::Logistic),
            "poisson" => Ok(Family::Poisson),
            _ => Err(UnknownFamily(s.to_string())),
        }
    }
}

/// Where a predictor's values come from for a linked pair.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Source {
    /// Column index in file A.
    FileA(usize),
    /// Response of an earlier model; `column` indexes file B.
    Response { model: usize, column: usize },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Predictor {
    pub name: String,
    pub source: Source,
}

/// One univariate conditional GLM in the chain.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ModelSpec {
    pub index: usize,
    pub response: String,
    /// Column index of the response in file B.
    pub response_column: usize,
    pub predictors: Vec<Predictor>,
    pub family: Family,
}

impl ModelSpec {
    /// Design width: intercept plus one column per predictor.
    pub fn width(&self) -> usize {
        1 + self.predictors.len()
    }
}

/// Validated, ordered model chain.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ModelChain {
    specs: Vec<ModelSpec>,
}

impl ModelChain {
    pub fn specs(&self) -> &[ModelSpec] {
        &self.specs
    }

    pub fn len(&self) -> usize {
        self.specs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.specs.is_empty()
    }
}

#[derive(Debug, Error)]
pub enum ChainError {
    #[error("{formulas} formulas but {families} families")]
    LengthMismatch { formulas: usize, families: usize },
    #[error("at least one model is required")]
    Empty,
    #[error("formula {index}: {source}")]
    Parse {
        index: usize,
        #[source]
        source: ParseError,
    },
    #[error("response {0} is not a column of file B")]
    UnknownResponse(String),
    #[error("response {0} is modelled twice")]
    ResponseReused(String),
    #[error("predictor {0} not available before its defining model")]
    ForwardReference(String),
    #[error("predictor {0} is neither a file-A column nor the response of an earlier model")]
    Unresolvable(String),
    #[error("{family} family cannot model {kind} response {response}")]
    FamilyMismatch {
        response: String,
        family: Family,
        kind: ColumnType,
    },
    #[error("column {0} has missing values and cannot be used in a model")]
    MissingValues(String),
}

/// Parses `formulas` and resolves each column against files A and B.
///
/// Responses must be file-B columns, each modelled once. A predictor
/// resolves to the response of an earlier model if one matches, otherwise to
/// a file-A column.
pub fn build_chain<S: AsRef<str>>(
    formulas: &[S],
    families: &[Family],
    a: &DataFile,
    b: &DataFile,
) -> Result<ModelChain, ChainError> {
    if formulas.len() != families.len() {
        return Err(ChainError::LengthMismatch {
            formulas: formulas.len(),
            families: families.len(),
        });
    }
    if formulas.is_empty() {
        return Err(ChainError::Empty);
    }
    let parsed = formulas
        .iter()
        .enumerate()
        .map(|(index, f)| parse_formula(f.as_ref()).map_err(|source| ChainError::Parse { index, source }))
        .collect::<Result<Vec<_>, _>>()?;

    let mut specs: Vec<ModelSpec> = Vec::with_capacity(parsed.len());
    for (index, (formula, &family)) in parsed.iter().zip(families).enumerate() {
        if specs.iter().any(|s| s.response == formula.response) {
            return Err(ChainError::ResponseReused(formula.response.clone()));
        }
        let response_column = b
            .column_index(&formula.response)
            .ok_or_else(|| ChainError::UnknownResponse(formula.response.clone()))?;
        let col = &b.columns()[response_column];
        if !family.accepts(col.kind) {
            return Err(ChainError::FamilyMismatch {
                response: formula.response.clone(),
                family,
                kind: col.kind,
            });
        }
        if col.has_missing() {
            return Err(ChainError::MissingValues(col.name.clone()));
        }

        let mut predictors = Vec::with_capacity(formula.predictors.len());
        for name in &formula.predictors {
            let source = if let Some(earlier) = specs.iter().find(|s| s.response == *name) {
                Source::Response {
                    model: earlier.index,
                    column: earlier.response_column,
                }
            } else if parsed[index + 1..].iter().any(|f| f.response == *name) {
                return Err(ChainError::ForwardReference(name.clone()));
            } else if let Some(c) = a.column_index(name) {
                if a.columns()[c].has_missing() {
                    return Err(ChainError::MissingValues(name.clone()));
                }
                Source::FileA(c)
            } else {
                return Err(ChainError::Unresolvable(name.clone()));
            };
            predictors.push(Predictor {
                name: name.clone(),
                source,
            });
        }
        specs.push(ModelSpec {
            index,
            response: formula.response.clone(),
            response_column,
            predictors,
            family,
        });
    }
    Ok(ModelChain { specs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Column;

    fn files() -> (DataFile, DataFile) {
        let a = DataFile::new(
            "A",
            vec![
                Column::complete("WEIGHT", ColumnType::Count, vec![202.0, 260.0]),
                Column::complete("PHYSHLTH", ColumnType::Count, vec![10.0, 15.0]),
                Column::complete("MENTHLTH", ColumnType::Count, vec![20.0, 6.0]),
                Column::complete("AGE", ColumnType::Count, vec![36.0, 57.0]),
                Column::new("HOLE", ColumnType::Continuous, vec![Some(1.0), None]),
                Column::complete("block", ColumnType::Identifier, vec![1.0, 2.0]),
            ],
            "block",
        )
        .unwrap();
        let b = DataFile::new(
            "B",
            vec![
                Column::complete("GENHLTH", ColumnType::Count, vec![3.0, 2.0]),
                Column::complete("ALCDAY", ColumnType::Count, vec![215.0, 101.0]),
                Column::complete("ASTHMA", ColumnType::Binary, vec![1.0, 0.0]),
                Column::complete("block", ColumnType::Identifier, vec![1.0, 2.0]),
            ],
            "block",
        )
        .unwrap();
        (a, b)
    }

    #[test]
    fn joint_chain_resolves_earlier_response() {
        let (a, b) = files();
        let chain = build_chain(
            &["GENHLTH~PHYSHLTH+MENTHLTH", "ASTHMA~PHYSHLTH+AGE+WEIGHT+GENHLTH"],
            &[Family::Normal, Family::Logistic],
            &a,
            &b,
        )
        .unwrap();
        assert_eq!(chain.len(), 2);
        let second = &chain.specs()[1];
        assert_eq!(second.width(), 5);
        assert_eq!(
            second.predictors[3].source,
            Source::Response { model: 0, column: 0 }
        );
        assert_eq!(second.predictors[0].source, Source::FileA(1));
    }

    #[test]
    fn reversed_chain_is_a_forward_reference() {
        let (a, b) = files();
        let err = build_chain(
            &["ASTHMA~PHYSHLTH+AGE+WEIGHT+GENHLTH", "GENHLTH~PHYSHLTH+MENTHLTH"],
            &[Family::Logistic, Family::Normal],
            &a,
            &b,
        )
        .unwrap_err();
        assert_eq!(
            err.to_string(),
            "predictor GENHLTH not available before its defining model"
        );
    }

    #[test]
    fn family_constraints() {
        let (a, b) = files();
        // WEIGHT lives in A, so put a continuous column in B for this check.
        let b2 = DataFile::new(
            "B",
            vec![
                Column::complete("WEIGHT", ColumnType::Continuous, vec![80.5, 91.0]),
                Column::complete("block", ColumnType::Identifier, vec![1.0, 2.0]),
            ],
            "block",
        )
        .unwrap();
        assert!(matches!(
            build_chain(&["WEIGHT~AGE"], &[Family::Logistic], &a, &b2),
            Err(ChainError::FamilyMismatch { .. })
        ));
        assert!(matches!(
            build_chain(&["WEIGHT~AGE"], &[Family::Poisson], &a, &b2),
            Err(ChainError::FamilyMismatch { .. })
        ));
        assert!(build_chain(&["ALCDAY~AGE"], &[Family::Poisson], &a, &b).is_ok());
        assert!(build_chain(&["ASTHMA~AGE"], &[Family::Logistic], &a, &b).is_ok());
    }

    #[test]
    fn other_rejections() {
        let (a, b) = files();
        let fam = [Family::Normal, Family::Normal];
        assert!(matches!(
            build_chain(&["GENHLTH~AGE", "GENHLTH~WEIGHT"], &fam, &a, &b),
            Err(ChainError::ResponseReused(_))
        ));
        assert!(matches!(
            build_chain(&["AGE~WEIGHT"], &fam[..1], &a, &b),
            Err(ChainError::UnknownResponse(_))
        ));
        assert!(matches!(
            build_chain(&["GENHLTH~ALCDAY"], &fam[..1], &a, &b),
            Err(ChainError::Unresolvable(_))
        ));
        assert!(matches!(
            build_chain(&["GENHLTH~HOLE"], &fam[..1], &a, &b),
            Err(ChainError::MissingValues(_))
        ));
        assert!(matches!(
            build_chain(&["GENHLTH~AGE"], &fam, &a, &b),
            Err(ChainError::LengthMismatch { .. })
        ));
        assert!(matches!(
            build_chain(&["GENHLTH~"], &fam[..1], &a, &b),
            Err(ChainError::Parse { index: 0, .. })
        ));
        let none: [&str; 0] = [];
        assert!(matches!(
            build_chain(&none, &[], &a, &b),
            Err(ChainError::Empty)
        ));
    }

    #[test]
    fn family_names() {
        assert_eq!("Normal".parse::<Family>().unwrap(), Family::Normal);
        assert_eq!("LOGISTIC".parse::<Family>().unwrap(), Family::Logistic);
        assert_eq!("poisson".parse::<Family>().unwrap(), Family::Poisson);
        assert!("gamma".parse::<Family>().is_err());
    }

    /// Moving a model ahead of one whose response it uses must always fail.
    #[test]
    fn any_forward_permutation_errors() {
        let (a, b) = files();
        let formulas = ["GENHLTH~AGE", "ALCDAY~GENHLTH+AGE", "ASTHMA~ALCDAY+GENHLTH"];
        let families = [Family::Normal, Family::Poisson, Family::Logistic];
        let orders = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
        for order in orders {
            let f: Vec<_> = order.iter().map(|&i| formulas[i]).collect();
            let fam: Vec<_> = order.iter().map(|&i| families[i]).collect();
            let res = build_chain(&f, &fam, &a, &b);
            if order == [0, 1, 2] {
                assert!(res.is_ok());
            } else {
                assert!(matches!(res, Err(ChainError::ForwardReference(_))), "{order:?}");
            }
        }
    }
}
