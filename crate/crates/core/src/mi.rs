//! Combining rules for scalar estimates from multiply imputed analyses.
//!
//! With `M` estimates `q_m` and standard errors `se_m`, the pooled estimate is
//! the mean `q̄`, the within variance `W̄` the mean of `se_m²`, the between
//! variance `B` the sample variance of `q_m`, and the total variance
//! `T = (1 + 1/M)·B + W̄`.
//!
//! Two small-sample reference t distributions are offered. Both use
//! `v = (M-1)(1 + 1/r)²` with `r = (1 + 1/M)·B/W̄`, and differ in the
//! observed-data degrees of freedom `v_obs = (1-f)·(vcom+1)/(vcom+3)·vcom`:
//! [`DfMethod::BarnardRubinPaper`] takes `f = r`, while
//! [`DfMethod::BarnardRubinStandard`] takes the fraction of missing
//! information `f = (1 + 1/M)·B/T`. The reference df is `(1/v + 1/v_obs)⁻¹`.

use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, ContinuousCDF, Normal, StudentsT};
use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DfMethod {
    Normal,
    BarnardRubinPaper,
    BarnardRubinStandard,
}

impl std::str::FromStr for DfMethod {
    type Err = MiError;

    fn from_str(s: &str) -> Result<Self, MiError> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "normal" => Ok(DfMethod::Normal),
            "barnard_rubin" | "barnard_rubin_paper" => Ok(DfMethod::BarnardRubinPaper),
            "barnard_rubin_standard" => Ok(DfMethod::BarnardRubinStandard),
            _ => Err(MiError::UnknownMethod(s.to_string())),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Error)]
pub enum MiError {
    #[error("combining needs at least 2 estimates, got {0}")]
    TooFew(usize),
    #[error("{estimates} estimates but {std_errors} standard errors")]
    LengthMismatch { estimates: usize, std_errors: usize },
    #[error("standard error {index} is {value}; must be positive and finite")]
    BadStdError { index: usize, value: f64 },
    #[error("estimate {0} is not finite")]
    BadEstimate(usize),
    #[error("confidence level {0} must lie in (0, 1)")]
    BadLevel(f64),
    #[error("complete-data degrees of freedom required for the Barnard-Rubin reference")]
    MissingVcom,
    #[error("complete-data degrees of freedom {0} must be positive")]
    BadVcom(f64),
    #[error("unknown df method {0}")]
    UnknownMethod(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct MiInput {
    pub estimates: Vec<f64>,
    pub std_errors: Vec<f64>,
    /// Confidence level of the interval, e.g. 0.95.
    pub level: f64,
    pub df_method: DfMethod,
    pub vcom: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MiResult {
    pub m: usize,
    pub estimate: f64,
    pub within: f64,
    pub between: f64,
    pub total: f64,
    pub df_method: DfMethod,
    /// Reference degrees of freedom; `None` stands for infinity.
    pub df: Option<f64>,
    pub critical: f64,
    pub lower: f64,
    pub upper: f64,
    pub level: f64,
    /// Set when the observed-data df was undefined and the reference fell
    /// back to `v` alone.
    pub df_fallback: bool,
}

/// Relative increase in variance `r` and the fraction of missing
/// information `γ` for given `B`, `W̄` and `M`.
pub fn variance_ratios(between: f64, within: f64, m: usize) -> (f64, f64) {
    let inflated = (1.0 + 1.0 / m as f64) * between;
    (inflated / within, inflated / (inflated + within))
}

/// Barnard-Rubin reference df with `fraction` plugged into the observed-data
/// term. Returns `(df, fallback)`; `df` is `None` when `B = 0`.
pub fn barnard_rubin_df(between: f64, within: f64, m: usize, vcom: f64, fraction: f64) -> (Option<f64>, bool) {
    if between <= 0.0 {
        return (None, false);
    }
    let (r, _) = variance_ratios(between, within, m);
    let v = (m as f64 - 1.0) * (1.0 + 1.0 / r).powi(2);
    if fraction >= 1.0 {
        return (Some(v), true);
    }
    let vobs = (1.0 - fraction) * (vcom + 1.0) / (vcom + 3.0) * vcom;
    (Some(1.0 / (1.0 / v + 1.0 / vobs)), false)
}

/// Above this df the quantile comes from its asymptotic series in `1/df`,
/// whose truncation error is below 1e-16 there.
const T_SERIES_DF: f64 = 1e4;

/// Student t quantile.
///
/// The library's root finder is only accurate to about 1e-5 at large df and
/// does not terminate for very large df, so moderate df polish its answer by
/// Newton steps on the CDF and large df use the Cornish-Fisher series.
pub fn t_quantile(df: f64, p: f64) -> f64 {
    if df > T_SERIES_DF {
        let z = Normal::standard().inverse_cdf(p);
        let z2 = z * z;
        let g = [
            z * (z2 + 1.0) / 4.0,
            z * ((5.0 * z2 + 16.0) * z2 + 3.0) / 96.0,
            z * (((3.0 * z2 + 19.0) * z2 + 17.0) * z2 - 15.0) / 384.0,
            z * ((((79.0 * z2 + 776.0) * z2 + 1482.0) * z2 - 1920.0) * z2 - 945.0) / 92160.0,
        ];
        return z + g.iter().rev().fold(0.0, |acc, gk| (acc + gk) / df);
    }
    let t = StudentsT::new(0.0, 1.0, df).expect("positive df");
    let mut x = t.inverse_cdf(p);
    for _ in 0..8 {
        let step = (t.cdf(x) - p) / t.pdf(x);
        if !step.is_finite() {
            break;
        }
        x -= step;
        if step.abs() <= 1e-15 * x.abs().max(1.0) {
            break;
        }
    }
    x
}

pub fn combine(input: &MiInput) -> Result<MiResult, MiError> {
    let m = input.estimates.len();
    if m != input.std_errors.len() {
        return Err(MiError::LengthMismatch {
            estimates: m,
            std_errors: input.std_errors.len(),
        });
    }
    if m < 2 {
        return Err(MiError::TooFew(m));
    }
    if let Some(i) = input.estimates.iter().position(|q| !q.is_finite()) {
        return Err(MiError::BadEstimate(i));
    }
    if let Some((index, &value)) = input
        .std_errors
        .iter()
        .enumerate()
        .find(|(_, &s)| !(s > 0.0 && s.is_finite()))
    {
        return Err(MiError::BadStdError { index, value });
    }
    if !(input.level > 0.0 && input.level < 1.0) {
        return Err(MiError::BadLevel(input.level));
    }
    let vcom = match (input.df_method, input.vcom) {
        (DfMethod::Normal, _) => None,
        (_, None) => return Err(MiError::MissingVcom),
        (_, Some(v)) if !(v > 0.0) => return Err(MiError::BadVcom(v)),
        (_, Some(v)) => Some(v),
    };

    let mf = m as f64;
    let estimate = input.estimates.iter().sum::<f64>() / mf;
    let between = input.estimates.iter().map(|q| (q - estimate).powi(2)).sum::<f64>() / (mf - 1.0);
    let within = input.std_errors.iter().map(|s| s * s).sum::<f64>() / mf;
    let total = (1.0 + 1.0 / mf) * between + within;
    let (r, gamma) = variance_ratios(between, within, m);

    let (df, df_fallback) = match (input.df_method, vcom) {
        (DfMethod::BarnardRubinPaper, Some(vc)) => barnard_rubin_df(between, within, m, vc, r),
        (DfMethod::BarnardRubinStandard, Some(vc)) => barnard_rubin_df(between, within, m, vc, gamma),
        _ => (None, false),
    };
    let p = 0.5 * (1.0 + input.level);
    let critical = match df {
        None => Normal::standard().inverse_cdf(p),
        Some(v) => t_quantile(v, p),
    };
    let half = critical * total.sqrt();
    Ok(MiResult {
        m,
        estimate,
        within,
        between,
        total,
        df_method: input.df_method,
        df,
        critical,
        lower: estimate - half,
        upper: estimate + half,
        level: input.level,
        df_fallback,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn input(q: &[f64], se: &[f64], method: DfMethod, vcom: Option<f64>) -> MiInput {
        MiInput {
            estimates: q.to_vec(),
            std_errors: se.to_vec(),
            level: 0.95,
            df_method: method,
            vcom,
        }
    }

    #[test]
    fn zero_between_variance() {
        let r = combine(&input(&[1.0; 3], &[0.5; 3], DfMethod::Normal, None)).unwrap();
        assert_eq!((r.estimate, r.between, r.within, r.total), (1.0, 0.0, 0.25, 0.25));
        assert!((r.upper - (1.0 + 1.959_963_984_540_054 * 0.5)).abs() < 1e-10);
        let br = combine(&input(&[1.0; 3], &[0.5; 3], DfMethod::BarnardRubinPaper, Some(10.0))).unwrap();
        assert_eq!(br.df, None);
        assert_eq!(br.upper, r.upper);
    }

    #[test]
    fn fallback_when_ratio_reaches_one() {
        let r = combine(&input(&[0.0, 2.0], &[1.0, 1.0], DfMethod::BarnardRubinPaper, Some(50.0))).unwrap();
        assert!(r.df_fallback);
        // r = 3, v = 1·(4/3)².
        assert!((r.df.unwrap() - 16.0 / 9.0).abs() < 1e-12);
        let s = combine(&input(&[0.0, 2.0], &[1.0, 1.0], DfMethod::BarnardRubinStandard, Some(50.0))).unwrap();
        assert!(!s.df_fallback);
    }

    #[test]
    fn errors() {
        assert_eq!(combine(&input(&[1.0], &[1.0], DfMethod::Normal, None)), Err(MiError::TooFew(1)));
        assert!(matches!(
            combine(&input(&[1.0, 2.0], &[1.0, 0.0], DfMethod::Normal, None)),
            Err(MiError::BadStdError { index: 1, .. })
        ));
        assert_eq!(
            combine(&input(&[1.0, 2.0], &[1.0, 1.0], DfMethod::BarnardRubinPaper, None)),
            Err(MiError::MissingVcom)
        );
        let mut bad = input(&[1.0, 2.0], &[1.0, 1.0], DfMethod::Normal, None);
        bad.level = 1.0;
        assert_eq!(combine(&bad), Err(MiError::BadLevel(1.0)));
    }

    #[test]
    fn t_quantiles() {
        // Reference values of the 0.975 quantile.
        for (df, q) in [(1.0, 12.706_204_736_174_7), (5.0, 2.570_581_835_636_31), (30.0, 2.042_272_456_301_24)] {
            assert!((t_quantile(df, 0.975) - q).abs() < 1e-10, "df {df}");
        }
        let z = Normal::standard().inverse_cdf(0.975);
        let mut last = f64::INFINITY;
        for k in 1..13 {
            let q = t_quantile(10f64.powi(k), 0.975);
            assert!(q > z && q < last, "df 1e{k}: {q}");
            last = q;
        }
        // Both branches agree where they meet.
        let below = t_quantile(T_SERIES_DF, 0.975);
        let above = t_quantile(T_SERIES_DF * (1.0 + 1e-12), 0.975);
        assert!((below - above).abs() < 1e-12, "{below} {above}");
    }

    #[test]
    fn method_names() {
        assert_eq!("barnard_rubin".parse::<DfMethod>().unwrap(), DfMethod::BarnardRubinPaper);
        assert_eq!("Barnard-Rubin-Standard".parse::<DfMethod>().unwrap(), DfMethod::BarnardRubinStandard);
        assert!("t".parse::<DfMethod>().is_err());
    }
}
