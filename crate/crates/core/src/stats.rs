//! Two-sample Welch t-test, one-way ANOVA and the divide-by-std scaling used
//! before regression.
//!
//! Significance is reported only at the 5% and 1% two-tailed levels. Above 200
//! degrees of freedom the normal critical values are used.

use std::fmt;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, FisherSnedecor, StudentsT};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("sample too small: need at least {need}, got {got}")]
    TooSmall { need: usize, got: usize },
    #[error("need at least two groups")]
    TooFewGroups,
    #[error("empty group at index {0}")]
    EmptyGroup(usize),
    #[error("no within-group degrees of freedom")]
    NoWithinDof,
    #[error("degenerate data: zero within- and between-group variance")]
    Degenerate,
    #[error("zero variance")]
    ZeroVariance,
    #[error("singular design matrix")]
    SingularDesign,
    #[error("non-finite input")]
    NonFinite,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Significance {
    None,
    P05,
    P01,
}

impl Significance {
    pub fn stars(self) -> &'static str {
        match self {
            Significance::None => "",
            Significance::P05 => "*",
            Significance::P01 => "**",
        }
    }
}

impl fmt::Display for Significance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.stars())
    }
}

const Z_975: f64 = 1.959_963_984_540_054;
const Z_995: f64 = 2.575_829_303_548_901;

/// Two-tailed 5% and 1% critical values of Student's t.
pub fn t_critical(dof: f64) -> (f64, f64) {
    if dof > 200.0 || !dof.is_finite() {
        return (Z_975, Z_995);
    }
    let dist = StudentsT::new(0.0, 1.0, dof).expect("positive dof");
    (dist.inverse_cdf(0.975), dist.inverse_cdf(0.995))
}

pub fn t_significance(t: f64, dof: f64) -> Significance {
    if t.is_nan() {
        return Significance::None;
    }
    let (c05, c01) = t_critical(dof);
    let a = t.abs();
    if a >= c01 {
        Significance::P01
    } else if a >= c05 {
        Significance::P05
    } else {
        Significance::None
    }
}

pub fn f_significance(f: f64, df_between: f64, df_within: f64) -> Significance {
    if f.is_nan() {
        return Significance::None;
    }
    if f.is_infinite() {
        return Significance::P01;
    }
    let dist = FisherSnedecor::new(df_between, df_within).expect("positive dof");
    if f >= dist.inverse_cdf(0.99) {
        Significance::P01
    } else if f >= dist.inverse_cdf(0.95) {
        Significance::P05
    } else {
        Significance::None
    }
}

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Unbiased sample variance.
pub fn sample_variance(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (x.len() as f64 - 1.0)
}

/// Population standard deviation.
pub fn population_std(x: &[f64]) -> f64 {
    let m = mean(x);
    (x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / x.len() as f64).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTestResult {
    /// Infinite when both samples have zero variance and different means.
    pub t: f64,
    pub dof: f64,
    pub signif: Significance,
}

/// Welch's unequal-variance t statistic of mean(x) - mean(y).
pub fn welch_t(x: &[f64], y: &[f64]) -> Result<TTestResult, StatsError> {
    for s in [x, y] {
        if s.len() < 2 {
            return Err(StatsError::TooSmall { need: 2, got: s.len() });
        }
        if s.iter().any(|v| !v.is_finite()) {
            return Err(StatsError::NonFinite);
        }
    }
    let (nx, ny) = (x.len() as f64, y.len() as f64);
    let diff = mean(x) - mean(y);
    let (qx, qy) = (sample_variance(x) / nx, sample_variance(y) / ny);
    let se2 = qx + qy;
    if se2 == 0.0 {
        let t = if diff == 0.0 { 0.0 } else { diff.signum() * f64::INFINITY };
        let signif = if diff == 0.0 { Significance::None } else { Significance::P01 };
        return Ok(TTestResult { t, dof: nx + ny - 2.0, signif });
    }
    let t = diff / se2.sqrt();
    let dof = se2 * se2 / (qx * qx / (nx - 1.0) + qy * qy / (ny - 1.0));
    Ok(TTestResult { t, dof, signif: t_significance(t, dof) })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnovaResult {
    pub f: f64,
    pub df_between: usize,
    pub df_within: usize,
    pub ss_between: f64,
    pub ss_within: f64,
    pub signif: Significance,
}

/// One-way ANOVA F statistic across groups.
pub fn anova_oneway<S: AsRef<[f64]>>(groups: &[S]) -> Result<AnovaResult, StatsError> {
    if groups.len() < 2 {
        return Err(StatsError::TooFewGroups);
    }
    let mut total = 0usize;
    let mut grand = 0.0;
    for (i, g) in groups.iter().enumerate() {
        let g = g.as_ref();
        if g.is_empty() {
            return Err(StatsError::EmptyGroup(i));
        }
        if g.iter().any(|v| !v.is_finite()) {
            return Err(StatsError::NonFinite);
        }
        total += g.len();
        grand += g.iter().sum::<f64>();
    }
    let k = groups.len();
    if total <= k {
        return Err(StatsError::NoWithinDof);
    }
    let grand_mean = grand / total as f64;
    let (mut ss_between, mut ss_within) = (0.0, 0.0);
    for g in groups {
        let g = g.as_ref();
        let m = mean(g);
        ss_between += g.len() as f64 * (m - grand_mean) * (m - grand_mean);
        ss_within += g.iter().map(|v| (v - m) * (v - m)).sum::<f64>();
    }
    let (df_between, df_within) = (k - 1, total - k);
    let f = if ss_within == 0.0 {
        if ss_between == 0.0 {
            return Err(StatsError::Degenerate);
        }
        f64::INFINITY
    } else {
        (ss_between / df_between as f64) / (ss_within / df_within as f64)
    };
    Ok(AnovaResult {
        f,
        df_between,
        df_within,
        ss_between,
        ss_within,
        signif: f_significance(f, df_between as f64, df_within as f64),
    })
}

/// Divide every value by the population standard deviation of the series.
/// Values are not centred. Returns the scaled series and the divisor.
pub fn standardize(values: &[f64]) -> Result<(Vec<f64>, f64), StatsError> {
    if values.len() < 2 {
        return Err(StatsError::TooSmall { need: 2, got: values.len() });
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    let sd = population_std(values);
    if !(sd > 0.0) {
        return Err(StatsError::ZeroVariance);
    }
    Ok((values.iter().map(|v| v / sd).collect(), sd))
}
