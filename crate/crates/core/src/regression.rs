//! Ordinary least squares with classical standard errors, and the price-impact
//! model built on it.
//!
//! The solver works on a column-equilibrated design and a thin SVD, so rank
//! deficiency is detected from the singular-value spread rather than from a
//! failed factorization.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::stats::{standardize, t_significance, Significance, StatsError};

/// Relative singular-value cutoff below which the design counts as singular.
const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OlsFit {
    /// Intercept first, then one entry per regressor column.
    pub coefficients: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub t_stats: Vec<f64>,
    pub residuals: Vec<f64>,
    pub r_square: f64,
    pub n_rows: usize,
    pub dof: usize,
}

/// Fit `y = b0 + sum_j b_j x_j` by least squares. `columns` holds the
/// regressors without the constant.
pub fn ols(columns: &[Vec<f64>], y: &[f64]) -> Result<OlsFit, StatsError> {
    let n = y.len();
    let p = columns.len() + 1;
    if n < p + 1 {
        return Err(StatsError::TooSmall { need: p + 1, got: n });
    }
    if columns.iter().any(|c| c.len() != n) {
        return Err(StatsError::SingularDesign);
    }
    if y.iter().chain(columns.iter().flatten()).any(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite);
    }

    let mut x = DMatrix::<f64>::from_element(n, p, 1.0);
    for (j, col) in columns.iter().enumerate() {
        x.set_column(j + 1, &DVector::from_column_slice(col));
    }
    let norms: Vec<f64> = (0..p).map(|j| x.column(j).norm()).collect();
    if norms.contains(&0.0) {
        return Err(StatsError::SingularDesign);
    }
    for (j, s) in norms.iter().enumerate() {
        x.column_mut(j).scale_mut(1.0 / s);
    }

    let svd = x.clone().svd(true, true);
    let sv = &svd.singular_values;
    let s_max = sv.max();
    if sv.min() <= RANK_TOL * s_max {
        return Err(StatsError::SingularDesign);
    }
    let u = svd.u.as_ref().expect("u computed");
    let v_t = svd.v_t.as_ref().expect("v_t computed");
    let yv = DVector::from_column_slice(y);

    // beta_scaled = V S^-1 U' y
    let uty = u.transpose() * &yv;
    let w = DVector::from_iterator(p, uty.iter().zip(sv.iter()).map(|(a, s)| a / s));
    let beta_scaled = v_t.transpose() * w;

    let fitted = &x * &beta_scaled;
    let residuals: Vec<f64> = yv.iter().zip(fitted.iter()).map(|(a, b)| a - b).collect();
    let ss_res: f64 = residuals.iter().map(|r| r * r).sum();
    let y_mean = y.iter().sum::<f64>() / n as f64;
    let ss_tot: f64 = y.iter().map(|v| (v - y_mean) * (v - y_mean)).sum();
    let r_square = if ss_tot > 0.0 { (1.0 - ss_res / ss_tot).clamp(0.0, 1.0) } else { 1.0 };

    let dof = n - p;
    let sigma2 = ss_res / dof as f64;
    // cov(beta_scaled) = sigma^2 V S^-2 V'
    let v = v_t.transpose();
    let mut coefficients = Vec::with_capacity(p);
    let mut std_errors = Vec::with_capacity(p);
    let mut t_stats = Vec::with_capacity(p);
    for j in 0..p {
        let var_scaled: f64 = (0..p).map(|k| (v[(j, k)] / sv[k]).powi(2)).sum::<f64>() * sigma2;
        let beta = beta_scaled[j] / norms[j];
        let se = var_scaled.sqrt() / norms[j];
        coefficients.push(beta);
        std_errors.push(se);
        t_stats.push(beta / se);
    }
    Ok(OlsFit { coefficients, std_errors, t_stats, residuals, r_square, n_rows: n, dof })
}

/// One institutional transaction as a regression row, in natural units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImpactRow {
    pub float_cap: f64,
    pub c: f64,
    pub sell: bool,
    pub prior_vol: f64,
    pub pi: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ImpactModel {
    /// All transactions, with the sell dummy.
    Pooled,
    /// Purchases only, no dummy.
    Purchases,
    /// Sales only, no dummy.
    Sales,
}

impl ImpactModel {
    pub fn name(self) -> &'static str {
        match self {
            ImpactModel::Pooled => "pooled",
            ImpactModel::Purchases => "purchases",
            ImpactModel::Sales => "sales",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Coefficient {
    pub name: &'static str,
    pub value: f64,
    pub std_error: f64,
    pub t_stat: f64,
    pub signif: Significance,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegressionResult {
    pub model: ImpactModel,
    pub coefficients: Vec<Coefficient>,
    pub r_square: f64,
    pub n_rows: usize,
}

impl RegressionResult {
    pub fn coefficient(&self, name: &str) -> Option<&Coefficient> {
        self.coefficients.iter().find(|c| c.name == name)
    }
}

/// Divisors used to scale PI, C_f, C and V_p, computed over a whole table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scales {
    pub pi: f64,
    pub float_cap: f64,
    pub c: f64,
    pub prior_vol: f64,
}

impl Scales {
    pub fn of(rows: &[ImpactRow]) -> Result<Scales, StatsError> {
        let col = |f: fn(&ImpactRow) -> f64| rows.iter().map(f).collect::<Vec<_>>();
        let scale = |v: Vec<f64>, regressor: bool| match standardize(&v) {
            Ok((_, s)) => Ok(s),
            Err(StatsError::ZeroVariance) if regressor => Err(StatsError::SingularDesign),
            Err(e) => Err(e),
        };
        Ok(Scales {
            pi: scale(col(|r| r.pi), false)?,
            float_cap: scale(col(|r| r.float_cap), true)?,
            c: scale(col(|r| r.c), true)?,
            prior_vol: scale(col(|r| r.prior_vol), true)?,
        })
    }
}

/// Fit the impact regression on `rows`, scaled by `scales` (the sell dummy is
/// never scaled).
pub fn fit_impact_model(
    rows: &[ImpactRow],
    model: ImpactModel,
    scales: &Scales,
) -> Result<RegressionResult, StatsError> {
    let selected: Vec<&ImpactRow> = rows
        .iter()
        .filter(|r| match model {
            ImpactModel::Pooled => true,
            ImpactModel::Purchases => !r.sell,
            ImpactModel::Sales => r.sell,
        })
        .collect();
    let scaled = |f: fn(&ImpactRow) -> f64, s: f64| selected.iter().map(|r| f(r) / s).collect::<Vec<_>>();
    let y = scaled(|r| r.pi, scales.pi);
    let mut names = vec!["alpha", "beta1", "beta2"];
    let mut columns = vec![scaled(|r| r.float_cap, scales.float_cap), scaled(|r| r.c, scales.c)];
    if model == ImpactModel::Pooled {
        names.push("beta3");
        columns.push(selected.iter().map(|r| if r.sell { 1.0 } else { 0.0 }).collect());
    }
    names.push("beta4");
    columns.push(scaled(|r| r.prior_vol, scales.prior_vol));

    let fit = ols(&columns, &y)?;
    let dof = fit.dof as f64;
    let coefficients = names
        .into_iter()
        .enumerate()
        .map(|(j, name)| Coefficient {
            name,
            value: fit.coefficients[j],
            std_error: fit.std_errors[j],
            t_stat: fit.t_stats[j],
            signif: t_significance(fit.t_stats[j], dof),
        })
        .collect();
    Ok(RegressionResult { model, coefficients, r_square: fit.r_square, n_rows: fit.n_rows })
}
