//! Final report tables: CSV with floats at six significant digits, plus aligned
//! plain-text renderings.

use std::fmt::Write as _;
use std::io::Write;

use serde::Serialize;

use crate::impact::EventStudyTable;
use crate::regression::RegressionResult;
use crate::series::{DailyClose, RatioGroup, TrendKind, TrendSegment};
use crate::stats::{mean, welch_t, TTestResult};
use crate::tables::TransactionRecord;
use crate::types::Side;

/// Format like C's `%.6g`: six significant digits, trailing zeros removed,
/// exponent form outside `[1e-4, 1e6)`.
pub fn fmt_g(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..6).contains(&exp) {
        let m = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        return format!("{m}e{sign}{:02}", exp.abs());
    }
    let decimals = (5 - exp) as usize;
    trim_zeros(&format!("{x:.decimals$}")).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn opt_g(x: Option<f64>) -> String {
    x.map(fmt_g).unwrap_or_default()
}

/// Aligned plain-text table: first column left-aligned, others right-aligned.
#[derive(Debug, Clone, Default)]
pub struct TextTable {
    pub title: String,
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl TextTable {
    pub fn new(title: impl Into<String>, headers: &[&str]) -> Self {
        TextTable { title: title.into(), headers: headers.iter().map(|h| h.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }

    pub fn render(&self) -> String {
        let n = self.headers.len();
        let mut widths: Vec<usize> = self.headers.iter().map(|h| h.chars().count()).collect();
        for row in &self.rows {
            for (w, cell) in widths.iter_mut().zip(row) {
                *w = (*w).max(cell.chars().count());
            }
        }
        let line = |cells: &[String]| {
            let mut s = String::new();
            for (i, w) in widths.iter().enumerate().take(n) {
                let cell = cells.get(i).map(String::as_str).unwrap_or("");
                if i == 0 {
                    let _ = write!(s, "{cell:<w$}");
                } else {
                    let _ = write!(s, "  {cell:>w$}");
                }
            }
            s.trim_end().to_string()
        };
        let mut out = String::new();
        if !self.title.is_empty() {
            out.push_str(&self.title);
            out.push('\n');
        }
        out.push_str(&line(&self.headers));
        out.push('\n');
        let total: usize = widths.iter().sum::<usize>() + 2 * n.saturating_sub(1);
        out.push_str(&"-".repeat(total));
        out.push('\n');
        for row in &self.rows {
            out.push_str(&line(row));
            out.push('\n');
        }
        out
    }
}

fn csv_writer<W: Write>(out: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().has_headers(false).terminator(csv::Terminator::Any(b'\n')).from_writer(out)
}

fn stars(t: Option<&TTestResult>) -> String {
    t.map(|t| t.signif.stars().to_string()).unwrap_or_default()
}

pub fn write_segments<W: Write>(out: W, per_stock: &[(String, Vec<TrendSegment>)]) -> Result<(), csv::Error> {
    let mut w = csv_writer(out);
    w.write_record(["stock_code", "kind", "start", "end", "n_days", "magnitude"])?;
    for (stock, segments) in per_stock {
        for s in segments {
            w.write_record([
                stock.clone(),
                s.kind.name().to_string(),
                s.start_date.to_string(),
                s.end_date.to_string(),
                s.n_days.to_string(),
                fmt_g(s.magnitude),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Drawup ratio of one stock and its group.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StockRatio {
    pub stock_code: String,
    pub r: f64,
    pub group: RatioGroup,
}

pub fn write_ratios<W: Write>(out: W, ratios: &[StockRatio]) -> Result<(), csv::Error> {
    let mut w = csv_writer(out);
    w.write_record(["stock_code", "r", "group"])?;
    for r in ratios {
        w.write_record([r.stock_code.clone(), fmt_g(r.r), r.group.label().to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Tidy plot data of adjusted closes with the trend owning each day's change.
pub fn write_trend_plot<W: Write>(
    out: W,
    per_stock: &[(String, Vec<DailyClose>, Vec<TrendSegment>)],
) -> Result<(), csv::Error> {
    let mut w = csv_writer(out);
    w.write_record(["stock_code", "date", "raw_close", "adjusted_close", "kind"])?;
    for (stock, closes, segments) in per_stock {
        for (i, c) in closes.iter().enumerate() {
            let kind = crate::series::segment_index_for(segments, i).map(|k| segments[k].kind.name()).unwrap_or("");
            w.write_record([
                stock.clone(),
                c.date.to_string(),
                fmt_g(c.raw_close),
                fmt_g(c.adjusted_close),
                kind.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn render_segments(per_stock: &[(String, Vec<TrendSegment>)], ratios: &[StockRatio]) -> String {
    let mut t = TextTable::new("Drawup/drawdown segments", &["stock", "kind", "start", "end", "days", "magnitude"]);
    for (stock, segments) in per_stock {
        for s in segments {
            t.push(vec![
                stock.clone(),
                s.kind.name().into(),
                s.start_date.to_string(),
                s.end_date.to_string(),
                s.n_days.to_string(),
                fmt_g(s.magnitude),
            ]);
        }
    }
    let mut r = TextTable::new("Drawup ratio", &["stock", "r", "group"]);
    for x in ratios {
        r.push(vec![x.stock_code.clone(), fmt_g(x.r), x.group.label().into()]);
    }
    format!("{}\n{}", t.render(), r.render())
}

/// Purchase/sale price-impact comparison for one stock (or the total) in one
/// trend.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImpactComparison {
    /// `None` for the all-stock total.
    pub stock_code: Option<String>,
    pub r: Option<f64>,
    pub group: Option<RatioGroup>,
    pub trend: TrendKind,
    pub n_purchases: usize,
    pub n_sales: usize,
    pub mean_purchase: Option<f64>,
    pub mean_sale: Option<f64>,
    /// Welch t of purchases against sales.
    pub t: Option<TTestResult>,
}

fn compare(
    rows: &[&TransactionRecord],
    trend: TrendKind,
    stock_code: Option<String>,
    ratio: Option<&StockRatio>,
) -> ImpactComparison {
    let pick = |side: Side| -> Vec<f64> {
        rows.iter().filter(|t| t.trend == Some(trend) && t.side == side).map(|t| t.pi).collect()
    };
    let (p, s) = (pick(Side::Buy), pick(Side::Sell));
    ImpactComparison {
        stock_code,
        r: ratio.map(|r| r.r),
        group: ratio.map(|r| r.group),
        trend,
        n_purchases: p.len(),
        n_sales: s.len(),
        mean_purchase: (!p.is_empty()).then(|| mean(&p)),
        mean_sale: (!s.is_empty()).then(|| mean(&s)),
        t: welch_t(&p, &s).ok(),
    }
}

/// Mean price impact of purchases and sales per trend, for all stocks together
/// and then per stock grouped by drawup ratio (rising, falling, middle).
/// Transactions without a trend label are left out.
pub fn impact_by_trend(records: &[TransactionRecord], ratios: &[StockRatio]) -> Vec<ImpactComparison> {
    let all: Vec<&TransactionRecord> = records.iter().collect();
    let trends = [TrendKind::Drawup, TrendKind::Drawdown];
    let mut out: Vec<ImpactComparison> = trends.iter().map(|&k| compare(&all, k, None, None)).collect();
    let mut stocks: Vec<&str> = records.iter().map(|t| t.stock.as_str()).collect();
    stocks.sort_unstable();
    stocks.dedup();
    for group in [RatioGroup::Rising, RatioGroup::Falling, RatioGroup::Middle] {
        for stock in &stocks {
            let ratio = ratios.iter().find(|r| r.stock_code == *stock);
            if ratio.map(|r| r.group) != Some(group) {
                continue;
            }
            let rows: Vec<&TransactionRecord> = all.iter().copied().filter(|t| t.stock == *stock).collect();
            out.extend(trends.iter().map(|&k| compare(&rows, k, Some(stock.to_string()), ratio)));
        }
    }
    out
}

pub fn write_impact_by_trend<W: Write>(out: W, rows: &[ImpactComparison]) -> Result<(), csv::Error> {
    let mut w = csv_writer(out);
    w.write_record([
        "stock_code",
        "r",
        "group",
        "trend",
        "mean_PI_purchase",
        "mean_PI_sale",
        "n_purchase",
        "n_sale",
        "t_stat",
        "signif",
    ])?;
    for r in rows {
        w.write_record([
            r.stock_code.clone().unwrap_or_else(|| "total".into()),
            opt_g(r.r),
            r.group.map(|g| g.label().to_string()).unwrap_or_default(),
            r.trend.name().to_string(),
            opt_g(r.mean_purchase),
            opt_g(r.mean_sale),
            r.n_purchases.to_string(),
            r.n_sales.to_string(),
            opt_g(r.t.map(|t| t.t)),
            stars(r.t.as_ref()),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// PI shown in units of 1e-3, as in the published tables.
pub fn render_impact_by_trend(rows: &[ImpactComparison]) -> String {
    let mut t = TextTable::new(
        "Mean price impact (x1e-3) of purchases and sales by trend",
        &["stock", "r", "trend", "purchase", "sale", "t"],
    );
    for r in rows {
        let scaled = |x: Option<f64>| x.map(|v| format!("{:.2}", v * 1e3)).unwrap_or_default();
        t.push(vec![
            r.stock_code.clone().unwrap_or_else(|| "total".into()),
            r.r.map(|v| format!("{v:.2}")).unwrap_or_default(),
            r.trend.name().into(),
            scaled(r.mean_purchase),
            scaled(r.mean_sale),
            r.t.map(|x| format!("{:.2}{}", x.t, x.signif.stars())).unwrap_or_default(),
        ]);
    }
    t.render()
}

pub fn write_event_study<W: Write>(out: W, tables: &[EventStudyTable]) -> Result<(), csv::Error> {
    let mut w = csv_writer(out);
    w.write_record(["subset", "bin", "side", "mean_R", "mean_C", "count", "t_stat", "signif"])?;
    for table in tables {
        for bin in &table.bins {
            for (side, s) in [("purchase", &bin.purchases), ("sale", &bin.sales)] {
                w.write_record([
                    table.subset.name().to_string(),
                    bin.label.clone(),
                    side.to_string(),
                    opt_g(s.mean_r),
                    opt_g(s.mean_c),
                    s.count.to_string(),
                    opt_g(bin.t.map(|t| t.t)),
                    stars(bin.t.as_ref()),
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Per-side ANOVA of C across bins, one row per subset and side.
pub fn write_event_anova<W: Write>(out: W, tables: &[EventStudyTable]) -> Result<(), csv::Error> {
    let mut w = csv_writer(out);
    w.write_record(["subset", "side", "n_events", "F", "df_between", "df_within", "signif", "truncated"])?;
    for table in tables {
        for (side, n, anova) in [
            ("purchase", table.n_purchases, &table.anova_purchases),
            ("sale", table.n_sales, &table.anova_sales),
        ] {
            w.write_record([
                table.subset.name().to_string(),
                side.to_string(),
                n.to_string(),
                opt_g(anova.as_ref().map(|a| a.f)),
                anova.as_ref().map(|a| a.df_between.to_string()).unwrap_or_default(),
                anova.as_ref().map(|a| a.df_within.to_string()).unwrap_or_default(),
                anova.as_ref().map(|a| a.signif.stars().to_string()).unwrap_or_default(),
                table.truncated.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Returns in units of 1e-4 and C in CNY x shares, side by side per bin.
pub fn render_event_study(tables: &[EventStudyTable]) -> String {
    let mut out = String::new();
    for table in tables {
        let mut t = TextTable::new(
            format!(
                "Event study, {} ({} purchases, {} sales)",
                table.subset.name(),
                table.n_purchases,
                table.n_sales
            ),
            &["bin", "R buy", "R sell", "t", "C buy", "C sell"],
        );
        let r = |x: Option<f64>| x.map(|v| format!("{:.2}", v * 1e4)).unwrap_or_default();
        for bin in &table.bins {
            t.push(vec![
                bin.label.clone(),
                r(bin.purchases.mean_r),
                r(bin.sales.mean_r),
                bin.t.map(|x| format!("{:.2}{}", x.t, x.signif.stars())).unwrap_or_default(),
                opt_g(bin.purchases.mean_c),
                opt_g(bin.sales.mean_c),
            ]);
        }
        let f = |a: &Option<crate::stats::AnovaResult>| {
            a.as_ref().map(|a| format!("{}{}", fmt_g(a.f), a.signif.stars())).unwrap_or_default()
        };
        t.push(vec!["F".into(), String::new(), String::new(), String::new(), f(&table.anova_purchases), f(&table.anova_sales)]);
        out.push_str(&t.render());
        out.push('\n');
    }
    out
}

/// A fitted model with the name of the transaction subset it was fitted on.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubsetRegression {
    pub subset: String,
    pub result: RegressionResult,
}

pub fn write_regression<W: Write>(out: W, fits: &[SubsetRegression]) -> Result<(), csv::Error> {
    let mut w = csv_writer(out);
    w.write_record(["subset", "model", "coef", "value", "t_stat", "signif", "r_square", "n"])?;
    for fit in fits {
        for c in &fit.result.coefficients {
            w.write_record([
                fit.subset.clone(),
                fit.result.model.name().to_string(),
                c.name.to_string(),
                fmt_g(c.value),
                fmt_g(c.t_stat),
                c.signif.stars().to_string(),
                fmt_g(fit.result.r_square),
                fit.result.n_rows.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn render_regression(fits: &[SubsetRegression]) -> String {
    let mut out = String::new();
    let mut subsets: Vec<&str> = fits.iter().map(|f| f.subset.as_str()).collect();
    subsets.dedup();
    for subset in subsets {
        let models: Vec<&SubsetRegression> = fits.iter().filter(|f| f.subset == subset).collect();
        let mut headers = vec!["coef".to_string()];
        for m in &models {
            headers.push(m.result.model.name().to_string());
            headers.push("t".to_string());
        }
        let header_refs: Vec<&str> = headers.iter().map(String::as_str).collect();
        let mut t = TextTable::new(format!("Impact regression, {subset} transactions"), &header_refs);
        for name in ["alpha", "beta1", "beta2", "beta3", "beta4"] {
            let mut row = vec![name.to_string()];
            for m in &models {
                match m.result.coefficient(name) {
                    Some(c) => {
                        row.push(format!("{:.3}{}", c.value, c.signif.stars()));
                        row.push(format!("{:.1}", c.t_stat));
                    }
                    None => row.extend([String::new(), String::new()]),
                }
            }
            t.push(row);
        }
        let mut r2 = vec!["R-square".to_string()];
        let mut n = vec!["n".to_string()];
        for m in &models {
            r2.extend([format!("{:.3}", m.result.r_square), String::new()]);
            n.extend([m.result.n_rows.to_string(), String::new()]);
        }
        t.push(r2);
        t.push(n);
        out.push_str(&t.render());
        out.push('\n');
    }
    out
}
