//! Daily close series: corporate-action adjustment and drawup/drawdown
//! segmentation.
//!
//! Segments are measured in log price. A running trend absorbs a counter-move
//! unless that counter-move is at least `theta` times the trend's magnitude and
//! at least `kappa` times the trend's mean daily move; only then does the trend
//! end at its extremum and the opposite trend begin there.
//!
//! Day accounting: a series of `n` closes has `n - 1` daily changes, and each
//! change belongs to exactly one segment. Consecutive segments share their
//! boundary close.

use std::collections::BTreeMap;
use std::fmt;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{CorporateAction, CorporateActionKind};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SeriesError {
    #[error("adjustment factor {factor} on {ex_date} is not positive")]
    NonPositiveFactor { ex_date: NaiveDate, factor: f64 },
    #[error("close on {0} is not positive")]
    NonPositiveClose(NaiveDate),
    #[error("closes are not strictly date-ordered at {0}")]
    Unordered(NaiveDate),
    #[error("need at least two closes, got {0}")]
    TooShort(usize),
    #[error("constant series; single degenerate segment")]
    Degenerate(TrendSegment),
    #[error("no segments")]
    Empty,
    #[error("invalid trend parameters theta={theta} kappa={kappa}")]
    Params { theta: f64, kappa: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DailyClose {
    pub date: NaiveDate,
    pub raw_close: f64,
    pub adjusted_close: f64,
}

impl DailyClose {
    pub fn new(date: NaiveDate, close: f64) -> Self {
        DailyClose { date, raw_close: close, adjusted_close: close }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TrendKind {
    Drawup,
    Drawdown,
}

impl TrendKind {
    pub fn opposite(self) -> TrendKind {
        match self {
            TrendKind::Drawup => TrendKind::Drawdown,
            TrendKind::Drawdown => TrendKind::Drawup,
        }
    }

    fn sign(self) -> f64 {
        match self {
            TrendKind::Drawup => 1.0,
            TrendKind::Drawdown => -1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            TrendKind::Drawup => "drawup",
            TrendKind::Drawdown => "drawdown",
        }
    }
}

impl fmt::Display for TrendKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendSegment {
    pub kind: TrendKind,
    pub start_date: NaiveDate,
    pub end_date: NaiveDate,
    /// Index of the first and last close covered (inclusive).
    pub start_index: usize,
    pub end_index: usize,
    pub n_days: usize,
    /// Extremum-to-extremum log change; positive for drawups.
    pub magnitude: f64,
    pub daily_mean: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrendParams {
    pub theta: f64,
    pub kappa: f64,
}

impl Default for TrendParams {
    fn default() -> Self {
        TrendParams { theta: 0.30, kappa: 3.0 }
    }
}

impl TrendParams {
    pub fn validate(&self) -> Result<(), SeriesError> {
        if self.theta > 0.0 && self.theta < 1.0 && self.kappa > 0.0 && self.kappa.is_finite() {
            Ok(())
        } else {
            Err(SeriesError::Params { theta: self.theta, kappa: self.kappa })
        }
    }
}

/// Backward-adjust closes for dividends, bonus shares and rights issues.
///
/// Actions of other stocks are skipped with a warning, as are ex-dates with no
/// earlier close or past the last close. Actions sharing an ex-date combine
/// into one theoretical ex-price.
pub fn adjust_prices(
    stock_code: &str,
    closes: &[DailyClose],
    actions: &[CorporateAction],
) -> Result<Vec<DailyClose>, SeriesError> {
    for w in closes.windows(2) {
        if w[1].date <= w[0].date {
            return Err(SeriesError::Unordered(w[1].date));
        }
    }
    if let Some(bad) = closes.iter().find(|c| !(c.raw_close > 0.0)) {
        return Err(SeriesError::NonPositiveClose(bad.date));
    }

    // ex_date -> (dividend, bonus ratio, rights ratio, rights ratio * price)
    let mut by_date: BTreeMap<NaiveDate, (f64, f64, f64, f64)> = BTreeMap::new();
    for a in actions {
        if a.stock_code != stock_code {
            log::warn!("ignoring corporate action for stock {} while adjusting {stock_code}", a.stock_code);
            continue;
        }
        let e = by_date.entry(a.ex_date).or_default();
        match a.kind {
            CorporateActionKind::CashDividend { cash_per_share } => e.0 += cash_per_share,
            CorporateActionKind::BonusShare { ratio } => e.1 += ratio,
            CorporateActionKind::RightsIssue { ratio, price } => {
                e.2 += ratio;
                e.3 += ratio * price;
            }
        }
    }

    let mut factors = vec![1.0f64; closes.len()];
    for (ex_date, (dividend, bonus, rights, rights_cost)) in by_date {
        let cum = closes.iter().rposition(|c| c.date < ex_date);
        let after = closes.iter().any(|c| c.date >= ex_date);
        let Some(cum) = cum.filter(|_| after) else {
            log::warn!("ex-date {ex_date} of {stock_code} outside the close range; skipped");
            continue;
        };
        let p = closes[cum].raw_close;
        let ex_price = (p - dividend + rights_cost) / (1.0 + bonus + rights);
        let factor = ex_price / p;
        if !(factor > 0.0) {
            return Err(SeriesError::NonPositiveFactor { ex_date, factor });
        }
        for f in &mut factors[..=cum] {
            *f *= factor;
        }
    }

    Ok(closes
        .iter()
        .zip(factors)
        .map(|(c, f)| DailyClose { date: c.date, raw_close: c.raw_close, adjusted_close: c.raw_close * f })
        .collect())
}

fn make_segment(
    kind: TrendKind,
    closes: &[DailyClose],
    log_px: &[f64],
    start: usize,
    extremum: usize,
    end: usize,
) -> TrendSegment {
    let magnitude = log_px[extremum] - log_px[start];
    let n_days = end - start;
    TrendSegment {
        kind,
        start_date: closes[start].date,
        end_date: closes[end].date,
        start_index: start,
        end_index: end,
        n_days,
        magnitude,
        daily_mean: if n_days > 0 { magnitude.abs() / n_days as f64 } else { 0.0 },
    }
}

/// Segment adjusted closes into alternating drawups and drawdowns.
pub fn segment_trends(closes: &[DailyClose], params: TrendParams) -> Result<Vec<TrendSegment>, SeriesError> {
    params.validate()?;
    if closes.len() < 2 {
        return Err(SeriesError::TooShort(closes.len()));
    }
    if let Some(bad) = closes.iter().find(|c| !(c.adjusted_close > 0.0)) {
        return Err(SeriesError::NonPositiveClose(bad.date));
    }
    let x: Vec<f64> = closes.iter().map(|c| c.adjusted_close.ln()).collect();
    let last = x.len() - 1;

    let Some(first_move) = (1..x.len()).find(|&i| x[i] != x[i - 1]) else {
        let mut seg = make_segment(TrendKind::Drawup, closes, &x, 0, 0, last);
        seg.magnitude = 0.0;
        return Err(SeriesError::Degenerate(seg));
    };
    let mut kind = if x[first_move] > x[first_move - 1] { TrendKind::Drawup } else { TrendKind::Drawdown };

    let mut segments = Vec::new();
    let mut start = 0usize;
    let mut extremum = 0usize;
    for i in 1..x.len() {
        let s = kind.sign();
        if s * (x[i] - x[extremum]) >= 0.0 {
            extremum = i;
            continue;
        }
        let magnitude = (x[extremum] - x[start]).abs();
        let trend_days = (extremum - start) as f64;
        let counter = (x[extremum] - x[i]).abs();
        let daily_mean = if trend_days > 0.0 { magnitude / trend_days } else { 0.0 };
        if counter >= params.theta * magnitude && counter >= params.kappa * daily_mean {
            segments.push(make_segment(kind, closes, &x, start, extremum, extremum));
            start = extremum;
            extremum = i;
            kind = kind.opposite();
        }
    }
    segments.push(make_segment(kind, closes, &x, start, extremum, last));
    Ok(segments)
}

/// Index of the segment that owns the change into close `index`; index 0
/// belongs to the first segment.
pub fn segment_index_for(segments: &[TrendSegment], index: usize) -> Option<usize> {
    if index == 0 {
        return if segments.is_empty() { None } else { Some(0) };
    }
    segments.iter().position(|s| s.start_index < index && index <= s.end_index)
}

/// Trend in force on `date`, given the close dates the segments were built on.
pub fn trend_on(segments: &[TrendSegment], dates: &[NaiveDate], date: NaiveDate) -> Option<TrendKind> {
    let index = dates.binary_search(&date).ok()?;
    segment_index_for(segments, index).map(|i| segments[i].kind)
}

/// Fraction of daily changes that fall inside drawup segments.
pub fn drawup_ratio(segments: &[TrendSegment]) -> Result<f64, SeriesError> {
    let total: usize = segments.iter().map(|s| s.n_days).sum();
    if total == 0 {
        return Err(SeriesError::Empty);
    }
    let up: usize = segments.iter().filter(|s| s.kind == TrendKind::Drawup).map(|s| s.n_days).sum();
    Ok(up as f64 / total as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RatioGroup {
    /// r >= high threshold
    Rising,
    Middle,
    /// r <= low threshold
    Falling,
}

impl RatioGroup {
    pub fn label(self) -> &'static str {
        match self {
            RatioGroup::Rising => "r>=0.55",
            RatioGroup::Middle => "0.45<r<0.55",
            RatioGroup::Falling => "r<=0.45",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatioThresholds {
    pub high: f64,
    pub low: f64,
}

impl Default for RatioThresholds {
    fn default() -> Self {
        RatioThresholds { high: 0.55, low: 0.45 }
    }
}

impl RatioThresholds {
    pub fn classify(&self, r: f64) -> RatioGroup {
        if r >= self.high {
            RatioGroup::Rising
        } else if r <= self.low {
            RatioGroup::Falling
        } else {
            RatioGroup::Middle
        }
    }
}
