//! Orchestration of the command-line stages. Each `run_*` function reads its
//! inputs, runs one stage and writes its reports into an output directory
//! together with a `manifest.json`.
//!
//! Per-stock work runs on the current rayon pool; results are collected in
//! stock-code order so outputs do not depend on scheduling.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::impact::{event_study, split_by_volume, Binning, EventAnchor, EventStudyTable, StockTape, Subset, VolumeKey};
use crate::ingest::{
    in_session, parse_corporate_actions, CLOSE_HEADER, parse_daily_closes, parse_order_events, parse_stock_summaries,
    split_by_stock, validate_stream, write_order_events, write_stock_summaries, CorporateAction, IngestError,
    OrderEvent, StockSummary,
};
use crate::regression::{fit_impact_model, ImpactModel, ImpactRow, Scales};
use crate::replay::{replay_stock_day, ReplayConfig, StockDayReplay};
use crate::report::{
    impact_by_trend, render_event_study, render_impact_by_trend, render_regression, render_segments,
    write_event_anova, write_event_study, write_impact_by_trend, write_ratios, write_regression, write_segments,
    write_trend_plot, StockRatio, SubsetRegression,
};
use crate::series::{adjust_prices, drawup_ratio, segment_trends, trend_on, DailyClose, RatioThresholds, SeriesError, TrendParams, TrendSegment};
use crate::stats::StatsError;
use crate::synth::{gen_market, gen_price_series, FlowConfig, SegmentSpec, SynthError};
use crate::tables::{read_fill_c, read_tape, read_transactions, write_fill_c, write_tape, write_transactions, TransactionRecord};
use crate::types::{Sessions, DEFAULT_TICK_CNY};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("invalid data: {0}")]
    Validation(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl PipelineError {
    /// Process exit code: 1 usage, 2 data validation, 3 numerical degeneracy.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Usage(_) => 1,
            PipelineError::Validation(_) | PipelineError::Io { .. } => 2,
            PipelineError::Numerical(_) => 3,
        }
    }
}

impl From<SynthError> for PipelineError {
    fn from(e: SynthError) -> Self {
        PipelineError::Usage(e.to_string())
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io { path: path.to_path_buf(), source }
}

fn open(path: &Path) -> Result<File, PipelineError> {
    File::open(path).map_err(io_err(path))
}

fn ingest_err(path: &Path) -> impl FnOnce(IngestError) -> PipelineError + '_ {
    move |e| PipelineError::Validation(format!("{}: {e}", path.display()))
}

/// Create `dir/name` (and parent directories) and hand a buffered writer to `body`.
fn write_file<E: std::fmt::Display>(
    dir: &Path,
    name: &str,
    body: impl FnOnce(&mut BufWriter<File>) -> Result<(), E>,
) -> Result<(), PipelineError> {
    let path = dir.join(name);
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    let mut w = BufWriter::new(File::create(&path).map_err(io_err(&path))?);
    body(&mut w).map_err(|e| PipelineError::Io { path: path.clone(), source: std::io::Error::other(e.to_string()) })?;
    w.flush().map_err(io_err(&path))
}

fn write_text(dir: &Path, name: &str, hash: &str, text: &str) -> Result<(), PipelineError> {
    write_file(dir, name, |w| write!(w, "manifest {hash}\n\n{text}"))
}

/// Parameters shared by the analysis stages.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalysisParams {
    pub theta: f64,
    pub kappa: f64,
    pub window_ms: i64,
    pub bin_ms: i64,
    pub ratio_high: f64,
    pub ratio_low: f64,
    pub prior_window_ms: i64,
    pub tick_cny: f64,
}

impl Default for AnalysisParams {
    fn default() -> Self {
        let trend = TrendParams::default();
        let binning = Binning::default();
        let ratio = RatioThresholds::default();
        AnalysisParams {
            theta: trend.theta,
            kappa: trend.kappa,
            window_ms: binning.window_ms,
            bin_ms: binning.bin_ms,
            ratio_high: ratio.high,
            ratio_low: ratio.low,
            prior_window_ms: ReplayConfig::default().prior_window_ms,
            tick_cny: DEFAULT_TICK_CNY,
        }
    }
}

impl AnalysisParams {
    pub fn trend(&self) -> Result<TrendParams, PipelineError> {
        let p = TrendParams { theta: self.theta, kappa: self.kappa };
        p.validate().map_err(|e| PipelineError::Usage(e.to_string()))?;
        Ok(p)
    }

    pub fn binning(&self) -> Result<Binning, PipelineError> {
        Binning::new(self.window_ms, self.bin_ms).map_err(|e| PipelineError::Usage(e.to_string()))
    }

    pub fn thresholds(&self) -> Result<RatioThresholds, PipelineError> {
        if !(0.0..=1.0).contains(&self.ratio_low) || !(self.ratio_low < self.ratio_high && self.ratio_high <= 1.0) {
            return Err(PipelineError::Usage(format!(
                "ratio thresholds must satisfy 0 <= low < high <= 1, got {} and {}",
                self.ratio_low, self.ratio_high
            )));
        }
        Ok(RatioThresholds { high: self.ratio_high, low: self.ratio_low })
    }

    pub fn replay(&self) -> Result<ReplayConfig, PipelineError> {
        if !(self.tick_cny > 0.0) || self.prior_window_ms <= 0 {
            return Err(PipelineError::Usage("tick_cny and prior_window_ms must be positive".into()));
        }
        Ok(ReplayConfig { tick_cny: self.tick_cny, prior_window_ms: self.prior_window_ms })
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        self.trend()?;
        self.binning()?;
        self.thresholds()?;
        self.replay()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StockStatus {
    pub stock_code: String,
    pub status: String,
}

/// Record of one run. `config_hash` covers the command, parameters and input
/// digests, but not the output directory, so equal runs into different
/// directories share it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub inputs: Vec<InputDigest>,
    pub params: serde_json::Value,
    pub output_dir: String,
    pub per_stock: Vec<StockStatus>,
    pub config_hash: String,
}

impl RunManifest {
    pub fn new(command: &str, inputs: Vec<InputDigest>, params: serde_json::Value, out: &Path) -> Self {
        let mut hasher = Sha256::new();
        let key = serde_json::json!({ "command": command, "params": params, "inputs": inputs });
        hasher.update(key.to_string().as_bytes());
        RunManifest {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            inputs,
            params,
            output_dir: out.display().to_string(),
            per_stock: Vec::new(),
            config_hash: hex::encode(hasher.finalize()),
        }
    }

    pub fn write(&self, out: &Path) -> Result<(), PipelineError> {
        write_file(out, "manifest.json", |w| {
            serde_json::to_writer_pretty(&mut *w, self).map_err(|e| e.to_string())?;
            writeln!(w).map_err(|e| e.to_string())
        })
    }
}

/// SHA-256 of a file, for the manifest.
pub fn digest(path: &Path) -> Result<InputDigest, PipelineError> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    Ok(InputDigest { path: path.display().to_string(), sha256: hex::encode(Sha256::digest(&bytes)) })
}

fn digest_bytes(label: &str, bytes: &[u8]) -> InputDigest {
    InputDigest { path: label.to_string(), sha256: hex::encode(Sha256::digest(bytes)) }
}

fn to_json<T: Serialize>(value: &T) -> serde_json::Value {
    serde_json::to_value(value).expect("parameters serialize")
}

/// Outcome of loading an order file.
#[derive(Debug, Clone, Default)]
pub struct LoadedOrders {
    /// In-session events of accepted rows, ordered.
    pub events: Vec<OrderEvent>,
    pub n_rows: usize,
    pub diagnostics: Vec<String>,
    pub out_of_session: usize,
}

/// Parse and validate an order-event file. Rejected rows and hard validation
/// findings fail unless `lenient`, in which case rejected rows are dropped
/// (hard findings still fail). Out-of-session events are dropped with a count.
pub fn load_orders(path: &Path, lenient: bool) -> Result<LoadedOrders, PipelineError> {
    let parsed = parse_order_events(open(path)?).map_err(ingest_err(path))?;
    let sessions = Sessions::default();
    let mut diagnostics: Vec<String> =
        parsed.rejected.iter().map(|r| format!("{}:{}: {}", path.display(), r.line, r.reason)).collect();
    let report = validate_stream(&parsed.events, &sessions);
    diagnostics.extend(report.findings.iter().filter(|f| f.is_hard()).map(|f| format!("{}: {f:?}", path.display())));
    if report.hard_count() > 0 || (!parsed.rejected.is_empty() && !lenient) {
        let shown: Vec<&str> = diagnostics.iter().take(20).map(String::as_str).collect();
        return Err(PipelineError::Validation(format!(
            "{} problem(s) in {}\n{}",
            diagnostics.len(),
            path.display(),
            shown.join("\n")
        )));
    }
    let n_rows = parsed.events.len() + parsed.rejected.len();
    let total = parsed.events.len();
    let events = in_session(parsed.events, &sessions);
    Ok(LoadedOrders { out_of_session: total - events.len(), events, n_rows, diagnostics })
}

/// `ingest`: validate an order file and write per-stock counts.
pub fn run_ingest(orders: &Path, out: &Path, lenient: bool) -> Result<RunManifest, PipelineError> {
    let loaded = load_orders(orders, lenient)?;
    let mut manifest = RunManifest::new("ingest", vec![digest(orders)?], serde_json::json!({ "lenient": lenient }), out);
    let per_stock = split_by_stock(loaded.events.clone());
    write_file(out, "ingest_summary.csv", |w| -> std::io::Result<()> {
        writeln!(w, "stock_code,events,submits,cancels,institutional_submits")?;
        for (stock, events) in &per_stock {
            let submits = events.iter().filter(|e| e.is_submit()).count();
            let inst = events
                .iter()
                .filter(|e| e.is_submit() && e.trader_type == crate::types::TraderType::Institution)
                .count();
            writeln!(w, "{stock},{},{submits},{},{inst}", events.len(), events.len() - submits)?;
        }
        Ok(())
    })?;
    write_file(out, "rejections.txt", |w| -> std::io::Result<()> {
        for d in &loaded.diagnostics {
            writeln!(w, "{d}")?;
        }
        Ok(())
    })?;
    manifest.per_stock =
        per_stock.iter().map(|(s, e)| StockStatus { stock_code: s.clone(), status: format!("{} events", e.len()) }).collect();
    log::info!(
        "{} rows, {} accepted in session, {} out of session, {} rejected",
        loaded.n_rows,
        loaded.events.len(),
        loaded.out_of_session,
        loaded.diagnostics.len()
    );
    manifest.write(out)?;
    Ok(manifest)
}

/// Adjusted closes, segments and ratio of one stock.
#[derive(Debug, Clone)]
pub struct StockTrend {
    pub stock_code: String,
    pub closes: Vec<DailyClose>,
    pub segments: Vec<TrendSegment>,
    pub ratio: StockRatio,
}

/// Adjust and segment each stock's closes. Stocks whose series cannot be
/// segmented are reported in the returned status list and skipped.
pub fn segment_all(
    closes: &[(String, Vec<DailyClose>)],
    actions: &[CorporateAction],
    params: &AnalysisParams,
) -> Result<(Vec<StockTrend>, Vec<StockStatus>), PipelineError> {
    let trend = params.trend()?;
    let thresholds = params.thresholds()?;
    let results: Vec<Result<StockTrend, (String, SeriesError)>> = closes
        .par_iter()
        .map(|(stock, series)| {
            let own: Vec<CorporateAction> = actions.iter().filter(|a| a.stock_code == *stock).cloned().collect();
            let fail = |e| (stock.clone(), e);
            let adjusted = adjust_prices(stock, series, &own).map_err(fail)?;
            let segments = segment_trends(&adjusted, trend).map_err(fail)?;
            let r = drawup_ratio(&segments).map_err(fail)?;
            Ok(StockTrend {
                stock_code: stock.clone(),
                closes: adjusted,
                segments,
                ratio: StockRatio { stock_code: stock.clone(), r, group: thresholds.classify(r) },
            })
        })
        .collect();
    let mut trends = Vec::new();
    let mut status = Vec::new();
    for r in results {
        match r {
            Ok(t) => {
                status.push(StockStatus { stock_code: t.stock_code.clone(), status: "ok".into() });
                trends.push(t);
            }
            Err((stock, e @ (SeriesError::Degenerate(_) | SeriesError::TooShort(_)))) => {
                log::warn!("{stock}: {e}; skipped");
                status.push(StockStatus { stock_code: stock, status: e.to_string() });
            }
            Err((stock, e)) => return Err(PipelineError::Validation(format!("{stock}: {e}"))),
        }
    }
    Ok((trends, status))
}

fn write_segment_reports(out: &Path, trends: &[StockTrend], hash: &str) -> Result<(), PipelineError> {
    let segs: Vec<(String, Vec<TrendSegment>)> =
        trends.iter().map(|t| (t.stock_code.clone(), t.segments.clone())).collect();
    let ratios: Vec<StockRatio> = trends.iter().map(|t| t.ratio.clone()).collect();
    let plot: Vec<(String, Vec<DailyClose>, Vec<TrendSegment>)> =
        trends.iter().map(|t| (t.stock_code.clone(), t.closes.clone(), t.segments.clone())).collect();
    write_file(out, "segments.csv", |w| write_segments(w, &segs))?;
    write_file(out, "ratios.csv", |w| write_ratios(w, &ratios))?;
    write_file(out, "plot_trends.csv", |w| write_trend_plot(w, &plot))?;
    write_text(out, "segments.txt", hash, &render_segments(&segs, &ratios))
}

fn load_closes(path: &Path) -> Result<Vec<(String, Vec<DailyClose>)>, PipelineError> {
    parse_daily_closes(open(path)?).map_err(ingest_err(path))
}

fn load_actions(path: Option<&Path>) -> Result<Vec<CorporateAction>, PipelineError> {
    match path {
        Some(p) => parse_corporate_actions(open(p)?).map_err(ingest_err(p)),
        None => Ok(Vec::new()),
    }
}

/// `segment`: adjust closes, segment them and write segments, ratios and plot data.
pub fn run_segment(
    closes: &Path,
    actions: Option<&Path>,
    params: &AnalysisParams,
    out: &Path,
) -> Result<RunManifest, PipelineError> {
    params.validate()?;
    let series = load_closes(closes)?;
    let acts = load_actions(actions)?;
    let mut inputs = vec![digest(closes)?];
    if let Some(a) = actions {
        inputs.push(digest(a)?);
    }
    let mut manifest = RunManifest::new("segment", inputs, to_json(params), out);
    let (trends, status) = segment_all(&series, &acts, params)?;
    write_segment_reports(out, &trends, &manifest.config_hash)?;
    manifest.per_stock = status;
    manifest.write(out)?;
    Ok(manifest)
}

/// Replay each stock's events in parallel, labelling transactions with the
/// trend in force on `date` when trends are given.
pub fn replay_all(
    events: Vec<OrderEvent>,
    params: &AnalysisParams,
    date: Option<NaiveDate>,
    trends: &[StockTrend],
) -> Result<Vec<StockDayReplay>, PipelineError> {
    let config = params.replay()?;
    let by_stock = split_by_stock(events);
    let trend_index: BTreeMap<&str, &StockTrend> = trends.iter().map(|t| (t.stock_code.as_str(), t)).collect();
    Ok(by_stock
        .par_iter()
        .map(|(stock, evs)| {
            let mut replay = replay_stock_day(stock, evs, None, &config);
            if let (Some(date), Some(t)) = (date, trend_index.get(stock.as_str())) {
                let dates: Vec<NaiveDate> = t.closes.iter().map(|c| c.date).collect();
                let kind = trend_on(&t.segments, &dates, date);
                for tx in &mut replay.transactions {
                    tx.trend = kind;
                }
            }
            replay
        })
        .collect())
}

fn replay_status(r: &StockDayReplay) -> StockStatus {
    StockStatus {
        stock_code: r.tape.stock_code.clone(),
        status: format!(
            "{} trades, {} transactions, {} rejected events, conservation {}",
            r.tape.trades.len(),
            r.transactions.len(),
            r.rejected.len(),
            if r.conservation.holds() { "ok" } else { "VIOLATED" }
        ),
    }
}

fn write_replay_outputs(out: &Path, replays: &[StockDayReplay]) -> Result<(), PipelineError> {
    for r in replays {
        let stock = &r.tape.stock_code;
        write_file(out, &format!("tape/{stock}.csv"), |w| write_tape(w, &r.tape.trades))?;
        write_file(out, &format!("tape/{stock}.fill_c.csv"), |w| write_fill_c(w, &r.tape.fill_c))?;
        write_file(out, &format!("snapshot/{stock}.json"), |w| {
            serde_json::to_writer_pretty(&mut *w, &r.book.depth_snapshot(10)).map_err(|e| e.to_string())?;
            writeln!(w).map_err(|e| e.to_string())
        })?;
    }
    let records: Vec<TransactionRecord> =
        replays.iter().flat_map(|r| r.transactions.iter().map(TransactionRecord::from)).collect();
    write_file(out, "transactions.csv", |w| write_transactions(w, &records))?;
    write_file(out, "replay_summary.csv", |w| -> std::io::Result<()> {
        writeln!(
            w,
            "stock_code,trades,transactions,rejected_events,no_reference,no_c,no_prior_vol,submitted,executed,canceled,resting,conserved"
        )?;
        for r in replays {
            let c = &r.conservation;
            let x = &r.exclusions;
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{},{},{},{}",
                r.tape.stock_code,
                r.tape.trades.len(),
                r.transactions.len(),
                r.rejected.len(),
                x.no_reference,
                x.no_c,
                x.no_prior_vol,
                c.submitted,
                c.executed_buy,
                c.canceled,
                c.resting,
                u8::from(c.holds())
            )?;
        }
        Ok(())
    })
}

/// `replay`: rebuild books and write tapes, fill structure values, snapshots
/// and the transaction table. Trends are attached when closes and a date are
/// given.
pub fn run_replay(
    orders: &Path,
    closes: Option<&Path>,
    actions: Option<&Path>,
    date: Option<NaiveDate>,
    params: &AnalysisParams,
    lenient: bool,
    out: &Path,
) -> Result<RunManifest, PipelineError> {
    params.validate()?;
    if closes.is_some() != date.is_some() {
        return Err(PipelineError::Usage("--closes and --date go together".into()));
    }
    let loaded = load_orders(orders, lenient)?;
    let mut inputs = vec![digest(orders)?];
    let trends = match closes {
        Some(c) => {
            inputs.push(digest(c)?);
            if let Some(a) = actions {
                inputs.push(digest(a)?);
            }
            segment_all(&load_closes(c)?, &load_actions(actions)?, params)?.0
        }
        None => Vec::new(),
    };
    let mut manifest = RunManifest::new(
        "replay",
        inputs,
        serde_json::json!({ "params": params, "date": date, "lenient": lenient }),
        out,
    );
    let replays = replay_all(loaded.events, params, date, &trends)?;
    write_replay_outputs(out, &replays)?;
    manifest.per_stock = replays.iter().map(replay_status).collect();
    manifest.write(out)?;
    Ok(manifest)
}

/// Read the per-stock tapes listed by the stocks of `records` from `tape_dir`.
pub fn load_tapes(tape_dir: &Path, records: &[TransactionRecord]) -> Result<Vec<StockTape>, PipelineError> {
    let mut stocks: Vec<&str> = records.iter().map(|r| r.stock.as_str()).collect();
    stocks.sort_unstable();
    stocks.dedup();
    stocks
        .into_iter()
        .map(|stock| {
            let tape_path = tape_dir.join(format!("{stock}.csv"));
            let c_path = tape_dir.join(format!("{stock}.fill_c.csv"));
            let trades = read_tape(open(&tape_path)?).map_err(ingest_err(&tape_path))?;
            let fill_c = read_fill_c(open(&c_path)?).map_err(ingest_err(&c_path))?;
            if fill_c.len() != trades.len() {
                return Err(PipelineError::Validation(format!(
                    "{} has {} rows but the tape has {}",
                    c_path.display(),
                    fill_c.len(),
                    trades.len()
                )));
            }
            Ok(StockTape { stock_code: stock.to_string(), trades, fill_c })
        })
        .collect()
}

/// Event-study tables for the small-V, large-V and total subsets.
pub fn event_study_tables(
    tapes: &[StockTape],
    records: &[TransactionRecord],
    binning: &Binning,
) -> Result<Vec<EventStudyTable>, PipelineError> {
    let tape_of: BTreeMap<&str, usize> = tapes.iter().enumerate().map(|(i, t)| (t.stock_code.as_str(), i)).collect();
    let mut anchors = Vec::with_capacity(records.len());
    for r in records {
        let &tape = tape_of
            .get(r.stock.as_str())
            .ok_or_else(|| PipelineError::Validation(format!("no tape for stock {}", r.stock)))?;
        let trades = &tapes[tape].trades;
        let first = trades.iter().position(|t| t.aggressor_order_id == r.order_id);
        let Some(first) = first else {
            return Err(PipelineError::Validation(format!("order {} of {} has no trades on the tape", r.order_id, r.stock)));
        };
        let end = first + trades[first..].iter().take_while(|t| t.aggressor_order_id == r.order_id).count();
        anchors.push(EventAnchor { tape, components: first..end, side: r.side, anchor_ms: r.anchor_ms, c_before: r.c });
    }
    let keys: Vec<VolumeKey> = records
        .iter()
        .map(|r| VolumeKey { volume: r.volume, anchor_ms: r.anchor_ms, order_id: r.order_id, stock_code: r.stock.clone() })
        .collect();
    let (small, large) = split_by_volume(&keys);
    let sessions = Sessions::default();
    let pick = |idx: &[usize]| -> Vec<&EventAnchor> {
        let mut idx = idx.to_vec();
        idx.sort_unstable();
        idx.into_iter().map(|i| &anchors[i]).collect()
    };
    let all: Vec<&EventAnchor> = anchors.iter().collect();
    Ok(vec![
        event_study(tapes, &pick(&small), Subset::SmallV, binning, &sessions),
        event_study(tapes, &pick(&large), Subset::LargeV, binning, &sessions),
        event_study(tapes, &all, Subset::Total, binning, &sessions),
    ])
}

fn write_event_reports(out: &Path, tables: &[EventStudyTable], hash: &str) -> Result<(), PipelineError> {
    write_file(out, "event_study.csv", |w| write_event_study(w, tables))?;
    write_file(out, "event_anova.csv", |w| write_event_anova(w, tables))?;
    write_text(out, "event_study.txt", hash, &render_event_study(tables))
}

fn load_records(path: &Path) -> Result<Vec<TransactionRecord>, PipelineError> {
    read_transactions(open(path)?).map_err(ingest_err(path))
}

/// `eventstudy`: bin returns and C around each transaction.
pub fn run_eventstudy(
    transactions: &Path,
    tape_dir: &Path,
    params: &AnalysisParams,
    out: &Path,
) -> Result<RunManifest, PipelineError> {
    let binning = params.binning()?;
    let records = load_records(transactions)?;
    let tapes = load_tapes(tape_dir, &records)?;
    let mut inputs = vec![digest(transactions)?];
    for t in &tapes {
        inputs.push(digest(&tape_dir.join(format!("{}.csv", t.stock_code)))?);
        inputs.push(digest(&tape_dir.join(format!("{}.fill_c.csv", t.stock_code)))?);
    }
    let manifest = RunManifest::new("eventstudy", inputs, serde_json::json!({ "binning": binning }), out);
    let tables = event_study_tables(&tapes, &records, &binning)?;
    write_event_reports(out, &tables, &manifest.config_hash)?;
    manifest.write(out)?;
    Ok(manifest)
}

fn load_ratios(path: &Path, params: &AnalysisParams) -> Result<Vec<StockRatio>, PipelineError> {
    let thresholds = params.thresholds()?;
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let mut lines = text.lines();
    if lines.next() != Some("stock_code,r,group") {
        return Err(PipelineError::Validation(format!("{}: unexpected header", path.display())));
    }
    lines
        .enumerate()
        .map(|(i, line)| {
            let (stock, rest) = line.split_once(',').unwrap_or((line, ""));
            let r_field = rest.split(',').next().unwrap_or("");
            let r: f64 = r_field
                .parse()
                .map_err(|_| PipelineError::Validation(format!("{}:{}: invalid r {r_field:?}", path.display(), i + 2)))?;
            Ok(StockRatio { stock_code: stock.to_string(), r, group: thresholds.classify(r) })
        })
        .collect()
}

/// `impact`: mean price impact of purchases and sales per trend and stock.
pub fn run_impact(
    transactions: &Path,
    ratios: &Path,
    params: &AnalysisParams,
    out: &Path,
) -> Result<RunManifest, PipelineError> {
    let records = load_records(transactions)?;
    let ratios_v = load_ratios(ratios, params)?;
    let manifest = RunManifest::new(
        "impact",
        vec![digest(transactions)?, digest(ratios)?],
        serde_json::json!({ "ratio_high": params.ratio_high, "ratio_low": params.ratio_low }),
        out,
    );
    write_impact_reports(out, &records, &ratios_v, &manifest.config_hash)?;
    manifest.write(out)?;
    Ok(manifest)
}

fn write_impact_reports(
    out: &Path,
    records: &[TransactionRecord],
    ratios: &[StockRatio],
    hash: &str,
) -> Result<(), PipelineError> {
    let table = impact_by_trend(records, ratios);
    write_file(out, "impact_by_trend.csv", |w| write_impact_by_trend(w, &table))?;
    write_text(out, "impact_by_trend.txt", hash, &render_impact_by_trend(&table))
}

fn numerical(context: &str) -> impl FnOnce(StatsError) -> PipelineError + '_ {
    move |e| PipelineError::Numerical(format!("{context}: {e}"))
}

/// Fit the impact regression on all complete transactions and on the
/// full-filled ones. Each subset is standardized by its own table-wide
/// standard deviations.
pub fn regression_tables(
    records: &[TransactionRecord],
    summaries: &[StockSummary],
    models: &[ImpactModel],
) -> Result<Vec<SubsetRegression>, PipelineError> {
    let caps: BTreeMap<&str, f64> = summaries.iter().map(|s| (s.stock_code.as_str(), s.float_cap_mcny)).collect();
    let mut all = Vec::new();
    let mut full = Vec::new();
    for r in records {
        let (Some(c), Some(prior_vol)) = (r.c, r.prior_vol) else { continue };
        let &float_cap = caps
            .get(r.stock.as_str())
            .ok_or_else(|| PipelineError::Validation(format!("no summary row for stock {}", r.stock)))?;
        let row = ImpactRow { float_cap, c, sell: r.side == crate::types::Side::Sell, prior_vol, pi: r.pi };
        all.push(row);
        if r.full_filled {
            full.push(row);
        }
    }
    let mut fits = Vec::new();
    for (subset, rows) in [("all", &all), ("full_filled", &full)] {
        let scales = Scales::of(rows).map_err(numerical(subset))?;
        for &model in models {
            let context = format!("{subset} {}", model.name());
            let result = fit_impact_model(rows, model, &scales).map_err(numerical(&context))?;
            fits.push(SubsetRegression { subset: subset.to_string(), result });
        }
    }
    Ok(fits)
}

fn write_regression_reports(out: &Path, fits: &[SubsetRegression], hash: &str) -> Result<(), PipelineError> {
    write_file(out, "regression.csv", |w| write_regression(w, fits))?;
    write_text(out, "regression.txt", hash, &render_regression(fits))
}

fn load_summaries(path: &Path) -> Result<Vec<StockSummary>, PipelineError> {
    parse_stock_summaries(open(path)?).map_err(ingest_err(path))
}

/// `regress`: fit the impact regression for the requested models.
pub fn run_regress(
    transactions: &Path,
    summaries: &Path,
    models: &[ImpactModel],
    out: &Path,
) -> Result<RunManifest, PipelineError> {
    let records = load_records(transactions)?;
    let sums = load_summaries(summaries)?;
    let names: Vec<&str> = models.iter().map(|m| m.name()).collect();
    let manifest =
        RunManifest::new("regress", vec![digest(transactions)?, digest(summaries)?], serde_json::json!({ "models": names }), out);
    let fits = regression_tables(&records, &sums, models)?;
    write_regression_reports(out, &fits, &manifest.config_hash)?;
    manifest.write(out)?;
    Ok(manifest)
}

/// `synth`: write a generated market (orders and summaries).
pub fn run_synth(config: &FlowConfig, out: &Path) -> Result<RunManifest, PipelineError> {
    let market = gen_market(config)?;
    let mut events: Vec<OrderEvent> = market.iter().flat_map(|s| s.events.iter().cloned()).collect();
    renumber(&mut events);
    let summaries: Vec<StockSummary> = market.iter().map(|s| s.summary.clone()).collect();
    let mut manifest = RunManifest::new("synth", Vec::new(), to_json(config), out);
    write_file(out, "orders.csv", |w| write_order_events(w, &events))?;
    write_file(out, "summaries.csv", |w| write_stock_summaries(w, &summaries))?;
    manifest.per_stock = market
        .iter()
        .map(|s| StockStatus { stock_code: s.summary.stock_code.clone(), status: format!("{} events", s.events.len()) })
        .collect();
    manifest.write(out)?;
    Ok(manifest)
}

/// Merge several streams into one file order: by timestamp, then stock, then
/// original seq; seq is renumbered to stay strictly increasing.
fn renumber(events: &mut [OrderEvent]) {
    events.sort_by(|a, b| (a.timestamp_ms, &a.stock_code, a.seq).cmp(&(b.timestamp_ms, &b.stock_code, b.seq)));
    for (i, e) in events.iter_mut().enumerate() {
        e.seq = i as u64 + 1;
    }
}

/// Configuration of a full `report` run. Paths are relative to the config
/// file. Either `orders` or `synth` (a flow config) supplies the order flow.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub orders: Option<PathBuf>,
    pub synth: Option<PathBuf>,
    pub summaries: Option<PathBuf>,
    pub closes: Option<PathBuf>,
    pub actions: Option<PathBuf>,
    /// Trading date of the order flow; a TOML date or a quoted `YYYY-MM-DD`.
    #[serde(deserialize_with = "toml_date")]
    pub date: Option<NaiveDate>,
    pub lenient: bool,
    pub theta: f64,
    pub kappa: f64,
    pub window_ms: i64,
    pub bin_ms: i64,
    pub ratio_high: f64,
    pub ratio_low: f64,
    pub prior_window_ms: i64,
    pub tick_cny: f64,
}

fn toml_date<'de, D: serde::Deserializer<'de>>(d: D) -> Result<Option<NaiveDate>, D::Error> {
    let text = match toml::Value::deserialize(d)? {
        toml::Value::Datetime(dt) => dt.to_string(),
        toml::Value::String(s) => s,
        other => return Err(serde::de::Error::custom(format!("expected a date, found {other}"))),
    };
    NaiveDate::parse_from_str(&text, "%Y-%m-%d").map(Some).map_err(serde::de::Error::custom)
}

impl Default for RunConfig {
    fn default() -> Self {
        let p = AnalysisParams::default();
        RunConfig {
            orders: None,
            synth: None,
            summaries: None,
            closes: None,
            actions: None,
            date: None,
            lenient: false,
            theta: p.theta,
            kappa: p.kappa,
            window_ms: p.window_ms,
            bin_ms: p.bin_ms,
            ratio_high: p.ratio_high,
            ratio_low: p.ratio_low,
            prior_window_ms: p.prior_window_ms,
            tick_cny: p.tick_cny,
        }
    }
}

impl RunConfig {
    /// Read a config file and resolve its paths against the file's directory.
    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        let mut config: RunConfig =
            toml::from_str(&text).map_err(|e| PipelineError::Usage(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut config.orders, &mut config.synth, &mut config.summaries, &mut config.closes, &mut config.actions]
            .into_iter()
            .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(config)
    }

    pub fn params(&self) -> AnalysisParams {
        AnalysisParams {
            theta: self.theta,
            kappa: self.kappa,
            window_ms: self.window_ms,
            bin_ms: self.bin_ms,
            ratio_high: self.ratio_high,
            ratio_low: self.ratio_low,
            prior_window_ms: self.prior_window_ms,
            tick_cny: self.tick_cny,
        }
    }
}

/// `report`: run every stage and write all tables. `seed` overrides the seed
/// of a synthetic flow config.
pub fn run_report(config: &RunConfig, seed: Option<u64>, out: &Path) -> Result<RunManifest, PipelineError> {
    let params = config.params();
    params.validate()?;
    if config.orders.is_some() == config.synth.is_some() {
        return Err(PipelineError::Usage("set exactly one of `orders` and `synth`".into()));
    }
    if config.closes.is_some() != config.date.is_some() {
        return Err(PipelineError::Usage("`closes` and `date` go together".into()));
    }
    let mut inputs = Vec::new();
    let (events, mut summaries) = match (&config.orders, &config.synth) {
        (Some(orders), _) => {
            inputs.push(digest(orders)?);
            (load_orders(orders, config.lenient)?.events, None)
        }
        (None, Some(synth)) => {
            let text = fs::read_to_string(synth).map_err(io_err(synth))?;
            let mut flow = FlowConfig::from_toml_str(&text)?;
            if let Some(seed) = seed {
                flow.seed = seed;
            }
            inputs.push(digest_bytes("synth", serde_json::to_string(&flow).expect("config serializes").as_bytes()));
            let market = gen_market(&flow)?;
            let summaries: Vec<StockSummary> = market.iter().map(|s| s.summary.clone()).collect();
            let mut events: Vec<OrderEvent> = market.into_iter().flat_map(|s| s.events).collect();
            renumber(&mut events);
            write_file(out, "inputs/orders.csv", |w| write_order_events(w, &events))?;
            write_file(out, "inputs/summaries.csv", |w| write_stock_summaries(w, &summaries))?;
            (events, Some(summaries))
        }
        (None, None) => unreachable!("checked above"),
    };
    if let Some(path) = &config.summaries {
        inputs.push(digest(path)?);
        summaries = Some(load_summaries(path)?);
    }
    let series = match &config.closes {
        Some(path) => {
            inputs.push(digest(path)?);
            load_closes(path)?
        }
        None => Vec::new(),
    };
    let actions = load_actions(config.actions.as_deref())?;
    if let Some(path) = &config.actions {
        inputs.push(digest(path)?);
    }
    let mut manifest = RunManifest::new(
        "report",
        inputs,
        serde_json::json!({ "params": params, "date": config.date, "lenient": config.lenient }),
        out,
    );
    let hash = manifest.config_hash.clone();

    let (trends, mut status) = segment_all(&series, &actions, &params)?;
    if !trends.is_empty() {
        write_segment_reports(out, &trends, &hash)?;
    }
    let replays = replay_all(events, &params, config.date, &trends)?;
    write_replay_outputs(out, &replays)?;
    status.extend(replays.iter().map(replay_status));
    manifest.per_stock = status;

    let records: Vec<TransactionRecord> =
        replays.iter().flat_map(|r| r.transactions.iter().map(TransactionRecord::from)).collect();
    let tapes: Vec<StockTape> = replays.iter().map(|r| r.tape.clone()).collect();
    if !trends.is_empty() {
        let ratios: Vec<StockRatio> = trends.iter().map(|t| t.ratio.clone()).collect();
        write_impact_reports(out, &records, &ratios, &hash)?;
    }
    let tables = event_study_tables(&tapes, &records, &params.binning()?)?;
    write_event_reports(out, &tables, &hash)?;

    let models = [ImpactModel::Pooled, ImpactModel::Purchases, ImpactModel::Sales];
    match summaries.as_ref().map(|s| regression_tables(&records, s, &models)) {
        Some(Ok(fits)) => write_regression_reports(out, &fits, &hash)?,
        Some(Err(e)) => {
            manifest.write(out)?;
            return Err(e);
        }
        None => log::info!("no stock summaries; regression skipped"),
    }
    manifest.write(out)?;
    log::info!("{} transactions, manifest {hash}", records.len());
    Ok(manifest)
}

/// `synth-series`: write constructed close series, one per stock. Stock `i`
/// draws its noise from `seed + i`.
pub fn run_synth_series(
    plans: &[(String, Vec<SegmentSpec>)],
    noise: f64,
    seed: u64,
    out: &Path,
) -> Result<RunManifest, PipelineError> {
    let params = serde_json::json!({ "plans": plans, "noise": noise, "seed": seed });
    let mut manifest = RunManifest::new("synth-series", Vec::new(), params, out);
    let mut series = Vec::with_capacity(plans.len());
    for (i, (stock, spec)) in plans.iter().enumerate() {
        series.push((stock, gen_price_series(spec, noise, seed.wrapping_add(i as u64))?));
    }
    write_file(out, "closes.csv", |w| -> std::io::Result<()> {
        writeln!(w, "{CLOSE_HEADER}")?;
        for (stock, closes) in &series {
            for c in closes {
                writeln!(w, "{stock},{},{}", c.date, c.raw_close)?;
            }
        }
        Ok(())
    })?;
    manifest.per_stock = series
        .iter()
        .map(|(s, c)| StockStatus { stock_code: s.to_string(), status: format!("{} closes", c.len()) })
        .collect();
    manifest.write(out)?;
    Ok(manifest)
}

/// Size the global rayon pool; `jobs == 0` keeps the default of one thread
/// per core.
pub fn init_thread_pool(jobs: usize) -> Result<(), PipelineError> {
    if jobs == 0 {
        return Ok(());
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build_global()
        .map_err(|e| PipelineError::Usage(format!("cannot start {jobs} worker threads: {e}")))
}
