//! Parsing and validation of order-event streams, corporate-action tables and
//! per-stock summaries and daily closes.
//!
//! All inputs are plain UTF-8 CSV with a fixed header. Order events are
//! parsed row by row: a malformed row is rejected with its line number and the
//! stream continues, while structural problems (wrong header, sequence numbers
//! going backwards) abort the whole file.

use std::collections::{BTreeMap, HashMap};
use std::io::{Read, Write};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::series::DailyClose;
use crate::types::{Millis, Sessions, Shares, Side, Ticks, TraderType};

pub const ORDER_HEADER: &str =
    "stock_code,seq,timestamp_ms,order_id,trader_id,trader_type,side,action,price_ticks,size";
pub const ACTION_HEADER: &str =
    "stock_code,ex_date,kind,cash_per_share,bonus_ratio,rights_ratio,rights_price";
pub const SUMMARY_HEADER: &str = "stock_code,float_cap_mcny,n_orders,total_size";
pub const CLOSE_HEADER: &str = "stock_code,date,close_cny";

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("unreadable source: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("header mismatch: expected `{expected}`, found `{found}`")]
    Header { expected: String, found: String },
    #[error("line {line}: seq {seq} does not increase over previous seq {prev}")]
    NonMonotoneSeq { line: u64, prev: u64, seq: u64 },
    #[error("line {line}: {reason}")]
    Row { line: u64, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Action {
    Submit,
    Cancel,
}

impl Action {
    pub fn code(self) -> &'static str {
        match self {
            Action::Submit => "SUBMIT",
            Action::Cancel => "CANCEL",
        }
    }
}

/// One order submission or cancellation.
///
/// For cancels, `price` and `size` are informational only; zero means the
/// field was left empty in the source.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrderEvent {
    pub stock_code: String,
    pub seq: u64,
    pub timestamp_ms: Millis,
    pub order_id: u64,
    pub trader_id: String,
    pub trader_type: TraderType,
    pub side: Side,
    pub action: Action,
    pub price: Ticks,
    pub size: Shares,
}

impl OrderEvent {
    pub fn is_submit(&self) -> bool {
        self.action == Action::Submit
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RowRejection {
    pub line: u64,
    pub reason: String,
}

/// Result of parsing an order-event file.
#[derive(Debug, Clone, Default)]
pub struct ParsedEvents {
    /// Accepted events in (timestamp, seq) order.
    pub events: Vec<OrderEvent>,
    pub rejected: Vec<RowRejection>,
}

impl ParsedEvents {
    pub fn accepted(&self) -> usize {
        self.events.len()
    }
}

fn csv_reader<R: Read>(source: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::None)
        .from_reader(source)
}

fn check_header(
    records: &mut csv::StringRecordsIter<'_, impl Read>,
    expected: &str,
) -> Result<bool, IngestError> {
    match records.next() {
        None => Err(IngestError::Header {
            expected: expected.to_string(),
            found: String::new(),
        }),
        Some(rec) => {
            let rec = rec?;
            let found = rec.iter().collect::<Vec<_>>().join(",");
            if found != expected {
                return Err(IngestError::Header {
                    expected: expected.to_string(),
                    found,
                });
            }
            Ok(true)
        }
    }
}

fn parse_num<T: std::str::FromStr>(field: &str, name: &str) -> Result<T, String> {
    field
        .parse::<T>()
        .map_err(|_| format!("invalid {name} {field:?}"))
}

fn parse_order_row(rec: &csv::StringRecord) -> Result<OrderEvent, String> {
    if rec.len() != 10 {
        return Err(format!("expected 10 fields, found {}", rec.len()));
    }
    let stock_code = rec[0].to_string();
    if stock_code.is_empty() {
        return Err("empty stock_code".into());
    }
    let seq: u64 = parse_num(&rec[1], "seq")?;
    let timestamp_ms: Millis = parse_num(&rec[2], "timestamp_ms")?;
    if timestamp_ms < 0 {
        return Err(format!("negative timestamp {timestamp_ms}"));
    }
    let order_id: u64 = parse_num(&rec[3], "order_id")?;
    let trader_id = rec[4].to_string();
    let trader_type: TraderType = rec[5].parse()?;
    let side: Side = rec[6].parse()?;
    let action = match &rec[7] {
        "SUBMIT" => Action::Submit,
        "CANCEL" => Action::Cancel,
        other => return Err(format!("unknown action {other:?}")),
    };
    let (price, size) = match action {
        Action::Submit => {
            let price: Ticks = parse_num(&rec[8], "price_ticks")?;
            let size: Shares = parse_num(&rec[9], "size")?;
            if price <= 0 {
                return Err(format!("submit with non-positive price {price}"));
            }
            if size == 0 {
                return Err("submit with zero size".into());
            }
            (price, size)
        }
        Action::Cancel => {
            let price = if rec[8].is_empty() { 0 } else { parse_num(&rec[8], "price_ticks")? };
            let size = if rec[9].is_empty() { 0 } else { parse_num(&rec[9], "size")? };
            (price, size)
        }
    };
    Ok(OrderEvent {
        stock_code,
        seq,
        timestamp_ms,
        order_id,
        trader_id,
        trader_type,
        side,
        action,
        price,
        size,
    })
}

/// Parse an order-event CSV stream.
pub fn parse_order_events<R: Read>(source: R) -> Result<ParsedEvents, IngestError> {
    let mut reader = csv_reader(source);
    let mut records = reader.records();
    check_header(&mut records, ORDER_HEADER)?;

    let mut out = ParsedEvents::default();
    let mut prev_seq: Option<u64> = None;
    for rec in records {
        let rec = match rec {
            Ok(r) => r,
            Err(e) if e.is_io_error() => return Err(e.into()),
            Err(e) => {
                let line = e.position().map_or(0, |p| p.line());
                out.rejected.push(RowRejection { line, reason: e.to_string() });
                continue;
            }
        };
        let line = rec.position().map_or(0, |p| p.line());
        match parse_order_row(&rec) {
            Ok(ev) => {
                if let Some(prev) = prev_seq {
                    if ev.seq <= prev {
                        return Err(IngestError::NonMonotoneSeq { line, prev, seq: ev.seq });
                    }
                }
                prev_seq = Some(ev.seq);
                out.events.push(ev);
            }
            Err(reason) => out.rejected.push(RowRejection { line, reason }),
        }
    }
    out.events.sort_by_key(|e| (e.timestamp_ms, e.seq));
    Ok(out)
}

fn format_order_row(ev: &OrderEvent) -> String {
    let (price, size) = match ev.action {
        Action::Cancel if ev.price == 0 && ev.size == 0 => (String::new(), String::new()),
        _ => (ev.price.to_string(), ev.size.to_string()),
    };
    format!(
        "{},{},{},{},{},{},{},{},{},{}",
        ev.stock_code,
        ev.seq,
        ev.timestamp_ms,
        ev.order_id,
        ev.trader_id,
        ev.trader_type.code(),
        ev.side.code(),
        ev.action.code(),
        price,
        size
    )
}

/// Serialize events in the order-event CSV schema (LF line endings).
pub fn write_order_events<W: Write>(mut out: W, events: &[OrderEvent]) -> std::io::Result<()> {
    writeln!(out, "{ORDER_HEADER}")?;
    for ev in events {
        writeln!(out, "{}", format_order_row(ev))?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Finding {
    DanglingCancel { seq: u64, order_id: u64 },
    DuplicateOrderId { order_id: u64, first_seq: u64, second_seq: u64 },
    OutOfSession { seq: u64, timestamp_ms: Millis },
}

impl Finding {
    /// Hard findings make the stream unacceptable; out-of-session events are
    /// only excluded.
    pub fn is_hard(&self) -> bool {
        !matches!(self, Finding::OutOfSession { .. })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub findings: Vec<Finding>,
}

impl ValidationReport {
    pub fn hard_count(&self) -> usize {
        self.findings.iter().filter(|f| f.is_hard()).count()
    }

    pub fn soft_count(&self) -> usize {
        self.findings.len() - self.hard_count()
    }

    pub fn is_accepted(&self) -> bool {
        self.hard_count() == 0
    }

    pub fn is_empty(&self) -> bool {
        self.findings.is_empty()
    }
}

/// Check an ordered stream for dangling cancels, duplicate order ids and
/// out-of-session timestamps.
///
/// Liveness is tracked structurally (submitted and not yet cancelled); whether
/// an order was already exhausted by fills is only known to the matcher, which
/// rejects such cancels itself.
pub fn validate_stream(events: &[OrderEvent], sessions: &Sessions) -> ValidationReport {
    let mut findings = Vec::new();
    // (stock, order_id) -> (submit seq, live)
    let mut seen: HashMap<(&str, u64), (u64, bool)> = HashMap::new();
    for ev in events {
        if !sessions.contains(ev.timestamp_ms) {
            findings.push(Finding::OutOfSession { seq: ev.seq, timestamp_ms: ev.timestamp_ms });
            continue;
        }
        let key = (ev.stock_code.as_str(), ev.order_id);
        match ev.action {
            Action::Submit => match seen.get(&key) {
                Some(&(first_seq, _)) => findings.push(Finding::DuplicateOrderId {
                    order_id: ev.order_id,
                    first_seq,
                    second_seq: ev.seq,
                }),
                None => {
                    seen.insert(key, (ev.seq, true));
                }
            },
            Action::Cancel => match seen.get_mut(&key) {
                Some((_, live)) if *live => *live = false,
                _ => findings.push(Finding::DanglingCancel { seq: ev.seq, order_id: ev.order_id }),
            },
        }
    }
    ValidationReport { findings }
}

/// Drop events outside the continuous-auction sessions.
pub fn in_session(events: Vec<OrderEvent>, sessions: &Sessions) -> Vec<OrderEvent> {
    events.into_iter().filter(|e| sessions.contains(e.timestamp_ms)).collect()
}

/// Split a multi-stock stream into per-stock streams, ordered by stock code.
pub fn split_by_stock(events: Vec<OrderEvent>) -> Vec<(String, Vec<OrderEvent>)> {
    let mut map: BTreeMap<String, Vec<OrderEvent>> = Default::default();
    for ev in events {
        map.entry(ev.stock_code.clone()).or_default().push(ev);
    }
    map.into_iter().collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum CorporateActionKind {
    CashDividend { cash_per_share: f64 },
    /// New shares per held share; 10:10 is 1.0.
    BonusShare { ratio: f64 },
    /// Rights per held share at a subscription price in CNY.
    RightsIssue { ratio: f64, price: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorporateAction {
    pub stock_code: String,
    pub ex_date: NaiveDate,
    pub kind: CorporateActionKind,
}

fn positive(field: &str, name: &str) -> Result<f64, String> {
    let v: f64 = parse_num(field, name)?;
    if !(v.is_finite() && v > 0.0) {
        return Err(format!("{name} must be strictly positive, got {field}"));
    }
    Ok(v)
}

fn parse_action_row(rec: &csv::StringRecord) -> Result<CorporateAction, String> {
    if rec.len() != 7 {
        return Err(format!("expected 7 fields, found {}", rec.len()));
    }
    let ex_date = NaiveDate::parse_from_str(&rec[1], "%Y-%m-%d")
        .map_err(|_| format!("invalid ex_date {:?}", &rec[1]))?;
    let present = |i: usize| !rec[i].is_empty();
    let kind = match &rec[2] {
        "CASH" => {
            if present(4) || present(5) || present(6) {
                return Err("CASH row sets fields of another kind".into());
            }
            CorporateActionKind::CashDividend { cash_per_share: positive(&rec[3], "cash_per_share")? }
        }
        "BONUS" => {
            if present(3) || present(5) || present(6) {
                return Err("BONUS row sets fields of another kind".into());
            }
            CorporateActionKind::BonusShare { ratio: positive(&rec[4], "bonus_ratio")? }
        }
        "RIGHTS" => {
            if present(3) || present(4) {
                return Err("RIGHTS row sets fields of another kind".into());
            }
            CorporateActionKind::RightsIssue {
                ratio: positive(&rec[5], "rights_ratio")?,
                price: positive(&rec[6], "rights_price")?,
            }
        }
        other => return Err(format!("unknown kind {other:?}")),
    };
    Ok(CorporateAction { stock_code: rec[0].to_string(), ex_date, kind })
}

/// Parse a corporate-action CSV. Any bad row is a hard error.
pub fn parse_corporate_actions<R: Read>(source: R) -> Result<Vec<CorporateAction>, IngestError> {
    let mut reader = csv_reader(source);
    let mut records = reader.records();
    check_header(&mut records, ACTION_HEADER)?;
    let mut out = Vec::new();
    for rec in records {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        out.push(parse_action_row(&rec).map_err(|reason| IngestError::Row { line, reason })?);
    }
    Ok(out)
}

pub fn write_corporate_actions<W: Write>(
    mut out: W,
    actions: &[CorporateAction],
) -> std::io::Result<()> {
    writeln!(out, "{ACTION_HEADER}")?;
    for a in actions {
        let (kind, cash, bonus, rr, rp) = match a.kind {
            CorporateActionKind::CashDividend { cash_per_share } => {
                ("CASH", cash_per_share.to_string(), String::new(), String::new(), String::new())
            }
            CorporateActionKind::BonusShare { ratio } => {
                ("BONUS", String::new(), ratio.to_string(), String::new(), String::new())
            }
            CorporateActionKind::RightsIssue { ratio, price } => {
                ("RIGHTS", String::new(), String::new(), ratio.to_string(), price.to_string())
            }
        };
        writeln!(out, "{},{},{kind},{cash},{bonus},{rr},{rp}", a.stock_code, a.ex_date)?;
    }
    Ok(())
}

/// Per-stock summary: float capitalization (million CNY), institutional order
/// count and total institutional order size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StockSummary {
    pub stock_code: String,
    pub float_cap_mcny: f64,
    pub n_orders: u64,
    pub total_size: Shares,
}

/// Count institutional submissions and their total size for one stock.
pub fn summarize(stock_code: &str, float_cap_mcny: f64, events: &[OrderEvent]) -> StockSummary {
    let (n_orders, total_size) = events
        .iter()
        .filter(|e| {
            e.stock_code == stock_code
                && e.is_submit()
                && e.trader_type == TraderType::Institution
        })
        .fold((0u64, 0u64), |(n, s), e| (n + 1, s + e.size));
    StockSummary { stock_code: stock_code.to_string(), float_cap_mcny, n_orders, total_size }
}

pub fn parse_stock_summaries<R: Read>(source: R) -> Result<Vec<StockSummary>, IngestError> {
    let mut reader = csv_reader(source);
    let mut records = reader.records();
    check_header(&mut records, SUMMARY_HEADER)?;
    let mut out = Vec::new();
    for rec in records {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let row = (|| -> Result<StockSummary, String> {
            if rec.len() != 4 {
                return Err(format!("expected 4 fields, found {}", rec.len()));
            }
            let float_cap_mcny: f64 = parse_num(&rec[1], "float_cap_mcny")?;
            if !(float_cap_mcny.is_finite() && float_cap_mcny >= 0.0) {
                return Err("float_cap_mcny must be non-negative".into());
            }
            Ok(StockSummary {
                stock_code: rec[0].to_string(),
                float_cap_mcny,
                n_orders: parse_num(&rec[2], "n_orders")?,
                total_size: parse_num(&rec[3], "total_size")?,
            })
        })()
        .map_err(|reason| IngestError::Row { line, reason })?;
        out.push(row);
    }
    Ok(out)
}

pub fn write_stock_summaries<W: Write>(mut out: W, rows: &[StockSummary]) -> std::io::Result<()> {
    writeln!(out, "{SUMMARY_HEADER}")?;
    for r in rows {
        writeln!(out, "{},{},{},{}", r.stock_code, r.float_cap_mcny, r.n_orders, r.total_size)?;
    }
    Ok(())
}

/// Parse a daily-close CSV into per-stock series in stock-code order. Rows of
/// one stock may be interleaved with others but must be date-ordered.
pub fn parse_daily_closes<R: Read>(source: R) -> Result<Vec<(String, Vec<DailyClose>)>, IngestError> {
    let mut reader = csv_reader(source);
    let mut records = reader.records();
    check_header(&mut records, CLOSE_HEADER)?;
    let mut by_stock: BTreeMap<String, Vec<DailyClose>> = BTreeMap::new();
    for rec in records {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let row = (|| -> Result<(String, DailyClose), String> {
            if rec.len() != 3 {
                return Err(format!("expected 3 fields, found {}", rec.len()));
            }
            let date = NaiveDate::parse_from_str(&rec[1], "%Y-%m-%d")
                .map_err(|_| format!("invalid date {:?}", &rec[1]))?;
            Ok((rec[0].to_string(), DailyClose::new(date, positive(&rec[2], "close_cny")?)))
        })()
        .map_err(|reason| IngestError::Row { line, reason })?;
        let series = by_stock.entry(row.0).or_default();
        if series.last().is_some_and(|c| c.date >= row.1.date) {
            return Err(IngestError::Row { line, reason: format!("date {} out of order", row.1.date) });
        }
        series.push(row.1);
    }
    Ok(by_stock.into_iter().collect())
}

/// Write raw closes in the daily-close schema.
pub fn write_daily_closes<W: Write>(mut out: W, stock_code: &str, closes: &[DailyClose]) -> std::io::Result<()> {
    writeln!(out, "{CLOSE_HEADER}")?;
    for c in closes {
        writeln!(out, "{stock_code},{},{}", c.date, c.raw_close)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(body: &str) -> ParsedEvents {
        parse_order_events(format!("{ORDER_HEADER}\n{body}").as_bytes()).unwrap()
    }

    #[test]
    fn parses_submit_row_field_by_field() {
        let p = parse("000001,1001,34200000,7,T42,I,B,SUBMIT,1050,500\n");
        assert_eq!(p.accepted(), 1);
        assert!(p.rejected.is_empty());
        let ev = &p.events[0];
        assert_eq!(ev.stock_code, "000001");
        assert_eq!(ev.seq, 1001);
        assert_eq!(ev.timestamp_ms, crate::types::hms(9, 30, 0));
        assert_eq!(ev.order_id, 7);
        assert_eq!(ev.trader_id, "T42");
        assert_eq!(ev.trader_type, TraderType::Institution);
        assert_eq!(ev.side, Side::Buy);
        assert_eq!(ev.action, Action::Submit);
        assert_eq!(ev.price, 1050);
        assert!((ev.price as f64 * 0.01 - 10.50).abs() < 1e-12);
        assert_eq!(ev.size, 500);
    }

    #[test]
    fn empty_file_with_header() {
        let p = parse("");
        assert_eq!(p.accepted(), 0);
        assert_eq!(p.rejected.len(), 0);
    }

    #[test]
    fn zero_size_row_rejected_and_stream_continues() {
        let p = parse(
            "000001,1,34200000,1,a,P,B,SUBMIT,1000,0\n\
             000001,2,34200001,2,a,P,S,SUBMIT,1001,100\n",
        );
        assert_eq!(p.accepted(), 1);
        assert_eq!(p.rejected.len(), 1);
        assert_eq!(p.rejected[0].line, 2);
        assert!(p.rejected[0].reason.contains("zero size"));
        assert_eq!(p.events[0].seq, 2);
    }

    #[test]
    fn malformed_rows_carry_line_numbers() {
        let p = parse(
            "000001,1,34200000,1,a,P,B,SUBMIT,1000,100\n\
             000001,x,34200000,2,a,P,B,SUBMIT,1000,100\n\
             000001,3,34200000,3,a,Q,B,SUBMIT,1000,100\n\
             000001,4,34200000,4,a,P,B\n",
        );
        assert_eq!(p.accepted(), 1);
        let lines: Vec<u64> = p.rejected.iter().map(|r| r.line).collect();
        assert_eq!(lines, vec![3, 4, 5]);
    }

    #[test]
    fn header_mismatch_is_hard_error() {
        let err = parse_order_events("a,b,c\n".as_bytes()).unwrap_err();
        assert!(matches!(err, IngestError::Header { .. }));
    }

    #[test]
    fn non_monotone_seq_is_hard_error() {
        let src = format!(
            "{ORDER_HEADER}\n000001,5,34200000,1,a,P,B,SUBMIT,1000,100\n000001,5,34200001,2,a,P,B,SUBMIT,1000,100\n"
        );
        let err = parse_order_events(src.as_bytes()).unwrap_err();
        assert!(matches!(err, IngestError::NonMonotoneSeq { line: 3, prev: 5, seq: 5 }));
    }

    #[test]
    fn events_sorted_by_time_then_seq() {
        let p = parse(
            "000001,1,34200500,1,a,P,B,SUBMIT,1000,100\n\
             000001,2,34200000,2,a,P,B,SUBMIT,1000,100\n",
        );
        let seqs: Vec<u64> = p.events.iter().map(|e| e.seq).collect();
        assert_eq!(seqs, vec![2, 1]);
    }

    #[test]
    fn round_trip_is_byte_identical() {
        let body = "000001,1,34200000,1,a,P,B,SUBMIT,1000,100\n\
                    000001,2,34200001,1,a,P,B,CANCEL,,\n\
                    000002,3,34200002,9,b,I,S,SUBMIT,1001,300\n";
        let src = format!("{ORDER_HEADER}\n{body}");
        let p = parse_order_events(src.as_bytes()).unwrap();
        let mut out = Vec::new();
        write_order_events(&mut out, &p.events).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), src);
    }

    fn ev(seq: u64, id: u64, action: Action) -> OrderEvent {
        OrderEvent {
            stock_code: "000001".into(),
            seq,
            timestamp_ms: 34_200_000 + seq as i64,
            order_id: id,
            trader_id: "t".into(),
            trader_type: TraderType::Individual,
            side: Side::Buy,
            action,
            price: 1000,
            size: 100,
        }
    }

    #[test]
    fn cancel_before_submit_is_dangling() {
        let r = validate_stream(
            &[ev(1, 5, Action::Cancel), ev(2, 5, Action::Submit)],
            &Sessions::default(),
        );
        assert_eq!(r.findings, vec![Finding::DanglingCancel { seq: 1, order_id: 5 }]);
        assert!(!r.is_accepted());
    }

    #[test]
    fn valid_stream_has_empty_report() {
        let r = validate_stream(
            &[ev(1, 1, Action::Submit), ev(2, 2, Action::Submit), ev(3, 1, Action::Cancel)],
            &Sessions::default(),
        );
        assert!(r.is_empty());
        assert!(r.is_accepted());
    }

    #[test]
    fn duplicate_order_id_reports_both_seqs() {
        let events = [ev(1, 3, Action::Submit), ev(2, 4, Action::Submit), ev(7, 3, Action::Submit)];
        let r = validate_stream(&events, &Sessions::default());
        // Linear-scan oracle: pair every submit with the first earlier submit of the same id.
        let mut expected = Vec::new();
        for (j, b) in events.iter().enumerate() {
            if let Some(a) = events[..j].iter().find(|a| a.order_id == b.order_id) {
                expected.push(Finding::DuplicateOrderId {
                    order_id: b.order_id,
                    first_seq: a.seq,
                    second_seq: b.seq,
                });
            }
        }
        assert_eq!(r.findings, expected);
        assert_eq!(
            r.findings,
            vec![Finding::DuplicateOrderId { order_id: 3, first_seq: 1, second_seq: 7 }]
        );
    }

    #[test]
    fn double_cancel_is_dangling() {
        let r = validate_stream(
            &[ev(1, 1, Action::Submit), ev(2, 1, Action::Cancel), ev(3, 1, Action::Cancel)],
            &Sessions::default(),
        );
        assert_eq!(r.findings, vec![Finding::DanglingCancel { seq: 3, order_id: 1 }]);
    }

    #[test]
    fn out_of_session_is_soft() {
        let mut e = ev(1, 1, Action::Submit);
        e.timestamp_ms = crate::types::hms(12, 0, 0);
        let r = validate_stream(&[e], &Sessions::default());
        assert_eq!(r.soft_count(), 1);
        assert!(r.is_accepted());
    }

    #[test]
    fn parses_reference_corporate_actions() {
        let src = format!(
            "{ACTION_HEADER}\n\
             000001,2003-09-29,CASH,0.15,,,\n\
             000002,2003-05-23,BONUS,,1.0,,\n\
             000024,2003-11-12,RIGHTS,,,0.3,8.93\n\
             000024,2003-11-12,CASH,0.12,,,\n"
        );
        let acts = parse_corporate_actions(src.as_bytes()).unwrap();
        assert_eq!(acts.len(), 4);
        assert_eq!(acts[0].kind, CorporateActionKind::CashDividend { cash_per_share: 0.15 });
        assert_eq!(acts[0].ex_date, NaiveDate::from_ymd_opt(2003, 9, 29).unwrap());
        assert_eq!(acts[1].kind, CorporateActionKind::BonusShare { ratio: 1.0 });
        assert_eq!(acts[1].ex_date, NaiveDate::from_ymd_opt(2003, 5, 23).unwrap());
        assert_eq!(acts[2].kind, CorporateActionKind::RightsIssue { ratio: 0.3, price: 8.93 });
        assert_eq!(acts[2].ex_date, acts[3].ex_date);
    }

    #[test]
    fn corporate_action_errors() {
        let unknown = format!("{ACTION_HEADER}\n000001,2003-09-29,SPLIT,0.15,,,\n");
        assert!(matches!(
            parse_corporate_actions(unknown.as_bytes()),
            Err(IngestError::Row { line: 2, .. })
        ));
        let negative = format!("{ACTION_HEADER}\n000001,2003-09-29,CASH,-0.15,,,\n");
        assert!(parse_corporate_actions(negative.as_bytes()).is_err());
        let mixed = format!("{ACTION_HEADER}\n000001,2003-09-29,CASH,0.15,1.0,,\n");
        assert!(parse_corporate_actions(mixed.as_bytes()).is_err());
    }

    #[test]
    fn summary_counts_institutional_submits() {
        let mut a = ev(1, 1, Action::Submit);
        a.trader_type = TraderType::Institution;
        a.size = 700;
        let b = ev(2, 2, Action::Submit);
        let s = summarize("000001", 12.0, &[a, b]);
        assert_eq!(s.n_orders, 1);
        assert_eq!(s.total_size, 700);
        let mut buf = Vec::new();
        write_stock_summaries(&mut buf, std::slice::from_ref(&s)).unwrap();
        assert_eq!(parse_stock_summaries(&buf[..]).unwrap(), vec![s]);
    }
}
