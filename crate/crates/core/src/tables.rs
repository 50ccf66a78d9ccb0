//! Intermediate tables passed between commands: the per-stock trade tape, its
//! per-fill structure values and the institutional transaction table.
//!
//! Floats here are written with shortest round-trip formatting so a table read
//! back gives the values that were computed.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::book::Trade;
use crate::ingest::IngestError;
use crate::replay::InstitutionalTransaction;
use crate::series::TrendKind;
use crate::types::{Millis, Shares, Side, TraderType};

pub const TAPE_HEADER: &str =
    "seq,timestamp_ms,price_ticks,size,aggressor_side,aggressor_order_id,resting_order_id,aggressor_trader_type";
pub const FILL_C_HEADER: &str = "c_cny";
pub const TRANSACTION_HEADER: &str = "stock,order_id,side,V,PI,C,V_p,full_filled,trend,anchor_ms";

/// One row of the transaction table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransactionRecord {
    pub stock: String,
    pub order_id: u64,
    pub side: Side,
    pub volume: Shares,
    pub pi: f64,
    pub c: Option<f64>,
    pub prior_vol: Option<f64>,
    pub full_filled: bool,
    pub trend: Option<TrendKind>,
    pub anchor_ms: Millis,
}

impl From<&InstitutionalTransaction> for TransactionRecord {
    fn from(tx: &InstitutionalTransaction) -> Self {
        TransactionRecord {
            stock: tx.stock_code.clone(),
            order_id: tx.order_id,
            side: tx.side,
            volume: tx.volume,
            pi: tx.pi,
            c: tx.c_cny,
            prior_vol: tx.prior_vol,
            full_filled: tx.full_filled,
            trend: tx.trend,
            anchor_ms: tx.anchor_ms,
        }
    }
}

fn writer<W: Write>(out: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .has_headers(false)
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out)
}

fn reader<R: Read>(source: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new().has_headers(false).flexible(true).from_reader(source)
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

/// Read a file with a fixed header, handing each row (with its line) to `row`.
fn read_rows<R: Read, T>(
    source: R,
    header: &str,
    mut row: impl FnMut(&csv::StringRecord) -> Result<T, String>,
) -> Result<Vec<T>, IngestError> {
    let mut rdr = reader(source);
    let mut records = rdr.records();
    let found = match records.next() {
        Some(rec) => rec?.iter().collect::<Vec<_>>().join(","),
        None => String::new(),
    };
    if found != header {
        return Err(IngestError::Header { expected: header.to_string(), found });
    }
    let width = header.split(',').count();
    let mut out = Vec::new();
    for rec in records {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != width {
            return Err(IngestError::Row { line, reason: format!("expected {width} fields, found {}", rec.len()) });
        }
        out.push(row(&rec).map_err(|reason| IngestError::Row { line, reason })?);
    }
    Ok(out)
}

fn num<T: std::str::FromStr>(field: &str, name: &str) -> Result<T, String> {
    field.parse().map_err(|_| format!("invalid {name} {field:?}"))
}

fn opt_num(field: &str, name: &str) -> Result<Option<f64>, String> {
    if field.is_empty() {
        Ok(None)
    } else {
        num(field, name).map(Some)
    }
}

pub fn write_tape<W: Write>(out: W, trades: &[Trade]) -> Result<(), csv::Error> {
    let mut w = writer(out);
    w.write_record(TAPE_HEADER.split(','))?;
    for t in trades {
        w.write_record([
            t.seq.to_string(),
            t.timestamp_ms.to_string(),
            t.price.to_string(),
            t.size.to_string(),
            t.aggressor_side.code().to_string(),
            t.aggressor_order_id.to_string(),
            t.resting_order_id.to_string(),
            t.aggressor_trader_type.code().to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_tape<R: Read>(source: R) -> Result<Vec<Trade>, IngestError> {
    read_rows(source, TAPE_HEADER, |r| {
        Ok(Trade {
            seq: num(&r[0], "seq")?,
            timestamp_ms: num(&r[1], "timestamp_ms")?,
            price: num(&r[2], "price_ticks")?,
            size: num(&r[3], "size")?,
            aggressor_side: r[4].parse::<Side>()?,
            aggressor_order_id: num(&r[5], "aggressor_order_id")?,
            resting_order_id: num(&r[6], "resting_order_id")?,
            aggressor_trader_type: r[7].parse::<TraderType>()?,
        })
    })
}

/// Per-fill structure values, one row per tape row; empty when undefined.
pub fn write_fill_c<W: Write>(out: W, fill_c: &[Option<f64>]) -> Result<(), csv::Error> {
    let mut w = writer(out);
    w.write_record([FILL_C_HEADER])?;
    for c in fill_c {
        w.write_record([opt(*c)])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_fill_c<R: Read>(source: R) -> Result<Vec<Option<f64>>, IngestError> {
    read_rows(source, FILL_C_HEADER, |r| opt_num(&r[0], "c_cny"))
}

pub fn write_transactions<W: Write>(out: W, rows: &[TransactionRecord]) -> Result<(), csv::Error> {
    let mut w = writer(out);
    w.write_record(TRANSACTION_HEADER.split(','))?;
    for t in rows {
        w.write_record([
            t.stock.clone(),
            t.order_id.to_string(),
            t.side.code().to_string(),
            t.volume.to_string(),
            t.pi.to_string(),
            opt(t.c),
            opt(t.prior_vol),
            u8::from(t.full_filled).to_string(),
            t.trend.map(|k| k.name().to_string()).unwrap_or_default(),
            t.anchor_ms.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_transactions<R: Read>(source: R) -> Result<Vec<TransactionRecord>, IngestError> {
    read_rows(source, TRANSACTION_HEADER, |r| {
        let trend = match &r[8] {
            "" => None,
            "drawup" => Some(TrendKind::Drawup),
            "drawdown" => Some(TrendKind::Drawdown),
            other => return Err(format!("unknown trend {other:?}")),
        };
        let full_filled = match &r[7] {
            "1" => true,
            "0" => false,
            other => return Err(format!("invalid full_filled {other:?}")),
        };
        Ok(TransactionRecord {
            stock: r[0].to_string(),
            order_id: num(&r[1], "order_id")?,
            side: r[2].parse::<Side>()?,
            volume: num(&r[3], "V")?,
            pi: num(&r[4], "PI")?,
            c: opt_num(&r[5], "C")?,
            prior_vol: opt_num(&r[6], "V_p")?,
            full_filled,
            trend,
            anchor_ms: num(&r[9], "anchor_ms")?,
        })
    })
}
