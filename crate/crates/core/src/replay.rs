//! Per-stock-day replay: runs the event stream through the book and extracts
//! the trade tape, the per-fill structure values and the institutional
//! effective-market orders with their impact measures.

use serde::{Deserialize, Serialize};

use crate::book::{classify_order, BookError, BookStructureValue, LimitOrderBook, OrderClass, Trade};
use crate::impact::{prior_volatility, price_impact, trade_returns, EventAnchor, StockTape, VolumeKey};
use crate::ingest::{Action, OrderEvent};
use crate::series::TrendKind;
use crate::types::{HalfTicks, Millis, Shares, Side, Ticks, TraderType, DEFAULT_TICK_CNY};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReplayConfig {
    pub tick_cny: f64,
    /// Look-back window of the prior-volatility measure.
    pub prior_window_ms: Millis,
}

impl Default for ReplayConfig {
    fn default() -> Self {
        ReplayConfig { tick_cny: DEFAULT_TICK_CNY, prior_window_ms: 60_000 }
    }
}

/// Where the reference price of an order came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ReferenceSource {
    Mid,
    LastTrade,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstitutionalTransaction {
    pub stock_code: String,
    pub seq: u64,
    pub order_id: u64,
    pub side: Side,
    pub submitted: Shares,
    pub volume: Shares,
    /// Tape indices of the component trades.
    pub first_trade: usize,
    pub end_trade: usize,
    pub reference: HalfTicks,
    pub reference_source: ReferenceSource,
    pub vwap_cny: f64,
    pub pi: f64,
    pub c_before: Option<BookStructureValue>,
    pub c_cny: Option<f64>,
    pub prior_vol: Option<f64>,
    pub full_filled: bool,
    pub anchor_ms: Millis,
    pub trend: Option<TrendKind>,
}

impl InstitutionalTransaction {
    pub fn anchor(&self, tape: usize) -> EventAnchor {
        EventAnchor {
            tape,
            components: self.first_trade..self.end_trade,
            side: self.side,
            anchor_ms: self.anchor_ms,
            c_before: self.c_cny,
        }
    }

    pub fn volume_key(&self) -> VolumeKey {
        VolumeKey {
            volume: self.volume,
            anchor_ms: self.anchor_ms,
            order_id: self.order_id,
            stock_code: self.stock_code.clone(),
        }
    }

    /// Usable as a regression row: needs both C and V_p.
    pub fn is_complete(&self) -> bool {
        self.c_cny.is_some() && self.prior_vol.is_some()
    }
}

/// Share accounting for one replay; all integers.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Conservation {
    pub submitted: Shares,
    pub executed_buy: Shares,
    pub executed_sell: Shares,
    pub canceled: Shares,
    pub resting: Shares,
}

impl Conservation {
    pub fn holds(&self) -> bool {
        self.executed_buy == self.executed_sell
            && self.submitted == self.executed_buy + self.executed_sell + self.canceled + self.resting
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Exclusions {
    /// Institutional orders with neither a mid nor a previous trade.
    pub no_reference: usize,
    /// Transactions without C (one-sided book before the order).
    pub no_c: usize,
    /// Transactions without trades in the look-back window.
    pub no_prior_vol: usize,
}

#[derive(Debug, Clone)]
pub struct StockDayReplay {
    pub tape: StockTape,
    pub transactions: Vec<InstitutionalTransaction>,
    pub rejected: Vec<(u64, BookError)>,
    pub conservation: Conservation,
    pub exclusions: Exclusions,
    pub book: LimitOrderBook,
}

/// Shares on the opposite side a limit order at `limit` could take.
fn crossable_volume(book: &LimitOrderBook, side: Side, limit: Ticks, cap: Shares) -> Shares {
    let snapshot = book.depth_snapshot(usize::MAX);
    let ladder = match side {
        Side::Buy => snapshot.asks,
        Side::Sell => snapshot.bids,
    };
    let mut total = 0;
    for (price, vol) in ladder {
        let crosses = match side {
            Side::Buy => price <= limit,
            Side::Sell => price >= limit,
        };
        if !crosses || total >= cap {
            break;
        }
        total += vol;
    }
    total.min(cap)
}

/// Structure value of a single fill against the pre-fill book, given the best
/// quote on the aggressor's own side (which matching does not touch).
pub fn fill_structure(trade: &Trade, same_side_best: Option<Ticks>) -> Option<i128> {
    let own = same_side_best?;
    let mid = own + trade.price;
    let gap = match trade.aggressor_side {
        Side::Buy => 2 * trade.price - mid,
        Side::Sell => mid - 2 * trade.price,
    };
    Some(gap as i128 * trade.size as i128)
}

/// Replay one stock-day. Events must be ordered; rejected events (cancels of
/// dead orders, duplicate live ids) are collected and skipped.
pub fn replay_stock_day(
    stock_code: &str,
    events: &[OrderEvent],
    opening: Option<LimitOrderBook>,
    config: &ReplayConfig,
) -> StockDayReplay {
    let mut book = opening.unwrap_or_default();
    let mut conservation = Conservation {
        submitted: book.total_volume(Side::Buy) + book.total_volume(Side::Sell),
        ..Default::default()
    };
    let mut tape = StockTape { stock_code: stock_code.to_string(), ..Default::default() };
    let mut transactions = Vec::new();
    let mut rejected = Vec::new();
    let mut exclusions = Exclusions::default();

    for ev in events {
        let quotes = book.quotes();
        let institutional = ev.action == Action::Submit && ev.trader_type == TraderType::Institution;
        let c_before = if institutional {
            let volume = crossable_volume(&book, ev.side, ev.price, ev.size);
            (volume > 0).then(|| book.compute_c(ev.side, volume).ok()).flatten()
        } else {
            None
        };
        let last_trade = tape.trades.last().map(|t| t.price);
        let cancel_remaining = match ev.action {
            Action::Cancel => book.remaining(ev.order_id),
            Action::Submit => None,
        };

        let trades = match book.apply_event(ev) {
            Ok(t) => t,
            Err(e) => {
                rejected.push((ev.seq, e));
                continue;
            }
        };
        match ev.action {
            Action::Submit => conservation.submitted += ev.size,
            Action::Cancel => conservation.canceled += cancel_remaining.unwrap_or(0),
        }

        let first = tape.trades.len();
        for t in &trades {
            // Every fill executes the same shares for one buyer and one seller.
            conservation.executed_buy += t.size;
            conservation.executed_sell += t.size;
            tape.fill_c.push(
                fill_structure(t, quotes.best(t.aggressor_side)).map(|c| c as f64 * config.tick_cny / 2.0),
            );
        }
        tape.trades.extend(trades.iter().cloned());

        if !institutional {
            continue;
        }
        let OrderClass::EffectiveMarket { full_filled } = classify_order(ev, &trades) else {
            continue;
        };
        let (reference, reference_source) = match (quotes.mid, last_trade) {
            (Some(mid), _) => (mid, ReferenceSource::Mid),
            (None, Some(p)) => (HalfTicks::from_ticks(p), ReferenceSource::LastTrade),
            (None, None) => {
                exclusions.no_reference += 1;
                continue;
            }
        };
        let impact = price_impact(trades.iter().map(|t| (t.price, t.size)), reference, ev.side)
            .expect("effective-market order has volume and a positive reference");
        let volume: Shares = trades.iter().map(|t| t.size).sum();
        debug_assert!(c_before.is_none_or(|c| c.volume == volume));
        transactions.push(InstitutionalTransaction {
            stock_code: stock_code.to_string(),
            seq: ev.seq,
            order_id: ev.order_id,
            side: ev.side,
            submitted: ev.size,
            volume,
            first_trade: first,
            end_trade: tape.trades.len(),
            reference,
            reference_source,
            vwap_cny: impact.vwap_half * config.tick_cny / 2.0,
            pi: impact.pi,
            c_before,
            c_cny: c_before.map(|c| c.cny_shares(config.tick_cny)),
            prior_vol: None,
            full_filled,
            anchor_ms: trades[0].timestamp_ms,
            trend: None,
        });
    }

    conservation.resting = book.total_volume(Side::Buy) + book.total_volume(Side::Sell);

    let returns = trade_returns(&tape.trades);
    for tx in &mut transactions {
        tx.prior_vol = prior_volatility(&tape.trades, &returns, tx.anchor_ms, config.prior_window_ms);
        if tx.prior_vol.is_none() {
            exclusions.no_prior_vol += 1;
        }
        if tx.c_cny.is_none() {
            exclusions.no_c += 1;
        }
    }

    StockDayReplay { tape, transactions, rejected, conservation, exclusions, book }
}
