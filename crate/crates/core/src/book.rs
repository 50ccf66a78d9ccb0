//! Limit order book with price-time priority matching.
//!
//! The book is rebuilt by replaying order events: a submission that crosses the
//! opposite best quote trades against resting orders level by level (best price
//! first, FIFO within a level) and any remainder rests at its limit. Trades
//! always print at the resting order's price.
//!
//! The book also measures its own structure on the side an aggressor would
//! consume (`compute_c`): the volume-weighted distance of the consumed levels
//! from the mid quote.

use std::collections::{BTreeMap, HashMap, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{Action, OrderEvent};
use crate::types::{HalfTicks, Millis, Shares, Side, Ticks, TraderType};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BookError {
    #[error("cancel of order {order_id} which is not live")]
    UnknownOrder { order_id: u64 },
    #[error("submit reuses live order id {order_id}")]
    DuplicateOrder { order_id: u64 },
    #[error("submit of order {order_id} with invalid price or size")]
    InvalidSubmit { order_id: u64 },
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum StructureError {
    #[error("mid price undefined: one side of the book is empty")]
    UndefinedMid,
    #[error("requested volume {requested} exceeds opposite depth {available}")]
    InsufficientDepth { requested: Shares, available: Shares },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RestingOrder {
    pub order_id: u64,
    pub remaining: Shares,
    pub seq: u64,
    pub trader_type: TraderType,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trade {
    pub seq: u64,
    pub timestamp_ms: Millis,
    pub price: Ticks,
    pub size: Shares,
    pub aggressor_side: Side,
    pub aggressor_order_id: u64,
    pub resting_order_id: u64,
    pub aggressor_trader_type: TraderType,
}

/// Best quotes and the mid price in half-ticks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Quotes {
    pub best_bid: Option<Ticks>,
    pub best_ask: Option<Ticks>,
    pub mid: Option<HalfTicks>,
}

impl Quotes {
    pub fn best(&self, side: Side) -> Option<Ticks> {
        match side {
            Side::Buy => self.best_bid,
            Side::Sell => self.best_ask,
        }
    }
}

/// The order-book structure variable for one aggressor.
///
/// `c_half` is exact, in half-ticks times shares.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BookStructureValue {
    pub c_half: i128,
    pub levels: usize,
    pub side: Side,
    pub volume: Shares,
    pub mid: HalfTicks,
}

impl BookStructureValue {
    /// C in CNY times shares.
    pub fn cny_shares(&self, tick_cny: f64) -> f64 {
        self.c_half as f64 * tick_cny / 2.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OrderClass {
    EffectiveMarket { full_filled: bool },
    PassiveLimit,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DepthSnapshot {
    pub bids: Vec<(Ticks, Shares)>,
    pub asks: Vec<(Ticks, Shares)>,
}

type Ladder = BTreeMap<Ticks, VecDeque<RestingOrder>>;

#[derive(Debug, Clone, Default)]
pub struct LimitOrderBook {
    bids: Ladder,
    asks: Ladder,
    live: HashMap<u64, (Side, Ticks)>,
}

/// Levels of one side in priority order (best first).
fn levels_of(ladder: &Ladder, side: Side) -> Box<dyn Iterator<Item = (&Ticks, &VecDeque<RestingOrder>)> + '_> {
    match side {
        Side::Buy => Box::new(ladder.iter().rev()),
        Side::Sell => Box::new(ladder.iter()),
    }
}

impl LimitOrderBook {
    pub fn new() -> Self {
        Self::default()
    }

    /// Seed a book from aggregate ladders; each level becomes one resting order
    /// with an id counting down from `u64::MAX`.
    pub fn from_levels(bids: &[(Ticks, Shares)], asks: &[(Ticks, Shares)]) -> Self {
        let mut book = Self::new();
        let mut id = u64::MAX;
        for (side, ladder) in [(Side::Buy, bids), (Side::Sell, asks)] {
            for &(price, size) in ladder {
                if size == 0 {
                    continue;
                }
                book.rest(side, price, RestingOrder {
                    order_id: id,
                    remaining: size,
                    seq: 0,
                    trader_type: TraderType::Individual,
                });
                id -= 1;
            }
        }
        book
    }

    fn ladder(&self, side: Side) -> &Ladder {
        match side {
            Side::Buy => &self.bids,
            Side::Sell => &self.asks,
        }
    }

    fn ladder_mut(&mut self, side: Side) -> &mut Ladder {
        match side {
            Side::Buy => &mut self.bids,
            Side::Sell => &mut self.asks,
        }
    }

    fn rest(&mut self, side: Side, price: Ticks, order: RestingOrder) {
        self.live.insert(order.order_id, (side, price));
        self.ladder_mut(side).entry(price).or_default().push_back(order);
    }

    pub fn best(&self, side: Side) -> Option<Ticks> {
        match side {
            Side::Buy => self.bids.keys().next_back().copied(),
            Side::Sell => self.asks.keys().next().copied(),
        }
    }

    pub fn quotes(&self) -> Quotes {
        let best_bid = self.best(Side::Buy);
        let best_ask = self.best(Side::Sell);
        let mid = match (best_bid, best_ask) {
            (Some(b), Some(a)) => Some(HalfTicks::midpoint(b, a)),
            _ => None,
        };
        Quotes { best_bid, best_ask, mid }
    }

    pub fn is_live(&self, order_id: u64) -> bool {
        self.live.contains_key(&order_id)
    }

    /// Side, price and queue entry of a live order.
    pub fn resting(&self, order_id: u64) -> Option<(Side, Ticks, &RestingOrder)> {
        let &(side, price) = self.live.get(&order_id)?;
        let order = self.ladder(side).get(&price)?.iter().find(|o| o.order_id == order_id)?;
        Some((side, price, order))
    }

    /// Remaining size of a live order.
    pub fn remaining(&self, order_id: u64) -> Option<Shares> {
        self.resting(order_id).map(|(_, _, o)| o.remaining)
    }

    pub fn live_count(&self) -> usize {
        self.live.len()
    }

    /// Ids of all live orders, ascending.
    pub fn live_ids(&self) -> Vec<u64> {
        let mut ids: Vec<u64> = self.live.keys().copied().collect();
        ids.sort_unstable();
        ids
    }

    pub fn total_volume(&self, side: Side) -> Shares {
        self.ladder(side).values().flatten().map(|o| o.remaining).sum()
    }

    /// Every resting order as (side, price, order), bids best-first then asks
    /// best-first, FIFO within a level.
    pub fn resting_orders(&self) -> Vec<(Side, Ticks, RestingOrder)> {
        let mut out = Vec::with_capacity(self.live.len());
        for side in [Side::Buy, Side::Sell] {
            for (price, queue) in levels_of(self.ladder(side), side) {
                out.extend(queue.iter().map(|o| (side, *price, o.clone())));
            }
        }
        out
    }

    /// Apply one event, returning the trades it caused.
    ///
    /// A rejected event leaves the book unchanged.
    pub fn apply_event(&mut self, ev: &OrderEvent) -> Result<Vec<Trade>, BookError> {
        match ev.action {
            Action::Cancel => {
                self.cancel(ev.order_id)?;
                Ok(Vec::new())
            }
            Action::Submit => self.submit(ev),
        }
    }

    fn cancel(&mut self, order_id: u64) -> Result<Shares, BookError> {
        let (side, price) = self.live.remove(&order_id).ok_or(BookError::UnknownOrder { order_id })?;
        let ladder = self.ladder_mut(side);
        let queue = ladder.get_mut(&price).expect("live index points at a level");
        let pos = queue
            .iter()
            .position(|o| o.order_id == order_id)
            .expect("live index points at a queued order");
        let removed = queue.remove(pos).expect("position is in range");
        if queue.is_empty() {
            ladder.remove(&price);
        }
        Ok(removed.remaining)
    }

    fn submit(&mut self, ev: &OrderEvent) -> Result<Vec<Trade>, BookError> {
        if ev.price <= 0 || ev.size == 0 {
            return Err(BookError::InvalidSubmit { order_id: ev.order_id });
        }
        if self.live.contains_key(&ev.order_id) {
            return Err(BookError::DuplicateOrder { order_id: ev.order_id });
        }
        let side = ev.side;
        let mut remaining = ev.size;
        let mut trades = Vec::new();
        let crosses = |level: Ticks| match side {
            Side::Buy => level <= ev.price,
            Side::Sell => level >= ev.price,
        };

        while remaining > 0 {
            let Some(level) = self.best(side.opposite()) else { break };
            if !crosses(level) {
                break;
            }
            let (ladder, live) = match side {
                Side::Buy => (&mut self.asks, &mut self.live),
                Side::Sell => (&mut self.bids, &mut self.live),
            };
            let queue = ladder.get_mut(&level).expect("best level exists");
            while remaining > 0 {
                let Some(head) = queue.front_mut() else { break };
                let fill = remaining.min(head.remaining);
                trades.push(Trade {
                    seq: ev.seq,
                    timestamp_ms: ev.timestamp_ms,
                    price: level,
                    size: fill,
                    aggressor_side: side,
                    aggressor_order_id: ev.order_id,
                    resting_order_id: head.order_id,
                    aggressor_trader_type: ev.trader_type,
                });
                remaining -= fill;
                head.remaining -= fill;
                if head.remaining == 0 {
                    live.remove(&head.order_id);
                    queue.pop_front();
                }
            }
            if queue.is_empty() {
                ladder.remove(&level);
            }
        }

        if remaining > 0 {
            self.rest(side, ev.price, RestingOrder {
                order_id: ev.order_id,
                remaining,
                seq: ev.seq,
                trader_type: ev.trader_type,
            });
        }
        Ok(trades)
    }

    /// Structure variable for an aggressor on `side` consuming `volume` shares
    /// from the opposite ladder of the current book.
    ///
    /// The last level contributes only the part of its volume needed to reach
    /// `volume`.
    pub fn compute_c(&self, side: Side, volume: Shares) -> Result<BookStructureValue, StructureError> {
        let mid = self.quotes().mid.ok_or(StructureError::UndefinedMid)?;
        let opposite = side.opposite();
        let mut need = volume;
        let mut c_half: i128 = 0;
        let mut levels = 0;
        for (price, queue) in levels_of(self.ladder(opposite), opposite) {
            if need == 0 {
                break;
            }
            let level_volume: Shares = queue.iter().map(|o| o.remaining).sum();
            let take = need.min(level_volume);
            let gap = match side {
                Side::Buy => 2 * price - mid.0,
                Side::Sell => mid.0 - 2 * price,
            };
            c_half += gap as i128 * take as i128;
            need -= take;
            levels += 1;
        }
        if need > 0 {
            return Err(StructureError::InsufficientDepth {
                requested: volume,
                available: self.total_volume(opposite),
            });
        }
        Ok(BookStructureValue { c_half, levels, side, volume, mid })
    }

    /// Top `n_levels` price levels per side with aggregate volume.
    pub fn depth_snapshot(&self, n_levels: usize) -> DepthSnapshot {
        let agg = |side: Side| -> Vec<(Ticks, Shares)> {
            levels_of(self.ladder(side), side)
                .take(n_levels)
                .map(|(p, q)| (*p, q.iter().map(|o| o.remaining).sum()))
                .collect()
        };
        DepthSnapshot { bids: agg(Side::Buy), asks: agg(Side::Sell) }
    }

    /// Check the resting-book invariants; used by tests and debug replays.
    pub fn check_invariants(&self) -> Result<(), String> {
        if let (Some(b), Some(a)) = (self.best(Side::Buy), self.best(Side::Sell)) {
            if b >= a {
                return Err(format!("crossed book: bid {b} >= ask {a}"));
            }
        }
        let mut count = 0;
        for side in [Side::Buy, Side::Sell] {
            for (price, queue) in self.ladder(side) {
                if queue.is_empty() {
                    return Err(format!("empty level at {price}"));
                }
                let mut last_seq = None;
                for o in queue {
                    if o.remaining == 0 {
                        return Err(format!("order {} rests with zero size", o.order_id));
                    }
                    if let Some(prev) = last_seq {
                        if o.seq < prev {
                            return Err(format!("queue at {price} not FIFO"));
                        }
                    }
                    last_seq = Some(o.seq);
                    if self.live.get(&o.order_id) != Some(&(side, *price)) {
                        return Err(format!("live index out of sync for {}", o.order_id));
                    }
                    count += 1;
                }
            }
        }
        if count != self.live.len() {
            return Err("live index has stale entries".into());
        }
        Ok(())
    }
}

/// Classify a submission from the trades it caused on arrival.
pub fn classify_order(event: &OrderEvent, trades: &[Trade]) -> OrderClass {
    if trades.is_empty() {
        return OrderClass::PassiveLimit;
    }
    let executed: Shares = trades.iter().map(|t| t.size).sum();
    OrderClass::EffectiveMarket { full_filled: executed == event.size }
}
