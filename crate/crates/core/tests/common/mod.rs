//! Shared test support: a naive reference matcher and seeded random streams.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tickimpact::book::{LimitOrderBook, Trade};
use tickimpact::ingest::{Action, OrderEvent};
use tickimpact::types::{Shares, Side, Ticks, TraderType};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NaiveOrder {
    pub order_id: u64,
    pub side: Side,
    pub price: Ticks,
    pub remaining: Shares,
    pub seq: u64,
    pub trader_type: TraderType,
}

/// Reference matcher: one flat list in arrival order, scanned in full for
/// the best opposite order before every fill.
#[derive(Debug, Clone, Default)]
pub struct NaiveBook {
    pub orders: Vec<NaiveOrder>,
    pub canceled: Shares,
}

impl NaiveBook {
    fn better(side: Side, a: Ticks, b: Ticks) -> bool {
        match side {
            Side::Buy => a > b,
            Side::Sell => a < b,
        }
    }

    /// Index of the highest-priority resting order on `side`: best price,
    /// then earliest arrival.
    fn best_index(&self, side: Side) -> Option<usize> {
        let mut best: Option<usize> = None;
        for (i, o) in self.orders.iter().enumerate() {
            if o.side != side {
                continue;
            }
            if best.is_none_or(|b| Self::better(side, o.price, self.orders[b].price)) {
                best = Some(i);
            }
        }
        best
    }

    pub fn is_live(&self, order_id: u64) -> bool {
        self.orders.iter().any(|o| o.order_id == order_id)
    }

    pub fn apply(&mut self, ev: &OrderEvent) -> Option<Vec<Trade>> {
        match ev.action {
            Action::Cancel => {
                let i = self.orders.iter().position(|o| o.order_id == ev.order_id)?;
                self.canceled += self.orders.remove(i).remaining;
                Some(Vec::new())
            }
            Action::Submit => {
                if ev.price <= 0 || ev.size == 0 || self.is_live(ev.order_id) {
                    return None;
                }
                let mut remaining = ev.size;
                let mut trades = Vec::new();
                while remaining > 0 {
                    let Some(i) = self.best_index(ev.side.opposite()) else { break };
                    let level = self.orders[i].price;
                    let crosses = match ev.side {
                        Side::Buy => level <= ev.price,
                        Side::Sell => level >= ev.price,
                    };
                    if !crosses {
                        break;
                    }
                    let fill = remaining.min(self.orders[i].remaining);
                    trades.push(Trade {
                        seq: ev.seq,
                        timestamp_ms: ev.timestamp_ms,
                        price: level,
                        size: fill,
                        aggressor_side: ev.side,
                        aggressor_order_id: ev.order_id,
                        resting_order_id: self.orders[i].order_id,
                        aggressor_trader_type: ev.trader_type,
                    });
                    remaining -= fill;
                    self.orders[i].remaining -= fill;
                    if self.orders[i].remaining == 0 {
                        self.orders.remove(i);
                    }
                }
                if remaining > 0 {
                    self.orders.push(NaiveOrder {
                        order_id: ev.order_id,
                        side: ev.side,
                        price: ev.price,
                        remaining,
                        seq: ev.seq,
                        trader_type: ev.trader_type,
                    });
                }
                Some(trades)
            }
        }
    }

    /// Resting orders as (side, price, id, remaining), bids best-first then
    /// asks best-first, arrival order within a price.
    pub fn state(&self) -> Vec<(Side, Ticks, u64, Shares)> {
        let mut out = Vec::new();
        for side in [Side::Buy, Side::Sell] {
            let mut own: Vec<&NaiveOrder> = self.orders.iter().filter(|o| o.side == side).collect();
            // Stable sort keeps arrival order within a price.
            own.sort_by_key(|o| if side == Side::Buy { -o.price } else { o.price });
            out.extend(own.into_iter().map(|o| (side, o.price, o.order_id, o.remaining)));
        }
        out
    }

    pub fn total_volume(&self) -> Shares {
        self.orders.iter().map(|o| o.remaining).sum()
    }
}

pub fn book_state(book: &LimitOrderBook) -> Vec<(Side, Ticks, u64, Shares)> {
    book.resting_orders().into_iter().map(|(s, p, o)| (s, p, o.order_id, o.remaining)).collect()
}

pub fn event(seq: u64, order_id: u64, tt: TraderType, side: Side, action: Action, price: Ticks, size: Shares) -> OrderEvent {
    OrderEvent {
        stock_code: "000001".into(),
        seq,
        timestamp_ms: 34_200_000 + 100 * seq as i64,
        order_id,
        trader_id: String::new(),
        trader_type: tt,
        side,
        action,
        price,
        size,
    }
}

/// A seeded stream of `n` events around a drifting price. Cancels mostly
/// target live orders, with the cancel rate rising with the live count so the
/// book stays a few hundred orders deep. A small share of events is invalid
/// (dead cancels, reused live ids, zero sizes) to exercise rejection.
pub fn random_stream(seed: u64, n: usize) -> Vec<OrderEvent> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut mirror = NaiveBook::default();
    let mut center: Ticks = 1000;
    let mut next_id = 1u64;
    let mut events = Vec::with_capacity(n);
    for i in 0..n {
        let seq = i as u64 + 1;
        let live = mirror.orders.len();
        let ev = if live > 0 && rng.random_bool(live as f64 / (live as f64 + 200.0)) {
            let id = if rng.random_bool(0.03) {
                rng.random_range(1..next_id + 5)
            } else {
                mirror.orders[rng.random_range(0..live)].order_id
            };
            event(seq, id, TraderType::Individual, Side::Buy, Action::Cancel, 0, 0)
        } else {
            if rng.random_bool(0.2) {
                center += rng.random_range(-1..=1);
                center = center.clamp(900, 1100);
            }
            let side = if rng.random_bool(0.5) { Side::Buy } else { Side::Sell };
            let tt = if rng.random_bool(0.05) { TraderType::Institution } else { TraderType::Individual };
            let offset = rng.random_range(-4..=8);
            let price = match side {
                Side::Buy => center - offset,
                Side::Sell => center + offset,
            };
            let size = match rng.random_range(0..100) {
                0 => 0,
                1..=40 => 100 * rng.random_range(1..=10),
                _ => rng.random_range(1..=1500),
            };
            let id = if live > 0 && rng.random_bool(0.005) {
                mirror.orders[rng.random_range(0..live)].order_id
            } else {
                next_id += 1;
                next_id - 1
            };
            event(seq, id, tt, side, Action::Submit, price, size)
        };
        mirror.apply(&ev);
        events.push(ev);
    }
    events
}
