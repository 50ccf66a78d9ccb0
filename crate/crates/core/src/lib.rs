//! Order-book replay and institutional price-impact analytics.
//!
//! The pipeline runs in stages:
//!
//! 1. [`ingest`] parses order-event, corporate-action and summary CSV files.
//! 2. [`book`] rebuilds the limit order book under price-time priority and
//!    measures the structure variable C; [`replay`] drives it per stock-day.
//! 3. [`series`] adjusts daily closes and splits them into drawups/drawdowns.
//! 4. [`impact`] computes price impact, trade returns, prior volatility and
//!    event-study tables.
//! 5. [`stats`] and [`regression`] supply the tests and the impact regression.
//! 6. [`synth`] generates seeded order flow and close series for validation.
//! 7. [`pipeline`] and [`report`] wire the stages into reproducible reports.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod book;
pub mod impact;
pub mod ingest;
pub mod regression;
pub mod replay;
pub mod pipeline;
pub mod report;
pub mod series;
pub mod stats;
pub mod synth;
pub mod tables;
pub mod types;

pub use book::{BookStructureValue, LimitOrderBook, Trade};
pub use ingest::{CorporateAction, OrderEvent};
pub use types::{HalfTicks, Shares, Side, Ticks, TraderType};
