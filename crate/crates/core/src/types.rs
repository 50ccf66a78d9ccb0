//! Primitive market types shared by every stage of the pipeline.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Integer price in exchange ticks.
pub type Ticks = i64;

/// Share count.
pub type Shares = u64;

/// Milliseconds since midnight of the trading day.
pub type Millis = i64;

/// Default tick size in CNY.
pub const DEFAULT_TICK_CNY: f64 = 0.01;

/// Default board lot in shares.
pub const DEFAULT_LOT: Shares = 100;

/// A price expressed in half-ticks, so that the midpoint of two tick prices is exact.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct HalfTicks(pub i64);

impl HalfTicks {
    pub fn from_ticks(price: Ticks) -> Self {
        HalfTicks(2 * price)
    }

    /// Midpoint of two tick prices.
    pub fn midpoint(bid: Ticks, ask: Ticks) -> Self {
        HalfTicks(bid + ask)
    }

    pub fn to_cny(self, tick_cny: f64) -> f64 {
        self.0 as f64 * tick_cny / 2.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Side {
    Buy,
    Sell,
}

impl Side {
    pub fn opposite(self) -> Side {
        match self {
            Side::Buy => Side::Sell,
            Side::Sell => Side::Buy,
        }
    }

    pub fn code(self) -> &'static str {
        match self {
            Side::Buy => "B",
            Side::Sell => "S",
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for Side {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "B" => Ok(Side::Buy),
            "S" => Ok(Side::Sell),
            other => Err(format!("unknown side {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TraderType {
    Institution,
    Individual,
}

impl TraderType {
    pub fn code(self) -> &'static str {
        match self {
            TraderType::Institution => "I",
            TraderType::Individual => "P",
        }
    }
}

impl fmt::Display for TraderType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for TraderType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "I" => Ok(TraderType::Institution),
            "P" => Ok(TraderType::Individual),
            other => Err(format!("unknown trader type {other:?}")),
        }
    }
}

/// Trading-session calendar for one day. Times are inclusive at both ends.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sessions {
    pub morning: (Millis, Millis),
    pub afternoon: (Millis, Millis),
}

pub const fn hms(h: i64, m: i64, s: i64) -> Millis {
    ((h * 60 + m) * 60 + s) * 1000
}

impl Default for Sessions {
    fn default() -> Self {
        Sessions {
            morning: (hms(9, 30, 0), hms(11, 30, 0)),
            afternoon: (hms(13, 0, 0), hms(15, 0, 0)),
        }
    }
}

impl Sessions {
    pub fn contains(&self, t: Millis) -> bool {
        (self.morning.0..=self.morning.1).contains(&t)
            || (self.afternoon.0..=self.afternoon.1).contains(&t)
    }

    /// The session containing `t`, if any.
    pub fn session_of(&self, t: Millis) -> Option<(Millis, Millis)> {
        [self.morning, self.afternoon]
            .into_iter()
            .find(|(open, close)| (*open..=*close).contains(&t))
    }

    /// Map an offset of continuous trading time onto the session clock.
    pub fn clock_from_offset(&self, offset: Millis) -> Option<Millis> {
        let morning_len = self.morning.1 - self.morning.0;
        let afternoon_len = self.afternoon.1 - self.afternoon.0;
        if offset < 0 {
            None
        } else if offset <= morning_len {
            Some(self.morning.0 + offset)
        } else if offset - morning_len <= afternoon_len {
            Some(self.afternoon.0 + offset - morning_len)
        } else {
            None
        }
    }

    pub fn total_len(&self) -> Millis {
        (self.morning.1 - self.morning.0) + (self.afternoon.1 - self.afternoon.0)
    }
}
