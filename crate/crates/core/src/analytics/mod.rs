//! Estimators over tick data: transaction cost and pricing error, lagged
//! cross-security price response with trader-class attribution, return
//! correlations, HFT activity and the correlation-network spanning tree.

mod correlation;
mod cost;
mod mst;
mod response;

pub use correlation::{
    correlation_matrix, hft_fraction, index_correlation, ols_fit, returns, OlsFit, ReturnsMatrix,
};
pub use cost::{trade_cost_error, CostErrorReport, CostGroup, TradeCost};
pub use mst::{correlation_distance, mst, MstEdge, MstEdges};
pub use response::{
    decompose_response, price_response, price_response_all_pairs, ResponseComponents, ResponseCurve,
    DEFAULT_WINDOW_MS, MIN_EVENTS,
};

use crate::model::ModelError;
use crate::tick::{TickSeries, TraderClass};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalyticsError {
    #[error("empty input: {0}")]
    EmptyInput(String),
    #[error("unknown symbol `{0}`")]
    UnknownSymbol(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("only {found} conditioning events, at least {required} required")]
    InsufficientEvents { found: usize, required: usize },
    #[error("response plateau {plateau:.6e} is not significantly positive (standard error {std_err:.6e})")]
    DegenerateNormalization { plateau: f64, std_err: f64 },
    #[error("only {found} jointly observed cells for `{a}` and `{b}`")]
    InsufficientOverlap { a: String, b: String, found: usize },
    #[error("division by zero: {0}")]
    DivisionByZero(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

pub(crate) fn seconds_to_ns(seconds: f64) -> i64 {
    (seconds * 1e9).round() as i64
}

/// Quotes and trades of one symbol in record order.
#[derive(Debug, Default)]
pub(crate) struct SymbolBook {
    quote_ts: Vec<i64>,
    mids: Vec<f64>,
    trade_ts: Vec<i64>,
    trade_class: Vec<Option<TraderClass>>,
}

impl SymbolBook {
    pub(crate) fn build(ticks: &TickSeries, symbol: &str) -> Option<Self> {
        let mut book = SymbolBook::default();
        let mut found = false;
        for rec in ticks.records().iter().filter(|r| r.symbol == symbol) {
            found = true;
            if let Some(mid) = rec.midpoint() {
                book.quote_ts.push(rec.ts_ns);
                book.mids.push(mid);
            } else if rec.is_trade() {
                book.trade_ts.push(rec.ts_ns);
                book.trade_class.push(rec.trader_class);
            }
        }
        found.then_some(book)
    }

    /// Midpoint after every quote stamped at or before `t`.
    pub(crate) fn mid_at_or_before(&self, t: i64) -> Option<f64> {
        let idx = self.quote_ts.partition_point(|&ts| ts <= t);
        idx.checked_sub(1).map(|k| self.mids[k])
    }

    pub(crate) fn mid_strictly_before(&self, t: i64) -> Option<f64> {
        let idx = self.quote_ts.partition_point(|&ts| ts < t);
        idx.checked_sub(1).map(|k| self.mids[k])
    }

    pub(crate) fn first_mid_at_or_after(&self, t: i64) -> Option<f64> {
        let idx = self.quote_ts.partition_point(|&ts| ts < t);
        self.mids.get(idx).copied()
    }

    /// Nonzero midpoint changes `(ts, delta)` between consecutive quotes.
    pub(crate) fn changes(&self) -> Vec<(i64, f64)> {
        self.mids
            .windows(2)
            .zip(&self.quote_ts[1..])
            .filter_map(|(w, &ts)| {
                let delta = w[1] - w[0];
                (delta != 0.0).then_some((ts, delta))
            })
            .collect()
    }

    /// Class of the latest trade within `window_ns` at or before `t`.
    pub(crate) fn recent_trade_class(&self, t: i64, window_ns: i64) -> TraderClass {
        let idx = self.trade_ts.partition_point(|&ts| ts <= t);
        match idx.checked_sub(1) {
            Some(k) if t - self.trade_ts[k] <= window_ns => {
                self.trade_class[k].unwrap_or(TraderClass::Uncategorized)
            }
            _ => TraderClass::Uncategorized,
        }
    }
}
