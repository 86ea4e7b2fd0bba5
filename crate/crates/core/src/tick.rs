//! Trade and quote records shared by the tick generator, the estimators and
//! the CSV codec.

use crate::model::Side;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

const MICROS: i64 = 1_000_000;

/// Decimal price with six fractional digits, stored as integer micro-units.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Price(i64);

impl Price {
    pub fn from_micros(micros: i64) -> Self {
        Self(micros)
    }

    /// Rounds to the nearest micro-unit.
    pub fn from_f64(value: f64) -> Self {
        Self((value * MICROS as f64).round() as i64)
    }

    pub fn micros(self) -> i64 {
        self.0
    }

    pub fn to_f64(self) -> f64 {
        self.0 as f64 / MICROS as f64
    }
}

impl fmt::Display for Price {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.0 < 0 { "-" } else { "" };
        let abs = self.0.unsigned_abs();
        let (int, frac) = (abs / MICROS as u64, abs % MICROS as u64);
        if frac == 0 {
            return write!(f, "{sign}{int}");
        }
        let digits = format!("{frac:06}");
        write!(f, "{sign}{int}.{}", digits.trim_end_matches('0'))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid price {0:?}: expected a decimal with at most 6 fractional digits")]
pub struct PriceParseError(pub String);

impl FromStr for Price {
    type Err = PriceParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || PriceParseError(s.to_string());
        let (negative, body) = match s.strip_prefix('-') {
            Some(rest) => (true, rest),
            None => (false, s),
        };
        let (int, frac) = body.split_once('.').unwrap_or((body, ""));
        let digits = |t: &str| !t.is_empty() && t.bytes().all(|b| b.is_ascii_digit());
        if !digits(int) || frac.len() > 6 || (body.contains('.') && !digits(frac)) {
            return Err(err());
        }
        let int: i64 = int.parse().map_err(|_| err())?;
        let frac_micros: i64 = if frac.is_empty() {
            0
        } else {
            format!("{frac:0<6}").parse().map_err(|_| err())?
        };
        let micros = int
            .checked_mul(MICROS)
            .and_then(|v| v.checked_add(frac_micros))
            .ok_or_else(err)?;
        Ok(Self(if negative { -micros } else { micros }))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EventKind {
    Trade,
    Quote,
}

/// Who initiated a trade: high-frequency, other, or not classified.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TraderClass {
    Hft,
    NonHft,
    Uncategorized,
}

impl TraderClass {
    pub fn code(self) -> char {
        match self {
            TraderClass::Hft => 'H',
            TraderClass::NonHft => 'N',
            TraderClass::Uncategorized => 'U',
        }
    }

    pub fn from_code(code: &str) -> Option<Self> {
        match code {
            "H" => Some(TraderClass::Hft),
            "N" => Some(TraderClass::NonHft),
            "U" => Some(TraderClass::Uncategorized),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TickRecord {
    pub ts_ns: i64,
    pub symbol: String,
    pub event: EventKind,
    pub side: Option<Side>,
    pub price: Option<Price>,
    pub size: Option<u64>,
    pub trader_class: Option<TraderClass>,
    pub bid: Option<Price>,
    pub ask: Option<Price>,
}

impl TickRecord {
    pub fn quote(ts_ns: i64, symbol: impl Into<String>, bid: Price, ask: Price) -> Self {
        Self {
            ts_ns,
            symbol: symbol.into(),
            event: EventKind::Quote,
            side: None,
            price: None,
            size: None,
            trader_class: None,
            bid: Some(bid),
            ask: Some(ask),
        }
    }

    pub fn trade(
        ts_ns: i64,
        symbol: impl Into<String>,
        side: Side,
        price: Price,
        size: u64,
        trader_class: Option<TraderClass>,
    ) -> Self {
        Self {
            ts_ns,
            symbol: symbol.into(),
            event: EventKind::Trade,
            side: Some(side),
            price: Some(price),
            size: Some(size),
            trader_class,
            bid: None,
            ask: None,
        }
    }

    pub fn is_trade(&self) -> bool {
        self.event == EventKind::Trade
    }

    /// `(bid + ask) / 2` for quotes.
    pub fn midpoint(&self) -> Option<f64> {
        match (self.event, self.bid, self.ask) {
            (EventKind::Quote, Some(b), Some(a)) => Some((b.micros() + a.micros()) as f64 / 2.0 / MICROS as f64),
            _ => None,
        }
    }

    /// Checks the per-record invariants.
    pub fn validate(&self) -> Result<(), String> {
        match self.event {
            EventKind::Trade => {
                if self.side.is_none() || self.price.is_none() || self.size.is_none() {
                    return Err("trade record requires side, price and size".into());
                }
                if self.bid.is_some() || self.ask.is_some() {
                    return Err("trade record must not carry bid/ask".into());
                }
            }
            EventKind::Quote => {
                let (Some(bid), Some(ask)) = (self.bid, self.ask) else {
                    return Err("quote record requires bid and ask".into());
                };
                if bid > ask {
                    return Err(format!("bid {bid} exceeds ask {ask}"));
                }
                if self.side.is_some() || self.price.is_some() || self.size.is_some() || self.trader_class.is_some() {
                    return Err("quote record must not carry trade fields".into());
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TickError {
    #[error("record {index}: {message}")]
    InvalidRecord { index: usize, message: String },
    #[error("record {index}: timestamp {ts_ns} for `{symbol}` precedes the previous record of that symbol")]
    OutOfOrder { index: usize, symbol: String, ts_ns: i64 },
}

/// Ordered records with nondecreasing timestamps per symbol.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TickSeries {
    records: Vec<TickRecord>,
}

impl TickSeries {
    pub fn new(records: Vec<TickRecord>) -> Result<Self, TickError> {
        let mut last: HashMap<&str, i64> = HashMap::new();
        for (index, rec) in records.iter().enumerate() {
            rec.validate()
                .map_err(|message| TickError::InvalidRecord { index, message })?;
            if let Some(prev) = last.insert(&rec.symbol, rec.ts_ns) {
                if rec.ts_ns < prev {
                    return Err(TickError::OutOfOrder {
                        index,
                        symbol: rec.symbol.clone(),
                        ts_ns: rec.ts_ns,
                    });
                }
            }
        }
        Ok(Self { records })
    }

    pub fn records(&self) -> &[TickRecord] {
        &self.records
    }

    pub fn into_records(self) -> Vec<TickRecord> {
        self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Distinct symbols in lexicographic order.
    pub fn symbols(&self) -> Vec<String> {
        self.records
            .iter()
            .map(|r| r.symbol.as_str())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .map(str::to_string)
            .collect()
    }

    /// Records grouped by symbol, preserving order.
    pub fn by_symbol(&self) -> BTreeMap<&str, Vec<&TickRecord>> {
        let mut map: BTreeMap<&str, Vec<&TickRecord>> = BTreeMap::new();
        for rec in &self.records {
            map.entry(rec.symbol.as_str()).or_default().push(rec);
        }
        map
    }

    /// Copy with every trader-class flag removed.
    pub fn without_classes(&self) -> Self {
        let records = self
            .records
            .iter()
            .cloned()
            .map(|mut r| {
                r.trader_class = None;
                r
            })
            .collect();
        Self { records }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn price_text() {
        for (s, micros) in [("50", 50_000_000), ("50.4", 50_400_000), ("0.000001", 1), ("-1.25", -1_250_000)] {
            let p: Price = s.parse().unwrap();
            assert_eq!(p.micros(), micros);
            assert_eq!(p.to_string(), s);
        }
        assert!("1.0000001".parse::<Price>().is_err());
        assert!("abc".parse::<Price>().is_err());
        assert!("1.".parse::<Price>().is_err());
        assert!(".5".parse::<Price>().is_err());
        assert_eq!(Price::from_f64(50.399999999999), Price::from_micros(50_400_000));
    }

    #[test]
    fn series_invariants() {
        let q = |ts, s: &str| TickRecord::quote(ts, s, Price::from_f64(49.99), Price::from_f64(50.01));
        assert!(TickSeries::new(vec![q(1, "A"), q(0, "B"), q(2, "A")]).is_ok());
        assert!(matches!(
            TickSeries::new(vec![q(2, "A"), q(1, "A")]),
            Err(TickError::OutOfOrder { index: 1, .. })
        ));
        let crossed = TickRecord::quote(0, "A", Price::from_f64(50.1), Price::from_f64(50.0));
        assert!(TickSeries::new(vec![crossed]).is_err());
        assert_eq!(q(0, "A").midpoint(), Some(50.0));
    }
}
