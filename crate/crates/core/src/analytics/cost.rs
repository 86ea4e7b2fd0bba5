use super::{seconds_to_ns, AnalyticsError, SymbolBook};
use crate::model::Side;
use crate::tick::{Price, TickSeries, TraderClass};
use std::collections::BTreeMap;

#[derive(Debug, Clone, PartialEq)]
pub struct TradeCost {
    pub ts_ns: i64,
    pub symbol: String,
    pub side: Side,
    pub trader_class: Option<TraderClass>,
    pub price: Price,
    pub prevailing_mid: f64,
    pub horizon_mid: f64,
    pub cost: f64,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CostGroup {
    /// `all`, `side=buy`, `class=N`, `class=N/side=buy`, ...
    pub label: String,
    pub count: usize,
    pub mean_cost: f64,
    pub se_cost: f64,
    pub mean_error: f64,
    pub se_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CostErrorReport {
    pub trades: Vec<TradeCost>,
    /// Trades without a quote strictly before them.
    pub no_prior_quote: usize,
    /// Trades without a quote at or after `ts + horizon`.
    pub no_horizon_quote: usize,
    pub groups: Vec<CostGroup>,
}

impl CostErrorReport {
    pub fn group(&self, label: &str) -> Option<&CostGroup> {
        self.groups.iter().find(|g| g.label == label)
    }
}

/// Cost against the prevailing midpoint and absolute error against the
/// midpoint `horizon_s` seconds later, per trade. Buys cost `p - m`, sells
/// `m - p`. Both are divided by `vol_divisor` when given.
pub fn trade_cost_error(
    ticks: &TickSeries,
    horizon_s: f64,
    vol_divisor: Option<f64>,
) -> Result<CostErrorReport, AnalyticsError> {
    if !(horizon_s.is_finite() && horizon_s >= 0.0) {
        return Err(AnalyticsError::InvalidArgument(format!("horizon must be >= 0, got {horizon_s}")));
    }
    let divisor = match vol_divisor {
        None => 1.0,
        Some(v) if v.is_finite() && v > 0.0 => v,
        Some(v) => return Err(AnalyticsError::InvalidArgument(format!("volatility divisor must be > 0, got {v}"))),
    };
    if !ticks.records().iter().any(|r| r.is_trade()) {
        return Err(AnalyticsError::EmptyInput("no trade records".into()));
    }
    let horizon = seconds_to_ns(horizon_s);
    let books: BTreeMap<String, SymbolBook> = ticks
        .symbols()
        .into_iter()
        .filter_map(|s| SymbolBook::build(ticks, &s).map(|b| (s, b)))
        .collect();

    let mut report = CostErrorReport {
        trades: Vec::new(),
        no_prior_quote: 0,
        no_horizon_quote: 0,
        groups: Vec::new(),
    };
    for rec in ticks.records().iter().filter(|r| r.is_trade()) {
        let book = &books[&rec.symbol];
        let (side, price) = (rec.side.expect("validated trade"), rec.price.expect("validated trade"));
        let Some(prevailing) = book.mid_strictly_before(rec.ts_ns) else {
            report.no_prior_quote += 1;
            continue;
        };
        let Some(later) = book.first_mid_at_or_after(rec.ts_ns + horizon) else {
            report.no_horizon_quote += 1;
            continue;
        };
        let p = price.to_f64();
        report.trades.push(TradeCost {
            ts_ns: rec.ts_ns,
            symbol: rec.symbol.clone(),
            side,
            trader_class: rec.trader_class,
            price,
            prevailing_mid: prevailing,
            horizon_mid: later,
            cost: side.sign() * (p - prevailing) / divisor,
            error: (p - later).abs() / divisor,
        });
    }
    report.groups = summarize(&report.trades);
    Ok(report)
}

fn summarize(trades: &[TradeCost]) -> Vec<CostGroup> {
    let class_label = |c: Option<TraderClass>| c.map_or("-".to_string(), |c| c.code().to_string());
    let mut groups = vec![group("all".into(), trades.iter())];
    for side in [Side::Buy, Side::Sell] {
        groups.push(group(format!("side={side}"), trades.iter().filter(|t| t.side == side)));
    }
    let classes = [
        Some(TraderClass::Hft),
        Some(TraderClass::NonHft),
        Some(TraderClass::Uncategorized),
        None,
    ];
    for class in classes {
        let label = class_label(class);
        groups.push(group(format!("class={label}"), trades.iter().filter(|t| t.trader_class == class)));
        for side in [Side::Buy, Side::Sell] {
            groups.push(group(
                format!("class={label}/side={side}"),
                trades.iter().filter(|t| t.trader_class == class && t.side == side),
            ));
        }
    }
    groups.retain(|g| g.count > 0);
    groups
}

fn group<'a>(label: String, trades: impl Iterator<Item = &'a TradeCost>) -> CostGroup {
    let (costs, errors): (Vec<f64>, Vec<f64>) = trades.map(|t| (t.cost, t.error)).unzip();
    let (mean_cost, se_cost) = mean_se(&costs);
    let (mean_error, se_error) = mean_se(&errors);
    CostGroup {
        label,
        count: costs.len(),
        mean_cost,
        se_cost,
        mean_error,
        se_error,
    }
}

pub(crate) fn mean_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tick::TickRecord;

    fn q(ts: i64, mid: f64) -> TickRecord {
        TickRecord::quote(ts, "A", Price::from_f64(mid - 0.01), Price::from_f64(mid + 0.01))
    }

    fn t(ts: i64, side: Side, price: f64) -> TickRecord {
        TickRecord::trade(ts, "A", side, Price::from_f64(price), 100, Some(TraderClass::NonHft))
    }

    #[test]
    fn trade_at_midpoint_costs_nothing() {
        let ticks = TickSeries::new(vec![q(0, 50.0), t(10, Side::Buy, 50.0), q(2_000_000_000, 50.2)]).unwrap();
        let r = trade_cost_error(&ticks, 1.0, None).unwrap();
        assert_eq!(r.trades.len(), 1);
        assert_eq!(r.trades[0].cost, 0.0);
        assert!((r.trades[0].error - 0.2).abs() < 1e-12);
    }

    #[test]
    fn sign_conventions_and_divisor() {
        let ticks = TickSeries::new(vec![
            q(0, 50.0),
            t(10, Side::Buy, 50.5),
            t(20, Side::Sell, 49.75),
            q(100, 51.0),
        ])
        .unwrap();
        let r = trade_cost_error(&ticks, 0.0, Some(2.0)).unwrap();
        assert!((r.trades[0].cost - 0.25).abs() < 1e-12);
        assert!((r.trades[1].cost - 0.125).abs() < 1e-12);
        assert!((r.trades[1].error - 0.625).abs() < 1e-12);
        assert_eq!(r.group("side=buy").unwrap().count, 1);
        assert_eq!(r.group("class=N/side=sell").unwrap().count, 1);
        assert!(r.group("class=H").is_none());
    }

    #[test]
    fn unbracketed_trades_are_tallied() {
        let ticks = TickSeries::new(vec![t(0, Side::Buy, 50.0), q(5, 50.0), t(10, Side::Buy, 50.1)]).unwrap();
        let r = trade_cost_error(&ticks, 1.0, None).unwrap();
        assert_eq!(r.no_prior_quote, 1);
        assert_eq!(r.no_horizon_quote, 1);
        assert!(r.trades.is_empty());
    }

    #[test]
    fn rejects_quote_only_input() {
        let ticks = TickSeries::new(vec![q(0, 50.0)]).unwrap();
        assert!(matches!(trade_cost_error(&ticks, 1.0, None), Err(AnalyticsError::EmptyInput(_))));
        assert!(trade_cost_error(&ticks, -1.0, None).is_err());
    }
}
