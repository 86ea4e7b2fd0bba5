use super::{seconds_to_ns, AnalyticsError, SymbolBook};
use crate::model::CorrelationMatrix;
use crate::tick::{TickSeries, TraderClass};

/// Log midpoint returns on a common time grid. `returns[s][k]` covers
/// `[start + k dt, start + (k + 1) dt)`; `None` marks a cell without quotes
/// on both ends.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnsMatrix {
    pub dt_s: f64,
    pub start_ns: i64,
    pub symbols: Vec<String>,
    pub returns: Vec<Vec<Option<f64>>>,
}

impl ReturnsMatrix {
    pub fn cells(&self) -> usize {
        self.returns.first().map_or(0, Vec::len)
    }

    pub fn symbol_index(&self, symbol: &str) -> Result<usize, AnalyticsError> {
        self.symbols
            .iter()
            .position(|s| s == symbol)
            .ok_or_else(|| AnalyticsError::UnknownSymbol(symbol.to_string()))
    }
}

/// Samples each symbol's last midpoint strictly before every gridpoint.
pub fn returns(ticks: &TickSeries, dt_s: f64) -> Result<ReturnsMatrix, AnalyticsError> {
    if !(dt_s.is_finite() && dt_s > 0.0) || seconds_to_ns(dt_s) < 1 {
        return Err(AnalyticsError::InvalidArgument(format!("sampling interval must be > 0, got {dt_s}")));
    }
    let dt_ns = seconds_to_ns(dt_s);
    let quote_ts = ticks.records().iter().filter(|r| !r.is_trade()).map(|r| r.ts_ns);
    let (Some(start), Some(end)) = (quote_ts.clone().min(), quote_ts.max()) else {
        return Err(AnalyticsError::EmptyInput("no quote records".into()));
    };
    let cells = ((end - start) / dt_ns + 1) as usize;
    let symbols = ticks.symbols();
    let returns = symbols
        .iter()
        .map(|s| {
            let book = SymbolBook::build(ticks, s).expect("symbol present");
            let levels: Vec<Option<f64>> = (0..=cells as i64)
                .map(|k| book.mid_strictly_before(start + k * dt_ns))
                .collect();
            levels
                .windows(2)
                .map(|w| match (w[0], w[1]) {
                    (Some(a), Some(b)) if a > 0.0 && b > 0.0 => Some((b / a).ln()),
                    _ => None,
                })
                .collect()
        })
        .collect();
    Ok(ReturnsMatrix {
        dt_s,
        start_ns: start,
        symbols,
        returns,
    })
}

fn pearson(a: &str, b: &str, pairs: &[(f64, f64)]) -> Result<f64, AnalyticsError> {
    if pairs.len() < 2 {
        return Err(AnalyticsError::InsufficientOverlap {
            a: a.to_string(),
            b: b.to_string(),
            found: pairs.len(),
        });
    }
    let n = pairs.len() as f64;
    let mx = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pairs.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for &(x, y) in pairs {
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
        sxy += (x - mx) * (y - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(AnalyticsError::DivisionByZero(format!("`{a}` or `{b}` has constant returns")));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Pairwise-complete Pearson correlation of the return columns.
pub fn correlation_matrix(rm: &ReturnsMatrix) -> Result<CorrelationMatrix, AnalyticsError> {
    let n = rm.symbols.len();
    if n == 0 {
        return Err(AnalyticsError::EmptyInput("no symbols".into()));
    }
    let mut entries = vec![0.0; n * n];
    for i in 0..n {
        entries[i * n + i] = 1.0;
        for j in i + 1..n {
            let pairs: Vec<(f64, f64)> = rm.returns[i]
                .iter()
                .zip(&rm.returns[j])
                .filter_map(|(a, b)| Some(((*a)?, (*b)?)))
                .collect();
            let r = pearson(&rm.symbols[i], &rm.symbols[j], &pairs)?;
            entries[i * n + j] = r;
            entries[j * n + i] = r;
        }
    }
    Ok(CorrelationMatrix::new(n, entries)?)
}

/// Correlation of symbol `i` with the equal-weighted mean return of all
/// symbols observed in each cell.
pub fn index_correlation(rm: &ReturnsMatrix, i: usize) -> Result<f64, AnalyticsError> {
    let own = rm
        .returns
        .get(i)
        .ok_or_else(|| AnalyticsError::InvalidArgument(format!("symbol index {i} out of range")))?;
    let pairs: Vec<(f64, f64)> = (0..rm.cells())
        .filter_map(|k| {
            let x = own[k]?;
            let seen: Vec<f64> = rm.returns.iter().filter_map(|col| col[k]).collect();
            Some((x, seen.iter().sum::<f64>() / seen.len() as f64))
        })
        .collect();
    pearson(&rm.symbols[i], "index", &pairs)
}

/// Share of traded volume in `symbol` initiated by HFT.
pub fn hft_fraction(ticks: &TickSeries, symbol: &str) -> Result<f64, AnalyticsError> {
    let trades: Vec<_> = ticks
        .records()
        .iter()
        .filter(|r| r.is_trade() && r.symbol == symbol)
        .collect();
    if trades.is_empty() {
        return Err(AnalyticsError::EmptyInput(format!("no trades in `{symbol}`")));
    }
    let volume = |pred: &dyn Fn(&&&crate::tick::TickRecord) -> bool| -> u64 {
        trades.iter().filter(pred).map(|r| r.size.unwrap_or(0)).sum()
    };
    let total = volume(&|_| true);
    if total == 0 {
        return Err(AnalyticsError::DivisionByZero(format!("zero traded volume in `{symbol}`")));
    }
    let hft = volume(&|r| r.trader_class == Some(TraderClass::Hft));
    Ok(hft as f64 / total as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OlsFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub correlation: f64,
}

pub fn ols_fit(x: &[f64], y: &[f64]) -> Result<OlsFit, AnalyticsError> {
    if x.len() != y.len() {
        return Err(AnalyticsError::InvalidArgument(format!("{} x values but {} y values", x.len(), y.len())));
    }
    let pairs: Vec<(f64, f64)> = x.iter().copied().zip(y.iter().copied()).collect();
    let correlation = pearson("x", "y", &pairs)?;
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = pairs.iter().map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    Ok(OlsFit {
        slope,
        intercept: my - slope * mx,
        r_squared: correlation * correlation,
        correlation,
    })
}
