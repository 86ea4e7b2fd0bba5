use super::{Market, MarketMetrics, MetricsQuery, Regime, SimError, MAX_EXACT_DIM};
use crate::model::{CorrelationMatrix, SecuritySpec};
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    /// Every off-diagonal correlation set to the grid value.
    Rho,
    /// Every security's `phi` set to the grid value.
    Phi,
}

impl fmt::Display for SweepParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SweepParam::Rho => "rho",
            SweepParam::Phi => "phi",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Exact,
    MonteCarlo,
}

impl Method {
    pub fn label(self) -> &'static str {
        match self {
            Method::Exact => "exact",
            Method::MonteCarlo => "mc",
        }
    }
}

/// Monte Carlo settings for markets too large to enumerate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SweepOptions {
    pub samples: u64,
    pub seed: u64,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            samples: 100_000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub value: f64,
    pub regime: Regime,
    pub method: Method,
    /// `Err` carries the reason a grid point was skipped.
    pub result: Result<MarketMetrics, String>,
}

/// One row per grid point and regime (synchronized first). Infeasible grid
/// points are kept as skipped rows.
pub fn sweep(
    specs: &[SecuritySpec],
    rho: &CorrelationMatrix,
    param: SweepParam,
    grid: &[f64],
    query: &MetricsQuery,
    options: SweepOptions,
) -> Vec<SweepRow> {
    let n = specs.len();
    let method = if n <= MAX_EXACT_DIM { Method::Exact } else { Method::MonteCarlo };
    let mut rows = Vec::with_capacity(grid.len() * 2);
    for &value in grid {
        let market = grid_market(specs, rho, param, value);
        for regime in [Regime::Synchronized, Regime::Unsynchronized] {
            let q = query.clone().with_regime(regime);
            let result = market.as_ref().map_err(|e| e.to_string()).and_then(|m| {
                match method {
                    Method::Exact => m.exact_metrics(&q),
                    Method::MonteCarlo => m.mc_metrics(&q, options.samples, options.seed),
                }
                .map_err(|e| e.to_string())
            });
            rows.push(SweepRow {
                value,
                regime,
                method,
                result,
            });
        }
    }
    rows
}

fn grid_market(specs: &[SecuritySpec], rho: &CorrelationMatrix, param: SweepParam, value: f64) -> Result<Market, SimError> {
    match param {
        SweepParam::Rho => Market::new(specs.to_vec(), CorrelationMatrix::uniform(specs.len(), value)?),
        SweepParam::Phi => {
            let specs = specs.iter().map(|s| s.with_phi(value)).collect::<Result<Vec<_>, _>>()?;
            Market::new(specs, rho.clone())
        }
    }
}
