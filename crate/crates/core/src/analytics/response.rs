//! Lagged response of symbol `i`'s midpoint to midpoint moves of `j`.
//!
//! Every nonzero midpoint change of `j` at time `t` with direction `e` is a
//! conditioning event. For lags `tau = grid, 2 grid, ..., max_lag` the event
//! contributes `e * (m_i(t + tau) - m_i(t))`, where `m_i(t)` reflects every
//! quote stamped at or before `t`. The mean over events is scaled by its
//! value at `max_lag`, so full incorporation reads 1.

use super::{seconds_to_ns, AnalyticsError, SymbolBook};
use crate::tick::{TickSeries, TraderClass};

pub const MIN_EVENTS: usize = 30;
pub const DEFAULT_WINDOW_MS: f64 = 50.0;
/// The plateau must exceed this many standard errors to be normalized.
const PLATEAU_Z: f64 = 3.0;

/// Per-class parts of a response curve, on the same scale as the total.
#[derive(Debug, Clone, PartialEq)]
pub struct ResponseComponents {
    pub hft: Vec<f64>,
    pub non_hft: Vec<f64>,
    pub uncategorized: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResponseCurve {
    /// Lags in seconds.
    pub lags: Vec<f64>,
    /// Normalized mean response.
    pub values: Vec<f64>,
    pub std_err: Vec<f64>,
    /// Mean response before normalization (price units).
    pub raw: Vec<f64>,
    pub raw_std_err: Vec<f64>,
    pub events: usize,
    pub components: Option<ResponseComponents>,
}

impl ResponseCurve {
    /// First lag at which the normalized response reaches `level`.
    pub fn first_lag_reaching(&self, level: f64) -> Option<f64> {
        self.lags.iter().zip(&self.values).find(|(_, v)| **v >= level).map(|(l, _)| *l)
    }
}

struct LagGrid {
    lags: Vec<f64>,
    lag_ns: Vec<i64>,
}

impl LagGrid {
    fn new(max_lag_s: f64, grid_s: f64) -> Result<Self, AnalyticsError> {
        if !(grid_s.is_finite() && grid_s > 0.0 && max_lag_s.is_finite() && max_lag_s >= grid_s) {
            return Err(AnalyticsError::InvalidArgument(format!(
                "need 0 < grid <= max_lag, got grid {grid_s}, max_lag {max_lag_s}"
            )));
        }
        let steps = (max_lag_s / grid_s).round() as usize;
        let lags: Vec<f64> = (1..=steps).map(|k| k as f64 * grid_s).collect();
        let lag_ns = lags.iter().map(|&l| seconds_to_ns(l)).collect();
        Ok(Self { lags, lag_ns })
    }
}

/// Unnormalized per-pair accumulation.
struct PairResponse {
    events: usize,
    mean: Vec<f64>,
    std_err: Vec<f64>,
    components: Option<[Vec<f64>; 3]>,
}

fn accumulate(
    ticks: &TickSeries,
    i: &str,
    j: &str,
    grid: &LagGrid,
    window_ns: Option<i64>,
) -> Result<PairResponse, AnalyticsError> {
    if i == j {
        return Err(AnalyticsError::InvalidArgument(format!("responding and moving symbol are both `{i}`")));
    }
    let book_i = SymbolBook::build(ticks, i).ok_or_else(|| AnalyticsError::UnknownSymbol(i.to_string()))?;
    let book_j = SymbolBook::build(ticks, j).ok_or_else(|| AnalyticsError::UnknownSymbol(j.to_string()))?;
    let k = grid.lags.len();
    let horizon = *grid.lag_ns.last().expect("at least one lag");
    let changes_i = book_i.changes();
    let classes: Vec<usize> = match window_ns {
        Some(w) => changes_i
            .iter()
            .map(|&(ts, _)| match book_i.recent_trade_class(ts, w) {
                TraderClass::Hft => 0,
                TraderClass::NonHft => 1,
                TraderClass::Uncategorized => 2,
            })
            .collect(),
        None => Vec::new(),
    };

    let mut events = 0usize;
    let mut sum = vec![0.0; k];
    let mut sum_sq = vec![0.0; k];
    let mut comp = [vec![0.0; k], vec![0.0; k], vec![0.0; k]];
    let mut step = [vec![0.0; k], vec![0.0; k], vec![0.0; k]];

    for (t, delta_j) in book_j.changes() {
        let Some(base) = book_i.mid_at_or_before(t) else {
            continue;
        };
        let direction = delta_j.signum();
        events += 1;
        for (lag, &lag_ns) in grid.lag_ns.iter().enumerate() {
            let moved = book_i.mid_at_or_before(t + lag_ns).expect("base quote exists") - base;
            let contribution = direction * moved;
            sum[lag] += contribution;
            sum_sq[lag] += contribution * contribution;
        }
        if window_ns.is_some() {
            step.iter_mut().for_each(|s| s.iter_mut().for_each(|v| *v = 0.0));
            let start = changes_i.partition_point(|&(ts, _)| ts <= t);
            for (idx, &(ts, delta)) in changes_i.iter().enumerate().skip(start) {
                if ts > t + horizon {
                    break;
                }
                let first = grid.lag_ns.partition_point(|&l| l < ts - t);
                step[classes[idx]][first] += direction * delta;
            }
            for (c, s) in step.iter().enumerate() {
                let mut running = 0.0;
                for lag in 0..k {
                    running += s[lag];
                    comp[c][lag] += running;
                }
            }
        }
    }
    if events < MIN_EVENTS {
        return Err(AnalyticsError::InsufficientEvents {
            found: events,
            required: MIN_EVENTS,
        });
    }
    let n = events as f64;
    let mean: Vec<f64> = sum.iter().map(|s| s / n).collect();
    let std_err = sum_sq
        .iter()
        .zip(&mean)
        .map(|(sq, m)| (((sq - n * m * m) / (n - 1.0)).max(0.0) / n).sqrt())
        .collect();
    let components = window_ns.map(|_| comp.map(|c| c.into_iter().map(|v| v / n).collect()));
    Ok(PairResponse {
        events,
        mean,
        std_err,
        components,
    })
}

fn normalize(
    grid: LagGrid,
    events: usize,
    raw: Vec<f64>,
    raw_std_err: Vec<f64>,
    components: Option<[Vec<f64>; 3]>,
) -> Result<ResponseCurve, AnalyticsError> {
    let plateau = *raw.last().expect("at least one lag");
    let plateau_se = *raw_std_err.last().expect("at least one lag");
    if !(plateau > 0.0 && plateau > PLATEAU_Z * plateau_se) {
        return Err(AnalyticsError::DegenerateNormalization {
            plateau,
            std_err: plateau_se,
        });
    }
    let scale = |v: &[f64]| v.iter().map(|x| x / plateau).collect::<Vec<_>>();
    Ok(ResponseCurve {
        lags: grid.lags,
        values: scale(&raw),
        std_err: scale(&raw_std_err),
        components: components.map(|[h, nh, u]| ResponseComponents {
            hft: scale(&h),
            non_hft: scale(&nh),
            uncategorized: scale(&u),
        }),
        raw,
        raw_std_err,
        events,
    })
}

pub fn price_response(
    ticks: &TickSeries,
    i: &str,
    j: &str,
    max_lag_s: f64,
    grid_s: f64,
) -> Result<ResponseCurve, AnalyticsError> {
    let grid = LagGrid::new(max_lag_s, grid_s)?;
    let pair = accumulate(ticks, i, j, &grid, None)?;
    normalize(grid, pair.events, pair.mean, pair.std_err, None)
}

/// Like [`price_response`], with every midpoint change of `i` attributed to
/// the class of the latest trade in `i` within `window_ms` before it
/// (uncategorized when there is none). Components sum to the total.
pub fn decompose_response(
    ticks: &TickSeries,
    i: &str,
    j: &str,
    max_lag_s: f64,
    grid_s: f64,
    window_ms: f64,
) -> Result<ResponseCurve, AnalyticsError> {
    let window_ns = window_ns(window_ms)?;
    let grid = LagGrid::new(max_lag_s, grid_s)?;
    let pair = accumulate(ticks, i, j, &grid, Some(window_ns))?;
    normalize(grid, pair.events, pair.mean, pair.std_err, pair.components)
}

/// Equal-weighted average of the unnormalized responses over every ordered
/// pair with enough events, normalized at the end.
pub fn price_response_all_pairs(
    ticks: &TickSeries,
    max_lag_s: f64,
    grid_s: f64,
    window_ms: Option<f64>,
) -> Result<ResponseCurve, AnalyticsError> {
    let window_ns = window_ms.map(window_ns).transpose()?;
    let grid = LagGrid::new(max_lag_s, grid_s)?;
    let symbols = ticks.symbols();
    let k = grid.lags.len();
    let mut pairs = 0usize;
    let mut events = 0usize;
    let mut raw = vec![0.0; k];
    let mut var = vec![0.0; k];
    let mut comp = [vec![0.0; k], vec![0.0; k], vec![0.0; k]];
    for i in &symbols {
        for j in symbols.iter().filter(|j| *j != i) {
            let pair = match accumulate(ticks, i, j, &grid, window_ns) {
                Ok(p) => p,
                Err(AnalyticsError::InsufficientEvents { .. }) => continue,
                Err(e) => return Err(e),
            };
            pairs += 1;
            events += pair.events;
            for lag in 0..k {
                raw[lag] += pair.mean[lag];
                var[lag] += pair.std_err[lag].powi(2);
            }
            if let Some(c) = pair.components {
                for (acc, part) in comp.iter_mut().zip(c) {
                    acc.iter_mut().zip(part).for_each(|(a, p)| *a += p);
                }
            }
        }
    }
    if pairs == 0 {
        return Err(AnalyticsError::InsufficientEvents {
            found: 0,
            required: MIN_EVENTS,
        });
    }
    let p = pairs as f64;
    let raw = raw.into_iter().map(|v| v / p).collect();
    let se = var.into_iter().map(|v| v.sqrt() / p).collect();
    let components = window_ns.map(|_| comp.map(|c| c.into_iter().map(|v| v / p).collect()));
    normalize(grid, events, raw, se, components)
}

fn window_ns(window_ms: f64) -> Result<i64, AnalyticsError> {
    if !(window_ms.is_finite() && window_ms >= 0.0) {
        return Err(AnalyticsError::InvalidArgument(format!("window must be >= 0 ms, got {window_ms}")));
    }
    Ok((window_ms * 1e6).round() as i64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Side;
    use crate::tick::{Price, TickRecord};

    const S: i64 = 1_000_000_000;

    fn quote(ts: i64, sym: &str, mid: f64) -> TickRecord {
        TickRecord::quote(ts, sym, Price::from_f64(mid), Price::from_f64(mid))
    }

    /// `i` follows every move of `j` after `lag_ns`, footprinted by an H trade.
    fn follower(events: usize, lag_ns: i64) -> TickSeries {
        let mut recs = vec![quote(0, "I", 50.0), quote(0, "J", 50.0)];
        let mut level = 50.0;
        for e in 0..events as i64 {
            let step = if e % 3 == 0 { -0.1 } else { 0.1 };
            level += step;
            let t = (e + 1) * 10 * S;
            recs.push(quote(t, "J", level));
            recs.push(TickRecord::trade(
                t + lag_ns - 1_000_000,
                "I",
                Side::matching(step > 0.0),
                Price::from_f64(level),
                100,
                Some(TraderClass::Hft),
            ));
            recs.push(quote(t + lag_ns, "I", level));
        }
        recs.sort_by_key(|r| r.ts_ns);
        TickSeries::new(recs).unwrap()
    }

    #[test]
    fn immediate_follower_is_fully_incorporated() {
        let ticks = follower(40, S / 100);
        let curve = price_response(&ticks, "I", "J", 5.0, 0.5).unwrap();
        assert_eq!(curve.events, 40);
        assert!(curve.values.iter().all(|v| (v - 1.0).abs() < 1e-12));
        assert_eq!(curve.first_lag_reaching(0.99), Some(0.5));
    }

    #[test]
    fn delayed_follower_rises_at_its_lag() {
        let ticks = follower(40, 2 * S);
        let curve = price_response(&ticks, "I", "J", 5.0, 0.5).unwrap();
        assert!(curve.values[..3].iter().all(|v| v.abs() < 1e-12));
        assert!((curve.values[3] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn components_attribute_and_sum() {
        let ticks = follower(40, S / 100);
        let curve = decompose_response(&ticks, "I", "J", 5.0, 0.5, 50.0).unwrap();
        let c = curve.components.as_ref().unwrap();
        for lag in 0..curve.lags.len() {
            let sum = c.hft[lag] + c.non_hft[lag] + c.uncategorized[lag];
            assert!((sum - curve.values[lag]).abs() < 1e-9);
            assert!((c.hft[lag] - 1.0).abs() < 1e-12);
        }
        let stripped = decompose_response(&ticks.without_classes(), "I", "J", 5.0, 0.5, 50.0).unwrap();
        assert_eq!(stripped.components.unwrap().uncategorized, stripped.values);
    }

    #[test]
    fn error_paths() {
        let ticks = follower(10, S / 100);
        assert!(matches!(
            price_response(&ticks, "I", "J", 5.0, 0.5),
            Err(AnalyticsError::InsufficientEvents { found: 10, .. })
        ));
        assert!(price_response(&ticks, "I", "I", 5.0, 0.5).is_err());
        assert!(matches!(price_response(&ticks, "I", "X", 5.0, 0.5), Err(AnalyticsError::UnknownSymbol(_))));
        assert!(price_response(&ticks, "I", "J", 0.1, 0.5).is_err());

        // i never moves: plateau is zero
        let mut recs = vec![quote(0, "I", 50.0)];
        recs.extend((1..=40).map(|e| quote(e * S, "J", 50.0 + 0.1 * (e % 2) as f64)));
        let flat = TickSeries::new(recs).unwrap();
        assert!(matches!(
            price_response(&flat, "I", "J", 2.0, 1.0),
            Err(AnalyticsError::DegenerateNormalization { .. })
        ));
    }
}
