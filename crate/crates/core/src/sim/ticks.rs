//! Synthetic trade/quote feed realizing the model period by period.
//!
//! Period `p` starts at `p * period_ms`. Every security opens at its initial
//! midpoint. Orders then arrive one arrival gap apart (plus jitter) in a
//! uniformly random sequence. Each arrival emits the prevailing quote one
//! millisecond ahead, the class-N trade at the new fair price, and the
//! post-trade quote. In the synchronized regime the synchronizer then carries
//! the order's information to every covered security: a class-H trade
//! followed by the adjusted quote. At `terminal_ms` every security quotes
//! its realized terminal price.

use super::{Market, Regime, Scenario, SimError};
use crate::model::{atom_up, Order, Posterior, Side};
use crate::tick::{Price, TickRecord, TickSeries, TraderClass};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

const NS_PER_MS: i64 = 1_000_000;
const SHOCK_STREAM_SALT: u64 = 0x5b0c_c0de_0000_0001;

#[derive(Debug, Clone, PartialEq)]
pub struct TimingParams {
    pub period_ms: u64,
    pub arrival_gap_ms: u64,
    /// Uniform extra delay added to each arrival.
    pub jitter_ms: u64,
    /// Trade to quote delay.
    pub quote_lag_ms: u64,
    /// Delay before the synchronizer reacts to an arrival.
    pub sync_lag_ms: u64,
    /// Offset of the terminal quotes within the period.
    pub terminal_ms: u64,
    pub half_spread: f64,
    pub trade_size: u64,
}

impl Default for TimingParams {
    fn default() -> Self {
        Self {
            period_ms: 60_000,
            arrival_gap_ms: 1_000,
            jitter_ms: 100,
            quote_lag_ms: 1,
            sync_lag_ms: 5,
            terminal_ms: 30_000,
            half_spread: 0.01,
            trade_size: 100,
        }
    }
}

impl TimingParams {
    pub fn validate(&self, n: usize) -> Result<(), SimError> {
        let fail = |msg: String| Err(SimError::InvalidTiming(msg));
        if self.arrival_gap_ms < 2 {
            return fail(format!("arrival_gap_ms must be at least 2, got {}", self.arrival_gap_ms));
        }
        if self.quote_lag_ms == 0 {
            return fail("quote_lag_ms must be at least 1".into());
        }
        let reaction = self.jitter_ms + self.sync_lag_ms + self.quote_lag_ms + 1;
        if 2 * reaction >= self.arrival_gap_ms {
            return fail(format!(
                "jitter_ms + sync_lag_ms + quote_lag_ms + 1 = {reaction} must be below half of arrival_gap_ms = {}",
                self.arrival_gap_ms
            ));
        }
        let last_event = n as u64 * self.arrival_gap_ms + reaction;
        if self.terminal_ms <= last_event {
            return fail(format!("terminal_ms = {} must exceed the last arrival reaction at {last_event} ms", self.terminal_ms));
        }
        if self.period_ms <= self.terminal_ms {
            return fail(format!("period_ms = {} must exceed terminal_ms = {}", self.period_ms, self.terminal_ms));
        }
        if !(self.half_spread.is_finite() && self.half_spread >= 0.0) {
            return fail(format!("half_spread must be >= 0, got {}", self.half_spread));
        }
        if self.trade_size == 0 {
            return fail("trade_size must be at least 1".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TickGenConfig {
    pub regime: Regime,
    pub periods: u64,
    pub seed: u64,
    pub scenario: Scenario,
    pub timing: TimingParams,
    /// Per-security probability that the synchronizer updates that security
    /// on a foreign event. Defaults to full coverage; ignored in the
    /// unsynchronized regime.
    pub coverage: Option<Vec<f64>>,
}

impl TickGenConfig {
    pub fn new(regime: Regime, periods: u64, seed: u64) -> Self {
        Self {
            regime,
            periods,
            seed,
            scenario: Scenario::Baseline,
            timing: TimingParams::default(),
            coverage: None,
        }
    }
}

/// Deterministic given the config: period `p` draws from ChaCha stream `p`.
pub fn gen_ticks(market: &Market, config: &TickGenConfig) -> Result<TickSeries, SimError> {
    let n = market.n();
    if config.periods == 0 {
        return Err(SimError::InvalidQuery("periods must be at least 1".into()));
    }
    config.timing.validate(n)?;
    config.scenario.validate(n)?;
    let coverage = match (&config.coverage, config.regime) {
        (_, Regime::Unsynchronized) => vec![0.0; n],
        (None, Regime::Synchronized) => vec![1.0; n],
        (Some(c), Regime::Synchronized) => {
            if c.len() != n || c.iter().any(|v| !(0.0..=1.0).contains(v)) {
                return Err(SimError::InvalidQuery(format!(
                    "coverage must hold {n} probabilities in [0, 1], got {c:?}"
                )));
            }
            c.clone()
        }
    };
    let generator = PeriodGenerator {
        market,
        config,
        coverage,
        sampler: market.pmf().sampler(),
        prior: Posterior::prior(market.pmf()),
    };
    let periods = (0..config.periods)
        .into_par_iter()
        .map(|p| generator.period(p))
        .collect::<Result<Vec<_>, _>>()?;
    let records = periods.into_iter().flatten().collect();
    Ok(TickSeries::new(records).expect("generator emits valid, ordered records"))
}

struct PeriodGenerator<'a> {
    market: &'a Market,
    config: &'a TickGenConfig,
    coverage: Vec<f64>,
    sampler: crate::model::AtomSampler,
    prior: Posterior,
}

struct PeriodState<'a> {
    out: Vec<TickRecord>,
    beliefs: Vec<Posterior>,
    /// Erroneous displacement carried by each security's quotes.
    offset: Vec<f64>,
    mid: Vec<Price>,
    half_spread: Price,
    size: u64,
    symbols: Vec<&'a str>,
}

impl PeriodState<'_> {
    fn quote(&mut self, ts: i64, i: usize) {
        let mid = self.mid[i].micros();
        let hs = self.half_spread.micros();
        self.out.push(TickRecord::quote(
            ts,
            self.symbols[i],
            Price::from_micros(mid - hs),
            Price::from_micros(mid + hs),
        ));
    }

    fn trade(&mut self, ts: i64, i: usize, side: Side, price: Price, class: TraderClass) {
        self.out
            .push(TickRecord::trade(ts, self.symbols[i], side, price, self.size, Some(class)));
    }
}

impl PeriodGenerator<'_> {
    fn covered(&self, j: usize, rng: &mut ChaCha8Rng) -> bool {
        let c = self.coverage[j];
        if c >= 1.0 {
            true
        } else if c <= 0.0 {
            false
        } else {
            rng.gen::<f64>() < c
        }
    }

    fn period(&self, p: u64) -> Result<Vec<TickRecord>, SimError> {
        let specs = self.market.specs();
        let n = self.market.n();
        let timing = &self.config.timing;
        let ms = |v: u64| v as i64 * NS_PER_MS;
        let t0 = p as i64 * ms(timing.period_ms);
        let gap = ms(timing.arrival_gap_ms);

        let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed);
        rng.set_stream(p);
        let mut shock_rng = ChaCha8Rng::seed_from_u64(self.config.seed ^ SHOCK_STREAM_SALT);
        shock_rng.set_stream(p);

        let atom = self.sampler.sample(&mut rng);
        let mut sequence: Vec<usize> = (0..n).collect();
        sequence.shuffle(&mut rng);

        let mut st = PeriodState {
            out: Vec::with_capacity(8 * n),
            beliefs: vec![self.prior.clone(); n],
            offset: vec![0.0; n],
            mid: specs.iter().map(|s| Price::from_f64(s.m())).collect(),
            half_spread: Price::from_f64(timing.half_spread),
            size: timing.trade_size,
            symbols: specs.iter().map(|s| s.symbol()).collect(),
        };
        (0..n).for_each(|i| st.quote(t0, i));

        let lambda = self.config.scenario.misconception();
        let threshold = match self.config.scenario {
            Scenario::Shock { threshold, .. } => threshold,
            _ => None,
        };

        for (rank, &i) in sequence.iter().enumerate() {
            if rank == n / 2 {
                if let Scenario::Shock { security, epsilon, .. } = self.config.scenario {
                    let ts = t0 + (n / 2) as i64 * gap + gap / 2;
                    self.shock(&mut st, &mut shock_rng, ts, security, epsilon, threshold);
                }
            }

            let ts = t0 + (rank as i64 + 1) * gap + rng.gen_range(0..=ms(timing.jitter_ms));
            let side = if lambda > 0.0 && rng.gen::<f64>() < lambda {
                Side::Sell
            } else {
                let up = atom_up(atom, i);
                let agrees = rng.gen::<f64>() < specs[i].phi();
                Side::matching(up == agrees)
            };
            let order = Order::new(i, side);

            st.quote(ts - NS_PER_MS, i);
            st.beliefs[i].update_in_place(order, specs)?;
            let fair = st.beliefs[i].fair_price(i, specs) + st.offset[i];
            let source_move = fair - st.mid[i].to_f64();
            let price = Price::from_f64(fair);
            st.trade(ts, i, side, price, TraderClass::NonHft);
            st.mid[i] = price;
            st.quote(ts + ms(timing.quote_lag_ms), i);

            if self.config.regime == Regime::Synchronized {
                let mut updates = Vec::with_capacity(n);
                for j in (0..n).filter(|&j| j != i) {
                    if self.covered(j, &mut rng) {
                        let belief = st.beliefs[j].update(order, specs)?;
                        let fair = belief.fair_price(j, specs) + st.offset[j];
                        updates.push((j, belief, fair));
                    }
                }
                let tripped = threshold.is_some_and(|theta| {
                    source_move.abs() > theta || updates.iter().any(|(j, _, fair)| (fair - st.mid[*j].to_f64()).abs() > theta)
                });
                if !tripped {
                    let at = ts + ms(timing.sync_lag_ms);
                    for (j, belief, fair) in updates {
                        st.beliefs[j] = belief;
                        self.propagate(&mut st, at, j, fair);
                    }
                }
            }
        }

        let terminal = t0 + ms(timing.terminal_ms);
        for (i, spec) in specs.iter().enumerate() {
            st.mid[i] = Price::from_f64(spec.terminal(atom_up(atom, i)));
            st.quote(terminal, i);
        }
        st.out.sort_by_key(|r| r.ts_ns);
        Ok(st.out)
    }

    /// Synchronizer footprint: class-H trade at the new level, then the quote.
    fn propagate(&self, st: &mut PeriodState<'_>, ts: i64, j: usize, fair: f64) {
        let new = Price::from_f64(fair);
        if new == st.mid[j] {
            return;
        }
        let side = Side::matching(new > st.mid[j]);
        st.trade(ts, j, side, new, TraderClass::Hft);
        st.mid[j] = new;
        st.quote(ts + self.config.timing.quote_lag_ms as i64 * NS_PER_MS, j);
    }

    fn shock(
        &self,
        st: &mut PeriodState<'_>,
        rng: &mut ChaCha8Rng,
        ts: i64,
        k: usize,
        epsilon: f64,
        threshold: Option<f64>,
    ) {
        let specs = self.market.specs();
        let rho = self.market.rho();
        st.offset[k] += epsilon;
        st.mid[k] = Price::from_f64(st.beliefs[k].fair_price(k, specs) + st.offset[k]);
        st.quote(ts, k);
        if self.config.regime != Regime::Synchronized {
            return;
        }
        // regression of j's terminal move on k's
        let implied: Vec<(usize, f64)> = (0..specs.len())
            .filter(|&j| j != k)
            .filter(|&j| self.covered(j, rng))
            .map(|j| (j, epsilon * rho.get(j, k) * specs[j].delta() / specs[k].delta()))
            .collect();
        let tripped =
            threshold.is_some_and(|theta| epsilon.abs() > theta || implied.iter().any(|(_, d)| d.abs() > theta));
        if tripped {
            return;
        }
        let at = ts + self.config.timing.sync_lag_ms as i64 * NS_PER_MS;
        for (j, displacement) in implied {
            st.offset[j] += displacement;
            let fair = st.beliefs[j].fair_price(j, specs) + st.offset[j];
            self.propagate(st, at, j, fair);
        }
    }
}
