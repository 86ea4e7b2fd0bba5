use super::{terminal_price, true_likelihood, Arrivals, Market, MarketMetrics, MetricsQuery, Regime, SimError, StdErr};
use crate::model::{atom_up, CorrelationMatrix, Order, Posterior, SecuritySpec, Side};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Samples per independent random stream.
pub const MC_BLOCK: u64 = 4096;

const MAX_REJECTIONS: u64 = 1_000_000;

#[derive(Debug, Default, Clone, Copy)]
struct Moments {
    count: f64,
    sum: f64,
    sum_sq: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.count += 1.0;
        self.sum += x;
        self.sum_sq += x * x;
    }

    fn merge(&mut self, other: &Moments) {
        self.count += other.count;
        self.sum += other.sum;
        self.sum_sq += other.sum_sq;
    }

    fn mean(&self) -> f64 {
        if self.count > 0.0 {
            self.sum / self.count
        } else {
            f64::NAN
        }
    }

    fn std_err(&self) -> f64 {
        if self.count < 2.0 {
            return f64::NAN;
        }
        let mean = self.mean();
        let var = ((self.sum_sq - self.count * mean * mean) / (self.count - 1.0)).max(0.0);
        (var / self.count).sqrt()
    }
}

#[derive(Debug, Default, Clone, Copy)]
struct BlockStats {
    cost: Moments,
    error: Moments,
    informed: Moments,
}

pub fn mc_metrics(
    specs: &[SecuritySpec],
    rho: &CorrelationMatrix,
    regime: Regime,
    target: usize,
    conditioning: Side,
    samples: u64,
    seed: u64,
) -> Result<MarketMetrics, SimError> {
    Market::new(specs.to_vec(), rho.clone())?.mc_metrics(&MetricsQuery::new(regime, target, conditioning), samples, seed)
}

impl Market {
    /// Monte Carlo estimate of [`Market::exact_metrics`] from `samples` draws
    /// of the conditioning event, obtained by rejection. Block `b` draws from
    /// ChaCha stream `b` of `seed`, so results do not depend on the number of
    /// worker threads.
    pub fn mc_metrics(&self, query: &MetricsQuery, samples: u64, seed: u64) -> Result<MarketMetrics, SimError> {
        if samples == 0 {
            return Err(SimError::InvalidQuery("samples must be at least 1".into()));
        }
        query.validate(self.n())?;
        let blocks = samples.div_ceil(MC_BLOCK);
        let stats = (0..blocks)
            .into_par_iter()
            .map(|b| {
                let count = MC_BLOCK.min(samples - b * MC_BLOCK);
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(b);
                self.sample_block(query, count, &mut rng)
            })
            .collect::<Result<Vec<_>, _>>()?;

        let mut total = BlockStats::default();
        for s in &stats {
            total.cost.merge(&s.cost);
            total.error.merge(&s.error);
            total.informed.merge(&s.informed);
        }
        Ok(MarketMetrics {
            cost: total.cost.mean(),
            error: total.error.mean(),
            informed_profit: total.informed.mean(),
            std_err: StdErr {
                cost: total.cost.std_err(),
                error: total.error.std_err(),
                informed_profit: total.informed.std_err(),
            },
        })
    }

    fn sample_block(&self, query: &MetricsQuery, count: u64, rng: &mut ChaCha8Rng) -> Result<BlockStats, SimError> {
        let n = self.n();
        let specs = self.specs();
        let sampler = self.pmf().sampler();
        let prior = Posterior::prior(self.pmf());
        let target = query.target;
        let lambda = query.misconception;
        let mut sequence: Vec<usize> = (0..n).collect();
        let mut before = Vec::with_capacity(n);
        let mut stats = BlockStats::default();
        let mut rejections = 0u64;

        let mut accepted = 0;
        while accepted < count {
            let atom = sampler.sample(rng);
            let own = draw_side(rng, target, atom, specs, lambda);
            if own != query.conditioning {
                rejections += 1;
                if rejections > MAX_REJECTIONS {
                    return Err(SimError::DegenerateConditioning);
                }
                continue;
            }
            rejections = 0;
            match &query.arrivals {
                Arrivals::Uniform => sequence.shuffle(rng),
                Arrivals::Fixed(seq) => sequence.copy_from_slice(seq.as_slice()),
            }
            before.clear();
            for &k in &sequence {
                if k == target {
                    break;
                }
                before.push(Order::new(k, draw_side(rng, k, atom, specs, lambda)));
            }
            let (prevailing, price) = self.target_prices(&prior, query, &before)?;
            let sign = query.conditioning.sign();
            let terminal = terminal_price(specs, atom, target);
            stats.cost.push(sign * (price - prevailing));
            stats.error.push((terminal - price).abs());
            if Side::matching(atom_up(atom, target)) == query.conditioning {
                stats.informed.push(sign * (terminal - price));
            }
            accepted += 1;
        }
        Ok(stats)
    }
}

fn draw_side(rng: &mut ChaCha8Rng, security: usize, atom: usize, specs: &[SecuritySpec], lambda: f64) -> Side {
    let buy = true_likelihood(Order::buy(security), atom, specs, lambda);
    if rng.gen::<f64>() < buy {
        Side::Buy
    } else {
        Side::Sell
    }
}
