use super::{terminal_price, true_likelihood, Arrivals, Market, MarketMetrics, MetricsQuery, Regime, SimError, StdErr};
use crate::model::{atom_up, CorrelationMatrix, Order, Posterior, SecuritySpec, Side};
use rayon::prelude::*;

/// Largest market handled by exhaustive enumeration.
pub const MAX_EXACT_DIM: usize = 6;

#[derive(Debug, Default, Clone, Copy)]
struct Accum {
    weight: f64,
    cost: f64,
    error: f64,
    informed_weight: f64,
    informed_profit: f64,
}

impl Accum {
    fn merge(mut self, other: Accum) -> Accum {
        self.weight += other.weight;
        self.cost += other.cost;
        self.error += other.error;
        self.informed_weight += other.informed_weight;
        self.informed_profit += other.informed_profit;
        self
    }
}

pub fn exact_metrics(
    specs: &[SecuritySpec],
    rho: &CorrelationMatrix,
    regime: Regime,
    target: usize,
    conditioning: Side,
) -> Result<MarketMetrics, SimError> {
    Market::new(specs.to_vec(), rho.clone())?.exact_metrics(&MetricsQuery::new(regime, target, conditioning))
}

impl Market {
    /// Expectations over every arrival sequence, terminal outcome and side of
    /// the non-target orders, weighted by their probabilities and
    /// renormalized over the conditioning event.
    pub fn exact_metrics(&self, query: &MetricsQuery) -> Result<MarketMetrics, SimError> {
        let n = self.n();
        if n > MAX_EXACT_DIM {
            return Err(SimError::TooLargeForExact { n, max: MAX_EXACT_DIM });
        }
        query.validate(n)?;
        let sequences = match &query.arrivals {
            Arrivals::Uniform => permutations(n),
            Arrivals::Fixed(seq) => vec![seq.as_slice().to_vec()],
        };
        let prior = Posterior::prior(self.pmf());

        let partials = sequences
            .par_iter()
            .map(|seq| self.enumerate_sequence(&prior, query, seq))
            .collect::<Result<Vec<_>, _>>()?;
        // fixed reduction order keeps results independent of the worker count
        let total = partials.into_iter().fold(Accum::default(), Accum::merge);
        if !(total.weight > 0.0) {
            return Err(SimError::DegenerateConditioning);
        }
        Ok(MarketMetrics {
            cost: total.cost / total.weight,
            error: total.error / total.weight,
            informed_profit: if total.informed_weight > 0.0 {
                total.informed_profit / total.informed_weight
            } else {
                f64::NAN
            },
            std_err: StdErr::default(),
        })
    }

    fn enumerate_sequence(&self, prior: &Posterior, query: &MetricsQuery, seq: &[usize]) -> Result<Accum, SimError> {
        let n = self.n();
        let specs = self.specs();
        let target = query.target;
        let side_sign = query.conditioning.sign();
        let others: Vec<usize> = (0..n).filter(|&k| k != target).collect();
        let position = seq.iter().position(|&k| k == target).expect("sequence is a permutation");
        let mut acc = Accum::default();
        let mut sides = vec![Side::Buy; n];
        let mut before = Vec::with_capacity(n);

        for mask in 0usize..1 << others.len() {
            for (bit, &k) in others.iter().enumerate() {
                sides[k] = if mask >> bit & 1 == 1 { Side::Sell } else { Side::Buy };
            }
            before.clear();
            before.extend(seq[..position].iter().map(|&k| Order::new(k, sides[k])));
            let (prevailing, price) = self.target_prices(prior, query, &before)?;
            let cost = side_sign * (price - prevailing);

            for (atom, &p) in self.pmf().probs().iter().enumerate() {
                let mut w = p * true_likelihood(Order::new(target, query.conditioning), atom, specs, query.misconception);
                for &k in &others {
                    w *= true_likelihood(Order::new(k, sides[k]), atom, specs, query.misconception);
                }
                if w == 0.0 {
                    continue;
                }
                let terminal = terminal_price(specs, atom, target);
                acc.weight += w;
                acc.cost += w * cost;
                acc.error += w * (terminal - price).abs();
                if Side::matching(atom_up(atom, target)) == query.conditioning {
                    acc.informed_weight += w;
                    acc.informed_profit += w * side_sign * (terminal - price);
                }
            }
        }
        Ok(acc)
    }
}

/// All permutations of `0..n` in lexicographic order.
pub(crate) fn permutations(n: usize) -> Vec<Vec<usize>> {
    let mut current: Vec<usize> = (0..n).collect();
    let mut out = vec![current.clone()];
    loop {
        let Some(i) = (1..n).rev().find(|&i| current[i - 1] < current[i]) else {
            return out;
        };
        let j = (i..n).rev().find(|&j| current[j] > current[i - 1]).unwrap();
        current.swap(i - 1, j);
        current[i..].reverse();
        out.push(current.clone());
    }
}
