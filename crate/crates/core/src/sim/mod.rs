//! Single-period trading under synchronized and unsynchronized liquidity
//! provision: exact enumeration, a Monte Carlo oracle, parameter sweeps and
//! a synthetic tick generator.

mod exact;
mod mc;
mod sweep;
mod ticks;

pub use exact::{exact_metrics, MAX_EXACT_DIM};
pub use mc::{mc_metrics, MC_BLOCK};
pub use sweep::{sweep, Method, SweepOptions, SweepParam, SweepRow};
pub use ticks::{gen_ticks, TickGenConfig, TimingParams};

use crate::model::{
    atom_up, build_joint_pmf, order_likelihood, CorrelationMatrix, JointOutcomePmf, ModelError, Order, Posterior,
    SecuritySpec, Side,
};
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("exact enumeration supports at most {max} securities, got {n}")]
    TooLargeForExact { n: usize, max: usize },
    #[error("invalid query: {0}")]
    InvalidQuery(String),
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("invalid timing: {0}")]
    InvalidTiming(String),
    #[error("the conditioning event has zero probability")]
    DegenerateConditioning,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Regime {
    /// Every security's liquidity provider conditions on all orders seen so far.
    Synchronized,
    /// Each security's price reflects only its own order.
    Unsynchronized,
}

impl Regime {
    pub fn label(self) -> &'static str {
        match self {
            Regime::Synchronized => "sync",
            Regime::Unsynchronized => "unsync",
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Regime {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sync" | "synchronized" => Ok(Regime::Synchronized),
            "unsync" | "unsynchronized" => Ok(Regime::Unsynchronized),
            other => Err(format!("unknown regime {other:?} (expected sync or unsync)")),
        }
    }
}

/// Order in which the securities' orders arrive within the period.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArrivalSequence(Vec<usize>);

impl ArrivalSequence {
    pub fn new(order: Vec<usize>) -> Result<Self, SimError> {
        let mut seen = vec![false; order.len()];
        for &i in &order {
            if i >= order.len() || std::mem::replace(&mut seen[i], true) {
                return Err(SimError::InvalidQuery(format!("{order:?} is not a permutation")));
            }
        }
        Ok(Self(order))
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum Arrivals {
    /// Every permutation equally likely.
    #[default]
    Uniform,
    Fixed(ArrivalSequence),
}

/// What to measure: the transaction of security `target` conditioned on its
/// order having side `conditioning`.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsQuery {
    pub regime: Regime,
    pub target: usize,
    pub conditioning: Side,
    pub arrivals: Arrivals,
    /// Probability that any order is replaced by a sell regardless of the
    /// terminal outcome. Liquidity providers keep pricing with the nominal
    /// order law.
    pub misconception: f64,
}

impl MetricsQuery {
    pub fn new(regime: Regime, target: usize, conditioning: Side) -> Self {
        Self {
            regime,
            target,
            conditioning,
            arrivals: Arrivals::Uniform,
            misconception: 0.0,
        }
    }

    pub fn with_arrivals(mut self, arrivals: Arrivals) -> Self {
        self.arrivals = arrivals;
        self
    }

    pub fn with_misconception(mut self, lambda: f64) -> Self {
        self.misconception = lambda;
        self
    }

    pub fn with_regime(mut self, regime: Regime) -> Self {
        self.regime = regime;
        self
    }

    fn validate(&self, n: usize) -> Result<(), SimError> {
        if self.target >= n {
            return Err(SimError::InvalidQuery(format!("target {} out of range for {n} securities", self.target)));
        }
        if !(0.0..=1.0).contains(&self.misconception) {
            return Err(SimError::InvalidQuery(format!(
                "misconception probability {} outside [0, 1]",
                self.misconception
            )));
        }
        if let Arrivals::Fixed(seq) = &self.arrivals {
            if seq.as_slice().len() != n {
                return Err(SimError::InvalidQuery(format!(
                    "arrival sequence has {} entries for {n} securities",
                    seq.as_slice().len()
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StdErr {
    pub cost: f64,
    pub error: f64,
    pub informed_profit: f64,
}

/// Expected cost, pricing error and informed profit of one transaction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarketMetrics {
    pub cost: f64,
    pub error: f64,
    pub informed_profit: f64,
    pub std_err: StdErr,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Scenario {
    Baseline,
    /// Each order is replaced by a sell with probability `lambda`.
    Misconception { lambda: f64 },
    /// Security `security`'s quote is displaced by `epsilon` mid-period; with
    /// a `threshold`, the synchronizer stands aside whenever a move it would
    /// propagate exceeds it.
    Shock {
        security: usize,
        epsilon: f64,
        threshold: Option<f64>,
    },
}

impl Scenario {
    pub fn validate(&self, n: usize) -> Result<(), SimError> {
        match *self {
            Scenario::Baseline => Ok(()),
            Scenario::Misconception { lambda } if (0.0..=1.0).contains(&lambda) => Ok(()),
            Scenario::Misconception { lambda } => Err(SimError::InvalidScenario(format!("lambda {lambda} outside [0, 1]"))),
            Scenario::Shock { security, .. } if security >= n => Err(SimError::InvalidScenario(format!(
                "shocked security {security} out of range for {n} securities"
            ))),
            Scenario::Shock { epsilon, .. } if !epsilon.is_finite() => {
                Err(SimError::InvalidScenario(format!("epsilon {epsilon} is not finite")))
            }
            Scenario::Shock { threshold: Some(t), .. } if !(t > 0.0) => {
                Err(SimError::InvalidScenario(format!("threshold {t} must be > 0")))
            }
            Scenario::Shock { .. } => Ok(()),
        }
    }

    pub fn misconception(&self) -> f64 {
        match *self {
            Scenario::Misconception { lambda } => lambda,
            _ => 0.0,
        }
    }
}

/// Specs, correlations and the joint law they induce.
#[derive(Debug, Clone)]
pub struct Market {
    specs: Vec<SecuritySpec>,
    rho: CorrelationMatrix,
    pmf: JointOutcomePmf,
}

impl Market {
    pub fn new(specs: Vec<SecuritySpec>, rho: CorrelationMatrix) -> Result<Self, SimError> {
        if specs.len() != rho.n() {
            return Err(ModelError::DimensionMismatch {
                securities: specs.len(),
                matrix: rho.n(),
            }
            .into());
        }
        let pmf = build_joint_pmf(specs.len(), &rho)?;
        Ok(Self { specs, rho, pmf })
    }

    pub fn n(&self) -> usize {
        self.specs.len()
    }

    pub fn specs(&self) -> &[SecuritySpec] {
        &self.specs
    }

    pub fn rho(&self) -> &CorrelationMatrix {
        &self.rho
    }

    pub fn pmf(&self) -> &JointOutcomePmf {
        &self.pmf
    }

    /// Pre-trade midpoint and transaction price of the target given the
    /// orders that arrived before it.
    fn target_prices(
        &self,
        prior: &Posterior,
        query: &MetricsQuery,
        before: &[Order],
    ) -> Result<(f64, f64), SimError> {
        let own = Order::new(query.target, query.conditioning);
        let prices = match query.regime {
            Regime::Synchronized => {
                let mut belief = prior.updated_with(before, &self.specs)?;
                let prevailing = belief.fair_price(query.target, &self.specs);
                belief.update_in_place(own, &self.specs)?;
                (prevailing, belief.fair_price(query.target, &self.specs))
            }
            Regime::Unsynchronized => {
                let belief = prior.update(own, &self.specs)?;
                (self.specs[query.target].m(), belief.fair_price(query.target, &self.specs))
            }
        };
        Ok(prices)
    }
}

/// Order law of the trading population, including the misconception
/// override: `P(buy | x) = (1 - lambda) * nominal P(buy | x)`.
#[inline]
pub(crate) fn true_likelihood(order: Order, atom: usize, specs: &[SecuritySpec], lambda: f64) -> f64 {
    let buy = (1.0 - lambda) * order_likelihood(Order::buy(order.security), atom, specs);
    match order.side {
        Side::Buy => buy,
        Side::Sell => 1.0 - buy,
    }
}

/// Terminal price of `i` in `atom`.
#[inline]
pub(crate) fn terminal_price(specs: &[SecuritySpec], atom: usize, i: usize) -> f64 {
    specs[i].terminal(atom_up(atom, i))
}
