//! Domain types of the single-period price-formation model and the
//! liquidity provider's Bayesian belief over terminal outcomes.
//!
//! Every security `i` starts at midpoint `m`, ends at `m + delta` or
//! `m - delta` with equal probability, and receives exactly one unit order
//! whose side agrees with the terminal move with probability `phi`. Terminal
//! moves are correlated across securities; their joint law lives in
//! [`JointOutcomePmf`]. Atoms of that law are bitmasks: bit `i` set means
//! security `i` finishes up.

mod joint;
mod orthant;

pub use joint::{build_joint_pmf, AtomSampler, JointOutcomePmf, LatentGaussianSampler, MAX_JOINT_DIM};

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt;
use thiserror::Error;

/// Smallest eigenvalue still accepted as positive semidefinite.
pub(crate) const PSD_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("invalid security `{symbol}`: field `{field}` {reason}")]
    InvalidSpec {
        symbol: String,
        field: &'static str,
        reason: String,
    },
    #[error("invalid correlation matrix: {0}")]
    InvalidCorrelation(String),
    #[error("latent correlation matrix is not positive semidefinite (smallest eigenvalue {min_eigenvalue:.3e})")]
    InfeasibleCorrelation { min_eigenvalue: f64 },
    #[error("dimension {n} exceeds the explicit joint-law limit of {max}")]
    DimensionTooLarge { n: usize, max: usize },
    #[error("dimension mismatch: {securities} securities but a {matrix}x{matrix} correlation matrix")]
    DimensionMismatch { securities: usize, matrix: usize },
    #[error("belief has zero mass after update")]
    DegenerateBelief,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Buy,
    Sell,
}

impl Side {
    /// +1 for buys, -1 for sells.
    pub fn sign(self) -> f64 {
        match self {
            Side::Buy => 1.0,
            Side::Sell => -1.0,
        }
    }

    pub fn opposite(self) -> Side {
        match self {
            Side::Buy => Side::Sell,
            Side::Sell => Side::Buy,
        }
    }

    /// The side that agrees with a terminal move in the given direction.
    pub fn matching(up: bool) -> Side {
        if up {
            Side::Buy
        } else {
            Side::Sell
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Side::Buy => "buy",
            Side::Sell => "sell",
        })
    }
}

/// Parameters of one security. Construct through [`SecuritySpec::new`] so the
/// invariants `delta > 0`, `0.5 <= phi < 1` and `m - delta > 0` always hold.
#[derive(Debug, Clone, PartialEq)]
pub struct SecuritySpec {
    symbol: String,
    m: f64,
    delta: f64,
    phi: f64,
}

impl SecuritySpec {
    pub fn new(symbol: impl Into<String>, m: f64, delta: f64, phi: f64) -> Result<Self, ModelError> {
        let symbol = symbol.into();
        let invalid = |field: &'static str, reason: String| ModelError::InvalidSpec {
            symbol: symbol.clone(),
            field,
            reason,
        };
        if symbol.is_empty() || symbol.contains([',', '"', '\n', '\r']) {
            return Err(invalid("symbol", format!("must be non-empty without commas, quotes or newlines, got {symbol:?}")));
        }
        if !m.is_finite() {
            return Err(invalid("m", format!("must be finite, got {m}")));
        }
        if !(delta.is_finite() && delta > 0.0) {
            return Err(invalid("delta", format!("must be > 0, got {delta}")));
        }
        if !(0.5..1.0).contains(&phi) {
            return Err(invalid("phi", format!("must satisfy 0.5 <= phi < 1, got {phi}")));
        }
        if m - delta <= 0.0 {
            return Err(invalid("delta", format!("m - delta must stay positive (m = {m}, delta = {delta})")));
        }
        Ok(Self { symbol, m, delta, phi })
    }

    pub fn symbol(&self) -> &str {
        &self.symbol
    }

    pub fn m(&self) -> f64 {
        self.m
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    /// Terminal price for the given direction.
    pub fn terminal(&self, up: bool) -> f64 {
        if up {
            self.m + self.delta
        } else {
            self.m - self.delta
        }
    }

    pub fn with_phi(&self, phi: f64) -> Result<Self, ModelError> {
        Self::new(self.symbol.clone(), self.m, self.delta, phi)
    }
}

/// Symmetric matrix of pairwise terminal-move correlations.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix {
    n: usize,
    entries: Vec<f64>,
}

impl CorrelationMatrix {
    /// Row-major entries. Symmetry and the unit diagonal must hold exactly.
    pub fn new(n: usize, entries: Vec<f64>) -> Result<Self, ModelError> {
        if n == 0 {
            return Err(ModelError::InvalidCorrelation("dimension must be at least 1".into()));
        }
        if entries.len() != n * n {
            return Err(ModelError::InvalidCorrelation(format!(
                "expected {} entries for dimension {n}, got {}",
                n * n,
                entries.len()
            )));
        }
        for i in 0..n {
            if entries[i * n + i] != 1.0 {
                return Err(ModelError::InvalidCorrelation(format!(
                    "diagonal entry ({i},{i}) is {}, expected 1",
                    entries[i * n + i]
                )));
            }
            for j in 0..n {
                let v = entries[i * n + j];
                if !v.is_finite() || v.abs() > 1.0 {
                    return Err(ModelError::InvalidCorrelation(format!(
                        "entry ({i},{j}) = {v} is outside [-1, 1]"
                    )));
                }
                if v.to_bits() != entries[j * n + i].to_bits() {
                    return Err(ModelError::InvalidCorrelation(format!(
                        "entries ({i},{j}) and ({j},{i}) differ"
                    )));
                }
            }
        }
        Ok(Self { n, entries })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, ModelError> {
        let n = rows.len();
        if let Some((i, row)) = rows.iter().enumerate().find(|(_, r)| r.len() != n) {
            return Err(ModelError::InvalidCorrelation(format!(
                "row {i} has {} entries, expected {n}",
                row.len()
            )));
        }
        Self::new(n, rows.concat())
    }

    pub fn identity(n: usize) -> Self {
        Self::uniform(n, 0.0).expect("identity is always valid")
    }

    /// Every off-diagonal entry equal to `rho`.
    pub fn uniform(n: usize, rho: f64) -> Result<Self, ModelError> {
        let entries = (0..n * n)
            .map(|k| if k / n == k % n { 1.0 } else { rho })
            .collect();
        Self::new(n, entries)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.entries.chunks(self.n).map(<[f64]>::to_vec).collect()
    }

    /// Latent Gaussian correlation `sin(pi * rho / 2)` whose zero-threshold
    /// dichotomization reproduces `rho` as the binary correlation.
    pub fn latent(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |i, j| {
            if i == j {
                1.0
            } else {
                (PI * self.get(i, j) / 2.0).sin()
            }
        })
    }

    pub fn min_latent_eigenvalue(&self) -> f64 {
        SymmetricEigen::new(self.latent()).eigenvalues.min()
    }

    pub fn check_feasible(&self) -> Result<(), ModelError> {
        let min_eigenvalue = self.min_latent_eigenvalue();
        if min_eigenvalue < -PSD_TOLERANCE {
            return Err(ModelError::InfeasibleCorrelation { min_eigenvalue });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Order {
    pub security: usize,
    pub side: Side,
}

impl Order {
    pub fn new(security: usize, side: Side) -> Self {
        Self { security, side }
    }

    pub fn buy(security: usize) -> Self {
        Self::new(security, Side::Buy)
    }

    pub fn sell(security: usize) -> Self {
        Self::new(security, Side::Sell)
    }
}

/// Whether security `i` finishes up in the given atom.
#[inline]
pub fn atom_up(atom: usize, i: usize) -> bool {
    atom >> i & 1 == 1
}

/// `P(order | terminal outcome atom)`: `phi` when the side agrees with the
/// security's terminal move, `1 - phi` otherwise.
#[inline]
pub fn order_likelihood(order: Order, atom: usize, specs: &[SecuritySpec]) -> f64 {
    let phi = specs[order.security].phi;
    if Side::matching(atom_up(atom, order.security)) == order.side {
        phi
    } else {
        1.0 - phi
    }
}

/// The liquidity provider's belief over terminal outcome atoms.
#[derive(Debug, Clone, PartialEq)]
pub struct Posterior {
    n: usize,
    prob: Vec<f64>,
}

impl Posterior {
    pub fn prior(pmf: &JointOutcomePmf) -> Self {
        Self {
            n: pmf.n(),
            prob: pmf.probs().to_vec(),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn probs(&self) -> &[f64] {
        &self.prob
    }

    /// Bayes update with one order; the likelihood of the whole order flow
    /// factorizes across securities so updates commute.
    pub fn update(&self, order: Order, specs: &[SecuritySpec]) -> Result<Self, ModelError> {
        let mut next = self.clone();
        next.update_in_place(order, specs)?;
        Ok(next)
    }

    pub fn update_in_place(&mut self, order: Order, specs: &[SecuritySpec]) -> Result<(), ModelError> {
        debug_assert!(order.security < self.n);
        let mut total = 0.0;
        for (atom, p) in self.prob.iter_mut().enumerate() {
            *p *= order_likelihood(order, atom, specs);
            total += *p;
        }
        if !(total > 0.0) {
            return Err(ModelError::DegenerateBelief);
        }
        self.prob.iter_mut().for_each(|p| *p /= total);
        Ok(())
    }

    pub fn updated_with(&self, orders: &[Order], specs: &[SecuritySpec]) -> Result<Self, ModelError> {
        let mut next = self.clone();
        for &order in orders {
            next.update_in_place(order, specs)?;
        }
        Ok(next)
    }

    /// `P(security i finishes up | belief)`.
    pub fn prob_up(&self, i: usize) -> f64 {
        self.prob
            .iter()
            .enumerate()
            .filter(|(atom, _)| atom_up(*atom, i))
            .map(|(_, p)| p)
            .sum()
    }

    pub fn fair_price(&self, i: usize, specs: &[SecuritySpec]) -> f64 {
        fair_price(self, i, specs)
    }
}

/// Expected terminal price of security `i` under the belief:
/// `m + delta * (2 P(up) - 1)`.
pub fn fair_price(belief: &Posterior, i: usize, specs: &[SecuritySpec]) -> f64 {
    let spec = &specs[i];
    spec.m + spec.delta * (2.0 * belief.prob_up(i) - 1.0)
}

pub fn posterior_update(belief: &Posterior, order: Order, specs: &[SecuritySpec]) -> Result<Posterior, ModelError> {
    belief.update(order, specs)
}
