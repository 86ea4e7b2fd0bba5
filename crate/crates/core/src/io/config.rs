//! JSON model configuration.
//!
//! ```json
//! {
//!   "securities": [{"symbol": "S1", "m": 50, "delta": 1, "phi": 0.75}, ...],
//!   "rho": [[1, 0.8], [0.8, 1]],
//!   "regime": "sync",
//!   "scenario": {"kind": "baseline"},
//!   "seed": 7,
//!   "periods": 1000
//! }
//! ```
//!
//! `timing`, `target`, `conditioning` and `coverage` are optional.

use crate::model::{CorrelationMatrix, SecuritySpec, Side, MAX_JOINT_DIM};
use crate::sim::{Market, MetricsQuery, Regime, Scenario, SimError, TickGenConfig, TimingParams};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("invalid `{path}`: {message}")]
    Validation { path: String, message: String },
    #[error("cannot read {path}: {message}")]
    Read { path: String, message: String },
}

fn invalid(path: impl Into<String>, message: impl ToString) -> ConfigError {
    ConfigError::Validation {
        path: path.into(),
        message: message.to_string(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub securities: Vec<SecuritySpec>,
    pub rho: CorrelationMatrix,
    pub regime: Regime,
    pub scenario: Scenario,
    pub seed: u64,
    pub periods: u64,
    pub timing: TimingParams,
    /// Security whose metrics are reported.
    pub target: usize,
    /// Side of the target's order that metrics condition on.
    pub conditioning: Side,
    pub coverage: Option<Vec<f64>>,
}

impl ModelConfig {
    pub fn market(&self) -> Result<Market, SimError> {
        Market::new(self.securities.clone(), self.rho.clone())
    }

    pub fn metrics_query(&self) -> MetricsQuery {
        MetricsQuery::new(self.regime, self.target, self.conditioning).with_misconception(self.scenario.misconception())
    }

    pub fn tick_config(&self) -> TickGenConfig {
        TickGenConfig {
            regime: self.regime,
            periods: self.periods,
            seed: self.seed,
            scenario: self.scenario.clone(),
            timing: self.timing.clone(),
            coverage: self.coverage.clone(),
        }
    }

    /// Canonical text: every field explicit, two-space indent, trailing newline.
    pub fn to_json(&self) -> String {
        let raw = RawConfig {
            securities: self
                .securities
                .iter()
                .map(|s| RawSecurity {
                    symbol: s.symbol().to_string(),
                    m: s.m(),
                    delta: s.delta(),
                    phi: s.phi(),
                })
                .collect(),
            rho: self.rho.rows(),
            regime: self.regime.label().to_string(),
            scenario: match self.scenario {
                Scenario::Baseline => RawScenario::Baseline,
                Scenario::Misconception { lambda } => RawScenario::Misconception { lambda },
                Scenario::Shock {
                    security,
                    epsilon,
                    threshold,
                } => RawScenario::Shock {
                    security,
                    epsilon,
                    threshold,
                },
            },
            seed: self.seed,
            periods: self.periods,
            timing: Some(RawTiming::from(&self.timing)),
            target: self.target,
            conditioning: self.conditioning,
            coverage: self.coverage.clone(),
        };
        let mut text = serde_json::to_string_pretty(&raw).expect("config serializes");
        text.push('\n');
        text
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSecurity {
    symbol: String,
    m: f64,
    delta: f64,
    phi: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
enum RawScenario {
    Baseline,
    Misconception {
        lambda: f64,
    },
    Shock {
        security: usize,
        epsilon: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        threshold: Option<f64>,
    },
}

#[derive(Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RawTiming {
    period_ms: u64,
    arrival_gap_ms: u64,
    jitter_ms: u64,
    quote_lag_ms: u64,
    sync_lag_ms: u64,
    terminal_ms: u64,
    half_spread: f64,
    trade_size: u64,
}

impl Default for RawTiming {
    fn default() -> Self {
        Self::from(&TimingParams::default())
    }
}

impl From<&TimingParams> for RawTiming {
    fn from(t: &TimingParams) -> Self {
        Self {
            period_ms: t.period_ms,
            arrival_gap_ms: t.arrival_gap_ms,
            jitter_ms: t.jitter_ms,
            quote_lag_ms: t.quote_lag_ms,
            sync_lag_ms: t.sync_lag_ms,
            terminal_ms: t.terminal_ms,
            half_spread: t.half_spread,
            trade_size: t.trade_size,
        }
    }
}

fn default_regime() -> String {
    "sync".into()
}

fn default_scenario() -> RawScenario {
    RawScenario::Baseline
}

fn default_periods() -> u64 {
    1
}

fn default_conditioning() -> Side {
    Side::Buy
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    securities: Vec<RawSecurity>,
    rho: Vec<Vec<f64>>,
    #[serde(default = "default_regime")]
    regime: String,
    #[serde(default = "default_scenario")]
    scenario: RawScenario,
    #[serde(default)]
    seed: u64,
    #[serde(default = "default_periods")]
    periods: u64,
    #[serde(default)]
    timing: Option<RawTiming>,
    #[serde(default)]
    target: usize,
    #[serde(default = "default_conditioning")]
    conditioning: Side,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    coverage: Option<Vec<f64>>,
}

pub fn parse_config(text: &str) -> Result<ModelConfig, ConfigError> {
    let raw: RawConfig = serde_json::from_str(text).map_err(|e| ConfigError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    validate(raw)
}

pub fn read_config(path: &Path) -> Result<ModelConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Read {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    parse_config(&text)
}

fn validate(raw: RawConfig) -> Result<ModelConfig, ConfigError> {
    let n = raw.securities.len();
    if n == 0 {
        return Err(invalid("securities", "at least one security is required"));
    }
    if n > MAX_JOINT_DIM {
        return Err(invalid("securities", format!("at most {MAX_JOINT_DIM} securities are supported, got {n}")));
    }
    let mut securities = Vec::with_capacity(n);
    let mut seen = BTreeSet::new();
    for (i, s) in raw.securities.into_iter().enumerate() {
        let spec = SecuritySpec::new(s.symbol, s.m, s.delta, s.phi).map_err(|e| match &e {
            crate::model::ModelError::InvalidSpec { field, .. } => invalid(format!("securities[{i}].{field}"), &e),
            _ => invalid(format!("securities[{i}]"), &e),
        })?;
        if !seen.insert(spec.symbol().to_string()) {
            return Err(invalid(format!("securities[{i}].symbol"), format!("duplicate symbol `{}`", spec.symbol())));
        }
        securities.push(spec);
    }

    if raw.rho.len() != n {
        return Err(invalid(
            "rho",
            format!("dimension mismatch: {n} securities but {} matrix rows", raw.rho.len()),
        ));
    }
    for (i, row) in raw.rho.iter().enumerate() {
        if row.len() != n {
            return Err(invalid(format!("rho[{i}]"), format!("expected {n} entries, got {}", row.len())));
        }
    }
    let rho = CorrelationMatrix::from_rows(&raw.rho).map_err(|e| invalid("rho", e))?;
    rho.check_feasible().map_err(|e| invalid("rho", e))?;

    let regime: Regime = raw.regime.parse().map_err(|e: String| invalid("regime", e))?;

    let scenario = match raw.scenario {
        RawScenario::Baseline => Scenario::Baseline,
        RawScenario::Misconception { lambda } => Scenario::Misconception { lambda },
        RawScenario::Shock {
            security,
            epsilon,
            threshold,
        } => Scenario::Shock {
            security,
            epsilon,
            threshold,
        },
    };
    if let Err(e) = scenario.validate(n) {
        let field = match scenario {
            Scenario::Misconception { .. } => "lambda",
            Scenario::Shock { security, .. } if security >= n => "security",
            Scenario::Shock { epsilon, .. } if !epsilon.is_finite() => "epsilon",
            _ => "threshold",
        };
        return Err(invalid(format!("scenario.{field}"), e));
    }

    if raw.periods == 0 {
        return Err(invalid("periods", "must be at least 1"));
    }
    let t = raw.timing.unwrap_or_default();
    let timing = TimingParams {
        period_ms: t.period_ms,
        arrival_gap_ms: t.arrival_gap_ms,
        jitter_ms: t.jitter_ms,
        quote_lag_ms: t.quote_lag_ms,
        sync_lag_ms: t.sync_lag_ms,
        terminal_ms: t.terminal_ms,
        half_spread: t.half_spread,
        trade_size: t.trade_size,
    };
    timing.validate(n).map_err(|e| invalid("timing", e))?;

    if raw.target >= n {
        return Err(invalid("target", format!("index {} out of range for {n} securities", raw.target)));
    }
    if let Some(cov) = &raw.coverage {
        if cov.len() != n {
            return Err(invalid("coverage", format!("expected {n} entries, got {}", cov.len())));
        }
        if let Some(i) = cov.iter().position(|c| !(0.0..=1.0).contains(c)) {
            return Err(invalid(format!("coverage[{i}]"), format!("{} outside [0, 1]", cov[i])));
        }
    }

    Ok(ModelConfig {
        securities,
        rho,
        regime,
        scenario,
        seed: raw.seed,
        periods: raw.periods,
        timing,
        target: raw.target,
        conditioning: raw.conditioning,
        coverage: raw.coverage,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const TWO: &str = r#"{
        "securities": [
            {"symbol": "S1", "m": 50, "delta": 1, "phi": 0.75},
            {"symbol": "S2", "m": 50, "delta": 1, "phi": 0.75}
        ],
        "rho": [[1, 0.8], [0.8, 1]]
    }"#;

    fn path_of(text: &str) -> String {
        match parse_config(text) {
            Err(ConfigError::Validation { path, .. }) => path,
            other => panic!("expected a validation error, got {other:?}"),
        }
    }

    #[test]
    fn two_security_config() {
        let c = parse_config(TWO).unwrap();
        assert_eq!(c.securities.len(), 2);
        assert_eq!(c.rho.get(0, 1), 0.8);
        assert_eq!(c.regime, Regime::Synchronized);
        assert_eq!(c.scenario, Scenario::Baseline);
        assert_eq!(c.timing, TimingParams::default());
        assert_eq!(c.conditioning, Side::Buy);
    }

    #[test]
    fn canonical_text_round_trips() {
        let mut c = parse_config(TWO).unwrap();
        c.scenario = Scenario::Shock {
            security: 1,
            epsilon: 0.3,
            threshold: Some(0.1),
        };
        c.coverage = Some(vec![1.0, 0.5]);
        let text = c.to_json();
        let back = parse_config(&text).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.to_json(), text);
    }

    #[test]
    fn validation_names_fields() {
        assert_eq!(path_of(&TWO.replacen("0.75", "1.0", 1)), "securities[0].phi");
        assert_eq!(path_of(&TWO.replace("\"S2\"", "\"S1\"")), "securities[1].symbol");
        let three = TWO.replace(
            "\"phi\": 0.75}\n        ]",
            "\"phi\": 0.75},\n            {\"symbol\": \"S3\", \"m\": 50, \"delta\": 1, \"phi\": 0.75}\n        ]",
        );
        assert!(three.contains("S3"));
        assert_eq!(path_of(&three.replace("0.8], [0.8", "0.9], [0.9")), "rho");
        assert_eq!(path_of(&TWO.replace("[0.8, 1]", "[0.7, 1]")), "rho");
        assert_eq!(path_of(&TWO.replace("]]", "]], \"regime\": \"async\"")), "regime");
        assert_eq!(path_of(&TWO.replace("]]", "]], \"target\": 2")), "target");
        assert_eq!(path_of(&TWO.replace("]]", "]], \"coverage\": [1, 2]")), "coverage[1]");
        assert_eq!(
            path_of(&TWO.replace("]]", "]], \"scenario\": {\"kind\": \"misconception\", \"lambda\": 2}")),
            "scenario.lambda"
        );
        assert_eq!(path_of(&TWO.replace("]]", "]], \"timing\": {\"terminal_ms\": 10}")), "timing");
    }

    #[test]
    fn malformed_documents() {
        assert!(matches!(parse_config("{"), Err(ConfigError::Parse { line: 1, .. })));
        assert!(matches!(
            parse_config(&TWO.replace("]]", "]], \"colour\": 1")),
            Err(ConfigError::Parse { .. })
        ));
    }
}
