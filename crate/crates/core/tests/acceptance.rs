//! Acceptance suite. Every criterion prints one PASS/FAIL line; the process
//! fails if any criterion fails.

mod common;

use common::two_security_oracle;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeSet;
use std::time::{Duration, Instant};
use syncmark::analytics::{self, ReturnsMatrix};
use syncmark::io::{self, parse_config};
use syncmark::model::{CorrelationMatrix, SecuritySpec, Side};
use syncmark::sim::{self, Market, MarketMetrics, MetricsQuery, Regime, TickGenConfig};
use syncmark::tick::TickSeries;

const EXACT_TOL: f64 = 1e-12;

type Check = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn close(label: &str, got: f64, want: f64, tol: f64) -> Result<(), String> {
    ensure((got - want).abs() <= tol, || format!("{label} = {got}, expected {want} within {tol:e}"))
}

fn spec(symbol: &str, phi: f64) -> SecuritySpec {
    SecuritySpec::new(symbol, 50.0, 1.0, phi).unwrap()
}

fn market(n: usize, phi: f64, rho: f64) -> Market {
    let specs = (1..=n).map(|i| spec(&format!("S{i}"), phi)).collect();
    Market::new(specs, CorrelationMatrix::uniform(n, rho).unwrap()).unwrap()
}

fn exact(m: &Market, regime: Regime, side: Side) -> MarketMetrics {
    m.exact_metrics(&MetricsQuery::new(regime, 0, side)).unwrap()
}

fn c1_reference_values() -> Check {
    let m = market(2, 0.75, 0.8);
    let u = exact(&m, Regime::Unsynchronized, Side::Buy);
    let s = exact(&m, Regime::Synchronized, Side::Buy);
    close("unsync cost", u.cost, 0.5, EXACT_TOL)?;
    close("unsync error", u.error, 0.75, EXACT_TOL)?;
    close("unsync informed profit", u.informed_profit, 0.5, EXACT_TOL)?;
    close("sync informed profit", s.informed_profit, 0.46875, EXACT_TOL)?;
    Ok(format!(
        "unsync ({}, {}, {}), sync informed profit {}",
        u.cost, u.error, u.informed_profit, s.informed_profit
    ))
}

fn c2_synchronized_metrics() -> Check {
    let m = market(2, 0.75, 0.8);
    let s = exact(&m, Regime::Synchronized, Side::Buy);
    close("sync cost", s.cost, 0.46, EXACT_TOL)?;
    close("sync error", s.error, 0.703125, EXACT_TOL)?;
    let (oc, oe, op) = two_security_oracle(0.75, 0.8, true);
    close("oracle cost", oc, s.cost, EXACT_TOL)?;
    close("oracle error", oe, s.error, EXACT_TOL)?;
    close("oracle informed profit", op, s.informed_profit, EXACT_TOL)?;
    let query = MetricsQuery::new(Regime::Synchronized, 0, Side::Buy);
    let mc = m.mc_metrics(&query, 1_000_000, 20_240_917).map_err(|e| e.to_string())?;
    close("mc cost", mc.cost, s.cost, 3.0 * mc.std_err.cost)?;
    close("mc error", mc.error, s.error, 3.0 * mc.std_err.error)?;
    close("mc informed profit", mc.informed_profit, s.informed_profit, 3.0 * mc.std_err.informed_profit)?;
    Ok(format!(
        "exact cost {} error {}; mc cost {:.5}±{:.5} error {:.5}±{:.5}",
        s.cost, s.error, mc.cost, mc.std_err.cost, mc.error, mc.std_err.error
    ))
}

fn c3_zero_correlation() -> Check {
    let mut compared = 0;
    for n in [2, 3] {
        for phi in [0.6, 0.75, 0.9] {
            let m = market(n, phi, 0.0);
            for side in [Side::Buy, Side::Sell] {
                let s = exact(&m, Regime::Synchronized, side);
                let u = exact(&m, Regime::Unsynchronized, side);
                close("cost gap", s.cost, u.cost, EXACT_TOL)?;
                close("error gap", s.error, u.error, EXACT_TOL)?;
                close("informed profit gap", s.informed_profit, u.informed_profit, EXACT_TOL)?;
                compared += 1;
            }
        }
    }
    Ok(format!("{compared} configurations identical"))
}

fn c4_monotone_benefit() -> Check {
    let mut points = 0;
    for phi in [0.6, 0.75, 0.9] {
        for k in -9..=9 {
            let rho = k as f64 / 10.0;
            let m = market(2, phi, rho);
            let s = exact(&m, Regime::Synchronized, Side::Buy);
            let u = exact(&m, Regime::Unsynchronized, Side::Buy);
            let pairs = [
                ("cost", s.cost, u.cost),
                ("error", s.error, u.error),
                ("informed profit", s.informed_profit, u.informed_profit),
            ];
            for (name, sv, uv) in pairs {
                if k == 0 {
                    close(&format!("{name} at rho 0, phi {phi}"), sv, uv, EXACT_TOL)?;
                } else {
                    ensure(sv < uv - EXACT_TOL, || {
                        format!("{name} at rho {rho}, phi {phi}: sync {sv} not below unsync {uv}")
                    })?;
                }
            }
            points += 1;
        }
    }
    let end = exact(&market(2, 0.75, 1.0), Regime::Synchronized, Side::Buy);
    close("cost at rho 1", end.cost, 0.4375, EXACT_TOL)?;
    Ok(format!("{points} grid points ordered; rho = 1 cost {}", end.cost))
}

fn c5_misconception_reversal() -> Check {
    let m = market(2, 0.75, 0.8);
    let q = |regime| MetricsQuery::new(regime, 0, Side::Buy).with_misconception(0.5);
    let s = m.exact_metrics(&q(Regime::Synchronized)).map_err(|e| e.to_string())?;
    let u = m.exact_metrics(&q(Regime::Unsynchronized)).map_err(|e| e.to_string())?;
    ensure(s.error > u.error, || format!("sync error {} not above unsync error {}", s.error, u.error))?;
    Ok(format!("sync error {:.6} > unsync error {:.6}", s.error, u.error))
}

const TWO_SECURITY: &str = r#"{
    "securities": [
        {"symbol": "S1", "m": 50, "delta": 1, "phi": 0.75},
        {"symbol": "S2", "m": 50, "delta": 1, "phi": 0.75}
    ],
    "rho": [[1, 0.8], [0.8, 1]],
    "seed": 11,
    "periods": 10000
}"#;

fn c6_response_ordering() -> Check {
    let config = parse_config(TWO_SECURITY).map_err(|e| e.to_string())?;
    let m = config.market().map_err(|e| e.to_string())?;
    let (max_lag, grid) = (5.0, 0.1);
    let mut reach = Vec::new();
    let mut sync_curve = None;
    for regime in [Regime::Synchronized, Regime::Unsynchronized] {
        let mut tc = config.tick_config();
        tc.regime = regime;
        let ticks = sim::gen_ticks(&m, &tc).map_err(|e| e.to_string())?;
        let curve = analytics::decompose_response(&ticks, "S1", "S2", max_lag, grid, analytics::DEFAULT_WINDOW_MS)
            .map_err(|e| e.to_string())?;
        let lag = curve
            .first_lag_reaching(0.9)
            .ok_or_else(|| format!("{regime} response never reaches 0.9"))?;
        reach.push(lag);
        if regime == Regime::Synchronized {
            sync_curve = Some(curve);
        }
    }
    ensure(reach[0] < reach[1], || {
        format!("sync reaches 0.9 at {} s, unsync at {} s", reach[0], reach[1])
    })?;
    let curve = sync_curve.expect("synchronized curve");
    let c = curve.components.as_ref().expect("decomposed");
    let share = c.hft[0] / curve.values[0];
    ensure(share >= 0.9, || format!("H share of the first-lag response is {share}"))?;
    Ok(format!(
        "0.9 reached at {} s (sync) vs {} s (unsync); H share at first lag {:.4}",
        reach[0], reach[1], share
    ))
}

fn c7_activity_association() -> Check {
    let coverage = [0.0, 0.0, 0.0, 0.5, 0.5, 0.5, 1.0, 1.0, 1.0, 1.0];
    let n = coverage.len();
    let specs: Vec<SecuritySpec> = (0..n).map(|i| spec(&format!("S{i:02}"), 0.75)).collect();
    let m = Market::new(specs, CorrelationMatrix::uniform(n, 0.5).unwrap()).map_err(|e| e.to_string())?;
    let mut tc = TickGenConfig::new(Regime::Synchronized, 2000, 5);
    tc.timing.terminal_ms = 20_000;
    tc.timing.period_ms = 30_000;
    tc.coverage = Some(coverage.to_vec());
    let ticks = sim::gen_ticks(&m, &tc).map_err(|e| e.to_string())?;
    let rm = analytics::returns(&ticks, 1.0).map_err(|e| e.to_string())?;
    let (mut x, mut y) = (Vec::new(), Vec::new());
    for (i, symbol) in rm.symbols.iter().enumerate() {
        x.push(analytics::hft_fraction(&ticks, symbol).map_err(|e| e.to_string())?);
        y.push(analytics::index_correlation(&rm, i).map_err(|e| e.to_string())?);
    }
    let fit = analytics::ols_fit(&x, &y).map_err(|e| e.to_string())?;
    ensure(fit.slope > 0.0, || format!("slope {} is not positive", fit.slope))?;
    ensure(fit.r_squared > 0.3, || format!("R^2 {} is not above 0.3", fit.r_squared))?;
    Ok(format!("slope {:.4}, R^2 {:.4}", fit.slope, fit.r_squared))
}

/// Random correlation matrix from two-factor loadings plus idiosyncratic variance 0.5.
fn random_correlation(rng: &mut ChaCha8Rng, n: usize) -> CorrelationMatrix {
    let loads: Vec<[f64; 2]> = (0..n).map(|_| [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]).collect();
    let cov = |i: usize, j: usize| {
        loads[i][0] * loads[j][0] + loads[i][1] * loads[j][1] + if i == j { 0.5 } else { 0.0 }
    };
    let mut entries = vec![1.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let r = cov(i, j) / (cov(i, i) * cov(j, j)).sqrt();
            entries[i * n + j] = r;
            entries[j * n + i] = r;
        }
    }
    CorrelationMatrix::new(n, entries).unwrap()
}

fn spanning_trees(n: usize) -> Vec<Vec<(usize, usize)>> {
    let total = n.pow((n - 2) as u32);
    (0..total)
        .map(|code| {
            let seq: Vec<usize> = (0..n - 2).map(|d| code / n.pow(d as u32) % n).collect();
            let mut degree = vec![1; n];
            seq.iter().for_each(|&v| degree[v] += 1);
            let mut edges = Vec::new();
            for &v in &seq {
                let leaf = (0..n).find(|&u| degree[u] == 1).unwrap();
                edges.push((leaf.min(v), leaf.max(v)));
                degree[leaf] -= 1;
                degree[v] -= 1;
            }
            let rest: Vec<usize> = (0..n).filter(|&u| degree[u] == 1).collect();
            edges.push((rest[0], rest[1]));
            edges
        })
        .collect()
}

fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = 1.0 - rng.gen::<f64>();
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

fn c8_spanning_tree() -> Check {
    let n = 6;
    let labels: Vec<String> = (0..n).map(|i| format!("A{i}")).collect();
    let trees = spanning_trees(n);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for trial in 0..20 {
        let corr = random_correlation(&mut rng, n);
        let weight = |t: &Vec<(usize, usize)>| -> f64 {
            t.iter().map(|&(a, b)| analytics::correlation_distance(corr.get(a, b))).sum()
        };
        let best = trees
            .iter()
            .min_by(|a, b| weight(a).total_cmp(&weight(b)))
            .expect("trees exist");
        let want: BTreeSet<(String, String)> =
            best.iter().map(|&(a, b)| (labels[a].clone(), labels[b].clone())).collect();
        let got: BTreeSet<(String, String)> = analytics::mst(&corr, &labels, None)
            .map_err(|e| e.to_string())?
            .edges
            .into_iter()
            .map(|e| (e.a, e.b))
            .collect();
        ensure(got == want, || format!("trial {trial}: tree {got:?} differs from oracle {want:?}"))?;
    }

    // two sectors of four, returns driven by a market and a sector factor
    let cells = 5000;
    let mut returns: Vec<Vec<Option<f64>>> = (0..8).map(|_| Vec::with_capacity(cells)).collect();
    for _ in 0..cells {
        let market = standard_normal(&mut rng);
        let sector = [standard_normal(&mut rng), standard_normal(&mut rng)];
        for (s, col) in returns.iter_mut().enumerate() {
            let r = 0.3 * market + 0.8 * sector[s / 4] + 0.5 * standard_normal(&mut rng);
            col.push(Some(1e-3 * r));
        }
    }
    let rm = ReturnsMatrix {
        dt_s: 1.0,
        start_ns: 0,
        symbols: (0..8).map(|i| format!("B{i}")).collect(),
        returns,
    };
    let corr = analytics::correlation_matrix(&rm).map_err(|e| e.to_string())?;
    let tree = analytics::mst(&corr, &rm.symbols, None).map_err(|e| e.to_string())?;
    let block = |s: &str| s[1..].parse::<usize>().unwrap() / 4;
    let cross = tree.edges.iter().filter(|e| block(&e.a) != block(&e.b)).count();
    ensure(cross == 1, || format!("{cross} inter-block edges"))?;
    Ok(format!("20 random matrices match the {}-tree oracle; 1 inter-block edge", trees.len()))
}

fn tick_bytes(ticks: &TickSeries) -> Vec<u8> {
    let mut buf = Vec::new();
    io::write_ticks_to(ticks, &mut buf).unwrap();
    buf
}

fn c9_reproducibility() -> Check {
    let config = parse_config(TWO_SECURITY).map_err(|e| e.to_string())?;
    let text = config.to_json();
    let again = parse_config(&text).map_err(|e| e.to_string())?;
    ensure(again == config && again.to_json() == text, || "config round trip changed the document".into())?;

    let m = config.market().map_err(|e| e.to_string())?;
    let mut tc = config.tick_config();
    tc.periods = 500;
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| {
            let ticks = sim::gen_ticks(&m, &tc).unwrap();
            let mc = m
                .mc_metrics(&MetricsQuery::new(Regime::Synchronized, 0, Side::Buy), 100_000, 3)
                .unwrap();
            (tick_bytes(&ticks), format!("{mc:?}"))
        })
    };
    let (one, four) = (run(1), run(4));
    ensure(one == four, || "output depends on the worker count".into())?;
    ensure(one == run(4), || "repeated seeded runs differ".into())?;

    let back = io::read_ticks_from(one.0.as_slice()).map_err(|e| e.to_string())?;
    ensure(tick_bytes(&back) == one.0, || "tick CSV round trip changed bytes".into())?;
    Ok(format!("{} tick bytes identical across 1 and 4 workers and through a round trip", one.0.len()))
}

struct Criterion {
    id: u32,
    name: &'static str,
    limit: Option<Duration>,
    run: fn() -> Check,
}

fn main() {
    let criteria = [
        Criterion { id: 1, name: "two-security reference values (exact)", limit: Some(Duration::from_secs(1)), run: c1_reference_values },
        Criterion { id: 2, name: "synchronized cost and error, exact and Monte Carlo", limit: Some(Duration::from_secs(30)), run: c2_synchronized_metrics },
        Criterion { id: 3, name: "zero correlation makes the regimes identical", limit: None, run: c3_zero_correlation },
        Criterion { id: 4, name: "synchronization lowers cost, error and informed profit", limit: Some(Duration::from_secs(60)), run: c4_monotone_benefit },
        Criterion { id: 5, name: "misconception reverses the error ordering", limit: None, run: c5_misconception_reversal },
        Criterion { id: 6, name: "synchronized prices respond faster, through HFT", limit: Some(Duration::from_secs(120)), run: c6_response_ordering },
        Criterion { id: 7, name: "index correlation rises with HFT activity", limit: None, run: c7_activity_association },
        Criterion { id: 8, name: "spanning tree matches brute force and recovers blocks", limit: None, run: c8_spanning_tree },
        Criterion { id: 9, name: "round trips and worker-count independence", limit: None, run: c9_reproducibility },
    ];
    let mut failed = 0;
    for c in &criteria {
        let start = Instant::now();
        let result = std::panic::catch_unwind(c.run).unwrap_or_else(|_| Err("panicked".into()));
        let elapsed = start.elapsed();
        let result = result.and_then(|detail| match c.limit {
            Some(limit) if elapsed > limit => Err(format!("{detail}; took {elapsed:.2?}, limit {limit:?}")),
            _ => Ok(detail),
        });
        match result {
            Ok(detail) => println!("PASS criterion {} {}: {} [{:.2?}]", c.id, c.name, detail, elapsed),
            Err(why) => {
                failed += 1;
                println!("FAIL criterion {} {}: {} [{:.2?}]", c.id, c.name, why, elapsed);
            }
        }
    }
    println!("acceptance: {} passed, {} failed", criteria.len() - failed, failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
