//! Positive-orthant probabilities of centered Gaussian vectors, used to pin
//! the even-order moments of the dichotomized joint law.

use std::f64::consts::PI;
use std::sync::OnceLock;

const PANELS: usize = 8;
const NODES: usize = 24;

/// `P(X1 > 0, X2 > 0)` for unit-variance X with correlation `r`.
pub fn orthant2(r: f64) -> f64 {
    0.25 + r.clamp(-1.0, 1.0).asin() / (2.0 * PI)
}

/// `P(X > 0)` for a 4-dimensional centered Gaussian with correlation matrix
/// `r`.
///
/// Integrates Plackett's identity along `R(t) = t R + (1 - t) I` from the
/// identity (where the probability is 1/16). The derivative with respect to
/// `r_kl` is the bivariate density at the origin times the conditional
/// orthant probability of the remaining pair. The substitution
/// `t = 1 - u^2` absorbs the inverse square-root singularity at `t = 1`
/// when some `|r_kl| = 1`.
pub fn orthant4(r: &[[f64; 4]; 4]) -> f64 {
    let rule = gauss_legendre();
    let width = 1.0 / PANELS as f64;
    let mut integral = 0.0;
    for panel in 0..PANELS {
        let lo = panel as f64 * width;
        for &(x, w) in rule {
            let u = lo + width * (x + 1.0) / 2.0;
            let t = 1.0 - u * u;
            integral += w * width / 2.0 * 2.0 * u * plackett_derivative(r, t);
        }
    }
    1.0 / 16.0 + integral
}

fn plackett_derivative(r: &[[f64; 4]; 4], t: f64) -> f64 {
    let mut total = 0.0;
    for k in 0..4 {
        for l in k + 1..4 {
            let r_kl = r[k][l];
            if r_kl == 0.0 {
                continue;
            }
            let q = t * r_kl;
            let det = (1.0 - q) * (1.0 + q);
            let density = 1.0 / (2.0 * PI * det.sqrt());
            let mut rest = (0..4).filter(|&x| x != k && x != l);
            let (a, b) = (rest.next().unwrap(), rest.next().unwrap());
            // Schur complement of the (k, l) block
            let proj = |x: usize, y: usize| {
                let (xk, xl) = (t * r[x][k], t * r[x][l]);
                let (yk, yl) = (t * r[y][k], t * r[y][l]);
                (xk * yk + xl * yl - q * (xk * yl + xl * yk)) / det
            };
            let var_a = (1.0 - proj(a, a)).max(0.0);
            let var_b = (1.0 - proj(b, b)).max(0.0);
            let cov_ab = t * r[a][b] - proj(a, b);
            let denom = (var_a * var_b).sqrt();
            let partial = if denom > 0.0 { (cov_ab / denom).clamp(-1.0, 1.0) } else { 0.0 };
            total += r_kl * density * orthant2(partial);
        }
    }
    total
}

fn gauss_legendre() -> &'static [(f64, f64)] {
    static RULE: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    RULE.get_or_init(|| legendre_rule(NODES))
}

/// Nodes and weights of the `n`-point Gauss-Legendre rule on [-1, 1].
fn legendre_rule(n: usize) -> Vec<(f64, f64)> {
    let mut rule = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let step = p1 / dp;
            x -= step;
            if step.abs() < 1e-16 {
                break;
            }
        }
        rule.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
    }
    rule
}

#[cfg(test)]
mod tests {
    use super::*;

    fn equi(r: f64) -> [[f64; 4]; 4] {
        let mut m = [[r; 4]; 4];
        (0..4).for_each(|i| m[i][i] = 1.0);
        m
    }

    #[test]
    fn legendre_integrates_polynomials() {
        let rule = legendre_rule(NODES);
        let w: f64 = rule.iter().map(|(_, w)| w).sum();
        assert!((w - 2.0).abs() < 1e-14);
        let x4: f64 = rule.iter().map(|(x, w)| w * x.powi(4)).sum();
        assert!((x4 - 0.4).abs() < 1e-14);
    }

    #[test]
    fn identity_is_one_sixteenth() {
        assert!((orthant4(&equi(0.0)) - 1.0 / 16.0).abs() < 1e-15);
    }

    #[test]
    fn equicorrelated_half_is_one_fifth() {
        // exchangeable Gaussian with r = 1/2: P(all positive) = 1/(n + 1)
        assert!((orthant4(&equi(0.5)) - 0.2).abs() < 1e-12);
    }

    #[test]
    fn independent_blocks_factorize() {
        let (r1, r2) = (0.7, -0.35);
        let mut m = equi(0.0);
        m[0][1] = r1;
        m[1][0] = r1;
        m[2][3] = r2;
        m[3][2] = r2;
        let expected = orthant2(r1) * orthant2(r2);
        assert!((orthant4(&m) - expected).abs() < 1e-12);
    }

    #[test]
    fn comonotone_pair_reduces_to_trivariate() {
        // X0 == X1 almost surely: the 4-orthant equals the 3-orthant of (X0, X2, X3)
        let (a, b, c): (f64, f64, f64) = (0.3, 0.2, 0.4);
        let m = [
            [1.0, 1.0, a, b],
            [1.0, 1.0, a, b],
            [a, a, 1.0, c],
            [b, b, c, 1.0],
        ];
        let tri = 0.125 + (a.asin() + b.asin() + c.asin()) / (4.0 * PI);
        assert!((orthant4(&m) - tri).abs() < 1e-9, "{} vs {tri}", orthant4(&m));
    }
}
