//! Joint law of the terminal moves: symmetric binary signs with prescribed
//! pairwise correlations, built as a dichotomized Gaussian.
//!
//! The law is assembled in the Walsh basis, where
//! `P(s) = 2^-n * sum_S E[prod_{i in S} s_i] * prod_{i in S} s_i`.
//! Odd-order moments vanish by sign symmetry, second-order moments are the
//! target correlations, and fourth-order moments follow from 4-dimensional
//! orthant probabilities. That pins every coefficient up to five securities.
//! Beyond that the law is estimated by quasi-random integration of the latent
//! Gaussian and then fitted to the exact pairwise margins.

use super::orthant::orthant4;
use super::{atom_up, CorrelationMatrix, ModelError};
use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, Normal};

/// Largest number of securities with an explicit `2^n`-atom law.
pub const MAX_JOINT_DIM: usize = 20;

const WALSH_MAX_DIM: usize = 5;
const QMC_SEED: u64 = 0x5eed_d1c4_07a1;
const QMC_CHUNK: usize = 1 << 15;
const FIT_TOLERANCE: f64 = 1e-13;
const FIT_MAX_SWEEPS: usize = 5_000;

#[derive(Debug, Clone, PartialEq)]
pub struct JointOutcomePmf {
    n: usize,
    prob: Vec<f64>,
}

impl JointOutcomePmf {
    pub fn n(&self) -> usize {
        self.n
    }

    /// Probabilities indexed by atom bitmask (bit `i` set: security `i` up).
    pub fn probs(&self) -> &[f64] {
        &self.prob
    }

    pub fn prob(&self, atom: usize) -> f64 {
        self.prob[atom]
    }

    pub fn marginal_up(&self, i: usize) -> f64 {
        self.prob
            .iter()
            .enumerate()
            .filter(|(a, _)| atom_up(*a, i))
            .map(|(_, p)| p)
            .sum()
    }

    /// `E[s_i s_j]` with `s = +1` for up moves.
    pub fn pair_moment(&self, i: usize, j: usize) -> f64 {
        self.prob
            .iter()
            .enumerate()
            .map(|(a, p)| if atom_up(a, i) == atom_up(a, j) { *p } else { -*p })
            .sum()
    }

    pub fn sampler(&self) -> AtomSampler {
        let mut acc = 0.0;
        let cdf = self
            .prob
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        AtomSampler { cdf }
    }
}

/// Inverse-CDF sampler over atoms.
#[derive(Debug, Clone)]
pub struct AtomSampler {
    cdf: Vec<f64>,
}

impl AtomSampler {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let total = *self.cdf.last().expect("non-empty law");
        let u = rng.gen::<f64>() * total;
        self.cdf.partition_point(|&c| c <= u).min(self.cdf.len() - 1)
    }
}

/// Maps standard normal draws to atoms through the latent correlation
/// `sin(pi rho / 2)`. Usable for any dimension; the factorization tolerates
/// singular (comonotone) latent matrices.
#[derive(Debug, Clone)]
pub struct LatentGaussianSampler {
    factor: DMatrix<f64>,
}

impl LatentGaussianSampler {
    pub fn new(rho: &CorrelationMatrix) -> Result<Self, ModelError> {
        rho.check_feasible()?;
        let eig = SymmetricEigen::new(rho.latent());
        let scale = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
        let factor = &eig.eigenvectors * DMatrix::from_diagonal(&scale);
        Ok(Self { factor })
    }

    pub fn n(&self) -> usize {
        self.factor.nrows()
    }

    /// Signs of the latent vector `L z`, packed as an atom. Only meaningful
    /// for `n <= 64`.
    pub fn atom(&self, normals: &[f64]) -> usize {
        let n = self.n();
        let mut atom = 0usize;
        for i in 0..n {
            let x: f64 = (0..n).map(|k| self.factor[(i, k)] * normals[k]).sum();
            if x > 0.0 {
                atom |= 1 << i;
            }
        }
        atom
    }
}

pub fn build_joint_pmf(n: usize, rho: &CorrelationMatrix) -> Result<JointOutcomePmf, ModelError> {
    if n != rho.n() {
        return Err(ModelError::DimensionMismatch {
            securities: n,
            matrix: rho.n(),
        });
    }
    if n > MAX_JOINT_DIM {
        return Err(ModelError::DimensionTooLarge { n, max: MAX_JOINT_DIM });
    }
    rho.check_feasible()?;

    let prob = if n <= WALSH_MAX_DIM {
        let mut prob = from_walsh(n, &walsh_coefficients(rho));
        clip_and_normalize(&mut prob);
        prob
    } else {
        let mut prob = quasi_random_law(rho)?;
        fit_pairwise_margins(n, rho, &mut prob);
        prob
    };
    Ok(JointOutcomePmf { n, prob })
}

/// Exact Walsh coefficients of the dichotomized Gaussian for `n <= 5`.
fn walsh_coefficients(rho: &CorrelationMatrix) -> Vec<f64> {
    let n = rho.n();
    let latent = rho.latent();
    let mut coef = vec![0.0; 1 << n];
    coef[0] = 1.0;
    for i in 0..n {
        for j in i + 1..n {
            coef[1 << i | 1 << j] = rho.get(i, j);
        }
    }
    for subset in 0usize..1 << n {
        if subset.count_ones() != 4 {
            continue;
        }
        let idx: Vec<usize> = (0..n).filter(|&i| subset >> i & 1 == 1).collect();
        let mut sub = [[0.0; 4]; 4];
        let mut pair_sum = 0.0;
        for a in 0..4 {
            for b in 0..4 {
                sub[a][b] = latent[(idx[a], idx[b])];
                if a < b {
                    pair_sum += rho.get(idx[a], idx[b]);
                }
            }
        }
        // P(all four up) = (1 + sum of pair moments + fourth moment) / 16
        coef[subset] = 16.0 * orthant4(&sub) - 1.0 - pair_sum;
    }
    coef
}

/// In-place unnormalized Walsh-Hadamard transform.
fn fwht(v: &mut [f64]) {
    let mut h = 1;
    while h < v.len() {
        for block in v.chunks_mut(2 * h) {
            let (lo, hi) = block.split_at_mut(h);
            for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                let (x, y) = (*a, *b);
                *a = x + y;
                *b = x - y;
            }
        }
        h *= 2;
    }
}

fn from_walsh(n: usize, coef: &[f64]) -> Vec<f64> {
    // after the transform, index b has bit i set when s_i = -1
    let mask = (1usize << n) - 1;
    let mut v = coef.to_vec();
    fwht(&mut v);
    let scale = 1.0 / (1usize << n) as f64;
    (0..=mask).map(|atom| v[!atom & mask] * scale).collect()
}

fn clip_and_normalize(prob: &mut [f64]) {
    prob.iter_mut().for_each(|p| *p = p.max(0.0));
    let total: f64 = prob.iter().sum();
    prob.iter_mut().for_each(|p| *p /= total);
}

/// Sign-symmetrized empirical law of the latent Gaussian over a shifted
/// Kronecker sequence.
fn quasi_random_law(rho: &CorrelationMatrix) -> Result<Vec<f64>, ModelError> {
    let n = rho.n();
    let sampler = LatentGaussianSampler::new(rho)?;
    let points = (1usize << (n + 3)).clamp(1 << 16, 1 << 20);
    let alpha = kronecker_steps(n);
    let mut rng = ChaCha8Rng::seed_from_u64(QMC_SEED);
    let shift: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
    let normal = Normal::standard();

    let chunks: Vec<Vec<usize>> = (0..points.div_ceil(QMC_CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut z = vec![0.0; n];
            let end = ((c + 1) * QMC_CHUNK).min(points);
            (c * QMC_CHUNK..end)
                .map(|k| {
                    for d in 0..n {
                        let u = (shift[d] + (k as f64 + 1.0) * alpha[d]).fract();
                        z[d] = normal.inverse_cdf(u.clamp(1e-15, 1.0 - 1e-15));
                    }
                    sampler.atom(&z)
                })
                .collect()
        })
        .collect();

    let mask = (1usize << n) - 1;
    let mut counts = vec![0u64; 1 << n];
    for atom in chunks.into_iter().flatten() {
        counts[atom] += 1;
        counts[!atom & mask] += 1;
    }
    let total = 2.0 * points as f64;
    Ok(counts.into_iter().map(|c| c as f64 / total).collect())
}

/// Additive recurrence steps `1/g^k`, with `g` the unique positive root of
/// `x^(d+1) = x + 1`.
fn kronecker_steps(d: usize) -> Vec<f64> {
    let mut g: f64 = 2.0;
    for _ in 0..100 {
        g -= (g.powi(d as i32 + 1) - g - 1.0) / ((d as f64 + 1.0) * g.powi(d as i32) - 1.0);
    }
    (1..=d).map(|k| (1.0 / g.powi(k as i32)).fract()).collect()
}

/// Iterative proportional fitting onto the exact 2x2 margins of every pair.
/// Keeps the law nonnegative and sign-symmetric.
fn fit_pairwise_margins(n: usize, rho: &CorrelationMatrix, prob: &mut [f64]) {
    for _ in 0..FIT_MAX_SWEEPS {
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                let r = rho.get(i, j);
                let target = [(1.0 - r) / 4.0, (1.0 + r) / 4.0];
                let mut cells = [0.0; 4];
                for (a, p) in prob.iter().enumerate() {
                    cells[cell(a, i, j)] += p;
                }
                for (c, mass) in cells.iter().enumerate() {
                    let want = target[usize::from(c == 0 || c == 3)];
                    worst = worst.max((mass - want).abs());
                }
                let factor: Vec<f64> = cells
                    .iter()
                    .enumerate()
                    .map(|(c, mass)| {
                        let want = target[usize::from(c == 0 || c == 3)];
                        if *mass > 0.0 {
                            want / mass
                        } else {
                            0.0
                        }
                    })
                    .collect();
                for (a, p) in prob.iter_mut().enumerate() {
                    *p *= factor[cell(a, i, j)];
                }
            }
        }
        if worst < FIT_TOLERANCE {
            break;
        }
    }
    let total: f64 = prob.iter().sum();
    prob.iter_mut().for_each(|p| *p /= total);
}

#[inline]
fn cell(atom: usize, i: usize, j: usize) -> usize {
    (atom >> i & 1) | (atom >> j & 1) << 1
}

#[cfg(test)]
mod tests {
    use super::*;

    fn check_moments(pmf: &JointOutcomePmf, rho: &CorrelationMatrix) {
        let n = pmf.n();
        assert!(pmf.probs().iter().all(|&p| p >= 0.0));
        assert!((pmf.probs().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for i in 0..n {
            assert!((pmf.marginal_up(i) - 0.5).abs() < 1e-9, "marginal {i}");
            for j in i + 1..n {
                let got = pmf.pair_moment(i, j);
                assert!((got - rho.get(i, j)).abs() < 1e-9, "pair ({i},{j}): {got} vs {}", rho.get(i, j));
            }
        }
    }

    #[test]
    fn two_securities_closed_form() {
        let rho = CorrelationMatrix::uniform(2, 0.8).unwrap();
        let pmf = build_joint_pmf(2, &rho).unwrap();
        // atoms: 0 = both down, 3 = both up
        assert!((pmf.prob(0b11) - 0.45).abs() < 1e-15);
        assert!((pmf.prob(0b00) - 0.45).abs() < 1e-15);
        assert!((pmf.prob(0b01) - 0.05).abs() < 1e-15);
        assert!((pmf.prob(0b10) - 0.05).abs() < 1e-15);
    }

    #[test]
    fn independence_is_uniform() {
        let pmf = build_joint_pmf(2, &CorrelationMatrix::identity(2)).unwrap();
        assert!(pmf.probs().iter().all(|&p| (p - 0.25).abs() < 1e-15));
    }

    #[test]
    fn three_securities_match_trivariate_orthant() {
        let rho = CorrelationMatrix::uniform(3, 0.5).unwrap();
        let pmf = build_joint_pmf(3, &rho).unwrap();
        check_moments(&pmf, &rho);
        // P(all up) = 1/8 + 3 asin(lambda) / (4 pi) with lambda = sin(pi/4)
        let lambda = (std::f64::consts::PI / 4.0).sin();
        let expected = 0.125 + 3.0 * lambda.asin() / (4.0 * std::f64::consts::PI);
        assert!((pmf.prob(0b111) - expected).abs() < 1e-14);
    }

    #[test]
    fn four_exchangeable_third_gives_one_fifth() {
        // binary rho = 1/3 has latent correlation 1/2, whose orthant is 1/5
        let rho = CorrelationMatrix::uniform(4, 1.0 / 3.0).unwrap();
        let pmf = build_joint_pmf(4, &rho).unwrap();
        check_moments(&pmf, &rho);
        assert!((pmf.prob(0b1111) - 0.2).abs() < 1e-12);
    }

    #[test]
    fn moment_grid() {
        for n in 2..=4 {
            for r in [-0.9, -0.5, 0.0, 0.5, 0.8, 0.9] {
                let rho = CorrelationMatrix::uniform(n, r).unwrap();
                match build_joint_pmf(n, &rho) {
                    Ok(pmf) => check_moments(&pmf, &rho),
                    Err(ModelError::InfeasibleCorrelation { .. }) => {
                        assert!(n > 2 && r < 0.0, "n={n} rho={r} unexpectedly infeasible")
                    }
                    Err(e) => panic!("{e}"),
                }
            }
        }
    }

    #[test]
    fn comonotone_pair() {
        let rho = CorrelationMatrix::uniform(2, 1.0).unwrap();
        let pmf = build_joint_pmf(2, &rho).unwrap();
        assert_eq!(pmf.prob(0b01), 0.0);
        assert!((pmf.prob(0b11) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn quasi_random_dimensions() {
        let mut rows = vec![vec![0.0; 7]; 7];
        for i in 0..7 {
            for j in 0..7 {
                rows[i][j] = if i == j { 1.0 } else if (i < 4) == (j < 4) { 0.6 } else { 0.1 };
            }
        }
        let rho = CorrelationMatrix::from_rows(&rows).unwrap();
        let pmf = build_joint_pmf(7, &rho).unwrap();
        check_moments(&pmf, &rho);
        // fourth-order moment close to the exact dichotomized value
        let exact4 = walsh_coefficients(&CorrelationMatrix::uniform(4, 0.6).unwrap())[0b1111];
        let mut got = 0.0;
        for (a, p) in pmf.probs().iter().enumerate() {
            let s: f64 = (0..4).map(|i| if atom_up(a, i) { 1.0 } else { -1.0 }).product();
            got += s * p;
        }
        assert!((got - exact4).abs() < 5e-3, "{got} vs {exact4}");
    }

    #[test]
    fn five_securities_are_deterministic_walsh() {
        let rho = CorrelationMatrix::uniform(5, 0.4).unwrap();
        let a = build_joint_pmf(5, &rho).unwrap();
        check_moments(&a, &rho);
        assert_eq!(a, build_joint_pmf(5, &rho).unwrap());
    }

    #[test]
    fn errors() {
        let rho = CorrelationMatrix::identity(21);
        assert!(matches!(build_joint_pmf(21, &rho), Err(ModelError::DimensionTooLarge { .. })));
        let rho = CorrelationMatrix::identity(2);
        assert!(matches!(build_joint_pmf(3, &rho), Err(ModelError::DimensionMismatch { .. })));
        let rho = CorrelationMatrix::uniform(3, -0.9).unwrap();
        assert!(matches!(build_joint_pmf(3, &rho), Err(ModelError::InfeasibleCorrelation { .. })));
    }

    #[test]
    fn latent_sampler_matches_law() {
        let rho = CorrelationMatrix::uniform(3, 0.5).unwrap();
        let pmf = build_joint_pmf(3, &rho).unwrap();
        let sampler = LatentGaussianSampler::new(&rho).unwrap();
        let normal = Normal::standard();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let draws = 200_000;
        let mut counts = [0usize; 8];
        for _ in 0..draws {
            let z: Vec<f64> = (0..3).map(|_| normal.inverse_cdf(rng.gen::<f64>().max(1e-300))).collect();
            counts[sampler.atom(&z)] += 1;
        }
        for (a, c) in counts.iter().enumerate() {
            let p = pmf.prob(a);
            let se = (p * (1.0 - p) / draws as f64).sqrt();
            assert!((*c as f64 / draws as f64 - p).abs() < 5.0 * se);
        }
    }
}
