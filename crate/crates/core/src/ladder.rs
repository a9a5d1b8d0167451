//! Convex geometry of monotonically decaying distributions.
//!
//! Every decaying distribution over `N` states is a unique convex
//! combination of the "ladders" `sigma^i` (uniform on the first `i` states).
//! The weights `q` of that combination bound all distances to ladders
//! through the matrix `V_{ik} = min(i, k) / max(i, k)`: by convexity of the
//! total variation distance, `D(pi, sigma^k) <= 1 - (V q)_k`. The inequality
//! is strict whenever `q` puts weight on ladders both shorter and longer
//! than `k`, so exact distances are computed directly.
//!
//! Indices in this module follow the ladder convention: cutoffs and `V`
//! rows are 1-based counts, vector storage is 0-based.
//!
//! Two logarithms appear and are kept apart: the number of ladders in the
//! candidate set is `n = log2 N`, while the optimality bound uses the
//! natural log.

use nalgebra::DMatrix;

use crate::markov::{tv_distance, Distribution};
use crate::{Error, Result};

/// Adjacent increases up to this size count as ties.
pub const MONOTONE_TOL: f64 = 1e-12;

/// `sigma^cutoff` over `n_states` states.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LadderDistribution {
    pub n_states: usize,
    pub cutoff: usize,
}

impl LadderDistribution {
    pub fn new(n_states: usize, cutoff: usize) -> Result<Self> {
        if cutoff == 0 || cutoff > n_states {
            return Err(Error::Argument(format!(
                "ladder cutoff {cutoff} outside 1..={n_states}"
            )));
        }
        Ok(Self { n_states, cutoff })
    }

    pub fn to_distribution(&self) -> Distribution {
        let mut probs = vec![0.0; self.n_states];
        probs[..self.cutoff].fill(1.0 / self.cutoff as f64);
        Distribution::new(probs).expect("ladder is a distribution")
    }
}

/// `sigma^i`: mass `1/i` on each of the first `i` states.
pub fn ladder(n_states: usize, cutoff: usize) -> Result<Distribution> {
    Ok(LadderDistribution::new(n_states, cutoff)?.to_distribution())
}

/// The log-sized candidate set `{sigma^(2^k) : k = 0..n-1}` over
/// `padded_n = 2^n` states.
#[derive(Clone, Debug, PartialEq)]
pub struct LadderSet {
    pub padded_n: usize,
    pub bits: u32,
    pub members: Vec<LadderDistribution>,
}

/// Builds the candidate set, padding `n_states` up to a power of two.
pub fn ladder_set(n_states: usize) -> Result<LadderSet> {
    if n_states < 2 {
        return Err(Error::Argument(format!("need at least 2 states, got {n_states}")));
    }
    let padded_n = n_states.next_power_of_two();
    let bits = padded_n.trailing_zeros();
    let members = (0..bits)
        .map(|k| LadderDistribution { n_states: padded_n, cutoff: 1 << k })
        .collect();
    Ok(LadderSet { padded_n, bits, members })
}

/// Extends `pi` with zero-probability states up to the next power of two.
pub fn pad_to_power_of_two(pi: &Distribution) -> Distribution {
    let target = pi.len().next_power_of_two();
    let mut probs = pi.as_slice().to_vec();
    probs.resize(target, 0.0);
    Distribution::new(probs).expect("padding keeps the mass")
}

/// Weights of `pi = sum_i q_i sigma^i`.
#[derive(Clone, Debug, PartialEq)]
pub struct QDecomposition {
    pub q: Distribution,
    pub source_n: usize,
}

fn check_decaying(pi: &Distribution) -> Result<()> {
    match pi.first_increase(MONOTONE_TOL) {
        Some(i) => Err(Error::Monotonicity { index: i + 1, prev: pi[i], next: pi[i + 1] }),
        None => Ok(()),
    }
}

/// `q_i = i (pi_i - pi_{i+1})` for `i < N`, `q_N = N pi_N`.
pub fn q_decompose(pi: &Distribution) -> Result<QDecomposition> {
    check_decaying(pi)?;
    let p = pi.as_slice();
    let n = p.len();
    let q: Vec<f64> = (0..n)
        .map(|i| {
            let next = if i + 1 < n { p[i + 1] } else { 0.0 };
            ((i + 1) as f64 * (p[i] - next)).max(0.0)
        })
        .collect();
    Ok(QDecomposition { q: Distribution::new(q)?, source_n: n })
}

/// `pi_j = sum_{i >= j} q_i / i`.
pub fn q_recompose(q: &Distribution) -> Distribution {
    let qs = q.as_slice();
    let mut probs = vec![0.0; qs.len()];
    let mut acc = 0.0;
    for i in (0..qs.len()).rev() {
        acc += qs[i] / (i + 1) as f64;
        probs[i] = acc;
    }
    Distribution::new(probs).expect("convex combination of ladders")
}

/// `V_{ik}` for 1-based `i`, `k`.
pub fn v_entry(i: usize, k: usize) -> f64 {
    i.min(k) as f64 / i.max(k) as f64
}

fn check_cutoff(n: usize, k: usize) -> Result<()> {
    if k == 0 || k > n {
        return Err(Error::Argument(format!("ladder cutoff {k} outside 1..={n}")));
    }
    Ok(())
}

/// `D(pi, sigma^k)` for a decaying `pi` and 1-based cutoff `k`.
pub fn distance_to_ladder(pi: &Distribution, k: usize) -> Result<f64> {
    check_cutoff(pi.len(), k)?;
    check_decaying(pi)?;
    Ok(distance_from_probs(pi.as_slice(), k))
}

/// The convexity bound `1 - v_k . q >= D(pi, sigma^k)`.
pub fn convexity_bound(pi: &Distribution, k: usize) -> Result<f64> {
    check_cutoff(pi.len(), k)?;
    let dec = q_decompose(pi)?;
    Ok(bound_from_q(dec.q.as_slice(), k))
}

fn bound_from_q(q: &[f64], k: usize) -> f64 {
    let overlap: f64 = q.iter().enumerate().map(|(i, qi)| qi * v_entry(i + 1, k)).sum();
    (1.0 - overlap).max(0.0)
}

fn distance_from_probs(p: &[f64], k: usize) -> f64 {
    let level = 1.0 / k as f64;
    let overlap: f64 = p[..k].iter().map(|&x| x.min(level)).sum();
    (1.0 - overlap).max(0.0)
}

/// Upper bound `1 - 1/(2(n+1))` on the distance from any decaying
/// distribution over `2^n` states to the candidate set.
pub fn theorem1_bound(bits: u32) -> f64 {
    1.0 - 1.0 / (2.0 * (bits as f64 + 1.0))
}

/// Closest member of the candidate set.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BestLadder {
    /// `k` with cutoff `2^k`.
    pub exponent: u32,
    pub cutoff: usize,
    pub distance: f64,
    /// `n = log2` of the padded state count.
    pub bits: u32,
    pub bound: f64,
}

pub fn best_initial(pi: &Distribution) -> Result<BestLadder> {
    let set = ladder_set(pi.len())?;
    let padded = pad_to_power_of_two(pi);
    check_decaying(&padded)?;
    let (exponent, distance) = (0..set.bits)
        .map(|k| (k, distance_from_probs(padded.as_slice(), 1 << k)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("set is non-empty");
    Ok(BestLadder {
        exponent,
        cutoff: 1 << exponent,
        distance,
        bits: set.bits,
        bound: theorem1_bound(set.bits),
    })
}

/// Dyadic block sums `L(q)` over `n + 1` entries.
#[derive(Clone, Debug, PartialEq)]
pub struct CoarseGrained {
    pub weights: Vec<f64>,
}

/// `L(q)_1 = q_1`, `L(q)_j = sum_{l = 2^(j-2)+1}^{2^(j-1)} q_l`.
pub fn coarse_grain(q: &[f64]) -> Result<CoarseGrained> {
    if q.is_empty() || !q.len().is_power_of_two() {
        return Err(Error::Argument(format!(
            "coarse graining needs a power-of-two length, got {}",
            q.len()
        )));
    }
    let bits = q.len().trailing_zeros() as usize;
    let mut weights = Vec::with_capacity(bits + 1);
    weights.push(q[0]);
    for j in 2..=bits + 1 {
        let lo = (1usize << (j - 2)) + 1;
        let hi = 1usize << (j - 1);
        weights.push(q[lo - 1..hi].iter().sum());
    }
    Ok(CoarseGrained { weights })
}

/// `V` and its closed-form tridiagonal inverse.
#[derive(Clone, Debug)]
pub struct VMatrix {
    pub n_states: usize,
    pub v: DMatrix<f64>,
    pub v_inv: DMatrix<f64>,
}

/// Closed-form `[V^-1]_{i,i}` (1-based).
pub fn v_inverse_diagonal(i: usize, n_states: usize) -> f64 {
    let x = i as f64;
    if i == n_states {
        x * x / (2.0 * x - 1.0)
    } else {
        4.0 * x * x * x / ((2.0 * x - 1.0) * (2.0 * x + 1.0))
    }
}

/// Closed-form `[V^-1]_{i,i+1}` (1-based).
pub fn v_inverse_offdiagonal(i: usize) -> f64 {
    let x = i as f64;
    -x * (x + 1.0) / (2.0 * x + 1.0)
}

/// Closed-form row sum of `V^-1`: `2i/(4i^2 - 1)` inside, `N/(2N - 1)` last.
pub fn v_inverse_row_sum(i: usize, n_states: usize) -> f64 {
    let x = i as f64;
    if i == n_states {
        x / (2.0 * x - 1.0)
    } else {
        2.0 * x / (4.0 * x * x - 1.0)
    }
}

pub fn v_matrix(n_states: usize) -> Result<VMatrix> {
    if n_states < 2 {
        return Err(Error::Argument(format!("V needs N >= 2, got {n_states}")));
    }
    let n = n_states;
    let v = DMatrix::from_fn(n, n, |a, b| v_entry(a + 1, b + 1));
    let mut v_inv = DMatrix::zeros(n, n);
    for i in 1..=n {
        v_inv[(i - 1, i - 1)] = v_inverse_diagonal(i, n);
        if i < n {
            let off = v_inverse_offdiagonal(i);
            v_inv[(i - 1, i)] = off;
            v_inv[(i, i - 1)] = off;
        }
    }
    Ok(VMatrix { n_states, v, v_inv })
}

impl VMatrix {
    /// `||V V^-1 - I||_inf` using the band structure of `V^-1`.
    pub fn product_residual(&self) -> f64 {
        let n = self.n_states;
        let mut worst = 0.0f64;
        for a in 0..n {
            let mut row = 0.0;
            for b in 0..n {
                let lo = b.saturating_sub(1);
                let hi = (b + 1).min(n - 1);
                let mut x: f64 = (lo..=hi).map(|c| self.v[(a, c)] * self.v_inv[(c, b)]).sum();
                if a == b {
                    x -= 1.0;
                }
                row += x.abs();
            }
            worst = worst.max(row);
        }
        worst
    }

    pub fn inverse_is_symmetric(&self) -> bool {
        self.v_inv == self.v_inv.transpose()
    }

    /// All entries with `|i - j| >= 2` are exactly zero.
    pub fn inverse_is_tridiagonal(&self) -> bool {
        let n = self.n_states;
        (0..n).all(|i| (0..n).all(|j| i.abs_diff(j) < 2 || self.v_inv[(i, j)] == 0.0))
    }

    /// Smallest `|a_ii| - sum_{j != i} |a_ij|` over rows; positive means
    /// strictly diagonally dominant.
    pub fn dominance_margin(&self) -> f64 {
        self.v_inv
            .row_iter()
            .enumerate()
            .map(|(i, row)| {
                let off: f64 =
                    row.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, x)| x.abs()).sum();
                row[i].abs() - off
            })
            .fold(f64::INFINITY, f64::min)
    }
}

/// The distribution `q*` equidistant from all ladders, with `V q* = alpha 1`.
#[derive(Clone, Debug)]
pub struct EqualizingPoint {
    /// `1 / sum(V^-1)`.
    pub alpha: f64,
    /// `1 / (H_{2N} - H_N / 2)`.
    pub alpha_harmonic: f64,
    /// `H_{N-1/2} / 2 + ln 2`, equal to `1 / alpha`.
    pub inverse_alpha_half_integer: f64,
    pub q_star: Distribution,
    /// `max - min` of the entries of `V q*`.
    pub spread: f64,
}

pub fn equalizing_alpha(n_states: usize) -> Result<EqualizingPoint> {
    let vm = v_matrix(n_states)?;
    let row_sums: Vec<f64> =
        vm.v_inv.row_iter().map(|r| r.iter().sum::<f64>()).collect();
    let total: f64 = row_sums.iter().sum();
    let alpha = 1.0 / total;
    let q: Vec<f64> = row_sums.iter().map(|r| alpha * r).collect();
    if let Some(i) = q.iter().position(|&x| x <= 0.0) {
        return Err(Error::Precondition(format!("q* not positive at {i}")));
    }
    let q_star = Distribution::from_weights(q)?;
    let vq = &vm.v * nalgebra::DVector::from_column_slice(q_star.as_slice());
    let spread = vq.max() - vq.min();
    let n = n_states as f64;
    let alpha_harmonic = 1.0 / (harmonic(2.0 * n)? - 0.5 * harmonic(n)?);
    let inverse_alpha_half_integer = 0.5 * harmonic(n - 0.5)? + std::f64::consts::LN_2;
    Ok(EqualizingPoint { alpha, alpha_harmonic, inverse_alpha_half_integer, q_star, spread })
}

/// Generalized harmonic number `H_x = sum_k (1/k - 1/(k + x))`.
///
/// Exact partial sums for integers, `H_{1/2} = 2 - 2 ln 2` plus the
/// recurrence `H_x = H_{x-1} + 1/x` for half-integers, and the digamma
/// asymptotic series otherwise.
pub fn harmonic(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::Domain(format!("harmonic number needs x > 0, got {x}")));
    }
    if x.fract() == 0.0 && x <= 1e8 {
        let m = x as u64;
        return Ok((1..=m).rev().map(|k| 1.0 / k as f64).sum());
    }
    if (x - 0.5).fract() == 0.0 && x <= 1e8 {
        let m = (x - 0.5) as u64;
        let mut h = 2.0 - 2.0 * std::f64::consts::LN_2;
        for j in 1..=m {
            h += 1.0 / (j as f64 + 0.5);
        }
        return Ok(h);
    }
    Ok(digamma(x + 1.0) + EULER_GAMMA)
}

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

fn digamma(mut y: f64) -> f64 {
    let mut shift = 0.0;
    while y < 10.0 {
        shift -= 1.0 / y;
        y += 1.0;
    }
    let inv = 1.0 / y;
    let inv2 = inv * inv;
    let series = inv2
        * (1.0 / 12.0
            - inv2 * (1.0 / 120.0 - inv2 * (1.0 / 252.0 - inv2 * (1.0 / 240.0 - inv2 / 132.0))));
    shift + y.ln() - 0.5 * inv - series
}

/// Stable sort into decreasing order (ties keep their original order).
pub fn sort_decreasing(mu: &Distribution) -> Distribution {
    let mut probs = mu.as_slice().to_vec();
    probs.sort_by(|a, b| b.total_cmp(a));
    Distribution::new(probs).expect("permutation of a distribution")
}

/// Worst-case distance `1 - 2 / ln N` that no single candidate can beat.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LowerBound {
    pub value: f64,
    /// `true` when `N <= e^2`, where the bound is not positive.
    pub vacuous: bool,
}

pub fn lower_bound_distance(n_states: usize) -> Result<LowerBound> {
    if n_states < 2 {
        return Err(Error::Argument(format!("need N >= 2, got {n_states}")));
    }
    let value = 1.0 - 2.0 / (n_states as f64).ln();
    Ok(LowerBound { value, vacuous: value <= 0.0 })
}

/// Distance bound `1 - p / (2(n+1))` when only a head of mass `p` is known
/// to decay.
pub fn truncated_bound(bits: u32, p: f64) -> Result<f64> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::Argument(format!("head mass must lie in (0, 1], got {p}")));
    }
    if bits == 0 {
        return Err(Error::Argument("need n >= 1".into()));
    }
    Ok(1.0 - p / (2.0 * (bits as f64 + 1.0)))
}

/// Direct total-variation distance to `sigma^k`, without the `q` route.
pub fn direct_distance_to_ladder(pi: &Distribution, k: usize) -> Result<f64> {
    tv_distance(pi, &ladder(pi.len(), k)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;
    use proptest::prelude::*;

    fn dist(v: &[f64]) -> Distribution {
        Distribution::new(v.to_vec()).unwrap()
    }

    #[test]
    fn ladder_examples() {
        assert_eq!(ladder(4, 1).unwrap(), Distribution::delta(4, 0));
        assert_eq!(ladder(4, 2).unwrap(), dist(&[0.5, 0.5, 0.0, 0.0]));
        assert_eq!(ladder(4, 4).unwrap(), Distribution::uniform(4));
        assert!(ladder(4, 0).is_err());
        assert!(ladder(4, 5).is_err());
    }

    #[test]
    fn ladder_sets() {
        let s8 = ladder_set(8).unwrap();
        assert_eq!(s8.members.iter().map(|l| l.cutoff).collect::<Vec<_>>(), vec![1, 2, 4]);
        let s2 = ladder_set(2).unwrap();
        assert_eq!(s2.members.len(), 1);
        assert_eq!(s2.members[0].cutoff, 1);
        let s6 = ladder_set(6).unwrap();
        assert_eq!(s6.padded_n, 8);
        assert!(s6.members.iter().all(|l| l.n_states == 8));
        assert!(ladder_set(1).is_err());
    }

    #[test]
    fn q_examples() {
        let dec = q_decompose(&dist(&[0.4, 0.3, 0.2, 0.1])).unwrap();
        for (a, b) in dec.q.as_slice().iter().zip([0.1, 0.2, 0.3, 0.4]) {
            assert!((a - b).abs() < 1e-15);
        }
        assert_eq!(q_decompose(&Distribution::uniform(5)).unwrap().q, Distribution::delta(5, 4));
        assert_eq!(q_decompose(&Distribution::delta(5, 0)).unwrap().q, Distribution::delta(5, 0));
        let back = q_recompose(&dist(&[0.1, 0.2, 0.3, 0.4]));
        for (a, b) in back.as_slice().iter().zip([0.4, 0.3, 0.2, 0.1]) {
            assert!((a - b).abs() < 1e-15);
        }
        assert_eq!(q_recompose(&dist(&[0.5, 0.5])), dist(&[0.75, 0.25]));
        assert_eq!(q_recompose(&Distribution::delta(3, 2)), Distribution::uniform(3));
    }

    #[test]
    fn q_decompose_rejects_increase() {
        let err = q_decompose(&dist(&[0.2, 0.5, 0.3])).unwrap_err();
        assert!(matches!(err, Error::Monotonicity { index: 1, .. }));
        // Ties within tolerance are fine.
        let tie = dist(&[0.25, 0.25 + 5e-13, 0.25, 0.25 - 5e-13]);
        assert!(q_decompose(&tie).is_ok());
    }

    #[test]
    fn distance_examples() {
        assert!(distance_to_ladder(&ladder(6, 3).unwrap(), 3).unwrap().abs() < 1e-15);
        assert!((distance_to_ladder(&Distribution::delta(4, 0), 4).unwrap() - 0.75).abs() < 1e-15);
        let pi = dist(&[0.4, 0.3, 0.2, 0.1]);
        assert!((distance_to_ladder(&pi, 2).unwrap() - 0.3).abs() < 1e-15);
        assert!((direct_distance_to_ladder(&pi, 2).unwrap() - 0.3).abs() < 1e-15);
        // q = (0.1, 0.2, 0.3, 0.4) mixes ladders on both sides of 2.
        assert!((convexity_bound(&pi, 2).unwrap() - 0.35).abs() < 1e-15);
        // A single ladder makes the bound tight.
        assert_eq!(convexity_bound(&ladder(4, 3).unwrap(), 2).unwrap(), 1.0 - 2.0 / 3.0);
    }

    #[test]
    fn best_initial_examples() {
        let u = best_initial(&Distribution::uniform(8)).unwrap();
        assert_eq!(u.cutoff, 4);
        assert!((u.distance - 0.5).abs() < 1e-15);
        assert_eq!(u.bound, 0.875);
        let d = best_initial(&Distribution::delta(8, 0)).unwrap();
        assert_eq!((d.exponent, d.distance), (0, 0.0));
    }

    #[test]
    fn coarse_grain_examples() {
        let c = coarse_grain(&[0.1, 0.2, 0.3, 0.4]).unwrap();
        assert_eq!(c.weights.len(), 3);
        assert!((c.weights[0] - 0.1).abs() < 1e-15);
        assert!((c.weights[1] - 0.2).abs() < 1e-15);
        assert!((c.weights[2] - 0.7).abs() < 1e-15);
        assert_eq!(coarse_grain(&[0.25; 4]).unwrap().weights, vec![0.25, 0.25, 0.5]);
        assert_eq!(coarse_grain(&[1.0, 0.0, 0.0, 0.0]).unwrap().weights, vec![1.0, 0.0, 0.0]);
        assert!(coarse_grain(&[0.5, 0.25, 0.25]).is_err());
    }

    #[test]
    fn v_matrix_two_states() {
        let vm = v_matrix(2).unwrap();
        assert_eq!(vm.v, DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 1.0]));
        let expected = DMatrix::from_row_slice(2, 2, &[4.0 / 3.0, -2.0 / 3.0, -2.0 / 3.0, 4.0 / 3.0]);
        assert!(crate::linalg::max_abs_diff(&vm.v_inv, &expected) < 1e-15);
        assert!(vm.product_residual() < 1e-15);
        assert!(v_matrix(1).is_err());
    }

    #[test]
    fn v_inverse_row_sums_match_closed_form() {
        for n in [3usize, 7, 20] {
            let vm = v_matrix(n).unwrap();
            for (i, row) in vm.v_inv.row_iter().enumerate() {
                let s: f64 = row.iter().sum();
                assert!((s - v_inverse_row_sum(i + 1, n)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn structured_residual_matches_dense_product() {
        let vm = v_matrix(17).unwrap();
        let dense = crate::linalg::inf_norm(&(&vm.v * &vm.v_inv - DMatrix::identity(17, 17)));
        assert!((dense - vm.product_residual()).abs() < 1e-13);
    }

    #[test]
    fn alpha_for_two_states() {
        let e = equalizing_alpha(2).unwrap();
        assert!((e.alpha - 0.75).abs() < 1e-15);
        assert!((e.alpha_harmonic - 0.75).abs() < 1e-15);
        assert!((1.0 / e.inverse_alpha_half_integer - 0.75).abs() < 1e-14);
        assert!((e.q_star[0] - 0.5).abs() < 1e-15);
        assert!(e.spread < 1e-15);
        let d = distance_to_ladder(&q_recompose(&e.q_star), 1).unwrap();
        assert!((d - 0.25).abs() < 1e-15);
    }

    #[test]
    fn harmonic_values() {
        assert_eq!(harmonic(1.0).unwrap(), 1.0);
        assert!((harmonic(4.0).unwrap() - 25.0 / 12.0).abs() < 1e-15);
        let h_half = harmonic(0.5).unwrap();
        assert!((h_half - 0.613_705_6).abs() < 1e-7);
        assert!(harmonic(0.0).is_err());
        assert!(harmonic(-1.5).is_err());
        // Recurrence holds across all three evaluation paths.
        for x in [0.3, 1.7, 2.5, 7.0, 12.25] {
            let lhs = harmonic(x + 1.0).unwrap();
            let rhs = harmonic(x).unwrap() + 1.0 / (x + 1.0);
            assert!((lhs - rhs).abs() < 1e-12, "x={x}");
        }
    }

    #[test]
    fn harmonic_matches_defining_series() {
        // Partial sum plus the integral tail from K + 1/2.
        let series = |x: f64| {
            let k_max = 200_000usize;
            let partial: f64 =
                (1..=k_max).rev().map(|k| 1.0 / k as f64 - 1.0 / (k as f64 + x)).sum();
            let a = k_max as f64 + 0.5;
            partial + ((a + x) / a).ln()
        };
        for x in [0.5, 1.5, 0.3, 3.0, 9.75] {
            assert!((harmonic(x).unwrap() - series(x)).abs() < 1e-12, "x={x}");
        }
    }

    #[test]
    fn sort_examples() {
        assert_eq!(sort_decreasing(&dist(&[0.2, 0.5, 0.3])), dist(&[0.5, 0.3, 0.2]));
        let sorted = dist(&[0.5, 0.3, 0.2]);
        assert_eq!(sort_decreasing(&sorted), sorted);
    }

    #[test]
    fn lower_bound_examples() {
        let lb = lower_bound_distance(55).unwrap();
        assert!((lb.value - (1.0 - 2.0 / 55f64.ln())).abs() < 1e-15);
        let at_e4 = 1.0 - 2.0 / 4.0f64.exp().ln();
        assert!((at_e4 - 0.5).abs() < 1e-15);
        let two = lower_bound_distance(2).unwrap();
        assert!(two.vacuous && two.value < 0.0);
        assert!(!lower_bound_distance(8).unwrap().vacuous);
    }

    #[test]
    fn truncated_bound_examples() {
        assert_eq!(truncated_bound(3, 1.0).unwrap(), theorem1_bound(3));
        assert!((truncated_bound(3, 0.5).unwrap() - 0.9375).abs() < 1e-15);
        assert!(truncated_bound(3, 0.0).is_err());
        assert!(truncated_bound(3, 1.5).is_err());
    }

    proptest! {
        #[test]
        fn q_maps_are_inverse(seed in any::<u64>(), n in 1usize..64) {
            let mut rng = substream(seed, 0);
            let pi = Distribution::sample_decaying(n, &mut rng);
            let back = q_recompose(&q_decompose(&pi).unwrap().q);
            for (a, b) in back.as_slice().iter().zip(pi.as_slice()) {
                prop_assert!((a - b).abs() < 1e-12);
            }
            let q = Distribution::sample_simplex(n, &mut rng);
            let again = q_decompose(&q_recompose(&q)).unwrap().q;
            for (a, b) in again.as_slice().iter().zip(q.as_slice()) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }

        #[test]
        fn q_route_matches_direct_distance(seed in any::<u64>(), n in 2usize..40) {
            let mut rng = substream(seed, 1);
            let pi = Distribution::sample_decaying(n, &mut rng);
            for k in 1..=n {
                let a = distance_to_ladder(&pi, k).unwrap();
                let b = direct_distance_to_ladder(&pi, k).unwrap();
                prop_assert!((a - b).abs() < 1e-12);
                prop_assert!(convexity_bound(&pi, k).unwrap() >= a - 1e-12);
            }
        }
    }
}
