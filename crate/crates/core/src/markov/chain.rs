use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::distribution::Distribution;
use crate::linalg;
use crate::{Error, Result};

const STOCHASTIC_TOL: f64 = 1e-12;
const STATIONARY_TOL: f64 = 1e-10;
const BALANCE_TOL: f64 = 1e-12;
/// Largest `N` solved densely; bigger chains use power iteration.
const DENSE_SOLVE_MAX: usize = 64;
const POWER_TOL: f64 = 1e-12;
const POWER_MAX_ITERS: usize = 1_000_000;

/// An irreducible, aperiodic chain together with its stationary
/// distribution and spectral data.
#[derive(Clone, Debug)]
pub struct MarkovChain {
    p: DMatrix<f64>,
    stationary: Distribution,
    gap: f64,
    second_eigenvalue: f64,
    reversible: bool,
}

impl MarkovChain {
    /// Validates `p`, checks irreducibility and aperiodicity, and solves for
    /// the stationary distribution.
    pub fn new(p: DMatrix<f64>) -> Result<Self> {
        let pi = stationary_distribution(&p)?;
        Self::assemble(p, pi)
    }

    /// Builds a chain whose stationary distribution is already known.
    /// `pi` is checked against `P pi = pi` rather than recomputed.
    pub fn from_parts(p: DMatrix<f64>, pi: Distribution) -> Result<Self> {
        is_stochastic(&p)?;
        check_structure(&p)?;
        if pi.len() != p.nrows() {
            return Err(Error::Dimension { expected: p.nrows(), found: pi.len() });
        }
        if let Some(i) = pi.as_slice().iter().position(|&x| x <= 0.0) {
            return Err(Error::SingularScaling { index: i, value: pi[i] });
        }
        let residual = stationary_residual(&p, pi.as_slice());
        if residual > STATIONARY_TOL {
            return Err(Error::Precondition(format!(
                "supplied distribution is not stationary (residual {residual:e})"
            )));
        }
        Self::assemble(p, pi)
    }

    fn assemble(p: DMatrix<f64>, stationary: Distribution) -> Result<Self> {
        let reversible = balance_residual(&p, stationary.as_slice()) <= BALANCE_TOL;
        let second_eigenvalue = if reversible {
            let d = discriminant(&p, &stationary)?;
            second_by_modulus(&linalg::symmetric_eigenvalues(&d.d))
        } else {
            // No real-spectrum guarantee; report the modulus of the
            // second eigenvalue.
            let mut moduli: Vec<f64> = p.complex_eigenvalues().iter().map(|z| z.norm()).collect();
            moduli.sort_by(|a, b| b.total_cmp(a));
            moduli.get(1).copied().unwrap_or(0.0)
        };
        Ok(Self {
            gap: 1.0 - second_eigenvalue.abs(),
            p,
            stationary,
            second_eigenvalue,
            reversible,
        })
    }

    pub fn n(&self) -> usize {
        self.p.nrows()
    }

    /// The left-stochastic transition matrix.
    pub fn transition(&self) -> &DMatrix<f64> {
        &self.p
    }

    pub fn stationary(&self) -> &Distribution {
        &self.stationary
    }

    /// Spectral gap `1 - |lambda_2|`.
    pub fn gap(&self) -> f64 {
        self.gap
    }

    /// Second-largest eigenvalue by modulus (signed for reversible chains).
    pub fn second_eigenvalue(&self) -> f64 {
        self.second_eigenvalue
    }

    pub fn is_reversible(&self) -> bool {
        self.reversible
    }

    /// One step of the chain applied to `d`.
    pub fn step(&self, d: &Distribution) -> Result<Distribution> {
        if d.len() != self.n() {
            return Err(Error::Dimension { expected: self.n(), found: d.len() });
        }
        let v = &self.p * DVector::from_column_slice(d.as_slice());
        Distribution::from_weights(v.iter().map(|x| x.max(0.0)).collect())
    }

    pub fn time_reversal(&self) -> DMatrix<f64> {
        time_reversal(&self.p, &self.stationary).expect("chain has full support")
    }

    pub fn discriminant(&self) -> DiscriminantMatrix {
        discriminant(&self.p, &self.stationary).expect("chain has full support")
    }

    pub fn to_document(&self) -> ChainDocument {
        let n = self.n();
        ChainDocument {
            n,
            p: (0..n).map(|i| self.p.column(i).iter().copied().collect()).collect(),
            pi: self.stationary.as_slice().to_vec(),
        }
    }

    pub fn from_document(doc: ChainDocument) -> Result<Self> {
        let n = doc.n;
        if doc.p.len() != n {
            return Err(Error::Dimension { expected: n, found: doc.p.len() });
        }
        if let Some(col) = doc.p.iter().find(|c| c.len() != n) {
            return Err(Error::Dimension { expected: n, found: col.len() });
        }
        let p = DMatrix::from_fn(n, n, |j, i| doc.p[i][j]);
        let pi = Distribution::from_document(super::DistributionDocument { n, pi: doc.pi })?;
        Self::from_parts(p, pi)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_document()).expect("plain data serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Self::from_document(serde_json::from_str(s)?)
    }
}

/// JSON form of a chain: `{"n": N, "p": [...], "pi": [...]}`.
///
/// `p[i]` is column `i` of the transition matrix, i.e. the outgoing
/// distribution of state `i`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainDocument {
    pub n: usize,
    pub p: Vec<Vec<f64>>,
    pub pi: Vec<f64>,
}

/// `D_P = M^{1/2} P^T M^{-1/2}` with `M = diag(pi)`.
#[derive(Clone, Debug)]
pub struct DiscriminantMatrix {
    pub d: DMatrix<f64>,
}

impl DiscriminantMatrix {
    pub fn asymmetry(&self) -> f64 {
        linalg::max_abs_diff(&self.d, &self.d.transpose())
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        self.asymmetry() <= tol
    }

    /// Eigenvalues of the symmetrized matrix, largest first.
    pub fn eigenvalues(&self) -> Vec<f64> {
        linalg::symmetric_eigenvalues(&self.d)
    }
}

/// Checks entries are non-negative and every column sums to one.
pub fn is_stochastic(p: &DMatrix<f64>) -> Result<()> {
    if p.nrows() != p.ncols() || p.nrows() == 0 {
        return Err(Error::InvalidMatrix(format!(
            "expected a non-empty square matrix, got {}x{}",
            p.nrows(),
            p.ncols()
        )));
    }
    if let Some(x) = p.iter().find(|x| !x.is_finite() || **x < 0.0) {
        return Err(Error::InvalidMatrix(format!("entry {x} is not a probability")));
    }
    for (i, col) in p.column_iter().enumerate() {
        let s: f64 = col.sum();
        if (s - 1.0).abs() > STOCHASTIC_TOL {
            return Err(Error::InvalidMatrix(format!("column {i} sums to {s}")));
        }
    }
    Ok(())
}

/// Irreducibility by reachability on the support digraph, aperiodicity by a
/// positive diagonal entry or else the gcd of BFS level differences.
fn check_structure(p: &DMatrix<f64>) -> Result<()> {
    let n = p.nrows();
    let forward = bfs_levels(n, |i, j| p[(j, i)] > 0.0);
    let backward = bfs_levels(n, |i, j| p[(i, j)] > 0.0);
    if let Some(s) = forward.iter().chain(&backward).position(Option::is_none) {
        return Err(Error::Structure(format!(
            "reducible chain: state {} not strongly connected to state 0",
            s % n
        )));
    }
    if (0..n).any(|i| p[(i, i)] > 0.0) {
        return Ok(());
    }
    let mut g = 0usize;
    for i in 0..n {
        for j in 0..n {
            if p[(j, i)] > 0.0 {
                let li = forward[i].unwrap() as i64;
                let lj = forward[j].unwrap() as i64;
                g = gcd(g, (li + 1 - lj).unsigned_abs() as usize);
            }
        }
    }
    if g != 1 {
        return Err(Error::Structure(format!("periodic chain with period {g}")));
    }
    Ok(())
}

fn bfs_levels(n: usize, edge: impl Fn(usize, usize) -> bool) -> Vec<Option<usize>> {
    let mut level = vec![None; n];
    level[0] = Some(0);
    let mut queue = VecDeque::from([0usize]);
    while let Some(i) = queue.pop_front() {
        let li = level[i].unwrap();
        for j in 0..n {
            if level[j].is_none() && edge(i, j) {
                level[j] = Some(li + 1);
                queue.push_back(j);
            }
        }
    }
    level
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Unique stationary distribution of an irreducible aperiodic chain.
pub fn stationary_distribution(p: &DMatrix<f64>) -> Result<Distribution> {
    is_stochastic(p)?;
    check_structure(p)?;
    let n = p.nrows();
    let raw: Vec<f64> = if n <= DENSE_SOLVE_MAX {
        // (P - I) pi = 0 with the last equation replaced by sum(pi) = 1.
        let mut a = p - DMatrix::identity(n, n);
        a.row_mut(n - 1).fill(1.0);
        let mut b = DVector::zeros(n);
        b[n - 1] = 1.0;
        linalg::solve(a, &b)?.iter().copied().collect()
    } else {
        power_iteration(p)?
    };
    if let Some(i) = raw.iter().position(|&x| x <= 0.0) {
        return Err(Error::Structure(format!(
            "stationary solve lost support at state {i} ({})",
            raw[i]
        )));
    }
    let pi = Distribution::from_weights(raw)?;
    let residual = stationary_residual(p, pi.as_slice());
    if residual > STATIONARY_TOL {
        return Err(Error::Divergence { iterations: POWER_MAX_ITERS });
    }
    Ok(pi)
}

fn power_iteration(p: &DMatrix<f64>) -> Result<Vec<f64>> {
    let n = p.nrows();
    let mut x = DVector::from_element(n, 1.0 / n as f64);
    for _ in 0..POWER_MAX_ITERS {
        let mut y = p * &x;
        let s = y.sum();
        y /= s;
        let change: f64 = (&y - &x).iter().map(|v| v.abs()).sum();
        x = y;
        if change < POWER_TOL {
            return Ok(x.iter().copied().collect());
        }
    }
    Err(Error::Divergence { iterations: POWER_MAX_ITERS })
}

fn stationary_residual(p: &DMatrix<f64>, pi: &[f64]) -> f64 {
    let v = DVector::from_column_slice(pi);
    (p * &v - &v).amax()
}

/// Largest violation of `pi_i P_{ji} = pi_j P_{ij}`.
fn balance_residual(p: &DMatrix<f64>, pi: &[f64]) -> f64 {
    let n = p.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..i {
            worst = worst.max((pi[i] * p[(j, i)] - pi[j] * p[(i, j)]).abs());
        }
    }
    worst
}

fn second_by_modulus(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| b.abs().total_cmp(&a.abs()));
    v.get(1).copied().unwrap_or(0.0)
}

fn check_scaling(pi: &Distribution, n: usize) -> Result<()> {
    if pi.len() != n {
        return Err(Error::Dimension { expected: n, found: pi.len() });
    }
    match pi.as_slice().iter().position(|&x| x <= 0.0) {
        Some(i) => Err(Error::SingularScaling { index: i, value: pi[i] }),
        None => Ok(()),
    }
}

/// Time reversal `P* = M(pi) P^T M(pi)^{-1}`.
pub fn time_reversal(p: &DMatrix<f64>, pi: &Distribution) -> Result<DMatrix<f64>> {
    check_scaling(pi, p.nrows())?;
    let n = p.nrows();
    Ok(DMatrix::from_fn(n, n, |a, b| pi[a] * p[(b, a)] / pi[b]))
}

/// Discriminant `D_{ij} = sqrt(pi_i) P_{ji} / sqrt(pi_j)`.
pub fn discriminant(p: &DMatrix<f64>, pi: &Distribution) -> Result<DiscriminantMatrix> {
    check_scaling(pi, p.nrows())?;
    let n = p.nrows();
    let s: Vec<f64> = pi.as_slice().iter().map(|x| x.sqrt()).collect();
    Ok(DiscriminantMatrix { d: DMatrix::from_fn(n, n, |i, j| s[i] * p[(j, i)] / s[j]) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::markov::generators::{lazy_cycle_walk, random_reversible_chain, two_state};
    use crate::rng::substream;

    #[test]
    fn uniform_matrix_has_uniform_stationary() {
        let p = DMatrix::from_element(5, 5, 0.2);
        let pi = stationary_distribution(&p).unwrap();
        for &x in pi.as_slice() {
            assert!((x - 0.2).abs() < 1e-14);
        }
    }

    #[test]
    fn two_state_stationary() {
        let chain = two_state(0.3, 0.1).unwrap();
        assert!((chain.stationary()[0] - 0.25).abs() < 1e-14);
        assert!((chain.stationary()[1] - 0.75).abs() < 1e-14);
    }

    #[test]
    fn power_iteration_agrees_with_dense_solve() {
        let chain = random_reversible_chain(80, &mut substream(11, 0)).unwrap();
        let via_power = power_iteration(chain.transition()).unwrap();
        let dense = {
            let p = chain.transition();
            let n = p.nrows();
            let mut a = p - DMatrix::identity(n, n);
            a.row_mut(n - 1).fill(1.0);
            let mut b = DVector::zeros(n);
            b[n - 1] = 1.0;
            linalg::solve(a, &b).unwrap()
        };
        for (x, y) in via_power.iter().zip(dense.iter()) {
            assert!((x - y).abs() < 1e-10);
        }
    }

    #[test]
    fn rejects_reducible_and_periodic() {
        let reducible = DMatrix::identity(2, 2);
        assert!(matches!(stationary_distribution(&reducible), Err(Error::Structure(_))));
        let swap = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        assert!(matches!(stationary_distribution(&swap), Err(Error::Structure(_))));
        // Pure 3-cycle has period 3.
        let cycle = DMatrix::from_fn(3, 3, |j, i| if j == (i + 1) % 3 { 1.0 } else { 0.0 });
        assert!(matches!(stationary_distribution(&cycle), Err(Error::Structure(_))));
        // 2-cycle plus 3-cycle through state 0 is aperiodic without self-loops.
        let mut p = DMatrix::zeros(4, 4);
        p[(1, 0)] = 0.5;
        p[(2, 0)] = 0.5;
        p[(0, 1)] = 1.0;
        p[(3, 2)] = 1.0;
        p[(0, 3)] = 1.0;
        assert!(stationary_distribution(&p).is_ok());
    }

    #[test]
    fn rejects_non_stochastic() {
        let p = DMatrix::from_row_slice(2, 2, &[0.5, 0.5, 0.6, 0.5]);
        assert!(matches!(MarkovChain::new(p), Err(Error::InvalidMatrix(_))));
    }

    #[test]
    fn symmetric_chain_is_its_own_reversal() {
        let chain = lazy_cycle_walk(6).unwrap();
        assert!(chain.is_reversible());
        assert!(linalg::max_abs_diff(&chain.time_reversal(), chain.transition()) < 1e-15);
        // Uniform pi: the discriminant is P itself.
        assert!(linalg::max_abs_diff(&chain.discriminant().d, chain.transition()) < 1e-15);
    }

    #[test]
    fn non_reversible_cycle_reverses_direction() {
        let p = DMatrix::from_fn(3, 3, |j, i| {
            if i == j {
                0.2
            } else if j == (i + 1) % 3 {
                0.8
            } else {
                0.0
            }
        });
        let chain = MarkovChain::new(p.clone()).unwrap();
        assert!(!chain.is_reversible());
        let rev = chain.time_reversal();
        assert!(linalg::max_abs_diff(&rev, &p.transpose()) < 1e-14);
        // Involution.
        let back = time_reversal(&rev, chain.stationary()).unwrap();
        assert!(linalg::max_abs_diff(&back, &p) < 1e-14);
    }

    #[test]
    fn two_state_discriminant() {
        let chain = two_state(0.3, 0.1).unwrap();
        let d = chain.discriminant();
        assert!(d.is_symmetric(1e-12));
        assert!((d.d[(0, 1)] - (0.03f64).sqrt()).abs() < 1e-12);
        assert!((d.d[(0, 1)] - 0.173205).abs() < 1e-6);
    }

    #[test]
    fn singular_scaling_is_reported() {
        let p = DMatrix::from_element(2, 2, 0.5);
        let pi = Distribution::new(vec![1.0, 0.0]).unwrap();
        assert!(matches!(
            discriminant(&p, &pi),
            Err(Error::SingularScaling { index: 1, .. })
        ));
        assert!(matches!(time_reversal(&p, &pi), Err(Error::SingularScaling { .. })));
    }

    #[test]
    fn from_parts_rejects_wrong_stationary() {
        let p = DMatrix::from_row_slice(2, 2, &[0.7, 0.1, 0.3, 0.9]);
        assert!(MarkovChain::from_parts(p.clone(), Distribution::uniform(2)).is_err());
        let ok = Distribution::new(vec![0.25, 0.75]).unwrap();
        assert!(MarkovChain::from_parts(p, ok).is_ok());
    }

    #[test]
    fn json_round_trip_is_deterministic() {
        let chain = random_reversible_chain(7, &mut substream(5, 2)).unwrap();
        let s = chain.to_json();
        let back = MarkovChain::from_json(&s).unwrap();
        assert_eq!(back.to_json(), s);
        assert_eq!(back.transition(), chain.transition());
        let doc: serde_json::Value = serde_json::from_str(&s).unwrap();
        assert_eq!(doc["n"], 7);
        // Columns are outgoing distributions.
        let col0: f64 = doc["p"][0].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).sum();
        assert!((col0 - 1.0).abs() < 1e-12);
    }
}
