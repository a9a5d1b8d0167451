//! Chain families used throughout the tests and experiments.

use nalgebra::DMatrix;
use rand::Rng;

use super::chain::{is_stochastic, MarkovChain};
use super::distribution::Distribution;
use crate::{Error, Result};

const SYMMETRY_TOL: f64 = 1e-12;
const TARGET_TOL: f64 = 1e-10;

/// Metropolis chain for `target` over a symmetric `proposal`.
///
/// A proposed move `i -> j` is accepted with probability
/// `min(1, pi_j / pi_i)`; rejected mass stays on the diagonal.
pub fn metropolis_chain(target: &Distribution, proposal: &DMatrix<f64>) -> Result<MarkovChain> {
    let n = target.len();
    if proposal.nrows() != n {
        return Err(Error::Dimension { expected: n, found: proposal.nrows() });
    }
    is_stochastic(proposal)?;
    if crate::linalg::max_abs_diff(proposal, &proposal.transpose()) > SYMMETRY_TOL {
        return Err(Error::InvalidMatrix("proposal must be symmetric".into()));
    }
    if let Some(i) = target.as_slice().iter().position(|&x| x <= 0.0) {
        return Err(Error::SingularScaling { index: i, value: target[i] });
    }
    let pi = target.as_slice();
    let mut p = DMatrix::zeros(n, n);
    for i in 0..n {
        let mut moved = 0.0;
        for j in 0..n {
            if j != i {
                let a = proposal[(j, i)] * (pi[j] / pi[i]).min(1.0);
                p[(j, i)] = a;
                moved += a;
            }
        }
        p[(i, i)] = 1.0 - moved;
    }
    let chain = MarkovChain::new(p)?;
    let err = chain
        .stationary()
        .as_slice()
        .iter()
        .zip(pi)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    if err > TARGET_TOL {
        return Err(Error::Precondition(format!(
            "Metropolis chain missed its target by {err:e}"
        )));
    }
    Ok(chain)
}

/// Symmetric nearest-neighbour proposal on the path `0 - 1 - ... - N-1`:
/// left and right with probability 1/2 each, staying put at the ends.
pub fn nearest_neighbor_proposal(n: usize) -> DMatrix<f64> {
    let mut q = DMatrix::zeros(n, n);
    if n == 1 {
        q[(0, 0)] = 1.0;
        return q;
    }
    for i in 0..n {
        if i > 0 {
            q[(i - 1, i)] = 0.5;
        } else {
            q[(i, i)] += 0.5;
        }
        if i + 1 < n {
            q[(i + 1, i)] = 0.5;
        } else {
            q[(i, i)] += 0.5;
        }
    }
    q
}

/// `P = I/2 + (L + R)/4` on the cycle of length `n`.
pub fn lazy_cycle_walk(n: usize) -> Result<MarkovChain> {
    if n < 2 {
        return Err(Error::Argument(format!("cycle needs at least 2 states, got {n}")));
    }
    let mut p = DMatrix::identity(n, n) * 0.5;
    for i in 0..n {
        p[((i + 1) % n, i)] += 0.25;
        p[((i + n - 1) % n, i)] += 0.25;
    }
    MarkovChain::new(p)
}

/// Two states with `p` the rate `0 -> 1` and `q` the rate `1 -> 0`.
pub fn two_state(p: f64, q: f64) -> Result<MarkovChain> {
    if !(0.0..=1.0).contains(&p) || !(0.0..=1.0).contains(&q) {
        return Err(Error::Argument(format!("rates must be probabilities, got {p}, {q}")));
    }
    MarkovChain::new(DMatrix::from_row_slice(2, 2, &[1.0 - p, q, p, 1.0 - q]))
}

/// Every entry `1/n`: mixes in one step.
pub fn complete_uniform(n: usize) -> Result<MarkovChain> {
    MarkovChain::new(DMatrix::from_element(n, n, 1.0 / n as f64))
}

/// Random reversible chain: a random symmetric non-negative weight matrix
/// with positive diagonal, normalized by column.
pub fn random_reversible_chain<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<MarkovChain> {
    let mut w = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let x: f64 = rng.random::<f64>() + if i == j { 0.1 } else { 0.0 };
            w[(i, j)] = x;
            w[(j, i)] = x;
        }
    }
    let sums: Vec<f64> = w.column_iter().map(|c| c.sum()).collect();
    let p = DMatrix::from_fn(n, n, |j, i| w[(j, i)] / sums[i]);
    MarkovChain::new(p)
}

/// `pi_i` proportional to `ratio^i`.
pub fn geometric_target(n: usize, ratio: f64) -> Result<Distribution> {
    Distribution::from_weights((0..n).map(|i| ratio.powi(i as i32)).collect())
}

/// `pi_i` proportional to `(i + 1)^(-s)`.
pub fn power_law_target(n: usize, s: f64) -> Result<Distribution> {
    Distribution::from_weights((0..n).map(|i| ((i + 1) as f64).powf(-s)).collect())
}

/// Named Metropolis chain families with decaying stationary distributions.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ChainFamily {
    Geometric { ratio: f64 },
    PowerLaw { exponent: f64 },
    LazyCycle,
}

impl ChainFamily {
    pub fn build(&self, n: usize) -> Result<MarkovChain> {
        match *self {
            ChainFamily::Geometric { ratio } => {
                metropolis_chain(&geometric_target(n, ratio)?, &nearest_neighbor_proposal(n))
            }
            ChainFamily::PowerLaw { exponent } => {
                metropolis_chain(&power_law_target(n, exponent)?, &nearest_neighbor_proposal(n))
            }
            ChainFamily::LazyCycle => lazy_cycle_walk(n),
        }
    }

    pub fn label(&self) -> String {
        match self {
            ChainFamily::Geometric { ratio } => format!("metropolis_geometric(r={ratio})"),
            ChainFamily::PowerLaw { exponent } => format!("metropolis_powerlaw(s={exponent})"),
            ChainFamily::LazyCycle => "lazy_cycle".into(),
        }
    }
}
