use nalgebra::DMatrix;

use super::chain::MarkovChain;
use super::distribution::tv_slices;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpectralGap {
    /// `1 - |lambda_2|`.
    pub gap: f64,
    /// Second-largest eigenvalue by modulus, signed.
    pub second_eigenvalue: f64,
}

/// Spectral gap of a reversible chain from the real spectrum of `D_P`.
pub fn spectral_gap(chain: &MarkovChain) -> Result<SpectralGap> {
    if !chain.is_reversible() {
        return Err(Error::Mode(
            "real-spectrum gap requested for a non-reversible chain".into(),
        ));
    }
    Ok(SpectralGap { gap: chain.gap(), second_eigenvalue: chain.second_eigenvalue() })
}

/// Worst-case (over Kronecker-delta starts) distance to stationarity after
/// each of `0..` steps, evaluated on the columns of `P^t`.
fn worst_distance_sequence(chain: &MarkovChain) -> impl Iterator<Item = f64> + '_ {
    let n = chain.n();
    let pi = chain.stationary().as_slice();
    let mut power = DMatrix::<f64>::identity(n, n);
    let mut first = true;
    std::iter::from_fn(move || {
        if !first {
            power = chain.transition() * &power;
        }
        first = false;
        let worst = power
            .column_iter()
            .map(|c| tv_slices(c.as_slice(), pi))
            .fold(0.0, f64::max);
        Some(worst)
    })
}

fn iteration_cap(chain: &MarkovChain, epsilon: f64) -> Result<usize> {
    let gap = chain.gap();
    if gap <= 1e-14 {
        return Err(Error::Divergence { iterations: 0 });
    }
    let cap = (100.0 / gap * (chain.n() as f64 / epsilon).ln()).ceil();
    Ok(cap.max(1.0) as usize)
}

/// Exact mixing time `tau(eps)`: the first `t` at which every Kronecker-delta
/// start is within total variation `eps` of stationarity.
///
/// Iteration stops with [`Error::Divergence`] after
/// `ceil(100 / gap * ln(N / eps))` steps.
pub fn mixing_time(chain: &MarkovChain, epsilon: f64) -> Result<usize> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::Argument(format!("epsilon must lie in (0, 1), got {epsilon}")));
    }
    let cap = iteration_cap(chain, epsilon)?;
    worst_distance_sequence(chain)
        .take(cap + 1)
        .position(|d| d <= epsilon)
        .ok_or(Error::Divergence { iterations: cap })
}

/// Mixing-time bounds (natural logarithms):
/// `lambda_2 / gap * ln(1 / (2 eps)) <= tau(eps) <= (ln(1/pi_min) + ln(1/eps)) / gap`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MixingBounds {
    /// `max(0, lower_raw)`.
    pub lower: f64,
    /// Lower bound evaluated with the signed `lambda_2`; negative when the
    /// second eigenvalue is.
    pub lower_raw: f64,
    pub upper: f64,
}

pub fn mixing_time_bounds(chain: &MarkovChain, epsilon: f64) -> Result<MixingBounds> {
    let SpectralGap { gap, second_eigenvalue } = spectral_gap(chain)?;
    if !(epsilon > 0.0 && epsilon < 0.5) {
        return Err(Error::Argument(format!("epsilon must lie in (0, 1/2), got {epsilon}")));
    }
    let lower_raw = second_eigenvalue / gap * (1.0 / (2.0 * epsilon)).ln();
    let upper = ((1.0 / chain.stationary().min()).ln() + (1.0 / epsilon).ln()) / gap;
    Ok(MixingBounds { lower: lower_raw.max(0.0), lower_raw, upper })
}

/// Relative mixing time `tau_eta(eps)` from the adversarial family
/// `rho = (1 - eta) pi + eta delta_k`, maximized over all `k`.
///
/// Returns 0 when `eps >= eta`: every admissible start is already within
/// `eps`.
pub fn relative_mixing_time(chain: &MarkovChain, epsilon: f64, eta: f64) -> Result<usize> {
    if !(epsilon > 0.0) || !(eta > 0.0 && eta <= 1.0) {
        return Err(Error::Argument(format!(
            "need epsilon > 0 and eta in (0, 1], got epsilon={epsilon}, eta={eta}"
        )));
    }
    if epsilon >= eta {
        return Ok(0);
    }
    let n = chain.n();
    let pi = chain.stationary().as_slice();
    let cap = iteration_cap(chain, epsilon)?;
    let mut rho = DMatrix::from_fn(n, n, |j, k| {
        (1.0 - eta) * pi[j] + if j == k { eta } else { 0.0 }
    });
    for t in 0..=cap {
        let worst = rho
            .column_iter()
            .map(|c| tv_slices(c.as_slice(), pi))
            .fold(0.0, f64::max);
        if worst <= epsilon {
            return Ok(t);
        }
        rho = chain.transition() * &rho;
    }
    Err(Error::Divergence { iterations: cap })
}
