#![allow(dead_code)]

use nalgebra::DMatrix;
use qmix::markov::{Distribution, MarkovChain};

/// `(1/2) sum |a_i - b_i|`.
pub fn tv(a: &[f64], b: &[f64]) -> f64 {
    0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>()
}

/// Uniform on the first `k` of `n` states.
pub fn uniform_prefix(n: usize, k: usize) -> Vec<f64> {
    (0..n).map(|i| if i < k { 1.0 / k as f64 } else { 0.0 }).collect()
}

/// `min_j D(pi, uniform on first 2^j)` for `j < bits`, by direct TV.
pub fn min_ladder_distance(pi: &[f64], bits: u32) -> f64 {
    (0..bits)
        .map(|j| tv(pi, &uniform_prefix(pi.len(), 1 << j)))
        .fold(f64::INFINITY, f64::min)
}

/// `V_ik = sum_j min(sigma^i_j, sigma^k_j)` from the ladder vectors.
pub fn v_from_ladders(n: usize) -> DMatrix<f64> {
    let ladders: Vec<Vec<f64>> = (1..=n).map(|k| uniform_prefix(n, k)).collect();
    DMatrix::from_fn(n, n, |i, k| {
        ladders[i].iter().zip(&ladders[k]).map(|(a, b)| a.min(*b)).sum()
    })
}

/// Maximizes `c.x` subject to `A x <= b`, `x >= 0`, with `b >= 0`.
/// Dense tableau simplex with Bland's rule.
pub fn simplex_max(a: &[Vec<f64>], b: &[f64], c: &[f64]) -> (f64, Vec<f64>) {
    let m = a.len();
    let n = c.len();
    let width = n + m + 1;
    let mut t = vec![vec![0.0; width]; m + 1];
    for i in 0..m {
        t[i][..n].copy_from_slice(&a[i]);
        t[i][n + i] = 1.0;
        t[i][width - 1] = b[i];
    }
    for j in 0..n {
        t[m][j] = -c[j];
    }
    let mut basis: Vec<usize> = (n..n + m).collect();
    loop {
        let Some(col) = (0..n + m).find(|&j| t[m][j] < -1e-13) else { break };
        let row = (0..m)
            .filter(|&i| t[i][col] > 1e-13)
            .min_by(|&i, &k| {
                let (ri, rk) = (t[i][width - 1] / t[i][col], t[k][width - 1] / t[k][col]);
                ri.total_cmp(&rk).then(basis[i].cmp(&basis[k]))
            })
            .expect("bounded problem");
        let p = t[row][col];
        t[row].iter_mut().for_each(|x| *x /= p);
        for i in 0..=m {
            if i != row {
                let f = t[i][col];
                if f != 0.0 {
                    for j in 0..width {
                        t[i][j] -= f * t[row][j];
                    }
                }
            }
        }
        basis[row] = col;
    }
    let mut x = vec![0.0; n];
    for (i, &bi) in basis.iter().enumerate() {
        if bi < n {
            x[bi] = t[i][width - 1];
        }
    }
    (t[m][width - 1], x)
}

/// `max_q min_k (V q)_k` over the simplex, as an LP in `(q, t)`.
pub fn lp_game_value(v: &DMatrix<f64>) -> f64 {
    let n = v.nrows();
    // Rows: t - sum_i V_ik q_i <= 0 for each k, then sum q <= 1.
    let mut a = Vec::with_capacity(n + 1);
    for k in 0..n {
        let mut row: Vec<f64> = (0..n).map(|i| -v[(i, k)]).collect();
        row.push(1.0);
        a.push(row);
    }
    let mut last = vec![1.0; n];
    last.push(0.0);
    a.push(last);
    let mut b = vec![0.0; n];
    b.push(1.0);
    let mut c = vec![0.0; n];
    c.push(1.0);
    simplex_max(&a, &b, &c).0
}

fn game_objective(v: &DMatrix<f64>, q: &[f64]) -> f64 {
    (0..v.ncols())
        .map(|k| (0..q.len()).map(|i| v[(i, k)] * q[i]).sum::<f64>())
        .fold(f64::INFINITY, f64::min)
}

/// Zooming grid search of the same game for `N = 2` or `3`; the objective
/// is concave, so shrinking the box around the best point converges.
pub fn grid_game_value(v: &DMatrix<f64>) -> f64 {
    let n = v.nrows();
    assert!(n == 2 || n == 3);
    let steps = 40;
    let (mut c0, mut c1, mut half) = (0.5, 0.25, 0.5);
    let mut best = f64::NEG_INFINITY;
    for _ in 0..60 {
        let mut arg = (c0, c1);
        for a in 0..=steps {
            let x = c0 - half + 2.0 * half * a as f64 / steps as f64;
            if !(0.0..=1.0).contains(&x) {
                continue;
            }
            let ys: Vec<f64> = if n == 2 {
                vec![0.0]
            } else {
                (0..=steps).map(|b| c1 - half + 2.0 * half * b as f64 / steps as f64).collect()
            };
            for y in ys {
                if y < 0.0 || x + y > 1.0 {
                    continue;
                }
                let q = if n == 2 { vec![x, 1.0 - x] } else { vec![x, y, 1.0 - x - y] };
                let f = game_objective(v, &q);
                if f > best {
                    best = f;
                    arg = (x, y);
                }
            }
        }
        (c0, c1) = arg;
        half *= 0.5;
    }
    best
}

/// Worst-start distance sequence, by stepping every point mass.
pub fn brute_mixing_time(chain: &MarkovChain, eps: f64, cap: usize) -> Option<usize> {
    let n = chain.n();
    let p = chain.transition();
    let pi = chain.stationary().as_slice().to_vec();
    let mut dists: Vec<Vec<f64>> =
        (0..n).map(|k| (0..n).map(|i| if i == k { 1.0 } else { 0.0 }).collect()).collect();
    for t in 0..=cap {
        let worst = dists.iter().map(|d| tv(d, &pi)).fold(0.0, f64::max);
        if worst <= eps {
            return Some(t);
        }
        for d in &mut dists {
            *d = (0..n).map(|j| (0..n).map(|i| p[(j, i)] * d[i]).sum()).collect();
        }
    }
    None
}

/// Smallest `t` with `max_k TV(P^t rho_k, pi) <= eps` for
/// `rho_k = (1 - eta) pi + eta delta_k`.
pub fn brute_relative_mixing_time(chain: &MarkovChain, eps: f64, eta: f64, cap: usize) -> Option<usize> {
    let n = chain.n();
    let p = chain.transition();
    let pi = chain.stationary().as_slice().to_vec();
    let mut dists: Vec<Vec<f64>> = (0..n)
        .map(|k| (0..n).map(|i| (1.0 - eta) * pi[i] + if i == k { eta } else { 0.0 }).collect())
        .collect();
    for t in 0..=cap {
        let worst = dists.iter().map(|d| tv(d, &pi)).fold(0.0, f64::max);
        if worst <= eps {
            return Some(t);
        }
        for d in &mut dists {
            *d = (0..n).map(|j| (0..n).map(|i| p[(j, i)] * d[i]).sum()).collect();
        }
    }
    None
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

/// `D_ij = sqrt(pi_i) P_ji / sqrt(pi_j)`, built from the chain's parts.
pub fn discriminant(chain: &MarkovChain) -> DMatrix<f64> {
    let p = chain.transition();
    let pi = chain.stationary().as_slice();
    DMatrix::from_fn(chain.n(), chain.n(), |i, j| pi[i].sqrt() * p[(j, i)] / pi[j].sqrt())
}

/// Mirror sum `pi_i + pi_(N-1-i)`, normalized; V-shaped for geometric and
/// power-law targets.
pub fn mirrored(pi: &Distribution) -> Distribution {
    let p = pi.as_slice();
    let n = p.len();
    Distribution::from_weights((0..n).map(|i| p[i] + p[n - 1 - i]).collect()).unwrap()
}
