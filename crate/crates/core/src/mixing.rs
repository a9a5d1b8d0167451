//! Mixing by amplitude amplification from ladder states.
//!
//! All simulation happens in the eigenbasis of `W(P)` on the busy subspace,
//! extended by an ancilla register of dimension `M`. A state is stored as
//! `coords[k * M + a]` for eigenvector `k` and ancilla value `a`. In this
//! frame phase estimation on eigenvector `k` is a fixed `M x M` unitary, so
//! the approximate reflection `ARO(P)` reduces to one rank-one reflection of
//! the ancilla per eigenvector. [`phase_estimation_circuit`] builds the same
//! operator gate by gate on the full `N^2 * M` space for cross-checking.
//!
//! Two reflector modes are available: [`ReflectorMode::Ideal`] uses the
//! exact spectral reflection about `|pi'>`, [`ReflectorMode::Emulated`]
//! uses phase estimation with `t` ancilla qubits.

use std::cell::Cell;
use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::ladder;
use crate::linalg::C64;
use crate::markov::Distribution;
use crate::rng::{substream, SampleRng};
use crate::szegedy::{QuantumState, WalkOperator};
use crate::{Error, Result};

/// Largest extended dimension `N^2 * M` simulated.
pub const DIMENSION_BUDGET: usize = 1 << 22;
/// Overlaps below this are treated as zero.
pub const ORTHOGONALITY_TOL: f64 = 1e-12;
/// Growth factor of the randomized iteration schedule.
pub const BLIND_GROWTH: f64 = 1.2;
/// Largest `N` for the outer amplification strategy.
pub const OUTER_MAX_STATES: usize = 16;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// Precision `ceil(log2(4 pi / Delta)) + 2`.
pub fn default_precision_bits(phase_gap: f64) -> u32 {
    let t = (4.0 * PI / phase_gap).log2().ceil().max(0.0) as u32;
    t + 2
}

/// `(1/M) sum_{a<M} e^{i a theta}`, the amplitude of reading `0` from
/// phase estimation of an eigenphase `theta`.
pub fn zero_outcome_amplitude(theta: f64, ancilla_dim: usize) -> C64 {
    let sum: C64 = (0..ancilla_dim).map(|a| C64::from_polar(1.0, a as f64 * theta)).sum();
    sum / ancilla_dim as f64
}

/// In-place Walsh-Hadamard transform (unnormalized).
fn fwht(v: &mut [C64]) {
    let mut h = 1;
    while h < v.len() {
        for block in v.chunks_mut(2 * h) {
            let (lo, hi) = block.split_at_mut(h);
            for (x, y) in lo.iter_mut().zip(hi.iter_mut()) {
                let (a, b) = (*x, *y);
                *x = a + b;
                *y = a - b;
            }
        }
        h *= 2;
    }
}

/// `PE^dag |0>` for one eigenphase: `b_c = (1/M) sum_a (-1)^{a.c} e^{-i a theta}`.
fn unphased_zero(theta: f64, ancilla_dim: usize) -> Vec<C64> {
    let mut v: Vec<C64> = (0..ancilla_dim)
        .map(|a| C64::from_polar(1.0 / ancilla_dim as f64, -(a as f64) * theta))
        .collect();
    fwht(&mut v);
    v
}

fn kron(a: &[C64], b: &[C64]) -> Vec<C64> {
    a.iter().flat_map(|x| b.iter().map(move |y| x * y)).collect()
}

/// A state in the eigenframe of `W` on `A + B`, tensored with an ancilla.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameState {
    coords: Vec<C64>,
    ancilla_dim: usize,
}

impl FrameState {
    /// `|psi> (x) |0>` for a system state given by eigenframe coordinates.
    pub fn with_clean_ancilla(system: &[C64], ancilla_dim: usize) -> Self {
        let mut coords = vec![ZERO; system.len() * ancilla_dim];
        for (k, c) in system.iter().enumerate() {
            coords[k * ancilla_dim] = *c;
        }
        Self { coords, ancilla_dim }
    }

    pub fn coords(&self) -> &[C64] {
        &self.coords
    }

    pub fn ancilla_dim(&self) -> usize {
        self.ancilla_dim
    }

    pub fn norm(&self) -> f64 {
        self.coords.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Weight on each busy eigenvector, summed over the ancilla.
    pub fn eigen_weights(&self) -> Vec<f64> {
        self.coords
            .chunks(self.ancilla_dim)
            .map(|b| b.iter().map(|c| c.norm_sqr()).sum())
            .collect()
    }

    /// `<pi'| rho_sys |pi'>` for the system's reduced state.
    pub fn fidelity_at(&self, stationary_index: usize) -> f64 {
        self.eigen_weights()[stationary_index]
    }

    fn inner(&self, other: &FrameState) -> C64 {
        crate::linalg::cdot(&self.coords, &other.coords)
    }

    /// Full amplitude vector on `N^2 * M`, laid out as `s * M + a`.
    pub fn to_full(&self, walk: &WalkOperator) -> Vec<C64> {
        let m = self.ancilla_dim;
        let r = walk.busy_dim();
        let mut out = vec![ZERO; walk.dim() * m];
        let mut slice = vec![ZERO; r];
        for a in 0..m {
            for k in 0..r {
                slice[k] = self.coords[k * m + a];
            }
            if slice.iter().all(|c| c.norm_sqr() == 0.0) {
                continue;
            }
            for (s, x) in walk.from_eigen_coordinates(&slice).into_iter().enumerate() {
                out[s * m + a] = x;
            }
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ReflectorKind {
    Ideal,
    PhaseEstimated { bits: u32, repetitions: u32 },
}

/// Reflection about `|pi'>`, exact or built from phase estimation.
#[derive(Debug)]
pub struct ReflectionOracle<'w> {
    walk: &'w WalkOperator,
    kind: ReflectorKind,
    stationary_index: usize,
    ancilla_dim: usize,
    /// `PE^dag |0>` per eigenvector (phase-estimated kind only).
    vectors: Vec<Vec<C64>>,
    walk_calls_per_use: u64,
    calls: Cell<u64>,
}

/// Exact `R(P) = 2|pi'><pi'| - 1` on `A + B` (identity outside).
///
/// Each use is charged the walk calls of phase estimation at the default
/// precision, so costs are comparable with the emulated mode.
pub fn ideal_reflection(walk: &WalkOperator) -> Result<ReflectionOracle<'_>> {
    let stationary_index = walk.stationary_index()?;
    let bits = default_precision_bits(walk.phase_gap()?);
    Ok(ReflectionOracle {
        walk,
        kind: ReflectorKind::Ideal,
        stationary_index,
        ancilla_dim: 1,
        vectors: vec![],
        walk_calls_per_use: 2 * ((1u64 << bits) - 1),
        calls: Cell::new(0),
    })
}

/// `ARO(P)` with `bits` ancilla qubits.
pub fn aro(walk: &WalkOperator, bits: u32) -> Result<ReflectionOracle<'_>> {
    aro_repeated(walk, bits, 1)
}

/// `ARO(P)` with `repetitions` independent `bits`-qubit registers; the phase
/// flip is skipped only when every register reads zero.
pub fn aro_repeated(walk: &WalkOperator, bits: u32, repetitions: u32) -> Result<ReflectionOracle<'_>> {
    if bits == 0 || repetitions == 0 {
        return Err(Error::Argument("ARO needs at least one bit and one repetition".into()));
    }
    let stationary_index = walk.stationary_index()?;
    let ancilla_dim = check_budget(walk.dim(), bits, repetitions)?;
    let m = 1usize << bits;
    let vectors = walk
        .eigenphases()
        .iter()
        .map(|&theta| {
            let b = unphased_zero(theta, m);
            (1..repetitions).fold(b.clone(), |acc, _| kron(&acc, &b))
        })
        .collect();
    Ok(ReflectionOracle {
        walk,
        kind: ReflectorKind::PhaseEstimated { bits, repetitions },
        stationary_index,
        ancilla_dim,
        vectors,
        walk_calls_per_use: 2 * (m as u64 - 1) * repetitions as u64,
        calls: Cell::new(0),
    })
}

fn check_budget(system_dim: usize, bits: u32, repetitions: u32) -> Result<usize> {
    let too_big = Error::Resource { dimension: usize::MAX, limit: DIMENSION_BUDGET };
    let total_bits = bits.checked_mul(repetitions).ok_or(too_big)?;
    if total_bits >= usize::BITS - 1 {
        return Err(Error::Resource { dimension: usize::MAX, limit: DIMENSION_BUDGET });
    }
    let ancilla = 1usize << total_bits;
    let dimension = system_dim.saturating_mul(ancilla);
    if dimension > DIMENSION_BUDGET {
        return Err(Error::Resource { dimension, limit: DIMENSION_BUDGET });
    }
    Ok(ancilla)
}

impl<'w> ReflectionOracle<'w> {
    pub fn kind(&self) -> ReflectorKind {
        self.kind
    }

    pub fn walk(&self) -> &'w WalkOperator {
        self.walk
    }

    pub fn ancilla_dim(&self) -> usize {
        self.ancilla_dim
    }

    pub fn stationary_index(&self) -> usize {
        self.stationary_index
    }

    /// Number of applications so far.
    pub fn call_count(&self) -> u64 {
        self.calls.get()
    }

    pub fn walk_calls_per_use(&self) -> u64 {
        self.walk_calls_per_use
    }

    /// Applies the reflection to an eigenframe state.
    pub fn apply(&self, state: &mut FrameState) -> Result<()> {
        if state.ancilla_dim != self.ancilla_dim || state.coords.len() != self.walk.busy_dim() * self.ancilla_dim {
            return Err(Error::Dimension {
                expected: self.walk.busy_dim() * self.ancilla_dim,
                found: state.coords.len(),
            });
        }
        self.calls.set(self.calls.get() + 1);
        let m = self.ancilla_dim;
        match self.kind {
            ReflectorKind::Ideal => {
                for (k, block) in state.coords.chunks_mut(m).enumerate() {
                    if k != self.stationary_index {
                        block.iter_mut().for_each(|c| *c = -*c);
                    }
                }
            }
            ReflectorKind::PhaseEstimated { .. } => {
                for (block, b) in state.coords.chunks_mut(m).zip(&self.vectors) {
                    let proj: C64 = b.iter().zip(block.iter()).map(|(x, y)| x.conj() * y).sum();
                    for (y, x) in block.iter_mut().zip(b) {
                        *y = 2.0 * proj * x - *y;
                    }
                }
            }
        }
        Ok(())
    }

    /// Applies the reflection to `|psi> (x) |0>` for a state on `N^2` and
    /// returns the full output on `N^2 * M` (layout `s * M + a`). The part of
    /// `|psi>` outside `A + B` is left unchanged.
    pub fn apply_to_state(&self, state: &QuantumState) -> Result<Vec<C64>> {
        let coords = self.walk.eigen_coordinates(state)?;
        let inside = self.walk.from_eigen_coordinates(&coords);
        let mut frame = FrameState::with_clean_ancilla(&coords, self.ancilla_dim);
        self.apply(&mut frame)?;
        let mut out = frame.to_full(self.walk);
        let m = self.ancilla_dim;
        for (s, (x, y)) in state.amplitudes().iter().zip(&inside).enumerate() {
            out[s * m] += x - y;
        }
        Ok(out)
    }

    /// `max_k || (R_t - R) |e_k>|0> ||` over busy eigenvectors.
    pub fn busy_error(&self) -> f64 {
        match self.kind {
            ReflectorKind::Ideal => 0.0,
            ReflectorKind::PhaseEstimated { .. } => self
                .vectors
                .iter()
                .enumerate()
                .map(|(k, b)| {
                    let target = if k == self.stationary_index { 1.0 } else { -1.0 };
                    let mut err = 0.0;
                    for (c, x) in b.iter().enumerate() {
                        let mut out = 2.0 * b[0].conj() * x;
                        if c == 0 {
                            out -= 1.0;
                            out -= target;
                        }
                        err += out.norm_sqr();
                    }
                    err.sqrt()
                })
                .fold(0.0, f64::max),
        }
    }
}

/// Result of iterating `G = -R_init R_pi` from an initial state.
#[derive(Clone, Debug)]
pub struct Amplified {
    pub state: FrameState,
    /// `theta_0 = asin |<init|pi'>|`.
    pub initial_angle: f64,
    pub iterations: usize,
    /// Fidelity with `|pi'>` after each iteration, starting with iteration 0.
    pub trajectory: Vec<f64>,
    /// Largest norm outside `span{|init>, |pi'>}` seen along the way.
    pub plane_leakage: f64,
    pub fidelity: f64,
}

/// Runs `iterations` steps of amplitude amplification toward `|pi'>`.
///
/// The reflection about the initial state is applied exactly; it acts on
/// `|init> (x) |0>`.
pub fn amplitude_amplify(
    oracle: &ReflectionOracle<'_>,
    initial: &QuantumState,
    iterations: usize,
) -> Result<Amplified> {
    let coords = oracle.walk.eigen_coordinates(initial)?;
    let leak = oracle.walk.busy_leakage(initial)?;
    if leak > 1e-9 {
        return Err(Error::Precondition(format!("initial state leaves A+B by {leak:e}")));
    }
    amplify_frame(oracle, &FrameState::with_clean_ancilla(&coords, oracle.ancilla_dim), iterations)
}

fn amplify_frame(oracle: &ReflectionOracle<'_>, init: &FrameState, iterations: usize) -> Result<Amplified> {
    let z = oracle.stationary_index;
    let m = oracle.ancilla_dim;
    let overlap = init.coords[z * m].norm();
    if overlap < ORTHOGONALITY_TOL {
        return Err(Error::Orthogonality(overlap));
    }
    let target = {
        let mut c = vec![ZERO; init.coords.len()];
        c[z * m] = C64::new(1.0, 0.0);
        FrameState { coords: c, ancilla_dim: m }
    };
    // Orthonormal partner of |pi'> inside the plane, for leakage tracking.
    let partner = {
        let o = target.inner(init);
        let mut c: Vec<C64> = init.coords.iter().zip(&target.coords).map(|(x, t)| x - o * t).collect();
        let norm = c.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        if norm > 1e-14 {
            c.iter_mut().for_each(|x| *x /= norm);
            Some(FrameState { coords: c, ancilla_dim: m })
        } else {
            None
        }
    };
    let leakage = |s: &FrameState| {
        let a = target.inner(s);
        let mut rest = s.coords.clone();
        rest[z * m] -= a;
        if let Some(p) = partner.as_ref() {
            let b = p.inner(s);
            rest.iter_mut().zip(&p.coords).for_each(|(r, x)| *r -= b * x);
        }
        rest.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
    };

    let mut state = init.clone();
    let mut trajectory = vec![state.fidelity_at(z)];
    let mut plane_leakage = 0.0f64;
    for _ in 0..iterations {
        oracle.apply(&mut state)?;
        let proj = init.inner(&state);
        for (y, x) in state.coords.iter_mut().zip(&init.coords) {
            *y -= 2.0 * proj * x;
        }
        trajectory.push(state.fidelity_at(z));
        plane_leakage = plane_leakage.max(leakage(&state));
    }
    let fidelity = state.fidelity_at(z);
    Ok(Amplified {
        state,
        initial_angle: overlap.min(1.0).asin(),
        iterations,
        trajectory,
        plane_leakage,
        fidelity,
    })
}

/// Iteration count maximizing `sin^2((2m + 1) theta)` near
/// `pi / (4 theta) - 1/2`, clamped to `0..=cap`.
pub fn optimal_iterations(theta: f64, cap: usize) -> usize {
    if theta <= 0.0 {
        return cap;
    }
    let x = (PI / (4.0 * theta) - 0.5).max(0.0);
    let lo = (x.floor() as usize).min(cap);
    let hi = (x.ceil() as usize).min(cap);
    let f = |m: usize| ((2 * m + 1) as f64 * theta).sin().powi(2);
    if f(hi) > f(lo) {
        hi
    } else {
        lo
    }
}

/// How the `|pi>`-projective measurement is realized.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MeasurementMode {
    Ideal,
    /// `rounds` fresh `bits`-qubit phase estimations, accepting only if all
    /// read zero.
    PhaseEstimated { bits: u32, rounds: u32 },
}

/// Outcome statistics of a `|pi>`-projective measurement.
#[derive(Clone, Debug)]
pub struct PiMeasurement {
    pub success_probability: f64,
    /// Post-measurement state on success.
    pub success_state: Option<FrameState>,
    /// Post-measurement state on failure. In phase-estimated mode this is
    /// the representative with the exact eigenvector weights.
    pub failure_state: Option<FrameState>,
    /// Fidelity with `|pi'>` of the success state.
    pub heralded_fidelity: f64,
    pub walk_calls: u64,
}

/// Measures whether `state` is `|pi'>` by phase estimation (or exactly).
pub fn pi_projective_measurement(
    state: &FrameState,
    walk: &WalkOperator,
    mode: MeasurementMode,
) -> Result<PiMeasurement> {
    let z = walk.stationary_index()?;
    let m = state.ancilla_dim;
    let phases = walk.eigenphases();
    if state.coords.len() != phases.len() * m {
        return Err(Error::Dimension { expected: phases.len() * m, found: state.coords.len() });
    }
    let (factors, walk_calls): (Vec<C64>, u64) = match mode {
        MeasurementMode::Ideal => (
            (0..phases.len()).map(|k| C64::new(if k == z { 1.0 } else { 0.0 }, 0.0)).collect(),
            0,
        ),
        MeasurementMode::PhaseEstimated { bits, rounds } => {
            let dim = 1usize << bits;
            let f = phases
                .iter()
                .enumerate()
                .map(|(k, &t)| {
                    if k == z {
                        C64::new(1.0, 0.0)
                    } else {
                        zero_outcome_amplitude(t, dim).powu(rounds)
                    }
                })
                .collect();
            (f, (dim as u64 - 1) * rounds as u64)
        }
    };
    let mut success = state.coords.clone();
    let mut failure = state.coords.clone();
    for (k, (s_block, f_block)) in success.chunks_mut(m).zip(failure.chunks_mut(m)).enumerate() {
        let f = factors[k];
        let keep = (1.0 - f.norm_sqr()).max(0.0).sqrt();
        s_block.iter_mut().for_each(|c| *c *= f);
        f_block.iter_mut().for_each(|c| *c *= keep);
    }
    let total = state.norm().powi(2);
    let p_success: f64 = success.iter().map(|c| c.norm_sqr()).sum::<f64>() / total;
    let normalize = |mut v: Vec<C64>| {
        let n = v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        (n > 1e-300).then(|| {
            v.iter_mut().for_each(|c| *c /= n);
            FrameState { coords: v, ancilla_dim: m }
        })
    };
    let success_state = normalize(success);
    let heralded_fidelity = success_state.as_ref().map_or(0.0, |s| s.fidelity_at(z));
    Ok(PiMeasurement {
        success_probability: p_success.clamp(0.0, 1.0),
        success_state,
        failure_state: normalize(failure),
        heralded_fidelity,
        walk_calls,
    })
}

/// Largest zero-outcome probability of a `bits`-qubit phase estimation over
/// eigenphases with `|theta| >= Delta / 2`: `1 / (M sin(Delta/4))^2`.
pub fn false_accept_bound(bits: u32, phase_gap: f64) -> f64 {
    let m = (1u64 << bits) as f64;
    (1.0 / (m * (phase_gap / 4.0).sin()).powi(2)).min(1.0)
}

/// Rounds so that `kappa^rounds <= target`.
pub fn measurement_rounds(kappa: f64, target: f64) -> u32 {
    if kappa <= 0.0 {
        return 1;
    }
    if kappa >= 1.0 {
        return u32::MAX;
    }
    ((1.0 / target).ln() / (1.0 / kappa).ln()).ceil().max(1.0) as u32
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReflectorMode {
    Ideal,
    /// `bits = None` picks [`default_precision_bits`].
    Emulated { bits: Option<u32>, repetitions: u32 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Schedule {
    /// Closed-form iteration count from the known overlap.
    Oracle,
    /// Randomized iteration counts with geometric growth.
    Blind,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    /// Try candidates in order, sweeping until one succeeds.
    Sequential,
    /// Amplitude amplification over a register indexing the candidates.
    Outer,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MixOptions {
    pub mode: ReflectorMode,
    pub schedule: Schedule,
    pub strategy: Strategy,
    pub seed: u64,
    pub max_sweeps: usize,
    /// Check the shape promise on the stationary distribution.
    pub verify: bool,
}

impl Default for MixOptions {
    fn default() -> Self {
        Self {
            mode: ReflectorMode::Ideal,
            schedule: Schedule::Oracle,
            strategy: Strategy::Sequential,
            seed: 0,
            max_sweeps: 64,
            verify: true,
        }
    }
}

/// Outcome of a mixing run.
#[derive(Clone, Debug)]
pub struct MixingResult {
    /// Heralded state on `N^2 * M` amplitudes (layout `s * M + a`).
    pub final_state: QuantumState,
    pub ancilla_dim: usize,
    /// Fidelity of the system's reduced state with `|pi'>` after the herald.
    pub fidelity: f64,
    /// Fidelity right before the successful measurement.
    pub amplified_fidelity: f64,
    pub reflector_calls: u64,
    pub walk_calls: u64,
    /// Amplification iterations per attempt.
    pub schedule: Vec<usize>,
    /// Candidate index of each attempt.
    pub attempted: Vec<usize>,
    /// Index of the candidate that succeeded.
    pub chosen_k: usize,
    /// Support size of the succeeding ladder.
    pub chosen_cutoff: usize,
    pub measurements: u64,
    pub t_bits: Option<u32>,
    /// Expected reflector calls of the sequential oracle schedule, computed
    /// from the exact per-candidate success probabilities.
    pub expected_reflector_calls: Option<f64>,
    /// Iterations of the inner amplification (outer strategy only).
    pub inner_iterations: Vec<usize>,
}

/// Ladders `sigma` anchored at one end of a window, growing in powers of two.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LadderFamily {
    /// Uniform on `anchor, anchor + 1, ...`.
    Forward { anchor: usize, window: usize },
    /// Uniform on `anchor, anchor - 1, ...`.
    Backward { anchor: usize, window: usize },
}

impl LadderFamily {
    /// Number of ladders: `max(1, ceil(log2 window))`.
    pub fn bits(&self) -> u32 {
        let w = match *self {
            Self::Forward { window, .. } | Self::Backward { window, .. } => window,
        };
        w.next_power_of_two().trailing_zeros().max(1)
    }

    pub fn members(&self, n_states: usize) -> Result<Vec<(usize, Distribution)>> {
        let (anchor, window, forward) = match *self {
            Self::Forward { anchor, window } => (anchor, window, true),
            Self::Backward { anchor, window } => (anchor, window, false),
        };
        let fits = if forward { anchor + window <= n_states } else { window <= anchor + 1 };
        if window == 0 || anchor >= n_states || !fits {
            return Err(Error::Argument(format!(
                "ladder window {window} at {anchor} does not fit {n_states} states"
            )));
        }
        (0..self.bits())
            .map(|j| {
                let len = (1usize << j).min(window);
                let mut probs = vec![0.0; n_states];
                for s in 0..len {
                    let idx = if forward { anchor + s } else { anchor - s };
                    probs[idx] = 1.0 / len as f64;
                }
                Ok((len, Distribution::new(probs)?))
            })
            .collect()
    }
}

/// Candidate initial distribution with its guaranteed-overlap bookkeeping.
#[derive(Clone, Debug)]
pub struct Candidate {
    pub cutoff: usize,
    pub distribution: Distribution,
}

/// Guaranteed overlap `p / (2(n + 1))` with the best candidate.
fn overlap_floor(bits: u32, head_mass: f64) -> f64 {
    head_mass / (2.0 * (bits as f64 + 1.0))
}

fn iteration_cap(floor: f64) -> usize {
    (PI / (4.0 * floor.min(1.0).asin())).ceil() as usize
}

struct Engine<'w> {
    walk: &'w WalkOperator,
    oracle: ReflectionOracle<'w>,
    measure: MeasurementMode,
    measure_calls: u64,
    t_bits: Option<u32>,
}

impl<'w> Engine<'w> {
    fn new(walk: &'w WalkOperator, mode: ReflectorMode, epsilon: f64, bits_n: u32, floor: f64) -> Result<Self> {
        let gap = walk.phase_gap()?;
        let default_bits = default_precision_bits(gap);
        // Union bound over the O(log N) reflector uses.
        let eps_each = epsilon / (bits_n.max(1) as f64);
        match mode {
            ReflectorMode::Ideal => {
                let rounds = measurement_rounds(false_accept_bound(default_bits, gap), eps_each * floor);
                let oracle = ideal_reflection(walk)?;
                Ok(Self {
                    walk,
                    oracle,
                    measure: MeasurementMode::Ideal,
                    measure_calls: ((1u64 << default_bits) - 1) * rounds as u64,
                    t_bits: None,
                })
            }
            ReflectorMode::Emulated { bits, repetitions } => {
                let t = bits.unwrap_or(default_bits);
                let kappa = false_accept_bound(t, gap);
                if kappa >= 1.0 {
                    return Err(Error::Argument(format!(
                        "{t} bits cannot resolve the phase gap {gap:.3e}"
                    )));
                }
                let rounds = measurement_rounds(kappa, eps_each * floor);
                let oracle = aro_repeated(walk, t, repetitions)?;
                let measure = MeasurementMode::PhaseEstimated { bits: t, rounds };
                Ok(Self { walk, oracle, measure, measure_calls: 0, t_bits: Some(t) })
            }
        }
    }

    fn measurement_walk_calls(&self, m: &PiMeasurement) -> u64 {
        m.walk_calls + self.measure_calls
    }

    fn initial_frame(&self, sigma: &Distribution) -> Result<FrameState> {
        let lifted = self.walk.lift(sigma)?;
        let coords = self.walk.eigen_coordinates(&lifted)?;
        Ok(FrameState::with_clean_ancilla(&coords, self.oracle.ancilla_dim))
    }

    fn finish(
        &self,
        state: FrameState,
        fidelity: f64,
        amplified_fidelity: f64,
        ledger: Ledger,
        chosen: (usize, usize),
        expected_reflector_calls: Option<f64>,
    ) -> Result<MixingResult> {
        let ancilla_dim = state.ancilla_dim;
        let final_state = QuantumState::normalized(state.to_full(self.walk))?;
        Ok(MixingResult {
            final_state,
            ancilla_dim,
            fidelity,
            amplified_fidelity,
            reflector_calls: ledger.reflector_calls,
            walk_calls: ledger.walk_calls,
            schedule: ledger.schedule,
            attempted: ledger.attempted,
            chosen_k: chosen.0,
            chosen_cutoff: chosen.1,
            measurements: ledger.measurements,
            t_bits: self.t_bits,
            expected_reflector_calls,
            inner_iterations: ledger.inner,
        })
    }
}

#[derive(Default)]
struct Ledger {
    reflector_calls: u64,
    walk_calls: u64,
    schedule: Vec<usize>,
    attempted: Vec<usize>,
    measurements: u64,
    inner: Vec<usize>,
}

/// Expected total iterations of sequential sweeps with fixed per-candidate
/// `(iterations, success probability)`.
pub fn expected_sequential_cost(per_candidate: &[(usize, f64)]) -> Option<f64> {
    let mut reach = 1.0;
    let mut sweep_cost = 0.0;
    for &(m, s) in per_candidate {
        sweep_cost += m as f64 * reach;
        reach *= 1.0 - s;
    }
    (reach < 1.0).then(|| sweep_cost / (1.0 - reach))
}

fn mix_candidates(
    walk: &WalkOperator,
    epsilon: f64,
    candidates: &[Candidate],
    bits_n: u32,
    head_mass: f64,
    options: &MixOptions,
) -> Result<MixingResult> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::Argument(format!("epsilon must lie in (0, 1), got {epsilon}")));
    }
    let floor = overlap_floor(bits_n, head_mass);
    let engine = Engine::new(walk, options.mode, epsilon, bits_n, floor * floor)?;
    match options.strategy {
        Strategy::Sequential => run_sequential(&engine, epsilon, candidates, floor, options),
        Strategy::Outer => run_outer(&engine, epsilon, candidates, floor, options),
    }
}

fn run_sequential(
    engine: &Engine<'_>,
    epsilon: f64,
    candidates: &[Candidate],
    floor: f64,
    options: &MixOptions,
) -> Result<MixingResult> {
    let mut rng = substream(options.seed, 0);
    let z = engine.oracle.stationary_index;
    let cap = iteration_cap(floor);
    let level_cap = 2 * (1.0 / floor.min(1.0).asin()).log2().ceil().max(1.0) as u32;
    let inits = candidates.iter().map(|c| engine.initial_frame(&c.distribution)).collect::<Result<Vec<_>>>()?;

    let mut expected = None;
    if options.schedule == Schedule::Oracle {
        let mut per = Vec::with_capacity(inits.len());
        for init in &inits {
            let theta = init.coords[z * init.ancilla_dim].norm().min(1.0).asin();
            let m = optimal_iterations(theta, cap);
            let amp = amplify_frame(&engine.oracle, init, m)?;
            let meas = pi_projective_measurement(&amp.state, engine.walk, engine.measure)?;
            per.push((m, meas.success_probability));
        }
        expected = expected_sequential_cost(&per);
    }

    let mut ledger = Ledger::default();
    for _sweep in 0..options.max_sweeps {
        for (idx, init) in inits.iter().enumerate() {
            let theta = init.coords[z * init.ancilla_dim].norm().min(1.0).asin();
            let levels = match options.schedule {
                Schedule::Oracle => 1,
                Schedule::Blind => level_cap,
            };
            for level in 0..levels {
                let m = match options.schedule {
                    Schedule::Oracle => optimal_iterations(theta, cap),
                    Schedule::Blind => blind_iterations(level, cap, &mut rng),
                };
                let amp = amplify_frame(&engine.oracle, init, m)?;
                let meas = pi_projective_measurement(&amp.state, engine.walk, engine.measure)?;
                ledger.reflector_calls += m as u64;
                ledger.walk_calls += m as u64 * engine.oracle.walk_calls_per_use + engine.measurement_walk_calls(&meas);
                ledger.schedule.push(m);
                ledger.attempted.push(idx);
                ledger.measurements += 1;
                if rng.random::<f64>() < meas.success_probability {
                    let state = meas.success_state.expect("success has positive probability");
                    let fid = meas.heralded_fidelity;
                    if fid < 1.0 - epsilon {
                        return Err(Error::Precondition(format!(
                            "heralded fidelity {fid} below target {}",
                            1.0 - epsilon
                        )));
                    }
                    return engine.finish(state, fid, amp.fidelity, ledger, (idx, candidates[idx].cutoff), expected);
                }
            }
        }
    }
    Err(Error::Divergence { iterations: options.max_sweeps })
}

/// Uniform draw from `0..ceil(min(lambda^level, cap + 1))`.
fn blind_iterations(level: u32, cap: usize, rng: &mut SampleRng) -> usize {
    let bound = BLIND_GROWTH.powi(level as i32).min(cap as f64 + 1.0).ceil() as usize;
    rng.random_range(0..bound.max(1))
}

/// Amplitude amplification over `(1/sqrt(n)) sum_j |j> G_j^{m_j} |init_j>`,
/// marking branches by the reflection about `|pi'>` on the system.
fn run_outer(
    engine: &Engine<'_>,
    epsilon: f64,
    candidates: &[Candidate],
    floor: f64,
    options: &MixOptions,
) -> Result<MixingResult> {
    let walk = engine.walk;
    if walk.n() > OUTER_MAX_STATES {
        return Err(Error::Resource { dimension: walk.n(), limit: OUTER_MAX_STATES });
    }
    let mut rng = substream(options.seed, 1);
    let z = engine.oracle.stationary_index;
    let cap = iteration_cap(floor);
    let branches = candidates.len();
    let inits = candidates.iter().map(|c| engine.initial_frame(&c.distribution)).collect::<Result<Vec<_>>>()?;
    let outer_cap = (PI / 4.0 * (2.0 * branches as f64).sqrt()).ceil() as usize;
    let level_cap = 2 * (outer_cap as f64).log2().ceil().max(1.0) as u32 + 2;
    let mut ledger = Ledger::default();
    let m_anc = engine.oracle.ancilla_dim;
    let block = inits[0].coords.len();

    for _sweep in 0..options.max_sweeps {
        let inner: Vec<usize> = match options.schedule {
            Schedule::Oracle => inits
                .iter()
                .map(|i| optimal_iterations(i.coords[z * m_anc].norm().min(1.0).asin(), cap))
                .collect(),
            Schedule::Blind => vec![blind_iterations(level_cap, cap, &mut rng); branches],
        };
        let prep_cost = *inner.iter().max().unwrap_or(&0) as u64;
        let mut psi = Vec::with_capacity(branches * block);
        for (init, &m) in inits.iter().zip(&inner) {
            let amp = amplify_frame(&engine.oracle, init, m)?;
            psi.extend(amp.state.coords.iter().map(|c| c / (branches as f64).sqrt()));
        }
        for level in 0..level_cap {
            let bound = BLIND_GROWTH.powi(level as i32).min(outer_cap as f64 + 1.0).ceil() as usize;
            let m_out = rng.random_range(0..bound.max(1));
            let mut state = psi.clone();
            for _ in 0..m_out {
                for chunk in state.chunks_mut(block) {
                    let mut f = FrameState { coords: chunk.to_vec(), ancilla_dim: m_anc };
                    engine.oracle.apply(&mut f)?;
                    chunk.copy_from_slice(&f.coords);
                }
                let proj: C64 = psi.iter().zip(&state).map(|(a, b)| a.conj() * b).sum();
                for (y, x) in state.iter_mut().zip(&psi) {
                    *y -= 2.0 * proj * x;
                }
            }
            // The candidate register is discarded: sum branch weights per
            // eigenvector to get the system state's statistics.
            let mut weights = vec![0.0; block];
            for chunk in state.chunks(block) {
                for (w, c) in weights.iter_mut().zip(chunk) {
                    *w += c.norm_sqr();
                }
            }
            let total_before: f64 = weights.iter().sum();
            let amplified = (0..m_anc).map(|a| weights[z * m_anc + a]).sum::<f64>() / total_before;
            let rep = FrameState {
                coords: weights.iter().map(|w| C64::new(w.sqrt(), 0.0)).collect(),
                ancilla_dim: m_anc,
            };
            let meas = pi_projective_measurement(&rep, walk, engine.measure)?;
            let reflector_cost = (2 * m_out as u64 + 1) * prep_cost + m_out as u64;
            ledger.reflector_calls += reflector_cost;
            ledger.walk_calls += reflector_cost * engine.oracle.walk_calls_per_use + engine.measurement_walk_calls(&meas);
            ledger.schedule.push(m_out);
            ledger.inner.push(prep_cost as usize);
            ledger.measurements += 1;
            if rng.random::<f64>() < meas.success_probability {
                let branch_weight = |j: usize| {
                    state[j * block..(j + 1) * block][z * m_anc..(z + 1) * m_anc]
                        .iter()
                        .map(|c| c.norm_sqr())
                        .sum::<f64>()
                };
                let chosen = (0..branches).max_by(|&a, &b| branch_weight(a).total_cmp(&branch_weight(b))).unwrap_or(0);
                ledger.attempted.push(chosen);
                let fid = meas.heralded_fidelity;
                if fid < 1.0 - epsilon {
                    return Err(Error::Precondition(format!(
                        "heralded fidelity {fid} below target {}",
                        1.0 - epsilon
                    )));
                }
                let success = meas.success_state.expect("success has positive probability");
                return engine.finish(success, fid, amplified, ledger, (chosen, candidates[chosen].cutoff), None);
            }
        }
    }
    Err(Error::Divergence { iterations: options.max_sweeps })
}

fn candidates_from(family: LadderFamily, n_states: usize) -> Result<Vec<Candidate>> {
    Ok(family
        .members(n_states)?
        .into_iter()
        .map(|(cutoff, distribution)| Candidate { cutoff, distribution })
        .collect())
}

/// Prepares `|pi'>` for a chain whose stationary distribution decays,
/// trying the ladders `sigma^(2^k)`, `k < ceil(log2 N)`.
pub fn mix_monotone(walk: &WalkOperator, epsilon: f64, options: &MixOptions) -> Result<MixingResult> {
    let n = walk.n();
    if options.verify {
        if let Some(i) = walk.stationary().first_increase(ladder::MONOTONE_TOL) {
            return Err(Error::Precondition(format!(
                "stationary distribution increases at index {}",
                i + 1
            )));
        }
    }
    let family = LadderFamily::Forward { anchor: 0, window: n };
    let candidates = candidates_from(family, n)?;
    mix_candidates(walk, epsilon, &candidates, family.bits(), 1.0, options)
}

/// Mixing when `pi` decays only on its first `cutoff` states, which carry
/// mass `head_mass`. Ladders live on the head window.
pub fn mix_truncated(
    walk: &WalkOperator,
    cutoff: usize,
    head_mass: f64,
    epsilon: f64,
    options: &MixOptions,
) -> Result<MixingResult> {
    if !(head_mass > 0.0 && head_mass <= 1.0) {
        return Err(Error::Argument(format!("head mass must lie in (0, 1], got {head_mass}")));
    }
    let n = walk.n();
    if cutoff == 0 || cutoff > n {
        return Err(Error::Argument(format!("cutoff {cutoff} outside 1..={n}")));
    }
    if options.verify {
        let pi = walk.stationary().as_slice();
        let head = &pi[..cutoff];
        if head.windows(2).any(|w| w[1] > w[0] + ladder::MONOTONE_TOL) {
            return Err(Error::Precondition(format!("stationary distribution does not decay on 1..={cutoff}")));
        }
        let mass: f64 = head.iter().sum();
        if mass + 1e-12 < head_mass {
            return Err(Error::Precondition(format!("head carries mass {mass}, promised {head_mass}")));
        }
    }
    let family = LadderFamily::Forward { anchor: 0, window: cutoff };
    let candidates = candidates_from(family, n)?;
    mix_candidates(walk, epsilon, &candidates, family.bits(), head_mass, options)
}

/// Mixing for a convex `pi` (decaying, then increasing): head ladders from
/// the first state and tail ladders from the last; one side carries mass
/// at least `1/2`.
pub fn mix_convex(walk: &WalkOperator, epsilon: f64, options: &MixOptions) -> Result<MixingResult> {
    let n = walk.n();
    if options.verify && !is_convex_shape(walk.stationary()) {
        return Err(Error::Precondition("stationary distribution is not convex".into()));
    }
    let head = LadderFamily::Forward { anchor: 0, window: n };
    let tail = LadderFamily::Backward { anchor: n - 1, window: n };
    let mut candidates = candidates_from(head, n)?;
    candidates.extend(candidates_from(tail, n)?);
    mix_candidates(walk, epsilon, &candidates, head.bits(), 0.5, options)
}

/// Mixing for a unimodal `pi` with known mode: ladders grow outward from
/// the mode on both sides.
pub fn mix_unimodal(walk: &WalkOperator, mode: usize, epsilon: f64, options: &MixOptions) -> Result<MixingResult> {
    let n = walk.n();
    if mode >= n {
        return Err(Error::Argument(format!("mode {mode} outside 0..{n}")));
    }
    if options.verify && !is_unimodal_at(walk.stationary(), mode) {
        return Err(Error::Precondition(format!("stationary distribution is not unimodal at {mode}")));
    }
    let right = LadderFamily::Forward { anchor: mode, window: n - mode };
    let left = LadderFamily::Backward { anchor: mode, window: mode + 1 };
    let mut candidates = candidates_from(right, n)?;
    candidates.extend(candidates_from(left, n)?);
    let bits = right.bits().max(left.bits());
    mix_candidates(walk, epsilon, &candidates, bits, 0.5, options)
}

/// Non-increasing, then non-decreasing.
pub fn is_convex_shape(pi: &Distribution) -> bool {
    let p = pi.as_slice();
    let tol = ladder::MONOTONE_TOL;
    let mut i = 0;
    while i + 1 < p.len() && p[i + 1] <= p[i] + tol {
        i += 1;
    }
    p[i..].windows(2).all(|w| w[1] + tol >= w[0])
}

/// Non-decreasing up to `mode`, non-increasing after.
pub fn is_unimodal_at(pi: &Distribution, mode: usize) -> bool {
    let p = pi.as_slice();
    let tol = ladder::MONOTONE_TOL;
    p[..=mode].windows(2).all(|w| w[1] + tol >= w[0]) && p[mode..].windows(2).all(|w| w[1] <= w[0] + tol)
}

/// A set of marked states with its stationary weight.
#[derive(Clone, Debug, PartialEq)]
pub struct SearchTarget {
    pub members: Vec<usize>,
    pub weight: f64,
}

impl SearchTarget {
    pub fn new(pi: &Distribution, members: Vec<usize>) -> Result<Self> {
        if let Some(&bad) = members.iter().find(|&&i| i >= pi.len()) {
            return Err(Error::Argument(format!("state {bad} outside 0..{}", pi.len())));
        }
        let mut members = members;
        members.sort_unstable();
        members.dedup();
        let weight = members.iter().map(|&i| pi[i]).sum();
        if !(weight > 0.0) {
            return Err(Error::Argument("marked set has zero stationary mass".into()));
        }
        Ok(Self { members, weight })
    }
}

/// `pi` restricted to the marked states and renormalized.
pub fn truncated_distribution(pi: &Distribution, target: &SearchTarget) -> Result<Distribution> {
    let mut probs = vec![0.0; pi.len()];
    for &i in &target.members {
        if i >= pi.len() {
            return Err(Error::Argument(format!("state {i} outside 0..{}", pi.len())));
        }
        probs[i] = pi[i];
    }
    Distribution::from_weights(probs).map_err(|_| Error::Argument("marked set has zero stationary mass".into()))
}

/// `ARO(P)` assembled from explicit gates on the full `N^2 * 2^t` space:
/// Hadamards, controlled `W^(2^j)`, inverse QFT, a phase flip on nonzero
/// ancilla values, and the inverse circuit. Input is `|psi> (x) |0>`;
/// output uses the layout `s * M + a`.
pub fn phase_estimation_circuit(walk: &WalkOperator, bits: u32, state: &QuantumState) -> Result<Vec<C64>> {
    let m = check_budget(walk.dim(), bits, 1)?;
    let d = walk.dim();
    if state.len() != d {
        return Err(Error::Dimension { expected: d, found: state.len() });
    }
    let mut v = vec![ZERO; d * m];
    for (s, x) in state.amplitudes().iter().enumerate() {
        v[s * m] = *x;
    }
    let scale = 1.0 / (m as f64).sqrt();
    let hadamards = |v: &mut [C64]| {
        for chunk in v.chunks_mut(m) {
            fwht(chunk);
            chunk.iter_mut().for_each(|c| *c *= scale);
        }
    };
    let fourier = |v: &mut [C64], sign: f64| {
        let mut tmp = vec![ZERO; m];
        for chunk in v.chunks_mut(m) {
            for (x, out) in tmp.iter_mut().enumerate() {
                *out = (0..m)
                    .map(|a| chunk[a] * C64::from_polar(scale, sign * 2.0 * PI * (a * x) as f64 / m as f64))
                    .sum();
            }
            chunk.copy_from_slice(&tmp);
        }
    };
    let controlled_powers = |v: &mut [C64], inverse: bool| {
        let mut re = vec![0.0; d];
        let mut im = vec![0.0; d];
        for j in 0..bits {
            for a in (0..m).filter(|a| a >> j & 1 == 1) {
                for s in 0..d {
                    re[s] = v[s * m + a].re;
                    im[s] = v[s * m + a].im;
                }
                for _ in 0..1u64 << j {
                    if inverse {
                        walk.apply_inverse_real(&mut re);
                        walk.apply_inverse_real(&mut im);
                    } else {
                        walk.apply_real(&mut re);
                        walk.apply_real(&mut im);
                    }
                }
                for s in 0..d {
                    v[s * m + a] = C64::new(re[s], im[s]);
                }
            }
        }
    };
    hadamards(&mut v);
    controlled_powers(&mut v, false);
    fourier(&mut v, -1.0);
    for chunk in v.chunks_mut(m) {
        chunk[1..].iter_mut().for_each(|c| *c = -*c);
    }
    fourier(&mut v, 1.0);
    controlled_powers(&mut v, true);
    hadamards(&mut v);
    Ok(v)
}
