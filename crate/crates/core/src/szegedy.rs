//! Szegedy quantization of a Markov chain.
//!
//! States live on two `N`-level registers, indexed `|i>|j> -> i * N + j`.
//! The diffusion `U_P` sends `|i>|0>` to `|i> sum_j sqrt(P_ji) |j>`; it is
//! block diagonal with one real Householder reflection per block. The walk
//! `W(P) = ref(B) ref(A)` is applied matrix-free in `O(N^2)`; dense matrices
//! are only materialized on request for small `N`.
//!
//! `W(P)` acts nontrivially only on the busy subspace `A + B`, of dimension
//! `2N - 1` for an ergodic chain. Its spectrum there is computed once, from
//! the `(2N - 1)`-dimensional restriction, and reused by the reflection
//! oracles in [`crate::mixing`].

use nalgebra::DMatrix;

use crate::linalg::{self, NormalEigen, C64};
use crate::markov::{Distribution, MarkovChain};
use crate::{Error, Result};

/// Tolerance on state norms and operator unitarity.
pub const UNITARY_TOL: f64 = 1e-10;
/// Residual norm below which a vector is treated as dependent on the busy
/// basis built so far.
pub const BUSY_THRESHOLD: f64 = 1e-10;
/// Eigenphases smaller than this in magnitude are treated as zero.
pub const ZERO_PHASE_TOL: f64 = 1e-9;
/// Largest dimension for which dense `N^2 x N^2` operators are built.
pub const DENSE_DIM_LIMIT: usize = 1024;

/// Normalized complex amplitude vector.
#[derive(Clone, Debug, PartialEq)]
pub struct QuantumState {
    amps: Vec<C64>,
}

impl QuantumState {
    pub fn new(amps: Vec<C64>) -> Result<Self> {
        let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if amps.is_empty() || (norm - 1.0).abs() > UNITARY_TOL {
            return Err(Error::Precondition(format!("state norm {norm} is not 1")));
        }
        Ok(Self { amps })
    }

    /// Rescales `amps` to unit norm.
    pub fn normalized(mut amps: Vec<C64>) -> Result<Self> {
        let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if !(norm > 0.0) {
            return Err(Error::Precondition("cannot normalize the zero vector".into()));
        }
        amps.iter_mut().for_each(|a| *a /= norm);
        Ok(Self { amps })
    }

    pub fn from_real(amps: &[f64]) -> Result<Self> {
        Self::new(amps.iter().map(|&x| C64::new(x, 0.0)).collect())
    }

    pub fn basis(dim: usize, index: usize) -> Self {
        let mut amps = vec![C64::new(0.0, 0.0); dim];
        amps[index] = C64::new(1.0, 0.0);
        Self { amps }
    }

    pub fn len(&self) -> usize {
        self.amps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amps.is_empty()
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn into_amplitudes(self) -> Vec<C64> {
        self.amps
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &QuantumState) -> C64 {
        linalg::cdot(&self.amps, &other.amps)
    }

    /// `|<self|other>|^2`.
    pub fn fidelity(&self, other: &QuantumState) -> f64 {
        self.inner(other).norm_sqr()
    }

    /// `self (x) other`, with `self` as the more significant register.
    pub fn tensor(&self, other: &QuantumState) -> QuantumState {
        let amps = self
            .amps
            .iter()
            .flat_map(|a| other.amps.iter().map(move |b| a * b))
            .collect();
        QuantumState { amps }
    }

    /// Born probabilities of the computational basis.
    pub fn probabilities(&self) -> Vec<f64> {
        self.amps.iter().map(|a| a.norm_sqr()).collect()
    }
}

/// `|pi> = sum_i sqrt(pi_i) |i>`.
pub fn coherent_encoding(pi: &Distribution) -> QuantumState {
    QuantumState {
        amps: pi.as_slice().iter().map(|p| C64::new(p.sqrt(), 0.0)).collect(),
    }
}

/// `|0>^(n-k) |+>^k` on `n` qubits, most significant qubit first.
pub fn hadamard_ladder_state(bits: u32, k: u32) -> Result<QuantumState> {
    if k > bits {
        return Err(Error::Argument(format!("k = {k} exceeds {bits} qubits")));
    }
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let zero = QuantumState::basis(2, 0);
    let plus = QuantumState::from_real(&[h, h])?;
    let mut state = QuantumState::basis(1, 0);
    for q in 0..bits {
        state = state.tensor(if q < bits - k { &zero } else { &plus });
    }
    Ok(state)
}

/// Exact Born distribution of register I for a state on `N^2` amplitudes.
pub fn measure_register_i(state: &QuantumState, n: usize) -> Result<Distribution> {
    if state.len() != n * n {
        return Err(Error::Dimension { expected: n * n, found: state.len() });
    }
    let probs = state
        .amplitudes()
        .chunks(n)
        .map(|block| block.iter().map(|a| a.norm_sqr()).sum())
        .collect();
    Distribution::from_weights(probs)
}

/// Dense unitary with a descriptive label.
#[derive(Clone, Debug)]
pub struct UnitaryOperator {
    matrix: DMatrix<C64>,
    label: String,
}

impl UnitaryOperator {
    pub fn new(matrix: DMatrix<C64>, label: impl Into<String>) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::Dimension { expected: matrix.nrows(), found: matrix.ncols() });
        }
        let op = Self { matrix, label: label.into() };
        let residual = op.unitarity_residual();
        if residual > UNITARY_TOL {
            return Err(Error::Precondition(format!(
                "{} is not unitary (residual {residual:e})",
                op.label
            )));
        }
        Ok(op)
    }

    pub fn from_real(matrix: &DMatrix<f64>, label: impl Into<String>) -> Result<Self> {
        Self::new(matrix.map(|x| C64::new(x, 0.0)), label)
    }

    pub fn identity(dim: usize) -> Self {
        Self { matrix: DMatrix::identity(dim, dim), label: "I".into() }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn apply(&self, state: &QuantumState) -> Result<QuantumState> {
        if state.len() != self.dim() {
            return Err(Error::Dimension { expected: self.dim(), found: state.len() });
        }
        let v = nalgebra::DVector::from_column_slice(state.amplitudes());
        Ok(QuantumState { amps: (&self.matrix * v).as_slice().to_vec() })
    }

    /// `self * other`.
    pub fn compose(&self, other: &UnitaryOperator) -> Result<UnitaryOperator> {
        if self.dim() != other.dim() {
            return Err(Error::Dimension { expected: self.dim(), found: other.dim() });
        }
        Ok(Self {
            matrix: &self.matrix * &other.matrix,
            label: format!("{} {}", self.label, other.label),
        })
    }

    pub fn adjoint(&self) -> UnitaryOperator {
        Self { matrix: self.matrix.adjoint(), label: format!("{}^dag", self.label) }
    }

    /// `||U U^dag - I||_inf`.
    pub fn unitarity_residual(&self) -> f64 {
        let n = self.dim();
        linalg::complex_inf_norm(&(&self.matrix * self.matrix.adjoint() - DMatrix::identity(n, n)))
    }

    /// `||U - U^dag||_inf`.
    pub fn hermiticity_residual(&self) -> f64 {
        linalg::complex_inf_norm(&(&self.matrix - self.matrix.adjoint()))
    }

    /// `||U - V||_inf`.
    pub fn distance(&self, other: &UnitaryOperator) -> f64 {
        linalg::complex_inf_norm(&(&self.matrix - &other.matrix))
    }
}

fn check_dense(n: usize) -> Result<()> {
    if n * n > DENSE_DIM_LIMIT {
        return Err(Error::Resource { dimension: n * n, limit: DENSE_DIM_LIMIT });
    }
    Ok(())
}

/// `SWAP |i>|j> = |j>|i>` on two `N`-level registers.
pub fn swap_operator(n: usize) -> Result<UnitaryOperator> {
    check_dense(n)?;
    let mut m = DMatrix::<f64>::zeros(n * n, n * n);
    for i in 0..n {
        for j in 0..n {
            m[(j * n + i, i * n + j)] = 1.0;
        }
    }
    UnitaryOperator::from_real(&m, "SWAP")
}

/// `1 (x) Z` with `Z = 2|0><0| - 1` on register II.
pub fn register_two_z(n: usize) -> Result<UnitaryOperator> {
    check_dense(n)?;
    let mut m = -DMatrix::<f64>::identity(n * n, n * n);
    for i in 0..n {
        m[(i * n, i * n)] = 1.0;
    }
    UnitaryOperator::from_real(&m, "1xZ")
}

/// `Z (x) 1` with `Z = 2|0><0| - 1` on register I.
pub fn register_one_z(n: usize) -> Result<UnitaryOperator> {
    check_dense(n)?;
    let mut m = -DMatrix::<f64>::identity(n * n, n * n);
    for j in 0..n {
        m[(j, j)] = 1.0;
    }
    UnitaryOperator::from_real(&m, "Zx1")
}

/// `(sqrt(P_ji))_j`, the image of `|0>` under block `i` of `U_P`.
fn sqrt_column(p: &DMatrix<f64>, i: usize) -> Vec<f64> {
    p.column(i).iter().map(|x| x.max(0.0).sqrt()).collect()
}

/// Householder reflection mapping `e_0` to the unit vector `col`.
fn householder_to(col: &[f64]) -> DMatrix<f64> {
    let n = col.len();
    let mut u: Vec<f64> = col.iter().map(|x| -x).collect();
    u[0] += 1.0;
    let uu = linalg::dot(&u, &u);
    let mut h = DMatrix::identity(n, n);
    if uu > 1e-30 {
        for a in 0..n {
            for b in 0..n {
                h[(a, b)] -= 2.0 * u[a] * u[b] / uu;
            }
        }
    }
    h
}

fn diffusion_real(chain: &MarkovChain) -> DMatrix<f64> {
    let n = chain.n();
    let mut m = DMatrix::zeros(n * n, n * n);
    for i in 0..n {
        let h = householder_to(&sqrt_column(chain.transition(), i));
        m.view_mut((i * n, i * n), (n, n)).copy_from(&h);
    }
    m
}

/// `U_P = (+)_i H_i` with `H_i |0> = sum_j sqrt(P_ji) |j>`.
pub fn diffusion_u(chain: &MarkovChain) -> Result<UnitaryOperator> {
    check_dense(chain.n())?;
    UnitaryOperator::from_real(&diffusion_real(chain), "U_P")
}

/// `ref(A) = U_P (1 (x) Z) U_P^dag` and `ref(B) = V_P (Z (x) 1) V_P^dag` with
/// `V_P = SWAP U_P SWAP`, so that `B = span{V_P |0>|j>}`.
pub fn reflectors(chain: &MarkovChain) -> Result<(UnitaryOperator, UnitaryOperator)> {
    let n = chain.n();
    let u = diffusion_u(chain)?;
    let swap = swap_operator(n)?;
    let ref_a = u.compose(&register_two_z(n)?)?.compose(&u.adjoint())?;
    let v = swap.compose(&u)?.compose(&swap)?;
    let ref_b = v.compose(&register_one_z(n)?)?.compose(&v.adjoint())?;
    Ok((
        UnitaryOperator { matrix: ref_a.matrix, label: "ref(A)".into() },
        UnitaryOperator { matrix: ref_b.matrix, label: "ref(B)".into() },
    ))
}

/// The walk `W(P)` together with its busy-subspace spectrum.
#[derive(Clone, Debug)]
pub struct WalkOperator {
    n: usize,
    sqrt_cols: Vec<Vec<f64>>,
    stationary: Distribution,
    classical_gap: f64,
    reversible: bool,
    pi_prime: Vec<f64>,
    /// Orthonormal basis of `A + B`, one column per vector.
    busy: DMatrix<f64>,
    /// `W` restricted to `A + B`, in the `busy` basis.
    busy_walk: DMatrix<f64>,
    eigen: NormalEigen,
    phases: Vec<f64>,
    stationary_index: Option<usize>,
    zero_phase_count: usize,
}

impl WalkOperator {
    /// Builds the walk of a reversible chain.
    pub fn new(chain: &MarkovChain) -> Result<Self> {
        if !chain.is_reversible() {
            return Err(Error::Mode(
                "the spectral correspondence needs a reversible chain".into(),
            ));
        }
        Self::new_unchecked(chain)
    }

    /// Builds the walk without the reversibility check; spectral data of a
    /// non-reversible chain carries no guarantees.
    pub fn new_unchecked(chain: &MarkovChain) -> Result<Self> {
        let n = chain.n();
        let sqrt_cols: Vec<Vec<f64>> = (0..n).map(|i| sqrt_column(chain.transition(), i)).collect();
        let stationary = chain.stationary().clone();
        let mut pi_prime = vec![0.0; n * n];
        for i in 0..n {
            let s = stationary[i].sqrt();
            for j in 0..n {
                pi_prime[i * n + j] = s * sqrt_cols[i][j];
            }
        }

        let mut spanning = Vec::with_capacity(2 * n);
        for (i, col) in sqrt_cols.iter().enumerate() {
            let mut a = vec![0.0; n * n];
            a[i * n..(i + 1) * n].copy_from_slice(col);
            spanning.push(a);
        }
        // The single dependency sum_i sqrt(pi_i) a_i = sum_j sqrt(pi_j) b_j is
        // resolved on the last vector; ending with the heaviest b keeps the
        // rounding residual small when pi has tiny entries.
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&x, &y| stationary[x].total_cmp(&stationary[y]));
        for i in order {
            let mut b = vec![0.0; n * n];
            for j in 0..n {
                b[j * n + i] = sqrt_cols[i][j];
            }
            spanning.push(b);
        }
        let busy = linalg::orthonormal_basis(&spanning, BUSY_THRESHOLD);

        let mut walk = Self {
            n,
            sqrt_cols,
            stationary,
            classical_gap: chain.gap(),
            reversible: chain.is_reversible(),
            pi_prime,
            busy,
            busy_walk: DMatrix::zeros(0, 0),
            eigen: NormalEigen { values: vec![], vectors: DMatrix::zeros(0, 0) },
            phases: vec![],
            stationary_index: None,
            zero_phase_count: 0,
        };
        walk.restrict_and_diagonalize()?;
        Ok(walk)
    }

    fn restrict_and_diagonalize(&mut self) -> Result<()> {
        let r = self.busy.ncols();
        let mut images = DMatrix::<f64>::zeros(self.n * self.n, r);
        for c in 0..r {
            let mut v: Vec<f64> = self.busy.column(c).iter().copied().collect();
            self.apply_real(&mut v);
            images.set_column(c, &nalgebra::DVector::from_vec(v));
        }
        self.busy_walk = self.busy.transpose() * images;
        let mut eigen = linalg::normal_eigen(&self.busy_walk)?;
        let phases: Vec<f64> = eigen.values.iter().map(|z| principal_arg(*z)).collect();
        let zero: Vec<usize> =
            (0..r).filter(|&k| phases[k].abs() < ZERO_PHASE_TOL).collect();

        let pi_busy = self.busy.transpose() * nalgebra::DVector::from_column_slice(&self.pi_prime);
        let pi_busy: Vec<C64> = pi_busy.iter().map(|&x| C64::new(x, 0.0)).collect();
        let overlap = |k: usize| {
            let col: Vec<C64> = eigen.vectors.column(k).iter().copied().collect();
            linalg::cdot(&col, &pi_busy)
        };
        let stationary_index =
            zero.iter().copied().max_by(|&a, &b| overlap(a).norm().total_cmp(&overlap(b).norm()));
        if let Some(k) = stationary_index {
            // Fix the eigenvector's global phase so that <e_k|pi'> > 0.
            let o = overlap(k);
            if o.norm() > 0.0 {
                let phase = o / o.norm();
                for x in eigen.vectors.column_mut(k).iter_mut() {
                    *x *= phase;
                }
            }
        }
        self.zero_phase_count = zero.len();
        self.stationary_index = stationary_index;
        self.phases = phases;
        self.eigen = eigen;
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// `N^2`.
    pub fn dim(&self) -> usize {
        self.n * self.n
    }

    pub fn busy_dim(&self) -> usize {
        self.busy.ncols()
    }

    pub fn stationary(&self) -> &Distribution {
        &self.stationary
    }

    pub fn is_reversible(&self) -> bool {
        self.reversible
    }

    /// Classical spectral gap `delta` of the underlying chain.
    pub fn classical_gap(&self) -> f64 {
        self.classical_gap
    }

    /// `|pi'> = U_P |pi>|0>`.
    pub fn pi_prime(&self) -> QuantumState {
        QuantumState { amps: self.pi_prime.iter().map(|&x| C64::new(x, 0.0)).collect() }
    }

    /// `U_P |sigma>|0> = sum_i sqrt(sigma_i) |i> (x) sum_j sqrt(P_ji) |j>`.
    pub fn lift(&self, sigma: &Distribution) -> Result<QuantumState> {
        if sigma.len() != self.n {
            return Err(Error::Dimension { expected: self.n, found: sigma.len() });
        }
        let n = self.n;
        let mut amps = vec![C64::new(0.0, 0.0); n * n];
        for i in 0..n {
            let s = sigma[i].sqrt();
            for j in 0..n {
                amps[i * n + j] = C64::new(s * self.sqrt_cols[i][j], 0.0);
            }
        }
        Ok(QuantumState { amps })
    }

    fn ref_a_real(&self, v: &mut [f64]) {
        let n = self.n;
        for (i, col) in self.sqrt_cols.iter().enumerate() {
            let block = &mut v[i * n..(i + 1) * n];
            let s = 2.0 * linalg::dot(col, block);
            for (x, p) in block.iter_mut().zip(col) {
                *x = s * p - *x;
            }
        }
    }

    fn ref_b_real(&self, v: &mut [f64]) {
        let n = self.n;
        for (i, col) in self.sqrt_cols.iter().enumerate() {
            let s: f64 = 2.0 * (0..n).map(|j| col[j] * v[j * n + i]).sum::<f64>();
            for j in 0..n {
                v[j * n + i] = s * col[j] - v[j * n + i];
            }
        }
    }

    /// `v <- W(P) v` for a real vector.
    pub fn apply_real(&self, v: &mut [f64]) {
        self.ref_a_real(v);
        self.ref_b_real(v);
    }

    /// `v <- W(P)^dag v = ref(A) ref(B) v` for a real vector.
    pub fn apply_inverse_real(&self, v: &mut [f64]) {
        self.ref_b_real(v);
        self.ref_a_real(v);
    }

    /// `W(P) |psi>`.
    pub fn apply(&self, state: &QuantumState) -> Result<QuantumState> {
        if state.len() != self.dim() {
            return Err(Error::Dimension { expected: self.dim(), found: state.len() });
        }
        let mut re: Vec<f64> = state.amps.iter().map(|a| a.re).collect();
        let mut im: Vec<f64> = state.amps.iter().map(|a| a.im).collect();
        self.apply_real(&mut re);
        self.apply_real(&mut im);
        Ok(QuantumState { amps: re.into_iter().zip(im).map(|(r, i)| C64::new(r, i)).collect() })
    }

    /// Dense `W(P)` built column by column.
    pub fn dense(&self) -> Result<UnitaryOperator> {
        check_dense(self.n)?;
        let d = self.dim();
        let mut m = DMatrix::<f64>::zeros(d, d);
        for c in 0..d {
            let mut v = vec![0.0; d];
            v[c] = 1.0;
            self.apply_real(&mut v);
            m.set_column(c, &nalgebra::DVector::from_vec(v));
        }
        UnitaryOperator::from_real(&m, "W(P)")
    }

    pub fn busy_basis(&self) -> &DMatrix<f64> {
        &self.busy
    }

    /// `W` in the busy basis.
    pub fn busy_walk(&self) -> &DMatrix<f64> {
        &self.busy_walk
    }

    /// Dense orthogonal projector onto `A + B`.
    pub fn busy_projector(&self) -> Result<DMatrix<f64>> {
        check_dense(self.n)?;
        Ok(&self.busy * self.busy.transpose())
    }

    /// Principal eigenphases in `(-pi, pi]` on the busy subspace.
    pub fn eigenphases(&self) -> &[f64] {
        &self.phases
    }

    pub fn eigenvalues(&self) -> &[C64] {
        &self.eigen.values
    }

    /// Busy-basis eigenvectors, one column per eigenphase.
    pub fn eigenvectors(&self) -> &DMatrix<C64> {
        &self.eigen.vectors
    }

    /// Dimension of the `+1` eigenspace inside `A + B`.
    pub fn zero_phase_count(&self) -> usize {
        self.zero_phase_count
    }

    /// Index of the `+1` eigenvector closest to `|pi'>`.
    pub fn stationary_index(&self) -> Result<usize> {
        match (self.zero_phase_count, self.stationary_index) {
            (1, Some(k)) => Ok(k),
            (m, _) => Err(Error::Spectral(format!(
                "+1 eigenspace on the busy subspace has dimension {m}, expected 1"
            ))),
        }
    }

    /// Smallest nonzero `|theta|`.
    pub fn min_abs_phase(&self) -> Result<f64> {
        self.phases
            .iter()
            .map(|t| t.abs())
            .filter(|t| *t >= ZERO_PHASE_TOL)
            .min_by(f64::total_cmp)
            .ok_or_else(|| Error::DegenerateSpectrum("all eigenphases are zero".into()))
    }

    /// `Delta = 2 min |theta|` over nonzero eigenphases.
    pub fn phase_gap(&self) -> Result<f64> {
        Ok(2.0 * self.min_abs_phase()?)
    }

    /// Busy-basis coordinates `Q^T |psi>`.
    pub fn busy_coordinates(&self, state: &QuantumState) -> Result<Vec<C64>> {
        if state.len() != self.dim() {
            return Err(Error::Dimension { expected: self.dim(), found: state.len() });
        }
        Ok((0..self.busy_dim())
            .map(|c| {
                self.busy.column(c).iter().zip(&state.amps).map(|(q, a)| a * *q).sum()
            })
            .collect())
    }

    /// Coordinates in the eigenbasis of `W` on `A + B`.
    pub fn eigen_coordinates(&self, state: &QuantumState) -> Result<Vec<C64>> {
        let busy = nalgebra::DVector::from_vec(self.busy_coordinates(state)?);
        Ok((self.eigen.vectors.adjoint() * busy).as_slice().to_vec())
    }

    /// Inverse of [`Self::eigen_coordinates`] for states inside `A + B`.
    pub fn from_eigen_coordinates(&self, coords: &[C64]) -> Vec<C64> {
        let busy = &self.eigen.vectors * nalgebra::DVector::from_column_slice(coords);
        (0..self.dim())
            .map(|row| {
                self.busy.row(row).iter().zip(busy.iter()).map(|(q, b)| b * *q).sum()
            })
            .collect()
    }

    /// Norm of the component of `|psi>` outside `A + B`.
    pub fn busy_leakage(&self, state: &QuantumState) -> Result<f64> {
        let coords = self.busy_coordinates(state)?;
        Ok((0..self.dim())
            .map(|row| {
                let inside: C64 = self.busy.row(row).iter().zip(&coords).map(|(q, c)| c * *q).sum();
                (state.amps[row] - inside).norm_sqr()
            })
            .sum::<f64>()
            .sqrt())
    }
}

/// Argument in `(-pi, pi]`.
fn principal_arg(z: C64) -> f64 {
    let a = z.arg();
    if a <= -std::f64::consts::PI {
        a + 2.0 * std::f64::consts::PI
    } else {
        a
    }
}
