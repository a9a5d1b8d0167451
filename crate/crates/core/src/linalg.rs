//! Small dense linear-algebra helpers on top of `nalgebra`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::{Error, Result};

pub type C64 = Complex64;

/// Eigenvalues of a (numerically) symmetric matrix, largest first.
pub fn symmetric_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let sym = (m + m.transpose()) * 0.5;
    let mut values: Vec<f64> = sym.symmetric_eigenvalues().iter().copied().collect();
    values.sort_by(|a, b| b.total_cmp(a));
    values
}

/// Largest absolute entry of `a - b`.
pub fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Induced infinity norm (largest absolute row sum).
pub fn inf_norm(m: &DMatrix<f64>) -> f64 {
    m.row_iter()
        .map(|row| row.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn complex_inf_norm(m: &DMatrix<C64>) -> f64 {
    m.row_iter()
        .map(|row| row.iter().map(|x| x.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Orthonormal basis of the span of `vectors`, as matrix columns.
///
/// Modified Gram-Schmidt with one reorthogonalization pass; a candidate is
/// dropped when its residual norm falls below `threshold`.
pub fn orthonormal_basis(vectors: &[Vec<f64>], threshold: f64) -> DMatrix<f64> {
    let dim = vectors.first().map_or(0, Vec::len);
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for v in vectors {
        let mut w = v.clone();
        for _ in 0..2 {
            for b in &basis {
                let c = dot(b, &w);
                for (wi, bi) in w.iter_mut().zip(b) {
                    *wi -= c * bi;
                }
            }
        }
        let norm = dot(&w, &w).sqrt();
        if norm > threshold {
            w.iter_mut().for_each(|x| *x /= norm);
            basis.push(w);
        }
    }
    DMatrix::from_fn(dim, basis.len(), |i, j| basis[j][i])
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn cdot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Eigendecomposition of a real normal matrix (here: orthogonal).
#[derive(Clone, Debug)]
pub struct NormalEigen {
    pub values: Vec<C64>,
    /// Unitary matrix whose columns are the eigenvectors.
    pub vectors: DMatrix<C64>,
}

/// Diagonalizes a real normal matrix through its complex Schur form.
///
/// For normal input the triangular factor is diagonal; an off-diagonal
/// entry above `1e-8` means the input was not normal to working precision.
pub fn normal_eigen(m: &DMatrix<f64>) -> Result<NormalEigen> {
    let n = m.nrows();
    if n == 0 {
        return Ok(NormalEigen { values: vec![], vectors: DMatrix::zeros(0, 0) });
    }
    let cm: DMatrix<C64> = m.map(|x| C64::new(x, 0.0));
    let schur = nalgebra::linalg::Schur::try_new(cm, 1e-15, 100_000)
        .ok_or_else(|| Error::Spectral("complex Schur iteration did not converge".into()))?;
    let (q, t) = schur.unpack();
    let mut off = 0.0f64;
    for j in 0..n {
        for i in 0..j {
            off = off.max(t[(i, j)].norm());
        }
    }
    if off > 1e-8 {
        return Err(Error::Spectral(format!(
            "matrix is not normal: Schur off-diagonal {off:e}"
        )));
    }
    let values = (0..n).map(|i| t[(i, i)]).collect();
    Ok(NormalEigen { values, vectors: q })
}

/// Solves `a x = b` by LU with partial pivoting.
pub fn solve(a: DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    a.lu()
        .solve(b)
        .ok_or_else(|| Error::Spectral("singular linear system".into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gram_schmidt_drops_dependent_vectors() {
        let vs = vec![vec![1.0, 0.0, 0.0], vec![1.0, 1.0, 0.0], vec![2.0, 1.0, 0.0]];
        let q = orthonormal_basis(&vs, 1e-10);
        assert_eq!(q.ncols(), 2);
        let gram = q.transpose() * &q;
        assert!(max_abs_diff(&gram, &DMatrix::identity(2, 2)) < 1e-14);
    }

    #[test]
    fn rotation_eigenphases() {
        let th = 0.7f64;
        let m = DMatrix::from_row_slice(2, 2, &[th.cos(), -th.sin(), th.sin(), th.cos()]);
        let e = normal_eigen(&m).unwrap();
        let mut phases: Vec<f64> = e.values.iter().map(|z| z.arg()).collect();
        phases.sort_by(f64::total_cmp);
        assert!((phases[0] + th).abs() < 1e-12);
        assert!((phases[1] - th).abs() < 1e-12);
        let mc = m.map(|x| C64::new(x, 0.0));
        for k in 0..2 {
            let v = e.vectors.column(k).into_owned();
            let r = &mc * &v - v * e.values[k];
            assert!(r.norm() < 1e-12);
        }
    }
}
