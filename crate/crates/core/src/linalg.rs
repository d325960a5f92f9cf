//! Small dense complex linear-algebra helpers shared by the numerical modules.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;
pub type RMat = DMatrix<f64>;
pub type RVec = DVector<f64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

/// (A + Aᴴ)/2.
pub fn hermitian_part(a: &CMat) -> CMat {
    (a + a.adjoint()).scale(0.5)
}

/// Kronecker product of two column vectors, `a ⊗ b`.
pub fn kron_vec(a: &CVec, b: &CVec) -> CVec {
    let mut out = CVec::zeros(a.len() * b.len());
    for (i, ai) in a.iter().enumerate() {
        for (j, bj) in b.iter().enumerate() {
            out[i * b.len() + j] = ai * bj;
        }
    }
    out
}

/// Diagonal matrix built from a complex vector.
pub fn diag(v: &CVec) -> CMat {
    CMat::from_diagonal(v)
}

/// Real diagonal promoted to a complex matrix.
pub fn diag_real(v: &RVec) -> CMat {
    CMat::from_diagonal(&v.map(|x| C64::new(x, 0.0)))
}

/// Entrywise squared magnitudes.
pub fn abs2(v: &CVec) -> RVec {
    v.map(|x| x.norm_sqr())
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues ascending.
pub fn hermitian_eigen(a: &CMat) -> (RVec, CMat) {
    let eig = SymmetricEigen::new(hermitian_part(a));
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let vals = RVec::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vecs = CMat::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vecs.set_column(dst, &eig.eigenvectors.column(src));
    }
    (vals, vecs)
}

/// Largest eigenvalue of a Hermitian matrix.
pub fn hermitian_max_eig(a: &CMat) -> f64 {
    SymmetricEigen::new(hermitian_part(a))
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Smallest eigenvalue of a Hermitian matrix.
pub fn hermitian_min_eig(a: &CMat) -> f64 {
    SymmetricEigen::new(hermitian_part(a))
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// Largest eigenvalue of a real symmetric matrix.
pub fn symmetric_max_eig(a: &RMat) -> f64 {
    let sym = (a + a.transpose()) * 0.5;
    SymmetricEigen::new(sym)
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max)
}

/// `xᴴ A x`, real part.
pub fn quad_form(a: &CMat, x: &CVec) -> f64 {
    x.dotc(&(a * x)).re
}

/// Real lift of a complex vector, real parts stacked above imaginary parts.
pub fn lift(x: &CVec) -> RVec {
    let n = x.len();
    RVec::from_fn(2 * n, |i, _| if i < n { x[i].re } else { x[i - n].im })
}

/// Inverse of [`lift`].
pub fn unlift(x: &RVec) -> CVec {
    let n = x.len() / 2;
    CVec::from_fn(n, |i, _| C64::new(x[i], x[i + n]))
}

/// Complex matrix as nested `[re, im]` rows for JSON dumps.
pub fn cmat_json(m: &CMat) -> serde_json::Value {
    let rows: Vec<Vec<[f64; 2]>> = (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
        .collect();
    serde_json::json!(rows)
}

/// Complex vector as a list of `[re, im]` pairs.
pub fn cvec_json(v: &CVec) -> serde_json::Value {
    let items: Vec<[f64; 2]> = v.iter().map(|c| [c.re, c.im]).collect();
    serde_json::json!(items)
}

/// Parses the output of [`cvec_json`].
pub fn cvec_from_json(value: &serde_json::Value) -> Option<CVec> {
    let items = value.as_array()?;
    let mut out = Vec::with_capacity(items.len());
    for item in items {
        let pair = item.as_array()?;
        out.push(C64::new(pair.first()?.as_f64()?, pair.get(1)?.as_f64()?));
    }
    Some(CVec::from_vec(out))
}

/// Parses the output of [`cmat_json`].
pub fn cmat_from_json(value: &serde_json::Value) -> Option<CMat> {
    let rows = value.as_array()?;
    let parsed: Option<Vec<CVec>> = rows.iter().map(cvec_from_json).collect();
    let parsed = parsed?;
    let ncols = parsed.first().map_or(0, |r| r.len());
    if parsed.iter().any(|r| r.len() != ncols) {
        return None;
    }
    Some(CMat::from_fn(parsed.len(), ncols, |i, j| parsed[i][j]))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kron_matches_index_rule() {
        let a = CVec::from_vec(vec![C64::new(1.0, 1.0), C64::new(2.0, 0.0)]);
        let b = CVec::from_vec(vec![C64::new(0.0, 1.0), C64::new(3.0, 0.0), ONE]);
        let k = kron_vec(&a, &b);
        assert_eq!(k.len(), 6);
        assert_eq!(k[4], a[1] * b[1]);
    }

    #[test]
    fn eigen_sorted_and_reconstructs() {
        let a = CMat::from_row_slice(
            2,
            2,
            &[C64::new(2.0, 0.0), C64::new(0.0, 1.0), C64::new(0.0, -1.0), C64::new(2.0, 0.0)],
        );
        let (vals, vecs) = hermitian_eigen(&a);
        assert!((vals[0] - 1.0).abs() < 1e-12 && (vals[1] - 3.0).abs() < 1e-12);
        let rebuilt = &vecs * diag_real(&vals) * vecs.adjoint();
        assert!((rebuilt - a).norm() < 1e-12);
    }

    #[test]
    fn lift_round_trip() {
        let x = CVec::from_vec(vec![C64::new(1.0, -2.0), C64::new(0.5, 3.0)]);
        assert_eq!(unlift(&lift(&x)), x);
        assert_eq!(cvec_from_json(&cvec_json(&x)).unwrap(), x);
    }
}
