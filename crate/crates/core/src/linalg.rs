//! Complex SVD through faer; nalgebra's complex SVD with singular vectors
//! can lose accuracy on clustered singular values.

use faer::Mat;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub(crate) struct Svd {
    pub u: DMatrix<Complex64>,
    /// Descending.
    pub s: Vec<f64>,
    pub v_t: DMatrix<Complex64>,
}

fn to_faer(a: &DMatrix<Complex64>) -> Mat<Complex64> {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)])
}

/// Thin SVD `a = u · diag(s) · v_t`; `None` if the iteration fails to converge.
pub(crate) fn svd(a: &DMatrix<Complex64>) -> Option<Svd> {
    let f = to_faer(a).thin_svd().ok()?;
    let (u, v, s) = (f.U(), f.V(), f.S().column_vector());
    let k = s.nrows();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&x, &y| s[y].re.total_cmp(&s[x].re));
    Some(Svd {
        u: DMatrix::from_fn(a.nrows(), k, |i, j| u[(i, order[j])]),
        s: order.iter().map(|&j| s[j].re).collect(),
        v_t: DMatrix::from_fn(k, a.ncols(), |i, j| v[(j, order[i])].conj()),
    })
}

pub(crate) fn singular_values(a: &DMatrix<Complex64>) -> Vec<f64> {
    let Ok(s) = to_faer(a).singular_values() else {
        let mut s: Vec<f64> = a.clone().singular_values().iter().copied().collect();
        s.sort_by(|x, y| y.total_cmp(x));
        return s;
    };
    let mut s: Vec<f64> = s.into_iter().collect();
    s.sort_by(|x, y| y.total_cmp(x));
    s
}

/// Minimum-norm least-squares solution, dropping singular values below
/// `rcond · s_max`.
pub(crate) fn lstsq(a: &DMatrix<Complex64>, b: &DVector<Complex64>, rcond: f64) -> Option<DVector<Complex64>> {
    let f = svd(a)?;
    let cut = f.s.first().copied().unwrap_or(0.0) * rcond;
    let utb = f.u.adjoint() * b;
    let scaled = DVector::from_iterator(
        f.s.len(),
        f.s.iter().zip(utb.iter()).map(|(&s, &c)| if s > cut && s > 0.0 { c / s } else { Complex64::new(0.0, 0.0) }),
    );
    Some(f.v_t.adjoint() * scaled)
}
