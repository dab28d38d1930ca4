//! Small dense kernels over row-major `f64` slices.
//!
//! The sampler factorizes one n-by-n matrix per proposal, so these loops are
//! written around contiguous row dot products that the compiler can vectorize.

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for (x, y) in ra.iter().zip(rb) {
        s += x * y;
    }
    s
}

/// `y += alpha * x`
#[inline]
pub(crate) fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// In-place lower Cholesky of a symmetric row-major `n x n` matrix.
///
/// Only the lower triangle is read; the strict upper triangle is zeroed on
/// success. On failure returns the pivot index where positivity was lost.
pub(crate) fn cholesky_in_place(a: &mut [f64], n: usize) -> Result<(), usize> {
    for i in 0..n {
        let (head, tail) = a.split_at_mut(i * n);
        let row_i = &mut tail[..n];
        for j in 0..i {
            let row_j = &head[j * n..j * n + n];
            let s = row_i[j] - dot(&row_i[..j], &row_j[..j]);
            row_i[j] = s / row_j[j];
        }
        let d = row_i[i] - dot(&row_i[..i], &row_i[..i]);
        if !(d > 0.0) || !d.is_finite() {
            return Err(i);
        }
        row_i[i] = d.sqrt();
        for v in &mut row_i[i + 1..] {
            *v = 0.0;
        }
    }
    Ok(())
}

/// Solve `L x = b` in place for lower-triangular row-major `L`.
pub(crate) fn forward_solve(l: &[f64], n: usize, b: &mut [f64]) {
    for i in 0..n {
        let row = &l[i * n..i * n + i];
        let s = b[i] - dot(row, &b[..i]);
        b[i] = s / l[i * n + i];
    }
}

/// `L x` for lower-triangular row-major `L`.
pub(crate) fn lower_matvec(l: &[f64], n: usize, x: &[f64]) -> Vec<f64> {
    (0..n).map(|i| dot(&l[i * n..i * n + i + 1], &x[..i + 1])).collect()
}

/// Inverse of `L L'` given its lower Cholesky factor.
pub(crate) fn inverse_from_cholesky(l: &[f64], n: usize) -> Vec<f64> {
    // M = L^{-1}; row i is -(sum_{k<i} L[i][k] M[k][..]) / L[i][i]
    let mut m = vec![0.0; n * n];
    for i in 0..n {
        let lii = l[i * n + i];
        let (done, rest) = m.split_at_mut(i * n);
        let row = &mut rest[..n];
        for k in 0..i {
            let lik = l[i * n + k];
            if lik != 0.0 {
                axpy(lik, &done[k * n..k * n + k + 1], &mut row[..k + 1]);
            }
        }
        for v in &mut row[..i] {
            *v = -*v / lii;
        }
        row[i] = 1.0 / lii;
    }
    // P = M' M, so P[a][b] = sum_{k >= max(a,b)} M[k][a] M[k][b]
    let mut p = vec![0.0; n * n];
    for k in 0..n {
        let row = &m[k * n..k * n + k + 1];
        for a in 0..=k {
            let ma = row[a];
            if ma == 0.0 {
                continue;
            }
            let prow = &mut p[a * n..a * n + a + 1];
            axpy(ma, &row[..a + 1], prow);
        }
    }
    for a in 0..n {
        for b in 0..a {
            p[b * n + a] = p[a * n + b];
        }
    }
    p
}

/// Symmetric `x' A x` using the full row-major matrix.
pub(crate) fn quad_form(a: &[f64], n: usize, x: &[f64]) -> f64 {
    (0..n).map(|i| x[i] * dot(&a[i * n..i * n + n], x)).sum()
}

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Returns eigenvalues in descending order with matching eigenvectors stored
/// as columns of the row-major output.
pub(crate) fn symmetric_eigen(a: &[f64], n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut a = a.to_vec();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i * n + j] * a[i * n + j])
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[j * n + j].total_cmp(&a[i * n + i]));
    let values = order.iter().map(|&i| a[i * n + i]).collect();
    let mut vectors = vec![0.0; n * n];
    for (col, &src) in order.iter().enumerate() {
        for k in 0..n {
            vectors[k * n + col] = v[k * n + src];
        }
    }
    (values, vectors)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cholesky_known_factor() {
        let mut a = vec![1., 2., 4., 2., 13., 23., 4., 23., 77.];
        cholesky_in_place(&mut a, 3).unwrap();
        assert_eq!(a, vec![1., 0., 0., 2., 3., 0., 4., 5., 6.]);
    }

    #[test]
    fn cholesky_reports_failing_pivot() {
        let mut a = vec![1., 2., 2., 1.];
        assert_eq!(cholesky_in_place(&mut a, 2), Err(1));
    }

    #[test]
    fn inverse_times_matrix_is_identity() {
        let a = vec![4., 1., 0.5, 1., 3., 0.2, 0.5, 0.2, 2.];
        let mut l = a.clone();
        cholesky_in_place(&mut l, 3).unwrap();
        let p = inverse_from_cholesky(&l, 3);
        for i in 0..3 {
            for j in 0..3 {
                let s: f64 = (0..3).map(|k| a[i * 3 + k] * p[k * 3 + j]).sum();
                assert!((s - if i == j { 1.0 } else { 0.0 }).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn forward_solve_inverts_matvec() {
        let l = vec![2., 0., 0., 1., 3., 0., -1., 0.5, 1.5];
        let x = vec![0.3, -1.2, 2.0];
        let mut b = lower_matvec(&l, 3, &x);
        forward_solve(&l, 3, &mut b);
        for (u, v) in b.iter().zip(&x) {
            assert!((u - v).abs() < 1e-14);
        }
    }

    #[test]
    fn jacobi_eigenpairs() {
        let a = vec![2., 1., 0., 1., 2., 0., 0., 0., 5.];
        let (vals, vecs) = symmetric_eigen(&a, 3);
        let expect = [5.0, 3.0, 1.0];
        for (v, e) in vals.iter().zip(expect) {
            assert!((v - e).abs() < 1e-12);
        }
        // A v = lambda v for the leading pair
        for k in 0..3 {
            let av: f64 = (0..3).map(|j| a[k * 3 + j] * vecs[j * 3]).sum();
            assert!((av - vals[0] * vecs[k * 3]).abs() < 1e-12);
        }
    }
}
