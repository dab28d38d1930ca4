//! Gaussian kernel, Gram matrices, jittered Cholesky and the whitened latent
//! function `f = L eta`.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;

/// Relative jitter added to the Gram diagonal before factorization.
pub const BASE_JITTER: f64 = 1e-6;
/// Number of x10 jitter escalations tried after the first attempt fails.
pub const JITTER_RETRIES: usize = 3;

/// Kernel hyperparameters: amplitude `tau1` and squared length-scale `tau2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelHyper {
    pub tau1: f64,
    pub tau2: f64,
}

impl KernelHyper {
    pub fn new(tau1: f64, tau2: f64) -> Result<Self> {
        if !(tau1 > 0.0 && tau1.is_finite() && tau2 > 0.0 && tau2.is_finite()) {
            return Err(Error::Domain(format!(
                "kernel hyperparameters must be positive, got tau1 = {tau1}, tau2 = {tau2}"
            )));
        }
        Ok(Self { tau1, tau2 })
    }
}

impl Default for KernelHyper {
    fn default() -> Self {
        Self { tau1: 1.0, tau2: 1.0 }
    }
}

/// Latent coordinates, one row per unit.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentPositions(Array2<f64>);

impl LatentPositions {
    pub fn new(z: Array2<f64>) -> Result<Self> {
        if z.ncols() == 0 {
            return Err(Error::Shape("latent dimension must be at least 1".into()));
        }
        if z.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("latent positions must be finite".into()));
        }
        Ok(Self(z))
    }

    pub fn n(&self) -> usize {
        self.0.nrows()
    }

    pub fn d(&self) -> usize {
        self.0.ncols()
    }

    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.0.view()
    }

    pub fn into_inner(self) -> Array2<f64> {
        self.0
    }
}

#[inline]
pub(crate) fn sq_dist(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// `tau1 * exp(-|z - z'|^2 / (2 tau2))`
pub fn kernel(z: ArrayView1<'_, f64>, z_other: ArrayView1<'_, f64>, hyper: KernelHyper) -> Result<f64> {
    if z.len() != z_other.len() {
        return Err(Error::Shape(format!(
            "kernel arguments have dimensions {} and {}",
            z.len(),
            z_other.len()
        )));
    }
    Ok(hyper.tau1 * (-sq_dist(z, z_other) / (2.0 * hyper.tau2)).exp())
}

/// Gram matrix of the Gaussian kernel over all rows of `z`.
pub fn gram_matrix(z: &LatentPositions, hyper: KernelHyper) -> Array2<f64> {
    let mut k = unit_gram(z.view(), hyper.tau2);
    k.mapv_inplace(|v| v * hyper.tau1);
    k
}

/// Gram matrix with unit amplitude; `K = tau1 * unit_gram`.
pub(crate) fn unit_gram(z: ArrayView2<'_, f64>, tau2: f64) -> Array2<f64> {
    let n = z.nrows();
    let mut k = Array2::<f64>::zeros((n, n));
    let scale = -1.0 / (2.0 * tau2);
    for i in 0..n {
        k[[i, i]] = 1.0;
        for j in 0..i {
            let v = (scale * sq_dist(z.row(i), z.row(j))).exp();
            k[[i, j]] = v;
            k[[j, i]] = v;
        }
    }
    k
}

/// Lower Cholesky factor of `K + jitter I`.
#[derive(Debug, Clone, PartialEq)]
pub struct CholeskyFactor {
    l: Array2<f64>,
    jitter: f64,
}

impl CholeskyFactor {
    pub fn l(&self) -> ArrayView2<'_, f64> {
        self.l.view()
    }

    /// Absolute jitter that made the factorization succeed.
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn n(&self) -> usize {
        self.l.nrows()
    }

    pub(crate) fn as_slice(&self) -> &[f64] {
        self.l.as_slice().expect("factor is stored in standard layout")
    }

    /// `(K + jitter I)^{-1}`
    pub(crate) fn inverse(&self) -> Vec<f64> {
        linalg::inverse_from_cholesky(self.as_slice(), self.n())
    }

    /// `L^{-1} b`
    pub(crate) fn solve_lower(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        linalg::forward_solve(self.as_slice(), self.n(), &mut x);
        x
    }

    pub fn into_inner(self) -> Array2<f64> {
        self.l
    }
}

fn check_symmetric(k: ArrayView2<'_, f64>) -> Result<()> {
    let n = k.nrows();
    if k.ncols() != n {
        return Err(Error::Shape(format!("matrix is {}x{}, expected square", n, k.ncols())));
    }
    let scale = k.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    for i in 0..n {
        for j in 0..i {
            if (k[[i, j]] - k[[j, i]]).abs() > 1e-12 * scale {
                return Err(Error::Numerical(format!(
                    "matrix is not symmetric at ({i}, {j}): {} vs {}",
                    k[[i, j]],
                    k[[j, i]]
                )));
            }
        }
    }
    Ok(())
}

/// Cholesky factor of `K + jitter I` with `jitter = 1e-6 max(diag K)`,
/// escalating the jitter x10 up to three times before giving up.
pub fn cholesky_jittered(k: ArrayView2<'_, f64>) -> Result<CholeskyFactor> {
    check_symmetric(k)?;
    let n = k.nrows();
    let max_diag = (0..n).map(|i| k[[i, i]]).fold(f64::NEG_INFINITY, f64::max);
    if n > 0 && !(max_diag > 0.0 && max_diag.is_finite()) {
        return Err(Error::Numerical(format!(
            "Gram diagonal must be positive and finite, max is {max_diag}"
        )));
    }
    let base = BASE_JITTER * max_diag.max(0.0);
    let src = k.as_standard_layout();
    let src = src.as_slice().expect("standard layout");
    let mut tried = Vec::with_capacity(JITTER_RETRIES + 1);
    let mut jitter = base;
    for _ in 0..=JITTER_RETRIES {
        let mut buf = src.to_vec();
        for i in 0..n {
            buf[i * n + i] += jitter;
        }
        tried.push(jitter);
        if linalg::cholesky_in_place(&mut buf, n).is_ok() {
            let l = Array2::from_shape_vec((n, n), buf).expect("n x n buffer");
            return Ok(CholeskyFactor { l, jitter });
        }
        jitter *= 10.0;
    }
    Err(Error::Numerical(format!(
        "Cholesky factorization failed with jitters {tried:?}"
    )))
}

/// `f = L eta`
pub fn latent_function(l: ArrayView2<'_, f64>, eta: ArrayView1<'_, f64>) -> Result<Array1<f64>> {
    let n = l.nrows();
    if l.ncols() != n || eta.len() != n {
        return Err(Error::Shape(format!(
            "factor is {}x{} but eta has length {}",
            n,
            l.ncols(),
            eta.len()
        )));
    }
    let l = l.as_standard_layout();
    let eta = eta.to_vec();
    Ok(Array1::from(linalg::lower_matvec(
        l.as_slice().expect("standard layout"),
        n,
        &eta,
    )))
}
