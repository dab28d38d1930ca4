//! Mahalanobis hot-deck matching.
//!
//! Every unit receives its missing outcome block from the nearest unit of the
//! opposite pattern, measured by Mahalanobis distance over the covariates
//! with the pooled covariance of both patterns. Donors are drawn with
//! replacement and ties go to the lowest unit index.

use ndarray::{Array2, ArrayView1, ArrayView2};

use crate::error::{Error, Result};
use crate::linalg;
use crate::model::CombinedDataset;

/// Donor assignment and the values it imputes.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchResult {
    /// Donor of each unit, indexed by unit.
    pub donor_index: Vec<usize>,
    /// Hidden `(unit, variable)` cells in row-major order.
    pub cells: Vec<(usize, usize)>,
    /// Donor value for each entry of `cells`.
    pub imputed: Vec<f64>,
}

/// `sqrt((a - b)' S_inv (a - b))`
pub fn mahalanobis_distance(x_a: ArrayView1<'_, f64>, x_b: ArrayView1<'_, f64>, s_inv: ArrayView2<'_, f64>) -> Result<f64> {
    let q = x_a.len();
    if x_b.len() != q || s_inv.dim() != (q, q) {
        return Err(Error::Shape(format!(
            "vectors of length {} and {} with a {}x{} matrix",
            q,
            x_b.len(),
            s_inv.nrows(),
            s_inv.ncols()
        )));
    }
    Ok(squared(x_a, x_b, s_inv).max(0.0).sqrt())
}

fn squared(x_a: ArrayView1<'_, f64>, x_b: ArrayView1<'_, f64>, s_inv: ArrayView2<'_, f64>) -> f64 {
    let diff: Vec<f64> = x_a.iter().zip(x_b).map(|(a, b)| a - b).collect();
    let s = s_inv.as_standard_layout();
    linalg::quad_form(s.as_slice().expect("standard layout"), diff.len(), &diff)
}

/// Inverse of the pooled covariate covariance. A ridge of
/// `1e-8 * trace / q` is added when the covariance is singular.
pub fn pooled_precision(x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    let (n, q) = x.dim();
    if q == 0 {
        return Ok(Array2::zeros((0, 0)));
    }
    if n < 2 {
        return Err(Error::Empty("covariance needs at least two units".into()));
    }
    let mean = x.mean_axis(ndarray::Axis(0)).expect("n > 0");
    let centered = &x - &mean;
    let cov = centered.t().dot(&centered) / (n as f64 - 1.0);
    let cov = cov.as_standard_layout().into_owned();
    let mut a = cov.as_slice().expect("standard layout").to_vec();
    if linalg::cholesky_in_place(&mut a, q).is_err() {
        let trace: f64 = (0..q).map(|k| cov[[k, k]]).sum();
        let ridge = if trace > 0.0 { 1e-8 * trace / q as f64 } else { 1e-8 };
        a = cov.as_slice().expect("standard layout").to_vec();
        for k in 0..q {
            a[k * q + k] += ridge;
        }
        linalg::cholesky_in_place(&mut a, q)
            .map_err(|k| Error::Numerical(format!("pooled covariance not positive definite at pivot {k}")))?;
    }
    let inv = linalg::inverse_from_cholesky(&a, q);
    Ok(Array2::from_shape_vec((q, q), inv).expect("q x q"))
}

/// Match every unit to its nearest opposite-pattern unit and copy the
/// donor's values into the unit's hidden cells.
pub fn match_impute(data: &CombinedDataset) -> Result<MatchResult> {
    let (ones, zeros) = data.pattern_counts();
    if ones == 0 || zeros == 0 {
        return Err(Error::Config(format!(
            "matching needs both patterns; got {ones} units with m = 1 and {zeros} with m = 0"
        )));
    }
    let x = data.covariates();
    let s_inv = pooled_precision(x.view())?;
    let m = data.m();
    let donor_index = (0..data.n())
        .map(|i| {
            let mut best = (f64::INFINITY, usize::MAX);
            for k in 0..data.n() {
                if m[k] == m[i] {
                    continue;
                }
                let dist = squared(x.row(i), x.row(k), s_inv.view());
                if dist < best.0 {
                    best = (dist, k);
                }
            }
            best.1
        })
        .collect::<Vec<_>>();
    let cells = data.missing_cells();
    let imputed = cells
        .iter()
        .map(|&(i, j)| data.value(donor_index[i], j).expect("donor observes the block"))
        .collect();
    Ok(MatchResult {
        donor_index,
        cells,
        imputed,
    })
}
