use crate::data::TimeSeries;
use crate::error::{Error, Result};
use crate::model::NormalizationTransform;
use crate::numerics::Matrix;

/// Whitened, lag-aligned design for a VAR of order `s`.
///
/// With `N = rows − s`, `ys_star` holds `Y*_s` (rows `s..s+N`) and
/// `yaug_star` holds `[Y*_{s−1} … Y*_0]`, so block `j` (0-based) is lag `j+1`.
#[derive(Debug, Clone)]
pub struct LaggedData {
    pub ys_star: Matrix,
    pub yaug_star: Matrix,
    /// Centered original-coordinate `Y_s`, used for `Σ̂_e` and `Σ̂_ε̄`.
    pub ys: Matrix,
    pub n: usize,
    pub s: usize,
}

impl LaggedData {
    pub fn rank(&self) -> usize {
        self.ys_star.ncols()
    }

    /// Lag block `j` (0-based, lag `j+1`) of the augmented matrix.
    pub fn lag_block(&self, j: usize) -> Matrix {
        let r = self.rank();
        self.yaug_star.columns(j * r, r).into_owned()
    }

    /// `𝕍 = [Y*_{s−1}R* … Y*_0R*]`.
    pub fn latent_regressors(&self, rstar: &Matrix) -> Matrix {
        let ell = rstar.ncols();
        let mut vv = Matrix::zeros(self.n, self.s * ell);
        for j in 0..self.s {
            let block = self.yaug_star.columns(j * self.rank(), self.rank()) * rstar;
            vv.columns_mut(j * ell, ell).copy_from(&block);
        }
        vv
    }
}

/// Centers by the column means, whitens with the EVD of `Y_sᵀY_s/N`, and
/// builds the lagged design on the whitened series.
pub fn normalize(
    y: &TimeSeries,
    s: usize,
    rank_tol: f64,
) -> Result<(NormalizationTransform, LaggedData)> {
    let rows = y.nrows();
    if s == 0 {
        return Err(Error::InvalidArgument("VAR order s must be >= 1".into()));
    }
    if y.ncols() == 0 {
        return Err(Error::InvalidArgument("series has no columns".into()));
    }
    if rows < 2 * s + 2 {
        return Err(Error::InsufficientRows {
            needed: 2 * s + 2,
            got: rows,
        });
    }
    let mean = y.column_means();
    let yc = y.centered(&mean)?;
    let n = rows - s;
    let ys = yc.rows(s, n).into_owned();
    let sigma_y = ys.transpose() * &ys / n as f64;
    let norm = NormalizationTransform::from_covariance(&sigma_y, mean, rank_tol)?;
    let ystar = &yc * norm.whitening();
    let r = norm.rank();
    let mut yaug = Matrix::zeros(n, s * r);
    for j in 0..s {
        yaug.columns_mut(j * r, r)
            .copy_from(&ystar.rows(s - 1 - j, n));
    }
    let data = LaggedData {
        ys_star: ystar.rows(s, n).into_owned(),
        yaug_star: yaug,
        ys,
        n,
        s,
    };
    Ok((norm, data))
}
