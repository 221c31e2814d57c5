use super::normalize::LaggedData;
use crate::data::TimeSeries;
use crate::error::{Error, Result};
use crate::metrics::correlation;
use crate::model::PredVarModel;
use crate::numerics::{self, kron, max_abs, Matrix};

/// Large-sample covariances of the coefficient and loading estimates.
#[derive(Debug, Clone)]
pub struct ParamCovariances {
    /// `(𝕍ᵀ𝕍)⁻¹ ⊗ Σ̂_ε`, indexed by `vec(𝔹ᵀ)`: row `a·ℓ + b` is `𝔹[a, b]`.
    pub cov_b: Matrix,
    /// `(𝔹ᵀ𝕍ᵀ𝕍𝔹)⁻¹ ⊗ Σ̂_e`.
    pub cov_p: Matrix,
}

/// Covariances from explicit pieces: `vv` is `𝕍`, `bb` is `𝔹̂`.
pub fn param_covariances_from(
    vv: &Matrix,
    bb: &Matrix,
    sigma_eps: &Matrix,
    sigma_e: &Matrix,
) -> Result<ParamCovariances> {
    let gram = vv.transpose() * vv;
    let gram_inv = sym_inverse(&gram, "V'V")?;
    let info = bb.transpose() * &gram * bb;
    let info_inv = sym_inverse(&info, "B'V'VB")?;
    Ok(ParamCovariances {
        cov_b: symmetrize(kron(&gram_inv, sigma_eps)),
        cov_p: symmetrize(kron(&info_inv, sigma_e)),
    })
}

pub fn param_covariances(m: &PredVarModel, d: &LaggedData) -> Result<ParamCovariances> {
    if m.r != d.rank() || m.s != d.s {
        return Err(Error::DimensionMismatch(format!(
            "model (r={}, s={}) does not match lagged data (r={}, s={})",
            m.r,
            m.s,
            d.rank(),
            d.s
        )));
    }
    let rstar = m.norm.coloring().transpose() * &m.weights;
    let vv = d.latent_regressors(&rstar);
    let ell = m.ell;
    let mut bb = Matrix::zeros(m.s * ell, ell);
    for (j, b) in m.coefs.iter().enumerate() {
        bb.rows_mut(j * ell, ell).copy_from(&b.transpose());
    }
    param_covariances_from(&vv, &bb, &m.sigma_eps, &m.sigma_e)
}

fn sym_inverse(a: &Matrix, what: &str) -> Result<Matrix> {
    let evd = numerics::sym_evd(a)?;
    let n = evd.eigenvalues.len();
    if n == 0 {
        return Ok(Matrix::zeros(0, 0));
    }
    let (hi, lo) = (evd.eigenvalues[0], evd.eigenvalues[n - 1]);
    if !(hi > 0.0 && lo > 1e-12 * hi) {
        return Err(Error::SingularInformation(format!(
            "{what} has eigenvalue range [{lo:.3e}, {hi:.3e}]"
        )));
    }
    let q = &evd.eigenvectors;
    let scaled = Matrix::from_fn(n, n, |i, j| q[(i, j)] / evd.eigenvalues[j]);
    Ok(symmetrize(scaled * q.transpose()))
}

fn symmetrize(m: Matrix) -> Matrix {
    (&m + m.transpose()) * 0.5
}

/// Residuals of the optimality conditions of a fitted model.
///
/// Cross-covariance residuals are reported on a correlation scale, so every
/// entry lies in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimalityReport {
    /// `‖Σ̂_eR − P RᵀΣ̂_eR‖_max / ‖Σ̂_eR‖_max`.
    pub innovation_projection: f64,
    /// Largest normalized entry of `RᵀΣ̂_eR̄`.
    pub innovation_cross: f64,
    /// Largest normalized entry of `RᵀΣ̂_yR̄`.
    pub latent_static_cross: f64,
    /// Largest absolute sample correlation between latent innovations and static noise.
    pub innovation_static_correlation: f64,
}

impl OptimalityReport {
    pub fn max(&self) -> f64 {
        self.innovation_projection
            .max(self.innovation_cross)
            .max(self.latent_static_cross)
            .max(self.innovation_static_correlation)
    }
}

/// `max |(AᵀΣB)_ij| / √((AᵀΣA)_ii (BᵀΣB)_jj)` over pairs with non-zero variance.
fn normalized_cross(sigma: &Matrix, a: &Matrix, b: &Matrix) -> f64 {
    let cross = a.transpose() * sigma * b;
    let va = (a.transpose() * sigma * a).diagonal();
    let vb = (b.transpose() * sigma * b).diagonal();
    let scale = va.iter().chain(vb.iter()).fold(0.0_f64, |m, v| m.max(v.abs()));
    let floor = 1e-14 * scale.max(f64::MIN_POSITIVE);
    let mut worst = 0.0_f64;
    for i in 0..cross.nrows() {
        for j in 0..cross.ncols() {
            if va[i] > floor && vb[j] > floor {
                worst = worst.max(cross[(i, j)].abs() / (va[i] * vb[j]).sqrt());
            }
        }
    }
    worst
}

pub fn check_optimality(m: &PredVarModel, y: &TimeSeries) -> Result<OptimalityReport> {
    let pred = m.predict_one_step(y)?;
    let n = pred.vhat.nrows();
    let yc = y.centered(&m.mean)?;
    let ys = yc.rows(m.s, n);
    let sigma_y = ys.transpose() * ys / n as f64;

    let se_r = &m.sigma_e * &m.weights;
    let scale = max_abs(&se_r);
    let innovation_projection = if scale > 0.0 {
        max_abs(&(&se_r - &m.loadings * (m.weights.transpose() * &se_r))) / scale
    } else {
        0.0
    };

    let v = m.latent_scores(y)?;
    let innov = v.rows(m.s, n) - &pred.vhat;
    let ebar = m.static_noise(y)?;
    let ebar = ebar.rows(m.s, n);
    let mut corr = 0.0_f64;
    for i in 0..innov.ncols() {
        let a: Vec<f64> = innov.column(i).iter().copied().collect();
        for j in 0..ebar.ncols() {
            let b: Vec<f64> = ebar.column(j).iter().copied().collect();
            if let Some(c) = correlation(&a, &b) {
                corr = corr.max(c.abs());
            }
        }
    }

    Ok(OptimalityReport {
        innovation_projection,
        innovation_cross: normalized_cross(&m.sigma_e, &m.weights, &m.static_weights),
        latent_static_cross: normalized_cross(&sigma_y, &m.weights, &m.static_weights),
        innovation_static_correlation: corr,
    })
}
