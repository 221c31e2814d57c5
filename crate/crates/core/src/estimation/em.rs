//! Initialization and the alternating update of the whitened weights `R*`.
//!
//! One step: latent scores `V_i = Y*_i R*`, VAR coefficients by least
//! squares on `𝕍`, predictions `V̂_s = 𝕍𝔹̂`, then the leading eigenvectors of
//! `J = Y*_sᵀ Π Y*_s / N` become the next `R*`. `Π` projects onto `V̂_s` for
//! PredVAR and onto all of `𝕍` for the LaVAR variant.

use super::normalize::LaggedData;
use super::Variant;
use crate::error::{Error, Result};
use crate::numerics::{self, LeastSquares, Matrix, Vector};

/// Eigen-update of `R*` from a matrix `J`.
#[derive(Debug, Clone)]
pub struct SpectralUpdate {
    /// r×ℓ leading eigenvectors of `J`.
    pub rstar: Matrix,
    /// All r eigenvectors of `J` (`W`).
    pub basis: Matrix,
    /// Eigenvalues of `J` clamped to `[0, 1]`, non-increasing.
    pub spectrum: Vector,
}

#[derive(Debug, Clone)]
pub struct EmStep {
    pub update: SpectralUpdate,
    /// `𝔹̂`, sℓ×ℓ; block row `j` is `B_{j+1}ᵀ`.
    pub bb: Matrix,
}

/// Eigen-decomposes `J = fittedᵀ fitted / N` where `fitted = Π Y*_s`.
fn spectral_update(fitted: &Matrix, n: usize, ell: usize) -> Result<SpectralUpdate> {
    let j = fitted.transpose() * fitted / n as f64;
    let evd = numerics::sym_evd(&j)?;
    let mut spectrum = evd.eigenvalues;
    for (i, l) in spectrum.iter_mut().enumerate() {
        if *l > 1.0 {
            if *l > 1.0 + 1e-8 {
                log::warn!("eigenvalue {} of J is {l:.3e} > 1; clamping", i + 1);
            } else {
                log::debug!("clamping eigenvalue {} of J from {l:.17e} to 1", i + 1);
            }
            *l = 1.0;
        } else if *l < 0.0 {
            *l = 0.0;
        }
    }
    Ok(SpectralUpdate {
        rstar: evd.eigenvectors.columns(0, ell).into_owned(),
        basis: evd.eigenvectors,
        spectrum,
    })
}

fn check_ell(d: &LaggedData, ell: usize) -> Result<()> {
    if ell == 0 {
        return Err(Error::InvalidArgument("ell must be >= 1".into()));
    }
    if ell > d.rank() {
        return Err(Error::EllExceedsRank {
            ell,
            rank: d.rank(),
        });
    }
    Ok(())
}

/// `W₀(:,1:ℓ)` from `J₀ = Y*_sᵀ Π_{𝕐*} Y*_s / N`.
pub fn init_rstar(d: &LaggedData, ell: usize) -> Result<SpectralUpdate> {
    check_ell(d, ell)?;
    let ls = LeastSquares::new(&d.yaug_star, "lagged data matrix")?;
    spectral_update(&ls.project(&d.ys_star), d.n, ell)
}

pub fn em_step(d: &LaggedData, rstar: &Matrix, variant: Variant) -> Result<EmStep> {
    let ell = rstar.ncols();
    check_ell(d, ell)?;
    if rstar.nrows() != d.rank() {
        return Err(Error::DimensionMismatch(format!(
            "R* has {} rows, normalized data has rank {}",
            rstar.nrows(),
            d.rank()
        )));
    }
    let vv = d.latent_regressors(rstar);
    let vs = &d.ys_star * rstar;
    let ls_v = LeastSquares::new(&vv, "latent regressors")?;
    let bb = ls_v.solve(&vs)?;
    let fitted = match variant {
        Variant::PredVar => {
            let vhat = &vv * &bb;
            LeastSquares::new(&vhat, "predicted latent scores")?.project(&d.ys_star)
        }
        Variant::LaVar => ls_v.project(&d.ys_star),
        Variant::OneShot => {
            return Err(Error::InvalidArgument(
                "the one-shot estimator has no iteration step".into(),
            ))
        }
    };
    Ok(EmStep {
        update: spectral_update(&fitted, d.n, ell)?,
        bb,
    })
}
