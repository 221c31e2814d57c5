use super::{assemble, prepare, FitOptions, FitReport, Variant};
use crate::data::TimeSeries;
use crate::error::Result;
use crate::model::{canonicalize_rrvar, PredVarModel};
use crate::numerics::{self, LeastSquares};

/// Non-iterative baseline.
///
/// The static weights are the eigenvectors of the `r − ℓ` smallest
/// eigenvalues of `Y*_sᵀ𝕐*𝕐*ᵀY*_s`; the dynamic weights span the
/// eigenvectors of the `ℓ` smallest eigenvalues of `Σ_y R̄R̄ᵀΣ_y`, which in
/// whitened coordinates (`Σ_y = I`) is `R̄*R̄*ᵀ`. VAR coefficients come from a
/// single least-squares pass.
pub fn fit_oneshot(y: &TimeSeries, opts: &FitOptions) -> Result<(PredVarModel, FitReport)> {
    let (norm, d) = prepare(y, opts)?;
    let (ell, r) = (opts.ell, d.rank());
    let cross = d.ys_star.transpose() * &d.yaug_star;
    let evd = numerics::sym_evd(&(&cross * cross.transpose()))?;
    let rbar_star = evd.eigenvectors.columns(ell, r - ell).into_owned();

    let gram = &rbar_star * rbar_star.transpose();
    let evd2 = numerics::sym_evd(&gram)?;
    let rstar = evd2.eigenvectors.columns(r - ell, ell).into_owned();
    // P = Σ_y R in whitened coordinates is R itself, so RᵀP = I already
    let canon = canonicalize_rrvar(&rstar, &[], &rstar)?;
    let rstar = canon.weights;

    let model = assemble(&norm, &d, &rstar, &rbar_star, None)?;

    let vv = d.latent_regressors(&rstar);
    let vhat = LeastSquares::new(&vv, "latent regressors")?.project(&(&d.ys_star * &rstar));
    let fitted = LeastSquares::new(&vhat, "predicted latent scores")?.project(&d.ys_star);
    let j = fitted.transpose() * fitted / d.n as f64;
    let spectrum = numerics::sym_evd(&j)?.eigenvalues;
    let report = FitReport {
        variant: Variant::OneShot,
        iterations: 0,
        converged: true,
        objective_trace: vec![spectrum.rows(0, ell).sum()],
        initial_objective: spectrum.rows(0, ell).sum(),
        final_spectrum: spectrum.iter().map(|l| l.clamp(0.0, 1.0)).collect(),
        subspace_deltas: Vec::new(),
    };
    Ok((model, report))
}
