//! Model estimation from a training series.
//!
//! [`fit`] whitens the data, seeds the dynamic subspace from the full-lag
//! regression, and alternates latent VAR fits with subspace updates until the
//! subspace stops moving. [`fit_oneshot`] is the non-iterative baseline.

mod diagnostics;
mod em;
mod normalize;
mod oneshot;

pub use diagnostics::{
    check_optimality, param_covariances, param_covariances_from, OptimalityReport,
    ParamCovariances,
};
pub use em::{em_step, init_rstar, EmStep, SpectralUpdate};
pub use normalize::{normalize, LaggedData};
pub use oneshot::fit_oneshot;

use std::fmt;
use std::str::FromStr;

use crate::data::TimeSeries;
use crate::error::{Error, Result};
use crate::metrics::d_distance;
use crate::model::{NormalizationTransform, PredVarModel};
use crate::numerics::{LeastSquares, Matrix, Vector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Variant {
    /// Project onto the predicted latent scores.
    #[default]
    PredVar,
    /// Project onto all lagged latent scores.
    LaVar,
    /// Non-iterative baseline.
    OneShot,
}

impl Variant {
    pub fn as_str(self) -> &'static str {
        match self {
            Variant::PredVar => "predvar",
            Variant::LaVar => "lavar",
            Variant::OneShot => "oneshot",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "predvar" => Ok(Variant::PredVar),
            "lavar" => Ok(Variant::LaVar),
            "oneshot" | "os" => Ok(Variant::OneShot),
            other => Err(Error::InvalidArgument(format!("unknown variant '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitOptions {
    pub ell: usize,
    pub s: usize,
    pub max_iter: usize,
    pub tol: f64,
    pub rank_tol: f64,
    pub variant: Variant,
    /// Reserved; initialization is deterministic.
    pub seed: u64,
}

impl FitOptions {
    pub fn new(ell: usize, s: usize) -> Self {
        Self {
            ell,
            s,
            max_iter: 500,
            tol: 1e-8,
            rank_tol: 1e-10,
            variant: Variant::PredVar,
            seed: 0,
        }
    }

    pub fn with_variant(mut self, variant: Variant) -> Self {
        self.variant = variant;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.ell == 0 || self.s == 0 {
            return Err(Error::InvalidArgument(format!(
                "ell and s must be >= 1 (ell={}, s={})",
                self.ell, self.s
            )));
        }
        if !(self.tol > 0.0) || self.max_iter == 0 {
            return Err(Error::InvalidArgument(
                "tol must be positive and max_iter >= 1".into(),
            ));
        }
        if !(self.rank_tol > 0.0 && self.rank_tol < 1.0) {
            return Err(Error::InvalidArgument("rank_tol must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FitReport {
    pub variant: Variant,
    pub iterations: usize,
    pub converged: bool,
    /// `trace(Λ(1:ℓ))` after each iteration.
    pub objective_trace: Vec<f64>,
    /// `trace(Λ₀(1:ℓ))` of the initialization.
    pub initial_objective: f64,
    /// Eigenvalues of the final `J`, non-increasing.
    pub final_spectrum: Vec<f64>,
    /// D-distance between successive `R*` iterates.
    pub subspace_deltas: Vec<f64>,
}

/// Checks shared by every estimator; returns the normalized data.
fn prepare(y: &TimeSeries, opts: &FitOptions) -> Result<(NormalizationTransform, LaggedData)> {
    opts.validate()?;
    let needed = opts.s + opts.s * opts.ell + 1;
    if y.nrows() < needed {
        return Err(Error::InsufficientRows {
            needed,
            got: y.nrows(),
        });
    }
    let (norm, d) = normalize(y, opts.s, opts.rank_tol)?;
    if opts.ell > norm.rank() {
        return Err(Error::EllExceedsRank {
            ell: opts.ell,
            rank: norm.rank(),
        });
    }
    Ok((norm, d))
}

fn leading_trace(spectrum: &Vector, ell: usize) -> f64 {
    spectrum.rows(0, ell).sum()
}

/// Fits a model with the iterative estimator, or the one-shot baseline when
/// `opts.variant` asks for it.
///
/// Running out of iterations is not an error: the last iterate is returned
/// with `converged = false`.
pub fn fit(y: &TimeSeries, opts: &FitOptions) -> Result<(PredVarModel, FitReport)> {
    if opts.variant == Variant::OneShot {
        return fit_oneshot(y, opts);
    }
    let (norm, d) = prepare(y, opts)?;
    let ell = opts.ell;
    let init = init_rstar(&d, ell)?;
    let mut report = FitReport {
        variant: opts.variant,
        initial_objective: leading_trace(&init.spectrum, ell),
        ..FitReport::default()
    };
    let mut current = init;
    for it in 1..=opts.max_iter {
        let step = em_step(&d, &current.rstar, opts.variant).map_err(|e| match e {
            Error::RankDeficientDesign { context, condition } => Error::RankDeficientDesign {
                context: format!("{context} (iteration {it})"),
                condition,
            },
            other => other,
        })?;
        let delta = d_distance(&current.rstar, &step.update.rstar)?;
        let objective = leading_trace(&step.update.spectrum, ell);
        if let Some(&prev) = report.objective_trace.last() {
            if objective < prev - 1e-10 {
                log::debug!("objective decreased at iteration {it}: {prev:.12} -> {objective:.12}");
            }
        }
        report.objective_trace.push(objective);
        report.subspace_deltas.push(delta);
        report.iterations = it;
        current = step.update;
        if delta < opts.tol {
            report.converged = true;
            break;
        }
    }
    if !report.converged {
        log::warn!(
            "no convergence after {} iterations (last subspace change {:.3e}); returning last iterate",
            opts.max_iter,
            report.subspace_deltas.last().copied().unwrap_or(f64::NAN)
        );
    }
    report.final_spectrum = current.spectrum.iter().copied().collect();
    let sigma_eps = Matrix::from_diagonal(&current.spectrum.rows(0, ell).map(|l| 1.0 - l));
    let model = assemble(
        &norm,
        &d,
        &current.rstar,
        &current.basis.columns(ell, d.rank() - ell).into_owned(),
        Some(sigma_eps),
    )?;
    Ok((model, report))
}

/// Builds the original-coordinate model from whitened weights `R*` and the
/// whitened static basis `P̄*`. Refits `𝔹̂` for the given `R*`. When
/// `sigma_eps` is `None` it is taken from the latent residuals.
pub(crate) fn assemble(
    norm: &NormalizationTransform,
    d: &LaggedData,
    rstar: &Matrix,
    pbar_star: &Matrix,
    sigma_eps: Option<Matrix>,
) -> Result<PredVarModel> {
    let (ell, s, n) = (rstar.ncols(), d.s, d.n);
    let p = norm.dim();
    let vv = d.latent_regressors(rstar);
    let vs = &d.ys_star * rstar;
    let ls_v = LeastSquares::new(&vv, "latent regressors")?;
    let bb = ls_v.solve(&vs)?;
    let vhat = &vv * &bb;
    let coefs = (0..s)
        .map(|j| bb.rows(j * ell, ell).transpose())
        .collect();
    let sigma_eps = match sigma_eps {
        Some(m) => m,
        None => {
            let resid = &vs - &vhat;
            resid.transpose() * resid / n as f64
        }
    };

    let whiten = norm.whitening();
    let color = norm.coloring();
    let q = p - ell;
    let null = norm.u_null.ncols();
    let mut static_loadings = Matrix::zeros(p, q);
    let mut static_weights = Matrix::zeros(p, q);
    static_loadings
        .columns_mut(0, q - null)
        .copy_from(&(&color * pbar_star));
    static_weights
        .columns_mut(0, q - null)
        .copy_from(&(&whiten * pbar_star));
    static_loadings.columns_mut(q - null, null).copy_from(&norm.u_null);
    static_weights.columns_mut(q - null, null).copy_from(&norm.u_null);

    // Σ̂_e = Y_sᵀ(I − Π_V̂)Y_s/N
    let resid = &d.ys - LeastSquares::new(&vhat, "predicted latent scores")?.project(&d.ys);
    let sigma_e = sym(resid.transpose() * resid / n as f64);
    let ebar = &d.ys * &static_weights;
    let sigma_static = sym(ebar.transpose() * ebar / n as f64);

    Ok(PredVarModel {
        p,
        ell,
        s,
        r: norm.rank(),
        mean: norm.mean.clone(),
        loadings: &color * rstar,
        static_loadings,
        weights: &whiten * rstar,
        static_weights,
        coefs,
        sigma_eps: sym(sigma_eps),
        sigma_static,
        sigma_e,
        norm: norm.clone(),
    })
}

fn sym(m: Matrix) -> Matrix {
    (&m + m.transpose()) * 0.5
}
