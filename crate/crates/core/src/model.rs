//! The fitted latent-VAR model and everything that can be computed from it
//! without re-estimating: latent scores, static noise, one-step prediction,
//! simulation, the equivalent reduced-rank VAR view, and the Gaussian
//! log-likelihood.
//!
//! Observations decompose as `y_k = mean + P v_k + P̄ ε̄_k` with
//! `v_k = Rᵀ(y_k − mean)` following a VAR(s) driven by `ε_k`, and
//! `ε̄_k = R̄ᵀ(y_k − mean)` serially independent.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::data::TimeSeries;
use crate::error::{Error, Result};
use crate::numerics::{self, max_abs, Matrix, Vector};

/// Whitening transform from the EVD of the sample covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizationTransform {
    /// p×r eigenvectors of the non-negligible eigenvalues.
    pub u: Matrix,
    /// r eigenvalues, non-increasing.
    pub d: Vector,
    /// p×(p−r) null-space eigenvectors.
    pub u_null: Matrix,
    pub mean: Vector,
    pub rank_tol: f64,
}

impl NormalizationTransform {
    /// Builds the transform from a covariance estimate, keeping eigenvalues
    /// above `rank_tol · λ_max`.
    pub fn from_covariance(sigma_y: &Matrix, mean: Vector, rank_tol: f64) -> Result<Self> {
        let evd = numerics::sym_evd(sigma_y)?;
        let p = sigma_y.nrows();
        let lmax = if p > 0 { evd.eigenvalues[0] } else { 0.0 };
        if !(lmax > 1e-14) {
            return Err(Error::DegenerateData(lmax));
        }
        let r = evd
            .eigenvalues
            .iter()
            .take_while(|&&l| l > rank_tol * lmax)
            .count();
        Ok(Self {
            u: evd.eigenvectors.columns(0, r).into_owned(),
            d: evd.eigenvalues.rows(0, r).into_owned(),
            u_null: evd.eigenvectors.columns(r, p - r).into_owned(),
            mean,
            rank_tol,
        })
    }

    pub fn identity(p: usize) -> Self {
        Self {
            u: Matrix::identity(p, p),
            d: Vector::from_element(p, 1.0),
            u_null: Matrix::zeros(p, 0),
            mean: Vector::zeros(p),
            rank_tol: 0.0,
        }
    }

    pub fn rank(&self) -> usize {
        self.d.len()
    }

    pub fn dim(&self) -> usize {
        self.u.nrows()
    }

    /// `U D^{-1/2}`, maps centered rows to normalized rows by right-multiplication.
    pub fn whitening(&self) -> Matrix {
        let mut w = self.u.clone();
        for (j, mut col) in w.column_iter_mut().enumerate() {
            col.scale_mut(1.0 / self.d[j].sqrt());
        }
        w
    }

    /// `U D^{1/2}`.
    pub fn coloring(&self) -> Matrix {
        let mut c = self.u.clone();
        for (j, mut col) in c.column_iter_mut().enumerate() {
            col.scale_mut(self.d[j].sqrt());
        }
        c
    }

    /// Centers with the stored mean and whitens: `(Y − 1 meanᵀ) U D^{-1/2}`.
    pub fn normalize(&self, y: &TimeSeries) -> Result<Matrix> {
        Ok(y.centered(&self.mean)? * self.whitening())
    }
}

/// Complete fitted model.
#[derive(Debug, Clone, PartialEq)]
pub struct PredVarModel {
    pub p: usize,
    pub ell: usize,
    pub s: usize,
    pub r: usize,
    pub mean: Vector,
    /// P, p×ℓ dynamic loadings.
    pub loadings: Matrix,
    /// P̄, p×(p−ℓ) static loadings.
    pub static_loadings: Matrix,
    /// R, p×ℓ weights giving `v = Rᵀ y`.
    pub weights: Matrix,
    /// R̄, p×(p−ℓ) weights giving `ε̄ = R̄ᵀ y`.
    pub static_weights: Matrix,
    /// B₁ … B_s, each ℓ×ℓ.
    pub coefs: Vec<Matrix>,
    pub sigma_eps: Matrix,
    pub sigma_static: Matrix,
    pub sigma_e: Matrix,
    pub norm: NormalizationTransform,
}

/// One-step predictions aligned to times `s+1..N`.
#[derive(Debug, Clone)]
pub struct Prediction {
    pub vhat: Matrix,
    pub yhat: Matrix,
}

/// Reduced-rank VAR form `y_k = Σ A_j y_{k−j} + e_k` of a model (centered data).
#[derive(Debug, Clone)]
pub struct RrvarView {
    pub a: Vec<Matrix>,
    pub sigma_e: Matrix,
}

impl RrvarView {
    /// One-step predictions of centered data, rows aligned to `s+1..N`.
    pub fn predict(&self, y_centered: &Matrix) -> Result<Matrix> {
        let s = self.a.len();
        let p = self.a.first().map_or(y_centered.ncols(), Matrix::nrows);
        if y_centered.ncols() != p {
            return Err(Error::DimensionMismatch(format!(
                "model has p = {p}, data has {} columns",
                y_centered.ncols()
            )));
        }
        let n = y_centered.nrows();
        if n < s + 1 {
            return Err(Error::InsufficientHistory { needed: s + 1, got: n });
        }
        let mut out = Matrix::zeros(n - s, p);
        for (j, a) in self.a.iter().enumerate() {
            let lagged = y_centered.rows(s - 1 - j, n - s);
            out += lagged * a.transpose();
        }
        Ok(out)
    }
}

/// Canonical form of a general reduced-rank VAR, `RᵀP = I`.
#[derive(Debug, Clone)]
pub struct CanonicalRrvar {
    pub loadings: Matrix,
    pub coefs: Vec<Matrix>,
    pub weights: Matrix,
    /// Ratio of smallest to largest singular value of `ŔᵀṔ`.
    pub condition: f64,
}

/// Converts `(Ṕ, {B́_j}, Ŕ)` to canonical form: `P = Ṕ`, `B_j = B́_j ŔᵀṔ`,
/// `R = Ŕ (ṔᵀŔ)⁻¹`. Products `P B_j Rᵀ` are preserved.
pub fn canonicalize_rrvar(
    loadings: &Matrix,
    coefs: &[Matrix],
    weights: &Matrix,
) -> Result<CanonicalRrvar> {
    if loadings.shape() != weights.shape() {
        return Err(Error::DimensionMismatch(format!(
            "loadings {:?} vs weights {:?}",
            loadings.shape(),
            weights.shape()
        )));
    }
    let ell = loadings.ncols();
    if let Some(b) = coefs.iter().find(|b| b.shape() != (ell, ell)) {
        return Err(Error::DimensionMismatch(format!(
            "coefficient block {:?}, expected {ell}x{ell}",
            b.shape()
        )));
    }
    let cross = weights.transpose() * loadings;
    let sv = cross.clone().singular_values();
    let condition = if ell == 0 { 1.0 } else { sv.min() / sv.max() };
    if !(condition > 1e-12) {
        return Err(Error::SingularCrossProduct { condition });
    }
    let inv = cross
        .clone()
        .try_inverse()
        .ok_or(Error::SingularCrossProduct { condition })?;
    Ok(CanonicalRrvar {
        loadings: loadings.clone(),
        coefs: coefs.iter().map(|b| b * &cross).collect(),
        // (ṔᵀŔ)⁻¹ = ((ŔᵀṔ)⁻¹)ᵀ
        weights: weights * inv.transpose(),
        condition,
    })
}

/// Companion matrix of the latent VAR, ℓs×ℓs.
pub fn companion(coefs: &[Matrix]) -> Matrix {
    let s = coefs.len();
    let ell = coefs.first().map_or(0, Matrix::nrows);
    let dim = ell * s;
    let mut c = Matrix::zeros(dim, dim);
    for (j, b) in coefs.iter().enumerate() {
        c.view_mut((0, j * ell), (ell, ell)).copy_from(b);
    }
    for i in ell..dim {
        c[(i, i - ell)] = 1.0;
    }
    c
}

pub fn spectral_radius(coefs: &[Matrix]) -> f64 {
    let c = companion(coefs);
    if c.is_empty() {
        return 0.0;
    }
    c.complex_eigenvalues()
        .iter()
        .fold(0.0_f64, |acc, z| acc.max(z.norm()))
}

impl PredVarModel {
    /// Checks shapes and the weight/loading duality.
    pub fn validate(&self) -> Result<()> {
        let (p, ell, s) = (self.p, self.ell, self.s);
        let q = p.checked_sub(ell).ok_or_else(|| {
            Error::InvalidModel(format!("ell = {ell} exceeds p = {p}"))
        })?;
        let shape_checks: [(&str, (usize, usize), (usize, usize)); 7] = [
            ("P", self.loadings.shape(), (p, ell)),
            ("Pbar", self.static_loadings.shape(), (p, q)),
            ("R", self.weights.shape(), (p, ell)),
            ("Rbar", self.static_weights.shape(), (p, q)),
            ("Sigma_eps", self.sigma_eps.shape(), (ell, ell)),
            ("Sigma_epsbar", self.sigma_static.shape(), (q, q)),
            ("Sigma_e", self.sigma_e.shape(), (p, p)),
        ];
        for (name, got, want) in shape_checks {
            if got != want {
                return Err(Error::InvalidModel(format!(
                    "{name} has shape {got:?}, expected {want:?}"
                )));
            }
        }
        if ell == 0 || s == 0 || self.coefs.len() != s {
            return Err(Error::InvalidModel(format!(
                "need ell >= 1 and s >= 1 with s coefficient blocks (ell={ell}, s={s}, blocks={})",
                self.coefs.len()
            )));
        }
        if self.coefs.iter().any(|b| b.shape() != (ell, ell)) {
            return Err(Error::InvalidModel("coefficient block shape".into()));
        }
        if self.mean.len() != p || self.norm.dim() != p {
            return Err(Error::InvalidModel("mean/normalization dimension".into()));
        }
        let mut w = Matrix::zeros(p, p);
        w.columns_mut(0, ell).copy_from(&self.weights);
        w.columns_mut(ell, q).copy_from(&self.static_weights);
        let mut l = Matrix::zeros(p, p);
        l.columns_mut(0, ell).copy_from(&self.loadings);
        l.columns_mut(ell, q).copy_from(&self.static_loadings);
        let dual = max_abs(&(w.transpose() * &l - Matrix::identity(p, p)));
        let oblique = max_abs(&(&l * w.transpose() - Matrix::identity(p, p)));
        if dual > 1e-6 || oblique > 1e-6 {
            return Err(Error::InvalidModel(format!(
                "weights/loadings not dual: |[R Rbar]'[P Pbar] - I| = {dual:.3e}, |P R' + Pbar Rbar' - I| = {oblique:.3e}"
            )));
        }
        Ok(())
    }

    fn check_columns(&self, y: &TimeSeries) -> Result<()> {
        if y.ncols() != self.p {
            return Err(Error::DimensionMismatch(format!(
                "model has p = {}, data has {} columns",
                self.p,
                y.ncols()
            )));
        }
        Ok(())
    }

    /// `v_k = Rᵀ(y_k − mean)` for every row.
    pub fn latent_scores(&self, y: &TimeSeries) -> Result<Matrix> {
        self.check_columns(y)?;
        Ok(y.centered(&self.mean)? * &self.weights)
    }

    /// `ε̄_k = R̄ᵀ(y_k − mean)` for every row.
    pub fn static_noise(&self, y: &TimeSeries) -> Result<Matrix> {
        self.check_columns(y)?;
        Ok(y.centered(&self.mean)? * &self.static_weights)
    }

    /// `v̂_k = Σ_j B_j v_{k−j}` and `ŷ_k = mean + P v̂_k` for `k = s+1..N`.
    pub fn predict_one_step(&self, y: &TimeSeries) -> Result<Prediction> {
        self.check_columns(y)?;
        let n = y.nrows();
        let s = self.s;
        if n < s + 1 {
            return Err(Error::InsufficientHistory { needed: s + 1, got: n });
        }
        let v = self.latent_scores(y)?;
        let vhat = lagged_prediction(&v, &self.coefs);
        let mut yhat = &vhat * self.loadings.transpose();
        for mut row in yhat.row_iter_mut() {
            row += self.mean.transpose();
        }
        Ok(Prediction { vhat, yhat })
    }

    pub fn to_rrvar(&self) -> RrvarView {
        RrvarView {
            a: self
                .coefs
                .iter()
                .map(|b| &self.loadings * b * self.weights.transpose())
                .collect(),
            sigma_e: self.sigma_e.clone(),
        }
    }

    /// Draws `n` observations: latent VAR driven by `N(0, Σ_ε)`, static noise
    /// `N(0, Σ_ε̄)`, mixed through `[P P̄]` and shifted by the mean.
    pub fn simulate(&self, n: usize, seed: u64) -> Result<TimeSeries> {
        let radius = spectral_radius(&self.coefs);
        if radius >= 1.0 {
            return Err(Error::UnstableDynamics { radius });
        }
        let l_eps = numerics::psd_factor(&self.sigma_eps, "Sigma_eps")?;
        let l_bar = numerics::psd_factor(&self.sigma_static, "Sigma_epsbar")?;
        let (ell, s, q) = (self.ell, self.s, self.p - self.ell);

        // long enough for the initial condition to decay below 1e-10
        let burn = if radius > 0.0 {
            ((1e-10_f64).ln() / radius.ln()).ceil().clamp(100.0, 100_000.0) as usize
        } else {
            100
        };

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut history: Vec<Vector> = vec![Vector::zeros(ell); s];
        let mut out = Matrix::zeros(n, self.p);
        let mut z = Vector::zeros(ell);
        let mut zbar = Vector::zeros(q);
        for k in 0..burn + n {
            for x in z.iter_mut() {
                *x = StandardNormal.sample(&mut rng);
            }
            for x in zbar.iter_mut() {
                *x = StandardNormal.sample(&mut rng);
            }
            let mut v = &l_eps * &z;
            for (j, b) in self.coefs.iter().enumerate() {
                v += b * &history[s - 1 - j];
            }
            history.rotate_left(1);
            history[s - 1] = v.clone();
            if k >= burn {
                let y = &self.mean + &self.loadings * &v + &self.static_loadings * (&l_bar * &zbar);
                out.set_row(k - burn, &y.transpose());
            }
        }
        TimeSeries::new(out)
    }

    /// Gaussian log-likelihood of the one-step prediction errors, evaluated in
    /// the r-dimensional normalized coordinates where the innovation
    /// covariance is non-singular.
    pub fn log_likelihood(&self, y: &TimeSeries) -> Result<f64> {
        let pred = self.predict_one_step(y)?;
        let n = pred.vhat.nrows();
        let whiten = self.norm.whitening();
        let ystar = self.norm.normalize(y)?;
        let ystar_s = ystar.rows(self.s, n);
        let pstar = whiten.transpose() * &self.loadings;
        let resid = ystar_s - &pred.vhat * pstar.transpose();
        let sigma_star = whiten.transpose() * &self.sigma_e * &whiten;
        let (inv, logdet, rank) = numerics::sym_pinv(&sigma_star, 1e-12)?;
        let quad = (&resid * inv).component_mul(&resid).sum();
        Ok(gaussian_ll(n, rank, logdet, quad))
    }

    /// Same likelihood assembled from the latent innovation term
    /// `(v − v̂)ᵀ Σ_ε⁻¹ (v − v̂)` and the static term `ε̄ᵀ (R̄ᵀΣ_eR̄)⁺ ε̄`.
    /// Agrees with [`Self::log_likelihood`] exactly when `RᵀΣ_eR̄ = 0`.
    pub fn log_likelihood_decomposed(&self, y: &TimeSeries) -> Result<f64> {
        let pred = self.predict_one_step(y)?;
        let n = pred.vhat.nrows();
        let v = self.latent_scores(y)?;
        let innov = v.rows(self.s, n) - &pred.vhat;
        let ebar = self.static_noise(y)?.rows(self.s, n).into_owned();
        let sigma_bar = self.static_weights.transpose() * &self.sigma_e * &self.static_weights;

        let (inv_eps, logdet_eps, rank_eps) = numerics::sym_pinv(&self.sigma_eps, 1e-12)?;
        let (inv_bar, logdet_bar, rank_bar) = numerics::sym_pinv(&sigma_bar, 1e-10)?;
        let quad = (&innov * inv_eps).component_mul(&innov).sum()
            + (&ebar * inv_bar).component_mul(&ebar).sum();
        Ok(gaussian_ll(
            n,
            rank_eps + rank_bar,
            logdet_eps + logdet_bar,
            quad,
        ))
    }
}

fn gaussian_ll(n: usize, dim: usize, logdet: f64, quad: f64) -> f64 {
    let l_y = n as f64 * logdet + quad;
    -0.5 * (l_y + (n * dim) as f64 * (2.0 * std::f64::consts::PI).ln())
}

/// Rows `s..N` of `Σ_j v_{k−j} B_jᵀ`.
pub(crate) fn lagged_prediction(v: &Matrix, coefs: &[Matrix]) -> Matrix {
    let s = coefs.len();
    let n = v.nrows() - s;
    let mut vhat = Matrix::zeros(n, v.ncols());
    for (j, b) in coefs.iter().enumerate() {
        vhat += v.rows(s - 1 - j, n) * b.transpose();
    }
    vhat
}
