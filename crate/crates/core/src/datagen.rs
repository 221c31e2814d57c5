//! Synthetic series: Lorenz-driven latent dynamics observed through random
//! oblique loadings, and exact reduced-rank VAR processes with known truth.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::data::TimeSeries;
use crate::error::{Error, Result};
use crate::model::{spectral_radius, NormalizationTransform, PredVarModel};
use crate::numerics::{self, Matrix, Vector};

/// Largest accepted condition number of `[P P̄]`.
pub const MAX_LOADING_CONDITION: f64 = 10.0;

/// Default number of integration steps between recorded samples.
pub const SAMPLE_EVERY: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct LorenzConfig {
    pub sigma: f64,
    pub rho: f64,
    pub beta: f64,
    pub dt: f64,
    pub n_samples: usize,
    /// Burn-in length in integration steps.
    pub burn_in: usize,
    /// Integration steps between recorded samples.
    pub sample_every: usize,
    pub init: [f64; 3],
    /// Unused by the integrator; carried so a config fully describes a dataset.
    pub seed: u64,
}

impl Default for LorenzConfig {
    fn default() -> Self {
        Self {
            sigma: 10.0,
            rho: 28.0,
            beta: 8.0 / 3.0,
            dt: 0.01,
            n_samples: 10_000,
            burn_in: 1000,
            sample_every: SAMPLE_EVERY,
            init: [1.0, 1.0, 1.0],
            seed: 0,
        }
    }
}

impl LorenzConfig {
    fn deriv(&self, s: [f64; 3]) -> [f64; 3] {
        [
            self.sigma * (s[1] - s[0]),
            s[0] * (self.rho - s[2]) - s[1],
            s[0] * s[1] - self.beta * s[2],
        ]
    }

    fn rk4_step(&self, s: [f64; 3], h: f64) -> [f64; 3] {
        let add = |a: [f64; 3], b: [f64; 3], c: f64| [a[0] + c * b[0], a[1] + c * b[1], a[2] + c * b[2]];
        let k1 = self.deriv(s);
        let k2 = self.deriv(add(s, k1, h / 2.0));
        let k3 = self.deriv(add(s, k2, h / 2.0));
        let k4 = self.deriv(add(s, k3, h));
        let mut out = s;
        for i in 0..3 {
            out[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        out
    }

    fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || self.n_samples == 0 || self.sample_every == 0 {
            return Err(Error::InvalidArgument(format!(
                "Lorenz config needs dt > 0, n_samples > 0 and sample_every > 0 (dt={}, n={}, every={})",
                self.dt, self.n_samples, self.sample_every
            )));
        }
        Ok(())
    }
}

/// Integrates `steps` RK4 steps of size `dt` from `init`, recording every
/// `every`-th state. Row `k` is the state after `(k+1)·every` steps.
pub fn lorenz_integrate(
    cfg: &LorenzConfig,
    init: [f64; 3],
    dt: f64,
    steps: usize,
    every: usize,
) -> Result<Matrix> {
    let every = every.max(1);
    let mut out = Matrix::zeros(steps / every, 3);
    let mut s = init;
    for k in 0..steps {
        s = cfg.rk4_step(s, dt);
        if s.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteTrajectory(k + 1));
        }
        if (k + 1) % every == 0 {
            let row = (k + 1) / every - 1;
            for j in 0..3 {
                out[(row, j)] = s[j];
            }
        }
    }
    Ok(out)
}

/// Raw trajectory after the burn-in, one row per `sample_every` steps.
pub fn lorenz_trajectory(cfg: &LorenzConfig) -> Result<Matrix> {
    cfg.validate()?;
    let start = if cfg.burn_in > 0 {
        let warm = lorenz_integrate(cfg, cfg.init, cfg.dt, cfg.burn_in, cfg.burn_in)?;
        [warm[(0, 0)], warm[(0, 1)], warm[(0, 2)]]
    } else {
        cfg.init
    };
    let every = cfg.sample_every;
    lorenz_integrate(cfg, start, cfg.dt, cfg.n_samples * every, every)
}

/// Trajectory with every column shifted to mean 0 and scaled to variance 1.
pub fn lorenz_series(cfg: &LorenzConfig) -> Result<Matrix> {
    Ok(standardize(&lorenz_trajectory(cfg)?))
}

/// Columns to zero mean and unit (1/n) variance; constant columns are only centered.
pub fn standardize(m: &Matrix) -> Matrix {
    let n = m.nrows() as f64;
    let mut out = m.clone();
    for mut col in out.column_iter_mut() {
        let mean = col.sum() / n;
        col.add_scalar_mut(-mean);
        let sd = (col.norm_squared() / n).sqrt();
        if sd > 0.0 {
            col /= sd;
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct MixingConfig {
    pub p: usize,
    pub ell: usize,
    /// Static-noise variance relative to the mean latent variance.
    pub noise_scale: f64,
    pub seed: u64,
}

impl MixingConfig {
    pub fn new(p: usize, ell: usize, seed: u64) -> Self {
        Self {
            p,
            ell,
            noise_scale: 1.0,
            seed,
        }
    }
}

/// Ground-truth loadings: orthonormal `P` (p×ℓ) and `P̄` (p×(p−ℓ)), drawn
/// independently so the two subspaces are oblique.
#[derive(Debug, Clone, PartialEq)]
pub struct Loadings {
    pub p: Matrix,
    pub pbar: Matrix,
    /// Condition number of `[P P̄]`.
    pub condition: f64,
}

impl Loadings {
    pub fn random(p: usize, ell: usize, seed: u64) -> Result<Self> {
        if ell == 0 || ell > p {
            return Err(Error::DimensionMismatch(format!(
                "need 1 <= ell <= p (ell={ell}, p={p})"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..1000 {
            let lp = numerics::orthonormalize(&gaussian(p, ell, &mut rng), 1e-12);
            let lbar = if ell < p {
                numerics::orthonormalize(&gaussian(p, p - ell, &mut rng), 1e-12)
            } else {
                Ok(Matrix::zeros(p, 0))
            };
            let (Ok(lp), Ok(lbar)) = (lp, lbar) else {
                continue;
            };
            let mut full = Matrix::zeros(p, p);
            full.columns_mut(0, ell).copy_from(&lp);
            full.columns_mut(ell, p - ell).copy_from(&lbar);
            let sv = full.singular_values();
            let condition = sv.max() / sv.min();
            if condition <= MAX_LOADING_CONDITION {
                return Ok(Self {
                    p: lp,
                    pbar: lbar,
                    condition,
                });
            }
        }
        Err(Error::InvalidArgument(format!(
            "could not draw loadings with condition <= {MAX_LOADING_CONDITION} for p={p}, ell={ell}"
        )))
    }

    /// `[R R̄] = [P P̄]^{-T}`.
    pub fn weights(&self) -> Result<(Matrix, Matrix)> {
        let (p, ell) = (self.p.nrows(), self.p.ncols());
        let mut full = Matrix::zeros(p, p);
        full.columns_mut(0, ell).copy_from(&self.p);
        full.columns_mut(ell, p - ell).copy_from(&self.pbar);
        let inv = full
            .try_inverse()
            .ok_or(Error::SingularCrossProduct { condition: 0.0 })?
            .transpose();
        Ok((
            inv.columns(0, ell).into_owned(),
            inv.columns(ell, p - ell).into_owned(),
        ))
    }
}

fn gaussian(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

/// Mixed observations together with what generated them.
#[derive(Debug, Clone)]
pub struct MixedSeries {
    pub y: TimeSeries,
    pub loadings: Loadings,
    /// Static noise scores `ε̄`, n×(p−ℓ).
    pub static_noise: Matrix,
    pub noise_variance: f64,
}

/// `y_k = P v_k + P̄ ε̄_k` with `ε̄_k ~ N(0, σ² I)` drawn from `noise_seed`.
pub fn mix_with_loadings(
    latent: &Matrix,
    loadings: &Loadings,
    noise_scale: f64,
    noise_seed: u64,
) -> Result<MixedSeries> {
    let (n, ell) = latent.shape();
    if ell != loadings.p.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "latent has {ell} columns, loadings have {}",
            loadings.p.ncols()
        )));
    }
    if !(noise_scale >= 0.0) {
        return Err(Error::InvalidArgument("noise_scale must be >= 0".into()));
    }
    let mean_var = mean_variance(latent);
    let variance = noise_scale * mean_var;
    let q = loadings.pbar.ncols();
    let mut rng = ChaCha8Rng::seed_from_u64(noise_seed);
    let noise = gaussian(n, q, &mut rng) * variance.sqrt();
    let y = latent * loadings.p.transpose() + &noise * loadings.pbar.transpose();
    Ok(MixedSeries {
        y: TimeSeries::new(y)?,
        loadings: loadings.clone(),
        static_noise: noise,
        noise_variance: variance,
    })
}

/// Mean over columns of the (1/n) sample variance.
fn mean_variance(m: &Matrix) -> f64 {
    let n = m.nrows().max(1) as f64;
    let k = m.ncols().max(1) as f64;
    m.column_iter()
        .map(|c| {
            let mean = c.sum() / n;
            c.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n
        })
        .sum::<f64>()
        / k
}

/// Draws loadings and noise from `cfg.seed` and mixes `latent` (n×ℓ).
pub fn mix_observations(latent: &Matrix, cfg: &MixingConfig) -> Result<MixedSeries> {
    if latent.ncols() != cfg.ell {
        return Err(Error::DimensionMismatch(format!(
            "latent has {} columns, config says ell = {}",
            latent.ncols(),
            cfg.ell
        )));
    }
    let loadings = Loadings::random(cfg.p, cfg.ell, cfg.seed)?;
    mix_with_loadings(latent, &loadings, cfg.noise_scale, cfg.seed.wrapping_add(1))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RrvarConfig {
    pub p: usize,
    pub ell: usize,
    pub s: usize,
    pub n: usize,
    pub seed: u64,
    /// Target spectral radius of the latent companion matrix; 0 gives `B = 0`.
    pub spectral_radius: f64,
    /// `Σ_ε̄ = static_variance · I`.
    pub static_variance: f64,
}

impl RrvarConfig {
    pub fn new(p: usize, ell: usize, s: usize, n: usize, seed: u64, spectral_radius: f64) -> Self {
        Self {
            p,
            ell,
            s,
            n,
            seed,
            spectral_radius,
            static_variance: 1.0,
        }
    }
}

/// Random canonical model with the requested latent spectral radius and its
/// simulated series. `Σ_ε = I`.
pub fn rrvar_series(cfg: &RrvarConfig) -> Result<(TimeSeries, PredVarModel)> {
    let (p, ell, s) = (cfg.p, cfg.ell, cfg.s);
    if ell == 0 || ell > p || s == 0 {
        return Err(Error::InvalidArgument(format!(
            "need 1 <= ell <= p and s >= 1 (p={p}, ell={ell}, s={s})"
        )));
    }
    if !(0.0..1.0).contains(&cfg.spectral_radius) || !(cfg.static_variance >= 0.0) {
        return Err(Error::InvalidArgument(
            "spectral_radius must lie in [0, 1) and static_variance >= 0".into(),
        ));
    }
    let loadings = Loadings::random(p, ell, cfg.seed)?;
    let (weights, static_weights) = loadings.weights()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(0x5eed));
    let mut coefs: Vec<Matrix> = (0..s).map(|_| gaussian(ell, ell, &mut rng)).collect();
    let radius = spectral_radius(&coefs);
    if cfg.spectral_radius == 0.0 || radius == 0.0 {
        coefs.iter_mut().for_each(|b| b.fill(0.0));
    } else {
        // B_j → c^j B_j scales every companion eigenvalue by c
        let c = cfg.spectral_radius / radius;
        for (j, b) in coefs.iter_mut().enumerate() {
            *b *= c.powi(j as i32 + 1);
        }
    }
    let q = p - ell;
    let sigma_eps = Matrix::identity(ell, ell);
    let sigma_static = Matrix::identity(q, q) * cfg.static_variance;
    let sigma_e = &loadings.p * &sigma_eps * loadings.p.transpose()
        + &loadings.pbar * &sigma_static * loadings.pbar.transpose();
    let truth = PredVarModel {
        p,
        ell,
        s,
        r: p,
        mean: Vector::zeros(p),
        loadings: loadings.p,
        static_loadings: loadings.pbar,
        weights,
        static_weights,
        coefs,
        sigma_eps,
        sigma_static,
        sigma_e,
        norm: NormalizationTransform::identity(p),
    };
    let y = truth.simulate(cfg.n, cfg.seed.wrapping_add(1))?;
    Ok((y, truth))
}
