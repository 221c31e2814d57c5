//! Monte-Carlo comparison on Lorenz-driven data: one latent trajectory and
//! one set of loadings, fresh static noise per trial.

use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;

use crate::data::TimeSeries;
use crate::datagen::{lorenz_series, mix_with_loadings, Loadings, LorenzConfig};
use crate::error::{Error, Result};
use crate::estimation::{fit, FitOptions, Variant};
use crate::metrics::{avg_correlation, d_distance};
use crate::numerics::Matrix;

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkConfig {
    pub trials: usize,
    pub variants: Vec<Variant>,
    pub n: usize,
    pub train: usize,
    pub p: usize,
    pub ell: usize,
    pub s: usize,
    pub noise_scale: f64,
    /// Loadings come from this seed; trial `t` uses noise seed `seed_base + t + 1`.
    pub seed_base: u64,
    pub threads: usize,
    /// Record wall-clock training time (makes output run-dependent).
    pub timing: bool,
    pub lorenz: LorenzConfig,
}

impl BenchmarkConfig {
    pub fn new(trials: usize, variants: Vec<Variant>) -> Self {
        Self {
            trials,
            variants,
            n: 10_000,
            train: 7000,
            p: 6,
            ell: 3,
            s: 2,
            noise_scale: 1.0,
            seed_base: 0,
            threads: 1,
            timing: false,
            lorenz: LorenzConfig::default(),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.trials == 0 || self.variants.is_empty() {
            return Err(Error::InvalidArgument("need at least one trial and one variant".into()));
        }
        if self.train <= self.s || self.train >= self.n {
            return Err(Error::InvalidArgument(format!(
                "train split {} must lie in ({}, {})",
                self.train, self.s, self.n
            )));
        }
        if self.p < 3 {
            return Err(Error::InvalidArgument("the Lorenz latent series needs p >= 3".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkRow {
    pub trial: usize,
    pub seed: u64,
    pub variant: Variant,
    pub d_distance: f64,
    /// `P̂v` against `P v_true`.
    pub avg_corr_reconstruction: f64,
    /// `P̂v̂` against `P v_true`.
    pub avg_corr_prediction: f64,
    /// `P̂v̂` against `P̂v`.
    pub avg_corr_recon_vs_pred: f64,
    pub train_time: Option<f64>,
    pub failed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Quantiles {
    pub min: f64,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
    pub max: f64,
}

impl Quantiles {
    /// Linear-interpolation quantiles; `None` for an empty sample.
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let q = |f: f64| {
            let pos = f * (v.len() - 1) as f64;
            let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
            v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
        };
        Some(Self {
            min: v[0],
            q25: q(0.25),
            median: q(0.5),
            q75: q(0.75),
            max: v[v.len() - 1],
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VariantSummary {
    pub variant: Variant,
    pub failures: usize,
    pub d_distance: Option<Quantiles>,
    pub avg_corr_reconstruction: Option<Quantiles>,
    pub avg_corr_prediction: Option<Quantiles>,
    pub avg_corr_recon_vs_pred: Option<Quantiles>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkReport {
    /// Trial-major, variants in the configured order.
    pub rows: Vec<BenchmarkRow>,
    pub timing: bool,
}

/// Ground truth shared by every trial.
struct Setup {
    latent: Matrix,
    loadings: Loadings,
}

fn metrics_for(
    cfg: &BenchmarkConfig,
    setup: &Setup,
    y: &TimeSeries,
    variant: Variant,
) -> Result<(f64, f64, f64, f64, f64)> {
    let opts = FitOptions::new(cfg.ell, cfg.s).with_variant(variant);
    let train = y.rows(0..cfg.train);
    let start = Instant::now();
    let (model, _) = fit(&train, &opts)?;
    let elapsed = start.elapsed().as_secs_f64();

    let test = y.rows(cfg.train - cfg.s..cfg.n);
    let horizon = cfg.n - cfg.train;
    let pred = model.predict_one_step(&test)?;
    let scores = model.latent_scores(&test)?.rows(cfg.s, horizon).into_owned();
    let truth = setup.latent.rows(cfg.train, horizon) * setup.loadings.p.transpose();
    let recon = &scores * model.loadings.transpose();
    let predicted = &pred.vhat * model.loadings.transpose();
    Ok((
        d_distance(&model.loadings, &setup.loadings.p)?,
        avg_correlation(&recon, &truth)?,
        avg_correlation(&predicted, &truth)?,
        avg_correlation(&predicted, &recon)?,
        elapsed,
    ))
}

fn run_trial(cfg: &BenchmarkConfig, setup: &Setup, trial: usize) -> Vec<BenchmarkRow> {
    let seed = cfg.seed_base.wrapping_add(trial as u64 + 1);
    let mixed = mix_with_loadings(&setup.latent, &setup.loadings, cfg.noise_scale, seed);
    cfg.variants
        .iter()
        .map(|&variant| {
            let outcome = mixed
                .as_ref()
                .map_err(|e| Error::InvalidArgument(e.to_string()))
                .and_then(|m| metrics_for(cfg, setup, &m.y, variant));
            match outcome {
                Ok((d, rc, pc, rvp, t)) => BenchmarkRow {
                    trial,
                    seed,
                    variant,
                    d_distance: d,
                    avg_corr_reconstruction: rc,
                    avg_corr_prediction: pc,
                    avg_corr_recon_vs_pred: rvp,
                    train_time: cfg.timing.then_some(t),
                    failed: false,
                },
                Err(e) => {
                    log::warn!("trial {trial} ({variant}) failed: {e}");
                    BenchmarkRow {
                        trial,
                        seed,
                        variant,
                        d_distance: f64::NAN,
                        avg_corr_reconstruction: f64::NAN,
                        avg_corr_prediction: f64::NAN,
                        avg_corr_recon_vs_pred: f64::NAN,
                        train_time: None,
                        failed: true,
                    }
                }
            }
        })
        .collect()
}

pub fn run_benchmark(cfg: &BenchmarkConfig) -> Result<BenchmarkReport> {
    cfg.validate()?;
    let lorenz = LorenzConfig {
        n_samples: cfg.n,
        ..cfg.lorenz.clone()
    };
    let setup = Setup {
        latent: lorenz_series(&lorenz)?,
        loadings: Loadings::random(cfg.p, 3, cfg.seed_base)?,
    };
    let per_trial: Vec<Vec<BenchmarkRow>> = if cfg.threads == 1 {
        (0..cfg.trials).map(|t| run_trial(cfg, &setup, t)).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.threads)
            .build()
            .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
        pool.install(|| {
            (0..cfg.trials)
                .into_par_iter()
                .map(|t| run_trial(cfg, &setup, t))
                .collect()
        })
    };
    Ok(BenchmarkReport {
        rows: per_trial.into_iter().flatten().collect(),
        timing: cfg.timing,
    })
}

impl BenchmarkReport {
    pub fn rows_for(&self, variant: Variant) -> impl Iterator<Item = &BenchmarkRow> {
        self.rows.iter().filter(move |r| r.variant == variant)
    }

    pub fn summary(&self) -> Vec<VariantSummary> {
        let mut variants: Vec<Variant> = Vec::new();
        for r in &self.rows {
            if !variants.contains(&r.variant) {
                variants.push(r.variant);
            }
        }
        variants
            .into_iter()
            .map(|variant| {
                let ok: Vec<&BenchmarkRow> = self.rows_for(variant).filter(|r| !r.failed).collect();
                let pick = |f: fn(&BenchmarkRow) -> f64| {
                    Quantiles::of(&ok.iter().map(|r| f(r)).collect::<Vec<_>>())
                };
                VariantSummary {
                    variant,
                    failures: self.rows_for(variant).filter(|r| r.failed).count(),
                    d_distance: pick(|r| r.d_distance),
                    avg_corr_reconstruction: pick(|r| r.avg_corr_reconstruction),
                    avg_corr_prediction: pick(|r| r.avg_corr_prediction),
                    avg_corr_recon_vs_pred: pick(|r| r.avg_corr_recon_vs_pred),
                }
            })
            .collect()
    }

    /// One row per trial and variant. Failed rows leave the metric cells empty.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let csv_err = |e: csv::Error| Error::Io(std::io::Error::other(e));
        let mut header = vec![
            "trial",
            "seed",
            "variant",
            "d_distance",
            "avg_corr_reconstruction",
            "avg_corr_prediction",
            "avg_corr_recon_vs_pred",
        ];
        if self.timing {
            header.push("train_time");
        }
        header.push("failed");
        w.write_record(&header).map_err(csv_err)?;
        for r in &self.rows {
            let num = |v: f64| if r.failed { String::new() } else { v.to_string() };
            let mut rec = vec![
                r.trial.to_string(),
                r.seed.to_string(),
                r.variant.to_string(),
                num(r.d_distance),
                num(r.avg_corr_reconstruction),
                num(r.avg_corr_prediction),
                num(r.avg_corr_recon_vs_pred),
            ];
            if self.timing {
                rec.push(r.train_time.map(|t| t.to_string()).unwrap_or_default());
            }
            rec.push(r.failed.to_string());
            w.write_record(&rec).map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(trials: usize) -> BenchmarkConfig {
        BenchmarkConfig {
            n: 1500,
            train: 1000,
            lorenz: LorenzConfig {
                n_samples: 1500,
                ..LorenzConfig::default()
            },
            ..BenchmarkConfig::new(trials, vec![Variant::PredVar, Variant::OneShot])
        }
    }

    #[test]
    fn quantiles_by_hand() {
        let q = Quantiles::of(&[4.0, 1.0, 3.0, 2.0, 5.0]).unwrap();
        assert_eq!((q.min, q.q25, q.median, q.q75, q.max), (1.0, 2.0, 3.0, 4.0, 5.0));
        let q = Quantiles::of(&[1.0, 2.0]).unwrap();
        assert_eq!(q.median, 1.5);
        assert!(Quantiles::of(&[]).is_none());
    }

    #[test]
    fn rows_and_determinism() {
        let cfg = small(3);
        let a = run_benchmark(&cfg).unwrap();
        assert_eq!(a.rows.len(), 6);
        assert!(a.rows.iter().all(|r| !r.failed && r.train_time.is_none()));
        assert_eq!(a.rows[2].seed, 2);
        let b = run_benchmark(&BenchmarkConfig { threads: 3, ..cfg }).unwrap();
        assert_eq!(a, b);
        let mut buf = Vec::new();
        a.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 7);
        assert!(!text.contains("train_time"));
    }

    #[test]
    fn failures_are_recorded() {
        // ell > p can never be fitted
        let cfg = BenchmarkConfig { ell: 7, ..small(2) };
        let rep = run_benchmark(&cfg).unwrap();
        assert_eq!(rep.rows.len(), 4);
        assert!(rep.rows.iter().all(|r| r.failed));
        assert_eq!(rep.summary()[0].failures, 2);
        assert!(rep.summary()[0].d_distance.is_none());
    }
}
