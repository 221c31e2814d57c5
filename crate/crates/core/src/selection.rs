//! Choosing the latent dimension and VAR order from a grid of fits.

use rayon::prelude::*;

use crate::data::TimeSeries;
use crate::error::{Error, Result};
use crate::estimation::{fit, FitOptions};

/// Factors with `1 − λ` at or below this are treated as perfectly predicted.
const PERFECT_FLOOR: f64 = 1e-12;

fn check_domain(spectrum: &[f64], s: usize, n: usize) -> Result<f64> {
    let s_ell = s * spectrum.len();
    if s_ell >= n {
        return Err(Error::PenaltyDomain { s_ell, n });
    }
    if let Some(l) = spectrum.iter().find(|l| !(-1e-8..=1.0 + 1e-8).contains(*l)) {
        return Err(Error::InvalidArgument(format!(
            "spectrum value {l} outside [0, 1]"
        )));
    }
    Ok(s_ell as f64 / n as f64)
}

fn residual_factors(spectrum: &[f64]) -> impl Iterator<Item = f64> + '_ {
    spectrum
        .iter()
        .map(|l| 1.0 - l.clamp(0.0, 1.0))
        .filter(|f| *f > PERFECT_FLOOR)
}

/// `((1 + sℓ/N)/(1 − sℓ/N))^ℓ · Π (1 − λᵢ)` over non-degenerate factors.
pub fn rrmfpe(spectrum: &[f64], s: usize, n: usize) -> Result<f64> {
    let ratio = check_domain(spectrum, s, n)?;
    let penalty = ((1.0 + ratio) / (1.0 - ratio)).powi(spectrum.len() as i32);
    Ok(penalty * residual_factors(spectrum).product::<f64>())
}

/// `Σ log(1 − λᵢ) + 2sℓ²/N` over non-degenerate factors.
pub fn log_rrmfpe(spectrum: &[f64], s: usize, n: usize) -> Result<f64> {
    let ratio = check_domain(spectrum, s, n)?;
    let ell = spectrum.len() as f64;
    Ok(residual_factors(spectrum).map(f64::ln).sum::<f64>() + 2.0 * ratio * ell)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridEntry {
    pub ell: usize,
    pub s: usize,
    pub rrmfpe: Option<f64>,
    pub log_rrmfpe: Option<f64>,
    /// Leading `ℓ` eigenvalues of the final fit.
    pub spectrum: Vec<f64>,
    pub converged: bool,
    /// Set when the fit for this cell failed.
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionGrid {
    /// Row-major over `(ℓ, s)` in the order the ranges were given.
    pub entries: Vec<GridEntry>,
    pub best: (usize, usize),
}

impl SelectionGrid {
    pub fn best_entry(&self) -> &GridEntry {
        self.entries
            .iter()
            .find(|e| (e.ell, e.s) == self.best)
            .expect("best cell is in the grid")
    }
}

fn evaluate(y: &TimeSeries, ell: usize, s: usize, base: &FitOptions) -> GridEntry {
    let opts = FitOptions { ell, s, ..base.clone() };
    let mut entry = GridEntry {
        ell,
        s,
        rrmfpe: None,
        log_rrmfpe: None,
        spectrum: Vec::new(),
        converged: false,
        error: None,
    };
    let n = y.nrows().saturating_sub(s);
    let outcome = fit(y, &opts).and_then(|(_, report)| {
        let spectrum: Vec<f64> = report
            .final_spectrum
            .iter()
            .take(ell)
            .map(|l| l.clamp(0.0, 1.0))
            .collect();
        let value = rrmfpe(&spectrum, s, n)?;
        let log_value = log_rrmfpe(&spectrum, s, n)?;
        Ok((spectrum, value, log_value, report.converged))
    });
    match outcome {
        Ok((spectrum, value, log_value, converged)) => {
            entry.spectrum = spectrum;
            entry.rrmfpe = Some(value);
            entry.log_rrmfpe = Some(log_value);
            entry.converged = converged;
        }
        Err(e) => {
            log::warn!("cell (ell={ell}, s={s}) failed: {e}");
            entry.error = Some(e.to_string());
        }
    }
    entry
}

/// Fits every `(ℓ, s)` cell and picks the converged cell with the smallest
/// log-RRMFPE, preferring smaller `ℓ` and then smaller `s` on ties.
///
/// `threads = 1` runs sequentially; `0` uses rayon's default pool size.
/// The result does not depend on the thread count.
pub fn select(
    y: &TimeSeries,
    ells: &[usize],
    orders: &[usize],
    base: &FitOptions,
    threads: usize,
) -> Result<SelectionGrid> {
    if ells.is_empty() || orders.is_empty() {
        return Err(Error::InvalidArgument("empty (ell, s) grid".into()));
    }
    let cells: Vec<(usize, usize)> = ells
        .iter()
        .flat_map(|&l| orders.iter().map(move |&s| (l, s)))
        .collect();
    let entries: Vec<GridEntry> = if threads == 1 {
        cells.iter().map(|&(l, s)| evaluate(y, l, s, base)).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
        pool.install(|| {
            cells
                .par_iter()
                .map(|&(l, s)| evaluate(y, l, s, base))
                .collect()
        })
    };
    let best = entries
        .iter()
        .filter(|e| e.converged)
        .filter_map(|e| e.log_rrmfpe.map(|v| (v, e.ell, e.s)))
        .min_by(|a, b| {
            a.0.partial_cmp(&b.0)
                .unwrap()
                .then(a.1.cmp(&b.1))
                .then(a.2.cmp(&b.2))
        })
        .map(|(_, l, s)| (l, s))
        .ok_or(Error::AllCellsFailed)?;
    Ok(SelectionGrid { entries, best })
}
