//! File formats: CSV series and the JSON model document.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::data::TimeSeries;
use crate::error::{Error, Result};
use crate::estimation::{FitReport, Variant};
use crate::model::{NormalizationTransform, PredVarModel};
use crate::numerics::{Matrix, Vector};

pub const SCHEMA_VERSION: u32 = 1;

/// Reads a headed CSV of observations, rows = time, columns = variables.
///
/// Row numbers in errors count data rows from 1 (the header is row 0);
/// columns count from 1.
pub fn read_csv<R: Read>(reader: R) -> Result<(Vec<String>, TimeSeries)> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| Error::CsvParse { row: 0, col: 0, msg: e.to_string() })?
        .iter()
        .map(str::to_owned)
        .collect();
    let p = header.len();
    if p == 0 || header.iter().all(String::is_empty) {
        return Err(Error::CsvParse { row: 0, col: 0, msg: "missing header".into() });
    }
    let mut values = Vec::new();
    let mut rows = 0;
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| Error::CsvParse { row, col: 0, msg: e.to_string() })?;
        if rec.len() != p {
            return Err(Error::CsvParse {
                row,
                col: rec.len().min(p) + 1,
                msg: format!("expected {p} fields, found {}", rec.len()),
            });
        }
        for (j, cell) in rec.iter().enumerate() {
            let v: f64 = cell.parse().map_err(|_| Error::CsvParse {
                row,
                col: j + 1,
                msg: format!("not a number: {cell:?}"),
            })?;
            if !v.is_finite() {
                return Err(Error::CsvParse {
                    row,
                    col: j + 1,
                    msg: format!("non-finite value {cell:?}"),
                });
            }
            values.push(v);
        }
        rows += 1;
    }
    if rows == 0 {
        return Err(Error::CsvParse { row: 1, col: 0, msg: "no data rows".into() });
    }
    let m = Matrix::from_row_slice(rows, p, &values);
    Ok((header, TimeSeries::new(m)?))
}

/// Writes `m` under `header`, numbers in shortest round-trip form.
pub fn write_csv<W: Write>(writer: W, header: &[String], m: &Matrix) -> Result<()> {
    if header.len() != m.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "{} header names for {} columns",
            header.len(),
            m.ncols()
        )));
    }
    let mut w = csv::Writer::from_writer(writer);
    let csv_err = |e: csv::Error| Error::Io(std::io::Error::other(e));
    w.write_record(header).map_err(csv_err)?;
    let mut buf = Vec::with_capacity(m.ncols());
    for row in m.row_iter() {
        buf.clear();
        buf.extend(row.iter().map(|v| v.to_string()));
        w.write_record(&buf).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// `y1..yp`.
pub fn default_header(p: usize) -> Vec<String> {
    (1..=p).map(|j| format!("y{j}")).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRecord {
    pub variant: String,
    pub iterations: usize,
    pub converged: bool,
    pub objective_trace: Vec<f64>,
    pub final_spectrum: Vec<f64>,
}

impl From<&FitReport> for ReportRecord {
    fn from(r: &FitReport) -> Self {
        Self {
            variant: r.variant.to_string(),
            iterations: r.iterations,
            converged: r.converged,
            objective_trace: r.objective_trace.clone(),
            final_spectrum: r.final_spectrum.clone(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub command_line: String,
    /// SHA-256 of the input data file, hex encoded.
    pub data_digest: Option<String>,
    pub timestamp: Option<String>,
}

/// The JSON model document. Matrices are arrays of rows.
///
/// Field order is the serialization order, so writing a loaded document
/// reproduces it byte for byte.
#[allow(non_snake_case)]
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub schema_version: u32,
    pub p: usize,
    pub ell: usize,
    pub s: usize,
    pub r: usize,
    pub mean: Vec<f64>,
    pub U: Vec<Vec<f64>>,
    pub D: Vec<f64>,
    pub Utilde: Vec<Vec<f64>>,
    pub P: Vec<Vec<f64>>,
    pub Pbar: Vec<Vec<f64>>,
    pub R: Vec<Vec<f64>>,
    pub Rbar: Vec<Vec<f64>>,
    pub B: Vec<Vec<Vec<f64>>>,
    /// Absent for ground truth without a linear latent model.
    pub Sigma_eps: Option<Vec<Vec<f64>>>,
    pub Sigma_epsbar: Option<Vec<Vec<f64>>>,
    pub Sigma_e: Option<Vec<Vec<f64>>>,
    pub fit_report: Option<ReportRecord>,
    pub provenance: Provenance,
}

fn rows_of(m: &Matrix) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn matrix_of(name: &str, rows: &[Vec<f64>], nrows: usize, ncols: usize) -> Result<Matrix> {
    if rows.len() != nrows || rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::InvalidModel(format!(
            "{name} should be {nrows}x{ncols}"
        )));
    }
    Ok(Matrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

fn vector_of(name: &str, v: &[f64], len: usize) -> Result<Vector> {
    if v.len() != len {
        return Err(Error::InvalidModel(format!("{name} should have length {len}")));
    }
    Ok(Vector::from_column_slice(v))
}

impl ModelFile {
    pub fn from_model(m: &PredVarModel, report: Option<&FitReport>, provenance: Provenance) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            p: m.p,
            ell: m.ell,
            s: m.s,
            r: m.r,
            mean: m.mean.iter().copied().collect(),
            U: rows_of(&m.norm.u),
            D: m.norm.d.iter().copied().collect(),
            Utilde: rows_of(&m.norm.u_null),
            P: rows_of(&m.loadings),
            Pbar: rows_of(&m.static_loadings),
            R: rows_of(&m.weights),
            Rbar: rows_of(&m.static_weights),
            B: m.coefs.iter().map(rows_of).collect(),
            Sigma_eps: Some(rows_of(&m.sigma_eps)),
            Sigma_epsbar: Some(rows_of(&m.sigma_static)),
            Sigma_e: Some(rows_of(&m.sigma_e)),
            fit_report: report.map(ReportRecord::from),
            provenance,
        }
    }

    /// Truth document holding only the oblique decomposition `[P P̄]`, `[R R̄]`.
    pub fn loadings_only(p_mat: &Matrix, pbar: &Matrix, r_mat: &Matrix, rbar: &Matrix) -> Self {
        let (p, ell) = p_mat.shape();
        Self {
            schema_version: SCHEMA_VERSION,
            p,
            ell,
            s: 0,
            r: p,
            mean: vec![0.0; p],
            U: rows_of(&Matrix::identity(p, p)),
            D: vec![1.0; p],
            Utilde: vec![Vec::new(); p],
            P: rows_of(p_mat),
            Pbar: rows_of(pbar),
            R: rows_of(r_mat),
            Rbar: rows_of(rbar),
            B: Vec::new(),
            Sigma_eps: None,
            Sigma_epsbar: None,
            Sigma_e: None,
            fit_report: None,
            provenance: Provenance::default(),
        }
    }

    fn check_header(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::InvalidModel(format!(
                "unsupported schema_version {}",
                self.schema_version
            )));
        }
        if self.ell > self.p || self.r > self.p {
            return Err(Error::InvalidModel(format!(
                "inconsistent sizes p={}, ell={}, r={}",
                self.p, self.ell, self.r
            )));
        }
        Ok(())
    }

    /// `(P, P̄, R, R̄)` with shapes checked.
    pub fn decomposition(&self) -> Result<(Matrix, Matrix, Matrix, Matrix)> {
        self.check_header()?;
        let (p, ell) = (self.p, self.ell);
        Ok((
            matrix_of("P", &self.P, p, ell)?,
            matrix_of("Pbar", &self.Pbar, p, p - ell)?,
            matrix_of("R", &self.R, p, ell)?,
            matrix_of("Rbar", &self.Rbar, p, p - ell)?,
        ))
    }

    pub fn to_model(&self) -> Result<PredVarModel> {
        self.check_header()?;
        let (p, ell, s, r) = (self.p, self.ell, self.s, self.r);
        let q = p - ell;
        let (loadings, static_loadings, weights, static_weights) = self.decomposition()?;
        let need = |name: &str, m: &Option<Vec<Vec<f64>>>, n: usize| -> Result<Matrix> {
            match m {
                Some(rows) => matrix_of(name, rows, n, n),
                None => Err(Error::InvalidModel(format!("{name} is missing"))),
            }
        };
        let mean = vector_of("mean", &self.mean, p)?;
        let model = PredVarModel {
            p,
            ell,
            s,
            r,
            mean: mean.clone(),
            loadings,
            static_loadings,
            weights,
            static_weights,
            coefs: self
                .B
                .iter()
                .enumerate()
                .map(|(j, b)| matrix_of(&format!("B[{j}]"), b, ell, ell))
                .collect::<Result<_>>()?,
            sigma_eps: need("Sigma_eps", &self.Sigma_eps, ell)?,
            sigma_static: need("Sigma_epsbar", &self.Sigma_epsbar, q)?,
            sigma_e: need("Sigma_e", &self.Sigma_e, p)?,
            norm: NormalizationTransform {
                u: matrix_of("U", &self.U, p, r)?,
                d: vector_of("D", &self.D, r)?,
                u_null: matrix_of("Utilde", &self.Utilde, p, p - r)?,
                mean,
                rank_tol: 0.0,
            },
        };
        model.validate()?;
        Ok(model)
    }

    pub fn report(&self) -> Option<Result<FitReport>> {
        self.fit_report.as_ref().map(|rec| {
            let variant: Variant = rec.variant.parse()?;
            Ok(FitReport {
                variant,
                iterations: rec.iterations,
                converged: rec.converged,
                initial_objective: rec.objective_trace.first().copied().unwrap_or(0.0),
                objective_trace: rec.objective_trace.clone(),
                final_spectrum: rec.final_spectrum.clone(),
                subspace_deltas: Vec::new(),
            })
        })
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: Self = serde_json::from_str(text)?;
        file.check_header()?;
        Ok(file)
    }
}
