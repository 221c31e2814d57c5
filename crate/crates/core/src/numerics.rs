//! Dense linear-algebra kernel.
//!
//! Everything above this module goes through three primitives: a symmetric
//! eigendecomposition with a reproducible ordering and sign convention, a
//! QR-based least-squares solve, and orthogonal projection onto a column span.
//! Projections are applied as `Q (Qᵀ y)` so no N×N projector is ever formed
//! inside the estimation loop; [`projector`] exists for small problems and tests.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Relative rank tolerance on the eigenvalues of `xᵀx`.
pub const RANK_TOL: f64 = 1e-12;

/// Eigenpairs of a symmetric matrix, eigenvalues non-increasing.
#[derive(Debug, Clone)]
pub struct SymEvd {
    pub eigenvalues: Vector,
    pub eigenvectors: Matrix,
}

pub fn max_abs(m: &Matrix) -> f64 {
    m.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

pub fn ensure_finite(m: &Matrix, what: &'static str) -> Result<()> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFiniteInput(what))
    }
}

/// Flip each column so its largest-magnitude entry is non-negative.
/// Ties go to the lowest row index.
pub fn apply_sign_convention(m: &mut Matrix) {
    for j in 0..m.ncols() {
        let mut best = 0usize;
        let mut best_abs = -1.0;
        for i in 0..m.nrows() {
            let a = m[(i, j)].abs();
            if a > best_abs {
                best_abs = a;
                best = i;
            }
        }
        if m.nrows() > 0 && m[(best, j)] < 0.0 {
            m.column_mut(j).neg_mut();
        }
    }
}

pub fn sym_evd(a: &Matrix) -> Result<SymEvd> {
    if a.nrows() != a.ncols() {
        return Err(Error::NonSquare {
            rows: a.nrows(),
            cols: a.ncols(),
        });
    }
    ensure_finite(a, "sym_evd input")?;
    let n = a.nrows();
    if n == 0 {
        return Ok(SymEvd {
            eigenvalues: Vector::zeros(0),
            eigenvectors: Matrix::zeros(0, 0),
        });
    }
    let asym = max_abs(&(a - a.transpose()));
    if asym > 1e-8 * max_abs(a).max(1.0) {
        log::warn!("sym_evd: input asymmetry {asym:.3e} exceeds tolerance; symmetrizing");
    }
    let sym = (a + a.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        eig.eigenvalues[j]
            .partial_cmp(&eig.eigenvalues[i])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let eigenvalues = Vector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut eigenvectors = Matrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        eigenvectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    apply_sign_convention(&mut eigenvectors);
    Ok(SymEvd {
        eigenvalues,
        eigenvectors,
    })
}

/// Thin QR factorization of a full-column-rank design, reusable for
/// repeated solves and projections against the same design.
#[derive(Debug, Clone)]
pub struct LeastSquares {
    q: Matrix,
    r: Matrix,
    condition: f64,
}

impl LeastSquares {
    pub fn new(x: &Matrix, context: &str) -> Result<Self> {
        Self::with_tol(x, context, RANK_TOL)
    }

    pub fn with_tol(x: &Matrix, context: &str, tol: f64) -> Result<Self> {
        ensure_finite(x, "least-squares design")?;
        let (m, n) = x.shape();
        if n == 0 {
            return Ok(Self {
                q: Matrix::zeros(m, 0),
                r: Matrix::zeros(0, 0),
                condition: 1.0,
            });
        }
        if m < n {
            return Err(Error::RankDeficientDesign {
                context: format!("{context} ({m} rows < {n} columns)"),
                condition: 0.0,
            });
        }
        let qr = x.clone().qr();
        let q = qr.q();
        let r = qr.r();
        // eigenvalues of xᵀx are the squared singular values of R
        let sv = r.singular_values();
        let smax = sv.max();
        let smin = sv.min();
        let condition = if smax > 0.0 { (smin / smax).powi(2) } else { 0.0 };
        if !(condition > tol) {
            return Err(Error::RankDeficientDesign {
                context: context.to_string(),
                condition,
            });
        }
        Ok(Self { q, r, condition })
    }

    /// Ratio of smallest to largest eigenvalue of `xᵀx`.
    pub fn condition(&self) -> f64 {
        self.condition
    }

    pub fn solve(&self, y: &Matrix) -> Result<Matrix> {
        if y.nrows() != self.q.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "lstsq: design has {} rows, response has {}",
                self.q.nrows(),
                y.nrows()
            )));
        }
        let qty = self.q.transpose() * y;
        self.r
            .solve_upper_triangular(&qty)
            .ok_or_else(|| Error::RankDeficientDesign {
                context: "triangular solve".into(),
                condition: self.condition,
            })
    }

    /// `Π_x y` without forming `Π_x`.
    pub fn project(&self, y: &Matrix) -> Matrix {
        &self.q * (self.q.transpose() * y)
    }

    pub fn orthonormal_basis(&self) -> &Matrix {
        &self.q
    }
}

pub fn lstsq(x: &Matrix, y: &Matrix) -> Result<Matrix> {
    LeastSquares::new(x, "lstsq")?.solve(y)
}

pub fn projector(x: &Matrix) -> Result<Matrix> {
    let ls = LeastSquares::new(x, "projector")?;
    Ok(&ls.q * ls.q.transpose())
}

/// Orthonormal basis of the column span of `x`, with the sign convention applied.
pub fn orthonormalize(x: &Matrix, tol: f64) -> Result<Matrix> {
    let ls = LeastSquares::with_tol(x, "orthonormalize", tol).map_err(|e| match e {
        Error::RankDeficientDesign { .. } => Error::RankDeficientBasis {
            rank: numerical_rank(x, tol.sqrt()),
            cols: x.ncols(),
        },
        other => other,
    })?;
    let mut q = ls.q;
    apply_sign_convention(&mut q);
    Ok(q)
}

/// Number of singular values above `tol` times the largest one.
pub fn numerical_rank(x: &Matrix, tol: f64) -> usize {
    if x.is_empty() {
        return 0;
    }
    let sv = x.clone().singular_values();
    let smax = sv.max();
    if smax <= 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > tol * smax).count()
}

/// Symmetric square root factor `L` with `L Lᵀ = a` for a PSD matrix.
/// Eigenvalues within `-1e-10·max(1, λ_max)` of zero are clipped.
pub fn psd_factor(a: &Matrix, what: &'static str) -> Result<Matrix> {
    let evd = sym_evd(a)?;
    let n = a.nrows();
    if n == 0 {
        return Ok(Matrix::zeros(0, 0));
    }
    let lmax = evd.eigenvalues[0].max(1.0);
    let lmin = evd.eigenvalues[n - 1];
    if lmin < -1e-10 * lmax {
        return Err(Error::NotPsd(what, lmin));
    }
    let mut scaled = evd.eigenvectors.clone();
    for j in 0..n {
        let s = evd.eigenvalues[j].max(0.0).sqrt();
        scaled.column_mut(j).scale_mut(s);
    }
    Ok(scaled)
}

/// Moore-Penrose inverse of a symmetric matrix restricted to eigenvalues
/// above `tol · max(λ_max, 0)`. Also returns the log pseudo-determinant and rank.
pub fn sym_pinv(a: &Matrix, tol: f64) -> Result<(Matrix, f64, usize)> {
    let evd = sym_evd(a)?;
    let n = a.nrows();
    let mut inv = Matrix::zeros(n, n);
    let mut logdet = 0.0;
    let mut rank = 0;
    if n == 0 {
        return Ok((inv, 0.0, 0));
    }
    let cutoff = tol * evd.eigenvalues[0].max(0.0);
    for j in 0..n {
        let l = evd.eigenvalues[j];
        if l > cutoff && l > 0.0 {
            let col = evd.eigenvectors.column(j);
            inv += (col * col.transpose()) / l;
            logdet += l.ln();
            rank += 1;
        }
    }
    Ok((inv, logdet, rank))
}

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &Matrix, b: &Matrix) -> Matrix {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    let mut out = Matrix::zeros(ar * br, ac * bc);
    for i in 0..ar {
        for j in 0..ac {
            let aij = a[(i, j)];
            out.view_mut((i * br, j * bc), (br, bc))
                .copy_from(&(b * aij));
        }
    }
    out
}
