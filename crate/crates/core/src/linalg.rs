//! Dense real matrix primitives: pseudo-inverse, numerical rank, least
//! squares through the Gram matrix and residuals.
//!
//! Pseudo-inverse and rank both go through a singular-value decomposition
//! (faer) with a relative cutoff: singular values at or below
//! `rel_tol * σ_max` count as zero.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Conventional cutoff `max(rows, cols) * ε`.
pub fn default_rel_tol(rows: usize, cols: usize) -> f64 {
    rows.max(cols).max(1) as f64 * f64::EPSILON
}

fn ensure_finite(values: &[f64], what: &str) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::invalid(format!("{what} contains non-finite entries")))
    }
}

fn ensure_tol(rel_tol: f64) -> Result<()> {
    if rel_tol.is_finite() && rel_tol > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("rel_tol must be positive, got {rel_tol}")))
    }
}

struct Decomposition {
    u: Matrix,
    v_t: Matrix,
    sigma: Vector,
    cutoff: f64,
}

impl Decomposition {
    fn of(m: &Matrix, rel_tol: f64) -> Result<Self> {
        let (rows, cols) = m.shape();
        let fm = faer::Mat::<f64>::from_fn(rows, cols, |i, j| m[(i, j)]);
        let svd = fm
            .thin_svd()
            .map_err(|e| Error::invalid(format!("singular value decomposition failed: {e:?}")))?;
        let (u, v, s) = (svd.U(), svd.V(), svd.S().column_vector());
        let k = s.nrows();
        let sigma = Vector::from_fn(k, |i, _| s[i]);
        let sigma_max = sigma.iter().copied().fold(0.0, f64::max);
        Ok(Decomposition {
            u: Matrix::from_fn(rows, k, |i, j| u[(i, j)]),
            v_t: Matrix::from_fn(k, cols, |i, j| v[(j, i)]),
            sigma,
            cutoff: rel_tol * sigma_max,
        })
    }

    fn rank(&self) -> usize {
        self.sigma
            .iter()
            .filter(|&&s| s > self.cutoff && s > 0.0)
            .count()
    }

    fn pinv(&self) -> Matrix {
        let (rows, cols) = (self.u.nrows(), self.v_t.ncols());
        let mut out = Matrix::zeros(cols, rows);
        for (k, &s) in self.sigma.iter().enumerate() {
            if s <= self.cutoff || s == 0.0 {
                continue;
            }
            let inv = 1.0 / s;
            // out += v_k * inv * u_k^T
            for j in 0..rows {
                let uj = self.u[(j, k)] * inv;
                if uj == 0.0 {
                    continue;
                }
                for i in 0..cols {
                    out[(i, j)] += self.v_t[(k, i)] * uj;
                }
            }
        }
        out
    }
}

/// Moore-Penrose pseudo-inverse.
pub fn pinv(m: &Matrix, rel_tol: f64) -> Result<Matrix> {
    ensure_finite(m.as_slice(), "matrix")?;
    ensure_tol(rel_tol)?;
    if m.is_empty() {
        return Ok(Matrix::zeros(m.ncols(), m.nrows()));
    }
    Ok(Decomposition::of(m, rel_tol)?.pinv())
}

/// Number of singular values exceeding `rel_tol * σ_max`; 0 for the zero
/// matrix.
pub fn numerical_rank(m: &Matrix, rel_tol: f64) -> Result<usize> {
    ensure_finite(m.as_slice(), "matrix")?;
    ensure_tol(rel_tol)?;
    if m.is_empty() {
        return Ok(0);
    }
    Ok(Decomposition::of(m, rel_tol)?.rank())
}

/// Solution of the normal equations `G β = b` through `G†`, together with
/// the numerical rank of `G` under the same cutoff.
#[derive(Debug, Clone)]
pub struct GramSolution {
    pub beta: Vector,
    pub rank: usize,
}

/// Solves `β = G† b` for a symmetric Gram matrix `G = XᵀX` and `b = XᵀY`.
///
/// `rel_tol = None` selects [`default_rel_tol`] for the Gram dimensions.
pub fn solve_gram(gram: &Matrix, xty: &Vector, rel_tol: Option<f64>) -> Result<GramSolution> {
    let p = gram.nrows();
    if gram.ncols() != p || xty.len() != p {
        return Err(Error::shape(format!(
            "Gram matrix {}x{} incompatible with right-hand side of length {}",
            gram.nrows(),
            gram.ncols(),
            xty.len()
        )));
    }
    if p == 0 {
        return Ok(GramSolution {
            beta: Vector::zeros(0),
            rank: 0,
        });
    }
    let tol = rel_tol.unwrap_or_else(|| default_rel_tol(p, p));
    ensure_finite(gram.as_slice(), "Gram matrix")?;
    ensure_finite(xty.as_slice(), "right-hand side")?;
    ensure_tol(tol)?;
    let dec = Decomposition::of(gram, tol)?;
    Ok(GramSolution {
        beta: dec.pinv() * xty,
        rank: dec.rank(),
    })
}

/// `β̂ = (XᵀX)† Xᵀ Y`. A zero-column `X` (empty subset) yields the empty
/// vector.
pub fn least_squares(x: &Matrix, y: &Vector, rel_tol: Option<f64>) -> Result<Vector> {
    Ok(least_squares_with_rank(x, y, rel_tol)?.beta)
}

/// As [`least_squares`], also reporting `rank(XᵀX)`.
pub fn least_squares_with_rank(
    x: &Matrix,
    y: &Vector,
    rel_tol: Option<f64>,
) -> Result<GramSolution> {
    if x.nrows() != y.len() {
        return Err(Error::shape(format!(
            "design has {} rows but target has {} entries",
            x.nrows(),
            y.len()
        )));
    }
    ensure_finite(x.as_slice(), "design matrix")?;
    ensure_finite(y.as_slice(), "target")?;
    let gram = x.tr_mul(x);
    let xty = x.tr_mul(y);
    solve_gram(&gram, &xty, rel_tol)
}

/// `r = Y − X β`; with zero columns `r = Y`.
pub fn residuals(x: &Matrix, y: &Vector, beta: &Vector) -> Result<Vector> {
    if x.nrows() != y.len() || x.ncols() != beta.len() {
        return Err(Error::shape(format!(
            "cannot form residuals from a {}x{} design, {} targets and {} coefficients",
            x.nrows(),
            x.ncols(),
            y.len(),
            beta.len()
        )));
    }
    if x.ncols() == 0 {
        return Ok(y.clone());
    }
    Ok(y - x * beta)
}
