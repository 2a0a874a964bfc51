//! Jacobi-preconditioned Krylov solvers: conjugate gradients for symmetric
//! positive definite systems, BiCGStab for the general case.

use super::sparse::{dot, norm2, SparseMatrix};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    pub symmetric: bool,
    /// Stop when `‖b − A x‖ ≤ rel_tol · ‖b‖`.
    pub rel_tol: f64,
    /// Defaults to `10 · n` when `None`.
    pub max_iter: Option<usize>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            symmetric: false,
            rel_tol: 1e-8,
            max_iter: None,
        }
    }
}

impl SolveOptions {
    pub fn symmetric() -> Self {
        Self {
            symmetric: true,
            ..Self::default()
        }
    }

    pub fn general() -> Self {
        Self::default()
    }

    pub fn with_rel_tol(mut self, rel_tol: f64) -> Self {
        self.rel_tol = rel_tol;
        self
    }

    pub fn with_max_iter(mut self, max_iter: usize) -> Self {
        self.max_iter = Some(max_iter);
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// Achieved relative residual `‖b − A x‖ / ‖b‖` (absolute when `b = 0`).
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SolveError {
    #[error("Krylov breakdown after {iterations} iterations (relative residual {residual:.3e})")]
    Breakdown { iterations: usize, residual: f64 },
    #[error("no convergence within {iterations} iterations (relative residual {residual:.3e})")]
    MaxIterExceeded { iterations: usize, residual: f64 },
    #[error("dimension mismatch: matrix is {matrix}x{matrix}, right-hand side has {rhs} entries")]
    DimensionMismatch { matrix: usize, rhs: usize },
    #[error("right-hand side contains non-finite values")]
    NonFiniteRhs,
}

impl SolveError {
    pub fn residual(&self) -> Option<f64> {
        match self {
            Self::Breakdown { residual, .. } | Self::MaxIterExceeded { residual, .. } => {
                Some(*residual)
            }
            _ => None,
        }
    }
}

pub fn solve(m: &SparseMatrix, rhs: &[f64], opts: &SolveOptions) -> Result<Solution, SolveError> {
    solve_with_guess(m, rhs, None, opts)
}

/// Same as [`solve`] but starts the iteration from `x0`.
pub fn solve_with_guess(
    m: &SparseMatrix,
    rhs: &[f64],
    x0: Option<&[f64]>,
    opts: &SolveOptions,
) -> Result<Solution, SolveError> {
    let n = m.dim();
    if rhs.len() != n {
        return Err(SolveError::DimensionMismatch {
            matrix: n,
            rhs: rhs.len(),
        });
    }
    if rhs.iter().any(|v| !v.is_finite()) {
        return Err(SolveError::NonFiniteRhs);
    }
    let max_iter = opts.max_iter.unwrap_or(10 * n.max(1));
    let b_norm = norm2(rhs);
    if b_norm == 0.0 {
        return Ok(Solution {
            x: vec![0.0; n],
            iterations: 0,
            residual: 0.0,
        });
    }
    let inv_diag: Vec<f64> = m
        .diagonal()
        .iter()
        .map(|&d| if d != 0.0 { 1.0 / d } else { 1.0 })
        .collect();
    let x = match x0 {
        Some(g) if g.len() == n => g.to_vec(),
        _ => vec![0.0; n],
    };
    let target = opts.rel_tol * b_norm;
    if opts.symmetric {
        pcg(m, rhs, x, &inv_diag, target, b_norm, max_iter)
    } else {
        bicgstab(m, rhs, x, &inv_diag, target, b_norm, max_iter)
    }
}

fn residual_vec(m: &SparseMatrix, b: &[f64], x: &[f64]) -> Vec<f64> {
    let ax = m.matvec(x);
    b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect()
}

fn pcg(
    m: &SparseMatrix,
    b: &[f64],
    mut x: Vec<f64>,
    inv_diag: &[f64],
    target: f64,
    b_norm: f64,
    max_iter: usize,
) -> Result<Solution, SolveError> {
    let n = b.len();
    let mut r = residual_vec(m, b, &x);
    let mut r_norm = norm2(&r);
    if r_norm <= target {
        return Ok(Solution {
            x,
            iterations: 0,
            residual: r_norm / b_norm,
        });
    }
    let mut z: Vec<f64> = r.iter().zip(inv_diag).map(|(a, d)| a * d).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    for it in 1..=max_iter {
        m.matvec_into(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 || !pap.is_finite() {
            return Err(SolveError::Breakdown {
                iterations: it,
                residual: r_norm / b_norm,
            });
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        r_norm = norm2(&r);
        if r_norm <= target {
            // Guard against drift of the recursively updated residual.
            let true_norm = norm2(&residual_vec(m, b, &x));
            if true_norm <= target {
                return Ok(Solution {
                    x,
                    iterations: it,
                    residual: true_norm / b_norm,
                });
            }
            r = residual_vec(m, b, &x);
            r_norm = true_norm;
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(SolveError::MaxIterExceeded {
        iterations: max_iter,
        residual: r_norm / b_norm,
    })
}

fn bicgstab(
    m: &SparseMatrix,
    b: &[f64],
    mut x: Vec<f64>,
    inv_diag: &[f64],
    target: f64,
    b_norm: f64,
    max_iter: usize,
) -> Result<Solution, SolveError> {
    let n = b.len();
    let mut r = residual_vec(m, b, &x);
    let mut r_norm = norm2(&r);
    if r_norm <= target {
        return Ok(Solution {
            x,
            iterations: 0,
            residual: r_norm / b_norm,
        });
    }
    let mut r_hat = r.clone();
    let mut rho = 1.0;
    let mut alpha = 1.0;
    let mut omega = 1.0;
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut y = vec![0.0; n];
    let mut s = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut t = vec![0.0; n];
    let mut restarts = 0;
    let breakdown = |it: usize, res: f64| SolveError::Breakdown {
        iterations: it,
        residual: res / b_norm,
    };
    let mut it = 0;
    while it < max_iter {
        it += 1;
        let rho_new = dot(&r_hat, &r);
        if rho_new == 0.0 || !rho_new.is_finite() {
            // Restart with the current residual as shadow vector.
            if restarts > 5 {
                return Err(breakdown(it, r_norm));
            }
            restarts += 1;
            r_hat = r.clone();
            rho = 1.0;
            alpha = 1.0;
            omega = 1.0;
            v.iter_mut().for_each(|e| *e = 0.0);
            p.iter_mut().for_each(|e| *e = 0.0);
            continue;
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
            y[i] = p[i] * inv_diag[i];
        }
        m.matvec_into(&y, &mut v);
        let rhv = dot(&r_hat, &v);
        if rhv == 0.0 || !rhv.is_finite() {
            return Err(breakdown(it, r_norm));
        }
        alpha = rho / rhv;
        for i in 0..n {
            s[i] = r[i] - alpha * v[i];
        }
        let s_norm = norm2(&s);
        if s_norm <= target {
            for i in 0..n {
                x[i] += alpha * y[i];
            }
            let true_norm = norm2(&residual_vec(m, b, &x));
            if true_norm <= target {
                return Ok(Solution {
                    x,
                    iterations: it,
                    residual: true_norm / b_norm,
                });
            }
            r = residual_vec(m, b, &x);
            r_norm = true_norm;
            continue;
        }
        for i in 0..n {
            z[i] = s[i] * inv_diag[i];
        }
        m.matvec_into(&z, &mut t);
        let tt = dot(&t, &t);
        if tt == 0.0 || !tt.is_finite() {
            return Err(breakdown(it, r_norm));
        }
        omega = dot(&t, &s) / tt;
        for i in 0..n {
            x[i] += alpha * y[i] + omega * z[i];
            r[i] = s[i] - omega * t[i];
        }
        r_norm = norm2(&r);
        if r_norm <= target {
            let true_norm = norm2(&residual_vec(m, b, &x));
            if true_norm <= target {
                return Ok(Solution {
                    x,
                    iterations: it,
                    residual: true_norm / b_norm,
                });
            }
            r = residual_vec(m, b, &x);
            r_norm = true_norm;
        }
        if omega == 0.0 {
            return Err(breakdown(it, r_norm));
        }
    }
    Err(SolveError::MaxIterExceeded {
        iterations: max_iter,
        residual: r_norm / b_norm,
    })
}
