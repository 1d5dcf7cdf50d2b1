//! Preconditioned Krylov iterations.

use super::sparse::{dot, norm2, CsrMatrix};
use crate::error::{LabError, Result};

pub trait Preconditioner {
    /// `z = M^{-1} r`.
    fn apply(&self, r: &[f64], z: &mut [f64]);
}

pub struct Jacobi {
    inv_diag: Vec<f64>,
}

impl Jacobi {
    pub fn new(a: &CsrMatrix) -> Self {
        Jacobi {
            inv_diag: (0..a.rows()).map(|r| 1.0 / a.diagonal(r)).collect(),
        }
    }
}

impl Preconditioner for Jacobi {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        for ((z, r), d) in z.iter_mut().zip(r).zip(&self.inv_diag) {
            *z = r * d;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveStats {
    pub iterations: usize,
    pub relative_residual: f64,
}

fn true_relative_residual(a: &CsrMatrix, b: &[f64], x: &[f64], bnorm: f64) -> f64 {
    let mut ax = vec![0.0; b.len()];
    a.mul_vec(x, &mut ax);
    let r: Vec<f64> = b.iter().zip(&ax).map(|(b, ax)| b - ax).collect();
    norm2(&r) / bnorm
}

/// Preconditioned conjugate gradients for symmetric positive definite systems.
pub fn pcg(
    a: &CsrMatrix,
    b: &[f64],
    x: &mut [f64],
    pre: &dyn Preconditioner,
    tol: f64,
    max_iter: usize,
) -> Result<SolveStats> {
    let n = b.len();
    let bnorm = norm2(b);
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(SolveStats {
            iterations: 0,
            relative_residual: 0.0,
        });
    }
    let mut r = vec![0.0; n];
    a.mul_vec(x, &mut r);
    for (r, b) in r.iter_mut().zip(b) {
        *r = b - *r;
    }
    let mut z = vec![0.0; n];
    pre.apply(&r, &mut z);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut q = vec![0.0; n];
    for it in 0..=max_iter {
        let rel = norm2(&r) / bnorm;
        if rel <= tol {
            let actual = true_relative_residual(a, b, x, bnorm);
            if actual <= tol {
                return Ok(SolveStats {
                    iterations: it,
                    relative_residual: actual,
                });
            }
            // Recurrence drifted; restart from the true residual.
            a.mul_vec(x, &mut r);
            for (r, b) in r.iter_mut().zip(b) {
                *r = b - *r;
            }
            pre.apply(&r, &mut z);
            p.copy_from_slice(&z);
            rz = dot(&r, &z);
        }
        if it == max_iter {
            break;
        }
        a.mul_vec(&p, &mut q);
        let pq = dot(&p, &q);
        if pq <= 0.0 {
            break;
        }
        let step = rz / pq;
        for i in 0..n {
            x[i] += step * p[i];
            r[i] -= step * q[i];
        }
        pre.apply(&r, &mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(LabError::SolverStagnation {
        iterations: max_iter,
        residual: true_relative_residual(a, b, x, bnorm),
    })
}

/// Right-preconditioned BiCGSTAB for general nonsingular systems.
pub fn bicgstab(
    a: &CsrMatrix,
    b: &[f64],
    x: &mut [f64],
    pre: &dyn Preconditioner,
    tol: f64,
    max_iter: usize,
) -> Result<SolveStats> {
    let n = b.len();
    let bnorm = norm2(b);
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(SolveStats {
            iterations: 0,
            relative_residual: 0.0,
        });
    }
    let mut r = vec![0.0; n];
    let restart = |x: &[f64], r: &mut Vec<f64>| {
        a.mul_vec(x, r);
        for (r, b) in r.iter_mut().zip(b) {
            *r = b - *r;
        }
    };
    restart(x, &mut r);
    let mut r_hat = r.clone();
    let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut y = vec![0.0; n];
    let mut s = vec![0.0; n];
    let mut zs = vec![0.0; n];
    let mut t = vec![0.0; n];
    for it in 0..max_iter {
        if norm2(&r) / bnorm <= tol {
            let actual = true_relative_residual(a, b, x, bnorm);
            if actual <= tol {
                return Ok(SolveStats {
                    iterations: it,
                    relative_residual: actual,
                });
            }
            restart(x, &mut r);
            r_hat.copy_from_slice(&r);
            rho = 1.0;
            alpha = 1.0;
            omega = 1.0;
            v.iter_mut().for_each(|e| *e = 0.0);
            p.iter_mut().for_each(|e| *e = 0.0);
        }
        let rho_new = dot(&r_hat, &r);
        if rho_new == 0.0 {
            break;
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
        }
        pre.apply(&p, &mut y);
        a.mul_vec(&y, &mut v);
        let rv = dot(&r_hat, &v);
        if rv == 0.0 {
            break;
        }
        alpha = rho / rv;
        for i in 0..n {
            s[i] = r[i] - alpha * v[i];
        }
        if norm2(&s) / bnorm <= tol * 0.5 {
            for i in 0..n {
                x[i] += alpha * y[i];
            }
            r.copy_from_slice(&s);
            continue;
        }
        pre.apply(&s, &mut zs);
        a.mul_vec(&zs, &mut t);
        let tt = dot(&t, &t);
        omega = if tt > 0.0 { dot(&t, &s) / tt } else { 0.0 };
        for i in 0..n {
            x[i] += alpha * y[i] + omega * zs[i];
            r[i] = s[i] - omega * t[i];
        }
        if omega == 0.0 {
            break;
        }
    }
    let actual = true_relative_residual(a, b, x, bnorm);
    if actual <= tol {
        return Ok(SolveStats {
            iterations: max_iter,
            relative_residual: actual,
        });
    }
    Err(LabError::SolverStagnation {
        iterations: max_iter,
        residual: actual,
    })
}
