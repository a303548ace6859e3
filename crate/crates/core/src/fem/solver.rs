//! Symmetric positive definite solvers: envelope (skyline) Cholesky for the
//! banded systems a structured mesh produces, and Jacobi-preconditioned CG.

use std::fmt;
use std::str::FromStr;

use super::sparse::{dot, norm, CsrMatrix};
use crate::error::{domain, Error, Result};

/// Systems up to this many unknowns use the direct solver under [`SolverKind::Auto`].
pub const DIRECT_THRESHOLD: usize = 20_000;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum SolverKind {
    Direct,
    Cg {
        tol: f64,
        max_iter: usize,
    },
    #[default]
    Auto,
}

impl SolverKind {
    pub fn cg(tol: f64) -> Self {
        Self::Cg {
            tol,
            max_iter: 100_000,
        }
    }

    fn resolve(self, n: usize) -> Self {
        match self {
            Self::Auto if n <= DIRECT_THRESHOLD => Self::Direct,
            Self::Auto => Self::cg(1e-12),
            other => other,
        }
    }
}

impl FromStr for SolverKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "direct" => Ok(Self::Direct),
            "cg" => Ok(Self::cg(1e-12)),
            "auto" => Ok(Self::Auto),
            _ => domain(format!(
                "unknown solver '{s}' (expected direct, cg or auto)"
            )),
        }
    }
}

impl fmt::Display for SolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Direct => "direct",
            Self::Cg { .. } => "cg",
            Self::Auto => "auto",
        })
    }
}

/// `A = L Lᵀ` stored row-wise over each row's envelope `first[i]..=i`.
#[derive(Debug, Clone)]
pub struct SkylineCholesky {
    first: Vec<usize>,
    start: Vec<usize>,
    values: Vec<f64>,
}

impl SkylineCholesky {
    pub fn factor(a: &CsrMatrix) -> Result<Self> {
        let n = a.n();
        let mut first = vec![0; n];
        for (i, f) in first.iter_mut().enumerate() {
            *f = a
                .row(i)
                .map(|(j, _)| j)
                .filter(|&j| j <= i)
                .min()
                .unwrap_or(i);
        }
        let mut start = vec![0; n + 1];
        for i in 0..n {
            start[i + 1] = start[i] + (i - first[i] + 1);
        }
        let mut values = vec![0.0; start[n]];
        for i in 0..n {
            for (j, v) in a.row(i) {
                if j <= i {
                    values[start[i] + j - first[i]] = v;
                }
            }
        }
        for i in 0..n {
            let fi = first[i];
            for j in fi..=i {
                let fj = first[j];
                let lo = fi.max(fj);
                let (ri, rj) = (start[i] + lo - fi, start[j] + lo - fj);
                let len = j - lo;
                let mut s = values[start[i] + j - fi];
                for p in 0..len {
                    s -= values[ri + p] * values[rj + p];
                }
                if j < i {
                    s /= values[start[j + 1] - 1];
                    values[start[i] + j - fi] = s;
                } else {
                    if !(s > 0.0) {
                        return Err(Error::NotPositiveDefinite { row: i, pivot: s });
                    }
                    values[start[i] + j - fi] = s.sqrt();
                }
            }
        }
        Ok(Self {
            first,
            start,
            values,
        })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.first.len();
        assert_eq!(b.len(), n);
        let mut y = b.to_vec();
        for i in 0..n {
            let fi = self.first[i];
            let row = &self.values[self.start[i]..self.start[i + 1]];
            let mut s = y[i];
            for (p, j) in (fi..i).enumerate() {
                s -= row[p] * y[j];
            }
            y[i] = s / row[i - fi];
        }
        for i in (0..n).rev() {
            let fi = self.first[i];
            let row = &self.values[self.start[i]..self.start[i + 1]];
            y[i] /= row[i - fi];
            let yi = y[i];
            for (p, j) in (fi..i).enumerate() {
                y[j] -= row[p] * yi;
            }
        }
        y
    }

    pub fn stored_entries(&self) -> usize {
        self.values.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgStats {
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Jacobi-preconditioned conjugate gradients from `x0` to `‖b - Ax‖ ≤ tol ‖b‖`.
pub fn pcg(
    a: &CsrMatrix,
    b: &[f64],
    x0: Option<&[f64]>,
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, CgStats)> {
    let n = a.n();
    let bnorm = norm(b);
    if bnorm == 0.0 {
        return Ok((
            vec![0.0; n],
            CgStats {
                iterations: 0,
                relative_residual: 0.0,
            },
        ));
    }
    let inv_diag: Vec<f64> = a
        .diagonal()
        .iter()
        .map(|d| if *d > 0.0 { 1.0 / d } else { 1.0 })
        .collect();
    let mut x = x0.map(|x| x.to_vec()).unwrap_or_else(|| vec![0.0; n]);
    let mut r: Vec<f64> = b
        .iter()
        .zip(a.mul_vec(&x))
        .map(|(bi, ai)| bi - ai)
        .collect();
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(ri, di)| ri * di).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    let mut rel = norm(&r) / bnorm;
    let mut it = 0;
    while rel > tol && it < max_iter {
        a.mul_vec_into(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::NotPositiveDefinite {
                row: it,
                pivot: pap,
            });
        }
        let step = rz / pap;
        for i in 0..n {
            x[i] += step * p[i];
            r[i] -= step * ap[i];
        }
        rel = norm(&r) / bnorm;
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
        it += 1;
    }
    // recompute the true residual; the recursive one drifts
    let true_rel = norm(
        &b.iter()
            .zip(a.mul_vec(&x))
            .map(|(bi, ai)| bi - ai)
            .collect::<Vec<_>>(),
    ) / bnorm;
    if true_rel > tol * 10.0 && rel > tol {
        return Err(Error::SolverFailure {
            residual: true_rel,
            tolerance: tol,
        });
    }
    Ok((
        x,
        CgStats {
            iterations: it,
            relative_residual: true_rel,
        },
    ))
}

/// A matrix with its chosen solution strategy; direct factorizations are kept.
#[derive(Debug, Clone)]
pub struct LinearSolver {
    matrix: CsrMatrix,
    kind: SolverKind,
    factor: Option<SkylineCholesky>,
}

impl LinearSolver {
    pub fn new(matrix: CsrMatrix, kind: SolverKind) -> Result<Self> {
        let kind = kind.resolve(matrix.n());
        let factor = match kind {
            SolverKind::Direct => Some(SkylineCholesky::factor(&matrix)?),
            _ => None,
        };
        Ok(Self {
            matrix,
            kind,
            factor,
        })
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    pub fn kind(&self) -> SolverKind {
        self.kind
    }

    /// Solve and verify `‖b - Ax‖ ≤ max_residual ‖b‖`. `guess` seeds CG.
    pub fn solve(&self, b: &[f64], guess: Option<&[f64]>, max_residual: f64) -> Result<Vec<f64>> {
        let x = match (&self.factor, self.kind) {
            (Some(f), _) => f.solve(b),
            (None, SolverKind::Cg { tol, max_iter }) => {
                pcg(&self.matrix, b, guess, tol, max_iter)?.0
            }
            (None, _) => unreachable!("solver kind resolved at construction"),
        };
        let bnorm = norm(b);
        if bnorm > 0.0 {
            let ax = self.matrix.mul_vec(&x);
            let rel = norm(
                &b.iter()
                    .zip(&ax)
                    .map(|(bi, ai)| bi - ai)
                    .collect::<Vec<_>>(),
            ) / bnorm;
            let limit = match self.kind {
                SolverKind::Cg { tol, .. } => max_residual.max(10.0 * tol),
                _ => max_residual,
            };
            if !(rel <= limit) {
                return Err(Error::SolverFailure {
                    residual: rel,
                    tolerance: limit,
                });
            }
        }
        Ok(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplacian_1d(n: usize) -> CsrMatrix {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0));
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
                t.push((i + 1, i, -1.0));
            }
        }
        CsrMatrix::from_triplets(n, t)
    }

    #[test]
    fn skyline_solves_tridiagonal() {
        let a = laplacian_1d(50);
        let x_true: Vec<f64> = (0..50).map(|i| (i as f64 * 0.3).sin()).collect();
        let b = a.mul_vec(&x_true);
        let f = SkylineCholesky::factor(&a).unwrap();
        assert_eq!(f.stored_entries(), 99);
        let x = f.solve(&b);
        for (u, v) in x.iter().zip(&x_true) {
            assert!((u - v).abs() < 1e-12);
        }
    }

    #[test]
    fn indefinite_matrix_is_rejected() {
        let a =
            CsrMatrix::from_triplets(2, vec![(0, 0, 1.0), (0, 1, 2.0), (1, 0, 2.0), (1, 1, 1.0)]);
        assert!(matches!(
            SkylineCholesky::factor(&a),
            Err(Error::NotPositiveDefinite { row: 1, .. })
        ));
    }

    #[test]
    fn cg_matches_direct() {
        let a = laplacian_1d(40);
        let b: Vec<f64> = (0..40).map(|i| 1.0 + i as f64).collect();
        let direct = LinearSolver::new(a.clone(), SolverKind::Direct).unwrap();
        let cg = LinearSolver::new(a, SolverKind::cg(1e-13)).unwrap();
        let x = direct.solve(&b, None, 1e-12).unwrap();
        let y = cg.solve(&b, None, 1e-12).unwrap();
        for (u, v) in x.iter().zip(&y) {
            assert!((u - v).abs() < 1e-9 * u.abs().max(1.0));
        }
    }

    #[test]
    fn cg_iteration_cap_reports_residual() {
        let a = laplacian_1d(200);
        let b = vec![1.0; 200];
        let err = pcg(&a, &b, None, 1e-14, 3).unwrap_err();
        assert!(matches!(err, Error::SolverFailure { residual, .. } if residual > 1e-14));
    }
}
