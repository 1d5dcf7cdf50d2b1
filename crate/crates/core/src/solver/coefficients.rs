use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::field::Field;
use crate::grid::Grid;

/// Certified ellipticity constants: `lambda |xi|^2 <= A xi . xi <= Lambda |xi|^2`
/// at every node, and `sup_entry >= max |a_ij|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ellipticity {
    pub lambda: f64,
    pub big_lambda: f64,
    pub sup_entry: f64,
}

impl Ellipticity {
    /// Weakest certificate covering both.
    pub fn union(self, other: Ellipticity) -> Ellipticity {
        Ellipticity {
            lambda: self.lambda.min(other.lambda),
            big_lambda: self.big_lambda.max(other.big_lambda),
            sup_entry: self.sup_entry.max(other.sup_entry),
        }
    }
}

/// `[g]_{C^{0,alpha}} <= bound` for some data field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HolderCertificate {
    pub alpha: f64,
    pub bound: f64,
}

/// Declared smoothness of the coefficients.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Regularity {
    pub holder: Option<HolderCertificate>,
    /// `k` means `C^{k-1,1}`: 0 = merely bounded, 1 = Lipschitz, 2 = `C^{1,1}`.
    pub lipschitz_order: usize,
}

/// Matrix-valued coefficient field `A(x)`, not necessarily symmetric.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientField {
    grid: Grid,
    entries: Vec<Field>,
    ellipticity: Ellipticity,
    regularity: Regularity,
    symmetric: bool,
}

impl CoefficientField {
    /// Entries in row-major order (`a_ij` at `i * n + j`).
    pub fn new(entries: Vec<Field>) -> Result<Self> {
        let grid = *entries
            .first()
            .ok_or_else(|| LabError::InvalidArgument("no coefficient entries".into()))?
            .grid();
        let n = grid.dim();
        if entries.len() != n * n || entries.iter().any(|e| *e.grid() != grid) {
            return Err(LabError::InvalidArgument(
                "coefficient field needs n*n entries on one grid".into(),
            ));
        }
        let ellipticity = validate_ellipticity(&entries)?;
        let symmetric = (0..n).all(|i| {
            (0..n).all(|j| entries[i * n + j].values() == entries[j * n + i].values())
        });
        Ok(CoefficientField {
            grid,
            entries,
            ellipticity,
            regularity: Regularity::default(),
            symmetric,
        })
    }

    pub fn from_fn(grid: &Grid, f: impl Fn(&[f64]) -> Vec<f64>) -> Result<Self> {
        let n = grid.dim();
        let samples: Vec<Vec<f64>> = (0..grid.node_count())
            .map(|i| f(&grid.point(i)[..n]))
            .collect();
        let entries = (0..n * n)
            .map(|k| Field::from_values(grid, samples.iter().map(|s| s[k]).collect()))
            .collect::<Result<Vec<_>>>()?;
        Self::new(entries)
    }

    pub fn identity(grid: &Grid) -> Self {
        let n = grid.dim();
        Self::from_fn(grid, |_| {
            let mut m = vec![0.0; n * n];
            for d in 0..n {
                m[d * n + d] = 1.0;
            }
            m
        })
        .expect("identity is elliptic")
        .with_regularity(Regularity {
            holder: Some(HolderCertificate { alpha: 1.0, bound: 0.0 }),
            lipschitz_order: usize::MAX,
        })
    }

    /// Constant matrix everywhere.
    pub fn constant(grid: &Grid, matrix: &[f64]) -> Result<Self> {
        let m = matrix.to_vec();
        Ok(Self::from_fn(grid, move |_| m.clone())?.with_regularity(Regularity {
            holder: Some(HolderCertificate { alpha: 1.0, bound: 0.0 }),
            lipschitz_order: usize::MAX,
        }))
    }

    pub fn with_regularity(mut self, regularity: Regularity) -> Self {
        self.regularity = regularity;
        self
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    pub fn entry(&self, i: usize, j: usize) -> &Field {
        &self.entries[i * self.dim() + j]
    }

    pub fn entries(&self) -> &[Field] {
        &self.entries
    }

    pub fn ellipticity(&self) -> Ellipticity {
        self.ellipticity
    }

    pub fn regularity(&self) -> Regularity {
        self.regularity
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    /// `A(x) xi . zeta` at a node.
    pub fn form_at(&self, node: usize, xi: &[f64], zeta: &[f64]) -> f64 {
        let n = self.dim();
        let mut acc = 0.0;
        for i in 0..n {
            for j in 0..n {
                acc += self.entries[i * n + j].values()[node] * xi[j] * zeta[i];
            }
        }
        acc
    }

    /// Applies `f` to every entry field (same certificate recomputed).
    pub fn map_entries(&self, f: impl Fn(&Field) -> Result<Field>) -> Result<CoefficientField> {
        let entries = self.entries.iter().map(f).collect::<Result<Vec<_>>>()?;
        Ok(CoefficientField::new(entries)?.with_regularity(self.regularity))
    }

    /// Sampling on a coarser grid whose nodes are every other node of this one.
    pub fn inject(&self, coarse: &Grid) -> Result<CoefficientField> {
        let n = self.dim();
        let fine = self.grid;
        self.map_entries(|e| {
            Field::from_values(
                coarse,
                (0..coarse.node_count())
                    .map(|i| {
                        let mi = coarse.multi_index(i);
                        let idx: Vec<usize> = mi[..n].iter().map(|k| 2 * k).collect();
                        e.values()[fine.index(&idx)]
                    })
                    .collect(),
            )
        })
    }

    pub fn restrict(&self, sub: &Grid) -> Result<CoefficientField> {
        self.map_entries(|e| e.restrict(sub))
    }
}

/// Nodal eigen-bounds of the symmetric part and the nodal sup of the entries.
pub fn validate_ellipticity(entries: &[Field]) -> Result<Ellipticity> {
    let grid = entries[0].grid();
    let n = grid.dim();
    if entries.iter().any(|e| e.values().iter().any(|v| !v.is_finite())) {
        return Err(LabError::InvalidArgument("non-finite coefficient".into()));
    }
    let mut lambda = f64::INFINITY;
    let mut big_lambda = f64::NEG_INFINITY;
    let mut sup_entry: f64 = 0.0;
    for node in 0..grid.node_count() {
        let a = |i: usize, j: usize| entries[i * n + j].values()[node];
        let (lo, hi) = if n == 2 {
            let (p, q, r) = (a(0, 0), 0.5 * (a(0, 1) + a(1, 0)), a(1, 1));
            let mean = 0.5 * (p + r);
            let rad = (0.25 * (p - r).powi(2) + q * q).sqrt();
            (mean - rad, mean + rad)
        } else {
            let sym = DMatrix::from_fn(n, n, |i, j| 0.5 * (a(i, j) + a(j, i)));
            let eig = sym.symmetric_eigenvalues();
            (eig.min(), eig.max())
        };
        if lo <= 0.0 {
            return Err(LabError::NotElliptic {
                node,
                eigenvalue: lo,
            });
        }
        lambda = lambda.min(lo);
        big_lambda = big_lambda.max(hi);
        for i in 0..n {
            for j in 0..n {
                sup_entry = sup_entry.max(a(i, j).abs());
            }
        }
    }
    Ok(Ellipticity {
        lambda,
        big_lambda,
        sup_entry,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> Grid {
        Grid::new(2, 1.0, 5).unwrap()
    }

    #[test]
    fn identity_certificate() {
        let e = CoefficientField::identity(&grid()).ellipticity();
        assert_eq!((e.lambda, e.big_lambda, e.sup_entry), (1.0, 1.0, 1.0));
    }

    #[test]
    fn diagonal_certificate() {
        let e = CoefficientField::constant(&grid(), &[1.0, 0.0, 0.0, 2.0]).unwrap().ellipticity();
        assert_eq!((e.lambda, e.big_lambda, e.sup_entry), (1.0, 2.0, 2.0));
    }

    #[test]
    fn antisymmetric_part_is_invisible() {
        // Symmetric part of [[1, 1], [-1, 1]] is the identity.
        let a = CoefficientField::constant(&grid(), &[1.0, 1.0, -1.0, 1.0]).unwrap();
        let e = a.ellipticity();
        assert!((e.lambda - 1.0).abs() < 1e-12 && (e.big_lambda - 1.0).abs() < 1e-12);
        assert_eq!(e.sup_entry, 1.0);
        assert!(!a.is_symmetric());
    }

    #[test]
    fn rejects_indefinite() {
        let err = CoefficientField::constant(&grid(), &[1.0, 2.0, 2.0, 1.0]).unwrap_err();
        assert!(matches!(err, LabError::NotElliptic { node: 0, .. }));
    }

    #[test]
    fn three_dimensional_certificate() {
        let g = Grid::new(3, 1.0, 3).unwrap();
        let a = CoefficientField::constant(&g, &[2.0, 1.0, 0.0, 1.0, 2.0, 0.0, 0.0, 0.0, 5.0]).unwrap();
        let e = a.ellipticity();
        assert!((e.lambda - 1.0).abs() < 1e-12);
        assert!((e.big_lambda - 5.0).abs() < 1e-12);
    }
}
