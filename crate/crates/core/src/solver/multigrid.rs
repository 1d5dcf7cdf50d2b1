//! Geometric multigrid V-cycle used as a Krylov preconditioner.
//!
//! Coarse operators are rediscretized from coefficients injected onto every
//! other node; transfers are multilinear prolongation and its scaled transpose.

use nalgebra::{DMatrix, DVector};

use super::assembly::{assemble_operator, Layout};
use super::coefficients::CoefficientField;
use super::krylov::Preconditioner;
use super::sparse::CsrMatrix;
use crate::error::Result;
use crate::grid::Grid;

const COARSEST_UNKNOWNS: usize = 400;
const SMOOTHING_SWEEPS: usize = 2;

struct Level {
    matrix: CsrMatrix,
    /// Prolongation from the next coarser level (absent on the coarsest).
    prolong: Option<CsrMatrix>,
    restrict: Option<CsrMatrix>,
}

enum Coarsest {
    Direct(nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>),
    Smooth,
}

pub struct Multigrid {
    levels: Vec<Level>,
    coarsest: Coarsest,
}

fn coarsenable(grid: &Grid) -> bool {
    let m = grid.nodes_per_axis();
    m >= 5 && (m - 1) % 4 == 0
}

/// Prolongation matrix from interior unknowns of `coarse` to those of `fine`.
fn prolongation(fine: &Layout, coarse: &Layout) -> CsrMatrix {
    let fg = fine.grid();
    let cg = coarse.grid();
    let n = fg.dim();
    let rows = (0..fine.unknowns())
        .map(|k| {
            let mi = fg.multi_index(fine.node(k));
            // Per-axis parents with weights.
            let parents: Vec<Vec<(usize, f64)>> = (0..n)
                .map(|d| {
                    let i = mi[d];
                    if i % 2 == 0 {
                        vec![(i / 2, 1.0)]
                    } else {
                        vec![((i - 1) / 2, 0.5), ((i + 1) / 2, 0.5)]
                    }
                })
                .collect();
            let mut entries = Vec::new();
            let mut idx = [0usize; 3];
            let mut counter = vec![0usize; n];
            loop {
                let mut w = 1.0;
                for d in 0..n {
                    let (c, wd) = parents[d][counter[d]];
                    idx[d] = c;
                    w *= wd;
                }
                if let Some(col) = coarse.unknown(cg.index(&idx[..n])) {
                    entries.push((col, w));
                }
                let mut d = 0;
                while d < n {
                    counter[d] += 1;
                    if counter[d] < parents[d].len() {
                        break;
                    }
                    counter[d] = 0;
                    d += 1;
                }
                if d == n {
                    break;
                }
            }
            entries
        })
        .collect();
    CsrMatrix::from_rows(rows)
}

fn transpose_scaled(p: &CsrMatrix, cols: usize, scale: f64) -> CsrMatrix {
    let mut rows = vec![Vec::new(); cols];
    for r in 0..p.rows() {
        for (c, v) in p.row(r) {
            rows[c].push((r, v * scale));
        }
    }
    CsrMatrix::from_rows(rows)
}

impl Multigrid {
    /// Hierarchy for the operator of `a` whose finest matrix is `matrix`.
    pub fn build(a: &CoefficientField, matrix: &CsrMatrix) -> Result<Self> {
        let mut levels = Vec::new();
        let mut current = a.clone();
        let mut layout = Layout::new(a.grid());
        let mut mat = matrix.clone();
        while coarsenable(current.grid()) && layout.unknowns() > COARSEST_UNKNOWNS {
            let g = current.grid();
            let coarse_grid = Grid::new(g.dim(), g.half_width(), (g.nodes_per_axis() - 1) / 2 + 1)?;
            let coarse = current.inject(&coarse_grid)?;
            let coarse_layout = Layout::new(&coarse_grid);
            let p = prolongation(&layout, &coarse_layout);
            let r = transpose_scaled(&p, coarse_layout.unknowns(), 0.5f64.powi(g.dim() as i32));
            levels.push(Level {
                matrix: mat,
                prolong: Some(p),
                restrict: Some(r),
            });
            mat = assemble_operator(&coarse).matrix;
            current = coarse;
            layout = coarse_layout;
        }
        let coarsest = if mat.rows() <= COARSEST_UNKNOWNS * 4 {
            let dense = DMatrix::from_fn(mat.rows(), mat.rows(), |r, c| mat.get(r, c));
            Coarsest::Direct(dense.lu())
        } else {
            Coarsest::Smooth
        };
        levels.push(Level {
            matrix: mat,
            prolong: None,
            restrict: None,
        });
        Ok(Multigrid { levels, coarsest })
    }

    /// Whether the hierarchy actually has more than one level or a direct solve.
    pub fn is_effective(&self) -> bool {
        self.levels.len() > 1 || matches!(self.coarsest, Coarsest::Direct(_))
    }

    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    fn vcycle(&self, level: usize, b: &[f64], x: &mut [f64]) {
        let lv = &self.levels[level];
        x.iter_mut().for_each(|v| *v = 0.0);
        if level + 1 == self.levels.len() {
            match &self.coarsest {
                Coarsest::Direct(lu) => {
                    if let Some(sol) = lu.solve(&DVector::from_column_slice(b)) {
                        x.copy_from_slice(sol.as_slice());
                        return;
                    }
                    for _ in 0..50 {
                        lv.matrix.gauss_seidel(b, x, true);
                        lv.matrix.gauss_seidel(b, x, false);
                    }
                }
                Coarsest::Smooth => {
                    for _ in 0..50 {
                        lv.matrix.gauss_seidel(b, x, true);
                        lv.matrix.gauss_seidel(b, x, false);
                    }
                }
            }
            return;
        }
        for _ in 0..SMOOTHING_SWEEPS {
            lv.matrix.gauss_seidel(b, x, true);
        }
        let mut ax = vec![0.0; b.len()];
        lv.matrix.mul_vec(x, &mut ax);
        let r: Vec<f64> = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
        let restrict = lv.restrict.as_ref().expect("non-coarsest level");
        let prolong = lv.prolong.as_ref().expect("non-coarsest level");
        let mut rc = vec![0.0; restrict.rows()];
        restrict.mul_vec(&r, &mut rc);
        let mut ec = vec![0.0; rc.len()];
        self.vcycle(level + 1, &rc, &mut ec);
        let mut ef = vec![0.0; b.len()];
        prolong.mul_vec(&ec, &mut ef);
        for (x, e) in x.iter_mut().zip(&ef) {
            *x += e;
        }
        for _ in 0..SMOOTHING_SWEEPS {
            lv.matrix.gauss_seidel(b, x, false);
        }
    }
}

impl Preconditioner for Multigrid {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        self.vcycle(0, r, z);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::krylov::pcg;

    #[test]
    fn prolongation_of_a_hat() {
        let fine = Grid::new(2, 1.0, 9).unwrap();
        let coarse = Grid::new(2, 1.0, 5).unwrap();
        let (lf, lc) = (Layout::new(&fine), Layout::new(&coarse));
        let p = prolongation(&lf, &lc);
        let mut ec = vec![0.0; lc.unknowns()];
        let center = lc.unknown(coarse.index(&[2, 2])).unwrap();
        ec[center] = 1.0;
        let mut ef = vec![0.0; lf.unknowns()];
        p.mul_vec(&ec, &mut ef);
        let total: f64 = ef.iter().sum();
        // 2D hat on the fine grid sums to 1 + 4/2 + 4/4 = 4.
        assert!((total - 4.0).abs() < 1e-14);
    }

    #[test]
    fn multigrid_pcg_converges_fast() {
        let g = Grid::new(2, 1.0, 129).unwrap();
        let a = CoefficientField::identity(&g);
        let op = assemble_operator(&a);
        let mg = Multigrid::build(&a, &op.matrix).unwrap();
        assert!(mg.depth() > 2);
        let b = vec![1.0; op.layout.unknowns()];
        let mut x = vec![0.0; b.len()];
        let stats = pcg(&op.matrix, &b, &mut x, &mg, 1e-12, 100).unwrap();
        assert!(stats.iterations < 30, "{} iterations", stats.iterations);
    }
}
