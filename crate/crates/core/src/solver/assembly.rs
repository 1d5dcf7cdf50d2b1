//! Conservative finite-difference discretization of `-div(A grad u)`.
//!
//! Diagonal entries `a_jj` use face-averaged fluxes on the 3-point stencil of
//! axis `j`. Off-diagonal entries `a_ij` use the central flux difference
//! `-(a_ij(x+e_i) D_j u(x+e_i) - a_ij(x-e_i) D_j u(x-e_i)) / 2h` with central
//! `D_j`, which keeps the operator symmetric whenever `A` is.

use super::coefficients::CoefficientField;
use super::sparse::CsrMatrix;
use crate::calculus::divergence;
use crate::field::{Field, VecField};
use crate::grid::Grid;

const NOT_UNKNOWN: usize = usize::MAX;

/// Numbering of the interior nodes, which carry the unknowns.
#[derive(Debug, Clone, PartialEq)]
pub struct Layout {
    grid: Grid,
    unknown_of: Vec<usize>,
    nodes: Vec<usize>,
}

impl Layout {
    pub fn new(grid: &Grid) -> Self {
        let mut unknown_of = vec![NOT_UNKNOWN; grid.node_count()];
        let mut nodes = Vec::new();
        for (i, slot) in unknown_of.iter_mut().enumerate() {
            if grid.boundary_depth(i) >= 1 {
                *slot = nodes.len();
                nodes.push(i);
            }
        }
        Layout {
            grid: *grid,
            unknown_of,
            nodes,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn unknowns(&self) -> usize {
        self.nodes.len()
    }

    pub fn node(&self, unknown: usize) -> usize {
        self.nodes[unknown]
    }

    pub fn unknown(&self, node: usize) -> Option<usize> {
        match self.unknown_of[node] {
            NOT_UNKNOWN => None,
            k => Some(k),
        }
    }

    /// Interior values of a full nodal array.
    pub fn gather(&self, full: &[f64]) -> Vec<f64> {
        self.nodes.iter().map(|&i| full[i]).collect()
    }

    /// Writes interior values into a full nodal array.
    pub fn scatter(&self, interior: &[f64], full: &mut [f64]) {
        for (k, &i) in self.nodes.iter().enumerate() {
            full[i] = interior[k];
        }
    }
}

/// Stencil `(node, coefficient)` of the operator at an interior node.
pub fn stencil_row(a: &CoefficientField, node: usize, out: &mut Vec<(usize, f64)>) {
    out.clear();
    let grid = a.grid();
    let n = grid.dim();
    let h2 = grid.spacing().powi(2);
    let s: Vec<usize> = (0..n).map(|d| grid.stride(d)).collect();
    let mut center = 0.0;
    for j in 0..n {
        let ajj = a.entry(j, j).values();
        let plus = 0.5 * (ajj[node] + ajj[node + s[j]]) / h2;
        let minus = 0.5 * (ajj[node] + ajj[node - s[j]]) / h2;
        center += plus + minus;
        out.push((node + s[j], -plus));
        out.push((node - s[j], -minus));
    }
    out.push((node, center));
    let q = 0.25 / h2;
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let aij = a.entry(i, j).values();
            let ap = aij[node + s[i]] * q;
            let am = aij[node - s[i]] * q;
            if ap == 0.0 && am == 0.0 {
                continue;
            }
            out.push((node + s[i] + s[j], -ap));
            out.push((node + s[i] - s[j], ap));
            out.push((node - s[i] + s[j], am));
            out.push((node - s[i] - s[j], -am));
        }
    }
}

/// Interior operator matrix plus couplings of interior rows to boundary nodes.
#[derive(Debug, Clone)]
pub struct Operator {
    pub layout: Layout,
    pub matrix: CsrMatrix,
    /// `(row, boundary node, coefficient)`.
    pub boundary_coupling: Vec<(usize, usize, f64)>,
    pub symmetric: bool,
}

pub fn assemble_operator(a: &CoefficientField) -> Operator {
    let layout = Layout::new(a.grid());
    let mut rows = Vec::with_capacity(layout.unknowns());
    let mut coupling = Vec::new();
    let mut buf = Vec::new();
    for row in 0..layout.unknowns() {
        let node = layout.node(row);
        stencil_row(a, node, &mut buf);
        let mut entries = Vec::with_capacity(buf.len());
        for &(nb, c) in &buf {
            match layout.unknown(nb) {
                Some(col) => entries.push((col, c)),
                None => coupling.push((row, nb, c)),
            }
        }
        rows.push(entries);
    }
    Operator {
        layout,
        matrix: CsrMatrix::from_rows(rows),
        boundary_coupling: coupling,
        symmetric: a.is_symmetric(),
    }
}

/// Right side `f + div_h F` at interior nodes with Dirichlet values eliminated.
pub fn assemble_rhs(op: &Operator, forcing: &Field, field_term: &VecField, boundary: &Field) -> Vec<f64> {
    let div = divergence(field_term);
    let mut rhs: Vec<f64> = (0..op.layout.unknowns())
        .map(|k| {
            let i = op.layout.node(k);
            forcing.values()[i] + div.values()[i]
        })
        .collect();
    for &(row, node, c) in &op.boundary_coupling {
        rhs[row] -= c * boundary.values()[node];
    }
    rhs
}

/// `-div_h(A grad_h u)` at interior nodes (zero on the boundary).
pub fn apply_operator(a: &CoefficientField, u: &Field) -> Field {
    let grid = a.grid();
    let mut out = vec![0.0; grid.node_count()];
    let mut buf = Vec::new();
    for (i, slot) in out.iter_mut().enumerate() {
        if grid.boundary_depth(i) >= 1 {
            stencil_row(a, i, &mut buf);
            *slot = buf.iter().map(|&(j, c)| c * u.values()[j]).sum();
        }
    }
    Field::from_values(grid, out).expect("finite operator output")
}
