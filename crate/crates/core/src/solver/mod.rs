//! Dirichlet problems for `-div(A grad u) = f + div F` on the box.

pub mod assembly;
pub mod coefficients;
pub mod krylov;
pub mod manifest;
pub mod multigrid;
pub mod sparse;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::calculus::gradient;
use crate::error::{LabError, Result};
use crate::field::{Field, VecField};
use crate::grid::Grid;

pub use assembly::{apply_operator, assemble_operator, assemble_rhs, Layout, Operator};
pub use coefficients::{validate_ellipticity, CoefficientField, Ellipticity, HolderCertificate, Regularity};
use krylov::{bicgstab, pcg, Jacobi, Preconditioner, SolveStats};
use multigrid::Multigrid;
use sparse::CsrMatrix;

/// Relative residual the Krylov loop aims for; anything up to
/// `ACCEPTED_RESIDUAL` is still returned as a solution.
pub const SOLVER_TOLERANCE: f64 = 1e-12;
pub const ACCEPTED_RESIDUAL: f64 = 1e-10;
pub const ITERATION_FACTOR: usize = 50;

#[derive(Debug, Clone, PartialEq)]
pub struct EllipticProblem {
    pub coefficients: CoefficientField,
    pub forcing: Field,
    pub field_term: VecField,
    /// Only boundary nodes are read.
    pub boundary: Field,
    pub p: f64,
    pub q: f64,
    pub forcing_holder: Option<HolderCertificate>,
    pub field_holder: Option<HolderCertificate>,
}

impl EllipticProblem {
    pub fn new(coefficients: CoefficientField, forcing: Field, field_term: VecField, boundary: Field) -> Result<Self> {
        let grid = *coefficients.grid();
        if *forcing.grid() != grid || *field_term.grid() != grid || *boundary.grid() != grid {
            return Err(LabError::InvalidArgument("problem fields live on different grids".into()));
        }
        let n = grid.dim() as f64;
        Ok(EllipticProblem {
            coefficients,
            forcing,
            field_term,
            boundary,
            p: 2.0 * n,
            q: 4.0 * n,
            forcing_holder: None,
            field_holder: None,
        })
    }

    /// `-div(A grad u) = 0` with boundary data `g`.
    pub fn homogeneous(coefficients: CoefficientField, boundary: Field) -> Result<Self> {
        let grid = *coefficients.grid();
        Self::new(coefficients, Field::zeros(&grid), VecField::zeros(&grid), boundary)
    }

    /// Laplacian with forcing only and zero boundary values.
    pub fn poisson(forcing: Field) -> Result<Self> {
        let grid = *forcing.grid();
        Self::new(
            CoefficientField::identity(&grid),
            forcing,
            VecField::zeros(&grid),
            Field::zeros(&grid),
        )
    }

    pub fn with_exponents(mut self, p: f64, q: f64) -> Result<Self> {
        let n = self.grid().dim() as f64;
        if !(p > n / 2.0) || !(q > n) {
            return Err(LabError::InvalidExponents(format!(
                "need p > n/2 and q > n, got p = {p}, q = {q} for n = {n}"
            )));
        }
        self.p = p;
        self.q = q;
        Ok(self)
    }

    pub fn with_data_holder(mut self, forcing: Option<HolderCertificate>, field: Option<HolderCertificate>) -> Self {
        self.forcing_holder = forcing;
        self.field_holder = field;
        self
    }

    pub fn grid(&self) -> &Grid {
        self.coefficients.grid()
    }

    pub fn has_zero_data(&self) -> bool {
        self.forcing.is_zero() && self.field_term.is_zero()
    }

    /// Same problem with `(f, F, g)` multiplied by `c`.
    pub fn scaled(&self, c: f64) -> EllipticProblem {
        let mut out = self.clone();
        out.forcing = self.forcing.scaled(c);
        out.field_term = self.field_term.scaled(c);
        out.boundary = self.boundary.scaled(c);
        out
    }

    /// Content hash of the grid, coefficients, data and exponents.
    pub fn fingerprint(&self) -> String {
        let mut hasher = Sha256::new();
        let g = self.grid();
        hasher.update((g.dim() as u64).to_le_bytes());
        hasher.update((g.nodes_per_axis() as u64).to_le_bytes());
        hasher.update(g.half_width().to_le_bytes());
        let mut feed = |f: &Field| {
            for v in f.values() {
                hasher.update(v.to_le_bytes());
            }
        };
        self.coefficients.entries().iter().for_each(&mut feed);
        feed(&self.forcing);
        self.field_term.components().iter().for_each(&mut feed);
        feed(&self.boundary);
        hasher.update(self.p.to_le_bytes());
        hasher.update(self.q.to_le_bytes());
        hex::encode(&hasher.finalize()[..8])
    }
}

/// Assembled interior system.
#[derive(Debug, Clone)]
pub struct LinearSystem {
    pub operator: Operator,
    pub rhs: Vec<f64>,
}

impl LinearSystem {
    pub fn matrix(&self) -> &CsrMatrix {
        &self.operator.matrix
    }
}

pub fn assemble(problem: &EllipticProblem) -> LinearSystem {
    let operator = assemble_operator(&problem.coefficients);
    let rhs = assemble_rhs(&operator, &problem.forcing, &problem.field_term, &problem.boundary);
    LinearSystem { operator, rhs }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SolveDiagnostics {
    pub iterations: usize,
    pub relative_residual: f64,
    pub method: String,
    pub unknowns: usize,
}

#[derive(Debug, Clone)]
pub struct DiscreteSolution {
    pub u: Field,
    pub diagnostics: SolveDiagnostics,
    pub problem: EllipticProblem,
}

impl DiscreteSolution {
    /// Solution of the scaled problem (exact by linearity).
    pub fn scaled(&self, c: f64) -> DiscreteSolution {
        DiscreteSolution {
            u: self.u.scaled(c),
            diagnostics: self.diagnostics.clone(),
            problem: self.problem.scaled(c),
        }
    }

    pub fn grid(&self) -> &Grid {
        self.u.grid()
    }

    pub fn export(&self, dir: &std::path::Path, stem: &str) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let file = std::fs::File::create(dir.join(format!("{stem}.field")))?;
        self.u.write_binary(std::io::BufWriter::new(file))?;
        let record = serde_json::json!({
            "diagnostics": self.diagnostics,
            "fingerprint": self.problem.fingerprint(),
            "grid": self.u.grid(),
        });
        std::fs::write(
            dir.join(format!("{stem}.json")),
            serde_json::to_string_pretty(&record)?,
        )?;
        Ok(())
    }
}

fn krylov(
    system: &LinearSystem,
    pre: &dyn Preconditioner,
    x: &mut [f64],
    max_iter: usize,
) -> Result<SolveStats> {
    let a = system.matrix();
    let run = |x: &mut [f64]| {
        if system.operator.symmetric {
            pcg(a, &system.rhs, x, pre, SOLVER_TOLERANCE, max_iter)
        } else {
            bicgstab(a, &system.rhs, x, pre, SOLVER_TOLERANCE, max_iter)
        }
    };
    match run(x) {
        Err(LabError::SolverStagnation { iterations, residual }) if residual <= ACCEPTED_RESIDUAL => {
            Ok(SolveStats {
                iterations,
                relative_residual: residual,
            })
        }
        other => other,
    }
}

pub fn solve_dirichlet(problem: &EllipticProblem) -> Result<DiscreteSolution> {
    let grid = *problem.grid();
    let system = assemble(problem);
    let layout = &system.operator.layout;
    let max_iter = ITERATION_FACTOR * grid.nodes_per_axis();
    // Start from the mean boundary value so constant data are reproduced exactly.
    let (sum, count) = (0..grid.node_count())
        .filter(|&i| grid.is_boundary(i))
        .fold((0.0, 0usize), |(s, c), i| (s + problem.boundary.values()[i], c + 1));
    let mut x = vec![sum / count as f64; layout.unknowns()];
    let mg = Multigrid::build(&problem.coefficients, system.matrix())?;
    let (stats, method) = if mg.is_effective() {
        (krylov(&system, &mg, &mut x, max_iter)?, "multigrid")
    } else {
        (krylov(&system, &Jacobi::new(system.matrix()), &mut x, max_iter)?, "jacobi")
    };
    let mut values = problem.boundary.values().to_vec();
    for (i, v) in values.iter_mut().enumerate() {
        if !grid.is_boundary(i) {
            *v = 0.0;
        }
    }
    layout.scatter(&x, &mut values);
    let krylov_name = if system.operator.symmetric { "cg" } else { "bicgstab" };
    Ok(DiscreteSolution {
        u: Field::from_values(&grid, values)?,
        diagnostics: SolveDiagnostics {
            iterations: stats.iterations,
            relative_residual: stats.relative_residual,
            method: format!("{krylov_name}+{method}"),
            unknowns: layout.unknowns(),
        },
        problem: problem.clone(),
    })
}

/// `sum (A grad u . grad phi - f phi + F . grad phi) h^n` with central gradients.
pub fn weak_residual(u: &Field, problem: &EllipticProblem, phi: &Field) -> Result<f64> {
    let grid = *problem.grid();
    if *u.grid() != grid || *phi.grid() != grid {
        return Err(LabError::InvalidArgument("fields on different grids".into()));
    }
    if (0..grid.node_count()).any(|i| grid.boundary_depth(i) <= 1 && phi.values()[i] != 0.0) {
        return Err(LabError::SupportViolation(
            "test field must vanish on and next to the boundary".into(),
        ));
    }
    if phi.is_zero() {
        return Ok(0.0);
    }
    let gu = gradient(u);
    let gphi = gradient(phi);
    let n = grid.dim();
    let mut acc = 0.0;
    let (mut du, mut dphi) = ([0.0; 3], [0.0; 3]);
    for i in 0..grid.node_count() {
        let pv = phi.values()[i];
        for d in 0..n {
            du[d] = gu.component(d).values()[i];
            dphi[d] = gphi.component(d).values()[i];
        }
        if pv == 0.0 && dphi[..n].iter().all(|&v| v == 0.0) {
            continue;
        }
        acc += problem.coefficients.form_at(i, &du[..n], &dphi[..n]) - problem.forcing.values()[i] * pv
            + (0..n)
                .map(|d| problem.field_term.component(d).values()[i] * dphi[d])
                .sum::<f64>();
    }
    Ok(acc * grid.cell_volume())
}
