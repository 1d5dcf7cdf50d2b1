//! Regularize the data by mollification, re-solve on an inner box with the
//! original solution as boundary values, and measure the convergence.

use serde::Serialize;

use crate::calculus::Mollifier;
use crate::error::{LabError, Result};
use crate::field::{Field, VecField};
use crate::grid::{BallRegion, Grid};
use crate::norms::{hk_norm, lp};
use crate::solver::{solve_dirichlet, CoefficientField, DiscreteSolution, EllipticProblem, Ellipticity, Regularity};

use super::origin;

/// The inner box keeps this fraction of the half-width.
pub const INNER_FRACTION: f64 = 0.75;

#[derive(Debug, Clone, Serialize)]
pub struct ApproximationStep {
    pub epsilon: f64,
    /// `||u_eps - u||_{H^1}` on the measurement ball.
    pub h1_error: f64,
    /// `||u_eps||_{L2} / ||u||_{L2}` on the inner ball; must not exceed 2.
    pub l2_ratio: f64,
    pub ellipticity: Ellipticity,
    /// `lambda_eps >= lambda` and `Lambda_eps <= Lambda`, `L_eps <= L`.
    pub ellipticity_preserved: bool,
    pub iterations: usize,
    #[serde(skip)]
    pub solution: DiscreteSolution,
}

#[derive(Debug, Clone, Serialize)]
pub struct ApproximationRecord {
    pub inner_grid: Grid,
    pub measure_radius: f64,
    pub ellipticity: Ellipticity,
    pub steps: Vec<ApproximationStep>,
    #[serde(skip)]
    pub reference: DiscreteSolution,
}

impl ApproximationRecord {
    pub fn errors(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.h1_error).collect()
    }

    pub fn strictly_decreasing(&self) -> bool {
        self.errors().windows(2).all(|w| w[1] < w[0])
    }

    /// The reference solution restricted to the inner box.
    pub fn reference_inner(&self) -> Result<Field> {
        self.reference.u.restrict(&self.inner_grid)
    }
}

/// Nodes per axis of the inner box: `2 round(0.75 (m-1)/2) + 1`.
pub fn inner_nodes(m: usize) -> usize {
    2 * (INNER_FRACTION * (m - 1) as f64 / 2.0).round() as usize + 1
}

fn mollified_restricted(k: &Mollifier, g: &Field, inner: &Grid) -> Result<Field> {
    k.apply(g)?.field.restrict(inner)
}

/// For each `eps` of the decreasing schedule: mollify `A`, `f`, `F`, solve on
/// the inner box with the reference solution as Dirichlet data, and compare.
pub fn regularize_approximate(
    problem: &EllipticProblem,
    epsilons: &[f64],
    reference: Option<&DiscreteSolution>,
    radius: Option<f64>,
) -> Result<ApproximationRecord> {
    if epsilons.is_empty() || epsilons.windows(2).any(|w| w[1] >= w[0]) {
        return Err(LabError::InvalidArgument("epsilon schedule must be nonempty and decreasing".into()));
    }
    let grid = *problem.grid();
    let reference = match reference {
        Some(s) => s.clone(),
        None => solve_dirichlet(problem)?,
    };
    let m = grid.nodes_per_axis();
    let mi = inner_nodes(m);
    let h = grid.spacing();
    let inner = Grid::new(grid.dim(), (mi - 1) as f64 / 2.0 * h, mi)?;
    let margin = (m - mi) / 2;
    let measure_radius = radius.unwrap_or(INNER_FRACTION * inner.half_width());
    let o = origin(&inner);
    let measure = BallRegion::new(&inner, &o, measure_radius)?;
    let whole = BallRegion::new(&inner, &o, inner.half_width())?;
    let u_inner = reference.u.restrict(&inner)?;
    let u_l2 = lp(&u_inner, 2.0, &whole)?;
    let base = problem.coefficients.ellipticity();
    let steps = epsilons
        .iter()
        .map(|&eps| {
            let k = Mollifier::new(&grid, eps)?;
            if k.reach() > margin {
                return Err(LabError::InvalidArgument(format!(
                    "mollifier reach {} exceeds the inner-box margin {margin}",
                    k.reach()
                )));
            }
            let entries = problem
                .coefficients
                .entries()
                .iter()
                .map(|e| mollified_restricted(&k, e, &inner))
                .collect::<Result<Vec<_>>>()?;
            let reg = problem.coefficients.regularity();
            let a = CoefficientField::new(entries)?.with_regularity(Regularity {
                holder: reg.holder,
                lipschitz_order: reg.lipschitz_order.max(3),
            });
            let f = mollified_restricted(&k, &problem.forcing, &inner)?;
            let big_f = VecField::from_components(
                problem
                    .field_term
                    .components()
                    .iter()
                    .map(|c| mollified_restricted(&k, c, &inner))
                    .collect::<Result<Vec<_>>>()?,
            )?;
            let sub = EllipticProblem::new(a, f, big_f, u_inner.clone())?
                .with_exponents(problem.p, problem.q)?
                .with_data_holder(problem.forcing_holder, problem.field_holder);
            let ellipticity = sub.coefficients.ellipticity();
            let solution = solve_dirichlet(&sub)?;
            let slack = 1e-12;
            Ok(ApproximationStep {
                epsilon: eps,
                h1_error: hk_norm(&solution.u.sub(&u_inner), 1, &measure)?.value,
                l2_ratio: if u_l2 > 0.0 { lp(&solution.u, 2.0, &whole)? / u_l2 } else { 0.0 },
                ellipticity_preserved: ellipticity.lambda >= base.lambda - slack
                    && ellipticity.big_lambda <= base.big_lambda + slack
                    && ellipticity.sup_entry <= base.sup_entry + slack,
                ellipticity,
                iterations: solution.diagnostics.iterations,
                solution,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ApproximationRecord {
        inner_grid: inner,
        measure_radius,
        ellipticity: base,
        steps,
        reference,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::{generate, EnsembleSpec, Texture};

    #[test]
    fn inner_box_size() {
        assert_eq!(inner_nodes(257), 193);
        assert_eq!(inner_nodes(129), 97);
        assert_eq!(inner_nodes(65), 49);
    }

    #[test]
    fn constant_coefficients_are_reproduced() {
        let g = Grid::new(2, 1.0, 65).unwrap();
        let a = CoefficientField::constant(&g, &[1.2, 0.1, 0.1, 0.9]).unwrap();
        // Linear data are invariant under the symmetric kernel.
        let p = EllipticProblem::new(
            a,
            Field::from_fn(&g, |x| 1.0 + x[0] - 0.5 * x[1]),
            VecField::from_fn(&g, |x| vec![x[1], 2.0 - x[0]]),
            Field::from_fn(&g, |x| x[0] * x[1] + x[0]),
        )
        .unwrap();
        let h = g.spacing();
        let rec = regularize_approximate(&p, &[8.0 * h, 4.0 * h, 2.0 * h], None, None).unwrap();
        for s in &rec.steps {
            assert!(s.h1_error < 1e-8, "{}", s.h1_error);
            assert!(s.l2_ratio <= 2.0);
            assert!(s.ellipticity_preserved);
        }
    }

    #[test]
    fn rough_coefficients_converge() {
        let spec = EnsembleSpec::new(2, 1, 7).texture(Texture::Holder).holder_alpha(0.3);
        let inst = &generate(&spec).unwrap()[0];
        let g = inst.grid(129).unwrap();
        let p = inst.problem(&g).unwrap();
        let h = g.spacing();
        let rec = regularize_approximate(&p, &[8.0 * h, 4.0 * h, 2.02 * h], None, None).unwrap();
        assert!(rec.strictly_decreasing(), "{:?}", rec.errors());
        assert!(rec.steps.iter().all(|s| s.ellipticity_preserved && s.l2_ratio <= 2.0));
    }

    #[test]
    fn under_resolved_kernel() {
        let g = Grid::new(2, 1.0, 33).unwrap();
        let p = EllipticProblem::homogeneous(CoefficientField::identity(&g), Field::zeros(&g)).unwrap();
        assert!(matches!(
            regularize_approximate(&p, &[g.spacing()], None, None),
            Err(LabError::KernelUnderResolved { .. })
        ));
    }
}
