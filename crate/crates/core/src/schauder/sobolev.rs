//! Interior `H^k` estimates and the differentiated equation.

use crate::calculus::{forcing_to_field, gradient, partial};
use crate::error::{LabError, Result};
use crate::field::{Field, VecField};
use crate::grid::BallRegion;
use crate::norms::{hk_norm, lp};
use crate::report::EstimateReport;
use crate::solver::{weak_residual, DiscreteSolution, EllipticProblem};

use super::origin;

fn require_lipschitz(sol: &DiscreteSolution, order: usize) -> Result<()> {
    let have = sol.problem.coefficients.regularity().lipschitz_order;
    if have < order {
        return Err(LabError::DataRegularityMissing(format!(
            "coefficients certified to Lipschitz order {have}, need {order}"
        )));
    }
    Ok(())
}

fn hk_of_vector(field: &VecField, k: usize, region: &BallRegion) -> Result<f64> {
    let mut acc = 0.0;
    for c in field.components() {
        acc += hk_norm(c, k, region)?.value.powi(2);
    }
    Ok(acc.sqrt())
}

/// `||u||_{H^k(B_r)}` against `||u||_{L2(B_R)} + ||G||_{H^{k-1}(B_R)}` with
/// `G = F + F_f`, where `div F_f = f` absorbs the forcing.
pub fn sobolev_estimate_check(sol: &DiscreteSolution, k: usize, r: f64, big_r: f64) -> Result<EstimateReport> {
    if !(1..=3).contains(&k) {
        return Err(LabError::InvalidArgument(format!("order {k} outside 1..=3")));
    }
    require_lipschitz(sol, k - 1)?;
    if !(0.0 < r && r < big_r) {
        return Err(LabError::InvalidArgument(format!("need 0 < r < R, got {r}, {big_r}")));
    }
    let grid = *sol.grid();
    let o = origin(&grid);
    let inner = BallRegion::new(&grid, &o, r)?;
    let outer = BallRegion::new(&grid, &o, big_r)?;
    let g = sol.problem.field_term.add(&forcing_to_field(&sol.problem.forcing));
    Ok(EstimateReport::new(
        &format!("sobolev_h{k}"),
        hk_norm(&sol.u, k, &inner)?.value,
        vec![
            ("u_l2".into(), lp(&sol.u, 2.0, &outer)?),
            ("G_hk".into(), hk_of_vector(&g, k - 1, &outer)?),
        ],
        (r, big_r),
        grid.nodes_per_axis(),
        sol.problem.fingerprint(),
    )?
    .with_note("order", k as f64))
}

/// The same check for `r = R - gap` over several gaps.
pub fn sobolev_sweep(sol: &DiscreteSolution, k: usize, big_r: f64, gaps: &[f64]) -> Result<Vec<EstimateReport>> {
    gaps.iter()
        .map(|&gap| sobolev_estimate_check(sol, k, big_r - gap, big_r))
        .collect()
}

/// `G = (d_i A) grad u + f e_i + d_i F`, the field term of the equation
/// satisfied by `d_i u`.
pub fn derivative_source(sol: &DiscreteSolution, axis: usize) -> Result<VecField> {
    let grid = *sol.grid();
    let n = grid.dim();
    if axis >= n {
        return Err(LabError::InvalidArgument(format!("axis {axis} out of range")));
    }
    let a = &sol.problem.coefficients;
    let gu = gradient(&sol.u);
    let comps = (0..n)
        .map(|row| {
            let mut acc = partial(sol.problem.field_term.component(row), axis);
            for col in 0..n {
                acc = acc.add(&partial(a.entry(row, col), axis).mul(gu.component(col)));
            }
            if row == axis {
                acc = acc.add(&sol.problem.forcing);
            }
            acc
        })
        .collect();
    VecField::from_components(comps)
}

/// Weak residual of `-div(A grad u_i) = div G` for the discrete `u_i = d_i u`.
pub fn derivative_equation_residual(sol: &DiscreteSolution, axis: usize, phi: &Field) -> Result<f64> {
    require_lipschitz(sol, 1)?;
    let grid = *sol.grid();
    let problem = EllipticProblem::new(
        sol.problem.coefficients.clone(),
        Field::zeros(&grid),
        derivative_source(sol, axis)?,
        Field::zeros(&grid),
    )?;
    weak_residual(&partial(&sol.u, axis), &problem, phi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Cutoff, Grid};
    use crate::solver::{solve_dirichlet, CoefficientField, Regularity};

    fn saddle(m: usize) -> DiscreteSolution {
        let g = Grid::new(2, 1.0, m).unwrap();
        let p = EllipticProblem::homogeneous(
            CoefficientField::identity(&g),
            Field::from_fn(&g, |x| x[0] * x[0] - x[1] * x[1]),
        )
        .unwrap();
        solve_dirichlet(&p).unwrap()
    }

    #[test]
    fn saddle_h2_ratio() {
        let sol = saddle(129);
        let rep = sobolev_estimate_check(&sol, 2, 0.5, 0.9).unwrap();
        // ||u||^2 on B_r: r^6 pi/6 + 2 pi r^4 + 8 pi r^2 (tensor-free sum: 4 + 4 second-order terms).
        let r: f64 = 0.5;
        let pi = std::f64::consts::PI;
        let exact = (pi * r.powi(6) / 6.0 + 2.0 * pi * r.powi(4) + 8.0 * pi * r * r).sqrt();
        assert!((rep.lhs / exact - 1.0).abs() < 0.03, "{} vs {exact}", rep.lhs);
        assert!(rep.ratio.is_finite() && rep.ratio > 0.0);
        assert_eq!(rep.component("G_hk"), Some(0.0));
    }

    #[test]
    fn constant_ratio_at_most_one() {
        let g = Grid::new(2, 1.0, 65).unwrap();
        let sol = solve_dirichlet(
            &EllipticProblem::homogeneous(CoefficientField::identity(&g), Field::constant(&g, 2.0)).unwrap(),
        )
        .unwrap();
        let rep = sobolev_estimate_check(&sol, 2, 0.5, 0.9).unwrap();
        assert!(rep.ratio <= 1.0 + 1e-9, "{}", rep.ratio);
    }

    #[test]
    fn gap_sweep_growth_is_bounded() {
        let sol = saddle(129);
        let reps = sobolev_sweep(&sol, 2, 0.9, &[0.4, 0.2, 0.1]).unwrap();
        for w in reps.windows(2) {
            assert!(w[1].ratio / w[0].ratio <= 4.0 * 1.2);
        }
    }

    #[test]
    fn missing_regularity() {
        let g = Grid::new(2, 1.0, 17).unwrap();
        let a = CoefficientField::identity(&g).with_regularity(Regularity::default());
        let sol = solve_dirichlet(&EllipticProblem::homogeneous(a, Field::zeros(&g)).unwrap()).unwrap();
        assert!(matches!(
            sobolev_estimate_check(&sol, 2, 0.5, 0.9),
            Err(LabError::DataRegularityMissing(_))
        ));
        assert!(sobolev_estimate_check(&sol, 1, 0.5, 0.9).is_ok());
    }

    #[test]
    fn differentiated_saddle_is_exact() {
        let sol = saddle(65);
        let phi = Cutoff::new(sol.grid(), 0.3, 0.6).unwrap().field().clone();
        assert!(derivative_equation_residual(&sol, 0, &phi).unwrap().abs() <= 1e-10);
        assert_eq!(derivative_equation_residual(&sol, 0, &Field::zeros(sol.grid())).unwrap(), 0.0);
    }

    #[test]
    fn variable_coefficient_residual_decays() {
        let run = |m: usize| {
            let g = Grid::new(2, 1.0, m).unwrap();
            let a = CoefficientField::from_fn(&g, |x| {
                let s = 1.0 + 0.3 * x[0].sin() * x[1].cos();
                vec![s, 0.1 * x[1], 0.1 * x[1], 1.0]
            })
            .unwrap()
            .with_regularity(Regularity { holder: None, lipschitz_order: 3 });
            let p = EllipticProblem::new(
                a,
                Field::from_fn(&g, |x| (x[0] + 2.0 * x[1]).cos()),
                VecField::zeros(&g),
                Field::from_fn(&g, |x| x[0] * x[1]),
            )
            .unwrap();
            let sol = solve_dirichlet(&p).unwrap();
            let phi = Cutoff::new(&g, 0.2, 0.6).unwrap().field().clone();
            derivative_equation_residual(&sol, 0, &phi).unwrap().abs()
        };
        let (coarse, fine) = (run(65), run(129));
        assert!(coarse / fine >= 1.8, "{coarse} {fine}");
    }
}
