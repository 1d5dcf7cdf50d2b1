//! Energy (Caccioppoli) inequalities evaluated on discrete solutions:
//! standard, zero right-hand side, and for truncations `(u - b)_±`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calculus::gradient;
use crate::error::{LabError, Result};
use crate::field::{Field, VecField};
use crate::grid::{BallRegion, Cutoff, Grid};
use crate::norms::{lp, lp_of_components};
use crate::report::EstimateReport;
use crate::solver::{DiscreteSolution, Ellipticity};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sign {
    /// `v = (u - b)_+`
    Plus,
    /// `w = (u - b)_- = max(b - u, 0)`
    Minus,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Variant {
    Standard,
    ZeroRhs,
    /// Truncation at the median of `u` over `B_R`, cutoff between `r` and `R`.
    TruncatedMedian { sign: Sign },
}

fn origin(grid: &Grid) -> Vec<f64> {
    vec![0.0; grid.dim()]
}

/// Validates `0 < r < R`, the band width and that `B_R` fits in the box.
fn regions(grid: &Grid, r: f64, big_r: f64) -> Result<(BallRegion, BallRegion)> {
    Cutoff::new(grid, r, big_r)?;
    let o = origin(grid);
    Ok((BallRegion::new(grid, &o, r)?, BallRegion::new(grid, &o, big_r)?))
}

fn gradient_l2(u: &Field, region: &BallRegion) -> Result<f64> {
    let g = gradient(u);
    let comps: Vec<&Field> = g.components().iter().collect();
    lp_of_components(&comps, 2.0, region)
}

fn vec_l2(f: &VecField, region: &BallRegion) -> Result<f64> {
    let comps: Vec<&Field> = f.components().iter().collect();
    lp_of_components(&comps, 2.0, region)
}

/// `||grad u||_{L2(B_r)}` against `(R-r)^{-1} ||u||_{L2(B_R)} + ||f||_{L2(B_R)} + ||F||_{L2(B_R)}`.
pub fn caccioppoli_check(sol: &DiscreteSolution, r: f64, big_r: f64) -> Result<EstimateReport> {
    let grid = *sol.grid();
    let (inner, outer) = regions(&grid, r, big_r)?;
    let p = &sol.problem;
    EstimateReport::new(
        "caccioppoli",
        gradient_l2(&sol.u, &inner)?,
        vec![
            ("u_l2".into(), lp(&sol.u, 2.0, &outer)? / (big_r - r)),
            ("f_l2".into(), lp(&p.forcing, 2.0, &outer)?),
            ("F_l2".into(), vec_l2(&p.field_term, &outer)?),
        ],
        (r, big_r),
        grid.nodes_per_axis(),
        p.fingerprint(),
    )
}

pub fn caccioppoli_zero_rhs_check(sol: &DiscreteSolution, r: f64, big_r: f64) -> Result<EstimateReport> {
    if !sol.problem.has_zero_data() {
        return Err(LabError::WrongVariant(
            "zero right-hand side variant needs f = 0 and F = 0".into(),
        ));
    }
    zero_rhs_report(&sol.u, r, big_r, sol.problem.fingerprint())
}

/// Two-term report for any field assumed to solve an equation with zero data.
pub fn zero_rhs_report(u: &Field, r: f64, big_r: f64, fingerprint: String) -> Result<EstimateReport> {
    let grid = *u.grid();
    let (inner, outer) = regions(&grid, r, big_r)?;
    EstimateReport::new(
        "caccioppoli_zero_rhs",
        gradient_l2(u, &inner)?,
        vec![("u_l2".into(), lp(u, 2.0, &outer)? / (big_r - r))],
        (r, big_r),
        grid.nodes_per_axis(),
        fingerprint,
    )
}

/// Truncation `(u - b)_±` as a field.
pub fn truncate(u: &Field, b: f64, sign: Sign) -> Field {
    match sign {
        Sign::Plus => u.map(|v| (v - b).max(0.0)),
        Sign::Minus => u.map(|v| (b - v).max(0.0)),
    }
}

/// Sums over `B_rho ∩ {v > 0}` of `|grad(eta v)|^2` against `v^2 |grad eta|^2`,
/// `|f| eta^2 v` and `|F|^2`, with `eta` the cutoff between `r` and `rho`.
pub fn truncated_caccioppoli(sol: &DiscreteSolution, b: f64, sign: Sign, r: f64, rho: f64) -> Result<EstimateReport> {
    let grid = *sol.grid();
    let eta = Cutoff::new(&grid, r, rho)?;
    let ball = BallRegion::new(&grid, &origin(&grid), rho)?;
    let v = truncate(&sol.u, b, sign);
    let level = ball.filter(|i| v.values()[i] > 0.0);
    let eta_f = eta.field();
    let grad_eta = gradient(eta_f);
    let grad_prod = gradient(&eta_f.mul(&v));
    let p = &sol.problem;
    let n = grid.dim();
    let (mut lhs, mut t1, mut t2, mut t3) = (0.0, 0.0, 0.0, 0.0);
    for &i in level.nodes() {
        let vi = v.values()[i];
        let e = eta_f.values()[i];
        let sq = |g: &VecField| (0..n).map(|d| g.component(d).values()[i].powi(2)).sum::<f64>();
        lhs += sq(&grad_prod);
        t1 += vi * vi * sq(&grad_eta);
        t2 += p.forcing.values()[i].abs() * e * e * vi;
        t3 += sq(&p.field_term);
    }
    let hn = grid.cell_volume();
    let id = match sign {
        Sign::Plus => "caccioppoli_truncated_plus",
        Sign::Minus => "caccioppoli_truncated_minus",
    };
    Ok(EstimateReport::new(
        id,
        lhs * hn,
        vec![
            ("v_grad_eta".into(), t1 * hn),
            ("f_eta_v".into(), t2 * hn),
            ("F_sq".into(), t3 * hn),
        ],
        (r, rho),
        grid.nodes_per_axis(),
        p.fingerprint(),
    )?
    .with_note("level", b)
    .with_note("level_set_nodes", level.len() as f64))
}

/// Median of the nodal values of `u` over `B_R` (lower median).
pub fn median_on(u: &Field, region: &BallRegion) -> Result<f64> {
    if region.is_empty() {
        return Err(LabError::EmptyRegion("median over an empty ball".into()));
    }
    let mut vals: Vec<f64> = region.nodes().iter().map(|&i| u.values()[i]).collect();
    vals.sort_by(|a, b| a.total_cmp(b));
    Ok(vals[(vals.len() - 1) / 2])
}

pub fn variant_report(sol: &DiscreteSolution, r: f64, big_r: f64, variant: Variant) -> Result<EstimateReport> {
    match variant {
        Variant::Standard => caccioppoli_check(sol, r, big_r),
        Variant::ZeroRhs => caccioppoli_zero_rhs_check(sol, r, big_r),
        Variant::TruncatedMedian { sign } => {
            let ball = BallRegion::new(sol.grid(), &origin(sol.grid()), big_r)?;
            let b = median_on(&sol.u, &ball)?;
            truncated_caccioppoli(sol, b, sign, r, big_r)
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EmpiricalConstant {
    pub value: f64,
    pub ensemble_size: usize,
    pub certificate: Ellipticity,
    pub variant: Variant,
    pub reports: Vec<EstimateReport>,
}

/// Largest realized ratio over the ensemble together with the union certificate.
pub fn empirical_constant(
    ensemble: &[DiscreteSolution],
    r: f64,
    big_r: f64,
    variant: Variant,
) -> Result<EmpiricalConstant> {
    let first = ensemble
        .first()
        .ok_or_else(|| LabError::IncompatibleEnsemble("empty ensemble".into()))?;
    let grid = *first.grid();
    if ensemble.iter().any(|s| *s.grid() != grid) {
        return Err(LabError::IncompatibleEnsemble("solutions live on different grids".into()));
    }
    let reports = ensemble
        .par_iter()
        .map(|s| variant_report(s, r, big_r, variant))
        .collect::<Result<Vec<_>>>()?;
    let certificate = ensemble
        .iter()
        .map(|s| s.problem.coefficients.ellipticity())
        .reduce(Ellipticity::union)
        .expect("nonempty");
    Ok(EmpiricalConstant {
        value: reports.iter().map(|r| r.ratio).fold(0.0, f64::max),
        ensemble_size: ensemble.len(),
        certificate,
        variant,
        reports,
    })
}
