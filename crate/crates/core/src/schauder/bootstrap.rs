//! `C^{k,alpha}` by iterating the `C^{1,alpha}` estimate on derivatives.

use serde::Serialize;

use crate::calculus::{forcing_to_field, gradient, multi_derivative, multi_indices, partial};
use crate::error::{LabError, Result};
use crate::field::{Field, VecField};
use crate::grid::{BallRegion, MIN_BAND_SPACINGS};
use crate::norms::{ck_alpha_norm, lp};
use crate::report::EstimateReport;
use crate::solver::DiscreteSolution;

use super::{c0alpha_vector, origin};

#[derive(Debug, Clone, Serialize)]
pub struct BootstrapLevel {
    pub level: usize,
    pub r_inner: f64,
    pub r_outer: f64,
    /// One order-1 report per multi-index of this level.
    pub reports: Vec<EstimateReport>,
    pub max_ratio: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BootstrapReport {
    pub k: usize,
    pub alpha: f64,
    pub radii: Vec<f64>,
    pub levels: Vec<BootstrapLevel>,
    /// `||u||_{C^{k,alpha}(B_r)}` over `||u||_{L2} + ||f||_{C^{k-2,alpha}} + ||F||_{C^{k-1,alpha}}` on `B_R`.
    pub chained: EstimateReport,
    /// Product of the per-level maximal ratios.
    pub stage_product: f64,
}

impl BootstrapReport {
    pub fn chained_constant(&self) -> f64 {
        self.chained.ratio
    }
}

fn check_certificates(sol: &DiscreteSolution, k: usize) -> Result<()> {
    let p = &sol.problem;
    let reg = p.coefficients.regularity();
    if reg.holder.is_none() && reg.lipschitz_order < k {
        return Err(LabError::DataRegularityMissing("coefficients carry no Hölder certificate".into()));
    }
    if reg.lipschitz_order < k - 1 {
        return Err(LabError::DataRegularityMissing(format!(
            "coefficients need C^{{{}}} regularity, certified to Lipschitz order {}",
            k - 1,
            reg.lipschitz_order
        )));
    }
    if p.forcing_holder.is_none() && !p.forcing.is_zero() {
        return Err(LabError::DataRegularityMissing("forcing has no Hölder certificate".into()));
    }
    if p.field_holder.is_none() && !p.field_term.is_zero() {
        return Err(LabError::DataRegularityMissing("field term has no Hölder certificate".into()));
    }
    Ok(())
}

/// `sum_i ||F_i||_{C^{k,alpha}}` on the region.
fn ck_alpha_vector(field: &VecField, k: usize, alpha: f64, region: &BallRegion) -> Result<f64> {
    field
        .components()
        .iter()
        .map(|c| ck_alpha_norm(c, k, alpha, region).map(|v| v.value))
        .sum()
}

/// Source of the equation for `d_i w` given the source `G` of `w`:
/// `-div(A grad d_i w) = div((d_i A) grad w + d_i G)`.
fn next_source(sol: &DiscreteSolution, w: &Field, g: &VecField, axis: usize) -> Result<VecField> {
    let a = &sol.problem.coefficients;
    let n = w.grid().dim();
    let gw = gradient(w);
    let comps = (0..n)
        .map(|row| {
            let mut acc = partial(g.component(row), axis);
            for col in 0..n {
                acc = acc.add(&partial(a.entry(row, col), axis).mul(gw.component(col)));
            }
            acc
        })
        .collect();
    VecField::from_components(comps)
}

/// Order-1 estimates of `D^beta u` for `|beta| = 0..k-1` on the nested radii
/// `R = rho_0 > ... > rho_k = r`, with recursively composed sources.
pub fn bootstrap_ckalpha(sol: &DiscreteSolution, k: usize, alpha: f64, r: f64, big_r: f64) -> Result<BootstrapReport> {
    if !(2..=3).contains(&k) {
        return Err(LabError::InvalidArgument(format!("order {k} outside 2..=3")));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(LabError::InvalidArgument(format!("alpha = {alpha} outside (0, 1)")));
    }
    if !(0.0 < r && r < big_r) {
        return Err(LabError::InvalidArgument(format!("need 0 < r < R, got {r}, {big_r}")));
    }
    check_certificates(sol, k)?;
    let grid = *sol.grid();
    let n = grid.dim();
    let band = (big_r - r) / k as f64;
    let min_band = MIN_BAND_SPACINGS * grid.spacing();
    if band < min_band * (1.0 - 1e-12) {
        return Err(LabError::GridTooCoarse(format!("bootstrap band {band} below {min_band}")));
    }
    let radii: Vec<f64> = (0..=k).map(|j| big_r - j as f64 * band).collect();
    let o = origin(&grid);
    let ball = |rho: f64| BallRegion::new(&grid, &o, rho);
    let fp = sol.problem.fingerprint();
    let m = grid.nodes_per_axis();

    // Sources indexed like `multi_indices(n, level)`.
    let g0 = sol.problem.field_term.add(&forcing_to_field(&sol.problem.forcing));
    let mut sources: Vec<(Vec<usize>, VecField)> = vec![(vec![0; n], g0)];
    let mut levels = Vec::new();
    for level in 0..k {
        let (inner, outer) = (ball(radii[level + 1])?, ball(radii[level])?);
        let mut reports = Vec::new();
        for (beta, g) in &sources {
            let w = multi_derivative(&sol.u, beta);
            reports.push(
                EstimateReport::new(
                    &format!("bootstrap_level{level}"),
                    ck_alpha_norm(&w, 1, alpha, &inner)?.value,
                    vec![
                        ("w_l2".into(), lp(&w, 2.0, &outer)?),
                        ("G_c0alpha".into(), c0alpha_vector(g, alpha, &outer)?),
                    ],
                    (radii[level + 1], radii[level]),
                    m,
                    fp.clone(),
                )?
                .with_note("beta", beta.iter().enumerate().map(|(d, &b)| b as f64 * 10f64.powi(d as i32)).sum()),
            );
        }
        let max_ratio = reports.iter().map(|r| r.ratio).fold(0.0, f64::max);
        levels.push(BootstrapLevel {
            level,
            r_inner: radii[level + 1],
            r_outer: radii[level],
            reports,
            max_ratio,
        });
        if level + 1 < k {
            // Each multi-index of the next order from its lexicographically first parent.
            let mut next = Vec::new();
            for beta in multi_indices(n, level + 1) {
                let axis = beta.iter().position(|&b| b > 0).expect("positive order");
                let mut parent = beta.clone();
                parent[axis] -= 1;
                let (_, g) = sources.iter().find(|(b, _)| *b == parent).expect("parent source");
                let w = multi_derivative(&sol.u, &parent);
                next.push((beta, next_source(sol, &w, g, axis)?));
            }
            sources = next;
        }
    }

    let (inner, outer) = (ball(r)?, ball(big_r)?);
    let p = &sol.problem;
    let chained = EstimateReport::new(
        &format!("c{k}alpha_direct"),
        ck_alpha_norm(&sol.u, k, alpha, &inner)?.value,
        vec![
            ("u_l2".into(), lp(&sol.u, 2.0, &outer)?),
            ("f_ck".into(), ck_alpha_norm(&p.forcing, k - 2, alpha, &outer)?.value),
            ("F_ck".into(), ck_alpha_vector(&p.field_term, k - 1, alpha, &outer)?),
        ],
        (r, big_r),
        m,
        fp,
    )?;
    let stage_product = levels.iter().map(|l| l.max_ratio).product();
    Ok(BootstrapReport {
        k,
        alpha,
        radii,
        levels,
        chained,
        stage_product,
    })
}
