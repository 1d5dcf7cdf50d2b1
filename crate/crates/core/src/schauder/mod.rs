//! Hölder and Sobolev estimates as measurements: exponent admissibility,
//! estimate ratios, blow-up sequences, approximation and bootstrap.

mod approximation;
mod blowup;
mod bootstrap;
mod radial;
mod sobolev;

pub use approximation::{regularize_approximate, ApproximationRecord, ApproximationStep};
pub use blowup::{
    blowup_sequence, growth_fit, BlowupRecord, BlowupStep, GrowthFit, WINDOW_HALF_WIDTH, WINDOW_NODES,
};
pub use bootstrap::{bootstrap_ckalpha, BootstrapLevel, BootstrapReport};
pub use radial::{holder_exponent_at, origin_cell_average, radial_exact, radial_problem};
pub use sobolev::{derivative_equation_residual, derivative_source, sobolev_estimate_check, sobolev_sweep};

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::field::{Field, VecField};
use crate::grid::{BallRegion, Grid};
use crate::norms::{ck_alpha_norm, holder_seminorm_vector, lp, lp_of_components};
use crate::report::EstimateReport;
use crate::solver::DiscreteSolution;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AlphaThreshold {
    /// Value of the threshold formula.
    pub raw: f64,
    /// `min(raw, 1)`: exponents must also lie in `(0, 1)`.
    pub capped: f64,
    pub was_capped: bool,
}

/// Order 0: `min{2 - n/p, 1 - n/q}`; order 1: `1 - n/p`.
pub fn admissible_alpha(n: usize, p: f64, q: f64, order: usize) -> Result<AlphaThreshold> {
    let nf = n as f64;
    let raw = match order {
        0 => {
            if !(p > nf / 2.0) || !(q > nf) {
                return Err(LabError::InvalidExponents(format!(
                    "order 0 needs p > n/2 and q > n, got p = {p}, q = {q}, n = {n}"
                )));
            }
            (2.0 - nf / p).min(1.0 - nf / q)
        }
        1 => {
            if !(p > nf) {
                return Err(LabError::InvalidExponents(format!("order 1 needs p > n, got p = {p}, n = {n}")));
            }
            1.0 - nf / p
        }
        _ => return Err(LabError::InvalidArgument(format!("order {order} is not 0 or 1"))),
    };
    Ok(AlphaThreshold {
        raw,
        capped: raw.min(1.0),
        was_capped: raw >= 1.0,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchauderConfig {
    pub order: usize,
    pub alpha: f64,
    pub p: f64,
    pub q: f64,
    pub r: f64,
    pub big_r: f64,
    /// Mollification radii for the approximation scheme, decreasing.
    #[serde(default)]
    pub epsilons: Vec<f64>,
}

impl SchauderConfig {
    pub fn new(n: usize, order: usize, alpha: f64, p: f64, q: f64, r: f64, big_r: f64) -> Result<Self> {
        let cfg = SchauderConfig {
            order,
            alpha,
            p,
            q,
            r,
            big_r,
            epsilons: Vec::new(),
        };
        cfg.validate(n)?;
        Ok(cfg)
    }

    pub fn with_epsilons(mut self, epsilons: &[f64]) -> Self {
        self.epsilons = epsilons.to_vec();
        self
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        let max = admissible_alpha(n, self.p, self.q, self.order)?;
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(LabError::InvalidArgument(format!("alpha = {} outside (0, 1)", self.alpha)));
        }
        if self.alpha > max.raw {
            return Err(LabError::InvalidExponents(format!(
                "alpha = {} exceeds the threshold {}",
                self.alpha, max.raw
            )));
        }
        if !(0.0 < self.r && self.r < self.big_r) {
            return Err(LabError::InvalidArgument(format!("need 0 < r < R, got {}, {}", self.r, self.big_r)));
        }
        if self.epsilons.windows(2).any(|w| w[1] >= w[0]) {
            return Err(LabError::InvalidArgument("epsilon schedule must decrease".into()));
        }
        Ok(())
    }
}

pub(crate) fn origin(grid: &Grid) -> Vec<f64> {
    vec![0.0; grid.dim()]
}

/// `sup |F| + [F]_alpha` of a vector field on the region.
pub fn c0alpha_vector(field: &VecField, alpha: f64, region: &BallRegion) -> Result<f64> {
    let comps: Vec<&Field> = field.components().iter().collect();
    Ok(lp_of_components(&comps, f64::INFINITY, region)? + holder_seminorm_vector(&comps, alpha, region)?.value)
}

/// `||u||_{C^{order,alpha}(B_r)}` against `||u||_{L2(B_R)} + ||f||_{L^p(B_R)}`
/// plus `||F||_{L^q(B_R)}` (order 0) or `||F||_{C^{0,alpha}(B_R)}` (order 1).
pub fn schauder_ratio(sol: &DiscreteSolution, cfg: &SchauderConfig) -> Result<EstimateReport> {
    let grid = *sol.grid();
    cfg.validate(grid.dim())?;
    let problem = &sol.problem;
    if cfg.order == 1 && problem.field_holder.is_none() && !problem.field_term.is_zero() {
        return Err(LabError::DataRegularityMissing("order 1 needs a Hölder certificate for F".into()));
    }
    let o = origin(&grid);
    let inner = BallRegion::new(&grid, &o, cfg.r)?;
    let outer = BallRegion::new(&grid, &o, cfg.big_r)?;
    let lhs = ck_alpha_norm(&sol.u, cfg.order, cfg.alpha, &inner)?.value;
    let comps: Vec<&Field> = problem.field_term.components().iter().collect();
    let field_part = if cfg.order == 0 {
        ("F_lq", lp_of_components(&comps, cfg.q, &outer)?)
    } else {
        ("F_c0alpha", c0alpha_vector(&problem.field_term, cfg.alpha, &outer)?)
    };
    Ok(EstimateReport::new(
        if cfg.order == 0 { "schauder_c0alpha" } else { "schauder_c1alpha" },
        lhs,
        vec![
            ("u_l2".into(), lp(&sol.u, 2.0, &outer)?),
            ("f_lp".into(), lp(&problem.forcing, cfg.p, &outer)?),
            (field_part.0.into(), field_part.1),
        ],
        (cfg.r, cfg.big_r),
        grid.nodes_per_axis(),
        problem.fingerprint(),
    )?
    .with_note("alpha", cfg.alpha)
    .with_note("order", cfg.order as f64))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum EstimateKind {
    /// `||u||_{H^2}` bound: the constant becomes `C / t^2`.
    H2,
    /// Hölder estimate of the given order: each side transforms separately.
    Holder { n: usize, order: usize, alpha: f64, p: f64, q: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RescaledEstimate {
    pub t: f64,
    pub kind: EstimateKind,
    /// Single-factor kinds: the rescaled constant.
    pub constant: Option<f64>,
    /// Factor by which each norm of `v(x) = u(x0 + t x)` on the unit ball
    /// multiplies the corresponding norm of `u` on `B_t(x0)`.
    pub factors: Vec<(String, f64)>,
}

/// Transfers an estimate proved on unit balls to balls of radius `t`.
pub fn rescale_estimate(c_unit: f64, t: f64, kind: EstimateKind) -> Result<RescaledEstimate> {
    if !(t > 0.0 && t <= 1.0) {
        return Err(LabError::InvalidScale(t));
    }
    Ok(match kind {
        EstimateKind::H2 => RescaledEstimate {
            t,
            kind,
            constant: Some(c_unit / (t * t)),
            factors: vec![("h2_constant".into(), 1.0 / (t * t))],
        },
        EstimateKind::Holder { n, order, alpha, p, q } => {
            let nf = n as f64;
            let mut factors = vec![("sup".to_string(), 1.0)];
            if order == 1 {
                factors.push(("gradient_sup".into(), t));
                factors.push(("seminorm".into(), t.powf(1.0 + alpha)));
            } else {
                factors.push(("seminorm".into(), t.powf(alpha)));
            }
            factors.push(("u_l2".into(), t.powf(-nf / 2.0)));
            factors.push(("f_lp".into(), t.powf(2.0 - nf / p)));
            if order == 1 {
                factors.push(("F_sup".into(), t));
                factors.push(("F_seminorm".into(), t.powf(1.0 + alpha)));
            } else {
                factors.push(("F_lq".into(), t.powf(1.0 - nf / q)));
            }
            RescaledEstimate {
                t,
                kind,
                constant: None,
                factors,
            }
        }
    })
}

impl RescaledEstimate {
    pub fn factor(&self, label: &str) -> Option<f64> {
        self.factors.iter().find(|(l, _)| l == label).map(|(_, v)| *v)
    }
}

/// Samples `v(x) = u(x0 + t x)` on `target` by multilinear interpolation.
pub fn rescale_field(u: &Field, x0: &[f64], t: f64, target: &Grid) -> Result<Field> {
    if !(t > 0.0 && t <= 1.0) {
        return Err(LabError::InvalidScale(t));
    }
    let hw = u.grid().half_width();
    let reach = target.half_width() * (target.dim() as f64).sqrt();
    if x0.iter().any(|c| c.abs() + t * reach > hw * (1.0 + 1e-12)) {
        return Err(LabError::RegionEscapesDomain {
            center: x0.to_vec(),
            radius: t * reach,
            half_width: hw,
        });
    }
    let n = target.dim();
    Ok(Field::from_fn(target, |x| {
        let y: Vec<f64> = (0..n).map(|d| x0[d] + t * x[d]).collect();
        u.interpolate(&y)
    }))
}

/// Maximum of `values` on log-spaced shells `[a_i, a_{i+1})` between `inner`
/// and `outer` around `center`: one `(distance, value)` per nonempty shell,
/// the distance being that of the maximizing node. At most `shells` shells,
/// fewer if the innermost would be thinner than the grid spacing.
pub(crate) fn shell_maxima(
    grid: &Grid,
    values: impl Fn(usize) -> Option<f64>,
    center: &[f64],
    inner: f64,
    outer: f64,
    shells: usize,
) -> Vec<(f64, f64)> {
    if !(inner > 0.0 && inner < outer) {
        return Vec::new();
    }
    let h = grid.spacing() * (1.0 - 1e-9);
    let shells = (1..=shells)
        .rev()
        .find(|&k| inner * ((outer / inner).powf(1.0 / k as f64) - 1.0) >= h)
        .unwrap_or(0);
    if shells == 0 {
        return Vec::new();
    }
    let ratio = (outer / inner).ln() / shells as f64;
    let mut best: Vec<Option<(f64, f64)>> = vec![None; shells];
    for i in 0..grid.node_count() {
        let d = grid.distance(i, center);
        if d < inner || d > outer {
            continue;
        }
        let Some(v) = values(i) else { continue };
        let s = (((d / inner).ln() / ratio) as usize).min(shells - 1);
        let v = v.abs();
        if best[s].map_or(true, |(_, b)| v > b) {
            best[s] = Some((d, v));
        }
    }
    best.into_iter().flatten().collect()
}

/// Least-squares slope of `log value` against `log distance` over positive entries.
pub(crate) fn loglog_slope(points: &[(f64, f64)]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|p| p.1 > 0.0)
        .map(|p| (p.0.ln(), p.1.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let nf = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / nf;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / nf;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}
