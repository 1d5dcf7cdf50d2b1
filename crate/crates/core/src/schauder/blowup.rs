//! Blow-up sequences around Hölder-maximizing pairs and their growth.

use serde::Serialize;

use crate::calculus::gradient;
use crate::error::{LabError, Result};
use crate::field::{Field, MaskedField};
use crate::grid::{BallRegion, Cutoff, Grid};
use crate::norms::{holder_seminorm, holder_seminorm_vector, NormValue};

use super::{loglog_slope, origin, shell_maxima, SchauderConfig};

/// Blow-up fields live on `[-W, W]^n` with `WINDOW_NODES` nodes per axis.
pub const WINDOW_HALF_WIDTH: f64 = 2.0;
pub const WINDOW_NODES: usize = 41;
/// Growth is violated when `|v|` exceeds its bound by more than this fraction.
pub const GROWTH_TOLERANCE: f64 = 0.1;
const GROWTH_SHELLS: usize = 8;

#[derive(Debug, Clone, Serialize)]
pub struct GrowthFit {
    /// Slope of `log` shell-max against `log` radius; `None` when `v` vanishes.
    pub exponent: Option<f64>,
    pub shells: Vec<(f64, f64)>,
    /// Largest `|v(x)| / bound(|x|)` over the fitted annulus.
    pub worst_ratio: f64,
    pub violation: bool,
    pub inner: f64,
}

fn growth_bound(order: usize, alpha: f64, d: f64) -> f64 {
    if order == 0 {
        d.powf(alpha)
    } else {
        2.0 / (1.0 + alpha) * d.powf(1.0 + alpha)
    }
}

/// Shell regression of `|v|` on `[inner, W]` and the comparison against
/// `|x|^alpha` (order 0) or `2/(1+alpha) |x|^{1+alpha}` (order 1).
pub fn growth_fit(v: &MaskedField, alpha: f64, order: usize, inner: f64) -> Result<GrowthFit> {
    let grid = *v.field.grid();
    let o = origin(&grid);
    let c = grid.index(&vec![grid.center_index(); grid.dim()]);
    if v.field.values()[c] != 0.0 {
        return Err(LabError::InvalidArgument("blow-up field must vanish at the origin".into()));
    }
    let outer = grid.half_width();
    let vals = v.field.values();
    let shells = shell_maxima(&grid, |i| v.valid[i].then(|| vals[i]), &o, inner, outer, GROWTH_SHELLS);
    if shells.len() < 3 {
        return Err(LabError::InsufficientShells { found: shells.len() });
    }
    let worst_ratio = (0..grid.node_count())
        .filter(|&i| v.valid[i])
        .filter_map(|i| {
            let d = grid.distance(i, &o);
            (d >= inner && d <= outer).then(|| vals[i].abs() / growth_bound(order, alpha, d))
        })
        .fold(0.0, f64::max);
    Ok(GrowthFit {
        exponent: loglog_slope(&shells),
        shells,
        worst_ratio,
        violation: worst_ratio > 1.0 + GROWTH_TOLERANCE,
        inner,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct BlowupStep {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub x_node: usize,
    pub y_node: usize,
    pub r: f64,
    /// Seminorm level over the step's search ball.
    pub m_level: f64,
    pub xi: Vec<f64>,
    pub search_radius: f64,
    #[serde(skip)]
    pub v: MaskedField,
    #[serde(skip)]
    pub w: MaskedField,
    /// `[v]_alpha` (order 0) or `[grad v]_alpha` (order 1) over the window nodes.
    pub v_seminorm: f64,
    /// `|v(xi) - v(0)|` (order 0) or `|grad v(xi) - grad v(0)|` (order 1).
    pub xi_contrast: f64,
    pub vw_gap: f64,
    /// Pointwise bound `l r |z| |U(z)| / (M r^{alpha+order})` maximized on the window.
    pub vw_bound: f64,
    /// Interpolation allowance `(sqrt(n) h / r)^{alpha+order}`.
    pub tolerance: f64,
    pub growth: Option<GrowthFit>,
}

#[derive(Debug, Clone, Serialize)]
pub struct BlowupRecord {
    pub order: usize,
    pub alpha: f64,
    pub cutoff: (f64, f64),
    pub steps: Vec<BlowupStep>,
}

impl BlowupRecord {
    pub fn fitted_exponent(&self) -> Option<f64> {
        self.steps.last()?.growth.as_ref()?.exponent
    }

    pub fn write_csv(&self, w: impl std::io::Write) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["step", "r", "M", "v_seminorm", "xi_contrast", "vw_gap", "vw_bound", "exponent"])?;
        for (k, s) in self.steps.iter().enumerate() {
            out.write_record([
                k.to_string(),
                format!("{:e}", s.r),
                format!("{:e}", s.m_level),
                format!("{:e}", s.v_seminorm),
                format!("{:e}", s.xi_contrast),
                format!("{:e}", s.vw_gap),
                format!("{:e}", s.vw_bound),
                s.growth
                    .as_ref()
                    .and_then(|g| g.exponent)
                    .map_or(String::new(), |e| format!("{e:e}")),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Largest change of the (vector) field across an axis neighbor.
fn local_oscillation(comps: &[&Field], i: usize) -> f64 {
    let grid = comps[0].grid();
    let m = grid.nodes_per_axis();
    let mi = grid.multi_index(i);
    let mut best: f64 = 0.0;
    for d in 0..grid.dim() {
        let s = grid.stride(d);
        let mut nbrs = Vec::with_capacity(2);
        if mi[d] > 0 {
            nbrs.push(i - s);
        }
        if mi[d] + 1 < m {
            nbrs.push(i + s);
        }
        for j in nbrs {
            let diff = comps.iter().map(|c| (c.values()[i] - c.values()[j]).powi(2)).sum::<f64>().sqrt();
            best = best.max(diff);
        }
    }
    best
}

fn seminorm(comps: &[&Field], alpha: f64, region: &BallRegion) -> Result<NormValue> {
    if comps.len() == 1 {
        holder_seminorm(comps[0], alpha, region)
    } else {
        holder_seminorm_vector(comps, alpha, region)
    }
}

/// Extracts `steps` blow-up records around maximizing pairs of `[eta u]_alpha`
/// (order 0) or `[grad(eta u)]_alpha` (order 1), shrinking the search ball
/// around the previous base point by half at every step.
pub fn blowup_sequence(u: &Field, cfg: &SchauderConfig, steps: usize) -> Result<BlowupRecord> {
    let grid = *u.grid();
    let n = grid.dim();
    cfg.validate(n)?;
    let eta = Cutoff::new(&grid, cfg.r, cfg.big_r)?;
    let o = origin(&grid);
    let outer = BallRegion::new(&grid, &o, cfg.big_r)?;
    let vals = u.values();
    let (lo, hi) = outer
        .nodes()
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &i| (a.min(vals[i]), b.max(vals[i])));
    if !(hi > lo) {
        return Err(LabError::NoBlowupPair("field is constant on the ball".into()));
    }
    let ef = eta.field();
    let eu = ef.mul(u);
    let grad_eu = gradient(&eu);
    let grad_u = gradient(u);
    let target: Vec<&Field> = if cfg.order == 0 {
        vec![&eu]
    } else {
        grad_eu.components().iter().collect()
    };
    let window = Grid::new(n, WINDOW_HALF_WIDTH, WINDOW_NODES)?;
    let wo = origin(&window);
    let wc = window.index(&vec![window.center_index(); n]);
    let h = grid.spacing();
    let hw = grid.half_width();
    let ell = eta.gradient_bound() * (n as f64).sqrt();
    let exponent = cfg.alpha + cfg.order as f64;

    let mut out = Vec::new();
    let mut center = o.clone();
    let mut rho = cfg.big_r;
    for k in 0..steps {
        let region = if k == 0 {
            outer.clone()
        } else {
            BallRegion::clipped(&grid, &center, rho).filter(|i| outer.contains(i))
        };
        if region.len() < 2 {
            break;
        }
        let nv = seminorm(&target, cfg.alpha, &region)?;
        let m_level = nv.value;
        if m_level <= 0.0 {
            if k == 0 {
                return Err(LabError::NoBlowupPair("vanishing seminorm".into()));
            }
            break;
        }
        let pair = nv.argmax.ok_or_else(|| LabError::NoBlowupPair("no argmax pair".into()))?;
        let (a, b) = (pair.first_node, pair.second_node);
        let (xn, yn) = if local_oscillation(&target, b) > local_oscillation(&target, a) {
            (b, a)
        } else {
            (a, b)
        };
        let x = grid.point(xn)[..n].to_vec();
        let y = grid.point(yn)[..n].to_vec();
        let r = grid.distance(yn, &x);
        let xi: Vec<f64> = (0..n).map(|d| (y[d] - x[d]) / r).collect();
        let scale = m_level * r.powf(exponent);
        let (ux, ex, eux) = (vals[xn], ef.values()[xn], eu.values()[xn]);
        let gx: Vec<f64> = (0..n).map(|d| grad_u.component(d).values()[xn]).collect();

        let mut v = vec![0.0; window.node_count()];
        let mut w = vec![0.0; window.node_count()];
        let mut valid = vec![false; window.node_count()];
        let (mut gap, mut gap_bound) = (0.0f64, 0.0f64);
        for i in 0..window.node_count() {
            let z = &window.point(i)[..n];
            let dz = window.distance(i, &wo);
            let yz: Vec<f64> = (0..n).map(|d| x[d] + r * z[d]).collect();
            if dz > WINDOW_HALF_WIDTH || yz.iter().any(|c| c.abs() > hw) {
                continue;
            }
            valid[i] = true;
            if i == wc {
                continue;
            }
            let uy = u.interpolate(&yz);
            let euy = eu.interpolate(&yz);
            let (vi, wi, core) = if cfg.order == 0 {
                (euy - eux, ex * (uy - ux), uy)
            } else {
                let lin: f64 = (0..n).map(|d| gx[d] * r * z[d]).sum();
                (euy - ef.interpolate(&yz) * ux - ex * lin, ex * (uy - ux - lin), uy - ux)
            };
            v[i] = vi / scale;
            w[i] = wi / scale;
            gap = gap.max((v[i] - w[i]).abs());
            gap_bound = gap_bound.max(ell * r * dz * core.abs() / scale);
        }
        let v = MaskedField {
            field: Field::from_values(&window, v)?,
            valid: valid.clone(),
        };
        let w = MaskedField {
            field: Field::from_values(&window, w)?,
            valid: valid.clone(),
        };

        let v_seminorm = if cfg.order == 0 {
            let region = BallRegion::whole(&window).filter(|i| valid[i]);
            holder_seminorm(&v.field, cfg.alpha, &region)?.value
        } else {
            let gv = gradient(&v.field);
            let comps: Vec<&Field> = gv.components().iter().collect();
            let region = BallRegion::whole(&window).filter(|i| {
                valid[i]
                    && !window.is_boundary(i)
                    && (0..n).all(|d| valid[i + window.stride(d)] && valid[i - window.stride(d)])
            });
            holder_seminorm_vector(&comps, cfg.alpha, &region)?.value
        };
        let xi_contrast = {
            let diff = target
                .iter()
                .map(|c| (c.values()[yn] - c.values()[xn]).powi(2))
                .sum::<f64>()
                .sqrt();
            diff / (m_level * r.powf(cfg.alpha))
        };
        let inner = (WINDOW_HALF_WIDTH / 16.0).max(2.0 * h / r);
        let growth = match growth_fit(&v, cfg.alpha, cfg.order, inner) {
            Ok(g) => Some(g),
            Err(LabError::InsufficientShells { .. }) => None,
            Err(e) => return Err(e),
        };
        out.push(BlowupStep {
            x: x.clone(),
            y,
            x_node: xn,
            y_node: yn,
            r,
            m_level,
            xi,
            search_radius: rho,
            v,
            w,
            v_seminorm,
            xi_contrast,
            vw_gap: gap,
            vw_bound: gap_bound,
            tolerance: ((n as f64).sqrt() * h / r).powf(exponent),
            growth,
        });
        center = x;
        rho *= 0.5;
    }
    Ok(BlowupRecord {
        order: cfg.order,
        alpha: cfg.alpha,
        cutoff: (cfg.r, cfg.big_r),
        steps: out,
    })
}
