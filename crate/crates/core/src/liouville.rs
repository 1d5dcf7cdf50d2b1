//! Entire harmonic functions on growing boxes: derivative-energy scans,
//! polynomial degree detection and the superpolynomial counterexamples.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::calculus::{multi_derivative, multi_indices};
use crate::error::{LabError, Result};
use crate::field::Field;
use crate::grid::{BallRegion, Grid};

/// Energies below this fraction of `int u^2` on the same ball count as zero.
pub const ENERGY_FLOOR: f64 = 1e-12;
/// Accepted refinement ratio window for the `O(h^2)` harmonic gate.
pub const GATE_RATIO: (f64, f64) = (3.5, 4.5);
/// Residuals below this (scaled by `h^2 / max|u|`) are exact up to rounding.
pub const EXACT_RESIDUAL: f64 = 1e-12;
/// Allowed excess of the measured growth slope over the claimed exponent.
pub const GROWTH_SLACK: f64 = 0.05;
/// Scale-stability window for the chained inequality constants.
pub const LINK_SPREAD: f64 = 0.2;
pub const MAX_ORDER: usize = 3;
pub const MIN_SCALES: usize = 4;
pub const DEFAULT_SCALES: [f64; 6] = [1.0, 2.0, 4.0, 8.0, 16.0, 32.0];

pub type Generator = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

fn laplacian_at(u: &Field, i: usize) -> f64 {
    let grid = u.grid();
    let v = u.values();
    let lap: f64 = (0..grid.dim())
        .map(|d| {
            let s = grid.stride(d);
            v[i + s] - 2.0 * v[i] + v[i - s]
        })
        .sum();
    lap / grid.spacing().powi(2)
}

/// Max interior `|Delta_h u|` with the `(2n+1)`-point stencil.
pub fn harmonic_residual(u: &Field) -> Result<f64> {
    let grid = u.grid();
    if grid.nodes_per_axis() < 5 {
        return Err(LabError::InvalidArgument("harmonic residual needs m >= 5".into()));
    }
    Ok((0..grid.node_count())
        .filter(|&i| !grid.is_boundary(i))
        .map(|i| laplacian_at(u, i).abs())
        .fold(0.0, f64::max))
}

#[derive(Debug, Clone, Serialize)]
pub struct GateResult {
    pub residual: f64,
    pub refined_residual: Option<f64>,
    pub ratio: Option<f64>,
    pub exact: bool,
    pub passed: bool,
}

/// Accepts a generator when its residual is at rounding level or decays like
/// `h^2` between `m` and `2m - 1` nodes per axis.
pub fn harmonic_gate(generator: &(dyn Fn(&[f64]) -> f64 + Sync), grid: &Grid) -> Result<GateResult> {
    let u = Field::from_fn(grid, generator);
    let residual = harmonic_residual(&u)?;
    let scale = u.max_abs();
    if scale == 0.0 || residual * grid.spacing().powi(2) <= EXACT_RESIDUAL * scale {
        return Ok(GateResult {
            residual,
            refined_residual: None,
            ratio: None,
            exact: true,
            passed: true,
        });
    }
    let fine = Grid::new(grid.dim(), grid.half_width(), 2 * grid.nodes_per_axis() - 1)?;
    // Compare on the coarse interior nodes only: fine nodes closer to the
    // boundary would mix growth of `u` into the ratio.
    let fine_u = Field::from_fn(&fine, generator);
    let refined = (0..grid.node_count())
        .filter(|&i| !grid.is_boundary(i))
        .map(|i| {
            let mut idx = grid.multi_index(i);
            idx.iter_mut().for_each(|k| *k *= 2);
            laplacian_at(&fine_u, fine.index(&idx[..grid.dim()])).abs()
        })
        .fold(0.0, f64::max);
    let ratio = residual / refined;
    Ok(GateResult {
        residual,
        refined_residual: Some(refined),
        ratio: Some(ratio),
        exact: false,
        passed: ratio >= GATE_RATIO.0 && ratio <= GATE_RATIO.1,
    })
}

/// A closed-form field sampled on boxes `(-R, R)^n` at fixed nodes per axis.
#[derive(Clone)]
pub struct GrowthFamily {
    pub name: String,
    pub generator: Generator,
    pub n: usize,
    pub scales: Vec<f64>,
    pub m: usize,
    /// Claimed growth `|u| <= C (1 + |x|)^gamma`.
    pub gamma: f64,
}

impl fmt::Debug for GrowthFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GrowthFamily")
            .field("name", &self.name)
            .field("n", &self.n)
            .field("scales", &self.scales)
            .field("m", &self.m)
            .field("gamma", &self.gamma)
            .finish()
    }
}

impl GrowthFamily {
    pub fn new(
        name: &str,
        n: usize,
        gamma: f64,
        generator: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
    ) -> Self {
        GrowthFamily {
            name: name.to_string(),
            generator: Arc::new(generator),
            n,
            scales: DEFAULT_SCALES.to_vec(),
            m: if n == 2 { 129 } else { 33 },
            gamma,
        }
    }

    pub fn with_scales(mut self, scales: &[f64]) -> Self {
        self.scales = scales.to_vec();
        self
    }

    pub fn with_resolution(mut self, m: usize) -> Self {
        self.m = m;
        self
    }

    pub fn with_gamma(mut self, gamma: f64) -> Self {
        self.gamma = gamma;
        self
    }

    pub fn grid(&self, scale: f64) -> Result<Grid> {
        Grid::new(self.n, scale, self.m)
    }

    pub fn field(&self, scale: f64) -> Result<Field> {
        Ok(Field::from_fn(&self.grid(scale)?, self.generator.as_ref()))
    }

    /// Gate results per scale.
    pub fn gate(&self) -> Result<Vec<GateResult>> {
        self.scales
            .par_iter()
            .map(|&s| harmonic_gate(self.generator.as_ref(), &self.grid(s)?))
            .collect()
    }

    fn require_scales(&self) -> Result<()> {
        if self.scales.len() < MIN_SCALES {
            return Err(LabError::InsufficientScales {
                found: self.scales.len(),
                required: MIN_SCALES,
            });
        }
        Ok(())
    }
}

/// `sum_{|beta| = k} (k!/beta!) ||D^beta u||^2_{L2(ball)}`, the squared norm of
/// the full `k`-tensor of derivatives.
pub fn derivative_energy(u: &Field, k: usize, ball: &BallRegion) -> Result<f64> {
    let fact = |j: usize| (1..=j).map(|i| i as f64).product::<f64>();
    let hn = u.grid().cell_volume();
    multi_indices(u.grid().dim(), k)
        .into_iter()
        .map(|beta| {
            let weight = fact(k) / beta.iter().map(|&b| fact(b)).product::<f64>();
            let d = multi_derivative(u, &beta);
            let v = d.values();
            Ok(weight * ball.nodes().iter().map(|&i| v[i] * v[i]).sum::<f64>() * hn)
        })
        .sum()
}

#[derive(Debug, Clone, Serialize)]
pub struct ScaleEnergy {
    pub scale: f64,
    /// `int_{B_{R/2^k}} |D^k u|^2`.
    pub energy: f64,
    /// `int_{B_{R/2^k}} u^2`, the reference for the floor.
    pub base_energy: f64,
    pub at_floor: bool,
    /// `rho^2 int_{B_{rho/2}} |D^{j+1} u|^2 / int_{B_rho} |D^j u|^2` with `rho = R/2^j`.
    pub links: Vec<Option<f64>>,
    pub max_abs: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScanReport {
    pub family: String,
    pub order: usize,
    pub scales: Vec<ScaleEnergy>,
    /// Least-squares slope of `log E` against `log R`; `None` at the floor.
    pub slope: Option<f64>,
    /// Slopes between consecutive scales.
    pub window_slopes: Vec<Option<f64>>,
    /// `2(gamma - k) + n`: exact for degree-`gamma` polynomials, an envelope otherwise.
    pub theoretical: f64,
    /// Largest relative spread `max/min - 1` of each link constant across scales.
    pub link_spread: Vec<Option<f64>>,
}

impl ScanReport {
    pub fn links_stable(&self) -> bool {
        self.link_spread.iter().all(|s| s.map_or(true, |s| s <= LINK_SPREAD))
    }

    pub fn all_at_floor(&self) -> bool {
        self.scales.iter().all(|s| s.at_floor)
    }

    pub fn write_csv(&self, w: impl std::io::Write) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["R", "order", "energy", "base_energy", "window_slope"])?;
        for (i, s) in self.scales.iter().enumerate() {
            let slope = if i == 0 { None } else { self.window_slopes[i - 1] };
            out.write_record([
                s.scale.to_string(),
                self.order.to_string(),
                format!("{:e}", s.energy),
                format!("{:e}", s.base_energy),
                slope.map_or(String::new(), |v| format!("{v:e}")),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

fn ols_slope(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let nf = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / nf;
    let my = points.iter().map(|p| p.1).sum::<f64>() / nf;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

fn scan_scale(family: &GrowthFamily, scale: f64, k: usize) -> Result<ScaleEnergy> {
    let grid = family.grid(scale)?;
    let u = Field::from_fn(&grid, family.generator.as_ref());
    let origin = vec![0.0; family.n];
    let outer = BallRegion::new(&grid, &origin, scale)?;
    let ball = |rho: f64| BallRegion::new(&grid, &origin, rho);
    // Floors are relative to `int u^2` on the ball where each energy lives.
    let floored = |j: usize, rho: f64| -> Result<Option<f64>> {
        let b = ball(rho)?;
        let e = derivative_energy(&u, j, &b)?;
        Ok((e > ENERGY_FLOOR * derivative_energy(&u, 0, &b)?).then_some(e))
    };
    let inner = ball(scale / 2f64.powi(k as i32))?;
    let energy = derivative_energy(&u, k, &inner)?;
    let base_energy = derivative_energy(&u, 0, &inner)?;
    let links = (0..k)
        .map(|j| {
            let rho = scale / 2f64.powi(j as i32);
            Ok(match (floored(j, rho)?, floored(j + 1, rho / 2.0)?) {
                (Some(below), Some(above)) => Some(rho * rho * above / below),
                _ => None,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ScaleEnergy {
        scale,
        energy,
        base_energy,
        at_floor: energy <= ENERGY_FLOOR * base_energy,
        links,
        max_abs: outer.nodes().iter().map(|&i| u.values()[i].abs()).fold(0.0, f64::max),
    })
}

fn require_gate(family: &GrowthFamily) -> Result<()> {
    for (gate, scale) in family.gate()?.iter().zip(&family.scales) {
        if !gate.passed {
            return Err(LabError::PreconditionFailure(format!(
                "{} fails the harmonic gate at R = {scale} (residual {:e}, ratio {:?})",
                family.name, gate.residual, gate.ratio
            )));
        }
    }
    Ok(())
}

/// Derivative energies `int_{B_{R/2^k}} |D^k u|^2` across the family's scales.
pub fn derivative_energy_scan(family: &GrowthFamily, k: usize) -> Result<ScanReport> {
    family.require_scales()?;
    if k > MAX_ORDER {
        return Err(LabError::InvalidArgument(format!("order {k} > {MAX_ORDER}")));
    }
    require_gate(family)?;
    let scales = family
        .scales
        .par_iter()
        .map(|&s| scan_scale(family, s, k))
        .collect::<Result<Vec<_>>>()?;
    let live: Vec<(f64, f64)> = scales
        .iter()
        .filter(|s| !s.at_floor)
        .map(|s| (s.scale.ln(), s.energy.ln()))
        .collect();
    let slope = if live.len() == scales.len() { ols_slope(&live) } else { None };
    let window_slopes = scales
        .windows(2)
        .map(|w| {
            (!w[0].at_floor && !w[1].at_floor)
                .then(|| (w[1].energy / w[0].energy).ln() / (w[1].scale / w[0].scale).ln())
        })
        .collect();
    let link_spread = (0..k)
        .map(|j| {
            let vals: Vec<f64> = scales.iter().filter_map(|s| s.links[j]).collect();
            if vals.len() < 2 {
                return None;
            }
            let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
            Some(hi / lo - 1.0)
        })
        .collect();
    Ok(ScanReport {
        family: family.name.clone(),
        order: k,
        scales,
        slope,
        window_slopes,
        theoretical: 2.0 * (family.gamma - k as f64) + family.n as f64,
        link_spread,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct GrowthCheck {
    pub gamma: f64,
    pub max_abs: Vec<f64>,
    /// `log(M_last / M_prev) / log((1 + R_last) / (1 + R_prev))`.
    pub tail_slope: f64,
    pub verified: bool,
}

/// Direct max-scan of `|u|` on `B_R`: the tag holds when the growth rate over
/// the last scale window stays within `gamma + 0.05`.
pub fn verify_growth(family: &GrowthFamily, gamma: f64) -> Result<GrowthCheck> {
    family.require_scales()?;
    let max_abs = family
        .scales
        .par_iter()
        .map(|&s| {
            let grid = family.grid(s)?;
            let u = Field::from_fn(&grid, family.generator.as_ref());
            let ball = BallRegion::new(&grid, &vec![0.0; family.n], s)?;
            Ok(ball.nodes().iter().map(|&i| u.values()[i].abs()).fold(0.0, f64::max))
        })
        .collect::<Result<Vec<f64>>>()?;
    let last = family.scales.len() - 1;
    let (r0, r1) = (family.scales[last - 1], family.scales[last]);
    let (m0, m1) = (max_abs[last - 1], max_abs[last]);
    let tail_slope = if m1 == 0.0 {
        0.0
    } else if m0 == 0.0 {
        f64::INFINITY
    } else {
        (m1 / m0).ln() / ((1.0 + r1) / (1.0 + r0)).ln()
    };
    Ok(GrowthCheck {
        gamma,
        max_abs,
        tail_slope,
        verified: tail_slope <= gamma + GROWTH_SLACK,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct DegreeEstimate {
    pub degree: usize,
    pub growth: GrowthCheck,
    /// `degree <= floor(gamma)` whenever the growth tag is verified.
    pub consistent: bool,
}

/// Smallest `k` whose energies vanish at every scale, minus one.
pub fn polynomial_degree_detect(family: &GrowthFamily) -> Result<DegreeEstimate> {
    require_gate(family)?;
    let growth = verify_growth(family, family.gamma)?;
    for k in 1..=MAX_ORDER {
        if derivative_energy_scan(family, k)?.all_at_floor() {
            let degree = k - 1;
            return Ok(DegreeEstimate {
                degree,
                consistent: !growth.verified || degree as f64 <= family.gamma.floor(),
                growth,
            });
        }
    }
    Err(LabError::DegreeUndetected { max_order: MAX_ORDER })
}

/// `e^{a.x} sin(b.x)`, harmonic when `|a| = |b|` and `a.b = 0`.
pub fn counterexample_generator(a: &[f64], b: &[f64]) -> Result<impl Fn(&[f64]) -> f64 + Send + Sync + Clone> {
    if a.len() != b.len() {
        return Err(LabError::NotHarmonicParameters("a and b differ in length".into()));
    }
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    if (norm(a) - norm(b)).abs() > 1e-12 {
        return Err(LabError::NotHarmonicParameters(format!("|a| = {} != |b| = {}", norm(a), norm(b))));
    }
    if dot.abs() > 1e-12 {
        return Err(LabError::NotHarmonicParameters(format!("a.b = {dot} != 0")));
    }
    let (a, b) = (a.to_vec(), b.to_vec());
    Ok(move |x: &[f64]| {
        let ax: f64 = a.iter().zip(x).map(|(p, q)| p * q).sum();
        let bx: f64 = b.iter().zip(x).map(|(p, q)| p * q).sum();
        ax.exp() * bx.sin()
    })
}

pub fn counterexample_field(a: &[f64], b: &[f64], grid: &Grid) -> Result<Field> {
    if a.len() != grid.dim() {
        return Err(LabError::NotHarmonicParameters(format!(
            "vectors of length {} on a {}-dimensional grid",
            a.len(),
            grid.dim()
        )));
    }
    Ok(Field::from_fn(grid, counterexample_generator(a, b)?))
}
