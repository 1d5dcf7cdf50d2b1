//! Discrete Lebesgue, Sobolev and Hölder norms over ball regions.
//!
//! Integrals are Riemann sums `h^n * sum`. Hölder seminorms are suprema over
//! node pairs: an exhaustive scan for regions of at most
//! [`EXHAUSTIVE_PAIR_LIMIT`] nodes, otherwise a multiscale scan that returns a
//! certified lower bound together with the best pair it found.

use rayon::prelude::*;
use serde::{Serialize, Serializer};

use crate::calculus::{gradient, multi_derivative, multi_indices};
use crate::error::{LabError, Result};
use crate::field::Field;
use crate::grid::{BallRegion, Grid, MAX_DIM};

/// Regions up to this many nodes get the exact pairwise scan.
pub const EXHAUSTIVE_PAIR_LIMIT: usize = 5000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum NormKind {
    Lp,
    Linf,
    Hk,
    HolderSemi,
    CkAlpha,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanMode {
    Exhaustive,
    Multiscale,
}

/// Node pair realizing a Hölder quotient.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArgmaxPair {
    pub first_node: usize,
    pub second_node: usize,
    pub first: Vec<f64>,
    pub second: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegionSummary {
    pub center: Vec<f64>,
    #[serde(serialize_with = "serialize_extended")]
    pub radius: f64,
    pub nodes: usize,
}

impl From<&BallRegion> for RegionSummary {
    fn from(r: &BallRegion) -> Self {
        RegionSummary {
            center: r.center().to_vec(),
            radius: r.radius(),
            nodes: r.len(),
        }
    }
}

fn serialize_extended<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_infinite() {
        s.serialize_str(if *v > 0.0 { "inf" } else { "-inf" })
    } else {
        s.serialize_f64(*v)
    }
}

fn serialize_extended_opt<S: Serializer>(v: &Option<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    match v {
        Some(x) => serialize_extended(x, s),
        None => s.serialize_none(),
    }
}

/// One computed norm or seminorm.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormValue {
    pub kind: NormKind,
    #[serde(serialize_with = "serialize_extended_opt")]
    pub p: Option<f64>,
    pub order: Option<usize>,
    pub alpha: Option<f64>,
    pub region: RegionSummary,
    pub value: f64,
    pub argmax: Option<ArgmaxPair>,
    pub scan_mode: Option<ScanMode>,
}

impl NormValue {
    fn plain(kind: NormKind, region: &BallRegion, value: f64) -> Self {
        NormValue {
            kind,
            p: None,
            order: None,
            alpha: None,
            region: region.into(),
            value,
            argmax: None,
            scan_mode: None,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("norm values serialize")
    }
}

fn require_nonempty(region: &BallRegion) -> Result<()> {
    if region.is_empty() {
        Err(LabError::EmptyRegion(format!(
            "ball of radius {} contains no nodes",
            region.radius()
        )))
    } else {
        Ok(())
    }
}

/// `(sum |u|^p h^n)^{1/p}` over the region; `p = inf` gives the nodal max.
pub fn lp_norm(u: &Field, p: f64, region: &BallRegion) -> Result<NormValue> {
    require_nonempty(region)?;
    if !(p >= 1.0) {
        return Err(LabError::InvalidArgument(format!("p must be >= 1, got {p}")));
    }
    let vals = u.values();
    let (kind, value) = if p.is_infinite() {
        (
            NormKind::Linf,
            region.nodes().iter().fold(0.0f64, |a, &i| a.max(vals[i].abs())),
        )
    } else {
        let s: f64 = region.nodes().iter().map(|&i| vals[i].abs().powf(p)).sum();
        (NormKind::Lp, (s * u.grid().cell_volume()).powf(1.0 / p))
    };
    let mut nv = NormValue::plain(kind, region, value);
    nv.p = Some(p);
    Ok(nv)
}

/// Convenience: the scalar value of [`lp_norm`].
pub fn lp(u: &Field, p: f64, region: &BallRegion) -> Result<f64> {
    lp_norm(u, p, region).map(|v| v.value)
}

/// `L^p` norm of the pointwise Euclidean length of several components.
pub fn lp_of_components(components: &[&Field], p: f64, region: &BallRegion) -> Result<f64> {
    let grid = components[0].grid();
    let mag = Field::from_values(
        grid,
        (0..grid.node_count())
            .map(|i| {
                components
                    .iter()
                    .map(|c| c.values()[i].powi(2))
                    .sum::<f64>()
                    .sqrt()
            })
            .collect(),
    )?;
    lp(&mag, p, region)
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Best {
    value: f64,
    i: usize,
    j: usize,
}

impl Best {
    const NONE: Best = Best {
        value: -1.0,
        i: usize::MAX,
        j: usize::MAX,
    };

    /// Larger value wins; ties go to the lexicographically smaller pair.
    fn better(self, other: Best) -> Best {
        if other.value > self.value
            || (other.value == self.value && (other.i, other.j) < (self.i, self.j))
        {
            other
        } else {
            self
        }
    }
}

/// Pairwise evaluator over a fixed set of nodes with precomputed coordinates.
struct PairScan<'a> {
    grid: &'a Grid,
    comps: &'a [&'a [f64]],
    half_alpha: f64,
}

impl PairScan<'_> {
    fn quotient(&self, a: usize, b: usize) -> f64 {
        let pa = self.grid.point(a);
        let pb = self.grid.point(b);
        let d2: f64 = (0..self.grid.dim()).map(|d| (pa[d] - pb[d]).powi(2)).sum();
        let diff = if self.comps.len() == 1 {
            (self.comps[0][a] - self.comps[0][b]).abs()
        } else {
            self.comps
                .iter()
                .map(|c| (c[a] - c[b]).powi(2))
                .sum::<f64>()
                .sqrt()
        };
        if diff == 0.0 {
            0.0
        } else {
            diff / d2.powf(self.half_alpha)
        }
    }

    fn pair(&self, a: usize, b: usize) -> Best {
        let (i, j) = if a < b { (a, b) } else { (b, a) };
        Best {
            value: self.quotient(i, j),
            i,
            j,
        }
    }

    fn exhaustive(&self, nodes: &[usize]) -> Best {
        (0..nodes.len())
            .into_par_iter()
            .map(|ia| {
                let a = nodes[ia];
                nodes[ia + 1..]
                    .iter()
                    .fold(Best::NONE, |best, &b| best.better(self.pair(a, b)))
            })
            .reduce(|| Best::NONE, Best::better)
    }
}

fn holder_components(
    comps: &[&Field],
    alpha: f64,
    region: &BallRegion,
    force: Option<ScanMode>,
) -> Result<NormValue> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(LabError::InvalidArgument(format!("alpha must lie in (0, 1], got {alpha}")));
    }
    if region.len() < 2 {
        return Err(LabError::EmptyRegion("Hölder seminorm needs at least two nodes".into()));
    }
    let grid = comps[0].grid();
    let slices: Vec<&[f64]> = comps.iter().map(|c| c.values()).collect();
    let scan = PairScan {
        grid,
        comps: &slices,
        half_alpha: 0.5 * alpha,
    };
    let mode = force.unwrap_or(if region.len() <= EXHAUSTIVE_PAIR_LIMIT {
        ScanMode::Exhaustive
    } else {
        ScanMode::Multiscale
    });
    let best = match mode {
        ScanMode::Exhaustive => scan.exhaustive(region.nodes()),
        ScanMode::Multiscale => multiscale(&scan, region),
    };
    let n = grid.dim();
    let mut nv = NormValue::plain(NormKind::HolderSemi, region, best.value.max(0.0));
    nv.alpha = Some(alpha);
    nv.scan_mode = Some(mode);
    nv.argmax = Some(ArgmaxPair {
        first_node: best.i,
        second_node: best.j,
        first: grid.point(best.i)[..n].to_vec(),
        second: grid.point(best.j)[..n].to_vec(),
    });
    Ok(nv)
}

/// Coarse exhaustive scan, a local fine-scale scan, then hill-climbing of the
/// best pair over full-resolution neighborhoods. Reduces to the exhaustive
/// scan when the region is small enough.
fn multiscale(scan: &PairScan<'_>, region: &BallRegion) -> Best {
    let grid = scan.grid;
    let n = grid.dim();
    let c = grid.center_index();
    let mut stride = 1usize;
    let coarse: Vec<usize> = loop {
        let sub: Vec<usize> = region
            .nodes()
            .iter()
            .copied()
            .filter(|&i| {
                let mi = grid.multi_index(i);
                (0..n).all(|d| (mi[d] as isize - c as isize).rem_euclid(stride as isize) == 0)
            })
            .collect();
        if sub.len() <= EXHAUSTIVE_PAIR_LIMIT {
            break sub;
        }
        stride += 1;
    };
    let mut best = if coarse.len() >= 2 {
        scan.exhaustive(&coarse)
    } else {
        Best::NONE
    };
    if stride == 1 {
        return best;
    }

    let reach = stride as isize;
    let neighborhood = |center: usize| -> Vec<usize> {
        let mi = grid.multi_index(center);
        let side = 2 * reach + 1;
        let mut out = Vec::new();
        for flat in 0..side.pow(n as u32) {
            let mut rest = flat;
            let mut idx = [0usize; MAX_DIM];
            let mut inside = true;
            for d in 0..n {
                let o = rest % side - reach;
                rest /= side;
                let k = mi[d] as isize + o;
                if k < 0 || k >= grid.nodes_per_axis() as isize {
                    inside = false;
                    break;
                }
                idx[d] = k as usize;
            }
            if inside {
                let j = grid.index(&idx[..n]);
                if region.contains(j) {
                    out.push(j);
                }
            }
        }
        out
    };

    // Fine scales: every node against its forward neighbors within the stride.
    let local = region
        .nodes()
        .par_iter()
        .map(|&a| {
            neighborhood(a)
                .into_iter()
                .filter(|&b| b > a)
                .fold(Best::NONE, |acc, b| acc.better(scan.pair(a, b)))
        })
        .reduce(|| Best::NONE, Best::better);
    best = best.better(local);

    // Hill-climb the best pair at full resolution.
    for _ in 0..64 {
        let na = neighborhood(best.i);
        let nb = neighborhood(best.j);
        let improved = na
            .par_iter()
            .map(|&a| {
                nb.iter()
                    .filter(|&&b| b != a)
                    .fold(Best::NONE, |acc, &b| acc.better(scan.pair(a, b)))
            })
            .reduce(|| Best::NONE, Best::better);
        if improved.value > best.value {
            best = improved;
        } else {
            break;
        }
    }
    best
}

/// `sup_{x != y} |u(x) - u(y)| / |x - y|^alpha` over node pairs of the region.
pub fn holder_seminorm(u: &Field, alpha: f64, region: &BallRegion) -> Result<NormValue> {
    holder_components(&[u], alpha, region, None)
}

/// [`holder_seminorm`] with the scan mode forced.
pub fn holder_seminorm_with_mode(
    u: &Field,
    alpha: f64,
    region: &BallRegion,
    mode: ScanMode,
) -> Result<NormValue> {
    holder_components(&[u], alpha, region, Some(mode))
}

/// Hölder seminorm of a vector-valued field (Euclidean norm of differences).
pub fn holder_seminorm_vector(components: &[&Field], alpha: f64, region: &BallRegion) -> Result<NormValue> {
    holder_components(components, alpha, region, None)
}

fn require_stencil(region: &BallRegion, order: usize) -> Result<()> {
    let grid = region.grid();
    if region.nodes().iter().any(|&i| grid.boundary_depth(i) < order) {
        return Err(LabError::StencilOverflow { order });
    }
    Ok(())
}

/// `sum_{|beta| <= k} ||D^beta u||_inf + sum_{|beta| = k} [D^beta u]_alpha`.
pub fn ck_alpha_norm(u: &Field, k: usize, alpha: f64, region: &BallRegion) -> Result<NormValue> {
    if k > 3 {
        return Err(LabError::InvalidArgument(format!("order {k} > 3 is not supported")));
    }
    require_nonempty(region)?;
    require_stencil(region, k)?;
    let n = u.grid().dim();
    let mut value = 0.0;
    for order in 0..=k {
        for beta in multi_indices(n, order) {
            let d = multi_derivative(u, &beta);
            value += lp(&d, f64::INFINITY, region)?;
            if order == k {
                value += holder_seminorm(&d, alpha, region)?.value;
            }
        }
    }
    let mut nv = NormValue::plain(NormKind::CkAlpha, region, value);
    nv.order = Some(k);
    nv.alpha = Some(alpha);
    Ok(nv)
}

/// `(sum_{|beta| <= k} ||D^beta u||_2^2)^{1/2}`.
pub fn hk_norm(u: &Field, k: usize, region: &BallRegion) -> Result<NormValue> {
    require_nonempty(region)?;
    require_stencil(region, k)?;
    let value = hk_parts(u, k, region)?.iter().sum::<f64>().sqrt();
    let mut nv = NormValue::plain(NormKind::Hk, region, value);
    nv.order = Some(k);
    Ok(nv)
}

/// Squared `L^2` norms of the derivatives grouped by order: entry `j` is
/// `sum_{|beta| = j} ||D^beta u||_2^2`.
pub fn hk_parts(u: &Field, k: usize, region: &BallRegion) -> Result<Vec<f64>> {
    let n = u.grid().dim();
    (0..=k)
        .map(|order| {
            multi_indices(n, order)
                .into_iter()
                .map(|beta| lp(&multi_derivative(u, &beta), 2.0, region).map(|v| v * v))
                .sum()
        })
        .collect()
}

/// Sobolev exponent used by the ratio: `2n/(n-2)` for `n >= 3`, the caller's
/// choice (default 4) in the plane.
pub fn sobolev_exponent(n: usize, planar: Option<f64>) -> f64 {
    if n >= 3 {
        2.0 * n as f64 / (n as f64 - 2.0)
    } else {
        planar.unwrap_or(4.0)
    }
}

/// `||u||_{2*}^2 / ||grad u||_2^2` for `u` vanishing near the box boundary.
pub fn sobolev_ratio(u: &Field, planar_exponent: Option<f64>) -> Result<f64> {
    let grid = u.grid();
    let p = sobolev_exponent(grid.dim(), planar_exponent);
    if !(p > 2.0) {
        return Err(LabError::InvalidArgument(format!("planar exponent must exceed 2, got {p}")));
    }
    if (0..grid.node_count()).any(|i| grid.boundary_depth(i) == 0 && u.values()[i] != 0.0) {
        return Err(LabError::SupportViolation(
            "Sobolev ratio needs a field vanishing on the box boundary".into(),
        ));
    }
    if u.is_zero() {
        return Err(LabError::UndefinedRatio("u vanishes identically".into()));
    }
    let whole = BallRegion::whole(grid);
    let grad = gradient(u);
    let refs: Vec<&Field> = grad.components().iter().collect();
    let num = lp(u, p, &whole)?.powi(2);
    let den = lp_of_components(&refs, 2.0, &whole)?.powi(2);
    Ok(num / den)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Cutoff;
    use std::f64::consts::PI;

    fn g(m: usize) -> Grid {
        Grid::new(2, 1.0, m).unwrap()
    }

    fn ball(grid: &Grid, r: f64) -> BallRegion {
        BallRegion::new(grid, &[0.0, 0.0], r).unwrap()
    }

    #[test]
    fn l2_of_constant_matches_area() {
        let grid = g(257);
        let b = ball(&grid, 0.6);
        let v = lp(&Field::constant(&grid, -3.0), 2.0, &b).unwrap();
        let exact = 3.0 * (PI * 0.36f64).sqrt();
        assert!((v - exact).abs() / exact < 0.01);
    }

    #[test]
    fn zero_field_norms() {
        let grid = g(33);
        let b = ball(&grid, 0.5);
        let z = Field::zeros(&grid);
        for p in [1.0, 2.0, 3.5, f64::INFINITY] {
            assert_eq!(lp(&z, p, &b).unwrap(), 0.0);
        }
        assert_eq!(ck_alpha_norm(&z, 2, 0.5, &b).unwrap().value, 0.0);
        assert_eq!(hk_norm(&z, 2, &b).unwrap().value, 0.0);
    }

    #[test]
    fn l2_of_saddle() {
        // Polar oracle: int_0^1 int_0^{2pi} r^4 cos^2(2t) r dr dt = pi/6.
        let grid = g(257);
        let u = Field::from_fn(&grid, |x| x[0] * x[0] - x[1] * x[1]);
        let v = lp(&u, 2.0, &ball(&grid, 1.0)).unwrap();
        let exact = (PI / 6.0).sqrt();
        assert!((v - exact).abs() / exact < 0.01, "{v}");
    }

    #[test]
    fn empty_region_errors() {
        let grid = g(3);
        let b = BallRegion::new(&grid, &[0.0, 0.0], 0.5).unwrap();
        assert!(matches!(holder_seminorm(&Field::zeros(&grid), 0.5, &b), Err(LabError::EmptyRegion(_))));
        let none = BallRegion::new(&grid, &[0.5, 0.5], 0.1).unwrap();
        assert!(matches!(lp(&Field::zeros(&grid), 2.0, &none), Err(LabError::EmptyRegion(_))));
    }

    #[test]
    fn holder_of_constant_is_zero() {
        let grid = g(17);
        let b = ball(&grid, 0.9);
        for a in [0.1, 0.5, 1.0] {
            assert_eq!(holder_seminorm(&Field::constant(&grid, 7.0), a, &b).unwrap().value, 0.0);
        }
    }

    #[test]
    fn holder_of_radial_power() {
        // Exhaustive pair oracle: sup ||x|^a - |y|^a| / |x-y|^a = 1, attained with y = 0.
        let grid = g(21);
        let b = ball(&grid, 0.95);
        for a in [0.3, 0.5, 0.8] {
            let u = Field::from_fn(&grid, |x| (x[0] * x[0] + x[1] * x[1]).sqrt().powf(a));
            let nv = holder_seminorm(&u, a, &b).unwrap();
            assert!((nv.value - 1.0).abs() < 1e-12, "{}", nv.value);
            let pair = nv.argmax.unwrap();
            let origin = grid.index(&[10, 10]);
            assert!(pair.first_node == origin || pair.second_node == origin);
            assert_eq!(nv.scan_mode, Some(ScanMode::Exhaustive));
        }
    }

    #[test]
    fn holder_of_linear_alpha_one() {
        let grid = g(21);
        let b = ball(&grid, 0.9);
        let u = Field::from_fn(&grid, |x| 2.5 * x[1]);
        let nv = holder_seminorm(&u, 1.0, &b).unwrap();
        assert!((nv.value - 2.5).abs() < 1e-12);
        let u = Field::from_fn(&grid, |x| 1.5 * x[0] + 2.0 * x[1]);
        let nv = holder_seminorm(&u, 1.0, &b).unwrap();
        assert!(nv.value <= 2.5 + 1e-12 && nv.value > 2.4);
    }

    #[test]
    fn multiscale_matches_exhaustive_on_small_regions() {
        let grid = g(41);
        let b = ball(&grid, 0.9);
        let u = Field::from_fn(&grid, |x| (3.0 * x[0]).sin() * x[1].cosh() + (x[0] - 0.2).abs().sqrt());
        let e = holder_seminorm_with_mode(&u, 0.6, &b, ScanMode::Exhaustive).unwrap();
        let m = holder_seminorm_with_mode(&u, 0.6, &b, ScanMode::Multiscale).unwrap();
        assert_eq!(e.value, m.value);
        assert_eq!(e.argmax, m.argmax);
    }

    #[test]
    fn multiscale_lower_bound_close_to_exhaustive() {
        let grid = g(129);
        let b = ball(&grid, 0.7);
        assert!(b.len() > EXHAUSTIVE_PAIR_LIMIT);
        let u = Field::from_fn(&grid, |x| (2.0 * x[0]).sin() + (x[1] - 0.1).abs().powf(0.7));
        let m = holder_seminorm(&u, 0.5, &b).unwrap();
        assert_eq!(m.scan_mode, Some(ScanMode::Multiscale));
        let e = holder_seminorm_with_mode(&u, 0.5, &b, ScanMode::Exhaustive).unwrap();
        assert!(m.value <= e.value);
        assert!(m.value >= 0.99 * e.value, "{} vs {}", m.value, e.value);
    }

    #[test]
    fn ck_alpha_of_affine() {
        // Multi-index sum: ||u||_inf + |a_1| + |a_2| + 0.
        let grid = g(33);
        let b = ball(&grid, 0.5);
        let u = Field::from_fn(&grid, |x| 2.0 * x[0] - 0.5 * x[1] + 1.0);
        let nv = ck_alpha_norm(&u, 1, 0.4, &b).unwrap();
        let sup = lp(&u, f64::INFINITY, &b).unwrap();
        assert!((nv.value - (sup + 2.5)).abs() < 1e-10, "{}", nv.value);
    }

    #[test]
    fn ck_alpha_of_cubic_has_flat_top_order() {
        let grid = g(33);
        let b = ball(&grid, 0.5);
        let u = Field::from_fn(&grid, |x| x[0].powi(3) - 3.0 * x[0] * x[1] * x[1] + x[1]);
        for beta in multi_indices(2, 3) {
            let d = multi_derivative(&u, &beta);
            assert!(holder_seminorm(&d, 0.5, &b).unwrap().value < 1e-6);
        }
    }

    #[test]
    fn stencil_overflow() {
        let grid = g(9);
        let b = ball(&grid, 1.0);
        assert!(matches!(ck_alpha_norm(&Field::zeros(&grid), 2, 0.5, &b), Err(LabError::StencilOverflow { .. })));
        assert!(matches!(hk_norm(&Field::zeros(&grid), 2, &b), Err(LabError::StencilOverflow { .. })));
    }

    #[test]
    fn h1_of_linear() {
        let grid = g(257);
        let b = ball(&grid, 0.5);
        let u = Field::from_fn(&grid, |x| 3.0 * x[0] + 4.0 * x[1]);
        let h1 = hk_norm(&u, 1, &b).unwrap().value;
        let l2 = lp(&u, 2.0, &b).unwrap();
        let expect = l2 * l2 + 25.0 * PI / 4.0;
        assert!((h1 * h1 - expect).abs() / expect < 0.01);
    }

    #[test]
    fn hessian_energy_of_saddle() {
        let grid = g(257);
        let b = ball(&grid, 0.5);
        let u = Field::from_fn(&grid, |x| x[0] * x[0] - x[1] * x[1]);
        let parts = hk_parts(&u, 2, &b).unwrap();
        let area = PI * 0.25;
        assert!((parts[2] - 8.0 * area).abs() / (8.0 * area) < 0.01);
    }

    #[test]
    fn sobolev_ratio_refinement_and_homogeneity() {
        let ratio = |m| {
            let grid = g(m);
            let bump = Cutoff::new(&grid, 0.2, 0.5).unwrap();
            sobolev_ratio(bump.field(), Some(4.0)).unwrap()
        };
        let (a, b) = (ratio(129), ratio(257));
        assert!(a.is_finite() && (a - b).abs() / b < 0.05, "{a} {b}");

        let grid = g(65);
        let u = Cutoff::new(&grid, 0.2, 0.6).unwrap().field().clone();
        let r1 = sobolev_ratio(&u, None).unwrap();
        let r2 = sobolev_ratio(&u.scaled(-3.7), None).unwrap();
        assert!((r1 - r2).abs() <= 1e-13 * r1);
        assert!(matches!(sobolev_ratio(&Field::zeros(&grid), None), Err(LabError::UndefinedRatio(_))));
    }

    #[test]
    fn norm_value_json() {
        let grid = g(9);
        let nv = lp_norm(&Field::constant(&grid, 1.0), f64::INFINITY, &ball(&grid, 0.5)).unwrap();
        let json = nv.to_json();
        assert!(json.contains("\"kind\":\"linf\""));
        assert!(json.contains("\"p\":\"inf\""));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn smooth(c: [f64; 4]) -> impl Fn(&[f64]) -> f64 {
            move |x: &[f64]| c[0] * (c[1] * x[0]).sin() + c[2] * (x[1] * c[3]).cos() + x[0] * x[1]
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(24))]

            #[test]
            fn norms_monotone_in_region(c in prop::array::uniform4(-2.0f64..2.0), r in 0.2f64..0.6) {
                let grid = g(33);
                let u = Field::from_fn(&grid, smooth(c));
                let small = ball(&grid, r);
                let big = ball(&grid, r + 0.2);
                for p in [1.0, 2.0, f64::INFINITY] {
                    prop_assert!(lp(&u, p, &small).unwrap() <= lp(&u, p, &big).unwrap());
                }
                prop_assert!(holder_seminorm(&u, 0.5, &small).unwrap().value <= holder_seminorm(&u, 0.5, &big).unwrap().value);
                prop_assert!(hk_norm(&u, 1, &small).unwrap().value <= hk_norm(&u, 1, &big).unwrap().value);
            }

            #[test]
            fn seminorm_scaling_and_interpolation(c in prop::array::uniform4(-2.0f64..2.0), s in -5.0f64..5.0, a in 0.2f64..1.0, da in 0.0f64..0.19) {
                let grid = g(25);
                let region = ball(&grid, 0.7);
                let u = Field::from_fn(&grid, smooth(c));
                let base = holder_seminorm(&u, a, &region).unwrap().value;
                let scaled = holder_seminorm(&u.scaled(s), a, &region).unwrap().value;
                prop_assert!((scaled - s.abs() * base).abs() <= 1e-12 * (1.0 + s.abs() * base));
                let lower = holder_seminorm(&u, a - da, &region).unwrap().value;
                prop_assert!(lower <= (2.0 * 0.7f64).powf(da) * base * (1.0 + 1e-12) + 1e-15);
            }

            #[test]
            fn norm_chain_for_lipschitz_fields(c in prop::array::uniform4(-2.0f64..2.0), a in 0.1f64..1.0) {
                // ||u||_{C^{0,a}} <= ||u||_inf + diam^{1-a} [u]_{C^{0,1}}.
                let grid = g(25);
                let region = ball(&grid, 0.7);
                let u = Field::from_fn(&grid, smooth(c));
                let sup = lp(&u, f64::INFINITY, &region).unwrap();
                let ca = sup + holder_seminorm(&u, a, &region).unwrap().value;
                let lip = holder_seminorm(&u, 1.0, &region).unwrap().value;
                prop_assert!(ca <= sup + 1.4f64.powf(1.0 - a) * lip * (1.0 + 1e-12) + 1e-15);
            }
        }
    }
}
