//! Uniform tensor grids on the box `(-half_width, half_width)^n`, ball masks,
//! the nested radii/levels of the truncation iteration, and radial cutoffs.

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::field::Field;

/// Largest supported dimension.
pub const MAX_DIM: usize = 3;

/// Slack `c` in the discrete cutoff gradient bound `max |grad_h eta| <= 2/(R-r) + c*h`.
pub const CUTOFF_GRADIENT_SLACK: f64 = 1.0;

/// Minimum cutoff transition band, in grid spacings.
pub const MIN_BAND_SPACINGS: f64 = 4.0;

/// A uniform grid with `m` nodes per axis. `m` is odd so the origin is a node.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    n: usize,
    half_width: f64,
    m: usize,
    h: f64,
}

impl Grid {
    pub fn new(n: usize, half_width: f64, m: usize) -> Result<Self> {
        if !(2..=MAX_DIM).contains(&n) {
            return Err(LabError::InvalidArgument(format!(
                "dimension must be 2 or 3, got {n}"
            )));
        }
        if m < 3 || m % 2 == 0 {
            return Err(LabError::InvalidArgument(format!(
                "nodes per axis must be odd and >= 3, got {m}"
            )));
        }
        if !(half_width > 0.0) || !half_width.is_finite() {
            return Err(LabError::InvalidArgument(format!(
                "half_width must be positive, got {half_width}"
            )));
        }
        if m.checked_pow(n as u32).is_none() {
            return Err(LabError::InvalidArgument("grid too large".into()));
        }
        Ok(Grid {
            n,
            half_width,
            m,
            h: 2.0 * half_width / (m - 1) as f64,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    /// Nodes per axis.
    pub fn nodes_per_axis(&self) -> usize {
        self.m
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }

    /// Cell volume `h^n`.
    pub fn cell_volume(&self) -> f64 {
        self.h.powi(self.n as i32)
    }

    pub fn node_count(&self) -> usize {
        self.m.pow(self.n as u32)
    }

    /// Index of the origin along one axis.
    pub fn center_index(&self) -> usize {
        (self.m - 1) / 2
    }

    /// Coordinate of node `i` along any axis; `±half_width` are reproduced exactly.
    pub fn coord(&self, i: usize) -> f64 {
        let k = 2.0 * i as f64 - (self.m - 1) as f64;
        k / (self.m - 1) as f64 * self.half_width
    }

    pub fn stride(&self, axis: usize) -> usize {
        self.m.pow(axis as u32)
    }

    /// Flat index of a multi-index (axis 0 fastest).
    pub fn index(&self, multi: &[usize]) -> usize {
        multi
            .iter()
            .take(self.n)
            .rev()
            .fold(0, |acc, &i| acc * self.m + i)
    }

    pub fn multi_index(&self, mut flat: usize) -> [usize; MAX_DIM] {
        let mut out = [0; MAX_DIM];
        for slot in out.iter_mut().take(self.n) {
            *slot = flat % self.m;
            flat /= self.m;
        }
        out
    }

    pub fn point(&self, flat: usize) -> [f64; MAX_DIM] {
        let idx = self.multi_index(flat);
        let mut x = [0.0; MAX_DIM];
        for d in 0..self.n {
            x[d] = self.coord(idx[d]);
        }
        x
    }

    /// Distance from `center` to node `flat`.
    pub fn distance(&self, flat: usize, center: &[f64]) -> f64 {
        let x = self.point(flat);
        (0..self.n)
            .map(|d| {
                let c = center.get(d).copied().unwrap_or(0.0);
                (x[d] - c).powi(2)
            })
            .sum::<f64>()
            .sqrt()
    }

    pub fn is_boundary(&self, flat: usize) -> bool {
        let idx = self.multi_index(flat);
        idx.iter()
            .take(self.n)
            .any(|&i| i == 0 || i == self.m - 1)
    }

    /// Smallest index distance from node `flat` to the box boundary.
    pub fn boundary_depth(&self, flat: usize) -> usize {
        let idx = self.multi_index(flat);
        idx.iter()
            .take(self.n)
            .map(|&i| i.min(self.m - 1 - i))
            .min()
            .unwrap_or(0)
    }

    /// Node index along one axis nearest to coordinate `x` (clamped to the grid).
    pub fn nearest_index(&self, x: f64) -> usize {
        let t = ((x + self.half_width) / self.h).round();
        t.clamp(0.0, (self.m - 1) as f64) as usize
    }
}

/// The set of nodes strictly inside a ball.
#[derive(Debug, Clone, PartialEq)]
pub struct BallRegion {
    grid: Grid,
    center: Vec<f64>,
    radius: f64,
    nodes: Vec<usize>,
}

impl BallRegion {
    pub fn new(grid: &Grid, center: &[f64], radius: f64) -> Result<Self> {
        if center.len() != grid.dim() {
            return Err(LabError::InvalidArgument(format!(
                "center has {} coordinates, grid dimension is {}",
                center.len(),
                grid.dim()
            )));
        }
        if !(radius > 0.0) {
            return Err(LabError::InvalidArgument(format!(
                "radius must be positive, got {radius}"
            )));
        }
        let hw = grid.half_width();
        let slack = 1e-12 * hw;
        if center.iter().any(|c| c.abs() + radius > hw + slack) {
            return Err(LabError::RegionEscapesDomain {
                center: center.to_vec(),
                radius,
                half_width: hw,
            });
        }
        Ok(Self::collect(grid, center, radius))
    }

    /// Like [`BallRegion::new`] but clips to the box instead of rejecting.
    pub fn clipped(grid: &Grid, center: &[f64], radius: f64) -> Self {
        Self::collect(grid, center, radius)
    }

    fn collect(grid: &Grid, center: &[f64], radius: f64) -> Self {
        let n = grid.dim();
        let mut lo = [0usize; MAX_DIM];
        let mut hi = [0usize; MAX_DIM];
        for d in 0..n {
            lo[d] = grid.nearest_index(center[d] - radius).saturating_sub(1);
            hi[d] = (grid.nearest_index(center[d] + radius) + 1).min(grid.nodes_per_axis() - 1);
        }
        let mut nodes = Vec::new();
        let mut idx = lo;
        'outer: loop {
            let flat = grid.index(&idx[..n]);
            if grid.distance(flat, center) < radius {
                nodes.push(flat);
            }
            for d in 0..n {
                if idx[d] < hi[d] {
                    idx[d] += 1;
                    continue 'outer;
                }
                idx[d] = lo[d];
            }
            break;
        }
        nodes.sort_unstable();
        BallRegion {
            grid: *grid,
            center: center.to_vec(),
            radius,
            nodes,
        }
    }

    /// The region covering every node of the grid.
    pub fn whole(grid: &Grid) -> Self {
        BallRegion {
            grid: *grid,
            center: vec![0.0; grid.dim()],
            radius: f64::INFINITY,
            nodes: (0..grid.node_count()).collect(),
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// Sorted flat node indices.
    pub fn nodes(&self) -> &[usize] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn contains(&self, flat: usize) -> bool {
        self.nodes.binary_search(&flat).is_ok()
    }

    /// Sub-region of the nodes satisfying `keep`.
    pub fn filter(&self, mut keep: impl FnMut(usize) -> bool) -> Self {
        BallRegion {
            grid: self.grid,
            center: self.center.clone(),
            radius: self.radius,
            nodes: self.nodes.iter().copied().filter(|&i| keep(i)).collect(),
        }
    }

    /// Measure `h^n * #nodes`.
    pub fn measure(&self) -> f64 {
        self.nodes.len() as f64 * self.grid.cell_volume()
    }
}

/// Radii `r_k = (R - r) 2^{-k} + r` for `k = 0..=k_max`.
pub fn nested_radii(r: f64, big_r: f64, k_max: usize) -> Result<Vec<f64>> {
    if !(r > 0.0) || r >= big_r {
        return Err(LabError::InvalidArgument(format!(
            "nested radii need 0 < r < R, got r = {r}, R = {big_r}"
        )));
    }
    if k_max < 1 {
        return Err(LabError::InvalidArgument("k_max must be >= 1".into()));
    }
    Ok((0..=k_max)
        .map(|k| (big_r - r) * 0.5f64.powi(k as i32) + r)
        .collect())
}

/// Levels `b_k = 1 - 2^{-k}` for `k = 0..=k_max`.
pub fn truncation_levels(k_max: usize) -> Vec<f64> {
    (0..=k_max).map(|k| 1.0 - 0.5f64.powi(k as i32)).collect()
}

/// Cubic smoothstep ramp from 1 (at `t <= 0`) down to 0 (at `t >= 1`).
fn smooth_ramp(t: f64) -> f64 {
    if t <= 0.0 {
        1.0
    } else if t >= 1.0 {
        0.0
    } else {
        1.0 - t * t * (3.0 - 2.0 * t)
    }
}

/// Radial cutoff: 1 on `B_r`, 0 outside `B_R`, smoothstep in `|x|` between.
#[derive(Debug, Clone)]
pub struct Cutoff {
    inner: f64,
    outer: f64,
    center: Vec<f64>,
    field: Field,
}

impl Cutoff {
    pub fn new(grid: &Grid, r: f64, big_r: f64) -> Result<Self> {
        Self::centered(grid, &vec![0.0; grid.dim()], r, big_r)
    }

    pub fn centered(grid: &Grid, center: &[f64], r: f64, big_r: f64) -> Result<Self> {
        if !(r > 0.0) || r >= big_r {
            return Err(LabError::InvalidArgument(format!(
                "cutoff needs 0 < r < R, got r = {r}, R = {big_r}"
            )));
        }
        if center.len() != grid.dim() {
            return Err(LabError::InvalidArgument("center dimension mismatch".into()));
        }
        let hw = grid.half_width();
        if center.iter().any(|c| c.abs() + big_r > hw * (1.0 + 1e-12)) {
            return Err(LabError::RegionEscapesDomain {
                center: center.to_vec(),
                radius: big_r,
                half_width: hw,
            });
        }
        let min_band = MIN_BAND_SPACINGS * grid.spacing();
        if big_r - r < min_band * (1.0 - 1e-12) {
            return Err(LabError::UnresolvableCutoff {
                band: big_r - r,
                min_band,
            });
        }
        let band = big_r - r;
        let field = Field::from_fn(grid, |x| {
            let dist = x
                .iter()
                .zip(center)
                .map(|(a, c)| (a - c).powi(2))
                .sum::<f64>()
                .sqrt();
            smooth_ramp((dist - r) / band)
        });
        Ok(Cutoff {
            inner: r,
            outer: big_r,
            center: center.to_vec(),
            field,
        })
    }

    pub fn inner_radius(&self) -> f64 {
        self.inner
    }

    pub fn outer_radius(&self) -> f64 {
        self.outer
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    pub fn field(&self) -> &Field {
        &self.field
    }

    /// Bound `2/(R-r) + c*h` the discrete gradient must respect.
    pub fn gradient_bound(&self) -> f64 {
        2.0 / (self.outer - self.inner) + CUTOFF_GRADIENT_SLACK * self.field.grid().spacing()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calculus::gradient;

    #[test]
    fn smallest_grid() {
        let g = Grid::new(2, 1.0, 3).unwrap();
        assert_eq!(g.spacing(), 1.0);
        assert_eq!((0..3).map(|i| g.coord(i)).collect::<Vec<_>>(), vec![-1.0, 0.0, 1.0]);
    }

    #[test]
    fn spacing_and_endpoints() {
        let g = Grid::new(2, 1.0, 257).unwrap();
        assert_eq!(g.spacing(), 0.0078125);
        assert_eq!(g.coord(0), -1.0);
        assert_eq!(g.coord(256), 1.0);
        assert_eq!(g.coord(128), 0.0);
        let g = Grid::new(3, 0.7, 11).unwrap();
        assert_eq!(g.coord(0), -0.7);
        assert_eq!(g.coord(10), 0.7);
        assert_eq!(g.coord(5), 0.0);
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(matches!(Grid::new(2, 1.0, 4), Err(LabError::InvalidArgument(_))));
        assert!(matches!(Grid::new(2, 1.0, 1), Err(LabError::InvalidArgument(_))));
        assert!(matches!(Grid::new(2, 0.0, 5), Err(LabError::InvalidArgument(_))));
        assert!(matches!(Grid::new(2, -1.0, 5), Err(LabError::InvalidArgument(_))));
    }

    #[test]
    fn index_roundtrip() {
        let g = Grid::new(3, 1.0, 5).unwrap();
        for flat in 0..g.node_count() {
            let mi = g.multi_index(flat);
            assert_eq!(g.index(&mi[..3]), flat);
        }
    }

    #[test]
    fn ball_on_coarsest_grid_is_origin() {
        let g = Grid::new(2, 1.0, 3).unwrap();
        let b = BallRegion::new(&g, &[0.0, 0.0], 0.5).unwrap();
        assert_eq!(b.nodes(), &[4]);
    }

    #[test]
    fn ball_area_fraction() {
        // Oracle: continuum area of B_{1/2} over the box area.
        let g = Grid::new(2, 1.0, 257).unwrap();
        let b = BallRegion::new(&g, &[0.0, 0.0], 0.5).unwrap();
        let frac = b.len() as f64 / g.node_count() as f64;
        let exact = std::f64::consts::PI * 0.25 / 4.0;
        assert!((frac - exact).abs() / exact < 0.01, "{frac} vs {exact}");
    }

    #[test]
    fn ball_escaping_box() {
        let g = Grid::new(2, 1.0, 33).unwrap();
        assert!(matches!(
            BallRegion::new(&g, &[0.9, 0.0], 0.5),
            Err(LabError::RegionEscapesDomain { .. })
        ));
    }

    #[test]
    fn ball_count_converges_at_least_linearly() {
        let exact = std::f64::consts::PI * 0.6f64.powi(2);
        let err = |m| {
            let g = Grid::new(2, 1.0, m).unwrap();
            let b = BallRegion::new(&g, &[0.0, 0.0], 0.6).unwrap();
            (b.measure() - exact).abs() / exact
        };
        // Lattice-point error is O(h) or better; compare against a linear envelope.
        let (e1, e2, e3) = (err(33), err(65), err(129));
        assert!(e2 <= e1.max(2.0 / 64.0));
        assert!(e3 <= 0.6 * 2.0 / 64.0);
    }

    #[test]
    fn radii_and_levels() {
        let r = nested_radii(0.5, 1.0, 6).unwrap();
        assert_eq!(r[0], 1.0);
        assert_eq!(r[1], 0.75);
        assert_eq!(r[2], 0.625);
        for k in 0..6 {
            assert_eq!(r[k] - r[k + 1], 0.5f64.powi(k as i32 + 1) * 0.5);
            assert!(r[k + 1] < r[k]);
        }
        assert!(matches!(nested_radii(1.0, 1.0, 3), Err(LabError::InvalidArgument(_))));

        let b = truncation_levels(40);
        assert_eq!(b[0], 0.0);
        assert_eq!(b[1], 0.5);
        assert_eq!(b[2], 0.75);
        for k in 0..40 {
            assert_eq!(b[k + 1] - b[k], 0.5f64.powi(k as i32 + 1));
            assert!(b[k] < 1.0);
        }
    }

    #[test]
    fn cutoff_plateau_support_and_gradient() {
        let g = Grid::new(2, 1.0, 257).unwrap();
        let c = Cutoff::new(&g, 0.5, 1.0).unwrap();
        let eta = c.field();
        let grad = gradient(eta);
        let mut max_grad: f64 = 0.0;
        for i in 0..g.node_count() {
            let d = g.distance(i, &[0.0, 0.0]);
            let v = eta.values()[i];
            assert!((0.0..=1.0).contains(&v));
            if d <= 0.5 {
                assert_eq!(v, 1.0);
            }
            if d >= 1.0 {
                assert_eq!(v, 0.0);
            }
            max_grad = max_grad.max(grad.magnitude_at(i));
        }
        assert!(max_grad <= c.gradient_bound(), "{max_grad}");
        // The smoothstep slope peaks at 1.5/(R-r) = 3.
        assert!((max_grad - 3.0).abs() < 0.05, "{max_grad}");
    }

    #[test]
    fn cutoff_band_too_thin() {
        let g = Grid::new(2, 1.0, 33).unwrap();
        assert!(matches!(
            Cutoff::new(&g, 0.5, 0.5 + 3.0 * g.spacing()),
            Err(LabError::UnresolvableCutoff { .. })
        ));
        assert!(Cutoff::new(&g, 0.5, 0.5 + 4.0 * g.spacing()).is_ok());
    }

    #[test]
    fn cutoff_is_radially_nonincreasing() {
        let g = Grid::new(2, 1.0, 65).unwrap();
        let c = Cutoff::new(&g, 0.3, 0.8).unwrap();
        let mut pairs: Vec<(f64, f64)> = (0..g.node_count())
            .map(|i| (g.distance(i, &[0.0, 0.0]), c.field().values()[i]))
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        for w in pairs.windows(2) {
            assert!(w[1].1 <= w[0].1 + 1e-15);
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn nested_balls_are_nested(r in 0.05f64..0.9, dr in 0.0f64..0.1, m in prop::sample::select(vec![17usize, 33, 65])) {
                let g = Grid::new(2, 1.0, m).unwrap();
                let small = BallRegion::new(&g, &[0.0, 0.0], r).unwrap();
                let big = BallRegion::new(&g, &[0.0, 0.0], (r + dr).min(1.0)).unwrap();
                prop_assert!(small.nodes().iter().all(|&i| big.contains(i)));
            }

            #[test]
            fn cutoff_sandwich(r in 0.1f64..0.5, band in 0.2f64..0.45) {
                let g = Grid::new(2, 1.0, 65).unwrap();
                let c = Cutoff::new(&g, r, r + band).unwrap();
                let inner = BallRegion::new(&g, &[0.0, 0.0], r).unwrap();
                let outer = BallRegion::new(&g, &[0.0, 0.0], r + band).unwrap();
                for i in 0..g.node_count() {
                    let v = c.field().values()[i];
                    let lo = if inner.contains(i) { 1.0 } else { 0.0 };
                    let hi = if outer.contains(i) { 1.0 } else { 0.0 };
                    prop_assert!(lo <= v && v <= hi);
                }
            }
        }
    }
}
