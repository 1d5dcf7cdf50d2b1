//! Discrete differential and smoothing operators.

use crate::error::{LabError, Result};
use crate::field::{Field, MaskedField, VecField};
use crate::grid::{BallRegion, Grid, MAX_DIM};

/// Converts a signed length into a whole number of grid steps.
fn step_count(grid: &Grid, h_step: f64) -> Result<isize> {
    if h_step == 0.0 {
        return Err(LabError::InvalidArgument("difference step must be nonzero".into()));
    }
    let h = grid.spacing();
    let s = h_step / h;
    let k = s.round();
    if (s - k).abs() > 1e-9 * s.abs().max(1.0) {
        return Err(LabError::MisalignedStep { step: h_step, h });
    }
    Ok(k as isize)
}

/// Index of the node `steps` away along `axis`, if it stays on the grid.
fn shifted(grid: &Grid, flat: usize, axis: usize, steps: isize) -> Option<usize> {
    let i = grid.multi_index(flat)[axis] as isize + steps;
    if i < 0 || i >= grid.nodes_per_axis() as isize {
        None
    } else {
        Some((flat as isize + steps * grid.stride(axis) as isize) as usize)
    }
}

/// `D_j^h u(x) = (u(x + h e_j) - u(x)) / h` for a step that is a multiple of
/// the spacing. Nodes whose shifted point leaves the box are invalid.
pub fn difference_quotient(u: &Field, axis: usize, h_step: f64) -> Result<MaskedField> {
    let grid = u.grid();
    if axis >= grid.dim() {
        return Err(LabError::InvalidArgument(format!("axis {axis} out of range")));
    }
    let steps = step_count(grid, h_step)?;
    let vals = u.values();
    let mut out = vec![0.0; vals.len()];
    let mut valid = vec![false; vals.len()];
    for i in 0..vals.len() {
        if let Some(j) = shifted(grid, i, axis, steps) {
            out[i] = (vals[j] - vals[i]) / h_step;
            valid[i] = true;
        }
    }
    Ok(MaskedField {
        field: Field::from_values(grid, out)?,
        valid,
    })
}

/// `|sum D_j^h u * phi + sum u * D_j^{-h} phi| h^n`, which vanishes exactly
/// (up to rounding) when `phi` is supported away from the boundary.
pub fn summation_by_parts_residual(u: &Field, phi: &Field, axis: usize, h_step: f64) -> Result<f64> {
    let grid = u.grid();
    let steps = step_count(grid, h_step)?;
    let band = steps.unsigned_abs();
    if let Some(i) = (0..grid.node_count())
        .find(|&i| phi.values()[i] != 0.0 && grid.boundary_depth(i) < band)
    {
        return Err(LabError::SupportViolation(format!(
            "test field is nonzero at node {i}, within {band} nodes of the boundary"
        )));
    }
    let uv = u.values();
    let pv = phi.values();
    let value_or_zero = |v: &[f64], j: Option<usize>| j.map_or(0.0, |j| v[j]);
    let mut forward = 0.0;
    let mut backward = 0.0;
    for i in 0..uv.len() {
        if pv[i] != 0.0 {
            let up = value_or_zero(uv, shifted(grid, i, axis, steps));
            forward += (up - uv[i]) / h_step * pv[i];
        }
        let pm = value_or_zero(pv, shifted(grid, i, axis, -steps));
        backward += uv[i] * (pm - pv[i]) / (-h_step);
    }
    Ok((forward + backward).abs() * grid.cell_volume())
}

/// `(||D_j^h u||_{L2(region)}, ||d_j u||_{L2(swept)})` where `d_j` is the
/// one-step forward quotient and `swept` the nodes `x + t e_j` between `x` and
/// `x + h e_j`. The quotient of step `s h` averages `s` one-step quotients, so
/// the first value never exceeds the second.
pub fn quotient_gradient_bound(u: &Field, axis: usize, h_step: f64, region: &BallRegion) -> Result<(f64, f64)> {
    let grid = u.grid();
    if axis >= grid.dim() {
        return Err(LabError::InvalidArgument(format!("axis {axis} out of range")));
    }
    let steps = step_count(grid, h_step)?;
    let offsets: Vec<isize> = if steps > 0 { (0..steps).collect() } else { (steps..0).collect() };
    let q = difference_quotient(u, axis, h_step)?;
    let vals = u.values();
    let h = grid.spacing();
    let mut swept = vec![false; vals.len()];
    let mut lhs = 0.0;
    for &x in region.nodes() {
        if !q.is_valid(x) {
            continue;
        }
        lhs += q.field.values()[x].powi(2);
        for &t in &offsets {
            swept[shifted(grid, x, axis, t).expect("inside the quotient's span")] = true;
        }
    }
    let rhs: f64 = (0..vals.len())
        .filter(|&y| swept[y])
        .map(|y| {
            let next = shifted(grid, y, axis, 1).expect("inside the quotient's span");
            ((vals[next] - vals[y]) / h).powi(2)
        })
        .sum();
    let hn = grid.cell_volume();
    Ok(((lhs * hn).sqrt(), (rhs * hn).sqrt()))
}

/// Derivative along one axis: second-order central differences inside,
/// second-order one-sided differences on the boundary layer.
pub fn partial(u: &Field, axis: usize) -> Field {
    let grid = u.grid();
    let m = grid.nodes_per_axis();
    let h = grid.spacing();
    let stride = grid.stride(axis);
    let v = u.values();
    let out = (0..v.len())
        .map(|i| {
            let k = grid.multi_index(i)[axis];
            if k == 0 {
                (-3.0 * v[i] + 4.0 * v[i + stride] - v[i + 2 * stride]) / (2.0 * h)
            } else if k == m - 1 {
                (3.0 * v[i] - 4.0 * v[i - stride] + v[i - 2 * stride]) / (2.0 * h)
            } else {
                (v[i + stride] - v[i - stride]) / (2.0 * h)
            }
        })
        .collect();
    Field::from_values(grid, out).expect("finite differences of finite data")
}

pub fn gradient(u: &Field) -> VecField {
    VecField::from_components((0..u.grid().dim()).map(|d| partial(u, d)).collect())
        .expect("one component per axis")
}

/// Central-difference divergence.
pub fn divergence(field: &VecField) -> Field {
    let grid = field.grid();
    let mut acc = Field::zeros(grid);
    for d in 0..grid.dim() {
        acc = acc.add(&partial(field.component(d), d));
    }
    acc
}

/// Mixed derivative `D^beta u` for a multi-index given as per-axis orders.
pub fn multi_derivative(u: &Field, beta: &[usize]) -> Field {
    let mut out = u.clone();
    for (axis, &order) in beta.iter().enumerate() {
        for _ in 0..order {
            out = partial(&out, axis);
        }
    }
    out
}

/// All multi-indices of total order `k` in dimension `n`, in lexicographic order.
pub fn multi_indices(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(n: usize, left: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if prefix.len() == n - 1 {
            prefix.push(left);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for a in (0..=left).rev() {
            prefix.push(a);
            rec(n, left - a, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(n, k, &mut Vec::new(), &mut out);
    out
}

/// Normalized discrete mollifier `exp(-1/(1 - |x/eps|^2))` on the nodes of
/// `B_eps`. Weights sum to one, so kernel values are `weight / h^n`.
#[derive(Debug, Clone)]
pub struct Mollifier {
    epsilon: f64,
    /// Integer node offsets and their weights.
    taps: Vec<([isize; MAX_DIM], f64)>,
    reach: usize,
    grid: Grid,
}

impl Mollifier {
    pub fn new(grid: &Grid, epsilon: f64) -> Result<Self> {
        let h = grid.spacing();
        if epsilon < 2.0 * h * (1.0 - 1e-12) {
            return Err(LabError::KernelUnderResolved {
                epsilon,
                min: 2.0 * h,
            });
        }
        let n = grid.dim();
        let reach = (epsilon / h).ceil() as usize;
        if 2 * reach + 1 > grid.nodes_per_axis() {
            return Err(LabError::InvalidArgument(
                "mollifier support does not fit in the box".into(),
            ));
        }
        let side = 2 * reach as isize + 1;
        let mut taps = Vec::new();
        for flat in 0..side.pow(n as u32) {
            let mut off = [0isize; MAX_DIM];
            let mut rest = flat;
            for o in off.iter_mut().take(n) {
                *o = rest % side - reach as isize;
                rest /= side;
            }
            let rho2: f64 = off[..n].iter().map(|&o| (o as f64 * h).powi(2)).sum::<f64>()
                / (epsilon * epsilon);
            if rho2 < 1.0 {
                let w = (-1.0 / (1.0 - rho2)).exp();
                if w > 0.0 {
                    taps.push((off, w));
                }
            }
        }
        let mass: f64 = taps.iter().map(|t| t.1).sum();
        for t in &mut taps {
            t.1 /= mass;
        }
        Ok(Mollifier {
            epsilon,
            taps,
            reach,
            grid: *grid,
        })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Largest offset in nodes along any axis.
    pub fn reach(&self) -> usize {
        self.reach
    }

    /// Kernel as a field centered at the origin (values are `weight / h^n`).
    pub fn kernel(&self) -> Field {
        let g = &self.grid;
        let c = g.center_index() as isize;
        let mut f = Field::zeros(g);
        let vol = g.cell_volume();
        for (off, w) in &self.taps {
            let mut idx = [0usize; MAX_DIM];
            for d in 0..g.dim() {
                idx[d] = (c + off[d]) as usize;
            }
            f.values_mut()[g.index(&idx[..g.dim()])] = w / vol;
        }
        f
    }

    /// Discrete mass `sum(kernel) h^n`.
    pub fn mass(&self) -> f64 {
        self.taps.iter().map(|t| t.1).sum()
    }

    /// Convolution `g * eta_eps`. Nodes closer than the kernel reach to the
    /// boundary are invalid and keep the input value.
    pub fn apply(&self, g: &Field) -> Result<MaskedField> {
        let grid = g.grid();
        if *grid != self.grid {
            return Err(LabError::InvalidArgument("mollifier built for another grid".into()));
        }
        let n = grid.dim();
        let v = g.values();
        let strides: Vec<isize> = (0..n).map(|d| grid.stride(d) as isize).collect();
        let flat_taps: Vec<(isize, f64)> = self
            .taps
            .iter()
            .map(|(off, w)| ((0..n).map(|d| off[d] * strides[d]).sum(), *w))
            .collect();
        let mut out = v.to_vec();
        let mut valid = vec![false; v.len()];
        for i in 0..v.len() {
            if grid.boundary_depth(i) < self.reach {
                continue;
            }
            let mut acc = 0.0;
            for &(off, w) in &flat_taps {
                acc += w * v[(i as isize - off) as usize];
            }
            out[i] = acc;
            valid[i] = true;
        }
        Ok(MaskedField {
            field: Field::from_values(grid, out)?,
            valid,
        })
    }
}

/// `g_eps = g * eta_eps` on the eps-interior of the box.
pub fn mollify(g: &Field, epsilon: f64) -> Result<MaskedField> {
    Mollifier::new(g.grid(), epsilon)?.apply(g)
}

/// `(||g_eps||_{L^p(interior)}, ||g||_{L^p(box)})` for `1 <= p < inf`: the
/// discrete Young inequality makes the first at most the second.
pub fn mollifier_contraction(g: &Field, epsilon: f64, p: f64) -> Result<(f64, f64)> {
    if !(p >= 1.0 && p.is_finite()) {
        return Err(LabError::InvalidArgument(format!("p must lie in [1, inf), got {p}")));
    }
    let smooth = mollify(g, epsilon)?;
    let hn = g.grid().cell_volume();
    let inner: f64 = (0..g.values().len())
        .filter(|&i| smooth.is_valid(i))
        .map(|i| smooth.field.values()[i].abs().powf(p))
        .sum();
    let whole: f64 = g.values().iter().map(|v| v.abs().powf(p)).sum();
    Ok(((inner * hn).powf(1.0 / p), (whole * hn).powf(1.0 / p)))
}

/// `F = e_n * integral_0^{x_n} f(x', t) dt` by cumulative trapezoidal quadrature.
pub fn forcing_to_field(f: &Field) -> VecField {
    let grid = f.grid();
    let n = grid.dim();
    let last = n - 1;
    let m = grid.nodes_per_axis();
    let c = grid.center_index();
    let stride = grid.stride(last);
    let h = grid.spacing();
    let v = f.values();
    let mut out = vec![0.0; v.len()];
    for base in 0..grid.node_count() {
        if grid.multi_index(base)[last] != 0 {
            continue;
        }
        let at = |k: usize| base + k * stride;
        let mut acc = 0.0;
        for k in c + 1..m {
            acc += 0.5 * h * (v[at(k - 1)] + v[at(k)]);
            out[at(k)] = acc;
        }
        acc = 0.0;
        for k in (0..c).rev() {
            acc -= 0.5 * h * (v[at(k + 1)] + v[at(k)]);
            out[at(k)] = acc;
        }
    }
    let mut comps = vec![Field::zeros(grid); n];
    comps[last] = Field::from_values(grid, out).expect("finite quadrature");
    VecField::from_components(comps).expect("n components")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::BallRegion;
    use crate::norms::lp_norm;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn grid(m: usize) -> Grid {
        Grid::new(2, 1.0, m).unwrap()
    }

    #[test]
    fn quotient_of_linear_is_constant() {
        let g = grid(17);
        let u = Field::from_fn(&g, |x| 3.0 * x[0] - 2.0 * x[1]);
        for s in [1.0, -2.0, 3.0] {
            let q = difference_quotient(&u, 1, s * g.spacing()).unwrap();
            for i in 0..g.node_count() {
                if q.is_valid(i) {
                    assert!((q.field.values()[i] + 2.0).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn quotient_of_square() {
        // (x + h)^2 - x^2 = 2xh + h^2, so D^h x^2 = 2x + h.
        let g = grid(33);
        let h = 2.0 * g.spacing();
        let u = Field::from_fn(&g, |x| x[0] * x[0]);
        let q = difference_quotient(&u, 0, h).unwrap();
        for i in 0..g.node_count() {
            if q.is_valid(i) {
                let x = g.point(i)[0];
                assert!((q.field.values()[i] - (2.0 * x + h)).abs() < 1e-12);
            } else {
                assert!(g.multi_index(i)[0] >= 31);
            }
        }
    }

    #[test]
    fn quotient_errors() {
        let g = grid(9);
        let u = Field::zeros(&g);
        assert!(matches!(difference_quotient(&u, 0, 0.0), Err(LabError::InvalidArgument(_))));
        assert!(matches!(
            difference_quotient(&u, 0, 0.3 * g.spacing()),
            Err(LabError::MisalignedStep { .. })
        ));
    }

    fn random_field(g: &Grid, rng: &mut ChaCha8Rng) -> Field {
        Field::from_fn(g, |_| rng.gen_range(-1.0..1.0))
    }

    fn bump_test_field(g: &Grid, rng: &mut ChaCha8Rng, band: usize) -> Field {
        let mut phi = random_field(g, rng);
        for i in 0..g.node_count() {
            if g.boundary_depth(i) < band {
                phi.values_mut()[i] = 0.0;
            }
        }
        phi
    }

    #[test]
    fn summation_by_parts_is_exact() {
        let g = grid(65);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for s in [1isize, -1, 3] {
            let u = random_field(&g, &mut rng);
            let phi = bump_test_field(&g, &mut rng, 3);
            let res = summation_by_parts_residual(&u, &phi, 1, s as f64 * g.spacing()).unwrap();
            let whole = BallRegion::whole(&g);
            let scale = lp_norm(&u, 2.0, &whole).unwrap().value * lp_norm(&phi, 2.0, &whole).unwrap().value;
            assert!(res <= 1e-12 * scale, "{res} vs {scale}");
        }
        let phi = bump_test_field(&g, &mut rng, 3);
        assert_eq!(summation_by_parts_residual(&Field::zeros(&g), &phi, 0, g.spacing()).unwrap(), 0.0);
    }

    #[test]
    fn quotient_bounded_by_one_step_gradient() {
        let g = grid(33);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let ball = BallRegion::new(&g, &[0.0, 0.0], 0.6).unwrap();
        for s in [1.0, 3.0, -2.0] {
            let u = random_field(&g, &mut rng);
            let (lhs, rhs) = quotient_gradient_bound(&u, 0, s * g.spacing(), &ball).unwrap();
            assert!(lhs <= rhs, "{lhs} > {rhs}");
            if s == 1.0 {
                assert_eq!(lhs, rhs);
            }
        }
        // Linear fields: every quotient equals the slope, swept set is larger.
        let lin = Field::from_fn(&g, |x| 2.0 * x[1]);
        let (lhs, rhs) = quotient_gradient_bound(&lin, 1, 4.0 * g.spacing(), &ball).unwrap();
        assert!((lhs - 2.0 * ball.measure().sqrt()).abs() < 1e-12);
        assert!(rhs > lhs);
    }

    #[test]
    fn summation_by_parts_support_violation() {
        let g = grid(17);
        let u = Field::zeros(&g);
        let phi = Field::constant(&g, 1.0);
        assert!(matches!(
            summation_by_parts_residual(&u, &phi, 0, g.spacing()),
            Err(LabError::SupportViolation(_))
        ));
    }

    #[test]
    fn gradient_is_exact_on_quadratics() {
        let g = grid(17);
        let u = Field::from_fn(&g, |x| x[0] * x[0] - x[1] * x[1]);
        let grad = gradient(&u);
        for i in 0..g.node_count() {
            let p = g.point(i);
            assert!((grad.component(0).values()[i] - 2.0 * p[0]).abs() < 1e-12);
            assert!((grad.component(1).values()[i] + 2.0 * p[1]).abs() < 1e-12);
        }
        let lin = Field::from_fn(&g, |x| 0.5 * x[0] + 7.0 * x[1] - 1.0);
        let gl = gradient(&lin);
        assert!(gl.component(0).values().iter().all(|v| (v - 0.5).abs() < 1e-12));
        assert!(gl.component(1).values().iter().all(|v| (v - 7.0).abs() < 1e-12));
        assert!(gradient(&Field::constant(&g, 4.0)).is_zero());
    }

    #[test]
    fn multi_index_enumeration() {
        assert_eq!(multi_indices(2, 1), vec![vec![1, 0], vec![0, 1]]);
        assert_eq!(multi_indices(2, 2), vec![vec![2, 0], vec![1, 1], vec![0, 2]]);
        assert_eq!(multi_indices(3, 2).len(), 6);
        assert_eq!(multi_indices(3, 0), vec![vec![0, 0, 0]]);
    }

    #[test]
    fn mollifier_mass_and_shape() {
        let g = grid(65);
        let mol = Mollifier::new(&g, 5.0 * g.spacing()).unwrap();
        assert!((mol.mass() - 1.0).abs() < 1e-13);
        let k = mol.kernel();
        let total: f64 = k.values().iter().sum::<f64>() * g.cell_volume();
        assert!((total - 1.0).abs() < 1e-14);
        let c = [0.0, 0.0];
        let mut pairs: Vec<(f64, f64)> = (0..g.node_count())
            .map(|i| (g.distance(i, &c), k.values()[i]))
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        for w in pairs.windows(2) {
            assert!(w[1].1 <= w[0].1 * (1.0 + 1e-14));
            assert!(w[0].1 >= 0.0);
        }
        assert!(pairs.iter().all(|&(d, v)| d < mol.epsilon() || v == 0.0));
    }

    #[test]
    fn mollify_constant_and_odd() {
        let g = grid(65);
        let eps = 4.0 * g.spacing();
        let c = mollify(&Field::constant(&g, 2.5), eps).unwrap();
        for i in 0..g.node_count() {
            if c.is_valid(i) {
                assert!((c.field.values()[i] - 2.5).abs() < 1e-14);
            }
        }
        let s = Field::from_fn(&g, |x| {
            if x[0] > 0.0 {
                1.0
            } else if x[0] < 0.0 {
                -1.0
            } else {
                0.0
            }
        });
        let ms = mollify(&s, eps).unwrap();
        let origin = g.index(&[32, 32]);
        assert!(ms.field.values()[origin].abs() < 1e-15);
    }

    #[test]
    fn mollifier_contracts_lp() {
        let g = grid(65);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for p in [1.0, 2.0, 3.5] {
            let u = random_field(&g, &mut rng);
            let (smooth, rough) = mollifier_contraction(&u, 3.0 * g.spacing(), p).unwrap();
            assert!(smooth <= rough && smooth > 0.0);
        }
        let c = Field::constant(&g, 1.0);
        let (smooth, rough) = mollifier_contraction(&c, 2.0 * g.spacing(), 2.0).unwrap();
        assert!(smooth < rough);
        assert!(mollifier_contraction(&c, 2.0 * g.spacing(), 0.5).is_err());
    }

    #[test]
    fn mollify_rejects_small_epsilon() {
        let g = grid(33);
        assert!(matches!(
            mollify(&Field::zeros(&g), 1.5 * g.spacing()),
            Err(LabError::KernelUnderResolved { .. })
        ));
    }

    #[test]
    fn forcing_to_field_cases() {
        let g = grid(33);
        let one = forcing_to_field(&Field::constant(&g, 1.0));
        for i in 0..g.node_count() {
            assert!((one.component(1).values()[i] - g.point(i)[1]).abs() < 1e-14);
            assert_eq!(one.component(0).values()[i], 0.0);
        }
        assert!(forcing_to_field(&Field::zeros(&g)).is_zero());

        // Trapezoid error for cos is h^2/12 * |x| * max|cos''| at most.
        let c = forcing_to_field(&Field::from_fn(&g, |x| x[1].cos()));
        let h = g.spacing();
        for i in 0..g.node_count() {
            let y = g.point(i)[1];
            assert!((c.component(1).values()[i] - y.sin()).abs() <= h * h / 12.0 * y.abs() + 1e-15);
        }
    }

    #[test]
    fn forcing_field_divergence_reproduces_forcing() {
        let err = |m| {
            let g = grid(m);
            let f = Field::from_fn(&g, |x| (2.0 * x[0]).sin() * x[1].exp());
            let div = divergence(&forcing_to_field(&f));
            (0..g.node_count())
                .filter(|&i| g.boundary_depth(i) >= 1)
                .map(|i| (div.values()[i] - f.values()[i]).abs())
                .fold(0.0, f64::max)
        };
        let (e1, e2) = (err(33), err(65));
        assert!(e1 / e2 > 3.5, "{e1} {e2}");
    }
}
