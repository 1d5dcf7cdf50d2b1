//! Singular radial forcing `f = -|x|^{-s}` with exact solution
//! `|x|^{2-s} / ((2-s)(n-s))`, and pointwise Hölder exponents.

use crate::error::{LabError, Result};
use crate::field::{Field, VecField};
use crate::grid::Grid;
use crate::solver::{CoefficientField, EllipticProblem};

use super::{loglog_slope, shell_maxima};

const SHELLS: usize = 12;

fn check_s(n: usize, s: f64) -> Result<()> {
    if !(s > 0.0 && s < 2.0) || n < 2 {
        return Err(LabError::InvalidArgument(format!("radial family needs 0 < s < 2, got s = {s}")));
    }
    Ok(())
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Exact solution of `-Delta u = -|x|^{-s}`.
pub fn radial_exact(n: usize, s: f64) -> impl Fn(&[f64]) -> f64 {
    let c = (2.0 - s) * (n as f64 - s);
    move |x: &[f64]| norm(x).powf(2.0 - s) / c
}

/// Mean of `|x|^{-s}` over the grid cell `[-h/2, h/2]^n`.
pub fn origin_cell_average(n: usize, s: f64, h: f64) -> f64 {
    let a = 0.5 * h;
    if n == 2 {
        // 8/(2-s) a^{2-s} int_0^{pi/4} cos^{s-2} by Simpson's rule.
        let steps = 1000;
        let dt = std::f64::consts::FRAC_PI_4 / steps as f64;
        let g = |t: f64| t.cos().powf(s - 2.0);
        let mut acc = g(0.0) + g(std::f64::consts::FRAC_PI_4);
        for k in 1..steps {
            acc += if k % 2 == 1 { 4.0 } else { 2.0 } * g(k as f64 * dt);
        }
        let integral = acc * dt / 3.0;
        return 8.0 / (2.0 - s) * a.powf(2.0 - s) * integral / (h * h);
    }
    // Midpoint rule on a fine subdivision; the singularity is integrable.
    let k = 64usize;
    let d = h / k as f64;
    let total = k.pow(n as u32);
    let mut acc = 0.0;
    for flat in 0..total {
        let mut rest = flat;
        let mut r2 = 0.0;
        for _ in 0..n {
            let c = -a + (rest % k) as f64 * d + 0.5 * d;
            rest /= k;
            r2 += c * c;
        }
        acc += r2.powf(-0.5 * s);
    }
    acc / total as f64
}

/// `A = I`, `f = -|x|^{-s}` (cell average at the origin), `F = 0`, exact
/// boundary values; `p = n/s` so that the exponent sits at the threshold.
pub fn radial_problem(grid: &Grid, s: f64) -> Result<EllipticProblem> {
    let n = grid.dim();
    check_s(n, s)?;
    let center = avg_at_origin(grid, s);
    let forcing = Field::from_fn(grid, |x| {
        let r = norm(x);
        if r == 0.0 {
            -center
        } else {
            -r.powf(-s)
        }
    });
    let boundary = Field::from_fn(grid, radial_exact(n, s));
    let p = n as f64 / s;
    EllipticProblem::new(CoefficientField::identity(grid), forcing, VecField::zeros(grid), boundary)?
        .with_exponents(p, 4.0 * n as f64)
}

fn avg_at_origin(grid: &Grid, s: f64) -> f64 {
    origin_cell_average(grid.dim(), s, grid.spacing())
}

/// Slope of `log max_shell |u - u(c)|` against `log |x - c|` over
/// `[r_min, r_max]`, with `c` the node nearest to `center`.
pub fn holder_exponent_at(u: &Field, center: &[f64], r_min: f64, r_max: f64) -> Result<f64> {
    let grid = u.grid();
    let n = grid.dim();
    let idx: Vec<usize> = center.iter().map(|&c| grid.nearest_index(c)).collect();
    let c = grid.index(&idx);
    let cp = grid.point(c);
    let u0 = u.values()[c];
    let pts = shell_maxima(grid, |i| Some(u.values()[i] - u0), &cp[..n], r_min, r_max, SHELLS);
    if pts.len() < 3 {
        return Err(LabError::InsufficientShells { found: pts.len() });
    }
    loglog_slope(&pts).ok_or(LabError::InsufficientShells { found: 0 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::solve_dirichlet;

    #[test]
    fn cell_average_limits() {
        assert!((origin_cell_average(2, 1e-9, 0.1) - 1.0).abs() < 1e-6);
        // Closed form against brute-force midpoint sums.
        let h = 0.05;
        let k = 2000;
        let d = h / k as f64;
        let mut acc = 0.0;
        for i in 0..k {
            for j in 0..k {
                let x = -0.5 * h + (i as f64 + 0.5) * d;
                let y = -0.5 * h + (j as f64 + 0.5) * d;
                acc += (x * x + y * y).powf(-0.25);
            }
        }
        let brute = acc / (k * k) as f64;
        assert!((origin_cell_average(2, 0.5, h) / brute - 1.0).abs() < 1e-3);
    }

    #[test]
    fn exact_solution_satisfies_equation() {
        // Delta |x|^{2-s} = (2-s)(n-s) |x|^{-s}, checked by central differences.
        let u = radial_exact(2, 0.5);
        let (x, y, e) = (0.3, 0.2, 1e-4);
        let lap = (u(&[x + e, y]) + u(&[x - e, y]) + u(&[x, y + e]) + u(&[x, y - e]) - 4.0 * u(&[x, y])) / (e * e);
        let r: f64 = (x * x + y * y).sqrt();
        assert!((lap - r.powf(-0.5)).abs() < 1e-5);
    }

    #[test]
    fn exponent_of_exact_field() {
        let g = Grid::new(2, 1.0, 129).unwrap();
        let u = Field::from_fn(&g, radial_exact(2, 0.5));
        let a = holder_exponent_at(&u, &[0.0, 0.0], 8.0 * g.spacing(), 0.5).unwrap();
        assert!((a - 1.5).abs() < 1e-6, "{a}");
    }

    #[test]
    fn discrete_solution_exponent() {
        let g = Grid::new(2, 1.0, 129).unwrap();
        let sol = solve_dirichlet(&radial_problem(&g, 0.5).unwrap()).unwrap();
        let a = holder_exponent_at(&sol.u, &[0.0, 0.0], 8.0 * g.spacing(), 0.5).unwrap();
        assert!((a / 1.5 - 1.0).abs() < 0.05, "{a}");
        assert_eq!(sol.problem.p, 4.0);
    }

    #[test]
    fn too_narrow_range() {
        let g = Grid::new(2, 1.0, 17).unwrap();
        let u = Field::from_fn(&g, radial_exact(2, 0.5));
        assert!(matches!(
            holder_exponent_at(&u, &[0.0, 0.0], 0.9, 1.0),
            Err(LabError::InsufficientShells { .. })
        ));
    }
}
