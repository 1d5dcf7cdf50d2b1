//! Seeded random problem ensembles.
//!
//! Every instance is drawn as a set of closed-form parameters first and only
//! then sampled on a grid, so the same seed yields the same continuum problem
//! at every resolution. Coefficients are perturbations of the identity:
//! `a_ii = 1 + 0.3 s_ii`, `a_ij = a_ji = (0.2 / (n-1)) s_ij` with `|s| <= 1`,
//! which certifies `lambda >= 1/2`, `Lambda <= 3/2` and `L <= 1.3` by
//! Gershgorin regardless of the texture.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{LabError, Result};
use crate::field::{Field, VecField};
use crate::grid::Grid;
use crate::solver::{
    solve_dirichlet, CoefficientField, DiscreteSolution, EllipticProblem, HolderCertificate, Regularity,
};

pub const DIAGONAL_AMPLITUDE: f64 = 0.3;
pub const OFF_DIAGONAL_AMPLITUDE: f64 = 0.2;

/// `sum_k amp_k sin(freq_k . x + phase_k)`.
#[derive(Debug, Clone, Serialize)]
pub struct TrigSeries {
    pub modes: Vec<(f64, [f64; 3], f64)>,
}

impl TrigSeries {
    fn draw(rng: &mut ChaCha8Rng, n: usize, count: usize, freq_range: (f64, f64), total_amp: f64) -> Self {
        let raw: Vec<f64> = (0..count).map(|_| rng.gen_range(0.2..1.0)).collect();
        let norm: f64 = raw.iter().sum();
        let modes = raw
            .iter()
            .map(|a| {
                let mut freq = [0.0; 3];
                for f in freq.iter_mut().take(n) {
                    let mag = rng.gen_range(freq_range.0..freq_range.1);
                    *f = if rng.gen_bool(0.5) { mag } else { -mag };
                }
                let phase = rng.gen_range(0.0..std::f64::consts::TAU);
                let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
                (sign * total_amp * a / norm, freq, phase)
            })
            .collect();
        TrigSeries { modes }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.modes
            .iter()
            .map(|(a, w, p)| a * (x.iter().zip(w).map(|(x, w)| x * w).sum::<f64>() + p).sin())
            .sum()
    }

    pub fn sup_bound(&self) -> f64 {
        self.modes.iter().map(|m| m.0.abs()).sum()
    }

    pub fn lipschitz_bound(&self) -> f64 {
        self.modes
            .iter()
            .map(|(a, w, _)| a.abs() * w.iter().map(|v| v * v).sum::<f64>().sqrt())
            .sum()
    }
}

/// `sum_k c_k (2 (|x - z_k| / D)^alpha - 1)` with `sum |c_k| = 1`, so the value
/// lies in `[-1, 1]` on a box of diameter `D` and `[.]_alpha <= 2 / D^alpha`.
#[derive(Debug, Clone, Serialize)]
pub struct HolderSeries {
    pub alpha: f64,
    pub diameter: f64,
    pub terms: Vec<(f64, [f64; 3])>,
}

impl HolderSeries {
    fn draw(rng: &mut ChaCha8Rng, n: usize, count: usize, alpha: f64, half_width: f64) -> Self {
        let raw: Vec<f64> = (0..count).map(|_| rng.gen_range(0.2..1.0)).collect();
        let norm: f64 = raw.iter().sum();
        let terms = raw
            .iter()
            .map(|a| {
                let mut z = [0.0; 3];
                for c in z.iter_mut().take(n) {
                    *c = rng.gen_range(-0.6..0.6) * half_width;
                }
                let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
                (sign * a / norm, z)
            })
            .collect();
        HolderSeries {
            alpha,
            diameter: 2.0 * half_width * (n as f64).sqrt(),
            terms,
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(c, z)| {
                let d = x.iter().zip(z).map(|(x, z)| (x - z).powi(2)).sum::<f64>().sqrt();
                c * (2.0 * (d / self.diameter).powf(self.alpha) - 1.0)
            })
            .sum()
    }

    pub fn seminorm_bound(&self) -> f64 {
        2.0 / self.diameter.powf(self.alpha)
    }
}

#[derive(Debug, Clone, Serialize)]
pub enum Perturbation {
    Trig(TrigSeries),
    Holder(HolderSeries),
}

impl Perturbation {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Perturbation::Trig(t) => {
                let b = t.sup_bound();
                if b > 0.0 {
                    t.eval(x) / b
                } else {
                    0.0
                }
            }
            Perturbation::Holder(h) => h.eval(x),
        }
    }

    /// Bound on `[s]_alpha` of the normalized perturbation.
    fn holder_bound(&self, alpha: f64, half_width: f64, n: usize) -> f64 {
        match self {
            Perturbation::Trig(t) => {
                let b = t.sup_bound();
                if b == 0.0 {
                    return 0.0;
                }
                // Lip * d^{1-alpha} over the box diameter.
                let diam = 2.0 * half_width * (n as f64).sqrt();
                t.lipschitz_bound() / b * diam.powf(1.0 - alpha)
            }
            Perturbation::Holder(h) => h.seminorm_bound(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Texture {
    /// Few low-frequency modes.
    Smooth,
    /// More modes at higher frequency, same certificate.
    Oscillatory,
    /// Radial Hölder cusps.
    Holder,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataKind {
    /// Random `f`, `F` and `g`.
    Full,
    /// `f = F = 0`, random `g`.
    Homogeneous,
    /// Random `f` and `F`, `g = 0`.
    Interior,
}

#[derive(Debug, Clone, Serialize)]
pub struct EnsembleSpec {
    pub n: usize,
    pub half_width: f64,
    pub size: usize,
    pub seed: u64,
    pub texture: Texture,
    /// Exponent of the Hölder texture.
    pub holder_alpha: f64,
    pub data: DataKind,
}

impl EnsembleSpec {
    pub fn new(n: usize, size: usize, seed: u64) -> Self {
        EnsembleSpec {
            n,
            half_width: 1.0,
            size,
            seed,
            texture: Texture::Smooth,
            holder_alpha: 0.5,
            data: DataKind::Full,
        }
    }

    pub fn texture(mut self, texture: Texture) -> Self {
        self.texture = texture;
        self
    }

    pub fn holder_alpha(mut self, alpha: f64) -> Self {
        self.holder_alpha = alpha;
        self
    }

    pub fn data(mut self, data: DataKind) -> Self {
        self.data = data;
        self
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct InstanceSpec {
    pub id: usize,
    pub n: usize,
    pub half_width: f64,
    /// Upper-triangular entries in row-major order.
    pub coefficients: Vec<Perturbation>,
    pub forcing: Option<TrigSeries>,
    pub field_term: Option<Vec<TrigSeries>>,
    pub boundary: Option<TrigSeries>,
    pub texture: Texture,
    pub holder_alpha: f64,
}

fn draw_perturbation(rng: &mut ChaCha8Rng, spec: &EnsembleSpec) -> Perturbation {
    match spec.texture {
        Texture::Smooth => Perturbation::Trig(TrigSeries::draw(rng, spec.n, 3, (0.5, 2.0), 1.0)),
        Texture::Oscillatory => Perturbation::Trig(TrigSeries::draw(rng, spec.n, 6, (4.0, 8.0), 1.0)),
        Texture::Holder => {
            Perturbation::Holder(HolderSeries::draw(rng, spec.n, 3, spec.holder_alpha, spec.half_width))
        }
    }
}

pub fn generate(spec: &EnsembleSpec) -> Result<Vec<InstanceSpec>> {
    if !(2..=3).contains(&spec.n) {
        return Err(LabError::InvalidArgument(format!("dimension {} unsupported", spec.n)));
    }
    if spec.texture == Texture::Holder && !(spec.holder_alpha > 0.0 && spec.holder_alpha <= 1.0) {
        return Err(LabError::InvalidExponents(format!(
            "Hölder texture exponent {} outside (0, 1]",
            spec.holder_alpha
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n = spec.n;
    Ok((0..spec.size)
        .map(|id| {
            let coefficients = (0..n * (n + 1) / 2).map(|_| draw_perturbation(&mut rng, spec)).collect();
            let interior = matches!(spec.data, DataKind::Full | DataKind::Interior);
            let forcing = interior.then(|| TrigSeries::draw(&mut rng, n, 3, (0.5, 3.0), 1.0));
            let field_term =
                interior.then(|| (0..n).map(|_| TrigSeries::draw(&mut rng, n, 3, (0.5, 3.0), 0.5)).collect());
            let boundary = (spec.data != DataKind::Interior)
                .then(|| TrigSeries::draw(&mut rng, n, 3, (0.5, 2.0), 1.0));
            InstanceSpec {
                id,
                n,
                half_width: spec.half_width,
                coefficients,
                forcing,
                field_term,
                boundary,
                texture: spec.texture,
                holder_alpha: spec.holder_alpha,
            }
        })
        .collect())
}

fn upper_index(n: usize, i: usize, j: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    // Row-major upper triangle.
    i * n - i * (i + 1) / 2 + j
}

impl InstanceSpec {
    pub fn grid(&self, m: usize) -> Result<Grid> {
        Grid::new(self.n, self.half_width, m)
    }

    pub fn coefficient_field(&self, grid: &Grid) -> Result<CoefficientField> {
        let n = self.n;
        let off = OFF_DIAGONAL_AMPLITUDE / (n - 1) as f64;
        let a = CoefficientField::from_fn(grid, |x| {
            let mut m = vec![0.0; n * n];
            for i in 0..n {
                for j in 0..n {
                    let s = self.coefficients[upper_index(n, i, j)].eval(x);
                    m[i * n + j] = if i == j { 1.0 + DIAGONAL_AMPLITUDE * s } else { off * s };
                }
            }
            m
        })?;
        let alpha = match self.texture {
            Texture::Holder => self.holder_alpha,
            _ => 1.0,
        };
        let bound = self
            .coefficients
            .iter()
            .map(|p| p.holder_bound(alpha, self.half_width, n))
            .fold(0.0, f64::max)
            * DIAGONAL_AMPLITUDE.max(off);
        let lipschitz_order = match self.texture {
            Texture::Holder if self.holder_alpha < 1.0 => 0,
            Texture::Holder => 1,
            _ => 3,
        };
        Ok(a.with_regularity(Regularity {
            holder: Some(HolderCertificate { alpha, bound }),
            lipschitz_order,
        }))
    }

    pub fn problem(&self, grid: &Grid) -> Result<EllipticProblem> {
        let a = self.coefficient_field(grid)?;
        let forcing = match &self.forcing {
            Some(t) => Field::from_fn(grid, |x| t.eval(x)),
            None => Field::zeros(grid),
        };
        let (field_term, field_holder) = match &self.field_term {
            Some(ts) => {
                let comps = ts.iter().map(|t| Field::from_fn(grid, |x| t.eval(x))).collect();
                let lip = ts.iter().map(|t| t.lipschitz_bound().powi(2)).sum::<f64>().sqrt();
                let sup = ts.iter().map(|t| t.sup_bound().powi(2)).sum::<f64>().sqrt();
                (VecField::from_components(comps)?, Some(HolderCertificate { alpha: 1.0, bound: lip.max(sup) }))
            }
            None => (VecField::zeros(grid), Some(HolderCertificate { alpha: 1.0, bound: 0.0 })),
        };
        let forcing_holder = Some(HolderCertificate {
            alpha: 1.0,
            bound: self.forcing.as_ref().map_or(0.0, |t| t.lipschitz_bound()),
        });
        let boundary = match &self.boundary {
            Some(t) => Field::from_fn(grid, |x| t.eval(x)),
            None => Field::zeros(grid),
        };
        Ok(EllipticProblem::new(a, forcing, field_term, boundary)?.with_data_holder(forcing_holder, field_holder))
    }

    pub fn solve(&self, m: usize) -> Result<DiscreteSolution> {
        solve_dirichlet(&self.problem(&self.grid(m)?)?)
    }
}

/// Solves every instance at resolution `m`; output order follows instance ids.
pub fn solve_ensemble(instances: &[InstanceSpec], m: usize) -> Result<Vec<DiscreteSolution>> {
    instances.par_iter().map(|inst| inst.solve(m)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_instances() {
        let spec = EnsembleSpec::new(2, 4, 11);
        let a = serde_json::to_string(&generate(&spec).unwrap()).unwrap();
        let b = serde_json::to_string(&generate(&spec).unwrap()).unwrap();
        assert_eq!(a, b);
        let c = serde_json::to_string(&generate(&EnsembleSpec::new(2, 4, 12)).unwrap()).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn certificates_hold_for_every_texture() {
        for texture in [Texture::Smooth, Texture::Oscillatory, Texture::Holder] {
            for n in [2, 3] {
                let spec = EnsembleSpec::new(n, 5, 3).texture(texture);
                let m = if n == 2 { 33 } else { 9 };
                for inst in generate(&spec).unwrap() {
                    let e = inst.coefficient_field(&inst.grid(m).unwrap()).unwrap().ellipticity();
                    assert!(e.lambda >= 0.5 - 1e-12, "{texture:?} n={n}: {}", e.lambda);
                    assert!(e.big_lambda <= 1.5 + 1e-12);
                    assert!(e.sup_entry <= 1.3 + 1e-12);
                }
            }
        }
    }

    #[test]
    fn holder_certificate_is_an_upper_bound() {
        let spec = EnsembleSpec::new(2, 3, 5).texture(Texture::Holder).holder_alpha(0.4);
        for inst in generate(&spec).unwrap() {
            let g = inst.grid(33).unwrap();
            let a = inst.coefficient_field(&g).unwrap();
            let cert = a.regularity().holder.unwrap();
            let region = crate::grid::BallRegion::new(&g, &[0.0, 0.0], 0.9).unwrap();
            for e in a.entries() {
                let semi = crate::norms::holder_seminorm(e, 0.4, &region).unwrap().value;
                assert!(semi <= cert.bound * (1.0 + 1e-9), "{semi} > {}", cert.bound);
            }
        }
    }

    #[test]
    fn data_kinds() {
        let spec = EnsembleSpec::new(2, 2, 1).data(DataKind::Homogeneous);
        let inst = &generate(&spec).unwrap()[0];
        let p = inst.problem(&inst.grid(9).unwrap()).unwrap();
        assert!(p.has_zero_data());
        assert!(!p.boundary.is_zero());
    }
}
