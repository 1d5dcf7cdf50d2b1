//! De Giorgi truncation iteration: level-set energies on nested balls,
//! the exponent bookkeeping, the no-spike implication and the L∞ bound.

use serde::Serialize;

use crate::caccioppoli::{truncated_caccioppoli, Sign};
use crate::error::{LabError, Result};
use crate::grid::{nested_radii, truncation_levels, BallRegion, Grid, MIN_BAND_SPACINGS};
use crate::norms::{lp, lp_of_components};
use crate::report::EstimateReport;
use crate::solver::DiscreteSolution;

/// Energies below this are treated as floating-point floor in the regression.
pub const ENERGY_FLOOR: f64 = 1e-14;
/// `no_spike_verify` allows `u <= 1 + NO_SPIKE_SLACK * h`.
pub const NO_SPIKE_SLACK: f64 = 1.0;
/// Calibrated threshold is the bisection limit times this factor.
pub const DELTA_SAFETY: f64 = 0.5;
/// Safety factor on the smallest admissible planar `tau`.
pub const PLANAR_TAU_FACTOR: f64 = 1.25;

fn check_data_exponents(n: usize, p: f64, q: f64) -> Result<()> {
    let nf = n as f64;
    if !(p > nf / 2.0) {
        return Err(LabError::InadmissibleExponents(format!("p = {p} must exceed n/2 = {}", nf / 2.0)));
    }
    if !(q > nf) {
        return Err(LabError::InadmissibleExponents(format!("q = {q} must exceed n = {n}")));
    }
    Ok(())
}

/// `min{1 - 2/tau, 2 - 4/tau - 2/p, 1 - 2/tau - 2/q}`; infinite exponents allowed.
pub fn gamma_exponent(n: usize, p: f64, q: f64, tau: f64) -> Result<f64> {
    check_data_exponents(n, p, q)?;
    let inv = |x: f64| if x.is_infinite() { 0.0 } else { 1.0 / x };
    let terms = [
        ("1 - 2/tau", 1.0 - 2.0 * inv(tau)),
        ("2 - 4/tau - 2/p", 2.0 - 4.0 * inv(tau) - 2.0 * inv(p)),
        ("1 - 2/tau - 2/q", 1.0 - 2.0 * inv(tau) - 2.0 * inv(q)),
    ];
    if let Some((name, v)) = terms.iter().find(|(_, v)| *v <= 0.0) {
        return Err(LabError::InadmissibleExponents(format!("{name} = {v} is not positive")));
    }
    Ok(terms.iter().map(|t| t.1).fold(f64::INFINITY, f64::min))
}

/// Sobolev exponent `2n/(n-2)` for `n >= 3`; for `n = 2` a safety multiple of
/// the smallest value above `max{2p/(p-1), 2q/(q-2)}`.
pub fn default_tau(n: usize, p: f64, q: f64) -> Result<f64> {
    check_data_exponents(n, p, q)?;
    if n >= 3 {
        return Ok(2.0 * n as f64 / (n as f64 - 2.0));
    }
    let lim = |x: f64, k: f64| if x.is_infinite() { 2.0 } else { 2.0 * x / (x - k) };
    Ok(PLANAR_TAU_FACTOR * lim(p, 1.0).max(lim(q, 2.0)))
}

#[derive(Debug, Clone, Serialize)]
pub struct DeGiorgiParams {
    pub n: usize,
    pub p: f64,
    pub q: f64,
    pub tau: f64,
    pub gamma: f64,
    pub delta: Option<f64>,
    pub r: f64,
    pub big_r: f64,
    pub k_max: usize,
}

impl DeGiorgiParams {
    pub fn new(n: usize, p: f64, q: f64, r: f64, big_r: f64, k_max: usize) -> Result<Self> {
        let tau = default_tau(n, p, q)?;
        Self::with_tau(n, p, q, tau, r, big_r, k_max)
    }

    pub fn with_tau(n: usize, p: f64, q: f64, tau: f64, r: f64, big_r: f64, k_max: usize) -> Result<Self> {
        if n == 2 {
            let lim = |x: f64, k: f64| if x.is_infinite() { 2.0 } else { 2.0 * x / (x - k) };
            let floor = lim(p, 1.0).max(lim(q, 2.0));
            if !(tau > floor) {
                return Err(LabError::InadmissibleExponents(format!(
                    "planar tau = {tau} must exceed {floor}"
                )));
            }
        }
        if !(0.0 < r && r < big_r) {
            return Err(LabError::InvalidArgument(format!("need 0 < r < R, got {r}, {big_r}")));
        }
        if k_max < 3 {
            return Err(LabError::InvalidArgument(format!("k_max = {k_max} < 3")));
        }
        let gamma = gamma_exponent(n, p, q, tau)?;
        Ok(DeGiorgiParams {
            n,
            p,
            q,
            tau,
            gamma,
            delta: None,
            r,
            big_r,
            k_max,
        })
    }

    pub fn with_delta(mut self, delta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta < 1.0) {
            return Err(LabError::InvalidArgument(format!("delta = {delta} outside (0, 1)")));
        }
        self.delta = Some(delta);
        Ok(self)
    }

    fn delta(&self) -> Result<f64> {
        self.delta.ok_or(LabError::DeltaUncalibrated)
    }

    /// `S_1 = sum i (1+gamma)^{-i}` and `S_2 = sum (1+gamma)^{-i}` (i >= 1).
    pub fn series(&self) -> (f64, f64) {
        let x = 1.0 / (1.0 + self.gamma);
        (x / (1.0 - x).powi(2), x / (1.0 - x))
    }
}

/// Largest `k` keeping `r_k - r >= 4h`.
pub fn max_resolvable_k(grid: &Grid, r: f64, big_r: f64) -> usize {
    let min = MIN_BAND_SPACINGS * grid.spacing();
    let mut k = 0;
    while (big_r - r) * 0.5f64.powi(k as i32 + 1) >= min * (1.0 - 1e-12) {
        k += 1;
    }
    k
}

#[derive(Debug, Clone, Serialize)]
pub struct StepTerms {
    pub k: usize,
    pub lhs: f64,
    pub cutoff_term: f64,
    pub forcing_term: f64,
    pub field_term: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct IterationTrace {
    pub levels: Vec<f64>,
    pub radii: Vec<f64>,
    pub energies: Vec<f64>,
    /// Truncated energy inequality on the step `k -> k+1` where its band is resolvable.
    pub steps: Vec<StepTerms>,
    /// `|{v_{k+1} > 0} ∩ D_{k+1}| <= 4^{k+1} E_k` for each step.
    pub counting_bound: Vec<bool>,
    /// Slope of `log E_{k+1}` against `log E_k`; infinite when the energy
    /// reaches exactly zero before two regression pairs are available.
    pub fitted_exponent: Option<f64>,
    pub terminated: bool,
}

impl IterationTrace {
    pub fn is_monotone(&self) -> bool {
        self.energies.windows(2).all(|w| w[1] <= w[0])
    }

    pub fn write_csv(&self, w: impl std::io::Write) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["k", "b_k", "r_k", "E_k"])?;
        for k in 0..self.energies.len() {
            out.write_record([
                k.to_string(),
                self.levels[k].to_string(),
                self.radii[k].to_string(),
                format!("{:e}", self.energies[k]),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

fn fit_exponent(energies: &[f64]) -> (Option<f64>, bool) {
    let pairs: Vec<(f64, f64)> = energies
        .windows(2)
        .filter(|w| w[0] > ENERGY_FLOOR && w[1] > ENERGY_FLOOR)
        .map(|w| (w[0].ln(), w[1].ln()))
        .collect();
    let first_zero = energies.iter().position(|&e| e == 0.0);
    let terminated = first_zero.is_some_and(|k| k > 0 && energies[k - 1] > ENERGY_FLOOR);
    match pairs.len() {
        0 if terminated => (Some(f64::INFINITY), true),
        0 => (None, terminated),
        1 if terminated => (Some(f64::INFINITY), true),
        1 => (Some(pairs[0].1 / pairs[0].0), false),
        len => {
            let nf = len as f64;
            let mx = pairs.iter().map(|p| p.0).sum::<f64>() / nf;
            let my = pairs.iter().map(|p| p.1).sum::<f64>() / nf;
            let sxx: f64 = pairs.iter().map(|p| (p.0 - mx).powi(2)).sum();
            let sxy: f64 = pairs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
            if sxx == 0.0 {
                (Some(my / mx), terminated)
            } else {
                (Some(sxy / sxx), terminated)
            }
        }
    }
}

/// `E_k = sum_{B_{r_k}} ((u - b_k)_+)^2 h^n` for `k = 0..=k_max`.
pub fn truncation_sequence(sol: &DiscreteSolution, params: &DeGiorgiParams) -> Result<IterationTrace> {
    let grid = *sol.grid();
    let k_res = max_resolvable_k(&grid, params.r, params.big_r);
    if k_res < params.k_max {
        return Err(LabError::GridTooCoarse(format!(
            "r_k - r drops below 4h after k = {k_res} < k_max = {}",
            params.k_max
        )));
    }
    let radii = nested_radii(params.r, params.big_r, params.k_max)?;
    let levels = truncation_levels(params.k_max);
    let origin = vec![0.0; grid.dim()];
    let u = sol.u.values();
    let hn = grid.cell_volume();
    let balls = radii
        .iter()
        .map(|&rk| BallRegion::new(&grid, &origin, rk))
        .collect::<Result<Vec<_>>>()?;
    let energies: Vec<f64> = balls
        .iter()
        .zip(&levels)
        .map(|(ball, &b)| ball.nodes().iter().map(|&i| (u[i] - b).max(0.0).powi(2)).sum::<f64>() * hn)
        .collect();
    let mut counting_bound = Vec::new();
    let mut steps = Vec::new();
    for k in 0..params.k_max {
        let count = balls[k + 1].nodes().iter().filter(|&&i| u[i] > levels[k + 1]).count() as f64;
        counting_bound.push(count * hn <= 4f64.powi(k as i32 + 1) * energies[k] * (1.0 + 1e-12));
        let rho = 0.5 * (radii[k] + radii[k + 1]);
        if rho - radii[k + 1] >= MIN_BAND_SPACINGS * grid.spacing() {
            let rep = truncated_caccioppoli(sol, levels[k + 1], Sign::Plus, radii[k + 1], rho)?;
            steps.push(StepTerms {
                k,
                lhs: rep.lhs,
                cutoff_term: rep.component("v_grad_eta").unwrap_or(0.0),
                forcing_term: rep.component("f_eta_v").unwrap_or(0.0),
                field_term: rep.component("F_sq").unwrap_or(0.0),
            });
        }
    }
    let (fitted_exponent, terminated) = fit_exponent(&energies);
    Ok(IterationTrace {
        levels,
        radii,
        energies,
        steps,
        counting_bound,
        fitted_exponent,
        terminated,
    })
}

/// Data norms `||f||_{L^p(B_R)} + ||F||_{L^q(B_R)}`.
pub fn data_norm(sol: &DiscreteSolution, params: &DeGiorgiParams) -> Result<f64> {
    let grid = sol.grid();
    let ball = BallRegion::new(grid, &vec![0.0; grid.dim()], params.big_r)?;
    let comps: Vec<_> = sol.problem.field_term.components().iter().collect();
    Ok(lp(&sol.problem.forcing, params.p, &ball)? + lp_of_components(&comps, params.q, &ball)?)
}

#[derive(Debug, Clone, Serialize)]
pub struct NoSpikeReport {
    pub plus_holds: bool,
    pub minus_holds: bool,
    pub max_u: f64,
    pub min_u: f64,
    pub tolerance: f64,
    pub energy_plus: f64,
    pub energy_minus: f64,
    pub data_norm: f64,
    pub delta: f64,
}

impl NoSpikeReport {
    pub fn holds(&self) -> bool {
        self.plus_holds && self.minus_holds
    }
}

/// Checks `u <= 1` and `u >= -1` on `B_r` (up to `C h`) given small energy and data.
pub fn no_spike_verify(sol: &DiscreteSolution, params: &DeGiorgiParams) -> Result<NoSpikeReport> {
    let delta = params.delta()?;
    let grid = *sol.grid();
    let origin = vec![0.0; grid.dim()];
    let outer = BallRegion::new(&grid, &origin, params.big_r)?;
    let inner = BallRegion::new(&grid, &origin, params.r)?;
    let data = data_norm(sol, params)?;
    if data > 1.0 {
        return Err(LabError::PreconditionFailure(format!("data norm {data} exceeds 1")));
    }
    let u = sol.u.values();
    let hn = grid.cell_volume();
    let energy_plus = outer.nodes().iter().map(|&i| u[i].max(0.0).powi(2)).sum::<f64>() * hn;
    let energy_minus = outer.nodes().iter().map(|&i| (-u[i]).max(0.0).powi(2)).sum::<f64>() * hn;
    if energy_plus > delta || energy_minus > delta {
        return Err(LabError::PreconditionFailure(format!(
            "energies ({energy_plus}, {energy_minus}) exceed delta = {delta}"
        )));
    }
    let max_u = inner.nodes().iter().map(|&i| u[i]).fold(f64::NEG_INFINITY, f64::max);
    let min_u = inner.nodes().iter().map(|&i| u[i]).fold(f64::INFINITY, f64::min);
    let tolerance = NO_SPIKE_SLACK * grid.spacing();
    Ok(NoSpikeReport {
        plus_holds: max_u <= 1.0 + tolerance,
        minus_holds: min_u >= -1.0 - tolerance,
        max_u,
        min_u,
        tolerance,
        energy_plus,
        energy_minus,
        data_norm: data,
        delta,
    })
}

/// `theta = sqrt(delta) / (||u||_{L2(B_R)} + ||f||_p + ||F||_q)`; `None` for zero data.
pub fn normalization(sol: &DiscreteSolution, params: &DeGiorgiParams, delta: f64) -> Result<Option<f64>> {
    let grid = sol.grid();
    let ball = BallRegion::new(grid, &vec![0.0; grid.dim()], params.big_r)?;
    let total = lp(&sol.u, 2.0, &ball)? + data_norm(sol, params)?;
    Ok((total > 0.0).then(|| delta.sqrt() / total))
}

/// `theta u` as a solution of the problem with data scaled by `theta`.
pub fn normalized(sol: &DiscreteSolution, params: &DeGiorgiParams) -> Result<DiscreteSolution> {
    let delta = params.delta()?;
    Ok(match normalization(sol, params, delta)? {
        Some(theta) => sol.scaled(theta),
        None => sol.clone(),
    })
}

/// Largest `delta` (times the safety factor) for which every normalized
/// training solution satisfies the no-spike conclusion, by bisection.
pub fn calibrate_delta(training: &[DiscreteSolution], params: &DeGiorgiParams) -> Result<f64> {
    if training.is_empty() {
        return Err(LabError::IncompatibleEnsemble("empty training ensemble".into()));
    }
    let passes = |delta: f64| -> Result<bool> {
        let p = params.clone().with_delta(delta)?;
        for sol in training {
            if !no_spike_verify(&normalized(sol, &p)?, &p)?.holds() {
                return Ok(false);
            }
        }
        Ok(true)
    };
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    if passes(1.0 - 1e-9)? {
        return Ok((1.0 - 1e-9) * DELTA_SAFETY);
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if passes(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if lo == 0.0 {
        return Err(LabError::PreconditionFailure("no positive delta passes calibration".into()));
    }
    Ok(lo * DELTA_SAFETY)
}

/// `||u||_{L∞(B_r)} <= delta^{-1/2} (||u||_{L2(B_R)} + ||f||_p + ||F||_q)`.
pub fn linf_bound(sol: &DiscreteSolution, params: &DeGiorgiParams) -> Result<EstimateReport> {
    let delta = params.delta()?;
    let grid = *sol.grid();
    let origin = vec![0.0; grid.dim()];
    let outer = BallRegion::new(&grid, &origin, params.big_r)?;
    let inner = BallRegion::new(&grid, &origin, params.r)?;
    let s = 1.0 / delta.sqrt();
    let comps: Vec<_> = sol.problem.field_term.components().iter().collect();
    let u_l2 = lp(&sol.u, 2.0, &outer)?;
    let f_p = lp(&sol.problem.forcing, params.p, &outer)?;
    let big_f_q = lp_of_components(&comps, params.q, &outer)?;
    let theta = normalization(sol, params, delta)?.unwrap_or(0.0);
    Ok(EstimateReport::new(
        "linf_bound",
        lp(&sol.u, f64::INFINITY, &inner)?,
        vec![
            ("u_l2".into(), s * u_l2),
            ("f_lp".into(), s * f_p),
            ("F_lq".into(), s * big_f_q),
        ],
        (params.r, params.big_r),
        grid.nodes_per_axis(),
        sol.problem.fingerprint(),
    )?
    .with_note("theta", theta)
    .with_note("delta", delta))
}
