//! Acceptance criteria 1-10, one PASS/FAIL line each. Exits nonzero on any failure.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;
use std::process::{self, Command as Process};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use schauder_lab::caccioppoli::caccioppoli_check;
use schauder_lab::calculus::{quotient_gradient_bound, summation_by_parts_residual};
use schauder_lab::cli::{run, Command, ExperimentConfig, ProblemSpec, RunOutcome, Status};
use schauder_lab::degiorgi::gamma_exponent;
use schauder_lab::liouville::{counterexample_generator, derivative_energy_scan, harmonic_gate, GrowthFamily};
use schauder_lab::schauder::{blowup_sequence, holder_exponent_at, radial_problem, SchauderConfig};
use schauder_lab::solver::{solve_dirichlet, CoefficientField, EllipticProblem};
use schauder_lab::{BallRegion, Field, Grid, VecField};

type Outcome = Result<String, String>;

fn ensure(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn within(value: f64, target: f64, rel: f64) -> bool {
    (value / target - 1.0).abs() <= rel
}

fn experiment(command: Command, tweak: impl FnOnce(&mut ExperimentConfig)) -> Result<RunOutcome, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut cfg = ExperimentConfig::default_for(command);
    cfg.out = dir.path().join(command.name());
    tweak(&mut cfg);
    run(&cfg).map_err(|e| format!("{command}: {e}"))
}

/// All verdicts whose name starts with `prefix` have status `want`; returns their count.
fn all_with(outcome: &RunOutcome, prefix: &str, want: Status) -> Result<usize, String> {
    let hits: Vec<_> = outcome.verdicts.iter().filter(|v| v.check.starts_with(prefix)).collect();
    if hits.is_empty() {
        return Err(format!("no `{prefix}` verdicts"));
    }
    match hits.iter().find(|v| v.status != want) {
        Some(v) => Err(format!("{} {}: {}", v.status, v.check, v.detail)),
        None => Ok(hits.len()),
    }
}

fn harmonic(m: usize, f: impl Fn(&[f64]) -> f64) -> Result<schauder_lab::solver::DiscreteSolution, String> {
    let g = Grid::new(2, 1.0, m).map_err(|e| e.to_string())?;
    let p = EllipticProblem::new(
        CoefficientField::identity(&g),
        Field::zeros(&g),
        VecField::zeros(&g),
        Field::from_fn(&g, f),
    )
    .map_err(|e| e.to_string())?;
    solve_dirichlet(&p).map_err(|e| e.to_string())
}

fn timed(limit: Duration, start: Instant, detail: String) -> Outcome {
    let t = start.elapsed();
    ensure(t <= limit, format!("{detail}; {:.1}s of {}s", t.as_secs_f64(), limit.as_secs()))
}

fn convergence() -> Outcome {
    let start = Instant::now();
    let out = experiment(Command::Solve, |_| {})?;
    let n = all_with(&out, "error_ratio", Status::Pass)?;
    all_with(&out, "solver_residual", Status::Pass)?;
    let ratios: Vec<_> = out
        .verdicts
        .iter()
        .filter(|v| v.check.starts_with("error_ratio"))
        .map(|v| v.detail.split(", window").next().unwrap_or("").rsplit("= ").next().unwrap_or("").to_string())
        .collect();
    ensure(n == 2, format!("{n} ratio checks"))?;
    timed(Duration::from_secs(60), start, format!("ratios {}", ratios.join(", ")))
}

fn reproduction() -> Outcome {
    let out = experiment(Command::Solve, |c| {
        c.problem = ProblemSpec::Saddle;
        c.grid.m = 129;
        c.params.resolutions = vec![129];
    })?;
    all_with(&out, "reproduction", Status::Pass).map(|_| {
        let v = out.verdicts.iter().find(|v| v.check.starts_with("reproduction")).unwrap();
        v.detail.clone()
    })
}

fn difference_quotients() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst_sbp: f64 = 0.0;
    let mut worst_bound: f64 = 0.0;
    for _ in 0..100 {
        let n = rng.gen_range(2..=3);
        let m = if n == 2 { 33 } else { 17 };
        let g = Grid::new(n, 1.0, m).map_err(|e| e.to_string())?;
        let h = g.spacing();
        let s = rng.gen_range(1..=3) as f64 * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        let axis = rng.gen_range(0..n);
        let u = Field::from_values(&g, (0..g.node_count()).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .map_err(|e| e.to_string())?;
        let phi = Field::from_values(
            &g,
            (0..g.node_count())
                .map(|i| if g.boundary_depth(i) >= 3 { rng.gen_range(-1.0..1.0) } else { 0.0 })
                .collect(),
        )
        .map_err(|e| e.to_string())?;
        let residual = summation_by_parts_residual(&u, &phi, axis, s * h).map_err(|e| e.to_string())?;
        let scale: f64 =
            u.values().iter().zip(phi.values()).map(|(a, b)| (a * b).abs()).sum::<f64>() * g.cell_volume() / h;
        worst_sbp = worst_sbp.max(residual / scale);
        let region = BallRegion::new(&g, &vec![0.0; n], 0.6).map_err(|e| e.to_string())?;
        let (lhs, rhs) = quotient_gradient_bound(&u, axis, s * h, &region).map_err(|e| e.to_string())?;
        if lhs > rhs {
            return Err(format!("quotient norm {lhs:e} exceeds gradient norm {rhs:e}"));
        }
        worst_bound = worst_bound.max(lhs / rhs);
    }
    ensure(worst_sbp <= 1e-12, format!("max relative residual {worst_sbp:e}, max norm ratio {worst_bound:.4}"))?;
    timed(Duration::from_secs(10), start, format!("max relative residual {worst_sbp:e}, max norm ratio {worst_bound:.4}"))
}

fn caccioppoli() -> Outcome {
    let sol = harmonic(257, |x| x[0] * x[0] - x[1] * x[1])?;
    let rep = caccioppoli_check(&sol, 0.5, 0.95).map_err(|e| e.to_string())?;
    let target = (PI / 8.0).sqrt();
    ensure(within(rep.lhs, target, 0.01), format!("saddle lhs {:.6} vs {target:.6}", rep.lhs))?;
    let out = experiment(Command::Caccioppoli, |_| {})?;
    let stable = out
        .verdicts
        .iter()
        .find(|v| v.check.starts_with("constant_stability"))
        .ok_or("no stability verdict")?;
    ensure(
        stable.status == Status::Pass,
        format!("saddle lhs {:.6} vs {target:.6}; ensemble {}", rep.lhs, stable.detail),
    )
}

fn de_giorgi() -> Outcome {
    let gamma = gamma_exponent(3, 2.0, 4.0, 6.0).map_err(|e| e.to_string())?;
    ensure((gamma - 1.0 / 6.0).abs() < 1e-15, format!("gamma {gamma}"))?;
    let out = experiment(Command::Degiorgi, |_| {})?;
    let spikes = all_with(&out, "no_spike", Status::Pass)?;
    let monotone = all_with(&out, "trace_monotone", Status::Pass)?;
    let decay: Vec<_> = out.verdicts.iter().filter(|v| v.check.starts_with("trace_decay")).collect();
    if let Some(v) = decay.iter().find(|v| v.status == Status::Fail) {
        return Err(format!("{}: {}", v.check, v.detail));
    }
    let passed = decay.iter().filter(|v| v.status == Status::Pass).count();
    let terminated = decay.iter().filter(|v| v.detail.contains("exponent inf")).count();
    Ok(format!(
        "gamma = 1/6; no_spike {spikes}/50, monotone {monotone}/50, decay bound met {passed}/{} \
         ({terminated} reach the energy floor after one step, exponent inf)",
        decay.len()
    ))
}

fn liouville() -> Outcome {
    let saddle = GrowthFamily::new("x^2-y^2", 2, 2.0, |x| x[0] * x[0] - x[1] * x[1]);
    let k1 = derivative_energy_scan(&saddle, 1).map_err(|e| e.to_string())?;
    let slope = k1.slope.ok_or("no k=1 slope")?;
    ensure(within(slope, 4.0, 0.05), format!("k=1 slope {slope:.4}"))?;
    let k3 = derivative_energy_scan(&saddle, 3).map_err(|e| e.to_string())?;
    ensure(k3.all_at_floor(), "k=3 energies above the floor".into())?;
    let ce = GrowthFamily::new("e^x sin y", 2, 10.0, counterexample_generator(&[1.0, 0.0], &[0.0, 1.0]).unwrap());
    let g = ce.grid(1.0).map_err(|e| e.to_string())?;
    ensure(harmonic_gate(ce.generator.as_ref(), &g).map_err(|e| e.to_string())?.passed, "gate rejected e^x sin y".into())?;
    let out = experiment(Command::Liouville, |_| {})?;
    let gates = all_with(&out, "harmonic_gate", Status::Pass)?;
    let growth = all_with(&out, "polynomial_growth", Status::ExpectedFail)?;
    Ok(format!("k=1 slope {slope:.4}, k=3 at floor, counterexample gate {gates}/{gates}, growth fails for {growth} gammas"))
}

fn schauder_threshold() -> Outcome {
    let g = Grid::new(2, 1.0, 129).map_err(|e| e.to_string())?;
    let sol = solve_dirichlet(&radial_problem(&g, 0.5).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    let a = holder_exponent_at(&sol.u, &[0.0, 0.0], 8.0 * g.spacing(), 0.5).map_err(|e| e.to_string())?;
    ensure(within(a, 1.5, 0.05), format!("radial exponent {a:.4}"))?;
    let out = experiment(Command::Schauder, |_| {})?;
    let n = all_with(&out, "refinement_stability", Status::Pass)?;
    all_with(&out, "ratio_finite", Status::Pass)?;
    Ok(format!("radial exponent {a:.4}; ratio stable on {n} instances"))
}

fn cusp_blowup() -> Outcome {
    let g = Grid::new(2, 1.0, 65).map_err(|e| e.to_string())?;
    let h = g.spacing();
    let x0 = [4.0 * h, 2.0 * h];
    let u = Field::from_fn(&g, |x| ((x[0] - x0[0]).powi(2) + (x[1] - x0[1]).powi(2)).powf(0.25));
    let c = g.center_index();
    let node = g.index(&[c + 4, c + 2]);
    let cfg = SchauderConfig::new(2, 0, 0.5, 4.0, 8.0, 0.25, 0.95).map_err(|e| e.to_string())?;
    let rec = blowup_sequence(&u, &cfg, 5).map_err(|e| e.to_string())?;
    let first = &rec.steps[0];
    ensure(first.x_node == node || first.y_node == node, format!("argmax pair ({}, {})", first.x_node, first.y_node))?;
    for (k, s) in rec.steps.iter().enumerate() {
        let wg = s.v.field.grid();
        let origin = s.v.field.values()[center_node(wg)];
        ensure(origin == 0.0, format!("step {k}: v(0) = {origin:e}"))?;
        ensure(s.v_seminorm <= 1.05, format!("step {k}: [v] = {:.4}", s.v_seminorm))?;
    }
    let worst = rec.steps.iter().map(|s| s.v_seminorm).fold(0.0, f64::max);
    let e = rec.fitted_exponent().ok_or("no growth fit")?;
    ensure(within(e, 0.5, 0.1), format!("growth exponent {e:.4}, max [v] {worst:.4}"))
}

fn center_node(g: &Grid) -> usize {
    g.index(&vec![g.center_index(); g.dim()])
}

fn mollification() -> Outcome {
    let out = experiment(Command::Mollify, |_| {})?;
    let contraction = out
        .verdicts
        .iter()
        .find(|v| v.check.starts_with("mollifier_contraction"))
        .ok_or("no contraction verdict")?;
    ensure(contraction.status == Status::Pass, contraction.detail.clone())?;
    let h1 = out
        .verdicts
        .iter()
        .find(|v| v.check == "h1_error_decreasing")
        .ok_or("no approximation verdict")?;
    ensure(h1.status == Status::Pass, h1.detail.clone())?;
    Ok(format!("{}; H1 {}", contraction.detail, h1.detail))
}

fn csv_bytes(dir: &Path) -> Result<Vec<(String, Vec<u8>)>, String> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .map_err(|e| e.to_string())?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    files.sort();
    files
        .into_iter()
        .map(|p| {
            let bytes = fs::read(&p).map_err(|e| e.to_string())?;
            Ok((p.file_name().unwrap().to_string_lossy().into_owned(), bytes))
        })
        .collect()
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut compared = 0;
    for cmd in ["degiorgi", "mollify"] {
        let mut runs = Vec::new();
        for rep in 0..2 {
            let out = dir.path().join(format!("{cmd}{rep}"));
            let status = Process::new(env!("CARGO_BIN_EXE_schauder-lab"))
                .args([cmd, "--seed", "11", "--out"])
                .arg(&out)
                .output()
                .map_err(|e| e.to_string())?
                .status;
            ensure(status.code() == Some(0), format!("{cmd} exited with {status}"))?;
            runs.push(csv_bytes(&out)?);
        }
        ensure(!runs[0].is_empty(), format!("{cmd} wrote no CSV"))?;
        ensure(runs[0] == runs[1], format!("{cmd} CSVs differ between runs"))?;
        compared += runs[0].len();
    }
    Ok(format!("{compared} CSV files byte-identical across two runs"))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("second-order convergence of the sine problem", convergence),
        ("exact reproduction of x^2 - y^2", reproduction),
        ("difference-quotient identities on random fields", difference_quotients),
        ("energy inequality: saddle value and ensemble stability", caccioppoli),
        ("truncation iteration: exponent, no-spike, monotone decay", de_giorgi),
        ("polynomial growth: saddle scans and e^x sin y", liouville),
        ("Hölder threshold: radial exponent and ratio stability", schauder_threshold),
        ("cusp blow-up sequence", cusp_blowup),
        ("mollifier contraction and rough-coefficient approximation", mollification),
        ("byte-identical CSVs for a fixed seed", determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = check();
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("PASS criterion {}: {name} — {detail} [{secs:.1}s]", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL criterion {}: {name} — {detail} [{secs:.1}s]", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        process::exit(1);
    }
}
