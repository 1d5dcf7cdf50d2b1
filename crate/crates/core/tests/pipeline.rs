//! Cross-module properties: solve once, then measure with several estimates.

use schauder_lab::caccioppoli::caccioppoli_check;
use schauder_lab::degiorgi::{no_spike_verify, DeGiorgiParams};
use schauder_lab::ensemble::{generate, solve_ensemble, EnsembleSpec};
use schauder_lab::schauder::{schauder_ratio, SchauderConfig};
use schauder_lab::solver::manifest::ProblemManifest;
use schauder_lab::solver::{solve_dirichlet, DiscreteSolution};

fn ensemble(size: usize, m: usize) -> Vec<DiscreteSolution> {
    solve_ensemble(&generate(&EnsembleSpec::new(2, size, 5)).unwrap(), m).unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    (a / b - 1.0).abs()
}

#[test]
fn ratios_are_homogeneous() {
    let cfg = SchauderConfig::new(2, 0, 0.4, 4.0, 8.0, 0.5, 0.9).unwrap();
    for sol in ensemble(3, 65) {
        for c in [1e-3, 7.0] {
            let big = sol.scaled(c);
            let a = caccioppoli_check(&sol, 0.5, 0.9).unwrap().ratio;
            let b = caccioppoli_check(&big, 0.5, 0.9).unwrap().ratio;
            assert!(rel(a, b) < 1e-9, "{a} {b}");
            let a = schauder_ratio(&sol, &cfg).unwrap().ratio;
            let b = schauder_ratio(&big, &cfg).unwrap().ratio;
            assert!(rel(a, b) < 1e-9, "{a} {b}");
        }
    }
}

#[test]
fn manifest_round_trip_reproduces_solution() {
    let sol = &ensemble(1, 33)[0];
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("instance.json");
    ProblemManifest::save(&sol.problem, &path).unwrap();
    let again = solve_dirichlet(&ProblemManifest::load(&path).unwrap()).unwrap();
    assert_eq!(again.problem.fingerprint(), sol.problem.fingerprint());
    assert_eq!(again.u.values(), sol.u.values());
}

#[test]
fn ensemble_is_reproducible() {
    let a = ensemble(2, 33);
    let b = ensemble(2, 33);
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(x.u.values(), y.u.values());
    }
}

#[test]
fn no_spike_holds_for_small_data() {
    let params = DeGiorgiParams::new(2, 4.0, 8.0, 0.25, 0.95, 3).unwrap().with_delta(0.5).unwrap();
    for sol in ensemble(3, 129) {
        let rep = no_spike_verify(&sol.scaled(1e-3), &params).unwrap();
        assert!(rep.holds(), "{rep:?}");
    }
}
