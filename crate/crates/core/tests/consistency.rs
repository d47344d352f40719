//! Cross-checks between the tower, the Ulam oracle, direct iteration and
//! Monte Carlo.

use accim::analysis::{solve, srb_closed, SolveOptions};
use accim::maps::{build_open_system, survivor_measure, Hole, OpenSystem};
use accim::montecarlo::{empirical_conditional_density, InitialMeasure};
use accim::presets;
use accim::ulam::ulam_oracle;

fn system(map: accim::maps::PiecewiseExpandingMap, hole: Hole) -> OpenSystem {
    build_open_system(map, hole).unwrap()
}

fn l1_masses(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

#[test]
fn survivor_ratio_matches_lambda() {
    let s = system(presets::tripling(), presets::offset_hole());
    let lambda = solve(&s, &SolveOptions::default()).unwrap().result.lambda;
    let grid = 1 << 22;
    let a = survivor_measure(&s, 12, grid);
    let b = survivor_measure(&s, 13, grid);
    assert!((b / a - lambda).abs() < 1e-3, "ratio {} vs {lambda}", b / a);
}

#[test]
fn tower_density_matches_ulam() {
    let bins = 3000;
    for (map, hole) in [
        (presets::tripling(), presets::small_hole()),
        (presets::tripling(), presets::offset_hole()),
        (presets::perturbed_tripling(), presets::small_hole()),
    ] {
        let s = system(map, hole);
        let sol = solve(&s, &SolveOptions::default()).unwrap();
        let u = ulam_oracle(&s, bins).unwrap();
        let tower = sol.density.binned(bins);
        let oracle: Vec<f64> = (0..bins).map(|i| u.mass(i)).collect();
        let total: f64 = oracle.iter().sum();
        let oracle: Vec<f64> = oracle.iter().map(|m| m / total).collect();
        let d = l1_masses(&tower, &oracle);
        assert!(d <= 1e-2, "L1 {d}");
        assert!((u.lambda - sol.result.lambda).abs() < 1e-3);
    }
}

#[test]
fn perturbed_srb_matches_ulam() {
    let map = presets::perturbed_tripling();
    let sol = srb_closed(&map, &SolveOptions::default()).unwrap();
    let bins = 2000;
    let u = ulam_oracle(&system(map, Hole::empty()), bins).unwrap();
    let oracle: Vec<f64> = (0..bins).map(|i| u.mass(i)).collect();
    let d = l1_masses(&sol.density.binned(bins), &oracle);
    assert!(d <= 1e-3, "L1 {d}");
}

#[test]
fn histogram_matches_tower_density() {
    let s = system(presets::tripling(), presets::offset_hole());
    let sol = solve(&s, &SolveOptions::default()).unwrap();
    let bins = 32;
    let h = empirical_conditional_density(&s, 10, bins, 400_000, 3, InitialMeasure::Uniform).unwrap();
    let masses = sol.density.binned(bins);
    let (mut d, mut noise) = (0.0, 0.0);
    for (b, m) in h.bins.iter().zip(&masses) {
        let w = b.bin_right - b.bin_left;
        d += (b.density * w - m).abs();
        noise += 4.0 * b.stderr * w;
    }
    assert!(d <= noise.max(1e-2), "L1 {d} vs noise {noise}");
}

/// Survivors forget where they started: two initial measures give the same
/// histogram up to sampling noise.
#[test]
fn initial_condition_independence() {
    let s = system(presets::tripling(), presets::small_hole());
    let a = empirical_conditional_density(&s, 12, 32, 300_000, 1, InitialMeasure::Uniform).unwrap();
    let b = empirical_conditional_density(&s, 12, 32, 300_000, 2, InitialMeasure::XWeighted).unwrap();
    assert!(a.l1_distance(&b) <= a.l1_noise(&b), "{} vs {}", a.l1_distance(&b), a.l1_noise(&b));
}
