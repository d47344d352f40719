//! Ulam discretization of the interval transfer operator with a hole.
//!
//! Independent of the tower: bin `i` sends mass to bin `j` in proportion to
//! `m(B_i n I n T^-1 (B_j n I)) / m(B_i n I)`. Exact for piecewise-affine maps
//! whose branch cuts and hole are aligned with the grid.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::interval::{Interval, EPS_GEO};
use crate::maps::OpenSystem;

#[derive(Clone, Debug, Serialize)]
pub struct UlamResult {
    pub n_bins: usize,
    pub lambda: f64,
    /// Density on each bin, zero on bins entirely in the hole.
    pub psi: Vec<f64>,
    /// `m(B_i n I)`.
    pub survivor_len: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
}

impl UlamResult {
    /// Mass of bin `i`.
    pub fn mass(&self, i: usize) -> f64 {
        self.psi[i] * self.survivor_len[i]
    }
}

/// Transition weights out of each bin, `(target, probability)`.
fn transitions(system: &OpenSystem, n_bins: usize) -> (Vec<Vec<(usize, f64)>>, Vec<f64>) {
    let width = 1.0 / n_bins as f64;
    let bin = |i: usize| Interval::new(i as f64 * width, if i + 1 == n_bins { 1.0 } else { (i + 1) as f64 * width });
    let survivors = system.survivors();
    let mut rows = Vec::with_capacity(n_bins);
    let mut lens = Vec::with_capacity(n_bins);
    for i in 0..n_bins {
        let bi = bin(i);
        let len: f64 = survivors.iter().map(|s| s.overlap_len(&bi)).sum();
        lens.push(len);
        let mut row: Vec<(usize, f64)> = Vec::new();
        if len <= 0.0 {
            rows.push(row);
            continue;
        }
        for e in system.q() {
            let Some(piece) = e.interval.intersect(&bi, EPS_GEO * width) else {
                continue;
            };
            let b = &system.map().branches()[e.branch];
            let img = b.image_of(&piece);
            let j0 = ((img.lo * n_bins as f64).floor() as usize).min(n_bins - 1);
            let j1 = ((img.hi * n_bins as f64).ceil() as usize).clamp(j0 + 1, n_bins);
            for j in j0..j1 {
                let bj = bin(j);
                let mut mass = 0.0;
                for s in survivors {
                    if let Some(k) = s.intersect(&bj, 0.0).and_then(|k| k.intersect(&img, 0.0)) {
                        mass += b.preimage_of(&k).len();
                    }
                }
                if mass > 0.0 {
                    match row.last_mut() {
                        Some((t, m)) if *t == j => *m += mass / len,
                        _ => row.push((j, mass / len)),
                    }
                }
            }
        }
        rows.push(row);
    }
    (rows, lens)
}

/// Leading eigenpair of the Ulam matrix by power iteration from the uniform
/// density on `I`.
pub fn ulam_oracle(system: &OpenSystem, n_bins: usize) -> Result<UlamResult> {
    if n_bins < system.k() {
        return Err(Error::Domain(format!("n_bins = {n_bins} is below K = {}", system.k())));
    }
    let (rows, lens) = transitions(system, n_bins);
    let total: f64 = lens.iter().sum();
    let mut p: Vec<f64> = lens.iter().map(|l| l / total).collect();
    let mut lambda = 0.0;
    let mut residual = f64::INFINITY;
    let mut iterations = 0;
    while iterations < 100_000 && residual > 1e-14 {
        let mut next = vec![0.0; n_bins];
        for (i, row) in rows.iter().enumerate() {
            for &(j, w) in row {
                next[j] += p[i] * w;
            }
        }
        lambda = next.iter().sum();
        if !(lambda > f64::MIN_POSITIVE) {
            return Err(Error::TotalEscape);
        }
        next.iter_mut().for_each(|x| *x /= lambda);
        residual = next.iter().zip(&p).map(|(a, b)| (a - b).abs()).sum();
        p = next;
        iterations += 1;
    }
    let psi = p
        .iter()
        .zip(&lens)
        .map(|(m, l)| if *l > 0.0 { m / l } else { 0.0 })
        .collect();
    Ok(UlamResult {
        n_bins,
        lambda,
        psi,
        survivor_len: lens,
        iterations,
        residual,
    })
}
