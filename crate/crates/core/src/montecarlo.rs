//! Particle ensembles: survival probabilities and conditional distributions.
//!
//! Particle `i` draws its starting point from `ChaCha8Rng` seeded with
//! `seed` on stream `i`, so results do not depend on how particles are split
//! across threads. Counts are integers and aggregate exactly.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interval::Interval;
use crate::maps::{evaluate, OpenSystem};

/// Fewest survivors per histogram bin before starvation is declared.
pub const MIN_PER_BIN: u64 = 10;

/// Initial distribution `mu_0` on `I`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialMeasure {
    /// Normalized Lebesgue measure on `I`.
    #[default]
    Uniform,
    /// Density proportional to `x` on `I`.
    XWeighted,
}

impl InitialMeasure {
    /// Inverse CDF on the survivor set.
    fn sample(&self, survivors: &[Interval], u: f64) -> f64 {
        let weight = |s: &Interval| match self {
            InitialMeasure::Uniform => s.len(),
            InitialMeasure::XWeighted => 0.5 * (s.hi * s.hi - s.lo * s.lo),
        };
        let total: f64 = survivors.iter().map(weight).sum();
        let mut t = u * total;
        for s in survivors {
            let w = weight(s);
            if t <= w || std::ptr::eq(s, survivors.last().unwrap()) {
                let x = match self {
                    InitialMeasure::Uniform => s.lo + t,
                    InitialMeasure::XWeighted => (s.lo * s.lo + 2.0 * t).sqrt(),
                };
                return s.clamp(x);
            }
            t -= w;
        }
        unreachable!("survivor set is non-empty")
    }
}

fn particle_rng(seed: u64, i: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(i);
    rng
}

/// Follows particle `i` for up to `n_steps` steps. Returns the step at which
/// it entered the hole (`None` if it survived) and its last position.
fn run_particle(system: &OpenSystem, seed: u64, i: u64, n_steps: usize, initial: InitialMeasure) -> (Option<usize>, f64) {
    let mut rng = particle_rng(seed, i);
    let mut x = initial.sample(system.survivors(), rng.random::<f64>());
    for n in 1..=n_steps {
        x = evaluate(system.map(), x).expect("orbits stay in [0, 1]").0;
        if system.hole().contains(x) {
            return (Some(n), x);
        }
    }
    (None, x)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SurvivalRecord {
    pub n: usize,
    pub survivors: u64,
    pub p_n: f64,
    /// `p_{n+1} / p_n`; absent on the last row or once everything is dead.
    pub ratio: Option<f64>,
    /// Binomial standard error of `p_n`.
    pub stderr: f64,
}

/// Survival counts for `n = 0..=n_steps`. If every particle dies early the
/// record stops at the first empty step.
pub fn simulate_survival(
    system: &OpenSystem,
    n_particles: u64,
    n_steps: usize,
    seed: u64,
    initial: InitialMeasure,
) -> Result<Vec<SurvivalRecord>> {
    if n_particles == 0 {
        return Err(Error::Domain("need at least one particle".into()));
    }
    let deaths = (0..n_particles)
        .into_par_iter()
        .fold(
            || vec![0u64; n_steps + 2],
            |mut acc, i| {
                let (d, _) = run_particle(system, seed, i, n_steps, initial);
                acc[d.unwrap_or(n_steps + 1)] += 1;
                acc
            },
        )
        .reduce(
            || vec![0u64; n_steps + 2],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                a
            },
        );
    let mut alive = n_particles;
    let mut counts = Vec::with_capacity(n_steps + 1);
    for d in deaths.iter().take(n_steps + 1) {
        alive -= d;
        counts.push(alive);
        if alive == 0 {
            break;
        }
    }
    let total = n_particles as f64;
    Ok(counts
        .iter()
        .enumerate()
        .map(|(n, &s)| {
            let p = s as f64 / total;
            SurvivalRecord {
                n,
                survivors: s,
                p_n: p,
                ratio: counts.get(n + 1).filter(|_| s > 0).map(|&t| t as f64 / s as f64),
                stderr: (p * (1.0 - p) / total).sqrt(),
            }
        })
        .collect())
}

/// Pooled estimate `sum S_{n+1} / sum S_n` over `n` in `[from, to)`: the
/// maximum-likelihood per-step survival rate, with its binomial error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RatioFit {
    pub lambda: f64,
    pub stderr: f64,
    pub from: usize,
    pub to: usize,
}

pub fn ratio_fit(records: &[SurvivalRecord], from: usize, to: usize) -> Option<RatioFit> {
    let (mut num, mut den) = (0u64, 0u64);
    for n in from..to {
        let (a, b) = (records.get(n)?, records.get(n + 1)?);
        den += a.survivors;
        num += b.survivors;
    }
    if den == 0 {
        return None;
    }
    let lambda = num as f64 / den as f64;
    Some(RatioFit {
        lambda,
        stderr: (lambda * (1.0 - lambda) / den as f64).sqrt(),
        from,
        to,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HistogramBin {
    pub bin_left: f64,
    pub bin_right: f64,
    pub density: f64,
    pub stderr: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Histogram {
    pub step: usize,
    pub survivors: u64,
    pub bins: Vec<HistogramBin>,
}

impl Histogram {
    /// `sum |a - b| * width` between two histograms on the same bins.
    pub fn l1_distance(&self, other: &Histogram) -> f64 {
        self.bins
            .iter()
            .zip(&other.bins)
            .map(|(a, b)| (a.density - b.density).abs() * (a.bin_right - a.bin_left))
            .sum()
    }

    /// Combined 4-sigma noise level for `l1_distance`.
    pub fn l1_noise(&self, other: &Histogram) -> f64 {
        self.bins
            .iter()
            .zip(&other.bins)
            .map(|(a, b)| 4.0 * a.stderr.hypot(b.stderr) * (a.bin_right - a.bin_left))
            .sum()
    }
}

/// Histogram of the survivors' positions at step `n`, normalized to a
/// probability density on `[0, 1]`.
pub fn empirical_conditional_density(
    system: &OpenSystem,
    n: usize,
    bins: usize,
    n_particles: u64,
    seed: u64,
    initial: InitialMeasure,
) -> Result<Histogram> {
    if bins == 0 {
        return Err(Error::Domain("need at least one bin".into()));
    }
    let counts = (0..n_particles)
        .into_par_iter()
        .fold(
            || vec![0u64; bins],
            |mut acc, i| {
                if let (None, x) = run_particle(system, seed, i, n, initial) {
                    acc[((x * bins as f64) as usize).min(bins - 1)] += 1;
                }
                acc
            },
        )
        .reduce(
            || vec![0u64; bins],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                a
            },
        );
    let survivors: u64 = counts.iter().sum();
    let required = MIN_PER_BIN * bins as u64;
    if survivors < required {
        return Err(Error::Starvation {
            step: n,
            survivors,
            required,
            bins,
        });
    }
    let width = 1.0 / bins as f64;
    let total = survivors as f64;
    Ok(Histogram {
        step: n,
        survivors,
        bins: counts
            .iter()
            .enumerate()
            .map(|(b, &c)| {
                let p = c as f64 / total;
                HistogramBin {
                    bin_left: b as f64 * width,
                    bin_right: (b + 1) as f64 * width,
                    density: p / width,
                    stderr: (p * (1.0 - p) / total).sqrt() / width,
                }
            })
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maps::{build_open_system, Hole};
    use crate::presets;

    #[test]
    fn markov_survival() {
        let s = build_open_system(presets::tripling(), presets::markov_hole()).unwrap();
        let rec = simulate_survival(&s, 200_000, 8, 7, InitialMeasure::Uniform).unwrap();
        assert_eq!(rec[0].p_n, 1.0);
        let p5 = (2.0f64 / 3.0).powi(5);
        assert!((rec[5].p_n - p5).abs() < 4.0 * rec[5].stderr, "{} vs {p5}", rec[5].p_n);
        assert!(rec.windows(2).all(|w| w[1].survivors <= w[0].survivors));
        let fit = ratio_fit(&rec, 1, 8).unwrap();
        assert!((fit.lambda - 2.0 / 3.0).abs() < 4.0 * fit.stderr);
    }

    #[test]
    fn closed_survival_is_one() {
        let s = build_open_system(presets::tripling(), Hole::empty()).unwrap();
        let rec = simulate_survival(&s, 1000, 10, 1, InitialMeasure::Uniform).unwrap();
        assert!(rec.iter().all(|r| r.p_n == 1.0));
    }

    #[test]
    fn deterministic_and_truncates() {
        let s = build_open_system(presets::tripling(), presets::markov_hole()).unwrap();
        let a = simulate_survival(&s, 5000, 12, 3, InitialMeasure::Uniform).unwrap();
        let b = simulate_survival(&s, 5000, 12, 3, InitialMeasure::Uniform).unwrap();
        assert_eq!(a, b);
        let few = simulate_survival(&s, 3, 60, 3, InitialMeasure::Uniform).unwrap();
        assert_eq!(few.last().unwrap().survivors, 0);
        assert!(few.len() <= 61);
    }

    #[test]
    fn initial_histogram_and_starvation() {
        let s = build_open_system(presets::tripling(), Hole::empty()).unwrap();
        let h = empirical_conditional_density(&s, 0, 10, 100_000, 5, InitialMeasure::Uniform).unwrap();
        assert!(h.bins.iter().all(|b| (b.density - 1.0).abs() < 4.0 * b.stderr));
        let x = empirical_conditional_density(&s, 0, 10, 100_000, 5, InitialMeasure::XWeighted).unwrap();
        assert!((x.bins[9].density - 1.9).abs() < 4.0 * x.bins[9].stderr);
        let s = build_open_system(presets::tripling(), presets::markov_hole()).unwrap();
        assert!(matches!(
            empirical_conditional_density(&s, 10, 100, 1000, 5, InitialMeasure::Uniform),
            Err(Error::Starvation { .. })
        ));
    }
}
