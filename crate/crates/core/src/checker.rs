//! Tower constants and the hypotheses that guarantee an a.c.c.i.m.

use serde::Serialize;

use crate::interval::{covers, merge, Interval, EPS_GEO};
use crate::maps::{distortion_constant, OpenSystem};
use crate::tower::{PieceFate, Tower};

/// Constants of the tower and the derived quantities used by the bounds.
#[derive(Clone, Debug, Serialize)]
pub struct ConstantsReport {
    pub mu: f64,
    pub alpha: f64,
    pub delta: f64,
    pub n_bases: usize,
    /// Generic lower bound `mu / 2`.
    pub gamma_generic: f64,
    /// Measured `min F' / mu^l` over returning cells.
    pub gamma: f64,
    pub beta: f64,
    pub c_tilde: f64,
    /// `C~ (2 delta)^alpha`.
    pub c: f64,
    pub xi: f64,
    pub a: f64,
    pub b: f64,
    pub m: f64,
    pub theta: f64,
    /// `N / delta`.
    pub a_level: f64,
    /// `sum_{l >= 1} e^{xi (l - 1)} m(H~_l)`.
    pub q: f64,
    pub d_h3: f64,
    pub mh: f64,
    /// `1 - q M`.
    pub lambda_lower: f64,
    /// `e^{-xi}`.
    pub lambda_floor: f64,
    /// `mH / (delta^2 (mu - sqrt(2 mu)))`.
    pub q_bound: f64,
    /// `N mH / (delta mu (1 - sqrt(2 / mu)))`.
    pub q_chain_bound: f64,
    /// Lipschitz constant `M / (delta^2 (mu - sqrt(2 mu)))`.
    pub c0: f64,
    /// False when `a >= 1`; `M` and the bounds built on it are then void.
    pub valid: bool,
}

/// The regime's default `xi = min(log(mu / 2) / 2, alpha log mu)`.
pub fn default_xi(mu: f64, alpha: f64) -> f64 {
    (0.5 * (mu / 2.0).ln()).min(alpha * mu.ln())
}

pub fn compute_constants(tower: &Tower, system: &OpenSystem, xi: Option<f64>) -> ConstantsReport {
    let map = system.map();
    let (mu, alpha) = (map.mu(), map.alpha());
    let delta = tower.delta();
    let n = tower.n_bases() as f64;
    let c_tilde = distortion_constant(map);
    let c = c_tilde * (2.0 * delta).powf(alpha);
    let xi = xi.unwrap_or_else(|| default_xi(mu, alpha));
    let gamma = tower
        .return_derivatives()
        .iter()
        .map(|r| r.min / mu.powi(r.level as i32))
        .fold(f64::INFINITY, f64::min);
    let gamma = if gamma.is_finite() { gamma } else { mu / 2.0 };
    let a = if alpha == 1.0 {
        (-xi).exp().max(1.0 / gamma)
    } else {
        (-xi).exp().max((1.0 + c) / gamma.powf(alpha))
    };
    let b = 1.0 + c;
    let valid = a < 1.0;
    let m = if valid { b / (1.0 - a) } else { f64::INFINITY };
    let q: f64 = tower
        .levels()
        .iter()
        .skip(1)
        .map(|s| (xi * (s.level as f64 - 1.0)).exp() * s.hole_mass)
        .sum();
    let d_h3 = (1.0 + c)
        * tower
            .cells()
            .filter(|(_, _, p)| matches!(p.fate, PieceFate::Return { .. }))
            .map(|(_, node, p)| (xi * node.level as f64).exp() * p.mass)
            .sum::<f64>();
    let mh = system.hole().measure();
    let root = (2.0 * mu).sqrt();
    ConstantsReport {
        mu,
        alpha,
        delta,
        n_bases: tower.n_bases(),
        gamma_generic: mu / 2.0,
        gamma,
        beta: mu.ln(),
        c_tilde,
        c,
        xi,
        a,
        b,
        m,
        theta: 2.0 / mu,
        a_level: n / delta,
        q,
        d_h3,
        mh,
        lambda_lower: 1.0 - q * m,
        lambda_floor: (-xi).exp(),
        q_bound: mh / (delta * delta * (mu - root)),
        q_chain_bound: n * mh / (delta * mu * (1.0 - (2.0 / mu).sqrt())),
        c0: m / (delta * delta * (mu - root)),
        valid,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Status {
    Pass,
    Fail,
    /// Reported only; the regime does not need it.
    NotRequired,
}

impl std::fmt::Display for Status {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::NotRequired => "N/A",
        })
    }
}

/// One hypothesis: `value <= threshold` passes; `margin = threshold - value`.
#[derive(Clone, Debug, Serialize)]
pub struct HypothesisCheck {
    pub name: &'static str,
    pub status: Status,
    pub value: f64,
    pub threshold: f64,
    pub margin: f64,
}

impl HypothesisCheck {
    fn new(name: &'static str, value: f64, threshold: f64, required: bool) -> Self {
        let status = if !required {
            Status::NotRequired
        } else if value <= threshold {
            Status::Pass
        } else {
            Status::Fail
        };
        Self {
            name,
            status,
            value,
            threshold,
            margin: threshold - value,
        }
    }

    pub fn passed(&self) -> bool {
        self.status != Status::Fail
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct LevelCheck {
    pub level: usize,
    /// `m(Delta_l) + m(H~_l)`.
    pub mass: f64,
    /// `A theta^l`.
    pub bound: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct HypothesisReport {
    pub checks: Vec<HypothesisCheck>,
    pub h1_levels: Vec<LevelCheck>,
}

impl HypothesisReport {
    pub fn get(&self, name: &str) -> Option<&HypothesisCheck> {
        self.checks.iter().find(|c| c.name == name)
    }

    /// True when every required hypothesis passes.
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.name == "H3" || c.passed())
    }
}

/// Tags (H1), (H2), (H3'), (H3) and (A1) with pass/fail and margins.
/// Failures are advisory; nothing here aborts.
pub fn check_hypotheses(report: &ConstantsReport, tower: &Tower, system: &OpenSystem) -> HypothesisReport {
    let h1_levels: Vec<LevelCheck> = tower
        .levels()
        .iter()
        .map(|s| LevelCheck {
            level: s.level,
            mass: s.mass + s.hole_mass,
            bound: report.a_level * report.theta.powi(s.level as i32),
        })
        .collect();
    let h1_ratio = h1_levels
        .iter()
        .map(|l| l.mass / l.bound)
        .fold(0.0, f64::max);
    let alpha = report.alpha;
    let h2_value = (1.0 + report.c) / report.gamma.powf(alpha);
    let h3p_threshold = (1.0 - report.a).powi(2) / report.b;
    let mu = report.mu;
    let a_prime = (2.0 / mu)
        .sqrt()
        .max(2f64.powf(alpha) * (1.0 + report.c) / mu.powf(alpha));
    let a1_threshold = (1.0 - a_prime).powi(2) * mu * report.delta.powi(2) * (1.0 - (2.0 / mu).sqrt()) / (1.0 + report.c);
    let _ = system;
    HypothesisReport {
        checks: vec![
            HypothesisCheck::new("H1", h1_ratio, 1.0, true),
            HypothesisCheck::new("H2", h2_value, 1.0, alpha < 1.0),
            HypothesisCheck::new("H3'", report.q, if report.valid { h3p_threshold } else { f64::NAN }, true),
            HypothesisCheck::new("H3", report.q, if report.valid { h3p_threshold / 4.0 } else { f64::NAN }, true),
            HypothesisCheck::new("A1", report.mh, a1_threshold, true),
        ],
        h1_levels,
    }
}

/// Outcome of a covering search.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "status", content = "steps", rename_all = "snake_case")]
pub enum Transitivity {
    /// Least covering time for each `I_j`.
    Satisfied(Vec<usize>),
    Undetermined,
}

/// How images that land in the hole count towards coverage.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CoverMode {
    /// Union of `T^n I_{j,n}` must equal `I`.
    Surviving,
    /// Union of `T^n I_{j,n-1}` (hole parts included) must equal `[0, 1]`.
    Mixing,
}

/// Least `n <= horizon` for which the iterated images of `start` cover,
/// or `None`.
pub fn covering_time(system: &OpenSystem, start: Interval, horizon: usize, mode: CoverMode) -> Option<usize> {
    let target: Vec<Interval> = match mode {
        CoverMode::Surviving => system.survivors().to_vec(),
        CoverMode::Mixing => vec![Interval::UNIT],
    };
    let mut union = vec![start];
    let mut live = vec![start];
    if covers(&union, &target) {
        return Some(0);
    }
    for n in 1..=horizon {
        let mut images = Vec::new();
        for piece in &live {
            for e in system.q() {
                if let Some(p) = e.interval.intersect(piece, EPS_GEO) {
                    images.push(system.map().branches()[e.branch].image_of(&p));
                }
            }
        }
        let images = merge(images);
        let surviving: Vec<Interval> = images
            .iter()
            .flat_map(|im| system.survivors().iter().filter_map(move |s| s.intersect(im, EPS_GEO)))
            .collect();
        match mode {
            CoverMode::Surviving => union.extend(surviving.iter().copied()),
            CoverMode::Mixing => union.extend(images.iter().copied()),
        }
        union = merge(union);
        live = merge(surviving);
        if covers(&union, &target) {
            return Some(n);
        }
        if live.is_empty() {
            return None;
        }
    }
    None
}

/// For each `I_j`, the least `n_j` with `I_j u T I_{j,1} u ... u T^{n_j} I_{j,n_j} = I`.
pub fn check_transitivity(system: &OpenSystem, horizon: usize) -> Transitivity {
    let steps: Option<Vec<usize>> = system
        .q()
        .iter()
        .map(|e| covering_time(system, e.interval, horizon, CoverMode::Surviving))
        .collect();
    steps.map_or(Transitivity::Undetermined, Transitivity::Satisfied)
}

/// The mixing property used for hole families: the images of every `I_j`
/// (hole parts included, but not iterated) cover `[0, 1]`.
pub fn check_mixing(system: &OpenSystem, horizon: usize) -> Transitivity {
    let steps: Option<Vec<usize>> = system
        .q()
        .iter()
        .map(|e| covering_time(system, e.interval, horizon, CoverMode::Mixing))
        .collect();
    steps.map_or(Transitivity::Undetermined, Transitivity::Satisfied)
}
