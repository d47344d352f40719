//! The growth partition of a single interval.

use serde::{Deserialize, Serialize};

use super::engine::{self, EngineLimits, PieceFate, Target};
use crate::error::{Error, Result};
use crate::interval::Interval;
use crate::maps::OpenSystem;

/// What to do when the largest hole component exceeds `delta (mu - 2) / 2`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HoleBound {
    /// Refuse with a hypothesis failure.
    Enforce,
    /// Record the violation and proceed.
    #[default]
    Report,
}

/// Result of comparing `h` with `delta (mu - 2) / 2`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct HoleBoundCheck {
    pub h: f64,
    pub bound: f64,
    pub satisfied: bool,
}

impl HoleBoundCheck {
    pub fn evaluate(system: &OpenSystem, delta: f64, policy: HoleBound) -> Result<Self> {
        let h = system.hole().max_len();
        let bound = delta * (system.map().mu() - 2.0) / 2.0;
        let satisfied = h <= bound;
        if !satisfied && policy == HoleBound::Enforce {
            return Err(Error::Hypothesis(format!(
                "largest hole component {h} exceeds delta (mu - 2) / 2 = {bound}"
            )));
        }
        Ok(Self { h, bound, satisfied })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", content = "index", rename_all = "snake_case")]
pub enum Fate {
    /// Index into `Q`.
    ReturnsTo(usize),
    /// Index of the hole component.
    FallsInHole(usize),
}

#[derive(Clone, Debug, Serialize)]
pub struct PartitionElement {
    pub omega: Interval,
    pub stop_time: usize,
    pub fate: Fate,
    pub image_interval: Interval,
    /// Lebesgue measure of `omega`, computed from the derivative along the
    /// itinerary rather than from the endpoints.
    pub measure: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct GrowthPartition {
    pub omega: Interval,
    /// Elements in stop-time order, left to right within a step.
    pub elements: Vec<PartitionElement>,
    /// `m{S > n}` for `n = 0..=n_max`.
    pub survival: Vec<f64>,
    /// `m{S > n_max}`.
    pub remainder: f64,
    /// Mass of elements that fall into the hole.
    pub hole_mass: f64,
    pub hole_bound: HoleBoundCheck,
}

impl GrowthPartition {
    /// Largest ratio `m{S > n} / (D_len (2/mu)^n)` over recorded `n`.
    pub fn tail_ratio(&self, system: &OpenSystem) -> f64 {
        let theta = 2.0 / system.map().mu();
        self.survival
            .iter()
            .enumerate()
            .map(|(n, m)| m / (system.d_len() * theta.powi(n as i32)))
            .fold(0.0, f64::max)
    }

    /// `mH / (mu - 2)`.
    pub fn hole_mass_bound(system: &OpenSystem) -> f64 {
        system.hole().measure() / (system.map().mu() - 2.0)
    }
}

/// Partitions `omega` (inside one `I_j`, length at least `delta`) into pieces
/// that either grow to cover an `I_j` or fall into the hole, following
/// points for at most `n_max` steps.
pub fn growth_partition(
    system: &OpenSystem,
    omega: Interval,
    delta: f64,
    n_max: usize,
    policy: HoleBound,
) -> Result<GrowthPartition> {
    if omega.len() < delta * (1.0 - 1e-9) {
        return Err(Error::Domain(format!(
            "|omega| = {} is shorter than delta = {delta}",
            omega.len()
        )));
    }
    let q = system
        .q()
        .iter()
        .position(|e| e.interval.contains_interval(&omega))
        .ok_or_else(|| Error::Domain(format!("{omega} is not inside a single I_j")))?;
    let hole_bound = HoleBoundCheck::evaluate(system, delta, policy)?;
    let targets: Vec<Vec<Target>> = system
        .q()
        .iter()
        .enumerate()
        .map(|(i, e)| vec![Target { id: i, interval: e.interval }])
        .collect();
    let forest = engine::grow(
        system,
        &[(omega, q)],
        &targets,
        &EngineLimits {
            l_max: n_max,
            l_cap: n_max,
            tail_tol: f64::INFINITY,
            max_nodes: 4_000_000,
        },
    )?;
    let scale = omega.len();
    let mut elements = Vec::new();
    let mut survival = vec![0.0; n_max + 1];
    let mut hole_mass = 0.0;
    let mut lost = vec![0.0; n_max + 2];
    for (idx, node) in forest.nodes.iter().enumerate() {
        survival[node.level] += node.mass * scale;
        let resolved: f64 = node.pieces.iter().map(|p| p.mass).sum();
        lost[node.level + 1] += (node.mass - resolved).max(0.0) * scale;
        for p in &node.pieces {
            let fate = match p.fate {
                PieceFate::Return { target } => Fate::ReturnsTo(target),
                PieceFate::Escape { hole } => Fate::FallsInHole(hole),
                _ => continue,
            };
            let a = forest.to_root(system, idx, p.domain.lo);
            let b = forest.to_root(system, idx, p.domain.hi);
            if let Fate::FallsInHole(_) = fate {
                hole_mass += p.mass * scale;
            }
            elements.push(PartitionElement {
                omega: Interval::new(a, b),
                stop_time: node.level + 1,
                fate,
                image_interval: p.image,
                measure: p.mass * scale,
            });
        }
    }
    // Pieces dropped as numerically empty never stop.
    let mut acc = 0.0;
    for n in 0..=n_max {
        acc += lost[n];
        survival[n] += acc;
    }
    Ok(GrowthPartition {
        omega,
        remainder: survival[n_max],
        elements,
        survival,
        hole_mass,
        hole_bound,
    })
}
