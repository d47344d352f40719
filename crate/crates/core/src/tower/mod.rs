//! Markov extension (tower) over reference intervals of length between
//! `delta` and `2 delta`.

mod engine;
pub mod growth;

pub use engine::{Node, Piece, PieceFate};
pub use growth::{growth_partition, Fate, GrowthPartition, HoleBound, HoleBoundCheck, PartitionElement};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::interval::{Interval, EPS_GEO};
use crate::maps::{distortion_constant, evaluate, OpenSystem};
use engine::{EngineLimits, Forest, Target};

/// Margin used when `delta` must be shrunk to control nonlinearity.
const DELTA_MARGIN: f64 = 0.01;

/// Picks the reference length scale.
///
/// For `alpha = 1` this is `d`. Otherwise it is the largest `delta <= d` with
/// `2^alpha (1 + C~ (2 delta)^alpha) / mu^alpha < 1 - margin`; the left side
/// is increasing in `delta`, so the boundary is solved in closed form.
pub fn choose_delta(system: &OpenSystem) -> Result<f64> {
    let map = system.map();
    let (alpha, mu) = (map.alpha(), map.mu());
    let d = system.d();
    if alpha == 1.0 {
        return Ok(d);
    }
    let ct = distortion_constant(map);
    let slack = (1.0 - DELTA_MARGIN) * (mu / 2.0).powf(alpha) - 1.0;
    if slack <= 0.0 {
        return Err(Error::Hypothesis(format!(
            "2^alpha / mu^alpha = {} leaves no room below 1 - {DELTA_MARGIN}",
            (2.0 / mu).powf(alpha)
        )));
    }
    if ct == 0.0 {
        return Ok(d);
    }
    let delta_star = 0.5 * (slack / ct).powf(1.0 / alpha);
    // Step just inside the strict inequality.
    Ok(d.min(delta_star * (1.0 - 1e-12)))
}

/// A reference interval `Lambda^(i)` inside `Q` element `q`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Base {
    pub interval: Interval,
    pub q: usize,
}

/// Splits each `I_j` into `ceil(|I_j| / (2 delta))` equal pieces.
pub fn build_bases(system: &OpenSystem, delta: f64) -> Result<Vec<Base>> {
    let mut bases = Vec::new();
    for (q, e) in system.q().iter().enumerate() {
        let len = e.interval.len();
        if len < delta * (1.0 - 1e-9) {
            return Err(Error::Hypothesis(format!(
                "I_{q} = {} is shorter than delta = {delta}",
                e.interval
            )));
        }
        let n = ((len / (2.0 * delta)) * (1.0 - 1e-12)).ceil().max(1.0) as usize;
        for k in 0..n {
            let lo = e.interval.lerp(k as f64 / n as f64);
            let hi = if k + 1 == n {
                e.interval.hi
            } else {
                e.interval.lerp((k + 1) as f64 / n as f64)
            };
            bases.push(Base {
                interval: Interval::new(lo, hi),
                q,
            });
        }
    }
    Ok(bases)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TowerOptions {
    pub l_max: usize,
    /// Depth cap for automatic extension past `l_max`.
    pub l_cap: usize,
    /// Extension continues while the untracked mass is at least
    /// `tail_rel * m(I)`.
    pub tail_rel: f64,
    pub max_nodes: usize,
    pub hole_bound: HoleBound,
}

impl Default for TowerOptions {
    fn default() -> Self {
        Self {
            l_max: 60,
            l_cap: 600,
            tail_rel: 1e-9,
            max_nodes: 2_000_000,
            hole_bound: HoleBound::Report,
        }
    }
}

/// Level-wise tower measures in base units.
#[derive(Clone, Debug, Serialize)]
pub struct LevelStats {
    pub level: usize,
    /// `m(Delta_l)`.
    pub mass: f64,
    /// `m(H~_l)`.
    pub hole_mass: f64,
    /// Mass of the returning cells on this level.
    pub return_mass: f64,
    pub nodes: usize,
}

/// Identifies a cell `Delta_{l,j}^{(i)}`: a fate-refined piece of a node.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct CellId {
    pub node: usize,
    pub piece: usize,
}

/// Sampled range of `F'` on a returning cell.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct ReturnDerivative {
    pub cell: CellId,
    pub level: usize,
    pub min: f64,
    pub max: f64,
}

#[derive(Clone, Debug)]
pub struct Tower {
    system: OpenSystem,
    delta: f64,
    bases: Vec<Base>,
    forest: Forest,
    l_max: usize,
    levels: Vec<LevelStats>,
    tail_mass: f64,
    hole_bound: HoleBoundCheck,
    returns: Vec<ReturnDerivative>,
    /// For each base, the returning cells landing on it.
    incoming: Vec<Vec<CellId>>,
}

/// Builds the tower with default limits and the given `l_max`.
pub fn build_tower(system: &OpenSystem, delta: f64, l_max: usize) -> Result<Tower> {
    build_tower_with(
        system,
        delta,
        &TowerOptions {
            l_max,
            ..TowerOptions::default()
        },
    )
}

pub fn build_tower_with(system: &OpenSystem, delta: f64, opts: &TowerOptions) -> Result<Tower> {
    let hole_bound = HoleBoundCheck::evaluate(system, delta, opts.hole_bound)?;
    let bases = build_bases(system, delta)?;
    let mut targets: Vec<Vec<Target>> = vec![Vec::new(); system.k()];
    for (i, b) in bases.iter().enumerate() {
        targets[b.q].push(Target {
            id: i,
            interval: b.interval,
        });
    }
    let roots: Vec<(Interval, usize)> = bases.iter().map(|b| (b.interval, b.q)).collect();
    let forest = engine::grow(
        system,
        &roots,
        &targets,
        &EngineLimits {
            l_max: opts.l_max,
            l_cap: opts.l_cap.max(opts.l_max),
            tail_tol: opts.tail_rel * system.survivor_len(),
            max_nodes: opts.max_nodes,
        },
    )?;

    let depth = forest.depth;
    let mut levels: Vec<LevelStats> = (0..=depth + 1)
        .map(|level| LevelStats {
            level,
            mass: 0.0,
            hole_mass: 0.0,
            return_mass: 0.0,
            nodes: 0,
        })
        .collect();
    let mut tail_mass = 0.0;
    let mut returns = Vec::new();
    let mut incoming = vec![Vec::new(); bases.len()];
    for (n, node) in forest.nodes.iter().enumerate() {
        let l = node.level;
        levels[l].mass += node.mass;
        levels[l].nodes += 1;
        let resolved: f64 = node.pieces.iter().map(|p| p.mass).sum();
        tail_mass += (node.mass - resolved).max(0.0);
        for (k, p) in node.pieces.iter().enumerate() {
            let cell = CellId { node: n, piece: k };
            match p.fate {
                PieceFate::Escape { .. } => levels[l + 1].hole_mass += p.mass,
                PieceFate::Truncated => tail_mass += p.mass,
                PieceFate::Return { target } => {
                    levels[l].return_mass += p.mass;
                    incoming[target].push(cell);
                    let (min, max) = return_derivative_range(system, &forest, &bases, n, p, target);
                    returns.push(ReturnDerivative {
                        cell,
                        level: l,
                        min,
                        max,
                    });
                }
                PieceFate::Continue { .. } => {}
            }
        }
    }
    while levels.len() > 1 && levels.last().is_some_and(|s| s.nodes == 0 && s.hole_mass == 0.0) {
        levels.pop();
    }
    Ok(Tower {
        system: system.clone(),
        delta,
        bases,
        l_max: depth,
        forest,
        levels,
        tail_mass,
        hole_bound,
        returns,
        incoming,
    })
}

fn return_derivative_range(
    system: &OpenSystem,
    forest: &Forest,
    bases: &[Base],
    node: usize,
    p: &Piece,
    target: usize,
) -> (f64, f64) {
    let n = &forest.nodes[node];
    let b = &system.map().branches()[system.q()[n.q].branch];
    let lam = bases[target].interval.len();
    let samples = if n.w_const.is_some() { 1 } else { 9 };
    let mut lo = f64::INFINITY;
    let mut hi: f64 = 0.0;
    for s in 0..=samples {
        let y = if samples == 1 {
            p.domain.mid()
        } else {
            p.domain.lerp(s as f64 / samples as f64)
        };
        let d = b.derivative(y).abs() / (lam * forest.w(system, node, y));
        lo = lo.min(d);
        hi = hi.max(d);
    }
    (lo, hi)
}

impl Tower {
    pub fn system(&self) -> &OpenSystem {
        &self.system
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn bases(&self) -> &[Base] {
        &self.bases
    }

    /// Number of bases `N`.
    pub fn n_bases(&self) -> usize {
        self.bases.len()
    }

    pub fn nodes(&self) -> &[Node] {
        &self.forest.nodes
    }

    /// Deepest level built.
    pub fn l_max(&self) -> usize {
        self.l_max
    }

    pub fn levels(&self) -> &[LevelStats] {
        &self.levels
    }

    /// `m(Delta_l)`, zero past the top.
    pub fn level_mass(&self, l: usize) -> f64 {
        self.levels.get(l).map_or(0.0, |s| s.mass)
    }

    /// `m(H~_l)`.
    pub fn hole_mass(&self, l: usize) -> f64 {
        self.levels.get(l).map_or(0.0, |s| s.hole_mass)
    }

    /// Mass of untracked pieces, in base units.
    pub fn tail_mass(&self) -> f64 {
        self.tail_mass
    }

    /// Tail mass in interval units.
    pub fn tail_mass_interval(&self) -> f64 {
        self.forest
            .nodes
            .iter()
            .map(|n| {
                let resolved: f64 = n
                    .pieces
                    .iter()
                    .filter(|p| p.fate != PieceFate::Truncated)
                    .map(|p| p.mass)
                    .sum();
                (n.mass - resolved).max(0.0) * self.bases[n.root].interval.len()
            })
            .sum()
    }

    pub fn hole_bound(&self) -> &HoleBoundCheck {
        &self.hole_bound
    }

    pub fn return_derivatives(&self) -> &[ReturnDerivative] {
        &self.returns
    }

    pub fn incoming(&self, base: usize) -> &[CellId] {
        &self.incoming[base]
    }

    pub fn piece(&self, c: CellId) -> &Piece {
        &self.forest.nodes[c.node].pieces[c.piece]
    }

    /// All cells in construction order.
    pub fn cells(&self) -> impl Iterator<Item = (CellId, &Node, &Piece)> {
        self.forest.nodes.iter().enumerate().flat_map(|(n, node)| {
            node.pieces
                .iter()
                .enumerate()
                .map(move |(k, p)| (CellId { node: n, piece: k }, node, p))
        })
    }

    /// `dz/dy` on a node at projected point `y`.
    pub fn w(&self, node: usize, y: f64) -> f64 {
        self.forest.w(&self.system, node, y)
    }

    /// Branch used to leave a node.
    pub fn branch_of(&self, node: usize) -> &crate::maps::Branch {
        &self.system.map().branches()[self.system.q()[self.forest.nodes[node].q].branch]
    }

    /// Base coordinate `z` of the projected point `y` on a node.
    pub fn z_of(&self, node: usize, y: f64) -> f64 {
        let x = self.forest.to_root(&self.system, node, y);
        let lam = self.bases[self.forest.nodes[node].root].interval;
        (x - lam.lo) / lam.len()
    }

    /// Base-coordinate extent of a cell.
    pub fn z_interval(&self, c: CellId) -> Interval {
        let p = self.piece(c);
        Interval::new(self.z_of(c.node, p.domain.lo), self.z_of(c.node, p.domain.hi))
    }

    /// `pi(z, l) = T^l(pi_0(z))` along the cell's itinerary. Forward iteration
    /// loses about `log10(mu)` digits per level.
    pub fn project(&self, c: CellId, z: f64) -> Result<f64> {
        let zi = self.z_interval(c);
        let tol = 1e-9 * zi.len().max(1e-12);
        if z < zi.lo - tol || z > zi.hi + tol {
            return Err(Error::Domain(format!("z = {z} lies outside cell {zi}")));
        }
        let mut chain = Vec::new();
        let mut cur = Some(c.node);
        while let Some(n) = cur {
            chain.push(n);
            cur = self.forest.nodes[n].parent;
        }
        let root = *chain.last().unwrap();
        let lam = self.bases[self.forest.nodes[root].root].interval;
        let mut x = lam.lerp(z);
        for &n in chain.iter().skip(1).rev() {
            x = self.branch_of(n).value(x);
        }
        Ok(x)
    }

    /// Tower map in projected coordinates: the image cell's node (or base)
    /// and the image point. `None` when the cell escapes or is truncated.
    pub fn apply_f(&self, c: CellId, y: f64) -> Option<(usize, f64)> {
        let p = self.piece(c);
        let y1 = self.branch_of(c.node).value(y);
        match p.fate {
            PieceFate::Continue { node } => Some((node, y1)),
            PieceFate::Return { target } => Some((target, y1)),
            _ => None,
        }
    }

    /// `F'` at projected point `y` of a returning cell.
    pub fn return_derivative(&self, c: CellId, y: f64) -> Option<f64> {
        match self.piece(c).fate {
            PieceFate::Return { target } => Some(
                self.branch_of(c.node).derivative(y).abs()
                    / (self.bases[target].interval.len() * self.w(c.node, y)),
            ),
            _ => None,
        }
    }

    /// Largest `|pi(F x) - T(pi x)|` over `per_cell` interior samples of every
    /// non-truncated cell. Escaping cells are checked for landing in the hole.
    pub fn semiconjugacy_defect(&self, per_cell: usize) -> f64 {
        let hole = self.system.hole();
        let mut worst: f64 = 0.0;
        for (c, _, p) in self.cells() {
            for s in 0..per_cell {
                let y = p.domain.lerp((s as f64 + 0.5) / per_cell as f64);
                let (ty, _, _) = evaluate(self.system.map(), y).expect("projected points lie in [0, 1]");
                let defect = match p.fate {
                    PieceFate::Continue { node } => {
                        let y1 = self.branch_of(c.node).value(y);
                        let j = self.forest.nodes[node].j;
                        (y1 - ty).abs() + dist(&j, y1)
                    }
                    PieceFate::Return { target } => {
                        let y1 = self.branch_of(c.node).value(y);
                        (y1 - ty).abs() + dist(&self.bases[target].interval, y1)
                    }
                    PieceFate::Escape { hole: h } => dist(&hole.intervals()[h], ty),
                    PieceFate::Truncated => 0.0,
                };
                worst = worst.max(defect);
            }
        }
        worst
    }

    /// Serializable summary of every cell.
    pub fn dump(&self) -> TowerDump {
        let cells = self
            .cells()
            .map(|(c, node, p)| {
                let (fate, target) = match p.fate {
                    PieceFate::Continue { node } => ("continue", Some(node)),
                    PieceFate::Return { target } => ("return", Some(target)),
                    PieceFate::Escape { hole } => ("escape", Some(hole)),
                    PieceFate::Truncated => ("truncated", None),
                };
                let derivative = match p.fate {
                    PieceFate::Return { .. } => {
                        let r = self.returns.iter().find(|r| r.cell == c).unwrap();
                        Some([r.min, r.max])
                    }
                    _ => None,
                };
                CellDump {
                    base: node.root,
                    level: node.level,
                    node: c.node,
                    index: c.piece,
                    projection: [p.domain.lo, p.domain.hi],
                    z: {
                        let z = self.z_interval(c);
                        [z.lo, z.hi]
                    },
                    mass: p.mass,
                    fate,
                    target,
                    derivative,
                }
            })
            .collect();
        TowerDump {
            delta: self.delta,
            n_bases: self.n_bases(),
            bases: self.bases.iter().map(|b| [b.interval.lo, b.interval.hi]).collect(),
            l_max: self.l_max,
            tail_mass: self.tail_mass,
            hole_bound: self.hole_bound,
            levels: self.levels.clone(),
            cells,
        }
    }
}

fn dist(iv: &Interval, y: f64) -> f64 {
    if y < iv.lo - EPS_GEO {
        iv.lo - y
    } else if y > iv.hi + EPS_GEO {
        y - iv.hi
    } else {
        0.0
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CellDump {
    pub base: usize,
    pub level: usize,
    pub node: usize,
    pub index: usize,
    pub projection: [f64; 2],
    pub z: [f64; 2],
    pub mass: f64,
    pub fate: &'static str,
    pub target: Option<usize>,
    pub derivative: Option<[f64; 2]>,
}

#[derive(Clone, Debug, Serialize)]
pub struct TowerDump {
    pub delta: f64,
    pub n_bases: usize,
    pub bases: Vec<[f64; 2]>,
    pub l_max: usize,
    pub tail_mass: f64,
    pub hole_bound: HoleBoundCheck,
    pub levels: Vec<LevelStats>,
    pub cells: Vec<CellDump>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maps::{build_open_system, Hole};
    use crate::presets;

    fn markov() -> Tower {
        let s = build_open_system(presets::tripling(), presets::markov_hole()).unwrap();
        build_tower(&s, choose_delta(&s).unwrap(), 60).unwrap()
    }

    #[test]
    fn delta_rules() {
        let s = build_open_system(presets::tripling(), presets::markov_hole()).unwrap();
        assert_eq!(choose_delta(&s).unwrap(), s.d());
        let p = build_open_system(presets::perturbed_tripling(), presets::small_hole()).unwrap();
        assert_eq!(choose_delta(&p).unwrap(), p.d());
        let half = crate::maps::PiecewiseExpandingMap::mod_one(
            crate::maps::Form::Affine { intercept: 0.0, slope: 3.0 },
            0.5,
            0.0,
            3.0,
        )
        .unwrap();
        let h = build_open_system(half, presets::markov_hole()).unwrap();
        assert_eq!(choose_delta(&h).unwrap(), h.d());
    }

    #[test]
    fn delta_shrinks_for_strong_nonlinearity() {
        let lift = crate::maps::Form::AffineSine {
            intercept: 0.0,
            slope: 3.0,
            amplitude: 0.1,
            frequency: 1.0,
            phase: 0.0,
        };
        let m = crate::maps::PiecewiseExpandingMap::mod_one(lift, 0.5, 3.948, 2.3716).unwrap();
        let s = build_open_system(m, Hole::empty()).unwrap();
        let delta = choose_delta(&s).unwrap();
        let c = distortion_constant(s.map()) * (2.0 * delta).powf(0.5);
        let lhs = 2f64.powf(0.5) * (1.0 + c) / 2.3716f64.powf(0.5);
        assert!(delta < s.d());
        assert!(lhs < 0.99 && lhs > 0.99 - 1e-9, "{lhs}");
    }

    #[test]
    fn bases_split_evenly() {
        let s = build_open_system(presets::tripling(), presets::markov_hole()).unwrap();
        let b = build_bases(&s, 1.0 / 3.0).unwrap();
        assert_eq!(b.len(), 2);
        assert_eq!(b[0].interval.lo, 0.0);
        assert!((b[1].interval.lo - 2.0 / 3.0).abs() < 1e-15);

        let h = Hole::new(vec![Interval::new(0.5, 0.6)]).unwrap();
        let m = build_open_system(presets::tripling(), h).unwrap();
        // Lengths 1/3, 1/6, 1/15, 1/3 with delta = 0.06 split into 3, 2, 1, 3.
        let b = build_bases(&m, 0.06).unwrap();
        assert_eq!(b.len(), 9);
        for base in &b {
            assert!(base.interval.len() >= 0.06 && base.interval.len() <= 0.12 + 1e-15);
        }
        assert!(build_bases(&m, 0.2).is_err());
    }

    #[test]
    fn equal_split_examples() {
        let h = Hole::new(vec![Interval::new(0.5, 1.0)]).unwrap();
        let map = presets::tripling();
        let s = build_open_system(map, h).unwrap();
        // Q = [0,1/3], [1/3,1/2]; with delta = 0.1 lengths 1/3 -> 2 pieces.
        let b = build_bases(&s, 0.1).unwrap();
        assert!((b[0].interval.len() - 1.0 / 6.0).abs() < 1e-15);
        assert_eq!(b.len(), 3);
    }

    #[test]
    fn markov_tower() {
        let t = markov();
        assert_eq!(t.n_bases(), 2);
        assert_eq!(t.levels().len(), 2);
        assert!((t.level_mass(0) - 2.0).abs() < 1e-15);
        assert_eq!(t.level_mass(1), 0.0);
        assert!((t.hole_mass(1) - 2.0 / 3.0).abs() < 1e-15);
        assert!(t.tail_mass() < 1e-15);
        for r in t.return_derivatives() {
            assert!((r.min - 3.0).abs() < 1e-12 && (r.max - 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn closed_tower_single_level() {
        let s = build_open_system(presets::tripling(), Hole::empty()).unwrap();
        let t = build_tower(&s, choose_delta(&s).unwrap(), 60).unwrap();
        assert_eq!(t.n_bases(), 3);
        assert_eq!(t.levels().len(), 1);
        assert!(t.cells().all(|(_, _, p)| matches!(p.fate, PieceFate::Return { .. })));
    }

    #[test]
    fn projection_examples() {
        let t = markov();
        let base0 = t.cells().find(|(_, n, _)| n.root == 0 && n.level == 0).unwrap().0;
        assert!((t.project(base0, 0.05).unwrap() - 0.05 / 3.0).abs() < 1e-15);
        // z = 0.5 on base 1 lies in the escaping cell; project the base itself.
        let b1 = t.cells().find(|(_, n, p)| n.root == 1 && p.domain.lo <= 0.75 && p.domain.hi >= 0.75);
        let c = b1.unwrap().0;
        assert!((t.project(c, 0.25).unwrap() - 0.75).abs() < 1e-15);
        let mid = t.cells().find(|(_, n, p)| n.root == 0 && p.domain.lo <= 1.0 / 6.0 && p.domain.hi >= 1.0 / 6.0);
        assert!((t.project(mid.unwrap().0, 0.5).unwrap() - 1.0 / 6.0).abs() < 1e-15);
        assert!(t.project(base0, 0.9).is_err());
    }

    #[test]
    fn offset_tower_levels_and_tail() {
        let s = build_open_system(presets::tripling(), presets::offset_hole()).unwrap();
        let delta = choose_delta(&s).unwrap();
        let t = build_tower(&s, delta, 40).unwrap();
        let n = t.n_bases() as f64;
        let theta: f64 = 2.0 / 3.0;
        for l in 0..t.levels().len() {
            let hat = t.level_mass(l) + t.hole_mass(l);
            assert!(hat <= n / delta * theta.powi(l as i32), "level {l}: {hat}");
        }
        assert!(t.tail_mass() <= n * s.d_len() / delta * theta.powi(40));
        assert!(t.tail_mass_interval() < 1e-9 * s.survivor_len());
    }

    #[test]
    fn node_counts_bounded_by_powers_of_two() {
        let s = build_open_system(presets::tripling(), presets::offset_hole()).unwrap();
        let t = build_tower(&s, choose_delta(&s).unwrap(), 30).unwrap();
        for base in 0..t.n_bases() {
            for l in 0..=t.l_max() {
                let count = t.nodes().iter().filter(|n| n.root == base && n.level == l).count();
                assert!(count <= 1 << l.min(62), "base {base} level {l}: {count}");
            }
        }
    }

    #[test]
    fn semiconjugacy_on_corpus() {
        for (name, map, hole) in presets::corpus() {
            let s = build_open_system(map, hole).unwrap();
            let t = build_tower(&s, choose_delta(&s).unwrap(), 60).unwrap();
            let d = t.semiconjugacy_defect(50);
            assert!(d <= 1e-9, "{name}: {d}");
        }
    }

    #[test]
    fn return_derivative_lower_bound_and_distortion() {
        let s = build_open_system(presets::perturbed_tripling(), presets::small_hole()).unwrap();
        let delta = choose_delta(&s).unwrap();
        let t = build_tower(&s, delta, 60).unwrap();
        let mu = s.map().mu();
        let c = distortion_constant(s.map()) * 2.0 * delta;
        for r in t.return_derivatives() {
            assert!(r.min >= mu.powi(r.level as i32 + 1) / 2.0 * (1.0 - 1e-9));
            let p = t.piece(r.cell);
            let lam = match p.fate {
                PieceFate::Return { target } => t.bases()[target].interval.len(),
                _ => unreachable!(),
            };
            let ys = [p.domain.lo, p.domain.mid(), p.domain.hi];
            for &a in &ys {
                for &b in &ys {
                    let fa = t.return_derivative(r.cell, a).unwrap();
                    let fb = t.return_derivative(r.cell, b).unwrap();
                    let gap = (t.branch_of(r.cell.node).value(a) - t.branch_of(r.cell.node).value(b)).abs() / lam;
                    assert!((fa / fb - 1.0).abs() <= c * gap + 1e-9);
                }
            }
        }
    }

    #[test]
    fn dump_is_json() {
        let t = markov();
        let json = serde_json::to_string(&t.dump()).unwrap();
        assert!(json.contains("\"fate\":\"escape\""));
    }
}
