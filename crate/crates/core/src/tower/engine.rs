//! Level-by-level refinement shared by the growth partition and the tower.
//!
//! Every live piece is stored as a node carrying its projection `J = T^l(omega)`
//! at its level. One step maps `J` by the branch of its `Q` element and splits
//! the image into returns (full `I_j`, subdivided into targets), hole pieces,
//! and at most two partial pieces which become the nodes of the next level.
//! Only one-step branch inverses are ever needed, so deep levels stay exact
//! to rounding.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::interval::{Interval, EPS_GEO};
use crate::maps::OpenSystem;

/// 5-point Gauss-Legendre nodes and weights on `[-1, 1]`.
const GAUSS: [(f64, f64); 5] = [
    (0.0, 0.568_888_888_888_888_9),
    (-0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
    (0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
    (-0.906_179_845_938_664, 0.236_926_885_056_189_1),
    (0.906_179_845_938_664, 0.236_926_885_056_189_1),
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PieceFate {
    /// Still growing; the piece is the preimage of the given next-level node.
    Continue { node: usize },
    /// Image is exactly the target interval.
    Return { target: usize },
    /// Image lies in the given hole component.
    Escape { hole: usize },
    /// Level cap reached before a fate was assigned.
    Truncated,
}

/// A fate-refined piece of a node. `domain` lies in the node's projection.
#[derive(Clone, Debug, Serialize)]
pub struct Piece {
    pub domain: Interval,
    pub image: Interval,
    pub fate: PieceFate,
    /// Measure in units of the root (`z`) coordinate.
    pub mass: f64,
}

/// An element of `Omega_l` above one root.
#[derive(Clone, Debug, Serialize)]
pub struct Node {
    pub level: usize,
    pub root: usize,
    pub parent: Option<usize>,
    /// `Q` element containing the projection.
    pub q: usize,
    /// Projection `T^l(omega)`.
    pub j: Interval,
    pub mass: f64,
    /// `dz/dy` when it is constant on the node (piecewise affine maps).
    pub w_const: Option<f64>,
    pub pieces: Vec<Piece>,
}

#[derive(Clone, Copy, Debug)]
pub struct Target {
    pub id: usize,
    pub interval: Interval,
}

#[derive(Clone, Copy, Debug)]
pub struct EngineLimits {
    /// First level at which remaining nodes may be truncated.
    pub l_max: usize,
    /// Hard cap on the depth.
    pub l_cap: usize,
    /// Keep extending past `l_max` while the live mass, in interval units,
    /// is at least this.
    pub tail_tol: f64,
    pub max_nodes: usize,
}

#[derive(Clone, Debug)]
pub struct Forest {
    pub roots: Vec<Interval>,
    pub nodes: Vec<Node>,
    /// Deepest level present; nodes there are truncated unless resolved.
    pub depth: usize,
}

impl Forest {
    /// `dz/dy` on `node` at projected point `y`.
    pub fn w(&self, system: &OpenSystem, node: usize, y: f64) -> f64 {
        let n = &self.nodes[node];
        if let Some(c) = n.w_const {
            return c;
        }
        let (mut cur, mut y, mut scale) = (node, y, 1.0);
        while let Some(p) = self.nodes[cur].parent {
            let b = &system.map().branches()[system.q()[self.nodes[p].q].branch];
            let x = b.inverse(y);
            scale /= b.derivative(x).abs();
            y = x;
            cur = p;
        }
        scale / self.roots[self.nodes[cur].root].len()
    }

    /// Pulls a projected point back to the root's coordinate on `[0, 1]`.
    pub fn to_root(&self, system: &OpenSystem, node: usize, mut y: f64) -> f64 {
        let mut cur = node;
        while let Some(p) = self.nodes[cur].parent {
            let b = &system.map().branches()[system.q()[self.nodes[p].q].branch];
            y = self.nodes[p].j.clamp(b.inverse(y));
            cur = p;
        }
        y
    }

    /// Integral of `w` over a subinterval of the node's projection.
    pub fn mass_of(&self, system: &OpenSystem, node: usize, dom: &Interval) -> f64 {
        if let Some(c) = self.nodes[node].w_const {
            return c * dom.len();
        }
        let h = 0.5 * dom.len();
        let m = dom.mid();
        GAUSS
            .iter()
            .map(|(t, wt)| wt * self.w(system, node, m + h * t))
            .sum::<f64>()
            * h
    }
}

/// Refines `roots` level by level. `targets[q]` lists the return targets
/// inside `Q` element `q`; a fully covered `I_q` is split along them.
pub fn grow(
    system: &OpenSystem,
    roots: &[(Interval, usize)],
    targets: &[Vec<Target>],
    limits: &EngineLimits,
) -> Result<Forest> {
    let affine = system.map().is_piecewise_affine();
    let mut forest = Forest {
        roots: roots.iter().map(|r| r.0).collect(),
        nodes: roots
            .iter()
            .enumerate()
            .map(|(i, (iv, q))| Node {
                level: 0,
                root: i,
                parent: None,
                q: *q,
                j: *iv,
                mass: 1.0,
                w_const: affine.then(|| 1.0 / iv.len()),
                pieces: Vec::new(),
            })
            .collect(),
        depth: 0,
    };
    let mut start = 0;
    let mut level = 0;
    let mut limit = limits.l_max;
    loop {
        let end = forest.nodes.len();
        if start == end {
            break;
        }
        forest.depth = level;
        if level >= limit {
            let live: f64 = forest.nodes[start..end]
                .iter()
                .map(|n| n.mass * forest.roots[n.root].len())
                .sum();
            if live >= limits.tail_tol && limit < limits.l_cap {
                limit += 1;
            } else {
                for n in &mut forest.nodes[start..end] {
                    n.pieces = vec![Piece {
                        domain: n.j,
                        image: n.j,
                        fate: PieceFate::Truncated,
                        mass: n.mass,
                    }];
                }
                break;
            }
        }
        for idx in start..end {
            expand(system, &mut forest, idx, targets);
        }
        if forest.nodes.len() > limits.max_nodes {
            return Err(Error::Construction(format!(
                "more than {} tower nodes by level {}; raise max_nodes or lower l_max",
                limits.max_nodes,
                level + 1
            )));
        }
        start = end;
        level += 1;
    }
    Ok(forest)
}

fn expand(system: &OpenSystem, forest: &mut Forest, idx: usize, targets: &[Vec<Target>]) {
    let node = &forest.nodes[idx];
    let b = &system.map().branches()[system.q()[node.q].branch];
    let image = b.image_of(&node.j);
    let (inside, holes) = system.split(&image);

    // (image, fate); children are numbered after sorting.
    let mut specs: Vec<(Interval, Option<usize>, PieceFate)> = Vec::new();
    for (qi, p) in inside {
        let iq = system.q()[qi].interval;
        if p.lo <= iq.lo + EPS_GEO && p.hi >= iq.hi - EPS_GEO {
            for t in &targets[qi] {
                specs.push((t.interval, None, PieceFate::Return { target: t.id }));
            }
        } else {
            specs.push((p, Some(qi), PieceFate::Truncated));
        }
    }
    for (hi, p) in holes {
        specs.push((p, None, PieceFate::Escape { hole: hi }));
    }
    let j = node.j;
    let mut pieces: Vec<(Piece, Option<usize>)> = specs
        .into_iter()
        .map(|(img, q, fate)| {
            let pre = b.preimage_of(&img);
            let domain = Interval::new(j.clamp(pre.lo), j.clamp(pre.hi));
            let mass = forest.mass_of(system, idx, &domain);
            (
                Piece {
                    domain,
                    image: img,
                    fate,
                    mass,
                },
                q,
            )
        })
        .collect();
    pieces.sort_by(|a, b| a.0.domain.lo.total_cmp(&b.0.domain.lo));

    let (level, root, w_parent) = (node.level, node.root, node.w_const);
    let slope = b.derivative(j.mid()).abs();
    let mut out = Vec::with_capacity(pieces.len());
    for (mut piece, q) in pieces {
        if let Some(q) = q {
            let child = forest.nodes.len();
            forest.nodes.push(Node {
                level: level + 1,
                root,
                parent: Some(idx),
                q,
                j: piece.image,
                mass: piece.mass,
                w_const: w_parent.map(|w| w / slope),
                pieces: Vec::new(),
            });
            piece.fate = PieceFate::Continue { node: child };
        }
        out.push(piece);
    }
    forest.nodes[idx].pieces = out;
}
