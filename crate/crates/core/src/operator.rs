//! Perron-Frobenius operator on the tower and its normalized fixed point.
//!
//! Densities are taken with respect to the tower measure `m` (base units) and
//! sampled at `g` uniform points of each node's projection. Upstairs the
//! operator is a shift; on the bases it sums returning cells weighted by
//! `1 / |F'|`. Both are linear interpolation stencils, precomputed once as a
//! sparse matrix.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::interval::Interval;
use crate::tower::{PieceFate, Tower};

pub const DEFAULT_SAMPLES: usize = 16;

/// Node-major sample values: node `n` owns `values[n * g..(n + 1) * g]`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TowerDensity {
    g: usize,
    values: Vec<f64>,
}

impl TowerDensity {
    pub fn zeros(n_nodes: usize, g: usize) -> Self {
        Self {
            g,
            values: vec![0.0; n_nodes * g],
        }
    }

    pub fn samples_per_node(&self) -> usize {
        self.g
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn node(&self, n: usize) -> &[f64] {
        &self.values[n * self.g..(n + 1) * self.g]
    }

    pub fn scale(&self, c: f64) -> Self {
        Self {
            g: self.g,
            values: self.values.iter().map(|v| v * c).collect(),
        }
    }

    /// `a self + b other`.
    pub fn combine(&self, a: f64, other: &Self, b: f64) -> Self {
        Self {
            g: self.g,
            values: self.values.iter().zip(&other.values).map(|(x, y)| a * x + b * y).collect(),
        }
    }

    pub fn is_nonnegative(&self) -> bool {
        self.values.iter().all(|v| *v >= 0.0)
    }
}

/// Weighted sup norm, the seminorm, and their max.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Norms {
    pub sup: f64,
    pub r: f64,
    pub total: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct FixedPointResult {
    pub phi: TowerDensity,
    /// `|P phi|_1`.
    pub lambda: f64,
    pub iterations: usize,
    /// `|P_1 phi - phi|_1` at the last step.
    pub residual: f64,
    pub converged: bool,
    /// Successive mass ratios `|P^{n+1} f|_1 / |P^n f|_1`.
    pub mass_ratios: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct TransferOperator<'a> {
    tower: &'a Tower,
    g: usize,
    /// Sample abscissae (projected coordinate), node-major.
    ys: Vec<f64>,
    /// `dz/dy` at the samples.
    ws: Vec<f64>,
    /// Trapezoid weights: `int f dm ~ sum c_s f_s`.
    weights: Vec<f64>,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl<'a> TransferOperator<'a> {
    /// Discretizes `P` with `g >= 2` samples per node.
    pub fn new(tower: &'a Tower, g: usize) -> Result<Self> {
        if g < 2 {
            return Err(Error::Domain(format!("need at least 2 samples per node, got {g}")));
        }
        let nodes = tower.nodes();
        let n = nodes.len();
        let mut ys = Vec::with_capacity(n * g);
        let mut ws = Vec::with_capacity(n * g);
        let mut weights = Vec::with_capacity(n * g);
        for (k, node) in nodes.iter().enumerate() {
            let h = node.j.len() / (g - 1) as f64;
            for s in 0..g {
                let y = sample_y(&node.j, g, s);
                let w = tower.w(k, y);
                let c = if s == 0 || s + 1 == g { 0.5 * h } else { h };
                ys.push(y);
                ws.push(w);
                weights.push(c * w);
            }
        }

        // Base node of each base index.
        let mut base_node = vec![usize::MAX; tower.n_bases()];
        for (k, node) in nodes.iter().enumerate() {
            if node.level == 0 {
                base_node[node.root] = k;
            }
        }
        if base_node.contains(&usize::MAX) {
            return Err(Error::Construction("a base has no level-0 node".into()));
        }
        let mut base_of_node = vec![None; n];
        for (b, &k) in base_node.iter().enumerate() {
            base_of_node[k] = Some(b);
        }

        let rows: Vec<Vec<(usize, f64)>> = (0..n * g)
            .into_par_iter()
            .map(|r| {
                let (k, s) = (r / g, r % g);
                let y1 = ys[k * g + s];
                let mut row = Vec::new();
                match (nodes[k].parent, base_of_node[k]) {
                    (Some(p), _) => {
                        let b = tower.branch_of(p);
                        let dom = nodes[p]
                            .pieces
                            .iter()
                            .find(|pc| pc.fate == PieceFate::Continue { node: k })
                            .map_or(nodes[p].j, |pc| pc.domain);
                        let x = dom.clamp(b.inverse(y1));
                        push_stencil(&mut row, &nodes[p].j, p, g, x, 1.0);
                    }
                    (None, Some(base)) => {
                        let lam = tower.bases()[base].interval.len();
                        for c in tower.incoming(base) {
                            let b = tower.branch_of(c.node);
                            let x = tower.piece(*c).domain.clamp(b.inverse(y1));
                            let fp = b.derivative(x).abs() / (lam * tower.w(c.node, x));
                            push_stencil(&mut row, &nodes[c.node].j, c.node, g, x, 1.0 / fp);
                        }
                    }
                    (None, None) => unreachable!("level-0 nodes are bases"),
                }
                row
            })
            .collect();
        let mut row_ptr = Vec::with_capacity(n * g + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for row in rows {
            for (c, v) in row {
                cols.push(c);
                vals.push(v);
            }
            row_ptr.push(cols.len());
        }
        Ok(Self {
            tower,
            g,
            ys,
            ws,
            weights,
            row_ptr,
            cols,
            vals,
        })
    }

    pub fn tower(&self) -> &'a Tower {
        self.tower
    }

    pub fn samples_per_node(&self) -> usize {
        self.g
    }

    pub fn n_nodes(&self) -> usize {
        self.ys.len() / self.g
    }

    /// Projected coordinate of sample `s` on node `n`.
    pub fn y(&self, n: usize, s: usize) -> f64 {
        self.ys[n * self.g + s]
    }

    /// `dz/dy` at sample `s` on node `n`.
    pub fn w(&self, n: usize, s: usize) -> f64 {
        self.ws[n * self.g + s]
    }

    /// Samples `f(node, y)`.
    pub fn sample(&self, f: impl Fn(usize, f64) -> f64) -> TowerDensity {
        TowerDensity {
            g: self.g,
            values: self.ys.iter().enumerate().map(|(i, y)| f(i / self.g, *y)).collect(),
        }
    }

    /// The constant density with integral one.
    pub fn uniform(&self) -> TowerDensity {
        let total: f64 = self.weights.iter().sum();
        self.sample(|_, _| 1.0 / total)
    }

    /// `Pf`; mass that enters the hole or the truncation level is dropped.
    pub fn apply(&self, f: &TowerDensity) -> TowerDensity {
        debug_assert_eq!(f.values.len(), self.ys.len());
        let values = (0..self.ys.len())
            .into_par_iter()
            .map(|r| {
                (self.row_ptr[r]..self.row_ptr[r + 1])
                    .map(|i| self.vals[i] * f.values[self.cols[i]])
                    .sum()
            })
            .collect();
        TowerDensity { g: self.g, values }
    }

    /// `int f dm` by the trapezoid rule in a fixed order.
    pub fn integral(&self, f: &TowerDensity) -> f64 {
        self.weights.iter().zip(&f.values).map(|(c, v)| c * v).sum()
    }

    /// `int_{sub} f dm` for a subinterval of node `n`'s projection.
    pub fn integral_on(&self, n: usize, f: &TowerDensity, sub: &Interval) -> f64 {
        let g = self.g;
        let off = n * g;
        let mut acc = 0.0;
        for s in 0..g - 1 {
            let (y0, y1) = (self.ys[off + s], self.ys[off + s + 1]);
            let lo = y0.max(sub.lo);
            let hi = y1.min(sub.hi);
            if hi <= lo {
                continue;
            }
            let at = |y: f64| {
                let t = (y - y0) / (y1 - y0);
                let fv = f.values[off + s] * (1.0 - t) + f.values[off + s + 1] * t;
                let wv = self.ws[off + s] * (1.0 - t) + self.ws[off + s + 1] * t;
                fv * wv
            };
            acc += 0.5 * (hi - lo) * (at(lo) + at(hi));
        }
        acc
    }

    /// `int_{Delta \ F^-1 H~} f dm`, excluding truncated pieces.
    pub fn surviving_mass(&self, f: &TowerDensity) -> f64 {
        self.tower
            .cells()
            .filter(|(_, _, p)| matches!(p.fate, PieceFate::Continue { .. } | PieceFate::Return { .. }))
            .map(|(c, _, p)| self.integral_on(c.node, f, &p.domain))
            .sum()
    }

    /// `P_1 f = Pf / |Pf|_1`.
    pub fn normalize(&self, f: &TowerDensity) -> Result<TowerDensity> {
        let mass = self.integral(f);
        if !(mass > f64::MIN_POSITIVE) {
            return Err(Error::TotalEscape);
        }
        Ok(f.scale(1.0 / mass))
    }

    /// Iterates `P_1` from `f0` until the L1 step is at most `tol`, then once
    /// more per level: level `l` echoes the base from `l` steps earlier and
    /// carries too little mass to move the L1 step. Hitting `max_iter` is reported through `converged`, not as an error.
    pub fn fixed_point(&self, f0: &TowerDensity, tol: f64, max_iter: usize) -> Result<FixedPointResult> {
        let mut f = self.normalize(f0)?;
        let mut ratios = Vec::new();
        let mut residual = f64::INFINITY;
        let mut iterations = 0;
        let mut converged = false;
        let mut sweep = None;
        while iterations < max_iter {
            let pf = self.apply(&f);
            let lambda = self.integral(&pf);
            if !(lambda > f64::MIN_POSITIVE) {
                return Err(Error::TotalEscape);
            }
            ratios.push(lambda);
            let next = pf.scale(1.0 / lambda);
            residual = self.l1_distance(&next, &f);
            f = next;
            iterations += 1;
            if residual <= tol {
                let left = sweep.get_or_insert(self.tower.l_max() + 1);
                if *left == 0 {
                    converged = true;
                    break;
                }
                *left -= 1;
            } else {
                sweep = None;
            }
        }
        let lambda = self.integral(&self.apply(&f));
        if ratios.len() > 64 {
            ratios.drain(..ratios.len() - 64);
        }
        Ok(FixedPointResult {
            phi: f,
            lambda,
            iterations,
            residual,
            converged,
            mass_ratios: ratios,
        })
    }

    /// `int |f - h| dm`.
    pub fn l1_distance(&self, f: &TowerDensity, h: &TowerDensity) -> f64 {
        self.weights
            .iter()
            .zip(f.values.iter().zip(&h.values))
            .map(|(c, (a, b))| c * (a - b).abs())
            .sum()
    }

    /// `||f||_inf = sup e^{-xi l} |f|` and the seminorm `||f||_r`.
    ///
    /// For `alpha < 1` the seminorm is the largest
    /// `e^{-xi l} |f(x) - f(y)| / (|x - y|^alpha |f(x)|)` over sample pairs in
    /// a node; for `alpha = 1` it is `e^{-xi l} |f'| / |f|` from finite
    /// differences, divided by the smaller endpoint value. Distances are in
    /// base units.
    pub fn norms(&self, f: &TowerDensity, xi: f64, alpha: f64) -> Norms {
        let g = self.g;
        let mut sup: f64 = 0.0;
        let mut r: f64 = 0.0;
        let mut z = vec![0.0; g];
        for (n, node) in self.tower.nodes().iter().enumerate() {
            let weight = (-xi * node.level as f64).exp();
            let off = n * g;
            let v = &f.values[off..off + g];
            sup = sup.max(weight * v.iter().fold(0.0f64, |m, x| m.max(x.abs())));
            for s in 1..g {
                let dy = self.ys[off + s] - self.ys[off + s - 1];
                z[s] = z[s - 1] + 0.5 * dy * (self.ws[off + s] + self.ws[off + s - 1]);
            }
            let mut local: f64 = 0.0;
            if alpha >= 1.0 {
                for s in 1..g {
                    let dz = z[s] - z[s - 1];
                    let denom = v[s].abs().min(v[s - 1].abs());
                    let diff = (v[s] - v[s - 1]).abs();
                    if diff == 0.0 || dz <= 0.0 {
                        continue;
                    }
                    local = local.max(if denom == 0.0 { f64::INFINITY } else { diff / dz / denom });
                }
            } else {
                for s in 0..g {
                    if v[s] == 0.0 {
                        if v.iter().any(|x| *x != 0.0) {
                            local = f64::INFINITY;
                        }
                        continue;
                    }
                    for t in 0..g {
                        let dz = (z[t] - z[s]).abs();
                        if t == s || dz <= 0.0 {
                            continue;
                        }
                        local = local.max((v[t] - v[s]).abs() / (dz.powf(alpha) * v[s].abs()));
                    }
                }
            }
            r = r.max(weight * local);
        }
        Norms { sup, r, total: sup.max(r) }
    }

    /// Largest relative defect of `phi_{l+1} = phi_l o F^-1 / lambda` upstairs.
    pub fn upstairs_defect(&self, phi: &TowerDensity, lambda: f64) -> f64 {
        let pf = self.apply(phi);
        let mut worst: f64 = 0.0;
        for (n, node) in self.tower.nodes().iter().enumerate() {
            if node.parent.is_none() {
                continue;
            }
            for s in 0..self.g {
                let i = n * self.g + s;
                let expect = pf.values[i] / lambda;
                let scale = expect.abs().max(phi.values[i].abs()).max(1e-300);
                worst = worst.max((phi.values[i] - expect).abs() / scale);
            }
        }
        worst
    }
}

/// Abscissa of sample `s` of `g` on a node projection `j`.
pub fn sample_y(j: &Interval, g: usize, s: usize) -> f64 {
    if s + 1 == g {
        j.hi
    } else {
        j.lerp(s as f64 / (g - 1) as f64)
    }
}

/// Appends the linear-interpolation stencil of the node grid on `j` at `x`.
fn push_stencil(row: &mut Vec<(usize, f64)>, j: &Interval, node: usize, g: usize, x: f64, weight: f64) {
    let t = ((x - j.lo) / j.len() * (g - 1) as f64).clamp(0.0, (g - 1) as f64);
    let i = (t.floor() as usize).min(g - 2);
    let frac = t - i as f64;
    row.push((node * g + i, weight * (1.0 - frac)));
    row.push((node * g + i + 1, weight * frac));
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maps::{build_open_system, Hole, OpenSystem};
    use crate::presets;
    use crate::tower::{build_tower, choose_delta};

    fn tower(system: &OpenSystem) -> Tower {
        build_tower(system, choose_delta(system).unwrap(), 60).unwrap()
    }

    #[test]
    fn markov_apply_and_normalize() {
        let s = build_open_system(presets::tripling(), presets::markov_hole()).unwrap();
        let t = tower(&s);
        let op = TransferOperator::new(&t, 16).unwrap();
        let one = op.sample(|_, _| 1.0);
        let p = op.apply(&one);
        assert!(p.values().iter().all(|v| (v - 2.0 / 3.0).abs() < 1e-14));
        assert!((op.integral(&p) - 4.0 / 3.0).abs() < 1e-14);
        let n = op.normalize(&p).unwrap();
        assert!(n.values().iter().all(|v| (v - 0.5).abs() < 1e-14));
        let zero = op.sample(|_, _| 0.0);
        assert!(op.apply(&zero).values().iter().all(|v| *v == 0.0));
        assert!(matches!(op.normalize(&zero), Err(Error::TotalEscape)));
    }

    #[test]
    fn normalize_is_scale_invariant() {
        let s = build_open_system(presets::tripling(), presets::small_hole()).unwrap();
        let t = tower(&s);
        let op = TransferOperator::new(&t, 16).unwrap();
        let u = op.uniform();
        assert!((op.integral(&u) - 1.0).abs() < 1e-14);
        let a = op.normalize(&u.scale(7.0)).unwrap();
        for (x, y) in a.values().iter().zip(u.values()) {
            assert!((x - y).abs() < 1e-12 * y);
        }
    }

    #[test]
    fn markov_fixed_point() {
        let s = build_open_system(presets::tripling(), presets::markov_hole()).unwrap();
        let t = tower(&s);
        let op = TransferOperator::new(&t, 16).unwrap();
        let fp = op.fixed_point(&op.uniform(), 1e-10, 1000).unwrap();
        assert!(fp.converged);
        assert!((fp.lambda - 2.0 / 3.0).abs() < 1e-9);
        assert!(fp.phi.values().iter().all(|v| (v - 0.5).abs() < 1e-9));
    }

    #[test]
    fn closed_fixed_point() {
        let s = build_open_system(presets::tripling(), Hole::empty()).unwrap();
        let t = tower(&s);
        let op = TransferOperator::new(&t, 16).unwrap();
        let one = op.sample(|_, _| 1.0);
        assert!(op.apply(&one).values().iter().all(|v| (v - 1.0).abs() < 1e-14));
        let fp = op.fixed_point(&op.uniform(), 1e-12, 10).unwrap();
        assert!((fp.lambda - 1.0).abs() < 1e-12);
        assert!(fp.iterations <= 2);
    }

    #[test]
    fn norm_examples() {
        let s = build_open_system(presets::tripling(), presets::markov_hole()).unwrap();
        let t = tower(&s);
        let op = TransferOperator::new(&t, 16).unwrap();
        let one = op.sample(|_, _| 1.0);
        let n = op.norms(&one, 0.2, 1.0);
        assert_eq!((n.sup, n.r), (1.0, 0.0));
        // f = 1 + z on a base, z the base coordinate.
        let lin = op.sample(|k, y| 1.0 + t.z_of(k, y));
        let n = op.norms(&lin, 0.3, 1.0);
        assert!((n.r - 1.0).abs() < 1e-9, "{}", n.r);
        assert_eq!(n.total, n.sup.max(n.r));
    }

    #[test]
    fn level_weight_cancels() {
        let s = build_open_system(presets::tripling(), presets::small_hole()).unwrap();
        let t = tower(&s);
        let op = TransferOperator::new(&t, 16).unwrap();
        let xi = 0.2;
        let f = op.sample(|k, _| (xi * t.nodes()[k].level as f64).exp());
        assert!((op.norms(&f, xi, 1.0).sup - 1.0).abs() < 1e-12);
    }

    #[test]
    fn mass_accounting() {
        for (name, map, hole) in presets::corpus() {
            let s = build_open_system(map, hole).unwrap();
            let t = tower(&s);
            let op = TransferOperator::new(&t, 16).unwrap();
            let f = op.sample(|k, y| 1.0 + 0.5 * (7.0 * y + k as f64).sin());
            let lhs = op.integral(&op.apply(&f));
            let rhs = op.surviving_mass(&f);
            assert!((lhs - rhs).abs() < 2e-3 * rhs, "{name}: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn small_hole_fixed_point_uniqueness() {
        let s = build_open_system(presets::tripling(), presets::small_hole()).unwrap();
        let t = tower(&s);
        let op = TransferOperator::new(&t, 16).unwrap();
        let a = op.fixed_point(&op.uniform(), 1e-12, 100_000).unwrap();
        let f0 = op.sample(|_, y| 1.0 + 0.9 * (13.0 * y).sin());
        let b = op.fixed_point(&f0, 1e-12, 100_000).unwrap();
        assert!(a.converged && b.converged);
        assert!((a.lambda - b.lambda).abs() < 1e-8);
        assert!(a.lambda < 1.0 && a.lambda > 0.99);
        assert!(op.upstairs_defect(&a.phi, a.lambda) < 1e-8);
        let last = *a.mass_ratios.last().unwrap();
        assert!((last - a.lambda).abs() < 1e-10);
    }
}
