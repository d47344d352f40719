//! Interval-level results: the projected density, the eigenvalue, density
//! bounds, and the Lipschitz and hole-shrinking studies.

use rayon::prelude::*;
use serde::Serialize;

use crate::checker::{
    check_hypotheses, check_mixing, check_transitivity, compute_constants, covering_time, ConstantsReport, CoverMode,
    HypothesisReport, Transitivity,
};
use crate::error::{Error, Result};
use crate::interval::Interval;
use crate::maps::{build_open_system, distortion_constant, Hole, OpenSystem, PiecewiseExpandingMap};
use crate::operator::{FixedPointResult, TransferOperator, DEFAULT_SAMPLES};
use crate::tower::{build_tower_with, choose_delta, Tower, TowerOptions};

/// Default output grid.
pub const DEFAULT_GRID: usize = 4096;

const BUCKETS: usize = 4096;

/// One linear piece of a cell's contribution `phi / pi'` to the density.
#[derive(Clone, Copy, Debug)]
struct Segment {
    lo: f64,
    hi: f64,
    a: f64,
    b: f64,
}

impl Segment {
    fn at(&self, x: f64) -> f64 {
        let t = (x - self.lo) / (self.hi - self.lo);
        self.a + (self.b - self.a) * t
    }

    /// Integral over `[lo, hi] n [x0, x1]`.
    fn integral(&self, x0: f64, x1: f64) -> f64 {
        let lo = x0.max(self.lo);
        let hi = x1.min(self.hi);
        if hi <= lo {
            return 0.0;
        }
        0.5 * (hi - lo) * (self.at(lo) + self.at(hi))
    }

    /// Integral of `x^k` times the segment over its support; Simpson's rule is
    /// exact up to cubics.
    fn moment(&self, k: i32) -> f64 {
        let m = 0.5 * (self.lo + self.hi);
        let f = |x: f64| x.powi(k) * self.at(x);
        (self.hi - self.lo) / 6.0 * (f(self.lo) + 4.0 * f(m) + f(self.hi))
    }
}

/// The interval density `psi(x) = sum phi(pi^-1 x) / pi'(pi^-1 x)` of the
/// projected measure, piecewise linear between node samples.
#[derive(Clone, Debug)]
pub struct ProjectedDensity {
    segs: Vec<Segment>,
    /// Segments meeting each bucket of `[0, 1]`.
    buckets: Vec<Vec<u32>>,
    /// Exact mass of each bucket, then prefix sums.
    prefix: Vec<f64>,
    survivors: Vec<Interval>,
}

impl ProjectedDensity {
    pub fn new(op: &TransferOperator, phi: &crate::operator::TowerDensity) -> Self {
        let g = op.samples_per_node();
        let mut segs = Vec::with_capacity(op.n_nodes() * (g - 1));
        for n in 0..op.n_nodes() {
            let v = phi.node(n);
            for s in 0..g - 1 {
                let (lo, hi) = (op.y(n, s), op.y(n, s + 1));
                if hi > lo {
                    segs.push(Segment {
                        lo,
                        hi,
                        a: v[s] * op.w(n, s),
                        b: v[s + 1] * op.w(n, s + 1),
                    });
                }
            }
        }
        let total: f64 = segs.iter().map(|s| s.integral(s.lo, s.hi)).sum();
        if total > 0.0 {
            for s in &mut segs {
                s.a /= total;
                s.b /= total;
            }
        }
        let mut buckets = vec![Vec::new(); BUCKETS];
        let mut mass = vec![0.0; BUCKETS];
        let width = 1.0 / BUCKETS as f64;
        for (i, s) in segs.iter().enumerate() {
            let (b0, b1) = bucket_range(s.lo, s.hi);
            for b in b0..=b1 {
                buckets[b].push(i as u32);
                mass[b] += s.integral(b as f64 * width, (b + 1) as f64 * width);
            }
        }
        let mut prefix = Vec::with_capacity(BUCKETS + 1);
        let mut acc = 0.0;
        prefix.push(0.0);
        for m in mass {
            acc += m;
            prefix.push(acc);
        }
        Self {
            segs,
            buckets,
            prefix,
            survivors: op.tower().system().survivors().to_vec(),
        }
    }

    /// `psi(x)`, taking right limits at breakpoints.
    pub fn value(&self, x: f64) -> f64 {
        self.one_sided(x, true)
    }

    fn one_sided(&self, x: f64, right: bool) -> f64 {
        // A left limit on a bucket edge belongs to the bucket below.
        let b = if right {
            bucket_of(x)
        } else {
            (((x * BUCKETS as f64).ceil() as usize).max(1) - 1).min(BUCKETS - 1)
        };
        self.buckets[b]
            .iter()
            .map(|&i| &self.segs[i as usize])
            .filter(|s| if right { s.lo <= x && x < s.hi } else { s.lo < x && x <= s.hi })
            .map(|s| s.at(x))
            .sum()
    }

    /// `nu([a, b])`.
    pub fn mass(&self, iv: &Interval) -> f64 {
        let (a, b) = (iv.lo.max(0.0), iv.hi.min(1.0));
        if b <= a {
            return 0.0;
        }
        let (ba, bb) = (bucket_of(a), bucket_of(b));
        let width = 1.0 / BUCKETS as f64;
        let partial = |k: usize, x0: f64, x1: f64| -> f64 {
            self.buckets[k]
                .iter()
                .map(|&i| self.segs[i as usize].integral(x0, x1))
                .sum()
        };
        if ba == bb {
            return partial(ba, a, b);
        }
        partial(ba, a, (ba + 1) as f64 * width)
            + (self.prefix[bb] - self.prefix[ba + 1])
            + partial(bb, bb as f64 * width, b)
    }

    /// `int psi`.
    pub fn integral(&self) -> f64 {
        self.prefix[BUCKETS]
    }

    /// `int x^k psi(x) dx`.
    pub fn moment(&self, k: i32) -> f64 {
        self.segs.iter().map(|s| s.moment(k)).sum()
    }

    /// Masses of `n` equal bins of `[0, 1]`.
    pub fn binned(&self, n: usize) -> Vec<f64> {
        let mut out = vec![0.0; n];
        let width = 1.0 / n as f64;
        for s in &self.segs {
            let b0 = ((s.lo * n as f64).floor() as usize).min(n - 1);
            let b1 = ((s.hi * n as f64).ceil() as usize).clamp(b0 + 1, n);
            for (b, slot) in out.iter_mut().enumerate().take(b1).skip(b0) {
                *slot += s.integral(b as f64 * width, (b + 1) as f64 * width);
            }
        }
        out
    }

    /// Bin densities `nu(B) / m(B n I)`, zero on bins inside the hole.
    pub fn binned_density(&self, n: usize) -> Vec<f64> {
        let width = 1.0 / n as f64;
        self.binned(n)
            .into_iter()
            .enumerate()
            .map(|(b, m)| {
                let bin = Interval::new(b as f64 * width, (b + 1) as f64 * width);
                let len: f64 = self.survivors.iter().map(|s| s.overlap_len(&bin)).sum();
                if len > 0.0 {
                    m / len
                } else {
                    0.0
                }
            })
            .collect()
    }

    fn breakpoints(&self) -> Vec<f64> {
        let mut xs: Vec<f64> = self.segs.iter().flat_map(|s| [s.lo, s.hi]).collect();
        for s in &self.survivors {
            xs.push(s.lo);
            xs.push(s.hi);
        }
        xs.sort_by(f64::total_cmp);
        xs.dedup();
        xs
    }

    /// `(sup psi, inf psi)` over `I`, exact for the piecewise linear density.
    pub fn sup_inf(&self) -> (f64, f64) {
        let mut sup: f64 = 0.0;
        let mut inf = f64::INFINITY;
        // On each gap between breakpoints psi is linear, so its extremes are
        // the two one-sided limits at the ends.
        for w in self.breakpoints().windows(2) {
            let m = 0.5 * (w[0] + w[1]);
            if !self.survivors.iter().any(|s| s.lo < m && m < s.hi) {
                continue;
            }
            for v in [self.one_sided(w[0], true), self.one_sided(w[1], false)] {
                sup = sup.max(v);
                inf = inf.min(v);
            }
        }
        (sup, inf)
    }

    /// Total variation on `[0, 1]` with `psi = 0` in the hole.
    pub fn variation(&self) -> f64 {
        let xs = self.breakpoints();
        let mut var = 0.0;
        let mut prev_right: Option<f64> = None;
        for &x in &xs {
            let left = self.one_sided(x, false);
            let right = self.one_sided(x, true);
            if let Some(p) = prev_right {
                var += (left - p).abs();
            }
            if x > 0.0 && x < 1.0 {
                var += (right - left).abs();
            }
            prev_right = Some(right);
        }
        var
    }
}

fn bucket_of(x: f64) -> usize {
    ((x * BUCKETS as f64).floor().max(0.0) as usize).min(BUCKETS - 1)
}

fn bucket_range(lo: f64, hi: f64) -> (usize, usize) {
    let b0 = bucket_of(lo);
    let b1 = ((hi * BUCKETS as f64).ceil() as usize).clamp(b0 + 1, BUCKETS) - 1;
    (b0, b1)
}

/// `nu(T^-1 A n I)` for `A` inside `[0, 1]`.
pub fn preimage_mass(system: &OpenSystem, pd: &ProjectedDensity, a: &Interval) -> f64 {
    let mut acc = 0.0;
    for e in system.q() {
        let b = &system.map().branches()[e.branch];
        let img = b.image_of(&e.interval);
        for s in system.survivors() {
            let Some(t) = s.intersect(a, 0.0).and_then(|t| t.intersect(&img, 0.0)) else {
                continue;
            };
            acc += pd.mass(&e.interval.intersect(&b.preimage_of(&t), 0.0).unwrap_or(Interval::new(0.0, 0.0)));
        }
    }
    acc
}

/// `max |nu(T^-1 A) - lambda nu(A)|` over the `grid` cells `A` (restricted to `I`).
pub fn conditional_invariance_residual(system: &OpenSystem, pd: &ProjectedDensity, lambda: f64, grid: usize) -> f64 {
    (0..grid)
        .into_par_iter()
        .map(|i| {
            let a = Interval::new(i as f64 / grid as f64, (i + 1) as f64 / grid as f64);
            (preimage_mass(system, pd, &a) - lambda * pd.mass(&a)).abs()
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold(0.0, f64::max)
}

/// `int P_T psi = nu(I n T^-1 I)`.
pub fn interval_lambda(system: &OpenSystem, pd: &ProjectedDensity) -> f64 {
    preimage_mass(system, pd, &Interval::UNIT)
}

/// Samples per node: linear interpolation is exact for piecewise-affine maps,
/// so those get [`DEFAULT_SAMPLES`]; nonlinear maps get four times as many,
/// which brings the `O(h^2)` eigenvalue error below `1e-6`.
pub fn default_samples(map: &PiecewiseExpandingMap) -> usize {
    if map.is_piecewise_affine() {
        DEFAULT_SAMPLES
    } else {
        4 * DEFAULT_SAMPLES
    }
}

#[derive(Clone, Debug)]
pub struct SolveOptions {
    pub delta: Option<f64>,
    pub xi: Option<f64>,
    pub tower: TowerOptions,
    /// Samples per node; `None` picks [`default_samples`].
    pub samples: Option<usize>,
    pub tol: f64,
    pub max_iter: usize,
    pub grid: usize,
    pub transitivity_horizon: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            delta: None,
            xi: None,
            tower: TowerOptions::default(),
            samples: None,
            tol: 1e-10,
            max_iter: 100_000,
            grid: DEFAULT_GRID,
            transitivity_horizon: 64,
        }
    }
}

/// The interval summary of a solve.
#[derive(Clone, Debug, Serialize)]
pub struct AccimResult {
    pub lambda: f64,
    pub escape_rate: f64,
    /// `lambda` recomputed as `int P_T psi` on the interval.
    pub interval_lambda: f64,
    pub grid: usize,
    /// Bin densities on `grid` equal bins of `[0, 1]`.
    pub psi: Vec<f64>,
    pub integral: f64,
    pub sup_psi: f64,
    pub inf_psi: f64,
    /// Total variation on `[0, 1]`, reported for `alpha = 1` only.
    pub variation: Option<f64>,
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
    pub fixed_point_residual: f64,
    pub hypotheses_pass: bool,
}

/// Everything a solve produces.
#[derive(Clone, Debug)]
pub struct Solution {
    pub tower: Tower,
    pub constants: ConstantsReport,
    pub hypotheses: HypothesisReport,
    pub transitivity: Transitivity,
    pub fixed_point: FixedPointResult,
    pub density: ProjectedDensity,
    pub result: AccimResult,
}

impl Solution {
    pub fn system(&self) -> &OpenSystem {
        self.tower.system()
    }
}

/// Builds the tower, iterates to the fixed point and projects it.
pub fn solve(system: &OpenSystem, opts: &SolveOptions) -> Result<Solution> {
    let delta = match opts.delta {
        Some(d) => d,
        None => choose_delta(system)?,
    };
    let tower = build_tower_with(system, delta, &opts.tower)?;
    let constants = compute_constants(&tower, system, opts.xi);
    let hypotheses = check_hypotheses(&constants, &tower, system);
    let transitivity = check_transitivity(system, opts.transitivity_horizon);
    let op = TransferOperator::new(&tower, opts.samples.unwrap_or_else(|| default_samples(system.map())))?;
    let fixed_point = op.fixed_point(&op.uniform(), opts.tol, opts.max_iter)?;
    let density = ProjectedDensity::new(&op, &fixed_point.phi);
    drop(op);
    let (sup_psi, inf_psi) = density.sup_inf();
    let lambda = fixed_point.lambda;
    let result = AccimResult {
        lambda,
        escape_rate: -lambda.ln(),
        interval_lambda: interval_lambda(system, &density),
        grid: opts.grid,
        psi: density.binned_density(opts.grid),
        integral: density.integral(),
        sup_psi,
        inf_psi,
        variation: (system.map().alpha() == 1.0).then(|| density.variation()),
        residual: conditional_invariance_residual(system, &density, lambda, opts.grid),
        iterations: fixed_point.iterations,
        converged: fixed_point.converged,
        fixed_point_residual: fixed_point.residual,
        hypotheses_pass: hypotheses.all_pass(),
    };
    Ok(Solution {
        tower,
        constants,
        hypotheses,
        transitivity,
        fixed_point,
        density,
        result,
    })
}

/// The closed-system solve; its density is the SRB density.
pub fn srb_closed(map: &PiecewiseExpandingMap, opts: &SolveOptions) -> Result<Solution> {
    solve(&build_open_system(map.clone(), Hole::empty())?, opts)
}

/// A checked bound `value <= bound` (or `>=` for lower bounds).
#[derive(Clone, Debug, Serialize)]
pub struct BoundCheck {
    pub value: f64,
    pub bound: f64,
    pub holds: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct DensityBounds {
    pub sup: BoundCheck,
    /// `None` when no covering time was found; the reason is in `inf_note`.
    pub inf: Option<BoundCheck>,
    pub inf_note: String,
    /// `alpha = 1` only.
    pub variation: Option<BoundCheck>,
}

impl DensityBounds {
    pub fn all_hold(&self) -> bool {
        self.sup.holds && self.inf.as_ref().is_none_or(|b| b.holds) && self.variation.as_ref().is_none_or(|b| b.holds)
    }
}

/// Evaluates the upper, lower and (for `alpha = 1`) variation bounds on `psi`.
pub fn density_bounds(sol: &Solution) -> DensityBounds {
    let tower = &sol.tower;
    let system = tower.system();
    let c = &sol.constants;
    let n = tower.n_bases() as f64;
    let delta = tower.delta();
    let g = sol.fixed_point.phi.samples_per_node();
    let root_sum = 1.0 / (1.0 - (2.0 / c.mu).sqrt());
    // Base densities converted to Lebesgue units on the base.
    let mut sup_base: f64 = 0.0;
    let mut base_mass = vec![0.0; tower.n_bases()];
    for (k, node) in tower.nodes().iter().enumerate() {
        if node.level != 0 {
            continue;
        }
        let len = tower.bases()[node.root].interval.len();
        let v = sol.fixed_point.phi.node(k);
        sup_base = sup_base.max(v.iter().fold(0.0f64, |m, x| m.max(*x)) / len);
        base_mass[node.root] = sol.density.mass(&tower.bases()[node.root].interval);
        let _ = g;
    }
    let sup_bound = n / (2.0 * delta) * sup_base * root_sum;
    let sup = BoundCheck {
        value: sol.result.sup_psi,
        bound: sup_bound,
        holds: sol.result.sup_psi <= sup_bound,
    };

    let eta = system.map().eta();
    let mut best: Option<(f64, usize, usize)> = None;
    for (i, b) in tower.bases().iter().enumerate() {
        if let Some(n0) = covering_time(system, b.interval, 64, CoverMode::Surviving) {
            let bound = base_mass[i] / (2.0 * delta * eta.powi(n0 as i32));
            if best.is_none_or(|(v, _, _)| bound > v) {
                best = Some((bound, n0, i));
            }
        }
    }
    let (inf, inf_note) = match best {
        Some((bound, n0, i)) => (
            Some(BoundCheck {
                value: sol.result.inf_psi,
                bound,
                holds: sol.result.inf_psi >= bound,
            }),
            format!("base {i}, n0 = {n0}, eta = {eta}"),
        ),
        None => (None, "no covering time within 64 steps; lower bound skipped".to_string()),
    };

    let variation = sol.result.variation.map(|v| {
        let bound = distortion_constant(system.map()) + 3.0 * n * c.m / (2.0 * delta) * root_sum;
        BoundCheck {
            value: v,
            bound,
            holds: v <= bound,
        }
    });
    DensityBounds {
        sup,
        inf,
        inf_note,
        variation,
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct LipschitzRow {
    pub mh: f64,
    pub lambda: f64,
    pub one_minus_lambda: f64,
    pub c0: f64,
    /// `C0 mH`.
    pub bound: f64,
    /// `bound - (1 - lambda)`.
    pub slack: f64,
    pub holds: bool,
    /// (A1) passes; outside that regime the bound is reported but not claimed.
    pub a1: bool,
}

/// Solves every hole and compares `1 - lambda` with `C0 mH`.
pub fn lipschitz_study(map: &PiecewiseExpandingMap, holes: &[Hole], opts: &SolveOptions) -> Result<Vec<LipschitzRow>> {
    holes
        .par_iter()
        .map(|h| {
            let system = build_open_system(map.clone(), h.clone())?;
            let sol = solve(&system, opts)?;
            let lambda = sol.result.lambda;
            let c0 = sol.constants.c0;
            let mh = h.measure();
            let one_minus = 1.0 - lambda;
            let bound = c0 * mh;
            Ok(LipschitzRow {
                mh,
                lambda,
                one_minus_lambda: one_minus,
                c0,
                bound,
                slack: bound - one_minus,
                holds: one_minus <= bound + 1e-12,
                a1: sol.hypotheses.get("A1").is_some_and(|c| c.passed()),
            })
        })
        .collect()
}

/// A nested family of holes `H_s`.
#[derive(Clone, Debug, Serialize)]
pub struct HoleFamily {
    /// `(s, H_s)` in decreasing `s`.
    pub members: Vec<(f64, Hole)>,
}

impl HoleFamily {
    /// `H_s = (c - s/2, c + s/2)`.
    pub fn centered(center: f64, sizes: &[f64]) -> Result<Self> {
        Self::from_fn(sizes, |s| Interval::new(center - 0.5 * s, center + 0.5 * s))
    }

    /// `H_s = (a, a + s)`.
    pub fn right(left: f64, sizes: &[f64]) -> Result<Self> {
        Self::from_fn(sizes, |s| Interval::new(left, left + s))
    }

    fn from_fn(sizes: &[f64], f: impl Fn(f64) -> Interval) -> Result<Self> {
        let members = sizes
            .iter()
            .map(|&s| {
                if !(s >= 0.0) || !s.is_finite() {
                    return Err(Error::Family(format!("size s = {s} must be finite and non-negative")));
                }
                let hole = if s == 0.0 { Hole::empty() } else { Hole::new(vec![f(s)]).map_err(family_err)? };
                Ok((s, hole))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::explicit(members)
    }

    /// Sorts by decreasing `s` and checks `mH_s <= s` and nesting.
    pub fn explicit(mut members: Vec<(f64, Hole)>) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::Family("empty hole family".into()));
        }
        members.sort_by(|a, b| b.0.total_cmp(&a.0));
        for (s, h) in &members {
            if h.measure() > s + 1e-15 {
                return Err(Error::Family(format!("mH_s = {} exceeds s = {s}", h.measure())));
            }
        }
        for w in members.windows(2) {
            let ((t, big), (s, small)) = (&w[0], &w[1]);
            if t == s {
                return Err(Error::Family(format!("size s = {s} repeated")));
            }
            let nested = small
                .intervals()
                .iter()
                .all(|c| big.intervals().iter().any(|b| b.lo <= c.lo + 1e-15 && c.hi <= b.hi + 1e-15));
            if !nested {
                return Err(Error::Family(format!("H_{s} is not contained in H_{t}")));
            }
        }
        Ok(Self { members })
    }
}

fn family_err(e: Error) -> Error {
    Error::Family(e.to_string())
}

/// Number of functions in the weak-convergence battery.
pub const BATTERY_LEN: usize = 17;

/// `1, x, x^2` and the indicators of the dyadic intervals of levels 1 to 3.
pub fn battery(pd: &ProjectedDensity) -> Vec<f64> {
    let mut out = vec![pd.moment(0), pd.moment(1), pd.moment(2)];
    for level in 1..=3 {
        let n = 1usize << level;
        for k in 0..n {
            out.push(pd.mass(&Interval::new(k as f64 / n as f64, (k + 1) as f64 / n as f64)));
        }
    }
    out
}

#[derive(Clone, Debug, Serialize)]
pub struct ShrinkStudyRow {
    pub s: f64,
    pub mh: f64,
    pub lambda: f64,
    /// `(1 - lambda_s) / mH_s`; `None` for the empty hole.
    pub one_minus_lambda_over_mh: Option<f64>,
    /// `||psi_s - psi_SRB||_1`, measured on the binned densities.
    pub l1_dist: f64,
    pub weak_dists: Vec<f64>,
    pub weak_max: f64,
    /// The mixing condition on the family holds for this member.
    pub mixing: bool,
}

/// Solves each family member and measures its distance to the SRB density.
pub fn shrink_study(map: &PiecewiseExpandingMap, family: &HoleFamily, opts: &SolveOptions) -> Result<Vec<ShrinkStudyRow>> {
    let srb = srb_closed(map, opts)?;
    let grid = opts.grid;
    let reference = srb.density.binned(grid);
    let reference_battery = battery(&srb.density);
    family
        .members
        .par_iter()
        .map(|(s, hole)| {
            let system = build_open_system(map.clone(), hole.clone())?;
            let mixing = matches!(check_mixing(&system, opts.transitivity_horizon), Transitivity::Satisfied(_));
            let sol = solve(&system, opts)?;
            let masses = sol.density.binned(grid);
            let l1_dist = masses.iter().zip(&reference).map(|(a, b)| (a - b).abs()).sum();
            let weak_dists: Vec<f64> = battery(&sol.density)
                .iter()
                .zip(&reference_battery)
                .map(|(a, b)| (a - b).abs())
                .collect();
            let mh = hole.measure();
            let lambda = sol.result.lambda;
            Ok(ShrinkStudyRow {
                s: *s,
                mh,
                lambda,
                one_minus_lambda_over_mh: (mh > 0.0).then(|| (1.0 - lambda) / mh),
                l1_dist,
                weak_max: weak_dists.iter().copied().fold(0.0, f64::max),
                weak_dists,
                mixing,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;

    fn solve_preset(map: PiecewiseExpandingMap, hole: Hole) -> Solution {
        solve(&build_open_system(map, hole).unwrap(), &SolveOptions::default()).unwrap()
    }

    #[test]
    fn markov_projection() {
        let sol = solve_preset(presets::tripling(), presets::markov_hole());
        let r = &sol.result;
        assert!((r.lambda - 2.0 / 3.0).abs() < 1e-9);
        assert!((r.sup_psi - 1.5).abs() < 1e-9 && (r.inf_psi - 1.5).abs() < 1e-9);
        assert!((r.integral - 1.0).abs() < 1e-12);
        assert!(r.residual < 1e-8);
        assert!((r.interval_lambda - r.lambda).abs() < 1e-9);
        assert!((sol.density.value(0.5)).abs() < 1e-15);
        let b = density_bounds(&sol);
        assert!(b.all_hold(), "{b:?}");
    }

    #[test]
    fn closed_projection() {
        let sol = solve_preset(presets::tripling(), Hole::empty());
        let r = &sol.result;
        assert!((r.lambda - 1.0).abs() < 1e-12);
        assert!(r.psi.iter().all(|v| (v - 1.0).abs() < 1e-9));
        assert!(r.residual < 1e-8);
        assert!((r.variation.unwrap()).abs() < 1e-9);
    }

    #[test]
    fn residual_negative_control() {
        let sol = solve_preset(presets::tripling(), presets::small_hole());
        let op = TransferOperator::new(&sol.tower, 16).unwrap();
        let f = op.sample(|_, y| 1.0 + y * y);
        let pd = ProjectedDensity::new(&op, &f);
        let r = conditional_invariance_residual(sol.system(), &pd, sol.result.lambda, 256);
        assert!(r > 1e-4, "{r}");
    }

    #[test]
    fn small_hole_bounds() {
        let sol = solve_preset(presets::tripling(), presets::small_hole());
        let r = &sol.result;
        let c = &sol.constants;
        assert!(r.lambda < 1.0 && r.lambda >= c.lambda_lower && r.lambda >= c.lambda_floor);
        assert!(r.residual < 1e-8, "{} {} {}", r.residual, r.lambda, r.interval_lambda);
        assert!((r.interval_lambda - r.lambda).abs() < 1e-6);
        let b = density_bounds(&sol);
        assert!(b.all_hold(), "{b:?}");
    }

    #[test]
    fn family_validation() {
        assert!(HoleFamily::centered(0.5, &[0.01, 0.02, 0.005]).is_ok());
        let f = HoleFamily::centered(0.5, &[0.01, 0.02]).unwrap();
        assert_eq!(f.members[0].0, 0.02);
        let bad = HoleFamily::explicit(vec![
            (0.02, Hole::new(vec![Interval::new(0.1, 0.12)]).unwrap()),
            (0.01, Hole::new(vec![Interval::new(0.5, 0.51)]).unwrap()),
        ]);
        assert!(matches!(bad, Err(Error::Family(_))));
        let too_big = HoleFamily::explicit(vec![(0.01, Hole::new(vec![Interval::new(0.1, 0.2)]).unwrap())]);
        assert!(matches!(too_big, Err(Error::Family(_))));
        assert!(HoleFamily::right(0.5, &[-1.0]).is_err());
    }

    #[test]
    fn lipschitz_zero_hole() {
        let rows = lipschitz_study(&presets::tripling(), &[Hole::empty()], &SolveOptions::default()).unwrap();
        assert!(rows[0].one_minus_lambda.abs() < 1e-12 && rows[0].holds);
    }
}
