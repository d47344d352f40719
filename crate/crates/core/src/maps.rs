//! Piecewise expanding maps of `[0, 1]`, holes, and the open system they form.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interval::{Interval, EPS_GEO};

/// Samples per branch used when validating `mu` and the Hölder constant.
const VALIDATION_SAMPLES: usize = 4096;

/// Closed-form branch shapes. Derivatives are analytic.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum Form {
    Affine {
        intercept: f64,
        slope: f64,
    },
    /// `c0 + c1 x + c2 x^2 + ...`
    Polynomial { coeffs: Vec<f64> },
    /// `intercept + slope x + amplitude sin(2 pi frequency x + phase)`
    AffineSine {
        intercept: f64,
        slope: f64,
        amplitude: f64,
        frequency: f64,
        phase: f64,
    },
}

impl Form {
    pub fn value(&self, x: f64) -> f64 {
        match self {
            Form::Affine { intercept, slope } => intercept + slope * x,
            Form::Polynomial { coeffs } => coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c),
            Form::AffineSine {
                intercept,
                slope,
                amplitude,
                frequency,
                phase,
            } => {
                intercept
                    + slope * x
                    + amplitude * (std::f64::consts::TAU * frequency * x + phase).sin()
            }
        }
    }

    pub fn derivative(&self, x: f64) -> f64 {
        match self {
            Form::Affine { slope, .. } => *slope,
            Form::Polynomial { coeffs } => coeffs
                .iter()
                .enumerate()
                .skip(1)
                .rev()
                .fold(0.0, |acc, (k, c)| acc * x + k as f64 * c),
            Form::AffineSine {
                slope,
                amplitude,
                frequency,
                phase,
                ..
            } => {
                let w = std::f64::consts::TAU * frequency;
                slope + amplitude * w * (w * x + phase).cos()
            }
        }
    }

    /// True when the derivative is constant.
    pub fn is_affine(&self) -> bool {
        match self {
            Form::Affine { .. } => true,
            Form::Polynomial { coeffs } => coeffs.iter().skip(2).all(|c| *c == 0.0),
            Form::AffineSine { amplitude, .. } => *amplitude == 0.0,
        }
    }
}

/// One monotone branch: `x -> form(x) - shift` on `domain`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub domain: Interval,
    pub form: Form,
    pub shift: f64,
}

impl Branch {
    pub fn new(domain: Interval, form: Form, shift: f64) -> Self {
        Self {
            domain,
            form,
            shift,
        }
    }

    #[inline]
    pub fn value(&self, x: f64) -> f64 {
        self.form.value(x) - self.shift
    }

    #[inline]
    pub fn derivative(&self, x: f64) -> f64 {
        self.form.derivative(x)
    }

    pub fn increasing(&self) -> bool {
        self.derivative(self.domain.mid()) > 0.0
    }

    pub fn image(&self) -> Interval {
        Interval::new(self.value(self.domain.lo), self.value(self.domain.hi))
    }

    /// Image of a subinterval of the domain.
    pub fn image_of(&self, j: &Interval) -> Interval {
        Interval::new(self.value(j.lo), self.value(j.hi))
    }

    /// Preimage of a subinterval of the image.
    pub fn preimage_of(&self, k: &Interval) -> Interval {
        Interval::new(self.inverse(k.lo), self.inverse(k.hi))
    }

    /// Inverse branch. `y` is clamped to the image first.
    pub fn inverse(&self, y: f64) -> f64 {
        let inc = self.increasing();
        let (dlo, dhi) = (self.domain.lo, self.domain.hi);
        let (vlo, vhi) = (self.value(dlo), self.value(dhi));
        let (ylo, yhi) = if inc { (vlo, vhi) } else { (vhi, vlo) };
        if y <= ylo {
            return if inc { dlo } else { dhi };
        }
        if y >= yhi {
            return if inc { dhi } else { dlo };
        }
        if let Form::Affine { intercept, slope } = self.form {
            return self.domain.clamp((y + self.shift - intercept) / slope);
        }
        // Safeguarded Newton on the bracket [a, b], with g(a) < 0 < g(b) in
        // the orientation-adjusted sense.
        let g = |x: f64| {
            let v = self.value(x) - y;
            if inc {
                v
            } else {
                -v
            }
        };
        let (mut a, mut b) = (dlo, dhi);
        let mut x = a + (b - a) * (y - ylo) / (yhi - ylo);
        for _ in 0..200 {
            let gx = g(x);
            if gx == 0.0 {
                return x;
            }
            if gx < 0.0 {
                a = x;
            } else {
                b = x;
            }
            let d = self.derivative(x).abs();
            let mut next = x - gx / d;
            if !(next > a && next < b) {
                next = 0.5 * (a + b);
            }
            if (next - x).abs() <= 2.0 * f64::EPSILON * x.abs().max(1e-300) || b - a <= 4.0 * f64::EPSILON {
                return next;
            }
            x = next;
        }
        x
    }
}

/// A piecewise `C^{1+alpha}` expanding map of `[0, 1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseExpandingMap {
    branches: Vec<Branch>,
    alpha: f64,
    holder_const: f64,
    mu: f64,
    mod_one: bool,
}

impl PiecewiseExpandingMap {
    /// Builds a map from explicitly listed branches and validates it.
    pub fn from_branches(branches: Vec<Branch>, alpha: f64, holder_const: f64, mu: f64) -> Result<Self> {
        let map = Self {
            branches,
            alpha,
            holder_const,
            mu,
            mod_one: false,
        };
        map.validate()?;
        Ok(map)
    }

    /// Builds `x -> lift(x) mod 1`. Branch boundaries sit where the lift
    /// crosses an integer.
    pub fn mod_one(lift: Form, alpha: f64, holder_const: f64, mu: f64) -> Result<Self> {
        let g0 = lift.value(0.0);
        let g1 = lift.value(1.0);
        let inc = g1 > g0;
        let (lo, hi) = if inc { (g0, g1) } else { (g1, g0) };
        let mut levels: Vec<f64> = Vec::new();
        let mut k = lo.floor() + 1.0;
        while k < hi - EPS_GEO {
            if k > lo + EPS_GEO {
                levels.push(k);
            }
            k += 1.0;
        }
        if !inc {
            levels.reverse();
        }
        // Root of lift = k via a temporary branch without shift.
        let whole = Branch::new(Interval::UNIT, lift.clone(), 0.0);
        let mut cuts = vec![0.0];
        for k in &levels {
            let x = match lift {
                Form::Affine { intercept, slope } => (k - intercept) / slope,
                _ => whole.inverse(*k),
            };
            cuts.push(x);
        }
        cuts.push(1.0);
        let branches = cuts
            .windows(2)
            .map(|w| {
                let domain = Interval::new(w[0], w[1]);
                let shift = lift.value(domain.mid()).floor();
                Branch::new(domain, lift.clone(), shift)
            })
            .collect();
        let map = Self {
            branches,
            alpha,
            holder_const,
            mu,
            mod_one: true,
        };
        map.validate()?;
        Ok(map)
    }

    pub fn branches(&self) -> &[Branch] {
        &self.branches
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn holder_const(&self) -> f64 {
        self.holder_const
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn is_mod_one(&self) -> bool {
        self.mod_one
    }

    /// True when every branch is affine.
    pub fn is_piecewise_affine(&self) -> bool {
        self.branches.iter().all(|b| b.form.is_affine())
    }

    /// Sampled maximum of `|T'|`.
    pub fn eta(&self) -> f64 {
        self.branches
            .iter()
            .flat_map(|b| {
                (0..=VALIDATION_SAMPLES)
                    .map(move |k| b.derivative(b.domain.lerp(k as f64 / VALIDATION_SAMPLES as f64)).abs())
            })
            .fold(0.0, f64::max)
    }

    /// Index of the branch containing `x`; shared endpoints go to the lower index.
    pub fn branch_index(&self, x: f64) -> Option<usize> {
        self.branches
            .iter()
            .position(|b| x >= b.domain.lo && x <= b.domain.hi)
    }

    fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::InvalidMap(format!("alpha = {} must lie in (0, 1]", self.alpha)));
        }
        if !(self.holder_const >= 0.0) {
            return Err(Error::InvalidMap("holder_const must be non-negative".into()));
        }
        if !(self.mu > 2.0) {
            return Err(Error::InvalidMap(format!("mu = {} must exceed 2", self.mu)));
        }
        if self.branches.is_empty() {
            return Err(Error::InvalidMap("no branches".into()));
        }
        let first = &self.branches[0].domain;
        let last = &self.branches[self.branches.len() - 1].domain;
        if first.lo.abs() > EPS_GEO || (last.hi - 1.0).abs() > EPS_GEO {
            return Err(Error::InvalidMap("branch domains must tile [0, 1]".into()));
        }
        for w in self.branches.windows(2) {
            if (w[0].domain.hi - w[1].domain.lo).abs() > EPS_GEO {
                return Err(Error::InvalidMap(format!(
                    "branch domains {} and {} do not tile",
                    w[0].domain, w[1].domain
                )));
            }
        }
        for (i, b) in self.branches.iter().enumerate() {
            if b.domain.len() <= EPS_GEO {
                return Err(Error::InvalidMap(format!("branch {i} has an empty domain")));
            }
            let img = b.image();
            if img.lo < -1e-9 || img.hi > 1.0 + 1e-9 {
                return Err(Error::InvalidMap(format!("branch {i} image {img} leaves [0, 1]")));
            }
            let n = VALIDATION_SAMPLES;
            let xs: Vec<f64> = (0..=n).map(|k| b.domain.lerp(k as f64 / n as f64)).collect();
            let ds: Vec<f64> = xs.iter().map(|&x| b.derivative(x)).collect();
            let sign = ds[n / 2].signum();
            for (x, d) in xs.iter().zip(&ds) {
                if d.signum() != sign {
                    return Err(Error::InvalidMap(format!("branch {i} is not monotone near {x}")));
                }
                if d.abs() < self.mu * (1.0 - 1e-12) {
                    return Err(Error::InvalidMap(format!(
                        "branch {i}: |T'({x})| = {} is below mu = {}",
                        d.abs(),
                        self.mu
                    )));
                }
            }
            let mut stride = 1;
            while stride <= n {
                for s in 0..=n - stride {
                    let lhs = (ds[s + stride] - ds[s]).abs();
                    let rhs = self.holder_const * (xs[s + stride] - xs[s]).abs().powf(self.alpha);
                    if lhs > rhs * (1.0 + 1e-9) + 1e-12 {
                        return Err(Error::InvalidMap(format!(
                            "branch {i}: Hölder bound fails between {} and {} (|dT'| = {lhs}, bound {rhs})",
                            xs[s],
                            xs[s + stride]
                        )));
                    }
                }
                stride *= 2;
            }
        }
        Ok(())
    }
}

/// Image, derivative and branch index of `T(x)`.
pub fn evaluate(map: &PiecewiseExpandingMap, x: f64) -> Result<(f64, f64, usize)> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::Domain(format!("x = {x} lies outside [0, 1]")));
    }
    let i = map
        .branch_index(x)
        .ok_or_else(|| Error::Domain(format!("no branch contains {x}")))?;
    let b = &map.branches[i];
    let mut y = b.value(x);
    if map.mod_one {
        if y >= 1.0 {
            y -= 1.0;
        }
        if y < 0.0 {
            y = 0.0;
        }
    } else {
        y = y.clamp(0.0, 1.0);
    }
    Ok((y, b.derivative(x), i))
}

/// Distortion constant `exp(C_hat / (mu (mu^alpha - 1))) - 1`.
pub fn distortion_constant(map: &PiecewiseExpandingMap) -> f64 {
    distortion_constant_from(map.holder_const, map.mu, map.alpha)
}

pub fn distortion_constant_from(holder_const: f64, mu: f64, alpha: f64) -> f64 {
    (holder_const / (mu * (mu.powf(alpha) - 1.0))).exp_m1()
}

/// A finite union of open intervals.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Hole {
    intervals: Vec<Interval>,
}

impl Hole {
    pub fn new(mut intervals: Vec<Interval>) -> Result<Self> {
        intervals.sort_by(|a, b| a.lo.total_cmp(&b.lo));
        for h in &intervals {
            if !(h.lo >= 0.0 && h.hi <= 1.0) {
                return Err(Error::InvalidHole(format!("{h} is not inside [0, 1]")));
            }
            if !(h.hi > h.lo) {
                return Err(Error::InvalidHole(format!("{h} is empty")));
            }
        }
        for w in intervals.windows(2) {
            if w[1].lo < w[0].hi {
                return Err(Error::InvalidHole(format!("{} and {} overlap", w[0], w[1])));
            }
        }
        Ok(Self { intervals })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn intervals(&self) -> &[Interval] {
        &self.intervals
    }

    pub fn count(&self) -> usize {
        self.intervals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    /// Total length `mH`.
    pub fn measure(&self) -> f64 {
        self.intervals.iter().map(Interval::len).sum()
    }

    /// Largest component length `h`.
    pub fn max_len(&self) -> f64 {
        self.intervals.iter().map(Interval::len).fold(0.0, f64::max)
    }

    /// Open-interval membership; points within `EPS_GEO` of an endpoint are outside.
    pub fn contains(&self, x: f64) -> bool {
        self.intervals
            .iter()
            .any(|h| x > h.lo + EPS_GEO && x < h.hi - EPS_GEO)
    }

    /// Index of the component containing `x`.
    pub fn component(&self, x: f64) -> Option<usize> {
        self.intervals
            .iter()
            .position(|h| x > h.lo + EPS_GEO && x < h.hi - EPS_GEO)
    }
}

/// An interval of the monotonicity partition of `I`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QElement {
    pub interval: Interval,
    pub branch: usize,
}

/// A map together with a hole.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OpenSystem {
    map: PiecewiseExpandingMap,
    hole: Hole,
    survivors: Vec<Interval>,
    q: Vec<QElement>,
    d: f64,
    d_len: f64,
}

impl OpenSystem {
    pub fn map(&self) -> &PiecewiseExpandingMap {
        &self.map
    }

    pub fn hole(&self) -> &Hole {
        &self.hole
    }

    /// `I = [0, 1] \ H` as closed intervals.
    pub fn survivors(&self) -> &[Interval] {
        &self.survivors
    }

    pub fn q(&self) -> &[QElement] {
        &self.q
    }

    /// Number of intervals `K` in `Q`.
    pub fn k(&self) -> usize {
        self.q.len()
    }

    /// Shortest `|I_j|`.
    pub fn d(&self) -> f64 {
        self.d
    }

    /// Longest `|I_j|`.
    pub fn d_len(&self) -> f64 {
        self.d_len
    }

    pub fn survivor_len(&self) -> f64 {
        self.survivors.iter().map(Interval::len).sum()
    }

    /// Index of the `Q` element containing `x`, lower index on ties.
    pub fn q_index(&self, x: f64) -> Option<usize> {
        self.q.iter().position(|e| e.interval.contains(x))
    }

    /// Splits an interval into its pieces inside `I` and inside each hole
    /// component. Pieces not longer than `EPS_GEO` are dropped.
    pub fn split(&self, j: &Interval) -> (Vec<(usize, Interval)>, Vec<(usize, Interval)>) {
        let inside = self
            .q
            .iter()
            .enumerate()
            .filter_map(|(k, e)| e.interval.intersect(j, EPS_GEO).map(|p| (k, p)))
            .collect();
        let holes = self
            .hole
            .intervals()
            .iter()
            .enumerate()
            .filter_map(|(k, h)| h.intersect(j, EPS_GEO).map(|p| (k, p)))
            .collect();
        (inside, holes)
    }
}

/// Forms `I`, its monotonicity partition `Q`, and the lengths `d`, `D_len`.
pub fn build_open_system(map: PiecewiseExpandingMap, hole: Hole) -> Result<OpenSystem> {
    let mut survivors = Vec::new();
    let mut cursor = 0.0;
    for h in hole.intervals() {
        if h.lo - cursor > EPS_GEO {
            survivors.push(Interval::new(cursor, h.lo));
        }
        cursor = h.hi;
    }
    if 1.0 - cursor > EPS_GEO {
        survivors.push(Interval::new(cursor, 1.0));
    }
    if survivors.is_empty() {
        return Err(Error::Degenerate("the hole covers [0, 1]".into()));
    }
    for (i, b) in map.branches().iter().enumerate() {
        if let Some(h) = hole
            .intervals()
            .iter()
            .find(|h| h.lo < b.domain.lo - EPS_GEO && h.hi > b.domain.hi + EPS_GEO)
        {
            return Err(Error::Degenerate(format!(
                "hole component {h} swallows branch {i} with domain {}",
                b.domain
            )));
        }
    }
    let mut q = Vec::new();
    for s in &survivors {
        for (i, b) in map.branches().iter().enumerate() {
            if let Some(p) = s.intersect(&b.domain, EPS_GEO) {
                q.push(QElement { interval: p, branch: i });
            }
        }
    }
    if q.is_empty() {
        return Err(Error::Degenerate("no monotonicity interval survives the hole".into()));
    }
    let d = q.iter().map(|e| e.interval.len()).fold(f64::INFINITY, f64::min);
    let d_len = q.iter().map(|e| e.interval.len()).fold(0.0, f64::max);
    Ok(OpenSystem {
        map,
        hole,
        survivors,
        q,
        d,
        d_len,
    })
}

/// Grid estimate of `m(I^n)`, the measure of points that stay outside the
/// hole at times `0, ..., n`. Uses `grid` midpoints.
pub fn survivor_measure(system: &OpenSystem, n: usize, grid: usize) -> f64 {
    let count: u64 = (0..grid)
        .into_par_iter()
        .map(|k| {
            let mut x = (k as f64 + 0.5) / grid as f64;
            for step in 0..=n {
                if system.hole.contains(x) {
                    return 0;
                }
                if step < n {
                    x = match evaluate(&system.map, x) {
                        Ok((y, _, _)) => y,
                        Err(_) => return 0,
                    };
                }
            }
            1u64
        })
        .sum();
    count as f64 / grid as f64
}
