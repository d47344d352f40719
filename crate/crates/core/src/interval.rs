//! Closed real intervals and the geometric tolerance used for point
//! classification.

use serde::{Deserialize, Serialize};

/// Tolerance for point-in-interval queries and coverage tests.
pub const EPS_GEO: f64 = 1e-12;

/// A closed interval `[lo, hi]` with `lo <= hi`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    /// Builds the interval spanned by two endpoints given in either order.
    pub fn new(a: f64, b: f64) -> Self {
        if a <= b {
            Self { lo: a, hi: b }
        } else {
            Self { lo: b, hi: a }
        }
    }

    pub const UNIT: Interval = Interval { lo: 0.0, hi: 1.0 };

    #[inline]
    pub fn len(&self) -> f64 {
        self.hi - self.lo
    }

    #[inline]
    pub fn mid(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    /// Point at relative position `t` in `[0, 1]`.
    #[inline]
    pub fn lerp(&self, t: f64) -> f64 {
        self.lo + t * (self.hi - self.lo)
    }

    /// Inclusive membership, padded by [`EPS_GEO`].
    #[inline]
    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo - EPS_GEO && x <= self.hi + EPS_GEO
    }

    pub fn contains_interval(&self, other: &Interval) -> bool {
        self.contains(other.lo) && self.contains(other.hi)
    }

    /// Intersection, or `None` when the overlap is shorter than `min_len`.
    pub fn intersect(&self, other: &Interval, min_len: f64) -> Option<Interval> {
        let lo = self.lo.max(other.lo);
        let hi = self.hi.min(other.hi);
        (hi - lo > min_len).then_some(Interval { lo, hi })
    }

    pub fn overlap_len(&self, other: &Interval) -> f64 {
        (self.hi.min(other.hi) - self.lo.max(other.lo)).max(0.0)
    }

    pub fn clamp(&self, x: f64) -> f64 {
        x.clamp(self.lo, self.hi)
    }
}

impl std::fmt::Display for Interval {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "[{}, {}]", self.lo, self.hi)
    }
}

/// Merges a list of intervals into sorted, pairwise-disjoint pieces.
/// Pieces closer than `EPS_GEO` are joined.
pub fn merge(mut pieces: Vec<Interval>) -> Vec<Interval> {
    pieces.sort_by(|a, b| a.lo.total_cmp(&b.lo));
    let mut out: Vec<Interval> = Vec::with_capacity(pieces.len());
    for p in pieces {
        match out.last_mut() {
            Some(last) if p.lo <= last.hi + EPS_GEO => last.hi = last.hi.max(p.hi),
            _ => out.push(p),
        }
    }
    out
}

/// True when the union of `pieces` covers every interval of `target`.
pub fn covers(pieces: &[Interval], target: &[Interval]) -> bool {
    let merged = merge(pieces.to_vec());
    target.iter().all(|t| {
        merged
            .iter()
            .any(|m| m.lo <= t.lo + EPS_GEO && m.hi >= t.hi - EPS_GEO)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn new_sorts_endpoints() {
        let i = Interval::new(0.7, 0.2);
        assert_eq!(i, Interval { lo: 0.2, hi: 0.7 });
        assert!((i.len() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn merge_joins_touching_pieces() {
        let m = merge(vec![
            Interval::new(0.5, 0.6),
            Interval::new(0.0, 0.2),
            Interval::new(0.2, 0.3),
        ]);
        assert_eq!(m, vec![Interval::new(0.0, 0.3), Interval::new(0.5, 0.6)]);
    }

    #[test]
    fn coverage() {
        let pieces = [Interval::new(0.0, 0.4), Interval::new(0.4, 1.0)];
        assert!(covers(&pieces, &[Interval::UNIT]));
        assert!(!covers(&pieces[..1], &[Interval::UNIT]));
    }
}
