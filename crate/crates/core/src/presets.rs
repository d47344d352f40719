//! Reference maps and holes used throughout the tests and the guide.

use crate::interval::Interval;
use crate::maps::{Form, Hole, PiecewiseExpandingMap};

/// `x -> 3x mod 1`.
pub fn tripling() -> PiecewiseExpandingMap {
    PiecewiseExpandingMap::mod_one(
        Form::Affine {
            intercept: 0.0,
            slope: 3.0,
        },
        1.0,
        0.0,
        3.0,
    )
    .expect("tripling map is valid")
}

/// `x -> 3x + 0.1 sin(2 pi x) mod 1`, with `mu` just below `3 - 0.2 pi` and
/// `C_hat = 0.4 pi^2` rounded up.
pub fn perturbed_tripling() -> PiecewiseExpandingMap {
    PiecewiseExpandingMap::mod_one(
        Form::AffineSine {
            intercept: 0.0,
            slope: 3.0,
            amplitude: 0.1,
            frequency: 1.0,
            phase: 0.0,
        },
        1.0,
        3.948,
        2.3716,
    )
    .expect("perturbed tripling map is valid")
}

/// The middle third `(1/3, 2/3)`.
pub fn markov_hole() -> Hole {
    Hole::new(vec![Interval::new(1.0 / 3.0, 2.0 / 3.0)]).unwrap()
}

/// `(0.5, 0.502)`.
pub fn small_hole() -> Hole {
    Hole::new(vec![Interval::new(0.5, 0.502)]).unwrap()
}

/// `(0.4, 0.41)`.
pub fn offset_hole() -> Hole {
    Hole::new(vec![Interval::new(0.4, 0.41)]).unwrap()
}

/// Named map/hole pairs that every construction check runs over.
pub fn corpus() -> Vec<(&'static str, PiecewiseExpandingMap, Hole)> {
    vec![
        ("tripling-markov", tripling(), markov_hole()),
        ("tripling-closed", tripling(), Hole::empty()),
        ("tripling-small", tripling(), small_hole()),
        ("tripling-offset", tripling(), offset_hole()),
        ("perturbed-closed", perturbed_tripling(), Hole::empty()),
        ("perturbed-small", perturbed_tripling(), small_hole()),
    ]
}
