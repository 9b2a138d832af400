//! Fixtures shared by the criterion benches.

use hyperslice::{DiagonalMap, StarBody};

/// A weighted `l_1.5` ball, smooth but not Euclidean.
pub fn weighted_body(n: usize) -> StarBody {
    let w: Vec<f64> = (0..n).map(|i| 1.0 + 0.25 * i as f64).collect();
    StarBody::lp_ball(n, 1.5, Some(&w)).expect("valid weights")
}

/// Diagonal image of the cross-polytope.
pub fn stretched_cross_polytope(n: usize) -> StarBody {
    let t = DiagonalMap::new((1..=n).map(|i| i as f64).collect()).expect("positive diagonal");
    StarBody::cross_polytope(n).diagonal_image(&t).expect("matching dimension")
}
