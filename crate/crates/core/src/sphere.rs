//! Small vector helpers, seeded directions on the sphere, and derivative-free
//! compass search restricted to the unit sphere.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Returns `x / |x|`, or `None` for the zero vector.
pub fn normalized(x: &[f64]) -> Option<Vec<f64>> {
    let r = norm2(x);
    if r == 0.0 || !r.is_finite() {
        return None;
    }
    Some(x.iter().map(|v| v / r).collect())
}

pub fn coordinate(n: usize, i: usize) -> Vec<f64> {
    let mut e = vec![0.0; n];
    e[i] = 1.0;
    e
}

/// Generator for the `index`-th stream of `seed`. Streams are independent, so
/// per-direction draws do not depend on evaluation order.
pub fn stream_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

pub fn random_unit<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    loop {
        let g: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        if let Some(u) = normalized(&g) {
            return u;
        }
    }
}

/// `count` uniform directions on `S^(m-1)`, flattened row by row. Direction `i`
/// comes from stream `i` of `seed`; results are cached.
pub fn seeded_directions(seed: u64, m: usize, count: usize) -> Arc<Vec<f64>> {
    type Cache = Mutex<HashMap<(u64, usize, usize), Arc<Vec<f64>>>>;
    static CACHE: OnceLock<Cache> = OnceLock::new();
    let cache = CACHE.get_or_init(Default::default);
    if let Some(hit) = cache.lock().unwrap().get(&(seed, m, count)) {
        return hit.clone();
    }
    let rows: Vec<Vec<f64>> = (0..count)
        .into_par_iter()
        .map(|i| random_unit(&mut stream_rng(seed, i as u64), m))
        .collect();
    let flat = Arc::new(rows.concat());
    cache.lock().unwrap().insert((seed, m, count), flat.clone());
    flat
}

/// Sign patterns `(±1, ..., ±1)/sqrt(n)` with the first sign fixed to `+`,
/// at most `cap` of them.
pub fn diagonal_directions(n: usize, cap: usize) -> Vec<Vec<f64>> {
    let scale = 1.0 / (n as f64).sqrt();
    let total = if n >= 63 { u64::MAX } else { 1u64 << (n - 1) };
    (0..total.min(cap as u64))
        .map(|mask| {
            (0..n)
                .map(|i| {
                    if i > 0 && mask >> (i - 1) & 1 == 1 {
                        -scale
                    } else {
                        scale
                    }
                })
                .collect()
        })
        .collect()
}

/// Orthonormal basis of the hyperplane orthogonal to the unit vector `xi`.
///
/// Built from the Householder reflection that swaps `e_k` and the sign-canonical
/// `±xi`, where `k` is the index of the largest `|xi_k|`. Because of the sign
/// canonicalization, `xi` and `-xi` produce bit-identical bases.
pub fn orthonormal_complement(xi: &[f64]) -> Vec<Vec<f64>> {
    let n = xi.len();
    let mut k = 0;
    for i in 1..n {
        if xi[i].abs() > xi[k].abs() {
            k = i;
        }
    }
    let s = if xi[k] < 0.0 { -1.0 } else { 1.0 };
    let mut v: Vec<f64> = xi.iter().map(|x| s * x).collect();
    v[k] += 1.0;
    let vv = dot(&v, &v);
    (0..n)
        .filter(|&j| j != k)
        .map(|j| {
            let c = 2.0 * v[j] / vv;
            let mut col: Vec<f64> = v.iter().map(|vi| -c * vi).collect();
            col[j] += 1.0;
            col
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct CompassConfig {
    pub step_init: f64,
    pub step_min: f64,
    pub max_iters: usize,
    /// Randomly rotated poll frames tried before the step is halved.
    pub rotations: usize,
}

impl Default for CompassConfig {
    fn default() -> Self {
        Self {
            step_init: 0.25,
            step_min: 1e-4,
            max_iters: 200,
            rotations: 1,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Ascent {
    pub point: Vec<f64>,
    pub value: f64,
    pub evals: usize,
}

/// Maximizes `f` over the unit sphere by polling `±step` along an orthonormal
/// tangent basis, moving to the best improving poll and halving the step when no
/// poll improves. With `orthant` set, candidates are folded into the closed
/// positive orthant (valid when `f` is invariant under coordinate sign flips).
pub fn compass_ascent<F>(start: &[f64], start_value: f64, cfg: &CompassConfig, orthant: bool, mut f: F) -> Ascent
where
    F: FnMut(&[f64]) -> f64,
{
    let mut point = start.to_vec();
    let mut value = start_value;
    let mut evals = 0;
    if point.len() < 2 {
        return Ascent { point, value, evals };
    }
    let mut step = cfg.step_init;
    let mut iters = 0;
    let mut failures = 0;
    let mut rng = stream_rng(0x9011, 0);
    while step >= cfg.step_min && iters < cfg.max_iters {
        let mut basis = orthonormal_complement(&point);
        if failures > 0 {
            // random orthonormal frame of the tangent space, so ridges of
            // nonsmooth objectives are not invisible to a fixed poll set
            basis = rotated_frame(&basis, &mut rng);
        }
        let mut best: Option<(Vec<f64>, f64)> = None;
        for b in &basis {
            for sign in [1.0, -1.0] {
                let raw: Vec<f64> = point.iter().zip(b).map(|(p, d)| p + sign * step * d).collect();
                let Some(mut cand) = normalized(&raw) else { continue };
                if orthant {
                    cand.iter_mut().for_each(|c| *c = c.abs());
                }
                let v = f(&cand);
                evals += 1;
                if v.is_finite() && v > best.as_ref().map_or(value, |(_, bv)| *bv) {
                    best = Some((cand, v));
                }
            }
        }
        match best {
            Some((p, v)) => {
                point = p;
                value = v;
                failures = 0;
                iters += 1;
            }
            None if failures < cfg.rotations && point.len() > 2 => failures += 1,
            None => {
                failures = 0;
                step *= 0.5;
                iters += 1;
            }
        }
    }
    Ascent { point, value, evals }
}

fn rotated_frame(basis: &[Vec<f64>], rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let k = basis.len();
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(k);
    while out.len() < k {
        let coeffs: Vec<f64> = (0..k).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let mut v = vec![0.0; basis[0].len()];
        for (c, b) in coeffs.iter().zip(basis) {
            v.iter_mut().zip(b).for_each(|(x, y)| *x += c * y);
        }
        for u in &out {
            let d = dot(&v, u);
            v.iter_mut().zip(u).for_each(|(x, y)| *x -= d * y);
        }
        if let Some(v) = normalized(&v) {
            out.push(v);
        }
    }
    out
}

/// Lexicographic comparison used as a deterministic tie-break between maxima.
pub fn lex_less(a: &[f64], b: &[f64]) -> bool {
    for (x, y) in a.iter().zip(b) {
        if x < y {
            return true;
        }
        if x > y {
            return false;
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complement_is_orthonormal() {
        let mut rng = stream_rng(7, 0);
        for n in 2..7 {
            for _ in 0..100 {
                let xi = random_unit(&mut rng, n);
                let basis = orthonormal_complement(&xi);
                assert_eq!(basis.len(), n - 1);
                for (i, b) in basis.iter().enumerate() {
                    assert!(dot(b, &xi).abs() < 1e-12);
                    assert!((dot(b, b) - 1.0).abs() < 1e-12);
                    for c in &basis[i + 1..] {
                        assert!(dot(b, c).abs() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn complement_ignores_sign() {
        let xi = normalized(&[0.3, -0.8, 0.2, 0.1]).unwrap();
        let neg: Vec<f64> = xi.iter().map(|x| -x).collect();
        assert_eq!(orthonormal_complement(&xi), orthonormal_complement(&neg));
    }

    #[test]
    fn seeded_directions_are_reproducible() {
        let a = seeded_directions(3, 4, 50);
        let b = seeded_directions(3, 4, 50);
        assert_eq!(a, b);
        let fresh: Vec<f64> = (0..50).flat_map(|i| random_unit(&mut stream_rng(3, i), 4)).collect();
        assert_eq!(*a, fresh);
        for row in a.chunks(4) {
            assert!((norm2(row) - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn diagonals() {
        let d = diagonal_directions(3, 100);
        assert_eq!(d.len(), 4);
        assert!(d.iter().all(|v| v[0] > 0.0 && (norm2(v) - 1.0).abs() < 1e-15));
        assert_eq!(diagonal_directions(10, 5).len(), 5);
    }

    #[test]
    fn compass_finds_linear_maximum() {
        let target = normalized(&[1.0, 2.0, -2.0]).unwrap();
        let f = |x: &[f64]| dot(x, &target);
        let start = coordinate(3, 0);
        let cfg = CompassConfig { step_min: 1e-8, ..Default::default() };
        let out = compass_ascent(&start, f(&start), &cfg, false, f);
        assert!((out.value - 1.0).abs() < 1e-10, "{}", out.value);
    }
}
