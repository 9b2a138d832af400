//! Gauss–Legendre rules.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

/// Nodes and weights of the `k`-point Gauss–Legendre rule on `[-1, 1]`.
#[derive(Clone, Debug)]
pub struct GlRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GlRule {
    fn compute(k: usize) -> Self {
        assert!(k >= 1, "Gauss-Legendre rule needs at least one node");
        let mut nodes = vec![0.0; k];
        let mut weights = vec![0.0; k];
        let kf = k as f64;
        for i in 0..k.div_ceil(2) {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (kf + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(k, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(k, x);
            if d.is_finite() {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[k - 1 - i] = x;
            weights[i] = w;
            weights[k - 1 - i] = w;
        }
        if k % 2 == 1 {
            nodes[k / 2] = 0.0;
        }
        Self { nodes, weights }
    }

    /// Shared, lazily computed rule with `k` nodes.
    pub fn get(k: usize) -> Arc<GlRule> {
        static CACHE: OnceLock<Mutex<HashMap<usize, Arc<GlRule>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(Default::default);
        cache
            .lock()
            .unwrap()
            .entry(k)
            .or_insert_with(|| Arc::new(GlRule::compute(k)))
            .clone()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Nodes and weights mapped to `[a, b]`.
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(x, w)| (mid + half * x, half * w))
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        self.mapped(a, b).map(|(x, w)| w * f(x)).sum()
    }
}

fn legendre_with_derivative(k: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for j in 2..=k {
        let jf = j as f64;
        let p2 = ((2.0 * jf - 1.0) * x * p1 - (jf - 1.0) * p0) / jf;
        p0 = p1;
        p1 = p2;
    }
    let (pk, pkm1) = if k == 0 { (1.0, 0.0) } else { (p1, p0) };
    let d = k as f64 * (x * pk - pkm1) / (x * x - 1.0);
    (pk, d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn exact_for_polynomials() {
        for k in 1..12 {
            let rule = GlRule::get(k);
            assert_relative_eq!(rule.weights.iter().sum::<f64>(), 2.0, max_relative = 1e-13);
            for deg in 0..(2 * k) {
                let got = rule.integrate(-1.0, 1.0, |x| x.powi(deg as i32));
                let want = if deg % 2 == 0 { 2.0 / (deg as f64 + 1.0) } else { 0.0 };
                assert!((got - want).abs() < 1e-13, "k={k} deg={deg} got={got}");
            }
        }
    }

    #[test]
    fn transcendental() {
        let rule = GlRule::get(20);
        let got = rule.integrate(0.0, std::f64::consts::PI, f64::sin);
        assert_relative_eq!(got, 2.0, max_relative = 1e-14);
        let big = GlRule::get(128);
        assert_relative_eq!(big.integrate(0.0, 1.0, |x| x.exp()), 1f64.exp() - 1.0, max_relative = 1e-13);
    }
}
