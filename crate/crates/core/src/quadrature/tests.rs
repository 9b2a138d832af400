use approx::assert_relative_eq;
use nalgebra::dmatrix;
use statrs::function::gamma::ln_gamma;
use std::f64::consts::PI;

use super::*;
use crate::bodies::DiagonalMap;

/// `|B_p^n| = 2^n Γ(1+1/p)^n / Γ(1+n/p)`, evaluated through log-Γ.
fn lp_volume_oracle(n: usize, p: f64) -> f64 {
    let nf = n as f64;
    if p.is_infinite() {
        return 2f64.powi(n as i32);
    }
    (nf * 2f64.ln() + nf * ln_gamma(1.0 + 1.0 / p) - ln_gamma(1.0 + nf / p)).exp()
}

fn det() -> QuadScheme {
    QuadScheme::deterministic()
}

#[test]
fn body_examples() {
    let leb3 = Density::lebesgue(3);
    let v = integrate_body(&StarBody::euclidean_ball(3), &leb3, &det()).unwrap();
    assert_relative_eq!(v.value, 4.0 * PI / 3.0, max_relative = 1e-6);
    assert!((v.value - 4.18879).abs() < 1e-5);
    let v = volume(&StarBody::cross_polytope(4), &det()).unwrap();
    assert_relative_eq!(v.value, 2.0 / 3.0, max_relative = 1e-6);
    // radial power alpha = 2 over the unit disc: ∫_0^{2π} ∫_0^1 r^3 dr dφ = π/2
    let rp = Density::radial_power(2, 2.0).unwrap();
    let v = integrate_body(&StarBody::euclidean_ball(2), &rp, &det()).unwrap();
    assert_relative_eq!(v.value, PI / 2.0, max_relative = 1e-6);
    // Gaussian mass of the disc of radius R is 1 - exp(-R^2/2)
    let g = Density::gaussian(2, 1.0).unwrap();
    let disc = StarBody::euclidean_ball(2).scaled(1.7).unwrap();
    let v = integrate_body(&disc, &g, &det()).unwrap();
    assert_relative_eq!(v.value, 1.0 - (-1.7f64 * 1.7 / 2.0).exp(), max_relative = 1e-6);
}

#[test]
fn closed_form_lp_volumes() {
    for n in 2..=4 {
        for p in [1.0, 2.0] {
            let est = volume(&StarBody::lp_ball(n, p, None).unwrap(), &det()).unwrap();
            let want = lp_volume_oracle(n, p);
            assert_relative_eq!(est.value, want, max_relative = 1e-6);
            assert!((est.value - want).abs() <= est.err, "n={n} p={p} {est:?}");
        }
        let adaptive = QuadScheme {
            adaptive: true,
            ..det()
        };
        let est = volume(&StarBody::cube(n), &adaptive).unwrap();
        assert_relative_eq!(est.value, lp_volume_oracle(n, f64::INFINITY), max_relative = 1e-6);
    }
    assert_relative_eq!(lp_volume_oracle(3, 1.0), 4.0 / 3.0, max_relative = 1e-14);
    assert_relative_eq!(lp_volume_oracle(2, 2.0), PI, max_relative = 1e-14);
}

#[test]
fn default_rule_error_indicator_covers_kinks() {
    for n in 2..=4 {
        let est = volume(&StarBody::cube(n), &det()).unwrap();
        let want = 2f64.powi(n as i32);
        assert!((est.value - want).abs() <= est.err, "n={n} {est:?}");
        assert!(est.rel_err() < 1e-2);
    }
}

#[test]
fn lebesgue_fast_path_matches_radial_rule() {
    let body = StarBody::lp_ball(3, 1.5, Some(&[1.0, 2.0, 0.5])).unwrap();
    let fast = volume(&body, &det()).unwrap();
    let slow_density = Density::custom(3, "one", true, |_| 1.0).unwrap();
    let slow = integrate_body(&body, &slow_density, &det()).unwrap();
    assert_relative_eq!(fast.value, slow.value, max_relative = 1e-12);
}

#[test]
fn determinant_scaling() {
    let t = DiagonalMap::new(vec![2.0, 3.0]).unwrap();
    let img = StarBody::cross_polytope(2).diagonal_image(&t).unwrap();
    let v = volume(&img, &det()).unwrap();
    assert_relative_eq!(v.value, 12.0, max_relative = 1e-9);
    let grid = grid_oracle_volume(&img, &Density::lebesgue(2), 512).unwrap();
    assert!((grid.value - 12.0).abs() <= grid.err);
    for body in [StarBody::euclidean_ball(3), StarBody::lp_ball(3, 3.0, None).unwrap()] {
        let t = DiagonalMap::new(vec![0.5, 1.5, 2.0]).unwrap();
        let a = volume(&body, &det()).unwrap();
        let b = volume(&body.diagonal_image(&t).unwrap(), &det()).unwrap();
        assert_relative_eq!(b.value, t.determinant() * a.value, max_relative = a.rel_err() + b.rel_err() + 1e-12);
    }
}

#[test]
fn section_examples() {
    let leb = Density::lebesgue(3);
    let mut rng = sphere::stream_rng(12, 0);
    for _ in 0..5 {
        let xi = sphere::random_unit(&mut rng, 3);
        let s = integrate_section(&StarBody::euclidean_ball(3), &leb, &xi, &det()).unwrap();
        assert_relative_eq!(s.value, PI, max_relative = 1e-12);
    }
    let cube = StarBody::cube(3);
    let s = integrate_section(&cube, &leb, &[0.0, 0.0, 1.0], &det()).unwrap();
    assert_relative_eq!(s.value, 4.0, max_relative = 1e-12);
    let h = 0.5f64.sqrt();
    let xi = [h, h, 0.0];
    let s = integrate_section(&cube, &leb, &xi, &det()).unwrap();
    assert!((s.value - 4.0 * 2f64.sqrt()).abs() <= s.err, "{s:?}");
    assert!(s.rel_err() < 1e-3);
    let grid = grid_oracle_section(&cube, &leb, &xi, 1024).unwrap();
    assert!((grid.value - 4.0 * 2f64.sqrt()).abs() <= grid.err, "{grid:?}");
    assert!((grid.value - s.value).abs() <= grid.err);
}

#[test]
fn section_preconditions() {
    let b = StarBody::euclidean_ball(3);
    let leb = Density::lebesgue(3);
    assert!(matches!(integrate_section(&b, &leb, &[1.0, 1.0, 0.0], &det()), Err(Error::Usage(_))));
    assert!(integrate_section(&StarBody::euclidean_ball(1), &Density::lebesgue(1), &[1.0], &det()).is_err());
    assert!(integrate_section(&b, &Density::lebesgue(2), &[1.0, 0.0, 0.0], &det()).is_err());
    assert!(hyperplane_basis(&[0.6, 0.8]).is_ok());
    assert!(hyperplane_basis(&[0.6, 0.81]).is_err());
}

#[test]
fn two_dimensional_sections_are_segments() {
    let bx = StarBody::aligned_box(&[2.0, 3.0]).unwrap();
    let g = Density::gaussian(2, 1.0).unwrap();
    // segment {0} x [-3, 3]: ∫ e^{-t²/2} / (2π) dt = erf(3/√2) / √(2π)
    let s = integrate_section(&bx, &g, &[1.0, 0.0], &det()).unwrap();
    let erf3 = statrs::function::erf::erf(3.0 / 2f64.sqrt());
    assert_relative_eq!(s.value, erf3 / (2.0 * PI).sqrt(), max_relative = 1e-10);
}

#[test]
fn hyperplane_basis_is_orthonormal() {
    let basis = hyperplane_basis(&[1.0, 0.0, 0.0]).unwrap();
    assert_eq!(basis.len(), 2);
    for b in &basis {
        assert!(b[0].abs() < 1e-15);
    }
    let mut rng = sphere::stream_rng(13, 0);
    for _ in 0..100 {
        let xi = sphere::random_unit(&mut rng, 4);
        let mut all = hyperplane_basis(&xi).unwrap();
        all.push(xi);
        for (i, a) in all.iter().enumerate() {
            for (j, b) in all.iter().enumerate() {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((sphere::dot(a, b) - want).abs() <= 1e-12);
            }
        }
    }
}

#[test]
fn section_sign_symmetry() {
    let body = StarBody::lp_ball(4, 1.5, None)
        .unwrap()
        .linear_image(&dmatrix![1.0, 0.3, 0.0, 0.0; 0.0, 1.0, 0.0, 0.2; 0.0, 0.0, 1.0, 0.0; 0.1, 0.0, 0.0, 1.0])
        .unwrap();
    let g = Density::exp_l1(4);
    let mut rng = sphere::stream_rng(14, 0);
    for scheme in [det(), QuadScheme::monte_carlo(2000, 5)] {
        for _ in 0..5 {
            let xi = sphere::random_unit(&mut rng, 4);
            let neg: Vec<f64> = xi.iter().map(|v| -v).collect();
            let a = integrate_section(&body, &g, &xi, &scheme).unwrap();
            let b = integrate_section(&body, &g, &neg, &scheme).unwrap();
            assert!((a.value - b.value).abs() <= 1e-12 * a.value.abs());
        }
    }
}

#[test]
fn deterministic_refuses_high_dimension() {
    let b = StarBody::cross_polytope(5);
    assert!(matches!(volume(&b, &det()), Err(Error::Usage(_))));
    // sections of a 5-dimensional body live on S^3 and are fine
    let s = integrate_section(&b, &Density::lebesgue(5), &sphere::coordinate(5, 0), &det()).unwrap();
    assert_relative_eq!(s.value, 2f64.powi(4) / 24.0, max_relative = 1e-6);
}

#[test]
fn monte_carlo_agrees_with_deterministic() {
    let densities = [
        Density::lebesgue(4),
        Density::gaussian(4, 1.0).unwrap(),
        Density::exp_l1(4),
        Density::radial_power(4, 2.0).unwrap(),
    ];
    let bodies = [
        StarBody::cross_polytope(4),
        StarBody::euclidean_ball(4),
        StarBody::cube(4),
        StarBody::lp_ball(4, 3.0, Some(&[1.0, 1.5, 0.5, 2.0])).unwrap(),
    ];
    let mc = QuadScheme::monte_carlo(20_000, 99);
    for body in &bodies {
        for d in &densities {
            let a = integrate_body(body, d, &det()).unwrap();
            let b = integrate_body(body, d, &mc).unwrap();
            assert!(
                (a.value - b.value).abs() <= 4.0 * b.err + a.err,
                "{} {}: det {a:?} mc {b:?}",
                body.label(),
                d.label()
            );
        }
    }
}

#[test]
fn monte_carlo_is_reproducible_and_high_dimensional() {
    let b = StarBody::cross_polytope(7);
    let s = QuadScheme::monte_carlo(50_000, 3);
    let a = volume(&b, &s).unwrap();
    let again = volume(&b, &s).unwrap();
    assert_eq!(a, again);
    let want = crate::constants::cross_polytope_volume(7);
    assert!((a.value - want).abs() <= 4.0 * a.err, "{a:?} vs {want}");
    let other = volume(&b, &s.with_seed(4)).unwrap();
    assert_ne!(a.value, other.value);
}

#[test]
fn adaptive_monte_carlo_reaches_target() {
    let s = QuadScheme {
        adaptive: true,
        target_rel_err: Some(2e-3),
        ..QuadScheme::monte_carlo(1000, 1)
    };
    let est = volume(&StarBody::cube(3), &s).unwrap();
    assert!(est.rel_err() <= 2e-3);
    assert!(est.n_evals > 1000);
}

#[test]
fn grid_oracle_examples() {
    let leb2 = Density::lebesgue(2);
    let disc = grid_oracle_volume(&StarBody::euclidean_ball(2), &leb2, 2048).unwrap();
    assert!((disc.value - PI).abs() < 5e-3);
    let b1 = grid_oracle_volume(&StarBody::cross_polytope(3), &Density::lebesgue(3), 256).unwrap();
    assert!((b1.value - 4.0 / 3.0).abs() < 2e-2);
    assert!((b1.value - 4.0 / 3.0).abs() <= b1.err);
    let bx = grid_oracle_volume(&StarBody::aligned_box(&[2.0, 3.0]).unwrap(), &leb2, 4096).unwrap();
    assert!((bx.value - 24.0).abs() < 1e-2);
    assert!(grid_oracle_volume(&StarBody::cube(4), &Density::lebesgue(4), 32).is_err());
    assert!(grid_oracle_volume(&StarBody::cube(2), &leb2, 8).is_err());
}

#[test]
fn grid_engine_through_scheme() {
    let est = volume(&StarBody::euclidean_ball(2), &QuadScheme::grid(512)).unwrap();
    assert_eq!(est.method, Method::GridOracle);
    assert!((est.value - PI).abs() <= est.err);
}

#[test]
fn estimate_arithmetic() {
    let a = Estimate {
        value: 2.0,
        err: 0.02,
        method: Method::Deterministic,
        n_evals: 3,
    };
    let b = Estimate::exact(4.0);
    let p = a.times(&b);
    assert_eq!(p.value, 8.0);
    assert_relative_eq!(p.err, 0.08);
    assert_eq!(a.plus(&b).n_evals, 3);
    assert_eq!(a.minus(&b).value, -2.0);
    assert_relative_eq!(a.minus(&b).err, 0.02);
}
