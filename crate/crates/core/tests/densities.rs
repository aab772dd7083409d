use std::f64::consts::TAU;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use torus_needlets::{parse_density, product_density, uniform_density, wrapped_normal, MultiIndex};

#[test]
fn densities_integrate_to_one() {
    let cases = [
        uniform_density(1).unwrap(),
        uniform_density(2).unwrap(),
        wrapped_normal(0.4, 20).unwrap(),
        wrapped_normal(2.5, 20).unwrap(),
        product_density(vec![wrapped_normal(1.0, 20).unwrap(), uniform_density(1).unwrap()]).unwrap(),
    ];
    for d in &cases {
        let mass = d.quadrature_mass(256);
        assert!((mass - 1.0).abs() < 1e-10, "{d}: mass {mass}");
    }
}

#[test]
fn derivatives_match_finite_differences() {
    let wn = wrapped_normal(0.8, 20).unwrap();
    let h = 1e-4;
    for i in 0..50 {
        let t = i as f64 * TAU / 50.0;
        let f = |x: f64| wn.pdf(&[x]);
        let d1 = wn.derivative(&[t], &MultiIndex::new(vec![1]));
        let d2 = wn.derivative(&[t], &MultiIndex::new(vec![2]));
        assert!(((f(t + h) - f(t - h)) / (2.0 * h) - d1).abs() < 1e-7);
        assert!(((f(t + h) - 2.0 * f(t) + f(t - h)) / (h * h) - d2).abs() < 1e-5);
    }
    let prod = product_density(vec![wn.clone(), wrapped_normal(1.3, 20).unwrap()]).unwrap();
    let mixed = MultiIndex::new(vec![1, 1]);
    let p = [0.7, 2.1];
    let g = |a: f64, b: f64| prod.pdf(&[a, b]);
    let fd =
        (g(p[0] + h, p[1] + h) - g(p[0] + h, p[1] - h) - g(p[0] - h, p[1] + h) + g(p[0] - h, p[1] - h)) / (4.0 * h * h);
    assert!((fd - prod.derivative(&p, &mixed)).abs() < 1e-6);
}

#[test]
fn wrapped_normal_sampler_matches_its_cdf() {
    let density = wrapped_normal(1.0, 20).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let n = 20_000;
    let samples = density.sample(&mut rng, n).unwrap();
    let mut xs: Vec<f64> = samples.iter().map(|p| p[0]).collect();
    xs.sort_by(f64::total_cmp);
    let steps = 20_000;
    let dx = TAU / steps as f64;
    let mut cdf = vec![0.0; steps + 1];
    for i in 0..steps {
        let a = i as f64 * dx;
        cdf[i + 1] = cdf[i] + 0.5 * dx * (density.pdf(&[a]) + density.pdf(&[a + dx]));
    }
    let mut ks = 0.0f64;
    for (i, x) in xs.iter().enumerate() {
        let idx = ((x / dx) as usize).min(steps);
        let f = cdf[idx];
        ks = ks
            .max((f - i as f64 / n as f64).abs())
            .max((f - (i + 1) as f64 / n as f64).abs());
    }
    assert!(ks < 1.63 / (n as f64).sqrt(), "KS statistic {ks}");
}

#[test]
fn sup_norm_of_wrapped_normal_is_at_the_mode() {
    let d = wrapped_normal(1.0, 20).unwrap();
    assert!((d.sup_norm() - d.pdf(&[0.0])).abs() < 1e-9);
    assert!((uniform_density(2).unwrap().sup_norm() - 1.0 / (TAU * TAU)).abs() < 1e-15);
}

#[test]
fn density_names_parse() {
    assert!(parse_density("uniform", 3).unwrap().is_uniform());
    assert_eq!(parse_density("wrapped_normal(0.5)", 1).unwrap().dim(), 1);
    assert_eq!(
        parse_density("product(wrapped_normal(0.5), uniform)", 2).unwrap().dim(),
        2
    );
    assert!(parse_density("gamma(2)", 1).is_err());
    assert!(parse_density("wrapped_normal(-1)", 1).is_err());
    assert!(parse_density("wrapped_normal(1.0)", 2).is_err());
}

#[test]
fn wrapped_normal_is_even() {
    let d = wrapped_normal(0.7, 10).unwrap();
    for i in 0..40 {
        let t = 0.05 + i as f64 * 0.15;
        assert!((d.pdf(&[t]) - d.pdf(&[TAU - t])).abs() < 1e-12);
    }
    assert!(d.derivative(&[0.0], &MultiIndex::new(vec![1])).abs() < 1e-12);
}

#[test]
fn uniform_density_has_vanishing_coefficients() {
    use torus_needlets::{analyze, build_frame, AnalysisOptions};
    let frame = build_frame(2.0, 2, 2).unwrap();
    let u = uniform_density(2).unwrap();
    let pdf = |t: &[f64]| u.pdf(t);
    for m in [vec![0, 0], vec![1, 0], vec![1, 2]] {
        let c = analyze(&frame, &pdf, &MultiIndex::new(m), 2, AnalysisOptions::default()).unwrap();
        assert!(c.iter().all(|(_, _, v)| v.abs() < 1e-10));
    }
}
