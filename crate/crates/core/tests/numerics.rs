use proptest::prelude::*;
use uqkit::numerics::{solve_spd, t_cdf, t_quantile, Matrix, RandomStream};

/// Density of Student's t with 10 degrees of freedom from closed-form gamma
/// values: Γ(5.5) = (9/2)(7/2)(5/2)(3/2)(1/2)√π and Γ(5) = 24.
fn t10_pdf(t: f64) -> f64 {
    let gamma_5_5 = 4.5 * 3.5 * 2.5 * 1.5 * 0.5 * std::f64::consts::PI.sqrt();
    let c = gamma_5_5 / ((10.0 * std::f64::consts::PI).sqrt() * 24.0);
    c * (1.0 + t * t / 10.0).powf(-5.5)
}

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let inner: f64 = (1..n)
        .map(|i| f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 })
        .sum();
    (f(a) + f(b) + inner) * h / 3.0
}

#[test]
fn t_quantile_matches_quadrature() {
    let q = t_quantile(0.975, 10.0).unwrap();
    let mass = 0.5 + simpson(t10_pdf, 0.0, q, 20_000);
    assert!((mass - 0.975).abs() < 1e-10, "mass {mass}");
    assert!((q - 2.228_138_851_986).abs() < 1e-9, "{q}");
}

#[test]
fn t_cdf_matches_quadrature() {
    for &t in &[-3.0, -0.5, 0.0, 0.7, 1.8, 4.0] {
        let mass = 0.5 + simpson(t10_pdf, 0.0, t, 20_000);
        assert!((t_cdf(t, 10.0) - mass).abs() < 1e-10, "t = {t}");
    }
}

#[test]
fn large_df_approaches_normal() {
    let q = t_quantile(0.95, 994.0).unwrap();
    assert!((q - 1.645).abs() < 0.005);
    assert!(q > 1.644_853_626_951_472_2);
}

proptest! {
    #[test]
    fn t_quantile_is_antisymmetric(p in 0.001f64..0.999, df in 1.0f64..200.0) {
        let hi = t_quantile(p, df).unwrap();
        let lo = t_quantile(1.0 - p, df).unwrap();
        prop_assert!((hi + lo).abs() <= 1e-9 * hi.abs().max(1.0));
    }

    #[test]
    fn t_quantile_inverts_cdf(p in 0.001f64..0.999, df in 1.0f64..500.0) {
        let q = t_quantile(p, df).unwrap();
        prop_assert!((t_cdf(q, df) - p).abs() < 1e-10);
    }

    #[test]
    fn t_quantile_increases_in_p(p in 0.01f64..0.98, dp in 0.001f64..0.01, df in 1.0f64..100.0) {
        prop_assert!(t_quantile(p + dp, df).unwrap() > t_quantile(p, df).unwrap());
    }

    #[test]
    fn solve_spd_residual_is_small(n in 1usize..12, seed in any::<u64>()) {
        let mut rng = RandomStream::new(seed, 0);
        let b = Matrix::new(n + 3, n, (0..(n + 3) * n).map(|_| rng.standard_normal()).collect()).unwrap();
        let mut a = b.gram();
        for i in 0..n {
            a.set(i, i, a.get(i, i) + 0.1);
        }
        let rhs = Matrix::new(n, 2, (0..2 * n).map(|_| rng.standard_normal()).collect()).unwrap();
        let x = solve_spd(&a, &rhs).unwrap();
        let resid = a.matmul(&x).unwrap().sub(&rhs).unwrap().norm_inf();
        prop_assert!(resid < 1e-9 * (1.0 + a.norm_inf() * x.norm_inf()));
    }

    #[test]
    fn streams_are_reproducible(seed in any::<u64>(), index in any::<u64>()) {
        use rand::RngCore;
        let mut a = RandomStream::new(seed, index);
        let mut b = RandomStream::new(seed, index);
        for _ in 0..8 {
            prop_assert_eq!(a.next_u64(), b.next_u64());
        }
    }
}
