use approx::assert_abs_diff_eq;
use proptest::prelude::*;
use roughkit_core::gaussian::{derive_seed, fbm_covariance, lift_path, sample_fbm, uniform_grid, CmElement, FbmSampler, PathSamples};

const M: usize = 10_000;

#[test]
fn covariance_at_one_is_one() {
    for h in [0.3, 0.4, 0.5] {
        assert_abs_diff_eq!(fbm_covariance(h, 1.0, 1.0), 1.0, epsilon = 1e-15);
    }
    // Brownian case: R(s,t) = min(s,t)
    assert_abs_diff_eq!(fbm_covariance(0.5, 0.3, 0.7), 0.3, epsilon = 1e-15);
}

#[test]
fn terminal_variance_is_one() {
    for h in [0.3, 0.4, 0.5] {
        let sampler = FbmSampler::new(h, &uniform_grid(1.0, 8)).unwrap();
        let xs: Vec<f64> = (0..M).map(|i| sampler.sample(1, 11, i as u64).values[8][0]).collect();
        let mean = xs.iter().sum::<f64>() / M as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (M as f64 - 1.0);
        // se of a sample variance of N(0,1) is sqrt(2/(M-1))
        let se = (2.0 / (M as f64 - 1.0)).sqrt();
        assert!((var - 1.0).abs() < 3.0 * se, "H = {h}: var = {var}");
    }
}

#[test]
fn brownian_increments_uncorrelated() {
    let sampler = FbmSampler::new(0.5, &uniform_grid(1.0, 4)).unwrap();
    let pairs: Vec<(f64, f64)> = (0..M)
        .map(|i| {
            let v = sampler.sample(1, 5, i as u64).values;
            (v[1][0] - v[0][0], v[3][0] - v[2][0])
        })
        .collect();
    let n = M as f64;
    let (ma, mb) = (pairs.iter().map(|p| p.0).sum::<f64>() / n, pairs.iter().map(|p| p.1).sum::<f64>() / n);
    let cov = pairs.iter().map(|p| (p.0 - ma) * (p.1 - mb)).sum::<f64>() / n;
    let va = pairs.iter().map(|p| (p.0 - ma).powi(2)).sum::<f64>() / n;
    let vb = pairs.iter().map(|p| (p.1 - mb).powi(2)).sum::<f64>() / n;
    assert!((cov / (va * vb).sqrt()).abs() < 0.05);
}

#[test]
fn same_seed_same_bits() {
    let times = uniform_grid(1.0, 32);
    let a = sample_fbm(0.4, &times, 2, 99).unwrap();
    let b = sample_fbm(0.4, &times, 2, 99).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, sample_fbm(0.4, &times, 2, 100).unwrap());
    assert_ne!(derive_seed(1, 2), derive_seed(2, 1));
}

#[test]
fn starts_at_zero_and_rejects_bad_hurst() {
    let p = sample_fbm(0.35, &uniform_grid(2.0, 16), 3, 0).unwrap();
    assert!(p.values[0].iter().all(|v| *v == 0.0));
    assert!(FbmSampler::new(0.2, &uniform_grid(1.0, 4)).is_err());
    assert!(FbmSampler::new(0.6, &uniform_grid(1.0, 4)).is_err());
    assert!(FbmSampler::new(0.4, &[0.1, 0.5]).is_err());
}

#[test]
fn self_similar_quartiles() {
    let quartiles = |t: f64| {
        let sampler = FbmSampler::new(0.4, &uniform_grid(t, 16)).unwrap();
        let mut s: Vec<f64> = (0..M).map(|i| sampler.sample(1, 21, i as u64).sup_norm() * t.powf(-0.4)).collect();
        s.sort_by(|a, b| a.total_cmp(b));
        [s[M / 4], s[M / 2], s[3 * M / 4]]
    };
    let base = quartiles(1.0);
    for t in [0.5, 2.0] {
        for (a, b) in quartiles(t).iter().zip(&base) {
            assert!((a / b - 1.0).abs() < 0.1, "T = {t}: {a} vs {b}");
        }
    }
}

#[test]
fn csv_round_trip() {
    let p = sample_fbm(0.4, &uniform_grid(1.0, 8), 2, 4).unwrap();
    let back = PathSamples::from_csv(&format!("# comment\n{}", p.to_csv())).unwrap();
    assert_eq!(back.times, p.times);
    assert_eq!(back.values, p.values);
    assert!(PathSamples::from_csv("s,x1\n0,0\n1,1\n").is_err());
    assert!(PathSamples::from_csv("t,x1\n0,0\n1\n").is_err());
}

#[test]
fn cm_norm_examples() {
    assert_eq!(CmElement::zero(0.4, 1).cm_norm().unwrap(), 0.0);
    for h in [0.3, 0.4, 0.5] {
        let e = CmElement::new(h, vec![1.0], vec![vec![1.0]]).unwrap();
        assert_abs_diff_eq!(e.cm_norm().unwrap(), 1.0, epsilon = 1e-14);
    }
    let degenerate = CmElement::new(0.4, vec![1.0, 1.0], vec![vec![1.0, -1.0]]).unwrap();
    assert_abs_diff_eq!(degenerate.cm_norm().unwrap(), 0.0, epsilon = 1e-7);
}

#[test]
fn cm_element_vanishes_at_zero() {
    let e = CmElement::new(0.4, vec![0.3, 0.8], vec![vec![1.0, -2.0], vec![0.5, 0.5]]).unwrap();
    assert!(e.eval(0.0).iter().all(|v| v.abs() < 1e-15));
    let a = e.eval(0.5);
    let b = e.eval(0.5 + 1e-9);
    assert!(a.iter().zip(&b).all(|(x, y)| (x - y).abs() < 1e-6));
}

#[test]
fn lift_refinement_is_second_order() {
    // h smooth on [0.5, 1]: knots at 0.1 and 0.25, one per component
    let h = CmElement::new(0.4, vec![0.1, 0.25], vec![vec![1.0, 0.0], vec![0.0, -0.7]]).unwrap();
    let level2 = |m: usize| {
        let times: Vec<f64> = (0..=m).map(|k| 0.5 + 0.5 * k as f64 / m as f64).collect();
        let path = h.sample_on(&times);
        let x = lift_path(&path, 2).unwrap();
        x.query(0, m).unwrap().level(2).to_vec()
    };
    let ladder: Vec<Vec<f64>> = [8, 16, 32, 64].iter().map(|m| level2(*m)).collect();
    let diff = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    let e: Vec<f64> = ladder.windows(2).map(|w| diff(&w[0], &w[1])).collect();
    for w in e.windows(2) {
        let order = (w[0] / w[1]).log2();
        assert!(order >= 1.9, "order {order}");
    }
}

proptest! {
    #[test]
    fn gram_form_nonnegative(knots in prop::collection::vec(0.01..2.0f64, 1..5), seed in 0u64..1000) {
        let r = knots.len();
        let coefs: Vec<f64> = (0..r).map(|i| ((seed + i as u64 * 7919) % 17) as f64 - 8.0).collect();
        let e = CmElement::new(0.4, knots, vec![coefs]).unwrap();
        prop_assert!(e.cm_norm().unwrap() >= 0.0);
    }

    #[test]
    fn cm_norm_homogeneous(c in -3.0..3.0f64) {
        let e = CmElement::new(0.35, vec![0.4, 0.9], vec![vec![1.0, 0.5]]).unwrap();
        let lhs = e.scaled(c).cm_norm().unwrap();
        prop_assert!((lhs - c.abs() * e.cm_norm().unwrap()).abs() < 1e-12);
    }
}
