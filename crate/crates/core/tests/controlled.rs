use std::sync::Arc;

use rand::Rng;
use roughkit_core::controlled::{
    compose_linear_g, composed_remainder, shift, ControlledPath, GCoefficient, GOperator, NormKind, ScaleParams, Variant,
};
use roughkit_core::controls::rough_path_controls;
use roughkit_core::gaussian::{lift_path, rng_for, sample_fbm, uniform_grid};
use roughkit_core::spectral::{SpectralElement, SpectralScale};
use roughkit_core::tensor::RoughPathGrid;
use roughkit_core::Execution;

const PARAMS: ScaleParams = ScaleParams { alpha: 0.0, sigma: 0.05, gamma: 0.3, p: 0.25 };
const SEQ: Execution = Execution::Sequential;

fn fbm(cells: usize, depth: usize, seed: u64) -> Arc<RoughPathGrid> {
    Arc::new(lift_path(&sample_fbm(0.4, &uniform_grid(1.0, cells), 2, seed).unwrap(), depth).unwrap())
}

fn random_path(variant: Variant, depth: usize, x: Arc<RoughPathGrid>, k: usize, seed: u64) -> ControlledPath {
    let scale = Arc::new(SpectralScale::heat(k).unwrap());
    let cells = x.len();
    let mut rng = rng_for(seed, 0);
    ControlledPath::from_fn(variant, PARAMS, depth, scale, x, 0, cells, |_, _, out| {
        for (m, v) in out.iter_mut().enumerate() {
            *v = rng.random_range(-1.0..1.0) / (1.0 + (m % k) as f64).powi(2);
        }
    })
    .unwrap()
}

// ξ^j_u ∘ Π^{j-i}(X)_{u,v} written with explicit multi-indices.
fn contraction(xi: &ControlledPath, i: usize, j: usize, u: usize, v: usize) -> Vec<f64> {
    let d = xi.dim();
    let k = xi.modes();
    let pi = xi.driver().query(u, v).unwrap().level(j - i).to_vec();
    let tail = d.pow(xi.rank(i) as u32) * k;
    let src = xi.value(j, u);
    let mut out = vec![0.0; tail];
    for (lead, c) in pi.iter().enumerate() {
        for (m, o) in out.iter_mut().enumerate() {
            *o += c * src[lead * tail + m];
        }
    }
    out
}

#[test]
fn remainder_identity_matches_independent_expansion() {
    for variant in [Variant::D, Variant::Tilde] {
        let xi = random_path(variant, 3, fbm(16, 3, 4), 4, 9);
        let mut rng = rng_for(10, 0);
        for _ in 0..30 {
            let u = rng.random_range(0..16);
            let v = rng.random_range(u..=16);
            for i in 0..3 {
                for l in i + 1..=3 {
                    let mut expect: Vec<f64> = xi.value(i, v).iter().zip(xi.value(i, u)).map(|(a, b)| a - b).collect();
                    for j in i + 1..l {
                        for (e, c) in expect.iter_mut().zip(contraction(&xi, i, j, u, v)) {
                            *e -= c;
                        }
                    }
                    let got = xi.remainder(i, l, u, v).unwrap();
                    assert!(got.iter().zip(&expect).all(|(a, b)| (a - b).abs() < 1e-12));
                }
            }
        }
        assert!(xi.remainder(3, 4, 0, 1).is_err());
        assert!(xi.remainder(0, 1, 2, 1).is_err());
    }
}

#[test]
fn consecutive_remainder_is_increment() {
    let xi = random_path(Variant::Tilde, 2, fbm(8, 2, 1), 3, 2);
    let r = xi.remainder(0, 1, 2, 7).unwrap();
    let inc: Vec<f64> = xi.value(0, 7).iter().zip(xi.value(0, 2)).map(|(a, b)| a - b).collect();
    assert_eq!(r, inc);
}

#[test]
fn zero_and_constant_paths() {
    let scale = Arc::new(SpectralScale::heat(4).unwrap());
    let x = fbm(8, 2, 3);
    let zero = ControlledPath::zeros(Variant::D, PARAMS, 2, scale.clone(), x, 0, 8).unwrap();
    let n = zero.controlled_norm(0, 8, SEQ).unwrap();
    assert!(n.items.iter().all(|it| it.value == 0.0));

    let flat = Arc::new(RoughPathGrid::unit_path(uniform_grid(1.0, 8), 2, 2).unwrap());
    let c = ControlledPath::from_fn(Variant::D, PARAMS, 2, scale, flat, 0, 8, |j, _, out| out.fill(1.0 + j as f64)).unwrap();
    let n = c.controlled_norm(0, 8, SEQ).unwrap();
    for it in &n.items {
        assert_eq!(it.value > 0.0, it.kind == NormKind::Sup, "{it:?}");
    }
    assert!((n.total - n.items.iter().map(|i| i.value).sum::<f64>()).abs() < 1e-12);
}

#[test]
fn perfect_expansion_has_no_higher_remainder() {
    let scale = Arc::new(SpectralScale::heat(3).unwrap());
    let x = fbm(32, 2, 5);
    let lvl1 = x.level1_path();
    let xi = ControlledPath::from_fn(Variant::Tilde, PARAMS, 2, scale, x, 0, 32, |j, tau, out| {
        out.fill(0.0);
        if j == 0 {
            out[0] = lvl1[tau][0] + lvl1[tau][1];
        } else {
            out[0] = 1.0;
            out[3] = 1.0;
        }
    })
    .unwrap();
    for (u, v) in [(0, 32), (3, 17), (10, 11)] {
        assert!(xi.remainder(0, 2, u, v).unwrap().iter().all(|r| r.abs() < 1e-14));
    }
    let n = xi.controlled_norm(0, 32, SEQ).unwrap();
    assert!(n.get(NormKind::Kind1, 0, 2).unwrap() < 1e-12);
    assert!(n.get(NormKind::Kind2, 0, 2).unwrap() < 1e-12);
    assert_eq!(n.get(NormKind::Consecutive, 1, 2), Some(0.0));
    // R^{0,1} = δξ⁰ is the increment of the path itself and stays in the norm
    assert!(n.get(NormKind::Consecutive, 0, 1).unwrap() > 0.0);
}

#[test]
fn norm_is_homogeneous_and_subadditive() {
    let x = fbm(16, 2, 6);
    for s in 0..4 {
        let a = random_path(Variant::Tilde, 2, x.clone(), 4, 100 + s);
        let b = random_path(Variant::Tilde, 2, x.clone(), 4, 200 + s);
        let (na, nb) = (a.norm(SEQ).unwrap(), b.norm(SEQ).unwrap());
        let scaled = a.scaled(-2.5).norm(SEQ).unwrap();
        assert!((scaled - 2.5 * na).abs() < 1e-10 * na);
        let sum = a.combine(1.0, &b, 1.0).unwrap().norm(SEQ).unwrap();
        assert!(sum <= (na + nb) * (1.0 + 1e-12));
    }
}

#[test]
fn parallel_norm_matches_sequential() {
    let xi = random_path(Variant::D, 3, fbm(24, 3, 8), 5, 3);
    assert_eq!(xi.controlled_norm(0, 24, SEQ).unwrap(), xi.controlled_norm(0, 24, Execution::Parallel).unwrap());
}

#[test]
fn last_kind_two_maps_to_consecutive() {
    let xi = random_path(Variant::D, 2, fbm(8, 2, 2), 3, 4);
    let rc = xi.remainder_controls(0, 8, SEQ).unwrap();
    assert_eq!(rc.table(NormKind::Kind2, 1, 2), rc.table(NormKind::Consecutive, 1, 2));
    assert!(rc.table(NormKind::Kind2, 1, 2).is_some());
    assert_eq!(rc.power(NormKind::Kind2, 0, 2), Some(2.0 * (0.3 - 0.25)));
}

#[test]
fn norm_csv_rows() {
    let xi = random_path(Variant::D, 2, fbm(4, 2, 2), 2, 4);
    let csv = xi.controlled_norm(0, 4, SEQ).unwrap().to_csv();
    assert!(csv.starts_with("kind,i,l,value\nsup,0,0,"));
    assert!(csv.contains("\nremainder1,0,2,"));
    assert!(csv.trim_end().lines().last().unwrap().starts_with("total,,,"));
}

#[test]
fn composition_remainder_identity() {
    let xi = random_path(Variant::Tilde, 2, fbm(32, 2, 11), 4, 12);
    let g = GOperator::standard(2, 0.05, 0.7);
    let comp = compose_linear_g(&g, &xi).unwrap();
    assert_eq!(comp.variant(), Variant::D);
    let mut rng = rng_for(13, 0);
    for _ in 0..50 {
        let u = rng.random_range(0..32);
        let v = rng.random_range(u..=32);
        for (i, l) in [(0, 1), (0, 2), (1, 2)] {
            let a = comp.remainder(i, l, u, v).unwrap();
            let b = composed_remainder(&g, &xi, i, l, u, v).unwrap();
            assert!(a.iter().zip(&b).all(|(p, q)| (p - q).abs() < 1e-10));
        }
    }
}

#[test]
fn composition_bounded_by_operator_constant() {
    let x = fbm(16, 2, 14);
    let g = GOperator::new(2, 0.05, GCoefficient::Constant(vec![0.6, -1.3])).unwrap();
    for s in 0..20 {
        let xi = random_path(Variant::Tilde, 2, x.clone(), 4, 300 + s);
        let lhs = compose_linear_g(&g, &xi).unwrap().norm(SEQ).unwrap();
        assert!(lhs <= g.bound() * xi.norm(SEQ).unwrap() * (1.0 + 1e-12));
    }
    let scalar = GOperator::new(1, 0.0, GCoefficient::Constant(vec![2.0])).unwrap();
    assert_eq!(scalar.bound(), 2.0);
    assert!(compose_linear_g(&g, &random_path(Variant::D, 2, x, 2, 1)).is_err());
}

#[test]
fn g_iterates() {
    let scale = Arc::new(SpectralScale::heat(3).unwrap());
    let z = SpectralElement::new(scale.clone(), vec![1.0, -2.0, 0.5]).unwrap();
    let g = GOperator::new(2, 0.0, GCoefficient::Constant(vec![1.5, 1.5])).unwrap();
    for k in 1..=3 {
        let f = g.gk_iterate(&z, k, 0.3, 3).unwrap();
        assert_eq!(f.len(), 2usize.pow(k as u32) * 3);
        for blk in f.chunks(3) {
            for (a, b) in blk.iter().zip(z.coefs()) {
                assert!((a - 1.5f64.powi(k as i32) * b).abs() < 1e-14);
            }
        }
    }
    assert!(g.gk_iterate(&z, 0, 0.0, 3).is_err());
    assert!(g.gk_iterate(&z, 4, 0.0, 3).is_err());

    // nested evaluation: G^{∘2}(z)(e_a ⊗ e_b) = G(G(z)(e_a))(e_b)
    let g = GOperator::standard(2, 0.1, 1.0);
    let t = 0.37;
    let two = g.gk_iterate(&z, 2, t, 3).unwrap();
    let once = g.apply_once(t, &scale, z.coefs());
    assert_eq!(g.gk_iterate(&z, 1, t, 3).unwrap(), once);
    for a in 0..2 {
        let inner = g.apply_once(t, &scale, &once[a * 3..(a + 1) * 3]);
        for b in 0..2 {
            assert_eq!(&two[(a * 2 + b) * 3..(a * 2 + b + 1) * 3], &inner[b * 3..(b + 1) * 3]);
        }
    }
}

#[test]
fn g_time_holder_quotient() {
    let scale = SpectralScale::heat(8).unwrap();
    let g = GOperator::standard(2, 0.05, 1.0);
    let z: Vec<f64> = (1..=8).map(|k| 1.0 / k as f64).collect();
    let n_gamma = 2.0 * 0.35;
    let za = scale.norm(&z, 0.0);
    let mut rng = rng_for(15, 0);
    for _ in 0..200 {
        let s: f64 = rng.random_range(0.0..1.0);
        let t = s + rng.random_range(1e-6..1.0 - s + 1e-6);
        let a = g.apply_once(t, &scale, &z);
        let b = g.apply_once(s, &scale, &z);
        let diff: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
        let q = scale.field_norm(&diff, -0.05) / ((t - s).powf(n_gamma) * za);
        assert!(q <= g.m_g(), "{q} > {}", g.m_g());
    }
}

#[test]
fn shift_aliases_levels_and_remainders() {
    let xi = random_path(Variant::D, 3, fbm(16, 3, 16), 3, 17);
    let sh = shift(&xi).unwrap();
    for tau in [0, 5, 16] {
        assert_eq!(sh.level(1, tau).unwrap(), xi.value(0, tau));
        assert_eq!(sh.level(2, tau).unwrap(), xi.value(1, tau));
    }
    assert!(sh.level(0, 0).is_err());
    assert_eq!(sh.remainder(1, 3, 2, 9).unwrap(), xi.remainder(0, 2, 2, 9).unwrap());
    assert!((sh.level_index(2) - (0.0 - 2.0 * 0.3)).abs() < 1e-15);
    assert!(shift(&random_path(Variant::Tilde, 2, fbm(4, 2, 1), 2, 1)).is_err());
}

#[test]
fn shift_diagnostics_finite() {
    let x = fbm(32, 3, 18);
    let xi = random_path(Variant::D, 3, x.clone(), 3, 19);
    let xc = rough_path_controls(&x, 0.3, 0.25, SEQ).unwrap();
    let diag = shift(&xi).unwrap().diagnostics(&xc, 0, 32, SEQ).unwrap();
    assert!(diag.iter().any(|d| d.item == "I"));
    assert!(diag.iter().any(|d| d.item == "IV"));
    for d in diag {
        assert!(d.lhs.is_finite() && d.rhs.is_finite() && d.ratio().is_finite(), "{d:?}");
    }
}
