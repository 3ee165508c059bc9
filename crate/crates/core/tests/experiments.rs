use rand::Rng;
use rand_distr::{Distribution, Exp1};
use roughkit_core::experiments::{
    fit_tail, initial_directions, jackknife_moment, run_mc_greedy_tail, run_mc_solution_moments, run_single, tail_report, ExperimentConfig, Stage,
};
use roughkit_core::gaussian::rng_for;
use roughkit_core::{Execution, RoughError};

const SEQ: Execution = Execution::Sequential;

fn field_of(e: RoughError) -> String {
    match e {
        RoughError::Config { field, .. } => field,
        other => panic!("expected a config error, got {other:?}"),
    }
}

#[test]
fn parse_defaults_and_overrides() {
    let c = ExperimentConfig::parse("# comment\nhurst = 0.45\n\ngrid=64  # inline\nmoments = 1, 3\npolicy = strict\n").unwrap();
    assert_eq!(c.hurst, 0.45);
    assert_eq!(c.grid, 64);
    assert_eq!(c.moments, vec![1.0, 3.0]);
    assert_eq!(c.gamma, ExperimentConfig::default().gamma);
    assert!((c.gamma_prime() - 0.94).abs() < 1e-12);
    assert!((ExperimentConfig::default().gamma_prime() - 0.89).abs() < 1e-12);
}

#[test]
fn config_errors_name_the_field() {
    assert_eq!(field_of(ExperimentConfig::parse("gamma = abc").unwrap_err()), "gamma");
    assert_eq!(field_of(ExperimentConfig::parse("colour = red").unwrap_err()), "colour");
    assert_eq!(field_of(ExperimentConfig::parse("rate = wild").unwrap_err()), "rate");
    assert!(matches!(ExperimentConfig::parse("hurst 0.4"), Err(RoughError::Parse { line: 1, .. })));

    let mut c = ExperimentConfig::default();
    c.hurst = 0.6;
    assert_eq!(field_of(c.validate(false).unwrap_err()), "hurst");
    let mut c = ExperimentConfig::default();
    c.gamma = 0.45;
    c.p = 0.3;
    assert_eq!(field_of(c.validate(false).unwrap_err()), "gamma");
    let mut c = ExperimentConfig::default();
    c.gamma_prime = Some(0.7);
    assert!(c.validate(false).is_ok());
    assert_eq!(field_of(c.validate(true).unwrap_err()), "gamma_prime");
    let mut c = ExperimentConfig::default();
    c.moments = vec![12.0];
    assert_eq!(field_of(c.validate(false).unwrap_err()), "moments");
}

#[test]
fn content_hash_tracks_values() {
    let a = ExperimentConfig::default();
    assert_eq!(a.content_hash().unwrap(), ExperimentConfig::default().content_hash().unwrap());
    assert_eq!(a.content_hash().unwrap().len(), 64);
    let mut b = ExperimentConfig::default();
    b.seed = 1;
    assert_ne!(a.content_hash().unwrap(), b.content_hash().unwrap());
    let h = a.header().unwrap();
    assert!(h.starts_with("# hurst = 0.4\n"));
    assert!(h.lines().last().unwrap().starts_with("# hash = "));
}

#[test]
fn initial_data_on_the_sphere() {
    let c = ExperimentConfig::default();
    let sc = c.scale().unwrap();
    for alpha in [0.0, 0.3] {
        let dirs = initial_directions(&sc, alpha, 2.0);
        assert_eq!(dirs.len(), 4);
        assert!(dirs.iter().all(|y| (sc.norm(y, alpha) - 2.0).abs() < 1e-12));
    }
}

#[test]
fn tail_fit_recovers_stretched_exponent() {
    // P(V > n) = exp(-c n^b), V = (E / c)^{1/b}
    let (c, b) = (0.05, 1.22);
    let mut rng = rng_for(31, 0);
    let values: Vec<f64> = (0..20_000)
        .map(|_| {
            let e: f64 = Exp1.sample(&mut rng);
            (e / c).powf(1.0 / b)
        })
        .collect();
    let thresholds: Vec<f64> = (1..=30).map(|n| n as f64).collect();
    let (slope, intercept, bins) = fit_tail(&values, &thresholds).unwrap();
    assert!((slope - b).abs() < 0.05, "{slope}");
    assert!((intercept - c.ln()).abs() < 0.2, "{intercept}");
    assert!(bins >= 3);
    let r = tail_report(&values, thresholds, b, 1);
    let f = r.fit.unwrap();
    assert!(f.ci_lo <= b && b <= f.ci_hi, "{f:?}");
}

#[test]
fn degenerate_tail() {
    let r = tail_report(&[3.0; 500], vec![1.0, 2.0, 3.0, 4.0], 1.22, 0);
    assert!(r.degenerate);
    assert_eq!(r.fit_csv(), "slope,intercept,ci_lo,ci_hi,target\nNaN,NaN,NaN,NaN,1.22\n");
    assert_eq!(r.p_hat, vec![1.0, 1.0, 0.0, 0.0]);
    assert!(r.tail_csv().starts_with("n,p_hat,se\n1,1,0\n"));
    assert!(r.svg("t").starts_with("<svg"));
}

#[test]
fn jackknife_of_the_mean_is_the_standard_error() {
    let mut rng = rng_for(2, 0);
    let v: Vec<f64> = (0..300).map(|_| rng.random_range(0.0..3.0)).collect();
    let row = jackknife_moment(&v, 1.0);
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let s2 = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    assert!((row.moment - mean).abs() < 1e-12);
    assert!((row.jackknife_se - (s2 / n).sqrt()).abs() < 1e-12);
    let sq = jackknife_moment(&v, 2.0);
    assert!((sq.moment - v.iter().map(|x| x * x).sum::<f64>() / n).abs() < 1e-12);
}

#[test]
fn greedy_tail_run_is_deterministic() {
    let mut c = ExperimentConfig::default();
    c.samples = 8;
    c.grid = 32;
    let a = run_mc_greedy_tail(&c, SEQ).unwrap();
    let b = run_mc_greedy_tail(&c, Execution::Parallel).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.counts.len(), 8);
    assert!(a.counts.iter().all(|n| (1..=32).contains(n)));
}

#[test]
fn moments_without_noise_equal_powers_of_rho() {
    // heat flow contracts, so sup_τ |φ_τ|_0 = |y|_0 = ρ
    let mut c = ExperimentConfig::parse("g_amplitude = 0\nf_amplitude = 0\nrate = heat\nchi = 0.02\nsamples = 6\ngrid = 32\nmodes = 8\nrho = 1.5").unwrap();
    let run = run_mc_solution_moments(&c, SEQ).unwrap();
    assert_eq!(run.failures, 0);
    assert!(run.sup_norms.iter().all(|s| (s - 1.5).abs() < 1e-12));
    for row in &run.moments {
        assert!((row.moment - 1.5f64.powf(row.q)).abs() < 1e-10);
        assert!(row.jackknife_se < 1e-10);
    }
    c.chi = 0.2;
    assert_eq!(field_of(run_mc_solution_moments(&c, SEQ).unwrap_err()), "chi");
}

#[test]
fn stages_write_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = ExperimentConfig::parse("grid = 32\nmodes = 8\nchi = 0.02\nsamples = 4").unwrap();
    for stage in [Stage::Lift, Stage::Control, Stage::Integrate, Stage::Solve, Stage::Translate, Stage::GreedyTail, Stage::Moments] {
        c.out = dir.path().join(stage.name()).join("a");
        let first = run_single(&c, stage, SEQ).unwrap();
        c.out = dir.path().join(stage.name()).join("b");
        let second = run_single(&c, stage, SEQ).unwrap();
        assert_eq!(first.len(), second.len());
        for (p, q) in first.iter().zip(&second) {
            assert_eq!(std::fs::read(p).unwrap(), std::fs::read(q).unwrap(), "{}", p.display());
            if p.extension().is_some_and(|e| e == "csv") {
                let text = std::fs::read_to_string(p).unwrap();
                assert!(text.starts_with("# hurst = 0.4\n"));
                assert!(text.contains("# hash = "));
            }
        }
    }
}

#[test]
fn path_file_replaces_sampling() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("path.csv");
    std::fs::write(&file, "t,x1,x2\n0,0,0\n0.5,1,0\n1,1,1\n").unwrap();
    let mut c = ExperimentConfig::default();
    c.path_file = Some(file.clone());
    let p = c.driver_path().unwrap();
    assert_eq!(p.values, vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![1.0, 1.0]]);
    let h1 = c.content_hash().unwrap();
    std::fs::write(&file, "t,x1,x2\n0,0,0\n0.5,2,0\n1,1,1\n").unwrap();
    assert_ne!(h1, c.content_hash().unwrap());
}
