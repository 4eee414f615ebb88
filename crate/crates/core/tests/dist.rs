use bayesc_core::dist::{sample_dirichlet_batch, BatchSpec, BatchStrategy, Concentration, Distribution, Value};
use bayesc_core::rng::{RngStream, StreamKey};
use bayesc_core::Executor;
use proptest::prelude::*;
use statrs::distribution::{Beta, ContinuousCDF, Gamma, InverseGamma, Normal, Uniform};
use statrs::function::gamma::ln_gamma;
use statrs::statistics::Distribution as _;

const DRAWS: usize = 100_000;

fn draws(d: &Distribution, seed: u64) -> Vec<Value> {
    let mut rng = RngStream::new(seed, 0, 0, 0);
    (0..DRAWS).map(|_| d.draw(&mut rng)).collect()
}

fn scalar(v: &Value) -> f64 {
    match v {
        Value::Int(i) => *i as f64,
        Value::Real(x) => *x,
        Value::Vector(_) => panic!("vector value"),
    }
}

/// Sample mean and variance each within 4 standard errors.
fn check_moments(label: &str, xs: &[f64], mean: f64, var: f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let s2 = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    let m4 = xs.iter().map(|x| (x - m).powi(4)).sum::<f64>() / n;
    let se_mean = (var / n).sqrt();
    let se_var = ((m4 - s2 * s2).max(0.0) / n).sqrt();
    assert!((m - mean).abs() < 4.0 * se_mean, "{label}: mean {m} vs {mean} (se {se_mean})");
    assert!((s2 - var).abs() < 4.0 * se_var.max(1e-12), "{label}: var {s2} vs {var} (se {se_var})");
}

/// One-sample Kolmogorov-Smirnov test at alpha = 0.001.
fn ks(label: &str, mut xs: Vec<f64>, cdf: impl Fn(f64) -> f64) {
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let d = xs
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max);
    // c(0.001) = sqrt(-ln(0.0005) / 2)
    let crit = (-(0.0005f64).ln() / 2.0).sqrt() / n.sqrt();
    assert!(d < crit, "{label}: KS statistic {d} exceeds {crit}");
}

#[test]
fn continuous_families() {
    let cases: Vec<(Distribution, Box<dyn Fn(f64) -> f64>, f64, f64)> = vec![
        {
            let o = Normal::new(1.5, 2.0).unwrap();
            (Distribution::gaussian(1.5, 4.0).unwrap(), Box::new(move |x| o.cdf(x)), o.mean().unwrap(), o.variance().unwrap())
        },
        {
            // shape 2.5, scale 0.5
            let o = Gamma::new(2.5, 2.0).unwrap();
            (Distribution::gamma(2.5, 0.5).unwrap(), Box::new(move |x| o.cdf(x)), o.mean().unwrap(), o.variance().unwrap())
        },
        {
            let o = Gamma::new(0.3, 1.0).unwrap();
            (Distribution::gamma(0.3, 1.0).unwrap(), Box::new(move |x| o.cdf(x)), o.mean().unwrap(), o.variance().unwrap())
        },
        {
            let o = InverseGamma::new(5.0, 2.0).unwrap();
            (Distribution::inverse_gamma(5.0, 2.0).unwrap(), Box::new(move |x| o.cdf(x)), o.mean().unwrap(), o.variance().unwrap())
        },
        {
            let o = Beta::new(2.0, 5.0).unwrap();
            (Distribution::beta(2.0, 5.0).unwrap(), Box::new(move |x| o.cdf(x)), o.mean().unwrap(), o.variance().unwrap())
        },
        {
            let o = Beta::new(0.5, 0.5).unwrap();
            (Distribution::beta(0.5, 0.5).unwrap(), Box::new(move |x| o.cdf(x)), o.mean().unwrap(), o.variance().unwrap())
        },
        {
            let o = Uniform::new(-1.0, 3.0).unwrap();
            (Distribution::uniform(-1.0, 3.0).unwrap(), Box::new(move |x| o.cdf(x)), o.mean().unwrap(), o.variance().unwrap())
        },
    ];
    for (i, (d, cdf, mean, var)) in cases.into_iter().enumerate() {
        let xs: Vec<f64> = draws(&d, 100 + i as u64).iter().map(scalar).collect();
        let label = format!("{d:?}");
        check_moments(&label, &xs, mean, var);
        ks(&label, xs, cdf);
    }
}

#[test]
fn discrete_families() {
    let xs: Vec<f64> = draws(&Distribution::bernoulli(0.3).unwrap(), 7).iter().map(scalar).collect();
    check_moments("bernoulli", &xs, 0.3, 0.21);
    let probs = [0.1, 0.2, 0.3, 0.4];
    let mean: f64 = probs.iter().enumerate().map(|(i, p)| i as f64 * p).sum();
    let var: f64 = probs.iter().enumerate().map(|(i, p)| (i as f64 - mean).powi(2) * p).sum();
    let xs: Vec<f64> = draws(&Distribution::categorical(probs.to_vec()).unwrap(), 8).iter().map(scalar).collect();
    check_moments("categorical", &xs, mean, var);
}

#[test]
fn dirichlet_components() {
    let alpha = [2.0, 3.0, 4.0];
    let s: f64 = alpha.iter().sum();
    let values = draws(&Distribution::dirichlet(alpha.to_vec()).unwrap(), 9);
    for (k, a) in alpha.iter().enumerate() {
        let xs: Vec<f64> = values
            .iter()
            .map(|v| match v {
                Value::Vector(x) => x[k],
                _ => unreachable!(),
            })
            .collect();
        let mean = a / s;
        check_moments("dirichlet", &xs, mean, mean * (1.0 - mean) / (s + 1.0));
    }
}

#[test]
fn uniform_dirichlet_and_unit_gamma_means() {
    let values = draws(&Distribution::dirichlet(vec![1.0; 3]).unwrap(), 10);
    let n = DRAWS as f64;
    for k in 0..3 {
        let m = values.iter().map(|v| if let Value::Vector(x) = v { x[k] } else { 0.0 }).sum::<f64>() / n;
        // var = (1/3)(2/3)/4
        assert!((m - 1.0 / 3.0).abs() < 3.0 * (1.0 / 18.0 / n).sqrt());
    }
    let xs: Vec<f64> = draws(&Distribution::gamma(1.0, 1.0).unwrap(), 11).iter().map(scalar).collect();
    assert!((xs.iter().sum::<f64>() / n - 1.0).abs() < 3.0 / n.sqrt());
}

#[test]
fn log_pdf_examples() {
    let g = Distribution::gaussian(0.0, 1.0).unwrap().log_pdf(&Value::Real(0.0)).unwrap();
    assert!((g + 0.5 * (2.0 * std::f64::consts::PI).ln()).abs() < 1e-15);
    let b = Distribution::bernoulli(0.5).unwrap().log_pdf(&Value::Int(1)).unwrap();
    assert_eq!(b, 0.5f64.ln());
    let x: [f64; 3] = [0.2, 0.3, 0.5];
    let a = [2.0, 3.0, 4.0];
    let expect = ln_gamma(9.0) - a.iter().map(|&ai| ln_gamma(ai)).sum::<f64>()
        + x.iter().zip(&a).map(|(xi, ai)| (ai - 1.0) * xi.ln()).sum::<f64>();
    let got = Distribution::dirichlet(a.to_vec()).unwrap().log_pdf(&Value::Vector(x.to_vec())).unwrap();
    assert!((got - expect).abs() < 1e-12);
    let dg = Distribution::categorical(vec![1.0, 0.0]).unwrap();
    let mut rng = RngStream::new(1, 0, 0, 0);
    assert!((0..1000).all(|_| dg.draw(&mut rng) == Value::Int(0)));
}

fn batch(rows: usize, cols: usize, strategy: BatchStrategy, workers: usize) -> Vec<f64> {
    let alpha: Vec<f64> = (0..rows * cols).map(|i| 0.2 + (i % 7) as f64 * 0.4).collect();
    let spec = BatchSpec { rows, cols, concentration: Concentration::PerRow(alpha), strategy };
    sample_dirichlet_batch(&spec, StreamKey::new(42, 3, 5), &Executor::new(workers)).unwrap()
}

#[test]
fn batch_is_worker_and_strategy_independent() {
    let reference = batch(37, 1100, BatchStrategy::RowParallel, 1);
    for w in [1, 2, 8] {
        let row = batch(37, 1100, BatchStrategy::RowParallel, w);
        let col = batch(37, 1100, BatchStrategy::ColumnParallel, w);
        assert!(row.iter().zip(&reference).all(|(a, b)| a.to_bits() == b.to_bits()), "row, {w} workers");
        assert!(col.iter().zip(&reference).all(|(a, b)| a.to_bits() == b.to_bits()), "column, {w} workers");
    }
    for r in reference.chunks(1100) {
        assert!((r.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(r.iter().all(|&x| x > 0.0));
    }
}

#[test]
fn batch_column_means() {
    let spec = BatchSpec {
        rows: 10_000,
        cols: 3,
        concentration: Concentration::Shared(vec![2.0, 3.0, 4.0]),
        strategy: BatchStrategy::Auto,
    };
    let out = sample_dirichlet_batch(&spec, StreamKey::new(1, 0, 0), &Executor::new(2)).unwrap();
    for (k, a) in [2.0f64, 3.0, 4.0].iter().enumerate() {
        let mean = a / 9.0;
        let se = (mean * (1.0 - mean) / 10.0 / 10_000.0).sqrt();
        let m = out.chunks(3).map(|r| r[k]).sum::<f64>() / 10_000.0;
        assert!((m - mean).abs() < 3.0 * se, "column {k}: {m}");
    }
    let one = BatchSpec { rows: 1, ..spec };
    let r = sample_dirichlet_batch(&one, StreamKey::new(2, 0, 0), &Executor::new(1)).unwrap();
    assert!((r.iter().sum::<f64>() - 1.0).abs() < 1e-12);
}

#[test]
fn auto_strategy() {
    assert_eq!(BatchStrategy::Auto.resolve(20, 37276, 32), BatchStrategy::ColumnParallel);
    assert_eq!(BatchStrategy::Auto.resolve(48556, 20, 32), BatchStrategy::RowParallel);
    assert_eq!(BatchStrategy::Auto.resolve(20, 37276, 8), BatchStrategy::RowParallel);
}

#[test]
fn nonpositive_concentration_is_rejected() {
    let spec = BatchSpec {
        rows: 2,
        cols: 2,
        concentration: Concentration::Shared(vec![1.0, 0.0]),
        strategy: BatchStrategy::RowParallel,
    };
    assert!(sample_dirichlet_batch(&spec, StreamKey::new(0, 0, 0), &Executor::new(1)).is_err());
}

fn family() -> impl Strategy<Value = Distribution> {
    let pos = || 0.05f64..20.0;
    prop_oneof![
        (1usize..8).prop_flat_map(move |k| proptest::collection::vec(0.05f64..10.0, k))
            .prop_map(|a| Distribution::dirichlet(a).unwrap()),
        proptest::collection::vec(0.0f64..1.0, 1..8).prop_filter_map("zero mass", |w| {
            let s: f64 = w.iter().sum();
            (s > 0.0).then(|| Distribution::categorical(w.iter().map(|x| x / s).collect()).unwrap())
        }),
        (-100.0f64..100.0, 1e-3f64..100.0).prop_map(|(m, v)| Distribution::gaussian(m, v).unwrap()),
        (pos(), pos()).prop_map(|(a, b)| Distribution::inverse_gamma(a, b).unwrap()),
        (pos(), pos()).prop_map(|(a, b)| Distribution::gamma(a, b).unwrap()),
        (pos(), pos()).prop_map(|(a, b)| Distribution::beta(a, b).unwrap()),
        (0.0f64..=1.0).prop_map(|p| Distribution::bernoulli(p).unwrap()),
        (-50.0f64..50.0, 1e-3f64..50.0).prop_map(|(lo, w)| Distribution::uniform(lo, lo + w).unwrap()),
    ]
}

proptest! {
    #[test]
    fn draws_lie_in_support(d in family(), seed in any::<u64>()) {
        let mut rng = RngStream::new(seed, 0, 0, 0);
        for _ in 0..50 {
            let x = d.draw(&mut rng);
            let lp = d.log_pdf(&x).unwrap();
            prop_assert!(lp > f64::NEG_INFINITY, "{:?} drew {:?}", d, x);
        }
    }
}
