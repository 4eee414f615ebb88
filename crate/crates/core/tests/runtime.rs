use std::collections::HashMap;

use bayesc_core::ir::{compile, eval_log_joint};
use bayesc_core::runtime::{self, initialize, map, sample, sample_with, HyperValues, ParamStore, SamplerConfig};
use bayesc_core::{compile_model, lower, zoo, CheckedModel, Executor, Method};
use statrs::function::gamma::ln_gamma;

fn config(seed: u64) -> SamplerConfig {
    SamplerConfig { seed, ..SamplerConfig::default() }
}

fn init(m: &CheckedModel, hyper: &HyperValues, seed: u64) -> ParamStore {
    let mut s = ParamStore::new(m, hyper).unwrap();
    initialize(m, &mut s, seed).unwrap();
    s
}

/// Prior draw of everything, then observed variables keep those values.
fn synthetic(m: &CheckedModel, hyper: &HyperValues, seed: u64) -> ParamStore {
    let mut s = ParamStore::new(m, hyper).unwrap();
    let flags: Vec<bool> = s.vars.iter().map(|v| v.observed).collect();
    for v in &mut s.vars {
        v.observed = false;
    }
    initialize(m, &mut s, seed).unwrap();
    for (v, f) in s.vars.iter_mut().zip(flags) {
        v.observed = f;
    }
    s
}

fn log_joint(m: &CheckedModel, s: &ParamStore) -> f64 {
    let c = compile(&lower(m).expr, m, &s.hyper, 0).unwrap();
    eval_log_joint(&c, s, &Executor::new(1)).unwrap()
}

/// Batch-means standard error of the mean of a correlated series.
fn batch_se(xs: &[f64]) -> f64 {
    let b = 100;
    let len = xs.len() / b;
    let means: Vec<f64> = xs.chunks(len).take(b).map(|c| c.iter().sum::<f64>() / len as f64).collect();
    let m = means.iter().sum::<f64>() / b as f64;
    (means.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (b - 1) as f64 / b as f64).sqrt()
}

#[test]
fn beta_bernoulli_posterior_mean() {
    let m = compile_model("model(N: int, a: real, b: real) { p = Beta(a, b).sample(); x = Bernoulli(p).sample(N); observe(x) }")
        .unwrap();
    let (a, b) = (2.0, 3.0);
    let hyper = HyperValues::new().int("N", 2).real("a", a).real("b", b);
    let mut s = init(&m, &hyper, 0);
    s.set("x", vec![1.0, 1.0]).unwrap();
    let n = 20_000;
    let trace = sample(&m, &hyper, &s, n, Method::Gibbs, &config(3)).unwrap();
    let (pa, pb) = (a + 2.0, b);
    let exact = pa / (pa + pb);
    let sd = (pa * pb / ((pa + pb).powi(2) * (pa + pb + 1.0))).sqrt();
    let got = trace.mean("p").unwrap()[0];
    assert!((got - exact).abs() < 3.0 * sd / (n as f64).sqrt(), "{got} vs {exact}");
}

#[test]
fn mh_recovers_a_gaussian() {
    let m = compile_model("model() { x = Gaussian(1, 4).sample() }").unwrap();
    let hyper = HyperValues::new();
    let s = init(&m, &hyper, 0);
    let cfg = SamplerConfig { mh_scale: 4.0, burnin: 1000, ..config(5) };
    let trace = sample(&m, &hyper, &s, 100_000, Method::Mh, &cfg).unwrap();
    let xs: Vec<f64> = trace.samples.iter().map(|st| st.get("x").unwrap()[0]).collect();
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    assert!((mean - 1.0).abs() < 4.0 * batch_se(&xs), "mean {mean}");
    let sq: Vec<f64> = xs.iter().map(|x| (x - 1.0).powi(2)).collect();
    let var = sq.iter().sum::<f64>() / n;
    assert!((var - 4.0).abs() < 4.0 * batch_se(&sq), "var {var}");
}

#[test]
fn all_observed_model_is_constant() {
    let m = compile_model("model(N: int) { x = Gaussian(0, 1).sample(N); observe(x) }").unwrap();
    let hyper = HyperValues::new().int("N", 3);
    let mut s = ParamStore::new(&m, &hyper).unwrap();
    s.set("x", vec![0.1, -0.4, 2.0]).unwrap();
    for method in [Method::Mh, Method::Gibbs, Method::Mwg] {
        let trace = sample(&m, &hyper, &s, 10, method, &config(1)).unwrap();
        assert_eq!(trace.samples.len(), 10);
        assert!(trace.samples.windows(2).all(|w| w[0] == w[1]));
        assert!(trace.log_joint.iter().all(|&l| l == trace.log_joint[0]));
    }
    let mut out = s.clone();
    map(&m, &[], &hyper, &mut out, 1, Method::Gibbs, &config(0)).unwrap();
    assert_eq!(out.get("x"), s.get("x"));
}

fn traces_for(name: &str, src: &str, hyper: &HyperValues, method: Method, sweeps: usize) -> Vec<String> {
    let m = compile_model(src).unwrap();
    let s = synthetic(&m, hyper, 11);
    [1, 2, 8]
        .iter()
        .map(|&threads| {
            let cfg = SamplerConfig { threads, thin: 2, ..config(17) };
            let t = sample(&m, hyper, &s, sweeps, method, &cfg).unwrap_or_else(|e| panic!("{name}: {e}"));
            t.to_json_untimed()
        })
        .collect()
}

#[test]
fn traces_do_not_depend_on_thread_count() {
    for (name, src) in zoo::ALL {
        for method in [Method::Mh, Method::Gibbs, Method::Mwg] {
            let t = traces_for(name, src, &zoo::small_hyper(name).unwrap(), method, 12);
            assert!(t[0] == t[1] && t[0] == t[2], "{name} {method}");
        }
    }
    // enough tokens to span several chunks
    let lda = HyperValues::new()
        .int("K", 4)
        .int("V", 30)
        .int("M", 40)
        .ints("N", (0..40).map(|i| 20 + i % 13).collect())
        .real("alpha", 0.5)
        .real("beta", 0.1);
    let t = traces_for("lda", zoo::LDA, &lda, Method::Gibbs, 5);
    assert!(t[0] == t[1] && t[0] == t[2]);
}

#[test]
fn observed_values_are_untouched() {
    for (name, src) in zoo::ALL {
        let m = compile_model(src).unwrap();
        let hyper = zoo::small_hyper(name).unwrap();
        let s = synthetic(&m, &hyper, 2);
        for method in [Method::Mh, Method::Gibbs, Method::Mwg] {
            let (_, out) = sample_with(&m, &hyper, &s, 5, method, &[], &config(4)).unwrap();
            for (a, b) in s.vars.iter().zip(&out.vars) {
                if a.observed {
                    assert!(a.values.iter().zip(&b.values).all(|(x, y)| x.to_bits() == y.to_bits()), "{name}/{}", a.name);
                }
            }
        }
    }
}

#[test]
fn thinning_and_map_bookkeeping() {
    let m = compile_model(zoo::GMM).unwrap();
    let hyper = zoo::small_hyper("gmm").unwrap();
    let s = synthetic(&m, &hyper, 3);
    let cfg = SamplerConfig { thin: 3, burnin: 4, ..config(9) };
    let trace = sample(&m, &hyper, &s, 10, Method::Gibbs, &cfg).unwrap();
    assert_eq!(trace.log_joint.len(), 10);
    assert_eq!(trace.timing_ms.len(), 10);
    assert_eq!(trace.samples.len(), 4);
    assert!(trace.log_joint.iter().all(|&l| l <= trace.map_log_joint()));
    let names: Vec<&String> = trace.samples[0].0.keys().collect();
    assert_eq!(names, ["pi", "mu", "sigma", "z"]);

    let mut out = s.clone();
    map(&m, &[], &hyper, &mut out, 10, Method::Gibbs, &cfg).unwrap();
    assert_eq!(log_joint(&m, &out), trace.map_log_joint());
}

#[test]
fn map_with_fixed_phi() {
    let m = compile_model(zoo::LDA).unwrap();
    let hyper = HyperValues::new()
        .int("K", 3)
        .int("V", 12)
        .int("M", 6)
        .ints("N", vec![10, 8, 12, 9, 7, 11])
        .real("alpha", 0.5)
        .real("beta", 0.5);
    let s = synthetic(&m, &hyper, 8);
    let mut trained = s.clone();
    map(&m, &[], &hyper, &mut trained, 20, Method::Gibbs, &config(1)).unwrap();
    let phi = trained.get("phi").unwrap().to_vec();
    let mut test = trained.clone();
    initialize(&m, &mut test, 99).ok();
    test.set("phi", phi.clone()).unwrap();
    map(&m, &["phi".to_string()], &hyper, &mut test, 20, Method::Gibbs, &config(2)).unwrap();
    let after = test.get("phi").unwrap();
    assert!(phi.iter().zip(after).all(|(a, b)| a.to_bits() == b.to_bits()));
    assert!(map(&m, &["psi".to_string()], &hyper, &mut test, 1, Method::Gibbs, &config(2)).is_err());
}

#[test]
fn single_topic_lda_is_degenerate() {
    let m = compile_model(zoo::LDA).unwrap();
    for v in [1, 4] {
        let hyper = HyperValues::new()
            .int("K", 1)
            .int("V", v)
            .int("M", 3)
            .ints("N", vec![4, 2, 5])
            .real("alpha", 0.5)
            .real("beta", 0.5);
        let s = synthetic(&m, &hyper, 1);
        let trace = sample(&m, &hyper, &s, 20, Method::Gibbs, &config(6)).unwrap();
        for st in &trace.samples {
            assert!(st.get("theta").unwrap().iter().all(|&x| x == 1.0));
            assert!(st.get("z").unwrap().iter().all(|&x| x == 0.0));
            if v == 1 {
                assert!(st.get("phi").unwrap().iter().all(|&x| x == 1.0));
            }
        }
        if v == 1 {
            assert!(trace.log_joint.iter().all(|&l| l == trace.log_joint[0]));
        }
    }
}

#[test]
fn usage_errors() {
    let m = compile_model(zoo::GMM).unwrap();
    let hyper = zoo::small_hyper("gmm").unwrap();
    let s = synthetic(&m, &hyper, 3);
    assert!(sample(&m, &hyper, &s, 0, Method::Gibbs, &config(0)).is_err());
    let bigger = hyper.clone().int("N", 9);
    let err = sample(&m, &bigger, &s, 1, Method::Gibbs, &config(0)).unwrap_err();
    assert!(err.to_string().contains("expected"), "{err}");
    assert!("hmc".parse::<Method>().is_err());
}

fn ln_dirmult(counts: &[usize], a: f64) -> f64 {
    let k = counts.len() as f64;
    let n: usize = counts.iter().sum();
    ln_gamma(k * a) - ln_gamma(k * a + n as f64) + counts.iter().map(|&c| ln_gamma(a + c as f64) - ln_gamma(a)).sum::<f64>()
}

/// Exact posterior over z for the categorical mixture with pi and theta
/// integrated out.
fn enumerate_mixture(x: &[usize], k: usize, v: usize, alpha: f64, beta: f64) -> HashMap<Vec<usize>, f64> {
    let n = x.len();
    let mut out = HashMap::new();
    for code in 0..k.pow(n as u32) {
        let z: Vec<usize> = (0..n).map(|i| code / k.pow(i as u32) % k).collect();
        let mut zc = vec![0; k];
        let mut xc = vec![vec![0; v]; k];
        for i in 0..n {
            zc[z[i]] += 1;
            xc[z[i]][x[i]] += 1;
        }
        let lp = ln_dirmult(&zc, alpha) + xc.iter().map(|c| ln_dirmult(c, beta)).sum::<f64>();
        out.insert(z, lp);
    }
    let max = out.values().copied().fold(f64::NEG_INFINITY, f64::max);
    let total: f64 = out.values().map(|l| (l - max).exp()).sum();
    out.into_iter().map(|(z, l)| (z, (l - max).exp() / total)).collect()
}

#[test]
fn gibbs_and_mwg_match_enumeration() {
    let m = compile_model(zoo::CATEGORICAL_MIXTURE).unwrap();
    let x = [0usize, 0, 1, 0];
    let (alpha, beta) = (0.5, 0.8);
    let hyper =
        HyperValues::new().int("K", 2).int("V", 2).int("N", 4).real("alpha", alpha).real("beta", beta);
    let exact = enumerate_mixture(&x, 2, 2, alpha, beta);
    let mut s = init(&m, &hyper, 0);
    s.set("x", x.iter().map(|&v| v as f64).collect()).unwrap();
    for method in [Method::Gibbs, Method::Mwg] {
        let trace = sample(&m, &hyper, &s, 50_000, method, &config(21)).unwrap();
        let mut freq: HashMap<Vec<usize>, f64> = HashMap::new();
        let mut marg = [0.0; 4];
        let n = trace.samples.len() as f64;
        for st in &trace.samples {
            let z: Vec<usize> = st.get("z").unwrap().iter().map(|&v| v as usize).collect();
            for i in 0..4 {
                marg[i] += (z[i] == 1) as u8 as f64 / n;
            }
            *freq.entry(z).or_default() += 1.0 / n;
        }
        for i in 0..4 {
            let p1: f64 = exact.iter().filter(|(z, _)| z[i] == 1).map(|(_, p)| p).sum();
            assert!((marg[i] - p1).abs() < 0.05, "{method} z[{i}]: {} vs {p1}", marg[i]);
        }
        let tv: f64 = exact.iter().map(|(z, p)| (p - freq.get(z).copied().unwrap_or(0.0)).abs()).sum::<f64>() / 2.0;
        assert!(tv < 0.05, "{method}: joint TV {tv}");
    }
}

#[test]
fn initialization_respects_observations() {
    let m = compile_model(zoo::NAIVE_BAYES).unwrap();
    let hyper = zoo::small_hyper("naive_bayes").unwrap();
    let mut s = ParamStore::new(&m, &hyper).unwrap();
    s.set("c", vec![1.0; 5]).unwrap();
    runtime::initialize(&m, &mut s, 4).unwrap();
    assert_eq!(s.get("c").unwrap(), [1.0; 5]);
    assert!(s.get("pC").unwrap()[0] > 0.0);
}
