use bayesc_core::dist::Family;
use bayesc_core::expr::Expr;
use bayesc_core::ir::{compile, eval_log_joint, free_vars, log_density_at, lower, Atom, Cond, Density};
use bayesc_core::runtime::{initialize, HyperValues, ParamStore};
use bayesc_core::{compile_model, zoo, CheckedModel, Executor};
use proptest::prelude::*;
use statrs::function::gamma::ln_gamma;

fn v(n: &str) -> Expr {
    Expr::var(n)
}

fn at(n: &str, idx: &[&str]) -> Expr {
    Expr::indexed(n, idx.iter().map(|i| v(i)).collect())
}

fn atom(var: &str, index: &[&str], family: Family, args: Vec<Expr>) -> Density {
    Density::Atom(Atom { var: var.into(), index: index.iter().map(|i| v(i)).collect(), family, args })
}

fn vector(len: Expr, fill: Expr) -> Expr {
    Expr::Vector { len: Box::new(len), fill: Box::new(fill) }
}

fn random_store(m: &CheckedModel, hyper: &HyperValues, seed: u64) -> ParamStore {
    let mut s = ParamStore::new(m, hyper).unwrap();
    for var in &mut s.vars {
        var.observed = false;
    }
    initialize(m, &mut s, seed).unwrap();
    s
}

#[test]
fn lda_lowers_to_hand_written_joint() {
    let m = compile_model(zoo::LDA).unwrap();
    let theta = Density::indexed(
        "_theta",
        v("M"),
        atom("theta", &["_theta"], Family::Dirichlet, vec![v("K"), vector(v("K"), v("alpha"))]),
    );
    let phi = Density::indexed(
        "_phi",
        v("K"),
        atom("phi", &["_phi"], Family::Dirichlet, vec![v("V"), vector(v("V"), v("beta"))]),
    );
    let doc = |body: Density| Density::indexed("i", v("M"), Density::indexed("j", at("N", &["i"]), body));
    let z = doc(atom("z", &["i", "j"], Family::Categorical, vec![v("K"), at("theta", &["i"])]));
    let w = doc(atom(
        "w",
        &["i", "j"],
        Family::Categorical,
        vec![v("V"), Expr::indexed("phi", vec![at("z", &["i", "j"])])],
    ));
    let j = lower(&m);
    assert_eq!(j.expr, Density::Product(vec![theta, phi, z, w]));
    assert_eq!(j.var_order, ["theta", "phi", "z", "w"]);
}

#[test]
fn regression_factorization() {
    let m = compile_model(zoo::REGRESSION).unwrap();
    assert_eq!(
        lower(&m).expr.to_string(),
        "prod(_w in 0..K, p(w[_w] | Gaussian(0, 10))) * p(b | Gaussian(0, 10)) * p(tau | InverseGamma(3, 1)) * \
         prod(n in 0..N, prod(_x in 0..K, p(x[n][_x] | Uniform(l, u)))) * \
         prod(n in 0..N, p(y[n] | Gaussian(sum(j in 0..K, w[j] * x[n][j]) + b, tau)))"
    );
}

#[test]
fn one_atom_per_random_declaration() {
    for (name, src) in zoo::ALL {
        let m = compile_model(src).unwrap();
        let j = lower(&m);
        let atoms: Vec<&str> = j.expr.atoms().iter().map(|a| a.var.as_str()).collect();
        let decls: Vec<&str> = m.ast.random_decls().map(|d| d.name.as_str()).collect();
        assert_eq!(atoms, decls, "{name}");
        let mut forbidden = false;
        j.expr.walk(&mut |d| {
            forbidden |= matches!(d, Density::Recip(_) | Density::Integral { .. } | Density::Guarded { .. })
        });
        assert!(!forbidden, "{name}");
    }
}

#[test]
fn free_variable_examples() {
    let vars = ["theta", "phi", "z", "w", "x"];
    let fv = |d: &Density| free_vars(d, &vars).into_iter().collect::<Vec<_>>();
    let z = atom("z", &["i", "j"], Family::Categorical, vec![v("K"), at("theta", &["i"])]);
    assert_eq!(fv(&z), ["theta", "z"]);
    let x = Density::indexed("n", v("N"), atom("x", &["n"], Family::Gaussian, vec![Expr::Int(0), Expr::Int(1)]));
    assert_eq!(fv(&x), ["x"]);
    let w = atom("w", &["i", "j"], Family::Categorical, vec![v("V"), Expr::indexed("phi", vec![at("z", &["i", "j"])])]);
    let g = Density::guarded(vec![Cond { pairs: vec![(at("z", &["i", "j"]), 0)], eq: true }], w);
    assert_eq!(fv(&g), ["phi", "w", "z"]);
}

fn gaussians(n: i64) -> (CheckedModel, ParamStore) {
    let m = compile_model("model(N: int) { x = Gaussian(0, 1).sample(N) }").unwrap();
    let s = ParamStore::new(&m, &HyperValues::new().int("N", n)).unwrap();
    (m, s)
}

#[test]
fn standard_normal_densities() {
    let ln2pi = (2.0 * std::f64::consts::PI).ln();
    let (m, s) = gaussians(2);
    let j = lower(&m);
    let one = compile_model("model() { x = Gaussian(0, 1).sample() }").unwrap();
    let s1 = ParamStore::new(&one, &HyperValues::new()).unwrap();
    assert!((log_density_at(&lower(&one).expr, &one, &s1, &[]).unwrap() + 0.5 * ln2pi).abs() < 1e-15);
    assert!((log_density_at(&j.expr, &m, &s, &[]).unwrap() + ln2pi).abs() < 1e-15);
}

#[test]
fn out_of_support_and_nan() {
    let m = compile_model("model(v: real) { x = Gaussian(0, v).sample() }").unwrap();
    let s = ParamStore::new(&m, &HyperValues::new().real("v", -1.0)).unwrap();
    assert_eq!(log_density_at(&lower(&m).expr, &m, &s, &[]).unwrap(), f64::NEG_INFINITY);
    let mut s = ParamStore::new(&m, &HyperValues::new().real("v", 1.0)).unwrap();
    s.set("x", vec![f64::NAN]).unwrap();
    assert!(log_density_at(&lower(&m).expr, &m, &s, &[]).is_err());
}

#[test]
fn integrals_are_not_evaluated() {
    let (m, s) = gaussians(1);
    let d = Density::Integral { var: at("x", &["_x"]), body: Box::new(lower(&m).expr) };
    assert!(log_density_at(&d, &m, &s, &[]).is_err());
}

#[test]
fn guards_and_reciprocals() {
    let (m, mut s) = gaussians(3);
    s.set("x", vec![0.0, 1.0, 2.0]).unwrap();
    let body = atom("x", &["n"], Family::Gaussian, vec![Expr::Int(0), Expr::Int(1)]);
    let g = Density::indexed("n", v("N"), Density::guarded(vec![Cond { pairs: vec![(v("n"), 0)], eq: true }], body.clone()));
    let got = log_density_at(&g, &m, &s, &[1]).unwrap();
    let expect = -0.5 * (2.0 * std::f64::consts::PI).ln() - 0.5;
    assert!((got - expect).abs() < 1e-15);
    let r = Density::recip(Density::indexed("n", v("N"), body));
    let full = log_density_at(&lower(&m).expr, &m, &s, &[]).unwrap();
    assert_eq!(log_density_at(&r, &m, &s, &[]).unwrap(), -full);
}

fn ln_dirichlet(x: &[f64], a: f64) -> f64 {
    let k = x.len() as f64;
    ln_gamma(k * a) - k * ln_gamma(a) + x.iter().map(|xi| (a - 1.0) * xi.ln()).sum::<f64>()
}

#[test]
fn lda_joint_matches_direct_evaluation() {
    let m = compile_model(zoo::LDA).unwrap();
    let (k, v_, docs) = (2usize, 3usize, [3usize, 2]);
    let (alpha, beta) = (0.7, 1.3);
    let hyper = HyperValues::new()
        .int("K", k as i64)
        .int("V", v_ as i64)
        .int("M", 2)
        .ints("N", docs.iter().map(|&n| n as i64).collect())
        .real("alpha", alpha)
        .real("beta", beta);
    for seed in 0..10 {
        let s = random_store(&m, &hyper, seed);
        let theta = s.get("theta").unwrap();
        let phi = s.get("phi").unwrap();
        let z = s.get("z").unwrap();
        let w = s.get("w").unwrap();
        let mut expect = 0.0;
        for d in 0..2 {
            expect += ln_dirichlet(&theta[d * k..(d + 1) * k], alpha);
        }
        for t in 0..k {
            expect += ln_dirichlet(&phi[t * v_..(t + 1) * v_], beta);
        }
        let mut tok = 0;
        for (d, &n) in docs.iter().enumerate() {
            for _ in 0..n {
                let (zt, wt) = (z[tok] as usize, w[tok] as usize);
                expect += theta[d * k + zt].ln() + phi[zt * v_ + wt].ln();
                tok += 1;
            }
        }
        let got = log_density_at(&lower(&m).expr, &m, &s, &[]).unwrap();
        assert!((got - expect).abs() < 1e-10, "seed {seed}: {got} vs {expect}");
        let compiled = compile(&lower(&m).expr, &m, &hyper, 0).unwrap();
        let par = eval_log_joint(&compiled, &s, &Executor::new(2)).unwrap();
        assert!((par - expect).abs() < 1e-10);
    }
}

#[test]
fn two_point_gaussian_closed_form() {
    let m = compile_model("model(N: int) { mu = Gaussian(0, 4).sample(); x = Gaussian(mu, 1).sample(N); observe(x) }")
        .unwrap();
    let hyper = HyperValues::new().int("N", 2);
    let mut s = ParamStore::new(&m, &hyper).unwrap();
    s.set("mu", vec![0.5]).unwrap();
    s.set("x", vec![1.0, -1.0]).unwrap();
    let ln2pi = (2.0 * std::f64::consts::PI).ln();
    let expect = -0.5 * (ln2pi + 4f64.ln() + 0.25 / 4.0) - (2.0 * ln2pi + 0.25 + 2.25) / 2.0;
    let compiled = compile(&lower(&m).expr, &m, &hyper, 0).unwrap();
    let got = eval_log_joint(&compiled, &s, &Executor::new(1)).unwrap();
    assert!((got - expect).abs() < 1e-12);
    let empty = HyperValues::new().int("N", 0);
    let mut s0 = ParamStore::new(&m, &empty).unwrap();
    s0.set("mu", vec![0.5]).unwrap();
    let compiled = compile(&lower(&m).expr, &m, &empty, 0).unwrap();
    let prior = -0.5 * (ln2pi + 4f64.ln() + 0.25 / 4.0);
    assert!((eval_log_joint(&compiled, &s0, &Executor::new(1)).unwrap() - prior).abs() < 1e-12);
}

fn factors(m: &CheckedModel) -> Vec<Density> {
    match lower(m).expr {
        Density::Product(items) => items,
        d => vec![d],
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn products_are_additive(fixture in 0..zoo::ALL.len(), seed in 0u64..1_000_000, split in 0usize..8) {
        let (name, src) = zoo::ALL[fixture];
        let m = compile_model(src).unwrap();
        let s = random_store(&m, &zoo::small_hyper(name).unwrap(), seed);
        let items = factors(&m);
        let split = split % (items.len() + 1);
        let a = Density::Product(items[..split].to_vec());
        let b = Density::Product(items[split..].to_vec());
        let whole = log_density_at(&Density::Product(vec![a.clone(), b.clone()]), &m, &s, &[]).unwrap();
        let parts = log_density_at(&a, &m, &s, &[]).unwrap() + log_density_at(&b, &m, &s, &[]).unwrap();
        prop_assert!((whole - parts).abs() < 1e-12, "{} vs {}", whole, parts);
    }

    #[test]
    fn reassociation_is_invariant(fixture in 0..zoo::ALL.len(), seed in 0u64..1_000_000) {
        let (name, src) = zoo::ALL[fixture];
        let m = compile_model(src).unwrap();
        let s = random_store(&m, &zoo::small_hyper(name).unwrap(), seed);
        let items = factors(&m);
        let left = items.iter().cloned().reduce(|acc, d| Density::Product(vec![acc, d])).unwrap();
        let right = items.iter().rev().cloned().reduce(|acc, d| Density::Product(vec![d, acc])).unwrap();
        let flat = log_density_at(&Density::Product(items), &m, &s, &[]).unwrap();
        let l = log_density_at(&left, &m, &s, &[]).unwrap();
        let r = log_density_at(&right, &m, &s, &[]).unwrap();
        prop_assert!((flat - l).abs() < 1e-12 && (flat - r).abs() < 1e-12, "{} {} {}", flat, l, r);
    }
}
