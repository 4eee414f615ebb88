//! Synthetic data sets drawn from known parameters.

use bayesc_core::dist::{Distribution, Value};
use bayesc_core::rng::RngStream;
use bayesc_core::runtime::{HyperValue, HyperValues};

use crate::data::DataFile;

fn vector(v: Value) -> Vec<f64> {
    match v {
        Value::Vector(x) => x,
        _ => unreachable!("Dirichlet draws are vectors"),
    }
}

fn index(v: Value) -> usize {
    match v {
        Value::Int(i) => i as usize,
        _ => unreachable!("Categorical draws are integers"),
    }
}

fn real(v: Value) -> f64 {
    match v {
        Value::Real(x) => x,
        _ => unreachable!("continuous draws are reals"),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LdaSpec {
    pub docs: usize,
    pub vocab: usize,
    pub topics: usize,
    /// Document lengths are uniform on `mean_len / 2 ..= 3 * mean_len / 2`.
    pub mean_len: usize,
    pub alpha: f64,
    pub beta: f64,
}

impl Default for LdaSpec {
    fn default() -> Self {
        LdaSpec { docs: 200, vocab: 500, topics: 10, mean_len: 100, alpha: 0.1, beta: 0.1 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LdaCorpus {
    pub spec: LdaSpec,
    pub phi: Vec<f64>,
    pub theta: Vec<f64>,
    pub docs: Vec<Vec<usize>>,
}

impl LdaCorpus {
    pub fn generate(spec: &LdaSpec, seed: u64) -> Self {
        let (k, v) = (spec.topics, spec.vocab);
        let mut rng = RngStream::new(seed, 0, 0, 0);
        let topic = Distribution::dirichlet(vec![spec.beta; v]).unwrap();
        let phi: Vec<f64> = (0..k).flat_map(|_| vector(topic.draw(&mut rng))).collect();
        let mix = Distribution::dirichlet(vec![spec.alpha; k]).unwrap();
        let mut theta = Vec::with_capacity(spec.docs * k);
        let mut docs = Vec::with_capacity(spec.docs);
        let words: Vec<Distribution> =
            phi.chunks(v).map(|row| Distribution::categorical(row.to_vec()).unwrap()).collect();
        for _ in 0..spec.docs {
            let th = vector(mix.draw(&mut rng));
            let z = Distribution::categorical(th.clone()).unwrap();
            let lo = spec.mean_len / 2;
            let len = lo + rng.below((spec.mean_len + 1) as u64) as usize;
            docs.push((0..len).map(|_| index(words[index(z.draw(&mut rng))].draw(&mut rng))).collect());
            theta.extend(th);
        }
        LdaCorpus { spec: spec.clone(), phi, theta, docs }
    }

    pub fn tokens(&self) -> usize {
        self.docs.iter().map(Vec::len).sum()
    }

    /// Data file for the LDA model over `docs`.
    pub fn data(&self, docs: &[Vec<usize>]) -> DataFile {
        let s = &self.spec;
        let hyper = HyperValues::new()
            .int("K", s.topics as i64)
            .int("V", s.vocab as i64)
            .int("M", docs.len() as i64)
            .ints("N", docs.iter().map(|d| d.len() as i64).collect())
            .real("alpha", s.alpha)
            .real("beta", s.beta);
        let mut data = DataFile { hyper, ..DataFile::default() };
        data.set_ints("w", docs.iter().flatten().map(|&w| w as i64).collect());
        data
    }

    /// Train on all but the last `heldout` documents. Held-out tokens whose
    /// word never occurs in training are dropped.
    pub fn split(&self, heldout: usize) -> (DataFile, DataFile) {
        let cut = self.docs.len() - heldout;
        let (train, test) = self.docs.split_at(cut);
        let mut seen = vec![false; self.spec.vocab];
        train.iter().flatten().for_each(|&w| seen[w] = true);
        let test: Vec<Vec<usize>> = test.iter().map(|d| d.iter().copied().filter(|&w| seen[w]).collect()).collect();
        (self.data(train), self.data(&test))
    }
}

/// `n` points from an equal-weight mixture of Gaussians with standard
/// deviation `std`.
pub fn gmm(n: usize, centers: &[f64], std: f64, seed: u64) -> DataFile {
    let mut rng = RngStream::new(seed, 1, 0, 0);
    let noise = Distribution::gaussian(0.0, std * std).unwrap();
    let x: Vec<f64> = (0..n)
        .map(|_| centers[rng.below(centers.len() as u64) as usize] + real(noise.draw(&mut rng)))
        .collect();
    let hyper = HyperValues::new().int("K", centers.len() as i64).int("N", n as i64).real("alpha", 1.0);
    let mut data = DataFile { hyper, ..DataFile::default() };
    data.set_reals("x", x);
    data
}

/// `y = x . w + b + noise` with `x` uniform on `[-1, 1]`.
pub fn regression(n: usize, w: &[f64], b: f64, noise_var: f64, seed: u64) -> DataFile {
    let k = w.len();
    let mut rng = RngStream::new(seed, 2, 0, 0);
    let ux = Distribution::uniform(-1.0, 1.0).unwrap();
    let noise = Distribution::gaussian(0.0, noise_var).unwrap();
    let x: Vec<f64> = (0..n * k).map(|_| real(ux.draw(&mut rng))).collect();
    let y: Vec<f64> = x
        .chunks(k)
        .map(|row| row.iter().zip(w).map(|(a, c)| a * c).sum::<f64>() + b + real(noise.draw(&mut rng)))
        .collect();
    let hyper = HyperValues::new().int("N", n as i64).int("K", k as i64).real("l", -1.0).real("u", 1.0);
    let mut data = DataFile { hyper, ..DataFile::default() };
    data.set_reals("x", x);
    data.set_reals("y", y);
    data
}

/// Random `train_fraction` / rest split of a regression data file.
pub fn regression_split(data: &DataFile, train_fraction: f64, seed: u64) -> (DataFile, DataFile) {
    let (x, y) = (data.array("x").unwrap(), data.array("y").unwrap());
    let n = y.len();
    let k = x.len() / n.max(1);
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = RngStream::new(seed, 3, 0, 0);
    for i in (1..n).rev() {
        order.swap(i, rng.below(i as u64 + 1) as usize);
    }
    let cut = (n as f64 * train_fraction).round() as usize;
    let part = |rows: &[usize]| {
        let mut d = DataFile { hyper: data.hyper.clone(), ..DataFile::default() };
        d.hyper.0.insert("N".into(), HyperValue::Int(rows.len() as i64));
        d.set_reals("x", rows.iter().flat_map(|&r| x[r * k..(r + 1) * k].to_vec()).collect());
        d.set_reals("y", rows.iter().map(|&r| y[r]).collect());
        d
    };
    (part(&order[..cut]), part(&order[cut..]))
}
