//! Evaluation metrics and the `x,value,seconds` CSV format.

use bayesc_core::runtime::{sample_with, HyperValue, SamplerConfig};
use bayesc_core::{CheckedModel, Method};

use crate::data::DataFile;
use crate::CliError;

pub const CSV_HEADER: &str = "x,value,seconds";

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Row {
    pub x: f64,
    pub value: f64,
    pub seconds: f64,
}

pub fn to_csv(rows: &[Row]) -> String {
    let mut out = format!("{CSV_HEADER}\n");
    for r in rows {
        out.push_str(&format!("{},{},{}\n", r.x, r.value, r.seconds));
    }
    out
}

pub fn rmse(pred: &[f64], target: &[f64]) -> Result<f64, CliError> {
    if pred.len() != target.len() || pred.is_empty() {
        return Err(CliError::Input(format!(
            "rmse needs equal non-empty lengths, got {} and {}",
            pred.len(),
            target.len()
        )));
    }
    let mse = pred.iter().zip(target).map(|(p, t)| (p - t).powi(2)).sum::<f64>() / pred.len() as f64;
    Ok(mse.sqrt())
}

/// Sum over tokens of `log10 sum_k theta[d][k] * phi[k][w]`.
pub fn log_predictive_probability(
    phi: &[f64],
    theta: &[f64],
    k: usize,
    v: usize,
    docs: &[Vec<usize>],
) -> Result<f64, CliError> {
    if phi.len() != k * v || theta.len() != docs.len() * k {
        return Err(CliError::Input("phi or theta has the wrong shape".into()));
    }
    let mut total = 0.0;
    for (d, doc) in docs.iter().enumerate() {
        let th = &theta[d * k..(d + 1) * k];
        for &w in doc {
            if w >= v {
                return Err(CliError::Input(format!("token {w} is outside the vocabulary of {v} words")));
            }
            let p: f64 = (0..k).map(|t| th[t] * phi[t * v + w]).sum();
            total += p.log10();
        }
    }
    Ok(total)
}

/// Split a flat token array into documents using the lengths in `n`.
pub fn documents(w: &[f64], n: &[i64]) -> Vec<Vec<usize>> {
    let mut out = Vec::with_capacity(n.len());
    let mut at = 0;
    for &len in n {
        let len = len as usize;
        out.push(w[at..at + len].iter().map(|&x| x as usize).collect());
        at += len;
    }
    out
}

fn int(hyper: &DataFile, name: &str) -> Result<i64, CliError> {
    match hyper.hyper.get(name) {
        Some(HyperValue::Int(v)) => Ok(*v),
        _ => Err(CliError::Input(format!("hyperparameter {name} must be an int"))),
    }
}

fn ints(hyper: &DataFile, name: &str) -> Result<Vec<i64>, CliError> {
    match hyper.hyper.get(name) {
        Some(HyperValue::IntArray(v)) => Ok(v.clone()),
        _ => Err(CliError::Input(format!("hyperparameter {name} must be an int array"))),
    }
}

/// Held-out LDA documents in the layout the LDA model expects.
pub struct Heldout {
    pub data: DataFile,
    pub docs: Vec<Vec<usize>>,
}

impl Heldout {
    /// `test` must hold `M`, `N` and the tokens `w`; the remaining
    /// hyperparameters come from `train`.
    pub fn new(train: &DataFile, test: &DataFile) -> Result<Self, CliError> {
        let w = test.array("w").ok_or_else(|| CliError::Input("held-out data has no array w".into()))?;
        let n = ints(test, "N")?;
        let docs = documents(&w, &n);
        let mut data = DataFile { hyper: train.hyper.clone(), ..DataFile::default() };
        data.hyper.0.insert("M".into(), HyperValue::Int(int(test, "M")?));
        data.hyper.0.insert("N".into(), HyperValue::IntArray(n));
        data.set_ints("w", w.iter().map(|&x| x as i64).collect());
        Ok(Heldout { data, docs })
    }

    /// Fit document-topic proportions with `phi` fixed and return the plug-in
    /// log10 predictive probability of the held-out tokens.
    pub fn lpp(&self, model: &CheckedModel, phi: &[f64], sweeps: usize, config: &SamplerConfig) -> Result<f64, CliError> {
        let k = int(&self.data, "K")? as usize;
        let v = int(&self.data, "V")? as usize;
        let mut data = self.data.clone();
        data.set_reals("phi", phi.to_vec());
        let observe = ["phi".to_string()];
        let store = data.to_store(model, &observe, config.seed)?;
        let (trace, _) = sample_with(model, &data.hyper, &store, sweeps, Method::Gibbs, &observe, config)?;
        let theta = trace.mean("theta").ok_or_else(|| CliError::Input("model has no theta".into()))?;
        log_predictive_probability(phi, &theta, k, v, &self.docs)
    }
}

/// Linear predictions `x . w + b` for row-major `x` with `w.len()` columns.
pub fn linear_predictions(x: &[f64], w: &[f64], b: f64) -> Vec<f64> {
    x.chunks(w.len()).map(|row| row.iter().zip(w).map(|(a, c)| a * c).sum::<f64>() + b).collect()
}
