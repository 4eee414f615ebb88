//! Runtime scaling series.

use std::time::Instant;

use bayesc_core::runtime::{run_plan, SamplerConfig};
use bayesc_core::{compile_model, zoo, Method};

use crate::data::DataFile;
use crate::metrics::Row;
use crate::synth::{gmm, regression, LdaCorpus, LdaSpec};
use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Series {
    /// GMM data size.
    GmmSize,
    /// Regression data size (MH).
    RegressionSize,
    /// LDA topic count on the desk corpus.
    LdaTopics,
}

fn fixture(series: Series, x: usize, seed: u64) -> (&'static str, DataFile, Method) {
    match series {
        Series::GmmSize => ("gmm", gmm(x, &[-5.0, 0.0, 5.0], 0.1, seed), Method::Gibbs),
        Series::RegressionSize => ("regression", regression(x, &[1.0, -2.0, 0.5], 0.3, 0.1, seed), Method::Mh),
        Series::LdaTopics => {
            let corpus = LdaCorpus::generate(&LdaSpec { topics: x, ..LdaSpec::default() }, seed);
            ("lda", corpus.data(&corpus.docs), Method::Gibbs)
        }
    }
}

/// For each `x`, time `sweeps` sweeps after planning. `value` is seconds
/// per sweep and `seconds` the total including setup.
pub fn run(series: Series, xs: &[usize], sweeps: usize, config: &SamplerConfig) -> Result<Vec<Row>, CliError> {
    let mut rows = Vec::with_capacity(xs.len());
    for &x in xs {
        let start = Instant::now();
        let (name, data, method) = fixture(series, x, config.seed);
        let model = compile_model(zoo::source(name).expect("fixture exists"))?;
        let store = data.to_store(&model, &[], config.seed)?;
        let plan = bayesc_core::runtime::plan_for_store(&model, &data.hyper, &store, method, &[])?;
        let swept = Instant::now();
        run_plan(&model, &plan, store, sweeps.max(1), config)?;
        let per_sweep = swept.elapsed().as_secs_f64() / sweeps.max(1) as f64;
        rows.push(Row { x: x as f64, value: per_sweep, seconds: start.elapsed().as_secs_f64() });
    }
    Ok(rows)
}
