//! The bundled example models.

use crate::runtime::HyperValues;

pub const LDA: &str = include_str!("../models/lda.bn");
pub const GMM: &str = include_str!("../models/gmm.bn");
pub const CATEGORICAL_MIXTURE: &str = include_str!("../models/categorical_mixture.bn");
pub const NAIVE_BAYES: &str = include_str!("../models/naive_bayes.bn");
pub const HMM: &str = include_str!("../models/hmm.bn");
pub const POLYNOMIAL_REGRESSION: &str = include_str!("../models/polynomial_regression.bn");
pub const REGRESSION: &str = include_str!("../models/regression.bn");

/// `(name, source)` for every fixture.
pub const ALL: [(&str, &str); 7] = [
    ("polynomial_regression", POLYNOMIAL_REGRESSION),
    ("categorical_mixture", CATEGORICAL_MIXTURE),
    ("gmm", GMM),
    ("naive_bayes", NAIVE_BAYES),
    ("hmm", HMM),
    ("lda", LDA),
    ("regression", REGRESSION),
];

pub fn source(name: &str) -> Option<&'static str> {
    ALL.iter().find(|(n, _)| *n == name).map(|(_, s)| *s)
}

/// Small hyperparameter values for quick runs of each fixture.
pub fn small_hyper(name: &str) -> Option<HyperValues> {
    let h = HyperValues::new();
    Some(match name {
        "polynomial_regression" => h.int("N", 5).int("M", 3).real("tau", 0.5),
        "categorical_mixture" => h.int("K", 2).int("V", 3).int("N", 6).real("alpha", 1.0).real("beta", 1.0),
        "gmm" => h.int("K", 3).int("N", 8).real("alpha", 1.0),
        "naive_bayes" => h.int("N", 5).int("F", 3).real("a", 1.0).real("b", 1.0),
        "hmm" => h.int("N", 6).int("S", 3).real("alpha", 1.0).real("a", 1.0).real("b", 1.0),
        "lda" => h.int("K", 2).int("V", 4).int("M", 3).ints("N", vec![3, 0, 2]).real("alpha", 0.5).real("beta", 0.5),
        "regression" => h.int("N", 6).int("K", 2).real("l", 0.0).real("u", 1.0),
        _ => return None,
    })
}
