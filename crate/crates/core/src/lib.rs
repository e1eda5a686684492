//! Fairness-aware training and explanation-quality auditing for small
//! tabular classifiers.
//!
//! The crate trains feed-forward classifiers whose loss combines binary
//! cross-entropy with subgroup representation distances on both raw and
//! masked inputs, and audits trained models with result-oriented fairness
//! gaps (statistical parity, equal opportunity), explanation-fairness gaps
//! (ratio-based and value-based), fidelity-based explanation quality, and
//! a combined score used for model selection and Pareto analysis.
//!
//! See the `book/` directory for a guided tour; its code snippets run as
//! doc-tests of this crate.
//!
//! ```
//! use fairlens::data::{make_synthetic, split};
//! use fairlens::numerics::Rng;
//! use fairlens::trainer::{train_cfa, TrainConfig};
//!
//! let mut ds = make_synthetic(200, 4, 0.3, &mut Rng::new(7)).unwrap();
//! let sp = split(&ds, (0.6, 0.2, 0.2), &mut Rng::new(1)).unwrap();
//! ds.normalize(&sp).unwrap();
//! let cfg = TrainConfig { lambda: 0.1, epochs: 5, ..TrainConfig::default() };
//! let run = train_cfa(&ds, &sp, &cfg).unwrap();
//! assert!(run.test_report.score.is_finite());
//! ```

pub mod data;
pub mod distances;
mod error;
pub mod explain;
pub mod fairmetrics;
pub mod model;
pub mod numerics;
pub mod trainer;

pub use error::{Error, Result};

// The book's code snippets double as doc-tests so the guide cannot drift
// from the library.
#[cfg(doctest)]
mod book {
    macro_rules! chapter {
        ($name:ident, $path:literal) => {
            #[doc = include_str!($path)]
            #[allow(dead_code)]
            struct $name;
        };
    }

    chapter!(Introduction, "../../../book/src/introduction.md");
    chapter!(DataChapter, "../../../book/src/data.md");
    chapter!(MetricsChapter, "../../../book/src/metrics.md");
    chapter!(DistancesChapter, "../../../book/src/distances.md");
    chapter!(ExplanationsChapter, "../../../book/src/explanations.md");
    chapter!(TrainingChapter, "../../../book/src/training.md");
    chapter!(CliChapter, "../../../book/src/cli.md");
}
