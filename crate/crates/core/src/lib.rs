//! Gaussian relational topic model for connection discovery from shared
//! image features.
//!
//! Users' image feature vectors are modeled as draws from K Gaussian
//! topics under per-user Dirichlet topic proportions, and user-user links
//! as an exponential function of the two users' mean topic assignments.
//! Mean-field coordinate ascent fits everything jointly; a plug-in
//! predictor scores unseen pairs for link prediction.
//!
//! The crate also ships the surrounding harness: a seeded synthetic-data
//! generator with planted ground truth, mean-feature and cluster-histogram
//! baselines, a train/test link-split protocol with ROC and
//! precision-recall metrics, and binary/CSV file formats.
//!
//! All numeric code is generic over the scalar type through [`Real`]
//! (`f32` or `f64`); the `*64` aliases below pin the `f64` lane the file
//! formats use.
//!
//! ```no_run
//! use grtm_core::{fit, sample_corpus, FitConfig64, GenConfig64};
//!
//! let gen = GenConfig64 {
//!     n_users: 30,
//!     images_per_user: (10, 20),
//!     k: 4,
//!     feature_dim: 8,
//!     alpha: 0.5,
//!     topic_mean_separation: 10.0,
//!     sigma: 1.0,
//!     eta_true: vec![5.0, 5.0, 0.0, 0.0],
//!     nu_true: -4.0,
//!     seed: 7,
//! };
//! let (corpus, links, _truth) = sample_corpus(&gen)?;
//! let model = fit(&corpus, &links, &FitConfig64::default())?;
//! println!("final elbo: {}", model.elbo_trace.last().unwrap());
//! # Ok::<(), grtm_core::Error>(())
//! ```

pub mod baselines;
mod error;
pub mod eval;
pub mod generator;
pub mod inference;
pub mod io;
pub mod linkpredict;
pub mod mathkit;
pub mod model;
mod scalar;

pub use error::{Error, Result};
pub use scalar::Real;

pub use baselines::{baseline_scores, BaselineMethod, BaselineParams, KmeansResult, UserProfile};
pub use eval::{evaluate, evaluation_universe, split_links, EvalReport, SplitResult};
pub use generator::{dirichlet_sample, sample_corpus, GenConfig, GroundTruth};
pub use inference::{elbo, fit, fit_observed, init_state, FitConfig, InitStrategy};
pub use linkpredict::{predict_link, rank_candidates, score_pair, score_pairs, PairScore};
pub use mathkit::{CovKind, CovarianceRepr, DenseVector};
pub use model::{
    validate, Corpus, FittedModel, Hyperparams, LinkModel, LinkSet, TopicParams, UserCollection,
    VariationalState, Violation,
};

/// `f64` lane: what the CLI and the file formats work with.
pub type Corpus64 = model::Corpus<f64>;
pub type UserCollection64 = model::UserCollection<f64>;
pub type Hyperparams64 = model::Hyperparams<f64>;
pub type TopicParams64 = model::TopicParams<f64>;
pub type VariationalState64 = model::VariationalState<f64>;
pub type LinkModel64 = model::LinkModel<f64>;
pub type FittedModel64 = model::FittedModel<f64>;
pub type FitConfig64 = inference::FitConfig<f64>;
pub type GenConfig64 = generator::GenConfig<f64>;
pub type GroundTruth64 = generator::GroundTruth<f64>;
pub type PairScore64 = linkpredict::PairScore<f64>;
pub type EvalReport64 = eval::EvalReport<f64>;

/// `f32` lane for memory-constrained embeddings; file formats stay 64-bit.
pub type Corpus32 = model::Corpus<f32>;
pub type FittedModel32 = model::FittedModel<f32>;
pub type FitConfig32 = inference::FitConfig<f32>;
pub type GenConfig32 = generator::GenConfig<f32>;
