//! Lexicon induction, unsupervised lexicon fitting, heuristic scoring and
//! evaluation for investor opinion posts.
//!
//! The numeric modules are generic over [`scalar::Scalar`] (`f32` or
//! `f64`); the aliases below fix the scalar to `f64` with `F32` variants
//! where single precision is useful.

pub mod aggregate;
pub mod bayeslex;
pub mod cli;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod features;
pub mod io;
pub mod lexicon;
pub mod pipeline;
pub mod prompt;
pub mod scalar;

pub use error::{Error, Result};

pub type Lexicon = lexicon::Lexicon<f64>;
pub type LexiconF32 = lexicon::Lexicon<f32>;
pub type ClassCorpusStats = lexicon::ClassCorpusStats<f64>;
pub type MomentStats = bayeslex::MomentStats<f64>;
pub type FittedLexicon = bayeslex::FittedLexicon<f64>;
pub type FittedLexiconF32 = bayeslex::FittedLexicon<f32>;
pub type FeatureVector = features::FeatureVector<f64>;
pub type FeatureVectorF32 = features::FeatureVector<f32>;
pub type ScoreTable = features::ScoreTable<f64>;
pub type FeatureResources = features::FeatureResources<f64>;
pub type FeatureOptions = features::FeatureOptions<f64>;
pub type AggregatorSpec = aggregate::AggregatorSpec<f64>;
pub type AggregatorSpecF32 = aggregate::AggregatorSpec<f32>;
pub type Pipeline = pipeline::Pipeline<f64>;
