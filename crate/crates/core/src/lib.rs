//! Sentiment-lexicon features for review ratings, a small from-scratch model
//! suite with a cross-validation harness, and model-agnostic explanations
//! (permutation importance, break-down attributions, ceteris-paribus
//! profiles) rendered as deterministic SVG figures.

pub mod benchmark;
pub mod cli;
pub mod data;
pub mod explain;
pub mod figures;
pub mod lexicon;
pub mod matrix;
pub mod models;
pub mod seed;
pub mod stats;
