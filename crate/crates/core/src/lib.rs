//! Structural causal inference over discrete variables: causal graphs with
//! latent confounders, symbolic identification, estimation from data,
//! counterfactuals, mediation, missing-data recoverability and structure
//! discovery.

pub mod cli;
pub mod counterfactual_metrics;
pub mod discover;
pub mod estimate;
pub mod expr;
pub mod fitcheck;
pub mod graph;
pub mod identify;
pub mod mediation;
pub mod recover;
pub mod scm;
