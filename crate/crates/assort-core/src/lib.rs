//! Assortment optimization under the multinomial logit choice model, and
//! statistical inference for the optimal assortment from choice data.
//!
//! When products are ordered by descending revenue, the expected-revenue
//! maximizing assortment is a prefix {1, …, K*} of that order, and
//! membership of product k is equivalent to the sign of an explicit gap
//! statistic Δ_k. This crate provides:
//!
//! - [`model`]: preference scores, revenues, assortments, choice
//!   probabilities, the gap sequence, and exact optimal-assortment search;
//! - [`dataset`]: the observed-choices data model with a versioned JSON
//!   encoding, plus synthetic scenario generation with reproducible seeding;
//! - [`estimation`]: penalized maximum likelihood for the scores, the
//!   likelihood Hessian and its pseudoinverse, and the debiased estimator;
//! - [`inference`]: gap estimates with standard errors, the multiplier
//!   bootstrap, confidence intervals for K*, and hypothesis tests;
//! - [`hypotheses`]: builders that translate managerial questions about the
//!   optimal assortment into candidate sets of sizes;
//! - [`rng`]: the pinned random-number generator that makes every sampled
//!   byte reproducible across runs and platforms;
//! - [`stats`]: normal-distribution helpers and a Kolmogorov–Smirnov test.

pub mod dataset;
pub mod error;
pub mod estimation;
pub mod hypotheses;
pub mod inference;
pub mod model;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
