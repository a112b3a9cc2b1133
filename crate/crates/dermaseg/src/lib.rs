//! Adversarial-learning data augmentation for lesion segmentation.
//!
//! The crate trains a fully convolutional segmenter, scores every training
//! image by Dice, splits the corpus into simple and complex halves, trains a
//! label-conditioned generator per half, cross-synthesizes an equal-sized
//! extra corpus (hard renderings of easy shapes and vice versa), retrains the
//! segmenter on the union and evaluates with the challenge metric suite
//! (Dice, Jaccard, thresholded Jaccard, sensitivity, specificity, accuracy)
//! plus top-k checkpoint ensembling.
//!
//! Modules map onto the stages:
//!
//! - [`data`] — manifests, image/mask IO, baseline augmentation, and a
//!   procedural synthetic corpus for desk-scale experiments.
//! - [`metrics`] — confusion counts and the metric suite.
//! - [`segmenter`] — encoder-decoder FCN, SGD training, ensembling.
//! - [`adversary`] — conditional GAN (generator, discriminator, loss).
//! - [`stratify`] — per-image difficulty scoring, median split,
//!   cross-synthesis.
//! - [`pipeline`] — end-to-end orchestration and artifact persistence.
//!
//! Every stochastic operation is a pure function of its seed; see
//! [`seeds::derive_seed`] for how stage and per-sample seeds are derived.

pub mod adversary;
pub mod config;
pub mod data;
pub mod error;
pub mod metrics;
pub mod nn;
pub mod pipeline;
pub mod seeds;
pub mod segmenter;
pub mod stratify;

pub use error::{Error, Result};
