//! Blind phoneme segmentation from the prediction error of frame-level
//! sequence models.
//!
//! The pipeline turns audio into 13-dimensional MFCC frames, optionally
//! quantizes them against a k-means codebook, scores every frame with a
//! predictor (a lag-averaged Markov model or a stacked LSTM), and places
//! boundaries at prominent peaks of the resulting error curve. The
//! [`eval`] module scores hypothesized boundaries against gold annotations.
//!
//! This crate is `no_std` (it needs `alloc`); file formats, corpus readers
//! and the command-line tool live in the `blindseg` crate.
#![cfg_attr(not(any(feature = "std", test)), no_std)]
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

extern crate alloc;

pub mod audio;
pub mod error;
pub mod eval;
pub mod markov;
pub mod matrix;
pub mod nn;
pub mod quantizer;
pub mod rng;
pub mod segment;
pub mod synth;

mod fft;
mod math;

pub use audio::{compute_mfcc, AudioSignal, FrameSequence, MfccConfig, MfccExtractor};
pub use error::{Error, Result};
pub use eval::{
    aggregate, compute_metrics, match_boundaries, sweep_threshold, EvaluationReport, MatchMode,
    MatchResult, SweepPoint, SweepSettings,
};
pub use markov::{fit_markov, MarkovModel};
pub use matrix::Matrix;
pub use quantizer::{fit_codebook, quantize, sample_frames, CategoricalSequence, Codebook};
pub use segment::{
    boundaries_to_seconds, detect_boundaries, local_maxima, periodic_boundaries, BoundaryKind, BoundarySet, ErrorSignal,
    FrameBoundaries, PeakRule,
};
