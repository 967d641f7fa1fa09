//! PF-Net: a learnable filter-bank front end for raw-waveform speaker
//! recognition.
//!
//! The first convolutional layer is a bank of FIR filters whose
//! frequency-domain magnitude is a trainable piecewise-linear shape: each
//! filter carries two learnable cutoffs plus `S` learnable interior
//! deformation points, and kernels are synthesized in closed form by the
//! inverse Fourier transform of that shape. Fixing all knot heights to 1
//! reduces the bank exactly to rectangular (sinc) band-pass filters, and a
//! free FIR layer is available as the unconstrained baseline, so the three
//! first-layer variants can be trained and compared under an identical
//! downstream architecture.
//!
//! The crate also ships everything needed to exercise the front ends at desk
//! scale: a small from-scratch differentiable head (conv / pooling /
//! normalization / dense / softmax with RMSprop), a deterministic synthetic
//! speaker corpus, preprocessing (silence trimming, framing, maximum
//! normalization), identification and verification metrics (FER, CER via
//! sentence voting, EER), a finite-difference gradient-check harness, and a
//! CLI for reproducible experiments.
//!
//! Entry points:
//! - [`filterbank`]: kernel synthesis, gradients, and the filter layer.
//! - [`nn`]: the trainable head and optimizer.
//! - [`data`]: synthetic corpora, WAV I/O, preprocessing.
//! - [`metrics`]: FER / CER / EER and trial lists.
//! - [`experiment`]: configuration, training loop, checkpoints, CLI.
//!
//! The `examples/` directory has one runnable program per capability; the
//! `pfnet` binary exposes the same flows as subcommands.

pub mod data;
pub mod error;
pub mod experiment;
pub mod export;
pub mod filterbank;
pub mod mel;
pub mod metrics;
pub mod nn;
pub mod param;
pub mod seeds;
pub mod tensor;

pub use error::{Error, Result};
pub use tensor::Tensor;
