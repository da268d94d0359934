//! `spoofbench` — a simulation benchmark for *learning-based man-in-the-middle attacks*
//! on discrete-time stochastic control loops.
//!
//! The scenario: a plant `X_{k+1} = a·X_k + U_k + W_k` (scalar, vector, or a named
//! nonlinear map) talks to its controller over a network. An attacker taps the link,
//! passively observes `(X_k, U_k)` for a learning window of `L` steps, fits a model of
//! the open-loop gain (least squares or Gaussian-process regression, or simply records
//! observations for replay), then hijacks both directions: the controller is fed a
//! *fictitious* sensor stream generated from the learned model while the real plant is
//! driven by a destabilizing input. The controller runs an anomaly detector on the
//! residuals of what it sees; the attack succeeds if no alarm is raised by test time `T`.
//!
//! The library simulates this loop end to end, measures deception/false-alarm rates by
//! Monte Carlo, and evaluates the closed-form bounds on the deception probability that
//! make the benchmark interesting (see the `bounds` module and `docs/BOUNDS.md`).
//!
//! Layout:
//!
//! * [`core`] — seeded random streams, trajectory records, symmetric-matrix helpers.
//! * [`plant`] — scalar / vector / named-nonlinear plants and gain priors.
//! * [`controller`] — control policies, authenticated (watermarked) policies, LQ cost.
//! * [`attacker`] — least-squares and GP learners, replay buffers, fictitious plants,
//!   malicious actuation.
//! * [`detector`] — residual generation and the variance / covariance anomaly tests.
//! * [`bounds`] — closed-form and estimator-based bounds on the deception probability.
//! * [`harness`] — trials, Monte-Carlo sweeps, config files, report emission, CLI.
//!
//! Every run is reproducible bit-for-bit from `(config, base seed)`; trial seeds are
//! derived by hashing, never by sharing generator state across threads.

#![allow(non_snake_case)]

pub mod attacker;
pub mod bounds;
pub mod controller;
pub mod core;
pub mod detector;
pub mod harness;
pub mod plant;

pub use crate::core::{RandomSource, Stream, SymmetricMatrix, Trajectory};
