//! Link-level Monte-Carlo simulation of over-the-air pilot forwarding for
//! DL-to-UL cross-link interference (CLI) mitigation in dynamic TDD
//! MIMO-OFDM systems.
//!
//! The interfering (downlink) base station shares its pilot sequence with the
//! interfered (uplink) base station through a dually-connected forwarding
//! terminal instead of a backhaul link. The interfered base station estimates
//! the CLI channel from the forwarded, noisy pilots and suppresses the
//! interference with an MMSE-IRC receiver.
//!
//! Module map:
//!
//! - [`geometry`]: node placement, path loss, shadowing, forwarding-terminal selection
//! - [`channel`]: tapped-delay-line fading and the analytic frequency correlation
//! - [`phy`]: 4QAM mapping, pilot patterns, ZF precoding and ZF detection
//! - [`forwarding`]: the two-hop pilot sharing protocol and its noise accounting
//! - [`estimation`]: LS, LMMSE and forwarding-aware LMMSE CLI channel estimators
//! - [`receiver`]: uplink slot synthesis and MMSE-IRC detection
//! - [`harness`]: configuration, seeded sweeps, metric sinks and CSV output

// NaN must fail validation, so `!(x > 0.0)` is deliberate.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod error;
pub mod estimation;
pub mod forwarding;
pub mod geometry;
pub mod harness;
pub mod linalg;
pub mod phy;
pub mod receiver;
pub mod seed;
pub mod stats;

pub use channel::{CfrGrid, FreqCorrelation, TdlProfile};
pub use error::{Error, Result};
pub use estimation::Estimator;
pub use forwarding::{NoiseMode, PilotRecord};
pub use geometry::{ForwardingStrategy, Layout, LinkGain, Node, NodeKind};
pub use harness::{MetricSink, ScenarioConfig, SweepAxis};
pub use linalg::{CMatrix, CVector, C64};
pub use phy::{PilotPattern, ZfPrecoder};
