//! Resilience and adaptability of a monthly performance series under
//! successive disruptions.
//!
//! The pipeline forecasts a counterfactual baseline `P(t)` from the
//! pre-disruption period, detects windows where the observed series `O(t)`
//! falls below it, fits a beta-family loss curve to each window, and reduces
//! the fitted profile to two numbers:
//!
//! * the adaptability index `ρ ∈ [−1, 1]`, the mean normalized change of the
//!   disruption rate between consecutive disruptions;
//! * the resilience index `r ∈ [0, 1]`, one minus the lost fraction of
//!   expected performance over the disrupted span.
//!
//! [`synth`] generates series with known disruptions for end-to-end checks.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baseline;
pub mod betafit;
pub mod cli;
pub mod detect;
pub mod indices;
pub mod pipeline;
pub mod plot;
pub mod series;
pub mod special;
pub mod stats;
pub mod synth;
