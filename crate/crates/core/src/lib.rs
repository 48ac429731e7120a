//! Non-neural stages of a video semantic segmentation pipeline: optical
//! flow temporal-consistency scoring, test-time-augmentation voting,
//! masked-video-consistency utilities, VSPW-style metrics and
//! vision-language-model class correction.

pub mod consistency;
pub mod error;
pub mod evalmetrics;
pub mod flow;
pub mod frame;
pub mod mvc;
pub mod pipeio;
pub mod scalar;
pub mod tta;
pub mod vlmfix;

pub use error::{Error, Result};
pub use frame::{LabelMap, RgbFrame, ValidityMask, DEFAULT_IGNORE_LABEL};
pub use scalar::Scalar;

/// Single-precision gray frame, the default for flow estimation.
pub type GrayFrame = flow::GrayFrame<f32>;
pub type GrayFrameF64 = flow::GrayFrame<f64>;
/// Single-precision flow, matching the on-disk `.flo` layout.
pub type FlowField = flow::FlowField<f32>;
pub type FlowFieldF64 = flow::FlowField<f64>;
