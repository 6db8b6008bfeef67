//! Pseudo-label creation and evaluation for text-driven affordance learning.
//!
//! Perception outputs for a video clip (detections, correspondences, a
//! contact mask and dense point tracks) are turned into a contact-point
//! heatmap and a five-parameter manipulation trajectory expressed in the
//! pre-interaction frame. The [`metrics`] module scores predictions against
//! such labels.

// Comparisons like `!(x > 0.0)` deliberately reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod contact;
pub mod geometry;
pub mod io;
pub mod metrics;
pub mod pipeline;
pub mod server;
pub mod trajectory;

pub use contact::{BinaryMask, GaussianMixture, Heatmap};
pub use geometry::{BBox, BoxLabel, CorrespondenceSet, Homography, Point2};
pub use trajectory::{TrackSet, TrajectoryFit, TrajectoryParams};
