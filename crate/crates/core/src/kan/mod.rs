//! Kolmogorov-Arnold network detector: spline-plus-silu edges, full-batch
//! L-BFGS training, pruning and few-shot fine-tuning.

mod data;
pub mod lbfgs;
mod model;
mod prune;
pub mod spline;
mod train;

pub use data::Dataset;
pub use lbfgs::{LbfgsOptions, LbfgsResult};
pub use model::{KanLayer, KanModel};
pub use prune::{prune, EdgeId, PruneOptions, PruneReport};
pub use spline::{silu, BSplineBasis, SplineEdge};
pub use train::{fine_tune, train, TrainOptions, TrainReport, TrainedModel};
