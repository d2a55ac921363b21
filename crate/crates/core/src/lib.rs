//! Non-exchangeable conformal prediction: weighted-quantile split and full
//! conformal, jackknife+ with tag-aware regression algorithms, coverage-gap
//! diagnostics, and a sequential experiment harness.

pub mod conformal;
pub mod diagnostics;
pub mod error;
pub mod experiments;
pub mod ext_real;
pub mod ingest;
pub mod regression;
pub mod rng;
pub mod weights;

pub use conformal::{
    classic_full_conformal, classic_jackknife_plus, classic_split_conformal, full_conformal,
    full_conformal_scores, full_conformal_scores_with_k, full_conformal_with_k, jackknife_plus,
    jackknife_plus_with_k, split_conformal, split_conformal_scores, GridSpec, PredictionRegion,
    RegionKind, ScoreAlgorithm, ScoreFunction,
};
pub use error::{Error, Result};
pub use ext_real::ExtReal;
pub use regression::{
    Autoregressive, FittedModel, LeastSquares, LinearDrift, TaggedAlgorithm, TaggedDataset,
    TaggedPoint, WeightedLeastSquares,
};
pub use rng::StreamFactory;
pub use weights::{
    draw_swap_index, weighted_quantile, DiscreteDistribution, SwapDraw, WeightProfile,
};
