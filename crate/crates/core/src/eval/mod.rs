//! Flow metrics: masked and landmark endpoint error, embedding diversity,
//! and color-wheel rendering.

mod colorwheel;
mod embedding;
mod epe;

pub use colorwheel::{flow_to_colorwheel, wheel_color, WHEEL_SIZE};
pub use embedding::{embedding_stats, mean_pairwise_cosine, EmbeddingStats};
pub use epe::{
    depth_mask, landmark_epe, masked_epe, read_correspondences, sample_bilinear, Correspondence, EvalReport,
    LandmarkOptions, RegionStat, VERTEX_EVAL_REGIONS,
};
