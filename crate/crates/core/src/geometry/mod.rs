//! Streamlines, supports, free-boundary bands, distance transforms and morphology.

pub mod edt;
pub mod frontier;
pub mod morphology;
pub mod streamline;

pub use frontier::{
    default_threshold, default_time_weight, directed_hausdorff, extract_frontier, frontier_csv,
    frontier_from_support, hausdorff_distance, interpolate, modified_convolutions, spacetime_frontier_distance,
    ConvolutionParams, FrontierRecord, SpacetimeDistance,
};
pub use morphology::{dilate, erode, inf_convolve, sup_convolve};
pub use streamline::{default_step, flow_map_cells, flow_map_set, flow_point, integrate_streamline, StreamlineTrace};
