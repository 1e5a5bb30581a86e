//! Cost-weighted continuous chain ladder: survival, density and reserve estimation
//! for right-truncated claim data.

pub mod bandwidth;
pub mod density;
pub mod diagnostics;
pub mod error;
pub mod exposure;
pub mod hazard;
pub mod kernel;
pub mod model;
pub mod moments;
pub mod quad;
pub mod reserve;
pub mod sim;
pub mod step;
pub mod study;
pub mod survival;
pub mod triangle;

pub use bandwidth::{
    cv_score, cv_score_with, default_candidates, loo_estimate, resolve_bandwidth, select_bandwidth,
    BandwidthSpec, CvOptions, CvQuadrature, CvScore, CvSelection, PiecewiseBand,
};
pub use density::{
    aj_moment, estimate_for_t, estimate_for_u, g_moment, local_constant, local_linear,
    reverse_density, uniform_grid, Degree, Denominator, DensityEstimate, DensityOptions,
    Orientation, Target,
};
pub use error::{Error, Result};
pub use exposure::Exposure;
pub use hazard::{development_factors, histogram_hazard, HistogramHazard};
pub use kernel::{kernel_epanechnikov, Kernel, KernelKind};
pub use model::{normalize, reversed_delay, ClaimDataset, ClaimRecord};
pub use moments::{MomentData, MomentEngine, Moments};
pub use reserve::{
    region_mass, reserve_estimate, reserve_fraction, Bandwidths, Method, ReserveReport,
};
pub use step::StepFunction;
pub use survival::{aalen_weighted, km_weighted, CumHazardEstimate, SurvivalEstimate};
pub use triangle::{
    aggregate_triangle, chain_ladder_forecast, row_dev_factors, AggregationMode, BinnedTriangle,
    ChainLadderForecast, RowFactors,
};
