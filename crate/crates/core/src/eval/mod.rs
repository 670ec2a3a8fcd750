//! Forecasting metrics, training-loss formulas and the exact path oracle.

mod losses;
mod metrics;
mod oracle;

pub use losses::{huber, max_margin, total_loss, winner_takes_all_select, LossWeights};
pub use metrics::{
    ade, best_mode, brier, brier_min_fde, fde, min_ade, min_fde, miss_rate, MetricReport,
    MISS_THRESHOLD,
};
pub use oracle::{enumerate_paths, PathDistribution, ENUMERATION_LIMIT};
