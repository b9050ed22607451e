//! Exact Gaussian posterior computation, constraint correction, linear
//! combinations and empirical-Bayes hyperparameter search.

mod optimize;
mod posterior;
mod prepared;
mod summary;

pub use optimize::{
    default_initial, nelder_mead_maximize, optimize_hyper, FitResult, HyperEstimate, OptimizeOptions, StageReport,
    DEFAULT_SCHEDULE,
};
pub use posterior::{apply_sum_to_zero, covariance_block, lincomb, lincomb_many, GaussianPosterior, LincombSummary};
pub use prepared::{log_marginal_likelihood, posterior, PreparedModel};
pub use summary::{
    all_sites_trend, annual_curve, lognormal_summary, site_trend_lincombs, LognormalSummary, SiteTrends,
    TrendSummary,
};
