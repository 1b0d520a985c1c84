//! Non-parametric SPM outlier detector.
//!
//! A test grid, registered to its side's template, gets a two-tailed rank
//! p-value per pixel against the normative stack. Suprathreshold pixels
//! form clusters; a cluster is significant when it is larger than the
//! `(1 - alpha_fwe)` quantile of the maximum cluster size under a
//! leave-one-out permutation null built from the stack itself.

mod cluster;
mod detector;
mod null;
mod pvalue;
mod tune;

pub use cluster::{form_clusters, label_components, max_cluster_size, Cluster, Connectivity};
pub use detector::{
    build_side_models, DecisionRecord, Detector, NormativeModel, SideModels, SpmDecision, SpmParams,
    UNREGISTRABLE,
};
pub use null::{fwe_threshold, null_max_cluster_distribution, LeaveOneOutMaps};
pub use pvalue::{pvalue_map, two_tailed_p, ReferenceStack};
pub use tune::{
    prepare_samples, search_params, tune, PreparedSample, SearchSpace, TuneResult, DEFAULT_SEARCH_BUDGET,
};
