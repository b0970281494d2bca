//! Train/test splitting, predictive metrics, own-price elasticities and
//! replication grids.

pub mod elasticity;
pub mod experiment;
pub mod metrics;
pub mod split;

pub use elasticity::{own_price_elasticities, ElasticityReport, ElasticityRow};
pub use metrics::{
    accuracy, predicted_probabilities, rmse, score_posterior, score_predictions, MetricsReport,
};
pub use split::{split_dataset, SplitSpec, SplitUnit};
pub use experiment::{run_experiment, ExperimentConfig, ExperimentOutput, ModelChoice, Setting};
