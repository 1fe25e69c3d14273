//! Classifiers, PCA baseline, gradient-boosted regression and the
//! evaluation harnesses built on them.

pub mod evaluate;
pub mod gbt;
pub mod knn;
pub mod lda;
pub mod metrics;
pub mod pca;
pub mod predict;

pub use evaluate::{
    evaluate_representations, pca_representation, write_evals, write_evals_to, Classifier, ClassifierEval,
    EvalPartition, RepresentationSplit, Task, DEFAULT_KNN_K, EVAL_HEADER,
};
pub use gbt::{gbt_fit, gbt_predict, GbtModel, GbtParams, Node, Tree};
pub use knn::knn_classify;
pub use lda::{cholesky, cholesky_solve, lda_fit_predict, LdaModel};
pub use metrics::{classification_metrics, confusion_matrix, r2_score, ClassificationMetrics};
pub use pca::{pca_apply, pca_fit, pca_reconstruct, PcaTransform};
pub use predict::{
    assign_folds, predict_future_values, PredictConfig, PredictionCohort, PredictionReport, PredictionTask,
    SkippedTask, Variant,
};
