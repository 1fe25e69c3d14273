//! Cohort tables: ingestion, preprocessing, normalization, splits and
//! triplet sampling.

mod io;
mod normalize;
mod preprocess;
mod split;
mod table;
mod triplets;

pub use io::{
    load_cohort, load_reference_ranges, load_schema, read_cohort, read_reference_ranges, read_schema,
    write_cohort, write_cohort_to, write_reference_ranges, write_schema, write_schema_to, ReferenceRange,
};
pub use normalize::{quantile_normalize, FeatureQuantiles, QuantileNormalizer, AGE_INPUT, QUANTILE_MAGIC};
pub use preprocess::{
    activity_class, assign_age_groups, filter_completeness, label_conditions, median, split_visits,
    stratify_lifestyle, ActivityClass, LifestyleColumns, LifestyleStrata, SleepClass, ACTIVE_MODERATE_MINUTES,
    ACTIVE_VIGOROUS_MINUTES,
};
pub use split::{split_cohort, CohortSplit, SplitFractions};
pub use table::{
    validate_schema, AgeGroups, CohortTable, ConditionVocabulary, FeatureKind, FeatureSpec, RowRecord, Sex,
    DEFAULT_DIAGNOSES, FIXED_COLUMNS,
};
pub use triplets::{distinct_triplet_count, sample_triplets, Triplet, TripletSet};
