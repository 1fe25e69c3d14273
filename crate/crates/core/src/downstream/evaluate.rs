use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use crate::cohort_data::ConditionVocabulary;
use crate::error::{Error, Result};
use crate::numerics::Matrix;

use super::knn::knn_classify;
use super::lda::lda_fit_predict;
use super::metrics::classification_metrics;
use super::pca::{pca_apply, pca_fit};

pub const DEFAULT_KNN_K: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Task {
    /// Healthy (either healthy group) against any diagnosis.
    Binary,
    /// Every vocabulary group.
    Multiclass,
}

impl Task {
    pub const ALL: [Task; 2] = [Task::Binary, Task::Multiclass];

    pub fn as_str(self) -> &'static str {
        match self {
            Task::Binary => "binary",
            Task::Multiclass => "multiclass",
        }
    }

    /// Maps vocabulary ids to task labels; returns the labels and class count.
    pub fn labels(self, condition_ids: &[usize], vocab: &ConditionVocabulary) -> (Vec<usize>, usize) {
        match self {
            Task::Binary => (
                condition_ids
                    .iter()
                    .map(|&c| usize::from(!vocab.is_healthy_id(c)))
                    .collect(),
                2,
            ),
            Task::Multiclass => (condition_ids.to_vec(), vocab.len()),
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Classifier {
    Knn { k: usize },
    Lda,
}

impl Classifier {
    pub fn name(self) -> String {
        match self {
            Classifier::Knn { k } => format!("knn{k}"),
            Classifier::Lda => "lda".into(),
        }
    }

    pub fn fit_predict(self, train: &Matrix, labels: &[usize], query: &Matrix) -> Result<Vec<usize>> {
        match self {
            Classifier::Knn { k } => knn_classify(train, labels, query, k),
            Classifier::Lda => lda_fit_predict(train, labels, query),
        }
    }
}

impl FromStr for Classifier {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "lda" {
            return Ok(Classifier::Lda);
        }
        if let Some(k) = s.strip_prefix("knn") {
            let k = if k.is_empty() {
                DEFAULT_KNN_K
            } else {
                k.parse()
                    .map_err(|_| Error::InvalidConfig(format!("bad KNN neighbour count in {s:?}")))?
            };
            return Ok(Classifier::Knn { k });
        }
        Err(Error::InvalidConfig(format!("unknown classifier {s:?}")))
    }
}

#[derive(Debug, Clone)]
pub struct RepresentationSplit {
    pub name: String,
    pub train: Matrix,
    pub test: Matrix,
}

/// One independently modelled slice of the cohort (one sex).
#[derive(Debug, Clone)]
pub struct EvalPartition {
    /// Vocabulary ids of the training rows.
    pub train_conditions: Vec<usize>,
    pub test_conditions: Vec<usize>,
    pub representations: Vec<RepresentationSplit>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierEval {
    pub representation: String,
    pub classifier: String,
    pub task: Task,
    pub weighted_f1: f64,
    pub per_class_f1: Vec<Option<f64>>,
    pub confusion: Vec<Vec<usize>>,
    pub seed: u64,
}

/// PCA fitted on the training rows, applied to both.
pub fn pca_representation(train: &Matrix, test: &Matrix, k: usize) -> Result<RepresentationSplit> {
    let t = pca_fit(train, k)?;
    Ok(RepresentationSplit {
        name: "pca".into(),
        train: pca_apply(&t, train)?,
        test: pca_apply(&t, test)?,
    })
}

/// Scores every representation × classifier × task. Predictions are made
/// within each partition and pooled before computing metrics.
pub fn evaluate_representations(
    partitions: &[EvalPartition],
    classifiers: &[Classifier],
    tasks: &[Task],
    vocab: &ConditionVocabulary,
    seed: u64,
) -> Result<Vec<ClassifierEval>> {
    let Some(first) = partitions.first() else {
        return Err(Error::State("no partitions to evaluate".into()));
    };
    let names: Vec<&str> = first.representations.iter().map(|r| r.name.as_str()).collect();
    for p in partitions {
        let these: Vec<&str> = p.representations.iter().map(|r| r.name.as_str()).collect();
        if these != names {
            return Err(Error::State(format!(
                "partitions disagree on representations: {names:?} vs {these:?}"
            )));
        }
        for r in &p.representations {
            if r.train.rows() != p.train_conditions.len() || r.test.rows() != p.test_conditions.len() {
                return Err(Error::dim(format!("representation {} does not match its labels", r.name)));
            }
        }
    }
    let mut out = Vec::new();
    for (ri, name) in names.iter().enumerate() {
        for &classifier in classifiers {
            for &task in tasks {
                let mut truth = Vec::new();
                let mut pred = Vec::new();
                let mut n_classes = 0;
                for p in partitions {
                    let rep = &p.representations[ri];
                    let (train_y, n) = task.labels(&p.train_conditions, vocab);
                    let (test_y, _) = task.labels(&p.test_conditions, vocab);
                    n_classes = n;
                    pred.extend(classifier.fit_predict(&rep.train, &train_y, &rep.test)?);
                    truth.extend(test_y);
                }
                let m = classification_metrics(&truth, &pred, n_classes)?;
                out.push(ClassifierEval {
                    representation: name.to_string(),
                    classifier: classifier.name(),
                    task,
                    weighted_f1: m.weighted_f1,
                    per_class_f1: m.per_class_f1,
                    confusion: m.confusion,
                    seed,
                });
            }
        }
    }
    Ok(out)
}

pub const EVAL_HEADER: &str = "representation,classifier,task,weighted_f1,seed";

pub fn write_evals_to<W: Write>(evals: &[ClassifierEval], mut w: W) -> Result<()> {
    writeln!(w, "{EVAL_HEADER}")?;
    for e in evals {
        writeln!(
            w,
            "{},{},{},{},{}",
            e.representation, e.classifier, e.task, e.weighted_f1, e.seed
        )?;
    }
    Ok(())
}

pub fn write_evals(evals: &[ClassifierEval], path: &Path) -> Result<()> {
    let f = std::fs::File::create(path)?;
    write_evals_to(evals, std::io::BufWriter::new(f))
}
