use crate::error::{Error, Result};

/// Confusion matrix (rows are true classes) with per-class and
/// support-weighted F1.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassificationMetrics {
    pub confusion: Vec<Vec<usize>>,
    /// `None` for classes with no support.
    pub per_class_f1: Vec<Option<f64>>,
    pub weighted_f1: f64,
}

pub fn confusion_matrix(truth: &[usize], pred: &[usize], n_classes: usize) -> Result<Vec<Vec<usize>>> {
    if truth.len() != pred.len() {
        return Err(Error::dim(format!("{} labels vs {} predictions", truth.len(), pred.len())));
    }
    let mut cm = vec![vec![0usize; n_classes]; n_classes];
    for (&t, &p) in truth.iter().zip(pred) {
        if t >= n_classes || p >= n_classes {
            return Err(Error::dim(format!("label {} outside {n_classes} classes", t.max(p))));
        }
        cm[t][p] += 1;
    }
    Ok(cm)
}

pub fn classification_metrics(truth: &[usize], pred: &[usize], n_classes: usize) -> Result<ClassificationMetrics> {
    let confusion = confusion_matrix(truth, pred, n_classes)?;
    let total = truth.len();
    let mut per_class_f1 = Vec::with_capacity(n_classes);
    let mut weighted = 0.0;
    for c in 0..n_classes {
        let support: usize = confusion[c].iter().sum();
        if support == 0 {
            per_class_f1.push(None);
            continue;
        }
        let tp = confusion[c][c] as f64;
        let predicted: usize = (0..n_classes).map(|r| confusion[r][c]).sum();
        let f1 = if tp == 0.0 {
            0.0
        } else {
            2.0 * tp / (support as f64 + predicted as f64)
        };
        per_class_f1.push(Some(f1));
        weighted += support as f64 / total as f64 * f1;
    }
    Ok(ClassificationMetrics {
        confusion,
        per_class_f1,
        weighted_f1: weighted,
    })
}

/// `1 - SS_res / SS_tot` about the mean of `truth`; 0 when `truth` is constant.
pub fn r2_score(truth: &[f64], pred: &[f64]) -> Result<f64> {
    if truth.len() != pred.len() || truth.is_empty() {
        return Err(Error::dim(format!("{} targets vs {} predictions", truth.len(), pred.len())));
    }
    let mean = truth.iter().sum::<f64>() / truth.len() as f64;
    let ss_tot: f64 = truth.iter().map(|t| (t - mean).powi(2)).sum();
    let ss_res: f64 = truth.iter().zip(pred).map(|(t, p)| (t - p).powi(2)).sum();
    if ss_tot == 0.0 {
        log::warn!("constant target in held-out fold; R² reported as 0");
        return Ok(0.0);
    }
    Ok(1.0 - ss_res / ss_tot)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn perfect_predictions() {
        let y = [0, 1, 2, 2, 1];
        let m = classification_metrics(&y, &y, 3).unwrap();
        assert_eq!(m.weighted_f1, 1.0);
        for (c, row) in m.confusion.iter().enumerate() {
            assert_eq!(row.iter().sum::<usize>(), y.iter().filter(|&&t| t == c).count());
        }
    }

    #[test]
    fn constant_prediction_on_balanced_binary() {
        let truth = [0, 0, 1, 1];
        let m = classification_metrics(&truth, &[0, 0, 0, 0], 2).unwrap();
        // Class 0: precision 1/2, recall 1, F1 2/3; class 1: F1 0.
        assert!((m.weighted_f1 - 0.5 * 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn absent_classes_are_undefined() {
        let m = classification_metrics(&[0, 0, 2], &[0, 1, 0], 3).unwrap();
        assert_eq!(m.per_class_f1[1], None);
        assert_eq!(m.per_class_f1[2], Some(0.0));
        assert!((m.weighted_f1 - 2.0 / 3.0 * 0.5).abs() < 1e-15);
    }

    #[test]
    fn r2_cases() {
        assert_eq!(r2_score(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap(), 1.0);
        assert_eq!(r2_score(&[1.0, 2.0, 3.0], &[2.0, 2.0, 2.0]).unwrap(), 0.0);
        assert_eq!(r2_score(&[2.0, 2.0], &[1.0, 3.0]).unwrap(), 0.0);
        assert!(r2_score(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.5]).unwrap() < 1.0);
    }

    proptest! {
        #[test]
        fn weighted_f1_matches_definition(
            pairs in prop::collection::vec((0usize..4, 0usize..4), 1..80),
        ) {
            let truth: Vec<usize> = pairs.iter().map(|p| p.0).collect();
            let pred: Vec<usize> = pairs.iter().map(|p| p.1).collect();
            let m = classification_metrics(&truth, &pred, 4).unwrap();
            let n = truth.len() as f64;
            let mut expected = 0.0;
            for c in 0..4 {
                let tp = truth.iter().zip(&pred).filter(|(t, p)| **t == c && **p == c).count() as f64;
                let fp = truth.iter().zip(&pred).filter(|(t, p)| **t != c && **p == c).count() as f64;
                let fn_ = truth.iter().zip(&pred).filter(|(t, p)| **t == c && **p != c).count() as f64;
                let support = tp + fn_;
                if support == 0.0 {
                    continue;
                }
                let precision = if tp + fp == 0.0 { 0.0 } else { tp / (tp + fp) };
                let recall = tp / support;
                let f1 = if precision + recall == 0.0 { 0.0 } else { 2.0 * precision * recall / (precision + recall) };
                expected += support / n * f1;
            }
            prop_assert!((m.weighted_f1 - expected).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(&m.weighted_f1));
        }
    }
}
