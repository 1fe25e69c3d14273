use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::numerics::Matrix;

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Majority vote over the `k` Euclidean-nearest training rows. Distance ties
/// prefer the lower training index; vote ties the smaller class id.
pub fn knn_classify(train: &Matrix, labels: &[usize], query: &Matrix, k: usize) -> Result<Vec<usize>> {
    if train.rows() == 0 {
        return Err(Error::Fit("KNN needs a non-empty training set".into()));
    }
    if labels.len() != train.rows() {
        return Err(Error::dim(format!("{} labels for {} training rows", labels.len(), train.rows())));
    }
    if k == 0 || k > train.rows() {
        return Err(Error::InvalidConfig(format!("k = {k} with {} training rows", train.rows())));
    }
    if query.cols() != train.cols() {
        return Err(Error::dim(format!("query width {} vs training width {}", query.cols(), train.cols())));
    }
    let n_classes = labels.iter().max().map_or(0, |m| m + 1);
    Ok((0..query.rows())
        .into_par_iter()
        .map(|q| {
            let row = query.row(q);
            let mut d: Vec<(f64, usize)> = (0..train.rows()).map(|i| (sq_dist(row, train.row(i)), i)).collect();
            let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
            if k < d.len() {
                d.select_nth_unstable_by(k - 1, cmp);
            }
            let mut votes = vec![0usize; n_classes];
            for &(_, i) in &d[..k] {
                votes[labels[i]] += 1;
            }
            let best = *votes.iter().max().expect("non-empty");
            votes.iter().position(|&v| v == best).expect("max exists")
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pts(rows: &[[f64; 2]]) -> Matrix {
        Matrix::from_rows(rows).unwrap()
    }

    #[test]
    fn one_nn_reproduces_training_labels() {
        let x = pts(&[[0.0, 0.0], [1.0, 0.0], [5.0, 5.0], [6.0, 5.0]]);
        let y = [0, 1, 2, 1];
        assert_eq!(knn_classify(&x, &y, &x, 1).unwrap(), y.to_vec());
    }

    #[test]
    fn k_equal_to_train_size_gives_global_majority() {
        let x = pts(&[[0.0, 0.0], [1.0, 0.0], [5.0, 5.0], [6.0, 5.0], [9.0, 9.0]]);
        let y = [0, 1, 1, 0, 1];
        let q = pts(&[[0.0, 0.0], [100.0, 100.0]]);
        assert_eq!(knn_classify(&x, &y, &q, 5).unwrap(), vec![1, 1]);
    }

    #[test]
    fn hand_built_votes() {
        // Training: A(0,0)=0, B(1,0)=0, C(0,2)=1, D(3,0)=1, E(3,3)=1.
        let x = pts(&[[0.0, 0.0], [1.0, 0.0], [0.0, 2.0], [3.0, 0.0], [3.0, 3.0]]);
        let y = [0, 0, 1, 1, 1];
        // Squared distances:
        // (0.5,0.5): A 0.5, B 0.5, C 2.5 -> 0,0,1 -> 0
        // (2.5,1.5): D 2.5, E 2.5, B 4.5 -> 1,1,0 -> 1
        // (1,1):     B 1, A 2, C 2 -> 0,0,1 -> 0
        let q = pts(&[[0.5, 0.5], [2.5, 1.5], [1.0, 1.0]]);
        assert_eq!(knn_classify(&x, &y, &q, 3).unwrap(), vec![0, 1, 0]);
        // (1.5,1), k=4: B 1.25, then A, C, D at 3.25 -> 0,0,1,1 -> vote tie -> 0
        assert_eq!(knn_classify(&x, &y, &pts(&[[1.5, 1.0]]), 4).unwrap(), vec![0]);
    }

    #[test]
    fn distance_tie_prefers_lower_index() {
        let x = pts(&[[1.0, 0.0], [-1.0, 0.0]]);
        assert_eq!(knn_classify(&x, &[1, 0], &pts(&[[0.0, 0.0]]), 1).unwrap(), vec![1]);
    }

    #[test]
    fn invalid_inputs() {
        let x = pts(&[[0.0, 0.0]]);
        assert!(knn_classify(&x, &[0], &x, 2).is_err());
        assert!(knn_classify(&x, &[0], &x, 0).is_err());
        assert!(knn_classify(&Matrix::zeros(0, 2), &[], &x, 1).is_err());
    }
}
