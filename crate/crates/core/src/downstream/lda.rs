use crate::error::{Error, Result};
use crate::numerics::Matrix;

/// Lower-triangular `L` with `a = L Lᵀ`.
pub fn cholesky(a: &Matrix) -> Result<Matrix> {
    let n = a.rows();
    if a.cols() != n {
        return Err(Error::dim("cholesky needs a square matrix"));
    }
    let mut l = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let mut s = a.get(i, j);
            for k in 0..j {
                s -= l.get(i, k) * l.get(j, k);
            }
            if i == j {
                if !(s > 0.0) {
                    return Err(Error::Fit(format!("matrix is not positive definite at pivot {i}")));
                }
                l.set(i, i, s.sqrt());
            } else {
                l.set(i, j, s / l.get(j, j));
            }
        }
    }
    Ok(l)
}

/// Solves `L Lᵀ x = b`.
pub fn cholesky_solve(l: &Matrix, b: &[f64]) -> Vec<f64> {
    let n = l.rows();
    let mut y = b.to_vec();
    for i in 0..n {
        for k in 0..i {
            y[i] -= l.get(i, k) * y[k];
        }
        y[i] /= l.get(i, i);
    }
    for i in (0..n).rev() {
        for k in i + 1..n {
            y[i] -= l.get(k, i) * y[k];
        }
        y[i] /= l.get(i, i);
    }
    y
}

pub const LDA_RIDGE: f64 = 1e-6;

/// Shared-covariance Gaussian discriminant.
#[derive(Debug, Clone, PartialEq)]
pub struct LdaModel {
    pub classes: Vec<usize>,
    /// `Σ⁻¹ μ_c` per class.
    coef: Vec<Vec<f64>>,
    intercept: Vec<f64>,
}

impl LdaModel {
    pub fn fit(x: &Matrix, labels: &[usize]) -> Result<Self> {
        if labels.len() != x.rows() {
            return Err(Error::dim(format!("{} labels for {} rows", labels.len(), x.rows())));
        }
        let p = x.cols();
        let mut classes: Vec<usize> = labels.to_vec();
        classes.sort_unstable();
        classes.dedup();
        let mut means = Vec::with_capacity(classes.len());
        let mut counts = Vec::with_capacity(classes.len());
        for &c in &classes {
            let rows: Vec<usize> = (0..x.rows()).filter(|&i| labels[i] == c).collect();
            if rows.len() < 2 {
                return Err(Error::Fit(format!("class {c} has {} member(s); LDA needs 2", rows.len())));
            }
            means.push(x.select_rows(&rows).column_means());
            counts.push(rows.len());
        }
        if classes.len() < 2 {
            return Err(Error::Fit("LDA needs at least two classes".into()));
        }
        let mut centered = x.clone();
        for i in 0..x.rows() {
            let k = classes.binary_search(&labels[i]).expect("present");
            for (v, m) in centered.row_mut(i).iter_mut().zip(&means[k]) {
                *v -= m;
            }
        }
        let mut cov = centered.t_matmul(&centered)?;
        cov.scale(1.0 / (x.rows() - classes.len()) as f64);
        let mean_diag = (0..p).map(|j| cov.get(j, j)).sum::<f64>() / p as f64;
        let lambda = LDA_RIDGE * if mean_diag > 0.0 { mean_diag } else { 1.0 };
        for j in 0..p {
            cov.set(j, j, cov.get(j, j) + lambda);
        }
        let l = cholesky(&cov)?;
        let n = x.rows() as f64;
        let mut coef = Vec::with_capacity(classes.len());
        let mut intercept = Vec::with_capacity(classes.len());
        for (m, &cnt) in means.iter().zip(&counts) {
            let w = cholesky_solve(&l, m);
            let quad: f64 = w.iter().zip(m).map(|(a, b)| a * b).sum();
            intercept.push(-0.5 * quad + (cnt as f64 / n).ln());
            coef.push(w);
        }
        Ok(Self {
            classes,
            coef,
            intercept,
        })
    }

    pub fn scores(&self, row: &[f64]) -> Vec<f64> {
        self.coef
            .iter()
            .zip(&self.intercept)
            .map(|(w, b)| w.iter().zip(row).map(|(a, x)| a * x).sum::<f64>() + b)
            .collect()
    }

    pub fn predict(&self, x: &Matrix) -> Result<Vec<usize>> {
        if x.cols() != self.coef[0].len() {
            return Err(Error::dim(format!("query width {} vs model width {}", x.cols(), self.coef[0].len())));
        }
        Ok(x.row_iter()
            .map(|row| {
                let s = self.scores(row);
                let mut best = 0;
                for k in 1..s.len() {
                    if s[k] > s[best] {
                        best = k;
                    }
                }
                self.classes[best]
            })
            .collect())
    }
}

pub fn lda_fit_predict(train: &Matrix, labels: &[usize], query: &Matrix) -> Result<Vec<usize>> {
    LdaModel::fit(train, labels)?.predict(query)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn gaussians(n: usize, sep: f64, dim: usize, seed: u64) -> (Matrix, Vec<usize>) {
        let mut rng = Rng::seed_from(seed);
        let mut x = Matrix::zeros(2 * n, dim);
        let mut y = Vec::new();
        for i in 0..2 * n {
            let c = i % 2;
            for j in 0..dim {
                let z: f64 = StandardNormal.sample(&mut rng);
                let shift = if j == 0 { sep / 2.0 * if c == 0 { -1.0 } else { 1.0 } } else { 0.0 };
                x.set(i, j, shift + z);
            }
            y.push(c);
        }
        (x, y)
    }

    #[test]
    fn cholesky_round_trip() {
        let a = Matrix::from_rows(&[[4.0, 2.0, 0.4], [2.0, 5.0, 1.0], [0.4, 1.0, 3.0]]).unwrap();
        let l = cholesky(&a).unwrap();
        let back = l.matmul_t(&l).unwrap();
        for (x, y) in back.data().iter().zip(a.data()) {
            assert!((x - y).abs() < 1e-12);
        }
        let x = cholesky_solve(&l, &[1.0, 2.0, 3.0]);
        let ax: Vec<f64> = (0..3).map(|i| (0..3).map(|j| a.get(i, j) * x[j]).sum()).collect();
        for (u, v) in ax.iter().zip([1.0, 2.0, 3.0]) {
            assert!((u - v).abs() < 1e-12);
        }
        assert!(cholesky(&Matrix::from_rows(&[[1.0, 2.0], [2.0, 1.0]]).unwrap()).is_err());
    }

    #[test]
    fn separated_gaussians_are_classified() {
        let (x, y) = gaussians(2000, 4.0, 3, 1);
        let (q, qy) = gaussians(2000, 4.0, 3, 2);
        let pred = lda_fit_predict(&x, &y, &q).unwrap();
        let acc = pred.iter().zip(&qy).filter(|(a, b)| a == b).count() as f64 / qy.len() as f64;
        // Means 4σ apart: Bayes accuracy is Φ(2) ≈ 0.977 and the boundary is the bisector x0 = 0.
        assert!(acc > 0.97, "{acc}");
        let model = LdaModel::fit(&x, &y).unwrap();
        let left = Matrix::from_rows(&[[-0.3, 0.0, 0.0]]).unwrap();
        let right = Matrix::from_rows(&[[0.3, 0.0, 0.0]]).unwrap();
        assert_eq!(model.predict(&left).unwrap(), vec![0]);
        assert_eq!(model.predict(&right).unwrap(), vec![1]);
    }

    #[test]
    fn means_four_sigma_from_bisector() {
        let (x, y) = gaussians(1000, 8.0, 3, 3);
        let (q, qy) = gaussians(1000, 8.0, 3, 4);
        let pred = lda_fit_predict(&x, &y, &q).unwrap();
        let acc = pred.iter().zip(&qy).filter(|(a, b)| a == b).count() as f64 / qy.len() as f64;
        assert!(acc >= 0.99, "{acc}");
    }

    #[test]
    fn duplicated_columns_match_single_copy() {
        let (x, y) = gaussians(300, 3.0, 2, 5);
        let (q, _) = gaussians(300, 3.0, 2, 6);
        let dup = |m: &Matrix| m.hstack(&m.select_columns(&[0])).unwrap();
        let single = lda_fit_predict(&x, &y, &q).unwrap();
        let doubled = lda_fit_predict(&dup(&x), &y, &dup(&q)).unwrap();
        let agree = single.iter().zip(&doubled).filter(|(a, b)| a == b).count();
        assert_eq!(agree, single.len());
    }

    #[test]
    fn query_at_class_mean() {
        let (x, y) = gaussians(200, 3.0, 2, 7);
        let model = LdaModel::fit(&x, &y).unwrap();
        for c in 0..2 {
            let rows: Vec<usize> = (0..x.rows()).filter(|&i| y[i] == c).collect();
            let mean = x.select_rows(&rows).column_means();
            assert_eq!(model.predict(&Matrix::from_rows(&[mean]).unwrap()).unwrap(), vec![c]);
        }
    }

    #[test]
    fn singleton_class_is_an_error() {
        let x = Matrix::from_rows(&[[0.0], [1.0], [2.0]]).unwrap();
        assert!(matches!(LdaModel::fit(&x, &[0, 0, 1]), Err(Error::Fit(_))));
    }
}
