use crate::error::{Error, Result};
use crate::numerics::Matrix;

pub const PCA_TOLERANCE: f64 = 1e-10;
pub const PCA_MAX_ITERATIONS: usize = 20_000;

#[derive(Debug, Clone, PartialEq)]
pub struct PcaTransform {
    pub means: Vec<f64>,
    /// One unit-norm component per row.
    pub components: Matrix,
    pub eigenvalues: Vec<f64>,
    /// Eigenvalue over total variance, per component.
    pub explained: Vec<f64>,
}

fn normalize(v: &mut [f64]) -> f64 {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
    n
}

/// Top-`k` covariance eigenvectors by power iteration with deflation.
pub fn pca_fit(x: &Matrix, k: usize) -> Result<PcaTransform> {
    let (n, p) = x.shape();
    if k == 0 || k > p {
        return Err(Error::InvalidConfig(format!("k = {k} with {p} features")));
    }
    if n < 2 {
        return Err(Error::Fit("PCA needs at least two rows".into()));
    }
    let means = x.column_means();
    let mut centered = x.clone();
    for i in 0..n {
        for (v, m) in centered.row_mut(i).iter_mut().zip(&means) {
            *v -= m;
        }
    }
    let mut cov = centered.t_matmul(&centered)?;
    cov.scale(1.0 / (n - 1) as f64);
    let total: f64 = (0..p).map(|j| cov.get(j, j)).sum();
    if total <= 0.0 {
        return Err(Error::Fit("data has zero variance".into()));
    }

    let mut components = Matrix::zeros(k, p);
    let mut eigenvalues = Vec::with_capacity(k);
    let mut deflated = cov.clone();
    for c in 0..k {
        // Deterministic start with weight on every coordinate.
        let mut v: Vec<f64> = (0..p).map(|j| 1.0 + (j as f64 + c as f64 * 0.37).sin() * 0.5).collect();
        normalize(&mut v);
        let mut lambda = 0.0;
        for _ in 0..PCA_MAX_ITERATIONS {
            let mut w: Vec<f64> = (0..p).map(|i| (0..p).map(|j| deflated.get(i, j) * v[j]).sum()).collect();
            for prev in 0..c {
                let u = components.row(prev);
                let dot: f64 = w.iter().zip(u).map(|(a, b)| a * b).sum();
                w.iter_mut().zip(u).for_each(|(a, b)| *a -= dot * b);
            }
            let norm = normalize(&mut w);
            if norm == 0.0 {
                break;
            }
            let change = v.iter().zip(&w).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            v = w;
            let done = change < PCA_TOLERANCE || (norm - lambda).abs() <= PCA_TOLERANCE * norm;
            lambda = norm;
            if done {
                break;
            }
        }
        let rayleigh: f64 = (0..p)
            .map(|i| v[i] * (0..p).map(|j| cov.get(i, j) * v[j]).sum::<f64>())
            .sum();
        if rayleigh <= 1e-12 * total {
            return Err(Error::Fit(format!("k = {k} exceeds the numerical rank of the data")));
        }
        // Fix the sign so the largest coordinate is positive.
        let lead = (0..p).fold(0, |b, j| if v[j].abs() > v[b].abs() { j } else { b });
        if v[lead] < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        for i in 0..p {
            for j in 0..p {
                let d = deflated.get(i, j) - rayleigh * v[i] * v[j];
                deflated.set(i, j, d);
            }
        }
        components.row_mut(c).copy_from_slice(&v);
        eigenvalues.push(rayleigh);
    }
    let explained = eigenvalues.iter().map(|l| l / total).collect();
    Ok(PcaTransform {
        means,
        components,
        eigenvalues,
        explained,
    })
}

pub fn pca_apply(t: &PcaTransform, x: &Matrix) -> Result<Matrix> {
    if x.cols() != t.means.len() {
        return Err(Error::dim(format!("input width {} vs PCA width {}", x.cols(), t.means.len())));
    }
    let mut centered = x.clone();
    for i in 0..x.rows() {
        for (v, m) in centered.row_mut(i).iter_mut().zip(&t.means) {
            *v -= m;
        }
    }
    centered.matmul_t(&t.components)
}

/// Maps reduced rows back to the input space.
pub fn pca_reconstruct(t: &PcaTransform, z: &Matrix) -> Result<Matrix> {
    let mut x = z.matmul(&t.components)?;
    x.add_row_vector(&t.means)?;
    Ok(x)
}
