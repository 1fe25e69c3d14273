use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::numerics::{derive_seed, Matrix, Rng};

use super::gbt::{gbt_fit, GbtParams};
use super::metrics::r2_score;

pub const MIN_PREDICTION_ROWS: usize = 50;
pub const DEFAULT_FOLDS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Variant {
    MarkerOnly,
    MarkerAllLifestyle,
    MarkerEmbeddings,
    MarkerEmbeddingsLifestyle,
}

impl Variant {
    pub const ALL: [Variant; 4] = [
        Variant::MarkerOnly,
        Variant::MarkerAllLifestyle,
        Variant::MarkerEmbeddings,
        Variant::MarkerEmbeddingsLifestyle,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::MarkerOnly => "marker_only",
            Variant::MarkerAllLifestyle => "marker_all_lifestyle",
            Variant::MarkerEmbeddings => "marker_embeddings",
            Variant::MarkerEmbeddingsLifestyle => "marker_embeddings_lifestyle",
        }
    }

    fn uses_other_biomarkers(self) -> bool {
        self == Variant::MarkerAllLifestyle
    }

    fn uses_lifestyle(self) -> bool {
        matches!(self, Variant::MarkerAllLifestyle | Variant::MarkerEmbeddingsLifestyle)
    }

    fn uses_embeddings(self) -> bool {
        matches!(self, Variant::MarkerEmbeddings | Variant::MarkerEmbeddingsLifestyle)
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.as_str() == s.trim())
            .ok_or_else(|| Error::InvalidConfig(format!("unknown prediction variant {s:?}")))
    }
}

/// Participants with a follow-up visit, one row each. Missing values are NaN.
#[derive(Debug, Clone)]
pub struct PredictionCohort {
    pub ids: Vec<String>,
    pub age: Vec<f64>,
    /// 1 for male, 0 for female.
    pub sex: Vec<f64>,
    pub elapsed_years: Vec<f64>,
    pub biomarker_names: Vec<String>,
    /// First-visit biomarker values.
    pub biomarkers: Matrix,
    /// Follow-up biomarker values, same columns as `biomarkers`.
    pub future: Matrix,
    pub lifestyle: Matrix,
    pub embeddings: Matrix,
}

impl PredictionCohort {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.len();
        let lens = [
            self.age.len(),
            self.sex.len(),
            self.elapsed_years.len(),
            self.biomarkers.rows(),
            self.future.rows(),
            self.lifestyle.rows(),
            self.embeddings.rows(),
        ];
        if lens.iter().any(|&l| l != n) {
            return Err(Error::dim(format!("prediction cohort blocks disagree on row count: {n} vs {lens:?}")));
        }
        if self.biomarkers.cols() != self.biomarker_names.len() || self.future.cols() != self.biomarker_names.len() {
            return Err(Error::dim("biomarker blocks do not match biomarker names"));
        }
        Ok(())
    }

    fn marker_index(&self, marker: &str) -> Result<usize> {
        self.biomarker_names
            .iter()
            .position(|m| m == marker)
            .ok_or_else(|| Error::Schema(format!("unknown marker of interest {marker:?}")))
    }

    /// Input matrix for `variant`: age, sex, b_t, optional elapsed years, then
    /// the variant's blocks.
    pub fn design(&self, marker: usize, variant: Variant, with_elapsed: bool) -> Matrix {
        let n = self.len();
        let mut cols: Vec<Vec<f64>> = vec![self.age.clone(), self.sex.clone(), self.biomarkers.column(marker)];
        if with_elapsed {
            cols.push(self.elapsed_years.clone());
        }
        if variant.uses_other_biomarkers() {
            for j in (0..self.biomarkers.cols()).filter(|&j| j != marker) {
                cols.push(self.biomarkers.column(j));
            }
        }
        if variant.uses_embeddings() {
            for j in 0..self.embeddings.cols() {
                cols.push(self.embeddings.column(j));
            }
        }
        if variant.uses_lifestyle() {
            for j in 0..self.lifestyle.cols() {
                cols.push(self.lifestyle.column(j));
            }
        }
        let mut m = Matrix::zeros(n, cols.len());
        for (j, c) in cols.iter().enumerate() {
            for (i, v) in c.iter().enumerate() {
                m.set(i, j, *v);
            }
        }
        m
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictConfig {
    pub folds: usize,
    pub gbt: GbtParams,
    pub with_elapsed: bool,
    pub seed: u64,
}

impl Default for PredictConfig {
    fn default() -> Self {
        Self {
            folds: DEFAULT_FOLDS,
            gbt: GbtParams::default(),
            with_elapsed: true,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictionTask {
    pub marker: String,
    pub variant: Variant,
    /// Fold of each eligible row, indexed like `rows`.
    pub fold_of: Vec<usize>,
    /// Cohort rows used for this marker.
    pub rows: Vec<usize>,
    pub fold_r2: Vec<f64>,
    pub r2_mean: f64,
    pub r2_sd: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SkippedTask {
    pub marker: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PredictionReport {
    pub tasks: Vec<PredictionTask>,
    pub skipped: Vec<SkippedTask>,
}

/// Seeded fold id for each of `n` rows, as balanced as possible.
pub fn assign_folds(n: usize, folds: usize, seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut Rng::seed_from(derive_seed(seed, "predict.folds")));
    let mut fold_of = vec![0; n];
    for (pos, &i) in order.iter().enumerate() {
        fold_of[i] = pos % folds;
    }
    fold_of
}

fn mean_sd(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let sd = if v.len() > 1 {
        (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    (mean, sd)
}

/// Fills NaN cells with the training-row column mean.
fn impute(x: &Matrix, train: &[usize]) -> Matrix {
    let mut out = x.clone();
    for j in 0..x.cols() {
        let vals: Vec<f64> = train.iter().map(|&i| x.get(i, j)).filter(|v| v.is_finite()).collect();
        let fill = if vals.is_empty() { 0.0 } else { vals.iter().sum::<f64>() / vals.len() as f64 };
        for i in 0..x.rows() {
            if !out.get(i, j).is_finite() {
                out.set(i, j, fill);
            }
        }
    }
    out
}

fn fold_r2(x: &Matrix, y: &[f64], fold_of: &[usize], fold: usize, gbt: &GbtParams) -> Result<f64> {
    let train: Vec<usize> = (0..y.len()).filter(|&i| fold_of[i] != fold).collect();
    let test: Vec<usize> = (0..y.len()).filter(|&i| fold_of[i] == fold).collect();
    let x = impute(x, &train);
    let ty: Vec<f64> = train.iter().map(|&i| y[i]).collect();
    let model = gbt_fit(&x.select_rows(&train), &ty, gbt)?;
    let pred = model.predict(&x.select_rows(&test))?;
    let truth: Vec<f64> = test.iter().map(|&i| y[i]).collect();
    r2_score(&truth, &pred)
}

/// Cross-validated GBT prediction of each marker's follow-up value. Folds are
/// assigned once over the cohort and shared by every marker and variant.
pub fn predict_future_values(
    cohort: &PredictionCohort,
    markers: &[String],
    variants: &[Variant],
    cfg: &PredictConfig,
) -> Result<PredictionReport> {
    cohort.validate()?;
    cfg.gbt.validate()?;
    if cfg.folds < 2 {
        return Err(Error::InvalidConfig(format!("need at least 2 folds, got {}", cfg.folds)));
    }
    let all_folds = assign_folds(cohort.len(), cfg.folds, cfg.seed);
    let mut report = PredictionReport::default();
    let mut jobs = Vec::new();
    for name in markers {
        let m = cohort.marker_index(name)?;
        let rows: Vec<usize> = (0..cohort.len())
            .filter(|&i| cohort.future.get(i, m).is_finite() && cohort.biomarkers.get(i, m).is_finite())
            .collect();
        if rows.len() < MIN_PREDICTION_ROWS {
            let reason = format!("{} eligible participants, need {MIN_PREDICTION_ROWS}", rows.len());
            log::warn!("skipping prediction for {name}: {reason}");
            report.skipped.push(SkippedTask {
                marker: name.clone(),
                reason,
            });
            continue;
        }
        let y: Vec<f64> = rows.iter().map(|&i| cohort.future.get(i, m)).collect();
        let fold_of: Vec<usize> = rows.iter().map(|&i| all_folds[i]).collect();
        for &variant in variants {
            let x = cohort.design(m, variant, cfg.with_elapsed).select_rows(&rows);
            jobs.push((name.clone(), variant, rows.clone(), fold_of.clone(), x, y.clone()));
        }
    }
    let results: Vec<Result<Vec<f64>>> = jobs
        .par_iter()
        .map(|(_, _, _, fold_of, x, y)| {
            (0..cfg.folds)
                .into_par_iter()
                .map(|f| fold_r2(x, y, fold_of, f, &cfg.gbt))
                .collect()
        })
        .collect();
    for ((marker, variant, rows, fold_of, _, _), r2) in jobs.into_iter().zip(results) {
        let fold_r2 = r2?;
        let (r2_mean, r2_sd) = mean_sd(&fold_r2);
        report.tasks.push(PredictionTask {
            marker,
            variant,
            fold_of,
            rows,
            fold_r2,
            r2_mean,
            r2_sd,
        });
    }
    Ok(report)
}

impl PredictionReport {
    pub fn task(&self, marker: &str, variant: Variant) -> Option<&PredictionTask> {
        self.tasks.iter().find(|t| t.marker == marker && t.variant == variant)
    }

    pub fn write_results_to<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "marker,variant,fold,r2")?;
        for t in &self.tasks {
            for (f, r2) in t.fold_r2.iter().enumerate() {
                writeln!(w, "{},{},{},{}", t.marker, t.variant, f, r2)?;
            }
        }
        Ok(())
    }

    pub fn write_summary_to<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "marker,variant,r2_mean,r2_sd")?;
        for t in &self.tasks {
            writeln!(w, "{},{},{},{}", t.marker, t.variant, t.r2_mean, t.r2_sd)?;
        }
        Ok(())
    }

    pub fn write_results(&self, path: &Path) -> Result<()> {
        self.write_results_to(std::io::BufWriter::new(std::fs::File::create(path)?))
    }

    pub fn write_summary(&self, path: &Path) -> Result<()> {
        self.write_summary_to(std::io::BufWriter::new(std::fs::File::create(path)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, StandardNormal};

    fn cohort(n: usize, seed: u64, future: impl Fn(&[f64], f64) -> f64) -> PredictionCohort {
        let mut rng = Rng::seed_from(seed);
        let mut z = || -> f64 { StandardNormal.sample(&mut rng) };
        let p = 4;
        let biomarkers = Matrix::from_vec(n, p, (0..n * p).map(|_| z()).collect()).unwrap();
        let lifestyle = Matrix::from_vec(n, 2, (0..n * 2).map(|_| z()).collect()).unwrap();
        let embeddings = Matrix::from_vec(n, 3, (0..n * 3).map(|_| z()).collect()).unwrap();
        let mut fut = Matrix::zeros(n, p);
        for i in 0..n {
            let noise = z();
            for j in 0..p {
                fut.set(i, j, future(biomarkers.row(i), noise));
            }
        }
        PredictionCohort {
            ids: (0..n).map(|i| format!("P{i}")).collect(),
            age: (0..n).map(|i| 40.0 + (i % 30) as f64).collect(),
            sex: (0..n).map(|i| (i % 2) as f64).collect(),
            elapsed_years: (0..n).map(|i| 2.0 + (i % 4) as f64).collect(),
            biomarker_names: (0..p).map(|j| format!("m{j}")).collect(),
            biomarkers,
            future: fut,
            lifestyle,
            embeddings,
        }
    }

    fn fast() -> PredictConfig {
        PredictConfig {
            gbt: GbtParams {
                rounds: 60,
                ..GbtParams::default()
            },
            ..PredictConfig::default()
        }
    }

    #[test]
    fn folds_partition_rows() {
        let f = assign_folds(103, 5, 1);
        for k in 0..5 {
            let c = f.iter().filter(|&&x| x == k).count();
            assert!((20..=21).contains(&c));
        }
        assert_eq!(f, assign_folds(103, 5, 1));
    }

    #[test]
    fn design_always_has_common_inputs() {
        let c = cohort(60, 1, |b, _| b[0]);
        for v in Variant::ALL {
            let x = c.design(2, v, false);
            assert_eq!(x.column(0), c.age);
            assert_eq!(x.column(1), c.sex);
            assert_eq!(x.column(2), c.biomarkers.column(2));
        }
        assert_eq!(c.design(0, Variant::MarkerOnly, true).cols(), 4);
        assert_eq!(c.design(0, Variant::MarkerAllLifestyle, false).cols(), 3 + 3 + 2);
        assert_eq!(c.design(0, Variant::MarkerEmbeddingsLifestyle, false).cols(), 3 + 3 + 2);
    }

    #[test]
    fn target_equal_to_baseline_is_nearly_perfect() {
        let c = cohort(400, 2, |b, _| b[0]);
        let r = predict_future_values(&c, &["m0".into()], &Variant::ALL, &PredictConfig::default()).unwrap();
        assert_eq!(r.tasks.len(), 4);
        for t in &r.tasks {
            assert_eq!(t.fold_r2.len(), 5);
            assert!(t.r2_mean >= 0.95, "{} {}", t.variant, t.r2_mean);
        }
    }

    #[test]
    fn noise_target_has_no_skill() {
        let c = cohort(500, 3, |_, noise| noise);
        let r = predict_future_values(&c, &["m1".into()], &[Variant::MarkerOnly, Variant::MarkerAllLifestyle], &fast()).unwrap();
        for t in &r.tasks {
            assert!(t.r2_mean <= 0.05, "{} {}", t.variant, t.r2_mean);
        }
    }

    #[test]
    fn small_cohorts_are_skipped() {
        let c = cohort(49, 4, |b, _| b[0]);
        let r = predict_future_values(&c, &["m0".into()], &Variant::ALL, &fast()).unwrap();
        assert!(r.tasks.is_empty());
        assert_eq!(r.skipped.len(), 1);
    }

    #[test]
    fn csv_cardinality() {
        let c = cohort(120, 5, |b, n| b[0] + 0.1 * n);
        let r = predict_future_values(&c, &["m0".into(), "m3".into()], &Variant::ALL, &fast()).unwrap();
        let mut buf = Vec::new();
        r.write_results_to(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 1 + 2 * 4 * 5);
        let mut buf = Vec::new();
        r.write_summary_to(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 1 + 2 * 4);
        assert!("marker_only".parse::<Variant>().is_ok());
    }
}
