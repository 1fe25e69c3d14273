//! Seeded synthetic cohorts with known class structure, planted lifestyle
//! effects on biomarkers, and a follow-up visit process.
//!
//! Visit-1 biomarker `j` for a participant of class `c`:
//!
//! ```text
//! b_j = base_j + offset_cj + sex_j * male + age_j * (age - age_mid)
//!       + activity_j * active + sleep_j * (sleep - sleep_mean)
//!       + scale_c * (L_j . f + idio_sd * z_j)
//! ```
//!
//! where `f` holds shared latent factors and `offset_cj` sums the offsets of
//! the class and its parent classes. The follow-up value is
//!
//! ```text
//! y_j = alpha * b_j + (1 - alpha) * center_j + gamma * offset_cj + beta_j * e + noise
//! ```
//!
//! with `center_j` the noiseless part of `b_j` and `e` the standardized log
//! moderate-activity latent.

use std::io::Write;
use std::path::Path;

use rand::seq::index::sample;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::cohort_data::{CohortTable, FeatureKind, FeatureSpec, ReferenceRange, RowRecord, Sex};
use crate::error::{Error, Result};
use crate::numerics::{derive_seed, Matrix, Rng};

pub const MODERATE_MINUTES: &str = "moderate_min";
pub const VIGOROUS_MINUTES: &str = "vigorous_min";
pub const SLEEP_HOURS: &str = "sleep_hours";
pub const SEDENTARY_HOURS: &str = "sedentary_hours";
pub const LIFESTYLE_FEATURES: [&str; 4] = [MODERATE_MINUTES, VIGOROUS_MINUTES, SLEEP_HOURS, SEDENTARY_HOURS];

pub fn biomarker_name(j: usize) -> String {
    format!("bm{j:02}")
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassDef {
    /// Raw condition code written to the cohort file.
    pub code: String,
    pub prevalence: f64,
    /// Multiplies the within-class noise.
    pub cov_scale: f64,
    /// Own mean offset, one entry per biomarker.
    pub offset: Vec<f64>,
    /// Comorbidity links: indices of classes whose offsets are added.
    pub parents: Vec<usize>,
}

/// Weekly minutes are lognormal; hours are normal and rounded.
#[derive(Debug, Clone, PartialEq)]
pub struct LifestyleModel {
    pub moderate_log_mean: f64,
    pub moderate_log_sd: f64,
    pub vigorous_log_mean: f64,
    pub vigorous_log_sd: f64,
    pub sleep_mean: f64,
    pub sleep_sd: f64,
    pub sedentary_mean: f64,
    pub sedentary_sd: f64,
}

impl Default for LifestyleModel {
    fn default() -> Self {
        Self {
            moderate_log_mean: 130f64.ln(),
            moderate_log_sd: 0.8,
            vigorous_log_mean: 40f64.ln(),
            vigorous_log_sd: 1.0,
            sleep_mean: 7.0,
            sleep_sd: 1.0,
            sedentary_mean: 6.0,
            sedentary_sd: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FollowupSpec {
    /// Fraction of participants with a second visit.
    pub fraction: f64,
    pub alpha: f64,
    pub gamma: f64,
    /// Lifestyle-score coefficient per biomarker.
    pub beta: Vec<f64>,
    pub noise_sd: f64,
    pub elapsed_years: (f64, f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorSpec {
    pub participants: usize,
    pub seed: u64,
    pub base_mean: Vec<f64>,
    pub idio_sd: f64,
    /// Biomarkers x factors.
    pub loadings: Matrix,
    pub classes: Vec<ClassDef>,
    pub male_fraction: f64,
    pub age_range: (f64, f64),
    pub sex_effect: Vec<f64>,
    pub age_slope: Vec<f64>,
    pub activity_effect: Vec<f64>,
    /// Shift per hour of sleep away from the population mean.
    pub sleep_effect: Vec<f64>,
    pub lifestyle: LifestyleModel,
    pub followup: FollowupSpec,
    /// Fraction of participants with one to three empty cells.
    pub missingness: f64,
}

/// Default layout over 30 biomarkers.
pub mod layout {
    use std::ops::Range;

    pub const BIOMARKERS: usize = 30;
    pub const DIABETES: Range<usize> = 0..4;
    pub const CARDIOVASCULAR: Range<usize> = 4..8;
    pub const OTHER_SERIOUS: Range<usize> = 8..12;
    pub const RESPIRATORY: Range<usize> = 12..16;
    pub const CANCER: Range<usize> = 16..20;
    pub const ACTIVITY: Range<usize> = 0..10;
    pub const SLEEP: Range<usize> = 10..14;
    pub const FOLLOWUP: Range<usize> = 20..24;
    pub const SEX: Range<usize> = 24..30;
    pub const AGE: Range<usize> = 20..30;
    pub const FACTORS: usize = 3;
}

pub const DEFAULT_CLASS_OFFSET: f64 = 1.0;
pub const DEFAULT_ACTIVITY_EFFECT: f64 = 0.35;
pub const DEFAULT_SLEEP_EFFECT: f64 = 0.25;
pub const DEFAULT_TARGET_DELTA_R2: f64 = 0.10;

fn range_vec(m: usize, range: std::ops::Range<usize>, v: f64) -> Vec<f64> {
    (0..m).map(|j| if range.contains(&j) { v } else { 0.0 }).collect()
}

impl Default for GeneratorSpec {
    fn default() -> Self {
        let mut spec = Self::with_effects(DEFAULT_CLASS_OFFSET, DEFAULT_ACTIVITY_EFFECT, DEFAULT_SLEEP_EFFECT);
        spec.set_followup_delta_r2(DEFAULT_TARGET_DELTA_R2, true)
            .expect("default spec admits the target");
        spec
    }
}

impl GeneratorSpec {
    /// Default structure with the given effect sizes and no follow-up lifestyle effect.
    pub fn with_effects(class_offset: f64, activity: f64, sleep: f64) -> Self {
        use layout::*;
        let m = BIOMARKERS;
        let base = |r: std::ops::Range<usize>| range_vec(m, r, class_offset);
        let zero = vec![0.0; m];
        let class = |code: &str, prevalence: f64, offset: Vec<f64>, parents: Vec<usize>| ClassDef {
            code: code.to_string(),
            prevalence,
            cov_scale: 1.0,
            offset,
            parents,
        };
        // Index order matters for the parent links below.
        let classes = vec![
            class("healthy", 0.40, zero.clone(), vec![]),
            class("diabetes", 0.06, base(DIABETES), vec![]),
            class("cardiovascular", 0.06, base(CARDIOVASCULAR), vec![]),
            class("other_serious", 0.06, base(OTHER_SERIOUS), vec![]),
            class("respiratory", 0.06, base(RESPIRATORY), vec![]),
            class("cancer", 0.06, base(CANCER), vec![]),
            class("diabetes_cardiovascular", 0.06, zero.clone(), vec![1, 2]),
            class("diabetes_other_serious", 0.06, zero.clone(), vec![1, 3]),
            class("diabetes_cardiovascular_other_serious", 0.06, zero.clone(), vec![1, 2, 3]),
            class("multiple_non_metabolic", 0.06, zero.clone(), vec![4, 5]),
            class("cardiovascular_other_serious", 0.06, zero.clone(), vec![2, 3]),
        ];
        let mut loadings = Matrix::zeros(m, FACTORS);
        for j in 0..m {
            for k in 0..FACTORS {
                loadings.set(j, k, 0.6 * ((j * (k + 2)) as f64 * 0.7 + k as f64).sin());
            }
        }
        Self {
            participants: 5000,
            seed: 7,
            base_mean: (0..m).map(|j| 5.0 + (j % 7) as f64).collect(),
            idio_sd: 1.0,
            loadings,
            classes,
            male_fraction: 0.5,
            age_range: (36.0, 76.0),
            sex_effect: range_vec(m, SEX, 0.6),
            age_slope: range_vec(m, AGE, 0.015),
            activity_effect: range_vec(m, ACTIVITY, activity),
            sleep_effect: range_vec(m, SLEEP, sleep),
            lifestyle: LifestyleModel::default(),
            followup: FollowupSpec {
                fraction: 0.15,
                alpha: 0.7,
                gamma: 0.2,
                beta: zero,
                noise_sd: 0.6,
                elapsed_years: (2.0, 5.0),
            },
            missingness: 0.05,
        }
    }

    pub fn biomarkers(&self) -> usize {
        self.base_mean.len()
    }

    pub fn healthy_class(&self) -> Result<usize> {
        self.classes
            .iter()
            .position(|c| c.code == "healthy")
            .ok_or_else(|| Error::InvalidConfig("generator needs a `healthy` class".into()))
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.biomarkers();
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if m == 0 || self.participants == 0 {
            return bad("generator needs biomarkers and participants".into());
        }
        for (name, v) in [
            ("sex_effect", &self.sex_effect),
            ("age_slope", &self.age_slope),
            ("activity_effect", &self.activity_effect),
            ("sleep_effect", &self.sleep_effect),
            ("followup.beta", &self.followup.beta),
        ] {
            if v.len() != m || v.iter().any(|x| !x.is_finite()) {
                return bad(format!("{name} needs {m} finite entries"));
            }
        }
        if self.loadings.rows() != m || !self.loadings.all_finite() {
            return bad(format!("loadings need {m} finite rows"));
        }
        if self.classes.len() < 2 {
            return bad("at least two classes are required".into());
        }
        let total: f64 = self.classes.iter().map(|c| c.prevalence).sum();
        if (total - 1.0).abs() > 1e-9 || self.classes.iter().any(|c| c.prevalence < 0.0) {
            return bad(format!("class prevalences sum to {total}, not 1"));
        }
        for (k, c) in self.classes.iter().enumerate() {
            if c.offset.len() != m || c.offset.iter().any(|x| !x.is_finite()) {
                return bad(format!("class `{}` offset needs {m} finite entries", c.code));
            }
            if !(c.cov_scale >= 0.0 && c.cov_scale.is_finite()) {
                return bad(format!("class `{}` has invalid covariance scale", c.code));
            }
            for &p in &c.parents {
                if p >= self.classes.len() || p == k || !self.classes[p].parents.is_empty() {
                    return bad(format!("class `{}` has an invalid comorbidity link", c.code));
                }
            }
        }
        if !(0.0..=0.5).contains(&self.missingness) {
            return bad(format!("missingness {} outside [0, 0.5]", self.missingness));
        }
        if !(0.0..=1.0).contains(&self.male_fraction) || self.age_range.0 >= self.age_range.1 {
            return bad("invalid demographics".into());
        }
        let f = &self.followup;
        if !(0.0..=1.0).contains(&f.fraction)
            || !f.alpha.is_finite()
            || !f.gamma.is_finite()
            || !(f.noise_sd >= 0.0)
            || f.elapsed_years.0 > f.elapsed_years.1
        {
            return bad("invalid follow-up parameters".into());
        }
        if !(self.idio_sd >= 0.0) || !self.base_mean.iter().all(|v| v.is_finite()) {
            return bad("invalid noise or base means".into());
        }
        let l = &self.lifestyle;
        if !(l.moderate_log_sd > 0.0 && l.vigorous_log_sd > 0.0 && l.sleep_sd >= 0.0 && l.sedentary_sd >= 0.0) {
            return bad("invalid lifestyle model".into());
        }
        Ok(())
    }

    pub fn schema(&self) -> Vec<FeatureSpec> {
        let mut s: Vec<FeatureSpec> = (0..self.biomarkers())
            .map(|j| {
                let f = FeatureSpec::new(biomarker_name(j), FeatureKind::Biomarker);
                if layout::FOLLOWUP.contains(&j) {
                    f.of_interest()
                } else {
                    f
                }
            })
            .collect();
        s.extend(LIFESTYLE_FEATURES.iter().map(|n| FeatureSpec::new(*n, FeatureKind::Lifestyle)));
        s
    }

    /// Total mean offset of class `c`.
    pub fn class_offset(&self, c: usize) -> Vec<f64> {
        let mut o = self.classes[c].offset.clone();
        for &p in &self.classes[c].parents {
            for (a, b) in o.iter_mut().zip(&self.classes[p].offset) {
                *a += b;
            }
        }
        o
    }

    fn age_mid(&self) -> f64 {
        0.5 * (self.age_range.0 + self.age_range.1)
    }

    /// Probability of meeting the activity rule on rounded minutes.
    pub fn p_active(&self) -> f64 {
        let n = Normal::new(0.0, 1.0).expect("unit normal");
        let l = &self.lifestyle;
        let below = |thr: f64, mu: f64, sd: f64| n.cdf(((thr - 0.5).ln() - mu) / sd);
        1.0 - below(150.0, l.moderate_log_mean, l.moderate_log_sd) * below(75.0, l.vigorous_log_mean, l.vigorous_log_sd)
    }

    fn within_noise_var(&self, c: usize, j: usize) -> f64 {
        let lf: f64 = (0..self.loadings.cols()).map(|k| self.loadings.get(j, k).powi(2)).sum();
        self.classes[c].cov_scale.powi(2) * (lf + self.idio_sd * self.idio_sd)
    }

    /// Variance of the covariate-driven part (sex, age, lifestyle) of marker `j`.
    fn covariate_var(&self, j: usize) -> f64 {
        let pm = self.male_fraction;
        let pa = self.p_active();
        let (lo, hi) = self.age_range;
        self.sex_effect[j].powi(2) * pm * (1.0 - pm)
            + self.age_slope[j].powi(2) * (hi - lo).powi(2) / 12.0
            + self.activity_effect[j].powi(2) * pa * (1.0 - pa)
            + self.sleep_effect[j].powi(2) * self.lifestyle.sleep_sd.powi(2)
    }

    fn covariate_mean(&self, j: usize) -> f64 {
        self.sex_effect[j] * self.male_fraction + self.activity_effect[j] * self.p_active()
    }

    fn class_weights(&self, classes: &[usize]) -> Result<Vec<(usize, f64)>> {
        let total: f64 = classes.iter().map(|&c| self.classes[c].prevalence).sum();
        if classes.is_empty() || total <= 0.0 {
            return Err(Error::InvalidConfig("empty class population".into()));
        }
        Ok(classes.iter().map(|&c| (c, self.classes[c].prevalence / total)).collect())
    }

    /// Population mean and variance of visit-1 marker `j` over `classes`,
    /// weighted by prevalence.
    pub fn marker_moments(&self, j: usize, classes: &[usize]) -> Result<(f64, f64)> {
        let w = self.class_weights(classes)?;
        let class_means: Vec<f64> = w
            .iter()
            .map(|&(c, _)| self.base_mean[j] + self.class_offset(c)[j] + self.covariate_mean(j))
            .collect();
        let mean: f64 = w.iter().zip(&class_means).map(|(&(_, p), m)| p * m).sum();
        let var: f64 = w
            .iter()
            .zip(&class_means)
            .map(|(&(c, p), m)| p * (self.within_noise_var(c, j) + (m - mean).powi(2)))
            .sum::<f64>()
            + self.covariate_var(j);
        Ok((mean, var))
    }

    /// Variance of the follow-up value of marker `j` over `classes`, split
    /// into the part without the lifestyle term and the lifestyle term.
    pub fn followup_variance(&self, j: usize, classes: &[usize]) -> Result<(f64, f64)> {
        if self.activity_effect[j] != 0.0 {
            return Err(Error::InvalidConfig(format!(
                "marker {} carries an activity effect, so the lifestyle score is not independent of it",
                biomarker_name(j)
            )));
        }
        let f = &self.followup;
        let w = self.class_weights(classes)?;
        let shifts: Vec<f64> = w.iter().map(|&(c, _)| (1.0 + f.gamma) * self.class_offset(c)[j]).collect();
        let mean: f64 = w.iter().zip(&shifts).map(|(&(_, p), s)| p * s).sum();
        let between: f64 = w.iter().zip(&shifts).map(|(&(_, p), s)| p * (s - mean).powi(2)).sum();
        let within: f64 = w
            .iter()
            .map(|&(c, p)| p * f.alpha * f.alpha * self.within_noise_var(c, j))
            .sum();
        let v0 = between + within + self.covariate_var(j) + f.noise_sd * f.noise_sd;
        Ok((v0, f.beta[j] * f.beta[j]))
    }

    /// Population R² gained by adding the lifestyle score to a regression of
    /// the follow-up value on the visit-1 value.
    pub fn analytic_delta_r2(&self, j: usize, classes: &[usize]) -> Result<f64> {
        let (v0, vb) = self.followup_variance(j, classes)?;
        Ok(vb / (v0 + vb))
    }

    /// Sets `beta` on the follow-up markers so the analytic gain equals
    /// `delta`, computed over the healthy class or all classes.
    pub fn set_followup_delta_r2(&mut self, delta: f64, healthy_only: bool) -> Result<()> {
        if !(0.0..1.0).contains(&delta) {
            return Err(Error::InvalidConfig(format!("target R² gain {delta} outside [0, 1)")));
        }
        let classes: Vec<usize> = if healthy_only {
            vec![self.healthy_class()?]
        } else {
            (0..self.classes.len()).collect()
        };
        let m = self.biomarkers();
        for j in layout::FOLLOWUP.filter(|&j| j < m) {
            self.followup.beta[j] = 0.0;
            let (v0, _) = self.followup_variance(j, &classes)?;
            self.followup.beta[j] = (v0 * delta / (1.0 - delta)).sqrt();
        }
        Ok(())
    }

    /// Markers with a planted follow-up lifestyle effect.
    pub fn followup_markers(&self) -> Vec<usize> {
        (0..self.biomarkers()).filter(|&j| self.followup.beta[j] != 0.0).collect()
    }

    /// Healthy-class mean ± `width` standard deviations per biomarker.
    pub fn reference_ranges(&self, width: f64) -> Result<Vec<ReferenceRange>> {
        let h = self.healthy_class()?;
        (0..self.biomarkers())
            .map(|j| {
                let (mean, var) = self.marker_moments(j, &[h])?;
                let half = width * var.sqrt();
                Ok(ReferenceRange {
                    feature: biomarker_name(j),
                    low: mean - half,
                    high: mean + half,
                })
            })
            .collect()
    }
}

pub const DEFAULT_RANGE_WIDTH: f64 = 2.5;

/// Latent state per participant, aligned with the generated rows.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub class: Vec<usize>,
    pub active: Vec<bool>,
    pub sleep_hours: Vec<f64>,
    /// Standardized log moderate-activity latent.
    pub lifestyle_score: Vec<f64>,
    /// Noiseless visit-1 expectation given class and covariates (rows x m).
    pub center: Matrix,
    /// Visit-1 values before missing cells were blanked (rows x m).
    pub complete: Matrix,
    /// Noiseless follow-up values for participants with a second visit.
    pub future: Vec<Option<Vec<f64>>>,
}

fn round_to(v: f64, step: f64) -> f64 {
    (v / step).round() * step
}

/// Draws visit-1 rows. Cohort and follow-up draws use separate seed streams.
pub fn generate_cohort(spec: &GeneratorSpec) -> Result<(CohortTable, GroundTruth)> {
    spec.validate()?;
    let mut rng = Rng::seed_from(derive_seed(spec.seed, "synth.cohort"));
    let m = spec.biomarkers();
    let n = spec.participants;
    let l = &spec.lifestyle;
    let offsets: Vec<Vec<f64>> = (0..spec.classes.len()).map(|c| spec.class_offset(c)).collect();
    let cumulative: Vec<f64> = spec
        .classes
        .iter()
        .scan(0.0, |acc, c| {
            *acc += c.prevalence;
            Some(*acc)
        })
        .collect();
    let age_mid = spec.age_mid();
    let width = (n.max(1) as f64).log10().ceil() as usize + 1;

    let mut table = CohortTable::empty(spec.schema());
    let mut truth = GroundTruth {
        class: Vec::with_capacity(n),
        active: Vec::with_capacity(n),
        sleep_hours: Vec::with_capacity(n),
        lifestyle_score: Vec::with_capacity(n),
        center: Matrix::zeros(n, m),
        complete: Matrix::zeros(n, m),
        future: vec![None; n],
    };
    for i in 0..n {
        let u: f64 = rng.random();
        let c = cumulative.iter().position(|&x| u < x).unwrap_or(spec.classes.len() - 1);
        let male = rng.random::<f64>() < spec.male_fraction;
        let age = spec.age_range.0 + (spec.age_range.1 - spec.age_range.0) * rng.random::<f64>();

        let z_mod: f64 = StandardNormal.sample(&mut rng);
        let z_vig: f64 = StandardNormal.sample(&mut rng);
        let z_sleep: f64 = StandardNormal.sample(&mut rng);
        let z_sed: f64 = StandardNormal.sample(&mut rng);
        let moderate = (l.moderate_log_mean + l.moderate_log_sd * z_mod).exp().round();
        let vigorous = (l.vigorous_log_mean + l.vigorous_log_sd * z_vig).exp().round();
        let sleep_latent = l.sleep_mean + l.sleep_sd * z_sleep;
        let sleep = round_to(sleep_latent, 0.5).max(0.0);
        let sedentary = round_to(l.sedentary_mean + l.sedentary_sd * z_sed, 0.1).max(0.0);
        let active = moderate >= 150.0 || vigorous >= 75.0;

        let factors: Vec<f64> = (0..spec.loadings.cols()).map(|_| StandardNormal.sample(&mut rng)).collect();
        let scale = spec.classes[c].cov_scale;
        let mut values = Vec::with_capacity(m + LIFESTYLE_FEATURES.len());
        for j in 0..m {
            let center = spec.base_mean[j]
                + offsets[c][j]
                + spec.sex_effect[j] * f64::from(u8::from(male))
                + spec.age_slope[j] * (age - age_mid)
                + spec.activity_effect[j] * f64::from(u8::from(active))
                + spec.sleep_effect[j] * (sleep_latent - l.sleep_mean);
            let shared: f64 = (0..factors.len()).map(|k| spec.loadings.get(j, k) * factors[k]).sum();
            let z: f64 = StandardNormal.sample(&mut rng);
            let v = center + scale * (shared + spec.idio_sd * z);
            truth.center.set(i, j, center);
            truth.complete.set(i, j, v);
            values.push(Some(v));
        }
        values.extend([Some(moderate), Some(vigorous), Some(sleep), Some(sedentary)]);

        if spec.missingness > 0.0 && rng.random::<f64>() < spec.missingness {
            let k = rng.random_range(1..=3usize).min(values.len());
            for idx in sample(&mut rng, values.len(), k).iter() {
                values[idx] = None;
            }
        }

        truth.class.push(c);
        truth.active.push(active);
        truth.sleep_hours.push(sleep_latent);
        truth.lifestyle_score.push(z_mod);
        table.push(RowRecord {
            id: format!("P{i:0width$}"),
            sex: if male { Sex::Male } else { Sex::Female },
            age,
            visit_index: 1,
            elapsed_years: None,
            condition: spec.classes[c].code.clone(),
            values,
        })?;
    }
    Ok((table, truth))
}

/// Second-visit rows for a seeded subset of participants; fills
/// `truth.future` for them.
pub fn generate_followup(spec: &GeneratorSpec, visit1: &CohortTable, truth: &mut GroundTruth) -> Result<CohortTable> {
    spec.validate()?;
    let m = spec.biomarkers();
    let n = visit1.len();
    if truth.class.len() != n || truth.center.shape() != (n, m) || visit1.n_features() != m + LIFESTYLE_FEATURES.len()
    {
        return Err(Error::dim("visit-1 table and ground truth do not match the spec"));
    }
    let f = &spec.followup;
    let mut rng = Rng::seed_from(derive_seed(spec.seed, "synth.followup"));
    let k = (f.fraction * n as f64).round() as usize;
    let mut chosen: Vec<usize> = sample(&mut rng, n, k).into_vec();
    chosen.sort_unstable();

    let mut out = CohortTable::empty(visit1.features.clone());
    for i in chosen {
        let c = truth.class[i];
        let offset = spec.class_offset(c);
        let elapsed = f.elapsed_years.0 + (f.elapsed_years.1 - f.elapsed_years.0) * rng.random::<f64>();
        let mut future = Vec::with_capacity(m);
        let mut values = Vec::with_capacity(visit1.n_features());
        for j in 0..m {
            let b = truth.complete.get(i, j);
            let center = truth.center.get(i, j);
            let noiseless = f.alpha * b + (1.0 - f.alpha) * center + f.gamma * offset[j] + f.beta[j] * truth.lifestyle_score[i];
            let eps: f64 = StandardNormal.sample(&mut rng);
            future.push(noiseless);
            values.push(Some(noiseless + f.noise_sd * eps));
        }
        values.extend_from_slice(&visit1.row_values(i)[m..]);
        truth.future[i] = Some(future);
        out.push(RowRecord {
            id: visit1.ids[i].clone(),
            sex: visit1.sex[i],
            age: visit1.age[i] + elapsed,
            visit_index: 2,
            elapsed_years: Some(elapsed),
            condition: visit1.condition[i].clone(),
            values,
        })?;
    }
    Ok(out)
}

impl GroundTruth {
    /// `id,true_class,active,lifestyle_score,future_<marker>...`
    pub fn write_csv_to<W: Write>(&self, ids: &[String], spec: &GeneratorSpec, writer: W) -> Result<()> {
        let m = spec.biomarkers();
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec![
            "id".to_string(),
            "true_class".to_string(),
            "active".to_string(),
            "lifestyle_score".to_string(),
        ];
        header.extend((0..m).map(|j| format!("future_{}", biomarker_name(j))));
        w.write_record(&header)?;
        for (i, id) in ids.iter().enumerate() {
            let mut rec = vec![
                id.clone(),
                spec.classes[self.class[i]].code.clone(),
                u8::from(self.active[i]).to_string(),
                format!("{}", self.lifestyle_score[i]),
            ];
            match &self.future[i] {
                Some(v) => rec.extend(v.iter().map(|x| format!("{x}"))),
                None => rec.extend(std::iter::repeat_n(String::new(), m)),
            }
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_csv(&self, ids: &[String], spec: &GeneratorSpec, path: &Path) -> Result<()> {
        self.write_csv_to(ids, spec, std::fs::File::create(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(n: usize) -> GeneratorSpec {
        let mut s = GeneratorSpec::default();
        s.participants = n;
        s
    }

    #[test]
    fn default_spec_is_valid() {
        let s = GeneratorSpec::default();
        s.validate().unwrap();
        assert_eq!(s.schema().len(), 34);
        assert_eq!(s.classes.len(), 11);
        let h = s.healthy_class().unwrap();
        for j in s.followup_markers() {
            let d = s.analytic_delta_r2(j, &[h]).unwrap();
            assert!((d - 0.10).abs() < 1e-12);
        }
        assert_eq!(s.followup_markers(), layout::FOLLOWUP.collect::<Vec<_>>());
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let mut s = small(10);
        s.classes[0].prevalence = 0.5;
        assert!(s.validate().is_err());
        let mut s = small(10);
        s.missingness = 0.6;
        assert!(s.validate().is_err());
        let mut s = small(10);
        s.sex_effect.pop();
        assert!(s.validate().is_err());
        let mut s = small(10);
        s.classes[6].parents = vec![7];
        assert!(s.validate().is_err());
    }

    #[test]
    fn seeded_generation_is_deterministic() {
        let s = small(300);
        let (a, ta) = generate_cohort(&s).unwrap();
        let (b, tb) = generate_cohort(&s).unwrap();
        assert_eq!(a, b);
        assert_eq!(ta, tb);
        let mut s2 = s.clone();
        s2.seed += 1;
        assert_ne!(generate_cohort(&s2).unwrap().0, a);
    }

    #[test]
    fn zero_covariance_rows_equal_class_means() {
        let mut s = GeneratorSpec::with_effects(1.0, 0.3, 0.0);
        s.participants = 200;
        s.missingness = 0.0;
        s.sex_effect = vec![0.0; 30];
        s.age_slope = vec![0.0; 30];
        for c in &mut s.classes {
            c.cov_scale = 0.0;
        }
        let (t, truth) = generate_cohort(&s).unwrap();
        for i in 0..t.len() {
            let off = s.class_offset(truth.class[i]);
            for j in 0..30 {
                let expected = s.base_mean[j] + off[j] + s.activity_effect[j] * f64::from(u8::from(truth.active[i]));
                assert!((t.value(i, j).unwrap() - expected).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn missing_cells_follow_participant_rate() {
        let s = small(4000);
        let (t, _) = generate_cohort(&s).unwrap();
        let with_nulls = (0..t.len()).filter(|&i| t.row_values(i).iter().any(Option::is_none)).count();
        let rate = with_nulls as f64 / t.len() as f64;
        assert!((rate - 0.05).abs() < 0.015, "{rate}");
        let mut none = small(500);
        none.missingness = 0.0;
        assert_eq!(generate_cohort(&none).unwrap().0.null_count(), 0);
    }

    #[test]
    fn class_means_converge() {
        let mut s = small(20_000);
        s.missingness = 0.0;
        let (_, truth) = generate_cohort(&s).unwrap();
        for c in 0..s.classes.len() {
            let rows: Vec<usize> = (0..truth.class.len()).filter(|&i| truth.class[i] == c).collect();
            let n = rows.len() as f64;
            for j in 0..30 {
                let (mean, var) = s.marker_moments(j, &[c]).unwrap();
                let sample = rows.iter().map(|&i| truth.complete.get(i, j)).sum::<f64>() / n;
                assert!((sample - mean).abs() < 4.0 * (var / n).sqrt(), "class {c} marker {j}");
            }
        }
    }

    #[test]
    fn activity_probability_matches_analytic() {
        let s = small(20_000);
        let (_, truth) = generate_cohort(&s).unwrap();
        let p = truth.active.iter().filter(|&&a| a).count() as f64 / truth.active.len() as f64;
        let expected = s.p_active();
        assert!((p - expected).abs() < 4.0 * (expected * (1.0 - expected) / 20_000.0).sqrt());
    }

    #[test]
    fn identity_followup_repeats_visit_one() {
        let mut s = small(200);
        s.missingness = 0.0;
        s.followup.alpha = 1.0;
        s.followup.gamma = 0.0;
        s.followup.beta = vec![0.0; 30];
        s.followup.noise_sd = 0.0;
        s.followup.fraction = 0.5;
        let (t, mut truth) = generate_cohort(&s).unwrap();
        let fu = generate_followup(&s, &t, &mut truth).unwrap();
        assert_eq!(fu.len(), 100);
        let index = t.id_index();
        for r in 0..fu.len() {
            let i = index[fu.ids[r].as_str()];
            assert_eq!(&fu.row_values(r)[..30], &t.row_values(i)[..30]);
            let e = fu.elapsed_years[r].unwrap();
            assert!((2.0..=5.0).contains(&e));
            assert_eq!(fu.visit_index[r], 2);
        }
    }

    #[test]
    fn reference_ranges_cover_most_healthy_rows() {
        let mut s = small(5000);
        s.missingness = 0.0;
        let ranges = s.reference_ranges(DEFAULT_RANGE_WIDTH).unwrap();
        let (t, truth) = generate_cohort(&s).unwrap();
        let h = s.healthy_class().unwrap();
        let mut inside = 0usize;
        let mut total = 0usize;
        for i in 0..t.len() {
            if truth.class[i] != h {
                continue;
            }
            for (j, r) in ranges.iter().enumerate() {
                total += 1;
                inside += usize::from(r.contains(t.value(i, j).unwrap()));
            }
        }
        let frac = inside as f64 / total as f64;
        assert!(frac > 0.97 && frac < 0.999, "{frac}");
    }

    #[test]
    fn ground_truth_sidecar_shape() {
        let mut s = small(20);
        s.followup.fraction = 0.5;
        let (t, mut truth) = generate_cohort(&s).unwrap();
        generate_followup(&s, &t, &mut truth).unwrap();
        let mut buf = Vec::new();
        truth.write_csv_to(&t.ids, &s, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 21);
        assert!(text.starts_with("id,true_class,active,lifestyle_score,future_bm00"));
    }
}
