use std::collections::{HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::numerics::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Sex {
    Female,
    Male,
}

impl Sex {
    pub const ALL: [Sex; 2] = [Sex::Female, Sex::Male];

    pub fn code(self) -> &'static str {
        match self {
            Sex::Female => "F",
            Sex::Male => "M",
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Sex::Female => "female",
            Sex::Male => "male",
        }
    }

    /// `0` for female, `1` for male.
    pub fn indicator(self) -> f64 {
        match self {
            Sex::Female => 0.0,
            Sex::Male => 1.0,
        }
    }
}

impl fmt::Display for Sex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for Sex {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim() {
            "F" | "f" | "female" | "0" => Ok(Sex::Female),
            "M" | "m" | "male" | "1" => Ok(Sex::Male),
            other => Err(format!("unrecognized sex `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FeatureKind {
    Biomarker,
    Lifestyle,
    Demographic,
}

impl FeatureKind {
    pub fn as_str(self) -> &'static str {
        match self {
            FeatureKind::Biomarker => "biomarker",
            FeatureKind::Lifestyle => "lifestyle",
            FeatureKind::Demographic => "demographic",
        }
    }
}

impl FromStr for FeatureKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim() {
            "biomarker" => Ok(FeatureKind::Biomarker),
            "lifestyle" => Ok(FeatureKind::Lifestyle),
            "demographic" => Ok(FeatureKind::Demographic),
            other => Err(format!("unknown feature kind `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSpec {
    pub name: String,
    pub kind: FeatureKind,
    /// Fraction of non-null cells observed at load or filter time.
    pub completeness: f64,
    pub marker_of_interest: bool,
}

impl FeatureSpec {
    pub fn new(name: impl Into<String>, kind: FeatureKind) -> Self {
        Self {
            name: name.into(),
            kind,
            completeness: 1.0,
            marker_of_interest: false,
        }
    }

    pub fn of_interest(mut self) -> Self {
        self.marker_of_interest = true;
        self
    }
}

pub fn validate_schema(schema: &[FeatureSpec]) -> Result<()> {
    let mut seen = HashSet::new();
    for f in schema {
        if !seen.insert(f.name.as_str()) {
            return Err(Error::Schema(format!("duplicate feature `{}`", f.name)));
        }
        if !(0.0..=1.0).contains(&f.completeness) {
            return Err(Error::Schema(format!(
                "feature `{}` completeness {} outside [0, 1]",
                f.name, f.completeness
            )));
        }
        if FIXED_COLUMNS.contains(&f.name.as_str()) {
            return Err(Error::Schema(format!("feature name `{}` clashes with a fixed column", f.name)));
        }
    }
    Ok(())
}

pub const FIXED_COLUMNS: [&str; 6] = ["id", "sex", "age", "visit_index", "elapsed_years", "condition_code"];

/// One row per participant-visit. Feature cells are `None` when missing.
#[derive(Debug, Clone, PartialEq)]
pub struct CohortTable {
    pub ids: Vec<String>,
    pub sex: Vec<Sex>,
    pub age: Vec<f64>,
    pub visit_index: Vec<u32>,
    pub elapsed_years: Vec<Option<f64>>,
    pub condition: Vec<String>,
    pub features: Vec<FeatureSpec>,
    values: Vec<Option<f64>>,
}

#[derive(Debug, Clone)]
pub struct RowRecord {
    pub id: String,
    pub sex: Sex,
    pub age: f64,
    pub visit_index: u32,
    pub elapsed_years: Option<f64>,
    pub condition: String,
    pub values: Vec<Option<f64>>,
}

impl CohortTable {
    pub fn empty(features: Vec<FeatureSpec>) -> Self {
        Self {
            ids: Vec::new(),
            sex: Vec::new(),
            age: Vec::new(),
            visit_index: Vec::new(),
            elapsed_years: Vec::new(),
            condition: Vec::new(),
            features,
            values: Vec::new(),
        }
    }

    pub fn push(&mut self, row: RowRecord) -> Result<()> {
        if row.values.len() != self.features.len() {
            return Err(Error::dim(format!(
                "row `{}` has {} values for {} features",
                row.id,
                row.values.len(),
                self.features.len()
            )));
        }
        self.ids.push(row.id);
        self.sex.push(row.sex);
        self.age.push(row.age);
        self.visit_index.push(row.visit_index);
        self.elapsed_years.push(row.elapsed_years);
        self.condition.push(row.condition);
        self.values.extend(row.values);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.features.len()
    }

    pub fn feature_names(&self) -> Vec<&str> {
        self.features.iter().map(|f| f.name.as_str()).collect()
    }

    pub fn feature_index(&self, name: &str) -> Option<usize> {
        self.features.iter().position(|f| f.name == name)
    }

    pub fn require_feature(&self, name: &str) -> Result<usize> {
        self.feature_index(name)
            .ok_or_else(|| Error::Schema(format!("missing column `{name}`")))
    }

    pub fn features_of_kind(&self, kind: FeatureKind) -> Vec<usize> {
        (0..self.features.len())
            .filter(|&j| self.features[j].kind == kind)
            .collect()
    }

    #[inline]
    pub fn value(&self, row: usize, feature: usize) -> Option<f64> {
        self.values[row * self.features.len() + feature]
    }

    #[inline]
    pub fn set_value(&mut self, row: usize, feature: usize, v: Option<f64>) {
        let w = self.features.len();
        self.values[row * w + feature] = v;
    }

    pub fn row_values(&self, row: usize) -> &[Option<f64>] {
        let w = self.features.len();
        &self.values[row * w..(row + 1) * w]
    }

    pub fn column(&self, feature: usize) -> Vec<Option<f64>> {
        (0..self.len()).map(|i| self.value(i, feature)).collect()
    }

    /// Column values, failing on the first null.
    pub fn complete_column(&self, feature: usize) -> Result<Vec<f64>> {
        (0..self.len())
            .map(|i| {
                self.value(i, feature).ok_or_else(|| {
                    Error::Numeric(format!(
                        "null `{}` for participant `{}`",
                        self.features[feature].name, self.ids[i]
                    ))
                })
            })
            .collect()
    }

    pub fn null_count(&self) -> usize {
        self.values.iter().filter(|v| v.is_none()).count()
    }

    pub fn completeness(&self, feature: usize) -> f64 {
        if self.is_empty() {
            return 1.0;
        }
        let present = (0..self.len()).filter(|&i| self.value(i, feature).is_some()).count();
        present as f64 / self.len() as f64
    }

    pub fn record(&self, row: usize) -> RowRecord {
        RowRecord {
            id: self.ids[row].clone(),
            sex: self.sex[row],
            age: self.age[row],
            visit_index: self.visit_index[row],
            elapsed_years: self.elapsed_years[row],
            condition: self.condition[row].clone(),
            values: self.row_values(row).to_vec(),
        }
    }

    pub fn select_rows(&self, rows: &[usize]) -> CohortTable {
        let mut out = CohortTable::empty(self.features.clone());
        for &i in rows {
            out.push(self.record(i)).expect("same schema");
        }
        out
    }

    pub fn filter_rows(&self, keep: impl Fn(usize) -> bool) -> CohortTable {
        let rows: Vec<usize> = (0..self.len()).filter(|&i| keep(i)).collect();
        self.select_rows(&rows)
    }

    pub fn select_features(&self, features: &[usize]) -> CohortTable {
        let mut out = CohortTable::empty(features.iter().map(|&j| self.features[j].clone()).collect());
        for i in 0..self.len() {
            let mut rec = self.record(i);
            rec.values = features.iter().map(|&j| self.value(i, j)).collect();
            out.push(rec).expect("same schema");
        }
        out
    }

    pub fn rows_of_sex(&self, sex: Sex) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.sex[i] == sex).collect()
    }

    pub fn id_index(&self) -> HashMap<&str, usize> {
        self.ids.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect()
    }

    /// Dense matrix of the given feature columns; fails on nulls.
    pub fn feature_matrix(&self, features: &[usize]) -> Result<Matrix> {
        let mut data = Vec::with_capacity(self.len() * features.len());
        for i in 0..self.len() {
            for &j in features {
                let v = self.value(i, j).ok_or_else(|| {
                    Error::Numeric(format!(
                        "null `{}` for participant `{}`",
                        self.features[j].name, self.ids[i]
                    ))
                })?;
                data.push(v);
            }
        }
        Matrix::from_vec(self.len(), features.len(), data)
    }
}

/// Ordered, contiguous, inclusive year ranges.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AgeGroups {
    ranges: Vec<(u32, u32)>,
}

impl Default for AgeGroups {
    fn default() -> Self {
        Self {
            ranges: vec![(36, 45), (46, 50), (51, 55), (56, 60), (61, 65), (66, 75)],
        }
    }
}

impl AgeGroups {
    pub fn new(ranges: Vec<(u32, u32)>) -> Result<Self> {
        if ranges.is_empty() {
            return Err(Error::InvalidConfig("at least one age group is required".into()));
        }
        for (k, &(lo, hi)) in ranges.iter().enumerate() {
            if lo > hi {
                return Err(Error::InvalidConfig(format!("age group {k} is [{lo}, {hi}]")));
            }
            if k > 0 && ranges[k - 1].1 + 1 != lo {
                return Err(Error::InvalidConfig(format!(
                    "age groups [{}, {}] and [{lo}, {hi}] overlap or leave a gap",
                    ranges[k - 1].0,
                    ranges[k - 1].1
                )));
            }
        }
        Ok(Self { ranges })
    }

    pub fn ranges(&self) -> &[(u32, u32)] {
        &self.ranges
    }

    pub fn len(&self) -> usize {
        self.ranges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ranges.is_empty()
    }

    pub fn span(&self) -> (u32, u32) {
        (self.ranges[0].0, self.ranges[self.ranges.len() - 1].1)
    }

    /// Group of an age in years; fractional ages belong to the year they started.
    pub fn group_of(&self, age: f64) -> Option<usize> {
        if !age.is_finite() || age < 0.0 {
            return None;
        }
        let year = age.floor() as u32;
        self.ranges.iter().position(|&(lo, hi)| lo <= year && year <= hi)
    }

    pub fn label(&self, group: usize) -> String {
        let (lo, hi) = self.ranges[group];
        format!("{lo}-{hi}")
    }
}

/// Final condition groups. Undiagnosed participants arrive with the raw
/// healthy code and are split into apparently / bona fide healthy.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConditionVocabulary {
    groups: Vec<String>,
    pub raw_healthy: String,
    pub apparently_healthy: String,
    pub bona_fide_healthy: String,
}

pub const DEFAULT_DIAGNOSES: [&str; 10] = [
    "diabetes",
    "diabetes_cardiovascular",
    "diabetes_other_serious",
    "diabetes_cardiovascular_other_serious",
    "multiple_non_metabolic",
    "cardiovascular",
    "cardiovascular_other_serious",
    "respiratory",
    "cancer",
    "other_serious",
];

impl Default for ConditionVocabulary {
    fn default() -> Self {
        Self::new(DEFAULT_DIAGNOSES.iter().map(|s| s.to_string()).collect()).expect("valid default")
    }
}

impl ConditionVocabulary {
    /// Healthy groups take ids 0 (bona fide) and 1 (apparently); diagnoses follow.
    pub fn new(diagnoses: Vec<String>) -> Result<Self> {
        let bona = "bona_fide_healthy".to_string();
        let apparent = "apparently_healthy".to_string();
        let raw = "healthy".to_string();
        let mut groups = vec![bona.clone(), apparent.clone()];
        for d in diagnoses {
            if d == raw || groups.contains(&d) {
                return Err(Error::InvalidConfig(format!("duplicate or reserved condition `{d}`")));
            }
            groups.push(d);
        }
        Ok(Self {
            groups,
            raw_healthy: raw,
            apparently_healthy: apparent,
            bona_fide_healthy: bona,
        })
    }

    pub fn groups(&self) -> &[String] {
        &self.groups
    }

    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    pub fn diagnoses(&self) -> &[String] {
        &self.groups[2..]
    }

    pub fn id_of(&self, label: &str) -> Option<usize> {
        self.groups.iter().position(|g| g == label)
    }

    pub fn is_healthy_id(&self, id: usize) -> bool {
        id < 2
    }

    /// Class ids of a labeled table.
    pub fn label_ids(&self, table: &CohortTable) -> Result<Vec<usize>> {
        table
            .condition
            .iter()
            .enumerate()
            .map(|(i, c)| {
                self.id_of(c).ok_or_else(|| {
                    Error::Labeling(format!(
                        "participant `{}` has unlabeled condition `{c}`",
                        table.ids[i]
                    ))
                })
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_age_groups_cover_span() {
        let g = AgeGroups::default();
        assert_eq!(g.span(), (36, 75));
        assert_eq!(g.group_of(45.0), Some(0));
        assert_eq!(g.group_of(46.0), Some(1));
        assert_eq!(g.group_of(45.9), Some(0));
        assert_eq!(g.group_of(35.0), None);
        assert_eq!(g.group_of(76.0), None);
        assert_eq!(g.label(5), "66-75");
    }

    #[test]
    fn age_groups_reject_overlap_and_gaps() {
        assert!(AgeGroups::new(vec![(30, 40), (40, 50)]).is_err());
        assert!(AgeGroups::new(vec![(30, 40), (42, 50)]).is_err());
        assert!(AgeGroups::new(vec![(30, 40), (41, 50)]).is_ok());
    }

    #[test]
    fn default_vocabulary_has_twelve_groups() {
        let v = ConditionVocabulary::default();
        assert_eq!(v.len(), 12);
        assert_eq!(v.id_of("bona_fide_healthy"), Some(0));
        assert_eq!(v.id_of("apparently_healthy"), Some(1));
        assert!(v.is_healthy_id(1) && !v.is_healthy_id(2));
        assert!(ConditionVocabulary::new(vec!["healthy".into()]).is_err());
    }

    #[test]
    fn schema_validation() {
        let ok = vec![
            FeatureSpec::new("a", FeatureKind::Biomarker),
            FeatureSpec::new("b", FeatureKind::Lifestyle),
        ];
        assert!(validate_schema(&ok).is_ok());
        let dup = vec![ok[0].clone(), ok[0].clone()];
        assert!(validate_schema(&dup).is_err());
        let clash = vec![FeatureSpec::new("age", FeatureKind::Demographic)];
        assert!(validate_schema(&clash).is_err());
    }
}
