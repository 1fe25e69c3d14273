use std::collections::{HashMap, HashSet};

use super::io::ReferenceRange;
use super::table::{AgeGroups, CohortTable, ConditionVocabulary, FeatureKind, Sex};
use crate::error::{Error, Result};

/// Drops features below `threshold` completeness, then every row with a null.
pub fn filter_completeness(table: &CohortTable, threshold: f64) -> Result<CohortTable> {
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(Error::InvalidConfig(format!(
            "completeness threshold {threshold} outside (0, 1]"
        )));
    }
    let keep: Vec<usize> = (0..table.n_features())
        .filter(|&j| table.completeness(j) >= threshold)
        .collect();
    if keep.is_empty() {
        return Err(Error::EmptySchema { threshold });
    }
    let completeness: Vec<f64> = keep.iter().map(|&j| table.completeness(j)).collect();
    let mut narrowed = table.select_features(&keep);
    for (f, c) in narrowed.features.iter_mut().zip(completeness) {
        f.completeness = c;
    }
    let rows: Vec<usize> = (0..narrowed.len())
        .filter(|&i| narrowed.row_values(i).iter().all(Option::is_some))
        .collect();
    Ok(narrowed.select_rows(&rows))
}

/// Age-group index per row.
pub fn assign_age_groups(table: &CohortTable, groups: &AgeGroups) -> Result<Vec<usize>> {
    let mut out = Vec::with_capacity(table.len());
    let mut offending = Vec::new();
    for i in 0..table.len() {
        match groups.group_of(table.age[i]) {
            Some(g) => out.push(g),
            None => offending.push(table.ids[i].clone()),
        }
    }
    if offending.is_empty() {
        Ok(out)
    } else {
        Err(Error::AgeAssignment { ids: offending })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ActivityClass {
    Active,
    LessActive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SleepClass {
    MedianSleep,
    LessSleep,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LifestyleColumns {
    pub moderate_minutes: String,
    pub vigorous_minutes: String,
    pub sleep_hours: String,
}

impl Default for LifestyleColumns {
    fn default() -> Self {
        Self {
            moderate_minutes: "moderate_min".into(),
            vigorous_minutes: "vigorous_min".into(),
            sleep_hours: "sleep_hours".into(),
        }
    }
}

pub const ACTIVE_MODERATE_MINUTES: f64 = 150.0;
pub const ACTIVE_VIGOROUS_MINUTES: f64 = 75.0;

#[derive(Debug, Clone, PartialEq)]
pub struct LifestyleStrata {
    pub activity: Vec<ActivityClass>,
    pub sleep: Vec<SleepClass>,
    pub age_group: Vec<usize>,
    /// Sleep median per (sex, age group).
    pub sleep_medians: HashMap<(Sex, usize), f64>,
}

pub fn activity_class(moderate: f64, vigorous: f64) -> ActivityClass {
    if moderate >= ACTIVE_MODERATE_MINUTES || vigorous >= ACTIVE_VIGOROUS_MINUTES {
        ActivityClass::Active
    } else {
        ActivityClass::LessActive
    }
}

pub fn median(values: &mut [f64]) -> f64 {
    assert!(!values.is_empty());
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

pub fn stratify_lifestyle(
    table: &CohortTable,
    groups: &AgeGroups,
    columns: &LifestyleColumns,
) -> Result<LifestyleStrata> {
    let moderate = table.complete_column(table.require_feature(&columns.moderate_minutes)?)?;
    let vigorous = table.complete_column(table.require_feature(&columns.vigorous_minutes)?)?;
    let sleep = table.complete_column(table.require_feature(&columns.sleep_hours)?)?;
    let age_group = assign_age_groups(table, groups)?;

    let mut cells: HashMap<(Sex, usize), Vec<f64>> = HashMap::new();
    for i in 0..table.len() {
        cells.entry((table.sex[i], age_group[i])).or_default().push(sleep[i]);
    }
    let sleep_medians: HashMap<(Sex, usize), f64> = cells
        .into_iter()
        .map(|(k, mut v)| (k, median(&mut v)))
        .collect();

    let activity = (0..table.len())
        .map(|i| activity_class(moderate[i], vigorous[i]))
        .collect();
    let sleep = (0..table.len())
        .map(|i| {
            if sleep[i] >= sleep_medians[&(table.sex[i], age_group[i])] {
                SleepClass::MedianSleep
            } else {
                SleepClass::LessSleep
            }
        })
        .collect();
    Ok(LifestyleStrata {
        activity,
        sleep,
        age_group,
        sleep_medians,
    })
}

/// Maps raw condition codes to final groups. Undiagnosed participants with
/// every ranged biomarker inside its range become bona fide healthy.
pub fn label_conditions(
    table: &CohortTable,
    vocab: &ConditionVocabulary,
    ranges: &[ReferenceRange],
) -> Result<CohortTable> {
    let mut ranged = Vec::new();
    for r in ranges {
        let j = table
            .feature_index(&r.feature)
            .ok_or_else(|| Error::Labeling(format!("reference range for unknown feature `{}`", r.feature)))?;
        if table.features[j].kind == FeatureKind::Biomarker {
            ranged.push((j, r));
        }
    }
    let mut out = table.clone();
    for i in 0..table.len() {
        let code = &table.condition[i];
        if *code == vocab.raw_healthy {
            let all_in = ranged
                .iter()
                .all(|(j, r)| table.value(i, *j).is_some_and(|v| r.contains(v)));
            out.condition[i] = if all_in {
                vocab.bona_fide_healthy.clone()
            } else {
                vocab.apparently_healthy.clone()
            };
        } else if vocab.id_of(code).is_none() {
            return Err(Error::Labeling(format!(
                "participant `{}` has unknown condition code `{code}`",
                table.ids[i]
            )));
        }
    }
    Ok(out)
}

/// Separates baseline (visit 1) from follow-up rows, keeping only follow-ups
/// whose elapsed years fall in `[lo, hi]` and whose baseline row exists.
pub fn split_visits(table: &CohortTable, lo: f64, hi: f64) -> Result<(CohortTable, CohortTable)> {
    let baseline_ids: HashSet<&str> = (0..table.len())
        .filter(|&i| table.visit_index[i] == 1)
        .map(|i| table.ids[i].as_str())
        .collect();
    if baseline_ids.len() != (0..table.len()).filter(|&i| table.visit_index[i] == 1).count() {
        return Err(Error::Schema("duplicate baseline visit for a participant".into()));
    }
    let baseline = table.filter_rows(|i| table.visit_index[i] == 1);
    let mut seen = HashSet::new();
    let mut keep = Vec::new();
    for i in 0..table.len() {
        if table.visit_index[i] != 2 {
            continue;
        }
        let Some(e) = table.elapsed_years[i] else {
            return Err(Error::Schema(format!(
                "follow-up row for `{}` lacks elapsed_years",
                table.ids[i]
            )));
        };
        if e < lo || e > hi || !baseline_ids.contains(table.ids[i].as_str()) {
            continue;
        }
        if !seen.insert(table.ids[i].as_str()) {
            return Err(Error::Schema(format!("duplicate follow-up for `{}`", table.ids[i])));
        }
        keep.push(i);
    }
    Ok((baseline, table.select_rows(&keep)))
}
