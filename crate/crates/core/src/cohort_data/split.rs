use std::collections::{HashMap, HashSet};

use rand::seq::SliceRandom;

use super::table::{CohortTable, Sex};
use crate::error::{Error, Result};
use crate::numerics::Rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitFractions {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for SplitFractions {
    fn default() -> Self {
        Self {
            train: 0.70,
            val: 0.10,
            test: 0.20,
        }
    }
}

impl SplitFractions {
    pub fn validate(&self) -> Result<()> {
        let parts = [self.train, self.val, self.test];
        if parts.iter().any(|f| !(0.0..=1.0).contains(f)) || (parts.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidConfig(format!(
                "split fractions {:?} must lie in [0, 1] and sum to 1",
                parts
            )));
        }
        Ok(())
    }
}

/// Row indices of each partition, ascending.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CohortSplit {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

/// Splits within each sex. Holdout participants always land in test.
pub fn split_cohort(
    table: &CohortTable,
    fractions: SplitFractions,
    rng: &mut Rng,
    holdout_ids: &[String],
) -> Result<CohortSplit> {
    fractions.validate()?;
    let index: HashMap<&str, usize> = table.id_index();
    let mut holdout = HashSet::new();
    for id in holdout_ids {
        let &i = index
            .get(id.as_str())
            .ok_or_else(|| Error::Split(format!("holdout participant `{id}` is not in the table")))?;
        holdout.insert(i);
    }

    let mut split = CohortSplit::default();
    for sex in Sex::ALL {
        let rows = table.rows_of_sex(sex);
        let n = rows.len();
        if n == 0 {
            continue;
        }
        let n_train = (fractions.train * n as f64).round() as usize;
        let n_val = ((fractions.val * n as f64).round() as usize).min(n - n_train);
        let n_test = n - n_train - n_val;
        let (mut free, forced): (Vec<usize>, Vec<usize>) = rows.into_iter().partition(|i| !holdout.contains(i));
        if forced.len() > n_test {
            return Err(Error::Split(format!(
                "{} {} holdout participants exceed test capacity {n_test}",
                forced.len(),
                sex.name()
            )));
        }
        free.shuffle(rng);
        split.train.extend_from_slice(&free[..n_train]);
        split.val.extend_from_slice(&free[n_train..n_train + n_val]);
        split.test.extend_from_slice(&free[n_train + n_val..]);
        split.test.extend(forced);
    }
    split.train.sort_unstable();
    split.val.sort_unstable();
    split.test.sort_unstable();
    Ok(split)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cohort_data::table::{FeatureKind, FeatureSpec, RowRecord};

    fn cohort(n: usize, sex_of: impl Fn(usize) -> Sex) -> CohortTable {
        let mut t = CohortTable::empty(vec![FeatureSpec::new("x", FeatureKind::Biomarker)]);
        for i in 0..n {
            t.push(RowRecord {
                id: format!("p{i}"),
                sex: sex_of(i),
                age: 50.0,
                visit_index: 1,
                elapsed_years: None,
                condition: "healthy".into(),
                values: vec![Some(i as f64)],
            })
            .unwrap();
        }
        t
    }

    fn check_partition(s: &CohortSplit, n: usize) {
        let mut all: Vec<usize> = s.train.iter().chain(&s.val).chain(&s.test).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..n).collect::<Vec<_>>());
    }

    #[test]
    fn hundred_participants_seventy_ten_twenty() {
        let t = cohort(100, |i| if i % 2 == 0 { Sex::Female } else { Sex::Male });
        let s = split_cohort(&t, SplitFractions::default(), &mut Rng::seed_from(1), &[]).unwrap();
        assert_eq!((s.train.len(), s.val.len(), s.test.len()), (70, 10, 20));
        check_partition(&s, 100);
        let female_train = s.train.iter().filter(|&&i| t.sex[i] == Sex::Female).count();
        assert_eq!(female_train, 35);
    }

    #[test]
    fn holdouts_go_to_test() {
        let t = cohort(200, |i| if i < 120 { Sex::Female } else { Sex::Male });
        let holdouts: Vec<String> = (0..200).step_by(20).map(|i| format!("p{i}")).collect();
        let s = split_cohort(&t, SplitFractions::default(), &mut Rng::seed_from(2), &holdouts).unwrap();
        check_partition(&s, 200);
        for h in (0..200).step_by(20) {
            assert!(s.test.contains(&h));
        }
    }

    #[test]
    fn all_holdouts_is_an_error() {
        let t = cohort(100, |_| Sex::Female);
        let holdouts: Vec<String> = t.ids.clone();
        assert!(matches!(
            split_cohort(&t, SplitFractions::default(), &mut Rng::seed_from(3), &holdouts),
            Err(Error::Split(_))
        ));
        assert!(split_cohort(&t, SplitFractions::default(), &mut Rng::seed_from(3), &["nope".into()]).is_err());
    }

    #[test]
    fn seeded_split_is_deterministic() {
        let t = cohort(137, |i| if i % 3 == 0 { Sex::Male } else { Sex::Female });
        let a = split_cohort(&t, SplitFractions::default(), &mut Rng::seed_from(9), &[]).unwrap();
        let b = split_cohort(&t, SplitFractions::default(), &mut Rng::seed_from(9), &[]).unwrap();
        assert_eq!(a, b);
        let c = split_cohort(&t, SplitFractions::default(), &mut Rng::seed_from(10), &[]).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn fractions_must_sum_to_one() {
        let bad = SplitFractions { train: 0.7, val: 0.2, test: 0.2 };
        assert!(bad.validate().is_err());
    }
}
