//! Rank inverse-normal transform fitted per sex on training rows.
//!
//! Sidecar layout:
//!
//! ```text
//! TCQN1
//! sex <F|M> <features>
//! feature <name> <count>
//! <count sorted training values>
//! ...
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;

use statrs::distribution::{ContinuousCDF, Normal};

use super::table::{CohortTable, Sex};
use crate::error::{Error, Result};
use crate::numerics::Matrix;

pub const QUANTILE_MAGIC: &str = "TCQN1";

/// Name under which the age column is normalized alongside features.
pub const AGE_INPUT: &str = "age";

/// Fitted quantiles of one feature.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureQuantiles {
    pub name: String,
    sorted: Vec<f64>,
    knots: Vec<f64>,
    scores: Vec<f64>,
}

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("unit normal")
}

impl FeatureQuantiles {
    /// `None` when fewer than two distinct values are present.
    pub fn fit(name: &str, values: &[f64]) -> Option<Self> {
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        Self::from_sorted(name, sorted)
    }

    fn from_sorted(name: &str, sorted: Vec<f64>) -> Option<Self> {
        let n = sorted.len();
        let normal = std_normal();
        let mut knots = Vec::new();
        let mut scores = Vec::new();
        let mut i = 0;
        while i < n {
            let mut j = i;
            while j + 1 < n && sorted[j + 1] == sorted[i] {
                j += 1;
            }
            // 1-based ranks i+1..=j+1 share their average.
            let rank = (i + j + 2) as f64 / 2.0;
            knots.push(sorted[i]);
            scores.push(normal.inverse_cdf((rank - 0.5) / n as f64));
            i = j + 1;
        }
        (knots.len() >= 2).then(|| Self {
            name: name.to_string(),
            sorted,
            knots,
            scores,
        })
    }

    pub fn sorted_values(&self) -> &[f64] {
        &self.sorted
    }

    /// Linear interpolation between knots, clamped outside the fitted range.
    pub fn map(&self, x: f64) -> f64 {
        let k = &self.knots;
        if x <= k[0] {
            return self.scores[0];
        }
        if x >= k[k.len() - 1] {
            return self.scores[k.len() - 1];
        }
        let hi = k.partition_point(|&v| v <= x);
        let lo = hi - 1;
        if k[lo] == x {
            return self.scores[lo];
        }
        let t = (x - k[lo]) / (k[hi] - k[lo]);
        self.scores[lo] + t * (self.scores[hi] - self.scores[lo])
    }
}

/// Per-sex transforms keyed by input name. Missing entries pass through.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct QuantileNormalizer {
    per_sex: BTreeMap<Sex, BTreeMap<String, FeatureQuantiles>>,
}

fn input_column(table: &CohortTable, name: &str) -> Result<Vec<f64>> {
    if name == AGE_INPUT {
        Ok(table.age.clone())
    } else {
        table.complete_column(table.require_feature(name)?)
    }
}

impl QuantileNormalizer {
    /// Fits on every row of `table`. `inputs` are feature names, optionally
    /// including [`AGE_INPUT`].
    pub fn fit(table: &CohortTable, inputs: &[String]) -> Result<Self> {
        let mut per_sex = BTreeMap::new();
        for sex in Sex::ALL {
            let rows = table.rows_of_sex(sex);
            if rows.is_empty() {
                continue;
            }
            let sub = table.select_rows(&rows);
            let mut map = BTreeMap::new();
            for name in inputs {
                let values = input_column(&sub, name)?;
                match FeatureQuantiles::fit(name, &values) {
                    Some(q) => {
                        map.insert(name.clone(), q);
                    }
                    None => log::warn!("{name} is constant for sex {sex}; left unnormalized"),
                }
            }
            per_sex.insert(sex, map);
        }
        Ok(Self { per_sex })
    }

    pub fn get(&self, sex: Sex, name: &str) -> Option<&FeatureQuantiles> {
        self.per_sex.get(&sex)?.get(name)
    }

    fn transforms_for(&self, sex: Sex) -> Result<&BTreeMap<String, FeatureQuantiles>> {
        self.per_sex
            .get(&sex)
            .ok_or_else(|| Error::State(format!("normalizer has no fit for sex {sex}")))
    }

    /// Normalizes the fitted feature columns in place of the raw values.
    pub fn apply(&self, table: &CohortTable) -> Result<CohortTable> {
        let mut out = table.clone();
        for i in 0..table.len() {
            let map = self.transforms_for(table.sex[i])?;
            for (j, f) in table.features.iter().enumerate() {
                if let Some(q) = map.get(&f.name) {
                    let v = table.value(i, j).ok_or_else(|| {
                        Error::Numeric(format!("null `{}` for participant `{}`", f.name, table.ids[i]))
                    })?;
                    out.set_value(i, j, Some(q.map(v)));
                }
            }
        }
        Ok(out)
    }

    /// Dense matrix of the named inputs, each mapped through its transform.
    pub fn transform_matrix(&self, table: &CohortTable, inputs: &[String]) -> Result<Matrix> {
        let columns = inputs
            .iter()
            .map(|name| input_column(table, name))
            .collect::<Result<Vec<_>>>()?;
        let mut m = Matrix::zeros(table.len(), inputs.len());
        for i in 0..table.len() {
            let map = self.transforms_for(table.sex[i])?;
            for (c, name) in inputs.iter().enumerate() {
                let raw = columns[c][i];
                m.set(i, c, map.get(name).map_or(raw, |q| q.map(raw)));
            }
        }
        Ok(m)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{QUANTILE_MAGIC}\n");
        for (sex, map) in &self.per_sex {
            writeln!(out, "sex {} {}", sex.code(), map.len()).expect("write to String");
            for q in map.values() {
                writeln!(out, "feature {} {}", q.name, q.sorted.len()).expect("write to String");
                let line: Vec<String> = q.sorted.iter().map(|v| format!("{v}")).collect();
                out.push_str(&line.join(" "));
                out.push('\n');
            }
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        let mut next = |what: &str| {
            lines
                .next()
                .ok_or_else(|| Error::format(0, format!("unexpected end of input, expected {what}")))
        };
        let (line, magic) = next("magic")?;
        if magic.trim() != QUANTILE_MAGIC {
            return Err(Error::format(line, format!("bad magic `{magic}`")));
        }
        let mut per_sex = BTreeMap::new();
        loop {
            let Ok((line, header)) = next("sex header") else { break };
            if header.trim().is_empty() {
                continue;
            }
            let toks: Vec<&str> = header.split_ascii_whitespace().collect();
            if toks.len() != 3 || toks[0] != "sex" {
                return Err(Error::format(line, format!("expected `sex <code> <count>`, got `{header}`")));
            }
            let sex: Sex = toks[1].parse().map_err(|e: String| Error::format(line, e))?;
            let count: usize = toks[2]
                .parse()
                .map_err(|e| Error::format(line, format!("`{}`: {e}", toks[2])))?;
            let mut map = BTreeMap::new();
            for _ in 0..count {
                let (line, fh) = next("feature header")?;
                let toks: Vec<&str> = fh.split_ascii_whitespace().collect();
                if toks.len() != 3 || toks[0] != "feature" {
                    return Err(Error::format(line, format!("expected `feature <name> <count>`, got `{fh}`")));
                }
                let n: usize = toks[2]
                    .parse()
                    .map_err(|e| Error::format(line, format!("`{}`: {e}", toks[2])))?;
                let (vline, vals) = next("quantile values")?;
                let sorted = vals
                    .split_ascii_whitespace()
                    .map(|t| t.parse::<f64>().map_err(|e| Error::format(vline, format!("`{t}`: {e}"))))
                    .collect::<Result<Vec<_>>>()?;
                if sorted.len() != n || sorted.windows(2).any(|w| w[0] > w[1]) || sorted.iter().any(|v| !v.is_finite()) {
                    return Err(Error::format(vline, "expected sorted finite values matching the declared count"));
                }
                let q = FeatureQuantiles::from_sorted(toks[1], sorted)
                    .ok_or_else(|| Error::format(vline, "fewer than two distinct values"))?;
                map.insert(toks[1].to_string(), q);
            }
            per_sex.insert(sex, map);
        }
        Ok(Self { per_sex })
    }
}

/// Fits on `table` and returns the normalized table with its transform.
pub fn quantile_normalize(table: &CohortTable, inputs: &[String]) -> Result<(CohortTable, QuantileNormalizer)> {
    let normalizer = QuantileNormalizer::fit(table, inputs)?;
    let out = normalizer.apply(table)?;
    Ok((out, normalizer))
}
