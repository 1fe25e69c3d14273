//! Two-sample Student's t-tests between lifestyle strata and
//! Benjamini-Hochberg false discovery rate control.

use std::fmt;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use statrs::function::beta::beta_reg;

use crate::cohort_data::{ActivityClass, AgeGroups, CohortTable, LifestyleStrata, Sex, SleepClass};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Axis {
    Activity,
    Sleep,
}

impl Axis {
    pub const ALL: [Axis; 2] = [Axis::Activity, Axis::Sleep];

    pub fn as_str(self) -> &'static str {
        match self {
            Axis::Activity => "activity",
            Axis::Sleep => "sleep",
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TTestResult {
    pub t: f64,
    pub df: f64,
    pub p: f64,
    pub mean_a: f64,
    pub mean_b: f64,
    pub n_a: usize,
    pub n_b: usize,
}

fn mean_and_ss(x: &[f64]) -> (f64, f64) {
    let m = x.iter().sum::<f64>() / x.len() as f64;
    (m, x.iter().map(|v| (v - m) * (v - m)).sum())
}

/// Two-sided p-value of a t statistic with `df` degrees of freedom.
pub fn t_two_sided_p(t: f64, df: f64) -> f64 {
    if t == 0.0 {
        return 1.0;
    }
    if !t.is_finite() {
        return 0.0;
    }
    let x = df / (df + t * t);
    beta_reg(df / 2.0, 0.5, x).clamp(0.0, 1.0)
}

/// Pooled-variance two-sample t-test.
pub fn students_t(a: &[f64], b: &[f64]) -> Result<TTestResult> {
    let (n_a, n_b) = (a.len(), b.len());
    if n_a < 2 || n_b < 2 {
        return Err(Error::dim(format!("t-test needs two observations per sample, got {n_a} and {n_b}")));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::Numeric("t-test sample contains a non-finite value".into()));
    }
    let (mean_a, ss_a) = mean_and_ss(a);
    let (mean_b, ss_b) = mean_and_ss(b);
    let df = (n_a + n_b - 2) as f64;
    let pooled = (ss_a + ss_b) / df;
    let se = (pooled * (1.0 / n_a as f64 + 1.0 / n_b as f64)).sqrt();
    let (t, p) = if se == 0.0 {
        if mean_a != mean_b {
            return Err(Error::DegenerateVariance { mean_a, mean_b });
        }
        (0.0, 1.0)
    } else {
        let t = (mean_a - mean_b) / se;
        (t, t_two_sided_p(t, df))
    };
    Ok(TTestResult {
        t,
        df,
        p,
        mean_a,
        mean_b,
        n_a,
        n_b,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BhOutcome {
    /// Inputs in their original order.
    pub p_values: Vec<f64>,
    pub q: f64,
    /// Stable ascending order of `p_values`.
    pub order: Vec<usize>,
    pub reject: Vec<bool>,
    pub adjusted: Vec<f64>,
}

impl BhOutcome {
    pub fn rejections(&self) -> usize {
        self.reject.iter().filter(|&&r| r).count()
    }

    pub fn sorted_p(&self) -> Vec<f64> {
        self.order.iter().map(|&i| self.p_values[i]).collect()
    }
}

/// Step-up procedure at level `q`; outputs are in input order.
pub fn benjamini_hochberg(p_values: &[f64], q: f64) -> Result<BhOutcome> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::InvalidConfig(format!("FDR level {q} outside (0, 1)")));
    }
    if let Some(p) = p_values.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(Error::Numeric(format!("p-value {p} outside [0, 1]")));
    }
    let m = p_values.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&i, &j| p_values[i].total_cmp(&p_values[j]));

    let k = (1..=m)
        .rev()
        .find(|&i| p_values[order[i - 1]] <= i as f64 * q / m as f64)
        .unwrap_or(0);
    let mut reject = vec![false; m];
    for &i in &order[..k] {
        reject[i] = true;
    }

    let mut adjusted = vec![0.0; m];
    let mut running = 1.0f64;
    for rank in (1..=m).rev() {
        let i = order[rank - 1];
        running = running.min((m as f64 * p_values[i] / rank as f64).min(1.0));
        adjusted[i] = running;
    }
    Ok(BhOutcome {
        p_values: p_values.to_vec(),
        q,
        order,
        reject,
        adjusted,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub marker: String,
    pub sex: Sex,
    pub age_group: usize,
    pub axis: Axis,
    pub test: TTestResult,
    pub p_adjusted: f64,
    pub significant: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SkippedCell {
    pub marker: String,
    pub sex: Sex,
    pub age_group: usize,
    pub axis: Axis,
    pub reason: String,
}

/// Counts for one multiple-testing family.
#[derive(Debug, Clone, PartialEq)]
pub struct FamilySummary {
    pub sex: Sex,
    pub axis: Axis,
    pub tests: usize,
    pub rejections: usize,
    pub markers_tested: usize,
    pub markers_significant_any: usize,
    /// Significant in at least half of the configured age groups.
    pub markers_significant_half: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SignificanceReport {
    pub rows: Vec<ReportRow>,
    pub families: Vec<FamilySummary>,
    pub skipped: Vec<SkippedCell>,
    pub q: f64,
}

/// One test per (marker, sex, age group, axis): active vs less-active and
/// median-sleep vs less-sleep. BH runs once per (sex, axis) family.
pub fn lifestyle_significance_report(
    table: &CohortTable,
    strata: &LifestyleStrata,
    groups: &AgeGroups,
    markers: &[usize],
    q: f64,
) -> Result<SignificanceReport> {
    if strata.activity.len() != table.len() || strata.sleep.len() != table.len() {
        return Err(Error::dim("strata do not match table rows"));
    }
    let columns = markers
        .iter()
        .map(|&j| table.complete_column(j))
        .collect::<Result<Vec<_>>>()?;

    let mut cells = Vec::new();
    for axis in Axis::ALL {
        for (mi, &j) in markers.iter().enumerate() {
            for sex in Sex::ALL {
                for g in 0..groups.len() {
                    cells.push((axis, mi, j, sex, g));
                }
            }
        }
    }
    let outcomes: Vec<std::result::Result<ReportRow, SkippedCell>> = cells
        .par_iter()
        .map(|&(axis, mi, j, sex, g)| {
            let mut a = Vec::new();
            let mut b = Vec::new();
            for i in 0..table.len() {
                if table.sex[i] != sex || strata.age_group[i] != g {
                    continue;
                }
                let in_a = match axis {
                    Axis::Activity => strata.activity[i] == ActivityClass::Active,
                    Axis::Sleep => strata.sleep[i] == SleepClass::MedianSleep,
                };
                if in_a {
                    a.push(columns[mi][i]);
                } else {
                    b.push(columns[mi][i]);
                }
            }
            let marker = table.features[j].name.clone();
            match students_t(&a, &b) {
                Ok(test) => Ok(ReportRow {
                    marker,
                    sex,
                    age_group: g,
                    axis,
                    test,
                    p_adjusted: 1.0,
                    significant: false,
                }),
                Err(e) => Err(SkippedCell {
                    marker,
                    sex,
                    age_group: g,
                    axis,
                    reason: e.to_string(),
                }),
            }
        })
        .collect();

    let mut rows = Vec::new();
    let mut skipped = Vec::new();
    for o in outcomes {
        match o {
            Ok(r) => rows.push(r),
            Err(s) => skipped.push(s),
        }
    }

    let mut families = Vec::new();
    for sex in Sex::ALL {
        for axis in Axis::ALL {
            let idx: Vec<usize> = (0..rows.len())
                .filter(|&r| rows[r].sex == sex && rows[r].axis == axis)
                .collect();
            if idx.is_empty() {
                continue;
            }
            let ps: Vec<f64> = idx.iter().map(|&r| rows[r].test.p).collect();
            let bh = benjamini_hochberg(&ps, q)?;
            for (k, &r) in idx.iter().enumerate() {
                rows[r].p_adjusted = bh.adjusted[k];
                rows[r].significant = bh.reject[k];
            }
            let mut tested = 0;
            let mut any = 0;
            let mut half = 0;
            for &j in markers {
                let name = &table.features[j].name;
                let mine: Vec<&ReportRow> = idx.iter().map(|&r| &rows[r]).filter(|r| &r.marker == name).collect();
                if mine.is_empty() {
                    continue;
                }
                tested += 1;
                let sig = mine.iter().filter(|r| r.significant).count();
                if sig >= 1 {
                    any += 1;
                }
                if 2 * sig >= groups.len() {
                    half += 1;
                }
            }
            families.push(FamilySummary {
                sex,
                axis,
                tests: idx.len(),
                rejections: bh.rejections(),
                markers_tested: tested,
                markers_significant_any: any,
                markers_significant_half: half,
            });
        }
    }
    for s in &skipped {
        log::warn!(
            "skipped {} {} group {} {}: {}",
            s.marker,
            s.sex,
            s.age_group,
            s.axis,
            s.reason
        );
    }
    Ok(SignificanceReport { rows, families, skipped, q })
}

impl SignificanceReport {
    pub fn family(&self, sex: Sex, axis: Axis) -> Option<&FamilySummary> {
        self.families.iter().find(|f| f.sex == sex && f.axis == axis)
    }

    pub fn write_csv_to<W: Write>(&self, groups: &AgeGroups, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record([
            "marker", "sex", "age_group", "axis", "n_a", "n_b", "mean_a", "mean_b", "t", "df", "p", "p_adjusted",
            "significant",
        ])?;
        let mut order: Vec<&ReportRow> = self.rows.iter().collect();
        order.sort_by(|a, b| {
            (&a.marker, a.sex, a.age_group, a.axis).cmp(&(&b.marker, b.sex, b.age_group, b.axis))
        });
        for r in order {
            w.write_record([
                r.marker.clone(),
                r.sex.code().to_string(),
                groups.label(r.age_group),
                r.axis.to_string(),
                r.test.n_a.to_string(),
                r.test.n_b.to_string(),
                format!("{}", r.test.mean_a),
                format!("{}", r.test.mean_b),
                format!("{}", r.test.t),
                format!("{}", r.test.df),
                format!("{}", r.test.p),
                format!("{}", r.p_adjusted),
                u8::from(r.significant).to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_csv(&self, groups: &AgeGroups, path: &Path) -> Result<()> {
        self.write_csv_to(groups, std::fs::File::create(path)?)
    }
}
