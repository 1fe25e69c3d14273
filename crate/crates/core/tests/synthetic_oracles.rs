//! Generator-level oracles: file round trip, class separation, null and
//! planted lifestyle effects, and the follow-up R² gain.

use statrs::distribution::{Binomial, DiscreteCDF};
use tripcohort::cohort_data::{
    load_cohort, stratify_lifestyle, write_cohort, AgeGroups, CohortTable, FeatureKind, LifestyleColumns,
};
use tripcohort::downstream::knn_classify;
use tripcohort::numerics::Matrix;
use tripcohort::stats::{lifestyle_significance_report, Axis, SignificanceReport};
use tripcohort::synthcohort::{
    biomarker_name, generate_cohort, generate_followup, layout, GeneratorSpec, DEFAULT_ACTIVITY_EFFECT,
    DEFAULT_CLASS_OFFSET, DEFAULT_SLEEP_EFFECT, MODERATE_MINUTES,
};

fn report(table: &CohortTable, q: f64) -> SignificanceReport {
    let groups = AgeGroups::default();
    let strata = stratify_lifestyle(table, &groups, &LifestyleColumns::default()).unwrap();
    let markers = table.features_of_kind(FeatureKind::Biomarker);
    lifestyle_significance_report(table, &strata, &groups, &markers, q).unwrap()
}

fn complete_spec(participants: usize, seed: u64, activity: f64, sleep: f64) -> GeneratorSpec {
    let mut s = GeneratorSpec::with_effects(DEFAULT_CLASS_OFFSET, activity, sleep);
    s.participants = participants;
    s.seed = seed;
    s.missingness = 0.0;
    s
}

#[test]
fn thousand_row_file_round_trips() {
    let mut spec = GeneratorSpec::default();
    spec.participants = 1000;
    let (table, _) = generate_cohort(&spec).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cohort.csv");
    write_cohort(&table, &path).unwrap();
    let back = load_cohort(&path, &spec.schema()).unwrap();
    assert_eq!(back.len(), 1000);
    assert_eq!(back.ids, table.ids);
    for i in 0..table.len() {
        assert_eq!(back.row_values(i), table.row_values(i), "row {i}");
        assert_eq!(back.age[i], table.age[i]);
    }
    assert!((0..table.len()).any(|i| table.row_values(i).iter().any(Option::is_none)));
}

#[test]
fn classes_at_four_sigma_are_separable_by_one_nn() {
    let mut spec = complete_spec(2000, 11, 0.0, 0.0);
    spec.classes.truncate(2);
    spec.classes[0].prevalence = 0.5;
    spec.classes[1].prevalence = 0.5;
    spec.classes[1].parents.clear();
    let sd: Vec<f64> = (0..spec.biomarkers())
        .map(|j| {
            let lf: f64 = (0..spec.loadings.cols()).map(|k| spec.loadings.get(j, k).powi(2)).sum();
            (lf + spec.idio_sd.powi(2)).sqrt()
        })
        .collect();
    // Means at -4 and +4 standard deviations on the diabetes block.
    for j in 0..spec.biomarkers() {
        let shift = if layout::DIABETES.contains(&j) { 4.0 * sd[j] } else { 0.0 };
        spec.base_mean[j] -= shift;
        spec.classes[0].offset[j] = 0.0;
        spec.classes[1].offset[j] = 2.0 * shift;
    }
    let (table, truth) = generate_cohort(&spec).unwrap();
    let markers = table.features_of_kind(FeatureKind::Biomarker);
    let x = Matrix::from_rows(
        &(0..table.len())
            .map(|i| markers.iter().map(|&j| table.value(i, j).unwrap()).collect::<Vec<_>>())
            .collect::<Vec<_>>(),
    )
    .unwrap();
    let train: Vec<usize> = (0..1000).collect();
    let test: Vec<usize> = (1000..2000).collect();
    let labels: Vec<usize> = train.iter().map(|&i| truth.class[i]).collect();
    let pred = knn_classify(&x.select_rows(&train), &labels, &x.select_rows(&test), 1).unwrap();
    let correct = test.iter().zip(&pred).filter(|(&i, &p)| truth.class[i] == p).count();
    assert!(correct as f64 / test.len() as f64 >= 0.99, "{correct} of {}", test.len());
}

#[test]
fn null_lifestyle_effects_give_nominal_false_positive_rate() {
    let alpha = 0.05;
    let mut tests = 0u64;
    let mut hits = 0u64;
    for seed in 0..4 {
        let (table, _) = generate_cohort(&complete_spec(5000, 100 + seed, 0.0, 0.0)).unwrap();
        for row in report(&table, 0.05).rows {
            tests += 1;
            hits += u64::from(row.test.p < alpha);
        }
    }
    let b = Binomial::new(alpha, tests).unwrap();
    let (lo, hi) = (b.inverse_cdf(0.005), b.inverse_cdf(0.995));
    assert!((lo..=hi).contains(&hits), "{hits} of {tests} below {alpha}; envelope [{lo}, {hi}]");
}

fn affected(axis: Axis) -> std::ops::Range<usize> {
    match axis {
        Axis::Activity => layout::ACTIVITY,
        Axis::Sleep => layout::SLEEP,
    }
}

#[test]
fn planted_effects_are_found_at_two_thousand_per_cell() {
    // Two sexes by four age groups at about 2,000 participants each.
    let (table, _) = generate_cohort(&complete_spec(16_000, 21, DEFAULT_ACTIVITY_EFFECT, DEFAULT_SLEEP_EFFECT)).unwrap();
    let r = report(&table, 0.05);
    let groups = AgeGroups::default().len();
    for axis in Axis::ALL {
        for j in affected(axis) {
            let name = biomarker_name(j);
            for sex in tripcohort::cohort_data::Sex::ALL {
                let sig = r
                    .rows
                    .iter()
                    .filter(|row| row.marker == name && row.axis == axis && row.sex == sex && row.significant)
                    .count();
                assert!(2 * sig >= groups, "{name} {sex} {axis:?}: {sig} of {groups} groups");
            }
        }
    }
}

#[test]
fn planted_effects_have_power_and_bounded_fdr_across_replicates() {
    let q = 0.05;
    let (mut found, mut planted) = (0usize, 0usize);
    let mut fdp_sum = 0.0;
    let mut families = 0usize;
    for seed in 0..20 {
        let (table, _) = generate_cohort(&complete_spec(5000, 300 + seed, DEFAULT_ACTIVITY_EFFECT, DEFAULT_SLEEP_EFFECT)).unwrap();
        let r = report(&table, q);
        for axis in Axis::ALL {
            let s: Vec<String> = affected(axis).map(biomarker_name).collect();
            for sex in tripcohort::cohort_data::Sex::ALL {
                let fam: Vec<_> = r.rows.iter().filter(|row| row.axis == axis && row.sex == sex).collect();
                let rejected = fam.iter().filter(|row| row.significant).count();
                let false_rej = fam.iter().filter(|row| row.significant && !s.contains(&row.marker)).count();
                fdp_sum += false_rej as f64 / rejected.max(1) as f64;
                families += 1;
                for name in &s {
                    planted += 1;
                    found += usize::from(fam.iter().any(|row| &row.marker == name && row.significant));
                }
            }
        }
    }
    let power = found as f64 / planted as f64;
    let fdr = fdp_sum / families as f64;
    assert!(power >= 0.9, "power {power}");
    assert!(fdr <= q, "empirical FDR {fdr}");
}

/// R² of an ordinary least-squares fit of `y` on an intercept and `xs`.
fn r_squared(y: &[f64], xs: &[&[f64]]) -> f64 {
    let n = y.len();
    let p = xs.len() + 1;
    let row = |i: usize| -> Vec<f64> { std::iter::once(1.0).chain(xs.iter().map(|x| x[i])).collect() };
    let mut a = vec![vec![0.0; p]; p];
    let mut b = vec![0.0; p];
    for i in 0..n {
        let r = row(i);
        for u in 0..p {
            b[u] += r[u] * y[i];
            for v in 0..p {
                a[u][v] += r[u] * r[v];
            }
        }
    }
    // Gaussian elimination with partial pivoting on the normal equations.
    for c in 0..p {
        let piv = (c..p).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs())).unwrap();
        a.swap(c, piv);
        b.swap(c, piv);
        for r in c + 1..p {
            let f = a[r][c] / a[c][c];
            for k in c..p {
                a[r][k] -= f * a[c][k];
            }
            b[r] -= f * b[c];
        }
    }
    let mut coef = vec![0.0; p];
    for c in (0..p).rev() {
        coef[c] = (b[c] - (c + 1..p).map(|k| a[c][k] * coef[k]).sum::<f64>()) / a[c][c];
    }
    let mean = y.iter().sum::<f64>() / n as f64;
    let ss_tot: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    let ss_res: f64 = (0..n)
        .map(|i| {
            let fit: f64 = row(i).iter().zip(&coef).map(|(r, c)| r * c).sum();
            (y[i] - fit).powi(2)
        })
        .sum();
    1.0 - ss_res / ss_tot
}

#[test]
fn followup_r2_gain_matches_analytic_value() {
    let mut spec = GeneratorSpec::default();
    spec.participants = 5000;
    spec.missingness = 0.0;
    spec.followup.fraction = 1.0;
    let (visit1, mut truth) = generate_cohort(&spec).unwrap();
    let visit2 = generate_followup(&spec, &visit1, &mut truth).unwrap();
    assert_eq!(visit2.ids, visit1.ids);
    let all: Vec<usize> = (0..spec.classes.len()).collect();
    let moderate = visit1.feature_index(MODERATE_MINUTES).unwrap();
    let log_minutes: Vec<f64> = (0..visit1.len()).map(|i| visit1.value(i, moderate).unwrap().ln()).collect();
    for j in spec.followup_markers() {
        let b: Vec<f64> = (0..visit1.len()).map(|i| visit1.value(i, j).unwrap()).collect();
        let y: Vec<f64> = (0..visit2.len()).map(|i| visit2.value(i, j).unwrap()).collect();
        let gain = r_squared(&y, &[&b, &log_minutes]) - r_squared(&y, &[&b]);
        let analytic = spec.analytic_delta_r2(j, &all).unwrap();
        assert!(
            (gain - analytic).abs() <= 0.2 * analytic,
            "{}: sample gain {gain:.4} vs analytic {analytic:.4}",
            biomarker_name(j)
        );
    }
}
