//! Pipeline stages. Each reads its inputs from the run directory, writes its
//! outputs under a stage subdirectory and refreshes the manifest.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use tripcohort::cohort_data::{
    filter_completeness, label_conditions, load_cohort, load_reference_ranges, load_schema,
    sample_triplets, split_cohort, split_visits, stratify_lifestyle, write_cohort, write_reference_ranges,
    write_schema, CohortTable, ConditionVocabulary, FeatureKind, FeatureSpec, LifestyleColumns,
    QuantileNormalizer, Sex, TripletSet, AGE_INPUT,
};
use tripcohort::downstream::{
    evaluate_representations, pca_representation, predict_future_values, write_evals, ClassifierEval,
    EvalPartition, PredictConfig, PredictionCohort, PredictionReport, RepresentationSplit,
};
use tripcohort::numerics::{derive_seed, Matrix, Rng};
use tripcohort::stats::{lifestyle_significance_report, SignificanceReport};
use tripcohort::synthcohort::{generate_cohort, generate_followup};
use tripcohort::trainer::{embed, train_embedding_model, EmbeddingModel, TrainLog, Validation};
use tripcohort::{Error, Result};

use crate::config::RunConfig;
use crate::manifest::RunManifest;

/// File locations inside a run directory.
#[derive(Debug, Clone)]
pub struct RunLayout {
    pub root: PathBuf,
}

impl RunLayout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn file(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }

    pub fn gen_cohort(&self) -> PathBuf {
        self.file("gen/cohort.csv")
    }
    pub fn gen_followup(&self) -> PathBuf {
        self.file("gen/followup.csv")
    }
    pub fn gen_truth(&self) -> PathBuf {
        self.file("gen/ground_truth.csv")
    }
    pub fn gen_schema(&self) -> PathBuf {
        self.file("gen/schema.csv")
    }
    pub fn gen_ranges(&self) -> PathBuf {
        self.file("gen/reference_ranges.csv")
    }
    pub fn baseline(&self) -> PathBuf {
        self.file("prep/baseline.csv")
    }
    pub fn followup(&self) -> PathBuf {
        self.file("prep/followup.csv")
    }
    pub fn schema(&self) -> PathBuf {
        self.file("prep/schema.csv")
    }
    pub fn split(&self) -> PathBuf {
        self.file("prep/split.csv")
    }
    pub fn quantiles(&self) -> PathBuf {
        self.file("prep/quantiles.tcqn")
    }
    pub fn processed(&self, sex: Sex) -> PathBuf {
        self.file(&format!("prep/processed_{}.csv", sex.name()))
    }
    pub fn triplets(&self, part: &str) -> PathBuf {
        self.file(&format!("prep/triplets_{part}.csv"))
    }
    pub fn val_triplets(&self, part: &str) -> PathBuf {
        self.file(&format!("prep/val_triplets_{part}.csv"))
    }
    pub fn model(&self, part: &str) -> PathBuf {
        self.file(&format!("train/model_{part}.tcemb"))
    }
    pub fn train_log(&self, part: &str) -> PathBuf {
        self.file(&format!("train/log_{part}.csv"))
    }
    pub fn embeddings(&self) -> PathBuf {
        self.file("embed/embeddings.csv")
    }
    pub fn stats_report(&self) -> PathBuf {
        self.file("stats/report.csv")
    }
    pub fn evals(&self) -> PathBuf {
        self.file("eval/evals.csv")
    }
    pub fn predict_results(&self) -> PathBuf {
        self.file("predict/results.csv")
    }
    pub fn predict_summary(&self) -> PathBuf {
        self.file("predict/summary.csv")
    }
}

fn require(path: &Path, stage: &str) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(Error::State(format!(
            "missing upstream artifact {}; run `{stage}` first",
            path.display()
        )))
    }
}

fn ensure_dir(path: &Path) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    Ok(())
}

fn finish(cfg: &RunConfig, stage: &str, started: Instant) -> Result<()> {
    RunManifest::record(&cfg.paths.out_dir, &cfg.to_text(), stage, started.elapsed().as_secs_f64())?;
    log::info!("{stage} finished in {:.1}s", started.elapsed().as_secs_f64());
    Ok(())
}

pub fn cmd_gen(cfg: &RunConfig) -> Result<()> {
    let started = Instant::now();
    let lay = RunLayout::new(&cfg.paths.out_dir);
    let spec = cfg.generator_spec()?;
    let (visit1, mut truth) = generate_cohort(&spec)?;
    let visit2 = generate_followup(&spec, &visit1, &mut truth)?;
    ensure_dir(&lay.gen_cohort())?;
    write_cohort(&visit1, &lay.gen_cohort())?;
    write_cohort(&visit2, &lay.gen_followup())?;
    write_schema(&spec.schema(), &lay.gen_schema())?;
    write_reference_ranges(&spec.reference_ranges(cfg.generator.range_width)?, &lay.gen_ranges())?;
    truth.write_csv(&visit1.ids, &spec, &lay.gen_truth())?;
    finish(cfg, "gen", started)
}

/// Modelling partitions: one per sex, or a single pooled one.
pub fn partitions(cfg: &RunConfig) -> Vec<(&'static str, Vec<Sex>)> {
    if cfg.prep.per_sex {
        Sex::ALL.iter().map(|&s| (s.name(), vec![s])).collect()
    } else {
        vec![("pooled", Sex::ALL.to_vec())]
    }
}

fn partition_rows(table: &CohortTable, sexes: &[Sex]) -> Vec<usize> {
    (0..table.len()).filter(|&i| sexes.contains(&table.sex[i])).collect()
}

/// Network inputs: every retained feature plus age.
pub fn model_inputs(schema: &[FeatureSpec]) -> Vec<String> {
    let mut inputs: Vec<String> = schema.iter().map(|f| f.name.clone()).collect();
    inputs.push(AGE_INPUT.to_string());
    inputs
}

fn append(into: &mut CohortTable, from: &CohortTable) -> Result<()> {
    for i in 0..from.len() {
        into.push(from.record(i))?;
    }
    Ok(())
}

fn restrict_features(table: &CohortTable, schema: &[FeatureSpec]) -> Result<CohortTable> {
    let idx = schema
        .iter()
        .map(|f| table.require_feature(&f.name))
        .collect::<Result<Vec<_>>>()?;
    let mut out = table.select_features(&idx);
    for (f, spec) in out.features.iter_mut().zip(schema) {
        f.completeness = spec.completeness;
    }
    Ok(out)
}

pub fn cmd_prep(cfg: &RunConfig) -> Result<()> {
    let started = Instant::now();
    let lay = RunLayout::new(&cfg.paths.out_dir);
    let schema_path = cfg.paths.schema.clone().unwrap_or_else(|| lay.gen_schema());
    let cohort_path = cfg.paths.cohort.clone().unwrap_or_else(|| lay.gen_cohort());
    require(&schema_path, "gen")?;
    require(&cohort_path, "gen")?;
    let schema = load_schema(&schema_path)?;
    let mut all = load_cohort(&cohort_path, &schema)?;
    let followup_path = cfg.paths.followup.clone().or_else(|| {
        let p = lay.gen_followup();
        (cfg.paths.cohort.is_none() && p.exists()).then_some(p)
    });
    if let Some(p) = &followup_path {
        append(&mut all, &load_cohort(p, &schema)?)?;
    }
    let ranges_path = cfg.paths.reference_ranges.clone().or_else(|| {
        let p = lay.gen_ranges();
        (cfg.paths.cohort.is_none() && p.exists()).then_some(p)
    });
    let ranges = match &ranges_path {
        Some(p) => load_reference_ranges(p)?,
        None => {
            log::warn!("no reference ranges: every undiagnosed participant counts as bona fide healthy");
            Vec::new()
        }
    };

    let (lo, hi) = cfg.prep.followup_window;
    let (baseline, followup) = split_visits(&all, lo, hi)?;
    let baseline = filter_completeness(&baseline, cfg.prep.completeness)?;
    let kept: Vec<FeatureSpec> = baseline.features.clone();
    let ranges: Vec<_> = ranges
        .into_iter()
        .filter(|r| baseline.feature_index(&r.feature).is_some())
        .collect();
    let vocab = ConditionVocabulary::default();
    let baseline = label_conditions(&baseline, &vocab, &ranges)?;
    let ids = baseline.id_index();
    let followup = restrict_features(&followup, &kept)?.filter_rows(|i| ids.contains_key(followup.ids[i].as_str()));
    let holdouts: Vec<String> = followup.ids.clone();

    let mut rng = Rng::seed_from(derive_seed(cfg.seed, "prep.split"));
    let split = split_cohort(&baseline, cfg.prep.fractions, &mut rng, &holdouts)?;
    let inputs = model_inputs(&kept);
    let normalizer = QuantileNormalizer::fit(&baseline.select_rows(&split.train), &inputs)?;

    ensure_dir(&lay.baseline())?;
    write_cohort(&baseline, &lay.baseline())?;
    write_cohort(&followup, &lay.followup())?;
    write_schema(&kept, &lay.schema())?;
    std::fs::write(lay.quantiles(), normalizer.to_text())?;
    let processed = normalizer.apply(&baseline)?;
    for sex in Sex::ALL {
        write_cohort(&processed.select_rows(&processed.rows_of_sex(sex)), &lay.processed(sex))?;
    }

    let mut which = vec![""; baseline.len()];
    for (name, rows) in [("train", &split.train), ("val", &split.val), ("test", &split.test)] {
        for &i in rows {
            which[i] = name;
        }
    }
    let mut text = String::from("id,sex,split\n");
    for i in 0..baseline.len() {
        text.push_str(&format!("{},{},{}\n", baseline.ids[i], baseline.sex[i].code(), which[i]));
    }
    std::fs::write(lay.split(), text)?;

    let labels = vocab.label_ids(&baseline)?;
    for (part, sexes) in partitions(cfg) {
        let rows = partition_rows(&baseline, &sexes);
        let part_ids: Vec<String> = rows.iter().map(|&i| baseline.ids[i].clone()).collect();
        for (kind, count, members, path) in [
            ("train", cfg.prep.triplets, &split.train, lay.triplets(part)),
            ("val", cfg.prep.val_triplets, &split.val, lay.val_triplets(part)),
        ] {
            if count == 0 {
                continue;
            }
            let local: Vec<usize> = (0..rows.len()).filter(|&k| members.binary_search(&rows[k]).is_ok()).collect();
            let y: Vec<usize> = local.iter().map(|&k| labels[rows[k]]).collect();
            let mut rng = Rng::seed_from(derive_seed(cfg.seed, &format!("prep.triplets.{kind}.{part}")));
            let sampled = match sample_triplets(&y, count, &mut rng) {
                Ok(t) => t,
                Err(e) if kind == "val" => {
                    log::warn!("no validation triplets for {part}: {e}");
                    continue;
                }
                Err(e) => return Err(e),
            };
            let set = TripletSet {
                triplets: sampled.into_iter().map(|(a, p, n)| (local[a], local[p], local[n])).collect(),
                split: kind.to_string(),
                seed: cfg.seed,
            };
            std::fs::write(path, set.to_csv(&part_ids))?;
        }
    }
    finish(cfg, "prep", started)
}

/// Baseline table, its schema, the fitted normalizer and the split labels.
pub struct Prepared {
    pub baseline: CohortTable,
    pub followup: CohortTable,
    pub schema: Vec<FeatureSpec>,
    pub normalizer: QuantileNormalizer,
    /// `train`, `val` or `test` per baseline row.
    pub split: Vec<String>,
    pub vocab: ConditionVocabulary,
    pub labels: Vec<usize>,
}

impl Prepared {
    pub fn load(lay: &RunLayout) -> Result<Self> {
        for p in [lay.schema(), lay.baseline(), lay.followup(), lay.quantiles(), lay.split()] {
            require(&p, "prep")?;
        }
        let schema = load_schema(&lay.schema())?;
        let baseline = load_cohort(&lay.baseline(), &schema)?;
        let followup = load_cohort(&lay.followup(), &schema)?;
        let normalizer = QuantileNormalizer::from_text(&std::fs::read_to_string(lay.quantiles())?)?;
        let index = baseline.id_index();
        let mut split = vec![String::new(); baseline.len()];
        let text = std::fs::read_to_string(lay.split())?;
        for (k, line) in text.lines().enumerate().skip(1) {
            let parts: Vec<&str> = line.split(',').collect();
            let (Some(id), Some(which)) = (parts.first(), parts.get(2)) else {
                return Err(Error::Format {
                    line: k + 1,
                    message: "expected id,sex,split".into(),
                });
            };
            let &i = index.get(*id).ok_or_else(|| Error::Format {
                line: k + 1,
                message: format!("unknown participant `{id}`"),
            })?;
            split[i] = which.to_string();
        }
        let vocab = ConditionVocabulary::default();
        let labels = vocab.label_ids(&baseline)?;
        Ok(Self {
            baseline,
            followup,
            schema,
            normalizer,
            split,
            vocab,
            labels,
        })
    }

    pub fn inputs(&self) -> Vec<String> {
        model_inputs(&self.schema)
    }

    pub fn rows_of(&self, sexes: &[Sex]) -> Vec<usize> {
        partition_rows(&self.baseline, sexes)
    }

    /// Normalized network inputs for the given baseline rows.
    pub fn design(&self, rows: &[usize]) -> Result<Matrix> {
        self.normalizer
            .transform_matrix(&self.baseline.select_rows(rows), &self.inputs())
    }

    pub fn ids(&self, rows: &[usize]) -> Vec<String> {
        rows.iter().map(|&i| self.baseline.ids[i].clone()).collect()
    }
}

fn read_triplets(path: &Path, ids: &[String], split: &str, seed: u64) -> Result<TripletSet> {
    TripletSet::from_csv(&std::fs::read_to_string(path)?, ids, split, seed)
}

pub fn cmd_train(cfg: &RunConfig) -> Result<()> {
    let started = Instant::now();
    let lay = RunLayout::new(&cfg.paths.out_dir);
    let prep = Prepared::load(&lay)?;
    let parts = partitions(cfg);
    for (part, _) in &parts {
        require(&lay.triplets(part), "prep")?;
    }
    let outcomes: Vec<Result<(EmbeddingModel, TrainLog)>> = parts
        .par_iter()
        .map(|(part, sexes)| {
            let rows = prep.rows_of(sexes);
            let ids = prep.ids(&rows);
            let x = prep.design(&rows)?;
            let triplets = read_triplets(&lay.triplets(part), &ids, "train", cfg.seed)?;
            let val_path = lay.val_triplets(part);
            let val = if val_path.exists() {
                Some(read_triplets(&val_path, &ids, "val", cfg.seed)?)
            } else {
                None
            };
            let mut tc = cfg.train_config();
            tc.seed = derive_seed(cfg.seed, &format!("train.{part}"));
            let validation = val.as_ref().map(|t| Validation { x: &x, triplets: t });
            train_embedding_model(&x, &triplets, validation, &tc)
        })
        .collect();
    ensure_dir(&lay.model("x"))?;
    for ((part, _), outcome) in parts.iter().zip(outcomes) {
        let (model, log) = outcome?;
        model.save(&lay.model(part))?;
        log.write_csv(&lay.train_log(part))?;
    }
    finish(cfg, "train", started)
}

/// Embeddings for every baseline row, in baseline order.
pub fn compute_embeddings(cfg: &RunConfig, lay: &RunLayout, prep: &Prepared) -> Result<Matrix> {
    let mut out: Option<Matrix> = None;
    for (part, sexes) in partitions(cfg) {
        require(&lay.model(part), "train")?;
        let model = EmbeddingModel::load(&lay.model(part))?;
        let rows = prep.rows_of(&sexes);
        let e = embed(&model, &prep.design(&rows)?)?;
        let m = out.get_or_insert_with(|| Matrix::zeros(prep.baseline.len(), e.cols()));
        for (k, &i) in rows.iter().enumerate() {
            m.row_mut(i).copy_from_slice(e.row(k));
        }
    }
    out.ok_or_else(|| Error::State("no partitions to embed".into()))
}

pub fn write_embeddings(path: &Path, ids: &[String], e: &Matrix) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["id".to_string()];
    header.extend((0..e.cols()).map(|j| format!("e{j:02}")));
    w.write_record(&header)?;
    for (id, row) in ids.iter().zip(e.row_iter()) {
        let mut rec = vec![id.clone()];
        rec.extend(row.iter().map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads an embedding file and orders it to match `ids`.
pub fn read_embeddings(path: &Path, ids: &[String]) -> Result<Matrix> {
    let mut r = csv::Reader::from_path(path)?;
    let width = r.headers()?.len().saturating_sub(1);
    let mut by_id: HashMap<String, Vec<f64>> = HashMap::new();
    for (k, rec) in r.records().enumerate() {
        let rec = rec?;
        let vals = rec
            .iter()
            .skip(1)
            .map(|v| v.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::Format {
                line: k + 2,
                message: format!("embedding value: {e}"),
            })?;
        by_id.insert(rec[0].to_string(), vals);
    }
    let mut m = Matrix::zeros(ids.len(), width);
    for (i, id) in ids.iter().enumerate() {
        let v = by_id
            .get(id)
            .ok_or_else(|| Error::State(format!("no embedding for participant `{id}`")))?;
        m.row_mut(i).copy_from_slice(v);
    }
    Ok(m)
}

pub fn cmd_embed(cfg: &RunConfig) -> Result<()> {
    let started = Instant::now();
    let lay = RunLayout::new(&cfg.paths.out_dir);
    let prep = Prepared::load(&lay)?;
    let e = compute_embeddings(cfg, &lay, &prep)?;
    ensure_dir(&lay.embeddings())?;
    write_embeddings(&lay.embeddings(), &prep.baseline.ids, &e)?;
    finish(cfg, "embed", started)
}

pub fn significance(cfg: &RunConfig, table: &CohortTable) -> Result<SignificanceReport> {
    let strata = stratify_lifestyle(table, &cfg.stats.age_groups, &LifestyleColumns::default())?;
    let markers = table.features_of_kind(FeatureKind::Biomarker);
    lifestyle_significance_report(table, &strata, &cfg.stats.age_groups, &markers, cfg.stats.q)
}

pub fn cmd_stats(cfg: &RunConfig) -> Result<()> {
    let started = Instant::now();
    let lay = RunLayout::new(&cfg.paths.out_dir);
    let prep = Prepared::load(&lay)?;
    let report = significance(cfg, &prep.baseline)?;
    for f in &report.families {
        log::info!(
            "{} {}: {} of {} markers significant in at least one age group",
            f.sex,
            f.axis.as_str(),
            f.markers_significant_any,
            f.markers_tested
        );
    }
    ensure_dir(&lay.stats_report())?;
    report.write_csv(&cfg.stats.age_groups, &lay.stats_report())?;
    finish(cfg, "stats", started)
}

/// Raw, PCA and embedding representations of train and test rows per partition.
pub fn eval_partitions(cfg: &RunConfig, prep: &Prepared, embeddings: &Matrix) -> Result<Vec<EvalPartition>> {
    let mut out = Vec::new();
    for (_, sexes) in partitions(cfg) {
        let rows = prep.rows_of(&sexes);
        let train: Vec<usize> = rows.iter().copied().filter(|&i| prep.split[i] == "train").collect();
        let test: Vec<usize> = rows.iter().copied().filter(|&i| prep.split[i] == "test").collect();
        let xtr = prep.design(&train)?;
        let xte = prep.design(&test)?;
        let k = if cfg.eval.pca_k == 0 { embeddings.cols() } else { cfg.eval.pca_k }.min(xtr.cols());
        let pca = pca_representation(&xtr, &xte, k)?;
        out.push(EvalPartition {
            train_conditions: train.iter().map(|&i| prep.labels[i]).collect(),
            test_conditions: test.iter().map(|&i| prep.labels[i]).collect(),
            representations: vec![
                RepresentationSplit {
                    name: "raw".into(),
                    train: xtr,
                    test: xte,
                },
                pca,
                RepresentationSplit {
                    name: "embedding".into(),
                    train: embeddings.select_rows(&train),
                    test: embeddings.select_rows(&test),
                },
            ],
        });
    }
    Ok(out)
}

pub fn run_eval(cfg: &RunConfig, prep: &Prepared, embeddings: &Matrix) -> Result<Vec<ClassifierEval>> {
    let parts = eval_partitions(cfg, prep, embeddings)?;
    evaluate_representations(&parts, &cfg.eval.classifiers, &cfg.eval.tasks, &prep.vocab, cfg.seed)
}

pub fn cmd_eval(cfg: &RunConfig) -> Result<()> {
    let started = Instant::now();
    let lay = RunLayout::new(&cfg.paths.out_dir);
    let prep = Prepared::load(&lay)?;
    require(&lay.embeddings(), "embed")?;
    let e = read_embeddings(&lay.embeddings(), &prep.baseline.ids)?;
    let evals = run_eval(cfg, &prep, &e)?;
    ensure_dir(&lay.evals())?;
    write_evals(&evals, &lay.evals())?;
    finish(cfg, "eval", started)
}

fn column_or_nan(table: &CohortTable, row: usize, j: usize) -> f64 {
    table.value(row, j).unwrap_or(f64::NAN)
}

/// Prospective cohort: baseline rows of participants with a follow-up visit.
pub fn prediction_cohort(cfg: &RunConfig, prep: &Prepared, embeddings: &Matrix) -> Result<PredictionCohort> {
    let b = &prep.baseline;
    let f = &prep.followup;
    let index = b.id_index();
    let mut pairs: Vec<(usize, usize)> = (0..f.len())
        .filter_map(|k| index.get(f.ids[k].as_str()).map(|&i| (i, k)))
        .filter(|&(i, _)| !cfg.predict.healthy_only || prep.vocab.is_healthy_id(prep.labels[i]))
        .collect();
    pairs.sort_unstable();
    let biomarkers = b.features_of_kind(FeatureKind::Biomarker);
    let lifestyle = b.features_of_kind(FeatureKind::Lifestyle);
    let n = pairs.len();
    let mut base = Matrix::zeros(n, biomarkers.len());
    let mut fut = Matrix::zeros(n, biomarkers.len());
    let mut life = Matrix::zeros(n, lifestyle.len());
    for (r, &(i, k)) in pairs.iter().enumerate() {
        for (c, &j) in biomarkers.iter().enumerate() {
            base.set(r, c, column_or_nan(b, i, j));
            let fj = f.require_feature(&b.features[j].name)?;
            fut.set(r, c, column_or_nan(f, k, fj));
        }
        for (c, &j) in lifestyle.iter().enumerate() {
            life.set(r, c, column_or_nan(b, i, j));
        }
    }
    let rows: Vec<usize> = pairs.iter().map(|p| p.0).collect();
    Ok(PredictionCohort {
        ids: prep.ids(&rows),
        age: rows.iter().map(|&i| b.age[i]).collect(),
        sex: rows.iter().map(|&i| b.sex[i].indicator()).collect(),
        elapsed_years: pairs
            .iter()
            .map(|&(_, k)| f.elapsed_years[k].unwrap_or(f64::NAN))
            .collect(),
        biomarker_names: biomarkers.iter().map(|&j| b.features[j].name.clone()).collect(),
        biomarkers: base,
        future: fut,
        lifestyle: life,
        embeddings: embeddings.select_rows(&rows),
    })
}

pub fn prediction_markers(cfg: &RunConfig, prep: &Prepared) -> Result<Vec<String>> {
    let markers: Vec<String> = if cfg.predict.markers.is_empty() {
        prep.schema
            .iter()
            .filter(|f| f.marker_of_interest && f.kind == FeatureKind::Biomarker)
            .map(|f| f.name.clone())
            .collect()
    } else {
        cfg.predict.markers.clone()
    };
    if markers.is_empty() {
        return Err(Error::InvalidConfig(
            "no markers to predict: set [predict] markers or flag markers of interest in the schema".into(),
        ));
    }
    Ok(markers)
}

pub fn run_predict(cfg: &RunConfig, prep: &Prepared, embeddings: &Matrix) -> Result<PredictionReport> {
    let cohort = prediction_cohort(cfg, prep, embeddings)?;
    let markers = prediction_markers(cfg, prep)?;
    let pc = PredictConfig {
        folds: cfg.predict.folds,
        gbt: cfg.predict.gbt,
        with_elapsed: cfg.predict.with_elapsed,
        seed: cfg.seed,
    };
    predict_future_values(&cohort, &markers, &cfg.predict.variants, &pc)
}

pub fn cmd_predict(cfg: &RunConfig) -> Result<()> {
    let started = Instant::now();
    let lay = RunLayout::new(&cfg.paths.out_dir);
    let prep = Prepared::load(&lay)?;
    require(&lay.embeddings(), "embed")?;
    let e = read_embeddings(&lay.embeddings(), &prep.baseline.ids)?;
    let report = run_predict(cfg, &prep, &e)?;
    ensure_dir(&lay.predict_results())?;
    report.write_results(&lay.predict_results())?;
    report.write_summary(&lay.predict_summary())?;
    finish(cfg, "predict", started)
}

pub fn cmd_pipeline(cfg: &RunConfig) -> Result<()> {
    if cfg.paths.cohort.is_none() {
        cmd_gen(cfg)?;
    }
    cmd_prep(cfg)?;
    cmd_train(cfg)?;
    cmd_embed(cfg)?;
    cmd_stats(cfg)?;
    cmd_eval(cfg)?;
    cmd_predict(cfg)
}

pub fn run_stage(stage: &str, cfg: &RunConfig) -> Result<()> {
    cfg.validate()?;
    std::fs::create_dir_all(&cfg.paths.out_dir)?;
    match stage {
        "gen" => cmd_gen(cfg),
        "prep" => cmd_prep(cfg),
        "train" => cmd_train(cfg),
        "stats" => cmd_stats(cfg),
        "embed" => cmd_embed(cfg),
        "eval" => cmd_eval(cfg),
        "predict" => cmd_predict(cfg),
        "pipeline" => cmd_pipeline(cfg),
        other => Err(Error::InvalidConfig(format!("unknown subcommand `{other}`"))),
    }
}

