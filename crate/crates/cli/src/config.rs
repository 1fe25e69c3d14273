//! Sectioned `key = value` run configuration.
//!
//! ```text
//! # comment
//! [section]
//! key = value
//! ```
//!
//! Every key has a default; unknown sections or keys are errors. Empty values
//! mean "unset" for optional paths and lists.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use tripcohort::cohort_data::{AgeGroups, SplitFractions};
use tripcohort::downstream::{Classifier, GbtParams, Task, Variant};
use tripcohort::numerics::LrSchedule;
use tripcohort::synthcohort::{
    GeneratorSpec, DEFAULT_ACTIVITY_EFFECT, DEFAULT_CLASS_OFFSET, DEFAULT_RANGE_WIDTH, DEFAULT_SLEEP_EFFECT,
    DEFAULT_TARGET_DELTA_R2,
};
use tripcohort::trainer::TrainConfig;
use tripcohort::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct PathsConfig {
    pub out_dir: PathBuf,
    /// External inputs; when unset the `gen` outputs are used.
    pub cohort: Option<PathBuf>,
    pub followup: Option<PathBuf>,
    pub schema: Option<PathBuf>,
    pub reference_ranges: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorConfig {
    /// Cohort seed; the run seed when unset.
    pub seed: Option<u64>,
    pub participants: usize,
    pub missingness: f64,
    pub class_offset: f64,
    pub activity_effect: f64,
    pub sleep_effect: f64,
    pub followup_fraction: f64,
    pub target_delta_r2: f64,
    pub range_width: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrepConfig {
    pub completeness: f64,
    pub fractions: SplitFractions,
    pub triplets: usize,
    pub val_triplets: usize,
    pub followup_window: (f64, f64),
    /// One embedding model per sex; `false` pools both sexes.
    pub per_sex: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StatsConfig {
    pub q: f64,
    pub age_groups: AgeGroups,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalConfig {
    pub classifiers: Vec<Classifier>,
    pub tasks: Vec<Task>,
    /// 0 means the embedding width.
    pub pca_k: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictSettings {
    pub folds: usize,
    pub gbt: GbtParams,
    pub with_elapsed: bool,
    pub healthy_only: bool,
    /// Empty means the schema's markers of interest.
    pub markers: Vec<String>,
    pub variants: Vec<Variant>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub paths: PathsConfig,
    pub generator: GeneratorConfig,
    pub prep: PrepConfig,
    pub train: TrainConfig,
    pub stats: StatsConfig,
    pub eval: EvalConfig,
    pub predict: PredictSettings,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            paths: PathsConfig {
                out_dir: PathBuf::from("run"),
                cohort: None,
                followup: None,
                schema: None,
                reference_ranges: None,
            },
            generator: GeneratorConfig {
                seed: None,
                participants: 5000,
                missingness: 0.05,
                class_offset: DEFAULT_CLASS_OFFSET,
                activity_effect: DEFAULT_ACTIVITY_EFFECT,
                sleep_effect: DEFAULT_SLEEP_EFFECT,
                followup_fraction: 0.15,
                target_delta_r2: DEFAULT_TARGET_DELTA_R2,
                range_width: DEFAULT_RANGE_WIDTH,
            },
            prep: PrepConfig {
                completeness: 0.75,
                fractions: SplitFractions::default(),
                triplets: 100_000,
                val_triplets: 10_000,
                followup_window: (2.0, 5.0),
                per_sex: true,
            },
            train: TrainConfig {
                seed: 7,
                ..TrainConfig::default()
            },
            stats: StatsConfig {
                q: 0.05,
                age_groups: AgeGroups::default(),
            },
            eval: EvalConfig {
                classifiers: vec![Classifier::Knn { k: 5 }, Classifier::Lda],
                tasks: Task::ALL.to_vec(),
                pca_k: 0,
            },
            predict: PredictSettings {
                folds: 5,
                gbt: GbtParams::default(),
                with_elapsed: true,
                healthy_only: true,
                markers: Vec::new(),
                variants: Variant::ALL.to_vec(),
            },
        }
    }
}

fn bad(line: usize, msg: impl Into<String>) -> Error {
    Error::Format {
        line,
        message: msg.into(),
    }
}

fn parse_num<T: std::str::FromStr>(line: usize, key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| bad(line, format!("`{key}`: cannot parse {v:?}")))
}

fn parse_bool(line: usize, key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(bad(line, format!("`{key}`: expected true/false, got {v:?}"))),
    }
}

fn list(v: &str) -> Vec<String> {
    v.split(',').map(str::trim).filter(|s| !s.is_empty()).map(String::from).collect()
}

fn opt_path(v: &str) -> Option<PathBuf> {
    (!v.is_empty()).then(|| PathBuf::from(v))
}

fn parse_age_groups(line: usize, v: &str) -> Result<AgeGroups> {
    let mut ranges = Vec::new();
    for item in list(v) {
        let (lo, hi) = item
            .split_once('-')
            .ok_or_else(|| bad(line, format!("age group {item:?} is not lo-hi")))?;
        ranges.push((parse_num(line, "age_groups", lo.trim())?, parse_num(line, "age_groups", hi.trim())?));
    }
    AgeGroups::new(ranges)
}

fn join<T: ToString>(items: impl IntoIterator<Item = T>) -> String {
    items.into_iter().map(|i| i.to_string()).collect::<Vec<_>>().join(",")
}

fn show_path(p: &Option<PathBuf>) -> String {
    p.as_ref().map(|p| p.display().to_string()).unwrap_or_default()
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        let mut section = String::new();
        for (n, raw) in text.lines().enumerate() {
            let line = n + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            if let Some(name) = content.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
                section = name.trim().to_string();
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| bad(line, format!("expected key = value, got {content:?}")))?;
            cfg.set(line, &section, key.trim(), value.trim())?;
        }
        cfg.train.seed = cfg.seed;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidConfig(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    fn set(&mut self, line: usize, section: &str, key: &str, v: &str) -> Result<()> {
        let g = &mut self.generator;
        let p = &mut self.prep;
        let t = &mut self.train;
        let pr = &mut self.predict;
        match (section, key) {
            ("run", "seed") => self.seed = parse_num(line, key, v)?,
            ("paths", "out_dir") => self.paths.out_dir = PathBuf::from(v),
            ("paths", "cohort") => self.paths.cohort = opt_path(v),
            ("paths", "followup") => self.paths.followup = opt_path(v),
            ("paths", "schema") => self.paths.schema = opt_path(v),
            ("paths", "reference_ranges") => self.paths.reference_ranges = opt_path(v),
            ("generator", "seed") => g.seed = if v.is_empty() { None } else { Some(parse_num(line, key, v)?) },
            ("generator", "participants") => g.participants = parse_num(line, key, v)?,
            ("generator", "missingness") => g.missingness = parse_num(line, key, v)?,
            ("generator", "class_offset") => g.class_offset = parse_num(line, key, v)?,
            ("generator", "activity_effect") => g.activity_effect = parse_num(line, key, v)?,
            ("generator", "sleep_effect") => g.sleep_effect = parse_num(line, key, v)?,
            ("generator", "followup_fraction") => g.followup_fraction = parse_num(line, key, v)?,
            ("generator", "target_delta_r2") => g.target_delta_r2 = parse_num(line, key, v)?,
            ("generator", "range_width") => g.range_width = parse_num(line, key, v)?,
            ("prep", "completeness") => p.completeness = parse_num(line, key, v)?,
            ("prep", "train_fraction") => p.fractions.train = parse_num(line, key, v)?,
            ("prep", "val_fraction") => p.fractions.val = parse_num(line, key, v)?,
            ("prep", "test_fraction") => p.fractions.test = parse_num(line, key, v)?,
            ("prep", "triplets") => p.triplets = parse_num(line, key, v)?,
            ("prep", "val_triplets") => p.val_triplets = parse_num(line, key, v)?,
            ("prep", "followup_min_years") => p.followup_window.0 = parse_num(line, key, v)?,
            ("prep", "followup_max_years") => p.followup_window.1 = parse_num(line, key, v)?,
            ("prep", "per_sex") => p.per_sex = parse_bool(line, key, v)?,
            ("train", "loss") => t.loss = v.parse().map_err(|_| bad(line, format!("unknown loss {v:?}")))?,
            ("train", "eps0") => t.eps0 = parse_num(line, key, v)?,
            ("train", "output_dim") => t.output_dim = parse_num(line, key, v)?,
            ("train", "hidden") => {
                t.hidden = list(v)
                    .iter()
                    .map(|h| parse_num(line, key, h))
                    .collect::<Result<_>>()?
            }
            ("train", "dropout") => t.dropout = parse_num(line, key, v)?,
            ("train", "lr") => t.schedule.initial = parse_num(line, key, v)?,
            ("train", "lr_decay") => t.schedule.decay = parse_num(line, key, v)?,
            ("train", "lr_interval") => t.schedule.interval = parse_num(line, key, v)?,
            ("train", "lr_start") => t.schedule.start = parse_num(line, key, v)?,
            ("train", "lr_end") => t.schedule.end = parse_num(line, key, v)?,
            ("train", "epochs") => t.epochs = parse_num(line, key, v)?,
            ("train", "batch_size") => t.batch_size = parse_num(line, key, v)?,
            ("stats", "q") => self.stats.q = parse_num(line, key, v)?,
            ("stats", "age_groups") => self.stats.age_groups = parse_age_groups(line, v)?,
            ("eval", "classifiers") => {
                self.eval.classifiers = list(v).iter().map(|c| c.parse()).collect::<Result<_>>()?
            }
            ("eval", "tasks") => {
                self.eval.tasks = list(v)
                    .iter()
                    .map(|s| {
                        Task::ALL
                            .into_iter()
                            .find(|t| t.as_str() == s)
                            .ok_or_else(|| bad(line, format!("unknown task {s:?}")))
                    })
                    .collect::<Result<_>>()?
            }
            ("eval", "pca_k") => self.eval.pca_k = parse_num(line, key, v)?,
            ("predict", "folds") => pr.folds = parse_num(line, key, v)?,
            ("predict", "gbt_rounds") => pr.gbt.rounds = parse_num(line, key, v)?,
            ("predict", "gbt_depth") => pr.gbt.max_depth = parse_num(line, key, v)?,
            ("predict", "gbt_lr") => pr.gbt.learning_rate = parse_num(line, key, v)?,
            ("predict", "with_elapsed") => pr.with_elapsed = parse_bool(line, key, v)?,
            ("predict", "healthy_only") => pr.healthy_only = parse_bool(line, key, v)?,
            ("predict", "markers") => pr.markers = list(v),
            ("predict", "variants") => {
                pr.variants = list(v).iter().map(|s| s.parse()).collect::<Result<_>>()?
            }
            ("", _) => return Err(bad(line, format!("key `{key}` outside any section"))),
            _ => return Err(bad(line, format!("unknown key `{key}` in section [{section}]"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.generator_spec()?.validate()?;
        self.prep.fractions.validate()?;
        if !(self.prep.completeness > 0.0 && self.prep.completeness <= 1.0) {
            return Err(Error::InvalidConfig(format!("completeness {} outside (0, 1]", self.prep.completeness)));
        }
        if self.prep.triplets == 0 {
            return Err(Error::InvalidConfig("triplet count must be positive".into()));
        }
        self.train.validate()?;
        if !(self.stats.q > 0.0 && self.stats.q < 1.0) {
            return Err(Error::InvalidConfig(format!("q = {} outside (0, 1)", self.stats.q)));
        }
        if self.eval.classifiers.is_empty() || self.eval.tasks.is_empty() {
            return Err(Error::InvalidConfig("eval needs at least one classifier and task".into()));
        }
        self.predict.gbt.validate()?;
        if self.predict.folds < 2 {
            return Err(Error::InvalidConfig("predict needs at least 2 folds".into()));
        }
        for p in [&self.paths.cohort, &self.paths.followup, &self.paths.schema, &self.paths.reference_ranges]
            .into_iter()
            .flatten()
        {
            if !p.exists() {
                return Err(Error::InvalidConfig(format!("input {} does not exist", p.display())));
            }
        }
        if self.paths.cohort.is_some() != self.paths.schema.is_some() {
            return Err(Error::InvalidConfig("an external cohort needs an external schema and vice versa".into()));
        }
        Ok(())
    }

    pub fn generator_spec(&self) -> Result<GeneratorSpec> {
        let g = &self.generator;
        let mut spec = GeneratorSpec::with_effects(g.class_offset, g.activity_effect, g.sleep_effect);
        spec.participants = g.participants;
        spec.seed = g.seed.unwrap_or(self.seed);
        spec.missingness = g.missingness;
        spec.followup.fraction = g.followup_fraction;
        if g.target_delta_r2 > 0.0 {
            spec.set_followup_delta_r2(g.target_delta_r2, self.predict.healthy_only)?;
        }
        Ok(spec)
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            seed: self.seed,
            ..self.train.clone()
        }
    }

    /// Canonical text form; parses back to an equal config.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let p = &self.paths;
        let g = &self.generator;
        let pr = &self.prep;
        let t = &self.train;
        let LrSchedule {
            initial,
            decay,
            interval,
            start,
            end,
        } = t.schedule;
        let d = &self.predict;
        let _ = write!(
            s,
            "[run]\nseed = {}\n\n\
             [paths]\nout_dir = {}\ncohort = {}\nfollowup = {}\nschema = {}\nreference_ranges = {}\n\n\
             [generator]\nseed = {}\nparticipants = {}\nmissingness = {}\nclass_offset = {}\nactivity_effect = {}\n\
             sleep_effect = {}\nfollowup_fraction = {}\ntarget_delta_r2 = {}\nrange_width = {}\n\n\
             [prep]\ncompleteness = {}\ntrain_fraction = {}\nval_fraction = {}\ntest_fraction = {}\n\
             triplets = {}\nval_triplets = {}\nfollowup_min_years = {}\nfollowup_max_years = {}\nper_sex = {}\n\n\
             [train]\nloss = {}\neps0 = {}\noutput_dim = {}\nhidden = {}\ndropout = {}\nlr = {}\nlr_decay = {}\n\
             lr_interval = {}\nlr_start = {}\nlr_end = {}\nepochs = {}\nbatch_size = {}\n\n\
             [stats]\nq = {}\nage_groups = {}\n\n\
             [eval]\nclassifiers = {}\ntasks = {}\npca_k = {}\n\n\
             [predict]\nfolds = {}\ngbt_rounds = {}\ngbt_depth = {}\ngbt_lr = {}\nwith_elapsed = {}\n\
             healthy_only = {}\nmarkers = {}\nvariants = {}\n",
            self.seed,
            p.out_dir.display(),
            show_path(&p.cohort),
            show_path(&p.followup),
            show_path(&p.schema),
            show_path(&p.reference_ranges),
            g.seed.map(|s| s.to_string()).unwrap_or_default(),
            g.participants,
            g.missingness,
            g.class_offset,
            g.activity_effect,
            g.sleep_effect,
            g.followup_fraction,
            g.target_delta_r2,
            g.range_width,
            pr.completeness,
            pr.fractions.train,
            pr.fractions.val,
            pr.fractions.test,
            pr.triplets,
            pr.val_triplets,
            pr.followup_window.0,
            pr.followup_window.1,
            pr.per_sex,
            t.loss,
            t.eps0,
            t.output_dim,
            join(&t.hidden),
            t.dropout,
            initial,
            decay,
            interval,
            start,
            end,
            t.epochs,
            t.batch_size,
            self.stats.q,
            join(self.stats.age_groups.ranges().iter().map(|(a, b)| format!("{a}-{b}"))),
            join(self.eval.classifiers.iter().map(|c| c.name())),
            join(&self.eval.tasks),
            self.eval.pca_k,
            d.folds,
            d.gbt.rounds,
            d.gbt.max_depth,
            d.gbt.learning_rate,
            d.with_elapsed,
            d.healthy_only,
            join(&d.markers),
            join(&d.variants),
        );
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use tripcohort::metric_loss::LossKind;

    #[test]
    fn defaults_round_trip_through_text() {
        let cfg = RunConfig::default();
        let back = RunConfig::parse(&cfg.to_text()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn overrides_apply() {
        let cfg = RunConfig::parse(
            "# small run\n[run]\nseed = 11\n[train]\nloss = swap\nhidden = 16, 8\nepochs = 3 # inline\n\
             [stats]\nage_groups = 36-50,51-75\n[eval]\nclassifiers = knn3,lda\n[predict]\nvariants = marker_only\n",
        )
        .unwrap();
        assert_eq!(cfg.seed, 11);
        assert_eq!(cfg.train.seed, 11);
        assert_eq!(cfg.train.loss, LossKind::Swap);
        assert_eq!(cfg.train.hidden, vec![16, 8]);
        assert_eq!(cfg.train.epochs, 3);
        assert_eq!(cfg.stats.age_groups.len(), 2);
        assert_eq!(cfg.eval.classifiers[0], Classifier::Knn { k: 3 });
        assert_eq!(cfg.predict.variants, vec![Variant::MarkerOnly]);
        assert_eq!(RunConfig::parse(&cfg.to_text()).unwrap(), cfg);
    }

    #[test]
    fn unknown_keys_and_sections_are_rejected() {
        assert!(RunConfig::parse("[train]\nlearning_rate = 0.1\n").is_err());
        assert!(RunConfig::parse("[optimizer]\nlr = 0.1\n").is_err());
        assert!(RunConfig::parse("seed = 3\n").is_err());
        assert!(RunConfig::parse("[train]\nepochs = many\n").is_err());
        assert!(RunConfig::parse("[train]\nepochs\n").is_err());
    }

    #[test]
    fn validation_catches_bad_values() {
        let mut cfg = RunConfig::default();
        assert!(cfg.validate().is_ok());
        cfg.prep.completeness = 0.0;
        assert!(cfg.validate().is_err());
        let mut cfg = RunConfig::default();
        cfg.paths.cohort = Some(PathBuf::from("/definitely/not/here.csv"));
        assert!(cfg.validate().is_err());
    }
}
