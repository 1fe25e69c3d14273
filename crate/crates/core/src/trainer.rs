//! Embedding-network training on fixed triplet sets.

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rand::seq::SliceRandom;

use crate::cohort_data::TripletSet;
use crate::error::{Error, Result};
use crate::metric_loss::{evaluate_loss, loss_gradients, LossKind, LossReport, TripletBatch};
use crate::numerics::{
    adam_step, derive_seed, lr_at_epoch, mlp_backward, mlp_forward, parse_checkpoint, serialize_checkpoint,
    AdamState, Matrix, MlpParams, Rng, LrSchedule, DEFAULT_HIDDEN,
};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub loss: LossKind,
    pub eps0: f64,
    pub output_dim: usize,
    pub hidden: Vec<usize>,
    pub dropout: f64,
    /// `schedule.initial` is the initial learning rate.
    pub schedule: LrSchedule,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        let schedule = LrSchedule::default();
        Self {
            loss: LossKind::Proposed,
            eps0: 1.0,
            output_dim: 32,
            hidden: DEFAULT_HIDDEN.to_vec(),
            dropout: 0.1,
            schedule,
            epochs: schedule.end,
            batch_size: 256,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.schedule.validate()?;
        if self.batch_size == 0 || self.output_dim == 0 || self.hidden.iter().any(|&h| h == 0) {
            return Err(Error::InvalidConfig("batch size and layer widths must be positive".into()));
        }
        if !(self.eps0 > 0.0 && self.eps0.is_finite()) {
            return Err(Error::InvalidConfig(format!("margin {} must be positive", self.eps0)));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::InvalidConfig(format!("dropout {} outside [0, 1)", self.dropout)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingModel {
    pub params: MlpParams,
}

impl EmbeddingModel {
    pub fn init(input_dim: usize, config: &TrainConfig) -> Result<Self> {
        let mut rng = Rng::seed_from(derive_seed(config.seed, "train.init"));
        Ok(Self {
            params: MlpParams::init(input_dim, &config.hidden, config.output_dim, &mut rng)?,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.params.input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.params.output_dim()
    }

    pub fn to_checkpoint(&self) -> String {
        serialize_checkpoint(&self.params)
    }

    pub fn from_checkpoint(text: &str) -> Result<Self> {
        Ok(Self {
            params: parse_checkpoint(text)?,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_checkpoint())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_checkpoint(&std::fs::read_to_string(path)?)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: Option<f64>,
    pub lr: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainLog {
    pub epochs: Vec<EpochRecord>,
}

impl TrainLog {
    pub const HEADER: [&'static str; 5] = ["epoch", "train_loss", "val_loss", "lr", "seconds"];

    pub fn write_csv_to<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(Self::HEADER)?;
        for r in &self.epochs {
            w.write_record([
                r.epoch.to_string(),
                format!("{}", r.train_loss),
                r.val_loss.map(|v| format!("{v}")).unwrap_or_default(),
                format!("{}", r.lr),
                format!("{:.3}", r.seconds),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        self.write_csv_to(std::fs::File::create(path)?)
    }

    pub fn final_train_loss(&self) -> Option<f64> {
        self.epochs.last().map(|r| r.train_loss)
    }
}

fn gather(x: &Matrix, triplets: &[(usize, usize, usize)]) -> Matrix {
    let n = triplets.len();
    let mut idx = Vec::with_capacity(3 * n);
    idx.extend(triplets.iter().map(|t| t.0));
    idx.extend(triplets.iter().map(|t| t.1));
    idx.extend(triplets.iter().map(|t| t.2));
    x.select_rows(&idx)
}

fn split_roles(out: &Matrix, n: usize) -> Result<TripletBatch> {
    let a: Vec<usize> = (0..n).collect();
    let p: Vec<usize> = (n..2 * n).collect();
    let q: Vec<usize> = (2 * n..3 * n).collect();
    TripletBatch::new(out.select_rows(&a), out.select_rows(&p), out.select_rows(&q))
}

/// Batch-mean loss and its parameter gradient. All three roles go through
/// one forward pass of the same parameters.
#[allow(clippy::too_many_arguments)]
pub fn triplet_loss_and_gradients(
    params: &MlpParams,
    x: &Matrix,
    triplets: &[(usize, usize, usize)],
    eps0: f64,
    kind: LossKind,
    dropout: f64,
    training: bool,
    rng: &mut Rng,
) -> Result<(LossReport, MlpParams)> {
    let n = triplets.len();
    if n == 0 {
        return Err(Error::dim("empty triplet batch"));
    }
    let stacked = gather(x, triplets);
    let (out, tape) = mlp_forward(params, &stacked, dropout, training, rng)?;
    let batch = split_roles(&out, n)?;
    let report = evaluate_loss(&batch, eps0, kind)?;
    let g = loss_gradients(&batch, eps0, kind)?;
    let d = out.cols();
    let mut upstream = Matrix::zeros(3 * n, d);
    for i in 0..n {
        upstream.row_mut(i).copy_from_slice(g.anchor.row(i));
        upstream.row_mut(n + i).copy_from_slice(g.positive.row(i));
        upstream.row_mut(2 * n + i).copy_from_slice(g.negative.row(i));
    }
    let (grads, _) = mlp_backward(params, &tape, &upstream)?;
    Ok((report, grads))
}

fn check_triplets(x: &Matrix, set: &TripletSet) -> Result<()> {
    let rows = x.rows();
    if let Some(t) = set.triplets.iter().find(|t| t.0 >= rows || t.1 >= rows || t.2 >= rows) {
        return Err(Error::dim(format!("triplet {t:?} indexes past {rows} rows")));
    }
    Ok(())
}

/// Loss on `set` in inference mode, embedding each referenced row once.
pub fn validation_loss(model: &EmbeddingModel, x: &Matrix, set: &TripletSet, eps0: f64, kind: LossKind) -> Result<f64> {
    if set.is_empty() {
        return Err(Error::State("validation triplet set is empty".into()));
    }
    check_triplets(x, set)?;
    let z = embed(model, x)?;
    let t = &set.triplets;
    let batch = TripletBatch::new(
        z.select_rows(&t.iter().map(|t| t.0).collect::<Vec<_>>()),
        z.select_rows(&t.iter().map(|t| t.1).collect::<Vec<_>>()),
        z.select_rows(&t.iter().map(|t| t.2).collect::<Vec<_>>()),
    )?;
    Ok(evaluate_loss(&batch, eps0, kind)?.total)
}

/// Inference-mode embedding of every row of `x`.
pub fn embed(model: &EmbeddingModel, x: &Matrix) -> Result<Matrix> {
    if x.cols() != model.input_dim() {
        return Err(Error::dim(format!(
            "input has {} columns, model expects {}",
            x.cols(),
            model.input_dim()
        )));
    }
    let mut unused = Rng::seed_from(0);
    Ok(mlp_forward(&model.params, x, 0.0, false, &mut unused)?.0)
}

/// Validation rows and triplets monitored once per epoch.
pub struct Validation<'a> {
    pub x: &'a Matrix,
    pub triplets: &'a TripletSet,
}

/// Runs `config.epochs` passes over `triplets`, reshuffled each epoch.
pub fn train_embedding_model(
    x: &Matrix,
    triplets: &TripletSet,
    validation: Option<Validation<'_>>,
    config: &TrainConfig,
) -> Result<(EmbeddingModel, TrainLog)> {
    config.validate()?;
    check_triplets(x, triplets)?;
    if let Some(v) = &validation {
        check_triplets(v.x, v.triplets)?;
        if v.x.cols() != x.cols() {
            return Err(Error::dim("validation inputs have a different width"));
        }
    }
    let mut model = EmbeddingModel::init(x.cols(), config)?;
    let mut log = TrainLog::default();
    if config.epochs == 0 {
        return Ok((model, log));
    }
    if triplets.is_empty() {
        return Err(Error::State("training triplet set is empty".into()));
    }
    let mut shuffle_rng = Rng::seed_from(derive_seed(config.seed, "train.shuffle"));
    let mut dropout_rng = Rng::seed_from(derive_seed(config.seed, "train.dropout"));
    let mut adam = AdamState::new(&model.params, config.schedule.initial);
    let mut order = triplets.triplets.clone();

    for epoch in 0..config.epochs {
        let started = Instant::now();
        adam.lr = lr_at_epoch(&config.schedule, epoch);
        order.shuffle(&mut shuffle_rng);
        let mut weighted = 0.0;
        for (b, chunk) in order.chunks(config.batch_size).enumerate() {
            let (report, grads) = triplet_loss_and_gradients(
                &model.params,
                x,
                chunk,
                config.eps0,
                config.loss,
                config.dropout,
                true,
                &mut dropout_rng,
            )
            .map_err(|e| match e {
                Error::Numeric(_) => Error::Diverged {
                    epoch,
                    batch: b,
                    hinge: f64::NAN,
                    reg: f64::NAN,
                },
                other => other,
            })?;
            if !report.total.is_finite() || !grads.all_finite() {
                return Err(Error::Diverged {
                    epoch,
                    batch: b,
                    hinge: report.mean_hinge,
                    reg: report.mean_reg,
                });
            }
            adam_step(&mut model.params, &grads, &mut adam)?;
            weighted += report.total * chunk.len() as f64;
        }
        let val_loss = match &validation {
            Some(v) if !v.triplets.is_empty() => Some(validation_loss(&model, v.x, v.triplets, config.eps0, config.loss)?),
            _ => None,
        };
        let rec = EpochRecord {
            epoch,
            train_loss: weighted / order.len() as f64,
            val_loss,
            lr: adam.lr,
            seconds: started.elapsed().as_secs_f64(),
        };
        log::debug!(
            "epoch {} loss {:.6} val {:?} lr {}",
            rec.epoch,
            rec.train_loss,
            rec.val_loss,
            rec.lr
        );
        log.epochs.push(rec);
    }
    Ok((model, log))
}
