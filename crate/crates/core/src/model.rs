//! The trainable actors: a weak affine classifier over its own feature
//! space, the strong heads (class prototypes or a linear probe) over the
//! strong feature space, and the training loops that connect them.
//!
//! Strong-model training follows one scheme for every objective: shuffle
//! the training rows per epoch with a seeded sub-stream, take the mean
//! loss and gradient over each mini-batch, update with Adam under a
//! warm-up schedule, measure validation accuracy at each epoch end, and
//! return the snapshot with the best validation accuracy. Only head
//! parameters ever change; embeddings and supervision stay frozen.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::CoreError;
use crate::io::{self, DataError};
use crate::loss::{
    BatchSupervision, KlDirection, LossKind, LossParams,
};
use crate::matrix::{argmax, Matrix};
use crate::optim::{
    adam_step, AdamState, BestModelTracker, DecayMode, LrSchedule, OptimError,
};
use crate::rng::{Stream, SubRng};
use crate::types::{
    check_positive_row_norms, EmbeddingMatrix, LinearProbe, LogitMatrix, LogitSource,
    PrototypeMatrix, Temperature,
};

/// Self-training weight ceiling for the `AuxConf` objective.
pub const AUX_ALPHA_MAX: f64 = 0.75;
/// Fraction of total steps over which the `AuxConf` weight ramps up.
pub const AUX_RAMP_FRACTION: f64 = 0.2;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error(transparent)]
    Core(#[from] CoreError),

    #[error(transparent)]
    Optim(#[from] OptimError),

    #[error(transparent)]
    Data(#[from] DataError),

    #[error("invalid training config: {reason}")]
    InvalidConfig { reason: String },

    #[error("loss '{loss}' is incompatible with {supervision} supervision")]
    IncompatibleSupervision {
        loss: LossKind,
        supervision: &'static str,
    },

    #[error("loss '{loss}' requires the {required} head")]
    IncompatibleHead {
        loss: LossKind,
        required: &'static str,
    },

    #[error("anchor set has no examples for classes {missing:?}")]
    MissingClasses { missing: Vec<usize> },

    #[error("checkpoint at {path}: {reason}")]
    BadCheckpoint { path: String, reason: String },

    #[error("prediction/label length mismatch: {predictions} vs {labels}")]
    LengthMismatch { predictions: usize, labels: usize },
}

/// The weak teacher: an affine classifier over the weak feature space.
/// How those features derive from raw inputs is external; the model only
/// ever sees the embedding matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct WeakModel {
    pub probe: LinearProbe,
    /// Free-text provenance of the weak feature space.
    pub feature_view: String,
}

/// The strong model's trainable head.
#[derive(Debug, Clone, PartialEq)]
pub enum StrongHead {
    Prototype(PrototypeMatrix),
    Linear(LinearProbe),
}

impl StrongHead {
    pub fn k(&self) -> usize {
        match self {
            StrongHead::Prototype(c) => c.k(),
            StrongHead::Linear(p) => p.k(),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            StrongHead::Prototype(c) => c.dim(),
            StrongHead::Linear(p) => p.dim(),
        }
    }

    pub fn variant_name(&self) -> &'static str {
        match self {
            StrongHead::Prototype(_) => "prototype",
            StrongHead::Linear(_) => "linear",
        }
    }
}

/// Hyperparameters for one training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub base_lr: f64,
    pub tau: Temperature,
    pub loss: LossKind,
    pub seed: u64,
    pub warmup_ratio: f64,
    #[serde(default)]
    pub kl_direction: KlDirection,
    #[serde(default)]
    pub decay: DecayMode,
}

impl TrainConfig {
    /// Weak-model defaults: 3 epochs, batch 512, lr 1e-3, cross-entropy.
    pub fn weak_default(seed: u64) -> Self {
        Self {
            epochs: 3,
            batch_size: 512,
            base_lr: 1e-3,
            tau: Temperature::default(),
            loss: LossKind::Ce,
            seed,
            warmup_ratio: 0.1,
            kl_direction: KlDirection::default(),
            decay: DecayMode::default(),
        }
    }

    /// Strong-model defaults: 10 epochs, batch 512, lr 1e-2, tau 2.
    pub fn strong_default(seed: u64, loss: LossKind) -> Self {
        Self {
            epochs: 10,
            batch_size: 512,
            base_lr: 1e-2,
            tau: Temperature::default(),
            loss,
            seed,
            warmup_ratio: 0.1,
            kl_direction: KlDirection::default(),
            decay: DecayMode::default(),
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.epochs < 1 {
            return Err(ModelError::InvalidConfig {
                reason: "epochs must be at least 1".into(),
            });
        }
        if self.batch_size < 1 {
            return Err(ModelError::InvalidConfig {
                reason: "batch_size must be at least 1".into(),
            });
        }
        if !(self.base_lr.is_finite() && self.base_lr > 0.0) {
            return Err(ModelError::InvalidConfig {
                reason: format!("base_lr must be positive, found {}", self.base_lr),
            });
        }
        if !(0.0..1.0).contains(&self.warmup_ratio) {
            return Err(ModelError::InvalidConfig {
                reason: format!(
                    "warmup_ratio must lie in [0, 1), found {}",
                    self.warmup_ratio
                ),
            });
        }
        Ok(())
    }
}

/// Supervision for strong-model training.
#[derive(Debug, Clone)]
pub enum Supervision {
    /// Weak-model logits, one row per training sample.
    WeakLogits(LogitMatrix),
    /// Hard labels: ground truth (ceiling mode) or pseudo-labels.
    Labels(Vec<usize>),
}

impl Supervision {
    pub fn len(&self) -> usize {
        match self {
            Supervision::WeakLogits(m) => m.len(),
            Supervision::Labels(l) => l.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn kind_name(&self) -> &'static str {
        match self {
            Supervision::WeakLogits(_) => "weak-logit",
            Supervision::Labels(_) => "hard-label",
        }
    }
}

/// Where initial prototypes come from: a matrix file of externally
/// computed class embeddings, or per-class anchor means drawn from a
/// labeled embedding set.
pub enum PrototypeSource<'a> {
    File(&'a Path),
    Anchors {
        embeddings: &'a EmbeddingMatrix,
        labels: &'a [usize],
        per_class: usize,
    },
}

/// Builds the initial prototype matrix.
///
/// The file variant loads a `k x d` matrix verbatim. The anchors variant
/// averages up to `per_class` embeddings per class, taken in data order,
/// and errors listing every class with no anchor at all.
pub fn init_prototypes(
    source: PrototypeSource<'_>,
    k: usize,
    d: usize,
) -> Result<PrototypeMatrix, ModelError> {
    match source {
        PrototypeSource::File(path) => {
            let m = io::read_matrix(path)?;
            if m.shape() != (k, d) {
                return Err(ModelError::Core(CoreError::ShapeMismatch {
                    expected: format!("{k}x{d} prototype matrix"),
                    found: format!("{}x{}", m.rows(), m.cols()),
                }));
            }
            Ok(PrototypeMatrix::new(m)?)
        }
        PrototypeSource::Anchors {
            embeddings,
            labels,
            per_class,
        } => {
            if per_class < 1 {
                return Err(ModelError::InvalidConfig {
                    reason: "per_class must be at least 1".into(),
                });
            }
            if labels.len() != embeddings.len() {
                return Err(ModelError::LengthMismatch {
                    predictions: embeddings.len(),
                    labels: labels.len(),
                });
            }
            if embeddings.dim() != d {
                return Err(ModelError::Core(CoreError::ShapeMismatch {
                    expected: format!("anchor embeddings of dim {d}"),
                    found: format!("dim {}", embeddings.dim()),
                }));
            }
            let mut sums = Matrix::zeros(k, d);
            let mut counts = vec![0usize; k];
            for (i, &y) in labels.iter().enumerate() {
                if y >= k {
                    return Err(ModelError::Core(CoreError::LabelOutOfRange {
                        label: y,
                        classes: k,
                    }));
                }
                if counts[y] == per_class {
                    continue;
                }
                counts[y] += 1;
                let row = sums.row_mut(y);
                for (t, v) in embeddings.row(i).iter().enumerate() {
                    row[t] += v;
                }
            }
            let missing: Vec<usize> = (0..k).filter(|&y| counts[y] == 0).collect();
            if !missing.is_empty() {
                return Err(ModelError::MissingClasses { missing });
            }
            for (y, &count) in counts.iter().enumerate() {
                let inv = 1.0 / count as f64;
                for v in sums.row_mut(y) {
                    *v *= inv;
                }
            }
            Ok(PrototypeMatrix::new(sums)?)
        }
    }
}

/// Per-epoch validation record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochVal {
    pub epoch: usize,
    pub step: u64,
    pub val_acc: f64,
}

/// One point of a training curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub step: u64,
    pub train_acc: f64,
    pub test_acc: f64,
}

/// Reference sets evaluated at every epoch end to record curves.
pub struct EvalProbe<'a> {
    pub train: (&'a EmbeddingMatrix, &'a [usize]),
    pub test: (&'a EmbeddingMatrix, &'a [usize]),
}

/// Result of `train_strong`: the selected head plus per-epoch records.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub head: StrongHead,
    pub val_history: Vec<EpochVal>,
    pub curves: Vec<CurvePoint>,
}

/// Result of `train_weak`: the final model plus mean loss per epoch.
#[derive(Debug, Clone)]
pub struct WeakOutcome {
    pub model: WeakModel,
    pub epoch_losses: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
enum HeadParams {
    Prototype(Matrix),
    Linear { w: Matrix, b: Vec<f64> },
}

impl HeadParams {
    fn from_head(head: StrongHead) -> Self {
        match head {
            StrongHead::Prototype(c) => HeadParams::Prototype(c.into_matrix()),
            StrongHead::Linear(p) => {
                let bias = p.bias().to_vec();
                HeadParams::Linear {
                    w: p.weights().clone(),
                    b: bias,
                }
            }
        }
    }

    fn into_head(self) -> Result<StrongHead, ModelError> {
        Ok(match self {
            HeadParams::Prototype(m) => StrongHead::Prototype(PrototypeMatrix::new(m)?),
            HeadParams::Linear { w, b } => StrongHead::Linear(LinearProbe::new(w, b)?),
        })
    }

    fn logits(&self, r: &[f64]) -> Result<Vec<f64>, CoreError> {
        match self {
            HeadParams::Prototype(c) => crate::loss::cosine_logits_raw(c, r),
            HeadParams::Linear { w, b } => Ok(w
                .as_slice()
                .chunks_exact(w.cols())
                .zip(b)
                .map(|(row, bias)| crate::matrix::dot(row, r) + bias)
                .collect()),
        }
    }

    fn predict(&self, emb: &Matrix) -> Result<Vec<usize>, CoreError> {
        let mut out = Vec::with_capacity(emb.rows());
        for i in 0..emb.rows() {
            out.push(argmax(&self.logits(emb.row(i))?));
        }
        Ok(out)
    }
}

fn accuracy_of(params: &HeadParams, emb: &Matrix, labels: &[usize]) -> Result<f64, ModelError> {
    let preds = params.predict(emb)?;
    evaluate_accuracy(&preds, labels)
}

fn aux_alpha_at(step: u64, total_steps: u64) -> f64 {
    let ramp = AUX_RAMP_FRACTION * total_steps as f64;
    if ramp <= 0.0 {
        return AUX_ALPHA_MAX;
    }
    AUX_ALPHA_MAX * (step as f64 / ramp).min(1.0)
}

/// Trains the weak model: mini-batch Adam on cross-entropy over ground
/// truth labels. No validation split or best-model selection; the final
/// parameters are returned. Deterministic for a given seed.
pub fn train_weak(
    train: &EmbeddingMatrix,
    labels: &[usize],
    k: usize,
    cfg: &TrainConfig,
) -> Result<WeakOutcome, ModelError> {
    cfg.validate()?;
    if cfg.loss != LossKind::Ce {
        return Err(ModelError::InvalidConfig {
            reason: format!("weak model trains with loss 'ce', found '{}'", cfg.loss),
        });
    }
    if k < 2 {
        return Err(ModelError::Core(CoreError::TooFewClasses { min: 2, found: k }));
    }
    if labels.len() != train.len() {
        return Err(ModelError::LengthMismatch {
            predictions: train.len(),
            labels: labels.len(),
        });
    }
    for &y in labels {
        if y >= k {
            return Err(ModelError::Core(CoreError::LabelOutOfRange {
                label: y,
                classes: k,
            }));
        }
    }

    let n = train.len();
    let d = train.dim();
    let batches = n.div_ceil(cfg.batch_size);
    let total_steps = (cfg.epochs * batches) as u64;
    let schedule = LrSchedule::new(cfg.base_lr, total_steps, cfg.warmup_ratio, cfg.decay)?;
    let probe = LinearProbe::zeros(k, d);
    let mut w = probe.weights().clone();
    let mut b = probe.bias().to_vec();
    let mut adam_w = AdamState::new(k * d);
    let mut adam_b = AdamState::new(k);
    let mut rng = SubRng::new(cfg.seed, Stream::Batch, 0);
    let mut order: Vec<usize> = (0..n).collect();
    let params = LossParams::new(LossKind::Ce, cfg.tau);
    let mut step = 0u64;
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);

    for _ in 0..cfg.epochs {
        rng.shuffle(&mut order);
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let cur = LinearProbe::new(w.clone(), b.clone())?;
            let (loss, gw, gb) = crate::loss::linear_loss_grad(
                &cur,
                train.as_matrix(),
                chunk,
                BatchSupervision::Labels(labels),
                &params,
            )?;
            let lr = schedule.lr_at(step)?;
            adam_step(w.as_mut_slice(), gw.as_slice(), &mut adam_w, lr)?;
            adam_step(&mut b, &gb, &mut adam_b, lr)?;
            epoch_loss += loss * chunk.len() as f64;
            step += 1;
        }
        epoch_losses.push(epoch_loss / n as f64);
    }

    Ok(WeakOutcome {
        model: WeakModel {
            probe: LinearProbe::new(w, b)?,
            feature_view: "external".into(),
        },
        epoch_losses,
    })
}

/// Applies the weak model to embeddings, producing pre-softmax logits
/// (one row per sample) tagged as weak supervision.
pub fn weak_supervise(
    model: &WeakModel,
    embeddings: &EmbeddingMatrix,
) -> Result<LogitMatrix, ModelError> {
    let mut rows = Vec::with_capacity(embeddings.len());
    for i in 0..embeddings.len() {
        rows.push(model.probe.logits(embeddings.row(i))?);
    }
    Ok(LogitMatrix::new(
        Matrix::from_rows(&rows)?,
        LogitSource::Weak,
    )?)
}

/// Hard labels from a logit matrix by per-row argmax.
pub fn pseudo_labels(logits: &LogitMatrix) -> Vec<usize> {
    (0..logits.len()).map(|i| argmax(logits.row(i))).collect()
}

fn check_pairing(
    head: &StrongHead,
    supervision: &Supervision,
    cfg: &TrainConfig,
) -> Result<(), ModelError> {
    match (cfg.loss, supervision) {
        (LossKind::Ce, Supervision::Labels(_)) => {}
        (LossKind::Ce, s @ Supervision::WeakLogits(_)) => {
            return Err(ModelError::IncompatibleSupervision {
                loss: cfg.loss,
                supervision: s.kind_name(),
            });
        }
        (_, Supervision::WeakLogits(m)) => {
            if m.source() != LogitSource::Weak {
                return Err(ModelError::InvalidConfig {
                    reason: "supervision logits must be tagged as weak".into(),
                });
            }
        }
        (_, s @ Supervision::Labels(_)) => {
            return Err(ModelError::IncompatibleSupervision {
                loss: cfg.loss,
                supervision: s.kind_name(),
            });
        }
    }
    if cfg.loss == LossKind::Cpl {
        if let StrongHead::Linear(_) = head {
            return Err(ModelError::IncompatibleHead {
                loss: cfg.loss,
                required: "prototype",
            });
        }
    }
    Ok(())
}

/// Trains a strong head under the configured objective.
///
/// Validation accuracy (plain argmax, temperature-free) is measured on
/// `val` at every epoch end and the best snapshot is returned; ties keep
/// the earlier epoch. When `probe` is given, train/test accuracy curves
/// are recorded before training and at every epoch end.
pub fn train_strong(
    head: StrongHead,
    train: &EmbeddingMatrix,
    supervision: &Supervision,
    val: (&EmbeddingMatrix, &[usize]),
    cfg: &TrainConfig,
    probe: Option<&EvalProbe<'_>>,
) -> Result<TrainOutcome, ModelError> {
    cfg.validate()?;
    check_pairing(&head, supervision, cfg)?;
    let k = head.k();
    let d = head.dim();
    if train.dim() != d {
        return Err(ModelError::Core(CoreError::ShapeMismatch {
            expected: format!("training embeddings of dim {d}"),
            found: format!("dim {}", train.dim()),
        }));
    }
    if supervision.len() != train.len() {
        return Err(ModelError::LengthMismatch {
            predictions: train.len(),
            labels: supervision.len(),
        });
    }
    match supervision {
        Supervision::WeakLogits(m) if m.k() != k => {
            return Err(ModelError::Core(CoreError::ShapeMismatch {
                expected: format!("{k} supervision logits per sample"),
                found: format!("{}", m.k()),
            }));
        }
        Supervision::Labels(ls) => {
            for &y in ls {
                if y >= k {
                    return Err(ModelError::Core(CoreError::LabelOutOfRange {
                        label: y,
                        classes: k,
                    }));
                }
            }
        }
        _ => {}
    }
    let (val_emb, val_labels) = val;
    if val_emb.dim() != d {
        return Err(ModelError::Core(CoreError::ShapeMismatch {
            expected: format!("validation embeddings of dim {d}"),
            found: format!("dim {}", val_emb.dim()),
        }));
    }
    if val_labels.len() != val_emb.len() {
        return Err(ModelError::LengthMismatch {
            predictions: val_emb.len(),
            labels: val_labels.len(),
        });
    }

    let n = train.len();
    let batches = n.div_ceil(cfg.batch_size);
    let total_steps = (cfg.epochs * batches) as u64;
    let schedule = LrSchedule::new(cfg.base_lr, total_steps, cfg.warmup_ratio, cfg.decay)?;
    let mut params = HeadParams::from_head(head);
    let (mut adam_w, mut adam_b) = match &params {
        HeadParams::Prototype(_) => (AdamState::new(k * d), None),
        HeadParams::Linear { .. } => (AdamState::new(k * d), Some(AdamState::new(k))),
    };
    let mut rng = SubRng::new(cfg.seed, Stream::Batch, 0);
    let mut order: Vec<usize> = (0..n).collect();
    let mut tracker: BestModelTracker<HeadParams> = BestModelTracker::new();
    let mut val_history = Vec::with_capacity(cfg.epochs);
    let mut curves = Vec::new();
    if let Some(pr) = probe {
        curves.push(CurvePoint {
            step: 0,
            train_acc: accuracy_of(&params, pr.train.0.as_matrix(), pr.train.1)?,
            test_acc: accuracy_of(&params, pr.test.0.as_matrix(), pr.test.1)?,
        });
    }

    let mut step = 0u64;
    for epoch in 0..cfg.epochs {
        rng.shuffle(&mut order);
        for chunk in order.chunks(cfg.batch_size) {
            let loss_params = LossParams {
                kind: cfg.loss,
                tau: cfg.tau,
                aux_alpha: aux_alpha_at(step, total_steps),
                kl_direction: cfg.kl_direction,
            };
            let sup = match supervision {
                Supervision::WeakLogits(m) => BatchSupervision::Logits(m.as_matrix()),
                Supervision::Labels(ls) => BatchSupervision::Labels(ls),
            };
            let lr = schedule.lr_at(step)?;
            match &mut params {
                HeadParams::Prototype(c) => {
                    let (_, grad) = crate::loss::prototype_loss_grad(
                        c,
                        train.as_matrix(),
                        chunk,
                        sup,
                        &loss_params,
                    )?;
                    adam_step(c.as_mut_slice(), grad.as_slice(), &mut adam_w, lr)?;
                    // Degenerate rows are an error, never silently fixed.
                    check_positive_row_norms(c)?;
                }
                HeadParams::Linear { w, b } => {
                    let cur = LinearProbe::new(w.clone(), b.clone())?;
                    let (_, gw, gb) = crate::loss::linear_loss_grad(
                        &cur,
                        train.as_matrix(),
                        chunk,
                        sup,
                        &loss_params,
                    )?;
                    adam_step(w.as_mut_slice(), gw.as_slice(), &mut adam_w, lr)?;
                    adam_step(b, &gb, adam_b.as_mut().expect("linear head"), lr)?;
                }
            }
            step += 1;
        }
        let val_acc = accuracy_of(&params, val_emb.as_matrix(), val_labels)?;
        tracker.observe(val_acc, &params);
        val_history.push(EpochVal {
            epoch,
            step,
            val_acc,
        });
        if let Some(pr) = probe {
            curves.push(CurvePoint {
                step,
                train_acc: accuracy_of(&params, pr.train.0.as_matrix(), pr.train.1)?,
                test_acc: accuracy_of(&params, pr.test.0.as_matrix(), pr.test.1)?,
            });
        }
    }

    let chosen = tracker.into_best().unwrap_or(params);
    Ok(TrainOutcome {
        head: chosen.into_head()?,
        val_history,
        curves,
    })
}

/// Class predictions: argmax over the head's scores, ties to the lowest
/// index. Prototype heads score by cosine similarity, linear heads by
/// the affine map; temperature never enters.
pub fn predict(head: &StrongHead, embeddings: &EmbeddingMatrix) -> Result<Vec<usize>, ModelError> {
    let params = HeadParams::from_head(head.clone());
    Ok(params.predict(embeddings.as_matrix())?)
}

/// Fraction of exact matches.
pub fn evaluate_accuracy(predictions: &[usize], labels: &[usize]) -> Result<f64, ModelError> {
    if predictions.len() != labels.len() {
        return Err(ModelError::LengthMismatch {
            predictions: predictions.len(),
            labels: labels.len(),
        });
    }
    let correct = predictions
        .iter()
        .zip(labels)
        .filter(|(p, l)| p == l)
        .count();
    Ok(correct as f64 / predictions.len() as f64)
}

#[derive(Debug, Serialize, Deserialize)]
struct CheckpointSidecar {
    variant: String,
    k: usize,
    d: usize,
    bias: Option<Vec<f64>>,
}

/// `base` -> (`base.w2sm`, `base.json`).
pub fn checkpoint_paths(base: &Path) -> (PathBuf, PathBuf) {
    let mut matrix = base.as_os_str().to_owned();
    matrix.push(".w2sm");
    let mut sidecar = base.as_os_str().to_owned();
    sidecar.push(".json");
    (PathBuf::from(matrix), PathBuf::from(sidecar))
}

/// Saves a head as a matrix file plus a JSON sidecar describing the
/// variant, shape, and bias.
pub fn save_checkpoint(base: &Path, head: &StrongHead) -> Result<(), ModelError> {
    let (matrix_path, sidecar_path) = checkpoint_paths(base);
    let (m, sidecar) = match head {
        StrongHead::Prototype(c) => (
            c.as_matrix().clone(),
            CheckpointSidecar {
                variant: "prototype".into(),
                k: c.k(),
                d: c.dim(),
                bias: None,
            },
        ),
        StrongHead::Linear(p) => (
            p.weights().clone(),
            CheckpointSidecar {
                variant: "linear".into(),
                k: p.k(),
                d: p.dim(),
                bias: Some(p.bias().to_vec()),
            },
        ),
    };
    io::write_matrix(&matrix_path, &m)?;
    let json = serde_json::to_string_pretty(&sidecar).expect("sidecar serializes");
    std::fs::write(&sidecar_path, json).map_err(|e| ModelError::BadCheckpoint {
        path: sidecar_path.display().to_string(),
        reason: e.to_string(),
    })?;
    Ok(())
}

/// Loads a head saved by `save_checkpoint`.
pub fn load_checkpoint(base: &Path) -> Result<StrongHead, ModelError> {
    let (matrix_path, sidecar_path) = checkpoint_paths(base);
    let text = std::fs::read_to_string(&sidecar_path).map_err(|e| ModelError::BadCheckpoint {
        path: sidecar_path.display().to_string(),
        reason: e.to_string(),
    })?;
    let sidecar: CheckpointSidecar =
        serde_json::from_str(&text).map_err(|e| ModelError::BadCheckpoint {
            path: sidecar_path.display().to_string(),
            reason: e.to_string(),
        })?;
    let m = io::read_matrix(&matrix_path)?;
    if m.shape() != (sidecar.k, sidecar.d) {
        return Err(ModelError::BadCheckpoint {
            path: matrix_path.display().to_string(),
            reason: format!(
                "matrix is {}x{}, sidecar says {}x{}",
                m.rows(),
                m.cols(),
                sidecar.k,
                sidecar.d
            ),
        });
    }
    match sidecar.variant.as_str() {
        "prototype" => Ok(StrongHead::Prototype(PrototypeMatrix::new(m)?)),
        "linear" => {
            let bias = sidecar.bias.ok_or_else(|| ModelError::BadCheckpoint {
                path: sidecar_path.display().to_string(),
                reason: "linear checkpoint missing bias".into(),
            })?;
            Ok(StrongHead::Linear(LinearProbe::new(m, bias)?))
        }
        other => Err(ModelError::BadCheckpoint {
            path: sidecar_path.display().to_string(),
            reason: format!("unknown variant '{other}'"),
        }),
    }
}

/// Loads a weak model (a linear checkpoint) saved with `save_checkpoint`.
pub fn load_weak(base: &Path) -> Result<WeakModel, ModelError> {
    match load_checkpoint(base)? {
        StrongHead::Linear(probe) => Ok(WeakModel {
            probe,
            feature_view: "external".into(),
        }),
        StrongHead::Prototype(_) => {
            let (_, sidecar_path) = checkpoint_paths(base);
            Err(ModelError::BadCheckpoint {
                path: sidecar_path.display().to_string(),
                reason: "weak model checkpoint must be a linear variant".into(),
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn emb(rows: &[Vec<f64>]) -> EmbeddingMatrix {
        EmbeddingMatrix::new(Matrix::from_rows(rows).unwrap()).unwrap()
    }

    #[test]
    fn anchors_singleton_copies_embeddings() {
        let e = emb(&[vec![0.1, 0.9], vec![0.8, -0.2]]);
        let c = init_prototypes(
            PrototypeSource::Anchors {
                embeddings: &e,
                labels: &[0, 1],
                per_class: 1,
            },
            2,
            2,
        )
        .unwrap();
        assert_eq!(c.row(0), &[0.1, 0.9]);
        assert_eq!(c.row(1), &[0.8, -0.2]);
    }

    #[test]
    fn anchors_average_known_vectors() {
        let e = emb(&[vec![1.0, 0.0], vec![0.0, 1.0], vec![0.5, -0.5]]);
        let c = init_prototypes(
            PrototypeSource::Anchors {
                embeddings: &e,
                labels: &[0, 0, 1],
                per_class: 2,
            },
            2,
            2,
        )
        .unwrap();
        assert_eq!(c.row(0), &[0.5, 0.5]);
        assert_eq!(c.row(1), &[0.5, -0.5]);
    }

    #[test]
    fn anchors_list_missing_classes() {
        let e = emb(&[vec![1.0, 0.0], vec![0.0, 1.0]]);
        let err = init_prototypes(
            PrototypeSource::Anchors {
                embeddings: &e,
                labels: &[0, 0],
                per_class: 5,
            },
            4,
            2,
        )
        .unwrap_err();
        match err {
            ModelError::MissingClasses { missing } => assert_eq!(missing, vec![1, 2, 3]),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn prototype_file_round_trip_is_bit_identical() {
        // Values must be f32-representable for a bitwise round trip.
        let dir = tempfile::tempdir().unwrap();
        let base = dir.path().join("protos.w2sm");
        let c = PrototypeMatrix::new(
            Matrix::from_rows(&[vec![0.5, -0.25], vec![1.5, 2.0]]).unwrap(),
        )
        .unwrap();
        crate::io::write_matrix(&base, c.as_matrix()).unwrap();
        let c2 = init_prototypes(PrototypeSource::File(&base), 2, 2).unwrap();
        assert_eq!(c, c2);
    }

    #[test]
    fn weak_supervise_affine_rows() {
        let model = WeakModel {
            probe: LinearProbe::new(Matrix::zeros(2, 3), vec![1.0, 2.0]).unwrap(),
            feature_view: "external".into(),
        };
        let e = emb(&[vec![0.4, 0.5, 0.6], vec![-1.0, 0.0, 1.0]]);
        let z = weak_supervise(&model, &e).unwrap();
        assert_eq!(z.source(), LogitSource::Weak);
        assert_eq!(z.row(0), &[1.0, 2.0]);
        assert_eq!(z.row(1), &[1.0, 2.0]);
    }

    #[test]
    fn train_weak_requires_ce() {
        let e = emb(&[vec![1.0, 0.0], vec![0.0, 1.0]]);
        let mut cfg = TrainConfig::weak_default(0);
        cfg.loss = LossKind::Kd;
        assert!(matches!(
            train_weak(&e, &[0, 1], 2, &cfg),
            Err(ModelError::InvalidConfig { .. })
        ));
    }

    #[test]
    fn config_rejects_zero_epochs_and_batches() {
        let e = emb(&[vec![1.0, 0.0], vec![0.0, 1.0]]);
        let mut cfg = TrainConfig::weak_default(0);
        cfg.epochs = 0;
        assert!(matches!(
            train_weak(&e, &[0, 1], 2, &cfg),
            Err(ModelError::InvalidConfig { .. })
        ));
        let mut cfg = TrainConfig::weak_default(0);
        cfg.batch_size = 0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn train_weak_is_bitwise_deterministic() {
        let mut rng = SubRng::new(42, Stream::DataGen, 7);
        let rows: Vec<Vec<f64>> = (0..40)
            .map(|i| {
                let base = if i % 2 == 0 { 1.0 } else { -1.0 };
                vec![base + 0.1 * rng.next_gaussian(), 0.1 * rng.next_gaussian()]
            })
            .collect();
        let labels: Vec<usize> = (0..40).map(|i| i % 2).collect();
        let e = emb(&rows);
        let mut cfg = TrainConfig::weak_default(3);
        cfg.batch_size = 8;
        let a = train_weak(&e, &labels, 2, &cfg).unwrap();
        let b = train_weak(&e, &labels, 2, &cfg).unwrap();
        assert_eq!(a.model, b.model);
        let bits = |p: &LinearProbe| {
            p.weights()
                .as_slice()
                .iter()
                .map(|v| v.to_bits())
                .collect::<Vec<_>>()
        };
        assert_eq!(bits(&a.model.probe), bits(&b.model.probe));
    }

    #[test]
    fn pairing_rules_are_enforced_before_compute() {
        let c = PrototypeMatrix::new(
            Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap(),
        )
        .unwrap();
        let e = emb(&[vec![0.5, 0.5]]);
        let val = emb(&[vec![0.5, 0.5]]);
        let labels = Supervision::Labels(vec![0]);
        let mut cfg = TrainConfig::strong_default(0, LossKind::Cpl);
        cfg.epochs = 1;

        // CPL with hard labels is rejected.
        let err = train_strong(
            StrongHead::Prototype(c.clone()),
            &e,
            &labels,
            (&val, &[0]),
            &cfg,
            None,
        )
        .unwrap_err();
        assert!(matches!(err, ModelError::IncompatibleSupervision { .. }));

        // CPL with a linear head is rejected.
        let zw = LogitMatrix::new(
            Matrix::from_rows(&[vec![0.1, 0.2]]).unwrap(),
            LogitSource::Weak,
        )
        .unwrap();
        let err = train_strong(
            StrongHead::Linear(LinearProbe::zeros(2, 2)),
            &e,
            &Supervision::WeakLogits(zw.clone()),
            (&val, &[0]),
            &cfg,
            None,
        )
        .unwrap_err();
        assert!(matches!(err, ModelError::IncompatibleHead { .. }));

        // CE with weak logits is rejected.
        cfg.loss = LossKind::Ce;
        let err = train_strong(
            StrongHead::Prototype(c),
            &e,
            &Supervision::WeakLogits(zw),
            (&val, &[0]),
            &cfg,
            None,
        )
        .unwrap_err();
        assert!(matches!(err, ModelError::IncompatibleSupervision { .. }));
    }

    #[test]
    fn cpl_stationary_start_keeps_parameters() {
        // Supervision equal to the head's own cosine logits: the loss is
        // zero and no parameter moves over a whole epoch.
        let c = PrototypeMatrix::new(
            Matrix::from_rows(&[vec![1.0, 0.2, 0.0], vec![0.0, 1.0, -0.5]]).unwrap(),
        )
        .unwrap();
        let e = emb(&[
            vec![0.5, 0.5, 0.1],
            vec![-0.2, 0.7, 0.3],
            vec![0.9, -0.1, 0.2],
        ]);
        let rows: Vec<Vec<f64>> = (0..e.len())
            .map(|i| crate::loss::cosine_logits(&c, e.row(i)).unwrap())
            .collect();
        let zw = LogitMatrix::new(Matrix::from_rows(&rows).unwrap(), LogitSource::Weak).unwrap();
        let mut cfg = TrainConfig::strong_default(0, LossKind::Cpl);
        cfg.epochs = 1;
        cfg.batch_size = 2;
        let before = c.as_matrix().clone();
        let out = train_strong(
            StrongHead::Prototype(c),
            &e,
            &Supervision::WeakLogits(zw),
            (&e, &[0, 1, 0]),
            &cfg,
            None,
        )
        .unwrap();
        let after = match out.head {
            StrongHead::Prototype(c) => c.into_matrix(),
            _ => unreachable!(),
        };
        let drift: f64 = before
            .as_slice()
            .iter()
            .zip(after.as_slice())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        assert!(drift <= 1e-6, "drift {drift}");
    }

    #[test]
    fn training_does_not_mutate_inputs() {
        let c = PrototypeMatrix::new(
            Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap(),
        )
        .unwrap();
        let e = emb(&[vec![0.9, 0.1], vec![0.2, 0.8], vec![0.7, 0.3]]);
        let zw = LogitMatrix::new(
            Matrix::from_rows(&[vec![2.0, -1.0], vec![-0.5, 1.5], vec![1.0, 0.0]]).unwrap(),
            LogitSource::Weak,
        )
        .unwrap();
        let e_bits: Vec<u64> = e.as_matrix().as_slice().iter().map(|v| v.to_bits()).collect();
        let z_bits: Vec<u64> = zw.as_matrix().as_slice().iter().map(|v| v.to_bits()).collect();
        let mut cfg = TrainConfig::strong_default(1, LossKind::Cpl);
        cfg.epochs = 3;
        cfg.batch_size = 2;
        train_strong(
            StrongHead::Prototype(c),
            &e,
            &Supervision::WeakLogits(zw.clone()),
            (&e, &[0, 1, 0]),
            &cfg,
            None,
        )
        .unwrap();
        let e_after: Vec<u64> = e.as_matrix().as_slice().iter().map(|v| v.to_bits()).collect();
        let z_after: Vec<u64> = zw.as_matrix().as_slice().iter().map(|v| v.to_bits()).collect();
        assert_eq!(e_bits, e_after);
        assert_eq!(z_bits, z_after);
    }

    #[test]
    fn predict_matches_prototype_rows_and_breaks_ties_low() {
        let c = PrototypeMatrix::new(
            Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap(),
        )
        .unwrap();
        let head = StrongHead::Prototype(c);
        let e = emb(&[vec![2.0, 0.0], vec![0.0, 0.3], vec![0.5, 0.5]]);
        let preds = predict(&head, &e).unwrap();
        assert_eq!(preds, vec![0, 1, 0]); // last is an exact tie -> lowest index
    }

    #[test]
    fn accuracy_arithmetic_and_length_check() {
        assert_abs_diff_eq!(
            evaluate_accuracy(&[1, 2, 3], &[1, 2, 3]).unwrap(),
            1.0,
            epsilon = 0.0
        );
        assert_abs_diff_eq!(
            evaluate_accuracy(&[0, 0], &[1, 1]).unwrap(),
            0.0,
            epsilon = 0.0
        );
        assert_abs_diff_eq!(
            evaluate_accuracy(&[1, 2, 3, 4], &[1, 2, 3, 0]).unwrap(),
            0.75,
            epsilon = 0.0
        );
        assert!(evaluate_accuracy(&[1], &[1, 2]).is_err());
    }

    #[test]
    fn checkpoints_round_trip_both_variants() {
        let dir = tempfile::tempdir().unwrap();
        let c = PrototypeMatrix::new(
            Matrix::from_rows(&[vec![0.5, -0.25], vec![1.0, 2.0]]).unwrap(),
        )
        .unwrap();
        let base = dir.path().join("proto");
        save_checkpoint(&base, &StrongHead::Prototype(c.clone())).unwrap();
        assert_eq!(load_checkpoint(&base).unwrap(), StrongHead::Prototype(c));

        let p = LinearProbe::new(
            Matrix::from_rows(&[vec![0.5, 1.5], vec![-0.5, 0.25]]).unwrap(),
            vec![0.125, -2.0],
        )
        .unwrap();
        let base = dir.path().join("lin");
        save_checkpoint(&base, &StrongHead::Linear(p.clone())).unwrap();
        assert_eq!(load_checkpoint(&base).unwrap(), StrongHead::Linear(p));
        assert!(load_weak(&base).is_ok());
        assert!(load_weak(&dir.path().join("proto")).is_err());
    }
}
