//! Loss functions and their analytic gradients.
//!
//! The prototype head scores a sample by cosine similarity against each
//! class prototype; alignment to a weak teacher minimizes the KL
//! divergence between tempered softmax vectors of weak and strong
//! logits. The remaining losses are the comparison baselines: plain
//! cross-entropy on hard labels, logit distillation, and two
//! confidence-mixing variants.
//!
//! Numerical conventions: softmax goes through max-subtraction, KL terms
//! are computed as log-sum-exp differences (never by dividing
//! probabilities), and all batch reductions accumulate left to right so
//! results are bit-reproducible.

use serde::{Deserialize, Serialize};

use crate::error::CoreError;
use crate::matrix::{argmax, dot, norm, Matrix};
use crate::types::{EmbeddingMatrix, LinearProbe, LogitMatrix, PrototypeMatrix, Temperature};

/// Training objective selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    /// Prototype alignment via tempered KL against weak logits.
    Cpl,
    /// Cross-entropy on hard labels (ground truth or pseudo-labels).
    Ce,
    /// Tempered KL distillation on any head's logits.
    Kd,
    /// Convex mix of weak-label CE and self-training CE with a ramped weight.
    AuxConf,
    /// Confidence-gated mix of self-training CE and distillation.
    AdaptConf,
}

impl LossKind {
    pub const ALL: [LossKind; 5] = [
        LossKind::Cpl,
        LossKind::Ce,
        LossKind::Kd,
        LossKind::AuxConf,
        LossKind::AdaptConf,
    ];

    pub fn name(self) -> &'static str {
        match self {
            LossKind::Cpl => "cpl",
            LossKind::Ce => "ce",
            LossKind::Kd => "kd",
            LossKind::AuxConf => "auxconf",
            LossKind::AdaptConf => "adaptconf",
        }
    }
}

impl std::fmt::Display for LossKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for LossKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "cpl" => Ok(LossKind::Cpl),
            "ce" => Ok(LossKind::Ce),
            "kd" => Ok(LossKind::Kd),
            "auxconf" => Ok(LossKind::AuxConf),
            "adaptconf" => Ok(LossKind::AdaptConf),
            other => Err(format!(
                "unknown loss '{other}' (expected cpl, ce, kd, auxconf, adaptconf)"
            )),
        }
    }
}

/// Direction of the prototype-alignment KL term. The default treats the
/// weak model's tempered probabilities as soft targets; the reverse
/// direction is exposed for study only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KlDirection {
    #[default]
    WeakToStrong,
    StrongToWeak,
}

/// Cosine similarity between an embedding and every class prototype.
///
/// `out[i] = (C_i . r) / (|C_i| |r|)`; every output lies in `[-1, 1]`.
pub fn cosine_logits(protos: &PrototypeMatrix, r: &[f64]) -> Result<Vec<f64>, CoreError> {
    cosine_logits_raw(protos.as_matrix(), r)
}

/// `cosine_logits` over a raw matrix; used by the training loop, which
/// mutates prototypes in place between validity checks.
pub fn cosine_logits_raw(c: &Matrix, r: &[f64]) -> Result<Vec<f64>, CoreError> {
    if r.len() != c.cols() {
        return Err(CoreError::ShapeMismatch {
            expected: format!("embedding of dim {}", c.cols()),
            found: format!("dim {}", r.len()),
        });
    }
    let rn = norm(r);
    if rn <= 0.0 {
        return Err(CoreError::ZeroNormEmbedding);
    }
    let mut out = Vec::with_capacity(c.rows());
    for j in 0..c.rows() {
        let cn = c.row_norm(j);
        if cn <= 0.0 {
            return Err(CoreError::ZeroNormPrototype { row: j });
        }
        out.push(dot(c.row(j), r) / (cn * rn));
    }
    Ok(out)
}

/// Tempered softmax, stabilized by max-subtraction. Rows sum to 1
/// within 1e-9.
pub fn soften(z: &[f64], tau: Temperature) -> Vec<f64> {
    log_soften(z, tau).iter().map(|l| l.exp()).collect()
}

/// Log of the tempered softmax; finite for any finite logits.
pub fn log_soften(z: &[f64], tau: Temperature) -> Vec<f64> {
    let t = tau.value();
    let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for &v in z {
        sum += ((v - m) / t).exp();
    }
    let log_sum = sum.ln();
    z.iter().map(|&v| (v - m) / t - log_sum).collect()
}

/// KL divergence between tempered softmax vectors of two logit vectors,
/// `KL(soften(z_target) || soften(z_model))`, computed in log space.
fn kl_from_logits(z_target: &[f64], z_model: &[f64], tau: Temperature) -> f64 {
    let lt = log_soften(z_target, tau);
    let lm = log_soften(z_model, tau);
    let mut kl = 0.0;
    for i in 0..lt.len() {
        // exp(lt) can underflow to 0; 0 * finite = 0 keeps the term sound.
        kl += lt[i].exp() * (lt[i] - lm[i]);
    }
    // Guard against -1e-17-style rounding; KL is nonnegative.
    kl.max(0.0)
}

/// Prototype-alignment loss for one sample: KL between the weak model's
/// tempered probabilities and the tempered probabilities of the cosine
/// logits of `protos` against `r`. Zero iff the two distributions match.
pub fn cpl_loss(
    protos: &PrototypeMatrix,
    r: &[f64],
    z_w: &[f64],
    tau: Temperature,
) -> Result<f64, CoreError> {
    cpl_loss_directed(protos, r, z_w, tau, KlDirection::WeakToStrong)
}

/// `cpl_loss` with an explicit KL direction (study switch).
pub fn cpl_loss_directed(
    protos: &PrototypeMatrix,
    r: &[f64],
    z_w: &[f64],
    tau: Temperature,
    direction: KlDirection,
) -> Result<f64, CoreError> {
    if z_w.len() != protos.k() {
        return Err(CoreError::ShapeMismatch {
            expected: format!("{} weak logits", protos.k()),
            found: format!("{}", z_w.len()),
        });
    }
    let z_s = cosine_logits(protos, r)?;
    Ok(match direction {
        KlDirection::WeakToStrong => kl_from_logits(z_w, &z_s, tau),
        KlDirection::StrongToWeak => kl_from_logits(&z_s, z_w, tau),
    })
}

/// Affine head forward pass: `softmax(W r + b)` at temperature 1.
pub fn lp_forward(probe: &LinearProbe, r: &[f64]) -> Result<Vec<f64>, CoreError> {
    let z = probe.logits(r)?;
    Ok(soften(&z, Temperature::new(1.0).expect("1 is positive")))
}

/// Cross-entropy against a hard label: `-log p[label]`.
pub fn ce_loss(p: &[f64], label: usize) -> Result<f64, CoreError> {
    if label >= p.len() {
        return Err(CoreError::LabelOutOfRange {
            label,
            classes: p.len(),
        });
    }
    Ok(-p[label].ln())
}

/// Logit distillation: `KL(soften(z_w) || soften(z_s))` at the given
/// temperature. No extra tau^2 rescaling is applied, so this value is
/// directly comparable with `cpl_loss`.
pub fn kd_loss(z_s: &[f64], z_w: &[f64], tau: Temperature) -> Result<f64, CoreError> {
    if z_s.len() != z_w.len() {
        return Err(CoreError::ShapeMismatch {
            expected: format!("{} logits", z_w.len()),
            found: format!("{}", z_s.len()),
        });
    }
    Ok(kl_from_logits(z_w, z_s, tau))
}

/// Confidence-bootstrapped cross-entropy:
/// `(1 - alpha) * ce(p, weak_label) + alpha * ce(p, argmax p)`.
///
/// This is a reconstruction of the commonly used auxiliary-confidence
/// objective (a weak-label CE mixed with a self-training CE under a
/// ramped weight); published variants differ in schedule details. The
/// self-training target `argmax p` is treated as a constant.
pub fn aux_conf_loss(p: &[f64], weak_label: usize, alpha: f64) -> Result<f64, CoreError> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(CoreError::InvalidAlpha { value: alpha });
    }
    let self_label = argmax(p);
    Ok((1.0 - alpha) * ce_loss(p, weak_label)? + alpha * ce_loss(p, self_label)?)
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Confidence-gated adaptive objective:
/// `beta * ce(p1_s, argmax z_s) + (1 - beta) * kd(z_s, z_w, tau)` with
/// `beta = sigmoid(max p1_s - max p1_w)` where `p1` are temperature-1
/// probabilities.
///
/// Like `aux_conf_loss` this is a reconstruction; the gate `beta` and
/// the self-training target are treated as constants when
/// differentiating.
pub fn adapt_conf_loss(z_s: &[f64], z_w: &[f64], tau: Temperature) -> Result<f64, CoreError> {
    if z_s.len() != z_w.len() {
        return Err(CoreError::ShapeMismatch {
            expected: format!("{} logits", z_w.len()),
            found: format!("{}", z_s.len()),
        });
    }
    let one = Temperature::new(1.0).expect("1 is positive");
    let p1_s = soften(z_s, one);
    let p1_w = soften(z_w, one);
    let beta = sigmoid(max_entry(&p1_s) - max_entry(&p1_w));
    let self_label = argmax(z_s);
    Ok(beta * ce_loss(&p1_s, self_label)? + (1.0 - beta) * kd_loss(z_s, z_w, tau)?)
}

fn max_entry(v: &[f64]) -> f64 {
    v.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
}

/// Per-sample supervision consumed by the batch loss/gradient kernels.
#[derive(Debug, Clone, Copy)]
pub enum BatchSupervision<'a> {
    /// Weak logits, one row per sample of the embedding matrix.
    Logits(&'a Matrix),
    /// Hard labels, one per sample of the embedding matrix.
    Labels(&'a [usize]),
}

/// Scalar knobs shared by the batch kernels.
#[derive(Debug, Clone, Copy)]
pub struct LossParams {
    pub kind: LossKind,
    pub tau: Temperature,
    /// Self-training mixing weight for `AuxConf`; ignored elsewhere.
    pub aux_alpha: f64,
    /// KL direction for `Cpl`; ignored elsewhere.
    pub kl_direction: KlDirection,
}

impl LossParams {
    pub fn new(kind: LossKind, tau: Temperature) -> Self {
        Self {
            kind,
            tau,
            aux_alpha: 0.0,
            kl_direction: KlDirection::WeakToStrong,
        }
    }
}

/// Loss value and d(loss)/d(logits) for one sample.
fn loss_and_dz(
    z_s: &[f64],
    sup: SampleSupervision<'_>,
    params: &LossParams,
) -> Result<(f64, Vec<f64>), CoreError> {
    let k = z_s.len();
    let t = params.tau.value();
    let one = Temperature::new(1.0).expect("1 is positive");
    match (params.kind, sup) {
        (LossKind::Cpl, SampleSupervision::Logits(z_w))
        | (LossKind::Kd, SampleSupervision::Logits(z_w)) => {
            check_len(z_w.len(), k)?;
            let p_s = soften(z_s, params.tau);
            let p_w = soften(z_w, params.tau);
            let forward = params.kind == LossKind::Kd
                || params.kl_direction == KlDirection::WeakToStrong;
            if forward {
                let loss = kl_from_logits(z_w, z_s, params.tau);
                let dz = (0..k).map(|i| (p_s[i] - p_w[i]) / t).collect();
                Ok((loss, dz))
            } else {
                let ls = log_soften(z_s, params.tau);
                let lw = log_soften(z_w, params.tau);
                let loss = kl_from_logits(z_s, z_w, params.tau);
                let dz = (0..k)
                    .map(|i| p_s[i] * (ls[i] - lw[i] - loss) / t)
                    .collect();
                Ok((loss, dz))
            }
        }
        (LossKind::Ce, SampleSupervision::Label(y)) => {
            if y >= k {
                return Err(CoreError::LabelOutOfRange { label: y, classes: k });
            }
            let ls = log_soften(z_s, one);
            let loss = -ls[y];
            let mut dz: Vec<f64> = ls.iter().map(|l| l.exp()).collect();
            dz[y] -= 1.0;
            Ok((loss, dz))
        }
        (LossKind::AuxConf, SampleSupervision::Logits(z_w)) => {
            check_len(z_w.len(), k)?;
            let alpha = params.aux_alpha;
            if !(0.0..=1.0).contains(&alpha) {
                return Err(CoreError::InvalidAlpha { value: alpha });
            }
            let y_w = argmax(z_w);
            let ls = log_soften(z_s, one);
            let self_label = argmax(&ls);
            let loss = -(1.0 - alpha) * ls[y_w] - alpha * ls[self_label];
            let mut dz: Vec<f64> = ls.iter().map(|l| l.exp()).collect();
            dz[y_w] -= 1.0 - alpha;
            dz[self_label] -= alpha;
            Ok((loss, dz))
        }
        (LossKind::AdaptConf, SampleSupervision::Logits(z_w)) => {
            check_len(z_w.len(), k)?;
            let ls1 = log_soften(z_s, one);
            let p1_s: Vec<f64> = ls1.iter().map(|l| l.exp()).collect();
            let p1_w = soften(z_w, one);
            let beta = sigmoid(max_entry(&p1_s) - max_entry(&p1_w));
            let self_label = argmax(z_s);
            let kd = kl_from_logits(z_w, z_s, params.tau);
            let loss = -beta * ls1[self_label] + (1.0 - beta) * kd;
            let p_ts = soften(z_s, params.tau);
            let p_tw = soften(z_w, params.tau);
            let dz = (0..k)
                .map(|i| {
                    let self_term = p1_s[i] - if i == self_label { 1.0 } else { 0.0 };
                    beta * self_term + (1.0 - beta) * (p_ts[i] - p_tw[i]) / t
                })
                .collect();
            Ok((loss, dz))
        }
        (kind, SampleSupervision::Logits(_)) => Err(CoreError::ShapeMismatch {
            expected: format!("hard labels for loss '{kind}'"),
            found: "weak logits".into(),
        }),
        (kind, SampleSupervision::Label(_)) => Err(CoreError::ShapeMismatch {
            expected: format!("weak logits for loss '{kind}'"),
            found: "hard labels".into(),
        }),
    }
}

#[derive(Debug, Clone, Copy)]
enum SampleSupervision<'a> {
    Logits(&'a [f64]),
    Label(usize),
}

impl<'a> BatchSupervision<'a> {
    fn sample(&self, i: usize) -> SampleSupervision<'a> {
        match self {
            BatchSupervision::Logits(m) => SampleSupervision::Logits(m.row(i)),
            BatchSupervision::Labels(ls) => SampleSupervision::Label(ls[i]),
        }
    }
}

fn check_len(found: usize, expected: usize) -> Result<(), CoreError> {
    if found != expected {
        return Err(CoreError::ShapeMismatch {
            expected: format!("{expected} logits"),
            found: format!("{found}"),
        });
    }
    Ok(())
}

/// Mean loss and its gradient with respect to the prototype matrix over
/// the batch rows `rows` of `embeddings`.
///
/// The gradient chains d(loss)/d(logits) through the cosine head:
/// `dz_j/dC_j = r / (|C_j| |r|) - z_j C_j / |C_j|^2`, which keeps every
/// gradient row orthogonal to its prototype row.
pub fn prototype_loss_grad(
    c: &Matrix,
    embeddings: &Matrix,
    rows: &[usize],
    sup: BatchSupervision<'_>,
    params: &LossParams,
) -> Result<(f64, Matrix), CoreError> {
    if rows.is_empty() {
        return Err(CoreError::EmptyBatch);
    }
    if embeddings.cols() != c.cols() {
        return Err(CoreError::ShapeMismatch {
            expected: format!("embeddings of dim {}", c.cols()),
            found: format!("dim {}", embeddings.cols()),
        });
    }
    let k = c.rows();
    let d = c.cols();
    let mut c_norms = Vec::with_capacity(k);
    for j in 0..k {
        let n = c.row_norm(j);
        if n <= 0.0 {
            return Err(CoreError::ZeroNormPrototype { row: j });
        }
        c_norms.push(n);
    }
    let scale = 1.0 / rows.len() as f64;
    let mut loss = 0.0;
    let mut grad = Matrix::zeros(k, d);
    for &i in rows {
        if i >= embeddings.rows() {
            return Err(CoreError::IndexOutOfRange {
                index: i,
                len: embeddings.rows(),
            });
        }
        let r = embeddings.row(i);
        let rn = norm(r);
        if rn <= 0.0 {
            return Err(CoreError::ZeroNormEmbedding);
        }
        let z: Vec<f64> = (0..k)
            .map(|j| dot(c.row(j), r) / (c_norms[j] * rn))
            .collect();
        let (l, dz) = loss_and_dz(&z, sup.sample(i), params)?;
        loss += l;
        for j in 0..k {
            let coef = scale * dz[j];
            if coef == 0.0 {
                continue;
            }
            let inv = 1.0 / (c_norms[j] * rn);
            let proj = z[j] / (c_norms[j] * c_norms[j]);
            let c_row = c.row(j);
            let g_row = grad.row_mut(j);
            for t in 0..d {
                g_row[t] += coef * (r[t] * inv - c_row[t] * proj);
            }
        }
    }
    Ok((loss * scale, grad))
}

/// Mean loss and its gradients with respect to the affine head `(W, b)`
/// over the batch rows `rows` of `embeddings`.
pub fn linear_loss_grad(
    probe: &LinearProbe,
    embeddings: &Matrix,
    rows: &[usize],
    sup: BatchSupervision<'_>,
    params: &LossParams,
) -> Result<(f64, Matrix, Vec<f64>), CoreError> {
    if rows.is_empty() {
        return Err(CoreError::EmptyBatch);
    }
    let k = probe.k();
    let d = probe.dim();
    if embeddings.cols() != d {
        return Err(CoreError::ShapeMismatch {
            expected: format!("embeddings of dim {d}"),
            found: format!("dim {}", embeddings.cols()),
        });
    }
    let scale = 1.0 / rows.len() as f64;
    let mut loss = 0.0;
    let mut grad_w = Matrix::zeros(k, d);
    let mut grad_b = vec![0.0; k];
    for &i in rows {
        if i >= embeddings.rows() {
            return Err(CoreError::IndexOutOfRange {
                index: i,
                len: embeddings.rows(),
            });
        }
        let r = embeddings.row(i);
        let z = probe.logits(r)?;
        let (l, dz) = loss_and_dz(&z, sup.sample(i), params)?;
        loss += l;
        for j in 0..k {
            let coef = scale * dz[j];
            if coef == 0.0 {
                continue;
            }
            grad_b[j] += coef;
            let g_row = grad_w.row_mut(j);
            for t in 0..d {
                g_row[t] += coef * r[t];
            }
        }
    }
    Ok((loss * scale, grad_w, grad_b))
}

/// Gradient of the mean prototype-alignment loss over a batch:
/// `d/dC (1/|B|) sum_x cpl_loss(C, x)`.
pub fn cpl_grad(
    protos: &PrototypeMatrix,
    batch: &EmbeddingMatrix,
    z_w: &LogitMatrix,
    tau: Temperature,
) -> Result<Matrix, CoreError> {
    if z_w.len() != batch.len() {
        return Err(CoreError::ShapeMismatch {
            expected: format!("{} logit rows", batch.len()),
            found: format!("{}", z_w.len()),
        });
    }
    let rows: Vec<usize> = (0..batch.len()).collect();
    let params = LossParams::new(LossKind::Cpl, tau);
    let (_, grad) = prototype_loss_grad(
        protos.as_matrix(),
        batch.as_matrix(),
        &rows,
        BatchSupervision::Logits(z_w.as_matrix()),
        &params,
    )?;
    Ok(grad)
}
