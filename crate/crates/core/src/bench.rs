//! Synthetic multi-domain benchmark and the end-to-end pipeline.
//!
//! Each domain is a Gaussian-mixture classification task on the unit
//! sphere: class means drawn uniformly on the sphere, strong features
//! are noisy normalized samples around the means, and weak features are
//! a random lower-dimensional projection of the strong features with
//! extra noise. Lower dimension plus extra noise is what makes the weak
//! model weak; no encoder is involved anywhere.
//!
//! The pipeline per (domain, seed) runs: split the test pool, train the
//! weak model on the training set, generate weak logits for the holdout,
//! train one strong head per method on the holdout's training portion
//! under weak supervision, and train the ceiling head on the full
//! holdout with ground-truth labels. Accuracies are reported both on the
//! full test pool (which overlaps the supervision holdout, so it is
//! optimistically contaminated) and on the untouched test subset.
//!
//! Method/head pairing mirrors the usual comparison: the prototype head
//! carries the alignment objective (and the ceiling), while the ce, kd,
//! auxconf, and adaptconf baselines train a linear probe. The ce
//! baseline consumes argmax pseudo-labels; the others consume soft weak
//! logits. Validation labels for best-model selection come from the
//! weak model (argmax) for weak-supervised runs and from ground truth
//! for the ceiling, so no ground truth ever leaks into weak-supervised
//! training.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::CoreError;
use crate::loss::LossKind;
use crate::matrix::Matrix;
use crate::model::{
    evaluate_accuracy, init_prototypes, predict, pseudo_labels, train_strong, train_weak,
    weak_supervise, CurvePoint, EvalProbe, ModelError, PrototypeSource, StrongHead, Supervision,
    TrainConfig,
};
use crate::rng::{Stream, SubRng};
use crate::split::{split_holdout, split_test_set};
use crate::types::{EmbeddingMatrix, LinearProbe};

/// Anchors per class for prototype initialization in the benchmark.
pub const BENCH_ANCHORS_PER_CLASS: usize = 5;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("invalid benchmark spec: {reason}")]
    InvalidSpec { reason: String },

    #[error("domain '{domain}', seed {seed}, stage '{stage}': {source}")]
    Stage {
        domain: String,
        seed: u64,
        stage: &'static str,
        #[source]
        source: Box<ModelError>,
    },

    #[error("report: {reason}")]
    Report { reason: String },

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Model(#[from] ModelError),
}

impl From<CoreError> for BenchError {
    fn from(e: CoreError) -> Self {
        BenchError::Model(ModelError::Core(e))
    }
}

/// One synthetic domain: a name and a difficulty multiplier applied to
/// the strong-feature noise scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSpec {
    pub name: String,
    pub sigma_scale: f64,
}

/// Full description of a synthetic multi-domain benchmark.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    /// Class count.
    pub k: usize,
    /// Strong feature dimension.
    pub d_s: usize,
    /// Weak feature dimension; at most `d_s`.
    pub d_w: usize,
    pub n_train: usize,
    pub n_test: usize,
    /// Strong-feature noise scale.
    pub sigma_s: f64,
    /// Extra weak-feature noise scale.
    pub sigma_w: f64,
    /// Data-generation seed; experiment seeds vary per run instead.
    pub seed: u64,
    pub domains: Vec<DomainSpec>,
}

impl SyntheticSpec {
    /// The desk-scale default benchmark: 20 classes, 64-dim strong and
    /// 16-dim weak features, three domains of increasing difficulty.
    pub fn desk_default() -> Self {
        Self {
            k: 20,
            d_s: 64,
            d_w: 16,
            n_train: 2000,
            n_test: 1000,
            sigma_s: 0.35,
            sigma_w: 0.5,
            seed: 0,
            domains: vec![
                DomainSpec {
                    name: "easy".into(),
                    sigma_scale: 1.0,
                },
                DomainSpec {
                    name: "medium".into(),
                    sigma_scale: 1.5,
                },
                DomainSpec {
                    name: "hard".into(),
                    sigma_scale: 2.0,
                },
            ],
        }
    }

    /// A noiseless, trivially separable task; every model should be
    /// perfect on it.
    pub fn noiseless(k: usize, d_s: usize, d_w: usize, n_train: usize, n_test: usize) -> Self {
        Self {
            k,
            d_s,
            d_w,
            n_train,
            n_test,
            sigma_s: 0.0,
            sigma_w: 0.0,
            seed: 0,
            domains: vec![DomainSpec {
                name: "noiseless".into(),
                sigma_scale: 1.0,
            }],
        }
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        if self.k < 2 {
            return Err(BenchError::InvalidSpec {
                reason: format!("k must be at least 2, found {}", self.k),
            });
        }
        if self.d_s < 1 || self.d_w < 1 {
            return Err(BenchError::InvalidSpec {
                reason: "feature dimensions must be at least 1".into(),
            });
        }
        if self.d_w > self.d_s {
            return Err(BenchError::InvalidSpec {
                reason: format!("d_w ({}) exceeds d_s ({})", self.d_w, self.d_s),
            });
        }
        if self.n_train < 1 {
            return Err(BenchError::InvalidSpec {
                reason: "n_train must be at least 1".into(),
            });
        }
        if self.n_test < 5 {
            return Err(BenchError::InvalidSpec {
                reason: format!("n_test must be at least 5, found {}", self.n_test),
            });
        }
        if !(self.sigma_s.is_finite() && self.sigma_s >= 0.0)
            || !(self.sigma_w.is_finite() && self.sigma_w >= 0.0)
        {
            return Err(BenchError::InvalidSpec {
                reason: "sigma_s and sigma_w must be nonnegative".into(),
            });
        }
        if self.domains.is_empty() {
            return Err(BenchError::InvalidSpec {
                reason: "at least one domain is required".into(),
            });
        }
        for d in &self.domains {
            if !(d.sigma_scale.is_finite() && d.sigma_scale > 0.0) {
                return Err(BenchError::InvalidSpec {
                    reason: format!(
                        "domain '{}': sigma_scale must be positive, found {}",
                        d.name, d.sigma_scale
                    ),
                });
            }
        }
        Ok(())
    }

    pub fn from_json(s: &str) -> Result<Self, BenchError> {
        let spec: SyntheticSpec =
            serde_json::from_str(s).map_err(|e| BenchError::InvalidSpec {
                reason: e.to_string(),
            })?;
        spec.validate()?;
        Ok(spec)
    }

    /// Zero-padded class names `class_00 .. class_NN`.
    pub fn class_names(&self) -> Vec<String> {
        let width = (self.k.max(2) - 1).to_string().len();
        (0..self.k)
            .map(|i| format!("class_{i:0width$}"))
            .collect()
    }
}

/// Generated features and labels for one domain.
#[derive(Debug, Clone)]
pub struct DomainData {
    pub name: String,
    pub strong_train: EmbeddingMatrix,
    pub strong_test: EmbeddingMatrix,
    pub weak_train: EmbeddingMatrix,
    pub weak_test: EmbeddingMatrix,
    pub train_labels: Vec<usize>,
    pub test_labels: Vec<usize>,
    pub class_names: Vec<String>,
}

fn normalize(v: &mut [f64]) -> Result<(), BenchError> {
    let n = crate::matrix::norm(v);
    if n < 1e-12 {
        return Err(BenchError::InvalidSpec {
            reason: "degenerate zero-norm sample drawn".into(),
        });
    }
    for x in v {
        *x /= n;
    }
    Ok(())
}

/// Generates one domain of the benchmark.
///
/// Class means are uniform on the unit sphere. A strong sample of class
/// y is `normalize(mean_y + sigma_s * sigma_scale * g)`; its weak
/// counterpart is `normalize(P strong + sigma_w * g')` where `P` is one
/// seeded Gaussian projection shared across the domain (the identity
/// when `d_w == d_s`). Noise scales are norm-calibrated: `g` and `g'`
/// are Gaussian directions of unit expected norm, so a scale of s
/// perturbs a unit-norm sample by a vector of norm about s. Labels
/// cycle round-robin, so classes stay balanced up to rounding.
pub fn generate_domain(
    spec: &SyntheticSpec,
    domain_index: usize,
) -> Result<DomainData, BenchError> {
    spec.validate()?;
    let domain = spec
        .domains
        .get(domain_index)
        .ok_or_else(|| BenchError::InvalidSpec {
            reason: format!("domain index {domain_index} out of range"),
        })?;
    let mut rng = SubRng::new(spec.seed, Stream::DataGen, domain_index as u32);
    let (k, ds, dw) = (spec.k, spec.d_s, spec.d_w);
    let sigma = spec.sigma_s * domain.sigma_scale / (ds as f64).sqrt();
    let sigma_w = spec.sigma_w / (dw as f64).sqrt();

    let mut means = Matrix::zeros(k, ds);
    for j in 0..k {
        let row = means.row_mut(j);
        for v in row.iter_mut() {
            *v = rng.next_gaussian();
        }
        normalize(row)?;
    }

    // d_s -> d_w projection; identity when no reduction is needed so the
    // noiseless case leaves weak features equal to strong features.
    let projection = if dw == ds {
        None
    } else {
        let mut p = Matrix::zeros(dw, ds);
        let scale = 1.0 / (ds as f64).sqrt();
        for v in p.as_mut_slice() {
            *v = rng.next_gaussian() * scale;
        }
        Some(p)
    };

    let mut draw_set = |n: usize| -> Result<(Matrix, Matrix, Vec<usize>), BenchError> {
        let mut strong = Matrix::zeros(n, ds);
        let mut weak = Matrix::zeros(n, dw);
        let mut labels = Vec::with_capacity(n);
        for i in 0..n {
            let y = i % k;
            labels.push(y);
            let srow = strong.row_mut(i);
            for (t, v) in srow.iter_mut().enumerate() {
                *v = means.get(y, t) + sigma * rng.next_gaussian();
            }
            normalize(srow)?;
            let srow = strong.row(i);
            let wrow = weak.row_mut(i);
            match &projection {
                None => wrow.copy_from_slice(srow),
                Some(p) => {
                    for (j, v) in wrow.iter_mut().enumerate() {
                        *v = crate::matrix::dot(p.row(j), srow);
                    }
                }
            }
            for v in wrow.iter_mut() {
                *v += sigma_w * rng.next_gaussian();
            }
            normalize(wrow)?;
        }
        Ok((strong, weak, labels))
    };

    let (strong_train, weak_train, train_labels) = draw_set(spec.n_train)?;
    let (strong_test, weak_test, test_labels) = draw_set(spec.n_test)?;

    Ok(DomainData {
        name: domain.name.clone(),
        strong_train: EmbeddingMatrix::new(strong_train)?,
        strong_test: EmbeddingMatrix::new(strong_test)?,
        weak_train: EmbeddingMatrix::new(weak_train)?,
        weak_test: EmbeddingMatrix::new(weak_test)?,
        train_labels,
        test_labels,
        class_names: spec.class_names(),
    })
}

/// Training configurations for the pipeline stages.
#[derive(Debug, Clone)]
pub struct PipelineConfigs {
    pub weak: TrainConfig,
    /// Template for weak-supervised strong runs; the loss field is
    /// overridden per method.
    pub strong: TrainConfig,
    pub ceiling: TrainConfig,
    pub anchors_per_class: usize,
}

impl PipelineConfigs {
    /// Desk-scale defaults: the published hyperparameters except for the
    /// batch size, which drops to 64 so runs take enough optimizer steps
    /// at benchmark sample counts.
    pub fn desk_default() -> Self {
        let mut weak = TrainConfig::weak_default(0);
        weak.batch_size = 64;
        let mut strong = TrainConfig::strong_default(0, LossKind::Cpl);
        strong.batch_size = 64;
        let mut ceiling = TrainConfig::strong_default(0, LossKind::Ce);
        ceiling.batch_size = 64;
        Self {
            weak,
            strong,
            ceiling,
            anchors_per_class: BENCH_ANCHORS_PER_CLASS,
        }
    }
}

/// Accuracy on the full test pool and on the untouched test subset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitAcc {
    pub dtest: f64,
    pub dtest_prime: f64,
}

/// Everything measured for one (domain, seed) pipeline execution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineRun {
    pub domain: String,
    pub seed: u64,
    pub weak: SplitAcc,
    pub ceiling: SplitAcc,
    pub methods: BTreeMap<String, SplitAcc>,
    /// Per-head training curves, keyed by method name plus "ceiling".
    pub curves: BTreeMap<String, Vec<CurvePoint>>,
}

fn stage<T>(
    domain: &str,
    seed: u64,
    name: &'static str,
    r: Result<T, ModelError>,
) -> Result<T, BenchError> {
    r.map_err(|e| BenchError::Stage {
        domain: domain.to_string(),
        seed,
        stage: name,
        source: Box::new(e),
    })
}

/// Runs the full pipeline for one domain and one experiment seed.
pub fn run_pipeline(
    data: &DomainData,
    methods: &[LossKind],
    cfgs: &PipelineConfigs,
    seed: u64,
) -> Result<PipelineRun, BenchError> {
    let domain = data.name.as_str();
    let k = data.class_names.len();

    // Step 1: dataset splitting.
    let plan = split_test_set(data.test_labels.len(), seed)
        .and_then(|p| split_holdout(p, seed))
        .map_err(|e| BenchError::Stage {
            domain: domain.to_string(),
            seed,
            stage: "split",
            source: Box::new(ModelError::Data(e)),
        })?;

    // Step 2: weak model on the training set, ground-truth labels.
    let mut weak_cfg = cfgs.weak.clone();
    weak_cfg.seed = seed;
    let weak = stage(
        domain,
        seed,
        "train-weak",
        train_weak(&data.weak_train, &data.train_labels, k, &weak_cfg),
    )?
    .model;
    let weak_preds = stage(
        domain,
        seed,
        "weak-eval",
        weak_supervise(&weak, &data.weak_test).map(|z| pseudo_labels(&z)),
    )?;
    let weak_acc = SplitAcc {
        dtest: stage(
            domain,
            seed,
            "weak-eval",
            evaluate_accuracy(&weak_preds, &data.test_labels),
        )?,
        dtest_prime: subset_accuracy(&weak_preds, &data.test_labels, &plan.test_prime)?,
    };

    // Step 3: weak supervision for the holdout portions.
    let strong_train_emb = data.strong_test.select_rows(&plan.strong_train)?;
    let strong_val_emb = data.strong_test.select_rows(&plan.strong_val)?;
    let weak_train_view = data.weak_test.select_rows(&plan.strong_train)?;
    let weak_val_view = data.weak_test.select_rows(&plan.strong_val)?;
    let zw_train = stage(
        domain,
        seed,
        "supervise",
        weak_supervise(&weak, &weak_train_view),
    )?;
    let zw_val = stage(
        domain,
        seed,
        "supervise",
        weak_supervise(&weak, &weak_val_view),
    )?;
    let val_weak_labels = pseudo_labels(&zw_val);
    let train_gt: Vec<usize> = plan
        .strong_train
        .iter()
        .map(|&i| data.test_labels[i])
        .collect();
    let val_gt: Vec<usize> = plan
        .strong_val
        .iter()
        .map(|&i| data.test_labels[i])
        .collect();

    // Step 4: one strong head per method under weak supervision.
    let mut method_accs = BTreeMap::new();
    let mut curves = BTreeMap::new();
    for &method in methods {
        let mut cfg = cfgs.strong.clone();
        cfg.loss = method;
        cfg.seed = seed;
        let head = make_head(method, data, cfgs, k)?;
        let supervision = match method {
            LossKind::Ce => Supervision::Labels(pseudo_labels(&zw_train)),
            _ => Supervision::WeakLogits(zw_train.clone()),
        };
        let probe = EvalProbe {
            train: (&strong_train_emb, &train_gt),
            test: (&data.strong_test, &data.test_labels),
        };
        let out = stage(
            domain,
            seed,
            "train-strong",
            train_strong(
                head,
                &strong_train_emb,
                &supervision,
                (&strong_val_emb, &val_weak_labels),
                &cfg,
                Some(&probe),
            ),
        )?;
        let preds = stage(domain, seed, "eval", predict(&out.head, &data.strong_test))?;
        method_accs.insert(
            method.name().to_string(),
            SplitAcc {
                dtest: stage(
                    domain,
                    seed,
                    "eval",
                    evaluate_accuracy(&preds, &data.test_labels),
                )?,
                dtest_prime: subset_accuracy(&preds, &data.test_labels, &plan.test_prime)?,
            },
        );
        curves.insert(method.name().to_string(), out.curves);
    }

    // Step 5: ceiling on the full holdout with ground-truth labels.
    let hold_emb = data.strong_test.select_rows(&plan.hold)?;
    let hold_gt: Vec<usize> = plan.hold.iter().map(|&i| data.test_labels[i]).collect();
    let mut ceiling_cfg = cfgs.ceiling.clone();
    ceiling_cfg.seed = seed;
    let ceiling_head = make_head(LossKind::Cpl, data, cfgs, k)?; // prototype head
    let probe = EvalProbe {
        train: (&hold_emb, &hold_gt),
        test: (&data.strong_test, &data.test_labels),
    };
    let out = stage(
        domain,
        seed,
        "train-ceiling",
        train_strong(
            ceiling_head,
            &hold_emb,
            &Supervision::Labels(hold_gt.clone()),
            (&strong_val_emb, &val_gt),
            &ceiling_cfg,
            Some(&probe),
        ),
    )?;
    let preds = stage(domain, seed, "eval", predict(&out.head, &data.strong_test))?;
    let ceiling_acc = SplitAcc {
        dtest: stage(
            domain,
            seed,
            "eval",
            evaluate_accuracy(&preds, &data.test_labels),
        )?,
        dtest_prime: subset_accuracy(&preds, &data.test_labels, &plan.test_prime)?,
    };
    curves.insert("ceiling".to_string(), out.curves);

    Ok(PipelineRun {
        domain: domain.to_string(),
        seed,
        weak: weak_acc,
        ceiling: ceiling_acc,
        methods: method_accs,
        curves,
    })
}

/// Prototype head (anchors init from training data) for the alignment
/// method and the ceiling; zero-initialized linear probe for baselines.
fn make_head(
    method: LossKind,
    data: &DomainData,
    cfgs: &PipelineConfigs,
    k: usize,
) -> Result<StrongHead, BenchError> {
    Ok(match method {
        LossKind::Cpl => {
            let protos = init_prototypes(
                PrototypeSource::Anchors {
                    embeddings: &data.strong_train,
                    labels: &data.train_labels,
                    per_class: cfgs.anchors_per_class,
                },
                k,
                data.strong_train.dim(),
            )?;
            StrongHead::Prototype(protos)
        }
        _ => StrongHead::Linear(LinearProbe::zeros(k, data.strong_train.dim())),
    })
}

fn subset_accuracy(
    preds: &[usize],
    labels: &[usize],
    subset: &[usize],
) -> Result<f64, BenchError> {
    let p: Vec<usize> = subset.iter().map(|&i| preds[i]).collect();
    let l: Vec<usize> = subset.iter().map(|&i| labels[i]).collect();
    Ok(evaluate_accuracy(&p, &l)?)
}

/// Seed-averaged accuracies for one domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainRow {
    pub domain: String,
    pub weak: SplitAcc,
    pub ceiling: SplitAcc,
    pub methods: BTreeMap<String, SplitAcc>,
    /// Alignment-method margin over the best baseline on the full test
    /// pool; present only when both sides exist.
    pub delta_dtest: Option<f64>,
}

/// Aggregated benchmark report: per-domain seed-averaged rows, the
/// across-domain average, the overall margin, and every underlying run
/// (with curves) for audit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub seeds: Vec<u64>,
    pub methods: Vec<String>,
    pub rows: Vec<DomainRow>,
    pub average: DomainRow,
    /// `avg(cpl) - max(avg(other methods))` on the full test pool.
    pub delta: Option<f64>,
    pub runs: Vec<PipelineRun>,
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut n = 0usize;
    for v in values {
        sum += v;
        n += 1;
    }
    sum / n as f64
}

fn mean_acc<'a>(accs: impl Iterator<Item = &'a SplitAcc> + Clone) -> SplitAcc {
    SplitAcc {
        dtest: mean(accs.clone().map(|a| a.dtest)),
        dtest_prime: mean(accs.map(|a| a.dtest_prime)),
    }
}

fn delta_of(methods: &BTreeMap<String, SplitAcc>) -> Option<f64> {
    let cpl = methods.get(LossKind::Cpl.name())?;
    let best_other = methods
        .iter()
        .filter(|(name, _)| name.as_str() != LossKind::Cpl.name())
        .map(|(_, acc)| acc.dtest)
        .fold(f64::NEG_INFINITY, f64::max);
    if best_other.is_finite() {
        Some(cpl.dtest - best_other)
    } else {
        None
    }
}

impl RunReport {
    /// Aggregates per-(domain, seed) runs. `domains` fixes the row
    /// order; every (domain, seed) pair must be present in `runs`.
    pub fn from_runs(
        domains: &[String],
        seeds: &[u64],
        methods: &[LossKind],
        runs: Vec<PipelineRun>,
    ) -> Result<RunReport, BenchError> {
        if runs.is_empty() {
            return Err(BenchError::Report {
                reason: "no runs to aggregate".into(),
            });
        }
        let mut rows = Vec::with_capacity(domains.len());
        for domain in domains {
            let domain_runs: Vec<&PipelineRun> =
                runs.iter().filter(|r| &r.domain == domain).collect();
            if domain_runs.len() != seeds.len() {
                return Err(BenchError::Report {
                    reason: format!(
                        "domain '{domain}' has {} runs, expected {}",
                        domain_runs.len(),
                        seeds.len()
                    ),
                });
            }
            let mut method_means = BTreeMap::new();
            for m in methods {
                let name = m.name().to_string();
                method_means.insert(
                    name.clone(),
                    mean_acc(domain_runs.iter().map(|r| &r.methods[&name])),
                );
            }
            let delta_dtest = delta_of(&method_means);
            rows.push(DomainRow {
                domain: domain.clone(),
                weak: mean_acc(domain_runs.iter().map(|r| &r.weak)),
                ceiling: mean_acc(domain_runs.iter().map(|r| &r.ceiling)),
                methods: method_means,
                delta_dtest,
            });
        }
        let mut avg_methods = BTreeMap::new();
        for m in methods {
            let name = m.name().to_string();
            avg_methods.insert(
                name.clone(),
                mean_acc(rows.iter().map(|r| &r.methods[&name])),
            );
        }
        let average = DomainRow {
            domain: "average".into(),
            weak: mean_acc(rows.iter().map(|r| &r.weak)),
            ceiling: mean_acc(rows.iter().map(|r| &r.ceiling)),
            delta_dtest: delta_of(&avg_methods),
            methods: avg_methods,
        };
        let delta = average.delta_dtest;
        Ok(RunReport {
            seeds: seeds.to_vec(),
            methods: methods.iter().map(|m| m.name().to_string()).collect(),
            rows,
            average,
            delta,
        runs,
        })
    }
}

/// Report serialization format.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
}

pub const REPORT_CSV_HEADER: &str = "domain,method,acc_dtest,acc_dtestprime,weak,ceiling,delta";

fn fmt_acc(v: f64) -> String {
    format!("{v:.6}")
}

/// Renders reports to the requested format. CSV holds one row per
/// (domain, method) plus average rows; the margin column is filled on
/// alignment-method rows only. JSON round-trips the full report list.
pub fn render_report(reports: &[RunReport], format: ReportFormat) -> Result<String, BenchError> {
    if reports.is_empty() {
        return Err(BenchError::Report {
            reason: "no reports to render".into(),
        });
    }
    match format {
        ReportFormat::Json => serde_json::to_string_pretty(reports)
            .map(|mut s| {
                s.push('\n');
                s
            })
            .map_err(|e| BenchError::Report {
                reason: e.to_string(),
            }),
        ReportFormat::Csv => {
            let mut out = String::new();
            out.push_str(REPORT_CSV_HEADER);
            out.push('\n');
            for report in reports {
                for row in report.rows.iter().chain(std::iter::once(&report.average)) {
                    for (method, acc) in &row.methods {
                        let delta = if method == LossKind::Cpl.name() {
                            row.delta_dtest.map(fmt_acc).unwrap_or_default()
                        } else {
                            String::new()
                        };
                        writeln!(
                            out,
                            "{},{},{},{},{},{},{}",
                            row.domain,
                            method,
                            fmt_acc(acc.dtest),
                            fmt_acc(acc.dtest_prime),
                            fmt_acc(row.weak.dtest),
                            fmt_acc(row.ceiling.dtest),
                            delta
                        )
                        .expect("write to string");
                    }
                }
            }
            Ok(out)
        }
    }
}

/// Writes `report.csv` or `report.json` into `out_dir`.
pub fn emit_report(
    reports: &[RunReport],
    format: ReportFormat,
    out_dir: &Path,
) -> Result<std::path::PathBuf, BenchError> {
    let rendered = render_report(reports, format)?;
    let name = match format {
        ReportFormat::Csv => "report.csv",
        ReportFormat::Json => "report.json",
    };
    let path = out_dir.join(name);
    fs::write(&path, rendered).map_err(|e| BenchError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    Ok(path)
}

/// Writes one curve CSV per (domain, method, seed) under
/// `out_dir/curves/`, named `{domain}.{method}.seed{seed}.csv`.
pub fn emit_curves(report: &RunReport, out_dir: &Path) -> Result<(), BenchError> {
    let dir = out_dir.join("curves");
    fs::create_dir_all(&dir).map_err(|e| BenchError::Io {
        path: dir.display().to_string(),
        source: e,
    })?;
    for run in &report.runs {
        for (method, points) in &run.curves {
            let mut out = String::from("step,train_acc,test_acc\n");
            for p in points {
                writeln!(out, "{},{},{}", p.step, fmt_acc(p.train_acc), fmt_acc(p.test_acc))
                    .expect("write to string");
            }
            let path = dir.join(format!("{}.{}.seed{}.csv", run.domain, method, run.seed));
            fs::write(&path, out).map_err(|e| BenchError::Io {
                path: path.display().to_string(),
                source: e,
            })?;
        }
    }
    Ok(())
}
