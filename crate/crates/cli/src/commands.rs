//! Subcommand implementations.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use w2s_core::bench::{
    emit_curves, emit_report, generate_domain, run_pipeline, DomainData, PipelineConfigs,
    PipelineRun, ReportFormat, RunReport, SyntheticSpec,
};
use w2s_core::io::{read_labels, read_matrix, write_labels, write_matrix};
use w2s_core::loss::LossKind;
use w2s_core::model::{
    evaluate_accuracy, init_prototypes, load_checkpoint, load_weak, predict, pseudo_labels,
    save_checkpoint, train_strong, train_weak, weak_supervise, PrototypeSource, StrongHead,
    Supervision, TrainConfig,
};
use w2s_core::split::{split_holdout, SplitPlan};
use w2s_core::types::{EmbeddingMatrix, LinearProbe, LogitMatrix, LogitSource};

use crate::config::{self, Overrides};
use crate::{require_file, GlobalOpts, LogLevel};

/// Errors split by exit class: usage/config problems exit 2, runtime
/// failures exit 1.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Runtime(m) => f.write_str(m),
        }
    }
}

fn usage(e: impl fmt::Display) -> CliError {
    CliError::Usage(e.to_string())
}

fn runtime(e: impl fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

impl GlobalOpts {
    fn ensure_out(&self) -> Result<(), CliError> {
        fs::create_dir_all(&self.out)
            .map_err(|e| runtime(format!("cannot create {}: {e}", self.out.display())))
    }

    fn info(&self, msg: &str) {
        if self.log_level >= LogLevel::Info {
            eprintln!("{msg}");
        }
    }
}

fn read_embeddings(path: &Path) -> Result<EmbeddingMatrix, CliError> {
    require_file(path)?;
    let m = read_matrix(path).map_err(usage)?;
    EmbeddingMatrix::new(m).map_err(usage)
}

fn read_label_file(path: &Path) -> Result<(Vec<usize>, Vec<String>), CliError> {
    require_file(path)?;
    let (labels, names) = read_labels(path).map_err(usage)?;
    Ok((labels.into_iter().map(|l| l as usize).collect(), names))
}

pub fn cmd_gen(global: &GlobalOpts, spec_path: &Path) -> Result<(), CliError> {
    require_file(spec_path)?;
    let text = fs::read_to_string(spec_path)
        .map_err(|e| usage(format!("cannot read {}: {e}", spec_path.display())))?;
    let spec = SyntheticSpec::from_json(&text).map_err(usage)?;
    global.ensure_out()?;
    let names = spec.class_names();
    for (di, domain) in spec.domains.iter().enumerate() {
        let data = generate_domain(&spec, di).map_err(runtime)?;
        let out = &global.out;
        let write = |name: String, m: &w2s_core::matrix::Matrix| -> Result<(), CliError> {
            write_matrix(&out.join(name), m).map_err(runtime)
        };
        write(
            format!("{}.strong.train.w2sm", domain.name),
            data.strong_train.as_matrix(),
        )?;
        write(
            format!("{}.strong.test.w2sm", domain.name),
            data.strong_test.as_matrix(),
        )?;
        write(
            format!("{}.weak.train.w2sm", domain.name),
            data.weak_train.as_matrix(),
        )?;
        write(
            format!("{}.weak.test.w2sm", domain.name),
            data.weak_test.as_matrix(),
        )?;
        let train_labels: Vec<u32> = data.train_labels.iter().map(|&l| l as u32).collect();
        let test_labels: Vec<u32> = data.test_labels.iter().map(|&l| l as u32).collect();
        write_labels(
            &out.join(format!("{}.train.w2sl", domain.name)),
            &train_labels,
            &names,
        )
        .map_err(runtime)?;
        write_labels(
            &out.join(format!("{}.test.w2sl", domain.name)),
            &test_labels,
            &names,
        )
        .map_err(runtime)?;
        global.info(&format!(
            "gen: domain '{}' -> {} train / {} test samples",
            domain.name, spec.n_train, spec.n_test
        ));
    }
    println!(
        "gen: wrote {} domains to {}",
        spec.domains.len(),
        global.out.display()
    );
    Ok(())
}

pub fn cmd_train_weak(
    global: &GlobalOpts,
    embeddings: &Path,
    labels: &Path,
    model_out: &str,
    overrides: Overrides,
) -> Result<(), CliError> {
    let emb = read_embeddings(embeddings)?;
    let (labels, names) = read_label_file(labels)?;
    let cfg = config::resolve(TrainConfig::weak_default(global.seed), &overrides)?;
    global.ensure_out()?;
    let out = train_weak(&emb, &labels, names.len(), &cfg).map_err(runtime)?;
    for (epoch, loss) in out.epoch_losses.iter().enumerate() {
        global.info(&format!("train-weak: epoch {epoch} mean loss {loss:.6}"));
    }
    let base = global.out.join(model_out);
    save_checkpoint(&base, &StrongHead::Linear(out.model.probe.clone())).map_err(runtime)?;
    let z = weak_supervise(&out.model, &emb).map_err(runtime)?;
    let acc = evaluate_accuracy(&pseudo_labels(&z), &labels).map_err(runtime)?;
    println!("train-weak: train_accuracy {acc:.4} -> {}", base.display());
    Ok(())
}

pub fn cmd_supervise(
    global: &GlobalOpts,
    model: &Path,
    embeddings: &Path,
    logits_out: &str,
    hard: bool,
    labels: Option<&Path>,
) -> Result<(), CliError> {
    require_file(&w2s_core::model::checkpoint_paths(model).0)?;
    require_file(&w2s_core::model::checkpoint_paths(model).1)?;
    let weak = load_weak(model).map_err(usage)?;
    let emb = read_embeddings(embeddings)?;
    let z = weak_supervise(&weak, &emb).map_err(runtime)?;
    global.ensure_out()?;
    let out_path = global.out.join(logits_out);
    if hard {
        let hard_labels: Vec<u32> = pseudo_labels(&z).iter().map(|&l| l as u32).collect();
        let width = (z.k().max(2) - 1).to_string().len();
        let names: Vec<String> = (0..z.k()).map(|i| format!("class_{i:0width$}")).collect();
        write_labels(&out_path, &hard_labels, &names).map_err(runtime)?;
    } else {
        write_matrix(&out_path, z.as_matrix()).map_err(runtime)?;
    }
    match labels {
        Some(path) => {
            let (gt, _) = read_label_file(path)?;
            let acc = evaluate_accuracy(&pseudo_labels(&z), &gt).map_err(runtime)?;
            println!("supervise: accuracy {acc:.4} -> {}", out_path.display());
        }
        None => {
            println!(
                "supervise: n {} k {} -> {}",
                z.len(),
                z.k(),
                out_path.display()
            );
        }
    }
    Ok(())
}

pub struct TrainStrongArgs {
    pub embeddings: PathBuf,
    pub supervision: Option<PathBuf>,
    pub labels: Option<PathBuf>,
    pub loss: String,
    pub head: Option<String>,
    pub anchor_embeddings: Option<PathBuf>,
    pub anchor_labels: Option<PathBuf>,
    pub per_class: usize,
    pub init_file: Option<PathBuf>,
    pub model_out: String,
}

pub fn cmd_train_strong(
    global: &GlobalOpts,
    args: TrainStrongArgs,
    overrides: Overrides,
) -> Result<(), CliError> {
    let loss: LossKind = args.loss.parse().map_err(CliError::Usage)?;
    let head_name = match args.head.as_deref() {
        Some("prototype") => "prototype",
        Some("linear") => "linear",
        Some(other) => {
            return Err(CliError::Usage(format!(
                "unknown head '{other}' (expected prototype or linear)"
            )));
        }
        None => {
            if loss == LossKind::Cpl {
                "prototype"
            } else {
                "linear"
            }
        }
    };
    if loss == LossKind::Cpl && head_name == "linear" {
        return Err(CliError::Usage(
            "--loss cpl requires --head prototype (use --loss kd for linear heads)".into(),
        ));
    }

    // Supervision files: ce takes hard labels, the soft losses take
    // weak logits. Checked before any compute.
    let (sup_source, val_from_logits) = match (&args.supervision, &args.labels, loss) {
        (Some(_), Some(_), _) => unreachable!("clap conflicts_with"),
        (None, None, _) => {
            return Err(CliError::Usage(
                "supervision required: pass --supervision (weak logits) or --labels".into(),
            ));
        }
        (Some(_), None, LossKind::Ce) => {
            return Err(CliError::Usage(
                "--loss ce requires --labels (hard labels); --supervision carries weak logits"
                    .into(),
            ));
        }
        (None, Some(_), l) if l != LossKind::Ce => {
            return Err(CliError::Usage(format!(
                "--loss {l} requires --supervision (weak logits); --labels carries hard labels"
            )));
        }
        (Some(path), None, _) => (path.clone(), true),
        (None, Some(path), _) => (path.clone(), false),
    };

    let emb = read_embeddings(&args.embeddings)?;
    let n = emb.len();
    let d = emb.dim();

    let (supervision_full, k) = if val_from_logits {
        require_file(&sup_source)?;
        let m = read_matrix(&sup_source).map_err(usage)?;
        let k = m.cols();
        (
            Supervision::WeakLogits(
                LogitMatrix::new(m, LogitSource::Weak).map_err(usage)?,
            ),
            k,
        )
    } else {
        let (labels, names) = read_label_file(&sup_source)?;
        (Supervision::Labels(labels), names.len())
    };
    if supervision_full.len() != n {
        return Err(CliError::Usage(format!(
            "supervision has {} rows but embeddings have {n}",
            supervision_full.len()
        )));
    }

    // Head construction.
    let head = if head_name == "prototype" {
        let protos = match (&args.init_file, &args.anchor_embeddings) {
            (Some(path), None) => {
                require_file(path)?;
                init_prototypes(PrototypeSource::File(path), k, d).map_err(usage)?
            }
            (None, Some(anchor_path)) => {
                let anchors = read_embeddings(anchor_path)?;
                let (anchor_labels, _) =
                    read_label_file(args.anchor_labels.as_ref().expect("clap requires"))?;
                init_prototypes(
                    PrototypeSource::Anchors {
                        embeddings: &anchors,
                        labels: &anchor_labels,
                        per_class: args.per_class,
                    },
                    k,
                    d,
                )
                .map_err(usage)?
            }
            (None, None) => {
                return Err(CliError::Usage(
                    "prototype head needs --init-file or --anchor-embeddings/--anchor-labels"
                        .into(),
                ));
            }
            (Some(_), Some(_)) => unreachable!("clap conflicts_with"),
        };
        StrongHead::Prototype(protos)
    } else {
        StrongHead::Linear(LinearProbe::zeros(k, d))
    };

    // 80/20 train/validation split of the provided rows.
    let plan = SplitPlan {
        seed: global.seed,
        hold: (0..n).collect(),
        test_prime: Vec::new(),
        strong_train: Vec::new(),
        strong_val: Vec::new(),
    };
    let plan = split_holdout(plan, global.seed).map_err(usage)?;
    let train_emb = emb.select_rows(&plan.strong_train).map_err(runtime)?;
    let val_emb = emb.select_rows(&plan.strong_val).map_err(runtime)?;
    let (supervision, val_labels) = match &supervision_full {
        Supervision::WeakLogits(m) => {
            let train = m.select_rows(&plan.strong_train).map_err(runtime)?;
            let val = m.select_rows(&plan.strong_val).map_err(runtime)?;
            (Supervision::WeakLogits(train), pseudo_labels(&val))
        }
        Supervision::Labels(ls) => (
            Supervision::Labels(plan.strong_train.iter().map(|&i| ls[i]).collect()),
            plan.strong_val.iter().map(|&i| ls[i]).collect(),
        ),
    };

    let mut cfg = config::resolve(
        TrainConfig::strong_default(global.seed, loss),
        &overrides,
    )?;
    cfg.loss = loss;
    global.ensure_out()?;
    let out = train_strong(
        head,
        &train_emb,
        &supervision,
        (&val_emb, &val_labels),
        &cfg,
        None,
    )
    .map_err(runtime)?;
    for ev in &out.val_history {
        global.info(&format!(
            "train-strong: epoch {} step {} val_accuracy {:.4}",
            ev.epoch, ev.step, ev.val_acc
        ));
    }
    let base = global.out.join(&args.model_out);
    save_checkpoint(&base, &out.head).map_err(runtime)?;
    let plan_path = global.out.join(format!("{}.plan.json", args.model_out));
    fs::write(&plan_path, plan.to_json()).map_err(|e| runtime(format!("{}: {e}", plan_path.display())))?;
    let best = out
        .val_history
        .iter()
        .map(|e| e.val_acc)
        .fold(f64::NEG_INFINITY, f64::max);
    println!(
        "train-strong: loss {} val_accuracy {best:.4} -> {}",
        loss,
        base.display()
    );
    Ok(())
}

pub fn cmd_eval(
    global: &GlobalOpts,
    model: &Path,
    embeddings: &Path,
    labels: &Path,
    metrics_out: &str,
) -> Result<(), CliError> {
    let (mpath, spath) = w2s_core::model::checkpoint_paths(model);
    require_file(&mpath)?;
    require_file(&spath)?;
    let head = load_checkpoint(model).map_err(usage)?;
    let emb = read_embeddings(embeddings)?;
    let (gt, _) = read_label_file(labels)?;
    let preds = predict(&head, &emb).map_err(runtime)?;
    let acc = evaluate_accuracy(&preds, &gt).map_err(runtime)?;
    let correct = preds.iter().zip(&gt).filter(|(p, l)| p == l).count();
    global.ensure_out()?;
    let metrics_path = global.out.join(metrics_out);
    let metrics = serde_json::json!({
        "accuracy": acc,
        "n": preds.len(),
        "correct": correct,
        "model_variant": head.variant_name(),
    });
    fs::write(
        &metrics_path,
        serde_json::to_string_pretty(&metrics).expect("metrics serialize") + "\n",
    )
    .map_err(|e| runtime(format!("{}: {e}", metrics_path.display())))?;
    println!("eval: accuracy {acc:.4} -> {}", metrics_path.display());
    Ok(())
}

pub fn cmd_bench(
    global: &GlobalOpts,
    spec_path: &Path,
    methods: &str,
    seeds: &str,
    jobs: usize,
    config_file: Option<&Path>,
) -> Result<(), CliError> {
    require_file(spec_path)?;
    let text = fs::read_to_string(spec_path)
        .map_err(|e| usage(format!("cannot read {}: {e}", spec_path.display())))?;
    let spec = SyntheticSpec::from_json(&text).map_err(usage)?;
    let methods = config::parse_methods(methods)?;
    let seeds = config::parse_seeds(seeds)?;
    if jobs == 0 {
        return Err(CliError::Usage("--jobs must be at least 1".into()));
    }
    let mut cfgs = PipelineConfigs::desk_default();
    if let Some(path) = config_file {
        let overrides = Overrides {
            epochs: None,
            batch_size: None,
            base_lr: None,
            warmup_ratio: None,
            tau: None,
            config_file: Some(path.to_path_buf()),
        };
        cfgs.strong = config::resolve(cfgs.strong, &overrides)?;
        cfgs.ceiling = config::resolve(cfgs.ceiling, &overrides)?;
    }
    global.ensure_out()?;

    let mut domains = Vec::with_capacity(spec.domains.len());
    for di in 0..spec.domains.len() {
        domains.push(generate_domain(&spec, di).map_err(runtime)?);
    }
    let domain_names: Vec<String> = domains.iter().map(|d| d.name.clone()).collect();

    // (domain, seed) runs are independent; order of results is fixed by
    // the task list regardless of --jobs.
    let tasks: Vec<(usize, u64)> = domains
        .iter()
        .enumerate()
        .flat_map(|(di, _)| seeds.iter().map(move |&s| (di, s)))
        .collect();
    let runs = run_tasks(&tasks, &domains, &methods, &cfgs, jobs)?;
    for run in &runs {
        let cpl = run
            .methods
            .get("cpl")
            .map(|a| format!("{:.4}", a.dtest_prime))
            .unwrap_or_else(|| "-".into());
        global.info(&format!(
            "bench: domain '{}' seed {} weak {:.4} cpl {} ceiling {:.4} (on untouched test)",
            run.domain, run.seed, run.weak.dtest_prime, cpl, run.ceiling.dtest_prime
        ));
    }

    let report = RunReport::from_runs(&domain_names, &seeds, &methods, runs).map_err(runtime)?;
    let csv_path = emit_report(std::slice::from_ref(&report), ReportFormat::Csv, &global.out)
        .map_err(runtime)?;
    emit_report(std::slice::from_ref(&report), ReportFormat::Json, &global.out)
        .map_err(runtime)?;
    emit_curves(&report, &global.out).map_err(runtime)?;

    let delta = report
        .delta
        .map(|d| format!("{d:+.4}"))
        .unwrap_or_else(|| "n/a (needs a comparator method)".into());
    println!(
        "bench: {} domains x {} seeds, delta {} -> {}",
        domain_names.len(),
        seeds.len(),
        delta,
        csv_path.display()
    );
    Ok(())
}

fn run_tasks(
    tasks: &[(usize, u64)],
    domains: &[DomainData],
    methods: &[LossKind],
    cfgs: &PipelineConfigs,
    jobs: usize,
) -> Result<Vec<PipelineRun>, CliError> {
    if jobs <= 1 || tasks.len() <= 1 {
        let mut runs = Vec::with_capacity(tasks.len());
        for &(di, seed) in tasks {
            runs.push(run_pipeline(&domains[di], methods, cfgs, seed).map_err(runtime)?);
        }
        return Ok(runs);
    }
    let mut slots: Vec<Option<Result<PipelineRun, CliError>>> =
        (0..tasks.len()).map(|_| None).collect();
    std::thread::scope(|scope| {
        let chunk = tasks.len().div_ceil(jobs);
        for (tasks_chunk, slots_chunk) in tasks.chunks(chunk).zip(slots.chunks_mut(chunk)) {
            scope.spawn(move || {
                for (&(di, seed), slot) in tasks_chunk.iter().zip(slots_chunk.iter_mut()) {
                    *slot =
                        Some(run_pipeline(&domains[di], methods, cfgs, seed).map_err(runtime));
                }
            });
        }
    });
    slots
        .into_iter()
        .map(|s| s.expect("every slot filled"))
        .collect()
}
