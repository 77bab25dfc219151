//! Acceptance suite: one test per release criterion, each printing a
//! PASS line with its measurements. Tolerances are pinned in code.
//!
//! Oracles used here are independent of the implementation paths they
//! check: central finite differences over the public per-sample loss,
//! naive direct-summation KL, a scalar-loop finite-difference trainer,
//! and byte-level file comparisons.

use std::fs;

use std::process::Command;
use std::time::Instant;

use w2s_core::bench::{
    generate_domain, run_pipeline, PipelineConfigs, RunReport, SyntheticSpec,
};
use w2s_core::io::{read_labels, read_matrix, write_labels, write_matrix, DataError};
use w2s_core::loss::{cosine_logits, cpl_grad, cpl_loss, kd_loss, soften};
use w2s_core::matrix::{argmax, dot, norm, Matrix};
use w2s_core::rng::{Stream, SubRng};
use w2s_core::split::{eighty_percent, split_holdout, split_test_set};
use w2s_core::types::{
    EmbeddingMatrix, LogitMatrix, LogitSource, PrototypeMatrix, Temperature,
};

const FD_H: f64 = 1e-4;
const FD_ATOL: f64 = 1e-8;
const FD_RTOL: f64 = 1e-4;

fn tau(v: f64) -> Temperature {
    Temperature::new(v).unwrap()
}

fn random_matrix(rng: &mut SubRng, rows: usize, cols: usize) -> Matrix {
    let mut m = Matrix::zeros(rows, cols);
    for v in m.as_mut_slice() {
        *v = rng.next_gaussian();
    }
    m
}

struct Instance {
    c: Matrix,
    e: Matrix,
    zw: Matrix,
    tau: Temperature,
}

fn instance(seed: u64) -> Instance {
    let mut rng = SubRng::new(seed, Stream::Init, 1000);
    let k = 2 + rng.bounded(9) as usize; // 2..=10
    let d = 2 + rng.bounded(15) as usize; // 2..=16
    let n = 1 + rng.bounded(32) as usize; // 1..=32
    let t = [0.5, 1.0, 2.0, 4.0][(seed % 4) as usize];
    Instance {
        c: random_matrix(&mut rng, k, d),
        e: random_matrix(&mut rng, n, d),
        zw: random_matrix(&mut rng, n, k),
        tau: tau(t),
    }
}

fn mean_cpl_loss(c: &Matrix, e: &Matrix, zw: &Matrix, t: Temperature) -> f64 {
    let protos = PrototypeMatrix::new(c.clone()).unwrap();
    let mut sum = 0.0;
    for i in 0..e.rows() {
        sum += cpl_loss(&protos, e.row(i), zw.row(i), t).unwrap();
    }
    sum / e.rows() as f64
}

fn analytic_grad(inst: &Instance) -> Matrix {
    let protos = PrototypeMatrix::new(inst.c.clone()).unwrap();
    let emb = EmbeddingMatrix::new(inst.e.clone()).unwrap();
    let zw = LogitMatrix::new(inst.zw.clone(), LogitSource::Weak).unwrap();
    cpl_grad(&protos, &emb, &zw, inst.tau).unwrap()
}

#[test]
fn criterion_01_gradient_matches_finite_differences() {
    let start = Instant::now();
    let mut checked = 0usize;
    let mut worst_rel = 0.0f64;
    for seed in 0..100u64 {
        let inst = instance(seed);
        let g = analytic_grad(&inst);
        for j in 0..inst.c.rows() {
            for s in 0..inst.c.cols() {
                let base = inst.c.get(j, s);
                let mut cp = inst.c.clone();
                cp.set(j, s, base + FD_H);
                let lp = mean_cpl_loss(&cp, &inst.e, &inst.zw, inst.tau);
                cp.set(j, s, base - FD_H);
                let lm = mean_cpl_loss(&cp, &inst.e, &inst.zw, inst.tau);
                let num = (lp - lm) / (2.0 * FD_H);
                let a = g.get(j, s);
                let diff = (a - num).abs();
                let bound = FD_ATOL + FD_RTOL * a.abs().max(num.abs());
                assert!(
                    diff <= bound,
                    "seed {seed} dC[{j}][{s}]: analytic {a:e} vs fd {num:e}"
                );
                let rel = diff / a.abs().max(num.abs()).max(FD_ATOL / FD_RTOL);
                worst_rel = worst_rel.max(rel);
                checked += 1;
            }
        }
    }
    let elapsed = start.elapsed();
    assert!(
        elapsed.as_secs_f64() <= 10.0,
        "took {elapsed:?}, budget 10 s"
    );
    println!(
        "[criterion 01] gradient-vs-finite-differences: PASS \
         ({checked} entries over 100 instances, worst rel {worst_rel:.2e}, {elapsed:?})"
    );
}

#[test]
fn criterion_02_kl_properties_and_oracle() {
    let mut rng = SubRng::new(2, Stream::Init, 2000);
    for case in 0..1000u32 {
        let k = 2 + rng.bounded(9) as usize;
        let t = tau([0.5, 1.0, 2.0, 4.0][(case % 4) as usize]);
        let z_s: Vec<f64> = (0..k).map(|_| 2.0 * rng.next_gaussian()).collect();
        let z_w: Vec<f64> = (0..k).map(|_| 2.0 * rng.next_gaussian()).collect();

        let kd = kd_loss(&z_s, &z_w, t).unwrap();
        assert!(kd >= 0.0, "case {case}: kd {kd}");
        let same = kd_loss(&z_s, &z_s, t).unwrap();
        assert!(same.abs() <= 1e-12, "case {case}: identical kd {same}");

        // Direct-summation oracle: naive softmax, direct p ln(p/q) sum.
        let naive = |z: &[f64]| -> Vec<f64> {
            let s: f64 = z.iter().map(|v| (v / t.value()).exp()).sum();
            z.iter().map(|v| (v / t.value()).exp() / s).collect()
        };
        let pw = naive(&z_w);
        let ps = naive(&z_s);
        let oracle: f64 = pw.iter().zip(&ps).map(|(w, s)| w * (w / s).ln()).sum();
        assert!(
            (kd - oracle).abs() <= 1e-10,
            "case {case}: kd {kd} vs oracle {oracle}"
        );

        // Same properties through the prototype path.
        let d = 2 + rng.bounded(8) as usize;
        let mut c = random_matrix(&mut rng, k, d);
        for j in 0..k {
            if c.row_norm(j) == 0.0 {
                c.set(j, 0, 1.0);
            }
        }
        let protos = PrototypeMatrix::new(c).unwrap();
        let r: Vec<f64> = (0..d).map(|_| rng.next_gaussian()).collect();
        if norm(&r) == 0.0 {
            continue;
        }
        let l = cpl_loss(&protos, &r, &z_w, t).unwrap();
        assert!(l >= 0.0, "case {case}: cpl {l}");
        let z_own = cosine_logits(&protos, &r).unwrap();
        let own = cpl_loss(&protos, &r, &z_own, t).unwrap();
        assert!(own.abs() <= 1e-12, "case {case}: identical cpl {own}");
        let pw = naive(&z_w);
        let ps = naive(&z_own);
        let oracle: f64 = pw.iter().zip(&ps).map(|(w, s)| w * (w / s).ln()).sum();
        assert!(
            (l - oracle).abs() <= 1e-10,
            "case {case}: cpl {l} vs oracle {oracle}"
        );
    }
    println!("[criterion 02] kl-nonnegativity-and-direct-sum-oracle: PASS (1000 pairs)");
}

#[test]
fn criterion_03_gradient_rows_orthogonal_to_prototypes() {
    let mut rows_checked = 0usize;
    for seed in 0..100u64 {
        let inst = instance(seed);
        let g = analytic_grad(&inst);
        for j in 0..inst.c.rows() {
            let d = dot(g.row(j), inst.c.row(j)).abs();
            let bound = 1e-8 * norm(g.row(j)) * norm(inst.c.row(j));
            assert!(
                d <= bound + f64::MIN_POSITIVE,
                "seed {seed} row {j}: |<g,c>| = {d:e} > {bound:e}"
            );
            rows_checked += 1;
        }
    }
    println!(
        "[criterion 03] gradient-prototype-orthogonality: PASS ({rows_checked} rows)"
    );
}

#[test]
fn criterion_04_training_matches_brute_force_oracle() {
    // 50 plain gradient-descent steps on a full batch; the analytic-
    // gradient trajectory must match an independent scalar-loop trainer
    // with finite-difference gradients to 1e-6 per-step loss agreement.
    let start = Instant::now();
    let (n, k, d) = (32usize, 3usize, 4usize);
    let mut rng = SubRng::new(0, Stream::Init, 4000);
    let c0 = random_matrix(&mut rng, k, d);
    let e = random_matrix(&mut rng, n, d);
    let zw = random_matrix(&mut rng, n, k);
    let t = 2.0;
    let lr = 0.1;

    // Scalar-loop oracle: own cosine, own softmax, own KL, FD gradient.
    let oracle_loss = |c: &[Vec<f64>]| -> f64 {
        let mut total = 0.0;
        for i in 0..n {
            let x = e.row(i);
            let xn = (x.iter().map(|v| v * v).sum::<f64>()).sqrt();
            let mut zs = vec![0.0f64; k];
            for j in 0..k {
                let mut dot_cx = 0.0;
                let mut cn = 0.0;
                for s in 0..d {
                    dot_cx += c[j][s] * x[s];
                    cn += c[j][s] * c[j][s];
                }
                zs[j] = dot_cx / (cn.sqrt() * xn);
            }
            let soft = |z: &[f64]| -> Vec<f64> {
                let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let mut sum = 0.0;
                let mut out = vec![0.0; z.len()];
                for (o, v) in out.iter_mut().zip(z) {
                    *o = ((v - m) / t).exp();
                    sum += *o;
                }
                for o in out.iter_mut() {
                    *o /= sum;
                }
                out
            };
            let pw = soft(zw.row(i));
            let ps = soft(&zs);
            for j in 0..k {
                if pw[j] > 0.0 {
                    total += pw[j] * (pw[j] / ps[j]).ln();
                }
            }
        }
        total / n as f64
    };

    let mut c_analytic = c0.clone();
    let mut c_oracle: Vec<Vec<f64>> = (0..k).map(|j| c0.row(j).to_vec()).collect();
    let tt = tau(t);
    let mut worst = 0.0f64;
    for step in 0..50 {
        let protos = PrototypeMatrix::new(c_analytic.clone()).unwrap();
        let emb = EmbeddingMatrix::new(e.clone()).unwrap();
        let logits = LogitMatrix::new(zw.clone(), LogitSource::Weak).unwrap();
        let loss_analytic = mean_cpl_loss(&c_analytic, &e, &zw, tt);
        let loss_oracle = oracle_loss(&c_oracle);
        let diff = (loss_analytic - loss_oracle).abs();
        worst = worst.max(diff);
        assert!(
            diff <= 1e-6,
            "step {step}: analytic {loss_analytic} vs oracle {loss_oracle}"
        );

        let g = cpl_grad(&protos, &emb, &logits, tt).unwrap();
        for j in 0..k {
            for s in 0..d {
                c_analytic.set(j, s, c_analytic.get(j, s) - lr * g.get(j, s));
            }
        }
        let h = 1e-4;
        let mut g_fd = vec![vec![0.0f64; d]; k];
        for (j, row) in g_fd.iter_mut().enumerate() {
            for (s, slot) in row.iter_mut().enumerate() {
                let base = c_oracle[j][s];
                c_oracle[j][s] = base + h;
                let lp = oracle_loss(&c_oracle);
                c_oracle[j][s] = base - h;
                let lm = oracle_loss(&c_oracle);
                c_oracle[j][s] = base;
                *slot = (lp - lm) / (2.0 * h);
            }
        }
        for j in 0..k {
            for s in 0..d {
                c_oracle[j][s] -= lr * g_fd[j][s];
            }
        }
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() <= 5.0, "took {elapsed:?}, budget 5 s");
    println!(
        "[criterion 04] oracle-equivalent-training: PASS \
         (50 steps, worst per-step loss gap {worst:.2e}, {elapsed:?})"
    );
}

/// Golden seed-averaged accuracies on the untouched test subset, frozen
/// from the reference run: (domain, weak, cpl, ce, ceiling).
const C5_GOLDEN: [(&str, f64, f64, f64, f64); 4] = [
    ("easy", 0.759, 1.0, 0.985, 1.0),
    ("medium", 0.768, 1.0, 0.983, 1.0),
    ("hard", 0.609, 1.0, 0.914, 1.0),
    ("average", 0.7120000000000001, 1.0, 0.9606666666666667, 1.0),
];

#[test]
fn criterion_05_weak_to_strong_ordering_on_default_benchmark() {
    let start = Instant::now();
    let spec = SyntheticSpec::desk_default();
    let cfgs = PipelineConfigs::desk_default();
    let methods = [w2s_core::loss::LossKind::Cpl, w2s_core::loss::LossKind::Ce];
    let seeds: Vec<u64> = (0..5).collect();
    let mut runs = Vec::new();
    for di in 0..spec.domains.len() {
        let data = generate_domain(&spec, di).unwrap();
        for &seed in &seeds {
            runs.push(run_pipeline(&data, &methods, &cfgs, seed).unwrap());
        }
    }
    let names: Vec<String> = spec.domains.iter().map(|d| d.name.clone()).collect();
    let report = RunReport::from_runs(&names, &seeds, &methods, runs).unwrap();

    // Ordering on the untouched test subset, averaged over seeds and
    // domains.
    let avg = &report.average;
    let weak = avg.weak.dtest_prime;
    let cpl = avg.methods["cpl"].dtest_prime;
    let ce = avg.methods["ce"].dtest_prime;
    let ceiling = avg.ceiling.dtest_prime;
    assert!(weak < cpl, "weak {weak} !< cpl {cpl}");
    assert!(cpl <= ceiling + 0.02, "cpl {cpl} > ceiling {ceiling} + 0.02");
    assert!(ce <= cpl, "ce {ce} > cpl {cpl}");

    // Frozen golden means from the reference run.
    for (domain, g_weak, g_cpl, g_ce, g_ceiling) in C5_GOLDEN {
        let row = if domain == "average" {
            &report.average
        } else {
            report
                .rows
                .iter()
                .find(|r| r.domain == domain)
                .expect("domain present")
        };
        for (name, got, expect) in [
            ("weak", row.weak.dtest_prime, g_weak),
            ("cpl", row.methods["cpl"].dtest_prime, g_cpl),
            ("ce", row.methods["ce"].dtest_prime, g_ce),
            ("ceiling", row.ceiling.dtest_prime, g_ceiling),
        ] {
            assert!(
                (got - expect).abs() <= 1e-12,
                "{domain}/{name}: {got} vs golden {expect}"
            );
        }
    }

    // Ceiling dominance on every seed (0.02 finite-sample allowance).
    for run in &report.runs {
        for (m, acc) in &run.methods {
            assert!(
                run.ceiling.dtest_prime >= acc.dtest_prime - 0.02,
                "seed {} domain {}: ceiling {} vs {m} {}",
                run.seed,
                run.domain,
                run.ceiling.dtest_prime,
                acc.dtest_prime
            );
        }
    }

    // Monotone difficulty: doubling the noise multiplier cannot raise
    // the seed-averaged ceiling by more than noise.
    let row = |name: &str| report.rows.iter().find(|r| r.domain == name).unwrap();
    assert!(
        row("hard").ceiling.dtest_prime <= row("easy").ceiling.dtest_prime + 0.02,
        "difficulty not monotone"
    );

    let elapsed = start.elapsed();
    assert!(
        elapsed.as_secs_f64() <= 120.0,
        "took {elapsed:?}, budget 2 min"
    );
    println!(
        "[criterion 05] weak-to-strong-ordering: PASS \
         (weak {weak:.4} < cpl {cpl:.4} <= ceiling {ceiling:.4} + 0.02, ce {ce:.4}, {elapsed:?})"
    );
}

#[test]
fn criterion_06_ceiling_sanity_on_noiseless_benchmark() {
    let spec = SyntheticSpec::noiseless(10, 32, 32, 400, 200);
    let cfgs = PipelineConfigs::desk_default();
    let data = generate_domain(&spec, 0).unwrap();
    for seed in 0..5u64 {
        let run = run_pipeline(&data, &[w2s_core::loss::LossKind::Cpl], &cfgs, seed).unwrap();
        assert!(
            run.ceiling.dtest_prime >= 0.99,
            "seed {seed}: ceiling {}",
            run.ceiling.dtest_prime
        );
    }
    println!("[criterion 06] ceiling-sanity: PASS (>= 0.99 on seeds 0-4, 10 epochs)");
}

#[test]
fn criterion_07_split_protocol_exactness() {
    for n in [5usize, 10, 13, 17, 100, 997, 1000] {
        for seed in [0u64, 1, 42] {
            let a = split_holdout(split_test_set(n, seed).unwrap(), seed).unwrap();
            let b = split_holdout(split_test_set(n, seed).unwrap(), seed).unwrap();
            assert_eq!(a.to_json(), b.to_json(), "plan not reproducible");
            assert_eq!(a.hold.len(), eighty_percent(n));
            assert_eq!(a.test_prime.len(), n - eighty_percent(n));
            assert_eq!(a.strong_train.len(), eighty_percent(a.hold.len()));
            assert_eq!(
                a.strong_val.len(),
                a.hold.len() - eighty_percent(a.hold.len())
            );
            let mut union: Vec<usize> = a
                .strong_train
                .iter()
                .chain(a.strong_val.iter())
                .cloned()
                .collect();
            union.sort_unstable();
            assert_eq!(union, a.hold, "stage 2 must partition the holdout");
            let mut all: Vec<usize> =
                a.hold.iter().chain(a.test_prime.iter()).cloned().collect();
            all.sort_unstable();
            assert_eq!(all, (0..n).collect::<Vec<_>>(), "stage 1 must partition");
            for i in &a.test_prime {
                assert!(!a.hold.contains(i));
                assert!(!a.strong_train.contains(i));
                assert!(!a.strong_val.contains(i));
            }
        }
    }
    println!("[criterion 07] split-protocol-exactness: PASS (sizes, disjointness, reproducibility)");
}

#[test]
fn criterion_08_format_round_trip_and_corruption() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = SubRng::new(8, Stream::Init, 8000);

    // 1000 random matrices with f32-representable values round-trip
    // bit-identically.
    let mpath = dir.path().join("m.w2sm");
    for case in 0..1000u32 {
        let rows = 1 + rng.bounded(6) as usize;
        let cols = 1 + rng.bounded(6) as usize;
        let vals: Vec<f64> = (0..rows * cols)
            .map(|_| (rng.next_gaussian() as f32) as f64)
            .collect();
        let m = Matrix::from_vec(rows, cols, vals).unwrap();
        write_matrix(&mpath, &m).unwrap();
        let m2 = read_matrix(&mpath).unwrap();
        let bits = |m: &Matrix| -> Vec<u64> {
            m.as_slice().iter().map(|v| v.to_bits()).collect()
        };
        assert_eq!(bits(&m), bits(&m2), "case {case}");
    }

    // 1000 random label files round-trip exactly.
    let lpath = dir.path().join("l.w2sl");
    for case in 0..1000u32 {
        let classes = 2 + rng.bounded(9) as usize;
        let names: Vec<String> = (0..classes).map(|i| format!("class_{i}")).collect();
        let count = rng.bounded(40) as usize;
        let labels: Vec<u32> = (0..count)
            .map(|_| rng.bounded(classes as u64) as u32)
            .collect();
        write_labels(&lpath, &labels, &names).unwrap();
        let (l2, n2) = read_labels(&lpath).unwrap();
        assert_eq!(labels, l2, "case {case}");
        assert_eq!(names, n2, "case {case}");
    }

    // Three corruption classes yield three distinct errors.
    let m = Matrix::from_vec(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
    write_matrix(&mpath, &m).unwrap();
    let good = fs::read(&mpath).unwrap();

    let mut bad = good.clone();
    bad[0] ^= 0xFF;
    fs::write(&mpath, &bad).unwrap();
    assert!(matches!(
        read_matrix(&mpath),
        Err(DataError::BadMagic { .. })
    ));

    let mut bad = good.clone();
    bad[4] = 2;
    fs::write(&mpath, &bad).unwrap();
    assert!(matches!(
        read_matrix(&mpath),
        Err(DataError::BadVersion { found: 2, .. })
    ));

    fs::write(&mpath, &good[..good.len() - 1]).unwrap();
    assert!(matches!(
        read_matrix(&mpath),
        Err(DataError::Truncated { .. })
    ));

    println!(
        "[criterion 08] format-round-trip: PASS \
         (1000 matrices + 1000 label files bit-identical; 3 distinct corruption errors)"
    );
}

#[test]
fn criterion_09_bench_command_is_byte_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let spec_path = tmp.path().join("spec.json");
    fs::write(
        &spec_path,
        r#"{
  "k": 5, "d_s": 16, "d_w": 8,
  "n_train": 150, "n_test": 100,
  "sigma_s": 0.3, "sigma_w": 0.5,
  "seed": 3,
  "domains": [{"name": "a", "sigma_scale": 1.0}, {"name": "b", "sigma_scale": 1.5}]
}"#,
    )
    .unwrap();
    for out in ["r1", "r2"] {
        let status = Command::new(env!("CARGO_BIN_EXE_w2s"))
            .args([
                "bench",
                "--spec",
                spec_path.to_str().unwrap(),
                "--methods",
                "cpl,ce",
                "--seeds",
                "0..1",
                "--out",
                out,
            ])
            .current_dir(tmp.path())
            .status()
            .unwrap();
        assert!(status.success());
    }
    let compare = |rel: &str| {
        let a = fs::read(tmp.path().join("r1").join(rel)).unwrap();
        let b = fs::read(tmp.path().join("r2").join(rel)).unwrap();
        assert_eq!(a, b, "{rel} differs between runs");
    };
    compare("report.csv");
    compare("report.json");
    let mut curve_names: Vec<String> = fs::read_dir(tmp.path().join("r1/curves"))
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    curve_names.sort();
    assert_eq!(curve_names.len(), 2 * 3 * 2); // domains x (methods + ceiling) x seeds
    for name in &curve_names {
        compare(&format!("curves/{name}"));
    }
    println!(
        "[criterion 09] bench-determinism: PASS (report.csv, report.json, {} curve files)",
        curve_names.len()
    );
}

#[test]
fn criterion_10_argmax_scale_and_shift_invariances() {
    let mut rng = SubRng::new(10, Stream::Init, 10_000);

    // Temperature never changes the argmax (ties excluded).
    for case in 0..1000u32 {
        let k = 2 + rng.bounded(9) as usize;
        let z: Vec<f64> = (0..k).map(|_| rng.next_gaussian()).collect();
        let mut sorted = z.clone();
        sorted.sort_by(f64::total_cmp);
        if sorted[k - 1] - sorted[k - 2] <= 1e-12 {
            continue; // measure-zero tie
        }
        for t in [0.5, 1.0, 2.0, 4.0, 1e6] {
            assert_eq!(
                argmax(&soften(&z, tau(t))),
                argmax(&z),
                "case {case} tau {t}"
            );
        }
    }

    // Cosine logits are invariant to positive rescaling of embeddings.
    for case in 0..1000u32 {
        let k = 2 + rng.bounded(4) as usize;
        let d = 2 + rng.bounded(6) as usize;
        let mut c = random_matrix(&mut rng, k, d);
        for j in 0..k {
            if c.row_norm(j) == 0.0 {
                c.set(j, 0, 1.0);
            }
        }
        let protos = PrototypeMatrix::new(c).unwrap();
        let r: Vec<f64> = (0..d).map(|_| rng.next_gaussian()).collect();
        if norm(&r) == 0.0 {
            continue;
        }
        let scale = (rng.next_f64() * 6.0 - 3.0).exp(); // e^-3 .. e^3
        let scaled: Vec<f64> = r.iter().map(|v| v * scale).collect();
        let z1 = cosine_logits(&protos, &r).unwrap();
        let z2 = cosine_logits(&protos, &scaled).unwrap();
        for (a, b) in z1.iter().zip(&z2) {
            assert!((a - b).abs() <= 1e-12, "case {case}: {a} vs {b}");
        }
    }

    // Softmax shift invariance.
    for case in 0..1000u32 {
        let k = 2 + rng.bounded(9) as usize;
        let t = tau([0.5, 1.0, 2.0, 4.0][(case % 4) as usize]);
        let z: Vec<f64> = (0..k).map(|_| 3.0 * rng.next_gaussian()).collect();
        let shift = 5.0 * rng.next_gaussian();
        let p = soften(&z, t);
        let q = soften(&z.iter().map(|v| v + shift).collect::<Vec<_>>(), t);
        for (a, b) in p.iter().zip(&q) {
            assert!((a - b).abs() <= 1e-12, "case {case}: {a} vs {b}");
        }
    }

    println!(
        "[criterion 10] argmax/scale/shift-invariances: PASS (1000 instances each, 0 violations)"
    );
}
