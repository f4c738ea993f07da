//! Acceptance gate: runs every criterion at its stated tolerance and prints
//! one PASS / FAIL / SKIP line each. Exits nonzero if any criterion fails.
//!
//! `UNIGRAPH_DATA_DIR` points at a directory holding `MUTAG/` in TU format
//! for criterion 8. `UNIGRAPH_ACCEPTANCE=1,4` runs a subset.

use std::path::PathBuf;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use unigraph::autodiff::{grad_check, Axis, RunningStats, Tape, Var};
use unigraph::data::mutag::cycle_rule_accuracy;
use unigraph::data::synth::{random_graph, synth_cycles_vs_cliques, synth_stars_vs_paths};
use unigraph::data::tu::load_tu;
use unigraph::data::Dataset;
use unigraph::decoder::{total_loss, LossInputs, LossToggles, LossWeights};
use unigraph::eigen::eigendecompose;
use unigraph::encoder::{prepare_dataset, prepare_graph, Batch, EncoderConfig, InputFilter};
use unigraph::graph::{
    gaussian_features_stream, normalized_adjacency, normalized_laplacian, permute, spectral_node_features, Graph,
};
use unigraph::kernels::fgsd::spectral_distances;
use unigraph::kernels::sp::sp_features;
use unigraph::kernels::wl::wl_features;
use unigraph::kernels::{feature_vectors, kernel_matrix, KernelConfig, KernelKind, KernelSet};
use unigraph::matrix::{Matrix, SparseMatrix};
use unigraph::model::Model;
use unigraph::params::Session;
use unigraph::rng;
use unigraph::train::{
    ablation, ablation_variants, cross_validate, fold_assignment, fold_splits, pretrain, PretrainData, TrainConfig,
};

enum Verdict {
    Pass(String),
    Fail(String),
    Skip(String),
}

type Outcome = unigraph::Result<Verdict>;

fn check(ok: bool, detail: String) -> Verdict {
    if ok {
        Verdict::Pass(detail)
    } else {
        Verdict::Fail(detail)
    }
}

fn random(rows: usize, cols: usize, r: &mut rng::Rng) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| StandardNormal.sample(r))
}

fn probs(rows: usize, cols: usize, r: &mut rng::Rng) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| r.random_range(0.05..0.95))
}

// 1. Gradient fidelity.

/// Lets the op table mix fallible and infallible tape methods.
trait IntoResult {
    fn into_result(self) -> unigraph::Result<Var>;
}

impl IntoResult for Var {
    fn into_result(self) -> unigraph::Result<Var> {
        Ok(self)
    }
}

impl IntoResult for unigraph::Result<Var> {
    fn into_result(self) -> unigraph::Result<Var> {
        self
    }
}

type OpFn = Box<dyn Fn(&mut Tape, &[Var]) -> unigraph::Result<Var>>;

/// Every differentiable op, each reduced to a scalar by an MSE against a
/// fixed random target so all output entries carry distinct weights.
fn op_cases(r: &mut rng::Rng) -> Vec<(&'static str, OpFn, Vec<Matrix>)> {
    let filter = std::sync::Arc::new(SparseMatrix::from_dense(&unigraph::graph::conv_filter(&Graph::cycle(
        4,
    ))));
    let mut cases: Vec<(&'static str, OpFn, Vec<Matrix>)> = Vec::new();
    macro_rules! case {
        ($name:expr, $inputs:expr, |$t:ident, $v:ident| $body:expr) => {{
            let target_seed: u64 = r.random();
            cases.push((
                $name,
                Box::new(move |$t: &mut Tape, $v: &[Var]| {
                    let out: unigraph::Result<Var> = $body.into_result();
                    let out = out?;
                    let [rows, cols] = $t.shape(out);
                    let target = random(rows, cols, &mut rng::seeded(target_seed));
                    $t.mse(out, &target)
                }),
                $inputs,
            ));
        }};
    }
    case!("matmul", vec![random(4, 3, r), random(3, 3, r)], |t, v| t
        .matmul(v[0], v[1]));
    let f = filter.clone();
    case!("sparse_matmul", vec![random(4, 3, r)], |t, v| t.sparse_matmul(&f, v[0]));
    case!("add", vec![random(4, 3, r), random(4, 3, r)], |t, v| t.add(v[0], v[1]));
    case!("add_row", vec![random(4, 3, r), random(1, 3, r)], |t, v| t
        .add_row(v[0], v[1]));
    case!("scalar_mul", vec![random(4, 3, r)], |t, v| t.scalar_mul(v[0], -1.7));
    case!("pow2", vec![random(4, 3, r)], |t, v| t.pow(v[0], 2));
    case!("pow3", vec![random(4, 3, r)], |t, v| t.pow(v[0], 3));
    case!("sigmoid", vec![random(4, 3, r)], |t, v| t.sigmoid(v[0]));
    case!("relu", vec![random(4, 3, r)], |t, v| t.relu(v[0]));
    case!("concat_cols", vec![random(4, 1, r), random(4, 2, r)], |t, v| t
        .concat(&[v[0], v[1]], Axis::Cols));
    case!("concat_rows", vec![random(1, 3, r), random(3, 3, r)], |t, v| t
        .concat(&[v[0], v[1]], Axis::Rows));
    case!("transpose", vec![random(3, 4, r)], |t, v| t.transpose(v[0]));
    case!(
        "bilinear",
        vec![random(4, 3, r), random(3, 3, r), random(5, 3, r)],
        |t, v| t.bilinear(v[0], v[1], v[2])
    );
    case!("slice_rows", vec![random(6, 3, r)], |t, v| t.slice_rows(v[0], 1, 5));
    case!("softmax", vec![random(4, 3, r)], |t, v| t.softmax(v[0]));
    case!("sum_axis", vec![random(4, 3, r)], |t, v| t.sum_axis(v[0], Axis::Rows));
    case!("mean_axis", vec![random(4, 3, r)], |t, v| t.mean_axis(v[0], Axis::Cols));
    case!("sum", vec![random(4, 3, r)], |t, v| t.sum(v[0]));
    case!("mean", vec![random(4, 3, r)], |t, v| t.mean(v[0]));
    case!("batch_norm", vec![random(5, 3, r)], |t, v| t.batch_norm(
        v[0],
        &mut RunningStats::new(3),
        true
    ));
    case!("dropout", vec![random(4, 3, r)], |t, v| t.dropout(v[0], 0.3, true));
    let target = probs(4, 3, r);
    let labels = vec![0usize, 2, 1, 2];
    cases.push((
        "bce",
        Box::new(move |t, v| {
            let p = t.sigmoid(v[0]);
            t.bce(p, &target)
        }),
        vec![random(4, 3, r)],
    ));
    let target = probs(4, 3, r);
    cases.push((
        "bce_with_logits",
        Box::new(move |t, v| t.bce_with_logits(v[0], &target)),
        vec![random(4, 3, r)],
    ));
    cases.push((
        "softmax_cross_entropy",
        Box::new(move |t, v| t.softmax_cross_entropy(v[0], &labels)),
        vec![random(4, 3, r)],
    ));
    cases
}

fn pipeline_error(toggles: LossToggles, seed: u64) -> unigraph::Result<f64> {
    let cfg = EncoderConfig {
        hidden: 3,
        layers: 2,
        moments: 2,
        mlp_depth: 2,
        dropout: 0.2,
        encoder_dropout: 0.2,
        gaussian_dim: 2,
        input_filter: InputFilter::Auto,
    };
    let mut model = Model::new(cfg.clone(), &KernelKind::ALL, seed)?;
    let graphs = [Graph::cycle(5), Graph::star(4), Graph::path(6)];
    let ds = Dataset::from_raw_labels("d", graphs.to_vec(), &[0, 1, 1])?;
    model.register(&ds)?;
    let prepared = graphs
        .iter()
        .enumerate()
        .map(|(i, g)| prepare_graph(g, &cfg, seed, i as u64))
        .collect::<unigraph::Result<Vec<_>>>()?;
    let batch = Batch::new(&prepared, &[0, 1, 2], Some(&ds.labels))?;
    let ks = KernelSet::compute(&ds.graphs, &KernelKind::ALL, &KernelConfig::default())?;
    let slices = ks.slices(&[0, 1, 2])?;
    let input = model.input_mlp("d")?;
    let head = model.head("d")?;
    let kinds = KernelKind::ALL;
    let names: Vec<String> = {
        let mut tape = Tape::new(seed);
        let mut s = Session::new(&mut tape, &mut model.params, true);
        let out = model.encoder.encode(&mut s, &input, &batch)?;
        let li = LossInputs {
            out,
            batch: &batch,
            slices: &slices,
            kinds: &kinds,
            head: Some(&head),
            dropout: 0.2,
        };
        total_loss(&mut s, &li, &LossWeights::default(), &toggles)?;
        s.bound()
            .keys()
            .filter(|n| s.store().is_trainable(n))
            .cloned()
            .collect()
    };
    let values: Vec<Matrix> = names
        .iter()
        .map(|n| model.params.get(n).expect("bound").clone())
        .collect();
    let store = model.params.clone();
    grad_check(
        |tape, vars| {
            let mut params = store.clone();
            let mut s = Session::new(tape, &mut params, true);
            for (n, &v) in names.iter().zip(vars) {
                s.bind(n, v);
            }
            let out = model.encoder.encode(&mut s, &input, &batch)?;
            let li = LossInputs {
                out,
                batch: &batch,
                slices: &slices,
                kinds: &kinds,
                head: Some(&head),
                dropout: 0.2,
            };
            Ok(total_loss(&mut s, &li, &LossWeights::default(), &toggles)?.total)
        },
        &values,
        1e-6,
        seed,
    )
}

fn criterion_1() -> Outcome {
    let mut r = rng::seeded(1);
    let mut worst_op = (0.0f64, "");
    for trial in 0..5 {
        for (name, f, inputs) in op_cases(&mut r) {
            let err = grad_check(|t, v| f(t, v), &inputs, 1e-6, trial)?;
            if err > worst_op.0 {
                worst_op = (err, name);
            }
        }
    }
    let mut worst_pipe = (0.0f64, "");
    for (i, (name, t)) in [
        (
            "adjacency",
            LossToggles {
                adjacency: true,
                kernel_unsup: false,
                adaptive: false,
                class: false,
            },
        ),
        (
            "kernel_unsup",
            LossToggles {
                adjacency: false,
                kernel_unsup: true,
                adaptive: false,
                class: false,
            },
        ),
        (
            "adaptive",
            LossToggles {
                adjacency: false,
                kernel_unsup: false,
                adaptive: true,
                class: false,
            },
        ),
        (
            "class",
            LossToggles {
                adjacency: false,
                kernel_unsup: false,
                adaptive: false,
                class: true,
            },
        ),
    ]
    .into_iter()
    .enumerate()
    {
        let err = pipeline_error(t, i as u64)?;
        if err > worst_pipe.0 {
            worst_pipe = (err, name);
        }
    }
    Ok(check(
        worst_op.0 < 1e-5 && worst_pipe.0 < 1e-4,
        format!(
            "max op error {:.2e} ({}), max pipeline error {:.2e} ({})",
            worst_op.0, worst_op.1, worst_pipe.0, worst_pipe.1
        ),
    ))
}

// 2. Permutation invariance.

fn criterion_2() -> Outcome {
    let cfg = EncoderConfig {
        hidden: 8,
        layers: 3,
        dropout: 0.0,
        input_filter: InputFilter::Laplacian,
        ..EncoderConfig::default()
    };
    let kcfg = KernelConfig::default();
    let mut worst_z = 0.0f64;
    let mut worst_k = 0.0f64;
    let mut r = rng::seeded(2);
    for gi in 0..20u64 {
        let n = r.random_range(3..9);
        let g = random_graph(n, 0.45, 100 + gi);
        let x = gaussian_features_stream(n, 4, 0.5, 7, gi)?;
        let g = g.with_features(x)?;
        let mut copies = vec![g.clone()];
        for _ in 0..5 {
            let mut perm: Vec<usize> = (0..n).collect();
            perm.shuffle(&mut r);
            copies.push(permute(&g, &perm)?);
        }
        let ds = Dataset::from_raw_labels("perm", copies.clone(), &vec![0; copies.len()])?;
        let mut model = Model::new(cfg.clone(), &KernelKind::ALL, gi)?;
        model.register(&ds)?;
        let prepared = prepare_dataset(&ds, &cfg, 0)?;
        let (z, _) = model.embed("perm", &prepared, &(0..copies.len()).collect::<Vec<_>>())?;
        for c in 1..copies.len() {
            for j in 0..z.cols() {
                worst_z = worst_z.max((z[(0, j)] - z[(c, j)]).abs());
            }
        }
        for kind in KernelKind::ALL {
            let (vecs, _) = feature_vectors(&copies, kind, &kcfg)?;
            for v in &vecs[1..] {
                if v.len() != vecs[0].len() || v.iter().zip(&vecs[0]).any(|(a, b)| a.0 != b.0) {
                    worst_k = f64::INFINITY;
                    continue;
                }
                for (a, b) in v.iter().zip(&vecs[0]) {
                    worst_k = worst_k.max((a.1 - b.1).abs());
                }
            }
        }
    }
    Ok(check(
        worst_z < 1e-6 && worst_k < 1e-6,
        format!("max |Δz| {worst_z:.2e}, max kernel feature difference {worst_k:.2e} (20 graphs × 5 permutations)"),
    ))
}

// 3. Kernel oracles.

fn criterion_3() -> Outcome {
    let k2 = Graph::complete(2).with_node_labels(vec![1, 1])?;
    let wl = wl_features(&k2, 1);
    let wl_self: u64 = wl.values().map(|c| c * c).sum();
    let sp = sp_features(&Graph::path(3).with_node_labels(vec![0, 0, 0])?);
    let sp_expected = [((0, 0, 1), 2u64), ((0, 0, 2), 1)]
        .into_iter()
        .collect::<std::collections::BTreeMap<_, _>>();
    let fgsd = spectral_distances(&Graph::complete(2), Default::default())?[1].unwrap_or(f64::NAN);
    let kcfg = KernelConfig::default();
    let graphs: Vec<Graph> = (0..20).map(|i| random_graph(4 + i % 5, 0.4, 300 + i as u64)).collect();
    let mut min_eig = f64::INFINITY;
    for kind in KernelKind::ALL {
        min_eig = min_eig.min(kernel_matrix(&graphs, kind, &kcfg)?.min_eigenvalue()?);
    }
    let ok = wl_self == 8 && sp == sp_expected && (fgsd - 1.0).abs() < 1e-12 && min_eig >= -1e-8;
    Ok(check(
        ok,
        format!("WL K2 self-kernel {wl_self}, SP(P3) {sp:?}, FGSD(K2) {fgsd}, min eigenvalue {min_eig:.2e}"),
    ))
}

// 4. Separation beyond WL.

fn criterion_4() -> Outcome {
    let two_triangles = Graph::disjoint_union(&[Graph::complete(3), Graph::complete(3)])?;
    let c6 = Graph::cycle(6);
    let pair = [two_triangles.clone(), c6.clone()];
    let kcfg = KernelConfig::default();
    let wl = kernel_matrix(&pair, KernelKind::Wl, &kcfg)?.get(0, 1);
    let fgsd = kernel_matrix(&pair, KernelKind::Fgsd, &kcfg)?.get(0, 1);
    let k = 3;
    let with = |g: &Graph| -> unigraph::Result<Graph> { g.clone().with_features(spectral_node_features(g, k)?) };
    let ds = Dataset::from_raw_labels("pair", vec![with(&two_triangles)?, with(&c6)?], &[0, 1])?;
    let cfg = EncoderConfig {
        hidden: 8,
        layers: 3,
        ..EncoderConfig::default()
    };
    let mut model = Model::new(cfg.clone(), &KernelKind::ALL, 11)?;
    model.register(&ds)?;
    let prepared = prepare_dataset(&ds, &cfg, 0)?;
    let (z, _) = model.embed("pair", &prepared, &[0, 1])?;
    let dz = z.slice_rows(0, 1).sub(&z.slice_rows(1, 2))?.frobenius_norm();
    Ok(check(
        wl == 1.0 && fgsd < 1.0 && dz > 1e-3,
        format!("WL entry {wl}, FGSD entry {fgsd:.6}, ‖z1 − z2‖ {dz:.4e}"),
    ))
}

// 5. Gaussian feature covariance.

fn criterion_5() -> Outcome {
    let g = Graph::new(6, [(0, 1), (1, 2), (2, 0), (2, 3), (3, 4), (4, 5)])?;
    let n = g.node_count();
    let d = 16;
    let sigma = 1.0 / (d as f64).sqrt();
    let filter = normalized_laplacian(&g);
    let m = 20_000;
    let mut acc = Matrix::zeros(n, n);
    for s in 0..m {
        let x = gaussian_features_stream(n, d, sigma, 5, s)?;
        let fx = filter.matmul(&x)?;
        acc = acc.add(&fx.matmul(&fx.transpose())?)?;
    }
    let est = acc.scale(1.0 / m as f64);
    // E[X Xᵀ] = d σ² I, so the expectation is d σ² f(L)².
    let target = filter.matmul(&filter)?.scale(d as f64 * sigma * sigma);
    let rel = est.sub(&target)?.frobenius_norm() / target.frobenius_norm();
    Ok(check(
        rel < 0.05,
        format!("relative Frobenius error {rel:.4} at M = {m}, n = {n}"),
    ))
}

// 6. Spectral radius of the normalized adjacency.

fn criterion_6() -> Outcome {
    let mut worst = 0.0f64;
    let mut r = rng::seeded(6);
    for i in 0..100u64 {
        let n = r.random_range(2..13);
        let p = r.random_range(0.1..0.9);
        let g = random_graph(n, p, 600 + i);
        let ev = eigendecompose(&normalized_adjacency(&g))?.eigenvalues;
        worst = worst.max(ev.iter().fold(0.0f64, |a, &l| a.max(l.abs())));
    }
    Ok(check(
        worst <= 1.0 + 1e-8,
        format!("largest |eigenvalue| {worst:.12} over 100 graphs"),
    ))
}

// 7. End-to-end learning.

fn criterion_7() -> Outcome {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .expect("thread pool");
    let start = Instant::now();
    let report = pool.install(|| -> unigraph::Result<_> {
        let ds = synth_cycles_vs_cliques(200, (4, 12), 7);
        let enc = EncoderConfig::default();
        let cfg = TrainConfig {
            epoch_cap: Some(200),
            ..TrainConfig::default()
        };
        let prepared = prepare_dataset(&ds, &enc, cfg.seed)?;
        let kernels = KernelSet::compute(&ds.graphs, &KernelKind::ALL, &KernelConfig::default())?;
        let mut template = Model::new(enc, &KernelKind::ALL, cfg.seed)?;
        template.register(&ds)?;
        cross_validate(
            &template,
            &ds.name,
            &prepared,
            &ds.labels,
            Some(&kernels),
            10,
            &cfg,
            |_| {},
        )
    })?;
    let elapsed = start.elapsed();
    let accs: Vec<String> = report
        .result
        .fold_accuracies
        .iter()
        .map(|a| format!("{a:.2}"))
        .collect();
    Ok(check(
        report.result.mean >= 0.95 && elapsed < Duration::from_secs(600),
        format!(
            "mean accuracy {:.4} ± {:.4} [{}] in {:.1} s single-threaded",
            report.result.mean,
            report.result.std,
            accs.join(", "),
            elapsed.as_secs_f64()
        ),
    ))
}

// 8. Cycle-count rule on MUTAG.

fn criterion_8() -> Outcome {
    let Some(dir) = std::env::var_os("UNIGRAPH_DATA_DIR").map(PathBuf::from) else {
        return Ok(Verdict::Skip("UNIGRAPH_DATA_DIR not set; MUTAG unavailable".into()));
    };
    let mutag = dir.join("MUTAG");
    if !mutag.join("MUTAG_A.txt").exists() {
        return Ok(Verdict::Skip(format!("{} has no MUTAG files", mutag.display())));
    }
    let ds = load_tu(&mutag, "MUTAG")?;
    let acc = cycle_rule_accuracy(&ds);
    Ok(check(
        (0.80..=0.88).contains(&acc),
        format!("rule accuracy {acc:.4} on {} graphs", ds.len()),
    ))
}

// 9. Transfer learning smoke run.

fn small_cfg() -> (EncoderConfig, TrainConfig) {
    let enc = EncoderConfig {
        hidden: 16,
        layers: 3,
        ..EncoderConfig::default()
    };
    let cfg = TrainConfig {
        max_epoch: 60,
        batch_size: 16,
        patience: 10,
        seed: 9,
        ..TrainConfig::default()
    };
    (enc, cfg)
}

fn transfer_run() -> unigraph::Result<(f64, f64)> {
    let (enc, cfg) = small_cfg();
    let a = synth_stars_vs_paths(60, (4, 10), 1);
    let b = synth_cycles_vs_cliques(60, (4, 10), 2);
    let kc = KernelConfig::default();
    let (pa, pb) = (
        prepare_dataset(&a, &enc, cfg.seed)?,
        prepare_dataset(&b, &enc, cfg.seed)?,
    );
    let (ka, kb) = (
        KernelSet::compute(&a.graphs, &KernelKind::ALL, &kc)?,
        KernelSet::compute(&b.graphs, &KernelKind::ALL, &kc)?,
    );
    let mut pretrained = Model::new(enc.clone(), &KernelKind::ALL, cfg.seed)?;
    pretrained.register(&a)?;
    let data = [PretrainData {
        name: &a.name,
        prepared: &pa,
        kernels: Some(&ka),
        labels: None,
    }];
    pretrain(&mut pretrained, &data, &cfg, |_| {})?;
    pretrained.register(&b)?;
    let mut fresh = Model::new(enc, &KernelKind::ALL, cfg.seed)?;
    fresh.register(&b)?;
    let run = |m: &Model| cross_validate(m, &b.name, &pb, &b.labels, Some(&kb), 5, &cfg, |_| {});
    Ok((run(&pretrained)?.result.mean, run(&fresh)?.result.mean))
}

fn criterion_9() -> Outcome {
    let first = transfer_run()?;
    let second = transfer_run()?;
    Ok(check(
        first == second,
        format!(
            "pretrained {:.4} vs fresh {:.4} (gain {:+.4}; observation only), repeat identical: {}",
            first.0,
            first.1,
            first.0 - first.1,
            first == second
        ),
    ))
}

// 10. Loss ablation harness.

/// Variant name, test accuracy and per-epoch training losses.
type AblationRow = (String, f64, Vec<f64>);

fn ablation_run() -> unigraph::Result<Vec<AblationRow>> {
    let enc = EncoderConfig::default();
    let cfg = TrainConfig {
        epoch_cap: Some(200),
        seed: 9,
        ..TrainConfig::default()
    };
    let ds = synth_cycles_vs_cliques(200, (4, 12), 3);
    let prepared = prepare_dataset(&ds, &enc, cfg.seed)?;
    let kernels = KernelSet::compute(&ds.graphs, &KernelKind::ALL, &KernelConfig::default())?;
    let mut template = Model::new(enc, &KernelKind::ALL, cfg.seed)?;
    template.register(&ds)?;
    // Five folds leave 40 test graphs, so accuracies resolve to 0.025.
    let split = fold_splits(&fold_assignment(&ds.labels, 5, cfg.seed)?, 5).swap_remove(0);
    let out = ablation(
        &template,
        &ds.name,
        &prepared,
        &ds.labels,
        Some(&kernels),
        &split,
        &cfg,
        &ablation_variants(),
    )?;
    Ok(out
        .into_iter()
        .map(|(n, o)| (n, o.test_accuracy, o.history.iter().map(|r| r.loss).collect()))
        .collect())
}

fn criterion_10() -> Outcome {
    let first = ablation_run()?;
    let second = ablation_run()?;
    let summary: Vec<String> = first.iter().map(|(n, a, _)| format!("{n} {a:.3}")).collect();
    let pairwise = |same: fn(&AblationRow, &AblationRow) -> bool| {
        first
            .iter()
            .enumerate()
            .all(|(i, a)| first[i + 1..].iter().all(|b| !same(a, b)))
    };
    let accuracies = pairwise(|a, b| a.1 == b.1);
    let trajectories = pairwise(|a, b| a.2 == b.2);
    Ok(check(
        first == second && accuracies && trajectories && first.len() == ablation_variants().len(),
        format!(
            "{}; distinct accuracies: {accuracies}; distinct trajectories: {trajectories}; repeat identical: {}",
            summary.join(", "),
            first == second
        ),
    ))
}

type Criterion = (usize, &'static str, fn() -> Outcome);

fn main() {
    let wanted: Option<Vec<usize>> = std::env::var("UNIGRAPH_ACCEPTANCE")
        .ok()
        .map(|s| s.split(',').filter_map(|p| p.trim().parse().ok()).collect());
    let criteria: [Criterion; 10] = [
        (1, "gradient fidelity", criterion_1),
        (2, "permutation invariance", criterion_2),
        (3, "kernel oracles", criterion_3),
        (4, "separation beyond WL", criterion_4),
        (5, "Gaussian feature covariance", criterion_5),
        (6, "normalized adjacency spectral radius", criterion_6),
        (7, "end-to-end learning", criterion_7),
        (8, "MUTAG cycle rule", criterion_8),
        (9, "transfer-learning smoke", criterion_9),
        (10, "loss ablation harness", criterion_10),
    ];
    let mut failed = 0;
    for (id, name, run) in criteria {
        if wanted.as_ref().is_some_and(|w| !w.contains(&id)) {
            continue;
        }
        let start = Instant::now();
        let verdict = run().unwrap_or_else(|e| Verdict::Fail(format!("error: {e}")));
        let secs = start.elapsed().as_secs_f64();
        let (tag, detail) = match verdict {
            Verdict::Pass(d) => ("PASS", d),
            Verdict::Fail(d) => {
                failed += 1;
                ("FAIL", d)
            }
            Verdict::Skip(d) => ("SKIP", d),
        };
        println!("{tag} criterion {id:>2} ({name}): {detail} [{secs:.1} s]");
    }
    if failed > 0 {
        println!("{failed} criterion(s) failed");
        std::process::exit(1);
    }
}
