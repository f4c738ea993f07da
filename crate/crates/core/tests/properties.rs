//! Randomized invariants over the public API.

use proptest::prelude::*;
use unigraph::autodiff::{grad_check, RunningStats, Tape};
use unigraph::data::synth::{random_graph, random_regular, synth_cycles_vs_cliques, synth_stars_vs_paths};
use unigraph::decoder::{adaptive_targets, adjacency_loss, kernel_loss_unsup};
use unigraph::eigen::eigendecompose;
use unigraph::graph::{
    laplacian, normalized_adjacency, permute, spectral_features_from, spectral_node_features, Graph,
};
use unigraph::kernels::{cache, feature_vectors, kernel_matrix, raw_gram, KernelConfig, KernelKind};
use unigraph::matrix::Matrix;
use unigraph::train::{lr_at, plan_batches, TrainConfig};

fn graph() -> impl Strategy<Value = Graph> {
    (2usize..10, 0.15f64..0.85, any::<u64>()).prop_map(|(n, p, seed)| random_graph(n, p, seed))
}

fn graph_and_perm() -> impl Strategy<Value = (Graph, Vec<usize>)> {
    graph().prop_flat_map(|g| {
        let perm = Just((0..g.node_count()).collect::<Vec<_>>()).prop_shuffle();
        (Just(g), perm)
    })
}

fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = Matrix> {
    prop::collection::vec(-2.0f64..2.0, rows * cols).prop_map(move |v| Matrix::from_vec(rows, cols, v).unwrap())
}

/// Symmetric `b × b` matrix with entries in [0, 1].
fn kernel_slice(b: usize) -> impl Strategy<Value = Matrix> {
    prop::collection::vec(0.0f64..1.0, b * b).prop_map(move |v| {
        let m = Matrix::from_vec(b, b, v).unwrap();
        Matrix::from_fn(b, b, |i, j| 0.5 * (m[(i, j)] + m[(j, i)]))
    })
}

fn reorder(m: &Matrix, perm: &[usize]) -> Matrix {
    Matrix::from_fn(m.rows(), m.cols(), |i, j| m[(perm[i], perm[j])])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn normalized_adjacency_spectral_radius_at_most_one(g in graph()) {
        let d = eigendecompose(&normalized_adjacency(&g)).unwrap();
        let radius = d.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        prop_assert!(radius <= 1.0 + 1e-8, "radius {radius}");
    }

    #[test]
    fn spectral_features_ignore_eigenvector_signs(g in graph(), flips in prop::collection::vec(any::<bool>(), 10)) {
        let n = g.node_count();
        let d = eigendecompose(&laplacian(&g)).unwrap();
        let mut flipped = d.clone();
        for (c, &f) in flips.iter().take(n).enumerate() {
            if f {
                for r in 0..n {
                    flipped.eigenvectors[(r, c)] *= -1.0;
                }
            }
        }
        let k = n - 1;
        prop_assert_eq!(spectral_features_from(&d, k).unwrap(), spectral_features_from(&flipped, k).unwrap());
        prop_assert_eq!(spectral_node_features(&g, k).unwrap().shape(), [n, k]);
    }

    #[test]
    fn kernel_features_survive_relabeling((g, perm) in graph_and_perm()) {
        let p = permute(&g, &perm).unwrap();
        let cfg = KernelConfig::default();
        for kind in KernelKind::ALL {
            let (vecs, _) = feature_vectors(&[g.clone(), p.clone()], kind, &cfg).unwrap();
            prop_assert_eq!(&vecs[0], &vecs[1], "{} features differ", kind);
            // The raw self-kernel equals the raw cross-kernel with any relabeling.
            let raw = raw_gram(&vecs);
            prop_assert_eq!(raw[(0, 0)], raw[(0, 1)]);
            prop_assert_eq!(raw[(1, 1)], raw[(0, 1)]);
        }
    }

    #[test]
    fn kernel_matrices_are_psd_and_cache_exactly(seed in any::<u64>()) {
        let graphs: Vec<Graph> = (0..12u64).map(|i| random_graph(3 + (i as usize % 7), 0.4, seed ^ i)).collect();
        let cfg = KernelConfig::default();
        for kind in KernelKind::ALL {
            let k = kernel_matrix(&graphs, kind, &cfg).unwrap();
            prop_assert!(k.values.max_asymmetry() == 0.0);
            prop_assert!(k.min_eigenvalue().unwrap() >= -1e-8, "{} not PSD", kind);
            let (back, back_cfg) = cache::decode(&cache::encode(&k, &cfg)).unwrap();
            prop_assert_eq!(&back, &k);
            prop_assert_eq!(back_cfg, cfg.clone());
        }
    }

    #[test]
    fn wl_cannot_split_regular_graphs_of_equal_size(half in 3usize..7, a in any::<u64>(), b in any::<u64>()) {
        let n = 2 * half;
        let (Some(g1), Some(g2)) = (random_regular(n, 3, a), random_regular(n, 3, b)) else {
            return Ok(());
        };
        let cfg = KernelConfig { wl_iterations: 4, ..KernelConfig::default() };
        let (vecs, _) = feature_vectors(&[g1, g2], KernelKind::Wl, &cfg).unwrap();
        prop_assert_eq!(&vecs[0], &vecs[1]);
    }

    #[test]
    fn composite_gradients_match_finite_differences(a in matrix(3, 4), w in matrix(4, 2)) {
        let err = grad_check(
            |t, v| {
                let h = t.matmul(v[0], v[1])?;
                let h = t.sigmoid(h);
                let h = t.pow(h, 2)?;
                Ok(t.mean(h))
            },
            &[a, w],
            1e-6,
            0,
        )
        .unwrap();
        prop_assert!(err < 1e-5, "relative error {err}");
    }

    #[test]
    fn dropout_in_eval_mode_is_identity(x in matrix(5, 3), rate in 0.0f64..0.9) {
        let mut t = Tape::new(1);
        let v = t.constant(x.clone());
        let d = t.dropout(v, rate, false).unwrap();
        prop_assert_eq!(t.value(d), &x);
    }

    #[test]
    fn batch_norm_standardizes_in_train_mode(x in matrix(12, 3)) {
        let means = x.column_sums().into_iter().map(|s| s / 12.0).collect::<Vec<_>>();
        let spread = (0..3).all(|j| (0..12).map(|i| (x[(i, j)] - means[j]).powi(2)).sum::<f64>() / 12.0 > 0.1);
        prop_assume!(spread);
        let mut t = Tape::new(0);
        let v = t.constant(x);
        let mut stats = RunningStats::new(3);
        let y = t.batch_norm(v, &mut stats, true).unwrap();
        let y = t.value(y);
        for j in 0..3 {
            let col: Vec<f64> = (0..12).map(|i| y[(i, j)]).collect();
            let mean = col.iter().sum::<f64>() / 12.0;
            let var = col.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / 12.0;
            prop_assert!(mean.abs() < 1e-6 && (var - 1.0).abs() < 1e-6, "mean {mean}, var {var}");
        }
    }

    #[test]
    fn tape_replay_is_bit_identical(x in matrix(6, 4), seed in any::<u64>()) {
        let run = || {
            let mut t = Tape::new(seed);
            let v = t.leaf(x.clone(), true);
            let d = t.dropout(v, 0.5, true).unwrap();
            let s = t.sigmoid(d);
            let out = t.sum(s);
            t.backward(out).unwrap().get(v).unwrap().clone()
        };
        prop_assert_eq!(run(), run());
    }

    #[test]
    fn kernel_loss_ignores_batch_order(
        z in matrix(4, 3),
        w in matrix(3, 3),
        k1 in kernel_slice(4),
        k2 in kernel_slice(4),
        perm in Just(vec![0usize, 1, 2, 3]).prop_shuffle(),
    ) {
        let loss = |z: &Matrix, slices: &[Matrix]| {
            let mut t = Tape::new(0);
            let zv = t.constant(z.clone());
            let heads = [t.constant(w.clone()), t.constant(w.transpose())];
            let l = kernel_loss_unsup(&mut t, zv, &heads, slices, &[0.5, 0.5], 1.0).unwrap();
            t.value(l).scalar()
        };
        let base = loss(&z, &[k1.clone(), k2.clone()]);
        let moved = loss(&z.select_rows(&perm), &[reorder(&k1, &perm), reorder(&k2, &perm)]);
        prop_assert!(base >= 0.0);
        prop_assert!((base - moved).abs() < 1e-12, "{base} vs {moved}");
    }

    #[test]
    fn adjacency_loss_is_nonnegative(g in graph(), y_seed in any::<u64>()) {
        let n = g.node_count();
        let y = unigraph::graph::gaussian_features(n, 3, 1.0, y_seed).unwrap();
        let mut t = Tape::new(0);
        let yv = t.constant(y);
        let l = adjacency_loss(&mut t, yv, &[0, n], &[g.adjacency()], 1.0).unwrap();
        prop_assert!(t.value(l).scalar() >= 0.0);
    }

    #[test]
    fn adaptive_targets_stay_symmetric(
        k1 in kernel_slice(5),
        k2 in kernel_slice(5),
        labels in prop::collection::vec(0usize..3, 5),
    ) {
        let t = adaptive_targets(&[k1, k2], &labels).unwrap();
        prop_assert_eq!(t.max_asymmetry(), 0.0);
    }

    #[test]
    fn learning_rate_is_continuous_at_the_warmup_boundary(warmup in 1u32..20, extra in 1usize..500) {
        let cfg = TrainConfig {
            warmup_epochs: warmup as f64,
            max_epoch: warmup as usize + extra,
            ..TrainConfig::default()
        };
        let w = cfg.warmup_epochs;
        let at = lr_at(w, &cfg).unwrap();
        prop_assert!((at - cfg.lr_max).abs() < 1e-12);
        prop_assert!((lr_at(w - 1e-9, &cfg).unwrap() - at).abs() < 1e-9);
        prop_assert!((lr_at(w + 1e-9, &cfg).unwrap() - at).abs() < 1e-9);
        prop_assert!(lr_at(cfg.max_epoch as f64 + 1.0, &cfg).is_err());
    }

    #[test]
    fn batches_partition_the_indices(n in 0usize..200, size in 1usize..40, seed in any::<u64>()) {
        let indices: Vec<usize> = (0..n).map(|i| 3 * i).collect();
        let batches = plan_batches(&indices, size, seed);
        let mut seen: Vec<usize> = batches.concat();
        seen.sort_unstable();
        prop_assert_eq!(seen, indices);
        let lens: Vec<usize> = batches.iter().map(Vec::len).collect();
        if let (Some(lo), Some(hi)) = (lens.iter().min(), lens.iter().max()) {
            prop_assert!(hi - lo <= 1 && *hi <= size && *lo >= 1);
        }
    }

    #[test]
    fn generators_are_seed_deterministic(count in 2usize..30, seed in any::<u64>()) {
        prop_assert_eq!(synth_cycles_vs_cliques(count, (3, 9), seed), synth_cycles_vs_cliques(count, (3, 9), seed));
        prop_assert_eq!(synth_stars_vs_paths(count, (3, 9), seed), synth_stars_vs_paths(count, (3, 9), seed));
    }
}
