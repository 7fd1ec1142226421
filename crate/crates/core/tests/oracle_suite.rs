//! Independent-oracle checks for the per-operation contracts: finite
//! differences for every derivative, a Jacobi SVD for spectral norms, and
//! brute-force enumeration for the selectors.

mod common;

use common::*;
use prunekit::data::{Budget, Dataset, Label, RepKind, Representation};
use prunekit::matrix::{cosine, dot, norm, norm_sq, sq_dist, Matrix};
use prunekit::refmodel::{
    bce_loss, classifier_gradient, predict_prob, train, CheckpointTrace, TrainConfig,
};
use prunekit::representations::{gradients, hidden_states, random_project};
use prunekit::selectors::{
    self, hard_to_learn_scores, kmeans::kmeans, less_scores, prototypicality_scores,
    self_influence_scores, Aggregation, ScoreDirection, SelectorConfig,
};
use prunekit::synthgen::{self, GmmComponent, GmmSpec};
use prunekit::theory::{
    dist_gradient, dist_hidden, dist_loss, disc_power_grad_bound, disc_power_loss,
    gradient_jacobian, pairwise_distance_jacobian, spectral_norm, InstancePair,
};
use rand::Rng;

fn random_label(rng: &mut rand_chacha::ChaCha8Rng) -> Label {
    if rng.gen::<bool>() {
        Label::Pos
    } else {
        Label::Neg
    }
}

// ── oracle self-checks ──────────────────────────────────────────────────────

#[test]
fn jacobi_oracle_recovers_known_singular_values() {
    // diag(3, 2, 1) padded to 4×3.
    let mut m = Matrix::zeros(4, 3);
    m.set(0, 0, 3.0);
    m.set(1, 1, 2.0);
    m.set(2, 2, 1.0);
    assert!((jacobi_svd_max(&m) - 3.0).abs() < 1e-12);

    // Householder-style dense matrix: compare against power iteration only on
    // magnitude ordering (larger than any column norm / sqrt(n) bound).
    let mut rng = seeded(7);
    let m = randn_matrix(&mut rng, 6, 4);
    let sv = jacobi_svd_max(&m);
    let frob: f64 = m.data().iter().map(|v| v * v).sum::<f64>();
    assert!(sv * sv <= frob + 1e-9);
    assert!(sv * sv >= frob / 4.0 - 1e-9); // max σ² ≥ ‖M‖²_F / rank
}

#[test]
fn finite_difference_oracle_matches_polynomial_gradient() {
    let f = |x: &[f64]| x[0] * x[0] * x[1] + 3.0 * x[1];
    let g = central_diff_grad(f, &[2.0, -1.0], FD_STEP);
    assert!((g[0] - (2.0 * 2.0 * -1.0)).abs() < 1e-8);
    assert!((g[1] - (2.0 * 2.0 + 3.0)).abs() < 1e-8);
}

// ── synthgen ────────────────────────────────────────────────────────────────

#[test]
fn component_counts_follow_weights_binomially() {
    let spec = GmmSpec {
        rng: "chacha8".into(),
        components: vec![
            GmmComponent {
                mean: [-5.0, 0.0],
                covariance: [[1.0, 0.0], [0.0, 1.0]],
                label: -1,
                weight: 0.5,
            },
            GmmComponent {
                mean: [5.0, 0.0],
                covariance: [[1.0, 0.0], [0.0, 1.0]],
                label: 1,
                weight: 0.5,
            },
        ],
    };
    let ds = synthgen::generate(&spec, 10_000, 0).unwrap();
    let pos = ds.labels().iter().filter(|l| **l == Label::Pos).count() as f64;
    // Binomial(10000, 0.5): σ = 50, allow 3σ.
    assert!((pos - 5000.0).abs() <= 150.0, "positive count {pos}");
}

#[test]
fn large_sample_mean_converges_to_component_mean() {
    let spec = GmmSpec {
        rng: "chacha8".into(),
        components: vec![GmmComponent {
            mean: [1.25, -0.75],
            covariance: [[1.0, 0.0], [0.0, 1.0]],
            label: 1,
            weight: 1.0,
        }],
    };
    let ds = synthgen::generate(&spec, 100_000, 3).unwrap();
    let n = ds.len() as f64;
    let mut mean = [0.0f64; 2];
    for row in ds.features().row_iter() {
        mean[0] += row[0];
        mean[1] += row[1];
    }
    mean[0] /= n;
    mean[1] /= n;
    let err = ((mean[0] - 1.25).powi(2) + (mean[1] + 0.75).powi(2)).sqrt();
    assert!(err < 0.1, "sample mean off by {err}");
}

// ── refmodel ────────────────────────────────────────────────────────────────

#[test]
fn closed_form_gradient_matches_finite_differences() {
    let mut rng = seeded(42);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let d = 10;
        let w = randn_vec(&mut rng, d);
        let h = randn_vec(&mut rng, d);
        let y = random_label(&mut rng);
        let analytic = classifier_gradient(&w, &h, y).unwrap();
        let fd = central_diff_grad(
            |wv: &[f64]| bce_loss(wv, &h, y).unwrap(),
            &w,
            FD_STEP,
        );
        for (a, f) in analytic.iter().zip(&fd) {
            worst = worst.max(rel_err(*a, *f).min((a - f).abs()));
        }
    }
    assert!(worst < 1e-5, "worst gradient error {worst}");
}

// ── representations ─────────────────────────────────────────────────────────

#[test]
fn sign_projection_preserves_pairwise_geometry() {
    let mut rng = seeded(0);
    let rows = 50;
    let dim = 256;
    let rep = Representation::new(
        RepKind::HiddenStates,
        randn_matrix(&mut rng, rows, dim),
        (0..rows as u64).collect(),
        vec![],
        false,
        None,
    )
    .unwrap();
    let proj = random_project(&rep, 64, 123, false).unwrap();

    let mut squared_ok = 0usize;
    let mut plain_ok = 0usize;
    let mut pairs = 0usize;
    let mut ratio_sum = 0.0f64;
    for i in 0..rows {
        for j in (i + 1)..rows {
            pairs += 1;
            let d0 = sq_dist(rep.matrix().row(i), rep.matrix().row(j));
            let d1 = sq_dist(proj.matrix().row(i), proj.matrix().row(j));
            let ratio = d1 / d0;
            ratio_sum += ratio;
            if (ratio - 1.0).abs() <= 0.30 {
                squared_ok += 1;
            }
            if (ratio.sqrt() - 1.0).abs() <= 0.30 {
                plain_ok += 1;
            }
        }
    }
    let squared_frac = squared_ok as f64 / pairs as f64;
    let plain_frac = plain_ok as f64 / pairs as f64;
    let mean_ratio = ratio_sum / pairs as f64;
    println!(
        "projection 256→64: squared within ±30% {squared_frac:.4}, \
         distances within ±30% {plain_frac:.4}, mean ratio {mean_ratio:.4}"
    );
    // At k = 64 the squared-distance deviation has σ ≈ √(2/64) ≈ 0.18, so the
    // ±30% band holds for roughly nine pairs in ten; the distances themselves
    // (half the relative deviation) are inside the band almost always.
    assert!(squared_frac >= 0.85, "squared fraction {squared_frac}");
    assert!(plain_frac >= 0.95, "distance fraction {plain_frac}");
    assert!((mean_ratio - 1.0).abs() < 0.05, "mean ratio {mean_ratio}");
}

// ── selectors vs exhaustive oracles ─────────────────────────────────────────

fn random_trace(
    rng: &mut rand_chacha::ChaCha8Rng,
    n: usize,
    epochs: usize,
) -> (Dataset, CheckpointTrace) {
    let d = 4;
    let rows: Vec<Vec<f64>> = (0..n).map(|_| randn_vec(rng, d)).collect();
    let labels: Vec<Label> = (0..n).map(|_| random_label(rng)).collect();
    let ds = Dataset::new(
        (0..n as u64).collect(),
        Matrix::from_rows(&rows),
        labels,
    )
    .unwrap();
    let cfg = TrainConfig {
        epochs,
        learning_rate: 0.2,
        batch_size: usize::MAX,
        seed: 0,
        shuffle: false,
    };
    let trace = train(&ds, &cfg).unwrap();
    (ds, trace)
}

#[test]
fn hard_to_learn_matches_exhaustive_sort() {
    let mut rng = seeded(11);
    let (ds, trace) = random_trace(&mut rng, 20, 6);
    let b = 6;
    let sel = selectors::hard_to_learn(&trace, &ds, Budget::from_count(b, 20).unwrap()).unwrap();

    // Oracle: compute mean probabilities straight from the trajectory matrix.
    let mut scored: Vec<(f64, u64)> = (0..20)
        .map(|i| {
            let row = trace.prob_trajectory().row(i);
            (row.iter().sum::<f64>() / row.len() as f64, ds.id(i))
        })
        .collect();
    scored.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut expected: Vec<u64> = scored[..b].iter().map(|(_, id)| *id).collect();
    expected.sort_unstable();
    assert_eq!(sel.selected_ids, expected);
}

#[test]
fn prototypicality_matches_independent_distance_ranking() {
    let mut rng = seeded(13);
    let rows: Vec<Vec<f64>> = (0..30).map(|_| randn_vec(&mut rng, 2)).collect();
    let rep = Representation::new(
        RepKind::HiddenStates,
        Matrix::from_rows(&rows),
        (0..30).collect(),
        vec![],
        false,
        None,
    )
    .unwrap();
    let cfg = SelectorConfig {
        k_clusters: Some(3),
        ..SelectorConfig::default()
    };
    let b = 9;
    let sel =
        selectors::prototypicality(&rep, Budget::from_count(b, 30).unwrap(), &cfg).unwrap();

    // Oracle: same k-means assignment, naive distance computation, full sort.
    let km = kmeans(rep.matrix(), 3, cfg.seed).unwrap();
    let mut scored: Vec<(f64, u64)> = (0..30)
        .map(|i| {
            let c = km.assignments[i];
            let mut d2 = 0.0;
            for (a, b) in rows[i].iter().zip(km.centroids.row(c)) {
                d2 += (a - b) * (a - b);
            }
            (d2.sqrt(), i as u64)
        })
        .collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let mut expected: Vec<u64> = scored[..b].iter().map(|(_, id)| *id).collect();
    expected.sort_unstable();
    assert_eq!(sel.selected_ids, expected);
}

#[test]
fn less_matches_cosine_table_oracle() {
    let mut rng = seeded(17);
    let dim = 12;
    let make_rep = |rng: &mut rand_chacha::ChaCha8Rng, n: usize, first_id: u64| {
        let rows: Vec<Vec<f64>> = (0..n).map(|_| randn_vec(rng, dim)).collect();
        Representation::new(
            RepKind::Gradients,
            Matrix::from_rows(&rows),
            (first_id..first_id + n as u64).collect(),
            vec![1, 2],
            true,
            None,
        )
        .unwrap()
    };
    let train_rep = make_rep(&mut rng, 25, 0);
    let val_rep = make_rep(&mut rng, 5, 100);
    let cfg = SelectorConfig {
        relevance_aggregation: Aggregation::Mean,
        ..SelectorConfig::default()
    };
    let b = 8;
    let sel = selectors::less(
        &train_rep,
        &val_rep,
        Budget::from_count(b, 25).unwrap(),
        &cfg,
    )
    .unwrap();

    // Oracle: dense N×V cosine table, mean per row, argsort.
    let mut scored: Vec<(f64, u64)> = (0..25)
        .map(|i| {
            let mut total = 0.0;
            for v in 0..5 {
                total += cosine(train_rep.matrix().row(i), val_rep.matrix().row(v)).unwrap();
            }
            (total / 5.0, i as u64)
        })
        .collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let mut expected: Vec<u64> = scored[..b].iter().map(|(_, id)| *id).collect();
    expected.sort_unstable();
    assert_eq!(sel.selected_ids, expected);
}

#[test]
fn self_influence_reproduces_eta_weighted_sums() {
    // Trace with three distinct learning rates; the √η_t blocks must make
    // row-norm² equal the brute-force weighted sum.
    let mut rng = seeded(23);
    let n = 10;
    let d = 3;
    let rows: Vec<Vec<f64>> = (0..n).map(|_| randn_vec(&mut rng, d)).collect();
    let labels: Vec<Label> = (0..n).map(|_| random_label(&mut rng)).collect();
    let ds = Dataset::new((0..n as u64).collect(), Matrix::from_rows(&rows), labels).unwrap();

    let weights: Vec<Vec<f64>> = (0..4).map(|_| randn_vec(&mut rng, d + 1)).collect();
    let etas = vec![0.1, 0.2, 0.3];
    let ext = ds.features().with_bias_column();
    let mut prob = Matrix::zeros(n, 3);
    let mut loss = Matrix::zeros(n, 3);
    for t in 1..=3usize {
        for i in 0..n {
            let z = ds.label(i).sign() * dot(&weights[t], ext.row(i));
            prob.set(i, t - 1, prunekit::refmodel::sigmoid(z));
            loss.set(i, t - 1, prunekit::refmodel::softplus(-z));
        }
    }
    let trace =
        CheckpointTrace::new((0..n as u64).collect(), weights, etas.clone(), prob, loss).unwrap();

    let rep = gradients(&trace, &ds, &[1, 2, 3], true, false).unwrap();
    let scores = self_influence_scores(&rep).unwrap();
    for i in 0..n {
        let mut expected = 0.0;
        for (t, eta) in etas.iter().enumerate() {
            let g = classifier_gradient(trace.weights_at(t + 1), ext.row(i), ds.label(i))
                .unwrap();
            expected += eta * norm_sq(&g);
        }
        assert!(
            (scores.scores[i] - expected).abs() < 1e-12,
            "instance {i}: {} vs {expected}",
            scores.scores[i]
        );
    }
}

#[test]
fn semdedup_survivors_match_quadratic_oracle() {
    // 25 spread points plus 5 exact-duplicate triples = 40 points.
    let mut rng = seeded(31);
    let mut rows: Vec<Vec<f64>> = (0..25).map(|_| randn_vec(&mut rng, 3)).collect();
    let mut triples: Vec<[usize; 3]> = Vec::new();
    for t in 0..5 {
        let base: Vec<f64> = randn_vec(&mut rng, 3)
            .iter()
            .map(|v| v + 10.0 * (t as f64 + 1.0))
            .collect();
        let start = rows.len();
        rows.push(base.clone());
        rows.push(base.clone());
        rows.push(base);
        triples.push([start, start + 1, start + 2]);
    }
    let n = rows.len();
    assert_eq!(n, 40);
    let rep = Representation::new(
        RepKind::HiddenStates,
        Matrix::from_rows(&rows),
        (0..n as u64).collect(),
        vec![],
        false,
        None,
    )
    .unwrap();
    let cfg = SelectorConfig {
        dedup_threshold: 0.999,
        ..SelectorConfig::default()
    };
    let b = 20;
    let sel = selectors::semdedup(&rep, Budget::from_count(b, n).unwrap(), &cfg).unwrap();

    // O(N²) oracle over the same clustering.
    let km = kmeans(rep.matrix(), 7, cfg.seed).unwrap();
    let dist: Vec<f64> = (0..n)
        .map(|i| sq_dist(&rows[i], km.centroids.row(km.assignments[i])).sqrt())
        .collect();
    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if km.assignments[i] != km.assignments[j] {
                continue;
            }
            let c = cosine(&rows[i], &rows[j]).unwrap_or(0.0);
            if c >= cfg.dedup_threshold {
                pairs.push((c, i, j));
            }
        }
    }
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut dropped = vec![false; n];
    for &(_, i, j) in &pairs {
        if dropped[i] || dropped[j] {
            continue;
        }
        let victim = if dist[i] < dist[j] {
            i
        } else if dist[j] < dist[i] {
            j
        } else {
            i.max(j)
        };
        dropped[victim] = true;
    }
    // Every triple keeps exactly one survivor.
    for t in &triples {
        let alive = t.iter().filter(|&&i| !dropped[i]).count();
        assert_eq!(alive, 1, "triple {t:?} has {alive} survivors");
        let selected = t
            .iter()
            .filter(|&&i| sel.selected_ids.contains(&(i as u64)))
            .count();
        assert!(selected <= 1, "triple {t:?} selected {selected} times");
    }
    // Selection equals the oracle's top-B survivors by distance.
    let mut survivors: Vec<usize> = (0..n).filter(|&i| !dropped[i]).collect();
    assert!(survivors.len() >= b, "no backfill expected in this setup");
    survivors.sort_by(|&a, &c| dist[c].total_cmp(&dist[a]).then(a.cmp(&c)));
    let mut expected: Vec<u64> = survivors[..b].iter().map(|&i| i as u64).collect();
    expected.sort_unstable();
    assert_eq!(sel.selected_ids, expected);
}

#[test]
fn hard_to_learn_scores_direction_is_lowest() {
    let mut rng = seeded(37);
    let (_, trace) = random_trace(&mut rng, 8, 3);
    let scores = hard_to_learn_scores(&trace);
    assert!(matches!(scores.direction, ScoreDirection::SelectLowest));
}

// ── theory vs oracles ───────────────────────────────────────────────────────

#[test]
fn distance_closed_forms_match_direct_representation_distances() {
    let mut rng = seeded(41);
    let mut worst_loss = 0.0f64;
    let mut worst_grad = 0.0f64;
    for _ in 0..100 {
        let d = 10;
        let w = randn_vec(&mut rng, d);
        let h_i = randn_vec(&mut rng, d);
        let h_j = randn_vec(&mut rng, d);
        let y_i = random_label(&mut rng);
        let y_j = random_label(&mut rng);
        let pair = InstancePair::new(h_i.clone(), y_i, h_j.clone(), y_j, w.clone()).unwrap();

        let l_i = -predict_prob(&w, &h_i, y_i).unwrap().ln();
        let l_j = -predict_prob(&w, &h_j, y_j).unwrap().ln();
        worst_loss = worst_loss.max(rel_err(dist_loss(&pair), (l_i - l_j) * (l_i - l_j)));

        let g_i = classifier_gradient(&w, &h_i, y_i).unwrap();
        let g_j = classifier_gradient(&w, &h_j, y_j).unwrap();
        let direct: f64 = g_i
            .iter()
            .zip(&g_j)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        worst_grad = worst_grad.max(rel_err(dist_gradient(&pair), direct));

        assert_eq!(dist_hidden(&pair), sq_dist(&h_i, &h_j));
    }
    assert!(worst_loss < 1e-10, "loss distance rel err {worst_loss}");
    assert!(worst_grad < 1e-10, "gradient distance rel err {worst_grad}");
}

#[test]
fn pairwise_jacobians_match_finite_differences() {
    let mut rng = seeded(43);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let d = 8;
        let w = randn_vec(&mut rng, d);
        let h_i = randn_vec(&mut rng, d);
        let h_j = randn_vec(&mut rng, d);
        let y_i = random_label(&mut rng);
        let y_j = random_label(&mut rng);

        for kind in [RepKind::HiddenStates, RepKind::DynamicsLoss, RepKind::Gradients] {
            let pair =
                InstancePair::new(h_i.clone(), y_i, h_j.clone(), y_j, w.clone()).unwrap();
            let analytic = pairwise_distance_jacobian(&pair, kind).unwrap();
            let fd = central_diff_grad(
                |hv: &[f64]| {
                    let p = InstancePair::new(hv.to_vec(), y_i, h_j.clone(), y_j, w.clone())
                        .unwrap();
                    match kind {
                        RepKind::HiddenStates => dist_hidden(&p),
                        RepKind::DynamicsLoss => dist_loss(&p),
                        RepKind::Gradients => dist_gradient(&p),
                        RepKind::DynamicsProb => unreachable!(),
                    }
                },
                &h_i,
                FD_STEP,
            );
            let scale = norm(&fd).max(norm(&analytic)).max(1e-6);
            for (a, f) in analytic.iter().zip(&fd) {
                worst = worst.max((a - f).abs() / scale);
            }
        }
    }
    assert!(worst < 1e-5, "worst jacobian error {worst}");
}

#[test]
fn loss_discriminative_power_equals_fd_jacobian_norm() {
    let mut rng = seeded(47);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let d = 10;
        let w = randn_vec(&mut rng, d);
        let h = randn_vec(&mut rng, d);
        let y = random_label(&mut rng);
        let z = y.sign() * dot(&w, &h);
        let fd = central_diff_grad(
            |hv: &[f64]| bce_loss(&w, hv, y).unwrap(),
            &h,
            FD_STEP,
        );
        let c_ell = disc_power_loss(z, norm(&w));
        worst = worst.max(rel_err(norm(&fd), c_ell));
    }
    assert!(worst < 1e-5, "worst C_ℓ error {worst}");
}

#[test]
fn gradient_jacobian_matches_fd_and_respects_bound() {
    let mut rng = seeded(53);
    for _ in 0..100 {
        let d = 6;
        let w = randn_vec(&mut rng, d);
        let h = randn_vec(&mut rng, d);
        let y = random_label(&mut rng);
        let z = y.sign() * dot(&w, &h);

        let analytic = gradient_jacobian(&h, y, &w).unwrap();
        let fd = central_diff_jacobian(
            |hv: &[f64]| classifier_gradient(&w, hv, y).unwrap(),
            &h,
            FD_STEP,
        );
        for i in 0..d {
            for j in 0..d {
                assert!(
                    (analytic.get(i, j) - fd.get(i, j)).abs() < 1e-6,
                    "jacobian entry ({i},{j})"
                );
            }
        }

        let exact_norm = spectral_norm(&analytic);
        let oracle_norm = jacobi_svd_max(&analytic);
        assert!(
            rel_err(exact_norm, oracle_norm) < 1e-8,
            "power iteration {exact_norm} vs jacobi {oracle_norm}"
        );
        let bound = disc_power_grad_bound(z, norm(&h), norm(&w));
        assert!(
            exact_norm <= bound + 1e-12,
            "spectral norm {exact_norm} exceeds bound {bound}"
        );
    }
}

#[test]
fn power_iteration_matches_jacobi_on_random_matrices() {
    let mut rng = seeded(59);
    for trial in 0..20 {
        let m = randn_matrix(&mut rng, 8, 8);
        let a = spectral_norm(&m);
        let b = jacobi_svd_max(&m);
        assert!(rel_err(a, b) < 1e-8, "trial {trial}: {a} vs {b}");
    }
}

#[test]
fn grad_bound_derivative_sign_matches_regimes() {
    // dC_g/dz = e^z/(1+e^z)³ · ((α−1) − (α+1)e^z)
    let derivative_sign = |alpha: f64, z: f64| -> f64 { (alpha - 1.0) - (alpha + 1.0) * z.exp() };
    // α = 1: negative everywhere → strictly decreasing curve.
    let tables = prunekit::theory::emit_curves(&[1.0], 4001, 1.0, false).unwrap();
    for (k, w) in tables[0].c_grad.windows(2).enumerate() {
        assert!(w[1] < w[0], "not decreasing at grid index {k}");
    }
    for &z in &tables[0].z_grid {
        assert!(derivative_sign(1.0, z) < 0.0);
    }
    // α = 5: sign flips exactly at z* = ln(4/6).
    let z_star = (4.0f64 / 6.0).ln();
    assert!(derivative_sign(5.0, z_star - 1e-6) > 0.0);
    assert!(derivative_sign(5.0, z_star + 1e-6) < 0.0);
}

#[test]
fn hidden_states_round_trip_preserves_external_import() {
    // A 4×8 "external" matrix with f32-exact entries survives the I/O pair.
    let dir = tempfile::tempdir().unwrap();
    let mut rng = seeded(61);
    let data: Vec<f64> = (0..32)
        .map(|_| f64::from(rng.gen_range(-8i32..8) as f32) * 0.25)
        .collect();
    let rep = Representation::new(
        RepKind::HiddenStates,
        Matrix::from_vec(4, 8, data),
        vec![3, 5, 9, 12],
        vec![],
        false,
        None,
    )
    .unwrap();
    let meta = dir.path().join("ext.meta.json");
    let bin = dir.path().join("ext.bin");
    prunekit::io::save_representation(&rep, &meta, &bin).unwrap();
    let back = prunekit::io::load_representation(&meta, &bin).unwrap();
    assert_eq!(rep, back);
    // and the in-memory extractor is the identity on dataset features
    let ds = synthgen::generate(&GmmSpec::default_spec(), 10, 0).unwrap();
    assert_eq!(hidden_states(&ds).matrix(), ds.features());
}

#[test]
fn less_scores_self_similarity_bound() {
    // Sanity: every cosine-based score lies in [−1, 1].
    let mut rng = seeded(67);
    let train_rep = Representation::new(
        RepKind::Gradients,
        randn_matrix(&mut rng, 15, 6),
        (0..15).collect(),
        vec![1],
        true,
        None,
    )
    .unwrap();
    let val_rep = Representation::new(
        RepKind::Gradients,
        randn_matrix(&mut rng, 4, 6),
        (100..104).collect(),
        vec![1],
        true,
        None,
    )
    .unwrap();
    let scores = less_scores(&train_rep, &val_rep, &SelectorConfig::default()).unwrap();
    for s in &scores.scores {
        assert!((-1.0..=1.0).contains(s));
    }
    let _ = prototypicality_scores(&train_rep, &SelectorConfig::default()).unwrap();
}
