//! Invariants checked over randomly generated inputs.

mod common;

use approx::assert_abs_diff_eq;
use lpgraph::align::{check_procrustes_lemma, procrustes_align};
use lpgraph::classify::{classify, minimize_phi_risk, LinearClassifier, PhiRisk, SurrogateLoss};
use lpgraph::graphgen::{
    sample_adjacency, sample_adjacency_from_kernel, sample_latents, AdjacencyMatrix,
    DistributionSpec, Label, LabelModel, LatentLaw,
};
use lpgraph::harness::random_psd_pair;
use lpgraph::kernels::{
    kernel_matrix, operator_spectrum, FeatureMap, KernelFamily, KernelMatrix, KernelSpec,
    LatentDomain,
};
use lpgraph::spectral::{
    decompose_and_select, dimension_search_limit, eigendecompose, embed_decomposition,
    select_dimension_with, EigenCount,
};
use lpgraph::PointSet;
use nalgebra::DMatrix;
use proptest::prelude::*;

use common::*;

fn unit_box() -> LatentDomain {
    LatentDomain::Box {
        bounds: vec![[0.0, 1.0], [0.0, 1.0]],
    }
}

fn kernel_specs() -> Vec<(KernelSpec, LatentDomain)> {
    let half = LatentDomain::Box {
        bounds: vec![[-0.5, 0.5], [-0.5, 0.5]],
    };
    vec![
        (KernelSpec::gaussian(0.3, unit_box()).unwrap(), unit_box()),
        (KernelSpec::new(KernelFamily::Exponential, unit_box()).unwrap(), unit_box()),
        (
            KernelSpec::new(KernelFamily::Binomial { alpha: 2.0 }, half.clone()).unwrap(),
            half,
        ),
        (
            KernelSpec::new(KernelFamily::InverseMultiquadric { c: 1.0, beta: 1.0 }, unit_box())
                .unwrap(),
            unit_box(),
        ),
        (KernelSpec::new(KernelFamily::DotProduct, unit_box()).unwrap(), unit_box()),
    ]
}

fn points_in(domain: &LatentDomain, unit: &[f64]) -> PointSet {
    let LatentDomain::Box { bounds } = domain else {
        unreachable!()
    };
    let rows: Vec<Vec<f64>> = unit
        .chunks(2)
        .map(|c| {
            c.iter()
                .zip(bounds)
                .map(|(u, [lo, hi])| lo + u * (hi - lo))
                .collect()
        })
        .collect();
    PointSet::from_rows(&rows).unwrap()
}

fn instance(seed: u64, n: usize, d: usize) -> (DMatrix<f64>, Vec<Label>) {
    let mut r = rng(seed);
    let z = gaussian_matrix(&mut r, n, d);
    let w = gaussian_matrix(&mut r, d, 1);
    let noise = gaussian_matrix(&mut r, n, 1);
    let y = (0..n)
        .map(|i| Label::from_score((z.row(i) * &w)[(0, 0)] + 0.5 * noise[(i, 0)]))
        .collect();
    (z, y)
}

fn loss_strategy() -> impl Strategy<Value = SurrogateLoss> {
    prop::sample::select(SurrogateLoss::ALL.to_vec())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn kernel_matrices_are_psd(unit in prop::collection::vec(0.0..=1.0f64, 2..=60)) {
        for (spec, domain) in kernel_specs() {
            let pts = points_in(&domain, &unit[..unit.len() / 2 * 2]);
            let k = kernel_matrix(&spec, &pts).unwrap();
            let m = k.entries();
            prop_assert!(m.iter().all(|v| (0.0..=1.0).contains(v)));
            prop_assert_eq!(m, &m.transpose());
            let min = eigendecompose(m, EigenCount::All).unwrap().eigenvalues().last().copied().unwrap();
            prop_assert!(min >= -1e-8, "{:?}: {}", spec.family(), min);
        }
    }

    #[test]
    fn procrustes_lemma_always_holds(seed in any::<u64>()) {
        let (a, b, d) = random_psd_pair(seed);
        let check = check_procrustes_lemma(&a, &b, d).unwrap();
        prop_assert!(check.holds, "{:?}", check);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn adjacency_is_symmetric_hollow_and_reproducible(
        n in 2usize..40,
        rho in 0.01..=1.0f64,
        seed in any::<u64>(),
        xs in prop::collection::vec(0.0..=1.0f64, 40),
    ) {
        let spec = KernelSpec::gaussian(0.4, LatentDomain::unit_interval()).unwrap();
        let pts = PointSet::from_scalars(&xs[..n]);
        let k = kernel_matrix(&spec, &pts).unwrap();
        let a = sample_adjacency(&k, rho, seed).unwrap();
        let again = sample_adjacency(&k, rho, seed).unwrap();
        let on_the_fly = sample_adjacency_from_kernel(&spec, &pts, rho, seed).unwrap();
        prop_assert_eq!(a.edges(), again.edges());
        prop_assert_eq!(a.edges(), on_the_fly.edges());
        let dense = a.to_dense();
        prop_assert_eq!(&dense, &dense.transpose());
        prop_assert!((0..n).all(|i| dense[(i, i)] == 0.0));
    }

    #[test]
    fn embedding_rows_reproduce_the_spectral_gram(seed in any::<u64>(), d in 1usize..4) {
        let spec = KernelSpec::gaussian(0.5, LatentDomain::unit_interval()).unwrap();
        let dist = DistributionSpec::new(
            LatentDomain::unit_interval(),
            LatentLaw::Uniform,
            LabelModel::ConstantNoise { level: 0.5 },
        ).unwrap();
        let n = 60;
        let s = sample_latents(&dist, n, seed).unwrap();
        let a = sample_adjacency_from_kernel(&spec, &s.points, 1.0, seed).unwrap();
        let decomp = eigendecompose(&a, EigenCount::Top(d)).unwrap();
        let z = embed_decomposition(&decomp, d, 1.0).unwrap();
        let u = decomp.leading_vectors(d).unwrap();
        let lam = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(&decomp.eigenvalues()[..d]));
        let diff = z.rows() * z.rows().transpose() - &u * lam * u.transpose();
        prop_assert!(diff.norm() <= 1e-8 * n as f64);
    }

    #[test]
    fn selected_dimension_ignores_vertex_order(seed in any::<u64>(), constant in 0.05..1.0f64) {
        let spec = KernelSpec::gaussian(0.3, LatentDomain::unit_interval()).unwrap();
        let dist = DistributionSpec::new(
            LatentDomain::unit_interval(),
            LatentLaw::Uniform,
            LabelModel::ConstantNoise { level: 0.5 },
        ).unwrap();
        let n = 120;
        let s = sample_latents(&dist, n, seed).unwrap();
        let a = sample_adjacency_from_kernel(&spec, &s.points, 1.0, seed).unwrap();
        let mut perm: Vec<usize> = (0..n).collect();
        perm.reverse();
        perm.rotate_left((seed % n as u64) as usize);
        let relabeled = AdjacencyMatrix::from_edges(
            n,
            1.0,
            seed,
            a.edges().into_iter().map(|(i, j)| (perm[i], perm[j])),
        ).unwrap();
        let loss = SurrogateLoss::Logistic;
        let limit = dimension_search_limit(n, loss, 0.1, constant);
        let pick = |g: &AdjacencyMatrix| {
            let decomp = eigendecompose(g, EigenCount::Top(limit)).unwrap();
            select_dimension_with(&decomp, loss, 0.1, constant).unwrap()
        };
        prop_assert_eq!(pick(&a), pick(&relabeled));
    }

    #[test]
    fn procrustes_beats_random_rotations_and_is_rotation_invariant(
        seed in any::<u64>(),
        n in 3usize..12,
        d in 1usize..4,
    ) {
        let mut r = rng(seed);
        let z = gaussian_matrix(&mut r, n, d);
        let t = gaussian_matrix(&mut r, n, d);
        let al = procrustes_align(&z, &t).unwrap();
        let wtw = al.w.transpose() * &al.w;
        prop_assert!((wtw - DMatrix::<f64>::identity(d, d)).norm() < 1e-10);
        for _ in 0..100 {
            let q = random_orthogonal(&mut r, d);
            prop_assert!(al.frobenius_error <= (&z * q - &t).norm() + 1e-12);
        }
        let q = random_orthogonal(&mut r, d);
        let rotated = procrustes_align(&(&z * q), &t).unwrap();
        prop_assert!((rotated.frobenius_error - al.frobenius_error).abs() <= 1e-10);
    }

    #[test]
    fn phi_risk_is_convex_with_exact_gradients(
        loss in loss_strategy(),
        seed in any::<u64>(),
        n in 1usize..=20,
        d in 1usize..=3,
        t in 0.01..0.99f64,
    ) {
        let (z, y) = instance(seed, n, d);
        let risk = PhiRisk::new(&z, &y, loss).unwrap();
        let mut r = rng(seed ^ 1);
        let w1: Vec<f64> = gaussian_matrix(&mut r, d, 1).iter().copied().collect();
        let w2: Vec<f64> = gaussian_matrix(&mut r, d, 1).iter().copied().collect();
        let mid: Vec<f64> = w1.iter().zip(&w2).map(|(a, b)| t * a + (1.0 - t) * b).collect();
        prop_assert!(risk.value(&mid) <= t * risk.value(&w1) + (1.0 - t) * risk.value(&w2) + 1e-10);

        let g = risk.gradient(&w1);
        let h = 1e-6;
        let fd: Vec<f64> = (0..d).map(|k| {
            let (mut up, mut down) = (w1.clone(), w1.clone());
            up[k] += h;
            down[k] -= h;
            (risk.value(&up) - risk.value(&down)) / (2.0 * h)
        }).collect();
        let err = g.iter().zip(&fd).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let scale = g.iter().map(|a| a * a).sum::<f64>().sqrt().max(1e-3);
        prop_assert!(err / scale <= 1e-5, "{} vs {:?}", err / scale, (g, fd));
    }

    #[test]
    fn trained_classifier_beats_random_feasible_weights(
        loss in loss_strategy(),
        seed in any::<u64>(),
        n in 1usize..=20,
        d in 1usize..=3,
    ) {
        let (z, y) = instance(seed, n, d);
        let radius = d as f64;
        let c = minimize_phi_risk(&z, &y, loss, radius).unwrap();
        let risk = PhiRisk::new(&z, &y, loss).unwrap();
        let best = c.trained_on.objective;
        prop_assert!((risk.value(&c.w) - best).abs() < 1e-12);
        let mut r = rng(seed ^ 2);
        for _ in 0..1000 {
            let mut w: Vec<f64> = gaussian_matrix(&mut r, d, 1).iter().copied().collect();
            let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
            let target = radius * rand::Rng::random::<f64>(&mut r).powf(1.0 / d as f64);
            w.iter_mut().for_each(|x| *x *= target / norm);
            prop_assert!(best <= risk.value(&w) + 1e-12);
        }
    }

    #[test]
    fn predictions_ignore_positive_rescaling(
        w in prop::collection::vec(-3.0..3.0f64, 3),
        z in prop::collection::vec(-3.0..3.0f64, 3),
        scale in 1e-3..1e3f64,
    ) {
        let make = |w: Vec<f64>| LinearClassifier {
            d: 3,
            w,
            loss: SurrogateLoss::Logistic,
            radius: 1e4,
            trained_on: lpgraph::classify::TrainingInfo {
                n: 0,
                loss: SurrogateLoss::Logistic,
                seed: 0,
                objective: 0.0,
                iterations: 0,
            },
        };
        let scaled: Vec<f64> = w.iter().map(|x| x * scale).collect();
        prop_assert_eq!(classify(&make(w), &z).unwrap(), classify(&make(scaled), &z).unwrap());
    }
}

#[test]
fn feature_map_at_nodes_is_read_from_the_table() {
    let spec = KernelSpec::gaussian(0.5, LatentDomain::unit_interval()).unwrap();
    let dist = DistributionSpec::new(
        LatentDomain::unit_interval(),
        LatentLaw::Uniform,
        LabelModel::ConstantNoise { level: 0.5 },
    )
    .unwrap();
    let s = operator_spectrum(&spec, &dist, 64, 5).unwrap();
    let fm = FeatureMap::new(&s, 5).unwrap();
    let psi: Vec<Vec<f64>> = (1..=5).map(|j| s.eigenfunction_values(j).unwrap()).collect();
    for (k, node) in s.nodes().iter().enumerate() {
        let got = fm.eval(node).unwrap();
        for j in 0..5 {
            assert_eq!(got[j].to_bits(), (s.eigenvalues()[j].sqrt() * psi[j][k]).to_bits());
        }
    }
}

#[test]
fn adaptive_selection_matches_the_full_rule() {
    let spec = KernelSpec::gaussian(0.2, LatentDomain::unit_interval()).unwrap();
    let dist = DistributionSpec::new(
        LatentDomain::unit_interval(),
        LatentLaw::Uniform,
        LabelModel::ConstantNoise { level: 0.5 },
    )
    .unwrap();
    let n = 700;
    for (seed, constant) in [(1, 0.05), (2, 0.2), (3, 1.0), (4, 0.02)] {
        let s = sample_latents(&dist, n, seed).unwrap();
        let a = sample_adjacency_from_kernel(&spec, &s.points, 1.0, seed).unwrap();
        let loss = SurrogateLoss::Logistic;
        let (_, fast) = decompose_and_select(&a, loss, 0.1, constant).unwrap();
        let limit = dimension_search_limit(n, loss, 0.1, constant);
        let full = eigendecompose(&a, EigenCount::Top(limit)).unwrap();
        assert_eq!(fast, select_dimension_with(&full, loss, 0.1, constant).unwrap(), "c = {constant}");
    }
}

#[test]
fn edges_are_independent_with_the_right_marginals() {
    let k = KernelMatrix::from_matrix(DMatrix::from_row_slice(
        3,
        3,
        &[1.0, 0.3, 0.6, 0.3, 1.0, 0.8, 0.6, 0.8, 1.0],
    ))
    .unwrap();
    let rho = 0.5;
    let trials = 10_000;
    let (mut a01, mut a02, mut both) = (0.0, 0.0, 0.0);
    let mut a12 = 0.0;
    for seed in 0..trials {
        let a = sample_adjacency(&k, rho, seed).unwrap();
        let (x, y) = (a.has_edge(0, 1) as u8 as f64, a.has_edge(0, 2) as u8 as f64);
        a01 += x;
        a02 += y;
        both += x * y;
        a12 += a.has_edge(1, 2) as u8 as f64;
    }
    let t = trials as f64;
    let cov = both / t - (a01 / t) * (a02 / t);
    assert!(cov.abs() <= 4.0 / t.sqrt(), "{cov}");
    for (count, p) in [(a01, 0.15), (a02, 0.3), (a12, 0.4)] {
        let sd = (p * (1.0 - p) / t).sqrt();
        assert_abs_diff_eq!(count / t, p, epsilon = 4.0 * sd);
    }
}
