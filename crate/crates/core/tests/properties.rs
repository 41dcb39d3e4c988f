use prism::dataset::{self, Dataset, Label};
use prism::kernel::{self, KernelConfig};
use prism::model_selection::{self, Arm, CvOptions, GridSpec, MinedPriors};
use prism::prior_miner;
use prism::ptsm::{self, PriorConstraintSet, PtsmConfig};
use prism::qp::{self, FeasibleSetA};
use prism::stats;
use proptest::prelude::*;

fn labels_strategy(n: std::ops::RangeInclusive<usize>) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(prop::bool::ANY, n)
        .prop_filter("both classes", |v| v.iter().any(|&b| b) && v.iter().any(|&b| !b))
        .prop_map(|v| v.into_iter().map(|b| if b { 1.0 } else { -1.0 }).collect())
}

/// Labels, a ν in (0, ν_max] and two arbitrary points to project.
fn projection_case() -> impl Strategy<Value = (Vec<f64>, f64, Vec<f64>, Vec<f64>)> {
    labels_strategy(2..=12).prop_flat_map(|y| {
        let n = y.len();
        let pos = y.iter().filter(|&&v| v > 0.0).count();
        let nu_max = qp::nu_max_of(pos, n - pos);
        (
            Just(y),
            (0.01f64..=1.0).prop_map(move |f| f * nu_max),
            prop::collection::vec(-1.0f64..1.0, n),
            prop::collection::vec(-1.0f64..1.0, n),
        )
    })
}

fn dataset_strategy(rows: std::ops::RangeInclusive<usize>, dims: std::ops::RangeInclusive<usize>) -> impl Strategy<Value = Dataset> {
    (rows, dims).prop_flat_map(|(n, d)| {
        (prop::collection::vec(prop::collection::vec(-5.0f64..5.0, d), n), labels_strategy(n..=n))
            .prop_map(|(x, y)| Dataset::from_rows(x, &y).unwrap())
    })
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn projection_is_feasible_idempotent_and_nonexpansive((y, nu, v, w) in projection_case()) {
        let set = FeasibleSetA::new(&y, nu).unwrap();
        let pv = qp::project_onto_a(&v, &set, 1e-9).unwrap();
        let pw = qp::project_onto_a(&w, &set, 1e-9).unwrap();
        prop_assert!(set.max_residual(&pv) <= 1e-9, "residual {}", set.max_residual(&pv));
        let ppv = qp::project_onto_a(&pv, &set, 1e-9).unwrap();
        prop_assert!(dist(&pv, &ppv) <= 1e-9);
        prop_assert!(dist(&pv, &pw) <= dist(&v, &w) + 1e-9);
        // Obtuse-angle characterization against another feasible point.
        let inner: f64 = v.iter().zip(&pv).zip(&pw).map(|((a, p), z)| (a - p) * (z - p)).sum();
        prop_assert!(inner <= 1e-9, "inner product {inner}");
    }

    #[test]
    fn split_partitions_indices(n in 2usize..200, f in 0.05f64..0.95, seed in any::<u64>()) {
        if let Ok((tr, te)) = dataset::split_indices(n, f, seed, None) {
            let mut all: Vec<usize> = tr.iter().chain(&te).copied().collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
            prop_assert_eq!(tr.len(), (f * n as f64 + 0.5 + 1e-9).floor() as usize);
        }
    }

    #[test]
    fn kfold_partitions_validation(n in 2usize..120, k in 2usize..8, seed in any::<u64>()) {
        prop_assume!(k <= n);
        let folds = dataset::kfold_indices(n, k, seed, None).unwrap();
        let mut seen: Vec<usize> = folds.iter().flat_map(|f| f.validation.iter().copied()).collect();
        seen.sort_unstable();
        prop_assert_eq!(seen, (0..n).collect::<Vec<_>>());
        let sizes: Vec<usize> = folds.iter().map(|f| f.validation.len()).collect();
        prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        for f in &folds {
            prop_assert_eq!(f.train.len() + f.validation.len(), n);
            prop_assert!(f.train.iter().all(|i| f.validation.binary_search(i).is_err()));
        }
    }

    #[test]
    fn minmax_maps_training_rows_into_unit_box(d in dataset_strategy(2..=30, 1..=5)) {
        let p = dataset::fit_minmax(&d);
        let scaled = d.scaled(&p).unwrap();
        for s in scaled.samples() {
            prop_assert!(s.features.iter().all(|&v| (0.0..=1.0).contains(&v)));
        }
    }

    #[test]
    fn libsvm_round_trip(d in dataset_strategy(2..=20, 1..=6)) {
        let back = dataset::parse_libsvm(&d.to_libsvm()).unwrap();
        prop_assert_eq!(back.n_features(), d.n_features());
        prop_assert_eq!(back.samples(), d.samples());
    }

    #[test]
    fn gram_is_symmetric_with_unit_diagonal(d in dataset_strategy(2..=15, 1..=4), sigma in 0.1f64..10.0) {
        let g = kernel::gram(&d.rows(), &KernelConfig::rbf(sigma).unwrap()).unwrap();
        for i in 0..g.len() {
            prop_assert_eq!(g.get(i, i), 1.0);
            for j in 0..g.len() {
                prop_assert_eq!(g.get(i, j), g.get(j, i));
                prop_assert!(g.get(i, j) > 0.0 || g.get(i, j) == 0.0);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(60))]

    #[test]
    fn mined_prior_never_covers_the_opposite_class(d in dataset_strategy(4..=25, 2..=4), positive in any::<bool>()) {
        let target = if positive { Label::Positive } else { Label::Negative };
        let (p, report) = prior_miner::mine_prior(&d, target, 0.1).unwrap();
        let mut support = 0;
        for s in d.samples() {
            let covered = prior_miner::prior_satisfied(&s.features, &p).unwrap();
            if s.label == target {
                support += usize::from(covered);
            } else {
                prop_assert!(!covered);
            }
        }
        prop_assert_eq!(support, p.support);
        let k = (p.phi / 0.1).round();
        prop_assert!((p.phi - k * 0.1).abs() < 1e-12 && p.phi <= std::f64::consts::TAU);
        prop_assert!(report.pairs.iter().all(|q| q.support <= p.support));
    }

    #[test]
    fn lagrangian_split_is_an_identity(
        d in dataset_strategy(3..=12, 2..=3),
        b in -3.0f64..3.0,
        b_star in 0.0f64..2.0,
        seed in any::<u64>(),
    ) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let n = d.len();
        let y = d.label_values();
        let g = kernel::gram(&d.rows(), &KernelConfig::rbf(1.0).unwrap()).unwrap();
        let mut priors = PriorConstraintSet::empty(b_star);
        priors.pos_indices = (0..n).filter(|_| rng.gen_bool(0.5)).collect();
        priors.neg_indices = (0..n).filter(|_| rng.gen_bool(0.5)).collect();
        let alpha: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
        let beta: Vec<f64> = priors.pos_indices.iter().map(|_| rng.gen::<f64>()).collect();
        let gamma: Vec<f64> = priors.neg_indices.iter().map(|_| rng.gen::<f64>()).collect();
        let cfg = PtsmConfig::new(0.2, KernelConfig::rbf(1.0).unwrap(), 0.5, 0.5);
        let diag = ptsm::decompose(&alpha, b, &beta, &gamma, &cfg, &g, &y, &priors).unwrap();
        prop_assert!(diag.identity_residual <= 1e-10);
    }

    #[test]
    fn t_test_is_antisymmetric_and_monotone(
        a in prop::collection::vec(0.0f64..1.0, 2..10),
        noise in prop::collection::vec(-0.2f64..0.2, 10),
        shift in 0.001f64..0.3,
    ) {
        let b: Vec<f64> = a.iter().zip(&noise).map(|(x, e)| x + e).collect();
        let p = stats::paired_t_test(&a, &b).unwrap().p_value;
        let q = stats::paired_t_test(&b, &a).unwrap().p_value;
        prop_assert!((p + q - 1.0).abs() <= 1e-12, "p={p} q={q}");
        let shifted: Vec<f64> = a.iter().map(|x| x + shift).collect();
        let r = stats::paired_t_test(&shifted, &b).unwrap().p_value;
        prop_assert!(r <= p + 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn cv_accuracies_are_fractions(d in dataset_strategy(12..=24, 2..=3), seed in any::<u64>(), with in any::<bool>()) {
        let pos = d.n_pos();
        prop_assume!(pos >= 3 && d.n_neg() >= 3);
        let d = d.scaled(&dataset::fit_minmax(&d)).unwrap();
        let grid = GridSpec {
            nu_values: vec![0.2],
            sigma_values: vec![0.5, 2.0],
            lambda2_values: vec![0.0, 0.05],
            lambda3_values: vec![0.0],
        };
        let opts = CvOptions { folds: 3, seed, stratified: true, ..Default::default() };
        let (mined, _) = MinedPriors::mine(&d, 0.1);
        let arm = if with { Arm::WithPriors(&mined) } else { Arm::WithoutPriors };
        {
            let table = model_selection::grid_search_cv(&d, &grid, arm, &opts).unwrap();
            for row in &table.rows {
                prop_assert!((0.0..=1.0).contains(&row.mean_accuracy));
                prop_assert!(row.fold_accuracies.iter().all(|a| (0.0..=1.0).contains(a)));
            }
            prop_assert!(table.rows.iter().all(|r| r.mean_accuracy <= table.best_row().mean_accuracy));
        }
    }
}
