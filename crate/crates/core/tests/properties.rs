use hamflow::boosting::adaboost;
use hamflow::features::{build_feature_bank, eval_conley, eval_density, eval_direction, feature_matrix, BankConfig};
use hamflow::landscape::{derive_systems, normalize};
use hamflow::streamline::{extract_all_orbits, lattice_circle};
use hamflow::topo_index::{continuous_conley, discrete_conley, poincare_index};
use hamflow::{BoundaryFlow, ConleyType, DirectionMode, FeatureMatrix, FeatureSource, ScalarField, VectorField};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const EPS: f64 = 1e-9;

fn int_field(w: usize, h: usize, seed: u64) -> ScalarField<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ScalarField::from_fn(w, h, |_, _| rng.gen_range(0..256) as f64).unwrap()
}

/// Sum of a few broad random blobs, rounded to integers.
fn smooth_int_field(w: usize, h: usize, seed: u64) -> ScalarField<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let blobs: Vec<(f64, f64, f64, f64)> = (0..3)
        .map(|_| (rng.gen_range(0.0..w as f64), rng.gen_range(0.0..h as f64), rng.gen_range(3.0..8.0), rng.gen_range(-100.0..100.0)))
        .collect();
    ScalarField::from_fn(w, h, |x, y| {
        let v: f64 = blobs
            .iter()
            .map(|&(cx, cy, s, a)| a * (-((x as f64 - cx).powi(2) + (y as f64 - cy).powi(2)) / (2.0 * s * s)).exp())
            .sum();
        (128.0 + v).round()
    })
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn flows_are_orthogonal_and_rotated(seed in any::<u64>(), w in 2usize..20, h in 2usize..20) {
        let f = int_field(w, h, seed);
        let (ng, ham) = derive_systems(&f);
        for r in 0..h {
            for c in 0..w {
                let (a, b) = ng.get(c, r);
                prop_assert_eq!(ham.get(c, r), (b, -a));
                prop_assert_eq!(a * ham.get(c, r).0 + b * ham.get(c, r).1, 0.0);
            }
        }
    }

    #[test]
    fn offset_leaves_directions_unchanged(seed in any::<u64>(), c in -300i32..300) {
        let f = int_field(12, 9, seed);
        let g = f.offset(c as f64).unwrap();
        let d1 = normalize(&derive_systems(&f).0, EPS).unwrap();
        let d2 = normalize(&derive_systems(&g).0, EPS).unwrap();
        for r in 0..9 {
            for col in 0..12 {
                prop_assert_eq!(d1.angle(col, r), d2.angle(col, r));
                prop_assert_eq!(d1.is_stationary(col, r), d2.is_stationary(col, r));
            }
        }
    }

    #[test]
    fn orbits_are_adjacent_bounded_and_cover(seed in any::<u64>()) {
        let f = smooth_int_field(18, 15, seed);
        let df = normalize(&derive_systems(&f).1, EPS).unwrap();
        let max_len = 60;
        let orbits = extract_all_orbits(&df, &f, 1, max_len).unwrap();
        let mut covered = vec![false; 18 * 15];
        for o in &orbits {
            prop_assert!(o.len() <= max_len);
            let pts = o.points();
            for w in pts.windows(2) {
                prop_assert_eq!(w[0].chebyshev(w[1]), 1);
            }
            if o.is_closed() {
                prop_assert_eq!(pts[pts.len() - 1].chebyshev(pts[0]), 1);
            }
            for p in pts {
                covered[p.row * 18 + p.col] = true;
            }
        }
        for r in 0..15 {
            for c in 0..18 {
                prop_assert!(covered[r * 18 + c] || df.is_stationary(c, r), "({c},{r}) uncovered");
            }
        }
        prop_assert_eq!(orbits, extract_all_orbits(&df, &f, 1, max_len).unwrap());
    }

    #[test]
    fn bowl_index_survives_gradient_noise(seed in any::<u64>()) {
        let bowl = ScalarField::from_fn(41, 41, |x, y| (x as f64 - 20.0).powi(2) + (y as f64 - 20.0).powi(2)).unwrap();
        let (ng, _) = derive_systems(&bowl);
        let amp = 0.05 * ng.max_magnitude();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noisy = VectorField::from_fn(41, 41, |c, r| {
            let (u, v) = ng.get(c, r);
            (u + rng.gen_range(-amp..amp), v + rng.gen_range(-amp..amp))
        }).unwrap();
        let circle = lattice_circle(20, 20, 12.0).unwrap();
        let index = poincare_index(&circle, &normalize(&noisy, EPS).unwrap()).unwrap();
        prop_assert_eq!(index.round(), 1.0);
    }

    #[test]
    fn conley_ratio_in_unit_interval(flags in proptest::collection::vec(any::<bool>(), 4..40)) {
        let flow = BoundaryFlow::from_flags(flags.clone());
        let ratio: f64 = continuous_conley(&flow);
        prop_assert!((0.0..=1.0).contains(&ratio));
        let all_entering = flags.iter().all(|f| !f);
        prop_assert_eq!(all_entering, ratio == 0.0);
        prop_assert_eq!(all_entering, discrete_conley(&flow) == ConleyType::TwoPointSet);
    }

    #[test]
    fn feature_values_have_their_ranges(seed in any::<u64>()) {
        let canon = smooth_int_field(16, 14, seed);
        let Ok(bank) = build_feature_bank(&canon, BankConfig::default()) else { return Ok(()); };
        let img = int_field(16, 14, seed ^ 0x55);
        for t in &bank.templates {
            match t.kind {
                hamflow::FeatureKind::DensityMatch => {
                    prop_assert!(eval_density(t, &img).unwrap() >= 0.0);
                    prop_assert_eq!(eval_density(t, &canon).unwrap(), 0.0);
                }
                hamflow::FeatureKind::DirectionMatch => {
                    prop_assert!(eval_direction(t, &img, DirectionMode::Wrapped, EPS).unwrap() >= 0.0);
                    prop_assert_eq!(eval_direction(t, &canon, DirectionMode::Wrapped, EPS).unwrap(), 0.0);
                }
                hamflow::FeatureKind::ConleyIndex => {
                    prop_assert!((0.0..=1.0).contains(&eval_conley(t, &img).unwrap()));
                }
                hamflow::FeatureKind::PoincareIndex => {}
            }
        }
    }

    #[test]
    fn boosting_weights_and_bound(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<Vec<f64>> = (0..40).map(|_| (0..5).map(|_| rng.gen_range(0..20) as f64).collect()).collect();
        let mut labels: Vec<u8> = rows.iter().map(|r| u8::from(r[0] + r[3] > 19.0)).collect();
        labels[0] = 1;
        labels[1] = 0;
        let m = FeatureMatrix::from_plain_rows(rows, labels).unwrap();
        if let Ok((_, report)) = adaboost(&m, 8) {
            for r in &report.rounds {
                prop_assert!((r.weight_sum - 1.0).abs() < 1e-9);
                prop_assert!(r.weighted_error < 0.5);
            }
            for w in report.rounds.windows(2) {
                prop_assert!(w[1].error_bound <= w[0].error_bound);
            }
        }
    }
}

fn in_pool<R: Send>(threads: usize, f: impl FnOnce() -> R + Send) -> R {
    rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(f)
}

#[test]
fn parallel_results_do_not_depend_on_thread_count() {
    let canon = smooth_int_field(20, 18, 4);
    let bank = build_feature_bank(&canon, BankConfig::default()).unwrap();
    let imgs: Vec<ScalarField<f64>> = (0..24).map(|i| smooth_int_field(20, 18, 100 + i)).collect();
    let labels: Vec<u8> = (0..24).map(|i| u8::from(i % 3 == 0)).collect();
    let run = |threads| {
        in_pool(threads, || {
            let m = feature_matrix(&bank, &imgs, &labels).unwrap();
            let (sc, _) = adaboost(&m, 6).unwrap();
            (serde_json::to_string(&m).unwrap(), sc.to_json().unwrap())
        })
    };
    let one = run(1);
    assert_eq!(one, run(4));
    assert_eq!(one, run(7));
    assert_eq!(FeatureSource::<f64>::len(&bank), bank.templates.len());
}
