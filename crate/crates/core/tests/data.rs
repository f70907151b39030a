use std::collections::HashSet;
use std::path::PathBuf;

use mamaf_core::data::*;
use mamaf_core::Tensor;
use proptest::prelude::*;

fn cohort(n_pos: usize, n_neg: usize) -> Manifest {
    let samples = (0..n_pos + n_neg)
        .map(|i| VideoSample {
            subject_id: format!("s{i:04}"),
            label: if i < n_pos { Label::Positive } else { Label::Negative },
            views: (0..4).map(|v| PathBuf::from(format!("s{i}_{v}.mvid"))).collect(),
            frame_counts: vec![30; 4],
            subtype: None,
            deficit_side: None,
        })
        .collect();
    let info = DatasetInfo {
        name: "test".into(),
        resolution: [8, 8],
        seed: 0,
    };
    Manifest::new(info, samples).unwrap()
}

fn positives(m: &Manifest, ids: &[String]) -> usize {
    ids.iter().filter(|id| m.get(id).unwrap().label.is_positive()).count()
}

fn assert_plan_contract(m: &Manifest, plan: &FoldPlan) {
    plan.verify(m).unwrap();
    let n = m.samples.len() as f64;
    let ratio = m.count(Label::Positive) as f64 / n;
    let mut union = HashSet::new();
    for f in &plan.folds {
        let expected = f.test.len() as f64 * ratio;
        let got = positives(m, &f.test) as f64;
        assert!((got - expected).abs() <= 1.0, "fold {}: {got} positives, expected {expected:.2}", f.index);
        let train: HashSet<_> = f.train.iter().collect();
        assert!(f.validation.iter().all(|v| !train.contains(v)));
        assert!(f.test.iter().all(|t| !train.contains(t)));
        for id in &f.test {
            assert!(union.insert(id.clone()));
        }
    }
    assert_eq!(union.len(), m.samples.len());
}

#[test]
fn full_sized_cohort_folds() {
    let m = cohort(94, 54);
    let plan = plan_folds(&m, 5, 0.2, 3).unwrap();
    assert_plan_contract(&m, &plan);
    for f in &plan.folds {
        assert!((29..=30).contains(&f.test.len()), "{}", f.test.len());
        let pos = positives(&m, &f.test);
        assert!((18..=19).contains(&pos));
        assert!((10..=11).contains(&(f.test.len() - pos)));
    }
}

#[test]
fn minimal_cohort_forces_one_each() {
    let m = cohort(5, 5);
    let plan = plan_folds(&m, 5, 0.2, 0).unwrap();
    for f in &plan.folds {
        assert_eq!(f.test.len(), 2);
        assert_eq!(positives(&m, &f.test), 1);
    }
}

#[test]
fn too_few_subjects_is_an_error() {
    assert!(plan_folds(&cohort(4, 10), 5, 0.2, 0).is_err());
}

#[test]
fn validation_split_is_stratified() {
    let m = cohort(30, 20);
    let plan = plan_folds(&m, 5, 0.2, 9).unwrap();
    for f in &plan.folds {
        // 24 positives and 16 negatives remain: 5 and 3 go to validation.
        assert_eq!(positives(&m, &f.validation), 5);
        assert_eq!(f.validation.len(), 8);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn fold_contract_holds(n_pos in 5usize..60, n_neg in 5usize..60, seed in any::<u64>()) {
        let m = cohort(n_pos, n_neg);
        assert_plan_contract(&m, &plan_folds(&m, 5, 0.2, seed).unwrap());
    }

    #[test]
    fn sampling_is_ordered_and_complete(t in 1usize..300, n in 1usize..120) {
        let idx = sample_indices(t, n).unwrap();
        prop_assert_eq!(idx.len(), n);
        prop_assert!(idx.windows(2).all(|w| w[0] <= w[1]));
        prop_assert!(idx.iter().all(|&i| i < t));
    }

    #[test]
    fn transforms_permute_pixels(k in 0usize..11, h in 1usize..6, seed in any::<u32>()) {
        let t = Transform::AUGMENTATIONS[k];
        let w = if matches!(t.rotation, Rotation::Rot90 | Rotation::Rot270) { h } else { h + 1 };
        let x = Tensor::from_fn(&[2, h, w, 3], |i| (i as u32 ^ seed) as f32).unwrap();
        let y = augment(&x, t).unwrap();
        let mut a: Vec<u32> = x.data().iter().map(|v| v.to_bits()).collect();
        let mut b: Vec<u32> = y.data().iter().map(|v| v.to_bits()).collect();
        a.sort_unstable();
        b.sort_unstable();
        prop_assert_eq!(a, b);
        prop_assert_eq!(y.shape(), x.shape());
    }
}

#[test]
fn bilinear_checkerboard_upsample() {
    // Half-pixel source coordinates for 2 -> 4 are 0, 0.25, 0.75, 1.25
    // (clamped at both ends), giving these interpolation weights.
    let weights = [[1.0, 0.0], [0.75, 0.25], [0.25, 0.75], [0.0, 1.0]];
    let board = [[0.0, 1.0], [1.0, 0.0]];
    let frame = Tensor::from_fn(&[2, 2, 3], |i| board[i / 6][(i / 3) % 2] as f32).unwrap();
    let out = resize_bilinear(&frame, 4, 4).unwrap();
    for i in 0..4 {
        for j in 0..4 {
            let mut want = 0.0f64;
            for a in 0..2 {
                for b in 0..2 {
                    want += weights[i][a] * weights[j][b] * board[a][b];
                }
            }
            for c in 0..3 {
                let got = out.data()[(i * 4 + j) * 3 + c] as f64;
                assert!((got - want).abs() < 1e-6, "({i},{j}): {got} vs {want}");
            }
        }
    }
}

fn loaded(n: usize, label: Label) -> Vec<LoadedSample> {
    (0..n)
        .map(|i| LoadedSample {
            subject_id: format!("{label}-{i}"),
            label,
            views: vec![Tensor::from_fn(&[1, 2, 2, 1], |p| (i * 4 + p) as f32).unwrap(); 4],
            augmentation: None,
        })
        .collect()
}

#[test]
fn balancing_fills_to_target() {
    let mut set = loaded(43, Label::Positive);
    set.extend(loaded(120, Label::Negative));
    let out = balance_augment(&set, 100, 5).unwrap();
    let pos: Vec<_> = out.iter().filter(|s| s.label == Label::Positive).collect();
    assert_eq!(pos.len(), 100);
    assert_eq!(pos.iter().filter(|s| s.is_augmented()).count(), 57);
    assert_eq!(out.iter().filter(|s| s.label == Label::Negative).count(), 120);
    assert!(out[..set.len()] == set[..]);
    for s in out.iter().filter(|s| s.is_augmented()) {
        assert!(s.subject_id.contains("#aug"));
        assert_ne!(s.augmentation, Some(Transform::IDENTITY));
    }
    assert_eq!(balance_augment(&set, 100, 5).unwrap(), out);
    assert!(balance_augment(&loaded(3, Label::Positive), 10, 0).is_err());
}

#[test]
fn synthetic_cohort_contract() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let cfg = SynthConfig {
        n_pos: 6,
        n_neg: 4,
        frames: 30,
        hw: 16,
        seed: 11,
    };
    let m = generate_synthetic_cohort(a.path(), &cfg).unwrap();
    generate_synthetic_cohort(b.path(), &cfg).unwrap();
    assert_eq!(m.count(Label::Positive), 6);
    assert_eq!(m.count(Label::Negative), 4);
    assert_eq!(Manifest::load(a.path()).unwrap(), m);
    for name in [MANIFEST_FILE, DATASET_FILE] {
        assert_eq!(std::fs::read(a.path().join(name)).unwrap(), std::fs::read(b.path().join(name)).unwrap());
    }
    let mut files = 0;
    for s in &m.samples {
        for v in &s.views {
            let bytes = std::fs::read(a.path().join(v)).unwrap();
            assert_eq!(bytes, std::fs::read(b.path().join(v)).unwrap());
            files += 1;
        }
    }
    assert_eq!(files, 40);

    for s in m.samples.iter().filter(|s| s.label.is_positive()) {
        let side = s.deficit_side.expect("positives record their deficit side");
        let (mut left, mut right) = (0.0, 0.0);
        for v in &s.views {
            let (l, r) = side_motion_energy(&read_video(a.path().join(v)).unwrap());
            left += l;
            right += r;
        }
        let (weak, strong) = match side {
            Side::Left => (left, right),
            Side::Right => (right, left),
        };
        assert!(weak < strong, "{}: deficit side energy {weak} vs {strong}", s.subject_id);
    }
}

#[test]
fn synthetic_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    let bad = SynthConfig {
        n_pos: 0,
        n_neg: 3,
        frames: 10,
        hw: 16,
        seed: 0,
    };
    assert!(generate_synthetic_cohort(dir.path(), &bad).is_err());
}

#[test]
fn load_views_samples_and_resizes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = SynthConfig {
        n_pos: 1,
        n_neg: 1,
        frames: 12,
        hw: 16,
        seed: 2,
    };
    let m = generate_synthetic_cohort(dir.path(), &cfg).unwrap();
    let views = load_views(dir.path(), &m.samples[0], 25, 32).unwrap();
    assert_eq!(views.len(), 4);
    for v in views {
        assert_eq!(v.shape(), &[25, 32, 32, 3]);
        assert!(v.data().iter().all(|&x| (0.0..=1.0).contains(&x)));
    }
}
