use mamaf_core::data::Label;
use mamaf_core::eval::*;
use proptest::prelude::*;

fn pct(x: Option<f64>) -> String {
    format!("{:.2}", x.unwrap() * 100.0)
}

#[test]
fn published_confusion_matrices() {
    let m = ConfusionMatrix::new(88, 6, 11, 43).metrics();
    assert_eq!(pct(m.sensitivity), "93.62");
    assert_eq!(pct(m.specificity), "79.63");
    assert_eq!(pct(m.precision), "88.89");
    assert_eq!(pct(m.f1), "91.19");
    assert_eq!(pct(m.accuracy), "88.51");
    let d = ConfusionMatrix::new(84, 10, 14, 40).metrics();
    assert_eq!(pct(d.sensitivity), "89.36");
    assert_eq!(pct(d.accuracy), "83.78");
}

#[test]
fn perfect_classifier() {
    let m = ConfusionMatrix::new(7, 0, 0, 5).metrics();
    for v in [m.sensitivity, m.specificity, m.precision, m.f1, m.accuracy] {
        assert_eq!(v, Some(1.0));
    }
}

#[test]
fn cumulative_sums_folds() {
    let folds = [
        ConfusionMatrix::new(18, 1, 2, 9),
        ConfusionMatrix::new(17, 2, 3, 8),
        ConfusionMatrix::new(18, 1, 2, 9),
        ConfusionMatrix::new(17, 1, 2, 8),
        ConfusionMatrix::new(18, 1, 2, 9),
    ];
    let total = cumulative_confusion(&folds).unwrap();
    assert_eq!(total, ConfusionMatrix::new(88, 6, 11, 43));
    assert_eq!(total.total(), 148);
    assert_eq!(cumulative_confusion(&folds[..1]).unwrap(), folds[0]);
    assert!(cumulative_confusion(&[]).is_err());
}

fn preds(pos: &[f64], neg: &[f64]) -> Vec<ScoredPrediction> {
    let mk = |s: f64, label, i| ScoredPrediction {
        subject_id: format!("{label}{i}"),
        score: s,
        label,
    };
    pos.iter()
        .enumerate()
        .map(|(i, &s)| mk(s, Label::Positive, i))
        .chain(neg.iter().enumerate().map(|(i, &s)| mk(s, Label::Negative, i)))
        .collect()
}

fn pair_count_auc(p: &[ScoredPrediction]) -> f64 {
    let (mut wins, mut pairs) = (0.0, 0.0);
    for a in p.iter().filter(|x| x.label.is_positive()) {
        for b in p.iter().filter(|x| !x.label.is_positive()) {
            pairs += 1.0;
            if a.score > b.score {
                wins += 1.0;
            } else if a.score == b.score {
                wins += 0.5;
            }
        }
    }
    wins / pairs
}

#[test]
fn auc_examples() {
    assert_eq!(roc_auc(&preds(&[0.9, 0.8], &[0.1, 0.2])).unwrap().auc, 1.0);
    assert_eq!(roc_auc(&preds(&[0.5, 0.5], &[0.5])).unwrap().auc, 0.5);
    let r = roc_auc(&preds(&[0.9, 0.6, 0.4], &[0.5, 0.3])).unwrap();
    assert!((r.auc - 5.0 / 6.0).abs() < 1e-12);
    assert!(roc_auc(&preds(&[0.9], &[])).is_err());
    assert!(roc_auc(&preds(&[1.5], &[0.1])).is_err());
}

proptest! {
    #[test]
    fn auc_equals_pair_counting(
        pos in prop::collection::vec(0u8..6, 1..15),
        neg in prop::collection::vec(0u8..6, 1..15),
    ) {
        // Few distinct levels so ties are common.
        let p = preds(
            &pos.iter().map(|&v| v as f64 / 5.0).collect::<Vec<_>>(),
            &neg.iter().map(|&v| v as f64 / 5.0).collect::<Vec<_>>(),
        );
        let r = roc_auc(&p).unwrap();
        prop_assert!((r.auc - pair_count_auc(&p)).abs() < 1e-9);
        prop_assert!(r.points.windows(2).all(|w| w[0].fpr <= w[1].fpr && w[0].tpr <= w[1].tpr));
        let last = r.points.last().unwrap();
        prop_assert_eq!((last.fpr, last.tpr), (1.0, 1.0));
    }

    #[test]
    fn metrics_are_scale_free(tp in 0u64..50, fn_ in 0u64..50, fp in 0u64..50, tn in 0u64..50, k in 1u64..20) {
        let a = ConfusionMatrix::new(tp, fn_, fp, tn).metrics();
        let b = ConfusionMatrix::new(tp * k, fn_ * k, fp * k, tn * k).metrics();
        for (x, y) in [
            (a.sensitivity, b.sensitivity),
            (a.specificity, b.specificity),
            (a.precision, b.precision),
            (a.f1, b.f1),
            (a.accuracy, b.accuracy),
        ] {
            match (x, y) {
                (Some(x), Some(y)) => prop_assert!((x - y).abs() < 1e-12),
                (None, None) => {}
                _ => prop_assert!(false, "definedness changed under scaling"),
            }
        }
    }

    #[test]
    fn thresholding_agrees_with_accuracy(scores in prop::collection::vec((0.0f64..=1.0, any::<bool>()), 1..30)) {
        let p: Vec<ScoredPrediction> = scores
            .iter()
            .enumerate()
            .map(|(i, &(s, pos))| ScoredPrediction {
                subject_id: i.to_string(),
                score: s,
                label: if pos { Label::Positive } else { Label::Negative },
            })
            .collect();
        let cm = ConfusionMatrix::from_predictions(&p);
        let correct = p.iter().filter(|x| (x.score > 0.5) == x.label.is_positive()).count();
        prop_assert_eq!(cm.metrics().accuracy, Some(correct as f64 / p.len() as f64));
    }
}

#[test]
fn report_files() {
    let dir = tempfile::tempdir().unwrap();
    let p = preds(&[0.9, 0.6, 0.4, 0.7], &[0.5, 0.3, 0.65]);
    let roc = roc_auc(&p).unwrap();
    let report = MetricsReport::new(ConfusionMatrix::from_predictions(&p), Some(roc.auc));
    let train = [0.7, 0.5, 0.4];
    let val = [0.72, 0.6, 0.61];
    let curve = LossCurve {
        name: "fold 0",
        train: &train,
        validation: &val,
    };
    emit_report(dir.path(), &report, &roc, std::slice::from_ref(&curve)).unwrap();

    let json = std::fs::read_to_string(dir.path().join("metrics.json")).unwrap();
    let back: MetricsReport = serde_json::from_str(&json).unwrap();
    assert_eq!(back, report);
    for key in ["sensitivity", "specificity", "precision", "f1", "accuracy", "auc", "counts"] {
        assert!(json.contains(&format!("\"{key}\"")), "{key}");
    }

    let csv = std::fs::read_to_string(dir.path().join("roc.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("fpr,tpr,threshold"));
    let fprs: Vec<f64> = lines.map(|l| l.split(',').next().unwrap().parse().unwrap()).collect();
    assert!(fprs.windows(2).all(|w| w[0] <= w[1]));

    let svg = std::fs::read_to_string(dir.path().join("roc.svg")).unwrap();
    assert!(svg.contains(r#"viewBox="0 0 1000 800""#));
    assert!(svg.contains(&format!("AUC = {:.2}", roc.auc)));
    assert!(!svg.contains("<script"));
    let loss = std::fs::read_to_string(dir.path().join("loss.svg")).unwrap();
    assert!(loss.contains("<polyline"));

    let again = tempfile::tempdir().unwrap();
    emit_report(again.path(), &report, &roc, &[curve]).unwrap();
    for f in ["metrics.json", "roc.csv", "roc.svg", "loss.svg"] {
        assert_eq!(std::fs::read(dir.path().join(f)).unwrap(), std::fs::read(again.path().join(f)).unwrap());
    }
}
