mod common;

use common::{toy_model, toy_set};
use handmove::harness::{
    baseline_logreg, evaluate, fold_jobs, make_cross_folds, make_intra_folds, roc_auc, run_experiment,
    sweep_with, ExperimentConfig, LogregConfig, MeanSd, Method, Metrics, Scheme, Segments,
};
use handmove::Error;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Brute-force Mann–Whitney: fraction of (positive, negative) pairs ordered
/// correctly, ties counting one half.
fn mann_whitney(preds: &[(f64, f64)]) -> f64 {
    let pos: Vec<f64> = preds.iter().filter(|p| p.1 >= 0.5).map(|p| p.0).collect();
    let neg: Vec<f64> = preds.iter().filter(|p| p.1 < 0.5).map(|p| p.0).collect();
    let mut u = 0.0;
    for &a in &pos {
        for &b in &neg {
            u += if a > b {
                1.0
            } else if a == b {
                0.5
            } else {
                0.0
            };
        }
    }
    u / (pos.len() * neg.len()) as f64
}

fn preds_from_counts(tp: usize, fp: usize, fn_: usize, tn: usize) -> Vec<(f64, f64)> {
    let mut v = vec![(0.9, 1.0); tp];
    v.extend(vec![(0.6, 0.0); fp]);
    v.extend(vec![(0.2, 1.0); fn_]);
    v.extend(vec![(0.1, 0.0); tn]);
    v
}

#[test]
fn metric_examples() {
    let m = evaluate(&preds_from_counts(4, 1, 2, 3), 0.5);
    assert_eq!((m.tp, m.fp, m.fn_, m.tn), (4, 1, 2, 3));
    assert_eq!(m.precision, 0.8);
    assert!((m.recall - 0.6667).abs() < 1e-4);
    assert_eq!(m.recall, 4.0 / 6.0);
    assert_eq!(m.accuracy, 0.7);
    assert!(!m.precision_undefined && !m.recall_undefined);

    let all = evaluate(&preds_from_counts(5, 0, 0, 5), 0.5);
    assert_eq!((all.precision, all.recall, all.accuracy), (1.0, 1.0, 1.0));

    let none = evaluate(&preds_from_counts(0, 0, 3, 4), 0.5);
    assert_eq!(none.precision, 0.0);
    assert!(none.precision_undefined && !none.recall_undefined);
    let no_pos = evaluate(&preds_from_counts(0, 2, 0, 4), 0.5);
    assert_eq!(no_pos.recall, 0.0);
    assert!(no_pos.recall_undefined);

    // p exactly at the threshold is called positive
    let at = evaluate(&[(0.5, 1.0), (0.5, 0.0)], 0.5);
    assert_eq!((at.tp, at.fp), (1, 1));

    let json = serde_json::to_value(m).unwrap();
    assert_eq!(json["fn"], 2);
}

#[test]
fn mean_sd_is_sample_sd() {
    let m = MeanSd::of(&[1.0, 2.0, 3.0, 4.0]);
    assert_eq!(m.mean, 2.5);
    assert!((m.sd - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
    assert_eq!(MeanSd::of(&[0.7]).sd, 0.0);
}

#[test]
fn roc_examples() {
    let sep = [(0.1, 0.0), (0.2, 0.0), (0.8, 1.0), (0.9, 1.0)];
    let r = roc_auc(&sep).unwrap();
    assert_eq!(r.auc, 1.0);
    assert_eq!(r.points.first().map(|p| (p.fpr, p.tpr)), Some((0.0, 0.0)));
    assert_eq!(r.points.last().map(|p| (p.fpr, p.tpr)), Some((1.0, 1.0)));
    assert!(r.points[0].threshold.is_infinite());

    let flipped: Vec<(f64, f64)> = sep.iter().map(|&(p, y)| (p, 1.0 - y)).collect();
    assert_eq!(roc_auc(&flipped).unwrap().auc, 0.0);
    assert_eq!(roc_auc(&[(0.5, 0.0), (0.5, 1.0)]).unwrap().auc, 0.5);

    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let noise: Vec<(f64, f64)> = (0..4000)
        .map(|_| (rng.gen::<f64>(), f64::from(rng.gen::<bool>())))
        .collect();
    assert!((roc_auc(&noise).unwrap().auc - 0.5).abs() < 0.05);

    assert!(matches!(roc_auc(&[(0.3, 1.0), (0.4, 1.0)]), Err(Error::SingleClass)));
    assert!(matches!(roc_auc(&[]), Err(Error::SingleClass)));

    let csv = roc_auc(&sep).unwrap().to_csv();
    assert!(csv.starts_with("threshold,fpr,tpr\ninf,0,0\n"));
    assert!(csv.ends_with(",1,1\n"));
}

#[test]
fn auc_matches_mann_whitney_on_random_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut checked = 0;
    while checked < 2000 {
        let n = rng.gen_range(2..=50);
        // coarse scores so ties are common
        let levels = rng.gen_range(2..20);
        let preds: Vec<(f64, f64)> = (0..n)
            .map(|_| (f64::from(rng.gen_range(0..levels)) / 7.0, f64::from(rng.gen::<bool>())))
            .collect();
        let Ok(r) = roc_auc(&preds) else { continue };
        let want = mann_whitney(&preds);
        assert!((r.auc - want).abs() <= 1e-12, "{preds:?}: {} vs {want}", r.auc);
        checked += 1;
    }
}

#[test]
fn cross_folds_for_103_subjects() {
    let plan = make_cross_folds(103, 5).unwrap();
    plan.check_partition().unwrap();
    let mut sizes: Vec<usize> = plan.folds.iter().map(Vec::len).collect();
    sizes.sort_unstable();
    assert_eq!(sizes, [vec![10; 7], vec![11; 3]].concat());
    assert_eq!(plan, make_cross_folds(103, 5).unwrap());
    assert_ne!(plan.folds, make_cross_folds(103, 6).unwrap().folds);
    for f in 0..10 {
        assert_eq!(plan.train_units(f).len() + plan.folds[f].len(), 103);
    }
    assert!(matches!(make_cross_folds(9, 0), Err(Error::TooFewUnits { folds: 10, have: 9 })));
}

#[test]
fn intra_folds_per_subject() {
    let plan = make_intra_folds(45, 7, 0).unwrap();
    plan.check_partition().unwrap();
    let mut sizes: Vec<usize> = plan.folds.iter().map(Vec::len).collect();
    sizes.sort_unstable();
    assert_eq!(sizes, [vec![4; 5], vec![5; 5]].concat());
    assert_ne!(plan.folds, make_intra_folds(45, 8, 0).unwrap().folds);
    assert!(matches!(make_intra_folds(9, 1, 0), Err(Error::TooFewUnits { .. })));
}

#[test]
fn fold_jobs_are_disjoint_and_cover_segments() {
    let set = toy_set(12, 10, 1.0, 1);
    let seg = Segments::from_set(&set, None);
    for scheme in [Scheme::Cross, Scheme::Intra] {
        let jobs = fold_jobs(scheme, &seg, 3).unwrap();
        assert_eq!(jobs.len(), if scheme == Scheme::Cross { 10 } else { 120 });
        let mut tested = vec![0; seg.len()];
        for j in &jobs {
            for &i in &j.test {
                tested[i] += 1;
                assert!(!j.train.contains(&i));
            }
            match scheme {
                Scheme::Cross => {
                    assert_eq!(j.train.len() + j.test.len(), seg.len());
                    let test_subj: Vec<u16> = j.test.iter().map(|&i| seg.subject[i]).collect();
                    assert!(j.train.iter().all(|&i| !test_subj.contains(&seg.subject[i])));
                }
                Scheme::Intra => {
                    let s = j.subject.unwrap();
                    assert!(j.train.iter().chain(&j.test).all(|&i| seg.subject[i] == s));
                    assert_eq!(j.train.len() + j.test.len(), 10);
                }
            }
        }
        assert!(tested.iter().all(|&c| c == 1));
    }
}

#[test]
fn experiment_learns_toy_signal_and_is_deterministic() {
    let set = toy_set(10, 20, 1.5, 2);
    let cfg = ExperimentConfig {
        model: toy_model(),
        seed: 9,
        ..ExperimentConfig::for_scheme(Scheme::Cross)
    };
    let a = run_experiment(&cfg, &set).unwrap();
    let b = run_experiment(&cfg, &set).unwrap();
    let dir = tempfile::tempdir().unwrap();
    a.write(&dir.path().join("a")).unwrap();
    b.write(&dir.path().join("b")).unwrap();
    let read = |p: &str| std::fs::read(dir.path().join(p)).unwrap();
    assert_eq!(read("a/metrics.json"), read("b/metrics.json"));
    assert_eq!(read("a/roc.csv"), read("b/roc.csv"));

    assert_eq!(a.folds.len(), 10);
    assert_eq!(a.n_segments, 200);
    assert!(a.aggregate.accuracy.mean > 0.9, "{:?}", a.aggregate);
    assert!(a.auc.unwrap() > 0.95);
    let pooled: usize = a.folds.iter().map(|f| f.metrics.n()).sum();
    assert_eq!(pooled, a.pooled.n());
    for f in &a.folds {
        let m = f.metrics;
        assert_eq!(m.n(), f.n_test);
        assert_eq!(m, Metrics::from_counts(m.tp, m.fp, m.fn_, m.tn));
    }

    let shuffled = run_experiment(&ExperimentConfig { label_shuffle: true, ..cfg.clone() }, &set).unwrap();
    assert!((shuffled.pooled.accuracy - 0.5).abs() < 0.1, "{}", shuffled.pooled.accuracy);
}

#[test]
fn intra_aggregate_is_over_subject_means() {
    let set = toy_set(3, 20, 1.5, 3);
    let cfg = ExperimentConfig {
        model: tiny_intra(),
        ..ExperimentConfig::for_scheme(Scheme::Intra)
    };
    let rep = run_experiment(&cfg, &set).unwrap();
    assert_eq!(rep.folds.len(), 30);
    assert_eq!(rep.subjects.len(), 3);
    let means: Vec<f64> = rep.subjects.iter().map(|s| s.accuracy.mean).collect();
    assert_eq!(rep.aggregate.accuracy, MeanSd::of(&means));
    for s in &rep.subjects {
        let folds: Vec<f64> = rep
            .folds
            .iter()
            .filter(|f| f.subject == Some(s.subject))
            .map(|f| f.metrics.accuracy)
            .collect();
        assert_eq!(s.accuracy, MeanSd::of(&folds));
    }

    let only = ExperimentConfig {
        subjects: Some(vec![2]),
        ..cfg
    };
    assert_eq!(run_experiment(&only, &set).unwrap().folds.len(), 10);
}

fn tiny_intra() -> handmove::nn::ModelConfig {
    handmove::nn::ModelConfig {
        batch_size: 2,
        epochs: 3,
        ..toy_model()
    }
}

#[test]
fn config_must_match_store() {
    let set = toy_set(10, 4, 1.0, 4);
    let base = ExperimentConfig {
        model: toy_model(),
        ..ExperimentConfig::default()
    };
    let mut wrong_dim = base.clone();
    wrong_dim.model.input_dim = 297;
    assert!(matches!(run_experiment(&wrong_dim, &set), Err(Error::Config(_))));
    let wrong_len = ExperimentConfig {
        segment_len: 1.0,
        ..base.clone()
    };
    assert!(matches!(run_experiment(&wrong_len, &set), Err(Error::Config(_))));
    let too_few = ExperimentConfig {
        subjects: Some((1..=9).collect()),
        ..base
    };
    assert!(matches!(run_experiment(&too_few, &set), Err(Error::TooFewUnits { .. })));
}

#[test]
fn logreg_baseline() {
    let set = toy_set(10, 20, 1.5, 5);
    let cfg = ExperimentConfig {
        model: toy_model(),
        ..ExperimentConfig::default()
    };
    let rep = baseline_logreg(&cfg, &set).unwrap();
    assert_eq!(rep.method, Method::Logreg);
    assert!(rep.aggregate.accuracy.mean >= 0.9, "{:?}", rep.aggregate);

    // zero iterations: p = 0.5 everywhere, every segment called Right
    let idle = ExperimentConfig {
        logreg: LogregConfig {
            iterations: 0,
            ..LogregConfig::default()
        },
        ..cfg
    };
    let rep = baseline_logreg(&idle, &set).unwrap();
    assert_eq!(rep.pooled.accuracy, 0.5);
    assert_eq!(rep.pooled.recall, 1.0);
}

#[test]
fn sweep_rows_follow_sizes() {
    let cfg = ExperimentConfig {
        model: handmove::nn::ModelConfig {
            epochs: 2,
            ..toy_model()
        },
        ..ExperimentConfig::default()
    };
    let (table, reports) = sweep_with(&cfg, &[0.25, 2.0], |size| {
        let mut set = toy_set(10, 6, 1.0, 6);
        set.meta.config.segment_len = size;
        Ok(set)
    })
    .unwrap();
    assert_eq!(table.rows.len(), 2);
    assert_eq!(reports.len(), 2);
    assert_eq!(table.rows[0].segment_len, 0.25);
    let md = table.to_markdown();
    assert_eq!(md.lines().count(), 4);
    assert!(md.lines().nth(2).unwrap().starts_with("| 0.25 | "));
    assert_eq!(table.to_csv().lines().count(), 3);
}

proptest! {
    #[test]
    fn ratios_follow_from_counts(preds in prop::collection::vec((0.0f64..1.0, prop::bool::ANY), 1..200), t in 0.05f64..0.95) {
        let preds: Vec<(f64, f64)> = preds.into_iter().map(|(p, y)| (p, f64::from(y))).collect();
        let m = evaluate(&preds, t);
        prop_assert_eq!(m.n(), preds.len());
        prop_assert_eq!(m.accuracy, (m.tp + m.tn) as f64 / preds.len() as f64);
        if m.tp + m.fp > 0 {
            prop_assert_eq!(m.precision, m.tp as f64 / (m.tp + m.fp) as f64);
        }
        if m.tp + m.fn_ > 0 {
            prop_assert_eq!(m.recall, m.tp as f64 / (m.tp + m.fn_) as f64);
        }
        for r in [m.precision, m.recall, m.accuracy] {
            prop_assert!((0.0..=1.0).contains(&r));
        }
    }

    #[test]
    fn roc_is_monotone(preds in prop::collection::vec((0u8..30, prop::bool::ANY), 2..120)) {
        let preds: Vec<(f64, f64)> = preds.into_iter().map(|(p, y)| (f64::from(p), f64::from(y))).collect();
        if let Ok(r) = roc_auc(&preds) {
            for w in r.points.windows(2) {
                prop_assert!(w[1].fpr >= w[0].fpr && w[1].tpr >= w[0].tpr);
                prop_assert!(w[1].threshold < w[0].threshold);
            }
            let last = r.points.last().unwrap();
            prop_assert_eq!((last.fpr, last.tpr), (1.0, 1.0));
            prop_assert!((0.0..=1.0).contains(&r.auc));
            prop_assert!((r.auc - mann_whitney(&preds)).abs() <= 1e-12);
        }
    }

    #[test]
    fn fold_plans_partition(n in 10usize..300, seed in any::<u64>()) {
        let plan = make_cross_folds(n, seed).unwrap();
        prop_assert!(plan.check_partition().is_ok());
        let sizes: Vec<usize> = plan.folds.iter().map(Vec::len).collect();
        prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
    }
}
