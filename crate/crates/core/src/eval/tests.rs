use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;

fn cm_from(pairs: &[(usize, usize)], classes: usize) -> ConfusionMatrix {
    let (labels, pred): (Vec<usize>, Vec<usize>) = pairs.iter().copied().unzip();
    let mut cm = ConfusionMatrix::new(classes);
    cm.accumulate(&pred, &labels, None).unwrap();
    cm
}

#[test]
fn perfect_predictions_score_one() {
    let labels = [1, 2, 2, 3, 0, 1];
    let mut cm = ConfusionMatrix::new(4);
    cm.accumulate(&labels, &labels, None).unwrap();
    assert_eq!(cm.total(), 5);
    for t in 0..4 {
        for p in 0..4 {
            assert!(t == p || cm.get(t, p) == 0);
        }
    }
    assert_eq!(cm.miou(AbsentClasses::Exclude).unwrap(), 1.0);
    assert_eq!(cm.fwiou().unwrap(), 1.0);
}

#[test]
fn hand_built_confusion() {
    // class 1: TP 1, FP 1; class 2: TP 1, FN 1.
    let cm = cm_from(&[(1, 1), (2, 2), (2, 1)], 3);
    assert_eq!(cm.iou(1), Some(0.5));
    assert_eq!(cm.iou(2), Some(0.5));
    assert_eq!(cm.miou(AbsentClasses::Exclude).unwrap(), 0.5);
    let wider = cm_from(&[(1, 1), (2, 2), (2, 1)], 5);
    assert_eq!(wider.miou(AbsentClasses::Exclude).unwrap(), 0.5);
    assert_eq!(wider.miou(AbsentClasses::Zero).unwrap(), 0.25);
    assert!(ConfusionMatrix::new(3).miou(AbsentClasses::Exclude).is_err());
}

#[test]
fn dominant_class_drives_fwiou() {
    let mut pairs = vec![(1, 1); 10_000];
    pairs.extend([(1, 2), (2, 2), (2, 1), (3, 2)]);
    let cm = cm_from(&pairs, 4);
    assert!((cm.fwiou().unwrap() - cm.iou(1).unwrap()).abs() < 1e-3);
}

#[test]
fn accumulation_matches_a_counting_loop() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let n = 500;
    let labels: Vec<usize> = (0..n).map(|_| rng.gen_range(0..6)).collect();
    let pred: Vec<usize> = (0..n).map(|_| rng.gen_range(1..6)).collect();
    let mask: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.7)).collect();
    let mut cm = ConfusionMatrix::new(6);
    cm.accumulate(&pred, &labels, Some(&mask)).unwrap();
    for t in 0..6 {
        for p in 0..6 {
            let count = (0..n).filter(|&i| mask[i] && labels[i] != 0 && labels[i] == t && pred[i] == p).count();
            assert_eq!(cm.get(t, p), count as u64);
        }
    }
    let mut none = ConfusionMatrix::new(6);
    none.accumulate(&pred, &labels, Some(&vec![false; n])).unwrap();
    assert_eq!(none.total(), 0);
}

#[test]
fn evaluator_splits_scopes_and_bins() {
    let labels = [1, 2, 3, 1];
    let pred = [1, 2, 3, 1];
    let fov = [true, false, true, false];
    let pos = [[1.0, 0.0, 0.0], [5.0, 5.0, 0.0], [30.0, 0.0, 9.0], [0.0, 80.0, 0.0]];
    let mut ev = Evaluator::new(4, DistanceBins::default(), AbsentClasses::Exclude).unwrap();
    ev.add(&pred, &labels, &fov, &pos).unwrap();
    let m = ev.finish(Scope::All).unwrap();
    assert_eq!(m.counts, ScopeCounts { inside_fov: 2, outside_fov: 2, total: 4 });
    assert_eq!(m.miou, 1.0);
    assert_eq!(m.gap, Some(0.0));
    let occupied: Vec<u64> = m.distance_bins.iter().map(|b| b.points).collect();
    assert_eq!(occupied, vec![2, 0, 0, 1, 0, 1]);
    assert_eq!(m.distance_bins[1].miou, None);
    assert_eq!(m.distance_bins[5].max_range, None);
    assert!(m.distance_bins.iter().filter(|b| b.points > 0).all(|b| b.miou == Some(1.0)));

    let mut one = Evaluator::new(4, DistanceBins(vec![]), AbsentClasses::Exclude).unwrap();
    let pred = [1, 1, 3, 2];
    one.add(&pred, &labels, &fov, &pos).unwrap();
    let m = one.finish(Scope::All).unwrap();
    assert_eq!(m.distance_bins.len(), 1);
    assert_eq!(m.distance_bins[0].miou, Some(m.miou));
    assert!(DistanceBins(vec![10.0, 5.0]).validate().is_err());
}

proptest! {
    #[test]
    fn confusion_is_additive_and_order_free(seed in any::<u64>(), n in 1usize..200) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let labels: Vec<usize> = (0..n).map(|_| rng.gen_range(0..5)).collect();
        let pred: Vec<usize> = (0..n).map(|_| rng.gen_range(1..5)).collect();
        let fov: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.5)).collect();
        let out: Vec<bool> = fov.iter().map(|b| !b).collect();
        let mut all = ConfusionMatrix::new(5);
        all.accumulate(&pred, &labels, None).unwrap();
        let mut parts = ConfusionMatrix::new(5);
        parts.accumulate(&pred, &labels, Some(&out)).unwrap();
        let mut inside = ConfusionMatrix::new(5);
        inside.accumulate(&pred, &labels, Some(&fov)).unwrap();
        parts.merge(&inside).unwrap();
        prop_assert_eq!(&parts, &all);

        let rev_l: Vec<usize> = labels.iter().rev().copied().collect();
        let rev_p: Vec<usize> = pred.iter().rev().copied().collect();
        let mut rev = ConfusionMatrix::new(5);
        rev.accumulate(&rev_p, &rev_l, None).unwrap();
        prop_assert_eq!(&rev, &all);

        if all.total() > 0 {
            let dl: Vec<usize> = labels.iter().chain(&labels).copied().collect();
            let dp: Vec<usize> = pred.iter().chain(&pred).copied().collect();
            let mut dup = ConfusionMatrix::new(5);
            dup.accumulate(&dp, &dl, None).unwrap();
            prop_assert_eq!(dup.miou(AbsentClasses::Exclude).unwrap(), all.miou(AbsentClasses::Exclude).unwrap());
        }
    }
}
