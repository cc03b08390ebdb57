use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::data::Label;
use crate::error::{Error, Result};
use crate::seeds::{self, stage};

/// Index lists of one fold. The three lists partition the data set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldSplit {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
}

/// Folds of every repetition, indexed `[repeat][fold]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub folds: Vec<Vec<FoldSplit>>,
}

/// Splits `total` into parts proportional to `weights`; leftover units go to
/// the largest fractional parts, earlier parts first on ties.
pub fn largest_remainder(total: usize, weights: &[u64]) -> Vec<usize> {
    let sum: u64 = weights.iter().sum();
    if sum == 0 {
        return vec![0; weights.len()];
    }
    let total = total as u64;
    let mut parts: Vec<usize> = weights.iter().map(|w| (total * w / sum) as usize).collect();
    let assigned: usize = parts.iter().sum();
    let mut by_fraction: Vec<usize> = (0..weights.len()).collect();
    by_fraction.sort_by_key(|&i| std::cmp::Reverse(total * weights[i] % sum));
    for &i in by_fraction.iter().take(total as usize - assigned) {
        parts[i] += 1;
    }
    parts
}

fn class_indices(labels: &[Label]) -> [Vec<usize>; 2] {
    let mut pos = Vec::new();
    let mut neg = Vec::new();
    for (i, l) in labels.iter().enumerate() {
        if l.is_positive() {
            pos.push(i);
        } else {
            neg.push(i);
        }
    }
    [pos, neg]
}

fn require_both(classes: &[Vec<usize>; 2]) -> Result<()> {
    if classes.iter().any(Vec::is_empty) {
        return Err(Error::input(
            "stratified splitting needs both classes present",
        ));
    }
    Ok(())
}

/// Shuffles each class and cuts it by largest remainder into parts
/// proportional to `ratios`; every part receives both classes.
fn stratified_parts(labels: &[Label], ratios: &[u64], seed: u64) -> Result<Vec<Vec<usize>>> {
    if ratios.contains(&0) {
        return Err(Error::input("split ratios must be positive"));
    }
    let mut classes = class_indices(labels);
    require_both(&classes)?;
    let mut rng = seeds::rng(seeds::derive(seed, &[stage::SPLIT]));
    let mut parts = vec![Vec::new(); ratios.len()];
    for class in &mut classes {
        class.shuffle(&mut rng);
        let sizes = largest_remainder(class.len(), ratios);
        if sizes.contains(&0) {
            return Err(Error::input(format!(
                "a class of {} samples cannot populate every part at ratios {ratios:?}",
                class.len()
            )));
        }
        let mut rest = class.as_slice();
        for (part, size) in parts.iter_mut().zip(sizes) {
            let (head, tail) = rest.split_at(size);
            part.extend_from_slice(head);
            rest = tail;
        }
    }
    for part in &mut parts {
        part.sort_unstable();
    }
    Ok(parts)
}

/// One stratified train/validation/test split with `ratios` such as
/// `[8, 1, 1]`. Each class is shuffled and cut by largest remainder.
pub fn stratified_split(labels: &[Label], ratios: [u64; 3], seed: u64) -> Result<FoldSplit> {
    let mut parts = stratified_parts(labels, &ratios, seed)?.into_iter();
    Ok(FoldSplit {
        train: parts.next().unwrap(),
        validation: parts.next().unwrap(),
        test: parts.next().unwrap(),
    })
}

/// Stratified 8:1 train/validation split of every sample, for training a
/// final model without a test part. `test` is empty.
pub fn train_validation_split(labels: &[Label], seed: u64) -> Result<FoldSplit> {
    let mut parts = stratified_parts(labels, &[8, 1], seed)?.into_iter();
    Ok(FoldSplit {
        train: parts.next().unwrap(),
        validation: parts.next().unwrap(),
        test: Vec::new(),
    })
}

/// Repeated stratified k-fold plan.
///
/// Per repetition, each class is shuffled and the two class lists are
/// concatenated; position `p` of that list goes to test fold `p mod k`, so
/// the test lists partition the data and each holds `⌊n_c/k⌋` or
/// `⌈n_c/k⌉` members of class `c`. Validation is then carved from the
/// remaining samples at 1 part in 9 per class (8:1 train:validation), which
/// yields exactly 8:1:1 for `k = 10`.
pub fn kfold_plan(labels: &[Label], folds: usize, repeats: usize, seed: u64) -> Result<SplitPlan> {
    if folds < 2 || repeats == 0 {
        return Err(Error::input(
            "cross-validation needs folds >= 2 and repeats >= 1",
        ));
    }
    let base = class_indices(labels);
    require_both(&base)?;
    let mut plan = Vec::with_capacity(repeats);
    for r in 0..repeats {
        let mut rng = seeds::rng(seeds::derive(seed, &[stage::SPLIT, r as u64]));
        let mut classes = base.clone();
        for c in &mut classes {
            c.shuffle(&mut rng);
        }
        let order: Vec<usize> = classes.concat();
        let mut fold_of = vec![0usize; labels.len()];
        for (p, &i) in order.iter().enumerate() {
            fold_of[i] = p % folds;
        }
        let mut repeat = Vec::with_capacity(folds);
        for f in 0..folds {
            let mut val_rng = seeds::rng(seeds::derive(
                seed,
                &[stage::VALIDATION, r as u64, f as u64],
            ));
            let mut split = FoldSplit {
                train: Vec::new(),
                validation: Vec::new(),
                test: Vec::new(),
            };
            let mut rests = Vec::with_capacity(2);
            for class in &classes {
                let (test, mut rest): (Vec<usize>, Vec<usize>) =
                    class.iter().partition(|&&i| fold_of[i] == f);
                rest.sort_unstable();
                rest.shuffle(&mut val_rng);
                split.test.extend(test);
                rests.push(rest);
            }
            let (v_pos, total_val) =
                validation_positives(rests[0].len(), rests[1].len(), base[0].len(), labels.len())
                    .ok_or_else(|| {
                    Error::input(format!(
                        "fold {f} of repeat {r}: too few samples to stratify training and \
                         validation ({} positive, {} negative outside the test part)",
                        rests[0].len(),
                        rests[1].len()
                    ))
                })?;
            for (rest, v) in rests.iter().zip([v_pos, total_val - v_pos]) {
                split.validation.extend_from_slice(&rest[..v]);
                split.train.extend_from_slice(&rest[v..]);
            }
            for list in [&mut split.train, &mut split.validation, &mut split.test] {
                list.sort_unstable();
            }
            repeat.push(split);
        }
        plan.push(repeat);
    }
    Ok(SplitPlan { folds: plan })
}

/// Number of positives to move into validation, given `r_pos`/`r_neg`
/// non-test samples and the global `n_pos` of `n`. Validation holds one part
/// in nine of the remainder, and at least two samples. The count keeps both
/// validation and training within one sample of the global class ratio, with
/// at least one sample of each class in each list.
fn validation_positives(
    r_pos: usize,
    r_neg: usize,
    n_pos: usize,
    n: usize,
) -> Option<(usize, usize)> {
    let p = n_pos as f64 / n as f64;
    let rest = r_pos + r_neg;
    let v = largest_remainder(rest, &[8, 1])[1].max(2);
    // Positive surplus of the whole remainder relative to the global ratio.
    let e = r_pos as f64 - rest as f64 * p;
    let lo = (v + 1).saturating_sub(r_neg).max(1);
    let hi = v.saturating_sub(1).min(r_pos.saturating_sub(1));
    (lo..=hi)
        .map(|vp| {
            let x = vp as f64 - v as f64 * p;
            (vp, x.abs().max((e - x).abs()), x.abs())
        })
        .filter(|&(_, worst, _)| worst <= 1.0 + 1e-9)
        .min_by(|a, b| {
            a.1.total_cmp(&b.1)
                .then(a.2.total_cmp(&b.2))
                .then(a.0.cmp(&b.0))
        })
        .map(|(vp, _, _)| (vp, v))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn labels(pos: usize, neg: usize) -> Vec<Label> {
        let mut v = vec![Label::Positive; pos];
        v.extend(vec![Label::Negative; neg]);
        v
    }

    fn count_pos(idx: &[usize], labels: &[Label]) -> usize {
        idx.iter().filter(|&&i| labels[i].is_positive()).count()
    }

    fn assert_partition(s: &FoldSplit, n: usize) {
        let mut all: Vec<usize> = [&s.train[..], &s.validation[..], &s.test[..]].concat();
        all.sort_unstable();
        assert_eq!(all, (0..n).collect::<Vec<_>>());
    }

    fn within_one(idx: &[usize], labels: &[Label]) -> bool {
        let n = labels.len() as f64;
        let n_pos = count_pos(&(0..labels.len()).collect::<Vec<_>>(), labels) as f64;
        let expected = idx.len() as f64 * n_pos / n;
        (count_pos(idx, labels) as f64 - expected).abs() <= 1.0
    }

    #[test]
    fn largest_remainder_examples() {
        assert_eq!(largest_remainder(100, &[8, 1, 1]), vec![80, 10, 10]);
        assert_eq!(largest_remainder(505, &[8, 1, 1]), vec![404, 51, 50]);
        assert_eq!(largest_remainder(7, &[1, 1, 1]), vec![3, 2, 2]);
        assert_eq!(largest_remainder(0, &[1, 2]), vec![0, 0]);
    }

    #[test]
    fn balanced_hundred() {
        let l = labels(100, 100);
        let s = stratified_split(&l, [8, 1, 1], 3).unwrap();
        assert_eq!(
            (s.train.len(), s.validation.len(), s.test.len()),
            (160, 20, 20)
        );
        assert_eq!(count_pos(&s.test, &l), 10);
        assert_eq!(count_pos(&s.validation, &l), 10);
        assert_partition(&s, 200);
        assert_eq!(s, stratified_split(&l, [8, 1, 1], 3).unwrap());
        assert_ne!(s, stratified_split(&l, [8, 1, 1], 4).unwrap());
    }

    #[test]
    fn abide_sized_split() {
        let l = labels(505, 530);
        let s = stratified_split(&l, [8, 1, 1], 0).unwrap();
        assert!(s.test.len() == 103 || s.test.len() == 104);
        for list in [&s.train, &s.validation, &s.test] {
            assert!(within_one(list, &l));
        }
    }

    #[test]
    fn final_model_split_is_eight_to_one() {
        let l = labels(40, 50);
        let s = train_validation_split(&l, 1).unwrap();
        assert_eq!((s.train.len(), s.validation.len()), (80, 10));
        assert!(s.test.is_empty());
        assert_partition(&s, 90);
        assert!(train_validation_split(&labels(1, 50), 1).is_err());
    }

    #[test]
    fn tiny_class_is_rejected() {
        assert!(stratified_split(&labels(2, 50), [8, 1, 1], 0).is_err());
        assert!(stratified_split(&labels(0, 50), [8, 1, 1], 0).is_err());
        assert!(kfold_plan(&labels(2, 50), 10, 1, 0).is_err());
    }

    #[test]
    fn ten_fold_is_eight_one_one() {
        let l = labels(100, 100);
        let plan = kfold_plan(&l, 10, 1, 5).unwrap();
        for s in &plan.folds[0] {
            assert_eq!(
                (s.train.len(), s.validation.len(), s.test.len()),
                (160, 20, 20)
            );
        }
    }

    #[test]
    fn two_fold_smoke() {
        let l = labels(10, 12);
        let plan = kfold_plan(&l, 2, 1, 0).unwrap();
        let mut tests: Vec<usize> = plan.folds[0].iter().flat_map(|s| s.test.clone()).collect();
        tests.sort_unstable();
        assert_eq!(tests, (0..22).collect::<Vec<_>>());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]
        #[test]
        fn plan_invariants(seed in any::<u64>(), pos in 20usize..80, neg in 20usize..80, folds in 2usize..11) {
            let mut l = labels(pos, neg);
            // Interleave classes so indices do not sort by label.
            l.rotate_left(pos / 2);
            let plan = kfold_plan(&l, folds, 2, seed).unwrap();
            prop_assert_eq!(&plan, &kfold_plan(&l, folds, 2, seed).unwrap());
            for repeat in &plan.folds {
                let mut tests: Vec<usize> = Vec::new();
                for s in repeat {
                    assert_partition(s, l.len());
                    for list in [&s.train, &s.validation, &s.test] {
                        prop_assert!(within_one(list, &l), "list of {} off by more than one", list.len());
                    }
                    tests.extend(&s.test);
                }
                tests.sort_unstable();
                prop_assert_eq!(tests, (0..l.len()).collect::<Vec<_>>());
            }
        }
    }
}
