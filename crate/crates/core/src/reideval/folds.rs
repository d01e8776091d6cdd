//! Cross-validation fold plans over samples tagged with their recording day.

use std::collections::BTreeSet;

use chrono::NaiveDate;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ReidError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FoldMode {
    /// Five 80/20 folds over the samples of a single day.
    WithinDayK5,
    /// Nine days: test on one, validate on the day before it (cyclic), train on
    /// the remaining seven.
    DayWiseK9,
    /// One 80/20 split per day.
    SingleDay,
}

impl FoldMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            FoldMode::WithinDayK5 => "within_day_k5",
            FoldMode::DayWiseK9 => "day_wise_k9",
            FoldMode::SingleDay => "single_day",
        }
    }
}

/// Member lists are indices into the sample slice the plan was built from.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Fold {
    pub name: String,
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
    pub train_days: Vec<NaiveDate>,
    pub val_day: Option<NaiveDate>,
    pub test_day: Option<NaiveDate>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FoldPlan {
    pub mode: FoldMode,
    pub folds: Vec<Fold>,
}

const WITHIN_DAY_K: usize = 5;
const DAY_WISE_K: usize = 9;
const TEST_FRACTION: f64 = 0.2;

/// Builds the plan from each sample's day. Shuffles are seeded.
pub fn make_fold_plan(sample_days: &[NaiveDate], mode: FoldMode, seed: u64) -> Result<FoldPlan, ReidError> {
    let days: Vec<NaiveDate> = sample_days.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();
    let of_day = |d: NaiveDate| -> Vec<usize> { (0..sample_days.len()).filter(|&i| sample_days[i] == d).collect() };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let folds = match mode {
        FoldMode::DayWiseK9 => {
            if days.len() != DAY_WISE_K {
                return Err(ReidError::FoldPlan(format!("{} needs exactly {DAY_WISE_K} days, found {}", mode.as_str(), days.len())));
            }
            (0..days.len())
                .map(|t| {
                    let v = (t + days.len() - 1) % days.len();
                    let train_days: Vec<NaiveDate> =
                        days.iter().enumerate().filter(|&(i, _)| i != t && i != v).map(|(_, d)| *d).collect();
                    let train = (0..sample_days.len()).filter(|&i| train_days.contains(&sample_days[i])).collect();
                    Fold {
                        name: days[t].to_string(),
                        train,
                        val: of_day(days[v]),
                        test: of_day(days[t]),
                        train_days,
                        val_day: Some(days[v]),
                        test_day: Some(days[t]),
                    }
                })
                .collect()
        }
        FoldMode::WithinDayK5 => {
            if days.len() != 1 {
                return Err(ReidError::FoldPlan(format!("{} needs samples from exactly one day, found {}", mode.as_str(), days.len())));
            }
            let mut idx = of_day(days[0]);
            if idx.len() < WITHIN_DAY_K {
                return Err(ReidError::FoldPlan(format!("{} needs at least {WITHIN_DAY_K} samples, found {}", mode.as_str(), idx.len())));
            }
            idx.shuffle(&mut rng);
            (0..WITHIN_DAY_K)
                .map(|f| {
                    let mut test: Vec<usize> = idx.iter().enumerate().filter(|(p, _)| p % WITHIN_DAY_K == f).map(|(_, &i)| i).collect();
                    let mut train: Vec<usize> = idx.iter().enumerate().filter(|(p, _)| p % WITHIN_DAY_K != f).map(|(_, &i)| i).collect();
                    test.sort_unstable();
                    train.sort_unstable();
                    Fold { name: format!("fold{f}"), train, val: vec![], test, train_days: vec![days[0]], val_day: None, test_day: Some(days[0]) }
                })
                .collect()
        }
        FoldMode::SingleDay => {
            if days.is_empty() {
                return Err(ReidError::FoldPlan(format!("{} needs at least one day", mode.as_str())));
            }
            let mut folds = Vec::with_capacity(days.len());
            for &d in &days {
                let mut idx = of_day(d);
                if idx.len() < 2 {
                    return Err(ReidError::FoldPlan(format!("day {d} has {} samples; an 80/20 split needs 2", idx.len())));
                }
                idx.shuffle(&mut rng);
                let n_test = ((idx.len() as f64 * TEST_FRACTION).round() as usize).clamp(1, idx.len() - 1);
                let mut test = idx[..n_test].to_vec();
                let mut train = idx[n_test..].to_vec();
                test.sort_unstable();
                train.sort_unstable();
                folds.push(Fold { name: d.to_string(), train, val: vec![], test, train_days: vec![d], val_day: None, test_day: Some(d) });
            }
            folds
        }
    };
    Ok(FoldPlan { mode, folds })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(s: &str) -> NaiveDate {
        s.parse().unwrap()
    }

    fn nine_days() -> Vec<NaiveDate> {
        ["2024-10-18", "2024-10-31", "2024-11-01", "2024-11-02", "2024-11-03", "2024-11-04", "2024-11-05", "2024-11-06", "2024-11-07"]
            .iter()
            .map(|s| d(s))
            .collect()
    }

    #[test]
    fn day_wise_first_day_validates_on_last() {
        let days = nine_days();
        let samples: Vec<NaiveDate> = days.iter().rev().flat_map(|&x| [x, x, x]).collect();
        let plan = make_fold_plan(&samples, FoldMode::DayWiseK9, 0).unwrap();
        assert_eq!(plan.folds.len(), 9);
        let f = plan.folds.iter().find(|f| f.test_day == Some(d("2024-10-18"))).unwrap();
        assert_eq!(f.val_day, Some(d("2024-11-07")));
        assert_eq!(f.train_days, days[1..8].to_vec());
        assert_eq!(f.train.len(), 21);
        let mut tested: Vec<NaiveDate> = plan.folds.iter().map(|f| f.test_day.unwrap()).collect();
        tested.sort();
        assert_eq!(tested, days);
        for f in &plan.folds {
            assert_eq!(f.train_days.len(), 7);
            for i in &f.test {
                assert!(!f.train.contains(i) && !f.val.contains(i));
            }
            for i in &f.val {
                assert!(!f.train.contains(i));
            }
        }
    }

    #[test]
    fn day_wise_rejects_wrong_day_count() {
        let days = nine_days();
        assert!(matches!(make_fold_plan(&days[..8], FoldMode::DayWiseK9, 0), Err(ReidError::FoldPlan(_))));
    }

    #[test]
    fn within_day_tests_each_sample_once() {
        let samples = vec![d("2024-11-01"); 100];
        let plan = make_fold_plan(&samples, FoldMode::WithinDayK5, 3).unwrap();
        assert_eq!(plan.folds.len(), 5);
        let mut seen = vec![0; 100];
        for f in &plan.folds {
            assert_eq!(f.test.len(), 20);
            assert_eq!(f.train.len(), 80);
            for &i in &f.test {
                seen[i] += 1;
            }
        }
        assert!(seen.iter().all(|&c| c == 1));
    }

    #[test]
    fn single_day_eighty_twenty() {
        let mut samples = vec![d("2024-11-01"); 50];
        samples.extend(vec![d("2024-11-02"); 10]);
        let plan = make_fold_plan(&samples, FoldMode::SingleDay, 1).unwrap();
        assert_eq!(plan.folds.len(), 2);
        assert_eq!((plan.folds[0].train.len(), plan.folds[0].test.len()), (40, 10));
        assert_eq!((plan.folds[1].train.len(), plan.folds[1].test.len()), (8, 2));
    }
}
