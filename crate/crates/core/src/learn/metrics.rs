use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub accuracy: f64,
    pub auc: f64,
    pub n_samples: usize,
}

impl Metrics {
    pub fn error_rate(&self) -> f64 {
        1.0 - self.accuracy
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RepetitionReport {
    pub mean_accuracy: f64,
    pub std_accuracy: f64,
    pub mean_auc: f64,
    pub std_auc: f64,
    pub n_repetitions: usize,
    pub per_run: Vec<Metrics>,
}

/// Fraction of scores on the correct side of 0.5 (`>= 0.5` predicts class 1).
pub fn accuracy(scores: &[f64], labels: &[u8]) -> Result<f64> {
    if scores.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let correct = scores
        .iter()
        .zip(labels)
        .filter(|(&s, &y)| (s >= 0.5) == (y == 1))
        .count();
    Ok(correct as f64 / scores.len() as f64)
}

/// Mann-Whitney estimate of P(score_pos > score_neg), ties counting one half.
///
/// Returns 0.5 when either class is absent.
pub fn auc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    if scores.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let n_pos = labels.iter().filter(|&&y| y == 1).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        log::warn!("AUC undefined for a single-class set; reporting 0.5");
        return Ok(0.5);
    }
    // average ranks over tie groups
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && scores[idx[j + 1]] == scores[idx[i]] {
            j += 1;
        }
        let avg_rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            if labels[k] == 1 {
                rank_sum_pos += avg_rank;
            }
        }
        i = j + 1;
    }
    let (p, n) = (n_pos as f64, n_neg as f64);
    Ok((rank_sum_pos - p * (p + 1.0) / 2.0) / (p * n))
}

pub fn metrics_from_scores(scores: &[f64], labels: &[u8]) -> Result<Metrics> {
    Ok(Metrics {
        accuracy: accuracy(scores, labels)?,
        auc: auc(scores, labels)?,
        n_samples: scores.len(),
    })
}

fn mean_std(xs: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = xs.clone().count() as f64;
    let mean = xs.clone().sum::<f64>() / n;
    let var = xs.map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Mean and population standard deviation of accuracy and AUC.
pub fn summarize(per_run: Vec<Metrics>) -> Result<RepetitionReport> {
    if per_run.is_empty() {
        return Err(Error::EmptyInput);
    }
    let (mean_accuracy, std_accuracy) = mean_std(per_run.iter().map(|m| m.accuracy));
    let (mean_auc, std_auc) = mean_std(per_run.iter().map(|m| m.auc));
    Ok(RepetitionReport {
        mean_accuracy,
        std_accuracy,
        mean_auc,
        std_auc,
        n_repetitions: per_run.len(),
        per_run,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Pairwise definition, quadratic but unambiguous.
    fn brute_auc(scores: &[f64], labels: &[u8]) -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        for (i, &si) in scores.iter().enumerate() {
            for (j, &sj) in scores.iter().enumerate() {
                if labels[i] == 1 && labels[j] == 0 {
                    den += 1.0;
                    num += if si > sj {
                        1.0
                    } else if si == sj {
                        0.5
                    } else {
                        0.0
                    };
                }
            }
        }
        num / den
    }

    #[test]
    fn perfect_separation() {
        let m = metrics_from_scores(&[0.9, 0.8, 0.1, 0.2], &[1, 1, 0, 0]).unwrap();
        assert_eq!(m.accuracy, 1.0);
        assert_eq!(m.auc, 1.0);
    }

    #[test]
    fn all_ties() {
        assert_eq!(auc(&[0.3; 6], &[1, 0, 1, 0, 0, 1]).unwrap(), 0.5);
    }

    #[test]
    fn three_quarters() {
        assert_eq!(auc(&[0.7, 0.3, 0.6, 0.2], &[1, 1, 0, 0]).unwrap(), 0.75);
    }

    #[test]
    fn empty_is_error() {
        assert!(matches!(accuracy(&[], &[]), Err(Error::EmptyDataset)));
        assert!(matches!(auc(&[], &[]), Err(Error::EmptyDataset)));
    }

    #[test]
    fn report_statistics() {
        let m = |a| Metrics {
            accuracy: a,
            auc: a,
            n_samples: 1,
        };
        let r = summarize(vec![m(0.8), m(0.9)]).unwrap();
        assert!((r.mean_accuracy - 0.85).abs() < 1e-12);
        assert!((r.std_accuracy - 0.05).abs() < 1e-12);
        let r = summarize(vec![m(0.7)]).unwrap();
        assert_eq!(r.std_accuracy, 0.0);
        let r = summarize(vec![m(0.6); 4]).unwrap();
        assert_eq!((r.mean_auc, r.std_auc), (0.6, 0.0));
    }

    proptest! {
        #[test]
        fn matches_pairwise_definition(data in prop::collection::vec((0u8..6, 0u8..2), 2..40)) {
            let scores: Vec<f64> = data.iter().map(|d| d.0 as f64 / 5.0).collect();
            let labels: Vec<u8> = data.iter().map(|d| d.1).collect();
            prop_assume!(labels.contains(&0) && labels.contains(&1));
            prop_assert!((auc(&scores, &labels).unwrap() - brute_auc(&scores, &labels)).abs() < 1e-12);
        }

        #[test]
        fn invariant_to_monotone_transform(data in prop::collection::vec((-5.0f64..5.0, 0u8..2), 2..40)) {
            let scores: Vec<f64> = data.iter().map(|d| d.0).collect();
            let labels: Vec<u8> = data.iter().map(|d| d.1).collect();
            prop_assume!(labels.contains(&0) && labels.contains(&1));
            let squashed: Vec<f64> = scores.iter().map(|s| 1.0 / (1.0 + (-3.0 * s).exp()) + 7.0).collect();
            prop_assert_eq!(auc(&scores, &labels).unwrap(), auc(&squashed, &labels).unwrap());
        }

        #[test]
        fn accuracy_plus_error_is_one(data in prop::collection::vec((0.0f64..1.0, 0u8..2), 1..40)) {
            let scores: Vec<f64> = data.iter().map(|d| d.0).collect();
            let labels: Vec<u8> = data.iter().map(|d| d.1).collect();
            let m = metrics_from_scores(&scores, &labels).unwrap();
            prop_assert_eq!(m.accuracy + m.error_rate(), 1.0);
        }
    }
}
