use crate::{Error, Result};

fn class_counts(labels: &[u8]) -> (usize, usize) {
    let n1 = labels.iter().filter(|&&y| y == 1).count();
    (labels.len() - n1, n1)
}

fn check_lengths(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::DimensionMismatch {
            expected: a,
            actual: b,
        });
    }
    Ok(())
}

/// Area under the ROC curve via the rank-sum statistic with midranks for ties.
pub fn auc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    check_lengths(scores.len(), labels.len())?;
    let (n0, n1) = class_counts(labels);
    if n0 == 0 || n1 == 0 {
        return Err(Error::UndefinedMetric("AUC needs both classes".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // ranks i+1..=j+1 share their mean
        let mid = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            if labels[k] == 1 {
                rank_sum += mid;
            }
        }
        i = j + 1;
    }
    let (n0, n1) = (n0 as f64, n1 as f64);
    Ok((rank_sum - n1 * (n1 + 1.0) / 2.0) / (n0 * n1))
}

/// Mean of the true-positive and true-negative rates.
pub fn balanced_accuracy(predictions: &[u8], labels: &[u8]) -> Result<f64> {
    check_lengths(predictions.len(), labels.len())?;
    let (n0, n1) = class_counts(labels);
    if n0 == 0 || n1 == 0 {
        return Err(Error::UndefinedMetric("balanced accuracy needs both classes".into()));
    }
    let tp = predictions.iter().zip(labels).filter(|(&p, &y)| p == 1 && y == 1).count();
    let tn = predictions.iter().zip(labels).filter(|(&p, &y)| p == 0 && y == 0).count();
    Ok(0.5 * (tp as f64 / n1 as f64 + tn as f64 / n0 as f64))
}

/// `1` where the score reaches the threshold.
pub fn threshold_predictions(scores: &[f64], threshold: f64) -> Vec<u8> {
    scores.iter().map(|&s| u8::from(s >= threshold)).collect()
}

/// `|F₁(t) − F₀(t)|` with `F_c` the empirical CDF of class-`c` scores.
pub fn ks_statistic(scores: &[f64], labels: &[u8], t: f64) -> f64 {
    let (n0, n1) = class_counts(labels);
    let below1 = scores.iter().zip(labels).filter(|(&s, &y)| y == 1 && s <= t).count();
    let below0 = scores.iter().zip(labels).filter(|(&s, &y)| y == 0 && s <= t).count();
    (below1 as f64 / n1 as f64 - below0 as f64 / n0 as f64).abs()
}

/// Threshold maximizing the KS gap between class score distributions.
///
/// Candidates are midpoints between consecutive distinct scores; ties go to the
/// lower threshold. With no separation at all the median score is returned.
pub fn ks_threshold(scores: &[f64], labels: &[u8]) -> Result<f64> {
    check_lengths(scores.len(), labels.len())?;
    let (n0, n1) = class_counts(labels);
    if n0 == 0 || n1 == 0 {
        return Err(Error::UndefinedMetric("KS threshold needs both classes".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let (mut c0, mut c1) = (0usize, 0usize);
    let mut best: Option<(f64, f64)> = None;
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        while i < order.len() && scores[order[i]] == s {
            if labels[order[i]] == 1 {
                c1 += 1;
            } else {
                c0 += 1;
            }
            i += 1;
        }
        if i == order.len() {
            break;
        }
        let ks = (c1 as f64 / n1 as f64 - c0 as f64 / n0 as f64).abs();
        let t = 0.5 * (s + scores[order[i]]);
        if best.is_none_or(|(b, _)| ks > b) {
            best = Some((ks, t));
        }
    }
    match best {
        Some((ks, t)) if ks > 0.0 => Ok(t),
        _ => {
            let mut sorted: Vec<f64> = scores.to_vec();
            sorted.sort_by(f64::total_cmp);
            let n = sorted.len();
            Ok(if n % 2 == 1 {
                sorted[n / 2]
            } else {
                0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
            })
        }
    }
}
