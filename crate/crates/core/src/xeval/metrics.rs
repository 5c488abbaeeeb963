/// Mean absolute error; `None` for empty input.
pub fn mae(pred: &[f64], y: &[f64]) -> Option<f64> {
    if pred.is_empty() {
        return None;
    }
    Some(pred.iter().zip(y).map(|(p, y)| (p - y).abs()).sum::<f64>() / pred.len() as f64)
}

pub fn mse(pred: &[f64], y: &[f64]) -> Option<f64> {
    if pred.is_empty() {
        return None;
    }
    Some(pred.iter().zip(y).map(|(p, y)| (p - y).powi(2)).sum::<f64>() / pred.len() as f64)
}

/// Area under the ROC curve via the Mann–Whitney rank sum, with tied scores
/// sharing their average rank. `None` unless both classes are present.
pub fn auc(scores: &[f64], labels: &[bool]) -> Option<f64> {
    assert_eq!(scores.len(), labels.len());
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return None;
    }
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && scores[idx[j + 1]] == scores[idx[i]] {
            j += 1;
        }
        // ranks i+1 ..= j+1 share their mean
        let avg = (i + j + 2) as f64 / 2.0;
        rank_sum_pos += idx[i..=j].iter().filter(|&&k| labels[k]).count() as f64 * avg;
        i = j + 1;
    }
    let u = rank_sum_pos - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Some(u / (n_pos as f64 * n_neg as f64))
}
