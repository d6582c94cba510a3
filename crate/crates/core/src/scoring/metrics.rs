use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub auroc: f64,
    pub auprc: f64,
    pub n_normal: usize,
    pub n_anomaly: usize,
    pub seed: u64,
}

fn class_counts(scores: &[f64], labels: &[u8]) -> Result<(usize, usize)> {
    if scores.len() != labels.len() {
        return Err(Error::dim(labels.len(), scores.len()));
    }
    if let Some(v) = scores.iter().find(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument(format!("non-finite score {v}")));
    }
    let pos = labels.iter().filter(|&&l| l == 1).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::SingleClass);
    }
    Ok((neg, pos))
}

/// 1-based ranks of `values` in ascending order; ties share the mean rank.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && values[order[j]] == values[order[i]] {
            j += 1;
        }
        // positions i..j hold ranks i+1..=j
        let mean = (i + 1 + j) as f64 / 2.0;
        for &k in &order[i..j] {
            ranks[k] = mean;
        }
        i = j;
    }
    ranks
}

/// Probability that a random anomaly outscores a random normal, ties
/// counting one half (Mann–Whitney U over the product of class sizes).
pub fn auroc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    let (neg, pos) = class_counts(scores, labels)?;
    let ranks = average_ranks(scores);
    let rank_sum: f64 = ranks.iter().zip(labels).filter(|(_, &l)| l == 1).map(|(r, _)| r).sum();
    let u = rank_sum - (pos * (pos + 1)) as f64 / 2.0;
    Ok(u / (pos as f64 * neg as f64))
}

/// Step-wise average precision, anomalies as the positive class. Tied
/// scores enter as a single threshold.
pub fn auprc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    let (_, pos) = class_counts(scores, labels)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut prev_recall = 0.0;
    let mut ap = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            if labels[order[j]] == 1 {
                tp += 1;
            } else {
                fp += 1;
            }
            j += 1;
        }
        let recall = tp as f64 / pos as f64;
        let precision = tp as f64 / (tp + fp) as f64;
        ap += (recall - prev_recall) * precision;
        prev_recall = recall;
        i = j;
    }
    Ok(ap)
}

pub fn evaluate(scores: &[f64], labels: &[u8], seed: u64) -> Result<EvalReport> {
    let (n_normal, n_anomaly) = class_counts(scores, labels)?;
    Ok(EvalReport {
        auroc: auroc(scores, labels)?,
        auprc: auprc(scores, labels)?,
        n_normal,
        n_anomaly,
        seed,
    })
}

/// Writes `row_index,score,label`; the label cell is empty when unknown.
pub fn write_scores(writer: impl std::io::Write, scores: &[f64], labels: Option<&[u8]>) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["row_index", "score", "label"])?;
    for (i, s) in scores.iter().enumerate() {
        let label = labels.map(|l| l[i].to_string()).unwrap_or_default();
        w.write_record([i.to_string(), format!("{s:?}"), label])?;
    }
    w.flush().map_err(|e| Error::io("<scores>", e))?;
    Ok(())
}
