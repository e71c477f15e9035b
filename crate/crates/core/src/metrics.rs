//! Scores of estimated graphs and edge indicators against the ground truth.

use serde::{Deserialize, Serialize};

use crate::chordal::{pair_count, Adjacency};
use crate::error::{Error, Result};
use crate::symlin::SymMatrix;

/// Confusion counts over the unordered off-diagonal pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub tn: usize,
    pub fp: usize,
    pub fn_: usize,
}

impl Confusion {
    pub fn total(&self) -> usize {
        self.tp + self.tn + self.fp + self.fn_
    }

    pub fn accuracy(&self) -> f64 {
        ratio(self.tp + self.tn, self.total())
    }

    pub fn tpr(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    pub fn fpr(&self) -> f64 {
        ratio(self.fp, self.fp + self.tn)
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn confusion(estimated: &Adjacency, truth: &Adjacency) -> Result<Confusion> {
    if estimated.p() != truth.p() {
        return Err(Error::DimensionMismatch { expected: truth.p(), found: estimated.p() });
    }
    let p = truth.p();
    let mut c = Confusion::default();
    for i in 0..p {
        for j in (i + 1)..p {
            match (estimated.has_edge(i, j), truth.has_edge(i, j)) {
                (true, true) => c.tp += 1,
                (false, false) => c.tn += 1,
                (true, false) => c.fp += 1,
                (false, true) => c.fn_ += 1,
            }
        }
    }
    debug_assert_eq!(c.total(), pair_count(p));
    Ok(c)
}

pub fn accuracy(c: &Confusion) -> f64 {
    c.accuracy()
}

pub fn tpr(c: &Confusion) -> f64 {
    c.tpr()
}

pub fn fpr(c: &Confusion) -> f64 {
    c.fpr()
}

/// AUC of `|scores|` as a ranking of true edges over non-edges, by the
/// Mann-Whitney rank-sum formula with mid-ranks for ties.
pub fn auc(scores: &SymMatrix, truth: &Adjacency) -> Result<f64> {
    if scores.p() != truth.p() {
        return Err(Error::DimensionMismatch { expected: truth.p(), found: scores.p() });
    }
    let (values, labels): (Vec<f64>, Vec<bool>) =
        scores.upper_entries().map(|(i, j, v)| (v.abs(), truth.has_edge(i, j))).unzip();
    rank_auc(&values, &labels)
}

/// `(R₁ − N₁(N₁+1)/2) / (N₁·N₀)` with ranks ascending, ties averaged.
pub fn rank_auc(scores: &[f64], positive: &[bool]) -> Result<f64> {
    assert_eq!(scores.len(), positive.len());
    let n1 = positive.iter().filter(|&&b| b).count();
    let n0 = positive.len() - n1;
    if n1 == 0 || n0 == 0 {
        return Err(Error::UndefinedAuc { positives: n1, negatives: n0 });
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    let mut rank_sum = 0.0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && scores[order[end]] == scores[order[start]] {
            end += 1;
        }
        // ranks start+1 ..= end share their average
        let mid_rank = (start + 1 + end) as f64 / 2.0;
        let pos_in_tie = order[start..end].iter().filter(|&&k| positive[k]).count();
        rank_sum += mid_rank * pos_in_tie as f64;
        start = end;
    }
    let (n1f, n0f) = (n1 as f64, n0 as f64);
    Ok((rank_sum - n1f * (n1f + 1.0) / 2.0) / (n1f * n0f))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn confusion_examples() {
        let truth = Adjacency::from_edges(3, &[(0, 1)]).unwrap();
        let est = Adjacency::from_edges(3, &[(0, 1), (1, 2)]).unwrap();
        assert_eq!(confusion(&est, &truth).unwrap(), Confusion { tp: 1, tn: 1, fp: 1, fn_: 0 });

        let same = confusion(&truth, &truth).unwrap();
        assert_eq!((same.fp, same.fn_), (0, 0));
        assert_eq!(same.accuracy(), 1.0);
        assert_eq!(same.fpr(), 0.0);

        let full = confusion(&Adjacency::complete(5), &Adjacency::empty(5)).unwrap();
        assert_eq!(full, Confusion { tp: 0, tn: 0, fp: 10, fn_: 0 });
        assert_eq!(full.tpr(), 0.0);

        assert!(confusion(&Adjacency::empty(3), &Adjacency::empty(4)).is_err());
    }

    #[test]
    fn endpoint_accuracies() {
        let truth = Adjacency::from_edges(5, &[(0, 1), (1, 2), (3, 4)]).unwrap();
        let d = truth.density();
        assert_eq!(confusion(&Adjacency::complete(5), &truth).unwrap().accuracy(), d);
        assert_eq!(confusion(&Adjacency::empty(5), &truth).unwrap().accuracy(), 1.0 - d);
    }

    #[test]
    fn auc_examples() {
        assert_eq!(rank_auc(&[0.9, 0.8, 0.1, 0.2], &[true, true, false, false]).unwrap(), 1.0);
        assert_eq!(rank_auc(&[0.5; 4], &[true, false, true, false]).unwrap(), 0.5);
        assert_eq!(rank_auc(&[0.8, 0.6, 0.7], &[true, true, false]).unwrap(), 0.5);
        assert!(matches!(rank_auc(&[0.1, 0.2], &[true, true]), Err(Error::UndefinedAuc { .. })));
    }

    #[test]
    fn auc_uses_absolute_scores() {
        let truth = Adjacency::from_edges(3, &[(0, 1)]).unwrap();
        let mut s = SymMatrix::identity(3);
        s.set(0, 1, -0.9);
        s.set(0, 2, 0.2);
        s.set(1, 2, -0.1);
        assert_eq!(auc(&s, &truth).unwrap(), 1.0);
    }
}
