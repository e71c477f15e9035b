use super::DetectionOutcome;
use crate::chordal::{pair_count, round_half_up, Adjacency, UnionFind};
use crate::estimators::ConnectivityMatrix;

/// Keeps `(i, j)` iff `|c_ij| > tau`.
pub fn fixed_threshold(c: &ConnectivityMatrix, tau: f64) -> DetectionOutcome {
    let mut g = Adjacency::empty(c.p());
    for (i, j, v) in c.values.upper_entries() {
        if v.abs() > tau {
            g.add_edge(i, j);
        }
    }
    let mut out = DetectionOutcome::new(g, "fixed_threshold");
    out.chosen_threshold = Some(tau);
    out
}

/// Pairs sorted by `|c|` descending; ties keep lexicographic order.
fn ranked_pairs(c: &ConnectivityMatrix) -> Vec<(usize, usize, f64)> {
    let mut pairs: Vec<(usize, usize, f64)> = c.values.upper_entries().map(|(i, j, v)| (i, j, v.abs())).collect();
    pairs.sort_by(|a, b| b.2.total_cmp(&a.2));
    pairs
}

/// Keeps the `round_half_up(q·m)` pairs with the largest `|c|`.
pub fn fixed_proportion(c: &ConnectivityMatrix, q: f64) -> DetectionOutcome {
    let p = c.p();
    let k = round_half_up(q * pair_count(p) as f64).min(pair_count(p));
    let pairs = ranked_pairs(c);
    let mut g = Adjacency::empty(p);
    for &(i, j, _) in &pairs[..k] {
        g.add_edge(i, j);
    }
    let mut out = DetectionOutcome::new(g, "fixed_proportion");
    out.chosen_threshold = k.checked_sub(1).map(|last| pairs[last].2);
    out
}

/// Largest threshold whose graph `{|c_ij| ≥ τ}` is connected.
///
/// Pairs are merged into a union-find in decreasing `|c|`; the score of the
/// pair that first joins everything is `τ*`. If no such pair exists every
/// nonzero-score pair is kept and `τ* = 0`.
pub fn percolation_threshold(c: &ConnectivityMatrix) -> DetectionOutcome {
    let p = c.p();
    let pairs = ranked_pairs(c);
    let mut uf = UnionFind::new(p);
    let mut tau = None;
    for &(i, j, v) in &pairs {
        uf.union(i, j);
        if uf.count() == 1 {
            tau = Some(v);
            break;
        }
    }
    let mut g = Adjacency::empty(p);
    match tau {
        Some(t) => {
            for &(i, j, _) in pairs.iter().take_while(|e| e.2 >= t) {
                g.add_edge(i, j);
            }
        }
        None => {
            for &(i, j, v) in &pairs {
                if v > 0.0 {
                    g.add_edge(i, j);
                }
            }
        }
    }
    let mut out = DetectionOutcome::new(g, "percolation");
    out.chosen_threshold = Some(tau.unwrap_or(0.0));
    out
}
