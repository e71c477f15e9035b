//! Undirected graphs on `p` nodes: chordality testing, random chordal graphs
//! with an exact edge count, and union-find connectivity.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::gauss::{derive_seed, Rng};

/// Symmetric binary edge indicator without self-loops.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Adjacency {
    p: usize,
    adj: Vec<bool>,
    n_edges: usize,
}

/// Number of unordered off-diagonal pairs, `p(p-1)/2`.
#[inline]
pub fn pair_count(p: usize) -> usize {
    p * p.saturating_sub(1) / 2
}

/// `floor(x + 0.5)` for non-negative `x`.
pub fn round_half_up(x: f64) -> usize {
    (x + 0.5).floor().max(0.0) as usize
}

impl Adjacency {
    pub fn empty(p: usize) -> Self {
        Self { p, adj: vec![false; p * p], n_edges: 0 }
    }

    pub fn complete(p: usize) -> Self {
        let mut g = Self::empty(p);
        for i in 0..p {
            for j in (i + 1)..p {
                g.add_edge(i, j);
            }
        }
        g
    }

    pub fn from_edges(p: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut g = Self::empty(p);
        for &(i, j) in edges {
            if i == j {
                return Err(Error::InvalidArgument(format!("self-loop at node {i}")));
            }
            if i >= p || j >= p {
                return Err(Error::InvalidArgument(format!("edge ({i}, {j}) out of range for p = {p}")));
            }
            g.add_edge(i, j);
        }
        Ok(g)
    }

    #[inline]
    pub fn p(&self) -> usize {
        self.p
    }

    #[inline]
    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.adj[i * self.p + j]
    }

    /// Adds `{i, j}`; returns false if it was already present.
    pub fn add_edge(&mut self, i: usize, j: usize) -> bool {
        assert!(i != j, "self-loops are not allowed");
        if self.has_edge(i, j) {
            return false;
        }
        self.adj[i * self.p + j] = true;
        self.adj[j * self.p + i] = true;
        self.n_edges += 1;
        true
    }

    pub fn remove_edge(&mut self, i: usize, j: usize) -> bool {
        if !self.has_edge(i, j) {
            return false;
        }
        self.adj[i * self.p + j] = false;
        self.adj[j * self.p + i] = false;
        self.n_edges -= 1;
        true
    }

    pub fn n_edges(&self) -> usize {
        self.n_edges
    }

    /// `|E| / (p(p-1)/2)`; zero when `p < 2`.
    pub fn density(&self) -> f64 {
        let m = pair_count(self.p);
        if m == 0 {
            0.0
        } else {
            self.n_edges as f64 / m as f64
        }
    }

    /// Edges `(i, j)` with `i < j`, lexicographically sorted.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.n_edges);
        for i in 0..self.p {
            for j in (i + 1)..self.p {
                if self.has_edge(i, j) {
                    out.push((i, j));
                }
            }
        }
        out
    }

    pub fn neighbors(&self, v: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.p).filter(move |&w| self.adj[v * self.p + w])
    }

    pub fn degree(&self, v: usize) -> usize {
        self.neighbors(v).count()
    }

    /// Text edge list: `p <p>` then one `i j` line per edge.
    pub fn to_edge_list(&self) -> String {
        let mut s = format!("p {}\n", self.p);
        for (i, j) in self.edges() {
            let _ = writeln!(s, "{i} {j}");
        }
        s
    }

    /// Parses [`Adjacency::to_edge_list`] output; `#` lines are ignored.
    pub fn parse_edge_list(text: &str) -> Result<Self> {
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#'));
        let head = lines.next().ok_or_else(|| Error::Parse("empty edge list".into()))?;
        let p = match head.split_whitespace().collect::<Vec<_>>()[..] {
            ["p", n] => n.parse::<usize>().map_err(|e| Error::Parse(format!("bad node count: {e}")))?,
            _ => return Err(Error::Parse(format!("expected `p <n>`, found `{head}`"))),
        };
        let mut edges = Vec::new();
        for line in lines {
            let parts: Vec<&str> = line.split_whitespace().collect();
            if parts.len() != 2 {
                return Err(Error::Parse(format!("bad edge line `{line}`")));
            }
            let parse = |s: &str| s.parse::<usize>().map_err(|e| Error::Parse(format!("bad node `{s}`: {e}")));
            edges.push((parse(parts[0])?, parse(parts[1])?));
        }
        Self::from_edges(p, &edges)
    }
}

/// Maximum cardinality search visit order (ties go to the lowest index).
pub fn maximum_cardinality_search(g: &Adjacency) -> Vec<usize> {
    let p = g.p();
    let mut weight = vec![0usize; p];
    let mut visited = vec![false; p];
    let mut order = Vec::with_capacity(p);
    for _ in 0..p {
        let mut best = usize::MAX;
        for v in 0..p {
            if !visited[v] && (best == usize::MAX || weight[v] > weight[best]) {
                best = v;
            }
        }
        visited[best] = true;
        order.push(best);
        for w in 0..p {
            if !visited[w] && g.has_edge(best, w) {
                weight[w] += 1;
            }
        }
    }
    order
}

/// True when every vertex's later neighbours in `elimination` form a clique.
pub fn is_perfect_elimination_ordering(g: &Adjacency, elimination: &[usize]) -> bool {
    let p = g.p();
    let mut pos = vec![0usize; p];
    for (k, &v) in elimination.iter().enumerate() {
        pos[v] = k;
    }
    for &v in elimination {
        let later: Vec<usize> = g.neighbors(v).filter(|&w| pos[w] > pos[v]).collect();
        let Some(&follower) = later.iter().min_by_key(|&&w| pos[w]) else {
            continue;
        };
        if later.iter().any(|&w| w != follower && !g.has_edge(follower, w)) {
            return false;
        }
    }
    true
}

pub fn is_chordal(g: &Adjacency) -> bool {
    let mut order = maximum_cardinality_search(g);
    order.reverse();
    is_perfect_elimination_ordering(g, &order)
}

/// Random chordal graph with exactly `round_half_up(d·p(p-1)/2)` edges.
///
/// Non-edges are drawn uniformly and kept when the graph stays chordal.
/// After `50·p²` consecutive rejections the build restarts from a fresh
/// sub-seed.
pub fn random_chordal(p: usize, d: f64, seed: u64) -> Result<Adjacency> {
    if p < 2 {
        return Err(Error::InvalidArgument(format!("need p >= 2, got {p}")));
    }
    if !(0.0..=1.0).contains(&d) {
        return Err(Error::InvalidArgument(format!("density {d} outside [0, 1]")));
    }
    let target = round_half_up(d * pair_count(p) as f64).min(pair_count(p));
    let max_rejections = 50 * p * p;
    for attempt in 0u64.. {
        let mut rng = Rng::new(derive_seed(seed, &format!("chordal/{attempt}")));
        if let Some(g) = grow_chordal(p, target, &mut rng, max_rejections) {
            return Ok(g);
        }
    }
    unreachable!()
}

fn grow_chordal(p: usize, target: usize, rng: &mut Rng, max_rejections: usize) -> Option<Adjacency> {
    let mut g = Adjacency::empty(p);
    if target == pair_count(p) {
        return Some(Adjacency::complete(p));
    }
    let mut non_edges: Vec<(usize, usize)> = (0..p).flat_map(|i| ((i + 1)..p).map(move |j| (i, j))).collect();
    let mut rejections = 0;
    while g.n_edges() < target {
        let k = rng.below(non_edges.len());
        let (i, j) = non_edges[k];
        g.add_edge(i, j);
        if is_chordal(&g) {
            non_edges.swap_remove(k);
            rejections = 0;
        } else {
            g.remove_edge(i, j);
            rejections += 1;
            if rejections >= max_rejections {
                return None;
            }
        }
    }
    Some(g)
}

/// Disjoint-set forest with path compression and union by rank.
#[derive(Debug, Clone)]
pub struct UnionFind {
    parent: Vec<usize>,
    rank: Vec<u8>,
    sets: usize,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        Self { parent: (0..n).collect(), rank: vec![0; n], sets: n }
    }

    pub fn find(&mut self, x: usize) -> usize {
        let mut root = x;
        while self.parent[root] != root {
            root = self.parent[root];
        }
        let mut cur = x;
        while self.parent[cur] != root {
            let next = self.parent[cur];
            self.parent[cur] = root;
            cur = next;
        }
        root
    }

    /// Merges the sets of `a` and `b`; returns false if already joined.
    pub fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        match self.rank[ra].cmp(&self.rank[rb]) {
            std::cmp::Ordering::Less => self.parent[ra] = rb,
            std::cmp::Ordering::Greater => self.parent[rb] = ra,
            std::cmp::Ordering::Equal => {
                self.parent[rb] = ra;
                self.rank[ra] += 1;
            }
        }
        self.sets -= 1;
        true
    }

    /// Number of disjoint sets.
    pub fn count(&self) -> usize {
        self.sets
    }
}

/// Component label per node, numbered `0..k` in order of first appearance.
pub fn components(g: &Adjacency) -> Vec<usize> {
    let p = g.p();
    let mut uf = UnionFind::new(p);
    for (i, j) in g.edges() {
        uf.union(i, j);
    }
    let mut label_of_root = vec![usize::MAX; p];
    let mut next = 0;
    (0..p)
        .map(|v| {
            let r = uf.find(v);
            if label_of_root[r] == usize::MAX {
                label_of_root[r] = next;
                next += 1;
            }
            label_of_root[r]
        })
        .collect()
}

pub fn component_count(g: &Adjacency) -> usize {
    components(g).into_iter().max().map_or(0, |m| m + 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cycle(p: usize) -> Adjacency {
        let edges: Vec<_> = (0..p).map(|i| (i, (i + 1) % p)).collect();
        Adjacency::from_edges(p, &edges).unwrap()
    }

    #[test]
    fn chordality_examples() {
        assert!(is_chordal(&Adjacency::complete(3)));
        assert!(!is_chordal(&cycle(4)));
        let mut chorded = cycle(4);
        chorded.add_edge(0, 2);
        assert!(is_chordal(&chorded));
        let tree = Adjacency::from_edges(6, &[(0, 1), (0, 2), (2, 3), (2, 4), (4, 5)]).unwrap();
        assert!(is_chordal(&tree));
    }

    #[test]
    fn random_chordal_endpoints() {
        assert_eq!(random_chordal(10, 0.0, 1).unwrap(), Adjacency::empty(10));
        assert_eq!(random_chordal(10, 1.0, 1).unwrap(), Adjacency::complete(10));
    }

    #[test]
    fn random_chordal_exact_count() {
        assert_eq!(round_half_up(0.1 * 1275.0), 128);
        let g = random_chordal(51, 0.1, 2024).unwrap();
        assert_eq!(g.n_edges(), 128);
        assert!(is_chordal(&g));
        assert_eq!(g, random_chordal(51, 0.1, 2024).unwrap());
    }

    #[test]
    fn random_chordal_validates_input() {
        assert!(random_chordal(1, 0.5, 0).is_err());
        assert!(random_chordal(5, 1.5, 0).is_err());
    }

    #[test]
    fn component_examples() {
        assert_eq!(component_count(&Adjacency::empty(4)), 4);
        assert_eq!(component_count(&Adjacency::complete(4)), 1);
        let g = Adjacency::from_edges(4, &[(0, 1), (2, 3)]).unwrap();
        assert_eq!(components(&g), vec![0, 0, 1, 1]);
    }

    #[test]
    fn edge_list_format() {
        let g = Adjacency::from_edges(4, &[(2, 3), (1, 0)]).unwrap();
        assert_eq!(g.to_edge_list(), "p 4\n0 1\n2 3\n");
        assert_eq!(Adjacency::parse_edge_list(&g.to_edge_list()).unwrap(), g);
        assert!(Adjacency::parse_edge_list("p 2\n0 0\n").is_err());
    }

    #[test]
    fn density_counts_unordered_pairs() {
        let g = Adjacency::from_edges(4, &[(0, 1), (1, 2), (2, 3)]).unwrap();
        assert!((g.density() - 0.5).abs() < 1e-15);
    }
}
