use connbench::chordal::{component_count, components, is_chordal, pair_count, random_chordal, round_half_up, Adjacency};
use connbench::gauss::Rng;
use proptest::prelude::*;

/// True when `g` has an induced cycle of length ≥ 4 (exhaustive search).
fn has_chordless_cycle(g: &Adjacency) -> bool {
    let p = g.p();
    fn extend(g: &Adjacency, path: &mut Vec<usize>, on_path: &mut [bool]) -> bool {
        let last = *path.last().unwrap();
        let start = path[0];
        for w in g.neighbors(last).collect::<Vec<_>>() {
            if on_path[w] || w < start {
                continue;
            }
            // w must not touch any interior vertex of the path except `last`
            let k = path.len();
            let touches_inner = path[1..k - 1].iter().any(|&u| g.has_edge(u, w));
            if touches_inner {
                continue;
            }
            if k >= 3 && g.has_edge(w, start) {
                return true;
            }
            if g.has_edge(w, start) {
                continue;
            }
            path.push(w);
            on_path[w] = true;
            if extend(g, path, on_path) {
                return true;
            }
            path.pop();
            on_path[w] = false;
        }
        false
    }
    (0..p).any(|s| {
        let mut on = vec![false; p];
        on[s] = true;
        g.neighbors(s).filter(|&n| n > s).any(|n| {
            let mut path = vec![s, n];
            on[n] = true;
            let found = extend(g, &mut path, &mut on);
            on[n] = false;
            found
        })
    })
}

fn random_graph(p: usize, density: f64, seed: u64) -> Adjacency {
    let mut rng = Rng::new(seed);
    let mut g = Adjacency::empty(p);
    for i in 0..p {
        for j in i + 1..p {
            if rng.uniform() < density {
                g.add_edge(i, j);
            }
        }
    }
    g
}

#[test]
fn brute_force_oracle_sanity() {
    let square = Adjacency::from_edges(4, &[(0, 1), (1, 2), (2, 3), (3, 0)]).unwrap();
    assert!(has_chordless_cycle(&square));
    let mut chorded = square.clone();
    chorded.add_edge(0, 2);
    assert!(!has_chordless_cycle(&chorded));
    assert!(!has_chordless_cycle(&Adjacency::complete(6)));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn chordality_matches_brute_force(p in 1usize..=7, density in 0.0f64..1.0, seed in any::<u64>()) {
        let g = random_graph(p, density, seed);
        prop_assert_eq!(is_chordal(&g), !has_chordless_cycle(&g));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn random_chordal_is_chordal_with_exact_count(p in 2usize..=51, d in 0.0f64..=1.0, seed in any::<u64>()) {
        let g = random_chordal(p, d, seed).unwrap();
        prop_assert!(is_chordal(&g));
        prop_assert_eq!(g.n_edges(), round_half_up(d * pair_count(p) as f64));
        prop_assert_eq!(g.density(), g.n_edges() as f64 / pair_count(p) as f64);
    }
}

#[test]
fn random_chordal_is_seeded() {
    for seed in [0u64, 1, 99, u64::MAX] {
        assert_eq!(random_chordal(40, 0.3, seed).unwrap(), random_chordal(40, 0.3, seed).unwrap());
    }
    assert_ne!(random_chordal(40, 0.3, 1).unwrap(), random_chordal(40, 0.3, 2).unwrap());
}

proptest! {
    #[test]
    fn component_labels_agree_with_edges(p in 1usize..=20, density in 0.0f64..0.3, seed in any::<u64>()) {
        let g = random_graph(p, density, seed);
        let labels = components(&g);
        for (i, j) in g.edges() {
            prop_assert_eq!(labels[i], labels[j]);
        }
        let mut distinct = labels.clone();
        distinct.sort_unstable();
        distinct.dedup();
        prop_assert_eq!(distinct.len(), component_count(&g));
    }
}
