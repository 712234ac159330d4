use perigid::gain_graph::canonicalize_edge;
use perigid::linalg::numeric_rank;
use perigid::{GainGraph, Marking, Tolerances};
use proptest::prelude::*;

type RawEdge = (usize, usize, Vec<i64>);

/// Dimension, vertex count and up to 12 raw edges; invalid or duplicate edges are skipped when building.
fn raw_graph() -> impl Strategy<Value = (usize, usize, Vec<RawEdge>)> {
    (2usize..=3, 1usize..=6).prop_flat_map(|(d, n)| {
        let edge = (0..n, 0..n, prop::collection::vec(-2i64..=2, d));
        (Just(d), Just(n), prop::collection::vec(edge, 0..=12))
    })
}

fn build(d: usize, n: usize, edges: &[RawEdge]) -> GainGraph {
    let mut g = GainGraph::with_vertex_count(d, n).unwrap();
    for (t, h, gain) in edges {
        let _ = g.add_edge(*t, *h, gain.clone(), Marking::Bar);
    }
    g
}

fn izd_rank(g: &GainGraph) -> usize {
    numeric_rank(&g.incidence_zd(), &Tolerances::default()).unwrap().rank
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn full_rank_iff_connected_with_full_gain_rank((d, n, edges) in raw_graph()) {
        let g = build(d, n, &edges);
        let full = izd_rank(&g) == n - 1 + d;
        prop_assert_eq!(full, g.is_connected() && g.gain_rank() == d);
        let frc = g.full_rank_condition(&Tolerances::default()).unwrap();
        prop_assert_eq!(frc.holds, full);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn switching_preserves_ranks((d, n, edges) in raw_graph(), v in 0usize..6, mu in prop::collection::vec(-3i64..=3, 3)) {
        let g = build(d, n, &edges);
        let v = v % n;
        let s = g.switch(v, &mu[..d]).unwrap();
        prop_assert_eq!(s.gain_rank(), g.gain_rank());
        prop_assert_eq!(izd_rank(&s), izd_rank(&g));
        let neg: Vec<i64> = mu[..d].iter().map(|x| -x).collect();
        prop_assert_eq!(s.switch(v, &neg).unwrap(), g);
    }

    #[test]
    fn canonicalize_is_idempotent_and_reversal_invariant(t in 0usize..6, h in 0usize..6, gain in prop::collection::vec(-5i64..=5, 2..=3)) {
        prop_assume!(t != h || gain.iter().any(|&x| x != 0));
        let c = canonicalize_edge(t, h, &gain).unwrap();
        prop_assert_eq!(canonicalize_edge(c.0, c.1, &c.2).unwrap(), c.clone());
        let neg: Vec<i64> = gain.iter().map(|x| -x).collect();
        prop_assert_eq!(canonicalize_edge(h, t, &neg).unwrap(), c);
    }

    #[test]
    fn covering_window_vertex_count((d, n, edges) in raw_graph(), w in 0u32..=2) {
        prop_assume!(d == 2 || w <= 1);
        let g = build(d, n, &edges);
        let cover = g.covering_window(w);
        prop_assert_eq!(cover.vertices.len(), n * (2 * w as usize + 1).pow(d as u32));
        // A lifted edge stays inside the window iff both ends do, so interior
        // degrees count each non-loop edge once per endpoint and each loop twice.
        let margin = edges.iter().flat_map(|e| e.2.iter()).map(|x| x.unsigned_abs() as u32).max().unwrap_or(0);
        let deg = cover.degrees();
        for (i, cv) in cover.vertices.iter().enumerate() {
            if cover.is_interior(i, margin) {
                let want: usize = g.edges().iter().map(|e| {
                    usize::from(e.tail == cv.vertex) + usize::from(e.head == cv.vertex)
                }).sum();
                prop_assert_eq!(deg[i], want);
            }
        }
    }
}
