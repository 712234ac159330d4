use perigid::certify::certify_super_stable;
use perigid::construct::{finite_to_periodic, octagon_finite, transport_stress, OCTAGON_PAIRS};
use perigid::io;
use perigid::{Tolerances, Verdict};

#[test]
fn octagon_fold_keeps_edges_and_certificate() {
    let tol = Tolerances::default();
    let (f, w) = octagon_finite();
    let c = finite_to_periodic(&f, &OCTAGON_PAIRS, &tol).unwrap();
    assert_eq!(c.graph.num_edges(), f.edges.len());
    let wp = transport_stress(&w, &c).unwrap();
    let cert = certify_super_stable(&c.graph, &c.realization, &wp, &tol).unwrap();
    assert_eq!(cert.verdict, Verdict::SuperStable);
    assert!(cert.reverify(&c.graph, &c.realization, &tol).unwrap());
}

#[test]
fn octagon_cover_has_finite_degrees() {
    let tol = Tolerances::default();
    let (f, _) = octagon_finite();
    let c = finite_to_periodic(&f, &OCTAGON_PAIRS, &tol).unwrap();
    let cover = c.graph.covering_window(2);
    let deg = cover.degrees();
    let mut finite_deg = vec![0; f.vertices.len()];
    for &(a, b, _) in &f.edges {
        finite_deg[a] += 1;
        finite_deg[b] += 1;
    }
    // u_i absorbs the edges of v_i.
    for &(u, v) in &OCTAGON_PAIRS {
        finite_deg[u] += finite_deg[v];
    }
    let mut seen = 0;
    for (i, v) in cover.vertices.iter().enumerate() {
        if cover.is_interior(i, 1) {
            assert_eq!(deg[i], finite_deg[c.kept_vertices[v.vertex]]);
            seen += 1;
        }
    }
    assert_eq!(seen, 6 * 9);
}

#[test]
fn folded_file_round_trips() {
    let tol = Tolerances::default();
    let (f, w) = octagon_finite();
    let text = io::emit_finite(&f, Some(&w));
    let (back, wb) = io::parse_finite(&text).unwrap();
    let c = finite_to_periodic(&back, &OCTAGON_PAIRS, &tol).unwrap();
    let file = io::FrameworkFile {
        stress: Some(transport_stress(&wb.unwrap(), &c).unwrap()),
        graph: c.graph,
        realization: Some(c.realization),
        lambda: None,
    };
    let emitted = io::emit(&file);
    assert_eq!(io::parse(&emitted).unwrap(), file);
}
