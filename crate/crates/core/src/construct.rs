//! Periodic frameworks from finite ones, and the built-in example catalog.

use std::collections::HashSet;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::framework::Realization;
use crate::gain_graph::{GainGraph, Marking};
use crate::linalg::{max_abs, numeric_rank, Tolerances};
use crate::stress::weighted_laplacians;

/// A finite framework: simple graph, marking and a placement in `ℝᵈ`.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteFramework {
    pub vertices: Vec<String>,
    /// `(a, b, marking)` with `a != b`.
    pub edges: Vec<(usize, usize, Marking)>,
    /// `d x |V|`.
    pub p: DMatrix<f64>,
}

impl FiniteFramework {
    pub fn new(vertices: Vec<String>, edges: Vec<(usize, usize, Marking)>, p: DMatrix<f64>) -> Result<Self> {
        if p.nrows() == 0 {
            return Err(Error::ZeroDimension);
        }
        if p.ncols() != vertices.len() {
            return Err(Error::LengthMismatch {
                what: "vertex positions",
                expected: vertices.len(),
                got: p.ncols(),
            });
        }
        if p.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidFinite("non-finite coordinate".into()));
        }
        let mut seen = HashSet::new();
        for &(a, b, _) in &edges {
            if a >= vertices.len() || b >= vertices.len() {
                return Err(Error::InvalidFinite(format!("edge ({a}, {b}) has an unknown endpoint")));
            }
            if a == b {
                return Err(Error::InvalidFinite(format!("loop at vertex {}", vertices[a])));
            }
            if !seen.insert((a.min(b), a.max(b))) {
                return Err(Error::InvalidFinite(format!(
                    "parallel edge {}-{}",
                    vertices[a], vertices[b]
                )));
            }
        }
        Ok(Self { vertices, edges, p })
    }

    pub fn dim(&self) -> usize {
        self.p.nrows()
    }

    /// `𝓛(G, ω)` of the finite graph.
    pub fn laplacian(&self, omega: &[f64]) -> Result<DMatrix<f64>> {
        if omega.len() != self.edges.len() {
            return Err(Error::LengthMismatch {
                what: "edge weights",
                expected: self.edges.len(),
                got: omega.len(),
            });
        }
        let n = self.vertices.len();
        let mut lap = DMatrix::zeros(n, n);
        for (&(a, b, _), &w) in self.edges.iter().zip(omega) {
            lap[(a, a)] += w;
            lap[(b, b)] += w;
            lap[(a, b)] -= w;
            lap[(b, a)] -= w;
        }
        Ok(lap)
    }

    /// `max |P 𝓛(G, ω)|`, the finite equilibrium residual.
    pub fn equilibrium_residual(&self, omega: &[f64]) -> Result<f64> {
        Ok(max_abs(&(&self.p * self.laplacian(omega)?)))
    }
}

/// Output of [`finite_to_periodic`].
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicConstruction {
    pub graph: GainGraph,
    pub realization: Realization,
    /// Finite vertex index of each quotient vertex.
    pub kept_vertices: Vec<usize>,
    /// Quotient edge index of each finite edge.
    pub edge_map: Vec<usize>,
    pub pairs: Vec<(usize, usize)>,
}

fn check_pairs(f: &FiniteFramework, pairs: &[(usize, usize)]) -> Result<()> {
    let d = f.dim();
    let n = f.vertices.len();
    if pairs.len() != d {
        return Err(Error::PairConditionViolated(format!("need {d} pairs, got {}", pairs.len())));
    }
    for &(u, v) in pairs {
        if u >= n || v >= n {
            return Err(Error::PairConditionViolated(format!("pair ({u}, {v}) names an unknown vertex")));
        }
    }
    for (i, &(_, vi)) in pairs.iter().enumerate() {
        for (j, &(uj, vj)) in pairs.iter().enumerate() {
            if uj == vi {
                return Err(Error::PairConditionViolated(format!(
                    "u_{} equals v_{}",
                    j + 1,
                    i + 1
                )));
            }
            if i != j && vi == vj {
                return Err(Error::PairConditionViolated(format!("v_{} equals v_{}", i + 1, j + 1)));
            }
        }
    }
    Ok(())
}

/// Builds the quotient gain graph obtained by identifying each `v_i` with `u_i`.
///
/// Edges touching `V' = {v_1..v_d}` are oriented towards `V'` (towards the larger
/// index when both ends are in `V'`) and receive gain `e_head − e_tail` over the
/// `V'` endpoints. `L` has columns `p(v_i) − p(u_i)`.
pub fn finite_to_periodic(
    f: &FiniteFramework,
    pairs: &[(usize, usize)],
    tol: &Tolerances,
) -> Result<PeriodicConstruction> {
    check_pairs(f, pairs)?;
    let d = f.dim();
    let n = f.vertices.len();
    let l = DMatrix::from_fn(d, d, |k, i| f.p[(k, pairs[i].1)] - f.p[(k, pairs[i].0)]);
    if numeric_rank(&l, tol)?.rank < d {
        return Err(Error::DependentLatticeVectors);
    }
    let slot = |x: usize| pairs.iter().position(|&(_, v)| v == x);
    let kept_vertices: Vec<usize> = (0..n).filter(|&x| slot(x).is_none()).collect();
    let mut index = vec![usize::MAX; n];
    for (k, &x) in kept_vertices.iter().enumerate() {
        index[x] = k;
    }
    for &(u, v) in pairs {
        index[v] = index[u];
    }
    let mut graph = GainGraph::new(d, kept_vertices.iter().map(|&x| f.vertices[x].clone()))?;
    let mut edge_map = Vec::with_capacity(f.edges.len());
    for &(a, b, marking) in &f.edges {
        let (tail, head) = match (slot(a), slot(b)) {
            (Some(i), Some(j)) if i > j => (b, a),
            (Some(_), None) => (b, a),
            _ => (a, b),
        };
        let mut gain = vec![0i64; d];
        if let Some(j) = slot(head) {
            gain[j] += 1;
        }
        if let Some(i) = slot(tail) {
            gain[i] -= 1;
        }
        edge_map.push(graph.add_edge(index[tail], index[head], gain, marking)?);
    }
    let p = DMatrix::from_fn(d, kept_vertices.len(), |k, i| f.p[(k, kept_vertices[i])]);
    Ok(PeriodicConstruction {
        graph,
        realization: Realization::new(p, l)?,
        kept_vertices,
        edge_map,
        pairs: pairs.to_vec(),
    })
}

/// Carries finite edge weights over to the quotient edges.
pub fn transport_stress(omega: &[f64], construction: &PeriodicConstruction) -> Result<Vec<f64>> {
    if omega.len() != construction.edge_map.len() {
        return Err(Error::LengthMismatch {
            what: "edge weights",
            expected: construction.edge_map.len(),
            got: omega.len(),
        });
    }
    let mut out = vec![0.0; omega.len()];
    for (i, &e) in construction.edge_map.iter().enumerate() {
        out[e] = omega[i];
    }
    Ok(out)
}

/// The `|V| x (|V°| + d)` matrix `C` with `𝓛(G, ω) = C 𝓛_{ℤᵈ}(G°, ω) Cᵀ`.
///
/// Row of a kept vertex `w` is `e_w` minus `e_{ℓ_i}` for every pair with
/// `u_i = w`; row of `v_i` is `e_{ℓ_i}`.
pub fn conjugation_matrix(f: &FiniteFramework, construction: &PeriodicConstruction) -> DMatrix<f64> {
    let n = f.vertices.len();
    let kept = &construction.kept_vertices;
    let m = kept.len();
    let d = f.dim();
    let mut c = DMatrix::zeros(n, m + d);
    for (k, &w) in kept.iter().enumerate() {
        c[(w, k)] = 1.0;
    }
    for (i, &(u, v)) in construction.pairs.iter().enumerate() {
        c[(u, m + i)] -= 1.0;
        c[(v, m + i)] = 1.0;
    }
    c
}

/// `max |𝓛(G, ω) − C 𝓛_{ℤᵈ}(G°, ω) Cᵀ|`.
pub fn conjugation_identity_check(
    f: &FiniteFramework,
    omega: &[f64],
    pairs: &[(usize, usize)],
    tol: &Tolerances,
) -> Result<f64> {
    let construction = finite_to_periodic(f, pairs, tol)?;
    let transported = transport_stress(omega, &construction)?;
    let periodic = weighted_laplacians(&construction.graph, &transported)?.laplacian_zd;
    let c = conjugation_matrix(f, &construction);
    if c.ncols() != periodic.nrows() {
        return Err(Error::ShapeMismatch(format!(
            "conjugation matrix has {} columns, periodic Laplacian has {} rows",
            c.ncols(),
            periodic.nrows()
        )));
    }
    Ok(max_abs(&(f.laplacian(omega)? - &c * periodic * c.transpose())))
}

/// A named example with a realization and a stress.
#[derive(Debug, Clone, PartialEq)]
pub struct Fixture {
    pub name: &'static str,
    pub summary: &'static str,
    pub graph: GainGraph,
    pub realization: Realization,
    pub stress: Vec<f64>,
}

fn identity_lattice() -> Vec<Vec<f64>> {
    vec![vec![1.0, 0.0], vec![0.0, 1.0]]
}

/// One vertex with four loops; its loop-only stress has a zero stress matrix.
pub fn flex1() -> Fixture {
    let mut g = GainGraph::with_vertex_count(2, 1).expect("valid");
    for gain in [[1, 0], [0, 1], [1, 1], [-1, 1]] {
        g.add_edge(0, 0, gain.to_vec(), Marking::Bar).expect("distinct loops");
    }
    Fixture {
        name: "flex1",
        summary: "single vertex with loops (1,0), (0,1), (1,1), (-1,1) on the unit square lattice",
        graph: g,
        realization: Realization::from_points(&[vec![0.0, 0.0]], &identity_lattice()).expect("valid"),
        stress: vec![-2.0, -2.0, 1.0, 1.0],
    }
}

/// Two vertices on a horizontal line with two edges between them and three loops.
pub fn flex2() -> Fixture {
    let mut g = GainGraph::with_vertex_count(2, 2).expect("valid");
    g.add_edge(0, 1, vec![0, 0], Marking::Bar).expect("valid");
    g.add_edge(0, 1, vec![-1, 0], Marking::Bar).expect("valid");
    for gain in [[0, 1], [1, 1], [-1, 1]] {
        g.add_edge(0, 0, gain.to_vec(), Marking::Bar).expect("distinct loops");
    }
    Fixture {
        name: "flex2",
        summary: "two vertices, edges with gains (0,0), (-1,0) and loops (0,1), (1,1), (-1,1)",
        graph: g,
        realization: Realization::from_points(&[vec![0.0, 0.0], vec![0.5, 0.0]], &identity_lattice())
            .expect("valid"),
        stress: vec![4.0, 4.0, 2.0, -1.0, -1.0],
    }
}

/// The flex2 tensegrity: the two edges and loop (0,1) are cables, the other loops struts.
pub fn flex2_tensegrity() -> Fixture {
    let mut f = flex2();
    for (i, m) in [Marking::Cable, Marking::Cable, Marking::Cable, Marking::Strut, Marking::Strut]
        .into_iter()
        .enumerate()
    {
        f.graph.set_marking(i, m);
    }
    f.name = "flex2-tensegrity";
    f.summary = "flex2 with cables on the positive-weight edges and struts on the negative ones";
    f
}

/// Honeycomb: a unit hexagon with three chords to neighbouring cells.
pub fn hex() -> Fixture {
    let mut g = GainGraph::with_vertex_count(2, 6).expect("valid");
    for i in 0..6 {
        g.add_edge(i, (i + 1) % 6, vec![0, 0], Marking::Bar).expect("valid");
    }
    g.add_edge(0, 3, vec![1, 0], Marking::Bar).expect("valid");
    g.add_edge(1, 4, vec![0, 1], Marking::Bar).expect("valid");
    g.add_edge(2, 5, vec![-1, 1], Marking::Bar).expect("valid");
    let points: Vec<Vec<f64>> = (0..6)
        .map(|k| {
            let t = std::f64::consts::FRAC_PI_3 * k as f64;
            vec![t.cos(), t.sin()]
        })
        .collect();
    let h = 1.5 * 3.0_f64.sqrt();
    Fixture {
        name: "hex",
        summary: "hexagon with six rim edges and three chords; the honeycomb covering",
        graph: g,
        realization: Realization::from_points(&points, &[vec![3.0, 0.0], vec![1.5, h]]).expect("valid"),
        stress: vec![1.0; 9],
    }
}

/// Regular octagon with four diagonals; rim cables, diagonal struts.
pub fn octagon_finite() -> (FiniteFramework, Vec<f64>) {
    let pi = std::f64::consts::PI;
    let p = DMatrix::from_fn(2, 8, |k, i| {
        let t = pi + i as f64 * pi / 4.0;
        if k == 0 {
            t.cos()
        } else {
            t.sin()
        }
    });
    let rim = (0..8).map(|i| (i, (i + 1) % 8, Marking::Cable));
    let diagonals = [(0, 3), (4, 7), (1, 6), (2, 5)].map(|(a, b)| (a, b, Marking::Strut));
    let edges: Vec<_> = rim.chain(diagonals).collect();
    let s2 = 2.0_f64.sqrt();
    let mut omega: Vec<f64> = (0..8).map(|i| if i % 2 == 0 { 2.0 + s2 } else { s2 + 1.0 }).collect();
    omega.extend([-1.0; 4]);
    let f = FiniteFramework::new((0..8).map(|i| i.to_string()).collect(), edges, p).expect("valid");
    (f, omega)
}

/// Pairs `(u_i, v_i)` used to fold the octagon.
pub const OCTAGON_PAIRS: [(usize, usize); 2] = [(0, 4), (2, 6)];

/// The periodic framework folded from [`octagon_finite`].
pub fn octagon() -> Fixture {
    let (f, omega) = octagon_finite();
    let c = finite_to_periodic(&f, &OCTAGON_PAIRS, &Tolerances::default()).expect("valid pairs");
    let stress = transport_stress(&omega, &c).expect("same length");
    Fixture {
        name: "octagon",
        summary: "octagon tensegrity folded along (0,4), (2,6) into a Z^2-tensegrity",
        graph: c.graph,
        realization: c.realization,
        stress,
    }
}

pub fn fixtures() -> Vec<Fixture> {
    vec![flex1(), flex2(), flex2_tensegrity(), hex(), octagon()]
}

pub fn fixture(name: &str) -> Option<Fixture> {
    fixtures().into_iter().find(|f| f.name == name)
}
