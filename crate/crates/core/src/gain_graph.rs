//! Quotient ℤᵈ-gain graphs.
//!
//! An edge `(u, v, γ)` is identified with `(v, u, -γ)`. Edges keep the
//! orientation they were inserted with so matrix rows follow the caller's
//! convention; [`canonicalize_edge`] gives the representative used for
//! identity checks.

use std::collections::{BTreeMap, HashSet, VecDeque};
use std::fmt;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{integer_rank, numeric_rank, Tolerances};

/// Bar, cable or strut.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Marking {
    #[default]
    Bar,
    Cable,
    Strut,
}

impl Marking {
    pub fn as_str(self) -> &'static str {
        match self {
            Marking::Bar => "bar",
            Marking::Cable => "cable",
            Marking::Strut => "strut",
        }
    }
}

impl fmt::Display for Marking {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GainEdge {
    pub tail: usize,
    pub head: usize,
    pub gain: Vec<i64>,
    pub marking: Marking,
}

impl GainEdge {
    pub fn is_loop(&self) -> bool {
        self.tail == self.head
    }
}

fn lex_positive(g: &[i64]) -> bool {
    g.iter().find(|&&x| x != 0).is_some_and(|&x| x > 0)
}

/// Canonical representative of `{(u, v, γ), (v, u, -γ)}`: `tail < head`, or for
/// loops a gain whose first nonzero entry is positive.
pub fn canonicalize_edge(tail: usize, head: usize, gain: &[i64]) -> Result<(usize, usize, Vec<i64>)> {
    let flip = if tail == head {
        if gain.iter().all(|&x| x == 0) {
            return Err(Error::ZeroLoop {
                vertex: tail.to_string(),
            });
        }
        !lex_positive(gain)
    } else {
        tail > head
    };
    if flip {
        Ok((head, tail, gain.iter().map(|x| -x).collect()))
    } else {
        Ok((tail, head, gain.to_vec()))
    }
}

/// A finite ℤᵈ-gain graph with named vertices and marked edges.
#[derive(Debug, Clone, PartialEq)]
pub struct GainGraph {
    dim: usize,
    vertices: Vec<String>,
    edges: Vec<GainEdge>,
    keys: HashSet<(usize, usize, Vec<i64>)>,
}

impl GainGraph {
    pub fn new<S: Into<String>>(dim: usize, vertices: impl IntoIterator<Item = S>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::ZeroDimension);
        }
        let vertices: Vec<String> = vertices.into_iter().map(Into::into).collect();
        if vertices.is_empty() {
            return Err(Error::EmptyGraph);
        }
        let mut seen = HashSet::new();
        for v in &vertices {
            if !seen.insert(v.as_str()) {
                return Err(Error::DuplicateVertex(v.clone()));
            }
        }
        Ok(Self {
            dim,
            vertices,
            edges: Vec::new(),
            keys: HashSet::new(),
        })
    }

    /// Graph with vertices named `v1, v2, ...`.
    pub fn with_vertex_count(dim: usize, n: usize) -> Result<Self> {
        Self::new(dim, (1..=n).map(|i| format!("v{i}")))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn vertices(&self) -> &[String] {
        &self.vertices
    }

    pub fn edges(&self) -> &[GainEdge] {
        &self.edges
    }

    pub fn vertex_index(&self, name: &str) -> Option<usize> {
        self.vertices.iter().position(|v| v == name)
    }

    fn describe(&self, tail: usize, head: usize, gain: &[i64]) -> Error {
        Error::DuplicateEdge {
            tail: self.vertices[tail].clone(),
            head: self.vertices[head].clone(),
            gain: gain.to_vec(),
        }
    }

    /// Adds `(tail, head, gain)`; returns its edge index.
    pub fn add_edge(&mut self, tail: usize, head: usize, gain: Vec<i64>, marking: Marking) -> Result<usize> {
        let n = self.vertices.len();
        for v in [tail, head] {
            if v >= n {
                return Err(Error::UnknownVertex(v.to_string()));
            }
        }
        if gain.len() != self.dim {
            return Err(Error::GainDimensionMismatch {
                expected: self.dim,
                got: gain.len(),
                gain,
            });
        }
        let key = canonicalize_edge(tail, head, &gain).map_err(|_| Error::ZeroLoop {
            vertex: self.vertices[tail].clone(),
        })?;
        if self.keys.contains(&key) {
            return Err(self.describe(tail, head, &gain));
        }
        self.keys.insert(key);
        self.edges.push(GainEdge {
            tail,
            head,
            gain,
            marking,
        });
        Ok(self.edges.len() - 1)
    }

    pub fn add_named_edge(&mut self, tail: &str, head: &str, gain: Vec<i64>, marking: Marking) -> Result<usize> {
        let t = self
            .vertex_index(tail)
            .ok_or_else(|| Error::UnknownVertex(tail.to_string()))?;
        let h = self
            .vertex_index(head)
            .ok_or_else(|| Error::UnknownVertex(head.to_string()))?;
        self.add_edge(t, h, gain, marking)
    }

    /// Builder-style `add_edge` for fixtures and tests.
    pub fn edge(mut self, tail: usize, head: usize, gain: &[i64]) -> Result<Self> {
        self.add_edge(tail, head, gain.to_vec(), Marking::Bar)?;
        Ok(self)
    }

    pub fn set_marking(&mut self, edge: usize, marking: Marking) {
        self.edges[edge].marking = marking;
    }

    pub fn with_all_markings(mut self, marking: Marking) -> Self {
        for e in &mut self.edges {
            e.marking = marking;
        }
        self
    }

    /// Same graph with every edge stored in canonical orientation.
    pub fn canonical(&self) -> Self {
        let mut out = self.clone();
        for e in &mut out.edges {
            let (t, h, g) = canonicalize_edge(e.tail, e.head, &e.gain).expect("validated on insert");
            e.tail = t;
            e.head = h;
            e.gain = g;
        }
        out
    }

    /// `I(G)`: `|E| x |V|`, `-1` at the tail and `+1` at the head; loops give zero rows.
    pub fn incidence(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.edges.len(), self.vertices.len());
        for (i, e) in self.edges.iter().enumerate() {
            if !e.is_loop() {
                m[(i, e.tail)] = -1.0;
                m[(i, e.head)] = 1.0;
            }
        }
        m
    }

    /// `M(G)`: `d x |E|`, column `e` is the gain of `e`.
    pub fn gain_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.dim, self.edges.len(), |k, e| self.edges[e].gain[k] as f64)
    }

    /// `I_{ℤᵈ}(G) = [I(G)  M(G)ᵀ]`.
    pub fn incidence_zd(&self) -> DMatrix<f64> {
        let n = self.vertices.len();
        let mut m = DMatrix::zeros(self.edges.len(), n + self.dim);
        m.columns_mut(0, n).copy_from(&self.incidence());
        m.columns_mut(n, self.dim).copy_from(&self.gain_matrix().transpose());
        m
    }

    /// Connected components (vertex index lists, ascending) of the underlying multigraph.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let n = self.vertices.len();
        let adj = self.adjacency();
        let mut comp = vec![usize::MAX; n];
        let mut out = Vec::new();
        for s in 0..n {
            if comp[s] != usize::MAX {
                continue;
            }
            let id = out.len();
            let mut members = vec![s];
            comp[s] = id;
            let mut queue = VecDeque::from([s]);
            while let Some(x) = queue.pop_front() {
                for &(y, _) in &adj[x] {
                    if comp[y] == usize::MAX {
                        comp[y] = id;
                        members.push(y);
                        queue.push_back(y);
                    }
                }
            }
            members.sort_unstable();
            out.push(members);
        }
        out
    }

    pub fn is_connected(&self) -> bool {
        self.components().len() == 1
    }

    /// Non-loop adjacency: `(neighbour, edge index)`.
    fn adjacency(&self) -> Vec<Vec<(usize, usize)>> {
        let mut adj = vec![Vec::new(); self.vertices.len()];
        for (i, e) in self.edges.iter().enumerate() {
            if !e.is_loop() {
                adj[e.tail].push((e.head, i));
                adj[e.head].push((e.tail, i));
            }
        }
        adj
    }

    /// Rank of the group generated by closed-walk gains, maximised over components.
    ///
    /// Each component gets a BFS spanning tree with vertex potentials `π`; every
    /// non-tree edge `(u, v, γ)` contributes the cycle gain `π(u) + γ - π(v)`.
    pub fn gain_rank(&self) -> usize {
        let n = self.vertices.len();
        let adj = self.adjacency();
        let mut potential: Vec<Option<Vec<i64>>> = vec![None; n];
        let mut comp = vec![usize::MAX; n];
        let mut tree_edge = vec![false; self.edges.len()];
        let mut n_comp = 0;
        for s in 0..n {
            if potential[s].is_some() {
                continue;
            }
            potential[s] = Some(vec![0; self.dim]);
            comp[s] = n_comp;
            let mut queue = VecDeque::from([s]);
            while let Some(x) = queue.pop_front() {
                for &(y, ei) in &adj[x] {
                    if potential[y].is_some() {
                        continue;
                    }
                    let e = &self.edges[ei];
                    let px = potential[x].as_ref().unwrap();
                    // walking x -> y along e
                    let step: Vec<i64> = if e.tail == x {
                        e.gain.clone()
                    } else {
                        e.gain.iter().map(|g| -g).collect()
                    };
                    potential[y] = Some(px.iter().zip(&step).map(|(a, b)| a + b).collect());
                    comp[y] = n_comp;
                    tree_edge[ei] = true;
                    queue.push_back(y);
                }
            }
            n_comp += 1;
        }
        let mut cycles: Vec<Vec<Vec<i64>>> = vec![Vec::new(); n_comp];
        for (i, e) in self.edges.iter().enumerate() {
            if tree_edge[i] {
                continue;
            }
            let pu = potential[e.tail].as_ref().unwrap();
            let pv = potential[e.head].as_ref().unwrap();
            let z: Vec<i64> = (0..self.dim).map(|k| pu[k] + e.gain[k] - pv[k]).collect();
            cycles[comp[e.tail]].push(z);
        }
        cycles.iter().map(|c| integer_rank(c)).max().unwrap_or(0)
    }

    /// Checks `connected ∧ gain_rank = d  ⇔  rank I_{ℤᵈ}(G) = |V| - 1 + d`.
    pub fn full_rank_condition(&self, tol: &Tolerances) -> Result<FullRankCondition> {
        let connected = self.is_connected();
        let gain_rank = self.gain_rank();
        let rank_izd = numeric_rank(&self.incidence_zd(), tol)?.rank;
        let holds = connected && gain_rank == self.dim;
        let numeric_side = rank_izd == self.vertices.len() - 1 + self.dim;
        if holds != numeric_side {
            return Err(Error::InternalInconsistency(format!(
                "connected={connected}, gain rank={gain_rank}, rank I_Zd={rank_izd}"
            )));
        }
        Ok(FullRankCondition {
            holds,
            connected,
            gain_rank,
            rank_izd,
        })
    }

    /// Finite piece of the covering graph on `V x [-w, w]^d`.
    pub fn covering_window(&self, w: u32) -> CoveringWindow {
        let w = w as i64;
        let side = (2 * w + 1) as usize;
        let cells = side.pow(self.dim as u32);
        let offset = |idx: usize| -> Vec<i64> {
            let mut rest = idx;
            let mut a = vec![0; self.dim];
            for k in (0..self.dim).rev() {
                a[k] = (rest % side) as i64 - w;
                rest /= side;
            }
            a
        };
        let mut vertices = Vec::with_capacity(cells * self.vertices.len());
        let mut index = BTreeMap::new();
        for c in 0..cells {
            let alpha = offset(c);
            for v in 0..self.vertices.len() {
                index.insert((v, alpha.clone()), vertices.len());
                vertices.push(CoverVertex {
                    vertex: v,
                    cell: alpha.clone(),
                });
            }
        }
        let mut edges = Vec::new();
        for c in 0..cells {
            let alpha = offset(c);
            for (ei, e) in self.edges.iter().enumerate() {
                let beta: Vec<i64> = alpha.iter().zip(&e.gain).map(|(a, g)| a + g).collect();
                if beta.iter().any(|b| b.abs() > w) {
                    continue;
                }
                let a = index[&(e.tail, alpha.clone())];
                let b = index[&(e.head, beta)];
                edges.push(CoverEdge { a, b, edge: ei });
            }
        }
        CoveringWindow {
            window: w as u32,
            vertices,
            edges,
        }
    }

    /// Switching at `v` by `mu`: gains of edges entering `v` gain `+mu`, leaving `v` gain `-mu`.
    pub fn switch(&self, v: usize, mu: &[i64]) -> Result<Self> {
        if mu.len() != self.dim {
            return Err(Error::GainDimensionMismatch {
                gain: mu.to_vec(),
                expected: self.dim,
                got: mu.len(),
            });
        }
        if v >= self.vertices.len() {
            return Err(Error::UnknownVertex(v.to_string()));
        }
        let mut out = Self::new(self.dim, self.vertices.clone())?;
        for e in &self.edges {
            let mut g = e.gain.clone();
            if !e.is_loop() {
                if e.head == v {
                    g.iter_mut().zip(mu).for_each(|(x, m)| *x += m);
                } else if e.tail == v {
                    g.iter_mut().zip(mu).for_each(|(x, m)| *x -= m);
                }
            }
            out.add_edge(e.tail, e.head, g, e.marking)?;
        }
        Ok(out)
    }

    /// Graph without its loops, plus the indices of the kept edges.
    pub fn without_loops(&self) -> (Self, Vec<usize>) {
        let mut out = Self::new(self.dim, self.vertices.clone()).expect("valid vertices");
        let mut kept = Vec::new();
        for (i, e) in self.edges.iter().enumerate() {
            if !e.is_loop() {
                out.add_edge(e.tail, e.head, e.gain.clone(), e.marking)
                    .expect("subset of a valid edge set");
                kept.push(i);
            }
        }
        (out, kept)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct FullRankCondition {
    pub holds: bool,
    pub connected: bool,
    pub gain_rank: usize,
    pub rank_izd: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoverVertex {
    pub vertex: usize,
    pub cell: Vec<i64>,
}

/// Covering edge between window vertices `a` and `b`, lifted from quotient edge `edge`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CoverEdge {
    pub a: usize,
    pub b: usize,
    pub edge: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoveringWindow {
    pub window: u32,
    pub vertices: Vec<CoverVertex>,
    pub edges: Vec<CoverEdge>,
}

impl CoveringWindow {
    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.vertices.len()];
        for e in &self.edges {
            deg[e.a] += 1;
            deg[e.b] += 1;
        }
        deg
    }

    /// Vertices whose cell lies at least `margin` steps inside the window.
    pub fn is_interior(&self, idx: usize, margin: u32) -> bool {
        let limit = self.window as i64 - margin as i64;
        self.vertices[idx].cell.iter().all(|c| c.abs() <= limit)
    }
}
