//! Realizations `(p, L)` of a gain graph and their rigidity matrices.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::gain_graph::GainGraph;
use crate::linalg::{numeric_rank, Tolerances};

/// Point configuration `P` (`d x |V|`, column `v` is `p(v)`) and lattice `L` (`d x d`).
#[derive(Debug, Clone, PartialEq)]
pub struct Realization {
    pub p: DMatrix<f64>,
    pub l: DMatrix<f64>,
}

impl Realization {
    pub fn new(p: DMatrix<f64>, l: DMatrix<f64>) -> Result<Self> {
        let d = l.nrows();
        if d == 0 {
            return Err(Error::ZeroDimension);
        }
        if l.ncols() != d || p.nrows() != d {
            return Err(Error::ShapeMismatch(format!(
                "P is {}x{}, L is {}x{}",
                p.nrows(),
                p.ncols(),
                l.nrows(),
                l.ncols()
            )));
        }
        if let Some((i, x)) = p.iter().chain(l.iter()).enumerate().find(|(_, x)| !x.is_finite()) {
            return Err(Error::InvalidFinite(format!("entry {i} is {x}")));
        }
        Ok(Self { p, l })
    }

    /// From point rows `p(v)` and lattice columns `ℓ_j`.
    pub fn from_points(points: &[Vec<f64>], lattice_columns: &[Vec<f64>]) -> Result<Self> {
        let d = lattice_columns.len();
        for c in points.iter().chain(lattice_columns) {
            if c.len() != d {
                return Err(Error::LengthMismatch {
                    what: "coordinates",
                    expected: d,
                    got: c.len(),
                });
            }
        }
        let p = DMatrix::from_fn(d, points.len(), |k, v| points[v][k]);
        let l = DMatrix::from_fn(d, d, |k, j| lattice_columns[j][k]);
        Self::new(p, l)
    }

    pub fn dim(&self) -> usize {
        self.l.nrows()
    }

    pub fn num_vertices(&self) -> usize {
        self.p.ncols()
    }

    pub fn point(&self, v: usize) -> DVector<f64> {
        self.p.column(v).into_owned()
    }

    /// `[p(v1); ...; p(vn); ℓ1; ...; ℓd]`.
    pub fn vector_rep(&self) -> DVector<f64> {
        let d = self.dim();
        let n = self.num_vertices();
        let mut x = DVector::zeros(d * n + d * d);
        x.rows_mut(0, d * n).copy_from_slice(self.p.as_slice());
        x.rows_mut(d * n, d * d).copy_from_slice(self.l.as_slice());
        x
    }

    pub fn from_vector_rep(x: &DVector<f64>, d: usize) -> Result<Self> {
        if d == 0 || x.len() < d * d || (x.len() - d * d) % d != 0 {
            return Err(Error::LengthMismatch {
                what: "vector representation entries",
                expected: d * d,
                got: x.len(),
            });
        }
        let n = (x.len() - d * d) / d;
        let p = DMatrix::from_column_slice(d, n, &x.as_slice()[..d * n]);
        let l = DMatrix::from_column_slice(d, d, &x.as_slice()[d * n..]);
        Self::new(p, l)
    }

    /// `[P L]`, a `d x (|V| + d)` matrix.
    pub fn matrix_rep(&self) -> DMatrix<f64> {
        let d = self.dim();
        let n = self.num_vertices();
        let mut m = DMatrix::zeros(d, n + d);
        m.columns_mut(0, n).copy_from(&self.p);
        m.columns_mut(n, d).copy_from(&self.l);
        m
    }

    pub fn from_matrix_rep(m: &DMatrix<f64>) -> Result<Self> {
        let d = m.nrows();
        if m.ncols() < d {
            return Err(Error::ShapeMismatch(format!("[P L] has only {} columns", m.ncols())));
        }
        let n = m.ncols() - d;
        Self::new(m.columns(0, n).into_owned(), m.columns(n, d).into_owned())
    }

    pub fn det(&self) -> f64 {
        self.l.determinant()
    }

    pub fn is_non_flat(&self, tol: &Tolerances) -> bool {
        numeric_rank(&self.l, tol).is_ok_and(|r| r.rank == self.dim())
    }

    pub fn require_non_flat(&self, tol: &Tolerances) -> Result<()> {
        if self.is_non_flat(tol) {
            Ok(())
        } else {
            Err(Error::FlatLattice { det: self.det() })
        }
    }

    /// Whether `{p(v) + Lμ}` affinely spans `ℝᵈ`.
    pub fn is_affinely_spanning(&self, tol: &Tolerances) -> bool {
        let d = self.dim();
        let n = self.num_vertices();
        if n == 0 {
            return false;
        }
        let mut m = self.matrix_rep();
        let p0 = self.point(0);
        for v in 0..n {
            let mut c = m.column_mut(v);
            c -= &p0;
        }
        numeric_rank(&m, tol).is_ok_and(|r| r.rank == d)
    }

    fn require_spanning(&self, tol: &Tolerances) -> Result<()> {
        if self.is_affinely_spanning(tol) {
            Ok(())
        } else {
            Err(Error::NotAffinelySpanning)
        }
    }

    /// Lifted position `p(v) + Lα` of covering vertex `(v, α)`.
    pub fn lift(&self, v: usize, alpha: &[i64]) -> DVector<f64> {
        let a = DVector::from_iterator(alpha.len(), alpha.iter().map(|&x| x as f64));
        self.point(v) + &self.l * a
    }

    /// Image under `x ↦ Ax + t` (`P ↦ AP + t1ᵀ`, `L ↦ AL`).
    pub fn transformed(&self, a: &DMatrix<f64>, t: &DVector<f64>) -> Self {
        let mut p = a * &self.p;
        for mut c in p.column_iter_mut() {
            c += t;
        }
        Self {
            p,
            l: a * &self.l,
        }
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            p: &self.p * c,
            l: &self.l * c,
        }
    }

    fn check_graph(&self, g: &GainGraph) -> Result<()> {
        if g.dim() != self.dim() {
            return Err(Error::LengthMismatch {
                what: "lattice dimension",
                expected: g.dim(),
                got: self.dim(),
            });
        }
        if g.num_vertices() != self.num_vertices() {
            return Err(Error::LengthMismatch {
                what: "vertex positions",
                expected: g.num_vertices(),
                got: self.num_vertices(),
            });
        }
        Ok(())
    }
}

/// Edge vectors `ν(e) = p(v) + Lγ − p(u)` as the columns of a `d x |E|` matrix.
pub fn edge_vectors(g: &GainGraph, r: &Realization) -> Result<DMatrix<f64>> {
    r.check_graph(g)?;
    let d = g.dim();
    let mut nu = DMatrix::zeros(d, g.num_edges());
    for (i, e) in g.edges().iter().enumerate() {
        let v = r.lift(e.head, &e.gain) - r.point(e.tail);
        nu.column_mut(i).copy_from(&v);
    }
    Ok(nu)
}

/// Squared edge lengths `f_G(p, L)`.
pub fn measurement(g: &GainGraph, r: &Realization) -> Result<DVector<f64>> {
    let nu = edge_vectors(g, r)?;
    Ok(DVector::from_iterator(
        nu.ncols(),
        nu.column_iter().map(|c| c.norm_squared()),
    ))
}

/// `R(G, p, L)`: `|E| x (d|V| + d²)`, half the Jacobian of the measurement map.
pub fn rigidity_matrix(g: &GainGraph, r: &Realization) -> Result<DMatrix<f64>> {
    let nu = edge_vectors(g, r)?;
    let d = g.dim();
    let n = g.num_vertices();
    let mut m = DMatrix::zeros(g.num_edges(), d * n + d * d);
    for (i, e) in g.edges().iter().enumerate() {
        for k in 0..d {
            let x = nu[(k, i)];
            if !e.is_loop() {
                m[(i, e.tail * d + k)] = -x;
                m[(i, e.head * d + k)] = x;
            }
            for j in 0..d {
                m[(i, d * n + j * d + k)] = e.gain[j] as f64 * x;
            }
        }
    }
    Ok(m)
}

/// `R_L(G, p)`: the vertex columns of [`rigidity_matrix`].
pub fn fixed_rigidity_matrix(g: &GainGraph, r: &Realization) -> Result<DMatrix<f64>> {
    let full = rigidity_matrix(g, r)?;
    Ok(full.columns(0, g.dim() * g.num_vertices()).into_owned())
}

/// `R^vol`: [`rigidity_matrix`] with the row `(0, −½ vec(L^{−T}))` appended.
pub fn volume_rigidity_matrix(g: &GainGraph, r: &Realization, tol: &Tolerances) -> Result<DMatrix<f64>> {
    r.require_non_flat(tol)?;
    let full = rigidity_matrix(g, r)?;
    let d = g.dim();
    let n = g.num_vertices();
    let inv_t = r
        .l
        .clone()
        .try_inverse()
        .ok_or(Error::FlatLattice { det: r.det() })?
        .transpose();
    let mut m = full.insert_row(g.num_edges(), 0.0);
    for (k, x) in inv_t.iter().enumerate() {
        m[(g.num_edges(), d * n + k)] = -0.5 * x;
    }
    Ok(m)
}

/// Basis (as columns) of the trivial infinitesimal motions: translations and
/// `m(v) = Ap(v)`, `M = AL` for skew `A`.
pub fn trivial_motions(r: &Realization, tol: &Tolerances) -> Result<DMatrix<f64>> {
    r.require_spanning(tol)?;
    let d = r.dim();
    let n = r.num_vertices();
    let mut cols = Vec::new();
    for i in 0..d {
        let mut x = DVector::zeros(d * n + d * d);
        for v in 0..n {
            x[v * d + i] = 1.0;
        }
        cols.push(x);
    }
    for i in 0..d {
        for j in i + 1..d {
            let mut a = DMatrix::zeros(d, d);
            a[(i, j)] = -1.0;
            a[(j, i)] = 1.0;
            let moved = Realization {
                p: &a * &r.p,
                l: &a * &r.l,
            };
            cols.push(moved.vector_rep());
        }
    }
    Ok(DMatrix::from_columns(&cols))
}

pub fn is_infinitesimally_rigid(g: &GainGraph, r: &Realization, tol: &Tolerances) -> Result<bool> {
    r.require_spanning(tol)?;
    let d = g.dim();
    let rank = numeric_rank(&rigidity_matrix(g, r)?, tol)?.rank;
    Ok(rank == d * g.num_vertices() + d * (d - 1) / 2)
}

/// Fixed-lattice infinitesimal rigidity: the kernel of `R_L` is the translations.
pub fn is_fixed_lattice_inf_rigid(g: &GainGraph, r: &Realization, tol: &Tolerances) -> Result<bool> {
    r.require_spanning(tol)?;
    let m = fixed_rigidity_matrix(g, r)?;
    let rank = numeric_rank(&m, tol)?.rank;
    Ok(m.ncols() - rank == g.dim())
}

/// Coordinates and lattice entries uniform on `[1, 2)`; redrawn while `L` is flat.
pub fn random_realization_with(g: &GainGraph, rng: &mut impl Rng, tol: &Tolerances) -> Realization {
    let d = g.dim();
    let n = g.num_vertices();
    loop {
        let p = DMatrix::from_fn(d, n, |_, _| rng.random_range(1.0..2.0));
        let l = DMatrix::from_fn(d, d, |_, _| rng.random_range(1.0..2.0));
        let r = Realization { p, l };
        if r.det().abs() >= tol.residual_tol {
            return r;
        }
    }
}

/// [`random_realization_with`] driven by a ChaCha generator seeded from `tol.rng_seed`.
pub fn random_realization(g: &GainGraph, tol: &Tolerances) -> Realization {
    let mut rng = ChaCha8Rng::seed_from_u64(tol.rng_seed);
    random_realization_with(g, &mut rng, tol)
}

/// An isometry `x ↦ Mx + t` carrying one realization onto another.
#[derive(Debug, Clone, PartialEq)]
pub struct Congruence {
    pub m: DMatrix<f64>,
    pub t: DVector<f64>,
    pub residual: f64,
}

/// Orthogonal Procrustes fit of `b` onto `a`: returns the best `M` (reflections
/// allowed), `t` and the max-entry residual of `[M P + t1ᵀ, M L] − [Q, L']`.
pub fn procrustes(a: &Realization, b: &Realization) -> Result<Congruence> {
    if a.dim() != b.dim() || a.num_vertices() != b.num_vertices() {
        return Err(Error::ShapeMismatch("realizations differ in size".into()));
    }
    let d = a.dim();
    let n = a.num_vertices();
    let centroid = |r: &Realization| -> DVector<f64> {
        if n == 0 {
            DVector::zeros(d)
        } else {
            r.p.column_sum() / n as f64
        }
    };
    let ca = centroid(a);
    let cb = centroid(b);
    let centred = |r: &Realization, c: &DVector<f64>| {
        let mut m = r.matrix_rep();
        for v in 0..n {
            let mut col = m.column_mut(v);
            col -= c;
        }
        m
    };
    let x = centred(a, &ca);
    let y = centred(b, &cb);
    let svd = (&y * x.transpose()).svd(true, true);
    let m = svd.u.expect("u") * svd.v_t.expect("v_t");
    let t = &cb - &m * &ca;
    let residual = crate::linalg::max_abs(&(&m * &x - &y));
    Ok(Congruence { m, t, residual })
}

/// `Some` when `r2 = M r1 + t` for an orthogonal `M`, up to `tol * (1 + scale)`.
pub fn congruence_check(r1: &Realization, r2: &Realization, tol: f64) -> Option<Congruence> {
    let c = procrustes(r1, r2).ok()?;
    let scale = crate::linalg::max_abs(&r1.matrix_rep()).max(crate::linalg::max_abs(&r2.matrix_rep()));
    (c.residual <= tol * (1.0 + scale)).then_some(c)
}
