//! Equilibrium stresses and weighted Laplacians.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::framework::{
    edge_vectors, fixed_rigidity_matrix, rigidity_matrix, volume_rigidity_matrix, Realization,
};
use crate::gain_graph::{GainGraph, Marking};
use crate::linalg::{max_abs, nullspace, numeric_rank, numeric_rank_scaled, Side, Tolerances};

/// `𝓛(G,ω)`, `𝓛_{ℤᵈ}(G,ω)` and the blocks of the latter.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedLaplacians {
    /// `I(G)ᵀ diag(ω) I(G)`.
    pub laplacian: DMatrix<f64>,
    /// `I_{ℤᵈ}(G)ᵀ diag(ω) I_{ℤᵈ}(G)`.
    pub laplacian_zd: DMatrix<f64>,
    /// `I(G)ᵀ diag(ω) M(G)ᵀ`.
    pub cross: DMatrix<f64>,
    /// `M(G) diag(ω) M(G)ᵀ`.
    pub lattice: DMatrix<f64>,
}

/// Natural size of the stress matrices of `omega`: `Σ|ω(e)|(1 + ‖γ(e)‖∞)²`.
/// Rank decisions on `𝓛` and `𝓛_{ℤᵈ}` are taken relative to this.
pub fn stress_scale(g: &GainGraph, omega: &[f64]) -> f64 {
    g.edges()
        .iter()
        .zip(omega)
        .map(|(e, w)| {
            let k = 1.0 + e.gain.iter().map(|x| x.abs()).max().unwrap_or(0) as f64;
            w.abs() * k * k
        })
        .sum()
}

fn check_len(g: &GainGraph, omega: &[f64]) -> Result<()> {
    if omega.len() != g.num_edges() {
        return Err(Error::LengthMismatch {
            what: "edge weights",
            expected: g.num_edges(),
            got: omega.len(),
        });
    }
    Ok(())
}

pub fn weighted_laplacians(g: &GainGraph, omega: &[f64]) -> Result<WeightedLaplacians> {
    check_len(g, omega)?;
    let n = g.num_vertices();
    let d = g.dim();
    let izd = g.incidence_zd();
    let mut weighted = izd.clone();
    for (i, w) in omega.iter().enumerate() {
        weighted.row_mut(i).scale_mut(*w);
    }
    let laplacian_zd = izd.transpose() * weighted;
    Ok(WeightedLaplacians {
        laplacian: laplacian_zd.view((0, 0), (n, n)).into_owned(),
        cross: laplacian_zd.view((0, n), (n, d)).into_owned(),
        lattice: laplacian_zd.view((n, n), (d, d)).into_owned(),
        laplacian_zd,
    })
}

/// Orthonormal basis (columns) of the equilibrium stresses, the left kernel of `R(G,p,L)`.
pub fn stress_space(g: &GainGraph, r: &Realization, tol: &Tolerances) -> Result<DMatrix<f64>> {
    nullspace(&rigidity_matrix(g, r)?, Side::Left, tol)
}

/// Orthonormal basis of the fixed-lattice equilibrium stresses, the left kernel of `R_L(G,p)`.
pub fn fixed_stress_space(g: &GainGraph, r: &Realization, tol: &Tolerances) -> Result<DMatrix<f64>> {
    nullspace(&fixed_rigidity_matrix(g, r)?, Side::Left, tol)
}

/// Left kernel of `R^vol`, split into stresses and multipliers.
#[derive(Debug, Clone, PartialEq)]
pub struct LambdaStressSpace {
    /// Orthonormal left-kernel basis of `R^vol`, one `(ω, κ)` per column.
    pub kernel: DMatrix<f64>,
    /// The `ω` parts, one per column.
    pub omegas: DMatrix<f64>,
    /// `λ = κ/2` for each column, so that `[P L]𝓛_{ℤᵈ} = λ[0 L^{-T}]`.
    pub lambdas: Vec<f64>,
}

pub fn lambda_stress_space(g: &GainGraph, r: &Realization, tol: &Tolerances) -> Result<LambdaStressSpace> {
    let kernel = nullspace(&volume_rigidity_matrix(g, r, tol)?, Side::Left, tol)?;
    let m = g.num_edges();
    let omegas = kernel.rows(0, m).into_owned();
    let lambdas = kernel.row(m).iter().map(|k| 0.5 * k).collect();
    Ok(LambdaStressSpace {
        kernel,
        omegas,
        lambdas,
    })
}

/// Which equilibrium condition to test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "mode", content = "lambda", rename_all = "lowercase")]
pub enum EquilibriumMode {
    Flexible,
    Fixed,
    Volume(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EquilibriumReport {
    pub residual: f64,
    pub scale: f64,
    pub pass: bool,
}

/// Natural size of the force terms: `max(1, Σ|ω(e)| ‖ν(e)‖ (1 + ‖γ(e)‖∞))`.
fn force_scale(g: &GainGraph, nu: &DMatrix<f64>, omega: &[f64]) -> f64 {
    let s: f64 = g
        .edges()
        .iter()
        .enumerate()
        .map(|(i, e)| {
            let gmax = e.gain.iter().map(|x| x.abs()).max().unwrap_or(0) as f64;
            omega[i].abs() * nu.column(i).norm() * (1.0 + gmax)
        })
        .sum();
    s.max(1.0)
}

pub fn verify_equilibrium(
    g: &GainGraph,
    r: &Realization,
    omega: &[f64],
    mode: EquilibriumMode,
    tol: &Tolerances,
) -> Result<EquilibriumReport> {
    let lap = weighted_laplacians(g, omega)?;
    let nu = edge_vectors(g, r)?;
    let n = g.num_vertices();
    let d = g.dim();
    let pl = r.matrix_rep();
    let residual = match mode {
        EquilibriumMode::Flexible => max_abs(&(&pl * &lap.laplacian_zd)),
        EquilibriumMode::Fixed => {
            // P𝓛 + L M diag(ω) I = [P L] times the first |V| columns of 𝓛_{ℤᵈ}
            max_abs(&(&pl * lap.laplacian_zd.columns(0, n)))
        }
        EquilibriumMode::Volume(lambda) => {
            r.require_non_flat(tol)?;
            let inv_t = r
                .l
                .clone()
                .try_inverse()
                .ok_or(Error::FlatLattice { det: r.det() })?
                .transpose();
            let mut target = DMatrix::zeros(d, n + d);
            target.columns_mut(n, d).copy_from(&(inv_t * lambda));
            max_abs(&(&pl * &lap.laplacian_zd - target))
        }
    };
    let mut scale = force_scale(g, &nu, omega);
    if let EquilibriumMode::Volume(lambda) = mode {
        scale = scale.max(lambda.abs());
    }
    Ok(EquilibriumReport {
        residual,
        scale,
        pass: residual <= tol.residual_tol * scale,
    })
}

/// Rejects a stress that is negative on a cable or positive on a strut.
/// Entries with `|ω(e)| <= residual_tol` count as zero.
pub fn check_proper(g: &GainGraph, omega: &[f64], tol: &Tolerances) -> Result<()> {
    check_len(g, omega)?;
    for (i, (e, &w)) in g.edges().iter().zip(omega).enumerate() {
        let bad = match e.marking {
            Marking::Bar => false,
            Marking::Cable => w < -tol.residual_tol,
            Marking::Strut => w > tol.residual_tol,
        };
        if bad {
            return Err(Error::ImproperStress {
                edge: i,
                marking: e.marking.as_str(),
                weight: w,
            });
        }
    }
    Ok(())
}

/// Scales `omega` so that its largest-magnitude entry (first on ties) is `+1`.
pub fn canonical_scaling(omega: &[f64]) -> Vec<f64> {
    let mut best = 0.0_f64;
    let mut pivot = 0.0;
    for &w in omega {
        if w.abs() > best {
            best = w.abs();
            pivot = w;
        }
    }
    if pivot == 0.0 {
        return omega.to_vec();
    }
    omega.iter().map(|w| w / pivot).collect()
}

/// `d(d+1)/2` default loop gains: `e_i` for each `i`, then `e_i + e_j` for `i < j`.
pub fn default_loop_gains(d: usize) -> Vec<Vec<i64>> {
    let mut out = Vec::new();
    for i in 0..d {
        let mut g = vec![0; d];
        g[i] = 1;
        out.push(g);
    }
    for i in 0..d {
        for j in i + 1..d {
            let mut g = vec![0; d];
            g[i] = 1;
            g[j] = 1;
            out.push(g);
        }
    }
    out
}

/// Loops added by [`extend_with_loops`].
#[derive(Debug, Clone, PartialEq)]
pub struct Extension {
    pub graph: GainGraph,
    /// Stress on the extended graph (original edges first).
    pub omega: Vec<f64>,
    /// Loop weights `μ`, in the order of the supplied gains.
    pub mu: Vec<f64>,
    /// Edge index carrying each loop (an existing loop is reused).
    pub loop_edges: Vec<usize>,
}

/// Turns a fixed-lattice stress into a flexible-lattice one by adding loops at
/// `vertex` whose weights balance the lattice equation.
pub fn extend_with_loops(
    g: &GainGraph,
    r: &Realization,
    omega: &[f64],
    vertex: usize,
    gains: Option<&[Vec<i64>]>,
    tol: &Tolerances,
) -> Result<Extension> {
    let d = g.dim();
    let fixed = verify_equilibrium(g, r, omega, EquilibriumMode::Fixed, tol)?;
    if !fixed.pass {
        return Err(Error::NotFixedLatticeStress {
            residual: fixed.residual,
        });
    }
    r.require_non_flat(tol)?;
    if vertex >= g.num_vertices() {
        return Err(Error::UnknownVertex(vertex.to_string()));
    }
    let gains: Vec<Vec<i64>> = gains.map_or_else(|| default_loop_gains(d), <[_]>::to_vec);
    let k = d * (d + 1) / 2;
    if gains.len() != k || gains.iter().any(|g| g.len() != d) {
        return Err(Error::SingularGainBasis);
    }
    // coordinates of γγᵀ in the basis (i <= j)
    let pairs: Vec<(usize, usize)> = (0..d).flat_map(|i| (i..d).map(move |j| (i, j))).collect();
    let a = DMatrix::from_fn(k, k, |row, f| {
        let (i, j) = pairs[row];
        (gains[f][i] * gains[f][j]) as f64
    });
    if numeric_rank(&a, tol)?.rank < k {
        return Err(Error::SingularGainBasis);
    }
    let nu = edge_vectors(g, r)?;
    let mut moment = DMatrix::zeros(d, d);
    for (i, e) in g.edges().iter().enumerate() {
        let gamma = DVector::from_iterator(d, e.gain.iter().map(|&x| x as f64));
        moment += nu.column(i) * gamma.transpose() * omega[i];
    }
    let l_inv = r.l.clone().try_inverse().ok_or(Error::FlatLattice { det: r.det() })?;
    let x = -(l_inv * moment);
    let x = (&x + x.transpose()) * 0.5;
    let rhs = DVector::from_iterator(k, pairs.iter().map(|&(i, j)| x[(i, j)]));
    let mu = a.lu().solve(&rhs).ok_or(Error::SingularGainBasis)?;

    let mut graph = g.clone();
    let mut out = omega.to_vec();
    let mut loop_edges = Vec::with_capacity(k);
    for (f, gain) in gains.iter().enumerate() {
        let existing = graph.edges().iter().position(|e| {
            e.tail == vertex
                && e.head == vertex
                && (e.gain == *gain || e.gain.iter().zip(gain).all(|(a, b)| *a == -b))
        });
        match existing {
            Some(idx) => {
                out[idx] += mu[f];
                loop_edges.push(idx);
            }
            None => {
                loop_edges.push(graph.add_edge(vertex, vertex, gain.clone(), Marking::Bar)?);
                out.push(mu[f]);
            }
        }
    }
    Ok(Extension {
        graph,
        omega: out,
        mu: mu.iter().copied().collect(),
        loop_edges,
    })
}

/// Result of removing the loops from a stressed graph.
#[derive(Debug, Clone, PartialEq)]
pub struct Stripped {
    pub graph: GainGraph,
    pub omega: Vec<f64>,
    pub rank_laplacian_zd: usize,
    pub rank_laplacian: usize,
    pub rank_stripped: usize,
}

/// Removes loops and checks `rank 𝓛_{ℤᵈ}(G,ω) = rank 𝓛(G,ω) = rank 𝓛(G',ω')`.
pub fn strip_loops(g: &GainGraph, r: &Realization, omega: &[f64], tol: &Tolerances) -> Result<Stripped> {
    r.require_non_flat(tol)?;
    let eq = verify_equilibrium(g, r, omega, EquilibriumMode::Flexible, tol)?;
    if !eq.pass {
        return Err(Error::HypothesisFailed(format!(
            "weights are not an equilibrium stress (residual {:.3e})",
            eq.residual
        )));
    }
    let (graph, kept) = g.without_loops();
    let stripped: Vec<f64> = kept.iter().map(|&i| omega[i]).collect();
    let full = weighted_laplacians(g, omega)?;
    let small = weighted_laplacians(&graph, &stripped)?;
    let scale = stress_scale(g, omega);
    let rank_laplacian_zd = numeric_rank_scaled(&full.laplacian_zd, scale, tol)?.rank;
    let rank_laplacian = numeric_rank_scaled(&full.laplacian, scale, tol)?.rank;
    let rank_stripped = numeric_rank_scaled(&small.laplacian, scale, tol)?.rank;
    if rank_laplacian_zd != rank_laplacian || rank_laplacian != rank_stripped {
        return Err(Error::RankMismatch(format!(
            "rank L_Zd = {rank_laplacian_zd}, rank L = {rank_laplacian}, rank L(G') = {rank_stripped}"
        )));
    }
    let fixed = verify_equilibrium(&graph, r, &stripped, EquilibriumMode::Fixed, tol)?;
    if !fixed.pass {
        return Err(Error::RankMismatch(format!(
            "restricted stress fails the fixed-lattice equilibrium (residual {:.3e})",
            fixed.residual
        )));
    }
    Ok(Stripped {
        graph,
        omega: stripped,
        rank_laplacian_zd,
        rank_laplacian,
        rank_stripped,
    })
}

/// Largest net force at a covering vertex of the window `w` whose whole
/// neighbourhood lies inside the window.
pub fn covering_force_residual(g: &GainGraph, r: &Realization, omega: &[f64], w: u32) -> Result<(f64, usize)> {
    check_len(g, omega)?;
    let cover = g.covering_window(w);
    let d = g.dim();
    let pos: Vec<DVector<f64>> = cover.vertices.iter().map(|x| r.lift(x.vertex, &x.cell)).collect();
    let mut force = vec![DVector::<f64>::zeros(d); pos.len()];
    for e in &cover.edges {
        let f = (&pos[e.b] - &pos[e.a]) * omega[e.edge];
        force[e.a] += &f;
        force[e.b] -= &f;
    }
    let reach = g
        .edges()
        .iter()
        .flat_map(|e| e.gain.iter().map(|x| x.unsigned_abs()))
        .max()
        .unwrap_or(0) as u32;
    let mut worst = 0.0_f64;
    let mut checked = 0;
    for (i, f) in force.iter().enumerate() {
        if reach <= w && cover.is_interior(i, reach) {
            worst = worst.max(f.amax());
            checked += 1;
        }
    }
    Ok((worst, checked))
}
