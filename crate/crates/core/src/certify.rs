//! Super-stability certificates and randomized generic global-rigidity tests.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::framework::{
    edge_vectors, is_infinitesimally_rigid, random_realization_with, Realization,
};
use crate::gain_graph::{GainGraph, Marking};
use crate::linalg::{numeric_rank_scaled, psd_check, to_rows, Tolerances};
use crate::stress::{
    check_proper, fixed_stress_space, stress_scale, stress_space, verify_equilibrium, weighted_laplacians,
    EquilibriumMode,
};

/// Outcome of a certificate or generic test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Verdict {
    SuperStable,
    FixedLatticeSuperStable,
    VolumeSuperStable,
    GenericGloballyRigid,
    GenericNotGloballyRigid,
    FixedLatticeGenericGloballyRigid,
    FixedLatticeGenericNotGloballyRigid,
    Inconclusive,
}

impl Verdict {
    /// Positive verdicts assert (global) rigidity.
    pub fn is_positive(self) -> bool {
        matches!(
            self,
            Verdict::SuperStable
                | Verdict::FixedLatticeSuperStable
                | Verdict::VolumeSuperStable
                | Verdict::GenericGloballyRigid
                | Verdict::FixedLatticeGenericGloballyRigid
        )
    }
}

/// One sample of a randomized test.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trial {
    pub verdict: Verdict,
    pub infinitesimally_rigid: Option<bool>,
    pub stress_space_dim: usize,
    pub kernel_dim: usize,
    pub marginal: bool,
}

/// Verdict plus the witness data needed to re-check it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Certificate {
    pub verdict: Verdict,
    /// Hypotheses that did not hold, in evaluation order.
    pub failed: Vec<String>,
    pub stress: Option<Vec<f64>>,
    pub lambda: Option<f64>,
    pub kernel_dim: Option<usize>,
    pub expected_kernel_dim: Option<usize>,
    pub min_eigenvalue: Option<f64>,
    pub residual: Option<f64>,
    pub conic_witness: Option<Vec<Vec<f64>>>,
    pub marginal: bool,
    pub trials: Vec<Trial>,
}

impl Certificate {
    fn empty(verdict: Verdict) -> Self {
        Self {
            verdict,
            failed: Vec::new(),
            stress: None,
            lambda: None,
            kernel_dim: None,
            expected_kernel_dim: None,
            min_eigenvalue: None,
            residual: None,
            conic_witness: None,
            marginal: false,
            trials: Vec::new(),
        }
    }

    /// Recomputes a single-realization certificate from its stored witness and
    /// checks that the same verdict comes out.
    pub fn reverify(&self, g: &GainGraph, r: &Realization, tol: &Tolerances) -> Result<bool> {
        let Some(omega) = self.stress.as_deref() else {
            return Ok(!self.verdict.is_positive());
        };
        let again = match self.verdict {
            Verdict::SuperStable => certify_super_stable(g, r, omega, tol)?,
            Verdict::FixedLatticeSuperStable => certify_fixed_lattice(g, r, omega, tol)?,
            Verdict::VolumeSuperStable => {
                crate::optimize::certify_volume_constrained(g, r, omega, self.lambda.unwrap_or(0.0), tol)?
            }
            _ => return Ok(true),
        };
        Ok(again.verdict == self.verdict)
    }
}

/// Upper-triangle index pairs `(i, j)`, `i <= j`.
fn sym_pairs(d: usize) -> Vec<(usize, usize)> {
    (0..d).flat_map(|i| (i..d).map(move |j| (i, j))).collect()
}

/// A nonzero symmetric `Q` with `ν(e)ᵀ Q ν(e) = 0` for every edge, if one exists.
pub fn conic_at_infinity(g: &GainGraph, r: &Realization, tol: &Tolerances) -> Result<Option<DMatrix<f64>>> {
    let nu = edge_vectors(g, r)?;
    let d = g.dim();
    let scale = crate::linalg::max_abs(&r.matrix_rep()).max(1.0);
    let pairs = sym_pairs(d);
    let mut rows = DMatrix::zeros(g.num_edges(), pairs.len());
    for i in 0..g.num_edges() {
        let norm = nu.column(i).norm();
        if norm <= tol.residual_tol * scale {
            return Err(Error::DegenerateEdge { edge: i });
        }
        let u = nu.column(i) / norm;
        for (c, &(a, b)) in pairs.iter().enumerate() {
            rows[(i, c)] = if a == b { u[a] * u[a] } else { 2.0 * u[a] * u[b] };
        }
    }
    let kernel = crate::linalg::nullspace(&rows, crate::linalg::Side::Right, tol)?;
    if kernel.ncols() == 0 {
        return Ok(None);
    }
    let mut q = DMatrix::zeros(d, d);
    for (c, &(a, b)) in pairs.iter().enumerate() {
        q[(a, b)] = kernel[(c, 0)];
        q[(b, a)] = kernel[(c, 0)];
    }
    let n = q.norm();
    Ok(Some(q / n))
}

/// Affine image `x ↦ A_t x` with `I − A_tᵀA_t = tQ̂`, where `Q̂ = Q / max|eig(Q)|`.
/// For `0 < t < 1`, edge lengths are preserved whenever `Q` is a conic at infinity
/// for the edge directions.
pub fn conic_deformation(r: &Realization, q: &DMatrix<f64>, t: f64) -> Result<Realization> {
    let d = r.dim();
    if q.nrows() != d || q.ncols() != d {
        return Err(Error::ShapeMismatch(format!("Q must be {d}x{d}")));
    }
    let eig = SymmetricEigen::new((q + q.transpose()) * 0.5);
    let top = eig.eigenvalues.amax();
    if top == 0.0 {
        return Err(Error::HypothesisFailed("Q is zero".into()));
    }
    let diag = eig.eigenvalues.map(|x| {
        let s = 1.0 - t * x / top;
        if s > 0.0 {
            s.sqrt()
        } else {
            f64::NAN
        }
    });
    if diag.iter().any(|x| x.is_nan()) {
        return Err(Error::HypothesisFailed("t too large for Q".into()));
    }
    let a = &eig.eigenvectors * DMatrix::from_diagonal(&diag) * eig.eigenvectors.transpose();
    Ok(r.transformed(&a, &DVector::zeros(d)))
}

pub fn certify_super_stable(g: &GainGraph, r: &Realization, omega: &[f64], tol: &Tolerances) -> Result<Certificate> {
    if !r.is_affinely_spanning(tol) {
        return Err(Error::NotAffinelySpanning);
    }
    check_proper(g, omega, tol)?;
    let d = g.dim();
    let eq = verify_equilibrium(g, r, omega, EquilibriumMode::Flexible, tol)?;
    let lap = weighted_laplacians(g, omega)?;
    let rank = numeric_rank_scaled(&lap.laplacian_zd, stress_scale(g, omega), tol)?;
    let kernel_dim = rank.nullity(lap.laplacian_zd.ncols());
    let psd = psd_check(&lap.laplacian_zd, tol)?;
    let conic = conic_at_infinity(g, r, tol)?;

    let mut cert = Certificate::empty(Verdict::Inconclusive);
    if !eq.pass {
        cert.failed.push("equilibrium".into());
    }
    if kernel_dim != d + 1 {
        cert.failed.push(format!("kernel dimension {kernel_dim} != {}", d + 1));
    }
    if !psd.is_psd {
        cert.failed.push("positive semidefinite".into());
    }
    if conic.is_some() {
        cert.failed.push("no conic at infinity".into());
    }
    if cert.failed.is_empty() {
        cert.verdict = Verdict::SuperStable;
    }
    cert.stress = Some(omega.to_vec());
    cert.kernel_dim = Some(kernel_dim);
    cert.expected_kernel_dim = Some(d + 1);
    cert.min_eigenvalue = Some(psd.min_eigenvalue);
    cert.residual = Some(eq.residual);
    cert.conic_witness = conic.as_ref().map(to_rows);
    cert.marginal = rank.marginal;
    Ok(cert)
}

pub fn certify_fixed_lattice(g: &GainGraph, r: &Realization, omega: &[f64], tol: &Tolerances) -> Result<Certificate> {
    check_proper(g, omega, tol)?;
    let eq = verify_equilibrium(g, r, omega, EquilibriumMode::Fixed, tol)?;
    let lap = weighted_laplacians(g, omega)?;
    let rank = numeric_rank_scaled(&lap.laplacian, stress_scale(g, omega), tol)?;
    let kernel_dim = rank.nullity(lap.laplacian.ncols());
    let psd = psd_check(&lap.laplacian, tol)?;

    let mut cert = Certificate::empty(Verdict::Inconclusive);
    if !eq.pass {
        cert.failed.push("fixed-lattice equilibrium".into());
    }
    if kernel_dim != 1 {
        cert.failed.push(format!("kernel dimension {kernel_dim} != 1"));
    }
    if !psd.is_psd {
        cert.failed.push("positive semidefinite".into());
    }
    if cert.failed.is_empty() {
        cert.verdict = Verdict::FixedLatticeSuperStable;
    }
    cert.stress = Some(omega.to_vec());
    cert.kernel_dim = Some(kernel_dim);
    cert.expected_kernel_dim = Some(1);
    cert.min_eigenvalue = Some(psd.min_eigenvalue);
    cert.residual = Some(eq.residual);
    cert.marginal = rank.marginal;
    Ok(cert)
}

/// Shortcut for all-cable, connected, rank-`d` graphs with a strictly positive stress.
pub fn certify_spiderweb(g: &GainGraph, r: &Realization, omega: &[f64], tol: &Tolerances) -> Result<Certificate> {
    if let Some(i) = g.edges().iter().position(|e| e.marking != Marking::Cable) {
        return Err(Error::NotSpiderweb(format!("edge {i} is not a cable")));
    }
    if !g.is_connected() {
        return Err(Error::NotSpiderweb("graph is disconnected".into()));
    }
    let rank = g.gain_rank();
    if rank != g.dim() {
        return Err(Error::NotSpiderweb(format!("gain rank {rank} != {}", g.dim())));
    }
    if !r.is_non_flat(tol) {
        return Err(Error::NotSpiderweb("lattice is flat".into()));
    }
    if omega.len() != g.num_edges() {
        return Err(Error::LengthMismatch {
            what: "edge weights",
            expected: g.num_edges(),
            got: omega.len(),
        });
    }
    let eq = verify_equilibrium(g, r, omega, EquilibriumMode::Fixed, tol)?;
    let positive = omega.iter().all(|&w| w > tol.residual_tol);
    if !(positive && eq.pass) {
        let mut cert = Certificate::empty(Verdict::Inconclusive);
        if !positive {
            cert.failed.push("strictly positive stress".into());
        }
        if !eq.pass {
            cert.failed.push("fixed-lattice equilibrium".into());
        }
        cert.stress = Some(omega.to_vec());
        cert.residual = Some(eq.residual);
        return Ok(cert);
    }
    certify_fixed_lattice(g, r, omega, tol)
}

/// Random unit vector in the column span of `basis` (zero if the span is empty).
fn random_combination(basis: &DMatrix<f64>, rng: &mut impl Rng) -> Vec<f64> {
    if basis.ncols() == 0 {
        return vec![0.0; basis.nrows()];
    }
    let mut c = DVector::from_fn(basis.ncols(), |_, _| rng.random_range(-1.0..1.0));
    while c.norm() < 1e-3 {
        c = DVector::from_fn(basis.ncols(), |_, _| rng.random_range(-1.0..1.0));
    }
    let w = basis * c.normalize();
    w.iter().copied().collect()
}

/// Majority over trials; any disagreement sets `marginal`, a tie is inconclusive.
fn aggregate(trials: Vec<Trial>, positive: Verdict, negative: Verdict) -> Certificate {
    let yes = trials.iter().filter(|t| t.verdict == positive).count();
    let no = trials.len() - yes;
    let verdict = match yes.cmp(&no) {
        std::cmp::Ordering::Greater => positive,
        std::cmp::Ordering::Less => negative,
        std::cmp::Ordering::Equal => Verdict::Inconclusive,
    };
    let mut cert = Certificate::empty(verdict);
    cert.marginal = (yes > 0 && no > 0) || trials.iter().any(|t| t.marginal);
    cert.kernel_dim = trials.first().map(|t| t.kernel_dim);
    cert.trials = trials;
    cert
}

/// Randomized test for generic global rigidity with a flexible lattice.
pub fn generic_global_rigidity_test(g: &GainGraph, tol: &Tolerances) -> Result<Certificate> {
    tol.validate()?;
    let d = g.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(tol.rng_seed);
    let mut trials = Vec::with_capacity(tol.generic_trials);
    for _ in 0..tol.generic_trials {
        let r = random_realization_with(g, &mut rng, tol);
        let inf = is_infinitesimally_rigid(g, &r, tol)?;
        let basis = stress_space(g, &r, tol)?;
        let omega = random_combination(&basis, &mut rng);
        let lap = weighted_laplacians(g, &omega)?;
        let rank = numeric_rank_scaled(&lap.laplacian_zd, stress_scale(g, &omega), tol)?;
        let kernel_dim = rank.nullity(lap.laplacian_zd.ncols());
        let verdict = if inf && kernel_dim == d + 1 {
            Verdict::GenericGloballyRigid
        } else {
            Verdict::GenericNotGloballyRigid
        };
        trials.push(Trial {
            verdict,
            infinitesimally_rigid: Some(inf),
            stress_space_dim: basis.ncols(),
            kernel_dim,
            marginal: rank.marginal,
        });
    }
    let mut cert = aggregate(trials, Verdict::GenericGloballyRigid, Verdict::GenericNotGloballyRigid);
    cert.expected_kernel_dim = Some(d + 1);
    Ok(cert)
}

/// Randomized test for generic fixed-lattice global rigidity. With `lattice`
/// given only the points are sampled.
pub fn generic_fixed_global_rigidity_test(
    g: &GainGraph,
    lattice: Option<&DMatrix<f64>>,
    tol: &Tolerances,
) -> Result<Certificate> {
    tol.validate()?;
    if let Some(l) = lattice {
        let probe = Realization::new(DMatrix::zeros(g.dim(), 0), l.clone())?;
        probe.require_non_flat(tol)?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(tol.rng_seed);
    let mut trials = Vec::with_capacity(tol.generic_trials);
    for _ in 0..tol.generic_trials {
        let mut r = random_realization_with(g, &mut rng, tol);
        if let Some(l) = lattice {
            r.l = l.clone();
        }
        let basis = fixed_stress_space(g, &r, tol)?;
        let omega = random_combination(&basis, &mut rng);
        let lap = weighted_laplacians(g, &omega)?;
        let rank = numeric_rank_scaled(&lap.laplacian, stress_scale(g, &omega), tol)?;
        let kernel_dim = rank.nullity(lap.laplacian.ncols());
        let verdict = if kernel_dim == 1 {
            Verdict::FixedLatticeGenericGloballyRigid
        } else {
            Verdict::FixedLatticeGenericNotGloballyRigid
        };
        trials.push(Trial {
            verdict,
            infinitesimally_rigid: None,
            stress_space_dim: basis.ncols(),
            kernel_dim,
            marginal: rank.marginal,
        });
    }
    let mut cert = aggregate(
        trials,
        Verdict::FixedLatticeGenericGloballyRigid,
        Verdict::FixedLatticeGenericNotGloballyRigid,
    );
    cert.expected_kernel_dim = Some(1);
    Ok(cert)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::framework::measurement;

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    fn id2() -> Vec<Vec<f64>> {
        vec![vec![1.0, 0.0], vec![0.0, 1.0]]
    }

    fn flex1() -> (GainGraph, Realization) {
        let g = GainGraph::with_vertex_count(2, 1)
            .unwrap()
            .edge(0, 0, &[1, 0])
            .unwrap()
            .edge(0, 0, &[0, 1])
            .unwrap()
            .edge(0, 0, &[1, 1])
            .unwrap()
            .edge(0, 0, &[-1, 1])
            .unwrap();
        (g, Realization::from_points(&[vec![0.0, 0.0]], &id2()).unwrap())
    }

    fn flex2() -> (GainGraph, Realization) {
        let g = GainGraph::with_vertex_count(2, 2)
            .unwrap()
            .edge(0, 1, &[0, 0])
            .unwrap()
            .edge(0, 1, &[-1, 0])
            .unwrap()
            .edge(0, 0, &[0, 1])
            .unwrap()
            .edge(0, 0, &[1, 1])
            .unwrap()
            .edge(0, 0, &[-1, 1])
            .unwrap();
        (g, Realization::from_points(&[vec![0.0, 0.0], vec![0.5, 0.0]], &id2()).unwrap())
    }

    #[test]
    fn conic_examples() {
        let (g, r) = flex2();
        assert!(conic_at_infinity(&g, &r, &tol()).unwrap().is_none());
        let (g, r) = flex1();
        assert!(conic_at_infinity(&g, &r, &tol()).unwrap().is_none());
        let one = GainGraph::with_vertex_count(2, 2).unwrap().edge(0, 1, &[0, 0]).unwrap();
        let r = Realization::from_points(&[vec![0.0, 0.0], vec![1.0, 0.0]], &id2()).unwrap();
        let q = conic_at_infinity(&one, &r, &tol()).unwrap().unwrap();
        assert!(q[(0, 0)].abs() < 1e-12);
        assert!((q.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn conic_degenerate_edge() {
        let one = GainGraph::with_vertex_count(2, 2).unwrap().edge(0, 1, &[0, 0]).unwrap();
        let r = Realization::from_points(&[vec![1.0, 1.0], vec![1.0, 1.0]], &id2()).unwrap();
        assert!(matches!(conic_at_infinity(&one, &r, &tol()), Err(Error::DegenerateEdge { edge: 0 })));
    }

    #[test]
    fn conic_deformation_preserves_lengths() {
        let g = GainGraph::with_vertex_count(2, 2)
            .unwrap()
            .edge(0, 1, &[0, 0])
            .unwrap()
            .edge(0, 0, &[1, 0])
            .unwrap();
        let r = crate::framework::random_realization(&g, &tol());
        let q = conic_at_infinity(&g, &r, &tol()).unwrap().unwrap();
        let moved = conic_deformation(&r, &q, 0.3).unwrap();
        let diff = measurement(&g, &moved).unwrap() - measurement(&g, &r).unwrap();
        assert!(diff.amax() < 1e-12);
        assert!(crate::framework::congruence_check(&r, &moved, 1e-9).is_none());
    }

    #[test]
    fn flex2_super_stable() {
        let (g, r) = flex2();
        let w = [4.0, 4.0, 2.0, -1.0, -1.0];
        let c = certify_super_stable(&g, &r, &w, &tol()).unwrap();
        assert_eq!(c.verdict, Verdict::SuperStable, "{:?}", c.failed);
        assert_eq!(c.kernel_dim, Some(3));
        assert!(c.reverify(&g, &r, &tol()).unwrap());
    }

    #[test]
    fn flex1_super_stable() {
        let (g, r) = flex1();
        let c = certify_super_stable(&g, &r, &[-2.0, -2.0, 1.0, 1.0], &tol()).unwrap();
        assert_eq!(c.verdict, Verdict::SuperStable, "{:?}", c.failed);
    }

    #[test]
    fn failing_clauses_are_named() {
        let (g, r) = flex2();
        let c = certify_super_stable(&g, &r, &[1.0, 0.0, 0.0, 0.0, 0.0], &tol()).unwrap();
        assert_eq!(c.verdict, Verdict::Inconclusive);
        assert_eq!(c.failed[0], "equilibrium");
    }

    #[test]
    fn generic_flex1_three_loops() {
        let g = GainGraph::with_vertex_count(2, 1)
            .unwrap()
            .edge(0, 0, &[1, 0])
            .unwrap()
            .edge(0, 0, &[0, 1])
            .unwrap()
            .edge(0, 0, &[1, 1])
            .unwrap();
        let c = generic_global_rigidity_test(&g, &tol()).unwrap();
        assert_eq!(c.verdict, Verdict::GenericGloballyRigid);
        assert!(!c.marginal);
        assert_eq!(c.trials.len(), 3);
    }

    #[test]
    fn generic_flex2_not_rigid() {
        let (g, _) = flex2();
        let c = generic_global_rigidity_test(&g, &tol()).unwrap();
        assert_eq!(c.verdict, Verdict::GenericNotGloballyRigid);
        assert!(!c.marginal);
    }

    #[test]
    fn generic_fixed_single_edge() {
        let g = GainGraph::with_vertex_count(2, 2).unwrap().edge(0, 1, &[0, 0]).unwrap();
        let c = generic_fixed_global_rigidity_test(&g, None, &tol()).unwrap();
        assert_eq!(c.verdict, Verdict::FixedLatticeGenericNotGloballyRigid);
        let flat = DMatrix::zeros(2, 2);
        assert!(matches!(
            generic_fixed_global_rigidity_test(&g, Some(&flat), &tol()),
            Err(Error::FlatLattice { .. })
        ));
    }

    #[test]
    fn generic_fixed_rigid_example() {
        // two vertices joined by three edges with distinct gains plus a loop
        let g = GainGraph::with_vertex_count(2, 2)
            .unwrap()
            .edge(0, 1, &[0, 0])
            .unwrap()
            .edge(0, 1, &[1, 0])
            .unwrap()
            .edge(0, 1, &[0, 1])
            .unwrap()
            .edge(0, 1, &[1, 1])
            .unwrap();
        let c = generic_fixed_global_rigidity_test(&g, None, &tol()).unwrap();
        assert_eq!(c.verdict, Verdict::FixedLatticeGenericGloballyRigid);
        assert!(!c.marginal);
    }

    #[test]
    fn aggregate_majority() {
        let t = |v| Trial {
            verdict: v,
            infinitesimally_rigid: None,
            stress_space_dim: 0,
            kernel_dim: 0,
            marginal: false,
        };
        let c = aggregate(
            vec![t(Verdict::GenericGloballyRigid), t(Verdict::GenericNotGloballyRigid), t(Verdict::GenericGloballyRigid)],
            Verdict::GenericGloballyRigid,
            Verdict::GenericNotGloballyRigid,
        );
        assert_eq!(c.verdict, Verdict::GenericGloballyRigid);
        assert!(c.marginal);
    }
}
