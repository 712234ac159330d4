//! Stress energy, the unit-volume energy minimization and its KKT checks.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::certify::{Certificate, Verdict};
use crate::error::{Error, Result};
use crate::framework::{measurement, rigidity_matrix, Realization};
use crate::gain_graph::GainGraph;
use crate::linalg::{inv_sqrt_spd, max_abs, nullspace, numeric_rank_scaled, psd_check, Side, Tolerances};
use crate::stress::{check_proper, stress_scale, verify_equilibrium, weighted_laplacians, EquilibriumMode};

fn lap_kron(lap: &DMatrix<f64>, d: usize) -> DMatrix<f64> {
    lap.kronecker(&DMatrix::<f64>::identity(d, d))
}

fn mismatch(a: f64, b: f64, tol: &Tolerances, scale: f64) -> Result<()> {
    if (a - b).abs() > tol.residual_tol * scale.max(1.0) {
        return Err(Error::FormMismatch { a, b });
    }
    Ok(())
}

/// `½ ωᵀ f_G(p, L)`, cross-checked against `½ xᵀ(𝓛_{ℤᵈ} ⊗ I_d)x`.
pub fn energy(g: &GainGraph, omega: &[f64], r: &Realization, tol: &Tolerances) -> Result<f64> {
    let lap = weighted_laplacians(g, omega)?;
    let f = measurement(g, r)?;
    let a = 0.5 * omega.iter().zip(f.iter()).map(|(w, x)| w * x).sum::<f64>();
    let x = r.vector_rep();
    let b = 0.5 * x.dot(&(lap_kron(&lap.laplacian_zd, g.dim()) * &x));
    let scale: f64 = omega.iter().zip(f.iter()).map(|(w, x)| (w * x).abs()).sum();
    mismatch(a, b, tol, scale)?;
    Ok(a)
}

/// `ωᵀR(G,p,L)`, cross-checked against `(𝓛_{ℤᵈ} ⊗ I_d)x`.
pub fn energy_gradient(g: &GainGraph, omega: &[f64], r: &Realization, tol: &Tolerances) -> Result<DVector<f64>> {
    let lap = weighted_laplacians(g, omega)?;
    let w = DVector::from_column_slice(omega);
    let a = rigidity_matrix(g, r)?.transpose() * w;
    let b = lap_kron(&lap.laplacian_zd, g.dim()) * r.vector_rep();
    let diff = (&a - &b).amax();
    let scale = a.amax().max(b.amax());
    if diff > tol.residual_tol * scale.max(1.0) {
        return Err(Error::FormMismatch {
            a: a.amax(),
            b: b.amax(),
        });
    }
    Ok(a)
}

/// KKT residuals of the unit-volume problem at `(p, L, λ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KktReport {
    pub lambda: f64,
    pub stationarity_residual: f64,
    pub volume: f64,
    pub complementary_slackness_residual: f64,
    pub gram_residual: f64,
    pub energy: f64,
    pub pass: bool,
}

/// Evaluates `[P L]𝓛 = λ[0 L^{-T}]`, `λ log|det L| = 0`, `λ >= 0` and
/// `[P L]𝓛[P L]ᵀ = λI`.
pub fn verify_kkt(g: &GainGraph, omega: &[f64], r: &Realization, lambda: f64, tol: &Tolerances) -> Result<KktReport> {
    r.require_non_flat(tol)?;
    let n = g.num_vertices();
    let d = g.dim();
    let lap = weighted_laplacians(g, omega)?.laplacian_zd;
    let x = r.matrix_rep();
    let inv_t = r
        .l
        .clone()
        .try_inverse()
        .ok_or(Error::FlatLattice { det: r.det() })?
        .transpose();
    let mut target = DMatrix::zeros(d, n + d);
    target.columns_mut(n, d).copy_from(&(inv_t * lambda));
    let xl = &x * &lap;
    let stationarity_residual = max_abs(&(&xl - target));
    let volume = r.det().abs();
    let complementary_slackness_residual = (lambda * volume.ln()).abs();
    let gram = &xl * x.transpose();
    let gram_residual = max_abs(&(&gram - DMatrix::identity(d, d) * lambda));
    let energy = 0.5 * gram.trace();
    let scale = (max_abs(&x).powi(2) * max_abs(&lap) * (n + d) as f64).max(1.0);
    let limit = tol.residual_tol * scale;
    let pass = stationarity_residual <= limit
        && complementary_slackness_residual <= tol.residual_tol.max(limit)
        && gram_residual <= limit
        && lambda >= -tol.residual_tol
        && (lambda <= tol.residual_tol || (volume - 1.0).abs() <= tol.residual_tol.max(limit));
    Ok(KktReport {
        lambda,
        stationarity_residual,
        volume,
        complementary_slackness_residual,
        gram_residual,
        energy,
        pass,
    })
}

/// The unit-volume minimizer of the stress energy, built from the kernel of the
/// vertex columns of `𝓛_{ℤᵈ}(G,ω)`. Requires `𝓛_{ℤᵈ}` PSD with nullity one.
///
/// The kernel basis is mixed by a random invertible matrix drawn from
/// `tol.rng_seed`; the output is unique up to isometry regardless.
pub fn standard_realization(g: &GainGraph, omega: &[f64], tol: &Tolerances) -> Result<(Realization, KktReport)> {
    let n = g.num_vertices();
    let d = g.dim();
    let lap = weighted_laplacians(g, omega)?.laplacian_zd;
    let nullity = numeric_rank_scaled(&lap, stress_scale(g, omega), tol)?.nullity(n + d);
    if nullity != 1 {
        return Err(Error::HypothesisFailed(format!("stress matrix has nullity {nullity}, not 1")));
    }
    if !psd_check(&lap, tol)?.is_psd {
        return Err(Error::HypothesisFailed("stress matrix is not positive semidefinite".into()));
    }

    let omega_l = lap.columns(0, n).into_owned();
    let kernel = nullspace(&omega_l, Side::Left, tol)?;
    if kernel.ncols() != d + 1 {
        return Err(Error::DegenerateKernel(format!(
            "left kernel of the vertex block has dimension {}, expected {}",
            kernel.ncols(),
            d + 1
        )));
    }
    // remove the 1̂ direction and keep an orthonormal d-dimensional complement
    let mut one = DVector::zeros(n + d);
    one.rows_mut(0, n).fill(1.0 / (n as f64).sqrt());
    let projected = &kernel - &one * (one.transpose() * &kernel);
    let svd = projected.svd(true, false);
    let u = svd.u.expect("u");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let top = svd.singular_values[order[0]];
    if order.len() < d || svd.singular_values[order[d - 1]] <= tol.rank_rel_tol * top.max(1.0) {
        return Err(Error::DegenerateKernel("kernel does not contain d directions besides the translations".into()));
    }
    let mut b = DMatrix::zeros(d, n + d);
    for (row, &i) in order.iter().take(d).enumerate() {
        b.row_mut(row).copy_from(&u.column(i).transpose());
    }

    let mut rng = ChaCha8Rng::seed_from_u64(tol.rng_seed);
    let mix = loop {
        let m: DMatrix<f64> = DMatrix::from_fn(d, d, |_, _| rng.random_range(-1.0..1.0));
        if m.determinant().abs() > 0.1 {
            break m;
        }
    };
    let mut b = mix * b;
    let p0 = b.column(0).into_owned();
    for v in 0..n {
        let mut c = b.column_mut(v);
        c -= &p0;
    }

    let s = &b * &lap * b.transpose();
    let w = inv_sqrt_spd(&s, tol.residual_tol).ok_or_else(|| {
        Error::DegenerateKernel("B 𝓛 Bᵀ is not positive definite".into())
    })?;
    let x = w * b;
    let r = Realization::from_matrix_rep(&x)?;
    let det = r.det().abs();
    if det <= tol.residual_tol {
        return Err(Error::DegenerateKernel(format!("lattice is singular (|det L| = {det:.3e})")));
    }
    let c = det.powf(-1.0 / d as f64);
    let r = r.scaled(c);
    let lambda = c * c;
    let report = verify_kkt(g, omega, &r, lambda, tol)?;
    Ok((r, report))
}

/// Certificate for global rigidity among realizations of unit volume or more.
pub fn certify_volume_constrained(
    g: &GainGraph,
    r: &Realization,
    omega: &[f64],
    lambda: f64,
    tol: &Tolerances,
) -> Result<Certificate> {
    let volume = r.det().abs();
    if (volume - 1.0).abs() > tol.residual_tol {
        return Err(Error::VolumeNotOne { volume });
    }
    check_proper(g, omega, tol)?;
    let eq = verify_equilibrium(g, r, omega, EquilibriumMode::Volume(lambda), tol)?;
    let lap = weighted_laplacians(g, omega)?.laplacian_zd;
    let rank = numeric_rank_scaled(&lap, stress_scale(g, omega), tol)?;
    let kernel_dim = rank.nullity(lap.ncols());
    let psd = psd_check(&lap, tol)?;

    let mut failed = Vec::new();
    if lambda <= tol.residual_tol {
        failed.push("λ > 0".to_string());
    }
    if !eq.pass {
        failed.push("λ-equilibrium".into());
    }
    if kernel_dim != 1 {
        failed.push(format!("kernel dimension {kernel_dim} != 1"));
    }
    if !psd.is_psd {
        failed.push("positive semidefinite".into());
    }
    Ok(Certificate {
        verdict: if failed.is_empty() {
            Verdict::VolumeSuperStable
        } else {
            Verdict::Inconclusive
        },
        failed,
        stress: Some(omega.to_vec()),
        lambda: Some(lambda),
        kernel_dim: Some(kernel_dim),
        expected_kernel_dim: Some(1),
        min_eigenvalue: Some(psd.min_eigenvalue),
        residual: Some(eq.residual),
        conic_witness: None,
        marginal: rank.marginal,
        trials: Vec::new(),
    })
}

/// Scale-invariant objective `E / |det L|^{2/d}` and its gradient.
fn ratio_and_gradient(g: &GainGraph, r: &Realization, kron: &DMatrix<f64>) -> Option<(f64, DVector<f64>)> {
    let d = g.dim();
    let n = g.num_vertices();
    let det = r.det().abs();
    let inv_t = r.l.clone().try_inverse()?.transpose();
    let x = r.vector_rep();
    let grad_e = kron * &x;
    let e = 0.5 * x.dot(&grad_e);
    let dpow = det.powf(2.0 / d as f64);
    let mut grad = grad_e;
    for (k, v) in inv_t.iter().enumerate() {
        grad[d * n + k] -= e * (2.0 / d as f64) * v;
    }
    Some((e / dpow, grad / dpow))
}

/// Validation-only refiner: backtracking gradient descent on `E / |det L|^{2/d}`
/// from `start`, returned rescaled to `|det L| = 1` with its energy.
pub fn refine_by_descent(
    g: &GainGraph,
    omega: &[f64],
    start: &Realization,
    max_steps: usize,
    tol: &Tolerances,
) -> Result<(Realization, f64)> {
    start.require_non_flat(tol)?;
    let lap = weighted_laplacians(g, omega)?.laplacian_zd;
    let kron = lap_kron(&lap, g.dim());
    let d = g.dim();
    let mut r = start.scaled(start.det().abs().powf(-1.0 / d as f64));
    let mut step = 1.0;
    let (mut f, mut grad) =
        ratio_and_gradient(g, &r, &kron).ok_or(Error::FlatLattice { det: r.det() })?;
    for _ in 0..max_steps {
        if grad.amax() <= tol.residual_tol {
            break;
        }
        let x = r.vector_rep();
        let mut accepted = false;
        while step > 1e-16 {
            let cand = Realization::from_vector_rep(&(&x - &grad * step), d)?;
            if let Some((fc, gc)) = ratio_and_gradient(g, &cand, &kron) {
                if fc <= f - 1e-4 * step * grad.norm_squared() {
                    r = cand.scaled(cand.det().abs().powf(-1.0 / d as f64));
                    let (fr, gr) = ratio_and_gradient(g, &r, &kron).unwrap_or((fc, gc));
                    f = fr;
                    grad = gr;
                    step *= 2.0;
                    accepted = true;
                    break;
                }
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    Ok((r, f))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gain_graph::Marking;

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    fn flex2() -> (GainGraph, Realization, Vec<f64>) {
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
        let r = Realization::from_points(&[vec![0.0, 0.0], vec![0.5, 0.0]], &[vec![1.0, 0.0], vec![0.0, 1.0]])
            .unwrap();
        (g, r, vec![4.0, 4.0, 2.0, -1.0, -1.0])
    }

    fn hex_graph() -> GainGraph {
        let mut g = GainGraph::with_vertex_count(2, 6).unwrap();
        for i in 0..6 {
            g.add_edge(i, (i + 1) % 6, vec![0, 0], Marking::Bar).unwrap();
        }
        g.add_edge(0, 3, vec![1, 0], Marking::Bar).unwrap();
        g.add_edge(1, 4, vec![0, 1], Marking::Bar).unwrap();
        g.add_edge(2, 5, vec![-1, 1], Marking::Bar).unwrap();
        g
    }

    #[test]
    fn energy_examples() {
        let (g, r, w) = flex2();
        assert!(energy(&g, &w, &r, &tol()).unwrap().abs() < 1e-15);
        assert_eq!(energy(&g, &[0.0; 5], &r, &tol()).unwrap(), 0.0);
        let w2 = [1.0, 2.0, 0.5, 0.0, 3.0];
        let e1 = energy(&g, &w2, &r, &tol()).unwrap();
        let e3 = energy(&g, &w2, &r.scaled(3.0), &tol()).unwrap();
        assert!((e3 - 9.0 * e1).abs() < 1e-12);
    }

    #[test]
    fn gradient_vanishes_at_equilibrium() {
        let (g, r, w) = flex2();
        assert!(energy_gradient(&g, &w, &r, &tol()).unwrap().amax() < 1e-14);
        assert_eq!(energy_gradient(&g, &[0.0; 5], &r, &tol()).unwrap().amax(), 0.0);
    }

    #[test]
    fn hex_standard_realization() {
        let g = hex_graph();
        let w = [1.0; 9];
        let (r, rep) = standard_realization(&g, &w, &tol()).unwrap();
        assert!(rep.pass, "{rep:?}");
        assert!((rep.volume - 1.0).abs() < 1e-9);
        assert!(rep.lambda > 0.0);
        let (r2, _) = standard_realization(&g, &w, &tol().with_seed(7)).unwrap();
        assert!(crate::framework::congruence_check(&r, &r2, 1e-6).is_some());
        // rim edges of the honeycomb all have the same length
        let f = measurement(&g, &r).unwrap();
        assert!(f.iter().all(|x| (x - f[0]).abs() < 1e-9));
    }

    #[test]
    fn standard_realization_refuses_flex2() {
        let (g, _, w) = flex2();
        assert!(matches!(standard_realization(&g, &w, &tol()), Err(Error::HypothesisFailed(_))));
    }

    #[test]
    fn kkt_perturbations_fail() {
        let g = hex_graph();
        let w = [1.0; 9];
        let (r, rep) = standard_realization(&g, &w, &tol()).unwrap();
        let bumped = verify_kkt(&g, &w, &r, rep.lambda + 0.1, &tol()).unwrap();
        assert!(!bumped.pass);
        assert!(bumped.stationarity_residual > 1e-3);
        let doubled = verify_kkt(&g, &w, &r.scaled(2.0), rep.lambda, &tol()).unwrap();
        assert!(doubled.complementary_slackness_residual > 1e-3);
    }

    #[test]
    fn volume_certificate() {
        let g = hex_graph();
        let w = [1.0; 9];
        let (r, rep) = standard_realization(&g, &w, &tol()).unwrap();
        let c = certify_volume_constrained(&g, &r, &w, rep.lambda, &tol()).unwrap();
        assert_eq!(c.verdict, Verdict::VolumeSuperStable, "{:?}", c.failed);
        let c0 = certify_volume_constrained(&g, &r, &w, 0.0, &tol()).unwrap();
        assert_eq!(c0.verdict, Verdict::Inconclusive);
        assert_eq!(c0.failed[0], "λ > 0");
        assert!(matches!(
            certify_volume_constrained(&g, &r.scaled(2.0), &w, rep.lambda, &tol()),
            Err(Error::VolumeNotOne { .. })
        ));
    }

    #[test]
    fn descent_reaches_standard_energy() {
        let g = hex_graph();
        let w = [1.0; 9];
        let (_, rep) = standard_realization(&g, &w, &tol()).unwrap();
        let start = crate::framework::random_realization(&g, &tol());
        let (r, f) = refine_by_descent(&g, &w, &start, 20_000, &tol()).unwrap();
        assert!((r.det().abs() - 1.0).abs() < 1e-9);
        assert!((f - rep.energy).abs() < 1e-6, "{f} vs {}", rep.energy);
    }
}
