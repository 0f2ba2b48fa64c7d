//! Numerical search for preimages of skew-symmetric targets under `X`.
//!
//! Whether every skew matrix is some `X(H) = JH + HᵀJ` is open. The search
//! minimizes `f(A) = ½‖X(H₀ exp A) − S‖²_F` over `A ∈ sp(2n)` with a
//! limited-memory quasi-Newton method and Armijo backtracking, restarting
//! from several base points `H₀`. Reports carry residuals only; a large
//! residual is evidence, never a proof of infeasibility.

use std::collections::VecDeque;

use nalgebra::DVector;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::io::matrix_rows;
use crate::linalg::expm_frechet;
use crate::symplectic::{
    j_matrix, sample_symplectic_with, seeded_rng, standard_j, witness_hk, RealMatrix, SampleSpec, SkewMatrix,
    SpAlgebraElement, SymplecticMatrix,
};
use crate::xmap::{xmap, xmap_rank};

pub const ARMIJO: f64 = 1e-4;
pub const SHRINK: f64 = 0.5;
pub const MEMORY: usize = 10;
/// Standard deviation of the random starting coordinates.
pub const START_SCALE: f64 = 0.5;
/// Residual at which a run stops early.
pub const CONVERGED_RESIDUAL: f64 = 1e-11;

#[derive(Debug, Clone)]
pub struct SearchProblem {
    pub n: usize,
    pub target: SkewMatrix,
    pub initial: SymplecticMatrix,
    /// Iterations per restart.
    pub budget: usize,
    pub restarts: usize,
    pub seed: u64,
}

impl SearchProblem {
    pub fn new(target: SkewMatrix, initial: SymplecticMatrix, budget: usize, restarts: usize, seed: u64) -> Result<Self> {
        let n = initial.n();
        if target.dim() != 2 * n {
            return Err(Error::DimensionMismatch { expected: 2 * n, found: target.dim() });
        }
        if restarts == 0 {
            return Err(Error::InvalidParameter("at least one restart is required".into()));
        }
        Ok(SearchProblem { n, target, initial, budget, restarts, seed })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RestartSummary {
    pub index: usize,
    pub start: String,
    pub initial_residual: f64,
    pub final_residual: f64,
    pub iterations: usize,
    pub gradient_norm: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SearchReport {
    pub best_residual: f64,
    #[serde(serialize_with = "serialize_symplectic")]
    pub best_h: SymplecticMatrix,
    /// Total iterations over all restarts that ran.
    pub iterations: usize,
    pub restarts: Vec<RestartSummary>,
    pub gradient_norm: f64,
}

fn serialize_symplectic<S: serde::Serializer>(h: &SymplecticMatrix, s: S) -> std::result::Result<S::Ok, S::Error> {
    matrix_rows(h.matrix()).serialize(s)
}

fn residual_matrix(h: &SymplecticMatrix, s: &SkewMatrix) -> RealMatrix {
    xmap(h).into_matrix() - s.matrix()
}

/// `½‖X(H₀ exp A) − S‖²_F`.
pub fn objective(a: &SpAlgebraElement, h0: &SymplecticMatrix, s: &SkewMatrix) -> f64 {
    let h = h0.compose(&a.exp());
    0.5 * residual_matrix(&h, s).norm_squared()
}

/// Value and matrix gradient of the objective in the trace inner product,
/// projected onto `sp(2n)`.
///
/// With `R = X(H) − S`, the gradient in `H` is `−2JR`; pulled back through
/// `H = H₀ E` it is `H₀ᵀ(−2JR)`, and through `E = exp A` it is the Fréchet
/// derivative `L(Aᵀ, ·)` of the exponential applied to that.
pub fn value_and_gradient(a: &SpAlgebraElement, h0: &SymplecticMatrix, s: &SkewMatrix) -> (f64, SpAlgebraElement) {
    let n = a.n();
    let e = a.exp();
    let h = h0.compose(&e);
    let r = residual_matrix(&h, s);
    let g_h = -(j_matrix(n) * &r) * 2.0;
    let g_e = h0.matrix().transpose() * g_h;
    let (_, g_a) = expm_frechet(&a.matrix().transpose(), &g_e);
    let grad = SpAlgebraElement::project(&g_a).expect("even dimension");
    (0.5 * r.norm_squared(), grad)
}

pub fn gradient(a: &SpAlgebraElement, h0: &SymplecticMatrix, s: &SkewMatrix) -> SpAlgebraElement {
    value_and_gradient(a, h0, s).1
}

/// Value and gradient with respect to the canonical algebra coordinates.
pub fn value_and_coord_gradient(n: usize, x: &DVector<f64>, h0: &SymplecticMatrix, s: &SkewMatrix) -> (f64, DVector<f64>) {
    let a = SpAlgebraElement::from_coords(n, x.as_slice());
    let (f, g) = value_and_gradient(&a, h0, s);
    (f, DVector::from_vec(SpAlgebraElement::coords_of_gradient(n, g.matrix())))
}

struct RunOutcome {
    coords: DVector<f64>,
    value: f64,
    gradient_norm: f64,
    iterations: usize,
}

/// Limited-memory BFGS with Armijo backtracking on the coordinates.
fn lbfgs(n: usize, x0: DVector<f64>, h0: &SymplecticMatrix, s: &SkewMatrix, budget: usize, stop_value: f64) -> RunOutcome {
    let mut x = x0;
    let (mut f, mut g) = value_and_coord_gradient(n, &x, h0, s);
    let mut memory: VecDeque<(DVector<f64>, DVector<f64>, f64)> = VecDeque::new();
    let mut iterations = 0;
    while iterations < budget && f.is_finite() && f > stop_value && g.norm() > 1e-300 {
        iterations += 1;
        let mut dir = two_loop(&g, &memory);
        if dir.dot(&g) >= 0.0 {
            memory.clear();
            dir = -&g;
        }
        let slope = dir.dot(&g);
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let trial = &x + &dir * step;
            let (ft, gt) = value_and_coord_gradient(n, &trial, h0, s);
            if ft.is_finite() && ft <= f + ARMIJO * step * slope {
                accepted = Some((trial, ft, gt));
                break;
            }
            step *= SHRINK;
        }
        let Some((xn, fnew, gn)) = accepted else {
            if memory.is_empty() {
                break;
            }
            memory.clear();
            continue;
        };
        let sk = &xn - &x;
        let yk = &gn - &g;
        let sy = sk.dot(&yk);
        if sy > 1e-12 * sk.norm() * yk.norm() {
            if memory.len() == MEMORY {
                memory.pop_front();
            }
            memory.push_back((sk, yk, 1.0 / sy));
        }
        x = xn;
        f = fnew;
        g = gn;
    }
    RunOutcome { gradient_norm: g.norm(), coords: x, value: f, iterations }
}

fn two_loop(g: &DVector<f64>, memory: &VecDeque<(DVector<f64>, DVector<f64>, f64)>) -> DVector<f64> {
    let mut q = g.clone();
    let mut alphas = Vec::with_capacity(memory.len());
    for (s, y, rho) in memory.iter().rev() {
        let alpha = rho * s.dot(&q);
        q -= y * alpha;
        alphas.push(alpha);
    }
    if let Some((s, y, _)) = memory.back() {
        q *= s.dot(y) / y.dot(y);
    }
    for ((s, y, rho), alpha) in memory.iter().zip(alphas.iter().rev()) {
        let beta = rho * y.dot(&q);
        q += s * (alpha - beta);
    }
    -q
}

/// Base point of restart `index`: the problem's `H₀` first, then `I`, `J`,
/// the rank witnesses `H_1..H_{n−1}`, then random samples.
fn restart_base<R: Rng>(problem: &SearchProblem, index: usize, rng: &mut R) -> (String, SymplecticMatrix) {
    let n = problem.n;
    let cycle = 3 + n.saturating_sub(1);
    match index {
        0 => ("initial".into(), problem.initial.clone()),
        1 => ("identity".into(), SymplecticMatrix::identity(n)),
        2 => ("J".into(), standard_j(n)),
        i if i < cycle => {
            let k = i - 2;
            (format!("witness_{k}"), witness_hk(n, k).expect("k < n"))
        }
        _ => {
            let h = sample_symplectic_with(n, rng, SampleSpec::Generic).expect("n > 0");
            ("random".into(), h)
        }
    }
}

/// Best-of-restarts search. Restarts are processed in order and stop early
/// once one of them reaches [`CONVERGED_RESIDUAL`] relative to `max(1, ‖S‖)`.
pub fn solve(problem: &SearchProblem) -> SearchReport {
    let n = problem.n;
    let dim = SpAlgebraElement::dimension(n);
    let mut rng = seeded_rng(problem.seed);
    let stop = CONVERGED_RESIDUAL * problem.target.matrix().norm().max(1.0);
    let stop_value = 0.5 * stop * stop;

    let mut summaries = Vec::new();
    let mut best: Option<(f64, SymplecticMatrix, f64)> = None;
    let mut total = 0;
    for index in 0..problem.restarts {
        let (label, h0) = restart_base(problem, index, &mut rng);
        let x0 = DVector::from_fn(dim, |_, _| START_SCALE * rng.sample::<f64, _>(StandardNormal));
        let initial_residual = (2.0 * value_and_coord_gradient(n, &x0, &h0, &problem.target).0).sqrt();
        let run = lbfgs(n, x0, &h0, &problem.target, problem.budget, stop_value);
        total += run.iterations;
        let h = h0.compose(&SpAlgebraElement::from_coords(n, run.coords.as_slice()).exp());
        // Recomputed from the final H so the reported number matches it exactly.
        let residual = residual_matrix(&h, &problem.target).norm();
        let residual = if run.value.is_finite() { residual } else { f64::INFINITY };
        summaries.push(RestartSummary {
            index,
            start: label,
            initial_residual,
            final_residual: residual,
            iterations: run.iterations,
            gradient_norm: run.gradient_norm,
        });
        if best.as_ref().is_none_or(|(r, _, _)| residual < *r) {
            best = Some((residual, h, run.gradient_norm));
        }
        if residual <= stop {
            break;
        }
    }
    let (best_residual, best_h, gradient_norm) = best.expect("at least one restart");
    SearchReport { best_residual, best_h, iterations: total, restarts: summaries, gradient_norm }
}

/// `X` of a random generic sample, so the target is known to be attainable.
pub fn planted_target(n: usize, seed: u64) -> Result<(SkewMatrix, SymplecticMatrix)> {
    let mut rng = seeded_rng(seed ^ 0x9e37_79b9_7f4a_7c15);
    let h = sample_symplectic_with(n, &mut rng, SampleSpec::Generic)?;
    Ok((xmap(&h), h))
}

/// Which matrices [`rank_scan`] draws.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanMix {
    /// Witnesses `H_0..H_n` first, then generic, singular-`B` and mixed samples in turn.
    Mixed,
    Generic,
    Witnesses,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RankHistogram {
    pub n: usize,
    pub samples: usize,
    pub seed: u64,
    pub mix: ScanMix,
    /// `counts[r]` is the number of samples with `rank X(H) = r`.
    pub counts: Vec<usize>,
}

pub fn rank_scan(n: usize, samples: usize, seed: u64, mix: ScanMix) -> Result<RankHistogram> {
    if samples == 0 || n == 0 {
        return Err(Error::InvalidParameter("rank scan needs n >= 1 and samples >= 1".into()));
    }
    let mut rng = seeded_rng(seed);
    let mut counts = vec![0; 2 * n + 1];
    for i in 0..samples {
        let spec = match mix {
            ScanMix::Witnesses => SampleSpec::Witness { k: i % (n + 1) },
            ScanMix::Generic => SampleSpec::Generic,
            ScanMix::Mixed if i <= n => SampleSpec::Witness { k: i },
            ScanMix::Mixed => match i % 3 {
                0 => SampleSpec::Generic,
                1 => SampleSpec::SingularB { rank: rng.random_range(0..=n) },
                _ => SampleSpec::MixedSingularB { rank: rng.random_range(0..=n) },
            },
        };
        let h = sample_symplectic_with(n, &mut rng, spec)?;
        counts[xmap_rank(&h)] += 1;
    }
    Ok(RankHistogram { n, samples, seed, mix, counts })
}

#[derive(Debug, Clone, Serialize)]
pub struct TargetResult {
    /// For `n = 1` the target is `sJ` and this is `s`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s: Option<f64>,
    #[serde(rename = "S")]
    pub target: Vec<Vec<f64>>,
    pub best_residual: f64,
    #[serde(rename = "H_best")]
    pub h_best: Vec<Vec<f64>>,
    pub iters: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepAggregate {
    pub count: usize,
    pub min_residual: f64,
    pub median_residual: f64,
    pub max_residual: f64,
    pub mean_residual: f64,
    pub below_1e_6: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepReport {
    pub n: usize,
    pub seed: u64,
    pub restarts: usize,
    pub budget: usize,
    pub targets: Vec<TargetResult>,
    pub aggregate: SweepAggregate,
}

/// Runs [`solve`] on a family of targets. For `n = 1` the space of targets
/// is the line `sJ`, swept over `s ∈ [−4, 4]`; otherwise targets are random
/// skew matrices of unit Frobenius norm.
pub fn image_evidence_sweep(n: usize, targets: usize, seed: u64, restarts: usize, budget: usize) -> Result<SweepReport> {
    if n == 0 || n > 3 {
        return Err(Error::InvalidParameter(format!("sweep supports 1 <= n <= 3, got {n}")));
    }
    let mut rng = seeded_rng(seed);
    let mut results = Vec::with_capacity(targets);
    for i in 0..targets {
        let (s, target) = if n == 1 {
            let s = if targets == 1 { 0.0 } else { -4.0 + 8.0 * i as f64 / (targets - 1) as f64 };
            (Some(s), SkewMatrix::from_matrix(&(j_matrix(1) * s))?)
        } else {
            (None, SkewMatrix::random_unit(2 * n, &mut rng))
        };
        let problem = SearchProblem::new(target.clone(), SymplecticMatrix::identity(n), budget, restarts, seed.wrapping_add(i as u64))?;
        let report = solve(&problem);
        results.push(TargetResult {
            s,
            target: matrix_rows(target.matrix()),
            best_residual: report.best_residual,
            h_best: matrix_rows(report.best_h.matrix()),
            iters: report.iterations,
        });
    }
    let mut sorted: Vec<f64> = results.iter().map(|r| r.best_residual).collect();
    sorted.sort_by(f64::total_cmp);
    let count = sorted.len();
    let aggregate = SweepAggregate {
        count,
        min_residual: sorted.first().copied().unwrap_or(0.0),
        median_residual: if count == 0 { 0.0 } else { sorted[count / 2] },
        max_residual: sorted.last().copied().unwrap_or(0.0),
        mean_residual: if count == 0 { 0.0 } else { sorted.iter().sum::<f64>() / count as f64 },
        below_1e_6: sorted.iter().filter(|&&r| r < 1e-6).count(),
    };
    Ok(SweepReport { n, seed, restarts, budget, targets: results, aggregate })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symplectic::{is_symplectic, sample_symplectic, sp_inverse};

    #[test]
    fn objective_values() {
        let h0 = sample_symplectic(2, 3, SampleSpec::Generic).unwrap();
        assert!(objective(&SpAlgebraElement::zero(2), &h0, &xmap(&h0)) < 1e-20);
        for n in 1..4 {
            let f = objective(&SpAlgebraElement::zero(n), &SymplecticMatrix::identity(n), &SkewMatrix::zeros(2 * n));
            assert!((f - 4.0 * n as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn gradient_matches_central_differences() {
        let mut rng = seeded_rng(8);
        for n in 1..=3 {
            let h0 = sample_symplectic(n, n as u64, SampleSpec::Generic).unwrap();
            let s = SkewMatrix::random_unit(2 * n, &mut rng);
            let dim = SpAlgebraElement::dimension(n);
            let x = DVector::from_fn(dim, |_, _| 0.3 * rng.sample::<f64, _>(StandardNormal));
            let (_, g) = value_and_coord_gradient(n, &x, &h0, &s);
            let eps = 1e-6;
            let fd = DVector::from_fn(dim, |i, _| {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[i] += eps;
                xm[i] -= eps;
                (value_and_coord_gradient(n, &xp, &h0, &s).0 - value_and_coord_gradient(n, &xm, &h0, &s).0) / (2.0 * eps)
            });
            assert!((&g - &fd).norm() < 1e-6 * g.norm().max(1.0), "n = {n}");
        }
    }

    #[test]
    fn gradient_is_in_algebra_and_vanishes_at_minimum() {
        let h0 = sample_symplectic(2, 1, SampleSpec::Generic).unwrap();
        let a = SpAlgebraElement::from_coords(2, &[0.1, -0.2, 0.3, 0.0, 0.5, 0.1, -0.4, 0.2, 0.0, 0.3]);
        let s = SkewMatrix::random_unit(4, &mut seeded_rng(2));
        assert!(gradient(&a, &h0, &s).algebra_residual() < 1e-10);
        let g = gradient(&SpAlgebraElement::zero(2), &h0, &xmap(&h0));
        assert!(g.matrix().amax() < 1e-12);
    }

    #[test]
    fn solve_example_targets() {
        let zero = SearchProblem::new(SkewMatrix::zeros(2), SymplecticMatrix::identity(1), 500, 4, 1).unwrap();
        assert!(solve(&zero).best_residual < 1e-9);
        let two_j = SkewMatrix::from_matrix(&(j_matrix(2) * 2.0)).unwrap();
        let p = SearchProblem::new(two_j, SymplecticMatrix::identity(2), 500, 4, 1).unwrap();
        assert!(solve(&p).best_residual < 1e-9);
    }

    #[test]
    fn planted_n2_recovery_and_report_invariants() {
        let mut hits = 0;
        for seed in 0..10 {
            let (s, _) = planted_target(2, seed).unwrap();
            let report = solve(&SearchProblem::new(s.clone(), SymplecticMatrix::identity(2), 500, 8, seed).unwrap());
            if report.best_residual < 1e-6 {
                hits += 1;
            }
            assert!(is_symplectic(report.best_h.matrix(), 1e-9).unwrap().symplectic);
            let inv = (xmap(&sp_inverse(&report.best_h)).into_matrix() - s.matrix()).norm();
            assert!((inv - report.best_residual).abs() < 1e-9 * s.matrix().norm().max(1.0));
            let min = report.restarts.iter().map(|r| r.final_residual).fold(f64::INFINITY, f64::min);
            assert_eq!(min, report.best_residual);
        }
        assert!(hits >= 9, "{hits}/10");
    }

    #[test]
    fn solve_is_deterministic() {
        let (s, _) = planted_target(2, 4).unwrap();
        let p = SearchProblem::new(s, SymplecticMatrix::identity(2), 50, 2, 7).unwrap();
        let a = serde_json::to_string(&solve(&p)).unwrap();
        let b = serde_json::to_string(&solve(&p)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rank_scan_histograms() {
        let w = rank_scan(3, 8, 0, ScanMix::Witnesses).unwrap();
        assert!(w.counts.iter().step_by(2).all(|&c| c > 0));
        assert!(w.counts.iter().skip(1).step_by(2).all(|&c| c == 0));
        let g = rank_scan(2, 200, 1, ScanMix::Generic).unwrap();
        assert_eq!(g.counts.iter().sum::<usize>(), 200);
        assert!(g.counts[4] > 150);
        let m = rank_scan(3, 60, 2, ScanMix::Mixed).unwrap();
        assert_eq!(m.counts.iter().sum::<usize>(), 60);
        assert!(m.counts.iter().step_by(2).all(|&c| c > 0));
    }

    #[test]
    fn sweep_n1_reaches_trace_targets() {
        let r = image_evidence_sweep(1, 9, 3, 4, 200).unwrap();
        assert_eq!(r.aggregate.count, 9);
        // X(H) = tr(H) J for n = 1, and every real trace occurs in SL(2).
        assert_eq!(r.aggregate.below_1e_6, 9);
        let again = image_evidence_sweep(1, 9, 3, 4, 200).unwrap();
        assert_eq!(serde_json::to_string(&r).unwrap(), serde_json::to_string(&again).unwrap());
    }
}
