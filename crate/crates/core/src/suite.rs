//! The acceptance checks as library functions.
//!
//! Each check draws its cases from a seeded generator, records the worst
//! value of its metric, and compares it against a tolerance that callers
//! may override. Reports serialize byte-identically for identical
//! configurations; wall-clock times are kept out of the serialized form.

use std::time::{Duration, Instant};

use nalgebra::DVector;
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::explorer::{image_evidence_sweep, planted_target, solve, value_and_coord_gradient, SearchProblem};
use crate::genfun::{
    build_genfun, build_genfun_general, graph_from_phi, phi_eval, phi_grad, random_vector, restriction_identity_check,
    reverse_inclusion_check, GeneratingFunction,
};
use crate::metaplectic::{
    admissible_shift, composition_check, grid_quantize, quantize_gaussian, quantize_general, shift_coherence,
    ComplexMatrix, GaussianState, GridField,
};
use crate::symplectic::{
    assemble_blocks, j_matrix, random_algebra_element, sample_symplectic_with, seeded_rng, standard_j,
    witness_hk, RealMatrix, SampleSpec, SkewMatrix, SpAlgebraElement, SymplecticMatrix,
};
use crate::xmap::{
    canonical_rep, conjugation_covariance_check, distance_of_minus_one_to_spectrum_of_square, pi_sp,
    rotation_example_check, xmap, xmap_kernel, xmap_rank,
};

/// Contract values; every field can be tightened or loosened by callers.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Tolerances {
    pub graph: f64,
    pub restriction: f64,
    pub xmap_identity: f64,
    pub conjugation: f64,
    pub kernel_angle: f64,
    pub examples: f64,
    pub quotient: f64,
    pub planted_residual: f64,
    pub planted_fraction: f64,
    pub phase_rank_ratio: f64,
    pub grid: f64,
    pub unitarity: f64,
    pub composition: f64,
    pub shift: f64,
    pub gradient: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            graph: 1e-8,
            restriction: 1e-8,
            xmap_identity: 1e-10,
            conjugation: 1e-9,
            kernel_angle: 1e-6,
            examples: 1e-12,
            quotient: 1e-12,
            planted_residual: 1e-6,
            planted_fraction: 0.9,
            phase_rank_ratio: 1e-8,
            grid: 1e-3,
            unitarity: 1e-6,
            composition: 1e-6,
            shift: 1e-8,
            gradient: 1e-6,
        }
    }
}

impl Tolerances {
    /// Sets a field by name, e.g. `("restriction", 1e-14)`.
    pub fn set(&mut self, name: &str, value: f64) -> std::result::Result<(), String> {
        if !(value > 0.0 && value.is_finite()) {
            return Err(format!("tolerance {name} must be positive, got {value}"));
        }
        let slot = match name {
            "graph" => &mut self.graph,
            "restriction" => &mut self.restriction,
            "xmap_identity" => &mut self.xmap_identity,
            "conjugation" => &mut self.conjugation,
            "kernel_angle" => &mut self.kernel_angle,
            "examples" => &mut self.examples,
            "quotient" => &mut self.quotient,
            "planted_residual" => &mut self.planted_residual,
            "planted_fraction" => &mut self.planted_fraction,
            "phase_rank_ratio" => &mut self.phase_rank_ratio,
            "grid" => &mut self.grid,
            "unitarity" => &mut self.unitarity,
            "composition" => &mut self.composition,
            "shift" => &mut self.shift,
            "gradient" => &mut self.gradient,
            _ => return Err(format!("unknown tolerance {name}")),
        };
        *slot = value;
        Ok(())
    }
}

/// Case counts. [`Counts::full`] matches the acceptance contract.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Counts {
    pub graph_per_class: usize,
    pub graph_points: usize,
    pub restriction_matrices: usize,
    pub restriction_pairs: usize,
    pub xmap_samples: usize,
    pub quotient_shifts: usize,
    pub quotient_samples: usize,
    pub planted_targets: usize,
    pub planted_restarts: usize,
    pub planted_budget: usize,
    pub sweep_targets: usize,
    pub phase_samples: usize,
    pub grid_cases: usize,
    pub unitarity_cases: usize,
    pub composition_pairs: usize,
    pub shift_cases: usize,
    pub gradient_points: usize,
}

impl Counts {
    pub fn full() -> Self {
        Counts {
            graph_per_class: 200,
            graph_points: 3,
            restriction_matrices: 100,
            restriction_pairs: 500,
            xmap_samples: 200,
            quotient_shifts: 100,
            quotient_samples: 200,
            planted_targets: 50,
            planted_restarts: 8,
            planted_budget: 500,
            sweep_targets: 100,
            phase_samples: 200,
            grid_cases: 20,
            unitarity_cases: 100,
            composition_pairs: 50,
            shift_cases: 20,
            gradient_points: 100,
        }
    }

    /// Roughly a tenth of the work, for smoke runs.
    pub fn quick() -> Self {
        Counts {
            graph_per_class: 10,
            graph_points: 2,
            restriction_matrices: 10,
            restriction_pairs: 50,
            xmap_samples: 20,
            quotient_shifts: 10,
            quotient_samples: 20,
            planted_targets: 5,
            planted_restarts: 8,
            planted_budget: 500,
            sweep_targets: 10,
            phase_samples: 20,
            grid_cases: 3,
            unitarity_cases: 10,
            composition_pairs: 5,
            shift_cases: 3,
            gradient_points: 10,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SuiteConfig {
    pub seed: u64,
    pub counts: Counts,
    pub tolerances: Tolerances,
}

impl SuiteConfig {
    pub fn full(seed: u64) -> Self {
        SuiteConfig { seed, counts: Counts::full(), tolerances: Tolerances::default() }
    }

    pub fn quick(seed: u64) -> Self {
        SuiteConfig { seed, counts: Counts::quick(), tolerances: Tolerances::default() }
    }

    fn rng(&self, salt: u64) -> ChaCha8Rng {
        seeded_rng(self.seed.wrapping_mul(0x1000_0000_01b3).wrapping_add(salt))
    }
}

/// Outcome of one acceptance criterion.
#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub id: u32,
    pub name: String,
    pub passed: bool,
    /// `(label, worst value, tolerance)` per sub-check; a sub-check passes
    /// when the value is below the tolerance unless the label says "at least".
    pub metrics: Vec<Metric>,
    pub cases: usize,
    /// Problems encountered while running (construction failures and so on).
    pub notes: Vec<String>,
    #[serde(skip)]
    pub runtime: Duration,
}

#[derive(Debug, Clone, Serialize)]
pub struct Metric {
    pub label: String,
    pub value: f64,
    pub tolerance: f64,
    pub at_least: bool,
    pub passed: bool,
}

impl Metric {
    fn below(label: &str, value: f64, tolerance: f64) -> Self {
        Metric { label: label.into(), value, tolerance, at_least: false, passed: value < tolerance }
    }

    fn at_least(label: &str, value: f64, tolerance: f64) -> Self {
        Metric { label: label.into(), value, tolerance, at_least: true, passed: value >= tolerance }
    }

    fn flag(label: &str, ok: bool) -> Self {
        Metric { label: label.into(), value: if ok { 1.0 } else { 0.0 }, tolerance: 1.0, at_least: true, passed: ok }
    }
}

impl CheckResult {
    fn new(id: u32, name: &str, metrics: Vec<Metric>, cases: usize, notes: Vec<String>, start: Instant) -> Self {
        let passed = notes.is_empty() && metrics.iter().all(|m| m.passed);
        CheckResult { id, name: name.into(), passed, metrics, cases, notes, runtime: start.elapsed() }
    }

    /// One line: id, PASS/FAIL, name and the metrics.
    pub fn summary_line(&self) -> String {
        let metrics: Vec<String> = self
            .metrics
            .iter()
            .map(|m| {
                let rel = if m.at_least == m.passed { ">=" } else { "<" };
                format!("{} {:.3e} {} {:.1e}", m.label, m.value, rel, m.tolerance)
            })
            .collect();
        let mut line = format!(
            "[{:>2}] {} {:<28} cases={:<6} {}",
            self.id,
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.cases,
            metrics.join("; ")
        );
        if !self.notes.is_empty() {
            line.push_str(&format!(" | {}", self.notes.join("; ")));
        }
        line
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport {
    pub seed: u64,
    pub counts: Counts,
    pub tolerances: Tolerances,
    pub passed: bool,
    pub checks: Vec<CheckResult>,
}

fn max_into(slot: &mut f64, v: f64) {
    if v.is_nan() || v > *slot {
        *slot = if v.is_nan() { f64::INFINITY } else { v };
    }
}

/// Cycles through generic, singular-`B` (plain and mixed) and witness samples.
fn mixed_sample(n: usize, i: usize, rng: &mut ChaCha8Rng) -> SymplecticMatrix {
    let spec = match i % 4 {
        0 => SampleSpec::Generic,
        1 => SampleSpec::MixedSingularB { rank: rng.random_range(0..=n) },
        2 => SampleSpec::SingularB { rank: rng.random_range(0..=n) },
        _ => SampleSpec::Witness { k: rng.random_range(0..=n) },
    };
    sample_symplectic_with(n, rng, spec).expect("valid sample spec")
}

/// Graph identity in both directions, for every class of `H`.
pub fn check_graph_identity(cfg: &SuiteConfig) -> CheckResult {
    let start = Instant::now();
    let mut rng = cfg.rng(1);
    let per = cfg.counts.graph_per_class;
    let (mut forward, mut reverse) = (0.0, 0.0);
    let mut notes = Vec::new();
    let mut cases = 0;
    for n in [1usize, 2, 3, 5] {
        let mut classes: Vec<(String, Box<dyn Fn(usize, &mut ChaCha8Rng) -> SymplecticMatrix>)> = Vec::new();
        classes.push(("generic".into(), Box::new(move |_, r| sample_symplectic_with(n, r, SampleSpec::Generic).unwrap())));
        for rank in 0..=n {
            classes.push((
                format!("singular_b({rank})"),
                Box::new(move |i, r| {
                    let spec = if i % 2 == 0 { SampleSpec::SingularB { rank } } else { SampleSpec::MixedSingularB { rank } };
                    sample_symplectic_with(n, r, spec).unwrap()
                }),
            ));
        }
        classes.push(("witness".into(), Box::new(move |i, _| witness_hk(n, i % (n + 1)).unwrap())));
        for (label, draw) in &classes {
            for i in 0..per {
                let h = draw(i, &mut rng);
                cases += 1;
                let gf = match build_genfun(&h) {
                    Ok(gf) => gf,
                    Err(e) => {
                        notes.push(format!("n={n} {label} #{i}: {e}"));
                        continue;
                    }
                };
                for _ in 0..cfg.counts.graph_points {
                    let x = random_vector(n, &mut rng);
                    let xi = random_vector(n, &mut rng);
                    match graph_from_phi(&gf, &x, &xi, &h) {
                        Ok(fit) => max_into(&mut forward, fit.scaled_residual()),
                        Err(e) => notes.push(format!("n={n} {label} #{i}: {e}")),
                    }
                }
                match reverse_inclusion_check(&gf, &h, rng.random(), cfg.counts.graph_points) {
                    Ok(r) => max_into(&mut reverse, r.max_residual),
                    Err(e) => notes.push(format!("n={n} {label} #{i}: {e}")),
                }
            }
        }
    }
    notes.truncate(5);
    let tol = cfg.tolerances.graph;
    CheckResult::new(
        1,
        "graph identity",
        vec![Metric::below("graph_from_phi", forward, tol), Metric::below("reverse_inclusion", reverse, tol)],
        cases,
        notes,
        start,
    )
}

/// Three-way agreement of the restricted complex form.
pub fn check_restriction_identity(cfg: &SuiteConfig) -> CheckResult {
    let start = Instant::now();
    let mut rng = cfg.rng(2);
    let (mut worst, mut real_part) = (0.0, 0.0);
    let mut notes = Vec::new();
    let sizes = [1usize, 2, 3, 5];
    for i in 0..cfg.counts.restriction_matrices {
        let n = sizes[i % sizes.len()];
        let h = mixed_sample(n, i / sizes.len(), &mut rng);
        match restriction_identity_check(&h, rng.random(), cfg.counts.restriction_pairs) {
            Ok(r) => {
                max_into(&mut worst, r.max_discrepancy);
                max_into(&mut real_part, r.max_real_part);
            }
            Err(e) => notes.push(format!("#{i} (n={n}): {e}")),
        }
    }
    notes.truncate(5);
    let tol = cfg.tolerances.restriction;
    CheckResult::new(
        2,
        "restriction identity",
        vec![Metric::below("three_way", worst, tol), Metric::below("real_part", real_part, tol)],
        cfg.counts.restriction_matrices * cfg.counts.restriction_pairs,
        notes,
        start,
    )
}

/// Algebraic identities of `X` on sampled matrices.
pub fn check_xmap_algebra(cfg: &SuiteConfig) -> CheckResult {
    let start = Instant::now();
    let mut rng = cfg.rng(3);
    let tol = &cfg.tolerances;
    let (mut via_inverse, mut inverse_invariance, mut conjugation, mut kernel) = (0.0, 0.0, 0.0, 0.0);
    let mut spectrum_mismatches = 0usize;
    for i in 0..cfg.counts.xmap_samples {
        let n = 1 + i % 5;
        let h = mixed_sample(n, i / 5, &mut rng);
        let scale = h.frobenius_norm().max(1.0);
        let x = xmap(&h).into_matrix();
        let j = j_matrix(n);
        max_into(&mut via_inverse, (&x - &j * (h.matrix() + h.inverse().matrix())).norm() / scale);
        max_into(&mut inverse_invariance, (&x - xmap(&h.inverse()).matrix()).norm() / scale);
        let r = mixed_sample(n, i / 5 + 1, &mut rng);
        let cscale = scale * scale * r.frobenius_norm().max(1.0);
        max_into(&mut conjugation, conjugation_covariance_check(&h, &r).unwrap_or(f64::INFINITY) / cscale);
        let k = xmap_kernel(&h);
        let gap = if k.basis.ncols() == k.h2_plus_i_basis.ncols() { k.subspace_gap } else { 1.0 };
        max_into(&mut kernel, gap);
        let invertible = xmap_rank(&h) == 2 * n;
        let away = distance_of_minus_one_to_spectrum_of_square(&h) > 1e-8;
        if invertible != away {
            spectrum_mismatches += 1;
        }
    }
    CheckResult::new(
        3,
        "xmap algebra",
        vec![
            Metric::below("X=J(H+H^-1)", via_inverse, tol.xmap_identity),
            Metric::below("X(H)=X(H^-1)", inverse_invariance, tol.xmap_identity),
            Metric::below("conjugation", conjugation, tol.conjugation),
            Metric::below("kernel_angle", kernel, tol.kernel_angle),
            Metric::flag("invertible_iff_spectrum", spectrum_mismatches == 0),
        ],
        cfg.counts.xmap_samples,
        Vec::new(),
        start,
    )
}

/// The six displayed example mappings.
pub fn check_worked_examples(cfg: &SuiteConfig) -> CheckResult {
    let start = Instant::now();
    let mut rng = cfg.rng(4);
    let mut worst = [0.0f64; 6];
    let mut cases = 0;
    for n in 1..=3usize {
        let id = RealMatrix::identity(n, n);
        let z = RealMatrix::zeros(n, n);
        let two_j = j_matrix(n) * 2.0;

        // 1: diag(A, A⁻ᵀ), including A = I.
        for trial in 0..4 {
            let a = if trial == 0 { id.clone() } else { crate::linalg::expm(&RealMatrix::from_fn(n, n, |_, _| rng.random_range(-0.5..0.5))) };
            let a_inv = a.clone().lu().try_inverse().unwrap();
            let h = SymplecticMatrix::from_blocks(&a, &z, &z, &a_inv.transpose()).unwrap();
            let expected = assemble_blocks(&z, &(-(a.transpose() + a_inv.transpose())), &(&a + &a_inv), &z);
            max_into(&mut worst[0], (xmap(&h).matrix() - expected).amax());
            cases += 1;
        }
        // 2 and 3: shears by symmetric blocks.
        for _ in 0..4 {
            let g = RealMatrix::from_fn(n, n, |_, _| rng.random_range(-2.0..2.0));
            let s = &g + g.transpose();
            let upper = SymplecticMatrix::from_blocks(&id, &s, &z, &id).unwrap();
            let lower = SymplecticMatrix::from_blocks(&id, &z, &s, &id).unwrap();
            max_into(&mut worst[1], (xmap(&upper).matrix() - &two_j).amax());
            max_into(&mut worst[2], (xmap(&lower).matrix() - &two_j).amax());
            cases += 2;
        }
        // 4: J ↦ 0.
        max_into(&mut worst[3], xmap(&standard_j(n)).matrix().amax());
        // 5: rotations at ten angles.
        for i in 0..10 {
            let t = -3.0 + 0.65 * i as f64;
            max_into(&mut worst[4], rotation_example_check(t, n));
        }
        // 6: X(H) = X(H⁻¹).
        for i in 0..10 {
            let h = mixed_sample(n, i, &mut rng);
            max_into(&mut worst[5], (xmap(&h).matrix() - xmap(&h.inverse()).matrix()).amax());
        }
        cases += 21;
    }
    let tol = cfg.tolerances.examples;
    let labels = ["ex1_diag", "ex2_upper_shear", "ex3_lower_shear", "ex4_J", "ex5_rotation", "ex6_inverse"];
    CheckResult::new(
        4,
        "worked examples",
        labels.iter().zip(worst).map(|(l, w)| Metric::below(l, w, tol)).collect(),
        cases,
        Vec::new(),
        start,
    )
}

/// `rank X(H_k) = 2k` for `0 ≤ k ≤ n ≤ 6`.
pub fn check_rank_witnesses(_cfg: &SuiteConfig) -> CheckResult {
    let start = Instant::now();
    let mut failures = Vec::new();
    let mut cases = 0;
    for n in 1..=6 {
        for k in 0..=n {
            cases += 1;
            let rank = xmap_rank(&witness_hk(n, k).unwrap());
            if rank != 2 * k {
                failures.push(format!("n={n} k={k}: rank {rank}"));
            }
        }
    }
    CheckResult::new(5, "rank witnesses", vec![Metric::flag("rank=2k", failures.is_empty())], cases, failures, start)
}

/// Canonical representatives of `M(2n)/sp(2n)`.
pub fn check_quotient(cfg: &SuiteConfig) -> CheckResult {
    let start = Instant::now();
    let mut rng = cfg.rng(6);
    let (mut idempotence, mut coset, mut projection) = (0.0, 0.0, 0.0);
    let mut notes = Vec::new();
    for i in 0..cfg.counts.quotient_shifts {
        let n = 1 + i % 4;
        let m = RealMatrix::from_fn(2 * n, 2 * n, |_, _| rng.sample::<f64, _>(StandardNormal));
        let rep = canonical_rep(&m).unwrap();
        let again = canonical_rep(&rep.assemble()).unwrap();
        max_into(&mut idempotence, rep.max_abs_diff(&again));
        let a = random_algebra_element(n, &mut rng, 1.0);
        let shifted = canonical_rep(&(&m + a.matrix())).unwrap();
        max_into(&mut coset, rep.max_abs_diff(&shifted));
        // M minus its representative lies in sp.
        if SpAlgebraElement::new(&m - rep.assemble()).is_err() {
            notes.push(format!("#{i}: M - rep(M) not in sp"));
        }
    }
    for i in 0..cfg.counts.quotient_samples {
        let n = 1 + i % 5;
        let h = mixed_sample(n, i / 5, &mut rng);
        let diff = pi_sp(&h).max_abs_diff(&canonical_rep(h.matrix()).unwrap());
        max_into(&mut projection, diff / h.frobenius_norm().max(1.0));
    }
    notes.truncate(5);
    let tol = cfg.tolerances.quotient;
    CheckResult::new(
        6,
        "quotient representative",
        vec![
            Metric::below("idempotence", idempotence, tol),
            Metric::below("coset_invariance", coset, tol),
            Metric::below("pi=canonical_rep", projection, tol),
        ],
        cfg.counts.quotient_shifts + cfg.counts.quotient_samples,
        notes,
        start,
    )
}

/// Planted recovery for `n = 1, 2, 3` and a reproducible `n = 1` sweep.
pub fn check_explorer(cfg: &SuiteConfig) -> CheckResult {
    let start = Instant::now();
    let c = &cfg.counts;
    let mut metrics = Vec::new();
    for n in 1..=3usize {
        let mut hits = 0;
        for t in 0..c.planted_targets {
            let seed = cfg.seed.wrapping_mul(1000).wrapping_add((n * 100 + t) as u64);
            let (s, _) = planted_target(n, seed).expect("n > 0");
            let problem = SearchProblem::new(s, SymplecticMatrix::identity(n), c.planted_budget, c.planted_restarts, seed).unwrap();
            if solve(&problem).best_residual < cfg.tolerances.planted_residual {
                hits += 1;
            }
        }
        let fraction = hits as f64 / c.planted_targets.max(1) as f64;
        metrics.push(Metric::at_least(&format!("planted_n{n}"), fraction, cfg.tolerances.planted_fraction));
    }
    let sweep = |seed| {
        image_evidence_sweep(1, c.sweep_targets, seed, c.planted_restarts, c.planted_budget)
            .map(|r| serde_json::to_string(&r).expect("report serializes"))
    };
    let reproducible = match (sweep(cfg.seed), sweep(cfg.seed)) {
        (Ok(a), Ok(b)) => a == b,
        _ => false,
    };
    metrics.push(Metric::flag("sweep_reproducible", reproducible));
    CheckResult::new(7, "explorer", metrics, 3 * c.planted_targets + c.sweep_targets, Vec::new(), start)
}

/// Full rank of the auxiliary-variable Hessian for the general construction.
pub fn check_phase_nondegeneracy(cfg: &SuiteConfig) -> CheckResult {
    let start = Instant::now();
    let mut rng = cfg.rng(8);
    let mut worst_ratio = f64::INFINITY;
    let mut notes = Vec::new();
    for i in 0..cfg.counts.phase_samples {
        let n = 1 + i % 4;
        let h = mixed_sample(n, i / 4, &mut rng);
        match build_genfun_general(&h).and_then(|gf| crate::metaplectic::phase_nondegeneracy_check(&gf)) {
            Ok(r) => {
                worst_ratio = worst_ratio.min(r.sigma_min / r.sigma_max);
                if !r.passed {
                    notes.push(format!("#{i} (n={n}): rank {} of {}", r.rank, r.expected_rank));
                }
            }
            Err(e) => notes.push(format!("#{i} (n={n}): {e}")),
        }
    }
    notes.truncate(5);
    CheckResult::new(
        8,
        "phase nondegeneracy",
        vec![Metric::at_least("sigma_min/sigma_max", worst_ratio, cfg.tolerances.phase_rank_ratio)],
        cfg.counts.phase_samples,
        notes,
        start,
    )
}

fn random_state(n: usize, rng: &mut ChaCha8Rng) -> GaussianState {
    let g = RealMatrix::from_fn(n, n, |_, _| rng.random_range(-0.4..0.4));
    let im = &g * g.transpose() + RealMatrix::identity(n, n) * rng.random_range(0.5..2.0);
    let re = RealMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    let re = (&re + re.transpose()) * 0.5;
    let m = ComplexMatrix::from_fn(n, n, |i, j| Complex64::new(re[(i, j)], im[(i, j)]));
    let c = Complex64::from_polar(rng.random_range(0.5..2.0), rng.random_range(-3.0..3.0));
    GaussianState::new(m, c, 1.0).expect("positive imaginary part")
}

/// Closed form against quadrature, unitarity, composition and shift coherence.
pub fn check_metaplectic(cfg: &SuiteConfig) -> CheckResult {
    let start = Instant::now();
    let mut rng = cfg.rng(9);
    let tol = &cfg.tolerances;
    let c = &cfg.counts;
    let mut notes = Vec::new();

    // (a) n = 1, invertible B, N = 2048 on [−12, 12].
    let mut grid_err: f64 = 0.0;
    let mut drawn = 0;
    while drawn < c.grid_cases {
        let h = sample_symplectic_with(1, &mut rng, SampleSpec::Generic).unwrap();
        let b = h.b()[(0, 0)].abs();
        if b < 0.3 || h.frobenius_norm() > 6.0 {
            continue;
        }
        drawn += 1;
        let u = random_state(1, &mut rng);
        let run = || -> Result<f64> {
            let f = GridField::sample_gaussian(&u, 12.0, 2048)?;
            let exact = GridField::sample_gaussian(&quantize_gaussian(&h, &u)?, 12.0, 2048)?;
            Ok(grid_quantize(&h, &f, 1.0)?.relative_l2(&exact))
        };
        match run() {
            Ok(e) => max_into(&mut grid_err, e),
            Err(e) => notes.push(format!("grid case {drawn}: {e}")),
        }
    }

    // (b) unitarity over all classes.
    let mut unitarity: f64 = 0.0;
    for i in 0..c.unitarity_cases {
        let n = 1 + i % 3;
        let h = mixed_sample(n, i / 3, &mut rng);
        let u = random_state(n, &mut rng);
        match quantize_general(&h, &u, None) {
            Ok(v) => max_into(&mut unitarity, (v.norm() - u.norm()).abs() / u.norm()),
            Err(e) => notes.push(format!("unitarity #{i}: {e}")),
        }
    }

    // (c) composition up to a unimodular scalar, starting with J·J against −I.
    let mut composition: f64 = 0.0;
    for i in 0..c.composition_pairs {
        let n = 1 + i % 3;
        let (h1, h2) = if i == 0 {
            (standard_j(1), standard_j(1))
        } else {
            (mixed_sample(n, i, &mut rng), mixed_sample(n, i + 1, &mut rng))
        };
        let u = if i == 0 { GaussianState::standard(1, 1.0) } else { random_state(n, &mut rng) };
        match composition_check(&h1, &h2, &u) {
            Ok(r) => max_into(&mut composition, r.discrepancy),
            Err(e) => notes.push(format!("composition #{i}: {e}")),
        }
    }
    let minus_id = SymplecticMatrix::new(-RealMatrix::identity(2, 2)).unwrap();
    let u = GaussianState::standard(1, 1.0);
    let j = standard_j(1);
    let jj = quantize_general(&j, &quantize_general(&j, &u, None).unwrap(), None).unwrap();
    let parity = quantize_general(&minus_id, &u, None).unwrap();
    max_into(&mut composition, crate::metaplectic::phase_discrepancy(&jj, &parity).unwrap_or(f64::INFINITY));

    // (d) two admissible shifts give the same state up to a unimodular scalar.
    let mut shift: f64 = 0.0;
    for i in 0..c.shift_cases {
        let n = 1 + i % 3;
        let h = mixed_sample(n, i, &mut rng);
        let u = random_state(n, &mut rng);
        let run = || -> Result<f64> {
            let t1 = admissible_shift(&h)?;
            let t2 = (1..=60)
                .map(|k| t1 + 0.37 + 0.1 * k as f64)
                .find(|&t| shift_coherence(&h, &u, t1, t).is_ok())
                .ok_or(crate::Error::NoAdmissibleShift)?;
            let r = shift_coherence(&h, &u, t1, t2)?;
            let scale = quantize_general(&h, &u, Some(t1))?.m.camax().max(1.0);
            Ok((r.m_difference / scale).max(r.modulus_gap))
        };
        match run() {
            Ok(e) => max_into(&mut shift, e),
            Err(e) => notes.push(format!("shift #{i}: {e}")),
        }
    }
    notes.truncate(5);
    CheckResult::new(
        9,
        "metaplectic",
        vec![
            Metric::below("grid_oracle", grid_err, tol.grid),
            Metric::below("unitarity", unitarity, tol.unitarity),
            Metric::below("composition", composition, tol.composition),
            Metric::below("shift_coherence", shift, tol.shift),
        ],
        c.grid_cases + c.unitarity_cases + c.composition_pairs + 1 + c.shift_cases,
        notes,
        start,
    )
}

fn relative_gap(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    (a - b).norm() / a.norm().max(b.norm()).max(f64::MIN_POSITIVE)
}

/// Central differences of a quadratic are exact up to rounding, so a
/// moderate step gives a sharp comparison.
fn phi_fd_gradient(gf: &GeneratingFunction, v: &DVector<f64>, eps: f64) -> DVector<f64> {
    let n = gf.n();
    let eval = |w: &DVector<f64>| {
        let z = crate::symplectic::ComplexVector::from_fn(n, |i, _| Complex64::new(w[i], w[n + i]));
        phi_eval(gf, &z, &w.rows(2 * n, w.len() - 2 * n).into_owned()).unwrap()
    };
    DVector::from_fn(v.len(), |i, _| {
        let mut p = v.clone();
        let mut m = v.clone();
        p[i] += eps;
        m[i] -= eps;
        (eval(&p) - eval(&m)) / (2.0 * eps)
    })
}

/// `phi_grad` and the explorer gradient against central differences.
pub fn check_gradients(cfg: &SuiteConfig) -> CheckResult {
    let start = Instant::now();
    let mut rng = cfg.rng(10);
    let (mut phi, mut explorer) = (0.0, 0.0);
    let mut notes = Vec::new();
    for i in 0..cfg.counts.gradient_points {
        let n = 1 + i % 3;
        let h = mixed_sample(n, i / 3, &mut rng);
        match build_genfun(&h) {
            Ok(gf) => {
                let v = random_vector(2 * n + gf.theta_dim(), &mut rng);
                let z = crate::symplectic::ComplexVector::from_fn(n, |j, _| Complex64::new(v[j], v[n + j]));
                let theta = v.rows(2 * n, gf.theta_dim()).into_owned();
                let (dz, dth) = phi_grad(&gf, &z, &theta).unwrap();
                let mut analytic = DVector::zeros(v.len());
                for j in 0..n {
                    analytic[j] = 2.0 * dz[j].re;
                    analytic[n + j] = -2.0 * dz[j].im;
                }
                analytic.rows_mut(2 * n, dth.len()).copy_from(&dth);
                max_into(&mut phi, relative_gap(&analytic, &phi_fd_gradient(&gf, &v, 1e-3)));
            }
            Err(e) => notes.push(format!("#{i}: {e}")),
        }

        let s = SkewMatrix::random_unit(2 * n, &mut rng);
        let h0 = sample_symplectic_with(n, &mut rng, SampleSpec::Generic).unwrap();
        let dim = SpAlgebraElement::dimension(n);
        let x = DVector::from_fn(dim, |_, _| 0.3 * rng.sample::<f64, _>(StandardNormal));
        let (_, g) = value_and_coord_gradient(n, &x, &h0, &s);
        let eps = 1e-5;
        let fd = DVector::from_fn(dim, |k, _| {
            let mut p = x.clone();
            let mut m = x.clone();
            p[k] += eps;
            m[k] -= eps;
            (value_and_coord_gradient(n, &p, &h0, &s).0 - value_and_coord_gradient(n, &m, &h0, &s).0) / (2.0 * eps)
        });
        max_into(&mut explorer, relative_gap(&g, &fd));
    }
    notes.truncate(5);
    let tol = cfg.tolerances.gradient;
    CheckResult::new(
        10,
        "gradients",
        vec![Metric::below("phi_grad", phi, tol), Metric::below("explorer_grad", explorer, tol)],
        2 * cfg.counts.gradient_points,
        notes,
        start,
    )
}

pub type CheckFn = fn(&SuiteConfig) -> CheckResult;

/// All checks in criterion order.
pub const CHECKS: [(u32, &str, CheckFn); 10] = [
    (1, "graph identity", check_graph_identity),
    (2, "restriction identity", check_restriction_identity),
    (3, "xmap algebra", check_xmap_algebra),
    (4, "worked examples", check_worked_examples),
    (5, "rank witnesses", check_rank_witnesses),
    (6, "quotient representative", check_quotient),
    (7, "explorer", check_explorer),
    (8, "phase nondegeneracy", check_phase_nondegeneracy),
    (9, "metaplectic", check_metaplectic),
    (10, "gradients", check_gradients),
];

/// Runs the selected checks (all when `only` is empty) in criterion order.
pub fn run_suite(cfg: &SuiteConfig, only: &[u32]) -> SuiteReport {
    let checks: Vec<CheckResult> = CHECKS
        .iter()
        .filter(|(id, _, _)| only.is_empty() || only.contains(id))
        .map(|(_, _, f)| f(cfg))
        .collect();
    SuiteReport {
        seed: cfg.seed,
        counts: cfg.counts.clone(),
        tolerances: cfg.tolerances.clone(),
        passed: checks.iter().all(|c| c.passed),
        checks,
    }
}
