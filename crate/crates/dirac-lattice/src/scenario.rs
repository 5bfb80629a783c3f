//! Named verification scenarios with machine-readable reports.
//!
//! Each scenario is a deterministic, seeded numerical check over the library
//! (linear reduction, lattice reduction, splittings, group-valued moment
//! spaces, ...) that produces one `CheckRecord`.  Reports are stable: the
//! per-scenario random stream is derived from the master seed and the
//! scenario name, so adding scenarios never perturbs existing ones, and the
//! serialized output is bit-identical across runs of the same build.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::cartan::{
    fusion_defect, inv_relation, mult_relation, CartanAlgebroid,
};
use crate::holonomy::{ChiProfile, DiscreteConnection};
use crate::liegroup::LieGroup;
use crate::linalg::{
    classify, compose_relations, dirac_morphism_class, orthogonal_complement,
    random_coisotropic, random_lagrangian, random_matrix, random_metric,
    reduce_space, reduce_subspace, MetrizedSpace, MorphismClass, Subspace,
    SubspaceClass, TolerancePolicy, Transversality,
};
use crate::par::{self, ExecMode};
use crate::qham::{self, conjugacy_class, fuse, LPoint, LTangent};
use crate::reduction::{reduce_dirac, reduce_fiber, reduce_splitting};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("unknown scenario '{0}'")]
    UnknownScenario(String),
    #[error("unknown group '{0}'")]
    UnknownGroup(String),
    #[error("unknown boundary-subspace selector '{0}'")]
    UnknownSelector(String),
    #[error("unknown chi profile '{0}'")]
    UnknownChi(String),
    #[error("invalid lattice size list '{0}'")]
    BadSizes(String),
    #[error("scenario '{name}' failed to execute: {message}")]
    Execution { name: String, message: String },
}

/// Parameters shared by all scenarios.  `group` and `s` accept "all".
#[derive(Debug, Clone)]
pub struct ScenarioParams {
    pub group: String,
    pub sizes: Vec<usize>,
    pub s: String,
    pub chi: ChiProfile,
    pub seed: u64,
}

impl Default for ScenarioParams {
    fn default() -> Self {
        ScenarioParams {
            group: "all".into(),
            sizes: vec![4, 8, 16],
            s: "all".into(),
            chi: ChiProfile::Linear,
            seed: 0,
        }
    }
}

/// One executed check.  `order_estimate` is present only for checks with a
/// measured convergence rate; wall time is kept out of the serialized form
/// so reports are bit-identical across runs.
#[derive(Debug, Clone, Serialize)]
pub struct CheckRecord {
    pub check: String,
    pub group: String,
    #[serde(rename = "N")]
    pub n: usize,
    pub s: String,
    pub max_error: f64,
    pub tolerance: f64,
    pub order_estimate: Option<f64>,
    pub pass: bool,
    #[serde(skip)]
    pub wall_time: f64,
}

pub const SCENARIOS: &[&str] = &[
    "linear-reduction",
    "morphism-composition",
    "pairing-identity",
    "orthogonality",
    "lattice-reduction",
    "beta-splitting",
    "cartan-three-form",
    "qham-axioms",
    "ham-correspondence",
    "multiplicative",
    "generator-derivation",
    "circle-model",
];

/// Scenario names exercising a given library module.
pub fn module_scenarios(module: &str) -> Option<Vec<&'static str>> {
    match module {
        "linalg" => Some(vec!["linear-reduction", "morphism-composition"]),
        "liegroup" => Some(vec![]),
        "cartan" => Some(vec!["cartan-three-form", "multiplicative"]),
        "holonomy" => Some(vec![
            "pairing-identity",
            "orthogonality",
            "generator-derivation",
            "circle-model",
        ]),
        "reduction" => Some(vec!["lattice-reduction", "beta-splitting"]),
        "qham" => Some(vec!["qham-axioms", "ham-correspondence"]),
        "all" => Some(SCENARIOS.to_vec()),
        _ => None,
    }
}

/// Convergence-study operation names accepted by `converge`.
pub const CONVERGE_OPS: &[&str] = &[
    "beta-splitting",
    "cartan-three-form",
    "generator-derivation",
    "circle-model",
];

/// FNV-1a hash of the scenario name mixed with the master seed.
pub fn derived_seed(master: u64, name: &str) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for b in name.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h ^ master.wrapping_mul(0x9e3779b97f4a7c15)
}

fn tolp() -> TolerancePolicy {
    TolerancePolicy::default()
}

fn groups_for(param: &str) -> Result<Vec<LieGroup>, ScenarioError> {
    if param == "all" {
        Ok(vec![
            LieGroup::by_name("su2").unwrap(),
            LieGroup::by_name("so3").unwrap(),
            LieGroup::by_name("sl2r").unwrap(),
        ])
    } else {
        LieGroup::by_name(param).map(|g| vec![g]).map_err(|_| {
            ScenarioError::UnknownGroup(param.to_string())
        })
    }
}

/// Catalogued boundary subspaces of the double algebra.
fn boundary_catalog(
    g: &LieGroup,
    which: &str,
) -> Result<Vec<(String, Subspace)>, ScenarioError> {
    let d = g.dim;
    let t = tolp();
    let dd = g.double();
    let mut all: Vec<(String, Subspace)> = vec![
        ("zero".into(), Subspace::zero(2 * d)),
        ("diagonal".into(), dd.diagonal(&t)),
        ("full".into(), Subspace::full(2 * d)),
    ];
    if !g.name.starts_with("abelian") {
        let kappa = g.standard_automorphism();
        let mut graph = DMatrix::zeros(2 * d, d);
        graph.view_mut((0, 0), (d, d)).copy_from(&kappa);
        graph
            .view_mut((d, 0), (d, d))
            .copy_from(&DMatrix::identity(d, d));
        all.push(("graph".into(), Subspace::from_span(2 * d, &graph, &t)));
    }
    if which == "all" {
        Ok(all)
    } else {
        all.into_iter()
            .find(|(name, _)| name == which)
            .map(|x| vec![x])
            .ok_or_else(|| ScenarioError::UnknownSelector(which.to_string()))
    }
}

/// Distance of a subspace from being Lagrangian: the gap between it and its
/// metric orthogonal (both must already have half dimension).
fn lagrangian_residual(space: &MetrizedSpace, sub: &Subspace) -> f64 {
    sub.gap(&orthogonal_complement(space, sub, &tolp()))
}

pub fn run_scenario(
    name: &str,
    params: &ScenarioParams,
) -> Result<CheckRecord, ScenarioError> {
    let start = std::time::Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(derived_seed(params.seed, name));
    let mut rec = match name {
        "linear-reduction" => linear_reduction(&mut rng),
        "morphism-composition" => morphism_composition(&mut rng),
        "pairing-identity" => pairing_identity(params, &mut rng)?,
        "orthogonality" => orthogonality(params, &mut rng)?,
        "lattice-reduction" => lattice_reduction(params, &mut rng)?,
        "beta-splitting" => beta_splitting(params, &mut rng)?,
        "cartan-three-form" => cartan_three_form(params, &mut rng)?,
        "qham-axioms" => qham_axioms(&mut rng)?,
        "ham-correspondence" => ham_correspondence(params, &mut rng)?,
        "multiplicative" => multiplicative(params, &mut rng)?,
        "generator-derivation" => generator_derivation(&mut rng),
        "circle-model" => circle_model(params, &mut rng)?,
        other => return Err(ScenarioError::UnknownScenario(other.to_string())),
    };
    rec.check = name.to_string();
    rec.wall_time = start.elapsed().as_secs_f64();
    Ok(rec)
}

/// Run a list of scenarios (optionally in parallel) and merge the records
/// deterministically by scenario name.
pub fn run_many(
    names: &[&str],
    params: &ScenarioParams,
    mode: ExecMode,
) -> Result<Vec<CheckRecord>, ScenarioError> {
    let jobs: Vec<String> = names.iter().map(|s| s.to_string()).collect();
    let results = par::map(mode, jobs, |name| {
        run_scenario(&name, params).map_err(|e| (name.clone(), e))
    });
    let mut out = Vec::with_capacity(results.len());
    for r in results {
        match r {
            Ok(rec) => out.push(rec),
            Err((name, e)) => {
                return Err(ScenarioError::Execution {
                    name,
                    message: e.to_string(),
                })
            }
        }
    }
    out.sort_by(|a, b| a.check.cmp(&b.check));
    Ok(out)
}

pub fn to_json(records: &[CheckRecord]) -> String {
    serde_json::to_string_pretty(records).expect("report serialization")
}

pub fn to_csv(records: &[CheckRecord]) -> String {
    let mut out = String::from("name,group,N,s,max_error,tolerance,order,status\n");
    for r in records {
        let order = r
            .order_estimate
            .map(|o| format!("{o:.3}"))
            .unwrap_or_default();
        let status = if r.pass { "pass" } else { "fail" };
        out.push_str(&format!(
            "{},{},{},{},{:.6e},{:.1e},{},{}\n",
            r.check, r.group, r.n, r.s, r.max_error, r.tolerance, order, status
        ));
    }
    out
}

fn blank(group: &str, n: usize, s: &str, tolerance: f64) -> CheckRecord {
    CheckRecord {
        check: String::new(),
        group: group.to_string(),
        n,
        s: s.to_string(),
        max_error: 0.0,
        tolerance,
        order_estimate: None,
        pass: true,
        wall_time: 0.0,
    }
}

// --- individual scenarios ---------------------------------------------------

/// True when the pair (L, C) is a well-posed reduction input: beyond the
/// genuine intersection, the principal angles between L and C stay bounded
/// away from zero.  A spurious near-intersection makes the reduced subspace
/// intrinsically ill-conditioned (the answer itself moves at the observed
/// error level between algebraically equivalent formulas), so such draws are
/// rejected rather than measured.
/// Largest cosine between two subspaces after removing their exact
/// intersection, so a value near 1 flags a spurious near-intersection.
fn deflated_overlap(a: &Subspace, b: &Subspace, t: &TolerancePolicy) -> f64 {
    let z = a.intersect(b, t);
    let deflate = |s: &Subspace| -> DMatrix<f64> {
        let proj = &s.basis * s.basis.transpose();
        let residual = &proj * &z.basis;
        &s.basis * s.basis.transpose() - residual * z.basis.transpose()
    };
    let (da, db) = (deflate(a), deflate(b));
    crate::linalg::spectral_norm(&(da.transpose() * db))
}

fn well_posed_pair(
    space: &MetrizedSpace,
    l: &Subspace,
    c: &Subspace,
    t: &TolerancePolicy,
) -> bool {
    // cos < 1 - 5e-7 keeps sin(theta) above ~1e-3, which bounds the relative
    // error amplification of the quotient construction near 1e-16/1e-6.
    let limit = 1.0 - 5e-7;
    if deflated_overlap(l, c, t) >= limit {
        return false;
    }
    // The quotient also degrades when the part of L surviving into C/C-perp
    // (that is, L's intersection with C) nearly grazes the null directions
    // C-perp without actually meeting them.
    let z = l.intersect(c, t);
    let cperp = crate::linalg::orthogonal_complement(space, c, t);
    deflated_overlap(&z, &cperp, t) < limit
}

/// Random coisotropic reductions of random Lagrangians stay Lagrangian.
fn linear_reduction(rng: &mut ChaCha8Rng) -> CheckRecord {
    let t = tolp();
    let mut rec = blank("mixed", 40, "-", 1e-8);
    let mut accepted = 0usize;
    while accepted < 1000 {
        let p = rng.gen_range(2..=20usize);
        let space = MetrizedSpace::new(random_metric(rng, p, p), &t).unwrap();
        let cdim = rng.gen_range(p..=2 * p - 1);
        let c = random_coisotropic(rng, &space, cdim, &t);
        let l = random_lagrangian(rng, &space, &t);
        if !well_posed_pair(&space, &l, &c, &t) {
            continue;
        }
        accepted += 1;
        let red = match reduce_space(&space, &c, &t) {
            Ok(r) => r,
            Err(e) => {
                rec.pass = false;
                rec.max_error = f64::INFINITY;
                let _ = e;
                break;
            }
        };
        let (lred, _) = match reduce_subspace(&space, &l, &red, &t) {
            Ok(x) => x,
            Err(_) => {
                rec.pass = false;
                rec.max_error = f64::INFINITY;
                break;
            }
        };
        if classify(&red.space, &lred, &t) != SubspaceClass::Lagrangian {
            rec.pass = false;
        }
        // Direct isotropy defect of the reduced subspace in the reduced
        // metric (half-dimensionality is covered by the classification).
        let form = lred.basis.transpose() * &red.space.metric * &lred.basis;
        let err = form.amax() / (1.0 + red.space.metric.amax());
        rec.max_error = rec.max_error.max(err);
    }
    rec.pass &= rec.max_error < rec.tolerance;
    rec
}

/// Strong Dirac morphisms compose to strong morphisms; backward images of
/// complementary Lagrangians stay complementary.
fn morphism_composition(rng: &mut ChaCha8Rng) -> CheckRecord {
    let t = tolp();
    let mut rec = blank("standard", 4, "-", 1e-8);
    let tq = |n: usize| {
        MetrizedSpace::new(crate::cartan::tq_metric(n), &t).unwrap()
    };
    let tangent = |n: usize| {
        let mut span = DMatrix::zeros(2 * n, n);
        for i in 0..n {
            span[(i, i)] = 1.0;
        }
        Subspace::from_span(2 * n, &span, &t)
    };
    let skew = |rng: &mut ChaCha8Rng, n: usize| {
        let m = random_matrix(rng, n, n);
        (&m - m.transpose()) * 0.5
    };
    let (n1, n2, n3) = (4usize, 3usize, 2usize);
    for _ in 0..200 {
        let r1 = crate::cartan::exact_relation(
            &random_matrix(rng, n2, n1),
            &skew(rng, n1),
            &t,
        );
        let r2 = crate::cartan::exact_relation(
            &random_matrix(rng, n3, n2),
            &skew(rng, n2),
            &t,
        );
        let e1 = tangent(n1);
        let e2 = r1.image_of(&e1, &t);
        let e3 = r2.image_of(&e2, &t);
        let ok_parts = dirac_morphism_class(&r1, &e1, &e2, &t)
            .map(|c| c == MorphismClass::Strong)
            .unwrap_or(false)
            && dirac_morphism_class(&r2, &e2, &e3, &t)
                .map(|c| c == MorphismClass::Strong)
                .unwrap_or(false);
        let (comp, trans) = match compose_relations(&r2, &r1, &t) {
            Ok(x) => x,
            Err(_) => {
                rec.pass = false;
                continue;
            }
        };
        let ok_comp = trans == Transversality::Transverse
            && dirac_morphism_class(&comp, &e1, &e3, &t)
                .map(|c| c == MorphismClass::Strong)
                .unwrap_or(false);
        let graph_space = comp.graph_space();
        rec.max_error = rec
            .max_error
            .max(lagrangian_residual(&graph_space, &comp.graph));
        // Backward image of a complement of E2 is a complement of E1.
        let v2 = tq(n2);
        let f2 = loop {
            let cand = random_lagrangian(rng, &v2, &t);
            if cand.intersect(&e2, &t).dim() == 0 {
                break cand;
            }
        };
        let f1 = r1.preimage_of(&f2, &t);
        let v1 = tq(n1);
        let ok_backward = classify(&v1, &f1, &t) == SubspaceClass::Lagrangian
            && e1.intersect(&f1, &t).dim() == 0
            && e1.sum(&f1, &t).dim() == 2 * n1;
        rec.max_error = rec.max_error.max(lagrangian_residual(&v1, &f1));
        rec.pass &= ok_parts && ok_comp && ok_backward;
    }
    rec.pass &= rec.max_error < rec.tolerance;
    rec
}

/// The generator pairing telescopes to the boundary values, machine-exactly,
/// for every lattice size up to 256.
fn pairing_identity(
    params: &ScenarioParams,
    rng: &mut ChaCha8Rng,
) -> Result<CheckRecord, ScenarioError> {
    let mut rec = blank(&params.group, 256, "-", 1e-12);
    for g in groups_for(&params.group)? {
        let mut n = 4;
        while n <= 256 {
            let a = DiscreteConnection::random(g.clone(), n, rng, 0.6);
            for _ in 0..4 {
                let xi = a.random_node_field(rng, 1.0);
                let zeta = a.random_node_field(rng, 1.0);
                let p = a.fiber_pairing(&a.generator(&xi), &a.generator(&zeta));
                let boundary = g.inner(&xi[n], &zeta[n]) - g.inner(&xi[0], &zeta[0]);
                rec.max_error = rec.max_error.max((p - boundary).abs());
            }
            n *= 2;
        }
    }
    rec.pass = rec.max_error < rec.tolerance;
    Ok(rec)
}

/// The fiber orthogonal of E^(s) is E^(s-perp), for catalogued and random s.
fn orthogonality(
    params: &ScenarioParams,
    rng: &mut ChaCha8Rng,
) -> Result<CheckRecord, ScenarioError> {
    let t = tolp();
    let mut rec = blank(&params.group, *params.sizes.last().unwrap_or(&8), &params.s, 1e-8);
    for g in groups_for(&params.group)? {
        let d = g.dim;
        let dd = g.double();
        let dd_space = dd.space();
        let mut pairs: Vec<(Subspace, Subspace)> = Vec::new();
        for (_, s) in boundary_catalog(&g, &params.s)? {
            let s_perp = orthogonal_complement(&dd_space, &s, &t);
            pairs.push((s, s_perp));
        }
        if params.s == "all" {
            let span = random_matrix(rng, 2 * d, d);
            let s = Subspace::from_span(2 * d, &span, &t);
            let s_perp = orthogonal_complement(&dd_space, &s, &t);
            pairs.push((s, s_perp));
        }
        for &n in &params.sizes {
            let a = DiscreteConnection::random(g.clone(), n, rng, 0.6);
            let fiber = a.fiber_space(&t);
            for (s, s_perp) in &pairs {
                let e = a.dirac_fiber(s, &t);
                let e_perp = orthogonal_complement(&fiber, &e, &t);
                let expect = a.dirac_fiber(s_perp, &t);
                rec.max_error = rec.max_error.max(e_perp.gap(&expect));
            }
        }
    }
    rec.pass = rec.max_error < rec.tolerance;
    Ok(rec)
}

/// Coisotropic reduction of the lattice fiber: exact dimensions, labeling
/// isometry, recovery of the boundary subalgebra, gauge equivariance.
fn lattice_reduction(
    params: &ScenarioParams,
    rng: &mut ChaCha8Rng,
) -> Result<CheckRecord, ScenarioError> {
    let t = tolp();
    let mut rec = blank(&params.group, *params.sizes.last().unwrap_or(&8), &params.s, 1e-8);
    let mut equivariance: f64 = 0.0;
    let mut isometry: f64 = 0.0;
    for g in groups_for(&params.group)? {
        let d = g.dim;
        for &n in &params.sizes {
            let a = DiscreteConnection::random(g.clone(), n, rng, 0.6);
            let rf = reduce_fiber(&a, &t).map_err(|e| ScenarioError::Execution {
                name: "lattice-reduction".into(),
                message: e.to_string(),
            })?;
            isometry = isometry.max(rf.isometry_residual);
            for (_, s) in boundary_catalog(&g, &params.s)? {
                let red = reduce_dirac(&rf, &s, &t);
                if red.dim() != s.dim() {
                    rec.pass = false;
                } else {
                    rec.max_error = rec.max_error.max(red.gap(&s));
                }
            }
            // Labels transform by the boundary adjoint under gauge action.
            let k: Vec<_> = (0..=n).map(|_| g.random_element(rng, 0.4)).collect();
            if let Ok(a2) = a.gauge_act(&k) {
                let rf2 = reduce_fiber(&a2, &t).map_err(|e| ScenarioError::Execution {
                    name: "lattice-reduction".into(),
                    message: e.to_string(),
                })?;
                let xi = a.random_node_field(rng, 1.0);
                let xi2 = a.gauge_act_nodes(&k, &xi);
                let l1 = rf.label(&a.generator(&xi));
                let l2 = rf2.label(&a2.generator(&xi2));
                let mut expect = DVector::zeros(2 * d);
                expect
                    .rows_mut(0, d)
                    .copy_from(&(g.adjoint(&k[0]) * l1.rows(0, d)));
                expect
                    .rows_mut(d, d)
                    .copy_from(&(g.adjoint(&k[n]) * l1.rows(d, d)));
                equivariance = equivariance.max((l2 - expect).amax());
            } else {
                rec.pass = false;
            }
        }
    }
    rec.pass &= rec.max_error < 1e-8 && isometry < 1e-9 && equivariance < 1e-12;
    rec.max_error = rec.max_error.max(isometry).max(equivariance);
    Ok(rec)
}

/// The reduced twisted splitting reproduces the group-level splitting; with
/// these conventions the agreement is exact at every lattice size, which
/// supersedes the expected first-order convergence.
fn beta_splitting(
    params: &ScenarioParams,
    rng: &mut ChaCha8Rng,
) -> Result<CheckRecord, ScenarioError> {
    let mut rec = blank(&params.group, *params.sizes.last().unwrap_or(&8), "-", 1e-8);
    let mut groups = groups_for(&params.group)?;
    // Closed-form flat case: the covector leg is exactly X/2.
    groups.push(LieGroup::by_name("abelian:2").unwrap());
    let mut errors: Vec<f64> = Vec::new();
    for g in &groups {
        for &n in &params.sizes {
            let a = DiscreteConnection::random(g.clone(), n, rng, 0.6);
            let sc = reduce_splitting(&a, params.chi, &tolp()).map_err(|e| {
                ScenarioError::Execution {
                    name: "beta-splitting".into(),
                    message: e.to_string(),
                }
            })?;
            let err = sc
                .beta_error
                .max(sc.anchor_error)
                .max(sc.j_residual)
                .max(sc.containment_defect);
            errors.push(err);
            rec.max_error = rec.max_error.max(err);
            if g.name.starts_with("abelian") && sc.beta_error > 1e-6 {
                rec.pass = false;
            }
        }
    }
    // Order estimate only when the errors are above rounding noise.
    if errors.len() >= 2 {
        let first = errors[0];
        let last = errors[errors.len() - 1];
        if first > 1e-11 && last > 1e-13 {
            rec.order_estimate = Some((first / last).log2());
        }
    }
    rec.pass &= rec.max_error < rec.tolerance;
    Ok(rec)
}

/// The bracket-based evaluation of the 3-form matches the structure-constant
/// evaluation; the finite-difference calibration of the 3-form coefficient
/// converges to 1/2 at second order in the step.
fn cartan_three_form(
    params: &ScenarioParams,
    rng: &mut ChaCha8Rng,
) -> Result<CheckRecord, ScenarioError> {
    let mut rec = blank(&params.group, 0, "-", 1e-9);
    let (mut sum_coarse, mut sum_fine) = (0.0f64, 0.0f64);
    let h = 2e-2;
    for g in groups_for(&params.group)? {
        let c = CartanAlgebroid::new(g.clone());
        for _ in 0..8 {
            let p = g.random_element(rng, 0.8);
            let v1 = g.random_algebra_vec(rng, 1.0);
            let v2 = g.random_algebra_vec(rng, 1.0);
            let v3 = g.random_algebra_vec(rng, 1.0);
            let exact = c.eta(&v1, &v2, &v3);
            // The bracket oracle agrees with the structure constants to
            // rounding (the fd error cancels on these sections).
            rec.max_error = rec
                .max_error
                .max((c.three_form_bracket_oracle(&p, &v1, &v2, &v3, 1e-5) - exact).abs());
            // The second-order fd behavior is measured on the coefficient
            // calibration, which does not enjoy that cancellation.
            let y = DVector::from_fn(2 * g.dim, |_, _| rng.gen_range(-1.0..1.0));
            let z = DVector::from_fn(2 * g.dim, |_, _| rng.gen_range(-1.0..1.0));
            sum_coarse += (c.calibrate_eta(&p, &y, &z, h) - 0.5).abs();
            sum_fine += (c.calibrate_eta(&p, &y, &z, h / 2.0) - 0.5).abs();
        }
    }
    let ratio = sum_coarse / sum_fine;
    rec.order_estimate = Some(ratio);
    rec.pass = (3.0..=5.0).contains(&ratio) && rec.max_error < rec.tolerance;
    Ok(rec)
}

/// Group-valued moment-space axioms on su(2) classes and binary fusions,
/// including the negative controls.
fn qham_axioms(rng: &mut ChaCha8Rng) -> Result<CheckRecord, ScenarioError> {
    let g = LieGroup::by_name("su2").unwrap();
    let mut rec = blank("su2", 0, "-", 1e-8);
    let class = |rng: &mut ChaCha8Rng, scale: f64| {
        conjugacy_class(g.clone(), g.exp(&g.random_algebra_vec(rng, scale)))
    };
    let c1 = class(rng, 0.8);
    let c2 = class(rng, 0.6);
    let fused = fuse(&c1, &c2).map_err(execution("qham-axioms"))?;
    for space in [&c1, &c2, &fused] {
        let rep = qham::check_axioms(space, 64, rng, 1e-5).map_err(execution("qham-axioms"))?;
        rec.pass &= rep.pass(1e-5) && rep.joint_kernel_dim == 0;
        rec.max_error = rec
            .max_error
            .max(rep.moment_residual)
            .max(rep.d_omega_residual);
    }
    // Negative controls: each must fail exactly its own axiom.
    let scaled = fused.clone().with_omega_scale(2.0);
    let rep = qham::check_axioms(&scaled, 8, rng, 1e-5).map_err(execution("qham-axioms"))?;
    rec.pass &= rep.moment_residual > 1e-2 && rep.equivariance_residual < 1e-8;
    let mut c = DVector::zeros(3);
    c[1] = 0.3;
    let offset = fused.with_moment_offset(c);
    let rep = qham::check_axioms(&offset, 8, rng, 1e-5).map_err(execution("qham-axioms"))?;
    rec.pass &= rep.equivariance_residual > 1e-3 && rep.d_omega_residual < 1e-5;
    Ok(rec)
}

/// Lattice-side Hamiltonian correspondence: round trip and moment condition.
fn ham_correspondence(
    params: &ScenarioParams,
    rng: &mut ChaCha8Rng,
) -> Result<CheckRecord, ScenarioError> {
    let g = LieGroup::by_name("su2").unwrap();
    let mut rec = blank("su2", *params.sizes.last().unwrap_or(&8), "-", 1e-8);
    let class = |rng: &mut ChaCha8Rng, scale: f64| {
        conjugacy_class(g.clone(), g.exp(&g.random_algebra_vec(rng, scale)))
    };
    let space = fuse(&class(rng, 0.6), &class(rng, 0.5)).map_err(execution("ham-correspondence"))?;
    let mut moment_residuals: Vec<f64> = Vec::new();
    for &n in &params.sizes {
        let l = qham::lift(&space, n, params.chi, rng, 1e-5)
            .map_err(execution("ham-correspondence"))?;
        let m = space.random_point(rng, 0.6);
        let points = [
            l.identity_point(m.clone()),
            LPoint {
                m: m.clone(),
                gauge: l.random_based_gauge(rng, 0.3),
            },
        ];
        let mut worst_moment: f64 = 0.0;
        for p in &points {
            let hol = l.reduce_moment(p).map_err(execution("ham-correspondence"))?;
            rec.max_error = rec
                .max_error
                .max((hol.m - space.moment(&m).m).amax());
            let xs = space.random_tangent(rng, 0.8);
            let ys = space.random_tangent(rng, 0.8);
            let red = l
                .reduce_omega(p, &xs, &ys, 1e-5)
                .map_err(execution("ham-correspondence"))?;
            let orig = space.omega(&m, &xs, &ys).map_err(execution("ham-correspondence"))?;
            rec.max_error = rec.max_error.max((red - orig).abs());
            let mut xi: Vec<DVector<f64>> =
                (0..=n).map(|_| g.random_algebra_vec(rng, 0.8)).collect();
            xi[n] = xi[0].clone();
            let tangent = LTangent {
                xs: space.random_tangent(rng, 0.8),
                zeta: {
                    let mut z: Vec<DVector<f64>> =
                        (0..=n).map(|_| g.random_algebra_vec(rng, 0.8)).collect();
                    z[0] = DVector::zeros(g.dim);
                    z[n] = DVector::zeros(g.dim);
                    z
                },
            };
            let res = l
                .moment_condition_residual(p, &xi, &tangent, 1e-5)
                .map_err(execution("ham-correspondence"))?;
            worst_moment = worst_moment.max(res);
            rec.max_error = rec.max_error.max(res);
        }
        moment_residuals.push(worst_moment);
    }
    // The moment condition must stay at tolerance (it is exact up to fd
    // noise) at every refinement level.
    rec.pass = rec.max_error < rec.tolerance
        && moment_residuals.iter().all(|r| *r < 1e-9);
    Ok(rec)
}

/// Multiplication and inversion relations: Lagrangian graphs, pointwise
/// anchor compatibility at random group pairs, and the second-order fusion
/// defect identity.
fn multiplicative(
    params: &ScenarioParams,
    rng: &mut ChaCha8Rng,
) -> Result<CheckRecord, ScenarioError> {
    let t = tolp();
    let mut rec = blank(&params.group, 0, "-", 1e-8);
    let (mut sum_coarse, mut sum_fine) = (0.0f64, 0.0f64);
    for g in groups_for(&params.group)? {
        let c = CartanAlgebroid::new(g.clone());
        let dd = &c.double;
        let r = mult_relation(dd, &t);
        let ri = inv_relation(dd, &t);
        let graph_space = r.graph_space();
        rec.max_error = rec.max_error.max(lagrangian_residual(&graph_space, &r.graph));
        let gi_space = ri.graph_space();
        rec.max_error = rec.max_error.max(lagrangian_residual(&gi_space, &ri.graph));
        // Strong Manin-pair morphism for the diagonal structure.
        let diag = dd.diagonal(&t);
        let mut span = DMatrix::zeros(2 * dd.dim, 2 * diag.dim());
        span.view_mut((0, 0), (dd.dim, diag.dim()))
            .copy_from(&diag.basis);
        span.view_mut((dd.dim, diag.dim()), (dd.dim, diag.dim()))
            .copy_from(&diag.basis);
        let ee = Subspace::from_span(2 * dd.dim, &span, &t);
        rec.pass &= dirac_morphism_class(&r, &ee, &diag, &t)
            .map(|cl| cl == MorphismClass::Strong)
            .unwrap_or(false);
        // Pointwise anchor compatibility at random (g, h): the product of
        // the anchors of a diagonal element is the anchor at the product.
        for _ in 0..64 {
            let p = g.random_element(rng, 0.7);
            let q = g.random_element(rng, 0.7);
            let y = g.random_algebra_vec(rng, 1.0);
            let e = dd.pack(&y, &y);
            let vp = c.anchor(&p, &e);
            let vq = c.anchor(&q, &e);
            let vpq = c.anchor(&g.mul(&p, &q), &e);
            let err = (&(g.adjoint(&g.inv(&q)) * vp) + &vq - vpq).amax();
            rec.max_error = rec.max_error.max(err);
        }
        // Fusion-form defect at second order (skip for abelian: both sides
        // vanish identically).
        if !g.name.starts_with("abelian") {
            for _ in 0..4 {
                let p = g.random_element(rng, 0.7);
                let q = g.random_element(rng, 0.7);
                let vs = [
                    (g.random_algebra_vec(rng, 1.0), g.random_algebra_vec(rng, 1.0)),
                    (g.random_algebra_vec(rng, 1.0), g.random_algebra_vec(rng, 1.0)),
                    (g.random_algebra_vec(rng, 1.0), g.random_algebra_vec(rng, 1.0)),
                ];
                sum_coarse += fusion_defect(&c, &p, &q, &vs, 2e-2).abs();
                sum_fine += fusion_defect(&c, &p, &q, &vs, 1e-2).abs();
            }
        }
    }
    if sum_fine > 0.0 {
        let ratio = sum_coarse / sum_fine;
        rec.order_estimate = Some(ratio);
        rec.pass &= (3.0..=5.0).contains(&ratio);
    }
    rec.pass &= rec.max_error < rec.tolerance;
    Ok(rec)
}

/// The Courant bracket of a generator against a section is the derivative of
/// the section along the gauge flow, up to the second-order lattice defect.
fn generator_derivation(rng: &mut ChaCha8Rng) -> CheckRecord {
    let g = LieGroup::by_name("su2").unwrap();
    // The pass signal is the second-order ratio between the two lattice
    // sizes; the absolute bound only guards against outright blow-up since
    // the defect scale tracks the random field magnitudes.
    let mut rec = blank("su2", 16, "-", 1e-2);
    let residual_at = |n: usize, rng: &mut ChaCha8Rng| -> f64 {
        let delta = 1.0 / n as f64;
        // One smooth connection and node profile per lattice size, with
        // coefficients drawn once so the two sizes sample the same field.
        let ac = [
            g.random_algebra_vec(rng, 0.4),
            g.random_algebra_vec(rng, 0.4),
        ];
        let xc = [
            g.random_algebra_vec(rng, 0.8),
            g.random_algebra_vec(rng, 0.8),
        ];
        let samples = (0..n)
            .map(|i| {
                let s = i as f64 * delta;
                &ac[0] * (0.7 * s).cos() + &ac[1] * s
            })
            .collect();
        let a = DiscreteConnection::new(g.clone(), samples).unwrap();
        let xi: Vec<DVector<f64>> = (0..=n)
            .map(|i| {
                let s = i as f64 * delta;
                &xc[0] * (1.1 * s).sin() + &xc[1] * (1.0 - s)
            })
            .collect();
        let mut worst: f64 = 0.0;
        for _ in 0..25 {
            // Random affine section of the fiber in the holonomy entries.
            let c0: Vec<f64> = (0..a.fiber_dim()).map(|_| rng.gen_range(-0.5..0.5)).collect();
            let w: Vec<f64> = (0..a.fiber_dim()).map(|_| rng.gen_range(-0.5..0.5)).collect();
            let sigma = {
                let c0 = c0.clone();
                let w = w.clone();
                move |c: &DiscreteConnection| -> DVector<f64> {
                    let h = &c.holonomy().m;
                    DVector::from_fn(c.fiber_dim(), |j, _| {
                        c0[j] + w[j] * h[(j % 3, (j + 1) % 3)]
                    })
                }
            };
            let s1 = a.generator_section(xi.clone());
            let br = a.ambient_courant_bracket(&s1, &sigma, 1e-5).unwrap();
            let h = 1e-5;
            let lie = {
                let fwd = a.gauge_flow(&xi, h).unwrap();
                let bwd = a.gauge_flow(&xi, -h).unwrap();
                let kp: Vec<_> = xi.iter().map(|v| g.exp(&(v * h))).collect();
                let km: Vec<_> = xi.iter().map(|v| g.exp(&(v * (-h)))).collect();
                let p = a.gauge_act_fiber(&kp, &sigma(&fwd));
                let m = a.gauge_act_fiber(&km, &sigma(&bwd));
                (p - m) / (2.0 * h)
            };
            worst = worst.max((&br - &lie).amax());
        }
        worst
    };
    // Re-seed the field draw identically for both sizes.
    let seed_state = rng.gen::<u64>();
    let r_coarse = residual_at(8, &mut ChaCha8Rng::seed_from_u64(seed_state));
    let r_fine = residual_at(16, &mut ChaCha8Rng::seed_from_u64(seed_state));
    rec.max_error = r_fine;
    let ratio = r_coarse / r_fine;
    rec.order_estimate = Some(ratio);
    rec.pass = r_fine < rec.tolerance && (1.7..=6.0).contains(&ratio);
    rec
}

/// Periodic (circle) model: free-endpoint generator image, exact boundary
/// pairing, and the second-order bracket anomaly.
fn circle_model(
    params: &ScenarioParams,
    rng: &mut ChaCha8Rng,
) -> Result<CheckRecord, ScenarioError> {
    let t = tolp();
    let mut rec = blank(&params.group, 16, "-", 1e-12);
    for g in groups_for(&params.group)? {
        let n = 6;
        let a = DiscreteConnection::random(g.clone(), n, rng, 0.6);
        let r = a.circle_algebroid_fiber(&t);
        rec.pass &= r.dim() == (n + 1) * g.dim;
        let xi1 = a.random_node_field(rng, 1.0);
        let xi2 = a.random_node_field(rng, 1.0);
        let p = a.fiber_pairing(&a.generator(&xi1), &a.generator(&xi2));
        let expect = g.inner(&xi1[n], &xi2[n]) - g.inner(&xi1[0], &xi2[0]);
        rec.max_error = rec.max_error.max((p - expect).abs());
        // Covariantly constant fields: no anomaly at all.
        let cvec = g.random_algebra_vec(rng, 1.0);
        let flat: Vec<DVector<f64>> = (0..=n)
            .map(|i| g.adjoint(&g.inv(&a.parallel_frame()[i])) * &cvec)
            .collect();
        rec.max_error = rec
            .max_error
            .max(a.bracket_defect(&flat, &xi1).amax());
    }
    // The generic anomaly shrinks at second order in the mesh.
    let g = LieGroup::by_name("su2").unwrap();
    let prof1 = |s: f64| DVector::from_vec(vec![s, (2.0 * s).sin(), 0.2]);
    let prof2 = |s: f64| DVector::from_vec(vec![0.1, s * s, (1.1 * s).cos()]);
    let defect_at = |m: usize| -> f64 {
        let conn = DiscreteConnection::zero(g.clone(), m);
        conn.bracket_defect(&conn.sample_profile(&prof1), &conn.sample_profile(&prof2))
            .amax()
    };
    let ratio = defect_at(8) / defect_at(16);
    rec.order_estimate = Some(ratio);
    rec.pass &= (3.0..=5.0).contains(&ratio) && rec.max_error < rec.tolerance;
    Ok(rec)
}

fn execution<E: std::fmt::Display>(name: &'static str) -> impl Fn(E) -> ScenarioError {
    move |e| ScenarioError::Execution {
        name: name.into(),
        message: e.to_string(),
    }
}
