//! Reduction of the lattice fiber: dimensions, labeling isometry, Dirac
//! structures, splittings, and morphisms.

use dirac_lattice::holonomy::{ChiProfile, DiscreteConnection};
use dirac_lattice::liegroup::{graph_subalgebra, LieGroup};
use dirac_lattice::linalg::{
    compose_relations, dirac_morphism_class, LinearRelation, MorphismClass, Subspace,
    TolerancePolicy,
};
use dirac_lattice::reduction::{
    equivariant_extension_check, reduce_dirac, reduce_fiber, reduce_morphism, reduce_splitting,
    ReductionError,
};
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn tol() -> TolerancePolicy {
    TolerancePolicy::default()
}

fn groups() -> Vec<LieGroup> {
    vec![
        LieGroup::su2().unwrap(),
        LieGroup::so3().unwrap(),
        LieGroup::sl2r().unwrap(),
        LieGroup::abelian(2, 1).unwrap(),
    ]
}

#[test]
fn reduced_fiber_dimensions_and_isometry() {
    let mut rng = ChaCha8Rng::seed_from_u64(90);
    let t = tol();
    for g in groups() {
        let d = g.dim;
        for n in [4usize, 7, 16] {
            let a = DiscreteConnection::random(g.clone(), n, &mut rng, 0.8);
            let rf = reduce_fiber(&a, &t).unwrap();
            assert_eq!(rf.coisotropic.dim(), (n + 1) * d);
            assert_eq!(rf.perp.dim(), (n - 1) * d);
            assert_eq!(rf.quotient.space.dim, 2 * d);
            assert!(rf.isometry_residual < 1e-9, "{} n={n}", g.name);
            // The label of a generator is its boundary pair, and the fiber
            // pairing of generators is the double pairing of labels.
            for _ in 0..5 {
                let xi = a.random_node_field(&mut rng, 1.0);
                let zeta = a.random_node_field(&mut rng, 1.0);
                let x = a.generator(&xi);
                let y = a.generator(&zeta);
                let lx = rf.label(&x);
                let ly = rf.label(&y);
                assert!((lx.rows(0, d) - &xi[0]).amax() < 1e-9);
                assert!((lx.rows(d, d) - &xi[n]).amax() < 1e-9);
                let lhs = a.fiber_pairing(&x, &y);
                let rhs = rf.double.inner(&lx, &ly);
                assert!((lhs - rhs).abs() < 1e-9 * (1.0 + lhs.abs()));
            }
        }
    }
}

#[test]
fn abelian_flat_quotient_is_the_boundary_form() {
    let t = tol();
    let g = LieGroup::abelian(2, 0).unwrap();
    let a = DiscreteConnection::zero(g.clone(), 6);
    let rf = reduce_fiber(&a, &t).unwrap();
    // Quotient metric under the labeling is exactly diag(-G, G).
    let lw = &rf.label_matrix * &rf.quotient.witness.basis;
    let pulled = lw.transpose() * &rf.double.metric * &lw;
    assert!((&rf.quotient.space.metric - pulled).amax() < 1e-13);
}

#[test]
fn labels_are_gauge_equivariant() {
    let mut rng = ChaCha8Rng::seed_from_u64(91);
    let t = tol();
    for g in groups() {
        let n = 6;
        let a = DiscreteConnection::random(g.clone(), n, &mut rng, 0.4);
        let k = a.random_gauge(&mut rng, 0.4);
        let ka = a.gauge_act(&k).unwrap();
        let rf1 = reduce_fiber(&a, &t).unwrap();
        let rf2 = reduce_fiber(&ka, &t).unwrap();
        // Base labels: Hol(k.A) = k_0 Hol(A) k_n^{-1}, exactly.
        let expect = &k[0].m * &rf1.holonomy().m * g.inv(&k[n]).m;
        assert!((&rf2.holonomy().m - expect).amax() < 1e-12, "{}", g.name);
        // Fiber labels transform by the boundary pair (Ad_{k_0}, Ad_{k_n}).
        let ad0 = g.adjoint(&k[0]);
        let adn = g.adjoint(&k[n]);
        for _ in 0..5 {
            let xi = a.random_node_field(&mut rng, 1.0);
            let x = a.generator(&xi);
            let l1 = rf1.label(&x);
            let l2 = rf2.label(&a.gauge_act_fiber(&k, &x));
            let d = g.dim;
            assert!((l2.rows(0, d) - &ad0 * l1.rows(0, d)).amax() < 1e-10);
            assert!((l2.rows(d, d) - &adn * l1.rows(d, d)).amax() < 1e-10);
        }
    }
}

#[test]
fn reduce_dirac_recovers_the_boundary_subalgebra() {
    let mut rng = ChaCha8Rng::seed_from_u64(92);
    let t = tol();
    for g in groups() {
        let dd = g.double();
        let mut cases: Vec<(&str, Subspace)> = vec![
            ("diagonal", dd.diagonal(&t)),
            ("zero", Subspace::zero(2 * g.dim)),
            ("full", Subspace::full(2 * g.dim)),
        ];
        if g.name != "abelian:2,1" {
            let kappa = g.standard_automorphism();
            cases.push(("graph", graph_subalgebra(&dd, &kappa, &t).unwrap().subspace));
        }
        for n in [4usize, 9] {
            let a = DiscreteConnection::random(g.clone(), n, &mut rng, 0.8);
            let rf = reduce_fiber(&a, &t).unwrap();
            for (name, s) in &cases {
                let red = reduce_dirac(&rf, s, &t);
                assert!(
                    red.equals(s, 1e-8),
                    "{} n={n}: reduce_dirac({name}) = s (dims {} vs {})",
                    g.name,
                    red.dim(),
                    s.dim()
                );
            }
        }
    }
}

#[test]
fn reduced_splitting_matches_the_group_splitting_exactly() {
    let mut rng = ChaCha8Rng::seed_from_u64(93);
    let t = tol();
    for g in groups() {
        for chi in [ChiProfile::Linear, ChiProfile::Smoothstep] {
            for n in [4usize, 8, 16, 32] {
                let a = DiscreteConnection::random(g.clone(), n, &mut rng, 0.6);
                let sc = reduce_splitting(&a, chi, &t).unwrap();
                assert!(
                    sc.beta_error < 1e-12,
                    "{} {chi:?} n={n}: beta = X/2 to rounding, err {}",
                    g.name,
                    sc.beta_error
                );
                assert!(sc.anchor_error < 1e-12);
                assert!(sc.j_residual < 1e-12, "label equals j(X), both legs");
                assert!(sc.containment_defect < 1e-12, "twisted lift lies in C");
            }
        }
    }
}

#[test]
fn reduce_morphism_identity_and_gauge_graph() {
    let mut rng = ChaCha8Rng::seed_from_u64(94);
    let t = tol();
    for g in groups() {
        let n = 5;
        let d = g.dim;
        let a = DiscreteConnection::random(g.clone(), n, &mut rng, 0.4);
        let rf1 = reduce_fiber(&a, &t).unwrap();
        // Identity relation reduces to the identity on labels.
        let fiber = a.fiber_space(&t);
        let idr = LinearRelation::identity(&fiber);
        let idn = DMatrix::identity(a.node_dim(), a.node_dim());
        let red = reduce_morphism(&rf1, &rf1, &idr, &idn, &t).unwrap();
        let expect = LinearRelation::identity(&rf1.double.space());
        assert!(red.equals(&expect, 1e-8), "{}: reduced identity", g.name);
        // Gauge graph reduces to the boundary adjoint action on labels.
        let k = a.random_gauge(&mut rng, 0.4);
        let ka = a.gauge_act(&k).unwrap();
        let rf2 = reduce_fiber(&ka, &t).unwrap();
        let mut fmat = DMatrix::zeros(a.fiber_dim(), a.fiber_dim());
        for j in 0..a.fiber_dim() {
            let mut e = DVector::zeros(a.fiber_dim());
            e[j] = 1.0;
            fmat.set_column(j, &a.gauge_act_fiber(&k, &e));
        }
        let r = LinearRelation::from_map(&fiber, &ka.fiber_space(&t), &fmat, &t);
        let mut node_map = DMatrix::zeros(a.node_dim(), a.node_dim());
        for i in 0..=n {
            let ad = g.adjoint(&k[i]);
            node_map.view_mut((i * d, i * d), (d, d)).copy_from(&ad);
        }
        let red = reduce_morphism(&rf1, &rf2, &r, &node_map, &t).unwrap();
        let mut boundary_ad = DMatrix::zeros(2 * d, 2 * d);
        boundary_ad
            .view_mut((0, 0), (d, d))
            .copy_from(&g.adjoint(&k[0]));
        boundary_ad
            .view_mut((d, d), (d, d))
            .copy_from(&g.adjoint(&k[n]));
        let expect =
            LinearRelation::from_map(&rf1.double.space(), &rf2.double.space(), &boundary_ad, &t);
        assert!(red.equals(&expect, 1e-8), "{}: reduced gauge graph", g.name);
        // The reduced relation intertwines the quotients: q2 o R = red o q1.
        let q1 = rf1.quotient_relation(&t);
        let q2 = rf2.quotient_relation(&t);
        let (lhs, _) = compose_relations(&q2, &r, &t).unwrap();
        let (rhs, _) = compose_relations(&red, &q1, &t).unwrap();
        assert!(lhs.equals(&rhs, 1e-8), "{}: quotient intertwining", g.name);
        // Morphism class on the reduced Dirac structures is Strong: the
        // boundary action carries the diagonal to its adjoint image.
        let dd = g.double();
        let s1 = dd.diagonal(&t);
        let s2 = s1.map(&boundary_ad, &t);
        let class = dirac_morphism_class(&red, &s1, &s2, &t).unwrap();
        assert_eq!(class, MorphismClass::Strong, "{}", g.name);
    }
}

#[test]
fn reduce_morphism_rejects_non_intertwining_input() {
    let mut rng = ChaCha8Rng::seed_from_u64(95);
    let t = tol();
    let g = LieGroup::su2().unwrap();
    let a = DiscreteConnection::random(g.clone(), 4, &mut rng, 0.5);
    let rf = reduce_fiber(&a, &t).unwrap();
    let fiber = a.fiber_space(&t);
    let idr = LinearRelation::identity(&fiber);
    // Claiming the identity relation intertwines a doubled node map is false.
    let bad = DMatrix::identity(a.node_dim(), a.node_dim()) * 2.0;
    match reduce_morphism(&rf, &rf, &idr, &bad, &t) {
        Err(ReductionError::Intertwining { defect, witness }) => {
            assert!(defect > 1e-3);
            assert!(witness.amax() > 0.0);
        }
        other => panic!("expected intertwining failure, got {other:?}"),
    }
}

#[test]
fn thm_quotient_identity_holds_for_many_random_gauge_graphs() {
    let mut rng = ChaCha8Rng::seed_from_u64(96);
    let t = tol();
    let g = LieGroup::su2().unwrap();
    let n = 4;
    let d = g.dim;
    for trial in 0..25 {
        let a = DiscreteConnection::random(g.clone(), n, &mut rng, 0.4);
        let k = a.random_gauge(&mut rng, 0.4);
        let ka = a.gauge_act(&k).unwrap();
        let rf1 = reduce_fiber(&a, &t).unwrap();
        let rf2 = reduce_fiber(&ka, &t).unwrap();
        let mut fmat = DMatrix::zeros(a.fiber_dim(), a.fiber_dim());
        for j in 0..a.fiber_dim() {
            let mut e = DVector::zeros(a.fiber_dim());
            e[j] = 1.0;
            fmat.set_column(j, &a.gauge_act_fiber(&k, &e));
        }
        let r = LinearRelation::from_map(&a.fiber_space(&t), &ka.fiber_space(&t), &fmat, &t);
        let mut node_map = DMatrix::zeros(a.node_dim(), a.node_dim());
        for i in 0..=n {
            let ad = g.adjoint(&k[i]);
            node_map.view_mut((i * d, i * d), (d, d)).copy_from(&ad);
        }
        let red = reduce_morphism(&rf1, &rf2, &r, &node_map, &t).unwrap();
        let (lhs, _) = compose_relations(&rf2.quotient_relation(&t), &r, &t).unwrap();
        let (rhs, _) = compose_relations(&red, &rf1.quotient_relation(&t), &t).unwrap();
        assert!(lhs.equals(&rhs, 1e-8), "trial {trial}");
    }
}

#[test]
fn equivariant_extension_identities() {
    let g = LieGroup::su2().unwrap();
    let xf = |t: f64| DVector::from_vec(vec![(1.4 * t).sin(), 0.3 - t, 0.2 * t]);
    let zf = |t: f64| DVector::from_vec(vec![0.5 * t, (0.8 * t).cos(), t * t]);
    let pf = |t: f64| DVector::from_vec(vec![0.1, (1.1 * t).sin(), 0.4 - 0.3 * t]);
    let af = |t: f64| DVector::from_vec(vec![0.6 * t, (1.1 * t).sin(), 0.2]);
    let residuals_at = |n: usize| -> (f64, f64, f64) {
        let delta = 1.0 / n as f64;
        let samples = (0..n).map(|i| af(i as f64 * delta)).collect();
        let a = DiscreteConnection::new(g.clone(), samples).unwrap();
        let xi = a.sample_profile(&xf);
        let zeta = a.sample_profile(&zf);
        let probe: Vec<DVector<f64>> = (0..n).map(|i| pf(i as f64 * delta)).collect();
        let rep =
            equivariant_extension_check(&a, ChiProfile::Linear, &xi, &zeta, &probe, 1e-5).unwrap();
        (
            rep.alpha_closed_defect,
            rep.boundary_pairing_defect,
            rep.twisted_alpha_defect,
        )
    };
    let (c8, b8, tw8) = residuals_at(8);
    assert!(b8 < 1e-10, "boundary pairing identity is exact ({b8})");
    assert!(tw8 < 1e-10, "varpi twist cancels alpha on based fields ({tw8})");
    // The closedness defect of alpha comes from the O(delta^2) A-dependence
    // of the trapezoid coefficients; it shrinks with N.
    let (c32, _, _) = residuals_at(32);
    let ratio = c8 / c32;
    assert!((3.0..5.5).contains(&ratio), "first order over two doublings, ratio {ratio}");
    assert!(c32 < 5e-2);
}
