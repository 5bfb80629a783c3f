use dirac_lattice::holonomy::ChiProfile;
use dirac_lattice::liegroup::LieGroup;
use dirac_lattice::qham::{
    check_axioms, conjugacy_class, fuse, lift, LPoint, LTangent, QHamError, QHamSpace,
};
use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn class(g: &LieGroup, rng: &mut ChaCha8Rng, scale: f64) -> QHamSpace {
    let a0 = g.exp(&g.random_algebra_vec(rng, scale));
    conjugacy_class(g.clone(), a0)
}

#[test]
fn su2_class_two_form_matches_closed_form() {
    // On a conjugacy class the 2-form evaluated on conjugation tangents has
    // the closed form 1/2 <x, (Ad_a - Ad_{a^-1}) y>; the library value goes
    // through the leaf-form solve and must agree.
    let mut r = rng(1);
    let g = LieGroup::by_name("su2").unwrap();
    for _ in 0..16 {
        let space = class(&g, &mut r, 0.8);
        for _ in 0..4 {
            let m = space.random_point(&mut r, 1.0);
            let a = &space.factor_points(&m)[0];
            let x = g.random_algebra_vec(&mut r, 1.0);
            let y = g.random_algebra_vec(&mut r, 1.0);
            let om = space.omega(&m, &[x.clone()], &[y.clone()]).unwrap();
            let oracle =
                0.5 * g.inner(&x, &((g.adjoint(a) - g.adjoint(&g.inv(a))) * &y));
            assert!(
                (om - oracle).abs() < 1e-9,
                "omega {om} vs closed form {oracle}"
            );
        }
    }
}

#[test]
fn axioms_hold_for_classes_and_fusions() {
    let mut r = rng(2);
    let mut spaces = Vec::new();
    for name in ["su2", "so3", "sl2r"] {
        let g = LieGroup::by_name(name).unwrap();
        let scale = if name == "sl2r" { 0.4 } else { 0.8 };
        let c1 = class(&g, &mut r, scale);
        let c2 = class(&g, &mut r, scale * 0.7);
        spaces.push((format!("{name} class"), c1.clone()));
        spaces.push((format!("{name} fusion"), fuse(&c1, &c2).unwrap()));
    }
    let g = LieGroup::by_name("su2").unwrap();
    let triple = fuse(
        &fuse(&class(&g, &mut r, 0.6), &class(&g, &mut r, 0.5)).unwrap(),
        &class(&g, &mut r, 0.4),
    )
    .unwrap();
    spaces.push(("su2 triple fusion".into(), triple));
    for (label, space) in &spaces {
        // Coarse step: the exterior-derivative residual must shrink at
        // second order (factor ~4 per halving) unless already at noise.
        let coarse = check_axioms(space, 3, &mut r, 1e-3).unwrap();
        if coarse.d_omega_residual > 1e-10 {
            assert!(
                coarse.d_omega_order > 3.5 && coarse.d_omega_order < 4.5,
                "{label}: order {:.3} (residual {:.3e})",
                coarse.d_omega_order,
                coarse.d_omega_residual
            );
        }
        assert_eq!(coarse.joint_kernel_dim, 0, "{label}: joint kernel");
        assert!(
            coarse.moment_residual < 1e-10,
            "{label}: contraction axiom residual {:.3e}",
            coarse.moment_residual
        );
        // Fine step: everything at tolerance.
        let fine = check_axioms(space, 3, &mut r, 1e-5).unwrap();
        assert!(fine.pass(1e-5), "{label}: {fine:?}");
        assert!(
            fine.d_omega_residual < 1e-8,
            "{label}: fine d omega residual {:.3e}",
            fine.d_omega_residual
        );
    }
}

#[test]
fn negative_control_scaled_form_breaks_the_contraction_axiom() {
    let mut r = rng(3);
    let g = LieGroup::by_name("su2").unwrap();
    let space = fuse(&class(&g, &mut r, 0.8), &class(&g, &mut r, 0.6))
        .unwrap()
        .with_omega_scale(2.0);
    let rep = check_axioms(&space, 3, &mut r, 1e-5).unwrap();
    assert!(!rep.pass(1e-5));
    assert!(
        rep.moment_residual > 1e-2,
        "scaling must break the contraction axiom ({:.3e})",
        rep.moment_residual
    );
    // The moment map itself is untouched.
    assert!(rep.equivariance_residual < 1e-8);
}

#[test]
fn negative_control_moment_offset_breaks_equivariance() {
    let mut r = rng(4);
    let g = LieGroup::by_name("su2").unwrap();
    let mut c = DVector::zeros(3);
    c[0] = 0.3;
    let space = class(&g, &mut r, 0.8).with_moment_offset(c);
    let rep = check_axioms(&space, 3, &mut r, 1e-5).unwrap();
    assert!(!rep.pass(1e-5));
    assert!(
        rep.equivariance_residual > 1e-3,
        "offset must break equivariance ({:.3e})",
        rep.equivariance_residual
    );
    assert!(
        rep.moment_residual > 1e-4,
        "offset must break the contraction axiom ({:.3e})",
        rep.moment_residual
    );
    // The 2-form and its derivative are untouched.
    assert!(rep.d_omega_residual < 1e-5);
}

#[test]
fn fusion_with_trivial_class_is_identity() {
    let mut r = rng(5);
    for name in ["su2", "so3", "sl2r"] {
        let g = LieGroup::by_name(name).unwrap();
        let space = class(&g, &mut r, 0.5);
        let trivial = conjugacy_class(g.clone(), g.identity());
        for fused in [fuse(&space, &trivial).unwrap(), fuse(&trivial, &space).unwrap()] {
            let idx = if fused.factors[0].m == g.identity().m { 1 } else { 0 };
            for _ in 0..6 {
                let mf = fused.random_point(&mut r, 0.7);
                let m = dirac_lattice::qham::MPoint {
                    conj: vec![mf.conj[idx].clone()],
                };
                assert!(
                    (fused.moment(&mf).m - space.moment(&m).m).amax() < 1e-12,
                    "{name}: moment changed by trivial fusion"
                );
                let x = g.random_algebra_vec(&mut r, 1.0);
                let y = g.random_algebra_vec(&mut r, 1.0);
                let junk1 = g.random_algebra_vec(&mut r, 1.0);
                let junk2 = g.random_algebra_vec(&mut r, 1.0);
                let mut xs = vec![x.clone(), x.clone()];
                let mut ys = vec![y.clone(), y.clone()];
                // The trivial factor is inert whatever its tangent entry is.
                xs[1 - idx] = junk1;
                ys[1 - idx] = junk2;
                let of = fused.omega(&mf, &xs, &ys).unwrap();
                let o = space.omega(&m, &[x], &[y]).unwrap();
                assert!(
                    (of - o).abs() < 1e-12,
                    "{name}: 2-form changed by trivial fusion ({of} vs {o})"
                );
            }
        }
    }
}

#[test]
fn fusion_is_associative() {
    let mut r = rng(6);
    let g = LieGroup::by_name("su2").unwrap();
    let (c1, c2, c3) = (
        class(&g, &mut r, 0.6),
        class(&g, &mut r, 0.5),
        class(&g, &mut r, 0.4),
    );
    let left = fuse(&fuse(&c1, &c2).unwrap(), &c3).unwrap();
    let right = fuse(&c1, &fuse(&c2, &c3).unwrap()).unwrap();
    assert_eq!(left.num_factors(), 3);
    assert_eq!(right.num_factors(), 3);
    for _ in 0..8 {
        let m = left.random_point(&mut r, 0.7);
        let xs = left.random_tangent(&mut r, 1.0);
        let ys = left.random_tangent(&mut r, 1.0);
        let ol = left.omega(&m, &xs, &ys).unwrap();
        let or = right.omega(&m, &xs, &ys).unwrap();
        assert!((ol - or).abs() < 1e-13, "associativity defect {}", ol - or);
        assert!((left.moment(&m).m - right.moment(&m).m).amax() < 1e-13);
    }
}

#[test]
fn lift_requires_the_axioms() {
    let mut r = rng(7);
    let g = LieGroup::by_name("su2").unwrap();
    let bad = class(&g, &mut r, 0.8).with_omega_scale(2.0);
    match lift(&bad, 8, ChiProfile::Linear, &mut r, 1e-5) {
        Err(QHamError::AxiomFailure(_)) => {}
        other => panic!("expected axiom failure, got {other:?}"),
    }
}

fn sample_points(
    l: &dirac_lattice::qham::LoopHamSpace,
    r: &mut ChaCha8Rng,
) -> Vec<LPoint> {
    let m = l.space.random_point(r, 0.6);
    vec![
        l.identity_point(m.clone()),
        LPoint {
            m,
            gauge: l.random_based_gauge(r, 0.3),
        },
    ]
}

fn random_ltangent(
    l: &dirac_lattice::qham::LoopHamSpace,
    r: &mut ChaCha8Rng,
) -> LTangent {
    let g = &l.space.group;
    let mut zeta: Vec<DVector<f64>> =
        (0..=l.n).map(|_| g.random_algebra_vec(r, 0.8)).collect();
    zeta[0] = DVector::zeros(g.dim);
    zeta[l.n] = DVector::zeros(g.dim);
    LTangent {
        xs: l.space.random_tangent(r, 0.8),
        zeta,
    }
}

#[test]
fn lattice_moment_condition_holds_at_generic_points() {
    let mut r = rng(8);
    let g = LieGroup::by_name("su2").unwrap();
    let space = fuse(&class(&g, &mut r, 0.6), &class(&g, &mut r, 0.5)).unwrap();
    for chi in [ChiProfile::Linear, ChiProfile::Smoothstep] {
        let l = lift(&space, 8, chi, &mut r, 1e-5).unwrap();
        for p in sample_points(&l, &mut r) {
            for _ in 0..3 {
                let mut xi: Vec<DVector<f64>> =
                    (0..=8).map(|_| g.random_algebra_vec(&mut r, 0.8)).collect();
                xi[8] = xi[0].clone();
                let t = random_ltangent(&l, &mut r);
                let res = l.moment_condition_residual(&p, &xi, &t, 1e-5).unwrap();
                assert!(res < 1e-9, "moment condition residual {res:.3e}");
            }
        }
    }
}

#[test]
fn lattice_round_trip_recovers_the_data() {
    let mut r = rng(9);
    let g = LieGroup::by_name("su2").unwrap();
    let space = fuse(&class(&g, &mut r, 0.6), &class(&g, &mut r, 0.5)).unwrap();
    let l = lift(&space, 8, ChiProfile::Smoothstep, &mut r, 1e-5).unwrap();
    for p in sample_points(&l, &mut r) {
        let hol = l.reduce_moment(&p).unwrap();
        assert!(
            (hol.m - space.moment(&p.m).m).amax() < 1e-12,
            "recovered moment drifted"
        );
        for _ in 0..4 {
            let xs = space.random_tangent(&mut r, 0.8);
            let ys = space.random_tangent(&mut r, 0.8);
            let red = l.reduce_omega(&p, &xs, &ys, 1e-5).unwrap();
            let orig = space.omega(&p.m, &xs, &ys).unwrap();
            assert!(
                (red - orig).abs() < 1e-12,
                "recovered 2-form off by {:.3e}",
                red - orig
            );
        }
    }
}

#[test]
fn point_class_at_identity_reduces_to_the_gauge_orbit() {
    let mut r = rng(10);
    let g = LieGroup::by_name("su2").unwrap();
    let space = conjugacy_class(g.clone(), g.identity());
    let l = lift(&space, 6, ChiProfile::Linear, &mut r, 1e-5).unwrap();
    let m = space.random_point(&mut r, 0.8);
    // Base connection is flat.
    let base = l.base_connection(&m).unwrap();
    for a in &base.samples {
        assert!(a.amax() < 1e-14, "base connection of the point class");
    }
    let p = LPoint {
        m,
        gauge: l.random_based_gauge(&mut r, 0.4),
    };
    let conn = l.connection(&p).unwrap();
    // The group-valued 2-form vanishes identically, so sigma is exactly the
    // connection-space form on the chart velocities.
    for _ in 0..4 {
        let t1 = random_ltangent(&l, &mut r);
        let t2 = random_ltangent(&l, &mut r);
        let b1 = l.psi_velocity(&p, &t1, 1e-5).unwrap();
        let b2 = l.psi_velocity(&p, &t2, 1e-5).unwrap();
        let s = l.sigma(&p, &t1, &t2, 1e-5).unwrap();
        let w = conn.varpi(&b1, &b2, ChiProfile::Linear).unwrap();
        assert!((s - w).abs() < 1e-12, "sigma vs varpi {:.3e}", s - w);
    }
    // Moment condition reduces to the generator identity of the orbit.
    for _ in 0..3 {
        let mut xi: Vec<DVector<f64>> =
            (0..=6).map(|_| g.random_algebra_vec(&mut r, 0.8)).collect();
        xi[6] = xi[0].clone();
        let t = random_ltangent(&l, &mut r);
        let res = l.moment_condition_residual(&p, &xi, &t, 1e-5).unwrap();
        assert!(res < 1e-9, "orbit moment condition residual {res:.3e}");
    }
}
