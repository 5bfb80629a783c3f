//! Group-valued Hamiltonian spaces: conjugacy classes, their fusions, the
//! three-axiom checker, and the correspondence with Hamiltonian spaces over
//! the lattice connection space.
//!
//! Spaces are sampled, not charted: a point of an f-fold fusion of conjugacy
//! classes is a list of conjugators (h_1, ..., h_f) with factor points
//! a_i = h_i a0_i h_i^{-1}, and every axiom is a pointwise or 1-jet
//! statement evaluated on chart tangents (x_1, ..., x_f) moving the
//! conjugators by h_i(t) = exp(t x_i) h_i.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use thiserror::Error;

use crate::cartan::{fusion_two_form, CartanAlgebroid, CartanError};
use crate::holonomy::{ChiProfile, DiscreteConnection, GaugeElement, HolonomyError, IntervalCochain};
use crate::liegroup::{GroupElement, LagrangianSubalgebra, LieError, LieGroup};
use crate::linalg::{nullspace, TolerancePolicy};

#[derive(Debug, Error)]
pub enum QHamError {
    #[error(transparent)]
    Lie(#[from] LieError),
    #[error(transparent)]
    Cartan(#[from] CartanError),
    #[error(transparent)]
    Holonomy(#[from] HolonomyError),
    #[error("spaces live over different groups: {0} vs {1}")]
    GroupMismatch(String, String),
    #[error("axiom check failed before lifting: {0}")]
    AxiomFailure(String),
}

/// A sampled group-valued Hamiltonian space: an iterated (left-associated)
/// fusion of conjugacy classes, with the diagonal algebra acting by
/// simultaneous conjugation.
#[derive(Debug, Clone)]
pub struct QHamSpace {
    pub group: LieGroup,
    /// Base points of the conjugacy-class factors.
    pub factors: Vec<GroupElement>,
    /// Negative-control hook: multiplies the 2-form (1.0 for honest spaces).
    pub omega_scale: f64,
    /// Negative-control hook: right-multiplies the moment value by exp of
    /// this algebra vector (zero for honest spaces).
    pub moment_offset: DVector<f64>,
}

/// A sampled point: one conjugator per factor.
#[derive(Debug, Clone)]
pub struct MPoint {
    pub conj: Vec<GroupElement>,
}

pub fn conjugacy_class(group: LieGroup, a0: GroupElement) -> QHamSpace {
    let d = group.dim;
    QHamSpace {
        group,
        factors: vec![a0],
        omega_scale: 1.0,
        moment_offset: DVector::zeros(d),
    }
}

/// Fusion: concatenate the factor lists; the 2-form picks up the
/// multiplicative correction term at each product step.
pub fn fuse(m1: &QHamSpace, m2: &QHamSpace) -> Result<QHamSpace, QHamError> {
    if m1.group.name != m2.group.name {
        return Err(QHamError::GroupMismatch(
            m1.group.name.clone(),
            m2.group.name.clone(),
        ));
    }
    let mut factors = m1.factors.clone();
    factors.extend(m2.factors.iter().cloned());
    Ok(QHamSpace {
        group: m1.group.clone(),
        factors,
        omega_scale: 1.0,
        moment_offset: DVector::zeros(m1.group.dim),
    })
}

impl QHamSpace {
    pub fn num_factors(&self) -> usize {
        self.factors.len()
    }

    pub fn with_omega_scale(mut self, s: f64) -> Self {
        self.omega_scale = s;
        self
    }

    pub fn with_moment_offset(mut self, c: DVector<f64>) -> Self {
        self.moment_offset = c;
        self
    }

    pub fn identity_point(&self) -> MPoint {
        MPoint {
            conj: vec![self.group.identity(); self.num_factors()],
        }
    }

    pub fn random_point<R: Rng>(&self, rng: &mut R, scale: f64) -> MPoint {
        MPoint {
            conj: (0..self.num_factors())
                .map(|_| self.group.random_element(rng, scale))
                .collect(),
        }
    }

    pub fn random_tangent<R: Rng>(&self, rng: &mut R, scale: f64) -> Vec<DVector<f64>> {
        (0..self.num_factors())
            .map(|_| self.group.random_algebra_vec(rng, scale))
            .collect()
    }

    /// Factor points a_i = h_i a0_i h_i^{-1}.
    pub fn factor_points(&self, m: &MPoint) -> Vec<GroupElement> {
        self.factors
            .iter()
            .zip(&m.conj)
            .map(|(a0, h)| {
                let ha = self.group.mul(h, a0);
                self.group.mul(&ha, &self.group.inv(h))
            })
            .collect()
    }

    /// Moment value: the ordered product of the factor points.
    pub fn moment(&self, m: &MPoint) -> GroupElement {
        let pts = self.factor_points(m);
        let mut out = self.group.identity();
        for p in &pts {
            out = self.group.mul(&out, &p);
        }
        if self.moment_offset.amax() > 0.0 {
            out = self.group.mul(&out, &self.group.exp(&self.moment_offset));
        }
        out
    }

    /// Left-trivialized velocity of factor i under the chart motion
    /// a_i(t) = exp(t x) a_i exp(-t x): Ad_{a_i^{-1}} x - x.
    pub fn factor_velocity(
        &self,
        points: &[GroupElement],
        i: usize,
        x: &DVector<f64>,
    ) -> DVector<f64> {
        self.group.adjoint(&self.group.inv(&points[i])) * x - x
    }

    /// Left-trivialized velocity of the moment (product) under a chart
    /// tangent: accumulated by v -> Ad_{a_j^{-1}} v + v_j.
    pub fn moment_velocity(&self, m: &MPoint, xs: &[DVector<f64>]) -> DVector<f64> {
        let points = self.factor_points(m);
        let mut v = DVector::zeros(self.group.dim);
        for (j, p) in points.iter().enumerate() {
            let vj = self.factor_velocity(&points, j, &xs[j]);
            v = self.group.adjoint(&self.group.inv(p)) * v + vj;
        }
        v
    }

    /// The 2-form on chart tangents: per-factor leaf forms plus one fusion
    /// correction per product step.
    pub fn omega(
        &self,
        m: &MPoint,
        xs: &[DVector<f64>],
        ys: &[DVector<f64>],
    ) -> Result<f64, QHamError> {
        let t = TolerancePolicy::default();
        let cartan = CartanAlgebroid::new(self.group.clone());
        let dd = self.group.double();
        let diag = LagrangianSubalgebra::from_subspace(&dd, dd.diagonal(&t), &t)?;
        let points = self.factor_points(m);
        let mut total = 0.0;
        for (i, p) in points.iter().enumerate() {
            let v1 = self.factor_velocity(&points, i, &xs[i]);
            let v2 = self.factor_velocity(&points, i, &ys[i]);
            total += cartan.leaf_two_form(&diag, p, &v1, &v2)?;
        }
        // Iterated left-associated fusion: partial product velocities.
        let mut wx = self.factor_velocity(&points, 0, &xs[0]);
        let mut wy = self.factor_velocity(&points, 0, &ys[0]);
        for j in 1..points.len() {
            let vxj = self.factor_velocity(&points, j, &xs[j]);
            let vyj = self.factor_velocity(&points, j, &ys[j]);
            // With this sign the contraction axiom stays exact after fusion
            // and d omega equals the moment pullback of eta (in this
            // library's sign normalization of eta).
            total += fusion_two_form(&self.group, &points[j], &wx, &vxj, &wy, &vyj);
            let ad = self.group.adjoint(&self.group.inv(&points[j]));
            wx = &ad * wx + vxj;
            wy = &ad * wy + vyj;
        }
        Ok(self.omega_scale * total)
    }

    /// Chart tangent of the diagonal action of xi: every conjugator moves by
    /// exp(t xi).
    pub fn action_field(&self, xi: &DVector<f64>) -> Vec<DVector<f64>> {
        vec![xi.clone(); self.num_factors()]
    }

    /// Displace the point along a chart tangent.
    pub fn displace(&self, m: &MPoint, xs: &[DVector<f64>], t: f64) -> MPoint {
        MPoint {
            conj: m
                .conj
                .iter()
                .zip(xs)
                .map(|(h, x)| self.group.mul(&self.group.exp(&(x * t)), h))
                .collect(),
        }
    }
}

/// Residuals of the three axioms plus the moment equivariance check.
#[derive(Debug)]
pub struct AxiomReport {
    /// Worst finite-difference residual of d omega = (moment pullback of the
    /// bi-invariant 3-form, in this library's sign normalization).
    pub d_omega_residual: f64,
    /// Improvement factor of that residual when the step is halved
    /// (about 4 for a second-order scheme, unless at rounding level).
    pub d_omega_order: f64,
    /// Effective dimension of ker(omega) meet ker(T moment), excluding chart
    /// stabilizer directions (must be 0).
    pub joint_kernel_dim: usize,
    /// Worst residual of the contraction axiom
    /// i(xi_M) omega = -1/2 <xi, theta^L + theta^R paired with T moment>;
    /// exact (no differentiation).
    pub moment_residual: f64,
    /// Finite-difference residual of conjugation equivariance of the moment.
    pub equivariance_residual: f64,
}

impl AxiomReport {
    pub fn pass(&self, fd_step: f64) -> bool {
        let fd_tol = 50.0 * fd_step * fd_step;
        self.d_omega_residual < fd_tol.max(1e-9)
            && self.joint_kernel_dim == 0
            && self.moment_residual < 1e-10
            && self.equivariance_residual < fd_tol.max(1e-9)
    }
}

pub fn check_axioms<R: Rng>(
    space: &QHamSpace,
    samples: usize,
    rng: &mut R,
    fd_step: f64,
) -> Result<AxiomReport, QHamError> {
    let g = &space.group;
    let d = g.dim;
    let f = space.num_factors();
    let cartan = CartanAlgebroid::new(g.clone());
    let mut d_omega_residual: f64 = 0.0;
    let mut d_omega_half: f64 = 0.0;
    let mut joint_kernel_dim = 0;
    let mut moment_residual: f64 = 0.0;
    let mut equivariance_residual: f64 = 0.0;
    for _ in 0..samples {
        let m = space.random_point(rng, 0.8);
        let points = space.factor_points(&m);
        let phi = space.moment(&m);
        // (a) d omega + moment-pullback of eta, by central differences on
        // constant chart fields.  The chart motion h -> exp(t x) h is
        // right-invariant on each conjugator copy, so constant fields have
        // chart bracket -[x, y] factorwise.
        let xs = space.random_tangent(rng, 1.0);
        let ys = space.random_tangent(rng, 1.0);
        let zs = space.random_tangent(rng, 1.0);
        let domega = |h: f64| -> Result<f64, QHamError> {
            let dir = |a: &[DVector<f64>], b: &[DVector<f64>], c: &[DVector<f64>]| {
                let plus = space.displace(&m, a, h);
                let minus = space.displace(&m, a, -h);
                Ok::<f64, QHamError>(
                    (space.omega(&plus, b, c)? - space.omega(&minus, b, c)?) / (2.0 * h),
                )
            };
            let brk = |a: &[DVector<f64>], b: &[DVector<f64>]| -> Vec<DVector<f64>> {
                (0..f).map(|i| -g.bracket(&a[i], &b[i])).collect()
            };
            Ok(dir(&xs, &ys, &zs)? - dir(&ys, &xs, &zs)? + dir(&zs, &xs, &ys)?
                - space.omega(&m, &brk(&xs, &ys), &zs)?
                + space.omega(&m, &brk(&xs, &zs), &ys)?
                - space.omega(&m, &brk(&ys, &zs), &xs)?)
        };
        let vx = space.moment_velocity(&m, &xs);
        let vy = space.moment_velocity(&m, &ys);
        let vz = space.moment_velocity(&m, &zs);
        let eta = cartan.eta(&vx, &vy, &vz);
        d_omega_residual = d_omega_residual.max((domega(fd_step)? - eta).abs());
        d_omega_half = d_omega_half.max((domega(fd_step / 2.0)? - eta).abs());
        // (b) joint kernel on the chart, modulo stabilizer directions.
        let mut gram = DMatrix::zeros(f * d, f * d);
        let mut tphi = DMatrix::zeros(d, f * d);
        let basis: Vec<Vec<DVector<f64>>> = (0..f * d)
            .map(|j| {
                let mut e = vec![DVector::zeros(d); f];
                e[j / d][j % d] = 1.0;
                e
            })
            .collect();
        for (j, ej) in basis.iter().enumerate() {
            for (i, ei) in basis.iter().enumerate() {
                gram[(i, j)] = space.omega(&m, ei, ej)?;
            }
            tphi.set_column(j, &space.moment_velocity(&m, ej));
        }
        let mut stacked = DMatrix::zeros(f * d + d, f * d);
        stacked.view_mut((0, 0), (f * d, f * d)).copy_from(&gram);
        stacked.view_mut((f * d, 0), (d, f * d)).copy_from(&tphi);
        let ker = nullspace(&stacked, 1e-9);
        for c in 0..ker.ncols() {
            let u = ker.column(c);
            let mut moving = false;
            for i in 0..f {
                let xi = u.rows(i * d, d).into_owned();
                if space.factor_velocity(&points, i, &xi).amax() > 1e-8 {
                    moving = true;
                }
            }
            if moving {
                joint_kernel_dim += 1;
            }
        }
        // (c) contraction axiom, exact.
        let xi = g.random_algebra_vec(rng, 1.0);
        let act = space.action_field(&xi);
        let probe = space.random_tangent(rng, 1.0);
        let lhs = space.omega(&m, &act, &probe)?;
        let v = space.moment_velocity(&m, &probe);
        let rhs = -0.5 * g.inner(&xi, &(&v + g.adjoint(&phi) * &v));
        moment_residual = moment_residual.max((lhs - rhs).abs());
        // Moment equivariance under the diagonal action (finite difference
        // at the representation level).
        let h = fd_step;
        let plus = space.moment(&space.displace(&m, &act, h));
        let minus = space.moment(&space.displace(&m, &act, -h));
        let dphi = (&plus.m - &minus.m) / (2.0 * h);
        let xrep = g.rep_of(&xi);
        let expect = &xrep * &phi.m - &phi.m * &xrep;
        equivariance_residual = equivariance_residual.max((dphi - expect).amax());
    }
    let d_omega_order = if d_omega_half > 1e-13 {
        d_omega_residual / d_omega_half
    } else {
        f64::INFINITY
    };
    Ok(AxiomReport {
        d_omega_residual,
        d_omega_order,
        joint_kernel_dim,
        moment_residual,
        equivariance_residual,
    })
}

/// The lattice-side Hamiltonian space over a group-valued one: points are
/// pairs (m, A) with Hol(A) equal to the moment value, realized as based
/// gauge transforms of the constant connection with that holonomy.
#[derive(Debug, Clone)]
pub struct LoopHamSpace {
    pub space: QHamSpace,
    pub n: usize,
    pub chi: ChiProfile,
}

/// A sampled point of the lattice-side space.
#[derive(Debug, Clone)]
pub struct LPoint {
    pub m: MPoint,
    /// Based gauge chart coordinate (k_0 = k_n = identity).
    pub gauge: GaugeElement,
}

/// A tangent at an LPoint: a chart tangent of the group-valued space plus a
/// based node field moving the gauge coordinate by k_i(t) = exp(-t zeta_i) k_i
/// (the sign matches the gauge flow whose connection velocity is D_A zeta).
#[derive(Debug, Clone)]
pub struct LTangent {
    pub xs: Vec<DVector<f64>>,
    pub zeta: Vec<DVector<f64>>,
}

pub fn lift<R: Rng>(
    space: &QHamSpace,
    n: usize,
    chi: ChiProfile,
    rng: &mut R,
    fd_step: f64,
) -> Result<LoopHamSpace, QHamError> {
    let report = check_axioms(space, 4, rng, fd_step)?;
    if !report.pass(fd_step) {
        return Err(QHamError::AxiomFailure(format!("{report:?}")));
    }
    Ok(LoopHamSpace {
        space: space.clone(),
        n,
        chi,
    })
}

impl LoopHamSpace {
    /// The constant connection with holonomy equal to the moment value.
    pub fn base_connection(&self, m: &MPoint) -> Result<DiscreteConnection, QHamError> {
        let g = &self.space.group;
        let phi = self.space.moment(m);
        let x = g.log(&phi)?;
        Ok(DiscreteConnection::new(
            g.clone(),
            vec![x; self.n],
        )?)
    }

    pub fn connection(&self, p: &LPoint) -> Result<DiscreteConnection, QHamError> {
        Ok(self.base_connection(&p.m)?.gauge_act(&p.gauge)?)
    }

    pub fn identity_point(&self, m: MPoint) -> LPoint {
        LPoint {
            gauge: vec![self.space.group.identity(); self.n + 1],
            m,
        }
    }

    /// Based random gauge coordinate.
    pub fn random_based_gauge<R: Rng>(&self, rng: &mut R, scale: f64) -> GaugeElement {
        let g = &self.space.group;
        let mut k: GaugeElement = (0..=self.n).map(|_| g.random_element(rng, scale)).collect();
        k[0] = g.identity();
        k[self.n] = g.identity();
        k
    }

    /// Right-trivialized velocity cochain of the connection along a tangent
    /// (the moment-motion part by representation-level finite differences,
    /// the gauge part exactly as a covariant derivative of the based field).
    pub fn psi_velocity(
        &self,
        p: &LPoint,
        t: &LTangent,
        fd_step: f64,
    ) -> Result<IntervalCochain, QHamError> {
        let g = &self.space.group;
        let base = self.base_connection(&p.m)?;
        let conn = base.gauge_act(&p.gauge)?;
        // m-part: velocity of the constant base connection, transported by
        // the gauge coordinate.
        let plus = self.base_connection(&self.space.displace(&p.m, &t.xs, fd_step))?;
        let minus = self.base_connection(&self.space.displace(&p.m, &t.xs, -fd_step))?;
        let mut out = Vec::with_capacity(self.n);
        for i in 0..self.n {
            let du = (&plus.transitions[i].m - &minus.transitions[i].m) / (2.0 * fd_step);
            let rt = du * g.inv(&base.transitions[i]).m;
            let b = g.coords_of(&rt)? / base.delta;
            out.push(g.adjoint(&p.gauge[i]) * b);
        }
        // gauge part: exact.
        let dz = conn.covariant_derivative(&t.zeta);
        for i in 0..self.n {
            out[i] += dz[i].clone();
        }
        Ok(out)
    }

    /// sigma = (2-form on the group-valued factor) + (varpi on the
    /// connection factor), by construction.
    pub fn sigma(
        &self,
        p: &LPoint,
        t1: &LTangent,
        t2: &LTangent,
        fd_step: f64,
    ) -> Result<f64, QHamError> {
        let conn = self.connection(p)?;
        let b1 = self.psi_velocity(p, t1, fd_step)?;
        let b2 = self.psi_velocity(p, t2, fd_step)?;
        Ok(self.space.omega(&p.m, &t1.xs, &t2.xs)? + conn.varpi(&b1, &b2, self.chi)?)
    }

    /// The action tangent of a diagonal-boundary node field xi (xi_0 = xi_n):
    /// the gauge flow k = exp(-t xi) has connection velocity D_A xi and
    /// moves the holonomy by conjugation with exp(-t xi_0).  In the
    /// (m, based gauge) chart this splits into the group-valued motion by
    /// -xi_0 on every conjugator and the based gauge motion by
    /// zeta_i = xi_i - Ad_{k_i} xi_0, which absorbs the constant gauge that
    /// realigns the base connection.
    pub fn action_tangent(&self, p: &LPoint, xi: &[DVector<f64>]) -> LTangent {
        let g = &self.space.group;
        let bar = xi[0].clone();
        let zeta = xi
            .iter()
            .zip(&p.gauge)
            .map(|(x, k)| x - g.adjoint(k) * &bar)
            .collect();
        LTangent {
            xs: vec![-&bar; self.space.num_factors()],
            zeta,
        }
    }

    /// Residual of the moment condition
    /// sigma(xi_M, t) = <d Psi(t), xi> for a diagonal-boundary node field
    /// (the sign pairs with the exp(-t xi) gauge flow convention).
    pub fn moment_condition_residual(
        &self,
        p: &LPoint,
        xi: &[DVector<f64>],
        t: &LTangent,
        fd_step: f64,
    ) -> Result<f64, QHamError> {
        let conn = self.connection(p)?;
        let act = self.action_tangent(p, xi);
        let lhs = self.sigma(p, &act, t, fd_step)?;
        let b = self.psi_velocity(p, t, fd_step)?;
        let rhs = conn.cochain_node_pairing(&b, &xi.to_vec());
        Ok((lhs - rhs).abs())
    }

    /// Recover the group-valued data at a gauge section: the moment from the
    /// holonomy and the 2-form as sigma minus the connection-factor term.
    /// Section-independence of the result is the content of the
    /// correspondence and is asserted in tests.
    pub fn reduce_omega(
        &self,
        p: &LPoint,
        xs: &[DVector<f64>],
        ys: &[DVector<f64>],
        fd_step: f64,
    ) -> Result<f64, QHamError> {
        let conn = self.connection(p)?;
        let t1 = LTangent {
            xs: xs.to_vec(),
            zeta: vec![DVector::zeros(self.space.group.dim); self.n + 1],
        };
        let t2 = LTangent {
            xs: ys.to_vec(),
            zeta: vec![DVector::zeros(self.space.group.dim); self.n + 1],
        };
        let b1 = self.psi_velocity(p, &t1, fd_step)?;
        let b2 = self.psi_velocity(p, &t2, fd_step)?;
        Ok(self.sigma(p, &t1, &t2, fd_step)? - conn.varpi(&b1, &b2, self.chi)?)
    }

    pub fn reduce_moment(&self, p: &LPoint) -> Result<GroupElement, QHamError> {
        Ok(self.connection(p)?.holonomy().clone())
    }
}
