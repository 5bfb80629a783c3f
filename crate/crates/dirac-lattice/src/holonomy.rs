//! Lattice-discretized connections over the unit interval.
//!
//! A connection is stored through its interval transitions
//! `u_i = exp(delta * A_i)`, which makes holonomy and the gauge action
//! group-exact: all discretization error lives in the `A_i <-> u_i`
//! conversion.  Tangent vectors to the connection space are interval
//! cochains `a` identified with the right-trivialized velocities
//! `du_i = delta * a_i * u_i`; under this identification gauge flows,
//! holonomy differentials, and the generator pairing identity are exact
//! at every lattice size.
//!
//! The covector average `m_i(xi) = (xi_i + Ad_{u_i} xi_{i+1}) / 2` is the
//! unique weighting for which the symmetrized pairing of two generators
//! telescopes to the boundary term exactly; see `generator`.

use crate::liegroup::{GroupElement, LieError, LieGroup};
use crate::linalg::{MetrizedSpace, Subspace, TolerancePolicy};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use thiserror::Error;

/// Lie-algebra value at every node `0..=n`.
pub type NodeField = Vec<DVector<f64>>;
/// Lie-algebra value on every interval `0..n` (tangent or covector part).
pub type IntervalCochain = Vec<DVector<f64>>;
/// Group element at every node `0..=n`.
pub type GaugeElement = Vec<GroupElement>;

/// Section of the tangent-covector fiber over the discrete connection space,
/// in packed fiber coordinates.
pub type FiberSectionFn<'a> = &'a dyn Fn(&DiscreteConnection) -> DVector<f64>;

#[derive(Debug, Error)]
pub enum HolonomyError {
    #[error(
        "interval {0}: ||delta * A|| = {1:.3e} is not below pi; \
         the transition leaves the principal log branch — raise N"
    )]
    BranchViolation(usize, f64),
    #[error("expected {expected} entries, got {got}")]
    Length { expected: usize, got: usize },
    #[error(transparent)]
    Lie(#[from] LieError),
    #[error("tangent decomposition residual {0:.3e} exceeds tolerance")]
    SplitResidual(f64),
}

/// Interpolation profile for principal-connection lifts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChiProfile {
    /// chi(t) = t.
    Linear,
    /// chi(t) = 3t^2 - 2t^3 (flat at both endpoints).
    Smoothstep,
}

impl ChiProfile {
    pub fn eval(&self, t: f64) -> f64 {
        match self {
            ChiProfile::Linear => t,
            ChiProfile::Smoothstep => t * t * (3.0 - 2.0 * t),
        }
    }

    pub fn by_name(name: &str) -> Option<ChiProfile> {
        match name {
            "linear" => Some(ChiProfile::Linear),
            "smoothstep" => Some(ChiProfile::Smoothstep),
            _ => None,
        }
    }
}

/// A lattice connection: samples `A_i`, cached transitions and parallel
/// frames.  Immutable after construction.
#[derive(Debug, Clone)]
pub struct DiscreteConnection {
    pub group: LieGroup,
    pub n: usize,
    pub delta: f64,
    /// A_i, i = 0..n-1 (algebra per unit time).
    pub samples: Vec<DVector<f64>>,
    /// u_i = exp(delta * A_i).
    pub transitions: Vec<GroupElement>,
    /// g_0 = e, g_{i+1} = g_i u_i.
    pub frames: Vec<GroupElement>,
}

impl DiscreteConnection {
    pub fn new(group: LieGroup, samples: Vec<DVector<f64>>) -> Result<Self, HolonomyError> {
        let n = samples.len();
        if n == 0 {
            return Err(HolonomyError::Length { expected: 1, got: 0 });
        }
        let delta = 1.0 / n as f64;
        for (i, a) in samples.iter().enumerate() {
            let norm = delta * a.norm();
            if norm >= std::f64::consts::PI {
                return Err(HolonomyError::BranchViolation(i, norm));
            }
        }
        let transitions: Vec<GroupElement> =
            samples.iter().map(|a| group.exp(&(a * delta))).collect();
        let frames = Self::compute_frames(&group, &transitions);
        Ok(DiscreteConnection { group, n, delta, samples, transitions, frames })
    }

    /// Rebuild from transitions (used by the gauge action and by chart
    /// displacements); recovers A_i = log(u_i)/delta on the principal branch.
    pub fn from_transitions(
        group: LieGroup,
        transitions: Vec<GroupElement>,
    ) -> Result<Self, HolonomyError> {
        let n = transitions.len();
        if n == 0 {
            return Err(HolonomyError::Length { expected: 1, got: 0 });
        }
        let delta = 1.0 / n as f64;
        let mut samples = Vec::with_capacity(n);
        for (i, u) in transitions.iter().enumerate() {
            let c = group
                .log(u)
                .map_err(|_| HolonomyError::BranchViolation(i, std::f64::consts::PI))?;
            // A transition on (or numerically at) the cut has an ambiguous
            // principal log; refuse it rather than silently pick a sign.
            if c.norm() >= std::f64::consts::PI * (1.0 - 1e-9) {
                return Err(HolonomyError::BranchViolation(i, c.norm()));
            }
            samples.push(c / delta);
        }
        let frames = Self::compute_frames(&group, &transitions);
        Ok(DiscreteConnection { group, n, delta, samples, transitions, frames })
    }

    fn compute_frames(group: &LieGroup, transitions: &[GroupElement]) -> Vec<GroupElement> {
        let mut frames = Vec::with_capacity(transitions.len() + 1);
        frames.push(group.identity());
        for u in transitions {
            let last = frames.last().unwrap();
            frames.push(group.mul(last, u));
        }
        frames
    }

    pub fn zero(group: LieGroup, n: usize) -> Self {
        let d = group.dim;
        Self::new(group, vec![DVector::zeros(d); n]).unwrap()
    }

    pub fn random<R: Rng>(group: LieGroup, n: usize, rng: &mut R, scale: f64) -> Self {
        let samples = (0..n)
            .map(|_| group.random_algebra_vec(rng, scale))
            .collect();
        Self::new(group, samples).expect("random connection within branch")
    }

    pub fn dim_g(&self) -> usize {
        self.group.dim
    }

    /// Dimension of the tangent-covector fiber: 2 * n * dim g.
    pub fn fiber_dim(&self) -> usize {
        2 * self.n * self.group.dim
    }

    /// Dimension of the node-field space: (n + 1) * dim g.
    pub fn node_dim(&self) -> usize {
        (self.n + 1) * self.group.dim
    }

    /// Parallel frame g with g_0 = e, g_{i+1} = g_i u_i.
    pub fn parallel_frame(&self) -> &[GroupElement] {
        &self.frames
    }

    /// Hol(A) = u_0 u_1 ... u_{n-1} = g_n.
    pub fn holonomy(&self) -> &GroupElement {
        &self.frames[self.n]
    }

    /// Gauge action on transitions: u_i -> k_i u_i k_{i+1}^{-1}.
    pub fn gauge_act(&self, k: &GaugeElement) -> Result<Self, HolonomyError> {
        if k.len() != self.n + 1 {
            return Err(HolonomyError::Length { expected: self.n + 1, got: k.len() });
        }
        let trans = (0..self.n)
            .map(|i| {
                let ki_u = self.group.mul(&k[i], &self.transitions[i]);
                self.group.mul(&ki_u, &self.group.inv(&k[i + 1]))
            })
            .collect();
        Self::from_transitions(self.group.clone(), trans)
    }

    /// Covariant derivative: (D_A xi)_i = (Ad_{u_i} xi_{i+1} - xi_i) / delta.
    pub fn covariant_derivative(&self, xi: &NodeField) -> IntervalCochain {
        (0..self.n)
            .map(|i| {
                (self.group.adjoint(&self.transitions[i]) * &xi[i + 1] - &xi[i]) / self.delta
            })
            .collect()
    }

    /// Twisted trapezoid average m_i(xi) = (xi_i + Ad_{u_i} xi_{i+1}) / 2.
    pub fn m_average(&self, xi: &NodeField) -> IntervalCochain {
        (0..self.n)
            .map(|i| {
                (&xi[i] + self.group.adjoint(&self.transitions[i]) * &xi[i + 1]) * 0.5
            })
            .collect()
    }

    /// Generator rho(xi) = (D_A xi, m(xi)) in packed fiber coordinates.
    pub fn generator(&self, xi: &NodeField) -> DVector<f64> {
        self.pack_fiber(&self.covariant_derivative(xi), &self.m_average(xi))
    }

    pub fn pack_fiber(&self, a: &IntervalCochain, mu: &IntervalCochain) -> DVector<f64> {
        let d = self.group.dim;
        let mut out = DVector::zeros(self.fiber_dim());
        for i in 0..self.n {
            out.rows_mut(i * d, d).copy_from(&a[i]);
            out.rows_mut((self.n + i) * d, d).copy_from(&mu[i]);
        }
        out
    }

    pub fn unpack_fiber(&self, x: &DVector<f64>) -> (IntervalCochain, IntervalCochain) {
        let d = self.group.dim;
        let a = (0..self.n).map(|i| x.rows(i * d, d).into_owned()).collect();
        let mu = (0..self.n)
            .map(|i| x.rows((self.n + i) * d, d).into_owned())
            .collect();
        (a, mu)
    }

    pub fn pack_nodes(&self, xi: &NodeField) -> DVector<f64> {
        let d = self.group.dim;
        let mut out = DVector::zeros(self.node_dim());
        for (i, v) in xi.iter().enumerate() {
            out.rows_mut(i * d, d).copy_from(v);
        }
        out
    }

    pub fn unpack_nodes(&self, x: &DVector<f64>) -> NodeField {
        let d = self.group.dim;
        (0..=self.n).map(|i| x.rows(i * d, d).into_owned()).collect()
    }

    /// Metric on the fiber: <(a, mu), (b, nu)> = sum_i delta (mu_i.b_i + a_i.nu_i).
    pub fn fiber_metric(&self) -> DMatrix<f64> {
        let d = self.group.dim;
        let nd = self.n * d;
        let mut m = DMatrix::zeros(2 * nd, 2 * nd);
        for i in 0..self.n {
            let block = &self.group.metric * self.delta;
            m.view_mut((i * d, nd + i * d), (d, d)).copy_from(&block);
            m.view_mut((nd + i * d, i * d), (d, d)).copy_from(&block);
        }
        m
    }

    pub fn fiber_space(&self, tol: &TolerancePolicy) -> MetrizedSpace {
        MetrizedSpace::new(self.fiber_metric(), tol).expect("fiber metric nondegenerate")
    }

    /// Fiber pairing evaluated directly (exact form of the metric).
    pub fn fiber_pairing(&self, x: &DVector<f64>, y: &DVector<f64>) -> f64 {
        let (a1, m1) = self.unpack_fiber(x);
        let (a2, m2) = self.unpack_fiber(y);
        let mut s = 0.0;
        for i in 0..self.n {
            s += self.delta
                * (self.group.inner(&m1[i], &a2[i]) + self.group.inner(&a1[i], &m2[i]));
        }
        s
    }

    /// L2 inner product of two tangent cochains (optional fiber metric).
    pub fn l2_inner(&self, a: &IntervalCochain, b: &IntervalCochain) -> f64 {
        (0..self.n)
            .map(|i| self.delta * self.group.inner(&a[i], &b[i]))
            .sum()
    }

    /// Lifted gauge action on the fiber: both cochain components transform
    /// by Ad_{k_i} on interval i (an exact isometry).
    pub fn gauge_act_fiber(&self, k: &GaugeElement, x: &DVector<f64>) -> DVector<f64> {
        let (a, mu) = self.unpack_fiber(x);
        let ad: Vec<DMatrix<f64>> = (0..self.n).map(|i| self.group.adjoint(&k[i])).collect();
        let a2 = (0..self.n).map(|i| &ad[i] * &a[i]).collect();
        let m2 = (0..self.n).map(|i| &ad[i] * &mu[i]).collect();
        self.pack_fiber(&a2, &m2)
    }

    /// Gauge action on node fields: xi_i -> Ad_{k_i} xi_i.
    pub fn gauge_act_nodes(&self, k: &GaugeElement, xi: &NodeField) -> NodeField {
        xi.iter()
            .enumerate()
            .map(|(i, v)| self.group.adjoint(&k[i]) * v)
            .collect()
    }

    /// The generator map as a matrix: node coordinates -> fiber coordinates.
    pub fn rho_matrix(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.fiber_dim(), self.node_dim());
        for j in 0..self.node_dim() {
            let mut e = DVector::zeros(self.node_dim());
            e[j] = 1.0;
            let xi = self.unpack_nodes(&e);
            m.set_column(j, &self.generator(&xi));
        }
        m
    }

    /// Basis of g_I^(s) = { xi : (xi_0, xi_n) in s } in node coordinates,
    /// for s a subspace of the double g-bar (+) g (dimension 2 dim g).
    pub fn boundary_node_basis(&self, s: &Subspace) -> DMatrix<f64> {
        let d = self.group.dim;
        let interior = (self.n - 1) * d;
        let k = s.dim();
        let mut basis = DMatrix::zeros(self.node_dim(), interior + k);
        for j in 0..interior {
            basis[(d + j, j)] = 1.0;
        }
        for c in 0..k {
            let col = s.basis.column(c);
            for r in 0..d {
                basis[(r, interior + c)] = col[r];
                basis[(self.n * d + r, interior + c)] = col[d + r];
            }
        }
        basis
    }

    /// E^(s): span of generators over g_I^(s).
    pub fn dirac_fiber(&self, s: &Subspace, tol: &TolerancePolicy) -> Subspace {
        let span = self.rho_matrix() * self.boundary_node_basis(s);
        Subspace::from_span(self.fiber_dim(), &span, tol)
    }

    /// omega(xi1, xi2) = sum_i delta * m_i(xi1) . (D_A xi2)_i.
    pub fn orbit_two_form(&self, xi1: &NodeField, xi2: &NodeField) -> f64 {
        let m1 = self.m_average(xi1);
        let d2 = self.covariant_derivative(xi2);
        (0..self.n)
            .map(|i| self.delta * self.group.inner(&m1[i], &d2[i]))
            .sum()
    }

    /// Lie-Poisson bracket value of two affine functions with node fields
    /// xi1, xi2, split into the A-independent cocycle part and the remainder.
    pub fn affine_poisson_bracket(&self, xi1: &NodeField, xi2: &NodeField) -> AffineBracket {
        let value = self.orbit_two_form(xi2, xi1); // sum delta (D xi1) . m(xi2)
        // Cocycle part: the same expression with every Ad_{u_i} replaced by
        // the identity (the flat-connection value).
        let mut cocycle = 0.0;
        for i in 0..self.n {
            let d1 = (&xi1[i + 1] - &xi1[i]) / self.delta;
            let m2 = (&xi2[i] + &xi2[i + 1]) * 0.5;
            cocycle += self.delta * self.group.inner(&d1, &m2);
        }
        AffineBracket { value, cocycle, affine: value - cocycle }
    }

    /// Nodewise algebra bracket of two node fields.
    pub fn nodewise_bracket(&self, xi1: &NodeField, xi2: &NodeField) -> NodeField {
        (0..=self.n)
            .map(|i| self.group.bracket(&xi1[i], &xi2[i]))
            .collect()
    }

    /// Cyclic Jacobi defect of the affine bracket (the discretization anomaly
    /// of the current-algebra cocycle; vanishes in the continuum limit for
    /// smooth fields).
    pub fn jacobiator(&self, xi1: &NodeField, xi2: &NodeField, xi3: &NodeField) -> f64 {
        let b12 = self.nodewise_bracket(xi1, xi2);
        let b23 = self.nodewise_bracket(xi2, xi3);
        let b31 = self.nodewise_bracket(xi3, xi1);
        self.affine_poisson_bracket(&b12, xi3).value
            + self.affine_poisson_bracket(&b23, xi1).value
            + self.affine_poisson_bracket(&b31, xi2).value
    }

    /// Node field of the principal-connection lift of X:
    /// xi_i = chi(t_i) Ad_{g_i^{-1} g_n} X.
    pub fn lift_node_field(&self, x: &DVector<f64>, chi: ChiProfile) -> NodeField {
        (0..=self.n)
            .map(|i| {
                let h = self
                    .group
                    .mul(&self.group.inv(&self.frames[i]), &self.frames[self.n]);
                self.group.adjoint(&h) * x * chi.eval(i as f64 * self.delta)
            })
            .collect()
    }

    /// Horizontal lift of X at A: the tangent cochain D_A xi of the lift
    /// node field.
    pub fn connection_lift(&self, x: &DVector<f64>, chi: ChiProfile) -> IntervalCochain {
        self.covariant_derivative(&self.lift_node_field(x, chi))
    }

    /// The same lift computed through representation-level conjugation
    /// (independent numerical route, used as a cross-check oracle):
    /// xi_i = -Ad_{g_i^{-1}} kappa_i with kappa_i = -chi(t_i) * g_n X g_n^{-1}.
    pub fn caloron_lift_node_field(
        &self,
        x: &DVector<f64>,
        chi: ChiProfile,
    ) -> Result<NodeField, LieError> {
        let gn = &self.frames[self.n].m;
        let gn_inv = &self.group.inv(&self.frames[self.n]).m;
        let kappa_dir = gn * self.group.rep_of(x) * gn_inv;
        (0..=self.n)
            .map(|i| {
                let gi = &self.frames[i].m;
                let gi_inv = &self.group.inv(&self.frames[i]).m;
                let conj = gi_inv * &kappa_dir * gi;
                Ok(self.group.coords_of(&conj)? * chi.eval(i as f64 * self.delta))
            })
            .collect()
    }

    /// Differential of the holonomy in left trivialization (exact in the
    /// right-trivialized chart): T Hol(a) = delta * sum_i Ad_{g_n^{-1} g_i} a_i.
    pub fn holonomy_differential(&self, a: &IntervalCochain) -> DVector<f64> {
        let d = self.group.dim;
        let mut out = DVector::zeros(d);
        let gn_inv = self.group.inv(&self.frames[self.n]);
        for i in 0..self.n {
            let h = self.group.mul(&gn_inv, &self.frames[i]);
            out += self.group.adjoint(&h) * &a[i] * self.delta;
        }
        out
    }

    /// Decompose a tangent cochain as lift(X; chi) + D_A zeta with zeta in
    /// the based gauge algebra (zeta_0 = zeta_n = 0).  Returns (X, zeta).
    pub fn split_tangent(
        &self,
        a: &IntervalCochain,
        chi: ChiProfile,
    ) -> Result<(DVector<f64>, NodeField), HolonomyError> {
        let d = self.group.dim;
        let nd = self.n * d;
        let mut m = DMatrix::zeros(nd, nd);
        // First d columns: lifts of metric-coordinate basis vectors.
        for k in 0..d {
            let mut e = DVector::zeros(d);
            e[k] = 1.0;
            let lift = self.connection_lift(&e, chi);
            for i in 0..self.n {
                m.view_mut((i * d, k), (d, 1)).copy_from(&lift[i]);
            }
        }
        // Remaining columns: D_A of interior-node unit fields.
        for j in 0..(self.n - 1) * d {
            let mut xi = vec![DVector::zeros(d); self.n + 1];
            xi[1 + j / d][j % d] = 1.0;
            let da = self.covariant_derivative(&xi);
            for i in 0..self.n {
                m.view_mut((i * d, d + j), (d, 1)).copy_from(&da[i]);
            }
        }
        let mut rhs = DVector::zeros(nd);
        for i in 0..self.n {
            rhs.rows_mut(i * d, d).copy_from(&a[i]);
        }
        let sol = m
            .clone()
            .lu()
            .solve(&rhs)
            .ok_or(HolonomyError::SplitResidual(f64::INFINITY))?;
        let res = (&m * &sol - &rhs).amax();
        if res > 1e-8 * (1.0 + rhs.amax()) {
            return Err(HolonomyError::SplitResidual(res));
        }
        let x = sol.rows(0, d).into_owned();
        let mut zeta = vec![DVector::zeros(d); self.n + 1];
        for j in 0..(self.n - 1) * d {
            zeta[1 + j / d][j % d] = sol[d + j];
        }
        Ok((x, zeta))
    }

    /// Principal-connection form: the vertical (based-gauge) component of a
    /// tangent cochain.
    pub fn theta(
        &self,
        a: &IntervalCochain,
        chi: ChiProfile,
    ) -> Result<NodeField, HolonomyError> {
        Ok(self.split_tangent(a, chi)?.1)
    }

    /// Matrix of the covariant derivative: packed node coordinates to packed
    /// interval coordinates.
    pub fn covariant_derivative_matrix(&self) -> DMatrix<f64> {
        let d = self.group.dim;
        let nd = self.n * d;
        let mut m = DMatrix::zeros(nd, nd + d);
        for i in 0..self.n {
            let ad = self.group.adjoint(&self.transitions[i]);
            m.view_mut((i * d, (i + 1) * d), (d, d)).copy_from(&(&ad / self.delta));
            for r in 0..d {
                m[(i * d + r, i * d + r)] = -1.0 / self.delta;
            }
        }
        m
    }

    /// Matrix of the twisted trapezoid average: packed node coordinates to
    /// packed interval coordinates.
    pub fn m_average_matrix(&self) -> DMatrix<f64> {
        let d = self.group.dim;
        let nd = self.n * d;
        let mut m = DMatrix::zeros(nd, nd + d);
        for i in 0..self.n {
            let ad = self.group.adjoint(&self.transitions[i]);
            m.view_mut((i * d, (i + 1) * d), (d, d)).copy_from(&(&ad * 0.5));
            for r in 0..d {
                m[(i * d + r, i * d + r)] = 0.5;
            }
        }
        m
    }

    /// Matrix of the connection form theta: packed tangent cochain
    /// coordinates to packed node coordinates (one LU factorization shared
    /// across all right-hand sides).
    pub fn theta_matrix(&self, chi: ChiProfile) -> Result<DMatrix<f64>, HolonomyError> {
        let d = self.group.dim;
        let nd = self.n * d;
        let mut m = DMatrix::zeros(nd, nd);
        for k in 0..d {
            let mut e = DVector::zeros(d);
            e[k] = 1.0;
            let lift = self.connection_lift(&e, chi);
            for i in 0..self.n {
                m.view_mut((i * d, k), (d, 1)).copy_from(&lift[i]);
            }
        }
        for j in 0..(self.n - 1) * d {
            let mut xi = vec![DVector::zeros(d); self.n + 1];
            xi[1 + j / d][j % d] = 1.0;
            let da = self.covariant_derivative(&xi);
            for i in 0..self.n {
                m.view_mut((i * d, d + j), (d, 1)).copy_from(&da[i]);
            }
        }
        let lu = m.clone().lu();
        let sol = lu
            .solve(&DMatrix::identity(nd, nd))
            .ok_or(HolonomyError::SplitResidual(f64::INFINITY))?;
        let res = (&m * &sol - DMatrix::<f64>::identity(nd, nd)).amax();
        if res > 1e-7 {
            return Err(HolonomyError::SplitResidual(res));
        }
        // Rows d.. of the solution are the interior node values of zeta;
        // expand to full node coordinates with zero endpoints.
        let mut theta = DMatrix::zeros(nd + d, nd);
        theta
            .view_mut((d, 0), ((self.n - 1) * d, nd))
            .copy_from(&sol.view((d, 0), ((self.n - 1) * d, nd)));
        Ok(theta)
    }

    /// Matrix of the two-form varpi on packed tangent cochains:
    /// varpi(a, b) = a^T W b.
    pub fn varpi_matrix(&self, chi: ChiProfile) -> Result<DMatrix<f64>, HolonomyError> {
        let d = self.group.dim;
        let nd = self.n * d;
        // Pairing matrix: <c, xi> = c^T P xi_packed.
        let mut gblk = DMatrix::zeros(nd, nd);
        for i in 0..self.n {
            gblk.view_mut((i * d, i * d), (d, d))
                .copy_from(&(&self.group.metric * self.delta));
        }
        let p = &gblk * self.m_average_matrix();
        let theta = self.theta_matrix(chi)?;
        let pt = &p * &theta;
        let dtheta = self.covariant_derivative_matrix() * &theta;
        let second = dtheta.transpose() * &pt;
        Ok(-(&pt) + pt.transpose() + (&second - second.transpose()) * 0.5)
    }

    /// Pairing of an interval cochain against a node field through the
    /// twisted trapezoid average: sum_i delta * c_i . m_i(xi).
    pub fn cochain_node_pairing(&self, c: &IntervalCochain, xi: &NodeField) -> f64 {
        let m = self.m_average(xi);
        (0..self.n)
            .map(|i| self.delta * self.group.inner(&c[i], &m[i]))
            .sum()
    }

    /// varpi(a1, a2) = -(<a1, theta(a2)> - <a2, theta(a1)>)
    ///                 + (<D theta(a1), theta(a2)> - <D theta(a2), theta(a1)>)/2.
    pub fn varpi(
        &self,
        a1: &IntervalCochain,
        a2: &IntervalCochain,
        chi: ChiProfile,
    ) -> Result<f64, HolonomyError> {
        let t1 = self.theta(a1, chi)?;
        let t2 = self.theta(a2, chi)?;
        let first = self.cochain_node_pairing(a1, &t2) - self.cochain_node_pairing(a2, &t1);
        let d1 = self.covariant_derivative(&t1);
        let d2 = self.covariant_derivative(&t2);
        let second =
            self.cochain_node_pairing(&d1, &t2) - self.cochain_node_pairing(&d2, &t1);
        Ok(-first + 0.5 * second)
    }

    /// Displace the connection along a tangent cochain in the
    /// right-trivialized chart: u_i -> exp(t * delta * x_i) u_i.
    pub fn displace(&self, x: &IntervalCochain, t: f64) -> Result<Self, HolonomyError> {
        let trans = (0..self.n)
            .map(|i| {
                let step = self.group.exp(&(&x[i] * (t * self.delta)));
                self.group.mul(&step, &self.transitions[i])
            })
            .collect();
        Self::from_transitions(self.group.clone(), trans)
    }

    /// Exact gauge flow generated by a node field: k_i = exp(-t * xi_i); the
    /// velocity of this flow at t = 0 is the cochain D_A xi.
    pub fn gauge_flow(&self, xi: &NodeField, t: f64) -> Result<Self, HolonomyError> {
        let k: GaugeElement = xi.iter().map(|v| self.group.exp(&(v * (-t)))).collect();
        self.gauge_act(&k)
    }

    /// Central-difference derivative of a fiber section along a tangent
    /// cochain direction.
    pub fn fiber_chart_derivative(
        &self,
        s: FiberSectionFn,
        x: &IntervalCochain,
        h: f64,
    ) -> Result<DVector<f64>, HolonomyError> {
        let plus = s(&self.displace(x, h)?);
        let minus = s(&self.displace(x, -h)?);
        Ok((plus - minus) / (2.0 * h))
    }

    /// Dorfman bracket of two fiber sections over the discrete connection
    /// space (untwisted: the structure upstairs carries no 3-form).  The
    /// frame is the right-trivialized coordinate frame, whose vector-field
    /// brackets are -delta [x_i, y_i] per interval.
    pub fn ambient_courant_bracket(
        &self,
        s1: FiberSectionFn,
        s2: FiberSectionFn,
        h: f64,
    ) -> Result<DVector<f64>, HolonomyError> {
        let d = self.group.dim;
        let (v1, mu1) = self.unpack_fiber(&s1(self));
        let (v2, mu2) = self.unpack_fiber(&s2(self));
        let (dv1_a2, dv1_m2) = self.unpack_fiber(&self.fiber_chart_derivative(s2, &v1, h)?);
        let (dv2_a1, dv2_m1) = self.unpack_fiber(&self.fiber_chart_derivative(s1, &v2, h)?);
        // Vector part: [v1, v2]_vf in the chart frame.
        let v_out: IntervalCochain = (0..self.n)
            .map(|i| {
                &dv1_a2[i] - &dv2_a1[i]
                    - self.group.bracket(&v1[i], &v2[i]) * self.delta
            })
            .collect();
        // Covector part per frame direction e_{(i,k)}.
        let pair_at = |c: &IntervalCochain, i: usize, w: &DVector<f64>| -> f64 {
            self.delta * self.group.inner(&c[i], w)
        };
        let ginv = self
            .group
            .metric
            .clone()
            .lu();
        let mut mu_out: IntervalCochain = vec![DVector::zeros(d); self.n];
        for i in 0..self.n {
            let mut p = DVector::zeros(d);
            for k in 0..d {
                let mut ek = DVector::zeros(d);
                ek[k] = 1.0;
                let mut e = vec![DVector::zeros(d); self.n];
                e[i] = ek.clone();
                let (de_a1, de_m1) = self.unpack_fiber(&self.fiber_chart_derivative(s1, &e, h)?);
                // Frame brackets with the unit direction.
                let beta_v1_e = self.group.bracket(&v1[i], &ek) * (-self.delta);
                let beta_v2_e = self.group.bracket(&v2[i], &ek) * (-self.delta);
                // (L_{v1} mu2)(e) = D_{v1}<mu2,e> + <mu2, D_e v1> - <mu2, beta(v1,e)>.
                let mut lie = pair_at(&dv1_m2, i, &ek);
                for j in 0..self.n {
                    lie += self.delta * self.group.inner(&mu2[j], &de_a1[j]);
                }
                lie -= pair_at(&mu2, i, &beta_v1_e);
                // (i_{v2} d mu1)(e) = D_{v2}<mu1,e> - D_e<mu1, v2(A)>
                //                    - <mu1, beta(v2(A), e)>.
                let mut dmu = pair_at(&dv2_m1, i, &ek);
                for j in 0..self.n {
                    dmu -= self.delta * self.group.inner(&de_m1[j], &v2[j]);
                }
                dmu -= pair_at(&mu1, i, &beta_v2_e);
                p[k] = lie - dmu;
            }
            // p = delta * G * mu_out_i.
            mu_out[i] = ginv.solve(&p).expect("metric solve") / self.delta;
        }
        Ok(self.pack_fiber(&v_out, &mu_out))
    }

    /// Generator section xi |-> rho_A(xi) over the connection space.
    pub fn generator_section(&self, xi: NodeField) -> impl Fn(&DiscreteConnection) -> DVector<f64> {
        move |a: &DiscreteConnection| a.generator(&xi)
    }

    /// The circle-model algebroid fiber: node fields with free independent
    /// endpoints (all of g_I), pushed through the generator map.
    pub fn circle_algebroid_fiber(&self, tol: &TolerancePolicy) -> Subspace {
        Subspace::from_span(self.fiber_dim(), &self.rho_matrix(), tol)
    }

    /// Exact covector correction in the lattice generator bracket identity
    /// [[rho(xi1), rho(xi2)]] = rho([xi1, xi2]) + (0, nu):
    /// nu_i = (delta^2 / 2) [D_A xi1, D_A xi2]_i.  This is the lattice
    /// counterpart of the continuum bracket anomaly; it vanishes at O(delta^2)
    /// for smooth fields and identically for covariantly constant ones.
    pub fn bracket_defect(&self, xi1: &NodeField, xi2: &NodeField) -> DVector<f64> {
        let d1 = self.covariant_derivative(xi1);
        let d2 = self.covariant_derivative(xi2);
        let nu: IntervalCochain = (0..self.n)
            .map(|i| self.group.bracket(&d1[i], &d2[i]) * (self.delta * self.delta / 2.0))
            .collect();
        let zero = vec![DVector::zeros(self.group.dim); self.n];
        self.pack_fiber(&zero, &nu)
    }

    /// Sample a smooth profile f: [0,1] -> g at the lattice nodes.
    pub fn sample_profile(&self, f: &dyn Fn(f64) -> DVector<f64>) -> NodeField {
        (0..=self.n).map(|i| f(i as f64 * self.delta)).collect()
    }

    pub fn random_node_field<R: Rng>(&self, rng: &mut R, scale: f64) -> NodeField {
        (0..=self.n)
            .map(|_| self.group.random_algebra_vec(rng, scale))
            .collect()
    }

    pub fn random_cochain<R: Rng>(&self, rng: &mut R, scale: f64) -> IntervalCochain {
        (0..self.n)
            .map(|_| self.group.random_algebra_vec(rng, scale))
            .collect()
    }

    pub fn random_gauge<R: Rng>(&self, rng: &mut R, scale: f64) -> GaugeElement {
        (0..=self.n)
            .map(|_| self.group.random_element(rng, scale))
            .collect()
    }
}

/// Value of the affine Lie-Poisson bracket split into its A-independent
/// central part and the remainder linear in the connection.
#[derive(Debug, Clone)]
pub struct AffineBracket {
    pub value: f64,
    pub cocycle: f64,
    pub affine: f64,
}
