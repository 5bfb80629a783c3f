//! Fiberwise coisotropic reduction of the lattice-connection algebroid and
//! the comparisons that tie it back to the group-level Cartan model.
//!
//! At a fixed connection A, the generators span the coisotropic
//! C = rho(g_I) of dimension (n+1)d; its orthogonal C-perp = rho(based
//! fields) has dimension (n-1)d, and the quotient C/C-perp is 2d-dimensional.
//! The labeling map rho(xi) -> (xi_0, xi_n) identifies the quotient with the
//! double algebra isometrically (the pairing identity makes this exact to
//! rounding), with the base point labeled by Hol(A).

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::cartan::CartanAlgebroid;
use crate::holonomy::{ChiProfile, DiscreteConnection, HolonomyError};
use crate::liegroup::{DoubleAlgebra, GroupElement, LieError};
use crate::linalg::{
    orthogonal_complement, reduce_space, LinAlgError, LinearRelation, Reduction, Subspace,
    TolerancePolicy,
};

#[derive(Debug, Error)]
pub enum ReductionError {
    #[error(transparent)]
    Lin(#[from] LinAlgError),
    #[error(transparent)]
    Holonomy(#[from] HolonomyError),
    #[error(transparent)]
    Lie(#[from] LieError),
    #[error("internal invariant failure: {0}")]
    Invariant(String),
    #[error("labeling isometry residual {0} exceeds tolerance")]
    Isometry(f64),
    #[error("relation does not intertwine the generators (defect {defect} at witness node field)")]
    Intertwining { defect: f64, witness: DVector<f64> },
}

/// The reduced algebroid fiber at a fixed connection.
#[derive(Debug)]
pub struct ReducedFiber {
    pub conn: DiscreteConnection,
    pub double: DoubleAlgebra,
    /// C = rho(g_I), the coisotropic spanned by all generators.
    pub coisotropic: Subspace,
    /// C-perp = rho over based fields, computed from the metric.
    pub perp: Subspace,
    /// Quotient data C / C-perp with the induced metric.
    pub quotient: Reduction,
    /// 2d x fiber_dim matrix: least-squares solve of rho(xi) = x followed by
    /// boundary extraction (xi_0, xi_n).  Kills C-perp; restricted to C it is
    /// an isometry onto the double algebra.
    pub label_matrix: DMatrix<f64>,
    /// Worst-case mismatch between the quotient metric and the double-algebra
    /// metric under the labeling.
    pub isometry_residual: f64,
}

impl ReducedFiber {
    pub fn label(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.label_matrix * x
    }

    /// Base-point label.
    pub fn holonomy(&self) -> &GroupElement {
        self.conn.holonomy()
    }

    /// Image of a subspace of the fiber under the labeling map.  Columns
    /// below an absolute threshold are honest zeros (the labeling kills
    /// C-perp exactly and the inputs are unit vectors), so they are dropped
    /// before the rank computation to keep the relative cutoff meaningful.
    pub fn label_subspace(&self, e: &Subspace, tol: &TolerancePolicy) -> Subspace {
        let labeled = &self.label_matrix * &e.basis;
        let kept: Vec<usize> = (0..labeled.ncols())
            .filter(|&j| labeled.column(j).norm() > tol.eq_tol)
            .collect();
        let mut cols = DMatrix::zeros(self.double.dim, kept.len());
        for (c, &j) in kept.iter().enumerate() {
            cols.set_column(c, &labeled.column(j));
        }
        Subspace::from_span(self.double.dim, &cols, tol)
    }

    /// The quotient-to-labels relation q: fiber -> double algebra, defined on
    /// C (graph = { (label(x), x) : x in C }).
    pub fn quotient_relation(&self, tol: &TolerancePolicy) -> LinearRelation {
        let fiber = self.conn.fiber_space(tol);
        let dd = self.double.space();
        let k = self.coisotropic.dim();
        let mut span = DMatrix::zeros(dd.dim + fiber.dim, k);
        let labeled = &self.label_matrix * &self.coisotropic.basis;
        span.view_mut((0, 0), (dd.dim, k)).copy_from(&labeled);
        span.view_mut((dd.dim, 0), (fiber.dim, k))
            .copy_from(&self.coisotropic.basis);
        LinearRelation::new(
            fiber,
            dd,
            Subspace::from_span(self.double.dim + self.conn.fiber_dim(), &span, tol),
        )
    }
}

/// Coisotropic reduction of the fiber at A.
pub fn reduce_fiber(
    a: &DiscreteConnection,
    tol: &TolerancePolicy,
) -> Result<ReducedFiber, ReductionError> {
    let d = a.dim_g();
    let n = a.n;
    let double = a.group.double();
    let fiber = a.fiber_space(tol);
    let rho = a.rho_matrix();
    let c = Subspace::from_span(a.fiber_dim(), &rho, tol);
    if c.dim() != (n + 1) * d {
        return Err(ReductionError::Invariant(format!(
            "dim C = {}, expected {}",
            c.dim(),
            (n + 1) * d
        )));
    }
    // C-perp from the metric; must coincide with the span of generators of
    // based fields.
    let perp = orthogonal_complement(&fiber, &c, tol);
    if perp.dim() != (n - 1) * d {
        return Err(ReductionError::Invariant(format!(
            "dim C-perp = {}, expected {}",
            perp.dim(),
            (n - 1) * d
        )));
    }
    let mut based_cols = DMatrix::zeros(a.fiber_dim(), (n - 1) * d);
    for j in 0..(n - 1) * d {
        let mut xi = vec![DVector::zeros(d); n + 1];
        xi[1 + j / d][j % d] = 1.0;
        based_cols.set_column(j, &a.generator(&xi));
    }
    let based = Subspace::from_span(a.fiber_dim(), &based_cols, tol);
    let gap = perp.gap(&based);
    if gap > tol.eq_tol {
        return Err(ReductionError::Invariant(format!(
            "metric C-perp differs from based generators (gap {gap})"
        )));
    }
    let quotient = reduce_space(&fiber, &c, tol)?;
    if quotient.space.dim != 2 * d {
        return Err(ReductionError::Invariant(format!(
            "quotient dim = {}, expected {}",
            quotient.space.dim,
            2 * d
        )));
    }
    // Labeling: least-squares inverse of rho, then boundary extraction.
    let gram = rho.transpose() * &rho;
    let pinv = gram
        .lu()
        .solve(&rho.transpose())
        .ok_or_else(|| ReductionError::Invariant("rho gram matrix singular".into()))?;
    let mut boundary = DMatrix::zeros(2 * d, (n + 1) * d);
    for r in 0..d {
        boundary[(r, r)] = 1.0;
        boundary[(d + r, n * d + r)] = 1.0;
    }
    let label_matrix = boundary * pinv;
    // Isometry: the quotient metric on the witness equals the double metric
    // pulled through the labeling of the witness basis.
    let labeled_witness = &label_matrix * &quotient.witness.basis;
    let pulled = labeled_witness.transpose() * &double.metric * &labeled_witness;
    let isometry_residual = (&quotient.space.metric - &pulled).amax();
    if isometry_residual > 1e-9 {
        return Err(ReductionError::Isometry(isometry_residual));
    }
    Ok(ReducedFiber {
        conn: a.clone(),
        double,
        coisotropic: c,
        perp,
        quotient,
        label_matrix,
        isometry_residual,
    })
}

/// Reduction of the lattice Dirac structure E^(s): its image under the
/// labeling map, a subspace of the double algebra to be compared with s.
pub fn reduce_dirac(
    rf: &ReducedFiber,
    s: &Subspace,
    tol: &TolerancePolicy,
) -> Subspace {
    let e = rf.conn.dirac_fiber(s, tol);
    rf.label_subspace(&e, tol)
}

/// Comparison of the reduced twisted splitting against the group-level
/// splitting j(v) = (-Ad_g v / 2, v / 2) at g = Hol(A).
#[derive(Debug)]
pub struct SplittingComparison {
    /// d x d matrix of the left-trivialized covector leg (second label
    /// component) of the reduced splitting on algebra basis vectors.
    pub beta: DMatrix<f64>,
    /// d x d matrix of the recovered anchor v = X1 - Ad_g^{-1} X0 (should be
    /// the identity).
    pub anchor: DMatrix<f64>,
    /// max |beta - I/2| entrywise.
    pub beta_error: f64,
    /// max |anchor - I| entrywise.
    pub anchor_error: f64,
    /// Worst distance of the label from the full j(X) (both legs).
    pub j_residual: f64,
    /// Worst distance of the twisted splitting image from C.
    pub containment_defect: f64,
}

/// Push the varpi-twisted splitting of horizontal lifts through the
/// reduction and compare its label with the group-level splitting.  With the
/// twisted-trapezoid conventions this agrees to rounding at every lattice
/// size, not merely in the continuum limit.
pub fn reduce_splitting(
    a: &DiscreteConnection,
    chi: ChiProfile,
    tol: &TolerancePolicy,
) -> Result<SplittingComparison, ReductionError> {
    let rf = reduce_fiber(a, tol)?;
    let d = a.dim_g();
    let w = a.varpi_matrix(chi)?;
    let hol = a.holonomy().clone();
    let ad_inv = a.group.adjoint(&a.group.inv(&hol));
    let ginv = a
        .group
        .metric
        .clone()
        .lu()
        .solve(&DMatrix::identity(d, d))
        .ok_or_else(|| ReductionError::Invariant("group metric singular".into()))?;
    let cartan = CartanAlgebroid::new(a.group.clone());
    let jm = cartan.j_matrix(&hol);
    let mut beta = DMatrix::zeros(d, d);
    let mut anchor = DMatrix::zeros(d, d);
    let mut containment_defect: f64 = 0.0;
    let mut j_residual: f64 = 0.0;
    for k in 0..d {
        let mut x = DVector::zeros(d);
        x[k] = 1.0;
        let lift = a.connection_lift(&x, chi);
        let mut av = DVector::zeros(a.n * d);
        for i in 0..a.n {
            av.rows_mut(i * d, d).copy_from(&lift[i]);
        }
        // Covector of the twist: sum_i delta <c_i, b_i> = varpi(lift, b).
        let wv = w.transpose() * &av;
        let mut cov = vec![DVector::zeros(d); a.n];
        for i in 0..a.n {
            cov[i] = &ginv * wv.rows(i * d, d) / a.delta;
        }
        let x_fiber = a.pack_fiber(&lift, &cov);
        let (_, res) = rf.coisotropic.coords(&x_fiber);
        containment_defect = containment_defect.max(res / (1.0 + x_fiber.norm()));
        let label = rf.label(&x_fiber);
        j_residual = j_residual.max((&label - &jm * &x).amax());
        let l0 = label.rows(0, d).into_owned();
        let l1 = label.rows(d, d).into_owned();
        let adl0 = &ad_inv * &l0;
        beta.set_column(k, &l1);
        anchor.set_column(k, &(&l1 - &adl0));
    }
    let beta_error = (&beta - DMatrix::<f64>::identity(d, d) * 0.5).amax();
    let anchor_error = (&anchor - DMatrix::<f64>::identity(d, d)).amax();
    Ok(SplittingComparison {
        beta,
        anchor,
        beta_error,
        anchor_error,
        j_residual,
        containment_defect,
    })
}

/// Reduce a fiberwise Courant relation R: fiber(A1) -> fiber(A2) to a
/// relation on labels, after verifying that R intertwines the generators:
/// (rho_1(xi), rho_2(f xi)) must lie in the graph for every node field xi,
/// where `node_map` is the matrix of f on packed node coordinates.
pub fn reduce_morphism(
    rf1: &ReducedFiber,
    rf2: &ReducedFiber,
    r: &LinearRelation,
    node_map: &DMatrix<f64>,
    tol: &TolerancePolicy,
) -> Result<LinearRelation, ReductionError> {
    let f1 = rf1.conn.fiber_dim();
    let f2 = rf2.conn.fiber_dim();
    if r.source.dim != f1 || r.target.dim != f2 {
        return Err(ReductionError::Invariant(format!(
            "relation dims {}x{} do not match fibers {}x{}",
            r.target.dim, r.source.dim, f2, f1
        )));
    }
    let rho1 = rf1.conn.rho_matrix();
    let rho2 = rf2.conn.rho_matrix();
    for j in 0..rf1.conn.node_dim() {
        let mut e = DVector::zeros(rf1.conn.node_dim());
        e[j] = 1.0;
        let x1 = &rho1 * &e;
        let x2 = &rho2 * node_map * &e;
        let mut pair = DVector::zeros(f2 + f1);
        pair.rows_mut(0, f2).copy_from(&x2);
        pair.rows_mut(f2, f1).copy_from(&x1);
        let (_, res) = r.graph.coords(&pair);
        let defect = res / (1.0 + pair.norm());
        if defect > tol.eq_tol.sqrt() {
            return Err(ReductionError::Intertwining { defect, witness: e });
        }
    }
    // Reduced graph: label the intersection of the graph with C2 x C1.
    let mut cc = DMatrix::zeros(f2 + f1, rf2.coisotropic.dim() + rf1.coisotropic.dim());
    cc.view_mut((0, 0), (f2, rf2.coisotropic.dim()))
        .copy_from(&rf2.coisotropic.basis);
    cc.view_mut((f2, rf2.coisotropic.dim()), (f1, rf1.coisotropic.dim()))
        .copy_from(&rf1.coisotropic.basis);
    let cspace = Subspace::from_span(f2 + f1, &cc, tol);
    let meet = r.graph.intersect(&cspace, tol);
    let d2 = rf2.double.dim;
    let d1 = rf1.double.dim;
    let mut block = DMatrix::zeros(d2 + d1, f2 + f1);
    block
        .view_mut((0, 0), (d2, f2))
        .copy_from(&rf2.label_matrix);
    block
        .view_mut((d2, f2), (d1, f1))
        .copy_from(&rf1.label_matrix);
    let graph = meet.map(&block, tol);
    Ok(LinearRelation::new(
        rf1.double.space(),
        rf2.double.space(),
        graph,
    ))
}

/// Residuals of the equivariance identities for the affine one-form
/// alpha(xi)(b) = sum_i delta <b_i, m_i(xi)> and its varpi-twist.
#[derive(Debug)]
pub struct ExtensionReport {
    /// Finite-difference exterior-derivative residual of alpha(xi); the
    /// twisted-trapezoid coefficient carries O(delta^2) A-dependence per
    /// interval, so this is O(delta), not exactly zero.
    pub alpha_closed_defect: f64,
    /// | i(D xi) alpha(zeta) + i(D zeta) alpha(xi) - boundary pairing |,
    /// exact by telescoping.
    pub boundary_pairing_defect: f64,
    /// | alpha(xi) - i(D xi) varpi | on based xi, exact.
    pub twisted_alpha_defect: f64,
}

pub fn equivariant_extension_check(
    a: &DiscreteConnection,
    chi: ChiProfile,
    xi: &Vec<DVector<f64>>,
    zeta: &Vec<DVector<f64>>,
    probe: &Vec<DVector<f64>>,
    fd_step: f64,
) -> Result<ExtensionReport, ReductionError> {
    let alpha = |conn: &DiscreteConnection, f: &Vec<DVector<f64>>, b: &Vec<DVector<f64>>| -> f64 {
        conn.cochain_node_pairing(b, f)
    };
    // d alpha(xi)(probe, D zeta) by central differences of the two slots.
    let dxi = a.covariant_derivative(xi);
    let dzeta = a.covariant_derivative(zeta);
    let b1 = probe.clone();
    let b2 = dzeta.clone();
    let deriv = |dir: &Vec<DVector<f64>>, other: &Vec<DVector<f64>>| -> Result<f64, ReductionError> {
        let plus = a.displace(dir, fd_step)?;
        let minus = a.displace(dir, -fd_step)?;
        Ok((alpha(&plus, xi, other) - alpha(&minus, xi, other)) / (2.0 * fd_step))
    };
    let alpha_closed_defect = (deriv(&b1, &b2)? - deriv(&b2, &b1)?).abs();
    // Symmetrized contraction equals the boundary pairing, exactly.
    let lhs = alpha(a, zeta, &dxi) + alpha(a, xi, &dzeta);
    let boundary = a.group.inner(&xi[a.n], &zeta[a.n]) - a.group.inner(&xi[0], &zeta[0]);
    let boundary_pairing_defect = (lhs - boundary).abs();
    // Twist cancellation on based fields: alpha(xi) = i(D xi) varpi, exactly.
    let mut based = xi.clone();
    based[0] = DVector::zeros(a.dim_g());
    based[a.n] = DVector::zeros(a.dim_g());
    let dbased = a.covariant_derivative(&based);
    let mut twisted_alpha_defect: f64 = 0.0;
    for b in [probe.to_vec(), dzeta] {
        let twist = a.varpi(&dbased, &b, chi)?;
        twisted_alpha_defect = twisted_alpha_defect.max((alpha(a, &based, &b) - twist).abs());
    }
    Ok(ExtensionReport {
        alpha_closed_defect,
        boundary_pairing_defect,
        twisted_alpha_defect,
    })
}

/// The group-level Cartan algebroid a reduced fiber should reproduce;
/// convenience constructor used by tests and scenarios.
pub fn cartan_model(a: &DiscreteConnection) -> CartanAlgebroid {
    CartanAlgebroid::new(a.group.clone())
}
