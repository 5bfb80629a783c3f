//! Metrized vector spaces, subspaces, Lagrangian relations and coisotropic
//! reduction.
//!
//! All subspaces are canonicalized by Euclidean orthonormal bases (thin SVD),
//! equality is tested through principal angles, and every rank decision goes
//! through a relative singular-value cutoff carried by [`TolerancePolicy`].

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use thiserror::Error;

/// Numerical policy shared across the crate.
#[derive(Debug, Clone, Copy)]
pub struct TolerancePolicy {
    /// Relative singular-value cutoff for rank decisions.
    pub rank_tol: f64,
    /// Principal-angle bound for subspace equality / containment.
    pub eq_tol: f64,
    /// Finite-difference step for chart derivatives.
    pub fd_step: f64,
}

impl Default for TolerancePolicy {
    fn default() -> Self {
        TolerancePolicy {
            rank_tol: 1e-9,
            eq_tol: 1e-8,
            fd_step: 1e-5,
        }
    }
}

impl TolerancePolicy {
    pub fn validate(&self) -> Result<(), LinAlgError> {
        if self.rank_tol <= 0.0 || self.eq_tol <= 0.0 || self.fd_step <= 0.0 {
            return Err(LinAlgError::BadPolicy("tolerances must be positive".into()));
        }
        if self.rank_tol >= self.eq_tol {
            return Err(LinAlgError::BadPolicy("rank_tol must be < eq_tol".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum LinAlgError {
    #[error("invalid tolerance policy: {0}")]
    BadPolicy(String),
    #[error("metric is not symmetric (relative asymmetry {0:.3e})")]
    Asymmetric(f64),
    #[error("metric is degenerate (relative smallest singular value {0:.3e})")]
    Degenerate(f64),
    #[error("subspace/space dimension mismatch: {0}")]
    DimMismatch(String),
    #[error("expected a coisotropic subspace, got {0:?}")]
    NotCoisotropic(SubspaceClass),
    #[error("expected a Lagrangian subspace, got {0:?}")]
    NotLagrangian(SubspaceClass),
    #[error("relation spaces do not match: {0}")]
    SpaceMismatch(String),
}

/// Orthonormalize the columns of `m` (Euclidean) with a relative rank cutoff.
/// Returns a matrix with orthonormal columns spanning the column space.
///
/// Implemented with column-pivoted QR (rank-revealing) rather than SVD: the
/// SVD in our linear-algebra backend proved unreliable on projector-like
/// matrices with clustered singular values.
pub fn orthonormalize(m: &DMatrix<f64>, rank_tol: f64) -> DMatrix<f64> {
    let rows = m.nrows();
    if m.ncols() == 0 || rows == 0 {
        return DMatrix::zeros(rows, 0);
    }
    let qr = m.clone().col_piv_qr();
    let q = qr.q();
    let r = qr.r();
    let k = r.nrows().min(r.ncols());
    let d0 = r[(0, 0)].abs();
    if d0 <= 0.0 {
        return DMatrix::zeros(rows, 0);
    }
    let mut rank = 0;
    for i in 0..k {
        if r[(i, i)].abs() > rank_tol * d0 {
            rank = i + 1;
        } else {
            break;
        }
    }
    q.columns(0, rank).into_owned()
}

/// Column span of an (approximate) orthogonal projector via column-pivoted
/// QR.  The singular values are exactly 0 or 1, so an absolute mid-range
/// cutoff on the R diagonal separates signal from rounding noise.
pub fn projector_range(p: &DMatrix<f64>) -> DMatrix<f64> {
    let qr = p.clone().col_piv_qr();
    let q = qr.q();
    let r = qr.r();
    let mut rank = 0;
    for i in 0..r.nrows().min(r.ncols()) {
        if r[(i, i)].abs() > 1e-3 {
            rank = i + 1;
        } else {
            break;
        }
    }
    q.columns(0, rank).into_owned()
}

/// Euclidean orthogonal complement of an orthonormal column span, realized as
/// the range of the complementary projector.
pub fn euclid_complement(basis: &DMatrix<f64>, ambient: usize) -> DMatrix<f64> {
    let k = basis.ncols();
    if k == 0 {
        return DMatrix::identity(ambient, ambient);
    }
    let p = DMatrix::identity(ambient, ambient) - basis * basis.transpose();
    projector_range(&p)
}

/// Spectral norm (largest singular value) via power iteration on the Gram
/// matrix; avoids the less reliable dense SVD.
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.ncols() == 0 || m.nrows() == 0 {
        return 0.0;
    }
    let gram = m.transpose() * m;
    let n = gram.nrows();
    // Deterministic start with all components populated.
    let mut v = DVector::from_fn(n, |i, _| 1.0 + (i as f64 + 1.0).sin());
    v /= v.norm();
    let mut lam = 0.0;
    for _ in 0..300 {
        let w = &gram * &v;
        let nw = w.norm();
        if nw == 0.0 {
            return 0.0;
        }
        let new_lam = nw;
        v = w / nw;
        if (new_lam - lam).abs() <= 1e-14 * new_lam.max(1.0) {
            lam = new_lam;
            break;
        }
        lam = new_lam;
    }
    lam.max(0.0).sqrt()
}

/// Matrix sign function of a symmetric nondegenerate matrix via the scaled
/// Newton iteration; quadratically convergent and machine-accurate, used to
/// split inertia subspaces without an eigensolver.
pub fn matrix_sign(m: &DMatrix<f64>) -> DMatrix<f64> {
    let mut s = m.clone();
    for _ in 0..100 {
        let inv = s
            .clone()
            .lu()
            .try_inverse()
            .expect("sign iteration requires nonsingular iterate");
        // Determinant-free norm scaling accelerates early iterations.
        let mu = (inv.norm() / s.norm()).sqrt();
        let next = (&s * mu + inv / mu) * 0.5;
        let diff = (&next - &s).norm();
        s = next;
        if diff <= 1e-14 * s.norm() {
            break;
        }
    }
    s
}

/// Euclidean-orthonormal bases of the positive and negative subspaces of a
/// symmetric nondegenerate matrix (computed through the matrix sign
/// function).
pub fn inertia_split(m: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = m.nrows();
    let sign = matrix_sign(m);
    let pos_proj = (DMatrix::identity(n, n) + &sign) * 0.5;
    let neg_proj = (DMatrix::identity(n, n) - &sign) * 0.5;
    let pos = projector_range(&pos_proj);
    let neg = projector_range(&neg_proj);
    (pos, neg)
}

/// Orthonormal basis of the right null space of `m` (robust even when the
/// matrix is wide): complement of the row space.
pub fn nullspace(m: &DMatrix<f64>, rank_tol: f64) -> DMatrix<f64> {
    let rowspace = orthonormalize(&m.transpose(), rank_tol);
    euclid_complement(&rowspace, m.ncols())
}

/// A finite-dimensional real vector space with a nondegenerate symmetric
/// bilinear form of arbitrary signature.
#[derive(Debug, Clone)]
pub struct MetrizedSpace {
    pub dim: usize,
    pub metric: DMatrix<f64>,
    /// (positive, negative) inertia.
    pub signature: (usize, usize),
}

impl MetrizedSpace {
    pub fn new(metric: DMatrix<f64>, tol: &TolerancePolicy) -> Result<Self, LinAlgError> {
        let n = metric.nrows();
        if metric.ncols() != n {
            return Err(LinAlgError::DimMismatch("metric must be square".into()));
        }
        if n == 0 {
            return Ok(MetrizedSpace {
                dim: 0,
                metric,
                signature: (0, 0),
            });
        }
        let scale = metric.amax().max(1e-300);
        let asym = (&metric - metric.transpose()).amax() / scale;
        if asym > 1e-12 {
            return Err(LinAlgError::Asymmetric(asym));
        }
        let sym = (metric.clone() + metric.transpose()) * 0.5;
        let emax = spectral_norm(&sym);
        let inv = match sym.clone().lu().try_inverse() {
            Some(inv) => inv,
            None => return Err(LinAlgError::Degenerate(0.0)),
        };
        let emin = 1.0 / spectral_norm(&inv);
        if emin <= tol.rank_tol * emax {
            return Err(LinAlgError::Degenerate(emin / emax));
        }
        // Positive inertia from the trace of the matrix sign function.
        let sign = matrix_sign(&sym);
        let p = ((n as f64 + sign.trace()) / 2.0).round() as usize;
        Ok(MetrizedSpace {
            dim: n,
            metric: sym,
            signature: (p, n - p),
        })
    }

    /// Standard Euclidean space.
    pub fn euclidean(n: usize) -> Self {
        MetrizedSpace {
            dim: n,
            metric: DMatrix::identity(n, n),
            signature: (n, 0),
        }
    }

    /// Hyperbolic pairing on R^{2m}: basis e_1..e_m, f_1..f_m with
    /// <e_i, f_j> = delta_ij and all other pairings zero.
    pub fn hyperbolic(m: usize) -> Self {
        let n = 2 * m;
        let mut g = DMatrix::zeros(n, n);
        for i in 0..m {
            g[(i, m + i)] = 1.0;
            g[(m + i, i)] = 1.0;
        }
        MetrizedSpace {
            dim: n,
            metric: g,
            signature: (m, m),
        }
    }

    /// The same space with the metric negated (written V-bar).
    pub fn negated(&self) -> Self {
        MetrizedSpace {
            dim: self.dim,
            metric: -&self.metric,
            signature: (self.signature.1, self.signature.0),
        }
    }

    /// Product space with block-diagonal metric.
    pub fn product(&self, other: &MetrizedSpace) -> Self {
        let n = self.dim + other.dim;
        let mut g = DMatrix::zeros(n, n);
        g.view_mut((0, 0), (self.dim, self.dim)).copy_from(&self.metric);
        g.view_mut((self.dim, self.dim), (other.dim, other.dim))
            .copy_from(&other.metric);
        MetrizedSpace {
            dim: n,
            metric: g,
            signature: (
                self.signature.0 + other.signature.0,
                self.signature.1 + other.signature.1,
            ),
        }
    }

    pub fn inner(&self, x: &DVector<f64>, y: &DVector<f64>) -> f64 {
        (x.transpose() * &self.metric * y)[(0, 0)]
    }

    /// Approximate equality of spaces (same dim, same metric entrywise).
    pub fn same_as(&self, other: &MetrizedSpace, tol: f64) -> bool {
        self.dim == other.dim && (&self.metric - &other.metric).amax() <= tol
    }
}

/// Subspace of a metrized space, canonicalized by a Euclidean orthonormal
/// basis.  The ambient space is referenced by dimension only; operations that
/// need the metric take the [`MetrizedSpace`] explicitly.
#[derive(Debug, Clone)]
pub struct Subspace {
    pub ambient_dim: usize,
    /// ambient_dim x k matrix with orthonormal columns.
    pub basis: DMatrix<f64>,
}

impl Subspace {
    pub fn from_span(ambient_dim: usize, span: &DMatrix<f64>, tol: &TolerancePolicy) -> Self {
        assert_eq!(span.nrows(), ambient_dim, "span rows must match ambient dim");
        Subspace {
            ambient_dim,
            basis: orthonormalize(span, tol.rank_tol),
        }
    }

    pub fn zero(ambient_dim: usize) -> Self {
        Subspace {
            ambient_dim,
            basis: DMatrix::zeros(ambient_dim, 0),
        }
    }

    pub fn full(ambient_dim: usize) -> Self {
        Subspace {
            ambient_dim,
            basis: DMatrix::identity(ambient_dim, ambient_dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    /// Largest principal-angle sine between `self` and `other`; infinite when
    /// dimensions differ.  Zero means equal subspaces.
    pub fn gap(&self, other: &Subspace) -> f64 {
        if self.dim() != other.dim() {
            return f64::INFINITY;
        }
        if self.dim() == 0 {
            return 0.0;
        }
        // Max distance of a unit vector of self from other (and symmetric).
        let d1 = self.containment_defect(other);
        let d2 = other.containment_defect(self);
        d1.max(d2)
    }

    /// Max over unit v in self of the Euclidean distance from v to `other`
    /// (sine of the largest principal angle when dims allow containment).
    pub fn containment_defect(&self, other: &Subspace) -> f64 {
        if self.dim() == 0 {
            return 0.0;
        }
        let proj = &self.basis - &other.basis * (other.basis.transpose() * &self.basis);
        spectral_norm(&proj)
    }

    pub fn is_contained_in(&self, other: &Subspace, eq_tol: f64) -> bool {
        self.containment_defect(other) <= eq_tol
    }

    pub fn equals(&self, other: &Subspace, eq_tol: f64) -> bool {
        self.gap(other) <= eq_tol
    }

    /// Sum of subspaces.
    pub fn sum(&self, other: &Subspace, tol: &TolerancePolicy) -> Subspace {
        let mut cols = DMatrix::zeros(self.ambient_dim, self.dim() + other.dim());
        cols.view_mut((0, 0), (self.ambient_dim, self.dim()))
            .copy_from(&self.basis);
        cols.view_mut((0, self.dim()), (self.ambient_dim, other.dim()))
            .copy_from(&other.basis);
        // Columns are unit vectors, so near-zero singular values cleanly
        // indicate dependence; use an absolute cutoff tied to eq_tol.
        Subspace {
            ambient_dim: self.ambient_dim,
            basis: orthonormalize(&cols, tol.eq_tol / 10.0),
        }
    }

    /// Intersection, computed through Euclidean complements for robustness.
    pub fn intersect(&self, other: &Subspace, tol: &TolerancePolicy) -> Subspace {
        let c1 = euclid_complement(&self.basis, self.ambient_dim);
        let c2 = euclid_complement(&other.basis, self.ambient_dim);
        let s1 = Subspace {
            ambient_dim: self.ambient_dim,
            basis: c1,
        };
        let s2 = Subspace {
            ambient_dim: self.ambient_dim,
            basis: c2,
        };
        let union = s1.sum(&s2, tol);
        Subspace {
            ambient_dim: self.ambient_dim,
            basis: euclid_complement(&union.basis, self.ambient_dim),
        }
    }

    /// Euclidean orthogonal complement (not the metric one).
    pub fn euclidean_complement(&self) -> Subspace {
        Subspace {
            ambient_dim: self.ambient_dim,
            basis: euclid_complement(&self.basis, self.ambient_dim),
        }
    }

    /// Coordinates of `x` in the basis of this subspace (Euclidean
    /// projection); also returns the residual norm.
    pub fn coords(&self, x: &DVector<f64>) -> (DVector<f64>, f64) {
        let c = self.basis.transpose() * x;
        let res = x - &self.basis * &c;
        (c, res.norm())
    }

    /// Image of this subspace under a linear map given by `m`.
    pub fn map(&self, m: &DMatrix<f64>, tol: &TolerancePolicy) -> Subspace {
        Subspace::from_span(m.nrows(), &(m * &self.basis), tol)
    }
}

/// Classification of a subspace with respect to the ambient metric.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SubspaceClass {
    Isotropic,
    Coisotropic,
    Lagrangian,
    /// F intersects F-perp trivially (the restricted metric is nondegenerate).
    SymplecticComplementable,
    None,
}

/// F-perp = { v : <v, f> = 0 for all f in F }.
pub fn orthogonal_complement(
    space: &MetrizedSpace,
    f: &Subspace,
    tol: &TolerancePolicy,
) -> Subspace {
    assert_eq!(space.dim, f.ambient_dim);
    if f.dim() == 0 {
        return Subspace::full(space.dim);
    }
    let m = f.basis.transpose() * &space.metric;
    Subspace {
        ambient_dim: space.dim,
        basis: nullspace(&m, tol.rank_tol),
    }
}

pub fn classify(space: &MetrizedSpace, f: &Subspace, tol: &TolerancePolicy) -> SubspaceClass {
    let perp = orthogonal_complement(space, f, tol);
    let sub = f.is_contained_in(&perp, tol.eq_tol);
    let sup = perp.is_contained_in(f, tol.eq_tol);
    match (sub, sup) {
        (true, true) => SubspaceClass::Lagrangian,
        (true, false) => SubspaceClass::Isotropic,
        (false, true) => SubspaceClass::Coisotropic,
        (false, false) => {
            if f.intersect(&perp, tol).dim() == 0 {
                SubspaceClass::SymplecticComplementable
            } else {
                SubspaceClass::None
            }
        }
    }
}

/// Isotropic complement of a coisotropic subspace `C`:
/// pick the Euclidean complement F of C, write each v in F as v = A(v) + w
/// with A(v) in C-perp and w in F-perp, and return F' = { v - 1/2 A(v) }.
pub fn isotropic_complement(
    space: &MetrizedSpace,
    c: &Subspace,
    tol: &TolerancePolicy,
) -> Result<Subspace, LinAlgError> {
    match classify(space, c, tol) {
        SubspaceClass::Coisotropic | SubspaceClass::Lagrangian => {}
        other => return Err(LinAlgError::NotCoisotropic(other)),
    }
    let n = space.dim;
    let cperp = orthogonal_complement(space, c, tol);
    let f = c.euclidean_complement();
    if f.dim() == 0 {
        return Ok(Subspace::zero(n));
    }
    let fperp = orthogonal_complement(space, &f, tol);
    // V = C-perp (+) F-perp: solve for the C-perp component of each basis
    // vector of F.
    let k1 = cperp.dim();
    let k2 = fperp.dim();
    assert_eq!(k1 + k2, n, "C-perp and F-perp must be complementary");
    let mut m = DMatrix::zeros(n, n);
    m.view_mut((0, 0), (n, k1)).copy_from(&cperp.basis);
    m.view_mut((0, k1), (n, k2)).copy_from(&fperp.basis);
    let lu = m.lu();
    let mut span = DMatrix::zeros(n, f.dim());
    for j in 0..f.dim() {
        let v = f.basis.column(j).into_owned();
        let coeffs = lu.solve(&v).expect("complementary decomposition solve");
        let a_v = &cperp.basis * coeffs.rows(0, k1).into_owned();
        span.set_column(j, &(v - a_v * 0.5));
    }
    Ok(Subspace::from_span(n, &span, tol))
}

/// The reduced space V_C = C / C-perp together with the projection from
/// ambient coordinates to quotient coordinates.
#[derive(Debug, Clone)]
pub struct Reduction {
    pub space: MetrizedSpace,
    /// Euclidean-orthonormal basis of a complement of C-perp inside C; the
    /// quotient is realized on this subspace.
    pub witness: Subspace,
    /// Quotient coordinates of an ambient vector (valid for vectors in C):
    /// witness-basis transpose.
    pub projection: DMatrix<f64>,
    pub c: Subspace,
    pub c_perp: Subspace,
}

impl Reduction {
    pub fn project(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.projection * x
    }
}

/// Coisotropic reduction of `C`: quotient metric realized on the Euclidean
/// complement of C-perp inside C (C-perp is the radical of the restricted
/// form, so any complement carries the induced metric).
pub fn reduce_space(
    space: &MetrizedSpace,
    c: &Subspace,
    tol: &TolerancePolicy,
) -> Result<Reduction, LinAlgError> {
    match classify(space, c, tol) {
        SubspaceClass::Coisotropic | SubspaceClass::Lagrangian => {}
        other => return Err(LinAlgError::NotCoisotropic(other)),
    }
    let cperp = orthogonal_complement(space, c, tol);
    // Witness = C intersect (Euclidean complement of C-perp).
    let witness = c.intersect(&cperp.euclidean_complement(), tol);
    assert_eq!(
        witness.dim(),
        c.dim() - cperp.dim(),
        "witness dimension must equal dim C - dim C-perp"
    );
    let gram = witness.basis.transpose() * &space.metric * &witness.basis;
    let qspace = MetrizedSpace::new(gram, tol)?;
    Ok(Reduction {
        space: qspace,
        projection: witness.basis.transpose(),
        witness,
        c: c.clone(),
        c_perp: cperp,
    })
}

/// Reduce a Lagrangian subspace: L_C = (L cap C) / (L cap C-perp), a
/// Lagrangian subspace of V_C.  Also reports whether L + C = V.
pub fn reduce_subspace(
    space: &MetrizedSpace,
    l: &Subspace,
    red: &Reduction,
    tol: &TolerancePolicy,
) -> Result<(Subspace, bool), LinAlgError> {
    match classify(space, l, tol) {
        SubspaceClass::Lagrangian => {}
        other => return Err(LinAlgError::NotLagrangian(other)),
    }
    let lc = l.intersect(&red.c, tol);
    let projected = Subspace::from_span(
        red.space.dim,
        &(&red.projection * &lc.basis),
        tol,
    );
    let transverse = l.sum(&red.c, tol).dim() == space.dim;
    Ok((projected, transverse))
}

/// A linear relation between metrized spaces, encoded by its graph inside
/// V2 x V1-bar (target coordinates first, source metric negated).
#[derive(Debug, Clone)]
pub struct LinearRelation {
    pub source: MetrizedSpace,
    pub target: MetrizedSpace,
    pub graph: Subspace,
}

/// Transversality class of a composition.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Transversality {
    Transverse,
    Weak,
    Neither,
}

/// Dirac-morphism class of a relation with respect to Lagrangian E1, E2.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MorphismClass {
    None,
    Weak,
    Strong,
}

impl LinearRelation {
    pub fn new(source: MetrizedSpace, target: MetrizedSpace, graph: Subspace) -> Self {
        assert_eq!(graph.ambient_dim, source.dim + target.dim);
        LinearRelation {
            source,
            target,
            graph,
        }
    }

    /// The metrized space V2 x V1-bar the graph lives in.
    pub fn graph_space(&self) -> MetrizedSpace {
        self.target.product(&self.source.negated())
    }

    pub fn identity(space: &MetrizedSpace) -> Self {
        let n = space.dim;
        let mut span = DMatrix::zeros(2 * n, n);
        for i in 0..n {
            span[(i, i)] = 1.0;
            span[(n + i, i)] = 1.0;
        }
        LinearRelation {
            source: space.clone(),
            target: space.clone(),
            graph: Subspace::from_span(2 * n, &span, &TolerancePolicy::default()),
        }
    }

    /// Graph of a linear map m: V1 -> V2.
    pub fn from_map(
        source: &MetrizedSpace,
        target: &MetrizedSpace,
        m: &DMatrix<f64>,
        tol: &TolerancePolicy,
    ) -> Self {
        assert_eq!(m.ncols(), source.dim);
        assert_eq!(m.nrows(), target.dim);
        let n1 = source.dim;
        let n2 = target.dim;
        let mut span = DMatrix::zeros(n1 + n2, n1);
        span.view_mut((0, 0), (n2, n1)).copy_from(m);
        span.view_mut((n2, 0), (n1, n1))
            .copy_from(&DMatrix::identity(n1, n1));
        LinearRelation {
            source: source.clone(),
            target: target.clone(),
            graph: Subspace::from_span(n1 + n2, &span, tol),
        }
    }

    /// A subspace E of V viewed as a relation 0 -> V.
    pub fn from_subspace(space: &MetrizedSpace, e: &Subspace) -> Self {
        let zero = MetrizedSpace::euclidean(0);
        LinearRelation {
            source: zero,
            target: space.clone(),
            graph: Subspace {
                ambient_dim: space.dim,
                basis: e.basis.clone(),
            },
        }
    }

    /// Transpose relation V2 -> V1 (blocks swapped).
    pub fn transpose(&self, tol: &TolerancePolicy) -> Self {
        let n1 = self.source.dim;
        let n2 = self.target.dim;
        let mut swap = DMatrix::zeros(n1 + n2, n1 + n2);
        // (v2, v1) -> (v1, v2)
        for i in 0..n1 {
            swap[(i, n2 + i)] = 1.0;
        }
        for i in 0..n2 {
            swap[(n1 + i, i)] = 1.0;
        }
        LinearRelation {
            source: self.target.clone(),
            target: self.source.clone(),
            graph: self.graph.map(&swap, tol),
        }
    }

    /// ran(R): projection of the graph to the target block.
    pub fn range(&self, tol: &TolerancePolicy) -> Subspace {
        let n2 = self.target.dim;
        let proj = self.graph.basis.rows(0, n2).into_owned();
        Subspace::from_span(n2, &proj, tol)
    }

    /// ran*(R): projection of the graph to the source block.
    pub fn corange(&self, tol: &TolerancePolicy) -> Subspace {
        let n1 = self.source.dim;
        let n2 = self.target.dim;
        let proj = self.graph.basis.rows(n2, n1).into_owned();
        Subspace::from_span(n1, &proj, tol)
    }

    /// ker(R) = { v1 : (0, v1) in graph }.
    pub fn kernel(&self, tol: &TolerancePolicy) -> Subspace {
        let n1 = self.source.dim;
        let n2 = self.target.dim;
        let target_zero = {
            let mut span = DMatrix::zeros(n1 + n2, n1);
            span.view_mut((n2, 0), (n1, n1))
                .copy_from(&DMatrix::identity(n1, n1));
            Subspace::from_span(n1 + n2, &span, tol)
        };
        let inter = self.graph.intersect(&target_zero, tol);
        Subspace::from_span(n1, &inter.basis.rows(n2, n1).into_owned(), tol)
    }

    /// ker*(R) = { v2 : (v2, 0) in graph }.
    pub fn cokernel(&self, tol: &TolerancePolicy) -> Subspace {
        self.transpose(tol).kernel(tol)
    }

    /// Forward image of a subspace of the source.
    pub fn image_of(&self, e: &Subspace, tol: &TolerancePolicy) -> Subspace {
        let n1 = self.source.dim;
        let n2 = self.target.dim;
        let lifted = {
            let mut span = DMatrix::zeros(n1 + n2, n2 + e.dim());
            span.view_mut((0, 0), (n2, n2))
                .copy_from(&DMatrix::identity(n2, n2));
            span.view_mut((n2, n2), (n1, e.dim())).copy_from(&e.basis);
            Subspace::from_span(n1 + n2, &span, tol)
        };
        let inter = self.graph.intersect(&lifted, tol);
        Subspace::from_span(n2, &inter.basis.rows(0, n2).into_owned(), tol)
    }

    /// Backward image of a subspace of the target (composition F o R).
    pub fn preimage_of(&self, f: &Subspace, tol: &TolerancePolicy) -> Subspace {
        self.transpose(tol).image_of(f, tol)
    }

    pub fn is_lagrangian(&self, tol: &TolerancePolicy) -> bool {
        classify(&self.graph_space(), &self.graph, tol) == SubspaceClass::Lagrangian
    }

    /// Equality of relations as graphs.
    pub fn equals(&self, other: &LinearRelation, eq_tol: f64) -> bool {
        self.graph.equals(&other.graph, eq_tol)
    }
}

/// Composition R2 o R1 together with its transversality class.
///
/// The graph is the coisotropic reduction of gr(R2) x gr(R1) by the diagonal
/// in the middle factor, realized concretely as "intersect with the matching
/// condition, then project to outer coordinates".
pub fn compose_relations(
    r2: &LinearRelation,
    r1: &LinearRelation,
    tol: &TolerancePolicy,
) -> Result<(LinearRelation, Transversality), LinAlgError> {
    if !r1.target.same_as(&r2.source, 1e-10) {
        return Err(LinAlgError::SpaceMismatch(format!(
            "target of first ({}) vs source of second ({})",
            r1.target.dim, r2.source.dim
        )));
    }
    let n1 = r1.source.dim;
    let n2 = r1.target.dim;
    let n3 = r2.target.dim;
    let big = n3 + n2 + n1;
    // K = { (v3, v2, v1) : (v3, v2) in gr(R2), (v2, v1) in gr(R1) }.
    let lift2 = {
        let k = r2.graph.dim();
        let mut span = DMatrix::zeros(big, k + n1);
        span.view_mut((0, 0), (n3 + n2, k)).copy_from(&r2.graph.basis);
        span.view_mut((n3 + n2, k), (n1, n1))
            .copy_from(&DMatrix::identity(n1, n1));
        Subspace::from_span(big, &span, tol)
    };
    let lift1 = {
        let k = r1.graph.dim();
        let mut span = DMatrix::zeros(big, k + n3);
        span.view_mut((0, k), (n3, n3))
            .copy_from(&DMatrix::identity(n3, n3));
        span.view_mut((n3, 0), (n2 + n1, k)).copy_from(&r1.graph.basis);
        Subspace::from_span(big, &span, tol)
    };
    let k = lift2.intersect(&lift1, tol);
    // Project to (v3, v1).
    let mut proj = DMatrix::zeros(n3 + n1, big);
    for i in 0..n3 {
        proj[(i, i)] = 1.0;
    }
    for i in 0..n1 {
        proj[(n3 + i, n3 + n2 + i)] = 1.0;
    }
    let graph = Subspace::from_span(n3 + n1, &(&proj * &k.basis), tol);
    let composed = LinearRelation {
        source: r1.source.clone(),
        target: r2.target.clone(),
        graph,
    };
    // Transversality: ran(R1) + ran*(R2) = V2; weak: ker(R2) cap ker*(R1) = 0.
    let trans = if r1.range(tol).sum(&r2.corange(tol), tol).dim() == n2 {
        Transversality::Transverse
    } else if r2.kernel(tol).intersect(&r1.cokernel(tol), tol).dim() == 0 {
        Transversality::Weak
    } else {
        Transversality::Neither
    };
    Ok((composed, trans))
}

/// Dirac-morphism classification of R with respect to Lagrangian E1, E2.
pub fn dirac_morphism_class(
    r: &LinearRelation,
    e1: &Subspace,
    e2: &Subspace,
    tol: &TolerancePolicy,
) -> Result<MorphismClass, LinAlgError> {
    if classify(&r.source, e1, tol) != SubspaceClass::Lagrangian {
        return Err(LinAlgError::NotLagrangian(classify(&r.source, e1, tol)));
    }
    if classify(&r.target, e2, tol) != SubspaceClass::Lagrangian {
        return Err(LinAlgError::NotLagrangian(classify(&r.target, e2, tol)));
    }
    let image = r.image_of(e1, tol);
    if !image.equals(e2, tol.eq_tol * 10.0) {
        return Ok(MorphismClass::None);
    }
    // Weak transversality of the composition R o E1: E1 cap ker(R) = 0.
    if e1.intersect(&r.kernel(tol), tol).dim() != 0 {
        return Ok(MorphismClass::None);
    }
    if e1.sum(&r.corange(tol), tol).dim() == r.source.dim {
        Ok(MorphismClass::Strong)
    } else {
        Ok(MorphismClass::Weak)
    }
}

// ---------------------------------------------------------------------------
// Random generators used by property tests and Monte-Carlo scenarios.
// ---------------------------------------------------------------------------

/// Random matrix with standard-normal entries.
pub fn random_matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| {
        // Box-Muller keeps us independent of rand_distr.
        let u1: f64 = rng.gen_range(1e-12..1.0);
        let u2: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
        (-2.0 * u1.ln()).sqrt() * u2.cos()
    })
}

/// Random nondegenerate symmetric metric with the given inertia (p, q).
pub fn random_metric<R: Rng>(rng: &mut R, p: usize, q: usize) -> DMatrix<f64> {
    let n = p + q;
    // G = A^T D A with well-conditioned A keeps the signature explicit.
    let a = {
        let m = random_matrix(rng, n, n);
        let qr = m.qr();
        qr.q() + DMatrix::<f64>::identity(n, n) * 0.1
    };
    let mut d = DMatrix::zeros(n, n);
    for i in 0..p {
        d[(i, i)] = 1.0 + rng.gen_range(0.0..1.0);
    }
    for i in p..n {
        d[(i, i)] = -(1.0 + rng.gen_range(0.0..1.0));
    }
    a.transpose() * d * a
}

/// A metric-orthogonal transformation: exp(G^{-1} K) with K skew.
pub fn random_isometry<R: Rng>(
    rng: &mut R,
    space: &MetrizedSpace,
    scale: f64,
) -> DMatrix<f64> {
    let n = space.dim;
    let m = random_matrix(rng, n, n) * scale;
    let k = (&m - m.transpose()) * 0.5;
    let mut s = space
        .metric
        .clone()
        .lu()
        .solve(&k)
        .expect("nondegenerate metric");
    // Cap the generator norm: for indefinite metrics exp(s) can contain
    // boosts whose magnitude would amplify roundoff past the subspace
    // equality tolerances.
    let norm = s.norm();
    if norm > 1.0 {
        s /= norm;
    }
    matrix_exp(&s)
}

/// Plain scaling-and-squaring matrix exponential on DMatrix.
pub fn matrix_exp(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    let norm = m.amax();
    let s = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as i32
    } else {
        0
    };
    let scaled = m / 2f64.powi(s);
    let mut term = DMatrix::identity(n, n);
    let mut sum = DMatrix::identity(n, n);
    for k in 1..24 {
        term = &term * &scaled / k as f64;
        sum += &term;
        if term.amax() < 1e-18 {
            break;
        }
    }
    let mut out = sum;
    for _ in 0..s {
        out = &out * &out;
    }
    out
}

/// Metric-orthonormal bases of the inertia subspaces: P with P^T G P = I and
/// N with N^T G N = -I, with P^T G N ~ 0.  Built from the sign-function
/// inertia split plus a Cholesky normalization, which keeps the isotropy
/// residual of pairings like P_i + N_i at machine precision.
pub fn hyperbolic_pairs(space: &MetrizedSpace) -> (DMatrix<f64>, DMatrix<f64>) {
    let (bpos, bneg) = inertia_split(&space.metric);
    let normalize = |b: &DMatrix<f64>, flip: bool| -> DMatrix<f64> {
        if b.ncols() == 0 {
            return b.clone();
        }
        let mut gram = b.transpose() * &space.metric * b;
        if flip {
            gram = -gram;
        }
        let chol = gram.cholesky().expect("restricted metric must be definite");
        let l_inv_t = chol
            .l()
            .try_inverse()
            .expect("triangular inverse")
            .transpose();
        b * l_inv_t
    };
    (normalize(&bpos, false), normalize(&bneg, true))
}

/// Random Lagrangian subspace of a split space (requires p = q): a standard
/// Lagrangian from paired inertia bases, moved by a random isometry.
pub fn random_lagrangian<R: Rng>(
    rng: &mut R,
    space: &MetrizedSpace,
    tol: &TolerancePolicy,
) -> Subspace {
    let (p, q) = space.signature;
    assert_eq!(p, q, "Lagrangian subspaces need split signature");
    let (pos, neg) = hyperbolic_pairs(space);
    let span = pos + neg;
    let iso = random_isometry(rng, space, 0.7);
    Subspace::from_span(space.dim, &(iso * span), tol)
}

/// Random coisotropic subspace of the given dimension (>= dim/2 when the
/// signature permits an isotropic of the complementary dimension): the
/// orthogonal of a random isotropic.
pub fn random_coisotropic<R: Rng>(
    rng: &mut R,
    space: &MetrizedSpace,
    dim: usize,
    tol: &TolerancePolicy,
) -> Subspace {
    let k = space.dim - dim;
    let (p, q) = space.signature;
    assert!(k <= p.min(q), "no isotropic of dimension {k} in signature {:?}", (p, q));
    let (pos, neg) = hyperbolic_pairs(space);
    let mut span = DMatrix::zeros(space.dim, k);
    for i in 0..k {
        span.set_column(i, &(pos.column(i) + neg.column(i)));
    }
    let iso = random_isometry(rng, space, 0.7);
    let isotropic = Subspace::from_span(space.dim, &(iso * span), tol);
    orthogonal_complement(space, &isotropic, tol)
}
