//! Matrix Lie groups with bi-invariant (possibly indefinite) metrics, their
//! metrized Lie algebras, and the double d = g-bar (+) g.
//!
//! Algebra elements are coordinate vectors in a fixed basis; group elements
//! are matrices in a faithful real representation.  Complex groups are
//! realized over the reals by the standard 2n x 2n embedding.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use thiserror::Error;

use crate::linalg::{
    classify, matrix_exp, MetrizedSpace, Subspace, SubspaceClass, TolerancePolicy,
};

#[derive(Debug, Error)]
pub enum LieError {
    #[error("unknown group name: {0}")]
    UnknownGroup(String),
    #[error("algebra invariant violated: {0} (residual {1:.3e})")]
    BadAlgebra(&'static str, f64),
    #[error("matrix is not tangent / not in the algebra span (residual {0:.3e})")]
    NotInAlgebra(f64),
    #[error("group element off the submanifold (residual {0:.3e})")]
    OffGroup(f64),
    #[error("logarithm out of principal-branch range (|X| = {0:.3})")]
    LogRange(f64),
    #[error("automorphism check failed: {0} (residual {1:.3e})")]
    BadAutomorphism(&'static str, f64),
    #[error("subspace is not a Lagrangian subalgebra: {0}")]
    NotLagrangianSubalgebra(String),
}

/// Which submanifold-membership test applies to group elements.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GroupKind {
    /// Real 4x4 embedding of SU(2): orthogonal + complex-structure commuting.
    Su2,
    /// SO(3): orthogonal with det 1.
    So3,
    /// SL(2,R): det 1.
    Sl2r,
    /// Translations as unipotent (d+1)x(d+1) matrices.
    Abelian,
}

/// A group element: a matrix in the group's chosen representation.
#[derive(Debug, Clone)]
pub struct GroupElement {
    pub m: DMatrix<f64>,
}

/// A matrix Lie group together with its metrized Lie algebra.
///
/// `ad[i]` is the matrix of ad(e_i) in the basis, so the bracket of
/// coordinate vectors is [x, y] = sum_i x_i ad[i] y.
#[derive(Debug, Clone)]
pub struct LieGroup {
    pub name: String,
    pub dim: usize,
    pub metric: DMatrix<f64>,
    pub rep_dim: usize,
    pub kind: GroupKind,
    ad: Vec<DMatrix<f64>>,
    rep: Vec<DMatrix<f64>>,
    /// Left inverse of the vectorized representation basis: maps vec(M) to
    /// basis coordinates (least squares).
    rep_solver: DMatrix<f64>,
}

fn vec_mat(m: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_column_slice(m.as_slice())
}

/// Real 2n x 2n embedding of a complex n x n matrix given by (re, im).
fn complex_to_real(re: &DMatrix<f64>, im: &DMatrix<f64>) -> DMatrix<f64> {
    let n = re.nrows();
    let mut out = DMatrix::zeros(2 * n, 2 * n);
    out.view_mut((0, 0), (n, n)).copy_from(re);
    out.view_mut((n, n), (n, n)).copy_from(re);
    out.view_mut((0, n), (n, n)).copy_from(&(-im));
    out.view_mut((n, 0), (n, n)).copy_from(im);
    out
}

impl LieGroup {
    /// Catalogue lookup: "su2", "so3", "sl2r", "abelian:d" or "abelian:p,q"
    /// (signature of the invariant metric on R^{p+q}).
    pub fn by_name(name: &str) -> Result<LieGroup, LieError> {
        match name {
            "su2" => Self::su2(),
            "so3" => Self::so3(),
            "sl2r" => Self::sl2r(),
            _ => {
                if let Some(rest) = name.strip_prefix("abelian:") {
                    let parts: Vec<_> = rest.split(',').collect();
                    let (p, q) = match parts.as_slice() {
                        [d] => (d.trim().parse::<usize>().map_err(|_| {
                            LieError::UnknownGroup(name.into())
                        })?, 0),
                        [p, q] => (
                            p.trim()
                                .parse::<usize>()
                                .map_err(|_| LieError::UnknownGroup(name.into()))?,
                            q.trim()
                                .parse::<usize>()
                                .map_err(|_| LieError::UnknownGroup(name.into()))?,
                        ),
                        _ => return Err(LieError::UnknownGroup(name.into())),
                    };
                    Self::abelian(p, q)
                } else {
                    Err(LieError::UnknownGroup(name.into()))
                }
            }
        }
    }

    /// su(2) with basis e_a = -i sigma_a / 2 (real 4x4 embedding) and metric
    /// <X,Y> = -2 tr_C(XY), which makes the basis orthonormal.
    pub fn su2() -> Result<LieGroup, LieError> {
        let z = DMatrix::zeros(2, 2);
        let s1 = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let s2_im = DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]);
        let s3 = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        // e_a = -i sigma_a / 2: for real sigma the result is purely
        // imaginary; for sigma_2 (purely imaginary) it is real.
        let e1 = complex_to_real(&z, &(-&s1 * 0.5));
        let e2 = complex_to_real(&(&s2_im * 0.5), &z);
        let e3 = complex_to_real(&z, &(-&s3 * 0.5));
        Self::from_rep("su2", vec![e1, e2, e3], DMatrix::identity(3, 3), GroupKind::Su2)
    }

    /// so(3) with generators (L_a)_{ij} = -eps_{aij} and metric -1/2 tr,
    /// which makes the basis orthonormal.
    pub fn so3() -> Result<LieGroup, LieError> {
        let mut basis = Vec::new();
        for a in 0..3 {
            let mut l = DMatrix::zeros(3, 3);
            for i in 0..3 {
                for j in 0..3 {
                    l[(i, j)] = -eps3(a, i, j);
                }
            }
            basis.push(l);
        }
        Self::from_rep("so3", basis, DMatrix::identity(3, 3), GroupKind::So3)
    }

    /// sl(2,R) with basis (h, e, f) and metric tr(XY): signature (2,1).
    pub fn sl2r() -> Result<LieGroup, LieError> {
        let h = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        let e = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        let f = DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 1.0, 0.0]);
        let metric = DMatrix::from_row_slice(
            3,
            3,
            &[2.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 1.0, 0.0],
        );
        Self::from_rep("sl2r", vec![h, e, f], metric, GroupKind::Sl2r)
    }

    /// Abelian R^{p+q} as translations, with diagonal metric of signature
    /// (p, q).
    pub fn abelian(p: usize, q: usize) -> Result<LieGroup, LieError> {
        let d = p + q;
        assert!(d > 0, "abelian group needs positive dimension");
        let n = d + 1;
        let mut basis = Vec::new();
        for i in 0..d {
            let mut m = DMatrix::zeros(n, n);
            m[(i, n - 1)] = 1.0;
            basis.push(m);
        }
        let metric = DMatrix::from_diagonal(&DVector::from_fn(d, |i, _| {
            if i < p {
                1.0
            } else {
                -1.0
            }
        }));
        let label = if q == 0 {
            format!("abelian:{p}")
        } else {
            format!("abelian:{p},{q}")
        };
        Self::from_rep(
            &label,
            basis,
            metric,
            GroupKind::Abelian,
        )
    }

    /// Build from representation matrices of the basis; derives the ad table
    /// from matrix commutators and validates all algebra invariants.
    pub fn from_rep(
        name: &str,
        rep: Vec<DMatrix<f64>>,
        metric: DMatrix<f64>,
        kind: GroupKind,
    ) -> Result<LieGroup, LieError> {
        let d = rep.len();
        let rep_dim = rep[0].nrows();
        // Least-squares solver for coordinates: pinv of the stacked
        // vectorized basis.
        let mut stack = DMatrix::zeros(rep_dim * rep_dim, d);
        for (j, b) in rep.iter().enumerate() {
            stack.set_column(j, &vec_mat(b));
        }
        let gram = stack.transpose() * &stack;
        let rep_solver = gram
            .lu()
            .try_inverse()
            .ok_or(LieError::BadAlgebra("representation basis is dependent", 0.0))?
            * stack.transpose();

        // ad table from commutators of representation matrices.
        let coords = |m: &DMatrix<f64>| -> Result<DVector<f64>, LieError> {
            let c = &rep_solver * vec_mat(m);
            let mut recon = DMatrix::zeros(rep_dim, rep_dim);
            for (j, b) in rep.iter().enumerate() {
                recon += b * c[j];
            }
            let res = (m - recon).norm();
            if res > 1e-9 * m.norm().max(1.0) {
                return Err(LieError::NotInAlgebra(res));
            }
            Ok(c)
        };
        let mut ad = vec![DMatrix::zeros(d, d); d];
        for i in 0..d {
            for j in 0..d {
                let comm = &rep[i] * &rep[j] - &rep[j] * &rep[i];
                let c = coords(&comm)?;
                for k in 0..d {
                    ad[i][(k, j)] = c[k];
                }
            }
        }

        let group = LieGroup {
            name: name.to_string(),
            dim: d,
            metric,
            rep_dim,
            kind,
            ad,
            rep,
            rep_solver,
        };
        group.validate()?;
        Ok(group)
    }

    /// Antisymmetry, Jacobi, and ad-invariance of the metric, all to 1e-12.
    fn validate(&self) -> Result<(), LieError> {
        let d = self.dim;
        let e = |i: usize| {
            let mut v = DVector::zeros(d);
            v[i] = 1.0;
            v
        };
        let mut anti: f64 = 0.0;
        let mut jac: f64 = 0.0;
        let mut inv: f64 = 0.0;
        for i in 0..d {
            for j in 0..d {
                anti = anti.max((self.bracket(&e(i), &e(j)) + self.bracket(&e(j), &e(i))).amax());
                for k in 0..d {
                    let cyc = self.bracket(&self.bracket(&e(i), &e(j)), &e(k))
                        + self.bracket(&self.bracket(&e(j), &e(k)), &e(i))
                        + self.bracket(&self.bracket(&e(k), &e(i)), &e(j));
                    jac = jac.max(cyc.amax());
                    let r = self.inner(&self.bracket(&e(i), &e(j)), &e(k))
                        + self.inner(&e(j), &self.bracket(&e(i), &e(k)));
                    inv = inv.max(r.abs());
                }
            }
        }
        if anti > 1e-12 {
            return Err(LieError::BadAlgebra("antisymmetry", anti));
        }
        if jac > 1e-12 {
            return Err(LieError::BadAlgebra("Jacobi identity", jac));
        }
        if inv > 1e-12 {
            return Err(LieError::BadAlgebra("ad-invariance of metric", inv));
        }
        Ok(())
    }

    pub fn inner(&self, x: &DVector<f64>, y: &DVector<f64>) -> f64 {
        (x.transpose() * &self.metric * y)[(0, 0)]
    }

    /// The algebra as a metrized space.
    pub fn space(&self) -> MetrizedSpace {
        MetrizedSpace::new(self.metric.clone(), &TolerancePolicy::default())
            .expect("catalogue metrics are nondegenerate")
    }

    pub fn bracket(&self, x: &DVector<f64>, y: &DVector<f64>) -> DVector<f64> {
        self.ad_matrix(x) * y
    }

    /// Matrix of ad(x) in the basis.
    pub fn ad_matrix(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.dim, self.dim);
        for i in 0..self.dim {
            out += &self.ad[i] * x[i];
        }
        out
    }

    /// Representation matrix of an algebra element.
    pub fn rep_of(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.rep_dim, self.rep_dim);
        for i in 0..self.dim {
            out += &self.rep[i] * x[i];
        }
        out
    }

    /// Coordinates of a representation matrix; errors if it is not in the
    /// algebra span (relative residual 1e-9).
    pub fn coords_of(&self, m: &DMatrix<f64>) -> Result<DVector<f64>, LieError> {
        let c = &self.rep_solver * vec_mat(m);
        let res = (m - self.rep_of(&c)).norm();
        if res > 1e-9 * m.norm().max(1.0) {
            return Err(LieError::NotInAlgebra(res));
        }
        Ok(c)
    }

    pub fn identity(&self) -> GroupElement {
        GroupElement {
            m: DMatrix::identity(self.rep_dim, self.rep_dim),
        }
    }

    pub fn exp(&self, x: &DVector<f64>) -> GroupElement {
        GroupElement {
            m: matrix_exp(&self.rep_of(x)),
        }
    }

    /// Principal logarithm; enforces the near-identity branch (|X| < pi in
    /// the bi-invariant norm of the coordinates).
    pub fn log(&self, g: &GroupElement) -> Result<DVector<f64>, LieError> {
        let x = matrix_log(&g.m).ok_or(LieError::LogRange(f64::INFINITY))?;
        let c = self.coords_of(&x)?;
        let norm = c.norm();
        if norm >= std::f64::consts::PI {
            return Err(LieError::LogRange(norm));
        }
        Ok(c)
    }

    pub fn mul(&self, a: &GroupElement, b: &GroupElement) -> GroupElement {
        GroupElement { m: &a.m * &b.m }
    }

    pub fn inv(&self, g: &GroupElement) -> GroupElement {
        GroupElement {
            m: g.m.clone().lu().try_inverse().expect("group elements are invertible"),
        }
    }

    /// Adjoint action of g on the algebra, as a dim x dim matrix in the
    /// basis.
    pub fn adjoint(&self, g: &GroupElement) -> DMatrix<f64> {
        let ginv = self.inv(g);
        let mut out = DMatrix::zeros(self.dim, self.dim);
        for i in 0..self.dim {
            let conj = &g.m * &self.rep[i] * &ginv.m;
            let c = self
                .coords_of(&conj)
                .expect("Ad preserves the algebra");
            out.set_column(i, &c);
        }
        out
    }

    /// Residual distance of a matrix from the group submanifold.
    pub fn membership_residual(&self, g: &GroupElement) -> f64 {
        let n = self.rep_dim;
        let id = DMatrix::<f64>::identity(n, n);
        match self.kind {
            GroupKind::So3 => {
                let orth = (&g.m * g.m.transpose() - &id).amax();
                orth.max((g.m.determinant() - 1.0).abs())
            }
            GroupKind::Su2 => {
                // Real embedding of a unitary: orthogonal and commutes with
                // the complex structure J; complex determinant 1.
                let orth = (&g.m * g.m.transpose() - &id).amax();
                let h = n / 2;
                let mut jm = DMatrix::zeros(n, n);
                for i in 0..h {
                    jm[(i, h + i)] = -1.0;
                    jm[(h + i, i)] = 1.0;
                }
                let comm = (&g.m * &jm - &jm * &g.m).amax();
                // det over R of the embedding of a unitary with det_C = 1 is 1.
                orth.max(comm).max((g.m.determinant() - 1.0).abs())
            }
            GroupKind::Sl2r => (g.m.determinant() - 1.0).abs(),
            GroupKind::Abelian => {
                // Unipotent translation block: identity except the last
                // column's top d entries.
                let mut diff = &g.m - &id;
                for i in 0..(n - 1) {
                    diff[(i, n - 1)] = 0.0;
                }
                diff.amax()
            }
        }
    }

    pub fn check_element(&self, g: &GroupElement) -> Result<(), LieError> {
        let res = self.membership_residual(g);
        if res > 1e-9 {
            return Err(LieError::OffGroup(res));
        }
        Ok(())
    }

    /// Tangent matrix of the left-invariant field X^L at g: g * rep(X).
    pub fn left_tangent(&self, g: &GroupElement, x: &DVector<f64>) -> DMatrix<f64> {
        &g.m * self.rep_of(x)
    }

    /// Tangent matrix of the right-invariant field X^R at g: rep(X) * g.
    pub fn right_tangent(&self, g: &GroupElement, x: &DVector<f64>) -> DMatrix<f64> {
        self.rep_of(x) * &g.m
    }

    /// Maurer-Cartan evaluation on a tangent matrix v at g: returns
    /// (iota(v) theta^L, iota(v) theta^R) = (coords(g^-1 v), coords(v g^-1)).
    /// Errors when v is not tangent at g.
    pub fn maurer_cartan(
        &self,
        g: &GroupElement,
        v: &DMatrix<f64>,
    ) -> Result<(DVector<f64>, DVector<f64>), LieError> {
        let ginv = self.inv(g);
        let left = self.coords_of(&(&ginv.m * v))?;
        let right = self.coords_of(&(v * &ginv.m))?;
        Ok((left, right))
    }

    /// Random group element exp(X) with coordinates scaled by `scale`.
    pub fn random_element<R: Rng>(&self, rng: &mut R, scale: f64) -> GroupElement {
        let x = DVector::from_fn(self.dim, |_, _| rng.gen_range(-1.0..1.0) * scale);
        self.exp(&x)
    }

    pub fn random_algebra_vec<R: Rng>(&self, rng: &mut R, scale: f64) -> DVector<f64> {
        DVector::from_fn(self.dim, |_, _| rng.gen_range(-1.0..1.0) * scale)
    }

    /// The catalogued orthogonal automorphism used for twisted Lagrangian
    /// subalgebras (an involution distinct from the identity where one
    /// exists; identity for abelian groups).
    pub fn standard_automorphism(&self) -> DMatrix<f64> {
        match self.kind {
            GroupKind::Su2 => {
                // Complex conjugation: e_1 -> -e_1, e_2 -> e_2, e_3 -> -e_3.
                DMatrix::from_diagonal(&DVector::from_vec(vec![-1.0, 1.0, -1.0]))
            }
            GroupKind::So3 => {
                // Ad of the rotation by pi about the third axis.
                DMatrix::from_diagonal(&DVector::from_vec(vec![-1.0, -1.0, 1.0]))
            }
            GroupKind::Sl2r => {
                // h -> -h, e <-> f.
                DMatrix::from_row_slice(
                    3,
                    3,
                    &[-1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 1.0, 0.0],
                )
            }
            GroupKind::Abelian => DMatrix::identity(self.dim, self.dim),
        }
    }

    /// Central-difference derivative of t -> f(g exp(tX)) at t = 0, with an
    /// optional Richardson extrapolation (one halving).
    pub fn chart_derivative<F>(
        &self,
        f: F,
        g: &GroupElement,
        x: &DVector<f64>,
        fd_step: f64,
        richardson: bool,
    ) -> DVector<f64>
    where
        F: Fn(&GroupElement) -> DVector<f64>,
    {
        let diff = |h: f64| -> DVector<f64> {
            let gp = self.mul(g, &self.exp(&(x * h)));
            let gm = self.mul(g, &self.exp(&(x * -h)));
            (f(&gp) - f(&gm)) / (2.0 * h)
        };
        if richardson {
            (diff(fd_step / 2.0) * 4.0 - diff(fd_step)) / 3.0
        } else {
            diff(fd_step)
        }
    }

    /// Scalar convenience wrapper for [`Self::chart_derivative`].
    pub fn chart_derivative_scalar<F>(
        &self,
        f: F,
        g: &GroupElement,
        x: &DVector<f64>,
        fd_step: f64,
        richardson: bool,
    ) -> f64
    where
        F: Fn(&GroupElement) -> f64,
    {
        self.chart_derivative(
            |a| DVector::from_vec(vec![f(a)]),
            g,
            x,
            fd_step,
            richardson,
        )[0]
    }

    /// The double d = g-bar (+) g with componentwise bracket and metric
    /// blockdiag(-G, G).
    pub fn double(&self) -> DoubleAlgebra {
        DoubleAlgebra::new(self.clone())
    }
}

fn eps3(i: usize, j: usize, k: usize) -> f64 {
    match (i, j, k) {
        (0, 1, 2) | (1, 2, 0) | (2, 0, 1) => 1.0,
        (0, 2, 1) | (2, 1, 0) | (1, 0, 2) => -1.0,
        _ => 0.0,
    }
}

/// Principal matrix logarithm via inverse scaling and squaring
/// (Denman-Beavers square roots until close to the identity, then the
/// alternating series).  Returns None when an iteration fails to converge.
pub fn matrix_log(m: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let n = m.nrows();
    let id = DMatrix::<f64>::identity(n, n);
    let mut a = m.clone();
    let mut halvings = 0u32;
    while (&a - &id).amax() > 0.3 {
        if halvings > 40 {
            return None;
        }
        a = matrix_sqrt(&a)?;
        halvings += 1;
    }
    let z = &a - &id;
    let mut term = id.clone();
    let mut sum = DMatrix::zeros(n, n);
    for k in 1..80 {
        term = &term * &z;
        let contrib = &term * (if k % 2 == 1 { 1.0 } else { -1.0 } / k as f64);
        sum += &contrib;
        if contrib.amax() < 1e-17 {
            break;
        }
    }
    Some(sum * 2f64.powi(halvings as i32))
}

/// Principal square root by the Denman-Beavers iteration.
fn matrix_sqrt(m: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let mut y = m.clone();
    let n = m.nrows();
    let mut z = DMatrix::<f64>::identity(n, n);
    for _ in 0..60 {
        let yi = y.clone().lu().try_inverse()?;
        let zi = z.clone().lu().try_inverse()?;
        let y_next = (&y + zi) * 0.5;
        let z_next = (&z + yi) * 0.5;
        let diff = (&y_next - &y).amax();
        y = y_next;
        z = z_next;
        if diff < 1e-15 {
            return Some(y);
        }
    }
    Some(y)
}

/// The double d = g-bar (+) g: elements are stacked coordinate vectors
/// (X0, X1), bracket is componentwise, metric is blockdiag(-G, G).
#[derive(Debug, Clone)]
pub struct DoubleAlgebra {
    pub base: LieGroup,
    pub dim: usize,
    pub metric: DMatrix<f64>,
}

impl DoubleAlgebra {
    pub fn new(base: LieGroup) -> DoubleAlgebra {
        let d = base.dim;
        let mut metric = DMatrix::zeros(2 * d, 2 * d);
        metric.view_mut((0, 0), (d, d)).copy_from(&(-&base.metric));
        metric.view_mut((d, d), (d, d)).copy_from(&base.metric);
        DoubleAlgebra {
            base,
            dim: 2 * d,
            metric,
        }
    }

    pub fn space(&self) -> MetrizedSpace {
        MetrizedSpace::new(self.metric.clone(), &TolerancePolicy::default())
            .expect("double metric is nondegenerate")
    }

    pub fn pack(&self, x0: &DVector<f64>, x1: &DVector<f64>) -> DVector<f64> {
        let d = self.base.dim;
        let mut out = DVector::zeros(2 * d);
        out.rows_mut(0, d).copy_from(x0);
        out.rows_mut(d, d).copy_from(x1);
        out
    }

    pub fn unpack(&self, y: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        let d = self.base.dim;
        (y.rows(0, d).into_owned(), y.rows(d, d).into_owned())
    }

    pub fn bracket(&self, y: &DVector<f64>, z: &DVector<f64>) -> DVector<f64> {
        let (y0, y1) = self.unpack(y);
        let (z0, z1) = self.unpack(z);
        self.pack(&self.base.bracket(&y0, &z0), &self.base.bracket(&y1, &z1))
    }

    pub fn inner(&self, y: &DVector<f64>, z: &DVector<f64>) -> f64 {
        (y.transpose() * &self.metric * z)[(0, 0)]
    }

    /// The diagonal subalgebra g_Delta = {(X, X)}.
    pub fn diagonal(&self, tol: &TolerancePolicy) -> Subspace {
        let d = self.base.dim;
        let mut span = DMatrix::zeros(2 * d, d);
        for i in 0..d {
            span[(i, i)] = 1.0;
            span[(d + i, i)] = 1.0;
        }
        Subspace::from_span(2 * d, &span, tol)
    }

    /// Max residual of bracket-closure of a subspace of the double:
    /// max over basis pairs of the norm of the component of [x, y] outside
    /// the subspace.
    pub fn closure_residual(&self, s: &Subspace) -> f64 {
        let b = &s.basis;
        let mut worst: f64 = 0.0;
        for i in 0..b.ncols() {
            for j in 0..b.ncols() {
                let br = self.bracket(&b.column(i).into_owned(), &b.column(j).into_owned());
                let proj = b * (b.transpose() * &br);
                worst = worst.max((br - proj).norm());
            }
        }
        worst
    }
}

/// A Lagrangian Lie subalgebra of the double, with its closure certificate.
#[derive(Debug, Clone)]
pub struct LagrangianSubalgebra {
    pub subspace: Subspace,
    pub closure_residual: f64,
}

impl LagrangianSubalgebra {
    /// Validate an arbitrary subspace of the double as a Lagrangian
    /// subalgebra.
    pub fn from_subspace(
        d: &DoubleAlgebra,
        s: Subspace,
        tol: &TolerancePolicy,
    ) -> Result<LagrangianSubalgebra, LieError> {
        let class = classify(&d.space(), &s, tol);
        if class != SubspaceClass::Lagrangian {
            return Err(LieError::NotLagrangianSubalgebra(format!(
                "classified as {class:?}"
            )));
        }
        let closure = d.closure_residual(&s);
        if closure > tol.eq_tol {
            return Err(LieError::NotLagrangianSubalgebra(format!(
                "bracket-closure residual {closure:.3e}"
            )));
        }
        Ok(LagrangianSubalgebra {
            subspace: s,
            closure_residual: closure,
        })
    }
}

/// gr(kappa) = {(kappa X, X)} for an orthogonal bracket-preserving
/// automorphism kappa of the base algebra.
pub fn graph_subalgebra(
    d: &DoubleAlgebra,
    kappa: &DMatrix<f64>,
    tol: &TolerancePolicy,
) -> Result<LagrangianSubalgebra, LieError> {
    let g = &d.base;
    let orth = (kappa.transpose() * &g.metric * kappa - &g.metric).amax();
    if orth > 1e-10 {
        return Err(LieError::BadAutomorphism("orthogonality", orth));
    }
    let mut brk: f64 = 0.0;
    for i in 0..g.dim {
        for j in 0..g.dim {
            let ei = DVector::from_fn(g.dim, |k, _| if k == i { 1.0 } else { 0.0 });
            let ej = DVector::from_fn(g.dim, |k, _| if k == j { 1.0 } else { 0.0 });
            let lhs = kappa * g.bracket(&ei, &ej);
            let rhs = g.bracket(&(kappa * ei), &(kappa * ej));
            brk = brk.max((lhs - rhs).amax());
        }
    }
    if brk > 1e-10 {
        return Err(LieError::BadAutomorphism("bracket preservation", brk));
    }
    let dim = g.dim;
    let mut span = DMatrix::zeros(2 * dim, dim);
    span.view_mut((0, 0), (dim, dim)).copy_from(kappa);
    span.view_mut((dim, 0), (dim, dim))
        .copy_from(&DMatrix::identity(dim, dim));
    let s = Subspace::from_span(2 * dim, &span, tol);
    LagrangianSubalgebra::from_subspace(d, s, tol)
}

/// Recover kappa from a Lagrangian subalgebra that is a graph over the second
/// factor; None if the subspace is not such a graph.
pub fn recover_automorphism(
    d: &DoubleAlgebra,
    s: &LagrangianSubalgebra,
) -> Option<DMatrix<f64>> {
    let dim = d.base.dim;
    let b = &s.subspace.basis;
    if b.ncols() != dim {
        return None;
    }
    let top = b.rows(0, dim).into_owned();
    let bottom = b.rows(dim, dim).into_owned();
    let binv = bottom.lu().try_inverse()?;
    Some(top * binv)
}
