//! Numerical linear Dirac geometry and lattice holonomy reduction.
//!
//! The crate is organized bottom-up:
//!
//! * [`linalg`] — metrized vector spaces, subspaces, Lagrangian relations,
//!   coisotropic reduction, all with explicit rank/equality tolerances.
//! * [`liegroup`] — a small catalogue of matrix Lie groups with invariant
//!   metrics, plus `exp`/`log`/`Ad`/`ad` and Maurer-Cartan evaluation.
//! * [`cartan`] — the Cartan-Courant algebroid `G x (g-bar (+) g)`: anchor,
//!   generators, splitting, the bi-invariant 3-form, Dirac structures from
//!   Lagrangian subalgebras, and the multiplicative (pair-groupoid) relations.
//! * [`holonomy`] — lattice-discretized connections over the interval with
//!   gauge action, holonomy, covariant-derivative generators, principal
//!   connections and the 2-form used to twist splittings.
//! * [`reduction`] — fiberwise coisotropic reduction of the lattice model and
//!   the comparison against the Cartan-Courant structure.
//! * [`qham`] — group-valued-moment-map spaces (conjugacy classes, fusion)
//!   and the loop <-> group correspondence.
//! * [`scenario`] — named verification scenarios, reports, and the runner
//!   backing the CLI.

pub mod cartan;
pub mod holonomy;
pub mod linalg;
pub mod liegroup;
pub mod par;
pub mod qham;
pub mod reduction;
pub mod scenario;
