//! Composition (α) and robustness (β) quantifiers of a qubit channel.
//!
//! Both are convex programs over Choi matrices:
//!
//! * `α = min a` such that `J = a·Q + (1 − a)·C` with `Q` any channel and `C`
//!   a classical channel;
//! * `β = min b` such that `(J + b·N)/(1 + b)` is classical for some channel `N`.
//!
//! The default classical set is the set of measure-and-prepare channels,
//! which for qubits is exactly the set of Choi matrices with a positive
//! partial transpose. Other sets plug in through [`ClassicalSet`].
//!
//! The programs are solved by a small primal-dual interior-point method on
//! complex Hermitian blocks ([`solve_cone`]).

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::dynamics::{ChoiMatrix, ProcessMatrix};
use crate::error::{Error, Result};
use crate::qcore::{
    c, hermitian_deviation, hermitize, identity, jacobi_eigh, max_abs, partial_trace_matrix,
    partial_transpose, CMatrix, Subsystem,
};

/// Membership tolerance of the classical-set test.
pub const MEMBERSHIP_TOL: f64 = 1e-9;
/// Tolerance of the certificate re-verification.
pub const CERTIFICATE_TOL: f64 = 1e-7;

// ---------------------------------------------------------------------------
// Cone problems
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct VarId(usize);

impl VarId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConeTag {
    Psd,
    /// The partial transpose on the second qubit is PSD (4×4 only).
    PsdAfterPartialTranspose,
}

/// Linear map applied to a variable inside a matrix equality.
#[derive(Debug, Clone, PartialEq)]
pub enum LinearMap {
    Scale(f64),
    PartialTranspose(f64),
    /// `X ↦ s·W X W†` for a rectangular `W`.
    Congruence(CMatrix, f64),
}

impl LinearMap {
    fn adjoint_apply(&self, e: &CMatrix) -> CMatrix {
        match self {
            LinearMap::Scale(s) => e * c(*s, 0.0),
            LinearMap::PartialTranspose(s) => partial_transpose(e) * c(*s, 0.0),
            LinearMap::Congruence(w, s) => hermitize(&(w.adjoint() * e * w)) * c(*s, 0.0),
        }
    }

    pub fn negated(self) -> Self {
        match self {
            LinearMap::Scale(s) => LinearMap::Scale(-s),
            LinearMap::PartialTranspose(s) => LinearMap::PartialTranspose(-s),
            LinearMap::Congruence(w, s) => LinearMap::Congruence(w, -s),
        }
    }

    pub fn apply(&self, x: &CMatrix) -> CMatrix {
        match self {
            LinearMap::Scale(s) => x * c(*s, 0.0),
            LinearMap::PartialTranspose(s) => partial_transpose(x) * c(*s, 0.0),
            LinearMap::Congruence(w, s) => w * x * w.adjoint() * c(*s, 0.0),
        }
    }
}

#[derive(Debug, Clone)]
struct Variable {
    dim: usize,
    tags: Vec<ConeTag>,
}

/// One real equality `Σ Re tr(A_k X_k) = rhs`.
#[derive(Debug, Clone)]
pub struct Constraint {
    pub terms: Vec<(VarId, CMatrix)>,
    pub rhs: f64,
}

/// `min Σ Re tr(C_k X_k)` subject to real affine equalities, each Hermitian
/// matrix variable `X_k` carrying one or more cone tags.
#[derive(Debug, Clone, Default)]
pub struct ConeProblem {
    variables: Vec<Variable>,
    objective: Vec<(VarId, CMatrix)>,
    constraints: Vec<Constraint>,
}

impl ConeProblem {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_variable(&mut self, dim: usize, tags: &[ConeTag]) -> VarId {
        let id = VarId(self.variables.len());
        self.variables.push(Variable {
            dim,
            tags: Vec::new(),
        });
        for &t in tags {
            self.add_tag(id, t);
        }
        id
    }

    pub fn add_tag(&mut self, var: VarId, tag: ConeTag) {
        let tags = &mut self.variables[var.0].tags;
        if !tags.contains(&tag) {
            tags.push(tag);
        }
    }

    pub fn dim(&self, var: VarId) -> usize {
        self.variables[var.0].dim
    }

    pub fn tags(&self, var: VarId) -> &[ConeTag] {
        &self.variables[var.0].tags
    }

    pub fn num_variables(&self) -> usize {
        self.variables.len()
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn set_objective(&mut self, terms: Vec<(VarId, CMatrix)>) {
        self.objective = terms;
    }

    pub fn add_constraint(&mut self, terms: Vec<(VarId, CMatrix)>, rhs: f64) {
        self.constraints.push(Constraint { terms, rhs });
    }

    /// `Σ map_k(X_k) = rhs` as a Hermitian matrix equality, expanded into
    /// `n²` real coordinate equalities.
    pub fn add_matrix_equality(&mut self, terms: &[(VarId, LinearMap)], rhs: &CMatrix) {
        let n = rhs.nrows();
        for e in hermitian_coordinates(n) {
            let value = re_inner(&e, rhs);
            let lifted = terms
                .iter()
                .map(|(var, map)| (*var, map.adjoint_apply(&e)))
                .collect();
            self.add_constraint(lifted, value);
        }
    }

    /// `tr_out X ∝ I` for a 4×4 variable on `input ⊗ output`.
    pub fn add_output_marginal_proportional_to_identity(&mut self, var: VarId) {
        for functional in output_marginal_functionals() {
            self.add_constraint(vec![(var, functional)], 0.0);
        }
    }

    /// Structural checks: every variable is in at least one cone, dimensions
    /// agree and all coefficient matrices are Hermitian.
    pub fn validate(&self) -> Result<()> {
        if self.variables.is_empty() {
            return Err(Error::MalformedProblem("no variables".into()));
        }
        for (k, v) in self.variables.iter().enumerate() {
            if v.dim == 0 || v.dim > 8 {
                return Err(Error::MalformedProblem(format!(
                    "variable {k} has dimension {} (supported: 1..=8)",
                    v.dim
                )));
            }
            if v.tags.is_empty() {
                return Err(Error::MalformedProblem(format!(
                    "variable {k} has no cone tag"
                )));
            }
            if v.tags.contains(&ConeTag::PsdAfterPartialTranspose) && v.dim != 4 {
                return Err(Error::MalformedProblem(format!(
                    "partial-transpose cone needs a 4x4 variable, variable {k} is {}x{}",
                    v.dim, v.dim
                )));
            }
        }
        let check = |what: &str, terms: &[(VarId, CMatrix)]| -> Result<()> {
            for (var, m) in terms {
                let v = self.variables.get(var.0).ok_or_else(|| {
                    Error::MalformedProblem(format!("{what} refers to unknown variable {}", var.0))
                })?;
                if m.shape() != (v.dim, v.dim) {
                    return Err(Error::MalformedProblem(format!(
                        "{what}: coefficient is {}x{}, variable {} is {}x{}",
                        m.nrows(),
                        m.ncols(),
                        var.0,
                        v.dim,
                        v.dim
                    )));
                }
                let dev = hermitian_deviation(m);
                if dev > 1e-12 {
                    return Err(Error::MalformedProblem(format!(
                        "{what}: coefficient is not Hermitian (deviation {dev:.3e})"
                    )));
                }
            }
            Ok(())
        };
        check("objective", &self.objective)?;
        for (i, con) in self.constraints.iter().enumerate() {
            check(&format!("constraint {i}"), &con.terms)?;
            if !con.rhs.is_finite() {
                return Err(Error::MalformedProblem(format!(
                    "constraint {i} has non-finite rhs"
                )));
            }
        }
        Ok(())
    }
}

/// `F ⊗ I` for the three traceless coordinates `F` of the input marginal.
fn output_marginal_functionals() -> Vec<CMatrix> {
    let id2 = identity(2);
    let mut diff = CMatrix::zeros(2, 2);
    diff[(0, 0)] = c(1.0, 0.0);
    diff[(1, 1)] = c(-1.0, 0.0);
    let coords = hermitian_coordinates(2);
    [diff, coords[2].clone(), coords[3].clone()]
        .iter()
        .map(|f| f.kronecker(&id2))
        .collect()
}

/// Basis of real functionals on `n×n` Hermitian matrices: `E_pp`, then for
/// each `p < q` the pair picking `Re X_pq` and `Im X_pq`.
fn hermitian_coordinates(n: usize) -> Vec<CMatrix> {
    let mut out = Vec::with_capacity(n * n);
    for p in 0..n {
        let mut e = CMatrix::zeros(n, n);
        e[(p, p)] = c(1.0, 0.0);
        out.push(e);
    }
    for p in 0..n {
        for q in p + 1..n {
            let mut re = CMatrix::zeros(n, n);
            re[(p, q)] = c(0.5, 0.0);
            re[(q, p)] = c(0.5, 0.0);
            out.push(re);
            let mut im = CMatrix::zeros(n, n);
            im[(p, q)] = c(0.0, 0.5);
            im[(q, p)] = c(0.0, -0.5);
            out.push(im);
        }
    }
    out
}

/// `Re tr(A X)` for Hermitian `A`, `X`.
fn re_inner(a: &CMatrix, x: &CMatrix) -> f64 {
    a.iter()
        .zip(x.iter())
        .map(|(p, q)| p.re * q.re + p.im * q.im)
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverSettings {
    pub max_iterations: usize,
    /// Target for the relative residuals and gap.
    pub tolerance: f64,
    /// Largest primal residual accepted when the target is not reached.
    pub accept_residual: f64,
    /// Largest relative gap accepted when the target is not reached.
    pub accept_gap: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            tolerance: 1e-13,
            accept_residual: 1e-8,
            accept_gap: 1e-6,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ConeSolution {
    /// Optimal value of each problem variable, in declaration order.
    pub values: Vec<CMatrix>,
    pub objective: f64,
    pub dual_objective: f64,
    /// `max(|primal − dual objective|, ⟨X, Z⟩)`.
    pub gap: f64,
    /// Largest absolute violation of an equality constraint.
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub iterations: usize,
}

/// Solves with [`SolverSettings::default`].
pub fn solve_cone(problem: &ConeProblem) -> Result<ConeSolution> {
    solve_cone_with(problem, &SolverSettings::default())
}

pub fn solve_cone_with(problem: &ConeProblem, settings: &SolverSettings) -> Result<ConeSolution> {
    problem.validate()?;
    let (std, reps) = lift(problem);
    let reduced = reduce(&std)?;
    let mut sol = interior_point(&reduced.form, settings)?;
    sol.x = reduced.expand(&sol.x);
    let values = reps
        .iter()
        .map(|rep| match *rep {
            Representation::Direct(b) => sol.x[b].clone(),
            Representation::Transposed(b) => partial_transpose(&sol.x[b]),
        })
        .collect::<Vec<_>>();

    // Residual of the user-level constraints.
    let primal_residual = problem
        .constraints
        .iter()
        .map(|con| {
            let lhs: f64 = con
                .terms
                .iter()
                .map(|(v, a)| re_inner(a, &values[v.0]))
                .sum();
            (lhs - con.rhs).abs()
        })
        .fold(0.0, f64::max);
    Ok(ConeSolution {
        objective: problem
            .objective
            .iter()
            .map(|(v, a)| re_inner(a, &values[v.0]))
            .sum(),
        values,
        dual_objective: sol.dual_objective,
        gap: sol.gap,
        primal_residual,
        dual_residual: sol.dual_residual,
        iterations: sol.iterations,
    })
}

enum Representation {
    Direct(usize),
    /// The variable equals the partial transpose of the block.
    Transposed(usize),
}

struct StandardForm {
    dims: Vec<usize>,
    cost: Vec<CMatrix>,
    /// Per constraint: `(block, coefficient)` parts.
    rows: Vec<Vec<(usize, CMatrix)>>,
    b: DVector<f64>,
}

fn lift(problem: &ConeProblem) -> (StandardForm, Vec<Representation>) {
    let mut dims = Vec::new();
    let mut reps = Vec::new();
    let mut links = Vec::new();
    for v in &problem.variables {
        let psd = v.tags.contains(&ConeTag::Psd);
        let ppt = v.tags.contains(&ConeTag::PsdAfterPartialTranspose);
        dims.push(v.dim);
        let block = dims.len() - 1;
        if psd {
            reps.push(Representation::Direct(block));
            if ppt {
                dims.push(v.dim);
                links.push((block, dims.len() - 1));
            }
        } else {
            reps.push(Representation::Transposed(block));
        }
    }

    let map_term = |var: &VarId, a: &CMatrix| -> (usize, CMatrix) {
        match reps[var.0] {
            Representation::Direct(b) => (b, a.clone()),
            Representation::Transposed(b) => (b, partial_transpose(a)),
        }
    };

    let mut cost: Vec<CMatrix> = dims.iter().map(|&n| CMatrix::zeros(n, n)).collect();
    for (var, a) in &problem.objective {
        let (b, m) = map_term(var, a);
        cost[b] += m;
    }

    let mut rows = Vec::new();
    let mut rhs = Vec::new();
    for con in &problem.constraints {
        let mut parts: Vec<(usize, CMatrix)> = Vec::new();
        for (var, a) in &con.terms {
            let (b, m) = map_term(var, a);
            match parts.iter_mut().find(|(pb, _)| *pb == b) {
                Some((_, acc)) => *acc += m,
                None => parts.push((b, m)),
            }
        }
        parts.retain(|(_, m)| max_abs(m) > 0.0);
        rows.push(parts);
        rhs.push(con.rhs);
    }
    // Y − PT(X) = 0 for variables in both cones.
    for (x_block, y_block) in links {
        for e in hermitian_coordinates(4) {
            rows.push(vec![
                (y_block, e.clone()),
                (x_block, -partial_transpose(&e)),
            ]);
            rhs.push(0.0);
        }
    }
    (
        StandardForm {
            dims,
            cost,
            rows,
            b: DVector::from_vec(rhs),
        },
        reps,
    )
}

/// Standard form restricted to a face of the cone product.
struct Reduced {
    form: StandardForm,
    /// Original block dimension and kept coordinates of each original block.
    kept: Vec<(usize, Vec<usize>)>,
    /// Original block index of each reduced block.
    origin: Vec<usize>,
}

impl Reduced {
    fn expand(&self, x: &[CMatrix]) -> Vec<CMatrix> {
        let mut out: Vec<CMatrix> = self
            .kept
            .iter()
            .map(|(n, _)| CMatrix::zeros(*n, *n))
            .collect();
        for (r, &k) in self.origin.iter().enumerate() {
            let idx = &self.kept[k].1;
            for (a, &p) in idx.iter().enumerate() {
                for (b, &q) in idx.iter().enumerate() {
                    out[k][(p, q)] = x[r][(a, b)];
                }
            }
        }
        out
    }
}

const REDUCTION_TOL: f64 = 1e-13;

/// Diagonal facial reduction followed by removal of dependent equalities.
///
/// A zero-rhs equality whose coefficients are diagonal and of one sign
/// forces the touched diagonal entries, and with them whole rows and columns,
/// to vanish on every feasible point. Restricting to the remaining
/// coordinates restores strict feasibility for rank-deficient data.
fn reduce(sf: &StandardForm) -> Result<Reduced> {
    let nblocks = sf.dims.len();
    let mut alive: Vec<Vec<bool>> = sf.dims.iter().map(|&n| vec![true; n]).collect();
    let b_scale = 1.0 + sf.b.amax();

    loop {
        let mut changed = false;
        for (i, parts) in sf.rows.iter().enumerate() {
            if sf.b[i].abs() > REDUCTION_TOL * b_scale {
                continue;
            }
            let mut sign = 0.0f64;
            let mut diagonal = true;
            let mut touched: Vec<(usize, usize)> = Vec::new();
            'parts: for (k, a) in parts {
                let n = a.nrows();
                for p in 0..n {
                    if !alive[*k][p] {
                        continue;
                    }
                    for q in 0..n {
                        if !alive[*k][q] || a[(p, q)].norm() <= REDUCTION_TOL {
                            continue;
                        }
                        if p != q {
                            diagonal = false;
                            break 'parts;
                        }
                        let d = a[(p, p)].re;
                        if sign == 0.0 {
                            sign = d.signum();
                        } else if sign != d.signum() {
                            diagonal = false;
                            break 'parts;
                        }
                        touched.push((*k, p));
                    }
                }
            }
            if diagonal && !touched.is_empty() {
                for (k, p) in touched {
                    alive[k][p] = false;
                }
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }

    let kept: Vec<(usize, Vec<usize>)> = (0..nblocks)
        .map(|k| {
            (
                sf.dims[k],
                (0..sf.dims[k]).filter(|&p| alive[k][p]).collect(),
            )
        })
        .collect();
    let origin: Vec<usize> = (0..nblocks).filter(|&k| !kept[k].1.is_empty()).collect();
    let mut position = vec![usize::MAX; nblocks];
    for (r, &k) in origin.iter().enumerate() {
        position[k] = r;
    }
    let restrict = |k: usize, a: &CMatrix| -> CMatrix {
        let idx = &kept[k].1;
        CMatrix::from_fn(idx.len(), idx.len(), |r, col| a[(idx[r], idx[col])])
    };

    let dims: Vec<usize> = origin.iter().map(|&k| kept[k].1.len()).collect();
    let cost: Vec<CMatrix> = origin.iter().map(|&k| restrict(k, &sf.cost[k])).collect();

    // Gram–Schmidt over the real coordinates of the restricted rows.
    let flat_len: usize = dims.iter().map(|n| 2 * n * n).sum();
    let offsets: Vec<usize> = dims
        .iter()
        .scan(0, |acc, n| {
            let o = *acc;
            *acc += 2 * n * n;
            Some(o)
        })
        .collect();
    let mut basis: Vec<(DVector<f64>, f64)> = Vec::new();
    let mut rows = Vec::new();
    let mut rhs = Vec::new();
    for (i, parts) in sf.rows.iter().enumerate() {
        let restricted: Vec<(usize, CMatrix)> = parts
            .iter()
            .filter(|(k, _)| position[*k] != usize::MAX)
            .map(|(k, a)| (position[*k], restrict(*k, a)))
            .filter(|(_, a)| max_abs(a) > REDUCTION_TOL)
            .collect();
        let mut v = DVector::<f64>::zeros(flat_len);
        for (r, a) in &restricted {
            for (t, z) in a.iter().enumerate() {
                v[offsets[*r] + 2 * t] = z.re;
                v[offsets[*r] + 2 * t + 1] = z.im;
            }
        }
        let norm0 = v.norm();
        let mut beta = sf.b[i];
        for (u, ub) in &basis {
            let proj = u.dot(&v);
            v.axpy(-proj, u, 1.0);
            beta -= proj * ub;
        }
        let norm = v.norm();
        if norm <= 1e-10 * norm0.max(1.0) {
            if beta.abs() > 1e-9 * b_scale {
                return Err(Error::Infeasible(format!(
                    "equality {i} contradicts the others (mismatch {beta:.3e})"
                )));
            }
            continue;
        }
        basis.push((v / norm, beta / norm));
        rows.push(restricted);
        rhs.push(sf.b[i]);
    }

    Ok(Reduced {
        form: StandardForm {
            dims,
            cost,
            rows,
            b: DVector::from_vec(rhs),
        },
        kept,
        origin,
    })
}

struct RawSolution {
    x: Vec<CMatrix>,
    dual_objective: f64,
    gap: f64,
    dual_residual: f64,
    iterations: usize,
}

fn sym(a: &CMatrix) -> CMatrix {
    hermitize(a)
}

impl StandardForm {
    fn apply(&self, x: &[CMatrix]) -> DVector<f64> {
        DVector::from_iterator(
            self.rows.len(),
            self.rows
                .iter()
                .map(|parts| parts.iter().map(|(b, a)| re_inner(a, &x[*b])).sum::<f64>()),
        )
    }

    fn adjoint(&self, y: &DVector<f64>) -> Vec<CMatrix> {
        let mut out: Vec<CMatrix> = self.dims.iter().map(|&n| CMatrix::zeros(n, n)).collect();
        for (i, parts) in self.rows.iter().enumerate() {
            if y[i] == 0.0 {
                continue;
            }
            for (b, a) in parts {
                out[*b] += a * c(y[i], 0.0);
            }
        }
        out
    }
}

fn blocks_inner(a: &[CMatrix], b: &[CMatrix]) -> f64 {
    a.iter().zip(b).map(|(p, q)| re_inner(p, q)).sum()
}

fn blocks_norm(a: &[CMatrix]) -> f64 {
    a.iter().map(|m| m.norm_squared()).sum::<f64>().sqrt()
}

/// Largest `t ≤ ∞` with `X + t·ΔX ⪰ 0`, given the Cholesky factor of `X`.
fn max_step(l: &CMatrix, dx: &CMatrix) -> f64 {
    let n = l.nrows();
    let linv = l
        .solve_lower_triangular(&identity(n))
        .unwrap_or_else(|| CMatrix::from_element(n, n, c(f64::NAN, 0.0)));
    let m = hermitize(&(&linv * dx * linv.adjoint()));
    let lmin = jacobi_eigh(&m).min();
    if lmin.is_nan() {
        0.0
    } else if lmin >= 0.0 {
        f64::INFINITY
    } else {
        -1.0 / lmin
    }
}

fn cholesky_all(x: &[CMatrix]) -> Option<Vec<CMatrix>> {
    x.iter()
        .map(|m| nalgebra::Cholesky::new(m.clone()).map(|ch| ch.l()))
        .collect()
}

struct Iterate {
    x: Vec<CMatrix>,
    y: DVector<f64>,
    z: Vec<CMatrix>,
}

struct Measures {
    pinf: f64,
    dinf: f64,
    relgap: f64,
    pobj: f64,
    dobj: f64,
    gap: f64,
    dres: f64,
}

impl Measures {
    fn error(&self) -> f64 {
        self.pinf.max(self.dinf).max(self.relgap)
    }
}

fn interior_point(sf: &StandardForm, settings: &SolverSettings) -> Result<RawSolution> {
    let m = sf.rows.len();
    let nblocks = sf.dims.len();
    let total_dim: usize = sf.dims.iter().sum();
    let b_norm = sf.b.norm();
    let c_norm = blocks_norm(&sf.cost);

    // Per-block constraint incidence for the Schur complement.
    let mut incidence: Vec<Vec<(usize, &CMatrix)>> = vec![Vec::new(); nblocks];
    for (i, parts) in sf.rows.iter().enumerate() {
        for (b, a) in parts {
            incidence[*b].push((i, a));
        }
    }

    // Gram matrix of the constraints, for projecting onto A(X) = b.
    let gram = {
        let mut g = DMatrix::<f64>::zeros(m, m);
        for parts in &incidence {
            for &(i, ai) in parts {
                for &(j, aj) in parts {
                    g[(i, j)] += re_inner(ai, aj);
                }
            }
        }
        SchurFactor::new(g)
    };

    // Infeasible starting point scaled to the data.
    let mut it = {
        let mut x = Vec::with_capacity(nblocks);
        let mut z = Vec::with_capacity(nblocks);
        for (k, &n) in sf.dims.iter().enumerate() {
            let nf = n as f64;
            let mut xi: f64 = 10f64.max(nf.sqrt());
            let mut eta: f64 = 10f64.max(nf.sqrt()).max(sf.cost[k].norm());
            for (i, a) in &incidence[k] {
                let an = a.norm();
                xi = xi.max(nf * (1.0 + sf.b[*i].abs()) / (1.0 + an));
                eta = eta.max(an);
            }
            x.push(identity(n) * c(xi, 0.0));
            z.push(identity(n) * c(eta, 0.0));
        }
        Iterate {
            x,
            y: DVector::zeros(m),
            z,
        }
    };

    let measure = |it: &Iterate| -> (Measures, DVector<f64>, Vec<CMatrix>) {
        let rp = &sf.b - sf.apply(&it.x);
        let aty = sf.adjoint(&it.y);
        let rd: Vec<CMatrix> = (0..nblocks)
            .map(|k| &sf.cost[k] - &it.z[k] - &aty[k])
            .collect();
        let pobj = blocks_inner(&sf.cost, &it.x);
        let dobj = sf.b.dot(&it.y);
        let gap = blocks_inner(&it.x, &it.z);
        let scale = 1.0 + pobj.abs() + dobj.abs();
        let dres = blocks_norm(&rd);
        let meas = Measures {
            pinf: rp.norm() / (1.0 + b_norm),
            dinf: dres / (1.0 + c_norm),
            relgap: (pobj - dobj).abs().max(gap.max(0.0)) / scale,
            pobj,
            dobj,
            gap: (pobj - dobj).abs().max(gap.max(0.0)),
            dres,
        };
        (meas, rp, rd)
    };

    let mut best: Option<(Measures, Vec<CMatrix>)> = None;
    let mut stall = 0usize;
    let mut iterations = 0usize;

    for iter in 0..settings.max_iterations {
        iterations = iter;
        let (meas, rp, rd) = measure(&it);
        let improved = best
            .as_ref()
            .is_none_or(|(bm, _)| meas.error() < 0.7 * bm.error());
        if best
            .as_ref()
            .is_none_or(|(bm, _)| meas.error() < bm.error())
        {
            best = Some((meas, it.x.clone()));
        }
        let current = &best.as_ref().expect("best iterate recorded").0;
        if current.error() < settings.tolerance {
            break;
        }
        stall = if improved { 0 } else { stall + 1 };
        if stall >= 6 {
            break;
        }

        let (Some(lx), Some(lz)) = (cholesky_all(&it.x), cholesky_all(&it.z)) else {
            break;
        };
        let zinv: Vec<CMatrix> = lz
            .iter()
            .map(|l| {
                let n = l.nrows();
                let linv = l
                    .solve_lower_triangular(&identity(n))
                    .expect("nonsingular factor");
                linv.adjoint() * linv
            })
            .collect();

        // Schur complement M_ij = Σ_k Re tr(A_ik X_k A_jk Z_k⁻¹).
        let mut schur = DMatrix::<f64>::zeros(m, m);
        for k in 0..nblocks {
            for &(i, ai) in &incidence[k] {
                let p = &zinv[k] * ai * &it.x[k];
                for &(j, aj) in &incidence[k] {
                    if j < i {
                        continue;
                    }
                    // Re tr(A_j P) with P = Z⁻¹ A_i X.
                    let mut acc = 0.0;
                    for r in 0..aj.nrows() {
                        for col in 0..aj.ncols() {
                            let v = aj[(r, col)];
                            if v.re != 0.0 || v.im != 0.0 {
                                acc += (v * p[(col, r)]).re;
                            }
                        }
                    }
                    schur[(i, j)] += acc;
                }
            }
        }
        for i in 0..m {
            for j in 0..i {
                schur[(i, j)] = schur[(j, i)];
            }
        }
        let factor = SchurFactor::new(schur);

        let mu = blocks_inner(&it.x, &it.z) / total_dim as f64;
        let direction = |rc: &[CMatrix]| -> (Vec<CMatrix>, DVector<f64>, Vec<CMatrix>) {
            let shifted: Vec<CMatrix> = (0..nblocks)
                .map(|k| &rc[k] - &it.x[k] * &rd[k] * &zinv[k])
                .collect();
            let rhs = &rp - sf.apply(&shifted);
            let dy = factor.solve(&rhs);
            let atdy = sf.adjoint(&dy);
            let dz: Vec<CMatrix> = (0..nblocks).map(|k| &rd[k] - &atdy[k]).collect();
            let mut dx: Vec<CMatrix> = (0..nblocks)
                .map(|k| sym(&(&rc[k] - &it.x[k] * &dz[k] * &zinv[k])))
                .collect();
            // Restore A(ΔX) = rp lost to the conditioning of the Schur system.
            let miss = &rp - sf.apply(&dx);
            let fix = sf.adjoint(&gram.solve(&miss));
            for k in 0..nblocks {
                dx[k] += &fix[k];
            }
            (dx, dy, dz)
        };
        let steps = |dx: &[CMatrix], dz: &[CMatrix]| -> (f64, f64) {
            let ap = (0..nblocks)
                .map(|k| max_step(&lx[k], &dx[k]))
                .fold(f64::INFINITY, f64::min);
            let ad = (0..nblocks)
                .map(|k| max_step(&lz[k], &dz[k]))
                .fold(f64::INFINITY, f64::min);
            (ap, ad)
        };

        // Predictor.
        let rc_aff: Vec<CMatrix> = it.x.iter().map(|x| -x).collect();
        let (dx_a, _, dz_a) = direction(&rc_aff);
        let (ap_a, ad_a) = steps(&dx_a, &dz_a);
        let (ap_a, ad_a) = (ap_a.min(1.0), ad_a.min(1.0));
        let mu_aff = (0..nblocks)
            .map(|k| {
                re_inner(
                    &(&it.x[k] + &dx_a[k] * c(ap_a, 0.0)),
                    &(&it.z[k] + &dz_a[k] * c(ad_a, 0.0)),
                )
            })
            .sum::<f64>()
            / total_dim as f64;
        let sigma = (mu_aff.max(0.0) / mu).powi(3).min(1.0);

        // Corrector.
        let rc: Vec<CMatrix> = (0..nblocks)
            .map(|k| {
                &zinv[k] * c(sigma * mu, 0.0) - &it.x[k] - sym(&(&dx_a[k] * &dz_a[k] * &zinv[k]))
            })
            .collect();
        let (dx, dy, dz) = direction(&rc);
        let (ap, ad) = steps(&dx, &dz);
        let tau = 0.9 + 0.09 * ap_a.min(ad_a);
        let ap = (tau * ap).min(1.0);
        let ad = (tau * ad).min(1.0);
        if !(ap.is_finite() && ad.is_finite()) || (ap < 1e-12 && ad < 1e-12) {
            break;
        }
        for k in 0..nblocks {
            it.x[k] = hermitize(&(&it.x[k] + &dx[k] * c(ap, 0.0)));
            it.z[k] = hermitize(&(&it.z[k] + &dz[k] * c(ad, 0.0)));
        }
        it.y += dy * ad;

        if it.y.amax() > 1e13 || it.x.iter().any(|x| max_abs(x) > 1e13) {
            break;
        }
    }

    let (meas, x) = best.expect("at least one iterate");
    if meas.pinf * (1.0 + b_norm) <= settings.accept_residual && meas.relgap <= settings.accept_gap
    {
        return Ok(RawSolution {
            x,
            dual_objective: meas.dobj,
            gap: meas.gap,
            dual_residual: meas.dres,
            iterations: iterations + 1,
        });
    }
    if it.y.amax() > 1e10 && meas.pinf > settings.accept_residual {
        return Err(Error::Infeasible(format!(
            "no point satisfies the equalities within {:.1e} (residual {:.3e})",
            settings.accept_residual,
            meas.pinf * (1.0 + b_norm)
        )));
    }
    if it.x.iter().any(|x| max_abs(x) > 1e10) && meas.pobj < -1e8 {
        return Err(Error::Infeasible("objective is unbounded below".into()));
    }
    Err(Error::SolverNotConverged {
        iterations: iterations + 1,
        primal_residual: meas.pinf * (1.0 + b_norm),
        dual_residual: meas.dres,
        gap: meas.gap,
    })
}

enum SchurFactor {
    Cholesky(nalgebra::Cholesky<f64, nalgebra::Dyn>, DMatrix<f64>),
    Lu(
        nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
        DMatrix<f64>,
    ),
}

impl SchurFactor {
    fn new(m: DMatrix<f64>) -> Self {
        match nalgebra::Cholesky::new(m.clone()) {
            Some(ch) => SchurFactor::Cholesky(ch, m),
            None => {
                // Redundant equalities: regularize slightly and pivot.
                let n = m.nrows();
                let reg = 1e-14 * (1.0 + m.diagonal().amax());
                let shifted = &m + DMatrix::<f64>::identity(n, n) * reg;
                SchurFactor::Lu(shifted.clone().lu(), m)
            }
        }
    }

    fn solve(&self, rhs: &DVector<f64>) -> DVector<f64> {
        let (mut x, m) = match self {
            SchurFactor::Cholesky(ch, m) => (ch.solve(rhs), m),
            SchurFactor::Lu(lu, m) => (
                lu.solve(rhs).unwrap_or_else(|| DVector::zeros(rhs.len())),
                m,
            ),
        };
        // One step of iterative refinement.
        let r = rhs - m * &x;
        let corr = match self {
            SchurFactor::Cholesky(ch, _) => ch.solve(&r),
            SchurFactor::Lu(lu, _) => lu.solve(&r).unwrap_or_else(|| DVector::zeros(r.len())),
        };
        x += corr;
        x
    }
}

// ---------------------------------------------------------------------------
// Classical sets
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Membership {
    pub member: bool,
    pub violation: f64,
}

/// A convex set of classical qubit channels, given by its Choi matrices.
///
/// `constrain` must restrict a 4×4 PSD variable to the cone generated by the
/// set (all nonnegative multiples of members).
pub trait ClassicalSet: Send + Sync + fmt::Debug {
    fn tag(&self) -> &str;

    fn membership(&self, choi: &ChoiMatrix) -> Membership;

    fn constrain(&self, problem: &mut ConeProblem, var: VarId) -> Result<()>;

    /// A member in the relative interior of the set, used to absorb roundoff
    /// in returned certificates.
    fn reference_point(&self) -> ChoiMatrix {
        ChoiMatrix::from_raw(identity(4) * c(0.25, 0.0))
    }
}

/// Measure-and-prepare channels: Choi matrices with a PSD partial transpose.
#[derive(Debug, Clone, Copy, Default)]
pub struct MeasurePreparePpt;

impl ClassicalSet for MeasurePreparePpt {
    fn tag(&self) -> &str {
        "MEASURE_PREPARE_PPT"
    }

    fn membership(&self, choi: &ChoiMatrix) -> Membership {
        let min = jacobi_eigh(&partial_transpose(choi.matrix())).min();
        let violation = (-min).max(0.0);
        Membership {
            member: min >= -MEMBERSHIP_TOL,
            violation,
        }
    }

    fn constrain(&self, problem: &mut ConeProblem, var: VarId) -> Result<()> {
        if problem.dim(var) != 4 {
            return Err(Error::MalformedProblem(
                "classical set expects a 4x4 variable".into(),
            ));
        }
        problem.add_tag(var, ConeTag::Psd);
        problem.add_tag(var, ConeTag::PsdAfterPartialTranspose);
        Ok(())
    }
}

#[derive(Debug, Clone, Default)]
pub enum ClassicalSetFormulation {
    #[default]
    MeasurePreparePpt,
    Pluggable(Arc<dyn ClassicalSet>),
}

impl ClassicalSetFormulation {
    pub fn set(&self) -> &dyn ClassicalSet {
        match self {
            ClassicalSetFormulation::MeasurePreparePpt => &MeasurePreparePpt,
            ClassicalSetFormulation::Pluggable(set) => set.as_ref(),
        }
    }

    pub fn tag(&self) -> &str {
        self.set().tag()
    }
}

pub fn is_classical(choi: &ChoiMatrix, f: &ClassicalSetFormulation) -> Membership {
    f.set().membership(choi)
}

// ---------------------------------------------------------------------------
// α and β
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct AlphaCertificate {
    pub quantum: ChoiMatrix,
    pub classical: ChoiMatrix,
    pub weight: f64,
}

#[derive(Debug, Clone)]
pub struct AlphaReport {
    pub alpha: f64,
    pub certificate: AlphaCertificate,
    pub solver_gap: f64,
    pub formulation: String,
}

#[derive(Debug, Clone)]
pub struct BetaCertificate {
    pub noise: ChoiMatrix,
    /// Noise weight at which the certificate mixture is verified classical;
    /// equals `beta` up to roundoff absorbed during verification.
    pub weight: f64,
}

#[derive(Debug, Clone)]
pub struct BetaReport {
    pub beta: f64,
    pub certificate: BetaCertificate,
    pub solver_gap: f64,
    pub formulation: String,
}

#[derive(Debug, Clone)]
pub struct QuantumnessReport {
    pub alpha: AlphaReport,
    pub beta: BetaReport,
}

impl QuantumnessReport {
    pub fn formulation(&self) -> &str {
        &self.alpha.formulation
    }

    pub fn solver_gap(&self) -> f64 {
        self.alpha.solver_gap.max(self.beta.solver_gap)
    }
}

pub fn quantify(chi: &ProcessMatrix, f: &ClassicalSetFormulation) -> Result<QuantumnessReport> {
    Ok(QuantumnessReport {
        alpha: alpha(chi, f)?,
        beta: beta(chi, f)?,
    })
}

pub fn alpha(chi: &ProcessMatrix, f: &ClassicalSetFormulation) -> Result<AlphaReport> {
    alpha_of_choi(&chi.to_choi(), f)
}

pub fn beta(chi: &ProcessMatrix, f: &ClassicalSetFormulation) -> Result<BetaReport> {
    beta_of_choi(&chi.to_choi(), f)
}

pub fn alpha_of_choi(choi: &ChoiMatrix, f: &ClassicalSetFormulation) -> Result<AlphaReport> {
    let set = f.set();
    let j = choi.matrix();
    let report = |alpha: f64, quantum: ChoiMatrix, classical: ChoiMatrix, gap: f64| AlphaReport {
        alpha,
        certificate: AlphaCertificate {
            quantum,
            classical,
            weight: alpha,
        },
        solver_gap: gap,
        formulation: set.tag().to_string(),
    };

    let own = set.membership(choi);
    if own.violation == 0.0 {
        let out = report(0.0, choi.clone(), choi.clone(), 0.0);
        verify_alpha(choi, &out, set)?;
        return Ok(out);
    }
    // A rank-one Choi is an extreme point: it splits only into itself.
    let spectrum = jacobi_eigh(j).eigenvalues;
    if spectrum[1] <= 5e-13 && !own.member {
        let out = report(1.0, choi.clone(), set.reference_point(), 0.0);
        verify_alpha(choi, &out, set)?;
        return Ok(out);
    }

    // Work on the range of J in coordinates whitened by J^{1/2}: with
    // S = W Ŝ W†, R = W R̂ W† the split J = S + R becomes Ŝ + R̂ = I.
    let eig = jacobi_eigh(j);
    let cutoff = 1e-14 * eig.max();
    let keep: Vec<usize> = (0..4).filter(|&i| eig.eigenvalues[i] > cutoff).collect();
    let w = CMatrix::from_fn(4, keep.len(), |row, col| {
        eig.eigenvectors[(row, keep[col])] * eig.eigenvalues[keep[col]].sqrt()
    });
    let rank = keep.len();
    let congruence = LinearMap::Congruence(w.clone(), 1.0);

    let mut p = ConeProblem::new();
    let s_hat = p.add_variable(rank, &[ConeTag::Psd]);
    let r_hat = p.add_variable(rank, &[ConeTag::Psd]);
    let r = p.add_variable(4, &[]);
    set.constrain(&mut p, r)?;
    if p.tags(r).is_empty() {
        p.add_tag(r, ConeTag::Psd);
    }
    p.add_matrix_equality(
        &[
            (s_hat, LinearMap::Scale(1.0)),
            (r_hat, LinearMap::Scale(1.0)),
        ],
        &identity(rank),
    );
    p.add_matrix_equality(
        &[
            (r, LinearMap::Scale(1.0)),
            (r_hat, congruence.clone().negated()),
        ],
        &CMatrix::zeros(4, 4),
    );
    for functional in output_marginal_functionals() {
        p.add_constraint(vec![(s_hat, congruence.adjoint_apply(&functional))], 0.0);
    }
    p.set_objective(vec![(s_hat, w.adjoint() * &w)]);
    let sol = solve_cone(&p)?;

    let s_full = congruence.apply(&sol.values[s_hat.0]);
    let r_full = congruence.apply(&sol.values[r_hat.0]);
    let a = sol.objective.clamp(0.0, 1.0);
    let (quantum, classical) = split_certificate(j, &s_full, &r_full, a, set)?;
    let out = report(a, quantum, classical, sol.gap);
    verify_alpha(choi, &out, set)?;
    Ok(out)
}

/// Normalizes the two parts of `J = S + R` into channels; each part absorbs
/// its own roundoff so the reconstruction error stays at solver accuracy.
fn split_certificate(
    j: &CMatrix,
    s: &CMatrix,
    r: &CMatrix,
    a: f64,
    set: &dyn ClassicalSet,
) -> Result<(ChoiMatrix, ChoiMatrix)> {
    let depolarizing = ChoiMatrix::from_raw(identity(4) * c(0.25, 0.0));
    let classical_violation = |m: &CMatrix| {
        psd_violation(m).max(set.membership(&ChoiMatrix::from_raw(m.clone())).violation)
    };
    if a <= 0.0 {
        return Ok((
            depolarizing,
            repair(j, &set.reference_point(), classical_violation)?,
        ));
    }
    if a >= 1.0 {
        return Ok((ChoiMatrix::from_raw(j.clone()), set.reference_point()));
    }
    let q = repair(s, &depolarizing, psd_violation)?;
    let cl = repair(r, &set.reference_point(), classical_violation)?;
    Ok((q, cl))
}

/// Residual violation left in returned certificates.
const REPAIR_TARGET: f64 = 1e-13;

fn psd_violation(m: &CMatrix) -> f64 {
    (-jacobi_eigh(m).min()).max(0.0)
}

/// Turns an approximately proportional-to-channel matrix into an exact
/// channel with zero violation by normalizing, restoring the input marginal
/// and mixing in `reference`.
fn repair(
    raw: &CMatrix,
    reference: &ChoiMatrix,
    violation: impl Fn(&CMatrix) -> f64,
) -> Result<ChoiMatrix> {
    let tr = raw.trace().re;
    if tr.is_nan() || tr <= 0.0 {
        return Err(Error::Certificate(format!(
            "certificate part has trace {tr:.3e}"
        )));
    }
    let mut m = hermitize(&(raw * c(1.0 / tr, 0.0)));
    let marginal = partial_trace_matrix(&m, Subsystem::First);
    m += (identity(2) * c(0.5, 0.0) - marginal).kronecker(&(identity(2) * c(0.5, 0.0)));
    let v = violation(&m);
    if v <= REPAIR_TARGET {
        return Ok(ChoiMatrix::from_raw(m));
    }
    let mut w = (6.0 * v).min(1.0);
    for _ in 0..60 {
        let mixed = &m * c(1.0 - w, 0.0) + reference.matrix() * c(w, 0.0);
        if violation(&mixed) <= REPAIR_TARGET {
            return Ok(ChoiMatrix::from_raw(mixed));
        }
        if w >= 1.0 {
            break;
        }
        w = (2.0 * w).min(1.0);
    }
    Err(Error::Certificate(format!(
        "could not absorb a violation of {v:.3e} into the reference point"
    )))
}

fn verify_alpha(choi: &ChoiMatrix, report: &AlphaReport, set: &dyn ClassicalSet) -> Result<()> {
    let cert = &report.certificate;
    let a = cert.weight;
    let rebuilt = cert.quantum.matrix() * c(a, 0.0) + cert.classical.matrix() * c(1.0 - a, 0.0);
    let err = max_abs(&(rebuilt - choi.matrix()));
    if err > CERTIFICATE_TOL {
        return Err(Error::Certificate(format!(
            "α decomposition misses the Choi by {err:.3e}"
        )));
    }
    ChoiMatrix::new(cert.quantum.matrix().clone())
        .map_err(|e| Error::Certificate(format!("quantum part is not a channel: {e}")))?;
    ChoiMatrix::new(cert.classical.matrix().clone())
        .map_err(|e| Error::Certificate(format!("classical part is not a channel: {e}")))?;
    let m = set.membership(&cert.classical);
    if !m.member {
        return Err(Error::Certificate(format!(
            "classical part violates the set by {:.3e}",
            m.violation
        )));
    }
    Ok(())
}

pub fn beta_of_choi(choi: &ChoiMatrix, f: &ClassicalSetFormulation) -> Result<BetaReport> {
    let set = f.set();
    let j = choi.matrix();
    let tag = set.tag().to_string();

    if set.membership(choi).violation == 0.0 {
        let out = BetaReport {
            beta: 0.0,
            certificate: BetaCertificate {
                noise: set.reference_point(),
                weight: 0.0,
            },
            solver_gap: 0.0,
            formulation: tag,
        };
        verify_beta(choi, &out, set)?;
        return Ok(out);
    }

    let mut p = ConeProblem::new();
    let m = p.add_variable(4, &[ConeTag::Psd]);
    let w = p.add_variable(4, &[ConeTag::Psd]);
    set.constrain(&mut p, w)?;
    p.add_matrix_equality(
        &[(w, LinearMap::Scale(1.0)), (m, LinearMap::Scale(-1.0))],
        j,
    );
    p.add_output_marginal_proportional_to_identity(m);
    p.set_objective(vec![(m, identity(4))]);
    let sol = solve_cone(&p)?;

    let b = sol.objective.max(0.0);
    let depolarizing = ChoiMatrix::from_raw(identity(4) * c(0.25, 0.0));
    let noise = if b > 0.0 {
        repair(&sol.values[m.0], &depolarizing, psd_violation)?
    } else {
        depolarizing
    };
    // Absorb any remaining roundoff by adding a little of the reference point.
    let reference = set.reference_point();
    let violation_at = |weight: f64, extra: f64| -> f64 {
        let mix = (j + noise.matrix() * c(weight, 0.0) + reference.matrix() * c(extra, 0.0))
            * c(1.0 / (1.0 + weight + extra), 0.0);
        set.membership(&ChoiMatrix::from_raw(mix)).violation
    };
    let mut extra = 0.0;
    let v0 = violation_at(b, 0.0);
    if v0 > REPAIR_TARGET {
        extra = 6.0 * v0;
        let mut tries = 0;
        while violation_at(b, extra) > REPAIR_TARGET && tries < 60 {
            extra *= 2.0;
            tries += 1;
        }
    }
    let weight = b + extra;
    let noise = if extra > 0.0 {
        ChoiMatrix::from_raw(
            (noise.matrix() * c(b, 0.0) + reference.matrix() * c(extra, 0.0))
                * c(1.0 / weight, 0.0),
        )
    } else {
        noise
    };
    let out = BetaReport {
        beta: b,
        certificate: BetaCertificate { noise, weight },
        solver_gap: sol.gap,
        formulation: tag,
    };
    verify_beta(choi, &out, set)?;
    Ok(out)
}

fn verify_beta(choi: &ChoiMatrix, report: &BetaReport, set: &dyn ClassicalSet) -> Result<()> {
    let cert = &report.certificate;
    if (cert.weight - report.beta).abs() > CERTIFICATE_TOL {
        return Err(Error::Certificate(format!(
            "certificate weight {} differs from β = {}",
            cert.weight, report.beta
        )));
    }
    ChoiMatrix::new(cert.noise.matrix().clone())
        .map_err(|e| Error::Certificate(format!("noise is not a channel: {e}")))?;
    let mix = (choi.matrix() + cert.noise.matrix() * c(cert.weight, 0.0))
        * c(1.0 / (1.0 + cert.weight), 0.0);
    let m = set.membership(&ChoiMatrix::from_raw(mix));
    if m.violation > CERTIFICATE_TOL {
        return Err(Error::Certificate(format!(
            "noisy mixture violates the set by {:.3e}",
            m.violation
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{process_from_kappa, unitary_process};
    use crate::qcore::{hermitian_eig, pauli_x, C64};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn default_set() -> ClassicalSetFormulation {
        ClassicalSetFormulation::default()
    }

    fn dephasing_choi(k: C64) -> ChoiMatrix {
        process_from_kappa(k).unwrap().to_choi()
    }

    /// `−2·λmin(PT J)`: every split `J = aQ + (1−a)C` with PPT `C` has
    /// `λmin(PT J) ≥ −a/2`.
    fn alpha_lower_bound(j: &CMatrix) -> f64 {
        (-2.0 * hermitian_eig(&partial_transpose(j)).unwrap().min()).max(0.0)
    }

    /// Largest `|κ|`-weight split into unitary plus full dephasing, checked
    /// by eigenvalues only.
    fn alpha_upper_bound(k: C64) -> f64 {
        let a = k.norm();
        let phase = if a > 0.0 { k / a } else { c(1.0, 0.0) };
        let unitary = process_from_kappa(phase).unwrap().to_choi();
        let dephase = process_from_kappa(c(0.0, 0.0)).unwrap().to_choi();
        let pt = partial_transpose(dephase.matrix());
        assert!(hermitian_eig(&pt).unwrap().min() >= 0.0);
        let rebuilt = unitary.matrix() * c(a, 0.0) + dephase.matrix() * c(1.0 - a, 0.0);
        assert!(max_abs(&(rebuilt - dephasing_choi(k).matrix())) < 1e-15);
        a
    }

    /// Lower bound from the negative eigenvector `v` of `PT J`:
    /// `β ≥ −λmin / λmax(PT(vv†))`.
    fn beta_lower_bound(j: &CMatrix) -> f64 {
        let eig = hermitian_eig(&partial_transpose(j)).unwrap();
        let lmin = eig.min();
        if lmin >= 0.0 {
            return 0.0;
        }
        let v: Vec<C64> = eig.eigenvectors.column(3).iter().copied().collect();
        let proj = crate::qcore::projector(&v);
        let cap = hermitian_eig(&partial_transpose(&proj)).unwrap().max();
        -lmin / cap
    }

    /// Mixing with the bit-flip channel makes the PT PSD at weight `|κ|`.
    fn beta_upper_bound(k: C64) -> f64 {
        let b = k.norm();
        let flip = unitary_process(&pauli_x()).to_choi();
        let mix = dephasing_choi(k).matrix() + flip.matrix() * c(b, 0.0);
        let min = hermitian_eig(&partial_transpose(&mix)).unwrap().min();
        assert!(min >= -1e-15, "{min}");
        b
    }

    #[test]
    fn scalar_lower_bound() {
        let mut p = ConeProblem::new();
        let x = p.add_variable(1, &[ConeTag::Psd]);
        let t = p.add_variable(1, &[ConeTag::Psd]);
        p.add_constraint(vec![(x, identity(1)), (t, -identity(1))], 3.0);
        p.set_objective(vec![(x, identity(1))]);
        let sol = solve_cone(&p).unwrap();
        assert!((sol.objective - 3.0).abs() < 1e-9, "{}", sol.objective);
        assert!(sol.primal_residual < 1e-8);
        assert!(sol.gap < 1e-6);
    }

    #[test]
    fn ppt_feasibility_of_classical_diagonal() {
        let mut p = ConeProblem::new();
        let x = p.add_variable(4, &[ConeTag::PsdAfterPartialTranspose]);
        let target = CMatrix::from_diagonal(&DVector::from_vec(vec![
            c(0.5, 0.0),
            c(0.0, 0.0),
            c(0.0, 0.0),
            c(0.5, 0.0),
        ]));
        p.add_matrix_equality(&[(x, LinearMap::Scale(1.0))], &target);
        p.set_objective(vec![(x, CMatrix::zeros(4, 4))]);
        let sol = solve_cone(&p).unwrap();
        assert!(sol.primal_residual < 1e-8);
        assert!(max_abs(&(&sol.values[0] - target)) < 1e-8);
    }

    #[test]
    fn infeasible_problem_is_reported() {
        let mut p = ConeProblem::new();
        let x = p.add_variable(1, &[ConeTag::Psd]);
        p.add_constraint(vec![(x, identity(1))], -1.0);
        p.set_objective(vec![(x, identity(1))]);
        assert!(matches!(
            solve_cone(&p),
            Err(Error::Infeasible(_)) | Err(Error::SolverNotConverged { .. })
        ));
    }

    #[test]
    fn malformed_problems_are_rejected() {
        let mut p = ConeProblem::new();
        let x = p.add_variable(2, &[]);
        p.set_objective(vec![(x, identity(2))]);
        assert!(matches!(solve_cone(&p), Err(Error::MalformedProblem(_))));

        let mut p = ConeProblem::new();
        let x = p.add_variable(2, &[ConeTag::Psd]);
        let mut bad = identity(2);
        bad[(0, 1)] = c(1.0, 0.0);
        p.add_constraint(vec![(x, bad)], 1.0);
        assert!(matches!(solve_cone(&p), Err(Error::MalformedProblem(_))));

        let mut p = ConeProblem::new();
        p.add_variable(2, &[ConeTag::PsdAfterPartialTranspose]);
        assert!(matches!(p.validate(), Err(Error::MalformedProblem(_))));
    }

    #[test]
    fn is_classical_examples() {
        let f = default_set();
        let deph = is_classical(&dephasing_choi(c(0.0, 0.0)), &f);
        assert!(deph.member && deph.violation == 0.0);

        let id = is_classical(&dephasing_choi(c(1.0, 0.0)), &f);
        assert!(!id.member);
        assert!((id.violation - 0.5).abs() < 1e-12);

        let depol = ChoiMatrix::new(identity(4) * c(0.25, 0.0)).unwrap();
        assert!(is_classical(&depol, &f).member);
    }

    #[test]
    fn alpha_examples() {
        let f = default_set();
        for phase in [0.0, 1.0, -2.5] {
            let r = alpha(
                &process_from_kappa(C64::from_polar(1.0, phase)).unwrap(),
                &f,
            )
            .unwrap();
            assert!((r.alpha - 1.0).abs() < 1e-6);
        }
        assert_eq!(
            alpha(&process_from_kappa(c(0.0, 0.0)).unwrap(), &f)
                .unwrap()
                .alpha,
            0.0
        );
        let r = alpha(&process_from_kappa(c(0.5, 0.0)).unwrap(), &f).unwrap();
        assert!((r.alpha - 0.5).abs() < 1e-6, "{}", r.alpha);
        assert!(r.solver_gap < 1e-6);
        assert_eq!(r.formulation, "MEASURE_PREPARE_PPT");
    }

    #[test]
    fn alpha_matches_bound_chain() {
        let f = default_set();
        for k in [
            c(0.7, 0.0),
            C64::from_polar(0.3, 2.0),
            C64::from_polar(0.999_999, -0.4),
        ] {
            let j = dephasing_choi(k);
            let lo = alpha_lower_bound(j.matrix());
            let hi = alpha_upper_bound(k);
            assert!((hi - lo).abs() < 1e-12);
            let a = alpha_of_choi(&j, &f).unwrap().alpha;
            assert!(a >= lo - 1e-9 && a <= hi + 1e-9, "{a} vs [{lo}, {hi}]");
            assert!((a - k.norm()).abs() < 1e-5);
        }
    }

    #[test]
    fn beta_examples() {
        let f = default_set();
        assert_eq!(
            beta(&process_from_kappa(c(0.0, 0.0)).unwrap(), &f)
                .unwrap()
                .beta,
            0.0
        );
        for k in [c(1.0, 0.0), c(0.5, 0.0), C64::from_polar(0.8, 0.9)] {
            let j = dephasing_choi(k);
            let lo = beta_lower_bound(j.matrix());
            let hi = beta_upper_bound(k);
            assert!((hi - lo).abs() < 1e-12, "{lo} {hi}");
            let r = beta_of_choi(&j, &f).unwrap();
            assert!(
                (r.beta - k.norm()).abs() < 1e-5,
                "{} vs {}",
                r.beta,
                k.norm()
            );
            assert!(r.beta >= lo - 1e-9);
        }
    }

    #[test]
    fn certificates_verify_without_solver() {
        let f = default_set();
        for k in [
            c(0.2, 0.1),
            C64::from_polar(1.0 - 1.6e-8, 0.3),
            C64::from_polar(1e-7, 1.0),
        ] {
            let j = dephasing_choi(k);
            let a = alpha_of_choi(&j, &f).unwrap();
            let cert = &a.certificate;
            let rebuilt = cert.quantum.matrix() * c(cert.weight, 0.0)
                + cert.classical.matrix() * c(1.0 - cert.weight, 0.0);
            assert!(max_abs(&(rebuilt - j.matrix())) < CERTIFICATE_TOL);
            assert!(hermitian_eig(cert.quantum.matrix()).unwrap().min() >= -1e-10);
            assert!(is_classical(&cert.classical, &f).member);

            let b = beta_of_choi(&j, &f).unwrap();
            let w = b.certificate.weight;
            let mix =
                (j.matrix() + b.certificate.noise.matrix() * c(w, 0.0)) * c(1.0 / (1.0 + w), 0.0);
            assert!(hermitian_eig(&partial_transpose(&mix)).unwrap().min() >= -CERTIFICATE_TOL);
            assert!(hermitian_eig(b.certificate.noise.matrix()).unwrap().min() >= -1e-10);
        }
    }

    #[test]
    fn monotone_in_modulus() {
        let f = default_set();
        let mut prev = (-1.0, -1.0);
        for i in 0..=10 {
            let k = c(i as f64 / 10.0, 0.0);
            let chi = process_from_kappa(k).unwrap();
            let r = quantify(&chi, &f).unwrap();
            assert!((r.alpha.alpha - k.re).abs() < 1e-5);
            assert!((r.beta.beta - k.re).abs() < 1e-5);
            assert!(r.alpha.alpha >= prev.0 && r.beta.beta >= prev.1);
            prev = (r.alpha.alpha, r.beta.beta);
        }
    }

    #[test]
    fn phase_invariance() {
        let f = default_set();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let modulus = 0.63;
        let a0 = alpha(&process_from_kappa(c(modulus, 0.0)).unwrap(), &f)
            .unwrap()
            .alpha;
        let b0 = beta(&process_from_kappa(c(modulus, 0.0)).unwrap(), &f)
            .unwrap()
            .beta;
        for _ in 0..20 {
            let phase = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
            let chi = process_from_kappa(C64::from_polar(modulus, phase)).unwrap();
            assert!((alpha(&chi, &f).unwrap().alpha - a0).abs() < 1e-6);
            assert!((beta(&chi, &f).unwrap().beta - b0).abs() < 1e-6);
        }
    }

    #[test]
    fn alpha_is_convex_on_mixtures() {
        let f = default_set();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            let ka = C64::from_polar(rng.random_range(0.0..1.0), rng.random_range(-3.0..3.0));
            let kb = C64::from_polar(rng.random_range(0.0..1.0), rng.random_range(-3.0..3.0));
            let m: f64 = rng.random_range(0.0..1.0);
            let ja = dephasing_choi(ka);
            let jb = dephasing_choi(kb);
            let mix =
                ChoiMatrix::new(ja.matrix() * c(m, 0.0) + jb.matrix() * c(1.0 - m, 0.0)).unwrap();
            let am = alpha_of_choi(&mix, &f).unwrap().alpha;
            let aa = alpha_of_choi(&ja, &f).unwrap().alpha;
            let ab = alpha_of_choi(&jb, &f).unwrap().alpha;
            assert!(am <= m * aa + (1.0 - m) * ab + 1e-6);
        }
    }

    #[test]
    fn generic_channel_alpha_respects_bound() {
        let f = default_set();
        // Amplitude damping with γ = 0.4.
        let g: f64 = 0.4;
        let mut j = CMatrix::zeros(4, 4);
        j[(0, 0)] = c(0.5, 0.0);
        j[(0, 3)] = c(0.5 * (1.0 - g).sqrt(), 0.0);
        j[(3, 0)] = c(0.5 * (1.0 - g).sqrt(), 0.0);
        j[(3, 3)] = c(0.5 * (1.0 - g), 0.0);
        j[(2, 2)] = c(0.5 * g, 0.0);
        let choi = ChoiMatrix::new(j.clone()).unwrap();
        let a = alpha_of_choi(&choi, &f).unwrap().alpha;
        assert!(a >= alpha_lower_bound(&j) - 1e-9);
        assert!(a <= 1.0);
        let b = beta_of_choi(&choi, &f).unwrap().beta;
        assert!(b >= beta_lower_bound(&j) - 1e-9);
    }

    /// Channels with a diagonal Choi matrix: classical stochastic maps
    /// between the basis states.
    #[derive(Debug)]
    struct DiagonalChoi;

    impl ClassicalSet for DiagonalChoi {
        fn tag(&self) -> &str {
            "DIAGONAL_CHOI"
        }

        fn membership(&self, choi: &ChoiMatrix) -> Membership {
            let m = choi.matrix();
            let mut off: f64 = 0.0;
            for r in 0..4 {
                for col in 0..4 {
                    if r != col {
                        off = off.max(m[(r, col)].norm());
                    }
                }
            }
            Membership {
                member: off <= MEMBERSHIP_TOL,
                violation: off,
            }
        }

        fn constrain(&self, problem: &mut ConeProblem, var: VarId) -> Result<()> {
            problem.add_tag(var, ConeTag::Psd);
            for e in hermitian_coordinates(4).into_iter().skip(4) {
                problem.add_constraint(vec![(var, e)], 0.0);
            }
            Ok(())
        }
    }

    #[test]
    fn pluggable_set() {
        let f = ClassicalSetFormulation::Pluggable(Arc::new(DiagonalChoi));
        assert_eq!(f.tag(), "DIAGONAL_CHOI");
        for k in [c(0.0, 0.0), c(0.5, 0.0), C64::from_polar(0.9, 1.2)] {
            let chi = process_from_kappa(k).unwrap();
            let r = quantify(&chi, &f).unwrap();
            assert!((r.alpha.alpha - k.norm()).abs() < 1e-6, "{}", r.alpha.alpha);
            assert!((r.beta.beta - k.norm()).abs() < 1e-6, "{}", r.beta.beta);
            assert_eq!(r.formulation(), "DIAGONAL_CHOI");
        }
        // A Hadamard-like rotation has no diagonal part to keep.
        let h = (pauli_x() + crate::qcore::pauli_z()) * c(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        let r = alpha(&unitary_process(&h), &f).unwrap();
        assert!((r.alpha - 1.0).abs() < 1e-6);
    }
}
