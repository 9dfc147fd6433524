//! Piecewise-linear finite elements on a uniform grid of `(0, L)` and a
//! Crank-Nicolson solver for
//!
//! ```text
//! M y' = −ν S y − R(t) y − M [U] P (−ν S − R(t) + λ M) y  (+ boundary terms)
//! ```
//!
//! where the reaction and the feedback are treated as an external force and
//! extrapolated linearly from the two previous steps.

use std::f64::consts::PI;
use std::fmt;
use std::ops::Range;
use std::sync::Arc;

use crate::actuators::ActuatorSet;
use crate::linalg::{solve_dense, sym_eigen, DenseMatrix, SpdTriFactor, SymTriDiag};
use crate::spectral::{BoundaryCondition, EigenBasis};
use crate::{Error, Result};

/// Uniform grid `x_i = i h`, `i = 0..N`, `h = L/(N − 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FemGrid {
    length: f64,
    nodes: usize,
}

impl FemGrid {
    pub fn new(length: f64, nodes: usize) -> Result<Self> {
        if nodes < 2 {
            return Err(Error::InvalidArgument(format!("grid needs at least 2 nodes, got {nodes}")));
        }
        if !(length > 0.0) || !length.is_finite() {
            return Err(Error::InvalidArgument(format!("length must be positive, got {length}")));
        }
        Ok(Self { length, nodes })
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn len(&self) -> usize {
        self.nodes
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn h(&self) -> f64 {
        self.length / (self.nodes - 1) as f64
    }

    /// Node `i` (0-based); the last node is exactly `L`.
    pub fn node(&self, i: usize) -> f64 {
        if i + 1 == self.nodes {
            self.length
        } else {
            i as f64 * self.h()
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.nodes).map(|i| self.node(i)).collect()
    }

    pub fn sample(&self, f: impl Fn(f64) -> f64) -> Vec<f64> {
        (0..self.nodes).map(|i| f(self.node(i))).collect()
    }

    /// Interior nodes `1..N−1`.
    pub fn interior(&self) -> Range<usize> {
        1..self.nodes - 1
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FemMatrices {
    grid: FemGrid,
    mass: SymTriDiag,
    stiffness: SymTriDiag,
}

/// Exact mass and stiffness matrices of the hat functions.
pub fn assemble_fem(grid: &FemGrid) -> Result<FemMatrices> {
    let n = grid.len();
    if n < 3 {
        return Err(Error::InvalidArgument(format!("FEM needs at least 3 nodes, got {n}")));
    }
    let h = grid.h();
    let inv = 1.0 / h;
    let mut md = vec![2.0 * h / 3.0; n];
    md[0] = h / 3.0;
    md[n - 1] = h / 3.0;
    let mut sd = vec![2.0 * inv; n];
    sd[0] = inv;
    sd[n - 1] = inv;
    Ok(FemMatrices {
        grid: *grid,
        mass: SymTriDiag::new(md, vec![h / 6.0; n - 1])?,
        stiffness: SymTriDiag::new(sd, vec![-inv; n - 1])?,
    })
}

impl FemMatrices {
    pub fn grid(&self) -> &FemGrid {
        &self.grid
    }

    pub fn mass(&self) -> &SymTriDiag {
        &self.mass
    }

    pub fn stiffness(&self) -> &SymTriDiag {
        &self.stiffness
    }

    /// `(yᵀ M y)^{1/2}`.
    pub fn l2_norm(&self, y: &[f64]) -> f64 {
        self.mass_inner(y, y).max(0.0).sqrt()
    }

    /// `yᵀ M z`.
    pub fn mass_inner(&self, y: &[f64], z: &[f64]) -> f64 {
        let mz = self.mass.matvec(z);
        y.iter().zip(&mz).map(|(a, b)| a * b).sum()
    }
}

/// `R = (M Diag(a) + Diag(a) M) / 2`.
pub fn reaction_matrix(fem: &FemMatrices, a_nodal: &[f64]) -> Result<SymTriDiag> {
    let m = fem.mass();
    if a_nodal.len() != m.len() {
        return Err(Error::InvalidArgument(format!(
            "reaction has {} nodal values for {} nodes",
            a_nodal.len(),
            m.len()
        )));
    }
    let diag = m.diag().iter().zip(a_nodal).map(|(d, a)| d * a).collect();
    let off = m
        .offdiag()
        .iter()
        .enumerate()
        .map(|(i, o)| o * 0.5 * (a_nodal[i] + a_nodal[i + 1]))
        .collect();
    SymTriDiag::new(diag, off)
}

/// Reaction coefficient `a(x, t)`.
pub trait ReactionField: Send + Sync {
    fn value(&self, x: f64, t: f64) -> f64;

    fn describe(&self) -> String;

    /// Whether `a` depends on `t`; constant fields let the solver reuse `R`.
    fn is_time_dependent(&self) -> bool {
        true
    }

    fn nodal(&self, grid: &FemGrid, t: f64) -> Vec<f64> {
        grid.sample(|x| self.value(x, t))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantReaction(pub f64);

impl ReactionField for ConstantReaction {
    fn value(&self, _x: f64, _t: f64) -> f64 {
        self.0
    }

    fn describe(&self) -> String {
        format!("constant:{}", self.0)
    }

    fn is_time_dependent(&self) -> bool {
        false
    }
}

/// `a(x, t) = −35 ν (π/L)² − 2 |cos(4t) cos(x t) x|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OscillatingReaction {
    pub nu: f64,
    pub length: f64,
}

impl ReactionField for OscillatingReaction {
    fn value(&self, x: f64, t: f64) -> f64 {
        -35.0 * self.nu * (PI / self.length).powi(2) - 2.0 * ((4.0 * t).cos() * (x * t).cos() * x).abs()
    }

    fn describe(&self) -> String {
        "oscillating".into()
    }
}

/// Values on a `t × x` table, bilinear in between and clamped outside.
#[derive(Debug, Clone, PartialEq)]
pub struct TabulatedReaction {
    times: Vec<f64>,
    xs: Vec<f64>,
    /// Row-major, one row per time.
    values: Vec<f64>,
}

impl TabulatedReaction {
    pub fn new(times: Vec<f64>, xs: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.is_empty() || xs.is_empty() || values.len() != times.len() * xs.len() {
            return Err(Error::InvalidArgument(format!(
                "reaction table needs {} x {} values, got {}",
                times.len(),
                xs.len(),
                values.len()
            )));
        }
        let increasing = |v: &[f64]| v.windows(2).all(|w| w[1] > w[0]);
        if !increasing(&times) || !increasing(&xs) {
            return Err(Error::InvalidArgument("reaction table axes must be strictly increasing".into()));
        }
        if values.iter().chain(&times).chain(&xs).any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("reaction table has non-finite entries".into()));
        }
        Ok(Self { times, xs, values })
    }

    /// Parses a table whose first row is `t,x_1,...,x_n` and whose other rows
    /// are `t_k,a(x_1,t_k),...,a(x_n,t_k)`. Blank lines and `#` lines are skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let mut rows = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'));
        let header = rows
            .next()
            .ok_or_else(|| Error::InvalidArgument("empty reaction table".into()))?;
        let parse = |s: &str| {
            s.trim()
                .parse::<f64>()
                .map_err(|e| Error::InvalidArgument(format!("bad number {s:?} in reaction table: {e}")))
        };
        let xs = header.split(',').skip(1).map(parse).collect::<Result<Vec<_>>>()?;
        let mut times = Vec::new();
        let mut values = Vec::new();
        for row in rows {
            let mut fields = row.split(',');
            times.push(parse(fields.next().unwrap_or(""))?);
            let vals = fields.map(parse).collect::<Result<Vec<_>>>()?;
            if vals.len() != xs.len() {
                return Err(Error::InvalidArgument(format!(
                    "reaction table row at t = {} has {} values, expected {}",
                    times.last().unwrap(),
                    vals.len(),
                    xs.len()
                )));
            }
            values.extend(vals);
        }
        Self::new(times, xs, values)
    }
}

/// Index `i` and weight `w` with `v ≈ (1 − w) v_i + w v_{i+1}`, clamped.
fn bracket(axis: &[f64], s: f64) -> (usize, f64) {
    if axis.len() == 1 || s <= axis[0] {
        return (0, 0.0);
    }
    let last = axis.len() - 1;
    if s >= axis[last] {
        return (last - 1, 1.0);
    }
    let i = axis.partition_point(|&a| a <= s) - 1;
    (i, (s - axis[i]) / (axis[i + 1] - axis[i]))
}

impl ReactionField for TabulatedReaction {
    fn value(&self, x: f64, t: f64) -> f64 {
        let nx = self.xs.len();
        let at = |k: usize, j: usize| self.values[k * nx + j];
        let (k, wt) = bracket(&self.times, t);
        let (j, wx) = bracket(&self.xs, x);
        let k1 = (k + 1).min(self.times.len() - 1);
        let j1 = (j + 1).min(nx - 1);
        let lo = (1.0 - wx) * at(k, j) + wx * at(k, j1);
        let hi = (1.0 - wx) * at(k1, j) + wx * at(k1, j1);
        (1.0 - wt) * lo + wt * hi
    }

    fn describe(&self) -> String {
        format!("table:{}x{}", self.times.len(), self.xs.len())
    }

    fn is_time_dependent(&self) -> bool {
        self.times.len() > 1
    }
}

/// Nodal form of the oblique projection: `[U]`, `[E]` and
/// `P = [e_iᵀ M 1_{ω_j}]^{-1} [E]ᵀ`.
#[derive(Debug, Clone)]
pub struct FeedbackOperator {
    /// `N × M`, column `j` holds the nodal values of `1_{ω_j}`.
    actuators: DenseMatrix,
    /// `N × M`, column `i` holds the nodal values of `e_i`.
    eigen: DenseMatrix,
    /// `M × N`.
    p: DenseMatrix,
}

/// Precomputes `[U]`, `[E]` and `P` for one grid.
pub fn feedback_matrices(
    bc: BoundaryCondition,
    set: &ActuatorSet,
    basis: &EigenBasis,
    fem: &FemMatrices,
) -> Result<FeedbackOperator> {
    let grid = fem.grid();
    let m = set.count();
    if basis.count() != m || basis.bc() != bc {
        return Err(Error::InvalidArgument(format!(
            "eigenbasis ({} {} modes) does not match {m} actuators under {bc}",
            basis.count(),
            basis.bc()
        )));
    }
    let tol = 1e-9 * grid.length();
    if (basis.length() - grid.length()).abs() > tol || (set.length() - grid.length()).abs() > tol {
        return Err(Error::InvalidArgument("grid, basis and actuators live on different intervals".into()));
    }
    let n = grid.len();
    let nodes = grid.nodes();
    let actuators = DenseMatrix::from_fn(n, m, |i, j| set.indicator(j + 1, nodes[i]));
    let eigen = DenseMatrix::from_fn(n, m, |i, k| basis.value(k + 1, nodes[i]));
    let mass_u: Vec<Vec<f64>> = (0..m).map(|j| fem.mass().matvec(&actuators.column(j))).collect();
    let a = DenseMatrix::from_fn(m, m, |i, j| {
        (0..n).map(|l| eigen[(l, i)] * mass_u[j][l]).sum()
    });
    let p = solve_dense(&a, &eigen.transpose()).map_err(|e| match e {
        Error::SingularMatrix(msg) => Error::DirectSumFailure(format!(
            "discrete matrix [e_i' M 1_w_j] is singular ({msg}); refine the mesh so that h is well below the actuator half-width"
        )),
        other => other,
    })?;
    Ok(FeedbackOperator { actuators, eigen, p })
}

impl FeedbackOperator {
    pub fn count(&self) -> usize {
        self.p.rows()
    }

    pub fn actuators(&self) -> &DenseMatrix {
        &self.actuators
    }

    pub fn eigen(&self) -> &DenseMatrix {
        &self.eigen
    }

    pub fn p(&self) -> &DenseMatrix {
        &self.p
    }

    /// `q = P M z`, the actuator coefficients of the projection of `z`.
    pub fn coefficients(&self, fem: &FemMatrices, z: &[f64]) -> Vec<f64> {
        self.p.matvec(&fem.mass().matvec(z))
    }

    /// `[U] P M z`.
    pub fn project(&self, fem: &FemMatrices, z: &[f64]) -> Vec<f64> {
        self.actuators.matvec(&self.coefficients(fem, z))
    }

    /// `sup_z ‖[U] P M z‖_M / ‖z‖_M`, computed exactly as
    /// `λ_max(W^{1/2} G_U W^{1/2})^{1/2}` with `W = P M Pᵀ`, `G_U = [U]ᵀ M [U]`.
    pub fn discrete_norm(&self, fem: &FemMatrices) -> Result<f64> {
        let m = self.count();
        let mass_pt: Vec<Vec<f64>> = (0..m).map(|i| fem.mass().matvec(self.p.row(i))).collect();
        let w = DenseMatrix::from_fn(m, m, |i, j| crate::linalg::dot(self.p.row(i), &mass_pt[j]));
        let mass_u: Vec<Vec<f64>> = (0..m).map(|j| fem.mass().matvec(&self.actuators.column(j))).collect();
        let gu = DenseMatrix::from_fn(m, m, |i, j| crate::linalg::dot(&self.actuators.column(i), &mass_u[j]));
        let ew = sym_eigen(&w)?;
        let sqrt_vals: Vec<f64> = ew.values.iter().map(|v| v.max(0.0).sqrt()).collect();
        let w_half = DenseMatrix::from_fn(m, m, |i, j| {
            (0..m).map(|k| ew.vectors[(i, k)] * sqrt_vals[k] * ew.vectors[(j, k)]).sum()
        });
        let b = w_half.matmul(&gu)?.matmul(&w_half)?;
        let eb = sym_eigen(&b)?;
        Ok(eb.values[m - 1].max(0.0).sqrt())
    }
}

/// Nodal feedback force `f = −[U] P (−ν S − R + λ M) y`.
pub fn feedback_apply(
    op: &FeedbackOperator,
    fem: &FemMatrices,
    reaction: &SymTriDiag,
    nu: f64,
    lambda: f64,
    y: &[f64],
) -> Vec<f64> {
    let sy = fem.stiffness().matvec(y);
    let ry = reaction.matvec(y);
    let my = fem.mass().matvec(y);
    let v: Vec<f64> = (0..y.len())
        .map(|i| -nu * sy[i] - ry[i] + lambda * my[i])
        .collect();
    let q = op.p.matvec(&v);
    op.actuators.matvec(&q).into_iter().map(|x| -x).collect()
}

/// Dirichlet values `(y(0,t), y(L,t))` or Neumann flux data `(g_1(t), g_2(t))`.
pub type BoundaryFn = Arc<dyn Fn(f64) -> [f64; 2] + Send + Sync>;

/// One Crank-Nicolson step with an explicit, extrapolated force:
///
/// ```text
/// (2M + kνS) y^j = (2M − kνS) y^{j−1} + k (3 h^{j−1} − h^{j−2})  (+ boundary terms)
/// ```
///
/// Dirichlet problems solve for interior nodes only and move the known
/// boundary values to the right side. Neumann problems solve on all nodes and
/// add `k (G^j + G^{j−1})` with `G = (g_1, 0, …, 0, −g_2)`.
#[derive(Debug, Clone)]
pub struct CrankNicolson {
    bc: BoundaryCondition,
    k: f64,
    /// `2M + kνS`, full size.
    plus: SymTriDiag,
    /// `2M − kνS`, full size.
    minus: SymTriDiag,
    factor: SpdTriFactor,
}

impl CrankNicolson {
    pub fn new(bc: BoundaryCondition, fem: &FemMatrices, nu: f64, k: f64) -> Result<Self> {
        if !(k > 0.0) || !k.is_finite() {
            return Err(Error::InvalidArgument(format!("time step must be positive, got {k}")));
        }
        if !(nu > 0.0) || !nu.is_finite() {
            return Err(Error::InvalidArgument(format!("diffusion must be positive, got {nu}")));
        }
        let plus = SymTriDiag::combine(2.0, fem.mass(), k * nu, fem.stiffness());
        let minus = SymTriDiag::combine(2.0, fem.mass(), -k * nu, fem.stiffness());
        let system = match bc {
            BoundaryCondition::Dirichlet => plus.block(fem.grid().interior()),
            BoundaryCondition::Neumann => plus.clone(),
        };
        let factor = SpdTriFactor::new(&system)?;
        Ok(Self {
            bc,
            k,
            plus,
            minus,
            factor,
        })
    }

    pub fn step_size(&self) -> f64 {
        self.k
    }

    /// Advances `y_prev` given `h^{j−1}`, `h^{j−2}` and the boundary data at
    /// both time levels.
    pub fn step(
        &self,
        y_prev: &[f64],
        h_prev: &[f64],
        h_prev2: &[f64],
        boundary_prev: [f64; 2],
        boundary_new: [f64; 2],
    ) -> Vec<f64> {
        let n = y_prev.len();
        let k = self.k;
        let mut rhs = self.minus.matvec(y_prev);
        for i in 0..n {
            rhs[i] += k * (3.0 * h_prev[i] - h_prev2[i]);
        }
        match self.bc {
            BoundaryCondition::Dirichlet => {
                // y_prev already carries the old boundary values, so only the
                // new ones need moving to the right side.
                rhs[1] -= self.plus.get(1, 0) * boundary_new[0];
                rhs[n - 2] -= self.plus.get(n - 2, n - 1) * boundary_new[1];
                let mut interior = rhs[1..n - 1].to_vec();
                self.factor.solve_in_place(&mut interior);
                let mut y = Vec::with_capacity(n);
                y.push(boundary_new[0]);
                y.extend(interior);
                y.push(boundary_new[1]);
                y
            }
            BoundaryCondition::Neumann => {
                rhs[0] += k * (boundary_new[0] + boundary_prev[0]);
                rhs[n - 1] -= k * (boundary_new[1] + boundary_prev[1]);
                self.factor.solve_in_place(&mut rhs);
                rhs
            }
        }
    }
}

/// Convenience wrapper around [`CrankNicolson::step`].
pub fn cn_step(
    stepper: &CrankNicolson,
    y_prev: &[f64],
    h_prev: &[f64],
    h_prev2: &[f64],
    boundary_prev: [f64; 2],
    boundary_new: [f64; 2],
) -> Vec<f64> {
    stepper.step(y_prev, h_prev, h_prev2, boundary_prev, boundary_new)
}

/// Settings of a closed-loop run.
#[derive(Clone)]
pub struct ClosedLoopConfig {
    pub bc: BoundaryCondition,
    pub length: f64,
    pub nodes: usize,
    pub nu: f64,
    pub k: f64,
    pub t_final: f64,
    /// Shift `λ > 0` in `P(−νΔ + a − λ)`.
    pub lambda: f64,
    /// Closed interval on which the feedback acts; `None` runs the free dynamics.
    pub feed_on: Option<(f64, f64)>,
    /// Times at which the full nodal field is kept.
    pub snapshot_times: Vec<f64>,
    /// Keep every nodal vector, not only snapshots.
    pub keep_trajectory: bool,
    /// `None` means homogeneous boundary data.
    pub boundary: Option<BoundaryFn>,
}

impl fmt::Debug for ClosedLoopConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ClosedLoopConfig")
            .field("bc", &self.bc)
            .field("length", &self.length)
            .field("nodes", &self.nodes)
            .field("nu", &self.nu)
            .field("k", &self.k)
            .field("t_final", &self.t_final)
            .field("lambda", &self.lambda)
            .field("feed_on", &self.feed_on)
            .field("snapshot_times", &self.snapshot_times)
            .field("keep_trajectory", &self.keep_trajectory)
            .field("boundary", &self.boundary.as_ref().map(|_| "<fn>"))
            .finish()
    }
}

impl ClosedLoopConfig {
    /// `L = π`, `ν = 0.1`, `N = 1001`, `k = 10⁻³`, `λ = 1.5`, feedback on `[0, T]`.
    pub fn new(bc: BoundaryCondition, t_final: f64) -> Self {
        Self {
            bc,
            length: PI,
            nodes: 1001,
            nu: 0.1,
            k: 1e-3,
            t_final,
            lambda: 1.5,
            feed_on: Some((0.0, t_final)),
            snapshot_times: Vec::new(),
            keep_trajectory: false,
            boundary: None,
        }
    }

    /// Number of steps, `floor(T/k)`, tolerant to rounding in `T/k`.
    pub fn steps(&self) -> usize {
        (self.t_final / self.k + 1e-9).floor() as usize
    }

    fn feedback_active(&self, t: f64) -> bool {
        match self.feed_on {
            Some((a, b)) => {
                let eps = 1e-9 * self.k;
                t >= a - eps && t <= b + eps
            }
            None => false,
        }
    }

    fn validate(&self) -> Result<()> {
        let positive = [
            ("length", self.length),
            ("nu", self.nu),
            ("k", self.k),
            ("T", self.t_final),
            ("lambda", self.lambda),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidArgument(format!("{name} must be positive, got {v}")));
            }
        }
        if let Some((a, b)) = self.feed_on {
            if !(a <= b) {
                return Err(Error::InvalidArgument(format!("empty feedback interval [{a}, {b}]")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct ClosedLoopRun {
    pub bc: BoundaryCondition,
    pub grid: FemGrid,
    pub k: f64,
    pub t_final: f64,
    pub times: Vec<f64>,
    pub norms: Vec<f64>,
    pub feedback_on: Vec<bool>,
    /// `(t, nodal values)` at the requested snapshot times.
    pub snapshots: Vec<(f64, Vec<f64>)>,
    /// Every nodal vector when requested, empty otherwise.
    pub trajectory: Vec<Vec<f64>>,
    pub final_state: Vec<f64>,
}

impl ClosedLoopRun {
    /// Norm at the time index closest to `t`.
    pub fn norm_at(&self, t: f64) -> f64 {
        let i = ((t / self.k).round() as usize).min(self.norms.len() - 1);
        self.norms[i]
    }

    pub fn csv_header() -> &'static str {
        "t,l2_norm,feedback_on"
    }
}

/// Integrates the closed-loop system from `y(0) = y0`.
///
/// `actuators` is required whenever `config.feed_on` is set.
pub fn run_closed_loop(
    config: &ClosedLoopConfig,
    reaction: &dyn ReactionField,
    actuators: Option<&ActuatorSet>,
    y0: &dyn Fn(f64) -> f64,
) -> Result<ClosedLoopRun> {
    config.validate()?;
    let grid = FemGrid::new(config.length, config.nodes)?;
    let fem = assemble_fem(&grid)?;
    let bc = config.bc;
    let feedback = match (config.feed_on, actuators) {
        (Some(_), Some(set)) => {
            let basis = EigenBasis::new(bc, config.length, set.count())?;
            Some(feedback_matrices(bc, set, &basis, &fem)?)
        }
        (Some(_), None) => {
            return Err(Error::InvalidArgument("feedback interval given without actuators".into()));
        }
        (None, _) => None,
    };
    let stepper = CrankNicolson::new(bc, &fem, config.nu, config.k)?;
    let boundary_at = |t: f64| config.boundary.as_ref().map_or([0.0, 0.0], |f| f(t));

    let mut reaction_cache: Option<SymTriDiag> = None;
    let mut force = |y: &[f64], t: f64| -> (Vec<f64>, bool) {
        let r = match &reaction_cache {
            Some(r) if !reaction.is_time_dependent() => r.clone(),
            _ => {
                let r = reaction_matrix(&fem, &reaction.nodal(&grid, t)).expect("nodal reaction matches the grid");
                if !reaction.is_time_dependent() {
                    reaction_cache = Some(r.clone());
                }
                r
            }
        };
        let mut h: Vec<f64> = r.matvec(y).into_iter().map(|v| -v).collect();
        let on = feedback.is_some() && config.feedback_active(t);
        if let (true, Some(op)) = (on, &feedback) {
            let f = feedback_apply(op, &fem, &r, config.nu, config.lambda, y);
            let mf = fem.mass().matvec(&f);
            for (hi, v) in h.iter_mut().zip(mf) {
                *hi += v;
            }
        }
        (h, on)
    };

    let steps = config.steps();
    let mut y = grid.sample(y0);
    if bc == BoundaryCondition::Dirichlet {
        let b = boundary_at(0.0);
        y[0] = b[0];
        y[grid.len() - 1] = b[1];
    }
    let mut snapshot_queue: Vec<(usize, f64)> = config
        .snapshot_times
        .iter()
        .filter(|&&t| t >= 0.0 && t <= config.t_final + 1e-9 * config.k)
        .map(|&t| (((t / config.k).round() as usize).min(steps), t))
        .collect();
    snapshot_queue.sort_by_key(|s| s.0);

    let mut times = Vec::with_capacity(steps + 1);
    let mut norms = Vec::with_capacity(steps + 1);
    let mut feedback_on = Vec::with_capacity(steps + 1);
    let mut snapshots = Vec::new();
    let mut trajectory = Vec::new();
    let mut record = |n: usize, y: &[f64], on: bool| {
        let t = n as f64 * config.k;
        times.push(t);
        norms.push(fem.l2_norm(y));
        feedback_on.push(on);
        for _ in snapshot_queue.iter().filter(|s| s.0 == n) {
            snapshots.push((t, y.to_vec()));
        }
        if config.keep_trajectory {
            trajectory.push(y.to_vec());
        }
    };

    let (mut h_prev, on0) = force(&y, 0.0);
    let mut h_prev2 = h_prev.clone();
    record(0, &y, on0);
    let mut b_prev = boundary_at(0.0);
    for n in 1..=steps {
        let t = n as f64 * config.k;
        let b_new = boundary_at(t);
        y = stepper.step(&y, &h_prev, &h_prev2, b_prev, b_new);
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::NoConvergence(format!("solution became non-finite at t = {t}")));
        }
        let (h_new, on) = force(&y, t);
        record(n, &y, on);
        h_prev2 = std::mem::replace(&mut h_prev, h_new);
        b_prev = b_new;
    }
    Ok(ClosedLoopRun {
        bc,
        grid,
        k: config.k,
        t_final: config.t_final,
        times,
        norms,
        feedback_on,
        snapshots,
        trajectory,
        final_state: y,
    })
}
