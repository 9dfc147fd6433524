//! Cross-Gram matrices, `Θ(c)`, the oblique projector `P_{U_M}^{E_M^⊥}` and
//! its adjoint, closed-form smallest eigenvalues, and the stabilisability
//! check `ν α_{M+1} > (6 + 4‖P‖²) ‖a‖²`.
//!
//! `G_ij = (e_i, 1̄_{ω_j})` with rows indexed by eigenfunctions and columns by
//! normalised actuators `1̄_{ω_j} = (M/(rL))^{1/2} 1_{ω_j}`. Both families are
//! rescaled unitarily from `(0, π)`, so `G` does not depend on `L` and is
//! always evaluated on the reference interval.

use std::f64::consts::PI;

use crate::actuators::{uni_condition_holds, ActuatorSet, Placement};
use crate::linalg::{sym_eigen, DenseMatrix, LuFactor};
use crate::quadrature::GaussLegendre;
use crate::spectral::{BoundaryCondition, EigenBasis};
use crate::{Error, Result};

/// `ϑ` at or below this value means `L² ≠ U_M ⊕ E_M^⊥`.
pub const DIRECT_SUM_THRESHOLD: f64 = 1e-13;

/// Relative off-diagonal size under which `Θ` counts as diagonal.
pub const DIAGONAL_REL_TOL: f64 = 1e-10;

const QUAD_ORDER: usize = 16;
const PANELS_PER_PERIOD: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct CrossGram {
    bc: BoundaryCondition,
    set: ActuatorSet,
    entries: DenseMatrix,
}

impl CrossGram {
    pub fn bc(&self) -> BoundaryCondition {
        self.bc
    }

    pub fn set(&self) -> &ActuatorSet {
        &self.set
    }

    pub fn count(&self) -> usize {
        self.set.count()
    }

    pub fn basis(&self) -> EigenBasis {
        EigenBasis::new(self.bc, self.set.length(), self.set.count())
            .expect("actuator set already validated length and count")
    }

    /// `M × M`, entry `(i, j)` is `(e_i, 1̄_{ω_j})`.
    pub fn entries(&self) -> &DenseMatrix {
        &self.entries
    }
}

/// Closed-form cross-Gram matrix.
///
/// In debug builds every entry is recomputed from the exact antiderivative of
/// `e_i` over `ω_j` and checked to agree within `1e-12`.
pub fn assemble_cross_gram(bc: BoundaryCondition, set: &ActuatorSet) -> Result<CrossGram> {
    if !set.has_distinct_centers() {
        return Err(Error::SingularConfiguration(
            "actuator centers coincide; the cross-Gram matrix is singular".into(),
        ));
    }
    let m = set.count();
    let mf = m as f64;
    let r = set.volume_fraction();
    let delta = r * PI / (2.0 * mf);
    let centers = set.reference_centers();
    let amp = (8.0 * mf / (r * PI * PI)).sqrt();
    let entries = DenseMatrix::from_fn(m, m, |row, col| {
        let i = row + 1;
        let c = centers[col];
        match bc {
            BoundaryCondition::Dirichlet => {
                let k = i as f64;
                amp * (k * delta).sin() * (k * c).sin() / k
            }
            BoundaryCondition::Neumann if i == 1 => (r / mf).sqrt(),
            BoundaryCondition::Neumann => {
                let k = (i - 1) as f64;
                amp * (k * delta).sin() * (k * c).cos() / k
            }
        }
    });
    #[cfg(debug_assertions)]
    {
        let check = cross_gram_by_antiderivative(bc, set);
        for i in 0..m {
            for j in 0..m {
                let diff = (entries[(i, j)] - check[(i, j)]).abs();
                debug_assert!(
                    diff <= 1e-12,
                    "cross-Gram entry ({}, {}) differs from its antiderivative value by {diff:e}",
                    i + 1,
                    j + 1
                );
            }
        }
    }
    Ok(CrossGram {
        bc,
        set: set.clone(),
        entries,
    })
}

/// `(e_i, 1̄_{ω_j})` from `F(b) − F(a)` with `F` an antiderivative of `e_i`.
pub fn cross_gram_by_antiderivative(bc: BoundaryCondition, set: &ActuatorSet) -> DenseMatrix {
    let m = set.count();
    let mf = m as f64;
    let r = set.volume_fraction();
    let delta = r * PI / (2.0 * mf);
    let coeff = (mf / (r * PI)).sqrt();
    let centers = set.reference_centers();
    DenseMatrix::from_fn(m, m, |row, col| {
        let i = row + 1;
        let (a, b) = (centers[col] - delta, centers[col] + delta);
        let integral = match bc {
            BoundaryCondition::Dirichlet => {
                let k = i as f64;
                (2.0 / PI).sqrt() * ((k * a).cos() - (k * b).cos()) / k
            }
            BoundaryCondition::Neumann if i == 1 => (1.0 / PI).sqrt() * (b - a),
            BoundaryCondition::Neumann => {
                let k = (i - 1) as f64;
                (2.0 / PI).sqrt() * ((k * b).sin() - (k * a).sin()) / k
            }
        };
        coeff * integral
    })
}

#[derive(Debug, Clone)]
pub struct ProjectionData {
    gram: CrossGram,
    theta: DenseMatrix,
    theta_eigenvalues: Vec<f64>,
    vartheta: f64,
    op_norm: f64,
    lu: LuFactor,
    lu_t: LuFactor,
}

/// `Θ = G Gᵀ`, its smallest eigenvalue `ϑ` and `‖P‖ = ϑ^{-1/2}`.
pub fn build_projection(gram: CrossGram) -> Result<ProjectionData> {
    let g = gram.entries();
    let theta = g.matmul(&g.transpose())?;
    let eig = sym_eigen(&theta)?;
    let vartheta = eig.values[0];
    if !(vartheta > DIRECT_SUM_THRESHOLD) {
        return Err(Error::DirectSumFailure(format!(
            "smallest eigenvalue of Theta is {vartheta:e}; U_M and the orthogonal complement of E_M do not form a direct sum"
        )));
    }
    let to_direct_sum = |e: Error| match e {
        Error::SingularMatrix(msg) => Error::DirectSumFailure(msg),
        other => other,
    };
    let lu = LuFactor::new(g).map_err(to_direct_sum)?;
    let lu_t = LuFactor::new(&g.transpose()).map_err(to_direct_sum)?;
    Ok(ProjectionData {
        theta,
        theta_eigenvalues: eig.values,
        vartheta,
        op_norm: vartheta.powf(-0.5),
        gram,
        lu,
        lu_t,
    })
}

/// Convenience: place, assemble and build in one go.
pub fn projection_for(
    bc: BoundaryCondition,
    placement: Placement,
    length: f64,
    count: usize,
    r: f64,
) -> Result<ProjectionData> {
    let set = ActuatorSet::new(placement, length, count, r)?;
    build_projection(assemble_cross_gram(bc, &set)?)
}

impl ProjectionData {
    pub fn gram(&self) -> &CrossGram {
        &self.gram
    }

    pub fn set(&self) -> &ActuatorSet {
        self.gram.set()
    }

    pub fn bc(&self) -> BoundaryCondition {
        self.gram.bc()
    }

    pub fn theta(&self) -> &DenseMatrix {
        &self.theta
    }

    /// Spectrum of `Θ`, ascending.
    pub fn theta_eigenvalues(&self) -> &[f64] {
        &self.theta_eigenvalues
    }

    pub fn vartheta(&self) -> f64 {
        self.vartheta
    }

    pub fn op_norm(&self) -> f64 {
        self.op_norm
    }

    /// Solves `G α = b`.
    pub fn solve_gram(&self, b: &[f64]) -> Vec<f64> {
        self.lu.solve_vec(b)
    }

    /// Solves `Gᵀ β = b`.
    pub fn solve_gram_transpose(&self, b: &[f64]) -> Vec<f64> {
        self.lu_t.solve_vec(b)
    }
}

/// A function on `(0, L)` that can be integrated against eigenfunctions and
/// actuators.
pub trait L2Function {
    fn value(&self, x: f64) -> f64;

    /// Points where the function or its derivative may jump.
    fn breakpoints(&self) -> Vec<f64> {
        Vec::new()
    }

    /// Highest angular frequency present, used to size quadrature panels.
    fn max_frequency(&self) -> f64 {
        0.0
    }
}

/// A closure together with its known breakpoints and frequency.
pub struct FnSource<F> {
    f: F,
    breakpoints: Vec<f64>,
    max_frequency: f64,
}

impl<F: Fn(f64) -> f64> FnSource<F> {
    pub fn new(f: F) -> Self {
        Self {
            f,
            breakpoints: Vec::new(),
            max_frequency: 0.0,
        }
    }

    pub fn with_breakpoints(mut self, breakpoints: Vec<f64>) -> Self {
        self.breakpoints = breakpoints;
        self
    }

    pub fn with_frequency(mut self, max_frequency: f64) -> Self {
        self.max_frequency = max_frequency;
        self
    }
}

impl<F: Fn(f64) -> f64> L2Function for FnSource<F> {
    fn value(&self, x: f64) -> f64 {
        (self.f)(x)
    }

    fn breakpoints(&self) -> Vec<f64> {
        self.breakpoints.clone()
    }

    fn max_frequency(&self) -> f64 {
        self.max_frequency
    }
}

impl L2Function for crate::spectral::UniformSamples {
    fn value(&self, x: f64) -> f64 {
        self.interpolate(x)
    }

    fn breakpoints(&self) -> Vec<f64> {
        self.grid()
    }
}

/// `Σ_j a_j 1̄_{ω_j}`, an element of `U_M`.
#[derive(Debug, Clone, PartialEq)]
pub struct ActuatorCombination {
    pub set: ActuatorSet,
    pub coefficients: Vec<f64>,
}

impl ActuatorCombination {
    /// The normalised actuator `1̄_{ω_j}` (1-based).
    pub fn unit(set: &ActuatorSet, j: usize) -> Self {
        let mut coefficients = vec![0.0; set.count()];
        coefficients[j - 1] = 1.0;
        Self {
            set: set.clone(),
            coefficients,
        }
    }
}

impl L2Function for ActuatorCombination {
    fn value(&self, x: f64) -> f64 {
        let c = self.set.normalized_indicator_coeff();
        self.coefficients
            .iter()
            .enumerate()
            .map(|(j, a)| a * c * self.set.indicator(j + 1, x))
            .sum()
    }

    fn breakpoints(&self) -> Vec<f64> {
        self.set.endpoints()
    }
}

/// `Σ_i b_i e_i`, an element of `E_M` (or of a larger eigenspace).
#[derive(Debug, Clone, PartialEq)]
pub struct EigenCombination {
    pub basis: EigenBasis,
    pub coefficients: Vec<f64>,
}

impl EigenCombination {
    pub fn unit(basis: &EigenBasis, i: usize) -> Self {
        let mut coefficients = vec![0.0; i.max(1)];
        coefficients[i - 1] = 1.0;
        Self {
            basis: *basis,
            coefficients,
        }
    }
}

impl L2Function for EigenCombination {
    fn value(&self, x: f64) -> f64 {
        self.coefficients
            .iter()
            .enumerate()
            .map(|(i, b)| b * self.basis.value(i + 1, x))
            .sum()
    }

    fn max_frequency(&self) -> f64 {
        self.basis.frequency(self.coefficients.len())
    }
}

/// `∫_a^b f g` with panels split at both functions' breakpoints.
pub fn inner_product_on(f: &dyn L2Function, g: &dyn L2Function, a: f64, b: f64) -> f64 {
    let rule = GaussLegendre::new(QUAD_ORDER);
    let mut cuts = f.breakpoints();
    cuts.extend(g.breakpoints());
    let freq = (f.max_frequency() + g.max_frequency()).max(1e-3);
    rule.integrate_piecewise(|x| f.value(x) * g.value(x), a, b, &cuts, freq, PANELS_PER_PERIOD)
}

/// `(f, g)_{L²(0, L)}`.
pub fn inner_product(f: &dyn L2Function, g: &dyn L2Function, length: f64) -> f64 {
    inner_product_on(f, g, 0.0, length)
}

pub fn l2_norm(f: &dyn L2Function, length: f64) -> f64 {
    inner_product(f, f, length).max(0.0).sqrt()
}

/// Difference `f − g` as a function, keeping both breakpoint sets.
pub struct Difference<'a> {
    pub f: &'a dyn L2Function,
    pub g: &'a dyn L2Function,
}

impl L2Function for Difference<'_> {
    fn value(&self, x: f64) -> f64 {
        self.f.value(x) - self.g.value(x)
    }

    fn breakpoints(&self) -> Vec<f64> {
        let mut b = self.f.breakpoints();
        b.extend(self.g.breakpoints());
        b
    }

    fn max_frequency(&self) -> f64 {
        self.f.max_frequency().max(self.g.max_frequency())
    }
}

/// `[(e_i, x)]_{i=1..M}`.
pub fn eigen_moments(data: &ProjectionData, x: &dyn L2Function) -> Vec<f64> {
    let basis = data.gram().basis();
    let length = basis.length();
    (1..=basis.count())
        .map(|i| {
            let e = EigenCombination::unit(&basis, i);
            inner_product(&e, x, length)
        })
        .collect()
}

/// `[(1̄_{ω_j}, x)]_{j=1..M}`, integrating over each support only.
pub fn actuator_moments(set: &ActuatorSet, x: &dyn L2Function) -> Vec<f64> {
    let coeff = set.normalized_indicator_coeff();
    let one = FnSource::new(|_| 1.0);
    (1..=set.count())
        .map(|j| {
            let (a, b) = set.support(j);
            coeff * inner_product_on(&one, x, a.max(0.0), b.min(set.length()))
        })
        .collect()
}

/// `P_{U_M}^{E_M^⊥} x = Σ α_j 1̄_{ω_j}` with `G α = [(e_i, x)]`.
pub fn apply_projection(data: &ProjectionData, x: &dyn L2Function) -> ActuatorCombination {
    let b = eigen_moments(data, x);
    ActuatorCombination {
        set: data.set().clone(),
        coefficients: data.solve_gram(&b),
    }
}

/// `P_{E_M}^{U_M^⊥} x = Σ β_i e_i` with `Gᵀ β = [(1̄_{ω_j}, x)]`.
pub fn apply_adjoint_projection(data: &ProjectionData, x: &dyn L2Function) -> EigenCombination {
    let c = actuator_moments(data.set(), x);
    EigenCombination {
        basis: data.gram().basis(),
        coefficients: data.solve_gram_transpose(&c),
    }
}

/// `[(1̄_{ω_j}, 1̄_{ω_k})]`, exact from support overlaps.
pub fn actuator_gram(set: &ActuatorSet) -> DenseMatrix {
    let c2 = set.normalized_indicator_coeff().powi(2);
    let m = set.count();
    DenseMatrix::from_fn(m, m, |j, k| {
        let (a1, b1) = set.support(j + 1);
        let (a2, b2) = set.support(k + 1);
        c2 * (b1.min(b2) - a1.max(a2)).max(0.0)
    })
}

/// Orthogonal projection `P_{U_M} x` from the normal equations of
/// `min ‖x − u‖` over `u ∈ U_M`.
pub fn apply_orthogonal_projection(set: &ActuatorSet, x: &dyn L2Function) -> Result<ActuatorCombination> {
    let gram = actuator_gram(set);
    let rhs = actuator_moments(set, x);
    let lu = LuFactor::new(&gram)?;
    Ok(ActuatorCombination {
        set: set.clone(),
        coefficients: lu.solve_vec(&rhs),
    })
}

/// Largest off-diagonal of `Θ` and whether it is below `1e-10 · max diag`.
pub fn check_theta_diagonal(data: &ProjectionData) -> (bool, f64) {
    let theta = data.theta();
    let max_diag = (0..theta.rows()).map(|i| theta[(i, i)].abs()).fold(0.0, f64::max);
    let off = theta.max_abs_offdiag();
    (off <= DIAGONAL_REL_TOL * max_diag, off)
}

/// `Σ_k cos(m c_k)` with centers taken on `(0, π)`.
pub fn cosine_sum(set: &ActuatorSet, m: usize) -> f64 {
    let mf = m as f64;
    set.reference_centers().iter().map(|c| (mf * c).cos()).sum()
}

/// `4/(rπ²) sin²(rπ/2)`, the large-`M` limit of `ϑ`.
pub fn vartheta_limit(r: f64) -> f64 {
    4.0 / (r * PI * PI) * (r * PI / 2.0).sin().powi(2)
}

/// `√r π / (2 sin(rπ/2))`, the large-`M` limit of `‖P‖`.
pub fn norm_limit(r: f64) -> f64 {
    r.sqrt() * PI / (2.0 * (r * PI / 2.0).sin())
}

/// Closed-form `ϑ` where one is known, `None` otherwise.
///
/// Known cases are `mxe` under both boundary conditions and `uni` under
/// Dirichlet. For Neumann `mxe` with `M = 1`, `Θ = [r]`.
pub fn analytic_vartheta(
    bc: BoundaryCondition,
    placement: &Placement,
    count: usize,
    r: f64,
) -> Result<Option<f64>> {
    if count == 0 {
        return Err(Error::InvalidArgument("need at least one actuator".into()));
    }
    if !(r > 0.0 && r < 1.0) {
        return Err(Error::InvalidArgument(format!("volume fraction r must lie in (0, 1), got {r}")));
    }
    let m = count as f64;
    let s2 = |x: f64| x.sin().powi(2);
    let value = match (placement, bc) {
        (Placement::Uni, _) if !uni_condition_holds(count, r) => {
            return Err(Error::ConstraintViolation(format!(
                "uni placement needs M >= r/(1-r): M = {count} < {:.6}",
                r / (1.0 - r)
            )));
        }
        (Placement::Mxe, BoundaryCondition::Dirichlet) if count == 1 => {
            Some(8.0 / (r * PI * PI) * s2(r * PI / 2.0))
        }
        (Placement::Mxe, BoundaryCondition::Neumann) if count == 1 => Some(r),
        (Placement::Mxe, _) => Some(
            4.0 * m * m / (r * PI * PI * (m - 1.0).powi(2)) * s2((m - 1.0) * r * PI / (2.0 * m)),
        ),
        (Placement::Uni, BoundaryCondition::Dirichlet) => {
            Some(4.0 * (m + 1.0) / (r * PI * PI * m) * s2(r * PI / 2.0))
        }
        _ => None,
    };
    Ok(value)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SufficientConditionReport {
    pub nu: f64,
    pub bc: BoundaryCondition,
    pub count: usize,
    pub alpha_next: f64,
    pub op_norm: f64,
    pub a_bound: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub satisfied: bool,
    pub margin: f64,
}

/// Evaluates `ν α_{M+1} > (6 + 4 ‖P‖²) a_bound²` on `(0, L)`.
pub fn check_sufficient_condition(
    nu: f64,
    bc: BoundaryCondition,
    length: f64,
    count: usize,
    op_norm: f64,
    a_bound: f64,
) -> SufficientConditionReport {
    let alpha_next = bc.eigenvalue(length, count + 1);
    let lhs = nu * alpha_next;
    let rhs = (6.0 + 4.0 * op_norm * op_norm) * a_bound * a_bound;
    SufficientConditionReport {
        nu,
        bc,
        count,
        alpha_next,
        op_norm,
        a_bound,
        lhs,
        rhs,
        satisfied: lhs > rhs,
        margin: lhs - rhs,
    }
}

/// Smallest `M` for which the sufficient condition holds with `‖P‖` replaced
/// by its limit, and the real threshold `X` it comes from.
///
/// The condition reads `w > X` where `w = M + 1` (Dirichlet) or `w = M`
/// (Neumann) and `X = ν^{-1/2} (L/π) (6 + (√r π / sin(rπ/2))²)^{1/2} a_bound`.
pub fn limit_norm_threshold(
    nu: f64,
    bc: BoundaryCondition,
    length: f64,
    r: f64,
    a_bound: f64,
) -> (f64, usize) {
    let q = r.sqrt() * PI / (r * PI / 2.0).sin();
    let x = (1.0 / nu.sqrt()) * (length / PI) * (6.0 + q * q).sqrt() * a_bound;
    let w = x.floor() as usize + 1;
    let m = match bc {
        BoundaryCondition::Dirichlet => w.saturating_sub(1).max(1),
        BoundaryCondition::Neumann => w.max(1),
    };
    (x, m)
}

/// Conservative `‖a Id‖` bound from `sup |a|`.
pub fn a_bound_from_sup(sup_abs_a: f64) -> f64 {
    sup_abs_a.abs()
}

/// One line of an `ϑ` sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub bc: BoundaryCondition,
    pub scheme: &'static str,
    pub count: usize,
    pub r: f64,
    pub vartheta_numeric: f64,
    pub vartheta_analytic: Option<f64>,
    pub op_norm: f64,
    pub limit: f64,
    pub max_offdiag_theta: f64,
}

impl SweepRow {
    pub fn compute(bc: BoundaryCondition, placement: &Placement, length: f64, count: usize, r: f64) -> Result<Self> {
        let data = projection_for(bc, placement.clone(), length, count, r)?;
        let analytic = match placement {
            Placement::Custom(_) => None,
            p => analytic_vartheta(bc, p, count, r)?,
        };
        Ok(Self {
            bc,
            scheme: placement.name(),
            count,
            r,
            vartheta_numeric: data.vartheta(),
            vartheta_analytic: analytic,
            op_norm: data.op_norm(),
            limit: vartheta_limit(r),
            max_offdiag_theta: check_theta_diagonal(&data).1,
        })
    }

    pub fn csv_header() -> &'static str {
        "bc,scheme,M,r,vartheta_numeric,vartheta_analytic,op_norm,limit,max_offdiag_theta"
    }

    pub fn to_csv_line(&self) -> String {
        use crate::csv::fmt_real;
        [
            self.bc.as_str().to_string(),
            self.scheme.to_string(),
            self.count.to_string(),
            fmt_real(self.r),
            fmt_real(self.vartheta_numeric),
            self.vartheta_analytic.map(fmt_real).unwrap_or_default(),
            fmt_real(self.op_norm),
            fmt_real(self.limit),
            fmt_real(self.max_offdiag_theta),
        ]
        .join(",")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use BoundaryCondition::{Dirichlet, Neumann};

    fn set(p: Placement, m: usize, r: f64) -> ActuatorSet {
        ActuatorSet::new(p, PI, m, r).unwrap()
    }

    #[test]
    fn single_dirichlet_entry() {
        let g = assemble_cross_gram(Dirichlet, &set(Placement::Mxe, 1, 0.5)).unwrap();
        assert_abs_diff_eq!(g.entries()[(0, 0)], 2.0 * 2f64.sqrt() / PI, epsilon = 1e-14);
    }

    #[test]
    fn single_neumann_entry_is_sqrt_r() {
        for r in [0.1, 0.3, 0.77] {
            for p in [Placement::Mxe, Placement::Con, Placement::Custom(vec![1.6])] {
                let g = assemble_cross_gram(Neumann, &set(p, 1, r)).unwrap();
                assert_abs_diff_eq!(g.entries()[(0, 0)], r.sqrt(), epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn coincident_centers_rejected() {
        let s = set(Placement::Custom(vec![1.5, 1.5]), 2, 0.2);
        let err = assemble_cross_gram(Dirichlet, &s).unwrap_err();
        assert!(matches!(err, Error::SingularConfiguration(_)));
    }

    #[test]
    fn closed_form_matches_quadrature() {
        let rule = GaussLegendre::new(16);
        for bc in BoundaryCondition::ALL {
            let s = set(Placement::Con, 7, 0.35);
            let g = assemble_cross_gram(bc, &s).unwrap();
            let basis = g.basis();
            let coeff = s.normalized_indicator_coeff();
            for i in 1..=7 {
                for j in 1..=7 {
                    let (a, b) = s.support(j);
                    let q = coeff * rule.integrate_composite(|x| basis.value(i, x), a, b, 8);
                    assert_abs_diff_eq!(g.entries()[(i - 1, j - 1)], q, epsilon = 1e-12);
                }
            }
        }
    }

    #[test]
    fn dirichlet_mxe_two() {
        let p = projection_for(Dirichlet, Placement::Mxe, PI, 2, 0.5).unwrap();
        assert_abs_diff_eq!(p.vartheta(), 0.474_82, epsilon = 1e-5);
        assert_abs_diff_eq!(p.op_norm(), 1.451_22, epsilon = 1e-4);
        let a = analytic_vartheta(Dirichlet, &Placement::Mxe, 2, 0.5).unwrap().unwrap();
        assert_abs_diff_eq!(p.vartheta(), a, epsilon = 1e-12);
    }

    #[test]
    fn neumann_single_actuator() {
        let p = projection_for(Neumann, Placement::Mxe, PI, 1, 0.3).unwrap();
        assert_abs_diff_eq!(p.vartheta(), 0.3, epsilon = 1e-15);
        assert_eq!(analytic_vartheta(Neumann, &Placement::Mxe, 1, 0.3).unwrap(), Some(0.3));
    }

    #[test]
    fn analytic_examples() {
        let v = analytic_vartheta(Dirichlet, &Placement::Uni, 3, 0.5).unwrap().unwrap();
        assert_abs_diff_eq!(v, 8.0 / (1.5 * PI * PI), epsilon = 1e-14);
        assert_abs_diff_eq!(v, 0.54038, epsilon = 1e-5);
        let v = analytic_vartheta(Dirichlet, &Placement::Mxe, 1, 0.5).unwrap().unwrap();
        assert_abs_diff_eq!(v, 8.0 / (PI * PI), epsilon = 1e-14);
        assert_eq!(analytic_vartheta(Neumann, &Placement::Uni, 5, 0.2).unwrap(), None);
        assert_eq!(analytic_vartheta(Dirichlet, &Placement::Con, 5, 0.2).unwrap(), None);
        assert!(matches!(
            analytic_vartheta(Dirichlet, &Placement::Uni, 2, 0.9),
            Err(Error::ConstraintViolation(_))
        ));
    }

    #[test]
    fn limits() {
        assert_abs_diff_eq!(norm_limit(0.5), PI / 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(vartheta_limit(0.5).powf(-0.5), norm_limit(0.5), epsilon = 1e-14);
        assert_abs_diff_eq!(vartheta_limit(0.2), 0.193_50, epsilon = 1e-5);
        // The gap to the limit decays like 1/M.
        for r in [0.1, 0.5, 0.9] {
            let lim = vartheta_limit(r);
            let v4 = analytic_vartheta(Dirichlet, &Placement::Mxe, 10_000, r).unwrap().unwrap();
            let v6 = analytic_vartheta(Dirichlet, &Placement::Mxe, 1_000_000, r).unwrap().unwrap();
            assert!(v4 > lim && v6 > lim);
            assert!((v4 - lim).abs() <= 1e-4);
            assert!((v6 - lim).abs() <= 1e-6);
        }
    }

    #[test]
    fn identity_gram_gives_unit_norm() {
        let g = DenseMatrix::identity(4);
        let e = sym_eigen(&g.matmul(&g.transpose()).unwrap()).unwrap();
        assert_abs_diff_eq!(e.values[0].powf(-0.5), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn theta_diagonal_for_mxe_not_con() {
        let p = projection_for(Dirichlet, Placement::Mxe, PI, 5, 0.3).unwrap();
        assert!(check_theta_diagonal(&p).0);
        let p = projection_for(Dirichlet, Placement::Con, PI, 3, 0.5).unwrap();
        let (diag, _) = check_theta_diagonal(&p);
        assert!(!diag);
        let want = -16.0 * (PI / 12.0).sin() * (PI / 4.0).sin() / (PI * PI);
        assert_abs_diff_eq!(p.theta()[(0, 2)], want, epsilon = 1e-12);
    }

    #[test]
    fn cosine_sums() {
        let s = set(Placement::Mxe, 2, 0.5);
        assert_abs_diff_eq!(cosine_sum(&s, 3), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(cosine_sum(&s, 0), 2.0, epsilon = 1e-15);
        let s = set(Placement::Uni, 3, 0.5);
        assert_abs_diff_eq!(cosine_sum(&s, 2), -1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(cosine_sum(&s, 1), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn sufficient_condition_examples() {
        let rep = check_sufficient_condition(0.1, Dirichlet, PI, 5, 1.3, 0.0);
        assert_abs_diff_eq!(rep.alpha_next, 36.0, epsilon = 1e-12);
        assert_abs_diff_eq!(rep.lhs, 3.6, epsilon = 1e-12);
        assert!(rep.satisfied);
        assert_abs_diff_eq!(rep.margin, 3.6, epsilon = 1e-12);
        let rep = check_sufficient_condition(0.1, Neumann, PI, 5, 1.3, 0.0);
        assert_abs_diff_eq!(rep.alpha_next, 25.0, epsilon = 1e-12);
        assert_abs_diff_eq!(rep.lhs, 2.5, epsilon = 1e-12);
        let rep = check_sufficient_condition(0.1, Dirichlet, PI, 5, 1.3, 1.0);
        assert!(!rep.satisfied);
    }

    #[test]
    fn limit_threshold_is_sufficient() {
        for bc in BoundaryCondition::ALL {
            for a in [0.0, 0.3, 1.0, 3.5] {
                let (_, m) = limit_norm_threshold(0.1, bc, PI, 0.3, a);
                let rep = check_sufficient_condition(0.1, bc, PI, m, norm_limit(0.3), a);
                assert!(rep.satisfied, "{bc} a={a} m={m}");
                if m > 1 {
                    let rep = check_sufficient_condition(0.1, bc, PI, m - 1, norm_limit(0.3), a);
                    assert!(!rep.satisfied);
                }
            }
        }
    }

    #[test]
    fn projection_fixes_actuators_and_kills_next_mode() {
        for bc in BoundaryCondition::ALL {
            let p = projection_for(bc, Placement::Mxe, PI, 4, 0.4).unwrap();
            let u1 = ActuatorCombination::unit(p.set(), 1);
            let a = apply_projection(&p, &u1);
            for (j, c) in a.coefficients.iter().enumerate() {
                assert_abs_diff_eq!(*c, if j == 0 { 1.0 } else { 0.0 }, epsilon = 1e-10);
            }
            let next = EigenCombination::unit(&EigenBasis::new(bc, PI, 5).unwrap(), 5);
            let a = apply_projection(&p, &next);
            for c in &a.coefficients {
                assert_abs_diff_eq!(*c, 0.0, epsilon = 1e-10);
            }
            let e1 = EigenCombination::unit(&p.gram().basis(), 1);
            let b = apply_adjoint_projection(&p, &e1);
            for (i, c) in b.coefficients.iter().enumerate() {
                assert_abs_diff_eq!(*c, if i == 0 { 1.0 } else { 0.0 }, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn constant_orthogonal_residual() {
        for m in [1, 3, 6] {
            let s = set(Placement::Mxe, m, 0.1);
            let f = FnSource::new(|_| 2.5);
            let pf = apply_orthogonal_projection(&s, &f).unwrap();
            let res = l2_norm(&Difference { f: &f, g: &pf }, PI);
            assert_abs_diff_eq!(res, 2.5 * (0.9 * PI).sqrt(), epsilon = 1e-10);
        }
    }

    #[test]
    fn duality_example() {
        let p = projection_for(Dirichlet, Placement::Uni, PI, 6, 0.3).unwrap();
        let f = FnSource::new(|x: f64| (3.0 * x).sin()).with_frequency(3.0);
        let g = FnSource::new(|x: f64| x * (PI - x));
        let pf = apply_projection(&p, &f);
        let pg = apply_adjoint_projection(&p, &g);
        let lhs = inner_product(&pf, &g, PI);
        let rhs = inner_product(&f, &pg, PI);
        assert!((lhs - rhs).abs() <= 1e-9, "{lhs} vs {rhs}");
    }

    #[test]
    fn sin_squared_ratio_is_decreasing() {
        for m in 1..=50 {
            for r in [0.05, 0.3, 0.6, 0.95] {
                let delta = r * PI / (2.0 * m as f64);
                let f = |t: f64| (delta * t).sin().powi(2) / (t * t);
                let steps = 200;
                let mut prev = f(m as f64 / steps as f64);
                for s in 2..=steps {
                    let cur = f(s as f64 * m as f64 / steps as f64);
                    assert!(cur < prev);
                    prev = cur;
                }
            }
        }
    }

    #[test]
    fn sweep_row_csv() {
        let row = SweepRow::compute(Neumann, &Placement::Uni, PI, 5, 0.2).unwrap();
        assert!(row.vartheta_analytic.is_none());
        let line = row.to_csv_line();
        assert_eq!(line.split(',').count(), 9);
        assert!(line.contains(",,"));
    }
}
