//! Closed-form Laplacian eigenpairs on `(0, L)` and the length rescaling map.
//!
//! On `(0, π)`:
//!
//! * Dirichlet: `α_i = i²`, `e_i(x) = √(2/π) sin(i x)`,
//! * Neumann: `α_i = (i − 1)²`, `e_1 = √(1/π)`, `e_i(x) = √(2/π) cos((i − 1) x)`.
//!
//! General lengths use `e_i^{[L]}(x) = √(π/L) e_i^{[π]}(π x / L)` and
//! `α_i^{[L]} = (π/L)² α_i^{[π]}`. Indices are 1-based throughout the public API.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use crate::quadrature::GaussLegendre;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BoundaryCondition {
    Dirichlet,
    Neumann,
}

impl BoundaryCondition {
    pub const ALL: [BoundaryCondition; 2] = [BoundaryCondition::Dirichlet, BoundaryCondition::Neumann];

    pub fn as_str(self) -> &'static str {
        match self {
            BoundaryCondition::Dirichlet => "dirichlet",
            BoundaryCondition::Neumann => "neumann",
        }
    }

    /// Angular wavenumber of the `i`-th eigenfunction on `(0, π)`.
    pub fn wavenumber(self, i: usize) -> usize {
        match self {
            BoundaryCondition::Dirichlet => i,
            BoundaryCondition::Neumann => i - 1,
        }
    }

    /// `α_i` on `(0, L)`, for any `i ≥ 1`.
    pub fn eigenvalue(self, length: f64, i: usize) -> f64 {
        let w = self.wavenumber(i) as f64;
        (PI / length).powi(2) * w * w
    }
}

impl fmt::Display for BoundaryCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BoundaryCondition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dirichlet" | "dir" | "d" => Ok(BoundaryCondition::Dirichlet),
            "neumann" | "neu" | "n" => Ok(BoundaryCondition::Neumann),
            other => Err(Error::InvalidArgument(format!(
                "unknown boundary condition {other:?} (expected dirichlet or neumann)"
            ))),
        }
    }
}

/// The first `count` eigenpairs of `−Δ` on `(0, length)`.
///
/// Eigenfunctions are evaluated from their closed forms; nothing is sampled.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenBasis {
    bc: BoundaryCondition,
    length: f64,
    count: usize,
}

pub fn build_basis(bc: BoundaryCondition, length: f64, count: usize) -> Result<EigenBasis> {
    EigenBasis::new(bc, length, count)
}

impl EigenBasis {
    pub fn new(bc: BoundaryCondition, length: f64, count: usize) -> Result<Self> {
        if count == 0 {
            return Err(Error::InvalidArgument("eigenbasis needs M >= 1".into()));
        }
        if !(length > 0.0) || !length.is_finite() {
            return Err(Error::InvalidArgument(format!("length must be positive, got {length}")));
        }
        Ok(Self { bc, length, count })
    }

    pub fn bc(&self) -> BoundaryCondition {
        self.bc
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn alphas(&self) -> Vec<f64> {
        (1..=self.count).map(|i| self.bc.eigenvalue(self.length, i)).collect()
    }

    /// `α_{M+1}`, the first eigenvalue not in the basis.
    pub fn next_alpha(&self) -> f64 {
        self.bc.eigenvalue(self.length, self.count + 1)
    }

    /// Same eigenpairs, one more or fewer of them.
    pub fn with_count(&self, count: usize) -> Result<Self> {
        Self::new(self.bc, self.length, count)
    }

    fn check_index(&self, i: usize) -> Result<()> {
        if i == 0 || i > self.count {
            return Err(Error::InvalidArgument(format!(
                "eigenfunction index {i} outside 1..={}",
                self.count
            )));
        }
        Ok(())
    }

    /// `e_i(x)` for `1 ≤ i ≤ M`, `0 ≤ x ≤ L`.
    pub fn eval(&self, i: usize, x: f64) -> Result<f64> {
        self.check_index(i)?;
        if !(0.0..=self.length).contains(&x) {
            return Err(Error::InvalidArgument(format!(
                "x = {x} outside [0, {}]",
                self.length
            )));
        }
        Ok(self.value(i, x))
    }

    /// `e_i(x)` without range checks; `i` may exceed `M`.
    pub fn value(&self, i: usize, x: f64) -> f64 {
        let k = (PI / self.length) * self.bc.wavenumber(i) as f64;
        match self.bc {
            BoundaryCondition::Dirichlet => (2.0 / self.length).sqrt() * (k * x).sin(),
            BoundaryCondition::Neumann if i == 1 => (1.0 / self.length).sqrt(),
            BoundaryCondition::Neumann => (2.0 / self.length).sqrt() * (k * x).cos(),
        }
    }

    /// `e_i'(x)` without range checks.
    pub fn derivative(&self, i: usize, x: f64) -> f64 {
        let k = (PI / self.length) * self.bc.wavenumber(i) as f64;
        match self.bc {
            BoundaryCondition::Dirichlet => (2.0 / self.length).sqrt() * k * (k * x).cos(),
            BoundaryCondition::Neumann => -(2.0 / self.length).sqrt() * k * (k * x).sin(),
        }
    }

    /// Angular frequency of `e_i` on `(0, L)`.
    pub fn frequency(&self, i: usize) -> f64 {
        (PI / self.length) * self.bc.wavenumber(i) as f64
    }

    /// Gram matrix `(e_i, e_j)` by composite Gauss quadrature, 16-point panels
    /// with 4 panels per period of the fastest mode.
    pub fn quadrature_gram(&self) -> Vec<Vec<f64>> {
        let rule = GaussLegendre::new(16);
        let max_freq = self.frequency(self.count).max(PI / self.length);
        (1..=self.count)
            .map(|i| {
                (1..=self.count)
                    .map(|j| {
                        rule.integrate_piecewise(
                            |x| self.value(i, x) * self.value(j, x),
                            0.0,
                            self.length,
                            &[],
                            max_freq,
                            4,
                        )
                    })
                    .collect()
            })
            .collect()
    }
}

/// Samples of a function on a uniform grid covering `[0, length]`.
#[derive(Debug, Clone, PartialEq)]
pub struct UniformSamples {
    pub length: f64,
    pub values: Vec<f64>,
}

impl UniformSamples {
    pub fn new(length: f64, values: Vec<f64>) -> Result<Self> {
        if !(length > 0.0) || !length.is_finite() {
            return Err(Error::InvalidArgument(format!("length must be positive, got {length}")));
        }
        if values.len() < 2 {
            return Err(Error::InvalidArgument("need at least two samples".into()));
        }
        Ok(Self { length, values })
    }

    pub fn from_fn(length: f64, points: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        let h = length / (points.max(2) - 1) as f64;
        Self::new(length, (0..points).map(|i| f(i as f64 * h)).collect())
    }

    pub fn spacing(&self) -> f64 {
        self.length / (self.values.len() - 1) as f64
    }

    pub fn grid(&self) -> Vec<f64> {
        let h = self.spacing();
        (0..self.values.len()).map(|i| i as f64 * h).collect()
    }

    /// `∫ f²` by the composite trapezoidal rule.
    pub fn l2_norm_squared(&self) -> f64 {
        let n = self.values.len();
        let inner: f64 = self.values[1..n - 1].iter().map(|v| v * v).sum();
        let ends = 0.5 * (self.values[0].powi(2) + self.values[n - 1].powi(2));
        self.spacing() * (inner + ends)
    }

    /// Piecewise-linear interpolant, clamped to `[0, length]`.
    pub fn interpolate(&self, x: f64) -> f64 {
        let h = self.spacing();
        let n = self.values.len();
        let s = (x / h).clamp(0.0, (n - 1) as f64);
        let i = (s.floor() as usize).min(n - 2);
        let t = s - i as f64;
        (1.0 - t) * self.values[i] + t * self.values[i + 1]
    }
}

/// `(S f)(y) = f(π y / L)`: maps samples on `(0, π)` to samples on `(0, L)`.
///
/// On uniform grids with the same point count the node values carry over
/// unchanged, so `rescale` followed by its inverse is the identity bit for bit.
pub fn rescale_function(samples: &UniformSamples, length: f64) -> Result<UniformSamples> {
    if (samples.length - PI).abs() > 1e-15 * PI {
        return Err(Error::InvalidArgument(format!(
            "rescaling starts from samples on (0, pi), got length {}",
            samples.length
        )));
    }
    rescale_between(samples, length)
}

/// Inverse of [`rescale_function`]: samples on `(0, L)` back to `(0, π)`.
pub fn rescale_to_reference(samples: &UniformSamples) -> Result<UniformSamples> {
    rescale_between(samples, PI)
}

fn rescale_between(samples: &UniformSamples, length: f64) -> Result<UniformSamples> {
    UniformSamples::new(length, samples.values.clone())
}

/// `x ↦ f(π x / L)` for closures.
pub fn rescale_closure<F: Fn(f64) -> f64>(f: F, length: f64) -> impl Fn(f64) -> f64 {
    move |y| f(PI * y / length)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn dirichlet_eigenvalues_on_pi() {
        let b = build_basis(BoundaryCondition::Dirichlet, PI, 3).unwrap();
        let a = b.alphas();
        for (got, want) in a.iter().zip([1.0, 4.0, 9.0]) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-14);
        }
    }

    #[test]
    fn neumann_eigenvalues_on_pi() {
        let b = build_basis(BoundaryCondition::Neumann, PI, 3).unwrap();
        let a = b.alphas();
        for (got, want) in a.iter().zip([0.0, 1.0, 4.0]) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-14);
        }
    }

    #[test]
    fn rescaled_first_mode() {
        let b = build_basis(BoundaryCondition::Dirichlet, 2.0 * PI, 1).unwrap();
        assert_abs_diff_eq!(b.alphas()[0], 0.25, epsilon = 1e-15);
        // ∫_0^{2π} (1/π) sin²(x/2) dx = 1, checked by quadrature
        let g = b.quadrature_gram();
        assert_abs_diff_eq!(g[0][0].sqrt(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(build_basis(BoundaryCondition::Dirichlet, PI, 0).is_err());
        assert!(build_basis(BoundaryCondition::Neumann, 0.0, 2).is_err());
        assert!(build_basis(BoundaryCondition::Neumann, -1.0, 2).is_err());
    }

    #[test]
    fn pointwise_values() {
        let d = build_basis(BoundaryCondition::Dirichlet, PI, 3).unwrap();
        let n = build_basis(BoundaryCondition::Neumann, PI, 3).unwrap();
        assert_abs_diff_eq!(d.eval(1, PI / 2.0).unwrap(), (2.0 / PI).sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(n.eval(1, 0.3).unwrap(), (1.0 / PI).sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(n.eval(2, 0.0).unwrap(), (2.0 / PI).sqrt(), epsilon = 1e-15);
        assert!(d.eval(0, 1.0).is_err());
        assert!(d.eval(4, 1.0).is_err());
        assert!(d.eval(1, -0.1).is_err());
        assert!(d.eval(1, PI + 0.1).is_err());
    }

    #[test]
    fn orthonormal_for_several_lengths() {
        for bc in BoundaryCondition::ALL {
            for length in [PI, 1.0, 2.0 * PI] {
                let b = build_basis(bc, length, 30).unwrap();
                let g = b.quadrature_gram();
                for (i, row) in g.iter().enumerate() {
                    for (j, v) in row.iter().enumerate() {
                        let want = if i == j { 1.0 } else { 0.0 };
                        assert!((v - want).abs() <= 1e-9, "{bc} L={length} ({i},{j}) = {v}");
                    }
                }
            }
        }
    }

    #[test]
    fn boundary_conditions_hold() {
        for length in [PI, 1.0, 2.5] {
            let d = build_basis(BoundaryCondition::Dirichlet, length, 20).unwrap();
            let n = build_basis(BoundaryCondition::Neumann, length, 20).unwrap();
            for i in 1..=20 {
                assert!(d.value(i, 0.0).abs() <= 1e-15);
                assert!(d.value(i, length).abs() <= 1e-13);
                assert!(n.derivative(i, 0.0).abs() <= 1e-15);
                assert!(n.derivative(i, length).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn alphas_nondecreasing() {
        for bc in BoundaryCondition::ALL {
            let a = build_basis(bc, 1.7, 12).unwrap().alphas();
            assert!(a.windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn identity_rescale() {
        let s = UniformSamples::from_fn(PI, 101, f64::sin).unwrap();
        let r = rescale_function(&s, PI).unwrap();
        assert_eq!(r.values, s.values);
    }

    #[test]
    fn rescale_round_trip_is_exact() {
        let s = UniformSamples::from_fn(PI, 257, |x| x.cos() * x.exp()).unwrap();
        let there = rescale_function(&s, 2.0 * PI).unwrap();
        let back = rescale_to_reference(&there).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn rescale_scales_l2_norm() {
        let s = UniformSamples::from_fn(PI, 2001, |x| x * (PI - x)).unwrap();
        for length in [2.0 * PI, 0.5, 7.0] {
            let r = rescale_function(&s, length).unwrap();
            let ratio = r.l2_norm_squared() / s.l2_norm_squared();
            assert_abs_diff_eq!(ratio, length / PI, epsilon = 1e-10);
        }
        let f = rescale_closure(f64::sin, 2.0 * PI);
        assert_abs_diff_eq!(f(PI), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn parses_boundary_conditions() {
        assert_eq!("Dirichlet".parse::<BoundaryCondition>().unwrap(), BoundaryCondition::Dirichlet);
        assert_eq!("neu".parse::<BoundaryCondition>().unwrap(), BoundaryCondition::Neumann);
        assert!("robin".parse::<BoundaryCondition>().is_err());
    }
}
