//! Indicator actuator families on `(0, L)`.
//!
//! All actuators in a set share the half-width `δ = r L / (2M)`, so their
//! supports `ω_j = (c_j − δ, c_j + δ)` cover a total length `r L`.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use crate::{Error, Result};

/// How actuator centers are chosen.
#[derive(Debug, Clone, PartialEq)]
pub enum Placement {
    /// Extremisers of `sin(M x)`: `c_j = (2j − 1) L / (2M)`.
    Mxe,
    /// Uniform: `c_j = j L / (M + 1)`, requires `M ≥ r / (1 − r)`.
    Uni,
    /// Concentrated at the middle: `c_j = (1 − r) L / 2 + (2j − 1) r L / (2M)`.
    Con,
    /// User-given centers, non-decreasing, inside `(0, L)`.
    Custom(Vec<f64>),
}

impl Placement {
    pub fn name(&self) -> &'static str {
        match self {
            Placement::Mxe => "mxe",
            Placement::Uni => "uni",
            Placement::Con => "con",
            Placement::Custom(_) => "custom",
        }
    }
}

impl fmt::Display for Placement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Placement {
    type Err = Error;

    /// Parses `mxe`, `uni`, `con` or `custom:c1;c2;...`.
    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        match lower.as_str() {
            "mxe" => Ok(Placement::Mxe),
            "uni" => Ok(Placement::Uni),
            "con" => Ok(Placement::Con),
            _ => {
                let Some(list) = lower.strip_prefix("custom:") else {
                    return Err(Error::InvalidArgument(format!(
                        "unknown placement {s:?} (expected mxe, uni, con or custom:c1;c2;...)"
                    )));
                };
                let centers = list
                    .split(';')
                    .map(|t| {
                        t.trim().parse::<f64>().map_err(|e| {
                            Error::InvalidArgument(format!("bad custom center {t:?}: {e}"))
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(Placement::Custom(centers))
            }
        }
    }
}

/// `M ≥ r / (1 − r)`, the condition under which `uni` supports are disjoint.
pub fn uni_condition_holds(count: usize, r: f64) -> bool {
    // M(1 − r) ≥ r avoids dividing by 1 − r; the slack absorbs rounding in 1 − r.
    count as f64 * (1.0 - r) >= r - 1e-12
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActuatorSet {
    length: f64,
    r: f64,
    placement: Placement,
    centers: Vec<f64>,
    half_width: f64,
    disjoint: bool,
    distinct: bool,
}

/// Builds an actuator set; see [`ActuatorSet::new`].
pub fn place(placement: Placement, length: f64, count: usize, r: f64) -> Result<ActuatorSet> {
    ActuatorSet::new(placement, length, count, r)
}

impl ActuatorSet {
    pub fn new(placement: Placement, length: f64, count: usize, r: f64) -> Result<Self> {
        if count == 0 {
            return Err(Error::InvalidArgument("need at least one actuator".into()));
        }
        if !(length > 0.0) || !length.is_finite() {
            return Err(Error::InvalidArgument(format!("length must be positive, got {length}")));
        }
        if !(r > 0.0 && r < 1.0) {
            return Err(Error::InvalidArgument(format!("volume fraction r must lie in (0, 1), got {r}")));
        }
        let m = count as f64;
        let centers: Vec<f64> = match &placement {
            Placement::Mxe => (1..=count)
                .map(|j| (2 * j - 1) as f64 * length / (2.0 * m))
                .collect(),
            Placement::Uni => {
                if !uni_condition_holds(count, r) {
                    return Err(Error::ConstraintViolation(format!(
                        "uni placement needs M >= r/(1-r): M = {count} < {:.6}",
                        r / (1.0 - r)
                    )));
                }
                (1..=count).map(|j| j as f64 * length / (m + 1.0)).collect()
            }
            Placement::Con => (1..=count)
                .map(|j| (1.0 - r) * length / 2.0 + (2 * j - 1) as f64 * r * length / (2.0 * m))
                .collect(),
            Placement::Custom(c) => {
                if c.len() != count {
                    return Err(Error::InvalidArgument(format!(
                        "{} custom centers given for M = {count}",
                        c.len()
                    )));
                }
                if let Some(k) = c.windows(2).position(|w| w[1] < w[0]) {
                    return Err(Error::InvalidArgument(format!(
                        "custom centers out of order at positions {} and {}",
                        k + 1,
                        k + 2
                    )));
                }
                c.clone()
            }
        };
        let half_width = r * length / (2.0 * m);
        // Supports must sit inside (0, L); a relative slack absorbs rounding
        // in the closed-form centers.
        let slack = 1e-12 * length;
        for (j, &c) in centers.iter().enumerate() {
            if !c.is_finite() || c - half_width < -slack || c + half_width > length + slack {
                return Err(Error::InvalidArgument(format!(
                    "actuator {} with center {c} and half-width {half_width} leaves (0, {length})",
                    j + 1
                )));
            }
        }
        let min_gap = r * length / m;
        let disjoint = centers
            .windows(2)
            .all(|w| w[1] - w[0] >= min_gap * (1.0 - 1e-12));
        let distinct = centers.windows(2).all(|w| w[1] > w[0]);
        Ok(Self {
            length,
            r,
            placement,
            centers,
            half_width,
            disjoint,
            distinct,
        })
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn count(&self) -> usize {
        self.centers.len()
    }

    pub fn volume_fraction(&self) -> f64 {
        self.r
    }

    pub fn placement(&self) -> &Placement {
        &self.placement
    }

    pub fn centers(&self) -> &[f64] {
        &self.centers
    }

    /// `δ_M = r L / (2M)`.
    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    /// Whether `|c_i − c_j| ≥ r L / M` for all `i ≠ j` (touching counts as disjoint).
    pub fn is_disjoint(&self) -> bool {
        self.disjoint
    }

    /// Whether all centers are pairwise distinct.
    pub fn has_distinct_centers(&self) -> bool {
        self.distinct
    }

    /// Support `(c_j − δ, c_j + δ)` of actuator `j` (1-based).
    pub fn support(&self, j: usize) -> (f64, f64) {
        let c = self.centers[j - 1];
        (c - self.half_width, c + self.half_width)
    }

    /// Every support endpoint, sorted.
    pub fn endpoints(&self) -> Vec<f64> {
        let mut e: Vec<f64> = (1..=self.count())
            .flat_map(|j| {
                let (a, b) = self.support(j);
                [a, b]
            })
            .collect();
        e.sort_by(|a, b| a.total_cmp(b));
        e
    }

    /// `1_{ω_j}(x)` with open supports, so endpoints map to 0.
    pub fn indicator(&self, j: usize, x: f64) -> f64 {
        let (a, b) = self.support(j);
        if x > a && x < b {
            1.0
        } else {
            0.0
        }
    }

    /// `(M / (r L))^{1/2}`, the factor making `1_{ω_j}` a unit vector in `L²`.
    pub fn normalized_indicator_coeff(&self) -> f64 {
        (self.count() as f64 / (self.r * self.length)).sqrt()
    }

    /// Centers mapped to `(0, π)`.
    pub fn reference_centers(&self) -> Vec<f64> {
        self.centers.iter().map(|c| c * PI / self.length).collect()
    }

    /// Same geometry rescaled to another interval length.
    pub fn rescaled(&self, length: f64) -> Result<Self> {
        let s = length / self.length;
        let placement = match &self.placement {
            Placement::Custom(c) => Placement::Custom(c.iter().map(|x| x * s).collect()),
            p => p.clone(),
        };
        Self::new(placement, length, self.count(), self.r)
    }

    pub fn csv_header() -> &'static str {
        "L,M,r,scheme,centers"
    }

    /// `L,M,r,scheme,c_1,...,c_M` on a single line.
    pub fn to_csv_line(&self) -> String {
        let mut fields = vec![
            crate::csv::fmt_real(self.length),
            self.count().to_string(),
            crate::csv::fmt_real(self.r),
            self.placement.name().to_string(),
        ];
        fields.extend(self.centers.iter().map(|&c| crate::csv::fmt_real(c)));
        fields.join(",")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn mxe_two_actuators() {
        let s = place(Placement::Mxe, PI, 2, 0.5).unwrap();
        assert_abs_diff_eq!(s.centers()[0], PI / 4.0, epsilon = 1e-15);
        assert_abs_diff_eq!(s.centers()[1], 3.0 * PI / 4.0, epsilon = 1e-15);
        assert_abs_diff_eq!(s.half_width(), PI / 8.0, epsilon = 1e-15);
        assert!(s.is_disjoint());
    }

    #[test]
    fn uni_three_actuators() {
        let s = place(Placement::Uni, PI, 3, 0.5).unwrap();
        for (c, want) in s.centers().iter().zip([PI / 4.0, PI / 2.0, 3.0 * PI / 4.0]) {
            assert_abs_diff_eq!(*c, want, epsilon = 1e-15);
        }
        assert!(s.is_disjoint());
    }

    #[test]
    fn uni_rejects_overlap() {
        // 1 < 0.6 / 0.4 = 1.5
        let err = place(Placement::Uni, PI, 1, 0.6).unwrap_err();
        assert!(matches!(err, Error::ConstraintViolation(ref m) if m.contains("M >= r/(1-r)")));
        assert!(place(Placement::Uni, PI, 2, 0.6).is_ok());
        assert!(place(Placement::Uni, PI, 2, 0.9).is_err());
        assert!(place(Placement::Uni, PI, 9, 0.9).is_ok());
    }

    #[test]
    fn con_supports_touch() {
        let s = place(Placement::Con, PI, 4, 0.3).unwrap();
        assert!(s.is_disjoint());
        let e = s.endpoints();
        assert_abs_diff_eq!(e[0], 0.35 * PI, epsilon = 1e-14);
        assert_abs_diff_eq!(e[7], 0.65 * PI, epsilon = 1e-14);
    }

    #[test]
    fn custom_order_checked() {
        assert!(place(Placement::Custom(vec![2.0, 1.0]), PI, 2, 0.2).is_err());
        assert!(place(Placement::Custom(vec![1.0]), PI, 2, 0.2).is_err());
        let s = place(Placement::Custom(vec![1.0, 1.0]), PI, 2, 0.2).unwrap();
        assert!(!s.has_distinct_centers());
        assert!(!s.is_disjoint());
        assert!(place(Placement::Custom(vec![0.01, 2.0]), PI, 2, 0.2).is_err());
    }

    #[test]
    fn bad_parameters() {
        assert!(place(Placement::Mxe, PI, 0, 0.5).is_err());
        assert!(place(Placement::Mxe, PI, 2, 1.0).is_err());
        assert!(place(Placement::Mxe, PI, 2, 0.0).is_err());
        assert!(place(Placement::Mxe, 0.0, 2, 0.5).is_err());
    }

    #[test]
    fn indicator_values() {
        let s = place(Placement::Mxe, PI, 2, 0.5).unwrap();
        assert_eq!(s.indicator(1, PI / 4.0), 1.0);
        assert_eq!(s.indicator(1, PI / 2.0), 0.0);
        assert_eq!(s.indicator(1, PI / 4.0 + PI / 8.0), 0.0);
    }

    #[test]
    fn normalization_coefficients() {
        let s = place(Placement::Mxe, PI, 1, 0.5).unwrap();
        assert_abs_diff_eq!(s.normalized_indicator_coeff(), (1.0 / (0.5 * PI)).sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(s.normalized_indicator_coeff(), 0.7978845608028654, epsilon = 1e-12);
        let s = place(Placement::Mxe, PI, 4, 0.2).unwrap();
        assert_abs_diff_eq!(s.normalized_indicator_coeff(), 2.5231325220201604, epsilon = 1e-12);
        // ‖coeff · 1_ω‖² = coeff² · 2δ
        let norm2 = s.normalized_indicator_coeff().powi(2) * 2.0 * s.half_width();
        assert_abs_diff_eq!(norm2, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn mxe_centers_extremise_sine() {
        for m in 1..=40 {
            let s = place(Placement::Mxe, PI, m, 0.4).unwrap();
            for &c in s.centers() {
                let mf = m as f64;
                assert!((mf * c).cos().abs() <= 1e-12);
                assert!(((mf * c).sin().abs() - 1.0).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn volume_and_containment() {
        for placement in [Placement::Mxe, Placement::Uni, Placement::Con] {
            for m in 1..=30 {
                for r in [0.1, 0.25, 0.5] {
                    for length in [PI, 1.0, 2.5] {
                        let Ok(s) = place(placement.clone(), length, m, r) else {
                            continue;
                        };
                        let total: f64 = (1..=m).map(|j| s.support(j).1 - s.support(j).0).sum();
                        assert!((total - r * length).abs() <= 1e-12);
                        assert!(s.endpoints()[0] >= -1e-12);
                        assert!(*s.endpoints().last().unwrap() <= length + 1e-12);
                        if placement != Placement::Con {
                            assert!(s.is_disjoint());
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn csv_line() {
        let s = place(Placement::Mxe, PI, 2, 0.5).unwrap();
        let line = s.to_csv_line();
        let fields: Vec<&str> = line.split(',').collect();
        assert_eq!(fields.len(), 6);
        assert_eq!(fields[1], "2");
        assert_eq!(fields[3], "mxe");
        assert_eq!(fields[4].parse::<f64>().unwrap(), PI / 4.0);
    }

    #[test]
    fn parses_placements() {
        assert_eq!("MXE".parse::<Placement>().unwrap(), Placement::Mxe);
        assert_eq!(
            "custom:1;2.5".parse::<Placement>().unwrap(),
            Placement::Custom(vec![1.0, 2.5])
        );
        assert!("middle".parse::<Placement>().is_err());
    }
}
