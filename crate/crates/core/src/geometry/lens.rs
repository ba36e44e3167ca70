//! Radial lens models mapping incidence angle to image radius.
//!
//! Every supported model has the form `r = f * g(theta)`; the unit map `g`,
//! its derivative and its inverse are exposed separately so the calibration
//! solver can differentiate through the projection.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Projection {
    Equidistant,
    Equisolid,
    Orthographic,
    Stereographic,
}

impl Projection {
    pub const ALL: [Projection; 4] = [
        Projection::Equidistant,
        Projection::Equisolid,
        Projection::Orthographic,
        Projection::Stereographic,
    ];

    /// Unit radius `g(theta)` so that `r = f * g(theta)`.
    pub fn unit_radius(self, theta: f64) -> f64 {
        match self {
            Projection::Equidistant => theta,
            Projection::Equisolid => 2.0 * (theta / 2.0).sin(),
            Projection::Orthographic => theta.sin(),
            Projection::Stereographic => 2.0 * (theta / 2.0).tan(),
        }
    }

    /// `dg/dtheta`.
    pub fn unit_radius_derivative(self, theta: f64) -> f64 {
        match self {
            Projection::Equidistant => 1.0,
            Projection::Equisolid => (theta / 2.0).cos(),
            Projection::Orthographic => theta.cos(),
            Projection::Stereographic => {
                let c = (theta / 2.0).cos();
                1.0 / (c * c)
            }
        }
    }

    pub fn radius(self, theta: f64, focal_px: f64) -> f64 {
        focal_px * self.unit_radius(theta)
    }

    /// Inverse lens map. `None` when `r` lies outside the model's image domain
    /// (e.g. `r > f` for orthographic).
    pub fn incidence(self, r: f64, focal_px: f64) -> Option<f64> {
        if !(r >= 0.0) || !(focal_px > 0.0) {
            return None;
        }
        let s = r / focal_px;
        match self {
            Projection::Equidistant => Some(s),
            Projection::Equisolid => (s <= 2.0).then(|| 2.0 * (s / 2.0).asin()),
            Projection::Orthographic => (s <= 1.0).then(|| s.asin()),
            Projection::Stereographic => Some(2.0 * (s / 2.0).atan()),
        }
    }

    /// Largest incidence angle on which the forward map is strictly increasing.
    pub fn max_incidence(self) -> f64 {
        match self {
            Projection::Orthographic => PI / 2.0,
            _ => PI,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Projection::Equidistant => "equidistant",
            Projection::Equisolid => "equisolid",
            Projection::Orthographic => "orthographic",
            Projection::Stereographic => "stereographic",
        }
    }
}

impl fmt::Display for Projection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Projection {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Projection::ALL
            .into_iter()
            .find(|p| p.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown projection '{s}'"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn forward_inverse_are_mutual_inverses() {
        let f = 1013.3;
        let half_fov = 197.9_f64.to_radians() / 2.0;
        for p in Projection::ALL {
            let limit = half_fov.min(p.max_incidence() - 1e-6);
            for i in 1..2000 {
                let theta = limit * i as f64 / 2000.0;
                let back = p.incidence(p.radius(theta, f), f).unwrap();
                assert!((back - theta).abs() < 1e-9, "{p}: {theta} -> {back}");
            }
        }
    }

    #[test]
    fn derivative_matches_finite_difference() {
        for p in Projection::ALL {
            for &theta in &[0.1, 0.5, 1.0, 1.4] {
                let h = 1e-6;
                let fd = (p.unit_radius(theta + h) - p.unit_radius(theta - h)) / (2.0 * h);
                assert!((fd - p.unit_radius_derivative(theta)).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn orthographic_rejects_radius_beyond_focal() {
        assert!(Projection::Orthographic.incidence(1200.0, 1000.0).is_none());
        assert!(Projection::Equisolid.incidence(2100.0, 1000.0).is_none());
        assert!(Projection::Equidistant.incidence(5000.0, 1000.0).is_some());
    }

    #[test]
    fn parse_names() {
        assert_eq!("Equisolid".parse::<Projection>().unwrap(), Projection::Equisolid);
        assert!("kannala".parse::<Projection>().is_err());
    }
}
