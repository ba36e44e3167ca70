use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Interpolation {
    #[default]
    Linear,
    /// Piecewise cubic Hermite through the waypoints with finite-difference
    /// tangents (Catmull-Rom on non-uniform times), C1 continuous.
    Cubic,
}

/// `(t, x, y)` waypoints with strictly increasing `t`.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory<'a> {
    pub waypoints: &'a [[f64; 3]],
    pub interpolation: Interpolation,
}

impl Trajectory<'_> {
    pub fn start(&self) -> f64 {
        self.waypoints[0][0]
    }

    pub fn end(&self) -> f64 {
        self.waypoints[self.waypoints.len() - 1][0]
    }

    pub fn contains(&self, t: f64) -> bool {
        t >= self.start() - 1e-9 && t <= self.end() + 1e-9
    }

    /// Position at `t`, clamped to the waypoint time span.
    pub fn position(&self, t: f64) -> [f64; 2] {
        let w = self.waypoints;
        let t = t.clamp(self.start(), self.end());
        let i = match w.iter().position(|p| p[0] > t) {
            Some(0) => 0,
            Some(i) => i - 1,
            None => w.len() - 2,
        };
        let (a, b) = (w[i], w[i + 1]);
        let h = b[0] - a[0];
        let s = (t - a[0]) / h;
        match self.interpolation {
            Interpolation::Linear => [a[1] + s * (b[1] - a[1]), a[2] + s * (b[2] - a[2])],
            Interpolation::Cubic => {
                let (ma, mb) = (self.tangent(i), self.tangent(i + 1));
                let h00 = 2.0 * s.powi(3) - 3.0 * s * s + 1.0;
                let h10 = s.powi(3) - 2.0 * s * s + s;
                let h01 = -2.0 * s.powi(3) + 3.0 * s * s;
                let h11 = s.powi(3) - s * s;
                let c = |k: usize| h00 * a[k] + h10 * h * ma[k - 1] + h01 * b[k] + h11 * h * mb[k - 1];
                [c(1), c(2)]
            }
        }
    }

    fn tangent(&self, i: usize) -> [f64; 2] {
        let w = self.waypoints;
        let (lo, hi) = (i.saturating_sub(1), (i + 1).min(w.len() - 1));
        let dt = w[hi][0] - w[lo][0];
        [(w[hi][1] - w[lo][1]) / dt, (w[hi][2] - w[lo][2]) / dt]
    }

    /// Velocity by central difference with step `dt`, one-sided at the ends
    /// of the time span.
    pub fn velocity(&self, t: f64, dt: f64) -> [f64; 2] {
        let lo = (t - dt).max(self.start());
        let hi = (t + dt).min(self.end());
        if hi - lo <= 0.0 {
            return [0.0, 0.0];
        }
        let (a, b) = (self.position(lo), self.position(hi));
        [(b[0] - a[0]) / (hi - lo), (b[1] - a[1]) / (hi - lo)]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const PATH: [[f64; 3]; 4] = [[0.0, 0.0, 0.0], [1.0, 2.0, 0.0], [3.0, 2.0, 4.0], [4.0, 0.0, 4.0]];

    #[test]
    fn both_interpolations_hit_every_waypoint() {
        for interpolation in [Interpolation::Linear, Interpolation::Cubic] {
            let tr = Trajectory { waypoints: &PATH, interpolation };
            for w in PATH {
                let p = tr.position(w[0]);
                assert!((p[0] - w[1]).abs() < 1e-12 && (p[1] - w[2]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn linear_two_point_velocity_is_constant() {
        let wp = [[1.0, 0.0, 0.0], [3.0, 4.0, -2.0]];
        let tr = Trajectory { waypoints: &wp, interpolation: Interpolation::Linear };
        for t in [1.0, 1.5, 2.0, 2.99, 3.0] {
            let v = tr.velocity(t, 1.0 / 30.0);
            assert!((v[0] - 2.0).abs() < 1e-9 && (v[1] + 1.0).abs() < 1e-9, "{t}: {v:?}");
        }
    }

    #[test]
    fn cubic_velocity_is_continuous_across_waypoints() {
        let tr = Trajectory { waypoints: &PATH, interpolation: Interpolation::Cubic };
        let dt = 1.0 / 30.0;
        for w in &PATH[1..3] {
            let a = tr.velocity(w[0] - 1e-4, 1e-5);
            let b = tr.velocity(w[0] + 1e-4, 1e-5);
            assert!((a[0] - b[0]).hypot(a[1] - b[1]) < 1e-2);
        }
        let mut t = 0.0;
        let mut last = tr.velocity(0.0, dt);
        while t < 4.0 {
            t += dt;
            let v = tr.velocity(t, dt);
            assert!((v[0] - last[0]).hypot(v[1] - last[1]) < 0.5);
            last = v;
        }
    }

    #[test]
    fn position_clamps_outside_span() {
        let tr = Trajectory { waypoints: &PATH, interpolation: Interpolation::Linear };
        assert_eq!(tr.position(-1.0), [0.0, 0.0]);
        assert_eq!(tr.position(9.0), [0.0, 4.0]);
        assert!(!tr.contains(4.5));
    }
}
