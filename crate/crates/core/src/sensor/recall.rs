use std::path::Path;

use serde::{Deserialize, Serialize};

/// Detector recall as a piecewise-linear function of projected box area
/// (px² at detector input resolution), clamped at both ends.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<[f64; 2]>", into = "Vec<[f64; 2]>")]
pub struct RecallCurve {
    breakpoints: Vec<[f64; 2]>,
}

impl TryFrom<Vec<[f64; 2]>> for RecallCurve {
    type Error = String;

    fn try_from(breakpoints: Vec<[f64; 2]>) -> Result<Self, String> {
        RecallCurve::new(breakpoints)
    }
}

impl From<RecallCurve> for Vec<[f64; 2]> {
    fn from(c: RecallCurve) -> Self {
        c.breakpoints
    }
}

impl RecallCurve {
    pub fn new(breakpoints: Vec<[f64; 2]>) -> Result<Self, String> {
        if breakpoints.is_empty() {
            return Err("recall curve needs at least one breakpoint".into());
        }
        for w in breakpoints.windows(2) {
            if !(w[1][0] > w[0][0]) {
                return Err(format!("areas must be strictly increasing ({} then {})", w[0][0], w[1][0]));
            }
            if w[1][1] < w[0][1] {
                return Err(format!("recall must be non-decreasing in area (at {})", w[1][0]));
            }
        }
        if breakpoints.iter().any(|b| !(0.0..=1.0).contains(&b[1]) || !b[0].is_finite()) {
            return Err("recall values must lie in [0, 1]".into());
        }
        Ok(RecallCurve { breakpoints })
    }

    /// Constant recall, useful for tests and what-if runs.
    pub fn constant(recall: f64) -> Self {
        RecallCurve { breakpoints: vec![[0.0, recall.clamp(0.0, 1.0)]] }
    }

    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
    }

    /// The curve shipped in `data/recall_curve.json`.
    pub fn bundled() -> Self {
        serde_json::from_str(include_str!("../../data/recall_curve.json")).expect("bundled recall curve is valid")
    }

    /// Logistic in log-area through `(area_lo, 0.05)`, `(area_mid, 0.5)` and
    /// `(area_hi, 0.95)`, with separate slopes below and above the midpoint,
    /// sampled at `n` log-spaced areas.
    pub fn logistic(area_lo: f64, area_mid: f64, area_hi: f64, n: usize, span: (f64, f64)) -> Self {
        let logit95 = (0.95f64 / 0.05).ln();
        let lo_scale = (area_mid / area_lo).ln() / logit95;
        let hi_scale = (area_hi / area_mid).ln() / logit95;
        let (a0, a1) = (span.0.ln(), span.1.ln());
        let breakpoints = (0..n)
            .map(|i| {
                let la = a0 + (a1 - a0) * i as f64 / (n - 1) as f64;
                let z = la - area_mid.ln();
                let scale = if z < 0.0 { lo_scale } else { hi_scale };
                [la.exp(), 1.0 / (1.0 + (-z / scale).exp())]
            })
            .collect();
        RecallCurve { breakpoints }
    }

    pub fn breakpoints(&self) -> &[[f64; 2]] {
        &self.breakpoints
    }

    pub fn recall(&self, area: f64) -> f64 {
        let b = &self.breakpoints;
        if area <= b[0][0] {
            return b[0][1];
        }
        let last = b[b.len() - 1];
        if area >= last[0] {
            return last[1];
        }
        let i = b.partition_point(|p| p[0] <= area);
        let (p, q) = (b[i - 1], b[i]);
        p[1] + (q[1] - p[1]) * (area - p[0]) / (q[0] - p[0])
    }
}

/// Probability that at least one of several independent detectors fires.
pub fn fused_probability(probs: &[f64]) -> f64 {
    1.0 - probs.iter().map(|p| 1.0 - p).product::<f64>()
}
