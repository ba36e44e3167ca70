use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::run::{DecisionSettings, PreparedSuite, SuiteScore};
use super::metrics::Metrics;
use crate::decision::PipelineParams;

/// Search box for the five pipeline parameters. Integer parameters are
/// searched as reals and rounded when evaluated.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamBounds {
    pub n_memory: [f64; 2],
    pub d_min: [f64; 2],
    pub d_max: [f64; 2],
    pub delta_min: [f64; 2],
    pub k_lookback: [f64; 2],
}

impl Default for ParamBounds {
    fn default() -> Self {
        ParamBounds { n_memory: [1.0, 150.0], d_min: [0.5, 5.0], d_max: [5.0, 30.0], delta_min: [0.0, 1.0], k_lookback: [1.0, 10.0] }
    }
}

impl ParamBounds {
    pub fn as_array(&self) -> [[f64; 2]; 5] {
        [self.n_memory, self.d_min, self.d_max, self.delta_min, self.k_lookback]
    }

    pub fn validate(&self) -> Result<(), String> {
        for b in self.as_array() {
            if !(b[0] <= b[1]) || !b[0].is_finite() || !b[1].is_finite() {
                return Err(format!("bad bound [{}, {}]", b[0], b[1]));
            }
        }
        if self.n_memory[0] < 1.0 || self.k_lookback[0] < 1.0 || self.d_min[0] <= 0.0 || self.delta_min[0] < 0.0 {
            return Err("n_memory and k_lookback must be >= 1, d_min > 0 and delta_min >= 0".into());
        }
        Ok(())
    }

    pub fn decode(&self, x: &[f64]) -> PipelineParams {
        let b = self.as_array();
        let c = |i: usize| x[i].clamp(b[i][0], b[i][1]);
        PipelineParams {
            n_memory: c(0).round() as usize,
            d_min: c(1),
            d_max: c(2),
            delta_min: c(3),
            k_lookback: c(4).round() as usize,
        }
    }

    pub fn contains(&self, p: &PipelineParams) -> bool {
        let v = [p.n_memory as f64, p.d_min, p.d_max, p.delta_min, p.k_lookback as f64];
        self.as_array().iter().zip(v).all(|(b, v)| v >= b[0] && v <= b[1])
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeOptions {
    pub population: usize,
    pub generations: usize,
    /// Differential weight.
    pub f: f64,
    /// Crossover probability.
    pub cr: f64,
    pub seed: u64,
}

impl Default for DeOptions {
    fn default() -> Self {
        DeOptions { population: 32, generations: 150, f: 0.7, cr: 0.9, seed: 0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenerationTrace {
    pub generation: usize,
    pub best_objective: f64,
    pub mean_objective: f64,
    pub best: Vec<f64>,
}

/// rand/1/bin differential evolution, maximising `objective` over a box.
/// Each generation's trial vectors are drawn serially and scored in
/// parallel, so the result depends only on the seed.
pub fn differential_evolution(
    bounds: &[[f64; 2]],
    opts: &DeOptions,
    objective: impl Fn(&[f64]) -> f64 + Sync,
) -> (Vec<f64>, f64, Vec<GenerationTrace>) {
    let np = opts.population.max(4);
    let dim = bounds.len();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut pop: Vec<Vec<f64>> =
        (0..np).map(|_| bounds.iter().map(|b| rng.random_range(b[0]..=b[1])).collect()).collect();
    let mut fit: Vec<f64> = pop.par_iter().map(|x| objective(x)).collect();
    let mut trace = Vec::with_capacity(opts.generations + 1);
    let record = |g: usize, pop: &[Vec<f64>], fit: &[f64], trace: &mut Vec<GenerationTrace>| {
        let best = best_index(fit);
        trace.push(GenerationTrace {
            generation: g,
            best_objective: fit[best],
            mean_objective: fit.iter().sum::<f64>() / fit.len() as f64,
            best: pop[best].clone(),
        });
        log::debug!("generation {g}: best {:.5}", fit[best]);
    };
    record(0, &pop, &fit, &mut trace);

    for g in 1..=opts.generations {
        let trials: Vec<Vec<f64>> = (0..np)
            .map(|i| {
                let mut pick = || loop {
                    let r = rng.random_range(0..np);
                    if r != i {
                        break r;
                    }
                };
                let (r1, mut r2, mut r3) = (pick(), pick(), pick());
                while r2 == r1 {
                    r2 = pick();
                }
                while r3 == r1 || r3 == r2 {
                    r3 = pick();
                }
                let jrand = rng.random_range(0..dim);
                (0..dim)
                    .map(|j| {
                        if j == jrand || rng.random::<f64>() < opts.cr {
                            let v = pop[r1][j] + opts.f * (pop[r2][j] - pop[r3][j]);
                            v.clamp(bounds[j][0], bounds[j][1])
                        } else {
                            pop[i][j]
                        }
                    })
                    .collect()
            })
            .collect();
        let scores: Vec<f64> = trials.par_iter().map(|x| objective(x)).collect();
        for (i, (x, s)) in trials.into_iter().zip(scores).enumerate() {
            if s >= fit[i] {
                pop[i] = x;
                fit[i] = s;
            }
        }
        record(g, &pop, &fit, &mut trace);
    }
    let best = best_index(&fit);
    (pop[best].clone(), fit[best], trace)
}

fn best_index(fit: &[f64]) -> usize {
    // first index wins ties, for determinism
    (0..fit.len()).fold(0, |b, i| if fit[i] > fit[b] { i } else { b })
}

/// Gate-first objective: each violated gate costs 10, then sensitivity and
/// specificity are rewarded and missed severity and fatigue penalised.
/// Undefined rates count as 0.
pub fn objective(score: &SuiteScore) -> f64 {
    let m = score.metrics;
    let v = |x: Option<f64>| x.unwrap_or(0.0);
    let violated = score.gates.checks.iter().filter(|c| !c.pass).count() as f64;
    v(m.sensitivity) + v(m.specificity) - 0.5 * v(m.sev_fn) - 0.25 * v(m.fatigue) - 10.0 * violated
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizeResult {
    pub params: PipelineParams,
    pub objective: f64,
    pub gate_pass: bool,
    pub metrics: Metrics,
    pub mean_warning_budget_s: Option<f64>,
    pub trace: Vec<GenerationTrace>,
}

/// Tunes the pipeline parameters on prepared sensing; the other decision
/// settings are held at `base`.
pub fn optimize_params(
    prepared: &PreparedSuite,
    base: &DecisionSettings,
    bounds: &ParamBounds,
    opts: &DeOptions,
) -> Result<OptimizeResult, String> {
    bounds.validate()?;
    let eval = |p: PipelineParams| prepared.score(&DecisionSettings { params: p, ..*base });
    let (x, best, trace) = differential_evolution(&bounds.as_array(), opts, |x| objective(&eval(bounds.decode(x))));
    let params = bounds.decode(&x);
    let score = eval(params);
    Ok(OptimizeResult {
        params,
        objective: best,
        gate_pass: score.gates.pass,
        metrics: score.metrics,
        mean_warning_budget_s: score.mean_budget_s,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_the_peak_of_a_concave_bowl() {
        let bounds = [[-5.0, 5.0], [-5.0, 5.0], [0.0, 10.0]];
        let opts = DeOptions { generations: 120, seed: 3, ..DeOptions::default() };
        let f = |x: &[f64]| -((x[0] - 1.0).powi(2) + (x[1] + 2.0).powi(2) + (x[2] - 7.5).powi(2));
        let (x, best, trace) = differential_evolution(&bounds, &opts, f);
        assert!(best > -1e-6, "{best}");
        assert!((x[0] - 1.0).abs() < 1e-3 && (x[1] + 2.0).abs() < 1e-3 && (x[2] - 7.5).abs() < 1e-3);
        assert_eq!(trace.len(), 121);
        assert!(trace.windows(2).all(|w| w[1].best_objective >= w[0].best_objective));
    }

    #[test]
    fn same_seed_same_result() {
        let bounds = [[0.0, 1.0]; 4];
        let opts = DeOptions { generations: 10, seed: 11, ..DeOptions::default() };
        let f = |x: &[f64]| x.iter().map(|v| (v * 7.0).sin()).sum::<f64>();
        let a = differential_evolution(&bounds, &opts, f);
        let b = differential_evolution(&bounds, &opts, f);
        assert_eq!(a.0, b.0);
        assert_eq!(a.2, b.2);
    }

    #[test]
    fn decode_rounds_and_clamps() {
        let b = ParamBounds::default();
        let p = b.decode(&[57.6, 0.1, 40.0, 0.147, 2.4]);
        assert_eq!(p.n_memory, 58);
        assert_eq!(p.k_lookback, 2);
        assert_eq!(p.d_min, 0.5);
        assert_eq!(p.d_max, 30.0);
        assert!(b.contains(&p));
        assert!(b.contains(&PipelineParams::SELECTED));
        assert!(ParamBounds { k_lookback: [0.0, 3.0], ..b }.validate().is_err());
    }
}
