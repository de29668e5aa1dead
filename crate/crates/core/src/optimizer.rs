//! Gradient-free constrained minimization over surrogate predictions.
//!
//! The decision variables are the machine states; the objective and
//! every constraint are forest predictions of plant sensors. Forests
//! are piecewise constant, so the search is derivative-free: a seeded
//! uniform sampling phase picks the best start by exact-penalty score,
//! then coordinate pattern search refines it with step halving.
//! Feasibility of the returned point is judged by re-evaluating the
//! surrogates exactly; the penalty weight only shapes the search.

use serde::Serialize;
use thiserror::Error;

use crate::forest::{ForestError, ForestModel};
use crate::rng::Xoshiro256PlusPlus;

/// Exact-penalty weight, in objective units per constraint unit.
pub const PENALTY_RHO: f64 = 1e6;

const INITIAL_STEP: f64 = 0.25;
const MIN_STEP: f64 = 1e-3;

#[derive(Debug, Error)]
pub enum OptimizerError {
    #[error("problem schema error: {0}")]
    Schema(String),
    #[error("state[{index}] = {value} outside decision bounds [{lo}, {hi}]")]
    OutOfBounds {
        index: usize,
        value: f64,
        lo: f64,
        hi: f64,
    },
    #[error("budget must be >= 1")]
    InvalidBudget,
    #[error("grid of {points} points exceeds the 10^7 evaluation cap")]
    GridTooLarge { points: u128 },
    #[error(transparent)]
    Forest(#[from] ForestError),
}

/// How lagged feature columns are filled when evaluating a candidate
/// setpoint.
#[derive(Debug, Clone, PartialEq)]
pub enum LagFill {
    /// Copy the candidate state into every lag block: the steady-state
    /// assumption for a setpoint search.
    SteadyState,
    /// A fixed history for lag blocks 1..=lag, `n_states * lag` values
    /// in lag-major order.
    FixedHistory(Vec<f64>),
}

/// One surrogate-predicted sensor with an inclusive feasible band.
#[derive(Debug, Clone)]
pub struct ConstraintSpec {
    pub model: ForestModel,
    pub lower: f64,
    pub upper: f64,
}

/// Objective surrogate, constraint surrogates and the decision box.
#[derive(Debug, Clone)]
pub struct ConstrainedProblem {
    pub objective: ForestModel,
    pub constraints: Vec<ConstraintSpec>,
    pub decision_bounds: Vec<(f64, f64)>,
    pub frozen_lags: LagFill,
}

impl ConstrainedProblem {
    pub fn new(
        objective: ForestModel,
        constraints: Vec<ConstraintSpec>,
        decision_bounds: Vec<(f64, f64)>,
        frozen_lags: LagFill,
    ) -> Result<Self, OptimizerError> {
        let n_states = objective.meta.state_names.len();
        if decision_bounds.len() != n_states {
            return Err(OptimizerError::Schema(format!(
                "{} decision bounds for {} machine states",
                decision_bounds.len(),
                n_states
            )));
        }
        for (i, &(lo, hi)) in decision_bounds.iter().enumerate() {
            if lo.is_nan() || hi.is_nan() || lo > hi {
                return Err(OptimizerError::Schema(format!(
                    "decision bound {i} has lower {lo} > upper {hi}"
                )));
            }
        }
        for spec in &constraints {
            if spec.model.meta.feature_names != objective.meta.feature_names {
                return Err(OptimizerError::Schema(format!(
                    "constraint `{}` was trained on a different feature schema",
                    spec.model.meta.target_name
                )));
            }
            if spec.lower.is_nan() || spec.upper.is_nan() || spec.lower > spec.upper {
                return Err(OptimizerError::Schema(format!(
                    "constraint `{}` has lower {} > upper {}",
                    spec.model.meta.target_name, spec.lower, spec.upper
                )));
            }
        }
        if let LagFill::FixedHistory(h) = &frozen_lags {
            let expected = n_states * objective.meta.lag;
            if h.len() != expected {
                return Err(OptimizerError::Schema(format!(
                    "fixed history has {} values, expected {expected}",
                    h.len()
                )));
            }
        }
        Ok(ConstrainedProblem {
            objective,
            constraints,
            decision_bounds,
            frozen_lags,
        })
    }

    pub fn n_states(&self) -> usize {
        self.decision_bounds.len()
    }

    fn feature_row(&self, state: &[f64]) -> Vec<f64> {
        let lag = self.objective.meta.lag;
        let mut row = Vec::with_capacity(state.len() * (lag + 1));
        row.extend_from_slice(state);
        match &self.frozen_lags {
            LagFill::SteadyState => {
                for _ in 0..lag {
                    row.extend_from_slice(state);
                }
            }
            LagFill::FixedHistory(h) => row.extend_from_slice(h),
        }
        row
    }

    fn check_bounds(&self, state: &[f64]) -> Result<(), OptimizerError> {
        if state.len() != self.n_states() {
            return Err(OptimizerError::Schema(format!(
                "state has {} values, expected {}",
                state.len(),
                self.n_states()
            )));
        }
        for (i, (&v, &(lo, hi))) in state.iter().zip(&self.decision_bounds).enumerate() {
            if !(lo..=hi).contains(&v) {
                return Err(OptimizerError::OutOfBounds {
                    index: i,
                    value: v,
                    lo,
                    hi,
                });
            }
        }
        Ok(())
    }
}

/// Surrogate predictions at one state.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub objective: f64,
    pub constraints: Vec<f64>,
    pub feasible: bool,
}

impl Evaluation {
    fn violation(&self, problem: &ConstrainedProblem) -> f64 {
        self.constraints
            .iter()
            .zip(&problem.constraints)
            .map(|(&v, spec)| (spec.lower - v).max(0.0) + (v - spec.upper).max(0.0))
            .sum()
    }

    fn penalty(&self, problem: &ConstrainedProblem) -> f64 {
        self.objective + PENALTY_RHO * self.violation(problem)
    }
}

/// Expand a setpoint to a full feature row, normalize with each model's
/// frozen statistics and predict objective and constraints. Feasible
/// iff every constraint prediction lies inside its band, inclusive.
pub fn evaluate(problem: &ConstrainedProblem, state: &[f64]) -> Result<Evaluation, OptimizerError> {
    problem.check_bounds(state)?;
    let row = problem.feature_row(state);
    let objective = problem.objective.predict_raw(&row)?;
    let mut feasible = true;
    let mut constraints = Vec::with_capacity(problem.constraints.len());
    for spec in &problem.constraints {
        let v = spec.model.predict_raw(&row)?;
        feasible &= (spec.lower..=spec.upper).contains(&v);
        constraints.push(v);
    }
    Ok(Evaluation {
        objective,
        constraints,
        feasible,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Seed,
    Pattern,
}

impl std::fmt::Display for Phase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Phase::Seed => write!(f, "seed"),
            Phase::Pattern => write!(f, "pattern"),
        }
    }
}

/// One evaluated iterate.
#[derive(Debug, Clone, PartialEq)]
pub struct TracePoint {
    pub phase: Phase,
    pub state: Vec<f64>,
    pub objective: f64,
    pub constraints: Vec<f64>,
    pub feasible: bool,
}

/// The full optimization path plus its outcome. An infeasible outcome
/// is a data result, not an error: the trace then carries the least
/// violating iterate instead of a best one.
#[derive(Debug, Clone)]
pub struct OptimizationTrace {
    pub points: Vec<TracePoint>,
    /// Index of the best feasible iterate, by objective.
    pub best: Option<usize>,
    /// Index of the least-violating iterate; set when `best` is absent.
    pub least_violating: Option<usize>,
    pub evaluations: usize,
    pub budget: usize,
    pub seed: u64,
}

impl OptimizationTrace {
    pub fn is_feasible(&self) -> bool {
        self.best.is_some()
    }

    pub fn best_point(&self) -> Option<&TracePoint> {
        self.best.map(|i| &self.points[i])
    }

    /// Plot-ready CSV: one iterate per row.
    pub fn to_csv_string(&self, problem: &ConstrainedProblem) -> String {
        let mut out = String::from("phase");
        for name in &problem.objective.meta.state_names {
            out.push(',');
            out.push_str(name);
        }
        out.push_str(",objective");
        for spec in &problem.constraints {
            out.push(',');
            out.push_str(&spec.model.meta.target_name);
        }
        out.push_str(",feasible\n");
        for p in &self.points {
            out.push_str(&p.phase.to_string());
            for v in &p.state {
                out.push_str(&format!(",{v}"));
            }
            out.push_str(&format!(",{}", p.objective));
            for v in &p.constraints {
                out.push_str(&format!(",{v}"));
            }
            out.push_str(if p.feasible { ",true\n" } else { ",false\n" });
        }
        out
    }

    /// Run summary as JSON: the best (or least violating) state and its
    /// predictions.
    pub fn summary_json(&self, problem: &ConstrainedProblem) -> String {
        let describe = |idx: usize| {
            let p = &self.points[idx];
            let state: serde_json::Map<String, serde_json::Value> = problem
                .objective
                .meta
                .state_names
                .iter()
                .zip(&p.state)
                .map(|(n, &v)| (n.clone(), serde_json::json!(v)))
                .collect();
            let constraints: serde_json::Map<String, serde_json::Value> = problem
                .constraints
                .iter()
                .zip(&p.constraints)
                .map(|(spec, &v)| (spec.model.meta.target_name.clone(), serde_json::json!(v)))
                .collect();
            serde_json::json!({
                "state": state,
                "objective": p.objective,
                "constraints": constraints,
                "feasible": p.feasible,
            })
        };
        let body = serde_json::json!({
            "feasible": self.is_feasible(),
            "objective_target": problem.objective.meta.target_name,
            "best": self.best.map(describe),
            "least_violating": if self.best.is_none() { self.least_violating.map(describe) } else { None },
            "evaluations": self.evaluations,
            "budget": self.budget,
            "seed": self.seed,
        });
        serde_json::to_string_pretty(&body).expect("summary is always serializable")
    }
}

/// Minimize the objective surrogate under the constraint bands with
/// penalized multi-start plus coordinate pattern search.
///
/// Phase 1 evaluates `max(1, budget / 2)` uniform seeds from the given
/// generator (one `uniform_f64` per dimension, in dimension order).
/// Phase 2 runs coordinate pattern search from the best seed by penalty
/// score: probe `+step`, then `-step`, per coordinate (clamped to the
/// bounds; a probe equal to the current point is skipped without
/// consuming budget), accept strict penalty improvements immediately,
/// halve the step after a sweep with no accepts, and stop the descent
/// below step 1e-3. Remaining budget restarts the descent from the next
/// best unused seed until the budget is spent.
pub fn minimize(
    problem: &ConstrainedProblem,
    budget: usize,
    seed: u64,
) -> Result<OptimizationTrace, OptimizerError> {
    if budget == 0 {
        return Err(OptimizerError::InvalidBudget);
    }
    let n = problem.n_states();
    let mut rng = Xoshiro256PlusPlus::new(seed);
    let mut points = Vec::new();

    let n_seeds = (budget / 2).max(1);
    let mut seed_penalties: Vec<(usize, f64)> = Vec::with_capacity(n_seeds);
    for i in 0..n_seeds {
        let state: Vec<f64> = problem
            .decision_bounds
            .iter()
            .map(|&(lo, hi)| lo + rng.uniform_f64() * (hi - lo))
            .collect();
        let eval = evaluate(problem, &state)?;
        seed_penalties.push((i, eval.penalty(problem)));
        points.push(TracePoint {
            phase: Phase::Seed,
            state,
            objective: eval.objective,
            constraints: eval.constraints,
            feasible: eval.feasible,
        });
    }
    // Start order: ascending penalty, seed index breaking ties.
    seed_penalties.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));

    let mut used = n_seeds;
    'starts: for &(seed_idx, seed_penalty) in &seed_penalties {
        if used >= budget {
            break;
        }
        let mut current_state = points[seed_idx].state.clone();
        let mut current_penalty = seed_penalty;
        let mut step = INITIAL_STEP;
        while step >= MIN_STEP {
            let mut improved = false;
            for d in 0..n {
                let (lo, hi) = problem.decision_bounds[d];
                for dir in [1.0, -1.0] {
                    if used >= budget {
                        break 'starts;
                    }
                    let mut probe = current_state.clone();
                    probe[d] = (probe[d] + dir * step * (hi - lo)).clamp(lo, hi);
                    if probe[d] == current_state[d] {
                        continue;
                    }
                    let eval = evaluate(problem, &probe)?;
                    used += 1;
                    let penalty = eval.penalty(problem);
                    points.push(TracePoint {
                        phase: Phase::Pattern,
                        state: probe.clone(),
                        objective: eval.objective,
                        constraints: eval.constraints,
                        feasible: eval.feasible,
                    });
                    if penalty < current_penalty {
                        current_penalty = penalty;
                        current_state = probe;
                        improved = true;
                        break; // next coordinate, from the new point
                    }
                }
            }
            if !improved {
                step *= 0.5;
            }
        }
    }

    let mut best: Option<usize> = None;
    for (i, p) in points.iter().enumerate() {
        if p.feasible && best.is_none_or(|b| p.objective < points[b].objective) {
            best = Some(i);
        }
    }
    let least_violating = if best.is_none() {
        let mut least: Option<(usize, f64)> = None;
        for (i, p) in points.iter().enumerate() {
            let eval = Evaluation {
                objective: p.objective,
                constraints: p.constraints.clone(),
                feasible: p.feasible,
            };
            let v = eval.violation(problem);
            if least.is_none_or(|(_, lv)| v < lv) {
                least = Some((i, v));
            }
        }
        least.map(|(i, _)| i)
    } else {
        None
    };

    Ok(OptimizationTrace {
        points,
        best,
        least_violating,
        evaluations: used,
        budget,
        seed,
    })
}

/// Result of the exhaustive grid oracle.
#[derive(Debug, Clone)]
pub struct BruteForceResult {
    /// Feasible grid minimum, if any grid point is feasible.
    pub best: Option<(Vec<f64>, f64)>,
    /// Objective range observed over the whole grid.
    pub objective_min: f64,
    pub objective_max: f64,
    pub evaluated: usize,
}

/// Exhaustively evaluate a regular grid with `resolution` points per
/// non-degenerate axis (a collapsed axis, lower == upper, contributes
/// one point) and return the feasible minimum. Refuses grids beyond
/// 10^7 points. Iteration is odometer order with the last axis fastest;
/// ties keep the first point visited.
pub fn brute_force_reference(
    problem: &ConstrainedProblem,
    resolution: usize,
) -> Result<BruteForceResult, OptimizerError> {
    if resolution < 2 {
        return Err(OptimizerError::Schema("resolution must be >= 2".into()));
    }
    let axes: Vec<usize> = problem
        .decision_bounds
        .iter()
        .map(|&(lo, hi)| if lo < hi { resolution } else { 1 })
        .collect();
    let total: u128 = axes.iter().map(|&a| a as u128).product();
    if total > 10_000_000 {
        return Err(OptimizerError::GridTooLarge { points: total });
    }

    let n = axes.len();
    let mut idx = vec![0usize; n];
    let mut state = vec![0.0f64; n];
    let mut result = BruteForceResult {
        best: None,
        objective_min: f64::INFINITY,
        objective_max: f64::NEG_INFINITY,
        evaluated: 0,
    };
    loop {
        for d in 0..n {
            let (lo, hi) = problem.decision_bounds[d];
            state[d] = if axes[d] == 1 {
                lo
            } else {
                lo + (hi - lo) * idx[d] as f64 / (axes[d] - 1) as f64
            };
        }
        let eval = evaluate(problem, &state)?;
        result.evaluated += 1;
        result.objective_min = result.objective_min.min(eval.objective);
        result.objective_max = result.objective_max.max(eval.objective);
        if eval.feasible {
            let better = match &result.best {
                None => true,
                Some((_, obj)) => eval.objective < *obj,
            };
            if better {
                result.best = Some((state.clone(), eval.objective));
            }
        }
        // Odometer increment, last axis fastest.
        let mut d = n;
        loop {
            if d == 0 {
                return Ok(result);
            }
            d -= 1;
            idx[d] += 1;
            if idx[d] < axes[d] {
                break;
            }
            idx[d] = 0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forest::{Forest, ForestModel, HyperParams, ModelMeta, TreeNode, FORMAT_VERSION, RNG_NAME};

    /// Hand-built model over `n_states` machine states with lag 0.
    fn manual_model(target: &str, n_states: usize, trees: Vec<Vec<TreeNode>>) -> ForestModel {
        let state_names: Vec<String> = (0..n_states).map(|i| format!("s{i}")).collect();
        ForestModel {
            forest: Forest {
                seed: 0,
                flags: 0,
                n_features: n_states as u32,
                trees,
            },
            meta: ModelMeta {
                format_version: FORMAT_VERSION,
                target_name: target.to_string(),
                state_names: state_names.clone(),
                feature_names: state_names.iter().map(|s| format!("{s}_lag0")).collect(),
                lag: 0,
                norm_stats: None,
                hyper: HyperParams::default(),
                train_fingerprint: "0".repeat(16),
                rng: RNG_NAME.to_string(),
            },
        }
    }

    fn leaf(value: f64) -> Vec<TreeNode> {
        vec![TreeNode::Leaf { value, n_samples: 1 }]
    }

    /// One tree: value `lo_val` for x <= 0.5, `hi_val` above.
    fn two_leaf_tree(lo_val: f64, hi_val: f64) -> Vec<TreeNode> {
        vec![
            TreeNode::Internal {
                feature_index: 0,
                threshold: 0.5,
                left: 1,
                right: 2,
            },
            TreeNode::Leaf { value: lo_val, n_samples: 1 },
            TreeNode::Leaf { value: hi_val, n_samples: 1 },
        ]
    }

    fn constant_problem() -> ConstrainedProblem {
        // NOx = 7, CO2 = 5 in [0, 10], O2 = 10 in [0, 20].
        ConstrainedProblem::new(
            manual_model("nox", 2, vec![leaf(7.0)]),
            vec![
                ConstraintSpec {
                    model: manual_model("co2", 2, vec![leaf(5.0)]),
                    lower: 0.0,
                    upper: 10.0,
                },
                ConstraintSpec {
                    model: manual_model("o2", 2, vec![leaf(10.0)]),
                    lower: 0.0,
                    upper: 20.0,
                },
            ],
            vec![(0.0, 1.0), (0.0, 1.0)],
            LagFill::SteadyState,
        )
        .unwrap()
    }

    #[test]
    fn evaluate_constant_models() {
        let problem = constant_problem();
        let eval = evaluate(&problem, &[0.3, 0.4]).unwrap();
        assert_eq!(eval.objective, 7.0);
        assert_eq!(eval.constraints, vec![5.0, 10.0]);
        assert!(eval.feasible);
    }

    #[test]
    fn constraint_outside_band_is_infeasible() {
        let problem = ConstrainedProblem::new(
            manual_model("nox", 1, vec![leaf(7.0)]),
            vec![ConstraintSpec {
                model: manual_model("co2", 1, vec![leaf(12.0)]),
                lower: 0.0,
                upper: 10.0,
            }],
            vec![(0.0, 1.0)],
            LagFill::SteadyState,
        )
        .unwrap();
        let eval = evaluate(&problem, &[0.5]).unwrap();
        assert!(!eval.feasible);
        let trace = minimize(&problem, 50, 1).unwrap();
        assert!(!trace.is_feasible());
        assert!(trace.best.is_none());
        let least = trace.least_violating.expect("least-violating iterate");
        assert_eq!(trace.points[least].constraints[0], 12.0);
    }

    #[test]
    fn evaluate_rejects_out_of_bounds_states() {
        let problem = constant_problem();
        assert!(matches!(
            evaluate(&problem, &[2.0, 0.5]),
            Err(OptimizerError::OutOfBounds { index: 0, .. })
        ));
    }

    #[test]
    fn evaluate_composes_normalizer_and_predict() {
        use crate::telemetry::{apply_normalizer, NormStats};
        let mut model = manual_model("nox", 1, vec![two_leaf_tree(5.0, 2.0)]);
        model.meta.norm_stats = Some(NormStats {
            means: vec![0.25],
            stds: vec![0.5],
        });
        let problem = ConstrainedProblem::new(
            model.clone(),
            vec![],
            vec![(0.0, 1.0)],
            LagFill::SteadyState,
        )
        .unwrap();
        for &x in &[0.0, 0.3, 0.49, 0.51, 0.9] {
            let via_eval = evaluate(&problem, &[x]).unwrap().objective;
            let stats = model.meta.norm_stats.as_ref().unwrap();
            let normalized = apply_normalizer(stats, &[x]).unwrap();
            let via_parts = model.forest.predict(&normalized).unwrap();
            assert_eq!(via_eval, via_parts);
        }
    }

    #[test]
    fn flat_landscape_returns_the_constant() {
        let problem = constant_problem();
        let trace = minimize(&problem, 40, 9).unwrap();
        assert!(trace.is_feasible());
        assert_eq!(trace.best_point().unwrap().objective, 7.0);
    }

    #[test]
    fn two_leaf_surrogate_finds_the_low_plateau() {
        let problem = ConstrainedProblem::new(
            manual_model("nox", 1, vec![two_leaf_tree(5.0, 2.0)]),
            vec![],
            vec![(0.0, 1.0)],
            LagFill::SteadyState,
        )
        .unwrap();
        let trace = minimize(&problem, 200, 3).unwrap();
        let best = trace.best_point().unwrap();
        assert_eq!(best.objective, 2.0);
        assert!(best.state[0] > 0.5);

        // Grid enumeration at resolution 0.01 confirms the minimum.
        let mut grid_min = f64::INFINITY;
        for k in 0..=100 {
            let x = k as f64 / 100.0;
            grid_min = grid_min.min(evaluate(&problem, &[x]).unwrap().objective);
        }
        assert_eq!(grid_min, 2.0);
        assert_eq!(best.objective, grid_min);
    }

    #[test]
    fn constraint_excluding_the_low_plateau_forces_the_high_one() {
        // Constraint predicts 12 above x = 0.5, violating [0, 10].
        let problem = ConstrainedProblem::new(
            manual_model("nox", 1, vec![two_leaf_tree(5.0, 2.0)]),
            vec![ConstraintSpec {
                model: manual_model("co2", 1, vec![two_leaf_tree(5.0, 12.0)]),
                lower: 0.0,
                upper: 10.0,
            }],
            vec![(0.0, 1.0)],
            LagFill::SteadyState,
        )
        .unwrap();
        let trace = minimize(&problem, 200, 3).unwrap();
        let best = trace.best_point().unwrap();
        assert_eq!(best.objective, 5.0);
        assert!(best.state[0] <= 0.5);
        assert!(best.feasible);

        // Same grid oracle, restricted to feasible cells.
        let mut grid_min = f64::INFINITY;
        for k in 0..=100 {
            let x = k as f64 / 100.0;
            let eval = evaluate(&problem, &[x]).unwrap();
            if eval.feasible {
                grid_min = grid_min.min(eval.objective);
            }
        }
        assert_eq!(grid_min, 5.0);
    }

    #[test]
    fn brute_force_flat_surrogate_takes_the_first_grid_point() {
        let problem = constant_problem();
        let result = brute_force_reference(&problem, 11).unwrap();
        let (state, obj) = result.best.unwrap();
        assert_eq!(obj, 7.0);
        assert_eq!(state, vec![0.0, 0.0]);
        assert_eq!(result.evaluated, 121);
    }

    #[test]
    fn brute_force_matches_the_two_leaf_construction() {
        let problem = ConstrainedProblem::new(
            manual_model("nox", 1, vec![two_leaf_tree(5.0, 2.0)]),
            vec![],
            vec![(0.0, 1.0)],
            LagFill::SteadyState,
        )
        .unwrap();
        let result = brute_force_reference(&problem, 101).unwrap();
        assert_eq!(result.best.unwrap().1, 2.0);
        assert_eq!(result.objective_min, 2.0);
        assert_eq!(result.objective_max, 5.0);
    }

    #[test]
    fn brute_force_refuses_oversized_grids() {
        let problem = ConstrainedProblem::new(
            manual_model("nox", 4, vec![leaf(1.0)]),
            vec![],
            vec![(0.0, 1.0); 4],
            LagFill::SteadyState,
        )
        .unwrap();
        assert!(matches!(
            brute_force_reference(&problem, 101),
            Err(OptimizerError::GridTooLarge { .. })
        ));
        // Collapsed axes drop out of the product.
        let pinned = ConstrainedProblem::new(
            manual_model("nox", 4, vec![leaf(1.0)]),
            vec![],
            vec![(0.0, 1.0), (0.0, 1.0), (0.3, 0.3), (0.7, 0.7)],
            LagFill::SteadyState,
        )
        .unwrap();
        let result = brute_force_reference(&pinned, 101).unwrap();
        assert_eq!(result.evaluated, 101 * 101);
    }

    #[test]
    fn minimize_is_deterministic() {
        let problem = ConstrainedProblem::new(
            manual_model("nox", 2, vec![two_leaf_tree(5.0, 2.0), leaf(3.0)]),
            vec![],
            vec![(0.0, 1.0), (0.0, 1.0)],
            LagFill::SteadyState,
        )
        .unwrap();
        let a = minimize(&problem, 100, 17).unwrap();
        let b = minimize(&problem, 100, 17).unwrap();
        assert_eq!(a.to_csv_string(&problem), b.to_csv_string(&problem));
        assert_eq!(a.best, b.best);
    }

    #[test]
    fn accepted_pattern_steps_never_increase_the_penalty() {
        let problem = ConstrainedProblem::new(
            manual_model("nox", 2, vec![two_leaf_tree(5.0, 2.0)]),
            vec![ConstraintSpec {
                model: manual_model("co2", 2, vec![two_leaf_tree(3.0, 8.0)]),
                lower: 0.0,
                upper: 10.0,
            }],
            vec![(0.0, 1.0), (0.0, 1.0)],
            LagFill::SteadyState,
        )
        .unwrap();
        let trace = minimize(&problem, 150, 5).unwrap();
        // Replay the acceptance rule over the trace.
        let penalty = |p: &TracePoint| {
            let eval = Evaluation {
                objective: p.objective,
                constraints: p.constraints.clone(),
                feasible: p.feasible,
            };
            eval.penalty(&problem)
        };
        let mut current = f64::INFINITY;
        let mut accepted = Vec::new();
        for p in &trace.points {
            let score = penalty(p);
            if score < current {
                current = score;
                accepted.push(score);
            }
        }
        for w in accepted.windows(2) {
            assert!(w[1] <= w[0]);
        }
    }

    #[test]
    fn evaluation_budget_is_respected() {
        let problem = constant_problem();
        for budget in [1usize, 2, 7, 33] {
            let trace = minimize(&problem, budget, 2).unwrap();
            assert!(trace.evaluations <= budget.max(1));
            assert_eq!(trace.points.len(), trace.evaluations);
        }
    }

    #[test]
    fn fixed_history_fills_lag_blocks() {
        let mut model = manual_model("nox", 1, vec![leaf(4.0)]);
        model.meta.lag = 2;
        model.meta.feature_names = vec!["s0_lag0".into(), "s0_lag1".into(), "s0_lag2".into()];
        model.forest.n_features = 3;
        let problem = ConstrainedProblem::new(
            model,
            vec![],
            vec![(0.0, 1.0)],
            LagFill::FixedHistory(vec![0.1, 0.2]),
        )
        .unwrap();
        assert_eq!(problem.feature_row(&[0.9]), vec![0.9, 0.1, 0.2]);
        // Steady state copies the candidate into every block.
        let problem = ConstrainedProblem {
            frozen_lags: LagFill::SteadyState,
            ..problem
        };
        assert_eq!(problem.feature_row(&[0.9]), vec![0.9, 0.9, 0.9]);
    }
}
