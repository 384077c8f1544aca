//! Data flow through a subprogram cycle.
//!
//! A subprogram with `k` vertices carries one vector-space dimension per vertex
//! per iteration, arranged as a `k x m` grid (`m` = iteration count). The flow
//! starts at vertex 1 with a declared initial dimension and walks the cycle:
//! every step adds the subprogram's increment and is then subjected to the
//! target vertex's capacity under a configurable policy. The wrap-around step
//! from vertex `k` of one iteration to vertex 1 of the next (the step across
//! the identified spine edge) may or may not add the increment, also by policy.
//!
//! The dimension at vertex `k` of the final iteration is the flow's output,
//! compared elsewhere against a desired output to classify the subprogram as
//! faulty (deficit), able (surplus) or sufficient.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// What happens when a step would exceed the target vertex's capacity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CapacityMode {
    /// Clamp the dimension to the capacity.
    #[default]
    Cap,
    /// Refuse: the simulation stops with an error naming the vertex.
    Reject,
    /// Capacities are advisory; keep the incremented dimension.
    Ignore,
}

impl fmt::Display for CapacityMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            CapacityMode::Cap => "cap",
            CapacityMode::Reject => "reject",
            CapacityMode::Ignore => "ignore",
        };
        f.write_str(s)
    }
}

/// Simulation policy shared by every subprogram of a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlowPolicy {
    pub capacity_mode: CapacityMode,
    /// Whether the wrap-around step between iterations adds the increment.
    pub beta_adds: bool,
    /// Whether inter-subprogram dimension mismatches are hard errors
    /// (consumed by the scenario runner; the stitching check itself always
    /// reports rather than fails).
    pub strict_stitching: bool,
}

impl Default for FlowPolicy {
    fn default() -> Self {
        FlowPolicy { capacity_mode: CapacityMode::Cap, beta_adds: true, strict_stitching: false }
    }
}

/// Dimension data attached to one subprogram: per-vertex capacities, the
/// per-step increment and the dimension the flow starts from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuiverRep {
    /// 1-based subprogram index, used in error messages and reports.
    pub subprogram: usize,
    /// Capacity of each vertex, in subprogram traversal order (length `k`).
    pub capacities: Vec<u64>,
    /// Dimension added by every traversal step.
    pub increment: u64,
    /// Dimension at vertex 1 of iteration 1.
    pub initial_dim: u64,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FlowError {
    #[error("subprogram {subprogram}: capacity list is empty")]
    EmptyCapacities { subprogram: usize },
    #[error("subprogram {subprogram}: iteration count must be at least 1")]
    ZeroIterations { subprogram: usize },
    #[error(
        "subprogram {subprogram}: initial dimension {initial} exceeds vertex-1 capacity {capacity} \
         (capacity mode {mode} admits no oversized start)"
    )]
    InitialExceedsCapacity { subprogram: usize, initial: u64, capacity: u64, mode: CapacityMode },
    #[error(
        "subprogram {subprogram}: dimension {dim} exceeds capacity {capacity} at vertex {vertex}, \
         iteration {iteration} (reject mode)"
    )]
    CapacityExceeded { subprogram: usize, vertex: usize, iteration: usize, dim: u64, capacity: u64 },
    #[error("{what}: {left} entries on the left, {right} on the right")]
    LengthMismatch { what: String, left: usize, right: usize },
}

/// The simulated `k x m` dimension grid of one subprogram.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DataFlow {
    pub rep: QuiverRep,
    pub iterations: usize,
    pub policy: FlowPolicy,
    /// `dims[v][q]` = dimension at vertex `v+1` during iteration `q+1`.
    pub dims: Vec<Vec<u64>>,
}

impl DataFlow {
    /// Dimension at vertex 1 of iteration 1 (equals `rep.initial_dim`).
    pub fn initial_dim(&self) -> u64 {
        self.dims[0][0]
    }

    /// The grid column of one iteration (1-based), as vertex order.
    pub fn iteration(&self, q: usize) -> Option<Vec<u64>> {
        if q == 0 || q > self.iterations {
            return None;
        }
        Some(self.dims.iter().map(|row| row[q - 1]).collect())
    }

    /// CSV with one row per vertex and one column per iteration.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("vertex");
        for q in 1..=self.iterations {
            out.push_str(&format!(",iteration_{q}"));
        }
        out.push('\n');
        for (v, row) in self.dims.iter().enumerate() {
            out.push_str(&format!("{}", v + 1));
            for d in row {
                out.push_str(&format!(",{d}"));
            }
            out.push('\n');
        }
        out
    }
}

fn step(
    prev: u64,
    add: u64,
    capacity: u64,
    mode: CapacityMode,
    at: (usize, usize, usize), // (subprogram, vertex 1-based, iteration 1-based)
) -> Result<u64, FlowError> {
    let next = prev.saturating_add(add);
    match mode {
        CapacityMode::Cap => Ok(next.min(capacity)),
        CapacityMode::Ignore => Ok(next),
        CapacityMode::Reject => {
            if next > capacity {
                Err(FlowError::CapacityExceeded {
                    subprogram: at.0,
                    vertex: at.1,
                    iteration: at.2,
                    dim: next,
                    capacity,
                })
            } else {
                Ok(next)
            }
        }
    }
}

/// Run the flow for the given number of iterations (>= 1).
///
/// Vertex 1 of iteration 1 holds `initial_dim`, which must fit under the
/// vertex-1 capacity unless capacities are ignored. Each in-iteration step
/// adds `increment` and applies the capacity policy at the target vertex; the
/// wrap-around step into the next iteration adds `increment` only when
/// `policy.beta_adds` and is subject to the vertex-1 capacity.
pub fn simulate_flow(
    rep: &QuiverRep,
    iterations: usize,
    policy: &FlowPolicy,
) -> Result<DataFlow, FlowError> {
    let k = rep.capacities.len();
    if k == 0 {
        return Err(FlowError::EmptyCapacities { subprogram: rep.subprogram });
    }
    if iterations == 0 {
        return Err(FlowError::ZeroIterations { subprogram: rep.subprogram });
    }
    if policy.capacity_mode != CapacityMode::Ignore && rep.initial_dim > rep.capacities[0] {
        return Err(FlowError::InitialExceedsCapacity {
            subprogram: rep.subprogram,
            initial: rep.initial_dim,
            capacity: rep.capacities[0],
            mode: policy.capacity_mode,
        });
    }

    let mut dims = vec![vec![0u64; iterations]; k];
    dims[0][0] = rep.initial_dim;
    for q in 0..iterations {
        if q > 0 {
            let add = if policy.beta_adds { rep.increment } else { 0 };
            dims[0][q] = step(
                dims[k - 1][q - 1],
                add,
                rep.capacities[0],
                policy.capacity_mode,
                (rep.subprogram, 1, q + 1),
            )?;
        }
        for v in 1..k {
            dims[v][q] = step(
                dims[v - 1][q],
                rep.increment,
                rep.capacities[v],
                policy.capacity_mode,
                (rep.subprogram, v + 1, q + 1),
            )?;
        }
    }

    Ok(DataFlow { rep: rep.clone(), iterations, policy: *policy, dims })
}

/// The flow's output dimension: vertex `k`, final iteration.
pub fn final_data_dimension(flow: &DataFlow) -> u64 {
    *flow.dims.last().unwrap().last().unwrap()
}

/// How a subprogram's output compares to its desired output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlowKind {
    /// Output below desired: a data-flow deficit.
    Faulty,
    /// Output above desired: a data-flow surplus.
    Able,
    /// Output exactly as desired.
    Sufficient,
}

impl fmt::Display for FlowKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            FlowKind::Faulty => "faulty",
            FlowKind::Able => "able",
            FlowKind::Sufficient => "sufficient",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Classification {
    pub theta: u64,
    pub delta: u64,
    pub kind: FlowKind,
    /// `|theta - delta|`; zero exactly for sufficient subprograms.
    pub margin: u64,
}

/// Compare an output dimension against the desired output.
pub fn classify(theta: u64, delta: u64) -> Classification {
    use std::cmp::Ordering::*;
    let (kind, margin) = match theta.cmp(&delta) {
        Less => (FlowKind::Faulty, delta - theta),
        Greater => (FlowKind::Able, theta - delta),
        Equal => (FlowKind::Sufficient, 0),
    };
    Classification { theta, delta, kind, margin }
}

/// Deficit/surplus pair of one subprogram. At most one side is nonzero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct Margin {
    pub deficit: u64,
    pub surplus: u64,
}

/// Per-subprogram margins for a whole network, in subprogram order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct MarginProfile {
    pub margins: Vec<Margin>,
}

impl MarginProfile {
    pub fn from_theta_delta(pairs: &[(u64, u64)]) -> MarginProfile {
        let margins = pairs
            .iter()
            .map(|&(theta, delta)| {
                let c = classify(theta, delta);
                match c.kind {
                    FlowKind::Faulty => Margin { deficit: c.margin, surplus: 0 },
                    FlowKind::Able => Margin { deficit: 0, surplus: c.margin },
                    FlowKind::Sufficient => Margin { deficit: 0, surplus: 0 },
                }
            })
            .collect();
        MarginProfile { margins }
    }

    /// Number of subprograms covered.
    pub fn len(&self) -> usize {
        self.margins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.margins.is_empty()
    }

    /// Deficit of subprogram `index` (1-based); zero when out of range.
    pub fn deficit(&self, index: usize) -> u64 {
        index
            .checked_sub(1)
            .and_then(|i| self.margins.get(i))
            .map_or(0, |m| m.deficit)
    }

    /// Surplus of subprogram `index` (1-based); zero when out of range.
    pub fn surplus(&self, index: usize) -> u64 {
        index
            .checked_sub(1)
            .and_then(|i| self.margins.get(i))
            .map_or(0, |m| m.surplus)
    }
}

/// Classify every flow against its desired output and collect the margins.
pub fn margin_profile(flows: &[DataFlow], deltas: &[u64]) -> Result<MarginProfile, FlowError> {
    if flows.len() != deltas.len() {
        return Err(FlowError::LengthMismatch {
            what: "flows vs desired outputs".into(),
            left: flows.len(),
            right: deltas.len(),
        });
    }
    let pairs: Vec<(u64, u64)> = flows
        .iter()
        .zip(deltas)
        .map(|(f, &d)| (final_data_dimension(f), d))
        .collect();
    Ok(MarginProfile::from_theta_delta(&pairs))
}

/// One inter-subprogram boundary in a stitching report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StitchBoundary {
    /// 1-based position of the left flow in the list (boundary `i` connects
    /// flows `i` and `i+1`).
    pub boundary: usize,
    pub final_dim: u64,
    pub next_initial: u64,
    pub matches: bool,
}

/// Dimension agreement across consecutive subprograms.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct StitchingReport {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub boundaries: Vec<StitchBoundary>,
}

impl StitchingReport {
    pub fn all_match(&self) -> bool {
        self.boundaries.iter().all(|b| b.matches)
    }

    pub fn mismatches(&self) -> Vec<&StitchBoundary> {
        self.boundaries.iter().filter(|b| !b.matches).collect()
    }
}

/// Compare the output dimension of each flow with the initial dimension of
/// the next. Reporting only; the caller decides whether mismatches are fatal.
pub fn check_stitching(flows: &[DataFlow]) -> StitchingReport {
    let boundaries = flows
        .windows(2)
        .enumerate()
        .map(|(i, pair)| {
            let final_dim = final_data_dimension(&pair[0]);
            let next_initial = pair[1].initial_dim();
            StitchBoundary { boundary: i + 1, final_dim, next_initial, matches: final_dim == next_initial }
        })
        .collect();
    StitchingReport { boundaries }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rep(subprogram: usize, capacities: &[u64], increment: u64, initial: u64) -> QuiverRep {
        QuiverRep { subprogram, capacities: capacities.to_vec(), increment, initial_dim: initial }
    }

    fn policy(mode: CapacityMode) -> FlowPolicy {
        FlowPolicy { capacity_mode: mode, ..FlowPolicy::default() }
    }

    fn column(flow: &DataFlow, q: usize) -> Vec<u64> {
        flow.iteration(q).unwrap()
    }

    #[test]
    fn single_iteration_walks_match_worked_values() {
        // Capacities (3,3,3), increment 1, initial 1: (1,2,3).
        let f = simulate_flow(&rep(1, &[3, 3, 3], 1, 1), 1, &policy(CapacityMode::Cap)).unwrap();
        assert_eq!(column(&f, 1), [1, 2, 3]);
        assert_eq!(final_data_dimension(&f), 3);

        // Zero increment keeps everything at the initial dimension.
        let f = simulate_flow(&rep(2, &[3, 5, 5, 0], 0, 0), 1, &policy(CapacityMode::Cap)).unwrap();
        assert_eq!(column(&f, 1), [0, 0, 0, 0]);
        assert_eq!(final_data_dimension(&f), 0);

        // Ignore mode grows past every capacity: (3,5,7).
        let f = simulate_flow(&rep(1, &[2, 3, 2], 2, 3), 1, &policy(CapacityMode::Ignore)).unwrap();
        assert_eq!(column(&f, 1), [3, 5, 7]);
        assert_eq!(final_data_dimension(&f), 7);
    }

    #[test]
    fn oversized_start_is_rejected_outside_ignore_mode() {
        let r = rep(1, &[2, 3, 2], 2, 3);
        for mode in [CapacityMode::Cap, CapacityMode::Reject] {
            let err = simulate_flow(&r, 1, &policy(mode)).unwrap_err();
            assert!(matches!(err, FlowError::InitialExceedsCapacity { subprogram: 1, initial: 3, capacity: 2, .. }));
        }
        assert!(simulate_flow(&r, 1, &policy(CapacityMode::Ignore)).is_ok());
    }

    #[test]
    fn reject_mode_names_the_overflowing_vertex() {
        // Walk 1 -> 3 -> 5: the step into vertex 3 (capacity 2) overflows.
        let err = simulate_flow(&rep(3, &[2, 3, 2], 2, 1), 2, &policy(CapacityMode::Reject)).unwrap_err();
        assert_eq!(
            err,
            FlowError::CapacityExceeded { subprogram: 3, vertex: 3, iteration: 1, dim: 5, capacity: 2 }
        );
        assert!(err.to_string().contains("vertex 3"));
    }

    #[test]
    fn beta_policy_controls_wraparound_increment() {
        let r = rep(1, &[100, 100, 100], 1, 0);
        let mut p = policy(CapacityMode::Ignore);
        p.beta_adds = true;
        let with_beta = simulate_flow(&r, 2, &p).unwrap();
        // 3x2 grid: column 1 = (0,1,2), wrap adds 1: column 2 = (3,4,5).
        assert_eq!(column(&with_beta, 1), [0, 1, 2]);
        assert_eq!(column(&with_beta, 2), [3, 4, 5]);
        assert_eq!(final_data_dimension(&with_beta), 5);

        p.beta_adds = false;
        let without = simulate_flow(&r, 2, &p).unwrap();
        assert_eq!(column(&without, 2), [2, 3, 4]);
        assert_eq!(final_data_dimension(&without), 4);
    }

    /// Closed forms for unobstructed growth, checked exhaustively:
    /// theta = initial + increment * (k*m - 1) when the wrap step adds, and
    /// theta = initial + increment * m * (k-1) when it does not.
    #[test]
    fn ignore_mode_growth_matches_closed_forms() {
        for k in 3..=5usize {
            for m in 1..=4usize {
                for ell in 0..=3u64 {
                    for initial in 0..=3u64 {
                        let r = rep(1, &vec![0; k], ell, initial);
                        let mut p = policy(CapacityMode::Ignore);

                        p.beta_adds = true;
                        let f = simulate_flow(&r, m, &p).unwrap();
                        let expected = initial + ell * ((k * m - 1) as u64);
                        assert_eq!(final_data_dimension(&f), expected, "beta_adds k={k} m={m} ell={ell}");

                        p.beta_adds = false;
                        let f = simulate_flow(&r, m, &p).unwrap();
                        let expected = initial + ell * (m as u64) * ((k - 1) as u64);
                        assert_eq!(final_data_dimension(&f), expected, "no-beta k={k} m={m} ell={ell}");
                    }
                }
            }
        }
    }

    /// Capped grids never exceed uncapped ones, entry by entry.
    #[test]
    fn cap_grids_are_dominated_by_ignore_grids() {
        for k in 3..=4usize {
            for ell in 0..=3u64 {
                for initial in 0..=2u64 {
                    for m in 1..=3usize {
                        let caps: Vec<u64> = (0..k).map(|v| ((v as u64) * 2 + 2) % 5 + initial).collect();
                        let r = rep(1, &caps, ell, initial.min(caps[0]));
                        let capped = simulate_flow(&r, m, &policy(CapacityMode::Cap)).unwrap();
                        let free = simulate_flow(&r, m, &policy(CapacityMode::Ignore)).unwrap();
                        for (rc, rf) in capped.dims.iter().zip(&free.dims) {
                            for (&c, &f) in rc.iter().zip(rf) {
                                assert!(c <= f, "cap {c} > ignore {f} (k={k} ell={ell} m={m})");
                            }
                        }
                        // And capacities really hold.
                        for (v, row) in capped.dims.iter().enumerate() {
                            for &d in row {
                                assert!(d <= caps[v].max(r.initial_dim));
                            }
                        }
                    }
                }
            }
        }
    }

    /// With a zero increment, a zero capacity anywhere drains the flow to 0.
    #[test]
    fn zero_increment_and_zero_capacity_force_zero_output() {
        for zero_at in 0..4usize {
            let mut caps = vec![7u64; 4];
            caps[zero_at] = 0;
            let initial = if zero_at == 0 { 0 } else { 5 };
            let r = rep(1, &caps, 0, initial);
            for m in 1..=3 {
                let f = simulate_flow(&r, m, &policy(CapacityMode::Cap)).unwrap();
                assert_eq!(final_data_dimension(&f), 0, "zero_at={zero_at} m={m}");
            }
        }
    }

    #[test]
    fn classification_covers_all_three_outcomes() {
        let c = classify(7, 1);
        assert_eq!((c.kind, c.margin), (FlowKind::Able, 6));
        let c = classify(0, 2);
        assert_eq!((c.kind, c.margin), (FlowKind::Faulty, 2));
        let c = classify(3, 3);
        assert_eq!((c.kind, c.margin), (FlowKind::Sufficient, 0));
    }

    #[test]
    fn margin_profile_from_reference_run() {
        let profile = MarginProfile::from_theta_delta(&[(7, 1), (0, 2), (3, 3)]);
        assert_eq!(
            profile.margins,
            [
                Margin { deficit: 0, surplus: 6 },
                Margin { deficit: 2, surplus: 0 },
                Margin { deficit: 0, surplus: 0 },
            ]
        );
        // At most one side nonzero, for every classified pair.
        for theta in 0..=6u64 {
            for delta in 0..=6u64 {
                let p = MarginProfile::from_theta_delta(&[(theta, delta)]);
                assert_eq!(p.margins[0].deficit * p.margins[0].surplus, 0);
            }
        }
    }

    #[test]
    fn margin_profile_rejects_length_mismatch() {
        let f = simulate_flow(&rep(1, &[3, 3, 3], 1, 1), 1, &FlowPolicy::default()).unwrap();
        let err = margin_profile(&[f], &[1, 2]).unwrap_err();
        assert!(matches!(err, FlowError::LengthMismatch { .. }));
    }

    #[test]
    fn stitching_reports_every_boundary() {
        // Reference network flows: outputs (7, 0, 3), initials (3, 0, 1).
        let f1 = simulate_flow(&rep(1, &[2, 3, 2], 2, 3), 1, &policy(CapacityMode::Ignore)).unwrap();
        let f2 = simulate_flow(&rep(2, &[3, 5, 5, 0], 0, 0), 1, &policy(CapacityMode::Cap)).unwrap();
        let f3 = simulate_flow(&rep(3, &[3, 3, 3], 1, 1), 1, &policy(CapacityMode::Cap)).unwrap();
        let report = check_stitching(&[f1, f2, f3]);
        assert_eq!(report.boundaries.len(), 2);
        // 7 != 0 and 0 != 1: both boundaries mismatch.
        assert!(!report.all_match());
        assert_eq!(report.mismatches().len(), 2);
        assert_eq!(report.boundaries[0].final_dim, 7);
        assert_eq!(report.boundaries[0].next_initial, 0);
        assert_eq!(report.boundaries[1].final_dim, 0);
        assert_eq!(report.boundaries[1].next_initial, 1);
    }

    #[test]
    fn grids_are_deterministic() {
        let r = rep(2, &[4, 4, 4, 4], 2, 1);
        let p = FlowPolicy::default();
        let a = simulate_flow(&r, 3, &p).unwrap();
        let b = simulate_flow(&r, 3, &p).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn csv_shape_is_vertices_by_iterations() {
        let f = simulate_flow(&rep(1, &[3, 3, 3], 1, 1), 2, &FlowPolicy::default()).unwrap();
        let csv = f.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "vertex,iteration_1,iteration_2");
        assert_eq!(lines.len(), 4); // header + one row per vertex
        assert!(lines[1].starts_with("1,1,"));
    }
}
