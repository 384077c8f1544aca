//! Scenario files and the end-to-end run pipeline.
//!
//! A scenario is a TOML description of one experiment: the network shape,
//! per-subprogram dimension data, desired outputs, the run policy and an RNG
//! seed. [`run_instance`] turns a scenario into a fully derived
//! [`InstanceReport`]: simulated flows, output classifications, chain and
//! mapping-cone tables, the error persistence diagram and its statistics.
//! Reports serialise to deterministic TOML — same scenario, same seed, same
//! bytes — and can be audited after the fact with [`rederive_diagram`].

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cosheaf::{
    build_cover, cech_chain_data, cech_homology_dims, cone_homology_dim, phi_projection,
    CosheafError, CosheafKind, KernelMode,
};
use crate::dataflow::{
    check_stitching, classify, final_data_dimension, margin_profile, simulate_flow, CapacityMode,
    DataFlow, FlowError, FlowKind, FlowPolicy, MarginProfile, QuiverRep, StitchingReport,
};
use crate::hrn::{build, Hrn, HrnError};
use crate::persistence::{
    bottleneck_distance, diagram_statistics, generate_p_intervals, DiagramError, DiagramPoint,
    DiagramStatistics, ErrorDiagram, ErrorEvent, MagnitudeRule, MatchError, MatchPolicy,
};

/// Name of the random generator used for initial-dimension draws, recorded in
/// every report so results stay reproducible across versions.
pub const GENERATOR: &str = "chacha8";

/// Serde representation for seed fields. TOML integers are signed 64-bit,
/// but seeds span the full `u64` range (batch derivation uses every bit), so
/// a seed serialises as a plain integer when it fits and as a decimal string
/// above `i64::MAX`; parsing accepts integers, decimal strings and `0x` hex.
mod seed_repr {
    use std::fmt;

    pub fn serialize<S: serde::Serializer>(v: &u64, serializer: S) -> Result<S::Ok, S::Error> {
        if *v <= i64::MAX as u64 {
            serializer.serialize_u64(*v)
        } else {
            serializer.serialize_str(&v.to_string())
        }
    }

    pub fn deserialize<'de, D: serde::Deserializer<'de>>(deserializer: D) -> Result<u64, D::Error> {
        struct SeedVisitor;
        impl serde::de::Visitor<'_> for SeedVisitor {
            type Value = u64;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a non-negative integer seed, or one written as a string")
            }

            fn visit_u64<E: serde::de::Error>(self, v: u64) -> Result<u64, E> {
                Ok(v)
            }

            fn visit_i64<E: serde::de::Error>(self, v: i64) -> Result<u64, E> {
                u64::try_from(v).map_err(|_| E::custom("seed must be non-negative"))
            }

            fn visit_str<E: serde::de::Error>(self, v: &str) -> Result<u64, E> {
                let parsed = match v.strip_prefix("0x").or_else(|| v.strip_prefix("0X")) {
                    Some(hex) => u64::from_str_radix(hex, 16),
                    None => v.parse(),
                };
                parsed.map_err(|_| E::custom(format!("`{v}` is not a valid seed")))
            }
        }
        deserializer.deserialize_any(SeedVisitor)
    }
}

// ---------------------------------------------------------------------------
// Scenario schema
// ---------------------------------------------------------------------------

/// Network shape: `m` cycles glued along the spine.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSpec {
    pub m: usize,
    pub cycle_lengths: Vec<usize>,
}

/// Where a subprogram's starting dimension comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialSpec {
    /// A literal starting dimension; consumes no randomness.
    Fixed(u64),
    /// Drawn uniformly from `lo..=hi` (one draw per run, in subprogram order).
    Uniform { lo: u64, hi: u64 },
}

/// Per-subprogram dimension data.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubprogramSpec {
    /// One capacity per cycle vertex, in traversal order.
    pub capacities: Vec<u64>,
    /// Dimension added by each traversal step.
    pub ell: u64,
    /// Number of iterations (>= 1).
    pub iterations: usize,
    /// Override of the global capacity mode for this subprogram only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub capacity_mode: Option<CapacityMode>,
    pub initial: InitialSpec,
}

/// Global run policy. Every field has a default, so scenarios only spell out
/// what they change.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioPolicy {
    pub capacity_mode: CapacityMode,
    pub beta_adds: bool,
    pub strict_stitching: bool,
    pub magnitude_rule: MagnitudeRule,
    pub require_subsequent: bool,
    pub kernel_mode: KernelMode,
    /// Proper points with persistence at most this count as noise in the
    /// report statistics.
    pub noise_threshold: u64,
}

impl Default for ScenarioPolicy {
    fn default() -> Self {
        ScenarioPolicy {
            capacity_mode: CapacityMode::Cap,
            beta_adds: true,
            strict_stitching: false,
            magnitude_rule: MagnitudeRule::Exact,
            require_subsequent: true,
            kernel_mode: KernelMode::Absolute,
            noise_threshold: 0,
        }
    }
}

impl ScenarioPolicy {
    /// The flow policy seen by subprogram `index` (0-based), honouring a
    /// per-subprogram capacity-mode override.
    pub fn flow_policy_for(&self, sub: &SubprogramSpec) -> FlowPolicy {
        FlowPolicy {
            capacity_mode: sub.capacity_mode.unwrap_or(self.capacity_mode),
            beta_adds: self.beta_adds,
            strict_stitching: self.strict_stitching,
        }
    }

    pub fn match_policy(&self) -> MatchPolicy {
        MatchPolicy {
            magnitude_rule: self.magnitude_rule,
            require_subsequent: self.require_subsequent,
        }
    }
}

/// One complete experiment description.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    /// Base RNG seed; `--seed` and batch derivation override it per run.
    #[serde(with = "seed_repr")]
    pub seed: u64,
    /// Desired output dimension per subprogram.
    pub desired_outputs: Vec<u64>,
    pub network: NetworkSpec,
    #[serde(default)]
    pub policy: ScenarioPolicy,
    pub subprograms: Vec<SubprogramSpec>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ScenarioError {
    #[error("scenario parse error: {0}")]
    Parse(String),
    #[error("scenario field `{field}`: {msg}")]
    Invalid { field: String, msg: String },
    #[error("report encode error: {0}")]
    Encode(String),
    #[error(transparent)]
    Network(#[from] HrnError),
    #[error(transparent)]
    Flow(#[from] FlowError),
    #[error(transparent)]
    Cosheaf(#[from] CosheafError),
    #[error(transparent)]
    Match(#[from] MatchError),
    #[error(transparent)]
    Diagram(#[from] DiagramError),
    #[error(
        "stitching mismatch at boundary {boundary}: subprogram {boundary} ends at dimension \
         {final_dim} but subprogram {next} starts at {next_initial} (strict stitching is on)"
    )]
    StitchMismatch { boundary: usize, next: usize, final_dim: u64, next_initial: u64 },
    #[error("report is internally inconsistent: {0}")]
    InconsistentReport(String),
}

fn invalid(field: impl Into<String>, msg: impl Into<String>) -> ScenarioError {
    ScenarioError::Invalid { field: field.into(), msg: msg.into() }
}

/// Cross-field validation, with 0-based array paths in error messages
/// (`subprograms[1].capacities`).
pub fn validate_scenario(scenario: &Scenario) -> Result<(), ScenarioError> {
    let m = scenario.network.m;
    if m == 0 {
        return Err(invalid("network.m", "a network needs at least one subprogram"));
    }
    if scenario.network.cycle_lengths.len() != m {
        return Err(invalid(
            "network.cycle_lengths",
            format!("expected {m} entries (one per subprogram), found {}", scenario.network.cycle_lengths.len()),
        ));
    }
    for (i, &k) in scenario.network.cycle_lengths.iter().enumerate() {
        if k < 3 {
            return Err(invalid(
                format!("network.cycle_lengths[{i}]"),
                format!("a cycle needs at least 3 vertices, found {k}"),
            ));
        }
    }
    if scenario.subprograms.len() != m {
        return Err(invalid(
            "subprograms",
            format!("expected {m} subprogram blocks, found {}", scenario.subprograms.len()),
        ));
    }
    if scenario.desired_outputs.len() != m {
        return Err(invalid(
            "desired_outputs",
            format!("expected {m} entries (one per subprogram), found {}", scenario.desired_outputs.len()),
        ));
    }
    for (i, sub) in scenario.subprograms.iter().enumerate() {
        let k = scenario.network.cycle_lengths[i];
        if sub.capacities.len() != k {
            return Err(invalid(
                format!("subprograms[{i}].capacities"),
                format!("expected {k} capacities (one per cycle vertex), found {}", sub.capacities.len()),
            ));
        }
        if sub.iterations == 0 {
            return Err(invalid(
                format!("subprograms[{i}].iterations"),
                "at least one iteration is required",
            ));
        }
        if let InitialSpec::Uniform { lo, hi } = sub.initial {
            if lo > hi {
                return Err(invalid(
                    format!("subprograms[{i}].initial"),
                    format!("uniform range is empty (lo {lo} > hi {hi})"),
                ));
            }
        }
    }
    Ok(())
}

/// Parse and validate a scenario from TOML text.
pub fn parse_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    let scenario: Scenario =
        toml::from_str(text).map_err(|e| ScenarioError::Parse(e.to_string()))?;
    validate_scenario(&scenario)?;
    Ok(scenario)
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

/// Realised network shape, echoed into the report.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkSummary {
    pub m: usize,
    pub cycle_lengths: Vec<usize>,
    pub vertex_count: usize,
    pub edge_count: usize,
}

/// Outcome of one subprogram's run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubprogramOutcome {
    /// 1-based subprogram index.
    pub index: usize,
    pub capacity_mode: CapacityMode,
    pub initial_dim: u64,
    pub theta: u64,
    pub delta: u64,
    pub kind: FlowKind,
    pub margin: u64,
}

/// Chain dimensions, boundary ranks and homology for both precosheaves,
/// indexed by degree `0..=N`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainSummary {
    pub error_dims: Vec<u64>,
    pub error_boundary_ranks: Vec<u64>,
    pub error_homology: Vec<u64>,
    pub fix_dims: Vec<u64>,
    pub fix_boundary_ranks: Vec<u64>,
    pub fix_homology: Vec<u64>,
}

/// Mapping-cone data at one degree: chain dimension, projection rank and the
/// cone kernel under both modes, for both precosheaves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConeRow {
    /// Degree `k`, `1 <= k <= N`.
    pub degree: usize,
    pub error_chain_dim: u64,
    pub error_phi_rank: u64,
    pub error_cone_absolute: u64,
    pub error_cone_incremental: u64,
    pub fix_chain_dim: u64,
    pub fix_phi_rank: u64,
    pub fix_cone_absolute: u64,
    pub fix_cone_incremental: u64,
}

/// CSV rendering of the cone table (one row per degree).
pub fn cones_to_csv(rows: &[ConeRow]) -> String {
    let mut out = String::from(
        "degree,error_chain_dim,error_phi_rank,error_cone_absolute,error_cone_incremental,\
         fix_chain_dim,fix_phi_rank,fix_cone_absolute,fix_cone_incremental\n",
    );
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            r.degree,
            r.error_chain_dim,
            r.error_phi_rank,
            r.error_cone_absolute,
            r.error_cone_incremental,
            r.fix_chain_dim,
            r.fix_phi_rank,
            r.fix_cone_absolute,
            r.fix_cone_incremental,
        ));
    }
    out
}

/// The complete, self-contained result of one run. Field order keeps the
/// TOML rendering stable and deterministic.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstanceReport {
    pub generator: String,
    #[serde(with = "seed_repr")]
    pub seed: u64,
    pub desired_outputs: Vec<u64>,
    pub network: NetworkSummary,
    pub policy: ScenarioPolicy,
    pub subprograms: Vec<SubprogramOutcome>,
    #[serde(default)]
    pub stitching: StitchingReport,
    pub chains: ChainSummary,
    pub cones: Vec<ConeRow>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub error_events: Vec<ErrorEvent>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub fix_events: Vec<ErrorEvent>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub diagram: Vec<DiagramPoint>,
    pub statistics: DiagramStatistics,
}

impl InstanceReport {
    /// The report's diagram as a canonical [`ErrorDiagram`].
    pub fn diagram(&self) -> Result<ErrorDiagram, DiagramError> {
        ErrorDiagram::from_points(self.diagram.iter().copied())
    }
}

/// Serialise a report to its canonical TOML form.
pub fn report_to_toml(report: &InstanceReport) -> Result<String, ScenarioError> {
    toml::to_string_pretty(report).map_err(|e| ScenarioError::Encode(e.to_string()))
}

/// Parse a report from TOML text.
pub fn parse_report(text: &str) -> Result<InstanceReport, ScenarioError> {
    toml::from_str(text).map_err(|e| ScenarioError::Parse(e.to_string()))
}

/// Everything a run produces: the report plus the bulkier artifacts (network,
/// raw flow grids, margin profile, canonical diagram) that back it.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub network: Hrn,
    pub flows: Vec<DataFlow>,
    pub profile: MarginProfile,
    pub diagram: ErrorDiagram,
    pub report: InstanceReport,
}

// ---------------------------------------------------------------------------
// Running
// ---------------------------------------------------------------------------

/// Extract the event list of one precosheaf from a cone table: every degree
/// whose cone kernel (under `mode`) is nonzero, with that dimension as the
/// event magnitude.
pub fn events_from_cones(rows: &[ConeRow], kind: CosheafKind, mode: KernelMode) -> Vec<ErrorEvent> {
    rows.iter()
        .filter_map(|r| {
            let magnitude = match (kind, mode) {
                (CosheafKind::Error, KernelMode::Absolute) => r.error_cone_absolute,
                (CosheafKind::Error, KernelMode::Incremental) => r.error_cone_incremental,
                (CosheafKind::Fix, KernelMode::Absolute) => r.fix_cone_absolute,
                (CosheafKind::Fix, KernelMode::Incremental) => r.fix_cone_incremental,
            };
            (magnitude > 0).then_some(ErrorEvent { index: r.degree, magnitude })
        })
        .collect()
}

/// Run one scenario instance. `seed_override` replaces the scenario's base
/// seed (used by `--seed` and by batch derivation); the effective seed is
/// recorded in the report.
pub fn run_instance(
    scenario: &Scenario,
    seed_override: Option<u64>,
) -> Result<RunOutcome, ScenarioError> {
    validate_scenario(scenario)?;
    let seed = seed_override.unwrap_or(scenario.seed);
    let network = build(&scenario.network.cycle_lengths)?;
    let m = scenario.network.m;

    // Initial dimensions are drawn in subprogram order; fixed initials
    // consume no randomness, so removing a uniform draw never shifts others
    // placed before it.
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut flows = Vec::with_capacity(m);
    let mut outcomes = Vec::with_capacity(m);
    for (i, sub) in scenario.subprograms.iter().enumerate() {
        let initial_dim = match sub.initial {
            InitialSpec::Fixed(v) => v,
            InitialSpec::Uniform { lo, hi } => rng.gen_range(lo..=hi),
        };
        let policy = scenario.policy.flow_policy_for(sub);
        let rep = QuiverRep {
            subprogram: i + 1,
            capacities: sub.capacities.clone(),
            increment: sub.ell,
            initial_dim,
        };
        let flow = simulate_flow(&rep, sub.iterations, &policy)?;
        let theta = final_data_dimension(&flow);
        let c = classify(theta, scenario.desired_outputs[i]);
        outcomes.push(SubprogramOutcome {
            index: i + 1,
            capacity_mode: policy.capacity_mode,
            initial_dim,
            theta,
            delta: c.delta,
            kind: c.kind,
            margin: c.margin,
        });
        flows.push(flow);
    }

    let stitching = check_stitching(&flows);
    if scenario.policy.strict_stitching {
        if let Some(bad) = stitching.mismatches().first() {
            return Err(ScenarioError::StitchMismatch {
                boundary: bad.boundary,
                next: bad.boundary + 1,
                final_dim: bad.final_dim,
                next_initial: bad.next_initial,
            });
        }
    }

    let profile = margin_profile(&flows, &scenario.desired_outputs)?;
    let cover = build_cover(m);
    let error_chain = cech_chain_data(CosheafKind::Error, &profile, &cover)?;
    let fix_chain = cech_chain_data(CosheafKind::Fix, &profile, &cover)?;
    let chains = ChainSummary {
        error_homology: cech_homology_dims(&error_chain),
        fix_homology: cech_homology_dims(&fix_chain),
        error_dims: error_chain.chain_dims,
        error_boundary_ranks: error_chain.boundary_ranks,
        fix_dims: fix_chain.chain_dims,
        fix_boundary_ranks: fix_chain.boundary_ranks,
    };

    let mut cones = Vec::with_capacity(m);
    for k in 1..=m {
        let error_phi = phi_projection(CosheafKind::Error, &profile, k)?;
        let fix_phi = phi_projection(CosheafKind::Fix, &profile, k)?;
        cones.push(ConeRow {
            degree: k,
            error_chain_dim: chains.error_dims[k],
            error_phi_rank: error_phi.rank,
            error_cone_absolute: cone_homology_dim(
                CosheafKind::Error,
                &profile,
                k,
                KernelMode::Absolute,
            )?,
            error_cone_incremental: cone_homology_dim(
                CosheafKind::Error,
                &profile,
                k,
                KernelMode::Incremental,
            )?,
            fix_chain_dim: chains.fix_dims[k],
            fix_phi_rank: fix_phi.rank,
            fix_cone_absolute: cone_homology_dim(
                CosheafKind::Fix,
                &profile,
                k,
                KernelMode::Absolute,
            )?,
            fix_cone_incremental: cone_homology_dim(
                CosheafKind::Fix,
                &profile,
                k,
                KernelMode::Incremental,
            )?,
        });
    }

    let error_events = events_from_cones(&cones, CosheafKind::Error, scenario.policy.kernel_mode);
    let fix_events = events_from_cones(&cones, CosheafKind::Fix, scenario.policy.kernel_mode);
    let diagram = generate_p_intervals(&error_events, &fix_events, &scenario.policy.match_policy())?;
    let statistics = diagram_statistics(&diagram, scenario.policy.noise_threshold);

    let report = InstanceReport {
        generator: GENERATOR.to_string(),
        seed,
        desired_outputs: scenario.desired_outputs.clone(),
        network: NetworkSummary {
            m,
            cycle_lengths: scenario.network.cycle_lengths.clone(),
            vertex_count: network.vertex_count(),
            edge_count: network.edge_count(),
        },
        policy: scenario.policy,
        subprograms: outcomes,
        stitching,
        chains,
        cones,
        error_events,
        fix_events,
        diagram: diagram.points().to_vec(),
        statistics,
    };

    Ok(RunOutcome { network, flows, profile, diagram, report })
}

/// Recompute a report's diagram from its own cone table and confirm the
/// recorded events and diagram agree; any edit to one of the three leaves
/// them inconsistent.
pub fn rederive_diagram(report: &InstanceReport) -> Result<ErrorDiagram, ScenarioError> {
    let mode = report.policy.kernel_mode;
    let errors = events_from_cones(&report.cones, CosheafKind::Error, mode);
    if errors != report.error_events {
        return Err(ScenarioError::InconsistentReport(format!(
            "error events derived from the cone table ({errors:?}) disagree with the recorded \
             events ({:?})",
            report.error_events
        )));
    }
    let fixes = events_from_cones(&report.cones, CosheafKind::Fix, mode);
    if fixes != report.fix_events {
        return Err(ScenarioError::InconsistentReport(format!(
            "fix events derived from the cone table ({fixes:?}) disagree with the recorded \
             events ({:?})",
            report.fix_events
        )));
    }
    let derived = generate_p_intervals(&errors, &fixes, &report.policy.match_policy())?;
    let recorded = report.diagram()?;
    if derived != recorded {
        return Err(ScenarioError::InconsistentReport(format!(
            "recorded diagram ({:?}) disagrees with the diagram derived from the cone table \
             ({:?})",
            recorded.points(),
            derived.points()
        )));
    }
    Ok(derived)
}

// ---------------------------------------------------------------------------
// Batches
// ---------------------------------------------------------------------------

fn splitmix64(seed: u64) -> u64 {
    let mut z = seed.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// The per-instance seed of batch entry `index` under base seed `base`.
pub fn derived_seed(base: u64, index: u64) -> u64 {
    splitmix64(base ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// One entry of a batch run.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchEntry {
    pub index: usize,
    pub seed: u64,
    pub report: InstanceReport,
}

/// Run `count` instances of the scenario with decorrelated per-instance
/// seeds derived from the base seed.
pub fn run_batch(scenario: &Scenario, count: usize) -> Result<Vec<BatchEntry>, ScenarioError> {
    (0..count)
        .map(|index| {
            let seed = derived_seed(scenario.seed, index as u64);
            run_instance(scenario, Some(seed))
                .map(|outcome| BatchEntry { index, seed, report: outcome.report })
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Comparison
// ---------------------------------------------------------------------------

/// Result of comparing two diagrams (or the reports containing them).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    /// Display form of the bottleneck distance (`"2"`, `"1.5"`, `"inf"`).
    pub distance: String,
    /// Numeric distance; infinity when the diagrams are incomparable.
    pub distance_value: f64,
    pub identical: bool,
    pub verdict: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub same_network_shape: Option<bool>,
    pub left: DiagramStatistics,
    pub right: DiagramStatistics,
}

/// Compare two diagrams with the bottleneck distance; `threshold` feeds the
/// per-diagram noise statistics.
pub fn compare_diagrams(a: &ErrorDiagram, b: &ErrorDiagram, threshold: u64) -> ComparisonReport {
    let d = bottleneck_distance(a, b);
    let identical = d.doubled() == Some(0);
    let verdict = if identical {
        "identical error persistence diagrams".to_string()
    } else if d.is_finite() {
        format!("diagrams differ; bottleneck distance {d}")
    } else {
        format!(
            "diagrams are infinitely far apart (persistent-error mass at infinity differs: \
             {} vs {})",
            a.infinity_mass(),
            b.infinity_mass()
        )
    };
    ComparisonReport {
        distance: d.to_string(),
        distance_value: d.as_f64(),
        identical,
        verdict,
        same_network_shape: None,
        left: diagram_statistics(a, threshold),
        right: diagram_statistics(b, threshold),
    }
}

/// Compare the diagrams of two instance reports, flagging comparisons across
/// different network shapes. The noise threshold defaults to the larger of
/// the two reports' own thresholds unless overridden.
pub fn compare_instances(
    a: &InstanceReport,
    b: &InstanceReport,
    threshold_override: Option<u64>,
) -> Result<ComparisonReport, ScenarioError> {
    let da = a.diagram()?;
    let db = b.diagram()?;
    let threshold =
        threshold_override.unwrap_or_else(|| a.policy.noise_threshold.max(b.policy.noise_threshold));
    let mut cmp = compare_diagrams(&da, &db, threshold);
    let same = a.network.m == b.network.m && a.network.cycle_lengths == b.network.cycle_lengths;
    cmp.same_network_shape = Some(same);
    if !same {
        cmp.verdict.push_str(
            "; note: the reports describe different network shapes, so distances measure the \
             error patterns only",
        );
    }
    Ok(cmp)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::persistence::Death;

    /// A pipeline whose three subprograms come out able (+6), faulty (-2)
    /// and sufficient: theta = (7, 0, 3) against desired (1, 2, 3).
    const REFERENCE_SCENARIO: &str = r#"
seed = 1729
desired_outputs = [1, 2, 3]

[network]
m = 3
cycle_lengths = [3, 4, 3]

[[subprograms]]
capacities = [2, 2, 2]
ell = 1
iterations = 2
capacity_mode = "ignore"
initial = { fixed = 2 }

[[subprograms]]
capacities = [5, 5, 5, 5]
ell = 0
iterations = 1
initial = { fixed = 0 }

[[subprograms]]
capacities = [3, 3, 3]
ell = 2
iterations = 1
initial = { fixed = 1 }
"#;

    fn reference() -> Scenario {
        parse_scenario(REFERENCE_SCENARIO).unwrap()
    }

    #[test]
    fn parses_scenario_with_defaults() {
        let sc = reference();
        assert_eq!(sc.seed, 1729);
        assert_eq!(sc.network.cycle_lengths, [3, 4, 3]);
        assert_eq!(sc.policy, ScenarioPolicy::default());
        assert_eq!(sc.subprograms[0].capacity_mode, Some(CapacityMode::Ignore));
        assert_eq!(sc.subprograms[1].capacity_mode, None);
        assert_eq!(sc.subprograms[0].initial, InitialSpec::Fixed(2));
    }

    #[test]
    fn rejects_unknown_fields() {
        let err = parse_scenario("seed = 1\nbogus = 2\n").unwrap_err();
        match err {
            ScenarioError::Parse(msg) => assert!(msg.contains("bogus"), "{msg}"),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn validation_errors_name_the_field() {
        let mut sc = reference();
        sc.network.cycle_lengths = vec![3, 4];
        let err = validate_scenario(&sc).unwrap_err();
        assert_eq!(
            err,
            ScenarioError::Invalid {
                field: "network.cycle_lengths".into(),
                msg: "expected 3 entries (one per subprogram), found 2".into()
            }
        );

        let mut sc = reference();
        sc.network.cycle_lengths[1] = 2;
        sc.subprograms[1].capacities = vec![5, 5];
        let err = validate_scenario(&sc).unwrap_err();
        assert!(matches!(err, ScenarioError::Invalid { ref field, .. } if field == "network.cycle_lengths[1]"));

        let mut sc = reference();
        sc.subprograms[2].capacities.push(9);
        let err = validate_scenario(&sc).unwrap_err();
        assert!(matches!(err, ScenarioError::Invalid { ref field, .. } if field == "subprograms[2].capacities"));

        let mut sc = reference();
        sc.subprograms[0].iterations = 0;
        let err = validate_scenario(&sc).unwrap_err();
        assert!(matches!(err, ScenarioError::Invalid { ref field, .. } if field == "subprograms[0].iterations"));

        let mut sc = reference();
        sc.subprograms[0].initial = InitialSpec::Uniform { lo: 5, hi: 2 };
        let err = validate_scenario(&sc).unwrap_err();
        assert!(matches!(err, ScenarioError::Invalid { ref field, .. } if field == "subprograms[0].initial"));

        let mut sc = reference();
        sc.desired_outputs.pop();
        let err = validate_scenario(&sc).unwrap_err();
        assert!(matches!(err, ScenarioError::Invalid { ref field, .. } if field == "desired_outputs"));
    }

    #[test]
    fn reference_run_end_to_end() {
        let outcome = run_instance(&reference(), None).unwrap();
        let report = &outcome.report;

        assert_eq!(report.generator, "chacha8");
        assert_eq!(report.seed, 1729);
        assert_eq!(report.network.vertex_count, 11);
        assert_eq!(report.network.edge_count, 13);

        let thetas: Vec<u64> = report.subprograms.iter().map(|s| s.theta).collect();
        assert_eq!(thetas, [7, 0, 3]);
        let kinds: Vec<FlowKind> = report.subprograms.iter().map(|s| s.kind).collect();
        assert_eq!(kinds, [FlowKind::Able, FlowKind::Faulty, FlowKind::Sufficient]);
        let margins: Vec<u64> = report.subprograms.iter().map(|s| s.margin).collect();
        assert_eq!(margins, [6, 2, 0]);

        // Both inter-subprogram boundaries mismatch (7 vs 0, 0 vs 1).
        assert!(!report.stitching.all_match());
        assert_eq!(report.stitching.boundaries.len(), 2);

        assert_eq!(report.chains.error_dims, [0, 0, 2, 0]);
        assert_eq!(report.chains.fix_dims, [6, 6, 0, 0]);
        assert_eq!(report.chains.error_homology, [0, 0, 2, 0]);
        assert_eq!(report.chains.fix_homology, [0, 0, 0, 0]);

        assert_eq!(report.error_events, [ErrorEvent { index: 2, magnitude: 2 }]);
        assert_eq!(report.fix_events, [ErrorEvent { index: 1, magnitude: 6 }]);

        // The only fix precedes the only error: the deficit persists forever.
        assert_eq!(
            report.diagram,
            [DiagramPoint { birth: 2, death: Death::Infinite, multiplicity: 2 }]
        );
        assert_eq!(report.statistics.infinity_mass, 2);
        assert_eq!(report.statistics.proper_mass, 0);
    }

    #[test]
    fn capacity_override_changes_the_outcome() {
        let mut sc = reference();
        sc.subprograms[0].capacity_mode = None; // fall back to global "cap"
        let outcome = run_instance(&sc, None).unwrap();
        // Capped at 2 everywhere, subprogram 1 can only output 2, not 7.
        assert_eq!(outcome.report.subprograms[0].theta, 2);
    }

    #[test]
    fn reports_serialise_deterministically_and_round_trip() {
        let a = run_instance(&reference(), None).unwrap().report;
        let b = run_instance(&reference(), None).unwrap().report;
        let ta = report_to_toml(&a).unwrap();
        let tb = report_to_toml(&b).unwrap();
        assert_eq!(ta, tb);
        assert_eq!(parse_report(&ta).unwrap(), a);
    }

    #[test]
    fn seed_override_is_recorded() {
        let outcome = run_instance(&reference(), Some(42)).unwrap();
        assert_eq!(outcome.report.seed, 42);
    }

    #[test]
    fn uniform_initials_are_seed_deterministic_and_in_range() {
        let mut sc = reference();
        sc.subprograms[0].initial = InitialSpec::Uniform { lo: 0, hi: 2 };
        sc.subprograms[2].initial = InitialSpec::Uniform { lo: 1, hi: 3 };
        let a = run_instance(&sc, Some(7)).unwrap().report;
        let b = run_instance(&sc, Some(7)).unwrap().report;
        assert_eq!(a, b);
        let i0 = a.subprograms[0].initial_dim;
        let i2 = a.subprograms[2].initial_dim;
        assert!((0..=2).contains(&i0));
        assert!((1..=3).contains(&i2));
    }

    #[test]
    fn strict_stitching_turns_mismatch_into_an_error() {
        let mut sc = reference();
        sc.policy.strict_stitching = true;
        let err = run_instance(&sc, None).unwrap_err();
        assert_eq!(
            err,
            ScenarioError::StitchMismatch { boundary: 1, next: 2, final_dim: 7, next_initial: 0 }
        );
    }

    #[test]
    fn cone_table_matches_chain_dims() {
        let report = run_instance(&reference(), None).unwrap().report;
        assert_eq!(report.cones.len(), 3);
        let row1 = report.cones[0];
        assert_eq!(row1.degree, 1);
        assert_eq!(row1.fix_chain_dim, 6);
        assert_eq!(row1.fix_phi_rank, 6); // C1 -> C0 is 6 -> 6
        assert_eq!(row1.fix_cone_absolute, 6);
        assert_eq!(row1.fix_cone_incremental, 6); // quotient by zero at k = 1
        let row2 = report.cones[1];
        assert_eq!(row2.error_chain_dim, 2);
        assert_eq!(row2.error_cone_absolute, 2);
        assert_eq!(row2.error_cone_incremental, 2);
        assert_eq!(row2.fix_cone_absolute, 0);
        let csv = cones_to_csv(&report.cones);
        assert!(csv.starts_with("degree,"));
        assert_eq!(csv.lines().count(), 4);
    }

    #[test]
    fn rederivation_accepts_honest_reports_and_rejects_tampered_ones() {
        let outcome = run_instance(&reference(), None).unwrap();
        let report = outcome.report;
        assert_eq!(rederive_diagram(&report).unwrap(), outcome.diagram);

        let mut tampered = report.clone();
        tampered.diagram[0].birth = 1;
        assert!(matches!(
            rederive_diagram(&tampered),
            Err(ScenarioError::InconsistentReport(_))
        ));

        let mut tampered = report.clone();
        tampered.error_events[0].magnitude = 9;
        assert!(matches!(
            rederive_diagram(&tampered),
            Err(ScenarioError::InconsistentReport(_))
        ));

        let mut tampered = report;
        tampered.cones[1].error_cone_absolute = 0;
        assert!(matches!(
            rederive_diagram(&tampered),
            Err(ScenarioError::InconsistentReport(_))
        ));
    }

    #[test]
    fn batches_are_deterministic_with_decorrelated_seeds() {
        let sc = reference();
        let a = run_batch(&sc, 5).unwrap();
        let b = run_batch(&sc, 5).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 5);
        let mut seeds: Vec<u64> = a.iter().map(|e| e.seed).collect();
        assert_eq!(seeds[0], derived_seed(1729, 0));
        seeds.sort_unstable();
        seeds.dedup();
        assert_eq!(seeds.len(), 5, "batch seeds must be pairwise distinct");
    }

    #[test]
    fn comparisons_report_distance_and_shape() {
        let report = run_instance(&reference(), None).unwrap().report;
        let cmp = compare_instances(&report, &report, None).unwrap();
        assert!(cmp.identical);
        assert_eq!(cmp.distance, "0");
        assert_eq!(cmp.same_network_shape, Some(true));

        // Same error pattern on a different network shape: flagged, finite.
        let mut other = reference();
        other.network.cycle_lengths = vec![3, 3, 3];
        other.subprograms[1].capacities = vec![5, 5, 5];
        let other_report = run_instance(&other, None).unwrap().report;
        let cmp = compare_instances(&report, &other_report, None).unwrap();
        assert_eq!(cmp.same_network_shape, Some(false));
        assert!(cmp.verdict.contains("different network shapes"));

        // Remove the deficit entirely: infinity mass differs, distance inf.
        let mut fixed = reference();
        fixed.desired_outputs = vec![1, 0, 3];
        let fixed_report = run_instance(&fixed, None).unwrap().report;
        let cmp = compare_instances(&report, &fixed_report, None).unwrap();
        assert_eq!(cmp.distance, "inf");
        assert!(!cmp.distance_value.is_finite());
    }

    #[test]
    fn seeds_above_the_toml_integer_range_round_trip() {
        let big = u64::MAX - 17;
        let report = run_instance(&reference(), Some(big)).unwrap().report;
        let text = report_to_toml(&report).unwrap();
        assert!(text.contains(&format!("seed = \"{big}\"")));
        assert_eq!(parse_report(&text).unwrap().seed, big);

        // Scenario files accept integers, decimal strings and hex strings.
        let mut sc = reference();
        sc.seed = big;
        let text = toml::to_string(&sc).unwrap();
        assert_eq!(toml::from_str::<Scenario>(&text).unwrap().seed, big);
        let hex = REFERENCE_SCENARIO.replace("seed = 1729", "seed = \"0x6C1\"");
        assert_eq!(parse_scenario(&hex).unwrap().seed, 0x6C1);
    }

    #[test]
    fn scenario_round_trips_through_toml() {
        let sc = reference();
        let text = toml::to_string(&sc).unwrap();
        let back: Scenario = toml::from_str(&text).unwrap();
        assert_eq!(back, sc);
    }
}
