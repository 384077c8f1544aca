//! Built-in verification suite.
//!
//! Each check re-derives a result the library computes — network counts,
//! flow dimensions, cone kernels, interval pairing, bottleneck distances —
//! through an independently written reference (closed forms, literal greedy
//! replay, brute-force matching enumeration) and compares. The CLI `check`
//! command runs [`run_all`] and reports one line per check, so a build can
//! vouch for itself on the machine it runs on.

use std::collections::BTreeMap;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::cosheaf::{cone_homology_dim, CosheafKind, KernelMode};
use crate::dataflow::{
    final_data_dimension, simulate_flow, CapacityMode, FlowPolicy, Margin, MarginProfile,
    QuiverRep,
};
use crate::hrn::{build, validate};
use crate::persistence::{
    bottleneck_distance, generate_p_intervals, persistent_error_dim, BottleneckDistance, Death,
    DiagramPoint, ErrorDiagram, ErrorEvent, MagnitudeRule, MatchError, MatchPolicy,
};
use crate::scenario::{parse_scenario, rederive_diagram, report_to_toml, run_instance};

/// Outcome of one verification check.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl CheckResult {
    fn pass(name: &'static str, detail: impl Into<String>) -> CheckResult {
        CheckResult { name, passed: true, detail: detail.into() }
    }

    fn fail(name: &'static str, detail: impl Into<String>) -> CheckResult {
        CheckResult { name, passed: false, detail: detail.into() }
    }
}

/// Run every check. The suite is deterministic (fixed seeds) and finishes in
/// well under a minute.
pub fn run_all() -> Vec<CheckResult> {
    vec![
        check_network_counts(),
        check_flow_closed_form(),
        check_margin_exclusivity(),
        check_cone_detection(),
        check_greedy_against_literal_oracle(),
        check_persistent_dim_against_summation(),
        check_bottleneck_against_brute_force(),
        check_bottleneck_metric_axioms(),
        check_report_determinism(),
    ]
}

// ---------------------------------------------------------------------------
// Structural checks
// ---------------------------------------------------------------------------

fn check_network_counts() -> CheckResult {
    const NAME: &str = "network-counts";
    let mut cases = 0usize;
    for m in 1..=3usize {
        // Every cycle-length tuple with entries in 3..=5.
        let mut tuple = vec![3usize; m];
        loop {
            let h = build(&tuple).unwrap();
            let expected_v = (2 * m + 1) + tuple.iter().map(|k| k - 2).sum::<usize>();
            let expected_e = m + tuple.iter().sum::<usize>();
            if h.vertex_count() != expected_v || h.edge_count() != expected_e {
                return CheckResult::fail(
                    NAME,
                    format!(
                        "cycles {tuple:?}: got {}v/{}e, closed form says {expected_v}v/{expected_e}e",
                        h.vertex_count(),
                        h.edge_count()
                    ),
                );
            }
            let report = validate(&h);
            if !report.is_valid() {
                return CheckResult::fail(
                    NAME,
                    format!("cycles {tuple:?}: built network fails validation: {report:?}"),
                );
            }
            cases += 1;
            // Advance the tuple like an odometer.
            let mut i = 0;
            loop {
                if i == m {
                    break;
                }
                tuple[i] += 1;
                if tuple[i] <= 5 {
                    break;
                }
                tuple[i] = 3;
                i += 1;
            }
            if i == m {
                break;
            }
        }
    }
    CheckResult::pass(NAME, format!("{cases} networks match the count formulas and validate"))
}

fn check_flow_closed_form() -> CheckResult {
    const NAME: &str = "flow-closed-form";
    let mut cases = 0usize;
    for k in 3..=5usize {
        for iterations in 1..=4usize {
            for ell in 0..=2u64 {
                for initial in 0..=2u64 {
                    for beta_adds in [false, true] {
                        let rep = QuiverRep {
                            subprogram: 1,
                            capacities: vec![0; k],
                            increment: ell,
                            initial_dim: initial,
                        };
                        let policy = FlowPolicy {
                            capacity_mode: CapacityMode::Ignore,
                            beta_adds,
                            strict_stitching: false,
                        };
                        let flow = simulate_flow(&rep, iterations, &policy).unwrap();
                        let steps = if beta_adds {
                            (k * iterations - 1) as u64
                        } else {
                            (iterations * (k - 1)) as u64
                        };
                        let expected = initial + ell * steps;
                        let got = final_data_dimension(&flow);
                        if got != expected {
                            return CheckResult::fail(
                                NAME,
                                format!(
                                    "k={k} q={iterations} ell={ell} init={initial} beta={beta_adds}: \
                                     theta {got} != closed form {expected}"
                                ),
                            );
                        }
                        cases += 1;
                    }
                }
            }
        }
    }
    CheckResult::pass(NAME, format!("{cases} unconstrained flows match the closed form"))
}

fn check_margin_exclusivity() -> CheckResult {
    const NAME: &str = "margin-exclusivity";
    let mut cases = 0usize;
    for theta in 0..=6u64 {
        for delta in 0..=6u64 {
            let profile = MarginProfile::from_theta_delta(&[(theta, delta)]);
            let m = profile.margins[0];
            if m.deficit * m.surplus != 0 {
                return CheckResult::fail(
                    NAME,
                    format!("theta {theta} delta {delta}: deficit {} and surplus {} overlap", m.deficit, m.surplus),
                );
            }
            if m.deficit != delta.saturating_sub(theta) || m.surplus != theta.saturating_sub(delta) {
                return CheckResult::fail(NAME, format!("theta {theta} delta {delta}: wrong margin {m:?}"));
            }
            cases += 1;
        }
    }
    CheckResult::pass(NAME, format!("{cases} classifications have one-sided margins"))
}

/// Every margin state on up to 4 subprograms: the absolute cone kernel is
/// nonzero exactly at the subprograms carrying the matching margin, with the
/// margin itself as dimension.
fn check_cone_detection() -> CheckResult {
    const NAME: &str = "cone-detection";
    let mut cases = 0usize;
    // Each subprogram state: 0 sufficient, 1..=2 deficit d, 3..=4 surplus d-2.
    for n in 1..=4usize {
        let states = 5usize.pow(n as u32);
        for code in 0..states {
            let mut c = code;
            let mut margins = Vec::with_capacity(n);
            for _ in 0..n {
                let s = c % 5;
                c /= 5;
                margins.push(match s {
                    0 => Margin { deficit: 0, surplus: 0 },
                    1 | 2 => Margin { deficit: s as u64, surplus: 0 },
                    _ => Margin { deficit: 0, surplus: (s - 2) as u64 },
                });
            }
            let profile = MarginProfile { margins: margins.clone() };
            for k in 1..=n {
                let err = cone_homology_dim(CosheafKind::Error, &profile, k, KernelMode::Absolute)
                    .unwrap();
                let fix = cone_homology_dim(CosheafKind::Fix, &profile, k, KernelMode::Absolute)
                    .unwrap();
                if err != margins[k - 1].deficit || fix != margins[k - 1].surplus {
                    return CheckResult::fail(
                        NAME,
                        format!(
                            "margins {margins:?} degree {k}: cone (err {err}, fix {fix}) != \
                             margin ({}, {})",
                            margins[k - 1].deficit,
                            margins[k - 1].surplus
                        ),
                    );
                }
                cases += 1;
            }
        }
    }
    CheckResult::pass(NAME, format!("{cases} degree checks detect exactly the stored margins"))
}

// ---------------------------------------------------------------------------
// Literal greedy oracle
// ---------------------------------------------------------------------------

/// What the literal greedy replay produces.
#[derive(Debug, PartialEq, Eq)]
pub enum OracleOutcome {
    /// `(error index, fix index or None for infinity, magnitude)` rows.
    Rows(Vec<(usize, Option<usize>, u64)>),
    /// The replay chose a fix at or before the error (only possible when the
    /// subsequent-fix rule is off).
    NonCausal { error_index: usize, fix_index: usize },
}

/// Replay the greedy interval assignment with plain maps, no shared code:
/// errors in index order, each taking the least-index usable fix.
pub fn literal_greedy_oracle(
    errors: &[(usize, u64)],
    fixes: &[(usize, u64)],
    rule: MagnitudeRule,
    require_subsequent: bool,
) -> OracleOutcome {
    let mut remaining: BTreeMap<usize, u64> = fixes.iter().copied().collect();
    let full: BTreeMap<usize, u64> = fixes.iter().copied().collect();
    let mut rows = Vec::new();
    for &(i, magnitude) in errors {
        let chosen = remaining
            .iter()
            .filter(|&(&k, &left)| {
                let position_ok = !require_subsequent || k > i;
                let magnitude_ok = match rule {
                    MagnitudeRule::Exact => left == full[&k] && left == magnitude,
                    MagnitudeRule::Partial => left >= magnitude,
                };
                position_ok && magnitude_ok
            })
            .map(|(&k, _)| k)
            .next();
        match chosen {
            Some(k) if k <= i => return OracleOutcome::NonCausal { error_index: i, fix_index: k },
            Some(k) => {
                *remaining.get_mut(&k).unwrap() -= magnitude;
                rows.push((i, Some(k), magnitude));
            }
            None => rows.push((i, None, magnitude)),
        }
    }
    OracleOutcome::Rows(rows)
}

fn oracle_rows_to_diagram(rows: &[(usize, Option<usize>, u64)]) -> ErrorDiagram {
    ErrorDiagram::from_points(rows.iter().map(|&(i, k, m)| DiagramPoint {
        birth: i as i64,
        death: match k {
            Some(k) => Death::Finite(k as i64),
            None => Death::Infinite,
        },
        multiplicity: m,
    }))
    .expect("oracle rows are causal")
}

/// Every strictly-increasing event list over a small index pool.
fn enumerate_event_lists(pool: &[usize], max_len: usize, max_mag: u64) -> Vec<Vec<(usize, u64)>> {
    let mut out = vec![Vec::new()];
    fn extend(
        pool: &[usize],
        max_len: usize,
        max_mag: u64,
        prefix: &mut Vec<(usize, u64)>,
        start: usize,
        out: &mut Vec<Vec<(usize, u64)>>,
    ) {
        if prefix.len() == max_len {
            return;
        }
        for (offset, &idx) in pool[start..].iter().enumerate() {
            for mag in 1..=max_mag {
                prefix.push((idx, mag));
                out.push(prefix.clone());
                extend(pool, max_len, max_mag, prefix, start + offset + 1, out);
                prefix.pop();
            }
        }
    }
    let mut prefix = Vec::new();
    extend(pool, max_len, max_mag, &mut prefix, 0, &mut out);
    out
}

fn check_greedy_against_literal_oracle() -> CheckResult {
    const NAME: &str = "greedy-pairing-oracle";
    let pool = [1usize, 2, 3, 4];
    let lists = enumerate_event_lists(&pool, 2, 2);
    let mut cases = 0usize;
    for errors in &lists {
        for fixes in &lists {
            for rule in [MagnitudeRule::Exact, MagnitudeRule::Partial] {
                for require_subsequent in [true, false] {
                    let policy = MatchPolicy { magnitude_rule: rule, require_subsequent };
                    let s1: Vec<ErrorEvent> =
                        errors.iter().map(|&(index, magnitude)| ErrorEvent { index, magnitude }).collect();
                    let s2: Vec<ErrorEvent> =
                        fixes.iter().map(|&(index, magnitude)| ErrorEvent { index, magnitude }).collect();
                    let got = generate_p_intervals(&s1, &s2, &policy);
                    let expected = literal_greedy_oracle(errors, fixes, rule, require_subsequent);
                    let agree = match (&got, &expected) {
                        (Ok(d), OracleOutcome::Rows(rows)) => *d == oracle_rows_to_diagram(rows),
                        (
                            Err(MatchError::NonCausalMatch { error_index, fix_index }),
                            OracleOutcome::NonCausal { error_index: ei, fix_index: fi },
                        ) => error_index == ei && fix_index == fi,
                        _ => false,
                    };
                    if !agree {
                        return CheckResult::fail(
                            NAME,
                            format!(
                                "errors {errors:?} fixes {fixes:?} rule {rule:?} \
                                 subsequent {require_subsequent}: {got:?} vs oracle {expected:?}"
                            ),
                        );
                    }
                    cases += 1;
                }
            }
        }
    }
    CheckResult::pass(NAME, format!("{cases} pairings agree with the literal greedy replay"))
}

// ---------------------------------------------------------------------------
// Persistence oracles
// ---------------------------------------------------------------------------

fn random_diagram(rng: &mut ChaCha8Rng, max_points: usize) -> ErrorDiagram {
    let count = rng.gen_range(0..=max_points);
    let points = (0..count).map(|_| {
        let birth = rng.gen_range(0..8i64);
        let death = if rng.gen_range(0..4u8) == 0 {
            Death::Infinite
        } else {
            Death::Finite(birth + rng.gen_range(1..6i64))
        };
        DiagramPoint { birth, death, multiplicity: rng.gen_range(1..3u64) }
    });
    ErrorDiagram::from_points(points).unwrap()
}

fn check_persistent_dim_against_summation() -> CheckResult {
    const NAME: &str = "persistent-dim-oracle";
    let mut rng = ChaCha8Rng::seed_from_u64(0xD1A6);
    let mut cases = 0usize;
    for _ in 0..200 {
        let d = random_diagram(&mut rng, 5);
        for i in -1..=13i64 {
            for j in -1..=13i64 {
                // Reference: walk expanded unit points one by one.
                let mut expected = 0u64;
                for p in d.points() {
                    if let Death::Finite(death) = p.death {
                        for _ in 0..p.multiplicity {
                            if p.birth <= i && death <= j {
                                expected += 1;
                            }
                        }
                    }
                }
                let got = persistent_error_dim(&d, i, j);
                if got != expected {
                    return CheckResult::fail(
                        NAME,
                        format!("{:?} at ({i},{j}): {got} != {expected}", d.points()),
                    );
                }
                if persistent_error_dim(&d, i + 1, j) < got || persistent_error_dim(&d, i, j + 1) < got
                {
                    return CheckResult::fail(NAME, format!("monotonicity fails at ({i},{j})"));
                }
                cases += 1;
            }
        }
    }
    CheckResult::pass(NAME, format!("{cases} window queries match unit-point summation"))
}

/// Brute-force bottleneck distance: enumerate every injective partial
/// matching of proper points (leftovers to the diagonal) and every
/// permutation pairing of infinity births; minimise the maximal doubled cost.
pub fn brute_force_bottleneck(a: &ErrorDiagram, b: &ErrorDiagram) -> BottleneckDistance {
    fn expand(d: &ErrorDiagram) -> (Vec<(i64, i64)>, Vec<i64>) {
        let mut proper = Vec::new();
        let mut infinite = Vec::new();
        for p in d.points() {
            for _ in 0..p.multiplicity {
                match p.death {
                    Death::Finite(death) => proper.push((p.birth, death)),
                    Death::Infinite => infinite.push(p.birth),
                }
            }
        }
        (proper, infinite)
    }
    let (ap, ai) = expand(a);
    let (bp, bi) = expand(b);
    if ai.len() != bi.len() {
        return BottleneckDistance::Infinite;
    }

    fn inf_min_max(ai: &[i64], bi: &[i64], used: &mut Vec<bool>, pos: usize) -> u128 {
        if pos == ai.len() {
            return 0;
        }
        let mut best = u128::MAX;
        for j in 0..bi.len() {
            if used[j] {
                continue;
            }
            used[j] = true;
            let rest = inf_min_max(ai, bi, used, pos + 1);
            used[j] = false;
            best = best.min(rest.max(2 * ai[pos].abs_diff(bi[j]) as u128));
        }
        best
    }
    let infinity_part =
        if ai.is_empty() { 0 } else { inf_min_max(&ai, &bi, &mut vec![false; bi.len()], 0) };

    fn proper_min_max(ap: &[(i64, i64)], bp: &[(i64, i64)], used: &mut Vec<bool>, pos: usize) -> u128 {
        if pos == ap.len() {
            // Unmatched b-points retire to the diagonal.
            let mut worst = 0u128;
            for (j, &q) in bp.iter().enumerate() {
                if !used[j] {
                    worst = worst.max(q.0.abs_diff(q.1) as u128);
                }
            }
            return worst;
        }
        let p = ap[pos];
        // Option 1: p to the diagonal.
        let mut best = proper_min_max(ap, bp, used, pos + 1).max(p.0.abs_diff(p.1) as u128);
        // Option 2: p to an unused q.
        for j in 0..bp.len() {
            if used[j] {
                continue;
            }
            let q = bp[j];
            let pair = 2 * (p.0.abs_diff(q.0) as u128).max(p.1.abs_diff(q.1) as u128);
            used[j] = true;
            let rest = proper_min_max(ap, bp, used, pos + 1);
            used[j] = false;
            best = best.min(rest.max(pair));
        }
        best
    }
    let proper_part = proper_min_max(&ap, &bp, &mut vec![false; bp.len()], 0);
    BottleneckDistance::Finite(infinity_part.max(proper_part))
}

fn check_bottleneck_against_brute_force() -> CheckResult {
    const NAME: &str = "bottleneck-oracle";
    let mut rng = ChaCha8Rng::seed_from_u64(0xB0771);
    let mut cases = 0usize;
    for _ in 0..300 {
        let a = random_diagram(&mut rng, 3);
        let b = random_diagram(&mut rng, 3);
        let got = bottleneck_distance(&a, &b);
        let expected = brute_force_bottleneck(&a, &b);
        if got != expected {
            return CheckResult::fail(
                NAME,
                format!("{:?} vs {:?}: {got:?} != brute force {expected:?}", a.points(), b.points()),
            );
        }
        cases += 1;
    }
    CheckResult::pass(NAME, format!("{cases} random pairs match brute-force matching"))
}

fn check_bottleneck_metric_axioms() -> CheckResult {
    const NAME: &str = "bottleneck-metric";
    let mut rng = ChaCha8Rng::seed_from_u64(0x7121);
    let mut cases = 0usize;
    for _ in 0..150 {
        let x = random_diagram(&mut rng, 3);
        let y = random_diagram(&mut rng, 3);
        let z = random_diagram(&mut rng, 3);
        if bottleneck_distance(&x, &x) != BottleneckDistance::zero() {
            return CheckResult::fail(NAME, format!("d(x,x) != 0 for {:?}", x.points()));
        }
        let xy = bottleneck_distance(&x, &y);
        let yx = bottleneck_distance(&y, &x);
        if xy != yx {
            return CheckResult::fail(NAME, format!("asymmetry: {xy:?} vs {yx:?}"));
        }
        let yz = bottleneck_distance(&y, &z);
        let xz = bottleneck_distance(&x, &z);
        let triangle_ok = match (xy.doubled(), yz.doubled(), xz.doubled()) {
            (Some(u), Some(v), Some(w)) => w <= u + v,
            (Some(_), Some(_), None) => false, // finite legs cannot reach an infinite span
            _ => true,
        };
        if !triangle_ok {
            return CheckResult::fail(
                NAME,
                format!("triangle inequality fails: d(x,z)={xz:?} > {xy:?} + {yz:?}"),
            );
        }
        cases += 1;
    }
    CheckResult::pass(NAME, format!("{cases} triples satisfy the metric axioms"))
}

// ---------------------------------------------------------------------------
// Pipeline checks
// ---------------------------------------------------------------------------

const CHECK_SCENARIO: &str = r#"
seed = 99
desired_outputs = [1, 2, 3]

[network]
m = 3
cycle_lengths = [3, 4, 3]

[[subprograms]]
capacities = [2, 2, 2]
ell = 1
iterations = 2
capacity_mode = "ignore"
initial = { uniform = { lo = 1, hi = 3 } }

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

fn check_report_determinism() -> CheckResult {
    const NAME: &str = "report-determinism";
    let scenario = match parse_scenario(CHECK_SCENARIO) {
        Ok(s) => s,
        Err(e) => return CheckResult::fail(NAME, format!("built-in scenario failed to parse: {e}")),
    };
    let first = match run_instance(&scenario, None) {
        Ok(o) => o,
        Err(e) => return CheckResult::fail(NAME, format!("run failed: {e}")),
    };
    let second = run_instance(&scenario, None).expect("second run of a valid scenario");
    let ta = report_to_toml(&first.report).expect("serialise");
    let tb = report_to_toml(&second.report).expect("serialise");
    if ta != tb {
        return CheckResult::fail(NAME, "two runs with the same seed produced different reports");
    }
    match rederive_diagram(&first.report) {
        Ok(d) if d == first.diagram => {}
        Ok(_) => return CheckResult::fail(NAME, "rederived diagram differs from the run's own"),
        Err(e) => return CheckResult::fail(NAME, format!("rederivation failed: {e}")),
    }
    CheckResult::pass(NAME, "same seed, same bytes; report rederivation agrees")
}
