//! Error persistence diagrams.
//!
//! A deficit detected at subprogram `i` is *born* at degree `i`; a later
//! surplus at subprogram `k` that matches it *kills* it at degree `k`. The
//! resulting multiset of `(birth, death)` pairs — with unfixable deficits
//! dying at infinity — is an error persistence diagram. The pairing is the
//! greedy interval assignment of [`generate_p_intervals`]; diagrams are
//! compared with the bottleneck distance, computed exactly over integer and
//! half-integer costs.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Death coordinate of a diagram point. Serialises as the plain integer or
/// the string `"inf"`, matching the text-format sentinel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Death {
    Finite(i64),
    Infinite,
}

impl Serialize for Death {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            Death::Finite(d) => serializer.serialize_i64(*d),
            Death::Infinite => serializer.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Death {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct DeathVisitor;
        impl serde::de::Visitor<'_> for DeathVisitor {
            type Value = Death;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("an integer death degree or the string \"inf\"")
            }

            fn visit_i64<E: serde::de::Error>(self, v: i64) -> Result<Death, E> {
                Ok(Death::Finite(v))
            }

            fn visit_u64<E: serde::de::Error>(self, v: u64) -> Result<Death, E> {
                i64::try_from(v)
                    .map(Death::Finite)
                    .map_err(|_| E::custom(format!("death degree {v} out of range")))
            }

            fn visit_str<E: serde::de::Error>(self, v: &str) -> Result<Death, E> {
                if v == "inf" {
                    Ok(Death::Infinite)
                } else {
                    Err(E::custom(format!("expected \"inf\", found {v:?}")))
                }
            }
        }
        deserializer.deserialize_any(DeathVisitor)
    }
}

impl fmt::Display for Death {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Death::Finite(d) => write!(f, "{d}"),
            Death::Infinite => f.write_str("inf"),
        }
    }
}

/// One diagram point class: a `(birth, death)` pair with multiplicity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DiagramPoint {
    pub birth: i64,
    pub death: Death,
    pub multiplicity: u64,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DiagramError {
    #[error("point ({birth}, {death}) dies no later than it is born")]
    DeathNotAfterBirth { birth: i64, death: i64 },
    #[error("diagram text line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

/// A multiset of persistence points, stored canonically: sorted by
/// `(birth, death)`, duplicates aggregated, zero multiplicities dropped.
/// Proper points always satisfy `birth < death`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct ErrorDiagram {
    points: Vec<DiagramPoint>,
}

/// Header line identifying the text form of a diagram.
pub const DIAGRAM_TEXT_HEADER: &str = "# error persistence diagram v1";

impl ErrorDiagram {
    /// Build a diagram from raw points: duplicates are merged, zero
    /// multiplicities dropped, proper points validated.
    pub fn from_points<I>(points: I) -> Result<ErrorDiagram, DiagramError>
    where
        I: IntoIterator<Item = DiagramPoint>,
    {
        let mut classes: BTreeMap<(i64, Death), u64> = BTreeMap::new();
        for p in points {
            if let Death::Finite(d) = p.death {
                if d <= p.birth {
                    return Err(DiagramError::DeathNotAfterBirth { birth: p.birth, death: d });
                }
            }
            if p.multiplicity == 0 {
                continue;
            }
            *classes.entry((p.birth, p.death)).or_insert(0) += p.multiplicity;
        }
        let points = classes
            .into_iter()
            .map(|((birth, death), multiplicity)| DiagramPoint { birth, death, multiplicity })
            .collect();
        Ok(ErrorDiagram { points })
    }

    pub fn empty() -> ErrorDiagram {
        ErrorDiagram::default()
    }

    /// Point classes in canonical order.
    pub fn points(&self) -> &[DiagramPoint] {
        &self.points
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Total multiplicity of proper (finite-death) points.
    pub fn proper_mass(&self) -> u64 {
        self.points
            .iter()
            .filter(|p| matches!(p.death, Death::Finite(_)))
            .map(|p| p.multiplicity)
            .sum()
    }

    /// Total multiplicity at infinity.
    pub fn infinity_mass(&self) -> u64 {
        self.points
            .iter()
            .filter(|p| p.death == Death::Infinite)
            .map(|p| p.multiplicity)
            .sum()
    }

    /// Line-based text form:
    ///
    /// ```text
    /// # error persistence diagram v1
    /// # birth death multiplicity
    /// 2 inf 2
    /// ```
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(DIAGRAM_TEXT_HEADER);
        out.push('\n');
        out.push_str("# birth death multiplicity\n");
        for p in &self.points {
            out.push_str(&format!("{} {} {}\n", p.birth, p.death, p.multiplicity));
        }
        out
    }

    /// Parse the text form. The header line is required; `#` lines and blank
    /// lines are ignored; `inf` marks death at infinity.
    pub fn from_text(text: &str) -> Result<ErrorDiagram, DiagramError> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, first)) if first.trim() == DIAGRAM_TEXT_HEADER => {}
            Some((_, first)) => {
                return Err(DiagramError::Parse {
                    line: 1,
                    msg: format!("expected header `{DIAGRAM_TEXT_HEADER}`, found `{}`", first.trim()),
                })
            }
            None => return Err(DiagramError::Parse { line: 1, msg: "empty input".into() }),
        }
        let mut points = Vec::new();
        for (idx, raw) in lines {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 3 {
                return Err(DiagramError::Parse {
                    line: idx + 1,
                    msg: format!("expected `birth death multiplicity`, found `{line}`"),
                });
            }
            let birth: i64 = fields[0].parse().map_err(|_| DiagramError::Parse {
                line: idx + 1,
                msg: format!("birth `{}` is not an integer", fields[0]),
            })?;
            let death = if fields[1] == "inf" {
                Death::Infinite
            } else {
                Death::Finite(fields[1].parse().map_err(|_| DiagramError::Parse {
                    line: idx + 1,
                    msg: format!("death `{}` is neither an integer nor `inf`", fields[1]),
                })?)
            };
            let multiplicity: u64 = fields[2].parse().map_err(|_| DiagramError::Parse {
                line: idx + 1,
                msg: format!("multiplicity `{}` is not a non-negative integer", fields[2]),
            })?;
            points.push(DiagramPoint { birth, death, multiplicity });
        }
        ErrorDiagram::from_points(points)
    }

    /// CSV export with an `inf` sentinel in the death column.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("birth,death,multiplicity\n");
        for p in &self.points {
            out.push_str(&format!("{},{},{}\n", p.birth, p.death, p.multiplicity));
        }
        out
    }
}

// ---------------------------------------------------------------------------
// Interval generation
// ---------------------------------------------------------------------------

/// One nontrivial margin event: a subprogram index together with the
/// mapping-cone kernel dimension detected there.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorEvent {
    pub index: usize,
    pub magnitude: u64,
}

/// How error magnitudes and fix magnitudes must relate for a pairing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum MagnitudeRule {
    /// A fix is usable only with exactly the error's magnitude, and is fully
    /// consumed by it.
    #[default]
    Exact,
    /// A fix is usable while its remaining magnitude covers the error, and is
    /// consumed incrementally.
    Partial,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchPolicy {
    pub magnitude_rule: MagnitudeRule,
    /// Restrict fixes to strictly later subprograms (`k > i`). Turning this
    /// off reproduces the source algorithm literally, which may then attempt
    /// a non-causal pairing; see [`MatchError::NonCausalMatch`].
    pub require_subsequent: bool,
}

impl Default for MatchPolicy {
    fn default() -> Self {
        MatchPolicy { magnitude_rule: MagnitudeRule::Exact, require_subsequent: true }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MatchError {
    #[error("{which} events must be sorted by strictly increasing index (offender: index {index})")]
    UnsortedEvents { which: &'static str, index: usize },
    #[error("{which} event at index {index} has zero magnitude")]
    ZeroMagnitude { which: &'static str, index: usize },
    #[error(
        "greedy assignment pairs the error at {error_index} with the earlier fix at {fix_index}; \
         such a pairing cannot be recorded as a persistence interval \
         (enable require_subsequent to filter it out)"
    )]
    NonCausalMatch { error_index: usize, fix_index: usize },
}

fn check_events(which: &'static str, events: &[ErrorEvent]) -> Result<(), MatchError> {
    let mut prev: Option<usize> = None;
    for e in events {
        if e.magnitude == 0 {
            return Err(MatchError::ZeroMagnitude { which, index: e.index });
        }
        if prev.is_some_and(|p| p >= e.index) {
            return Err(MatchError::UnsortedEvents { which, index: e.index });
        }
        prev = Some(e.index);
    }
    Ok(())
}

/// Pair error events with fix events into a persistence diagram.
///
/// Errors are visited in increasing index order. Each one is assigned the
/// least-index fix not yet consumed whose magnitude is usable under the
/// policy's [`MagnitudeRule`] (and which lies strictly later, unless
/// `require_subsequent` is off). A matched pair contributes the proper point
/// `(i, k)` with the error's magnitude; an unmatched error contributes
/// `(i, ∞)` with its full magnitude. Fixes left over at the end are dropped.
pub fn generate_p_intervals(
    errors: &[ErrorEvent],
    fixes: &[ErrorEvent],
    policy: &MatchPolicy,
) -> Result<ErrorDiagram, MatchError> {
    check_events("error", errors)?;
    check_events("fix", fixes)?;

    let mut remaining: Vec<u64> = fixes.iter().map(|f| f.magnitude).collect();
    let mut points = Vec::new();
    for e in errors {
        let mut assigned: Option<usize> = None;
        for (j, f) in fixes.iter().enumerate() {
            if policy.require_subsequent && f.index <= e.index {
                continue;
            }
            let usable = match policy.magnitude_rule {
                MagnitudeRule::Exact => remaining[j] == f.magnitude && f.magnitude == e.magnitude,
                MagnitudeRule::Partial => remaining[j] >= e.magnitude,
            };
            if usable {
                assigned = Some(j);
                break;
            }
        }
        match assigned {
            Some(j) => {
                let f = &fixes[j];
                if f.index <= e.index {
                    return Err(MatchError::NonCausalMatch {
                        error_index: e.index,
                        fix_index: f.index,
                    });
                }
                remaining[j] -= e.magnitude;
                points.push(DiagramPoint {
                    birth: e.index as i64,
                    death: Death::Finite(f.index as i64),
                    multiplicity: e.magnitude,
                });
            }
            None => points.push(DiagramPoint {
                birth: e.index as i64,
                death: Death::Infinite,
                multiplicity: e.magnitude,
            }),
        }
    }
    Ok(ErrorDiagram::from_points(points).expect("pairings are causal by construction"))
}

// ---------------------------------------------------------------------------
// Persistent error dimension
// ---------------------------------------------------------------------------

/// Total multiplicity of proper points born by degree `i` and dead by degree
/// `j`: the dimension of the persistent error space across `[i, j]`.
/// Monotone in both arguments; points at infinity never count.
pub fn persistent_error_dim(diagram: &ErrorDiagram, i: i64, j: i64) -> u64 {
    diagram
        .points()
        .iter()
        .filter(|p| match p.death {
            Death::Finite(d) => p.birth <= i && d <= j,
            Death::Infinite => false,
        })
        .map(|p| p.multiplicity)
        .sum()
}

// ---------------------------------------------------------------------------
// Statistics
// ---------------------------------------------------------------------------

/// Per-point and aggregate summary of a diagram, split by a caller-chosen
/// noise threshold (proper persistence `<=` threshold counts as noise).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiagramStatistics {
    pub threshold: u64,
    pub proper_classes: u64,
    pub proper_mass: u64,
    pub infinity_classes: u64,
    pub infinity_mass: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_persistence: Option<u64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub noise: Vec<DiagramPoint>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub significant: Vec<DiagramPoint>,
}

/// Summarise a diagram. Points at infinity are always significant; proper
/// points are noise exactly when `death - birth <= threshold`.
pub fn diagram_statistics(diagram: &ErrorDiagram, threshold: u64) -> DiagramStatistics {
    let mut stats = DiagramStatistics {
        threshold,
        proper_classes: 0,
        proper_mass: 0,
        infinity_classes: 0,
        infinity_mass: 0,
        max_persistence: None,
        noise: Vec::new(),
        significant: Vec::new(),
    };
    for p in diagram.points() {
        match p.death {
            Death::Finite(d) => {
                stats.proper_classes += 1;
                stats.proper_mass += p.multiplicity;
                let persistence = (d - p.birth) as u64;
                stats.max_persistence = Some(stats.max_persistence.map_or(persistence, |m| m.max(persistence)));
                if persistence <= threshold {
                    stats.noise.push(*p);
                } else {
                    stats.significant.push(*p);
                }
            }
            Death::Infinite => {
                stats.infinity_classes += 1;
                stats.infinity_mass += p.multiplicity;
                stats.significant.push(*p);
            }
        }
    }
    stats
}

// ---------------------------------------------------------------------------
// Bottleneck distance
// ---------------------------------------------------------------------------

/// Extended nonnegative distance between diagrams. Finite values are stored
/// doubled (in half-units), so integer and half-integer costs stay exact.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum BottleneckDistance {
    Finite(u128),
    Infinite,
}

impl BottleneckDistance {
    pub fn zero() -> BottleneckDistance {
        BottleneckDistance::Finite(0)
    }

    /// The doubled (half-unit) value, or `None` at infinity.
    pub fn doubled(&self) -> Option<u128> {
        match self {
            BottleneckDistance::Finite(h) => Some(*h),
            BottleneckDistance::Infinite => None,
        }
    }

    pub fn as_f64(&self) -> f64 {
        match self {
            BottleneckDistance::Finite(h) => *h as f64 / 2.0,
            BottleneckDistance::Infinite => f64::INFINITY,
        }
    }

    pub fn is_finite(&self) -> bool {
        matches!(self, BottleneckDistance::Finite(_))
    }
}

impl fmt::Display for BottleneckDistance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BottleneckDistance::Finite(h) if h % 2 == 0 => write!(f, "{}", h / 2),
            BottleneckDistance::Finite(h) => write!(f, "{}.5", h / 2),
            BottleneckDistance::Infinite => f.write_str("inf"),
        }
    }
}

/// Expand a diagram into unit-multiplicity points: proper `(birth, death)`
/// pairs and births of points at infinity.
fn expand(diagram: &ErrorDiagram) -> (Vec<(i64, i64)>, Vec<i64>) {
    let mut proper = Vec::new();
    let mut infinite = Vec::new();
    for p in diagram.points() {
        for _ in 0..p.multiplicity {
            match p.death {
                Death::Finite(d) => proper.push((p.birth, d)),
                Death::Infinite => infinite.push(p.birth),
            }
        }
    }
    (proper, infinite)
}

/// Doubled L-infinity cost between two proper points.
fn cost2(p: (i64, i64), q: (i64, i64)) -> u128 {
    let db = p.0.abs_diff(q.0) as u128;
    let dd = p.1.abs_diff(q.1) as u128;
    2 * db.max(dd)
}

/// Doubled cost of sending a proper point to the diagonal:
/// `2 * (death - birth) / 2 = death - birth`.
fn diag2(p: (i64, i64)) -> u128 {
    p.0.abs_diff(p.1) as u128
}

/// Hopcroft–Karp maximum bipartite matching. `adj[u]` lists the right-side
/// neighbours of left vertex `u`; returns the matching size.
fn hopcroft_karp(n_left: usize, n_right: usize, adj: &[Vec<usize>]) -> usize {
    const NIL: usize = usize::MAX;
    let mut match_left = vec![NIL; n_left];
    let mut match_right = vec![NIL; n_right];
    let mut dist = vec![0u32; n_left];
    let mut size = 0usize;

    loop {
        // BFS from every free left vertex to layer the graph.
        let mut queue: Vec<usize> = Vec::new();
        for u in 0..n_left {
            if match_left[u] == NIL {
                dist[u] = 0;
                queue.push(u);
            } else {
                dist[u] = u32::MAX;
            }
        }
        let mut found_augmenting = false;
        let mut head = 0;
        while head < queue.len() {
            let u = queue[head];
            head += 1;
            for &v in &adj[u] {
                match match_right[v] {
                    NIL => found_augmenting = true,
                    w => {
                        if dist[w] == u32::MAX {
                            dist[w] = dist[u] + 1;
                            queue.push(w);
                        }
                    }
                }
            }
        }
        if !found_augmenting {
            break;
        }

        fn try_augment(
            u: usize,
            adj: &[Vec<usize>],
            dist: &mut [u32],
            match_left: &mut [usize],
            match_right: &mut [usize],
        ) -> bool {
            for &v in &adj[u] {
                let w = match_right[v];
                let reachable = w == NIL
                    || (dist[w] == dist[u] + 1
                        && try_augment(w, adj, dist, match_left, match_right));
                if reachable {
                    match_left[u] = v;
                    match_right[v] = u;
                    return true;
                }
            }
            dist[u] = u32::MAX;
            false
        }

        for u in 0..n_left {
            if match_left[u] == NIL
                && try_augment(u, adj, &mut dist, &mut match_left, &mut match_right)
            {
                size += 1;
            }
        }
    }
    size
}

/// Can every point of both diagrams be matched (to an opposite point or to
/// the diagonal) at doubled cost at most `t`?
fn feasible(a: &[(i64, i64)], b: &[(i64, i64)], t: u128) -> bool {
    let (n1, n2) = (a.len(), b.len());
    // Left: n1 real points of `a`, then n2 diagonal proxies (one per b-point).
    // Right: n2 real points of `b`, then n1 diagonal proxies (one per a-point).
    let n_left = n1 + n2;
    let n_right = n2 + n1;
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n_left];
    for (i, &p) in a.iter().enumerate() {
        for (j, &q) in b.iter().enumerate() {
            if cost2(p, q) <= t {
                adj[i].push(j);
            }
        }
        if diag2(p) <= t {
            adj[i].push(n2 + i); // a-point i retires to its own diagonal proxy
        }
    }
    for (j, &q) in b.iter().enumerate() {
        if diag2(q) <= t {
            adj[n1 + j].push(j); // b-point j's diagonal proxy absorbs it
        }
        // Diagonal proxies pair with each other freely.
        for i in 0..n1 {
            adj[n1 + j].push(n2 + i);
        }
    }
    hopcroft_karp(n_left, n_right, &adj) == n_left
}

/// Exact bottleneck distance between two diagrams.
///
/// Proper points may be matched to each other (L-infinity cost) or retired to
/// the diagonal (half their persistence). Points at infinity only match
/// points at infinity, at the absolute birth difference; if the total
/// multiplicity at infinity differs, the distance is infinite. The finite
/// part is found by a threshold search over the candidate costs, with
/// Hopcroft–Karp matching deciding feasibility.
pub fn bottleneck_distance(a: &ErrorDiagram, b: &ErrorDiagram) -> BottleneckDistance {
    let (ap, mut ai) = expand(a);
    let (bp, mut bi) = expand(b);

    if ai.len() != bi.len() {
        return BottleneckDistance::Infinite;
    }
    // Sorted pairing minimises the maximal birth difference on a line.
    ai.sort_unstable();
    bi.sort_unstable();
    let infinity_part: u128 = ai
        .iter()
        .zip(&bi)
        .map(|(x, y)| 2 * x.abs_diff(*y) as u128)
        .max()
        .unwrap_or(0);

    let mut candidates: Vec<u128> = vec![0];
    for &p in &ap {
        candidates.push(diag2(p));
        for &q in &bp {
            candidates.push(cost2(p, q));
        }
    }
    for &q in &bp {
        candidates.push(diag2(q));
    }
    candidates.sort_unstable();
    candidates.dedup();

    // Feasibility is monotone in t: binary search the least feasible candidate.
    let mut lo = 0usize;
    let mut hi = candidates.len() - 1;
    debug_assert!(feasible(&ap, &bp, candidates[hi]), "max candidate always feasible");
    while lo < hi {
        let mid = (lo + hi) / 2;
        if feasible(&ap, &bp, candidates[mid]) {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    BottleneckDistance::Finite(candidates[lo].max(infinity_part))
}
