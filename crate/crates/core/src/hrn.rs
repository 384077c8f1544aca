//! Hierarchical recurrent networks (HRNs).
//!
//! An HRN is a directed spine path on `2m+1` vertices `v1..v(2m+1)` carrying the
//! edges `v(2i) -> v(2i-1)` and `v(2i) -> v(2i+1)` for `1 <= i <= m`, together with
//! `m` directed cycles. Cycle `i` has `k_i >= 3` vertices and is glued onto the
//! spine by identifying one of its edges with the spine edge `v(2i) -> v(2i-1)`,
//! orientations matching. The `k_i - 2` remaining cycle vertices are fresh
//! auxiliary vertices shared with no other cycle.
//!
//! Each glued cycle is a *subprogram*: the unit that carries a data flow. Its
//! vertex list is stored in traversal order starting at the head `v(2i-1)` of the
//! identified edge, so that following the list crosses every non-identified cycle
//! edge once and the identified edge closes the loop back to the start. The first
//! vertex is where a data flow is initialised and the last (the tail `v(2i)`) is
//! where the final dimension is read off.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Identifier of a vertex inside one HRN. Spine vertices are numbered `1..=2m+1`
/// in path order; auxiliary vertices continue from `2m+2` in cycle order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct VertexId(pub u32);

impl fmt::Display for VertexId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Construction errors for [`build`].
#[derive(Debug, Error, PartialEq, Eq)]
pub enum HrnError {
    /// The cycle-length list was empty (`m = 0` builds no network).
    #[error("an HRN needs at least one cycle (empty cycle-length list)")]
    NoCycles,
    /// A directed cycle needs at least 3 vertices to glue onto a spine edge
    /// without collapsing.
    #[error("cycle {index} has length {len}, but every cycle needs at least 3 vertices")]
    CycleTooShort { index: usize, len: usize },
    /// A graph import did not match the structure its own header promised.
    #[error("graph import is inconsistent: {0}")]
    InconsistentImport(String),
    /// A graph import could not be parsed at all.
    #[error("graph import line {line}: {msg}")]
    MalformedImport { line: usize, msg: String },
}

/// One glued cycle together with its bookkeeping.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Subprogram {
    /// 1-based cycle index `i` (position along the spine).
    pub index: usize,
    /// Cycle length `k_i`.
    pub vertex_count: usize,
    /// Vertices in traversal order, starting at the head `v(2i-1)` of the
    /// identified edge and ending at its tail `v(2i)`. Following this order and
    /// then the identified edge walks every cycle edge exactly once.
    pub vertices: Vec<VertexId>,
    /// The spine edge this cycle was glued along, stored as `(tail, head)`,
    /// i.e. `(v(2i), v(2i-1))`.
    pub identified_edge: (VertexId, VertexId),
}

impl Subprogram {
    /// The cycle's edges in traversal order, identified edge last.
    pub fn cycle_edges(&self) -> Vec<(VertexId, VertexId)> {
        let mut edges: Vec<(VertexId, VertexId)> = self
            .vertices
            .windows(2)
            .map(|w| (w[0], w[1]))
            .collect();
        edges.push((*self.vertices.last().unwrap(), self.vertices[0]));
        edges
    }
}

/// A hierarchical recurrent network. Immutable after construction; use
/// [`validate`] to audit instances assembled by hand or imported from text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hrn {
    m: usize,
    spine: Vec<VertexId>,
    subprograms: Vec<Subprogram>,
    edges: BTreeSet<(VertexId, VertexId)>,
}

impl Hrn {
    /// Number of cycles / subprograms.
    pub fn cycle_count(&self) -> usize {
        self.m
    }

    /// Spine vertices `v1..v(2m+1)` in path order.
    pub fn spine(&self) -> &[VertexId] {
        &self.spine
    }

    /// All vertices, spine first, then auxiliaries in cycle order.
    pub fn vertices(&self) -> Vec<VertexId> {
        let mut out = self.spine.clone();
        for sub in &self.subprograms {
            for &v in &sub.vertices {
                if !self.is_spine(v) {
                    out.push(v);
                }
            }
        }
        out
    }

    /// Directed edge set, ordered by `(from, to)`.
    pub fn edges(&self) -> &BTreeSet<(VertexId, VertexId)> {
        &self.edges
    }

    pub fn vertex_count(&self) -> usize {
        self.spine.len()
            + self
                .subprograms
                .iter()
                .map(|s| s.vertex_count.saturating_sub(2))
                .sum::<usize>()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// The `i`-th subprogram (1-based). Returns `None` when out of range.
    pub fn subprogram(&self, i: usize) -> Option<&Subprogram> {
        if i == 0 {
            return None;
        }
        self.subprograms.get(i - 1)
    }

    pub fn subprograms(&self) -> &[Subprogram] {
        &self.subprograms
    }

    pub fn cycle_lengths(&self) -> Vec<usize> {
        self.subprograms.iter().map(|s| s.vertex_count).collect()
    }

    fn is_spine(&self, v: VertexId) -> bool {
        (v.0 as usize) >= 1 && (v.0 as usize) <= self.spine.len()
    }

    /// Human-readable vertex label: `v<n>` for spine vertices, `w<n>` for
    /// auxiliaries (numbered from 1 in cycle order).
    pub fn vertex_label(&self, v: VertexId) -> String {
        let n = v.0 as usize;
        if n <= self.spine.len() {
            format!("v{n}")
        } else {
            format!("w{}", n - self.spine.len())
        }
    }

    /// Assemble an HRN from raw parts without any validation. Intended for
    /// tests and import paths; pair with [`validate`] before trusting the
    /// result.
    pub fn from_parts(
        m: usize,
        spine: Vec<VertexId>,
        subprograms: Vec<Subprogram>,
        edges: BTreeSet<(VertexId, VertexId)>,
    ) -> Hrn {
        Hrn { m, spine, subprograms, edges }
    }
}

/// Build the HRN with `cycle_lengths.len()` cycles of the given lengths.
///
/// Vertex ids are deterministic: spine `1..=2m+1`, then each cycle's auxiliary
/// vertices consecutively in traversal order. Two calls with equal input yield
/// structurally equal (`==`) networks.
pub fn build(cycle_lengths: &[usize]) -> Result<Hrn, HrnError> {
    if cycle_lengths.is_empty() {
        return Err(HrnError::NoCycles);
    }
    for (i, &k) in cycle_lengths.iter().enumerate() {
        if k < 3 {
            return Err(HrnError::CycleTooShort { index: i + 1, len: k });
        }
    }
    let m = cycle_lengths.len();
    let spine: Vec<VertexId> = (1..=(2 * m + 1) as u32).map(VertexId).collect();

    let mut edges = BTreeSet::new();
    for i in 1..=m {
        // Spine edges out of the even vertex v(2i).
        edges.insert((spine[2 * i - 1], spine[2 * i - 2]));
        edges.insert((spine[2 * i - 1], spine[2 * i]));
    }

    let mut next_id = (2 * m + 2) as u32;
    let mut subprograms = Vec::with_capacity(m);
    for (idx, &k) in cycle_lengths.iter().enumerate() {
        let i = idx + 1;
        let head = spine[2 * i - 2]; // v(2i-1)
        let tail = spine[2 * i - 1]; // v(2i)
        let mut vertices = Vec::with_capacity(k);
        vertices.push(head);
        for _ in 0..(k - 2) {
            vertices.push(VertexId(next_id));
            next_id += 1;
        }
        vertices.push(tail);
        for w in vertices.windows(2) {
            edges.insert((w[0], w[1]));
        }
        // The closing edge tail -> head is the identified spine edge, already
        // inserted above.
        subprograms.push(Subprogram {
            index: i,
            vertex_count: k,
            vertices,
            identified_edge: (tail, head),
        });
    }

    Ok(Hrn { m, spine, subprograms, edges })
}

/// One structural defect found by [`validate`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    SpineLengthWrong { expected: usize, found: usize },
    MissingSpineEdge { from: String, to: String },
    CycleTooShort { cycle: usize, len: usize },
    OrientationInconsistent { cycle: usize, from: String, to: String },
    IdentifiedEdgeWrong { cycle: usize, expected: (String, String) },
    SharedAuxiliaryVertex { vertex: String, cycles: (usize, usize) },
    UnaccountedEdge { from: String, to: String },
    VertexNotOnItsCycle { cycle: usize, vertex: String },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::SpineLengthWrong { expected, found } => {
                write!(f, "spine has {found} vertices, expected {expected}")
            }
            Violation::MissingSpineEdge { from, to } => {
                write!(f, "missing spine edge {from} -> {to}")
            }
            Violation::CycleTooShort { cycle, len } => {
                write!(f, "cycle {cycle} has length {len}, minimum is 3")
            }
            Violation::OrientationInconsistent { cycle, from, to } => {
                write!(f, "orientation inconsistent on cycle {cycle}: edge {from} -> {to} is absent")
            }
            Violation::IdentifiedEdgeWrong { cycle, expected } => {
                write!(
                    f,
                    "cycle {cycle} is not glued along the spine edge {} -> {}",
                    expected.0, expected.1
                )
            }
            Violation::SharedAuxiliaryVertex { vertex, cycles } => {
                write!(
                    f,
                    "auxiliary vertex {vertex} is shared by cycles {} and {}",
                    cycles.0, cycles.1
                )
            }
            Violation::UnaccountedEdge { from, to } => {
                write!(f, "edge {from} -> {to} belongs to no spine position and no cycle")
            }
            Violation::VertexNotOnItsCycle { cycle, vertex } => {
                write!(f, "cycle {cycle} lists vertex {vertex} outside its spine pair and auxiliaries")
            }
        }
    }
}

/// Result of auditing an [`Hrn`]. Empty `violations` means every structural
/// invariant holds.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Audit all structural invariants of an HRN: spine shape, per-cycle length,
/// orientation of all stored edges, gluing along the right spine edge,
/// auxiliary-vertex disjointness, and absence of stray edges.
pub fn validate(h: &Hrn) -> ValidationReport {
    let mut violations = Vec::new();
    let m = h.m;

    if h.spine.len() != 2 * m + 1 {
        violations.push(Violation::SpineLengthWrong {
            expected: 2 * m + 1,
            found: h.spine.len(),
        });
    }

    // Collect every edge the structure accounts for, to flag strays later.
    let mut accounted: BTreeSet<(VertexId, VertexId)> = BTreeSet::new();

    for i in 1..=m {
        let (Some(&head), Some(&even), Some(&next)) = (
            h.spine.get(2 * i - 2),
            h.spine.get(2 * i - 1),
            h.spine.get(2 * i),
        ) else {
            continue; // spine too short; already reported
        };
        for (from, to) in [(even, head), (even, next)] {
            if h.edges.contains(&(from, to)) {
                accounted.insert((from, to));
            } else {
                violations.push(Violation::MissingSpineEdge {
                    from: h.vertex_label(from),
                    to: h.vertex_label(to),
                });
            }
        }
    }

    let mut aux_owner: BTreeMap<VertexId, usize> = BTreeMap::new();
    for sub in &h.subprograms {
        let i = sub.index;
        if sub.vertex_count < 3 || sub.vertices.len() != sub.vertex_count {
            violations.push(Violation::CycleTooShort {
                cycle: i,
                len: sub.vertices.len(),
            });
            continue;
        }
        let expected_tail = h.spine.get(2 * i - 1).copied();
        let expected_head = h.spine.get(2 * i - 2).copied();
        if expected_tail != Some(sub.identified_edge.0)
            || expected_head != Some(sub.identified_edge.1)
            || sub.vertices.first() != Some(&sub.identified_edge.1)
            || sub.vertices.last() != Some(&sub.identified_edge.0)
        {
            violations.push(Violation::IdentifiedEdgeWrong {
                cycle: i,
                expected: (
                    expected_tail.map_or("?".into(), |v| h.vertex_label(v)),
                    expected_head.map_or("?".into(), |v| h.vertex_label(v)),
                ),
            });
        }
        // Every consecutive pair, plus the closing identified edge, must be a
        // stored directed edge; a reversed edge shows up here.
        for (from, to) in sub.cycle_edges() {
            if h.edges.contains(&(from, to)) {
                accounted.insert((from, to));
            } else {
                violations.push(Violation::OrientationInconsistent {
                    cycle: i,
                    from: h.vertex_label(from),
                    to: h.vertex_label(to),
                });
            }
        }
        // Interior vertices must be auxiliaries owned by exactly this cycle.
        for &v in &sub.vertices[1..sub.vertices.len().saturating_sub(1)] {
            if h.is_spine(v) {
                violations.push(Violation::VertexNotOnItsCycle {
                    cycle: i,
                    vertex: h.vertex_label(v),
                });
            } else if let Some(&other) = aux_owner.get(&v) {
                violations.push(Violation::SharedAuxiliaryVertex {
                    vertex: h.vertex_label(v),
                    cycles: (other, i),
                });
            } else {
                aux_owner.insert(v, i);
            }
        }
    }

    for &(from, to) in &h.edges {
        if !accounted.contains(&(from, to)) {
            violations.push(Violation::UnaccountedEdge {
                from: h.vertex_label(from),
                to: h.vertex_label(to),
            });
        }
    }

    ValidationReport { violations }
}

// ---------------------------------------------------------------------------
// Graph export / import
// ---------------------------------------------------------------------------

/// Role of a vertex in the export record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VertexRole {
    /// Spine vertex; the payload is the cycle containing it, if any
    /// (`v(2i-1)`, `v(2i)` belong to cycle `i`; the last odd vertex to none).
    Spine(Option<usize>),
    /// Auxiliary vertex of the given cycle.
    Cycle(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VertexRecord {
    pub id: VertexId,
    pub label: String,
    pub role: VertexRole,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeRecord {
    pub from: VertexId,
    pub to: VertexId,
    /// True for the 2m spine edges (including identified ones).
    pub spine: bool,
    /// Cycle this edge lies on, if any.
    pub cycle: Option<usize>,
}

/// Flat, order-stable description of an HRN: vertex list, directed edge list
/// and subprogram tags. Serialises to a line-based text record (see
/// [`GraphExport::to_text`]) that the CLI `render` command also accepts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphExport {
    pub m: usize,
    pub cycle_lengths: Vec<usize>,
    pub vertices: Vec<VertexRecord>,
    pub edges: Vec<EdgeRecord>,
    pub subprograms: Vec<Subprogram>,
}

/// Header line that identifies the text form of [`GraphExport`].
pub const GRAPH_TEXT_HEADER: &str = "# hrn graph v1";

/// Export the network as a flat record. Deterministic: vertices spine-first,
/// edges sorted by `(from, to)`.
pub fn export_graph(h: &Hrn) -> GraphExport {
    let mut vertices = Vec::new();
    for (pos, &v) in h.spine.iter().enumerate() {
        let n = pos + 1; // v<n>
        let cycle = if n == 2 * h.m + 1 { None } else { Some(n.div_ceil(2)) };
        vertices.push(VertexRecord {
            id: v,
            label: h.vertex_label(v),
            role: VertexRole::Spine(cycle),
        });
    }
    for sub in &h.subprograms {
        for &v in &sub.vertices {
            if !h.is_spine(v) {
                vertices.push(VertexRecord {
                    id: v,
                    label: h.vertex_label(v),
                    role: VertexRole::Cycle(sub.index),
                });
            }
        }
    }

    let mut edge_tag: BTreeMap<(VertexId, VertexId), (bool, Option<usize>)> = BTreeMap::new();
    for i in 1..=h.m {
        let head = h.spine[2 * i - 2];
        let even = h.spine[2 * i - 1];
        let next = h.spine[2 * i];
        edge_tag.insert((even, head), (true, Some(i)));
        edge_tag.insert((even, next), (true, None));
    }
    for sub in &h.subprograms {
        for (from, to) in sub.cycle_edges() {
            let entry = edge_tag.entry((from, to)).or_insert((false, None));
            entry.1 = Some(sub.index);
        }
    }
    let edges = h
        .edges
        .iter()
        .map(|&(from, to)| {
            let (spine, cycle) = edge_tag.get(&(from, to)).copied().unwrap_or((false, None));
            EdgeRecord { from, to, spine, cycle }
        })
        .collect();

    GraphExport {
        m: h.m,
        cycle_lengths: h.cycle_lengths(),
        vertices,
        edges,
        subprograms: h.subprograms.clone(),
    }
}

impl GraphExport {
    /// Line-based text form:
    ///
    /// ```text
    /// # hrn graph v1
    /// m 3
    /// cycle-lengths 3 4 3
    /// vertex <id> <label> spine|cycle=<i>
    /// edge <from> <to> spine|cycle=<i>|spine+cycle=<i>
    /// subprogram <i> k=<k> vertices <id...> identified <tail> <head>
    /// ```
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(GRAPH_TEXT_HEADER);
        out.push('\n');
        out.push_str(&format!("m {}\n", self.m));
        out.push_str("cycle-lengths");
        for k in &self.cycle_lengths {
            out.push_str(&format!(" {k}"));
        }
        out.push('\n');
        for v in &self.vertices {
            let role = match v.role {
                VertexRole::Spine(Some(i)) => format!("spine cycle={i}"),
                VertexRole::Spine(None) => "spine".to_string(),
                VertexRole::Cycle(i) => format!("cycle={i}"),
            };
            out.push_str(&format!("vertex {} {} {}\n", v.id, v.label, role));
        }
        for e in &self.edges {
            let tag = match (e.spine, e.cycle) {
                (true, Some(i)) => format!("spine+cycle={i}"),
                (true, None) => "spine".to_string(),
                (false, Some(i)) => format!("cycle={i}"),
                (false, None) => "untagged".to_string(),
            };
            out.push_str(&format!("edge {} {} {}\n", e.from, e.to, tag));
        }
        for s in &self.subprograms {
            out.push_str(&format!("subprogram {} k={} vertices", s.index, s.vertex_count));
            for v in &s.vertices {
                out.push_str(&format!(" {v}"));
            }
            out.push_str(&format!(
                " identified {} {}\n",
                s.identified_edge.0, s.identified_edge.1
            ));
        }
        out
    }

    /// Parse the text form produced by [`to_text`]. Only the header and the
    /// `m`/`cycle-lengths` lines are load-bearing; the remaining lines are
    /// checked for count consistency against the rebuilt network.
    pub fn from_text(text: &str) -> Result<GraphExport, HrnError> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines
            .next()
            .ok_or(HrnError::MalformedImport { line: 1, msg: "empty input".into() })?;
        if header.trim() != GRAPH_TEXT_HEADER {
            return Err(HrnError::MalformedImport {
                line: 1,
                msg: format!("expected header `{GRAPH_TEXT_HEADER}`"),
            });
        }
        let mut m: Option<usize> = None;
        let mut cycle_lengths: Option<Vec<usize>> = None;
        let mut vertex_lines = 0usize;
        let mut edge_lines = 0usize;
        let mut subprogram_lines = 0usize;
        for (idx, raw) in lines {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.split_whitespace();
            let key = parts.next().unwrap_or_default();
            let parse = |s: &str| -> Result<usize, HrnError> {
                s.parse().map_err(|_| HrnError::MalformedImport {
                    line: idx + 1,
                    msg: format!("expected a number, found `{s}`"),
                })
            };
            match key {
                "m" => {
                    let v = parts.next().ok_or(HrnError::MalformedImport {
                        line: idx + 1,
                        msg: "missing value after `m`".into(),
                    })?;
                    m = Some(parse(v)?);
                }
                "cycle-lengths" => {
                    let mut ks = Vec::new();
                    for p in parts {
                        ks.push(parse(p)?);
                    }
                    cycle_lengths = Some(ks);
                }
                "vertex" => vertex_lines += 1,
                "edge" => edge_lines += 1,
                "subprogram" => subprogram_lines += 1,
                other => {
                    return Err(HrnError::MalformedImport {
                        line: idx + 1,
                        msg: format!("unknown record `{other}`"),
                    })
                }
            }
        }
        let m = m.ok_or(HrnError::InconsistentImport("missing `m` line".into()))?;
        let cycle_lengths =
            cycle_lengths.ok_or(HrnError::InconsistentImport("missing `cycle-lengths` line".into()))?;
        if cycle_lengths.len() != m {
            return Err(HrnError::InconsistentImport(format!(
                "m is {m} but {} cycle lengths are listed",
                cycle_lengths.len()
            )));
        }
        let rebuilt = build(&cycle_lengths)?;
        let export = export_graph(&rebuilt);
        if vertex_lines != export.vertices.len()
            || edge_lines != export.edges.len()
            || subprogram_lines != export.subprograms.len()
        {
            return Err(HrnError::InconsistentImport(format!(
                "listed {vertex_lines} vertices / {edge_lines} edges / {subprogram_lines} subprograms, \
                 but the declared shape has {} / {} / {}",
                export.vertices.len(),
                export.edges.len(),
                export.subprograms.len()
            )));
        }
        Ok(export)
    }

    /// DOT text for external visualisation.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph hrn {\n  rankdir=LR;\n");
        for v in &self.vertices {
            let shape = match v.role {
                VertexRole::Spine(_) => "circle",
                VertexRole::Cycle(_) => "ellipse",
            };
            out.push_str(&format!(
                "  {} [label=\"{}\" shape={shape}];\n",
                v.id, v.label
            ));
        }
        for e in &self.edges {
            let style = if e.spine { " [penwidth=2]" } else { "" };
            out.push_str(&format!("  {} -> {}{style};\n", e.from, e.to));
        }
        out.push_str("}\n");
        out
    }
}

/// Rebuild an [`Hrn`] from an export. The result equals the original up to
/// vertex renaming (and exactly, for exports produced by [`export_graph`],
/// since ids are deterministic).
pub fn import_graph(export: &GraphExport) -> Result<Hrn, HrnError> {
    if export.cycle_lengths.len() != export.m {
        return Err(HrnError::InconsistentImport(format!(
            "m is {} but {} cycle lengths are listed",
            export.m,
            export.cycle_lengths.len()
        )));
    }
    let h = build(&export.cycle_lengths)?;
    if export.vertices.len() != h.vertex_count() || export.edges.len() != h.edge_count() {
        return Err(HrnError::InconsistentImport(format!(
            "export lists {} vertices and {} edges, but shape {:?} builds {} and {}",
            export.vertices.len(),
            export.edges.len(),
            export.cycle_lengths,
            h.vertex_count(),
            h.edge_count()
        )));
    }
    Ok(h)
}
