//! Dependency analysis for the segment × layer grid.
//!
//! With per-layer memory, node `(s, l)` needs only `(s, l−1)` (the same
//! segment one layer down) and `(s−1, l)` (the same layer's memory after the
//! previous segment). Every anti-diagonal `s + l = i` is therefore a set of
//! mutually independent nodes, and running the diagonals in order takes
//! `S + L − 1` steps instead of `S · L`.
//!
//! This does not hold when a layer also reads the previous segment's
//! final-layer memory (the original recurrent memory transformer): there
//! `(s, l)` depends on every `(s−1, ·)`, no two nodes of different segments
//! can overlap, and diagonal grouping is not applicable.

use std::collections::VecDeque;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{input_err, Result};

/// One unit of work: segment `segment` through layer `layer`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "[usize; 2]", from = "[usize; 2]")]
pub struct Node {
    pub segment: usize,
    pub layer: usize,
}

impl Node {
    pub fn new(segment: usize, layer: usize) -> Self {
        Self { segment, layer }
    }

    /// Nodes that must complete before this one.
    pub fn predecessors(self) -> impl Iterator<Item = Node> {
        let prev_segment = self.segment.checked_sub(1).map(|s| Node::new(s, self.layer));
        let prev_layer = self.layer.checked_sub(1).map(|l| Node::new(self.segment, l));
        prev_segment.into_iter().chain(prev_layer)
    }
}

impl From<Node> for [usize; 2] {
    fn from(n: Node) -> Self {
        [n.segment, n.layer]
    }
}

impl From<[usize; 2]> for Node {
    fn from([segment, layer]: [usize; 2]) -> Self {
        Node { segment, layer }
    }
}

impl fmt::Display for Node {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(s={}, l={})", self.segment, self.layer)
    }
}

/// Ordered groups of nodes; all nodes in one group may run concurrently.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Schedule {
    pub groups: Vec<Vec<Node>>,
}

impl Schedule {
    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    pub fn max_group_size(&self) -> usize {
        self.groups.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("schedule serializes")
    }
}

/// A schedule produced by [`build_diagonal_schedule`].
pub type DiagonalSchedule = Schedule;

/// The anti-diagonal partition: group `i` holds every node with
/// `segment + layer == i`, listed from the newest segment (lowest layer)
/// to the oldest.
pub fn build_diagonal_schedule(segments: usize, layers: usize) -> Result<DiagonalSchedule> {
    check_grid(segments, layers)?;
    let groups = (0..segments + layers - 1)
        .map(|i| {
            let newest = i.min(segments - 1);
            let oldest = i.saturating_sub(layers - 1);
            (oldest..=newest).rev().map(|s| Node::new(s, i - s)).collect()
        })
        .collect();
    Ok(Schedule { groups })
}

/// The baseline order: segments outermost, layers innermost, one node per
/// group.
pub fn build_sequential_schedule(segments: usize, layers: usize) -> Result<Schedule> {
    check_grid(segments, layers)?;
    let groups = (0..segments)
        .flat_map(|s| (0..layers).map(move |l| vec![Node::new(s, l)]))
        .collect();
    Ok(Schedule { groups })
}

fn check_grid(segments: usize, layers: usize) -> Result<()> {
    if segments == 0 || layers == 0 {
        return Err(input_err!(
            "grid needs at least one segment and one layer, got {segments}×{layers}"
        ));
    }
    Ok(())
}

/// Something wrong with a schedule.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation {
    OutOfBounds {
        node: Node,
        group: usize,
    },
    Duplicate {
        node: Node,
        first: usize,
        again: usize,
    },
    Missing {
        node: Node,
    },
    /// `pred → node` is an edge but `pred` does not run strictly earlier.
    Dependency {
        pred: Node,
        pred_group: usize,
        node: Node,
        node_group: usize,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::OutOfBounds { node, group } => write!(f, "{node} in group {group} is outside the grid"),
            Violation::Duplicate { node, first, again } => {
                write!(f, "{node} scheduled in group {first} and again in group {again}")
            }
            Violation::Missing { node } => write!(f, "{node} is never scheduled"),
            Violation::Dependency {
                pred,
                pred_group,
                node,
                node_group,
            } => write!(
                f,
                "edge {pred} -> {node} broken: {pred} runs in group {pred_group}, {node} in group {node_group}"
            ),
        }
    }
}

/// Check full coverage and that every dependency edge points strictly
/// forward in group order.
pub fn validate_schedule(schedule: &Schedule, segments: usize, layers: usize) -> Result<(), Vec<Violation>> {
    let mut violations = Vec::new();
    let mut group_of: Vec<Option<usize>> = vec![None; segments * layers];
    for (g, group) in schedule.groups.iter().enumerate() {
        for &node in group {
            if node.segment >= segments || node.layer >= layers {
                violations.push(Violation::OutOfBounds { node, group: g });
                continue;
            }
            let slot = &mut group_of[node.segment * layers + node.layer];
            match *slot {
                Some(first) => violations.push(Violation::Duplicate { node, first, again: g }),
                None => *slot = Some(g),
            }
        }
    }
    for s in 0..segments {
        for l in 0..layers {
            let node = Node::new(s, l);
            let Some(node_group) = group_of[s * layers + l] else {
                violations.push(Violation::Missing { node });
                continue;
            };
            for pred in node.predecessors() {
                if let Some(pred_group) = group_of[pred.segment * layers + pred.layer] {
                    if pred_group >= node_group {
                        violations.push(Violation::Dependency {
                            pred,
                            pred_group,
                            node,
                            node_group,
                        });
                    }
                }
            }
        }
    }
    if violations.is_empty() {
        Ok(())
    } else {
        Err(violations)
    }
}

/// Largest grid the brute-force oracle accepts.
pub const ORACLE_MAX_NODES: usize = 10_000;

/// Longest-path depth (in vertices, 1-based) of every node, by dynamic
/// programming over a Kahn topological order of the explicit edge list.
/// Indexed `segment * layers + layer`.
pub fn longest_path_depths(segments: usize, layers: usize) -> Result<Vec<usize>> {
    check_grid(segments, layers)?;
    let n = segments
        .checked_mul(layers)
        .filter(|&n| n <= ORACLE_MAX_NODES)
        .ok_or_else(|| input_err!("oracle limited to {ORACLE_MAX_NODES} nodes, got {segments}×{layers}"))?;

    let id = |node: Node| node.segment * layers + node.layer;
    let mut successors: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut in_degree = vec![0usize; n];
    for s in 0..segments {
        for l in 0..layers {
            let node = Node::new(s, l);
            for pred in node.predecessors() {
                successors[id(pred)].push(id(node));
                in_degree[id(node)] += 1;
            }
        }
    }

    let mut depth = vec![1usize; n];
    let mut ready: VecDeque<usize> = (0..n).filter(|&v| in_degree[v] == 0).collect();
    let mut visited = 0;
    while let Some(v) = ready.pop_front() {
        visited += 1;
        for &w in &successors[v] {
            depth[w] = depth[w].max(depth[v] + 1);
            in_degree[w] -= 1;
            if in_degree[w] == 0 {
                ready.push_back(w);
            }
        }
    }
    assert_eq!(visited, n, "grid dependency graph is acyclic");
    Ok(depth)
}

/// Minimum number of groups any valid schedule needs: the vertex count of
/// the longest dependency chain.
pub fn min_groups_oracle(segments: usize, layers: usize) -> Result<usize> {
    Ok(longest_path_depths(segments, layers)?.into_iter().max().unwrap_or(0))
}
