use serde::{Deserialize, Serialize};

use crate::scheduler::{Node, Schedule};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScheduleKind {
    Sequential,
    Diagonal,
}

impl std::str::FromStr for ScheduleKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sequential" => Ok(Self::Sequential),
            "diagonal" => Ok(Self::Diagonal),
            other => Err(format!("unknown schedule '{other}'")),
        }
    }
}

/// One executed group.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceStep {
    pub i: usize,
    pub nodes: Vec<Node>,
    /// Worker thread that wrote each node's memory, parallel to `nodes`.
    pub workers: Vec<usize>,
    pub duration_ns: u64,
}

/// Record of which nodes ran in which step.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecutionTrace {
    pub schedule_kind: ScheduleKind,
    pub steps: Vec<TraceStep>,
    pub total_ns: u64,
}

impl ExecutionTrace {
    pub(crate) fn new(schedule_kind: ScheduleKind) -> Self {
        Self {
            schedule_kind,
            steps: Vec::new(),
            total_ns: 0,
        }
    }

    pub fn step_count(&self) -> usize {
        self.steps.len()
    }

    /// The schedule this run actually followed.
    pub fn induced_schedule(&self) -> Schedule {
        Schedule {
            groups: self.steps.iter().map(|s| s.nodes.clone()).collect(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("trace serializes")
    }
}
