//! Four-node supervisor: two "filter running" nodes and two "switch
//! predicted, standby filter warming up" nodes, plus a hysteresis timer for a
//! worker whose prediction lapsed.
//!
//! | from            | condition                         | commands                                   | to              |
//! |-----------------|-----------------------------------|--------------------------------------------|-----------------|
//! | `F1_ONLY`       | prediction, no doomed worker      | `SCALE_RESOURCES(2)`, `RUN_THREAD(F2)`     | `F1_PREDICT_F2` |
//! | `F1_ONLY`       | prediction, doomed F2 alive       | `CANCEL_KILL(F2)`                          | `F1_PREDICT_F2` |
//! | `F1_ONLY`       | `g < 0`, no worker (cold)         | `RUN_THREAD(F2)`, `ACTIVATE_THREAD(F2)`, `KILL_THREAD(F1)` | `F2_ONLY` |
//! | `F1_ONLY`       | `g < 0`, doomed F2 alive          | `CANCEL_KILL(F2)`, `ACTIVATE_THREAD(F2)`, `KILL_THREAD(F1)` | `F2_ONLY` |
//! | `F1_PREDICT_F2` | `g < 0`                           | `ACTIVATE_THREAD(F2)`, `KILL_THREAD(F1, n+h)` | `F2_ONLY`    |
//! | `F1_PREDICT_F2` | `g < 0`, switch back predicted    | `ACTIVATE_THREAD(F2)`, `CANCEL_KILL(F1)`   | `F2_PREDICT_F1` |
//! | `F1_PREDICT_F2` | prediction lapses                 | `KILL_THREAD(F2, n+h)`                     | `F1_ONLY`       |
//! | `F1_ONLY`       | doomed worker deadline reached    | `SCALE_RESOURCES(1)`                       | `F1_ONLY`       |
//!
//! The `F2_*` rows are the same with the roles and the sign of `g` swapped.
//! `SCALE_RESOURCES` precedes the other commands when the worker count grows
//! and follows them when it shrinks.

use std::fmt;

use super::{select_active, PredictorConfig, Slot, SwitchSignal};
use crate::filter::FilterId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Node {
    F1Only,
    F1PredictF2,
    F2Only,
    F2PredictF1,
}

impl Node {
    pub fn only(slot: Slot) -> Node {
        match slot {
            Slot::F1 => Node::F1Only,
            Slot::F2 => Node::F2Only,
        }
    }

    pub fn predicting(slot: Slot) -> Node {
        match slot {
            Slot::F1 => Node::F1PredictF2,
            Slot::F2 => Node::F2PredictF1,
        }
    }

    /// Filter producing the output in this node.
    pub fn primary(self) -> Slot {
        match self {
            Node::F1Only | Node::F1PredictF2 => Slot::F1,
            Node::F2Only | Node::F2PredictF1 => Slot::F2,
        }
    }

    pub fn is_predicting(self) -> bool {
        matches!(self, Node::F1PredictF2 | Node::F2PredictF1)
    }

    pub fn mirrored(self) -> Node {
        match self {
            Node::F1Only => Node::F2Only,
            Node::F1PredictF2 => Node::F2PredictF1,
            Node::F2Only => Node::F1Only,
            Node::F2PredictF1 => Node::F1PredictF2,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Node::F1Only => "F1_ONLY",
            Node::F1PredictF2 => "F1_PREDICT_F2",
            Node::F2Only => "F2_ONLY",
            Node::F2PredictF1 => "F2_PREDICT_F1",
        }
    }

    pub fn parse(s: &str) -> Option<Node> {
        [Node::F1Only, Node::F1PredictF2, Node::F2Only, Node::F2PredictF1].into_iter().find(|n| n.as_str() == s)
    }
}

impl fmt::Display for Node {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CommandKind {
    /// Start a worker with zero state.
    RunThread(FilterId),
    /// Promote a speculative worker to primary.
    ActivateThread(FilterId),
    /// Retire a worker once sample `deadline` is reached.
    KillThread { target: FilterId, deadline: u64 },
    /// Revoke a pending kill; the worker keeps its state.
    CancelKill(FilterId),
    /// Number of filter workers the resources must carry.
    ScaleResources(u32),
}

impl CommandKind {
    pub fn name(&self) -> &'static str {
        match self {
            CommandKind::RunThread(_) => "RUN_THREAD",
            CommandKind::ActivateThread(_) => "ACTIVATE_THREAD",
            CommandKind::KillThread { .. } => "KILL_THREAD",
            CommandKind::CancelKill(_) => "CANCEL_KILL",
            CommandKind::ScaleResources(_) => "SCALE_RESOURCES",
        }
    }
}

impl fmt::Display for CommandKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CommandKind::RunThread(id) | CommandKind::ActivateThread(id) | CommandKind::CancelKill(id) => {
                write!(f, "{}({id})", self.name())
            }
            CommandKind::KillThread { target, deadline } => write!(f, "{}({target}@{deadline})", self.name()),
            CommandKind::ScaleResources(level) => write!(f, "{}({level})", self.name()),
        }
    }
}

/// Manager-to-runtime instruction issued at sample `n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct LifecycleCommand {
    pub n: u64,
    pub kind: CommandKind,
}

impl fmt::Display for LifecycleCommand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.kind.fmt(f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SupervisorState {
    pub node: Node,
    /// Deadline of the doomed standby worker. Only set in the `*_ONLY` nodes.
    pub kill_deadline: Option<u64>,
    /// Filter ids for `F1` and `F2`.
    pub ids: [FilterId; 2],
}

impl SupervisorState {
    pub fn new(ids: [FilterId; 2], initial: Slot) -> Self {
        Self { node: Node::only(initial), kill_deadline: None, ids }
    }

    pub fn id(&self, slot: Slot) -> FilterId {
        self.ids[slot.index()]
    }

    pub fn primary_id(&self) -> FilterId {
        self.id(self.node.primary())
    }

    /// Filter workers alive in this state (primary plus standby).
    pub fn workers(&self) -> u32 {
        1 + u32::from(self.node.is_predicting() || self.kill_deadline.is_some())
    }
}

/// One manager step. `sig` must have advanced exactly one sample since the
/// previous call.
pub fn supervise(
    state: &SupervisorState,
    sig: &SwitchSignal,
    cfg: &PredictorConfig,
) -> (SupervisorState, Vec<LifecycleCommand>) {
    let n = sig.n();
    let h = u64::from(cfg.hysteresis);
    let primary = state.node.primary();
    let other = primary.other();
    let (primary_id, other_id) = (state.id(primary), state.id(other));

    let mut next = *state;
    let mut kinds = Vec::new();

    if next.kill_deadline.is_some_and(|d| n >= d) {
        next.kill_deadline = None;
    }

    if select_active(sig.g_now(), primary) == other {
        // promote at the crossing sample itself
        if !state.node.is_predicting() {
            if next.kill_deadline.is_some() {
                kinds.push(CommandKind::CancelKill(other_id));
            } else {
                kinds.push(CommandKind::RunThread(other_id));
            }
        }
        kinds.push(CommandKind::ActivateThread(other_id));
        if cfg.predicts(sig, other) {
            // switch back already predicted: the old primary stays as standby
            kinds.push(CommandKind::CancelKill(primary_id));
            next.node = Node::predicting(other);
            next.kill_deadline = None;
        } else {
            kinds.push(CommandKind::KillThread { target: primary_id, deadline: n + h });
            next.node = Node::only(other);
            next.kill_deadline = (h > 0).then_some(n + h);
        }
    } else {
        let predicted = cfg.predicts(sig, primary);
        if !state.node.is_predicting() && predicted {
            if next.kill_deadline.take().is_some() {
                kinds.push(CommandKind::CancelKill(other_id));
            } else {
                kinds.push(CommandKind::RunThread(other_id));
            }
            next.node = Node::predicting(primary);
        } else if state.node.is_predicting() && !predicted {
            kinds.push(CommandKind::KillThread { target: other_id, deadline: n + h });
            next.node = Node::only(primary);
            next.kill_deadline = (h > 0).then_some(n + h);
        }
    }

    let (before, after) = (state.workers(), next.workers());
    if after > before {
        kinds.insert(0, CommandKind::ScaleResources(after));
    } else if after < before {
        kinds.push(CommandKind::ScaleResources(after));
    }

    (next, kinds.into_iter().map(|kind| LifecycleCommand { n, kind }).collect())
}
