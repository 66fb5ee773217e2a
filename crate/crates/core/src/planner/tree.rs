//! Arena-backed search tree with three node layers.

use crate::scalar::{max_of, Real};
use crate::state::WorldState;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub usize);

/// Layer of a search node.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NodeKind {
    /// Chooses which object to move in its state (or to stop).
    ActionSelection,
    /// Chooses the reference frame for action `action`.
    TemplateSelection { action: usize },
    /// Chooses among sampled goal states for `(action, template)`.
    GoalSelection { action: usize, template: usize },
}

#[derive(Clone, Debug)]
pub struct SearchNode<T: Real> {
    pub kind: NodeKind,
    /// State of an action-selection node.
    pub state: Option<WorldState<T>>,
    /// Intention likelihood of `state`, for action-selection nodes.
    pub psi: T,
    pub value: T,
    pub visits: u64,
    pub solved: bool,
    /// Probability of this goal state under its goal-selection parent.
    pub goal_probability: T,
    pub parent: Option<NodeId>,
    pub children: Vec<NodeId>,
    /// No-op leaf that freezes its parent's state.
    pub terminal: bool,
    pub expanded: bool,
    /// Leaf forced to `-inf`, by the lazy state check or by plan repair.
    pub demoted: bool,
    /// Number of real actions between the root and this node.
    pub depth: usize,
}

impl<T: Real> SearchNode<T> {
    fn new(kind: NodeKind, parent: Option<NodeId>, depth: usize) -> Self {
        Self {
            kind,
            state: None,
            psi: T::zero(),
            value: T::zero(),
            visits: 0,
            solved: false,
            goal_probability: T::one(),
            parent,
            children: Vec::new(),
            terminal: false,
            expanded: false,
            demoted: false,
            depth,
        }
    }

    pub fn is_leaf(&self) -> bool {
        self.kind == NodeKind::ActionSelection && !self.expanded && !self.terminal
    }
}

#[derive(Clone, Debug)]
pub struct SearchTree<T: Real> {
    nodes: Vec<SearchNode<T>>,
}

impl<T: Real> SearchTree<T> {
    pub const ROOT: NodeId = NodeId(0);

    pub fn new(root_state: WorldState<T>, root_psi: T) -> Self {
        let mut root = SearchNode::new(NodeKind::ActionSelection, None, 0);
        root.state = Some(root_state);
        root.psi = root_psi;
        root.value = root_psi;
        Self { nodes: vec![root] }
    }

    pub fn root(&self) -> &SearchNode<T> {
        &self.nodes[0]
    }

    pub fn node(&self, id: NodeId) -> &SearchNode<T> {
        &self.nodes[id.0]
    }

    pub(crate) fn node_mut(&mut self, id: NodeId) -> &mut SearchNode<T> {
        &mut self.nodes[id.0]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = NodeId> {
        (0..self.nodes.len()).map(NodeId)
    }

    pub(crate) fn add_child(&mut self, parent: NodeId, kind: NodeKind, depth: usize) -> NodeId {
        let id = NodeId(self.nodes.len());
        self.nodes.push(SearchNode::new(kind, Some(parent), depth));
        self.nodes[parent.0].children.push(id);
        id
    }

    /// The value and solved flag a node should hold given its children.
    pub fn backup(&self, id: NodeId, action_cost: T) -> (T, bool) {
        let n = &self.nodes[id.0];
        if n.demoted {
            return (T::neg_infinity(), true);
        }
        if n.kind == NodeKind::ActionSelection && (n.terminal || !n.expanded) {
            return (n.value, n.solved);
        }
        let best = n.children.iter().map(|c| self.nodes[c.0].value).fold(T::neg_infinity(), max_of);
        let solved = n.children.iter().all(|c| self.nodes[c.0].solved);
        let value = match n.kind {
            NodeKind::GoalSelection { .. } => best - action_cost,
            _ => best,
        };
        (value, solved)
    }

    /// Recomputes values and solved flags from `from` up to the root.
    pub fn update_values(&mut self, from: NodeId, action_cost: T) {
        let mut cur = Some(from);
        while let Some(id) = cur {
            let (value, solved) = self.backup(id, action_cost);
            let n = &mut self.nodes[id.0];
            n.value = value;
            n.solved = solved;
            cur = n.parent;
        }
    }

    /// First internal node whose stored value or solved flag disagrees with
    /// its backup rule.
    pub fn audit(&self, action_cost: T) -> Option<NodeId> {
        self.ids().find(|&id| {
            let n = &self.nodes[id.0];
            let internal = n.kind != NodeKind::ActionSelection || (n.expanded && !n.terminal);
            if !internal {
                return false;
            }
            let (v, s) = self.backup(id, action_cost);
            !(v == n.value || (v.is_nan() && n.value.is_nan())) || s != n.solved
        })
    }

    /// Index of the largest-valued child, lowest creation index on ties.
    pub fn best_child(&self, id: NodeId) -> Option<NodeId> {
        let mut best: Option<NodeId> = None;
        for &c in &self.nodes[id.0].children {
            if best.is_none_or(|b| self.nodes[c.0].value > self.nodes[b.0].value) {
                best = Some(c);
            }
        }
        best
    }

    /// Chain of action-selection nodes from the root down to `id`.
    pub fn action_path(&self, id: NodeId) -> Vec<NodeId> {
        let mut path = Vec::new();
        let mut cur = Some(id);
        while let Some(c) = cur {
            if self.nodes[c.0].kind == NodeKind::ActionSelection && !self.nodes[c.0].terminal {
                path.push(c);
            }
            cur = self.nodes[c.0].parent;
        }
        path.reverse();
        path
    }
}
