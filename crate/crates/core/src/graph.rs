//! Formula graphs: formulas whose subformulas may be shared between several
//! parents (cirquents). Nodes live in an arena and are addressed by
//! [`NodeId`]; rewrites allocate new nodes and redirect a single edge, so an
//! unreachable node is simply garbage.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use crate::formula::{write_args, Formula};
use crate::term::{Symbol, Term};

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct NodeId(pub u32);

#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub enum Node {
    Atom(Symbol, Vec<Term>),
    Neg(NodeId),
    And(NodeId, NodeId),
    Or(NodeId, NodeId),
    Implies(NodeId, NodeId),
    ChAll(Symbol, NodeId),
    ChExists(Symbol, NodeId),
    /// A branching recurrence together with the replicas created from it.
    Recur { body: NodeId, replicas: BTreeMap<u32, NodeId> },
}

/// Identifies one outgoing edge of a node.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Edge {
    Child(u32),
    Replica(u32),
}

impl Node {
    pub fn children(&self) -> Vec<NodeId> {
        match self {
            Node::Atom(..) => vec![],
            Node::Neg(a) | Node::ChAll(_, a) | Node::ChExists(_, a) => vec![*a],
            Node::And(a, b) | Node::Or(a, b) | Node::Implies(a, b) => vec![*a, *b],
            Node::Recur { body, replicas } => {
                let mut v = vec![*body];
                v.extend(replicas.values().copied());
                v
            }
        }
    }

    fn map_children(&self, mut f: impl FnMut(NodeId) -> NodeId) -> Node {
        match self {
            Node::Atom(p, args) => Node::Atom(p.clone(), args.clone()),
            Node::Neg(a) => Node::Neg(f(*a)),
            Node::ChAll(v, a) => Node::ChAll(v.clone(), f(*a)),
            Node::ChExists(v, a) => Node::ChExists(v.clone(), f(*a)),
            Node::And(a, b) => Node::And(f(*a), f(*b)),
            Node::Or(a, b) => Node::Or(f(*a), f(*b)),
            Node::Implies(a, b) => Node::Implies(f(*a), f(*b)),
            Node::Recur { body, replicas } => Node::Recur {
                body: f(*body),
                replicas: replicas.iter().map(|(k, v)| (*k, f(*v))).collect(),
            },
        }
    }

    pub fn label(&self) -> String {
        match self {
            Node::Atom(p, args) => {
                let mut s = format!("atom {p}");
                if !args.is_empty() {
                    let parts: Vec<String> = args.iter().map(|a| a.to_string()).collect();
                    s.push_str(&format!("({})", parts.join(",")));
                }
                s
            }
            Node::Neg(_) => "neg".into(),
            Node::And(..) => "and".into(),
            Node::Or(..) => "or".into(),
            Node::Implies(..) => "imp".into(),
            Node::ChAll(v, _) => format!("all {v}"),
            Node::ChExists(v, _) => format!("ex {v}"),
            Node::Recur { .. } => "recur".into(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct FormulaGraph {
    nodes: Vec<Node>,
    root: NodeId,
}

impl FormulaGraph {
    /// A graph with a single placeholder root; callers build with [`add`]
    /// and then [`set_root`].
    ///
    /// [`add`]: FormulaGraph::add
    /// [`set_root`]: FormulaGraph::set_root
    pub fn builder() -> Self {
        FormulaGraph { nodes: Vec::new(), root: NodeId(0) }
    }

    pub fn add(&mut self, node: Node) -> NodeId {
        self.nodes.push(node);
        NodeId(self.nodes.len() as u32 - 1)
    }

    pub fn set_root(&mut self, root: NodeId) {
        self.root = root;
    }

    pub fn root(&self) -> NodeId {
        self.root
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id.0 as usize]
    }

    pub(crate) fn node_mut(&mut self, id: NodeId) -> &mut Node {
        &mut self.nodes[id.0 as usize]
    }

    /// Builds a tree-shaped graph. Directory references must already have
    /// been expanded; `None` is returned if one is found.
    pub fn from_formula(f: &Formula) -> Option<Self> {
        let mut g = FormulaGraph::builder();
        let root = g.add_formula(f)?;
        g.set_root(root);
        Some(g)
    }

    pub fn add_formula(&mut self, f: &Formula) -> Option<NodeId> {
        let node = match f {
            Formula::Atom(p, args) => Node::Atom(p.clone(), args.clone()),
            Formula::Neg(a) => Node::Neg(self.add_formula(a)?),
            Formula::And(a, b) => Node::And(self.add_formula(a)?, self.add_formula(b)?),
            Formula::Or(a, b) => Node::Or(self.add_formula(a)?, self.add_formula(b)?),
            Formula::Implies(a, b) => Node::Implies(self.add_formula(a)?, self.add_formula(b)?),
            Formula::ChAll(v, a) => Node::ChAll(v.clone(), self.add_formula(a)?),
            Formula::ChExists(v, a) => Node::ChExists(v.clone(), self.add_formula(a)?),
            Formula::Recur(a) => Node::Recur { body: self.add_formula(a)?, replicas: BTreeMap::new() },
            Formula::DirRef(_) => return None,
        };
        Some(self.add(node))
    }

    /// Unfolds the graph into a tree. Replicas are dropped; a recurrence is
    /// rendered through its body.
    pub fn to_formula(&self) -> Formula {
        self.formula_at(self.root)
    }

    pub fn formula_at(&self, id: NodeId) -> Formula {
        crate::deep(|| self.formula_at_inner(id))
    }

    fn formula_at_inner(&self, id: NodeId) -> Formula {
        match self.node(id) {
            Node::Atom(p, args) => Formula::Atom(p.clone(), args.clone()),
            Node::Neg(a) => Formula::neg(self.formula_at(*a)),
            Node::And(a, b) => Formula::and(self.formula_at(*a), self.formula_at(*b)),
            Node::Or(a, b) => Formula::or(self.formula_at(*a), self.formula_at(*b)),
            Node::Implies(a, b) => Formula::implies(self.formula_at(*a), self.formula_at(*b)),
            Node::ChAll(v, a) => Formula::ChAll(v.clone(), Box::new(self.formula_at(*a))),
            Node::ChExists(v, a) => Formula::ChExists(v.clone(), Box::new(self.formula_at(*a))),
            Node::Recur { body, .. } => Formula::recur(self.formula_at(*body)),
        }
    }

    /// Reachable nodes in depth-first preorder, each listed once.
    pub fn reachable(&self) -> Vec<NodeId> {
        self.reachable_from(self.root)
    }

    pub fn reachable_from(&self, start: NodeId) -> Vec<NodeId> {
        let mut seen = vec![false; self.nodes.len()];
        let mut order = Vec::new();
        let mut stack = vec![start];
        while let Some(id) = stack.pop() {
            if std::mem::replace(&mut seen[id.0 as usize], true) {
                continue;
            }
            order.push(id);
            let children = self.node(id).children();
            stack.extend(children.into_iter().rev());
        }
        order
    }

    /// In-degrees counted over reachable nodes only.
    pub fn in_degrees(&self) -> HashMap<NodeId, usize> {
        let mut deg: HashMap<NodeId, usize> = HashMap::new();
        for id in self.reachable() {
            deg.entry(id).or_insert(0);
            for c in self.node(id).children() {
                *deg.entry(c).or_insert(0) += 1;
            }
        }
        deg
    }

    /// Edge-count depth of the unfolded tree.
    pub fn depth(&self) -> usize {
        fn go(g: &FormulaGraph, id: NodeId, memo: &mut HashMap<NodeId, usize>) -> usize {
            if let Some(d) = memo.get(&id) {
                return *d;
            }
            let d = crate::deep(|| g.node(id).children().into_iter().map(|c| 1 + go(g, c, memo)).max().unwrap_or(0));
            memo.insert(id, d);
            d
        }
        go(self, self.root, &mut HashMap::new())
    }

    pub fn child(&self, id: NodeId, edge: Edge) -> Option<NodeId> {
        match (self.node(id), edge) {
            (Node::Recur { replicas, .. }, Edge::Replica(k)) => replicas.get(&k).copied(),
            (Node::Recur { .. }, Edge::Child(_)) | (_, Edge::Replica(_)) => None,
            (n, Edge::Child(i)) => i.checked_sub(1).and_then(|i| n.children().get(i as usize).copied()),
        }
    }

    /// Redirects one edge of `parent`.
    pub(crate) fn set_child(&mut self, parent: NodeId, edge: Edge, to: NodeId) {
        match (self.node_mut(parent), edge) {
            (Node::Recur { replicas, .. }, Edge::Replica(k)) => {
                replicas.insert(k, to);
            }
            (Node::Neg(a) | Node::ChAll(_, a) | Node::ChExists(_, a), Edge::Child(1)) => *a = to,
            (Node::And(a, _) | Node::Or(a, _) | Node::Implies(a, _), Edge::Child(1)) => *a = to,
            (Node::And(_, b) | Node::Or(_, b) | Node::Implies(_, b), Edge::Child(2)) => *b = to,
            (n, e) => panic!("edge {e:?} does not exist on {}", n.label()),
        }
    }

    /// Copies the subgraph at `id`, keeping nodes listed in `keep` (shared
    /// nodes) by reference.
    pub(crate) fn copy_subgraph(&mut self, id: NodeId, keep: &dyn Fn(NodeId) -> bool) -> NodeId {
        if keep(id) {
            return id;
        }
        let node = self.node(id).clone();
        let copied = node.map_children(|c| self.copy_subgraph(c, keep));
        self.add(copied)
    }

    /// Rewrites every term in the subgraph at `id`, allocating new nodes only
    /// where something changed and stopping at quantifiers binding `stop`.
    pub(crate) fn rewrite_terms(
        &mut self,
        id: NodeId,
        stop: Option<&Symbol>,
        f: &dyn Fn(&Term) -> Term,
    ) -> NodeId {
        let node = self.node(id).clone();
        let new = match &node {
            Node::Atom(p, args) => {
                let mapped: Vec<Term> = args.iter().map(f).collect();
                if &mapped == args {
                    return id;
                }
                Node::Atom(p.clone(), mapped)
            }
            Node::ChAll(v, _) | Node::ChExists(v, _) if Some(v) == stop => return id,
            _ => {
                let mut changed = false;
                let mapped = node.map_children(|c| {
                    let n = self.rewrite_terms(c, stop, f);
                    changed |= n != c;
                    n
                });
                if !changed {
                    return id;
                }
                mapped
            }
        };
        self.add(new)
    }

    /// A garbage-free copy with nodes renumbered in preorder. Two graphs are
    /// structurally equal iff their canonical forms are equal.
    pub fn canonical(&self) -> FormulaGraph {
        let order = self.reachable();
        let index: HashMap<NodeId, NodeId> =
            order.iter().enumerate().map(|(i, id)| (*id, NodeId(i as u32))).collect();
        let nodes = order.iter().map(|id| self.node(*id).map_children(|c| index[&c])).collect();
        FormulaGraph { nodes, root: NodeId(0) }
    }

    /// `n<id> <label> [-> children] indeg=<k>` for each reachable node of
    /// the canonical form.
    pub fn listing(&self) -> Vec<String> {
        let g = self.canonical();
        let deg = g.in_degrees();
        g.reachable()
            .into_iter()
            .map(|id| {
                let node = g.node(id);
                let mut line = format!("n{} {}", id.0, node.label());
                let children = node.children();
                if !children.is_empty() {
                    let names: Vec<String> = children.iter().map(|c| format!("n{}", c.0)).collect();
                    line.push_str(&format!(" -> {}", names.join(" ")));
                }
                line.push_str(&format!(" indeg={}", deg[&id]));
                line
            })
            .collect()
    }

    /// Renders the node with replicas shown explicitly, e.g. `$[1: p(W1)]`.
    pub fn render(&self, id: NodeId) -> String {
        RenderNode { graph: self, id, prec: 0 }.to_string()
    }
}

impl PartialEq for FormulaGraph {
    fn eq(&self, other: &Self) -> bool {
        let (a, b) = (self.canonical(), other.canonical());
        a.nodes == b.nodes
    }
}

impl Eq for FormulaGraph {}

struct RenderNode<'a> {
    graph: &'a FormulaGraph,
    id: NodeId,
    prec: u8,
}

fn node_prec(n: &Node) -> u8 {
    match n {
        Node::Implies(..) => 1,
        Node::Or(..) => 2,
        Node::And(..) => 3,
        Node::Neg(_) | Node::ChAll(..) | Node::ChExists(..) | Node::Recur { .. } => 4,
        Node::Atom(..) => 5,
    }
}

impl fmt::Display for RenderNode<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        crate::deep(|| self.render_into(f))
    }
}

impl RenderNode<'_> {
    fn render_into(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let node = self.graph.node(self.id);
        let p = node_prec(node);
        let sub = |id: NodeId, prec: u8| RenderNode { graph: self.graph, id, prec };
        if p < self.prec {
            return write!(f, "({})", RenderNode { prec: 0, ..*self });
        }
        match node {
            Node::Atom(pred, args) => {
                write!(f, "{pred}")?;
                write_args(f, args)
            }
            Node::Neg(a) => write!(f, "~{}", sub(*a, 4)),
            Node::ChAll(v, a) => write!(f, "@{v}. {}", sub(*a, 4)),
            Node::ChExists(v, a) => write!(f, "#{v}. {}", sub(*a, 4)),
            Node::And(a, b) => write!(f, "{} /\\ {}", sub(*a, 3), sub(*b, 4)),
            Node::Or(a, b) => write!(f, "{} \\/ {}", sub(*a, 2), sub(*b, 3)),
            Node::Implies(a, b) => write!(f, "{} -> {}", sub(*a, 2), sub(*b, 1)),
            Node::Recur { body, replicas } => {
                write!(f, "${}", sub(*body, 4))?;
                if !replicas.is_empty() {
                    f.write_str("[")?;
                    for (i, (k, r)) in replicas.iter().enumerate() {
                        if i > 0 {
                            f.write_str(", ")?;
                        }
                        write!(f, "{k}: {}", sub(*r, 0))?;
                    }
                    f.write_str("]")?;
                }
                Ok(())
            }
        }
    }
}
