//! Finite rooted trees of labels, finite posets, monotone maps, the fibration
//! condition, and the presheaf/fibration round trip.
//!
//! External choice lives in a base tree of labels; everything else in the crate
//! is built over these trees. Stages are opaque string identifiers; edges are
//! named by the label on the child end, and siblings carry distinct labels.

use std::collections::{BTreeMap, BTreeSet};

use indexmap::IndexMap;

use crate::error::{Error, Result};

/// A finite rooted tree with labelled edges, stored parent-pointer style.
///
/// The edge from `parent(n)` to `n` is named `edge_label(n)`. As a poset,
/// `x <= y` iff `x` is an ancestor of `y` or `x = y`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelTree {
    ids: IndexMap<String, ()>,
    root: usize,
    parent: Vec<Option<usize>>,
    edge_label: Vec<Option<String>>,
}

impl LabelTree {
    /// Builds a tree from `(node, parent, label)` triples plus the root id.
    pub fn new(root: &str, edges: &[(&str, &str, &str)]) -> Result<Self> {
        let mut builder = TreeBuilder::new(root);
        for (parent, child, label) in edges {
            builder.add_edge(parent, child, label)?;
        }
        builder.finish()
    }

    pub fn node_count(&self) -> usize {
        self.ids.len()
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn node_id(&self, index: usize) -> &str {
        self.ids.get_index(index).expect("node index").0
    }

    pub fn index_of(&self, id: &str) -> Result<usize> {
        self.ids
            .get_index_of(id)
            .ok_or_else(|| Error::UnknownNode(id.to_string()))
    }

    pub fn parent(&self, node: usize) -> Option<usize> {
        self.parent[node]
    }

    /// The label of the in-edge of `node`; `None` at the root.
    pub fn edge_label(&self, node: usize) -> Option<&str> {
        self.edge_label[node].as_deref()
    }

    pub fn nodes(&self) -> impl Iterator<Item = usize> {
        0..self.ids.len()
    }

    pub fn children(&self, node: usize) -> Vec<usize> {
        self.nodes().filter(|&n| self.parent[n] == Some(node)).collect()
    }

    /// Non-root nodes; each one names its in-edge.
    pub fn edges(&self) -> impl Iterator<Item = usize> + '_ {
        self.nodes().filter(|&n| n != self.root)
    }

    pub fn is_leaf(&self, node: usize) -> bool {
        self.children(node).is_empty()
    }

    pub fn depth(&self, node: usize) -> usize {
        let mut d = 0;
        let mut cur = node;
        while let Some(p) = self.parent[cur] {
            d += 1;
            cur = p;
        }
        d
    }

    /// Ancestor-or-self order.
    pub fn leq(&self, x: usize, y: usize) -> bool {
        let mut cur = y;
        loop {
            if cur == x {
                return true;
            }
            match self.parent[cur] {
                Some(p) => cur = p,
                None => return false,
            }
        }
    }

    /// The unique edge path from `x` down to `y`, as the list of visited child
    /// nodes. Empty when `x = y`.
    pub fn path_between(&self, x: usize, y: usize) -> Result<Vec<usize>> {
        if !self.leq(x, y) {
            return Err(Error::NotComparable {
                x: self.node_id(x).to_string(),
                y: self.node_id(y).to_string(),
            });
        }
        let mut rev = Vec::new();
        let mut cur = y;
        while cur != x {
            rev.push(cur);
            cur = self.parent[cur].expect("leq guaranteed an ancestor chain");
        }
        rev.reverse();
        Ok(rev)
    }

    /// Edge labels along `path_between`.
    pub fn path_labels(&self, x: usize, y: usize) -> Result<Vec<String>> {
        Ok(self
            .path_between(x, y)?
            .iter()
            .map(|&n| self.edge_label[n].clone().expect("non-root node"))
            .collect())
    }

    /// A tree is linear when every node has at most one child.
    pub fn is_linear(&self) -> bool {
        self.nodes().all(|n| self.children(n).len() <= 1)
    }

    pub fn as_poset(&self) -> Poset {
        let n = self.node_count();
        let mut leq = vec![vec![false; n]; n];
        for x in 0..n {
            for y in 0..n {
                leq[x][y] = self.leq(x, y);
            }
        }
        Poset {
            elems: self.ids.keys().cloned().collect(),
            leq,
        }
    }
}

/// Incremental construction with validation at `finish`.
pub struct TreeBuilder {
    ids: IndexMap<String, ()>,
    root: String,
    parent: BTreeMap<String, String>,
    edge_label: BTreeMap<String, String>,
}

impl TreeBuilder {
    pub fn new(root: &str) -> Self {
        let mut ids = IndexMap::new();
        ids.insert(root.to_string(), ());
        TreeBuilder {
            ids,
            root: root.to_string(),
            parent: BTreeMap::new(),
            edge_label: BTreeMap::new(),
        }
    }

    pub fn add_edge(&mut self, parent: &str, child: &str, label: &str) -> Result<&mut Self> {
        if self.parent.contains_key(child) || child == self.root {
            return Err(Error::InvalidTree(format!("node {child} has two in-edges")));
        }
        self.ids.entry(parent.to_string()).or_insert(());
        self.ids.entry(child.to_string()).or_insert(());
        self.parent.insert(child.to_string(), parent.to_string());
        self.edge_label.insert(child.to_string(), label.to_string());
        Ok(self)
    }

    pub fn finish(self) -> Result<LabelTree> {
        let ids = self.ids;
        let index = |id: &str| ids.get_index_of(id);
        let root = index(&self.root).expect("root inserted first");
        let mut parent = vec![None; ids.len()];
        let mut edge_label = vec![None; ids.len()];
        for (child, par) in &self.parent {
            let c = index(child).unwrap();
            let p = index(par).ok_or_else(|| Error::UnknownNode(par.clone()))?;
            parent[c] = Some(p);
            edge_label[c] = Some(self.edge_label[child].clone());
        }
        let tree = LabelTree {
            ids,
            root,
            parent,
            edge_label,
        };
        tree.validate()?;
        Ok(tree)
    }
}

impl LabelTree {
    fn validate(&self) -> Result<()> {
        let n = self.node_count();
        // every node reaches the root without cycles
        for node in self.nodes() {
            let mut seen = 0usize;
            let mut cur = node;
            while let Some(p) = self.parent[cur] {
                cur = p;
                seen += 1;
                if seen > n {
                    return Err(Error::InvalidTree("parent links contain a cycle".into()));
                }
            }
            if cur != self.root {
                return Err(Error::InvalidTree(format!(
                    "node {} does not reach the root",
                    self.node_id(node)
                )));
            }
        }
        // |edges| = |nodes| - 1 holds by construction (one parent per non-root);
        // sibling labels must be distinct
        for node in self.nodes() {
            let mut labels = BTreeSet::new();
            for child in self.children(node) {
                let label = self.edge_label[child].clone().unwrap();
                if !labels.insert(label.clone()) {
                    return Err(Error::InvalidTree(format!(
                        "siblings under {} share the label {label}",
                        self.node_id(node)
                    )));
                }
            }
        }
        Ok(())
    }
}

/// A finite poset with named elements.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Poset {
    pub elems: Vec<String>,
    pub leq: Vec<Vec<bool>>,
}

impl Poset {
    pub fn len(&self) -> usize {
        self.elems.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elems.is_empty()
    }

    pub fn index_of(&self, id: &str) -> Result<usize> {
        self.elems
            .iter()
            .position(|e| e == id)
            .ok_or_else(|| Error::UnknownNode(id.to_string()))
    }

    /// Checks the poset is a rooted tree: a unique minimum, and every strict
    /// down-set is a chain.
    pub fn is_tree(&self) -> bool {
        let n = self.len();
        if n == 0 {
            return false;
        }
        let minima: Vec<usize> = (0..n)
            .filter(|&x| (0..n).all(|y| !self.leq[y][x] || y == x))
            .collect();
        if minima.len() != 1 {
            return false;
        }
        for t in 0..n {
            let below: Vec<usize> = (0..n).filter(|&x| self.leq[x][t]).collect();
            for &a in &below {
                for &b in &below {
                    if !self.leq[a][b] && !self.leq[b][a] {
                        return false;
                    }
                }
            }
        }
        true
    }
}

/// A monotone map between finite posets, possibly partial.
#[derive(Debug, Clone)]
pub struct MonotoneMap {
    pub source: Poset,
    pub target: Poset,
    pub map: Vec<Option<usize>>,
}

impl MonotoneMap {
    pub fn new(source: Poset, target: Poset, map: Vec<Option<usize>>) -> Result<Self> {
        let m = MonotoneMap { source, target, map };
        m.check_monotone()?;
        Ok(m)
    }

    fn check_monotone(&self) -> Result<()> {
        let n = self.source.len();
        for x in 0..n {
            for y in 0..n {
                if let (Some(fx), Some(fy)) = (self.map[x], self.map[y]) {
                    if self.source.leq[x][y] && !self.target.leq[fx][fy] {
                        return Err(Error::NotMonotone(format!(
                            "{} <= {} but images are incomparable",
                            self.source.elems[x], self.source.elems[y]
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn is_total(&self) -> bool {
        self.map.iter().all(|m| m.is_some())
    }

    pub fn is_surjective(&self) -> bool {
        let hit: BTreeSet<usize> = self.map.iter().flatten().copied().collect();
        hit.len() == self.target.len()
    }
}

/// Decides the unique-lift condition: whenever `x <= pi(t)`, there is exactly
/// one `s` in the fiber over `x` with `s <= t`. Total decision procedure on
/// finite posets.
pub fn is_fibration(f: &MonotoneMap) -> bool {
    if !f.is_total() {
        return false;
    }
    let src = &f.source;
    let tgt = &f.target;
    for t in 0..src.len() {
        let pt = f.map[t].unwrap();
        for x in 0..tgt.len() {
            if tgt.leq[x][pt] {
                let lifts = (0..src.len())
                    .filter(|&s| f.map[s] == Some(x) && src.leq[s][t])
                    .count();
                if lifts != 1 {
                    return false;
                }
            }
        }
    }
    true
}

/// A partial map between label trees that is surjective onto the target and
/// sends root to root and edges to edges.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TreeProjection {
    pub node_map: BTreeMap<usize, usize>,
}

impl TreeProjection {
    pub fn new(source: &LabelTree, target: &LabelTree, node_map: BTreeMap<usize, usize>) -> Result<Self> {
        let p = TreeProjection { node_map };
        p.validate(source, target)?;
        Ok(p)
    }

    pub fn from_ids(
        source: &LabelTree,
        target: &LabelTree,
        pairs: &BTreeMap<String, String>,
    ) -> Result<Self> {
        let mut node_map = BTreeMap::new();
        for (s, t) in pairs {
            node_map.insert(source.index_of(s)?, target.index_of(t)?);
        }
        TreeProjection::new(source, target, node_map)
    }

    pub fn apply(&self, node: usize) -> Option<usize> {
        self.node_map.get(&node).copied()
    }

    fn validate(&self, source: &LabelTree, target: &LabelTree) -> Result<()> {
        match self.node_map.get(&source.root()) {
            Some(&r) if r == target.root() => {}
            _ => return Err(Error::NotMonotone("root must map to root".into())),
        }
        // order-preserving on the domain of definition
        for (&x, &fx) in &self.node_map {
            for (&y, &fy) in &self.node_map {
                if source.leq(x, y) && !target.leq(fx, fy) {
                    return Err(Error::NotMonotone(format!(
                        "{} <= {} but images are incomparable",
                        source.node_id(x),
                        source.node_id(y)
                    )));
                }
            }
        }
        // edges map to edges or fall outside the domain
        for child in source.edges() {
            let parent = source.parent(child).unwrap();
            if let (Some(fp), Some(fc)) = (self.apply(parent), self.apply(child)) {
                if fc != fp && target.parent(fc) != Some(fp) {
                    return Err(Error::NotMonotone(format!(
                        "edge into {} maps to a non-edge",
                        source.node_id(child)
                    )));
                }
            }
        }
        let image: BTreeSet<usize> = self.node_map.values().copied().collect();
        if image.len() != target.node_count() {
            return Err(Error::NotSurjective("projection target".into()));
        }
        Ok(())
    }

    /// Edges of the source whose endpoints project onto the in-edge of
    /// `target_child`.
    pub fn edge_preimage(
        &self,
        source: &LabelTree,
        target: &LabelTree,
        target_child: usize,
    ) -> Vec<usize> {
        let t_parent = target.parent(target_child).expect("edge of the target");
        source
            .edges()
            .filter(|&c| {
                let p = source.parent(c).unwrap();
                self.apply(p) == Some(t_parent) && self.apply(c) == Some(target_child)
            })
            .collect()
    }

    /// Composition `other . self`, defined where both legs are defined.
    pub fn compose(&self, other: &TreeProjection) -> TreeProjection {
        let node_map = self
            .node_map
            .iter()
            .filter_map(|(&x, &y)| other.node_map.get(&y).map(|&z| (x, z)))
            .collect();
        TreeProjection { node_map }
    }
}

/// A set-valued presheaf over a label tree: a fiber of states per stage and a
/// restriction function per edge, mapping child-stage states to parent-stage
/// states.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Presheaf {
    pub base: LabelTree,
    pub fibers: Vec<Vec<String>>,
    /// For each non-root node, the restriction along its in-edge:
    /// `restriction[child][i]` is the index in `fibers[parent]` of the image of
    /// `fibers[child][i]`.
    pub restriction: BTreeMap<usize, Vec<usize>>,
}

impl Presheaf {
    pub fn new(
        base: LabelTree,
        fibers: Vec<Vec<String>>,
        restriction: BTreeMap<usize, Vec<usize>>,
    ) -> Result<Self> {
        if fibers.len() != base.node_count() {
            return Err(Error::Schema("one fiber per stage required".into()));
        }
        for child in base.edges() {
            let parent = base.parent(child).unwrap();
            let r = restriction
                .get(&child)
                .ok_or_else(|| Error::Schema(format!("missing restriction into {}", base.node_id(child))))?;
            if r.len() != fibers[child].len() || r.iter().any(|&i| i >= fibers[parent].len()) {
                return Err(Error::Schema(format!(
                    "restriction into {} is not a function between the fibers",
                    base.node_id(child)
                )));
            }
        }
        Ok(Presheaf {
            base,
            fibers,
            restriction,
        })
    }

    /// A stable serialization of the total space: states are compared by their
    /// unfolding (stage plus the sorted forms of their upward expansions), so
    /// two presheaves over the same base are isomorphic iff the forms match.
    pub fn canonical_form(&self) -> String {
        fn form(p: &Presheaf, node: usize, state: usize) -> String {
            let mut parts: Vec<String> = p
                .base
                .children(node)
                .into_iter()
                .flat_map(|child| {
                    let r = &p.restriction[&child];
                    (0..p.fibers[child].len())
                        .filter(|&t| r[t] == state)
                        .map(move |t| {
                            format!("{}:{}", p.base.edge_label(child).unwrap(), form(p, child, t))
                        })
                })
                .collect();
            parts.sort();
            format!("{}({})", p.base.node_id(node), parts.join(","))
        }
        let root = self.base.root();
        let mut roots: Vec<String> = (0..self.fibers[root].len())
            .map(|s| form(self, root, s))
            .collect();
        roots.sort();
        roots.join(";")
    }

    pub fn isomorphic(&self, other: &Presheaf) -> bool {
        self.base == other.base && self.canonical_form() == other.canonical_form()
    }
}

/// A total monotone map presented as a bundle over a label tree.
#[derive(Debug, Clone)]
pub struct Bundle {
    pub total: Poset,
    pub base: LabelTree,
    /// Index into the base's nodes for every element of the total space.
    pub projection: Vec<usize>,
}

impl Bundle {
    pub fn as_monotone(&self) -> MonotoneMap {
        MonotoneMap {
            source: self.total.clone(),
            target: self.base.as_poset(),
            map: self.projection.iter().map(|&i| Some(i)).collect(),
        }
    }

    pub fn is_fibration(&self) -> bool {
        is_fibration(&self.as_monotone())
    }
}

/// The dependent-sum construction: pairs `(stage, state)` ordered by
/// restriction, projected onto the base.
pub fn presheaf_to_fibration(p: &Presheaf) -> Bundle {
    let mut elems = Vec::new();
    let mut stage_of = Vec::new();
    let mut index: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for node in p.base.nodes() {
        for (s, name) in p.fibers[node].iter().enumerate() {
            index.insert((node, s), elems.len());
            elems.push(format!("{}/{}", p.base.node_id(node), name));
            stage_of.push(node);
        }
    }
    let n = elems.len();
    let mut leq = vec![vec![false; n]; n];
    // (x, s) <= (y, t) iff x <= y and s is the restriction of t along the path
    for (&(y, t), &j) in &index {
        let mut node = y;
        let mut state = t;
        loop {
            leq[index[&(node, state)]][j] = true;
            match p.base.parent(node) {
                Some(parent) => {
                    state = p.restriction[&node][state];
                    node = parent;
                }
                None => break,
            }
        }
    }
    Bundle {
        total: Poset { elems, leq },
        base: p.base.clone(),
        projection: stage_of,
    }
}

/// Reads fibers and unique lifts back off a fibration.
pub fn fibration_to_presheaf(b: &Bundle) -> Result<Presheaf> {
    if !b.is_fibration() {
        return Err(Error::NotAFibration("unique-lift condition fails".into()));
    }
    let fiber_elems: Vec<Vec<usize>> = b
        .base
        .nodes()
        .map(|node| {
            (0..b.total.len())
                .filter(|&s| b.projection[s] == node)
                .collect()
        })
        .collect();
    let fibers: Vec<Vec<String>> = fiber_elems
        .iter()
        .map(|f| f.iter().map(|&s| b.total.elems[s].clone()).collect())
        .collect();
    let mut restriction = BTreeMap::new();
    for child in b.base.edges() {
        let parent = b.base.parent(child).unwrap();
        let mut r = Vec::with_capacity(fiber_elems[child].len());
        for &t in &fiber_elems[child] {
            let lift = fiber_elems[parent]
                .iter()
                .position(|&s| b.total.leq[s][t])
                .expect("fibration provides the lift");
            r.push(lift);
        }
        restriction.insert(child, r);
    }
    Presheaf::new(b.base.clone(), fibers, restriction)
}
