//! Functors from label trees into weighted relations: relational presheaves,
//! their weighted refinements, change of base, fibered products of scenarios,
//! and the stochastic models the logic is evaluated on.
//!
//! Functor data is stored per edge only; composites along paths are computed on
//! demand, which is lossless over tree bases and keeps functoriality by
//! construction.

use std::collections::{BTreeMap, BTreeSet};

use indexmap::IndexMap;

use crate::error::{Error, Result};
use crate::rel::{rmap_compose, rrel_compose, Elem, FinSet, RMap, RRelation};
use crate::semiring::{Distribution, Semiring};
use crate::tree::{is_fibration, LabelTree, MonotoneMap, TreeProjection};

/// A covariant functor from a label tree into sets-and-relations: one state set
/// per stage and one entire relation per edge.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RelationalPresheaf {
    pub base: LabelTree,
    pub fibers: Vec<FinSet>,
    /// Keyed by the child node of each edge; relates parent-fiber states to
    /// child-fiber states.
    pub edges: BTreeMap<usize, BTreeMap<Elem, FinSet>>,
}

impl RelationalPresheaf {
    pub fn new(
        base: LabelTree,
        fibers: Vec<FinSet>,
        edges: BTreeMap<usize, BTreeMap<Elem, FinSet>>,
    ) -> Result<Self> {
        if fibers.len() != base.node_count() {
            return Err(Error::Schema("one fiber per stage required".into()));
        }
        for child in base.edges() {
            let parent = base.parent(child).unwrap();
            let rel = edges
                .get(&child)
                .ok_or_else(|| Error::Schema(format!("missing relation into {}", base.node_id(child))))?;
            for s in &fibers[parent] {
                let image = rel.get(s).filter(|i| !i.is_empty());
                let image = image.ok_or_else(|| Error::NotEntire { src: s.clone() })?;
                if !image.iter().all(|t| fibers[child].contains(t)) {
                    return Err(Error::Schema(format!("relation into {} leaves the fiber", base.node_id(child))));
                }
            }
        }
        Ok(RelationalPresheaf { base, fibers, edges })
    }

    /// Relational composition along the unique path from `x` to `y`.
    pub fn eval_path(&self, x: usize, y: usize) -> Result<BTreeMap<Elem, FinSet>> {
        let path = self.base.path_between(x, y)?;
        let mut rel: BTreeMap<Elem, FinSet> = self.fibers[x]
            .iter()
            .map(|s| (s.clone(), FinSet::from([s.clone()])))
            .collect();
        for child in path {
            let step = &self.edges[&child];
            rel = rel
                .into_iter()
                .map(|(s, mid)| {
                    let mut image = FinSet::new();
                    for t in mid {
                        image.extend(step[&t].iter().cloned());
                    }
                    (s, image)
                })
                .collect();
        }
        Ok(rel)
    }
}

/// A covariant functor from a label tree into weighted relations.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RRelationalPresheaf<W: Semiring> {
    pub base: LabelTree,
    pub fibers: Vec<FinSet>,
    pub edges: BTreeMap<usize, RRelation<W>>,
}

impl<W: Semiring> RRelationalPresheaf<W> {
    pub fn new(
        base: LabelTree,
        fibers: Vec<FinSet>,
        edges: BTreeMap<usize, RRelation<W>>,
    ) -> Result<Self> {
        if fibers.len() != base.node_count() {
            return Err(Error::Schema("one fiber per stage required".into()));
        }
        for child in base.edges() {
            let parent = base.parent(child).unwrap();
            let r = edges
                .get(&child)
                .ok_or_else(|| Error::Schema(format!("missing edge weights into {}", base.node_id(child))))?;
            if r.from != fibers[parent] || r.to != fibers[child] {
                return Err(Error::Mismatch(format!(
                    "edge into {} does not connect the stage fibers",
                    base.node_id(child)
                )));
            }
        }
        Ok(RRelationalPresheaf { base, fibers, edges })
    }

    pub fn fiber(&self, node: usize) -> &FinSet {
        &self.fibers[node]
    }

    /// The underlying relational presheaf, forgetting weights.
    pub fn underlying(&self) -> RelationalPresheaf {
        let edges = self
            .edges
            .iter()
            .map(|(&child, r)| {
                let rel = r.rel.clone();
                (child, rel)
            })
            .collect();
        RelationalPresheaf::new(self.base.clone(), self.fibers.clone(), edges)
            .expect("weighted presheaves have valid underlying relations")
    }

    /// Weighted composition along the unique path from `x` to `y`; the identity
    /// relation when `x = y`.
    pub fn eval_path(&self, x: usize, y: usize) -> Result<RRelation<W>> {
        let path = self.base.path_between(x, y)?;
        self.eval_chain(x, &path)
    }

    /// Weighted composition along an explicit child chain starting at `x`.
    pub fn eval_chain(&self, x: usize, chain: &[usize]) -> Result<RRelation<W>> {
        let mut acc = RRelation::identity(&self.fibers[x]);
        for &child in chain {
            acc = rrel_compose(&acc, &self.edges[&child])?;
        }
        Ok(acc)
    }

    pub fn agrees(&self, other: &Self) -> bool {
        self.base == other.base
            && self.fibers == other.fibers
            && self.base.edges().all(|c| self.edges[&c].agrees(&other.edges[&c]))
    }
}

/// A contravariant functor into weighted maps: each edge carries a weighted map
/// whose underlying surjection is the presheaf restriction from the child fiber
/// onto the parent fiber.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RPresheaf<W: Semiring> {
    pub base: LabelTree,
    pub fibers: Vec<FinSet>,
    /// Keyed by child node; an [`RMap`] from the parent fiber to the child
    /// fiber (i.e. on a surjection child -> parent).
    pub edges: BTreeMap<usize, RMap<W>>,
}

impl<W: Semiring> RPresheaf<W> {
    pub fn new(base: LabelTree, fibers: Vec<FinSet>, edges: BTreeMap<usize, RMap<W>>) -> Result<Self> {
        for child in base.edges() {
            let parent = base.parent(child).unwrap();
            let m = edges
                .get(&child)
                .ok_or_else(|| Error::Schema(format!("missing weighted map into {}", base.node_id(child))))?;
            if m.from != fibers[parent] || m.to != fibers[child] {
                return Err(Error::Mismatch(format!(
                    "weighted map into {} does not connect the stage fibers",
                    base.node_id(child)
                )));
            }
        }
        Ok(RPresheaf { base, fibers, edges })
    }

    /// Flips every edge into a weighted relation, in one place.
    pub fn to_relational(&self) -> RRelationalPresheaf<W> {
        let edges = self
            .edges
            .iter()
            .map(|(&child, m)| (child, crate::rel::rmap_to_rrel(m)))
            .collect();
        RRelationalPresheaf::new(self.base.clone(), self.fibers.clone(), edges)
            .expect("edge-wise conversion preserves validity")
    }
}

/// Forgets the stages omitted by an embedding of label trees: fibers are taken
/// at image stages and each coarse edge evaluates the full path between the
/// images.
pub fn restrict_base<W: Semiring>(
    system: &RRelationalPresheaf<W>,
    coarse: &LabelTree,
    embedding: &BTreeMap<usize, usize>,
) -> Result<RRelationalPresheaf<W>> {
    // injective, total, root-to-root, order-preserving
    if embedding.len() != coarse.node_count() {
        return Err(Error::NotAnEmbedding("embedding must be total".into()));
    }
    let mut image_seen = BTreeSet::new();
    for (&x, &mx) in embedding {
        if mx >= system.base.node_count() {
            return Err(Error::NotAnEmbedding("image node out of range".into()));
        }
        if !image_seen.insert(mx) {
            return Err(Error::NotAnEmbedding("embedding must be injective".into()));
        }
        if x == coarse.root() && mx != system.base.root() {
            return Err(Error::NotAnEmbedding("root must map to root".into()));
        }
    }
    for (&x, &mx) in embedding {
        for (&y, &my) in embedding {
            if coarse.leq(x, y) && !system.base.leq(mx, my) {
                return Err(Error::NotAnEmbedding(format!(
                    "{} <= {} but images are incomparable",
                    coarse.node_id(x),
                    coarse.node_id(y)
                )));
            }
        }
    }
    let fibers: Vec<FinSet> = coarse
        .nodes()
        .map(|x| system.fibers[embedding[&x]].clone())
        .collect();
    let mut edges = BTreeMap::new();
    for child in coarse.edges() {
        let parent = coarse.parent(child).unwrap();
        edges.insert(child, system.eval_path(embedding[&parent], embedding[&child])?);
    }
    RRelationalPresheaf::new(coarse.clone(), fibers, edges)
}

fn product_node_id(a: &str, b: &str) -> String {
    format!("({a},{b})")
}

fn product_state(s: &str, t: &str) -> String {
    format!("{s},{t}")
}

/// One leg of a fibered product: the restriction of the global description to a
/// single party, at both the label and the state level.
#[derive(Debug, Clone)]
pub struct PartyRestriction {
    pub name: String,
    /// Product-tree node ids onto party-tree node ids.
    pub node_map: BTreeMap<Elem, Elem>,
    /// Qualified product states ("node/state") onto qualified party states.
    pub state_map: BTreeMap<Elem, Elem>,
    /// The party bundle projection: qualified party states onto party nodes.
    pub party_under: BTreeMap<Elem, Elem>,
    pub party_nodes: FinSet,
    pub party_states: FinSet,
}

#[derive(Debug, Clone)]
pub struct FiberedProduct<W: Semiring> {
    pub presheaf: RRelationalPresheaf<W>,
    pub parties: Vec<PartyRestriction>,
}

fn check_clock_leg(tree: &LabelTree, p: &TreeProjection, clock: &LabelTree, which: &str) -> Result<()> {
    if !clock.is_linear() {
        return Err(Error::NotSynchronized("clock must be a linear tree".into()));
    }
    if p.node_map.len() != tree.node_count() {
        return Err(Error::NotSynchronized(format!("{which} clock leg must be total")));
    }
    let m = MonotoneMap::new(
        tree.as_poset(),
        clock.as_poset(),
        tree.nodes().map(|n| p.apply(n)).collect(),
    )?;
    if !is_fibration(&m) {
        return Err(Error::NotSynchronized(format!("{which} clock leg is not a fibration")));
    }
    Ok(())
}

/// Synchronized product of two scenarios over a shared linear clock.
///
/// The base is the pullback of the trees, fibers are cartesian products of
/// synchronized fibers, and weights multiply, so the product by itself carries
/// no correlation between the parties. Returns the two restriction legs used by
/// the no-signalling analysis.
pub fn fibered_product<W: Semiring>(
    a: &RRelationalPresheaf<W>,
    p_a: &TreeProjection,
    b: &RRelationalPresheaf<W>,
    p_b: &TreeProjection,
    clock: &LabelTree,
    relabel: impl Fn(&str, &str) -> String,
) -> Result<FiberedProduct<W>> {
    check_clock_leg(&a.base, p_a, clock, "left")?;
    check_clock_leg(&b.base, p_b, clock, "right")?;

    // pullback nodes: synchronized pairs
    let mut pairs: Vec<(usize, usize)> = Vec::new();
    for u in a.base.nodes() {
        for v in b.base.nodes() {
            if p_a.apply(u) == p_b.apply(v) {
                pairs.push((u, v));
            }
        }
    }
    let mut builder = crate::tree::TreeBuilder::new(&product_node_id(
        a.base.node_id(a.base.root()),
        b.base.node_id(b.base.root()),
    ));
    for &(u, v) in &pairs {
        if u == a.base.root() {
            continue;
        }
        let (pu, pv) = (a.base.parent(u).unwrap(), b.base.parent(v).unwrap());
        let label = relabel(a.base.edge_label(u).unwrap(), b.base.edge_label(v).unwrap());
        builder.add_edge(
            &product_node_id(a.base.node_id(pu), b.base.node_id(pv)),
            &product_node_id(a.base.node_id(u), b.base.node_id(v)),
            &label,
        )?;
    }
    let base = builder.finish()?;

    let pair_at = |node: usize| -> (usize, usize) {
        let id = base.node_id(node);
        pairs
            .iter()
            .copied()
            .find(|&(u, v)| product_node_id(a.base.node_id(u), b.base.node_id(v)) == id)
            .expect("product node came from a synchronized pair")
    };

    let fibers: Vec<FinSet> = base
        .nodes()
        .map(|n| {
            let (u, v) = pair_at(n);
            let mut fs = FinSet::new();
            for s in &a.fibers[u] {
                for t in &b.fibers[v] {
                    fs.insert(product_state(s, t));
                }
            }
            fs
        })
        .collect();

    let mut edges = BTreeMap::new();
    for child in base.edges() {
        let parent = base.parent(child).unwrap();
        let (cu, cv) = pair_at(child);
        let ra = &a.edges[&cu];
        let rb = &b.edges[&cv];
        let mut rel = BTreeMap::new();
        let mut weights = BTreeMap::new();
        for s in &fibers[parent] {
            let (sa, sb) = s.split_once(',').expect("product state");
            let mut image = FinSet::new();
            for ta in ra.image(sa) {
                for tb in rb.image(sb) {
                    image.insert(product_state(ta, tb));
                }
            }
            let table: BTreeMap<Elem, W> = fibers[child]
                .iter()
                .map(|t| {
                    let (ta, tb) = t.split_once(',').expect("product state");
                    (
                        t.clone(),
                        ra.dist(sa).weight(&ta.to_string()).mul(&rb.dist(sb).weight(&tb.to_string())),
                    )
                })
                .collect();
            rel.insert(s.clone(), image);
            weights.insert(s.clone(), table);
        }
        edges.insert(child, RRelation::new(fibers[parent].clone(), fibers[child].clone(), rel, weights)?);
    }
    let presheaf = RRelationalPresheaf::new(base.clone(), fibers.clone(), edges)?;

    let mut parties = Vec::new();
    for (name, side, side_idx) in [("left", a, 0usize), ("right", b, 1usize)] {
        let mut node_map = BTreeMap::new();
        let mut state_map = BTreeMap::new();
        let mut party_under = BTreeMap::new();
        let mut party_states = FinSet::new();
        for n in base.nodes() {
            let (u, v) = pair_at(n);
            let side_node = if side_idx == 0 { u } else { v };
            let side_id = side.base.node_id(side_node).to_string();
            node_map.insert(base.node_id(n).to_string(), side_id.clone());
            for s in &fibers[n] {
                let (sa, sb) = s.split_once(',').expect("product state");
                let side_state = if side_idx == 0 { sa } else { sb };
                let qualified = format!("{}/{}", side_id, side_state);
                state_map.insert(format!("{}/{}", base.node_id(n), s), qualified.clone());
                party_under.insert(qualified.clone(), side_id.clone());
                party_states.insert(qualified);
            }
        }
        parties.push(PartyRestriction {
            name: name.to_string(),
            node_map,
            state_map,
            party_under,
            party_nodes: side.base.nodes().map(|n| side.base.node_id(n).to_string()).collect(),
            party_states,
        });
    }
    Ok(FiberedProduct { presheaf, parties })
}

/// The vertical form of a weighted presheaf with a single root state: a
/// weighted map from base stages to qualified states, whose fiber at a stage is
/// the root-to-stage path evaluation.
#[derive(Debug, Clone)]
pub struct WeightedBundle<W: Semiring> {
    pub base: LabelTree,
    pub rmap: RMap<W>,
}

pub fn qualify(node_id: &str, state: &str) -> String {
    format!("{node_id}/{state}")
}

pub fn vertical_bundle<W: Semiring>(p: &RRelationalPresheaf<W>) -> Result<WeightedBundle<W>> {
    let root = p.base.root();
    if p.fibers[root].len() != 1 {
        return Err(Error::Schema(
            "vertical form requires a single root state".into(),
        ));
    }
    let root_state = p.fibers[root].iter().next().unwrap().clone();
    let from: FinSet = p.base.nodes().map(|n| p.base.node_id(n).to_string()).collect();
    let mut to = FinSet::new();
    let mut under = BTreeMap::new();
    let mut fibers = BTreeMap::new();
    for n in p.base.nodes() {
        let id = p.base.node_id(n).to_string();
        let reached = p.eval_path(root, n)?;
        let weights: BTreeMap<Elem, W> = p.fibers[n]
            .iter()
            .map(|s| (qualify(&id, s), reached.dist(&root_state).weight(s)))
            .collect();
        for s in weights.keys() {
            to.insert(s.clone());
            under.insert(s.clone(), id.clone());
        }
        fibers.insert(id.clone(), Distribution::make(weights)?);
    }
    Ok(WeightedBundle {
        base: p.base.clone(),
        rmap: RMap::new(from, to, under, fibers)?,
    })
}

/// Internalizes the external choices of `p` into the system: composes the
/// bundle with explicitly supplied weights on the choice fibers of `p`.
///
/// The choice weights are required rather than defaulted, because the analysis
/// of no-signalling quantifies over all of them.
pub fn internalize<W: Semiring>(
    bundle: &WeightedBundle<W>,
    p: &TreeProjection,
    target: &LabelTree,
    choice_weights: &BTreeMap<Elem, BTreeMap<Elem, W>>,
) -> Result<WeightedBundle<W>> {
    if p.node_map.len() != bundle.base.node_count() {
        return Err(Error::MissingWeights("projection must be total for internalization".into()));
    }
    let from: FinSet = target.nodes().map(|n| target.node_id(n).to_string()).collect();
    let to: FinSet = bundle.base.nodes().map(|n| bundle.base.node_id(n).to_string()).collect();
    let under: BTreeMap<Elem, Elem> = bundle
        .base
        .nodes()
        .map(|n| {
            let img = p.apply(n).expect("total projection");
            (bundle.base.node_id(n).to_string(), target.node_id(img).to_string())
        })
        .collect();
    let mut fibers = BTreeMap::new();
    for t in &from {
        let fiber: FinSet = under
            .iter()
            .filter(|(_, v)| *v == t)
            .map(|(u, _)| u.clone())
            .collect();
        let supplied = choice_weights
            .get(t)
            .ok_or_else(|| Error::MissingWeights(t.clone()))?;
        if !supplied.keys().all(|u| fiber.contains(u)) {
            return Err(Error::MissingWeights(format!("weights at {t} leave the fiber")));
        }
        let weights: BTreeMap<Elem, W> = fiber
            .iter()
            .map(|u| (u.clone(), supplied.get(u).cloned().unwrap_or_else(W::zero)))
            .collect();
        fibers.insert(t.clone(), Distribution::make(weights)?);
    }
    let p_r = RMap::new(from, to, under, fibers)?;
    Ok(WeightedBundle {
        base: target.clone(),
        rmap: rmap_compose(&p_r, &bundle.rmap)?,
    })
}

/// A reference to a state of a stochastic model: a stage of the initial tree
/// together with a state name in its fiber.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct StateRef {
    pub stage: usize,
    pub state: Elem,
}

impl StateRef {
    pub fn new(stage: usize, state: impl Into<Elem>) -> Self {
        StateRef { stage, state: state.into() }
    }
}

#[derive(Debug, Clone)]
pub struct NamedProjection {
    pub from: String,
    pub to: String,
    pub proj: TreeProjection,
}

/// The semantic structure of the dynamic logic: a family of label trees with an
/// initial one, projections among them, a weighted relational presheaf over the
/// initial tree, and a propositional valuation over the disjoint union of
/// fibers.
#[derive(Debug, Clone)]
pub struct StochasticModel<W: Semiring> {
    pub trees: IndexMap<String, LabelTree>,
    pub initial: String,
    pub projections: Vec<NamedProjection>,
    pub system: RRelationalPresheaf<W>,
    pub valuation: BTreeMap<String, BTreeSet<StateRef>>,
}

impl<W: Semiring> StochasticModel<W> {
    pub fn new(
        trees: IndexMap<String, LabelTree>,
        initial: &str,
        projections: Vec<NamedProjection>,
        system: RRelationalPresheaf<W>,
        valuation: BTreeMap<String, BTreeSet<StateRef>>,
    ) -> Result<Self> {
        let model = StochasticModel {
            trees,
            initial: initial.to_string(),
            projections,
            system,
            valuation,
        };
        model.validate()?;
        Ok(model)
    }

    fn validate(&self) -> Result<()> {
        let initial = self
            .trees
            .get(&self.initial)
            .ok_or_else(|| Error::Schema(format!("initial tree {} not in the family", self.initial)))?;
        if self.system.base != *initial {
            return Err(Error::Schema("system must live over the initial tree".into()));
        }
        for p in &self.projections {
            if !self.trees.contains_key(&p.from) || !self.trees.contains_key(&p.to) {
                return Err(Error::Schema(format!("projection {} -> {} names unknown trees", p.from, p.to)));
            }
        }
        for name in self.trees.keys() {
            if name != &self.initial && self.effective_projection(name).is_none() {
                return Err(Error::Schema(format!(
                    "tree {name} is not the target of a projection chain from {}",
                    self.initial
                )));
            }
        }
        for (letter, states) in &self.valuation {
            for s in states {
                if s.stage >= self.system.fibers.len() || !self.system.fibers[s.stage].contains(&s.state) {
                    return Err(Error::Schema(format!("valuation of {letter} names an unknown state")));
                }
            }
        }
        Ok(())
    }

    pub fn initial_tree(&self) -> &LabelTree {
        &self.trees[&self.initial]
    }

    pub fn all_states(&self) -> Vec<StateRef> {
        let mut out = Vec::new();
        for n in self.initial_tree().nodes() {
            for s in &self.system.fibers[n] {
                out.push(StateRef::new(n, s.clone()));
            }
        }
        out
    }

    pub fn root_state(&self) -> Result<StateRef> {
        let root = self.initial_tree().root();
        let fiber = &self.system.fibers[root];
        if fiber.len() != 1 {
            return Err(Error::Schema("model has no unique root state".into()));
        }
        Ok(StateRef::new(root, fiber.iter().next().unwrap().clone()))
    }

    /// The composite projection from the initial tree onto `tree`, obtained by
    /// chaining declared projections; `None` if no chain exists.
    pub fn effective_projection(&self, tree: &str) -> Option<TreeProjection> {
        if tree == self.initial {
            let t = self.initial_tree();
            return Some(TreeProjection {
                node_map: t.nodes().map(|n| (n, n)).collect(),
            });
        }
        // breadth-first over the projection graph from the initial tree
        let mut frontier: Vec<(String, TreeProjection)> = vec![(
            self.initial.clone(),
            TreeProjection {
                node_map: self.initial_tree().nodes().map(|n| (n, n)).collect(),
            },
        )];
        let mut seen = BTreeSet::from([self.initial.clone()]);
        while let Some((at, acc)) = frontier.pop() {
            for p in &self.projections {
                if p.from == at && seen.insert(p.to.clone()) {
                    let next = acc.compose(&p.proj);
                    if p.to == tree {
                        return Some(next);
                    }
                    frontier.push((p.to.clone(), next));
                }
            }
        }
        None
    }

    /// True when some tree of the family contains the given consecutive label
    /// path.
    pub fn label_path_exists(&self, steps: &[String]) -> bool {
        self.trees.values().any(|t| !paths_with_labels(t, steps).is_empty())
    }

    /// All chains of initial-tree edges starting at `stage` that project, in
    /// some tree of the family, onto a consecutive path spelling `steps`.
    pub fn lift_label_paths(&self, stage: usize, steps: &[String]) -> Result<Vec<Vec<usize>>> {
        if !self.label_path_exists(steps) {
            return Err(Error::UnknownLabel(steps.join("\u{2218}")));
        }
        let initial = self.initial_tree();
        let mut lifted: BTreeSet<Vec<usize>> = BTreeSet::new();
        for name in self.trees.keys() {
            let Some(proj) = self.effective_projection(name) else {
                continue;
            };
            let tree = &self.trees[name];
            for (start, path) in paths_with_labels(tree, steps) {
                if proj.apply(stage) != Some(start) {
                    continue;
                }
                // walk the lift candidates stage by stage
                let mut partial: Vec<Vec<usize>> = vec![vec![]];
                for &target_child in &path {
                    let mut next = Vec::new();
                    for chain in &partial {
                        let at = *chain.last().unwrap_or(&stage);
                        for c in initial.children(at) {
                            if proj.apply(c) == Some(target_child) {
                                let mut longer = chain.clone();
                                longer.push(c);
                                next.push(longer);
                            }
                        }
                    }
                    partial = next;
                }
                lifted.extend(partial.into_iter().filter(|c| !c.is_empty()));
            }
        }
        Ok(lifted.into_iter().collect())
    }
}

/// All consecutive edge paths in `tree` spelling the given labels, returned as
/// `(start node, child chain)`.
fn paths_with_labels(tree: &LabelTree, steps: &[String]) -> Vec<(usize, Vec<usize>)> {
    if steps.is_empty() {
        return Vec::new();
    }
    let mut out = Vec::new();
    for start in tree.nodes() {
        let mut partial: Vec<Vec<usize>> = vec![vec![]];
        for step in steps {
            let mut next = Vec::new();
            for chain in &partial {
                let at = *chain.last().unwrap_or(&start);
                for c in tree.children(at) {
                    if tree.edge_label(c) == Some(step.as_str()) {
                        let mut longer = chain.clone();
                        longer.push(c);
                        next.push(longer);
                    }
                }
            }
            partial = next;
        }
        for chain in partial {
            if !chain.is_empty() {
                out.push((start, chain));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rel::set;
    use crate::semiring::{Boolean, NonNegRational};

    fn nn(p: i64, q: i64) -> NonNegRational {
        NonNegRational::ratio(p, q)
    }

    /// The two-stage hidden-variable shape: x -i-> y -ab-> z with weighted
    /// transitions matching the averaging example.
    fn chain_presheaf() -> RRelationalPresheaf<NonNegRational> {
        let base = LabelTree::new("x", &[("x", "y", "i"), ("y", "z", "ab")]).unwrap();
        let fib_x = set(&["s"]);
        let fib_y = set(&["t0", "t1"]);
        let fib_z = set(&["u0", "u1"]);
        let e_i = RRelation::new(
            fib_x.clone(),
            fib_y.clone(),
            BTreeMap::from([("s".into(), fib_y.clone())]),
            BTreeMap::from([(
                "s".into(),
                BTreeMap::from([("t0".into(), nn(1, 4)), ("t1".into(), nn(3, 4))]),
            )]),
        )
        .unwrap();
        let e_ab = RRelation::new(
            fib_y.clone(),
            fib_z.clone(),
            BTreeMap::from([
                ("t0".into(), set(&["u0"])),
                ("t1".into(), set(&["u0", "u1"])),
            ]),
            BTreeMap::from([
                ("t0".into(), BTreeMap::from([("u0".into(), nn(1, 1))])),
                (
                    "t1".into(),
                    BTreeMap::from([("u0".into(), nn(1, 3)), ("u1".into(), nn(2, 3))]),
                ),
            ]),
        )
        .unwrap();
        RRelationalPresheaf::new(base, vec![fib_x, fib_y, fib_z], BTreeMap::from([(1, e_i), (2, e_ab)]))
            .unwrap()
    }

    #[test]
    fn eval_path_on_equal_nodes_is_identity() {
        let p = chain_presheaf();
        let r = p.eval_path(0, 0).unwrap();
        assert!(r.agrees(&RRelation::identity(&p.fibers[0])));
    }

    #[test]
    fn eval_path_composes_the_two_edges() {
        let p = chain_presheaf();
        let direct = p.eval_path(0, 2).unwrap();
        let composed = rrel_compose(&p.edges[&1], &p.edges[&2]).unwrap();
        assert!(direct.agrees(&composed));
        // averaging: u0 gets 1/4 * 1 + 3/4 * 1/3 = 1/2
        assert_eq!(direct.dist("s").weight(&"u0".into()), nn(1, 2));
        assert_eq!(direct.dist("s").weight(&"u1".into()), nn(1, 2));
    }

    #[test]
    fn three_edge_folds_are_associative() {
        let base = LabelTree::new("a", &[("a", "b", "e1"), ("b", "c", "e2"), ("c", "d", "e3")]).unwrap();
        let fib: Vec<FinSet> = vec![set(&["0"]), set(&["0", "1"]), set(&["0", "1"]), set(&["0"])];
        let mk = |from: &FinSet, to: &FinSet| {
            let rel: BTreeMap<Elem, FinSet> = from.iter().map(|s| (s.clone(), to.clone())).collect();
            let weights: BTreeMap<Elem, BTreeMap<Elem, W0>> = from
                .iter()
                .map(|s| {
                    let n = to.len() as i64;
                    (s.clone(), to.iter().map(|t| (t.clone(), nn(1, n))).collect())
                })
                .collect();
            RRelation::new(from.clone(), to.clone(), rel, weights).unwrap()
        };
        type W0 = NonNegRational;
        let p = RRelationalPresheaf::new(
            base,
            fib.clone(),
            BTreeMap::from([
                (1, mk(&fib[0], &fib[1])),
                (2, mk(&fib[1], &fib[2])),
                (3, mk(&fib[2], &fib[3])),
            ]),
        )
        .unwrap();
        let left = rrel_compose(&rrel_compose(&p.edges[&1], &p.edges[&2]).unwrap(), &p.edges[&3]).unwrap();
        let right = rrel_compose(&p.edges[&1], &rrel_compose(&p.edges[&2], &p.edges[&3]).unwrap()).unwrap();
        assert!(left.agrees(&right));
        assert!(p.eval_path(0, 3).unwrap().agrees(&left));
    }

    #[test]
    fn restricting_along_the_identity_changes_nothing() {
        let p = chain_presheaf();
        let m: BTreeMap<usize, usize> = p.base.nodes().map(|n| (n, n)).collect();
        let q = restrict_base(&p, &p.base, &m).unwrap();
        assert!(q.agrees(&p));
    }

    #[test]
    fn forgetting_the_middle_stage_averages_over_it() {
        let p = chain_presheaf();
        let coarse = LabelTree::new("x", &[("x", "z", "ab")]).unwrap();
        let m = BTreeMap::from([(0usize, 0usize), (1usize, 2usize)]);
        let q = restrict_base(&p, &coarse, &m).unwrap();
        // sum_t d(i)(t) * d(ab)(u)
        assert_eq!(q.edges[&1].dist("s").weight(&"u0".into()), nn(1, 2));
        assert_eq!(q.edges[&1].dist("s").weight(&"u1".into()), nn(1, 2));
    }

    #[test]
    fn restriction_is_functorial() {
        let p = chain_presheaf();
        let mid = LabelTree::new("x", &[("x", "z", "ab")]).unwrap();
        let m1 = BTreeMap::from([(0usize, 0usize), (1usize, 2usize)]);
        let fine = restrict_base(&p, &mid, &m1).unwrap();
        let single = LabelTree::new("x", &[]).unwrap();
        let m2 = BTreeMap::from([(0usize, 0usize)]);
        let once = restrict_base(&fine, &single, &m2).unwrap();
        let both = restrict_base(&p, &single, &BTreeMap::from([(0usize, 0usize)])).unwrap();
        assert!(once.agrees(&both));
    }

    fn party(labels: (&str, &str), weights: [(i64, i64); 4]) -> RRelationalPresheaf<NonNegRational> {
        let base = LabelTree::new("x", &[("x", "y", labels.0), ("x", "z", labels.1)]).unwrap();
        let fx = set(&["s"]);
        let fo = set(&["0", "1"]);
        let mk = |w0: (i64, i64), w1: (i64, i64)| {
            RRelation::new(
                fx.clone(),
                fo.clone(),
                BTreeMap::from([("s".into(), fo.clone())]),
                BTreeMap::from([(
                    "s".into(),
                    BTreeMap::from([("0".into(), nn(w0.0, w0.1)), ("1".into(), nn(w1.0, w1.1))]),
                )]),
            )
            .unwrap()
        };
        let edges = BTreeMap::from([(1, mk(weights[0], weights[1])), (2, mk(weights[2], weights[3]))]);
        RRelationalPresheaf::new(base, vec![fx.clone(), fo.clone(), fo.clone()], edges).unwrap()
    }

    fn clock() -> LabelTree {
        LabelTree::new("c0", &[("c0", "c1", "tick")]).unwrap()
    }

    fn clock_leg(tree: &LabelTree, clock: &LabelTree) -> TreeProjection {
        let node_map = tree
            .nodes()
            .map(|n| (n, if n == tree.root() { clock.root() } else { 1 }))
            .collect();
        TreeProjection::new(tree, clock, node_map).unwrap()
    }

    #[test]
    fn product_of_two_binary_scenarios_has_four_contexts() {
        let a = party(("a", "a'"), [(1, 2), (1, 2), (1, 3), (2, 3)]);
        let b = party(("b", "b'"), [(1, 4), (3, 4), (1, 5), (4, 5)]);
        let ck = clock();
        let fp = fibered_product(&a, &clock_leg(&a.base, &ck), &b, &clock_leg(&b.base, &ck), &ck, |x, y| {
            format!("{x}{y}")
        })
        .unwrap();
        let base = &fp.presheaf.base;
        assert_eq!(base.node_count(), 5);
        let labels: BTreeSet<_> = base.edges().map(|c| base.edge_label(c).unwrap().to_string()).collect();
        assert_eq!(labels, set(&["ab", "ab'", "a'b", "a'b'"]));
        for child in base.edges() {
            assert_eq!(fp.presheaf.fibers[child].len(), 4);
        }
        // weights multiply: P(0,0 | ab) = 1/2 * 1/4 = 1/8
        let ab = base
            .edges()
            .find(|&c| base.edge_label(c) == Some("ab"))
            .unwrap();
        assert_eq!(
            fp.presheaf.edges[&ab].dist("s,s").weight(&"0,0".into()),
            nn(1, 8)
        );
    }

    #[test]
    fn product_with_the_trivial_party_is_isomorphic_to_the_input() {
        let a = party(("a", "a'"), [(1, 2), (1, 2), (1, 3), (2, 3)]);
        // one context, one outcome
        let unit_base = LabelTree::new("x", &[("x", "y", "")]).unwrap();
        let fo = set(&["*"]);
        let unit = RRelationalPresheaf::new(
            unit_base,
            vec![fo.clone(), fo.clone()],
            BTreeMap::from([(
                1,
                RRelation::new(
                    fo.clone(),
                    fo.clone(),
                    BTreeMap::from([("*".into(), fo.clone())]),
                    BTreeMap::from([("*".into(), BTreeMap::from([("*".into(), nn(1, 1))]))]),
                )
                .unwrap(),
            )]),
        )
        .unwrap();
        let ck = clock();
        let fp = fibered_product(
            &a,
            &clock_leg(&a.base, &ck),
            &unit,
            &clock_leg(&unit.base, &ck),
            &ck,
            |x, _| x.to_string(),
        )
        .unwrap();
        assert_eq!(fp.presheaf.base.node_count(), a.base.node_count());
        for child in fp.presheaf.base.edges() {
            let label = fp.presheaf.base.edge_label(child).unwrap().to_string();
            let orig_child = a
                .base
                .edges()
                .find(|&c| a.base.edge_label(c) == Some(label.as_str()))
                .unwrap();
            for s in &a.fibers[a.base.parent(orig_child).unwrap()] {
                for t in &a.fibers[orig_child] {
                    assert_eq!(
                        fp.presheaf.edges[&child]
                            .dist(&product_state(s, "*"))
                            .weight(&product_state(t, "*")),
                        a.edges[&orig_child].dist(s).weight(t)
                    );
                }
            }
        }
    }

    #[test]
    fn boolean_product_weights_are_support_conjunctions() {
        let mk_party = |l0: &str, l1: &str, supp: [bool; 2]| {
            let base = LabelTree::new("x", &[("x", "y", l0), ("x", "z", l1)]).unwrap();
            let fx = set(&["s"]);
            let fo = set(&["0", "1"]);
            let tbl: BTreeMap<Elem, Boolean> = [("0", supp[0]), ("1", supp[1])]
                .into_iter()
                .map(|(k, v)| (k.to_string(), Boolean(v)))
                .collect();
            let mk = || {
                RRelation::new(
                    fx.clone(),
                    fo.clone(),
                    BTreeMap::from([("s".into(), fo.clone())]),
                    BTreeMap::from([("s".into(), tbl.clone())]),
                )
                .unwrap()
            };
            RRelationalPresheaf::new(base, vec![fx.clone(), fo.clone(), fo.clone()], BTreeMap::from([(1, mk()), (2, mk())]))
                .unwrap()
        };
        let a = mk_party("a", "a'", [true, false]);
        let b = mk_party("b", "b'", [true, true]);
        let ck = clock();
        let fp = fibered_product(&a, &clock_leg(&a.base, &ck), &b, &clock_leg(&b.base, &ck), &ck, |x, y| {
            format!("{x}{y}")
        })
        .unwrap();
        for child in fp.presheaf.base.edges() {
            let d = fp.presheaf.edges[&child].dist("s,s");
            assert_eq!(d.weight(&"0,0".into()), Boolean(true));
            assert_eq!(d.weight(&"0,1".into()), Boolean(true));
            assert_eq!(d.weight(&"1,0".into()), Boolean(false));
            assert_eq!(d.weight(&"1,1".into()), Boolean(false));
        }
    }

    #[test]
    fn product_eval_path_is_the_product_of_eval_paths() {
        // two-step linear parties over a two-tick clock
        let mk = |l: [&str; 2]| {
            let base = LabelTree::new("x", &[("x", "y", l[0]), ("y", "z", l[1])]).unwrap();
            let f0 = set(&["s"]);
            let f1 = set(&["m0", "m1"]);
            let f2 = set(&["u0", "u1"]);
            let e1 = RRelation::new(
                f0.clone(),
                f1.clone(),
                BTreeMap::from([("s".into(), f1.clone())]),
                BTreeMap::from([(
                    "s".into(),
                    BTreeMap::from([("m0".into(), nn(1, 3)), ("m1".into(), nn(2, 3))]),
                )]),
            )
            .unwrap();
            let e2 = RRelation::new(
                f1.clone(),
                f2.clone(),
                BTreeMap::from([("m0".into(), set(&["u0"])), ("m1".into(), f2.clone())]),
                BTreeMap::from([
                    ("m0".into(), BTreeMap::from([("u0".into(), nn(1, 1))])),
                    (
                        "m1".into(),
                        BTreeMap::from([("u0".into(), nn(1, 2)), ("u1".into(), nn(1, 2))]),
                    ),
                ]),
            )
            .unwrap();
            RRelationalPresheaf::new(base, vec![f0, f1, f2], BTreeMap::from([(1, e1), (2, e2)])).unwrap()
        };
        let a = mk(["p", "q"]);
        let b = mk(["r", "w"]);
        let ck = LabelTree::new("c0", &[("c0", "c1", "t1"), ("c1", "c2", "t2")]).unwrap();
        let leg = |t: &LabelTree| {
            TreeProjection::new(t, &ck, t.nodes().map(|n| (n, t.depth(n))).collect()).unwrap()
        };
        let fp = fibered_product(&a, &leg(&a.base), &b, &leg(&b.base), &ck, |x, y| format!("{x}{y}")).unwrap();
        let full = fp.presheaf.eval_path(0, 2).unwrap();
        let ea = a.eval_path(0, 2).unwrap();
        let eb = b.eval_path(0, 2).unwrap();
        for ta in ea.to.iter() {
            for tb in eb.to.iter() {
                assert_eq!(
                    full.dist("s,s").weight(&product_state(ta, tb)),
                    ea.dist("s").weight(ta).mul(&eb.dist("s").weight(tb))
                );
            }
        }
    }

    #[test]
    fn internalize_with_identity_projection_is_neutral() {
        let p = chain_presheaf();
        let bundle = vertical_bundle(&p).unwrap();
        let ident = TreeProjection {
            node_map: p.base.nodes().map(|n| (n, n)).collect(),
        };
        let weights: BTreeMap<Elem, BTreeMap<Elem, NonNegRational>> = p
            .base
            .nodes()
            .map(|n| {
                let id = p.base.node_id(n).to_string();
                (id.clone(), BTreeMap::from([(id, nn(1, 1))]))
            })
            .collect();
        let out = internalize(&bundle, &ident, &p.base, &weights).unwrap();
        assert_eq!(out.rmap, bundle.rmap);
    }

    #[test]
    fn internalize_multiplies_choice_and_outcome_weights() {
        // Alice's external choice over a / a' composed into one bundle
        let a = party(("a", "a'"), [(1, 2), (1, 2), (1, 3), (2, 3)]);
        let bundle = vertical_bundle(&a).unwrap();
        let flat = LabelTree::new("r", &[]).unwrap();
        let proj = TreeProjection {
            node_map: a.base.nodes().map(|n| (n, 0)).collect(),
        };
        let weights = BTreeMap::from([(
            "r".to_string(),
            BTreeMap::from([
                ("x".to_string(), nn(0, 1)),
                ("y".to_string(), nn(1, 4)),
                ("z".to_string(), nn(3, 4)),
            ]),
        )]);
        let out = internalize(&bundle, &proj, &flat, &weights).unwrap();
        // P(choice a) * P(outcome 0 | a) = 1/4 * 1/2
        assert_eq!(out.rmap.fiber("r").weight(&qualify("y", "0")), nn(1, 8));
        assert_eq!(out.rmap.fiber("r").weight(&qualify("z", "1")), nn(1, 2));
    }

    #[test]
    fn lifted_label_paths_follow_projections() {
        // the four-context tree over the Alice tree
        let l0 = LabelTree::new(
            "x",
            &[("x", "z1", "ab"), ("x", "z2", "ab'"), ("x", "z3", "a'b"), ("x", "z4", "a'b'")],
        )
        .unwrap();
        let la = LabelTree::new("x", &[("x", "w1", "a"), ("x", "w2", "a'")]).unwrap();
        let proj = TreeProjection::from_ids(
            &l0,
            &la,
            &BTreeMap::from([
                ("x".into(), "x".into()),
                ("z1".into(), "w1".into()),
                ("z2".into(), "w1".into()),
                ("z3".into(), "w2".into()),
                ("z4".into(), "w2".into()),
            ]),
        )
        .unwrap();
        let fibers: Vec<FinSet> = l0.nodes().map(|_| set(&["*"])).collect();
        let edges = l0
            .edges()
            .map(|c| {
                (
                    c,
                    RRelation::<Boolean>::identity(&set(&["*"])),
                )
            })
            .collect();
        let system = RRelationalPresheaf::new(l0.clone(), fibers, edges).unwrap();
        let model = StochasticModel::new(
            IndexMap::from([("L0".to_string(), l0), ("L_a".to_string(), la)]),
            "L0",
            vec![NamedProjection {
                from: "L0".into(),
                to: "L_a".into(),
                proj,
            }],
            system,
            BTreeMap::new(),
        )
        .unwrap();
        let lifts = model.lift_label_paths(0, &["a".to_string()]).unwrap();
        assert_eq!(lifts.len(), 2); // ab and ab'
        let direct = model.lift_label_paths(0, &["a'b".to_string()]).unwrap();
        assert_eq!(direct.len(), 1);
        assert!(model.lift_label_paths(0, &["zz".to_string()]).is_err());
    }
}
