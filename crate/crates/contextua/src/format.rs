//! JSON wire formats: empirical models, scenarios, weighted relations, full
//! stochastic models, and machine-readable verdicts.
//!
//! Rationals travel as `"p/q"` or `"n"` strings, booleans as JSON booleans.
//! Relation arrows without a `"w"` field stay in the relation with weight zero.

use std::collections::{BTreeMap, BTreeSet};

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::presheaf::{NamedProjection, RRelationalPresheaf, StateRef, StochasticModel};
use crate::rel::{Elem, FinSet, RRelation};
use crate::scenario::{Assignment, EmpiricalModel, MeasurementScenario};
use crate::semiring::{Boolean, Distribution, NonNegRational, Semiring, SignedRational};
use crate::tree::{LabelTree, TreeBuilder, TreeProjection};

fn schema_err(e: serde_json::Error) -> Error {
    Error::Schema(e.to_string())
}

// ---------------------------------------------------------------------------
// scenarios and empirical models
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
struct WireScenario {
    measurements: IndexMap<String, Vec<String>>,
    contexts: Vec<Vec<String>>,
}

#[derive(Debug, Serialize, Deserialize)]
struct WireEmpirical {
    measurements: IndexMap<String, Vec<String>>,
    contexts: Vec<Vec<String>>,
    tables: BTreeMap<String, BTreeMap<String, serde_json::Value>>,
}

pub fn parse_scenario(text: &str) -> Result<MeasurementScenario> {
    let wire: WireScenario = serde_json::from_str(text).map_err(schema_err)?;
    MeasurementScenario::new(wire.measurements, wire.contexts)
}

pub fn parse_empirical<W: Semiring>(text: &str) -> Result<EmpiricalModel<W>> {
    let wire: WireEmpirical = serde_json::from_str(text).map_err(schema_err)?;
    let scenario = MeasurementScenario::new(wire.measurements, wire.contexts)?;
    let mut tables = Vec::new();
    for ctx in scenario.maximal_contexts() {
        let key = ctx.join(",");
        let raw = wire
            .tables
            .get(&key)
            .ok_or_else(|| Error::Schema(format!("missing table for context {key}")))?;
        let mut weights: BTreeMap<Assignment, W> = scenario
            .joint_outcomes(ctx)
            .into_iter()
            .map(|a| (a, W::zero()))
            .collect();
        for (outcome_csv, value) in raw {
            let a = Assignment::from_csv(ctx, outcome_csv)?;
            if !weights.contains_key(&a) {
                return Err(Error::Schema(format!(
                    "outcome {outcome_csv} is not a joint outcome of {key}"
                )));
            }
            weights.insert(a, W::from_json(value)?);
        }
        tables.push(Distribution::make(weights)?);
    }
    EmpiricalModel::new(scenario, tables)
}

pub fn parse_empirical_rational(text: &str) -> Result<EmpiricalModel<NonNegRational>> {
    parse_empirical(text)
}

pub fn parse_empirical_bool(text: &str) -> Result<EmpiricalModel<Boolean>> {
    parse_empirical(text)
}

pub fn parse_empirical_signed(text: &str) -> Result<EmpiricalModel<SignedRational>> {
    parse_empirical(text)
}

pub fn emit_empirical<W: Semiring>(model: &EmpiricalModel<W>) -> String {
    let scenario = &model.scenario;
    let tables = scenario
        .maximal_contexts()
        .iter()
        .enumerate()
        .map(|(i, ctx)| {
            let rows = scenario
                .joint_outcomes(ctx)
                .into_iter()
                .map(|a| {
                    let key = a.csv(ctx);
                    (key, model.tables[i].weight(&a).to_json())
                })
                .collect();
            (ctx.join(","), rows)
        })
        .collect();
    let wire = WireEmpirical {
        measurements: scenario.measurements().clone(),
        contexts: scenario.maximal_contexts().to_vec(),
        tables,
    };
    serde_json::to_string_pretty(&wire).expect("wire structs serialize")
}

// ---------------------------------------------------------------------------
// weighted relations
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
pub struct WireArrow {
    pub src: String,
    pub dst: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub w: Option<serde_json::Value>,
}

#[derive(Debug, Serialize, Deserialize)]
struct WireRelation {
    from: Vec<String>,
    to: Vec<String>,
    arrows: Vec<WireArrow>,
}

pub fn parse_rrelation<W: Semiring>(text: &str) -> Result<RRelation<W>> {
    let wire: WireRelation = serde_json::from_str(text).map_err(schema_err)?;
    rrelation_from_arrows(
        wire.from.into_iter().collect(),
        wire.to.into_iter().collect(),
        &wire.arrows,
    )
}

pub fn rrelation_from_arrows<W: Semiring>(
    from: FinSet,
    to: FinSet,
    arrows: &[WireArrow],
) -> Result<RRelation<W>> {
    let mut rel: BTreeMap<Elem, FinSet> = BTreeMap::new();
    let mut weights: BTreeMap<Elem, BTreeMap<Elem, W>> = BTreeMap::new();
    for arrow in arrows {
        rel.entry(arrow.src.clone())
            .or_default()
            .insert(arrow.dst.clone());
        let w = match &arrow.w {
            Some(v) => W::from_json(v)?,
            None => W::zero(),
        };
        weights
            .entry(arrow.src.clone())
            .or_default()
            .insert(arrow.dst.clone(), w);
    }
    RRelation::new(from, to, rel, weights)
}

pub fn emit_rrelation<W: Semiring>(r: &RRelation<W>) -> String {
    let arrows = relation_arrows(r);
    let wire = WireRelation {
        from: r.from.iter().cloned().collect(),
        to: r.to.iter().cloned().collect(),
        arrows,
    };
    serde_json::to_string_pretty(&wire).expect("wire structs serialize")
}

fn relation_arrows<W: Semiring>(r: &RRelation<W>) -> Vec<WireArrow> {
    let mut arrows = Vec::new();
    for (src, image) in &r.rel {
        for dst in image {
            let w = r.dist(src).weight(dst);
            arrows.push(WireArrow {
                src: src.clone(),
                dst: dst.clone(),
                w: (!w.is_zero()).then(|| w.to_json()),
            });
        }
    }
    arrows
}

// ---------------------------------------------------------------------------
// stochastic models
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
struct WireTreeEdge {
    from: String,
    to: String,
    label: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct WireTree {
    root: String,
    edges: Vec<WireTreeEdge>,
}

#[derive(Debug, Serialize, Deserialize)]
struct WireProjection {
    from_tree: String,
    to_tree: String,
    node_map: BTreeMap<String, String>,
}

#[derive(Debug, Serialize, Deserialize)]
struct WireModelEdge {
    label: String,
    arrows: Vec<WireArrow>,
}

#[derive(Debug, Serialize, Deserialize)]
struct WireModel {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    semiring: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    initial: Option<String>,
    trees: IndexMap<String, WireTree>,
    #[serde(default)]
    projections: Vec<WireProjection>,
    fibers: BTreeMap<String, Vec<String>>,
    edges: Vec<WireModelEdge>,
    #[serde(default)]
    valuation: BTreeMap<String, Vec<String>>,
}

fn tree_from_wire(wire: &WireTree) -> Result<LabelTree> {
    let mut b = TreeBuilder::new(&wire.root);
    for e in &wire.edges {
        b.add_edge(&e.from, &e.to, &e.label)?;
    }
    b.finish()
}

fn tree_to_wire(tree: &LabelTree) -> WireTree {
    let edges = tree
        .edges()
        .map(|child| WireTreeEdge {
            from: tree.node_id(tree.parent(child).unwrap()).to_string(),
            to: tree.node_id(child).to_string(),
            label: tree.edge_label(child).unwrap().to_string(),
        })
        .collect();
    WireTree {
        root: tree.node_id(tree.root()).to_string(),
        edges,
    }
}

pub fn parse_model<W: Semiring>(text: &str) -> Result<StochasticModel<W>> {
    let wire: WireModel = serde_json::from_str(text).map_err(schema_err)?;
    if let Some(s) = &wire.semiring {
        if s != W::NAME {
            return Err(Error::Schema(format!(
                "model file is for semiring {s}, requested {}",
                W::NAME
            )));
        }
    }
    let mut trees = IndexMap::new();
    for (name, wt) in &wire.trees {
        trees.insert(name.clone(), tree_from_wire(wt)?);
    }
    let initial_name = wire.initial.clone().unwrap_or_else(|| "L0".to_string());
    let initial = trees
        .get(&initial_name)
        .ok_or_else(|| Error::Schema(format!("initial tree {initial_name} missing")))?
        .clone();

    let mut fibers: Vec<FinSet> = vec![FinSet::new(); initial.node_count()];
    for (node, states) in &wire.fibers {
        let idx = initial.index_of(node)?;
        fibers[idx] = states.iter().cloned().collect();
    }

    // edges are addressed by label, so initial-tree labels must be unique
    let mut by_label: BTreeMap<String, usize> = BTreeMap::new();
    for child in initial.edges() {
        let label = initial.edge_label(child).unwrap().to_string();
        if by_label.insert(label.clone(), child).is_some() {
            return Err(Error::Schema(format!(
                "initial tree repeats edge label {label}; edges cannot be addressed"
            )));
        }
    }
    let mut edges: BTreeMap<usize, RRelation<W>> = BTreeMap::new();
    for we in &wire.edges {
        let child = *by_label
            .get(&we.label)
            .ok_or_else(|| Error::Schema(format!("edge label {} not in the initial tree", we.label)))?;
        let parent = initial.parent(child).unwrap();
        edges.insert(
            child,
            rrelation_from_arrows(fibers[parent].clone(), fibers[child].clone(), &we.arrows)?,
        );
    }
    let system = RRelationalPresheaf::new(initial.clone(), fibers.clone(), edges)?;

    let projections = wire
        .projections
        .iter()
        .map(|wp| {
            let from = trees
                .get(&wp.from_tree)
                .ok_or_else(|| Error::Schema(format!("unknown tree {}", wp.from_tree)))?;
            let to = trees
                .get(&wp.to_tree)
                .ok_or_else(|| Error::Schema(format!("unknown tree {}", wp.to_tree)))?;
            Ok(NamedProjection {
                from: wp.from_tree.clone(),
                to: wp.to_tree.clone(),
                proj: TreeProjection::from_ids(from, to, &wp.node_map)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut valuation: BTreeMap<String, BTreeSet<StateRef>> = BTreeMap::new();
    for (letter, states) in &wire.valuation {
        let mut set = BTreeSet::new();
        for name in states {
            set.insert(resolve_state(&initial, &fibers, name)?);
        }
        valuation.insert(letter.clone(), set);
    }

    StochasticModel::new(trees, &initial_name, projections, system, valuation)
}

fn resolve_state(tree: &LabelTree, fibers: &[FinSet], name: &str) -> Result<StateRef> {
    if let Some((node, state)) = name.split_once('/') {
        let idx = tree.index_of(node)?;
        if fibers[idx].contains(state) {
            return Ok(StateRef::new(idx, state));
        }
        return Err(Error::Schema(format!("no state {state} at stage {node}")));
    }
    let hits: Vec<StateRef> = tree
        .nodes()
        .filter(|&n| fibers[n].contains(name))
        .map(|n| StateRef::new(n, name))
        .collect();
    match hits.len() {
        1 => Ok(hits.into_iter().next().unwrap()),
        0 => Err(Error::Schema(format!("unknown state {name}"))),
        _ => Err(Error::Schema(format!(
            "state {name} is ambiguous; qualify it as node/state"
        ))),
    }
}

pub fn emit_model<W: Semiring>(model: &StochasticModel<W>) -> String {
    let initial = model.initial_tree();
    let trees = model
        .trees
        .iter()
        .map(|(name, t)| (name.clone(), tree_to_wire(t)))
        .collect();
    let projections = model
        .projections
        .iter()
        .map(|p| {
            let from = &model.trees[&p.from];
            let to = &model.trees[&p.to];
            WireProjection {
                from_tree: p.from.clone(),
                to_tree: p.to.clone(),
                node_map: p
                    .proj
                    .node_map
                    .iter()
                    .map(|(&x, &y)| (from.node_id(x).to_string(), to.node_id(y).to_string()))
                    .collect(),
            }
        })
        .collect();
    let fibers = initial
        .nodes()
        .map(|n| {
            (
                initial.node_id(n).to_string(),
                model.system.fibers[n].iter().cloned().collect(),
            )
        })
        .collect();
    let edges = initial
        .edges()
        .map(|child| WireModelEdge {
            label: initial.edge_label(child).unwrap().to_string(),
            arrows: relation_arrows(&model.system.edges[&child]),
        })
        .collect();
    let valuation = model
        .valuation
        .iter()
        .map(|(letter, states)| {
            let names = states
                .iter()
                .map(|s| format!("{}/{}", initial.node_id(s.stage), s.state))
                .collect();
            (letter.clone(), names)
        })
        .collect();
    let wire = WireModel {
        semiring: Some(W::NAME.to_string()),
        initial: Some(model.initial.clone()),
        trees,
        projections,
        fibers,
        edges,
        valuation,
    };
    serde_json::to_string_pretty(&wire).expect("wire structs serialize")
}

// ---------------------------------------------------------------------------
// verdicts
// ---------------------------------------------------------------------------

/// The machine-readable verdict emitted by the decision commands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerdictWire {
    pub semiring: String,
    pub no_signalling: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub contextual: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strongly_contextual: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness: Option<serde_json::Value>,
}

pub fn emit_verdict(v: &VerdictWire) -> String {
    serde_json::to_string_pretty(v).expect("wire structs serialize")
}

pub fn parse_verdict(text: &str) -> Result<VerdictWire> {
    serde_json::from_str(text).map_err(schema_err)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::check_no_signalling;

    #[test]
    fn empirical_roundtrip_preserves_tables() {
        let model = crate::scenario::canonical_pr_box();
        let text = emit_empirical(&model);
        let back = parse_empirical_rational(&text).unwrap();
        assert!(back.agrees(&model));
    }

    #[test]
    fn shipped_boxes_parse_and_validate() {
        assert!(check_no_signalling(&crate::scenario::canonical_pr_box()).holds);
        assert!(check_no_signalling(&crate::scenario::canonical_hardy_table()).holds);
        assert!(check_no_signalling(&crate::scenario::product_demo_box()).holds);
        let _ = crate::scenario::canonical_hardy_supports();
    }

    #[test]
    fn model_roundtrip_preserves_weights() {
        let model =
            crate::scenario::empirical_to_model(&crate::scenario::canonical_pr_box(), true).unwrap();
        let text = emit_model(&model);
        let back: StochasticModel<NonNegRational> = parse_model(&text).unwrap();
        assert!(back.system.agrees(&model.system));
        assert_eq!(back.valuation, model.valuation);
    }

    #[test]
    fn omitted_arrow_weight_is_zero_but_related() {
        let text = r#"{
            "from": ["s"],
            "to": ["u", "v"],
            "arrows": [
                {"src": "s", "dst": "u", "w": "1"},
                {"src": "s", "dst": "v"}
            ]
        }"#;
        let r: RRelation<NonNegRational> = parse_rrelation(text).unwrap();
        assert!(r.image("s").contains("v"));
        assert!(r.dist("s").weight(&"v".into()).is_zero());
    }

    #[test]
    fn verdict_roundtrips() {
        let v = VerdictWire {
            semiring: "nonneg-rational".into(),
            no_signalling: true,
            contextual: Some(true),
            strongly_contextual: Some(false),
            witness: Some(serde_json::json!({"assignment": "1,0,1,0"})),
        };
        let text = emit_verdict(&v);
        assert_eq!(parse_verdict(&text).unwrap(), v);
    }
}
