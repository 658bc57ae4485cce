//! Seeded generators for the property and acceptance suites.
//!
//! All generators draw from a ChaCha stream seeded by the `CONTEXTUA_SEED`
//! environment variable (a fixed default otherwise), so failures reproduce.

use std::collections::{BTreeMap, BTreeSet};

use indexmap::IndexMap;
use num_bigint::BigInt;
use num_rational::BigRational;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::logic::{CmpOp, Formula, LabelPath};
use crate::presheaf::{RRelationalPresheaf, StochasticModel};
use crate::rel::{Elem, FinSet, RMap, RRelation};
use crate::scenario::{
    empirical_to_model, Assignment, EmpiricalModel, MeasurementScenario,
};
use crate::semiring::{dist, Boolean, Distribution, NonNegRational, Semiring};
use crate::tree::{Bundle, LabelTree, Poset, Presheaf, TreeBuilder};

pub fn seeded_rng(salt: u64) -> ChaCha8Rng {
    let seed = std::env::var("CONTEXTUA_SEED")
        .ok()
        .and_then(|s| s.parse().ok())
        .unwrap_or(0xC0DEu64);
    ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9E37_79B9).wrapping_add(salt))
}

pub fn ratio(p: i64, q: i64) -> NonNegRational {
    NonNegRational::ratio(p, q)
}

/// A random exact partition of one into `n` nonnegative parts, some possibly
/// zero.
pub fn unit_partition(rng: &mut ChaCha8Rng, n: usize, allow_zero: bool) -> Vec<NonNegRational> {
    loop {
        let raw: Vec<i64> = (0..n)
            .map(|_| if allow_zero { rng.gen_range(0..5) } else { rng.gen_range(1..6) })
            .collect();
        let total: i64 = raw.iter().sum();
        if total == 0 {
            continue;
        }
        return raw.into_iter().map(|p| ratio(p, total)).collect();
    }
}

pub fn random_distribution(
    rng: &mut ChaCha8Rng,
    points: &[Elem],
) -> Distribution<Elem, NonNegRational> {
    let parts = unit_partition(rng, points.len(), true);
    dist(points.iter().cloned().zip(parts)).expect("partition sums to one")
}

pub fn random_bool_distribution(rng: &mut ChaCha8Rng, points: &[Elem]) -> Distribution<Elem, Boolean> {
    let mut weights: BTreeMap<Elem, Boolean> = points
        .iter()
        .map(|p| (p.clone(), Boolean(rng.gen_bool(0.5))))
        .collect();
    if weights.values().all(|w| !w.0) {
        let pick = points[rng.gen_range(0..points.len())].clone();
        weights.insert(pick, Boolean(true));
    }
    Distribution::make(weights).expect("some weight is true")
}

// ---------------------------------------------------------------------------
// trees, presheaves, bundles
// ---------------------------------------------------------------------------

pub fn random_label_tree(rng: &mut ChaCha8Rng, max_nodes: usize) -> LabelTree {
    let n = rng.gen_range(1..=max_nodes.max(1));
    let mut b = TreeBuilder::new("n0");
    for i in 1..n {
        let parent = rng.gen_range(0..i);
        b.add_edge(&format!("n{parent}"), &format!("n{i}"), &format!("e{i}"))
            .expect("fresh child");
    }
    b.finish().expect("generated trees are valid")
}

/// A rooted presheaf: the root fiber is a singleton, matching the setting in
/// which total spaces over trees are themselves trees.
pub fn random_presheaf(rng: &mut ChaCha8Rng, base: &LabelTree, max_fiber: usize) -> Presheaf {
    let fibers: Vec<Vec<String>> = base
        .nodes()
        .map(|n| {
            let k = if n == base.root() {
                1
            } else {
                rng.gen_range(1..=max_fiber.max(1))
            };
            (0..k).map(|i| format!("s{n}_{i}")).collect()
        })
        .collect();
    let mut restriction = BTreeMap::new();
    for child in base.edges() {
        let parent = base.parent(child).unwrap();
        let r: Vec<usize> = (0..fibers[child].len())
            .map(|_| rng.gen_range(0..fibers[parent].len()))
            .collect();
        restriction.insert(child, r);
    }
    Presheaf::new(base.clone(), fibers, restriction).expect("generated presheaves are valid")
}

/// A random presheaf `S` with a genuine natural transformation onto `target`:
/// each fiber covers the target fiber with random multiplicities, and
/// restrictions are chosen inside the commuting squares.
pub fn random_nat_trans_source(
    rng: &mut ChaCha8Rng,
    target: &Presheaf,
) -> (Presheaf, Vec<Vec<usize>>) {
    let base = &target.base;
    let mut fibers: Vec<Vec<String>> = Vec::new();
    // component[node][i] = index in target fiber
    let mut component: Vec<Vec<usize>> = Vec::new();
    for n in base.nodes() {
        let mut fiber = Vec::new();
        let mut comp = Vec::new();
        for (t, _) in target.fibers[n].iter().enumerate() {
            let mult = rng.gen_range(1..=2);
            for j in 0..mult {
                fiber.push(format!("c{n}_{t}_{j}"));
                comp.push(t);
            }
        }
        fibers.push(fiber);
        component.push(comp);
    }
    let mut restriction = BTreeMap::new();
    for child in base.edges() {
        let parent = base.parent(child).unwrap();
        let r: Vec<usize> = (0..fibers[child].len())
            .map(|i| {
                let target_image = target.restriction[&child][component[child][i]];
                let candidates: Vec<usize> = (0..fibers[parent].len())
                    .filter(|&p| component[parent][p] == target_image)
                    .collect();
                *candidates.choose(rng).expect("components are surjective")
            })
            .collect();
        restriction.insert(child, r);
    }
    let source = Presheaf::new(base.clone(), fibers, restriction).expect("construction commutes");
    (source, component)
}

/// A total monotone bundle over a random tree that provably violates the
/// unique-lift condition, either by skipping a stage or by duplicating one
/// along a chain.
pub fn broken_bundle(rng: &mut ChaCha8Rng) -> Bundle {
    let skip = rng.gen_bool(0.5);
    let extra = rng.gen_range(0..3u8);
    let base = if skip {
        LabelTree::new("r", &[("r", "m", "e"), ("m", "l", "f")]).unwrap()
    } else {
        LabelTree::new("r", &[("r", "m", "e"), ("m", "l", "f")]).unwrap()
    };
    let mut elems: Vec<String> = Vec::new();
    let mut parent: Vec<Option<usize>> = Vec::new();
    let mut projection: Vec<usize> = Vec::new();
    let push = |elems: &mut Vec<String>,
                    parent: &mut Vec<Option<usize>>,
                    projection: &mut Vec<usize>,
                    name: String,
                    par: Option<usize>,
                    stage: usize| {
        elems.push(name);
        parent.push(par);
        projection.push(stage);
        elems.len() - 1
    };
    let root = push(&mut elems, &mut parent, &mut projection, "t0".into(), None, 0);
    let defect_tail = if skip {
        // chain t0 -> t1 with the middle stage skipped entirely
        push(&mut elems, &mut parent, &mut projection, "t1".into(), Some(root), 2)
    } else {
        // chain t0 -> t1 -> t2 -> t3 with the middle stage doubled
        let a = push(&mut elems, &mut parent, &mut projection, "t1".into(), Some(root), 1);
        let b = push(&mut elems, &mut parent, &mut projection, "t2".into(), Some(a), 1);
        push(&mut elems, &mut parent, &mut projection, "t3".into(), Some(b), 2)
    };
    // decorate with harmless extra leaves so instances differ
    for k in 0..extra {
        push(
            &mut elems,
            &mut parent,
            &mut projection,
            format!("x{k}"),
            Some(defect_tail),
            2,
        );
    }
    // extras over the leaf stage must sit above a stage-1 point to be
    // harmless; in the skip case they inherit the defect, which is fine
    let n = elems.len();
    let mut leq = vec![vec![false; n]; n];
    for i in 0..n {
        let mut cur = i;
        loop {
            leq[cur][i] = true;
            match parent[cur] {
                Some(p) => cur = p,
                None => break,
            }
        }
    }
    Bundle {
        total: Poset { elems, leq },
        base,
        projection,
    }
}

// ---------------------------------------------------------------------------
// weighted relations
// ---------------------------------------------------------------------------

fn named(prefix: &str, n: usize) -> Vec<Elem> {
    (0..n).map(|i| format!("{prefix}{i}")).collect()
}

pub fn random_rrel_rational(
    rng: &mut ChaCha8Rng,
    from: &[Elem],
    to: &[Elem],
) -> RRelation<NonNegRational> {
    let mut rel = BTreeMap::new();
    let mut weights = BTreeMap::new();
    for s in from {
        let image: FinSet = loop {
            let picked: FinSet = to
                .iter()
                .filter(|_| rng.gen_bool(0.6))
                .cloned()
                .collect();
            if !picked.is_empty() {
                break picked;
            }
        };
        let carrier: Vec<Elem> = image.iter().cloned().collect();
        let d = random_distribution(rng, &carrier);
        rel.insert(s.clone(), image);
        weights.insert(s.clone(), d.weights().clone());
    }
    RRelation::new(from.iter().cloned().collect(), to.iter().cloned().collect(), rel, weights)
        .expect("generated relations are valid")
}

pub fn random_rrel_bool(rng: &mut ChaCha8Rng, from: &[Elem], to: &[Elem]) -> RRelation<Boolean> {
    let mut rel = BTreeMap::new();
    let mut weights = BTreeMap::new();
    for s in from {
        let image: FinSet = loop {
            let picked: FinSet = to.iter().filter(|_| rng.gen_bool(0.6)).cloned().collect();
            if !picked.is_empty() {
                break picked;
            }
        };
        let carrier: Vec<Elem> = image.iter().cloned().collect();
        let d = random_bool_distribution(rng, &carrier);
        rel.insert(s.clone(), image);
        weights.insert(s.clone(), d.weights().clone());
    }
    RRelation::new(from.iter().cloned().collect(), to.iter().cloned().collect(), rel, weights)
        .expect("generated relations are valid")
}

/// A composable pair (or triple) of random weighted relations over sets of the
/// given sizes.
pub fn random_rrel_chain_rational(
    rng: &mut ChaCha8Rng,
    sizes: &[usize],
) -> Vec<RRelation<NonNegRational>> {
    let sets: Vec<Vec<Elem>> = sizes
        .iter()
        .enumerate()
        .map(|(i, &n)| named(&format!("v{i}_"), n))
        .collect();
    sets.windows(2)
        .map(|w| random_rrel_rational(rng, &w[0], &w[1]))
        .collect()
}

pub fn random_rrel_chain_bool(rng: &mut ChaCha8Rng, sizes: &[usize]) -> Vec<RRelation<Boolean>> {
    let sets: Vec<Vec<Elem>> = sizes
        .iter()
        .enumerate()
        .map(|(i, &n)| named(&format!("v{i}_"), n))
        .collect();
    sets.windows(2)
        .map(|w| random_rrel_bool(rng, &w[0], &w[1]))
        .collect()
}

pub fn random_rmap_rational(rng: &mut ChaCha8Rng, from_n: usize, to_n: usize) -> RMap<NonNegRational> {
    assert!(to_n >= from_n);
    let from = named("x", from_n);
    let to = named("y", to_n);
    // surjective assignment: hit every source once, spread the rest
    let mut targets: Vec<usize> = (0..from_n).collect();
    while targets.len() < to_n {
        targets.push(rng.gen_range(0..from_n));
    }
    targets.shuffle(rng);
    let under: BTreeMap<Elem, Elem> = to
        .iter()
        .cloned()
        .zip(targets.iter().map(|&i| from[i].clone()))
        .collect();
    let fibers = from
        .iter()
        .map(|s| {
            let fiber: Vec<Elem> = under
                .iter()
                .filter(|(_, v)| *v == s)
                .map(|(u, _)| u.clone())
                .collect();
            (s.clone(), random_distribution(rng, &fiber))
        })
        .collect();
    RMap::new(from.into_iter().collect(), to.into_iter().collect(), under, fibers)
        .expect("generated maps are valid")
}

fn random_surjection_over(
    rng: &mut ChaCha8Rng,
    from: &[Elem],
    to: &[Elem],
) -> BTreeMap<Elem, Elem> {
    let mut targets: Vec<usize> = (0..from.len()).collect();
    while targets.len() < to.len() {
        targets.push(rng.gen_range(0..from.len()));
    }
    targets.shuffle(rng);
    to.iter()
        .cloned()
        .zip(targets.iter().map(|&i| from[i].clone()))
        .collect()
}

/// A chain of weighted maps with nondecreasing set sizes, composable in order.
pub fn random_rmap_chain_rational(
    rng: &mut ChaCha8Rng,
    sizes: &[usize],
) -> Vec<RMap<NonNegRational>> {
    let sets: Vec<Vec<Elem>> = sizes
        .iter()
        .enumerate()
        .map(|(i, &n)| named(&format!("w{i}_"), n))
        .collect();
    sets.windows(2)
        .map(|w| {
            assert!(w[1].len() >= w[0].len());
            let under = random_surjection_over(rng, &w[0], &w[1]);
            let fibers = w[0]
                .iter()
                .map(|s| {
                    let fiber: Vec<Elem> = under
                        .iter()
                        .filter(|(_, v)| *v == s)
                        .map(|(u, _)| u.clone())
                        .collect();
                    (s.clone(), random_distribution(rng, &fiber))
                })
                .collect();
            RMap::new(
                w[0].iter().cloned().collect(),
                w[1].iter().cloned().collect(),
                under,
                fibers,
            )
            .expect("generated maps are valid")
        })
        .collect()
}

pub fn random_rmap_chain_bool(rng: &mut ChaCha8Rng, sizes: &[usize]) -> Vec<RMap<Boolean>> {
    let sets: Vec<Vec<Elem>> = sizes
        .iter()
        .enumerate()
        .map(|(i, &n)| named(&format!("w{i}_"), n))
        .collect();
    sets.windows(2)
        .map(|w| {
            assert!(w[1].len() >= w[0].len());
            let under = random_surjection_over(rng, &w[0], &w[1]);
            let fibers = w[0]
                .iter()
                .map(|s| {
                    let fiber: Vec<Elem> = under
                        .iter()
                        .filter(|(_, v)| *v == s)
                        .map(|(u, _)| u.clone())
                        .collect();
                    (s.clone(), random_bool_distribution(rng, &fiber))
                })
                .collect();
            RMap::new(
                w[0].iter().cloned().collect(),
                w[1].iter().cloned().collect(),
                under,
                fibers,
            )
            .expect("generated maps are valid")
        })
        .collect()
}

// ---------------------------------------------------------------------------
// scenarios and models
// ---------------------------------------------------------------------------

fn binary(names: &[&str]) -> IndexMap<String, Vec<String>> {
    names
        .iter()
        .map(|n| (n.to_string(), vec!["0".to_string(), "1".to_string()]))
        .collect()
}

pub fn scenario_322() -> MeasurementScenario {
    let names = ["a", "a'", "b", "b'", "c", "c'"];
    let mut contexts = Vec::new();
    for x in ["a", "a'"] {
        for y in ["b", "b'"] {
            for z in ["c", "c'"] {
                contexts.push(vec![x.to_string(), y.to_string(), z.to_string()]);
            }
        }
    }
    MeasurementScenario::new(binary(&names), contexts).expect("valid scenario")
}

pub fn scenario_triangle() -> MeasurementScenario {
    MeasurementScenario::new(
        binary(&["a", "b", "c"]),
        vec![
            vec!["a".into(), "b".into()],
            vec!["b".into(), "c".into()],
            vec!["a".into(), "c".into()],
        ],
    )
    .expect("valid scenario")
}

pub fn scenario_chain() -> MeasurementScenario {
    MeasurementScenario::new(
        binary(&["a", "b", "c"]),
        vec![vec!["a".into(), "b".into()], vec!["b".into(), "c".into()]],
    )
    .expect("valid scenario")
}

pub fn scenario_single(outcomes_b: usize) -> MeasurementScenario {
    let mut m = IndexMap::new();
    m.insert("a".to_string(), vec!["0".to_string(), "1".to_string()]);
    m.insert(
        "b".to_string(),
        (0..outcomes_b).map(|i| i.to_string()).collect(),
    );
    MeasurementScenario::new(m, vec![vec!["a".into(), "b".into()]]).expect("valid scenario")
}

/// A product empirical model: every table is the product of fixed
/// per-measurement distributions.
pub fn random_product_model(
    rng: &mut ChaCha8Rng,
    scenario: &MeasurementScenario,
) -> EmpiricalModel<NonNegRational> {
    let locals: BTreeMap<String, BTreeMap<String, NonNegRational>> = scenario
        .measurements()
        .iter()
        .map(|(m, outs)| {
            let parts = unit_partition(rng, outs.len(), true);
            (m.clone(), outs.iter().cloned().zip(parts).collect())
        })
        .collect();
    let tables = scenario
        .maximal_contexts()
        .iter()
        .map(|ctx| {
            let weights: BTreeMap<Assignment, NonNegRational> = scenario
                .joint_outcomes(ctx)
                .into_iter()
                .map(|a| {
                    let w = a
                        .0
                        .iter()
                        .fold(NonNegRational::one(), |acc, (m, o)| acc.mul(&locals[m][o]));
                    (a, w)
                })
                .collect();
            Distribution::make(weights).expect("products of distributions are normalized")
        })
        .collect();
    EmpiricalModel::new(scenario.clone(), tables).expect("tables cover the outcomes")
}

/// Marginals of a random global distribution: always no-signalling and always
/// extendable.
pub fn random_section_model(
    rng: &mut ChaCha8Rng,
    scenario: &MeasurementScenario,
) -> EmpiricalModel<NonNegRational> {
    let globals: Vec<Assignment> = scenario.global_assignments();
    let parts = unit_partition(rng, globals.len(), true);
    let section: BTreeMap<Assignment, NonNegRational> =
        globals.into_iter().zip(parts).collect();
    let section = Distribution::make(section).expect("partition sums to one");
    let tables = scenario
        .maximal_contexts()
        .iter()
        .map(|ctx| section.map_points(|g| g.restrict(ctx)))
        .collect();
    EmpiricalModel::new(scenario.clone(), tables).expect("marginals cover the outcomes")
}

/// Entrywise affine mixture of two models over the same scenario; mixing
/// preserves no-signalling.
pub fn mix_models(
    lambda: NonNegRational,
    a: &EmpiricalModel<NonNegRational>,
    b: &EmpiricalModel<NonNegRational>,
) -> EmpiricalModel<NonNegRational> {
    let one_minus = NonNegRational::new(
        BigRational::from_integer(BigInt::from(1)) - lambda.value().clone(),
    )
    .expect("lambda at most one");
    let tables = a
        .tables
        .iter()
        .zip(&b.tables)
        .map(|(ta, tb)| {
            let weights: BTreeMap<Assignment, NonNegRational> = ta
                .carrier()
                .map(|p| {
                    let w = lambda.mul(&ta.weight(p)).add(&one_minus.mul(&tb.weight(p)));
                    (p.clone(), w)
                })
                .collect();
            Distribution::make(weights).expect("mixtures stay normalized")
        })
        .collect();
    EmpiricalModel::new(a.scenario.clone(), tables).expect("same scenario")
}

/// The perfect anti-correlation box on the triangle scenario: no-signalling
/// with no global section.
pub fn triangle_anticorrelation() -> EmpiricalModel<NonNegRational> {
    let scenario = scenario_triangle();
    let tables = scenario
        .maximal_contexts()
        .iter()
        .map(|ctx| {
            let weights: BTreeMap<Assignment, NonNegRational> = scenario
                .joint_outcomes(ctx)
                .into_iter()
                .map(|a| {
                    let vals: Vec<&str> = ctx.iter().map(|m| a.get(m).unwrap()).collect();
                    let w = if vals[0] != vals[1] { ratio(1, 2) } else { ratio(0, 1) };
                    (a, w)
                })
                .collect();
            Distribution::make(weights).expect("anticorrelation is normalized")
        })
        .collect();
    EmpiricalModel::new(scenario, tables).expect("tables cover the outcomes")
}

/// A random no-signalling (2,2,2) model: a mixture of section marginals and
/// the box with anti-correlated fourth context.
pub fn random_ns_222(rng: &mut ChaCha8Rng) -> EmpiricalModel<NonNegRational> {
    let base = random_section_model(rng, &crate::scenario::scenario_222());
    let lambda = ratio(rng.gen_range(0..=4), 4);
    mix_models(lambda, &base, &crate::scenario::canonical_pr_box())
}

/// A (2,2,2) model that provably signals: one context answers
/// deterministically while its neighbour stays uniform.
pub fn random_signalling_222(rng: &mut ChaCha8Rng) -> EmpiricalModel<NonNegRational> {
    let scenario = crate::scenario::scenario_222();
    let deterministic = rng.gen_range(0..4usize);
    let point: Vec<&str> = vec![
        if rng.gen_bool(0.5) { "0" } else { "1" },
        if rng.gen_bool(0.5) { "0" } else { "1" },
    ];
    let tables = scenario
        .maximal_contexts()
        .iter()
        .enumerate()
        .map(|(i, ctx)| {
            let outcomes = scenario.joint_outcomes(ctx);
            let weights: BTreeMap<Assignment, NonNegRational> = if i == deterministic {
                outcomes
                    .into_iter()
                    .map(|a| {
                        let hit = ctx
                            .iter()
                            .zip(&point)
                            .all(|(m, o)| a.get(m) == Some(*o));
                        (a, if hit { ratio(1, 1) } else { ratio(0, 1) })
                    })
                    .collect()
            } else {
                outcomes.into_iter().map(|a| (a, ratio(1, 4))).collect()
            };
            Distribution::make(weights).expect("rows are normalized")
        })
        .collect();
    EmpiricalModel::new(scenario, tables).expect("tables cover the outcomes")
}

/// A random scenario-backed stochastic model with freely chosen (possibly
/// signalling) tables, for soundness testing. Returns the scenario alongside.
pub fn random_stochastic_model_rational(
    rng: &mut ChaCha8Rng,
    with_latent_stage: bool,
) -> (StochasticModel<NonNegRational>, MeasurementScenario) {
    let scenario = match rng.gen_range(0..3) {
        0 => crate::scenario::scenario_222(),
        1 => scenario_triangle(),
        _ => scenario_chain(),
    };
    let tables = scenario
        .maximal_contexts()
        .iter()
        .map(|ctx| {
            let outcomes: Vec<Assignment> = scenario.joint_outcomes(ctx);
            let parts = unit_partition(rng, outcomes.len(), true);
            Distribution::make(outcomes.into_iter().zip(parts).collect())
                .expect("partition sums to one")
        })
        .collect();
    let model = EmpiricalModel::new(scenario.clone(), tables).expect("tables cover the outcomes");
    (
        empirical_to_model(&model, with_latent_stage).expect("scenario models build"),
        scenario,
    )
}

pub fn random_stochastic_model_bool(
    rng: &mut ChaCha8Rng,
    with_latent_stage: bool,
) -> (StochasticModel<Boolean>, MeasurementScenario) {
    let scenario = match rng.gen_range(0..2) {
        0 => crate::scenario::scenario_222(),
        _ => scenario_triangle(),
    };
    let tables = scenario
        .maximal_contexts()
        .iter()
        .map(|ctx| {
            let outcomes: Vec<Elem> = scenario
                .joint_outcomes(ctx)
                .iter()
                .map(|a| a.csv(ctx))
                .collect();
            let d = random_bool_distribution(rng, &outcomes);
            let weights: BTreeMap<Assignment, Boolean> = scenario
                .joint_outcomes(ctx)
                .into_iter()
                .map(|a| {
                    let w = d.weight(&a.csv(ctx));
                    (a, w)
                })
                .collect();
            Distribution::make(weights).expect("some outcome is possible")
        })
        .collect();
    let model = EmpiricalModel::new(scenario.clone(), tables).expect("tables cover the outcomes");
    (
        empirical_to_model(&model, with_latent_stage).expect("scenario models build"),
        scenario,
    )
}

/// A single-root weighted presheaf over a random small tree, for bundle-level
/// tests.
pub fn random_rooted_presheaf(rng: &mut ChaCha8Rng, max_nodes: usize) -> RRelationalPresheaf<NonNegRational> {
    let base = random_label_tree(rng, max_nodes);
    let fibers: Vec<FinSet> = base
        .nodes()
        .map(|n| {
            if n == base.root() {
                FinSet::from(["s".to_string()])
            } else {
                let k = rng.gen_range(1..=3);
                (0..k).map(|i| format!("q{n}_{i}")).collect()
            }
        })
        .collect();
    let edges = base
        .edges()
        .map(|child| {
            let parent = base.parent(child).unwrap();
            let from: Vec<Elem> = fibers[parent].iter().cloned().collect();
            let to: Vec<Elem> = fibers[child].iter().cloned().collect();
            (child, random_rrel_rational(rng, &from, &to))
        })
        .collect();
    RRelationalPresheaf::new(base, fibers, edges).expect("generated presheaves are valid")
}

// ---------------------------------------------------------------------------
// formulas
// ---------------------------------------------------------------------------

pub fn random_formula(rng: &mut ChaCha8Rng, depth: usize) -> Formula {
    let letters = [("a", "0"), ("a'", "1"), ("b", "0"), ("b'", "1"), ("c", "2")];
    let labels = ["ab", "a'b'", "i", "e1"];
    if depth == 0 || rng.gen_bool(0.3) {
        return match rng.gen_range(0..3) {
            0 => Formula::Top,
            _ => {
                let (m, o) = letters[rng.gen_range(0..letters.len())];
                Formula::atom(m, o)
            }
        };
    }
    match rng.gen_range(0..8) {
        0 => Formula::not(random_formula(rng, depth - 1)),
        1 => Formula::and(random_formula(rng, depth - 1), random_formula(rng, depth - 1)),
        2 => Formula::or(random_formula(rng, depth - 1), random_formula(rng, depth - 1)),
        3 => Formula::iff(random_formula(rng, depth - 1), random_formula(rng, depth - 1)),
        4 => Formula::xor(random_formula(rng, depth - 1), random_formula(rng, depth - 1)),
        5 => Formula::Nec(random_label(rng, &labels), Box::new(random_formula(rng, depth - 1))),
        6 => Formula::Pos(random_label(rng, &labels), Box::new(random_formula(rng, depth - 1))),
        _ => {
            let ops = [CmpOp::Lt, CmpOp::Le, CmpOp::Eq, CmpOp::Ge, CmpOp::Gt];
            Formula::Prob {
                body: Box::new(random_formula(rng, depth - 1)),
                label: random_label(rng, &labels),
                op: ops[rng.gen_range(0..ops.len())],
                bound: BigRational::new(
                    BigInt::from(rng.gen_range(-6i64..12)),
                    BigInt::from(rng.gen_range(1i64..9)),
                ),
            }
        }
    }
}

fn random_label(rng: &mut ChaCha8Rng, labels: &[&str]) -> LabelPath {
    if rng.gen_bool(0.25) {
        let a = labels[rng.gen_range(0..labels.len())].to_string();
        let b = labels[rng.gen_range(0..labels.len())].to_string();
        LabelPath(vec![a, b])
    } else {
        LabelPath::single(labels[rng.gen_range(0..labels.len())])
    }
}

/// Collects the stable list of all global assignments of a scenario.
pub fn all_globals(scenario: &MeasurementScenario) -> Vec<Assignment> {
    scenario.global_assignments()
}

/// Exhaustively checks strong contextuality by scanning every global
/// assignment; the oracle counterpart of the backtracking search.
pub fn enumerate_support_witness<W: Semiring>(
    model: &EmpiricalModel<W>,
) -> Option<Assignment> {
    model.scenario.global_assignments().into_iter().find(|g| {
        model
            .scenario
            .maximal_contexts()
            .iter()
            .enumerate()
            .all(|(i, ctx)| !model.tables[i].weight(&g.restrict(ctx)).is_zero())
    })
}

/// The set of support states used by possibilistic collapse tests.
pub fn support_sets<W: Semiring>(model: &EmpiricalModel<W>) -> Vec<BTreeSet<Assignment>> {
    model.tables.iter().map(|t| t.support_set()).collect()
}
