//! Measurement scenarios, empirical models, the no-signalling decision,
//! contextuality and strong contextuality, and the two constructive
//! hidden-variable builders.
//!
//! Global sections over exact rationals are decided by phase-one simplex, so
//! contextuality is a decision procedure here, not an approximation;
//! infeasibility always comes with a dual certificate. Possibilistic sections
//! are decided by the support-closure search, the exact boolean analogue.

use std::collections::{BTreeMap, BTreeSet};

use indexmap::IndexMap;
use num_rational::BigRational;
use num_traits::Signed as _;

use crate::error::{Error, Result};
use crate::presheaf::{
    qualify, NamedProjection, PartyRestriction, RRelationalPresheaf, StateRef, StochasticModel,
    WeightedBundle,
};
use crate::rel::{rmap_compose, Elem, FinSet, RMap, RRelation};
use crate::semiring::{Boolean, Distribution, NonNegRational, Semiring, SignedRational};
use crate::simplex::{self, LpOutcome, LpRow};
use crate::tree::{LabelTree, TreeBuilder, TreeProjection};

/// A finite set of measurements with their outcome sets and the explicitly
/// listed maximal contexts (jointly performable subsets).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MeasurementScenario {
    measurements: IndexMap<String, Vec<String>>,
    maximal: Vec<Vec<String>>,
}

impl MeasurementScenario {
    pub fn new(
        measurements: IndexMap<String, Vec<String>>,
        maximal: Vec<Vec<String>>,
    ) -> Result<Self> {
        if measurements.is_empty() {
            return Err(Error::InvalidScenario("no measurements".into()));
        }
        for (m, outs) in &measurements {
            if outs.is_empty() {
                return Err(Error::InvalidScenario(format!("measurement {m} has no outcomes")));
            }
            if outs.iter().collect::<BTreeSet<_>>().len() != outs.len() {
                return Err(Error::InvalidScenario(format!("measurement {m} repeats an outcome")));
            }
        }
        if maximal.is_empty() {
            return Err(Error::InvalidScenario("no contexts".into()));
        }
        let order: Vec<String> = measurements.keys().cloned().collect();
        let canon = |ctx: &[String]| -> Result<Vec<String>> {
            let set: BTreeSet<&String> = ctx.iter().collect();
            if set.len() != ctx.len() {
                return Err(Error::InvalidScenario("context repeats a measurement".into()));
            }
            for m in ctx {
                if !measurements.contains_key(m) {
                    return Err(Error::InvalidScenario(format!("context uses unknown measurement {m}")));
                }
            }
            Ok(order.iter().filter(|m| set.contains(m)).cloned().collect())
        };
        let maximal: Vec<Vec<String>> = maximal
            .iter()
            .map(|c| canon(c))
            .collect::<Result<_>>()?;
        for (i, c) in maximal.iter().enumerate() {
            if c.is_empty() {
                return Err(Error::InvalidScenario("empty context".into()));
            }
            for (j, d) in maximal.iter().enumerate() {
                if i != j && c.iter().all(|m| d.contains(m)) {
                    return Err(Error::InvalidScenario(format!(
                        "declared maximal context {} is contained in {}",
                        context_label(c),
                        context_label(d)
                    )));
                }
            }
        }
        for m in measurements.keys() {
            if !maximal.iter().any(|c| c.contains(m)) {
                return Err(Error::InvalidScenario(format!("measurement {m} is in no context")));
            }
        }
        Ok(MeasurementScenario { measurements, maximal })
    }

    pub fn measurement_order(&self) -> Vec<String> {
        self.measurements.keys().cloned().collect()
    }

    pub fn outcomes(&self, measurement: &str) -> Result<&[String]> {
        self.measurements
            .get(measurement)
            .map(|v| v.as_slice())
            .ok_or_else(|| Error::InvalidScenario(format!("unknown measurement {measurement}")))
    }

    pub fn measurements(&self) -> &IndexMap<String, Vec<String>> {
        &self.measurements
    }

    pub fn maximal_contexts(&self) -> &[Vec<String>] {
        &self.maximal
    }

    /// All nonempty sub-contexts of the maximal ones, maximal contexts
    /// included, each sorted by measurement declaration order.
    pub fn all_contexts(&self) -> Vec<Vec<String>> {
        let mut seen: BTreeSet<Vec<String>> = BTreeSet::new();
        for ctx in &self.maximal {
            let n = ctx.len();
            for mask in 1u32..(1 << n) {
                let sub: Vec<String> = ctx
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| mask & (1 << i) != 0)
                    .map(|(_, m)| m.clone())
                    .collect();
                seen.insert(sub);
            }
        }
        seen.into_iter().collect()
    }

    pub fn context_by_label(&self, label: &str) -> Option<Vec<String>> {
        self.all_contexts().into_iter().find(|c| context_label(c) == label)
    }

    /// Joint outcomes of a context, in row-major declared order.
    pub fn joint_outcomes(&self, ctx: &[String]) -> Vec<Assignment> {
        let mut out = vec![Assignment(BTreeMap::new())];
        for m in ctx {
            let mut next = Vec::new();
            for partial in &out {
                for o in &self.measurements[m] {
                    let mut a = partial.clone();
                    a.0.insert(m.clone(), o.clone());
                    next.push(a);
                }
            }
            out = next;
        }
        out
    }

    pub fn global_assignments(&self) -> Vec<Assignment> {
        self.joint_outcomes(&self.measurement_order())
    }
}

/// The paper-style display name of a context: measurement names concatenated.
pub fn context_label(ctx: &[String]) -> String {
    ctx.concat()
}

/// A partial function from measurements to outcomes.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Assignment(pub BTreeMap<String, String>);

impl Assignment {
    pub fn restrict(&self, ctx: &[String]) -> Assignment {
        Assignment(
            self.0
                .iter()
                .filter(|(m, _)| ctx.contains(m))
                .map(|(m, o)| (m.clone(), o.clone()))
                .collect(),
        )
    }

    pub fn get(&self, measurement: &str) -> Option<&str> {
        self.0.get(measurement).map(|s| s.as_str())
    }

    /// Outcome names joined by commas, in the given measurement order.
    pub fn csv(&self, order: &[String]) -> String {
        order
            .iter()
            .filter_map(|m| self.0.get(m).cloned())
            .collect::<Vec<_>>()
            .join(",")
    }

    pub fn from_csv(ctx: &[String], csv: &str) -> Result<Assignment> {
        let parts: Vec<&str> = csv.split(',').collect();
        if parts.len() != ctx.len() {
            return Err(Error::Schema(format!(
                "outcome {csv} does not match context {}",
                context_label(ctx)
            )));
        }
        Ok(Assignment(
            ctx.iter().cloned().zip(parts.iter().map(|s| s.to_string())).collect(),
        ))
    }
}

/// One normalized distribution per maximal context over its joint outcomes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EmpiricalModel<W: Semiring> {
    pub scenario: MeasurementScenario,
    pub tables: Vec<Distribution<Assignment, W>>,
}

impl<W: Semiring> EmpiricalModel<W> {
    pub fn new(scenario: MeasurementScenario, tables: Vec<Distribution<Assignment, W>>) -> Result<Self> {
        if tables.len() != scenario.maximal_contexts().len() {
            return Err(Error::InvalidScenario("one table per maximal context required".into()));
        }
        for (ctx, table) in scenario.maximal_contexts().iter().zip(&tables) {
            let expected: BTreeSet<Assignment> = scenario.joint_outcomes(ctx).into_iter().collect();
            let carrier: BTreeSet<Assignment> = table.carrier().cloned().collect();
            if carrier != expected {
                return Err(Error::InvalidScenario(format!(
                    "table for {} is not over its joint outcomes",
                    context_label(ctx)
                )));
            }
        }
        Ok(EmpiricalModel { scenario, tables })
    }

    pub fn table(&self, index: usize) -> &Distribution<Assignment, W> {
        &self.tables[index]
    }

    /// The table of a (possibly non-maximal) context: a maximal table when the
    /// context is maximal, otherwise the marginal of the first maximal context
    /// containing it.
    pub fn context_table(&self, ctx: &[String]) -> Result<Distribution<Assignment, W>> {
        if let Some(i) = self
            .scenario
            .maximal_contexts()
            .iter()
            .position(|c| c == ctx)
        {
            return Ok(self.tables[i].clone());
        }
        let host = self
            .scenario
            .maximal_contexts()
            .iter()
            .position(|c| ctx.iter().all(|m| c.contains(m)))
            .ok_or_else(|| {
                Error::InvalidScenario(format!("{} is not a sub-context", context_label(ctx)))
            })?;
        Ok(self.tables[host].map_points(|a| a.restrict(ctx)))
    }

    pub fn agrees(&self, other: &Self) -> bool {
        self.scenario == other.scenario
            && self
                .tables
                .iter()
                .zip(&other.tables)
                .all(|(a, b)| a.agrees(b))
    }
}

// ---------------------------------------------------------------------------
// no-signalling
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct NoSigWitness<W: Semiring> {
    pub sub_context: Vec<String>,
    pub context0: Vec<String>,
    pub context1: Vec<String>,
    pub assignment: Assignment,
    pub value0: W,
    pub value1: W,
}

#[derive(Debug, Clone)]
pub struct NoSignallingReport<W: Semiring> {
    pub holds: bool,
    pub witness: Option<NoSigWitness<W>>,
}

/// Decides compatibility: marginals of every pair of context tables agree on
/// every shared sub-context. Returns a concrete mismatch when they do not.
pub fn check_no_signalling<W: Semiring>(model: &EmpiricalModel<W>) -> NoSignallingReport<W> {
    let contexts = model.scenario.maximal_contexts();
    for i in 0..contexts.len() {
        for j in (i + 1)..contexts.len() {
            let shared: Vec<String> = contexts[i]
                .iter()
                .filter(|m| contexts[j].contains(*m))
                .cloned()
                .collect();
            if shared.is_empty() {
                continue;
            }
            let mi = model.tables[i].map_points(|a| a.restrict(&shared));
            let mj = model.tables[j].map_points(|a| a.restrict(&shared));
            for a in model.scenario.joint_outcomes(&shared) {
                let (v0, v1) = (mi.weight(&a), mj.weight(&a));
                if v0 != v1 {
                    return NoSignallingReport {
                        holds: false,
                        witness: Some(NoSigWitness {
                            sub_context: shared,
                            context0: contexts[i].clone(),
                            context1: contexts[j].clone(),
                            assignment: a,
                            value0: v0,
                            value1: v1,
                        }),
                    };
                }
            }
        }
    }
    NoSignallingReport { holds: true, witness: None }
}

/// The marginal of a weighted map along a factorization of its underlying
/// surjection: `h` on `Z ->> X` factored as `g . f` yields the unique weighted
/// map on `g` through which `h` factors, with fiber weights summed along `f`.
pub fn marginalize<W: Semiring>(
    h: &RMap<W>,
    f: &BTreeMap<Elem, Elem>,
    g: &BTreeMap<Elem, Elem>,
) -> Result<RMap<W>> {
    let mid: FinSet = g.keys().cloned().collect();
    for u in &h.to {
        let through = f
            .get(u)
            .ok_or_else(|| Error::NotAFactorization(format!("{u} is outside the first leg")))?;
        let end = g
            .get(through)
            .ok_or_else(|| Error::NotAFactorization(format!("{through} is outside the second leg")))?;
        if *end != h.under[u] {
            return Err(Error::NotAFactorization(format!(
                "legs send {u} to {end}, the map sends it to {}",
                h.under[u]
            )));
        }
    }
    let image_f: FinSet = h.to.iter().map(|u| f[u].clone()).collect();
    if image_f != mid {
        return Err(Error::NotAFactorization("first leg is not surjective".into()));
    }
    let fibers = h
        .from
        .iter()
        .map(|s| {
            let d = h.fiber(s).map_points(|u| f[u].clone());
            (s.clone(), d)
        })
        .collect();
    RMap::new(h.from.clone(), mid, g.clone(), fibers)
}

#[derive(Debug, Clone)]
pub struct BundleNoSigWitness<W: Semiring> {
    pub party: String,
    pub state: Elem,
    pub stage0: Elem,
    pub stage1: Elem,
    pub value0: W,
    pub value1: W,
}

/// The fibrational no-signalling condition: for every party restriction, every
/// restricted state has the same fiber mass over every stage lying over its
/// own. Returns the first violating pair of stages.
pub fn check_no_signalling_bundle<W: Semiring>(
    bundle: &WeightedBundle<W>,
    parties: &[PartyRestriction],
) -> Option<BundleNoSigWitness<W>> {
    for party in parties {
        for t in &party.party_states {
            let stage_t = &party.party_under[t];
            let stages: Vec<&Elem> = party
                .node_map
                .iter()
                .filter(|(_, v)| *v == stage_t)
                .map(|(u, _)| u)
                .collect();
            let mass = |v: &Elem| -> W {
                bundle
                    .rmap
                    .fiber(v)
                    .weights()
                    .iter()
                    .filter(|(u, _)| party.state_map.get(*u) == Some(t))
                    .fold(W::zero(), |acc, (_, w)| acc.add(w))
            };
            let mut values = stages.iter().map(|v| ((*v).clone(), mass(v)));
            if let Some((v0, first)) = values.next() {
                for (v1, other) in values {
                    if other != first {
                        return Some(BundleNoSigWitness {
                            party: party.name.clone(),
                            state: t.clone(),
                            stage0: v0,
                            stage1: v1,
                            value0: first,
                            value1: other,
                        });
                    }
                }
            }
        }
    }
    None
}

/// Internalizes a choice weighting on the party's label projection and takes
/// the marginal along the state restriction: the composite
/// `phi(bundle . p_L^R)` of the marginalization analysis.
pub fn marginal_through<W: Semiring>(
    bundle: &WeightedBundle<W>,
    party: &PartyRestriction,
    choice: &BTreeMap<Elem, BTreeMap<Elem, W>>,
) -> Result<RMap<W>> {
    let mut fibers = BTreeMap::new();
    for t in &party.party_nodes {
        let fiber: FinSet = party
            .node_map
            .iter()
            .filter(|(_, v)| *v == t)
            .map(|(u, _)| u.clone())
            .collect();
        let supplied = choice
            .get(t)
            .ok_or_else(|| Error::MissingWeights(t.clone()))?;
        let weights: BTreeMap<Elem, W> = fiber
            .iter()
            .map(|u| (u.clone(), supplied.get(u).cloned().unwrap_or_else(W::zero)))
            .collect();
        fibers.insert(t.clone(), Distribution::make(weights)?);
    }
    let p_l = RMap::new(
        party.party_nodes.clone(),
        bundle.rmap.from.clone(),
        party.node_map.clone(),
        fibers,
    )?;
    let h = rmap_compose(&p_l, &bundle.rmap)?;
    marginalize(&h, &party.state_map, &party.party_under)
}

// ---------------------------------------------------------------------------
// global sections
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub enum SectionCertificate {
    /// Farkas multipliers indexed by `context:outcome` rows.
    Dual {
        rows: Vec<(String, BigRational)>,
        gap: BigRational,
    },
    /// A supported context outcome no support-consistent global assignment
    /// restricts to.
    UncoveredSupport { context: Vec<String>, outcome: Assignment },
}

#[derive(Debug, Clone)]
pub enum SectionOutcome<W: Semiring> {
    Section(Distribution<Assignment, W>),
    Infeasible(SectionCertificate),
}

/// Per-semiring section solving and the latent weights of the weak
/// hidden-variable construction.
pub trait ScenarioSemiring: Semiring {
    fn solve_global_section(model: &EmpiricalModel<Self>) -> Result<SectionOutcome<Self>>;

    /// The two-latent-point data for a support witness `f`: the weight of `f`,
    /// the weight of the mixing point, and one row per maximal context for the
    /// mixing point.
    fn weak_latent(
        model: &EmpiricalModel<Self>,
        f: &Assignment,
    ) -> Result<(Self, Self, Vec<BTreeMap<Assignment, Self>>)>;
}

fn lp_rows<W: Semiring>(model: &EmpiricalModel<W>, globals: &[Assignment]) -> Vec<LpRow> {
    let mut rows = Vec::new();
    for (i, ctx) in model.scenario.maximal_contexts().iter().enumerate() {
        for outcome in model.scenario.joint_outcomes(ctx) {
            let coeffs = globals
                .iter()
                .map(|g| {
                    if g.restrict(ctx) == outcome {
                        BigRational::from_integer(1.into())
                    } else {
                        BigRational::from_integer(0.into())
                    }
                })
                .collect();
            rows.push(LpRow {
                label: format!(
                    "{}:{}",
                    context_label(ctx),
                    outcome.csv(ctx)
                ),
                coeffs,
                rhs: model.tables[i].weight(&outcome).as_probability(),
            });
        }
    }
    rows
}

impl ScenarioSemiring for NonNegRational {
    fn solve_global_section(model: &EmpiricalModel<Self>) -> Result<SectionOutcome<Self>> {
        let globals = model.scenario.global_assignments();
        let rows = lp_rows(model, &globals);
        match simplex::solve_feasibility(globals.len(), &rows) {
            LpOutcome::Feasible(x) => {
                let weights: BTreeMap<Assignment, NonNegRational> = globals
                    .into_iter()
                    .zip(x.into_iter().map(NonNegRational::new))
                    .map(|(g, w)| Ok((g, w?)))
                    .collect::<Result<_>>()?;
                Ok(SectionOutcome::Section(Distribution::make(weights)?))
            }
            LpOutcome::Infeasible(cert) => Ok(SectionOutcome::Infeasible(SectionCertificate::Dual {
                rows: cert.rows,
                gap: cert.gap,
            })),
        }
    }

    fn weak_latent(
        model: &EmpiricalModel<Self>,
        f: &Assignment,
    ) -> Result<(Self, Self, Vec<BTreeMap<Assignment, Self>>)> {
        let p_f = model
            .scenario
            .maximal_contexts()
            .iter()
            .enumerate()
            .map(|(i, ctx)| model.tables[i].weight(&f.restrict(ctx)))
            .min()
            .expect("scenario has a context");
        let p_t = NonNegRational::new(
            BigRational::from_integer(1.into()) - p_f.value().clone(),
        )?;
        let mut rows = Vec::new();
        for (i, ctx) in model.scenario.maximal_contexts().iter().enumerate() {
            let outcomes = model.scenario.joint_outcomes(ctx);
            let row: BTreeMap<Assignment, NonNegRational> = if p_t.is_zero() {
                // the mixing point carries no mass; attach any valid
                // distribution so the branch stays representable
                let n = outcomes.len() as i64;
                outcomes
                    .into_iter()
                    .map(|g| (g, NonNegRational::ratio(1, n)))
                    .collect()
            } else {
                outcomes
                    .into_iter()
                    .map(|g| {
                        let raw = model.tables[i].weight(&g).value().clone();
                        let num = if g == f.restrict(ctx) {
                            raw - p_f.value().clone()
                        } else {
                            raw
                        };
                        if num.is_negative() {
                            return Err(Error::NegativeWeight(num.to_string()));
                        }
                        Ok((g, NonNegRational::new(num / p_t.value().clone())?))
                    })
                    .collect::<Result<_>>()?
            };
            rows.push(row);
        }
        Ok((p_f, p_t, rows))
    }
}

impl ScenarioSemiring for Boolean {
    fn solve_global_section(model: &EmpiricalModel<Self>) -> Result<SectionOutcome<Self>> {
        // keep the assignments consistent with every support, then check
        // every supported outcome is covered
        let consistent: Vec<Assignment> = model
            .scenario
            .global_assignments()
            .into_iter()
            .filter(|g| {
                model
                    .scenario
                    .maximal_contexts()
                    .iter()
                    .enumerate()
                    .all(|(i, ctx)| !model.tables[i].weight(&g.restrict(ctx)).is_zero())
            })
            .collect();
        for (i, ctx) in model.scenario.maximal_contexts().iter().enumerate() {
            for (outcome, _) in model.tables[i].support() {
                if !consistent.iter().any(|g| g.restrict(ctx) == *outcome) {
                    return Ok(SectionOutcome::Infeasible(SectionCertificate::UncoveredSupport {
                        context: ctx.clone(),
                        outcome: outcome.clone(),
                    }));
                }
            }
        }
        let keep: BTreeSet<Assignment> = consistent.into_iter().collect();
        let weights: BTreeMap<Assignment, Boolean> = model
            .scenario
            .global_assignments()
            .into_iter()
            .map(|g| {
                let w = Boolean(keep.contains(&g));
                (g, w)
            })
            .collect();
        Ok(SectionOutcome::Section(Distribution::make(weights)?))
    }

    fn weak_latent(
        model: &EmpiricalModel<Self>,
        _f: &Assignment,
    ) -> Result<(Self, Self, Vec<BTreeMap<Assignment, Self>>)> {
        // possibilistically both latent points are live, and the mixing point
        // carries each table's support
        let rows = model
            .scenario
            .maximal_contexts()
            .iter()
            .enumerate()
            .map(|(i, ctx)| {
                model
                    .scenario
                    .joint_outcomes(ctx)
                    .into_iter()
                    .map(|g| {
                        let w = model.tables[i].weight(&g);
                        (g, w)
                    })
                    .collect()
            })
            .collect();
        Ok((Boolean(true), Boolean(true), rows))
    }
}

impl ScenarioSemiring for SignedRational {
    fn solve_global_section(model: &EmpiricalModel<Self>) -> Result<SectionOutcome<Self>> {
        let globals = model.scenario.global_assignments();
        let rows = lp_rows(model, &globals);
        match simplex::solve_linear_certified(globals.len(), &rows) {
            Ok(x) => {
                let weights: BTreeMap<Assignment, SignedRational> = globals
                    .into_iter()
                    .zip(x.into_iter().map(SignedRational))
                    .collect();
                Ok(SectionOutcome::Section(Distribution::make(weights)?))
            }
            Err(cert) => Ok(SectionOutcome::Infeasible(SectionCertificate::Dual {
                rows: cert.rows,
                gap: cert.gap,
            })),
        }
    }

    fn weak_latent(
        model: &EmpiricalModel<Self>,
        f: &Assignment,
    ) -> Result<(Self, Self, Vec<BTreeMap<Assignment, Self>>)> {
        let p_f = model
            .scenario
            .maximal_contexts()
            .iter()
            .enumerate()
            .map(|(i, ctx)| model.tables[i].weight(&f.restrict(ctx)))
            .min()
            .expect("scenario has a context");
        let p_t = SignedRational(BigRational::from_integer(1.into()) - p_f.0.clone());
        let mut rows = Vec::new();
        for (i, ctx) in model.scenario.maximal_contexts().iter().enumerate() {
            let outcomes = model.scenario.joint_outcomes(ctx);
            let row: BTreeMap<Assignment, SignedRational> = if p_t.is_zero() {
                let n = outcomes.len() as i64;
                outcomes
                    .into_iter()
                    .map(|g| (g, SignedRational::ratio(1, n)))
                    .collect()
            } else {
                outcomes
                    .into_iter()
                    .map(|g| {
                        let raw = model.tables[i].weight(&g).0;
                        let num = if g == f.restrict(ctx) { raw - p_f.0.clone() } else { raw };
                        (g, SignedRational(num / p_t.0.clone()))
                    })
                    .collect()
            };
            rows.push(row);
        }
        Ok((p_f, p_t, rows))
    }
}

/// Decides exact feasibility of a global distribution whose marginals match
/// every context table. Requires a no-signalling input.
pub fn find_global_section<W: ScenarioSemiring>(
    model: &EmpiricalModel<W>,
) -> Result<SectionOutcome<W>> {
    if !check_no_signalling(model).holds {
        return Err(Error::SignallingInput);
    }
    W::solve_global_section(model)
}

/// `true` iff no global section exists.
pub fn is_contextual<W: ScenarioSemiring>(model: &EmpiricalModel<W>) -> Result<bool> {
    Ok(matches!(find_global_section(model)?, SectionOutcome::Infeasible(_)))
}

/// A global assignment whose restriction lies in every table's support, if one
/// exists. Backtracks over measurements, most-constrained first.
pub fn global_support_assignment<W: Semiring>(
    model: &EmpiricalModel<W>,
) -> Result<Option<Assignment>> {
    if !check_no_signalling(model).holds {
        return Err(Error::SignallingInput);
    }
    let supports: Vec<BTreeSet<Assignment>> =
        model.tables.iter().map(|t| t.support_set()).collect();
    let mut order = model.scenario.measurement_order();
    let weight_of = |m: &String| {
        model
            .scenario
            .maximal_contexts()
            .iter()
            .filter(|c| c.contains(m))
            .count()
    };
    order.sort_by(|a, b| weight_of(b).cmp(&weight_of(a)).then(a.cmp(b)));

    fn consistent<WW: Semiring>(
        model: &EmpiricalModel<WW>,
        supports: &[BTreeSet<Assignment>],
        partial: &Assignment,
    ) -> bool {
        model
            .scenario
            .maximal_contexts()
            .iter()
            .enumerate()
            .all(|(i, ctx)| {
                let fixed: Vec<&String> = ctx.iter().filter(|m| partial.0.contains_key(*m)).collect();
                if fixed.is_empty() {
                    return true;
                }
                supports[i]
                    .iter()
                    .any(|f| fixed.iter().all(|m| f.get(m) == partial.get(m)))
            })
    }

    fn search<WW: Semiring>(
        model: &EmpiricalModel<WW>,
        supports: &[BTreeSet<Assignment>],
        order: &[String],
        partial: &mut Assignment,
        depth: usize,
    ) -> Option<Assignment> {
        if depth == order.len() {
            return Some(partial.clone());
        }
        let m = &order[depth];
        for o in model.scenario.outcomes(m).expect("ordered measurement") {
            partial.0.insert(m.clone(), o.clone());
            if consistent(model, supports, partial) {
                if let Some(found) = search(model, supports, order, partial, depth + 1) {
                    return Some(found);
                }
            }
            partial.0.remove(m);
        }
        None
    }

    Ok(search(model, &supports, &order, &mut Assignment(BTreeMap::new()), 0))
}

/// `true` iff no single global assignment is consistent with every context
/// support.
pub fn is_strongly_contextual<W: Semiring>(model: &EmpiricalModel<W>) -> Result<bool> {
    Ok(global_support_assignment(model)?.is_none())
}

// ---------------------------------------------------------------------------
// stochastic models for scenarios
// ---------------------------------------------------------------------------

/// The standard tree family of a scenario: an initial tree whose context edges
/// sit after an optional latent stage, plus one coarser tree per proper
/// sub-context, each the target of a projection from the initial tree.
pub struct ScenarioFamily {
    pub trees: IndexMap<String, LabelTree>,
    pub projections: Vec<NamedProjection>,
}

pub fn scenario_family(scenario: &MeasurementScenario, with_latent_stage: bool) -> ScenarioFamily {
    let maximal = scenario.maximal_contexts();
    let build_tree = |contexts: &[&Vec<String>]| -> LabelTree {
        let mut b = TreeBuilder::new("x");
        let choice_root = if with_latent_stage {
            b.add_edge("x", "y", "i").expect("fresh node");
            "y"
        } else {
            "x"
        };
        for ctx in contexts {
            let label = context_label(ctx);
            b.add_edge(choice_root, &format!("z_{label}"), &label)
                .expect("contexts have distinct labels");
        }
        b.finish().expect("scenario trees are valid")
    };
    let initial = build_tree(&maximal.iter().collect::<Vec<_>>());
    let mut trees = IndexMap::new();
    trees.insert("L0".to_string(), initial.clone());
    let mut projections = Vec::new();
    for ctx in scenario.all_contexts() {
        if maximal.contains(&ctx) {
            continue;
        }
        let label = context_label(&ctx);
        let coarse = build_tree(&[&ctx]);
        let name = format!("L_{label}");
        let mut pairs: BTreeMap<String, String> = BTreeMap::from([("x".into(), "x".into())]);
        if with_latent_stage {
            pairs.insert("y".into(), "y".into());
        }
        for big in maximal {
            if ctx.iter().all(|m| big.contains(m)) {
                pairs.insert(format!("z_{}", context_label(big)), format!("z_{label}"));
            }
        }
        let proj = TreeProjection::from_ids(&initial, &coarse, &pairs)
            .expect("context projections are valid");
        trees.insert(name.clone(), coarse);
        projections.push(NamedProjection {
            from: "L0".into(),
            to: name,
            proj,
        });
    }
    ScenarioFamily { trees, projections }
}

fn leaf_fiber<W: Semiring>(scenario: &MeasurementScenario, ctx: &[String]) -> FinSet {
    let _ = W::NAME;
    scenario
        .joint_outcomes(ctx)
        .iter()
        .map(|a| a.csv(ctx))
        .collect()
}

fn scenario_valuation(
    scenario: &MeasurementScenario,
    tree: &LabelTree,
) -> BTreeMap<String, BTreeSet<StateRef>> {
    let mut valuation: BTreeMap<String, BTreeSet<StateRef>> = BTreeMap::new();
    for (m, outs) in scenario.measurements() {
        for o in outs {
            valuation.insert(format!("{m}={o}"), BTreeSet::new());
        }
    }
    for ctx in scenario.maximal_contexts() {
        let node = tree
            .index_of(&format!("z_{}", context_label(ctx)))
            .expect("leaf stage exists");
        for a in scenario.joint_outcomes(ctx) {
            let state = StateRef::new(node, a.csv(ctx));
            for (m, o) in &a.0 {
                valuation
                    .get_mut(&format!("{m}={o}"))
                    .expect("letter prebuilt")
                    .insert(state.clone());
            }
        }
    }
    valuation
}

/// Builds the stochastic model of an empirical model over its standard tree
/// family. With a latent stage, a single latent point carries every table.
pub fn empirical_to_model<W: Semiring>(
    model: &EmpiricalModel<W>,
    with_latent_stage: bool,
) -> Result<StochasticModel<W>> {
    let scenario = &model.scenario;
    let family = scenario_family(scenario, with_latent_stage);
    let tree = family.trees["L0"].clone();
    let root_fiber = FinSet::from(["s".to_string()]);
    let latent_fiber = FinSet::from(["t".to_string()]);

    let mut fibers: Vec<FinSet> = vec![FinSet::new(); tree.node_count()];
    fibers[tree.root()] = root_fiber.clone();
    if with_latent_stage {
        fibers[tree.index_of("y")?] = latent_fiber.clone();
    }
    for ctx in scenario.maximal_contexts() {
        let node = tree.index_of(&format!("z_{}", context_label(ctx)))?;
        fibers[node] = leaf_fiber::<W>(scenario, ctx);
    }

    let mut edges: BTreeMap<usize, RRelation<W>> = BTreeMap::new();
    if with_latent_stage {
        let y = tree.index_of("y")?;
        edges.insert(
            y,
            RRelation::new(
                root_fiber.clone(),
                latent_fiber.clone(),
                BTreeMap::from([("s".to_string(), latent_fiber.clone())]),
                BTreeMap::from([(
                    "s".to_string(),
                    BTreeMap::from([("t".to_string(), W::one())]),
                )]),
            )?,
        );
    }
    let source_state = if with_latent_stage { "t" } else { "s" };
    for (i, ctx) in scenario.maximal_contexts().iter().enumerate() {
        let node = tree.index_of(&format!("z_{}", context_label(ctx)))?;
        let parent = tree.parent(node).unwrap();
        let to = fibers[node].clone();
        let weights: BTreeMap<Elem, W> = scenario
            .joint_outcomes(ctx)
            .into_iter()
            .map(|a| (a.csv(ctx), model.tables[i].weight(&a)))
            .collect();
        edges.insert(
            node,
            RRelation::new(
                fibers[parent].clone(),
                to.clone(),
                BTreeMap::from([(source_state.to_string(), to.clone())]),
                BTreeMap::from([(source_state.to_string(), weights)]),
            )?,
        );
    }
    let system = RRelationalPresheaf::new(tree.clone(), fibers, edges)?;
    StochasticModel::new(
        family.trees,
        "L0",
        family.projections,
        system,
        scenario_valuation(scenario, &tree),
    )
}

/// Reads the empirical model back off a scenario-shaped stochastic model by
/// evaluating root-to-leaf paths.
pub fn extract_empirical<W: Semiring>(
    model: &StochasticModel<W>,
    scenario: &MeasurementScenario,
) -> Result<EmpiricalModel<W>> {
    let tree = model.initial_tree();
    let root = model.root_state()?;
    let mut tables = Vec::new();
    for ctx in scenario.maximal_contexts() {
        let node = tree.index_of(&format!("z_{}", context_label(ctx)))?;
        let reached = model.system.eval_path(tree.root(), node)?;
        let weights: BTreeMap<Assignment, W> = scenario
            .joint_outcomes(ctx)
            .into_iter()
            .map(|a| {
                let w = reached.dist(&root.state).weight(&a.csv(ctx));
                (a, w)
            })
            .collect();
        tables.push(Distribution::make(weights)?);
    }
    EmpiricalModel::new(scenario.clone(), tables)
}

/// The vertical weighted bundle of a scenario model, with one restriction leg
/// per proper sub-context of the family.
pub fn scenario_bundle<W: Semiring>(
    model: &EmpiricalModel<W>,
) -> Result<(WeightedBundle<W>, Vec<PartyRestriction>)> {
    let stoch = empirical_to_model(model, false)?;
    let bundle = crate::presheaf::vertical_bundle(&stoch.system)?;
    let tree = stoch.initial_tree();
    let mut parties = Vec::new();
    for ctx in model.scenario.all_contexts() {
        if model.scenario.maximal_contexts().contains(&ctx) {
            continue;
        }
        let label = context_label(&ctx);
        let party_root = "x".to_string();
        let party_leaf = format!("z_{label}");
        let mut node_map = BTreeMap::new();
        let mut state_map = BTreeMap::new();
        let mut party_under = BTreeMap::new();
        let mut party_states = FinSet::new();
        // root maps to root
        node_map.insert("x".to_string(), party_root.clone());
        let root_q = qualify("x", "s");
        let party_root_q = qualify(&party_root, "s");
        state_map.insert(root_q, party_root_q.clone());
        party_under.insert(party_root_q.clone(), party_root.clone());
        party_states.insert(party_root_q);
        for big in model.scenario.maximal_contexts() {
            if !ctx.iter().all(|m| big.contains(m)) {
                continue;
            }
            let node_id = format!("z_{}", context_label(big));
            tree.index_of(&node_id)?;
            node_map.insert(node_id.clone(), party_leaf.clone());
            for a in model.scenario.joint_outcomes(big) {
                let q = qualify(&node_id, &a.csv(big));
                let restricted = a.restrict(&ctx);
                let pq = qualify(&party_leaf, &restricted.csv(&ctx));
                state_map.insert(q, pq.clone());
                party_under.insert(pq.clone(), party_leaf.clone());
                party_states.insert(pq);
            }
        }
        parties.push(PartyRestriction {
            name: label,
            node_map,
            state_map,
            party_under,
            party_nodes: FinSet::from([party_root, party_leaf]),
            party_states,
        });
    }
    Ok((bundle, parties))
}

/// The vertical bundle of a two-party scenario with the total restriction legs
/// of the multipartite diagram: each maximal context splits into a left part
/// and a right part, and each leg keeps one side.
///
/// Unlike the sub-context legs of [`scenario_bundle`], these label projections
/// are total, so they support marginalization through arbitrary choice
/// weightings.
pub fn bipartite_bundle<W: Semiring>(
    model: &EmpiricalModel<W>,
    left: &[String],
    right: &[String],
) -> Result<(WeightedBundle<W>, Vec<PartyRestriction>)> {
    let scenario = &model.scenario;
    for m in scenario.measurement_order() {
        match (left.contains(&m), right.contains(&m)) {
            (true, false) | (false, true) => {}
            _ => {
                return Err(Error::InvalidScenario(format!(
                    "measurement {m} must belong to exactly one party"
                )))
            }
        }
    }
    let stoch = empirical_to_model(model, false)?;
    let bundle = crate::presheaf::vertical_bundle(&stoch.system)?;
    let mut parties = Vec::new();
    for (name, side) in [("left", left), ("right", right)] {
        let mut node_map = BTreeMap::new();
        let mut state_map = BTreeMap::new();
        let mut party_under = BTreeMap::new();
        let mut party_nodes = FinSet::from(["x".to_string()]);
        let mut party_states = FinSet::new();
        node_map.insert("x".to_string(), "x".to_string());
        let root_q = qualify("x", "s");
        state_map.insert(root_q.clone(), root_q.clone());
        party_under.insert(root_q.clone(), "x".to_string());
        party_states.insert(root_q);
        for big in scenario.maximal_contexts() {
            let part: Vec<String> = big.iter().filter(|m| side.contains(m)).cloned().collect();
            if part.is_empty() {
                return Err(Error::InvalidScenario(format!(
                    "context {} has no {name}-party measurement",
                    context_label(big)
                )));
            }
            let node_id = format!("z_{}", context_label(big));
            let party_leaf = format!("z_{}", context_label(&part));
            node_map.insert(node_id.clone(), party_leaf.clone());
            party_nodes.insert(party_leaf.clone());
            for a in scenario.joint_outcomes(big) {
                let q = qualify(&node_id, &a.csv(big));
                let pq = qualify(&party_leaf, &a.restrict(&part).csv(&part));
                state_map.insert(q, pq.clone());
                party_under.insert(pq.clone(), party_leaf.clone());
                party_states.insert(pq);
            }
        }
        parties.push(PartyRestriction {
            name: name.to_string(),
            node_map,
            state_map,
            party_under,
            party_nodes,
            party_states,
        });
    }
    Ok((bundle, parties))
}

// ---------------------------------------------------------------------------
// hidden-variable constructions
// ---------------------------------------------------------------------------

/// A three-stage model whose middle stage holds deterministic instruction
/// sets: forgetting it reproduces the empirical model by averaging.
#[derive(Debug, Clone)]
pub struct HiddenVariableModel<W: Semiring> {
    pub model: StochasticModel<W>,
    pub latent: Vec<Assignment>,
}

fn hv_skeleton<W: Semiring>(
    scenario: &MeasurementScenario,
    latent_names: &FinSet,
    latent_weights: BTreeMap<Elem, W>,
    latent_rel: FinSet,
    leaf_edges: impl Fn(&str, usize, &[String]) -> (FinSet, BTreeMap<Elem, W>),
) -> Result<StochasticModel<W>> {
    let family = scenario_family(scenario, true);
    let tree = family.trees["L0"].clone();
    let root_fiber = FinSet::from(["s".to_string()]);
    let y = tree.index_of("y")?;

    let mut fibers: Vec<FinSet> = vec![FinSet::new(); tree.node_count()];
    fibers[tree.root()] = root_fiber.clone();
    fibers[y] = latent_names.clone();
    for ctx in scenario.maximal_contexts() {
        let node = tree.index_of(&format!("z_{}", context_label(ctx)))?;
        fibers[node] = leaf_fiber::<W>(scenario, ctx);
    }

    let mut edges: BTreeMap<usize, RRelation<W>> = BTreeMap::new();
    edges.insert(
        y,
        RRelation::new(
            root_fiber,
            latent_names.clone(),
            BTreeMap::from([("s".to_string(), latent_rel)]),
            BTreeMap::from([("s".to_string(), latent_weights)]),
        )?,
    );
    for (i, ctx) in scenario.maximal_contexts().iter().enumerate() {
        let node = tree.index_of(&format!("z_{}", context_label(ctx)))?;
        let mut rel = BTreeMap::new();
        let mut weights = BTreeMap::new();
        for latent in latent_names {
            let (image, table) = leaf_edges(latent, i, ctx);
            rel.insert(latent.clone(), image);
            weights.insert(latent.clone(), table);
        }
        edges.insert(
            node,
            RRelation::new(latent_names.clone(), fibers[node].clone(), rel, weights)?,
        );
    }
    let system = RRelationalPresheaf::new(tree.clone(), fibers, edges)?;
    StochasticModel::new(
        family.trees,
        "L0",
        family.projections,
        system,
        scenario_valuation(scenario, &tree),
    )
}

fn assert_model_reproduces<W: Semiring>(
    empirical: &EmpiricalModel<W>,
    model: &StochasticModel<W>,
) -> Result<()> {
    let extracted = extract_empirical(model, &empirical.scenario)?;
    if !extracted.agrees(empirical) {
        return Err(Error::Internal(
            "forgetting the latent stage does not reproduce the tables".into(),
        ));
    }
    Ok(())
}

fn assert_hv_logic<W: Semiring>(
    scenario: &MeasurementScenario,
    model: &StochasticModel<W>,
    deterministic_root: bool,
) -> Result<()> {
    use crate::logic::{det_sentence, lambda_instances, validates_sequent_with, Evaluator, Formula, LabelPath};
    let det = det_sentence(scenario);
    let i_det = if deterministic_root {
        Formula::Nec(LabelPath(vec!["i".into()]), Box::new(det))
    } else {
        Formula::Pos(LabelPath(vec!["i".into()]), Box::new(det))
    };
    let mut eval = Evaluator::new(model);
    let root = model.root_state()?;
    if !eval.extension(&i_det)?.contains(&root) {
        return Err(Error::Internal("hidden-variable root fails its determinacy modality".into()));
    }
    let mut bodies: Vec<Formula> = vec![Formula::Top];
    for (m, outs) in scenario.measurements() {
        for o in outs {
            bodies.push(Formula::atom(m, o));
        }
    }
    for seq in lambda_instances(scenario, &bodies) {
        if !validates_sequent_with(&mut eval, &seq)? {
            return Err(Error::Internal("hidden-variable model fails a context-monotonicity axiom".into()));
        }
    }
    Ok(())
}

/// The construction from a global section: the latent set is the full set of
/// instruction sets, weighted by the section, and every context edge reads the
/// instruction off deterministically.
pub fn build_hv_model<W: Semiring>(
    empirical: &EmpiricalModel<W>,
    section: &Distribution<Assignment, W>,
) -> Result<HiddenVariableModel<W>> {
    let scenario = &empirical.scenario;
    let order = scenario.measurement_order();
    let globals = scenario.global_assignments();
    let carrier: BTreeSet<Assignment> = section.carrier().cloned().collect();
    if !carrier.iter().all(|g| globals.contains(g)) {
        return Err(Error::NotASection("section carrier has foreign assignments".into()));
    }
    for (i, ctx) in scenario.maximal_contexts().iter().enumerate() {
        let marginal = section.map_points(|g| g.restrict(ctx));
        for outcome in scenario.joint_outcomes(ctx) {
            if marginal.weight(&outcome) != empirical.tables[i].weight(&outcome) {
                return Err(Error::NotASection(format!(
                    "marginal at {} misses the table at {}",
                    context_label(ctx),
                    outcome.csv(ctx)
                )));
            }
        }
    }

    let latent_names: FinSet = globals.iter().map(|g| g.csv(&order)).collect();
    let latent_weights: BTreeMap<Elem, W> = globals
        .iter()
        .map(|g| (g.csv(&order), section.weight(g)))
        .collect();
    let by_name: BTreeMap<Elem, Assignment> =
        globals.iter().map(|g| (g.csv(&order), g.clone())).collect();
    let model = hv_skeleton(
        scenario,
        &latent_names,
        latent_weights,
        latent_names.clone(),
        |latent, i, ctx| {
            let _ = i;
            let restricted = by_name[latent].restrict(ctx);
            let name = restricted.csv(ctx);
            (
                FinSet::from([name.clone()]),
                BTreeMap::from([(name, W::one())]),
            )
        },
    )?;
    assert_model_reproduces(empirical, &model)?;
    assert_hv_logic(scenario, &model, true)?;
    Ok(HiddenVariableModel { model, latent: globals })
}

/// The two-latent-point construction from a support witness: the witness point
/// behaves deterministically, and a mixing point absorbs the rest of each
/// table.
pub fn build_weak_hv_model<W: ScenarioSemiring>(
    empirical: &EmpiricalModel<W>,
    witness: &Assignment,
) -> Result<StochasticModel<W>> {
    let scenario = &empirical.scenario;
    let order = scenario.measurement_order();
    if witness.0.len() != order.len()
        || order.iter().any(|m| {
            witness
                .get(m)
                .map_or(true, |o| !scenario.measurements()[m].contains(&o.to_string()))
        })
    {
        return Err(Error::NotAWitness);
    }
    for (i, ctx) in scenario.maximal_contexts().iter().enumerate() {
        if empirical.tables[i].weight(&witness.restrict(ctx)).is_zero() {
            return Err(Error::NotAWitness);
        }
    }
    let (p_f, p_t, rows) = W::weak_latent(empirical, witness)?;

    let f_name = witness.csv(&order);
    let mut t_name = "t".to_string();
    while t_name == f_name {
        t_name.push('\'');
    }
    let latent_names = FinSet::from([f_name.clone(), t_name.clone()]);
    let latent_weights = BTreeMap::from([(f_name.clone(), p_f), (t_name.clone(), p_t)]);
    let model = hv_skeleton(
        scenario,
        &latent_names,
        latent_weights,
        latent_names.clone(),
        |latent, i, ctx| {
            if latent == f_name {
                let name = witness.restrict(ctx).csv(ctx);
                (
                    FinSet::from([name.clone()]),
                    BTreeMap::from([(name, W::one())]),
                )
            } else {
                let image: FinSet = scenario.joint_outcomes(ctx).iter().map(|a| a.csv(ctx)).collect();
                let table = rows[i]
                    .iter()
                    .map(|(a, w)| (a.csv(ctx), w.clone()))
                    .collect();
                (image, table)
            }
        },
    )?;
    assert_model_reproduces(empirical, &model)?;
    assert_hv_logic(scenario, &model, false)?;
    Ok(model)
}

// ---------------------------------------------------------------------------
// canonical models
// ---------------------------------------------------------------------------

/// The (2,2,2) scenario with measurements `a, a'` for the first party and
/// `b, b'` for the second, binary outcomes, and the four mixed contexts.
pub fn scenario_222() -> MeasurementScenario {
    let outs = |_: &str| vec!["0".to_string(), "1".to_string()];
    MeasurementScenario::new(
        IndexMap::from([
            ("a".to_string(), outs("a")),
            ("a'".to_string(), outs("a'")),
            ("b".to_string(), outs("b")),
            ("b'".to_string(), outs("b'")),
        ]),
        vec![
            vec!["a".into(), "b".into()],
            vec!["a".into(), "b'".into()],
            vec!["a'".into(), "b".into()],
            vec!["a'".into(), "b'".into()],
        ],
    )
    .expect("the standard scenario is valid")
}

/// The box with perfectly correlated tables on three contexts and perfect
/// anti-correlation on the fourth; uniform over the allowed pairs.
pub fn canonical_pr_box() -> EmpiricalModel<NonNegRational> {
    let model = crate::format::parse_empirical_rational(include_str!("../data/pr_box.json"))
        .expect("shipped table parses");
    assert!(check_no_signalling(&model).holds, "shipped table is no-signalling");
    model
}

/// The possibilistic supports of the Hardy model.
pub fn canonical_hardy_supports() -> EmpiricalModel<Boolean> {
    crate::format::parse_empirical_bool(include_str!("../data/hardy_supports.json"))
        .expect("shipped supports parse")
}

/// A fixed rational table realizing the Hardy supports, no-signalling by
/// construction and verified on load.
pub fn canonical_hardy_table() -> EmpiricalModel<NonNegRational> {
    let model = crate::format::parse_empirical_rational(include_str!("../data/hardy_table.json"))
        .expect("shipped table parses");
    assert!(check_no_signalling(&model).holds, "shipped table is no-signalling");
    let supports = canonical_hardy_supports();
    for (i, table) in model.tables.iter().enumerate() {
        let expected: BTreeSet<Assignment> = supports.tables[i].support_set();
        assert_eq!(table.support_set(), expected, "shipped table matches the supports");
    }
    model
}

/// A product model: each party answers independently.
pub fn product_demo_box() -> EmpiricalModel<NonNegRational> {
    let model = crate::format::parse_empirical_rational(include_str!("../data/product_box.json"))
        .expect("shipped table parses");
    assert!(check_no_signalling(&model).holds, "shipped table is no-signalling");
    model
}

/// Renders the tables with contexts as rows and joint outcomes as columns.
///
/// The column order is the first-seen order of joint outcome names; cells for
/// outcomes a context does not carry print as `-`.
pub fn emit_table<W: Semiring>(model: &EmpiricalModel<W>) -> String {
    let scenario = &model.scenario;
    let mut columns: Vec<String> = Vec::new();
    let mut per_context: Vec<(String, BTreeMap<String, String>)> = Vec::new();
    for (i, ctx) in scenario.maximal_contexts().iter().enumerate() {
        let mut row = BTreeMap::new();
        for a in scenario.joint_outcomes(ctx) {
            let col = a.csv(ctx);
            if !columns.contains(&col) {
                columns.push(col.clone());
            }
            row.insert(col, model.tables[i].weight(&a).to_string());
        }
        per_context.push((context_label(ctx), row));
    }
    let mut widths: Vec<usize> = columns.iter().map(|c| c.len()).collect();
    let mut head_width = "context".len();
    for (label, row) in &per_context {
        head_width = head_width.max(label.len());
        for (j, col) in columns.iter().enumerate() {
            if let Some(v) = row.get(col) {
                widths[j] = widths[j].max(v.len());
            }
        }
    }
    let mut out = String::new();
    out.push_str(&format!("{:head_width$}", "context"));
    for (j, col) in columns.iter().enumerate() {
        out.push_str(&format!("  {:>width$}", col, width = widths[j]));
    }
    out.push('\n');
    for (label, row) in &per_context {
        out.push_str(&format!("{:head_width$}", label));
        for (j, col) in columns.iter().enumerate() {
            let v = row.get(col).map(String::as_str).unwrap_or("-");
            out.push_str(&format!("  {:>width$}", v, width = widths[j]));
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presheaf::vertical_bundle;
    use crate::semiring::dist;

    fn nn(p: i64, q: i64) -> NonNegRational {
        NonNegRational::ratio(p, q)
    }

    fn asg(pairs: &[(&str, &str)]) -> Assignment {
        Assignment(
            pairs
                .iter()
                .map(|(m, o)| (m.to_string(), o.to_string()))
                .collect(),
        )
    }

    #[test]
    fn marginalize_along_the_identity_is_neutral() {
        let h = crate::random::random_rmap_rational(&mut crate::random::seeded_rng(1), 2, 4);
        let ident: BTreeMap<Elem, Elem> = h.to.iter().map(|u| (u.clone(), u.clone())).collect();
        let back = marginalize(&h, &ident, &h.under).unwrap();
        assert_eq!(back, h);
    }

    #[test]
    fn marginalize_adds_identified_weights() {
        // collapse {u0, u1, u2} with weights (1/4, 1/4, 1/2) by identifying u0 and u1
        let h = RMap::new(
            FinSet::from(["s".to_string()]),
            FinSet::from(["u0".to_string(), "u1".to_string(), "u2".to_string()]),
            BTreeMap::from([
                ("u0".into(), "s".into()),
                ("u1".into(), "s".into()),
                ("u2".into(), "s".into()),
            ]),
            BTreeMap::from([(
                "s".to_string(),
                dist([
                    ("u0".to_string(), nn(1, 4)),
                    ("u1".to_string(), nn(1, 4)),
                    ("u2".to_string(), nn(1, 2)),
                ])
                .unwrap(),
            )]),
        )
        .unwrap();
        let f = BTreeMap::from([
            ("u0".to_string(), "v01".to_string()),
            ("u1".to_string(), "v01".to_string()),
            ("u2".to_string(), "v2".to_string()),
        ]);
        let g = BTreeMap::from([
            ("v01".to_string(), "s".to_string()),
            ("v2".to_string(), "s".to_string()),
        ]);
        let m = marginalize(&h, &f, &g).unwrap();
        assert_eq!(m.fiber("s").weight(&"v01".into()), nn(1, 2));
        assert_eq!(m.fiber("s").weight(&"v2".into()), nn(1, 2));
    }

    #[test]
    fn marginalize_rejects_non_factorizations() {
        let h = RMap::new(
            FinSet::from(["s".to_string()]),
            FinSet::from(["u0".to_string(), "u1".to_string()]),
            BTreeMap::from([("u0".into(), "s".into()), ("u1".into(), "s".into())]),
            BTreeMap::from([(
                "s".to_string(),
                dist([("u0".to_string(), nn(1, 2)), ("u1".to_string(), nn(1, 2))]).unwrap(),
            )]),
        )
        .unwrap();
        let f = BTreeMap::from([
            ("u0".to_string(), "v".to_string()),
            ("u1".to_string(), "v".to_string()),
        ]);
        let g = BTreeMap::from([("v".to_string(), "w".to_string())]);
        assert!(matches!(
            marginalize(&h, &f, &g),
            Err(Error::NotAFactorization(_))
        ));
    }

    #[test]
    fn dropping_the_second_party_of_the_box_leaves_uniform_marginals() {
        let pr = canonical_pr_box();
        let (bundle, parties) = bipartite_bundle(
            &pr,
            &["a".to_string(), "a'".to_string()],
            &["b".to_string(), "b'".to_string()],
        )
        .unwrap();
        let alice = &parties[0];
        // point masses choosing the second party's measurement per stage
        let choice = BTreeMap::from([
            ("x".to_string(), BTreeMap::from([("x".to_string(), nn(1, 1))])),
            ("z_a".to_string(), BTreeMap::from([("z_ab".to_string(), nn(1, 1))])),
            ("z_a'".to_string(), BTreeMap::from([("z_a'b'".to_string(), nn(1, 1))])),
        ]);
        let marginal = marginal_through(&bundle, alice, &choice).unwrap();
        for leaf in ["z_a", "z_a'"] {
            for o in ["0", "1"] {
                assert_eq!(marginal.fiber(leaf).weight(&qualify(leaf, o)), nn(1, 2));
            }
        }
    }

    #[test]
    fn box_tables_satisfy_no_signalling_with_uniform_marginals() {
        let pr = canonical_pr_box();
        assert!(check_no_signalling(&pr).holds);
        for m in pr.scenario.measurement_order() {
            let marginal = pr.context_table(&[m.clone()]).unwrap();
            for o in pr.scenario.outcomes(&m).unwrap() {
                assert_eq!(marginal.weight(&asg(&[(&m, o)])), nn(1, 2));
            }
        }
    }

    #[test]
    fn deterministic_against_uniform_rows_signal_with_a_witness() {
        let scenario = scenario_222();
        let mut tables = Vec::new();
        for (i, ctx) in scenario.maximal_contexts().iter().enumerate() {
            let outcomes = scenario.joint_outcomes(ctx);
            let weights: BTreeMap<Assignment, NonNegRational> = outcomes
                .into_iter()
                .map(|a| {
                    let w = if i == 0 {
                        // point mass on 0,0 at the first context
                        if a.0.values().all(|o| o == "0") {
                            nn(1, 1)
                        } else {
                            nn(0, 1)
                        }
                    } else {
                        nn(1, 4)
                    };
                    (a, w)
                })
                .collect();
            tables.push(Distribution::make(weights).unwrap());
        }
        let model = EmpiricalModel::new(scenario, tables).unwrap();
        let report = check_no_signalling(&model);
        assert!(!report.holds);
        let w = report.witness.unwrap();
        assert_eq!(
            BTreeSet::from([w.value0.clone(), w.value1.clone()]),
            BTreeSet::from([nn(1, 1), nn(1, 2)])
        );
        assert!(matches!(find_global_section(&model), Err(Error::SignallingInput)));
    }

    #[test]
    fn single_context_scenarios_are_vacuously_no_signalling() {
        let scenario = crate::random::scenario_single(2);
        let table = Distribution::make(
            scenario
                .joint_outcomes(&scenario.maximal_contexts()[0])
                .into_iter()
                .map(|a| (a, nn(1, 4)))
                .collect::<BTreeMap<_, _>>(),
        )
        .unwrap();
        let model = EmpiricalModel::new(scenario, vec![table]).unwrap();
        assert!(check_no_signalling(&model).holds);
    }

    #[test]
    fn product_models_have_product_sections() {
        let product = product_demo_box();
        match find_global_section(&product).unwrap() {
            SectionOutcome::Section(s) => {
                for (i, ctx) in product.scenario.maximal_contexts().iter().enumerate() {
                    assert!(s.map_points(|g| g.restrict(ctx)).agrees(&product.tables[i]));
                }
            }
            SectionOutcome::Infeasible(_) => panic!("product models glue"),
        }
        assert!(!is_contextual(&product).unwrap());
        assert!(!is_strongly_contextual(&product).unwrap());
    }

    #[test]
    fn the_box_is_contextual_with_a_dual_certificate() {
        let pr = canonical_pr_box();
        match find_global_section(&pr).unwrap() {
            SectionOutcome::Infeasible(SectionCertificate::Dual { gap, .. }) => {
                assert!(num_traits::Signed::is_positive(&gap));
            }
            _ => panic!("the box has no section"),
        }
        assert!(is_contextual(&pr).unwrap());
        assert!(is_strongly_contextual(&pr).unwrap());
    }

    /// Exhaustive possibilistic oracle: search all subsets of the global
    /// assignments for one whose restriction supports match the tables.
    fn bool_section_exists_oracle(model: &EmpiricalModel<Boolean>) -> bool {
        let globals = model.scenario.global_assignments();
        let n = globals.len();
        assert!(n <= 16);
        'subsets: for mask in 1u32..(1 << n) {
            let chosen: Vec<&Assignment> = globals
                .iter()
                .enumerate()
                .filter(|(i, _)| mask & (1 << i) != 0)
                .map(|(_, g)| g)
                .collect();
            for (i, ctx) in model.scenario.maximal_contexts().iter().enumerate() {
                let projected: BTreeSet<Assignment> =
                    chosen.iter().map(|g| g.restrict(ctx)).collect();
                if projected != model.tables[i].support_set() {
                    continue 'subsets;
                }
            }
            return true;
        }
        false
    }

    #[test]
    fn hardy_supports_admit_no_possibilistic_section() {
        let hardy = canonical_hardy_supports();
        assert!(matches!(
            find_global_section(&hardy).unwrap(),
            SectionOutcome::Infeasible(SectionCertificate::UncoveredSupport { .. })
        ));
        assert!(!bool_section_exists_oracle(&hardy));
    }

    #[test]
    fn hardy_is_contextual_but_not_strongly() {
        let hardy = canonical_hardy_table();
        assert!(is_contextual(&hardy).unwrap());
        assert!(!is_strongly_contextual(&hardy).unwrap());
        // the named witness is support-consistent clause by clause
        let f = asg(&[("a", "1"), ("a'", "0"), ("b", "1"), ("b'", "0")]);
        for (i, ctx) in hardy.scenario.maximal_contexts().iter().enumerate() {
            assert!(!hardy.tables[i].weight(&f.restrict(ctx)).is_zero());
        }
        // and the search returns some support-consistent assignment
        let found = global_support_assignment(&hardy).unwrap().unwrap();
        for (i, ctx) in hardy.scenario.maximal_contexts().iter().enumerate() {
            assert!(!hardy.tables[i].weight(&found.restrict(ctx)).is_zero());
        }
    }

    #[test]
    fn hv_model_reproduces_product_tables() {
        let product = product_demo_box();
        let SectionOutcome::Section(section) = find_global_section(&product).unwrap() else {
            panic!("product models glue");
        };
        let hv = build_hv_model(&product, &section).unwrap();
        let back = extract_empirical(&hv.model, &product.scenario).unwrap();
        assert!(back.agrees(&product));
    }

    #[test]
    fn bool_single_context_hv_model_builds_from_supports() {
        let scenario = crate::random::scenario_single(2);
        let ctx = scenario.maximal_contexts()[0].clone();
        let weights: BTreeMap<Assignment, Boolean> = scenario
            .joint_outcomes(&ctx)
            .into_iter()
            .enumerate()
            .map(|(i, a)| (a, Boolean(i != 1)))
            .collect();
        let table = Distribution::make(weights).unwrap();
        let model = EmpiricalModel::new(scenario, vec![table]).unwrap();
        let SectionOutcome::Section(section) = find_global_section(&model).unwrap() else {
            panic!("single contexts glue");
        };
        assert_eq!(section.support_set(), model.tables[0].support_set());
        let hv = build_hv_model(&model, &section).unwrap();
        assert_eq!(hv.latent.len(), 4);
    }

    #[test]
    fn the_box_rejects_every_claimed_section() {
        let pr = canonical_pr_box();
        let globals = pr.scenario.global_assignments();
        let n = globals.len() as i64;
        let uniform = Distribution::make(
            globals.into_iter().map(|g| (g, nn(1, n))).collect::<BTreeMap<_, _>>(),
        )
        .unwrap();
        assert!(matches!(
            build_hv_model(&pr, &uniform),
            Err(Error::NotASection(_))
        ));
    }

    #[test]
    fn weak_model_weights_follow_the_minimum_formula() {
        let hardy = canonical_hardy_table();
        let f = asg(&[("a", "1"), ("a'", "0"), ("b", "1"), ("b'", "0")]);
        let (p_f, p_t, rows) = NonNegRational::weak_latent(&hardy, &f).unwrap();
        assert_eq!(p_f, nn(2, 5));
        assert_eq!(p_t, nn(3, 5));
        // row at the first context: witness outcome keeps (7/10 - 2/5) / (3/5)
        let ab = &hardy.scenario.maximal_contexts()[0];
        assert_eq!(rows[0][&f.restrict(ab)], nn(1, 2));
        // the anti-correlated context leaves the witness outcome at zero
        let last = &hardy.scenario.maximal_contexts()[3];
        assert_eq!(rows[3][&f.restrict(last)], nn(0, 1));
        let weak = build_weak_hv_model(&hardy, &f).unwrap();
        let back = extract_empirical(&weak, &hardy.scenario).unwrap();
        assert!(back.agrees(&hardy));
    }

    #[test]
    fn deterministic_tables_give_the_witness_full_weight() {
        let scenario = scenario_222();
        let f = asg(&[("a", "0"), ("a'", "1"), ("b", "0"), ("b'", "1")]);
        let tables = scenario
            .maximal_contexts()
            .iter()
            .map(|ctx| {
                let weights: BTreeMap<Assignment, NonNegRational> = scenario
                    .joint_outcomes(ctx)
                    .into_iter()
                    .map(|a| {
                        let hit = a == f.restrict(ctx);
                        (a, if hit { nn(1, 1) } else { nn(0, 1) })
                    })
                    .collect();
                Distribution::make(weights).unwrap()
            })
            .collect();
        let model = EmpiricalModel::new(scenario, tables).unwrap();
        let (p_f, p_t, _) = NonNegRational::weak_latent(&model, &f).unwrap();
        assert_eq!(p_f, nn(1, 1));
        assert_eq!(p_t, nn(0, 1));
        let weak = build_weak_hv_model(&model, &f).unwrap();
        let back = extract_empirical(&weak, &model.scenario).unwrap();
        assert!(back.agrees(&model));
    }

    #[test]
    fn the_box_rejects_every_weak_witness() {
        let pr = canonical_pr_box();
        for g in pr.scenario.global_assignments() {
            assert!(matches!(
                build_weak_hv_model(&pr, &g),
                Err(Error::NotAWitness)
            ));
        }
    }

    #[test]
    fn shipped_box_table_is_uniform_over_allowed_pairs() {
        let pr = canonical_pr_box();
        let ab = &pr.scenario.maximal_contexts()[0];
        assert_eq!(pr.tables[0].weight(&Assignment::from_csv(ab, "0,0").unwrap()), nn(1, 2));
        assert_eq!(pr.tables[0].weight(&Assignment::from_csv(ab, "1,1").unwrap()), nn(1, 2));
        assert_eq!(pr.tables[0].weight(&Assignment::from_csv(ab, "0,1").unwrap()), nn(0, 1));
        assert_eq!(pr.tables[0].weight(&Assignment::from_csv(ab, "1,0").unwrap()), nn(0, 1));
    }

    #[test]
    fn shipped_hardy_supports_match_the_clauses() {
        let hardy = canonical_hardy_supports();
        let contexts = hardy.scenario.maximal_contexts();
        // the both-zero outcome is possible at the first context
        assert!(!hardy.tables[0]
            .weight(&Assignment::from_csv(&contexts[0], "0,0").unwrap())
            .is_zero());
        // and the both-one outcome is the only impossible one at the last
        let last = &contexts[3];
        let supp = hardy.tables[3].support_set();
        let expected: BTreeSet<Assignment> = ["0,0", "0,1", "1,0"]
            .iter()
            .map(|csv| Assignment::from_csv(last, csv).unwrap())
            .collect();
        assert_eq!(supp, expected);
    }

    #[test]
    fn product_restriction_recovers_the_left_factor_under_point_mass_weights() {
        use crate::presheaf::fibered_product;
        use crate::tree::TreeProjection;
        // left party has genuine weights; right party answers deterministically
        let mk_party = |l0: &str, l1: &str, w: [(i64, i64); 4]| {
            let base = LabelTree::new("x", &[("x", "y", l0), ("x", "z", l1)]).unwrap();
            let fx = FinSet::from(["s".to_string()]);
            let fo = FinSet::from(["0".to_string(), "1".to_string()]);
            let mk = |w0: (i64, i64), w1: (i64, i64)| {
                RRelation::new(
                    fx.clone(),
                    fo.clone(),
                    BTreeMap::from([("s".into(), fo.clone())]),
                    BTreeMap::from([(
                        "s".into(),
                        BTreeMap::from([
                            ("0".into(), nn(w0.0, w0.1)),
                            ("1".into(), nn(w1.0, w1.1)),
                        ]),
                    )]),
                )
                .unwrap()
            };
            let edges = BTreeMap::from([(1, mk(w[0], w[1])), (2, mk(w[2], w[3]))]);
            RRelationalPresheaf::new(base, vec![fx.clone(), fo.clone(), fo.clone()], edges).unwrap()
        };
        let a = mk_party("a", "a'", [(1, 3), (2, 3), (1, 5), (4, 5)]);
        let b = mk_party("b", "b'", [(1, 1), (0, 1), (1, 1), (0, 1)]);
        let clock = LabelTree::new("c0", &[("c0", "c1", "t")]).unwrap();
        let leg = |t: &LabelTree| {
            TreeProjection::new(
                t,
                &clock,
                t.nodes().map(|n| (n, usize::from(n != t.root()))).collect(),
            )
            .unwrap()
        };
        let fp = fibered_product(&a, &leg(&a.base), &b, &leg(&b.base), &clock, |x, y| {
            format!("{x}{y}")
        })
        .unwrap();
        let bundle = vertical_bundle(&fp.presheaf).unwrap();
        let left = &fp.parties[0];
        // any stage weighting recovers the left factor exactly, here uniform
        let choice: BTreeMap<Elem, BTreeMap<Elem, NonNegRational>> = left
            .party_nodes
            .iter()
            .map(|t| {
                let fiber: Vec<Elem> = left
                    .node_map
                    .iter()
                    .filter(|(_, v)| *v == t)
                    .map(|(u, _)| u.clone())
                    .collect();
                let k = fiber.len() as i64;
                (
                    t.clone(),
                    fiber.into_iter().map(|u| (u, nn(1, k))).collect(),
                )
            })
            .collect();
        let marginal = marginal_through(&bundle, left, &choice).unwrap();
        // the left tree's y leaf carries the a-row, its z leaf the a'-row
        assert_eq!(marginal.fiber("y").weight(&"y/0".to_string()), nn(1, 3));
        assert_eq!(marginal.fiber("y").weight(&"y/1".to_string()), nn(2, 3));
        assert_eq!(marginal.fiber("z").weight(&"z/0".to_string()), nn(1, 5));
        assert_eq!(marginal.fiber("z").weight(&"z/1".to_string()), nn(4, 5));
    }
}
