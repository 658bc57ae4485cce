//! Weighted maps and relations between finite sets.
//!
//! An [`RMap`] from `X` to `Y` is a surjection `f : Y -> X` in the opposite
//! direction, with a normalized distribution on each fiber `f^-1(s)`. An
//! [`RRelation`] from `X` to `Y` is an entire relation with one distribution on
//! `Y` per source, whose support stays inside the related elements; the
//! inclusion may be strict, so a relation can admit transitions that a given
//! weighting assigns probability zero. [`StochasticMap`] forgets the relation
//! and keeps only the kernels.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::semiring::{Distribution, Semiring};

pub type Elem = String;
pub type FinSet = BTreeSet<Elem>;

/// A weighted reversed surjection: `under : Y ->> X` plus one normalized
/// distribution per fiber.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RMap<W: Semiring> {
    pub from: FinSet,
    pub to: FinSet,
    /// Defined on all of `to`, surjective onto `from`.
    pub under: BTreeMap<Elem, Elem>,
    pub fibers: BTreeMap<Elem, Distribution<Elem, W>>,
}

impl<W: Semiring> RMap<W> {
    pub fn new(
        from: FinSet,
        to: FinSet,
        under: BTreeMap<Elem, Elem>,
        fibers: BTreeMap<Elem, Distribution<Elem, W>>,
    ) -> Result<Self> {
        let m = RMap {
            from,
            to,
            under,
            fibers,
        };
        m.validate()?;
        Ok(m)
    }

    fn validate(&self) -> Result<()> {
        if self.under.len() != self.to.len() || !self.under.keys().all(|u| self.to.contains(u)) {
            return Err(Error::Mismatch("underlying map must be total on the codomain".into()));
        }
        let image: FinSet = self.under.values().cloned().collect();
        if image != self.from {
            return Err(Error::NotSurjective(format!("{:?}", self.from)));
        }
        for s in &self.from {
            let fiber: FinSet = self
                .under
                .iter()
                .filter(|(_, v)| *v == s)
                .map(|(u, _)| u.clone())
                .collect();
            let d = self
                .fibers
                .get(s)
                .ok_or_else(|| Error::FiberMismatch { src: s.clone() })?;
            let carrier: FinSet = d.carrier().cloned().collect();
            if carrier != fiber {
                return Err(Error::FiberMismatch { src: s.clone() });
            }
        }
        Ok(())
    }

    /// The unique weighted map on the identity.
    pub fn identity(set: &FinSet) -> Self {
        let under = set.iter().map(|s| (s.clone(), s.clone())).collect();
        let fibers = set
            .iter()
            .map(|s| (s.clone(), Distribution::unit(s.clone())))
            .collect();
        RMap {
            from: set.clone(),
            to: set.clone(),
            under,
            fibers,
        }
    }

    pub fn fiber(&self, s: &str) -> &Distribution<Elem, W> {
        &self.fibers[s]
    }
}

/// Composes weighted maps: the weight of `u` over `s` is the weight of the one
/// midpoint `f(u)` over `s` times the weight of `u` over that midpoint.
/// Normalization of the result is asserted, not assumed.
pub fn rmap_compose<W: Semiring>(g: &RMap<W>, f: &RMap<W>) -> Result<RMap<W>> {
    if g.to != f.from {
        return Err(Error::Mismatch(format!(
            "middle sets differ: {:?} vs {:?}",
            g.to, f.from
        )));
    }
    let under: BTreeMap<Elem, Elem> = f
        .under
        .iter()
        .map(|(u, t)| (u.clone(), g.under[t].clone()))
        .collect();
    let mut fibers = BTreeMap::new();
    for s in &g.from {
        let weights: BTreeMap<Elem, W> = under
            .iter()
            .filter(|(_, v)| *v == s)
            .map(|(u, _)| {
                let t = &f.under[u];
                let w = g.fiber(s).weight(t).mul(&f.fiber(t).weight(u));
                (u.clone(), w)
            })
            .collect();
        fibers.insert(s.clone(), Distribution::make(weights)?);
    }
    RMap::new(g.from.clone(), f.to.clone(), under, fibers)
}

/// An entire relation with one normalized distribution on the codomain per
/// source. Distributions are carried over the full codomain, with explicit
/// zeros on related-but-weightless pairs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RRelation<W: Semiring> {
    pub from: FinSet,
    pub to: FinSet,
    pub rel: BTreeMap<Elem, FinSet>,
    pub weights: BTreeMap<Elem, Distribution<Elem, W>>,
}

impl<W: Semiring> RRelation<W> {
    pub fn new(
        from: FinSet,
        to: FinSet,
        rel: BTreeMap<Elem, FinSet>,
        weights: BTreeMap<Elem, BTreeMap<Elem, W>>,
    ) -> Result<Self> {
        let mut full = BTreeMap::new();
        for s in &from {
            let mut table: BTreeMap<Elem, W> =
                to.iter().map(|u| (u.clone(), W::zero())).collect();
            for (u, w) in weights.get(s).into_iter().flatten() {
                if !to.contains(u) {
                    return Err(Error::Mismatch(format!("{u} is not in the codomain")));
                }
                table.insert(u.clone(), w.clone());
            }
            full.insert(s.clone(), Distribution::make(table)?);
        }
        let r = RRelation {
            from,
            to,
            rel,
            weights: full,
        };
        r.validate()?;
        Ok(r)
    }

    fn validate(&self) -> Result<()> {
        for s in &self.from {
            let image = self
                .rel
                .get(s)
                .filter(|im| !im.is_empty())
                .ok_or_else(|| Error::NotEntire { src: s.clone() })?;
            if !image.iter().all(|u| self.to.contains(u)) {
                return Err(Error::Mismatch(format!("image of {s} leaves the codomain")));
            }
            let d = self
                .weights
                .get(s)
                .ok_or_else(|| Error::FiberMismatch { src: s.clone() })?;
            if !d.support().all(|(u, _)| image.contains(u)) {
                return Err(Error::SupportEscapesRelation { src: s.clone() });
            }
        }
        Ok(())
    }

    pub fn identity(set: &FinSet) -> Self {
        let rel = set
            .iter()
            .map(|s| (s.clone(), FinSet::from([s.clone()])))
            .collect();
        let weights = set
            .iter()
            .map(|s| (s.clone(), BTreeMap::from([(s.clone(), W::one())])))
            .collect();
        RRelation::new(set.clone(), set.clone(), rel, weights).expect("identity is valid")
    }

    pub fn image(&self, s: &str) -> &FinSet {
        &self.rel[s]
    }

    pub fn dist(&self, s: &str) -> &Distribution<Elem, W> {
        &self.weights[s]
    }

    /// Equality that ignores carrier bookkeeping in the distributions.
    pub fn agrees(&self, other: &Self) -> bool {
        self.from == other.from
            && self.to == other.to
            && self.rel == other.rel
            && self
                .from
                .iter()
                .all(|s| self.dist(s).agrees(other.dist(s)))
    }
}

/// Composes weighted relations: relational composition underneath, and the
/// weight of `u` over `s` sums `d_s(t) * d_t(u)` over all midpoints.
pub fn rrel_compose<W: Semiring>(f: &RRelation<W>, g: &RRelation<W>) -> Result<RRelation<W>> {
    if f.to != g.from {
        return Err(Error::Mismatch(format!(
            "middle sets differ: {:?} vs {:?}",
            f.to, g.from
        )));
    }
    let mut rel = BTreeMap::new();
    let mut weights = BTreeMap::new();
    for s in &f.from {
        let mut image = FinSet::new();
        for t in f.image(s) {
            image.extend(g.image(t).iter().cloned());
        }
        let table: BTreeMap<Elem, W> = g
            .to
            .iter()
            .map(|u| {
                let w = f
                    .to
                    .iter()
                    .fold(W::zero(), |acc, t| {
                        acc.add(&f.dist(s).weight(t).mul(&g.dist(t).weight(u)))
                    });
                (u.clone(), w)
            })
            .collect();
        rel.insert(s.clone(), image);
        weights.insert(s.clone(), table);
    }
    RRelation::new(f.from.clone(), g.to.clone(), rel, weights)
}

/// Reads a weighted map as a weighted relation, flipping the direction once:
/// `s` relates to its whole fiber, and fiber weights extend by zero.
pub fn rmap_to_rrel<W: Semiring>(m: &RMap<W>) -> RRelation<W> {
    let rel: BTreeMap<Elem, FinSet> = m
        .from
        .iter()
        .map(|s| {
            let fiber = m
                .under
                .iter()
                .filter(|(_, v)| *v == s)
                .map(|(u, _)| u.clone())
                .collect();
            (s.clone(), fiber)
        })
        .collect();
    let weights = m
        .from
        .iter()
        .map(|s| (s.clone(), m.fiber(s).weights().clone()))
        .collect();
    RRelation::new(m.from.clone(), m.to.clone(), rel, weights)
        .expect("weighted maps convert to valid weighted relations")
}

/// An indexed family of kernels, with no underlying relation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StochasticMap<W: Semiring> {
    pub from: FinSet,
    pub to: FinSet,
    pub kernel: BTreeMap<Elem, Distribution<Elem, W>>,
}

impl<W: Semiring> StochasticMap<W> {
    pub fn agrees(&self, other: &Self) -> bool {
        self.from == other.from
            && self.to == other.to
            && self
                .from
                .iter()
                .all(|s| self.kernel[s].agrees(&other.kernel[s]))
    }
}

/// Forgets the underlying relation, keeping the kernels.
pub fn rrel_retract<W: Semiring>(r: &RRelation<W>) -> StochasticMap<W> {
    StochasticMap {
        from: r.from.clone(),
        to: r.to.clone(),
        kernel: r.weights.clone(),
    }
}

/// Sections a stochastic map by taking the relation to be the kernel supports.
/// Retracting the result always gives back `k`; the other round trip holds only
/// when supports already fill the relation.
pub fn stoch_section<W: Semiring>(k: &StochasticMap<W>) -> RRelation<W> {
    let rel = k
        .from
        .iter()
        .map(|s| (s.clone(), k.kernel[s].support_set()))
        .collect();
    let weights = k
        .from
        .iter()
        .map(|s| (s.clone(), k.kernel[s].weights().clone()))
        .collect();
    RRelation::new(k.from.clone(), k.to.clone(), rel, weights)
        .expect("kernels have nonempty supports")
}

pub fn stoch_compose<W: Semiring>(
    f: &StochasticMap<W>,
    g: &StochasticMap<W>,
) -> Result<StochasticMap<W>> {
    if f.to != g.from {
        return Err(Error::Mismatch("middle sets differ".into()));
    }
    let kernel = f
        .from
        .iter()
        .map(|s| {
            let d = f.kernel[s].bind(|t| g.kernel.get(t.as_str()).cloned())?;
            Ok((s.clone(), d))
        })
        .collect::<Result<_>>()?;
    Ok(StochasticMap {
        from: f.from.clone(),
        to: g.to.clone(),
        kernel,
    })
}

pub fn set(items: &[&str]) -> FinSet {
    items.iter().map(|s| s.to_string()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::semiring::{Boolean, NonNegRational};

    fn nn(p: i64, q: i64) -> NonNegRational {
        NonNegRational::ratio(p, q)
    }

    fn sample_rmap() -> RMap<NonNegRational> {
        // X = {s}, Y = {t0, t1} with fiber (1/2, 1/2)
        RMap::new(
            set(&["s"]),
            set(&["t0", "t1"]),
            BTreeMap::from([("t0".into(), "s".into()), ("t1".into(), "s".into())]),
            BTreeMap::from([(
                "s".into(),
                crate::semiring::dist([("t0".into(), nn(1, 2)), ("t1".into(), nn(1, 2))]).unwrap(),
            )]),
        )
        .unwrap()
    }

    #[test]
    fn identity_rmap_is_neutral() {
        let g = sample_rmap();
        let idx = RMap::identity(&g.from);
        let idy = RMap::identity(&g.to);
        assert_eq!(rmap_compose(&idx, &g).unwrap(), g);
        assert_eq!(rmap_compose(&g, &idy).unwrap(), g);
    }

    #[test]
    fn rmap_composition_multiplies_along_the_unique_midpoint() {
        let g = sample_rmap();
        // Z fibers {u00, u01} over t0 with (1/3, 2/3), {u10} over t1
        let f = RMap::new(
            set(&["t0", "t1"]),
            set(&["u00", "u01", "u10"]),
            BTreeMap::from([
                ("u00".into(), "t0".into()),
                ("u01".into(), "t0".into()),
                ("u10".into(), "t1".into()),
            ]),
            BTreeMap::from([
                (
                    "t0".into(),
                    crate::semiring::dist([("u00".into(), nn(1, 3)), ("u01".into(), nn(2, 3))])
                        .unwrap(),
                ),
                ("t1".into(), Distribution::unit("u10".into())),
            ]),
        )
        .unwrap();
        let h = rmap_compose(&g, &f).unwrap();
        assert_eq!(h.fiber("s").weight(&"u01".into()), nn(1, 3));
        assert_eq!(h.fiber("s").weight(&"u00".into()), nn(1, 6));
        assert_eq!(h.fiber("s").weight(&"u10".into()), nn(1, 2));
    }

    #[test]
    fn boolean_rmap_composition_tracks_preimage_chains() {
        // brute-force over all outcomes on sets of size <= 3
        let g: RMap<Boolean> = RMap::new(
            set(&["s"]),
            set(&["t0", "t1"]),
            BTreeMap::from([("t0".into(), "s".into()), ("t1".into(), "s".into())]),
            BTreeMap::from([(
                "s".into(),
                crate::semiring::dist([
                    ("t0".into(), Boolean(true)),
                    ("t1".into(), Boolean(true)),
                ])
                .unwrap(),
            )]),
        )
        .unwrap();
        let f: RMap<Boolean> = RMap::new(
            set(&["t0", "t1"]),
            set(&["u0", "u1", "u2"]),
            BTreeMap::from([
                ("u0".into(), "t0".into()),
                ("u1".into(), "t0".into()),
                ("u2".into(), "t1".into()),
            ]),
            BTreeMap::from([
                (
                    "t0".into(),
                    crate::semiring::dist([
                        ("u0".into(), Boolean(true)),
                        ("u1".into(), Boolean(false)),
                    ])
                    .unwrap(),
                ),
                ("t1".into(), Distribution::unit("u2".into())),
            ]),
        )
        .unwrap();
        let h = rmap_compose(&g, &f).unwrap();
        for u in &h.to {
            let t = &f.under[u];
            let expected = g.fiber("s").weight(t).mul(&f.fiber(t).weight(u));
            assert_eq!(h.fiber("s").weight(u), expected);
        }
        assert_eq!(
            h.fiber("s").support_set(),
            BTreeSet::from(["u0".to_string(), "u2".to_string()])
        );
    }

    #[test]
    fn identity_rrel_is_two_sided_unit() {
        let r = rmap_to_rrel(&sample_rmap());
        let idx = RRelation::identity(&r.from);
        let idy = RRelation::identity(&r.to);
        assert!(rrel_compose(&idx, &r).unwrap().agrees(&r));
        assert!(rrel_compose(&r, &idy).unwrap().agrees(&r));
    }

    #[test]
    fn colliding_paths_sum_to_full_weight() {
        // s -> {t0, t1} each 1/2; t0 -> u and t1 -> u with weight 1
        let f = rmap_to_rrel(&sample_rmap());
        let g = RRelation::new(
            set(&["t0", "t1"]),
            set(&["u"]),
            BTreeMap::from([
                ("t0".into(), set(&["u"])),
                ("t1".into(), set(&["u"])),
            ]),
            BTreeMap::from([
                ("t0".into(), BTreeMap::from([("u".into(), nn(1, 1))])),
                ("t1".into(), BTreeMap::from([("u".into(), nn(1, 1))])),
            ]),
        )
        .unwrap();
        let h = rrel_compose(&f, &g).unwrap();
        assert_eq!(h.dist("s").weight(&"u".into()), nn(1, 1));
    }

    #[test]
    fn conversion_sends_identities_to_identities() {
        let x = set(&["p", "q"]);
        assert!(rmap_to_rrel(&RMap::<NonNegRational>::identity(&x))
            .agrees(&RRelation::identity(&x)));
    }

    #[test]
    fn conversion_preserves_composition() {
        let g = sample_rmap();
        let f = RMap::new(
            set(&["t0", "t1"]),
            set(&["u0", "u1", "u2"]),
            BTreeMap::from([
                ("u0".into(), "t0".into()),
                ("u1".into(), "t0".into()),
                ("u2".into(), "t1".into()),
            ]),
            BTreeMap::from([
                (
                    "t0".into(),
                    crate::semiring::dist([("u0".into(), nn(1, 4)), ("u1".into(), nn(3, 4))])
                        .unwrap(),
                ),
                ("t1".into(), Distribution::unit("u2".into())),
            ]),
        )
        .unwrap();
        let lhs = rmap_to_rrel(&rmap_compose(&g, &f).unwrap());
        let rhs = rrel_compose(&rmap_to_rrel(&g), &rmap_to_rrel(&f)).unwrap();
        assert!(lhs.agrees(&rhs));
    }

    #[test]
    fn zero_weight_edge_breaks_the_section_round_trip() {
        // the relation admits s -> u1 but the weighting rules it out
        let r = RRelation::new(
            set(&["s"]),
            set(&["u0", "u1"]),
            BTreeMap::from([("s".into(), set(&["u0", "u1"]))]),
            BTreeMap::from([("s".into(), BTreeMap::from([("u0".into(), nn(1, 1))]))]),
        )
        .unwrap();
        let back = stoch_section(&rrel_retract(&r));
        assert!(!back.agrees(&r));
        assert_eq!(back.image("s"), &set(&["u0"]));
    }

    #[test]
    fn full_support_relations_round_trip() {
        let r = rmap_to_rrel(&sample_rmap());
        assert!(stoch_section(&rrel_retract(&r)).agrees(&r));
        // and retract . section is always the identity
        let k = rrel_retract(&r);
        assert!(rrel_retract(&stoch_section(&k)).agrees(&k));
    }

    #[test]
    fn retraction_preserves_composition() {
        let f = rmap_to_rrel(&sample_rmap());
        let g = RRelation::new(
            set(&["t0", "t1"]),
            set(&["u", "v"]),
            BTreeMap::from([
                ("t0".into(), set(&["u", "v"])),
                ("t1".into(), set(&["v"])),
            ]),
            BTreeMap::from([
                (
                    "t0".into(),
                    BTreeMap::from([("u".into(), nn(1, 3)), ("v".into(), nn(2, 3))]),
                ),
                ("t1".into(), BTreeMap::from([("v".into(), nn(1, 1))])),
            ]),
        )
        .unwrap();
        let lhs = rrel_retract(&rrel_compose(&f, &g).unwrap());
        let rhs = stoch_compose(&rrel_retract(&f), &rrel_retract(&g)).unwrap();
        assert!(lhs.agrees(&rhs));
    }
}
