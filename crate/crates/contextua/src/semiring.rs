//! Commutative semirings and finite-support normalized distributions.
//!
//! Three weight types are provided: [`Boolean`] (possibilistic), [`NonNegRational`]
//! (probabilistic, exact), and [`SignedRational`] (exact, allows negative weights).
//! Rational arithmetic is exact throughout; values are kept in lowest terms with a
//! positive denominator, so equality is structural. Floating point never appears.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};

/// A commutative semiring of transition weights.
///
/// `add` and `mul` must be associative and commutative with units `zero` and
/// `one`, `mul` must distribute over `add`, and `mul` by `zero` must yield
/// `zero`. The law tests live next to this module.
pub trait Semiring: Clone + Eq + Ord + std::hash::Hash + fmt::Debug + fmt::Display + Send + Sync {
    const NAME: &'static str;

    fn zero() -> Self;
    fn one() -> Self;
    fn add(&self, other: &Self) -> Self;
    fn mul(&self, other: &Self) -> Self;

    fn is_zero(&self) -> bool {
        *self == Self::zero()
    }

    /// Wire form: rationals as `"p/q"`/`"n"` strings, booleans as JSON booleans.
    fn to_json(&self) -> serde_json::Value;
    fn from_json(v: &serde_json::Value) -> Result<Self>;

    /// The rational read of a weight, used when comparing probability sums
    /// against rational bounds; booleans read as 0 and 1.
    fn as_probability(&self) -> BigRational;
}

/// A semiring in which every family with nonzero total renormalizes to one.
///
/// `div_exact` returns the unique `r'` with `r' * total = r` when it exists.
pub trait Normalizable: Semiring {
    fn div_exact(&self, total: &Self) -> Option<Self>;
}

/// The boolean semiring: `add = or`, `mul = and`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Boolean(pub bool);

impl fmt::Display for Boolean {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl Semiring for Boolean {
    const NAME: &'static str = "bool";

    fn zero() -> Self {
        Boolean(false)
    }
    fn one() -> Self {
        Boolean(true)
    }
    fn add(&self, other: &Self) -> Self {
        Boolean(self.0 || other.0)
    }
    fn mul(&self, other: &Self) -> Self {
        Boolean(self.0 && other.0)
    }
    fn to_json(&self) -> serde_json::Value {
        serde_json::Value::Bool(self.0)
    }
    fn from_json(v: &serde_json::Value) -> Result<Self> {
        match v {
            serde_json::Value::Bool(b) => Ok(Boolean(*b)),
            other => Err(Error::BadWeight(other.to_string())),
        }
    }
    fn as_probability(&self) -> BigRational {
        if self.0 {
            BigRational::one()
        } else {
            BigRational::zero()
        }
    }
}

impl Normalizable for Boolean {
    fn div_exact(&self, total: &Self) -> Option<Self> {
        // total is one; any nonzero boolean family renormalizes to itself.
        total.0.then_some(*self)
    }
}

fn parse_rational(text: &str) -> Result<BigRational> {
    let bad = || Error::BadWeight(text.to_string());
    let mut parts = text.splitn(2, '/');
    let numer: BigInt = parts.next().ok_or_else(bad)?.trim().parse().map_err(|_| bad())?;
    let denom: BigInt = match parts.next() {
        Some(d) => d.trim().parse().map_err(|_| bad())?,
        None => BigInt::one(),
    };
    if denom.is_zero() {
        return Err(bad());
    }
    Ok(BigRational::new(numer, denom))
}

fn rational_to_string(r: &BigRational) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

fn rational_from_json(v: &serde_json::Value) -> Result<BigRational> {
    match v {
        serde_json::Value::String(s) => parse_rational(s),
        serde_json::Value::Number(n) => {
            let i = n.as_i64().ok_or_else(|| Error::BadWeight(n.to_string()))?;
            Ok(BigRational::from_integer(BigInt::from(i)))
        }
        other => Err(Error::BadWeight(other.to_string())),
    }
}

/// Exact rationals `>= 0`. Construction rejects negative values; `BigRational`
/// keeps values in lowest terms with a positive denominator.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NonNegRational(BigRational);

impl NonNegRational {
    pub fn new(value: BigRational) -> Result<Self> {
        if value.is_negative() {
            Err(Error::NegativeWeight(rational_to_string(&value)))
        } else {
            Ok(NonNegRational(value))
        }
    }

    /// `p/q` with `p >= 0`, `q > 0`. Panics on invalid input; intended for constants.
    pub fn ratio(p: i64, q: i64) -> Self {
        assert!(q != 0, "zero denominator");
        let r = BigRational::new(BigInt::from(p), BigInt::from(q));
        NonNegRational::new(r).expect("negative constant")
    }

    pub fn parse(text: &str) -> Result<Self> {
        NonNegRational::new(parse_rational(text)?)
    }

    pub fn value(&self) -> &BigRational {
        &self.0
    }
}

impl fmt::Display for NonNegRational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", rational_to_string(&self.0))
    }
}

impl Semiring for NonNegRational {
    const NAME: &'static str = "nonneg-rational";

    fn zero() -> Self {
        NonNegRational(BigRational::zero())
    }
    fn one() -> Self {
        NonNegRational(BigRational::one())
    }
    fn add(&self, other: &Self) -> Self {
        NonNegRational(&self.0 + &other.0)
    }
    fn mul(&self, other: &Self) -> Self {
        NonNegRational(&self.0 * &other.0)
    }
    fn to_json(&self) -> serde_json::Value {
        serde_json::Value::String(rational_to_string(&self.0))
    }
    fn from_json(v: &serde_json::Value) -> Result<Self> {
        NonNegRational::new(rational_from_json(v)?)
    }
    fn as_probability(&self) -> BigRational {
        self.0.clone()
    }
}

impl Normalizable for NonNegRational {
    fn div_exact(&self, total: &Self) -> Option<Self> {
        if total.0.is_zero() {
            None
        } else {
            Some(NonNegRational(&self.0 / &total.0))
        }
    }
}

/// Exact rationals of either sign.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SignedRational(pub BigRational);

impl SignedRational {
    pub fn ratio(p: i64, q: i64) -> Self {
        assert!(q != 0, "zero denominator");
        SignedRational(BigRational::new(BigInt::from(p), BigInt::from(q)))
    }

    pub fn parse(text: &str) -> Result<Self> {
        Ok(SignedRational(parse_rational(text)?))
    }
}

impl fmt::Display for SignedRational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", rational_to_string(&self.0))
    }
}

impl Semiring for SignedRational {
    const NAME: &'static str = "rational";

    fn zero() -> Self {
        SignedRational(BigRational::zero())
    }
    fn one() -> Self {
        SignedRational(BigRational::one())
    }
    fn add(&self, other: &Self) -> Self {
        SignedRational(&self.0 + &other.0)
    }
    fn mul(&self, other: &Self) -> Self {
        SignedRational(&self.0 * &other.0)
    }
    fn to_json(&self) -> serde_json::Value {
        serde_json::Value::String(rational_to_string(&self.0))
    }
    fn from_json(v: &serde_json::Value) -> Result<Self> {
        Ok(SignedRational(rational_from_json(v)?))
    }
    fn as_probability(&self) -> BigRational {
        self.0.clone()
    }
}

impl Normalizable for SignedRational {
    fn div_exact(&self, total: &Self) -> Option<Self> {
        if total.0.is_zero() {
            None
        } else {
            Some(SignedRational(&self.0 / &total.0))
        }
    }
}

/// A normalized finite-support distribution over points of type `P`.
///
/// The carrier (the stored keys) is kept separate from the support (keys with
/// nonzero weight): zero-weight points stay representable, which matters when a
/// relation admits a transition that a particular weighting rules out.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Distribution<P: Ord + Clone, W: Semiring> {
    weights: BTreeMap<P, W>,
}

impl<P: Ord + Clone + fmt::Debug, W: Semiring> Distribution<P, W> {
    /// Builds a distribution, checking normalization and nonempty support.
    pub fn make(weights: BTreeMap<P, W>) -> Result<Self> {
        let total = weights
            .values()
            .fold(W::zero(), |acc, w| acc.add(w));
        if total != W::one() {
            return Err(Error::NotNormalized {
                total: total.to_string(),
            });
        }
        if weights.values().all(|w| w.is_zero()) {
            return Err(Error::EmptySupport);
        }
        Ok(Distribution { weights })
    }

    /// The point mass at `x`: the unit of the distribution monad.
    pub fn unit(x: P) -> Self {
        let mut weights = BTreeMap::new();
        weights.insert(x, W::one());
        Distribution { weights }
    }

    /// Monadic bind: weights the point `u` by `sum_t d(t) * k(t)(u)`.
    ///
    /// `k` must be defined on every support point of `self`.
    pub fn bind<Q: Ord + Clone + fmt::Debug>(
        &self,
        mut k: impl FnMut(&P) -> Option<Distribution<Q, W>>,
    ) -> Result<Distribution<Q, W>> {
        let mut acc: BTreeMap<Q, W> = BTreeMap::new();
        for (t, w) in self.support() {
            let d = k(t).ok_or_else(|| Error::UndefinedKernel {
                point: format!("{t:?}"),
            })?;
            for (u, v) in d.weights.iter() {
                let term = w.mul(v);
                acc.entry(u.clone())
                    .and_modify(|cur| *cur = cur.add(&term))
                    .or_insert(term);
            }
        }
        Distribution::make(acc)
    }

    /// Carrier points, including those with weight zero.
    pub fn carrier(&self) -> impl Iterator<Item = &P> {
        self.weights.keys()
    }

    /// Points with nonzero weight, paired with their weights.
    pub fn support(&self) -> impl Iterator<Item = (&P, &W)> {
        self.weights.iter().filter(|(_, w)| !w.is_zero())
    }

    pub fn support_set(&self) -> std::collections::BTreeSet<P> {
        self.support().map(|(p, _)| p.clone()).collect()
    }

    /// The weight at `p`; zero for points outside the carrier.
    pub fn weight(&self, p: &P) -> W {
        self.weights.get(p).cloned().unwrap_or_else(W::zero)
    }

    pub fn weights(&self) -> &BTreeMap<P, W> {
        &self.weights
    }

    pub fn into_weights(self) -> BTreeMap<P, W> {
        self.weights
    }

    /// Equality as weight functions, ignoring carrier differences.
    pub fn agrees(&self, other: &Self) -> bool {
        let keys: std::collections::BTreeSet<&P> =
            self.weights.keys().chain(other.weights.keys()).collect();
        keys.into_iter().all(|p| self.weight(p) == other.weight(p))
    }

    /// Re-keys the carrier through `f`, summing weights of collided points.
    pub fn map_points<Q: Ord + Clone + fmt::Debug>(&self, mut f: impl FnMut(&P) -> Q) -> Distribution<Q, W> {
        let mut acc: BTreeMap<Q, W> = BTreeMap::new();
        for (p, w) in self.weights.iter() {
            let q = f(p);
            acc.entry(q)
                .and_modify(|cur| *cur = cur.add(w))
                .or_insert_with(|| w.clone());
        }
        Distribution { weights: acc }
    }
}

impl<P: Ord + Clone + fmt::Debug, W: Normalizable> Distribution<P, W> {
    /// Renormalizes a weight family with nonzero total.
    ///
    /// Zero-weight members stay in the carrier with weight zero.
    pub fn normalize(family: BTreeMap<P, W>) -> Result<Self> {
        let total = family.values().fold(W::zero(), |acc, w| acc.add(w));
        if total.is_zero() {
            return Err(Error::ZeroTotal);
        }
        let weights = family
            .into_iter()
            .map(|(p, w)| {
                let scaled = w
                    .div_exact(&total)
                    .ok_or(Error::NotNormalizable(W::NAME))?;
                Ok((p, scaled))
            })
            .collect::<Result<BTreeMap<P, W>>>()?;
        Distribution::make(weights)
    }
}

/// Convenience constructor for literal weight maps in tests and demos.
pub fn dist<P: Ord + Clone + fmt::Debug, W: Semiring>(
    pairs: impl IntoIterator<Item = (P, W)>,
) -> Result<Distribution<P, W>> {
    Distribution::make(pairs.into_iter().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn nn(p: i64, q: i64) -> NonNegRational {
        NonNegRational::ratio(p, q)
    }

    #[test]
    fn point_mass_has_singleton_support() {
        let d = Distribution::<_, NonNegRational>::unit("x");
        assert_eq!(d.support_set(), std::collections::BTreeSet::from(["x"]));
        assert_eq!(d.weight(&"x"), NonNegRational::one());
    }

    #[test]
    fn boolean_idempotence_admits_two_true_weights() {
        let d = dist([("x", Boolean(true)), ("y", Boolean(true))]).unwrap();
        assert_eq!(d.support().count(), 2);
    }

    #[test]
    fn under_normalized_family_is_rejected() {
        let err = dist([("x", nn(1, 3)), ("y", nn(1, 3))]).unwrap_err();
        assert!(matches!(err, Error::NotNormalized { .. }));
    }

    #[test]
    fn all_zero_family_is_rejected() {
        let err = dist::<_, Boolean>([("x", Boolean(false))]).unwrap_err();
        // fails normalization before the support check
        assert!(matches!(err, Error::NotNormalized { .. } | Error::EmptySupport));
    }

    #[test]
    fn normalize_halves_a_symmetric_family() {
        let d = Distribution::normalize(BTreeMap::from([("x", nn(1, 1)), ("y", nn(1, 1))])).unwrap();
        assert_eq!(d.weight(&"x"), nn(1, 2));
        assert_eq!(d.weight(&"y"), nn(1, 2));
    }

    #[test]
    fn normalize_keeps_an_already_normalized_family() {
        let d = Distribution::normalize(BTreeMap::from([
            ("x", nn(3, 4)),
            ("y", nn(1, 4)),
            ("z", nn(0, 1)),
        ]))
        .unwrap();
        assert_eq!(d.weight(&"x"), nn(3, 4));
        assert_eq!(d.weight(&"y"), nn(1, 4));
        assert_eq!(d.weight(&"z"), NonNegRational::zero());
        assert_eq!(d.carrier().count(), 3);
        assert_eq!(d.support().count(), 2);
    }

    #[test]
    fn booleans_renormalize_to_themselves() {
        let d = Distribution::normalize(BTreeMap::from([
            ("x", Boolean(true)),
            ("y", Boolean(false)),
        ]))
        .unwrap();
        assert_eq!(d.weight(&"x"), Boolean(true));
        assert_eq!(d.weight(&"y"), Boolean(false));
    }

    #[test]
    fn normalize_rejects_zero_total() {
        let err =
            Distribution::normalize(BTreeMap::from([("x", NonNegRational::zero())])).unwrap_err();
        assert_eq!(err, Error::ZeroTotal);
    }

    #[test]
    fn bind_expands_by_hand_computed_weights() {
        // bind({x: 1/2, y: 1/2}, x -> {u: 1}, y -> {u: 1/2, v: 1/2}) = {u: 3/4, v: 1/4}
        let d = dist([("x", nn(1, 2)), ("y", nn(1, 2))]).unwrap();
        let got = d
            .bind(|p| {
                Some(match *p {
                    "x" => dist([("u", nn(1, 1))]).unwrap(),
                    _ => dist([("u", nn(1, 2)), ("v", nn(1, 2))]).unwrap(),
                })
            })
            .unwrap();
        assert_eq!(got.weight(&"u"), nn(3, 4));
        assert_eq!(got.weight(&"v"), nn(1, 4));
    }

    #[test]
    fn bind_reports_missing_kernel() {
        let d = dist([("x", nn(1, 2)), ("y", nn(1, 2))]).unwrap();
        let err = d
            .bind(|p| (*p == "x").then(|| Distribution::unit("u")))
            .unwrap_err();
        assert!(matches!(err, Error::UndefinedKernel { .. }));
    }

    fn arb_rational() -> impl Strategy<Value = NonNegRational> {
        (0i64..40, 1i64..12).prop_map(|(p, q)| nn(p, q))
    }

    fn arb_signed() -> impl Strategy<Value = SignedRational> {
        (-40i64..40, 1i64..12).prop_map(|(p, q)| SignedRational::ratio(p, q))
    }

    /// Small random distributions over carriers of size <= 5.
    fn arb_dist() -> impl Strategy<Value = Distribution<u8, NonNegRational>> {
        proptest::collection::btree_map(0u8..5, (1i64..6, 1i64..6), 1..5).prop_map(|m| {
            let family: BTreeMap<u8, NonNegRational> =
                m.into_iter().map(|(k, (p, q))| (k, nn(p, q))).collect();
            Distribution::normalize(family).unwrap()
        })
    }

    fn arb_bool_dist() -> impl Strategy<Value = Distribution<u8, Boolean>> {
        proptest::collection::btree_set(0u8..5, 1..5).prop_map(|s| {
            let family: BTreeMap<u8, Boolean> = s.into_iter().map(|k| (k, Boolean(true))).collect();
            Distribution::make(family).unwrap()
        })
    }

    proptest! {
        #[test]
        fn rational_semiring_laws(a in arb_rational(), b in arb_rational(), c in arb_rational()) {
            prop_assert_eq!(a.add(&b).add(&c), a.add(&b.add(&c)));
            prop_assert_eq!(a.add(&b), b.add(&a));
            prop_assert_eq!(a.mul(&b.add(&c)), a.mul(&b).add(&a.mul(&c)));
            prop_assert_eq!(a.mul(&NonNegRational::one()), a.clone());
            prop_assert_eq!(a.add(&NonNegRational::zero()), a.clone());
            prop_assert_eq!(a.mul(&NonNegRational::zero()), NonNegRational::zero());
        }

        #[test]
        fn signed_semiring_laws(a in arb_signed(), b in arb_signed(), c in arb_signed()) {
            prop_assert_eq!(a.add(&b).add(&c), a.add(&b.add(&c)));
            prop_assert_eq!(a.mul(&b).mul(&c), a.mul(&b.mul(&c)));
            prop_assert_eq!(a.mul(&b.add(&c)), a.mul(&b).add(&a.mul(&c)));
        }

        #[test]
        fn monad_left_unit(x in 0u8..5, d in arb_dist()) {
            let lhs = Distribution::unit(x).bind(|_| Some(d.clone())).unwrap();
            prop_assert_eq!(lhs, d);
        }

        #[test]
        fn monad_right_unit(d in arb_dist()) {
            let lhs = d.bind(|p| Some(Distribution::unit(*p))).unwrap();
            prop_assert!(lhs.agrees(&d));
        }

        #[test]
        fn monad_associativity(d in arb_dist()) {
            // two fixed kernels with full domains
            let k1 = |p: &u8| Some(Distribution::normalize(BTreeMap::from([
                (p.wrapping_add(1) % 5, nn(1, 3)),
                (p.wrapping_add(2) % 5, nn(2, 3)),
            ])).unwrap());
            let k2 = |p: &u8| Some(Distribution::unit(*p / 2));
            let lhs = d.bind(k1).unwrap().bind(k2).unwrap();
            let rhs = d.bind(|p| Some(k1(p).unwrap().bind(k2).unwrap())).unwrap();
            prop_assert!(lhs.agrees(&rhs));
        }

        #[test]
        fn normalize_output_passes_make(d in arb_dist()) {
            prop_assert!(Distribution::make(d.weights().clone()).is_ok());
        }

        #[test]
        fn boolean_bind_support_is_union(d in arb_bool_dist()) {
            let k = |p: &u8| Some(Distribution::<u8, Boolean>::make(BTreeMap::from([
                (*p % 3, Boolean(true)),
                (p.wrapping_add(1) % 3, Boolean(true)),
            ])).unwrap());
            let bound = d.bind(k).unwrap();
            let mut expected = std::collections::BTreeSet::new();
            for (p, _) in d.support() {
                expected.extend(k(p).unwrap().support_set());
            }
            prop_assert_eq!(bound.support_set(), expected);
        }
    }
}
