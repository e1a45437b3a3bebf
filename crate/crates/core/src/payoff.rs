//! The payoff catalog.
//!
//! Every payoff is evaluated exactly on ultimately periodic colour words
//! ([`LassoWord`]) and, for the shift-invariant ones, on recurrent classes of an
//! induced Markov chain. The shift-invariance and submixing checkers are
//! refuters: a returned witness proves a violation, an empty result over a
//! corpus is only evidence.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_traits::{One, Pow, Signed, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::chain::RecurrentClassSummary;
use crate::error::{Error, Result};
use crate::rational::{self, int, Q};

// ----- colours -----------------------------------------------------------------

/// Colour attached to a (state, action) pair.
///
/// `Int` covers integer rewards, parity priorities, counter increments and the
/// 0/1 alphabet; the payoff decides how the integer is read.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Colour {
    Int(i64),
    Discounted { reward: Q, discount: Q },
    Vector(Vec<i64>),
    /// A letter; the empty string is the empty word ε.
    Letter(String),
    Flagged { reward: i64, buchi: bool },
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum ColourKind {
    Int,
    Discounted,
    Vector(usize),
    Letter,
    Flagged,
}

impl ColourKind {
    pub fn compatible(&self, other: &ColourKind) -> bool {
        self == other
    }
}

impl fmt::Display for ColourKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ColourKind::Int => write!(f, "integer"),
            ColourKind::Discounted => write!(f, "reward-discount pair"),
            ColourKind::Vector(k) => write!(f, "reward vector of dimension {k}"),
            ColourKind::Letter => write!(f, "letter"),
            ColourKind::Flagged => write!(f, "reward-Büchi pair"),
        }
    }
}

impl Colour {
    pub fn kind(&self) -> ColourKind {
        match self {
            Colour::Int(_) => ColourKind::Int,
            Colour::Discounted { .. } => ColourKind::Discounted,
            Colour::Vector(v) => ColourKind::Vector(v.len()),
            Colour::Letter(_) => ColourKind::Letter,
            Colour::Flagged { .. } => ColourKind::Flagged,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Colour::Discounted { discount, .. } = self {
            if discount.is_negative() || *discount >= Q::one() {
                return Err(Error::InvalidArena(format!(
                    "discount {} outside [0,1)",
                    rational::format(discount)
                )));
            }
        }
        Ok(())
    }
}

impl fmt::Display for Colour {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Colour::Int(n) => write!(f, "{n}"),
            Colour::Discounted { reward, discount } => {
                write!(f, "({},{})", rational::format(reward), rational::format(discount))
            }
            Colour::Vector(v) => {
                let parts: Vec<String> = v.iter().map(|x| x.to_string()).collect();
                write!(f, "({})", parts.join(","))
            }
            Colour::Letter(l) if l.is_empty() => write!(f, "ε"),
            Colour::Letter(l) => write!(f, "{l}"),
            Colour::Flagged { reward, buchi } => write!(f, "{reward}{}", if *buchi { "!" } else { "" }),
        }
    }
}

impl Serialize for Colour {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeMap;
        match self {
            Colour::Int(n) => s.serialize_i64(*n),
            Colour::Vector(v) => v.serialize(s),
            Colour::Letter(l) => s.serialize_str(l),
            Colour::Discounted { reward, discount } => {
                let mut m = s.serialize_map(Some(2))?;
                m.serialize_entry("reward", &rational::format(reward))?;
                m.serialize_entry("discount", &rational::format(discount))?;
                m.end()
            }
            Colour::Flagged { reward, buchi } => {
                let mut m = s.serialize_map(Some(2))?;
                m.serialize_entry("reward", reward)?;
                m.serialize_entry("buchi", buchi)?;
                m.end()
            }
        }
    }
}

impl<'de> Deserialize<'de> for Colour {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        use serde_json::Value;
        let value = Value::deserialize(d)?;
        let err = |m: &str| D::Error::custom(format!("invalid colour {value}: {m}"));
        match &value {
            Value::Number(n) => n.as_i64().map(Colour::Int).ok_or_else(|| err("expected an integer")),
            Value::String(s) => Ok(Colour::Letter(s.clone())),
            Value::Array(items) => items
                .iter()
                .map(|x| x.as_i64().ok_or_else(|| err("vector entries must be integers")))
                .collect::<std::result::Result<Vec<_>, _>>()
                .map(Colour::Vector),
            Value::Object(map) => {
                let as_q = |v: &Value| -> std::result::Result<Q, D::Error> {
                    match v {
                        Value::String(s) => rational::parse(s).map_err(|e| err(&e.to_string())),
                        Value::Number(n) => n.as_i64().map(int).ok_or_else(|| err("expected an integer")),
                        _ => Err(err("expected a rational")),
                    }
                };
                if let Some(discount) = map.get("discount") {
                    let reward = as_q(map.get("reward").ok_or_else(|| err("missing reward"))?)?;
                    if map.len() != 2 {
                        return Err(err("unexpected fields"));
                    }
                    Ok(Colour::Discounted { reward, discount: as_q(discount)? })
                } else if let Some(buchi) = map.get("buchi") {
                    let reward = map
                        .get("reward")
                        .and_then(Value::as_i64)
                        .ok_or_else(|| err("missing integer reward"))?;
                    let buchi = buchi.as_bool().ok_or_else(|| err("buchi must be a boolean"))?;
                    if map.len() != 2 {
                        return Err(err("unexpected fields"));
                    }
                    Ok(Colour::Flagged { reward, buchi })
                } else {
                    Err(err("object colours need `discount` or `buchi`"))
                }
            }
            _ => Err(err("unsupported colour")),
        }
    }
}

// ----- payoff specifications ----------------------------------------------------

/// The closed payoff catalog.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum PayoffSpec {
    /// Limsup of Cesàro averages of integer rewards.
    Mean,
    /// `r0 + λ0 r1 + λ0 λ1 r2 + ...`
    Discounted,
    /// 1 iff the highest priority seen infinitely often is odd.
    Parity,
    Limsup,
    Liminf,
    /// 1 iff the mean payoff is strictly positive.
    PositiveAverage,
    /// 1 iff `limsup Σ c_i = +∞`.
    CounterLimsupPosInf,
    /// 1 iff `liminf Σ c_i = −∞`.
    CounterLiminfNegInf,
    /// 1 iff every coordinate has mean payoff `> 0`.
    GeneralizedMean(usize),
    /// 1 iff some coordinate has mean payoff `>= 0`.
    OptimisticGeneralizedMean(usize),
    /// `−B` if flagged colours occur infinitely often, the mean payoff otherwise.
    MeanCoBuchi(Q),
    /// 0 iff the word shares a suffix with `p a b² a b⁴ a b⁶ ...`, 1 otherwise.
    SuffixTarget(Vec<String>),
    /// 0 on the all-zero word, `1 − 2^{−n}` for the first index `n` carrying a 1.
    GeometricFirstOne,
}

impl PayoffSpec {
    /// `f(cu) = f(u)` for every colour `c` and word `u`.
    pub fn is_shift_invariant(&self) -> bool {
        !matches!(self, PayoffSpec::Discounted | PayoffSpec::GeometricFirstOne)
    }

    /// `f(w) <= max(f(u), f(v))` for every shuffle `w` of `u` and `v`.
    pub fn is_submixing(&self) -> bool {
        matches!(
            self,
            PayoffSpec::Mean
                | PayoffSpec::Parity
                | PayoffSpec::Limsup
                | PayoffSpec::Liminf
                | PayoffSpec::PositiveAverage
                | PayoffSpec::OptimisticGeneralizedMean(_)
                | PayoffSpec::MeanCoBuchi(_)
                | PayoffSpec::CounterLimsupPosInf
        )
    }

    /// Shift-invariant payoffs whose almost-sure value on a recurrent class is
    /// determined by the class statistics.
    pub fn is_class_determined(&self) -> bool {
        self.is_shift_invariant() && !matches!(self, PayoffSpec::SuffixTarget(_))
    }

    /// Payoffs for which both players have pure stationary optimal strategies.
    pub fn is_both_positional(&self) -> bool {
        matches!(
            self,
            PayoffSpec::Mean | PayoffSpec::Discounted | PayoffSpec::Parity | PayoffSpec::Limsup | PayoffSpec::Liminf
        )
    }

    pub fn colour_kind(&self) -> ColourKind {
        match self {
            PayoffSpec::Discounted => ColourKind::Discounted,
            PayoffSpec::GeneralizedMean(k) | PayoffSpec::OptimisticGeneralizedMean(k) => ColourKind::Vector(*k),
            PayoffSpec::MeanCoBuchi(_) => ColourKind::Flagged,
            PayoffSpec::SuffixTarget(_) => ColourKind::Letter,
            _ => ColourKind::Int,
        }
    }

    /// Checks that a colour suits this payoff (kind and value range).
    pub fn check_colour(&self, colour: &Colour) -> Result<()> {
        let expected = self.colour_kind();
        let found = colour.kind();
        if expected != found {
            return Err(Error::ColourKind {
                spec: self.to_string(),
                expected: expected.to_string(),
                found: found.to_string(),
            });
        }
        match (self, colour) {
            (PayoffSpec::Parity, Colour::Int(p)) if *p < 0 => Err(Error::ColourKind {
                spec: self.to_string(),
                expected: "non-negative priority".into(),
                found: p.to_string(),
            }),
            (PayoffSpec::GeometricFirstOne, Colour::Int(c)) if *c != 0 && *c != 1 => Err(Error::ColourKind {
                spec: self.to_string(),
                expected: "colour in {0,1}".into(),
                found: c.to_string(),
            }),
            _ => colour.validate(),
        }
    }

    pub fn check_colours<'a>(&self, colours: impl IntoIterator<Item = &'a Colour>) -> Result<()> {
        colours.into_iter().try_for_each(|c| self.check_colour(c))
    }

    /// Checks every colour of an arena.
    pub fn check_arena(&self, arena: &crate::arena::Arena) -> Result<()> {
        (0..arena.num_states())
            .flat_map(|s| arena.actions(s).iter())
            .try_for_each(|a| self.check_colour(&a.colour))
    }
}

impl fmt::Display for PayoffSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PayoffSpec::Mean => write!(f, "mean"),
            PayoffSpec::Discounted => write!(f, "discounted"),
            PayoffSpec::Parity => write!(f, "parity"),
            PayoffSpec::Limsup => write!(f, "limsup"),
            PayoffSpec::Liminf => write!(f, "liminf"),
            PayoffSpec::PositiveAverage => write!(f, "posavg"),
            PayoffSpec::CounterLimsupPosInf => write!(f, "counter+inf"),
            PayoffSpec::CounterLiminfNegInf => write!(f, "counter-inf"),
            PayoffSpec::GeneralizedMean(k) => write!(f, "genmean:{k}"),
            PayoffSpec::OptimisticGeneralizedMean(k) => write!(f, "optgenmean:{k}"),
            PayoffSpec::MeanCoBuchi(b) => write!(f, "meancobuchi:{}", rational::format(b)),
            PayoffSpec::SuffixTarget(p) => write!(f, "suffixtarget:{}", p.concat()),
            PayoffSpec::GeometricFirstOne => write!(f, "geomfirstone"),
        }
    }
}

impl FromStr for PayoffSpec {
    type Err = Error;

    fn from_str(text: &str) -> Result<PayoffSpec> {
        let (head, arg) = match text.split_once(':') {
            Some((h, a)) => (h, Some(a)),
            None => (text, None),
        };
        let dim = |arg: Option<&str>| -> Result<usize> {
            let k: usize = arg
                .ok_or_else(|| Error::Parse(format!("{head} needs a dimension, e.g. {head}:2")))?
                .parse()
                .map_err(|_| Error::Parse(format!("invalid dimension in {text:?}")))?;
            if k == 0 {
                return Err(Error::Parse("dimension must be positive".into()));
            }
            Ok(k)
        };
        let no_arg = |spec: PayoffSpec| -> Result<PayoffSpec> {
            match arg {
                None => Ok(spec),
                Some(_) => Err(Error::Parse(format!("{head} takes no parameter"))),
            }
        };
        match head {
            "mean" => no_arg(PayoffSpec::Mean),
            "discounted" => no_arg(PayoffSpec::Discounted),
            "parity" => no_arg(PayoffSpec::Parity),
            "limsup" => no_arg(PayoffSpec::Limsup),
            "liminf" => no_arg(PayoffSpec::Liminf),
            "posavg" => no_arg(PayoffSpec::PositiveAverage),
            "counter+inf" => no_arg(PayoffSpec::CounterLimsupPosInf),
            "counter-inf" => no_arg(PayoffSpec::CounterLiminfNegInf),
            "geomfirstone" => no_arg(PayoffSpec::GeometricFirstOne),
            "genmean" => Ok(PayoffSpec::GeneralizedMean(dim(arg)?)),
            "optgenmean" => Ok(PayoffSpec::OptimisticGeneralizedMean(dim(arg)?)),
            "meancobuchi" => {
                let b = rational::parse(arg.ok_or_else(|| Error::Parse("meancobuchi needs a penalty".into()))?)?;
                Ok(PayoffSpec::MeanCoBuchi(b))
            }
            "suffixtarget" => {
                let p = arg.unwrap_or("");
                Ok(PayoffSpec::SuffixTarget(p.chars().map(|c| c.to_string()).collect()))
            }
            _ => Err(Error::Parse(format!("unknown payoff {text:?}"))),
        }
    }
}

impl Serialize for PayoffSpec {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for PayoffSpec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        text.parse().map_err(serde::de::Error::custom)
    }
}

// ----- lasso words ------------------------------------------------------------

/// The ultimately periodic word `prefix · cycle^ω`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LassoWord<T> {
    pub prefix: Vec<T>,
    pub cycle: Vec<T>,
}

impl<T: Clone> LassoWord<T> {
    /// Panics if `cycle` is empty.
    pub fn new(prefix: Vec<T>, cycle: Vec<T>) -> Self {
        assert!(!cycle.is_empty(), "lasso cycle must be non-empty");
        LassoWord { prefix, cycle }
    }

    pub fn periodic(cycle: Vec<T>) -> Self {
        LassoWord::new(Vec::new(), cycle)
    }

    pub fn letter(&self, i: usize) -> &T {
        if i < self.prefix.len() {
            &self.prefix[i]
        } else {
            &self.cycle[(i - self.prefix.len()) % self.cycle.len()]
        }
    }

    /// The word with its first `k` letters removed.
    pub fn suffix(&self, k: usize) -> LassoWord<T> {
        if k <= self.prefix.len() {
            LassoWord::new(self.prefix[k..].to_vec(), self.cycle.clone())
        } else {
            let r = (k - self.prefix.len()) % self.cycle.len();
            let mut cycle = self.cycle[r..].to_vec();
            cycle.extend_from_slice(&self.cycle[..r]);
            LassoWord::new(Vec::new(), cycle)
        }
    }

    pub fn unroll(&self, n: usize) -> Vec<T> {
        (0..n).map(|i| self.letter(i).clone()).collect()
    }

    pub fn map<U: Clone>(&self, f: impl Fn(&T) -> U) -> LassoWord<U> {
        LassoWord::new(self.prefix.iter().map(&f).collect(), self.cycle.iter().map(&f).collect())
    }
}

impl<T: fmt::Display> fmt::Display for LassoWord<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |v: &[T]| v.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(" ");
        if self.prefix.is_empty() {
            write!(f, "({})^ω", join(&self.cycle))
        } else {
            write!(f, "{} ({})^ω", join(&self.prefix), join(&self.cycle))
        }
    }
}

// ----- evaluation ---------------------------------------------------------------

fn ints(spec: &PayoffSpec, colours: &[Colour]) -> Result<Vec<i64>> {
    colours
        .iter()
        .map(|c| {
            spec.check_colour(c)?;
            match c {
                Colour::Int(n) => Ok(*n),
                _ => unreachable!("kind checked"),
            }
        })
        .collect()
}

fn vectors(spec: &PayoffSpec, colours: &[Colour]) -> Result<Vec<Vec<i64>>> {
    colours
        .iter()
        .map(|c| {
            spec.check_colour(c)?;
            match c {
                Colour::Vector(v) => Ok(v.clone()),
                _ => unreachable!("kind checked"),
            }
        })
        .collect()
}

fn indicator(b: bool) -> Q {
    if b {
        Q::one()
    } else {
        Q::zero()
    }
}

fn mean_of(values: &[i64]) -> Q {
    let sum: i64 = values.iter().sum();
    rational::ratio(sum, values.len() as i64)
}

fn coordinate_means(vs: &[Vec<i64>], k: usize) -> Vec<Q> {
    (0..k)
        .map(|i| {
            let column: Vec<i64> = vs.iter().map(|v| v[i]).collect();
            mean_of(&column)
        })
        .collect()
}

/// Exact payoff of the infinite word `prefix · cycle^ω`.
pub fn evaluate_lasso(spec: &PayoffSpec, word: &LassoWord<Colour>) -> Result<Q> {
    if word.cycle.is_empty() {
        return Err(Error::Parse("lasso cycle must be non-empty".into()));
    }
    spec.check_colours(word.prefix.iter().chain(&word.cycle))?;
    Ok(match spec {
        PayoffSpec::Mean => mean_of(&ints(spec, &word.cycle)?),
        PayoffSpec::PositiveAverage => indicator(mean_of(&ints(spec, &word.cycle)?).is_positive()),
        PayoffSpec::Limsup => int(*ints(spec, &word.cycle)?.iter().max().expect("non-empty")),
        PayoffSpec::Liminf => int(*ints(spec, &word.cycle)?.iter().min().expect("non-empty")),
        PayoffSpec::Parity => indicator(ints(spec, &word.cycle)?.iter().max().expect("non-empty") % 2 == 1),
        PayoffSpec::CounterLimsupPosInf => indicator(ints(spec, &word.cycle)?.iter().sum::<i64>() > 0),
        PayoffSpec::CounterLiminfNegInf => indicator(ints(spec, &word.cycle)?.iter().sum::<i64>() < 0),
        PayoffSpec::GeneralizedMean(k) => {
            indicator(coordinate_means(&vectors(spec, &word.cycle)?, *k).iter().all(|m| m.is_positive()))
        }
        PayoffSpec::OptimisticGeneralizedMean(k) => {
            indicator(coordinate_means(&vectors(spec, &word.cycle)?, *k).iter().any(|m| !m.is_negative()))
        }
        PayoffSpec::MeanCoBuchi(penalty) => {
            let mut rewards = Vec::with_capacity(word.cycle.len());
            let mut flagged = false;
            for c in &word.cycle {
                if let Colour::Flagged { reward, buchi } = c {
                    rewards.push(*reward);
                    flagged |= *buchi;
                }
            }
            if flagged {
                -penalty.clone()
            } else {
                mean_of(&rewards)
            }
        }
        PayoffSpec::Discounted => discounted_lasso(word),
        // `p a b² a b⁴ ...` has unbounded b-runs, so it is not ultimately
        // periodic and no lasso shares a suffix with it.
        PayoffSpec::SuffixTarget(_) => Q::one(),
        PayoffSpec::GeometricFirstOne => {
            let prefix = ints(spec, &word.prefix)?;
            let cycle = ints(spec, &word.cycle)?;
            let first = prefix
                .iter()
                .position(|&c| c == 1)
                .or_else(|| cycle.iter().position(|&c| c == 1).map(|i| i + prefix.len()));
            match first {
                None => Q::zero(),
                Some(n) => Q::one() - Q::new(BigInt::one(), BigInt::from(2).pow(n)),
            }
        }
    })
}

fn discounted_pair(c: &Colour) -> (&Q, &Q) {
    match c {
        Colour::Discounted { reward, discount } => (reward, discount),
        _ => unreachable!("kind checked"),
    }
}

fn discounted_lasso(word: &LassoWord<Colour>) -> Q {
    let mut value = Q::zero();
    let mut weight = Q::one();
    for c in &word.prefix {
        let (r, l) = discounted_pair(c);
        value += &weight * r;
        weight *= l;
    }
    let mut cycle_sum = Q::zero();
    let mut cycle_weight = Q::one();
    for c in &word.cycle {
        let (r, l) = discounted_pair(c);
        cycle_sum += &cycle_weight * r;
        cycle_weight *= l;
    }
    value + weight * cycle_sum / (Q::one() - cycle_weight)
}

/// Almost-sure payoff of the trajectories absorbed in a recurrent class.
pub fn class_value(spec: &PayoffSpec, class: &RecurrentClassSummary) -> Result<Q> {
    if !spec.is_class_determined() {
        return Err(Error::NotClassDetermined(spec.to_string()));
    }
    let stats = &class.stats;
    let total: Q = stats.occurrences.iter().map(|(w, _)| w.clone()).sum();
    if !total.is_one() || stats.occurrences.iter().any(|(w, _)| !w.is_positive()) {
        return Err(Error::InconsistentClass(format!(
            "colour frequencies sum to {}",
            rational::format(&total)
        )));
    }
    spec.check_colours(stats.occurrences.iter().map(|(_, c)| c))?;
    Ok(match spec {
        PayoffSpec::Mean => stats.mean_reward(),
        PayoffSpec::PositiveAverage => indicator(stats.mean_reward().is_positive()),
        PayoffSpec::Limsup => int(stats.max_reward()),
        PayoffSpec::Liminf => int(stats.min_reward()),
        PayoffSpec::Parity => indicator(stats.max_reward() % 2 == 1),
        PayoffSpec::GeneralizedMean(k) => indicator(stats.mean_vector(*k).iter().all(|m| m.is_positive())),
        PayoffSpec::OptimisticGeneralizedMean(k) => {
            indicator(stats.mean_vector(*k).iter().any(|m| !m.is_negative()))
        }
        PayoffSpec::MeanCoBuchi(penalty) => {
            if stats.buchi_present() {
                -penalty.clone()
            } else {
                stats.mean_reward()
            }
        }
        PayoffSpec::CounterLimsupPosInf | PayoffSpec::CounterLiminfNegInf => {
            let drift = stats.mean_reward();
            // Zero drift: sums are bounded iff the increments are a coboundary;
            // otherwise the walk oscillates unboundedly in both directions.
            let (plus_inf, minus_inf) = if drift.is_positive() {
                (true, false)
            } else if drift.is_negative() {
                (false, true)
            } else if stats.potential_exists {
                (false, false)
            } else {
                (true, true)
            };
            indicator(if *spec == PayoffSpec::CounterLimsupPosInf { plus_inf } else { minus_inf })
        }
        PayoffSpec::Discounted | PayoffSpec::SuffixTarget(_) | PayoffSpec::GeometricFirstOne => {
            unreachable!("rejected above")
        }
    })
}

/// Colour statistics of a recurrent class.
#[derive(Clone, Debug, PartialEq)]
pub struct ColourStats {
    /// Stationary frequency of each distinct colour occurrence (all positive).
    pub occurrences: Vec<(Q, Colour)>,
    /// Whether the class edges admit a potential `φ` with `c = φ(next) − φ(cur)`
    /// (only meaningful for integer colours).
    pub potential_exists: bool,
}

impl ColourStats {
    fn scalar(c: &Colour) -> Q {
        match c {
            Colour::Int(n) | Colour::Flagged { reward: n, .. } => int(*n),
            Colour::Discounted { reward, .. } => reward.clone(),
            _ => Q::zero(),
        }
    }

    fn int_reward(c: &Colour) -> i64 {
        match c {
            Colour::Int(n) | Colour::Flagged { reward: n, .. } => *n,
            _ => 0,
        }
    }

    pub fn mean_reward(&self) -> Q {
        self.occurrences.iter().map(|(w, c)| w * Self::scalar(c)).sum()
    }

    pub fn max_reward(&self) -> i64 {
        self.occurrences.iter().map(|(_, c)| Self::int_reward(c)).max().unwrap_or(0)
    }

    pub fn min_reward(&self) -> i64 {
        self.occurrences.iter().map(|(_, c)| Self::int_reward(c)).min().unwrap_or(0)
    }

    pub fn max_priority(&self) -> i64 {
        self.max_reward()
    }

    pub fn buchi_present(&self) -> bool {
        self.occurrences.iter().any(|(_, c)| matches!(c, Colour::Flagged { buchi: true, .. }))
    }

    pub fn mean_vector(&self, k: usize) -> Vec<Q> {
        let mut acc = vec![Q::zero(); k];
        for (w, c) in &self.occurrences {
            if let Colour::Vector(v) = c {
                for (a, x) in acc.iter_mut().zip(v) {
                    *a += w * int(*x);
                }
            }
        }
        acc
    }
}

// ----- shuffles -----------------------------------------------------------------

/// Block lengths `(|u_i|, |v_i|)` of a factorization: a finite prefix of blocks
/// followed by a periodic tail repeated forever.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ShufflePattern {
    pub prefix: Vec<(usize, usize)>,
    pub period: Vec<(usize, usize)>,
}

impl ShufflePattern {
    pub fn new(prefix: Vec<(usize, usize)>, period: Vec<(usize, usize)>) -> Self {
        ShufflePattern { prefix, period }
    }

    /// `(n u-letters, m v-letters)` repeated forever.
    pub fn alternating(n: usize, m: usize) -> Self {
        ShufflePattern::new(Vec::new(), vec![(n, m)])
    }

    fn consumed_per_period(&self) -> (usize, usize) {
        self.period.iter().fold((0, 0), |(a, b), (x, y)| (a + x, b + y))
    }
}

/// Position of a reader in a lasso word, normalized once inside the cycle.
fn lasso_position<T: Clone>(word: &LassoWord<T>, i: usize) -> (bool, usize) {
    if i < word.prefix.len() {
        (false, i)
    } else {
        (true, (i - word.prefix.len()) % word.cycle.len())
    }
}

/// Interleaves `u` and `v` block by block according to `pattern`.
///
/// Every letter of both words is placed exactly once and in order, so the
/// periodic tail must consume letters from both words.
pub fn shuffle<T: Clone>(u: &LassoWord<T>, v: &LassoWord<T>, pattern: &ShufflePattern) -> Result<LassoWord<T>> {
    if pattern.period.is_empty() {
        return Err(Error::Shuffle("pattern has no periodic tail".into()));
    }
    let (cu, cv) = pattern.consumed_per_period();
    if cu == 0 {
        return Err(Error::Shuffle("pattern never places the letters of u".into()));
    }
    if cv == 0 {
        return Err(Error::Shuffle("pattern never places the letters of v".into()));
    }
    let mut out = Vec::new();
    let (mut iu, mut iv) = (0usize, 0usize);
    let emit = |out: &mut Vec<T>, (n, m): (usize, usize), iu: &mut usize, iv: &mut usize| {
        for _ in 0..n {
            out.push(u.letter(*iu).clone());
            *iu += 1;
        }
        for _ in 0..m {
            out.push(v.letter(*iv).clone());
            *iv += 1;
        }
    };
    for &block in &pattern.prefix {
        emit(&mut out, block, &mut iu, &mut iv);
    }
    // The output after a period boundary depends only on the two reader
    // positions; a repeated pair closes the cycle.
    let mut seen: Vec<Option<usize>> = vec![None; u.cycle.len() * v.cycle.len()];
    let limit = (u.prefix.len() + v.prefix.len() + 2) * u.cycle.len() * v.cycle.len() + 8;
    for _ in 0..limit {
        let ((in_u, pu), (in_v, pv)) = (lasso_position(u, iu), lasso_position(v, iv));
        if in_u && in_v {
            let key = pu * v.cycle.len() + pv;
            if let Some(start) = seen[key] {
                let cycle = out.split_off(start);
                return Ok(LassoWord::new(out, cycle));
            }
            seen[key] = Some(out.len());
        }
        for &block in &pattern.period {
            emit(&mut out, block, &mut iu, &mut iv);
        }
    }
    Err(Error::Shuffle("result is not lasso-representable within the search bound".into()))
}

// ----- property refuters -------------------------------------------------------

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShiftWitness {
    pub word: LassoWord<Colour>,
    pub shift: usize,
    #[serde(with = "rational::serde_q")]
    pub value: Q,
    #[serde(with = "rational::serde_q")]
    pub shifted_value: Q,
}

impl ShiftWitness {
    /// Re-evaluates the witness; true iff the violation reproduces.
    pub fn replay(&self, spec: &PayoffSpec) -> bool {
        let a = evaluate_lasso(spec, &self.word);
        let b = evaluate_lasso(spec, &self.word.suffix(self.shift));
        matches!((a, b), (Ok(a), Ok(b)) if a == self.value && b == self.shifted_value && a != b)
    }
}

/// Compares `f(word)` with `f` of its first `shifts` suffixes.
pub fn check_shift_invariance(spec: &PayoffSpec, word: &LassoWord<Colour>, shifts: usize) -> Result<Option<ShiftWitness>> {
    let value = evaluate_lasso(spec, word)?;
    for shift in 1..=shifts.max(1) {
        let shifted_value = evaluate_lasso(spec, &word.suffix(shift))?;
        if shifted_value != value {
            return Ok(Some(ShiftWitness { word: word.clone(), shift, value, shifted_value }));
        }
    }
    Ok(None)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubmixingWitness {
    pub u: LassoWord<Colour>,
    pub v: LassoWord<Colour>,
    pub pattern: ShufflePattern,
    pub w: LassoWord<Colour>,
    #[serde(with = "rational::serde_q")]
    pub fu: Q,
    #[serde(with = "rational::serde_q")]
    pub fv: Q,
    #[serde(with = "rational::serde_q")]
    pub fw: Q,
}

impl SubmixingWitness {
    /// Re-evaluates the witness; true iff the violation reproduces.
    pub fn replay(&self, spec: &PayoffSpec) -> bool {
        matches!(check_submixing(spec, &self.u, &self.v, &self.pattern), Ok(Some(w)) if w == *self)
    }
}

/// Returns a witness iff `f(shuffle(u, v)) > max(f(u), f(v))`.
pub fn check_submixing(
    spec: &PayoffSpec,
    u: &LassoWord<Colour>,
    v: &LassoWord<Colour>,
    pattern: &ShufflePattern,
) -> Result<Option<SubmixingWitness>> {
    let fu = evaluate_lasso(spec, u)?;
    let fv = evaluate_lasso(spec, v)?;
    check_submixing_with(spec, u, v, pattern, fu, fv)
}

/// As [`check_submixing`] with `f(u)` and `f(v)` already known.
pub fn check_submixing_with(
    spec: &PayoffSpec,
    u: &LassoWord<Colour>,
    v: &LassoWord<Colour>,
    pattern: &ShufflePattern,
    fu: Q,
    fv: Q,
) -> Result<Option<SubmixingWitness>> {
    let w = shuffle(u, v, pattern)?;
    let fw = evaluate_lasso(spec, &w)?;
    if fw > fu && fw > fv {
        Ok(Some(SubmixingWitness { u: u.clone(), v: v.clone(), pattern: pattern.clone(), w, fu, fv, fw }))
    } else {
        Ok(None)
    }
}
