//! Arenas: states, owners, actions, exact transition probabilities and colours.
//!
//! Plays are syntactic: a play only has to respect action availability, so
//! probability-zero plays are representable and can be analyzed.

use std::collections::HashMap;
use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::payoff::{Colour, ColourKind};
use crate::rational::{self, Q};
use crate::strategy::FiniteMemoryStrategy;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Player {
    P1,
    P2,
}

impl Player {
    pub fn opponent(self) -> Player {
        match self {
            Player::P1 => Player::P2,
            Player::P2 => Player::P1,
        }
    }
}

impl fmt::Display for Player {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Player::P1 => write!(f, "P1"),
            Player::P2 => write!(f, "P2"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct State {
    pub name: String,
    pub owner: Player,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Action {
    pub name: String,
    pub colour: Colour,
    /// Successor distribution as (state index, probability), in declaration order.
    pub successors: Vec<(usize, Q)>,
}

impl Action {
    /// Successors with positive probability.
    pub fn support(&self) -> impl Iterator<Item = (usize, &Q)> + '_ {
        self.successors.iter().filter(|(_, p)| p.is_positive()).map(|(t, p)| (*t, p))
    }

    pub fn prob(&self, target: usize) -> Q {
        self.successors
            .iter()
            .filter(|(t, _)| *t == target)
            .map(|(_, p)| p.clone())
            .sum()
    }
}

/// A validated finite arena. Actions are indexed locally per state.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Arena {
    states: Vec<State>,
    actions: Vec<Vec<Action>>,
    pair_offset: Vec<usize>,
}

impl Arena {
    /// Builds and validates an arena.
    pub fn new(states: Vec<State>, actions: Vec<Vec<Action>>) -> Result<Arena> {
        let mut pair_offset = Vec::with_capacity(states.len() + 1);
        let mut total = 0;
        for acts in &actions {
            pair_offset.push(total);
            total += acts.len();
        }
        pair_offset.push(total);
        let arena = Arena { states, actions, pair_offset };
        arena.validate()?;
        Ok(arena)
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArena(m));
        if self.states.is_empty() {
            return bad("arena has no states".into());
        }
        if self.actions.len() != self.states.len() {
            return bad("action table does not match the state list".into());
        }
        let mut names = HashMap::new();
        for (i, st) in self.states.iter().enumerate() {
            if names.insert(st.name.as_str(), i).is_some() {
                return bad(format!("duplicate state {:?}", st.name));
            }
        }
        let mut kind: Option<(ColourKind, &str, &str)> = None;
        for (s, acts) in self.actions.iter().enumerate() {
            let sname = &self.states[s].name;
            if acts.is_empty() {
                return bad(format!("state {sname:?} has no available action"));
            }
            let mut anames = HashMap::new();
            for act in acts {
                if anames.insert(act.name.as_str(), ()).is_some() {
                    return bad(format!("duplicate action {:?} at state {sname:?}", act.name));
                }
                let mut sum = Q::zero();
                let mut seen = vec![false; self.states.len()];
                for (t, p) in &act.successors {
                    if *t >= self.states.len() {
                        return bad(format!("successor index {t} out of range at ({sname}, {})", act.name));
                    }
                    if seen[*t] {
                        return bad(format!(
                            "successor {:?} listed twice at ({sname}, {})",
                            self.states[*t].name, act.name
                        ));
                    }
                    seen[*t] = true;
                    if p.is_negative() || *p > Q::one() {
                        return bad(format!(
                            "probability {} at ({sname}, {}) is outside [0,1]",
                            rational::format(p),
                            act.name
                        ));
                    }
                    sum += p;
                }
                if !sum.is_one() {
                    return bad(format!(
                        "distribution at ({sname}, {}) sums to {}",
                        act.name,
                        rational::format(&sum)
                    ));
                }
                act.colour.validate()?;
                let k = act.colour.kind();
                match &kind {
                    None => kind = Some((k, sname, &act.name)),
                    Some((k0, s0, a0)) if !k0.compatible(&k) => {
                        return bad(format!(
                            "colour kind {k} at ({sname}, {}) differs from {k0} at ({s0}, {a0})",
                            act.name
                        ));
                    }
                    _ => {}
                }
            }
        }
        Ok(())
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn state(&self, s: usize) -> &State {
        &self.states[s]
    }

    pub fn states(&self) -> &[State] {
        &self.states
    }

    pub fn name(&self, s: usize) -> &str {
        &self.states[s].name
    }

    pub fn owner(&self, s: usize) -> Player {
        self.states[s].owner
    }

    pub fn actions(&self, s: usize) -> &[Action] {
        &self.actions[s]
    }

    pub fn action(&self, s: usize, a: usize) -> &Action {
        &self.actions[s][a]
    }

    pub fn num_actions(&self, s: usize) -> usize {
        self.actions[s].len()
    }

    pub fn colour(&self, s: usize, a: usize) -> &Colour {
        &self.actions[s][a].colour
    }

    pub fn state_index(&self, name: &str) -> Option<usize> {
        self.states.iter().position(|st| st.name == name)
    }

    pub fn action_index(&self, s: usize, name: &str) -> Option<usize> {
        self.actions[s].iter().position(|a| a.name == name)
    }

    /// Dense index of the (state, action) pair.
    pub fn pair_index(&self, s: usize, a: usize) -> usize {
        self.pair_offset[s] + a
    }

    pub fn num_pairs(&self) -> usize {
        self.pair_offset[self.states.len()]
    }

    pub fn states_of(&self, player: Player) -> impl Iterator<Item = usize> + '_ {
        (0..self.num_states()).filter(move |&s| self.owner(s) == player)
    }

    /// The colour kind shared by every (state, action) pair.
    pub fn colour_kind(&self) -> ColourKind {
        self.actions[0][0].colour.kind()
    }

    /// A copy where state `s` only keeps the actions in `keep` (local indices).
    pub fn restrict(&self, s: usize, keep: &[usize]) -> Result<Arena> {
        let mut actions = self.actions.clone();
        actions[s] = keep.iter().map(|&a| self.actions[s][a].clone()).collect();
        Arena::new(self.states.clone(), actions)
    }

    /// Stable content hash of the canonical text form.
    pub fn fingerprint(&self) -> String {
        let digest = Sha256::digest(self.to_json().as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    // ----- text format -------------------------------------------------

    /// Parses a game document (JSON).
    pub fn parse(text: &str) -> Result<Arena> {
        let doc: GameDoc = serde_json::from_str(text).map_err(|e| Error::Syntax {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        Arena::from_doc(doc)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_doc()).expect("arena serializes")
    }

    pub fn to_doc(&self) -> GameDoc {
        let states = self
            .states
            .iter()
            .map(|s| StateDoc { name: s.name.clone(), owner: s.owner })
            .collect();
        let mut actions = Vec::new();
        for (s, acts) in self.actions.iter().enumerate() {
            for act in acts {
                actions.push(ActionDoc {
                    state: self.states[s].name.clone(),
                    action: act.name.clone(),
                    colour: act.colour.clone(),
                    successors: act
                        .successors
                        .iter()
                        .map(|(t, p)| SuccessorDoc { state: self.states[*t].name.clone(), prob: p.clone() })
                        .collect(),
                });
            }
        }
        GameDoc { states, actions }
    }

    pub fn from_doc(doc: GameDoc) -> Result<Arena> {
        let states: Vec<State> = doc
            .states
            .into_iter()
            .map(|s| State { name: s.name, owner: s.owner })
            .collect();
        let index: HashMap<&str, usize> =
            states.iter().enumerate().map(|(i, s)| (s.name.as_str(), i)).collect();
        if index.len() != states.len() {
            return Err(Error::InvalidArena("duplicate state names".into()));
        }
        let mut actions: Vec<Vec<Action>> = vec![Vec::new(); states.len()];
        for act in doc.actions {
            let s = *index
                .get(act.state.as_str())
                .ok_or_else(|| Error::InvalidArena(format!("action {:?} at unknown state {:?}", act.action, act.state)))?;
            let mut successors = Vec::with_capacity(act.successors.len());
            for succ in act.successors {
                let t = *index.get(succ.state.as_str()).ok_or_else(|| {
                    Error::InvalidArena(format!("unknown successor {:?} at ({}, {})", succ.state, act.state, act.action))
                })?;
                successors.push((t, succ.prob));
            }
            actions[s].push(Action { name: act.action, colour: act.colour, successors });
        }
        Arena::new(states, actions)
    }

    // ----- plays -------------------------------------------------------

    /// Checks availability along a play (probabilities are not required).
    pub fn check_play(&self, play: &FinitePlay) -> Result<()> {
        if play.states.len() != play.actions.len() + 1 {
            return Err(Error::InvalidPlay("a play alternates states and actions".into()));
        }
        for (i, &s) in play.states.iter().enumerate() {
            if s >= self.num_states() {
                return Err(Error::InvalidPlay(format!("state index {s} out of range")));
            }
            if let Some(&a) = play.actions.get(i) {
                if a >= self.num_actions(s) {
                    return Err(Error::InvalidPlay(format!(
                        "action {a} not available at {:?} (step {i})",
                        self.name(s)
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn check_lasso(&self, lasso: &LassoPlay) -> Result<()> {
        self.check_play(&lasso.prefix)?;
        self.check_play(&lasso.cycle)?;
        if lasso.cycle.actions.is_empty() {
            return Err(Error::InvalidPlay("lasso cycle must contain an action".into()));
        }
        if lasso.cycle.source() != lasso.prefix.target() || lasso.cycle.target() != lasso.cycle.source() {
            return Err(Error::InvalidPlay("lasso cycle must start and end at the prefix target".into()));
        }
        Ok(())
    }

    /// Colour word of a finite play: one colour per (state, action) step.
    pub fn play_colours(&self, play: &FinitePlay) -> Vec<Colour> {
        play.actions
            .iter()
            .enumerate()
            .map(|(i, &a)| self.colour(play.states[i], a).clone())
            .collect()
    }

    pub fn lasso_colours(&self, lasso: &LassoPlay) -> crate::payoff::LassoWord<Colour> {
        crate::payoff::LassoWord::new(self.play_colours(&lasso.prefix), self.play_colours(&lasso.cycle))
    }

    /// Human readable form `s a t b u`.
    pub fn display_play(&self, play: &FinitePlay) -> String {
        let mut out = String::new();
        for (i, &s) in play.states.iter().enumerate() {
            if i > 0 {
                out.push(' ');
            }
            out.push_str(self.name(s));
            if let Some(&a) = play.actions.get(i) {
                out.push(' ');
                out.push_str(&self.action(s, a).name);
            }
        }
        out
    }
}

// ----- document types ------------------------------------------------------

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GameDoc {
    pub states: Vec<StateDoc>,
    pub actions: Vec<ActionDoc>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateDoc {
    pub name: String,
    pub owner: Player,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActionDoc {
    pub state: String,
    pub action: String,
    pub colour: Colour,
    pub successors: Vec<SuccessorDoc>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuccessorDoc {
    pub state: String,
    #[serde(with = "rational::serde_q")]
    pub prob: Q,
}

// ----- plays -----------------------------------------------------------------

/// A finite play `s0 a1 s1 ... sn`; `actions[i]` is the local index of the action
/// taken at `states[i]`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FinitePlay {
    pub states: Vec<usize>,
    pub actions: Vec<usize>,
}

impl FinitePlay {
    pub fn single(s: usize) -> FinitePlay {
        FinitePlay { states: vec![s], actions: Vec::new() }
    }

    pub fn source(&self) -> usize {
        self.states[0]
    }

    pub fn target(&self) -> usize {
        *self.states.last().expect("non-empty play")
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn push(&mut self, action: usize, next: usize) {
        self.actions.push(action);
        self.states.push(next);
    }

    /// Concatenation; `other` must start where `self` ends.
    pub fn extend(&mut self, other: &FinitePlay) {
        debug_assert_eq!(self.target(), other.source());
        self.actions.extend_from_slice(&other.actions);
        self.states.extend_from_slice(&other.states[1..]);
    }
}

/// The infinite play `prefix · cycle^ω`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LassoPlay {
    pub prefix: FinitePlay,
    pub cycle: FinitePlay,
}

impl LassoPlay {
    /// Unrolls `n` steps of the infinite play.
    pub fn unroll(&self, n: usize) -> FinitePlay {
        let mut play = FinitePlay::single(self.prefix.source());
        for i in 0..n {
            let (a, t) = self.step(i);
            play.push(a, t);
        }
        play
    }

    /// Action taken at step `i` and the state reached.
    pub fn step(&self, i: usize) -> (usize, usize) {
        let p = self.prefix.actions.len();
        if i < p {
            (self.prefix.actions[i], self.prefix.states[i + 1])
        } else {
            let j = (i - p) % self.cycle.actions.len();
            (self.cycle.actions[j], self.cycle.states[j + 1])
        }
    }

    pub fn state_at(&self, i: usize) -> usize {
        if i == 0 {
            self.prefix.source()
        } else {
            self.step(i - 1).1
        }
    }
}

// ----- sampling --------------------------------------------------------------

/// Exact sampler for a finite distribution with rational weights.
#[derive(Clone, Debug)]
pub struct Sampler {
    cumulative: Vec<u64>,
    outcomes: Vec<usize>,
}

impl Sampler {
    /// `weights` must be non-negative with positive total.
    pub fn new<'a>(weights: impl IntoIterator<Item = (usize, &'a Q)>) -> Sampler {
        let items: Vec<(usize, &Q)> = weights.into_iter().filter(|(_, w)| w.is_positive()).collect();
        assert!(!items.is_empty(), "sampler needs positive weight");
        let lcm = items
            .iter()
            .fold(BigInt::one(), |acc, (_, w)| acc.lcm(w.denom()));
        let scaled: Vec<BigInt> = items
            .iter()
            .map(|(_, w)| w.numer() * (&lcm / w.denom()))
            .collect();
        let total: BigInt = scaled.iter().sum();
        let fits = total.to_u64().filter(|t| *t <= (1u64 << 62));
        let mut cumulative = Vec::with_capacity(items.len());
        match fits {
            Some(_) => {
                let mut acc = 0u64;
                for w in &scaled {
                    acc += w.to_u64().expect("fits");
                    cumulative.push(acc);
                }
            }
            None => {
                // Rescale to 2^62 resolution; only reachable with enormous denominators.
                let scale = BigInt::from(1u64 << 62);
                let mut acc = BigInt::zero();
                for w in &scaled {
                    acc += w;
                    cumulative.push((&acc * &scale / &total).to_u64().expect("scaled"));
                }
            }
        }
        Sampler { cumulative, outcomes: items.iter().map(|(o, _)| *o).collect() }
    }

    pub fn sample(&self, rng: &mut ChaCha8Rng) -> usize {
        let total = *self.cumulative.last().expect("non-empty");
        let x = rng.gen_range(0..total);
        let idx = self.cumulative.partition_point(|&c| c <= x);
        self.outcomes[idx]
    }
}

/// Samples a play of exactly `horizon` steps. `sigma` is P1's strategy and `tau`
/// P2's; memories start at their initial states in `source`.
pub fn sample_play(
    arena: &Arena,
    sigma: &FiniteMemoryStrategy,
    tau: &FiniteMemoryStrategy,
    source: usize,
    horizon: usize,
    rng: &mut ChaCha8Rng,
) -> FinitePlay {
    let mut play = FinitePlay::single(source);
    let (mut m1, mut m2) = (sigma.initial(), tau.initial());
    let mut s = source;
    for _ in 0..horizon {
        let choice = match arena.owner(s) {
            Player::P1 => sigma.choice(m1, s),
            Player::P2 => tau.choice(m2, s),
        };
        let a = Sampler::new(choice.iter().map(|(a, w)| (*a, w))).sample(rng);
        let act = arena.action(s, a);
        let t = Sampler::new(act.support()).sample(rng);
        m1 = sigma.next_memory(m1, s, a, t);
        m2 = tau.next_memory(m2, s, a, t);
        play.push(a, t);
        s = t;
    }
    play
}

// ----- random generation -----------------------------------------------------

/// Colour families for generated arenas.
#[derive(Clone, Debug, PartialEq)]
pub enum ColourRange {
    /// Integer rewards (also priorities and counter increments) in `min..=max`.
    Integers { min: i64, max: i64 },
    /// Reward in `min..=max` with a fixed discount.
    Discounted { min: i64, max: i64, discount: Q },
    /// Reward vectors of dimension `dim` with entries in `min..=max`.
    Vectors { dim: usize, min: i64, max: i64 },
    /// Integer reward with a Büchi flag.
    Flagged { min: i64, max: i64 },
    /// Letters drawn from the alphabet.
    Letters(Vec<String>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct RandomArenaParams {
    pub num_states: usize,
    pub max_actions: usize,
    pub colours: ColourRange,
    /// Probability that a state is in the support of a given action.
    pub density: Q,
}

impl RandomArenaParams {
    pub fn new(num_states: usize, max_actions: usize, colours: ColourRange, density: Q) -> Self {
        RandomArenaParams { num_states, max_actions, colours, density }
    }

    /// Clamps out-of-range parameters, describing every adjustment.
    pub fn clamped(&self) -> (RandomArenaParams, Vec<String>) {
        let mut p = self.clone();
        let mut notes = Vec::new();
        if p.num_states == 0 {
            notes.push("num_states clamped from 0 to 1".to_string());
            p.num_states = 1;
        }
        if p.max_actions == 0 {
            notes.push("max_actions clamped from 0 to 1".to_string());
            p.max_actions = 1;
        }
        if !p.density.is_positive() || p.density > Q::one() {
            notes.push(format!("density {} clamped to 1", rational::format(&p.density)));
            p.density = Q::one();
        }
        let fix_range = |min: &mut i64, max: &mut i64, notes: &mut Vec<String>| {
            if min > max {
                notes.push(format!("colour range {min}..{max} swapped"));
                std::mem::swap(min, max);
            }
        };
        match &mut p.colours {
            ColourRange::Integers { min, max } | ColourRange::Flagged { min, max } => fix_range(min, max, &mut notes),
            ColourRange::Discounted { min, max, discount } => {
                fix_range(min, max, &mut notes);
                if discount.is_negative() || *discount >= Q::one() {
                    notes.push(format!("discount {} clamped to 1/2", rational::format(discount)));
                    *discount = rational::ratio(1, 2);
                }
            }
            ColourRange::Vectors { dim, min, max } => {
                fix_range(min, max, &mut notes);
                if *dim == 0 {
                    notes.push("vector dimension clamped from 0 to 1".to_string());
                    *dim = 1;
                }
            }
            ColourRange::Letters(alphabet) => {
                if alphabet.is_empty() {
                    notes.push("empty alphabet replaced by [\"a\"]".to_string());
                    alphabet.push("a".to_string());
                }
            }
        }
        (p, notes)
    }
}

fn random_colour(range: &ColourRange, rng: &mut ChaCha8Rng) -> Colour {
    match range {
        ColourRange::Integers { min, max } => Colour::Int(rng.gen_range(*min..=*max)),
        ColourRange::Discounted { min, max, discount } => Colour::Discounted {
            reward: rational::int(rng.gen_range(*min..=*max)),
            discount: discount.clone(),
        },
        ColourRange::Vectors { dim, min, max } => {
            Colour::Vector((0..*dim).map(|_| rng.gen_range(*min..=*max)).collect())
        }
        ColourRange::Flagged { min, max } => Colour::Flagged {
            reward: rng.gen_range(*min..=*max),
            buchi: rng.gen_bool(0.25),
        },
        ColourRange::Letters(alphabet) => Colour::Letter(alphabet[rng.gen_range(0..alphabet.len())].clone()),
    }
}

/// Generates a random arena; a deterministic function of its arguments.
///
/// Returns the arena and the list of parameter clampings that were applied.
pub fn random_arena(params: &RandomArenaParams, seed: u64) -> (Arena, Vec<String>) {
    use rand::SeedableRng;
    let (p, notes) = params.clamped();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = p.num_states;
    let density_num = p.density.numer().to_u64().unwrap_or(1);
    let density_den = p.density.denom().to_u64().unwrap_or(1).max(1);
    let states: Vec<State> = (0..n)
        .map(|i| State {
            name: format!("s{i}"),
            owner: if rng.gen_bool(0.5) { Player::P1 } else { Player::P2 },
        })
        .collect();
    let mut actions = Vec::with_capacity(n);
    for _ in 0..n {
        let k = rng.gen_range(1..=p.max_actions);
        let mut acts = Vec::with_capacity(k);
        for a in 0..k {
            let forced = rng.gen_range(0..n);
            let mut weights: Vec<(usize, u64)> = Vec::new();
            for t in 0..n {
                let include = t == forced || rng.gen_range(0..density_den) < density_num;
                if include {
                    weights.push((t, rng.gen_range(1..=3)));
                }
            }
            let total: u64 = weights.iter().map(|(_, w)| w).sum();
            let successors = weights
                .into_iter()
                .map(|(t, w)| (t, rational::ratio(w as i64, total as i64)))
                .collect();
            acts.push(Action { name: format!("a{a}"), colour: random_colour(&p.colours, &mut rng), successors });
        }
        actions.push(acts);
    }
    let arena = Arena::new(states, actions).expect("generated arenas are valid by construction");
    (arena, notes)
}
