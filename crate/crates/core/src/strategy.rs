//! Strategy representations and the reset, projection and trigger constructions.
//!
//! General history-dependent strategies are only handled in finite-memory form.
//! For a shift-invariant payoff the continuation `σ[h]` of a finite-memory
//! strategy depends on the history `h` only through the pair (memory, current
//! state), so weaknesses, resets and subgame-perfection become finite, exact
//! questions about (memory, state) pairs.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::arena::{Arena, FinitePlay, LassoPlay, Player};
use crate::error::{Error, Result};
use crate::payoff::{LassoWord, PayoffSpec, ShufflePattern};
use crate::rational::{self, Q};
use crate::solve::{self, Budget};

// ----- pure stationary -------------------------------------------------------------

/// Deterministic stationary strategy: one action per owned state.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PureStationaryStrategy {
    owner: Player,
    actions: Vec<Option<usize>>,
}

impl PureStationaryStrategy {
    /// `actions[s]` must be `Some(a)` exactly for the owner's states.
    pub fn new(arena: &Arena, owner: Player, actions: Vec<Option<usize>>) -> Result<Self> {
        if actions.len() != arena.num_states() {
            return Err(Error::InvalidStrategy("action table does not cover the arena".into()));
        }
        for (s, a) in actions.iter().enumerate() {
            match (arena.owner(s) == owner, a) {
                (true, Some(a)) if *a < arena.num_actions(s) => {}
                (true, Some(a)) => {
                    return Err(Error::InvalidStrategy(format!("action {a} not available at {:?}", arena.name(s))))
                }
                (true, None) => {
                    return Err(Error::InvalidStrategy(format!("no action chosen at {:?}", arena.name(s))))
                }
                (false, Some(_)) => {
                    return Err(Error::InvalidStrategy(format!(
                        "{:?} is not controlled by {owner}",
                        arena.name(s)
                    )))
                }
                (false, None) => {}
            }
        }
        Ok(PureStationaryStrategy { owner, actions })
    }

    pub fn owner(&self) -> Player {
        self.owner
    }

    pub fn action(&self, s: usize) -> Option<usize> {
        self.actions[s]
    }

    pub fn actions(&self) -> &[Option<usize>] {
        &self.actions
    }

    /// Number of pure stationary strategies of `owner`.
    pub fn count(arena: &Arena, owner: Player) -> u128 {
        arena.states_of(owner).map(|s| arena.num_actions(s) as u128).product()
    }

    /// All pure stationary strategies of `owner`, in mixed-radix order.
    pub fn enumerate(arena: &Arena, owner: Player) -> impl Iterator<Item = PureStationaryStrategy> + '_ {
        let owned: Vec<usize> = arena.states_of(owner).collect();
        let total = Self::count(arena, owner);
        (0..total).map(move |mut code| {
            let mut actions = vec![None; arena.num_states()];
            for &s in &owned {
                let k = arena.num_actions(s) as u128;
                actions[s] = Some((code % k) as usize);
                code /= k;
            }
            PureStationaryStrategy { owner, actions }
        })
    }

    pub fn to_map(&self, arena: &Arena) -> BTreeMap<String, String> {
        self.actions
            .iter()
            .enumerate()
            .filter_map(|(s, a)| a.map(|a| (arena.name(s).to_string(), arena.action(s, a).name.clone())))
            .collect()
    }

    pub fn from_map(arena: &Arena, owner: Player, map: &BTreeMap<String, String>) -> Result<Self> {
        let mut actions = vec![None; arena.num_states()];
        for (state, action) in map {
            let s = arena
                .state_index(state)
                .ok_or_else(|| Error::InvalidStrategy(format!("unknown state {state:?}")))?;
            let a = arena
                .action_index(s, action)
                .ok_or_else(|| Error::InvalidStrategy(format!("unknown action {action:?} at {state:?}")))?;
            actions[s] = Some(a);
        }
        // States with a single action need not be listed.
        for s in arena.states_of(owner) {
            if actions[s].is_none() && arena.num_actions(s) == 1 {
                actions[s] = Some(0);
            }
        }
        PureStationaryStrategy::new(arena, owner, actions)
    }
}

// ----- finite memory -------------------------------------------------------------

/// Finite-memory strategy with a Mealy-style memory automaton.
///
/// The memory starts at `initial` in the source state. At an owned state the
/// strategy draws an action from `choice(m, s)`; after every step `(s, a, t)`
/// (whoever moved) the memory becomes `update(m, s, a, t)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct FiniteMemoryStrategy {
    owner: Player,
    memory_states: usize,
    initial: usize,
    num_states: usize,
    pair_offset: Vec<usize>,
    num_pairs: usize,
    update: Vec<usize>,
    choice: Vec<Vec<Vec<(usize, Q)>>>,
}

impl FiniteMemoryStrategy {
    /// Builds a strategy from dense tables.
    ///
    /// `update` is indexed by `(m * arena.num_pairs() + pair) * arena.num_states() + t`;
    /// `choice[m][s]` is a distribution over local actions for owned states and
    /// empty elsewhere.
    pub fn from_tables(
        arena: &Arena,
        owner: Player,
        memory_states: usize,
        initial: usize,
        update: Vec<usize>,
        choice: Vec<Vec<Vec<(usize, Q)>>>,
    ) -> Result<Self> {
        let n = arena.num_states();
        let pairs = arena.num_pairs();
        if memory_states == 0 || initial >= memory_states {
            return Err(Error::InvalidStrategy("initial memory out of range".into()));
        }
        if update.len() != memory_states * pairs * n {
            return Err(Error::NotTotal(format!(
                "update table has {} entries, expected {}",
                update.len(),
                memory_states * pairs * n
            )));
        }
        if let Some(bad) = update.iter().find(|&&m| m >= memory_states) {
            return Err(Error::NotTotal(format!("update targets unknown memory {bad}")));
        }
        if choice.len() != memory_states || choice.iter().any(|row| row.len() != n) {
            return Err(Error::NotTotal("choice table does not cover every (memory, state)".into()));
        }
        for (m, row) in choice.iter().enumerate() {
            for (s, dist) in row.iter().enumerate() {
                if arena.owner(s) != owner {
                    if !dist.is_empty() {
                        return Err(Error::InvalidStrategy(format!(
                            "choice given at {:?}, which {owner} does not control",
                            arena.name(s)
                        )));
                    }
                    continue;
                }
                if dist.is_empty() {
                    return Err(Error::NotTotal(format!("no choice at memory {m}, state {:?}", arena.name(s))));
                }
                let mut total = Q::zero();
                for (a, w) in dist {
                    if *a >= arena.num_actions(s) {
                        return Err(Error::InvalidStrategy(format!(
                            "action {a} not available at {:?}",
                            arena.name(s)
                        )));
                    }
                    if w.is_negative() {
                        return Err(Error::InvalidStrategy("negative choice weight".into()));
                    }
                    total += w;
                }
                if !total.is_one() {
                    return Err(Error::InvalidStrategy(format!(
                        "choice at memory {m}, state {:?} sums to {}",
                        arena.name(s),
                        rational::format(&total)
                    )));
                }
            }
        }
        let pair_offset = (0..n).map(|s| arena.pair_index(s, 0)).collect();
        Ok(FiniteMemoryStrategy {
            owner,
            memory_states,
            initial,
            num_states: n,
            pair_offset,
            num_pairs: pairs,
            update,
            choice,
        })
    }

    /// Builds a strategy from closures over (memory, state, action, successor)
    /// and (memory, state).
    pub fn from_fns(
        arena: &Arena,
        owner: Player,
        memory_states: usize,
        initial: usize,
        update: impl Fn(usize, usize, usize, usize) -> usize,
        choice: impl Fn(usize, usize) -> Vec<(usize, Q)>,
    ) -> Result<Self> {
        let n = arena.num_states();
        let mut table = Vec::with_capacity(memory_states * arena.num_pairs() * n);
        for m in 0..memory_states {
            for s in 0..n {
                for a in 0..arena.num_actions(s) {
                    for t in 0..n {
                        table.push(update(m, s, a, t));
                    }
                }
            }
        }
        let choices = (0..memory_states)
            .map(|m| {
                (0..n)
                    .map(|s| if arena.owner(s) == owner { choice(m, s) } else { Vec::new() })
                    .collect()
            })
            .collect();
        Self::from_tables(arena, owner, memory_states, initial, table, choices)
    }

    /// Deterministic strategy: `choice(m, s)` is a single action.
    pub fn deterministic(
        arena: &Arena,
        owner: Player,
        memory_states: usize,
        initial: usize,
        update: impl Fn(usize, usize, usize, usize) -> usize,
        choice: impl Fn(usize, usize) -> usize,
    ) -> Result<Self> {
        Self::from_fns(arena, owner, memory_states, initial, update, |m, s| vec![(choice(m, s), Q::one())])
    }

    /// Stationary strategy playing the first action everywhere.
    pub fn uniform_first(arena: &Arena, owner: Player) -> Self {
        Self::deterministic(arena, owner, 1, 0, |_, _, _, _| 0, |_, _| 0).expect("always valid")
    }

    /// Memoryless, possibly randomized strategy.
    pub fn stationary(arena: &Arena, owner: Player, choice: impl Fn(usize) -> Vec<(usize, Q)>) -> Result<Self> {
        Self::from_fns(arena, owner, 1, 0, |_, _, _, _| 0, |_, s| choice(s))
    }

    pub fn from_pure(arena: &Arena, pure: &PureStationaryStrategy) -> Self {
        Self::deterministic(arena, pure.owner(), 1, 0, |_, _, _, _| 0, |_, s| {
            pure.action(s).expect("owned state")
        })
        .expect("pure strategies are valid")
    }

    pub fn owner(&self) -> Player {
        self.owner
    }

    pub fn memory_states(&self) -> usize {
        self.memory_states
    }

    pub fn initial(&self) -> usize {
        self.initial
    }

    /// Distribution over local actions at an owned state (empty elsewhere).
    pub fn choice(&self, m: usize, s: usize) -> &[(usize, Q)] {
        &self.choice[m][s]
    }

    /// Actions played with positive probability.
    pub fn support(&self, m: usize, s: usize) -> impl Iterator<Item = usize> + '_ {
        self.choice[m][s].iter().filter(|(_, w)| w.is_positive()).map(|(a, _)| *a)
    }

    pub fn next_memory(&self, m: usize, s: usize, a: usize, t: usize) -> usize {
        self.update[self.update_index(m, s, a, t)]
    }

    fn update_index(&self, m: usize, s: usize, a: usize, t: usize) -> usize {
        (m * self.num_pairs + self.pair_offset[s] + a) * self.num_states + t
    }

    pub fn is_deterministic(&self) -> bool {
        self.choice
            .iter()
            .flatten()
            .all(|d| d.iter().filter(|(_, w)| w.is_positive()).count() <= 1)
    }

    /// Runs the memory automaton along a play from the initial memory.
    pub fn memory_after(&self, play: &FinitePlay) -> usize {
        let mut m = self.initial;
        for (i, &a) in play.actions.iter().enumerate() {
            m = self.next_memory(m, play.states[i], a, play.states[i + 1]);
        }
        m
    }

    /// A copy with a different initial memory.
    pub fn with_initial(&self, initial: usize) -> Self {
        assert!(initial < self.memory_states);
        FiniteMemoryStrategy { initial, ..self.clone() }
    }

    /// Pairs (memory, state) reachable from `(initial, s)` for any source `s`,
    /// under any opponent behaviour.
    pub fn reachable_pairs(&self, arena: &Arena) -> BTreeSet<(usize, usize)> {
        let mut seen: BTreeSet<(usize, usize)> = (0..arena.num_states()).map(|s| (self.initial, s)).collect();
        let mut queue: VecDeque<(usize, usize)> = seen.iter().copied().collect();
        while let Some((m, s)) = queue.pop_front() {
            let actions: Vec<usize> = if arena.owner(s) == self.owner {
                self.support(m, s).collect()
            } else {
                (0..arena.num_actions(s)).collect()
            };
            for a in actions {
                for (t, _) in arena.action(s, a).support() {
                    let next = (self.next_memory(m, s, a, t), t);
                    if seen.insert(next) {
                        queue.push_back(next);
                    }
                }
            }
        }
        seen
    }

    // ----- file format -----------------------------------------------------------

    pub fn to_doc(&self, arena: &Arena) -> StrategyDoc {
        let mut update = Vec::new();
        for m in 0..self.memory_states {
            for s in 0..arena.num_states() {
                for a in 0..arena.num_actions(s) {
                    for t in 0..arena.num_states() {
                        let to = self.next_memory(m, s, a, t);
                        if to != m {
                            update.push(UpdateDoc {
                                memory: m,
                                state: arena.name(s).to_string(),
                                action: arena.action(s, a).name.clone(),
                                next: arena.name(t).to_string(),
                                to,
                            });
                        }
                    }
                }
            }
        }
        let mut choice = Vec::new();
        for m in 0..self.memory_states {
            for s in arena.states_of(self.owner) {
                choice.push(ChoiceDoc {
                    memory: m,
                    state: arena.name(s).to_string(),
                    actions: self.choice[m][s]
                        .iter()
                        .map(|(a, w)| (arena.action(s, *a).name.clone(), rational::format(w)))
                        .collect(),
                });
            }
        }
        StrategyDoc { memory_states: self.memory_states, initial: self.initial, update, choice }
    }

    pub fn to_json(&self, arena: &Arena) -> String {
        serde_json::to_string_pretty(&self.to_doc(arena)).expect("strategy serializes")
    }

    /// Builds a strategy from its document; unlisted updates keep the memory.
    pub fn from_doc(arena: &Arena, owner: Player, doc: &StrategyDoc) -> Result<Self> {
        let n = arena.num_states();
        let state = |name: &str| {
            arena
                .state_index(name)
                .ok_or_else(|| Error::InvalidStrategy(format!("unknown state {name:?}")))
        };
        let action = |s: usize, name: &str| {
            arena
                .action_index(s, name)
                .ok_or_else(|| Error::InvalidStrategy(format!("unknown action {name:?} at {:?}", arena.name(s))))
        };
        let mut overrides = BTreeMap::new();
        for u in &doc.update {
            let s = state(&u.state)?;
            let a = action(s, &u.action)?;
            let t = state(&u.next)?;
            if u.memory >= doc.memory_states {
                return Err(Error::InvalidStrategy(format!("memory {} out of range", u.memory)));
            }
            overrides.insert((u.memory, s, a, t), u.to);
        }
        let mut choices = vec![vec![Vec::new(); n]; doc.memory_states];
        for c in &doc.choice {
            let s = state(&c.state)?;
            if c.memory >= doc.memory_states {
                return Err(Error::InvalidStrategy(format!("memory {} out of range", c.memory)));
            }
            let mut dist = Vec::new();
            for (name, w) in &c.actions {
                dist.push((action(s, name)?, rational::parse(w)?));
            }
            choices[c.memory][s] = dist;
        }
        Self::from_fns(
            arena,
            owner,
            doc.memory_states,
            doc.initial,
            |m, s, a, t| overrides.get(&(m, s, a, t)).copied().unwrap_or(m),
            |m, s| choices[m][s].clone(),
        )
    }

    /// Parses either a full strategy document or a bare `state → action` map.
    pub fn parse(arena: &Arena, owner: Player, text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text).map_err(|e| Error::Syntax {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        if value.get("memory_states").is_some() {
            let doc: StrategyDoc =
                serde_json::from_value(value).map_err(|e| Error::InvalidStrategy(e.to_string()))?;
            Self::from_doc(arena, owner, &doc)
        } else {
            let map: BTreeMap<String, String> =
                serde_json::from_value(value).map_err(|e| Error::InvalidStrategy(e.to_string()))?;
            let pure = PureStationaryStrategy::from_map(arena, owner, &map)?;
            Ok(Self::from_pure(arena, &pure))
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StrategyDoc {
    pub memory_states: usize,
    pub initial: usize,
    #[serde(default)]
    pub update: Vec<UpdateDoc>,
    pub choice: Vec<ChoiceDoc>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UpdateDoc {
    pub memory: usize,
    pub state: String,
    pub action: String,
    pub next: String,
    pub to: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChoiceDoc {
    pub memory: usize,
    pub state: String,
    /// Action name → weight (`"num/den"`).
    pub actions: BTreeMap<String, String>,
}

// ----- guaranteed values, weaknesses and resets -----------------------------------

/// Guaranteed value of `σ` started with memory `m` in state `s`, for every pair.
#[derive(Clone, Debug, PartialEq)]
pub struct ProductValues {
    /// `values[m][s]`.
    pub values: Vec<Vec<Q>>,
}

impl ProductValues {
    pub fn get(&self, m: usize, s: usize) -> &Q {
        &self.values[m][s]
    }
}

/// Exact `inf_τ E[f]` for each starting pair (memory, state) of a P1 strategy.
///
/// With `σ` frozen, P2 faces a Markov decision process on (memory × state); for
/// the both-positional payoffs a pure stationary strategy on that product is
/// optimal, so the infimum is a minimum over an enumerable set.
pub fn product_values(arena: &Arena, spec: &PayoffSpec, sigma: &FiniteMemoryStrategy, budget: Budget) -> Result<ProductValues> {
    if !spec.is_both_positional() {
        return Err(Error::Unsupported {
            spec: spec.to_string(),
            reason: "guaranteed values are computed exactly only for both-positional payoffs".into(),
        });
    }
    if sigma.owner() != Player::P1 {
        return Err(Error::InvalidStrategy("product values are computed for P1 strategies".into()));
    }
    let values = solve::min_response_on_product(arena, spec, sigma, budget)?;
    Ok(ProductValues { values })
}

/// Pairs (memory, state) whose continuation is not `2ε`-optimal.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WeaknessSet {
    #[serde(with = "rational::serde_q")]
    pub epsilon: Q,
    pub pairs: BTreeSet<(usize, usize)>,
    /// Guaranteed value of each weak pair.
    #[serde(skip)]
    pub guaranteed: BTreeMap<(usize, usize), Q>,
}

impl WeaknessSet {
    pub fn empty(epsilon: Q) -> Self {
        WeaknessSet { epsilon, pairs: BTreeSet::new(), guaranteed: BTreeMap::new() }
    }

    pub fn contains(&self, m: usize, s: usize) -> bool {
        self.pairs.contains(&(m, s))
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// `(m, s)` is weak iff its guaranteed value is below `val(s) − 2ε`.
pub fn weakness_set_from(values: &[Q], product: &ProductValues, epsilon: &Q) -> WeaknessSet {
    let two_eps = epsilon * Q::from_integer(2.into());
    let mut set = WeaknessSet::empty(epsilon.clone());
    for (m, row) in product.values.iter().enumerate() {
        for (s, g) in row.iter().enumerate() {
            if *g < &values[s] - &two_eps {
                set.pairs.insert((m, s));
                set.guaranteed.insert((m, s), g.clone());
            }
        }
    }
    set
}

pub fn weakness_set(
    arena: &Arena,
    spec: &PayoffSpec,
    sigma: &FiniteMemoryStrategy,
    epsilon: &Q,
    budget: Budget,
) -> Result<WeaknessSet> {
    let values = solve::brute_force_value(arena, spec, budget)?;
    let product = product_values(arena, spec, sigma, budget)?;
    Ok(weakness_set_from(&values.values, &product, epsilon))
}

/// Resets the memory to its initial value whenever the updated pair is weak.
///
/// The reset is applied once per step: if `(initial, t)` is itself weak the
/// memory simply stays at `initial`.
pub fn reset_strategy(sigma: &FiniteMemoryStrategy, weak: &WeaknessSet) -> FiniteMemoryStrategy {
    let mut out = sigma.clone();
    for m in 0..sigma.memory_states {
        for pair in 0..sigma.num_pairs {
            for t in 0..sigma.num_states {
                let idx = (m * sigma.num_pairs + pair) * sigma.num_states + t;
                if weak.contains(sigma.update[idx], t) {
                    out.update[idx] = sigma.initial;
                }
            }
        }
    }
    out
}

// ----- projections ------------------------------------------------------------------

/// Split of the actions of a P1 state into two non-empty sides.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartitionAtState {
    pub pivot: usize,
    pub side0: Vec<usize>,
    pub side1: Vec<usize>,
}

impl PartitionAtState {
    pub fn new(arena: &Arena, pivot: usize, side0: Vec<usize>, side1: Vec<usize>) -> Result<Self> {
        if pivot >= arena.num_states() {
            return Err(Error::InvalidStrategy("pivot out of range".into()));
        }
        if arena.owner(pivot) != Player::P1 {
            return Err(Error::InvalidStrategy(format!("pivot {:?} is not a P1 state", arena.name(pivot))));
        }
        if side0.is_empty() || side1.is_empty() {
            return Err(Error::InvalidStrategy("both sides of a partition must be non-empty".into()));
        }
        let mut all: Vec<usize> = side0.iter().chain(&side1).copied().collect();
        all.sort_unstable();
        if all != (0..arena.num_actions(pivot)).collect::<Vec<_>>() {
            return Err(Error::InvalidStrategy("sides must be disjoint and cover the pivot's actions".into()));
        }
        Ok(PartitionAtState { pivot, side0, side1 })
    }

    pub fn side_of(&self, action: usize) -> usize {
        if self.side0.contains(&action) {
            0
        } else {
            1
        }
    }

    pub fn side(&self, j: usize) -> &[usize] {
        if j == 0 {
            &self.side0
        } else {
            &self.side1
        }
    }

    /// The sub-arena keeping only side `j` at the pivot.
    pub fn sub_arena(&self, arena: &Arena, j: usize) -> Result<Arena> {
        arena.restrict(self.pivot, self.side(j))
    }
}

/// Projection of a play on one side of a partition.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Projection {
    Finite(FinitePlay),
    Infinite(LassoPlay),
}

impl Projection {
    pub fn is_finite(&self) -> bool {
        matches!(self, Projection::Finite(_))
    }
}

/// Factors of a finite play at the pivot: `(start, end, side)` step ranges where
/// each factor starts at a visit to the pivot. The final bare visit (no action)
/// has side `None`.
fn factors(play: &FinitePlay, split: &PartitionAtState) -> Vec<(usize, usize, Option<usize>)> {
    let visits: Vec<usize> = (0..play.states.len()).filter(|&i| play.states[i] == split.pivot).collect();
    let mut out = Vec::with_capacity(visits.len());
    for (k, &i) in visits.iter().enumerate() {
        let end = visits.get(k + 1).copied().unwrap_or(play.actions.len());
        let side = play.actions.get(i).map(|&a| split.side_of(a));
        out.push((i, end, side));
    }
    out
}

fn check_source(source: usize, split: &PartitionAtState) -> Result<()> {
    if source != split.pivot {
        return Err(Error::InvalidPlay("projections are defined on plays starting at the pivot".into()));
    }
    Ok(())
}

/// Concatenation of the side-`j` factors of a finite play. The result ends at
/// the play's last state when the last factor belongs to side `j` (or is a bare
/// visit), and at the pivot otherwise.
pub fn project_finite(play: &FinitePlay, split: &PartitionAtState, side: usize) -> Result<FinitePlay> {
    check_source(play.source(), split)?;
    let mut out = FinitePlay::single(split.pivot);
    for (start, end, s) in factors(play, split) {
        if s == Some(side) {
            for i in start..end {
                out.push(play.actions[i], play.states[i + 1]);
            }
        }
    }
    Ok(out)
}

/// Projection of `prefix · cycle^ω`: a lasso when side `j` is taken infinitely
/// often (or owns the final infinite factor), a finite play otherwise.
pub fn project_lasso(lasso: &LassoPlay, split: &PartitionAtState, side: usize) -> Result<Projection> {
    check_source(lasso.prefix.source(), split)?;
    let pivot = split.pivot;
    let cycle_visit = lasso.cycle.states[..lasso.cycle.actions.len()].iter().position(|&s| s == pivot);
    match cycle_visit {
        Some(r) => {
            // Rotate so that the cycle starts at a pivot visit.
            let rotated = rotate_to(lasso, r);
            let head = project_finite(&rotated.prefix, split, side)?;
            let body = project_finite(&rotated.cycle, split, side)?;
            if body.is_empty() {
                Ok(Projection::Finite(head))
            } else {
                Ok(Projection::Infinite(LassoPlay { prefix: head, cycle: body }))
            }
        }
        None => {
            // The play stays inside the factor opened at the last prefix visit.
            let last = (0..lasso.prefix.states.len())
                .rev()
                .find(|&i| lasso.prefix.states[i] == pivot)
                .expect("source is the pivot");
            let open_side = if last < lasso.prefix.actions.len() {
                split.side_of(lasso.prefix.actions[last])
            } else {
                split.side_of(lasso.cycle.actions[0])
            };
            let head = project_finite(&lasso.prefix, split, side)?;
            if open_side == side {
                Ok(Projection::Infinite(LassoPlay { prefix: head, cycle: lasso.cycle.clone() }))
            } else {
                let closed = FinitePlay {
                    states: lasso.prefix.states[..=last].to_vec(),
                    actions: lasso.prefix.actions[..last].to_vec(),
                };
                Ok(Projection::Finite(project_finite(&closed, split, side)?))
            }
        }
    }
}

/// Equivalent lasso whose prefix is extended by `r` cycle steps.
fn rotate_to(lasso: &LassoPlay, r: usize) -> LassoPlay {
    let mut prefix = lasso.prefix.clone();
    let c = &lasso.cycle;
    for i in 0..r {
        prefix.push(c.actions[i], c.states[i + 1]);
    }
    let mut cycle = FinitePlay::single(c.states[r]);
    let len = c.actions.len();
    for k in 0..len {
        let i = (r + k) % len;
        cycle.push(c.actions[i], c.states[i + 1]);
    }
    LassoPlay { prefix, cycle }
}

/// Letters (state, action) of a play.
fn letters(play: &FinitePlay) -> Vec<(usize, usize)> {
    play.actions.iter().enumerate().map(|(i, &a)| (play.states[i], a)).collect()
}

/// The play as a word over (state, action) letters.
pub fn lasso_letters(lasso: &LassoPlay) -> LassoWord<(usize, usize)> {
    LassoWord::new(letters(&lasso.prefix), letters(&lasso.cycle))
}

/// Block pattern that rebuilds a lasso play from its two projections.
///
/// Only meaningful when both projections are infinite, i.e. the cycle visits
/// the pivot with actions from both sides.
pub fn factor_pattern(lasso: &LassoPlay, split: &PartitionAtState) -> Result<ShufflePattern> {
    check_source(lasso.prefix.source(), split)?;
    let r = lasso.cycle.states[..lasso.cycle.actions.len()]
        .iter()
        .position(|&s| s == split.pivot)
        .ok_or_else(|| Error::InvalidPlay("the cycle never visits the pivot".into()))?;
    let rotated = rotate_to(lasso, r);
    let blocks = |play: &FinitePlay| -> Vec<(usize, usize)> {
        factors(play, split)
            .into_iter()
            .filter_map(|(start, end, side)| match side {
                Some(0) => Some((end - start, 0)),
                Some(_) => Some((0, end - start)),
                None => None,
            })
            .collect()
    };
    Ok(ShufflePattern::new(blocks(&rotated.prefix), blocks(&rotated.cycle)))
}

// ----- trigger strategy ----------------------------------------------------------

/// P2 strategy that follows `τ_j` after an action of side `j` at the pivot,
/// feeding `τ_j` the projected history.
///
/// Memory is `(flag, m0, m1)`: the side of the last pivot action and the two
/// automata. Each step belongs to exactly one factor, so advancing only the
/// automaton of that factor's side reproduces `τ_j` run on `π_j(h)`.
pub fn trigger_strategy(
    arena: &Arena,
    tau0: &FiniteMemoryStrategy,
    tau1: &FiniteMemoryStrategy,
    split: &PartitionAtState,
) -> Result<FiniteMemoryStrategy> {
    for (j, tau) in [tau0, tau1].into_iter().enumerate() {
        if tau.owner() != Player::P2 {
            return Err(Error::InvalidStrategy("trigger components must be P2 strategies".into()));
        }
        for m in 0..tau.memory_states() {
            if let Some(a) = tau.support(m, split.pivot).find(|a| split.side_of(*a) != j) {
                return Err(Error::InvalidStrategy(format!(
                    "component {j} uses removed action {:?}",
                    arena.action(split.pivot, a).name
                )));
            }
        }
    }
    let (k0, k1) = (tau0.memory_states(), tau1.memory_states());
    let encode = |flag: usize, m0: usize, m1: usize| (flag * k0 + m0) * k1 + m1;
    let decode = |code: usize| (code / (k0 * k1), (code / k1) % k0, code % k1);
    FiniteMemoryStrategy::from_fns(
        arena,
        Player::P2,
        2 * k0 * k1,
        encode(0, tau0.initial(), tau1.initial()),
        |code, s, a, t| {
            let (mut flag, mut m0, mut m1) = decode(code);
            if s == split.pivot {
                flag = split.side_of(a);
            }
            if flag == 0 {
                m0 = tau0.next_memory(m0, s, a, t);
            } else {
                m1 = tau1.next_memory(m1, s, a, t);
            }
            encode(flag, m0, m1)
        },
        |code, s| {
            let (flag, m0, m1) = decode(code);
            if flag == 0 {
                tau0.choice(m0, s).to_vec()
            } else {
                tau1.choice(m1, s).to_vec()
            }
        },
    )
}
