//! Strategy-pair evaluation, best responses, brute-force values, action
//! classification and martingale checks.

use std::collections::BTreeMap;

use num_traits::{One, Signed, Zero};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::arena::{Arena, Player, Sampler};
use crate::chain::{self, InducedChain, Node};
use crate::error::{Error, Result};
use crate::payoff::{class_value, PayoffSpec};
use crate::rational::{self, Q};
use crate::strategy::{FiniteMemoryStrategy, PureStationaryStrategy, WeaknessSet};

/// Upper bound on the number of strategy combinations an enumeration may visit.
pub type Budget = u128;

pub const DEFAULT_BUDGET: Budget = 2_000_000;

// ----- evaluation ---------------------------------------------------------------

fn check_evaluable(arena: &Arena, spec: &PayoffSpec) -> Result<()> {
    if !spec.is_class_determined() && *spec != PayoffSpec::Discounted {
        return Err(Error::Unsupported {
            spec: spec.to_string(),
            reason: "not determined by recurrent classes; use the dedicated routines in verify".into(),
        });
    }
    spec.check_arena(arena)
}

/// Exact expected payoff from every node of a chain.
pub fn chain_values(arena: &Arena, spec: &PayoffSpec, chain: &InducedChain) -> Result<Vec<Q>> {
    check_evaluable(arena, spec)?;
    if *spec == PayoffSpec::Discounted {
        return chain::discounted_node_values(arena, chain);
    }
    let classes = chain::bottom_sccs(arena, chain)?;
    let values: Vec<Q> = classes.iter().map(|c| class_value(spec, c)).collect::<Result<_>>()?;
    let absorb = chain::absorption_matrix(chain, &classes)?;
    Ok(absorb
        .iter()
        .map(|row| row.iter().zip(&values).map(|(p, v)| p * v).sum())
        .collect())
}

/// Expected payoff from every state, both memories initial.
pub fn pair_values(
    arena: &Arena,
    spec: &PayoffSpec,
    sigma: &FiniteMemoryStrategy,
    tau: &FiniteMemoryStrategy,
) -> Result<Vec<Q>> {
    let chain = chain::induce_chain_initial(arena, sigma, tau)?;
    let mut values = chain_values(arena, spec, &chain)?;
    // Start nodes are the first `num_states` nodes, in state order.
    values.truncate(arena.num_states());
    Ok(values)
}

pub fn expected_payoff(
    arena: &Arena,
    spec: &PayoffSpec,
    sigma: &FiniteMemoryStrategy,
    tau: &FiniteMemoryStrategy,
    source: usize,
) -> Result<Q> {
    let chain = chain::induce_chain_from(arena, sigma, tau, &[(source, sigma.initial(), tau.initial())])?;
    Ok(chain_values(arena, spec, &chain)?.swap_remove(0))
}

fn check_both_positional(spec: &PayoffSpec) -> Result<()> {
    if !spec.is_both_positional() {
        return Err(Error::Unsupported {
            spec: spec.to_string(),
            reason: "exact enumeration needs a payoff that is positional for both players \
                     (mean, discounted, parity, limsup, liminf)"
                .into(),
        });
    }
    Ok(())
}

fn check_budget(needed: u128, budget: Budget) -> Result<()> {
    if needed > budget {
        return Err(Error::Budget { needed, budget });
    }
    Ok(())
}

// ----- best responses ---------------------------------------------------------------

/// P2's best responses to a fixed P1 strategy.
#[derive(Clone, Debug, PartialEq)]
pub struct BestResponse {
    /// Per-state minimum of the expected payoff.
    pub values: Vec<Q>,
    /// A minimizer for each state.
    pub per_state: Vec<PureStationaryStrategy>,
    /// A single strategy attaining every minimum, when one exists.
    pub uniform: Option<PureStationaryStrategy>,
}

/// Enumerates P2's pure stationary strategies against a pure stationary σ.
pub fn best_response_min(
    arena: &Arena,
    spec: &PayoffSpec,
    sigma: &PureStationaryStrategy,
    budget: Budget,
) -> Result<BestResponse> {
    check_both_positional(spec)?;
    check_budget(PureStationaryStrategy::count(arena, Player::P2), budget)?;
    let fm_sigma = FiniteMemoryStrategy::from_pure(arena, sigma);
    let taus: Vec<PureStationaryStrategy> = PureStationaryStrategy::enumerate(arena, Player::P2).collect();
    let rows = taus
        .iter()
        .map(|t| pair_values(arena, spec, &fm_sigma, &FiniteMemoryStrategy::from_pure(arena, t)))
        .collect::<Result<Vec<_>>>()?;
    Ok(summarize_responses(arena.num_states(), &taus, &rows))
}

fn summarize_responses(n: usize, taus: &[PureStationaryStrategy], rows: &[Vec<Q>]) -> BestResponse {
    let mut best = vec![0usize; n];
    for (i, row) in rows.iter().enumerate() {
        for s in 0..n {
            if row[s] < rows[best[s]][s] {
                best[s] = i;
            }
        }
    }
    let values: Vec<Q> = (0..n).map(|s| rows[best[s]][s].clone()).collect();
    let uniform = rows.iter().position(|row| *row == values).map(|i| taus[i].clone());
    BestResponse { values, per_state: best.iter().map(|&i| taus[i].clone()).collect(), uniform }
}

/// Number of P2 pure strategies on (σ-memory × state).
pub fn product_response_count(arena: &Arena, memory_states: usize) -> u128 {
    arena
        .states_of(Player::P2)
        .map(|s| (arena.num_actions(s) as u128).saturating_pow(memory_states as u32))
        .fold(1u128, |a, b| a.saturating_mul(b))
}

/// `min_τ E[f]` from every (memory, state) of a P1 finite-memory strategy,
/// `[m][s]`.
///
/// P2 observes σ's memory (it is a function of the history), so σ frozen
/// leaves P2 an MDP on (memory × state). The minimum over its pure stationary
/// strategies is enumerated; such a strategy is a P2 strategy that tracks σ's
/// memory with the same automaton.
pub fn min_response_on_product(
    arena: &Arena,
    spec: &PayoffSpec,
    sigma: &FiniteMemoryStrategy,
    budget: Budget,
) -> Result<Vec<Vec<Q>>> {
    let k = sigma.memory_states();
    check_budget(product_response_count(arena, k), budget)?;
    let n = arena.num_states();
    let slots: Vec<(usize, usize)> = (0..k).flat_map(|m| arena.states_of(Player::P2).map(move |s| (m, s))).collect();
    let starts: Vec<Node> = (0..k).flat_map(|m| (0..n).map(move |s| (s, m, m))).collect();
    let mut best: Option<Vec<Q>> = None;
    let mut code = vec![0usize; slots.len()];
    loop {
        let mut table = vec![vec![0usize; n]; k];
        for (&(m, s), &a) in slots.iter().zip(&code) {
            table[m][s] = a;
        }
        let tau = FiniteMemoryStrategy::deterministic(
            arena,
            Player::P2,
            k,
            sigma.initial(),
            |m, s, a, t| sigma.next_memory(m, s, a, t),
            |m, s| table[m][s],
        )?;
        let chain = chain::induce_chain_from(arena, sigma, &tau, &starts)?;
        let values = chain_values(arena, spec, &chain)?;
        match &mut best {
            None => best = Some(values[..starts.len()].to_vec()),
            Some(b) => {
                for (x, v) in b.iter_mut().zip(&values[..starts.len()]) {
                    if v < x {
                        *x = v.clone();
                    }
                }
            }
        }
        // Mixed-radix increment.
        let mut i = 0;
        loop {
            if i == slots.len() {
                let flat = best.expect("at least one strategy");
                return Ok(flat.chunks(n).map(|c| c.to_vec()).collect());
            }
            code[i] += 1;
            if code[i] < arena.num_actions(slots[i].1) {
                break;
            }
            code[i] = 0;
            i += 1;
        }
    }
}

// ----- values ------------------------------------------------------------------

/// Best-response certificate for one state.
#[derive(Clone, Debug, PartialEq)]
pub struct Certificate {
    pub tau: PureStationaryStrategy,
    pub value: Q,
}

/// Game values with the strategies certifying them.
#[derive(Clone, Debug, PartialEq)]
pub struct ValueVector {
    pub spec: PayoffSpec,
    pub fingerprint: String,
    pub values: Vec<Q>,
    /// Optimal pure stationary strategy of P1 from every state.
    pub sigma: PureStationaryStrategy,
    /// Minimizing response to `sigma` for each state.
    pub certificates: Vec<Certificate>,
    /// Size of the enumerated grid (P1 strategies, P2 strategies).
    pub grid: (u128, u128),
}

impl ValueVector {
    /// Re-evaluates every certificate and compares it to the recorded value.
    pub fn check(&self, arena: &Arena) -> Result<bool> {
        let sigma = FiniteMemoryStrategy::from_pure(arena, &self.sigma);
        for (s, cert) in self.certificates.iter().enumerate() {
            let tau = FiniteMemoryStrategy::from_pure(arena, &cert.tau);
            let got = expected_payoff(arena, &self.spec, &sigma, &tau, s)?;
            if got != cert.value || got != self.values[s] {
                return Ok(false);
            }
        }
        Ok(true)
    }

    pub fn to_doc(&self, arena: &Arena) -> ValueDoc {
        ValueDoc {
            payoff: self.spec.to_string(),
            fingerprint: self.fingerprint.clone(),
            values: (0..arena.num_states())
                .map(|s| (arena.name(s).to_string(), rational::format(&self.values[s])))
                .collect(),
            sigma: self.sigma.to_map(arena),
            certificates: self
                .certificates
                .iter()
                .enumerate()
                .map(|(s, c)| CertificateDoc {
                    state: arena.name(s).to_string(),
                    tau: c.tau.to_map(arena),
                    value: rational::format(&c.value),
                })
                .collect(),
            grid: [self.grid.0.to_string(), self.grid.1.to_string()],
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ValueDoc {
    pub payoff: String,
    pub fingerprint: String,
    pub values: BTreeMap<String, String>,
    pub sigma: BTreeMap<String, String>,
    pub certificates: Vec<CertificateDoc>,
    pub grid: [String; 2],
}

#[derive(Clone, Debug, Serialize)]
pub struct CertificateDoc {
    pub state: String,
    pub tau: BTreeMap<String, String>,
    pub value: String,
}

/// Values by exhaustive enumeration of both players' pure stationary
/// strategies, with an exact saddle-point check on the grid.
pub fn brute_force_value(arena: &Arena, spec: &PayoffSpec, budget: Budget) -> Result<ValueVector> {
    check_both_positional(spec)?;
    spec.check_arena(arena)?;
    let n1 = PureStationaryStrategy::count(arena, Player::P1);
    let n2 = PureStationaryStrategy::count(arena, Player::P2);
    check_budget(n1.saturating_mul(n2), budget)?;
    let sigmas: Vec<PureStationaryStrategy> = PureStationaryStrategy::enumerate(arena, Player::P1).collect();
    let taus: Vec<PureStationaryStrategy> = PureStationaryStrategy::enumerate(arena, Player::P2).collect();
    let fm_taus: Vec<FiniteMemoryStrategy> = taus.iter().map(|t| FiniteMemoryStrategy::from_pure(arena, t)).collect();
    let mut grid: Vec<Vec<Vec<Q>>> = Vec::with_capacity(sigmas.len());
    for sigma in &sigmas {
        let fm = FiniteMemoryStrategy::from_pure(arena, sigma);
        grid.push(fm_taus.iter().map(|t| pair_values(arena, spec, &fm, t)).collect::<Result<_>>()?);
    }
    let n = arena.num_states();
    let min_over_tau = |i: usize, s: usize| grid[i].iter().map(|row| &row[s]).min().expect("non-empty").clone();
    let max_over_sigma = |j: usize, s: usize| grid.iter().map(|rows| &rows[j][s]).max().expect("non-empty").clone();
    let mut values = Vec::with_capacity(n);
    for s in 0..n {
        let maxmin = (0..sigmas.len()).map(|i| min_over_tau(i, s)).max().expect("non-empty");
        let minmax = (0..taus.len()).map(|j| max_over_sigma(j, s)).min().expect("non-empty");
        if maxmin != minmax {
            return Err(Error::SaddlePoint {
                state: arena.name(s).to_string(),
                maxmin: rational::format(&maxmin),
                minmax: rational::format(&minmax),
            });
        }
        values.push(maxmin);
    }
    let best = (0..sigmas.len())
        .find(|&i| (0..n).all(|s| min_over_tau(i, s) == values[s]))
        .ok_or(Error::NoUniformOptimum)?;
    let certificates = (0..n)
        .map(|s| {
            let j = (0..taus.len()).min_by_key(|&j| &grid[best][j][s]).expect("non-empty");
            Certificate { tau: taus[j].clone(), value: grid[best][j][s].clone() }
        })
        .collect();
    Ok(ValueVector {
        spec: spec.clone(),
        fingerprint: arena.fingerprint(),
        values,
        sigma: sigmas[best].clone(),
        certificates,
        grid: (n1, n2),
    })
}

// ----- action classification ------------------------------------------------------

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ActionEntry {
    pub state: usize,
    pub action: usize,
    /// `Σ p(s, a, t) · val(t)`.
    #[serde(with = "rational::serde_q")]
    pub expected: Q,
    /// Distinct values of the possible successors, ascending.
    #[serde(skip)]
    pub successor_values: Vec<Q>,
    pub value_preserving: bool,
    pub stable: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ActionClassification {
    pub entries: Vec<ActionEntry>,
    /// Per state: whether every available action is value-preserving.
    pub all_preserving: Vec<bool>,
    #[serde(skip)]
    offsets: Vec<usize>,
}

impl ActionClassification {
    pub fn entry(&self, s: usize, a: usize) -> &ActionEntry {
        &self.entries[self.offsets[s] + a]
    }

    pub fn is_value_preserving(&self, s: usize, a: usize) -> bool {
        self.entry(s, a).value_preserving
    }

    pub fn is_stable(&self, s: usize, a: usize) -> bool {
        self.entry(s, a).stable
    }

    /// Value-preserving actions of a state.
    pub fn preserving(&self, s: usize) -> Vec<usize> {
        let len = self.all_preserving.len();
        let end = if s + 1 < len { self.offsets[s + 1] } else { self.entries.len() };
        self.entries[self.offsets[s]..end]
            .iter()
            .filter(|e| e.value_preserving)
            .map(|e| e.action)
            .collect()
    }
}

pub fn classify_actions(arena: &Arena, values: &[Q]) -> ActionClassification {
    assert_eq!(values.len(), arena.num_states(), "values cover all states");
    let mut entries = Vec::new();
    let mut offsets = Vec::new();
    let mut all_preserving = Vec::new();
    for s in 0..arena.num_states() {
        offsets.push(entries.len());
        let mut all = true;
        for (a, act) in arena.actions(s).iter().enumerate() {
            let expected: Q = act.support().map(|(t, p)| p * &values[t]).sum();
            let mut successor_values: Vec<Q> = act.support().map(|(t, _)| values[t].clone()).collect();
            successor_values.sort();
            successor_values.dedup();
            let value_preserving = expected == values[s];
            let stable = successor_values.iter().all(|v| *v == values[s]);
            debug_assert!(!stable || value_preserving);
            all &= value_preserving;
            entries.push(ActionEntry { state: s, action: a, expected, successor_values, value_preserving, stable });
        }
        all_preserving.push(all);
    }
    ActionClassification { entries, all_preserving, offsets }
}

/// Deterministic stationary strategy picking the first value-preserving action.
pub fn locally_optimal(arena: &Arena, class: &ActionClassification, owner: Player) -> Option<PureStationaryStrategy> {
    let mut actions = vec![None; arena.num_states()];
    for s in arena.states_of(owner) {
        actions[s] = Some(*class.preserving(s).first()?);
    }
    PureStationaryStrategy::new(arena, owner, actions).ok()
}

// ----- martingales ------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum MartingaleVerdict {
    /// `E[val(S_{n+1}) | S_n] = val(S_n)` at every reachable node.
    Martingale,
    /// `≥` everywhere, strict somewhere.
    Submartingale,
    /// `<` somewhere.
    Violated,
}

#[derive(Clone, Debug, Serialize)]
pub struct NodeCheck {
    pub state: String,
    pub memory: (usize, usize),
    pub value: String,
    pub expected_next: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct MartingaleReport {
    pub verdict: MartingaleVerdict,
    pub nodes: usize,
    pub equal: usize,
    pub strict: Vec<NodeCheck>,
    pub violations: Vec<NodeCheck>,
}

/// Whether σ only plays value-preserving actions at the pairs it can reach.
pub fn check_locally_optimal(
    arena: &Arena,
    class: &ActionClassification,
    sigma: &FiniteMemoryStrategy,
) -> Result<()> {
    for (m, s) in sigma.reachable_pairs(arena) {
        if arena.owner(s) != sigma.owner() {
            continue;
        }
        if let Some(a) = sigma.support(m, s).find(|&a| !class.is_value_preserving(s, a)) {
            return Err(Error::Precondition(format!(
                "strategy plays non-value-preserving action {:?} at state {:?} (memory {m})",
                arena.action(s, a).name,
                arena.name(s)
            )));
        }
    }
    Ok(())
}

/// Exact one-step check of `E[val(S_{n+1}) | history] ≥ val(S_n)` at every
/// node of the induced chain reachable from an initial node.
pub fn martingale_check(
    arena: &Arena,
    values: &[Q],
    sigma: &FiniteMemoryStrategy,
    tau: &FiniteMemoryStrategy,
) -> Result<MartingaleReport> {
    let class = classify_actions(arena, values);
    check_locally_optimal(arena, &class, sigma)?;
    let chain = chain::induce_chain_initial(arena, sigma, tau)?;
    let mut equal = 0;
    let mut strict = Vec::new();
    let mut violations = Vec::new();
    for i in 0..chain.len() {
        let (s, m1, m2) = chain.node(i);
        let next: Q = chain.row(i).iter().map(|(j, p)| p * &values[chain.state(*j)]).sum();
        let check = || NodeCheck {
            state: arena.name(s).to_string(),
            memory: (m1, m2),
            value: rational::format(&values[s]),
            expected_next: rational::format(&next),
        };
        match next.cmp(&values[s]) {
            std::cmp::Ordering::Equal => equal += 1,
            std::cmp::Ordering::Greater => strict.push(check()),
            std::cmp::Ordering::Less => violations.push(check()),
        }
    }
    let verdict = if !violations.is_empty() {
        MartingaleVerdict::Violated
    } else if !strict.is_empty() {
        MartingaleVerdict::Submartingale
    } else {
        MartingaleVerdict::Martingale
    };
    Ok(MartingaleReport { verdict, nodes: chain.len(), equal, strict, violations })
}

/// When to stop a sampled trajectory.
#[derive(Clone, Debug, PartialEq)]
pub enum StoppingRule {
    /// First visit to one of these states (time 0 included).
    FirstHit(Vec<usize>),
    /// After exactly this many steps.
    Horizon(usize),
    /// First time σ's (memory, state) pair is weak.
    FirstWeakness(WeaknessSet),
}

/// Two-sided Hoeffding half-width for `n` samples of range `range` at
/// confidence `1 − delta`.
pub fn hoeffding_half_width(range: f64, n: usize, delta: f64) -> f64 {
    range * ((2.0 / delta).ln() / (2.0 * n as f64)).sqrt()
}

/// Confidence level of every Monte Carlo interval: 99%.
pub const MC_DELTA: f64 = 0.01;

#[derive(Clone, Debug, Serialize)]
pub struct McEstimate {
    pub runs: usize,
    pub seed: u64,
    /// Exact sample mean of `val(S_T)`.
    #[serde(with = "rational::serde_q")]
    pub mean: Q,
    pub half_width: f64,
    #[serde(with = "rational::serde_q")]
    pub reference: Q,
    pub covers: bool,
    /// Runs that reached a recurrent class before stopping.
    pub absorbed: usize,
    /// Largest step index at which `val(S_n)` changed, over all runs.
    pub last_value_change: usize,
}

impl McEstimate {
    pub fn mean_f64(&self) -> f64 {
        rational::to_f64(&self.mean)
    }

    /// `mean ≥ reference − half_width`.
    pub fn at_least_reference(&self) -> bool {
        self.mean_f64() >= rational::to_f64(&self.reference) - self.half_width
    }
}

/// Longest trajectory simulated before giving up on absorption.
const MAX_STEPS: usize = 1_000_000;

/// Monte Carlo estimate of `E[val(S_T)]`.
///
/// Inside a recurrent class of the induced chain `val` is constant when it is
/// a (sub)martingale, so a trajectory entering a class has reached its limit
/// and stops there with that value; this is how `T = ∞` is handled.
#[allow(clippy::too_many_arguments)]
pub fn stopped_value_mc(
    arena: &Arena,
    values: &[Q],
    sigma: &FiniteMemoryStrategy,
    tau: &FiniteMemoryStrategy,
    source: usize,
    rule: &StoppingRule,
    runs: usize,
    seed: u64,
) -> Result<McEstimate> {
    assert!(runs >= 1, "at least one run");
    let chain = chain::induce_chain_from(arena, sigma, tau, &[(source, sigma.initial(), tau.initial())])?;
    let classes = chain::bottom_sccs(arena, &chain)?;
    let mut recurrent = vec![false; chain.len()];
    for c in &classes {
        for &v in &c.nodes {
            recurrent[v] = true;
        }
    }
    let samplers: Vec<Sampler> = (0..chain.len())
        .map(|i| Sampler::new(chain.row(i).iter().map(|(j, p)| (*j, p))))
        .collect();
    let stop_here = |node: Node, steps: usize| match rule {
        StoppingRule::FirstHit(set) => set.contains(&node.0),
        StoppingRule::Horizon(h) => steps >= *h,
        StoppingRule::FirstWeakness(weak) => weak.contains(node.1, node.0),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut total = Q::zero();
    let mut absorbed = 0;
    let mut last_value_change = 0;
    for _ in 0..runs {
        let mut v = 0;
        let mut steps = 0;
        loop {
            let node = chain.node(v);
            if stop_here(node, steps) {
                break;
            }
            if recurrent[v] {
                absorbed += 1;
                break;
            }
            if steps >= MAX_STEPS {
                break;
            }
            let w = samplers[v].sample(&mut rng);
            if values[chain.state(w)] != values[node.0] {
                last_value_change = last_value_change.max(steps + 1);
            }
            v = w;
            steps += 1;
        }
        total += &values[chain.state(v)];
    }
    let mean = total / Q::from_integer((runs as i64).into());
    let hi = values.iter().max().expect("non-empty");
    let lo = values.iter().min().expect("non-empty");
    let half_width = hoeffding_half_width(rational::to_f64(&(hi - lo)), runs, MC_DELTA);
    let reference = values[source].clone();
    let covers = (rational::to_f64(&mean) - rational::to_f64(&reference)).abs() <= half_width;
    Ok(McEstimate { runs, seed, mean, half_width, reference, covers, absorbed, last_value_change })
}

/// Whether every choice weight of σ at an owned state is one.
pub fn is_pure(sigma: &FiniteMemoryStrategy, arena: &Arena) -> bool {
    (0..sigma.memory_states()).all(|m| {
        arena
            .states_of(sigma.owner())
            .all(|s| sigma.choice(m, s).iter().filter(|(_, w)| w.is_positive()).all(|(_, w)| w.is_one()))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arena::{Action, State};
    use crate::fixtures;
    use crate::payoff::Colour;
    use crate::rational::{int, ratio};

    fn first(arena: &Arena) -> (FiniteMemoryStrategy, FiniteMemoryStrategy) {
        (
            FiniteMemoryStrategy::uniform_first(arena, Player::P1),
            FiniteMemoryStrategy::uniform_first(arena, Player::P2),
        )
    }

    fn pure(arena: &Arena, owner: Player, map: &[(&str, &str)]) -> PureStationaryStrategy {
        let map = map.iter().map(|(s, a)| (s.to_string(), a.to_string())).collect();
        PureStationaryStrategy::from_map(arena, owner, &map).unwrap()
    }

    /// P2 state `x` with actions to absorbing rewards 0 and 5.
    fn p2_choice() -> Arena {
        let one = |t: usize| vec![(t, Q::one())];
        Arena::new(
            vec![
                State { name: "x".into(), owner: Player::P2 },
                State { name: "lo".into(), owner: Player::P1 },
                State { name: "hi".into(), owner: Player::P1 },
            ],
            vec![
                vec![
                    Action { name: "low".into(), colour: Colour::Int(0), successors: one(1) },
                    Action { name: "high".into(), colour: Colour::Int(5), successors: one(2) },
                ],
                vec![Action { name: "loop".into(), colour: Colour::Int(0), successors: one(1) }],
                vec![Action { name: "loop".into(), colour: Colour::Int(5), successors: one(2) }],
            ],
        )
        .unwrap()
    }

    #[test]
    fn expected_payoff_examples() {
        let arena = fixtures::one_state(Colour::Int(3));
        let (s, t) = first(&arena);
        assert_eq!(expected_payoff(&arena, &PayoffSpec::Mean, &s, &t, 0).unwrap(), int(3));

        let e3 = fixtures::e3();
        let (s, t) = first(&e3);
        assert_eq!(expected_payoff(&e3, &PayoffSpec::Mean, &s, &t, 0).unwrap(), int(1));

        let parity = fixtures::e3_with(2, 1);
        let (s, t) = first(&parity);
        assert_eq!(expected_payoff(&parity, &PayoffSpec::Parity, &s, &t, 0).unwrap(), ratio(1, 2));
    }

    #[test]
    fn expected_payoff_rejects_non_class_payoffs() {
        let arena = fixtures::fig1();
        let (s, t) = first(&arena);
        let spec: PayoffSpec = "suffixtarget:ab".parse().unwrap();
        assert!(matches!(expected_payoff(&arena, &spec, &s, &t, 0), Err(Error::Unsupported { .. })));
    }

    #[test]
    fn best_response_examples() {
        let arena = fixtures::e2();
        let sigma = pure(&arena, Player::P1, &[("s", "go"), ("g", "loop")]);
        let br = best_response_min(&arena, &PayoffSpec::Mean, &sigma, DEFAULT_BUDGET).unwrap();
        assert_eq!(br.values, vec![int(1), int(1)]);
        assert!(br.uniform.is_some());

        let arena = p2_choice();
        let sigma = pure(&arena, Player::P1, &[("lo", "loop"), ("hi", "loop")]);
        let br = best_response_min(&arena, &PayoffSpec::Mean, &sigma, DEFAULT_BUDGET).unwrap();
        assert_eq!(br.values[0], int(0));
        assert_eq!(br.per_state[0].action(0), Some(0));
    }

    #[test]
    fn best_response_budget() {
        let arena = p2_choice();
        let sigma = pure(&arena, Player::P1, &[("lo", "loop"), ("hi", "loop")]);
        let err = best_response_min(&arena, &PayoffSpec::Mean, &sigma, 1).unwrap_err();
        assert!(matches!(err, Error::Budget { needed: 2, budget: 1 }));
        let spec: PayoffSpec = "posavg".parse().unwrap();
        assert!(matches!(
            best_response_min(&arena, &spec, &sigma, DEFAULT_BUDGET),
            Err(Error::Unsupported { .. })
        ));
    }

    #[test]
    fn e2_value_is_one() {
        let arena = fixtures::e2();
        let v = brute_force_value(&arena, &PayoffSpec::Mean, DEFAULT_BUDGET).unwrap();
        assert_eq!(v.values, vec![int(1), int(1)]);
        assert_eq!(v.sigma.action(0), arena.action_index(0, "go"));
        assert!(v.check(&arena).unwrap());
    }

    #[test]
    fn one_state_value_is_class_value() {
        let arena = fixtures::one_state(Colour::Int(-2));
        let v = brute_force_value(&arena, &PayoffSpec::Liminf, DEFAULT_BUDGET).unwrap();
        assert_eq!(v.values, vec![int(-2)]);
    }

    #[test]
    fn classification_on_e2() {
        let arena = fixtures::e2();
        let v = brute_force_value(&arena, &PayoffSpec::Mean, DEFAULT_BUDGET).unwrap();
        let class = classify_actions(&arena, &v.values);
        // Staying is locally fine but never reaches the goal.
        assert!(class.is_value_preserving(0, 0) && class.is_stable(0, 0));
        assert!(class.is_value_preserving(0, 1));
        assert!(class.all_preserving[0]);
    }

    #[test]
    fn preserving_but_not_stable() {
        let arena = fixtures::e3();
        let class = classify_actions(&arena, &[int(1), int(0), int(2)]);
        assert!(class.is_value_preserving(0, 0));
        assert!(!class.is_stable(0, 0));
        assert_eq!(class.entry(0, 0).successor_values, vec![int(0), int(2)]);
    }

    #[test]
    fn martingale_examples() {
        let arena = fixtures::detour();
        let v = brute_force_value(&arena, &PayoffSpec::Mean, DEFAULT_BUDGET).unwrap();
        let class = classify_actions(&arena, &v.values);
        let sigma = FiniteMemoryStrategy::from_pure(&arena, &locally_optimal(&arena, &class, Player::P1).unwrap());
        let tau = FiniteMemoryStrategy::from_pure(&arena, &locally_optimal(&arena, &class, Player::P2).unwrap());
        let report = martingale_check(&arena, &v.values, &sigma, &tau).unwrap();
        assert_eq!(report.verdict, MartingaleVerdict::Martingale);
    }

    #[test]
    fn martingale_precondition() {
        let arena = fixtures::weak_memory();
        let v = brute_force_value(&arena, &PayoffSpec::Mean, DEFAULT_BUDGET).unwrap();
        let sigma = fixtures::weak_memory_sigma(&arena);
        let tau = FiniteMemoryStrategy::uniform_first(&arena, Player::P2);
        assert!(martingale_check(&arena, &v.values, &sigma, &tau).is_ok());
        // With val(g) = 0 the action `try` no longer preserves val(s) = 1.
        let err = martingale_check(&arena, &[int(1), int(0)], &sigma, &tau);
        assert!(matches!(err, Err(Error::Precondition(_))));
    }

    #[test]
    fn horizon_zero_is_exact() {
        let arena = fixtures::e3();
        let values = vec![int(1), int(0), int(2)];
        let (s, t) = first(&arena);
        let est = stopped_value_mc(&arena, &values, &s, &t, 0, &StoppingRule::Horizon(0), 10, 1).unwrap();
        assert_eq!(est.mean, int(1));
        assert!(est.covers);
    }

    #[test]
    fn first_hit_estimate_covers_value() {
        let arena = fixtures::e3();
        let values = vec![int(1), int(0), int(2)];
        let (s, t) = first(&arena);
        let rule = StoppingRule::FirstHit(vec![1, 2]);
        let est = stopped_value_mc(&arena, &values, &s, &t, 0, &rule, 10_000, 7).unwrap();
        assert!(est.covers, "{est:?}");
        assert_eq!(est.last_value_change, 1);
    }

    #[test]
    fn hoeffding_width() {
        let w = hoeffding_half_width(1.0, 10_000, 0.01);
        assert!((w - 0.016_276).abs() < 1e-5);
    }
}
