//! The Markov chain induced by fixing a finite-memory strategy for each player.

use std::collections::{BTreeMap, HashMap, VecDeque};

use num_traits::{One, Signed, Zero};
use serde::Serialize;

use crate::arena::{Arena, Player};
use crate::error::{Error, Result};
use crate::linalg;
use crate::payoff::{Colour, ColourStats};
use crate::rational::{self, Q};
use crate::strategy::FiniteMemoryStrategy;

/// Node of the product: (arena state, P1 memory, P2 memory).
pub type Node = (usize, usize, usize);

/// One positive-probability (action, successor) step out of a node.
#[derive(Clone, Debug, PartialEq)]
pub struct Step {
    pub action: usize,
    pub target: usize,
    /// Choice weight times transition probability.
    pub prob: Q,
}

#[derive(Clone, Debug, PartialEq)]
pub struct InducedChain {
    nodes: Vec<Node>,
    index: HashMap<Node, usize>,
    /// Action law at each node.
    choices: Vec<Vec<(usize, Q)>>,
    steps: Vec<Vec<Step>>,
    /// `steps` merged by target node, sorted by target.
    rows: Vec<Vec<(usize, Q)>>,
}

impl InducedChain {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, i: usize) -> Node {
        self.nodes[i]
    }

    pub fn state(&self, i: usize) -> usize {
        self.nodes[i].0
    }

    pub fn index(&self, node: Node) -> Option<usize> {
        self.index.get(&node).copied()
    }

    pub fn choices(&self, i: usize) -> &[(usize, Q)] {
        &self.choices[i]
    }

    pub fn steps(&self, i: usize) -> &[Step] {
        &self.steps[i]
    }

    pub fn row(&self, i: usize) -> &[(usize, Q)] {
        &self.rows[i]
    }

    /// Probability of moving from node `i` to node `j`.
    pub fn prob(&self, i: usize, j: usize) -> Q {
        self.rows[i]
            .binary_search_by_key(&j, |(t, _)| *t)
            .map(|k| self.rows[i][k].1.clone())
            .unwrap_or_else(|_| Q::zero())
    }

    /// Weighted colours of a node: `(choice weight, colour)` per played action.
    pub fn node_colours<'a>(&'a self, arena: &'a Arena, i: usize) -> impl Iterator<Item = (&'a Q, &'a Colour)> + 'a {
        let s = self.state(i);
        self.choices[i].iter().map(move |(a, w)| (w, arena.colour(s, *a)))
    }

    /// Structured dump mirroring the game format.
    pub fn to_doc(&self, arena: &Arena) -> ChainDoc {
        ChainDoc {
            nodes: self
                .nodes
                .iter()
                .enumerate()
                .map(|(i, &(s, m1, m2))| NodeDoc {
                    id: i,
                    state: arena.name(s).to_string(),
                    memory: (m1, m2),
                    successors: self.rows[i]
                        .iter()
                        .map(|(j, p)| (*j, rational::format(p)))
                        .collect(),
                })
                .collect(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ChainDoc {
    pub nodes: Vec<NodeDoc>,
}

#[derive(Clone, Debug, Serialize)]
pub struct NodeDoc {
    pub id: usize,
    pub state: String,
    pub memory: (usize, usize),
    pub successors: Vec<(usize, String)>,
}

fn check_owners(sigma: &FiniteMemoryStrategy, tau: &FiniteMemoryStrategy) -> Result<()> {
    if sigma.owner() != Player::P1 || tau.owner() != Player::P2 {
        return Err(Error::InvalidStrategy("expected a P1 strategy and a P2 strategy".into()));
    }
    Ok(())
}

/// The full product chain over every (state, m1, m2).
pub fn induce_chain(arena: &Arena, sigma: &FiniteMemoryStrategy, tau: &FiniteMemoryStrategy) -> Result<InducedChain> {
    let mut starts = Vec::new();
    for s in 0..arena.num_states() {
        for m1 in 0..sigma.memory_states() {
            for m2 in 0..tau.memory_states() {
                starts.push((s, m1, m2));
            }
        }
    }
    induce_chain_from(arena, sigma, tau, &starts)
}

/// The product chain restricted to nodes reachable from `starts`. The start
/// nodes come first, in the given order.
pub fn induce_chain_from(
    arena: &Arena,
    sigma: &FiniteMemoryStrategy,
    tau: &FiniteMemoryStrategy,
    starts: &[Node],
) -> Result<InducedChain> {
    check_owners(sigma, tau)?;
    let mut chain = InducedChain {
        nodes: Vec::new(),
        index: HashMap::new(),
        choices: Vec::new(),
        steps: Vec::new(),
        rows: Vec::new(),
    };
    let mut queue = VecDeque::new();
    for &n in starts {
        if !chain.index.contains_key(&n) {
            chain.index.insert(n, chain.nodes.len());
            chain.nodes.push(n);
            queue.push_back(n);
        }
    }
    while let Some((s, m1, m2)) = queue.pop_front() {
        let choice: Vec<(usize, Q)> = match arena.owner(s) {
            Player::P1 => sigma.choice(m1, s),
            Player::P2 => tau.choice(m2, s),
        }
        .iter()
        .filter(|(_, w)| w.is_positive())
        .cloned()
        .collect();
        let mut steps = Vec::new();
        let mut row: BTreeMap<usize, Q> = BTreeMap::new();
        for (a, w) in &choice {
            for (t, p) in arena.action(s, *a).support() {
                let next = (t, sigma.next_memory(m1, s, *a, t), tau.next_memory(m2, s, *a, t));
                let j = match chain.index.get(&next) {
                    Some(&j) => j,
                    None => {
                        let j = chain.nodes.len();
                        chain.index.insert(next, j);
                        chain.nodes.push(next);
                        queue.push_back(next);
                        j
                    }
                };
                let prob = w * p;
                *row.entry(j).or_insert_with(Q::zero) += &prob;
                steps.push(Step { action: *a, target: j, prob });
            }
        }
        debug_assert!(row.values().cloned().sum::<Q>().is_one());
        chain.choices.push(choice);
        chain.steps.push(steps);
        chain.rows.push(row.into_iter().collect());
    }
    // Nodes are processed in discovery order, so rows line up with `nodes`.
    Ok(chain)
}

/// Product chain from every state, both memories at their initial values.
pub fn induce_chain_initial(
    arena: &Arena,
    sigma: &FiniteMemoryStrategy,
    tau: &FiniteMemoryStrategy,
) -> Result<InducedChain> {
    let starts: Vec<Node> = (0..arena.num_states()).map(|s| (s, sigma.initial(), tau.initial())).collect();
    induce_chain_from(arena, sigma, tau, &starts)
}

// ----- recurrent classes -----------------------------------------------------------

/// A bottom strongly connected component with its stationary law.
#[derive(Clone, Debug, PartialEq)]
pub struct RecurrentClassSummary {
    /// Chain node indices, ascending.
    pub nodes: Vec<usize>,
    /// Stationary probability of each node in `nodes`.
    pub stationary: Vec<Q>,
    pub stats: ColourStats,
}

impl RecurrentClassSummary {
    pub fn contains(&self, node: usize) -> bool {
        self.nodes.binary_search(&node).is_ok()
    }
}

/// Strongly connected components (iterative Tarjan), each sorted ascending.
fn sccs(chain: &InducedChain) -> Vec<Vec<usize>> {
    let n = chain.len();
    let mut index = vec![usize::MAX; n];
    let mut low = vec![0; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut out = Vec::new();
    let mut counter = 0;
    for root in 0..n {
        if index[root] != usize::MAX {
            continue;
        }
        let mut work: Vec<(usize, usize)> = vec![(root, 0)];
        while let Some(&mut (v, ref mut k)) = work.last_mut() {
            if *k == 0 && index[v] == usize::MAX {
                index[v] = counter;
                low[v] = counter;
                counter += 1;
                stack.push(v);
                on_stack[v] = true;
            }
            if let Some(&(w, _)) = chain.rows[v].get(*k) {
                *k += 1;
                if index[w] == usize::MAX {
                    work.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
                continue;
            }
            work.pop();
            if let Some(&(parent, _)) = work.last() {
                low[parent] = low[parent].min(low[v]);
            }
            if low[v] == index[v] {
                let mut comp = Vec::new();
                loop {
                    let w = stack.pop().expect("tarjan stack");
                    on_stack[w] = false;
                    comp.push(w);
                    if w == v {
                        break;
                    }
                }
                comp.sort_unstable();
                out.push(comp);
            }
        }
    }
    out
}

/// Stationary distribution of a closed class: `π P = π`, `Σ π = 1`.
fn stationary(chain: &InducedChain, nodes: &[usize]) -> Result<Vec<Q>> {
    let k = nodes.len();
    let pos: HashMap<usize, usize> = nodes.iter().enumerate().map(|(i, &n)| (n, i)).collect();
    // Row j of the system: Σ_i π_i (P[i][j] − δ_ij) = 0; the last row is replaced by Σ π = 1.
    let mut a = vec![vec![Q::zero(); k]; k];
    for (i, &n) in nodes.iter().enumerate() {
        for (t, p) in &chain.rows[n] {
            let j = pos[t];
            if j + 1 < k {
                a[j][i] += p;
            }
        }
        if i + 1 < k {
            a[i][i] -= Q::one();
        }
        a[k - 1][i] = Q::one();
    }
    let mut b = vec![Q::zero(); k];
    b[k - 1] = Q::one();
    linalg::solve_vec(a, b)
}

/// Whether the integer colours on the class edges are a coboundary `φ(t) − φ(s)`.
fn potential_exists(arena: &Arena, chain: &InducedChain, nodes: &[usize]) -> bool {
    let mut phi: HashMap<usize, i128> = HashMap::new();
    phi.insert(nodes[0], 0);
    let mut queue = VecDeque::from([nodes[0]]);
    while let Some(n) = queue.pop_front() {
        let s = chain.state(n);
        for step in &chain.steps[n] {
            let c = match arena.colour(s, step.action) {
                Colour::Int(c) => *c as i128,
                _ => return false,
            };
            let want = phi[&n] + c;
            match phi.get(&step.target) {
                Some(&have) if have != want => return false,
                Some(_) => {}
                None => {
                    phi.insert(step.target, want);
                    queue.push_back(step.target);
                }
            }
        }
    }
    true
}

fn colour_stats(arena: &Arena, chain: &InducedChain, nodes: &[usize], pi: &[Q]) -> ColourStats {
    let mut occurrences: Vec<(Q, Colour)> = Vec::new();
    for (&n, weight) in nodes.iter().zip(pi) {
        for (w, c) in chain.node_colours(arena, n) {
            let mass = weight * w;
            match occurrences.iter_mut().find(|(_, d)| d == c) {
                Some((acc, _)) => *acc += mass,
                None => occurrences.push((mass, c.clone())),
            }
        }
    }
    ColourStats { occurrences, potential_exists: potential_exists(arena, chain, nodes) }
}

/// All closed strongly connected components with stationary laws and colour
/// statistics, ordered by their smallest node.
pub fn bottom_sccs(arena: &Arena, chain: &InducedChain) -> Result<Vec<RecurrentClassSummary>> {
    let comps = sccs(chain);
    let mut comp_of = vec![0; chain.len()];
    for (c, comp) in comps.iter().enumerate() {
        for &n in comp {
            comp_of[n] = c;
        }
    }
    let mut out = Vec::new();
    for (c, comp) in comps.iter().enumerate() {
        let closed = comp.iter().all(|&n| chain.rows[n].iter().all(|(t, _)| comp_of[*t] == c));
        if !closed {
            continue;
        }
        let pi = stationary(chain, comp)?;
        let stats = colour_stats(arena, chain, comp, &pi);
        out.push(RecurrentClassSummary { nodes: comp.clone(), stationary: pi, stats });
    }
    assert!(chain.is_empty() || !out.is_empty(), "a finite chain has a bottom component");
    out.sort_by_key(|c| c.nodes[0]);
    Ok(out)
}

/// Absorption probabilities `[node][class]` for every node of the chain.
pub fn absorption_matrix(chain: &InducedChain, classes: &[RecurrentClassSummary]) -> Result<Vec<Vec<Q>>> {
    let n = chain.len();
    let k = classes.len();
    let mut class_of = vec![None; n];
    for (c, class) in classes.iter().enumerate() {
        for &v in &class.nodes {
            class_of[v] = Some(c);
        }
    }
    let transient: Vec<usize> = (0..n).filter(|&v| class_of[v].is_none()).collect();
    let pos: HashMap<usize, usize> = transient.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    // (I − P_TT) X = P_TC.
    let mut a = vec![vec![Q::zero(); transient.len()]; transient.len()];
    let mut b = vec![vec![Q::zero(); k]; transient.len()];
    for (i, &v) in transient.iter().enumerate() {
        a[i][i] += Q::one();
        for (t, p) in &chain.rows[v] {
            match class_of[*t] {
                Some(c) => b[i][c] += p,
                None => a[i][pos[t]] -= p,
            }
        }
    }
    let x = if transient.is_empty() { Vec::new() } else { linalg::solve(a, b)? };
    Ok((0..n)
        .map(|v| match class_of[v] {
            Some(c) => (0..k).map(|d| if d == c { Q::one() } else { Q::zero() }).collect(),
            None => x[pos[&v]].clone(),
        })
        .collect())
}

/// Probability of ending in each class of `bottom_sccs`, from `source`.
pub fn absorption(arena: &Arena, chain: &InducedChain, source: usize) -> Result<Vec<(RecurrentClassSummary, Q)>> {
    let classes = bottom_sccs(arena, chain)?;
    let matrix = absorption_matrix(chain, &classes)?;
    Ok(classes.into_iter().zip(matrix[source].iter().cloned()).collect())
}

/// Discounted value of every node: `v = r + Λ P v` with per-action discounts.
pub fn discounted_node_values(arena: &Arena, chain: &InducedChain) -> Result<Vec<Q>> {
    let n = chain.len();
    let mut a = vec![vec![Q::zero(); n]; n];
    let mut b = vec![Q::zero(); n];
    for v in 0..n {
        a[v][v] += Q::one();
        let s = chain.state(v);
        for (w, c) in chain.node_colours(arena, v) {
            match c {
                Colour::Discounted { reward, .. } => b[v] += w * reward,
                other => {
                    return Err(Error::ColourKind {
                        spec: "discounted".into(),
                        expected: "reward-discount pair".into(),
                        found: other.kind().to_string(),
                    })
                }
            }
        }
        for step in &chain.steps[v] {
            if let Colour::Discounted { discount, .. } = arena.colour(s, step.action) {
                a[v][step.target] -= discount * &step.prob;
            }
        }
    }
    linalg::solve_vec(a, b)
}

/// Discounted values of the full product chain, keyed by node.
pub fn discounted_values(
    arena: &Arena,
    sigma: &FiniteMemoryStrategy,
    tau: &FiniteMemoryStrategy,
) -> Result<BTreeMap<Node, Q>> {
    let chain = induce_chain(arena, sigma, tau)?;
    let values = discounted_node_values(arena, &chain)?;
    Ok(chain.nodes.iter().copied().zip(values).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arena::{Action, State};
    use crate::fixtures;
    use crate::rational::{int, ratio};

    fn p1(name: &str) -> State {
        State { name: name.into(), owner: Player::P1 }
    }

    fn act(name: &str, colour: Colour, succ: Vec<(usize, Q)>) -> Action {
        Action { name: name.into(), colour, successors: succ }
    }

    fn first(arena: &Arena) -> (FiniteMemoryStrategy, FiniteMemoryStrategy) {
        (
            FiniteMemoryStrategy::uniform_first(arena, Player::P1),
            FiniteMemoryStrategy::uniform_first(arena, Player::P2),
        )
    }

    fn two_node_chain() -> Arena {
        // P = [[0, 1], [1/2, 1/2]].
        Arena::new(
            vec![p1("x"), p1("y")],
            vec![
                vec![act("a", Colour::Int(0), vec![(1, int(1))])],
                vec![act("a", Colour::Int(3), vec![(0, ratio(1, 2)), (1, ratio(1, 2))])],
            ],
        )
        .unwrap()
    }

    #[test]
    fn one_state_self_loop() {
        let arena = fixtures::one_state(Colour::Int(3));
        let (s, t) = first(&arena);
        let chain = induce_chain(&arena, &s, &t).unwrap();
        assert_eq!(chain.len(), 1);
        assert_eq!(chain.row(0), &[(0, int(1))]);
        let classes = bottom_sccs(&arena, &chain).unwrap();
        assert_eq!(classes.len(), 1);
        assert_eq!(classes[0].stationary, vec![int(1)]);
    }

    #[test]
    fn e3_copies_the_transition_table() {
        let arena = fixtures::e3();
        let (s, t) = first(&arena);
        let chain = induce_chain(&arena, &s, &t).unwrap();
        assert_eq!(chain.len(), 3);
        let src = chain.index((0, 0, 0)).unwrap();
        let tt = chain.index((1, 0, 0)).unwrap();
        let uu = chain.index((2, 0, 0)).unwrap();
        assert_eq!(chain.prob(src, tt), ratio(1, 2));
        assert_eq!(chain.prob(src, uu), ratio(1, 2));
        let classes = bottom_sccs(&arena, &chain).unwrap();
        assert_eq!(classes.len(), 2);
        assert!(classes.iter().all(|c| c.stationary == vec![int(1)]));
        let abs = absorption(&arena, &chain, src).unwrap();
        assert_eq!(abs.iter().map(|(_, p)| p.clone()).collect::<Vec<_>>(), vec![ratio(1, 2), ratio(1, 2)]);
    }

    #[test]
    fn stationary_of_two_node_class() {
        let arena = two_node_chain();
        let (s, t) = first(&arena);
        let chain = induce_chain(&arena, &s, &t).unwrap();
        let classes = bottom_sccs(&arena, &chain).unwrap();
        assert_eq!(classes.len(), 1);
        assert_eq!(classes[0].stationary, vec![ratio(1, 3), ratio(2, 3)]);
        // πP = π exactly.
        for (j, &nj) in classes[0].nodes.iter().enumerate() {
            let flow: Q = classes[0]
                .nodes
                .iter()
                .enumerate()
                .map(|(i, &ni)| &classes[0].stationary[i] * chain.prob(ni, nj))
                .sum();
            assert_eq!(flow, classes[0].stationary[j]);
        }
        assert_eq!(classes[0].stats.mean_reward(), int(2));
    }

    #[test]
    fn absorption_from_inside_a_class() {
        let arena = fixtures::e3();
        let (s, t) = first(&arena);
        let chain = induce_chain(&arena, &s, &t).unwrap();
        let u = chain.index((2, 0, 0)).unwrap();
        let abs = absorption(&arena, &chain, u).unwrap();
        let (class, p) = abs.iter().find(|(c, _)| c.contains(u)).unwrap();
        assert!(class.contains(u));
        assert_eq!(*p, int(1));
    }

    #[test]
    fn gadget_with_self_loop_splits_evenly() {
        let third = ratio(1, 3);
        let arena = Arena::new(
            vec![p1("s"), p1("t"), p1("u")],
            vec![
                vec![act("a", Colour::Int(0), vec![(0, third.clone()), (1, third.clone()), (2, third)])],
                vec![act("a", Colour::Int(0), vec![(1, int(1))])],
                vec![act("a", Colour::Int(0), vec![(2, int(1))])],
            ],
        )
        .unwrap();
        let (s, t) = first(&arena);
        let chain = induce_chain(&arena, &s, &t).unwrap();
        let abs = absorption(&arena, &chain, 0).unwrap();
        let probs: Vec<Q> = abs.iter().map(|(_, p)| p.clone()).collect();
        assert_eq!(probs, vec![ratio(1, 2), ratio(1, 2)]);
        assert_eq!(probs.iter().cloned().sum::<Q>(), int(1));
    }

    #[test]
    fn discounted_examples() {
        let half = ratio(1, 2);
        let loop_arena = fixtures::one_state(Colour::Discounted { reward: int(1), discount: half.clone() });
        let (s, t) = first(&loop_arena);
        assert_eq!(discounted_values(&loop_arena, &s, &t).unwrap()[&(0, 0, 0)], int(2));

        let zero = fixtures::one_state(Colour::Discounted { reward: int(5), discount: int(0) });
        let (s, t) = first(&zero);
        assert_eq!(discounted_values(&zero, &s, &t).unwrap()[&(0, 0, 0)], int(5));

        let cycle = Arena::new(
            vec![p1("x"), p1("y")],
            vec![
                vec![act("a", Colour::Discounted { reward: int(1), discount: half.clone() }, vec![(1, int(1))])],
                vec![act("a", Colour::Discounted { reward: int(0), discount: half }, vec![(0, int(1))])],
            ],
        )
        .unwrap();
        let (s, t) = first(&cycle);
        let v = discounted_values(&cycle, &s, &t).unwrap();
        assert_eq!(v[&(0, 0, 0)], ratio(4, 3));
        assert_eq!(v[&(1, 0, 0)], ratio(2, 3));
    }

    #[test]
    fn fig1_alternating_product_has_eight_nodes() {
        let arena = fixtures::fig1();
        let sigma = fixtures::fig1_alternating(&arena);
        let tau = FiniteMemoryStrategy::uniform_first(&arena, Player::P2);
        let chain = induce_chain(&arena, &sigma, &tau).unwrap();
        assert_eq!(chain.len(), 8);
        for i in 0..chain.len() {
            assert_eq!(chain.row(i).iter().map(|(_, p)| p.clone()).sum::<Q>(), int(1));
        }
    }

    #[test]
    fn potential_detects_zero_cycles() {
        // x -(+1)-> y -(−1)-> x: increments are φ(y) − φ(x) with φ = (0, 1).
        let arena = Arena::new(
            vec![p1("x"), p1("y")],
            vec![
                vec![act("a", Colour::Int(1), vec![(1, int(1))])],
                vec![act("a", Colour::Int(-1), vec![(0, int(1))])],
            ],
        )
        .unwrap();
        let (s, t) = first(&arena);
        let chain = induce_chain(&arena, &s, &t).unwrap();
        let classes = bottom_sccs(&arena, &chain).unwrap();
        assert!(classes[0].stats.potential_exists);
        // A self-loop with a non-zero increment has no potential.
        let other = two_node_chain();
        let (s, t) = first(&other);
        let classes = bottom_sccs(&other, &induce_chain(&other, &s, &t).unwrap()).unwrap();
        assert!(!classes[0].stats.potential_exists);
    }

    #[test]
    fn randomized_choice_mixes_rows() {
        let arena = fixtures::e2();
        let sigma = FiniteMemoryStrategy::stationary(&arena, Player::P1, |s| {
            if s == 0 {
                vec![(0, ratio(1, 2)), (1, ratio(1, 2))]
            } else {
                vec![(0, Q::one())]
            }
        })
        .unwrap();
        let tau = FiniteMemoryStrategy::uniform_first(&arena, Player::P2);
        let chain = induce_chain(&arena, &sigma, &tau).unwrap();
        let s = chain.index((0, 0, 0)).unwrap();
        assert_eq!(chain.row(s).len(), 2);
        assert_eq!(chain.choices(s).len(), 2);
    }
}
