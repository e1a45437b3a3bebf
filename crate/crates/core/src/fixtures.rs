//! Golden arenas shipped with the repository, plus small hand-built gadgets.

use num_traits::One;

use crate::arena::{Action, Arena, Player, State};
use crate::payoff::Colour;
use crate::rational::Q;
use crate::strategy::FiniteMemoryStrategy;

/// The four-state counter-example: P2 owns `s`, P1 owns the three letter states.
pub const FIG1_GAME: &str = include_str!("../../../fixtures/fig1.game");
/// `s` chooses between a reward-0 loop and a move to an absorbing reward-1 state.
pub const E2_GAME: &str = include_str!("../../../fixtures/e2.game");
/// `s` moves to `t` or `u` with probability 1/2 each; both are absorbing.
pub const E3_GAME: &str = include_str!("../../../fixtures/e3.game");
/// E2 with an extra risky action `try` (3/4 to the goal, 1/4 back to `s`).
pub const WEAK_MEMORY_GAME: &str = include_str!("../../../fixtures/weak_memory.game");
/// Two-memory strategy on [`WEAK_MEMORY_GAME`] that gives up after one failed try.
pub const WEAK_MEMORY_STRATEGY: &str = include_str!("../../../fixtures/weak_memory.strategy");
/// Counter increments ±1 chosen alternately by the two players.
pub const ONE_COUNTER_GAME: &str = include_str!("../../../fixtures/one_counter.game");

pub fn fig1() -> Arena {
    Arena::parse(FIG1_GAME).expect("golden file")
}

pub fn e2() -> Arena {
    Arena::parse(E2_GAME).expect("golden file")
}

pub fn e3() -> Arena {
    Arena::parse(E3_GAME).expect("golden file")
}

/// E3 with the colours of `t` and `u` replaced (the colour at `s` is 0).
pub fn e3_with(t: i64, u: i64) -> Arena {
    let mut doc = e3().to_doc();
    doc.actions[1].colour = Colour::Int(t);
    doc.actions[2].colour = Colour::Int(u);
    Arena::from_doc(doc).expect("valid")
}

pub fn weak_memory() -> Arena {
    Arena::parse(WEAK_MEMORY_GAME).expect("golden file")
}

pub fn weak_memory_sigma(arena: &Arena) -> FiniteMemoryStrategy {
    FiniteMemoryStrategy::parse(arena, Player::P1, WEAK_MEMORY_STRATEGY).expect("golden file")
}

pub fn one_counter() -> Arena {
    Arena::parse(ONE_COUNTER_GAME).expect("golden file")
}

/// Two-memory strategy on E2: `go` in memory 0, `stay` in memory 1. Memory
/// never changes, so memory 1 is only entered by starting there.
pub fn e2_crafted_sigma(arena: &Arena) -> FiniteMemoryStrategy {
    let go = arena.action_index(0, "go").expect("e2");
    let stay = arena.action_index(0, "stay").expect("e2");
    FiniteMemoryStrategy::deterministic(arena, Player::P1, 2, 0, |m, _, _, _| m, |m, s| {
        if s != 0 {
            0
        } else if m == 0 {
            go
        } else {
            stay
        }
    })
    .expect("valid")
}

/// A single P1 state with one self-loop of the given colour.
pub fn one_state(colour: Colour) -> Arena {
    Arena::new(
        vec![State { name: "s".into(), owner: Player::P1 }],
        vec![vec![Action { name: "a".into(), colour, successors: vec![(0, Q::one())] }]],
    )
    .expect("valid")
}

/// A single P1 state with two self-loops `a` (colour 0) and `b` (colour 1).
pub fn two_loops() -> Arena {
    Arena::new(
        vec![State { name: "s".into(), owner: Player::P1 }],
        vec![vec![
            Action { name: "a".into(), colour: Colour::Int(0), successors: vec![(0, Q::one())] },
            Action { name: "b".into(), colour: Colour::Int(1), successors: vec![(0, Q::one())] },
        ]],
    )
    .expect("valid")
}

/// P1 state `s` with actions `a`, `b` to the P2 state `t`, which returns with
/// `c` (colour 0) or `d` (colour 2).
pub fn detour() -> Arena {
    let one = || vec![(0usize, Q::one())];
    let to_t = || vec![(1usize, Q::one())];
    Arena::new(
        vec![
            State { name: "s".into(), owner: Player::P1 },
            State { name: "t".into(), owner: Player::P2 },
        ],
        vec![
            vec![
                Action { name: "a".into(), colour: Colour::Int(1), successors: to_t() },
                Action { name: "b".into(), colour: Colour::Int(0), successors: to_t() },
            ],
            vec![
                Action { name: "c".into(), colour: Colour::Int(0), successors: one() },
                Action { name: "d".into(), colour: Colour::Int(2), successors: one() },
            ],
        ],
    )
    .expect("valid")
}

fn fig1_state(arena: &Arena, name: &str) -> usize {
    arena.state_index(name).expect("fig1 state")
}

/// P1 on the suffix-target game: at `c1` play action `1` in memory 0 and `2` in memory 1;
/// every visit to `c1` flips the memory and the letter `a` resets it to 0.
pub fn fig1_alternating(arena: &Arena) -> FiniteMemoryStrategy {
    let c1 = fig1_state(arena, "c1");
    let c3 = fig1_state(arena, "c3");
    FiniteMemoryStrategy::deterministic(
        arena,
        Player::P1,
        2,
        0,
        move |m, s, _, _| {
            if s == c1 {
                1 - m
            } else if s == c3 {
                0
            } else {
                m
            }
        },
        move |m, s| if s == c1 { m } else { 0 },
    )
    .expect("valid")
}

/// Like [`fig1_alternating`] but the memory is never reset.
pub fn fig1_toggle(arena: &Arena) -> FiniteMemoryStrategy {
    let c1 = fig1_state(arena, "c1");
    FiniteMemoryStrategy::deterministic(
        arena,
        Player::P1,
        2,
        0,
        move |m, s, _, _| if s == c1 { 1 - m } else { m },
        move |m, s| if s == c1 { m } else { 0 },
    )
    .expect("valid")
}

/// P1 on the suffix-target game: the first `c1` visit after an `a` plays `1`, later ones play `2`.
pub fn fig1_first_short(arena: &Arena) -> FiniteMemoryStrategy {
    let c1 = fig1_state(arena, "c1");
    let c3 = fig1_state(arena, "c3");
    FiniteMemoryStrategy::deterministic(
        arena,
        Player::P1,
        2,
        0,
        move |m, s, _, _| {
            if s == c1 {
                1
            } else if s == c3 {
                0
            } else {
                m
            }
        },
        move |m, s| if s == c1 { m } else { 0 },
    )
    .expect("valid")
}

/// P1 on the suffix-target game playing action `a` (index) at `c1` forever.
pub fn fig1_stationary(arena: &Arena, action: usize) -> FiniteMemoryStrategy {
    let c1 = fig1_state(arena, "c1");
    FiniteMemoryStrategy::deterministic(arena, Player::P1, 1, 0, |_, _, _, _| 0, move |_, s| {
        if s == c1 {
            action
        } else {
            0
        }
    })
    .expect("valid")
}
