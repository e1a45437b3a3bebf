//! Worked examples checked through the public API.

use halfpos_core::arena::{random_arena, sample_play, ColourRange, RandomArenaParams};
use halfpos_core::rational::{int, ratio};
use halfpos_core::solve::{self, DEFAULT_BUDGET};
use halfpos_core::strategy::{self, product_values, reset_strategy, trigger_strategy, weakness_set, WeaknessSet};
use halfpos_core::{chain, fixtures, verify, Arena, FiniteMemoryStrategy, PartitionAtState, PayoffSpec, Player, Q};
use num_traits::Zero;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn optimal(arena: &Arena, spec: &PayoffSpec) -> (Vec<Q>, FiniteMemoryStrategy) {
    let v = solve::brute_force_value(arena, spec, DEFAULT_BUDGET).unwrap();
    let sigma = FiniteMemoryStrategy::from_pure(arena, &v.sigma);
    (v.values, sigma)
}

#[test]
fn e3_sampling_reaches_u_half_the_time() {
    let arena = fixtures::e3();
    let (s, t) = (
        FiniteMemoryStrategy::uniform_first(&arena, Player::P1),
        FiniteMemoryStrategy::uniform_first(&arena, Player::P2),
    );
    let u = arena.state_index("u").unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let n = 100_000;
    let hits = (0..n).filter(|_| sample_play(&arena, &s, &t, 0, 1, &mut rng).target() == u).count();
    let freq = hits as f64 / n as f64;
    assert!((0.495..=0.505).contains(&freq), "{freq}");
}

#[test]
fn product_values_of_an_optimal_strategy_are_the_values() {
    let arena = fixtures::e2();
    let (values, sigma) = optimal(&arena, &PayoffSpec::Mean);
    let product = product_values(&arena, &PayoffSpec::Mean, &sigma, DEFAULT_BUDGET).unwrap();
    assert_eq!(product.values, vec![values]);
}

#[test]
fn crafted_memory_loses_at_the_stay_memory() {
    let arena = fixtures::e2();
    let sigma = fixtures::e2_crafted_sigma(&arena);
    let product = product_values(&arena, &PayoffSpec::Mean, &sigma, DEFAULT_BUDGET).unwrap();
    assert_eq!(*product.get(0, 0), int(1));
    assert_eq!(*product.get(1, 0), int(0));
}

#[test]
fn weakness_thresholds() {
    let arena = fixtures::e2();
    let (_, opt) = optimal(&arena, &PayoffSpec::Mean);
    assert!(weakness_set(&arena, &PayoffSpec::Mean, &opt, &ratio(1, 8), DEFAULT_BUDGET).unwrap().is_empty());
    let crafted = fixtures::e2_crafted_sigma(&arena);
    let weak = weakness_set(&arena, &PayoffSpec::Mean, &crafted, &ratio(1, 4), DEFAULT_BUDGET).unwrap();
    assert_eq!(weak.pairs.into_iter().collect::<Vec<_>>(), vec![(1, 0)]);
    assert!(weakness_set(&arena, &PayoffSpec::Mean, &crafted, &int(1), DEFAULT_BUDGET).unwrap().is_empty());
}

#[test]
fn reset_never_plays_from_a_weak_pair() {
    let arena = fixtures::weak_memory();
    let sigma = fixtures::weak_memory_sigma(&arena);
    let eps = ratio(1, 4);
    let weak = weakness_set(&arena, &PayoffSpec::Mean, &sigma, &eps, DEFAULT_BUDGET).unwrap();
    assert!(weak.contains(1, 0));
    let hat = reset_strategy(&sigma, &weak);
    let reachable = hat.reachable_pairs(&arena);
    assert!(reachable.iter().all(|&(m, s)| !weak.contains(m, s)));
    let product = product_values(&arena, &PayoffSpec::Mean, &hat, DEFAULT_BUDGET).unwrap();
    let (values, _) = optimal(&arena, &PayoffSpec::Mean);
    for (m, s) in reachable {
        assert!(*product.get(m, s) >= &values[s] - ratio(1, 2));
    }
}

#[test]
fn reset_at_a_weak_initial_pair_stays_total() {
    let arena = fixtures::e2();
    let sigma = fixtures::e2_crafted_sigma(&arena);
    let mut weak = WeaknessSet::empty(int(0));
    weak.pairs.insert((0, 0));
    let hat = reset_strategy(&sigma, &weak);
    assert_eq!(hat.memory_states(), 2);
    assert_eq!(hat.next_memory(0, 0, 0, 0), 0);
    chain::induce_chain(&arena, &hat, &FiniteMemoryStrategy::uniform_first(&arena, Player::P2)).unwrap();
}

#[test]
fn optimal_sigma_is_trivially_subgame_perfect() {
    let arena = fixtures::weak_memory();
    let (_, sigma) = optimal(&arena, &PayoffSpec::Mean);
    let r = verify::verify_subgame_perfect(&arena, &PayoffSpec::Mean, &sigma, &ratio(1, 8), DEFAULT_BUDGET).unwrap();
    assert_eq!(r.verdict, verify::Verdict::Confirmed);
    assert_eq!(r.quantities["base_passes"], true);
}

#[test]
fn suboptimal_base_at_zero_epsilon_is_reported_honestly() {
    let arena = fixtures::e2();
    let stay = FiniteMemoryStrategy::stationary(&arena, Player::P1, |_| vec![(0, int(1))]).unwrap();
    let r = verify::verify_subgame_perfect(&arena, &PayoffSpec::Mean, &stay, &Q::zero(), DEFAULT_BUDGET).unwrap();
    assert_eq!(r.quantities["base_epsilon_optimal"], false);
    assert_eq!(r.verdict, verify::Verdict::Refuted);
    assert!(!r.notes.is_empty());
}

/// Random deterministic P2 strategy with `memory` states.
fn random_p2(arena: &Arena, memory: usize, rng: &mut ChaCha8Rng) -> FiniteMemoryStrategy {
    let n = arena.num_states();
    let choice: Vec<Vec<usize>> =
        (0..memory).map(|_| (0..n).map(|s| rng.gen_range(0..arena.num_actions(s))).collect()).collect();
    let update: Vec<usize> = (0..memory * arena.num_pairs() * n).map(|_| rng.gen_range(0..memory)).collect();
    let pairs = arena.num_pairs();
    FiniteMemoryStrategy::deterministic(
        arena,
        Player::P2,
        memory,
        0,
        |m, s, a, t| update[(m * pairs + arena.pair_index(s, a)) * n + t],
        |m, s| choice[m][s],
    )
    .unwrap()
}

#[test]
fn memory_does_not_help_the_minimizer() {
    let spec = PayoffSpec::Mean;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for i in 0..100 {
        let params = RandomArenaParams::new(4, 3, ColourRange::Integers { min: -2, max: 2 }, ratio(1, 2));
        let (arena, _) = random_arena(&params, 1000 + i);
        let v = solve::brute_force_value(&arena, &spec, DEFAULT_BUDGET).unwrap();
        let br = solve::best_response_min(&arena, &spec, &v.sigma, DEFAULT_BUDGET).unwrap();
        let sigma = FiniteMemoryStrategy::from_pure(&arena, &v.sigma);
        for _ in 0..5 {
            let tau = random_p2(&arena, 2, &mut rng);
            let got = solve::pair_values(&arena, &spec, &sigma, &tau).unwrap();
            for s in 0..arena.num_states() {
                assert!(got[s] >= br.values[s], "arena {i} state {s}");
            }
        }
    }
}

#[test]
fn trigger_switches_on_the_flag() {
    // P1 pivot `p` with actions to the P2 state `q`; q's actions return to p.
    let text = r#"{
      "states": [ { "name": "p", "owner": "P1" }, { "name": "q", "owner": "P2" } ],
      "actions": [
        { "state": "p", "action": "left", "colour": 0, "successors": [{ "state": "q", "prob": "1" }] },
        { "state": "p", "action": "right", "colour": 1, "successors": [{ "state": "q", "prob": "1" }] },
        { "state": "q", "action": "x", "colour": 0, "successors": [{ "state": "p", "prob": "1" }] },
        { "state": "q", "action": "y", "colour": 2, "successors": [{ "state": "p", "prob": "1" }] }
      ]
    }"#;
    let arena = Arena::parse(text).unwrap();
    let split = PartitionAtState::new(&arena, 0, vec![0], vec![1]).unwrap();
    let tau0 = FiniteMemoryStrategy::stationary(&arena, Player::P2, |s| if s == 1 { vec![(0, int(1))] } else { vec![] }).unwrap();
    let tau1 = FiniteMemoryStrategy::stationary(&arena, Player::P2, |s| if s == 1 { vec![(1, int(1))] } else { vec![] }).unwrap();
    let trig = trigger_strategy(&arena, &tau0, &tau1, &split).unwrap();
    assert_eq!(trig.memory_states(), 2);
    // Each flag value behaves like its component on the induced chain.
    let left = FiniteMemoryStrategy::stationary(&arena, Player::P1, |s| if s == 0 { vec![(0, int(1))] } else { vec![] }).unwrap();
    let right = FiniteMemoryStrategy::stationary(&arena, Player::P1, |s| if s == 0 { vec![(1, int(1))] } else { vec![] }).unwrap();
    for (sigma, tau) in [(&left, &tau0), (&right, &tau1)] {
        let a = solve::pair_values(&arena, &PayoffSpec::Mean, sigma, &trig).unwrap();
        let b = solve::pair_values(&arena, &PayoffSpec::Mean, sigma, tau).unwrap();
        assert_eq!(a[0], b[0]);
    }
    assert_eq!(trig.choice(1, 1), tau1.choice(0, 1));
    assert_eq!(trig.choice(0, 1), tau0.choice(0, 1));
}

#[test]
fn trigger_with_equal_components_behaves_like_them() {
    let arena = fixtures::detour();
    let split = PartitionAtState::new(&arena, 0, vec![0], vec![1]).unwrap();
    let tau = FiniteMemoryStrategy::uniform_first(&arena, Player::P2);
    let trig = trigger_strategy(&arena, &tau, &tau, &split).unwrap();
    let sigma = FiniteMemoryStrategy::uniform_first(&arena, Player::P1);
    assert_eq!(
        solve::pair_values(&arena, &PayoffSpec::Mean, &sigma, &trig).unwrap(),
        solve::pair_values(&arena, &PayoffSpec::Mean, &sigma, &tau).unwrap()
    );
}

#[test]
fn parity_saddle_points_on_random_arenas() {
    for i in 0..200 {
        let arena = verify::corpus_arena(&PayoffSpec::Parity, 11, i);
        let v = solve::brute_force_value(&arena, &PayoffSpec::Parity, DEFAULT_BUDGET).unwrap();
        assert!(v.check(&arena).unwrap());
    }
}

#[test]
fn locally_optimal_is_not_optimal_on_e2() {
    let arena = fixtures::e2();
    let (values, _) = optimal(&arena, &PayoffSpec::Mean);
    let class = solve::classify_actions(&arena, &values);
    assert!(class.is_value_preserving(0, 0) && class.is_stable(0, 0));
    let stay = strategy::PureStationaryStrategy::new(&arena, Player::P1, vec![Some(0), Some(0)]).unwrap();
    let br = solve::best_response_min(&arena, &PayoffSpec::Mean, &stay, DEFAULT_BUDGET).unwrap();
    assert_eq!(br.values[0], int(0));
}
