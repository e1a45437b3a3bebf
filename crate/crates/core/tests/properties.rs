//! Property tests over generated arenas, words and plays.

use halfpos_core::arena::{random_arena, sample_play, ColourRange, LassoPlay, RandomArenaParams};
use halfpos_core::chain::{self, absorption_matrix, bottom_sccs, induce_chain};
use halfpos_core::payoff::{
    check_shift_invariance, check_submixing, class_value, evaluate_lasso, shuffle, Colour, LassoWord, PayoffSpec,
    ShufflePattern,
};
use halfpos_core::rational::{self, int, ratio};
use halfpos_core::solve::{self, DEFAULT_BUDGET};
use halfpos_core::strategy::{
    factor_pattern, lasso_letters, product_values, project_finite, project_lasso, reset_strategy, trigger_strategy,
    weakness_set_from, Projection,
};
use halfpos_core::{verify, Arena, FiniteMemoryStrategy, PartitionAtState, Player, Q};
use num_traits::{One, Zero};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn ints(xs: &[i64]) -> Vec<Colour> {
    xs.iter().map(|&x| Colour::Int(x)).collect()
}

fn small_arena(seed: u64, n: usize) -> Arena {
    let params = RandomArenaParams::new(n, 3, ColourRange::Integers { min: -2, max: 2 }, ratio(1, 2));
    random_arena(&params, seed).0
}

/// Uniformly random P1/P2 behaviour, as a stationary randomized strategy.
fn uniform(arena: &Arena, owner: Player) -> FiniteMemoryStrategy {
    FiniteMemoryStrategy::stationary(arena, owner, |s| {
        let k = arena.num_actions(s) as i64;
        (0..arena.num_actions(s)).map(|a| (a, ratio(1, k))).collect()
    })
    .unwrap()
}

fn random_deterministic(arena: &Arena, owner: Player, memory: usize, rng: &mut ChaCha8Rng) -> FiniteMemoryStrategy {
    let n = arena.num_states();
    let pairs = arena.num_pairs();
    let choice: Vec<Vec<usize>> =
        (0..memory).map(|_| (0..n).map(|s| rng.gen_range(0..arena.num_actions(s))).collect()).collect();
    let update: Vec<usize> = (0..memory * pairs * n).map(|_| rng.gen_range(0..memory)).collect();
    FiniteMemoryStrategy::deterministic(
        arena,
        owner,
        memory,
        0,
        |m, s, a, t| update[(m * pairs + arena.pair_index(s, a)) * n + t],
        |m, s| choice[m][s],
    )
    .unwrap()
}

fn word() -> impl Strategy<Value = (Vec<i64>, Vec<i64>)> {
    (prop::collection::vec(-2i64..=2, 0..4), prop::collection::vec(-2i64..=2, 1..5))
}

// ----- arena -------------------------------------------------------------------------

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn arena_text_round_trip(seed in any::<u64>(), n in 1usize..6) {
        let arena = small_arena(seed, n);
        prop_assert_eq!(Arena::parse(&arena.to_json()).unwrap(), arena);
    }

    #[test]
    fn sampled_plays_are_valid(seed in any::<u64>(), n in 1usize..5, horizon in 0usize..30) {
        let arena = small_arena(seed, n);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let play = sample_play(&arena, &uniform(&arena, Player::P1), &uniform(&arena, Player::P2), 0, horizon, &mut rng);
        prop_assert_eq!(play.len(), horizon);
        prop_assert!(arena.check_play(&play).is_ok());
    }
}

#[test]
fn successor_frequencies_pass_a_chi_square_test() {
    // Fixed seed; 99.9% quantile of chi-square with at most 3 degrees of freedom.
    const THRESHOLD: f64 = 16.27;
    let arena = small_arena(5, 4);
    let sigma = uniform(&arena, Player::P1);
    let tau = uniform(&arena, Player::P2);
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for s in 0..arena.num_states() {
        let n = 20_000;
        let mut counts = vec![0usize; arena.num_states()];
        let mut per_action = vec![0usize; arena.num_actions(s)];
        for _ in 0..n {
            let play = sample_play(&arena, &sigma, &tau, s, 1, &mut rng);
            counts[play.target()] += 1;
            per_action[play.actions[0]] += 1;
        }
        let k = arena.num_actions(s) as f64;
        let chi: f64 = (0..arena.num_states())
            .map(|t| {
                let p: f64 = (0..arena.num_actions(s)).map(|a| rational::to_f64(&arena.action(s, a).prob(t)) / k).sum();
                let expected = p * n as f64;
                if expected == 0.0 {
                    assert_eq!(counts[t], 0);
                    0.0
                } else {
                    (counts[t] as f64 - expected).powi(2) / expected
                }
            })
            .sum();
        assert!(chi < THRESHOLD, "state {s}: chi-square {chi}");
    }
}

// ----- payoffs ------------------------------------------------------------------------

#[test]
fn shift_invariant_specs_have_no_shift_witness() {
    let specs = [PayoffSpec::Mean, PayoffSpec::Parity, PayoffSpec::Limsup, PayoffSpec::Liminf, PayoffSpec::PositiveAverage];
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..10_000 {
        let prefix: Vec<i64> = (0..rng.gen_range(0..4)).map(|_| rng.gen_range(0..=4)).collect();
        let cycle: Vec<i64> = (0..rng.gen_range(1..5)).map(|_| rng.gen_range(0..=4)).collect();
        let w = LassoWord::new(ints(&prefix), ints(&cycle));
        for spec in &specs {
            assert!(check_shift_invariance(spec, &w, prefix.len() + cycle.len()).unwrap().is_none());
        }
    }
}

#[test]
fn submixing_specs_have_no_shuffle_witness() {
    let specs = [PayoffSpec::Mean, PayoffSpec::Parity, PayoffSpec::Limsup, PayoffSpec::Liminf, PayoffSpec::PositiveAverage];
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let draw = |rng: &mut ChaCha8Rng| {
        let prefix: Vec<i64> = (0..rng.gen_range(0..3)).map(|_| rng.gen_range(0..=4)).collect();
        let cycle: Vec<i64> = (0..rng.gen_range(1..5)).map(|_| rng.gen_range(0..=4)).collect();
        LassoWord::new(ints(&prefix), ints(&cycle))
    };
    for _ in 0..10_000 {
        let (u, v) = (draw(&mut rng), draw(&mut rng));
        let pattern = ShufflePattern::alternating(rng.gen_range(1..4), rng.gen_range(1..4));
        for spec in &specs {
            assert!(check_submixing(spec, &u, &v, &pattern).unwrap().is_none());
        }
    }
}

proptest! {
    #[test]
    fn mean_is_rotation_and_pumping_invariant((prefix, cycle) in word(), r in 0usize..5) {
        let w = LassoWord::new(ints(&prefix), ints(&cycle));
        let r = r % cycle.len();
        let rotated = LassoWord::new(ints(&prefix), ints(&[&cycle[r..], &cycle[..r]].concat()));
        let pumped = LassoWord::new(ints(&prefix), ints(&[cycle.clone(), cycle.clone()].concat()));
        let base = evaluate_lasso(&PayoffSpec::Mean, &w).unwrap();
        prop_assert_eq!(evaluate_lasso(&PayoffSpec::Mean, &rotated).unwrap(), base.clone());
        prop_assert_eq!(evaluate_lasso(&PayoffSpec::Mean, &pumped).unwrap(), base);
    }

    #[test]
    fn shuffle_keeps_both_letter_orders((p1, c1) in word(), (p2, c2) in word(), n in 1usize..4, m in 1usize..4) {
        let u = LassoWord::new(p1, c1);
        let v = LassoWord::new(p2, c2);
        let w = shuffle(&u, &v, &ShufflePattern::alternating(n, m)).unwrap();
        let letters = w.unroll(12 * (n + m));
        for (k, block) in letters.chunks(n + m).enumerate() {
            prop_assert_eq!(&block[..n], &u.unroll(n * (k + 1))[n * k..]);
            prop_assert_eq!(&block[n..], &v.unroll(m * (k + 1))[m * k..]);
        }
    }

    #[test]
    fn class_mean_matches_lasso_mean(a in 1i64..6, b in 1i64..6, r0 in -2i64..=2, r1 in -2i64..=2) {
        // Two-state chain with P = [[1 − a/6, a/6], [b/6, 1 − b/6]]; π ∝ (b, a).
        let n = 6;
        let doc = format!(r#"{{
          "states": [ {{ "name": "x", "owner": "P1" }}, {{ "name": "y", "owner": "P1" }} ],
          "actions": [
            {{ "state": "x", "action": "go", "colour": {r0}, "successors": [{{ "state": "x", "prob": "{}/{n}" }}, {{ "state": "y", "prob": "{a}/{n}" }}] }},
            {{ "state": "y", "action": "go", "colour": {r1}, "successors": [{{ "state": "x", "prob": "{b}/{n}" }}, {{ "state": "y", "prob": "{}/{n}" }}] }}
          ]
        }}"#, n - a, n - b);
        let doc = doc.replace("\"0/6\"", "\"0\"");
        let arena = Arena::parse(&doc).unwrap();
        let first = FiniteMemoryStrategy::uniform_first(&arena, Player::P1);
        let chain = induce_chain(&arena, &first, &FiniteMemoryStrategy::uniform_first(&arena, Player::P2)).unwrap();
        let classes = bottom_sccs(&arena, &chain).unwrap();
        prop_assert_eq!(classes.len(), 1);
        let cycle: Vec<i64> = std::iter::repeat(r0).take(b as usize).chain(std::iter::repeat(r1).take(a as usize)).collect();
        let lasso = LassoWord::periodic(ints(&cycle));
        prop_assert_eq!(class_value(&PayoffSpec::Mean, &classes[0]).unwrap(), evaluate_lasso(&PayoffSpec::Mean, &lasso).unwrap());
    }
}

// ----- chains -------------------------------------------------------------------------

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn stationary_and_absorption_are_exact(seed in any::<u64>(), n in 1usize..5) {
        let arena = small_arena(seed, n);
        let chain = induce_chain(&arena, &uniform(&arena, Player::P1), &uniform(&arena, Player::P2)).unwrap();
        let classes = bottom_sccs(&arena, &chain).unwrap();
        for class in &classes {
            let total: Q = class.stationary.iter().sum();
            prop_assert!(total.is_one());
            for (j, &v) in class.nodes.iter().enumerate() {
                let inflow: Q = class.nodes.iter().enumerate().map(|(i, &u)| &class.stationary[i] * chain.prob(u, v)).sum();
                prop_assert_eq!(&inflow, &class.stationary[j]);
            }
        }
        for row in absorption_matrix(&chain, &classes).unwrap() {
            prop_assert!(row.iter().sum::<Q>().is_one());
        }
    }

    #[test]
    fn discounted_values_match_truncated_series(seed in any::<u64>(), n in 1usize..4) {
        let params = RandomArenaParams::new(n, 2, ColourRange::Discounted { min: -2, max: 2, discount: ratio(1, 2) }, ratio(1, 2));
        let arena = random_arena(&params, seed).0;
        let sigma = uniform(&arena, Player::P1);
        let tau = uniform(&arena, Player::P2);
        let chain = induce_chain(&arena, &sigma, &tau).unwrap();
        let exact = chain::discounted_node_values(&arena, &chain).unwrap();
        // Truncated series by iterating v ← r + λ P v from zero, N times.
        let depth = 40;
        let mut v = vec![Q::zero(); chain.len()];
        for _ in 0..depth {
            v = (0..chain.len())
                .map(|i| {
                    chain.steps(i).iter().map(|st| {
                        let Colour::Discounted { reward, discount } = arena.colour(chain.state(i), st.action) else { unreachable!() };
                        &st.prob * (reward + discount * &v[st.target])
                    }).sum()
                })
                .collect();
        }
        // |error| ≤ λ^N · R / (1 − λ) with R = 2, λ = 1/2.
        let bound = 2.0f64 * 0.5f64.powi(depth) / 0.5;
        for (x, y) in exact.iter().zip(&v) {
            prop_assert!((rational::to_f64(x) - rational::to_f64(y)).abs() <= bound + 1e-12);
        }
    }
}

#[test]
fn absorption_frequencies_match_sampling() {
    let arena = small_arena(31, 4);
    let sigma = uniform(&arena, Player::P1);
    let tau = uniform(&arena, Player::P2);
    let chain = chain::induce_chain_initial(&arena, &sigma, &tau).unwrap();
    let classes = bottom_sccs(&arena, &chain).unwrap();
    let absorb = absorption_matrix(&chain, &classes).unwrap();
    let runs = 10_000;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut hits = vec![0usize; classes.len()];
    for _ in 0..runs {
        let play = sample_play(&arena, &sigma, &tau, 0, 200, &mut rng);
        // Stationary strategies: chain nodes are (state, 0, 0).
        let node = chain.index((play.target(), 0, 0)).unwrap();
        if let Some(c) = classes.iter().position(|c| c.contains(node)) {
            hits[c] += 1;
        }
    }
    let source = chain.index((0, 0, 0)).unwrap();
    for (c, &h) in hits.iter().enumerate() {
        let p = rational::to_f64(&absorb[source][c]);
        let sd = (p * (1.0 - p) / runs as f64).sqrt();
        assert!((h as f64 / runs as f64 - p).abs() <= 3.0 * sd + 1e-9, "class {c}: {h} vs {p}");
    }
}

// ----- solver -------------------------------------------------------------------------

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn values_are_certified_and_stable_implies_preserving(seed in any::<u64>(), n in 1usize..5) {
        let arena = small_arena(seed, n);
        for spec in [PayoffSpec::Mean, PayoffSpec::Limsup, PayoffSpec::Liminf] {
            let v = solve::brute_force_value(&arena, &spec, DEFAULT_BUDGET).unwrap();
            let br = solve::best_response_min(&arena, &spec, &v.sigma, DEFAULT_BUDGET).unwrap();
            prop_assert_eq!(&br.values, &v.values);
            let class = solve::classify_actions(&arena, &v.values);
            for e in &class.entries {
                prop_assert!(!e.stable || e.value_preserving);
            }
            let sigma = solve::locally_optimal(&arena, &class, Player::P1).unwrap();
            let tau = solve::locally_optimal(&arena, &class, Player::P2).unwrap();
            let report = solve::martingale_check(
                &arena,
                &v.values,
                &FiniteMemoryStrategy::from_pure(&arena, &sigma),
                &FiniteMemoryStrategy::from_pure(&arena, &tau),
            ).unwrap();
            prop_assert_eq!(report.verdict, solve::MartingaleVerdict::Martingale);
            let product = product_values(&arena, &spec, &FiniteMemoryStrategy::from_pure(&arena, &v.sigma), DEFAULT_BUDGET).unwrap();
            prop_assert_eq!(&product.values[0], &v.values);
        }
    }

    #[test]
    fn removing_actions_is_monotone(seed in any::<u64>(), n in 1usize..5, pick in any::<prop::sample::Index>()) {
        let arena = small_arena(seed, n);
        let s = pick.index(n);
        prop_assume!(arena.num_actions(s) > 1);
        let keep: Vec<usize> = (1..arena.num_actions(s)).collect();
        let smaller = arena.restrict(s, &keep).unwrap();
        let before = solve::brute_force_value(&arena, &PayoffSpec::Mean, DEFAULT_BUDGET).unwrap().values;
        let after = solve::brute_force_value(&smaller, &PayoffSpec::Mean, DEFAULT_BUDGET).unwrap().values;
        for t in 0..n {
            match arena.owner(s) {
                Player::P1 => prop_assert!(after[t] <= before[t]),
                Player::P2 => prop_assert!(after[t] >= before[t]),
            }
        }
    }

    #[test]
    fn reset_clears_reachable_weakness(seed in any::<u64>(), n in 2usize..4, eps_quarters in 1i64..3) {
        let arena = small_arena(seed, n);
        let spec = PayoffSpec::Mean;
        let eps = ratio(eps_quarters, 8);
        let v = solve::brute_force_value(&arena, &spec, DEFAULT_BUDGET).unwrap();
        let base = verify::weakened_strategy(&arena, &v.sigma, seed);
        let product = product_values(&arena, &spec, &base, DEFAULT_BUDGET).unwrap();
        let eps_optimal = (0..n).all(|s| *product.get(0, s) >= &v.values[s] - &eps);
        prop_assume!(eps_optimal);
        let weak = weakness_set_from(&v.values, &product, &eps);
        let hat = reset_strategy(&base, &weak);
        let hat_product = product_values(&arena, &spec, &hat, DEFAULT_BUDGET).unwrap();
        let again = weakness_set_from(&v.values, &hat_product, &eps);
        for (m, s) in hat.reachable_pairs(&arena) {
            prop_assert!(!again.contains(m, s), "({m}, {s}) weak after reset");
        }
    }
}

// ----- projections and the trigger strategy -----------------------------------------

/// Random arena whose state 0 is a P1 state with at least two actions, with a
/// split of those actions.
fn pivot_arena(seed: u64) -> Option<(Arena, PartitionAtState)> {
    let mut doc = small_arena(seed, 3).to_doc();
    doc.states[0].owner = Player::P1;
    let arena = Arena::from_doc(doc).ok()?;
    let k = arena.num_actions(0);
    if k < 2 {
        return None;
    }
    let side0: Vec<usize> = (0..k).filter(|a| a % 2 == 0).collect();
    let side1: Vec<usize> = (0..k).filter(|a| a % 2 == 1).collect();
    let split = PartitionAtState::new(&arena, 0, side0, side1).ok()?;
    Some((arena, split))
}

/// A lasso cut out of a sampled play: the first repeated state closes the cycle.
fn sampled_lasso(arena: &Arena, seed: u64) -> Option<LassoPlay> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let play = sample_play(arena, &uniform(arena, Player::P1), &uniform(arena, Player::P2), 0, 40, &mut rng);
    let (i, j) = (0..play.states.len())
        .flat_map(|j| (0..j).map(move |i| (i, j)))
        .filter(|&(i, j)| play.states[i] == play.states[j] && i + 4 < j)
        .min_by_key(|&(i, j)| (j, i))?;
    let prefix = halfpos_core::FinitePlay { states: play.states[..=i].to_vec(), actions: play.actions[..i].to_vec() };
    let cycle = halfpos_core::FinitePlay { states: play.states[i..=j].to_vec(), actions: play.actions[i..j].to_vec() };
    Some(LassoPlay { prefix, cycle })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn projections_shuffle_back_to_the_play(seed in any::<u64>()) {
        let Some((arena, split)) = pivot_arena(seed) else { return Ok(()) };
        let Some(lasso) = sampled_lasso(&arena, seed) else { return Ok(()) };
        prop_assert!(arena.check_lasso(&lasso).is_ok());
        let p0 = project_lasso(&lasso, &split, 0).unwrap();
        let p1 = project_lasso(&lasso, &split, 1).unwrap();
        match (&p0, &p1) {
            (Projection::Infinite(a), Projection::Infinite(b)) => {
                let pattern = factor_pattern(&lasso, &split).unwrap();
                let w = shuffle(&lasso_letters(a), &lasso_letters(b), &pattern).unwrap();
                prop_assert_eq!(w.unroll(400), lasso_letters(&lasso).unroll(400));
                // Both projections come back to the pivot infinitely often.
                prop_assert!(a.cycle.states.contains(&split.pivot));
                prop_assert!(b.cycle.states.contains(&split.pivot));
            }
            (Projection::Finite(_), Projection::Infinite(other)) | (Projection::Infinite(other), Projection::Finite(_)) => {
                // The cycle stays in the other sub-arena.
                let side = if p0.is_finite() { 1 } else { 0 };
                for (i, &s) in lasso.cycle.states[..lasso.cycle.actions.len()].iter().enumerate() {
                    if s == split.pivot {
                        prop_assert_eq!(split.side_of(lasso.cycle.actions[i]), side);
                    }
                }
                prop_assert!(!other.cycle.actions.is_empty());
            }
            (Projection::Finite(_), Projection::Finite(_)) => prop_assert!(false, "a lasso has an infinite projection"),
        }
    }

    #[test]
    fn trigger_follows_the_projected_history(seed in any::<u64>()) {
        let Some((arena, split)) = pivot_arena(seed) else { return Ok(()) };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let tau0 = random_deterministic(&arena, Player::P2, 2, &mut rng);
        let tau1 = random_deterministic(&arena, Player::P2, 2, &mut rng);
        let trig = trigger_strategy(&arena, &tau0, &tau1, &split).unwrap();
        let play = sample_play(&arena, &uniform(&arena, Player::P1), &trig, 0, 30, &mut rng);
        for k in 0..=play.len() {
            let h = halfpos_core::FinitePlay { states: play.states[..=k].to_vec(), actions: play.actions[..k].to_vec() };
            let s = h.target();
            if arena.owner(s) != Player::P2 {
                continue;
            }
            // Recompute from scratch: side of the last pivot action, then τ_j on π_j(h).
            let j = (0..k).rev().find(|&i| h.states[i] == split.pivot).map_or(0, |i| split.side_of(h.actions[i]));
            let tau = if j == 0 { &tau0 } else { &tau1 };
            let projected = project_finite(&h, &split, j).unwrap();
            let expected = tau.choice(tau.memory_after(&projected), s);
            prop_assert_eq!(trig.choice(trig.memory_after(&h), s), expected);
        }
    }
}

#[test]
fn refuted_reports_replay() {
    let bounds = verify::WordBounds::default();
    let r = verify::search_submixing_violation(&PayoffSpec::GeneralizedMean(2), &bounds, 1).unwrap();
    assert_eq!(r.replay(), Some(true));
    let r = verify::search_shift_violation(&PayoffSpec::GeometricFirstOne, &bounds, 1).unwrap();
    assert_eq!(r.replay(), Some(true));
    let r = verify::search_shift_violation(&PayoffSpec::Discounted, &bounds, 1).unwrap();
    assert_eq!(r.verdict, verify::Verdict::Refuted);
    assert_eq!(r.replay(), Some(true));
    assert!(int(1) > Q::zero());
}

