//! `halfpos`: command-line front end for the solver and the property harness.
//!
//! Exit codes: 0 confirmed or success, 2 refuted, 3 inconclusive, 1 usage or
//! validation error.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use halfpos_core::arena::{random_arena, RandomArenaParams};
use halfpos_core::rational::{self, Q};
use halfpos_core::solve::{self, StoppingRule};
use halfpos_core::verify::{self, HalfposOptions, VerificationReport, WordBounds};
use halfpos_core::{Arena, Error, FiniteMemoryStrategy, PayoffSpec, Player};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

/// Default seed: runs are reproducible unless a seed is given.
const DEFAULT_SEED: u64 = 0;

#[derive(Parser, Debug)]
#[command(name = "halfpos", version, about = "Exact analysis of finite stochastic games and their payoffs")]
struct Cli {
    /// Output format; `structured` prints the JSON report document.
    #[arg(long, value_enum, default_value_t = Format::Human, global = true)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Human,
    Structured,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Values and optimal pure stationary strategies by exhaustive enumeration.
    Solve(GamePayoff),
    /// P2's best response to a P1 strategy.
    BestResponse {
        #[command(flatten)]
        game: GamePayoff,
        /// P1 strategy file (a `state: action` map or a memory document).
        #[arg(long)]
        sigma: PathBuf,
    },
    /// Value-preserving and stable actions.
    Classify(GamePayoff),
    /// Exact one-step martingale check of `val` under a strategy pair.
    Martingale {
        #[command(flatten)]
        game: GamePayoff,
        /// P1 strategy file, or `local` for the first value-preserving actions.
        #[arg(long)]
        sigma: String,
        /// P2 strategy file, or `local`.
        #[arg(long)]
        tau: String,
    },
    /// Samples plays under a strategy pair.
    Simulate {
        game: PathBuf,
        /// P1 strategy file, or `first` for the first action everywhere.
        #[arg(long)]
        sigma: String,
        /// P2 strategy file, or `first`.
        #[arg(long)]
        tau: String,
        #[arg(long, default_value_t = 20)]
        horizon: usize,
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        /// Source state (defaults to the first state).
        #[arg(long)]
        source: Option<String>,
        /// Also report the exact expected payoff.
        #[arg(long)]
        payoff: Option<PayoffSpec>,
    },
    /// Searches for a counter-example to a payoff property.
    Check {
        #[arg(value_enum)]
        property: Property,
        #[arg(long)]
        payoff: PayoffSpec,
        /// Longest cycle of the exhaustive part.
        #[arg(long, default_value_t = 4)]
        max_cycle: usize,
        #[arg(long, default_value_t = 1000)]
        random_cases: usize,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
    },
    /// Theorem checks on a game.
    #[command(subcommand)]
    Verify(VerifyCommand),
    /// Reproduces a known counter-example.
    Reproduce {
        #[arg(value_enum)]
        which: Example,
    },
    /// Martingale and optional-stopping suite.
    Doob {
        #[command(flatten)]
        game: GamePayoff,
        #[arg(long, default_value_t = 10_000)]
        trials: usize,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
    },
}

#[derive(Subcommand, Debug)]
enum VerifyCommand {
    /// Optimality of pure stationary strategies for P1.
    Halfpos {
        /// Game file, or `random:states=3,actions=3,seed=7,density=1/2`.
        game: String,
        #[arg(long)]
        payoff: PayoffSpec,
        /// Enumeration budget.
        #[arg(long, default_value_t = solve::DEFAULT_BUDGET)]
        budget: u128,
        /// Memory bound of the swept finite-memory strategies.
        #[arg(long, default_value_t = 2)]
        memory: usize,
        /// Strategies sampled when the family is too large to sweep.
        #[arg(long, default_value_t = 64)]
        samples: usize,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
    },
    /// Subgame perfection of the reset strategy built from a base strategy.
    Subgame {
        #[command(flatten)]
        game: GamePayoff,
        #[arg(long)]
        sigma: PathBuf,
        #[arg(long, value_parser = parse_q)]
        epsilon: Q,
    },
}

#[derive(Args, Debug)]
struct GamePayoff {
    game: PathBuf,
    #[arg(long)]
    payoff: PayoffSpec,
    #[arg(long, default_value_t = solve::DEFAULT_BUDGET)]
    budget: u128,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Property {
    Submixing,
    ShiftInvariance,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Example {
    Fig1,
}

fn parse_q(s: &str) -> Result<Q, String> {
    rational::parse(s).map_err(|e| e.to_string())
}

fn read_game(path: &Path) -> anyhow::Result<Arena> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    Arena::parse(&text).with_context(|| format!("{}", path.display()))
}

/// `random:key=value,...` with keys `states`, `actions`, `seed`, `density`.
fn random_game(spec: &str, payoff: &PayoffSpec) -> anyhow::Result<(Arena, Vec<String>)> {
    let mut states = 3;
    let mut actions = 3;
    let mut seed = DEFAULT_SEED;
    let mut density = rational::ratio(1, 2);
    for part in spec.split(',').filter(|p| !p.is_empty()) {
        let (key, value) = part.split_once('=').ok_or_else(|| anyhow!("expected key=value in {part:?}"))?;
        match key {
            "states" => states = value.parse()?,
            "actions" => actions = value.parse()?,
            "seed" => seed = value.parse()?,
            "density" => density = rational::parse(value)?,
            _ => bail!("unknown random arena parameter {key:?} (states, actions, seed, density)"),
        }
    }
    let params = RandomArenaParams::new(states, actions, verify::colour_range_for(payoff), density);
    Ok(random_arena(&params, seed))
}

fn read_strategy(arena: &Arena, owner: Player, path: &Path) -> anyhow::Result<FiniteMemoryStrategy> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    FiniteMemoryStrategy::parse(arena, owner, &text).with_context(|| format!("{}", path.display()))
}

/// A strategy file or one of the keywords `first` / `local`.
fn strategy_arg(
    arena: &Arena,
    owner: Player,
    arg: &str,
    values: Option<&[Q]>,
) -> anyhow::Result<FiniteMemoryStrategy> {
    match arg {
        "first" => Ok(FiniteMemoryStrategy::uniform_first(arena, owner)),
        "local" => {
            let values = values.ok_or_else(|| anyhow!("`local` needs --payoff"))?;
            let class = solve::classify_actions(arena, values);
            let pure = solve::locally_optimal(arena, &class, owner)
                .ok_or_else(|| anyhow!("some state has no value-preserving action"))?;
            Ok(FiniteMemoryStrategy::from_pure(arena, &pure))
        }
        path => read_strategy(arena, owner, Path::new(path)),
    }
}

fn state_arg(arena: &Arena, name: Option<&str>) -> anyhow::Result<usize> {
    match name {
        None => Ok(0),
        Some(n) => arena.state_index(n).ok_or_else(|| anyhow!("unknown state {n:?}")),
    }
}

fn values_map(arena: &Arena, values: &[Q]) -> BTreeMap<String, String> {
    (0..arena.num_states()).map(|s| (arena.name(s).to_string(), rational::format(&values[s]))).collect()
}

/// Output of one command: a structured document, its human rendering and the
/// exit code.
struct Output {
    doc: Value,
    human: String,
    code: u8,
}

impl Output {
    fn success(doc: Value, human: String) -> Self {
        Output { doc, human, code: 0 }
    }

    fn report(report: VerificationReport) -> Self {
        Output {
            doc: serde_json::to_value(&report).expect("reports serialize"),
            human: report.render_human(),
            code: report.verdict.exit_code() as u8,
        }
    }
}

fn solve_cmd(g: &GamePayoff) -> anyhow::Result<Output> {
    let arena = read_game(&g.game)?;
    let v = solve::brute_force_value(&arena, &g.payoff, g.budget)?;
    let doc = v.to_doc(&arena);
    let mut human = format!("payoff: {}\nfingerprint: {}\n", doc.payoff, doc.fingerprint);
    for s in 0..arena.num_states() {
        let action = v.sigma.action(s).map(|a| arena.action(s, a).name.clone()).unwrap_or_else(|| "-".into());
        human.push_str(&format!(
            "{:<12} value {:<10} sigma* {}\n",
            arena.name(s),
            rational::format(&v.values[s]),
            action
        ));
    }
    human.push_str(&format!("grid: {} x {} pure stationary strategies\n", doc.grid[0], doc.grid[1]));
    Ok(Output::success(serde_json::to_value(&doc)?, human))
}

fn best_response_cmd(g: &GamePayoff, sigma: &Path) -> anyhow::Result<Output> {
    let arena = read_game(&g.game)?;
    let sigma = read_strategy(&arena, Player::P1, sigma)?;
    let values = solve::min_response_on_product(&arena, &g.payoff, &sigma, g.budget)?;
    let m0 = sigma.initial();
    let mut human = format!("payoff: {}\nguaranteed value against a best response (memory {m0}):\n", g.payoff);
    for s in 0..arena.num_states() {
        human.push_str(&format!("{:<12} {}\n", arena.name(s), rational::format(&values[m0][s])));
    }
    let mut doc = json!({
        "payoff": g.payoff.to_string(),
        "fingerprint": arena.fingerprint(),
        "values": values_map(&arena, &values[m0]),
        "by_memory": values.iter().map(|row| values_map(&arena, row)).collect::<Vec<_>>(),
    });
    if sigma.memory_states() == 1 && g.payoff.is_both_positional() && solve::is_pure(&sigma, &arena) {
        let actions = (0..arena.num_states())
            .map(|s| (arena.owner(s) == Player::P1).then(|| sigma.support(0, s).next().expect("total")))
            .collect();
        let pure = halfpos_core::PureStationaryStrategy::new(&arena, Player::P1, actions)?;
        let br = solve::best_response_min(&arena, &g.payoff, &pure, g.budget)?;
        if let Some(tau) = &br.uniform {
            let map = tau.to_map(&arena);
            human.push_str(&format!("best response: {}\n", serde_json::to_string(&map)?));
            doc["tau"] = serde_json::to_value(map)?;
        }
    }
    Ok(Output::success(doc, human))
}

fn classify_cmd(g: &GamePayoff) -> anyhow::Result<Output> {
    let arena = read_game(&g.game)?;
    let v = solve::brute_force_value(&arena, &g.payoff, g.budget)?;
    let class = solve::classify_actions(&arena, &v.values);
    let mut human = format!("{:<12} {:<12} {:<10} {:<10} {:<10} {}\n", "state", "action", "value", "expected", "preserving", "stable");
    let mut rows = Vec::new();
    for e in &class.entries {
        let (s, a) = (e.state, e.action);
        human.push_str(&format!(
            "{:<12} {:<12} {:<10} {:<10} {:<10} {}\n",
            arena.name(s),
            arena.action(s, a).name,
            rational::format(&v.values[s]),
            rational::format(&e.expected),
            e.value_preserving,
            e.stable
        ));
        rows.push(json!({
            "state": arena.name(s),
            "action": arena.action(s, a).name,
            "value": rational::format(&v.values[s]),
            "expected": rational::format(&e.expected),
            "value_preserving": e.value_preserving,
            "stable": e.stable,
        }));
    }
    let doc = json!({ "payoff": g.payoff.to_string(), "fingerprint": arena.fingerprint(), "actions": rows });
    Ok(Output::success(doc, human))
}

fn martingale_cmd(g: &GamePayoff, sigma: &str, tau: &str) -> anyhow::Result<Output> {
    let arena = read_game(&g.game)?;
    let values = solve::brute_force_value(&arena, &g.payoff, g.budget)?.values;
    let sigma = strategy_arg(&arena, Player::P1, sigma, Some(&values))?;
    let tau = strategy_arg(&arena, Player::P2, tau, Some(&values))?;
    let report = solve::martingale_check(&arena, &values, &sigma, &tau)?;
    let human = format!(
        "verdict: {}\nnodes: {}\nequalities: {}\nstrict increases: {}\nviolations: {}\n",
        serde_json::to_value(&report.verdict)?.as_str().unwrap_or("?"),
        report.nodes,
        report.equal,
        report.strict.len(),
        report.violations.len()
    );
    let code = if report.violations.is_empty() { 0 } else { 2 };
    let mut doc = serde_json::to_value(&report)?;
    doc["values"] = serde_json::to_value(values_map(&arena, &values))?;
    Ok(Output { doc, human, code })
}

#[allow(clippy::too_many_arguments)]
fn simulate_cmd(
    game: &Path,
    sigma: &str,
    tau: &str,
    horizon: usize,
    trials: usize,
    seed: u64,
    source: Option<&str>,
    payoff: Option<&PayoffSpec>,
) -> anyhow::Result<Output> {
    if trials == 0 {
        bail!("--trials must be positive");
    }
    let arena = read_game(game)?;
    let values = match payoff {
        Some(p) if p.is_both_positional() => Some(solve::brute_force_value(&arena, p, solve::DEFAULT_BUDGET)?.values),
        _ => None,
    };
    let sigma = strategy_arg(&arena, Player::P1, sigma, values.as_deref())?;
    let tau = strategy_arg(&arena, Player::P2, tau, values.as_deref())?;
    let source = state_arg(&arena, source)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut final_counts = vec![0usize; arena.num_states()];
    let mut example = None;
    for _ in 0..trials {
        let play = halfpos_core::arena::sample_play(&arena, &sigma, &tau, source, horizon, &mut rng);
        final_counts[play.target()] += 1;
        example.get_or_insert_with(|| arena.display_play(&play));
    }
    let example = example.expect("at least one trial");
    let freq: BTreeMap<String, String> = (0..arena.num_states())
        .map(|s| (arena.name(s).to_string(), rational::format(&rational::ratio(final_counts[s] as i64, trials as i64))))
        .collect();
    let mut human = format!("seed: {seed}\nsource: {}\ntrials: {trials}, horizon {horizon}\nfirst play: {example}\n", arena.name(source));
    human.push_str("state frequency at the horizon:\n");
    for (name, f) in &freq {
        human.push_str(&format!("  {name:<12} {f}\n"));
    }
    let mut doc = json!({
        "seed": seed,
        "source": arena.name(source),
        "trials": trials,
        "horizon": horizon,
        "first_play": example,
        "final_state_frequency": freq,
    });
    if let Some(p) = payoff {
        let exact = solve::expected_payoff(&arena, p, &sigma, &tau, source)?;
        human.push_str(&format!("exact expected {p} payoff: {}\n", rational::format(&exact)));
        doc["payoff"] = json!(p.to_string());
        doc["expected_payoff"] = json!(rational::format(&exact));
        if let Some(values) = &values {
            let est = solve::stopped_value_mc(&arena, values, &sigma, &tau, source, &StoppingRule::Horizon(horizon), trials, seed)?;
            human.push_str(&format!(
                "E[val(S_horizon)] ~ {:.4} +/- {:.4} (val(source) = {})\n",
                est.mean_f64(),
                est.half_width,
                rational::format(&est.reference)
            ));
            doc["stopped_value"] = serde_json::to_value(&est)?;
        }
    }
    Ok(Output::success(doc, human))
}

fn run(cli: &Cli) -> anyhow::Result<Output> {
    match &cli.command {
        Command::Solve(g) => solve_cmd(g),
        Command::BestResponse { game, sigma } => best_response_cmd(game, sigma),
        Command::Classify(g) => classify_cmd(g),
        Command::Martingale { game, sigma, tau } => martingale_cmd(game, sigma, tau),
        Command::Simulate { game, sigma, tau, horizon, trials, seed, source, payoff } => {
            simulate_cmd(game, sigma, tau, *horizon, *trials, *seed, source.as_deref(), payoff.as_ref())
        }
        Command::Check { property, payoff, max_cycle, random_cases, seed } => {
            let bounds = WordBounds { max_cycle: *max_cycle, random_cases: *random_cases, alphabet: None };
            let report = match property {
                Property::Submixing => verify::search_submixing_violation(payoff, &bounds, *seed)?,
                Property::ShiftInvariance => verify::search_shift_violation(payoff, &bounds, *seed)?,
            };
            Ok(Output::report(report))
        }
        Command::Verify(VerifyCommand::Halfpos { game, payoff, budget, memory, samples, seed }) => {
            if *budget == 0 || *memory == 0 {
                bail!("--budget and --memory must be positive");
            }
            let (arena, notes) = match game.strip_prefix("random:") {
                Some(params) => random_game(params, payoff)?,
                None => (read_game(Path::new(game))?, Vec::new()),
            };
            let opts = HalfposOptions { budget: *budget, memory: *memory, samples: *samples, seed: *seed, ..Default::default() };
            let mut report = verify::verify_halfpos(&arena, payoff, &opts)?;
            report.notes.extend(notes);
            Ok(Output::report(report))
        }
        Command::Verify(VerifyCommand::Subgame { game, sigma, epsilon }) => {
            let arena = read_game(&game.game)?;
            let sigma = read_strategy(&arena, Player::P1, sigma)?;
            Ok(Output::report(verify::verify_subgame_perfect(&arena, &game.payoff, &sigma, epsilon, game.budget)?))
        }
        Command::Reproduce { which: Example::Fig1 } => Ok(Output::report(verify::reproduce_counterexample()?)),
        Command::Doob { game, trials, seed } => {
            if *trials == 0 {
                bail!("--trials must be positive");
            }
            let arena = read_game(&game.game)?;
            Ok(Output::report(verify::doob_suite(&arena, &game.payoff, *trials, *seed)?))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(out) => {
            match cli.format {
                Format::Human => print!("{}", out.human),
                Format::Structured => println!("{}", serde_json::to_string_pretty(&out.doc).expect("json")),
            }
            ExitCode::from(out.code)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            if let Some(Error::Budget { .. }) = e.downcast_ref::<Error>() {
                eprintln!("hint: raise --budget or split the game into smaller sub-arenas");
            }
            ExitCode::from(1)
        }
    }
}
