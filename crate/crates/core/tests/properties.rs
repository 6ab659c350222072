use std::collections::BTreeSet;

use proptest::prelude::*;
use rand::Rng as _;

use mdp_grl::dqn::{
    batch_gradient, batch_loss, greedy_action, run_episode, td_targets, AgentConfig, MlpParams, ReplayBuffer,
    ReplayTransition, StateInputs,
};
use mdp_grl::embeddings::{self, EmbeddingTable, Method, StateRepr, TrainSpec};
use mdp_grl::gridworld::{
    build_maze, Action, GridSpec, GridWorld, StateId, CELL_AGENT, CELL_FREE, CELL_GOAL, CELL_OBSTACLE,
    REWARD_GOAL, REWARD_MOVE, REWARD_OBSTACLE, REWARD_WALL,
};
use mdp_grl::harness::{
    aggregate, mean_ci, pad_series, raw_csv, read_curve_csv, read_raw_csv, curve_csv, t_critical, AggregateCurve,
    Axis, RunResult, SeedRun,
};
use mdp_grl::mdpgraph::{
    build_graph, coverage, full_graph, read_edgelist, sample_transitions, write_edgelist, MdpGraph,
};
use mdp_grl::numerics::{finite_diff_check, katz_matrix, spectral_radius, truncated_factorization, DenseMatrix};
use mdp_grl::seed;

fn grid_spec() -> impl Strategy<Value = GridSpec> {
    (2usize..7, 2usize..7)
        .prop_flat_map(|(w, h)| {
            let n = w * h;
            (
                Just((w, h)),
                0..n,
                0..n,
                proptest::collection::btree_set(0..n, 0..n / 3 + 1),
                proptest::collection::btree_set((0..n, 0usize..4), 0..n / 2 + 1),
                0.0f64..0.4,
                any::<u64>(),
            )
        })
        .prop_filter_map("start equals goal", |((w, h), start, goal, obstacles, removed, frac, seed)| {
            if start == goal {
                return None;
            }
            let mut spec = GridSpec::new(w, h, start, goal);
            spec.obstacles = obstacles.into_iter().filter(|&o| o != start && o != goal).collect();
            spec.removed_actions = removed
                .into_iter()
                .map(|(c, a)| (c, Action::from_index(a).unwrap_or(Action::Up)))
                .collect();
            spec.removal_fraction = frac;
            spec.seed = seed;
            Some(spec)
        })
}

/// Specs whose explicit removals leave a valid maze.
fn world() -> impl Strategy<Value = (GridSpec, GridWorld)> {
    grid_spec().prop_filter_map("invalid removals", |spec| build_maze(&spec).ok().map(|w| (spec, w)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn step_is_pure_bounded_and_closed((_, world) in world()) {
        let rewards = [REWARD_GOAL, REWARD_OBSTACLE, REWARD_WALL, REWARD_MOVE];
        for s in (0..world.num_states()).map(StateId) {
            for a in world.valid_actions(s) {
                let out = world.step(s, a).unwrap();
                prop_assert_eq!(out, world.step(s, a).unwrap());
                prop_assert!(rewards.contains(&out.reward));
                prop_assert!(out.next_state.0 < world.num_states());
                prop_assert_eq!(out.terminal, out.next_state == world.goal());
            }
        }
    }

    #[test]
    fn removed_actions_are_unavailable((spec, world) in world()) {
        for s in (0..world.num_states()).map(StateId) {
            let valid = world.valid_actions(s);
            prop_assert!(!valid.is_empty());
            for a in Action::ALL {
                prop_assert_eq!(valid.contains(&a), world.is_available(s, a));
                if spec.removed_actions.contains(&(s.0, a)) {
                    prop_assert!(!world.is_available(s, a));
                    prop_assert!(world.step(s, a).is_err());
                }
            }
        }
        prop_assert!(world.shortest_path_len().is_some());
    }

    #[test]
    fn matrix_image((_, world) in world(), agent in any::<prop::sample::Index>()) {
        let agent = StateId(agent.index(world.num_states()));
        let m = world.matrix_representation(agent);
        let allowed = [CELL_FREE, CELL_OBSTACLE, CELL_GOAL, CELL_AGENT];
        prop_assert!(m.iter().all(|v| allowed.contains(v)));
        prop_assert_eq!(m.iter().filter(|&&v| v == CELL_AGENT).count(), 1);
        prop_assert_eq!(m[agent.0], CELL_AGENT);
    }

    #[test]
    fn graph_building_is_monotone_and_honest((_, world) in world(), na in 0usize..200, nb in 0usize..200, s in any::<u64>()) {
        let a = sample_transitions(&world, na, s);
        let b = sample_transitions(&world, nb, s.wrapping_add(1));
        let ga = build_graph(&a);
        let union: Vec<_> = a.iter().chain(&b).copied().collect();
        let gu = build_graph(&union);
        let truth: BTreeSet<_> = world.enumerate_transitions().into_iter().collect();
        for e in ga.edges() {
            prop_assert!(gu.has_edge(e.0, e.1, e.2));
        }
        for e in gu.edges() {
            prop_assert!(truth.contains(&e));
        }
        prop_assert_eq!(coverage(&full_graph(&world), &world), 1.0);
    }

    #[test]
    fn in_edges_transpose_out_edges((_, world) in world(), n in 1usize..300, s in any::<u64>()) {
        let g = build_graph(&sample_transitions(&world, n, s));
        let out: BTreeSet<_> = g.nodes().iter().flat_map(|&u| g.out_edges(u).iter().map(move |&(a, v)| (u, a, v))).collect();
        let inn: BTreeSet<_> = g.nodes().iter().flat_map(|&v| g.in_edges(v).iter().map(move |&(a, u)| (u, a, v))).collect();
        prop_assert_eq!(&out, &inn);
        prop_assert_eq!(out, g.edges().collect::<BTreeSet<_>>());
        prop_assert_eq!(read_edgelist(&write_edgelist(&g)).unwrap(), g);
    }
}

fn random_matrix(n: usize, m: usize, s: u64, density: f64) -> DenseMatrix {
    let mut rng = seed::rng(s);
    DenseMatrix::from_fn(n, m, |_, _| if rng.random::<f64>() < density { rng.random::<f64>() } else { 0.0 })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn factorization_error_non_increasing(n in 2usize..12, m in 2usize..12, s in any::<u64>()) {
        let a = random_matrix(n, m, s, 0.7);
        let mut last = f64::INFINITY;
        for d in 1..=n.min(m) {
            let err = truncated_factorization(&a, d, s).unwrap().reconstruction_error(&a).unwrap();
            prop_assert!(err.is_finite());
            prop_assert!(err <= last + 1e-9 * (1.0 + a.frobenius_norm()), "d={} err={} last={}", d, err, last);
            last = err;
        }
        prop_assert!(last < 1e-8 * (1.0 + a.frobenius_norm()));
    }

    #[test]
    fn katz_fixed_point_and_transpose_radius(n in 1usize..10, s in any::<u64>(), frac in 0.05f64..0.95) {
        let a = random_matrix(n, n, s, 0.5).data().iter().map(|&v| if v > 0.0 { 1.0 } else { 0.0 }).collect();
        let a = DenseMatrix::from_vec(n, n, a).unwrap();
        let rho = spectral_radius(&a, 2000, 1e-12).unwrap();
        let rho_t = spectral_radius(&a.transpose(), 2000, 1e-12).unwrap();
        prop_assert!((rho - rho_t).abs() < 1e-6 * (1.0 + rho), "{} vs {}", rho, rho_t);
        let beta = if rho > 0.0 { frac / rho } else { frac };
        let tol = 1e-10;
        let k = katz_matrix(&a, beta, tol).unwrap();
        prop_assert!(k.is_finite());
        let residual = k.sub(&a.matmul(&k.add(&DenseMatrix::identity(n)).unwrap()).unwrap().scale(beta)).unwrap();
        prop_assert!(residual.frobenius_norm() < 10.0 * tol * (1.0 + k.frobenius_norm()));
    }
}

/// Small strongly connected graph: a directed ring plus random chords.
fn ring_graph(n: usize, chords: &[(usize, usize)]) -> MdpGraph {
    let mut edges: Vec<(StateId, Action, StateId)> =
        (0..n).map(|i| (StateId(i), Action::Right, StateId((i + 1) % n))).collect();
    edges.extend(chords.iter().map(|&(u, v)| (StateId(u % n), Action::Down, StateId(v % n))));
    MdpGraph::with_nodes([], edges, true)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn trainers_are_deterministic_and_finite(
        n in 3usize..9,
        chords in proptest::collection::vec((0usize..9, 0usize..9), 0..6),
        s in any::<u64>(),
    ) {
        let g = ring_graph(n, &chords);
        let spec = TrainSpec { d: 3, walks_per_node: 2, epochs: 2, full_batch_epochs: 20, seed: s, ..TrainSpec::default() };
        for method in Method::ALL.into_iter().filter(|&m| m != Method::Matrix) {
            let t = embeddings::train(method, &g, &spec).unwrap();
            prop_assert_eq!(t.n(), n);
            prop_assert!(t.source().is_finite());
            prop_assert!(t.target().is_none_or(|m| m.is_finite()));
            prop_assert_eq!(&t, &embeddings::train(method, &g, &spec).unwrap());
            prop_assert_eq!(EmbeddingTable::from_text(&t.to_text()).unwrap(), t);
        }
    }
}

fn transition(rng: &mut seed::Rng, dim: usize) -> ReplayTransition {
    let mut v = || (0..dim).map(|_| rng.random::<f64>() * 4.0 - 2.0).collect::<Vec<f64>>();
    let (x, x_next) = (v(), v());
    ReplayTransition {
        x,
        action: Action::from_index(rng.random_range(0..4)).unwrap_or(Action::Up),
        reward: rng.random::<f64>() * 2.0 - 1.0,
        x_next,
        terminal: rng.random::<bool>(),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn forward_is_bounded(dim in 1usize..8, h1 in 1usize..8, h2 in 1usize..8, s in any::<u64>(), scale in 0.1f64..20.0) {
        let mut rng = seed::rng(s);
        let mut p = MlpParams::init(dim, h1, h2, &mut rng);
        let scaled: Vec<f64> = p.flat().iter().map(|v| v * scale).collect();
        p.set_flat(&scaled).unwrap();
        let x: Vec<f64> = (0..dim).map(|_| rng.random::<f64>() * 10.0 - 5.0).collect();
        prop_assert!(p.forward(&x).unwrap().iter().all(|q| q.abs() <= 1.0));
    }

    #[test]
    fn backprop_matches_finite_differences(dim in 1usize..6, h1 in 1usize..6, h2 in 1usize..6, b in 1usize..6, s in any::<u64>()) {
        let mut rng = seed::rng(s);
        let params = MlpParams::init(dim, h1, h2, &mut rng);
        let batch: Vec<ReplayTransition> = (0..b).map(|_| transition(&mut rng, dim)).collect();
        let refs: Vec<&ReplayTransition> = batch.iter().collect();
        let targets = td_targets(&params, &refs, 0.95).unwrap();
        let (_, grad) = batch_gradient(&params, &refs, &targets).unwrap();
        let mut probe = params.clone();
        let err = finite_diff_check(
            |p| {
                probe.set_flat(p).unwrap();
                batch_loss(&probe, &refs, &targets).unwrap()
            },
            &params.flat(),
            &grad.flat(),
            1e-6,
        ).unwrap();
        prop_assert!(err < 1e-4, "{}", err);
    }

    #[test]
    fn replay_is_bounded_fifo(capacity in 1usize..20, pushes in 0usize..60) {
        let mut buf = ReplayBuffer::new(capacity);
        for i in 0..pushes {
            buf.push(ReplayTransition { x: vec![], action: Action::Up, reward: i as f64, x_next: vec![], terminal: false });
            prop_assert!(buf.len() <= capacity);
        }
        let kept: Vec<f64> = buf.iter().map(|t| t.reward).collect();
        let expected: Vec<f64> = (pushes.saturating_sub(capacity)..pushes).map(|i| i as f64).collect();
        prop_assert_eq!(kept, expected);
    }

    #[test]
    fn greedy_choice_ignores_positive_scale(q in prop::array::uniform4(-1.0f64..1.0), c in 0.01f64..100.0, mask in 1u8..16) {
        let avail: Vec<Action> = Action::ALL.into_iter().filter(|a| mask & (1 << a.index()) != 0).collect();
        prop_assert_eq!(greedy_action(&q, &avail), greedy_action(&q.map(|v| v * c), &avail));
    }

    #[test]
    fn episodes_end_at_goal_or_floor((_, world) in world(), s in any::<u64>(), eps in 0.0f64..1.0) {
        let config = AgentConfig { hidden1: 4, hidden2: 4, batch_size: 8, reward_floor: -3.0, ..AgentConfig::default() };
        let inputs = StateInputs::new(&StateRepr::Matrix, &world);
        let mut rng = seed::rng(s);
        let mut params = MlpParams::init(inputs.dim(), 4, 4, &mut rng);
        let mut buffer = ReplayBuffer::new(config.replay_capacity);
        let log = run_episode(&world, &mut params, &inputs, &config, eps, &mut buffer, &mut rng).unwrap();
        prop_assert_eq!(buffer.len(), log.len());
        if log.reached_goal {
            prop_assert_eq!(log.rewards.last().copied(), Some(REWARD_GOAL));
        } else {
            prop_assert!(log.cumulative() <= config.reward_floor + 1e-9);
        }
        let before_last: f64 = log.rewards[..log.len() - 1].iter().sum();
        prop_assert!(before_last > config.reward_floor + 1e-9);
    }
}

fn seed_runs(series: &[Vec<Vec<f64>>]) -> RunResult {
    RunResult {
        runs: series
            .iter()
            .enumerate()
            .map(|(i, eps)| SeedRun {
                seed: i as u64,
                coverage: 1.0,
                episodes: eps
                    .iter()
                    .map(|r| mdp_grl::dqn::EpisodeLog { rewards: r.clone(), reached_goal: false })
                    .collect(),
            })
            .collect(),
    }
}

fn episodes_strategy() -> impl Strategy<Value = Vec<Vec<f64>>> {
    proptest::collection::vec(proptest::collection::vec(-1.0f64..1.0, 1..6), 1..5)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn padding_preserves_final_values(runs in proptest::collection::vec(episodes_strategy(), 2..5)) {
        let result = seed_runs(&runs);
        let len = result.max_steps();
        for s in result.step_series() {
            let padded = pad_series(&s, len);
            prop_assert_eq!(padded.len(), len);
            prop_assert_eq!(padded.last(), s.last());
            prop_assert_eq!(&padded[..s.len()], &s[..]);
        }
        let c = aggregate(&result, Axis::Steps).unwrap();
        for i in 0..c.len() {
            prop_assert!(c.ci_low[i] <= c.mean[i] && c.mean[i] <= c.ci_high[i]);
        }
    }

    #[test]
    fn identical_seeds_have_zero_width(eps in episodes_strategy(), k in 2usize..5) {
        let result = seed_runs(&vec![eps; k]);
        for axis in [Axis::Steps, Axis::Episodes] {
            let c = aggregate(&result, axis).unwrap();
            prop_assert_eq!(&c.ci_low, &c.mean);
            prop_assert_eq!(&c.ci_high, &c.mean);
        }
    }

    #[test]
    fn half_width_is_t_times_standard_error(values in proptest::collection::vec(-100.0f64..100.0, 2..30)) {
        let n = values.len() as f64;
        let (mean, half) = mean_ci(&values).unwrap();
        let sd = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        prop_assert!((half - t_critical(values.len() - 1).unwrap() * sd / n.sqrt()).abs() <= 1e-12 * (1.0 + half));
    }

    #[test]
    fn csv_round_trips(values in proptest::collection::vec((any::<f64>(), any::<f64>(), any::<f64>()), 0..20), runs in proptest::collection::vec(episodes_strategy(), 1..3)) {
        let finite = |v: f64| if v.is_finite() { v } else { 0.0 };
        let curve = AggregateCurve {
            x: (1..=values.len()).collect(),
            mean: values.iter().map(|v| finite(v.0)).collect(),
            ci_low: values.iter().map(|v| finite(v.1)).collect(),
            ci_high: values.iter().map(|v| finite(v.2)).collect(),
        };
        prop_assert_eq!(read_curve_csv(&curve_csv(&curve)).unwrap(), curve);
        let result = seed_runs(&runs);
        let rows = read_raw_csv(&raw_csv(&result)).unwrap();
        let expected: Vec<f64> = result.runs.iter().flat_map(|r| r.episodes.iter().flat_map(|e| e.rewards.clone())).collect();
        prop_assert_eq!(rows.iter().map(|r| r.reward).collect::<Vec<_>>(), expected);
    }
}
