use maplan::examples::figure_one;
use maplan::heuristics::HeuristicKind;
use maplan::ingest::{generate_instance, CostModel, GeneratorParams, Placement};
use maplan::oracle::{oracle_optimal_cost, OracleResult};
use maplan::planner::{run_local_tcp, run_simulated, Mode, PlannerConfig, SendTiming, SimOptions};
use maplan::ppastar::{Limits, SearchOutcome};
use maplan::transport::TokenMode;
use maplan::validate::validate_plan;
use maplan::Task;

fn oracle(task: &Task) -> Option<u64> {
    match oracle_optimal_cost(task, 1_000_000) {
        OracleResult::Cost(c) => Some(c),
        OracleResult::Unsolvable => None,
        OracleResult::TooLarge => panic!("oracle state limit"),
    }
}

fn noisy(seed: u64) -> SimOptions {
    SimOptions {
        seed,
        max_delay: 3,
        stall: 0.2,
        check_safety: true,
        ..Default::default()
    }
}

#[test]
fn figure_one_optimal() {
    let task = figure_one();
    for seed in 0..10 {
        let r = run_simulated(
            &task,
            &PlannerConfig::optimal(HeuristicKind::HMax),
            &noisy(seed),
        )
        .unwrap();
        assert_eq!(r.outcome, SearchOutcome::Solved);
        assert_eq!(r.cost, Some(8));
        let plan = r.plan.unwrap();
        assert_eq!(validate_plan(&task, &plan).cost(), Some(8));
        assert_eq!(r.f_trace.len(), plan.len() + 1);
        assert!(
            r.f_trace.windows(2).all(|w| w[0] <= w[1]),
            "{:?}",
            r.f_trace
        );
        assert_eq!(r.safety_violations, 0);
    }
}

#[test]
fn figure_one_exhaustive_count() {
    let cfg = PlannerConfig {
        heuristic: HeuristicKind::Blind,
        exhaustive: true,
        ..Default::default()
    };
    for seed in 0..5 {
        let r = run_simulated(&figure_one(), &cfg, &noisy(seed)).unwrap();
        assert_eq!(r.outcome, SearchOutcome::Unsolvable);
        assert_eq!(r.search_nodes, 16);
    }
}

#[test]
fn logistics_optimal_matches_oracle() {
    for seed in 0..8 {
        let params = GeneratorParams::logistics(2 + (seed as usize % 2), 4, 2, seed)
            .with_costs(CostModel::Random);
        let task = generate_instance(&params).unwrap();
        let want = oracle(&task);
        for cfg in [
            PlannerConfig::optimal(HeuristicKind::HMax),
            PlannerConfig {
                timing: SendTiming::Eager,
                tokens: TokenMode::MultiToken,
                ..PlannerConfig::optimal(HeuristicKind::Blind)
            },
        ] {
            let r = run_simulated(&task, &cfg, &noisy(seed)).unwrap();
            assert_eq!(r.cost, want, "seed {seed} {cfg:?}");
            assert_eq!(r.safety_violations, 0);
            let plan = r.plan.unwrap();
            assert!(validate_plan(&task, &plan).is_valid());
        }
    }
}

#[test]
fn satisficing_plans_are_valid() {
    for seed in 0..10 {
        let task = generate_instance(&GeneratorParams::logistics(3, 5, 3, seed)).unwrap();
        for h in [
            HeuristicKind::FF,
            HeuristicKind::HAdd,
            HeuristicKind::GoalCount,
        ] {
            let r = run_simulated(&task, &PlannerConfig::satisficing(h), &noisy(seed)).unwrap();
            assert_eq!(r.outcome, SearchOutcome::Solved);
            assert!(validate_plan(&task, &r.plan.unwrap()).is_valid());
        }
    }
}

#[test]
fn unsolvable_is_detected() {
    for seed in 0..4 {
        let task =
            generate_instance(&GeneratorParams::logistics(2, 4, 2, seed).unsolvable()).unwrap();
        assert_eq!(oracle(&task), None);
        for mode in [Mode::Satisficing, Mode::Optimal] {
            let cfg = PlannerConfig {
                mode,
                heuristic: HeuristicKind::Blind,
                ..Default::default()
            };
            let r = run_simulated(&task, &cfg, &noisy(seed)).unwrap();
            assert_eq!(r.outcome, SearchOutcome::Unsolvable, "seed {seed} {mode:?}");
        }
    }
}

#[test]
fn robustness_survives_a_crash() {
    for seed in 0..6 {
        let mut params = GeneratorParams::logistics(3, 5, 2, seed);
        params.backup = true;
        params.placement = Placement::Depots;
        let task = generate_instance(&params).unwrap();
        let cfg = PlannerConfig {
            robustness: true,
            ..PlannerConfig::satisficing(HeuristicKind::FF)
        };
        let opts = SimOptions {
            fail: Some((0, 1)),
            ..noisy(seed)
        };
        let r = run_simulated(&task, &cfg, &opts).unwrap();
        assert_eq!(r.outcome, SearchOutcome::Solved, "seed {seed}");
        let plan = r.plan.unwrap();
        assert!(validate_plan(&task, &plan).is_valid());
        assert!(plan.iter().all(|&a| task.actions[a].owner != 0));
    }
}

#[test]
fn crash_that_strands_a_package_is_unsolvable() {
    for seed in 0..4 {
        let mut params = GeneratorParams::logistics(3, 4, 2, seed);
        params.backup = true;
        params.placement = Placement::FirstAtAgentZero;
        let task = generate_instance(&params).unwrap();
        let cfg = PlannerConfig {
            robustness: true,
            ..PlannerConfig::optimal(HeuristicKind::HMax)
        };
        let opts = SimOptions {
            fail: Some((0, 1)),
            ..noisy(seed)
        };
        let r = run_simulated(&task, &cfg, &opts).unwrap();
        assert_eq!(r.outcome, SearchOutcome::Unsolvable, "seed {seed}");
    }
}

#[test]
fn crash_without_robustness_is_an_error() {
    let task = generate_instance(&GeneratorParams::logistics(3, 5, 2, 1)).unwrap();
    let opts = SimOptions {
        fail: Some((1, 1)),
        ..noisy(1)
    };
    assert!(run_simulated(&task, &PlannerConfig::satisficing(HeuristicKind::FF), &opts).is_err());
}

#[test]
fn optimal_rejects_inadmissible_heuristic() {
    assert!(run_simulated(
        &figure_one(),
        &PlannerConfig::optimal(HeuristicKind::FF),
        &SimOptions::default()
    )
    .is_err());
}

#[test]
fn local_tcp_run() {
    let task = generate_instance(&GeneratorParams::logistics(3, 4, 2, 3)).unwrap();
    let r = run_local_tcp(
        &task,
        &PlannerConfig::optimal(HeuristicKind::HMax),
        Limits::default(),
    )
    .unwrap();
    assert_eq!(r.cost, oracle(&task));
    assert!(r.traffic.bytes_sent > 0);
}
