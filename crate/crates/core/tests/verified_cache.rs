use hearth_core::clock::ManualClock;
use hearth_core::fixtures;
use hearth_core::memory::{ScriptCache, VerifiedProgram};
use hearth_core::sim::{standard_registry, Fleet};
use hearth_core::validate::validate;
use hearth_core::{run, ExecutionStatus, RunOptions};

#[test]
fn scenario2_program_is_cached_after_success_and_rejected_on_replay() {
    let clock = ManualClock::new(0);
    let mut fleet = Fleet::new(fixtures::scenario2_scene()).unwrap();
    let registry = standard_registry::<Fleet>(&fleet);
    let program = fixtures::scenario2_program();
    let checked = validate(&program, &registry, &fleet);
    assert!(checked.is_valid(), "{}", checked.describe_errors());

    let first = run(&program, &registry, &mut fleet, RunOptions::default(), &clock);
    assert_eq!(first.status, ExecutionStatus::Success);
    let mut cache = ScriptCache::default();
    let verified = VerifiedProgram::new(program.clone(), &checked, &first).unwrap();
    cache.store(fixtures::SCENARIO2_SUMMARY, verified, 1);

    let hit = cache.lookup(fixtures::SCENARIO2_SUMMARY, 2).unwrap();
    assert_eq!(hit.score, 1.0);
    assert_eq!(hit.entry.program, program);
    assert_eq!(hit.entry.use_count, 1);
    assert!(cache.lookup("water the plants on the balcony", 3).is_none());

    let before = fleet.router().cloned();
    let second = run(&hit.entry.program, &registry, &mut fleet, RunOptions::default(), &clock);
    assert!(matches!(second.status, ExecutionStatus::Terminated { ref reason } if reason.contains("100 Mbps")));
    assert_eq!(fleet.router().cloned(), before);

    // A terminated run cannot be promoted into the cache.
    assert!(VerifiedProgram::new(program, &checked, &second).is_err());
}

#[test]
fn scenario1_program_dispatches_the_robot_within_budget() {
    let clock = ManualClock::new(0);
    let mut fleet = Fleet::new(fixtures::scenario1_scene()).unwrap();
    let registry = standard_registry::<Fleet>(&fleet);
    let report = run(&fixtures::scenario1_program(), &registry, &mut fleet, RunOptions::default(), &clock);
    assert_eq!(report.status, ExecutionStatus::Success);
    let robot_calls = report.logs.iter().filter(|l| l.source.starts_with("turtlebot")).count();
    assert!(robot_calls > 0);

    let budget = RunOptions { budget: 2, ..RunOptions::default() };
    let mut fresh = Fleet::new(fixtures::scenario1_scene()).unwrap();
    let starved = run(&fixtures::scenario1_program(), &registry, &mut fresh, budget, &clock);
    assert!(matches!(
        starved.status,
        ExecutionStatus::Failed { error: hearth_core::executor::ExecError::BudgetExceeded { budget: 2 } }
    ));
}
