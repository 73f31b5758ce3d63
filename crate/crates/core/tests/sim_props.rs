use std::sync::Arc;

use roundabout::agent::{AgentParams, DecisionModel};
use roundabout::cost::CostParams;
use roundabout::game::StrategySet;
use roundabout::geometry::{build_roundabout, Maneuver, PathKind, RoundaboutSpec, Status};
use roundabout::sim::{init_scenario, run, Outcome, SimParams, VehicleSpec, World};
use roundabout::trace::write_trace;
use roundabout::VehicleId;

fn model(agent: AgentParams) -> Arc<DecisionModel> {
    Arc::new(DecisionModel {
        geometry: build_roundabout(RoundaboutSpec::default()).unwrap(),
        cost: CostParams::default(),
        strategies: StrategySet::default_alphabet(4),
        agent,
        delta: 0.25,
    })
}

#[test]
fn runs_are_reproducible_to_the_byte() {
    let m = model(AgentParams::default());
    for seed in [3, 17, 99] {
        let a = run(init_scenario(8, seed, m.clone(), SimParams::default()).unwrap()).unwrap();
        let b = run(init_scenario(8, seed, m.clone(), SimParams::default()).unwrap()).unwrap();
        assert_eq!(a, b);
        let (mut ca, mut cb) = (Vec::new(), Vec::new());
        write_trace(&a, &mut ca).unwrap();
        write_trace(&b, &mut cb).unwrap();
        assert_eq!(ca, cb);
    }
}

#[test]
fn every_vehicle_acts_once_per_step_and_never_reappears() {
    let m = model(AgentParams::default());
    for seed in 0..20 {
        let trace = run(init_scenario(7, seed, m.clone(), SimParams::default()).unwrap()).unwrap();
        let last = trace.steps.len() - 1;
        let mut gone = std::collections::BTreeSet::new();
        let mut previous: Vec<VehicleId> = trace.steps[0].vehicles.iter().map(|v| v.id).collect();
        assert_eq!(previous.len(), 7);
        for (k, step) in trace.steps.iter().enumerate() {
            let ids: Vec<VehicleId> = step.vehicles.iter().map(|v| v.id).collect();
            let mut sorted = ids.clone();
            sorted.dedup();
            assert_eq!(sorted, ids, "duplicate record");
            for v in &step.vehicles {
                assert!(!gone.contains(&v.id), "vehicle {} came back", v.id);
                assert_eq!(v.accel.is_some(), k < last);
            }
            for id in previous.iter().filter(|id| !ids.contains(id)) {
                gone.insert(*id);
            }
            previous = ids;
        }
        // vehicles only leave after exiting
        for id in &gone {
            let seen_exit = trace
                .steps
                .iter()
                .flat_map(|s| &s.vehicles)
                .any(|v| v.id == *id && v.config.status == Status::Exit);
            assert!(seen_exit);
        }
    }
}

/// Three vehicles at rest whose games all say "stay": two on the circle and
/// one waiting at an entry behind them.
fn standstill(m: &Arc<DecisionModel>, seed: u64, max_steps: usize) -> World {
    let g = &m.geometry;
    let spec = |id: u32, m: Maneuver, arm: usize, s: f64, w: f64| VehicleSpec {
        id: VehicleId(id),
        path: g.path(PathKind::new(m, arm)).clone(),
        arclen: s,
        v: 0.0,
        w_agg: w,
    };
    let specs = vec![
        spec(1, Maneuver::TurnLeft, 2, 69.69338379334684, 0.2),
        spec(2, Maneuver::GoStraight, 2, 50.41878361394775, 0.2),
        spec(3, Maneuver::TurnLeft, 3, 39.92677011797336, 0.3),
    ];
    let params = SimParams { max_steps, ..SimParams::default() };
    World::from_vehicles(m.clone(), params, seed, specs).unwrap()
}

fn first_motion(trace: &roundabout::sim::SimTrace) -> Option<usize> {
    trace.steps.iter().position(|s| s.vehicles.iter().any(|v| v.config.v > 0.0))
}

#[test]
fn standstill_fixture_is_a_real_deadlock() {
    let frozen = model(AgentParams { deadlock_probability: 0.0, ..AgentParams::default() });
    let trace = run(standstill(&frozen, 0, 40)).unwrap();
    assert_eq!(trace.outcome, Outcome::Censored);
    assert_eq!(first_motion(&trace), None);
}

#[test]
fn random_restarts_break_the_standstill() {
    let m = model(AgentParams::default());
    for seed in 0..100 {
        let trace = run(standstill(&m, seed, 20)).unwrap();
        let t = first_motion(&trace);
        assert!(t.is_some_and(|t| t <= 20), "seed {seed}: still stopped");
    }
}

#[test]
fn faster_follower_on_one_arm_keeps_its_distance() {
    let m = model(AgentParams::default());
    let path = m.geometry.path(PathKind::new(Maneuver::GoStraight, 0)).clone();
    let specs = vec![
        VehicleSpec { id: VehicleId(1), path: path.clone(), arclen: 30.0, v: 2.0, w_agg: 0.5 },
        VehicleSpec { id: VehicleId(2), path, arclen: 20.0, v: 11.0, w_agg: 0.5 },
    ];
    let params = SimParams { max_steps: 200, ..SimParams::default() };
    let trace = run(World::from_vehicles(m.clone(), params, 1, specs).unwrap()).unwrap();
    let follower_first = trace.steps[0].vehicles.iter().find(|v| v.id == VehicleId(2)).unwrap();
    assert!(follower_first.accel.unwrap().0 < 0.0);
    assert!(trace.metrics().min_distance.unwrap() >= 4.5);
    assert_eq!(trace.outcome, Outcome::AllExited);
}
