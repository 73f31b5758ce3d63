use proptest::prelude::*;
use roundabout::game::{
    oracle_subgame_perfect, solve_backward_induction, SequentialGame, Strategy as Plan, StrategySet,
};
use roundabout::VehicleId;

fn sigma(m: usize) -> StrategySet {
    StrategySet::new((0..m).map(|k| Plan::from_listing(&[k as f64 * 10.0], 2)).collect()).unwrap()
}

fn players(n: usize) -> Vec<VehicleId> {
    (1..=n as u32).map(VehicleId).collect()
}

fn leaf(profile: &[usize], m: usize) -> usize {
    profile.iter().fold(0, |acc, &s| acc * m + s)
}

/// Random game: players, |Σ|, and a cost per leaf per player.
fn game_case() -> impl Strategy<Value = (usize, usize, Vec<Vec<f64>>)> {
    (1usize..=3, 1usize..=5).prop_flat_map(|(n, m)| {
        let leaves = m.pow(n as u32);
        (
            Just(n),
            Just(m),
            prop::collection::vec(prop::collection::vec((0u32..=100).prop_map(f64::from), n), leaves),
        )
    })
}

fn solve(n: usize, m: usize, table: &[Vec<f64>]) -> (Vec<usize>, usize) {
    let set = sigma(m);
    let mut calls = 0;
    let mut g = SequentialGame::new(players(n), &set, |p: &[usize], c: &mut [f64]| {
        calls += 1;
        c.copy_from_slice(&table[leaf(p, m)]);
    })
    .unwrap();
    let eq = solve_backward_induction(&mut g, 4).unwrap();
    (eq.choices, calls)
}

/// Outcome leaf of optimal play after `prefix` is fixed.
fn continuation(prefix: &mut Vec<usize>, n: usize, m: usize, table: &[Vec<f64>]) -> Vec<usize> {
    if prefix.len() == n {
        return prefix.clone();
    }
    let k = prefix.len();
    let mut best: Option<Vec<usize>> = None;
    for s in 0..m {
        prefix.push(s);
        let out = continuation(prefix, n, m, table);
        prefix.pop();
        if best.as_ref().is_none_or(|b| table[leaf(&out, m)][k] < table[leaf(b, m)][k]) {
            best = Some(out);
        }
    }
    best.unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn solver_matches_oracle((n, m, table) in game_case()) {
        let set = sigma(m);
        let (choices, _) = solve(n, m, &table);
        let mut g = SequentialGame::new(players(n), &set, |p: &[usize], c: &mut [f64]| {
            c.copy_from_slice(&table[leaf(p, m)]);
        }).unwrap();
        let oracle = oracle_subgame_perfect(&mut g).unwrap();
        prop_assert_eq!(choices, oracle.choices);
    }

    #[test]
    fn every_mover_best_responds((n, m, table) in game_case()) {
        let (choices, _) = solve(n, m, &table);
        let chosen = table[leaf(&choices, m)].clone();
        for k in 0..n {
            let mut prefix = choices[..k].to_vec();
            for s in 0..m {
                prefix.push(s);
                let out = continuation(&mut prefix, n, m, &table);
                prefix.pop();
                prop_assert!(table[leaf(&out, m)][k] >= chosen[k]);
            }
        }
    }

    #[test]
    fn solving_is_deterministic((n, m, table) in game_case()) {
        prop_assert_eq!(solve(n, m, &table), solve(n, m, &table));
    }

    #[test]
    fn shifting_one_players_costs_keeps_the_profile(
        (n, m, table) in game_case(),
        who in 0usize..3,
        shift in -1000.0f64..1000.0,
    ) {
        let who = who % n;
        let shifted: Vec<Vec<f64>> = table
            .iter()
            .map(|row| row.iter().enumerate().map(|(k, &c)| if k == who { c + shift.round() } else { c }).collect())
            .collect();
        prop_assert_eq!(solve(n, m, &table).0, solve(n, m, &shifted).0);
    }

    #[test]
    fn payoff_calls_stay_within_the_tree_size((n, m, table) in game_case()) {
        let (_, calls) = solve(n, m, &table);
        let bound: usize = (1..=n as u32).map(|k| m.pow(k)).sum();
        prop_assert!(calls <= bound, "{calls} > {bound}");
    }
}
