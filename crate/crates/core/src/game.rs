//! One-round sequential games with perfect information over a finite
//! strategy set, solved by backward induction.
//!
//! Players move one after another in a fixed order, each seeing every
//! earlier choice. The extensive form is a `|Σ|`-ary tree of depth
//! `|players|`; a leaf is a full strategy profile and carries one cost per
//! player. Backward induction walks the tree depth first and lets every
//! decider pick the child minimizing its own cost, given optimal play by
//! everyone after it. Ties go to the earliest strategy in the set's order.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use crate::dynamics::Acceleration;
use crate::error::{Error, Result};
use crate::VehicleId;

/// Default bound on the number of players, matching the neighbour-set size.
pub const DEFAULT_PLAYER_CAP: usize = 4;

/// Vector of accelerations, one per time step of the horizon.
#[derive(Clone, Debug, PartialEq)]
pub struct Strategy {
    accels: Vec<Acceleration>,
}

impl Strategy {
    pub fn new(accels: Vec<Acceleration>) -> Self {
        Strategy { accels }
    }

    /// Builds a strategy of length `horizon` from a listing, truncating or
    /// zero-padding it.
    pub fn from_listing(values: &[f64], horizon: usize) -> Self {
        let accels = (0..horizon)
            .map(|k| Acceleration(values.get(k).copied().unwrap_or(0.0)))
            .collect();
        Strategy { accels }
    }

    pub fn accels(&self) -> &[Acceleration] {
        &self.accels
    }

    pub fn first(&self) -> Acceleration {
        self.accels[0]
    }

    pub fn len(&self) -> usize {
        self.accels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.accels.is_empty()
    }
}

/// The finite strategy set Σ in its canonical order.
#[derive(Clone, Debug, PartialEq)]
pub struct StrategySet {
    strategies: Vec<Strategy>,
}

impl StrategySet {
    pub fn new(strategies: Vec<Strategy>) -> Result<Self> {
        if strategies.is_empty() {
            return Err(Error::InvalidParameter("strategy set is empty".into()));
        }
        let h = strategies[0].len();
        if h == 0 || strategies.iter().any(|s| s.len() != h) {
            return Err(Error::InvalidParameter(
                "strategies must share one non-zero length".into(),
            ));
        }
        for (k, s) in strategies.iter().enumerate() {
            if strategies[..k].contains(s) {
                return Err(Error::InvalidParameter(format!("duplicate strategy at position {k}")));
            }
        }
        Ok(StrategySet { strategies })
    }

    /// The five-strategy alphabet: one first-step acceleration among
    /// `{-50, -10, 0, 10, 30}` m/s², zero afterwards.
    pub fn default_alphabet(horizon: usize) -> Self {
        let strategies = [-50.0, -10.0, 0.0, 10.0, 30.0]
            .iter()
            .map(|&a| Strategy::from_listing(&[a, 0.0, 0.0, 0.0, 0.0], horizon))
            .collect();
        StrategySet::new(strategies).expect("default alphabet is valid")
    }

    pub fn len(&self) -> usize {
        self.strategies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.strategies.is_empty()
    }

    pub fn horizon(&self) -> usize {
        self.strategies[0].len()
    }

    pub fn get(&self, index: usize) -> &Strategy {
        &self.strategies[index]
    }

    pub fn iter(&self) -> impl Iterator<Item = &Strategy> {
        self.strategies.iter()
    }
}

/// Cost evaluation for complete profiles.
///
/// `profile[k]` is the strategy index chosen by the `k`-th player in decision
/// order; `costs[k]` must receive that player's cost.
pub trait Payoff {
    fn evaluate(&mut self, profile: &[usize], costs: &mut [f64]);
}

impl<F: FnMut(&[usize], &mut [f64])> Payoff for F {
    fn evaluate(&mut self, profile: &[usize], costs: &mut [f64]) {
        self(profile, costs)
    }
}

/// A sequential game: players in decision order (first mover first).
pub struct SequentialGame<'a, P> {
    players: Vec<VehicleId>,
    strategies: &'a StrategySet,
    payoff: P,
}

impl<'a, P: Payoff> SequentialGame<'a, P> {
    pub fn new(players: Vec<VehicleId>, strategies: &'a StrategySet, payoff: P) -> Result<Self> {
        if players.is_empty() {
            return Err(Error::InvalidParameter("a game needs at least one player".into()));
        }
        for (k, p) in players.iter().enumerate() {
            if players[..k].contains(p) {
                return Err(Error::InvalidParameter(format!("duplicate player {p}")));
            }
        }
        Ok(SequentialGame {
            players,
            strategies,
            payoff,
        })
    }

    pub fn players(&self) -> &[VehicleId] {
        &self.players
    }

    pub fn strategies(&self) -> &StrategySet {
        self.strategies
    }

    fn position(&self, player: VehicleId) -> Result<usize> {
        self.players
            .iter()
            .position(|&p| p == player)
            .ok_or(Error::UnknownPlayer(player.0))
    }

    fn costs_of(&mut self, profile: &[usize]) -> Vec<f64> {
        let mut costs = vec![0.0; self.players.len()];
        self.payoff.evaluate(profile, &mut costs);
        costs
    }
}

/// Strategy choice of every player, aligned with the decision order.
#[derive(Clone, Debug, PartialEq)]
pub struct EquilibriumProfile {
    pub players: Vec<VehicleId>,
    pub choices: Vec<usize>,
    /// Cost of each player at the equilibrium leaf.
    pub costs: Vec<f64>,
}

impl EquilibriumProfile {
    /// Index into Σ chosen by `player`.
    pub fn choice(&self, player: VehicleId) -> Option<usize> {
        self.players
            .iter()
            .position(|&p| p == player)
            .map(|k| self.choices[k])
    }

    pub fn strategy<'s>(&self, player: VehicleId, set: &'s StrategySet) -> Option<&'s Strategy> {
        self.choice(player).map(|i| set.get(i))
    }
}

/// Decision order: most aggressive first, ties by ascending id.
pub fn order_players(estimates: &BTreeMap<VehicleId, f64>) -> Vec<VehicleId> {
    let mut ids: Vec<(VehicleId, f64)> = estimates.iter().map(|(k, v)| (*k, *v)).collect();
    ids.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    ids.into_iter().map(|(id, _)| id).collect()
}

#[inline]
fn better(candidate: f64, incumbent: f64) -> bool {
    // strict: earlier strategies win ties
    candidate.total_cmp(&incumbent) == Ordering::Less
}

/// Subgame-perfect profile by depth-first backward induction.
///
/// Refuses games with more than `player_cap` players; the tree grows as
/// `|Σ|^players`. Each leaf is evaluated exactly once.
pub fn solve_backward_induction<P: Payoff>(
    game: &mut SequentialGame<'_, P>,
    player_cap: usize,
) -> Result<EquilibriumProfile> {
    let n = game.players.len();
    if n > player_cap {
        return Err(Error::PlayerCap { players: n, cap: player_cap });
    }
    let m = game.strategies.len();
    let mut prefix = vec![0usize; n];
    let mut scratch = vec![0.0; n];
    let (choices, costs) = descend(0, n, m, &mut prefix, &mut scratch, &mut game.payoff);
    Ok(EquilibriumProfile {
        players: game.players.clone(),
        choices,
        costs,
    })
}

fn descend<P: Payoff>(
    depth: usize,
    n: usize,
    m: usize,
    prefix: &mut [usize],
    scratch: &mut [f64],
    payoff: &mut P,
) -> (Vec<usize>, Vec<f64>) {
    if depth == n {
        payoff.evaluate(prefix, scratch);
        return (prefix.to_vec(), scratch.to_vec());
    }
    let mut best: Option<(Vec<usize>, Vec<f64>)> = None;
    for s in 0..m {
        prefix[depth] = s;
        let (choices, costs) = descend(depth + 1, n, m, prefix, scratch, payoff);
        if best.as_ref().is_none_or(|(_, c)| better(costs[depth], c[depth])) {
            best = Some((choices, costs));
        }
    }
    best.expect("strategy set is non-empty")
}

/// Exhaustive oracle for [`solve_backward_induction`], for test-scale games.
///
/// Tabulates every leaf first, then resolves prefixes bottom-up from the
/// deepest level, with the same tie-break. Limited to 3 players and 6
/// strategies.
pub fn oracle_subgame_perfect<P: Payoff>(game: &mut SequentialGame<'_, P>) -> Result<EquilibriumProfile> {
    let n = game.players.len();
    let m = game.strategies.len();
    if n > 3 || m > 6 {
        return Err(Error::OracleScale(format!("{n} players, {m} strategies")));
    }
    let leaves = m.pow(n as u32);
    let decode = |mut code: usize, len: usize| -> Vec<usize> {
        let mut out = vec![0; len];
        for k in (0..len).rev() {
            out[k] = code % m;
            code /= m;
        }
        out
    };
    let table: Vec<Vec<f64>> = (0..leaves).map(|code| game.costs_of(&decode(code, n))).collect();

    // outcome[level][prefix code] = leaf code reached under optimal continuation
    let mut outcome: Vec<usize> = (0..leaves).collect();
    for level in (0..n).rev() {
        let prefixes = m.pow(level as u32);
        let mut next = Vec::with_capacity(prefixes);
        for p in 0..prefixes {
            let mut best_leaf = outcome[p * m];
            for s in 1..m {
                let leaf = outcome[p * m + s];
                if better(table[leaf][level], table[best_leaf][level]) {
                    best_leaf = leaf;
                }
            }
            next.push(best_leaf);
        }
        outcome = next;
    }
    let leaf = outcome[0];
    Ok(EquilibriumProfile {
        players: game.players.clone(),
        choices: decode(leaf, n),
        costs: table[leaf].clone(),
    })
}

/// Whether no unilateral strategy swap strictly lowers `player`'s cost.
pub fn is_best_response<P: Payoff>(
    game: &mut SequentialGame<'_, P>,
    profile: &[usize],
    player: VehicleId,
) -> Result<bool> {
    let k = game.position(player)?;
    if profile.len() != game.players.len() {
        return Err(Error::InvalidParameter("profile is incomplete".into()));
    }
    let base = game.costs_of(profile)[k];
    let mut alt = profile.to_vec();
    for s in 0..game.strategies.len() {
        alt[k] = s;
        if game.costs_of(&alt)[k] < base {
            return Ok(false);
        }
    }
    Ok(true)
}
