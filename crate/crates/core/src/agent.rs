//! Per-vehicle decision process: observation, aggressiveness and path
//! estimation, the game over the neighbour set, and the deadlock override.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cost::{step_cost_indexed, CostParams};
use crate::dynamics::{step, Acceleration, Configuration};
use crate::error::{Error, Result};
use crate::game::{order_players, solve_backward_induction, SequentialGame, StrategySet, DEFAULT_PLAYER_CAP};
use crate::geometry::{ccw_gap, path_distance, Geometry, Maneuver, NavigationPath, PathKind, Status};
use crate::VehicleId;

/// Aggressiveness assumed for a vehicle seen for the first time.
pub const INITIAL_ESTIMATE: f64 = 0.5;

/// Tunables of the decision process.
#[derive(Clone, Debug, PartialEq)]
pub struct AgentParams {
    /// Candidate aggressiveness values 𝒲 for the estimator.
    pub weight_grid: Vec<f64>,
    /// Positional error (m) above which a prediction counts as wrong.
    pub epsilon_dev: f64,
    /// Radial excess (m) over `r_in` that signals a vehicle steering out.
    pub epsilon_r: f64,
    pub deadlock_probability: f64,
    pub deadlock_accel: f64,
    /// Speeds below this count as stopped for the deadlock rule.
    pub stopped_speed: f64,
    /// Let the observer keep its own weight in the estimation game instead
    /// of sharing the candidate value.
    pub estimator_ego_uses_true_weight: bool,
    pub player_cap: usize,
}

impl Default for AgentParams {
    fn default() -> Self {
        AgentParams {
            weight_grid: (1..=9).map(|k| k as f64 / 10.0).collect(),
            epsilon_dev: 0.3,
            epsilon_r: 0.5,
            deadlock_probability: 0.5,
            deadlock_accel: 10.0,
            stopped_speed: 1e-6,
            estimator_ego_uses_true_weight: false,
            player_cap: DEFAULT_PLAYER_CAP,
        }
    }
}

impl AgentParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if self.weight_grid.is_empty() {
            return bad("weight grid is empty".into());
        }
        if let Some(w) = self.weight_grid.iter().find(|w| !(0.0..=1.0).contains(*w)) {
            return bad(format!("weight grid value {w} outside [0, 1]"));
        }
        if !(self.epsilon_dev >= 0.0) || !(self.epsilon_r >= 0.0) {
            return bad("epsilon_dev and epsilon_r must be non-negative".into());
        }
        if !(0.0..=1.0).contains(&self.deadlock_probability) {
            return bad("deadlock probability must lie in [0, 1]".into());
        }
        if !self.deadlock_accel.is_finite() || !(self.stopped_speed >= 0.0) {
            return bad("deadlock acceleration and stopped speed must be finite".into());
        }
        if self.player_cap < 4 {
            return bad(format!("player cap {} is below the neighbour-set size 4", self.player_cap));
        }
        Ok(())
    }
}

/// Everything a vehicle needs to decide, shared by all vehicles of a run.
#[derive(Clone, Debug)]
pub struct DecisionModel {
    pub geometry: Geometry,
    pub cost: CostParams,
    pub strategies: StrategySet,
    pub agent: AgentParams,
    /// Time step Δ in seconds.
    pub delta: f64,
}

impl DecisionModel {
    pub fn horizon(&self) -> usize {
        self.strategies.horizon()
    }

    pub fn validate(&self) -> Result<()> {
        self.cost.validate()?;
        self.agent.validate()?;
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(Error::InvalidParameter(format!("delta must be positive, got {}", self.delta)));
        }
        Ok(())
    }
}

/// The ego and the neighbours it can see at one time step.
#[derive(Clone, Debug, PartialEq)]
pub struct ObservationSet {
    pub ego: VehicleId,
    pub members: BTreeMap<VehicleId, Configuration>,
}

impl ObservationSet {
    pub fn ego_config(&self) -> &Configuration {
        &self.members[&self.ego]
    }

    pub fn others(&self) -> impl Iterator<Item = (VehicleId, &Configuration)> {
        let ego = self.ego;
        self.members.iter().filter(move |(id, _)| **id != ego).map(|(id, c)| (*id, c))
    }
}

/// Selects the ego, its two nearest vehicles ahead and the nearest behind,
/// all within distance `D`. Vehicles that are already exiting are ignored.
pub fn observe(
    world: &BTreeMap<VehicleId, Configuration>,
    ego: VehicleId,
    geometry: &Geometry,
    params: &CostParams,
) -> Result<ObservationSet> {
    let me = *world.get(&ego).ok_or(Error::UnknownPlayer(ego.0))?;
    let mut ahead: Vec<(f64, VehicleId)> = Vec::new();
    let mut behind: Option<(f64, VehicleId)> = None;
    for (&id, other) in world {
        if id == ego || other.status == Status::Exit {
            continue;
        }
        let gap = ccw_gap(me.theta, other.theta);
        if gap <= PI {
            if path_distance(&me, other, geometry) < params.d {
                ahead.push((gap, id));
            }
        } else {
            let back = ccw_gap(other.theta, me.theta);
            if path_distance(other, &me, geometry) < params.d && behind.is_none_or(|(g, _)| back < g) {
                behind = Some((back, id));
            }
        }
    }
    ahead.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut members = BTreeMap::new();
    members.insert(ego, me);
    for (_, id) in ahead.into_iter().take(2) {
        members.insert(id, world[&id]);
    }
    if let Some((_, id)) = behind {
        members.insert(id, world[&id]);
    }
    Ok(ObservationSet { ego, members })
}

/// Best guess of the path another vehicle follows, from what it looks like.
///
/// A vehicle that has exited, or is inside but drifting outwards past
/// `r_in + ε_r`, is assumed to take the next exit. Anything else is assumed to
/// keep circling (after finishing its entry if it has not entered yet).
pub fn estimate_path(
    observed: &Configuration,
    previous: Option<&Configuration>,
    geometry: &Geometry,
    params: &AgentParams,
) -> Arc<NavigationPath> {
    let steering_out = observed.status == Status::Inside
        && observed.r > geometry.r_in() + params.epsilon_r
        && previous.is_some_and(|p| observed.r > p.r);
    let p = observed.position();
    let closest = |paths: &mut dyn Iterator<Item = &Arc<NavigationPath>>| {
        let mut best: Option<(f64, &Arc<NavigationPath>)> = None;
        for path in paths {
            let d = path.project(p).1;
            if best.is_none_or(|(bd, _)| d < bd) {
                best = Some((d, path));
            }
        }
        best.expect("at least one arm").1.clone()
    };
    let ways = geometry.ways();
    if observed.status == Status::Exit || steering_out {
        closest(&mut (0..ways).map(|arm| geometry.path(PathKind::new(Maneuver::TurnRight, arm))))
    } else {
        closest(&mut (0..ways).map(|arm| geometry.circulating_path(arm)))
    }
}

/// Configuration of an observed vehicle placed on its estimated path.
pub fn locate_on(observed: &Configuration, path: &NavigationPath) -> Configuration {
    let (arclen, _) = path.project(observed.position());
    Configuration { arclen, ..*observed }
}

/// Configurations reached from `start` under `accels`; index `τ` holds the
/// state after `τ` steps, so index 0 is `start` and the result has
/// `accels.len()` entries.
pub fn predict_configs(
    start: &Configuration,
    path: &NavigationPath,
    accels: &[Acceleration],
    delta: f64,
    geometry: &Geometry,
) -> Vec<Configuration> {
    let mut out = Vec::with_capacity(accels.len());
    let mut x = *start;
    for (tau, &a) in accels.iter().enumerate() {
        out.push(x);
        if tau + 1 < accels.len() {
            x = step(geometry, path, &x, a, delta);
        }
    }
    out
}

/// What an agent expects a vehicle to do at the next step.
#[derive(Clone, Debug, PartialEq)]
pub struct Prediction {
    /// Index into Σ of the vehicle's equilibrium strategy.
    pub strategy: usize,
    pub first_accel: Acceleration,
    /// Speed change over the first step divided by Δ; differs from
    /// `first_accel` when braking would stop the vehicle within the step.
    pub implied_accel: f64,
    /// Predicted configurations for `τ = 0..h`.
    pub trajectory: Vec<Configuration>,
    /// Predicted configuration one step later.
    pub next: Configuration,
}

/// What an agent believes about one vehicle.
#[derive(Clone, Debug, PartialEq)]
pub struct EstimateEntry {
    pub est_agg: f64,
    pub est_path: Arc<NavigationPath>,
    /// Prediction made at the latest decision, if the vehicle took part.
    pub prediction: Option<Prediction>,
}

/// Per-agent beliefs keyed by vehicle id; always contains the agent itself.
#[derive(Clone, Debug, PartialEq)]
pub struct EstimateTable {
    ego: VehicleId,
    entries: BTreeMap<VehicleId, EstimateEntry>,
}

impl EstimateTable {
    /// A table holding only the agent's own, true, values.
    pub fn new(ego: VehicleId, w_agg: f64, path: Arc<NavigationPath>) -> Self {
        let mut entries = BTreeMap::new();
        entries.insert(
            ego,
            EstimateEntry {
                est_agg: w_agg,
                est_path: path,
                prediction: None,
            },
        );
        EstimateTable { ego, entries }
    }

    pub fn ego(&self) -> VehicleId {
        self.ego
    }

    pub fn get(&self, id: VehicleId) -> Option<&EstimateEntry> {
        self.entries.get(&id)
    }

    pub fn est_agg(&self, id: VehicleId) -> Option<f64> {
        self.entries.get(&id).map(|e| e.est_agg)
    }

    pub fn iter(&self) -> impl Iterator<Item = (VehicleId, &EstimateEntry)> {
        self.entries.iter().map(|(k, v)| (*k, v))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Adds every newly seen neighbour with the initial estimate and a path guess.
pub fn init_estimates(
    table: &mut EstimateTable,
    observations: &ObservationSet,
    previous: Option<&ObservationSet>,
    geometry: &Geometry,
    params: &AgentParams,
) {
    for (id, config) in observations.others() {
        table.entries.entry(id).or_insert_with(|| {
            let prev = previous.and_then(|p| p.members.get(&id));
            EstimateEntry {
                est_agg: INITIAL_ESTIMATE,
                est_path: estimate_path(config, prev, geometry, params),
                prediction: None,
            }
        });
    }
}

/// Outcome of one call to [`decide`].
#[derive(Clone, Debug, PartialEq)]
pub struct Decision {
    pub control: Acceleration,
    /// Decision order used for the game.
    pub players: Vec<VehicleId>,
    /// Equilibrium strategies of the other players.
    pub predictions: BTreeMap<VehicleId, Prediction>,
}

struct Trajectories {
    /// `by_player[k][s]` is player `k`'s trajectory under strategy `s`.
    by_player: Vec<Vec<Vec<Configuration>>>,
}

fn trajectories(
    starts: &[(Configuration, &NavigationPath)],
    model: &DecisionModel,
) -> Trajectories {
    let by_player = starts
        .iter()
        .map(|(x, path)| {
            model
                .strategies
                .iter()
                .map(|s| predict_configs(x, path, s.accels(), model.delta, &model.geometry))
                .collect()
        })
        .collect();
    Trajectories { by_player }
}

fn discounted_payoff<'a>(
    trajs: &'a Trajectories,
    weights: &'a [f64],
    model: &'a DecisionModel,
) -> impl FnMut(&[usize], &mut [f64]) + 'a {
    let n = weights.len();
    let h = model.horizon();
    let mut configs: Vec<Configuration> = Vec::with_capacity(n);
    move |profile: &[usize], costs: &mut [f64]| {
        costs.fill(0.0);
        let mut discount = 1.0;
        for tau in 0..h {
            configs.clear();
            configs.extend((0..n).map(|k| trajs.by_player[k][profile[k]][tau]));
            for k in 0..n {
                costs[k] += discount * step_cost_indexed(k, &configs, weights[k], &model.geometry, &model.cost);
            }
            discount *= model.cost.lambda;
        }
    }
}

fn next_config(model: &DecisionModel, start: &Configuration, path: &NavigationPath, a: Acceleration) -> Configuration {
    step(&model.geometry, path, start, a, model.delta)
}

/// Solves the game over the neighbour set and returns the ego's control
/// together with what the ego expects every neighbour to do.
///
/// The ego plays with its true weight and path; every other player is
/// modelled with its estimated aggressiveness and path.
pub fn decide(observations: &ObservationSet, table: &EstimateTable, model: &DecisionModel) -> Result<Decision> {
    let ego = observations.ego;
    let mut estimates = BTreeMap::new();
    for &id in observations.members.keys() {
        let entry = table.get(id).ok_or(Error::UnknownPlayer(id.0))?;
        estimates.insert(id, entry.est_agg);
    }
    let players = order_players(&estimates);
    let starts: Vec<(Configuration, &NavigationPath)> = players
        .iter()
        .map(|id| {
            let path: &NavigationPath = &table.entries[id].est_path;
            let observed = &observations.members[id];
            let x = if *id == ego { *observed } else { locate_on(observed, path) };
            (x, path)
        })
        .collect();
    let weights: Vec<f64> = players.iter().map(|id| estimates[id]).collect();
    let trajs = trajectories(&starts, model);
    let payoff = discounted_payoff(&trajs, &weights, model);
    let mut game = SequentialGame::new(players.clone(), &model.strategies, payoff)?;
    let eq = solve_backward_induction(&mut game, model.agent.player_cap)?;

    let mut control = Acceleration(0.0);
    let mut predictions = BTreeMap::new();
    for (k, &id) in players.iter().enumerate() {
        let s = eq.choices[k];
        let first = model.strategies.get(s).first();
        if id == ego {
            control = first;
        } else {
            let (start, path) = &starts[k];
            let next = next_config(model, start, path, first);
            predictions.insert(
                id,
                Prediction {
                    strategy: s,
                    first_accel: first,
                    implied_accel: observed_accel(start, &next, model.delta),
                    trajectory: trajs.by_player[k][s].clone(),
                    next,
                },
            );
        }
    }
    Ok(Decision {
        control,
        players,
        predictions,
    })
}

/// Records the predictions of `decision` in `table`, dropping older ones.
pub fn store_predictions(table: &mut EstimateTable, decision: &Decision) {
    for (id, entry) in table.entries.iter_mut() {
        entry.prediction = decision.predictions.get(id).cloned();
    }
}

/// Vehicles whose observed position strayed more than `ε_dev` from the
/// position predicted for them.
pub fn deviating(table: &EstimateTable, observed: &ObservationSet, params: &AgentParams) -> Vec<VehicleId> {
    table
        .iter()
        .filter(|(id, _)| *id != table.ego)
        .filter_map(|(id, entry)| {
            let pred = entry.prediction.as_ref()?;
            let seen = observed.members.get(&id)?;
            (pred.next.position().distance(seen.position()) > params.epsilon_dev).then_some(id)
        })
        .collect()
}

/// Acceleration seen by an observer between two consecutive configurations.
pub fn observed_accel(before: &Configuration, after: &Configuration, delta: f64) -> f64 {
    (after.v - before.v) / delta
}

/// Acceleration, as an observer would measure it, that `other` realizes in the
/// two-player game with the ego under the given weights.
fn implied_accel(
    players: &[VehicleId],
    other_pos: usize,
    starts: &[(Configuration, &NavigationPath)],
    trajs: &Trajectories,
    weights: &[f64],
    model: &DecisionModel,
) -> Result<f64> {
    let payoff = discounted_payoff(trajs, weights, model);
    let mut game = SequentialGame::new(players.to_vec(), &model.strategies, payoff)?;
    let eq = solve_backward_induction(&mut game, model.agent.player_cap)?;
    let (start, path) = &starts[other_pos];
    let next = next_config(model, start, path, model.strategies.get(eq.choices[other_pos]).first());
    Ok(observed_accel(start, &next, model.delta))
}

/// Revises aggressiveness and path estimates from the observations at `t + 1`.
///
/// Only vehicles whose last prediction was off by more than `ε_dev` are
/// revised. For each candidate `w` in the grid the two-player game between
/// the ego and that vehicle is replayed at time `t`, and the `w` whose implied
/// acceleration best matches the observed one is kept. Both accelerations are
/// speed changes over one step, so a stopped vehicle that "brakes" reads as
/// zero. Returns the revised ids.
pub fn update_estimates(
    table: &mut EstimateTable,
    previous: &ObservationSet,
    current: &ObservationSet,
    model: &DecisionModel,
) -> Result<Vec<VehicleId>> {
    let ego = table.ego;
    let revised = deviating(table, current, &model.agent);
    let ego_w = table.entries[&ego].est_agg;
    let ego_path = table.entries[&ego].est_path.clone();
    let ego_then = *previous.members.get(&ego).ok_or(Error::UnknownPlayer(ego.0))?;
    for &j in &revised {
        let (Some(then), Some(now)) = (previous.members.get(&j), current.members.get(&j)) else {
            continue;
        };
        let path = estimate_path(now, Some(then), &model.geometry, &model.agent);
        let prior = table.entries[&j].est_agg;
        let order: BTreeMap<_, _> = [(ego, ego_w), (j, prior)].into();
        let players = order_players(&order);
        let other_pos = players.iter().position(|&p| p == j).expect("j is a player");
        let starts: Vec<(Configuration, &NavigationPath)> = players
            .iter()
            .map(|&id| {
                if id == ego {
                    (ego_then, &*ego_path)
                } else {
                    (locate_on(then, &path), &*path)
                }
            })
            .collect();
        let trajs = trajectories(&starts, model);
        let observed = observed_accel(then, now, model.delta);

        let mut best: Option<(f64, f64)> = None; // (error, w)
        for &w in &model.agent.weight_grid {
            let weights: Vec<f64> = players
                .iter()
                .map(|&id| {
                    if id == ego && model.agent.estimator_ego_uses_true_weight {
                        ego_w
                    } else {
                        w
                    }
                })
                .collect();
            let err = (implied_accel(&players, other_pos, &starts, &trajs, &weights, model)? - observed).abs();
            let wins = match best {
                None => true,
                Some((be, bw)) => match err.total_cmp(&be) {
                    std::cmp::Ordering::Less => true,
                    std::cmp::Ordering::Greater => false,
                    std::cmp::Ordering::Equal => {
                        let (dn, db) = ((w - prior).abs(), (bw - prior).abs());
                        dn < db || (dn == db && w < bw)
                    }
                },
            };
            if wins {
                best = Some((err, w));
            }
        }
        let entry = table.entries.get_mut(&j).expect("revised ids come from the table");
        entry.est_agg = best.expect("weight grid is non-empty").1;
        entry.est_path = path;
    }
    Ok(revised)
}

/// Whether every observed vehicle, the ego included, is at rest.
pub fn all_stopped(observations: &ObservationSet, params: &AgentParams) -> bool {
    observations.members.values().all(|c| c.v < params.stopped_speed)
}

/// Forced acceleration that breaks a standstill, given a uniform draw.
///
/// An ego waiting to enter while a neighbour is inside keeps waiting.
pub fn deadlock_override(observations: &ObservationSet, draw: f64, params: &AgentParams) -> Option<Acceleration> {
    let waiting = observations.ego_config().status == Status::Enter
        && observations.others().any(|(_, c)| c.status == Status::Inside);
    (draw < params.deadlock_probability && !waiting).then_some(Acceleration(params.deadlock_accel))
}

/// Result of one agent step.
#[derive(Clone, Debug, PartialEq)]
pub struct Action {
    pub control: Acceleration,
    pub overridden: bool,
    pub decision: Decision,
    /// Vehicles whose estimates were revised at this step.
    pub revised: Vec<VehicleId>,
}

/// A vehicle running the decision loop.
#[derive(Clone, Debug)]
pub struct Agent {
    id: VehicleId,
    w_agg: f64,
    path: Arc<NavigationPath>,
    table: EstimateTable,
    last_observation: Option<ObservationSet>,
    rng: ChaCha8Rng,
}

impl Agent {
    /// `seed` is the run seed; each vehicle draws from its own stream.
    pub fn new(id: VehicleId, w_agg: f64, path: Arc<NavigationPath>, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(u64::from(id.0) + 1);
        Agent {
            id,
            w_agg,
            table: EstimateTable::new(id, w_agg, path.clone()),
            path,
            last_observation: None,
            rng,
        }
    }

    pub fn id(&self) -> VehicleId {
        self.id
    }

    pub fn w_agg(&self) -> f64 {
        self.w_agg
    }

    pub fn path(&self) -> &Arc<NavigationPath> {
        &self.path
    }

    pub fn estimates(&self) -> &EstimateTable {
        &self.table
    }

    /// Observes `world`, refreshes beliefs and chooses this step's control.
    pub fn act(&mut self, world: &BTreeMap<VehicleId, Configuration>, model: &DecisionModel) -> Result<Action> {
        let obs = observe(world, self.id, &model.geometry, &model.cost)?;
        let revised = match &self.last_observation {
            Some(prev) => update_estimates(&mut self.table, prev, &obs, model)?,
            None => Vec::new(),
        };
        init_estimates(
            &mut self.table,
            &obs,
            self.last_observation.as_ref(),
            &model.geometry,
            &model.agent,
        );
        let decision = decide(&obs, &self.table, model)?;
        store_predictions(&mut self.table, &decision);
        let mut control = decision.control;
        let mut overridden = false;
        if all_stopped(&obs, &model.agent) {
            let draw: f64 = self.rng.gen();
            if let Some(a) = deadlock_override(&obs, draw, &model.agent) {
                control = a;
                overridden = true;
            }
        }
        self.last_observation = Some(obs);
        Ok(Action {
            control,
            overridden,
            decision,
            revised,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_roundabout, RoundaboutSpec};
    use approx::assert_relative_eq;

    fn model() -> DecisionModel {
        DecisionModel {
            geometry: build_roundabout(RoundaboutSpec::default()).unwrap(),
            cost: CostParams::default(),
            strategies: StrategySet::default_alphabet(4),
            agent: AgentParams::default(),
            delta: 0.25,
        }
    }

    fn inside(theta: f64, v: f64) -> Configuration {
        Configuration::new(20.0, theta, v, Status::Inside, 0.0)
    }

    fn world(cs: &[Configuration]) -> BTreeMap<VehicleId, Configuration> {
        cs.iter().enumerate().map(|(k, c)| (VehicleId(k as u32 + 1), *c)).collect()
    }

    #[test]
    fn lone_vehicle_sees_itself() {
        let m = model();
        let w = world(&[inside(0.0, 5.0)]);
        let obs = observe(&w, VehicleId(1), &m.geometry, &m.cost).unwrap();
        assert_eq!(obs.members.len(), 1);
    }

    #[test]
    fn keeps_two_ahead_and_one_behind() {
        let m = model();
        let w = world(&[
            inside(0.0, 5.0),
            inside(0.3, 5.0),
            inside(0.6, 5.0),
            inside(0.9, 5.0),
            inside(-0.4, 5.0),
            inside(-0.8, 5.0),
        ]);
        let obs = observe(&w, VehicleId(1), &m.geometry, &m.cost).unwrap();
        let ids: Vec<u32> = obs.members.keys().map(|k| k.0).collect();
        assert_eq!(ids, vec![1, 2, 3, 5]);
    }

    #[test]
    fn horizon_filters_far_vehicles() {
        let m = model();
        // 31 m behind along the circle
        let w = world(&[inside(0.0, 5.0), inside(-31.0 / 20.0, 5.0)]);
        let obs = observe(&w, VehicleId(1), &m.geometry, &m.cost).unwrap();
        assert_eq!(obs.members.len(), 1);
        assert!(observe(&w, VehicleId(9), &m.geometry, &m.cost).is_err());
    }

    #[test]
    fn path_guesses() {
        let m = model();
        let p = &m.agent;
        let x = inside(0.3, 5.0);
        assert!(estimate_path(&x, None, &m.geometry, p).kind().is_none());

        let exit = m.geometry.path(PathKind::new(Maneuver::TurnRight, 1)).clone();
        let s = exit.exit_start().unwrap() + 3.0;
        let x = Configuration::on_path(&exit, s, 5.0).unwrap();
        assert_eq!(x.status, Status::Exit);
        assert_eq!(estimate_path(&x, None, &m.geometry, p).kind(), Some(PathKind::new(Maneuver::TurnRight, 1)));

        let entry = m.geometry.circulating_path(2).clone();
        let x = Configuration::on_path(&entry, 5.0, 5.0).unwrap();
        let guess = estimate_path(&x, None, &m.geometry, p);
        assert_eq!(guess.route(), entry.route());
    }

    #[test]
    fn steering_out_needs_outward_trend() {
        let m = model();
        let exit = m.geometry.path(PathKind::new(Maneuver::GoStraight, 0)).clone();
        let start = exit.exit_start().unwrap();
        // on the exit connector but still labelled inside
        let prev = Configuration::on_path(&exit, start - 3.0, 5.0).unwrap();
        let now = Configuration::on_path(&exit, start - 1.0, 5.0).unwrap();
        assert_eq!(now.status, Status::Inside);
        assert!(now.r > 20.5);
        assert!(estimate_path(&now, Some(&prev), &m.geometry, &m.agent).kind().is_some());
        assert!(estimate_path(&now, None, &m.geometry, &m.agent).kind().is_none());
    }

    #[test]
    fn prediction_recursion() {
        let m = model();
        let path = m.geometry.circulating_path(0).clone();
        let mut x = Configuration::on_path(&path, path.total_enter_len() + 30.0, 8.0).unwrap();
        x.status = Status::Inside;
        let accels: Vec<Acceleration> = [10.0, 0.0, 0.0, 0.0].map(Acceleration).to_vec();
        let traj = predict_configs(&x, &path, &accels, 0.25, &m.geometry);
        assert_eq!(traj.len(), 4);
        assert_eq!(traj[0], x);
        assert_eq!(traj[1].v, 10.5);
        assert_relative_eq!(crate::geometry::wrap_angle(traj[1].theta - x.theta), 0.115625, epsilon = 1e-12);
        assert_eq!(predict_configs(&x, &path, &accels[..1], 0.25, &m.geometry), vec![x]);
        let rest = Configuration { v: 0.0, ..x };
        let zeros = vec![Acceleration(0.0); 4];
        assert_eq!(predict_configs(&rest, &path, &zeros, 0.25, &m.geometry), vec![rest; 4]);
    }

    #[test]
    fn lone_slow_vehicle_accelerates_hard() {
        let m = model();
        let path = m.geometry.circulating_path(0).clone();
        let mut x = Configuration::on_path(&path, path.total_enter_len() + 30.0, 2.0).unwrap();
        x.status = Status::Inside;
        let w: BTreeMap<_, _> = [(VehicleId(1), x)].into();
        let obs = observe(&w, VehicleId(1), &m.geometry, &m.cost).unwrap();
        let table = EstimateTable::new(VehicleId(1), 0.5, path);
        let d = decide(&obs, &table, &m).unwrap();
        assert_eq!(d.control, Acceleration(30.0));
        assert!(d.predictions.is_empty());
    }

    #[test]
    fn entering_vehicle_yields_to_circulating_traffic() {
        let m = model();
        let g = &m.geometry;
        let entry = g.path(PathKind::new(Maneuver::GoStraight, 0)).clone();
        // ego on its approach, a little over D_en from the circle radially
        let mut s = 0.0;
        while Configuration::on_path(&entry, s, 6.0).unwrap().r > 31.5 {
            s += 0.05;
        }
        let ego = Configuration::on_path(&entry, s, 6.0).unwrap();
        // circulating vehicle about to pass the entrance
        let other = Configuration::new(20.0, ego.theta - 0.2, 8.0, Status::Inside, 0.0);
        let w: BTreeMap<_, _> = [(VehicleId(1), ego), (VehicleId(2), other)].into();
        let obs = observe(&w, VehicleId(1), g, &m.cost).unwrap();
        assert!(obs.members.contains_key(&VehicleId(2)));
        let mut table = EstimateTable::new(VehicleId(1), 0.5, entry);
        init_estimates(&mut table, &obs, None, g, &m.agent);
        let d = decide(&obs, &table, &m).unwrap();
        assert!(d.control.0 < 0.0, "control {:?}", d.control);
    }

    #[test]
    fn symmetric_ties_follow_id_order() {
        let m = model();
        let w = world(&[inside(0.0, 5.0), inside(1.0, 5.0)]);
        let obs = observe(&w, VehicleId(1), &m.geometry, &m.cost).unwrap();
        let path = m.geometry.circulating_path(0).clone();
        let mut table = EstimateTable::new(VehicleId(1), 0.5, path);
        init_estimates(&mut table, &obs, None, &m.geometry, &m.agent);
        let a = decide(&obs, &table, &m).unwrap();
        let b = decide(&obs, &table, &m).unwrap();
        assert_eq!(a.players, vec![VehicleId(1), VehicleId(2)]);
        assert_eq!(a, b);
    }

    #[test]
    fn accurate_predictions_leave_estimates_alone() {
        let m = model();
        let w0 = world(&[inside(0.0, 5.0), inside(1.0, 5.0)]);
        let obs0 = observe(&w0, VehicleId(1), &m.geometry, &m.cost).unwrap();
        let path = m.geometry.circulating_path(0).clone();
        let mut table = EstimateTable::new(VehicleId(1), 0.5, path);
        init_estimates(&mut table, &obs0, None, &m.geometry, &m.agent);
        let d = decide(&obs0, &table, &m).unwrap();
        store_predictions(&mut table, &d);
        let mut w1 = w0.clone();
        w1.insert(VehicleId(2), d.predictions[&VehicleId(2)].next);
        let obs1 = observe(&w1, VehicleId(1), &m.geometry, &m.cost).unwrap();
        let before = table.clone();
        assert!(update_estimates(&mut table, &obs0, &obs1, &m).unwrap().is_empty());
        assert_eq!(table, before);
    }

    #[test]
    fn deadlock_rule() {
        let p = AgentParams::default();
        let obs = |ego: Status, other: Status| ObservationSet {
            ego: VehicleId(1),
            members: [
                (VehicleId(1), Configuration::new(30.0, 0.0, 0.0, ego, 0.0)),
                (VehicleId(2), Configuration::new(20.0, 0.5, 0.0, other, 0.0)),
            ]
            .into(),
        };
        assert_eq!(deadlock_override(&obs(Status::Inside, Status::Inside), 0.3, &p), Some(Acceleration(10.0)));
        assert_eq!(deadlock_override(&obs(Status::Enter, Status::Inside), 0.0, &p), None);
        assert_eq!(deadlock_override(&obs(Status::Inside, Status::Inside), 0.7, &p), None);
        assert!(all_stopped(&obs(Status::Enter, Status::Enter), &p));
    }

    #[test]
    fn agent_streams_differ_per_vehicle() {
        let m = model();
        let path = m.geometry.circulating_path(0).clone();
        let mut a = Agent::new(VehicleId(1), 0.5, path.clone(), 7);
        let mut b = Agent::new(VehicleId(2), 0.5, path, 7);
        let xa: f64 = a.rng.gen();
        let xb: f64 = b.rng.gen();
        assert_ne!(xa, xb);
    }
}
