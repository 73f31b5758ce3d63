//! World state, the synchronous stepping loop, collision detection and
//! per-run metrics.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::agent::{Agent, DecisionModel};
use crate::dynamics::{step, Acceleration, Configuration};
use crate::error::{Error, Result};
use crate::geometry::{Maneuver, NavigationPath, PathKind, Point, Status, OCCUPANCY_DIAMETER};
use crate::VehicleId;

/// True aggressiveness values drawn for spawned vehicles.
pub const AGGRESSIVENESS_CHOICES: [f64; 7] = [0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8];

/// Run-level settings.
#[derive(Clone, Debug, PartialEq)]
pub struct SimParams {
    pub max_steps: usize,
    /// Arc length along the approach of the front spawn slot of each arm.
    pub spawn_arclen: f64,
    /// Gap between consecutive spawn slots on one arm.
    pub spawn_spacing: f64,
    /// Extra setback of every slot on arm `k`, `k · arm_stagger` meters.
    pub arm_stagger: f64,
    pub vehicles_per_arm: usize,
    /// Extra distance past the status threshold after which an exited
    /// vehicle leaves the world.
    pub removal_margin: f64,
}

impl Default for SimParams {
    fn default() -> Self {
        SimParams {
            max_steps: 400,
            spawn_arclen: 36.0,
            spawn_spacing: 10.0,
            arm_stagger: 0.0,
            vehicles_per_arm: 2,
            removal_margin: 5.0,
        }
    }
}

impl SimParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.spawn_spacing < OCCUPANCY_DIAMETER {
            return bad(format!("spawn spacing {} is below the vehicle diameter", self.spawn_spacing));
        }
        if self.vehicles_per_arm == 0 {
            return bad("vehicles_per_arm must be positive".into());
        }
        let rear = self.spawn_arclen - self.spawn_spacing * (self.vehicles_per_arm - 1) as f64;
        if !(self.arm_stagger >= 0.0) {
            return bad("arm stagger must be non-negative".into());
        }
        if !(rear >= 0.0) {
            return bad(format!("spawn slots reach behind the approach start (rear slot at {rear})"));
        }
        if !(self.removal_margin >= 0.0) {
            return bad("removal margin must be non-negative".into());
        }
        Ok(())
    }
}

/// Initial state of one vehicle.
#[derive(Clone, Debug)]
pub struct VehicleSpec {
    pub id: VehicleId,
    pub path: Arc<NavigationPath>,
    pub arclen: f64,
    pub v: f64,
    pub w_agg: f64,
}

#[derive(Clone, Debug)]
struct Vehicle {
    path: Arc<NavigationPath>,
    config: Configuration,
    agent: Agent,
    removed: bool,
}

/// A run in progress: the shared decision model and every vehicle.
#[derive(Clone, Debug)]
pub struct World {
    model: Arc<DecisionModel>,
    params: SimParams,
    seed: u64,
    vehicles: BTreeMap<VehicleId, Vehicle>,
}

impl World {
    /// A world holding exactly the given vehicles.
    pub fn from_vehicles(model: Arc<DecisionModel>, params: SimParams, seed: u64, specs: Vec<VehicleSpec>) -> Result<Self> {
        let mut vehicles = BTreeMap::new();
        for spec in specs {
            let config = Configuration::on_path(&spec.path, spec.arclen, spec.v)?;
            let agent = Agent::new(spec.id, spec.w_agg, spec.path.clone(), seed);
            let vehicle = Vehicle {
                path: spec.path,
                config,
                agent,
                removed: false,
            };
            if vehicles.insert(spec.id, vehicle).is_some() {
                return Err(Error::InvalidParameter(format!("duplicate vehicle id {}", spec.id)));
            }
        }
        Ok(World {
            model,
            params,
            seed,
            vehicles,
        })
    }

    pub fn model(&self) -> &DecisionModel {
        &self.model
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Configurations of the vehicles still in the world.
    pub fn configurations(&self) -> BTreeMap<VehicleId, Configuration> {
        self.vehicles
            .iter()
            .filter(|(_, v)| !v.removed)
            .map(|(id, v)| (*id, v.config))
            .collect()
    }

    /// True aggressiveness of every vehicle.
    pub fn aggressiveness(&self) -> BTreeMap<VehicleId, f64> {
        self.vehicles.iter().map(|(id, v)| (*id, v.agent.w_agg())).collect()
    }

    pub fn path_of(&self, id: VehicleId) -> Option<&Arc<NavigationPath>> {
        self.vehicles.get(&id).map(|v| &v.path)
    }
}

/// Places `n` vehicles round-robin over the arms and draws their manoeuvre,
/// initial speed and aggressiveness from a generator seeded with `seed`.
pub fn init_scenario(n: usize, seed: u64, model: Arc<DecisionModel>, params: SimParams) -> Result<World> {
    params.validate()?;
    let ways = model.geometry.ways();
    let capacity = ways * params.vehicles_per_arm;
    let rear = params.spawn_arclen
        - params.spawn_spacing * (params.vehicles_per_arm - 1) as f64
        - params.arm_stagger * (ways - 1) as f64;
    if rear < 0.0 {
        return Err(Error::InvalidParameter(format!("spawn slots reach behind the approach start (rear slot at {rear})")));
    }
    if n > capacity {
        return Err(Error::Capacity { requested: n, capacity });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut specs = Vec::with_capacity(n);
    for k in 0..n {
        let arm = k % ways;
        let slot = k / ways;
        let maneuver = *Maneuver::ALL.choose(&mut rng).expect("non-empty");
        let v = rng.gen_range(0.0..=model.cost.v_l);
        let w_agg = *AGGRESSIVENESS_CHOICES.choose(&mut rng).expect("non-empty");
        specs.push(VehicleSpec {
            id: VehicleId(k as u32 + 1),
            path: model.geometry.path(PathKind::new(maneuver, arm)).clone(),
            arclen: params.spawn_arclen - slot as f64 * params.spawn_spacing - arm as f64 * params.arm_stagger,
            v,
            w_agg,
        });
    }
    World::from_vehicles(model, params, seed, specs)
}

/// First pair of vehicles, in id order, whose centres are closer than the
/// vehicle diameter.
pub fn detect_collision(configs: &BTreeMap<VehicleId, Configuration>) -> Option<(VehicleId, VehicleId)> {
    let items: Vec<(VehicleId, Point)> = configs.iter().map(|(id, c)| (*id, c.position())).collect();
    for (k, (a, pa)) in items.iter().enumerate() {
        for (b, pb) in &items[k + 1..] {
            if pa.distance(*pb) < OCCUPANCY_DIAMETER {
                return Some((*a, *b));
            }
        }
    }
    None
}

/// One vehicle at one recorded step.
#[derive(Clone, Debug, PartialEq)]
pub struct VehicleRecord {
    pub id: VehicleId,
    pub config: Configuration,
    /// Acceleration applied from this step to the next; `None` on the final step.
    pub accel: Option<Acceleration>,
    pub overridden: bool,
    /// Estimated aggressiveness of every vehicle in the agent's table,
    /// including its own true value.
    pub estimates: Vec<(VehicleId, f64)>,
    /// Accelerations this vehicle predicted its neighbours would realize over
    /// the next step.
    pub predictions: Vec<(VehicleId, f64)>,
}

/// All vehicles present at one step.
#[derive(Clone, Debug, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    pub vehicles: Vec<VehicleRecord>,
}

/// How a run ended.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    AllExited,
    Collision(VehicleId, VehicleId),
    /// Stopped by the step limit.
    Censored,
}

/// Complete record of one run.
#[derive(Clone, Debug, PartialEq)]
pub struct SimTrace {
    pub seed: u64,
    pub delta: f64,
    pub steps: Vec<StepRecord>,
    /// True aggressiveness per vehicle.
    pub aggressiveness: BTreeMap<VehicleId, f64>,
    pub outcome: Outcome,
}

fn cruise(config: &Configuration, model: &DecisionModel) -> Acceleration {
    let gap = (model.cost.v_l - config.v) / model.delta;
    Acceleration(gap.clamp(0.0, 10.0))
}

/// Runs the world until every vehicle has left, a collision happens or
/// `max_steps` steps have elapsed.
///
/// Every vehicle that has not exited decides on the same snapshot; all
/// controls are then applied at once. Exited vehicles no longer take part in
/// the game and simply speed up to the limit.
pub fn run(mut world: World) -> Result<SimTrace> {
    let model = world.model.clone();
    let removal_radius = model.geometry.status_threshold() + world.params.removal_margin;
    let aggressiveness = world.aggressiveness();
    let mut steps = Vec::new();
    let mut t = 0;
    let outcome = loop {
        let snapshot = world.configurations();
        let mut record = StepRecord {
            step: t,
            vehicles: Vec::with_capacity(snapshot.len()),
        };
        let stop = if let Some((a, b)) = detect_collision(&snapshot) {
            Some(Outcome::Collision(a, b))
        } else if snapshot.values().all(|c| c.status == Status::Exit) {
            Some(Outcome::AllExited)
        } else if t >= world.params.max_steps {
            Some(Outcome::Censored)
        } else {
            None
        };
        if let Some(outcome) = stop {
            for (id, config) in &snapshot {
                let agent = &world.vehicles[id].agent;
                record.vehicles.push(VehicleRecord {
                    id: *id,
                    config: *config,
                    accel: None,
                    overridden: false,
                    estimates: agent.estimates().iter().map(|(k, e)| (k, e.est_agg)).collect(),
                    predictions: Vec::new(),
                });
            }
            steps.push(record);
            break outcome;
        }

        let mut controls = Vec::with_capacity(snapshot.len());
        for (id, config) in &snapshot {
            let vehicle = world.vehicles.get_mut(id).expect("snapshot ids exist");
            let (control, overridden, predictions) = if config.status == Status::Exit {
                (cruise(config, &model), false, Vec::new())
            } else {
                let action = vehicle.agent.act(&snapshot, &model)?;
                let predictions = action
                    .decision
                    .predictions
                    .iter()
                    .map(|(j, p)| (*j, p.implied_accel))
                    .collect();
                (action.control, action.overridden, predictions)
            };
            controls.push((*id, control));
            record.vehicles.push(VehicleRecord {
                id: *id,
                config: *config,
                accel: Some(control),
                overridden,
                estimates: vehicle.agent.estimates().iter().map(|(k, e)| (k, e.est_agg)).collect(),
                predictions,
            });
        }
        steps.push(record);

        for (id, a) in controls {
            let vehicle = world.vehicles.get_mut(&id).expect("controlled ids exist");
            vehicle.config = step(&model.geometry, &vehicle.path, &vehicle.config, a, model.delta);
            if vehicle.config.status == Status::Exit && vehicle.config.r > removal_radius {
                vehicle.removed = true;
            }
        }
        t += 1;
    };
    Ok(SimTrace {
        seed: world.seed,
        delta: model.delta,
        steps,
        aggressiveness,
        outcome,
    })
}

/// Position and status of one vehicle at one time, the input to [`RunMetrics`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StateSample {
    /// Time in seconds.
    pub t: f64,
    pub id: VehicleId,
    pub r: f64,
    pub theta: f64,
    pub status: Status,
}

/// Safety and speed figures of one run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunMetrics {
    /// Smallest centre distance between two vehicles present at the same
    /// time; `None` when no two vehicles ever coexist.
    pub min_distance: Option<f64>,
    pub collided: bool,
    /// Some vehicle never reached the exit without a collision.
    pub censored: bool,
    /// Time until each vehicle first reached `exit` status.
    pub mission_times: BTreeMap<VehicleId, f64>,
    pub mean_mission_time: Option<f64>,
    /// Mean true aggressiveness of the vehicles in the run.
    pub mean_aggressiveness: Option<f64>,
}

impl RunMetrics {
    /// Metrics from samples ordered by time, then id.
    pub fn from_samples(samples: &[StateSample], aggressiveness: &BTreeMap<VehicleId, f64>) -> Self {
        let mut min_distance: Option<f64> = None;
        let mut mission_times = BTreeMap::new();
        for group in samples.chunk_by(|a, b| a.t == b.t) {
            let points: Vec<Point> = group.iter().map(|s| Point::from_polar(s.r, s.theta)).collect();
            for (k, p) in points.iter().enumerate() {
                for q in &points[k + 1..] {
                    let d = p.distance(*q);
                    min_distance = Some(min_distance.map_or(d, |m| m.min(d)));
                }
            }
            for s in group {
                if s.status == Status::Exit {
                    mission_times.entry(s.id).or_insert(s.t);
                }
            }
        }
        let collided = min_distance.is_some_and(|d| d < OCCUPANCY_DIAMETER);
        let censored = !collided && aggressiveness.keys().any(|id| !mission_times.contains_key(id));
        let mean = |xs: Vec<f64>| (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64);
        RunMetrics {
            min_distance,
            collided,
            censored,
            mean_mission_time: mean(mission_times.values().copied().collect()),
            mission_times,
            mean_aggressiveness: mean(aggressiveness.values().copied().collect()),
        }
    }
}

impl SimTrace {
    pub fn samples(&self) -> Vec<StateSample> {
        self.steps
            .iter()
            .flat_map(|s| {
                let t = s.step as f64 * self.delta;
                s.vehicles.iter().map(move |v| StateSample {
                    t,
                    id: v.id,
                    r: v.config.r,
                    theta: v.config.theta,
                    status: v.config.status,
                })
            })
            .collect()
    }

    pub fn metrics(&self) -> RunMetrics {
        RunMetrics::from_samples(&self.samples(), &self.aggressiveness)
    }

    /// Mean absolute error between the accelerations vehicles predicted for
    /// their neighbours and the speed changes those neighbours then showed,
    /// per step that has at least one prediction.
    pub fn prediction_errors(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for pair in self.steps.windows(2) {
            let (now, next) = (&pair[0], &pair[1]);
            let speed = |s: &StepRecord| -> BTreeMap<VehicleId, f64> {
                s.vehicles.iter().map(|v| (v.id, v.config.v)).collect()
            };
            let (v0, v1) = (speed(now), speed(next));
            let errors: Vec<f64> = now
                .vehicles
                .iter()
                .flat_map(|v| v.predictions.iter())
                .filter_map(|(j, p)| {
                    let realized = (v1.get(j)? - v0.get(j)?) / self.delta;
                    Some((realized - p).abs())
                })
                .collect();
            if !errors.is_empty() {
                out.push(errors.iter().sum::<f64>() / errors.len() as f64);
            }
        }
        out
    }
}
