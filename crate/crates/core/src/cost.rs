//! Safety and speed features, the time-step cost and the discounted
//! accumulated cost used as game payoffs.
//!
//! Every function here exists in two flavours: one over a [`NeighbourView`]
//! keyed by vehicle id, and an index-based one over a slice of
//! configurations that the game payoff evaluates in its inner loop.

use std::collections::BTreeMap;

use crate::dynamics::Configuration;
use crate::error::{Error, Result};
use crate::geometry::{ccw_gap, separation, Geometry, Status};
use crate::VehicleId;

use std::f64::consts::PI;

/// Trade-off between safety and speed; `w_safe + w_agg = 1`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Weights {
    w_safe: f64,
    w_agg: f64,
}

impl Weights {
    /// Weights for aggressiveness `w_agg`, which must lie in `[0, 1]`.
    pub fn from_aggressiveness(w_agg: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&w_agg) {
            return Err(Error::InvalidParameter(format!(
                "aggressiveness must lie in [0, 1], got {w_agg}"
            )));
        }
        Ok(Weights {
            w_safe: 1.0 - w_agg,
            w_agg,
        })
    }

    pub fn w_safe(&self) -> f64 {
        self.w_safe
    }

    pub fn w_agg(&self) -> f64 {
        self.w_agg
    }
}

/// Coefficients of the cost stack.
#[derive(Clone, Debug, PartialEq)]
pub struct CostParams {
    /// Discount factor λ.
    pub lambda: f64,
    /// Penalty charged by β below a distance threshold.
    pub e_inf: f64,
    pub c: f64,
    pub c_ins: f64,
    pub c_en: f64,
    pub c_in: f64,
    pub c_o: f64,
    /// Neighbour horizon D, meters.
    pub d: f64,
    /// Entering-vehicle penalty threshold, meters.
    pub d_en: f64,
    /// Generic penalty threshold, meters.
    pub d_c: f64,
    /// Speed limit, m/s.
    pub v_l: f64,
}

impl Default for CostParams {
    fn default() -> Self {
        CostParams {
            lambda: 0.8,
            e_inf: 1e12,
            c: 10.0,
            c_ins: 1.0,
            c_en: 1.0,
            c_in: 10.0,
            c_o: 1e3,
            d: 30.0,
            d_en: 10.0,
            d_c: 6.0,
            v_l: 11.0,
        }
    }
}

impl CostParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidParameter(msg.to_string()));
        if !(self.lambda > 0.0 && self.lambda < 1.0) {
            return bad("lambda must lie in (0, 1)");
        }
        let positive = [
            ("e_inf", self.e_inf),
            ("c", self.c),
            ("c_ins", self.c_ins),
            ("c_en", self.c_en),
            ("c_in", self.c_in),
            ("c_o", self.c_o),
            ("d", self.d),
            ("d_en", self.d_en),
            ("d_c", self.d_c),
            ("v_l", self.v_l),
        ];
        for (name, value) in positive {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {value}")));
            }
        }
        if !(self.d_c < self.d_en && self.d_en < self.d) {
            return bad("thresholds must satisfy d_c < d_en < d");
        }
        if self.c_ins >= self.c {
            return bad("c_ins must be smaller than c");
        }
        if self.c_o <= self.c_in.max(self.c_en) {
            return bad("c_o must exceed c_in and c_en");
        }
        Ok(())
    }
}

/// Configurations of a subset of vehicles, seen from `ego`.
#[derive(Clone, Debug, PartialEq)]
pub struct NeighbourView {
    pub ego: VehicleId,
    pub members: BTreeMap<VehicleId, Configuration>,
}

impl NeighbourView {
    pub fn new(ego: VehicleId, members: BTreeMap<VehicleId, Configuration>) -> Result<Self> {
        if !members.contains_key(&ego) {
            return Err(Error::UnknownPlayer(ego.0));
        }
        Ok(NeighbourView { ego, members })
    }

    fn indexed(&self) -> (usize, Vec<VehicleId>, Vec<Configuration>) {
        let ids: Vec<VehicleId> = self.members.keys().copied().collect();
        let configs = self.members.values().copied().collect();
        let ego = ids.iter().position(|&id| id == self.ego).unwrap();
        (ego, ids, configs)
    }
}

/// A neighbour selected by [`front_back`] with its along-path distance.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Nearest {
    pub index: usize,
    pub distance: f64,
}

/// Nearest vehicle ahead (angular gap in `[0, π]`) and behind (in `(0, π)`),
/// each closer than `D`, by index into `configs`.
///
/// Vehicles with status `exit` play no part: they have neither neighbours
/// nor count as one.
pub fn front_back_indexed(
    ego: usize,
    configs: &[Configuration],
    geometry: &Geometry,
    params: &CostParams,
) -> (Option<Nearest>, Option<Nearest>) {
    let me = &configs[ego];
    if me.status == Status::Exit {
        return (None, None);
    }
    let r_in = geometry.r_in();
    let mut front: Option<(f64, Nearest)> = None;
    let mut back: Option<(f64, Nearest)> = None;
    for (k, other) in configs.iter().enumerate() {
        if k == ego || other.status == Status::Exit {
            continue;
        }
        let ahead = ccw_gap(me.theta, other.theta);
        if ahead <= PI {
            let d = separation(me.r, me.theta, other.r, other.theta, r_in);
            if d < params.d && front.is_none_or(|(g, _)| ahead < g) {
                front = Some((ahead, Nearest { index: k, distance: d }));
            }
        }
        let behind = ccw_gap(other.theta, me.theta);
        if behind > 0.0 && behind < PI {
            let d = separation(other.r, other.theta, me.r, me.theta, r_in);
            if d < params.d && back.is_none_or(|(g, _)| behind < g) {
                back = Some((behind, Nearest { index: k, distance: d }));
            }
        }
    }
    (front.map(|f| f.1), back.map(|b| b.1))
}

/// Ids of the nearest vehicles in front of and behind the ego.
pub fn front_back(
    view: &NeighbourView,
    geometry: &Geometry,
    params: &CostParams,
) -> (Option<VehicleId>, Option<VehicleId>) {
    let (ego, ids, configs) = view.indexed();
    let (f, b) = front_back_indexed(ego, &configs, geometry, params);
    (f.map(|n| ids[n.index]), b.map(|n| ids[n.index]))
}

/// Step penalty: `E_inf` at or below `threshold`, zero above.
pub fn beta(dist: f64, threshold: f64, params: &CostParams) -> f64 {
    if dist <= threshold {
        params.e_inf
    } else {
        0.0
    }
}

/// Cost induced by one neighbour (in front or behind) on the ego.
pub fn proximity_cost(
    ego_status: Status,
    other: Option<(Status, f64)>,
    params: &CostParams,
) -> f64 {
    let Some((other_status, d)) = other else {
        return 0.0;
    };
    let gap = params.d - d;
    match (ego_status, other_status) {
        (Status::Inside, Status::Enter) => params.c_ins * gap * gap,
        (Status::Enter, Status::Inside) => params.c * gap * gap + beta(d, params.d_en, params),
        _ => params.c * gap * gap + beta(d, params.d_c, params),
    }
}

fn phi_safe_indexed(ego: usize, configs: &[Configuration], geometry: &Geometry, params: &CostParams) -> f64 {
    let (front, back) = front_back_indexed(ego, configs, geometry, params);
    let status = configs[ego].status;
    let cost = |n: Option<Nearest>| {
        proximity_cost(status, n.map(|n| (configs[n.index].status, n.distance)), params)
    };
    cost(front).max(cost(back))
}

/// Status and distance of a neighbour.
type Seen = Option<(Status, f64)>;

fn view_nearest(view: &NeighbourView, geometry: &Geometry, params: &CostParams) -> (Seen, Seen, Status) {
    let (ego, _, configs) = view.indexed();
    let (f, b) = front_back_indexed(ego, &configs, geometry, params);
    let pick = |n: Option<Nearest>| n.map(|n| (configs[n.index].status, n.distance));
    (pick(f), pick(b), configs[ego].status)
}

pub fn phi_front(view: &NeighbourView, geometry: &Geometry, params: &CostParams) -> f64 {
    let (front, _, status) = view_nearest(view, geometry, params);
    proximity_cost(status, front, params)
}

pub fn phi_back(view: &NeighbourView, geometry: &Geometry, params: &CostParams) -> f64 {
    let (_, back, status) = view_nearest(view, geometry, params);
    proximity_cost(status, back, params)
}

pub fn phi_safe(view: &NeighbourView, geometry: &Geometry, params: &CostParams) -> f64 {
    phi_front(view, geometry, params).max(phi_back(view, geometry, params))
}

/// Speed feature: quadratic in the shortfall (or excess) against the limit.
pub fn phi_speed(ego: &Configuration, params: &CostParams) -> f64 {
    let diff = params.v_l - ego.v;
    let coeff = if ego.v <= params.v_l {
        if ego.status == Status::Enter {
            params.c_en
        } else {
            params.c_in
        }
    } else {
        params.c_o
    };
    coeff * diff * diff
}

/// Time-step cost of the vehicle at `ego`, by index.
#[inline]
pub fn step_cost_indexed(
    ego: usize,
    configs: &[Configuration],
    w_agg: f64,
    geometry: &Geometry,
    params: &CostParams,
) -> f64 {
    let safe = if w_agg < 1.0 {
        phi_safe_indexed(ego, configs, geometry, params)
    } else {
        0.0
    };
    (1.0 - w_agg) * safe + w_agg * phi_speed(&configs[ego], params)
}

/// `(1 - w_agg) · φ_safe + w_agg · φ_speed` for `ego_id` in `view`.
pub fn step_cost(
    view: &NeighbourView,
    ego_id: VehicleId,
    w_agg: f64,
    geometry: &Geometry,
    params: &CostParams,
) -> Result<f64> {
    let (ids, configs): (Vec<_>, Vec<_>) = view.members.iter().map(|(k, v)| (*k, *v)).unzip();
    let ego = ids
        .iter()
        .position(|&id| id == ego_id)
        .ok_or(Error::UnknownPlayer(ego_id.0))?;
    Ok(step_cost_indexed(ego, &configs, w_agg, geometry, params))
}

/// Discounted sum of time-step costs of `ego_id` over predicted trajectories.
///
/// `trajectories` maps every vehicle of the considered subset to its predicted
/// configurations at `τ = 0..h`. All sequences must share one length `h ≥ 1`.
pub fn accumulated_cost(
    trajectories: &BTreeMap<VehicleId, Vec<Configuration>>,
    ego_id: VehicleId,
    w_agg: f64,
    geometry: &Geometry,
    params: &CostParams,
) -> Result<f64> {
    let ego = trajectories
        .keys()
        .position(|&id| id == ego_id)
        .ok_or(Error::UnknownPlayer(ego_id.0))?;
    let h = trajectories.values().next().map_or(0, Vec::len);
    if h == 0 {
        return Err(Error::TrajectoryLength { expected: 1, got: 0 });
    }
    if let Some(bad) = trajectories.values().find(|t| t.len() != h) {
        return Err(Error::TrajectoryLength {
            expected: h,
            got: bad.len(),
        });
    }
    let mut configs = Vec::with_capacity(trajectories.len());
    let mut total = 0.0;
    let mut discount = 1.0;
    for tau in 0..h {
        configs.clear();
        configs.extend(trajectories.values().map(|t| t[tau]));
        total += discount * step_cost_indexed(ego, &configs, w_agg, geometry, params);
        discount *= params.lambda;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_roundabout, RoundaboutSpec};
    use approx::assert_relative_eq;

    fn geometry() -> Geometry {
        build_roundabout(RoundaboutSpec::default()).unwrap()
    }

    fn on_circle(theta: f64, v: f64, status: Status) -> Configuration {
        Configuration::new(20.0, theta, v, status, 0.0)
    }

    fn view(configs: &[Configuration]) -> NeighbourView {
        let members = configs
            .iter()
            .enumerate()
            .map(|(k, c)| (VehicleId(k as u32), *c))
            .collect();
        NeighbourView::new(VehicleId(0), members).unwrap()
    }

    #[test]
    fn weights_sum_to_one() {
        let w = Weights::from_aggressiveness(0.3).unwrap();
        assert_relative_eq!(w.w_safe() + w.w_agg(), 1.0);
        assert!(Weights::from_aggressiveness(1.2).is_err());
    }

    #[test]
    fn front_back_selection() {
        let g = geometry();
        let p = CostParams::default();
        let lone = view(&[on_circle(0.0, 5.0, Status::Inside)]);
        assert_eq!(front_back(&lone, &g, &p), (None, None));

        let ahead = view(&[on_circle(0.0, 5.0, Status::Inside), on_circle(0.5, 5.0, Status::Inside)]);
        assert_eq!(front_back(&ahead, &g, &p), (Some(VehicleId(1)), None));

        let far = view(&[on_circle(0.0, 5.0, Status::Inside), on_circle(1.75, 5.0, Status::Inside)]);
        assert_eq!(front_back(&far, &g, &p), (None, None));

        let behind = view(&[on_circle(0.0, 5.0, Status::Inside), on_circle(-0.4, 5.0, Status::Inside)]);
        assert_eq!(front_back(&behind, &g, &p), (None, Some(VehicleId(1))));

        let exited = view(&[on_circle(0.0, 5.0, Status::Inside), on_circle(0.3, 5.0, Status::Exit)]);
        assert_eq!(front_back(&exited, &g, &p), (None, None));
        let ego_exited = view(&[on_circle(0.0, 5.0, Status::Exit), on_circle(0.3, 5.0, Status::Inside)]);
        assert_eq!(front_back(&ego_exited, &g, &p), (None, None));
    }

    #[test]
    fn nearest_wins_among_several() {
        let g = geometry();
        let p = CostParams::default();
        let v = view(&[
            on_circle(0.0, 5.0, Status::Inside),
            on_circle(0.9, 5.0, Status::Inside),
            on_circle(0.4, 5.0, Status::Inside),
            on_circle(-0.3, 5.0, Status::Inside),
            on_circle(-0.6, 5.0, Status::Inside),
        ]);
        assert_eq!(front_back(&v, &g, &p), (Some(VehicleId(2)), Some(VehicleId(3))));
    }

    #[test]
    fn beta_regimes() {
        let p = CostParams::default();
        assert_eq!(beta(5.0, 6.0, &p), p.e_inf);
        assert_eq!(beta(6.0, 6.0, &p), p.e_inf);
        assert_eq!(beta(7.0, 6.0, &p), 0.0);
    }

    #[test]
    fn speed_branches() {
        let p = CostParams::default();
        assert_eq!(phi_speed(&on_circle(0.0, 11.0, Status::Inside), &p), 0.0);
        assert_eq!(phi_speed(&on_circle(0.0, 5.0, Status::Enter), &p), 36.0);
        assert_eq!(phi_speed(&on_circle(0.0, 5.0, Status::Inside), &p), 360.0);
        assert_eq!(phi_speed(&on_circle(0.0, 12.0, Status::Inside), &p), 1000.0);
    }

    #[test]
    fn step_cost_mixes_features() {
        let g = geometry();
        let p = CostParams::default();
        // ego inside, entering vehicle 20 m ahead: φ_safe = 1·(30-20)² = 100
        let v = view(&[on_circle(0.0, 5.0, Status::Inside), on_circle(1.0, 5.0, Status::Enter)]);
        let safe = phi_safe(&v, &g, &p);
        assert_relative_eq!(safe, 100.0, epsilon = 1e-9);
        let speed = phi_speed(&v.members[&VehicleId(0)], &p);
        assert_eq!(step_cost(&v, VehicleId(0), 0.0, &g, &p).unwrap(), safe);
        assert_eq!(step_cost(&v, VehicleId(0), 1.0, &g, &p).unwrap(), speed);
    }

    #[test]
    fn accumulated_cost_checks_lengths() {
        let g = geometry();
        let p = CostParams::default();
        let mut t = BTreeMap::new();
        t.insert(VehicleId(0), vec![on_circle(0.0, 5.0, Status::Inside); 4]);
        t.insert(VehicleId(1), vec![on_circle(1.0, 5.0, Status::Inside); 3]);
        assert!(matches!(
            accumulated_cost(&t, VehicleId(0), 0.5, &g, &p),
            Err(Error::TrajectoryLength { .. })
        ));
    }

    #[test]
    fn default_params_are_valid() {
        CostParams::default().validate().unwrap();
        let p = CostParams {
            lambda: 1.5,
            ..CostParams::default()
        };
        assert!(p.validate().is_err());
    }
}
