//! Roundabout layout and navigation paths.
//!
//! The layout is built from five kinds of primitive: the inner driving circle
//! of radius `r_in` centred on the origin, and for every arm an entry
//! connector and an exit connector, both circular arcs of radius `r_en`
//! externally tangent to the inner circle. Approach and exit lanes are
//! straight lines tangent to the connectors. Traffic is right-hand and
//! circulates counter-clockwise.
//!
//! Angles follow the usual polar convention about the roundabout centre.
//! `theta1` is the polar angle between an arm axis and the point where its
//! entry connector merges into the circle, `theta3` the angle between the
//! diverge point of an exit connector and its arm axis, and `theta2` the
//! spacing between consecutive arms.

use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Diameter of the disc a vehicle occupies on the road, in meters.
pub const OCCUPANCY_DIAMETER: f64 = 4.5;

/// Number of laps given to the circle of a circulating (never exiting) path.
const CIRCULATING_LAPS: f64 = 64.0;

/// A point in the plane of the roundabout, in meters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const ORIGIN: Point = Point { x: 0.0, y: 0.0 };

    pub fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn from_polar(r: f64, theta: f64) -> Self {
        Point {
            x: r * theta.cos(),
            y: r * theta.sin(),
        }
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn angle(self) -> f64 {
        self.y.atan2(self.x)
    }

    pub fn distance(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    fn add(self, other: Point) -> Point {
        Point::new(self.x + other.x, self.y + other.y)
    }

    fn sub(self, other: Point) -> Point {
        Point::new(self.x - other.x, self.y - other.y)
    }

    fn scale(self, k: f64) -> Point {
        Point::new(self.x * k, self.y * k)
    }

    fn dot(self, other: Point) -> f64 {
        self.x * other.x + self.y * other.y
    }

    fn unit(angle: f64) -> Point {
        Point::new(angle.cos(), angle.sin())
    }
}

/// Wraps an angle into `(-π, π]`.
pub fn wrap_angle(angle: f64) -> f64 {
    let a = angle.rem_euclid(TAU);
    if a > PI {
        a - TAU
    } else {
        a
    }
}

/// Counter-clockwise angular gap from `from` to `to`, in `[0, 2π)`.
pub fn ccw_gap(from: f64, to: f64) -> f64 {
    let gap = (to - from).rem_euclid(TAU);
    if gap >= TAU {
        0.0
    } else {
        gap
    }
}

/// Phase of a vehicle's traversal of the roundabout.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Status {
    Enter,
    Inside,
    Exit,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Enter => "enter",
            Status::Inside => "inside",
            Status::Exit => "exit",
        }
    }
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Status {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "enter" => Ok(Status::Enter),
            "inside" => Ok(Status::Inside),
            "exit" => Ok(Status::Exit),
            other => Err(Error::Parse(format!("unknown status `{other}`"))),
        }
    }
}

/// Layout parameters of a single-lane roundabout.
#[derive(Clone, Debug, PartialEq)]
pub struct RoundaboutSpec {
    /// Number of arms.
    pub ways: usize,
    /// Radius of the circulating lane.
    pub r_in: f64,
    /// Radius of the entry and exit connector arcs.
    pub r_en: f64,
    /// Length of the straight approach lane (and of the exit lane).
    pub approach_len: f64,
    /// Polar angle from an arm axis to its entry merge point.
    pub theta1: f64,
    /// Angular spacing of consecutive arms.
    pub theta2: f64,
    /// Polar angle from an exit diverge point to its arm axis.
    pub theta3: f64,
    /// Arm axes, strictly increasing in `[0, 2π)`.
    pub entrance_angles: Vec<f64>,
}

impl Default for RoundaboutSpec {
    fn default() -> Self {
        RoundaboutSpec::evenly_spaced(4, 20.0, 8.0, 40.0, 0.38, 0.40)
    }
}

impl RoundaboutSpec {
    /// A spec whose arms sit at `k · 2π / ways`.
    pub fn evenly_spaced(
        ways: usize,
        r_in: f64,
        r_en: f64,
        approach_len: f64,
        theta1: f64,
        theta3: f64,
    ) -> Self {
        let spacing = TAU / ways.max(1) as f64;
        RoundaboutSpec {
            ways,
            r_in,
            r_en,
            approach_len,
            theta1,
            theta2: spacing,
            theta3,
            entrance_angles: (0..ways).map(|k| k as f64 * spacing).collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let invalid = |msg: String| Err(Error::InvalidGeometry(msg));
        if self.ways < 3 {
            return invalid(format!("ways must be at least 3, got {}", self.ways));
        }
        for (name, value) in [
            ("r_in", self.r_in),
            ("r_en", self.r_en),
            ("approach_len", self.approach_len),
        ] {
            if !(value > 0.0 && value.is_finite()) {
                return invalid(format!("{name} must be positive, got {value}"));
            }
        }
        if self.entrance_angles.len() != self.ways {
            return invalid(format!(
                "entrance_angles has {} entries but ways = {}",
                self.entrance_angles.len(),
                self.ways
            ));
        }
        for (k, &a) in self.entrance_angles.iter().enumerate() {
            if !(0.0..TAU).contains(&a) {
                return invalid(format!("entrance angle {k} = {a} is outside [0, 2π)"));
            }
            if k > 0 && a <= self.entrance_angles[k - 1] {
                return invalid("entrance_angles must be strictly increasing".into());
            }
        }
        let spacing = TAU / self.ways as f64;
        if (self.theta2 - spacing).abs() > 1e-9 {
            return invalid(format!(
                "theta2 must equal the arm spacing 2π/ways = {spacing}, got {}",
                self.theta2
            ));
        }
        for k in 0..self.ways {
            let next = self.entrance_angles[(k + 1) % self.ways];
            let gap = ccw_gap(self.entrance_angles[k], next);
            if (gap - self.theta2).abs() > 1e-9 {
                return invalid("entrance_angles must be evenly spaced by theta2".into());
            }
        }
        for (name, value) in [("theta1", self.theta1), ("theta3", self.theta3)] {
            if !(value > 0.0 && value < FRAC_PI_2) {
                return invalid(format!("{name} must lie in (0, π/2), got {value}"));
            }
        }
        if self.theta1 + self.theta3 >= self.theta2 {
            return invalid("theta1 + theta3 must be smaller than theta2".into());
        }
        let reach = self.r_in + self.r_en;
        if reach * self.theta1.sin() <= self.r_en || reach * self.theta3.sin() <= self.r_en {
            return invalid(
                "connector radius too large for theta1/theta3: lanes would cross the arm axis"
                    .into(),
            );
        }
        Ok(())
    }
}

/// Right-turn, straight-on or left-turn manoeuvre.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Maneuver {
    TurnRight,
    GoStraight,
    TurnLeft,
}

impl Maneuver {
    pub const ALL: [Maneuver; 3] = [Maneuver::TurnRight, Maneuver::GoStraight, Maneuver::TurnLeft];

    /// Number of arms counted counter-clockwise from the entry arm to the exit arm.
    pub fn arm_offset(self, ways: usize) -> usize {
        match self {
            Maneuver::TurnRight => 1,
            Maneuver::GoStraight => (ways / 2).max(1),
            Maneuver::TurnLeft => ways - 1,
        }
    }
}

/// Manoeuvre together with the entrance arm it starts from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PathKind {
    pub maneuver: Maneuver,
    pub arm: usize,
}

impl PathKind {
    pub fn new(maneuver: Maneuver, arm: usize) -> Self {
        PathKind { maneuver, arm }
    }

    pub fn exit_arm(self, ways: usize) -> usize {
        (self.arm + self.maneuver.arm_offset(ways)) % ways
    }
}

/// What a navigation path does after entering.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Route {
    /// Enter, circulate and leave according to the manoeuvre.
    Planned(PathKind),
    /// Enter from `arm` and stay on the circle indefinitely.
    Circulating { arm: usize },
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Shape {
    Line { start: Point, dir: Point },
    Arc { center: Point, radius: f64, start_angle: f64, ccw: bool },
}

impl Shape {
    fn point_at(&self, u: f64) -> Point {
        match *self {
            Shape::Line { start, dir } => start.add(dir.scale(u)),
            Shape::Arc {
                center,
                radius,
                start_angle,
                ccw,
            } => center.add(Point::unit(arc_angle(start_angle, ccw, u / radius)).scale(radius)),
        }
    }

    fn heading_at(&self, u: f64) -> f64 {
        match *self {
            Shape::Line { dir, .. } => dir.angle(),
            Shape::Arc {
                radius,
                start_angle,
                ccw,
                ..
            } => {
                let a = arc_angle(start_angle, ccw, u / radius);
                wrap_angle(if ccw { a + FRAC_PI_2 } else { a - FRAC_PI_2 })
            }
        }
    }

    fn is_centered(&self) -> bool {
        matches!(self, Shape::Arc { center, .. } if *center == Point::ORIGIN)
    }

    /// Closest parameter in `[0, len]` (or `[0, ∞)` when `open_end`) to `p`.
    fn project(&self, p: Point, len: f64, open_end: bool) -> f64 {
        match *self {
            Shape::Line { start, dir } => {
                let u = p.sub(start).dot(dir).max(0.0);
                if open_end {
                    u
                } else {
                    u.min(len)
                }
            }
            Shape::Arc {
                center,
                radius,
                start_angle,
                ccw,
            } => {
                let phi = p.sub(center).angle();
                let delta = if ccw {
                    ccw_gap(start_angle, phi)
                } else {
                    ccw_gap(phi, start_angle)
                };
                let u = delta * radius;
                if u <= len {
                    u
                } else {
                    let d0 = self.point_at(0.0).distance(p);
                    let d1 = self.point_at(len).distance(p);
                    if d0 <= d1 {
                        0.0
                    } else {
                        len
                    }
                }
            }
        }
    }
}

fn arc_angle(start_angle: f64, ccw: bool, swept: f64) -> f64 {
    if ccw {
        start_angle + swept
    } else {
        start_angle - swept
    }
}

/// One piece of a navigation path.
#[derive(Clone, Debug, PartialEq)]
pub struct Segment {
    shape: Shape,
    start_s: f64,
    length: f64,
    status: Status,
}

impl Segment {
    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn start_arclen(&self) -> f64 {
        self.start_s
    }

    pub fn status(&self) -> Status {
        self.status
    }

    pub fn is_arc(&self) -> bool {
        matches!(self.shape, Shape::Arc { .. })
    }

    pub fn point_at(&self, u: f64) -> Point {
        self.shape.point_at(u)
    }

    pub fn heading_at(&self, u: f64) -> f64 {
        self.shape.heading_at(u)
    }
}

/// Polar pose of a point along a navigation path.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PathPose {
    pub r: f64,
    pub theta: f64,
    pub status: Status,
}

/// An arc-length parameterized route through the roundabout.
#[derive(Clone, Debug, PartialEq)]
pub struct NavigationPath {
    route: Route,
    segments: Vec<Segment>,
    total_len: f64,
    enter_len: f64,
    exit_start: Option<f64>,
    exit_angle: Option<f64>,
}

impl NavigationPath {
    pub fn route(&self) -> Route {
        self.route
    }

    pub fn kind(&self) -> Option<PathKind> {
        match self.route {
            Route::Planned(kind) => Some(kind),
            Route::Circulating { .. } => None,
        }
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn total_len(&self) -> f64 {
        self.total_len
    }

    /// Arc length of the `enter` block.
    pub fn total_enter_len(&self) -> f64 {
        self.enter_len
    }

    /// Arc length at which the `exit` block starts, if the path ever exits.
    pub fn exit_start(&self) -> Option<f64> {
        self.exit_start
    }

    /// Axis angle of the exit arm, wrapped into `(-π, π]`.
    pub fn exit_angle(&self) -> Option<f64> {
        self.exit_angle
    }

    fn segment_index(&self, s: f64) -> usize {
        // last segment whose start is <= s
        self.segments
            .partition_point(|seg| seg.start_s <= s)
            .saturating_sub(1)
    }

    /// Cartesian position at arc length `s`; past the end the final segment is extended.
    pub fn point_at(&self, s: f64) -> Point {
        let seg = &self.segments[self.segment_index(s)];
        seg.shape.point_at(s - seg.start_s)
    }

    pub fn heading_at(&self, s: f64) -> f64 {
        let seg = &self.segments[self.segment_index(s)];
        seg.shape.heading_at(s - seg.start_s)
    }

    /// Projects a point onto the path, returning `(arclen, distance)`.
    pub fn project(&self, p: Point) -> (f64, f64) {
        let last = self.segments.len() - 1;
        let mut best = (0.0, f64::INFINITY);
        for (k, seg) in self.segments.iter().enumerate() {
            let u = seg.shape.project(p, seg.length, k == last);
            let d = seg.shape.point_at(u).distance(p);
            if d < best.1 {
                best = (seg.start_s + u, d);
            }
        }
        best
    }
}

/// Polar pose and status label at arc length `arclen`.
pub fn path_pose(path: &NavigationPath, arclen: f64) -> Result<PathPose> {
    if !(arclen >= 0.0) {
        return Err(Error::NegativeArclen(arclen));
    }
    let seg = &path.segments[path.segment_index(arclen)];
    let u = arclen - seg.start_s;
    let (r, theta) = match seg.shape {
        Shape::Arc {
            radius,
            start_angle,
            ccw,
            ..
        } if seg.shape.is_centered() => (radius, wrap_angle(arc_angle(start_angle, ccw, u / radius))),
        shape => {
            let p = shape.point_at(u);
            (p.norm(), p.angle())
        }
    };
    Ok(PathPose {
        r,
        theta,
        status: seg.status,
    })
}

#[derive(Clone, Debug, PartialEq)]
struct ArmLayout {
    angle: f64,
    approach_origin: Point,
    entry_lane_end: Point,
    entry_center: Point,
    merge_angle: f64,
    exit_center: Point,
    diverge_angle: f64,
    exit_lane_start: Point,
}

/// A validated roundabout together with its pre-built navigation paths.
#[derive(Clone, Debug, PartialEq)]
pub struct Geometry {
    spec: RoundaboutSpec,
    arms: Vec<ArmLayout>,
    planned: Vec<Arc<NavigationPath>>,
    circulating: Vec<Arc<NavigationPath>>,
}

/// Validates `spec` and lays out arms, connectors and all navigation paths.
pub fn build_roundabout(spec: RoundaboutSpec) -> Result<Geometry> {
    spec.validate()?;
    let reach = spec.r_in + spec.r_en;
    let arms = spec
        .entrance_angles
        .iter()
        .map(|&psi| {
            let inward = psi + PI;
            let right_of_inward = Point::new(inward.sin(), -inward.cos());
            let merge_angle = psi + spec.theta1;
            let entry_center = Point::unit(merge_angle).scale(reach);
            let entry_lane_end = entry_center.sub(right_of_inward.scale(spec.r_en));
            let approach_origin = entry_lane_end.sub(Point::unit(inward).scale(spec.approach_len));

            let diverge_angle = psi - spec.theta3;
            let exit_center = Point::unit(diverge_angle).scale(reach);
            let right_of_outward = Point::new(psi.sin(), -psi.cos());
            let exit_lane_start = exit_center.sub(right_of_outward.scale(spec.r_en));
            ArmLayout {
                angle: psi,
                approach_origin,
                entry_lane_end,
                entry_center,
                merge_angle,
                exit_center,
                diverge_angle,
                exit_lane_start,
            }
        })
        .collect();
    let mut geometry = Geometry {
        spec,
        arms,
        planned: Vec::new(),
        circulating: Vec::new(),
    };
    let ways = geometry.ways();
    let mut planned = Vec::with_capacity(ways * 3);
    for arm in 0..ways {
        for maneuver in Maneuver::ALL {
            planned.push(Arc::new(geometry.assemble(Route::Planned(PathKind::new(maneuver, arm)))?));
        }
    }
    let circulating = (0..ways)
        .map(|arm| geometry.assemble(Route::Circulating { arm }).map(Arc::new))
        .collect::<Result<Vec<_>>>()?;
    geometry.planned = planned;
    geometry.circulating = circulating;
    Ok(geometry)
}

/// Builds the navigation path for `kind`.
pub fn build_path(geometry: &Geometry, kind: PathKind) -> Result<NavigationPath> {
    geometry.check_arm(kind.arm)?;
    geometry.assemble(Route::Planned(kind))
}

/// Along-path separation from `ego` to `other`.
///
/// This is the inner-circle arc subtended by the counter-clockwise angular
/// gap, floored by the difference in centre distance so that vehicles queued
/// on the same approach lane (nearly equal polar angles) are not treated as
/// coincident.
pub fn path_distance(ego: &crate::Configuration, other: &crate::Configuration, geometry: &Geometry) -> f64 {
    separation(ego.r, ego.theta, other.r, other.theta, geometry.r_in())
}

#[inline]
pub(crate) fn separation(r_from: f64, theta_from: f64, r_to: f64, theta_to: f64, r_in: f64) -> f64 {
    (r_in * ccw_gap(theta_from, theta_to)).max((r_to - r_from).abs())
}

impl Geometry {
    pub fn spec(&self) -> &RoundaboutSpec {
        &self.spec
    }

    pub fn ways(&self) -> usize {
        self.spec.ways
    }

    pub fn r_in(&self) -> f64 {
        self.spec.r_in
    }

    /// Centre distance at which vehicles change status.
    pub fn status_threshold(&self) -> f64 {
        self.spec.r_in + OCCUPANCY_DIAMETER
    }

    pub fn inner_circumference(&self) -> f64 {
        TAU * self.spec.r_in
    }

    /// Axis of arm `k`, wrapped into `(-π, π]`.
    pub fn arm_angle(&self, k: usize) -> f64 {
        wrap_angle(self.arms[k].angle)
    }

    /// Start of the approach lane of arm `k`.
    pub fn approach_origin(&self, k: usize) -> Point {
        self.arms[k].approach_origin
    }

    /// Where the exit lane of arm `k` begins.
    pub fn exit_anchor(&self, k: usize) -> Point {
        self.arms[k].exit_lane_start
    }

    /// Polar angle where arm `k`'s entry connector meets the circle.
    pub fn merge_angle(&self, k: usize) -> f64 {
        wrap_angle(self.arms[k].merge_angle)
    }

    /// Polar angle where arm `k`'s exit connector leaves the circle.
    pub fn diverge_angle(&self, k: usize) -> f64 {
        wrap_angle(self.arms[k].diverge_angle)
    }

    /// Pre-built planned path, shared.
    pub fn path(&self, kind: PathKind) -> &Arc<NavigationPath> {
        let m = Maneuver::ALL.iter().position(|&m| m == kind.maneuver).unwrap();
        &self.planned[kind.arm * 3 + m]
    }

    /// Pre-built path entering from `arm` and circulating indefinitely.
    pub fn circulating_path(&self, arm: usize) -> &Arc<NavigationPath> {
        &self.circulating[arm]
    }

    fn check_arm(&self, arm: usize) -> Result<()> {
        if arm >= self.ways() {
            return Err(Error::InvalidGeometry(format!(
                "arm index {arm} out of range for {} ways",
                self.ways()
            )));
        }
        Ok(())
    }

    fn assemble(&self, route: Route) -> Result<NavigationPath> {
        let spec = &self.spec;
        let (arm, exit_arm) = match route {
            Route::Planned(kind) => {
                self.check_arm(kind.arm)?;
                (kind.arm, Some(kind.exit_arm(spec.ways)))
            }
            Route::Circulating { arm } => {
                self.check_arm(arm)?;
                (arm, None)
            }
        };
        let entry = &self.arms[arm];
        let inward = entry.angle + PI;
        let entry_sweep = FRAC_PI_2 - spec.theta1;

        // (shape, length, phase) with phase 0 = before circle, 1 = circle, 2 = after
        let mut raw: Vec<(Shape, f64, u8)> = vec![
            (
                Shape::Line {
                    start: entry.approach_origin,
                    dir: Point::unit(inward),
                },
                spec.approach_len,
                0,
            ),
            (
                Shape::Arc {
                    center: entry.entry_center,
                    radius: spec.r_en,
                    start_angle: entry.entry_lane_end.sub(entry.entry_center).angle(),
                    ccw: false,
                },
                entry_sweep * spec.r_en,
                0,
            ),
        ];
        let circle_len = match exit_arm {
            Some(m) => ccw_gap(entry.merge_angle, self.arms[m].diverge_angle) * spec.r_in,
            None => CIRCULATING_LAPS * TAU * spec.r_in,
        };
        if circle_len <= 0.0 {
            return Err(Error::InvalidGeometry("degenerate circulating block".into()));
        }
        raw.push((
            Shape::Arc {
                center: Point::ORIGIN,
                radius: spec.r_in,
                start_angle: entry.merge_angle,
                ccw: true,
            },
            circle_len,
            1,
        ));
        if let Some(m) = exit_arm {
            let exit = &self.arms[m];
            raw.push((
                Shape::Arc {
                    center: exit.exit_center,
                    radius: spec.r_en,
                    start_angle: exit.diverge_angle + PI,
                    ccw: false,
                },
                (FRAC_PI_2 - spec.theta3) * spec.r_en,
                2,
            ));
            raw.push((
                Shape::Line {
                    start: exit.exit_lane_start,
                    dir: Point::unit(exit.angle),
                },
                spec.approach_len,
                2,
            ));
        }
        let threshold = self.status_threshold();
        let pieces = label_statuses(raw, threshold)?;

        let mut segments = Vec::with_capacity(pieces.len());
        let mut s = 0.0;
        for (shape, length, status) in pieces {
            segments.push(Segment {
                shape,
                start_s: s,
                length,
                status,
            });
            s += length;
        }
        let enter_len = segments
            .iter()
            .take_while(|seg| seg.status == Status::Enter)
            .map(|seg| seg.length)
            .sum();
        let exit_start = segments
            .iter()
            .find(|seg| seg.status == Status::Exit)
            .map(|seg| seg.start_s);
        Ok(NavigationPath {
            route,
            segments,
            total_len: s,
            enter_len,
            exit_start,
            exit_angle: exit_arm.map(|m| wrap_angle(self.arms[m].angle)),
        })
    }
}

/// Splits the raw segments where the centre distance crosses `threshold` and
/// assigns status labels: `enter` until the first crossing into the disc,
/// `exit` after the first crossing out of it past the circle.
fn label_statuses(raw: Vec<(Shape, f64, u8)>, threshold: f64) -> Result<Vec<(Shape, f64, Status)>> {
    let mut out = Vec::with_capacity(raw.len() + 2);
    let mut status = Status::Enter;
    for (shape, length, phase) in raw {
        let radius = |u: f64| shape.point_at(u).norm();
        let crossing = match (status, phase) {
            (Status::Enter, _) if radius(length) <= threshold => {
                Some(bisect(|u| radius(u) <= threshold, 0.0, length))
            }
            (Status::Inside, 2) if radius(length) > threshold => {
                Some(bisect(|u| radius(u) > threshold, 0.0, length))
            }
            _ => None,
        };
        match crossing {
            None => out.push((shape, length, status)),
            Some(u) => {
                let next = if status == Status::Enter {
                    Status::Inside
                } else {
                    Status::Exit
                };
                if u > 1e-9 {
                    out.push((shape, u, status));
                }
                if length - u > 1e-9 {
                    let rest = match shape {
                        Shape::Line { start, dir } => Shape::Line {
                            start: start.add(dir.scale(u)),
                            dir,
                        },
                        Shape::Arc {
                            center,
                            radius,
                            start_angle,
                            ccw,
                        } => Shape::Arc {
                            center,
                            radius,
                            start_angle: arc_angle(start_angle, ccw, u / radius),
                            ccw,
                        },
                    };
                    out.push((rest, length - u, next));
                }
                status = next;
            }
        }
    }
    if out.first().map(|p| p.2) != Some(Status::Enter) {
        return Err(Error::InvalidGeometry(
            "approach lane starts inside the status-change disc".into(),
        ));
    }
    if !out.iter().any(|p| p.2 == Status::Inside) {
        return Err(Error::InvalidGeometry("path never enters the roundabout".into()));
    }
    Ok(out)
}

/// Smallest `u` in `[lo, hi]` with `pred(u)` true, assuming `pred` is monotone
/// and `pred(hi)` holds.
fn bisect(pred: impl Fn(f64) -> bool, mut lo: f64, mut hi: f64) -> f64 {
    if pred(lo) {
        return lo;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if pred(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn geometry() -> Geometry {
        build_roundabout(RoundaboutSpec::default()).unwrap()
    }

    #[test]
    fn default_arms_match_layout() {
        let g = geometry();
        let mut angles: Vec<f64> = (0..4).map(|k| g.arm_angle(k)).collect();
        angles.sort_by(f64::total_cmp);
        let expected = [-FRAC_PI_2, 0.0, FRAC_PI_2, PI];
        for (a, e) in angles.iter().zip(expected) {
            assert_relative_eq!(*a, e, epsilon = 1e-12);
        }
        assert_relative_eq!(g.inner_circumference(), 125.66370614359172, epsilon = 1e-9);
    }

    #[test]
    fn rejects_bad_specs() {
        let spec = RoundaboutSpec { ways: 2, ..RoundaboutSpec::default() };
        assert!(matches!(build_roundabout(spec), Err(Error::InvalidGeometry(_))));

        let spec = RoundaboutSpec { r_in: 0.0, ..RoundaboutSpec::default() };
        assert!(build_roundabout(spec).is_err());

        let mut spec = RoundaboutSpec::default();
        spec.entrance_angles.swap(0, 1);
        assert!(build_roundabout(spec).is_err());

        let spec = RoundaboutSpec { theta2: 1.0, ..RoundaboutSpec::default() };
        assert!(build_roundabout(spec).is_err());
    }

    #[test]
    fn exit_arms_follow_ccw_order() {
        let ways = 4;
        assert_eq!(PathKind::new(Maneuver::TurnRight, 0).exit_arm(ways), 1);
        assert_eq!(PathKind::new(Maneuver::GoStraight, 0).exit_arm(ways), 2);
        assert_eq!(PathKind::new(Maneuver::TurnLeft, 0).exit_arm(ways), 3);
        assert_eq!(PathKind::new(Maneuver::TurnLeft, 2).exit_arm(ways), 1);
    }

    #[test]
    fn straight_inside_extent() {
        let g = geometry();
        let path = build_path(&g, PathKind::new(Maneuver::GoStraight, 0)).unwrap();
        let circle = path
            .segments()
            .iter()
            .find(|s| s.shape.is_centered())
            .unwrap();
        // independent computation: merge at ψ0 + θ1, diverge at ψ2 - θ3
        let extent = (PI - 0.38 - 0.40) * 20.0;
        assert_relative_eq!(circle.length(), extent, epsilon = 1e-9);
    }

    #[test]
    fn pose_endpoints() {
        let g = geometry();
        let path = build_path(&g, PathKind::new(Maneuver::TurnLeft, 1)).unwrap();
        let start = path_pose(&path, 0.0).unwrap();
        assert_eq!(start.status, Status::Enter);
        let origin = g.approach_origin(1);
        assert_relative_eq!(start.r, origin.norm(), epsilon = 1e-12);
        let end = path_pose(&path, path.total_len()).unwrap();
        assert_eq!(end.status, Status::Exit);
        assert!(path_pose(&path, -0.1).is_err());
    }

    #[test]
    fn status_blocks_are_ordered_and_on_threshold() {
        let g = geometry();
        for arm in 0..4 {
            for m in Maneuver::ALL {
                let path = build_path(&g, PathKind::new(m, arm)).unwrap();
                let labels: Vec<Status> = path.segments().iter().map(|s| s.status()).collect();
                let mut sorted = labels.clone();
                sorted.sort();
                assert_eq!(labels, sorted);
                let enter_end = path.point_at(path.total_enter_len());
                assert_relative_eq!(enter_end.norm(), 24.5, epsilon = 1e-9);
                let exit_start = path.point_at(path.exit_start().unwrap());
                assert_relative_eq!(exit_start.norm(), 24.5, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn segments_are_tangent_continuous() {
        let g = geometry();
        for arm in 0..4 {
            for m in Maneuver::ALL {
                let path = g.path(PathKind::new(m, arm));
                for pair in path.segments().windows(2) {
                    let end = pair[0].point_at(pair[0].length());
                    let start = pair[1].point_at(0.0);
                    assert!(end.distance(start) < 1e-9, "position jump");
                    let dh = wrap_angle(pair[0].heading_at(pair[0].length()) - pair[1].heading_at(0.0));
                    assert!(dh.abs() < 1e-9, "heading jump {dh}");
                    assert!(pair[0].length() > 0.0);
                }
            }
        }
    }

    #[test]
    fn projection_recovers_arclen() {
        let g = geometry();
        let path = g.path(PathKind::new(Maneuver::GoStraight, 3));
        for k in 0..50 {
            let s = path.total_len() * k as f64 / 50.0;
            let (s2, d) = path.project(path.point_at(s));
            assert!(d < 1e-9);
            assert_relative_eq!(s, s2, epsilon = 1e-7);
        }
    }

    #[test]
    fn distance_examples() {
        use crate::Configuration;
        let g = geometry();
        let at = |theta: f64| Configuration::new(20.0, theta, 0.0, Status::Inside, 0.0);
        assert_eq!(path_distance(&at(0.3), &at(0.3), &g), 0.0);
        assert_relative_eq!(path_distance(&at(0.1), &at(0.6), &g), 10.0, epsilon = 1e-12);
        assert_relative_eq!(path_distance(&at(0.0), &at(PI), &g), 62.83185307179586, epsilon = 1e-9);
        // queued on one approach lane: the radial gap takes over
        let lead = Configuration::new(30.0, 0.1, 0.0, Status::Enter, 0.0);
        let follow = Configuration::new(40.0, 0.1, 0.0, Status::Enter, 0.0);
        assert_eq!(path_distance(&follow, &lead, &g), 10.0);
    }
}
