//! Vehicle configuration and the one-step dynamic function.

use crate::geometry::{path_pose, Geometry, NavigationPath, Point, Status};

/// Observable state of a vehicle plus its progress along its own path.
///
/// `arclen` is bookkeeping: it lets a vehicle follow its path exactly on the
/// connectors, where `(r, theta)` alone is ambiguous. Observers never read
/// another vehicle's `arclen`; they project the observed position onto their
/// estimate of that vehicle's path instead.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Configuration {
    pub r: f64,
    pub theta: f64,
    pub v: f64,
    pub status: Status,
    pub arclen: f64,
}

impl Configuration {
    pub fn new(r: f64, theta: f64, v: f64, status: Status, arclen: f64) -> Self {
        Configuration {
            r,
            theta,
            v,
            status,
            arclen,
        }
    }

    /// Configuration at `arclen` along `path`, status taken from the path label.
    pub fn on_path(path: &NavigationPath, arclen: f64, v: f64) -> crate::Result<Self> {
        let pose = path_pose(path, arclen)?;
        Ok(Configuration::new(pose.r, pose.theta, v, pose.status, arclen))
    }

    pub fn position(&self) -> Point {
        Point::from_polar(self.r, self.theta)
    }
}

/// Constant acceleration along the path between two time steps, in m/s².
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Default)]
pub struct Acceleration(pub f64);

impl Acceleration {
    pub fn value(self) -> f64 {
        self.0
    }
}

impl From<f64> for Acceleration {
    fn from(a: f64) -> Self {
        Acceleration(a)
    }
}

/// Advances `x` by one time step of length `delta` under constant acceleration.
///
/// Braking that would reverse the vehicle stops it at the kinematic stopping
/// point instead.
pub fn step(geometry: &Geometry, path: &NavigationPath, x: &Configuration, a: Acceleration, delta: f64) -> Configuration {
    let a = a.0;
    let (disp, v) = if x.v + a * delta < 0.0 {
        (x.v * x.v / (2.0 * -a), 0.0)
    } else {
        (x.v * delta + 0.5 * a * delta * delta, x.v + a * delta)
    };
    let arclen = x.arclen + disp.max(0.0);
    // arclen >= 0 is preserved, so the pose lookup cannot fail
    let pose = path_pose(path, arclen).expect("arclen is non-negative");
    update_status(
        geometry,
        &Configuration::new(pose.r, pose.theta, v, x.status, arclen),
    )
}

/// Applies the status-change rule to `x`.
///
/// A vehicle becomes `inside` once its centre comes within `r_in + 4.5 m` of
/// the roundabout centre, and `exit` once it leaves that disc again. Statuses
/// only move forward.
pub fn update_status(geometry: &Geometry, x: &Configuration) -> Configuration {
    let threshold = geometry.status_threshold();
    let status = match x.status {
        Status::Enter if x.r <= threshold => Status::Inside,
        Status::Inside if x.r > threshold => Status::Exit,
        s => s,
    };
    Configuration { status, ..*x }
}
