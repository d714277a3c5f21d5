//! Planar geometry and straight-line kinematics.
//!
//! Distances are kilometres, durations seconds and speeds km/h.

use std::fmt;

/// A position in the simulation plane, in kilometres.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    /// Clamps both coordinates into `[0, width] x [0, height]`.
    pub fn clamp_to(&self, width: f64, height: f64) -> Point {
        Point::new(self.x.clamp(0.0, width), self.y.clamp(0.0, height))
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({:.3}, {:.3})", self.x, self.y)
    }
}

/// Euclidean distance between two points.
#[inline]
pub fn distance(a: Point, b: Point) -> f64 {
    (a.x - b.x).hypot(a.y - b.y)
}

/// Kilometres covered in `dt` seconds at `speed_kmh`.
#[inline]
pub fn reach(speed_kmh: f64, dt: f64) -> f64 {
    speed_kmh * dt / 3600.0
}

/// Moves `position` toward `target` for `dt` seconds at `speed_kmh`,
/// stopping exactly at the target rather than overshooting it.
pub fn advance(position: Point, target: Point, speed_kmh: f64, dt: f64) -> Point {
    let remaining = distance(position, target);
    let step = reach(speed_kmh, dt);
    if step >= remaining {
        return target;
    }
    let f = step / remaining;
    Point::new(
        position.x + (target.x - position.x) * f,
        position.y + (target.y - position.y) * f,
    )
}

/// Distances of one taxi job: the empty leg to the customer and the
/// occupied leg to the destination.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct Trip {
    /// Taxi to customer origin.
    pub pickup: f64,
    /// Customer origin to destination.
    pub ride: f64,
}

impl Trip {
    pub fn new(pickup: f64, ride: f64) -> Self {
        Self { pickup, ride }
    }

    /// Taxi position to destination, through the pickup point.
    #[inline]
    pub fn total(&self) -> f64 {
        self.pickup + self.ride
    }

    /// Builds the trip for a taxi at `taxi` serving a request from `origin` to `destination`.
    pub fn between(taxi: Point, origin: Point, destination: Point) -> Self {
        Self::new(distance(taxi, origin), distance(origin, destination))
    }
}
