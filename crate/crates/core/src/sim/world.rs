use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{normalize_angle, Pose2};

/// Agents slower than this are labelled static.
pub const MOVING_SPEED_THRESHOLD: f64 = 0.05;

/// Static obstacle in world coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StaticShape {
    /// Axis-aligned rectangle.
    Rect { min: [f64; 2], max: [f64; 2] },
    /// Line wall between two points.
    Wall { from: [f64; 2], to: [f64; 2] },
}

/// Speed in effect from time `t` until the next knot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpeedKnot {
    pub t: f64,
    pub speed: f64,
}

/// Polyline path driven with a piecewise-constant speed profile. Motion
/// stops at the last waypoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub waypoints: Vec<[f64; 2]>,
    #[serde(default)]
    pub speeds: Vec<SpeedKnot>,
    /// Heading used when the path has a single waypoint.
    #[serde(default)]
    pub heading: f64,
}

impl Trajectory {
    pub fn stationary(x: f64, y: f64, heading: f64) -> Self {
        Self { waypoints: vec![[x, y]], speeds: Vec::new(), heading }
    }

    pub fn straight(from: [f64; 2], to: [f64; 2], speed: f64) -> Self {
        Self { waypoints: vec![from, to], speeds: vec![SpeedKnot { t: 0.0, speed }], heading: 0.0 }
    }

    pub fn validate(&self, what: &str) -> Result<()> {
        if self.waypoints.is_empty() {
            return Err(Error::InvalidSpec(format!("{what}: trajectory has no waypoints")));
        }
        if self.waypoints.iter().flatten().any(|v| !v.is_finite()) || !self.heading.is_finite() {
            return Err(Error::InvalidSpec(format!("{what}: non-finite waypoint")));
        }
        for w in self.waypoints.windows(2) {
            if (w[1][0] - w[0][0]).hypot(w[1][1] - w[0][1]) < 1e-9 {
                return Err(Error::InvalidSpec(format!("{what}: zero-length trajectory segment")));
            }
        }
        let mut last_t = f64::NEG_INFINITY;
        for k in &self.speeds {
            if !(k.speed >= 0.0) || !k.speed.is_finite() {
                return Err(Error::InvalidSpec(format!("{what}: speeds must be >= 0")));
            }
            if !k.t.is_finite() || k.t <= last_t {
                return Err(Error::InvalidSpec(format!("{what}: speed knots must be increasing in time")));
            }
            last_t = k.t;
        }
        Ok(())
    }

    fn speed_at(&self, t: f64) -> f64 {
        self.speeds.iter().take_while(|k| k.t <= t).last().map_or(0.0, |k| k.speed)
    }

    fn path_length(&self) -> f64 {
        self.waypoints.windows(2).map(|w| (w[1][0] - w[0][0]).hypot(w[1][1] - w[0][1])).sum()
    }

    /// Arc length travelled by time `t`.
    fn distance_at(&self, t: f64) -> f64 {
        let mut s = 0.0;
        for (i, k) in self.speeds.iter().enumerate() {
            if k.t >= t {
                break;
            }
            let start = k.t.max(0.0);
            let end = self.speeds.get(i + 1).map_or(t, |n| n.t.min(t));
            if end > start {
                s += k.speed * (end - start);
            }
        }
        s
    }

    /// Pose and instantaneous speed at time `t`.
    pub fn state_at(&self, t: f64) -> (Pose2, f64) {
        if self.waypoints.len() == 1 {
            let [x, y] = self.waypoints[0];
            return (Pose2::new(x, y, self.heading), 0.0);
        }
        let total = self.path_length();
        let mut s = self.distance_at(t);
        let moving = s < total;
        s = s.min(total);
        let mut pose = None;
        for w in self.waypoints.windows(2) {
            let (dx, dy) = (w[1][0] - w[0][0], w[1][1] - w[0][1]);
            let len = dx.hypot(dy);
            if s <= len {
                let f = s / len;
                pose = Some(Pose2::new(w[0][0] + f * dx, w[0][1] + f * dy, dy.atan2(dx)));
                break;
            }
            s -= len;
        }
        let pose = pose.unwrap_or_else(|| {
            let w = &self.waypoints[self.waypoints.len() - 2..];
            let heading = (w[1][1] - w[0][1]).atan2(w[1][0] - w[0][0]);
            Pose2::new(w[1][0], w[1][1], heading)
        });
        let speed = if moving { self.speed_at(t) } else { 0.0 };
        (pose, speed)
    }
}

/// Rectangular agent following a trajectory; `length` runs along its heading.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Agent {
    pub length: f64,
    pub width: f64,
    pub trajectory: Trajectory,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorSpec {
    pub beams: u32,
    pub max_range: f64,
    /// Total field of view in radians, centred on the ego heading.
    pub angular_span: f64,
    pub noise_sigma: f64,
}

impl Default for SensorSpec {
    fn default() -> Self {
        Self { beams: 720, max_range: 30.0, angular_span: 2.0 * std::f64::consts::PI, noise_sigma: 0.02 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldSpec {
    #[serde(default)]
    pub static_shapes: Vec<StaticShape>,
    #[serde(default)]
    pub agents: Vec<Agent>,
    pub ego: Trajectory,
    #[serde(default)]
    pub sensor: SensorSpec,
    #[serde(default)]
    pub seed: u64,
    /// Adds ground returns (z = 0) along every beam.
    #[serde(default)]
    pub ground_points: bool,
}

impl WorldSpec {
    pub fn validate(&self) -> Result<()> {
        self.ego.validate("ego")?;
        for (i, a) in self.agents.iter().enumerate() {
            let what = format!("agent {i}");
            a.trajectory.validate(&what)?;
            if !(a.length > 0.0 && a.width > 0.0) || !a.length.is_finite() || !a.width.is_finite() {
                return Err(Error::InvalidSpec(format!("{what}: degenerate footprint")));
            }
        }
        for (i, s) in self.static_shapes.iter().enumerate() {
            let ok = match s {
                StaticShape::Rect { min, max } => min[0] < max[0] && min[1] < max[1],
                StaticShape::Wall { from, to } => (to[0] - from[0]).hypot(to[1] - from[1]) > 0.0,
            };
            if !ok {
                return Err(Error::InvalidSpec(format!("static shape {i} is degenerate")));
            }
        }
        let s = &self.sensor;
        if s.beams < 1 || !(s.max_range > 0.0) || !(s.angular_span > 0.0) || !(s.noise_sigma >= 0.0) {
            return Err(Error::InvalidSpec(
                "sensor needs beams >= 1, max_range > 0, angular_span > 0, noise_sigma >= 0".into(),
            ));
        }
        Ok(())
    }
}

/// World-frame line segment tagged with the agent it belongs to.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub a: [f64; 2],
    pub b: [f64; 2],
    /// Index of the owning agent; `None` for static geometry.
    pub agent: Option<usize>,
}

/// An agent's footprint at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Footprint {
    pub pose: Pose2,
    pub length: f64,
    pub width: f64,
    pub speed: f64,
}

impl Footprint {
    pub fn contains(&self, x: f64, y: f64) -> bool {
        let (lx, ly) = self.pose.from_world(x, y);
        lx.abs() <= self.length / 2.0 && ly.abs() <= self.width / 2.0
    }

    pub fn corners(&self) -> [[f64; 2]; 4] {
        let (hl, hw) = (self.length / 2.0, self.width / 2.0);
        [(hl, hw), (-hl, hw), (-hl, -hw), (hl, -hw)].map(|(x, y)| {
            let (wx, wy) = self.pose.to_world(x, y);
            [wx, wy]
        })
    }

    pub fn is_moving(&self) -> bool {
        self.speed > MOVING_SPEED_THRESHOLD
    }
}

/// Snapshot of all geometry at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct WorldState {
    pub time: f64,
    pub segments: Vec<Segment>,
    pub footprints: Vec<Footprint>,
}

impl WorldState {
    pub fn at(spec: &WorldSpec, time: f64) -> Self {
        let mut segments = Vec::new();
        for s in &spec.static_shapes {
            match *s {
                StaticShape::Rect { min, max } => {
                    let c = [min, [max[0], min[1]], max, [min[0], max[1]]];
                    for i in 0..4 {
                        segments.push(Segment { a: c[i], b: c[(i + 1) % 4], agent: None });
                    }
                }
                StaticShape::Wall { from, to } => segments.push(Segment { a: from, b: to, agent: None }),
            }
        }
        let mut footprints = Vec::with_capacity(spec.agents.len());
        for (i, agent) in spec.agents.iter().enumerate() {
            let (pose, speed) = agent.trajectory.state_at(time);
            let fp = Footprint { pose, length: agent.length, width: agent.width, speed };
            let c = fp.corners();
            for k in 0..4 {
                segments.push(Segment { a: c[k], b: c[(k + 1) % 4], agent: Some(i) });
            }
            footprints.push(fp);
        }
        Self { time, segments, footprints }
    }
}

/// Distance along a ray to a segment, if they intersect ahead of the origin.
pub fn ray_segment_distance(origin: [f64; 2], angle: f64, seg: &Segment) -> Option<f64> {
    let (dx, dy) = (angle.cos(), angle.sin());
    let (ex, ey) = (seg.b[0] - seg.a[0], seg.b[1] - seg.a[1]);
    let denom = dx * ey - dy * ex;
    if denom.abs() < 1e-12 {
        return None;
    }
    let (wx, wy) = (seg.a[0] - origin[0], seg.a[1] - origin[1]);
    let r = (wx * ey - wy * ex) / denom;
    let s = (wx * dy - wy * dx) / denom;
    (r > 1e-9 && (-1e-12..=1.0 + 1e-12).contains(&s)).then_some(r)
}

/// Relative beam angles spread evenly over the span.
pub fn beam_angles(sensor: &SensorSpec) -> Vec<f64> {
    let n = sensor.beams as usize;
    let step = sensor.angular_span / n as f64;
    (0..n).map(|i| normalize_angle(-sensor.angular_span / 2.0 + (i as f64 + 0.5) * step)).collect()
}
