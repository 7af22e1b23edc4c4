//! Synthetic 2-D driving scenes with a simulated planar lidar and
//! ground-truth labels.

mod dataset;
mod suite;
mod world;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::Result;
use crate::grid::{cell_center, world_to_cell, DynamicMask, Grid, GridConfig, Pose2, Sgm};
use crate::representation::{build_sgm, PointCloud, RepresentationConfig};

pub use dataset::{read_dataset, write_dataset, Dataset, Sequence};
pub use suite::{standard_suite, standard_suite_with, suite_specs, SUITE_BEAMS, SUITE_FRAMES, SUITE_SEQUENCES};
pub use world::{
    beam_angles, ray_segment_distance, Agent, Footprint, Segment, SensorSpec, SpeedKnot, StaticShape, Trajectory,
    WorldSpec, WorldState, MOVING_SPEED_THRESHOLD,
};

/// Height given to obstacle returns.
pub const OBSTACLE_Z: f32 = 1.0;

/// A scan with, per point, the agent whose outline it hit.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledScan {
    pub cloud: PointCloud,
    pub hit_agent: Vec<Option<usize>>,
}

/// Casts every beam against the scene. With `rng` set, Gaussian range noise
/// of `sensor.noise_sigma` is added; returns past `max_range` are dropped.
pub fn lidar_scan(
    state: &WorldState,
    ego: &Pose2,
    sensor: &SensorSpec,
    mut rng: Option<&mut ChaCha8Rng>,
) -> LabeledScan {
    let normal = Normal::new(0.0, sensor.noise_sigma.max(0.0)).expect("sigma checked");
    let origin = [ego.x, ego.y];
    let mut points = Vec::new();
    let mut hit_agent = Vec::new();
    for rel in beam_angles(sensor) {
        let angle = ego.heading + rel;
        let mut best: Option<(f64, Option<usize>)> = None;
        for seg in &state.segments {
            if let Some(d) = ray_segment_distance(origin, angle, seg) {
                if best.is_none_or(|(b, _)| d < b) {
                    best = Some((d, seg.agent));
                }
            }
        }
        let Some((range, agent)) = best else { continue };
        if range > sensor.max_range {
            continue;
        }
        let mut r = range;
        if let Some(rng) = rng.as_deref_mut() {
            if sensor.noise_sigma > 0.0 {
                r = (r + normal.sample(rng)).max(0.0);
            }
        }
        points.push([(r * rel.cos()) as f32, (r * rel.sin()) as f32, OBSTACLE_Z]);
        hit_agent.push(agent);
    }
    LabeledScan { cloud: PointCloud { points, timestamp: state.time, ego_pose: *ego }, hit_agent }
}

/// Cells whose centre lies inside the footprint of a moving agent.
pub fn gt_dynamic_mask(state: &WorldState, ego: &Pose2, config: &GridConfig) -> DynamicMask {
    let mut grid = Grid::filled(*config, false);
    for fp in state.footprints.iter().filter(|f| f.is_moving()) {
        let corners = fp.corners().map(|[x, y]| ego.from_world(x, y));
        let res = config.res();
        let col_of = |x: f64| ((x + config.half_extent_x()) / res).floor() as i64;
        let row_of = |y: f64| ((y + config.half_extent_y()) / res).floor() as i64;
        let (mut c0, mut c1, mut r0, mut r1) = (i64::MAX, i64::MIN, i64::MAX, i64::MIN);
        for (x, y) in corners {
            c0 = c0.min(col_of(x));
            c1 = c1.max(col_of(x));
            r0 = r0.min(row_of(y));
            r1 = r1.max(row_of(y));
        }
        for row in r0.max(0)..=r1.min(config.height as i64 - 1) {
            for col in c0.max(0)..=c1.min(config.width as i64 - 1) {
                let cell = crate::grid::Cell::new(row as usize, col as usize);
                let (x, y) = cell_center(cell, config);
                let (wx, wy) = ego.to_world(x, y);
                if fp.contains(wx, wy) {
                    grid.set(cell, true);
                }
            }
        }
    }
    DynamicMask { grid }
}

/// Cells holding at least one return from a moving agent.
pub fn point_mask(scan: &LabeledScan, state: &WorldState, config: &GridConfig) -> DynamicMask {
    let mut grid = Grid::filled(*config, false);
    for (p, agent) in scan.cloud.points.iter().zip(&scan.hit_agent) {
        let moving = agent.is_some_and(|i| state.footprints[i].is_moving());
        if moving {
            if let Some(cell) = world_to_cell(p[0] as f64, p[1] as f64, config) {
                grid.set(cell, true);
            }
        }
    }
    DynamicMask { grid }
}

/// One simulated frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub timestamp: f64,
    pub ego_pose: Pose2,
    /// Noisy scan as the sensor reports it.
    pub cloud: PointCloud,
    /// Footprint cells of moving agents.
    pub gt_mask: DynamicMask,
    /// Cells with returns from moving agents.
    pub point_mask: DynamicMask,
    /// SGM of the noise-free scan.
    pub gt_sgm: Sgm,
}

fn add_ground_returns(cloud: &mut PointCloud, rng: &mut ChaCha8Rng) {
    let extra: Vec<[f32; 3]> = cloud
        .points
        .iter()
        .map(|p| {
            let f: f32 = rng.random_range(0.2..0.8);
            [p[0] * f, p[1] * f, 0.0]
        })
        .collect();
    cloud.points.extend(extra);
}

/// Runs the scene for `frames` frames spaced `config.frame_dt` apart.
pub fn simulate(spec: &WorldSpec, frames: usize, config: &RepresentationConfig) -> Result<Vec<Frame>> {
    spec.validate()?;
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut out = Vec::with_capacity(frames);
    for k in 0..frames {
        let t = k as f64 * config.frame_dt;
        let state = WorldState::at(spec, t);
        let (ego, _) = spec.ego.state_at(t);
        let clean = lidar_scan(&state, &ego, &spec.sensor, None);
        let noisy = lidar_scan(&state, &ego, &spec.sensor, Some(&mut rng));
        let gt_sgm = build_sgm(&clean.cloud, config);
        let point_mask = point_mask(&noisy, &state, &config.grid);
        let mut cloud = noisy.cloud;
        if spec.ground_points {
            add_ground_returns(&mut cloud, &mut rng);
        }
        out.push(Frame {
            timestamp: t,
            ego_pose: ego,
            cloud,
            gt_mask: gt_dynamic_mask(&state, &ego, &config.grid),
            point_mask,
            gt_sgm,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Cell;

    fn wall_spec() -> WorldSpec {
        WorldSpec {
            static_shapes: vec![StaticShape::Wall { from: [5.0, -20.0], to: [5.0, 20.0] }],
            agents: vec![],
            ego: Trajectory::stationary(0.0, 0.0, 0.0),
            sensor: SensorSpec { beams: 90, noise_sigma: 0.0, ..SensorSpec::default() },
            seed: 1,
            ground_points: false,
        }
    }

    #[test]
    fn wall_ranges_follow_cosine() {
        let spec = wall_spec();
        let state = WorldState::at(&spec, 0.0);
        let scan = lidar_scan(&state, &Pose2::default(), &spec.sensor, None);
        assert!(!scan.cloud.points.is_empty());
        for p in &scan.cloud.points {
            let (x, y) = (p[0] as f64, p[1] as f64);
            let a = y.atan2(x);
            assert!(((x * x + y * y).sqrt() - 5.0 / a.cos()).abs() < 1e-5);
        }
    }

    #[test]
    fn same_seed_same_frames() {
        let mut spec = wall_spec();
        spec.sensor.noise_sigma = 0.05;
        spec.agents.push(Agent {
            length: 2.0,
            width: 1.0,
            trajectory: Trajectory::straight([3.0, -5.0], [3.0, 5.0], 2.0),
        });
        let cfg = RepresentationConfig::default();
        let a = simulate(&spec, 4, &cfg).unwrap();
        let b = simulate(&spec, 4, &cfg).unwrap();
        assert_eq!(a, b);
        spec.seed = 2;
        let c = simulate(&spec, 4, &cfg).unwrap();
        assert_ne!(a[0].cloud, c[0].cloud);
    }

    #[test]
    fn moving_agent_masks() {
        let mut spec = wall_spec();
        spec.agents.push(Agent {
            length: 0.99,
            width: 0.99,
            trajectory: Trajectory::straight([3.0, -5.0], [3.0, 5.0], 1.0),
        });
        spec.agents.push(Agent { length: 0.99, width: 0.99, trajectory: Trajectory::stationary(-3.0, 0.0, 0.0) });
        let cfg = RepresentationConfig::default();
        let frames = simulate(&spec, 1, &cfg).unwrap();
        let mask = &frames[0].gt_mask;
        // 0.99 m spans three cells per axis.
        assert_eq!(mask.grid.count_ones(), 9);
        let c = world_to_cell(3.0, -5.0, &cfg.grid).unwrap();
        assert!(mask.grid.get(c));
        assert!(!mask.grid.get(world_to_cell(-3.0, 0.0, &cfg.grid).unwrap()));
        assert!(frames[0].point_mask.grid.count_ones() >= 1);
        assert!(!frames[0].point_mask.grid.get(Cell::new(0, 0)));
    }

    #[test]
    fn degenerate_spec_rejected() {
        let mut spec = wall_spec();
        spec.ego = Trajectory::straight([1.0, 1.0], [1.0, 1.0], 1.0);
        let err = simulate(&spec, 2, &RepresentationConfig::default()).unwrap_err();
        assert!(matches!(err, crate::error::Error::InvalidSpec(_)));
    }

    #[test]
    fn ground_points_are_removable() {
        let mut spec = wall_spec();
        spec.ground_points = true;
        let cfg = RepresentationConfig::default();
        let with = simulate(&spec, 1, &cfg).unwrap();
        spec.ground_points = false;
        let without = simulate(&spec, 1, &cfg).unwrap();
        assert_eq!(with[0].cloud.points.len(), 2 * without[0].cloud.points.len());
        let filtered = crate::representation::remove_ground(&with[0].cloud, cfg.ground_z_threshold);
        let sgm_a = build_sgm(&filtered, &cfg);
        let sgm_b = build_sgm(&without[0].cloud, &cfg);
        assert_eq!(sgm_a, sgm_b);
    }
}
