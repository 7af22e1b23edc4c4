use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::dataset::{Dataset, Sequence};
use super::simulate;
use super::world::{Agent, SensorSpec, StaticShape, Trajectory, WorldSpec};
use crate::error::Result;
use crate::representation::RepresentationConfig;

pub const SUITE_SEQUENCES: usize = 30;
pub const SUITE_FRAMES: usize = 20;
/// Quarter-degree beam spacing.
pub const SUITE_BEAMS: u32 = 1440;

const RES: f64 = 0.33;
const CAR_LENGTH: f64 = 4.62;
const CAR_WIDTH: f64 = 1.98;
const PED_SIZE: f64 = 0.66;
const FAR: f64 = 400.0;

/// Offset of the `k`-th cell centre from the ego origin along one axis.
fn centre(k: i32) -> f64 {
    RES * k as f64 + RES / 2.0
}

/// Lateral centre of a car whose long sides lie on cell centres.
fn car_lane(k: i32) -> f64 {
    centre(k) + CAR_WIDTH / 2.0
}

/// Whole cells per frame keep static edges on cell centres in every frame.
fn ego_speed(rng: &mut ChaCha8Rng, lo: u32, hi: u32) -> f64 {
    3.3 * rng.random_range(lo..=hi) as f64
}

/// Longitudinal centre of a car whose ends lie on cell centres.
fn car_slot(x: f64) -> f64 {
    centre((x / RES).round() as i32) + CAR_LENGTH / 2.0
}

fn street(rng: &mut ChaCha8Rng) -> Vec<StaticShape> {
    let half = centre(rng.random_range(26..=30));
    let mut shapes = vec![
        StaticShape::Wall { from: [-FAR, half], to: [FAR, half] },
        StaticShape::Wall { from: [-FAR, -half], to: [FAR, -half] },
    ];
    for side in [-1.0, 1.0] {
        let mut x = -20.0 + rng.random_range(0.0..6.0);
        while x < 60.0 {
            let inner = side * (half - 1.32);
            let outer = side * half;
            let (lo, hi) = if side > 0.0 { (inner, outer) } else { (outer, inner) };
            let x0 = centre((x / RES).round() as i32);
            shapes.push(StaticShape::Rect { min: [x0, lo], max: [x0 + 0.66, hi] });
            x += rng.random_range(8.0..16.0);
        }
    }
    shapes
}

fn car(x: f64, y: f64, heading_sign: f64, speed: f64) -> Agent {
    Agent {
        length: CAR_LENGTH,
        width: CAR_WIDTH,
        trajectory: Trajectory::straight([x, y], [x + heading_sign * FAR, y], speed),
    }
}

fn parked(x: f64, y: f64) -> Agent {
    Agent { length: CAR_LENGTH, width: CAR_WIDTH, trajectory: Trajectory::stationary(x, y, 0.0) }
}

fn lane_cars(rng: &mut ChaCha8Rng, y: f64, sign: f64, speed: f64, x0: f64, agents: &mut Vec<Agent>) {
    let count = rng.random_range(1..=2);
    let mut x = x0;
    for _ in 0..count {
        agents.push(car(x, y, sign, speed));
        x -= sign * rng.random_range(15.0..22.0);
    }
}

fn traffic_scene(rng: &mut ChaCha8Rng) -> (Vec<Agent>, f64) {
    let v_ego = ego_speed(rng, 1, 2);
    let mut agents = Vec::new();
    // Oncoming lane, approaching from ahead.
    let v = rng.random_range(5.0..12.0);
    let x0 = rng.random_range(10.0..24.0);
    lane_cars(rng, -car_lane(7), -1.0, v, x0, &mut agents);
    // Same-direction lane, overtaking from behind.
    let v = v_ego + rng.random_range(3.0..6.0);
    let x0 = rng.random_range(-14.0..-6.0);
    lane_cars(rng, car_lane(7), 1.0, v, x0, &mut agents);
    (agents, v_ego)
}

fn parked_scene(rng: &mut ChaCha8Rng) -> (Vec<Agent>, f64) {
    let v_ego = ego_speed(rng, 1, 1);
    let mut agents = Vec::new();
    for side in [-1.0, 1.0] {
        let mut x = rng.random_range(-18.0..-10.0);
        let n = rng.random_range(2..=4);
        for _ in 0..n {
            agents.push(parked(car_slot(x), side * car_lane(15)));
            x += rng.random_range(6.0..9.0);
        }
    }
    let y = if rng.random_bool(0.5) { car_lane(7) } else { -car_lane(7) };
    let x = rng.random_range(12.0..24.0);
    agents.push(car(x, y, -1.0, rng.random_range(5.0..10.0)));
    (agents, v_ego)
}

fn pedestrian_scene(rng: &mut ChaCha8Rng) -> (Vec<Agent>, f64) {
    let v_ego = ego_speed(rng, 0, 1);
    let mut agents = Vec::new();
    let n = rng.random_range(2..=4);
    for _ in 0..n {
        let x = centre(rng.random_range(15..48)) + PED_SIZE / 2.0;
        let y = rng.random_range(-5.0..5.0);
        let dir = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        agents.push(Agent {
            length: PED_SIZE,
            width: PED_SIZE,
            trajectory: Trajectory::straight([x, y], [x, y + dir * 40.0], rng.random_range(1.2..2.0)),
        });
    }
    let mut x = rng.random_range(-16.0..-8.0);
    for _ in 0..rng.random_range(1..=3) {
        agents.push(parked(car_slot(x), -car_lane(15)));
        x += rng.random_range(6.0..9.0);
    }
    (agents, v_ego)
}

/// World specs of the standard suite: ten traffic, ten parked-car and ten
/// pedestrian-crossing scenes.
pub fn suite_specs(seed: u64) -> Vec<WorldSpec> {
    (0..SUITE_SEQUENCES)
        .map(|idx| {
            let scene_seed = seed.wrapping_mul(1_000_003).wrapping_add(idx as u64);
            let mut rng = ChaCha8Rng::seed_from_u64(scene_seed);
            let static_shapes = street(&mut rng);
            let (agents, v_ego) = match idx / 10 {
                0 => traffic_scene(&mut rng),
                1 => parked_scene(&mut rng),
                _ => pedestrian_scene(&mut rng),
            };
            WorldSpec {
                static_shapes,
                agents,
                ego: Trajectory::straight([0.0, 0.0], [FAR, 0.0], v_ego),
                sensor: SensorSpec { beams: SUITE_BEAMS, ..SensorSpec::default() },
                seed: scene_seed,
                ground_points: false,
            }
        })
        .collect()
}

/// Thirty seeded 20-frame sequences on the default configuration.
pub fn standard_suite(seed: u64) -> Result<Dataset> {
    standard_suite_with(seed, &RepresentationConfig::default())
}

pub fn standard_suite_with(seed: u64, config: &RepresentationConfig) -> Result<Dataset> {
    let config = *config;
    let specs = suite_specs(seed);
    let sequences = specs
        .par_iter()
        .enumerate()
        .map(|(i, spec)| Ok(Sequence { name: format!("seq{i:03}"), frames: simulate(spec, SUITE_FRAMES, &config)? }))
        .collect::<Result<Vec<_>>>()?;
    Ok(Dataset { seed, config, world_hash: Dataset::hash_specs(&specs), sequences })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn specs_are_valid_and_seeded() {
        let a = suite_specs(7);
        assert_eq!(a.len(), SUITE_SEQUENCES);
        for s in &a {
            s.validate().unwrap();
        }
        assert_eq!(a, suite_specs(7));
        assert_ne!(a, suite_specs(8));
    }
}
