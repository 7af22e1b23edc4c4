//! Ray-traces two scans of a passing car into SGMs and marks the residual.
//!
//! Run with an output directory to also write PPM images:
//! `cargo run --example sensor_grids -- /tmp/grids`

use std::path::PathBuf;

use evigrid::render::{render_rgm, render_sgm};
use evigrid::sim::{lidar_scan, Agent, SensorSpec, StaticShape, Trajectory, WorldSpec, WorldState};
use evigrid::{build_rgm, build_sgm, transform_grid, CellClass, RepresentationConfig};

fn count(grid: &evigrid::Sgm, class: CellClass) -> usize {
    grid.grid.cells.iter().filter(|&&c| c == class).count()
}

fn main() -> evigrid::Result<()> {
    let spec = WorldSpec {
        static_shapes: vec![
            StaticShape::Wall { from: [-40.0, 8.745], to: [40.0, 8.745] },
            StaticShape::Rect { min: [6.105, -4.455], max: [7.425, -3.795] },
        ],
        agents: vec![Agent {
            length: 4.62,
            width: 1.98,
            trajectory: Trajectory::straight([15.0, 3.135], [-30.0, 3.135], 10.0),
        }],
        ego: Trajectory::stationary(0.0, 0.0, 0.0),
        sensor: SensorSpec { beams: 1440, ..SensorSpec::default() },
        seed: 1,
        ground_points: false,
    };
    spec.validate()?;
    let cfg = RepresentationConfig::default();

    let past_state = WorldState::at(&spec, 0.0);
    let now_state = WorldState::at(&spec, 0.5);
    let ego = spec.ego.state_at(0.0).0;
    let past_scan = lidar_scan(&past_state, &ego, &spec.sensor, None);
    let now_scan = lidar_scan(&now_state, &ego, &spec.sensor, None);

    let past = build_sgm(&past_scan.cloud, &cfg);
    let now = build_sgm(&now_scan.cloud, &cfg);
    let aligned = transform_grid(&past, &past.pose, &now.pose);
    let rgm = build_rgm(&now, &aligned)?;

    for (name, sgm) in [("t=0.0", &past), ("t=0.5", &now)] {
        println!(
            "{name}: {} occupied, {} free, {} occluded",
            count(sgm, CellClass::Occupied),
            count(sgm, CellClass::Free),
            count(sgm, CellClass::Occluded)
        );
    }
    println!("residual cells: {}", rgm.grid.count_ones());

    if let Some(dir) = std::env::args().nth(1).map(PathBuf::from) {
        std::fs::create_dir_all(&dir).expect("output directory");
        render_sgm(&now).write_ppm(&dir.join("sgm.ppm"))?;
        render_rgm(&rgm).write_ppm(&dir.join("rgm.ppm"))?;
        println!("images written to {}", dir.display());
    }
    Ok(())
}
