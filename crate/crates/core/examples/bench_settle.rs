use nalgebra::Vector3;
use powder_rake::particle::{MaterialParams, SizeDistribution};
use powder_rake::sampling::{generate_pile, BoxRegion};
use powder_rake::sim::{admissible_dt, BoundaryKind, Simulation, StepConfig};

fn main() {
    let n: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(5000);
    let steps: u64 = std::env::args().nth(2).and_then(|s| s.parse().ok()).unwrap_or(20000);
    let dist = SizeDistribution::default();
    let mat = MaterialParams::default();
    // reservoir-like box: 0.9 x 0.5 mm footprint
    let fill_h = n as f64 * dist.mean_volume() / 0.20 / (0.9e-3 * 0.5e-3);
    let region = BoxRegion::new(
        Vector3::new(0.0, 0.0, 0.0),
        Vector3::new(0.9e-3, 0.5e-3, fill_h + 1.0e-4),
    );
    let set = generate_pile(&dist, n, &region, 7).unwrap();
    let dt = 0.9 * admissible_dt(0.5 * dist.d_min, &mat);
    let cfg = StepConfig {
        dt,
        gravity: Vector3::new(0.0, 0.0, -9.81),
        domain: BoxRegion::new(
            Vector3::new(0.0, 0.0, 0.0),
            Vector3::new(0.9e-3, 0.5e-3, 4.0e-3),
        ),
        boundaries: [
            BoundaryKind::Wall,
            BoundaryKind::Wall,
            BoundaryKind::Periodic,
            BoundaryKind::Periodic,
            BoundaryKind::Wall,
            BoundaryKind::Open,
        ],
        skin: 0.4 * dist.d_min,
    };
    let mut sim = Simulation::new(set, mat, cfg, vec![]).unwrap();
    let t0 = std::time::Instant::now();
    for _ in 0..steps {
        sim.step().unwrap();
    }
    let el = t0.elapsed().as_secs_f64();
    println!(
        "n={} steps={} dt={:.2e} elapsed={:.2}s per-step={:.1}us pairs={} max_speed={:.3e}",
        n, steps, dt, el, 1e6 * el / steps as f64, sim.pair_count(), sim.max_speed()
    );
}
