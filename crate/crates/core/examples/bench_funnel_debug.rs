use nalgebra::Vector3;
use powder_rake::particle::{MaterialParams, SizeDistribution};
use powder_rake::sampling::{place_random_where, sample_radii, BoxRegion};
use powder_rake::sim::{BoundaryKind, Quiescence, RunOptions, Simulation, StepConfig, StopReason};
use powder_rake::surface::{plate, Surface, SurfaceShape};

fn main() {
    let gamma: f64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1.0e-4);
    let n: usize = std::env::args().nth(2).and_then(|s| s.parse().ok()).unwrap_or(3000);
    let outlet_d: f64 = std::env::args().nth(3).and_then(|s| s.parse().ok()).unwrap_or(1.0e-3);
    let adhesive_walls = false;
    let mat = MaterialParams { surface_energy: gamma, ..MaterialParams::default() };
    let dist = SizeDistribution::default();
    let outlet_r = 0.5 * outlet_d;
    let z_outlet = 5.0e-4;
    let wall_angle = 60f64.to_radians();
    let tan = wall_angle.tan();
    let solid = n as f64 * dist.mean_volume();
    let fill_target = solid / 0.22;
    let mut fill_h = 2.0 * dist.d_max;
    let frustum = |h: f64| {
        let r1 = outlet_r + h / tan;
        std::f64::consts::PI / 3.0 * h * (outlet_r * outlet_r + outlet_r * r1 + r1 * r1)
    };
    while frustum(fill_h) < fill_target { fill_h += dist.d_max; }
    println!("fill_h: {fill_h:.4e} solid: {solid:.3e}");
    let top_z = z_outlet + fill_h + 6.0 * dist.d_max;
    let top_r = outlet_r + (top_z - z_outlet) / tan;
    let radii = sample_radii(&dist, n, 42).unwrap();
    let bounding = BoxRegion::new(
        Vector3::new(-top_r, -top_r, z_outlet + 0.5 * dist.d_max),
        Vector3::new(top_r, top_r, top_z - dist.d_max),
    );
    let set = place_random_where(radii, &bounding, 43, |p, r| {
        let rho = (p.x * p.x + p.y * p.y).sqrt();
        rho + r < outlet_r + (p.z - z_outlet) / tan
    }).unwrap();
    let zmax = set.position.iter().map(|p| p.z).fold(0.0f64, f64::max);
    println!("initial max z: {zmax:.4e} top_z {top_z:.4e}");
    let e = 1.4e-3;
    let cfg = StepConfig {
        dt: 1.0e-7,
        gravity: Vector3::new(0.0, 0.0, -9.81),
        domain: BoxRegion::new(Vector3::new(-e-4e-4, -e-4e-4, -3e-4), Vector3::new(e+4e-4, e+4e-4, top_z+4e-4)),
        boundaries: [BoundaryKind::Open; 6],
        skin: 0.4 * dist.d_min,
    };
    let surfaces = vec![
        Surface::fixed("plate", plate(e), true),
        Surface::fixed("funnel", SurfaceShape::FunnelCone { axis: Vector3::zeros(), outlet_radius: outlet_r, outlet_z: z_outlet, wall_angle, top_z }, adhesive_walls),
        Surface::fixed("plug", SurfaceShape::Disk { center: Vector3::new(0.0,0.0,z_outlet), radius: outlet_r }, adhesive_walls),
    ];
    let mut sim = Simulation::new(set, mat, cfg, surfaces).unwrap();
    let t0 = std::time::Instant::now();
    let r = sim.run(&RunOptions { max_time: 0.05, quiescence: Some(Quiescence::default()), check_every: 200, ..RunOptions::default() }, &mut |_|{}).unwrap();
    println!("settle: {:?} at t={:.4}s wall {:.0}s max_speed {:.2e}", r, sim.time, t0.elapsed().as_secs_f64(), sim.max_speed());
    sim.set_surface_enabled("plug", false);
    for k in 0..14 {
        let r = sim.run(&RunOptions { max_time: 0.02, quiescence: if k>2 {Some(Quiescence::default())} else {None}, check_every: 200, ..RunOptions::default() }, &mut |_|{}).unwrap();
        let (mut in_funnel, mut falling, mut on_plate) = (0, 0, 0);
        for i in 0..sim.set.len() {
            if !sim.set.active[i] { continue; }
            let z = sim.set.position[i].z;
            if z > z_outlet { in_funnel += 1; } else if z > 2.0e-4 { falling += 1; } else { on_plate += 1; }
        }
        println!("t={:.3}s funnel={} falling={} plate={} swept={} max_v={:.2e} wall={:.0}s {:?}",
            sim.time, in_funnel, falling, on_plate, sim.swept_count, sim.max_speed(), t0.elapsed().as_secs_f64(), r);
        if r == StopReason::Quiescent && k > 2 { break; }
    }
}
