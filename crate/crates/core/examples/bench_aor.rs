use powder_rake::particle::MaterialParams;
use powder_rake::scenario::{no_observer, run_static_aor, FunnelScene, RunParams};

fn main() {
    let gamma: f64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1.0e-4);
    let n: usize = std::env::args().nth(2).and_then(|s| s.parse().ok()).unwrap_or(3000);
    let frictionless = std::env::args().nth(3).map(|s| s == "frictionless").unwrap_or(false);
    let mut mat = MaterialParams { surface_energy: gamma, ..MaterialParams::default() };
    if frictionless {
        mat.friction = 0.0;
        mat.rolling_friction = 0.0;
    }
    let scene = FunnelScene { mat, n_particles: n, ..FunnelScene::default() };
    let t = std::time::Instant::now();
    match run_static_aor(&scene, &RunParams { seed: 42, ..RunParams::default() }, &mut no_observer()) {
        Ok(out) => println!(
            "gamma={:.1e} n={} -> AOR {:.2} deg ({} surface pts, heap {:.3e} m, {} remaining) in {:.1}s",
            gamma, n, out.angle_deg, out.surface_points, out.heap_height, out.remaining,
            t.elapsed().as_secs_f64()
        ),
        Err(e) => println!("gamma={gamma:.1e} n={n} -> error: {e} in {:.1}s", t.elapsed().as_secs_f64()),
    }
}
