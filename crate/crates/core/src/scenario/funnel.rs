//! Static angle-of-repose funnel test and surface-energy calibration.
//!
//! Powder settles inside a conical funnel above a closed outlet, the
//! outlet opens, the discharge piles up on a flat plate, and the angle
//! of repose is measured by a least-squares cone fit to the heap's
//! free-surface points over the 20-80% band of the heap height.

use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::particle::{MaterialParams, ParticleSet, SizeDistribution};
use crate::sampling::{place_random_where, sample_radii, BoxRegion};
use crate::sim::{BoundaryKind, Quiescence, RunOptions, Simulation, StepConfig, StopReason};
use crate::surface::{plate, Surface, SurfaceShape};

use super::{Observer, RunParams};

/// Funnel discharge scene.
#[derive(Debug, Clone)]
pub struct FunnelScene {
    pub dist: SizeDistribution,
    pub mat: MaterialParams,
    /// Outlet diameter [m]; at least 5 maximum diameters so a
    /// cohesionless powder cannot arch permanently.
    pub outlet_diameter: f64,
    /// Funnel wall slope from horizontal [rad].
    pub wall_angle: f64,
    /// Outlet height above the collection plate [m].
    pub drop_height: f64,
    /// Half-extent of the square collection plate [m].
    pub plate_half_extent: f64,
    pub n_particles: usize,
    /// Cap on the initial in-funnel settling stage [s].
    pub settle_max_time: f64,
    /// Cap on the discharge stage [s].
    pub discharge_max_time: f64,
}

impl FunnelScene {
    pub fn validate(&self) -> Result<()> {
        self.dist.validate()?;
        self.mat.validate()?;
        if self.outlet_diameter < 5.0 * self.dist.d_max {
            return Err(Error::Config(format!(
                "funnel outlet diameter {:.3e} m must be at least 5 d_max = {:.3e} m",
                self.outlet_diameter,
                5.0 * self.dist.d_max
            )));
        }
        if !(self.wall_angle > 0.0 && self.wall_angle < std::f64::consts::FRAC_PI_2) {
            return Err(Error::Config("funnel wall angle must lie in (0, 90) deg".into()));
        }
        if self.n_particles == 0 {
            return Err(Error::Config("funnel run needs n_particles >= 1".into()));
        }
        Ok(())
    }
}

impl Default for FunnelScene {
    /// The outlet is sized well above the cohesive-arch scale of the
    /// most cohesive powders studied (arching sets in once the adhesive
    /// strength ~ F_S0/d^2 reaches the gravity stress ~ rho_bulk g D at
    /// the outlet), so every sweep point discharges fully.
    fn default() -> Self {
        FunnelScene {
            dist: SizeDistribution::default(),
            mat: MaterialParams::default(),
            outlet_diameter: 1.0e-3,
            wall_angle: 60f64.to_radians(),
            drop_height: 5.0e-4,
            plate_half_extent: 1.4e-3,
            n_particles: 3000,
            settle_max_time: 0.05,
            discharge_max_time: 0.25,
        }
    }
}

/// Result of one funnel run.
#[derive(Debug, Clone)]
pub struct AorOutcome {
    /// Fitted angle of repose [deg].
    pub angle_deg: f64,
    /// Free-surface points used by the fit.
    pub surface_points: usize,
    /// Heap height [m].
    pub heap_height: f64,
    /// Particles still on the plate at measurement time.
    pub remaining: usize,
    pub set: ParticleSet,
}

/// Fill the funnel, settle, open the outlet, let the heap form, then
/// fit the angle of repose.
pub fn run_static_aor(
    scene: &FunnelScene,
    run: &RunParams,
    observer: Observer,
) -> Result<AorOutcome> {
    scene.validate()?;
    let outlet_r = 0.5 * scene.outlet_diameter;
    let z_outlet = scene.drop_height;
    let tan = scene.wall_angle.tan();

    // fill height from the frustum volume at a loose random-insertion
    // density of ~25%
    let solid = scene.n_particles as f64 * scene.dist.mean_volume();
    let fill_target = solid / 0.22;
    let mut fill_h = 2.0 * scene.dist.d_max;
    while frustum_volume(outlet_r, tan, fill_h) < fill_target {
        fill_h += scene.dist.d_max;
    }
    let top_z = z_outlet + fill_h + 6.0 * scene.dist.d_max;
    let top_r = outlet_r + (top_z - z_outlet) / tan;

    let funnel_shape = SurfaceShape::FunnelCone {
        axis: Vector3::zeros(),
        outlet_radius: outlet_r,
        outlet_z: z_outlet,
        wall_angle: scene.wall_angle,
        top_z,
    };

    // random insertion inside the cone, resting above the closed outlet
    let radii = sample_radii(&scene.dist, scene.n_particles, run.seed)?;
    let bounding = BoxRegion::new(
        Vector3::new(-top_r, -top_r, z_outlet + 0.5 * scene.dist.d_max),
        Vector3::new(top_r, top_r, top_z - scene.dist.d_max),
    );
    let set = place_random_where(
        radii,
        &bounding,
        run.seed.wrapping_add(0x9e37_79b9),
        |p, r| {
            let rho = (p.x * p.x + p.y * p.y).sqrt();
            let wall_rho = outlet_r + (p.z - z_outlet) / tan;
            rho + r < wall_rho
        },
    )?;

    let dt = run.resolve_dt(scene.dist.d_min, &scene.mat);
    let e = scene.plate_half_extent;
    let domain = BoxRegion::new(
        Vector3::new(-e - 4.0e-4, -e - 4.0e-4, -3.0e-4),
        Vector3::new(e + 4.0e-4, e + 4.0e-4, top_z + 4.0e-4),
    );
    let cfg = StepConfig {
        dt,
        gravity: Vector3::new(0.0, 0.0, -9.81),
        domain,
        boundaries: [BoundaryKind::Open; 6],
        skin: 0.4 * scene.dist.d_min,
    };
    let surfaces = vec![
        Surface::fixed("plate", plate(scene.plate_half_extent), true),
        Surface::fixed("funnel", funnel_shape, false),
        Surface::fixed(
            "plug",
            SurfaceShape::Disk {
                center: Vector3::new(0.0, 0.0, z_outlet),
                radius: outlet_r,
            },
            false,
        ),
    ];
    let mut sim = Simulation::new(set, scene.mat, cfg, surfaces)?;

    // settle inside the funnel
    sim.run(
        &RunOptions {
            max_time: scene.settle_max_time,
            quiescence: Some(Quiescence::default()),
            snapshot_every: run.snapshot_every,
            progress_every: run.progress_every,
            ..RunOptions::default()
        },
        observer,
    )?;

    // open the outlet and let the heap form
    sim.set_surface_enabled("plug", false);
    let reason = sim.run(
        &RunOptions {
            max_time: scene.discharge_max_time,
            quiescence: Some(Quiescence::default()),
            snapshot_every: run.snapshot_every,
            progress_every: run.progress_every,
            ..RunOptions::default()
        },
        observer,
    )?;
    if reason == StopReason::MaxTime {
        eprintln!(
            "warning: funnel discharge hit the time cap before quiescence \
             (max speed {:.3e} m/s)",
            sim.max_speed()
        );
    }

    let (angle_deg, surface_points, heap_height) = measure_aor(
        &sim.set,
        scene.dist.d50,
        scene.plate_half_extent,
        scene.drop_height,
    )?;
    Ok(AorOutcome {
        angle_deg,
        surface_points,
        heap_height,
        remaining: sim.n_active(),
        set: sim.set,
    })
}

fn frustum_volume(r0: f64, tan: f64, h: f64) -> f64 {
    let r1 = r0 + h / tan;
    std::f64::consts::PI / 3.0 * h * (r0 * r0 + r0 * r1 + r1 * r1)
}

/// Least-squares cone fit to the heap free surface.
///
/// Surface points are the topmost sphere tops per substrate-plane grid
/// cell (cell size d50); the fit uses points between 20% and 80% of the
/// heap height and needs at least 200 of them. Particles at or above
/// `z_ceiling` (residue near the funnel outlet) are ignored.
pub fn measure_aor(
    set: &ParticleSet,
    d50: f64,
    half_extent: f64,
    z_ceiling: f64,
) -> Result<(f64, usize, f64)> {
    let n_cells = ((2.0 * half_extent) / d50).ceil() as usize;
    if n_cells == 0 {
        return Err(Error::Measurement("degenerate plate extent".into()));
    }
    let cell = 2.0 * half_extent / n_cells as f64;
    let mut top: Vec<f64> = vec![f64::NEG_INFINITY; n_cells * n_cells];
    let mut rho_at: Vec<f64> = vec![0.0; n_cells * n_cells];
    for i in 0..set.len() {
        if !set.active[i] {
            continue;
        }
        let p = set.position[i];
        if p.x.abs() >= half_extent || p.y.abs() >= half_extent || p.z < 0.0 || p.z >= z_ceiling
        {
            continue;
        }
        let ix = (((p.x + half_extent) / cell) as usize).min(n_cells - 1);
        let iy = (((p.y + half_extent) / cell) as usize).min(n_cells - 1);
        let z_top = p.z + set.radius[i];
        let slot = iy * n_cells + ix;
        if z_top > top[slot] {
            top[slot] = z_top;
            rho_at[slot] = (p.x * p.x + p.y * p.y).sqrt();
        }
    }
    let heap_height = top
        .iter()
        .cloned()
        .filter(|v| v.is_finite())
        .fold(0.0f64, f64::max);
    if heap_height <= 0.0 {
        return Err(Error::Measurement("no settled heap on the plate".into()));
    }
    let (lo, hi) = (0.2 * heap_height, 0.8 * heap_height);
    let mut n = 0usize;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for slot in 0..top.len() {
        let z = top[slot];
        if z.is_finite() && z >= lo && z <= hi {
            let rho = rho_at[slot];
            n += 1;
            sx += rho;
            sy += z;
            sxx += rho * rho;
            sxy += rho * z;
        }
    }
    if n < 200 {
        return Err(Error::Measurement(format!(
            "heap too small for a cone fit: {n} surface points in the 20-80% band \
             (need 200)"
        )));
    }
    let nf = n as f64;
    let denom = nf * sxx - sx * sx;
    if denom.abs() <= f64::EPSILON * nf * sxx {
        return Err(Error::Measurement("degenerate surface-point spread".into()));
    }
    let slope = (nf * sxy - sx * sy) / denom; // z = a + slope * rho
    let angle_deg = (-slope).atan().to_degrees();
    Ok((angle_deg, n, heap_height))
}

/// One bisection trace entry: (surface energy, measured angle).
pub type TracePoint = (f64, f64);

#[derive(Debug, Clone)]
pub struct CalibrationOutcome {
    /// Calibrated surface energy [J/m^2].
    pub gamma: f64,
    /// Angle at the returned gamma [deg].
    pub angle_deg: f64,
    /// All evaluated points, endpoints first.
    pub trace: Vec<TracePoint>,
    /// Bracket width at termination [J/m^2].
    pub width: f64,
    /// Whether the angle tolerance was met.
    pub converged: bool,
}

/// Angle tolerance of the calibration loop [deg].
pub const CALIBRATION_TOLERANCE_DEG: f64 = 2.0;
/// Iteration cap of the calibration loop.
pub const CALIBRATION_MAX_ITER: usize = 8;

/// Bisection on the surface energy until the measured angle of repose is
/// within 2 degrees of the target or 8 iterations have run.
///
/// `evaluate` maps a surface energy to a measured angle (one funnel run
/// in production; tests may supply an analytic response). Requires a
/// valid bracket: AOR(lo) < target < AOR(hi).
pub fn calibrate_gamma(
    target_deg: f64,
    bracket: (f64, f64),
    mut evaluate: impl FnMut(f64) -> Result<f64>,
) -> Result<CalibrationOutcome> {
    let (mut lo, mut hi) = bracket;
    if !(lo < hi) {
        return Err(Error::Calibration(format!(
            "invalid bracket: gamma_lo = {lo:.3e} must be < gamma_hi = {hi:.3e}"
        )));
    }
    let a_lo = evaluate(lo)?;
    let a_hi = evaluate(hi)?;
    let mut trace = vec![(lo, a_lo), (hi, a_hi)];
    if !(a_lo < target_deg && target_deg < a_hi) {
        return Err(Error::Calibration(format!(
            "target {target_deg:.2} deg not bracketed: AOR({lo:.3e}) = {a_lo:.2} deg, \
             AOR({hi:.3e}) = {a_hi:.2} deg"
        )));
    }
    let mut gamma = 0.5 * (lo + hi);
    let mut angle = f64::NAN;
    let mut converged = false;
    for _ in 0..CALIBRATION_MAX_ITER {
        gamma = 0.5 * (lo + hi);
        angle = evaluate(gamma)?;
        trace.push((gamma, angle));
        if (angle - target_deg).abs() <= CALIBRATION_TOLERANCE_DEG {
            converged = true;
            break;
        }
        if angle < target_deg {
            lo = gamma;
        } else {
            hi = gamma;
        }
    }
    Ok(CalibrationOutcome {
        gamma,
        angle_deg: angle,
        trace,
        width: hi - lo,
        converged,
    })
}
