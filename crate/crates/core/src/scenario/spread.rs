//! Powder spreading over a substrate with a rigid blade or roller.
//!
//! Scene layout along x: a short tool run-up, a powder reservoir that is
//! settled between temporary walls, the spread track, and an open edge
//! where excess powder is swept off and deactivated. The transverse
//! direction is periodic. Layer metrics are evaluated on the track with
//! entry/exit margins of five maximum diameters excluded.

use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::metrics::{compute_layer_metrics, LayerMetrics, Rect};
use crate::particle::{MaterialParams, ParticleSet, SizeDistribution};
use crate::sampling::{place_random, sample_radii, BoxRegion};
use crate::sim::{BoundaryKind, Quiescence, RunOptions, Simulation, StepConfig};
use crate::surface::{substrate, x_wall, Surface, ToolKind, ToolKinematics};

use super::{Observer, RunParams};

/// Margin (in maximum diameters) excluded from each end of the track.
pub const METRIC_MARGIN_DIAMETERS: f64 = 5.0;

/// Spreading scene description.
#[derive(Debug, Clone)]
pub struct SpreadScene {
    pub dist: SizeDistribution,
    pub mat: MaterialParams,
    pub tool_kind: ToolKind,
    /// Nominal layer thickness as a multiple of the maximum diameter.
    pub t0_ratio: f64,
    /// Tool traverse speed [m/s].
    pub traverse_speed: f64,
    /// Roller radius [m] (roller only).
    pub roller_radius: f64,
    /// Counter-rotation surface speed ratio; 0 = non-rotating.
    pub roller_surface_speed_ratio: f64,
    /// Track length from reservoir end to the substrate edge [m].
    pub spread_length: f64,
    /// Periodic track width [m].
    pub track_width: f64,
    /// Reservoir length [m]; 0 = auto-size from the required volume.
    pub reservoir_length: f64,
    /// Safety factor on the reservoir volume over the dense-layer bound.
    pub reservoir_factor: f64,
    /// Particle count; 0 = auto-size from the reservoir requirement.
    pub n_particles: usize,
    /// Metric grid spacing [m]; 0 = one maximum diameter.
    pub grid_spacing: f64,
    pub settle_max_time: f64,
    pub tail_max_time: f64,
}

impl Default for SpreadScene {
    fn default() -> Self {
        SpreadScene {
            dist: SizeDistribution::default(),
            mat: MaterialParams::default(),
            tool_kind: ToolKind::Blade,
            t0_ratio: 3.0,
            traverse_speed: 0.05,
            roller_radius: 5.0e-4,
            roller_surface_speed_ratio: 1.0,
            spread_length: 1.5e-3,
            track_width: 5.0e-4,
            reservoir_length: 0.0,
            reservoir_factor: 1.35,
            n_particles: 0,
            grid_spacing: 0.0,
            settle_max_time: 0.05,
            tail_max_time: 0.01,
        }
    }
}

/// Geometry derived from a `SpreadScene`.
#[derive(Debug, Clone)]
pub struct SpreadLayout {
    pub t0: f64,
    /// Reservoir span [m].
    pub x_res0: f64,
    pub x_res1: f64,
    /// Substrate edge [m]; powder swept past it falls and is discarded.
    pub x_edge: f64,
    /// Tool working-face start [m].
    pub tool_start: f64,
    /// Tool working-face stop [m].
    pub tool_stop: f64,
    /// Metric evaluation region.
    pub region: Rect,
    pub n_particles: usize,
    pub reservoir_length: f64,
    /// Initial fill box for random insertion.
    pub fill: BoxRegion,
    pub domain: BoxRegion,
    pub grid_spacing: f64,
}

impl SpreadScene {
    pub fn validate(&self) -> Result<()> {
        self.dist.validate()?;
        self.mat.validate()?;
        if !(self.t0_ratio > 0.0) {
            return Err(Error::Config("t0_ratio must be positive".into()));
        }
        if !(self.traverse_speed > 0.0) {
            return Err(Error::Config("traverse_speed must be positive".into()));
        }
        if self.tool_kind == ToolKind::Roller && !(self.roller_radius > 0.0) {
            return Err(Error::Config("roller_radius must be positive".into()));
        }
        if self.tool_kind == ToolKind::Roller && self.roller_surface_speed_ratio < 0.0 {
            return Err(Error::Config(
                "roller_surface_speed_ratio must be >= 0 (counter-rotation positive)".into(),
            ));
        }
        let margin = METRIC_MARGIN_DIAMETERS * self.dist.d_max;
        if self.spread_length <= 2.0 * margin + 2.0 * self.dist.d_max {
            return Err(Error::Config(format!(
                "spread_length {:.3e} m leaves no metric region after the \
                 {:.3e} m end margins",
                self.spread_length, margin
            )));
        }
        if !(self.track_width > 2.0 * self.dist.d_max) {
            return Err(Error::Config("track_width too small".into()));
        }
        Ok(())
    }

    /// Nominal layer thickness [m].
    pub fn t0(&self) -> f64 {
        self.t0_ratio * self.dist.d_max
    }

    /// Resolve all derived geometry, auto-sizing the particle count and
    /// the reservoir so the dense-layer volume bound is met and, for a
    /// roller, the heap stays below the roller clearance.
    pub fn layout(&self) -> Result<SpreadLayout> {
        self.validate()?;
        let d_max = self.dist.d_max;
        let t0 = self.t0();
        let margin = METRIC_MARGIN_DIAMETERS * d_max;
        let mean_v = self.dist.mean_volume();
        let w = self.track_width;

        let blade_thickness = d_max;
        let x_face0 = blade_thickness + 2.0e-5; // blade front at t = 0
        let x_res0 = x_face0 + 1.0e-5;

        // heap height cap: generous for the blade (it is arbitrarily
        // tall), clearance-bound for the roller shell
        let heap_cap = match self.tool_kind {
            ToolKind::Blade => 9.0e-4,
            ToolKind::Roller => 0.72 * (t0 + self.roller_radius),
        };
        let settled_packing = 0.58;

        let mut res_len = if self.reservoir_length > 0.0 {
            self.reservoir_length
        } else {
            9.0e-4
        };
        let mut n = self.n_particles;
        for _ in 0..8 {
            let x_edge = x_res0 + res_len + self.spread_length;
            if self.n_particles == 0 {
                let need =
                    self.reservoir_factor * 0.74 * t0 * w * (x_edge - x_res0) / mean_v;
                n = need.ceil() as usize;
            }
            let heap_h = n as f64 * mean_v / settled_packing / (res_len * w);
            if self.reservoir_length > 0.0 || heap_h <= heap_cap {
                break;
            }
            res_len = n as f64 * mean_v / settled_packing / (heap_cap * w);
        }

        let x_res1 = x_res0 + res_len;
        let x_edge = x_res1 + self.spread_length;
        // random insertion loses one diameter of footprint to the
        // per-particle inset, and packs loosely
        let usable = (res_len - d_max) * (w - d_max);
        let fill_h = n as f64 * mean_v / 0.22 / usable + d_max;
        let z_top = match self.tool_kind {
            ToolKind::Blade => fill_h + 6.0 * d_max,
            ToolKind::Roller => {
                (fill_h + 6.0 * d_max).max(t0 + 2.0 * self.roller_radius + 2.0 * d_max)
            }
        };
        let tool_start = match self.tool_kind {
            ToolKind::Blade => x_face0,
            ToolKind::Roller => x_res0 - self.roller_radius - 2.0e-5,
        };
        Ok(SpreadLayout {
            t0,
            x_res0,
            x_res1,
            x_edge,
            tool_start,
            tool_stop: x_edge + 1.5e-4,
            region: Rect {
                x0: x_res1 + margin,
                y0: 0.0,
                x1: x_edge - margin,
                y1: w,
            },
            n_particles: n,
            reservoir_length: res_len,
            fill: BoxRegion::new(
                Vector3::new(x_res0, 0.0, 0.0),
                Vector3::new(x_res1, w, fill_h),
            ),
            domain: BoxRegion::new(
                Vector3::new(0.0, 0.0, -3.0e-4),
                Vector3::new(x_edge + 3.0e-4, w, z_top),
            ),
            grid_spacing: if self.grid_spacing > 0.0 {
                self.grid_spacing
            } else {
                d_max
            },
        })
    }

    /// Prescribed tool motion for this scene.
    pub fn tool(&self, layout: &SpreadLayout) -> ToolKinematics {
        ToolKinematics {
            kind: self.tool_kind,
            gap_height: layout.t0,
            blade_thickness: self.dist.d_max,
            roller_radius: self.roller_radius,
            traverse_speed: self.traverse_speed,
            surface_speed_ratio: match self.tool_kind {
                ToolKind::Blade => 0.0,
                ToolKind::Roller => self.roller_surface_speed_ratio,
            },
            start_x: layout.tool_start,
        }
    }
}

/// Result of one spreading run.
#[derive(Debug)]
pub struct SpreadOutcome {
    pub layout: SpreadLayout,
    pub metrics: LayerMetrics,
    /// Solid volume initially placed [m^3].
    pub initial_volume: f64,
    /// Solid volume deposited on the track [m^3].
    pub deposited_volume: f64,
    /// Solid volume swept off the domain [m^3].
    pub swept_volume: f64,
    /// Solid volume still in the reservoir/run-up zone [m^3].
    pub remainder_volume: f64,
    /// Reservoir below the dense-layer volume bound.
    pub insufficient_reservoir: bool,
    /// Highest particle center above the substrate inside the metric
    /// region [m].
    pub max_center_height: f64,
    pub set: ParticleSet,
}

/// Build the scene, settle the reservoir, traverse the tool, and
/// evaluate the layer metrics.
pub fn run_spreading(
    scene: &SpreadScene,
    run: &RunParams,
    observer: Observer,
) -> Result<SpreadOutcome> {
    let layout = scene.layout()?;
    let dt = run.resolve_dt(scene.dist.d_min, &scene.mat);
    let boundaries = [
        BoundaryKind::Wall,
        BoundaryKind::Open,
        BoundaryKind::Periodic,
        BoundaryKind::Periodic,
        BoundaryKind::Open,
        BoundaryKind::Open,
    ];
    let cfg = StepConfig {
        dt,
        gravity: Vector3::new(0.0, 0.0, -9.81),
        domain: layout.domain,
        boundaries,
        skin: 0.4 * scene.dist.d_min,
    };

    let radii = sample_radii(&scene.dist, layout.n_particles, run.seed)?;
    let set = place_random(radii, &layout.fill, run.seed.wrapping_add(0x9e37_79b9))?;
    let initial_volume = set.total_active_volume();

    let required = 0.74 * layout.t0 * scene.track_width * (layout.x_edge - layout.x_res1);
    let insufficient = initial_volume < required;
    if insufficient {
        eprintln!(
            "warning: reservoir volume {initial_volume:.3e} m^3 is below the dense-layer \
             bound {required:.3e} m^3; metrics will be flagged"
        );
    }

    // stage 1: settle the reservoir between temporary walls
    let settle_surfaces = vec![
        Surface::fixed("substrate", substrate(0.0, layout.x_edge), true),
        Surface::fixed("res_left", x_wall(layout.x_res0, 0.0, 1.0e-4, true), true),
        Surface::fixed("res_right", x_wall(layout.x_res1, 0.0, 1.0e-4, false), true),
    ];
    let mut settle = Simulation::new(set, scene.mat, cfg.clone(), settle_surfaces)?;
    settle.run(
        &RunOptions {
            max_time: scene.settle_max_time,
            quiescence: Some(Quiescence::default()),
            snapshot_every: run.snapshot_every,
            progress_every: run.progress_every,
            ..RunOptions::default()
        },
        observer,
    )?;
    let settled = settle.set.clone();

    // stage 2: remove the walls and traverse the tool
    let tool = scene.tool(&layout);
    let spread_surfaces = vec![
        Surface::fixed("substrate", substrate(0.0, layout.x_edge), true),
        tool.surface(),
    ];
    let mut sim = Simulation::new(settled, scene.mat, cfg, spread_surfaces)?;
    let travel_time = tool.time_to_reach(layout.tool_stop);
    sim.run(
        &RunOptions {
            max_time: travel_time,
            quiescence: None,
            snapshot_every: run.snapshot_every,
            progress_every: run.progress_every,
            ..RunOptions::default()
        },
        observer,
    )?;
    sim.run(
        &RunOptions {
            max_time: scene.tail_max_time,
            quiescence: Some(Quiescence::default()),
            snapshot_every: run.snapshot_every,
            progress_every: run.progress_every,
            ..RunOptions::default()
        },
        observer,
    )?;

    // metrics and volume bookkeeping
    let metrics = compute_layer_metrics(
        &sim.set,
        layout.region,
        layout.t0,
        layout.grid_spacing,
        scene.dist.d_max,
    )?;
    let mut deposited = 0.0;
    let mut remainder = 0.0;
    let mut max_center = 0.0f64;
    for i in 0..sim.set.len() {
        if !sim.set.active[i] {
            continue;
        }
        let p = sim.set.position[i];
        let v = sim.set.volume(i);
        if p.x >= layout.x_res1 && p.x <= layout.x_edge {
            deposited += v;
        } else {
            remainder += v;
        }
        if p.x >= layout.region.x0 && p.x <= layout.region.x1 {
            max_center = max_center.max(p.z);
        }
    }

    Ok(SpreadOutcome {
        layout,
        metrics,
        initial_volume,
        deposited_volume: deposited,
        swept_volume: sim.swept_volume,
        remainder_volume: remainder,
        insufficient_reservoir: insufficient,
        max_center_height: max_center,
        set: sim.set,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::no_observer;

    #[test]
    fn layout_geometry_is_consistent() {
        let scene = SpreadScene::default();
        let l = scene.layout().unwrap();
        assert!(l.x_res0 < l.x_res1 && l.x_res1 < l.x_edge);
        assert!((l.t0 - 150.0e-6).abs() < 1e-12);
        assert!(l.region.x0 > l.x_res1 && l.region.x1 < l.x_edge);
        assert!((l.region.x0 - (l.x_res1 + 2.5e-4)).abs() < 1e-12);
        assert!(l.n_particles > 1000);
        // reservoir volume meets the dense-layer bound
        let necessary = 0.74 * l.t0 * scene.track_width * (l.x_edge - l.x_res0);
        let supplied = l.n_particles as f64 * scene.dist.mean_volume();
        assert!(supplied >= necessary);
    }

    #[test]
    fn roller_layout_respects_heap_clearance() {
        let scene = SpreadScene {
            tool_kind: ToolKind::Roller,
            ..SpreadScene::default()
        };
        let l = scene.layout().unwrap();
        let heap_h = l.n_particles as f64 * scene.dist.mean_volume()
            / 0.58
            / (l.reservoir_length * scene.track_width);
        assert!(heap_h <= 0.72 * (l.t0 + scene.roller_radius) * 1.0001);
        // roller body starts clear of the reservoir
        assert!(l.tool_start + scene.roller_radius <= l.x_res0);
    }

    #[test]
    fn empty_reservoir_yields_zero_metrics() {
        // a single particle placed in the reservoir; the track stays bare
        let scene = SpreadScene {
            n_particles: 1,
            settle_max_time: 1.0e-4,
            tail_max_time: 1.0e-4,
            ..SpreadScene::default()
        };
        let out = run_spreading(&scene, &RunParams::default(), &mut no_observer()).unwrap();
        assert!(out.insufficient_reservoir);
        assert!(out.metrics.summary.phi_mean < 1e-6);
    }

    #[test]
    fn mass_balance_is_exact_for_a_short_run() {
        let scene = SpreadScene {
            n_particles: 400,
            spread_length: 8.0e-4,
            track_width: 3.0e-4,
            reservoir_length: 4.0e-4,
            settle_max_time: 2.0e-3,
            tail_max_time: 5.0e-4,
            ..SpreadScene::default()
        };
        let out = run_spreading(&scene, &RunParams::default(), &mut no_observer()).unwrap();
        let total = out.deposited_volume + out.swept_volume + out.remainder_volume;
        assert!(
            ((total - out.initial_volume) / out.initial_volume).abs() < 1e-12,
            "volume leak: {total:.6e} vs {:.6e}",
            out.initial_volume
        );
    }
}
