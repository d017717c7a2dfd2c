//! Scene builders and drivers for the simulated experiments: powder
//! spreading with a rigid blade or roller, and the static
//! angle-of-repose funnel test with its surface-energy calibration loop.

pub mod funnel;
pub mod spread;

pub use funnel::{calibrate_gamma, run_static_aor, AorOutcome, CalibrationOutcome, FunnelScene};
pub use spread::{run_spreading, SpreadOutcome, SpreadScene};

use crate::particle::MaterialParams;
use crate::sim::{admissible_dt, Simulation};

/// Knobs shared by every scenario run.
#[derive(Debug, Clone)]
pub struct RunParams {
    pub seed: u64,
    /// Timestep override [s]; `None` picks 90% of the stability limit.
    pub dt: Option<f64>,
    /// Steps between snapshot-observer calls (0 = final state only).
    pub snapshot_every: u64,
    /// Steps between progress lines on stderr (0 = quiet).
    pub progress_every: u64,
}

impl Default for RunParams {
    fn default() -> Self {
        RunParams {
            seed: 42,
            dt: None,
            snapshot_every: 0,
            progress_every: 0,
        }
    }
}

impl RunParams {
    /// Resolve the timestep against the stability rule for the smallest
    /// admissible particle.
    pub fn resolve_dt(&self, min_diameter: f64, mat: &MaterialParams) -> f64 {
        match self.dt {
            Some(dt) => dt,
            None => 0.9 * admissible_dt(0.5 * min_diameter, mat),
        }
    }
}

/// Observer invoked at snapshot cadence and at the end of each stage.
pub type Observer<'a> = &'a mut dyn FnMut(&Simulation);

/// No-op observer for callers that only want the outcome.
pub fn no_observer() -> impl FnMut(&Simulation) {
    |_: &Simulation| {}
}
