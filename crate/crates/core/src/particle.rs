//! Particle state arrays, material parameters and the size distribution.
//!
//! All quantities are SI: meters, seconds, kilograms, Newtons, Joules.

use nalgebra::Vector3;

use crate::error::{Error, Result};

/// State of all particles, stored as parallel arrays.
///
/// Indices are stable for the lifetime of a run; `id[i] == i` at creation
/// and never changes. Particles leaving the domain are flagged inactive
/// rather than removed.
#[derive(Debug, Clone, Default)]
pub struct ParticleSet {
    /// Stable particle ids.
    pub id: Vec<u64>,
    /// Centroid positions [m].
    pub position: Vec<Vector3<f64>>,
    /// Translational velocities [m/s].
    pub velocity: Vec<Vector3<f64>>,
    /// Angular velocities [rad/s].
    pub angular_velocity: Vec<Vector3<f64>>,
    /// Radii [m].
    pub radius: Vec<f64>,
    /// Inside-domain flag.
    pub active: Vec<bool>,
}

impl ParticleSet {
    pub fn with_radii(radii: Vec<f64>) -> Self {
        let n = radii.len();
        ParticleSet {
            id: (0..n as u64).collect(),
            position: vec![Vector3::zeros(); n],
            velocity: vec![Vector3::zeros(); n],
            angular_velocity: vec![Vector3::zeros(); n],
            radius: radii,
            active: vec![true; n],
        }
    }

    pub fn len(&self) -> usize {
        self.id.len()
    }

    pub fn is_empty(&self) -> bool {
        self.id.is_empty()
    }

    pub fn active_count(&self) -> usize {
        self.active.iter().filter(|a| **a).count()
    }

    /// Solid volume of particle `i` [m^3].
    pub fn volume(&self, i: usize) -> f64 {
        let r = self.radius[i];
        4.0 / 3.0 * std::f64::consts::PI * r * r * r
    }

    pub fn total_active_volume(&self) -> f64 {
        (0..self.len())
            .filter(|&i| self.active[i])
            .map(|i| self.volume(i))
            .sum()
    }
}

/// Mass of a sphere of radius `r` [m] and density `rho` [kg/m^3].
pub fn sphere_mass(r: f64, rho: f64) -> f64 {
    4.0 / 3.0 * std::f64::consts::PI * r * r * r * rho
}

/// Moment of inertia of a solid sphere about its centroid.
pub fn sphere_inertia(mass: f64, r: f64) -> f64 {
    0.4 * mass * r * r
}

/// Effective interaction radius of a pair, `r_i r_j / (r_i + r_j)`.
/// For particle-wall contacts the wall radius tends to infinity and the
/// effective radius is the particle radius itself.
pub fn effective_radius(r_i: f64, r_j: f64) -> f64 {
    r_i * r_j / (r_i + r_j)
}

/// Contact and adhesion parameters of the powder material.
#[derive(Debug, Clone, Copy)]
pub struct MaterialParams {
    /// Mass density [kg/m^3].
    pub density: f64,
    /// Normal contact stiffness [N/m].
    pub normal_stiffness: f64,
    /// Restitution coefficient in (0, 1].
    pub restitution: f64,
    /// Sliding friction coefficient.
    pub friction: f64,
    /// Rolling resistance coefficient.
    pub rolling_friction: f64,
    /// Effective surface energy [J/m^2]; drives the pull-off force.
    pub surface_energy: f64,
    /// Hamaker constant [J]; sets the spatial decay of adhesion.
    pub hamaker: f64,
    /// Relative force level at which adhesion is truncated.
    pub cutoff_ratio: f64,
    /// Angular-velocity threshold below which rolling resistance is off [rad/s].
    pub omega_tol: f64,
}

impl Default for MaterialParams {
    /// Ti-6Al-4V-like defaults at reduced contact stiffness. The stiffness
    /// keeps peak overlaps under 2.5% of the smallest radius for impact
    /// speeds up to ~0.1 m/s: overlap ~ v * sqrt(m/k_n) ~ 0.16 um for a
    /// median 30 um particle against the 0.19 um bound of the smallest.
    fn default() -> Self {
        MaterialParams {
            density: 4430.0,
            normal_stiffness: 25.0,
            restitution: 0.4,
            friction: 0.4,
            rolling_friction: 0.1,
            surface_energy: 1.0e-4,
            hamaker: 1.0e-19,
            cutoff_ratio: 0.01,
            omega_tol: 1.0e-8,
        }
    }
}

impl MaterialParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.density > 0.0) {
            return Err(Error::Config("density must be > 0".into()));
        }
        if !(self.normal_stiffness > 0.0) {
            return Err(Error::Config("k_n must be > 0".into()));
        }
        if !(self.restitution > 0.0 && self.restitution <= 1.0) {
            return Err(Error::Config("restitution must lie in (0, 1]".into()));
        }
        if self.friction < 0.0 || self.rolling_friction < 0.0 {
            return Err(Error::Config(
                "friction and rolling_friction must be >= 0".into(),
            ));
        }
        if self.surface_energy < 0.0 {
            return Err(Error::Config("surface_energy must be >= 0".into()));
        }
        if !(self.hamaker > 0.0) {
            return Err(Error::Config("hamaker must be > 0".into()));
        }
        if !(self.cutoff_ratio > 0.0 && self.cutoff_ratio < 1.0) {
            return Err(Error::Config("cutoff_ratio must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

/// Truncated log-normal particle size distribution, parameterized by the
/// median diameter, the log standard deviation and hard truncation bounds.
#[derive(Debug, Clone, Copy)]
pub struct SizeDistribution {
    /// Median diameter d50 [m].
    pub d50: f64,
    /// Standard deviation of ln(d).
    pub sigma_ln: f64,
    /// Smallest admissible diameter [m].
    pub d_min: f64,
    /// Largest admissible diameter [m]; also the theoretical maximum
    /// diameter used to normalize layer thicknesses.
    pub d_max: f64,
}

impl Default for SizeDistribution {
    /// 15-50 um powder with untruncated D90 = 44 um:
    /// sigma_ln = ln(44/30) / 1.2816.
    fn default() -> Self {
        SizeDistribution {
            d50: 30.0e-6,
            sigma_ln: 0.2988,
            d_min: 15.0e-6,
            d_max: 50.0e-6,
        }
    }
}

impl SizeDistribution {
    pub fn validate(&self) -> Result<()> {
        if !(self.d_min > 0.0 && self.d_min < self.d50 && self.d50 < self.d_max) {
            return Err(Error::Config(
                "size distribution requires 0 < d_min < d50 < d_max".into(),
            ));
        }
        if !(self.sigma_ln > 0.0) {
            return Err(Error::Config("sigma_ln must be > 0".into()));
        }
        Ok(())
    }

    /// Mean particle volume [m^3], computed by quadrature over the
    /// truncated density. Used to size reservoirs.
    pub fn mean_volume(&self) -> f64 {
        // Simpson quadrature of d^3 against the truncated log-normal pdf.
        let n = 2000;
        let lo = self.d_min.ln();
        let hi = self.d_max.ln();
        let h = (hi - lo) / n as f64;
        let mu = self.d50.ln();
        let pdf = |x: f64| {
            let z = (x - mu) / self.sigma_ln;
            (-0.5 * z * z).exp()
        };
        let mut num = 0.0;
        let mut den = 0.0;
        for k in 0..=n {
            let x = lo + k as f64 * h;
            let w = if k == 0 || k == n {
                1.0
            } else if k % 2 == 1 {
                4.0
            } else {
                2.0
            };
            let p = w * pdf(x);
            num += p * (3.0 * x).exp();
            den += p;
        }
        std::f64::consts::PI / 6.0 * num / den
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mass_and_inertia_follow_sphere_formulas() {
        let r = 15.0e-6;
        let rho = 4430.0;
        let m = sphere_mass(r, rho);
        assert_eq!(m, 4.0 / 3.0 * std::f64::consts::PI * r.powi(3) * rho);
        assert_eq!(sphere_inertia(m, r), 0.4 * m * r * r);
    }

    #[test]
    fn effective_radius_of_equal_spheres_is_half() {
        let r = effective_radius(15.0e-6, 15.0e-6);
        assert!((r - 7.5e-6).abs() < 1e-20);
        // wall limit: r_j -> inf recovers r_i
        let rw = effective_radius(15.0e-6, 1.0e12);
        assert!((rw - 15.0e-6).abs() / 15.0e-6 < 1e-10);
    }

    #[test]
    fn material_validation_rejects_bad_fields() {
        let mut p = MaterialParams::default();
        p.restitution = 0.0;
        assert!(p.validate().is_err());
        let mut p = MaterialParams::default();
        p.cutoff_ratio = 1.0;
        assert!(p.validate().is_err());
        let mut p = MaterialParams::default();
        p.surface_energy = -1.0;
        assert!(p.validate().is_err());
        assert!(MaterialParams::default().validate().is_ok());
    }

    #[test]
    fn size_distribution_validation() {
        let mut d = SizeDistribution::default();
        assert!(d.validate().is_ok());
        d.d_min = 40.0e-6;
        assert!(d.validate().is_err());
    }

    #[test]
    fn mean_volume_close_to_lognormal_moment() {
        // With wide bounds, the truncated mean of d^3 approaches the
        // closed-form log-normal moment d50^3 * exp(4.5 sigma^2).
        let d = SizeDistribution {
            d50: 30.0e-6,
            sigma_ln: 0.2988,
            d_min: 1.0e-6,
            d_max: 500.0e-6,
        };
        let expect = std::f64::consts::PI / 6.0
            * (30.0e-6f64).powi(3)
            * (4.5 * 0.2988f64.powi(2)).exp();
        let got = d.mean_volume();
        assert!((got - expect).abs() / expect < 1e-3, "{got} vs {expect}");
    }
}
