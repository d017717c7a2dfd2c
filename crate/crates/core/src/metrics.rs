//! Layer-quality metrics: the packing fraction field `phi(x, y)` over a
//! reference prism of height `t0` above the substrate, the surface
//! profile `z_int(x, y)`, and their scalar summaries.

use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::particle::ParticleSet;

/// Columns per sphere diameter for the in-plane quadrature. The vertical
/// direction is exact (chord lengths), so the only discretization error
/// is the midpoint rule across each sphere's footprint; 20 columns keep
/// the per-sphere volume bias below ~0.3%.
const COLUMNS_PER_DIAMETER: usize = 20;

/// Rectangular evaluation region in the substrate plane [m].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Rect {
    pub fn area(&self) -> f64 {
        (self.x1 - self.x0) * (self.y1 - self.y0)
    }
}

/// A scalar field on a uniform grid over a `Rect`.
#[derive(Debug, Clone)]
pub struct Field2D {
    pub region: Rect,
    pub nx: usize,
    pub ny: usize,
    /// Actual spacing after snapping the grid to the region [m].
    pub dx: f64,
    pub dy: f64,
    pub data: Vec<f64>,
}

impl Field2D {
    fn zeros(region: Rect, spacing: f64) -> Result<Field2D> {
        let ex = region.x1 - region.x0;
        let ey = region.y1 - region.y0;
        if !(ex > 0.0 && ey > 0.0) {
            return Err(Error::Measurement(
                "empty evaluation region".into(),
            ));
        }
        if !(spacing > 0.0) {
            return Err(Error::Config("grid spacing must be positive".into()));
        }
        let nx = (ex / spacing).round().max(1.0) as usize;
        let ny = (ey / spacing).round().max(1.0) as usize;
        Ok(Field2D {
            region,
            nx,
            ny,
            dx: ex / nx as f64,
            dy: ey / ny as f64,
            data: vec![0.0; nx * ny],
        })
    }

    pub fn at(&self, ix: usize, iy: usize) -> f64 {
        self.data[iy * self.nx + ix]
    }

    pub fn mean(&self) -> f64 {
        if self.data.is_empty() {
            return 0.0;
        }
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    /// Population standard deviation over the cells.
    pub fn std(&self) -> f64 {
        if self.data.is_empty() {
            return 0.0;
        }
        let m = self.mean();
        (self.data.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / self.data.len() as f64)
            .sqrt()
    }

    fn cell_of(&self, x: f64, y: f64) -> Option<(usize, usize)> {
        if x < self.region.x0 || x >= self.region.x1 || y < self.region.y0 || y >= self.region.y1
        {
            return None;
        }
        let ix = ((x - self.region.x0) / self.dx) as usize;
        let iy = ((y - self.region.y0) / self.dy) as usize;
        Some((ix.min(self.nx - 1), iy.min(self.ny - 1)))
    }
}

/// Packing fraction field: per cell, the particle volume inside the
/// reference prism (cell footprint, height `t0` above the substrate)
/// divided by the prism volume.
///
/// The sphere-prism intersection is integrated column-wise: exact chord
/// lengths in z, midpoint sampling across the sphere footprint in x, y.
pub fn packing_fraction_field(
    set: &ParticleSet,
    region: Rect,
    t0: f64,
    spacing: f64,
) -> Result<Field2D> {
    if !(t0 > 0.0) {
        return Err(Error::Config("t0 must be positive".into()));
    }
    let mut field = Field2D::zeros(region, spacing)?;
    for p in 0..set.len() {
        if !set.active[p] {
            continue;
        }
        let r = set.radius[p];
        let c = set.position[p];
        if c.z - r >= t0 || c.z + r <= 0.0 {
            continue;
        }
        if c.x + r <= region.x0
            || c.x - r >= region.x1
            || c.y + r <= region.y0
            || c.y - r >= region.y1
        {
            continue;
        }
        let n = COLUMNS_PER_DIAMETER;
        let h = 2.0 * r / n as f64;
        let col_area = h * h;
        for ix in 0..n {
            let x = c.x - r + (ix as f64 + 0.5) * h;
            for iy in 0..n {
                let y = c.y - r + (iy as f64 + 0.5) * h;
                let rho2 = (x - c.x).powi(2) + (y - c.y).powi(2);
                if rho2 >= r * r {
                    continue;
                }
                let half_chord = (r * r - rho2).sqrt();
                let lo = (c.z - half_chord).max(0.0);
                let hi = (c.z + half_chord).min(t0);
                if hi <= lo {
                    continue;
                }
                if let Some((cx, cy)) = field.cell_of(x, y) {
                    field.data[cy * field.nx + cx] += (hi - lo) * col_area;
                }
            }
        }
    }
    let prism = field.dx * field.dy * t0;
    for v in &mut field.data {
        *v /= prism;
    }
    Ok(field)
}

/// Surface profile field: per cell, the highest point of any sphere
/// whose vertical projection intersects the cell; bare substrate cells
/// report zero.
pub fn surface_profile(set: &ParticleSet, region: Rect, spacing: f64) -> Result<Field2D> {
    let mut field = Field2D::zeros(region, spacing)?;
    for p in 0..set.len() {
        if !set.active[p] {
            continue;
        }
        let r = set.radius[p];
        let c = set.position[p];
        let top = c.z + r;
        if top <= 0.0 {
            continue;
        }
        // cells overlapped by the disk's bounding box
        let ix0 = ((c.x - r - region.x0) / field.dx).floor().max(0.0) as usize;
        let ix1 = ((c.x + r - region.x0) / field.dx).ceil().min(field.nx as f64) as usize;
        let iy0 = ((c.y - r - region.y0) / field.dy).floor().max(0.0) as usize;
        let iy1 = ((c.y + r - region.y0) / field.dy).ceil().min(field.ny as f64) as usize;
        if c.x + r <= region.x0 || c.y + r <= region.y0 {
            continue;
        }
        for iy in iy0..iy1 {
            for ix in ix0..ix1 {
                // closest point of the cell rectangle to the disk center
                let cx0 = region.x0 + ix as f64 * field.dx;
                let cy0 = region.y0 + iy as f64 * field.dy;
                let qx = c.x.clamp(cx0, cx0 + field.dx);
                let qy = c.y.clamp(cy0, cy0 + field.dy);
                let d2 = (c.x - qx).powi(2) + (c.y - qy).powi(2);
                if d2 < r * r {
                    let slot = &mut field.data[iy * field.nx + ix];
                    *slot = slot.max(top);
                }
            }
        }
    }
    Ok(field)
}

/// Scalar summaries in the normalization used for layer comparisons.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LayerSummary {
    /// Mean packing fraction.
    pub phi_mean: f64,
    /// Population standard deviation of the packing fraction field.
    pub phi_std: f64,
    /// Mean surface height over the nominal layer thickness.
    pub zint_mean_over_t0: f64,
    /// Surface-height standard deviation over the maximum diameter.
    pub zint_std_over_dmax: f64,
}

/// Area-weighted mean and population standard deviation of both fields
/// (cells are uniform, so plain averages apply), normalized like the
/// layer-comparison tables: surface height by `t0` and its scatter by
/// `d_max0`.
pub fn summarize(phi: &Field2D, z_int: &Field2D, t0: f64, d_max0: f64) -> LayerSummary {
    LayerSummary {
        phi_mean: phi.mean(),
        phi_std: phi.std(),
        zint_mean_over_t0: z_int.mean() / t0,
        zint_std_over_dmax: z_int.std() / d_max0,
    }
}

/// Full layer-metric bundle for one snapshot.
#[derive(Debug, Clone)]
pub struct LayerMetrics {
    pub phi: Field2D,
    pub z_int: Field2D,
    pub summary: LayerSummary,
    pub t0: f64,
    pub d_max0: f64,
}

pub fn compute_layer_metrics(
    set: &ParticleSet,
    region: Rect,
    t0: f64,
    spacing: f64,
    d_max0: f64,
) -> Result<LayerMetrics> {
    let phi = packing_fraction_field(set, region, t0, spacing)?;
    let z_int = surface_profile(set, region, spacing)?;
    let summary = summarize(&phi, &z_int, t0, d_max0);
    Ok(LayerMetrics {
        phi,
        z_int,
        summary,
        t0,
        d_max0,
    })
}

/// Exact volume of a sphere slice between horizontal planes `z_lo` and
/// `z_hi` (spherical-cap formula); the independent oracle for the
/// column-sampled field.
pub fn sphere_slab_volume(center_z: f64, r: f64, z_lo: f64, z_hi: f64) -> f64 {
    let cap = |h: f64| -> f64 {
        let h = h.clamp(0.0, 2.0 * r);
        std::f64::consts::PI * h * h * (3.0 * r - h) / 3.0
    };
    cap(z_hi - (center_z - r)) - cap(z_lo - (center_z - r))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::particle::SizeDistribution;
    use crate::sampling::{generate_pile, BoxRegion};
    use approx::assert_relative_eq;

    fn single_sphere(r: f64, pos: Vector3<f64>) -> ParticleSet {
        let mut set = ParticleSet::with_radii(vec![r]);
        set.position[0] = pos;
        set
    }

    #[test]
    fn single_sphere_volume_ratio() {
        // sphere r = 10 um centered in a 50x50x50 um cell prism
        let set = single_sphere(10.0e-6, Vector3::new(25.0e-6, 25.0e-6, 25.0e-6));
        let region = Rect {
            x0: 0.0,
            y0: 0.0,
            x1: 50.0e-6,
            y1: 50.0e-6,
        };
        let phi = packing_fraction_field(&set, region, 50.0e-6, 50.0e-6).unwrap();
        assert_eq!(phi.data.len(), 1);
        let expect = (4.0 / 3.0 * std::f64::consts::PI * 10.0f64.powi(3)) / 50.0f64.powi(3);
        assert_relative_eq!(phi.data[0], expect, max_relative = 0.01);
    }

    #[test]
    fn empty_snapshot_gives_zero_field() {
        let set = ParticleSet::default();
        let region = Rect {
            x0: 0.0,
            y0: 0.0,
            x1: 1.0e-3,
            y1: 1.0e-3,
        };
        let phi = packing_fraction_field(&set, region, 1.0e-4, 5.0e-5).unwrap();
        assert!(phi.data.iter().all(|&v| v == 0.0));
        assert_eq!(phi.mean(), 0.0);
    }

    #[test]
    fn empty_region_is_an_error() {
        let set = single_sphere(10.0e-6, Vector3::zeros());
        let region = Rect {
            x0: 0.0,
            y0: 0.0,
            x1: 0.0,
            y1: 1.0e-3,
        };
        assert!(packing_fraction_field(&set, region, 1.0e-4, 5.0e-5).is_err());
        assert!(surface_profile(&set, region, 5.0e-5).is_err());
    }

    fn cubic_lattice(d: f64, nx: usize, ny: usize, nz: usize) -> ParticleSet {
        let mut radii = Vec::new();
        let mut pos = Vec::new();
        for k in 0..nz {
            for j in 0..ny {
                for i in 0..nx {
                    radii.push(0.5 * d);
                    pos.push(Vector3::new(
                        (i as f64 + 0.5) * d,
                        (j as f64 + 0.5) * d,
                        (k as f64 + 0.5) * d,
                    ));
                }
            }
        }
        let mut set = ParticleSet::with_radii(radii);
        set.position = pos;
        set
    }

    #[test]
    fn simple_cubic_lattice_packs_pi_over_six() {
        let d = 50.0e-6;
        let set = cubic_lattice(d, 6, 6, 2);
        let region = Rect {
            x0: 0.0,
            y0: 0.0,
            x1: 6.0 * d,
            y1: 6.0 * d,
        };
        let t0 = 2.0 * d;
        let phi = packing_fraction_field(&set, region, t0, d).unwrap();
        let expect = std::f64::consts::PI / 6.0;
        assert_relative_eq!(phi.mean(), expect, max_relative = 0.01);
        // summaries agree with the closed form too
        let z = surface_profile(&set, region, d).unwrap();
        let s = summarize(&phi, &z, t0, d);
        assert_relative_eq!(s.phi_mean, expect, max_relative = 0.01);
        assert_relative_eq!(s.zint_mean_over_t0, 1.0, max_relative = 1e-9);
        assert!(s.zint_std_over_dmax.abs() < 1e-9);
    }

    #[test]
    fn surface_profile_geometry() {
        let region = Rect {
            x0: 0.0,
            y0: 0.0,
            x1: 100.0e-6,
            y1: 100.0e-6,
        };
        // single sphere directly over a cell
        let set = single_sphere(10.0e-6, Vector3::new(25.0e-6, 25.0e-6, 40.0e-6));
        let z = surface_profile(&set, region, 50.0e-6).unwrap();
        assert_relative_eq!(z.at(0, 0), 50.0e-6, max_relative = 1e-12);
        // bare cell reports zero
        assert_eq!(z.at(1, 1), 0.0);
        // two stacked spheres: the top of the upper one wins
        let mut set2 = ParticleSet::with_radii(vec![10.0e-6, 8.0e-6]);
        set2.position[0] = Vector3::new(25.0e-6, 25.0e-6, 10.0e-6);
        set2.position[1] = Vector3::new(25.0e-6, 25.0e-6, 28.0e-6);
        let z2 = surface_profile(&set2, region, 50.0e-6).unwrap();
        assert_relative_eq!(z2.at(0, 0), 36.0e-6, max_relative = 1e-12);
    }

    #[test]
    fn summary_statistics_closed_forms() {
        let region = Rect {
            x0: 0.0,
            y0: 0.0,
            x1: 2.0,
            y1: 1.0,
        };
        let field = |vals: Vec<f64>| Field2D {
            region,
            nx: vals.len(),
            ny: 1,
            dx: 2.0 / vals.len() as f64,
            dy: 1.0,
            data: vals,
        };
        let uniform = field(vec![0.5, 0.5]);
        assert_eq!(uniform.mean(), 0.5);
        assert_eq!(uniform.std(), 0.0);
        let two = field(vec![0.4, 0.6]);
        assert_relative_eq!(two.mean(), 0.5, epsilon = 1e-15);
        assert_relative_eq!(two.std(), 0.1, epsilon = 1e-15);
    }

    /// Random cloud for the integral-consistency checks: all spheres
    /// horizontally interior to the region.
    fn random_cloud() -> (ParticleSet, Rect, f64) {
        let region = Rect {
            x0: 0.0,
            y0: 0.0,
            x1: 8.0e-4,
            y1: 8.0e-4,
        };
        let t0 = 1.5e-4;
        let box_region = BoxRegion::new(
            Vector3::new(5.0e-5, 5.0e-5, 0.0),
            Vector3::new(7.5e-4, 7.5e-4, 3.0e-4),
        );
        let set = generate_pile(&SizeDistribution::default(), 1500, &box_region, 21).unwrap();
        (set, region, t0)
    }

    #[test]
    fn total_volume_consistency() {
        let (set, region, t0) = random_cloud();
        let phi = packing_fraction_field(&set, region, t0, 5.0e-5).unwrap();
        let measured: f64 = phi.data.iter().sum::<f64>() * phi.dx * phi.dy * t0;
        let exact: f64 = (0..set.len())
            .map(|i| sphere_slab_volume(set.position[i].z, set.radius[i], 0.0, t0))
            .sum();
        let rel = (measured - exact).abs() / exact;
        assert!(rel < 0.005, "volume consistency error {rel:.4e}");
    }

    #[test]
    fn grid_refinement_keeps_mean_stable() {
        let (set, region, t0) = random_cloud();
        let coarse = packing_fraction_field(&set, region, t0, 5.0e-5).unwrap();
        let fine = packing_fraction_field(&set, region, t0, 2.5e-5).unwrap();
        let rel = (coarse.mean() - fine.mean()).abs() / coarse.mean();
        assert!(rel < 0.01, "mean shifted {rel:.4e} under refinement");
    }

    #[test]
    fn field_bounds_hold_on_random_cloud() {
        let (set, region, t0) = random_cloud();
        let phi = packing_fraction_field(&set, region, t0, 5.0e-5).unwrap();
        assert!(phi.data.iter().all(|&v| (0.0..=0.74).contains(&v)));
        let z = surface_profile(&set, region, 5.0e-5).unwrap();
        assert!(z.data.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn slab_oracle_matches_full_sphere() {
        let r = 10.0e-6;
        let v = sphere_slab_volume(50.0e-6, r, 0.0, 1.0e-4);
        assert_relative_eq!(
            v,
            4.0 / 3.0 * std::f64::consts::PI * r.powi(3),
            max_relative = 1e-12
        );
        // half sphere
        let half = sphere_slab_volume(0.0, r, 0.0, 1.0e-4);
        assert_relative_eq!(
            half,
            2.0 / 3.0 * std::f64::consts::PI * r.powi(3),
            max_relative = 1e-12
        );
    }
}
