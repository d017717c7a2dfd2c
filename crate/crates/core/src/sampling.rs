//! Powder sample generation: size sampling and initial placement.

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal};

use crate::error::{Error, Result};
use crate::particle::{ParticleSet, SizeDistribution};

/// Axis-aligned box region [m].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxRegion {
    pub min: Vector3<f64>,
    pub max: Vector3<f64>,
}

impl BoxRegion {
    pub fn new(min: Vector3<f64>, max: Vector3<f64>) -> Self {
        BoxRegion { min, max }
    }

    pub fn extent(&self) -> Vector3<f64> {
        self.max - self.min
    }

    pub fn center(&self) -> Vector3<f64> {
        0.5 * (self.min + self.max)
    }

    pub fn volume(&self) -> f64 {
        let e = self.extent();
        e.x * e.y * e.z
    }

    pub fn contains(&self, p: &Vector3<f64>) -> bool {
        (0..3).all(|k| p[k] >= self.min[k] && p[k] <= self.max[k])
    }

    /// Shrink the box by `margin` on every face.
    pub fn inset(&self, margin: f64) -> BoxRegion {
        BoxRegion {
            min: self.min.add_scalar(margin),
            max: self.max.add_scalar(-margin),
        }
    }
}

/// Draw `n` radii from the truncated log-normal diameter distribution.
/// Deterministic for a fixed seed; every diameter lies in [d_min, d_max].
pub fn sample_radii(dist: &SizeDistribution, n: usize, seed: u64) -> Result<Vec<f64>> {
    dist.validate()?;
    if n == 0 {
        return Err(Error::Config("sample_radii requires n >= 1".into()));
    }
    let lognormal = LogNormal::new(dist.d50.ln(), dist.sigma_ln)
        .map_err(|e| Error::Config(format!("invalid log-normal parameters: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut radii = Vec::with_capacity(n);
    while radii.len() < n {
        let d = lognormal.sample(&mut rng);
        if d >= dist.d_min && d <= dist.d_max {
            radii.push(0.5 * d);
        }
    }
    Ok(radii)
}

/// Random sequential insertion with overlap rejection.
///
/// Places the sampled radii one by one at uniform positions inside
/// `region` (inset by each radius) and rejects any candidate that would
/// overlap an already placed sphere. Fails with a capacity error when a
/// particle cannot be placed within the attempt budget.
pub fn place_random(radii: Vec<f64>, region: &BoxRegion, seed: u64) -> Result<ParticleSet> {
    place_random_where(radii, region, seed, |_, _| true)
}

/// `place_random` restricted to candidate centers satisfying `inside`
/// (e.g. the interior of a funnel); the bounding `region` still bounds
/// the draw.
pub fn place_random_where(
    radii: Vec<f64>,
    region: &BoxRegion,
    seed: u64,
    inside: impl Fn(&Vector3<f64>, f64) -> bool,
) -> Result<ParticleSet> {
    const MAX_ATTEMPTS: usize = 5000;

    let n = radii.len();
    let mut set = ParticleSet::with_radii(radii);
    if n == 1 {
        set.position[0] = region.center();
        return Ok(set);
    }

    let r_max = set.radius.iter().cloned().fold(0.0, f64::max);
    // coarse cell grid so rejection checks stay local
    let cell = 2.0 * r_max;
    let ext = region.extent();
    let nx = (ext.x / cell).floor().max(1.0) as i64;
    let ny = (ext.y / cell).floor().max(1.0) as i64;
    let nz = (ext.z / cell).floor().max(1.0) as i64;
    let mut grid: std::collections::HashMap<(i64, i64, i64), Vec<usize>> =
        std::collections::HashMap::new();
    let cell_of = |p: &Vector3<f64>| {
        (
            (((p.x - region.min.x) / ext.x * nx as f64) as i64).clamp(0, nx - 1),
            (((p.y - region.min.y) / ext.y * ny as f64) as i64).clamp(0, ny - 1),
            (((p.z - region.min.z) / ext.z * nz as f64) as i64).clamp(0, nz - 1),
        )
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in 0..n {
        let r = set.radius[i];
        let lo = region.min.add_scalar(r);
        let hi = region.max.add_scalar(-r);
        if (0..3).any(|k| lo[k] >= hi[k]) {
            return Err(Error::Capacity(format!(
                "region too small for particle of radius {r:.3e}"
            )));
        }
        let mut placed = false;
        for _ in 0..MAX_ATTEMPTS {
            let p = Vector3::new(
                rng.gen_range(lo.x..hi.x),
                rng.gen_range(lo.y..hi.y),
                rng.gen_range(lo.z..hi.z),
            );
            if !inside(&p, r) {
                continue;
            }
            let (cx, cy, cz) = cell_of(&p);
            let mut overlaps = false;
            'scan: for dx in -1..=1 {
                for dy in -1..=1 {
                    for dz in -1..=1 {
                        let key = (cx + dx, cy + dy, cz + dz);
                        if let Some(ids) = grid.get(&key) {
                            for &j in ids {
                                let gap = (p - set.position[j]).norm()
                                    - r
                                    - set.radius[j];
                                if gap < 0.0 {
                                    overlaps = true;
                                    break 'scan;
                                }
                            }
                        }
                    }
                }
            }
            if !overlaps {
                set.position[i] = p;
                grid.entry((cx, cy, cz)).or_default().push(i);
                placed = true;
                break;
            }
        }
        if !placed {
            return Err(Error::Capacity(format!(
                "could not place particle {i} of {n} after {MAX_ATTEMPTS} attempts \
                 (region too dense)"
            )));
        }
    }
    Ok(set)
}

/// Sample radii and place them without overlap inside `region`.
/// Velocities are zero; the caller settles the pile under gravity.
pub fn generate_pile(
    dist: &SizeDistribution,
    n: usize,
    region: &BoxRegion,
    seed: u64,
) -> Result<ParticleSet> {
    let radii = sample_radii(dist, n, seed)?;
    // separate stream for placement so size statistics never depend on
    // placement rejections
    place_random(radii, region, seed.wrapping_add(0x9e37_79b9))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn wide(dist: &SizeDistribution) -> SizeDistribution {
        SizeDistribution {
            d_min: dist.d50 / 20.0,
            d_max: dist.d50 * 20.0,
            ..*dist
        }
    }

    #[test]
    fn degenerate_sigma_collapses_to_d50() {
        let dist = SizeDistribution {
            d50: 30.0e-6,
            sigma_ln: 1.0e-9,
            d_min: 15.0e-6,
            d_max: 50.0e-6,
        };
        let radii = sample_radii(&dist, 1000, 7).unwrap();
        for r in radii {
            assert!(((2.0 * r - 30.0e-6) / 30.0e-6).abs() < 1.0e-6);
        }
    }

    #[test]
    fn d90_matches_closed_form_quantile() {
        // sigma chosen so the untruncated 90th percentile sits at 44 um;
        // wide bounds keep truncation negligible.
        let sigma = (44.0f64 / 30.0).ln() / 1.2816;
        let dist = wide(&SizeDistribution {
            d50: 30.0e-6,
            sigma_ln: sigma,
            d_min: 0.0,
            d_max: 0.0,
        });
        let mut d: Vec<f64> = sample_radii(&dist, 100_000, 42)
            .unwrap()
            .iter()
            .map(|r| 2.0 * r)
            .collect();
        d.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let d90 = d[(0.9 * d.len() as f64) as usize];
        assert!(
            ((d90 - 44.0e-6) / 44.0e-6).abs() < 0.02,
            "empirical D90 {d90:.3e}"
        );
    }

    #[test]
    fn truncation_bound_is_hard() {
        let dist = SizeDistribution::default();
        let radii = sample_radii(&dist, 20_000, 3).unwrap();
        for r in &radii {
            assert!(2.0 * r <= 50.0e-6 && 2.0 * r >= 15.0e-6);
        }
    }

    #[test]
    fn median_matches_truncated_distribution() {
        // Log-symmetric bounds (18 = 30^2/50) make the truncated median
        // equal d50 exactly.
        let dist = SizeDistribution {
            d50: 30.0e-6,
            sigma_ln: 0.2988,
            d_min: 18.0e-6,
            d_max: 50.0e-6,
        };
        let mut d: Vec<f64> = sample_radii(&dist, 100_000, 11)
            .unwrap()
            .iter()
            .map(|r| 2.0 * r)
            .collect();
        d.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let median = d[d.len() / 2];
        assert!(
            ((median - 30.0e-6) / 30.0e-6).abs() < 0.01,
            "median {median:.4e}"
        );
    }

    #[test]
    fn sampling_is_deterministic() {
        let dist = SizeDistribution::default();
        let a = sample_radii(&dist, 500, 99).unwrap();
        let b = sample_radii(&dist, 500, 99).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn single_particle_sits_at_region_center() {
        let region = BoxRegion::new(Vector3::zeros(), Vector3::new(1e-3, 1e-3, 1e-3));
        let set = generate_pile(&SizeDistribution::default(), 1, &region, 1).unwrap();
        assert_eq!(set.position[0], region.center());
        assert_eq!(set.velocity[0], Vector3::zeros());
    }

    #[test]
    fn placement_has_no_overlaps() {
        let d50 = 30.0e-6;
        let side = 20.0 * d50;
        let region = BoxRegion::new(Vector3::zeros(), Vector3::new(side, side, side));
        let set = generate_pile(&SizeDistribution::default(), 1000, &region, 5).unwrap();
        for i in 0..set.len() {
            for j in (i + 1)..set.len() {
                let gap = (set.position[i] - set.position[j]).norm()
                    - set.radius[i]
                    - set.radius[j];
                assert!(gap >= 0.0, "overlap between {i} and {j}: {gap:.3e}");
            }
        }
    }

    #[test]
    fn impossible_density_reports_capacity_error() {
        let region = BoxRegion::new(
            Vector3::zeros(),
            Vector3::new(100.0e-6, 100.0e-6, 100.0e-6),
        );
        let err = generate_pile(&SizeDistribution::default(), 200, &region, 5);
        assert!(matches!(err, Err(Error::Capacity(_))));
    }
}
