//! Rigid surfaces: container walls, substrate, funnel, and the moving
//! spreading tools (blade, roller).
//!
//! Surfaces follow a prescribed rigid-body motion and are never
//! influenced by particle forces (one-way coupling). Each query returns
//! the closest point on the surface, the outward normal (pointing from
//! the surface toward the particle) and the surface material velocity at
//! that point.

use nalgebra::Vector3;

/// Geometric shell of a surface at its reference pose.
#[derive(Debug, Clone, Copy)]
pub enum SurfaceShape {
    /// Solid axis-aligned box; particles interact with its exterior.
    /// Faces at +-1e9 m act as unbounded.
    Box { min: Vector3<f64>, max: Vector3<f64> },
    /// Infinite cylinder along the y axis (the roller shell).
    CylinderY { center: Vector3<f64>, radius: f64 },
    /// Conical funnel shell, axisymmetric about a vertical axis: the wall
    /// runs from the outlet rim (radius `outlet_radius` at height
    /// `outlet_z`) up to `top_z` at slope `wall_angle` from horizontal.
    /// Particles interact with the inside of the shell.
    FunnelCone {
        axis: Vector3<f64>,
        outlet_radius: f64,
        outlet_z: f64,
        wall_angle: f64,
        top_z: f64,
    },
    /// Horizontal disk (the funnel outlet plug), approached from above.
    Disk {
        center: Vector3<f64>,
        radius: f64,
    },
}

/// Closest-point answer of a surface query.
#[derive(Debug, Clone, Copy)]
pub struct SurfaceContact {
    /// Gap between particle surface and wall [m]; negative = overlap.
    pub gap: f64,
    /// Unit normal pointing from the wall toward the particle.
    pub normal: Vector3<f64>,
    /// Closest point on the wall [m].
    pub point: Vector3<f64>,
    /// Material velocity of the wall at that point [m/s].
    pub velocity: Vector3<f64>,
    /// Angular velocity of the wall [rad/s].
    pub omega: Vector3<f64>,
}

/// A rigid surface with optional translation and spin.
#[derive(Debug, Clone)]
pub struct Surface {
    pub label: String,
    pub shape: SurfaceShape,
    /// Translation velocity [m/s]; the shape's reference pose is at t = 0.
    pub velocity: Vector3<f64>,
    /// Spin about the shape's own axis (rollers) [rad/s].
    pub omega: Vector3<f64>,
    /// Whether particle-surface adhesion uses the full particle-particle
    /// surface energy (substrate) or none (spreading tools).
    pub adhesive: bool,
    /// Surfaces can be switched off mid-run (reservoir walls, plug).
    pub enabled: bool,
}

impl Surface {
    pub fn fixed(label: &str, shape: SurfaceShape, adhesive: bool) -> Surface {
        Surface {
            label: label.to_string(),
            shape,
            velocity: Vector3::zeros(),
            omega: Vector3::zeros(),
            adhesive,
            enabled: true,
        }
    }

    pub fn moving(label: &str, shape: SurfaceShape, velocity: Vector3<f64>) -> Surface {
        Surface {
            label: label.to_string(),
            shape,
            velocity,
            omega: Vector3::zeros(),
            adhesive: false,
            enabled: true,
        }
    }

    /// Largest material speed anywhere on the surface [m/s]; used to
    /// bound relative approach between rebuilds.
    pub fn max_speed(&self) -> f64 {
        let spin = match self.shape {
            SurfaceShape::CylinderY { radius, .. } => self.omega.norm() * radius,
            _ => 0.0,
        };
        self.velocity.norm() + spin
    }

    /// Closest-point query against the surface displaced to time `t`.
    /// Returns `None` when the particle is further away than `reach`.
    pub fn query(
        &self,
        t: f64,
        pos: Vector3<f64>,
        radius: f64,
        reach: f64,
    ) -> Option<SurfaceContact> {
        if !self.enabled {
            return None;
        }
        let shift = self.velocity * t;
        let p = pos - shift; // particle in the surface reference frame
        let (point_ref, normal, spin_center) = match self.shape {
            SurfaceShape::Box { min, max } => {
                let q = Vector3::new(
                    p.x.clamp(min.x, max.x),
                    p.y.clamp(min.y, max.y),
                    p.z.clamp(min.z, max.z),
                );
                let d = p - q;
                let dist = d.norm();
                if dist <= 0.0 {
                    // center inside the box: push out along the nearest face
                    let mut best = f64::INFINITY;
                    let mut n = Vector3::zeros();
                    let mut q2 = p;
                    for k in 0..3 {
                        let to_min = p[k] - min[k];
                        let to_max = max[k] - p[k];
                        if to_min < best {
                            best = to_min;
                            n = Vector3::zeros();
                            n[k] = -1.0;
                            q2 = p;
                            q2[k] = min[k];
                        }
                        if to_max < best {
                            best = to_max;
                            n = Vector3::zeros();
                            n[k] = 1.0;
                            q2 = p;
                            q2[k] = max[k];
                        }
                    }
                    (q2, n, None)
                } else {
                    (q, d / dist, None)
                }
            }
            SurfaceShape::CylinderY { center, radius: rr } => {
                let d = Vector3::new(p.x - center.x, 0.0, p.z - center.z);
                let dist = d.norm();
                if dist <= 1e-300 {
                    return None;
                }
                let n = d / dist;
                (center + rr * n, n, Some(center))
            }
            SurfaceShape::FunnelCone {
                axis,
                outlet_radius,
                outlet_z,
                wall_angle,
                top_z,
            } => {
                // work in the meridian (rho, z) half-plane through the particle
                let dx = p.x - axis.x;
                let dy = p.y - axis.y;
                let rho = (dx * dx + dy * dy).sqrt();
                let e_rho = if rho > 1e-300 {
                    Vector3::new(dx / rho, dy / rho, 0.0)
                } else {
                    Vector3::new(1.0, 0.0, 0.0)
                };
                // wall segment from (outlet_radius, outlet_z) to (top_radius, top_z)
                let top_radius = outlet_radius + (top_z - outlet_z) / wall_angle.tan();
                let a = nalgebra::Vector2::new(outlet_radius, outlet_z);
                let b = nalgebra::Vector2::new(top_radius, top_z);
                let ab = b - a;
                let len = ab.norm();
                let u = ab / len;
                let w = nalgebra::Vector2::new(rho, p.z) - a;
                let s = w.dot(&u).clamp(0.0, len);
                let q2 = a + s * u;
                let d2 = nalgebra::Vector2::new(rho, p.z) - q2;
                let dist = d2.norm();
                if dist <= 1e-300 {
                    return None;
                }
                let n2 = d2 / dist;
                let n = n2.x * e_rho + Vector3::new(0.0, 0.0, n2.y);
                let point = axis + q2.x * e_rho + Vector3::new(0.0, 0.0, q2.y - axis.z);
                (point, n, None)
            }
            SurfaceShape::Disk { center, radius: rr } => {
                let d = Vector3::new(p.x - center.x, p.y - center.y, 0.0);
                let rho = d.norm();
                let q = if rho <= rr {
                    Vector3::new(p.x, p.y, center.z)
                } else {
                    center + d * (rr / rho)
                };
                let dd = p - q;
                let dist = dd.norm();
                if dist <= 1e-300 {
                    return None;
                }
                (q, dd / dist, None)
            }
        };

        let gap = (p - point_ref).dot(&normal) - radius;
        if gap > reach {
            return None;
        }
        let point = point_ref + shift;
        let velocity = self.velocity
            + match spin_center {
                Some(c) => self.omega.cross(&(point_ref - c)),
                None => Vector3::zeros(),
            };
        Some(SurfaceContact {
            gap,
            normal,
            point,
            velocity,
            omega: self.omega,
        })
    }
}

const UNBOUNDED: f64 = 1.0e9;

/// Substrate slab whose top face is z = 0, spanning `x0..x1` and
/// unbounded in y.
pub fn substrate(x0: f64, x1: f64) -> SurfaceShape {
    SurfaceShape::Box {
        min: Vector3::new(x0, -UNBOUNDED, -1.0e-3),
        max: Vector3::new(x1, UNBOUNDED, 0.0),
    }
}

/// Vertical wall normal to x, spanning all y and z >= `z_bottom`.
pub fn x_wall(x: f64, z_bottom: f64, thickness: f64, facing_positive_x: bool) -> SurfaceShape {
    if facing_positive_x {
        SurfaceShape::Box {
            min: Vector3::new(x - thickness, -UNBOUNDED, z_bottom),
            max: Vector3::new(x, UNBOUNDED, UNBOUNDED),
        }
    } else {
        SurfaceShape::Box {
            min: Vector3::new(x, -UNBOUNDED, z_bottom),
            max: Vector3::new(x + thickness, UNBOUNDED, UNBOUNDED),
        }
    }
}

/// Finite square plate with top face z = 0 (angle-of-repose collection
/// plate); particles may roll off the edges.
pub fn plate(half_extent: f64) -> SurfaceShape {
    SurfaceShape::Box {
        min: Vector3::new(-half_extent, -half_extent, -1.0e-3),
        max: Vector3::new(half_extent, half_extent, 0.0),
    }
}

/// Kind of spreading tool.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ToolKind {
    Blade,
    Roller,
}

/// Prescribed rigid-body motion of the spreading tool.
///
/// The tool translates in +x at `traverse_speed`, with its working
/// surface (blade bottom edge, roller shell bottom) at gap height `t0`
/// above the substrate. Roller spin is parameterized by the surface
/// speed ratio `s = |surface speed| / traverse speed`; positive values
/// counter-rotate (shell moving upward on the leading side), zero means
/// non-rotating.
#[derive(Debug, Clone, Copy)]
pub struct ToolKinematics {
    pub kind: ToolKind,
    /// Gap height above the substrate [m].
    pub gap_height: f64,
    /// Blade thickness in x [m] (blade only).
    pub blade_thickness: f64,
    /// Roller radius [m] (roller only).
    pub roller_radius: f64,
    /// Traverse speed in +x [m/s].
    pub traverse_speed: f64,
    /// Counter-rotation surface speed ratio (>= 0).
    pub surface_speed_ratio: f64,
    /// x position of the working front face / nip at t = 0 [m].
    pub start_x: f64,
}

impl ToolKinematics {
    /// Build the moving surface for this tool. Tool adhesion is off.
    pub fn surface(&self) -> Surface {
        let velocity = Vector3::new(self.traverse_speed, 0.0, 0.0);
        match self.kind {
            ToolKind::Blade => Surface::moving(
                "blade",
                SurfaceShape::Box {
                    min: Vector3::new(self.start_x - self.blade_thickness, -UNBOUNDED, self.gap_height),
                    max: Vector3::new(self.start_x, UNBOUNDED, UNBOUNDED),
                },
                velocity,
            ),
            ToolKind::Roller => {
                let mut s = Surface::moving(
                    "roller",
                    SurfaceShape::CylinderY {
                        center: Vector3::new(
                            self.start_x,
                            0.0,
                            self.gap_height + self.roller_radius,
                        ),
                        radius: self.roller_radius,
                    },
                    velocity,
                );
                // counter-rotation: spin about -y so the shell moves up on
                // the leading side and forward at the nip
                let spin = self.surface_speed_ratio * self.traverse_speed / self.roller_radius;
                s.omega = Vector3::new(0.0, -spin, 0.0);
                s
            }
        }
    }

    /// Time at which the working face reaches position `x`.
    pub fn time_to_reach(&self, x: f64) -> f64 {
        (x - self.start_x) / self.traverse_speed
    }
}
