//! Pairwise force and torque laws: linear spring-dashpot normal contact,
//! history-spring Coulomb friction, DMT-type van der Waals adhesion and
//! constant-direction rolling resistance.
//!
//! Sign conventions used throughout:
//! * the pair normal `n` points from particle `i` toward particle `j`;
//! * scalar normal forces are positive when repulsive;
//! * the adhesion magnitude is negative (attractive) or zero;
//! * `PairForces` vectors are the forces/torques exerted on particle `j`
//!   (particle `i` receives the opposite forces).

use nalgebra::Vector3;

use crate::particle::MaterialParams;

/// Pull-off force magnitude `4 pi gamma r_eff` [N].
pub fn pull_off_force(surface_energy: f64, r_eff: f64) -> f64 {
    4.0 * std::f64::consts::PI * surface_energy * r_eff
}

/// Gap at which the van der Waals decay equals the pull-off force [m].
/// Zero when adhesion is disabled (`surface_energy == 0`).
pub fn adhesion_g0(r_eff: f64, p: &MaterialParams) -> f64 {
    let f_s0 = pull_off_force(p.surface_energy, r_eff);
    if f_s0 <= 0.0 {
        return 0.0;
    }
    (p.hamaker * r_eff / (6.0 * f_s0)).sqrt()
}

/// Cut-off gap `g* = g0 / sqrt(cutoff_ratio)` [m] beyond which adhesion
/// is truncated to zero.
pub fn adhesion_cutoff(r_eff: f64, p: &MaterialParams) -> f64 {
    adhesion_g0(r_eff, p) / p.cutoff_ratio.sqrt()
}

/// Signed adhesion force magnitude [N]; negative = attractive.
///
/// Piecewise: the constant pull-off force up to `g0`, a `1/g^2` van der
/// Waals decay up to and including the cut-off gap `g*`, and exactly zero
/// beyond. Continuous at `g0` by construction of `g0`.
pub fn adhesion_force(gap: f64, r_eff: f64, p: &MaterialParams) -> f64 {
    if p.surface_energy <= 0.0 {
        return 0.0;
    }
    let f_s0 = pull_off_force(p.surface_energy, r_eff);
    let g0 = (p.hamaker * r_eff / (6.0 * f_s0)).sqrt();
    let g_star = g0 / p.cutoff_ratio.sqrt();
    if gap <= g0 {
        -f_s0
    } else if gap <= g_star {
        -p.hamaker * r_eff / (6.0 * gap * gap)
    } else {
        0.0
    }
}

/// Dashpot coefficient that reproduces the configured restitution for a
/// linear spring of stiffness `k` and effective mass `m_eff`.
pub fn damping_coefficient(m_eff: f64, k: f64, restitution: f64) -> f64 {
    let ln_e = restitution.ln();
    -2.0 * ln_e * (m_eff * k / (std::f64::consts::PI.powi(2) + ln_e * ln_e)).sqrt()
}

/// Tangential spring stiffness; the standard 2/7 ratio keeps the
/// tangential oscillation period equal to the normal one.
pub fn tangential_stiffness(p: &MaterialParams) -> f64 {
    2.0 / 7.0 * p.normal_stiffness
}

/// Signed normal contact force [N] for an overlapping pair; positive =
/// repulsive. `v_n` is the separation rate (positive when the gap opens).
pub fn normal_contact_force(overlap: f64, v_n: f64, m_eff: f64, p: &MaterialParams) -> f64 {
    debug_assert!(overlap >= 0.0);
    let d_n = damping_coefficient(m_eff, p.normal_stiffness, p.restitution);
    p.normal_stiffness * overlap - d_n * v_n
}

/// Result of a tangential force evaluation.
#[derive(Debug, Clone, Copy)]
pub struct TangentialResult {
    /// Friction force on particle `j` [N] (particle `i` gets the opposite).
    pub force: Vector3<f64>,
    /// Updated spring displacement, rescaled onto the Coulomb cone when
    /// the cap was active.
    pub spring: Vector3<f64>,
}

/// Advance the tangential history spring by one step and return the
/// capped friction force.
///
/// `v_t` is the tangential relative velocity of particle `j`'s surface
/// with respect to particle `i`'s at the contact point; `f_n` the
/// compressive normal force magnitude (non-positive values disable
/// friction entirely).
pub fn tangential_force(
    spring: Vector3<f64>,
    v_t: Vector3<f64>,
    f_n: f64,
    m_eff: f64,
    dt: f64,
    p: &MaterialParams,
) -> TangentialResult {
    if p.friction <= 0.0 || f_n <= 0.0 {
        return TangentialResult {
            force: Vector3::zeros(),
            spring: Vector3::zeros(),
        };
    }
    let k_t = tangential_stiffness(p);
    let d_t = damping_coefficient(m_eff, k_t, p.restitution);
    let xi = spring + v_t * dt;
    let mut force = -k_t * xi - d_t * v_t;
    let cap = p.friction * f_n;
    let mag = force.norm();
    if mag > cap {
        force *= cap / mag;
        // slip: spring sits on the cone, carried by the spring term alone
        return TangentialResult {
            force,
            spring: -force / k_t,
        };
    }
    TangentialResult { force, spring: xi }
}

/// Constant-direction rolling resistance torque [N m] opposing the
/// relative angular velocity `omega_rel` of the particle it acts on.
pub fn rolling_torque(
    omega_rel: Vector3<f64>,
    f_n: f64,
    r_eff: f64,
    p: &MaterialParams,
) -> Vector3<f64> {
    let w = omega_rel.norm();
    if p.rolling_friction <= 0.0 || f_n <= 0.0 || w <= p.omega_tol {
        return Vector3::zeros();
    }
    -p.rolling_friction * r_eff * f_n * (omega_rel / w)
}

/// Geometry and kinematics of one interacting pair.
#[derive(Debug, Clone, Copy)]
pub struct PairGeometry {
    /// Unit normal from particle `i` toward particle `j`.
    pub normal: Vector3<f64>,
    /// Surface gap [m]; negative gap = overlap.
    pub gap: f64,
    /// Effective interaction radius [m].
    pub r_eff: f64,
    /// Contact point [m] (midpoint of the overlap region).
    pub contact_point: Vector3<f64>,
    /// Vector from particle `i`'s centroid to the contact point.
    pub arm_i: Vector3<f64>,
    /// Vector from particle `j`'s centroid to the contact point.
    pub arm_j: Vector3<f64>,
    /// Velocity of `j`'s material surface relative to `i`'s at the
    /// contact point [m/s].
    pub rel_velocity: Vector3<f64>,
}

impl PairGeometry {
    /// Build pair geometry from particle states. `pos_j` must already
    /// include any periodic image shift.
    #[allow(clippy::too_many_arguments)]
    pub fn between(
        pos_i: Vector3<f64>,
        vel_i: Vector3<f64>,
        omega_i: Vector3<f64>,
        r_i: f64,
        pos_j: Vector3<f64>,
        vel_j: Vector3<f64>,
        omega_j: Vector3<f64>,
        r_j: f64,
    ) -> Option<PairGeometry> {
        let dr = pos_j - pos_i;
        let dist = dr.norm();
        if dist <= 0.0 {
            return None;
        }
        let normal = dr / dist;
        let gap = dist - r_i - r_j;
        let contact_point = pos_i + (r_i + 0.5 * gap) * normal;
        let arm_i = contact_point - pos_i;
        let arm_j = contact_point - pos_j;
        let v_i = vel_i + omega_i.cross(&arm_i);
        let v_j = vel_j + omega_j.cross(&arm_j);
        Some(PairGeometry {
            normal,
            gap,
            r_eff: r_i * r_j / (r_i + r_j),
            contact_point,
            arm_i,
            arm_j,
            rel_velocity: v_j - v_i,
        })
    }
}

/// Forces and torques exerted on particle `j`; particle `i` receives
/// `-f_*` and the matching reaction torque.
#[derive(Debug, Clone, Copy, Default)]
pub struct PairForces {
    /// Normal contact force (parallel to `n` when repulsive).
    pub f_cn: Vector3<f64>,
    /// Tangential friction force (orthogonal to `n`).
    pub f_ct: Vector3<f64>,
    /// Adhesion force (anti-parallel to `n` when attractive).
    pub f_an: Vector3<f64>,
    /// Rolling resistance torque on `j`.
    pub m_r: Vector3<f64>,
}

impl PairForces {
    pub fn total_force(&self) -> Vector3<f64> {
        self.f_cn + self.f_ct + self.f_an
    }
}

/// Increments produced by one pair evaluation.
#[derive(Debug, Clone, Copy)]
pub struct PairUpdate {
    pub force_j: Vector3<f64>,
    pub force_i: Vector3<f64>,
    pub torque_j: Vector3<f64>,
    pub torque_i: Vector3<f64>,
    pub spring: Vector3<f64>,
    pub forces: PairForces,
}

/// Material-level constants hoisted out of the per-pair laws so the hot
/// loop never recomputes logs or square roots. Dashpot coefficients
/// factor as `d = damp * sqrt(m_eff)`.
#[derive(Debug, Clone, Copy)]
pub struct ContactConsts {
    pub k_n: f64,
    pub k_t: f64,
    pub friction: f64,
    pub rolling_friction: f64,
    pub omega_tol: f64,
    /// `d_n = damp_n * sqrt(m_eff)`.
    pub damp_n: f64,
    /// `d_t = damp_t * sqrt(m_eff)`.
    pub damp_t: f64,
    /// Pull-off force per effective radius, `4 pi gamma` [N/m].
    pub adh_pull: f64,
    /// van der Waals decay scale, `hamaker / 6` [J].
    pub adh_decay: f64,
    /// Pull-off gap [m]; zero when adhesion is off. Independent of the
    /// pair because the effective radius cancels in its definition.
    pub g0: f64,
    /// Cut-off gap `g0 / sqrt(cutoff_ratio)` [m].
    pub g_star: f64,
}

impl ContactConsts {
    pub fn new(p: &MaterialParams) -> ContactConsts {
        let ln_e = p.restitution.ln();
        let denom = std::f64::consts::PI.powi(2) + ln_e * ln_e;
        let k_t = tangential_stiffness(p);
        ContactConsts {
            k_n: p.normal_stiffness,
            k_t,
            friction: p.friction,
            rolling_friction: p.rolling_friction,
            omega_tol: p.omega_tol,
            damp_n: -2.0 * ln_e * (p.normal_stiffness / denom).sqrt(),
            damp_t: -2.0 * ln_e * (k_t / denom).sqrt(),
            adh_pull: 4.0 * std::f64::consts::PI * p.surface_energy,
            adh_decay: p.hamaker / 6.0,
            g0: adhesion_g0(1.0, p),
            g_star: adhesion_cutoff(1.0, p),
        }
    }

    #[inline(always)]
    fn adhesion(&self, gap: f64, r_eff: f64) -> f64 {
        if self.g_star <= 0.0 || gap > self.g_star {
            0.0
        } else if gap <= self.g0 {
            -self.adh_pull * r_eff
        } else {
            -self.adh_decay * r_eff / (gap * gap)
        }
    }
}

/// Shared inner kernel for particle-particle and particle-surface
/// contacts. Conventions follow `PairForces`: everything returned acts
/// on body `j` (the particle, for surface contacts), with `n` pointing
/// from `i` toward `j`.
#[allow(clippy::too_many_arguments)]
#[inline(always)]
pub fn kernel_core(
    n: Vector3<f64>,
    gap: f64,
    r_eff: f64,
    arm_i: Vector3<f64>,
    arm_j: Vector3<f64>,
    v_rel: Vector3<f64>,
    omega_rel: Vector3<f64>,
    sqrt_m_eff: f64,
    spring: Vector3<f64>,
    dt: f64,
    adhesive: bool,
    c: &ContactConsts,
) -> PairUpdate {
    let mut out = PairForces::default();
    // history persists while the pair stays inside the adhesion range;
    // the caller discards it once the pair separates beyond the cut-off
    let mut spring_new = spring;
    let mut torque_i = Vector3::zeros();
    let mut torque_j = Vector3::zeros();

    if adhesive {
        out.f_an = c.adhesion(gap, r_eff) * n;
    }

    if gap < 0.0 {
        let v_n = v_rel.dot(&n);
        let f_n = c.k_n * (-gap) - c.damp_n * sqrt_m_eff * v_n;
        out.f_cn = f_n * n;
        let f_n_compressive = f_n.max(0.0);

        if c.friction > 0.0 && f_n_compressive > 0.0 {
            let v_t = v_rel - v_n * n;
            let xi = spring - spring.dot(&n) * n + v_t * dt;
            let mut f_t = -c.k_t * xi - c.damp_t * sqrt_m_eff * v_t;
            let cap = c.friction * f_n_compressive;
            let mag = f_t.norm();
            if mag > cap {
                f_t *= cap / mag;
                spring_new = -f_t / c.k_t;
            } else {
                spring_new = xi;
            }
            out.f_ct = f_t;
            torque_j += arm_j.cross(&f_t);
            torque_i += arm_i.cross(&(-f_t));
        } else {
            spring_new = Vector3::zeros();
        }

        if c.rolling_friction > 0.0 && f_n_compressive > 0.0 {
            let w = omega_rel.norm();
            if w > c.omega_tol {
                out.m_r =
                    -c.rolling_friction * r_eff * f_n_compressive * (omega_rel / w);
                torque_j += out.m_r;
                torque_i -= out.m_r;
            }
        }
    }

    let force_j = out.f_cn + out.f_ct + out.f_an;
    PairUpdate {
        force_j,
        force_i: -force_j,
        torque_j,
        torque_i,
        spring: spring_new,
        forces: out,
    }
}

/// Evaluate all force laws for one pair and return force/torque
/// increments satisfying action-reaction exactly.
#[allow(clippy::too_many_arguments)]
pub fn accumulate_pair(
    geo: &PairGeometry,
    omega_i: Vector3<f64>,
    omega_j: Vector3<f64>,
    m_i: f64,
    m_j: f64,
    spring: Vector3<f64>,
    dt: f64,
    p: &MaterialParams,
) -> PairUpdate {
    let c = ContactConsts::new(p);
    let m_eff = m_i * m_j / (m_i + m_j);
    kernel_core(
        geo.normal,
        geo.gap,
        geo.r_eff,
        geo.arm_i,
        geo.arm_j,
        geo.rel_velocity,
        omega_j - omega_i,
        m_eff.sqrt(),
        spring,
        dt,
        true,
        &c,
    )
}
