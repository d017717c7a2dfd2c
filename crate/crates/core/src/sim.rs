//! Explicit time integration of particle translational and angular
//! momentum balance: velocity-Verlet positions/velocities with an
//! explicit Euler angular update, linked-cell neighbor search, rigid
//! walls and prescribed-motion tools.
//!
//! Determinism contract: particle and pair loops run in fixed index
//! order, so repeated runs with the same seed and config are
//! bit-identical. One simulation instance is single-threaded; callers
//! run independent instances concurrently (see the sweep command).

use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::forces::{self, kernel_core, ContactConsts};
use crate::neighbor::NeighborSearch;
use crate::particle::{sphere_inertia, sphere_mass, MaterialParams, ParticleSet};
use crate::sampling::BoxRegion;
use crate::surface::Surface;

/// Hard abort threshold on particle speed [m/s].
pub const SPEED_LIMIT: f64 = 1.0e3;

/// Fraction of the critical timestep allowed by the stability rule.
pub const DT_STABILITY_FRACTION: f64 = 0.2;

/// Boundary handling of one domain face.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryKind {
    /// Rigid frictional wall (implicit surface on that face).
    Wall,
    /// Periodic; must be paired with the opposite face.
    Periodic,
    /// Nothing there; particles crossing the face are deactivated.
    Open,
}

/// Face order: x-, x+, y-, y+, z-, z+.
pub type Boundaries = [BoundaryKind; 6];

/// Per-step integration parameters.
#[derive(Debug, Clone)]
pub struct StepConfig {
    pub dt: f64,
    pub gravity: Vector3<f64>,
    pub domain: BoxRegion,
    pub boundaries: Boundaries,
    /// Verlet skin for the neighbor list [m].
    pub skin: f64,
}

/// Largest stable timestep for the lightest particle present.
pub fn admissible_dt(min_radius: f64, mat: &MaterialParams) -> f64 {
    let m_min = sphere_mass(min_radius, mat.density);
    DT_STABILITY_FRACTION * (m_min / mat.normal_stiffness).sqrt()
}

/// Quiescence criterion for settling stages.
#[derive(Debug, Clone, Copy)]
pub struct Quiescence {
    /// Mean translational kinetic energy per particle [J].
    pub mean_ke: f64,
    /// Largest particle speed [m/s].
    pub max_speed: f64,
}

impl Default for Quiescence {
    fn default() -> Self {
        Quiescence {
            mean_ke: 1.0e-12,
            max_speed: 1.0e-3,
        }
    }
}

/// Why `run` returned.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    MaxTime,
    Quiescent,
    NoActiveParticles,
}

/// Options for a `run` stage.
#[derive(Debug, Clone)]
pub struct RunOptions {
    pub max_time: f64,
    pub quiescence: Option<Quiescence>,
    /// Steps between quiescence checks.
    pub check_every: u64,
    /// Steps between observer invocations (0 = never).
    pub snapshot_every: u64,
    /// Steps between progress lines on stderr (0 = never).
    pub progress_every: u64,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            max_time: 0.0,
            quiescence: None,
            check_every: 200,
            snapshot_every: 0,
            progress_every: 0,
        }
    }
}

/// Per-pair coefficients frozen at neighbor rebuilds.
#[derive(Debug, Clone, Copy, Default)]
struct PairPre {
    r_eff: f64,
    sqrt_m_eff: f64,
    /// Interaction reach squared, `(r_i + r_j + g*)^2`.
    cut2: f64,
    r_sum: f64,
}

/// A particle system advancing under contact, adhesion and gravity.
pub struct Simulation {
    pub set: ParticleSet,
    pub mat: MaterialParams,
    pub cfg: StepConfig,
    pub surfaces: Vec<Surface>,
    neighbors: NeighborSearch,
    mass: Vec<f64>,
    sqrt_mass: Vec<f64>,
    inv_mass: Vec<f64>,
    inv_inertia: Vec<f64>,
    force: Vec<Vector3<f64>>,
    torque: Vec<Vector3<f64>>,
    /// Tangential springs against each surface, `n_particles * wall_stride`.
    wall_springs: Vec<Vector3<f64>>,
    wall_stride: usize,
    /// Bit `s` set when surface `s` was within reach at the last rebuild.
    wall_mask: Vec<u32>,
    /// Particles with a nonzero wall mask at the last rebuild.
    near_wall: Vec<u32>,
    pair_pre: Vec<PairPre>,
    consts: ContactConsts,
    g_star: f64,
    /// Upper bound on relative approach since the last rebuild [m].
    travel_bound: f64,
    max_surface_speed: f64,
    pub time: f64,
    pub step_count: u64,
    /// Solid volume of deactivated (swept-out) particles [m^3].
    pub swept_volume: f64,
    pub swept_count: usize,
}

impl Simulation {
    pub fn new(
        set: ParticleSet,
        mat: MaterialParams,
        cfg: StepConfig,
        mut surfaces: Vec<Surface>,
    ) -> Result<Simulation> {
        mat.validate()?;
        let ext = cfg.domain.extent();
        if !(ext.x > 0.0 && ext.y > 0.0 && ext.z > 0.0) {
            return Err(Error::Config("domain extents must be positive".into()));
        }
        for axis in 0..3 {
            let (a, b) = (cfg.boundaries[2 * axis], cfg.boundaries[2 * axis + 1]);
            if (a == BoundaryKind::Periodic) != (b == BoundaryKind::Periodic) {
                return Err(Error::Config(format!(
                    "periodic boundaries must be paired on axis {axis}"
                )));
            }
        }
        if !set.is_empty() {
            let r_min = set.radius.iter().cloned().fold(f64::INFINITY, f64::min);
            let dt_max = admissible_dt(r_min, &mat);
            if cfg.dt > dt_max {
                return Err(Error::Config(format!(
                    "dt = {:.3e} s violates the stability rule; admissible dt <= {:.3e} s \
                     for the smallest particle (r = {:.3e} m)",
                    cfg.dt, dt_max, r_min
                )));
            }
        }
        if !(cfg.dt > 0.0) {
            return Err(Error::Config("dt must be positive".into()));
        }

        // implicit walls on faces marked Wall
        const FACE_LABELS: [&str; 6] = [
            "wall_x_min",
            "wall_x_max",
            "wall_y_min",
            "wall_y_max",
            "wall_z_min",
            "wall_z_max",
        ];
        let big = 1.0;
        for face in 0..6 {
            if cfg.boundaries[face] != BoundaryKind::Wall {
                continue;
            }
            let axis = face / 2;
            let positive_side = face % 2 == 1;
            let mut min = cfg.domain.min - Vector3::repeat(big);
            let mut max = cfg.domain.max + Vector3::repeat(big);
            if positive_side {
                min[axis] = cfg.domain.max[axis];
            } else {
                max[axis] = cfg.domain.min[axis];
            }
            surfaces.push(Surface::fixed(
                FACE_LABELS[face],
                crate::surface::SurfaceShape::Box { min, max },
                true,
            ));
        }

        let periodic = [
            cfg.boundaries[0] == BoundaryKind::Periodic,
            cfg.boundaries[2] == BoundaryKind::Periodic,
            cfg.boundaries[4] == BoundaryKind::Periodic,
        ];
        let g_star = forces::adhesion_cutoff(1.0, &mat); // independent of r_eff
        let d_max = set.radius.iter().cloned().fold(0.0, f64::max) * 2.0;
        let neighbors = NeighborSearch::new(
            cfg.domain,
            periodic,
            d_max.max(1.0e-6),
            g_star,
            cfg.skin,
        );

        let n = set.len();
        if surfaces.len() > 32 {
            return Err(Error::Config("at most 32 surfaces are supported".into()));
        }
        let mass: Vec<f64> = set.radius.iter().map(|&r| sphere_mass(r, mat.density)).collect();
        let sqrt_mass: Vec<f64> = mass.iter().map(|&m| m.sqrt()).collect();
        let inv_mass: Vec<f64> = mass.iter().map(|&m| 1.0 / m).collect();
        let inv_inertia: Vec<f64> = (0..n)
            .map(|i| 1.0 / sphere_inertia(mass[i], set.radius[i]))
            .collect();

        let wall_stride = surfaces.len().max(1);
        let mut sim = Simulation {
            set,
            mat,
            cfg,
            surfaces,
            neighbors,
            mass,
            sqrt_mass,
            inv_mass,
            inv_inertia,
            force: vec![Vector3::zeros(); n],
            torque: vec![Vector3::zeros(); n],
            wall_springs: vec![Vector3::zeros(); n * wall_stride],
            wall_stride,
            wall_mask: vec![0; n],
            near_wall: Vec::new(),
            pair_pre: Vec::new(),
            consts: ContactConsts::new(&mat),
            g_star,
            travel_bound: 0.0,
            max_surface_speed: 0.0,
            time: 0.0,
            step_count: 0,
            swept_volume: 0.0,
            swept_count: 0,
        };
        sim.refresh_neighbors();
        sim.compute_forces();
        Ok(sim)
    }

    /// Rebuild the pair list, the per-pair coefficients and the
    /// per-particle surface masks.
    fn refresh_neighbors(&mut self) {
        self.neighbors.rebuild(&self.set);
        self.pair_pre.clear();
        self.pair_pre.reserve(self.neighbors.pairs.len());
        for slot in &self.neighbors.pairs {
            let (i, j) = (slot.i as usize, slot.j as usize);
            let (r_i, r_j) = (self.set.radius[i], self.set.radius[j]);
            let m_eff = self.mass[i] * self.mass[j] / (self.mass[i] + self.mass[j]);
            let cut = r_i + r_j + self.g_star;
            self.pair_pre.push(PairPre {
                r_eff: r_i * r_j / (r_i + r_j),
                sqrt_m_eff: m_eff.sqrt(),
                cut2: cut * cut,
                r_sum: r_i + r_j,
            });
        }
        // surface proximity masks; the mask margin (one skin) exceeds the
        // relative approach possible before the next rebuild
        let reach = self.g_star + self.cfg.skin;
        self.max_surface_speed = self
            .surfaces
            .iter()
            .filter(|s| s.enabled)
            .map(|s| s.max_speed())
            .fold(0.0, f64::max);
        self.near_wall.clear();
        for i in 0..self.set.len() {
            let mut mask = 0u32;
            if self.set.active[i] {
                for (s_idx, surf) in self.surfaces.iter().enumerate() {
                    if surf
                        .query(self.time, self.set.position[i], self.set.radius[i], reach)
                        .is_some()
                    {
                        mask |= 1 << s_idx;
                    } else {
                        self.wall_springs[i * self.wall_stride + s_idx] = Vector3::zeros();
                    }
                }
            }
            if mask != 0 {
                self.near_wall.push(i as u32);
            }
            self.wall_mask[i] = mask;
        }
        self.travel_bound = 0.0;
    }

    pub fn n_active(&self) -> usize {
        self.set.active_count()
    }

    /// Toggle a surface (reservoir walls, outlet plug) by label.
    pub fn set_surface_enabled(&mut self, label: &str, enabled: bool) {
        let mut found = false;
        for s in &mut self.surfaces {
            if s.label == label {
                s.enabled = enabled;
                found = true;
            }
        }
        debug_assert!(found, "no surface labelled {label}");
        self.refresh_neighbors();
        self.compute_forces();
    }

    pub fn surface(&self, label: &str) -> Option<&Surface> {
        self.surfaces.iter().find(|s| s.label == label)
    }


    /// Contact forces and torques at the current positions. Gravity is
    /// applied in the kick stages, so these arrays hold contact terms
    /// only.
    fn compute_forces(&mut self) {
        let stride = self.wall_stride;
        let dt = self.cfg.dt;
        let time = self.time;
        let consts = self.consts;

        self.force.fill(Vector3::zeros());
        self.torque.fill(Vector3::zeros());

        // wall/tool contacts: only particles flagged near a surface
        {
            let set = &self.set;
            let surfaces = &self.surfaces;
            let sqrt_mass = &self.sqrt_mass;
            let force = &mut self.force;
            let torque = &mut self.torque;
            let springs_all = &mut self.wall_springs;
            for &iu in &self.near_wall {
                let i = iu as usize;
                if !set.active[i] {
                    continue;
                }
                let mask = self.wall_mask[i];
                let pos = set.position[i];
                let vel = set.velocity[i];
                let omega = set.angular_velocity[i];
                let r = set.radius[i];
                let springs = &mut springs_all[i * stride..(i + 1) * stride];
                for (s_idx, surf) in surfaces.iter().enumerate() {
                    if mask & (1 << s_idx) == 0 {
                        continue;
                    }
                    let contact = match surf.query(time, pos, r, consts.g_star) {
                        Some(c) => c,
                        None => {
                            springs[s_idx] = Vector3::zeros();
                            continue;
                        }
                    };
                    let arm = contact.point - pos;
                    let v_rel = vel + omega.cross(&arm) - contact.velocity;
                    let up = kernel_core(
                        contact.normal,
                        contact.gap,
                        r,
                        Vector3::zeros(),
                        arm,
                        v_rel,
                        omega - contact.omega,
                        sqrt_mass[i],
                        springs[s_idx],
                        dt,
                        surf.adhesive,
                        &consts,
                    );
                    force[i] += up.force_j;
                    torque[i] += up.torque_j;
                    springs[s_idx] = up.spring;
                }
            }
        }

        // pair contacts, fused with accumulation in pair order
        {
            let set = &self.set;
            let pre_all = &self.pair_pre;
            let pairs = &mut self.neighbors.pairs;
            let force = &mut self.force;
            let torque = &mut self.torque;
            let ext = self.cfg.domain.extent();
            let periodic = [
                self.cfg.boundaries[0] == BoundaryKind::Periodic,
                self.cfg.boundaries[2] == BoundaryKind::Periodic,
                self.cfg.boundaries[4] == BoundaryKind::Periodic,
            ];
            let any_periodic = periodic.iter().any(|p| *p);
            for (k, slot) in pairs.iter_mut().enumerate() {
                let (i, j) = (slot.i as usize, slot.j as usize);
                if !set.active[i] || !set.active[j] {
                    slot.spring = Vector3::zeros();
                    continue;
                }
                let pre = &pre_all[k];
                let mut dr = set.position[j] - set.position[i];
                if any_periodic {
                    for a in 0..3 {
                        if periodic[a] {
                            dr[a] -= ext[a] * (dr[a] / ext[a]).round();
                        }
                    }
                }
                let d2 = dr.norm_squared();
                if d2 >= pre.cut2 {
                    slot.spring = Vector3::zeros();
                    continue;
                }
                let dist = d2.sqrt();
                if dist <= 0.0 {
                    continue;
                }
                let n = dr / dist;
                let gap = dist - pre.r_sum;
                let arm_i = (set.radius[i] + 0.5 * gap) * n;
                let arm_j = arm_i - dr;
                let v_rel = set.velocity[j] + set.angular_velocity[j].cross(&arm_j)
                    - set.velocity[i]
                    - set.angular_velocity[i].cross(&arm_i);
                let up = kernel_core(
                    n,
                    gap,
                    pre.r_eff,
                    arm_i,
                    arm_j,
                    v_rel,
                    set.angular_velocity[j] - set.angular_velocity[i],
                    pre.sqrt_m_eff,
                    slot.spring,
                    dt,
                    true,
                    &consts,
                );
                slot.spring = up.spring;
                force[i] += up.force_i;
                force[j] += up.force_j;
                torque[i] += up.torque_i;
                torque[j] += up.torque_j;
            }
        }
    }

    /// One velocity-Verlet step. Errors if the speed guard trips.
    pub fn step(&mut self) -> Result<()> {
        let dt = self.cfg.dt;
        let half = 0.5 * dt;
        let n = self.set.len();
        let g = self.cfg.gravity;
        let dom = self.cfg.domain;
        let ext = dom.extent();
        let periodic = [
            self.cfg.boundaries[0] == BoundaryKind::Periodic,
            self.cfg.boundaries[2] == BoundaryKind::Periodic,
            self.cfg.boundaries[4] == BoundaryKind::Periodic,
        ];

        // first half-kick, drift, and boundary enforcement in one pass
        let mut drift_sq = 0.0f64;
        for i in 0..n {
            if !self.set.active[i] {
                continue;
            }
            let a = self.force[i] * self.inv_mass[i] + g;
            self.set.velocity[i] += half * a;
            let v = self.set.velocity[i];
            drift_sq = drift_sq.max(v.norm_squared());
            let p = &mut self.set.position[i];
            *p += dt * v;
            let mut kill = false;
            for axis in 0..3 {
                if periodic[axis] {
                    p[axis] -= ext[axis] * ((p[axis] - dom.min[axis]) / ext[axis]).floor();
                } else if p[axis] < dom.min[axis] || p[axis] > dom.max[axis] {
                    kill = true;
                }
            }
            if kill {
                self.set.active[i] = false;
                self.set.velocity[i] = Vector3::zeros();
                self.set.angular_velocity[i] = Vector3::zeros();
                self.swept_volume += self.set.volume(i);
                self.swept_count += 1;
            }
        }
        self.time += dt;
        self.step_count += 1;

        // conservative relative-approach bound: no particle/surface pair
        // can have closed more than this since the last rebuild
        self.travel_bound += dt * (drift_sq.sqrt() + self.max_surface_speed);
        if self.travel_bound > 0.4 * self.cfg.skin {
            self.refresh_neighbors();
        }
        #[cfg(debug_assertions)]
        self.debug_audit();

        self.compute_forces();

        let mut max_speed_sq = 0.0f64;
        for i in 0..n {
            if !self.set.active[i] {
                continue;
            }
            let a = self.force[i] * self.inv_mass[i] + g;
            self.set.velocity[i] += half * a;
            self.set.angular_velocity[i] += dt * self.torque[i] * self.inv_inertia[i];
            max_speed_sq = max_speed_sq.max(self.set.velocity[i].norm_squared());
        }
        if max_speed_sq > SPEED_LIMIT * SPEED_LIMIT {
            return Err(Error::Instability {
                step: self.step_count,
                time: self.time,
                max_speed: max_speed_sq.sqrt(),
                limit: SPEED_LIMIT,
            });
        }
        Ok(())
    }

    #[cfg(debug_assertions)]
    fn debug_audit(&self) {
        const AUDIT_EVERY: u64 = 2000;
        if self.set.len() <= 1000 && self.step_count % AUDIT_EVERY == 0 {
            debug_assert!(
                self.neighbors.audit(&self.set),
                "neighbor list lost an interacting pair at step {}",
                self.step_count
            );
        }
    }

    /// Advance until `max_time` is reached or the quiescence criterion
    /// holds; `observer` fires every `snapshot_every` steps and once at
    /// the end.
    pub fn run(
        &mut self,
        opts: &RunOptions,
        observer: &mut dyn FnMut(&Simulation),
    ) -> Result<StopReason> {
        let t_end = self.time + opts.max_time;
        loop {
            if self.n_active() == 0 {
                observer(self);
                return Ok(StopReason::NoActiveParticles);
            }
            if self.time >= t_end {
                observer(self);
                return Ok(StopReason::MaxTime);
            }
            self.step()?;
            if opts.snapshot_every > 0 && self.step_count % opts.snapshot_every == 0 {
                observer(self);
            }
            if opts.progress_every > 0 && self.step_count % opts.progress_every == 0 {
                eprintln!(
                    "{},{:.6e},{:.3e},{:.3e}",
                    self.step_count,
                    self.time,
                    self.mean_kinetic_energy(),
                    self.max_speed()
                );
            }
            if let Some(q) = opts.quiescence {
                if self.step_count % opts.check_every == 0
                    && self.mean_kinetic_energy() < q.mean_ke
                    && self.max_speed() < q.max_speed
                {
                    observer(self);
                    return Ok(StopReason::Quiescent);
                }
            }
        }
    }

    /// Mean translational kinetic energy per active particle [J].
    pub fn mean_kinetic_energy(&self) -> f64 {
        let mut ke = 0.0;
        let mut count = 0usize;
        for i in 0..self.set.len() {
            if self.set.active[i] {
                ke += 0.5 * self.mass[i] * self.set.velocity[i].norm_squared();
                count += 1;
            }
        }
        if count == 0 {
            0.0
        } else {
            ke / count as f64
        }
    }

    pub fn max_speed(&self) -> f64 {
        (0..self.set.len())
            .filter(|&i| self.set.active[i])
            .map(|i| self.set.velocity[i].norm())
            .fold(0.0, f64::max)
    }

    pub fn total_momentum(&self) -> Vector3<f64> {
        let mut p = Vector3::zeros();
        for i in 0..self.set.len() {
            if self.set.active[i] {
                p += self.mass[i] * self.set.velocity[i];
            }
        }
        p
    }

    pub fn momentum_scale(&self) -> f64 {
        (0..self.set.len())
            .filter(|&i| self.set.active[i])
            .map(|i| self.mass[i] * self.set.velocity[i].norm())
            .sum()
    }

    pub fn center_of_mass(&self) -> Vector3<f64> {
        let mut c = Vector3::zeros();
        let mut m_tot = 0.0;
        for i in 0..self.set.len() {
            if self.set.active[i] {
                c += self.mass[i] * self.set.position[i];
                m_tot += self.mass[i];
            }
        }
        if m_tot > 0.0 {
            c / m_tot
        } else {
            Vector3::zeros()
        }
    }

    /// Kinetic + gravitational + elastic spring energy [J]. Monotone
    /// non-increasing between snapshots under dissipative contacts with
    /// no external input.
    pub fn mechanical_energy(&self) -> f64 {
        let mut e = 0.0;
        for i in 0..self.set.len() {
            if !self.set.active[i] {
                continue;
            }
            e += 0.5 * self.mass[i] * self.set.velocity[i].norm_squared();
            let w = self.set.angular_velocity[i].norm_squared();
            e += 0.5 * w / self.inv_inertia[i];
            e -= self.mass[i] * self.cfg.gravity.dot(&self.set.position[i]);
        }
        let k_t = forces::tangential_stiffness(&self.mat);
        for slot in &self.neighbors.pairs {
            let (i, j) = (slot.i as usize, slot.j as usize);
            if !self.set.active[i] || !self.set.active[j] {
                continue;
            }
            let dr = self.neighbors.min_image(self.set.position[j] - self.set.position[i]);
            let overlap = self.set.radius[i] + self.set.radius[j] - dr.norm();
            if overlap > 0.0 {
                e += 0.5 * self.mat.normal_stiffness * overlap * overlap;
            }
            e += 0.5 * k_t * slot.spring.norm_squared();
        }
        for i in 0..self.set.len() {
            if !self.set.active[i] {
                continue;
            }
            for (s_idx, surf) in self.surfaces.iter().enumerate() {
                if let Some(c) = surf.query(self.time, self.set.position[i], self.set.radius[i], 0.0)
                {
                    if c.gap < 0.0 {
                        e += 0.5 * self.mat.normal_stiffness * c.gap * c.gap;
                    }
                }
                e += 0.5 * k_t * self.wall_springs[i * self.wall_stride + s_idx].norm_squared();
            }
        }
        e
    }

    pub fn pair_count(&self) -> usize {
        self.neighbors.pairs.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::particle::SizeDistribution;
    use crate::sampling::generate_pile;
    use approx::assert_relative_eq;

    fn free_config(dt: f64, gravity: f64, domain_side: f64) -> StepConfig {
        StepConfig {
            dt,
            gravity: Vector3::new(0.0, 0.0, gravity),
            domain: BoxRegion::new(
                Vector3::new(-domain_side, -domain_side, -domain_side),
                Vector3::new(domain_side, domain_side, domain_side),
            ),
            boundaries: [BoundaryKind::Open; 6],
            skin: 6.0e-6,
        }
    }

    fn one_particle(radius: f64, pos: Vector3<f64>, vel: Vector3<f64>) -> ParticleSet {
        let mut set = ParticleSet::with_radii(vec![radius]);
        set.position[0] = pos;
        set.velocity[0] = vel;
        set
    }

    #[test]
    fn free_flight_single_step_is_exact() {
        let dt = 5.0e-8;
        let v = Vector3::new(0.013, -0.002, 0.0045);
        let x0 = Vector3::new(1.0e-4, 2.0e-4, 3.0e-4);
        let set = one_particle(15.0e-6, x0, v);
        let mut sim =
            Simulation::new(set, MaterialParams::default(), free_config(dt, 0.0, 1.0), vec![])
                .unwrap();
        sim.step().unwrap();
        assert_eq!(sim.set.position[0], x0 + v * dt);
        assert_eq!(sim.set.velocity[0], v);
    }

    #[test]
    fn constant_gravity_reproduces_parabola() {
        let dt = 5.0e-8;
        let g = -9.81;
        let v0 = Vector3::new(0.02, 0.0, 0.01);
        let x0 = Vector3::new(0.0, 0.0, 0.0);
        let set = one_particle(15.0e-6, x0, v0);
        let mut sim =
            Simulation::new(set, MaterialParams::default(), free_config(dt, g, 1.0), vec![])
                .unwrap();
        let n = 1000;
        for _ in 0..n {
            sim.step().unwrap();
        }
        let t = n as f64 * dt;
        let expect_z = v0.z * t + 0.5 * g * t * t;
        let expect_vz = v0.z + g * t;
        assert_relative_eq!(sim.set.position[0].z, expect_z, max_relative = 1e-12);
        assert_relative_eq!(sim.set.velocity[0].z, expect_vz, max_relative = 1e-12);
        assert_relative_eq!(sim.set.position[0].x, v0.x * t, max_relative = 1e-12);
    }

    #[test]
    fn elastic_head_on_collision_conserves_kinetic_energy() {
        let mat = MaterialParams {
            restitution: 1.0,
            friction: 0.0,
            rolling_friction: 0.0,
            surface_energy: 0.0,
            ..MaterialParams::default()
        };
        let r = 15.0e-6;
        let m = sphere_mass(r, mat.density);
        let dt = 0.05 * (m / mat.normal_stiffness).sqrt();
        let mut set = ParticleSet::with_radii(vec![r, r]);
        set.position[0] = Vector3::new(-2.0e-5, 0.0, 0.0);
        set.position[1] = Vector3::new(2.0e-5, 0.0, 0.0);
        set.velocity[0] = Vector3::new(0.05, 0.0, 0.0);
        set.velocity[1] = Vector3::new(-0.05, 0.0, 0.0);
        let ke0 = 2.0 * 0.5 * m * 0.05f64.powi(2);
        let mut sim = Simulation::new(set, mat, free_config(dt, 0.0, 1.0), vec![]).unwrap();
        // run long enough to finish the collision
        for _ in 0..4000 {
            sim.step().unwrap();
        }
        let gap = (sim.set.position[1] - sim.set.position[0]).norm() - 2.0 * r;
        assert!(gap > 0.0, "collision must be over");
        let ke1 = 0.5
            * m
            * (sim.set.velocity[0].norm_squared() + sim.set.velocity[1].norm_squared());
        assert!(
            ((ke1 - ke0) / ke0).abs() < 0.005,
            "kinetic energy error {:.3e}",
            (ke1 - ke0) / ke0
        );
    }

    #[test]
    fn rebound_apex_matches_restitution_kinematics() {
        let mat = MaterialParams {
            surface_energy: 0.0,
            ..MaterialParams::default()
        };
        let r = 15.0e-6;
        let h = 1.0e-3;
        // fine timestep so contact discretization stays well under the
        // 5% apex tolerance
        let dt = 0.25 * admissible_dt(r, &mat);
        let mut cfg = free_config(dt, -9.81, 5.0e-3);
        // substrate: implicit wall at the bottom face z = 0
        cfg.domain = BoxRegion::new(
            Vector3::new(-1.0e-3, -1.0e-3, 0.0),
            Vector3::new(1.0e-3, 1.0e-3, 5.0e-3),
        );
        cfg.boundaries = [
            BoundaryKind::Open,
            BoundaryKind::Open,
            BoundaryKind::Open,
            BoundaryKind::Open,
            BoundaryKind::Wall,
            BoundaryKind::Open,
        ];
        let set = one_particle(r, Vector3::new(0.0, 0.0, r + h), Vector3::zeros());
        let mut sim = Simulation::new(set, mat, cfg, vec![]).unwrap();
        // fall, bounce, rise to apex: detect apex after the first rebound
        let mut bounced = false;
        let mut apex: f64 = 0.0;
        for _ in 0..2_000_000 {
            sim.step().unwrap();
            let z = sim.set.position[0].z;
            let vz = sim.set.velocity[0].z;
            if !bounced && vz > 0.0 {
                bounced = true;
            }
            if bounced {
                apex = apex.max(z);
                if vz < 0.0 {
                    break;
                }
            }
        }
        let expect = 0.4f64.powi(2) * h;
        let got = apex - r;
        assert!(
            ((got - expect) / expect).abs() < 0.05,
            "apex {got:.4e} vs {expect:.4e}"
        );
    }

    #[test]
    fn momentum_is_conserved_in_periodic_box() {
        let side = 4.0e-4;
        let region = BoxRegion::new(Vector3::zeros(), Vector3::new(side, side, side));
        let mut set =
            generate_pile(&SizeDistribution::default(), 100, &region.inset(30e-6), 3).unwrap();
        // random initial velocities
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        for v in &mut set.velocity {
            *v = Vector3::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
                * 0.02;
        }
        let mat = MaterialParams::default();
        let dt = 0.9 * admissible_dt(7.5e-6, &mat);
        let cfg = StepConfig {
            dt,
            gravity: Vector3::zeros(),
            domain: region,
            boundaries: [BoundaryKind::Periodic; 6],
            skin: 6.0e-6,
        };
        let mut sim = Simulation::new(set, mat, cfg, vec![]).unwrap();
        let p0 = sim.total_momentum();
        let scale = sim.momentum_scale();
        for _ in 0..2000 {
            sim.step().unwrap();
        }
        let drift = (sim.total_momentum() - p0).norm() / scale;
        assert!(drift < 1e-12, "momentum drift {drift:.3e}");
    }

    #[test]
    fn dissipative_contacts_never_gain_energy() {
        let side = 3.2e-4;
        let region = BoxRegion::new(Vector3::zeros(), Vector3::new(side, side, side));
        let mut set =
            generate_pile(&SizeDistribution::default(), 150, &region.inset(30e-6), 9).unwrap();
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        for v in &mut set.velocity {
            *v = Vector3::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
                * 0.2;
        }
        let mat = MaterialParams {
            surface_energy: 0.0,
            ..MaterialParams::default()
        };
        let dt = 0.9 * admissible_dt(7.5e-6, &mat);
        let cfg = StepConfig {
            dt,
            gravity: Vector3::zeros(),
            domain: region,
            boundaries: [BoundaryKind::Periodic; 6],
            skin: 6.0e-6,
        };
        let mut sim = Simulation::new(set, mat, cfg, vec![]).unwrap();
        let e0 = sim.mechanical_energy();
        let mut prev = e0;
        for _ in 0..20 {
            for _ in 0..1000 {
                sim.step().unwrap();
            }
            let e = sim.mechanical_energy();
            assert!(
                e <= prev + 1e-9 * e0,
                "energy rose between snapshots: {prev:.6e} -> {e:.6e}"
            );
            prev = e;
        }
        assert!(prev < 0.5 * e0, "dissipation should be substantial");
    }

    #[test]
    fn empty_set_completes_immediately() {
        let set = ParticleSet::default();
        let mut sim = Simulation::new(
            set,
            MaterialParams::default(),
            free_config(1.0e-8, -9.81, 1.0e-3),
            vec![],
        )
        .unwrap();
        let mut snaps = 0;
        let reason = sim
            .run(
                &RunOptions {
                    max_time: 1.0,
                    ..RunOptions::default()
                },
                &mut |_| snaps += 1,
            )
            .unwrap();
        assert_eq!(reason, StopReason::NoActiveParticles);
        assert_eq!(snaps, 1);
    }

    #[test]
    fn unstable_dt_is_rejected_with_admissible_value() {
        let set = one_particle(15.0e-6, Vector3::new(0.0, 0.0, 0.1), Vector3::zeros());
        let mat = MaterialParams::default();
        let bad_dt = 10.0 * admissible_dt(15.0e-6, &mat);
        let err = Simulation::new(set, mat, free_config(bad_dt, -9.81, 1.0), vec![]);
        match err {
            Err(Error::Config(msg)) => {
                assert!(msg.contains("admissible"), "message: {msg}")
            }
            Err(other) => panic!("expected config error, got {other}"),
            Ok(_) => panic!("expected config error, got a simulation"),
        }
    }

    #[test]
    fn identical_seeds_give_bit_identical_states() {
        let run_once = || {
            let side = 3.0e-4;
            let region = BoxRegion::new(Vector3::zeros(), Vector3::new(side, side, side));
            let set =
                generate_pile(&SizeDistribution::default(), 150, &region.inset(30e-6), 12)
                    .unwrap();
            let mat = MaterialParams::default();
            let dt = 0.9 * admissible_dt(7.5e-6, &mat);
            let cfg = StepConfig {
                dt,
                gravity: Vector3::new(0.0, 0.0, -9.81),
                domain: region,
                boundaries: [
                    BoundaryKind::Wall,
                    BoundaryKind::Wall,
                    BoundaryKind::Wall,
                    BoundaryKind::Wall,
                    BoundaryKind::Wall,
                    BoundaryKind::Open,
                ],
                skin: 6.0e-6,
            };
            let mut sim = Simulation::new(set, mat, cfg, vec![]).unwrap();
            for _ in 0..500 {
                sim.step().unwrap();
            }
            sim
        };
        let a = run_once();
        let b = run_once();
        assert_eq!(a.set.position, b.set.position);
        assert_eq!(a.set.velocity, b.set.velocity);
        assert_eq!(a.set.angular_velocity, b.set.angular_velocity);
    }
}

