//! Planar articulated chains.
//!
//! A chain is a serial list of rigid links in the x–z plane joined by revolute
//! joints. The first link is either a free-floating base (generalized
//! coordinates `x, z, pitch`) or pinned to a fixed anchor. Joint coordinates are
//! relative angles, so the absolute angle of link `i` is the sum of the first
//! `i + 1` rotational coordinates.
//!
//! Equations of motion come from projecting every link's Newton–Euler equation
//! onto the generalized coordinates:
//!
//! ```text
//! M(q) q̈ = Σ Jcᵢᵀ (mᵢ g − mᵢ J̇cᵢ q̇) + τ + Σ_contacts Jpᵀ f
//! ```
//!
//! `M` is assembled from the link COM Jacobians plus a rotor armature term on
//! every actuated joint. Integration is semi-implicit Euler.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

pub type Vec2 = [f64; 2];

#[inline]
fn add(a: Vec2, b: Vec2) -> Vec2 {
    [a[0] + b[0], a[1] + b[1]]
}

#[inline]
fn sub(a: Vec2, b: Vec2) -> Vec2 {
    [a[0] - b[0], a[1] - b[1]]
}

#[inline]
fn scale(a: Vec2, s: f64) -> Vec2 {
    [a[0] * s, a[1] * s]
}

#[inline]
fn rotate(a: Vec2, angle: f64) -> Vec2 {
    let (s, c) = angle.sin_cos();
    [c * a[0] - s * a[1], s * a[0] + c * a[1]]
}

/// `ω × r` for a planar angular velocity.
#[inline]
fn cross_w(w: f64, r: Vec2) -> Vec2 {
    [-w * r[1], w * r[0]]
}

/// 2D cross product `r × f`.
#[inline]
fn cross(r: Vec2, f: Vec2) -> f64 {
    r[0] * f[1] - r[1] * f[0]
}

#[inline]
fn dot(a: Vec2, b: Vec2) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Link {
    pub name: String,
    pub mass: f64,
    /// Rotational inertia about the COM.
    pub inertia: f64,
    pub length: f64,
    pub width: f64,
    /// COM in the link frame (origin at the proximal joint).
    pub com: Vec2,
    /// Where the next link's joint sits, in this link's frame.
    pub child: Vec2,
    /// Points checked against the terrain, in the link frame.
    pub contact_points: Vec<Vec2>,
}

impl Link {
    /// Rectangle inertia about the COM for the current length and width.
    pub fn box_inertia(mass: f64, length: f64, width: f64) -> f64 {
        mass * (length * length + width * width) / 12.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Base {
    /// Root link moves freely: coordinates `x, z, pitch`.
    Floating,
    /// Root link pivots about `anchor`: its angle is an actuated joint.
    Fixed { anchor: Vec2 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContactParams {
    pub stiffness: f64,
    pub damping: f64,
    pub friction: f64,
    /// Viscous coefficient for tangential sliding, capped by `friction · f_n`.
    pub tangential_damping: f64,
}

impl Default for ContactParams {
    fn default() -> Self {
        Self { stiffness: 1.0e4, damping: 1.0e2, friction: 1.0, tangential_damping: 1.0e3 }
    }
}

/// Axis-aligned obstacle standing on the ground: `[x0, x0 + thickness] × [0, height]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WallBox {
    pub x0: f64,
    pub thickness: f64,
    pub height: f64,
}

impl WallBox {
    pub fn contains(&self, p: Vec2) -> bool {
        p[0] > self.x0 && p[0] < self.x0 + self.thickness && p[1] < self.height && p[1] > 0.0
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Terrain {
    pub ground: bool,
    pub wall: Option<WallBox>,
}

impl Terrain {
    pub const FLAT: Terrain = Terrain { ground: true, wall: None };
    pub const NONE: Terrain = Terrain { ground: false, wall: None };
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainState {
    pub q: Vec<f64>,
    pub qdot: Vec<f64>,
    pub time: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SubstepReport {
    /// Deepest ground penetration among contact points (m, ≥ 0).
    pub max_penetration: f64,
    pub in_contact: bool,
}

/// Per-link world-frame quantities for one state.
#[derive(Debug, Clone)]
pub struct Kinematics {
    pub angles: Vec<f64>,
    pub omegas: Vec<f64>,
    pub origins: Vec<Vec2>,
    pub origin_vel: Vec<Vec2>,
    /// `J̇ q̇` of each link origin.
    pub origin_bias: Vec<Vec2>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanarChain {
    pub base: Base,
    pub links: Vec<Link>,
    /// Vertical gravitational acceleration (negative is down).
    pub gravity: f64,
    pub armature: f64,
    pub joint_damping: f64,
    /// Per actuated joint.
    pub joint_limits: Vec<Option<(f64, f64)>>,
    pub limit_stiffness: f64,
    pub limit_damping: f64,
    /// Torque per unit of normalized control, per actuated joint.
    pub gear: Vec<f64>,
    pub contact: ContactParams,
}

impl PlanarChain {
    fn offset(&self) -> usize {
        match self.base {
            Base::Floating => 2,
            Base::Fixed { .. } => 0,
        }
    }

    pub fn dof(&self) -> usize {
        self.offset() + self.links.len()
    }

    pub fn n_actuated(&self) -> usize {
        match self.base {
            Base::Floating => self.links.len() - 1,
            Base::Fixed { .. } => self.links.len(),
        }
    }

    /// Generalized-coordinate index of actuated joint `k`.
    fn actuated_index(&self, k: usize) -> usize {
        self.dof() - self.n_actuated() + k
    }

    pub fn total_mass(&self) -> f64 {
        self.links.iter().map(|l| l.mass).sum()
    }

    pub fn zero_state(&self) -> ChainState {
        ChainState { q: vec![0.0; self.dof()], qdot: vec![0.0; self.dof()], time: 0.0 }
    }

    pub fn kinematics(&self, state: &ChainState) -> Kinematics {
        let n = self.links.len();
        let off = self.offset();
        let mut angles = Vec::with_capacity(n);
        let mut omegas = Vec::with_capacity(n);
        let mut origins = Vec::with_capacity(n);
        let mut origin_vel = Vec::with_capacity(n);
        let mut origin_bias = Vec::with_capacity(n);

        let (o0, v0) = match self.base {
            Base::Floating => ([state.q[0], state.q[1]], [state.qdot[0], state.qdot[1]]),
            Base::Fixed { anchor } => (anchor, [0.0, 0.0]),
        };
        let (mut theta, mut omega) = (0.0, 0.0);
        let (mut o, mut v, mut b) = (o0, v0, [0.0, 0.0]);
        for i in 0..n {
            theta += state.q[off + i];
            omega += state.qdot[off + i];
            angles.push(theta);
            omegas.push(omega);
            origins.push(o);
            origin_vel.push(v);
            origin_bias.push(b);
            let r = rotate(self.links[i].child, theta);
            o = add(o, r);
            v = add(v, cross_w(omega, r));
            b = sub(b, scale(r, omega * omega));
        }
        Kinematics { angles, omegas, origins, origin_vel, origin_bias }
    }

    pub fn point_world(&self, kin: &Kinematics, link: usize, local: Vec2) -> Vec2 {
        add(kin.origins[link], rotate(local, kin.angles[link]))
    }

    pub fn point_velocity(&self, kin: &Kinematics, link: usize, world: Vec2) -> Vec2 {
        add(kin.origin_vel[link], cross_w(kin.omegas[link], sub(world, kin.origins[link])))
    }

    pub fn com_world(&self, kin: &Kinematics, link: usize) -> Vec2 {
        self.point_world(kin, link, self.links[link].com)
    }

    /// Whole-chain centre of mass.
    pub fn center_of_mass(&self, state: &ChainState) -> Vec2 {
        let kin = self.kinematics(state);
        let m = self.total_mass();
        let s = (0..self.links.len())
            .fold([0.0, 0.0], |acc, i| add(acc, scale(self.com_world(&kin, i), self.links[i].mass)));
        scale(s, 1.0 / m)
    }

    /// Accumulates `Jpᵀ f` for a world point `p` on `link` into `out`.
    fn apply_point_force(&self, kin: &Kinematics, link: usize, p: Vec2, f: Vec2, out: &mut DVector<f64>) {
        let off = self.offset();
        if off == 2 {
            out[0] += f[0];
            out[1] += f[1];
        }
        for k in 0..=link {
            out[off + k] += cross(sub(p, kin.origins[k]), f);
        }
    }

    /// COM Jacobian columns of `link` (translational part only).
    fn com_jacobian(&self, kin: &Kinematics, link: usize, cols: &mut Vec<Vec2>) {
        cols.clear();
        cols.resize(self.dof(), [0.0, 0.0]);
        let off = self.offset();
        if off == 2 {
            cols[0] = [1.0, 0.0];
            cols[1] = [0.0, 1.0];
        }
        let c = self.com_world(kin, link);
        for k in 0..=link {
            cols[off + k] = cross_w(1.0, sub(c, kin.origins[k]));
        }
    }

    pub fn mass_matrix(&self, kin: &Kinematics) -> DMatrix<f64> {
        let n = self.dof();
        let off = self.offset();
        let mut m = DMatrix::<f64>::zeros(n, n);
        let mut cols = Vec::with_capacity(n);
        for (i, link) in self.links.iter().enumerate() {
            self.com_jacobian(kin, i, &mut cols);
            for a in 0..n {
                for b in a..n {
                    let mut v = link.mass * dot(cols[a], cols[b]);
                    if a >= off && b >= off && a - off <= i && b - off <= i {
                        v += link.inertia;
                    }
                    m[(a, b)] += v;
                }
            }
        }
        for k in 0..self.n_actuated() {
            let j = self.actuated_index(k);
            m[(j, j)] += self.armature;
        }
        for a in 0..n {
            for b in 0..a {
                m[(a, b)] = m[(b, a)];
            }
        }
        m
    }

    /// Joint-limit torque on actuated joint `k`.
    fn limit_torque(&self, k: usize, angle: f64, rate: f64) -> f64 {
        match self.joint_limits.get(k).copied().flatten() {
            Some((lo, _)) if angle < lo => self.limit_stiffness * (lo - angle) - self.limit_damping * rate.min(0.0),
            Some((_, hi)) if angle > hi => -self.limit_stiffness * (angle - hi) - self.limit_damping * rate.max(0.0),
            _ => 0.0,
        }
    }

    /// Penalty contact force on a point given its position and velocity.
    fn contact_force(&self, terrain: &Terrain, p: Vec2, v: Vec2, report: &mut SubstepReport) -> Vec2 {
        let c = &self.contact;
        let mut f = [0.0, 0.0];
        let mut push = |depth: f64, normal: Vec2| {
            let tangent = [normal[1], -normal[0]];
            let vn = dot(v, normal);
            let fn_ = (c.stiffness * depth - c.damping * vn).max(0.0);
            let ft = (-c.tangential_damping * dot(v, tangent)).clamp(-c.friction * fn_, c.friction * fn_);
            f = add(f, add(scale(normal, fn_), scale(tangent, ft)));
        };
        if terrain.ground && p[1] < 0.0 {
            report.max_penetration = report.max_penetration.max(-p[1]);
            report.in_contact = true;
            push(-p[1], [0.0, 1.0]);
        }
        if let Some(w) = terrain.wall {
            if w.contains(p) {
                report.in_contact = true;
                let faces = [
                    (p[0] - w.x0, [-1.0, 0.0]),
                    (w.x0 + w.thickness - p[0], [1.0, 0.0]),
                    (w.height - p[1], [0.0, 1.0]),
                ];
                let (depth, normal) = faces.into_iter().min_by(|a, b| a.0.total_cmp(&b.0)).expect("three faces");
                push(depth, normal);
            }
        }
        f
    }

    /// Right-hand side of `M q̈ = Q`.
    pub fn generalized_forces(
        &self,
        kin: &Kinematics,
        state: &ChainState,
        torques: &[f64],
        terrain: &Terrain,
        report: &mut SubstepReport,
    ) -> DVector<f64> {
        let mut out = DVector::<f64>::zeros(self.dof());
        for (i, link) in self.links.iter().enumerate() {
            let c = self.com_world(kin, i);
            let w2 = kin.omegas[i] * kin.omegas[i];
            let bias = sub(kin.origin_bias[i], scale(sub(c, kin.origins[i]), w2));
            let f = [-link.mass * bias[0], link.mass * (self.gravity - bias[1])];
            self.apply_point_force(kin, i, c, f, &mut out);
            if terrain.ground || terrain.wall.is_some() {
                for &local in &link.contact_points {
                    let p = self.point_world(kin, i, local);
                    let v = self.point_velocity(kin, i, p);
                    let fc = self.contact_force(terrain, p, v, report);
                    if fc != [0.0, 0.0] {
                        self.apply_point_force(kin, i, p, fc, &mut out);
                    }
                }
            }
        }
        for k in 0..self.n_actuated() {
            let j = self.actuated_index(k);
            let tau = torques.get(k).copied().unwrap_or(0.0);
            out[j] += tau - self.joint_damping * state.qdot[j] + self.limit_torque(k, state.q[j], state.qdot[j]);
        }
        out
    }

    pub fn accelerations(
        &self,
        state: &ChainState,
        torques: &[f64],
        terrain: &Terrain,
    ) -> (DVector<f64>, SubstepReport) {
        let kin = self.kinematics(state);
        let mut report = SubstepReport::default();
        let rhs = self.generalized_forces(&kin, state, torques, terrain, &mut report);
        let m = self.mass_matrix(&kin);
        let qddot = m.cholesky().expect("mass matrix is positive definite").solve(&rhs);
        (qddot, report)
    }

    /// One semi-implicit Euler step with joint torques in N·m.
    pub fn substep(&self, state: &mut ChainState, torques: &[f64], terrain: &Terrain, dt: f64) -> SubstepReport {
        let (qddot, report) = self.accelerations(state, torques, terrain);
        for i in 0..self.dof() {
            state.qdot[i] += dt * qddot[i];
            state.q[i] += dt * state.qdot[i];
        }
        state.time += dt;
        report
    }

    pub fn kinetic_energy(&self, state: &ChainState) -> f64 {
        let kin = self.kinematics(state);
        let mut t = 0.0;
        for (i, link) in self.links.iter().enumerate() {
            let c = self.com_world(&kin, i);
            let v = self.point_velocity(&kin, i, c);
            t += 0.5 * link.mass * dot(v, v) + 0.5 * link.inertia * kin.omegas[i] * kin.omegas[i];
        }
        for k in 0..self.n_actuated() {
            let j = self.actuated_index(k);
            t += 0.5 * self.armature * state.qdot[j] * state.qdot[j];
        }
        t
    }

    pub fn potential_energy(&self, state: &ChainState) -> f64 {
        let kin = self.kinematics(state);
        (0..self.links.len()).map(|i| -self.links[i].mass * self.gravity * self.com_world(&kin, i)[1]).sum()
    }

    /// Kinetic plus gravitational energy (contacts and limits excluded).
    pub fn energy(&self, state: &ChainState) -> f64 {
        self.kinetic_energy(state) + self.potential_energy(state)
    }

    /// Lowest contact point height.
    pub fn lowest_point(&self, state: &ChainState) -> f64 {
        let kin = self.kinematics(state);
        self.links
            .iter()
            .enumerate()
            .flat_map(|(i, l)| l.contact_points.iter().map(move |&p| (i, p)))
            .map(|(i, p)| self.point_world(&kin, i, p)[1])
            .fold(f64::INFINITY, f64::min)
    }

    /// All contact points in world coordinates.
    pub fn contact_points_world(&self, state: &ChainState) -> Vec<Vec2> {
        let kin = self.kinematics(state);
        self.links
            .iter()
            .enumerate()
            .flat_map(|(i, l)| l.contact_points.iter().map(move |&p| (i, p)))
            .map(|(i, p)| self.point_world(&kin, i, p))
            .collect()
    }
}
