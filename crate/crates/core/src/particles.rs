//! Rigid homogeneous charged spheres: lattice mapping, moving-obstacle
//! boundary values, momentum-exchange force and torque, PDF reconstruction
//! in uncovered cells, time integration and a simple inelastic contact
//! model.
//!
//! A cell is covered when the sphere overlaps its center (closed ball,
//! |center − x| ≤ R). Mapping honours periodic axes through particle
//! images; force lever arms and surface velocities use the minimum-image
//! displacement so a sphere wrapped across a periodic face behaves like an
//! unwrapped one.

use crate::grid::{BlockField, BlockFlags, CellKind, Domain};
use crate::lattice::{c_f64, C, OPP, Q, W};
use crate::lbm::{equilibrium_dev, RHO0};
use crate::units::Units;
use crate::error::{Result, SimError};

pub const NO_OWNER: u32 = u32::MAX;

#[derive(Debug, Clone)]
pub struct SphereParticle {
    pub id: u64,
    /// center position [m]
    pub pos: [f64; 3],
    /// linear velocity [m/s]
    pub vel: [f64; 3],
    /// angular velocity [rad/s]
    pub ang_vel: [f64; 3],
    /// radius [m]
    pub radius: f64,
    /// material density [kg/m³]
    pub density: f64,
    /// total charge [C]
    pub charge: f64,
    pub fixed: bool,
    /// accumulated force [N]
    pub force: [f64; 3],
    /// accumulated torque [N·m]
    pub torque: [f64; 3],
}

impl SphereParticle {
    pub fn new(id: u64, pos: [f64; 3], radius: f64, density: f64) -> Self {
        SphereParticle {
            id,
            pos,
            vel: [0.0; 3],
            ang_vel: [0.0; 3],
            radius,
            density,
            charge: 0.0,
            fixed: false,
            force: [0.0; 3],
            torque: [0.0; 3],
        }
    }

    pub fn volume(&self) -> f64 {
        4.0 / 3.0 * std::f64::consts::PI * self.radius.powi(3)
    }

    pub fn mass(&self) -> f64 {
        self.density * self.volume()
    }

    /// Solid-sphere moment of inertia I = (2/5) m R².
    pub fn inertia(&self) -> f64 {
        0.4 * self.mass() * self.radius * self.radius
    }

    /// Surface velocity u_s = v + ω × (x_s − x).
    pub fn surface_velocity(&self, x_s: [f64; 3]) -> [f64; 3] {
        let r = [
            x_s[0] - self.pos[0],
            x_s[1] - self.pos[1],
            x_s[2] - self.pos[2],
        ];
        self.surface_velocity_rel(r)
    }

    /// Surface velocity from a displacement relative to the center.
    pub fn surface_velocity_rel(&self, r: [f64; 3]) -> [f64; 3] {
        let w = self.ang_vel;
        [
            self.vel[0] + w[1] * r[2] - w[2] * r[1],
            self.vel[1] + w[2] * r[0] - w[0] * r[2],
            self.vel[2] + w[0] * r[1] - w[1] * r[0],
        ]
    }
}

/// Per-block obstacle ownership over the ghost-extended box.
#[derive(Debug, Clone)]
pub struct BlockObstacleMap {
    pub ext: [usize; 3],
    pub gw: usize,
    pub n: [usize; 3],
    /// owning particle index (into the engine's particle vector) per cell
    pub owner: Vec<u32>,
    prev_owner: Vec<u32>,
    /// obstacle cells (incl. ghost ring) with ≥1 interior fluid neighbour
    pub surface: Vec<u32>,
    /// interior cells covered this step (were fluid before)
    pub newly_covered: Vec<u32>,
    /// interior cells uncovered this step with their previous owner
    pub newly_uncovered: Vec<(u32, u32)>,
}

impl BlockObstacleMap {
    pub fn new(block_cells: [usize; 3], gw: usize) -> Self {
        let ext = [
            block_cells[0] + 2 * gw,
            block_cells[1] + 2 * gw,
            block_cells[2] + 2 * gw,
        ];
        let vol = ext[0] * ext[1] * ext[2];
        BlockObstacleMap {
            ext,
            gw,
            n: block_cells,
            owner: vec![NO_OWNER; vol],
            prev_owner: vec![NO_OWNER; vol],
            surface: Vec::new(),
            newly_covered: Vec::new(),
            newly_uncovered: Vec::new(),
        }
    }

    #[inline]
    pub fn idx(&self, x: usize, y: usize, z: usize) -> usize {
        (z * self.ext[1] + y) * self.ext[0] + x
    }
}

/// Minimum-image displacement `to − from` honouring periodic axes.
#[inline]
pub fn min_image(domain: &Domain, units: &Units, mut d: [f64; 3]) -> [f64; 3] {
    for a in 0..3 {
        if domain.periodic[a] {
            let l = domain.global_cells[a] as f64 * units.dx;
            d[a] -= l * (d[a] / l).round();
        }
    }
    d
}

/// Map all particles onto one block: set `owner` for every covered cell of
/// the extended box, update LBM flags on interior cells, and record the
/// covered/uncovered deltas. Particles are visited in ascending id so ties
/// go to the lower id.
pub fn map_particles_block(
    map: &mut BlockObstacleMap,
    flags: &mut BlockFlags,
    domain: &Domain,
    units: &Units,
    block_id: usize,
    particles: &[SphereParticle],
) {
    std::mem::swap(&mut map.owner, &mut map.prev_owner);
    map.owner.fill(NO_OWNER);
    map.surface.clear();
    map.newly_covered.clear();
    map.newly_uncovered.clear();

    let origin = domain.block_origin(block_id);
    let gw = map.gw as i64;
    let dx = units.dx;
    // extended box in global cell coordinates: [lo, hi)
    let lo = [origin[0] - gw, origin[1] - gw, origin[2] - gw];
    let hi = [
        origin[0] + map.n[0] as i64 + gw,
        origin[1] + map.n[1] as i64 + gw,
        origin[2] + map.n[2] as i64 + gw,
    ];

    for (pi, p) in particles.iter().enumerate() {
        let r = p.radius;
        // periodic images whose bounding box could reach this block
        let mut shifts: [Vec<f64>; 3] = [vec![0.0], vec![0.0], vec![0.0]];
        for a in 0..3 {
            if domain.periodic[a] {
                let l = domain.global_cells[a] as f64 * dx;
                shifts[a].push(-l);
                shifts[a].push(l);
            }
        }
        for &sx in &shifts[0] {
            for &sy in &shifts[1] {
                for &sz in &shifts[2] {
                    let c = [p.pos[0] + sx, p.pos[1] + sy, p.pos[2] + sz];
                    map_one_sphere(map, lo, hi, dx, c, r, pi as u32);
                }
            }
        }
    }

    // flag updates and deltas on interior cells
    let ex = map.ext[0];
    let ey = map.ext[1];
    for z in map.gw..map.gw + map.n[2] {
        for y in map.gw..map.gw + map.n[1] {
            for x in map.gw..map.gw + map.n[0] {
                let idx = (z * ey + y) * ex + x;
                let now = map.owner[idx];
                let before = map.prev_owner[idx];
                let kind = flags.kind_at(idx);
                if now != NO_OWNER {
                    if kind == CellKind::Fluid {
                        map.newly_covered.push(idx as u32);
                        flags.kind[idx] = CellKind::Obstacle as u8;
                    } else if kind == CellKind::Obstacle {
                        // stays covered
                    }
                    // static walls keep their kind; the particle map does not
                    // override configured geometry
                } else if kind == CellKind::Obstacle {
                    flags.kind[idx] = CellKind::Fluid as u8;
                    map.newly_uncovered.push((idx as u32, before));
                }
            }
        }
    }

    // surface cells: any owned cell with ≥1 interior fluid neighbour
    let exi = ex as isize;
    let eyi = ey as isize;
    let gwi = map.gw as isize;
    let n = [map.n[0] as isize, map.n[1] as isize, map.n[2] as isize];
    for z in 0..map.ext[2] as isize {
        for y in 0..eyi {
            for x in 0..exi {
                let idx = ((z * eyi + y) * exi + x) as usize;
                if map.owner[idx] == NO_OWNER {
                    continue;
                }
                let mut near = false;
                for q in 1..Q {
                    let fx = x - C[q][0] as isize;
                    let fy = y - C[q][1] as isize;
                    let fz = z - C[q][2] as isize;
                    if fx < gwi
                        || fy < gwi
                        || fz < gwi
                        || fx >= gwi + n[0]
                        || fy >= gwi + n[1]
                        || fz >= gwi + n[2]
                    {
                        continue;
                    }
                    let fidx = ((fz * eyi + fy) * exi + fx) as usize;
                    if flags.kind_at(fidx) == CellKind::Fluid && map.owner[fidx] == NO_OWNER {
                        near = true;
                        break;
                    }
                }
                if near {
                    map.surface.push(idx as u32);
                }
            }
        }
    }
}

fn map_one_sphere(
    map: &mut BlockObstacleMap,
    lo: [i64; 3],
    hi: [i64; 3],
    dx: f64,
    center: [f64; 3],
    radius: f64,
    pi: u32,
) {
    let mut glo = [0i64; 3];
    let mut ghi = [0i64; 3];
    for a in 0..3 {
        // cells whose center (g + 1/2) dx can lie within the radius
        glo[a] = ((center[a] - radius) / dx - 0.5).ceil() as i64;
        ghi[a] = ((center[a] + radius) / dx - 0.5).floor() as i64;
        glo[a] = glo[a].max(lo[a]);
        ghi[a] = ghi[a].min(hi[a] - 1);
        if glo[a] > ghi[a] {
            return;
        }
    }
    let r2 = radius * radius;
    let ex = map.ext[0];
    let ey = map.ext[1];
    for gz in glo[2]..=ghi[2] {
        let cz = (gz as f64 + 0.5) * dx - center[2];
        for gy in glo[1]..=ghi[1] {
            let cy = (gy as f64 + 0.5) * dx - center[1];
            let base = ((gz - lo[2]) as usize * ey + (gy - lo[1]) as usize) * ex;
            for gx in glo[0]..=ghi[0] {
                let cx = (gx as f64 + 0.5) * dx - center[0];
                if cx * cx + cy * cy + cz * cz <= r2 {
                    let idx = base + (gx - lo[0]) as usize;
                    if map.owner[idx] == NO_OWNER {
                        map.owner[idx] = pi;
                    }
                }
            }
        }
    }
}

/// Write moving-obstacle boundary slots: for every surface cell x_s and
/// every direction q with interior fluid neighbour x_f = x_s − e_q,
/// d_q̄(x_s) = d̃_q(x_f) − 2 (w_q/c_s²) ρ_f (c_q·u_s), u_s evaluated at the
/// obstacle cell center.
pub fn apply_obstacle_bcs_block(
    pdf: &mut BlockField<19>,
    flags: &BlockFlags,
    map: &BlockObstacleMap,
    domain: &Domain,
    units: &Units,
    block_id: usize,
    particles: &[SphereParticle],
) {
    let vol = pdf.volume();
    let ex = pdf.ext[0] as isize;
    let ey = pdf.ext[1] as isize;
    let gw = pdf.gw as isize;
    let n = [pdf.n[0] as isize, pdf.n[1] as isize, pdf.n[2] as isize];
    let origin = domain.block_origin(block_id);
    let raw = pdf.raw_mut();
    for &sidx in &map.surface {
        let s = sidx as isize;
        let sx = s % ex;
        let sy = (s / ex) % ey;
        let sz = s / (ex * ey);
        let p = &particles[map.owner[sidx as usize] as usize];
        // obstacle cell center in physical coordinates
        let cc = [
            ((origin[0] + sx as i64 - gw as i64) as f64 + 0.5) * units.dx,
            ((origin[1] + sy as i64 - gw as i64) as f64 + 0.5) * units.dx,
            ((origin[2] + sz as i64 - gw as i64) as f64 + 0.5) * units.dx,
        ];
        let rel = min_image(
            domain,
            units,
            [cc[0] - p.pos[0], cc[1] - p.pos[1], cc[2] - p.pos[2]],
        );
        let u_s = units.vel3_to_lu(p.surface_velocity_rel(rel));
        for q in 1..Q {
            let fx = sx - C[q][0] as isize;
            let fy = sy - C[q][1] as isize;
            let fz = sz - C[q][2] as isize;
            if fx < gw || fy < gw || fz < gw || fx >= gw + n[0] || fy >= gw + n[1] || fz >= gw + n[2]
            {
                continue;
            }
            let fidx = ((fz * ey + fy) * ex + fx) as usize;
            if flags.kind_at(fidx) != CellKind::Fluid {
                continue;
            }
            let mut rho = RHO0;
            for pq in 0..Q {
                rho += raw[pq * vol + fidx];
            }
            let v = raw[q * vol + fidx]
                - 2.0 * W[q] * crate::lattice::INV_CS2 * rho * crate::lattice::dot_c(q, u_s);
            raw[OPP[q] * vol + sidx as usize] = v;
        }
    }
}

/// Momentum-exchange force and torque on one block: for every surface cell
/// x_s and interior fluid neighbour x_f = x_s + e_q̄, accumulate
/// c_q [2 f̃_q(x_f) − 2 (w_q/c_s²) ρ_f c_q·u_s] δx³/δt into the owner's
/// partial force; torque lever arm is the boundary midpoint x_s + ½ e_q̄.
///
/// Partials are per-particle in `out` (force then torque, physical units);
/// the engine sums block partials in ascending block order.
pub fn hydrodynamic_force_block(
    pdf: &BlockField<19>,
    flags: &BlockFlags,
    map: &BlockObstacleMap,
    domain: &Domain,
    units: &Units,
    block_id: usize,
    particles: &[SphereParticle],
    out: &mut [[f64; 6]],
) {
    let vol = pdf.volume();
    let ex = pdf.ext[0] as isize;
    let ey = pdf.ext[1] as isize;
    let gw = pdf.gw as isize;
    let n = [pdf.n[0] as isize, pdf.n[1] as isize, pdf.n[2] as isize];
    let origin = domain.block_origin(block_id);
    let raw = pdf.raw();
    let f_scale = units.rho_ref * units.dx.powi(4) / (units.dt * units.dt);
    for &sidx in &map.surface {
        let s = sidx as isize;
        let sx = s % ex;
        let sy = (s / ex) % ey;
        let sz = s / (ex * ey);
        let pi = map.owner[sidx as usize] as usize;
        let p = &particles[pi];
        let cc = [
            ((origin[0] + sx as i64 - gw as i64) as f64 + 0.5) * units.dx,
            ((origin[1] + sy as i64 - gw as i64) as f64 + 0.5) * units.dx,
            ((origin[2] + sz as i64 - gw as i64) as f64 + 0.5) * units.dx,
        ];
        let rel = min_image(
            domain,
            units,
            [cc[0] - p.pos[0], cc[1] - p.pos[1], cc[2] - p.pos[2]],
        );
        let u_s = units.vel3_to_lu(p.surface_velocity_rel(rel));
        for q in 1..Q {
            let fx = sx - C[q][0] as isize;
            let fy = sy - C[q][1] as isize;
            let fz = sz - C[q][2] as isize;
            if fx < gw || fy < gw || fz < gw || fx >= gw + n[0] || fy >= gw + n[1] || fz >= gw + n[2]
            {
                continue;
            }
            let fidx = ((fz * ey + fy) * ex + fx) as usize;
            if flags.kind_at(fidx) != CellKind::Fluid {
                continue;
            }
            let mut rho = RHO0;
            for pq in 0..Q {
                rho += raw[pq * vol + fidx];
            }
            let f_tilde = W[q] + raw[q * vol + fidx];
            let mag =
                2.0 * f_tilde - 2.0 * W[q] * crate::lattice::INV_CS2 * rho * crate::lattice::dot_c(q, u_s);
            let c = c_f64(q);
            let df = [
                c[0] * mag * f_scale,
                c[1] * mag * f_scale,
                c[2] * mag * f_scale,
            ];
            // lever arm: boundary midpoint x_s + ½ e_q̄ relative to the center
            let cb = OPP[q];
            let lever = [
                rel[0] + 0.5 * C[cb][0] as f64 * units.dx,
                rel[1] + 0.5 * C[cb][1] as f64 * units.dx,
                rel[2] + 0.5 * C[cb][2] as f64 * units.dx,
            ];
            let acc = &mut out[pi];
            acc[0] += df[0];
            acc[1] += df[1];
            acc[2] += df[2];
            acc[3] += lever[1] * df[2] - lever[2] * df[1];
            acc[4] += lever[2] * df[0] - lever[0] * df[2];
            acc[5] += lever[0] * df[1] - lever[1] * df[0];
        }
    }
}

/// Set uncovered cells to the equilibrium of the departing particle's
/// surface velocity at ρ_f = 1.
pub fn reconstruct_pdfs_block(
    pdf: &mut BlockField<19>,
    map: &BlockObstacleMap,
    domain: &Domain,
    units: &Units,
    block_id: usize,
    particles: &[SphereParticle],
) {
    let origin = domain.block_origin(block_id);
    let ex = pdf.ext[0];
    let ey = pdf.ext[1];
    let gw = pdf.gw as i64;
    for &(idx, prev) in &map.newly_uncovered {
        let i = idx as usize;
        let x = i % ex;
        let y = (i / ex) % ey;
        let z = i / (ex * ey);
        let u_lu = if prev != NO_OWNER {
            let p = &particles[prev as usize];
            let cc = [
                ((origin[0] + x as i64 - gw) as f64 + 0.5) * units.dx,
                ((origin[1] + y as i64 - gw) as f64 + 0.5) * units.dx,
                ((origin[2] + z as i64 - gw) as f64 + 0.5) * units.dx,
            ];
            let rel = min_image(
                domain,
                units,
                [cc[0] - p.pos[0], cc[1] - p.pos[1], cc[2] - p.pos[2]],
            );
            units.vel3_to_lu(p.surface_velocity_rel(rel))
        } else {
            [0.0; 3]
        };
        let d = equilibrium_dev(0.0, u_lu);
        for q in 0..Q {
            pdf.set(q, i, d[q]);
        }
    }
}

/// Semi-implicit Euler step: v += (F/m) δt, x += v δt, ω += I⁻¹ T δt.
/// Accumulators are cleared; fixed particles never move. Errors when a
/// particle travels more than half a lattice spacing in one step.
pub fn integrate_bodies(
    particles: &mut [SphereParticle],
    dt: f64,
    gravity: [f64; 3],
    units: &Units,
) -> Result<()> {
    let limit = 0.5 * units.dx;
    for p in particles.iter_mut() {
        if p.fixed {
            p.force = [0.0; 3];
            p.torque = [0.0; 3];
            continue;
        }
        let m = p.mass();
        let inv_i = 1.0 / p.inertia();
        for a in 0..3 {
            p.vel[a] += (p.force[a] / m + gravity[a]) * dt;
            p.ang_vel[a] += p.torque[a] * inv_i * dt;
        }
        let disp = [p.vel[0] * dt, p.vel[1] * dt, p.vel[2] * dt];
        let d = (disp[0] * disp[0] + disp[1] * disp[1] + disp[2] * disp[2]).sqrt();
        if d > limit {
            return Err(SimError::Stability {
                id: p.id,
                displacement: d,
                limit,
            });
        }
        for a in 0..3 {
            p.pos[a] += disp[a];
        }
        p.force = [0.0; 3];
        p.torque = [0.0; 3];
    }
    Ok(())
}

/// Wrap particle centers back into the periodic box.
pub fn wrap_positions(particles: &mut [SphereParticle], domain: &Domain, units: &Units) {
    for a in 0..3 {
        if !domain.periodic[a] {
            continue;
        }
        let l = domain.global_cells[a] as f64 * units.dx;
        for p in particles.iter_mut() {
            p.pos[a] = p.pos[a].rem_euclid(l);
        }
    }
}

/// A planar wall for contact handling (and lubrication), axis-aligned.
#[derive(Debug, Clone, Copy)]
pub struct PlaneWall {
    pub axis: usize,
    /// plane coordinate along `axis` [m]
    pub position: f64,
    /// +1 when the fluid lies above the plane (inward normal +axis)
    pub inward: f64,
    /// wall velocity [m/s] (for lubrication against moving walls)
    pub velocity: [f64; 3],
}

impl PlaneWall {
    /// Signed gap between the sphere surface and the plane.
    pub fn gap(&self, p: &SphereParticle) -> f64 {
        (p.pos[self.axis] - self.position) * self.inward - p.radius
    }
}

/// Positional overlap resolution with normal-velocity restitution.
/// Positions separate along the contact normal split by inverse mass;
/// tangential velocities are untouched (frictionless).
pub fn resolve_contacts(
    particles: &mut [SphereParticle],
    walls: &[PlaneWall],
    restitution: f64,
) {
    let n = particles.len();
    for i in 0..n {
        for j in i + 1..n {
            let (a, b) = {
                let (lo, hi) = particles.split_at_mut(j);
                (&mut lo[i], &mut hi[0])
            };
            let r = [
                b.pos[0] - a.pos[0],
                b.pos[1] - a.pos[1],
                b.pos[2] - a.pos[2],
            ];
            let dist = (r[0] * r[0] + r[1] * r[1] + r[2] * r[2]).sqrt();
            let overlap = a.radius + b.radius - dist;
            if overlap <= 0.0 || dist == 0.0 {
                continue;
            }
            let nrm = [r[0] / dist, r[1] / dist, r[2] / dist];
            let inv_ma = if a.fixed { 0.0 } else { 1.0 / a.mass() };
            let inv_mb = if b.fixed { 0.0 } else { 1.0 / b.mass() };
            let denom = inv_ma + inv_mb;
            if denom == 0.0 {
                continue;
            }
            let sa = inv_ma / denom;
            let sb = inv_mb / denom;
            for c in 0..3 {
                a.pos[c] -= nrm[c] * overlap * sa;
                b.pos[c] += nrm[c] * overlap * sb;
            }
            let vrel_n = (b.vel[0] - a.vel[0]) * nrm[0]
                + (b.vel[1] - a.vel[1]) * nrm[1]
                + (b.vel[2] - a.vel[2]) * nrm[2];
            if vrel_n < 0.0 {
                let imp = -(1.0 + restitution) * vrel_n / denom;
                for c in 0..3 {
                    a.vel[c] -= imp * inv_ma * nrm[c];
                    b.vel[c] += imp * inv_mb * nrm[c];
                }
            }
        }
    }
    for p in particles.iter_mut() {
        if p.fixed {
            continue;
        }
        for w in walls {
            let gap = w.gap(p);
            if gap >= 0.0 {
                continue;
            }
            p.pos[w.axis] -= gap * w.inward;
            let vn = (p.vel[w.axis] - w.velocity[w.axis]) * w.inward;
            if vn < 0.0 {
                p.vel[w.axis] -= (1.0 + restitution) * vn * w.inward;
            }
        }
    }
}

/// Drag correction for the mapped volume: F*_cor = (V_sph/V_sim)^{1/3} F*.
pub fn volume_corrected_force(f_star: f64, v_sph: f64, v_sim: f64) -> f64 {
    (v_sph / v_sim).cbrt() * f_star
}
