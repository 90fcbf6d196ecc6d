//! Finite-volume discretisation of the electric potential equation
//! −ΔΦ = ρ/ε on the LBM lattice, with Dirichlet/Neumann/periodic boundary
//! conditions folded implicitly into the stencils and the right-hand side.
//!
//! The operator A = −Δ_h is kept positive definite for Dirichlet problems:
//! the interior seven-point stencil is (6, −1, −1, −1, −1, −1, −1)/δx².
//! Stencils are quasi-constant: one shared interior stencil per level plus
//! explicit per-cell stencils at near-boundary cells.
//!
//! The solver works on the lattice-scaled system (δx_L = 1) with the
//! potential carried in volts: the RHS is (ρ_chg/ε)·δx².

use std::sync::Arc;

use crate::error::{Result, SimError};
use crate::grid::{BlockField, Domain, DomainField, AXIS_NAMES};
use crate::lattice::{c_f64, Q, W};
use crate::particles::SphereParticle;
use crate::units::Units;

/// Stencil slot order: center, −x, +x, −y, +y, −z, −z.
pub const STENCIL_DIRS: [[i64; 3]; 7] = [
    [0, 0, 0],
    [-1, 0, 0],
    [1, 0, 0],
    [0, -1, 0],
    [0, 1, 0],
    [0, 0, -1],
    [0, 0, 1],
];

/// Boundary value: constant or position-dependent (physical coordinates).
#[derive(Clone)]
pub enum BcValue {
    Const(f64),
    Field(Arc<dyn Fn([f64; 3]) -> f64 + Send + Sync>),
}

impl BcValue {
    pub fn at(&self, p: [f64; 3]) -> f64 {
        match self {
            BcValue::Const(v) => *v,
            BcValue::Field(f) => f(p),
        }
    }
}

impl std::fmt::Debug for BcValue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BcValue::Const(v) => write!(f, "Const({v})"),
            BcValue::Field(_) => write!(f, "Field(..)"),
        }
    }
}

/// Per-face boundary condition for the potential equation.
#[derive(Debug, Clone)]
pub enum PotentialBc {
    /// potential at the boundary face [V]
    Dirichlet(BcValue),
    /// outward normal derivative ∂Φ/∂n at the face [V/m]
    Neumann(BcValue),
    Periodic,
}

#[derive(Debug, Clone)]
pub struct PotentialProblem {
    /// absolute permittivity [F/m]
    pub epsilon: f64,
    /// faces[axis][side]: side 0 = low face, 1 = high face
    pub faces: [[PotentialBc; 2]; 3],
    /// subsampling factor for the charge-density RHS
    pub s_f_phi: u32,
    /// subsampling factor for the Coulomb-force charge fractions
    pub s_f_force: u32,
}

impl PotentialProblem {
    pub fn validate(&self, domain: &Domain) -> Result<()> {
        for a in 0..3 {
            for s in 0..2 {
                let periodic_face = matches!(self.faces[a][s], PotentialBc::Periodic);
                if periodic_face != domain.periodic[a] {
                    return Err(SimError::config(format!(
                        "potential BC on face {}{} must {} periodic to match the domain",
                        AXIS_NAMES[a],
                        if s == 0 { "-" } else { "+" },
                        if domain.periodic[a] { "be" } else { "not be" },
                    )));
                }
            }
        }
        if self.epsilon <= 0.0 {
            return Err(SimError::config("permittivity must be positive"));
        }
        if self.s_f_phi == 0 || self.s_f_force == 0 {
            return Err(SimError::config("subsampling factors must be ≥ 1"));
        }
        Ok(())
    }

    /// True when no Dirichlet face pins the potential level.
    pub fn is_singular(&self) -> bool {
        !self
            .faces
            .iter()
            .flatten()
            .any(|f| matches!(f, PotentialBc::Dirichlet(_)))
    }
}

/// Quasi-constant stencil storage for one block: a shared interior stencil
/// and explicit per-cell stencils where boundaries fold in.
#[derive(Debug, Clone)]
pub struct StencilBlock {
    pub n: [usize; 3],
    pub ext: [usize; 3],
    pub gw: usize,
    pub interior: [f64; 7],
    /// 0 = interior stencil; k > 0 = overrides[k−1]; indexed over the
    /// extended box, ghost entries unused
    pub index: Vec<u32>,
    pub overrides: Vec<[f64; 7]>,
}

impl StencilBlock {
    pub fn uniform(block_cells: [usize; 3], gw: usize, interior: [f64; 7]) -> Self {
        let ext = [
            block_cells[0] + 2 * gw,
            block_cells[1] + 2 * gw,
            block_cells[2] + 2 * gw,
        ];
        StencilBlock {
            n: block_cells,
            ext,
            gw,
            interior,
            index: vec![0; ext[0] * ext[1] * ext[2]],
            overrides: Vec::new(),
        }
    }

    #[inline]
    pub fn idx(&self, x: usize, y: usize, z: usize) -> usize {
        (z * self.ext[1] + y) * self.ext[0] + x
    }

    #[inline]
    pub fn at(&self, idx: usize) -> &[f64; 7] {
        let k = self.index[idx];
        if k == 0 {
            &self.interior
        } else {
            &self.overrides[(k - 1) as usize]
        }
    }

    pub fn set_override(&mut self, idx: usize, s: [f64; 7]) {
        self.overrides.push(s);
        self.index[idx] = self.overrides.len() as u32;
    }

    /// y = A x over the interior (x must have current ghosts).
    pub fn apply(&self, x: &BlockField<1>, y: &mut BlockField<1>) {
        let ex = self.ext[0];
        let ey = self.ext[1];
        let offs = [
            0isize,
            -1,
            1,
            -(ex as isize),
            ex as isize,
            -((ex * ey) as isize),
            (ex * ey) as isize,
        ];
        let xs = x.comp(0);
        let ys = y.comp_mut(0);
        let gw = self.gw;
        for z in gw..gw + self.n[2] {
            for yy in gw..gw + self.n[1] {
                let row = (z * ey + yy) * ex;
                for xx in gw..gw + self.n[0] {
                    let i = row + xx;
                    let s = self.at(i);
                    let mut acc = 0.0;
                    for d in 0..7 {
                        acc += s[d] * xs[(i as isize + offs[d]) as usize];
                    }
                    ys[i] = acc;
                }
            }
        }
    }

    /// r = f − A x over the interior; returns the block's Σ r².
    pub fn residual(&self, x: &BlockField<1>, f: &BlockField<1>, r: &mut BlockField<1>) -> f64 {
        let ex = self.ext[0];
        let ey = self.ext[1];
        let offs = [
            0isize,
            -1,
            1,
            -(ex as isize),
            ex as isize,
            -((ex * ey) as isize),
            (ex * ey) as isize,
        ];
        let xs = x.comp(0);
        let fs = f.comp(0);
        let rs = r.comp_mut(0);
        let gw = self.gw;
        let mut sum = 0.0;
        for z in gw..gw + self.n[2] {
            for yy in gw..gw + self.n[1] {
                let row = (z * ey + yy) * ex;
                for xx in gw..gw + self.n[0] {
                    let i = row + xx;
                    let s = self.at(i);
                    let mut acc = 0.0;
                    for d in 0..7 {
                        acc += s[d] * xs[(i as isize + offs[d]) as usize];
                    }
                    let res = fs[i] - acc;
                    rs[i] = res;
                    sum += res * res;
                }
            }
        }
        sum
    }
}

/// The interior FV stencil of A = −Δ_h at spacing `dx` (lattice units use 1).
pub fn poisson_interior_stencil(dx: f64) -> [f64; 7] {
    let s = 1.0 / (dx * dx);
    [6.0 * s, -s, -s, -s, -s, -s, -s]
}

/// Which stencil directions (1..7) of a global cell cross a non-periodic
/// physical boundary.
fn crossing_dirs(domain: &Domain, g: [i64; 3]) -> impl Iterator<Item = usize> + '_ {
    (1..7).filter(move |&d| {
        let o = STENCIL_DIRS[d];
        let axis = if o[0] != 0 {
            0
        } else if o[1] != 0 {
            1
        } else {
            2
        };
        if domain.periodic[axis] {
            return false;
        }
        let t = g[axis] + o[axis];
        t < 0 || t >= domain.global_cells[axis] as i64
    })
}

/// Near-boundary mask for the potential equation: bit d−1 set when stencil
/// direction d crosses a physical boundary (the nonBC/nearBC flag set).
pub fn near_bc_mask(domain: &Domain, g: [i64; 3]) -> u8 {
    let mut m = 0u8;
    for d in crossing_dirs(domain, g) {
        m |= 1 << (d - 1);
    }
    m
}

/// Assemble the finest-level stencils: every interior cell references the
/// shared 7-point Poisson stencil; near-boundary cells get a private folded
/// copy (Dirichlet: center −α, Neumann: center +α; boundary-direction
/// coefficient zeroed). Geometry is fixed, so this runs once.
pub fn assemble_stencils(
    domain: &Domain,
    problem: &PotentialProblem,
) -> Result<Vec<StencilBlock>> {
    problem.validate(domain)?;
    let interior = poisson_interior_stencil(1.0);
    let mut out = Vec::with_capacity(domain.n_blocks());
    for bid in 0..domain.n_blocks() {
        let mut sb = StencilBlock::uniform(domain.block_cells, domain.ghost_width, interior);
        let origin = domain.block_origin(bid);
        let gw = domain.ghost_width;
        for z in 0..domain.block_cells[2] {
            for y in 0..domain.block_cells[1] {
                for x in 0..domain.block_cells[0] {
                    let g = [
                        origin[0] + x as i64,
                        origin[1] + y as i64,
                        origin[2] + z as i64,
                    ];
                    let mut s = interior;
                    let mut folded = false;
                    for d in crossing_dirs(domain, g) {
                        let o = STENCIL_DIRS[d];
                        let axis = if o[0] != 0 {
                            0
                        } else if o[1] != 0 {
                            1
                        } else {
                            2
                        };
                        let side = if o[axis] > 0 { 1 } else { 0 };
                        let alpha = s[d];
                        match &problem.faces[axis][side] {
                            PotentialBc::Dirichlet(_) => s[0] -= alpha,
                            PotentialBc::Neumann(_) => s[0] += alpha,
                            PotentialBc::Periodic => unreachable!("crossing dir on periodic axis"),
                        }
                        s[d] = 0.0;
                        folded = true;
                    }
                    if folded {
                        let idx = sb.idx(x + gw, y + gw, z + gw);
                        sb.set_override(idx, s);
                    }
                }
            }
        }
        out.push(sb);
    }
    Ok(out)
}

/// Physical coordinates of the boundary face point of cell `g` in stencil
/// direction `d`.
fn face_point(domain: &Domain, units: &Units, g: [i64; 3], d: usize) -> [f64; 3] {
    let o = STENCIL_DIRS[d];
    let axis = if o[0] != 0 {
        0
    } else if o[1] != 0 {
        1
    } else {
        2
    };
    let mut p = [0.0; 3];
    for a in 0..3 {
        p[a] = (g[a] as f64 + 0.5) * units.dx;
    }
    p[axis] = if o[axis] > 0 {
        domain.global_cells[axis] as f64 * units.dx
    } else {
        0.0
    };
    p
}

/// Add the boundary contributions to the RHS: −2αg_d per Dirichlet
/// direction, −α·g_n·δx per Neumann direction (α the folded neighbour
/// coefficient, −1 in lattice units). Only needed on the finest level.
pub fn adapt_rhs(
    domain: &Domain,
    units: &Units,
    problem: &PotentialProblem,
    rhs: &mut DomainField<1>,
) {
    let alpha = -1.0; // interior neighbour coefficient at δx_L = 1
    for bid in 0..domain.n_blocks() {
        let origin = domain.block_origin(bid);
        let block = &mut rhs.blocks[bid];
        let gw = domain.ghost_width;
        for z in 0..domain.block_cells[2] {
            for y in 0..domain.block_cells[1] {
                for x in 0..domain.block_cells[0] {
                    let g = [
                        origin[0] + x as i64,
                        origin[1] + y as i64,
                        origin[2] + z as i64,
                    ];
                    let mask = near_bc_mask(domain, g);
                    if mask == 0 {
                        continue;
                    }
                    let idx = block.idx(x + gw, y + gw, z + gw);
                    let mut add = 0.0;
                    for d in 1..7 {
                        if mask & (1 << (d - 1)) == 0 {
                            continue;
                        }
                        let o = STENCIL_DIRS[d];
                        let axis = if o[0] != 0 {
                            0
                        } else if o[1] != 0 {
                            1
                        } else {
                            2
                        };
                        let side = if o[axis] > 0 { 1 } else { 0 };
                        let p = face_point(domain, units, g, d);
                        match &problem.faces[axis][side] {
                            PotentialBc::Dirichlet(v) => add += -2.0 * alpha * v.at(p),
                            PotentialBc::Neumann(v) => add += -alpha * v.at(p) * units.dx,
                            PotentialBc::Periodic => {}
                        }
                    }
                    let cur = block.get(0, idx);
                    block.set(0, idx, cur + add);
                }
            }
        }
    }
}

/// Fraction of the cell with corner at `corner` (relative to the sphere
/// center, physical units) covered by a sphere of radius `r`, from s_f³
/// equidistant sub-cell centers (closed ball).
#[inline]
pub fn overlap_fraction(corner: [f64; 3], dx: f64, r: f64, s_f: u32) -> f64 {
    let s = s_f as usize;
    let r2 = r * r;
    let mut inside = 0usize;
    for i in 0..s {
        let px = corner[0] + (2 * i + 1) as f64 / (2.0 * s as f64) * dx;
        let px2 = px * px;
        for j in 0..s {
            let py = corner[1] + (2 * j + 1) as f64 / (2.0 * s as f64) * dx;
            let pxy = px2 + py * py;
            if pxy > r2 {
                continue;
            }
            for k in 0..s {
                let pz = corner[2] + (2 * k + 1) as f64 / (2.0 * s as f64) * dx;
                if pxy + pz * pz <= r2 {
                    inside += 1;
                }
            }
        }
    }
    inside as f64 / (s * s * s) as f64
}

/// Staircase volume of a sphere measured by subsampled cell overlap, over
/// the whole (unbounded) lattice. `center` is in physical units with cell
/// corners at integer multiples of δx.
pub fn mapped_volume(units: &Units, center: [f64; 3], r: f64, s_f: u32) -> f64 {
    let dx = units.dx;
    let mut vol = 0.0;
    let lo: Vec<i64> = (0..3)
        .map(|a| ((center[a] - r) / dx - 1.0).floor() as i64)
        .collect();
    let hi: Vec<i64> = (0..3)
        .map(|a| ((center[a] + r) / dx + 1.0).ceil() as i64)
        .collect();
    for gx in lo[0]..=hi[0] {
        for gy in lo[1]..=hi[1] {
            for gz in lo[2]..=hi[2] {
                let corner = [
                    gx as f64 * dx - center[0],
                    gy as f64 * dx - center[1],
                    gz as f64 * dx - center[2],
                ];
                vol += overlap_fraction(corner, dx, r, s_f);
            }
        }
    }
    vol * dx * dx * dx
}

/// Relative volume-mapping error e_rV = (V_sim − V_sph)/V_sph.
pub fn volume_error(units: &Units, center: [f64; 3], r: f64, s_f: u32) -> f64 {
    let v_sph = 4.0 / 3.0 * std::f64::consts::PI * r * r * r;
    (mapped_volume(units, center, r, s_f) - v_sph) / v_sph
}

/// Set the charge-density RHS (lattice-scaled, volts): per cell
/// Σ_p (Q_p/V_sph,p)·overlap_fraction(cell, p; s_f_Φ) · δx²/ε.
pub fn set_charge_rhs(
    domain: &Domain,
    units: &Units,
    problem: &PotentialProblem,
    particles: &[SphereParticle],
    rhs: &mut DomainField<1>,
) {
    rhs.fill(0.0);
    let dx = units.dx;
    let scale = dx * dx / problem.epsilon;
    for bid in 0..domain.n_blocks() {
        let origin = domain.block_origin(bid);
        let block = &mut rhs.blocks[bid];
        let gw = domain.ghost_width as i64;
        for p in particles {
            let rho = p.charge / p.volume();
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
                        // interior bbox of this image within the block
                        let mut glo = [0i64; 3];
                        let mut ghi = [0i64; 3];
                        let mut empty = false;
                        for a in 0..3 {
                            glo[a] = (((c[a] - p.radius) / dx).floor() as i64 - 1)
                                .max(origin[a]);
                            ghi[a] = (((c[a] + p.radius) / dx).ceil() as i64 + 1)
                                .min(origin[a] + domain.block_cells[a] as i64 - 1);
                            if glo[a] > ghi[a] {
                                empty = true;
                            }
                        }
                        if empty {
                            continue;
                        }
                        for gz in glo[2]..=ghi[2] {
                            for gy in glo[1]..=ghi[1] {
                                for gx in glo[0]..=ghi[0] {
                                    let corner = [
                                        gx as f64 * dx - c[0],
                                        gy as f64 * dx - c[1],
                                        gz as f64 * dx - c[2],
                                    ];
                                    let frac =
                                        overlap_fraction(corner, dx, p.radius, problem.s_f_phi);
                                    if frac > 0.0 {
                                        let idx = block.idx(
                                            (gx - origin[0] + gw) as usize,
                                            (gy - origin[1] + gw) as usize,
                                            (gz - origin[2] + gw) as usize,
                                        );
                                        let cur = block.get(0, idx);
                                        block.set(0, idx, cur + rho * frac * scale);
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
    }
}

/// D3Q19 isotropy-preserving gradient (lattice units: volts per δx).
/// Cells whose one-ring crosses a physical boundary fall back to one-sided
/// first-order differences per axis.
pub fn isotropic_gradient(
    phi: &BlockField<1>,
    domain: &Domain,
    g: [i64; 3],
    idx: usize,
) -> [f64; 3] {
    let ex = phi.ext[0] as isize;
    let ey = phi.ext[1] as isize;
    let ring_ok = (0..3).all(|a| {
        domain.periodic[a] || (g[a] > 0 && g[a] < domain.global_cells[a] as i64 - 1)
    });
    let xs = phi.comp(0);
    if ring_ok {
        let mut grad = [0.0; 3];
        for q in 1..Q {
            let off = (crate::lattice::C[q][2] as isize * ey
                + crate::lattice::C[q][1] as isize)
                * ex
                + crate::lattice::C[q][0] as isize;
            let v = xs[(idx as isize + off) as usize];
            let c = c_f64(q);
            grad[0] += W[q] * v * c[0];
            grad[1] += W[q] * v * c[1];
            grad[2] += W[q] * v * c[2];
        }
        let inv_w1 = 1.0 / W[0];
        [grad[0] * inv_w1, grad[1] * inv_w1, grad[2] * inv_w1]
    } else {
        let mut grad = [0.0; 3];
        let offs = [1isize, ex, ex * ey];
        for a in 0..3 {
            let has_minus = domain.periodic[a] || g[a] > 0;
            let has_plus = domain.periodic[a] || g[a] < domain.global_cells[a] as i64 - 1;
            let i = idx as isize;
            grad[a] = match (has_minus, has_plus) {
                (true, true) => 0.5 * (xs[(i + offs[a]) as usize] - xs[(i - offs[a]) as usize]),
                (false, true) => xs[(i + offs[a]) as usize] - xs[i as usize],
                (true, false) => xs[i as usize] - xs[(i - offs[a]) as usize],
                (false, false) => 0.0,
            };
        }
        grad
    }
}

/// Coulomb force F_e = −δx³ Σ_b ∇Φ(x_b) ρ(x_b) accumulated per particle
/// (physical units). `out` holds per-particle force partials for this
/// block; Φ ghosts must be current.
#[allow(clippy::too_many_arguments)]
pub fn coulomb_force_block(
    phi: &BlockField<1>,
    domain: &Domain,
    units: &Units,
    problem: &PotentialProblem,
    block_id: usize,
    particles: &[SphereParticle],
    out: &mut [[f64; 3]],
) {
    let dx = units.dx;
    let origin = domain.block_origin(block_id);
    let gw = domain.ghost_width as i64;
    for (pi, p) in particles.iter().enumerate() {
        if p.charge == 0.0 {
            continue;
        }
        let rho = p.charge / p.volume();
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
                    let mut glo = [0i64; 3];
                    let mut ghi = [0i64; 3];
                    let mut empty = false;
                    for a in 0..3 {
                        glo[a] = (((c[a] - p.radius) / dx).floor() as i64 - 1).max(origin[a]);
                        ghi[a] = (((c[a] + p.radius) / dx).ceil() as i64 + 1)
                            .min(origin[a] + domain.block_cells[a] as i64 - 1);
                        if glo[a] > ghi[a] {
                            empty = true;
                        }
                    }
                    if empty {
                        continue;
                    }
                    for gz in glo[2]..=ghi[2] {
                        for gy in glo[1]..=ghi[1] {
                            for gx in glo[0]..=ghi[0] {
                                let corner = [
                                    gx as f64 * dx - c[0],
                                    gy as f64 * dx - c[1],
                                    gz as f64 * dx - c[2],
                                ];
                                let frac =
                                    overlap_fraction(corner, dx, p.radius, problem.s_f_force);
                                if frac == 0.0 {
                                    continue;
                                }
                                let g = [gx, gy, gz];
                                let idx = phi.idx(
                                    (gx - origin[0] + gw) as usize,
                                    (gy - origin[1] + gw) as usize,
                                    (gz - origin[2] + gw) as usize,
                                );
                                let grad = isotropic_gradient(phi, domain, g, idx);
                                // F −= δx³ ∇Φ ρ; grad is volts/δx → /dx for V/m
                                let s = dx * dx * rho * frac;
                                out[pi][0] -= s * grad[0];
                                out[pi][1] -= s * grad[1];
                                out[pi][2] -= s * grad[2];
                            }
                        }
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn neumann0() -> PotentialBc {
        PotentialBc::Neumann(BcValue::Const(0.0))
    }

    #[test]
    fn all_periodic_has_no_overrides() {
        let d = Domain::new([8, 8, 8], [4, 4, 4], [true; 3]).unwrap();
        let prob = PotentialProblem {
            epsilon: 1.0,
            faces: [
                [PotentialBc::Periodic, PotentialBc::Periodic],
                [PotentialBc::Periodic, PotentialBc::Periodic],
                [PotentialBc::Periodic, PotentialBc::Periodic],
            ],
            s_f_phi: 1,
            s_f_force: 1,
        };
        let st = assemble_stencils(&d, &prob).unwrap();
        for sb in &st {
            assert!(sb.overrides.is_empty());
            assert_eq!(sb.interior, poisson_interior_stencil(1.0));
        }
    }

    #[test]
    fn dirichlet_folding_1d_pattern() {
        // 1D analogue [α β γ] = [−1 2 −1]: Dirichlet left → [0 3 −1]
        let d = Domain::new([8, 2, 2], [8, 2, 2], [false, true, true]).unwrap();
        let prob = PotentialProblem {
            epsilon: 1.0,
            faces: [
                [
                    PotentialBc::Dirichlet(BcValue::Const(5.0)),
                    PotentialBc::Dirichlet(BcValue::Const(0.0)),
                ],
                [PotentialBc::Periodic, PotentialBc::Periodic],
                [PotentialBc::Periodic, PotentialBc::Periodic],
            ],
            s_f_phi: 1,
            s_f_force: 1,
        };
        let st = assemble_stencils(&d, &prob).unwrap();
        let sb = &st[0];
        let first = sb.at(sb.idx(1, 1, 1));
        // center 6 − (−1) = 7, −x coefficient zeroed (3D analogue of β−α)
        assert_eq!(first[0], 7.0);
        assert_eq!(first[1], 0.0);
        assert_eq!(first[2], -1.0);
        // interior cell untouched
        let mid = sb.at(sb.idx(4, 1, 1));
        assert_eq!(mid[0], 6.0);
        assert_eq!(mid[1], -1.0);
    }

    #[test]
    fn neumann_folding_1d_pattern() {
        // Neumann left → center β+α = 6 + (−1) = 5
        let d = Domain::new([8, 2, 2], [8, 2, 2], [false, true, true]).unwrap();
        let prob = PotentialProblem {
            epsilon: 1.0,
            faces: [
                [neumann0(), neumann0()],
                [PotentialBc::Periodic, PotentialBc::Periodic],
                [PotentialBc::Periodic, PotentialBc::Periodic],
            ],
            s_f_phi: 1,
            s_f_force: 1,
        };
        let st = assemble_stencils(&d, &prob).unwrap();
        let sb = &st[0];
        let first = sb.at(sb.idx(1, 1, 1));
        assert_eq!(first[0], 5.0);
        assert_eq!(first[1], 0.0);
    }

    #[test]
    fn rhs_adaption_values() {
        // Dirichlet g_d = 5 on the left: RHS₁ += −2·(−1)·5 = 10
        let d = Domain::new([8, 2, 2], [8, 2, 2], [false, true, true]).unwrap();
        let u = Units::lattice();
        let prob = PotentialProblem {
            epsilon: 1.0,
            faces: [
                [
                    PotentialBc::Dirichlet(BcValue::Const(5.0)),
                    PotentialBc::Dirichlet(BcValue::Const(0.0)),
                ],
                [PotentialBc::Periodic, PotentialBc::Periodic],
                [PotentialBc::Periodic, PotentialBc::Periodic],
            ],
            s_f_phi: 1,
            s_f_force: 1,
        };
        let mut rhs = DomainField::<1>::new(&d);
        adapt_rhs(&d, &u, &prob, &mut rhs);
        assert_eq!(rhs.at_global(&d, 0, [0, 0, 0]), 10.0);
        assert_eq!(rhs.at_global(&d, 0, [4, 0, 0]), 0.0);
        assert_eq!(rhs.at_global(&d, 0, [7, 0, 0]), 0.0); // g_d = 0 right

        // homogeneous Neumann leaves the RHS unchanged
        let prob_n = PotentialProblem {
            epsilon: 1.0,
            faces: [
                [neumann0(), neumann0()],
                [PotentialBc::Periodic, PotentialBc::Periodic],
                [PotentialBc::Periodic, PotentialBc::Periodic],
            ],
            s_f_phi: 1,
            s_f_force: 1,
        };
        let mut rhs_n = DomainField::<1>::new(&d);
        adapt_rhs(&d, &u, &prob_n, &mut rhs_n);
        for x in 0..8 {
            assert_eq!(rhs_n.at_global(&d, 0, [x, 0, 0]), 0.0);
        }
    }

    /// Substitute the ghost extrapolation Φ₀ = 2g_d − Φ₁ into the discrete
    /// equation: the folded row must agree with the unfolded one.
    #[test]
    fn dirichlet_fold_matches_ghost_substitution() {
        let g_d = 5.0;
        let phi: [f64; 2] = [3.7, 2.1]; // Φ₁, Φ₂
        let f1 = 0.0;
        // unfolded row: −Φ₀ + 2Φ₁ − Φ₂ = f₁ with Φ₀ = 2g_d − Φ₁ (1D, [−1 2 −1])
        let lhs_unfolded = -(2.0 * g_d - phi[0]) + 2.0 * phi[0] - phi[1];
        // folded row: 3Φ₁ − Φ₂ = f₁ + 2g_d
        let lhs_folded = 3.0 * phi[0] - phi[1];
        let rhs_folded = f1 + 2.0 * g_d;
        assert!((lhs_unfolded - f1 - (lhs_folded - rhs_folded)).abs() < 1e-14);
    }

    #[test]
    fn overlap_fraction_full_and_empty() {
        // cell fully inside the sphere: fraction 1 for any s_f
        for s_f in 1..=4 {
            let f = overlap_fraction([-0.5, -0.5, -0.5], 1.0, 5.0, s_f);
            assert_eq!(f, 1.0);
            let e = overlap_fraction([10.0, 10.0, 10.0], 1.0, 2.0, s_f);
            assert_eq!(e, 0.0);
        }
    }

    #[test]
    fn no_particles_zero_rhs() {
        let d = Domain::new([8, 8, 8], [8, 8, 8], [true; 3]).unwrap();
        let u = Units::lattice();
        let prob = PotentialProblem {
            epsilon: 1.0,
            faces: [
                [PotentialBc::Periodic, PotentialBc::Periodic],
                [PotentialBc::Periodic, PotentialBc::Periodic],
                [PotentialBc::Periodic, PotentialBc::Periodic],
            ],
            s_f_phi: 2,
            s_f_force: 2,
        };
        let mut rhs = DomainField::<1>::new(&d);
        set_charge_rhs(&d, &u, &prob, &[], &mut rhs);
        assert!(rhs.blocks[0].raw().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn mapped_charge_totals_scale_with_volume_error() {
        // total mapped charge = Q · V_sim/V_sph, converging with s_f
        let u = Units::lattice();
        let center = [16.045, 16.045, 16.045];
        let r = 6.0;
        let mut prev = f64::INFINITY;
        for s_f in 1..=3 {
            let v_sim = mapped_volume(&u, center, r, s_f);
            let v_sph = 4.0 / 3.0 * std::f64::consts::PI * r * r * r;
            let err = ((v_sim - v_sph) / v_sph).abs();
            assert!(err < prev + 1e-12, "s_f={s_f}: {err} vs {prev}");
            prev = err;
        }
    }

    #[test]
    fn gradient_constant_and_linear_fields() {
        let d = Domain::new([8, 8, 8], [8, 8, 8], [true; 3]).unwrap();
        let mut f = DomainField::<1>::new(&d);
        // constant field: zero gradient
        for b in &mut f.blocks {
            b.fill(4.2);
        }
        let idx = f.blocks[0].idx(4, 4, 4);
        let grad = isotropic_gradient(&f.blocks[0], &d, [3, 3, 3], idx);
        for a in 0..3 {
            assert!(grad[a].abs() < 1e-14);
        }
        // linear field Φ = a·x: exact gradient (second-moment identity)
        let a_vec = [1.0, 2.0, 3.0];
        let b = &mut f.blocks[0];
        for z in 0..b.ext[2] {
            for y in 0..b.ext[1] {
                for x in 0..b.ext[0] {
                    let idx = b.idx(x, y, z);
                    let v = a_vec[0] * x as f64 + a_vec[1] * y as f64 + a_vec[2] * z as f64;
                    b.set(0, idx, v);
                }
            }
        }
        let idx = f.blocks[0].idx(4, 4, 4);
        let grad = isotropic_gradient(&f.blocks[0], &d, [3, 3, 3], idx);
        for a in 0..3 {
            assert!(
                (grad[a] - a_vec[a]).abs() < 1e-12,
                "axis {a}: {} vs {}",
                grad[a],
                a_vec[a]
            );
        }
    }

    /// Richardson slope oracle: for Φ = x², the gradient error must shrink
    /// at second order under grid refinement. The gradient is evaluated at
    /// a fixed physical point on grids with δx, δx/2, δx/4.
    #[test]
    fn gradient_second_order_on_quadratic() {
        let mut errs = Vec::new();
        for lvl in 0..3 {
            let n = 8usize << lvl;
            let dx = 1.0 / n as f64;
            let d = Domain::new([n, n, n], [n, n, n], [true; 3]).unwrap();
            let mut f = DomainField::<1>::new(&d);
            let b = &mut f.blocks[0];
            for z in 0..b.ext[2] {
                for y in 0..b.ext[1] {
                    for x in 0..b.ext[0] {
                        // physical x-coordinate of the cell center
                        let px = (x as f64 - 1.0 + 0.5) * dx;
                        let idx = b.idx(x, y, z);
                        // quadratic plus cross terms to exercise isotropy
                        let py = (y as f64 - 1.0 + 0.5) * dx;
                        b.set(0, idx, px * px + 0.5 * px * py);
                    }
                }
            }
            // cell containing physical point (0.25+, 0.25+): global index n/4
            let gx = n / 4;
            let idx = f.blocks[0].idx(gx + 1, gx + 1, n / 2 + 1);
            let g = isotropic_gradient(
                &f.blocks[0],
                &d,
                [gx as i64, gx as i64, (n / 2) as i64],
                idx,
            );
            let px = (gx as f64 + 0.5) * dx;
            let py = px;
            // gradient in physical units: divide by dx
            let gx_phys = g[0] / dx;
            let exact = 2.0 * px + 0.5 * py;
            errs.push((gx_phys - exact).abs());
        }
        // observed order ≥ 1.9 over successive refinements
        for w in errs.windows(2) {
            if w[0] > 1e-13 {
                let order = (w[0] / w[1]).log2();
                assert!(order > 1.9, "order {order:.2} errs {errs:?}");
            }
        }
    }

    #[test]
    fn uncharged_particle_feels_no_force() {
        let d = Domain::new([8, 8, 8], [8, 8, 8], [false; 3]).unwrap();
        let u = Units::lattice();
        let prob = PotentialProblem {
            epsilon: 1.0,
            faces: [
                [
                    PotentialBc::Dirichlet(BcValue::Const(1.0)),
                    PotentialBc::Dirichlet(BcValue::Const(0.0)),
                ],
                [neumann0(), neumann0()],
                [neumann0(), neumann0()],
            ],
            s_f_phi: 1,
            s_f_force: 1,
        };
        let phi = DomainField::<1>::new(&d);
        let p = SphereParticle::new(0, [4.0, 4.0, 4.0], 2.0, 1.0);
        let mut out = vec![[0.0; 3]];
        coulomb_force_block(&phi.blocks[0], &d, &u, &prob, 0, &[p], &mut out);
        assert_eq!(out[0], [0.0; 3]);
    }
}
