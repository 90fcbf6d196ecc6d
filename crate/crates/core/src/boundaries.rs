//! Flag-driven boundary treatment for the LBM field.
//!
//! All boundary kinds write PDF values into wall/ghost slots so that the
//! conditions are fulfilled when the subsequent fused sweep pulls
//! (streams) them into the domain. For a wall cell x_b and a direction q
//! pointing from an interior fluid cell x_f = x_b − e_q into the wall:
//!
//! * no-slip:     d_q̄(x_b) = d̃_q(x_f)
//! * velocity:    d_q̄(x_b) = d̃_q(x_f) − 2 (w_q/c_s²) ρ_f (c_q·u_w)
//! * pressure:    d_q̄(x_b) = −d̃_q(x_f) + 2 w_q (ρ_out(1 + (c_q·ũ)²/(2c_s⁴)
//!                 − ũ·ũ/(2c_s²)) − 1)   (anti-bounce-back, ũ the cell velocity)
//! * free-slip:   specular reflection across the wall plane; at edges where
//!                the mirror source is unavailable the slot falls back to
//!                plain bounce-back.
//!
//! Values are stored in deviation form (d = f − w); the weight offsets
//! cancel for bounce-back copies because w_q̄ = w_q.

use crate::error::{Result, SimError};
use crate::grid::{BlockField, BlockFlags, CellKind, Domain, AXIS_NAMES};
use crate::lattice::{dot_c, C, INV_CS4, MIRROR, OPP, Q, W};
use crate::lbm::{macroscopics_dev, RHO0};

/// Boundary kind of one patch, values in lattice units.
#[derive(Debug, Clone, PartialEq)]
pub enum BcKind {
    NoSlip,
    /// Wall moving with the given velocity (LU).
    Velocity([f64; 3]),
    FreeSlip,
    /// Fixed outflow density (LU).
    Pressure(f64),
}

/// An axis-aligned patch on one physical boundary face.
#[derive(Debug, Clone)]
pub struct BcPatch {
    pub axis: usize,
    /// false = low face (ghost layer before cell 0), true = high face.
    pub high: bool,
    /// Global cell ranges [lo, hi) in the two tangential axes, in axis order
    /// excluding `axis`.
    pub extent: [[i64; 2]; 2],
    pub kind: BcKind,
}

impl BcPatch {
    pub fn whole_face(domain: &Domain, axis: usize, high: bool, kind: BcKind) -> BcPatch {
        let t = tangential_axes(axis);
        BcPatch {
            axis,
            high,
            extent: [
                [0, domain.global_cells[t[0]] as i64],
                [0, domain.global_cells[t[1]] as i64],
            ],
            kind,
        }
    }
}

pub fn tangential_axes(axis: usize) -> [usize; 2] {
    match axis {
        0 => [1, 2],
        1 => [0, 2],
        _ => [0, 1],
    }
}

/// Check that the non-periodic faces are each covered exactly once.
pub fn validate_patches(domain: &Domain, patches: &[BcPatch]) -> Result<()> {
    for axis in 0..3 {
        if domain.periodic[axis] {
            for p in patches {
                if p.axis == axis {
                    return Err(SimError::config(format!(
                        "patch on periodic axis {}",
                        AXIS_NAMES[axis]
                    )));
                }
            }
            continue;
        }
        let t = tangential_axes(axis);
        let face_area = (domain.global_cells[t[0]] * domain.global_cells[t[1]]) as i64;
        for high in [false, true] {
            let face: Vec<&BcPatch> = patches
                .iter()
                .filter(|p| p.axis == axis && p.high == high)
                .collect();
            let mut area = 0;
            for (i, p) in face.iter().enumerate() {
                for d in 0..2 {
                    if p.extent[d][0] < 0
                        || p.extent[d][1] > domain.global_cells[t[d]] as i64
                        || p.extent[d][0] >= p.extent[d][1]
                    {
                        return Err(SimError::config(format!(
                            "patch extent out of bounds on face {}{}",
                            AXIS_NAMES[axis],
                            if high { "+" } else { "-" }
                        )));
                    }
                }
                area += (p.extent[0][1] - p.extent[0][0]) * (p.extent[1][1] - p.extent[1][0]);
                for other in &face[..i] {
                    let overlap = (0..2).all(|d| {
                        p.extent[d][0] < other.extent[d][1] && other.extent[d][0] < p.extent[d][1]
                    });
                    if overlap {
                        return Err(SimError::config(format!(
                            "overlapping patches on face {}{}",
                            AXIS_NAMES[axis],
                            if high { "+" } else { "-" }
                        )));
                    }
                }
            }
            if area != face_area {
                return Err(SimError::config(format!(
                    "face {}{} not fully covered by BC patches ({} of {} cells)",
                    AXIS_NAMES[axis],
                    if high { "+" } else { "-" },
                    area,
                    face_area
                )));
            }
        }
    }
    Ok(())
}

/// Paint wall kinds into a block's ghost ring. Patch extents are widened by
/// the ghost width in the tangential directions so edge and corner ghosts
/// get a kind too (first patch wins there).
pub fn paint_patches(
    domain: &Domain,
    block_id: usize,
    flags: &mut BlockFlags,
    patches: &[BcPatch],
) {
    let origin = domain.block_origin(block_id);
    let bidx = domain.block_index(block_id);
    let gw = domain.ghost_width as i64;
    for (pid, p) in patches.iter().enumerate() {
        let at_boundary = if p.high {
            bidx[p.axis] == domain.blocks_per_axis[p.axis] - 1
        } else {
            bidx[p.axis] == 0
        };
        if !at_boundary {
            continue;
        }
        let t = tangential_axes(p.axis);
        // ghost layer local coordinate along the face normal
        let normal_local = if p.high {
            domain.block_cells[p.axis] + domain.ghost_width
        } else {
            0
        };
        // widened tangential extents in local coordinates
        let mut lo = [0i64; 2];
        let mut hi = [0i64; 2];
        for d in 0..2 {
            let full = [0, domain.global_cells[t[d]] as i64];
            let wid_lo = if p.extent[d][0] == full[0] {
                p.extent[d][0] - gw
            } else {
                p.extent[d][0]
            };
            let wid_hi = if p.extent[d][1] == full[1] {
                p.extent[d][1] + gw
            } else {
                p.extent[d][1]
            };
            lo[d] = (wid_lo - origin[t[d]] + gw).max(0);
            hi[d] = (wid_hi - origin[t[d]] + gw).min(flags.ext[t[d]] as i64);
        }
        if lo[0] >= hi[0] || lo[1] >= hi[1] {
            continue;
        }
        let kind = match p.kind {
            BcKind::NoSlip => CellKind::NoSlip,
            BcKind::Velocity(_) => CellKind::Velocity,
            BcKind::FreeSlip => CellKind::FreeSlip,
            BcKind::Pressure(_) => CellKind::Pressure,
        };
        for a in lo[0]..hi[0] {
            for b in lo[1]..hi[1] {
                let mut c = [0usize; 3];
                c[p.axis] = normal_local;
                c[t[0]] = a as usize;
                c[t[1]] = b as usize;
                let idx = flags.idx(c[0], c[1], c[2]);
                if flags.kind_at(idx) == CellKind::Exterior {
                    flags.kind[idx] = kind as u8;
                    flags.patch[idx] = pid as u8;
                }
            }
        }
    }
}

/// Collect ghost/interior wall cells that have at least one interior fluid
/// neighbour; the BC sweep iterates this list.
pub fn collect_wall_cells(flags: &BlockFlags) -> Vec<u32> {
    let mut out = Vec::new();
    let ex = flags.ext[0] as isize;
    let ey = flags.ext[1] as isize;
    let gw = flags.gw;
    for z in 0..flags.ext[2] {
        for y in 0..flags.ext[1] {
            for x in 0..flags.ext[0] {
                let idx = flags.idx(x, y, z);
                if !flags.kind_at(idx).is_wall() {
                    continue;
                }
                let mut near_fluid = false;
                for q in 1..Q {
                    let fx = x as isize - C[q][0] as isize;
                    let fy = y as isize - C[q][1] as isize;
                    let fz = z as isize - C[q][2] as isize;
                    if fx < gw as isize
                        || fy < gw as isize
                        || fz < gw as isize
                        || fx >= gw as isize + flags.n[0] as isize
                        || fy >= gw as isize + flags.n[1] as isize
                        || fz >= gw as isize + flags.n[2] as isize
                    {
                        continue;
                    }
                    let fidx = ((fz * ey) + fy) * ex + fx;
                    if flags.kind_at(fidx as usize) == CellKind::Fluid {
                        near_fluid = true;
                        break;
                    }
                }
                if near_fluid {
                    out.push(idx as u32);
                }
            }
        }
    }
    out
}

/// Write one moving-wall (or resting-wall) slot:
/// d_q̄(b) = d_q(f) − 2 (w_q/c_s²) ρ_f (c_q·u_wall).
#[inline]
pub fn write_wall_slot(
    raw: &mut [f64],
    vol: usize,
    q: usize,
    from_idx: usize,
    to_idx: usize,
    rho_f: f64,
    u_wall: [f64; 3],
) {
    let v = raw[q * vol + from_idx]
        - 2.0 * W[q] * crate::lattice::INV_CS2 * rho_f * dot_c(q, u_wall);
    raw[OPP[q] * vol + to_idx] = v;
}

/// Apply all static (configured-patch) boundary writes on one block.
/// `wall_cells` comes from [`collect_wall_cells`]. Particle-surface BCs are
/// applied separately by the particles module with the same slot formula.
#[allow(clippy::too_many_arguments)]
pub fn apply_static_bcs_block(
    pdf: &mut BlockField<19>,
    flags: &BlockFlags,
    wall_cells: &[u32],
    patches: &[BcPatch],
    gravity: [f64; 3],
    dt: f64,
) {
    let vol = pdf.volume();
    let ex = pdf.ext[0] as isize;
    let ey = pdf.ext[1] as isize;
    let ez = pdf.ext[2] as isize;
    let gw = pdf.gw as isize;
    let n = [pdf.n[0] as isize, pdf.n[1] as isize, pdf.n[2] as isize];
    let raw = pdf.raw_mut();
    let interior = |x: isize, y: isize, z: isize| -> bool {
        x >= gw && y >= gw && z >= gw && x < gw + n[0] && y < gw + n[1] && z < gw + n[2]
    };
    let inside_ext = |x: isize, y: isize, z: isize| -> bool {
        x >= 0 && y >= 0 && z >= 0 && x < ex && y < ey && z < ez
    };
    for &bidx in wall_cells {
        let b = bidx as isize;
        let bx = b % ex;
        let by = (b / ex) % ey;
        let bz = b / (ex * ey);
        let patch = &patches[flags.patch[bidx as usize] as usize];
        match &patch.kind {
            BcKind::NoSlip => {
                for q in 1..Q {
                    let fx = bx - C[q][0] as isize;
                    let fy = by - C[q][1] as isize;
                    let fz = bz - C[q][2] as isize;
                    if !interior(fx, fy, fz) {
                        continue;
                    }
                    let fidx = (((fz * ey) + fy) * ex + fx) as usize;
                    if flags.kind_at(fidx) != CellKind::Fluid {
                        continue;
                    }
                    raw[OPP[q] * vol + bidx as usize] = raw[q * vol + fidx];
                }
            }
            BcKind::Velocity(u_w) => {
                for q in 1..Q {
                    let fx = bx - C[q][0] as isize;
                    let fy = by - C[q][1] as isize;
                    let fz = bz - C[q][2] as isize;
                    if !interior(fx, fy, fz) {
                        continue;
                    }
                    let fidx = (((fz * ey) + fy) * ex + fx) as usize;
                    if flags.kind_at(fidx) != CellKind::Fluid {
                        continue;
                    }
                    let mut rho = RHO0;
                    for p in 0..Q {
                        rho += raw[p * vol + fidx];
                    }
                    write_wall_slot(raw, vol, q, fidx, bidx as usize, rho, *u_w);
                }
            }
            BcKind::Pressure(rho_out) => {
                for q in 1..Q {
                    let fx = bx - C[q][0] as isize;
                    let fy = by - C[q][1] as isize;
                    let fz = bz - C[q][2] as isize;
                    if !interior(fx, fy, fz) {
                        continue;
                    }
                    let fidx = (((fz * ey) + fy) * ex + fx) as usize;
                    if flags.kind_at(fidx) != CellKind::Fluid {
                        continue;
                    }
                    let mut d = [0.0; Q];
                    for p in 0..Q {
                        d[p] = raw[p * vol + fidx];
                    }
                    let mut rho = RHO0;
                    for v in d.iter() {
                        rho += v;
                    }
                    let f_ext = [rho * gravity[0], rho * gravity[1], rho * gravity[2]];
                    let (_, u) = macroscopics_dev(&d, f_ext, dt);
                    let u2 = u[0] * u[0] + u[1] * u[1] + u[2] * u[2];
                    let cu = dot_c(q, u);
                    let x = 1.0 + 0.5 * INV_CS4 * cu * cu - 1.5 * u2;
                    raw[OPP[q] * vol + bidx as usize] =
                        -d[q] + 2.0 * W[q] * (rho_out * x - 1.0);
                }
            }
            BcKind::FreeSlip => {
                let axis = patch.axis;
                // inward normal: from the ghost layer into the fluid
                let nv = if patch.high { -1isize } else { 1isize };
                let mut src = [bx, by, bz];
                src[axis] += nv;
                let src_ok = inside_ext(src[0], src[1], src[2])
                    && flags.kind_at((((src[2] * ey) + src[1]) * ex + src[0]) as usize)
                        == CellKind::Fluid;
                let sidx = (((src[2] * ey) + src[1]) * ex + src[0]) as usize;
                for qp in 1..Q {
                    // slots pointing from the wall into the fluid
                    if (C[qp][axis] as isize) * nv <= 0 {
                        continue;
                    }
                    if src_ok {
                        raw[qp * vol + bidx as usize] = raw[MIRROR[axis][qp] * vol + sidx];
                    } else {
                        // wall-wall edge: plain bounce-back fallback
                        let fx = bx + C[qp][0] as isize;
                        let fy = by + C[qp][1] as isize;
                        let fz = bz + C[qp][2] as isize;
                        if interior(fx, fy, fz) {
                            let fidx = (((fz * ey) + fy) * ex + fx) as usize;
                            if flags.kind_at(fidx) == CellKind::Fluid {
                                raw[qp * vol + bidx as usize] = raw[OPP[qp] * vol + fidx];
                            }
                        }
                    }
                }
            }
        }
    }
}

