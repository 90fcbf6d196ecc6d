//! Incompressible D3Q19 two-relaxation-time lattice Boltzmann kernel.
//!
//! The fused stream-collide sweep pulls post-collision populations from the
//! neighbouring cells, relaxes even and odd moment parts with separate
//! eigenvalues and adds the Luo body-force term. Even parts use
//! f^e_q = (f_q + f_q̄)/2, odd parts f^o_q = (f_q − f_q̄)/2.
//!
//! PDF fields store population deviations d_q = f_q − w_q. The uniform rest
//! state is then exactly zero (the collision fixed point holds bitwise) and
//! mass sums accumulate small numbers instead of O(1) weights.
//!
//! The collision equilibrium is evaluated at the bare moment velocity
//! u = Σ c_q f_q / ρ0; the force-corrected velocity (half-step kick,
//! [`macroscopics`]) is the macroscopic output velocity. This keeps the
//! per-step momentum input exactly f_ext·δt independent of λ_o.

use crate::error::{Result, SimError};
use crate::grid::{BlockField, BlockFlags, CellKind};
use crate::lattice::{c_f64, dot_c, C, INV_CS2, INV_CS4, OPP, Q, W};

pub const RHO0: f64 = 1.0;

/// Magic parameter fixing bounce-back walls midway between lattice sites.
pub const LAMBDA_MID: f64 = 3.0 / 16.0;
/// Magic parameter optimal for porous media.
pub const LAMBDA_POR: f64 = 0.25;

/// Two-relaxation-time parameters. λ_e = −1/τ relaxes even moments and sets
/// the viscosity; λ_o is derived from the magic parameter
/// Λ = (1/2 + 1/λ_e)(1/2 + 1/λ_o).
#[derive(Debug, Clone, Copy)]
pub struct TrtParams {
    pub tau: f64,
    pub lambda_e: f64,
    pub lambda_o: f64,
    pub magic: f64,
}

impl TrtParams {
    pub fn new(tau: f64, magic: f64) -> Result<Self> {
        if !(tau > 0.5) {
            return Err(SimError::config(format!("tau must exceed 1/2, got {tau}")));
        }
        let omega = 1.0 / tau;
        let lambda_e = -omega;
        // solve Λ = (1/2 + 1/λe)(1/2 + 1/λo) for λo
        let denom = 4.0 * omega * magic - omega + 2.0;
        if denom.abs() < 1e-14 {
            return Err(SimError::config(format!(
                "magic parameter {magic} singular for tau {tau}"
            )));
        }
        let lambda_o = 2.0 * (omega - 2.0) / denom;
        if !(-2.0 < lambda_o && lambda_o < 0.0) {
            return Err(SimError::config(format!(
                "lambda_o = {lambda_o:.6} outside stability interval (-2, 0) for tau {tau}, Lambda {magic}"
            )));
        }
        let p = TrtParams {
            tau,
            lambda_e,
            lambda_o,
            magic,
        };
        debug_assert!((p.magic_check() - magic).abs() < 1e-14);
        Ok(p)
    }

    pub fn magic_check(&self) -> f64 {
        (0.5 + 1.0 / self.lambda_e) * (0.5 + 1.0 / self.lambda_o)
    }

    /// Lattice kinematic viscosity ν_L = (τ − 1/2) c_s² (δt_L = 1).
    pub fn nu_lattice(&self) -> f64 {
        (self.tau - 0.5) / 3.0
    }
}

/// Incompressible equilibrium split into even and odd parts (absolute form).
#[inline]
pub fn equilibrium_even_odd(rho_f: f64, u: [f64; 3]) -> ([f64; Q], [f64; Q]) {
    let u2 = u[0] * u[0] + u[1] * u[1] + u[2] * u[2];
    let mut fe = [0.0; Q];
    let mut fo = [0.0; Q];
    for q in 0..Q {
        let cu = dot_c(q, u);
        fe[q] = W[q] * (rho_f - RHO0 * 0.5 * INV_CS2 * u2 + RHO0 * 0.5 * INV_CS4 * cu * cu);
        fo[q] = W[q] * RHO0 * INV_CS2 * cu;
    }
    (fe, fo)
}

/// Full equilibrium distribution f_eq = f_eq,e + f_eq,o.
pub fn equilibrium(rho_f: f64, u: [f64; 3]) -> [f64; Q] {
    let (fe, fo) = equilibrium_even_odd(rho_f, u);
    let mut f = [0.0; Q];
    for q in 0..Q {
        f[q] = fe[q] + fo[q];
    }
    f
}

/// Equilibrium deviation d_eq = f_eq − w given the density fluctuation
/// δρ = ρ_f − ρ0. Exactly zero at rest.
#[inline]
pub fn equilibrium_dev(drho: f64, u: [f64; 3]) -> [f64; Q] {
    let u2 = u[0] * u[0] + u[1] * u[1] + u[2] * u[2];
    let mut d = [0.0; Q];
    for q in 0..Q {
        let cu = dot_c(q, u);
        d[q] = W[q]
            * (drho - RHO0 * 0.5 * INV_CS2 * u2
                + RHO0 * 0.5 * INV_CS4 * cu * cu
                + RHO0 * INV_CS2 * cu);
    }
    d
}

/// Luo forcing term F_q = w_q [ (c_q − u)/c_s² + (c_q·u)/c_s⁴ c_q ] · f_ext.
#[inline]
pub fn forcing_term(u: [f64; 3], f_ext: [f64; 3]) -> [f64; Q] {
    let mut fq = [0.0; Q];
    let ufe = u[0] * f_ext[0] + u[1] * f_ext[1] + u[2] * f_ext[2];
    for q in 0..Q {
        let c = c_f64(q);
        let cu = dot_c(q, u);
        let cf = c[0] * f_ext[0] + c[1] * f_ext[1] + c[2] * f_ext[2];
        fq[q] = W[q] * (INV_CS2 * (cf - ufe) + INV_CS4 * cu * cf);
    }
    fq
}

/// Density and force-corrected macroscopic velocity
/// u = (Σ c_q f_q + δt/2 f_ext)/ρ0, from absolute populations.
#[inline]
pub fn macroscopics(f: &[f64; Q], f_ext: [f64; 3], dt: f64) -> (f64, [f64; 3]) {
    let mut rho = 0.0;
    let mut mom = [0.0; 3];
    for q in 0..Q {
        rho += f[q];
        mom[0] += C[q][0] as f64 * f[q];
        mom[1] += C[q][1] as f64 * f[q];
        mom[2] += C[q][2] as f64 * f[q];
    }
    let u = [
        (mom[0] + 0.5 * dt * f_ext[0]) / RHO0,
        (mom[1] + 0.5 * dt * f_ext[1]) / RHO0,
        (mom[2] + 0.5 * dt * f_ext[2]) / RHO0,
    ];
    (rho, u)
}

/// Density fluctuation and momentum from population deviations.
#[inline]
pub fn dev_moments(d: &[f64; Q]) -> (f64, [f64; 3]) {
    let mut drho = 0.0;
    let mut mom = [0.0; 3];
    for q in 0..Q {
        drho += d[q];
        mom[0] += C[q][0] as f64 * d[q];
        mom[1] += C[q][1] as f64 * d[q];
        mom[2] += C[q][2] as f64 * d[q];
    }
    (drho, mom)
}

/// Density and Eq.-17 velocity from deviations (ρ = ρ0 + Σd).
#[inline]
pub fn macroscopics_dev(d: &[f64; Q], f_ext: [f64; 3], dt: f64) -> (f64, [f64; 3]) {
    let (drho, mom) = dev_moments(d);
    (
        RHO0 + drho,
        [
            (mom[0] + 0.5 * dt * f_ext[0]) / RHO0,
            (mom[1] + 0.5 * dt * f_ext[1]) / RHO0,
            (mom[2] + 0.5 * dt * f_ext[2]) / RHO0,
        ],
    )
}

/// TRT collision of one cell in deviation form, including the body-force
/// term; `gravity` is the acceleration, the force density is f_ext = ρ_f g.
/// Returns post-collision deviations and the cell density.
#[inline]
pub fn collide_cell_dev(
    d: &[f64; Q],
    p: &TrtParams,
    gravity: [f64; 3],
    dt: f64,
) -> ([f64; Q], f64) {
    let (drho, mom) = dev_moments(d);
    let rho = RHO0 + drho;
    let u = [mom[0] / RHO0, mom[1] / RHO0, mom[2] / RHO0];
    let f_ext = [rho * gravity[0], rho * gravity[1], rho * gravity[2]];
    let u2 = u[0] * u[0] + u[1] * u[1] + u[2] * u[2];
    let ufe = u[0] * f_ext[0] + u[1] * f_ext[1] + u[2] * f_ext[2];
    let mut out = [0.0; Q];
    // rest population: purely even
    {
        let deq_e = W[0] * (drho - RHO0 * 0.5 * INV_CS2 * u2);
        let force = W[0] * INV_CS2 * (-ufe);
        out[0] = d[0] + p.lambda_e * (d[0] - deq_e) + dt * force;
    }
    let mut q = 1;
    while q < Q {
        let qb = OPP[q];
        let cu = dot_c(q, u);
        let c = c_f64(q);
        let cf = c[0] * f_ext[0] + c[1] * f_ext[1] + c[2] * f_ext[2];
        let de_eq = W[q] * (drho - RHO0 * 0.5 * INV_CS2 * u2 + RHO0 * 0.5 * INV_CS4 * cu * cu);
        let do_eq = W[q] * RHO0 * INV_CS2 * cu;
        let fe = 0.5 * (d[q] + d[qb]);
        let fo = 0.5 * (d[q] - d[qb]);
        let rel_e = p.lambda_e * (fe - de_eq);
        let rel_o = p.lambda_o * (fo - do_eq);
        let force_q = W[q] * (INV_CS2 * (cf - ufe) + INV_CS4 * cu * cf);
        let force_qb = W[q] * (INV_CS2 * (-cf - ufe) + INV_CS4 * cu * cf);
        out[q] = d[q] + rel_e + rel_o + dt * force_q;
        out[qb] = d[qb] + rel_e - rel_o + dt * force_qb;
        q += 2;
    }
    (out, rho)
}

/// Fused pull stream-collide over one block (deviation form). Reads `src`
/// (own interior plus exchanged ghosts and BC-written boundary slots),
/// writes post-collision deviations for fluid cells into `scratch`;
/// non-fluid interior cells are copied through. Ghost PDFs and BC values
/// must be current for this step.
///
/// On NaN, returns the local coordinates of the first offending cell.
pub fn stream_collide_block(
    src: &BlockField<19>,
    flags: &BlockFlags,
    params: &TrtParams,
    gravity: [f64; 3],
    dt: f64,
    scratch: &mut [f64],
) -> std::result::Result<(), (usize, usize, usize)> {
    let vol = src.volume();
    debug_assert_eq!(scratch.len(), 19 * vol);
    let ex = src.ext[0];
    let ey = src.ext[1];
    let gw = src.gw;
    let mut off = [0isize; Q];
    for q in 0..Q {
        off[q] =
            (C[q][2] as isize * ey as isize + C[q][1] as isize) * ex as isize + C[q][0] as isize;
    }
    let mut pulled = [0.0; Q];
    for z in gw..gw + src.n[2] {
        for y in gw..gw + src.n[1] {
            let row = (z * ey + y) * ex;
            for x in gw..gw + src.n[0] {
                let idx = row + x;
                if flags.kind_at(idx) != CellKind::Fluid {
                    for q in 0..Q {
                        scratch[q * vol + idx] = src.get(q, idx);
                    }
                    continue;
                }
                for q in 0..Q {
                    let from = (idx as isize - off[q]) as usize;
                    pulled[q] = src.comp(q)[from];
                }
                let (out, rho) = collide_cell_dev(&pulled, params, gravity, dt);
                if rho.is_nan() {
                    return Err((x, y, z));
                }
                for q in 0..Q {
                    scratch[q * vol + idx] = out[q];
                }
            }
        }
    }
    Ok(())
}

/// Copy the interior of a fused-sweep scratch buffer back into the field.
pub fn copy_back_interior(dst: &mut BlockField<19>, scratch: &[f64]) {
    let vol = dst.volume();
    let ex = dst.ext[0];
    let ey = dst.ext[1];
    let gw = dst.gw;
    let (nx, ny, nz) = (dst.n[0], dst.n[1], dst.n[2]);
    for q in 0..Q {
        let comp = dst.comp_mut(q);
        for z in gw..gw + nz {
            for y in gw..gw + ny {
                let start = (z * ey + y) * ex + gw;
                comp[start..start + nx]
                    .copy_from_slice(&scratch[q * vol + start..q * vol + start + nx]);
            }
        }
    }
}
