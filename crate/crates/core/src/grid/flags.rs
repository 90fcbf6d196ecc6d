//! Per-cell state flags for the LBM equation.
//!
//! Each cell of the ghost-extended box carries a kind and, for wall kinds, a
//! patch id pointing into the boundary-condition table. The potential
//! equation keeps its own boundary description (folded into stencils); a
//! particle is an obstacle for the LBM but not a boundary for the potential.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum CellKind {
    /// Outside the physical domain on a non-periodic axis, no BC assigned.
    Exterior = 0,
    Fluid = 1,
    /// Covered by a moving particle (owner in the obstacle map).
    Obstacle = 2,
    NoSlip = 3,
    Velocity = 4,
    FreeSlip = 5,
    Pressure = 6,
}

impl CellKind {
    #[inline]
    pub fn from_u8(v: u8) -> CellKind {
        match v {
            1 => CellKind::Fluid,
            2 => CellKind::Obstacle,
            3 => CellKind::NoSlip,
            4 => CellKind::Velocity,
            5 => CellKind::FreeSlip,
            6 => CellKind::Pressure,
            _ => CellKind::Exterior,
        }
    }

    #[inline]
    pub fn is_wall(self) -> bool {
        matches!(
            self,
            CellKind::NoSlip | CellKind::Velocity | CellKind::FreeSlip | CellKind::Pressure
        )
    }
}

#[derive(Debug, Clone)]
pub struct BlockFlags {
    pub n: [usize; 3],
    pub ext: [usize; 3],
    pub gw: usize,
    pub kind: Vec<u8>,
    pub patch: Vec<u8>,
}

impl BlockFlags {
    pub fn new(block_cells: [usize; 3], gw: usize) -> Self {
        let ext = [
            block_cells[0] + 2 * gw,
            block_cells[1] + 2 * gw,
            block_cells[2] + 2 * gw,
        ];
        let vol = ext[0] * ext[1] * ext[2];
        BlockFlags {
            n: block_cells,
            ext,
            gw,
            kind: vec![CellKind::Exterior as u8; vol],
            patch: vec![0; vol],
        }
    }

    #[inline]
    pub fn idx(&self, x: usize, y: usize, z: usize) -> usize {
        (z * self.ext[1] + y) * self.ext[0] + x
    }

    #[inline]
    pub fn kind_at(&self, idx: usize) -> CellKind {
        CellKind::from_u8(self.kind[idx])
    }
}
