//! Block-structured uniform Cartesian lattice with ghost layers.
//!
//! The domain is split into equally sized blocks; blocks are the unit of
//! parallelism. Every field stores one ghost layer which is refreshed by
//! [`exchange::exchange_ghosts`] between sweeps. Global reductions sum
//! per-block partials in ascending block id so results do not depend on
//! the worker count.

mod exchange;
mod field;
mod flags;

pub use exchange::{exchange_ghosts, ExchangePattern};
pub use field::{locate, BlockField, DomainField};
pub use flags::{BlockFlags, CellKind};

use crate::error::{Result, SimError};

pub const AXIS_NAMES: [&str; 3] = ["x", "y", "z"];

/// Global lattice layout: cells, block decomposition, periodicity.
#[derive(Debug, Clone)]
pub struct Domain {
    pub global_cells: [usize; 3],
    pub block_cells: [usize; 3],
    pub blocks_per_axis: [usize; 3],
    pub periodic: [bool; 3],
    pub ghost_width: usize,
}

impl Domain {
    pub fn new(
        global_cells: [usize; 3],
        block_cells: [usize; 3],
        periodic: [bool; 3],
    ) -> Result<Self> {
        let mut blocks_per_axis = [0usize; 3];
        for a in 0..3 {
            if global_cells[a] == 0 || block_cells[a] == 0 {
                return Err(SimError::config(format!(
                    "domain axis {} has zero cells",
                    AXIS_NAMES[a]
                )));
            }
            if global_cells[a] % block_cells[a] != 0 {
                return Err(SimError::config(format!(
                    "axis {}: {} global cells not divisible by block size {}",
                    AXIS_NAMES[a], global_cells[a], block_cells[a]
                )));
            }
            blocks_per_axis[a] = global_cells[a] / block_cells[a];
        }
        Ok(Domain {
            global_cells,
            block_cells,
            blocks_per_axis,
            periodic,
            ghost_width: 1,
        })
    }

    pub fn n_blocks(&self) -> usize {
        self.blocks_per_axis.iter().product()
    }

    pub fn n_cells(&self) -> usize {
        self.global_cells.iter().product()
    }

    /// Linear block id, x fastest.
    pub fn block_id(&self, idx: [usize; 3]) -> usize {
        (idx[2] * self.blocks_per_axis[1] + idx[1]) * self.blocks_per_axis[0] + idx[0]
    }

    pub fn block_index(&self, id: usize) -> [usize; 3] {
        let bx = self.blocks_per_axis[0];
        let by = self.blocks_per_axis[1];
        [id % bx, (id / bx) % by, id / (bx * by)]
    }

    /// Global coordinate of interior cell (0,0,0) of a block.
    pub fn block_origin(&self, id: usize) -> [i64; 3] {
        let idx = self.block_index(id);
        [
            (idx[0] * self.block_cells[0]) as i64,
            (idx[1] * self.block_cells[1]) as i64,
            (idx[2] * self.block_cells[2]) as i64,
        ]
    }

    /// Neighbour block id along `axis` on the given side (+1/-1), honouring
    /// periodic wrap. `None` at non-periodic physical boundaries.
    pub fn neighbour(&self, id: usize, axis: usize, dir: i32) -> Option<usize> {
        let mut idx = self.block_index(id);
        let n = self.blocks_per_axis[axis] as i64;
        let mut v = idx[axis] as i64 + dir as i64;
        if v < 0 || v >= n {
            if self.periodic[axis] {
                v = v.rem_euclid(n);
            } else {
                return None;
            }
        }
        idx[axis] = v as usize;
        Some(self.block_id(idx))
    }

    /// Coarsened domain for multigrid: every block halves its cells per axis.
    /// `None` once any block extent is odd or would drop below 2.
    pub fn coarsen(&self) -> Option<Domain> {
        let mut bc = [0usize; 3];
        for a in 0..3 {
            if self.block_cells[a] % 2 != 0 || self.block_cells[a] < 4 {
                // coarsest level keeps >= 2 cells per axis per block
                if self.block_cells[a] == 2 {
                    return None;
                }
                return None;
            }
            bc[a] = self.block_cells[a] / 2;
        }
        let gc = [
            bc[0] * self.blocks_per_axis[0],
            bc[1] * self.blocks_per_axis[1],
            bc[2] * self.blocks_per_axis[2],
        ];
        Some(Domain {
            global_cells: gc,
            block_cells: bc,
            blocks_per_axis: self.blocks_per_axis,
            periodic: self.periodic,
            ghost_width: self.ghost_width,
        })
    }
}

/// Deterministic block-to-worker assignment.
#[derive(Debug, Clone)]
pub struct BlockAssignment {
    pub workers: usize,
    pub worker_grid: [usize; 3],
    /// worker id per block id
    pub owner: Vec<usize>,
}

/// Distribute blocks over `workers` workers arranged as a 3D worker grid.
///
/// Every block goes to exactly one worker; the assignment is deterministic
/// for fixed inputs. Fails when no worker grid divides the block grid.
pub fn decompose(domain: &Domain, workers: usize) -> Result<BlockAssignment> {
    if workers == 0 {
        return Err(SimError::config("worker count must be positive"));
    }
    let nb = domain.n_blocks();
    if nb % workers != 0 {
        return Err(SimError::config(format!(
            "{} workers do not divide {} blocks",
            workers, nb
        )));
    }
    let b = domain.blocks_per_axis;
    // enumerate factor triples wx*wy*wz = workers with w[a] | blocks[a]
    let mut best: Option<([usize; 3], f64)> = None;
    for wx in 1..=workers {
        if workers % wx != 0 || b[0] % wx != 0 {
            continue;
        }
        let rest = workers / wx;
        for wy in 1..=rest {
            if rest % wy != 0 || b[1] % wy != 0 {
                continue;
            }
            let wz = rest / wy;
            if b[2] % wz != 0 {
                continue;
            }
            // prefer per-worker block groups close to cubic (in cells)
            let g = [
                (b[0] / wx * domain.block_cells[0]) as f64,
                (b[1] / wy * domain.block_cells[1]) as f64,
                (b[2] / wz * domain.block_cells[2]) as f64,
            ];
            let mean = (g[0] * g[1] * g[2]).cbrt();
            let score = g.iter().map(|v| (v / mean - 1.0).powi(2)).sum::<f64>();
            if best.map_or(true, |(_, s)| score < s - 1e-12) {
                best = Some(([wx, wy, wz], score));
            }
        }
    }
    let (worker_grid, _) = best.ok_or_else(|| {
        let axis = (0..3)
            .find(|&a| (1..=workers).all(|w| workers % w != 0 || b[a] % w != 0))
            .unwrap_or(0);
        SimError::config(format!(
            "no 3D worker grid for {} workers over {:?} blocks (axis {} indivisible)",
            workers, b, AXIS_NAMES[axis]
        ))
    })?;
    let per = [
        b[0] / worker_grid[0],
        b[1] / worker_grid[1],
        b[2] / worker_grid[2],
    ];
    let mut owner = vec![0usize; nb];
    for (id, slot) in owner.iter_mut().enumerate() {
        let idx = domain.block_index(id);
        let w = [idx[0] / per[0], idx[1] / per[1], idx[2] / per[2]];
        *slot = (w[2] * worker_grid[1] + w[1]) * worker_grid[0] + w[0];
    }
    Ok(BlockAssignment {
        workers,
        worker_grid,
        owner,
    })
}

/// Sum per-block partials in ascending block id (decomposition-stable).
pub fn block_ordered_sum(parts: &[f64]) -> f64 {
    parts.iter().sum()
}

/// Sum per-block 3-vector partials in ascending block id.
pub fn block_ordered_sum3(parts: &[[f64; 3]]) -> [f64; 3] {
    let mut acc = [0.0; 3];
    for p in parts {
        acc[0] += p[0];
        acc[1] += p[1];
        acc[2] += p[2];
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decompose_one_block_per_worker() {
        let d = Domain::new([64, 64, 64], [32, 32, 32], [true; 3]).unwrap();
        let a = decompose(&d, 8).unwrap();
        assert_eq!(a.worker_grid, [2, 2, 2]);
        let mut counts = vec![0usize; 8];
        for &w in &a.owner {
            counts[w] += 1;
        }
        assert!(counts.iter().all(|&c| c == 1));
        // deterministic
        let b = decompose(&d, 8).unwrap();
        assert_eq!(a.owner, b.owner);
    }

    #[test]
    fn decompose_single_block_serial() {
        let d = Domain::new([64, 64, 64], [64, 64, 64], [true; 3]).unwrap();
        let a = decompose(&d, 1).unwrap();
        assert_eq!(a.worker_grid, [1, 1, 1]);
        assert_eq!(a.owner, vec![0]);
    }

    #[test]
    fn decompose_paper_full_node_layout() {
        // 256x512x256 cells in 128^3 blocks = 2x4x2 blocks over 16 workers
        let d = Domain::new([256, 512, 256], [128, 128, 128], [false; 3]).unwrap();
        let a = decompose(&d, 16).unwrap();
        assert_eq!(a.worker_grid, [2, 4, 2]);
        let mut counts = vec![0usize; 16];
        for &w in &a.owner {
            counts[w] += 1;
        }
        assert!(counts.iter().all(|&c| c == 1));
    }

    #[test]
    fn decompose_rejects_indivisible() {
        let d = Domain::new([64, 64, 64], [32, 32, 32], [true; 3]).unwrap();
        assert!(decompose(&d, 3).is_err());
        assert!(Domain::new([60, 64, 64], [32, 32, 32], [true; 3]).is_err());
    }

    #[test]
    fn coarsen_until_two() {
        let d = Domain::new([64, 64, 64], [16, 16, 16], [true; 3]).unwrap();
        let c1 = d.coarsen().unwrap();
        assert_eq!(c1.block_cells, [8, 8, 8]);
        let c2 = c1.coarsen().unwrap();
        let c3 = c2.coarsen().unwrap();
        assert_eq!(c3.block_cells, [2, 2, 2]);
        assert!(c3.coarsen().is_none());
    }
}
