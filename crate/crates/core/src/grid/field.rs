//! Cell-centered block fields with ghost layers.
//!
//! Storage is component-major (all values of component 0, then component 1,
//! ...), x fastest within a component. `NC` is the number of per-cell
//! values: 1 for scalars, 3 for vectors, 19 for PDF fields.

use super::Domain;

#[derive(Debug, Clone)]
pub struct BlockField<const NC: usize> {
    /// interior cells per axis
    pub n: [usize; 3],
    /// extended (ghost-inclusive) cells per axis
    pub ext: [usize; 3],
    pub gw: usize,
    data: Vec<f64>,
}

impl<const NC: usize> BlockField<NC> {
    pub fn new(block_cells: [usize; 3], gw: usize) -> Self {
        let ext = [
            block_cells[0] + 2 * gw,
            block_cells[1] + 2 * gw,
            block_cells[2] + 2 * gw,
        ];
        BlockField {
            n: block_cells,
            ext,
            gw,
            data: vec![0.0; NC * ext[0] * ext[1] * ext[2]],
        }
    }

    #[inline]
    pub fn volume(&self) -> usize {
        self.ext[0] * self.ext[1] * self.ext[2]
    }

    /// Linear index from extended-local coordinates (ghosts at 0 and n+gw).
    #[inline]
    pub fn idx(&self, x: usize, y: usize, z: usize) -> usize {
        (z * self.ext[1] + y) * self.ext[0] + x
    }

    #[inline]
    pub fn comp(&self, c: usize) -> &[f64] {
        let v = self.volume();
        &self.data[c * v..(c + 1) * v]
    }

    #[inline]
    pub fn comp_mut(&mut self, c: usize) -> &mut [f64] {
        let v = self.volume();
        &mut self.data[c * v..(c + 1) * v]
    }

    #[inline]
    pub fn get(&self, c: usize, idx: usize) -> f64 {
        self.data[c * self.volume() + idx]
    }

    #[inline]
    pub fn set(&mut self, c: usize, idx: usize, v: f64) {
        let vol = self.volume();
        self.data[c * vol + idx] = v;
    }

    pub fn raw(&self) -> &[f64] {
        &self.data
    }

    pub fn raw_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn fill(&mut self, v: f64) {
        self.data.fill(v);
    }

    /// Iterate interior cells as (x, y, z, idx) in x-fastest order.
    pub fn interior_indices(&self) -> impl Iterator<Item = (usize, usize, usize, usize)> + '_ {
        let gw = self.gw;
        let n = self.n;
        let ex = self.ext[0];
        let ey = self.ext[1];
        (gw..gw + n[2]).flat_map(move |z| {
            (gw..gw + n[1]).flat_map(move |y| {
                (gw..gw + n[0]).map(move |x| (x, y, z, (z * ey + y) * ex + x))
            })
        })
    }
}

/// One field instance per block of a domain.
#[derive(Debug, Clone)]
pub struct DomainField<const NC: usize> {
    pub blocks: Vec<BlockField<NC>>,
}

impl<const NC: usize> DomainField<NC> {
    pub fn new(domain: &Domain) -> Self {
        let blocks = (0..domain.n_blocks())
            .map(|_| BlockField::new(domain.block_cells, domain.ghost_width))
            .collect();
        DomainField { blocks }
    }

    pub fn fill(&mut self, v: f64) {
        for b in &mut self.blocks {
            b.fill(v);
        }
    }

    /// Read a value by global cell coordinate (interior cells only).
    pub fn at_global(&self, domain: &Domain, c: usize, g: [i64; 3]) -> f64 {
        let (bid, local) = locate(domain, g);
        self.blocks[bid].get(c, local)
    }

    /// Write a value by global cell coordinate (interior cells only).
    pub fn set_global(&mut self, domain: &Domain, c: usize, g: [i64; 3], v: f64) {
        let (bid, local) = locate(domain, g);
        self.blocks[bid].set(c, local, v);
    }
}

/// Map a global interior cell coordinate to (block id, local linear index).
pub fn locate(domain: &Domain, g: [i64; 3]) -> (usize, usize) {
    let mut bidx = [0usize; 3];
    let mut loc = [0usize; 3];
    for a in 0..3 {
        debug_assert!(g[a] >= 0 && (g[a] as usize) < domain.global_cells[a]);
        bidx[a] = g[a] as usize / domain.block_cells[a];
        loc[a] = g[a] as usize % domain.block_cells[a] + domain.ghost_width;
    }
    let bid = domain.block_id(bidx);
    let ext = [
        domain.block_cells[0] + 2 * domain.ghost_width,
        domain.block_cells[1] + 2 * domain.ghost_width,
    ];
    let idx = (loc[2] * ext[1] + loc[1]) * ext[0] + loc[0];
    (bid, idx)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn global_roundtrip() {
        let d = Domain::new([8, 8, 8], [4, 4, 4], [true; 3]).unwrap();
        let mut f = DomainField::<1>::new(&d);
        for z in 0..8 {
            for y in 0..8 {
                for x in 0..8 {
                    f.set_global(&d, 0, [x, y, z], (x + 10 * y + 100 * z) as f64);
                }
            }
        }
        for z in 0..8 {
            for y in 0..8 {
                for x in 0..8 {
                    assert_eq!(f.at_global(&d, 0, [x, y, z]), (x + 10 * y + 100 * z) as f64);
                }
            }
        }
    }
}
