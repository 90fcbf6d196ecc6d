//! Ghost layer exchange between blocks.
//!
//! Axis-sequential two-phase exchange: all blocks pack their boundary slabs
//! into message buffers, then all blocks unpack the messages addressed to
//! them. Packing per axis extends over the ghost range of axes exchanged
//! earlier so that edge and corner ghosts are filled after the z round
//! (required by the D3Q19 diagonal pulls). Periodic axes wrap; ghosts at
//! non-periodic physical boundaries are left untouched.

use super::field::{BlockField, DomainField};
use super::Domain;
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExchangePattern {
    /// Face ghosts only; enough for 7-point stencils.
    FacesOnly,
    /// Faces plus edge/corner ghosts; needed for D3Q19 pulls.
    FullD3Q19,
}

/// Refresh all ghost layers of `field`. Idempotent: exchanging twice without
/// interior writes is a no-op.
pub fn exchange_ghosts<const NC: usize>(
    domain: &Domain,
    field: &mut DomainField<NC>,
    pattern: ExchangePattern,
) {
    for axis in 0..3 {
        exchange_axis(domain, field, axis, pattern);
    }
}

fn slab_ranges<const NC: usize>(
    b: &BlockField<NC>,
    axis: usize,
    pattern: ExchangePattern,
) -> [std::ops::Range<usize>; 3] {
    let gw = b.gw;
    let mut r = [0..0, 0..0, 0..0];
    for a in 0..3 {
        r[a] = if a == axis {
            0..0 // set by caller
        } else if pattern == ExchangePattern::FullD3Q19 && a < axis {
            0..b.ext[a] // include ghosts already exchanged
        } else {
            gw..gw + b.n[a]
        };
    }
    r
}

fn pack<const NC: usize>(
    b: &BlockField<NC>,
    axis: usize,
    layer: usize,
    pattern: ExchangePattern,
) -> Vec<f64> {
    let mut r = slab_ranges(b, axis, pattern);
    r[axis] = layer..layer + 1;
    let mut out =
        Vec::with_capacity(NC * r[0].len().max(1) * r[1].len().max(1) * r[2].len().max(1));
    for c in 0..NC {
        let comp = b.comp(c);
        for z in r[2].clone() {
            for y in r[1].clone() {
                for x in r[0].clone() {
                    out.push(comp[b.idx(x, y, z)]);
                }
            }
        }
    }
    out
}

fn unpack<const NC: usize>(
    b: &mut BlockField<NC>,
    axis: usize,
    layer: usize,
    pattern: ExchangePattern,
    msg: &[f64],
) {
    let mut r = slab_ranges(b, axis, pattern);
    r[axis] = layer..layer + 1;
    let mut it = msg.iter();
    for c in 0..NC {
        for z in r[2].clone() {
            for y in r[1].clone() {
                for x in r[0].clone() {
                    let idx = b.idx(x, y, z);
                    b.set(c, idx, *it.next().expect("ghost message size mismatch"));
                }
            }
        }
    }
}

fn exchange_axis<const NC: usize>(
    domain: &Domain,
    field: &mut DomainField<NC>,
    axis: usize,
    pattern: ExchangePattern,
) {
    let gw = domain.ghost_width;
    let n = domain.block_cells[axis];
    // phase 1: pack messages (block, side) -> slab toward that side's neighbour
    let msgs: Vec<[Option<Vec<f64>>; 2]> = field
        .blocks
        .par_iter()
        .enumerate()
        .map(|(id, b)| {
            let mut out = [None, None];
            for (side, dir) in [(0usize, -1i32), (1usize, 1i32)] {
                if domain.neighbour(id, axis, dir).is_some() {
                    // slab sent toward `dir`: the interior boundary layer on that side
                    let layer = if dir < 0 { gw } else { gw + n - 1 };
                    out[side] = Some(pack(b, axis, layer, pattern));
                }
            }
            out
        })
        .collect();
    // phase 2: unpack into own ghosts
    field
        .blocks
        .par_iter_mut()
        .enumerate()
        .for_each(|(id, b)| {
            for (side, dir) in [(0usize, -1i32), (1usize, 1i32)] {
                if let Some(nb) = domain.neighbour(id, axis, dir) {
                    // ghost layer on `side` mirrors the neighbour's opposite boundary
                    let ghost_layer = if dir < 0 { 0 } else { gw + n };
                    let msg = msgs[nb][1 - side]
                        .as_ref()
                        .expect("neighbour must have packed a message");
                    unpack(b, axis, ghost_layer, pattern, msg);
                }
            }
        });
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp_value(g: [i64; 3]) -> f64 {
        g[0] as f64 + 7.0 * g[1] as f64 + 41.0 * g[2] as f64
    }

    #[test]
    fn constant_field_fills_ghosts() {
        let d = Domain::new([8, 8, 8], [8, 8, 8], [true; 3]).unwrap();
        let mut f = DomainField::<1>::new(&d);
        for b in &mut f.blocks {
            for (_, _, _, i) in b.interior_indices().collect::<Vec<_>>() {
                b.set(0, i, 3.25);
            }
        }
        exchange_ghosts(&d, &mut f, ExchangePattern::FullD3Q19);
        let b = &f.blocks[0];
        for z in 0..b.ext[2] {
            for y in 0..b.ext[1] {
                for x in 0..b.ext[0] {
                    assert_eq!(b.get(0, b.idx(x, y, z)), 3.25);
                }
            }
        }
    }

    #[test]
    fn two_blocks_copy_interface_value() {
        let d = Domain::new([8, 4, 4], [4, 4, 4], [false; 3]).unwrap();
        let mut f = DomainField::<1>::new(&d);
        // value v at the interface layer of block 0 (global x = 3)
        for y in 0..4 {
            for z in 0..4 {
                f.set_global(&d, 0, [3, y, z], 99.0);
            }
        }
        exchange_ghosts(&d, &mut f, ExchangePattern::FullD3Q19);
        let b1 = &f.blocks[1];
        // block 1's minus-x ghost column shadows global x=3
        for z in 1..5 {
            for y in 1..5 {
                assert_eq!(b1.get(0, b1.idx(0, y, z)), 99.0);
            }
        }
    }

    /// Dense-array oracle: ghosts must equal the ramp value of the global
    /// cell they shadow, including diagonal ghosts and periodic wrap.
    #[test]
    fn ramp_against_dense_oracle() {
        let d = Domain::new([8, 8, 8], [4, 4, 4], [true, false, true]).unwrap();
        let mut f = DomainField::<2>::new(&d);
        for z in 0..8 {
            for y in 0..8 {
                for x in 0..8 {
                    let g = [x, y, z];
                    f.set_global(&d, 0, g, ramp_value(g));
                    f.set_global(&d, 1, g, -2.0 * ramp_value(g));
                }
            }
        }
        exchange_ghosts(&d, &mut f, ExchangePattern::FullD3Q19);
        for (id, b) in f.blocks.iter().enumerate() {
            let origin = d.block_origin(id);
            for z in 0..b.ext[2] {
                for y in 0..b.ext[1] {
                    for x in 0..b.ext[0] {
                        let mut g = [
                            origin[0] + x as i64 - 1,
                            origin[1] + y as i64 - 1,
                            origin[2] + z as i64 - 1,
                        ];
                        let mut outside = false;
                        for a in 0..3 {
                            let n = d.global_cells[a] as i64;
                            if g[a] < 0 || g[a] >= n {
                                if d.periodic[a] {
                                    g[a] = g[a].rem_euclid(n);
                                } else {
                                    outside = true;
                                }
                            }
                        }
                        if outside {
                            continue; // physical-boundary ghosts untouched
                        }
                        let idx = b.idx(x, y, z);
                        assert_eq!(b.get(0, idx), ramp_value(g), "ghost mismatch at {:?}", g);
                        assert_eq!(b.get(1, idx), -2.0 * ramp_value(g));
                    }
                }
            }
        }
    }

    #[test]
    fn exchange_is_idempotent() {
        let d = Domain::new([8, 8, 4], [4, 4, 4], [true, true, false]).unwrap();
        let mut f = DomainField::<3>::new(&d);
        let mut v = 0.1;
        for b in &mut f.blocks {
            let idxs: Vec<_> = b.interior_indices().map(|(_, _, _, i)| i).collect();
            for i in idxs {
                for c in 0..3 {
                    b.set(c, i, v);
                    v = (v * 1.3 + 0.7) % 10.0;
                }
            }
        }
        exchange_ghosts(&d, &mut f, ExchangePattern::FullD3Q19);
        let snapshot: Vec<Vec<f64>> = f.blocks.iter().map(|b| b.raw().to_vec()).collect();
        exchange_ghosts(&d, &mut f, ExchangePattern::FullD3Q19);
        for (b, s) in f.blocks.iter().zip(&snapshot) {
            assert_eq!(b.raw(), &s[..], "second exchange must be bitwise a no-op");
        }
    }
}
