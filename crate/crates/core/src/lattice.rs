//! D3Q19 velocity set: discrete velocities, weights, opposite directions.
//!
//! Index 0 is the rest population, 1..=6 the axis directions, 7..=18 the
//! face diagonals. The lattice speed of sound satisfies c_s² = 1/3 in
//! lattice units.

pub const Q: usize = 19;

/// Discrete velocities c_q (lattice units, δt = 1).
pub const C: [[i32; 3]; Q] = [
    [0, 0, 0],
    [1, 0, 0],
    [-1, 0, 0],
    [0, 1, 0],
    [0, -1, 0],
    [0, 0, 1],
    [0, 0, -1],
    [1, 1, 0],
    [-1, -1, 0],
    [1, -1, 0],
    [-1, 1, 0],
    [1, 0, 1],
    [-1, 0, -1],
    [1, 0, -1],
    [-1, 0, 1],
    [0, 1, 1],
    [0, -1, -1],
    [0, 1, -1],
    [0, -1, 1],
];

/// Quadrature weights w_q; w_rest = 1/3, axis 1/18, diagonal 1/36.
pub const W: [f64; Q] = [
    1.0 / 3.0,
    1.0 / 18.0,
    1.0 / 18.0,
    1.0 / 18.0,
    1.0 / 18.0,
    1.0 / 18.0,
    1.0 / 18.0,
    1.0 / 36.0,
    1.0 / 36.0,
    1.0 / 36.0,
    1.0 / 36.0,
    1.0 / 36.0,
    1.0 / 36.0,
    1.0 / 36.0,
    1.0 / 36.0,
    1.0 / 36.0,
    1.0 / 36.0,
    1.0 / 36.0,
    1.0 / 36.0,
];

/// Opposite direction map: C[OPP[q]] = -C[q].
pub const OPP: [usize; Q] = [0, 2, 1, 4, 3, 6, 5, 8, 7, 10, 9, 12, 11, 14, 13, 16, 15, 18, 17];

/// Specular mirror maps per axis: MIRROR[a][q] flips component `a` of c_q.
pub const MIRROR: [[usize; Q]; 3] = [
    [0, 2, 1, 3, 4, 5, 6, 10, 9, 8, 7, 14, 13, 12, 11, 15, 16, 17, 18],
    [0, 1, 2, 4, 3, 5, 6, 9, 10, 7, 8, 11, 12, 13, 14, 18, 17, 16, 15],
    [0, 1, 2, 3, 4, 6, 5, 7, 8, 9, 10, 13, 14, 11, 12, 17, 18, 15, 16],
];

/// Squared lattice speed of sound.
pub const CS2: f64 = 1.0 / 3.0;
pub const INV_CS2: f64 = 3.0;
pub const INV_CS4: f64 = 9.0;

#[inline]
pub fn c_f64(q: usize) -> [f64; 3] {
    [C[q][0] as f64, C[q][1] as f64, C[q][2] as f64]
}

#[inline]
pub fn dot_c(q: usize, v: [f64; 3]) -> f64 {
    C[q][0] as f64 * v[0] + C[q][1] as f64 * v[1] + C[q][2] as f64 * v[2]
}
