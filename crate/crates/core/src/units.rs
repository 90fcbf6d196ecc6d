//! Unit system: physical ↔ lattice-unit conversion.
//!
//! Lattice units normalise δx, δt and the reference density to one. The
//! electric potential is carried in volts throughout (the potential solver
//! works on the lattice-scaled equation), so only mechanical quantities
//! need conversion factors.

#[derive(Debug, Clone, Copy)]
pub struct Units {
    /// lattice spacing [m]
    pub dx: f64,
    /// time increment [s]
    pub dt: f64,
    /// reference fluid density [kg/m³]
    pub rho_ref: f64,
}

impl Units {
    pub fn lattice() -> Units {
        Units {
            dx: 1.0,
            dt: 1.0,
            rho_ref: 1.0,
        }
    }

    #[inline]
    pub fn vel_to_lu(&self, v: f64) -> f64 {
        v * self.dt / self.dx
    }

    #[inline]
    pub fn vel_to_phys(&self, v: f64) -> f64 {
        v * self.dx / self.dt
    }

    #[inline]
    pub fn vel3_to_lu(&self, v: [f64; 3]) -> [f64; 3] {
        [self.vel_to_lu(v[0]), self.vel_to_lu(v[1]), self.vel_to_lu(v[2])]
    }

    /// kinematic viscosity [m²/s] → LU
    #[inline]
    pub fn nu_to_lu(&self, nu: f64) -> f64 {
        nu * self.dt / (self.dx * self.dx)
    }

    /// acceleration [m/s²] → LU
    #[inline]
    pub fn accel_to_lu(&self, a: f64) -> f64 {
        a * self.dt * self.dt / self.dx
    }

    /// force [N] ← LU force (lattice mass · δx/δt²)
    #[inline]
    pub fn force_to_phys(&self, f: f64) -> f64 {
        f * self.rho_ref * self.dx.powi(4) / (self.dt * self.dt)
    }

    #[inline]
    pub fn force_to_lu(&self, f: f64) -> f64 {
        f * self.dt * self.dt / (self.rho_ref * self.dx.powi(4))
    }

    /// dynamic viscosity [Pa·s] → LU
    #[inline]
    pub fn eta_to_lu(&self, eta: f64) -> f64 {
        eta * self.dt / (self.rho_ref * self.dx * self.dx)
    }

    /// position [m] → lattice coordinate (cell centers at i + 1/2)
    #[inline]
    pub fn pos_to_lu(&self, x: f64) -> f64 {
        x / self.dx
    }
}
