//! The coupled time loop: one step runs, in order, the potential solve
//! (charge RHS → multigrid until tolerance), the LBM substep (obstacle
//! mapping/reconstruction → ghost exchange → boundary writes → fused
//! stream-collide), then force coupling (momentum exchange → lubrication →
//! Coulomb) and the particle update.
//!
//! Blocks execute sweeps in parallel on a dedicated thread pool; every
//! global reduction sums per-block partials in ascending block id, so the
//! result is identical for any worker count.

use std::time::Instant;

use rayon::prelude::*;

use crate::boundaries::{
    apply_static_bcs_block, collect_wall_cells, paint_patches, validate_patches, BcKind, BcPatch,
};
use crate::electrostatics::{
    adapt_rhs, assemble_stencils, coulomb_force_block, set_charge_rhs, PotentialProblem,
};
use crate::error::{Result, SimError};
use crate::grid::{
    block_ordered_sum, block_ordered_sum3, decompose, exchange_ghosts, BlockAssignment,
    BlockFlags, CellKind, Domain, DomainField, ExchangePattern,
};
use crate::lbm::{
    copy_back_interior, macroscopics_dev, stream_collide_block, TrtParams, RHO0,
};
use crate::lubrication::{lubrication_sweep, LubricationConfig};
use crate::multigrid::{MgConfig, MgHierarchy};
use crate::particles::{
    apply_obstacle_bcs_block, hydrodynamic_force_block, integrate_bodies, map_particles_block,
    reconstruct_pdfs_block, resolve_contacts, wrap_positions, BlockObstacleMap, PlaneWall,
    SphereParticle,
};
use crate::units::Units;

pub const SWEEP_NAMES: [&str; 10] = [
    "set_rhs",
    "mg_solve",
    "phi_comm",
    "map",
    "reconstruct",
    "pdf_comm",
    "bc",
    "lbm",
    "hydro_force",
    "lubrication",
];

/// Everything needed to assemble an [`Engine`].
pub struct EngineSetup {
    pub domain: Domain,
    pub units: Units,
    pub trt: TrtParams,
    /// fluid body acceleration [LU]
    pub gravity_lu: [f64; 3],
    pub patches: Vec<BcPatch>,
    /// static solid boxes [[xmin,xmax],[ymin,ymax],[zmin,zmax]] in meters
    pub solid_boxes: Vec<[[f64; 2]; 3]>,
    pub particles: Vec<SphereParticle>,
    /// particle body acceleration [m/s²] (gravity off by default)
    pub particle_gravity: [f64; 3],
    pub potential: Option<PotentialProblem>,
    pub mg: MgConfig,
    pub lubrication: LubricationConfig,
    /// dynamic viscosity η = ρ_ref ν [Pa·s] for the lubrication correction
    pub eta: f64,
    /// planar walls for contacts and sphere–wall lubrication
    pub walls: Vec<PlaneWall>,
    pub restitution: f64,
    pub workers: usize,
}

pub struct PotentialState {
    pub problem: PotentialProblem,
    pub hierarchy: MgHierarchy,
    pub config: MgConfig,
    pub last_cycles: u32,
    pub last_residual: f64,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SweepTimer {
    pub seconds: f64,
    pub invocations: u64,
}

pub struct Engine {
    pub domain: Domain,
    pub units: Units,
    pub trt: TrtParams,
    pub gravity_lu: [f64; 3],
    pub particle_gravity: [f64; 3],
    pub pdf: DomainField<19>,
    pub flags: Vec<BlockFlags>,
    pub patches: Vec<BcPatch>,
    wall_cells: Vec<Vec<u32>>,
    pub obstacles: Vec<BlockObstacleMap>,
    pub particles: Vec<SphereParticle>,
    /// hydrodynamic + lubrication + electrostatic force on each particle at
    /// the end of the last step (before the accumulators were consumed)
    pub last_forces: Vec<[f64; 3]>,
    pub last_torques: Vec<[f64; 3]>,
    pub potential: Option<PotentialState>,
    pub lubrication: LubricationConfig,
    pub eta: f64,
    pub walls: Vec<PlaneWall>,
    pub restitution: f64,
    pub assignment: BlockAssignment,
    pool: rayon::ThreadPool,
    pub step: u64,
    pub timers: std::collections::BTreeMap<&'static str, SweepTimer>,
    /// per-step sweep sequence of the last step (instrumentation)
    pub sweep_log: Vec<&'static str>,
}

impl Engine {
    pub fn new(setup: EngineSetup) -> Result<Engine> {
        validate_patches(&setup.domain, &setup.patches)?;
        let assignment = decompose(&setup.domain, setup.workers)?;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(setup.workers)
            .build()
            .map_err(|e| SimError::config(format!("thread pool: {e}")))?;

        let domain = setup.domain;
        let nb = domain.n_blocks();
        let mut flags: Vec<BlockFlags> = (0..nb)
            .map(|_| BlockFlags::new(domain.block_cells, domain.ghost_width))
            .collect();
        // interior and exchanged ghosts are fluid; physical boundary ghosts
        // get painted by the patches
        for (bid, f) in flags.iter_mut().enumerate() {
            let origin = domain.block_origin(bid);
            let gw = domain.ghost_width as i64;
            for z in 0..f.ext[2] {
                for y in 0..f.ext[1] {
                    for x in 0..f.ext[0] {
                        let g = [
                            origin[0] + x as i64 - gw,
                            origin[1] + y as i64 - gw,
                            origin[2] + z as i64 - gw,
                        ];
                        let outside = (0..3).any(|a| {
                            !domain.periodic[a]
                                && (g[a] < 0 || g[a] >= domain.global_cells[a] as i64)
                        });
                        if !outside {
                            let idx = f.idx(x, y, z);
                            f.kind[idx] = CellKind::Fluid as u8;
                        }
                    }
                }
            }
            paint_patches(&domain, bid, f, &setup.patches);
        }
        // static solid boxes: interior no-slip cells tied to a synthetic patch
        let mut patches = setup.patches;
        if !setup.solid_boxes.is_empty() {
            patches.push(BcPatch {
                axis: 0,
                high: false,
                extent: [[0, 0], [0, 0]],
                kind: BcKind::NoSlip,
            });
            let pid = (patches.len() - 1) as u8;
            for (bid, f) in flags.iter_mut().enumerate() {
                let origin = domain.block_origin(bid);
                let gw = domain.ghost_width as i64;
                for z in 0..f.ext[2] {
                    for y in 0..f.ext[1] {
                        for x in 0..f.ext[0] {
                            let idx = f.idx(x, y, z);
                            if f.kind_at(idx) != CellKind::Fluid {
                                continue;
                            }
                            let c = [
                                ((origin[0] + x as i64 - gw) as f64 + 0.5) * setup.units.dx,
                                ((origin[1] + y as i64 - gw) as f64 + 0.5) * setup.units.dx,
                                ((origin[2] + z as i64 - gw) as f64 + 0.5) * setup.units.dx,
                            ];
                            let solid = setup.solid_boxes.iter().any(|b| {
                                (0..3).all(|a| c[a] >= b[a][0] && c[a] <= b[a][1])
                            });
                            if solid {
                                f.kind[idx] = CellKind::NoSlip as u8;
                                f.patch[idx] = pid;
                            }
                        }
                    }
                }
            }
        }
        let wall_cells: Vec<Vec<u32>> = flags.iter().map(collect_wall_cells).collect();

        let potential = match setup.potential {
            Some(problem) => {
                problem.validate(&domain)?;
                let stencils = assemble_stencils(&domain, &problem)?;
                let singular = problem.is_singular();
                let hierarchy =
                    MgHierarchy::build(&domain, stencils, singular, setup.mg.max_levels)?;
                Some(PotentialState {
                    problem,
                    hierarchy,
                    config: setup.mg,
                    last_cycles: 0,
                    last_residual: 0.0,
                })
            }
            None => None,
        };

        let n_particles = setup.particles.len();
        let mut engine = Engine {
            pdf: DomainField::new(&domain),
            obstacles: (0..nb)
                .map(|_| BlockObstacleMap::new(domain.block_cells, domain.ghost_width))
                .collect(),
            flags,
            patches,
            wall_cells,
            particles: setup.particles,
            last_forces: vec![[0.0; 3]; n_particles],
            last_torques: vec![[0.0; 3]; n_particles],
            potential,
            lubrication: setup.lubrication,
            eta: setup.eta,
            walls: setup.walls,
            restitution: setup.restitution,
            assignment,
            pool,
            domain,
            units: setup.units,
            trt: setup.trt,
            gravity_lu: setup.gravity_lu,
            particle_gravity: setup.particle_gravity,
            step: 0,
            timers: Default::default(),
            sweep_log: Vec::new(),
        };
        // initial mapping so flags and obstacle maps are current before step 0
        engine.map_and_reconstruct();
        Ok(engine)
    }

    fn time<R>(&mut self, name: &'static str, f: impl FnOnce(&mut Self) -> R) -> R {
        let t0 = Instant::now();
        let r = f(self);
        let dt = t0.elapsed().as_secs_f64();
        let e = self.timers.entry(name).or_default();
        e.seconds += dt;
        e.invocations += 1;
        self.sweep_log.push(name);
        r
    }

    /// Solve the potential system for the current particle positions.
    pub fn solve_potential(&mut self) -> Result<()> {
        if self.potential.is_none() {
            return Ok(());
        }
        self.time("set_rhs", |e| {
            let st = e.potential.as_mut().unwrap();
            set_charge_rhs(
                &e.domain,
                &e.units,
                &st.problem,
                &e.particles,
                &mut st.hierarchy.levels[0].rhs,
            );
            adapt_rhs(
                &e.domain,
                &e.units,
                &st.problem,
                &mut st.hierarchy.levels[0].rhs,
            );
        });
        let res = self.time("mg_solve", |e| {
            let st = e.potential.as_mut().unwrap();
            let pool = &e.pool;
            pool.install(|| st.hierarchy.solve(&st.config))
        })?;
        let st = self.potential.as_mut().unwrap();
        st.last_cycles = res.0;
        st.last_residual = res.1;
        self.time("phi_comm", |e| {
            let st = e.potential.as_mut().unwrap();
            let domain = st.hierarchy.levels[0].domain.clone();
            e.pool.install(|| {
                exchange_ghosts(
                    &domain,
                    &mut st.hierarchy.levels[0].phi,
                    ExchangePattern::FullD3Q19,
                )
            });
        });
        Ok(())
    }

    /// Refresh obstacle maps and flags; reconstruct PDFs of uncovered cells.
    pub fn map_and_reconstruct(&mut self) {
        self.time("map", |e| {
            let domain = &e.domain;
            let units = &e.units;
            let particles = &e.particles;
            e.pool.install(|| {
                e.obstacles
                    .par_iter_mut()
                    .zip(e.flags.par_iter_mut())
                    .enumerate()
                    .for_each(|(bid, (map, flags))| {
                        map_particles_block(map, flags, domain, units, bid, particles);
                    });
            });
        });
        self.time("reconstruct", |e| {
            let domain = &e.domain;
            let units = &e.units;
            let particles = &e.particles;
            e.pool.install(|| {
                e.pdf
                    .blocks
                    .par_iter_mut()
                    .zip(e.obstacles.par_iter())
                    .enumerate()
                    .for_each(|(bid, (pdf, map))| {
                        reconstruct_pdfs_block(pdf, map, domain, units, bid, particles);
                    });
            });
        });
    }

    pub fn exchange_pdfs(&mut self) {
        self.time("pdf_comm", |e| {
            let domain = e.domain.clone();
            e.pool
                .install(|| exchange_ghosts(&domain, &mut e.pdf, ExchangePattern::FullD3Q19));
        });
    }

    /// Static wall and moving-obstacle boundary writes.
    pub fn apply_bcs(&mut self) {
        self.time("bc", |e| {
            let domain = &e.domain;
            let units = &e.units;
            let particles = &e.particles;
            let patches = &e.patches;
            let wall_cells = &e.wall_cells;
            let gravity = e.gravity_lu;
            e.pool.install(|| {
                e.pdf
                    .blocks
                    .par_iter_mut()
                    .zip(e.flags.par_iter())
                    .zip(e.obstacles.par_iter())
                    .enumerate()
                    .for_each(|(bid, ((pdf, flags), map))| {
                        apply_static_bcs_block(
                            pdf,
                            flags,
                            &wall_cells[bid],
                            patches,
                            gravity,
                            1.0,
                        );
                        apply_obstacle_bcs_block(
                            pdf, flags, map, domain, units, bid, particles,
                        );
                    });
            });
        });
    }

    /// Fused TRT stream-collide with the Luo forcing term.
    pub fn stream_collide(&mut self) -> Result<()> {
        let step = self.step;
        let r = self.time("lbm", |e| {
            let trt = e.trt;
            let gravity = e.gravity_lu;
            let domain = &e.domain;
            e.pool.install(|| {
                e.pdf
                    .blocks
                    .par_iter_mut()
                    .zip(e.flags.par_iter())
                    .enumerate()
                    .try_for_each(|(bid, (pdf, flags))| {
                        let mut scratch = vec![0.0; 19 * pdf.volume()];
                        match stream_collide_block(pdf, flags, &trt, gravity, 1.0, &mut scratch)
                        {
                            Ok(()) => {
                                copy_back_interior(pdf, &scratch);
                                Ok(())
                            }
                            Err((x, y, z)) => {
                                let o = domain.block_origin(bid);
                                let gw = domain.ghost_width as i64;
                                Err((
                                    o[0] + x as i64 - gw,
                                    o[1] + y as i64 - gw,
                                    o[2] + z as i64 - gw,
                                ))
                            }
                        }
                    })
            })
        });
        r.map_err(|(x, y, z)| SimError::NumericDivergence {
            x,
            y,
            z,
            sweep: "lbm",
            step,
        })
    }

    /// Momentum-exchange forces, accumulated into the particle accumulators
    /// (block partials summed in ascending block id).
    pub fn hydrodynamic_forces(&mut self) {
        self.time("hydro_force", |e| {
            let domain = &e.domain;
            let units = &e.units;
            let particles = &e.particles;
            let n = particles.len();
            let partials: Vec<Vec<[f64; 6]>> = e.pool.install(|| {
                e.pdf
                    .blocks
                    .par_iter()
                    .zip(e.flags.par_iter())
                    .zip(e.obstacles.par_iter())
                    .enumerate()
                    .map(|(bid, ((pdf, flags), map))| {
                        let mut out = vec![[0.0; 6]; n];
                        hydrodynamic_force_block(
                            pdf, flags, map, domain, units, bid, particles, &mut out,
                        );
                        out
                    })
                    .collect()
            });
            for part in partials {
                for (p, acc) in e.particles.iter_mut().zip(part) {
                    for a in 0..3 {
                        p.force[a] += acc[a];
                        p.torque[a] += acc[3 + a];
                    }
                }
            }
        });
    }

    pub fn lubrication_correction(&mut self) {
        self.time("lubrication", |e| {
            lubrication_sweep(&mut e.particles, &e.walls, e.eta, &e.lubrication, &e.units);
        });
    }

    pub fn electrostatic_forces(&mut self) {
        if self.potential.is_none() {
            return;
        }
        self.time("electro_force", |e| {
            let st = e.potential.as_ref().unwrap();
            let domain = &e.domain;
            let units = &e.units;
            let particles = &e.particles;
            let n = particles.len();
            let phi = &st.hierarchy.levels[0].phi;
            let problem = &st.problem;
            let partials: Vec<Vec<[f64; 3]>> = e.pool.install(|| {
                phi.blocks
                    .par_iter()
                    .enumerate()
                    .map(|(bid, phib)| {
                        let mut out = vec![[0.0; 3]; n];
                        coulomb_force_block(
                            phib, domain, units, problem, bid, particles, &mut out,
                        );
                        out
                    })
                    .collect()
            });
            for part in partials {
                for (p, acc) in e.particles.iter_mut().zip(part) {
                    for a in 0..3 {
                        p.force[a] += acc[a];
                    }
                }
            }
        });
    }

    /// Integrate particle motion and resolve contacts.
    pub fn move_particles(&mut self) -> Result<()> {
        // snapshot accumulated forces for metrics before they are consumed
        for (i, p) in self.particles.iter().enumerate() {
            self.last_forces[i] = p.force;
            self.last_torques[i] = p.torque;
        }
        let r = self.time("particle_update", |e| {
            integrate_bodies(&mut e.particles, e.units.dt, e.particle_gravity, &e.units)?;
            resolve_contacts(&mut e.particles, &e.walls, e.restitution);
            wrap_positions(&mut e.particles, &e.domain, &e.units);
            Ok(())
        });
        r
    }

    /// One full coupled time step in the fixed sweep order.
    pub fn advance(&mut self) -> Result<()> {
        self.sweep_log.clear();
        let step = self.step;
        let wrap = |e: SimError, sweep: &'static str| SimError::Step {
            step,
            sweep,
            source: Box::new(e),
        };
        self.solve_potential().map_err(|e| wrap(e, "mg_solve"))?;
        self.map_and_reconstruct();
        self.exchange_pdfs();
        self.apply_bcs();
        self.stream_collide()?;
        self.hydrodynamic_forces();
        self.lubrication_correction();
        self.electrostatic_forces();
        self.move_particles().map_err(|e| wrap(e, "particle_update"))?;
        self.step += 1;
        Ok(())
    }

    /// Initialise all fluid cells to the equilibrium of (ρ_f, u).
    pub fn initialise_uniform(&mut self, rho: f64, u_lu: [f64; 3]) {
        let d = crate::lbm::equilibrium_dev(rho - RHO0, u_lu);
        for b in &mut self.pdf.blocks {
            for q in 0..19 {
                b.comp_mut(q).fill(d[q]);
            }
        }
    }

    /// Total fluid mass Σρ over fluid cells.
    pub fn total_mass(&self) -> f64 {
        let parts: Vec<f64> = self
            .pdf
            .blocks
            .par_iter()
            .zip(self.flags.par_iter())
            .map(|(pdf, flags)| {
                let mut s = 0.0;
                for (_, _, _, i) in pdf.interior_indices() {
                    if flags.kind_at(i) == CellKind::Fluid {
                        let mut rho = RHO0;
                        for q in 0..19 {
                            rho += pdf.get(q, i);
                        }
                        s += rho;
                    }
                }
                s
            })
            .collect();
        block_ordered_sum(&parts)
    }

    /// Total raw momentum Σ c_q f_q over fluid cells (LU).
    pub fn total_momentum(&self) -> [f64; 3] {
        let parts: Vec<[f64; 3]> = self
            .pdf
            .blocks
            .par_iter()
            .zip(self.flags.par_iter())
            .map(|(pdf, flags)| {
                let mut s = [0.0; 3];
                for (_, _, _, i) in pdf.interior_indices() {
                    if flags.kind_at(i) == CellKind::Fluid {
                        let mut d = [0.0; 19];
                        for q in 0..19 {
                            d[q] = pdf.get(q, i);
                        }
                        let (_, mom) = crate::lbm::dev_moments(&d);
                        for a in 0..3 {
                            s[a] += mom[a];
                        }
                    }
                }
                s
            })
            .collect();
        block_ordered_sum3(&parts)
    }

    pub fn fluid_cell_count(&self) -> usize {
        let parts: Vec<f64> = self
            .flags
            .par_iter()
            .map(|flags| {
                let ex = flags.ext[0];
                let ey = flags.ext[1];
                let gw = flags.gw;
                let mut c = 0usize;
                for z in gw..gw + flags.n[2] {
                    for y in gw..gw + flags.n[1] {
                        for x in gw..gw + flags.n[0] {
                            if flags.kind_at((z * ey + y) * ex + x) == CellKind::Fluid {
                                c += 1;
                            }
                        }
                    }
                }
                c as f64
            })
            .collect();
        block_ordered_sum(&parts) as usize
    }

    /// Mean Eq.-17 velocity component over fluid cells divided by the total
    /// cell count (superficial average ū*).
    pub fn mean_velocity(&self, axis: usize) -> f64 {
        let gravity = self.gravity_lu;
        let parts: Vec<f64> = self
            .pdf
            .blocks
            .par_iter()
            .zip(self.flags.par_iter())
            .map(|(pdf, flags)| {
                let mut s = 0.0;
                for (_, _, _, i) in pdf.interior_indices() {
                    if flags.kind_at(i) == CellKind::Fluid {
                        let mut d = [0.0; 19];
                        for q in 0..19 {
                            d[q] = pdf.get(q, i);
                        }
                        let mut rho = RHO0;
                        for v in d.iter() {
                            rho += v;
                        }
                        let f_ext = [rho * gravity[0], rho * gravity[1], rho * gravity[2]];
                        let (_, u) = macroscopics_dev(&d, f_ext, 1.0);
                        s += u[axis];
                    }
                }
                s
            })
            .collect();
        block_ordered_sum(&parts) / self.domain.n_cells() as f64
    }

    /// Eq.-17 velocity (LU) at a global cell.
    pub fn velocity_at(&self, g: [i64; 3]) -> [f64; 3] {
        let (bid, idx) = crate::grid::locate(&self.domain, g);
        let pdf = &self.pdf.blocks[bid];
        let mut d = [0.0; 19];
        for q in 0..19 {
            d[q] = pdf.get(q, idx);
        }
        let mut rho = RHO0;
        for v in d.iter() {
            rho += v;
        }
        let f_ext = [
            rho * self.gravity_lu[0],
            rho * self.gravity_lu[1],
            rho * self.gravity_lu[2],
        ];
        let (_, u) = macroscopics_dev(&d, f_ext, 1.0);
        u
    }

    /// Density at a global cell.
    pub fn density_at(&self, g: [i64; 3]) -> f64 {
        let (bid, idx) = crate::grid::locate(&self.domain, g);
        let pdf = &self.pdf.blocks[bid];
        let mut rho = RHO0;
        for q in 0..19 {
            rho += pdf.get(q, idx);
        }
        rho
    }

    /// Interior cells covered by any obstacle (for e_rV metrics).
    pub fn covered_cell_count(&self) -> usize {
        let mut count = 0usize;
        for map in &self.obstacles {
            let ex = map.ext[0];
            let ey = map.ext[1];
            for z in map.gw..map.gw + map.n[2] {
                for y in map.gw..map.gw + map.n[1] {
                    for x in map.gw..map.gw + map.n[0] {
                        if map.owner[(z * ey + y) * ex + x] != crate::particles::NO_OWNER {
                            count += 1;
                        }
                    }
                }
            }
        }
        count
    }

    pub fn workers(&self) -> usize {
        self.assignment.workers
    }
}
