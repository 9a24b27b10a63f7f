//! Throughput measurement, kernel cost census and the roofline bound.

use std::time::Instant;

use serde::Serialize;

use crate::boundary::BoundarySpec;
use crate::collision::{with_stencil, CollisionParams};
use crate::error::{Error, Result};
use crate::fields::Dims;
use crate::lattice::{LatticeKind, Stencil};
use crate::real::{Precision, Real};
use crate::solver::Solver;

/// Node updates per second in units of 1e9.
pub fn glups(dims: Dims, steps: u64, seconds: f64) -> Result<f64> {
    if seconds <= 0.0 || !seconds.is_finite() {
        return Err(Error::ZeroElapsed);
    }
    Ok(dims.nodes() as f64 * steps as f64 / (1e9 * seconds))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MachineModel {
    /// Peak compute, FLOP/s.
    pub pi: f64,
    /// Peak memory bandwidth, byte/s.
    pub beta_bw: f64,
}

impl MachineModel {
    pub fn new(pi: f64, beta_bw: f64) -> Result<Self> {
        if !(pi > 0.0 && beta_bw > 0.0) {
            return Err(Error::Config(format!("machine ceilings must be positive (pi = {pi}, beta = {beta_bw})")));
        }
        Ok(Self { pi, beta_bw })
    }

    /// Intensity at which the two roofs meet.
    pub fn ridge(&self) -> f64 {
        self.pi / self.beta_bw
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Bound {
    Memory,
    Compute,
}

/// Attainable performance `min(pi, beta I)`.
pub fn roofline(machine: &MachineModel, intensity: f64) -> (f64, Bound) {
    let p = machine.pi.min(machine.beta_bw * intensity);
    let bound = if intensity <= machine.ridge() { Bound::Memory } else { Bound::Compute };
    (p, bound)
}

/// Per-update operation census of one full time step (moments phase plus
/// fused push phase) on a plain bulk node.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct KernelCostModel {
    pub lattice: LatticeKind,
    pub element_bytes: usize,
    pub moments_flops: u64,
    pub push_flops: u64,
    pub flops_per_update: u64,
    /// Populations read and moments written in phase 1, moments read and
    /// populations written in phase 2; no cache reuse.
    pub bytes_per_update: u64,
    pub intensity: f64,
}

/// Adds needed to accumulate `sum c_i v_i` from zero when `nonzero`
/// coefficients are `+-1`.
fn accumulate(nonzero: usize) -> u64 {
    nonzero as u64
}

fn census<L: Stencil>(element_bytes: usize) -> KernelCostModel {
    let (d, q) = (L::D as u64, L::Q as u64);
    let pairs = L::PAIRS.len();
    let nz = |a: usize| (0..L::D).filter(|&al| L::C[a][al] != 0).count();
    let od = |a: usize| (L::D..pairs).filter(|&p| L::C[a][L::PAIRS[p].0] * L::C[a][L::PAIRS[p].1] != 0).count();

    // phase 1: rho, j, u = j / rho0, then s - (cs2 rho + rho0 u u) per pair
    let mut moments = q - 1 + d;
    for al in 0..L::D {
        moments += accumulate((0..L::Q).filter(|&a| L::C[a][al] != 0).count());
    }
    for (p, &(al, be)) in L::PAIRS.iter().enumerate() {
        moments += accumulate((0..L::Q).filter(|&a| L::C[a][al] * L::C[a][be] != 0).count());
        moments += if p < L::D { 5 } else { 3 };
    }

    // phase 2 per node: u, u.u / (2 cs2), cs2 tr(Pi_neq)
    let mut push = d + (2 * d + 1) + d;
    for a in 1..L::Q {
        // equilibrium: c.u, then 8 operations
        push += accumulate(nz(a)) + 8;
        // Hermite term: trace start, diagonal and off-diagonal sums, doubling, add, scale
        push += 4 + accumulate(nz(a)) + accumulate(od(a));
        // feq + (1 - omega) fneq
        push += 2;
    }
    // rest population as rho minus the moving ones
    push += q - 1;

    let moment_slots = 1 + d + pairs as u64;
    let bytes = 2 * (q + moment_slots) * element_bytes as u64;
    let flops = moments + push;
    KernelCostModel {
        lattice: L::KIND,
        element_bytes,
        moments_flops: moments,
        push_flops: push,
        flops_per_update: flops,
        bytes_per_update: bytes,
        intensity: flops as f64 / bytes as f64,
    }
}

/// Operation census of the single-component kernel.
pub fn count_kernel_cost(kind: LatticeKind, element_bytes: usize) -> KernelCostModel {
    with_stencil!(kind, L => census::<L>(element_bytes))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BenchConfig {
    pub lattice: LatticeKind,
    pub dims: Dims,
    pub precision: Precision,
    pub omega: f64,
    pub steps: u64,
    pub warmup: u64,
    pub workers: Vec<usize>,
    pub machine: Option<MachineModel>,
}

impl BenchConfig {
    pub fn new(lattice: LatticeKind, dims: Dims, steps: u64) -> Self {
        Self {
            lattice,
            dims,
            precision: Precision::F32,
            omega: 1.0,
            steps,
            warmup: 2,
            workers: vec![1],
            machine: None,
        }
    }
}

/// One timed run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BenchReport {
    pub lattice: LatticeKind,
    pub dims: [usize; 3],
    pub workers: usize,
    pub steps: u64,
    pub seconds: f64,
    pub glups: f64,
    pub mlups: f64,
    pub flops_per_update: u64,
    pub bytes_per_update: u64,
    pub intensity: f64,
    /// Roofline bound in FLOP/s, when machine ceilings are given.
    pub roofline_bound: Option<f64>,
    pub bound_kind: Option<Bound>,
    pub state_hash: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScalingTable {
    pub runs: Vec<BenchReport>,
    /// `MLUPS_P / (P MLUPS_1)`, relative to the first entry.
    pub efficiency: Vec<f64>,
    pub bit_identical: bool,
}

/// Smooth periodic shear wave used as the benchmark state.
fn bench_state(dims: Dims) -> impl Fn([usize; 3]) -> (f64, [f64; 3]) {
    move |c| {
        let phase = 2.0 * std::f64::consts::PI * c[1] as f64 / dims.ny as f64;
        let zphase = 2.0 * std::f64::consts::PI * c[2] as f64 / dims.nz as f64;
        (1.0 + 1e-3 * zphase.cos(), [0.02 * phase.sin(), 0.0, 0.01 * phase.cos()])
    }
}

fn timed_run<T: Real>(cfg: &BenchConfig, workers: usize, cost: &KernelCostModel) -> Result<BenchReport> {
    let params = CollisionParams::new(cfg.omega, 1.0)?;
    let mut solver = Solver::<T>::new(cfg.lattice, cfg.dims, params, BoundarySpec::periodic(), workers)?;
    solver.initialize(bench_state(cfg.dims));
    solver.run(cfg.warmup);
    let start = Instant::now();
    solver.run(cfg.steps);
    let seconds = start.elapsed().as_secs_f64();
    solver.check_finite()?;
    let g = glups(cfg.dims, cfg.steps, seconds)?;
    let (roof, kind) = match &cfg.machine {
        Some(m) => {
            let (p, b) = roofline(m, cost.intensity);
            (Some(p), Some(b))
        }
        None => (None, None),
    };
    log::info!("{} {} workers: {:.2} MLUPS", cfg.lattice, workers, g * 1e3);
    Ok(BenchReport {
        lattice: cfg.lattice,
        dims: cfg.dims.as_array(),
        workers,
        steps: cfg.steps,
        seconds,
        glups: g,
        mlups: g * 1e3,
        flops_per_update: cost.flops_per_update,
        bytes_per_update: cost.bytes_per_update,
        intensity: cost.intensity,
        roofline_bound: roof,
        bound_kind: kind,
        state_hash: solver.state_hash(),
    })
}

/// Runs the same configuration once per worker count, serially.
pub fn scaling_run(cfg: &BenchConfig) -> Result<ScalingTable> {
    if cfg.workers.is_empty() {
        return Err(Error::Config("benchmark needs at least one worker count".into()));
    }
    let cost = count_kernel_cost(cfg.lattice, cfg.precision.bytes());
    let mut runs = Vec::with_capacity(cfg.workers.len());
    for &w in &cfg.workers {
        runs.push(match cfg.precision {
            Precision::F32 => timed_run::<f32>(cfg, w, &cost)?,
            Precision::F64 => timed_run::<f64>(cfg, w, &cost)?,
        });
    }
    let base = &runs[0];
    let efficiency = runs
        .iter()
        .map(|r| r.mlups * base.workers as f64 / (r.workers as f64 * base.mlups))
        .collect();
    let bit_identical = runs.iter().all(|r| r.state_hash == base.state_hash);
    Ok(ScalingTable {
        runs,
        efficiency,
        bit_identical,
    })
}
