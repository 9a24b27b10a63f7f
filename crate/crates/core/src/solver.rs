//! Single-component solver with the fused thread-safe stream-collide step.
//!
//! One time step runs two phases separated by a barrier:
//!
//! 1. moments: every fluid node reads its own populations and stores
//!    `rho`, `rho u` and `Pi_neq`;
//! 2. push: every fluid node rebuilds its post-collision populations from
//!    those moments and writes them to `f_a(x + c_a)`, or reflects them into
//!    `f_abar(x)` when the link ends on a wall or solid node.
//!
//! In phase 2 no population array is read, and for a fixed direction the map
//! `x -> x + c_a` is injective, so every slot has one writer. Wall links write
//! the slot whose would-be writer is outside the fluid. This is why a single
//! distribution buffer suffices and why the result does not depend on how
//! rows are spread over workers.

use std::hash::{DefaultHasher, Hasher};

use rayon::prelude::*;
use rayon::ThreadPool;

use crate::boundary::{classify_nodes, BoundarySpec, Classification, Link, Topology};
use crate::collision::{
    collide_dirs, node_moments, velocity, with_stencil, wall_term, CollisionParams, Consts, NodeMoments,
};
use crate::error::{Error, Result};
use crate::fields::{Dims, FieldSet, NodeFlags};
use crate::lattice::{unroll, LatticeKind, Stencil, CS2, MAX_PAIRS, MAX_Q};
use crate::real::Real;
use crate::scatter::{audit_counters, shared_set, AuditSink, PlainSink, SharedSlice, Sink, WriteAudit};

/// Environment variable overriding the default worker count.
pub const WORKERS_ENV: &str = "TSLB_WORKERS";

/// Worker count from `TSLB_WORKERS`, else the available parallelism.
pub fn default_workers() -> usize {
    std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

pub(crate) fn build_pool(workers: usize) -> Result<ThreadPool> {
    if workers == 0 {
        return Err(Error::Config("worker count must be at least 1".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start {workers} workers: {e}")))
}

/// External body force, lattice units.
#[derive(Clone, Debug, Default, PartialEq)]
pub enum BodyForce<T> {
    #[default]
    None,
    Uniform([T; 3]),
    /// One array per axis.
    Field(Vec<Vec<T>>),
}

impl<T: Real> BodyForce<T> {
    /// Force at node `x`; `None` where it is exactly zero so that unforced
    /// nodes take the plain collision.
    #[inline(always)]
    pub(crate) fn at(&self, x: usize) -> Option<[T; 3]> {
        let f = match self {
            BodyForce::None => return None,
            BodyForce::Uniform(f) => *f,
            BodyForce::Field(arrays) => {
                let mut f = [T::zero(); 3];
                for (fa, arr) in f.iter_mut().zip(arrays) {
                    *fa = arr[x];
                }
                f
            }
        };
        if f.iter().all(|v| *v == T::zero()) {
            None
        } else {
            Some(f)
        }
    }
}

/// Density and physical velocity of every node, in `f64`.
#[derive(Clone, Debug, PartialEq)]
pub struct Macroscopic {
    pub dims: Dims,
    pub rho: Vec<f64>,
    pub u: Vec<[f64; 3]>,
}

impl Macroscopic {
    pub fn velocity(&self, i: usize, j: usize, k: usize) -> [f64; 3] {
        self.u[self.dims.index(i, j, k)]
    }
}

/// Compensated running sum.
#[derive(Clone, Copy, Debug, Default)]
pub(crate) struct Neumaier {
    sum: f64,
    comp: f64,
}

impl Neumaier {
    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Fastest-moving node after a step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpeedCheck {
    pub max_speed: f64,
    pub coords: [usize; 3],
}

/// Stability guard on the second-order equilibrium: warn above `0.3 cs`.
pub const SPEED_WARNING: f64 = 0.3;

pub struct Solver<T: Real> {
    fields: FieldSet<T>,
    params: CollisionParams,
    boundary: BoundarySpec,
    topo: Topology<T>,
    force: BodyForce<T>,
    isolated: Vec<[usize; 3]>,
    pool: ThreadPool,
    workers: usize,
    audit_enabled: bool,
    last_audit: Option<WriteAudit>,
    step: u64,
}

impl<T: Real> Solver<T> {
    pub fn new(
        kind: LatticeKind,
        dims: Dims,
        params: CollisionParams,
        boundary: BoundarySpec,
        workers: usize,
    ) -> Result<Self> {
        let mut fields = FieldSet::allocate(kind, dims)?;
        let Classification { flags, isolated } = classify_nodes(&boundary, dims, kind)?;
        fields.flags = flags;
        Ok(Self {
            topo: Topology::new(&boundary, dims),
            fields,
            params,
            boundary,
            force: BodyForce::None,
            isolated,
            pool: build_pool(workers)?,
            workers,
            audit_enabled: false,
            last_audit: None,
            step: 0,
        })
    }

    pub fn kind(&self) -> LatticeKind {
        self.fields.kind
    }

    pub fn dims(&self) -> Dims {
        self.fields.dims
    }

    pub fn params(&self) -> &CollisionParams {
        &self.params
    }

    pub fn boundary(&self) -> &BoundarySpec {
        &self.boundary
    }

    pub fn workers(&self) -> usize {
        self.workers
    }

    pub fn time_step(&self) -> u64 {
        self.step
    }

    pub fn fields(&self) -> &FieldSet<T> {
        &self.fields
    }

    /// Direct access to the populations, e.g. to load a prepared state.
    /// Node flags must not be changed through it.
    pub fn populations_mut(&mut self) -> &mut [Vec<T>] {
        &mut self.fields.f
    }

    pub fn isolated_nodes(&self) -> &[[usize; 3]] {
        &self.isolated
    }

    pub fn body_force(&self) -> &BodyForce<T> {
        &self.force
    }

    pub fn set_body_force(&mut self, force: BodyForce<T>) {
        self.force = force;
    }

    /// Turns on per-slot writer counting for subsequent push phases.
    pub fn set_write_audit(&mut self, on: bool) {
        self.audit_enabled = on;
        if !on {
            self.last_audit = None;
        }
    }

    /// Writer statistics of the most recent audited push phase.
    pub fn last_write_audit(&self) -> Option<WriteAudit> {
        self.last_audit
    }

    /// Sets every fluid node to the equilibrium of `init(coords)`; solid
    /// nodes are zeroed. Moments are refreshed afterwards.
    pub fn initialize<F>(&mut self, init: F)
    where
        F: Fn([usize; 3]) -> (f64, [f64; 3]),
    {
        let kind = self.kind();
        with_stencil!(kind, L => self.initialize_with::<L, F>(init));
        self.compute_moments();
    }

    fn initialize_with<L: Stencil, F>(&mut self, init: F)
    where
        F: Fn([usize; 3]) -> (f64, [f64; 3]),
    {
        let k = Consts::<T>::new::<L>(self.params.omega, self.params.rho0);
        let dims = self.fields.dims;
        for x in 0..dims.nodes() {
            if !self.fields.flags[x].is_fluid() {
                for fa in self.fields.f.iter_mut() {
                    fa[x] = T::zero();
                }
                continue;
            }
            let (rho, u) = init(dims.coords(x));
            let u = [T::lit(u[0]), T::lit(u[1]), T::lit(u[2])];
            let uu = crate::collision::kinetic::<L, T>(&u, &k);
            for a in 0..L::Q {
                self.fields.f[a][x] = crate::collision::feq_dir::<L, T>(a, T::lit(rho), &u, uu, &k);
            }
        }
    }

    /// Phase 1: moments of every fluid node.
    pub fn compute_moments(&mut self) {
        let kind = self.kind();
        with_stencil!(kind, L => self.moments_phase::<L>());
    }

    fn moments_phase<L: Stencil>(&mut self) {
        let k = Consts::<T>::new::<L>(self.params.omega, self.params.rho0);
        let FieldSet {
            dims,
            f,
            rho,
            mom,
            pineq,
            flags,
            ..
        } = &mut self.fields;
        let nx = dims.nx;
        let rows = dims.rows();
        let f: &[Vec<T>] = f;
        let flags: &[NodeFlags] = flags;
        let rho_w = SharedSlice::new(rho.as_mut_slice());
        let mom_w = shared_set(mom);
        let pi_w = shared_set(pineq);
        self.pool.install(|| {
            (0..rows).into_par_iter().for_each(|row| {
                for x in row * nx..(row + 1) * nx {
                    if !flags[x].is_fluid() {
                        continue;
                    }
                    let mut fx = [T::zero(); MAX_Q];
                    unroll!(19, a in 0, L::Q => {
                        fx[a] = f[a][x];
                    });
                    let m = node_moments::<L, T>(&fx, &k);
                    // SAFETY: node x is visited by exactly one worker.
                    unsafe {
                        rho_w.write(x, m.rho);
                        unroll!(3, al in 0, L::D => {
                            mom_w[al].write(x, m.j[al]);
                        });
                        unroll!(6, p in 0, L::PAIRS.len() => {
                            pi_w[p].write(x, m.pineq[p]);
                        });
                    }
                }
            });
        });
    }

    /// Phase 2: fused collision and push streaming, boundaries included.
    pub fn stream_collide(&mut self) {
        let kind = self.kind();
        with_stencil!(kind, L => self.push_phase::<L>());
    }

    fn push_phase<L: Stencil>(&mut self) {
        let k = Consts::<T>::new::<L>(self.params.omega, self.params.rho0);
        let FieldSet {
            dims,
            f,
            rho,
            mom,
            pineq,
            flags,
            ..
        } = &mut self.fields;
        let ctx = PushCtx {
            dims: *dims,
            rho,
            mom,
            pineq,
            flags,
            topo: &self.topo,
            force: &self.force,
            k,
            off: offsets::<L>(*dims),
        };
        let nodes = dims.nodes();
        let plain = PlainSink { f: shared_set(f) };
        if self.audit_enabled {
            let counts = audit_counters(L::Q * nodes);
            let sink = AuditSink {
                inner: plain,
                counts: &counts,
                nodes,
            };
            self.pool.install(|| push_rows::<L, T, _>(&ctx, &sink));
            self.last_audit = Some(WriteAudit::from_counts(&counts, L::Q, flags));
        } else {
            self.pool.install(|| push_rows::<L, T, _>(&ctx, &plain));
        }
    }

    /// One full time step.
    pub fn step(&mut self) {
        self.compute_moments();
        self.stream_collide();
        self.step += 1;
    }

    pub fn run(&mut self, steps: u64) {
        for _ in 0..steps {
            self.step();
        }
    }

    /// Fails on the first non-finite population.
    pub fn check_finite(&self) -> Result<()> {
        for fa in &self.fields.f {
            if let Some(x) = fa.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite {
                    field: "f",
                    step: self.step,
                    coords: self.fields.dims.coords(x),
                });
            }
        }
        Ok(())
    }

    /// Largest velocity from the populations; warns above [`SPEED_WARNING`]`* cs`.
    pub fn check_speed(&self) -> SpeedCheck {
        let m = self.macroscopic();
        let mut best = SpeedCheck {
            max_speed: 0.0,
            coords: [0; 3],
        };
        for (x, u) in m.u.iter().enumerate() {
            let s = (u[0] * u[0] + u[1] * u[1] + u[2] * u[2]).sqrt();
            if s > best.max_speed {
                best = SpeedCheck {
                    max_speed: s,
                    coords: self.fields.dims.coords(x),
                };
            }
        }
        if best.max_speed > SPEED_WARNING * CS2.sqrt() {
            log::warn!(
                "step {}: |u| = {:.4} at {:?} exceeds {SPEED_WARNING} cs",
                self.step,
                best.max_speed,
                best.coords
            );
        }
        best
    }

    /// Density and velocity computed from the current populations. The
    /// reported velocity includes half the local force, `(rho u + F/2) / rho0`.
    pub fn macroscopic(&self) -> Macroscopic {
        let kind = self.kind();
        with_stencil!(kind, L => self.macroscopic_with::<L>())
    }

    fn macroscopic_with<L: Stencil>(&self) -> Macroscopic {
        let k = Consts::<T>::new::<L>(self.params.omega, self.params.rho0);
        let dims = self.fields.dims;
        let n = dims.nodes();
        let mut out = Macroscopic {
            dims,
            rho: vec![0.0; n],
            u: vec![[0.0; 3]; n],
        };
        for x in 0..n {
            if !self.fields.flags[x].is_fluid() {
                continue;
            }
            let mut fx = [T::zero(); MAX_Q];
            for a in 0..L::Q {
                fx[a] = self.fields.f[a][x];
            }
            let m = node_moments::<L, T>(&fx, &k);
            let mut j = m.j;
            if let Some(fv) = self.force.at(x) {
                for al in 0..L::D {
                    j[al] = j[al] + k.half * fv[al];
                }
            }
            let u = velocity::<L, T>(&j, &k);
            out.rho[x] = m.rho.as_f64();
            out.u[x] = [u[0].as_f64(), u[1].as_f64(), u[2].as_f64()];
        }
        out
    }

    /// Total mass `sum f` over fluid nodes, compensated summation in `f64`.
    pub fn total_mass(&self) -> f64 {
        let mut acc = Neumaier::default();
        for x in 0..self.fields.nodes() {
            if self.fields.flags[x].is_fluid() {
                for fa in &self.fields.f {
                    acc.add(fa[x].as_f64());
                }
            }
        }
        acc.value()
    }

    /// Total momentum `sum f c` over fluid nodes.
    pub fn total_momentum(&self) -> [f64; 3] {
        let kind = self.kind();
        with_stencil!(kind, L => total_momentum::<L, T>(&self.fields.f, &self.fields.flags))
    }

    /// Hash of the exact bit patterns of all populations.
    pub fn state_hash(&self) -> u64 {
        hash_arrays(&self.fields.f)
    }
}

pub(crate) fn total_momentum<L: Stencil, T: Real>(f: &[Vec<T>], flags: &[NodeFlags]) -> [f64; 3] {
    let mut acc = [Neumaier::default(); 3];
    for (x, flag) in flags.iter().enumerate() {
        if !flag.is_fluid() {
            continue;
        }
        for a in 0..L::Q {
            let v = f[a][x].as_f64();
            for al in 0..L::D {
                match L::C[a][al] {
                    0 => {}
                    c => acc[al].add(c as f64 * v),
                }
            }
        }
    }
    [acc[0].value(), acc[1].value(), acc[2].value()]
}

pub(crate) fn hash_arrays<T: Real>(arrays: &[Vec<T>]) -> u64 {
    let mut h = DefaultHasher::new();
    for arr in arrays {
        for v in arr {
            h.write_u64(v.bits());
        }
    }
    h.finish()
}

/// Linear index shift of each direction on an unwrapped grid.
pub(crate) fn offsets<L: Stencil>(dims: Dims) -> [isize; MAX_Q] {
    let mut off = [0isize; MAX_Q];
    let (nx, ny) = (dims.nx as isize, dims.ny as isize);
    for a in 0..L::Q {
        let c = L::C[a];
        off[a] = c[0] as isize + nx * (c[1] as isize + ny * c[2] as isize);
    }
    off
}

struct PushCtx<'a, T> {
    dims: Dims,
    rho: &'a [T],
    mom: &'a [Vec<T>],
    pineq: &'a [Vec<T>],
    flags: &'a [NodeFlags],
    topo: &'a Topology<T>,
    force: &'a BodyForce<T>,
    k: Consts<T>,
    off: [isize; MAX_Q],
}

fn push_rows<L: Stencil, T: Real, S: Sink<T>>(ctx: &PushCtx<'_, T>, sink: &S) {
    let nx = ctx.dims.nx;
    let ny = ctx.dims.ny;
    (0..ctx.dims.rows()).into_par_iter().for_each(|row| {
        let (j, kz) = (row % ny, row / ny);
        let mut post = [T::zero(); MAX_Q];
        for i in 0..nx {
            let x = row * nx + i;
            let flag = ctx.flags[x];
            if !flag.is_fluid() {
                continue;
            }
            let mut m = NodeMoments {
                rho: ctx.rho[x],
                j: [T::zero(); 3],
                pineq: [T::zero(); MAX_PAIRS],
            };
            unroll!(3, al in 0, L::D => {
                m.j[al] = ctx.mom[al][x];
            });
            unroll!(6, p in 0, L::PAIRS.len() => {
                m.pineq[p] = ctx.pineq[p][x];
            });
            collide_dirs::<L, T>(&m, ctx.force.at(x), &ctx.k, &mut post);
            // SAFETY: slot (a, x + c_a) has x as its only writer; a reflected
            // slot (abar, x) would otherwise be written by x + c_a, which is
            // outside the fluid.
            unsafe {
                if flag.is_plain() {
                    unroll!(19, a in 0, L::Q => {
                        sink.put(a, (x as isize + ctx.off[a]) as usize, post[a]);
                    });
                } else {
                    for a in 0..L::Q {
                        match ctx.topo.resolve::<L>([i, j, kz], a, ctx.flags) {
                            Link::Stream { target, .. } => sink.put(a, target, post[a]),
                            Link::Bounce(None) => sink.put(L::OPP[a], x, post[a]),
                            Link::Bounce(Some(uw)) => {
                                sink.put(L::OPP[a], x, post[a] - wall_term::<L, T>(a, &uw, &ctx.k))
                            }
                        }
                    }
                }
            }
        }
    });
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{D2Q9, D3Q19};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn solver(kind: LatticeKind, dims: Dims, boundary: BoundarySpec, workers: usize) -> Solver<f64> {
        Solver::new(kind, dims, CollisionParams::new(1.2, 1.0).unwrap(), boundary, workers).unwrap()
    }

    fn randomize(s: &mut Solver<f64>, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        s.initialize(|_| (1.0, [0.0; 3]));
        for fa in s.populations_mut() {
            for v in fa.iter_mut() {
                *v *= 1.0 + 0.05 * rng.gen_range(-1.0..1.0);
            }
        }
    }

    #[test]
    fn offsets_match_index_arithmetic() {
        let dims = Dims::new(7, 5, 3);
        let off = offsets::<D3Q19>(dims);
        let x = dims.index(3, 2, 1);
        for a in 0..19 {
            let c = D3Q19::C[a];
            let t = dims.index(
                (3 + c[0]) as usize,
                (2 + c[1]) as usize,
                (1 + c[2]) as usize,
            );
            assert_eq!(x as isize + off[a], t as isize);
        }
        assert_eq!(offsets::<D2Q9>(Dims::square(8))[5], 9);
    }

    #[test]
    fn equilibrium_is_a_fixed_point() {
        for kind in [LatticeKind::D2Q9, LatticeKind::D3Q19] {
            let dims = if kind.dim() == 2 { Dims::square(8) } else { Dims::cube(6) };
            let mut s = solver(kind, dims, BoundarySpec::periodic(), 1);
            s.initialize(|_| (1.02, [0.03, -0.02, 0.01]));
            let before = s.fields().f.clone();
            s.run(3);
            for (fa, fb) in before.iter().zip(&s.fields().f) {
                for (a, b) in fa.iter().zip(fb) {
                    assert!((a - b).abs() < 1e-15, "{a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn every_slot_written_once() {
        let cases = [
            (LatticeKind::D2Q9, Dims::square(8), BoundarySpec::periodic()),
            (LatticeKind::D2Q9, Dims::square(8), BoundarySpec::lid_driven(LatticeKind::D2Q9, 0.05)),
            (LatticeKind::D3Q19, Dims::cube(6), BoundarySpec::closed_box(LatticeKind::D3Q19)),
        ];
        for (kind, dims, boundary) in cases {
            let mut s = solver(kind, dims, boundary, 2);
            randomize(&mut s, 3);
            s.set_write_audit(true);
            s.step();
            let audit = s.last_write_audit().unwrap();
            assert!(audit.is_clean(), "{kind}: {audit:?}");
        }
    }

    #[test]
    fn solid_obstacle_keeps_writes_disjoint() {
        let dims = Dims::square(10);
        let mut mask = vec![false; dims.nodes()];
        for j in 4..6 {
            for i in 4..6 {
                mask[dims.index(i, j, 0)] = true;
            }
        }
        let mut s = solver(LatticeKind::D2Q9, dims, BoundarySpec::periodic().with_solid(mask), 1);
        randomize(&mut s, 5);
        let m0 = s.total_mass();
        s.set_write_audit(true);
        s.run(20);
        assert!(s.last_write_audit().unwrap().is_clean());
        assert!(((s.total_mass() - m0) / m0).abs() < 1e-13);
    }

    #[test]
    fn worker_count_does_not_change_bits() {
        let dims = Dims::new(12, 10, 8);
        let mut hashes = Vec::new();
        for workers in [1, 2, 3] {
            let mut s = solver(LatticeKind::D3Q19, dims, BoundarySpec::lid_driven(LatticeKind::D3Q19, 0.04), workers);
            randomize(&mut s, 11);
            s.run(5);
            hashes.push(s.state_hash());
        }
        assert!(hashes.windows(2).all(|w| w[0] == w[1]));
    }

    #[test]
    fn closed_box_conserves_mass() {
        let mut s = solver(LatticeKind::D2Q9, Dims::square(12), BoundarySpec::closed_box(LatticeKind::D2Q9), 1);
        randomize(&mut s, 9);
        let m0 = s.total_mass();
        s.run(1000);
        assert!(((s.total_mass() - m0) / m0).abs() < 1e-12);
    }

    #[test]
    fn uniform_force_adds_momentum_per_step() {
        let dims = Dims::square(8);
        let mut s = solver(LatticeKind::D2Q9, dims, BoundarySpec::periodic(), 1);
        s.initialize(|_| (1.0, [0.0; 3]));
        let fx = 1e-5;
        s.set_body_force(BodyForce::Uniform([fx, 0.0, 0.0]));
        let p0 = s.total_momentum()[0];
        s.run(10);
        let gained = s.total_momentum()[0] - p0;
        let expected = 10.0 * dims.nodes() as f64 * fx;
        assert!((gained - expected).abs() < 1e-12 * dims.nodes() as f64, "{gained} vs {expected}");
    }

    #[test]
    fn zero_force_is_a_no_op() {
        let mut a = solver(LatticeKind::D2Q9, Dims::square(8), BoundarySpec::periodic(), 1);
        let mut b = solver(LatticeKind::D2Q9, Dims::square(8), BoundarySpec::periodic(), 1);
        randomize(&mut a, 2);
        randomize(&mut b, 2);
        b.set_body_force(BodyForce::Uniform([0.0; 3]));
        a.run(4);
        b.run(4);
        assert_eq!(a.state_hash(), b.state_hash());
    }

    #[test]
    fn nan_is_reported_with_coordinates() {
        let mut s = solver(LatticeKind::D2Q9, Dims::square(8), BoundarySpec::periodic(), 1);
        s.initialize(|_| (1.0, [0.0; 3]));
        let x = s.dims().index(3, 5, 0);
        s.populations_mut()[0][x] = f64::NAN;
        s.step();
        match s.check_finite() {
            Err(Error::NonFinite { coords, .. }) => assert!(coords[0].abs_diff(3) <= 1 && coords[1].abs_diff(5) <= 1),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn speed_check_finds_fastest_node() {
        let mut s = solver(LatticeKind::D2Q9, Dims::square(8), BoundarySpec::periodic(), 1);
        s.initialize(|x| (1.0, if x == [2, 6, 0] { [0.25, 0.0, 0.0] } else { [0.0; 3] }));
        let c = s.check_speed();
        assert_eq!(c.coords, [2, 6, 0]);
        assert!((c.max_speed - 0.25).abs() < 1e-12);
    }

    #[test]
    fn neumaier_recovers_small_terms() {
        let mut acc = Neumaier::default();
        acc.add(1e16);
        for _ in 0..10 {
            acc.add(1.0);
        }
        acc.add(-1e16);
        assert_eq!(acc.value(), 10.0);
    }
}
