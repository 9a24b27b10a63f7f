//! Color-gradient two-fluid model with near-contact repulsion.
//!
//! Relaxation and the surface-tension perturbation act on the total set
//! `g = f_R + f_B`; the recoloring step then splits the post-collision `g`
//! back into the two colors, which are pushed separately. A step has four
//! barrier-separated phases:
//!
//! 1. moments of `g`, color densities and the phase field `phi`;
//! 2. isotropic gradient of `phi`;
//! 3. near-contact scan from bulk nodes, then per-node flag and force update;
//! 4. fused collision, perturbation, recoloring and push of both colors.

use std::sync::atomic::{AtomicBool, Ordering};

use rayon::prelude::*;
use rayon::ThreadPool;
use serde::{Deserialize, Serialize};

use crate::boundary::{classify_nodes, BoundarySpec, Link, Topology};
use crate::collision::{
    collide_dirs, dot_c, feq_dir, kinetic, madd, node_moments, velocity, wall_term, with_stencil, CollisionParams,
    Consts, NodeMoments,
};
use crate::error::{Error, Result};
use crate::fields::{Dims, NodeFlags, TwoFluidFieldSet};
use crate::lattice::{unroll, LatticeDescriptor, LatticeKind, Stencil, MAX_PAIRS, MAX_Q};
use crate::real::Real;
use crate::scatter::{audit_counters, shared_set, AuditSink, PlainSink, SharedSlice, Sink, WriteAudit};
use crate::solver::{build_pool, hash_arrays, offsets, total_momentum, Macroscopic, Neumaier};

/// Perturbation and recoloring run only where `|grad phi|` exceeds this.
pub const GRAD_THRESHOLD: f64 = 1e-6;
/// ... and where `|phi|` is below this.
pub const PHI_INTERFACE: f64 = 0.99;
/// Tolerated excursion of `phi` outside `[-1, 1]` before it is reported.
pub const PHI_SLACK: f64 = 1e-9;

/// Shape of the surface-tension perturbation.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PerturbationForm {
    /// `t_a (c_a . grad phi)^2 / |grad phi|^2 - B_a`; conserves mass and momentum.
    #[default]
    Squared,
    /// `t_a (c_a . grad phi) / |grad phi|^2 - B_a`; kept for comparison only,
    /// it removes `cs2 * A |grad phi|` of mass per interface node.
    Linear,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ColorParams {
    /// Surface tension, lattice units.
    pub sigma: f64,
    /// Recoloring sharpness, `0 < beta <= 1`.
    pub beta: f64,
    /// Near-contact repulsion coefficient; zero disables the scan.
    pub nci_strength: f64,
    /// A node is bulk continuous phase when `phi < -1 + eps_bulk`.
    pub eps_bulk: f64,
    /// Nodes sampled along each direction of an opposite pair.
    pub scan_reach: usize,
    pub form: PerturbationForm,
}

impl Default for ColorParams {
    fn default() -> Self {
        Self {
            sigma: 0.03,
            beta: 0.7,
            nci_strength: 0.0,
            eps_bulk: 0.02,
            scan_reach: 3,
            form: PerturbationForm::Squared,
        }
    }
}

impl ColorParams {
    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        if !(self.sigma >= 0.0) {
            errs.push(format!("sigma = {} must be non-negative", self.sigma));
        }
        if !(self.beta > 0.0 && self.beta <= 1.0) {
            errs.push(format!("beta = {} must lie in (0, 1]", self.beta));
        }
        if !(self.nci_strength >= 0.0) {
            errs.push(format!("nci_strength = {} must be non-negative", self.nci_strength));
        }
        if !(self.eps_bulk > 0.0 && self.eps_bulk <= 0.2) {
            errs.push(format!("eps_bulk = {} must lie in (0, 0.2]", self.eps_bulk));
        }
        if self.scan_reach == 0 {
            errs.push("scan_reach must be at least 1".into());
        }
        match errs.len() {
            0 => Ok(()),
            1 => Err(Error::Config(errs.remove(0))),
            _ => Err(Error::ConfigErrors(errs)),
        }
    }

    /// Perturbation amplitude `(9/4) sigma omega`.
    pub fn amplitude(&self, omega: f64) -> f64 {
        2.25 * self.sigma * omega
    }
}

/// `(rho_R - rho_B) / (rho_R + rho_B)`, or `None` for an empty node.
pub fn phase_field(rho_red: f64, rho_blue: f64) -> Option<f64> {
    let rho = rho_red + rho_blue;
    (rho > 0.0).then(|| (rho_red - rho_blue) / rho)
}

#[derive(Clone, Copy, Debug)]
struct ColorConsts<T> {
    b: [T; MAX_Q],
    amp: T,
    beta: T,
    grad2_min: T,
    phi_max: T,
    form: PerturbationForm,
}

impl<T: Real> ColorConsts<T> {
    fn new<L: Stencil>(color: &ColorParams, omega: f64) -> Self {
        let mut b = [T::zero(); MAX_Q];
        for a in 0..L::Q {
            b[a] = T::lit(L::B[a].to_f64());
        }
        Self {
            b,
            amp: T::lit(color.amplitude(omega)),
            beta: T::lit(color.beta),
            grad2_min: T::lit(GRAD_THRESHOLD * GRAD_THRESHOLD),
            phi_max: T::lit(PHI_INTERFACE),
            form: color.form,
        }
    }
}

#[inline(always)]
fn norm2<L: Stencil, T: Real>(v: &[T; 3]) -> T {
    let mut s = T::zero();
    for al in 0..L::D {
        s = s + v[al] * v[al];
    }
    s
}

#[inline(always)]
fn is_interface<T: Real>(phi: T, g2: T, cc: &ColorConsts<T>) -> bool {
    g2 > cc.grad2_min && phi.abs() < cc.phi_max
}

#[inline(always)]
fn perturb_dir<L: Stencil, T: Real>(
    a: usize,
    grad: &[T; 3],
    g2: T,
    gnorm: T,
    k: &Consts<T>,
    cc: &ColorConsts<T>,
) -> T {
    let cg = dot_c::<L, T>(a, grad);
    let shape = match cc.form {
        PerturbationForm::Squared => k.t[a] * cg * cg / g2,
        PerturbationForm::Linear => k.t[a] * cg / g2,
    };
    cc.amp * gnorm * (shape - cc.b[a])
}

/// Red share of the post-collision population; `kappa = beta rhoR rhoB / rho`
/// and `cos` the angle cosine between `c_a` and `grad phi`.
#[inline(always)]
fn recolor_dir<T: Real>(g: T, frac: T, kappa: T, t: T, cos: T) -> T {
    frac * g + kappa * t * cos
}

#[inline(always)]
fn cosine<L: Stencil, T: Real>(a: usize, grad: &[T; 3], inv_gnorm: T, k: &Consts<T>) -> T {
    dot_c::<L, T>(a, grad) * k.inv_len[a] * inv_gnorm
}

/// Surface-tension perturbation of every direction for one node. Returns
/// zeros below the gradient threshold.
pub fn perturbation(desc: &LatticeDescriptor, grad: [f64; 3], color: &ColorParams, omega: f64) -> Vec<f64> {
    with_stencil!(desc.kind, L => {
        let k = Consts::<f64>::new::<L>(omega, 1.0);
        let cc = ColorConsts::<f64>::new::<L>(color, omega);
        let g2 = norm2::<L, f64>(&grad);
        (0..L::Q)
            .map(|a| if g2 > cc.grad2_min { perturb_dir::<L, f64>(a, &grad, g2, g2.sqrt(), &k, &cc) } else { 0.0 })
            .collect()
    })
}

/// Splits a post-collision set `g` into red and blue parts.
pub fn recolor(
    desc: &LatticeDescriptor,
    g: &[f64],
    rho_red: f64,
    rho_blue: f64,
    grad: [f64; 3],
    beta: f64,
) -> (Vec<f64>, Vec<f64>) {
    with_stencil!(desc.kind, L => {
        let k = Consts::<f64>::new::<L>(1.0, 1.0);
        let rho = rho_red + rho_blue;
        let frac = if rho > 0.0 { rho_red / rho } else { 0.0 };
        let g2 = norm2::<L, f64>(&grad);
        let (kappa, inv) = if g2 > GRAD_THRESHOLD * GRAD_THRESHOLD && rho > 0.0 {
            (beta * rho_red * rho_blue / rho, 1.0 / g2.sqrt())
        } else {
            (0.0, 0.0)
        };
        let red: Vec<f64> = (0..L::Q)
            .map(|a| recolor_dir(g[a], frac, kappa, k.t[a], cosine::<L, f64>(a, &grad, inv, &k)))
            .collect();
        let blue = g.iter().zip(&red).map(|(g, r)| g - r).collect();
        (red, blue)
    })
}

/// Neighbor lookup shared by the gradient and the scan.
#[derive(Clone, Debug)]
struct Grid<T> {
    dims: Dims,
    topo: Topology<T>,
    off: [isize; MAX_Q],
}

impl<T: Real> Grid<T> {
    fn new<L: Stencil>(spec: &BoundarySpec, dims: Dims) -> Self {
        Self {
            dims,
            topo: Topology::new(spec, dims),
            off: offsets::<L>(dims),
        }
    }

    /// `(1/cs2) sum_a t_a c_a phi(x + c_a)`; a link into a wall or solid
    /// samples the node itself.
    #[inline(always)]
    fn gradient<L: Stencil>(&self, x: usize, phi: &[T], flags: &[NodeFlags], k: &Consts<T>) -> [T; 3] {
        let plain = flags[x].is_plain();
        let coords = if plain { [0; 3] } else { self.dims.coords(x) };
        let mut g = [T::zero(); 3];
        unroll!(19, a in 1, L::Q => {
            let nb = if plain {
                (x as isize + self.off[a]) as usize
            } else {
                self.topo.neighbor::<L>(coords, a, flags).unwrap_or(x)
            };
            let tp = k.t[a] * phi[nb];
            unroll!(3, al in 0, L::D => {
                g[al] = madd(g[al], L::C[a][al], tp);
            });
        });
        for ga in g.iter_mut().take(L::D) {
            *ga = *ga * k.inv_cs2;
        }
        g
    }

    /// Node `s` steps from `x` along `c_a`; `None` past a wall or on a solid node.
    #[inline(always)]
    fn ray<L: Stencil>(&self, x: usize, coords: [usize; 3], interior: bool, a: usize, s: usize, flags: &[NodeFlags]) -> Option<usize> {
        let idx = if interior {
            (x as isize + s as isize * self.off[a]) as usize
        } else {
            let n = self.dims.as_array();
            let mut t = [0usize; 3];
            for axis in 0..3 {
                let v = coords[axis] as isize + s as isize * L::C[a][axis] as isize;
                if (0..n[axis] as isize).contains(&v) {
                    t[axis] = v as usize;
                } else if self.topo.periodic[axis] {
                    t[axis] = v.rem_euclid(n[axis] as isize) as usize;
                } else {
                    return None;
                }
            }
            self.dims.index(t[0], t[1], t[2])
        };
        flags[idx].is_fluid().then_some(idx)
    }

    /// True when every node within `reach` along any axis is in range.
    #[inline(always)]
    fn interior<L: Stencil>(&self, coords: [usize; 3], reach: usize) -> bool {
        let n = self.dims.as_array();
        (0..L::D).all(|axis| coords[axis] >= reach && coords[axis] + reach < n[axis])
    }

    /// Scans from bulk node `x` along every opposite pair and marks the first
    /// non-bulk node found on each side when both sides have one.
    #[inline]
    fn scan_from<L: Stencil>(&self, x: usize, phi: &[T], flags: &[NodeFlags], bulk: T, reach: usize, mark: &impl Fn(usize)) {
        let coords = self.dims.coords(x);
        let interior = self.interior::<L>(coords, reach);
        let hit = |a: usize| -> Option<usize> {
            for s in 1..=reach {
                let y = self.ray::<L>(x, coords, interior, a, s, flags)?;
                if phi[y] > bulk {
                    return Some(y);
                }
            }
            None
        };
        unroll!(19, a in 1, L::Q => {
            if a < L::OPP[a] {
                if let Some(p) = hit(a) {
                    if let Some(q) = hit(L::OPP[a]) {
                        mark(p);
                        mark(q);
                    }
                }
            }
        });
    }
}

/// Isotropic lattice gradient of a scalar field.
pub fn isotropic_gradient<T: Real>(kind: LatticeKind, dims: Dims, spec: &BoundarySpec, phi: &[T]) -> Result<Vec<[T; 3]>> {
    let flags = classify_nodes(spec, dims, kind)?.flags;
    Ok(with_stencil!(kind, L => {
        let grid = Grid::<T>::new::<L>(spec, dims);
        let k = Consts::<T>::new::<L>(1.0, 1.0);
        (0..dims.nodes())
            .map(|x| if flags[x].is_fluid() { grid.gradient::<L>(x, phi, &flags, &k) } else { [T::zero(); 3] })
            .collect()
    }))
}

/// Near-contact marks: interface nodes facing another interface across a
/// thin film of continuous phase.
pub fn nci_scan<T: Real>(kind: LatticeKind, dims: Dims, spec: &BoundarySpec, phi: &[T], color: &ColorParams) -> Result<Vec<bool>> {
    let flags = classify_nodes(spec, dims, kind)?.flags;
    let mut marks = vec![false; dims.nodes()];
    with_stencil!(kind, L => {
        let grid = Grid::<T>::new::<L>(spec, dims);
        let bulk = T::lit(-1.0 + color.eps_bulk);
        let found = std::cell::RefCell::new(Vec::new());
        for x in 0..dims.nodes() {
            if flags[x].is_fluid() && phi[x] < bulk {
                grid.scan_from::<L>(x, phi, &flags, bulk, color.scan_reach, &|p| found.borrow_mut().push(p));
            }
        }
        for p in found.into_inner() {
            marks[p] = true;
        }
    });
    Ok(marks)
}

/// Repulsive force `A rho_dispersed grad phi / |grad phi|` on marked nodes.
/// The normal points into the dispersed (red) phase, so facing interfaces
/// are pushed apart. Marked nodes with zero gradient are skipped and counted.
pub fn nci_force(marks: &[bool], rho_red: &[f64], grad: &[[f64; 3]], strength: f64) -> (Vec<[f64; 3]>, usize) {
    let mut skipped = 0;
    let force = marks
        .iter()
        .enumerate()
        .map(|(x, &m)| {
            if !m {
                return [0.0; 3];
            }
            match nci_force_at(rho_red[x], &grad[x], strength) {
                Some(f) => f,
                None => {
                    skipped += 1;
                    [0.0; 3]
                }
            }
        })
        .collect();
    (force, skipped)
}

#[inline(always)]
fn nci_force_at<T: Real>(rho_red: T, grad: &[T; 3], strength: T) -> Option<[T; 3]> {
    let g2 = grad[0] * grad[0] + grad[1] * grad[1] + grad[2] * grad[2];
    if g2 <= T::zero() {
        return None;
    }
    let s = strength * rho_red / g2.sqrt();
    Some([s * grad[0], s * grad[1], s * grad[2]])
}

/// Per-step interface diagnostics.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct PhaseDiagnostics {
    /// Nodes with `|phi| > 1 + PHI_SLACK`.
    pub phi_out_of_range: usize,
    /// Fluid nodes with zero total density.
    pub empty_nodes: usize,
    /// Marked nodes whose gradient vanished.
    pub nci_skipped: usize,
    /// Marked nodes.
    pub nci_flagged: usize,
}

pub struct TwoFluidSolver<T: Real> {
    fields: TwoFluidFieldSet<T>,
    params: CollisionParams,
    color: ColorParams,
    boundary: BoundarySpec,
    topo: Topology<T>,
    marks: Vec<AtomicBool>,
    pool: ThreadPool,
    workers: usize,
    audit_enabled: bool,
    last_audit: Option<WriteAudit>,
    diagnostics: PhaseDiagnostics,
    step: u64,
}

impl<T: Real> TwoFluidSolver<T> {
    pub fn new(
        kind: LatticeKind,
        dims: Dims,
        params: CollisionParams,
        color: ColorParams,
        boundary: BoundarySpec,
        workers: usize,
    ) -> Result<Self> {
        color.validate()?;
        let mut fields = TwoFluidFieldSet::allocate(kind, dims)?;
        fields.flags = classify_nodes(&boundary, dims, kind)?.flags;
        Ok(Self {
            topo: Topology::new(&boundary, dims),
            marks: (0..dims.nodes()).map(|_| AtomicBool::new(false)).collect(),
            fields,
            params,
            color,
            boundary,
            pool: build_pool(workers)?,
            workers,
            audit_enabled: false,
            last_audit: None,
            diagnostics: PhaseDiagnostics::default(),
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

    pub fn color(&self) -> &ColorParams {
        &self.color
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

    pub fn fields(&self) -> &TwoFluidFieldSet<T> {
        &self.fields
    }

    /// Red and blue populations, e.g. to load a prepared state.
    pub fn populations_mut(&mut self) -> (&mut [Vec<T>], &mut [Vec<T>]) {
        (&mut self.fields.f_red, &mut self.fields.f_blue)
    }

    pub fn diagnostics(&self) -> PhaseDiagnostics {
        self.diagnostics
    }

    pub fn set_write_audit(&mut self, on: bool) {
        self.audit_enabled = on;
        if !on {
            self.last_audit = None;
        }
    }

    pub fn last_write_audit(&self) -> Option<WriteAudit> {
        self.last_audit
    }

    /// Sets each fluid node to the equilibrium of `init(coords) = (rho_R,
    /// rho_B, u)`, split between the colors by density fraction.
    pub fn initialize<F>(&mut self, init: F)
    where
        F: Fn([usize; 3]) -> (f64, f64, [f64; 3]),
    {
        let kind = self.kind();
        with_stencil!(kind, L => self.initialize_with::<L, F>(init));
        self.prepare();
    }

    /// Unit total density with phase field `phi(coords)` and velocity `u(coords)`.
    pub fn initialize_phase<P, U>(&mut self, phi: P, u: U)
    where
        P: Fn([usize; 3]) -> f64,
        U: Fn([usize; 3]) -> [f64; 3],
    {
        self.initialize(|x| {
            let p = phi(x).clamp(-1.0, 1.0);
            (0.5 * (1.0 + p), 0.5 * (1.0 - p), u(x))
        });
    }

    fn initialize_with<L: Stencil, F>(&mut self, init: F)
    where
        F: Fn([usize; 3]) -> (f64, f64, [f64; 3]),
    {
        let k = Consts::<T>::new::<L>(self.params.omega, self.params.rho0);
        let dims = self.fields.dims;
        for x in 0..dims.nodes() {
            let fluid = self.fields.flags[x].is_fluid();
            let (rr, rb, u) = if fluid { init(dims.coords(x)) } else { (0.0, 0.0, [0.0; 3]) };
            let rho = rr + rb;
            let frac = if rho > 0.0 { rr / rho } else { 0.0 };
            let u = [T::lit(u[0]), T::lit(u[1]), T::lit(u[2])];
            let uu = kinetic::<L, T>(&u, &k);
            for a in 0..L::Q {
                let g = if fluid { feq_dir::<L, T>(a, T::lit(rho), &u, uu, &k) } else { T::zero() };
                let red = T::lit(frac) * g;
                self.fields.f_red[a][x] = red;
                self.fields.f_blue[a][x] = g - red;
            }
        }
    }

    /// Phases 1 to 3: moments, gradient, near-contact flags and force.
    pub fn prepare(&mut self) {
        let kind = self.kind();
        with_stencil!(kind, L => {
            self.moments_phase::<L>();
            self.gradient_phase::<L>();
            self.nci_phase::<L>();
        });
    }

    /// Phase 4: collision, perturbation, recoloring and push.
    pub fn stream_collide(&mut self) {
        let kind = self.kind();
        with_stencil!(kind, L => self.push_phase::<L>());
    }

    pub fn step(&mut self) {
        self.prepare();
        self.stream_collide();
        self.step += 1;
    }

    pub fn run(&mut self, steps: u64) {
        for _ in 0..steps {
            self.step();
        }
    }

    fn moments_phase<L: Stencil>(&mut self) {
        let k = Consts::<T>::new::<L>(self.params.omega, self.params.rho0);
        let slack = T::lit(1.0 + PHI_SLACK);
        let TwoFluidFieldSet {
            dims,
            f_red,
            f_blue,
            rho,
            rho_red,
            rho_blue,
            mom,
            pineq,
            phi,
            flags,
            ..
        } = &mut self.fields;
        let nx = dims.nx;
        let (f_red, f_blue, flags): (&[Vec<T>], &[Vec<T>], &[NodeFlags]) = (f_red, f_blue, flags);
        let w_rho = SharedSlice::new(rho.as_mut_slice());
        let w_red = SharedSlice::new(rho_red.as_mut_slice());
        let w_blue = SharedSlice::new(rho_blue.as_mut_slice());
        let w_phi = SharedSlice::new(phi.as_mut_slice());
        let w_mom = shared_set(mom);
        let w_pi = shared_set(pineq);
        let (out_of_range, empty) = self.pool.install(|| {
            (0..dims.rows())
                .into_par_iter()
                .map(|row| {
                    let mut bad = (0usize, 0usize);
                    for x in row * nx..(row + 1) * nx {
                        if !flags[x].is_fluid() {
                            continue;
                        }
                        let mut g = [T::zero(); MAX_Q];
                        let mut rr = T::zero();
                        let mut rb = T::zero();
                        unroll!(19, a in 0, L::Q => {
                            let (r, b) = (f_red[a][x], f_blue[a][x]);
                            rr = rr + r;
                            rb = rb + b;
                            g[a] = r + b;
                        });
                        let m = node_moments::<L, T>(&g, &k);
                        let total = rr + rb;
                        let p = if total > T::zero() {
                            (rr - rb) / total
                        } else {
                            bad.1 += 1;
                            T::zero()
                        };
                        if p.abs() > slack {
                            bad.0 += 1;
                        }
                        // SAFETY: node x is visited by exactly one worker.
                        unsafe {
                            w_rho.write(x, m.rho);
                            w_red.write(x, rr);
                            w_blue.write(x, rb);
                            w_phi.write(x, p.max(-T::one()).min(T::one()));
                            unroll!(3, al in 0, L::D => {
                                w_mom[al].write(x, m.j[al]);
                            });
                            unroll!(6, q in 0, L::PAIRS.len() => {
                                w_pi[q].write(x, m.pineq[q]);
                            });
                        }
                    }
                    bad
                })
                .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1))
        });
        if out_of_range > 0 {
            log::warn!("step {}: phi outside [-1, 1] on {out_of_range} node(s), clamped", self.step);
        }
        if empty > 0 {
            log::warn!("step {}: {empty} fluid node(s) with zero density", self.step);
        }
        self.diagnostics.phi_out_of_range = out_of_range;
        self.diagnostics.empty_nodes = empty;
    }

    fn gradient_phase<L: Stencil>(&mut self) {
        let k = Consts::<T>::new::<L>(self.params.omega, self.params.rho0);
        let grid = Grid::<T> {
            dims: self.fields.dims,
            topo: self.topo.clone(),
            off: offsets::<L>(self.fields.dims),
        };
        let TwoFluidFieldSet {
            dims,
            phi,
            grad_phi,
            flags,
            ..
        } = &mut self.fields;
        let nx = dims.nx;
        let (phi, flags): (&[T], &[NodeFlags]) = (phi, flags);
        let w_grad = shared_set(grad_phi);
        self.pool.install(|| {
            (0..dims.rows()).into_par_iter().for_each(|row| {
                for x in row * nx..(row + 1) * nx {
                    if !flags[x].is_fluid() {
                        continue;
                    }
                    let g = grid.gradient::<L>(x, phi, flags, &k);
                    // SAFETY: node x is visited by exactly one worker.
                    unsafe {
                        for al in 0..L::D {
                            w_grad[al].write(x, g[al]);
                        }
                    }
                }
            });
        });
    }

    fn nci_phase<L: Stencil>(&mut self) {
        let active = self.color.nci_strength > 0.0;
        let grid = Grid::<T> {
            dims: self.fields.dims,
            topo: self.topo.clone(),
            off: offsets::<L>(self.fields.dims),
        };
        let reach = self.color.scan_reach;
        let bulk = T::lit(-1.0 + self.color.eps_bulk);
        let strength = T::lit(self.color.nci_strength);
        let marks = &self.marks;
        let TwoFluidFieldSet {
            dims,
            rho_red,
            phi,
            grad_phi,
            force,
            flags,
            ..
        } = &mut self.fields;
        let nx = dims.nx;
        let nodes = dims.nodes();
        if active {
            let (phi, flags_r): (&[T], &[NodeFlags]) = (phi, flags);
            self.pool.install(|| {
                marks.par_iter().for_each(|m| m.store(false, Ordering::Relaxed));
                // Marks are set idempotently from any number of scanning nodes.
                (0..dims.rows()).into_par_iter().for_each(|row| {
                    for x in row * nx..(row + 1) * nx {
                        if flags_r[x].is_fluid() && phi[x] < bulk {
                            grid.scan_from::<L>(x, phi, flags_r, bulk, reach, &|p| {
                                marks[p].store(true, Ordering::Relaxed)
                            });
                        }
                    }
                });
            });
        }
        // Each node updates only its own flag and force entries.
        let (rho_red, grad_phi): (&[T], &[Vec<T>]) = (rho_red, grad_phi);
        let w_flags = SharedSlice::new(flags.as_mut_slice());
        let w_force = shared_set(force);
        let (flagged, skipped) = self.pool.install(|| {
            (0..nodes)
                .into_par_iter()
                .with_min_len(4096)
                .map(|x| {
                    let marked = active && marks[x].load(Ordering::Relaxed);
                    let mut f = [T::zero(); 3];
                    let mut skipped = 0;
                    if marked {
                        let mut g = [T::zero(); 3];
                        for al in 0..L::D {
                            g[al] = grad_phi[al][x];
                        }
                        match nci_force_at(rho_red[x], &g, strength) {
                            Some(v) => f = v,
                            None => skipped = 1,
                        }
                    }
                    // SAFETY: x is written by this closure only and no other
                    // node's flag is read in this phase.
                    unsafe {
                        let old = w_flags.read(x);
                        let new = if marked { old | NodeFlags::NCI } else { old - NodeFlags::NCI };
                        w_flags.write(x, new);
                        for al in 0..L::D {
                            w_force[al].write(x, f[al]);
                        }
                    }
                    (usize::from(marked), skipped)
                })
                .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1))
        });
        if skipped > 0 {
            log::warn!("step {}: {skipped} near-contact node(s) with zero gradient skipped", self.step);
        }
        self.diagnostics.nci_flagged = flagged;
        self.diagnostics.nci_skipped = skipped;
    }

    fn push_phase<L: Stencil>(&mut self) {
        let k = Consts::<T>::new::<L>(self.params.omega, self.params.rho0);
        let cc = ColorConsts::<T>::new::<L>(&self.color, self.params.omega);
        let TwoFluidFieldSet {
            dims,
            f_red,
            f_blue,
            rho,
            rho_red,
            rho_blue,
            mom,
            pineq,
            phi,
            grad_phi,
            force,
            flags,
            ..
        } = &mut self.fields;
        let ctx = ColorPushCtx {
            dims: *dims,
            rho,
            rho_red,
            rho_blue,
            mom,
            pineq,
            phi,
            grad_phi,
            force,
            flags,
            topo: &self.topo,
            k,
            cc,
            off: offsets::<L>(*dims),
        };
        let nodes = dims.nodes();
        let red = PlainSink { f: shared_set(f_red) };
        let blue = PlainSink { f: shared_set(f_blue) };
        if self.audit_enabled {
            let cr = audit_counters(L::Q * nodes);
            let cb = audit_counters(L::Q * nodes);
            let sr = AuditSink {
                inner: red,
                counts: &cr,
                nodes,
            };
            let sb = AuditSink {
                inner: blue,
                counts: &cb,
                nodes,
            };
            self.pool.install(|| color_push_rows::<L, T, _>(&ctx, &sr, &sb));
            let ar = WriteAudit::from_counts(&cr, L::Q, flags);
            let ab = WriteAudit::from_counts(&cb, L::Q, flags);
            self.last_audit = Some(WriteAudit {
                max_writers: ar.max_writers.max(ab.max_writers),
                conflicts: ar.conflicts + ab.conflicts,
                missed: ar.missed + ab.missed,
                solid_writes: ar.solid_writes + ab.solid_writes,
            });
        } else {
            self.pool.install(|| color_push_rows::<L, T, _>(&ctx, &red, &blue));
        }
    }

    /// Current phase field, refreshed from the populations.
    pub fn phase_field(&mut self) -> &[T] {
        self.prepare();
        &self.fields.phi
    }

    /// Density, velocity and phase field from the current populations.
    pub fn macroscopic(&mut self) -> (Macroscopic, Vec<f64>) {
        self.prepare();
        let kind = self.kind();
        let m = with_stencil!(kind, L => {
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
                let mut j = [T::zero(); 3];
                for al in 0..L::D {
                    j[al] = self.fields.mom[al][x] + k.half * self.fields.force[al][x];
                }
                let u = velocity::<L, T>(&j, &k);
                out.rho[x] = self.fields.rho[x].as_f64();
                out.u[x] = [u[0].as_f64(), u[1].as_f64(), u[2].as_f64()];
            }
            out
        });
        let phi = self.fields.phi.iter().map(|p| p.as_f64()).collect();
        (m, phi)
    }

    /// Total red and blue mass over fluid nodes.
    pub fn color_masses(&self) -> (f64, f64) {
        let mut r = Neumaier::default();
        let mut b = Neumaier::default();
        for x in 0..self.fields.nodes() {
            if self.fields.flags[x].is_fluid() {
                for a in 0..self.fields.f_red.len() {
                    r.add(self.fields.f_red[a][x].as_f64());
                    b.add(self.fields.f_blue[a][x].as_f64());
                }
            }
        }
        (r.value(), b.value())
    }

    pub fn total_momentum(&self) -> [f64; 3] {
        let kind = self.kind();
        let (r, b) = with_stencil!(kind, L => (
            total_momentum::<L, T>(&self.fields.f_red, &self.fields.flags),
            total_momentum::<L, T>(&self.fields.f_blue, &self.fields.flags),
        ));
        [r[0] + b[0], r[1] + b[1], r[2] + b[2]]
    }

    pub fn check_finite(&self) -> Result<()> {
        for (name, set) in [("f_red", &self.fields.f_red), ("f_blue", &self.fields.f_blue)] {
            for fa in set {
                if let Some(x) = fa.iter().position(|v| !v.is_finite()) {
                    return Err(Error::NonFinite {
                        field: name,
                        step: self.step,
                        coords: self.fields.dims.coords(x),
                    });
                }
            }
        }
        Ok(())
    }

    pub fn state_hash(&self) -> u64 {
        hash_arrays(&self.fields.f_red) ^ hash_arrays(&self.fields.f_blue).rotate_left(1)
    }

    /// Nodes currently carrying the near-contact flag.
    pub fn nci_flagged(&self) -> Vec<usize> {
        (0..self.fields.nodes())
            .filter(|&x| self.fields.flags[x].contains(NodeFlags::NCI))
            .collect()
    }
}

struct ColorPushCtx<'a, T> {
    dims: Dims,
    rho: &'a [T],
    rho_red: &'a [T],
    rho_blue: &'a [T],
    mom: &'a [Vec<T>],
    pineq: &'a [Vec<T>],
    phi: &'a [T],
    grad_phi: &'a [Vec<T>],
    force: &'a [Vec<T>],
    flags: &'a [NodeFlags],
    topo: &'a Topology<T>,
    k: Consts<T>,
    cc: ColorConsts<T>,
    off: [isize; MAX_Q],
}

fn color_push_rows<L: Stencil, T: Real, S: Sink<T>>(ctx: &ColorPushCtx<'_, T>, red: &S, blue: &S) {
    let (nx, ny) = (ctx.dims.nx, ctx.dims.ny);
    let k = &ctx.k;
    let cc = &ctx.cc;
    (0..ctx.dims.rows()).into_par_iter().for_each(|row| {
        let (j, kz) = (row % ny, row / ny);
        let mut g = [T::zero(); MAX_Q];
        let mut fr = [T::zero(); MAX_Q];
        let mut fb = [T::zero(); MAX_Q];
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
            let mut fv = [T::zero(); 3];
            let mut grad = [T::zero(); 3];
            let mut forced = false;
            unroll!(3, al in 0, L::D => {
                m.j[al] = ctx.mom[al][x];
                fv[al] = ctx.force[al][x];
                forced |= fv[al] != T::zero();
                grad[al] = ctx.grad_phi[al][x];
            });
            unroll!(6, p in 0, L::PAIRS.len() => {
                m.pineq[p] = ctx.pineq[p][x];
            });
            collide_dirs::<L, T>(&m, forced.then_some(fv), k, &mut g);

            let (rr, rb) = (ctx.rho_red[x], ctx.rho_blue[x]);
            let total = rr + rb;
            let frac = if total > T::zero() { rr / total } else { T::zero() };
            let g2 = norm2::<L, T>(&grad);
            if is_interface(ctx.phi[x], g2, cc) && total > T::zero() {
                let gnorm = g2.sqrt();
                let inv = T::one() / gnorm;
                let kappa = cc.beta * rr * rb / total;
                unroll!(19, a in 0, L::Q => {
                    g[a] = g[a] + perturb_dir::<L, T>(a, &grad, g2, gnorm, k, cc);
                    fr[a] = recolor_dir(g[a], frac, kappa, k.t[a], cosine::<L, T>(a, &grad, inv, k));
                    fb[a] = g[a] - fr[a];
                });
            } else {
                unroll!(19, a in 0, L::Q => {
                    fr[a] = frac * g[a];
                    fb[a] = g[a] - fr[a];
                });
            }

            // SAFETY: same single-writer argument as the single-component push.
            unsafe {
                if flag.is_plain() {
                    unroll!(19, a in 0, L::Q => {
                        let t = (x as isize + ctx.off[a]) as usize;
                        red.put(a, t, fr[a]);
                        blue.put(a, t, fb[a]);
                    });
                } else {
                    for a in 0..L::Q {
                        match ctx.topo.resolve::<L>([i, j, kz], a, ctx.flags) {
                            Link::Stream { target, .. } => {
                                red.put(a, target, fr[a]);
                                blue.put(a, target, fb[a]);
                            }
                            Link::Bounce(None) => {
                                red.put(L::OPP[a], x, fr[a]);
                                blue.put(L::OPP[a], x, fb[a]);
                            }
                            Link::Bounce(Some(uw)) => {
                                let w = wall_term::<L, T>(a, &uw, k);
                                let wr = frac * w;
                                red.put(L::OPP[a], x, fr[a] - wr);
                                blue.put(L::OPP[a], x, fb[a] - (w - wr));
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
    use crate::lattice::make_descriptor;

    fn kinds() -> [LatticeKind; 2] {
        [LatticeKind::D2Q9, LatticeKind::D3Q19]
    }

    #[test]
    fn phase_field_examples() {
        assert_eq!(phase_field(1.0, 0.0), Some(1.0));
        assert_eq!(phase_field(0.5, 0.5), Some(0.0));
        assert_eq!(phase_field(0.75, 0.25), Some(0.5));
        assert_eq!(phase_field(0.0, 0.0), None);
    }

    #[test]
    fn color_params_validation() {
        assert!(ColorParams::default().validate().is_ok());
        let bad = ColorParams {
            beta: 0.0,
            eps_bulk: 0.5,
            ..Default::default()
        };
        match bad.validate() {
            Err(Error::ConfigErrors(e)) => assert_eq!(e.len(), 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn gradient_of_uniform_and_linear_fields() {
        let dims = Dims::new(12, 10, 1);
        let spec = BoundarySpec::periodic();
        let uniform = vec![0.3f64; dims.nodes()];
        for g in isotropic_gradient(LatticeKind::D2Q9, dims, &spec, &uniform).unwrap() {
            assert!(g.iter().all(|v| v.abs() < 1e-15));
        }
        let ramp: Vec<f64> = (0..dims.nodes()).map(|x| dims.coords(x)[0] as f64).collect();
        let grad = isotropic_gradient(LatticeKind::D2Q9, dims, &spec, &ramp).unwrap();
        for x in 0..dims.nodes() {
            let [i, _, _] = dims.coords(x);
            if (1..dims.nx - 1).contains(&i) {
                assert!((grad[x][0] - 1.0).abs() < 1e-13 && grad[x][1].abs() < 1e-13, "{:?}", grad[x]);
            }
        }
    }

    #[test]
    fn gradient_of_radial_field_is_radial() {
        let dims = Dims::cube(17);
        let c = 8.0;
        let phi: Vec<f64> = (0..dims.nodes())
            .map(|x| {
                let p = dims.coords(x).map(|v| v as f64 - c);
                (5.0 - (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt()).tanh()
            })
            .collect();
        let grad = isotropic_gradient(LatticeKind::D3Q19, dims, &BoundarySpec::periodic(), &phi).unwrap();
        for i in 2..15 {
            if i == 8 {
                continue;
            }
            let g = grad[dims.index(i, 8, 8)];
            assert!(g[1].abs() < 1e-12 && g[2].abs() < 1e-12, "{g:?}");
            assert!(g[0] * (i as f64 - c) < 0.0);
        }
    }

    #[test]
    fn squared_perturbation_conserves_mass_and_momentum() {
        for kind in kinds() {
            let d = make_descriptor(kind);
            let color = ColorParams::default();
            for grad in [[0.3, -0.1, 0.05], [1.0, 0.0, 0.0], [0.02, 0.07, -0.2]] {
                let om = perturbation(&d, grad, &color, 1.3);
                let mass: f64 = om.iter().sum();
                assert!(mass.abs() < 1e-14, "{kind}: {mass}");
                for al in 0..d.dim {
                    let p: f64 = om.iter().enumerate().map(|(a, v)| v * d.c[a][al] as f64).sum();
                    assert!(p.abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn linear_perturbation_loses_mass() {
        let d = make_descriptor(LatticeKind::D2Q9);
        let color = ColorParams {
            form: PerturbationForm::Linear,
            ..Default::default()
        };
        let grad = [0.2, 0.0, 0.0];
        let mass: f64 = perturbation(&d, grad, &color, 1.0).iter().sum();
        let expected = -color.amplitude(1.0) * 0.2 / 3.0;
        assert!((mass - expected).abs() < 1e-15, "{mass} vs {expected}");
    }

    #[test]
    fn perturbation_vanishes_without_gradient() {
        let d = make_descriptor(LatticeKind::D3Q19);
        assert!(perturbation(&d, [0.0; 3], &ColorParams::default(), 1.0).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn recolor_properties() {
        for kind in kinds() {
            let d = make_descriptor(kind);
            let g: Vec<f64> = d.t.iter().enumerate().map(|(a, t)| t * (1.0 + 0.01 * a as f64)).collect();
            let rho: f64 = g.iter().sum();
            let (rr, rb) = (0.3 * rho, 0.7 * rho);
            let grad = [0.1, -0.2, 0.05];
            let (red, blue) = recolor(&d, &g, rr, rb, grad, 0.7);
            for a in 0..d.q {
                assert!((red[a] + blue[a] - g[a]).abs() <= f64::EPSILON * g[a]);
            }
            let red_mass: f64 = red.iter().sum();
            assert!((red_mass - rr).abs() < 1e-14);
            let (plain, _) = recolor(&d, &g, rr, rb, grad, 1e-300);
            for a in 0..d.q {
                assert!((plain[a] - 0.3 * g[a]).abs() < 1e-15);
            }
            // the sharpening term moves red mass along grad phi
            let shift: Vec<f64> = red.iter().zip(&plain).map(|(r, p)| r - p).collect();
            assert!(shift.iter().sum::<f64>().abs() < 1e-15);
            let along: f64 = (0..d.q).map(|a| shift[a] * d.c[a][0] as f64).sum();
            assert!(along > 0.0);
        }
    }

    fn disk_phi(dims: Dims, centers: &[(f64, f64)], r: f64) -> Vec<f64> {
        (0..dims.nodes())
            .map(|x| {
                let [i, j, _] = dims.coords(x);
                let inside = centers
                    .iter()
                    .any(|&(cx, cy)| ((i as f64 - cx).powi(2) + (j as f64 - cy).powi(2)).sqrt() <= r);
                if inside {
                    1.0
                } else {
                    -1.0
                }
            })
            .collect()
    }

    #[test]
    fn nci_scan_examples() {
        let dims = Dims::square(64);
        let spec = BoundarySpec::periodic();
        let color = ColorParams::default();
        let uniform = vec![-1.0f64; dims.nodes()];
        assert!(!nci_scan(LatticeKind::D2Q9, dims, &spec, &uniform, &color).unwrap().contains(&true));
        let single = disk_phi(dims, &[(32.0, 32.0)], 10.0);
        assert!(!nci_scan(LatticeKind::D2Q9, dims, &spec, &single, &color).unwrap().contains(&true));
        // two disks with a 4-node film of continuous phase between them
        let pair = disk_phi(dims, &[(20.0, 32.0), (45.0, 32.0)], 10.0);
        let marks = nci_scan(LatticeKind::D2Q9, dims, &spec, &pair, &color).unwrap();
        assert!(marks[dims.index(30, 32, 0)] && marks[dims.index(35, 32, 0)]);
        assert!(marks.iter().enumerate().filter(|(_, &m)| m).all(|(x, _)| pair[x] > 0.0));
        assert!(!marks[dims.index(10, 32, 0)]);
    }

    #[test]
    fn nci_force_signs_and_monotonicity() {
        let dims = Dims::square(64);
        let spec = BoundarySpec::periodic();
        let color = ColorParams {
            nci_strength: 0.01,
            ..Default::default()
        };
        let (m0, _) = nci_force(&[false; 4], &[1.0; 4], &[[1.0, 0.0, 0.0]; 4], 0.01);
        assert!(m0.iter().all(|f| *f == [0.0; 3]));

        let mut forces = Vec::new();
        for gap in [3usize, 5, 7] {
            let (cx1, cx2) = (20.0, 20.0 + 20.0 + gap as f64 + 1.0);
            // smooth profile so densities near the film depend on the gap
            let phi: Vec<f64> = (0..dims.nodes())
                .map(|x| {
                    let [i, j, _] = dims.coords(x);
                    let d1 = 10.0 - ((i as f64 - cx1).powi(2) + (j as f64 - 32.0).powi(2)).sqrt();
                    let d2 = 10.0 - ((i as f64 - cx2).powi(2) + (j as f64 - 32.0).powi(2)).sqrt();
                    ((2.0 * d1).tanh() + 1.0) + ((2.0 * d2).tanh() + 1.0) - 1.0
                })
                .map(|p: f64| p.clamp(-1.0, 1.0))
                .collect();
            let marks = nci_scan(LatticeKind::D2Q9, dims, &spec, &phi, &color).unwrap();
            let grad = isotropic_gradient(LatticeKind::D2Q9, dims, &spec, &phi).unwrap();
            let rho_red: Vec<f64> = phi.iter().map(|p| 0.5 * (1.0 + p)).collect();
            let (f, skipped) = nci_force(&marks, &rho_red, &grad, color.nci_strength);
            assert_eq!(skipped, 0);
            let mid = (cx1 + cx2) / 2.0;
            let left: Vec<_> = (0..dims.nodes()).filter(|&x| marks[x] && (dims.coords(x)[0] as f64) < mid).collect();
            let right: Vec<_> = (0..dims.nodes()).filter(|&x| marks[x] && (dims.coords(x)[0] as f64) > mid).collect();
            assert!(!left.is_empty() && !right.is_empty(), "gap {gap}");
            assert!(left.iter().all(|&x| f[x][0] < 0.0), "left droplet pushed left");
            assert!(right.iter().all(|&x| f[x][0] > 0.0), "right droplet pushed right");
            let on_axis = |xs: &[usize]| xs.iter().map(|&x| f[x][0].abs()).fold(0.0, f64::max);
            forces.push(on_axis(&left));
        }
        assert!(forces[0] > forces[1] && forces[1] > forces[2], "{forces:?}");
    }

    fn droplet_solver(kind: LatticeKind, dims: Dims, color: ColorParams, workers: usize) -> TwoFluidSolver<f64> {
        let params = CollisionParams::new(1.0, 1.0).unwrap();
        let mut s = TwoFluidSolver::new(kind, dims, params, color, BoundarySpec::periodic(), workers).unwrap();
        let c = dims.as_array().map(|n| n as f64 / 2.0);
        let d = kind.dim();
        s.initialize_phase(
            |x| {
                let r2: f64 = (0..d).map(|a| (x[a] as f64 - c[a]).powi(2)).sum();
                (2.0 * (5.0 - r2.sqrt()) / 3.0).tanh()
            },
            |x| [0.01 * ((x[1] as f64) * 0.3).sin(), 0.0, 0.0],
        );
        s
    }

    #[test]
    fn color_masses_and_momentum_conserved() {
        for (kind, dims) in [(LatticeKind::D2Q9, Dims::square(24)), (LatticeKind::D3Q19, Dims::cube(14))] {
            let color = ColorParams {
                nci_strength: 0.0,
                ..Default::default()
            };
            let mut s = droplet_solver(kind, dims, color, 2);
            let (r0, b0) = s.color_masses();
            let p0 = s.total_momentum();
            s.run(50);
            let (r1, b1) = s.color_masses();
            assert!(((r1 - r0) / r0).abs() < 1e-12 && ((b1 - b0) / b0).abs() < 1e-12);
            let p1 = s.total_momentum();
            for al in 0..3 {
                assert!((p1[al] - p0[al]).abs() < 1e-12 * r0, "{p0:?} -> {p1:?}");
            }
            assert_eq!(s.diagnostics().phi_out_of_range, 0);
        }
    }

    #[test]
    fn two_fluid_writes_are_disjoint_and_deterministic() {
        let color = ColorParams {
            nci_strength: 0.02,
            ..Default::default()
        };
        let mut hashes = Vec::new();
        for workers in [1, 3] {
            let mut s = droplet_solver(LatticeKind::D3Q19, Dims::new(14, 12, 10), color, workers);
            s.set_write_audit(true);
            s.run(6);
            assert!(s.last_write_audit().unwrap().is_clean());
            hashes.push(s.state_hash());
        }
        assert_eq!(hashes[0], hashes[1]);
    }
}
