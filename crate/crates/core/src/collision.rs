//! Node-local physics of the regularized single-relaxation-time model.
//!
//! The post-collision population is rebuilt from the stored moments alone:
//!
//! ```text
//! f_a^pc = f_a^eq(rho, u) + (1 - omega) * t_a / (2 cs2^2) * (c_a c_a - cs2 I) : Pi_neq
//! f_a^eq = t_a * (rho + rho0 * (c_a.u / cs2 + (c_a.u)^2 / (2 cs2^2) - u.u / (2 cs2)))
//! ```
//!
//! with `u = rho*u / rho0` (incompressible equilibrium). The small inline
//! helpers below fix the floating-point evaluation order; the fused kernel,
//! the two-buffer reference and the public single-node functions all go
//! through them, which is what makes the two solvers bit-identical.

use crate::error::{Error, Result};
use crate::lattice::{unroll, LatticeDescriptor, Stencil, CS2, MAX_PAIRS, MAX_Q};
use crate::real::Real;

/// Relaxation specification; exactly one of the three is given in a config.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Relaxation {
    Omega(f64),
    Tau(f64),
    Nu(f64),
}

/// Kinematic viscosity `nu = cs2 (1/omega - 1/2)`.
pub fn viscosity(omega: f64) -> f64 {
    CS2 * (1.0 / omega - 0.5)
}

/// Resolves a relaxation spec to the rate omega, rejecting non-positive viscosity.
pub fn omega_from_tau_or_nu(spec: Relaxation) -> Result<f64> {
    let omega = match spec {
        Relaxation::Omega(w) => w,
        Relaxation::Tau(tau) => 1.0 / tau,
        Relaxation::Nu(nu) => 1.0 / (nu / CS2 + 0.5),
    };
    if !(omega > 0.0 && omega < 2.0) || !omega.is_finite() {
        return Err(Error::Relaxation(omega));
    }
    Ok(omega)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CollisionParams {
    pub omega: f64,
    pub rho0: f64,
}

impl CollisionParams {
    pub fn new(omega: f64, rho0: f64) -> Result<Self> {
        omega_from_tau_or_nu(Relaxation::Omega(omega))?;
        if !(rho0 > 0.0) {
            return Err(Error::Config(format!("rho0 must be positive, got {rho0}")));
        }
        Ok(Self { omega, rho0 })
    }

    pub fn from_relaxation(spec: Relaxation, rho0: f64) -> Result<Self> {
        Self::new(omega_from_tau_or_nu(spec)?, rho0)
    }

    pub fn tau(&self) -> f64 {
        1.0 / self.omega
    }

    pub fn viscosity(&self) -> f64 {
        viscosity(self.omega)
    }
}

/// Per-lattice constants converted once to the working type.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Consts<T> {
    pub t: [T; MAX_Q],
    /// `t_a / (2 cs2^2)`
    pub neq: [T; MAX_Q],
    /// `1 / |c_a|`, zero for the rest direction.
    pub inv_len: [T; MAX_Q],
    pub cs2: T,
    pub inv_cs2: T,
    /// `1 / (2 cs2)`
    pub half_inv_cs2: T,
    pub half: T,
    pub rho0: T,
    pub omega: T,
    /// `1 - omega`
    pub omc: T,
    /// `1 / omega`
    pub tau: T,
    /// `2 rho0 / cs2`, moving-wall term prefactor.
    pub wall: T,
}

impl<T: Real> Consts<T> {
    pub fn new<L: Stencil>(omega: f64, rho0: f64) -> Self {
        let mut t = [T::zero(); MAX_Q];
        let mut neq = [T::zero(); MAX_Q];
        let mut inv_len = [T::zero(); MAX_Q];
        for a in 0..L::Q {
            let w = L::W[a].to_f64();
            t[a] = T::lit(w);
            neq[a] = T::lit(w / (2.0 * CS2 * CS2));
            let c = L::C[a];
            let n2 = (c[0] * c[0] + c[1] * c[1] + c[2] * c[2]) as f64;
            inv_len[a] = if n2 > 0.0 { T::lit(1.0 / n2.sqrt()) } else { T::zero() };
        }
        Self {
            t,
            neq,
            inv_len,
            cs2: T::lit(CS2),
            inv_cs2: T::lit(1.0 / CS2),
            half_inv_cs2: T::lit(0.5 / CS2),
            half: T::lit(0.5),
            rho0: T::lit(rho0),
            omega: T::lit(omega),
            omc: T::lit(1.0 - omega),
            tau: T::lit(1.0 / omega),
            wall: T::lit(2.0 * rho0 / CS2),
        }
    }
}

/// `acc + c * v` for an integer lattice coefficient; zero coefficients add nothing.
#[inline(always)]
pub(crate) fn madd<T: Real>(acc: T, c: i32, v: T) -> T {
    match c {
        0 => acc,
        1 => acc + v,
        -1 => acc - v,
        _ => acc + T::lit(c as f64) * v,
    }
}

#[inline(always)]
pub(crate) fn dot_c<L: Stencil, T: Real>(a: usize, v: &[T; 3]) -> T {
    let c = L::C[a];
    let mut s = T::zero();
    unroll!(3, al in 0, L::D => {
        s = madd(s, c[al], v[al]);
    });
    s
}

/// Moments of one node: density, momentum density and non-equilibrium flux.
#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) struct NodeMoments<T> {
    pub rho: T,
    pub j: [T; 3],
    pub pineq: [T; MAX_PAIRS],
}

#[inline(always)]
pub(crate) fn velocity<L: Stencil, T: Real>(j: &[T; 3], k: &Consts<T>) -> [T; 3] {
    let mut u = [T::zero(); 3];
    for al in 0..L::D {
        u[al] = j[al] / k.rho0;
    }
    u
}

/// `u.u / (2 cs2)`
#[inline(always)]
pub(crate) fn kinetic<L: Stencil, T: Real>(u: &[T; 3], k: &Consts<T>) -> T {
    let mut s = T::zero();
    for al in 0..L::D {
        s = s + u[al] * u[al];
    }
    s * k.half_inv_cs2
}

#[inline(always)]
pub(crate) fn node_moments<L: Stencil, T: Real>(f: &[T; MAX_Q], k: &Consts<T>) -> NodeMoments<T> {
    let mut rho = f[0];
    unroll!(19, a in 1, L::Q => {
        rho = rho + f[a];
    });
    let mut j = [T::zero(); 3];
    unroll!(3, al in 0, L::D => {
        let mut s = T::zero();
        unroll!(19, a in 0, L::Q => {
            s = madd(s, L::C[a][al], f[a]);
        });
        j[al] = s;
    });
    let u = velocity::<L, T>(&j, k);
    let mut pineq = [T::zero(); MAX_PAIRS];
    unroll!(6, p in 0, L::PAIRS.len() => {
        let (al, be) = L::PAIRS[p];
        let mut s = T::zero();
        unroll!(19, a in 0, L::Q => {
            s = madd(s, L::C[a][al] * L::C[a][be], f[a]);
        });
        let eq = k.rho0 * u[al] * u[be];
        pineq[p] = if al == be { s - (k.cs2 * rho + eq) } else { s - eq };
    });
    NodeMoments { rho, j, pineq }
}

#[inline(always)]
pub(crate) fn feq_dir<L: Stencil, T: Real>(a: usize, rho: T, u: &[T; 3], uu: T, k: &Consts<T>) -> T {
    let cu = dot_c::<L, T>(a, u) * k.inv_cs2;
    k.t[a] * (rho + k.rho0 * (cu + k.half * cu * cu - uu))
}

/// `cs2 * tr(Pi_neq)`, shared by every direction of a node.
#[inline(always)]
pub(crate) fn trace_term<L: Stencil, T: Real>(pineq: &[T; MAX_PAIRS], k: &Consts<T>) -> T {
    let mut tr = pineq[0];
    for p in 1..L::D {
        tr = tr + pineq[p];
    }
    k.cs2 * tr
}

/// Hermite-projected non-equilibrium part `t_a / (2 cs2^2) Q_a : Pi_neq`.
#[inline(always)]
pub(crate) fn neq_dir<L: Stencil, T: Real>(
    a: usize,
    pineq: &[T; MAX_PAIRS],
    cs2_tr: T,
    k: &Consts<T>,
) -> T {
    let c = L::C[a];
    let mut s = T::zero() - cs2_tr;
    unroll!(3, al in 0, L::D => {
        if c[al] != 0 {
            s = s + pineq[al];
        }
    });
    let mut off = T::zero();
    unroll!(6, p in L::D, L::PAIRS.len() => {
        let (al, be) = L::PAIRS[p];
        off = madd(off, c[al] * c[be], pineq[p]);
    });
    k.neq[a] * (s + (off + off))
}

#[inline(always)]
pub(crate) fn post_dir<T: Real>(feq: T, neq: T, k: &Consts<T>) -> T {
    feq + k.omc * neq
}

/// Post-collision value with the equilibrium-velocity force shift:
/// `omega f_eq(u + tau F / rho0) + (1 - omega) (f_eq(u) + f_neq)`.
#[inline(always)]
pub(crate) fn post_dir_forced<T: Real>(feq_shift: T, feq: T, neq: T, k: &Consts<T>) -> T {
    k.omega * feq_shift + k.omc * (feq + neq)
}

#[inline(always)]
pub(crate) fn shifted_velocity<L: Stencil, T: Real>(u: &[T; 3], force: &[T; 3], k: &Consts<T>) -> [T; 3] {
    let mut us = *u;
    for al in 0..L::D {
        us[al] = u[al] + k.tau * force[al] / k.rho0;
    }
    us
}

/// Momentum handed to a moving wall, `2 t_a rho0 (c_a . u_w) / cs2`.
#[inline(always)]
pub(crate) fn wall_term<L: Stencil, T: Real>(a: usize, uw: &[T; 3], k: &Consts<T>) -> T {
    k.wall * k.t[a] * dot_c::<L, T>(a, uw)
}

/// Post-collision populations of one node from its stored moments, with an
/// optional body force applied through the equilibrium-velocity shift.
#[inline(always)]
pub(crate) fn collide_dirs<L: Stencil, T: Real>(
    m: &NodeMoments<T>,
    force: Option<[T; 3]>,
    k: &Consts<T>,
    post: &mut [T; MAX_Q],
) {
    let u = velocity::<L, T>(&m.j, k);
    let uu = kinetic::<L, T>(&u, k);
    let tr = trace_term::<L, T>(&m.pineq, k);
    match force {
        None => {
            unroll!(19, a in 1, L::Q => {
                post[a] = post_dir(
                    feq_dir::<L, T>(a, m.rho, &u, uu, k),
                    neq_dir::<L, T>(a, &m.pineq, tr, k),
                    k,
                );
            });
        }
        Some(fv) => {
            let us = shifted_velocity::<L, T>(&u, &fv, k);
            let uus = kinetic::<L, T>(&us, k);
            unroll!(19, a in 1, L::Q => {
                post[a] = post_dir_forced(
                    feq_dir::<L, T>(a, m.rho, &us, uus, k),
                    feq_dir::<L, T>(a, m.rho, &u, uu, k),
                    neq_dir::<L, T>(a, &m.pineq, tr, k),
                    k,
                );
            });
        }
    }
    // The rest population closes the mass balance. Computing it from its own
    // equilibrium would bias single precision, where the rounded weights do
    // not sum to one.
    let mut moving = post[1];
    unroll!(19, a in 2, L::Q => {
        moving = moving + post[a];
    });
    post[0] = m.rho - moving;
}

/// Calls `$body` with `$L` bound to the stencil type of a runtime lattice kind.
macro_rules! with_stencil {
    ($kind:expr, $L:ident => $body:expr) => {
        match $kind {
            $crate::lattice::LatticeKind::D2Q9 => {
                type $L = $crate::lattice::D2Q9;
                $body
            }
            $crate::lattice::LatticeKind::D3Q19 => {
                type $L = $crate::lattice::D3Q19;
                $body
            }
        }
    };
}
pub(crate) use with_stencil;

fn load<T: Real>(f: &[T]) -> [T; MAX_Q] {
    let mut buf = [T::zero(); MAX_Q];
    buf[..f.len()].copy_from_slice(f);
    buf
}

fn warn_speed<T: Real>(u: &[T; 3]) {
    let u2: f64 = u.iter().map(|v| v.as_f64() * v.as_f64()).sum();
    if u2 >= CS2 {
        log::warn!("equilibrium evaluated at |u| = {:.4} >= cs", u2.sqrt());
    }
}

/// Equilibrium population of direction `a`.
pub fn equilibrium<T: Real>(desc: &LatticeDescriptor, rho: T, rho0: T, u: [T; 3], a: usize) -> T {
    warn_speed(&u);
    with_stencil!(desc.kind, L => {
        let k = Consts::<T>::new::<L>(1.0, rho0.as_f64());
        let uu = kinetic::<L, T>(&u, &k);
        feq_dir::<L, T>(a, rho, &u, uu, &k)
    })
}

/// Macroscopic moments of one node's populations.
#[derive(Clone, Debug, PartialEq)]
pub struct Moments<T> {
    pub rho: T,
    /// Momentum density rho*u.
    pub j: [T; 3],
    /// Velocity `j / rho0`.
    pub u: [T; 3],
    /// Non-equilibrium flux in `Stencil::PAIRS` order.
    pub pineq: Vec<T>,
}

pub fn moments<T: Real>(desc: &LatticeDescriptor, f: &[T], rho0: T) -> Moments<T> {
    assert_eq!(f.len(), desc.q);
    with_stencil!(desc.kind, L => {
        let k = Consts::<T>::new::<L>(1.0, rho0.as_f64());
        let m = node_moments::<L, T>(&load(f), &k);
        Moments {
            rho: m.rho,
            j: m.j,
            u: velocity::<L, T>(&m.j, &k),
            pineq: m.pineq[..L::PAIRS.len()].to_vec(),
        }
    })
}

/// Hermite reconstruction of the non-equilibrium population of direction `a`.
pub fn hermite_neq<T: Real>(desc: &LatticeDescriptor, pineq: &[T], a: usize) -> T {
    with_stencil!(desc.kind, L => {
        let k = Consts::<T>::new::<L>(1.0, 1.0);
        let mut p = [T::zero(); MAX_PAIRS];
        p[..pineq.len()].copy_from_slice(pineq);
        let tr = trace_term::<L, T>(&p, &k);
        neq_dir::<L, T>(a, &p, tr, &k)
    })
}

/// Second moment `sum_a g_a c_a c_a` of an arbitrary set, in `PAIRS` order.
pub fn second_moment<T: Real>(desc: &LatticeDescriptor, g: &[T]) -> Vec<T> {
    with_stencil!(desc.kind, L => {
        L::PAIRS
            .iter()
            .map(|&(al, be)| {
                let mut s = T::zero();
                for a in 0..L::Q {
                    s = madd(s, L::C[a][al] * L::C[a][be], g[a]);
                }
                s
            })
            .collect()
    })
}

/// Projects an arbitrary non-equilibrium set onto the second-order Hermite
/// subspace spanned by its momentum flux.
pub fn project_neq<T: Real>(desc: &LatticeDescriptor, fneq: &[T]) -> Vec<T> {
    let pi = second_moment(desc, fneq);
    (0..desc.q).map(|a| hermite_neq(desc, &pi, a)).collect()
}

/// Regularized collision of one node without streaming.
pub fn collide_node<T: Real>(desc: &LatticeDescriptor, f: &[T], params: &CollisionParams) -> Vec<T> {
    with_stencil!(desc.kind, L => {
        let k = Consts::<T>::new::<L>(params.omega, params.rho0);
        let m = node_moments::<L, T>(&load(f), &k);
        let mut post = [T::zero(); MAX_Q];
        collide_dirs::<L, T>(&m, None, &k, &mut post);
        post[..L::Q]
            .to_vec()
    })
}
