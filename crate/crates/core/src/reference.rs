//! Two-buffer (A-B) reference solver used as a correctness oracle.
//!
//! Populations are stored node-major (`f[x * q + a]`). A step first collides
//! every node in place in buffer A, then streams A into B with its own link
//! resolution, then swaps. Node-local arithmetic goes through the same
//! helpers as the fused kernel, so matching runs agree bit for bit.

use crate::boundary::{wrap, BoundarySpec, FaceKind};
use crate::collision::{collide_dirs, node_moments, wall_term, with_stencil, CollisionParams, Consts};
use crate::error::Result;
use crate::fields::{Dims, Layout, MemoryLedger};
use crate::lattice::{LatticeKind, Stencil, MAX_Q};
use crate::real::Real;
use crate::solver::BodyForce;

pub struct ReferenceSolver<T> {
    kind: LatticeKind,
    dims: Dims,
    params: CollisionParams,
    periodic: [bool; 3],
    moving: [[Option<[T; 3]>; 2]; 3],
    solid: Vec<bool>,
    force: BodyForce<T>,
    fa: Vec<T>,
    fb: Vec<T>,
    step: u64,
}

impl<T: Real> ReferenceSolver<T> {
    pub fn new(kind: LatticeKind, dims: Dims, params: CollisionParams, boundary: &BoundarySpec) -> Result<Self> {
        dims.validate(kind)?;
        boundary.validate(kind, dims)?;
        let n = dims.nodes();
        let mut moving = [[None; 2]; 3];
        let mut periodic = [false; 3];
        for axis in 0..3 {
            periodic[axis] = boundary.faces[axis][0] == FaceKind::Periodic;
            for side in 0..2 {
                if let FaceKind::MovingWall(u) = boundary.faces[axis][side] {
                    moving[axis][side] = Some(u.map(T::lit));
                }
            }
        }
        Ok(Self {
            kind,
            dims,
            params,
            periodic,
            moving,
            solid: boundary.solid.clone().unwrap_or_else(|| vec![false; n]),
            force: BodyForce::None,
            fa: vec![T::zero(); n * kind.q()],
            fb: vec![T::zero(); n * kind.q()],
            step: 0,
        })
    }

    pub fn ledger(&self) -> MemoryLedger {
        MemoryLedger::new(self.kind, Layout::FlipFlop, self.dims.nodes(), T::BYTES)
    }

    pub fn set_body_force(&mut self, force: BodyForce<T>) {
        self.force = force;
    }

    pub fn time_step(&self) -> u64 {
        self.step
    }

    /// Loads populations given as one array per direction.
    pub fn load_soa(&mut self, f: &[Vec<T>]) {
        let q = self.kind.q();
        for (a, fa) in f.iter().enumerate().take(q) {
            for (x, &v) in fa.iter().enumerate() {
                self.fa[x * q + a] = v;
            }
        }
    }

    /// Current populations, one array per direction.
    pub fn to_soa(&self) -> Vec<Vec<T>> {
        let q = self.kind.q();
        (0..q)
            .map(|a| (0..self.dims.nodes()).map(|x| self.fa[x * q + a]).collect())
            .collect()
    }

    /// Populations of node `x`.
    pub fn node(&self, x: usize) -> &[T] {
        let q = self.kind.q();
        &self.fa[x * q..(x + 1) * q]
    }

    pub fn step(&mut self) {
        let kind = self.kind;
        with_stencil!(kind, L => {
            self.collide::<L>();
            self.stream::<L>();
        });
        std::mem::swap(&mut self.fa, &mut self.fb);
        self.step += 1;
    }

    pub fn run(&mut self, steps: u64) {
        for _ in 0..steps {
            self.step();
        }
    }

    fn collide<L: Stencil>(&mut self) {
        let k = Consts::<T>::new::<L>(self.params.omega, self.params.rho0);
        let q = L::Q;
        let mut post = [T::zero(); MAX_Q];
        for x in 0..self.dims.nodes() {
            if self.solid[x] {
                continue;
            }
            let node = &mut self.fa[x * q..(x + 1) * q];
            let mut fx = [T::zero(); MAX_Q];
            fx[..q].copy_from_slice(node);
            let m = node_moments::<L, T>(&fx, &k);
            collide_dirs::<L, T>(&m, self.force.at(x), &k, &mut post);
            node.copy_from_slice(&post[..q]);
        }
    }

    fn stream<L: Stencil>(&mut self) {
        let k = Consts::<T>::new::<L>(self.params.omega, self.params.rho0);
        let q = L::Q;
        let n = self.dims.as_array();
        self.fb.iter_mut().for_each(|v| *v = T::zero());
        for x in 0..self.dims.nodes() {
            if self.solid[x] {
                continue;
            }
            let coords = self.dims.coords(x);
            for a in 0..q {
                let v = self.fa[x * q + a];
                let mut t = [0usize; 3];
                let mut wall: Option<Option<[T; 3]>> = None;
                for axis in 0..3 {
                    let s = coords[axis] as isize + L::C[a][axis] as isize;
                    if (0..n[axis] as isize).contains(&s) {
                        t[axis] = s as usize;
                    } else if self.periodic[axis] {
                        t[axis] = wrap(s, n[axis]);
                    } else {
                        let face = self.moving[axis][usize::from(s >= 0)];
                        wall = Some(wall.flatten().or(face));
                    }
                }
                let target = self.dims.index(t[0], t[1], t[2]);
                match wall {
                    Some(Some(uw)) => self.fb[x * q + L::OPP[a]] = v - wall_term::<L, T>(a, &uw, &k),
                    Some(None) => self.fb[x * q + L::OPP[a]] = v,
                    None if self.solid[target] => self.fb[x * q + L::OPP[a]] = v,
                    None => self.fb[target * q + a] = v,
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::Solver;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_state(kind: LatticeKind, dims: Dims, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t: Vec<f64> = crate::lattice::make_descriptor(kind).t;
        t.iter()
            .map(|&w| (0..dims.nodes()).map(|_| w * (1.0 + 0.1 * rng.gen_range(-1.0..1.0))).collect())
            .collect()
    }

    fn compare(kind: LatticeKind, dims: Dims, boundary: BoundarySpec, force: BodyForce<f64>, steps: u64) {
        let params = CollisionParams::new(1.6, 1.0).unwrap();
        let mut fused = Solver::<f64>::new(kind, dims, params, boundary.clone(), 2).unwrap();
        let mut oracle = ReferenceSolver::<f64>::new(kind, dims, params, &boundary).unwrap();
        let mut state = random_state(kind, dims, 17);
        if let Some(mask) = &boundary.solid {
            for fa in state.iter_mut() {
                for (v, &s) in fa.iter_mut().zip(mask) {
                    if s {
                        *v = 0.0;
                    }
                }
            }
        }
        fused.populations_mut().clone_from_slice(&state);
        oracle.load_soa(&state);
        fused.set_body_force(force.clone());
        oracle.set_body_force(force);
        for _ in 0..steps {
            fused.step();
            oracle.step();
        }
        let got = oracle.to_soa();
        for (a, (fa, ra)) in fused.fields().f.iter().zip(&got).enumerate() {
            for (x, (u, v)) in fa.iter().zip(ra).enumerate() {
                assert_eq!(u.to_bits(), v.to_bits(), "{kind} dir {a} node {:?}", dims.coords(x));
            }
        }
    }

    #[test]
    fn periodic_box_bit_identical() {
        compare(LatticeKind::D2Q9, Dims::square(16), BoundarySpec::periodic(), BodyForce::None, 10);
        compare(LatticeKind::D3Q19, Dims::new(8, 6, 5), BoundarySpec::periodic(), BodyForce::None, 4);
    }

    #[test]
    fn walls_and_lid_bit_identical() {
        compare(
            LatticeKind::D2Q9,
            Dims::new(12, 9, 1),
            BoundarySpec::lid_driven(LatticeKind::D2Q9, 0.08),
            BodyForce::None,
            10,
        );
        compare(
            LatticeKind::D3Q19,
            Dims::new(7, 6, 5),
            BoundarySpec::lid_driven(LatticeKind::D3Q19, 0.05),
            BodyForce::None,
            4,
        );
    }

    #[test]
    fn solid_mask_and_force_bit_identical() {
        let dims = Dims::square(12);
        let mut mask = vec![false; dims.nodes()];
        for i in 3..7 {
            mask[dims.index(i, 5, 0)] = true;
        }
        let spec = BoundarySpec::channel(0.0).with_solid(mask);
        compare(LatticeKind::D2Q9, dims, spec, BodyForce::Uniform([1e-4, -2e-5, 0.0]), 8);
    }

    #[test]
    fn equilibrium_unchanged() {
        let dims = Dims::square(8);
        let params = CollisionParams::new(0.9, 1.0).unwrap();
        let mut r = ReferenceSolver::<f64>::new(LatticeKind::D2Q9, dims, params, &BoundarySpec::periodic()).unwrap();
        let t = crate::lattice::make_descriptor(LatticeKind::D2Q9).t;
        let state: Vec<Vec<f64>> = t.iter().map(|&w| vec![w; dims.nodes()]).collect();
        r.load_soa(&state);
        r.run(5);
        for (a, fa) in r.to_soa().iter().enumerate() {
            assert!(fa.iter().all(|&v| (v - t[a]).abs() < 1e-15));
        }
    }

    #[test]
    fn flip_flop_ledger() {
        let params = CollisionParams::new(1.0, 1.0).unwrap();
        let r = ReferenceSolver::<f32>::new(LatticeKind::D3Q19, Dims::cube(4), params, &BoundarySpec::periodic()).unwrap();
        assert_eq!(r.ledger().arrays_per_node, 42);
    }
}
