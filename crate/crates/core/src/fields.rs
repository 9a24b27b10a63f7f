//! Structure-of-arrays storage for every per-node quantity.
//!
//! Linear node order is x-fastest: `index = i + nx * (j + ny * k)`. Two
//! dimensional grids use `nz = 1`.

use bitflags::bitflags;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::LatticeKind;
use crate::real::Real;

/// Smallest admissible extent along any active axis.
pub const MIN_EXTENT: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Dims {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
}

impl Dims {
    pub const fn new(nx: usize, ny: usize, nz: usize) -> Self {
        Self { nx, ny, nz }
    }

    pub const fn square(n: usize) -> Self {
        Self::new(n, n, 1)
    }

    pub const fn cube(n: usize) -> Self {
        Self::new(n, n, n)
    }

    pub fn as_array(&self) -> [usize; 3] {
        [self.nx, self.ny, self.nz]
    }

    pub fn nodes(&self) -> usize {
        self.nx * self.ny * self.nz
    }

    /// Number of x-rows, the unit of work handed to parallel workers.
    pub fn rows(&self) -> usize {
        self.ny * self.nz
    }

    #[inline(always)]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        debug_assert!(
            i < self.nx && j < self.ny && k < self.nz,
            "node ({i},{j},{k}) outside {self:?}"
        );
        i + self.nx * (j + self.ny * k)
    }

    pub fn checked_index(&self, i: usize, j: usize, k: usize) -> Result<usize> {
        if i < self.nx && j < self.ny && k < self.nz {
            Ok(self.index(i, j, k))
        } else {
            Err(Error::OutOfRange {
                coords: [i, j, k],
                dims: *self,
            })
        }
    }

    #[inline(always)]
    pub fn coords(&self, idx: usize) -> [usize; 3] {
        let i = idx % self.nx;
        let rest = idx / self.nx;
        [i, rest % self.ny, rest / self.ny]
    }

    /// Validates extents for a lattice: every active axis needs at least
    /// [`MIN_EXTENT`] nodes, and 2D lattices require `nz == 1`.
    pub fn validate(&self, kind: LatticeKind) -> Result<()> {
        let active = match kind {
            LatticeKind::D2Q9 => {
                if self.nz != 1 {
                    return Err(Error::Config(format!(
                        "a 2D lattice needs nz = 1, got {}",
                        self.nz
                    )));
                }
                &[self.nx, self.ny][..]
            }
            LatticeKind::D3Q19 => &[self.nx, self.ny, self.nz][..],
        };
        if active.iter().any(|&n| n < MIN_EXTENT) {
            return Err(Error::DimensionUnderflow {
                dims: *self,
                min: MIN_EXTENT,
            });
        }
        Ok(())
    }
}

impl std::fmt::Display for Dims {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.nz == 1 {
            write!(f, "{}x{}", self.nx, self.ny)
        } else {
            write!(f, "{}x{}x{}", self.nx, self.ny, self.nz)
        }
    }
}

/// Free-function form of [`Dims::index`].
#[inline(always)]
pub fn index(i: usize, j: usize, k: usize, dims: Dims) -> usize {
    dims.index(i, j, k)
}

bitflags! {
    /// Per-node tags, one byte per node.
    ///
    /// A node is either solid or fluid. The link bits mark fluid nodes with
    /// at least one link that does not stream to a plain fluid neighbor; the
    /// fused kernel takes its fast path only when none of them is set.
    #[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
    pub struct NodeFlags: u8 {
        const SOLID = 1;
        /// Link into a stationary wall face or solid node.
        const WALL = 1 << 1;
        /// Link into a moving wall face.
        const MOVING_WALL = 1 << 2;
        /// Link crossing a periodic seam.
        const WRAP = 1 << 3;
        /// Interface node selected for the near-contact repulsion.
        const NCI = 1 << 4;
    }
}

impl NodeFlags {
    pub const LINKS: NodeFlags = NodeFlags::WALL
        .union(NodeFlags::MOVING_WALL)
        .union(NodeFlags::WRAP);

    #[inline(always)]
    pub fn is_fluid(self) -> bool {
        !self.contains(NodeFlags::SOLID)
    }

    /// True when every link of the node streams to an in-range fluid node.
    #[inline(always)]
    pub fn is_plain(self) -> bool {
        !self.intersects(NodeFlags::LINKS.union(NodeFlags::SOLID))
    }
}

/// Storage layout whose footprint a ledger describes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Layout {
    /// One distribution set plus rho, rho*u and the non-equilibrium flux.
    ThreadSafe,
    /// Two distribution sets plus rho and u (A-B scheme).
    FlipFlop,
    /// Color-gradient layout: two color sets plus macroscopic and interface fields.
    TwoFluid,
}

/// Floating arrays per node for a layout. Flag bytes are not counted.
pub fn arrays_per_node(kind: LatticeKind, layout: Layout) -> usize {
    let q = kind.q();
    let d = kind.dim();
    let p = kind.pairs();
    match layout {
        Layout::ThreadSafe => q + 1 + d + p,
        Layout::FlipFlop => 2 * q + 1 + d,
        // fR, fB, rho, rhoR, rhoB, rho*u, Pi_neq, phi, grad phi, force
        Layout::TwoFluid => 2 * q + 3 + d + p + 1 + d + d,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MemoryLedger {
    pub kind: LatticeKind,
    pub layout: Layout,
    pub nodes: usize,
    pub arrays_per_node: usize,
    pub bytes_per_element: usize,
    pub bytes_per_node: usize,
    pub total_bytes: u64,
}

impl MemoryLedger {
    pub fn new(kind: LatticeKind, layout: Layout, nodes: usize, bytes_per_element: usize) -> Self {
        let arrays = arrays_per_node(kind, layout);
        let bytes_per_node = arrays * bytes_per_element;
        Self {
            kind,
            layout,
            nodes,
            arrays_per_node: arrays,
            bytes_per_element,
            bytes_per_node,
            total_bytes: bytes_per_node as u64 * nodes as u64,
        }
    }
}

/// Thread-safe layout against the flip-flop layout it replaces.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MemoryReport {
    pub thread_safe: MemoryLedger,
    pub flip_flop: MemoryLedger,
    pub saving_bytes_per_node: usize,
    pub saving_total_bytes: u64,
}

pub fn memory_report(kind: LatticeKind, bytes_per_element: usize, nodes: usize) -> MemoryReport {
    let thread_safe = MemoryLedger::new(kind, Layout::ThreadSafe, nodes, bytes_per_element);
    let flip_flop = MemoryLedger::new(kind, Layout::FlipFlop, nodes, bytes_per_element);
    let saving = flip_flop.bytes_per_node - thread_safe.bytes_per_node;
    MemoryReport {
        thread_safe,
        flip_flop,
        saving_bytes_per_node: saving,
        saving_total_bytes: saving as u64 * nodes as u64,
    }
}

pub(crate) fn zeroed<T: Real>(n: usize) -> Result<Vec<T>> {
    let mut v = Vec::new();
    v.try_reserve_exact(n).map_err(|e| Error::Allocation {
        bytes: n.saturating_mul(T::BYTES),
        reason: e.to_string(),
    })?;
    v.resize(n, T::zero());
    Ok(v)
}

fn zeroed_set<T: Real>(count: usize, n: usize) -> Result<Vec<Vec<T>>> {
    (0..count).map(|_| zeroed(n)).collect()
}

/// Single-component fields for the fused stream-collide scheme.
#[derive(Clone, Debug)]
pub struct FieldSet<T> {
    pub dims: Dims,
    pub kind: LatticeKind,
    /// One array per direction.
    pub f: Vec<Vec<T>>,
    pub rho: Vec<T>,
    /// Momentum density rho*u, one array per axis.
    pub mom: Vec<Vec<T>>,
    /// Non-equilibrium momentum flux, components in `Stencil::PAIRS` order.
    pub pineq: Vec<Vec<T>>,
    pub flags: Vec<NodeFlags>,
    pub ledger: MemoryLedger,
}

impl<T: Real> FieldSet<T> {
    pub fn allocate(kind: LatticeKind, dims: Dims) -> Result<Self> {
        dims.validate(kind)?;
        let n = dims.nodes();
        let fields = Self {
            dims,
            kind,
            f: zeroed_set(kind.q(), n)?,
            rho: zeroed(n)?,
            mom: zeroed_set(kind.dim(), n)?,
            pineq: zeroed_set(kind.pairs(), n)?,
            flags: vec![NodeFlags::empty(); n],
            ledger: MemoryLedger::new(kind, Layout::ThreadSafe, n, T::BYTES),
        };
        debug_assert_eq!(fields.float_arrays(), fields.ledger.arrays_per_node);
        Ok(fields)
    }

    /// Number of floating arrays actually held.
    pub fn float_arrays(&self) -> usize {
        self.f.len() + 1 + self.mom.len() + self.pineq.len()
    }

    pub fn nodes(&self) -> usize {
        self.dims.nodes()
    }

    /// Distribution values of node `idx`.
    pub fn node_populations(&self, idx: usize) -> Vec<T> {
        self.f.iter().map(|fa| fa[idx]).collect()
    }
}

/// Color-gradient fields: two evolving distribution sets sharing one set of
/// macroscopic arrays computed from their sum.
#[derive(Clone, Debug)]
pub struct TwoFluidFieldSet<T> {
    pub dims: Dims,
    pub kind: LatticeKind,
    pub f_red: Vec<Vec<T>>,
    pub f_blue: Vec<Vec<T>>,
    pub rho: Vec<T>,
    pub rho_red: Vec<T>,
    pub rho_blue: Vec<T>,
    pub mom: Vec<Vec<T>>,
    pub pineq: Vec<Vec<T>>,
    pub phi: Vec<T>,
    pub grad_phi: Vec<Vec<T>>,
    /// Near-contact repulsion, zero away from flagged nodes.
    pub force: Vec<Vec<T>>,
    pub flags: Vec<NodeFlags>,
    pub ledger: MemoryLedger,
}

impl<T: Real> TwoFluidFieldSet<T> {
    pub fn allocate(kind: LatticeKind, dims: Dims) -> Result<Self> {
        dims.validate(kind)?;
        let n = dims.nodes();
        let d = kind.dim();
        let fields = Self {
            dims,
            kind,
            f_red: zeroed_set(kind.q(), n)?,
            f_blue: zeroed_set(kind.q(), n)?,
            rho: zeroed(n)?,
            rho_red: zeroed(n)?,
            rho_blue: zeroed(n)?,
            mom: zeroed_set(d, n)?,
            pineq: zeroed_set(kind.pairs(), n)?,
            phi: zeroed(n)?,
            grad_phi: zeroed_set(d, n)?,
            force: zeroed_set(d, n)?,
            flags: vec![NodeFlags::empty(); n],
            ledger: MemoryLedger::new(kind, Layout::TwoFluid, n, T::BYTES),
        };
        debug_assert_eq!(fields.float_arrays(), fields.ledger.arrays_per_node);
        Ok(fields)
    }

    pub fn float_arrays(&self) -> usize {
        self.f_red.len()
            + self.f_blue.len()
            + 3
            + self.mom.len()
            + self.pineq.len()
            + 1
            + self.grad_phi.len()
            + self.force.len()
    }

    pub fn nodes(&self) -> usize {
        self.dims.nodes()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn index_examples() {
        assert_eq!(index(0, 0, 0, Dims::new(16, 16, 1)), 0);
        assert_eq!(index(1, 0, 0, Dims::new(16, 16, 1)), 1);
        assert_eq!(index(0, 1, 2, Dims::new(4, 3, 5)), 28);
    }

    #[test]
    fn index_round_trips_on_small_grid() {
        let dims = Dims::new(4, 3, 2);
        let mut seen = vec![false; dims.nodes()];
        for k in 0..2 {
            for j in 0..3 {
                for i in 0..4 {
                    let idx = dims.index(i, j, k);
                    assert!(!seen[idx]);
                    seen[idx] = true;
                    assert_eq!(dims.coords(idx), [i, j, k]);
                }
            }
        }
        assert!(seen.iter().all(|&s| s));
    }

    #[test]
    fn checked_index_rejects_out_of_range() {
        let dims = Dims::new(4, 3, 2);
        assert!(dims.checked_index(4, 0, 0).is_err());
        assert!(dims.checked_index(0, 3, 0).is_err());
        assert!(dims.checked_index(0, 0, 2).is_err());
        assert_eq!(dims.checked_index(3, 2, 1).unwrap(), 23);
    }

    proptest! {
        #[test]
        fn coords_inverts_index(nx in 1usize..20, ny in 1usize..20, nz in 1usize..6, seed in 0usize..10_000) {
            let dims = Dims::new(nx, ny, nz);
            let idx = seed % dims.nodes();
            let [i, j, k] = dims.coords(idx);
            prop_assert_eq!(dims.index(i, j, k), idx);
        }
    }

    #[test]
    fn single_component_array_counts() {
        let f2 = FieldSet::<f32>::allocate(LatticeKind::D2Q9, Dims::square(8)).unwrap();
        assert_eq!(f2.ledger.arrays_per_node, 15);
        assert_eq!(f2.float_arrays(), 15);
        let f3 = FieldSet::<f32>::allocate(LatticeKind::D3Q19, Dims::cube(4)).unwrap();
        assert_eq!(f3.ledger.arrays_per_node, 29);
        assert_eq!(f3.float_arrays(), 29);
        assert_eq!(f3.ledger.bytes_per_node, 29 * 4);
    }

    #[test]
    fn flip_flop_array_counts() {
        assert_eq!(arrays_per_node(LatticeKind::D2Q9, Layout::FlipFlop), 21);
        assert_eq!(arrays_per_node(LatticeKind::D3Q19, Layout::FlipFlop), 42);
    }

    #[test]
    fn array_count_formula_for_every_lattice() {
        for kind in [LatticeKind::D2Q9, LatticeKind::D3Q19] {
            let d = kind.dim();
            assert_eq!(
                arrays_per_node(kind, Layout::ThreadSafe),
                kind.q() + 1 + d + d * (d + 1) / 2
            );
        }
    }

    #[test]
    fn two_fluid_ledger_matches_allocation() {
        let f = TwoFluidFieldSet::<f64>::allocate(LatticeKind::D3Q19, Dims::cube(4)).unwrap();
        assert_eq!(f.float_arrays(), f.ledger.arrays_per_node);
        let f = TwoFluidFieldSet::<f64>::allocate(LatticeKind::D2Q9, Dims::square(4)).unwrap();
        assert_eq!(f.float_arrays(), f.ledger.arrays_per_node);
    }

    #[test]
    fn memory_saving_per_node() {
        let r3 = memory_report(LatticeKind::D3Q19, 4, 1);
        assert_eq!(r3.saving_bytes_per_node, 52);
        let r2 = memory_report(LatticeKind::D2Q9, 4, 1);
        assert_eq!(r2.saving_bytes_per_node, 24);
        let big = memory_report(LatticeKind::D3Q19, 4, 1_000_000_000);
        assert_eq!(big.saving_total_bytes, 52_000_000_000);
    }

    #[test]
    fn allocation_rejects_small_or_mismatched_dims() {
        assert!(matches!(
            FieldSet::<f64>::allocate(LatticeKind::D2Q9, Dims::new(3, 8, 1)),
            Err(Error::DimensionUnderflow { .. })
        ));
        assert!(FieldSet::<f64>::allocate(LatticeKind::D2Q9, Dims::new(8, 8, 2)).is_err());
        assert!(FieldSet::<f64>::allocate(LatticeKind::D3Q19, Dims::new(8, 8, 1)).is_err());
    }

    #[test]
    fn allocation_zero_initializes() {
        let f = FieldSet::<f64>::allocate(LatticeKind::D2Q9, Dims::square(4)).unwrap();
        assert!(f.f.iter().flatten().all(|&v| v == 0.0));
        assert!(f.rho.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn node_flag_partition() {
        assert!(NodeFlags::empty().is_fluid());
        assert!(NodeFlags::empty().is_plain());
        assert!(!NodeFlags::SOLID.is_fluid());
        assert!(!NodeFlags::WRAP.is_plain());
        assert!(NodeFlags::NCI.is_plain());
    }
}
