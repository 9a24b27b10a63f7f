//! Wall, moving-wall and periodic closures.
//!
//! Walls sit half-way between the outermost node layer and the (absent)
//! node beyond it, so an `n`-node axis closed by two walls spans a physical
//! length `n`. Solid nodes from a mask behave the same way: the wall is
//! half-way along every link that points into them.
//!
//! Bounce-back is fused into the push: a population whose target lies
//! beyond a wall is written back into the opposite slot of its own node,
//!
//! ```text
//! f_opp(a)(x) <- f_a^pc(x) - 2 t_a rho0 (c_a . u_w) / cs2
//! ```
//!
//! That slot has no other writer, because its natural source `x + c_a` is
//! not a fluid node.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{Dims, NodeFlags};
use crate::lattice::{LatticeKind, Stencil, CS2};
use crate::real::Real;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FaceKind {
    Periodic,
    NoSlipWall,
    MovingWall([f64; 3]),
}

impl FaceKind {
    pub fn is_periodic(&self) -> bool {
        matches!(self, FaceKind::Periodic)
    }
}

/// Face names in `[axis][side]` order, side 0 = min, side 1 = max.
pub const FACE_NAMES: [[&str; 2]; 3] = [["xmin", "xmax"], ["ymin", "ymax"], ["zmin", "zmax"]];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundarySpec {
    /// `faces[axis][side]`
    pub faces: [[FaceKind; 2]; 3],
    /// Optional solid mask, one entry per node in linear order.
    #[serde(skip)]
    pub solid: Option<Vec<bool>>,
}

impl Default for BoundarySpec {
    fn default() -> Self {
        Self::periodic()
    }
}

impl BoundarySpec {
    pub fn periodic() -> Self {
        Self {
            faces: [[FaceKind::Periodic; 2]; 3],
            solid: None,
        }
    }

    /// Stationary walls on every face of the active axes.
    pub fn closed_box(kind: LatticeKind) -> Self {
        let mut spec = Self::periodic();
        for axis in 0..kind.dim() {
            spec.faces[axis] = [FaceKind::NoSlipWall; 2];
        }
        spec
    }

    /// Closed box whose `ymax` face slides with `u_lid` along x.
    pub fn lid_driven(kind: LatticeKind, u_lid: f64) -> Self {
        let mut spec = Self::closed_box(kind);
        spec.faces[1][1] = FaceKind::MovingWall([u_lid, 0.0, 0.0]);
        spec
    }

    /// Periodic along x (and z), walls at `ymin`/`ymax`; the `ymax` wall
    /// moves with `u_top` along x.
    pub fn channel(u_top: f64) -> Self {
        let mut spec = Self::periodic();
        spec.faces[1][0] = FaceKind::NoSlipWall;
        spec.faces[1][1] = if u_top == 0.0 {
            FaceKind::NoSlipWall
        } else {
            FaceKind::MovingWall([u_top, 0.0, 0.0])
        };
        spec
    }

    pub fn with_solid(mut self, solid: Vec<bool>) -> Self {
        self.solid = Some(solid);
        self
    }

    pub fn is_periodic(&self, axis: usize) -> bool {
        self.faces[axis][0].is_periodic()
    }

    pub fn validate(&self, kind: LatticeKind, dims: Dims) -> Result<()> {
        let cs = CS2.sqrt();
        for axis in 0..3 {
            let [lo, hi] = self.faces[axis];
            if lo.is_periodic() != hi.is_periodic() {
                return Err(Error::Boundary(format!(
                    "periodic face {} needs a periodic partner {}",
                    if lo.is_periodic() { FACE_NAMES[axis][0] } else { FACE_NAMES[axis][1] },
                    if lo.is_periodic() { FACE_NAMES[axis][1] } else { FACE_NAMES[axis][0] },
                )));
            }
            for (side, face) in [lo, hi].iter().enumerate() {
                if let FaceKind::MovingWall(u) = face {
                    let speed = (u[0] * u[0] + u[1] * u[1] + u[2] * u[2]).sqrt();
                    if speed >= cs {
                        return Err(Error::Boundary(format!(
                            "wall {} moves at {speed:.4}, not below the sound speed {cs:.4}",
                            FACE_NAMES[axis][side]
                        )));
                    }
                    if u[axis] != 0.0 {
                        return Err(Error::Boundary(format!(
                            "wall {} must move tangentially",
                            FACE_NAMES[axis][side]
                        )));
                    }
                }
            }
        }
        if kind.dim() == 2 && !self.is_periodic(2) {
            return Err(Error::Boundary("2D lattices need periodic z faces".into()));
        }
        if let Some(mask) = &self.solid {
            if mask.len() != dims.nodes() {
                return Err(Error::Boundary(format!(
                    "solid mask has {} entries for {} nodes",
                    mask.len(),
                    dims.nodes()
                )));
            }
        }
        Ok(())
    }
}

/// Wraps a coordinate that left `[0, n)` by at most `n`.
#[inline(always)]
pub fn wrap(x: isize, n: usize) -> usize {
    let n = n as isize;
    (if x < 0 {
        x + n
    } else if x >= n {
        x - n
    } else {
        x
    }) as usize
}

/// Where the population of one link ends up.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Link<T> {
    /// Streams into the same direction slot of this node.
    Stream { target: usize, wrapped: bool },
    /// Reflected into the opposite slot of the source node; `None` for a
    /// stationary wall.
    Bounce(Option<[T; 3]>),
}

/// Link resolution data shared by the kernels.
#[derive(Clone, Debug)]
pub(crate) struct Topology<T> {
    pub dims: Dims,
    pub periodic: [bool; 3],
    /// Wall velocity per face, `None` for stationary or periodic faces.
    pub moving: [[Option<[T; 3]>; 2]; 3],
}

impl<T: Real> Topology<T> {
    pub fn new(spec: &BoundarySpec, dims: Dims) -> Self {
        let mut moving = [[None; 2]; 3];
        for axis in 0..3 {
            for side in 0..2 {
                if let FaceKind::MovingWall(u) = spec.faces[axis][side] {
                    moving[axis][side] = Some([T::lit(u[0]), T::lit(u[1]), T::lit(u[2])]);
                }
            }
        }
        Self {
            dims,
            periodic: [spec.is_periodic(0), spec.is_periodic(1), spec.is_periodic(2)],
            moving,
        }
    }

    /// Resolves link `a` of node `(i, j, k)`. When a diagonal link leaves
    /// through two faces and either of them moves, the moving face wins, so
    /// the lid velocity reaches the top-row corner nodes.
    #[inline]
    pub fn resolve<L: Stencil>(&self, x: [usize; 3], a: usize, flags: &[NodeFlags]) -> Link<T> {
        let c = L::C[a];
        let n = self.dims.as_array();
        let mut target = [0usize; 3];
        let mut wrapped = false;
        let mut hit_wall = false;
        let mut wall_u = None;
        for axis in 0..3 {
            let t = x[axis] as isize + c[axis] as isize;
            if t >= 0 && (t as usize) < n[axis] {
                target[axis] = t as usize;
            } else if self.periodic[axis] {
                target[axis] = wrap(t, n[axis]);
                wrapped = true;
            } else {
                hit_wall = true;
                let side = usize::from(t >= 0);
                if wall_u.is_none() {
                    wall_u = self.moving[axis][side];
                }
            }
        }
        if hit_wall {
            return Link::Bounce(wall_u);
        }
        let idx = self.dims.index(target[0], target[1], target[2]);
        if flags[idx].contains(NodeFlags::SOLID) {
            Link::Bounce(None)
        } else {
            Link::Stream {
                target: idx,
                wrapped,
            }
        }
    }

    /// Neighbor index for stencil reads of scalar fields: wraps on periodic
    /// axes and returns `None` past a wall or into a solid node.
    #[inline]
    pub fn neighbor<L: Stencil>(&self, x: [usize; 3], a: usize, flags: &[NodeFlags]) -> Option<usize> {
        match self.resolve::<L>(x, a, flags) {
            Link::Stream { target, .. } => Some(target),
            Link::Bounce(_) => None,
        }
    }
}

/// Node flags built from a boundary spec.
#[derive(Clone, Debug)]
pub struct Classification {
    pub flags: Vec<NodeFlags>,
    /// Fluid nodes whose every moving link bounces back.
    pub isolated: Vec<[usize; 3]>,
}

impl Classification {
    pub fn count(&self, bits: NodeFlags) -> usize {
        self.flags.iter().filter(|f| f.intersects(bits)).count()
    }
}

pub fn classify_nodes(spec: &BoundarySpec, dims: Dims, kind: LatticeKind) -> Result<Classification> {
    spec.validate(kind, dims)?;
    crate::collision::with_stencil!(kind, L => classify::<L>(spec, dims))
}

fn classify<L: Stencil>(spec: &BoundarySpec, dims: Dims) -> Result<Classification> {
    let mut flags = vec![NodeFlags::empty(); dims.nodes()];
    if let Some(mask) = &spec.solid {
        for (f, &s) in flags.iter_mut().zip(mask) {
            if s {
                *f = NodeFlags::SOLID;
            }
        }
    }
    let topo = Topology::<f64>::new(spec, dims);
    let mut isolated = Vec::new();
    for idx in 0..dims.nodes() {
        if flags[idx].contains(NodeFlags::SOLID) {
            continue;
        }
        let x = dims.coords(idx);
        let mut bits = NodeFlags::empty();
        let mut fluid_links = 0;
        for a in 1..L::Q {
            match topo.resolve::<L>(x, a, &flags) {
                Link::Stream { wrapped, .. } => {
                    fluid_links += 1;
                    if wrapped {
                        bits |= NodeFlags::WRAP;
                    }
                }
                Link::Bounce(None) => bits |= NodeFlags::WALL,
                Link::Bounce(Some(_)) => bits |= NodeFlags::MOVING_WALL,
            }
        }
        if fluid_links == 0 {
            isolated.push(x);
        }
        flags[idx] |= bits;
    }
    if !isolated.is_empty() {
        log::warn!("{} isolated fluid node(s), first at {:?}", isolated.len(), isolated[0]);
    }
    Ok(Classification { flags, isolated })
}

/// Parses a plain-text solid mask: `#` solid, `.` fluid, one grid row per
/// line, first line is the highest `j`. Blank lines and lines starting with
/// `;` are skipped. A 2D mask on a 3D grid is extruded along z.
pub fn parse_mask(text: &str, dims: Dims) -> Result<Vec<bool>> {
    let rows: Vec<&str> = text
        .lines()
        .map(str::trim_end)
        .filter(|l| !l.is_empty() && !l.starts_with(';'))
        .collect();
    if rows.len() != dims.ny {
        return Err(Error::Boundary(format!(
            "mask has {} rows, grid has ny = {}",
            rows.len(),
            dims.ny
        )));
    }
    let mut plane = vec![false; dims.nx * dims.ny];
    for (line_no, row) in rows.iter().enumerate() {
        let j = dims.ny - 1 - line_no;
        let cells: Vec<char> = row.chars().collect();
        if cells.len() != dims.nx {
            return Err(Error::Boundary(format!(
                "mask row {} has {} cells, grid has nx = {}",
                line_no + 1,
                cells.len(),
                dims.nx
            )));
        }
        for (i, ch) in cells.into_iter().enumerate() {
            plane[i + dims.nx * j] = match ch {
                '#' => true,
                '.' => false,
                other => {
                    return Err(Error::Boundary(format!(
                        "mask row {} has unexpected character '{other}'",
                        line_no + 1
                    )))
                }
            };
        }
    }
    let mut mask = Vec::with_capacity(dims.nodes());
    for _ in 0..dims.nz {
        mask.extend_from_slice(&plane);
    }
    Ok(mask)
}
