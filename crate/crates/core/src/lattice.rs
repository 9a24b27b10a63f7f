//! Discrete velocity sets.
//!
//! Direction ordering is fixed and shared by every kernel, the two-buffer
//! reference solver and the tests:
//!
//! ```text
//! D2Q9                      D3Q19
//!   6   2   5               0        rest
//!    \  |  /                1..=6    ±x, ±y, ±z   (pairs 1/2, 3/4, 5/6)
//!   3 - 0 - 1               7..=10   xy diagonals
//!    /  |  \                11..=14  xz diagonals
//!   7   4   8               15..=18  yz diagonals
//! ```
//!
//! Weights and perturbation weights are stored as exact rationals and
//! converted once to the working type.

use serde::{Deserialize, Serialize};

/// Exact rational constant.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Rational {
    pub num: i64,
    pub den: i64,
}

impl Rational {
    pub const fn new(num: i64, den: i64) -> Self {
        Self { num, den }
    }

    pub fn to_f64(self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

const fn r(num: i64, den: i64) -> Rational {
    Rational::new(num, den)
}

/// Lattice sound speed squared, 1/3 on both lattices.
pub const CS2: f64 = 1.0 / 3.0;

/// Largest direction count of the shipped lattices.
pub const MAX_Q: usize = 19;

/// Largest number of independent second-rank symmetric tensor components.
pub const MAX_PAIRS: usize = 6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LatticeKind {
    D2Q9,
    D3Q19,
}

impl LatticeKind {
    pub fn dim(self) -> usize {
        match self {
            LatticeKind::D2Q9 => 2,
            LatticeKind::D3Q19 => 3,
        }
    }

    pub fn q(self) -> usize {
        match self {
            LatticeKind::D2Q9 => 9,
            LatticeKind::D3Q19 => 19,
        }
    }

    /// Number of independent components of a symmetric rank-2 tensor, D(D+1)/2.
    pub fn pairs(self) -> usize {
        let d = self.dim();
        d * (d + 1) / 2
    }

    pub fn as_str(self) -> &'static str {
        match self {
            LatticeKind::D2Q9 => "d2q9",
            LatticeKind::D3Q19 => "d3q19",
        }
    }
}

impl std::fmt::Display for LatticeKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for LatticeKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "d2q9" => Ok(LatticeKind::D2Q9),
            "d3q19" => Ok(LatticeKind::D3Q19),
            other => Err(format!("unknown lattice '{other}' (expected d2q9 or d3q19)")),
        }
    }
}

/// Compile-time view of a velocity set, used to monomorphize the kernels.
///
/// `PAIRS` lists the stored components of symmetric tensors: diagonal
/// components first, then the off-diagonal ones in (xy, xz, yz) order.
pub trait Stencil: Copy + Send + Sync + 'static {
    const KIND: LatticeKind;
    const D: usize;
    const Q: usize;
    const C: &'static [[i32; 3]];
    const W: &'static [Rational];
    const B: &'static [Rational];
    const OPP: &'static [usize];
    const PAIRS: &'static [(usize, usize)];
}

/// Runs `$body` with `$i` bound to each index in `$lo..$hi`, fully unrolled
/// up to the literal bound `$max >= $hi`. With `$hi` a stencil constant the
/// guard folds away and every lattice coefficient in the body becomes a
/// compile-time constant. The body must not name `UNROLL_IDX`.
macro_rules! unroll {
    ($max:literal, $i:ident in $lo:expr, $hi:expr => $body:block) => {
        seq_macro::seq!(UNROLL_IDX in 0..$max {
            {
                let (lo, hi): (usize, usize) = ($lo, $hi);
                if lo <= UNROLL_IDX && UNROLL_IDX < hi {
                    let $i: usize = UNROLL_IDX;
                    $body
                }
            }
        })
    };
}
pub(crate) use unroll;

#[derive(Clone, Copy, Debug, Default)]
pub struct D2Q9;

#[derive(Clone, Copy, Debug, Default)]
pub struct D3Q19;

impl Stencil for D2Q9 {
    const KIND: LatticeKind = LatticeKind::D2Q9;
    const D: usize = 2;
    const Q: usize = 9;
    const C: &'static [[i32; 3]] = &[
        [0, 0, 0],
        [1, 0, 0],
        [0, 1, 0],
        [-1, 0, 0],
        [0, -1, 0],
        [1, 1, 0],
        [-1, 1, 0],
        [-1, -1, 0],
        [1, -1, 0],
    ];
    const W: &'static [Rational] = &[
        r(4, 9),
        r(1, 9),
        r(1, 9),
        r(1, 9),
        r(1, 9),
        r(1, 36),
        r(1, 36),
        r(1, 36),
        r(1, 36),
    ];
    const B: &'static [Rational] = &[
        r(-4, 27),
        r(2, 27),
        r(2, 27),
        r(2, 27),
        r(2, 27),
        r(5, 108),
        r(5, 108),
        r(5, 108),
        r(5, 108),
    ];
    const OPP: &'static [usize] = &[0, 3, 4, 1, 2, 7, 8, 5, 6];
    const PAIRS: &'static [(usize, usize)] = &[(0, 0), (1, 1), (0, 1)];
}

impl Stencil for D3Q19 {
    const KIND: LatticeKind = LatticeKind::D3Q19;
    const D: usize = 3;
    const Q: usize = 19;
    const C: &'static [[i32; 3]] = &[
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
    const W: &'static [Rational] = &[
        r(1, 3),
        r(1, 18),
        r(1, 18),
        r(1, 18),
        r(1, 18),
        r(1, 18),
        r(1, 18),
        r(1, 36),
        r(1, 36),
        r(1, 36),
        r(1, 36),
        r(1, 36),
        r(1, 36),
        r(1, 36),
        r(1, 36),
        r(1, 36),
        r(1, 36),
        r(1, 36),
        r(1, 36),
    ];
    const B: &'static [Rational] = &[
        r(-1, 3),
        r(1, 18),
        r(1, 18),
        r(1, 18),
        r(1, 18),
        r(1, 18),
        r(1, 18),
        r(1, 36),
        r(1, 36),
        r(1, 36),
        r(1, 36),
        r(1, 36),
        r(1, 36),
        r(1, 36),
        r(1, 36),
        r(1, 36),
        r(1, 36),
        r(1, 36),
        r(1, 36),
    ];
    const OPP: &'static [usize] = &[
        0, 2, 1, 4, 3, 6, 5, 8, 7, 10, 9, 12, 11, 14, 13, 16, 15, 18, 17,
    ];
    const PAIRS: &'static [(usize, usize)] = &[(0, 0), (1, 1), (2, 2), (0, 1), (0, 2), (1, 2)];
}

/// Runtime description of a velocity set.
#[derive(Clone, Debug, PartialEq)]
pub struct LatticeDescriptor {
    pub kind: LatticeKind,
    /// Spatial dimension D.
    pub dim: usize,
    pub q: usize,
    /// Integer velocity vectors, z component zero on D2Q9.
    pub c: Vec<[i32; 3]>,
    /// Equilibrium weights.
    pub t: Vec<f64>,
    /// Color-gradient perturbation weights.
    pub b: Vec<f64>,
    pub cs2: f64,
    pub opp: Vec<usize>,
    /// Second Hermite tensor `c c - cs2 I` per direction (D x D block used).
    pub hermite: Vec<[[f64; 3]; 3]>,
}

fn build<L: Stencil>() -> LatticeDescriptor {
    let hermite = L::C
        .iter()
        .map(|c| {
            let mut h = [[0.0; 3]; 3];
            for (al, row) in h.iter_mut().enumerate().take(L::D) {
                for (be, v) in row.iter_mut().enumerate().take(L::D) {
                    let delta = if al == be { CS2 } else { 0.0 };
                    *v = (c[al] * c[be]) as f64 - delta;
                }
            }
            h
        })
        .collect();
    LatticeDescriptor {
        kind: L::KIND,
        dim: L::D,
        q: L::Q,
        c: L::C.to_vec(),
        t: L::W.iter().map(|w| w.to_f64()).collect(),
        b: L::B.iter().map(|w| w.to_f64()).collect(),
        cs2: CS2,
        opp: L::OPP.to_vec(),
        hermite,
    }
}

pub fn make_descriptor(kind: LatticeKind) -> LatticeDescriptor {
    match kind {
        LatticeKind::D2Q9 => build::<D2Q9>(),
        LatticeKind::D3Q19 => build::<D3Q19>(),
    }
}

impl LatticeDescriptor {
    /// Squared length of `c_a`.
    pub fn c_norm2(&self, a: usize) -> i32 {
        let c = self.c[a];
        c[0] * c[0] + c[1] * c[1] + c[2] * c[2]
    }

    pub fn c_f64(&self, a: usize) -> [f64; 3] {
        let c = self.c[a];
        [c[0] as f64, c[1] as f64, c[2] as f64]
    }
}

/// One moment condition and how far the descriptor is from satisfying it.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MomentCheck {
    pub name: &'static str,
    pub violation: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ValidationReport {
    pub kind: LatticeKind,
    pub tolerance: f64,
    pub checks: Vec<MomentCheck>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&MomentCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Tolerance applied by [`validate_moments`].
pub const MOMENT_TOLERANCE: f64 = 1e-14;

/// Checks the discrete moment and isotropy conditions by direct summation.
pub fn validate_moments(desc: &LatticeDescriptor) -> ValidationReport {
    let d = desc.dim;
    let q = desc.q;
    let cs2 = desc.cs2;
    let c = |a: usize, al: usize| desc.c[a][al] as f64;
    let delta = |i: usize, j: usize| if i == j { 1.0 } else { 0.0 };
    let mut checks = Vec::new();
    let mut push = |name: &'static str, violation: f64| {
        checks.push(MomentCheck {
            name,
            violation,
            passed: violation <= MOMENT_TOLERANCE,
        });
    };

    let sum_t: f64 = desc.t.iter().sum();
    push("weights_sum", (sum_t - 1.0).abs());

    let mut first: f64 = 0.0;
    for al in 0..d {
        let s: f64 = (0..q).map(|a| desc.t[a] * c(a, al)).sum();
        first = first.max(s.abs());
    }
    push("first_moment", first);

    let mut second: f64 = 0.0;
    for al in 0..d {
        for be in 0..d {
            let s: f64 = (0..q).map(|a| desc.t[a] * c(a, al) * c(a, be)).sum();
            second = second.max((s - cs2 * delta(al, be)).abs());
        }
    }
    push("second_moment", second);

    let mut third: f64 = 0.0;
    for al in 0..d {
        for be in 0..d {
            for ga in 0..d {
                let s: f64 = (0..q)
                    .map(|a| desc.t[a] * c(a, al) * c(a, be) * c(a, ga))
                    .sum();
                third = third.max(s.abs());
            }
        }
    }
    push("third_moment", third);

    let mut fourth: f64 = 0.0;
    for al in 0..d {
        for be in 0..d {
            for ga in 0..d {
                for de in 0..d {
                    let s: f64 = (0..q)
                        .map(|a| desc.t[a] * c(a, al) * c(a, be) * c(a, ga) * c(a, de))
                        .sum();
                    let iso = cs2
                        * cs2
                        * (delta(al, be) * delta(ga, de)
                            + delta(al, ga) * delta(be, de)
                            + delta(al, de) * delta(be, ga));
                    fourth = fourth.max((s - iso).abs());
                }
            }
        }
    }
    push("fourth_isotropy", fourth);

    let mut opp: f64 = 0.0;
    for a in 0..q {
        let o = desc.opp[a];
        if o >= q || desc.opp[o] != a {
            opp = opp.max(1.0);
            continue;
        }
        for al in 0..3 {
            opp = opp.max((desc.c[o][al] + desc.c[a][al]).abs() as f64);
        }
    }
    push("opposite_involution", opp);

    let sum_b: f64 = desc.b.iter().sum();
    push("perturbation_sum", (sum_b - cs2).abs());

    let mut b_first: f64 = 0.0;
    for al in 0..d {
        let s: f64 = (0..q).map(|a| desc.b[a] * c(a, al)).sum();
        b_first = b_first.max(s.abs());
    }
    push("perturbation_first_moment", b_first);

    let mut herm: f64 = 0.0;
    for a in 0..q {
        let h = &desc.hermite[a];
        let trace: f64 = (0..d).map(|al| h[al][al]).sum();
        let expect = desc.c_norm2(a) as f64 - d as f64 * cs2;
        herm = herm.max((trace - expect).abs());
        for al in 0..d {
            for be in 0..d {
                herm = herm.max((h[al][be] - h[be][al]).abs());
            }
        }
    }
    push("hermite_trace", herm);

    ValidationReport {
        kind: desc.kind,
        tolerance: MOMENT_TOLERANCE,
        checks,
    }
}
