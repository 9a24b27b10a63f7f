//! Working floating-point type.
//!
//! Every solver, field container and kernel is generic over [`Real`], so the
//! same code runs in double precision (the default, used by the validation
//! suite) and in single precision (the storage format whose byte accounting
//! the memory ledger and cost model describe).

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive};

pub trait Real:
    Float + FromPrimitive + Default + Debug + Display + LowerExp + Sum + Send + Sync + 'static
{
    /// Size of one element in bytes.
    const BYTES: usize;
    /// Type name used in legacy VTK headers.
    const VTK_NAME: &'static str;

    /// Converts an `f64` literal; exact for `f64`, correctly rounded for `f32`.
    fn lit(x: f64) -> Self;

    fn as_f64(self) -> f64;

    /// Raw bit pattern widened to 64 bits, for bit-identity comparisons.
    fn bits(self) -> u64;
}

impl Real for f64 {
    const BYTES: usize = 8;
    const VTK_NAME: &'static str = "double";

    #[inline(always)]
    fn lit(x: f64) -> Self {
        x
    }

    #[inline(always)]
    fn as_f64(self) -> f64 {
        self
    }

    #[inline(always)]
    fn bits(self) -> u64 {
        self.to_bits()
    }
}

impl Real for f32 {
    const BYTES: usize = 4;
    const VTK_NAME: &'static str = "float";

    #[inline(always)]
    fn lit(x: f64) -> Self {
        x as f32
    }

    #[inline(always)]
    fn as_f64(self) -> f64 {
        self as f64
    }

    #[inline(always)]
    fn bits(self) -> u64 {
        self.to_bits() as u64
    }
}

/// Working precision selected at run time by configuration.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    F32,
    #[default]
    F64,
}

impl Precision {
    pub fn bytes(self) -> usize {
        match self {
            Precision::F32 => 4,
            Precision::F64 => 8,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Precision::F32 => "f32",
            Precision::F64 => "f64",
        }
    }
}
