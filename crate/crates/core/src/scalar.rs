use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, NumAssign};

/// Real scalar the tensor algebra is generic over: `f32` or `f64`.
pub trait Real:
    Float + FromPrimitive + NumAssign + Debug + Display + Default + Send + Sync + 'static
{
    /// Converts an `f64` literal.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable in scalar type")
    }

    /// Tolerance used for structural checks (orthogonality, symmetry):
    /// `1e-12` for `f64`, scaled to machine epsilon for narrower types.
    fn structural_tol() -> Self {
        Self::lit(1e-12).max(Self::epsilon() * Self::lit(64.0))
    }

    /// Relative threshold below which a spectral gap or a triangular
    /// diagonal is considered degenerate.
    fn degeneracy_tol() -> Self {
        Self::lit(1e-8).max(Self::epsilon() * Self::lit(256.0))
    }
}

impl Real for f32 {}
impl Real for f64 {}
