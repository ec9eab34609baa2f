//! Floating-point abstraction shared by the numeric parts of the crate.

use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Real scalar used by densities, metrics and theory curves: `f32` or `f64`.
pub trait Scalar: Float + FromPrimitive + ToPrimitive + Debug + Display + Default + Send + Sync + 'static {
    /// Lossy conversion from `f64`, for literals and values computed in double precision.
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("f64 is representable in every Scalar")
    }

    /// Conversion from a count.
    fn of_count(n: u64) -> Self {
        Self::from_u64(n).expect("counts are representable in every Scalar")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().expect("Scalar converts to f64")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
