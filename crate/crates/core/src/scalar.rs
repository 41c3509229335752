//! Scalar abstraction for the representation-theoretic parts of the crate.
//!
//! Representation matrices only ever contain integers, halves and `i`, so
//! they can be built over any signed number field: `f64`/`f32` for the
//! numerical pipeline and big rationals for exact identities.

use std::fmt::Debug;

use num_traits::{FromPrimitive, NumAssign, Signed, ToPrimitive};

/// Coefficient field for representation matrices.
pub trait RepScalar:
    NumAssign + Signed + FromPrimitive + ToPrimitive + Clone + PartialEq + Debug + Send + Sync + 'static
{
    /// `num / den` as a field element.
    fn ratio(num: i64, den: i64) -> Self {
        Self::from_i64(num).expect("integer fits in the scalar type")
            / Self::from_i64(den).expect("integer fits in the scalar type")
    }

    fn from_int(v: i64) -> Self {
        Self::from_i64(v).expect("integer fits in the scalar type")
    }

    fn to_f64_lossy(&self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl<T> RepScalar for T where
    T: NumAssign + Signed + FromPrimitive + ToPrimitive + Clone + PartialEq + Debug + Send + Sync + 'static
{
}
