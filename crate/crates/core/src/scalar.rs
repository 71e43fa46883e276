//! Floating-point scalar abstraction used by the weighting, similarity and
//! evaluation code.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Real scalar the ranking and evaluation maths is generic over (`f32`, `f64`).
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Lossy conversion from a count.
    fn from_count(count: usize) -> Self {
        Self::from_usize(count).expect("count representable as float")
    }

    fn from_f64_lossy(value: f64) -> Self {
        Self::from_f64(value).expect("finite f64 representable")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
