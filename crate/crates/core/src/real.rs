use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating-point scalar for accuracies, budgets and statistics: f32 or f64.
pub trait Real:
    Float + FromPrimitive + ToPrimitive + Sum + Debug + Display + Send + Sync + 'static
{
}

impl Real for f32 {}
impl Real for f64 {}

/// Cast from f64 at API boundaries.
pub(crate) fn rf<F: Real>(v: f64) -> F {
    F::from_f64(v).expect("f64 converts to Real scalar")
}

pub(crate) fn as_f64<F: Real>(v: F) -> f64 {
    v.to_f64().expect("Real scalar converts to f64")
}
