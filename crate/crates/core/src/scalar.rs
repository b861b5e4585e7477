use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

/// Floating-point scalar the sampler is generic over.
///
/// Implemented for `f32` and `f64`. Random variates are generated in `f64`
/// and narrowed, so a seeded chain draws the same underlying stream for
/// either width.
pub trait Real:
    Float + FromPrimitive + ToPrimitive + Sum + Debug + Display + Default + Send + Sync + 'static
{
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("f64 is representable")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("finite scalar")
    }

    fn of_usize(n: usize) -> Self {
        Self::from_usize(n).expect("count is representable")
    }

    fn std_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let z: f64 = StandardNormal.sample(rng);
        Self::of(z)
    }
}

impl Real for f32 {}
impl Real for f64 {}
