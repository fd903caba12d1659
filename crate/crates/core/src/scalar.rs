//! Scalar abstraction shared by the geometric and analytic code.

use std::fmt::{Debug, Display};

use num_traits::{Float, FloatConst};
use rand::distributions::uniform::SampleUniform;
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Real scalar usable throughout the crate. Implemented for `f32` and `f64`.
pub trait Real:
    Float + FloatConst + SampleUniform + Debug + Display + Send + Sync + Serialize + DeserializeOwned + 'static
{
    /// Converts an `f64` literal into this scalar type.
    fn lit(x: f64) -> Self {
        <Self as num_traits::NumCast>::from(x).expect("f64 literal is representable")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("finite scalar converts to f64")
    }
}

impl<T> Real for T where
    T: Float + FloatConst + SampleUniform + Debug + Display + Send + Sync + Serialize + DeserializeOwned + 'static
{
}
