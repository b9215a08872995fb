//! Scalar abstraction shared by the numeric modules.
//!
//! Channel, latency and reservoir code is written against [`Scalar`] so the
//! same models run in `f32` or `f64`. The crate root re-exports `f64`
//! aliases for everything the simulator uses.

use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + 'static
{
    /// Lossy conversion from an `f64` literal.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable in scalar type")
    }

    #[inline]
    fn from_count(n: u64) -> Self {
        Self::from_u64(n).expect("count representable in scalar type")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Decibel and power-unit conversions. Everything downstream of these works in
/// linear watts and hertz.
pub mod units {
    use super::Scalar;

    pub fn db_to_linear<T: Scalar>(db: T) -> T {
        T::lit(10.0).powf(db / T::lit(10.0))
    }

    pub fn linear_to_db<T: Scalar>(x: T) -> T {
        T::lit(10.0) * x.log10()
    }

    pub fn dbm_to_watts<T: Scalar>(dbm: T) -> T {
        db_to_linear(dbm - T::lit(30.0))
    }

    pub fn watts_to_dbm<T: Scalar>(w: T) -> T {
        linear_to_db(w) + T::lit(30.0)
    }

}
