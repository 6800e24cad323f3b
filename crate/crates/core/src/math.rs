//! Transcendental functions: `std` (platform libm) when the `std` feature is
//! on, the pure-Rust `libm` crate otherwise. Results may differ in the last
//! bit between the two backends.

#[cfg(feature = "std")]
mod imp {
    extern crate std;

    #[inline]
    pub fn exp(x: f64) -> f64 {
        x.exp()
    }
    #[inline]
    pub fn log1p(x: f64) -> f64 {
        x.ln_1p()
    }
    #[inline]
    pub fn sin(x: f64) -> f64 {
        x.sin()
    }
    #[inline]
    pub fn sqrt(x: f64) -> f64 {
        x.sqrt()
    }
    #[inline]
    pub fn pow(x: f64, y: f64) -> f64 {
        x.powf(y)
    }
}

#[cfg(not(feature = "std"))]
mod imp {
    pub use libm::{exp, log, log1p, pow, sin, sqrt};
}

pub use imp::*;

#[inline]
pub fn round(x: f64) -> f64 {
    libm::round(x)
}

#[inline]
pub fn ceil(x: f64) -> f64 {
    libm::ceil(x)
}
