//! Float helpers backed by `libm` so the kernels build without `std`.

// Shadowed by the inherent methods whenever std is linked into the build,
// as it is for tests.
#[allow(dead_code)]
pub(crate) trait Float64Ext {
    fn sqrt(self) -> f64;
    fn floor(self) -> f64;
    fn ceil(self) -> f64;
    fn round(self) -> f64;
    fn exp(self) -> f64;
    fn ln(self) -> f64;
    fn cos(self) -> f64;
    fn acos(self) -> f64;
    fn powi(self, n: i32) -> f64;
}

impl Float64Ext for f64 {
    #[inline]
    fn sqrt(self) -> f64 {
        libm::sqrt(self)
    }
    #[inline]
    fn floor(self) -> f64 {
        libm::floor(self)
    }
    #[inline]
    fn ceil(self) -> f64 {
        libm::ceil(self)
    }
    #[inline]
    fn round(self) -> f64 {
        libm::round(self)
    }
    #[inline]
    fn exp(self) -> f64 {
        libm::exp(self)
    }
    #[inline]
    fn ln(self) -> f64 {
        libm::log(self)
    }
    #[inline]
    fn cos(self) -> f64 {
        libm::cos(self)
    }
    #[inline]
    fn acos(self) -> f64 {
        libm::acos(self)
    }
    #[inline]
    fn powi(self, n: i32) -> f64 {
        libm::pow(self, n as f64)
    }
}
