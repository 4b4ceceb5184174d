//! Thin wrappers over `libm` so the crate stays `no_std`-clean.

pub(crate) const LOG2_E: f64 = core::f64::consts::LOG2_E;

#[inline]
pub(crate) fn abs(x: f64) -> f64 {
    libm::fabs(x)
}

#[inline]
pub(crate) fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

#[inline]
pub(crate) fn log2(x: f64) -> f64 {
    libm::log2(x)
}

#[inline]
pub(crate) fn ln(x: f64) -> f64 {
    libm::log(x)
}

#[inline]
pub(crate) fn exp2(x: f64) -> f64 {
    libm::exp2(x)
}

#[inline]
pub(crate) fn powf(x: f64, y: f64) -> f64 {
    libm::pow(x, y)
}

#[inline]
pub(crate) fn floor(x: f64) -> f64 {
    libm::floor(x)
}

#[inline]
pub(crate) fn ceil(x: f64) -> f64 {
    libm::ceil(x)
}

#[inline]
pub(crate) fn round(x: f64) -> f64 {
    libm::round(x)
}

/// Base-2 log-gamma: `log2(Γ(x))` for `x > 0`.
#[inline]
pub(crate) fn log2_gamma(x: f64) -> f64 {
    libm::lgamma_r(x).0 * LOG2_E
}

/// Base-2 log-factorial: `log2(k!)`.
#[inline]
pub(crate) fn log2_factorial(k: u32) -> f64 {
    log2_gamma(k as f64 + 1.0)
}
