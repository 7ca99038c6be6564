//! Float helpers routed through `libm` so the crate stays `no_std` and
//! produces identical bits on every platform.

pub(crate) fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

pub(crate) fn sin_deg(deg: f64) -> f64 {
    libm::sin(deg * core::f64::consts::PI / 180.0)
}

pub(crate) fn cos_deg(deg: f64) -> f64 {
    libm::cos(deg * core::f64::consts::PI / 180.0)
}

/// Two-argument arctangent in degrees, normalized to [0, 360).
pub(crate) fn atan2_deg(num: f64, den: f64) -> f64 {
    let d = libm::atan2(num, den) * 180.0 / core::f64::consts::PI;
    if d < 0.0 {
        d + 360.0
    } else {
        d
    }
}

pub(crate) fn pow(base: f64, exponent: f64) -> f64 {
    libm::pow(base, exponent)
}

pub(crate) fn ln(x: f64) -> f64 {
    libm::log(x)
}

pub(crate) fn log10(x: f64) -> f64 {
    libm::log10(x)
}

pub(crate) fn floor(x: f64) -> f64 {
    libm::floor(x)
}

pub(crate) fn ceil(x: f64) -> f64 {
    libm::ceil(x)
}

pub(crate) fn trunc(x: f64) -> f64 {
    libm::trunc(x)
}

pub(crate) fn abs(x: f64) -> f64 {
    f64::from_bits(x.to_bits() & !(1u64 << 63))
}

/// Rounding with ties toward positive infinity, the PostScript `round` rule.
pub(crate) fn round_half_up(x: f64) -> f64 {
    floor(x + 0.5)
}
