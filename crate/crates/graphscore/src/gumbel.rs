//! Standard Gumbel draws, CDF and quantile with clamped uniforms.
//!
//! Uniform variates are clamped to `(1e-12, 1 - 1e-12)` before the
//! double-log transform so draws are always finite; top-k ordering and
//! subset likelihoods are undefined at infinite perturbations.

use rand::Rng;

use crate::rng::RngStream;

/// Clamp bound applied to uniform draws before the Gumbel transform.
pub const UNIFORM_CLAMP: f64 = 1e-12;

/// One Gumbel(location, 1) draw from the given stream.
pub fn gumbel_draw(rng: &mut impl Rng, location: f64) -> f64 {
    let u: f64 = rng.gen::<f64>().clamp(UNIFORM_CLAMP, 1.0 - UNIFORM_CLAMP);
    location - (-u.ln()).ln()
}

/// Convenience wrapper drawing from a fresh stream.
pub fn gumbel_draw_stream(stream: RngStream, location: f64) -> f64 {
    gumbel_draw(&mut stream.rng(), location)
}

/// Gumbel(location, 1) cumulative distribution function.
pub fn gumbel_cdf(x: f64, location: f64) -> f64 {
    (-(-(x - location)).exp()).exp()
}

/// Inverse CDF; `u` must lie in (0, 1).
pub fn gumbel_quantile(u: f64, location: f64) -> f64 {
    debug_assert!(u > 0.0 && u < 1.0);
    location - (-u.ln()).ln()
}
