//! Shared time discretization for spacetime sections: trapezoid weights and a
//! derivative stencil that is central inside and one-sided at the ends.
//!
//! With these two choices the discrete action is summation-by-parts consistent,
//! so its Euler-Lagrange equations at interior slices are the central-difference
//! field equations.

use crate::lattice::ScalarField;

pub(crate) fn trapezoid_weight(i: usize, count: usize) -> f64 {
    if i == 0 || i + 1 == count {
        0.5
    } else {
        1.0
    }
}

pub(crate) fn time_derivative<'a>(at: impl Fn(usize) -> &'a ScalarField, i: usize, count: usize, dt: f64) -> ScalarField {
    if i == 0 {
        (at(1) - at(0)).map(|v| v / dt)
    } else if i + 1 == count {
        (at(i) - at(i - 1)).map(|v| v / dt)
    } else {
        (at(i + 1) - at(i - 1)).map(|v| v / (2.0 * dt))
    }
}

pub(crate) fn validate_dt(dt: f64) -> crate::Result<()> {
    if dt.is_finite() && dt > 0.0 {
        Ok(())
    } else {
        Err(crate::Error::InvalidParameter { name: "dt", reason: format!("must be positive, got {dt}") })
    }
}
