//! Gamma values at integers and half-integers, which is all the expansion needs.

use std::f64::consts::PI;

/// Γ(n/2) for a positive integer n.
pub(crate) fn gamma_half(n: u32) -> f64 {
    assert!(n > 0, "gamma pole at 0");
    let (mut g, mut x) = if n.is_multiple_of(2) { (1.0, 1.0) } else { (PI.sqrt(), 0.5) };
    let target = n as f64 / 2.0;
    while x < target - 0.25 {
        g *= x;
        x += 1.0;
    }
    g
}
