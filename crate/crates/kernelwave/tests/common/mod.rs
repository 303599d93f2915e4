#![allow(dead_code)]

use statrs::function::gamma::gamma;

/// Ai and Ai' from their Maclaurin series; accurate to ~1e-14 for |x| <= 3.
pub fn airy_ai(x: f64) -> (f64, f64) {
    let c1 = 1.0 / (3f64.powf(2.0 / 3.0) * gamma(2.0 / 3.0));
    let c2 = 1.0 / (3f64.powf(1.0 / 3.0) * gamma(1.0 / 3.0));
    // f = sum 3^k (1/3)_k x^{3k}/(3k)!, g = sum 3^k (2/3)_k x^{3k+1}/(3k+1)!
    let (mut f, mut g, mut df, mut dg) = (0.0, 0.0, 0.0, 1.0);
    let mut tf = 1.0;
    let mut tg = x;
    let x3 = x * x * x;
    for k in 0..60 {
        f += tf;
        g += tg;
        let kf = k as f64;
        if k > 0 {
            df += tf * 3.0 * kf / x;
        }
        dg += if k > 0 { tg * (3.0 * kf + 1.0) / x } else { 0.0 };
        tf *= x3 / ((3.0 * kf + 2.0) * (3.0 * kf + 3.0));
        tg *= x3 / ((3.0 * kf + 3.0) * (3.0 * kf + 4.0));
    }
    if x == 0.0 {
        df = 0.0;
        dg = 1.0;
    }
    (c1 * f - c2 * g, c1 * df - c2 * dg)
}

/// The Airy kernel on the diagonal, `Ai'(x)^2 - x Ai(x)^2`.
pub fn airy_kernel_diag(x: f64) -> f64 {
    let (a, d) = airy_ai(x);
    d * d - x * a * a
}
