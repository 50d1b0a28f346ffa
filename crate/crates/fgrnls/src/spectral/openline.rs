//! Whole-line resolvent on the grid window.
//!
//! Fourth-order Numerov discretization of `(-d^2 + V + c - zeta) u = b` closed with
//! discrete transparent conditions, so that waves leave the window instead of
//! reflecting back. Valid when `V` and `b` vanish near both window edges.

use num_complex::Complex64 as C64;

use super::operator::OperatorModel;
use crate::error::{Error, Result};

/// Root of `(1 + h^2 k^2/12)(rho + 1/rho) = 2(1 - 5 h^2 k^2 / 12)` describing the
/// exterior solution. `k2 = zeta - c`; the branch follows `exp(i k h)` with `Im k >= 0`.
pub fn exterior_ratio(h: f64, k2: C64) -> C64 {
    let a = C64::new(1.0, 0.0) + k2 * (h * h / 12.0);
    let b = C64::new(1.0, 0.0) - k2 * (5.0 * h * h / 12.0);
    let s = b / a;
    let disc = (s * s - 1.0).sqrt();
    let r1 = s + disc;
    let r2 = s - disc;
    let mut k = k2.sqrt();
    if k.im < 0.0 {
        k = -k;
    }
    if k.im == 0.0 && k.re < 0.0 {
        k = -k;
    }
    let target = (C64::new(0.0, 1.0) * k * h).exp();
    if (r1 - target).norm() <= (r2 - target).norm() {
        r1
    } else {
        r2
    }
}

/// Outgoing resolvent `R(zeta) b` with `Im zeta >= 0`; at `Im zeta = 0` this is `R(zeta + i0)`.
pub fn outgoing_resolvent(model: &OperatorModel, zeta: C64, b: &[C64]) -> Result<Vec<C64>> {
    model.check_grid(b)?;
    if zeta.im < 0.0 {
        let conj_b: Vec<C64> = b.iter().map(|v| v.conj()).collect();
        let x = outgoing_resolvent(model, zeta.conj(), &conj_b)?;
        return Ok(x.into_iter().map(|v| v.conj()).collect());
    }
    let n = b.len();
    let h = model.h();
    let c = model.c();
    let v = model.potential();
    let rho = exterior_ratio(h, zeta - c);
    let q = h * h / 12.0;
    // a_i u_{i+1} + a_i u_{i-1} style rows after the substitution y = a u
    let a: Vec<C64> = (0..n).map(|i| C64::new(1.0, 0.0) - (C64::new(v[i] + c, 0.0) - zeta) * q).collect();
    let diag: Vec<C64> = (0..n).map(|i| a[i] * 10.0 - 12.0).collect();
    // rhs: -(h^2/12)(b_{i+1} + 10 b_i + b_{i-1}) with exterior closure for the ghost samples
    let mut rhs = vec![C64::new(0.0, 0.0); n];
    for i in 0..n {
        let left = if i == 0 { rho * b[0] } else { b[i - 1] };
        let right = if i == n - 1 { rho * b[n - 1] } else { b[i + 1] };
        rhs[i] = -(left + b[i] * 10.0 + right) * q;
    }
    // system: a_{i-1} u_{i-1} + diag_i u_i + a_{i+1} u_{i+1} = rhs_i, ghosts u_{-1} = rho u_0, u_n = rho u_{n-1}
    let mut lower = vec![C64::new(0.0, 0.0); n];
    let mut main = diag.clone();
    let mut upper = vec![C64::new(0.0, 0.0); n];
    for i in 0..n {
        if i > 0 {
            lower[i] = a[i - 1];
        }
        if i + 1 < n {
            upper[i] = a[i + 1];
        }
    }
    main[0] += a[0] * rho;
    main[n - 1] += a[n - 1] * rho;
    let x = thomas(&lower, &main, &upper, &rhs)?;
    if x.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(Error::Numerical(format!("open-line solve failed at zeta = {zeta}")));
    }
    Ok(x)
}

fn thomas(lower: &[C64], main: &[C64], upper: &[C64], rhs: &[C64]) -> Result<Vec<C64>> {
    let n = main.len();
    let mut cp = vec![C64::new(0.0, 0.0); n];
    let mut dp = vec![C64::new(0.0, 0.0); n];
    let mut m = main[0];
    if m.norm() == 0.0 {
        return Err(Error::Numerical("zero pivot in tridiagonal solve".into()));
    }
    cp[0] = upper[0] / m;
    dp[0] = rhs[0] / m;
    for i in 1..n {
        m = main[i] - lower[i] * cp[i - 1];
        if m.norm() == 0.0 {
            return Err(Error::Numerical("zero pivot in tridiagonal solve".into()));
        }
        cp[i] = upper[i] / m;
        dp[i] = (rhs[i] - lower[i] * dp[i - 1]) / m;
    }
    let mut x = vec![C64::new(0.0, 0.0); n];
    x[n - 1] = dp[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = dp[i] - cp[i] * x[i + 1];
    }
    Ok(x)
}
