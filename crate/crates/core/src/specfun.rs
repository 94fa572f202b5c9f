//! Bessel, spherical Bessel/Hankel, associated Legendre and spherical
//! harmonic functions.
//!
//! Spherical Bessel functions of the first kind use Miller's downward
//! recurrence normalised against the closed forms of j₀/j₁ whenever the
//! requested order exceeds the argument; above that the upward recurrence is
//! stable and is used directly. Functions of the second kind always recur
//! upward.
//!
//! Associated Legendre functions follow the Rodrigues definition without the
//! Condon–Shortley phase, and spherical harmonics use |m| inside the
//! normalisation, so that Y_{n,−m} = Y_{n,m}*.

use crate::error::{Error, Result};
use num_complex::Complex64;
use std::f64::consts::PI;

const MODULE: &str = "specfun";
const RESCALE: f64 = 1e250;

/// Degree/order pair of a spherical harmonic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Order {
    pub n: u32,
    pub m: i32,
}

impl Order {
    pub fn new(n: u32, m: i32) -> Result<Self> {
        if m.unsigned_abs() > n {
            return Err(Error::domain(MODULE, format!("|m| = {} exceeds n = {n}", m.abs())));
        }
        Ok(Self { n, m })
    }
}

fn check_finite(x: f64) -> Result<()> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(MODULE, format!("non-finite argument {x}")))
    }
}

/// Cylindrical Bessel function J_n(x) of integer order, via Miller's
/// algorithm normalised with J₀ + 2ΣJ₂ₖ = 1.
pub fn bessel_j(n: u32, x: f64) -> Result<f64> {
    check_finite(x)?;
    if x < 0.0 {
        // J_n(−x) = (−1)^n J_n(x)
        let v = bessel_j(n, -x)?;
        return Ok(if n.is_multiple_of(2) { v } else { -v });
    }
    if x == 0.0 {
        return Ok(if n == 0 { 1.0 } else { 0.0 });
    }
    let top = (n as f64).max(x);
    let mut start = (top + 20.0 + (40.0 * top).sqrt()) as usize;
    if start % 2 == 1 {
        start += 1;
    }
    let mut next = 0.0; // J_{k+1}
    let mut cur = 1e-300; // J_k
    let mut norm = 0.0;
    let mut wanted = 0.0;
    for k in (1..=start).rev() {
        // J_{k-1} = (2k/x) J_k − J_{k+1}
        let prev = 2.0 * k as f64 / x * cur - next;
        next = cur;
        cur = prev;
        let km1 = k - 1;
        if km1 == n as usize {
            wanted = cur;
        }
        if km1 > 0 && km1 % 2 == 0 {
            norm += 2.0 * cur;
        }
        if cur.abs() > RESCALE {
            cur /= RESCALE;
            next /= RESCALE;
            norm /= RESCALE;
            wanted /= RESCALE;
        }
    }
    if n as usize > start {
        return Ok(0.0);
    }
    norm += cur;
    Ok(wanted / norm)
}

/// J_{n+1/2}(x) for x ≥ 0 through the spherical Bessel relation.
pub fn bessel_j_half(n: u32, x: f64) -> Result<f64> {
    check_finite(x)?;
    if x < 0.0 {
        return Err(Error::domain(MODULE, "half-integer order needs x ≥ 0"));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    Ok((2.0 * x / PI).sqrt() * spherical_j(n, x)?)
}

/// j₀ … j_nmax at x ≥ 0.
pub fn spherical_j_array(nmax: usize, x: f64) -> Result<Vec<f64>> {
    check_finite(x)?;
    if x < 0.0 {
        return Err(Error::domain(MODULE, format!("spherical_j needs x ≥ 0, got {x}")));
    }
    let mut out = vec![0.0; nmax + 1];
    if x == 0.0 {
        out[0] = 1.0;
        return Ok(out);
    }
    if x < 1e-4 {
        // two-term series; relative error O(x⁴)
        let mut lead = 1.0; // x^n / (2n+1)!!
        for (n, o) in out.iter_mut().enumerate() {
            if n > 0 {
                lead *= x / (2 * n + 1) as f64;
            }
            *o = lead * (1.0 - x * x / (2.0 * (2 * n + 3) as f64));
        }
        return Ok(out);
    }
    let (s, c) = x.sin_cos();
    let j0 = s / x;
    let j1 = s / (x * x) - c / x;
    if (nmax as f64) < x {
        out[0] = j0;
        if nmax >= 1 {
            out[1] = j1;
        }
        for n in 1..nmax {
            out[n + 1] = (2 * n + 1) as f64 / x * out[n] - out[n - 1];
        }
        return Ok(out);
    }
    let top = (nmax as f64).max(x);
    let start = (top + 20.0 + (30.0 * top).sqrt()) as usize;
    let mut next = 0.0;
    let mut cur = 1e-300;
    for k in (1..=start).rev() {
        // j_{k-1} = (2k+1)/x j_k − j_{k+1}
        let prev = (2 * k + 1) as f64 / x * cur - next;
        next = cur;
        cur = prev;
        let km1 = k - 1;
        if km1 <= nmax {
            out[km1] = cur;
        }
        if cur.abs() > RESCALE {
            cur /= RESCALE;
            next /= RESCALE;
            for o in out.iter_mut().skip(km1) {
                *o /= RESCALE;
            }
        }
    }
    // normalise against whichever closed form is better conditioned
    let scale = if j0.abs() >= j1.abs() || nmax == 0 {
        j0 / out[0]
    } else {
        j1 / out[1]
    };
    for o in out.iter_mut() {
        *o *= scale;
    }
    Ok(out)
}

/// y₀ … y_nmax at x > 0 by upward recurrence.
pub fn spherical_y_array(nmax: usize, x: f64) -> Result<Vec<f64>> {
    check_finite(x)?;
    if x <= 0.0 {
        return Err(Error::singular(MODULE, format!("y_n is singular at x = {x}")));
    }
    let (s, c) = x.sin_cos();
    let mut out = vec![0.0; nmax + 1];
    out[0] = -c / x;
    if nmax >= 1 {
        out[1] = -c / (x * x) - s / x;
    }
    for n in 1..nmax {
        out[n + 1] = (2 * n + 1) as f64 / x * out[n] - out[n - 1];
    }
    Ok(out)
}

/// h⁽¹⁾₀ … h⁽¹⁾_nmax = j + i·y at x > 0.
pub fn spherical_h1_array(nmax: usize, x: f64) -> Result<Vec<Complex64>> {
    let j = spherical_j_array(nmax, x)?;
    let y = spherical_y_array(nmax, x)?;
    Ok(j.into_iter().zip(y).map(|(a, b)| Complex64::new(a, b)).collect())
}

pub fn spherical_j(n: u32, x: f64) -> Result<f64> {
    Ok(spherical_j_array(n as usize, x)?[n as usize])
}

pub fn spherical_y(n: u32, x: f64) -> Result<f64> {
    Ok(spherical_y_array(n as usize, x)?[n as usize])
}

pub fn spherical_h1(n: u32, x: f64) -> Result<Complex64> {
    Ok(spherical_h1_array(n as usize, x)?[n as usize])
}

/// Derivative z_n'(x) from an array z₀…z_{n} of j, y or h values:
/// z₀' = −z₁, z_n' = z_{n−1} − (n+1) z_n / x.
pub fn derivative_from_array<T>(z: &[T], n: usize, x: f64) -> T
where
    T: Copy + std::ops::Sub<Output = T> + std::ops::Mul<f64, Output = T> + std::ops::Neg<Output = T>,
{
    if n == 0 {
        -z[1]
    } else {
        z[n - 1] - z[n] * ((n + 1) as f64 / x)
    }
}

/// ln((n+m)!/(n−m)!) as a sum of logarithms.
pub fn ln_factorial_ratio(n: u32, m: u32) -> f64 {
    debug_assert!(m <= n);
    ((n - m + 1)..=(n + m)).map(|k| (k as f64).ln()).sum()
}

/// sqrt((2n+1)/(4π) · (n−m)!/(n+m)!) for 0 ≤ m ≤ n.
pub fn harmonic_norm(n: u32, m: u32) -> f64 {
    let ln = 0.5 * (((2 * n + 1) as f64 / (4.0 * PI)).ln() - ln_factorial_ratio(n, m));
    ln.exp()
}

/// Table of P_n^m(cos θ), 0 ≤ m ≤ n ≤ nmax, without Condon–Shortley phase.
#[derive(Debug, Clone)]
pub struct LegendreTable {
    nmax: usize,
    values: Vec<f64>,
}

impl LegendreTable {
    /// Built from cos θ and sin θ separately so poles stay exact.
    pub fn new(nmax: usize, cos_t: f64, sin_t: f64) -> Self {
        let mut values = vec![0.0; (nmax + 1) * (nmax + 2) / 2];
        let idx = |n: usize, m: usize| n * (n + 1) / 2 + m;
        let mut pmm = 1.0;
        for m in 0..=nmax {
            if m > 0 {
                pmm *= (2 * m - 1) as f64 * sin_t;
            }
            values[idx(m, m)] = pmm;
            if m < nmax {
                values[idx(m + 1, m)] = cos_t * (2 * m + 1) as f64 * pmm;
            }
            for n in (m + 2)..=nmax {
                let a = cos_t * (2 * n - 1) as f64 * values[idx(n - 1, m)];
                let b = (n + m - 1) as f64 * values[idx(n - 2, m)];
                values[idx(n, m)] = (a - b) / (n - m) as f64;
            }
        }
        Self { nmax, values }
    }

    pub fn from_theta(nmax: usize, theta: f64) -> Self {
        let (s, c) = theta.sin_cos();
        Self::new(nmax, c, s)
    }

    pub fn nmax(&self) -> usize {
        self.nmax
    }

    /// P_n^m; zero when m > n.
    pub fn get(&self, n: usize, m: usize) -> f64 {
        if m > n || n > self.nmax {
            return 0.0;
        }
        self.values[n * (n + 1) / 2 + m]
    }

    /// dP_n^m(cos θ)/dθ; needs the table to reach degree n.
    pub fn d_theta(&self, n: usize, m: usize) -> f64 {
        if m == 0 {
            -self.get(n, 1)
        } else {
            0.5 * ((n + m) as f64 * (n + 1 - m) as f64 * self.get(n, m - 1) - self.get(n, m + 1))
        }
    }

    /// m·P_n^m(cos θ)/sin θ for m ≥ 1, regular at the poles; needs degree n+1.
    pub fn m_over_sin(&self, n: usize, m: usize) -> f64 {
        if m == 0 {
            return 0.0;
        }
        debug_assert!(n < self.nmax);
        0.5 * (self.get(n + 1, m + 1) + (n + 1 - m) as f64 * (n + 2 - m) as f64 * self.get(n + 1, m - 1))
    }
}

/// P_n^m(x) with the Rodrigues definition (no Condon–Shortley phase).
pub fn assoc_legendre(n: u32, m: u32, x: f64) -> Result<f64> {
    check_finite(x)?;
    if x.abs() > 1.0 {
        return Err(Error::domain(MODULE, format!("|x| = {} > 1", x.abs())));
    }
    if m > n {
        return Err(Error::domain(MODULE, format!("m = {m} exceeds n = {n}")));
    }
    let s = (1.0 - x * x).max(0.0).sqrt();
    Ok(LegendreTable::new(n as usize, x, s).get(n as usize, m as usize))
}

/// Y_nm(θ, φ) with θ the polar angle and |m| inside the normalisation.
pub fn spherical_harmonic(n: u32, m: i32, theta: f64, phi: f64) -> Complex64 {
    let am = m.unsigned_abs();
    if am > n {
        return Complex64::new(0.0, 0.0);
    }
    let table = LegendreTable::from_theta(n as usize, theta);
    let p = table.get(n as usize, am as usize);
    let (s, c) = (m as f64 * phi).sin_cos();
    Complex64::new(c, s) * (harmonic_norm(n, am) * p)
}

/// Y, ∂Y/∂θ and (i m / sin θ)·Y for one (n, m) from a shared table.
#[derive(Debug, Clone, Copy)]
pub struct HarmonicTerms {
    pub y: Complex64,
    pub d_theta: Complex64,
    pub im_over_sin: Complex64,
}

/// Evaluates the angular pieces of the vector spherical harmonics. `table`
/// must extend to degree n+1; `phase` is e^{imφ}.
pub fn harmonic_terms(table: &LegendreTable, n: usize, m: i32, phase: Complex64) -> HarmonicTerms {
    let am = m.unsigned_abs() as usize;
    let c = harmonic_norm(n as u32, am as u32);
    let p = table.get(n, am);
    let dp = table.d_theta(n, am);
    let mos = table.m_over_sin(n, am) * m.signum() as f64;
    HarmonicTerms {
        y: phase * (c * p),
        d_theta: phase * (c * dp),
        im_over_sin: phase * Complex64::new(0.0, c * mos),
    }
}
