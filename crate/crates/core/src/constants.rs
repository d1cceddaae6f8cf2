//! Special constants of the logarithmic p-Laplacian.
//!
//! Everything downstream is normalized through a handful of classical
//! quantities: the gamma function, the digamma function, the surface
//! measure `ω_N` of the unit sphere, the kernel constant `C_{N,p}`, the
//! zero-order constant `ρ_N(p)` and the fractional normalization
//! `C_{N,s,p}`. They are implemented here without external dependencies
//! because every downstream tolerance rests on them.

use crate::{Error, Result};
use std::f64::consts::PI;

/// Euler-Mascheroni constant, 20-digit literal.
pub const EULER_MASCHERONI: f64 = 0.57721566490153286061;

/// Problem parameters `(N, p)` with an optional fractional order `s`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ProblemParams {
    /// Spatial dimension, `N >= 1`.
    pub dim: usize,
    /// Integrability exponent, `p > 1`.
    pub p: f64,
    /// Fractional order in `(0, 1)` when a fractional operator is involved.
    pub s: Option<f64>,
}

impl ProblemParams {
    pub fn new(dim: usize, p: f64) -> Result<Self> {
        if dim < 1 {
            return Err(Error::Domain(format!("dimension must be >= 1, got {dim}")));
        }
        if !(p > 1.0) || !p.is_finite() {
            return Err(Error::Domain(format!("p must be > 1, got {p}")));
        }
        Ok(Self { dim, p, s: None })
    }

    pub fn with_s(dim: usize, p: f64, s: f64) -> Result<Self> {
        let mut params = Self::new(dim, p)?;
        if !(s > 0.0 && s < 1.0) {
            return Err(Error::Domain(format!("s must lie in (0,1), got {s}")));
        }
        params.s = Some(s);
        Ok(params)
    }

    pub fn fractional_order(&self) -> Result<f64> {
        self.s
            .ok_or_else(|| Error::Domain("fractional order s missing".into()))
    }
}

/// The constants attached to a parameter pair `(N, p)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpecialConstants {
    /// Kernel constant `C_{N,p} = p Γ(N/2) / (2 π^{N/2})`.
    pub c_np: f64,
    /// Zero-order constant `ρ_N(p) = 2 ln 2 − γ + (p/2) ψ(N/2)`.
    pub rho_np: f64,
    /// Surface measure of the unit sphere, `ω_N = 2 π^{N/2} / Γ(N/2)`.
    pub omega_n: f64,
}

impl SpecialConstants {
    pub fn for_params(params: &ProblemParams) -> Result<Self> {
        Ok(Self {
            c_np: kernel_constant(params)?,
            rho_np: rho_constant(params)?,
            omega_n: sphere_measure(params.dim)?,
        })
    }
}

// Lanczos-type rational approximation after Pugh ("An Analysis of the
// Lanczos Gamma Approximation", 2004, p. 116), accurate to ~16 digits.
const GAMMA_R: f64 = 10.900511;
const TWO_SQRT_E_OVER_PI: f64 = 1.860382734205265717336249247666631120594218414085755;
const GAMMA_DK: [f64; 11] = [
    2.48574089138753565546e-5,
    1.05142378581721974210,
    -3.45687097222016235469,
    4.51227709466894823700,
    -2.98285225323576655721,
    1.05639711577126713077,
    -1.95428773191645869583e-1,
    1.70970543404441224307e-2,
    -5.71926117404305781283e-4,
    4.63399473359905636708e-6,
    -2.71994908488607703910e-9,
];

/// Gamma function for positive real arguments.
pub fn gamma_fn(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::Domain(format!("gamma requires x > 0, got {x}")));
    }
    let s: f64 = GAMMA_DK
        .iter()
        .enumerate()
        .skip(1)
        .fold(GAMMA_DK[0], |acc, (k, dk)| acc + dk / (x + k as f64 - 1.0));
    Ok(s * TWO_SQRT_E_OVER_PI * ((x - 0.5 + GAMMA_R) / std::f64::consts::E).powf(x - 0.5))
}

// B_{2k}/(2k) for the asymptotic expansion of digamma, k = 1..7.
const DIGAMMA_ASYMP: [f64; 7] = [
    1.0 / 12.0,
    -1.0 / 120.0,
    1.0 / 252.0,
    -1.0 / 240.0,
    1.0 / 132.0,
    -691.0 / 32760.0,
    1.0 / 12.0,
];

/// Digamma function `ψ = Γ'/Γ` for positive real arguments.
///
/// Shifts the argument into the asymptotic region `x >= 8` via the
/// recurrence `ψ(x+1) = ψ(x) + 1/x`, then sums the Bernoulli expansion.
pub fn digamma_fn(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::Domain(format!("digamma requires x > 0, got {x}")));
    }
    let mut shift = 0.0;
    let mut xx = x;
    while xx < 8.0 {
        shift -= 1.0 / xx;
        xx += 1.0;
    }
    let mut value = xx.ln() - 0.5 / xx;
    let inv2 = 1.0 / (xx * xx);
    let mut term = inv2;
    for c in DIGAMMA_ASYMP {
        value -= c * term;
        term *= inv2;
    }
    Ok(shift + value)
}

/// Surface measure of the unit sphere in dimension `N`.
pub fn sphere_measure(dim: usize) -> Result<f64> {
    if dim < 1 {
        return Err(Error::Domain("dimension must be >= 1".into()));
    }
    let n = dim as f64;
    Ok(2.0 * PI.powf(n / 2.0) / gamma_fn(n / 2.0)?)
}

/// Kernel constant `C_{N,p} = p Γ(N/2) / (2 π^{N/2})`.
///
/// Satisfies `C_{N,p} · ω_N = p` exactly.
pub fn kernel_constant(params: &ProblemParams) -> Result<f64> {
    let n = params.dim as f64;
    Ok(params.p * gamma_fn(n / 2.0)? / (2.0 * PI.powf(n / 2.0)))
}

/// Zero-order constant `ρ_N(p) = 2 ln 2 − γ + (p/2) ψ(N/2)`.
pub fn rho_constant(params: &ProblemParams) -> Result<f64> {
    let n = params.dim as f64;
    Ok(2.0 * std::f64::consts::LN_2 - EULER_MASCHERONI + params.p / 2.0 * digamma_fn(n / 2.0)?)
}

/// Normalization constant `C_{N,s,p}` of the fractional p-Laplacian.
///
/// Two branches as printed:
/// `s p 2^{2s−1} Γ((N+sp)/2) / (π^{N/2} Γ(1−s))` for `s <= 1/2` and
/// `s p 2^{2s−2} Γ((N+sp)/2) / (π^{(N−1)/2} Γ(1−s) Γ((p+1)/2))` for
/// `s > 1/2`. The branches coincide only for `p = 2`; all small-order
/// asymptotics in this crate live on the first branch.
pub fn frac_constant(params: &ProblemParams) -> Result<f64> {
    let s = params.fractional_order()?;
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::Domain(format!("s must lie in (0,1), got {s}")));
    }
    let n = params.dim as f64;
    let p = params.p;
    let top = s * p * gamma_fn((n + s * p) / 2.0)?;
    if s > 0.5 {
        Ok(top * (2.0f64).powf(2.0 * s - 2.0)
            / (PI.powf((n - 1.0) / 2.0) * gamma_fn(1.0 - s)? * gamma_fn((p + 1.0) / 2.0)?))
    } else {
        Ok(top * (2.0f64).powf(2.0 * s - 1.0) / (PI.powf(n / 2.0) * gamma_fn(1.0 - s)?))
    }
}
