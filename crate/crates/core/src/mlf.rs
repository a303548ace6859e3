//! Mittag-Leffler function on the negative real axis and the memory kernel
//! built from it.
//!
//! For `0 < α < 1` the function `t ↦ E_α(-t^α)` is completely monotone and has
//! the spectral representation
//!
//! ```text
//! E_α(-t^α) = ∫_0^∞ e^{-rt} K_α(r) dr,
//! K_α(r) = sin(απ) r^{α-1} / (π (r^{2α} + 2 r^α cos(απ) + 1)).
//! ```
//!
//! Substituting `r = e^{s/α}` turns `K_α(r) dr` into the smooth, exponentially
//! decaying density `w(s) ds` with `∫ w = 1`, analytic in the strip
//! `|Im s| < min(π(1-α), απ/2)` once multiplied by the Laplace factors used
//! here. The trapezoidal rule on such integrands converges geometrically, and
//! since every integrand below is nonnegative the result keeps full relative
//! accuracy, including for differences like `1 - E` or second differences of
//! the double primitive that would cancel catastrophically if formed from
//! function values.
//!
//! Small arguments (`x ≤ 1/2`) use the Taylor series directly.

use std::f64::consts::PI;

use crate::error::{domain, Result};

/// Fractional kernel parameters `(α, τ, γ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelParams {
    /// Order of the kernel, `0 < α ≤ 1`.
    pub alpha: f64,
    /// Relaxation time in seconds.
    pub tau: f64,
    /// Total kernel mass `∫β`, `0 ≤ γ < 1`.
    pub gamma: f64,
}

impl KernelParams {
    pub fn new(alpha: f64, tau: f64, gamma: f64) -> Result<Self> {
        let p = Self { alpha, tau, gamma };
        p.validate()?;
        Ok(p)
    }

    /// `γ = 0.5, τ = 1, α = 2/3`.
    pub fn standard() -> Self {
        Self {
            alpha: 2.0 / 3.0,
            tau: 1.0,
            gamma: 0.5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return domain(format!("alpha = {} must lie in (0, 1]", self.alpha));
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return domain(format!("tau = {} must be positive", self.tau));
        }
        if !(self.gamma >= 0.0 && self.gamma < 1.0) {
            return domain(format!("gamma = {} must lie in [0, 1)", self.gamma));
        }
        Ok(())
    }
}

/// Second parameter of `E_{α,b}`; only these three are needed by the kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MlBeta {
    One,
    Alpha,
    Two,
}

impl MlBeta {
    fn from_value(alpha: f64, b: f64) -> Result<Self> {
        if b == 1.0 {
            Ok(Self::One)
        } else if b == 2.0 {
            Ok(Self::Two)
        } else if (b - alpha).abs() <= 1e-14 {
            Ok(Self::Alpha)
        } else {
            domain(format!("second parameter b = {b} must be 1, alpha or 2"))
        }
    }

    fn value(self, alpha: f64) -> f64 {
        match self {
            Self::One => 1.0,
            Self::Alpha => alpha,
            Self::Two => 2.0,
        }
    }
}

const TAYLOR_MAX: f64 = 0.5;

/// `E_{α,b}(-x)` for `α ∈ (0, 1]`, `b ∈ {1, α, 2}`, `x ≥ 0`.
pub fn ml_e(alpha: f64, b: f64, x: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if !(x >= 0.0) {
        return domain(format!("argument x = {x} must be nonnegative"));
    }
    let kind = MlBeta::from_value(alpha, b)?;
    Ok(ml_neg(alpha, kind, x))
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return domain(format!("alpha = {alpha} must lie in (0, 1]"));
    }
    Ok(())
}

pub(crate) fn ml_neg(alpha: f64, kind: MlBeta, x: f64) -> f64 {
    if x == 0.0 {
        return 1.0 / libm::tgamma(kind.value(alpha));
    }
    if alpha == 1.0 {
        return match kind {
            MlBeta::One | MlBeta::Alpha => (-x).exp(),
            MlBeta::Two => -(-x).exp_m1() / x,
        };
    }
    if x <= TAYLOR_MAX {
        return taylor(alpha, kind.value(alpha), x, 0);
    }
    let t = x.powf(1.0 / alpha);
    match kind {
        MlBeta::One => spectral_integral(alpha, &[t], |r| (-t * r).exp()),
        MlBeta::Alpha => {
            t.powf(1.0 - alpha) * spectral_integral(alpha, &[t], |r| r * (-t * r).exp())
        }
        MlBeta::Two => spectral_integral(alpha, &[t], |r| -(-t * r).exp_m1() / r) / t,
    }
}

/// `1/Γ(b) - E_{α,b}(-x)` for `b ∈ {1, 2}`, accurate in relative terms as `x → 0`.
pub(crate) fn ml_complement(alpha: f64, kind: MlBeta, x: f64) -> f64 {
    debug_assert!(kind != MlBeta::Alpha);
    if x == 0.0 {
        return 0.0;
    }
    if alpha == 1.0 {
        return match kind {
            MlBeta::Two => phi(x) / x,
            _ => -(-x).exp_m1(),
        };
    }
    if x <= TAYLOR_MAX {
        return -taylor(alpha, kind.value(alpha), x, 1);
    }
    let t = x.powf(1.0 / alpha);
    match kind {
        MlBeta::Two => spectral_integral(alpha, &[t], |r| phi(t * r) / r) / t,
        _ => spectral_integral(alpha, &[t], |r| -(-t * r).exp_m1()),
    }
}

/// `Σ_{k ≥ first} (-x)^k / Γ(b + αk)` with Neumaier summation, `0 ≤ x ≤ 1/2`.
fn taylor(alpha: f64, b: f64, x: f64, first: usize) -> f64 {
    let mut sum = 0.0_f64;
    let mut comp = 0.0_f64;
    let mut power = if first == 0 { 1.0 } else { -x };
    for k in first..2000 {
        let term = power / libm::tgamma(b + alpha * k as f64);
        let s = sum + term;
        if sum.abs() >= term.abs() {
            comp += (sum - s) + term;
        } else {
            comp += (term - s) + sum;
        }
        sum = s;
        // 1/Γ is bounded by 1/0.8856 on the positive axis.
        if power.abs() < 1e-18 * 0.885 * (sum + comp).abs() {
            break;
        }
        power *= -x;
    }
    sum + comp
}

/// `z - 1 + e^{-z}`, without cancellation for small `z`.
pub(crate) fn phi(z: f64) -> f64 {
    if z < 0.5 {
        // z²/2 - z³/6 + ... ; 16 terms reach 1e-17 relative at z = 1/2
        let mut term = z * z / 2.0;
        let mut sum = 0.0;
        for n in 3..20 {
            sum += term;
            term *= -z / n as f64;
        }
        sum
    } else {
        z + (-z).exp_m1()
    }
}

/// Spectral density `w(s)` of `E_α(-t^α)` in the variable `s = α ln r`.
#[inline]
fn density(alpha: f64, sin_ap: f64, cos_half_sq: f64, s: f64) -> f64 {
    let sh = (0.5 * s).sinh();
    // cosh s + cos(απ) = 2 sinh²(s/2) + 2 cos²(απ/2)
    sin_ap / (2.0 * alpha * PI * (2.0 * sh * sh + 2.0 * cos_half_sq))
}

const TAIL: f64 = 42.0;

/// `∫ w(s) f(e^{s/α}) ds` by the trapezoidal rule; `scales` are the time scales
/// where `f` changes character (the integration window is centred on each).
pub(crate) fn spectral_integral(alpha: f64, scales: &[f64], f: impl Fn(f64) -> f64) -> f64 {
    debug_assert!(alpha > 0.0 && alpha < 1.0);
    let strip = (PI * (1.0 - alpha)).min(0.5 * PI * alpha);
    let h = 2.0 * PI * 0.75 * strip / 39.0;
    let mut lo = 0.0_f64;
    let mut hi = 0.0_f64;
    for &t in scales {
        if t > 0.0 && t.is_finite() {
            let c = -alpha * t.ln();
            lo = lo.min(c);
            hi = hi.max(c);
        }
    }
    let i_lo = ((lo - TAIL) / h).floor() as i64;
    let i_hi = ((hi + TAIL) / h).ceil() as i64;
    let sin_ap = (alpha * PI).sin();
    let cos_half = (0.5 * alpha * PI).cos();
    let cos_half_sq = cos_half * cos_half;
    let inv_alpha = 1.0 / alpha;
    let mut sum = 0.0;
    for i in i_lo..=i_hi {
        let s = i as f64 * h;
        let r = (s * inv_alpha).exp();
        let v = f(r);
        if v != 0.0 {
            sum += density(alpha, sin_ap, cos_half_sq, s) * v;
        }
    }
    sum * h
}

fn check_time(t: f64, strict: bool) -> Result<()> {
    let ok = if strict { t > 0.0 } else { t >= 0.0 };
    if !ok || !t.is_finite() {
        let need = if strict { "positive" } else { "nonnegative" };
        return domain(format!("time t = {t} must be finite and {need}"));
    }
    Ok(())
}

/// Memory kernel `β(t) = γ τ^{-α} t^{α-1} E_{α,α}(-(t/τ)^α)`, `t > 0`.
pub fn kernel_beta(p: &KernelParams, t: f64) -> Result<f64> {
    p.validate()?;
    check_time(t, true)?;
    if p.gamma == 0.0 {
        return Ok(0.0);
    }
    Ok(p.gamma / p.tau * beta_unit(p.alpha, t / p.tau))
}

/// `u^{α-1} E_{α,α}(-u^α)`, the kernel for `γ = τ = 1`.
fn beta_unit(alpha: f64, u: f64) -> f64 {
    if alpha == 1.0 {
        return (-u).exp();
    }
    let x = u.powf(alpha);
    if x <= TAYLOR_MAX {
        u.powf(alpha - 1.0) * taylor(alpha, alpha, x, 0)
    } else {
        spectral_integral(alpha, &[u], |r| r * (-u * r).exp())
    }
}

/// `B(t) = ∫_0^t β = γ (1 - E_α(-(t/τ)^α))`.
pub fn beta_primitive(p: &KernelParams, t: f64) -> Result<f64> {
    p.validate()?;
    check_time(t, false)?;
    Ok(primitive(p, t))
}

fn primitive(p: &KernelParams, t: f64) -> f64 {
    if p.gamma == 0.0 || t == 0.0 {
        return 0.0;
    }
    let u = t / p.tau;
    p.gamma * ml_complement(p.alpha, MlBeta::One, u.powf(p.alpha))
}

/// `C(t) = ∫_0^t B = γ t (1 - E_{α,2}(-(t/τ)^α))`.
pub fn beta_double_primitive(p: &KernelParams, t: f64) -> Result<f64> {
    p.validate()?;
    check_time(t, false)?;
    Ok(double_primitive(p, t))
}

pub(crate) fn double_primitive(p: &KernelParams, t: f64) -> f64 {
    if p.gamma == 0.0 || t == 0.0 {
        return 0.0;
    }
    let u = t / p.tau;
    p.gamma * t * ml_complement(p.alpha, MlBeta::Two, u.powf(p.alpha))
}

/// `η(t) = 1 - B(t)`.
pub fn eta_fn(p: &KernelParams, t: f64) -> Result<f64> {
    Ok(1.0 - beta_primitive(p, t)?)
}

/// `B(start + len) - B(start)`, evaluated without subtracting primitives.
pub(crate) fn primitive_increment(p: &KernelParams, start: f64, len: f64) -> f64 {
    if p.gamma == 0.0 || len == 0.0 {
        return 0.0;
    }
    if start == 0.0 {
        return primitive(p, len);
    }
    let (a, l) = (start / p.tau, len / p.tau);
    if p.alpha == 1.0 {
        return p.gamma * (-a).exp() * -(-l).exp_m1();
    }
    p.gamma * spectral_integral(p.alpha, &[a, l], |r| (-a * r).exp() * -(-l * r).exp_m1())
}

/// Alternating tail `Σ_{k≥first} c_k (-z)^k / k!` used by the hat-moment
/// integrands below; `coef(k)` supplies `c_k`.
fn exp_tail(z: f64, first: usize, coef: impl Fn(usize) -> f64) -> f64 {
    let mut term = 1.0;
    for k in 1..first {
        term *= -z / k as f64;
    }
    let mut sum = 0.0;
    for k in first..first + 30 {
        term *= -z / k as f64;
        sum += coef(k) * term;
    }
    sum
}

/// `1 - e^{-z}(1 + z)`
fn chi(z: f64) -> f64 {
    if z < 1.0 {
        exp_tail(z, 2, |k| (k - 1) as f64)
    } else {
        1.0 - (-z).exp() * (1.0 + z)
    }
}

/// `z²/2 - z + 1 - e^{-z}`, the primitive of `phi`.
fn psi_rise(z: f64) -> f64 {
    if z < 1.0 {
        -exp_tail(z, 3, |_| 1.0)
    } else {
        0.5 * z * z - z + 1.0 - (-z).exp()
    }
}

/// `z²/2 - 1 + e^{-z}(1 + z)`
fn psi_fall(z: f64) -> f64 {
    if z < 1.0 {
        -exp_tail(z, 3, |k| (k - 1) as f64)
    } else {
        0.5 * z * z - 1.0 + (-z).exp() * (1.0 + z)
    }
}

/// Double integrals of the kernel against the two halves of a hat function:
/// for `I = [b, b + len]` and a source interval `J = [a, a + len]`,
/// `∫_I ∫_{J, s<t} β(t - s) ℓ(s) ds dt` with `ℓ` rising from 0 to 1 across `J`
/// (first value) and falling from 1 to 0 (second value). `gap = None` means
/// `J = I`; otherwise `gap = b - a - len ≥ 0`.
pub(crate) fn hat_moments(p: &KernelParams, gap: Option<f64>, len: f64) -> (f64, f64) {
    if p.gamma == 0.0 {
        return (0.0, 0.0);
    }
    let scale = p.gamma * p.tau;
    let h = len / p.tau;
    match gap {
        None => {
            let g = |r: f64| (psi_rise(h * r), psi_fall(h * r));
            if p.alpha == 1.0 {
                let (a, b) = g(1.0);
                return (scale * a / h, scale * b / h);
            }
            let rise = spectral_integral(p.alpha, &[h], |r| psi_rise(h * r) / (r * r));
            let fall = spectral_integral(p.alpha, &[h], |r| psi_fall(h * r) / (r * r));
            (scale * rise / h, scale * fall / h)
        }
        Some(gap) => {
            let d = gap / p.tau;
            let outer = |r: f64| (-d * r).exp() * -(-h * r).exp_m1() / (r * r);
            if p.alpha == 1.0 {
                return (
                    scale * outer(1.0) * phi(h) / h,
                    scale * outer(1.0) * chi(h) / h,
                );
            }
            let rise = spectral_integral(p.alpha, &[d, h], |r| outer(r) * phi(h * r));
            let fall = spectral_integral(p.alpha, &[d, h], |r| outer(r) * chi(h * r));
            (scale * rise / h, scale * fall / h)
        }
    }
}

/// `∫_{I}∫_{J} β(t - s) ds dt` for intervals `J = [s0, s0 + len_b]`,
/// `I = [s0 + len_b + gap, s0 + len_b + gap + len_a]`, i.e. the second
/// difference of `C` across the rectangle, with `gap ≥ 0`.
pub(crate) fn double_primitive_rectangle(
    p: &KernelParams,
    gap: f64,
    len_a: f64,
    len_b: f64,
) -> f64 {
    if p.gamma == 0.0 {
        return 0.0;
    }
    let (d, ka, kb) = (gap / p.tau, len_a / p.tau, len_b / p.tau);
    if p.alpha == 1.0 {
        return p.gamma * p.tau * (-d).exp() * (-ka).exp_m1() * (-kb).exp_m1();
    }
    let scales = [d, ka, kb];
    p.gamma
        * p.tau
        * spectral_integral(p.alpha, &scales, |r| {
            (-d * r).exp() * (-ka * r).exp_m1() * (-kb * r).exp_m1() / r
        })
}
