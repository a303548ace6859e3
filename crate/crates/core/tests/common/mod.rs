//! Test-only oracles. Nothing here calls into the library's evaluation paths.
#![allow(dead_code)]

use std::ops::{Add, Div, Mul, Neg, Sub};

/// Unevaluated sum `hi + lo`, about 32 significant digits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dd {
    pub hi: f64,
    pub lo: f64,
}

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

impl Dd {
    pub const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };
    pub const ONE: Dd = Dd { hi: 1.0, lo: 0.0 };

    pub fn new(hi: f64, lo: f64) -> Self {
        let (h, l) = two_sum(hi, lo);
        Dd { hi: h, lo: l }
    }

    pub fn from_f64(x: f64) -> Self {
        Dd { hi: x, lo: 0.0 }
    }

    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }
}

impl Add for Dd {
    type Output = Dd;
    fn add(self, o: Dd) -> Dd {
        let (s, e) = two_sum(self.hi, o.hi);
        let (t, f) = two_sum(self.lo, o.lo);
        let (s, e) = two_sum(s, e + t);
        Dd::new(s, e + f)
    }
}

impl Neg for Dd {
    type Output = Dd;
    fn neg(self) -> Dd {
        Dd {
            hi: -self.hi,
            lo: -self.lo,
        }
    }
}

impl Sub for Dd {
    type Output = Dd;
    fn sub(self, o: Dd) -> Dd {
        self + (-o)
    }
}

impl Mul for Dd {
    type Output = Dd;
    fn mul(self, o: Dd) -> Dd {
        let (p, e) = two_prod(self.hi, o.hi);
        Dd::new(p, e + (self.hi * o.lo + self.lo * o.hi))
    }
}

impl Div for Dd {
    type Output = Dd;
    fn div(self, o: Dd) -> Dd {
        let q1 = self.hi / o.hi;
        let r = self - o * Dd::from_f64(q1);
        let q2 = r.hi / o.hi;
        let r = r - o * Dd::from_f64(q2);
        let q3 = r.hi / o.hi;
        Dd::new(q1, q2) + Dd::from_f64(q3)
    }
}

/// Γ(j/q) to double-double precision (reduced fractions only).
const GAMMA_BASE: &[(u32, u32, f64, f64)] = &[
    (1, 2, 1.772453850905516, -7.666586499825799e-17),
    (1, 3, 2.6789385347077475, 1.7947798648225244e-16),
    (2, 3, 1.3541179394264005, -4.6231203911366416e-17),
    (1, 4, 3.625609908221908, 1.0555907647086408e-16),
    (3, 4, 1.2254167024651776, 2.151319998296141e-18),
    (1, 10, 9.513507698668732, -5.234000253684692e-16),
    (3, 10, 2.991568987687591, -2.020918440153423e-16),
    (7, 10, 1.2980553326475577, 1.0537776385548969e-16),
    (1, 5, 4.5908437119988035, -4.248201525975715e-16),
    (2, 5, 2.218159543757688, 2.1777046154786542e-17),
    (3, 5, 1.489192248812817, 1.4783395427759045e-17),
    (4, 5, 1.1642297137253035, -1.096929776767215e-16),
    (9, 10, 1.0686287021193193, 9.233276016581433e-17),
];

fn gcd(a: u32, b: u32) -> u32 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Γ(m/q) for a positive rational argument, by the recurrence Γ(z+1) = zΓ(z)
/// from a tabulated base value.
pub fn gamma_rational(m: u32, q: u32) -> Dd {
    assert!(m > 0);
    let n = m / q;
    let r = m % q;
    if r == 0 {
        let mut f = Dd::ONE;
        for i in 1..n {
            f = f * Dd::from_f64(i as f64);
        }
        return f;
    }
    let g = gcd(r, q);
    let (rr, qq) = (r / g, q / g);
    let &(_, _, hi, lo) = GAMMA_BASE
        .iter()
        .find(|e| e.0 == rr && e.1 == qq)
        .unwrap_or_else(|| panic!("no tabulated Γ({rr}/{qq})"));
    let mut v = Dd::new(hi, lo);
    for i in 0..n {
        // (r/q + i) exactly as (r + i q)/q
        v = v * (Dd::from_f64((r + i * q) as f64) / Dd::from_f64(q as f64));
    }
    v
}

#[derive(Debug, Clone, Copy)]
pub enum B {
    One,
    Alpha,
    Two,
}

/// E_{α,b}(-x) with α = p/q by the power series summed in double-double.
/// Reliable while x^{1/α} ≲ 36.
pub fn ml_series_dd(p: u32, q: u32, b: B, x: f64) -> f64 {
    let base = match b {
        B::One => q,
        B::Alpha => p,
        B::Two => 2 * q,
    };
    let xd = Dd::from_f64(-x);
    let mut power = Dd::ONE;
    let mut sum = Dd::ZERO;
    for k in 0..4000u32 {
        let term = power / gamma_rational(base + p * k, q);
        sum = sum + term;
        if k > 5 && term.hi.abs() < 1e-34 * sum.hi.abs().max(1e-300) {
            break;
        }
        power = power * xd;
    }
    sum.to_f64()
}

fn rgamma(z: f64) -> f64 {
    if z <= 0.0 && z == z.round() {
        0.0
    } else {
        1.0 / libm::tgamma(z)
    }
}

/// Optimally truncated asymptotic series `Σ_{k≥1} (-1)^{k+1} x^{-k} / Γ(b - αk)`.
/// Truncation is decided on the envelope `Γ(1 - z) x^{-k} / π` of the terms,
/// since `1/Γ(z) = Γ(1 - z) sin(πz) / π` oscillates on the negative axis.
/// Reliable once x^{1/α} ≳ 36.
pub fn ml_asymptotic(alpha: f64, b: f64, x: f64) -> f64 {
    let mut sum = 0.0;
    let mut last = f64::INFINITY;
    let lx = x.ln();
    for k in 1..400 {
        let kf = k as f64;
        let z = b - alpha * kf;
        let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
        if z >= 0.5 {
            sum += sign * (-kf * lx).exp() * rgamma(z);
            continue;
        }
        let envelope = libm::lgamma(1.0 - z) - kf * lx;
        if envelope > last {
            break;
        }
        last = envelope;
        if z != z.round() {
            sum += sign * (std::f64::consts::PI * z).sin() / std::f64::consts::PI * envelope.exp();
        }
    }
    sum
}

pub fn ml_oracle(p: u32, q: u32, b: B, x: f64) -> f64 {
    let alpha = p as f64 / q as f64;
    if p == q {
        return match b {
            B::One | B::Alpha => (-x).exp(),
            B::Two => {
                if x == 0.0 {
                    1.0
                } else {
                    -(-x).exp_m1() / x
                }
            }
        };
    }
    if x.powf(1.0 / alpha) <= 36.0 {
        ml_series_dd(p, q, b, x)
    } else {
        let bv = match b {
            B::One => 1.0,
            B::Alpha => alpha,
            B::Two => 2.0,
        };
        ml_asymptotic(alpha, bv, x)
    }
}

/// Memory kernel via the oracle series, `α = p/q`.
pub fn beta_oracle(p: u32, q: u32, tau: f64, gamma: f64, t: f64) -> f64 {
    let alpha = p as f64 / q as f64;
    let u = t / tau;
    gamma / tau * u.powf(alpha - 1.0) * ml_oracle(p, q, B::Alpha, u.powf(alpha))
}

/// Same as [`beta_oracle`] with the reciprocal Γ table of the series cached.
pub struct KernelOracle {
    p: u32,
    q: u32,
    tau: f64,
    gamma: f64,
    recip: Vec<Dd>,
}

impl KernelOracle {
    pub fn new(p: u32, q: u32, tau: f64, gamma: f64) -> Self {
        let recip = (0..600u32)
            .map(|k| Dd::ONE / gamma_rational(p + p * k, q))
            .collect();
        Self {
            p,
            q,
            tau,
            gamma,
            recip,
        }
    }

    pub fn alpha(&self) -> f64 {
        self.p as f64 / self.q as f64
    }

    pub fn beta(&self, t: f64) -> f64 {
        let alpha = self.alpha();
        let u = t / self.tau;
        let x = u.powf(alpha);
        let e = if x.powf(1.0 / alpha) <= 36.0 {
            let xd = Dd::from_f64(-x);
            let mut power = Dd::ONE;
            let mut sum = Dd::ZERO;
            for (k, r) in self.recip.iter().enumerate() {
                let term = power * *r;
                sum = sum + term;
                if k > 5 && term.hi.abs() < 1e-34 * sum.hi.abs().max(1e-300) {
                    break;
                }
                power = power * xd;
            }
            sum.to_f64()
        } else {
            ml_asymptotic(alpha, alpha, x)
        };
        self.gamma / self.tau * u.powf(alpha - 1.0) * e
    }
}

#[allow(clippy::excessive_precision)]
const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
#[allow(clippy::excessive_precision)]
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
#[allow(clippy::excessive_precision)]
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

fn gk15(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut rk = fc * WGK[7];
    let mut rg = fc * WG[3];
    for i in 0..7 {
        let x = h * XGK[i];
        let (f1, f2) = (f(c - x), f(c + x));
        rk += WGK[i] * (f1 + f2);
        if i % 2 == 1 {
            rg += WG[i / 2] * (f1 + f2);
        }
    }
    (rk * h, ((rk - rg) * h).abs())
}

/// Adaptive Gauss–Kronrod (7/15) integration by recursive bisection.
pub fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
        let (v, err) = gk15(f, a, b);
        if err <= tol || depth > 40 {
            return v;
        }
        let m = 0.5 * (a + b);
        rec(f, a, m, 0.5 * tol, depth + 1) + rec(f, m, b, 0.5 * tol, depth + 1)
    }
    if a == b {
        return 0.0;
    }
    rec(f, a, b, tol, 0)
}

/// `∫_lo^hi β(u) du` with `u = v^{1/α}`, which removes the `u^{α-1}` singularity.
pub fn integrate_kernel(beta: &dyn Fn(f64) -> f64, alpha: f64, lo: f64, hi: f64, tol: f64) -> f64 {
    let q = 1.0 / alpha;
    let g = |v: f64| {
        // Gauss–Kronrod nodes are interior, so v > 0 here.
        beta(v.powf(q)) * q * v.powf(q - 1.0)
    };
    integrate(&g, lo.powf(alpha), hi.powf(alpha), tol)
}

/// `∫_{t_{n-1}}^{t_n} ∫_{t_{j-1}}^{min(t_j, t)} β(t - s) ds dt` by nested quadrature.
/// The outer variable is mapped as `t = t_{n-1} + v^{1/α}`.
pub fn omega_quadrature(
    beta: &dyn Fn(f64) -> f64,
    alpha: f64,
    nodes: &[f64],
    n: usize,
    j: usize,
    tol: f64,
) -> f64 {
    let (a, b) = (nodes[n - 1], nodes[n]);
    let (s0, s1) = (nodes[j - 1], nodes[j]);
    let q = 1.0 / alpha;
    let inner = |t: f64| {
        let top = s1.min(t);
        if top <= s0 {
            return 0.0;
        }
        // ∫_{s0}^{top} β(t - s) ds = ∫_{t - top}^{t - s0} β(u) du
        integrate_kernel(beta, alpha, t - top, t - s0, tol * 1e-2)
    };
    let outer = |v: f64| {
        let t = a + v.powf(q);
        inner(t) * q * v.powf(q - 1.0)
    };
    integrate(&outer, 0.0, (b - a).powf(alpha), tol)
}
