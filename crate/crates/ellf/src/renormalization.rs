//! Closed-form analytics: the generating functions Φ, Ξ, ℓ, Σ; the fixed
//! point x_u and λ̃_u; the twenty step weights p_i, q_i; the polynomials
//! Φ̂, Θ̂; and the mean matrix with its eigen-data (λ, ν, dimension).
//!
//! Every formula is transcribed directly from its printed closed form with
//! no algebraic simplification, generically over [`Scalar`] so the same
//! transcription is evaluated with floats, jets, exact rationals, and
//! truncated power series.

use std::ops::{Add, Div, Mul, Sub};

use num_rational::BigRational;
use serde::Serialize;
use thiserror::Error;

use crate::scalar::{Jet, Scalar};

#[derive(Debug, Error)]
pub enum RenormError {
    #[error("x = {x} is at or beyond the smallest denominator pole {pole}")]
    PoleProximity { x: f64, pole: f64 },
    #[error("failed to bracket a root for u = {0}")]
    Bracketing(f64),
    #[error("invariant violated: {0}")]
    Invariant(String),
}

/// Expression wrapper giving [`Scalar`] ordinary operator syntax, so the
/// printed formulas can be transcribed one-to-one.
#[derive(Clone)]
struct Ex<T: Scalar>(T);

impl<T: Scalar> Ex<T> {
    /// Clone shorthand; formulas reuse subexpressions heavily.
    fn c(&self) -> Self {
        self.clone()
    }
    fn p(&self, n: u32) -> Self {
        Ex(self.0.powi(n))
    }
}

fn k<T: Scalar>(n: i64) -> Ex<T> {
    Ex(T::from_int(n))
}

impl<T: Scalar> Add for Ex<T> {
    type Output = Ex<T>;
    fn add(self, o: Ex<T>) -> Ex<T> {
        Ex(self.0.add(&o.0))
    }
}
impl<T: Scalar> Sub for Ex<T> {
    type Output = Ex<T>;
    fn sub(self, o: Ex<T>) -> Ex<T> {
        Ex(self.0.sub(&o.0))
    }
}
impl<T: Scalar> Mul for Ex<T> {
    type Output = Ex<T>;
    fn mul(self, o: Ex<T>) -> Ex<T> {
        Ex(self.0.mul(&o.0))
    }
}
impl<T: Scalar> Div for Ex<T> {
    type Output = Ex<T>;
    fn div(self, o: Ex<T>) -> Ex<T> {
        Ex(self.0.div(&o.0))
    }
}

/// Φ(x,u): total weight of W_1.
pub fn phi<T: Scalar>(x: &T, u: &T) -> T {
    let (x, u) = (Ex(x.clone()), Ex(u.clone()));
    let ux = u.c() * x.c();
    let num = x.p(2)
        * (k(1) + (k(1) + u.c()) * x.c() - u.c() * (k(1) - u.p(2)) * x.p(2)
            + k(2) * (k(1) - u.c()).p(2) * u.p(2) * x.p(3));
    let den = (k(1) + ux.c()) * (k(1) - k(2) * ux.c())
        - k(4) * u.p(2) * x.p(2)
            * (k(1) + k(2) * (k(1) - u.p(2)) * x.p(2) - k(2) * u.c() * (k(1) - u.c()).p(2) * x.p(3));
    (num / den).0
}

/// The denominator of Φ's printed closed form (for pole location).
pub fn phi_denominator<T: Scalar>(x: &T, u: &T) -> T {
    let (x, u) = (Ex(x.clone()), Ex(u.clone()));
    let ux = u.c() * x.c();
    ((k(1) + ux.c()) * (k(1) - k(2) * ux.c())
        - k(4) * u.p(2) * x.p(2)
            * (k(1) + k(2) * (k(1) - u.p(2)) * x.p(2)
                - k(2) * u.c() * (k(1) - u.c()).p(2) * x.p(3)))
    .0
}

/// Ξ(x,u): weight of the single loops at O confined to one half of F_1.
pub fn xi<T: Scalar>(x: &T, u: &T) -> T {
    let (x, u) = (Ex(x.clone()), Ex(u.clone()));
    let ux = u.c() * x.c();
    (k(2) * u.c() * x.p(2) / ((k(1) + ux.c()) * (k(1) - k(2) * ux.c()))
        * (k(1) + k(2) * (k(1) - u.p(2)) * x.p(2) - k(2) * (k(1) - u.c()).p(2) * u.c() * x.p(3)))
    .0
}

/// ℓ(x,u) = ux² + ux⁴/(1−u²x²).
pub fn ell<T: Scalar>(x: &T, u: &T) -> T {
    let (x, u) = (Ex(x.clone()), Ex(u.clone()));
    (u.c() * x.p(2) + u.c() * x.p(4) / (k(1) - u.p(2) * x.p(2))).0
}

/// Σ(x,u) = 2ux²/(1−ux).
pub fn sigma<T: Scalar>(x: &T, u: &T) -> T {
    let (x, u) = (Ex(x.clone()), Ex(u.clone()));
    (k(2) * u.c() * x.p(2) / (k(1) - u.c() * x.c())).0
}

/// Shared subexpressions of the p_i / q'_i closed forms.
struct Factors<T: Scalar> {
    x: Ex<T>,
    u: Ex<T>,
    /// (1+ux)(1−2ux)
    d1: Ex<T>,
    /// 1/(1−2uΞ): sum over loops formed at O (or at b)
    r_loop: Ex<T>,
    /// 1/(1−u(ℓ+Ξ))
    r_ell: Ex<T>,
    /// 1/(1−u(Σ+Ξ))
    r_sigma: Ex<T>,
    /// 1/(1−u(ux²+Ξ))
    r_ux2: Ex<T>,
    /// 1 + ux + u²x²{2(u²−u+1)x+3}/((1+ux)(1−2ux))
    a: Ex<T>,
    /// 1 + u²x(1+2x)/((1+ux)(1−2ux))
    b: Ex<T>,
    /// 1 + ux(1+2x)/((1+ux)(1−2ux))
    b_lin: Ex<T>,
    /// 1 + u(1+u)x²/((1+ux)(1−2ux))
    f_u: Ex<T>,
    /// 1 + u²(1+u)x²/((1+ux)(1−2ux))
    f_u2: Ex<T>,
    /// 1/(1−u²x²)
    r_sq: Ex<T>,
}

impl<T: Scalar> Factors<T> {
    fn new(x: &T, u: &T) -> Self {
        let (x, u) = (Ex(x.clone()), Ex(u.clone()));
        let ux = u.c() * x.c();
        let d1 = (k(1) + ux.c()) * (k(1) - k(2) * ux.c());
        let xiv = Ex(xi(&x.0, &u.0));
        let ellv = Ex(ell(&x.0, &u.0));
        let sigv = Ex(sigma(&x.0, &u.0));
        let r_loop = k(1) / (k(1) - k(2) * u.c() * xiv.c());
        let r_ell = k(1) / (k(1) - u.c() * (ellv.c() + xiv.c()));
        let r_sigma = k(1) / (k(1) - u.c() * (sigv.c() + xiv.c()));
        let r_ux2 = k(1) / (k(1) - u.c() * (u.c() * x.p(2) + xiv.c()));
        let a = k(1)
            + ux.c()
            + u.p(2) * x.p(2) / d1.c() * (k(2) * (u.p(2) - u.c() + k(1)) * x.c() + k(3));
        let b = k(1) + u.p(2) * x.c() * (k(1) + k(2) * x.c()) / d1.c();
        let b_lin = k(1) + u.c() * x.c() * (k(1) + k(2) * x.c()) / d1.c();
        let f_u = k(1) + u.c() * (k(1) + u.c()) * x.p(2) / d1.c();
        let f_u2 = k(1) + u.p(2) * (k(1) + u.c()) * x.p(2) / d1.c();
        let r_sq = k(1) / (k(1) - u.p(2) * x.p(2));
        Factors {
            x,
            u,
            d1,
            r_loop,
            r_ell,
            r_sigma,
            r_ux2,
            a,
            b,
            b_lin,
            f_u,
            f_u2,
            r_sq,
        }
    }
}

/// p_i(x,u), i = 1..=10: the W_1 loop-erasure outcome weights.
pub fn p_closed<T: Scalar>(i: usize, x: &T, u: &T) -> T {
    let f = Factors::new(x, u);
    let (x, u) = (f.x.c(), f.u.c());
    let e = match i {
        1 => {
            x.c() * f.r_loop.c()
                * (k(1) + u.p(2) * x.p(2) * ((k(1) - u.c()).p(2) * x.c() + k(2)) / f.d1.c())
        }
        2 => {
            u.c() * x.p(2) * f.r_loop.c()
                * f.f_u.c()
                * (k(1) + u.p(3) * x.p(2) * f.r_sq.c())
        }
        3 => {
            u.c() * x.p(2) * f.r_loop.c()
                * f.f_u2.c()
                * (k(1) + u.c() * x.p(2) * f.r_sq.c())
        }
        4 => u.p(3) * x.p(3) * f.r_loop.c() * f.r_sq.c() * f.f_u.c(),
        5 => u.p(2) * x.p(3) * f.r_loop.c() * f.r_sq.c() * f.f_u2.c(),
        6 => u.p(2) * x.p(3) * f.r_loop.c() * f.r_sq.c() * f.f_u.c(),
        7 => {
            x.p(2) * f.r_loop.c()
                * f.f_u2.c()
                * (k(1) + u.p(3) * x.p(2) * f.r_sq.c())
        }
        8..=10 => k(0),
        _ => panic!("index out of range"),
    };
    e.0
}

/// q'_i(x,u), i = 1..=10: numerators of the V_1 outcome weights.
pub fn q_prime_closed<T: Scalar>(i: usize, x: &T, u: &T) -> T {
    let f = Factors::new(x, u);
    let (x, u) = (f.x.c(), f.u.c());
    let e = match i {
        1 => (k(1) + u.c()).p(2) * x.p(6) * f.r_loop.c() * f.b.p(2),
        2 => {
            // The printed middle factor reads (1+ux)(1−2x) in the second
            // parenthesis; the series oracle confirms (1−2ux), matching
            // every sibling formula, so that reading is used here.
            let b2 = k(1) + u.p(2) * x.c() * (k(1) + k(2) * x.c()) / f.d1.c();
            x.p(5) * f.a.c() * f.r_loop.c() * b2
                * (k(1)
                    + u.p(3) * x.p(2) * f.r_sq.c()
                    + u.p(3) * x.p(4) * f.r_sq.p(2) * f.r_ell.c())
                + u.p(3) * x.p(7) * f.r_sq.p(2) * f.r_ell.c() * f.f_u.c()
        }
        3 => {
            k(2) * u.c() * (k(1) + u.c()) * x.p(7) * f.r_loop.c() * f.b.p(2)
                * (u.c()
                    + u.p(2) * x.p(2) * f.r_sq.c()
                    + u.c() * f.r_sigma.c() * x.p(2) / (k(1) - u.c() * x.c())
                        * (k(1) + u.p(2) * x.c() / (k(1) - u.c() * x.c())))
                + x.p(5) * f.r_sigma.c() * f.f_u2.c() / (k(1) - u.c() * x.c())
                    * (k(1) + u.p(2) * x.c() / (k(1) - u.c() * x.c()))
        }
        4 => {
            u.p(2) * x.p(6) * f.r_loop.c() * f.a.c() * f.b.c()
                * f.r_sq.c()
                * (k(1) + u.p(2) * x.p(4) * f.r_sq.c() * f.r_ell.c())
                * (k(1) + x.p(2) * f.r_ux2.c())
                + u.p(4) * x.p(8) * f.r_sq.p(2) * f.r_ell.c() * f.f_u.c()
                    * (k(1) + x.p(2) * f.r_ux2.c())
                + u.p(2) * x.p(6) * f.r_sq.c() * f.r_ux2.c() * f.f_u.c()
        }
        5 => {
            u.p(3) * x.p(6) * f.r_loop.c() * f.a.c() * f.b_lin.c()
                * ((k(1) + u.c() * x.p(2) * f.r_sq.c())
                    * u.c() * x.p(2) * f.r_sq.c() * f.r_ell.c()
                    + f.r_sq.c())
                + u.p(2) * x.p(6) * f.f_u2.c()
                    * (k(1) + u.c() * x.p(2) * f.r_sq.c())
                    * f.r_ell.c()
                    * f.r_sq.c()
        }
        6 => {
            k(2) * u.c() * (k(1) + u.c()) * x.p(8) * f.b.p(2) * f.r_loop.c()
                * ((k(1) + u.p(2) * x.c() / (k(1) - u.c() * x.c()))
                    * u.c() * f.r_sigma.c() * u.c() * x.p(2) / (k(1) - u.c() * x.c())
                    + u.c() * f.r_sq.c())
                * (k(1) + u.p(2) * x.p(2) * f.r_ux2.c())
                + u.p(2) * x.p(6) * f.f_u.c()
                    * (k(1) + u.p(2) * x.c() / (k(1) - u.c() * x.c()))
                    * f.r_sigma.c()
                    / (k(1) - u.c() * x.c())
                    * (k(1) + u.p(2) * x.p(2) * f.r_ux2.c())
                + u.p(3) * x.p(6) * f.f_u.c() * f.r_sq.c() * f.r_ux2.c()
        }
        7 => {
            u.c() * x.p(5) * f.r_loop.c() * f.a.c() * f.b_lin.c()
                * ((k(1) + u.c() * x.p(2) * f.r_sq.c())
                    * u.p(2) * x.p(2) * f.r_sq.c() * f.r_ell.c()
                    + (k(1) + u.p(3) * x.p(2) * f.r_sq.c()))
                + u.c() * x.p(5) * f.f_u2.c()
                    * (k(1) + u.c() * x.p(2) * f.r_sq.c())
                    * f.r_ell.c()
                    * f.r_sq.c()
        }
        8 => {
            (u.p(2) * x.p(4) * f.a.c() * f.r_loop.c()
                * (k(1)
                    + u.c() * x.c()
                    + x.p(2) * ((k(4) * u.p(2) - k(2) * u.c()) * x.c() + u.p(2) + k(2))
                        / f.d1.c())
                + x.p(2)
                    * (k(1)
                        + u.p(2) * x.p(2) * ((k(1) - u.c()).p(2) * x.c() + k(2)) / f.d1.c()))
                * f.r_ell.c()
                * x.p(2)
                * f.r_sq.c()
        }
        9 => u.c() * x.c() * Ex(q_prime_closed(8, &x.0, &u.0)),
        10 => {
            let brace = x.c() * (k(1) + u.p(2) * x.c() / (k(1) - u.c() * x.c()))
                * f.r_sigma.c()
                * u.p(2) * x.p(2) / (k(1) - u.c() * x.c())
                + x.c()
                + u.p(3) * x.p(3) * f.r_sq.c();
            k(2) * u.c() * (k(1) + u.c()) * x.p(6) * f.b.p(2) * f.r_loop.c()
                * brace.c()
                * u.c() * x.p(2) * f.r_ux2.c()
                + u.c() * x.p(2) * f.f_u.c() * brace * x.p(2) * f.r_ux2.c()
        }
        _ => panic!("index out of range"),
    };
    e.0
}

/// q_i(x,u) = (1/x²)·(1/(1−2uΞ))·q'_i(x,u).
pub fn q_closed<T: Scalar>(i: usize, x: &T, u: &T) -> T {
    let f = Factors::new(x, u);
    (Ex(q_prime_closed(i, x, u)) * f.r_loop.c() / f.x.p(2)).0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GenFn {
    Phi,
    Xi,
    Ell,
    Sigma,
}

fn gen_eval<T: Scalar>(name: GenFn, x: &T, u: &T) -> T {
    match name {
        GenFn::Phi => phi(x, u),
        GenFn::Xi => xi(x, u),
        GenFn::Ell => ell(x, u),
        GenFn::Sigma => sigma(x, u),
    }
}

/// Smallest positive zero of the relevant printed denominator, if any in
/// (0, 3]: the Φ denominator for Phi/Xi, 1−u²x² for Ell, 1−ux for Sigma.
pub fn smallest_pole(name: GenFn, u: f64) -> Option<f64> {
    let den = |x: f64| -> f64 {
        match name {
            GenFn::Phi | GenFn::Xi => phi_denominator(&x, &u),
            GenFn::Ell => 1.0 - u * u * x * x,
            GenFn::Sigma => 1.0 - u * x,
        }
    };
    let steps = 3000;
    let hi = 3.0;
    let mut prev = den(hi / steps as f64 * 1e-3);
    for i in 1..=steps {
        let x = hi * i as f64 / steps as f64;
        let cur = den(x);
        if prev > 0.0 && cur <= 0.0 {
            let (mut lo, mut hi) = (hi * (i - 1) as f64 / steps as f64, x);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if den(mid) > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            return Some(0.5 * (lo + hi));
        }
        prev = cur;
    }
    None
}

/// Evaluate a printed generating function, rejecting x at or beyond the
/// smallest denominator pole.
pub fn eval_generating(name: GenFn, x: f64, u: f64) -> Result<f64, RenormError> {
    check_pole(name, x, u)?;
    Ok(gen_eval(name, &x, &u))
}

/// Jet-mode evaluation: value and ∂/∂x.
pub fn eval_generating_jet(name: GenFn, x: f64, u: f64) -> Result<Jet, RenormError> {
    check_pole(name, x, u)?;
    Ok(gen_eval(name, &Jet::variable(x), &Jet::constant(u)))
}

/// Exact-rational evaluation (no pole guard: exactness makes the caller
/// responsible for staying in the disk of convergence).
pub fn eval_generating_rational(name: GenFn, x: &BigRational, u: &BigRational) -> BigRational {
    gen_eval(name, x, u)
}

fn check_pole(name: GenFn, x: f64, u: f64) -> Result<(), RenormError> {
    if let Some(p) = smallest_pole(name, u) {
        if x >= p {
            return Err(RenormError::PoleProximity { x, pole: p });
        }
    }
    Ok(())
}

/// The fixed point x_u of Φ(·,u) and the working pole estimate.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct FixedPoint {
    pub x_u: f64,
    pub pole: Option<f64>,
}

/// Solve Φ(x,u) = x for the positive fixed point below the denominator's
/// smallest positive root: bracketed bisection to 1e−14, then one Newton
/// polish through the jet derivative.
pub fn fixed_point(u: f64) -> Result<FixedPoint, RenormError> {
    let pole = smallest_pole(GenFn::Phi, u);
    let upper = pole.map(|p| 0.999 * p).unwrap_or(1.5);
    let g = |x: f64| phi(&x, &u) - x;
    // bracket: g < 0 near 0 (Φ ~ x²), g > 0 approaching the pole
    let mut lo = upper * 1e-6;
    let mut hi = upper;
    if g(lo) >= 0.0 || g(hi) <= 0.0 {
        // scan for a sign change
        let mut found = false;
        let mut prev = g(lo);
        for i in 1..=4000 {
            let x = upper * i as f64 / 4000.0;
            let cur = g(x);
            if prev < 0.0 && cur >= 0.0 {
                lo = upper * (i - 1) as f64 / 4000.0;
                hi = x;
                found = true;
                break;
            }
            prev = cur;
        }
        if !found {
            return Err(RenormError::Bracketing(u));
        }
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if g(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-16 {
            break;
        }
    }
    let mut x = 0.5 * (lo + hi);
    // Newton polish on g(x) = Φ(x) − x
    for _ in 0..2 {
        let j = phi(&Jet::variable(x), &Jet::constant(u));
        let (gv, gd) = (j.v - x, j.d - 1.0);
        if gd.abs() > 1e-12 {
            let step = gv / gd;
            if (x - step) > lo * 0.5 && (x - step) < hi * 2.0 {
                x -= step;
            }
        }
    }
    Ok(FixedPoint { x_u: x, pole })
}

/// Independent exact-rational bisection for x_u (oracle cross-check):
/// `iters` halvings of a rational bracket.
pub fn fixed_point_rational(u: &BigRational, iters: u32) -> BigRational {
    use num_bigint::BigInt;
    let half = BigRational::new(BigInt::from(1), BigInt::from(2));
    let g = |x: &BigRational| phi(x, u).sub(x);
    // establish a bracket by scanning dyadic points
    let mut lo = BigRational::new(BigInt::from(1), BigInt::from(1000));
    let mut hi = lo.clone();
    let step = BigRational::new(BigInt::from(1), BigInt::from(128));
    loop {
        hi = &hi + &step;
        let d = phi_denominator(&hi, u);
        if d <= BigRational::from_integer(BigInt::from(0)) {
            panic!("bracket scan crossed the denominator pole");
        }
        if g(&hi) >= BigRational::from_integer(BigInt::from(0)) {
            break;
        }
        lo = hi.clone();
    }
    for _ in 0..iters {
        let mid = (&lo + &hi) * &half;
        if g(&mid) < BigRational::from_integer(BigInt::from(0)) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (&lo + &hi) * half
}

/// λ̃_u = ∂Φ/∂x at (x_u, u).
pub fn lambda_tilde(u: f64) -> Result<f64, RenormError> {
    let fp = fixed_point(u)?;
    Ok(eval_generating_jet(GenFn::Phi, fp.x_u, u)?.d)
}

/// Per-u renormalization record.
#[derive(Debug, Clone, Serialize)]
pub struct StepWeights {
    pub u: f64,
    pub x_u: f64,
    pub lambda_tilde: f64,
    pub p: [f64; 10],
    pub q: [f64; 10],
}

/// Evaluate all twenty printed step-weight formulas at (x_u, u) and check
/// the probability-vector invariants.
pub fn step_weights(u: f64) -> Result<StepWeights, RenormError> {
    let fp = fixed_point(u)?;
    let x = fp.x_u;
    let mut p = [0.0; 10];
    let mut q = [0.0; 10];
    for i in 1..=10 {
        p[i - 1] = p_closed(i, &x, &u);
        q[i - 1] = q_closed(i, &x, &u);
    }
    for (name, v) in [("p", &p), ("q", &q)] {
        let sum: f64 = v.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(RenormError::Invariant(format!(
                "{name} weights sum to {sum}, expected 1"
            )));
        }
        if v.iter().any(|w| *w < -1e-12) {
            return Err(RenormError::Invariant(format!("negative {name} weight")));
        }
    }
    Ok(StepWeights {
        u,
        x_u: x,
        lambda_tilde: eval_generating_jet(GenFn::Phi, x, u)?.d,
        p,
        q,
    })
}

/// Coefficient tables of Φ̂(x,y) and Θ̂(x,y): term list ((i,j), coeff)
/// meaning coeff·xⁱyʲ.
#[derive(Debug, Clone, Serialize)]
pub struct HatPolynomials {
    pub phi: Vec<((u32, u32), f64)>,
    pub theta: Vec<((u32, u32), f64)>,
}

pub fn hat_polynomials(w: &StepWeights) -> HatPolynomials {
    let p = &w.p;
    let q = &w.q;
    HatPolynomials {
        phi: vec![
            ((2, 0), p[0]),
            ((1, 1), p[1] + p[2]),
            ((0, 2), p[3]),
            ((2, 1), p[4] + p[5]),
            ((3, 0), p[6]),
        ],
        theta: vec![
            ((2, 0), q[0]),
            ((1, 1), q[1] + q[2]),
            ((0, 2), q[3]),
            ((2, 1), q[4] + q[5] + q[7]),
            ((3, 0), q[6]),
            ((1, 2), q[8] + q[9]),
        ],
    }
}

fn eval_terms(terms: &[((u32, u32), f64)], x: f64, y: f64) -> f64 {
    terms
        .iter()
        .map(|&((i, j), c)| c * x.powi(i as i32) * y.powi(j as i32))
        .sum()
}

impl HatPolynomials {
    pub fn eval(&self, x: f64, y: f64) -> (f64, f64) {
        (eval_terms(&self.phi, x, y), eval_terms(&self.theta, x, y))
    }

    /// Jacobian of (Φ̂, Θ̂) at (x, y); at (1,1) this is the mean matrix.
    pub fn jacobian(&self, x: f64, y: f64) -> [[f64; 2]; 2] {
        let d = |terms: &[((u32, u32), f64)]| -> [f64; 2] {
            let mut dx = 0.0;
            let mut dy = 0.0;
            for &((i, j), c) in terms {
                dx += c * i as f64 * x.powi(i as i32 - 1) * y.powi(j as i32);
                dy += c * j as f64 * x.powi(i as i32) * y.powi(j as i32 - 1);
            }
            [dx, dy]
        };
        [d(&self.phi), d(&self.theta)]
    }
}

/// N-fold composition (Φ̂_N, Θ̂_N)(x, y), evaluated pointwise.
pub fn iterate_hats(hats: &HatPolynomials, n: u32, x: f64, y: f64) -> (f64, f64) {
    let (mut a, mut b) = (x, y);
    for _ in 0..n {
        let (na, nb) = hats.eval(a, b);
        a = na;
        b = nb;
    }
    (a, b)
}

/// Mean matrix and eigen-data.
#[derive(Debug, Clone, Serialize)]
pub struct SpectralData {
    pub mean_matrix: [[f64; 2]; 2],
    pub lambda: f64,
    /// The vector u with E[B_i] = u_i: right eigenvector, normalized u₁+u₂=1.
    pub right_vec: [f64; 2],
    /// The vector v of the Kesten–Stigum limit λ^{-N}S^N → B·v: left
    /// eigenvector, normalized (u, v) = 1.
    pub left_vec: [f64; 2],
    pub nu: f64,
    pub hausdorff_dim: f64,
}

pub fn spectral(w: &StepWeights) -> SpectralData {
    let m = hat_polynomials(w).jacobian(1.0, 1.0);
    let tr = m[0][0] + m[1][1];
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let lambda = 0.5 * (tr + (tr * tr - 4.0 * det).sqrt());
    // right eigenvector of M (column), chosen to avoid cancellation
    let mut r = if m[0][1].abs() > 1e-15 {
        [m[0][1], lambda - m[0][0]]
    } else {
        [lambda - m[1][1], m[1][0]]
    };
    let s = r[0] + r[1];
    r = [r[0] / s, r[1] / s];
    // left eigenvector: right eigenvector of the transpose
    let mut l = if m[1][0].abs() > 1e-15 {
        [m[1][0], lambda - m[0][0]]
    } else {
        [lambda - m[1][1], m[0][1]]
    };
    let inner = r[0] * l[0] + r[1] * l[1];
    l = [l[0] / inner, l[1] / inner];
    let nu = 2f64.ln() / lambda.ln();
    SpectralData {
        mean_matrix: m,
        lambda,
        right_vec: r,
        left_vec: l,
        nu,
        hausdorff_dim: 1.0 / nu,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigInt;

    fn rat(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    const X0: f64 = 0.6180339887498949; // (√5−1)/2

    #[test]
    fn fixed_points_and_slopes() {
        let fp1 = fixed_point(1.0).unwrap();
        assert!((fp1.x_u - 0.25).abs() < 1e-12);
        assert!((lambda_tilde(1.0).unwrap() - 5.0).abs() < 1e-10);

        let fp0 = fixed_point(0.0).unwrap();
        assert!((fp0.x_u - X0).abs() < 1e-9);
        assert!((lambda_tilde(0.0).unwrap() - (7.0 - 5f64.sqrt()) / 2.0).abs() < 1e-9);
    }

    #[test]
    fn rational_bisection_agrees() {
        let x = fixed_point_rational(&rat(1, 2), 60);
        let xf = fixed_point(0.5).unwrap().x_u;
        let xr: f64 = x.numer().to_string().parse::<f64>().unwrap()
            / x.denom().to_string().parse::<f64>().unwrap();
        assert!((xr - xf).abs() < 1e-12);
    }

    #[test]
    fn weights_at_u_one() {
        let w = step_weights(1.0).unwrap();
        let p_exp = [
            0.5,
            2.0 / 15.0,
            2.0 / 15.0,
            1.0 / 30.0,
            1.0 / 30.0,
            1.0 / 30.0,
            2.0 / 15.0,
            0.0,
            0.0,
            0.0,
        ];
        let q_exp = [
            1.0 / 9.0,
            11.0 / 90.0,
            11.0 / 90.0,
            2.0 / 45.0,
            2.0 / 45.0,
            2.0 / 45.0,
            8.0 / 45.0,
            2.0 / 9.0,
            1.0 / 18.0,
            1.0 / 18.0,
        ];
        for i in 0..10 {
            assert!((w.p[i] - p_exp[i]).abs() < 1e-10, "p[{i}] = {}", w.p[i]);
            assert!((w.q[i] - q_exp[i]).abs() < 1e-10, "q[{i}] = {}", w.q[i]);
        }
    }

    #[test]
    fn weights_at_u_zero() {
        let w = step_weights(0.0).unwrap();
        let x0 = w.x_u;
        let p_exp = [x0, 0.0, 0.0, 0.0, 0.0, 0.0, x0 * x0, 0.0, 0.0, 0.0];
        let q_exp = [
            x0.powi(4),
            x0.powi(3),
            x0.powi(3),
            0.0,
            0.0,
            0.0,
            0.0,
            x0 * x0,
            0.0,
            0.0,
        ];
        for i in 0..10 {
            assert!((w.p[i] - p_exp[i]).abs() < 1e-9, "p[{i}] = {}", w.p[i]);
            assert!((w.q[i] - q_exp[i]).abs() < 1e-9, "q[{i}] = {}", w.q[i]);
        }
    }

    #[test]
    fn weight_sum_identities_spot() {
        for (x, u) in [(0.2, 0.7), (0.15, 1.3), (0.3, 0.4), (0.24, 1.0)] {
            let psum: f64 = (1..=10).map(|i| p_closed(i, &x, &u)).sum();
            let qsum: f64 = (1..=10).map(|i| q_closed(i, &x, &u)).sum();
            let target = phi(&x, &u) / x;
            assert!((psum - target).abs() < 1e-12, "p sum at ({x},{u})");
            assert!((qsum - target * target).abs() < 1e-12, "q sum at ({x},{u})");
        }
    }

    #[test]
    fn hats_normalized_and_u1_jacobian() {
        let w = step_weights(1.0).unwrap();
        let h = hat_polynomials(&w);
        let (a, b) = h.eval(1.0, 1.0);
        assert!((a - 1.0).abs() < 1e-12 && (b - 1.0).abs() < 1e-12);
        let m = h.jacobian(1.0, 1.0);
        let expect = [[9.0 / 5.0, 2.0 / 5.0], [26.0 / 15.0, 13.0 / 15.0]];
        for i in 0..2 {
            for j in 0..2 {
                assert!((m[i][j] - expect[i][j]).abs() < 1e-10);
            }
        }
        // rounding at (1,1) is amplified by λ^N under iteration
        for n in 1..=20 {
            let (a, b) = iterate_hats(&h, n, 1.0, 1.0);
            assert!((a - 1.0).abs() < 1e-8 && (b - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn iterated_jacobian_matches_matrix_power() {
        let w = step_weights(1.0).unwrap();
        let h = hat_polynomials(&w);
        let m = h.jacobian(1.0, 1.0);
        // (M³)₁₁ vs central difference of Φ̂₃ in x at (1,1)
        let mut mm = [[1.0, 0.0], [0.0, 1.0]];
        for _ in 0..3 {
            mm = [
                [
                    mm[0][0] * m[0][0] + mm[0][1] * m[1][0],
                    mm[0][0] * m[0][1] + mm[0][1] * m[1][1],
                ],
                [
                    mm[1][0] * m[0][0] + mm[1][1] * m[1][0],
                    mm[1][0] * m[0][1] + mm[1][1] * m[1][1],
                ],
            ];
        }
        let eps = 1e-6;
        let (hi, _) = iterate_hats(&h, 3, 1.0 + eps, 1.0);
        let (lo, _) = iterate_hats(&h, 3, 1.0 - eps, 1.0);
        let fd = (hi - lo) / (2.0 * eps);
        assert!((fd - mm[0][0]).abs() < 1e-4);
    }

    #[test]
    fn spectral_values() {
        let s1 = spectral(&step_weights(1.0).unwrap());
        let expect = (20.0 + 205f64.sqrt()) / 15.0;
        assert!((s1.lambda - expect).abs() < 1e-10);
        assert!((s1.nu - 0.83753).abs() < 1e-4);
        assert!((s1.hausdorff_dim * s1.nu - 1.0).abs() < 1e-12);
        // eigenvector normalizations
        assert!((s1.right_vec[0] + s1.right_vec[1] - 1.0).abs() < 1e-12);
        let inner = s1.right_vec[0] * s1.left_vec[0] + s1.right_vec[1] * s1.left_vec[1];
        assert!((inner - 1.0).abs() < 1e-12);

        let s0 = spectral(&step_weights(0.0).unwrap());
        assert!((s0.lambda - (7.0 - 5f64.sqrt()) / 2.0).abs() < 1e-9);
        assert!(s0.mean_matrix[0][1].abs() < 1e-12);
    }

    #[test]
    fn monotone_and_bounded_on_grid() {
        let mut prev_x = f64::INFINITY;
        for i in 0..=20 {
            let u = i as f64 / 10.0;
            let fp = fixed_point(u).unwrap();
            assert!(fp.x_u < prev_x, "x_u not decreasing at u={u}");
            prev_x = fp.x_u;
            assert!(lambda_tilde(u).unwrap() > 2.0);
            let s = spectral(&step_weights(u).unwrap());
            assert!(s.lambda > 2.0 && s.lambda < 3.0, "lambda out of range at u={u}");
        }
    }

    #[test]
    fn pole_guard() {
        let pole = smallest_pole(GenFn::Phi, 1.0).unwrap();
        assert!((pole - 1.0 / 3.0).abs() < 1e-9);
        assert!(matches!(
            eval_generating(GenFn::Phi, 0.4, 1.0),
            Err(RenormError::PoleProximity { .. })
        ));
        assert!(eval_generating(GenFn::Phi, 0.25, 1.0).is_ok());
    }

    #[test]
    fn lambda_tilde_finite_difference_cross_check() {
        let fp = fixed_point(0.5).unwrap();
        let eps = 1e-7;
        let fd = (phi(&(fp.x_u + eps), &0.5) - phi(&(fp.x_u - eps), &0.5)) / (2.0 * eps);
        assert!((lambda_tilde(0.5).unwrap() - fd).abs() < 1e-6);
    }
}
