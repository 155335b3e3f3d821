//! Characteristic functions of the linearisations at `0` and at `K`, the
//! minimal wave speed, and the exponents that govern the profile tails.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::ReactionModel;
use crate::numerics::bisect;

const BISECT_ITERS: usize = 400;
const EXPANSIONS: usize = 60;

/// Minimal speed and the double root of the characteristic function there.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpeedResult {
    pub c_star: f64,
    pub lambda_star: f64,
    /// `(|Δ(c*, λ*)|, |Δ_λ(c*, λ*)|)`
    pub residuals: (f64, f64),
}

/// Tail exponents at a supercritical speed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RootSet {
    pub c: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub upsilon: f64,
}

fn check_lambda(model: &ReactionModel, lambda: f64) -> Result<()> {
    if lambda >= model.lambda_plus() {
        return Err(Error::Domain(format!(
            "lambda = {lambda} is not below lambda+ = {}",
            model.lambda_plus()
        )));
    }
    Ok(())
}

/// `e^{-λcτ} G(λ)` and its λ-derivative.
fn delayed_mgf(model: &ReactionModel, c: f64, lambda: f64) -> Result<(f64, f64)> {
    let k = model.kernel();
    let g = k.mgf(lambda)?;
    let dg = k.mgf_derivative(lambda, 1)?;
    let ct = c * model.tau();
    let e = (-lambda * ct).exp();
    Ok((e * g, e * (dg - ct * g)))
}

/// `Δ(c,λ) = cλ - d(e^λ + e^{-λ} - 2) - ∂₁f(0,0) - ∂₂f(0,0) e^{-λcτ} G(λ)`.
pub fn delta(model: &ReactionModel, c: f64, lambda: f64) -> Result<f64> {
    check_lambda(model, lambda)?;
    let (a, b) = model.df0();
    let mut v = c * lambda - model.d() * (lambda.exp() + (-lambda).exp() - 2.0) - a;
    if b != 0.0 {
        v -= b * delayed_mgf(model, c, lambda)?.0;
    }
    Ok(v)
}

/// `∂Δ/∂λ`.
pub fn delta_lambda(model: &ReactionModel, c: f64, lambda: f64) -> Result<f64> {
    check_lambda(model, lambda)?;
    let b = model.df0().1;
    let mut v = c - model.d() * (lambda.exp() - (-lambda).exp());
    if b != 0.0 {
        v -= b * delayed_mgf(model, c, lambda)?.1;
    }
    Ok(v)
}

/// `∂Δ/∂c`.
pub fn delta_c(model: &ReactionModel, c: f64, lambda: f64) -> Result<f64> {
    check_lambda(model, lambda)?;
    let b = model.df0().1;
    let mut v = lambda;
    if b != 0.0 {
        v += b * lambda * model.tau() * delayed_mgf(model, c, lambda)?.0;
    }
    Ok(v)
}

/// `Δ̃(c,λ) = cλ + d(e^λ + e^{-λ} - 2) + ∂₁f(K,K) + ∂₂f(K,K) e^{λcτ} G(-λ)`.
pub fn delta_tilde(model: &ReactionModel, c: f64, lambda: f64) -> Result<f64> {
    let (a, b) = model.dfk();
    let mut v = c * lambda + model.d() * (lambda.exp() + (-lambda).exp() - 2.0) + a;
    if b != 0.0 {
        v += b * (lambda * c * model.tau()).exp() * model.kernel().mgf(-lambda)?;
    }
    if !v.is_finite() {
        return Err(Error::Domain(format!("characteristic function at K overflows at lambda = {lambda}")));
    }
    Ok(v)
}

/// Next trial point when growing a bracket toward `limit`.
fn grow(hi: f64, limit: f64) -> f64 {
    if limit.is_finite() {
        (2.0 * hi).min(0.5 * (hi + limit))
    } else {
        2.0 * hi
    }
}

/// Upper end of the exponent search at speed `c`: `λ⁺` if finite, else the
/// point where `d e^λ` exceeds `cλ` by `10³`.
pub fn search_cap(model: &ReactionModel, c: f64) -> f64 {
    let lp = model.lambda_plus();
    if lp.is_finite() {
        return lp;
    }
    let mut l: f64 = 1.0;
    while model.d() * l.exp() - c * l < 1e3 {
        l *= 1.25;
    }
    l
}

/// Maximiser of the concave map `λ ↦ Δ(c, λ)` on `(0, λ⁺)`.
fn peak(model: &ReactionModel, c: f64) -> Result<(f64, f64)> {
    let lp = model.lambda_plus();
    let mut lo = 0.0;
    let mut hi = if lp.is_finite() { (0.5 * lp).min(1.0) } else { 1.0 };
    let mut n = 0;
    while delta_lambda(model, c, hi)? > 0.0 {
        lo = hi;
        hi = grow(hi, lp);
        n += 1;
        if n > EXPANSIONS || hi >= lp {
            return Err(Error::Convergence(format!(
                "characteristic function has no interior maximum below lambda+ at c = {c}"
            )));
        }
    }
    let lm = bisect(|l| delta_lambda(model, c, l), lo, hi, BISECT_ITERS)?;
    Ok((lm, delta(model, c, lm)?))
}

/// Minimal wave speed `c*` and the tangency exponent `λ*`.
pub fn minimal_speed(model: &ReactionModel) -> Result<SpeedResult> {
    let (a, b) = model.df0();
    if a + b <= 0.0 || b < 0.0 {
        return Err(Error::Domain("zero is not linearly unstable; no minimal speed".into()));
    }
    let m = |c: f64| peak(model, c).map(|p| p.1);
    let mut lo = 0.0;
    let mut hi = 1.0;
    let mut n = 0;
    while m(hi)? <= 0.0 {
        lo = hi;
        hi *= 2.0;
        n += 1;
        if n > EXPANSIONS {
            return Err(Error::Convergence("could not bracket the minimal speed".into()));
        }
    }
    let mut c = 0.5 * (lo + hi);
    for _ in 0..BISECT_ITERS {
        c = 0.5 * (lo + hi);
        if c <= lo || c >= hi {
            break;
        }
        let v = m(c)?;
        if v == 0.0 {
            break;
        }
        if v < 0.0 {
            lo = c;
        } else {
            hi = c;
        }
    }
    let (lambda_star, _) = peak(model, c)?;
    let residuals = (
        delta(model, c, lambda_star)?.abs(),
        delta_lambda(model, c, lambda_star)?.abs(),
    );
    if residuals.0 >= 1e-10 || residuals.1 >= 1e-10 {
        return Err(Error::Convergence(format!(
            "minimal speed residuals too large: {:e}, {:e}",
            residuals.0, residuals.1
        )));
    }
    Ok(SpeedResult {
        c_star: c,
        lambda_star,
        residuals,
    })
}

/// The two positive roots of `Δ(c, ·)` for `c > c*`.
pub fn lambda_roots_with(model: &ReactionModel, speed: &SpeedResult, c: f64) -> Result<(f64, f64)> {
    if !(c > speed.c_star * (1.0 + 1e-9)) {
        return Err(Error::Domain(format!(
            "speed {c} is not above the minimal speed {}",
            speed.c_star
        )));
    }
    let f = |l: f64| delta(model, c, l);
    let (lm, _) = peak(model, c)?;
    let l1 = bisect(f, 0.0, lm, BISECT_ITERS)?;
    let lp = model.lambda_plus();
    let mut lo = lm;
    let mut hi = grow(lm, lp);
    let mut n = 0;
    while f(hi)? > 0.0 {
        lo = hi;
        hi = grow(hi, lp);
        n += 1;
        if n > EXPANSIONS || hi >= lp {
            return Err(Error::Convergence(format!("second root not found below lambda+ at c = {c}")));
        }
    }
    let l2 = bisect(f, lo, hi, BISECT_ITERS)?;
    if !(f(0.5 * (l1 + l2))? > 0.0) {
        return Err(Error::Convergence(format!("characteristic function not positive between its roots at c = {c}")));
    }
    if !(f(l1 * (1.0 - 1e-6))? < 0.0) {
        return Err(Error::Convergence(format!("first root at c = {c} is not a sign change")));
    }
    let beyond = l2 * (1.0 + 1e-6);
    if beyond < lp && !(f(beyond)? < 0.0) {
        return Err(Error::Convergence(format!("second root at c = {c} is not a sign change")));
    }
    Ok((l1, l2))
}

pub fn lambda_roots(model: &ReactionModel, c: f64) -> Result<(f64, f64)> {
    lambda_roots_with(model, &minimal_speed(model)?, c)
}

/// The unique positive zero of `Δ̃(c, ·)`.
pub fn upsilon(model: &ReactionModel, c: f64) -> Result<f64> {
    if !(c >= 0.0) {
        return Err(Error::Domain(format!("speed must be nonnegative, got {c}")));
    }
    let f = |l: f64| delta_tilde(model, c, l);
    let lo = 1e-8;
    if f(lo)? >= 0.0 {
        return Err(Error::Domain("the equilibrium K is not linearly stable".into()));
    }
    let mut hi = 1.0;
    let mut n = 0;
    while f(hi)? <= 0.0 {
        hi *= 2.0;
        n += 1;
        if n > EXPANSIONS {
            return Err(Error::Convergence(format!("could not bracket the decay rate at K for c = {c}")));
        }
    }
    bisect(f, lo, hi, BISECT_ITERS)
}

pub fn root_set(model: &ReactionModel, speed: &SpeedResult, c: f64) -> Result<RootSet> {
    let (lambda1, lambda2) = lambda_roots_with(model, speed, c)?;
    Ok(RootSet {
        c,
        lambda1,
        lambda2,
        upsilon: upsilon(model, c)?,
    })
}
