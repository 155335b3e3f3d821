//! Explicit upper and lower solutions that bracket the wave profile.

use crate::dispersion::{delta, RootSet};
use crate::error::{Error, Result};
use crate::model::ReactionModel;
use crate::waveops::{GridFunction, GridSpec};

/// `max{1, [N / Δ]^{(η-1)/σ}}` for numerator `N` and characteristic value `Δ > 0`.
pub fn q_formula(numerator: f64, delta_value: f64, eta: f64, sigma: f64) -> f64 {
    (numerator / delta_value).powf((eta - 1.0) / sigma).max(1.0)
}

/// Open interval of admissible `η`: `(1, min{1+σ, λ₂/λ₁})`.
pub fn eta_range(model: &ReactionModel, roots: &RootSet) -> (f64, f64) {
    (1.0, (1.0 + model.f2().sigma).min(roots.lambda2 / roots.lambda1))
}

/// Just inside the upper end when the root ratio binds, else the midpoint.
pub fn default_eta(model: &ReactionModel, roots: &RootSet) -> f64 {
    let sigma = model.f2().sigma;
    let ratio = roots.lambda2 / roots.lambda1;
    let hi = (1.0 + sigma).min(ratio);
    let near = hi * (1.0 - 1e-3);
    if ratio < 1.0 + sigma && near > 1.0 {
        near
    } else {
        0.5 * (1.0 + hi)
    }
}

/// `Q(c, η) = max{1, [2^{1+σ} G(ηλ₁)^{1+σ} M / Δ(c, ηλ₁)]^{(η-1)/σ}}`.
pub fn q_threshold(model: &ReactionModel, roots: &RootSet, eta: f64) -> Result<f64> {
    let (lo, hi) = eta_range(model, roots);
    if !(eta > lo && eta < hi) {
        return Err(Error::Domain(format!("eta = {eta} outside the admissible interval ({lo}, {hi})")));
    }
    let l = eta * roots.lambda1;
    let dv = delta(model, roots.c, l)?;
    if !(dv > 0.0) {
        return Err(Error::Domain(format!(
            "characteristic value at eta*lambda1 is {dv:e}, not positive"
        )));
    }
    let f2 = model.f2();
    let g = model.kernel().mgf(l)?;
    let num = 2f64.powf(1.0 + f2.sigma) * g.powf(1.0 + f2.sigma) * f2.m;
    Ok(q_formula(num, dv, eta, f2.sigma))
}

/// `min{K, e^{λ₁(ξ+ξ⁺)} + q e^{ηλ₁(ξ+ξ⁺)}}` on the grid.
pub fn build_supersolution(
    model: &ReactionModel,
    roots: &RootSet,
    eta: f64,
    q: f64,
    xi_plus: f64,
    grid: GridSpec,
) -> Result<GridFunction> {
    let q_min = q_threshold(model, roots, eta)?;
    if q < q_min {
        return Err(Error::Domain(format!("q = {q} is below the threshold {q_min}")));
    }
    let (k, l1) = (model.k(), roots.lambda1);
    Ok(GridFunction::from_fn(grid, l1, roots.upsilon, k, |x| {
        let z = x + xi_plus;
        ((l1 * z).exp() + q * (eta * l1 * z).exp()).min(k)
    }))
}

/// `max{0, e^{λ₁(ξ+ξ⁻)} - q e^{ηλ₁(ξ+ξ⁻)}}` on the grid.
pub fn build_subsolution(
    model: &ReactionModel,
    roots: &RootSet,
    eta: f64,
    q: f64,
    xi_minus: f64,
    grid: GridSpec,
) -> Result<GridFunction> {
    let q_min = q_threshold(model, roots, eta)?.max(1.0);
    if q < q_min {
        return Err(Error::Domain(format!("q = {q} is below the threshold {q_min}")));
    }
    let l1 = roots.lambda1;
    Ok(GridFunction::from_fn(grid, l1, 0.0, model.k(), |x| {
        let z = x + xi_minus;
        ((l1 * z).exp() - q * (eta * l1 * z).exp()).max(0.0)
    }))
}

/// Point beyond which the lower solution vanishes.
pub fn subsolution_cutoff(roots: &RootSet, eta: f64, q: f64, xi_minus: f64) -> f64 {
    -xi_minus - q.ln() / ((eta - 1.0) * roots.lambda1)
}

/// Point beyond which the upper solution equals `K`.
pub fn supersolution_cutoff(model: &ReactionModel, roots: &RootSet, eta: f64, q: f64, xi_plus: f64) -> f64 {
    let l1 = roots.lambda1;
    let g = |z: f64| (l1 * z).exp() + q * (eta * l1 * z).exp() - model.k();
    // g is increasing; bracket and bisect
    let (mut lo, mut hi) = (-1.0, 1.0);
    while g(lo) > 0.0 {
        lo *= 2.0;
    }
    while g(hi) < 0.0 {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi) - xi_plus
}

/// The ordered pair of explicit bounds.
#[derive(Debug, Clone)]
pub struct SuperSubPair {
    pub eta: f64,
    pub q: f64,
    pub q_threshold: f64,
    pub xi_plus: f64,
    pub xi_minus: f64,
    pub phi_plus: GridFunction,
    pub phi_minus: GridFunction,
}

impl SuperSubPair {
    /// `eta = None` uses [`default_eta`]; `q = None` uses `q_factor · max(Q, 1)`.
    #[allow(clippy::too_many_arguments)]
    pub fn build(
        model: &ReactionModel,
        roots: &RootSet,
        grid: GridSpec,
        eta: Option<f64>,
        q: Option<f64>,
        q_factor: f64,
        xi_plus: f64,
        xi_minus: f64,
    ) -> Result<Self> {
        let eta = eta.unwrap_or_else(|| default_eta(model, roots));
        let threshold = q_threshold(model, roots, eta)?;
        let q = q.unwrap_or(q_factor * threshold.max(1.0));
        let phi_plus = build_supersolution(model, roots, eta, q, xi_plus, grid)?;
        let phi_minus = build_subsolution(model, roots, eta, q, xi_minus, grid)?;
        if phi_minus.values.iter().zip(&phi_plus.values).any(|(a, b)| a > b) {
            return Err(Error::Domain(format!(
                "lower solution exceeds upper solution for xi+ = {xi_plus}, xi- = {xi_minus}"
            )));
        }
        if phi_minus.values.iter().all(|v| *v == 0.0) {
            return Err(Error::Domain("lower solution vanishes on the grid".into()));
        }
        Ok(Self {
            eta,
            q,
            q_threshold: threshold,
            xi_plus,
            xi_minus,
            phi_plus,
            phi_minus,
        })
    }
}
