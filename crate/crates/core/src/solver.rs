//! Wave profiles by monotone iteration of the integral operator, started
//! from the explicit upper solution.

use serde::Serialize;

use crate::analysis::{self, DecayRates};
use crate::bounds::SuperSubPair;
use crate::dispersion::{minimal_speed, root_set, RootSet, SpeedResult};
use crate::error::{Error, Result};
use crate::model::ReactionModel;
use crate::numerics::bisect;
use crate::waveops::{mu_lower_bound, wave_residual, GridFunction, GridSpec, IntegralOperator};

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOptions {
    pub spacing: f64,
    /// `None` picks `max(40, 20/λ₁, 20/υ)`.
    pub half_length: Option<f64>,
    /// Stop when the sup-norm step falls below `tol · K`.
    pub tol: f64,
    pub max_iter: usize,
    /// Required relative distance of `c` above `c*`.
    pub min_gap: f64,
    /// Slack, relative to `K`, before an ordering breach is an error.
    pub order_tol: f64,
    pub eta: Option<f64>,
    pub q: Option<f64>,
    pub q_factor: f64,
    pub xi_plus: f64,
    pub xi_minus: f64,
    pub mu_factor: f64,
    /// Translate the result so that `φ(0) = K/2`.
    pub normalize: bool,
    /// Hold the far-left tail at the upper solution's leading exponential
    /// during iteration. Without it the iteration drifts along the
    /// translation family when convergence is slow.
    pub pin_left_tail: bool,
    /// Continuation levels `j` in `c_j = c*(1 + 2^{-j})` for the critical profile.
    pub critical_levels: (u32, u32),
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            spacing: 0.1,
            half_length: None,
            tol: 1e-10,
            max_iter: 100_000,
            min_gap: 1e-3,
            order_tol: 1e-13,
            eta: None,
            q: None,
            q_factor: 1.25,
            xi_plus: 0.0,
            xi_minus: 0.0,
            mu_factor: 1.05,
            normalize: true,
            pin_left_tail: true,
            critical_levels: (3, 10),
        }
    }
}

/// Largest ordering breaches seen during the iteration, relative to `K`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct SandwichStats {
    /// `max (φ_{n+1} - φ_n)`
    pub max_increase: f64,
    /// `max (φ⁻ - φ_{n+1})`
    pub max_below_lower: f64,
    /// `max (φ_{n+1} - φ⁺)`
    pub max_above_upper: f64,
}

/// A converged travelling-wave profile.
#[derive(Debug, Clone)]
pub struct WaveProfile {
    pub model: ReactionModel,
    pub c: f64,
    pub speed: SpeedResult,
    pub roots: RootSet,
    pub phi: GridFunction,
    pub iterations: usize,
    pub final_step_norm: f64,
    pub residual_norm: f64,
    pub normalized: bool,
    /// Translation applied by normalisation: `φ_out(ξ) = φ_raw(ξ + shift)`.
    pub shift: f64,
    pub mu: f64,
    pub eta: f64,
    pub q: f64,
    pub q_threshold: f64,
    pub xi_plus: f64,
    pub xi_minus: f64,
    pub quadrature_order: usize,
    pub sandwich: SandwichStats,
    pub fitted: Option<DecayRates>,
    pub critical: bool,
}

/// Flat summary for JSON output.
#[derive(Debug, Clone, Serialize)]
pub struct ProfileSummary {
    pub c: f64,
    pub c_star: f64,
    pub lambda_star: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub upsilon: f64,
    pub iterations: usize,
    pub final_step_norm: f64,
    pub residual_norm: f64,
    pub fitted_left_rate: Option<f64>,
    pub fitted_right_rate: Option<f64>,
    pub mu: f64,
    pub eta: f64,
    pub q: f64,
    pub spacing: f64,
    pub half_length: f64,
    pub critical: bool,
}

impl WaveProfile {
    pub fn summary(&self) -> ProfileSummary {
        ProfileSummary {
            c: self.c,
            c_star: self.speed.c_star,
            lambda_star: self.speed.lambda_star,
            lambda1: self.roots.lambda1,
            lambda2: self.roots.lambda2,
            upsilon: self.roots.upsilon,
            iterations: self.iterations,
            final_step_norm: self.final_step_norm,
            residual_norm: self.residual_norm,
            fitted_left_rate: self.fitted.map(|f| f.left.slope),
            fitted_right_rate: self.fitted.map(|f| -f.right.slope),
            mu: self.mu,
            eta: self.eta,
            q: self.q,
            spacing: self.phi.grid.spacing(),
            half_length: self.phi.grid.half_length(),
            critical: self.critical,
        }
    }

    pub fn to_csv(&self) -> String {
        self.phi.to_csv(&[("c", self.c), ("c_star", self.speed.c_star)])
    }
}

/// Default half-length for speed `c`.
pub fn default_half_length(roots: &RootSet) -> f64 {
    40f64.max(20.0 / roots.lambda1).max(20.0 / roots.upsilon)
}

/// Translates `phi` so that it takes the value `K/2` at `ξ = 0` exactly.
/// Returns the translated function and the shift `s` with `out(ξ) = phi(ξ + s)`.
pub fn normalize_half_level(phi: &GridFunction) -> Result<(GridFunction, f64)> {
    let half = 0.5 * phi.level;
    let i = phi
        .values
        .iter()
        .position(|v| *v >= half)
        .ok_or_else(|| Error::Convergence("profile never reaches K/2".into()))?;
    if i == 0 {
        return Err(Error::Convergence("profile exceeds K/2 at the left boundary".into()));
    }
    let (a, b) = (phi.grid.xi(i as isize - 1), phi.grid.xi(i as isize));
    let s = bisect(|x| Ok(phi.eval_smooth(x) - half), a, b, 200)?;
    let shift = s - phi.grid.origin();
    let mut out = phi.translated(shift);
    out.values[out.grid.center()] = half;
    Ok((out, shift))
}

/// Solves the profile equation at a speed above the minimal one.
pub fn solve_profile(model: &ReactionModel, c: f64, opts: &SolveOptions) -> Result<WaveProfile> {
    solve_profile_observed(model, c, opts, |_, _| {})
}

/// As [`solve_profile`], calling `observe(n, φ_n)` on every iterate
/// (`n = 0` is the upper solution).
pub fn solve_profile_observed(
    model: &ReactionModel,
    c: f64,
    opts: &SolveOptions,
    mut observe: impl FnMut(usize, &[f64]),
) -> Result<WaveProfile> {
    let speed = minimal_speed(model)?;
    if !(c >= speed.c_star * (1.0 + opts.min_gap)) {
        return Err(Error::Domain(format!(
            "speed {c} is within the relative gap {} of the minimal speed {}",
            opts.min_gap, speed.c_star
        )));
    }
    let roots = root_set(model, &speed, c)?;
    let half_length = opts.half_length.unwrap_or_else(|| default_half_length(&roots));
    let grid = GridSpec::new(half_length, opts.spacing)?;
    solve_on_grid(model, speed, roots, grid, opts, &mut observe)
}

fn solve_on_grid(
    model: &ReactionModel,
    speed: SpeedResult,
    roots: RootSet,
    grid: GridSpec,
    opts: &SolveOptions,
    observe: &mut dyn FnMut(usize, &[f64]),
) -> Result<WaveProfile> {
    let c = roots.c;
    let k = model.k();
    let pair = SuperSubPair::build(model, &roots, grid, opts.eta, opts.q, opts.q_factor, opts.xi_plus, opts.xi_minus)?;
    let mu = opts.mu_factor * mu_lower_bound(model, c)?;
    let op = IntegralOperator::new(model, c, mu, grid)?;
    let anchor = opts
        .pin_left_tail
        .then(|| (roots.lambda1 * (grid.xi(0) + opts.xi_plus)).exp());

    let mut phi = pair.phi_plus.clone();
    let lower = &pair.phi_minus.values;
    let upper = &pair.phi_plus.values;
    let slack = opts.order_tol * k;
    let mut stats = SandwichStats::default();
    let mut next = Vec::with_capacity(grid.len());
    observe(0, &phi.values);
    let mut step = f64::INFINITY;
    let mut iterations = 0;
    while iterations < opts.max_iter {
        op.apply(&phi, anchor, &mut next);
        iterations += 1;
        step = 0.0;
        for i in 0..next.len() {
            let (old, new) = (phi.values[i], next[i]);
            let inc = new - old;
            let below = lower[i] - new;
            let above = new - upper[i];
            stats.max_increase = stats.max_increase.max(inc / k);
            stats.max_below_lower = stats.max_below_lower.max(below / k);
            stats.max_above_upper = stats.max_above_upper.max(above / k);
            let (excess, what) = if inc > slack {
                (inc, "iterate increased")
            } else if below > slack {
                (below, "iterate fell below the lower solution")
            } else if above > slack {
                (above, "iterate rose above the upper solution")
            } else {
                (0.0, "")
            };
            if excess > 0.0 {
                return Err(Error::OrderViolation {
                    iteration: iterations,
                    node: i,
                    excess,
                    detail: what.into(),
                });
            }
            step = step.max(inc.abs());
        }
        std::mem::swap(&mut phi.values, &mut next);
        observe(iterations, &phi.values);
        if step < opts.tol * k {
            break;
        }
    }
    if !(step < opts.tol * k) {
        return Err(Error::Convergence(format!(
            "no convergence after {iterations} iterations (last step {step:e})"
        )));
    }

    let (phi, shift) = if opts.normalize {
        normalize_half_level(&phi)?
    } else {
        (phi, 0.0)
    };
    let residual_norm = wave_residual(model, c, &phi)?.interior_sup();
    let fitted = analysis::fit_decay_rates(&phi, None).ok();
    Ok(WaveProfile {
        model: model.clone(),
        c,
        speed,
        roots,
        phi,
        iterations,
        final_step_norm: step,
        residual_norm,
        normalized: opts.normalize,
        shift,
        mu,
        eta: pair.eta,
        q: pair.q,
        q_threshold: pair.q_threshold,
        xi_plus: pair.xi_plus,
        xi_minus: pair.xi_minus,
        quadrature_order: op.quadrature().order,
        sandwich: stats,
        fitted,
        critical: false,
    })
}

/// Result of the continuation toward the minimal speed.
#[derive(Debug, Clone)]
pub struct CriticalProfile {
    /// Profile at the last continuation speed.
    pub profile: WaveProfile,
    pub speeds: Vec<f64>,
    /// Sup-distance between consecutive normalised profiles.
    pub distances: Vec<f64>,
    /// Oscillation of `ln φ - λ*ξ - ln|ξ|` over the left fit window.
    pub log_corrected_spread: f64,
    /// Oscillation of `ln φ - λ*ξ` over the same window.
    pub log_plain_spread: f64,
}

/// Approximates the profile at `c*` by solving at `c_j = c*(1 + 2^{-j})`
/// on a common grid and returning the last member.
pub fn solve_critical(model: &ReactionModel, opts: &SolveOptions) -> Result<CriticalProfile> {
    let speed = minimal_speed(model)?;
    let (j0, j1) = opts.critical_levels;
    if j0 > j1 {
        return Err(Error::Domain("continuation levels must be increasing".into()));
    }
    let speeds: Vec<f64> = (j0..=j1).map(|j| speed.c_star * (1.0 + 2f64.powi(-(j as i32)))).collect();
    let first = root_set(model, &speed, speeds[0])?;
    let half_length = opts.half_length.unwrap_or_else(|| default_half_length(&first));
    let grid = GridSpec::new(half_length, opts.spacing)?;
    let mut member_opts = opts.clone();
    member_opts.normalize = true;
    let mut profiles = Vec::with_capacity(speeds.len());
    for &c in &speeds {
        let roots = root_set(model, &speed, c)?;
        profiles.push(solve_on_grid(model, speed, roots, grid, &member_opts, &mut |_, _| {})?);
    }
    let distances: Vec<f64> = profiles
        .windows(2)
        .map(|w| {
            w[0].phi
                .values
                .iter()
                .zip(&w[1].phi.values)
                .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()))
        })
        .collect();
    if distances.len() >= 2 && !(distances[distances.len() - 1] < distances[0]) {
        return Err(Error::Convergence(format!(
            "continuation profiles do not contract: distances {distances:?}"
        )));
    }
    let mut profile = profiles.pop().expect("at least one continuation level");
    profile.critical = true;
    let (corrected, plain) = analysis::critical_log_spread(&profile.phi, speed.lambda_star)?;
    profile.fitted = analysis::fit_decay_rates(&profile.phi, Some(speed.lambda_star)).ok();
    Ok(CriticalProfile {
        profile,
        speeds,
        distances,
        log_corrected_spread: corrected,
        log_plain_spread: plain,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::KernelSpec;
    use crate::model::library;

    fn fisher() -> ReactionModel {
        library::fisher(1.0, 0.0, KernelSpec::dirac()).unwrap()
    }

    #[test]
    fn fisher_profile_at_2_5() {
        let m = fisher();
        let p = solve_profile(&m, 2.5, &SolveOptions::default()).unwrap();
        let v = &p.phi.values;
        assert!(v.windows(2).all(|w| w[1] > w[0]));
        assert!(v.iter().all(|x| *x > 0.0 && *x < 1.0));
        assert!(v[0] < 1e-8 && v[v.len() - 1] > 1.0 - 1e-8);
        assert_eq!(v[p.phi.grid.center()], 0.5);
        assert!(p.residual_norm < 1e-6, "{}", p.residual_norm);
        assert!(p.sandwich.max_increase <= 1e-13);
        assert!(p.sandwich.max_below_lower <= 1e-13);
        assert_eq!(p.quadrature_order, 5);
    }

    #[test]
    fn left_amplitude_matches_pinned_tail() {
        let m = fisher();
        let opts = SolveOptions {
            normalize: false,
            ..SolveOptions::default()
        };
        let p = solve_profile(&m, 2.5, &opts).unwrap();
        let l1 = p.roots.lambda1;
        // φ e^{-λ₁ξ} → e^{λ₁ξ⁺} = 1
        let amp = |i: usize| p.phi.values[i] * (-l1 * p.phi.grid.xi(i as isize)).exp();
        assert!((amp(0) - 1.0).abs() < 1e-6, "{}", amp(0));
        assert!((amp(50) - 1.0).abs() < (amp(400) - 1.0).abs());
    }

    #[test]
    fn rejects_speed_too_close_to_critical() {
        let m = fisher();
        let c = minimal_speed(&m).unwrap().c_star * 1.0005;
        assert!(matches!(solve_profile(&m, c, &SolveOptions::default()), Err(Error::Domain(_))));
    }

    #[test]
    fn observer_sees_every_iterate() {
        let m = fisher();
        let mut count = 0;
        let p = solve_profile_observed(&m, 3.0, &SolveOptions::default(), |n, v| {
            assert_eq!(n, count);
            assert!(!v.is_empty());
            count += 1;
        })
        .unwrap();
        assert_eq!(count, p.iterations + 1);
    }

    #[test]
    fn iteration_cap_reports_convergence_error() {
        let m = fisher();
        let opts = SolveOptions {
            max_iter: 5,
            ..SolveOptions::default()
        };
        assert!(matches!(solve_profile(&m, 2.5, &opts), Err(Error::Convergence(_))));
    }

    #[test]
    fn normalisation_pins_half_level() {
        let g = GridSpec::new(20.0, 0.1).unwrap();
        let f = GridFunction::from_fn(g, 1.0, 1.0, 2.0, |x| 2.0 / (1.0 + (-(x - 1.234)).exp()));
        let (n, s) = normalize_half_level(&f).unwrap();
        assert!((s - 1.234).abs() < 1e-8);
        assert_eq!(n.values[g.center()], 1.0);
    }
}
