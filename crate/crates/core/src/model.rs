//! Reaction models: the nonlinearity, equilibria, linearisations and the
//! hypothesis checks the wave theory relies on.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::expr::Expression;
use crate::kernel::KernelSpec;

/// Reaction term `f(u, v)` where `v` is the delayed nonlocal average.
#[derive(Debug, Clone, PartialEq)]
pub enum Nonlinearity {
    /// `v (1 - u)`
    Fisher,
    /// `-a u + b (1 - u) v`
    VectorDisease { a: f64, b: f64 },
    /// `-a u + p v e^{-q v}`
    Nicholson { a: f64, p: f64, q: f64 },
    /// `b v e^{-γτ} - δ u²`; the maturation delay is the model delay.
    AgeStructured { b: f64, gamma: f64, delta: f64, tau: f64 },
    /// `u (k - u)`, independent of `v`.
    Logistic { k: f64 },
    Expression(Expression),
}

impl Nonlinearity {
    pub fn name(&self) -> String {
        match self {
            Self::Fisher => "fisher".into(),
            Self::VectorDisease { .. } => "vector_disease".into(),
            Self::Nicholson { .. } => "nicholson".into(),
            Self::AgeStructured { .. } => "age_structured".into(),
            Self::Logistic { .. } => "logistic".into(),
            Self::Expression(e) => format!("expression: {e}"),
        }
    }

    #[inline]
    pub fn eval(&self, u: f64, v: f64) -> f64 {
        match self {
            Self::Fisher => v * (1.0 - u),
            Self::VectorDisease { a, b } => -a * u + b * (1.0 - u) * v,
            Self::Nicholson { a, p, q } => -a * u + p * v * (-q * v).exp(),
            Self::AgeStructured { b, gamma, delta, tau } => b * v * (-gamma * tau).exp() - delta * u * u,
            Self::Logistic { k } => u * (k - u),
            Self::Expression(e) => e.eval(u, v),
        }
    }

    /// Analytic partial derivatives where available.
    pub fn analytic_partials(&self, u: f64, v: f64) -> Option<(f64, f64)> {
        Some(match self {
            Self::Fisher => (-v, 1.0 - u),
            Self::VectorDisease { a, b } => (-a - b * v, b * (1.0 - u)),
            Self::Nicholson { a, p, q } => (-a, p * (-q * v).exp() * (1.0 - q * v)),
            Self::AgeStructured { b, gamma, delta, tau } => (-2.0 * delta * u, b * (-gamma * tau).exp()),
            Self::Logistic { k } => (k - 2.0 * u, 0.0),
            Self::Expression(_) => return None,
        })
    }

    /// The positive equilibrium implied by the parameters, if there is one.
    pub fn natural_equilibrium(&self) -> Option<f64> {
        match self {
            Self::Fisher => Some(1.0),
            Self::VectorDisease { a, b } => Some(1.0 - a / b),
            Self::Nicholson { a, p, q } => Some((p / a).ln() / q),
            Self::AgeStructured { b, gamma, delta, tau } => Some(b * (-gamma * tau).exp() / delta),
            Self::Logistic { k } => Some(*k),
            Self::Expression(_) => None,
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        match self {
            Self::VectorDisease { a, b } => {
                if !(*a > 0.0 && b > a) {
                    return bad(format!("vector_disease needs 0 < a < b, got a={a}, b={b}"));
                }
            }
            Self::Nicholson { a, p, q } => {
                if !(*a > 0.0 && p > a && *q > 0.0) {
                    return bad(format!("nicholson needs a > 0, p > a, q > 0, got a={a}, p={p}, q={q}"));
                }
                if p / a > std::f64::consts::E {
                    return bad(format!(
                        "nicholson birth term is not monotone on [0, K] unless p/a <= e (got {})",
                        p / a
                    ));
                }
            }
            Self::AgeStructured { b, gamma, delta, tau } => {
                if !(*b > 0.0 && *gamma >= 0.0 && *delta > 0.0 && *tau >= 0.0) {
                    return bad("age_structured needs b > 0, gamma >= 0, delta > 0".into());
                }
            }
            Self::Logistic { k } => {
                if !(*k > 0.0) {
                    return bad(format!("logistic needs k > 0, got {k}"));
                }
            }
            Self::Fisher | Self::Expression(_) => {}
        }
        Ok(())
    }
}

/// Where the superlinear remainder constants came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum F2Source {
    Supplied,
    Estimated,
}

/// Constants `M, σ` bounding `∂₁f(0,0)u + ∂₂f(0,0)v - f(u,v) ≤ M(u+v)^{1+σ}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct F2Constants {
    pub m: f64,
    pub sigma: f64,
    pub source: F2Source,
}

/// A lattice reaction model. Immutable once built.
#[derive(Debug, Clone)]
pub struct ReactionModel {
    d: f64,
    tau: f64,
    k: f64,
    k_explicit: bool,
    nonlinearity: Nonlinearity,
    kernel: KernelSpec,
    df0: (f64, f64),
    dfk: (f64, f64),
    f2: F2Constants,
}

const F2_GRID: usize = 256;

impl ReactionModel {
    /// Builds a model. `k = None` uses the equilibrium implied by the
    /// nonlinearity; expression models must give `k`.
    pub fn new(
        d: f64,
        tau: f64,
        k: Option<f64>,
        nonlinearity: Nonlinearity,
        kernel: KernelSpec,
    ) -> Result<Self> {
        if !(d > 0.0 && d.is_finite()) {
            return Err(Error::Config(format!("coupling d must be positive, got {d}")));
        }
        if !(tau >= 0.0 && tau.is_finite()) {
            return Err(Error::Config(format!("delay tau must be nonnegative, got {tau}")));
        }
        let nonlinearity = match nonlinearity {
            Nonlinearity::AgeStructured { b, gamma, delta, .. } => Nonlinearity::AgeStructured { b, gamma, delta, tau },
            other => other,
        };
        nonlinearity.validate()?;
        let k_explicit = k.is_some();
        let k = match k.or_else(|| nonlinearity.natural_equilibrium()) {
            Some(k) => k,
            None => return Err(Error::Config("K must be given for expression nonlinearities".into())),
        };
        if !(k > 0.0 && k.is_finite()) {
            return Err(Error::Config(format!("equilibrium K must be positive, got {k}")));
        }
        let mut model = Self {
            d,
            tau,
            k,
            k_explicit,
            nonlinearity,
            kernel,
            df0: (0.0, 0.0),
            dfk: (0.0, 0.0),
            f2: F2Constants {
                m: 1.0,
                sigma: 1.0,
                source: F2Source::Estimated,
            },
        };
        model.df0 = model.partials(0.0, 0.0);
        model.dfk = model.partials(k, k);
        model.f2 = model.estimate_f2();
        Ok(model)
    }

    /// Overrides the superlinear remainder constants.
    pub fn with_f2(mut self, m: f64, sigma: f64) -> Result<Self> {
        if !(m > 0.0 && m.is_finite()) {
            return Err(Error::Config(format!("M must be positive, got {m}")));
        }
        if !(sigma > 0.0 && sigma <= 1.0) {
            return Err(Error::Config(format!("sigma must lie in (0, 1], got {sigma}")));
        }
        self.f2 = F2Constants {
            m,
            sigma,
            source: F2Source::Supplied,
        };
        Ok(self)
    }

    /// Same model with a different delay. Delay-dependent nonlinearities and
    /// an implied equilibrium are updated; supplied constants are kept.
    pub fn with_tau(&self, tau: f64) -> Result<Self> {
        let k = if self.k_explicit { Some(self.k) } else { None };
        let m = Self::new(self.d, tau, k, self.nonlinearity.clone(), self.kernel.clone())?;
        match self.f2.source {
            F2Source::Supplied => m.with_f2(self.f2.m, self.f2.sigma),
            F2Source::Estimated => Ok(m),
        }
    }

    pub fn with_d(&self, d: f64) -> Result<Self> {
        let k = if self.k_explicit { Some(self.k) } else { None };
        let m = Self::new(d, self.tau, k, self.nonlinearity.clone(), self.kernel.clone())?;
        match self.f2.source {
            F2Source::Supplied => m.with_f2(self.f2.m, self.f2.sigma),
            F2Source::Estimated => Ok(m),
        }
    }

    pub fn d(&self) -> f64 {
        self.d
    }
    pub fn tau(&self) -> f64 {
        self.tau
    }
    pub fn k(&self) -> f64 {
        self.k
    }
    pub fn nonlinearity(&self) -> &Nonlinearity {
        &self.nonlinearity
    }
    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }
    /// `(∂₁f(0,0), ∂₂f(0,0))`
    pub fn df0(&self) -> (f64, f64) {
        self.df0
    }
    /// `(∂₁f(K,K), ∂₂f(K,K))`
    pub fn dfk(&self) -> (f64, f64) {
        self.dfk
    }
    pub fn f2(&self) -> F2Constants {
        self.f2
    }

    /// Upper limit for exponents in the dispersion relation at zero.
    pub fn lambda_plus(&self) -> f64 {
        if self.df0.1 > 0.0 {
            self.kernel.lambda0()
        } else {
            f64::INFINITY
        }
    }

    #[inline]
    pub fn f(&self, u: f64, v: f64) -> f64 {
        self.nonlinearity.eval(u, v)
    }

    /// Partial derivatives: analytic when known, else central differences
    /// with step `1e-6 K`.
    pub fn partials(&self, u: f64, v: f64) -> (f64, f64) {
        if let Some(p) = self.nonlinearity.analytic_partials(u, v) {
            return p;
        }
        let h = 1e-6 * self.k;
        let f = |a, b| self.nonlinearity.eval(a, b);
        (
            (f(u + h, v) - f(u - h, v)) / (2.0 * h),
            (f(u, v + h) - f(u, v - h)) / (2.0 * h),
        )
    }

    /// Maxima of `|∂₁f|` and `|∂₂f|` over an `n × n` grid of `[0, K]²`.
    pub fn max_partials(&self, n: usize) -> (f64, f64) {
        let n = n.max(2);
        let mut out: (f64, f64) = (0.0, 0.0);
        for i in 0..n {
            let u = self.k * i as f64 / (n - 1) as f64;
            for j in 0..n {
                let v = self.k * j as f64 / (n - 1) as f64;
                let (a, b) = self.partials(u, v);
                out.0 = out.0.max(a.abs());
                out.1 = out.1.max(b.abs());
            }
        }
        out
    }

    fn linear_gap(&self, u: f64, v: f64) -> f64 {
        self.df0.0 * u + self.df0.1 * v - self.f(u, v)
    }

    fn estimate_f2(&self) -> F2Constants {
        let mut best: Option<(f64, f64)> = None;
        for sigma in [1.0, 0.5] {
            let mut m: f64 = 0.0;
            for i in 0..F2_GRID {
                let u = self.k * i as f64 / (F2_GRID - 1) as f64;
                for j in 0..F2_GRID {
                    if i == 0 && j == 0 {
                        continue;
                    }
                    let v = self.k * j as f64 / (F2_GRID - 1) as f64;
                    m = m.max(self.linear_gap(u, v) / (u + v).powf(1.0 + sigma));
                }
            }
            let m = m.max(1e-12);
            if best.is_none_or(|(bm, _)| m < bm) {
                best = Some((m, sigma));
            }
        }
        let (m, sigma) = best.unwrap_or((1.0, 1.0));
        F2Constants {
            m,
            sigma,
            source: F2Source::Estimated,
        }
    }
}

/// A sample at which a hypothesis check came closest to failing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Sample {
    pub u: f64,
    pub v: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HypothesisCheck {
    pub name: &'static str,
    pub passed: bool,
    pub worst: Option<Sample>,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub checks: Vec<HypothesisCheck>,
    pub f2: F2Constants,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &HypothesisCheck> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

/// Samples the structural hypotheses on an `samples × samples` grid of `[0, K]²`.
pub fn check_hypotheses(model: &ReactionModel, samples: usize) -> Result<ValidationReport> {
    if samples < 16 {
        return Err(Error::Domain(format!("need at least 16 samples, got {samples}")));
    }
    let k = model.k();
    let tol = 1e-12 * k.max(1.0);
    let grid: Vec<f64> = (0..samples).map(|i| k * i as f64 / (samples - 1) as f64).collect();
    let mut checks = Vec::new();

    let f00 = model.f(0.0, 0.0);
    let fkk = model.f(k, k);
    let (wu, wv, wval) = if f00.abs() >= fkk.abs() { (0.0, 0.0, f00) } else { (k, k, fkk) };
    checks.push(HypothesisCheck {
        name: "equilibria",
        passed: f00.abs() <= tol && fkk.abs() <= tol,
        worst: Some(Sample { u: wu, v: wv, value: wval }),
        detail: format!("f(0,0) = {f00:e}, f(K,K) = {fkk:e}"),
    });

    // f(u,u) > 0 on the open interval
    let mut worst: Option<Sample> = None;
    for &u in &grid[1..samples - 1] {
        let val = model.f(u, u);
        if worst.is_none_or(|w| val < w.value) {
            worst = Some(Sample { u, v: u, value: val });
        }
    }
    checks.push(HypothesisCheck {
        name: "diagonal positivity",
        passed: worst.is_none_or(|w| w.value > 0.0),
        worst,
        detail: "f(u,u) > 0 for 0 < u < K".into(),
    });

    let mut worst_mono: Option<Sample> = None;
    let mut worst_low: Option<Sample> = None;
    let mut worst_high: Option<Sample> = None;
    let f2 = model.f2();
    for &u in &grid {
        for &v in &grid {
            let d2 = model.partials(u, v).1;
            if worst_mono.is_none_or(|w| d2 < w.value) {
                worst_mono = Some(Sample { u, v, value: d2 });
            }
            if u == 0.0 && v == 0.0 {
                continue;
            }
            let gap = model.linear_gap(u, v);
            let scale = 1e-9 * k.max(1.0) * (u + v) / k;
            if worst_low.is_none_or(|w| gap + scale < w.value) {
                worst_low = Some(Sample { u, v, value: gap + scale });
            }
            let excess = gap - f2.m * (u + v).powf(1.0 + f2.sigma) * (1.0 + 1e-9) - tol;
            if worst_high.is_none_or(|w| excess > w.value) {
                worst_high = Some(Sample { u, v, value: excess });
            }
        }
    }
    checks.push(HypothesisCheck {
        name: "monotone in delayed argument",
        passed: worst_mono.is_none_or(|w| w.value >= -1e-12),
        worst: worst_mono,
        detail: "d2 f(u,v) >= 0 on the grid".into(),
    });
    checks.push(HypothesisCheck {
        name: "sublinear",
        passed: worst_low.is_none_or(|w| w.value >= 0.0),
        worst: worst_low,
        detail: "f(u,v) <= d1f(0,0) u + d2f(0,0) v on the grid".into(),
    });
    checks.push(HypothesisCheck {
        name: "superlinear remainder",
        passed: worst_high.is_none_or(|w| w.value <= 0.0),
        worst: worst_high,
        detail: format!(
            "d1f(0,0) u + d2f(0,0) v - f(u,v) <= M (u+v)^(1+sigma) with M = {}, sigma = {} ({:?})",
            f2.m, f2.sigma, f2.source
        ),
    });

    let (a0, b0) = model.df0();
    checks.push(HypothesisCheck {
        name: "unstable at zero",
        passed: a0 + b0 > 0.0 && b0 >= 0.0,
        worst: Some(Sample { u: 0.0, v: 0.0, value: a0 + b0 }),
        detail: format!("d1f(0,0) + d2f(0,0) = {} > 0, d2f(0,0) = {b0} >= 0", a0 + b0),
    });
    let (ak, bk) = model.dfk();
    checks.push(HypothesisCheck {
        name: "stable at K",
        passed: ak + bk < 0.0 && bk >= 0.0,
        worst: Some(Sample { u: k, v: k, value: ak + bk }),
        detail: format!("d1f(K,K) + d2f(K,K) = {} < 0, d2f(K,K) = {bk} >= 0", ak + bk),
    });

    Ok(ValidationReport { checks, f2 })
}

/// Ready-made models.
pub mod library {
    use super::*;

    pub fn fisher(d: f64, tau: f64, kernel: KernelSpec) -> Result<ReactionModel> {
        ReactionModel::new(d, tau, None, Nonlinearity::Fisher, kernel)
    }

    pub fn vector_disease(d: f64, tau: f64, a: f64, b: f64, kernel: KernelSpec) -> Result<ReactionModel> {
        ReactionModel::new(d, tau, None, Nonlinearity::VectorDisease { a, b }, kernel)
    }

    pub fn nicholson(d: f64, tau: f64, a: f64, p: f64, q: f64, kernel: KernelSpec) -> Result<ReactionModel> {
        ReactionModel::new(d, tau, None, Nonlinearity::Nicholson { a, p, q }, kernel)
    }

    /// Kernel is Gaussian with variance `2 α τ` (a point mass when `ατ = 0`).
    pub fn age_structured(d: f64, tau: f64, b: f64, gamma: f64, delta: f64, alpha: f64) -> Result<ReactionModel> {
        let var = 2.0 * alpha * tau;
        let kernel = if var > 0.0 { KernelSpec::gaussian(var)? } else { KernelSpec::dirac() };
        ReactionModel::new(d, tau, None, Nonlinearity::AgeStructured { b, gamma, delta, tau }, kernel)
    }

    pub fn logistic(d: f64, k: f64) -> Result<ReactionModel> {
        ReactionModel::new(d, 0.0, None, Nonlinearity::Logistic { k }, KernelSpec::dirac())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::collections::BTreeMap;

    #[test]
    fn fisher_linearisation() {
        let m = library::fisher(1.0, 0.0, KernelSpec::dirac()).unwrap();
        assert_eq!(m.df0(), (0.0, 1.0));
        assert_eq!(m.dfk(), (-1.0, 0.0));
        assert_eq!(m.lambda_plus(), f64::INFINITY);
    }

    #[test]
    fn fisher_f2_fit() {
        // gap is uv, maximal ratio uv/(u+v)^2 = 1/4 on the diagonal
        let m = library::fisher(1.0, 0.0, KernelSpec::dirac()).unwrap();
        let f2 = m.f2();
        assert_eq!(f2.sigma, 1.0);
        assert_relative_eq!(f2.m, 0.25, epsilon = 1e-12);
        assert_eq!(f2.source, F2Source::Estimated);
    }

    #[test]
    fn fisher_passes_with_supplied_constants() {
        let m = library::fisher(1.0, 0.0, KernelSpec::dirac()).unwrap().with_f2(1.0, 1.0).unwrap();
        let r = check_hypotheses(&m, 64).unwrap();
        assert!(r.passed(), "{r:?}");
    }

    #[test]
    fn logistic_has_zero_delayed_derivative() {
        let m = library::logistic(1.0, 1.0).unwrap();
        assert_eq!(m.df0().1, 0.0);
        let r = check_hypotheses(&m, 64).unwrap();
        assert!(r.passed(), "{r:?}");
    }

    #[test]
    fn wrong_equilibrium_fails() {
        let m = ReactionModel::new(1.0, 0.0, Some(2.0), Nonlinearity::Fisher, KernelSpec::dirac()).unwrap();
        let r = check_hypotheses(&m, 32).unwrap();
        assert!(!r.passed());
        let eq = r.checks.iter().find(|c| c.name == "equilibria").unwrap();
        assert!(!eq.passed);
        assert_relative_eq!(eq.worst.unwrap().value, -2.0);
    }

    #[test]
    fn bundled_models_pass() {
        let models = vec![
            library::fisher(1.0, 0.5, KernelSpec::gaussian(1.0).unwrap()).unwrap(),
            library::vector_disease(1.0, 1.0, 1.0, 2.0, KernelSpec::dirac()).unwrap(),
            library::nicholson(1.0, 1.0, 1.0, 2.0, 1.0, KernelSpec::dirac()).unwrap(),
            library::age_structured(1.0, 1.0, 2.0, 0.1, 1.0, 0.5).unwrap(),
            library::logistic(1.0, 1.0).unwrap(),
        ];
        for m in models {
            let r = check_hypotheses(&m, 256).unwrap();
            assert!(r.passed(), "{}: {:?}", m.nonlinearity().name(), r.failures().collect::<Vec<_>>());
        }
    }

    #[test]
    fn expression_matches_named_model() {
        let e = Expression::parse("-a*u + b*(1-u)*v", &BTreeMap::from([("a".into(), 1.0), ("b".into(), 2.0)])).unwrap();
        let m1 = ReactionModel::new(1.0, 0.0, Some(0.5), Nonlinearity::Expression(e), KernelSpec::dirac()).unwrap();
        let m2 = library::vector_disease(1.0, 0.0, 1.0, 2.0, KernelSpec::dirac()).unwrap();
        assert_relative_eq!(m1.k(), m2.k());
        assert!((m1.df0().0 - m2.df0().0).abs() < 1e-8);
        assert!((m1.df0().1 - m2.df0().1).abs() < 1e-8);
        assert!((m1.f2().m - m2.f2().m).abs() < 1e-6);
    }

    #[test]
    fn with_tau_updates_age_structured_equilibrium() {
        let m = library::age_structured(1.0, 0.0, 2.0, 0.5, 1.0, 0.0).unwrap();
        assert_relative_eq!(m.k(), 2.0);
        let m2 = m.with_tau(2.0).unwrap();
        assert_relative_eq!(m2.k(), 2.0 * (-1.0f64).exp(), epsilon = 1e-14);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(ReactionModel::new(0.0, 0.0, None, Nonlinearity::Fisher, KernelSpec::dirac()).is_err());
        assert!(ReactionModel::new(1.0, -1.0, None, Nonlinearity::Fisher, KernelSpec::dirac()).is_err());
        assert!(library::nicholson(1.0, 0.0, 1.0, 3.0, 1.0, KernelSpec::dirac()).is_err());
        assert!(library::vector_disease(1.0, 0.0, 2.0, 1.0, KernelSpec::dirac()).is_err());
        let m = library::fisher(1.0, 0.0, KernelSpec::dirac()).unwrap();
        assert!(m.clone().with_f2(1.0, 1.5).is_err());
        assert!(m.with_f2(-1.0, 1.0).is_err());
        assert!(check_hypotheses(&library::fisher(1.0, 0.0, KernelSpec::dirac()).unwrap(), 8).is_err());
    }
}
