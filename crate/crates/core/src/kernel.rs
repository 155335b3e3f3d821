//! Nonlocal interaction kernels and their discretisations.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::numerics::adaptive_simpson;

/// Piecewise-linear density through `(offset, density)` samples, zero outside.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TabulatedDensity {
    offsets: Vec<f64>,
    density: Vec<f64>,
}

impl TabulatedDensity {
    /// Sorts the samples, checks nonnegativity and even symmetry, and rescales
    /// the density to unit mass.
    pub fn new(mut points: Vec<(f64, f64)>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::Config("tabulated kernel needs at least two points".into()));
        }
        if points.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
            return Err(Error::Config("tabulated kernel has non-finite entries".into()));
        }
        if let Some((x, y)) = points.iter().find(|(_, y)| *y < 0.0) {
            return Err(Error::Config(format!("negative kernel density {y} at offset {x}")));
        }
        points.sort_by(|a, b| a.0.total_cmp(&b.0));
        if points.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::Config("tabulated kernel has repeated offsets".into()));
        }
        let mut t = Self {
            offsets: points.iter().map(|p| p.0).collect(),
            density: points.iter().map(|p| p.1).collect(),
        };
        let mass = t.mass();
        if mass <= 0.0 {
            return Err(Error::Config("tabulated kernel has zero mass".into()));
        }
        for d in &mut t.density {
            *d /= mass;
        }
        let peak = t.density.iter().cloned().fold(0.0, f64::max);
        for &x in &t.offsets {
            let diff = (t.eval(x) - t.eval(-x)).abs();
            if diff > 1e-12 * peak.max(1.0) {
                return Err(Error::Config(format!(
                    "tabulated kernel is not even: h({x}) and h({}) differ by {diff:e}",
                    -x
                )));
            }
        }
        Ok(t)
    }

    fn mass(&self) -> f64 {
        self.offsets
            .windows(2)
            .zip(self.density.windows(2))
            .map(|(x, y)| 0.5 * (x[1] - x[0]) * (y[0] + y[1]))
            .sum()
    }

    pub fn eval(&self, x: f64) -> f64 {
        let n = self.offsets.len();
        if x < self.offsets[0] || x > self.offsets[n - 1] {
            return 0.0;
        }
        let i = self.offsets.partition_point(|&o| o <= x);
        if i == 0 {
            return self.density[0];
        }
        if i >= n {
            return self.density[n - 1];
        }
        let (x0, x1) = (self.offsets[i - 1], self.offsets[i]);
        let t = (x - x0) / (x1 - x0);
        (1.0 - t) * self.density[i - 1] + t * self.density[i]
    }

    /// Largest |offset| with nonzero density.
    pub fn reach(&self) -> f64 {
        let mut r: f64 = 0.0;
        for i in 0..self.offsets.len() - 1 {
            if self.density[i] > 0.0 || self.density[i + 1] > 0.0 {
                r = r.max(self.offsets[i].abs()).max(self.offsets[i + 1].abs());
            }
        }
        r
    }

    pub fn points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.offsets.iter().cloned().zip(self.density.iter().cloned())
    }

    fn moment(&self, lambda: f64, order: u32) -> f64 {
        let mut total = 0.0;
        for w in self.offsets.windows(2) {
            let (a, b) = (w[0], w[1]);
            let g = |y: f64| self.eval(y) * (-y).powi(order as i32) * (-lambda * y).exp();
            let scale = (g(a).abs() + g(b).abs() + g(0.5 * (a + b)).abs()).max(1e-300);
            total += adaptive_simpson(&g, a, b, 1e-14 * scale * (b - a).max(1e-3));
        }
        total
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KernelKind {
    Dirac,
    Gaussian { variance: f64 },
    Uniform { half_width: f64 },
    Tabulated { table: TabulatedDensity },
}

/// A symmetric probability kernel with exponential-moment abscissa `lambda0`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KernelSpec {
    kind: KernelKind,
    lambda0: f64,
}

/// Discrete stencil `(offset, weight)` approximating convolution with a kernel.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KernelWeights {
    pub spacing: f64,
    pub entries: Vec<(f64, f64)>,
}

impl KernelWeights {
    /// Entries as integer node offsets.
    pub fn node_offsets(&self) -> Vec<(i64, f64)> {
        self.entries
            .iter()
            .map(|(o, w)| ((o / self.spacing).round() as i64, *w))
            .collect()
    }

    /// Largest |offset| in node units.
    pub fn reach_nodes(&self) -> usize {
        self.node_offsets().iter().map(|(k, _)| k.unsigned_abs() as usize).max().unwrap_or(0)
    }
}

impl KernelSpec {
    pub fn dirac() -> Self {
        Self {
            kind: KernelKind::Dirac,
            lambda0: f64::INFINITY,
        }
    }

    pub fn gaussian(variance: f64) -> Result<Self> {
        if !(variance > 0.0 && variance.is_finite()) {
            return Err(Error::Config(format!("gaussian variance must be positive, got {variance}")));
        }
        Ok(Self {
            kind: KernelKind::Gaussian { variance },
            lambda0: f64::INFINITY,
        })
    }

    pub fn uniform(half_width: f64) -> Result<Self> {
        if !(half_width > 0.0 && half_width.is_finite()) {
            return Err(Error::Config(format!("uniform half_width must be positive, got {half_width}")));
        }
        Ok(Self {
            kind: KernelKind::Uniform { half_width },
            lambda0: f64::INFINITY,
        })
    }

    pub fn tabulated(points: Vec<(f64, f64)>) -> Result<Self> {
        Ok(Self {
            kind: KernelKind::Tabulated {
                table: TabulatedDensity::new(points)?,
            },
            lambda0: f64::INFINITY,
        })
    }

    /// Caps the exponential-moment abscissa, e.g. to mimic a heavy-tailed
    /// kernel whose table is truncated.
    pub fn with_lambda0(mut self, lambda0: f64) -> Result<Self> {
        if !(lambda0 > 0.0) {
            return Err(Error::Config(format!("lambda0 must be positive, got {lambda0}")));
        }
        self.lambda0 = lambda0;
        Ok(self)
    }

    pub fn kind(&self) -> &KernelKind {
        &self.kind
    }

    pub fn lambda0(&self) -> f64 {
        self.lambda0
    }

    pub fn is_dirac(&self) -> bool {
        matches!(self.kind, KernelKind::Dirac)
    }

    pub fn density(&self, x: f64) -> f64 {
        match &self.kind {
            KernelKind::Dirac => {
                if x == 0.0 {
                    f64::INFINITY
                } else {
                    0.0
                }
            }
            KernelKind::Gaussian { variance } => {
                (-x * x / (2.0 * variance)).exp() / (2.0 * std::f64::consts::PI * variance).sqrt()
            }
            KernelKind::Uniform { half_width } => {
                if x.abs() <= *half_width {
                    0.5 / half_width
                } else {
                    0.0
                }
            }
            KernelKind::Tabulated { table } => table.eval(x),
        }
    }

    /// `G(λ) = ∫ h(y) e^{-λy} dy`.
    pub fn mgf(&self, lambda: f64) -> Result<f64> {
        self.mgf_derivative(lambda, 0)
    }

    /// `G^{(n)}(λ) = ∫ (-y)^n h(y) e^{-λy} dy` for `n ≤ 2`.
    pub fn mgf_derivative(&self, lambda: f64, order: u32) -> Result<f64> {
        if lambda.abs() >= self.lambda0 {
            return Err(Error::Domain(format!(
                "exponential moment diverges at lambda = {lambda} (abscissa {})",
                self.lambda0
            )));
        }
        if order > 2 {
            return Err(Error::Domain(format!("mgf derivative order {order} not supported")));
        }
        let v = match &self.kind {
            KernelKind::Dirac => {
                if order == 0 {
                    1.0
                } else {
                    0.0
                }
            }
            KernelKind::Gaussian { variance: s } => {
                let g = (0.5 * s * lambda * lambda).exp();
                match order {
                    0 => g,
                    1 => s * lambda * g,
                    _ => (s + s * s * lambda * lambda) * g,
                }
            }
            KernelKind::Uniform { half_width: a } => {
                let x = a * lambda;
                if x.abs() < 1e-2 {
                    let x2 = x * x;
                    match order {
                        0 => 1.0 + x2 / 6.0 * (1.0 + x2 / 20.0 * (1.0 + x2 / 42.0)),
                        1 => a * x * (1.0 / 3.0 + x2 / 30.0 + x2 * x2 / 840.0),
                        _ => a * a * (1.0 / 3.0 + x2 / 10.0 + x2 * x2 / 168.0),
                    }
                } else {
                    let (s, c) = (x.sinh(), x.cosh());
                    match order {
                        0 => s / x,
                        1 => a * (x * c - s) / (x * x),
                        _ => a * a * ((x * x + 2.0) * s - 2.0 * x * c) / (x * x * x),
                    }
                }
            }
            KernelKind::Tabulated { table } => table.moment(lambda, order),
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::Domain(format!("exponential moment overflows at lambda = {lambda}")))
        }
    }

    /// Quadrature weights on a grid of the given spacing. The stencil is
    /// truncated where the omitted mass drops below `mass_tol`, then
    /// renormalised and symmetrised.
    pub fn weights(&self, spacing: f64, mass_tol: f64) -> Result<KernelWeights> {
        if !(spacing > 0.0 && spacing.is_finite()) {
            return Err(Error::Domain(format!("kernel spacing must be positive, got {spacing}")));
        }
        if !(mass_tol > 0.0 && mass_tol <= 1e-3) {
            return Err(Error::Domain(format!("mass_tol must lie in (0, 1e-3], got {mass_tol}")));
        }
        // half[k] = weight of offset k*spacing for k >= 0
        let half: Vec<f64> = match &self.kind {
            KernelKind::Dirac => vec![1.0],
            KernelKind::Gaussian { variance } => {
                let sd = variance.sqrt();
                let mut n = 0usize;
                while libm::erfc(n as f64 * spacing / (sd * std::f64::consts::SQRT_2)) >= mass_tol {
                    n += 1;
                }
                (0..=n).map(|k| spacing * self.density(k as f64 * spacing)).collect()
            }
            KernelKind::Uniform { half_width: a } => {
                let n = (a / spacing + 0.5).ceil() as usize;
                (0..=n)
                    .map(|k| {
                        let lo = (k as f64 - 0.5) * spacing;
                        let hi = (k as f64 + 0.5) * spacing;
                        (hi.min(*a) - lo.max(-a)).max(0.0) / (2.0 * a)
                    })
                    .collect()
            }
            KernelKind::Tabulated { table } => {
                let n = (table.reach() / spacing).floor() as usize;
                let mut w: Vec<f64> = (0..=n).map(|k| spacing * table.eval(k as f64 * spacing)).collect();
                if w.iter().all(|x| *x == 0.0) {
                    w[0] = 1.0;
                }
                w
            }
        };
        let total: f64 = half[0] + 2.0 * half[1..].iter().sum::<f64>();
        let mut entries = Vec::with_capacity(2 * half.len() - 1);
        for k in (1..half.len()).rev() {
            entries.push((-(k as f64) * spacing, half[k] / total));
        }
        for (k, w) in half.iter().enumerate() {
            entries.push((k as f64 * spacing, w / total));
        }
        entries.retain(|(_, w)| *w > 0.0);
        Ok(KernelWeights { spacing, entries })
    }

    /// Weights of the shifted kernel `ρ(y - shift)` sampled directly on the
    /// grid, for kernels smooth enough that point sampling beats
    /// interpolating the shift. `None` for the other kinds.
    pub fn shifted_weights(&self, spacing: f64, shift: f64, mass_tol: f64) -> Result<Option<KernelWeights>> {
        let KernelKind::Gaussian { .. } = &self.kind else {
            return Ok(None);
        };
        let centred = self.weights(spacing, mass_tol)?;
        let reach = centred.reach_nodes() as f64;
        let m = shift / spacing;
        let lo = (m - reach).floor() as i64;
        let hi = (m + reach).ceil() as i64;
        let raw: Vec<(f64, f64)> = (lo..=hi)
            .map(|k| {
                let y = k as f64 * spacing;
                (y, spacing * self.density(y - shift))
            })
            .collect();
        let total: f64 = raw.iter().map(|e| e.1).sum();
        let entries = raw.into_iter().map(|(y, w)| (y, w / total)).filter(|e| e.1 > 0.0).collect();
        Ok(Some(KernelWeights { spacing, entries }))
    }
}
