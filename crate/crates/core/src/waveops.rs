//! Grid functions on `ξ ∈ [-L, L]` with exponential tails, and the discrete
//! operators acting on wave profiles.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::io::csv_number;
use crate::kernel::KernelWeights;
use crate::model::ReactionModel;
use crate::numerics::{gauss_legendre, lagrange_weights};

/// Kernel mass allowed outside the convolution stencil.
pub const KERNEL_MASS_TOL: f64 = 1e-12;

/// Uniform grid with spacing `1/m` and nodes `origin + k/m`, `|k| ≤ n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    per_unit: usize,
    half_nodes: usize,
    origin: f64,
}

impl GridSpec {
    /// `spacing` must be `1/m` for an integer `m ≥ 2`; the half-length is
    /// rounded up to a whole number of cells.
    pub fn new(half_length: f64, spacing: f64) -> Result<Self> {
        if !(spacing > 0.0 && spacing.is_finite()) {
            return Err(Error::Domain(format!("grid spacing must be positive, got {spacing}")));
        }
        let m = (1.0 / spacing).round();
        if m < 2.0 || (m * spacing - 1.0).abs() > 1e-9 {
            return Err(Error::Domain(format!(
                "grid spacing must be 1/m for an integer m >= 2, got {spacing}"
            )));
        }
        if !(half_length > 0.0 && half_length.is_finite()) {
            return Err(Error::Domain(format!("half-length must be positive, got {half_length}")));
        }
        let per_unit = m as usize;
        let half_nodes = (half_length * m - 1e-9).ceil().max(1.0) as usize;
        Ok(Self {
            per_unit,
            half_nodes,
            origin: 0.0,
        })
    }

    /// The same grid translated so that its centre node sits at `origin`.
    pub fn with_origin(mut self, origin: f64) -> Self {
        self.origin = origin;
        self
    }

    pub fn per_unit(&self) -> usize {
        self.per_unit
    }
    pub fn spacing(&self) -> f64 {
        1.0 / self.per_unit as f64
    }
    pub fn half_length(&self) -> f64 {
        self.half_nodes as f64 / self.per_unit as f64
    }
    pub fn len(&self) -> usize {
        2 * self.half_nodes + 1
    }
    pub fn is_empty(&self) -> bool {
        false
    }
    pub fn center(&self) -> usize {
        self.half_nodes
    }
    pub fn origin(&self) -> f64 {
        self.origin
    }

    /// Coordinate of (possibly virtual) node `j`.
    #[inline]
    pub fn xi(&self, j: isize) -> f64 {
        self.origin + (j - self.half_nodes as isize) as f64 / self.per_unit as f64
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len()).map(|i| self.xi(i as isize))
    }
}

/// Node values plus tail laws: `v_0 e^{a(ξ-ξ_0)}` to the left and
/// `K - (K - v_{n-1}) e^{-b(ξ-ξ_{n-1})}` to the right. A zero rate means
/// constant extension.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    pub grid: GridSpec,
    pub values: Vec<f64>,
    pub left_rate: f64,
    pub right_rate: f64,
    pub level: f64,
}

impl GridFunction {
    pub fn new(grid: GridSpec, values: Vec<f64>, left_rate: f64, right_rate: f64, level: f64) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Domain(format!(
                "{} values for a grid of {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if !(left_rate >= 0.0 && right_rate >= 0.0) {
            return Err(Error::Domain("tail rates must be nonnegative".into()));
        }
        Ok(Self {
            grid,
            values,
            left_rate,
            right_rate,
            level,
        })
    }

    pub fn from_fn(grid: GridSpec, left_rate: f64, right_rate: f64, level: f64, f: impl Fn(f64) -> f64) -> Self {
        let values = grid.nodes().map(f).collect();
        Self {
            grid,
            values,
            left_rate,
            right_rate,
            level,
        }
    }

    pub fn constant(grid: GridSpec, value: f64, level: f64) -> Self {
        Self::from_fn(grid, 0.0, 0.0, level, |_| value)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Value at node `j`, using the tail laws off the grid.
    #[inline]
    pub fn at(&self, j: isize) -> f64 {
        let n = self.values.len() as isize;
        if j < 0 {
            self.values[0] * (self.left_rate * j as f64 * self.grid.spacing()).exp()
        } else if j >= n {
            let last = self.values[(n - 1) as usize];
            self.level - (self.level - last) * (-self.right_rate * (j - n + 1) as f64 * self.grid.spacing()).exp()
        } else {
            self.values[j as usize]
        }
    }

    /// Fractional node position of `xi`.
    fn position(&self, xi: f64) -> f64 {
        (xi - self.grid.xi(0)) * self.grid.per_unit() as f64
    }

    /// Piecewise-linear interpolation with exponential tails.
    pub fn eval_linear(&self, xi: f64) -> f64 {
        let n = self.values.len();
        let t = self.position(xi);
        if t <= 0.0 {
            return self.values[0] * (self.left_rate * (xi - self.grid.xi(0))).exp();
        }
        if t >= (n - 1) as f64 {
            let x = xi - self.grid.xi(n as isize - 1);
            return self.level - (self.level - self.values[n - 1]) * (-self.right_rate * x).exp();
        }
        let j = t.floor() as usize;
        let th = t - j as f64;
        (1.0 - th) * self.values[j] + th * self.values[(j + 1).min(n - 1)]
    }

    /// Six-point Lagrange interpolation, with exponential tails beyond the grid.
    pub fn eval_smooth(&self, xi: f64) -> f64 {
        let n = self.values.len();
        let t = self.position(xi);
        if t <= 0.0 || t >= (n - 1) as f64 {
            return self.eval_linear(xi);
        }
        let j = t.floor() as isize;
        let w = lagrange_weights(6, t - (j - 2) as f64);
        (0..6).map(|q| w[q] * self.at(j - 2 + q as isize)).sum()
    }

    /// The function `ξ ↦ φ(ξ + s)` on the same grid.
    pub fn translated(&self, s: f64) -> Self {
        let values = self.grid.nodes().map(|x| self.eval_smooth(x + s)).collect();
        Self {
            values,
            ..self.clone()
        }
    }

    /// Two-column CSV with `#` metadata lines.
    pub fn to_csv(&self, meta: &[(&str, f64)]) -> String {
        let mut out = String::new();
        for (k, v) in meta {
            out.push_str(&format!("# {k} = {}\n", csv_number(*v)));
        }
        out.push_str(&format!("# K = {}\n", csv_number(self.level)));
        out.push_str(&format!("# left_rate = {}\n", csv_number(self.left_rate)));
        out.push_str(&format!("# right_rate = {}\n", csv_number(self.right_rate)));
        out.push_str("xi,value\n");
        for (i, v) in self.values.iter().enumerate() {
            out.push_str(&format!("{},{}\n", csv_number(self.grid.xi(i as isize)), csv_number(*v)));
        }
        out
    }

    /// Parses [`to_csv`](Self::to_csv) output. Returns the function and all metadata.
    pub fn from_csv(text: &str) -> Result<(Self, BTreeMap<String, f64>)> {
        let bad = |m: &str| Error::Config(format!("profile csv: {m}"));
        let mut meta = BTreeMap::new();
        let mut xs = Vec::new();
        let mut vs = Vec::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line == "xi,value" {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                let (k, v) = rest.split_once('=').ok_or_else(|| bad("metadata line without '='"))?;
                let v: f64 = v.trim().parse().map_err(|_| bad("bad metadata value"))?;
                meta.insert(k.trim().to_string(), v);
                continue;
            }
            let (x, v) = line.split_once(',').ok_or_else(|| bad("expected two columns"))?;
            xs.push(x.trim().parse::<f64>().map_err(|_| bad("bad xi"))?);
            vs.push(v.trim().parse::<f64>().map_err(|_| bad("bad value"))?);
        }
        if xs.len() < 3 || xs.len() % 2 == 0 {
            return Err(bad("need an odd number of at least three nodes"));
        }
        let h = (xs[xs.len() - 1] - xs[0]) / (xs.len() - 1) as f64;
        let half = (xs.len() - 1) / 2;
        let grid = GridSpec::new(half as f64 * h, h)?.with_origin(xs[half]);
        let get = |k: &str| meta.get(k).copied().ok_or_else(|| bad(&format!("missing '# {k}'")));
        let f = Self::new(grid, vs, get("left_rate")?, get("right_rate")?, get("K")?)?;
        Ok((f, meta))
    }
}

/// `φ(ξ+1) - 2φ(ξ) + φ(ξ-1)` at node `i`.
pub fn discrete_laplacian(phi: &GridFunction, i: usize) -> f64 {
    let m = phi.grid.per_unit() as isize;
    let i = i as isize;
    phi.at(i + m) - 2.0 * phi.at(i) + phi.at(i - m)
}

/// Kernel weights on the grid combined with the delay shift `cτ`.
#[derive(Debug, Clone, PartialEq)]
pub struct DelayedStencil {
    /// `(node offset, weight)`; the shift is applied on top.
    pub taps: Vec<(isize, f64)>,
    /// `cτ/h = shift_nodes + shift_frac`.
    pub shift_nodes: isize,
    pub shift_frac: f64,
}

impl DelayedStencil {
    pub fn new(weights: &KernelWeights, spacing: f64, c: f64, tau: f64) -> Result<Self> {
        if (weights.spacing - spacing).abs() > 1e-12 * spacing {
            return Err(Error::Domain(format!(
                "kernel weights built for spacing {} used on spacing {spacing}",
                weights.spacing
            )));
        }
        let s = c * tau / spacing;
        let mut shift_nodes = s.floor();
        let mut shift_frac = s - shift_nodes;
        if shift_frac > 1.0 - 1e-12 {
            shift_nodes += 1.0;
            shift_frac = 0.0;
        } else if shift_frac < 1e-12 {
            shift_frac = 0.0;
        }
        Ok(Self {
            taps: weights.node_offsets().into_iter().map(|(k, w)| (k as isize, w)).collect(),
            shift_nodes: shift_nodes as isize,
            shift_frac,
        })
    }

    pub fn for_model(model: &ReactionModel, c: f64, spacing: f64) -> Result<Self> {
        let shift = c * model.tau();
        if shift != 0.0 {
            if let Some(w) = model.kernel().shifted_weights(spacing, shift, KERNEL_MASS_TOL)? {
                return Self::new(&w, spacing, 0.0, 0.0);
            }
        }
        let w = model.kernel().weights(spacing, KERNEL_MASS_TOL)?;
        Self::new(&w, spacing, c, model.tau())
    }

    /// Nodes reached to the left (largest backward offset, including the shift).
    pub fn left_reach(&self) -> usize {
        let r = self.taps.iter().map(|(k, _)| *k).max().unwrap_or(0);
        (r + self.shift_nodes + 1).max(0) as usize
    }

    /// Nodes reached to the right.
    pub fn right_reach(&self) -> usize {
        let r = self.taps.iter().map(|(k, _)| -*k).max().unwrap_or(0);
        (r - self.shift_nodes).max(0) as usize
    }

    /// `Σ_k w_k φ(ξ_i - o_k - cτ)` through any accessor `get(node)`.
    #[inline]
    pub fn apply_with(&self, get: impl Fn(isize) -> f64, i: isize) -> f64 {
        let (p, th) = (self.shift_nodes, self.shift_frac);
        let mut acc = 0.0;
        for &(k, w) in &self.taps {
            let j = i - k - p;
            let v = if th == 0.0 {
                get(j)
            } else {
                (1.0 - th) * get(j) + th * get(j - 1)
            };
            acc += w * v;
        }
        acc
    }
}

/// `(h * φ)(ξ_i - cτ)`.
pub fn convolve_delayed(phi: &GridFunction, weights: &KernelWeights, c: f64, tau: f64, i: usize) -> Result<f64> {
    let st = DelayedStencil::new(weights, phi.grid.spacing(), c, tau)?;
    Ok(st.apply_with(|j| phi.at(j), i as isize))
}

/// Pointwise values of the wave operator and the width of the untrusted
/// boundary band (in nodes) at each end.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveResidual {
    pub values: Vec<f64>,
    pub band: usize,
}

impl WaveResidual {
    /// Sup-norm over nodes outside the boundary bands.
    pub fn interior_sup(&self) -> f64 {
        let n = self.values.len();
        if n <= 2 * self.band {
            return 0.0;
        }
        self.values[self.band..n - self.band].iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_interior(&self, i: usize) -> bool {
        i >= self.band && i + self.band < self.values.len()
    }
}

/// `N_c[φ] = cφ' - dΔ₁φ - f(φ, (h*φ)(· - cτ))` with a fourth-order
/// central difference for `φ'`.
pub fn wave_residual(model: &ReactionModel, c: f64, phi: &GridFunction) -> Result<WaveResidual> {
    let h = phi.grid.spacing();
    let st = DelayedStencil::for_model(model, c, h)?;
    let m = phi.grid.per_unit();
    let d = model.d();
    let values = (0..phi.len())
        .map(|i| {
            let j = i as isize;
            let dphi = (-phi.at(j + 2) + 8.0 * phi.at(j + 1) - 8.0 * phi.at(j - 1) + phi.at(j - 2)) / (12.0 * h);
            let psi = st.apply_with(|k| phi.at(k), j);
            c * dphi - d * discrete_laplacian(phi, i) - model.f(phi.at(j), psi)
        })
        .collect();
    let band = m + st.left_reach().max(st.right_reach()) + 3;
    Ok(WaveResidual { values, band })
}

/// `(2d + max |∂_j f|) / c` with the maximum sampled on a 129×129 grid.
pub fn mu_lower_bound(model: &ReactionModel, c: f64) -> Result<f64> {
    if !(c > 0.0) {
        return Err(Error::Domain(format!("speed must be positive, got {c}")));
    }
    let (a, b) = model.max_partials(129);
    Ok((2.0 * model.d() + a.max(b)) / c)
}

/// Product-integration weights for `∫₀^∞ e^{-μx} g(x) dx` from samples
/// `g(kh)`, with piecewise Lagrange interpolation of `g`. The weights are
/// `W_k = scale · r^k · c_k`, `r = e^{-μh}`, and `c_k` is constant for `k > order`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductWeights {
    pub order: usize,
    pub ratio: f64,
    /// `c_k` for `k ≤ order + 1`; the last entry is the interior constant.
    pub coeffs: Vec<f64>,
    /// Factor making the rule exact for constants.
    pub scale: f64,
}

impl ProductWeights {
    /// Chooses the highest order in {5, 3, 1} whose weights are all positive.
    pub fn new(mu: f64, h: f64) -> Result<Self> {
        let (gx, gw) = gauss_legendre(16);
        for order in [5usize, 3, 1] {
            let w = Self::with_order(mu, h, order, &gx, &gw);
            if w.coeffs.iter().all(|c| *c > 0.0) {
                return Ok(w);
            }
        }
        Err(Error::Domain(format!("no positive quadrature for mu*h = {}", mu * h)))
    }

    fn with_order(mu: f64, h: f64, p: usize, gx: &[f64], gw: &[f64]) -> Self {
        let a = mu * h;
        let r = (-a).exp();
        let s = (p - 1) / 2;
        let intervals = p + s + 3;
        let mut c = vec![0.0; intervals + p + 1];
        for j in 0..intervals {
            let start = j.saturating_sub(s);
            for q in 0..=p {
                let k = start + q;
                // ∫₀¹ e^{-a t} ℓ_q(j - start + t) dt
                let mut integral = 0.0;
                for (x, w) in gx.iter().zip(gw) {
                    let t = 0.5 * (x + 1.0);
                    let l = lagrange_weights(p + 1, (j - start) as f64 + t)[q];
                    integral += 0.5 * w * (-a * t).exp() * l;
                }
                c[k] += r.powi(j as i32 - k as i32) * integral;
            }
        }
        c.truncate(p + 2);
        let tail = c[p + 1];
        let total: f64 = tail / (1.0 - r) + (0..=p).map(|k| (c[k] - tail) * r.powi(k as i32)).sum::<f64>();
        Self {
            order: p,
            ratio: r,
            coeffs: c,
            scale: 1.0 / (a * total),
        }
    }

    /// Weight attached to sample `k`.
    pub fn weight(&self, h: f64, k: usize) -> f64 {
        let ck = self.coeffs[k.min(self.order + 1)];
        h * self.scale * self.ratio.powi(k as i32) * ck
    }
}

/// The monotone integral operator
/// `T(φ)(ξ) = c⁻¹ ∫₀^∞ e^{-μx} H(φ)(ξ - x) dx`, `H(φ) = dΔ₁φ + f(φ, (h*φ)(·-cτ)) + cμφ`,
/// whose fixed points are wave profiles.
#[derive(Debug, Clone)]
pub struct IntegralOperator<'a> {
    model: &'a ReactionModel,
    c: f64,
    mu: f64,
    grid: GridSpec,
    stencil: DelayedStencil,
    quad: ProductWeights,
}

impl<'a> IntegralOperator<'a> {
    pub fn new(model: &'a ReactionModel, c: f64, mu: f64, grid: GridSpec) -> Result<Self> {
        let bound = mu_lower_bound(model, c)?;
        if !(mu > bound) {
            return Err(Error::Domain(format!("mu = {mu} does not exceed the lower bound {bound}")));
        }
        let h = grid.spacing();
        Ok(Self {
            model,
            c,
            mu,
            grid,
            stencil: DelayedStencil::for_model(model, c, h)?,
            quad: ProductWeights::new(mu, h)?,
        })
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn quadrature(&self) -> &ProductWeights {
        &self.quad
    }

    /// `T(φ)`. `left_anchor` overrides the left tail: virtual node `j < 0`
    /// takes the value `left_anchor · e^{a j h}` instead of `φ_0 e^{a j h}`.
    pub fn apply(&self, phi: &GridFunction, left_anchor: Option<f64>, out: &mut Vec<f64>) {
        let n = phi.len();
        let h = self.grid.spacing();
        let m = self.grid.per_unit();
        let pad_l = m.max(self.stencil.left_reach()) + 2;
        let pad_r = m.max(self.stencil.right_reach()) + 2;
        let base = left_anchor.unwrap_or(phi.values[0]);
        let ext: Vec<f64> = (-(pad_l as isize)..(n + pad_r) as isize)
            .map(|j| {
                if j < 0 {
                    base * (phi.left_rate * j as f64 * h).exp()
                } else {
                    phi.at(j)
                }
            })
            .collect();
        let get = |j: isize| ext[(j + pad_l as isize) as usize];
        let d = self.model.d();
        let cmu = self.c * self.mu;
        let mi = m as isize;
        let hv: Vec<f64> = (0..n as isize)
            .map(|i| {
                let u = get(i);
                let lap = get(i + mi) - 2.0 * u + get(i - mi);
                let psi = self.stencil.apply_with(get, i);
                d * lap + self.model.f(u, psi) + cmu * u
            })
            .collect();

        let r = self.quad.ratio;
        let p = self.quad.order;
        let tail = self.quad.coeffs[p + 1];
        let g = (-phi.left_rate * h).exp();
        let h_at = |j: isize| {
            if j >= 0 {
                hv[j as usize]
            } else {
                hv[0] * g.powi((-j) as i32)
            }
        };
        let corr: Vec<f64> = (0..=p).map(|k| (self.quad.coeffs[k] - tail) * r.powi(k as i32)).collect();
        let factor = h * self.quad.scale / self.c;
        out.clear();
        out.reserve(n);
        let mut running = hv[0] / (1.0 - r * g);
        for (i, &hi) in hv.iter().enumerate().take(n) {
            if i > 0 {
                running = hi + r * running;
            }
            let mut s = tail * running;
            for (k, ck) in corr.iter().enumerate() {
                s += ck * h_at(i as isize - k as isize);
            }
            out.push(s * factor);
        }
    }
}

/// One application of the integral operator with the tails of `phi`.
#[allow(non_snake_case)]
pub fn apply_T_mu(model: &ReactionModel, c: f64, mu: f64, phi: &GridFunction) -> Result<GridFunction> {
    let op = IntegralOperator::new(model, c, mu, phi.grid)?;
    let mut out = Vec::new();
    op.apply(phi, None, &mut out);
    Ok(GridFunction {
        values: out,
        ..phi.clone()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::KernelSpec;
    use crate::model::library;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};

    fn fisher() -> ReactionModel {
        library::fisher(1.0, 0.0, KernelSpec::dirac()).unwrap()
    }

    fn grid() -> GridSpec {
        GridSpec::new(20.0, 0.1).unwrap()
    }

    #[test]
    fn grid_layout() {
        let g = grid();
        assert_eq!(g.len(), 401);
        assert_eq!(g.xi(0), -20.0);
        assert_eq!(g.xi(200), 0.0);
        assert_eq!(g.xi(210), 1.0);
        assert!(GridSpec::new(10.0, 0.3).is_err());
        assert!(GridSpec::new(10.0, 1.0).is_err());
        assert!(GridSpec::new(-1.0, 0.1).is_err());
    }

    #[test]
    fn laplacian_identities() {
        let g = grid();
        let k = GridFunction::constant(g, 1.0, 1.0);
        for i in [0, 5, 200, 400] {
            assert_eq!(discrete_laplacian(&k, i), 0.0);
        }
        let lin = GridFunction::from_fn(g, 0.0, 0.0, 1.0, |x| x);
        for i in 20..380 {
            assert!(discrete_laplacian(&lin, i).abs() < 1e-13);
        }
        let lam = 0.7;
        let e = GridFunction::from_fn(g, lam, 0.0, 1.0, |x| (lam * x).exp());
        for i in [0usize, 3, 9, 100, 250] {
            let want = (lam.exp() + (-lam).exp() - 2.0) * (lam * g.xi(i as isize)).exp();
            assert!((discrete_laplacian(&e, i) - want).abs() <= 1e-10 * want.abs());
        }
    }

    #[test]
    fn convolution_identities() {
        let g = grid();
        let phi = GridFunction::from_fn(g, 0.5, 1.0, 1.0, |x| 1.0 / (1.0 + (-x).exp()));
        let w = KernelSpec::dirac().weights(0.1, 1e-8).unwrap();
        for i in [0usize, 77, 400] {
            assert_eq!(convolve_delayed(&phi, &w, 2.0, 0.0, i).unwrap(), phi.values[i]);
        }
        let k = GridFunction::constant(g, 0.8, 1.0);
        let wg = KernelSpec::gaussian(1.0).unwrap().weights(0.1, 1e-10).unwrap();
        for i in [0usize, 200, 400] {
            assert!((convolve_delayed(&k, &wg, 1.3, 0.77, i).unwrap() - 0.8).abs() < 1e-14);
        }
    }

    #[test]
    fn gaussian_convolution_of_exponential() {
        let g = grid();
        let kernel = KernelSpec::gaussian(1.0).unwrap();
        let w = kernel.weights(0.1, 1e-12).unwrap();
        for lam in [0.3, 0.9] {
            let e = GridFunction::from_fn(g, lam, 0.0, 1.0, |x| (lam * x).exp());
            let (c, tau) = (2.0, 0.5);
            for i in [150usize, 200, 260] {
                let want = (lam * (g.xi(i as isize) - c * tau)).exp() * kernel.mgf(lam).unwrap();
                let got = convolve_delayed(&e, &w, c, tau, i).unwrap();
                assert!((got - want).abs() <= 1e-6 * want, "{got} vs {want}");
            }
        }
    }

    #[test]
    fn residual_vanishes_at_equilibria() {
        let m = library::fisher(1.0, 0.7, KernelSpec::gaussian(0.5).unwrap()).unwrap();
        let g = grid();
        for v in [0.0, 1.0] {
            let r = wave_residual(&m, 2.3, &GridFunction::constant(g, v, 1.0)).unwrap();
            assert!(r.values.iter().all(|x| x.abs() < 1e-14));
        }
    }

    #[test]
    fn mu_bound_fisher() {
        let m = fisher();
        assert_relative_eq!(mu_lower_bound(&m, 2.5).unwrap(), 1.2, epsilon = 1e-12);
        let m2 = m.with_d(2.0).unwrap();
        assert_relative_eq!(mu_lower_bound(&m2, 2.5).unwrap() - 1.2, 2.0 / 2.5, epsilon = 1e-12);
        assert_relative_eq!(mu_lower_bound(&m, 5.0).unwrap(), 0.6, epsilon = 1e-12);
        assert!(mu_lower_bound(&m, 0.0).is_err());
    }

    #[test]
    fn product_weights_exact_on_exponentials() {
        for (mu, h) in [(1.26, 0.1), (0.5, 0.05), (3.0, 0.1), (1.3, 0.5)] {
            let w = ProductWeights::new(mu, h).unwrap();
            let sum = |f: &dyn Fn(f64) -> f64| (0..20_000).map(|k| w.weight(h, k) * f(k as f64 * h)).sum::<f64>();
            assert_relative_eq!(sum(&|_| 1.0), 1.0 / mu, epsilon = 1e-12);
            let b = 0.4;
            let want = 1.0 / (mu + b);
            let tol = if w.order == 5 { 1e-9 } else { 1e-4 };
            assert!((sum(&|x| (-b * x).exp()) - want).abs() < tol * want, "order {}", w.order);
            assert!((0..50).all(|k| w.weight(h, k) > 0.0));
        }
        assert_eq!(ProductWeights::new(1.26, 0.1).unwrap().order, 5);
    }

    #[test]
    fn t_fixes_equilibria() {
        let m = fisher();
        let g = grid();
        let mu = 1.05 * mu_lower_bound(&m, 2.5).unwrap();
        let tk = apply_T_mu(&m, 2.5, mu, &GridFunction::constant(g, 1.0, 1.0)).unwrap();
        assert!(tk.values.iter().all(|v| (v - 1.0).abs() < 1e-13));
        let t0 = apply_T_mu(&m, 2.5, mu, &GridFunction::constant(g, 0.0, 1.0)).unwrap();
        assert!(t0.values.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn t_rejects_small_mu() {
        let m = fisher();
        let phi = GridFunction::constant(grid(), 0.5, 1.0);
        assert!(matches!(apply_T_mu(&m, 2.5, 1.1, &phi), Err(Error::Domain(_))));
    }

    #[test]
    fn t_preserves_order_and_monotonicity() {
        let m = library::fisher(1.0, 0.4, KernelSpec::gaussian(0.8).unwrap()).unwrap();
        let g = GridSpec::new(15.0, 0.1).unwrap();
        let c = 2.4;
        let mu = 1.05 * mu_lower_bound(&m, c).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let a: Vec<f64> = (0..g.len()).map(|_| rng.random_range(0.0..1.0)).collect();
            let b: Vec<f64> = a.iter().map(|x| x + rng.random_range(0.0..1.0) * (1.0 - x)).collect();
            let fa = GridFunction::new(g, a, 0.5, 1.0, 1.0).unwrap();
            let fb = GridFunction::new(g, b, 0.5, 1.0, 1.0).unwrap();
            let ta = apply_T_mu(&m, c, mu, &fa).unwrap();
            let tb = apply_T_mu(&m, c, mu, &fb).unwrap();
            for (x, y) in ta.values.iter().zip(&tb.values) {
                assert!(x - y <= 1e-13);
            }
        }
        let inc = GridFunction::from_fn(g, 0.6, 1.0, 1.0, |x| 1.0 / (1.0 + (-0.6 * x).exp()));
        let t = apply_T_mu(&m, c, mu, &inc).unwrap();
        assert!(t.values.windows(2).all(|w| w[1] >= w[0] - 1e-15));
    }

    #[test]
    fn translation_and_csv_round_trip() {
        let g = grid();
        let f = GridFunction::from_fn(g, 1.0, 1.0, 1.0, |x| 1.0 / (1.0 + (-x).exp()));
        let t = f.translated(0.37);
        for i in 50..350 {
            let want = 1.0 / (1.0 + (-(g.xi(i) + 0.37)).exp());
            assert!((t.values[i as usize] - want).abs() < 1e-8);
        }
        let csv = f.to_csv(&[("c", 2.5)]);
        let (back, meta) = GridFunction::from_csv(&csv).unwrap();
        assert_eq!(meta["c"], 2.5);
        assert_eq!(back.len(), f.len());
        assert_eq!(back.grid.per_unit(), 10);
        for (a, b) in back.values.iter().zip(&f.values) {
            assert!((a - b).abs() <= 1e-11 * b.abs().max(1e-300));
        }
    }
}
