//! Explicit time integration of the delayed lattice equation
//! `u̇_j = d(u_{j+1} - 2u_j + u_{j-1}) + f(u_j, Σ_k w_k u_{j-k}(t - τ))`
//! on sites `x_j = j`, with front tracking for speed measurement.

use std::collections::VecDeque;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::io::csv_number;
use crate::model::ReactionModel;
use crate::numerics::linear_fit;
use crate::waveops::{GridFunction, KERNEL_MASS_TOL};

/// Relative excursion outside `[0, K]` tolerated before clamping.
pub const STABILITY_SLACK: f64 = 1e-6;
/// Largest default time step.
pub const MAX_DT: f64 = 0.01;
/// Default minimum distance, in sites, between the front and either lattice end.
pub const DEFAULT_GUARD: usize = 20;

/// Values imposed beyond the ends of the lattice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Default)]
pub enum BoundaryPolicy {
    /// `0` beyond the left end and `K` beyond the right end.
    Equilibrium,
    /// The initial value of the nearest end site, held fixed.
    #[default]
    FrozenInitial,
}

/// Initial history of the lattice.
#[derive(Debug, Clone)]
pub enum InitialData {
    /// `0` for `x < at`, `K` for `x >= at`; constant pre-history.
    Step { at: f64 },
    /// A travelling profile placed with its `K/2` level at `at`. The
    /// pre-history follows the rigid translation `φ(x - at + c t)`, `t ≤ 0`.
    Profile { phi: GridFunction, c: f64, at: f64 },
    /// Explicit site values; constant pre-history.
    Custom(Vec<f64>),
}

impl InitialData {
    fn sample(&self, k: f64, sites: usize, t: f64) -> Result<Vec<f64>> {
        match self {
            InitialData::Step { at } => Ok((0..sites).map(|j| if j as f64 >= *at { k } else { 0.0 }).collect()),
            InitialData::Profile { phi, c, at } => Ok((0..sites)
                .map(|j| phi.eval_smooth(j as f64 - at + c * t).clamp(0.0, k))
                .collect()),
            InitialData::Custom(v) => {
                if v.len() != sites {
                    return Err(Error::Domain(format!(
                        "custom initial data has {} values for {} sites",
                        v.len(),
                        sites
                    )));
                }
                if let Some(bad) = v.iter().find(|x| !(0.0..=k).contains(*x)) {
                    return Err(Error::Domain(format!("custom initial value {bad} outside [0, {k}]")));
                }
                Ok(v.clone())
            }
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SimConfig {
    pub sites: usize,
    pub horizon: f64,
    /// Time step; `None` selects [`default_dt`].
    pub dt: Option<f64>,
    pub policy: BoundaryPolicy,
    pub guard: usize,
    /// Store a snapshot every this many steps (0 disables).
    pub snapshot_every: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            sites: 1200,
            horizon: 200.0,
            dt: None,
            policy: BoundaryPolicy::default(),
            guard: DEFAULT_GUARD,
            snapshot_every: 0,
        }
    }
}

/// `min(0.01, 0.2 / (4d + Lip f))`, shrunk so that `1/dt` is an integer, and
/// further reduced to `τ` when `0 < τ < dt`.
pub fn default_dt(model: &ReactionModel) -> f64 {
    let (a, b) = model.max_partials(65);
    let raw = MAX_DT.min(0.2 / (4.0 * model.d() + a + b));
    let dt = 1.0 / (1.0 / raw).ceil();
    if model.tau() > 0.0 && model.tau() < dt {
        model.tau()
    } else {
        dt
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LatticeState {
    pub values: Vec<f64>,
    pub time: f64,
    pub policy: BoundaryPolicy,
}

/// Past states at step resolution, linearly interpolated in time.
#[derive(Debug, Clone)]
pub struct HistoryBuffer {
    states: VecDeque<Vec<f64>>,
    t_first: f64,
    dt: f64,
    depth: usize,
}

impl HistoryBuffer {
    fn new(dt: f64, tau: f64) -> Self {
        Self {
            states: VecDeque::new(),
            t_first: 0.0,
            dt,
            depth: (tau / dt).ceil() as usize + 2,
        }
    }

    fn push(&mut self, state: Vec<f64>) {
        self.states.push_back(state);
        while self.states.len() > self.depth {
            self.states.pop_front();
            self.t_first += self.dt;
        }
    }

    pub fn covers(&self) -> (f64, f64) {
        (self.t_first, self.t_first + self.dt * (self.states.len() as f64 - 1.0))
    }

    /// State at time `t`, which must lie inside the covered window.
    pub fn at(&self, t: f64, out: &mut [f64]) {
        let s = ((t - self.t_first) / self.dt).max(0.0);
        let i = (s.floor() as usize).min(self.states.len() - 1);
        let w = (s - i as f64).clamp(0.0, 1.0);
        let a = &self.states[i];
        if w < 1e-12 || i + 1 == self.states.len() {
            out.copy_from_slice(a);
            return;
        }
        let b = &self.states[i + 1];
        for ((o, x), y) in out.iter_mut().zip(a).zip(b) {
            *o = (1.0 - w) * x + w * y;
        }
    }
}

/// Recorded `(t, x_front)` pairs.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct FrontTrack {
    pub points: Vec<(f64, f64)>,
}

impl FrontTrack {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,x_front\n");
        for (t, x) in &self.points {
            s.push_str(&format!("{},{}\n", csv_number(*t), csv_number(*x)));
        }
        s
    }

    /// Minus the least-squares slope of `x_front` over the second half of the
    /// horizon; `None` with fewer than two points there.
    pub fn speed(&self, horizon: f64) -> Option<f64> {
        let (ts, xs): (Vec<f64>, Vec<f64>) = self.points.iter().filter(|(t, _)| *t >= 0.5 * horizon).cloned().unzip();
        if ts.len() < 2 {
            return None;
        }
        linear_fit(&ts, &xs).map(|f| -f.slope)
    }
}

/// Leftmost crossing of `K/2`, interpolated between the last site below and
/// the first site at or above the level. `None` unless the state straddles it.
pub fn front_position(values: &[f64], k: f64) -> Option<f64> {
    let level = 0.5 * k;
    let j = values.iter().position(|&v| v >= level)?;
    if j == 0 {
        return None;
    }
    let (a, b) = (values[j - 1], values[j]);
    Some((j - 1) as f64 + (level - a) / (b - a))
}

pub struct Simulator<'a> {
    model: &'a ReactionModel,
    dt: f64,
    taps: Vec<(i64, f64)>,
    ghost: (f64, f64),
    pub state: LatticeState,
    pub history: HistoryBuffer,
    steps: usize,
    delayed: Vec<f64>,
}

impl<'a> Simulator<'a> {
    pub fn new(model: &'a ReactionModel, initial: &InitialData, sites: usize, dt: f64, policy: BoundaryPolicy) -> Result<Self> {
        if sites < 3 {
            return Err(Error::Domain(format!("lattice needs at least 3 sites, got {sites}")));
        }
        if !(dt > 0.0) || (model.tau() > 0.0 && dt > model.tau() * (1.0 + 1e-12)) {
            return Err(Error::Domain(format!("time step {dt} must be positive and not exceed tau")));
        }
        let k = model.k();
        let taps = model.kernel().weights(1.0, KERNEL_MASS_TOL)?.node_offsets();
        let mut history = HistoryBuffer::new(dt, model.tau());
        let pre = if model.tau() > 0.0 { history.depth - 1 } else { 0 };
        history.t_first = -(pre as f64) * dt;
        for n in (0..=pre).rev() {
            history.push(initial.sample(k, sites, -(n as f64) * dt)?);
        }
        let values = history.states.back().cloned().unwrap_or_default();
        let ghost = match policy {
            BoundaryPolicy::Equilibrium => (0.0, k),
            BoundaryPolicy::FrozenInitial => (values[0], values[sites - 1]),
        };
        Ok(Self {
            model,
            dt,
            taps,
            ghost,
            state: LatticeState { values, time: 0.0, policy },
            history,
            steps: 0,
            delayed: vec![0.0; sites],
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    fn value(&self, u: &[f64], j: i64) -> f64 {
        if j < 0 {
            self.ghost.0
        } else if j as usize >= u.len() {
            self.ghost.1
        } else {
            u[j as usize]
        }
    }

    /// Right-hand side at stage time `s` for stage state `u`.
    fn rhs(&mut self, u: &[f64], s: f64, out: &mut [f64]) {
        let d = self.model.d();
        let mut src = std::mem::take(&mut self.delayed);
        if self.model.tau() > 0.0 {
            self.history.at(s - self.model.tau(), &mut src);
        } else {
            src.copy_from_slice(u);
        }
        for j in 0..u.len() {
            let ji = j as i64;
            let lap = self.value(u, ji + 1) - 2.0 * u[j] + self.value(u, ji - 1);
            let v: f64 = self.taps.iter().map(|&(o, w)| w * self.value(&src, ji - o)).sum();
            out[j] = d * lap + self.model.f(u[j], v);
        }
        self.delayed = src;
    }

    /// One classical four-stage step.
    pub fn step(&mut self) -> Result<()> {
        let n = self.state.values.len();
        let (dt, t) = (self.dt, self.state.time);
        let u0 = self.state.values.clone();
        let mut k1 = vec![0.0; n];
        let mut k2 = vec![0.0; n];
        let mut k3 = vec![0.0; n];
        let mut k4 = vec![0.0; n];
        let mut tmp = vec![0.0; n];
        self.rhs(&u0, t, &mut k1);
        for j in 0..n {
            tmp[j] = u0[j] + 0.5 * dt * k1[j];
        }
        self.rhs(&tmp.clone(), t + 0.5 * dt, &mut k2);
        for j in 0..n {
            tmp[j] = u0[j] + 0.5 * dt * k2[j];
        }
        self.rhs(&tmp.clone(), t + 0.5 * dt, &mut k3);
        for j in 0..n {
            tmp[j] = u0[j] + dt * k3[j];
        }
        self.rhs(&tmp.clone(), t + dt, &mut k4);
        let k = self.model.k();
        let (lo, hi) = (-STABILITY_SLACK * k, k * (1.0 + STABILITY_SLACK));
        self.steps += 1;
        let t_new = self.steps as f64 * dt;
        for j in 0..n {
            let v = u0[j] + dt / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
            if !(lo..=hi).contains(&v) {
                return Err(Error::Stability { time: t_new, site: j, value: v });
            }
            tmp[j] = v.clamp(0.0, k);
        }
        self.state.values.copy_from_slice(&tmp);
        self.state.time = t_new;
        if self.model.tau() > 0.0 {
            self.history.push(tmp);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SimOutcome {
    pub speed: Option<f64>,
    pub track: FrontTrack,
    pub dt: f64,
    pub steps: usize,
    pub final_state: LatticeState,
    /// `(t, values)` pairs when snapshots were requested.
    #[serde(skip)]
    pub snapshots: Vec<(f64, Vec<f64>)>,
}

impl SimOutcome {
    /// One row per snapshot: `t` followed by the site values.
    pub fn snapshots_csv(&self) -> String {
        let mut s = String::new();
        for (t, v) in &self.snapshots {
            s.push_str(&csv_number(*t));
            for x in v {
                s.push(',');
                s.push_str(&csv_number(*x));
            }
            s.push('\n');
        }
        s
    }
}

/// Integrates to the horizon, recording the front once per unit time, and
/// returns the late-time front speed.
pub fn run_and_measure(model: &ReactionModel, initial: &InitialData, cfg: &SimConfig) -> Result<SimOutcome> {
    if !(cfg.horizon > 0.0) {
        return Err(Error::Domain(format!("horizon must be positive, got {}", cfg.horizon)));
    }
    let dt = cfg.dt.unwrap_or_else(|| default_dt(model));
    let mut sim = Simulator::new(model, initial, cfg.sites, dt, cfg.policy)?;
    let k = model.k();
    let guard = cfg.guard as f64;
    let upper = (cfg.sites - 1) as f64 - guard;
    let mut track = FrontTrack::default();
    let mut snapshots = Vec::new();
    let record = |sim: &Simulator, track: &mut FrontTrack| -> Result<()> {
        if let Some(x) = front_position(&sim.state.values, k) {
            if x < guard || x > upper {
                return Err(Error::Boundary { time: sim.state.time, position: x });
            }
            track.points.push((sim.state.time, x));
        }
        Ok(())
    };
    record(&sim, &mut track)?;
    let total = (cfg.horizon / dt).round() as usize;
    let mut next_mark = 1.0;
    for n in 1..=total {
        sim.step()?;
        if cfg.snapshot_every > 0 && n % cfg.snapshot_every == 0 {
            snapshots.push((sim.state.time, sim.state.values.clone()));
        }
        if sim.state.time >= next_mark - 1e-9 * dt {
            record(&sim, &mut track)?;
            next_mark += 1.0;
        }
    }
    Ok(SimOutcome {
        speed: track.speed(cfg.horizon),
        track,
        dt,
        steps: total,
        final_state: sim.state,
        snapshots,
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
    fn dt_rule() {
        let m = fisher();
        assert_eq!(default_dt(&m), 0.01);
        let stiff = library::fisher(20.0, 0.0, KernelSpec::dirac()).unwrap();
        let dt = default_dt(&stiff);
        assert!(dt <= 0.2 / 82.0 && (1.0 / dt - (1.0 / dt).round()).abs() < 1e-9);
        let short = library::fisher(1.0, 0.004, KernelSpec::dirac()).unwrap();
        assert_eq!(default_dt(&short), 0.004);
    }

    #[test]
    fn equilibria_are_fixed() {
        let m = library::fisher(1.0, 0.5, KernelSpec::gaussian(0.5).unwrap()).unwrap();
        for level in [0.0, m.k()] {
            let init = InitialData::Custom(vec![level; 50]);
            let cfg = SimConfig { sites: 50, horizon: 5.0, ..SimConfig::default() };
            let out = run_and_measure(&m, &init, &cfg).unwrap();
            assert!(out.final_state.values.iter().all(|&v| v == level));
            assert!(out.speed.is_none() && out.track.points.is_empty());
        }
    }

    #[test]
    fn history_interpolates_linearly() {
        let mut h = HistoryBuffer::new(0.5, 1.0);
        h.t_first = -1.0;
        for x in [0.0, 1.0, 2.0, 3.0] {
            h.push(vec![x]);
        }
        // depth = 4, covering [-1, 0.5]
        assert_eq!(h.covers(), (-1.0, 0.5));
        let mut out = [0.0];
        h.at(-0.25, &mut out);
        assert!((out[0] - 1.5).abs() < 1e-15);
        h.push(vec![4.0]);
        assert_eq!(h.covers(), (-0.5, 1.0));
    }

    #[test]
    fn front_crossing() {
        assert_eq!(front_position(&[0.0, 0.25, 0.75, 1.0], 1.0), Some(1.5));
        assert_eq!(front_position(&[1.0, 1.0], 1.0), None);
        assert_eq!(front_position(&[0.0, 0.1], 1.0), None);
    }

    #[test]
    fn stability_error_on_huge_step() {
        let m = fisher();
        let init = InitialData::Step { at: 10.0 };
        let cfg = SimConfig { sites: 20, horizon: 5.0, dt: Some(2.0), guard: 0, ..SimConfig::default() };
        assert!(matches!(run_and_measure(&m, &init, &cfg), Err(Error::Stability { .. })));
    }

    #[test]
    fn boundary_error_when_front_reaches_guard() {
        let m = fisher();
        let init = InitialData::Step { at: 40.0 };
        let cfg = SimConfig { sites: 60, horizon: 30.0, ..SimConfig::default() };
        assert!(matches!(run_and_measure(&m, &init, &cfg), Err(Error::Boundary { .. })));
    }

    #[test]
    fn csv_track() {
        let t = FrontTrack { points: vec![(0.0, 5.0), (1.0, 3.0)] };
        assert_eq!(t.to_csv().lines().count(), 3);
        assert!(t.speed(1.0).is_none());
        assert_eq!(FrontTrack { points: vec![(0.0, 5.0), (1.0, 3.0), (2.0, 1.0)] }.speed(2.0), Some(2.0));
    }
}
