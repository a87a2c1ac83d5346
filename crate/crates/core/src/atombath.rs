//! Reference atom coupled to a discrete bath, restricted to the
//! single-excitation sector.
//!
//! Basis ordering: index 0 is "reference atom excited", index `n + N + 1` is
//! "bath atom `n` excited" for `n = -N..=N`, so the space has `2N + 2` states.
//! Bath level `n` sits at `E0 + n * dE` and couples to the reference state with
//! a real matrix element `H`.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::weakcore::{basis_projector_weak_values, Complex, Operator, OperatorKind, StateVector};

/// Default width of the bath band (half-width `N * dE`) in units of `gamma`.
pub const DEFAULT_BAND_OVER_GAMMA: f64 = 200.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BathModel {
    pub n_side: usize,
    pub delta_e: f64,
    pub coupling: f64,
    pub e0: f64,
    pub gamma: f64,
}

impl BathModel {
    /// Explicit parameters; `gamma` is whatever the caller says it is.
    pub fn new(n_side: usize, delta_e: f64, coupling: f64, e0: f64, gamma: f64) -> Result<Self> {
        if n_side == 0 {
            return Err(invalid("n_side", "must be positive"));
        }
        if !(delta_e > 0.0 && delta_e.is_finite()) {
            return Err(invalid("delta_e", format!("must be > 0, got {delta_e}")));
        }
        if !(coupling >= 0.0 && coupling.is_finite()) {
            return Err(invalid("coupling", format!("must be >= 0, got {coupling}")));
        }
        if !e0.is_finite() {
            return Err(invalid("e0", "must be finite"));
        }
        if !(gamma >= 0.0 && gamma.is_finite()) {
            return Err(invalid("gamma", format!("must be >= 0, got {gamma}")));
        }
        Ok(BathModel { n_side, delta_e, coupling, e0, gamma })
    }

    /// Continuum-calibrated model: `dE = band / N`, `H = sqrt(gamma dE / pi)`,
    /// so that `pi H^2 / dE = gamma`.
    pub fn calibrated(gamma: f64, n_side: usize, band: f64) -> Result<Self> {
        if !(gamma > 0.0) {
            return Err(invalid("gamma", format!("must be > 0, got {gamma}")));
        }
        if !(band > 0.0) {
            return Err(invalid("band", format!("must be > 0, got {band}")));
        }
        let delta_e = band / n_side.max(1) as f64;
        let coupling = (gamma * delta_e / PI).sqrt();
        Self::new(n_side, delta_e, coupling, 0.0, gamma)
    }

    /// Calibrated model with the default band `200 gamma`.
    pub fn from_gamma(gamma: f64, n_side: usize) -> Result<Self> {
        Self::calibrated(gamma, n_side, DEFAULT_BAND_OVER_GAMMA * gamma)
    }

    /// Calibrated model at fixed level spacing (the band grows with `N`).
    pub fn with_spacing(gamma: f64, n_side: usize, delta_e: f64) -> Result<Self> {
        Self::calibrated(gamma, n_side, delta_e * n_side as f64)
    }

    pub fn dim(&self) -> usize {
        2 * self.n_side + 2
    }

    /// Basis index of bath level `n`.
    pub fn bath_index(&self, n: i64) -> Result<usize> {
        let big_n = self.n_side as i64;
        if n < -big_n || n > big_n {
            return Err(invalid("n", format!("bath level {n} outside -{big_n}..={big_n}")));
        }
        Ok((n + big_n + 1) as usize)
    }

    pub fn levels(&self) -> impl Iterator<Item = i64> {
        let big_n = self.n_side as i64;
        -big_n..=big_n
    }

    /// `pi H^2 / dE`
    pub fn continuum_gamma(&self) -> f64 {
        PI * self.coupling * self.coupling / self.delta_e
    }

    /// Diagonal energies in basis order.
    fn energies(&self) -> Vec<f64> {
        std::iter::once(self.e0)
            .chain(self.levels().map(|n| self.e0 + n as f64 * self.delta_e))
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeWindow {
    pub t_i: f64,
    pub t: f64,
    pub t_f: f64,
}

impl TimeWindow {
    pub fn new(t_i: f64, t: f64, t_f: f64) -> Result<Self> {
        if !(t_i.is_finite() && t.is_finite() && t_f.is_finite()) || !(t_i <= t && t <= t_f) {
            return Err(Error::InvalidWindow { t_i, t, t_f });
        }
        Ok(TimeWindow { t_i, t, t_f })
    }

    pub fn midpoint(t_i: f64, t_f: f64) -> Result<Self> {
        Self::new(t_i, 0.5 * (t_i + t_f), t_f)
    }

    pub fn duration(&self) -> f64 {
        self.t_f - self.t_i
    }
}

/// Evaluation route for bath weak values.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Analytic,
    Numeric,
}

/// Step control for the RK4 oracle.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OdeSettings {
    /// Allowed local error per unit of integrated time.
    pub tol_per_time: f64,
    pub dt_max: f64,
    pub max_steps: usize,
}

impl Default for OdeSettings {
    fn default() -> Self {
        OdeSettings { tol_per_time: 1e-10, dt_max: 0.05, max_steps: 50_000_000 }
    }
}

// ---------------------------------------------------------------------------
// ODE oracle

/// Right-hand side of the interaction-picture amplitude equations
/// `da0/dt = -i H sum_n a_n e^{-i n dE t}`, `da_n/dt = -i H a0 e^{i n dE t}`.
struct AmplitudeEquations<'a> {
    model: &'a BathModel,
    phases: Vec<Complex>,
}

impl<'a> AmplitudeEquations<'a> {
    fn new(model: &'a BathModel) -> Self {
        AmplitudeEquations { model, phases: vec![Complex::new(0.0, 0.0); 2 * model.n_side + 1] }
    }

    fn eval(&mut self, t: f64, a: &[Complex], out: &mut [Complex]) {
        let big_n = self.model.n_side;
        let h = self.model.coupling;
        // phases[n + N] = e^{i n dE t}, built outward from n = 0
        let z = Complex::from_polar(1.0, self.model.delta_e * t);
        self.phases[big_n] = Complex::new(1.0, 0.0);
        let mut p = Complex::new(1.0, 0.0);
        for k in 1..=big_n {
            p *= z;
            self.phases[big_n + k] = p;
            self.phases[big_n - k] = p.conj();
        }
        let minus_ih = Complex::new(0.0, -h);
        let a0 = a[0];
        let mut acc = Complex::new(0.0, 0.0);
        for (k, ph) in self.phases.iter().enumerate() {
            acc += a[k + 1] * ph.conj();
            out[k + 1] = minus_ih * a0 * ph;
        }
        out[0] = minus_ih * acc;
    }
}

struct Rk4Work {
    k1: Vec<Complex>,
    k2: Vec<Complex>,
    k3: Vec<Complex>,
    k4: Vec<Complex>,
    tmp: Vec<Complex>,
}

impl Rk4Work {
    fn new(dim: usize) -> Self {
        let z = vec![Complex::new(0.0, 0.0); dim];
        Rk4Work { k1: z.clone(), k2: z.clone(), k3: z.clone(), k4: z.clone(), tmp: z }
    }
}

/// One classical RK4 step; `k1` must already hold `f(t, y)`.
fn rk4_step(eq: &mut AmplitudeEquations, w: &mut Rk4Work, t: f64, y: &[Complex], h: f64, out: &mut [Complex]) {
    let n = y.len();
    for i in 0..n {
        w.tmp[i] = y[i] + w.k1[i] * (0.5 * h);
    }
    eq.eval(t + 0.5 * h, &w.tmp, &mut w.k2);
    for i in 0..n {
        w.tmp[i] = y[i] + w.k2[i] * (0.5 * h);
    }
    eq.eval(t + 0.5 * h, &w.tmp, &mut w.k3);
    for i in 0..n {
        w.tmp[i] = y[i] + w.k3[i] * h;
    }
    eq.eval(t + h, &w.tmp, &mut w.k4);
    for i in 0..n {
        out[i] = y[i] + (w.k1[i] + w.k2[i] * 2.0 + w.k3[i] * 2.0 + w.k4[i]) * (h / 6.0);
    }
}

/// Integrate the interaction-picture amplitudes from `(t0, y0)` through each
/// time in `targets` (monotone, either direction), returning the state at
/// every target.
pub fn propagate_amplitudes(
    model: &BathModel,
    y0: &[Complex],
    t0: f64,
    targets: &[f64],
    settings: &OdeSettings,
) -> Result<Vec<Vec<Complex>>> {
    let dim = model.dim();
    if y0.len() != dim {
        return Err(Error::DimensionMismatch { expected: dim, found: y0.len() });
    }
    if !(settings.tol_per_time > 0.0 && settings.dt_max > 0.0) {
        return Err(invalid("settings", "tolerance and dt_max must be positive"));
    }
    let mut eq = AmplitudeEquations::new(model);
    let mut w = Rk4Work::new(dim);
    let mut y = y0.to_vec();
    let mut t = t0;
    let mut full = vec![Complex::new(0.0, 0.0); dim];
    let mut half = vec![Complex::new(0.0, 0.0); dim];
    let mut two_half = vec![Complex::new(0.0, 0.0); dim];
    let mut k1_save = vec![Complex::new(0.0, 0.0); dim];

    // resolve the fastest phase rotation initially
    let omega_max = model.delta_e * model.n_side as f64 + model.coupling * (dim as f64).sqrt();
    let mut h_abs = settings.dt_max.min(0.5 / omega_max.max(1e-300));
    let mut steps = 0usize;
    let mut out = Vec::with_capacity(targets.len());

    for &target in targets {
        while (target - t).abs() > 1e-14 * (1.0 + t.abs()) {
            let dir = (target - t).signum();
            let h = dir * h_abs.min((target - t).abs()).min(settings.dt_max);
            eq.eval(t, &y, &mut w.k1);
            k1_save.copy_from_slice(&w.k1);
            rk4_step(&mut eq, &mut w, t, &y, h, &mut full);
            w.k1.copy_from_slice(&k1_save);
            rk4_step(&mut eq, &mut w, t, &y, 0.5 * h, &mut half);
            eq.eval(t + 0.5 * h, &half, &mut w.k1);
            rk4_step(&mut eq, &mut w, t + 0.5 * h, &half, 0.5 * h, &mut two_half);
            let err = two_half
                .iter()
                .zip(full.iter())
                .map(|(a, b)| (a - b).norm())
                .fold(0.0, f64::max)
                / 15.0;
            let allowed = settings.tol_per_time * h.abs();
            steps += 1;
            if steps > settings.max_steps {
                return Err(Error::NonConvergence { t, step: h.abs() });
            }
            if err <= allowed {
                for i in 0..dim {
                    y[i] = two_half[i] + (two_half[i] - full[i]) / 15.0;
                }
                t += h;
                if (target - t).abs() <= 1e-14 * (1.0 + t.abs()) {
                    t = target;
                }
            }
            let factor = if err == 0.0 { 2.0 } else { (0.9 * (allowed / err).powf(0.25)).clamp(0.2, 2.0) };
            // a step that hit the target early should not shrink the next one
            if err <= allowed && h.abs() < h_abs {
                h_abs = h_abs.max(h.abs() * factor);
            } else {
                h_abs = h.abs() * factor;
            }
            if h_abs < 1e-13 * (1.0 + t.abs()) {
                return Err(Error::NonConvergence { t, step: h_abs });
            }
        }
        out.push(y.clone());
    }
    Ok(out)
}

fn reference_state(dim: usize) -> Vec<Complex> {
    let mut v = vec![Complex::new(0.0, 0.0); dim];
    v[0] = Complex::new(1.0, 0.0);
    v
}

/// Schrödinger-picture evolution operator `U(duration)` built column by column
/// from the amplitude equations, `U = e^{-i H0 t} U_I(t, 0)`.
pub fn evolve_oracle(model: &BathModel, duration: f64, dt_max: f64) -> Result<Operator> {
    if !(duration >= 0.0) {
        return Err(invalid("duration", format!("must be >= 0, got {duration}")));
    }
    let settings = OdeSettings { dt_max, ..OdeSettings::default() };
    evolve_oracle_with(model, duration, &settings)
}

pub fn evolve_oracle_with(model: &BathModel, duration: f64, settings: &OdeSettings) -> Result<Operator> {
    let dim = model.dim();
    let energies = model.energies();
    let mut u = DMatrix::<Complex>::zeros(dim, dim);
    for col in 0..dim {
        let mut y0 = vec![Complex::new(0.0, 0.0); dim];
        y0[col] = Complex::new(1.0, 0.0);
        let y = propagate_amplitudes(model, &y0, 0.0, &[duration], settings)?.pop().unwrap();
        for row in 0..dim {
            u[(row, col)] = Complex::from_polar(1.0, -energies[row] * duration) * y[row];
        }
    }
    Operator::new(u, OperatorKind::Unitary)
}

// ---------------------------------------------------------------------------
// Continuum-limit closed forms

/// Row/column label of an evolution-operator element.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Level {
    Reference,
    Bath(i64),
}

/// `(e^{z s} - 1) / z`, accurate for small `|z s|`.
fn expm1_over(z: Complex, s: f64) -> Complex {
    let w = z * s;
    if w.norm() < 1e-5 {
        // s (1 + w/2 + w^2/6 + w^3/24)
        return (Complex::new(1.0, 0.0) + w * (0.5 + w * (1.0 / 6.0 + w / 24.0))) * s;
    }
    let (x, y) = (w.re, w.im);
    let half = (0.5 * y).sin();
    let re = x.exp_m1() * y.cos() - 2.0 * half * half;
    let im = x.exp() * y.sin();
    Complex::new(re, im) / z
}

/// Continuum-limit element of the evolution operator (Schrödinger picture).
///
/// `U00 = e^{-gamma|t| - i E0 t}` and, for `t >= 0`,
/// `U_n0 = U_0n = i H e^{-i E0 t} (e^{-gamma t} - e^{-i n dE t}) / (gamma - i n dE)`.
/// Negative times use `U(-t) = U(t)^dagger`. Bath–bath elements are not
/// available.
pub fn evolution_element_analytic(model: &BathModel, row: Level, col: Level, t: f64) -> Result<Complex> {
    let g = model.gamma;
    match (row, col) {
        (Level::Reference, Level::Reference) => Ok(Complex::from_polar((-g * t.abs()).exp(), -model.e0 * t)),
        (Level::Bath(n), Level::Reference) | (Level::Reference, Level::Bath(n)) => {
            model.bath_index(n)?;
            let forward = |s: f64| -> Complex {
                let omega = n as f64 * model.delta_e;
                let z = Complex::new(g, -omega);
                // e^{-gamma s} - e^{-i omega s} = e^{-i omega s} (e^{-z s} - 1)
                let diff = Complex::from_polar(1.0, -omega * s) * expm1_over(-z, s) * (-z);
                Complex::new(0.0, model.coupling) * Complex::from_polar(1.0, -model.e0 * s) * diff / z
            };
            if t >= 0.0 {
                Ok(forward(t))
            } else {
                Ok(forward(-t).conj())
            }
        }
        (Level::Bath(r), Level::Bath(c)) => Err(Error::UnsupportedElement { row: r, col: c }),
    }
}

/// Closed-form bath weak value in the continuum limit:
/// `w_n = -H^2 (e^{z s1} - 1)(e^{z s2} - 1) / z^2` with `z = gamma - i n dE`,
/// `s1 = t - t_i`, `s2 = t_f - t`. Vanishes identically at both window ends.
pub fn weak_value_bath_analytic(model: &BathModel, window: &TimeWindow, n: i64) -> Complex {
    let z = Complex::new(model.gamma, -(n as f64) * model.delta_e);
    let s1 = window.t - window.t_i;
    let s2 = window.t_f - window.t;
    if s1 == 0.0 || s2 == 0.0 {
        return Complex::new(0.0, 0.0);
    }
    -expm1_over(z, s1) * expm1_over(z, s2) * (model.coupling * model.coupling)
}

/// Interaction-picture two-state vector at time `t`: the pre-state (reference
/// atom excited at `t_i`) evolved forward and the post-state (reference atom
/// excited at `t_f`) evolved backward.
pub fn two_state_vectors(model: &BathModel, window: &TimeWindow, settings: &OdeSettings) -> Result<(StateVector, StateVector)> {
    let series = two_state_series(model, window.t_i, window.t_f, &[window.t], settings)?;
    Ok(series.into_iter().next().unwrap())
}

/// `(phi, psi)` pairs for every `t` in `times` (ascending, inside the window).
pub fn two_state_series(
    model: &BathModel,
    t_i: f64,
    t_f: f64,
    times: &[f64],
    settings: &OdeSettings,
) -> Result<Vec<(StateVector, StateVector)>> {
    for &t in times {
        TimeWindow::new(t_i, t, t_f)?;
    }
    if times.windows(2).any(|w| w[1] < w[0]) {
        return Err(invalid("times", "must be ascending"));
    }
    let dim = model.dim();
    let e0 = reference_state(dim);
    let fwd = propagate_amplitudes(model, &e0, t_i, times, settings)?;
    let rev_times: Vec<f64> = times.iter().rev().copied().collect();
    let mut bwd = propagate_amplitudes(model, &e0, t_f, &rev_times, settings)?;
    bwd.reverse();
    fwd.into_iter()
        .zip(bwd)
        .map(|(psi, phi)| Ok((StateVector::from_amplitudes(phi)?, StateVector::from_amplitudes(psi)?)))
        .collect()
}

/// Weak values of every basis projector (reference first, then bath levels
/// `-N..=N`) computed from the oracle two-state vector.
pub fn weak_values_numeric_all(model: &BathModel, window: &TimeWindow, settings: &OdeSettings) -> Result<Vec<Complex>> {
    let (phi, psi) = two_state_vectors(model, window, settings)?;
    basis_projector_weak_values(&phi, &psi)
}

/// Weak value of the projector onto bath level `n` being excited.
pub fn weak_value_bath(model: &BathModel, window: &TimeWindow, n: i64, mode: Mode) -> Result<Complex> {
    let idx = model.bath_index(n)?;
    match mode {
        Mode::Analytic => Ok(weak_value_bath_analytic(model, window, n)),
        Mode::Numeric => Ok(weak_values_numeric_all(model, window, &OdeSettings::default())?[idx]),
    }
}

/// Sums of bath weak values.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BathSum {
    /// Sum over bath levels `-N..=N`.
    pub bath: Complex,
    /// Reference-atom weak value (numeric mode only; analytic mode reports 1).
    pub reference: Complex,
    /// `bath + reference`
    pub full: Complex,
}

pub fn bath_sum(model: &BathModel, window: &TimeWindow, mode: Mode) -> Result<BathSum> {
    match mode {
        Mode::Analytic => {
            let bath: Complex = model.levels().map(|n| weak_value_bath_analytic(model, window, n)).sum();
            let reference = Complex::new(1.0, 0.0);
            Ok(BathSum { bath, reference, full: bath + reference })
        }
        Mode::Numeric => {
            let ws = weak_values_numeric_all(model, window, &OdeSettings::default())?;
            numeric_sum(&ws)
        }
    }
}

pub(crate) fn numeric_sum(ws: &[Complex]) -> Result<BathSum> {
    let reference = ws[0];
    let bath: Complex = ws[1..].iter().sum();
    Ok(BathSum { bath, reference, full: reference + bath })
}

/// Resonant (`n = 0`) bath weak value, `-(H/gamma)^2 (e^{gamma s1} - 1)(e^{gamma s2} - 1)`.
/// Real for all `t`. At `gamma = 0` it is the limit `-H^2 s1 s2`.
pub fn weak_value_resonant(gamma: f64, window: &TimeWindow, coupling: f64) -> f64 {
    let s1 = window.t - window.t_i;
    let s2 = window.t_f - window.t;
    let f = |s: f64| -> f64 {
        let x = gamma * s;
        if x.abs() < 1e-8 {
            s * (1.0 + 0.5 * x)
        } else {
            x.exp_m1() / gamma
        }
    };
    -coupling * coupling * f(s1) * f(s2)
}

/// Weak value of the excited-state projector when the atom is post-selected
/// as decayed at `t_f`:
/// `e^{-gamma (t - t_i)} (1 - e^{-gamma (t_f - t)}) / (1 - e^{-gamma (t_f - t_i)})`.
pub fn weak_value_decayed(gamma: f64, window: &TimeWindow) -> Result<f64> {
    if window.t_f == window.t_i {
        return Err(Error::DegenerateWindow(window.t_i));
    }
    if !(gamma > 0.0) {
        return Err(invalid("gamma", format!("must be > 0, got {gamma}")));
    }
    let s1 = window.t - window.t_i;
    let s2 = window.t_f - window.t;
    let total = window.duration();
    Ok((-gamma * s1).exp() * (-(-gamma * s2).exp_m1()) / (-(-gamma * total).exp_m1()))
}

/// Rarity of the post-selection, `|<ref| U(t_f - t_i) |ref>|`, from the oracle.
pub fn postselection_magnitude(model: &BathModel, duration: f64, settings: &OdeSettings) -> Result<f64> {
    let dim = model.dim();
    let y = propagate_amplitudes(model, &reference_state(dim), 0.0, &[duration], settings)?.pop().unwrap();
    Ok(y[0].norm())
}

/// `(e^{z s} - 1)/z` is exposed for the resonant/series cross-checks.
#[doc(hidden)]
pub fn _expm1_over(z: Complex64, s: f64) -> Complex64 {
    expm1_over(z, s)
}
