//! Crank–Nicolson solver for the 1-D Schrödinger equation with a hard wall at
//! `x_min` and a top-hat regularised delta barrier at the origin, used as an
//! independent check of the bounce-train model.
//!
//! `H = -(1/2mu) d^2/dx^2 + V(x)`, second-order central differences, Dirichlet
//! conditions at both ends of the grid.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::series::{CoordLabel, Metadata, WeakValueSeries};
use crate::tunneling::TunnelParams;
use crate::weakcore::Complex;

/// Largest allowed `k0 * dx`.
pub const MAX_K_DX: f64 = 0.1;
/// Largest allowed phase rotation per step, `dt * k0^2 / (2 mu)`.
pub const MAX_PHASE_PER_STEP: f64 = 0.05;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub x_min: f64,
    pub x_max: f64,
    pub n_points: usize,
    pub dt: f64,
}

impl Grid {
    pub fn new(x_min: f64, x_max: f64, n_points: usize, dt: f64) -> Result<Self> {
        if !(x_max > x_min) || !x_min.is_finite() || !x_max.is_finite() {
            return Err(invalid("x_max", format!("need x_min < x_max, got [{x_min}, {x_max}]")));
        }
        if n_points < 3 {
            return Err(invalid("n_points", "need at least 3 points"));
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(invalid("dt", format!("must be > 0, got {dt}")));
        }
        Ok(Grid { x_min, x_max, n_points, dt })
    }

    /// Grid from `x_min` to (at least) `x_max` with spacing `dx`.
    pub fn with_spacing(x_min: f64, x_max: f64, dx: f64, dt: f64) -> Result<Self> {
        if !(dx > 0.0) {
            return Err(invalid("dx", format!("must be > 0, got {dx}")));
        }
        let cells = ((x_max - x_min) / dx).round().max(2.0) as usize;
        Grid::new(x_min, x_min + cells as f64 * dx, cells + 1, dt)
    }

    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / (self.n_points - 1) as f64
    }

    pub fn x(&self, j: usize) -> f64 {
        self.x_min + j as f64 * self.dx()
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n_points).map(|j| self.x(j)).collect()
    }

    /// The resolution invariants for a packet of wavenumber `k0` and mass `mu`.
    pub fn check_resolution(&self, k0: f64, mu: f64) -> Result<()> {
        let kdx = k0.abs() * self.dx();
        if kdx > MAX_K_DX * (1.0 + 1e-12) {
            return Err(Error::StabilityViolation(format!("k0*dx = {kdx} exceeds {MAX_K_DX}")));
        }
        let phase = self.dt * k0 * k0 / (2.0 * mu);
        if phase > MAX_PHASE_PER_STEP * (1.0 + 1e-12) {
            return Err(Error::StabilityViolation(format!(
                "dt*k0^2/(2 mu) = {phase} exceeds {MAX_PHASE_PER_STEP}"
            )));
        }
        Ok(())
    }
}

/// `V(x) = strength / width_w` on `|x| < width_w / 2`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BarrierProfile {
    /// Integrated weight `kappa / mu`.
    pub strength: f64,
    pub width_w: f64,
}

impl BarrierProfile {
    pub fn new(strength: f64, width_w: f64) -> Result<Self> {
        if !(strength >= 0.0 && strength.is_finite()) {
            return Err(invalid("strength", format!("must be >= 0, got {strength}")));
        }
        if !(width_w > 0.0 && width_w.is_finite()) {
            return Err(invalid("width_w", format!("must be > 0, got {width_w}")));
        }
        Ok(BarrierProfile { strength, width_w })
    }

    /// Barrier of the tunneling model, `width_w = 1 / (10 k0)` unless given.
    pub fn for_params(params: &TunnelParams, width_w: Option<f64>) -> Result<Self> {
        let max_w = 1.0 / (10.0 * params.k0);
        let w = width_w.unwrap_or(max_w);
        if w > max_w * (1.0 + 1e-12) {
            return Err(invalid("width_w", format!("must be <= 1/(10 k0) = {max_w}, got {w}")));
        }
        BarrierProfile::new(params.kappa / params.mu, w)
    }

    pub fn none() -> Self {
        BarrierProfile { strength: 0.0, width_w: 1.0 }
    }

    /// Cell-averaged potential: node `j` owns `[x_j - dx/2, x_j + dx/2]` and
    /// gets the barrier weight falling in that cell, so `sum V_j dx` equals
    /// `strength` exactly even when the barrier is narrower than a cell.
    pub fn sample(&self, grid: &Grid) -> Vec<f64> {
        let dx = grid.dx();
        let (lo, hi) = (-0.5 * self.width_w, 0.5 * self.width_w);
        let height = self.strength / self.width_w;
        (0..grid.n_points)
            .map(|j| {
                let x = grid.x(j);
                let overlap = ((x + 0.5 * dx).min(hi) - (x - 0.5 * dx).max(lo)).max(0.0);
                height * overlap / dx
            })
            .collect()
    }

    pub fn integrated_strength(&self, grid: &Grid) -> f64 {
        self.sample(grid).iter().sum::<f64>() * grid.dx()
    }
}

/// Precomputed Crank–Nicolson stepper `(1 + i dt H/2) psi' = (1 - i dt H/2) psi`.
pub struct Propagator {
    grid: Grid,
    diag: Vec<Complex>,
    off: Complex,
    // Thomas elimination factors for the constant left-hand matrix
    c_prime: Vec<Complex>,
    inv_den: Vec<Complex>,
}

impl Propagator {
    pub fn new(grid: &Grid, potential: &[f64], mu: f64) -> Result<Self> {
        if potential.len() != grid.n_points {
            return Err(Error::DimensionMismatch { expected: grid.n_points, found: potential.len() });
        }
        if !(mu > 0.0) {
            return Err(invalid("mu", format!("must be > 0, got {mu}")));
        }
        let dx = grid.dx();
        let kin = 1.0 / (2.0 * mu * dx * dx);
        let half = 0.5 * grid.dt;
        let diag: Vec<Complex> = potential.iter().map(|&v| Complex::new(1.0, half * (2.0 * kin + v))).collect();
        let off = Complex::new(0.0, -half * kin);
        let n = grid.n_points;
        let mut c_prime = vec![Complex::new(0.0, 0.0); n];
        let mut inv_den = vec![Complex::new(0.0, 0.0); n];
        // interior unknowns 1..n-1; the end points are pinned at zero
        let mut prev_c = Complex::new(0.0, 0.0);
        for j in 1..n - 1 {
            let den = diag[j] - off * prev_c;
            inv_den[j] = 1.0 / den;
            c_prime[j] = off * inv_den[j];
            prev_c = c_prime[j];
        }
        Ok(Propagator { grid: *grid, diag, off, c_prime, inv_den })
    }

    pub fn step(&self, psi: &mut [Complex], scratch: &mut [Complex]) {
        let n = self.grid.n_points;
        let off_r = -self.off;
        // right-hand side (1 - i dt H/2) psi, forward elimination fused in
        let mut prev = Complex::new(0.0, 0.0);
        for j in 1..n - 1 {
            let rhs = self.diag[j].conj() * psi[j] + off_r * (psi[j - 1] + psi[j + 1]);
            prev = (rhs - self.off * prev) * self.inv_den[j];
            scratch[j] = prev;
        }
        psi[0] = Complex::new(0.0, 0.0);
        psi[n - 1] = Complex::new(0.0, 0.0);
        let mut next = Complex::new(0.0, 0.0);
        for j in (1..n - 1).rev() {
            next = scratch[j] - self.c_prime[j] * next;
            psi[j] = next;
        }
    }
}

/// `sum |psi_j|^2 dx`.
pub fn grid_norm(psi: &[Complex], grid: &Grid) -> f64 {
    psi.iter().map(|z| z.norm_sqr()).sum::<f64>() * grid.dx()
}

/// Mean wavenumber `Im <psi|psi'> / <psi|psi>` by central differences.
pub fn mean_wavenumber(psi: &[Complex], grid: &Grid) -> f64 {
    let dx = grid.dx();
    let mut num = 0.0;
    for j in 1..psi.len().saturating_sub(1) {
        let d = (psi[j + 1] - psi[j - 1]) / (2.0 * dx);
        num += (psi[j].conj() * d).im;
    }
    let den: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
    num / den
}

/// Advance `psi0` by `steps` time steps. The resolution invariants are
/// checked against the packet's own mean wavenumber.
pub fn evolve(psi0: &[Complex], grid: &Grid, barrier: &BarrierProfile, mu: f64, steps: usize) -> Result<Vec<Complex>> {
    let mut out = evolve_snapshots(psi0, grid, barrier, mu, &[steps])?;
    Ok(out.pop().unwrap())
}

/// Like [`evolve`], returning the state after each entry of `at_steps`
/// (ascending).
pub fn evolve_snapshots(
    psi0: &[Complex],
    grid: &Grid,
    barrier: &BarrierProfile,
    mu: f64,
    at_steps: &[usize],
) -> Result<Vec<Vec<Complex>>> {
    if psi0.len() != grid.n_points {
        return Err(Error::DimensionMismatch { expected: grid.n_points, found: psi0.len() });
    }
    let norm = grid_norm(psi0, grid);
    if (norm - 1.0).abs() > 1e-6 {
        return Err(Error::InvalidState { norm_sqr: norm });
    }
    if at_steps.windows(2).any(|w| w[1] < w[0]) {
        return Err(invalid("at_steps", "must be ascending"));
    }
    grid.check_resolution(mean_wavenumber(psi0, grid), mu)?;
    let prop = Propagator::new(grid, &barrier.sample(grid), mu)?;
    let mut psi = psi0.to_vec();
    let mut scratch = vec![Complex::new(0.0, 0.0); grid.n_points];
    let mut done = 0;
    let mut out = Vec::with_capacity(at_steps.len());
    for &target in at_steps {
        while done < target {
            prop.step(&mut psi, &mut scratch);
            done += 1;
        }
        out.push(psi.clone());
    }
    Ok(out)
}

/// `exp(i k0 (x - x0) - (x - x0)^2 / 2b^2)` sampled and normalised on the grid.
pub fn gaussian_packet(grid: &Grid, x0: f64, k0: f64, b: f64) -> Vec<Complex> {
    let mut psi: Vec<Complex> = (0..grid.n_points)
        .map(|j| {
            let d = grid.x(j) - x0;
            Complex::new(-d * d / (2.0 * b * b), k0 * d).exp()
        })
        .collect();
    psi[0] = Complex::new(0.0, 0.0);
    let last = grid.n_points - 1;
    psi[last] = Complex::new(0.0, 0.0);
    let s = grid_norm(&psi, grid).sqrt();
    psi.iter_mut().for_each(|z| *z /= s);
    psi
}

/// Exact free evolution of the normalised Gaussian launched at `x0`:
/// `sigma^{-1/2} exp(-(x - x0 - k0 t/mu)^2 / (2 b^2 sigma) + i k0 (x - x0) - i k0^2 t / 2mu)`,
/// `sigma = 1 + i t/(mu b^2)`.
pub fn free_gaussian(x: f64, t: f64, x0: f64, k0: f64, b: f64, mu: f64) -> Complex {
    let sigma = Complex::new(1.0, t / (mu * b * b));
    let d = x - x0;
    let u = d - k0 * t / mu;
    let norm = (std::f64::consts::PI.sqrt() * b).powf(-0.5);
    let expo = Complex::new(-u * u / (2.0 * b * b), 0.0) / sigma + Complex::new(0.0, k0 * d - k0 * k0 * t / (2.0 * mu));
    norm * expo.exp() / sigma.sqrt()
}

/// Grid and step count reaching time `t`.
fn steps_for(grid: &Grid, t: f64) -> usize {
    (t / grid.dt).round() as usize
}

fn check_wall(params: &TunnelParams, grid: &Grid) -> Result<()> {
    if (grid.x_min - params.wall()).abs() > 1e-9 * params.l {
        return Err(invalid("x_min", format!("grid must start at the wall x = {}", params.wall())));
    }
    Ok(())
}

/// Fraction of the norm beyond the barrier after one pass: the pre-selected
/// packet starts at `-L` and is measured at `t = 2L/v`, before the reflected
/// part returns from the wall.
pub fn transmission_probe(params: &TunnelParams, grid: &Grid) -> Result<f64> {
    transmission_probe_with(params, grid, &BarrierProfile::for_params(params, None)?)
}

pub fn transmission_probe_with(params: &TunnelParams, grid: &Grid, barrier: &BarrierProfile) -> Result<f64> {
    check_wall(params, grid)?;
    let psi0 = gaussian_packet(grid, -params.l, params.k0, params.b);
    let steps = steps_for(grid, 2.0 * params.l / params.v());
    let psi = evolve(&psi0, grid, barrier, params.mu, steps)?;
    let total = grid_norm(&psi, grid);
    let dx = grid.dx();
    let beyond: f64 = psi.iter().enumerate().filter(|(j, _)| grid.x(*j) > 0.0).map(|(_, z)| z.norm_sqr()).sum::<f64>() * dx;
    Ok(beyond / total)
}

fn catmull_rom(p: [Complex; 4], s: f64) -> Complex {
    let s2 = s * s;
    let s3 = s2 * s;
    (p[1] * 2.0
        + (p[2] - p[0]) * s
        + (p[0] * 2.0 - p[1] * 5.0 + p[2] * 4.0 - p[3]) * s2
        + (p[3] - p[0] + (p[1] - p[2]) * 3.0) * s3)
        * 0.5
}

/// Cubic interpolation of nodal values at `x`.
pub fn interpolate(values: &[Complex], grid: &Grid, x: f64) -> Complex {
    let n = values.len();
    let u = (x - grid.x_min) / grid.dx();
    if !(u >= 0.0 && u <= (n - 1) as f64) {
        return Complex::new(0.0, 0.0);
    }
    let j = (u.floor() as usize).min(n - 2);
    let s = u - j as f64;
    let at = |k: isize| -> Complex {
        let k = (j as isize + k).clamp(0, n as isize - 1) as usize;
        values[k]
    };
    catmull_rom([at(-1), at(0), at(1), at(2)], s)
}

/// Weak value of `|x><x|` at time `t` from two grid runs: the pre-selected
/// packet forward to `t`, and the post-selected packet backward from `T` to
/// `t`, done as forward evolution of its conjugate. The denominator is the
/// grid sum of `Phi_post^* Phi_pre`.
pub fn weak_value_pde(x_grid: &[f64], t: f64, big_t: f64, params: &TunnelParams, grid: &Grid) -> Result<WeakValueSeries> {
    weak_value_pde_with(x_grid, t, big_t, params, grid, &BarrierProfile::for_params(params, None)?)
}

pub fn weak_value_pde_with(
    x_grid: &[f64],
    t: f64,
    big_t: f64,
    params: &TunnelParams,
    grid: &Grid,
    barrier: &BarrierProfile,
) -> Result<WeakValueSeries> {
    params.validate()?;
    check_wall(params, grid)?;
    if !(t >= 0.0 && t <= big_t) {
        return Err(invalid("t", format!("need 0 <= t <= T, got t = {t}, T = {big_t}")));
    }
    if x_grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(invalid("x_grid", "must be ascending"));
    }
    let pre0 = gaussian_packet(grid, -params.l, params.k0, params.b);
    // conj of the post-selected state exp(-i k0 (x + L) - ...) is pre0 itself
    let post_conj0 = pre0.clone();
    let runs: Vec<Result<Vec<Complex>>> = [(pre0, steps_for(grid, t)), (post_conj0, steps_for(grid, big_t - t))]
        .into_par_iter()
        .map(|(psi, steps)| evolve(&psi, grid, barrier, params.mu, steps))
        .collect();
    let mut runs = runs.into_iter();
    let pre = runs.next().unwrap()?;
    let post = runs.next().unwrap()?.into_iter().map(|z| z.conj()).collect::<Vec<_>>();
    let numerator: Vec<Complex> = post.iter().zip(&pre).map(|(p, q)| p.conj() * q).collect();
    let denominator: Complex = numerator.iter().sum::<Complex>() * grid.dx();
    if denominator.norm() < 1e-300 {
        return Err(Error::VanishingOverlap { overlap: denominator.norm() });
    }
    let w: Vec<Complex> = numerator.iter().map(|z| z / denominator).collect();
    let values: Vec<Complex> = x_grid.iter().map(|&x| interpolate(&w, grid, x)).collect();
    let meta = Metadata::new(
        "pde",
        "",
        serde_json::json!({
            "tunnel": params,
            "grid": grid,
            "barrier": barrier,
            "t": t,
            "T": big_t,
            "denominator": [denominator.re, denominator.im],
        }),
    );
    WeakValueSeries::from_values(CoordLabel::X, x_grid, &values, meta)
}

/// Nodal weak values on the whole grid, for normalisation checks.
pub fn weak_value_pde_nodes(t: f64, big_t: f64, params: &TunnelParams, grid: &Grid) -> Result<WeakValueSeries> {
    weak_value_pde(&grid.points(), t, big_t, params, grid)
}
