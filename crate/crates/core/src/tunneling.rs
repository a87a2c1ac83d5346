//! A Gaussian packet bouncing between an impenetrable wall at `x = -2L` and a
//! delta barrier `(kappa/mu) delta(x)` at the origin (hbar = 1).
//!
//! The packet keeps its width `b` (the regime `b k0 >> L/b >> 1` with
//! negligible spreading), so the state at any time is a finite train of
//! Gaussians scaled by powers of the barrier coefficients.
//!
//! Conventions. `rho = -i kappa/(k0 + i kappa)` and `tau = 1 + rho` are the
//! barrier reflection/transmission amplitudes. Each wall bounce flips the
//! sign, so the amplitude accumulated per round trip is `r = -rho`. The
//! backward-evolved post-selected state is `conj(Phi_pre(x, T - t))`, which
//! makes the weak-value integrand `Phi_pre(x, t) Phi_pre(x, T - t)`.
//!
//! Times are physical; `units(t) = v t / L` is the clock of the bounce
//! diagram, on which the packet crosses the barrier at `1 (mod 4)` and hits
//! the wall at `3 (mod 4)`.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::logcomplex::LogComplex;
use crate::quadrature::{integrate, QuadOptions, QuadResult};
use crate::weakcore::{Complex, OVERLAP_GUARD};

/// Half-width of the integration window around each Gaussian, in units of `b`.
pub const WINDOW_WIDTHS: f64 = 12.0;
/// Relative error above which a quadrature is reported as failed.
pub const QUAD_FAILURE_TOL: f64 = 1e-8;
const SNAP: f64 = 1e-9;
// exp(-x^2/2b^2) is exactly zero in f64 beyond ~38.6 b
const TERM_CUTOFF: f64 = 38.6;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TunnelParams {
    pub b: f64,
    pub mu: f64,
    pub kappa: f64,
    pub k0: f64,
    #[serde(rename = "L")]
    pub l: f64,
}

/// Factors used to decide when the asymptotic regime is violated.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidityFactors {
    /// Require `b k0 >= mirror * L / b`.
    pub mirror: f64,
    /// Require `L / b >= well`.
    pub well: f64,
    /// Require `b^2 >= spreading * t / mu` over the run.
    pub spreading: f64,
}

impl Default for ValidityFactors {
    fn default() -> Self {
        ValidityFactors { mirror: 10.0, well: 10.0, spreading: 1.0 }
    }
}

impl TunnelParams {
    pub fn new(b: f64, mu: f64, kappa: f64, k0: f64, l: f64) -> Result<Self> {
        let p = TunnelParams { b, mu, kappa, k0, l };
        p.validate()?;
        Ok(p)
    }

    /// Reference parameter set (b = 1, mu = kappa = 1000, k0 = 5000, L = 100).
    pub fn fig2() -> Self {
        TunnelParams { b: 1.0, mu: 1000.0, kappa: 1000.0, k0: 5000.0, l: 100.0 }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, value) in [("b", self.b), ("mu", self.mu), ("k0", self.k0), ("L", self.l)] {
            if !(value > 0.0 && value.is_finite()) {
                return Err(invalid(name, format!("must be > 0, got {value}")));
            }
        }
        if !(self.kappa >= 0.0 && self.kappa.is_finite()) {
            return Err(invalid("kappa", format!("must be >= 0, got {}", self.kappa)));
        }
        Ok(())
    }

    /// Group velocity `k0 / mu`.
    pub fn v(&self) -> f64 {
        self.k0 / self.mu
    }

    /// `b^2 k0^2`, the exponent of the enormous factors in the closed forms.
    pub fn big_b(&self) -> f64 {
        (self.b * self.k0).powi(2)
    }

    pub fn units(&self, t: f64) -> f64 {
        t * self.v() / self.l
    }

    pub fn from_units(&self, u: f64) -> f64 {
        u * self.l / self.v()
    }

    /// `T = (4i + 2) L / v`.
    pub fn postselection_time(&self, i: usize) -> f64 {
        self.from_units((4 * i + 2) as f64)
    }

    pub fn wall(&self) -> f64 {
        -2.0 * self.l
    }

    /// Human-readable list of broken regime conditions for a run lasting
    /// `t_max`. Empty when the asymptotic formulas should be trustworthy.
    pub fn validity_warnings(&self, t_max: f64, f: &ValidityFactors) -> Vec<String> {
        let mut out = Vec::new();
        let ratio = self.l / self.b;
        if self.b * self.k0 < f.mirror * ratio {
            out.push(format!("b*k0 = {} < {} * L/b = {}", self.b * self.k0, f.mirror, f.mirror * ratio));
        }
        if ratio < f.well {
            out.push(format!("L/b = {ratio} < {}", f.well));
        }
        if self.b * self.b < f.spreading * t_max / self.mu {
            out.push(format!(
                "packet spreading: b^2 = {} < {} * t/mu = {}",
                self.b * self.b,
                f.spreading,
                f.spreading * t_max / self.mu
            ));
        }
        out
    }
}

/// `(rho, tau)` of a delta barrier for wavenumber `k0`.
pub fn reflection_transmission(k0: f64, kappa: f64) -> (Complex, Complex) {
    let d = Complex::new(k0, kappa);
    (Complex::new(0.0, -kappa) / d, Complex::new(k0, 0.0) / d)
}

/// Amplitude gained per round trip inside the well, `r = -rho`.
pub fn round_trip_factor(params: &TunnelParams) -> Complex {
    -reflection_transmission(params.k0, params.kappa).0
}

fn snap(u: f64) -> f64 {
    let r = u.round();
    if (u - r).abs() < SNAP {
        r
    } else {
        u
    }
}

/// Number of barrier interactions of the forward train by time `t`,
/// `floor((v t / L + 3) / 4)`: first contact at `L/v`, then every `4L/v`.
pub fn interaction_count(params: &TunnelParams, t: f64) -> usize {
    let u = snap(params.units(t));
    ((u + 3.0) / 4.0).floor().max(0.0) as usize
}

/// The `i` of `T = (4i + 2) L / v`.
pub fn postselection_index(params: &TunnelParams, big_t: f64) -> Result<usize> {
    let u = snap(params.units(big_t));
    let i = (u - 2.0) / 4.0;
    if u.fract() != 0.0 || i.fract() != 0.0 || i < 1.0 {
        return Err(Error::InvalidPostselectionTime { t_units: params.units(big_t) });
    }
    Ok(i as usize)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Region {
    /// `-2L <= x < 0`
    Inside,
    /// `x >= 0`
    Outside,
}

impl Region {
    pub fn of(x: f64, params: &TunnelParams) -> Option<Region> {
        if x < params.wall() {
            None
        } else if x < 0.0 {
            Some(Region::Inside)
        } else {
            Some(Region::Outside)
        }
    }
}

/// `amplitude * exp(i k_sign k0 (x - center) + i phase_offset - (x - center)^2 / 2 width^2)`
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GaussianTerm {
    pub amplitude: LogComplex,
    pub k_sign: i8,
    pub center: f64,
    pub width: f64,
    pub phase_offset: f64,
    pub region: Region,
}

impl GaussianTerm {
    pub fn value(&self, x: f64, k0: f64) -> Complex {
        let rot = self.amplitude.to_complex() * Complex::from_polar(1.0, self.phase_offset);
        term_value(rot, self.k_sign as f64 * k0, x - self.center, self.width)
    }

    /// Time-reversed partner: conjugate amplitude, opposite direction,
    /// negated phase.
    pub fn conj(&self) -> GaussianTerm {
        GaussianTerm { amplitude: self.amplitude.conj(), k_sign: -self.k_sign, phase_offset: -self.phase_offset, ..*self }
    }
}

/// `rot * exp(i k d - d^2 / 2w^2)`. The product `k d` can
/// reach `1e5` rad, so its rounding error is recovered with an fma and applied
/// as a first-order rotation; otherwise the integrand carries ~1e-11 relative
/// noise that no quadrature can integrate away.
#[inline]
fn term_value(rot: Complex, k: f64, d: f64, w: f64) -> Complex {
    if d.abs() > TERM_CUTOFF * w {
        return Complex::new(0.0, 0.0);
    }
    let p = k * d;
    let err = k.mul_add(d, -p);
    let (sin, cos) = p.sin_cos();
    rot * Complex::new(cos, sin) * Complex::new(1.0, err) * (-d * d / (2.0 * w * w)).exp()
}

#[derive(Clone, Debug, PartialEq)]
pub struct PacketTrain {
    pub terms: Vec<GaussianTerm>,
    pub k0: f64,
    pub wall: f64,
    pub time_stamp: f64,
    // amplitude times e^{i phase_offset}
    amps: Vec<Complex>,
}

impl PacketTrain {
    fn new(terms: Vec<GaussianTerm>, k0: f64, wall: f64, time_stamp: f64) -> Self {
        let amps = terms.iter().map(|t| t.amplitude.to_complex() * Complex::from_polar(1.0, t.phase_offset)).collect();
        PacketTrain { terms, k0, wall, time_stamp, amps }
    }

    /// Wavefunction at `x`; zero beyond the wall.
    pub fn eval(&self, x: f64) -> Complex {
        self.eval_local(0.0, x)
    }

    /// Wavefunction at `x = origin + y`, with distances to the packet centres
    /// formed as `(origin - center) + y`. Quadrature nodes far from the origin
    /// would otherwise carry position rounding of `ulp(x)`, a phase jitter of
    /// `k0 ulp(x)` that dominates the error budget at large `k0`.
    pub fn eval_local(&self, origin: f64, y: f64) -> Complex {
        let x = origin + y;
        if x < self.wall {
            return Complex::new(0.0, 0.0);
        }
        let region = if x < 0.0 { Region::Inside } else { Region::Outside };
        let mut sum = Complex::new(0.0, 0.0);
        for (term, amp) in self.terms.iter().zip(&self.amps) {
            if term.region != region {
                continue;
            }
            let d = (origin - term.center) + y;
            sum += term_value(*amp, term.k_sign as f64 * self.k0, d, term.width);
        }
        sum
    }

    pub fn conj(&self) -> PacketTrain {
        PacketTrain::new(self.terms.iter().map(GaussianTerm::conj).collect(), self.k0, self.wall, self.time_stamp)
    }

    pub fn terms_in(&self, region: Region) -> impl Iterator<Item = &GaussianTerm> {
        self.terms.iter().filter(move |t| t.region == region)
    }
}

/// Forward-evolved pre-selected train at time `t` after `big_n` barrier
/// interactions: the inside wall-image pair `r^N [R_N - L_N]` and the
/// transmitted terms `tau r^(n-1)` centred at `v t - (4n - 3) L`.
pub fn pre_train(params: &TunnelParams, t: f64, big_n: usize) -> Result<PacketTrain> {
    params.validate()?;
    if !(t >= 0.0) {
        return Err(invalid("t", format!("must be >= 0, got {t}")));
    }
    let expected = interaction_count(params, t);
    if big_n != expected {
        return Err(Error::InvalidInteractionCount { given: big_n, expected, t });
    }
    let (rho, tau) = reflection_transmission(params.k0, params.kappa);
    let r = LogComplex::from(-rho);
    let tau = LogComplex::from(tau);
    let vt = params.v() * t;
    let l = params.l;
    // reduced so that the integrand stays smooth at the rounding level
    let phase = (params.k0 * vt / 2.0).rem_euclid(2.0 * PI);
    let nf = big_n as f64;
    let inside = r.pow_int(big_n as i64);
    let mut terms = vec![
        GaussianTerm {
            amplitude: inside,
            k_sign: 1,
            center: vt - (4.0 * nf + 1.0) * l,
            width: params.b,
            phase_offset: phase,
            region: Region::Inside,
        },
        GaussianTerm {
            amplitude: inside.neg(),
            k_sign: -1,
            center: (4.0 * nf - 3.0) * l - vt,
            width: params.b,
            phase_offset: phase,
            region: Region::Inside,
        },
    ];
    for n in 1..=big_n {
        terms.push(GaussianTerm {
            amplitude: tau.mul(r.pow_int(n as i64 - 1)),
            k_sign: 1,
            center: vt - (4.0 * n as f64 - 3.0) * l,
            width: params.b,
            phase_offset: phase,
            region: Region::Outside,
        });
    }
    Ok(PacketTrain::new(terms, params.k0, params.wall(), t))
}

/// Backward-evolved post-selected train at time `t`: the pre-selected train
/// at `T - t`, complex conjugated (left-moving at `t = T`).
pub fn post_train(params: &TunnelParams, t: f64, big_t: f64, big_m: usize) -> Result<PacketTrain> {
    if !(t >= 0.0 && t <= big_t) {
        return Err(invalid("t", format!("need 0 <= t <= T, got t = {t}, T = {big_t}")));
    }
    let expected = interaction_count(params, big_t - t);
    if big_m != expected {
        return Err(Error::InvalidInteractionCount { given: big_m, expected, t });
    }
    let mut train = pre_train(params, big_t - t, big_m)?.conj();
    train.time_stamp = t;
    Ok(train)
}

/// A space-time point where transmitted component `n` of the forward train
/// meets transmitted component `m` of the backward train.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweetSpot {
    pub n: usize,
    pub m: usize,
    pub big_n: usize,
    pub big_m: usize,
    pub x: f64,
    pub t: f64,
}

impl SweetSpot {
    /// Spot in the lower half of the diagram (`t <= T/2`).
    pub fn is_lower_half(&self, params: &TunnelParams, big_t: f64) -> bool {
        params.units(self.t) <= params.units(big_t) / 2.0 + SNAP
    }

    /// Spot at a wall time (`3 mod 4`), where the forward and backward trains
    /// are both clear of the barrier. The others sit at barrier crossings.
    pub fn at_wall_time(&self, params: &TunnelParams) -> bool {
        (snap(params.units(self.t)) as i64).rem_euclid(4) == 3
    }
}

/// Every sweet spot for post-selection at `T = (4i + 2) L/v`, ordered by time
/// and then position. Spot `(n, m)` sits at `t = T/2 + 2(n - m) L/v`,
/// `x = v t - (4n - 3) L`.
pub fn sweet_spots(params: &TunnelParams, big_t: f64) -> Result<Vec<SweetSpot>> {
    let i = postselection_index(params, big_t)?;
    let half = (2 * i + 1) as i64;
    let mut spots = Vec::new();
    for n in 1..=(i + 1) {
        for m in 1..=(i + 1) {
            let u = half + 2 * (n as i64 - m as i64);
            let xu = u - (4 * n as i64 - 3);
            if u <= 0 || u >= (4 * i + 2) as i64 || xu <= 0 {
                continue;
            }
            let t = params.from_units(u as f64);
            let big_n = interaction_count(params, t);
            let big_m = interaction_count(params, big_t - t);
            if n > big_n || m > big_m {
                continue;
            }
            spots.push(SweetSpot { n, m, big_n, big_m, x: xu as f64 * params.l, t });
        }
    }
    spots.sort_by(|a, b| a.t.total_cmp(&b.t).then(a.x.total_cmp(&b.x)));
    Ok(spots)
}

fn check_indices(n: usize, m: usize, big_n: usize, big_m: usize) -> Result<()> {
    if n == 0 || m == 0 || n > big_n || m > big_m {
        return Err(Error::InvalidIndices { n, m, big_n, big_m });
    }
    Ok(())
}

/// The paper's closed form for a sweet spot `(n, m)` with interaction counts
/// `(N, M)`, written for `N <= M` and mapped through `(n, N) <-> (m, M)` when
/// `N > M`. Everything is carried in log form and the common `e^{b^2 k0^2}`
/// is divided out of numerator and denominator before exponentiating.
///
/// The centre is `x_c = 2L + 2L (N - n + M - m)`; spots whose `N - n` and
/// `M - m` differ (the barrier-crossing spots) are outside its reach and come
/// out suppressed by `exp(-4 L^2 (N - n - M + m)^2 / b^2)`. Use
/// [`weak_value_spot`] for those.
pub fn weak_value_sweetspot(n: usize, m: usize, big_n: usize, big_m: usize, x: f64, params: &TunnelParams) -> Result<Complex> {
    params.validate()?;
    check_indices(n, m, big_n, big_m)?;
    if params.kappa == 0.0 {
        return Err(invalid("kappa", "the sweet-spot closed form needs kappa > 0"));
    }
    let (n, m, big_n, big_m) = if big_n > big_m { (m, n, big_m, big_n) } else { (n, m, big_n, big_m) };
    let (k0, kappa, b, l) = (params.k0, params.kappa, params.b, params.l);
    let rho = LogComplex::from(Complex::new(kappa, 0.0) / Complex::new(-kappa, k0));
    let a = n as f64 - big_n as f64;
    let c = m as f64 - big_m as f64;
    let xc = 2.0 * l - 2.0 * l * (a + c);
    let u = x - xc;
    let gauss = LogComplex::exp(Complex::new(-u * u / (b * b) - 4.0 * l * l * (a - c).powi(2) / (b * b), 2.0 * k0 * u));
    let k_2ik = LogComplex::from(Complex::new(k0, 2.0 * kappa));
    let power = n as i64 + big_n as i64 + m as i64 - big_m as i64;
    let numerator = LogComplex::from_real(k0 * k0).mul(k_2ik).mul(rho.pow_int(power)).mul(gauss);
    let e_mb = LogComplex::exp(Complex::new(-params.big_b(), 0.0));
    let bracket = k_2ik.plus(LogComplex::from(Complex::new(0.0, -2.0 * kappa)).mul(e_mb));
    let inner = bracket.mul(rho.pow_int(2 * big_n as i64)).plus(LogComplex::from_real(-k0).mul(e_mb));
    let denominator = LogComplex::from_real(PI.sqrt() * b * kappa * kappa).mul(inner);
    Ok(numerator.div(denominator).to_complex())
}

/// Nearest wall time (`3 mod 4`, in `L/v` units) strictly inside `(0, T)`
/// to `u`, for `T = (4i + 2)`; ties go to the earlier one. At finite `B` the
/// train overlap drifts by `O(e^{-B})` from one wall time to the next, so the
/// choice has to be made the same way everywhere.
fn nearest_wall_units(u: f64, t_units: f64) -> Option<f64> {
    let k = ((u - 3.0) / 4.0).round();
    [k - 1.0, k, k + 1.0]
        .into_iter()
        .map(|k| 4.0 * k + 3.0)
        .filter(|&w| w > 0.0 && w < t_units)
        .min_by(|a, b| (a - u).abs().total_cmp(&(b - u).abs()).then(a.total_cmp(b)))
}

/// Closed form derived directly from the packet trains, valid at every
/// sweet spot including the barrier-crossing ones:
///
/// `w = tau^2 r^(n+m-2) e^{2i k0 u - u^2/b^2} / (sqrt(pi) b [-r^(i+1) (1 - e^{-B}) + tau^2 e^{-B} S])`
///
/// with `u = x - x_spot`, `B = b^2 k0^2` and `S` the sum of `r^(n'+m'-2)`
/// over the transmitted pairs that coincide at the nearest wall time.
pub fn weak_value_spot(spot: &SweetSpot, x: f64, big_t: f64, params: &TunnelParams) -> Result<Complex> {
    params.validate()?;
    check_indices(spot.n, spot.m, spot.big_n, spot.big_m)?;
    let i = postselection_index(params, big_t)?;
    let (rho, tau) = reflection_transmission(params.k0, params.kappa);
    let r = LogComplex::from(-rho);
    let tau2 = LogComplex::from(tau).pow_int(2);
    let u = x - spot.x;
    let gauss = LogComplex::exp(Complex::new(-u * u / (params.b * params.b), 2.0 * params.k0 * u));
    let numerator = tau2.mul(r.pow_int(spot.n as i64 + spot.m as i64 - 2)).mul(gauss);

    let t_units = (4 * i + 2) as f64;
    let wall_u = nearest_wall_units(snap(params.units(spot.t)), t_units)
        .ok_or(Error::InvalidPostselectionTime { t_units })?;
    let big_n = interaction_count(params, params.from_units(wall_u)) as i64;
    let big_m = interaction_count(params, params.from_units(t_units - wall_u)) as i64;
    let shift = ((2.0 * wall_u - t_units) / 4.0).round() as i64;
    let mut s = LogComplex::ZERO;
    for np in 1..=big_n {
        let mp = np - shift;
        if mp >= 1 && mp <= big_m && np + mp <= i as i64 + 1 {
            s = s.plus(r.pow_int(np + mp - 2));
        }
    }
    let big_b = params.big_b();
    let e_mb = LogComplex::exp(Complex::new(-big_b, 0.0));
    let one_minus = LogComplex::from_real(-(-big_b).exp_m1());
    let inside = r.pow_int(i as i64 + 1).mul(one_minus).neg();
    let outside = tau2.mul(e_mb).mul(s);
    let denominator = LogComplex::from_real(PI.sqrt() * params.b).mul(inside.plus(outside));
    Ok(numerator.div(denominator).to_complex())
}

/// Closed form for the reflected component inside the well at
/// `T = 6 L/v`, `t = 3 L/v`:
/// `4 kappa^2 sin^2(k0 (x + 2L)) e^{-(x+2L)^2/b^2} / (sqrt(pi) b (k0^2 e^{-B} + (1 - e^{-B}) kappa^2))`,
/// i.e. the paper's expression with `(e^{2iθ} - 1)^2 e^{-2iθ} = -4 sin^2 θ` and
/// `e^{B}` divided out.
pub fn weak_value_inside(x: f64, t: f64, big_t: f64, params: &TunnelParams) -> Result<Complex> {
    params.validate()?;
    if (snap(params.units(big_t)) - 6.0).abs() > 0.0 || (snap(params.units(t)) - 3.0).abs() > 0.0 {
        return Err(invalid(
            "t",
            format!(
                "the inside closed form is for T = 6 L/v, t = 3 L/v (got T = {}, t = {} L/v); use weak_value_numeric",
                params.units(big_t),
                params.units(t)
            ),
        ));
    }
    if !(x >= params.wall() && x < 0.0) {
        return Err(Error::OutOfRegion { x });
    }
    let (k0, kappa, b) = (params.k0, params.kappa, params.b);
    if kappa == 0.0 {
        return Ok(Complex::new(0.0, 0.0));
    }
    let y = x + 2.0 * params.l;
    let big_b = params.big_b();
    let e_mb = (-big_b).exp();
    let den = PI.sqrt() * b * (k0 * k0 * e_mb + (-(-big_b).exp_m1()) * kappa * kappa);
    let s = (k0 * y).sin();
    Ok(Complex::new(4.0 * kappa * kappa * s * s * (-y * y / (b * b)).exp() / den, 0.0))
}

/// Ratio `w(n, m, N, M) / w(n-1, m-1, N, M)` of neighbouring spots taken at
/// their own centres: `rho^2 = kappa^2 / (i k0 - kappa)^2`.
pub fn neighbor_ratio(params: &TunnelParams) -> Complex {
    let (rho, _) = reflection_transmission(params.k0, params.kappa);
    rho * rho
}

/// The ratio exactly as printed alongside the paper's general solution,
/// `kappa^2 / (i k0 + kappa)^2` (the complex conjugate of [`neighbor_ratio`]).
pub fn neighbor_ratio_printed(params: &TunnelParams) -> Complex {
    let d = Complex::new(params.kappa, params.k0);
    Complex::new(params.kappa * params.kappa, 0.0) / (d * d)
}

/// Forward and backward trains at one time plus the normalising overlap
/// `∫ Phi_post^* Phi_pre dx`.
#[derive(Clone, Debug)]
pub struct TwoStateOverlap {
    pub params: TunnelParams,
    pub t: f64,
    pub big_t: f64,
    pub pre: PacketTrain,
    pub post: PacketTrain,
    /// Time at which the overlap was integrated. Equal to `t` unless `t` is
    /// within `12 b / v` of a barrier crossing, where the fixed-width train
    /// is a poor description; the overlap is time-invariant so the nearest
    /// clean time is used instead.
    pub reference_time: f64,
    pub overlap: QuadResult,
    /// `T` is of the form `(4i + 2) L/v`.
    pub validated: bool,
}

fn crossing_distance_units(u: f64) -> f64 {
    let d = (u - 1.0).rem_euclid(4.0);
    d.min(4.0 - d)
}

fn clear_of_barrier(params: &TunnelParams, t: f64, big_t: f64) -> bool {
    let margin = WINDOW_WIDTHS * params.b / params.l;
    crossing_distance_units(params.units(t)) >= margin && crossing_distance_units(params.units(big_t - t)) >= margin
}

/// Quadrature options suited to the trains: pieces no longer than a quarter
/// period of `e^{2 i k0 x}` (where the embedded 7-point rule, and hence the
/// error estimate, is already near round-off) or a quarter width. With ~1e5 pieces the summed
/// `|K15 - G7|` of pure round-off is a few hundred ulps of `∫|f|`, which sets
/// the noise floor.
pub fn train_quad_options(params: &TunnelParams) -> QuadOptions {
    QuadOptions {
        rel_tol: 1e-10,
        max_piece: (PI / (4.0 * params.k0)).min(params.b / 4.0),
        noise_rel: 512.0 * f64::EPSILON,
        ..QuadOptions::default()
    }
}

fn windows(params: &TunnelParams, trains: &[&PacketTrain]) -> (Vec<(f64, f64)>, Vec<f64>) {
    let half = WINDOW_WIDTHS * params.b;
    let mut iv = Vec::new();
    let mut breaks = vec![0.0];
    for train in trains {
        for term in &train.terms {
            let (lo, hi) = match term.region {
                Region::Inside => (params.wall(), 0.0),
                Region::Outside => (0.0, f64::INFINITY),
            };
            let a = (term.center - half).max(lo);
            let b = (term.center + half).min(hi);
            if b > a {
                iv.push((a, b));
                breaks.push(term.center);
            }
        }
    }
    (iv, breaks)
}

/// `∫ Phi_post^*(x, t) Phi_pre(x, t) dx` over the whole half-line.
pub fn overlap_integral(params: &TunnelParams, pre: &PacketTrain, post: &PacketTrain) -> QuadResult {
    let (_, breaks) = windows(params, &[pre, post]);
    // only where both trains are present can the product be non-negligible
    let (pre_iv, _) = windows(params, &[pre]);
    let (post_iv, _) = windows(params, &[post]);
    let pre_u = crate::quadrature::merge_intervals(pre_iv);
    let post_u = crate::quadrature::merge_intervals(post_iv);
    let mut both = Vec::new();
    for &(a1, b1) in &pre_u {
        for &(a2, b2) in &post_u {
            let (a, b) = (a1.max(a2), b1.min(b2));
            if b > a {
                both.push((a, b));
            }
        }
    }
    let centers: Vec<f64> = pre.terms.iter().chain(&post.terms).map(|t| t.center).collect();
    let opts = train_quad_options(params);
    let mut total = QuadResult { value: Complex::new(0.0, 0.0), error: 0.0, l1: 0.0, evaluations: 0 };
    for (a, b) in crate::quadrature::merge_intervals(both) {
        let mid = 0.5 * (a + b);
        let origin = centers.iter().copied().min_by(|p, q| (p - mid).abs().total_cmp(&(q - mid).abs())).unwrap_or(mid);
        let local_breaks: Vec<f64> = breaks.iter().map(|p| p - origin).collect();
        let q = integrate(
            |y| post.eval_local(origin, y).conj() * pre.eval_local(origin, y),
            &[(a - origin, b - origin)],
            &local_breaks,
            &opts,
        );
        total.value += q.value;
        total.error += q.error;
        total.l1 += q.l1;
        total.evaluations += q.evaluations;
    }
    total
}

impl TwoStateOverlap {
    /// Accepts any `T >= t`; `validated` records whether `T` is one of the
    /// supported post-selection times.
    pub fn new(params: &TunnelParams, t: f64, big_t: f64) -> Result<Self> {
        params.validate()?;
        if !(t >= 0.0 && t <= big_t) {
            return Err(invalid("t", format!("need 0 <= t <= T, got t = {t}, T = {big_t}")));
        }
        let validated = postselection_index(params, big_t).is_ok();
        let pre = pre_train(params, t, interaction_count(params, t))?;
        let post = post_train(params, t, big_t, interaction_count(params, big_t - t))?;
        let reference_time = if clear_of_barrier(params, t, big_t) {
            t
        } else {
            let t_units = params.units(big_t);
            let u = params.units(t);
            let mut candidates: Vec<f64> = Vec::new();
            for k in -1..=((t_units / 4.0).ceil() as i64 + 1) {
                for w in [4.0 * k as f64 + 3.0, t_units - 4.0 * k as f64 - 3.0] {
                    if w > 0.0 && w < t_units && clear_of_barrier(params, params.from_units(w), big_t) {
                        candidates.push(w);
                    }
                }
            }
            // ties go to the earlier time, matching `weak_value_spot`
            match candidates.into_iter().min_by(|a, b| (a - u).abs().total_cmp(&(b - u).abs()).then(a.total_cmp(b))) {
                Some(w) => params.from_units(w),
                None => t,
            }
        };
        let overlap = if reference_time == t {
            overlap_integral(params, &pre, &post)
        } else {
            let pre_r = pre_train(params, reference_time, interaction_count(params, reference_time))?;
            let post_r = post_train(params, reference_time, big_t, interaction_count(params, big_t - reference_time))?;
            overlap_integral(params, &pre_r, &post_r)
        };
        let rel = overlap.relative_error();
        if !(rel <= QUAD_FAILURE_TOL) {
            return Err(Error::QuadratureFailure { estimate: rel });
        }
        let mag = overlap.value.norm();
        if !(mag > OVERLAP_GUARD) || mag < 1e-13 * overlap.l1 {
            return Err(Error::VanishingOverlap { overlap: mag });
        }
        Ok(TwoStateOverlap { params: *params, t, big_t, pre, post, reference_time, overlap, validated })
    }

    pub fn denominator(&self) -> Complex {
        self.overlap.value
    }

    pub fn weak_value(&self, x: f64) -> Complex {
        self.post.eval(x).conj() * self.pre.eval(x) / self.overlap.value
    }

    pub fn weak_values(&self, xs: &[f64]) -> Vec<Complex> {
        xs.par_iter().map(|&x| self.weak_value(x)).collect()
    }

    /// `∫ w(x, t) dx` by quadrature of the numerator at `t`.
    pub fn normalization(&self) -> QuadResult {
        let mut q = overlap_integral(&self.params, &self.pre, &self.post);
        q.value /= self.overlap.value;
        q.error /= self.overlap.value.norm();
        q.l1 /= self.overlap.value.norm();
        q
    }
}

/// Weak value of the position projector `|x><x|` at time `t` for
/// post-selection at `T = (4i + 2) L/v`, with the overlap by quadrature.
pub fn weak_value_numeric(x: f64, t: f64, big_t: f64, params: &TunnelParams) -> Result<Complex> {
    postselection_index(params, big_t)?;
    Ok(TwoStateOverlap::new(params, t, big_t)?.weak_value(x))
}
