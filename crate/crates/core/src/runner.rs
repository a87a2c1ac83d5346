//! Scenario runner: turns a [`ScenarioConfig`] into data files, and hosts the
//! invariant suite and the convergence sweeps behind the CLI.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::atombath::{
    bath_sum, two_state_series, weak_value_bath_analytic, BathModel, Mode, OdeSettings, TimeWindow,
};
use crate::config::{linspace, ModelKind, ResolvedTarget, ScenarioConfig};
use crate::error::{Error, Result};
use crate::pdeoracle::{self, evolve, free_gaussian, gaussian_packet, BarrierProfile, Grid};
use crate::series::{emit_series, CoordLabel, Format, Metadata, WeakValueSeries};
use crate::tunneling::{
    neighbor_ratio, overlap_integral, sweet_spots, weak_value_spot, weak_value_sweetspot, SweetSpot, TunnelParams, TwoStateOverlap,
    ValidityFactors,
};
use crate::weakcore::{
    basis_projector_weak_values, columns, ensemble_identity_check, random_hermitian, random_operator, random_state,
    random_unitary, weak_value_general, weak_value_naive, Complex, Operator,
};

/// Outcome of one invariant check.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    /// Measured quantity compared against `tolerance`.
    pub value: f64,
    pub tolerance: f64,
    pub detail: String,
    /// Wall time; not serialized so that reports are reproducible.
    #[serde(skip, default)]
    pub seconds: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunReport {
    pub files: Vec<PathBuf>,
    pub checks: Vec<CheckResult>,
    pub warnings: Vec<String>,
}

impl RunReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// Run `f` on a pool of at most `jobs` threads (all cores when `None`).
pub fn with_jobs<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(k) = jobs {
        if k == 0 {
            return Err(Error::Config { path: "--jobs".into(), reason: "must be at least 1".into() });
        }
        builder = builder.num_threads(k);
    }
    let pool = builder.build().map_err(|e| Error::Io(e.to_string()))?;
    Ok(pool.install(f))
}

fn fmt_units(u: f64) -> String {
    if u.fract() == 0.0 && u.abs() < 1e15 {
        format!("{}", u as i64)
    } else {
        format!("{u}")
    }
}

/// Validate, compute, and write every output of `cfg` into `out_dir`.
/// `format` overrides the config's own format.
pub fn run_scenario(cfg: &ScenarioConfig, out_dir: &Path, format: Option<Format>) -> Result<RunReport> {
    cfg.validate()?;
    let format = format.unwrap_or(cfg.format);
    std::fs::create_dir_all(out_dir)?;
    match cfg.model {
        ModelKind::AtomDecay => run_atom(cfg, out_dir, format),
        ModelKind::TunnelClosed | ModelKind::TunnelQuadrature | ModelKind::TunnelPde => run_tunnel(cfg, out_dir, format),
        ModelKind::Checks => {
            let fast = cfg.checks.map(|c| c.fast).unwrap_or(false);
            let checks = run_checks(cfg.seed, fast);
            let path = out_dir.join(format!("{}_checks.json", cfg.name));
            std::fs::write(&path, checks_json(&checks))?;
            Ok(RunReport { files: vec![path], checks, warnings: Vec::new() })
        }
    }
}

fn run_atom(cfg: &ScenarioConfig, out_dir: &Path, format: Format) -> Result<RunReport> {
    let atom = cfg.atom.as_ref().expect("validated");
    let model = atom.model()?;
    let windows = atom.windows()?;
    let jobs: Vec<(usize, TimeWindow)> = windows.into_iter().enumerate().collect();
    let per_window: Vec<Result<Vec<WeakValueSeries>>> = jobs
        .par_iter()
        .map(|(k, w)| atom_window_series(cfg, &model, *k, w, &atom.levels, atom.mode, atom.points))
        .collect();
    let mut report = RunReport::default();
    for (k, series) in per_window.into_iter().enumerate() {
        for (s, &n) in series?.iter().zip(&atom.levels) {
            let path = out_dir.join(format!("{}_w{k}_n{n}.{}", cfg.name, format.extension()));
            emit_series(s, format, &path)?;
            report.files.push(path);
        }
    }
    Ok(report)
}

fn atom_window_series(
    cfg: &ScenarioConfig,
    model: &BathModel,
    k: usize,
    w: &TimeWindow,
    levels: &[i64],
    mode: Mode,
    points: usize,
) -> Result<Vec<WeakValueSeries>> {
    let half = 0.5 * w.duration();
    let mut times = linspace(w.t_i + half, half, points);
    times[0] = w.t_i;
    *times.last_mut().unwrap() = w.t_f;
    let columns: Vec<Vec<Complex>> = match mode {
        Mode::Analytic => levels
            .iter()
            .map(|&n| {
                times
                    .iter()
                    .map(|&t| weak_value_bath_analytic(model, &TimeWindow { t_i: w.t_i, t, t_f: w.t_f }, n))
                    .collect()
            })
            .collect(),
        Mode::Numeric => {
            let states = two_state_series(model, w.t_i, w.t_f, &times, &OdeSettings::default())?;
            let all: Vec<Vec<Complex>> =
                states.iter().map(|(phi, psi)| basis_projector_weak_values(phi, psi)).collect::<Result<_>>()?;
            levels
                .iter()
                .map(|&n| {
                    let idx = model.bath_index(n).expect("validated");
                    all.iter().map(|ws| ws[idx]).collect()
                })
                .collect()
        }
    };
    levels
        .iter()
        .zip(columns)
        .map(|(&n, values)| {
            let meta = Metadata::new(
                match mode {
                    Mode::Analytic => "analytic",
                    Mode::Numeric => "numeric",
                },
                &format!("w{k}_n{n}"),
                json!({ "model": model, "window": { "t_i": w.t_i, "t_f": w.t_f }, "level": n, "seed": cfg.seed }),
            );
            WeakValueSeries::from_values(CoordLabel::T, &times, &values, meta)
        })
        .collect()
}

fn spot_json(s: &SweetSpot, p: &TunnelParams) -> serde_json::Value {
    json!({ "n": s.n, "m": s.m, "N": s.big_n, "M": s.big_m, "x": s.x, "t_units": p.units(s.t) })
}

fn write_spots(path: &Path, spots: &[SweetSpot], p: &TunnelParams, format: Format) -> Result<()> {
    let text = match format {
        Format::Json => {
            let rows: Vec<_> = spots.iter().map(|s| spot_json(s, p)).collect();
            serde_json::to_string_pretty(&rows).expect("spots serialize") + "\n"
        }
        Format::Csv => {
            let mut out = String::from("n,m,N,M,x,t_units\n");
            for s in spots {
                out.push_str(&format!("{},{},{},{},{:.16e},{:.16e}\n", s.n, s.m, s.big_n, s.big_m, s.x, p.units(s.t)));
            }
            out
        }
    };
    std::fs::write(path, text)?;
    Ok(())
}

fn run_tunnel(cfg: &ScenarioConfig, out_dir: &Path, format: Format) -> Result<RunReport> {
    let p = cfg.tunnel_params()?;
    let resolved = cfg.resolve_all()?;
    let pde = if cfg.model == ModelKind::TunnelPde { Some(cfg.pde_setup()?) } else { None };
    let mut report = RunReport::default();
    let mut jobs: Vec<(f64, ResolvedTarget)> = Vec::new();
    for (big_t, targets) in &resolved {
        let u = fmt_units(p.units(*big_t));
        let path = out_dir.join(format!("{}_T{u}_spots.{}", cfg.name, format.extension()));
        write_spots(&path, &sweet_spots(&p, *big_t)?, &p, format)?;
        report.files.push(path);
        report.warnings.extend(p.validity_warnings(*big_t, &ValidityFactors::default()).into_iter().map(|w| format!("T = {u} L/v: {w}")));
        jobs.extend(targets.iter().map(|t| (*big_t, t.clone())));
    }
    let series: Vec<Result<WeakValueSeries>> =
        jobs.par_iter().map(|(big_t, tg)| tunnel_series(cfg, &p, *big_t, tg, pde.as_ref())).collect();
    for ((big_t, tg), s) in jobs.iter().zip(series) {
        let path = out_dir.join(format!("{}_T{}_{}.{}", cfg.name, fmt_units(p.units(*big_t)), tg.name, format.extension()));
        emit_series(&s?, format, &path)?;
        report.files.push(path);
    }
    report.warnings.sort();
    report.warnings.dedup();
    Ok(report)
}

fn tunnel_series(
    cfg: &ScenarioConfig,
    p: &TunnelParams,
    big_t: f64,
    tg: &ResolvedTarget,
    pde: Option<&(Grid, BarrierProfile)>,
) -> Result<WeakValueSeries> {
    let echo = |mode: &str, extra: serde_json::Value| {
        Metadata::new(
            mode,
            &tg.name,
            json!({
                "tunnel": p,
                "T_units": p.units(big_t),
                "t_units": p.units(tg.t),
                "spot": tg.spot.map(|s| spot_json(&s, p)),
                "seed": cfg.seed,
                "extra": extra,
            }),
        )
    };
    match cfg.model {
        ModelKind::TunnelClosed => {
            let spot = tg.spot.expect("validated");
            let values: Vec<Complex> = tg.xs.iter().map(|&x| weak_value_spot(&spot, x, big_t, p)).collect::<Result<_>>()?;
            WeakValueSeries::from_values(CoordLabel::X, &tg.xs, &values, echo("closed_form", json!(null)))
        }
        ModelKind::TunnelQuadrature => {
            let ov = TwoStateOverlap::new(p, tg.t, big_t)?;
            let values = ov.weak_values(&tg.xs);
            let d = ov.denominator();
            let extra = json!({
                "reference_t_units": p.units(ov.reference_time),
                "denominator": [d.re, d.im],
                "relative_error": ov.overlap.relative_error(),
            });
            WeakValueSeries::from_values(CoordLabel::X, &tg.xs, &values, echo("quadrature", extra))
        }
        ModelKind::TunnelPde => {
            let (grid, barrier) = pde.expect("validated");
            let s = pdeoracle::weak_value_pde_with(&tg.xs, tg.t, big_t, p, grid, barrier)?;
            let extra = json!({ "grid": grid, "barrier": barrier, "pde": s.metadata.params });
            Ok(WeakValueSeries { metadata: echo("pde", extra), ..s })
        }
        _ => unreachable!("not a tunnel model"),
    }
}

// ---------------------------------------------------------------------------
// invariant suite

pub fn checks_json(checks: &[CheckResult]) -> String {
    serde_json::to_string_pretty(checks).expect("checks serialize") + "\n"
}

fn timed(name: &str, tolerance: f64, f: impl FnOnce() -> Result<(f64, bool, String)>) -> CheckResult {
    let start = Instant::now();
    let (value, passed, detail) = match f() {
        Ok(r) => r,
        Err(e) => (f64::NAN, false, format!("error: {e}")),
    };
    CheckResult { name: name.to_string(), passed, value, tolerance, detail, seconds: start.elapsed().as_secs_f64() }
}

fn rel(a: Complex, b: Complex) -> f64 {
    (a - b).norm() / b.norm().max(f64::MIN_POSITIVE)
}

/// Random weak-value instances against the index-loop oracle; returns the
/// worst relative deviation.
pub fn engine_deviation(rng: &mut ChaCha8Rng, instances: usize) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for _ in 0..instances {
        let dim = rng.gen_range(2..=6);
        let pre = random_state(rng, dim);
        let post = random_state(rng, dim);
        let a: Operator = if rng.gen_bool(0.5) { random_hermitian(rng, dim) } else { random_operator(rng, dim) };
        let (uf, ub) = (random_unitary(rng, dim), random_unitary(rng, dim));
        let w = weak_value_general(&pre, &post, &a, &uf, &ub)?;
        let naive = weak_value_naive(&pre, &post, &a, &uf, &ub)?;
        worst = worst.max(rel(w, naive));
    }
    Ok(worst)
}

/// Worst residual of the ensemble decomposition on random instances.
pub fn ensemble_residual(rng: &mut ChaCha8Rng, instances: usize) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for _ in 0..instances {
        let dim = rng.gen_range(2..=6);
        let psi = random_state(rng, dim);
        let a = random_hermitian(rng, dim);
        let basis = columns(&random_unitary(rng, dim));
        worst = worst.max(ensemble_identity_check(&psi, &a, &basis)?);
    }
    Ok(worst)
}

/// Worst `|sum_all w - 1|` of the oracle weak values over random bath
/// instances with `N <= max_n`.
pub fn numeric_sum_rule(rng: &mut ChaCha8Rng, instances: usize, max_n: usize) -> Result<f64> {
    let cases: Vec<(f64, f64, f64, usize)> = (0..instances)
        .map(|_| {
            let gamma = rng.gen_range(0.2..2.0);
            let t_i = rng.gen_range(-1.0..1.0);
            let duration = rng.gen_range(0.5..4.0) / gamma;
            let n_side = rng.gen_range(4..=max_n);
            (gamma, t_i, duration, n_side)
        })
        .collect();
    let sums: Vec<Result<f64>> = cases
        .par_iter()
        .map(|&(gamma, t_i, duration, n_side)| {
            let model = BathModel::from_gamma(gamma, n_side)?;
            let w = TimeWindow::midpoint(t_i, t_i + duration)?;
            Ok((bath_sum(&model, &w, Mode::Numeric)?.full - Complex::new(1.0, 0.0)).norm())
        })
        .collect();
    sums.into_iter().try_fold(0.0f64, |acc, s| Ok(acc.max(s?)))
}

/// Max-over-`t` relative deviation between the analytic bath weak values and
/// the ODE oracle, worst over `levels`: `max_t |w_a - w_num| / max_t |w_a|`.
pub fn atom_oracle_deviation(model: &BathModel, duration: f64, levels: &[i64], samples: usize) -> Result<f64> {
    let times = linspace(0.5 * duration, 0.5 * duration, samples);
    let states = two_state_series(model, 0.0, duration, &times, &OdeSettings::default())?;
    let numeric: Vec<Vec<Complex>> =
        states.iter().map(|(phi, psi)| basis_projector_weak_values(phi, psi)).collect::<Result<_>>()?;
    let mut worst: f64 = 0.0;
    for &n in levels {
        let idx = model.bath_index(n)?;
        let (mut dev, mut scale): (f64, f64) = (0.0, 0.0);
        for (k, &t) in times.iter().enumerate() {
            let wa = weak_value_bath_analytic(model, &TimeWindow { t_i: 0.0, t, t_f: duration }, n);
            dev = dev.max((wa - numeric[k][idx]).norm());
            scale = scale.max(wa.norm());
        }
        worst = worst.max(dev / scale);
    }
    Ok(worst)
}

/// Worst `|∫ w(x, t) dx - 1|` over `times` (units of `L/v`), with every
/// numerator integrated at its own `t` and the denominator fixed at `T/2`;
/// this only holds if the train overlap is conserved in time.
pub fn normalization_drift(p: &TunnelParams, t_units: f64, times: &[f64]) -> Result<f64> {
    let big_t = p.from_units(t_units);
    let reference = TwoStateOverlap::new(p, 0.5 * big_t, big_t)?.denominator();
    let drifts: Vec<Result<f64>> = times
        .par_iter()
        .map(|&u| {
            let ov = TwoStateOverlap::new(p, p.from_units(u), big_t)?;
            let num = overlap_integral(p, &ov.pre, &ov.post).value;
            Ok((num / reference - Complex::new(1.0, 0.0)).norm())
        })
        .collect();
    drifts.into_iter().try_fold(0.0f64, |acc, d| Ok(acc.max(d?)))
}

/// L2 error of the Crank–Nicolson free Gaussian against the exact spreading
/// solution at `t = 3`.
pub fn pde_free_error(dx: f64, dt: f64) -> Result<f64> {
    let (k0, mu, b, x0, t_end) = (2.5, 1.0, 1.0, -5.0, 3.0);
    let g = Grid::with_spacing(-20.0, 40.0, dx, dt)?;
    let psi0 = gaussian_packet(&g, x0, k0, b);
    let psi = evolve(&psi0, &g, &BarrierProfile::none(), mu, (t_end / dt).round() as usize)?;
    let e: f64 =
        psi.iter().enumerate().map(|(j, z)| (z - free_gaussian(g.x(j), t_end, x0, k0, b, mu)).norm_sqr()).sum::<f64>() * g.dx();
    Ok(e.sqrt())
}

/// The invariant suite. `fast` trims instance counts and skips the PDE run.
pub fn run_checks(seed: u64, fast: bool) -> Vec<CheckResult> {
    let mut out = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let engine_n = if fast { 200 } else { 1000 };
    out.push(timed("engine_vs_dense_oracle", 1e-11, || {
        let d = engine_deviation(&mut rng, engine_n)?;
        Ok((d, d < 1e-11, format!("{engine_n} random instances")))
    }));
    out.push(timed("ensemble_identity", 1e-10, || {
        let d = ensemble_residual(&mut rng, 100)?;
        Ok((d, d < 1e-10, "100 random instances".into()))
    }));
    let (sum_n, sum_max) = if fast { (5, 40) } else { (20, 400) };
    out.push(timed("atom_sum_rule", 1e-10, || {
        let d = numeric_sum_rule(&mut rng, sum_n, sum_max)?;
        Ok((d, d < 1e-10, format!("{sum_n} random instances, N <= {sum_max}")))
    }));
    out.push(timed("atom_boundary_zeros", 0.0, || {
        let model = BathModel::from_gamma(1.0, 100)?;
        let mut worst: f64 = 0.0;
        for n in model.levels() {
            for t in [0.0, 4.0] {
                worst = worst.max(weak_value_bath_analytic(&model, &TimeWindow::new(0.0, t, 4.0)?, n).norm());
            }
        }
        Ok((worst, worst == 0.0, "all levels, N = 100".into()))
    }));
    out.push(timed("atom_exponential_growth", 0.2, || {
        let model = BathModel::from_gamma(1.0, 200)?;
        let w = |d: f64| -> Result<f64> { Ok(weak_value_bath_analytic(&model, &TimeWindow::midpoint(0.0, d)?, 0).norm()) };
        let ratio = w(8.0)? / w(6.0)?;
        let dev = (ratio / std::f64::consts::E.powi(2) - 1.0).abs();
        Ok((dev, dev <= 0.2, format!("|w0(8)| / |w0(6)| = {ratio:.4}")))
    }));
    let p = TunnelParams::fig2();
    out.push(timed("tunnel_point_a_peak", 0.01, || {
        let w = weak_value_sweetspot(1, 1, 1, 1, 2.0 * p.l, &p)?.norm();
        let dev = (w / 14.10 - 1.0).abs();
        Ok((dev, dev <= 0.01, format!("|w_A| = {w:.6}")))
    }));
    out.push(timed("tunnel_d_over_b", 0.01, || {
        let big_t = p.from_units(14.0);
        let spots = sweet_spots(&p, big_t)?;
        let find = |n: usize, m: usize| spots.iter().find(|s| s.n == n && s.m == m && (p.units(s.t) - 7.0).abs() < 1e-9).copied();
        let (b, d) = (find(2, 2), find(1, 1));
        let (b, d) = (b.ok_or_else(|| Error::Parse("point B missing".into()))?, d.ok_or_else(|| Error::Parse("point D missing".into()))?);
        let ratio = weak_value_spot(&d, d.x, big_t, &p)?.norm() / weak_value_spot(&b, b.x, big_t, &p)?.norm();
        let dev = (ratio / 26.0 - 1.0).abs();
        Ok((dev, dev <= 0.01, format!("|w_D| / |w_B| = {ratio:.6}")))
    }));
    out.push(timed("tunnel_m_independence", 1e-12, || {
        let mut worst: f64 = 0.0;
        for big_n in 1..4 {
            let x = 2.0 * p.l + 0.3 * p.b;
            let w0 = weak_value_sweetspot(big_n, big_n, big_n, big_n, x, &p)?;
            for big_m in big_n..big_n + 6 {
                worst = worst.max(rel(weak_value_sweetspot(big_n, big_m, big_n, big_m, x, &p)?, w0));
            }
        }
        Ok((worst, worst < 1e-12, "N = 1..3, M = N..N+5".into()))
    }));
    out.push(timed("tunnel_outward_growth", 1.0, || {
        let r = neighbor_ratio(&p).norm();
        Ok((r, r < 1.0, format!("|rho^2| = {r:.6}")))
    }));
    let norm_cases: Vec<(f64, Vec<f64>)> = if fast {
        vec![(6.0, vec![0.5, 2.0, 4.5])]
    } else {
        vec![(6.0, vec![0.5, 2.0, 3.5, 4.5, 5.5]), (14.0, vec![0.5, 2.0, 4.5, 7.0, 10.0, 13.5])]
    };
    out.push(timed("tunnel_normalization", 1e-6, || {
        let mut worst: f64 = 0.0;
        for (u, times) in &norm_cases {
            worst = worst.max(normalization_drift(&p, *u, times)?);
        }
        Ok((worst, worst < 1e-6, format!("numerator at several t over the overlap at T/2, T = {:?} L/v", norm_cases.iter().map(|c| c.0).collect::<Vec<_>>())))
    }));
    let spot_times: &[f64] = if fast { &[6.0] } else { &[6.0, 14.0] };
    out.push(timed("tunnel_closed_vs_quadrature", 1e-8, || {
        let mut worst: f64 = 0.0;
        let mut count = 0;
        for &u in spot_times {
            let big_t = p.from_units(u);
            for s in sweet_spots(&p, big_t)? {
                let ov = TwoStateOverlap::new(&p, s.t, big_t)?;
                worst = worst.max(rel(weak_value_spot(&s, s.x, big_t, &p)?, ov.weak_value(s.x)));
                count += 1;
            }
        }
        Ok((worst, worst < 1e-8, format!("{count} sweet spots, T = {spot_times:?} L/v")))
    }));
    if !fast {
        out.push(timed("pde_transmission", 0.02, || {
            let q = TunnelParams::new(1.0, 5000.0, 50.0, 50.0, 10.0)?;
            let g = Grid::with_spacing(q.wall(), 30.0, 0.002, 0.2)?;
            let tr = pdeoracle::transmission_probe(&q, &g)?;
            let dev = (tr / 0.5 - 1.0).abs();
            Ok((dev, dev <= 0.02, format!("|tau|^2 = {tr:.6}, expected 0.5")))
        }));
    }
    out
}

// ---------------------------------------------------------------------------
// sweeps

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepKind {
    /// Analytic vs oracle bath weak values as `N` doubles.
    AtomN,
    /// Crank–Nicolson error against the exact free Gaussian as `dx, dt` halve.
    PdeGrid,
}

impl std::str::FromStr for SweepKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "atom-n" => Ok(SweepKind::AtomN),
            "pde-grid" => Ok(SweepKind::PdeGrid),
            other => Err(Error::Parse(format!("unknown sweep `{other}` (expected atom-n or pde-grid)"))),
        }
    }
}

/// A small numeric table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Json => serde_json::to_string_pretty(self).expect("table serializes") + "\n",
            Format::Csv => {
                let mut out = self.columns.join(",") + "\n";
                for row in &self.rows {
                    out.push_str(&row.iter().map(|v| format!("{v:.16e}")).collect::<Vec<_>>().join(","));
                    out.push('\n');
                }
                out
            }
        }
    }
}

pub fn run_sweep(kind: SweepKind, fast: bool) -> Result<Table> {
    match kind {
        SweepKind::AtomN => {
            let ns: &[usize] = if fast { &[50, 100, 200] } else { &[100, 200, 400, 800] };
            let levels = [0, 3, -3, 10, -10];
            let rows: Vec<Result<Vec<f64>>> = ns
                .par_iter()
                .map(|&n| {
                    let model = BathModel::with_spacing(1.0, n, 0.5)?;
                    let dev = atom_oracle_deviation(&model, 4.0, &levels, 41)?;
                    let analytic_sum = bath_sum(&model, &TimeWindow::midpoint(0.0, 4.0)?, Mode::Analytic)?.bath.norm();
                    Ok(vec![n as f64, dev, analytic_sum])
                })
                .collect();
            Ok(Table {
                name: "atom-n".into(),
                columns: vec!["n_side".into(), "max_rel_deviation".into(), "abs_bath_sum".into()],
                rows: rows.into_iter().collect::<Result<_>>()?,
            })
        }
        SweepKind::PdeGrid => {
            let levels = if fast { 2 } else { 3 };
            let steps: Vec<(f64, f64)> = (0..levels).map(|k| (0.04 / 2f64.powi(k), 0.015 / 2f64.powi(k))).collect();
            let errs: Vec<Result<f64>> = steps.par_iter().map(|&(dx, dt)| pde_free_error(dx, dt)).collect();
            let errs: Vec<f64> = errs.into_iter().collect::<Result<_>>()?;
            let rows = steps
                .iter()
                .zip(&errs)
                .enumerate()
                .map(|(k, (&(dx, dt), &e))| vec![dx, dt, e, if k == 0 { f64::NAN } else { errs[k - 1] / e }])
                .collect();
            Ok(Table { name: "pde-grid".into(), columns: vec!["dx".into(), "dt".into(), "l2_error".into(), "reduction".into()], rows })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn engine_and_ensemble_small() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        assert!(engine_deviation(&mut rng, 50).unwrap() < 1e-11);
        assert!(ensemble_residual(&mut rng, 20).unwrap() < 1e-10);
    }

    #[test]
    fn table_csv() {
        let t = Table { name: "x".into(), columns: vec!["a".into(), "b".into()], rows: vec![vec![1.0, 0.5]] };
        assert_eq!(t.render(Format::Csv), "a,b\n1.0000000000000000e0,5.0000000000000000e-1\n");
    }

    #[test]
    fn units_formatting() {
        assert_eq!(fmt_units(6.0), "6");
        assert_eq!(fmt_units(6.5), "6.5");
    }
}
