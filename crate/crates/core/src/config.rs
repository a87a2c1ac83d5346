//! Scenario configuration: a single JSON document describing one run.
//!
//! ```json
//! {
//!   "name": "fig2",
//!   "model": "tunnel_closed",
//!   "tunnel": { "b": 1, "mu": 1000, "kappa": 1000, "k0": 5000, "L": 100 },
//!   "post_times": [6],
//!   "targets": [ { "name": "A", "spot": [1, 1], "half_width": 10, "points": 200001 } ],
//!   "format": "csv"
//! }
//! ```
//!
//! Parsing reports the JSON path of the offending field, and [`ScenarioConfig::validate`]
//! checks every module invariant before anything is computed.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::atombath::{BathModel, Mode, TimeWindow, DEFAULT_BAND_OVER_GAMMA};
use crate::error::{Error, Result};
use crate::pdeoracle::{BarrierProfile, Grid};
use crate::series::Format;
use crate::tunneling::{postselection_index, sweet_spots, SweetSpot, TunnelParams};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    AtomDecay,
    TunnelClosed,
    TunnelQuadrature,
    TunnelPde,
    Checks,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default = "default_name")]
    pub name: String,
    pub model: ModelKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub atom: Option<AtomConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tunnel: Option<TunnelParams>,
    /// Post-selection times in units of `L/v`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub post_times: Vec<f64>,
    /// Output series; empty means one series per sweet spot.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub targets: Vec<TunnelTarget>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pde: Option<PdeConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checks: Option<ChecksConfig>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_format")]
    pub format: Format,
}

fn default_name() -> String {
    "scenario".to_string()
}

fn default_format() -> Format {
    Format::Csv
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomConfig {
    pub gamma: f64,
    pub n_side: usize,
    /// Half-width `N dE` of the bath band; defaults to `200 gamma`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub band: Option<f64>,
    /// Fixed level spacing instead of a fixed band.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_e: Option<f64>,
    pub windows: Vec<WindowSpec>,
    pub levels: Vec<i64>,
    #[serde(default = "default_mode")]
    pub mode: Mode,
    #[serde(default = "default_points")]
    pub points: usize,
}

fn default_mode() -> Mode {
    Mode::Analytic
}

fn default_points() -> usize {
    401
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowSpec {
    pub t_i: f64,
    pub t_f: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TunnelTarget {
    pub name: String,
    /// Sweet spot `(n, m)`; fixes `t` and centres the grid on the spot.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spot: Option<[usize; 2]>,
    /// Time in units of `L/v` (instead of `spot`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
    /// Grid centre when `spot` is absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_center: Option<f64>,
    /// Half-width of the grid in units of `b`.
    #[serde(default = "default_half_width")]
    pub half_width: f64,
    #[serde(default = "default_points")]
    pub points: usize,
}

// grids used when every sweet spot is emitted: +-3b, a few samples per
// half-wavelength at the paper's k0
const AUTO_HALF_WIDTH: f64 = 3.0;
const AUTO_POINTS: usize = 30001;

fn default_half_width() -> f64 {
    10.0
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PdeConfig {
    pub dx: f64,
    pub dt: f64,
    pub x_max: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub width_w: Option<f64>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChecksConfig {
    /// Skip the slow oracle runs.
    #[serde(default)]
    pub fast: bool,
}

/// A target resolved against one post-selection time.
#[derive(Clone, Debug, PartialEq)]
pub struct ResolvedTarget {
    pub name: String,
    pub spot: Option<SweetSpot>,
    pub t: f64,
    pub xs: Vec<f64>,
}

fn cfg_err(path: impl Into<String>, reason: impl Into<String>) -> Error {
    Error::Config { path: path.into(), reason: reason.into() }
}

/// Re-label a module validation error with the config path it came from.
fn at(prefix: &str, e: Error) -> Error {
    match e {
        Error::InvalidParameter { name, reason } => cfg_err(format!("{prefix}.{name}"), reason),
        Error::InvalidWindow { .. } | Error::InvalidPostselectionTime { .. } => cfg_err(prefix, e.to_string()),
        Error::Config { .. } => e,
        other => cfg_err(prefix, other.to_string()),
    }
}

fn positive(path: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(cfg_err(path, format!("must be > 0, got {v}")))
    }
}

/// Evenly spaced grid `center +- half`, `points` samples.
pub fn linspace(center: f64, half: f64, points: usize) -> Vec<f64> {
    if points == 1 {
        return vec![center];
    }
    let h = 2.0 * half / (points - 1) as f64;
    (0..points).map(|j| center - half + j as f64 * h).collect()
}

impl ScenarioConfig {
    /// Parse and validate.
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: ScenarioConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            cfg_err(if path.is_empty() { ".".to_string() } else { path }, e.into_inner().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| cfg_err(path.display().to_string(), e.to_string()))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty() || !self.name.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_') {
            return Err(cfg_err("name", "must be non-empty and use only [A-Za-z0-9_-]"));
        }
        match self.model {
            ModelKind::AtomDecay => {
                let atom = self.atom.as_ref().ok_or_else(|| cfg_err("atom", "required for model atom_decay"))?;
                atom.validate()?;
            }
            ModelKind::TunnelClosed | ModelKind::TunnelQuadrature | ModelKind::TunnelPde => {
                self.resolve_all()?;
                if self.model == ModelKind::TunnelPde {
                    self.pde_setup()?;
                } else if self.pde.is_some() {
                    return Err(cfg_err("pde", "only used by model tunnel_pde"));
                }
            }
            ModelKind::Checks => {}
        }
        Ok(())
    }

    pub fn tunnel_params(&self) -> Result<TunnelParams> {
        let p = self.tunnel.ok_or_else(|| cfg_err("tunnel", "required for tunnel models"))?;
        p.validate().map_err(|e| at("tunnel", e))?;
        Ok(p)
    }

    /// Post-selection times in natural units.
    pub fn post_times(&self) -> Result<Vec<f64>> {
        let p = self.tunnel_params()?;
        if self.post_times.is_empty() {
            return Err(cfg_err("post_times", "at least one post-selection time is required"));
        }
        self.post_times
            .iter()
            .enumerate()
            .map(|(k, &u)| {
                let big_t = p.from_units(u);
                postselection_index(&p, big_t).map_err(|e| at(&format!("post_times[{k}]"), e))?;
                Ok(big_t)
            })
            .collect()
    }

    /// Every `(T, targets)` pair of a tunnel scenario.
    pub fn resolve_all(&self) -> Result<Vec<(f64, Vec<ResolvedTarget>)>> {
        let p = self.tunnel_params()?;
        let times = self.post_times()?;
        let mut out = Vec::with_capacity(times.len());
        for (k, &big_t) in times.iter().enumerate() {
            let spots = sweet_spots(&p, big_t).map_err(|e| at(&format!("post_times[{k}]"), e))?;
            let targets = if self.targets.is_empty() {
                if self.model != ModelKind::TunnelClosed && self.model != ModelKind::TunnelQuadrature {
                    return Err(cfg_err("targets", "required for model tunnel_pde"));
                }
                spots
                    .iter()
                    .map(|s| ResolvedTarget {
                        name: format!("n{}m{}", s.n, s.m),
                        spot: Some(*s),
                        t: s.t,
                        xs: linspace(s.x, AUTO_HALF_WIDTH * p.b, AUTO_POINTS),
                    })
                    .collect()
            } else {
                self.targets
                    .iter()
                    .enumerate()
                    .map(|(j, tg)| tg.resolve(&format!("targets[{j}]"), &p, big_t, &spots, self.model))
                    .collect::<Result<Vec<_>>>()?
            };
            out.push((big_t, targets));
        }
        let mut names: Vec<&str> = self.targets.iter().map(|t| t.name.as_str()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err(cfg_err("targets", "target names must be unique"));
        }
        Ok(out)
    }

    /// Grid and barrier of a `tunnel_pde` scenario.
    pub fn pde_setup(&self) -> Result<(Grid, BarrierProfile)> {
        let p = self.tunnel_params()?;
        let pde = self.pde.ok_or_else(|| cfg_err("pde", "required for model tunnel_pde"))?;
        positive("pde.dx", pde.dx)?;
        positive("pde.dt", pde.dt)?;
        if !(pde.x_max > 0.0 && pde.x_max.is_finite()) {
            return Err(cfg_err("pde.x_max", format!("must be > 0 (right of the barrier), got {}", pde.x_max)));
        }
        let grid = Grid::with_spacing(p.wall(), pde.x_max, pde.dx, pde.dt).map_err(|e| at("pde", e))?;
        grid.check_resolution(p.k0, p.mu).map_err(|e| at("pde", e))?;
        let barrier = BarrierProfile::for_params(&p, pde.width_w).map_err(|e| at("pde", e))?;
        Ok((grid, barrier))
    }
}

impl AtomConfig {
    pub fn model(&self) -> Result<BathModel> {
        positive("atom.gamma", self.gamma)?;
        if self.n_side == 0 {
            return Err(cfg_err("atom.n_side", "must be positive"));
        }
        let m = match (self.band, self.delta_e) {
            (Some(_), Some(_)) => return Err(cfg_err("atom.band", "give at most one of band and delta_e")),
            (Some(band), None) => {
                positive("atom.band", band)?;
                BathModel::calibrated(self.gamma, self.n_side, band)
            }
            (None, Some(de)) => {
                positive("atom.delta_e", de)?;
                BathModel::with_spacing(self.gamma, self.n_side, de)
            }
            (None, None) => BathModel::calibrated(self.gamma, self.n_side, DEFAULT_BAND_OVER_GAMMA * self.gamma),
        };
        m.map_err(|e| at("atom", e))
    }

    pub fn windows(&self) -> Result<Vec<TimeWindow>> {
        self.windows
            .iter()
            .enumerate()
            .map(|(k, w)| {
                let path = format!("atom.windows[{k}]");
                if !(w.t_f > w.t_i) {
                    return Err(cfg_err(path, format!("need t_i < t_f, got ({}, {})", w.t_i, w.t_f)));
                }
                TimeWindow::midpoint(w.t_i, w.t_f).map_err(|e| at(&path, e))
            })
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        let model = self.model()?;
        if self.windows.is_empty() {
            return Err(cfg_err("atom.windows", "at least one window is required"));
        }
        self.windows()?;
        if self.levels.is_empty() {
            return Err(cfg_err("atom.levels", "at least one level is required"));
        }
        for (k, &n) in self.levels.iter().enumerate() {
            model.bath_index(n).map_err(|e| cfg_err(format!("atom.levels[{k}]"), e.to_string()))?;
        }
        if self.points < 2 {
            return Err(cfg_err("atom.points", "need at least 2 points"));
        }
        Ok(())
    }
}

impl TunnelTarget {
    fn resolve(&self, path: &str, p: &TunnelParams, big_t: f64, spots: &[SweetSpot], model: ModelKind) -> Result<ResolvedTarget> {
        if self.name.is_empty() || !self.name.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_') {
            return Err(cfg_err(format!("{path}.name"), "must be non-empty and use only [A-Za-z0-9_-]"));
        }
        positive(&format!("{path}.half_width"), self.half_width)?;
        if self.points == 0 {
            return Err(cfg_err(format!("{path}.points"), "must be positive"));
        }
        let half = self.half_width * p.b;
        match (self.spot, self.t) {
            (Some([n, m]), None) => {
                if self.x_center.is_some() {
                    return Err(cfg_err(format!("{path}.x_center"), "a spot fixes the centre"));
                }
                let spot = spots.iter().find(|s| s.n == n && s.m == m).ok_or_else(|| {
                    cfg_err(
                        format!("{path}.spot"),
                        format!("no sweet spot ({n}, {m}) for T = {} L/v", p.units(big_t)),
                    )
                })?;
                Ok(ResolvedTarget { name: self.name.clone(), spot: Some(*spot), t: spot.t, xs: linspace(spot.x, half, self.points) })
            }
            (None, Some(u)) => {
                if model == ModelKind::TunnelClosed {
                    return Err(cfg_err(format!("{path}.t"), "closed forms exist only at sweet spots; give `spot`"));
                }
                let t = p.from_units(u);
                if !(t >= 0.0 && t <= big_t) {
                    return Err(cfg_err(format!("{path}.t"), format!("need 0 <= t <= T, got {u} L/v")));
                }
                let center = self.x_center.ok_or_else(|| cfg_err(format!("{path}.x_center"), "required with `t`"))?;
                if !center.is_finite() {
                    return Err(cfg_err(format!("{path}.x_center"), "must be finite"));
                }
                Ok(ResolvedTarget { name: self.name.clone(), spot: None, t, xs: linspace(center, half, self.points) })
            }
            _ => Err(cfg_err(path, "give exactly one of `spot` and `t`")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const FIG2: &str = r#"{
        "name": "fig2", "model": "tunnel_closed",
        "tunnel": {"b": 1, "mu": 1000, "kappa": 1000, "k0": 5000, "L": 100},
        "post_times": [6],
        "targets": [{"name": "A", "spot": [1, 1]}]
    }"#;

    #[test]
    fn parses_and_resolves() {
        let cfg = ScenarioConfig::from_json(FIG2).unwrap();
        assert_eq!(cfg.format, Format::Csv);
        let all = cfg.resolve_all().unwrap();
        assert_eq!(all.len(), 1);
        let tg = &all[0].1[0];
        assert_eq!(tg.xs.len(), 401);
        assert!((tg.xs[200] - 200.0).abs() < 1e-12);
        assert_eq!(ScenarioConfig::from_json(&cfg.to_json()).unwrap(), cfg);
    }

    fn path_of(text: &str) -> String {
        match ScenarioConfig::from_json(text) {
            Err(Error::Config { path, .. }) => path,
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn errors_carry_field_paths() {
        assert_eq!(path_of(&FIG2.replace("\"kappa\": 1000", "\"kappa\": -1")), "tunnel.kappa");
        assert_eq!(path_of(&FIG2.replace("\"kappa\": 1000", "\"kapa\": 1000")), "tunnel.kapa");
        assert_eq!(path_of(&FIG2.replace("[6]", "[7]")), "post_times[0]");
        assert_eq!(path_of(&FIG2.replace("[1, 1]", "[2, 2]")), "targets[0].spot");
        assert_eq!(path_of(&FIG2.replace("tunnel_closed", "tunnel_magic")), "model");
        assert_eq!(path_of(&FIG2.replace("\"spot\": [1, 1]", "\"spot\": [1, 1], \"t\": 3")), "targets[0]");
        assert_eq!(path_of(r#"{"model": "atom_decay"}"#), "atom");
        assert_eq!(path_of(r#"{"model": "tunnel_pde", "tunnel": {"b": 1, "mu": 5000, "kappa": 50, "k0": 50, "L": 10}, "post_times": [6], "targets": [{"name": "a", "spot": [1,1]}], "pde": {"dx": 0.01, "dt": 0.2, "x_max": 40}}"#), "pde");
    }

    #[test]
    fn atom_block() {
        let text = r#"{"model": "atom_decay", "atom": {"gamma": 1, "n_side": 100, "windows": [{"t_i": 0, "t_f": 4}], "levels": [0, 3]}}"#;
        let cfg = ScenarioConfig::from_json(text).unwrap();
        let m = cfg.atom.as_ref().unwrap().model().unwrap();
        assert!((m.continuum_gamma() - 1.0).abs() < 1e-12);
        assert_eq!(path_of(&text.replace("[0, 3]", "[0, 300]")), "atom.levels[1]");
        assert_eq!(path_of(&text.replace("\"t_f\": 4", "\"t_f\": -4")), "atom.windows[0]");
    }
}
