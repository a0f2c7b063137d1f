//! Run configuration: TOML file plus command-line overrides.

use std::f64::consts::{FRAC_PI_4, FRAC_PI_8, PI};
use std::path::PathBuf;

use cusplab::bounds_lab::{choose_parameters, BoundParams, Kappa};
use cusplab::effective_ode::{model_time, ModelParams};
use cusplab::euler_patch::{corner_spacing, CDConfig};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub output_dir: PathBuf,
    pub model: ModelSection,
    pub euler: EulerSection,
    pub diagnostics: DiagnosticsSection,
    pub bounds: BoundsSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            output_dir: PathBuf::from("out"),
            model: ModelSection::default(),
            euler: EulerSection::default(),
            diagnostics: DiagnosticsSection::default(),
            bounds: BoundsSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub b0: f64,
    pub tau_max: f64,
    pub startup_eps: f64,
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Upper end of the uniform τ grid for j_integrals.csv.
    pub transport_tau_max: f64,
    pub transport_points: usize,
}

impl Default for ModelSection {
    fn default() -> Self {
        let p = ModelParams::new(FRAC_PI_8, 1e4);
        Self {
            b0: p.b0,
            tau_max: p.tau_max,
            startup_eps: p.startup_eps,
            rel_tol: p.rel_tol,
            abs_tol: p.abs_tol,
            transport_tau_max: 10.0,
            transport_points: 101,
        }
    }
}

impl ModelSection {
    pub fn params(&self) -> ModelParams {
        ModelParams {
            b0: self.b0,
            startup_eps: self.startup_eps,
            rel_tol: self.rel_tol,
            abs_tol: self.abs_tol,
            tau_max: self.tau_max,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EulerSection {
    pub r_outer: f64,
    pub n_nodes: usize,
    pub dt: f64,
    pub t_end: f64,
    pub snapshot_every: usize,
    /// 0 selects exact panel integrals.
    pub quad_order: usize,
}

impl Default for EulerSection {
    fn default() -> Self {
        Self {
            r_outer: 0.9,
            n_nodes: 1024,
            dt: 1e-3,
            t_end: 0.5,
            snapshot_every: 10,
            quad_order: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiagnosticsSection {
    /// Probe radii for compare and collapse.
    pub radii: Vec<f64>,
    pub cstar: f64,
    pub decomp_r_min: f64,
    pub decomp_r_max: f64,
    pub decomp_points: usize,
    pub decomp_angles: usize,
}

impl Default for DiagnosticsSection {
    fn default() -> Self {
        Self {
            radii: vec![1e-2, 1e-3],
            cstar: 1.0,
            decomp_r_min: 1e-3,
            decomp_r_max: 1e-1,
            decomp_points: 9,
            decomp_angles: 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum KappaConfig {
    Zero,
    Power { scale: f64, exponent: f64 },
    Table { r: Vec<f64>, kappa: Vec<f64> },
}

impl KappaConfig {
    pub fn to_kappa(&self) -> Result<Kappa, CliError> {
        Ok(match self {
            KappaConfig::Zero => Kappa::Zero,
            KappaConfig::Power { scale, exponent } => Kappa::Power {
                scale: *scale,
                exponent: *exponent,
            },
            KappaConfig::Table { r, kappa } => {
                if r.len() != kappa.len() {
                    return Err(CliError::Config(
                        "κ table needs as many r values as κ values".into(),
                    ));
                }
                Kappa::Table(r.iter().copied().zip(kappa.iter().copied()).collect())
            }
        })
    }

    /// `zero` or `power:SCALE,EXPONENT`.
    pub fn parse_flag(s: &str) -> Result<Self, CliError> {
        let bad = || {
            CliError::Config(format!(
                "unrecognised κ `{s}`; use zero or power:SCALE,EXPONENT"
            ))
        };
        if s == "zero" {
            return Ok(KappaConfig::Zero);
        }
        let rest = s.strip_prefix("power:").ok_or_else(bad)?;
        let (a, b) = rest.split_once(',').ok_or_else(bad)?;
        Ok(KappaConfig::Power {
            scale: a.trim().parse().map_err(|_| bad())?,
            exponent: b.trim().parse().map_err(|_| bad())?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundsSection {
    pub c: f64,
    pub c0: f64,
    pub cstar: f64,
    pub flow_half_angle: f64,
    pub kappa: KappaConfig,
    /// Radii as `e-L` (r = e^{−L}) or plain numbers in (0, 1).
    pub r_list: Vec<String>,
    pub delta: f64,
}

impl Default for BoundsSection {
    fn default() -> Self {
        let p = BoundParams::default();
        Self {
            c: p.c,
            c0: p.c0,
            cstar: p.cstar,
            flow_half_angle: p.flow_half_angle,
            kappa: KappaConfig::Zero,
            r_list: (1..=6).map(|k| format!("e-1e{k}")).collect(),
            delta: 0.5,
        }
    }
}

impl BoundsSection {
    pub fn params(&self) -> Result<BoundParams, CliError> {
        Ok(BoundParams {
            c: self.c,
            c0: self.c0,
            cstar: self.cstar,
            kappa: self.kappa.to_kappa()?,
            flow_half_angle: self.flow_half_angle,
        })
    }

    /// |ln r| for every entry of `r_list`.
    pub fn log_radii(&self) -> Result<Vec<f64>, CliError> {
        self.r_list.iter().map(|s| parse_log_radius(s)).collect()
    }
}

/// Parses `e-L` as |ln r| = L, or a plain radius r ∈ (0, 1) as −ln r.
pub fn parse_log_radius(s: &str) -> Result<f64, CliError> {
    let bad = || CliError::Config(format!("invalid radius `{s}`"));
    let ell = if let Some(l) = s.trim().strip_prefix("e-") {
        l.parse::<f64>().map_err(|_| bad())?
    } else {
        let r: f64 = s.trim().parse().map_err(|_| bad())?;
        if !(r > 0.0 && r < 1.0) {
            return Err(bad());
        }
        -r.ln()
    };
    if ell > 0.0 && ell.is_finite() {
        Ok(ell)
    } else {
        Err(bad())
    }
}

/// Subcommands of the driver.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Effective,
    Euler,
    Compare,
    Decomp,
    Bounds,
    Collapse,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Effective => "effective",
            Command::Euler => "euler",
            Command::Compare => "compare",
            Command::Decomp => "decomp",
            Command::Bounds => "bounds",
            Command::Collapse => "collapse",
        }
    }

    fn needs_model(self) -> bool {
        !matches!(self, Command::Bounds | Command::Euler | Command::Decomp)
    }

    fn needs_euler(self) -> bool {
        matches!(
            self,
            Command::Euler | Command::Compare | Command::Decomp | Command::Collapse
        )
    }
}

impl RunConfig {
    pub fn corner_config(&self) -> Result<CDConfig, CliError> {
        let e = &self.euler;
        let mut cfg = CDConfig::corner(self.model.b0, e.r_outer, e.n_nodes, e.dt)?;
        cfg.quad_order = e.quad_order;
        Ok(cfg)
    }

    /// Checks every parameter the command will use before any computation.
    pub fn validate(&self, cmd: Command) -> Result<(), CliError> {
        let m = &self.model;
        if cmd.needs_model() || cmd.needs_euler() {
            if !(m.b0 > 0.0 && m.b0 < FRAC_PI_4) {
                return Err(CliError::Config(format!(
                    "b0 must lie in (0, π/4), got {}",
                    m.b0
                )));
            }
        }
        if cmd.needs_model() {
            m.params().validate()?;
            if cmd == Command::Effective && (!(m.transport_tau_max > 0.0) || m.transport_points < 2)
            {
                return Err(CliError::Config(
                    "transport grid needs transport_tau_max > 0 and two points".into(),
                ));
            }
        }
        if cmd.needs_euler() {
            let e = &self.euler;
            if !(e.r_outer > 0.0 && e.r_outer.is_finite()) {
                return Err(CliError::Config(format!(
                    "r_outer must be positive, got {}",
                    e.r_outer
                )));
            }
            if !(e.t_end >= 0.0 && e.t_end.is_finite()) {
                return Err(CliError::Config(format!(
                    "t_end must be non-negative, got {}",
                    e.t_end
                )));
            }
            if e.snapshot_every == 0 {
                return Err(CliError::Config("snapshot_every must be at least 1".into()));
            }
            if e.n_nodes < 32 || e.n_nodes % 2 != 0 {
                return Err(CliError::Config(format!(
                    "n_nodes must be even and at least 32, got {}",
                    e.n_nodes
                )));
            }
            corner_spacing(m.b0, e.r_outer, e.n_nodes)?;
            self.corner_config()?.validate()?;
            let d = &self.diagnostics;
            if d.radii.is_empty() || d.radii.iter().any(|&r| !(r > 0.0 && r < e.r_outer)) {
                return Err(CliError::Config("radii must lie in (0, r_outer)".into()));
            }
            if cmd.needs_model() {
                // compare integrates F down to 1e-7·r.
                let r_min = d.radii.iter().copied().fold(f64::INFINITY, f64::min);
                let r_probe = if cmd == Command::Compare {
                    1e-7 * r_min
                } else {
                    r_min
                };
                let needed = model_time(e.t_end, r_probe);
                if m.tau_max < needed {
                    return Err(CliError::Config(format!(
                        "tau_max = {} does not reach model time {needed:.3} of the smallest radius",
                        m.tau_max
                    )));
                }
            }
            if !(d.cstar > 0.0) {
                return Err(CliError::Config("cstar must be positive".into()));
            }
            if cmd == Command::Decomp
                && (!(d.decomp_r_min > 0.0
                    && d.decomp_r_max > d.decomp_r_min
                    && d.decomp_r_max < e.r_outer)
                    || d.decomp_points < 2
                    || d.decomp_angles == 0)
            {
                return Err(CliError::Config(
                    "decomposition grid needs 0 < decomp_r_min < decomp_r_max < r_outer, two radii and one angle".into(),
                ));
            }
        }
        if cmd == Command::Bounds {
            let b = &self.bounds;
            b.params()?.validate()?;
            if b.r_list.is_empty() {
                return Err(CliError::Config("r_list is empty".into()));
            }
            let p = b.params()?;
            for ell in b.log_radii()? {
                choose_parameters(&p, ell)?;
            }
            if !(b.delta > 0.0) {
                return Err(CliError::Config(format!(
                    "delta must be positive, got {}",
                    b.delta
                )));
            }
            if !(b.flow_half_angle <= PI / 4.0) {
                return Err(CliError::Config(
                    "flow_half_angle must not exceed π/4".into(),
                ));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_round_trips() {
        let mut c = RunConfig::default();
        c.bounds.kappa = KappaConfig::Table {
            r: vec![1e-4, 1e-2],
            kappa: vec![0.01, 0.03],
        };
        let text = toml::to_string(&c).unwrap();
        let back: RunConfig = toml::from_str(&text).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn log_radius_notation() {
        assert_eq!(parse_log_radius("e-10").unwrap(), 10.0);
        assert_eq!(parse_log_radius("e-1e6").unwrap(), 1e6);
        assert!((parse_log_radius("0.01").unwrap() - 100f64.ln()).abs() < 1e-15);
        assert!(parse_log_radius("2").is_err());
        assert!(parse_log_radius("e-0").is_err());
    }

    #[test]
    fn kappa_flag() {
        assert_eq!(KappaConfig::parse_flag("zero").unwrap(), KappaConfig::Zero);
        assert_eq!(
            KappaConfig::parse_flag("power:1,0.5").unwrap(),
            KappaConfig::Power {
                scale: 1.0,
                exponent: 0.5
            }
        );
        assert!(KappaConfig::parse_flag("cubic").is_err());
    }

    #[test]
    fn validation_catches_bad_parameters() {
        let mut c = RunConfig::default();
        c.validate(Command::Effective).unwrap();
        c.validate(Command::Collapse).unwrap();
        c.model.b0 = 1.0;
        assert!(c.validate(Command::Effective).is_err());
        assert!(c.validate(Command::Bounds).is_ok());
        let mut c = RunConfig::default();
        c.euler.n_nodes = 33;
        assert!(c.validate(Command::Euler).is_err());
    }
}
