//! Flat `key = value` experiment configuration.
//!
//! Grammar, one entry per line:
//!
//! ```text
//! line    := blank | comment | entry
//! comment := '#' anything
//! entry   := key '=' value [comment]
//! value   := scalar | scalar (',' scalar)*
//! ```
//!
//! Keys are listed in [`KEYS`]; unknown or repeated keys are errors that
//! carry the line number. `to_text` writes every field, and parsing its
//! output gives back an identical config.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Topology;
use crate::landscape::{DepthLaw, ScaleOverrides};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    AgingCurve,
    ClockMarginal,
    HittingLaw,
    PotentialReport,
    Diagnostics,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 5] = [
        ExperimentKind::AgingCurve,
        ExperimentKind::ClockMarginal,
        ExperimentKind::HittingLaw,
        ExperimentKind::PotentialReport,
        ExperimentKind::Diagnostics,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::AgingCurve => "aging_curve",
            ExperimentKind::ClockMarginal => "clock_marginal",
            ExperimentKind::HittingLaw => "hitting_law",
            ExperimentKind::PotentialReport => "potential_report",
            ExperimentKind::Diagnostics => "diagnostics",
        }
    }
}

impl std::fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ExperimentKind::ALL
            .into_iter()
            .find(|k| k.name() == s.trim())
            .ok_or_else(|| Error::Parameter(format!("unknown experiment {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ToleranceProfile {
    /// Looser bounds for quick runs with few replicas.
    Ci,
    /// The acceptance bounds.
    Paper,
}

impl FromStr for ToleranceProfile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "ci" => Ok(ToleranceProfile::Ci),
            "paper" => Ok(ToleranceProfile::Paper),
            other => Err(Error::Parameter(format!(
                "unknown tolerance profile {other:?}"
            ))),
        }
    }
}

impl std::fmt::Display for ToleranceProfile {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ToleranceProfile::Ci => "ci",
            ToleranceProfile::Paper => "paper",
        })
    }
}

/// Pass/fail bounds. `None` falls back to the profile default.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ToleranceOverrides {
    /// Absolute gap between an estimate and its target.
    pub gap: Option<f64>,
    /// Absolute gap to the untruncated (limit) target.
    pub limit_gap: Option<f64>,
    /// Relative error of a mean or fitted constant.
    pub rel: Option<f64>,
    /// Kolmogorov–Smirnov distance.
    pub ks: Option<f64>,
    /// Standard errors allowed on top of `gap` where a statistical check applies.
    pub sigmas: Option<f64>,
    /// Probability bound of the condition diagnostics.
    pub delta: Option<f64>,
}

/// Resolved bounds for one experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub gap: f64,
    pub limit_gap: f64,
    pub rel: f64,
    pub ks: f64,
    pub sigmas: f64,
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub topology: Topology,
    pub landscape: Option<DepthLaw>,
    /// Tail exponent for REM scales; Pareto landscapes carry their own.
    pub alpha: Option<f64>,
    /// Cloud exponent: `ρ(n) = 2^{-γn}` on the hypercube, `t, r` on the torus.
    pub gamma: Option<f64>,
    pub eps: f64,
    pub big_m: f64,
    pub thetas: Vec<f64>,
    pub environments: u64,
    pub trajectories: u64,
    pub seed: u64,
    pub output: PathBuf,
    pub workers: usize,
    pub overrides: ScaleOverrides,
    pub lambdas: Vec<f64>,
    pub t0s: Vec<f64>,
    pub s_grid: Vec<f64>,
    /// Extra sizes (dimension or bits) swept by `potential_report`.
    pub sizes: Vec<u32>,
    /// Cloud density multiplier.
    pub cloud: f64,
    pub aggregate: bool,
    /// Jump cap as a multiple of the horizon `ξ`.
    pub cap_factor: f64,
    pub profile: ToleranceProfile,
    pub tolerances: ToleranceOverrides,
}

/// Recognised keys, in the order `to_text` writes them.
pub const KEYS: &[&str] = &[
    "experiment",
    "topology",
    "landscape",
    "alpha",
    "gamma",
    "eps",
    "M",
    "theta",
    "environments",
    "trajectories",
    "seed",
    "output",
    "workers",
    "t",
    "g",
    "rho",
    "r",
    "m",
    "lambda",
    "t0",
    "s",
    "sizes",
    "cloud",
    "aggregate",
    "cap_factor",
    "tolerance_profile",
    "tol.gap",
    "tol.limit_gap",
    "tol.rel",
    "tol.ks",
    "tol.sigmas",
    "tol.delta",
];

impl ExperimentConfig {
    /// Defaults for everything except the three identifying fields.
    pub fn new(
        experiment: ExperimentKind,
        topology: Topology,
        landscape: Option<DepthLaw>,
    ) -> Self {
        Self {
            experiment,
            topology,
            landscape,
            alpha: None,
            gamma: None,
            eps: 1e-3,
            big_m: 1e3,
            thetas: vec![0.25, 0.5, 1.0, 2.0, 4.0],
            environments: 20,
            trajectories: 1000,
            seed: 0,
            output: PathBuf::from("out"),
            workers: 0,
            overrides: ScaleOverrides::default(),
            lambdas: vec![0.5, 1.0, 2.0],
            t0s: vec![0.5, 1.0],
            s_grid: vec![0.5, 1.0, 2.0],
            sizes: Vec::new(),
            cloud: 1.0,
            aggregate: false,
            cap_factor: 100.0,
            profile: ToleranceProfile::Paper,
            tolerances: ToleranceOverrides::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Parameter(m));
        if self.environments == 0 || self.trajectories == 0 {
            return bad("environments and trajectories must be at least 1".into());
        }
        if self.experiment == ExperimentKind::AgingCurve && self.thetas.is_empty() {
            return bad("aging_curve needs a nonempty theta grid".into());
        }
        if self.thetas.iter().any(|&t| !(t > 0.0 && t.is_finite())) {
            return bad("theta values must be positive".into());
        }
        if self.thetas.windows(2).any(|w| w[1] <= w[0]) {
            return bad("theta grid must be strictly increasing".into());
        }
        if !(self.eps > 0.0 && self.eps < 1.0 && self.big_m > 1.0 && self.big_m.is_finite()) {
            return bad(format!(
                "window needs 0 < eps < 1 < M, got ({}, {})",
                self.eps, self.big_m
            ));
        }
        if let Some(law) = &self.landscape {
            law.validate()?;
        }
        if matches!(
            self.experiment,
            ExperimentKind::AgingCurve
                | ExperimentKind::ClockMarginal
                | ExperimentKind::Diagnostics
        ) && self.landscape.is_none()
        {
            return bad(format!("{} needs a landscape", self.experiment));
        }
        if let (Some(DepthLaw::Rem { dim, .. }), Topology::Hypercube { dim: d }) =
            (&self.landscape, &self.topology)
        {
            if dim != d {
                return bad(format!(
                    "rem landscape n = {dim} differs from hypercube dimension {d}"
                ));
            }
        }
        if self
            .lambdas
            .iter()
            .chain(&self.t0s)
            .chain(&self.s_grid)
            .any(|&x| !(x > 0.0 && x.is_finite()))
        {
            return bad("lambda, t0 and s values must be positive".into());
        }
        if !(self.cloud > 0.0 && self.cap_factor >= 1.0) {
            return bad("cloud must be positive and cap_factor at least 1".into());
        }
        Ok(())
    }

    /// Bounds from the profile, with per-key overrides applied.
    pub fn tolerances(&self) -> Tolerances {
        let loose = if self.profile == ToleranceProfile::Ci {
            2.0
        } else {
            1.0
        };
        let gap = match (self.experiment, &self.topology) {
            (ExperimentKind::AgingCurve, Topology::Torus2d { .. }) => 0.05,
            (ExperimentKind::AgingCurve, Topology::Hypercube { .. }) => 0.07,
            (ExperimentKind::PotentialReport, _) => 0.05,
            _ => 0.02,
        };
        let rel = 0.1;
        let o = &self.tolerances;
        Tolerances {
            gap: o.gap.unwrap_or(gap * loose),
            limit_gap: o.limit_gap.unwrap_or(0.03 * loose),
            rel: o.rel.unwrap_or(rel * loose),
            ks: o.ks.unwrap_or(0.03 * loose),
            sigmas: o.sigmas.unwrap_or(3.0),
            delta: o.delta.unwrap_or(0.1 * loose),
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut seen: Vec<(&str, usize, &str)> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (k, v) = content.split_once('=').ok_or_else(|| Error::Config {
                line,
                msg: format!("expected key = value, got {content:?}"),
            })?;
            let k = k.trim();
            if !KEYS.contains(&k) {
                return Err(Error::Config {
                    line,
                    msg: format!("unknown key {k:?}"),
                });
            }
            if let Some((_, first, _)) = seen.iter().find(|(key, _, _)| *key == k) {
                return Err(Error::Config {
                    line,
                    msg: format!("key {k:?} already set on line {first}"),
                });
            }
            seen.push((k, line, v.trim()));
        }
        let get = |k: &str| {
            seen.iter()
                .find(|(key, _, _)| *key == k)
                .map(|&(_, l, v)| (l, v))
        };
        let required = |k: &str| {
            get(k).ok_or_else(|| Error::Config {
                line: 0,
                msg: format!("missing key {k:?}"),
            })
        };

        let (l, v) = required("experiment")?;
        let experiment = v.parse().map_err(wrap(l, "experiment"))?;
        let (l, v) = required("topology")?;
        let topology = v.parse().map_err(wrap(l, "topology"))?;
        let landscape = match get("landscape") {
            Some((l, v)) => Some(v.parse().map_err(wrap(l, "landscape"))?),
            None => None,
        };
        let mut c = ExperimentConfig::new(experiment, topology, landscape);
        let last_line = text.lines().count();
        for &(k, line, v) in &seen {
            let e = |msg: String| Error::Config {
                line,
                msg: format!("{k}: {msg}"),
            };
            match k {
                "experiment" | "topology" | "landscape" => {}
                "alpha" => c.alpha = Some(scalar(v).map_err(e)?),
                "gamma" => c.gamma = Some(scalar(v).map_err(e)?),
                "eps" => c.eps = scalar(v).map_err(e)?,
                "M" => c.big_m = scalar(v).map_err(e)?,
                "theta" => c.thetas = list(v).map_err(e)?,
                "environments" => c.environments = scalar(v).map_err(e)?,
                "trajectories" => c.trajectories = scalar(v).map_err(e)?,
                "seed" => c.seed = scalar(v).map_err(e)?,
                "output" => c.output = PathBuf::from(v),
                "workers" => c.workers = scalar(v).map_err(e)?,
                "t" => c.overrides.t = Some(scalar(v).map_err(e)?),
                "g" => c.overrides.g = Some(scalar(v).map_err(e)?),
                "rho" => c.overrides.rho = Some(scalar(v).map_err(e)?),
                "r" => c.overrides.r = Some(scalar(v).map_err(e)?),
                "m" => c.overrides.m = Some(scalar(v).map_err(e)?),
                "lambda" => c.lambdas = list(v).map_err(e)?,
                "t0" => c.t0s = list(v).map_err(e)?,
                "s" => c.s_grid = list(v).map_err(e)?,
                "sizes" => c.sizes = list(v).map_err(e)?,
                "cloud" => c.cloud = scalar(v).map_err(e)?,
                "aggregate" => c.aggregate = scalar(v).map_err(e)?,
                "cap_factor" => c.cap_factor = scalar(v).map_err(e)?,
                "tolerance_profile" => {
                    c.profile = v.parse().map_err(|x: Error| e(x.to_string()))?
                }
                "tol.gap" => c.tolerances.gap = Some(scalar(v).map_err(e)?),
                "tol.limit_gap" => c.tolerances.limit_gap = Some(scalar(v).map_err(e)?),
                "tol.rel" => c.tolerances.rel = Some(scalar(v).map_err(e)?),
                "tol.ks" => c.tolerances.ks = Some(scalar(v).map_err(e)?),
                "tol.sigmas" => c.tolerances.sigmas = Some(scalar(v).map_err(e)?),
                "tol.delta" => c.tolerances.delta = Some(scalar(v).map_err(e)?),
                _ => unreachable!("key list out of sync"),
            }
        }
        c.validate().map_err(|e| Error::Config {
            line: last_line,
            msg: e.to_string(),
        })?;
        Ok(c)
    }

    /// Canonical text form; `parse(to_text(c)) == c`.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        let join = |xs: &[f64]| {
            xs.iter()
                .map(|x| x.to_string())
                .collect::<Vec<_>>()
                .join(",")
        };
        put("experiment", self.experiment.to_string());
        put("topology", self.topology.to_string());
        if let Some(l) = &self.landscape {
            put("landscape", l.to_string());
        }
        if let Some(a) = self.alpha {
            put("alpha", a.to_string());
        }
        if let Some(g) = self.gamma {
            put("gamma", g.to_string());
        }
        put("eps", self.eps.to_string());
        put("M", self.big_m.to_string());
        put("theta", join(&self.thetas));
        put("environments", self.environments.to_string());
        put("trajectories", self.trajectories.to_string());
        put("seed", self.seed.to_string());
        put("output", self.output.display().to_string());
        put("workers", self.workers.to_string());
        let o = &self.overrides;
        for (k, v) in [
            ("t", o.t),
            ("g", o.g),
            ("rho", o.rho),
            ("r", o.r),
            ("m", o.m),
        ] {
            if let Some(v) = v {
                put(k, v.to_string());
            }
        }
        put("lambda", join(&self.lambdas));
        put("t0", join(&self.t0s));
        put("s", join(&self.s_grid));
        if !self.sizes.is_empty() {
            put(
                "sizes",
                self.sizes
                    .iter()
                    .map(|x| x.to_string())
                    .collect::<Vec<_>>()
                    .join(","),
            );
        }
        put("cloud", self.cloud.to_string());
        put("aggregate", self.aggregate.to_string());
        put("cap_factor", self.cap_factor.to_string());
        put("tolerance_profile", self.profile.to_string());
        let t = &self.tolerances;
        for (k, v) in [
            ("tol.gap", t.gap),
            ("tol.limit_gap", t.limit_gap),
            ("tol.rel", t.rel),
            ("tol.ks", t.ks),
            ("tol.sigmas", t.sigmas),
            ("tol.delta", t.delta),
        ] {
            if let Some(v) = v {
                put(k, v.to_string());
            }
        }
        s
    }
}

fn wrap(line: usize, key: &'static str) -> impl Fn(Error) -> Error {
    move |e| Error::Config {
        line,
        msg: format!("{key}: {e}"),
    }
}

fn scalar<T: FromStr>(v: &str) -> std::result::Result<T, String> {
    v.trim().parse().map_err(|_| format!("cannot parse {v:?}"))
}

fn list<T: FromStr>(v: &str) -> std::result::Result<Vec<T>, String> {
    v.split(',')
        .filter(|p| !p.trim().is_empty())
        .map(scalar)
        .collect()
}
