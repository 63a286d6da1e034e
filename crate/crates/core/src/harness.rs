//! Config-driven experiment runner.
//!
//! Every experiment produces CSV rows with the columns of [`Row`]:
//!
//! | column | meaning |
//! |---|---|
//! | `experiment` | experiment tag |
//! | `scope` | `pooled`, `env` (one environment), `replica` or `size` |
//! | `env`, `env_seed` | environment index and landscape seed, where relevant |
//! | `quantity` | what `estimate` measures |
//! | `param`, `param2` | the point: `θ`, `λ` and `t₀`, `s`, dimension… |
//! | `estimate`, `stderr`, `reps` | Monte Carlo or exact value |
//! | `target` | comparison value computed at run time |
//! | `tolerance`, `pass` | declared bound and its outcome, if the row is checked |
//!
//! Rows never contain timings, so identical configs give byte-identical CSV
//! files for any worker count. Wall-clock time goes to `summary.json`.

use std::collections::BTreeMap;
use std::f64::consts::{LN_2, PI};
use std::fs;
use std::io::Write as _;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, ExperimentKind, Tolerances};
use crate::dynamics::{
    condition_diagnostics, estimate_two_time, hitting_time, DiagnosticsPlan, HitOutcome,
    RandomSteps, StepSource, TwoTimePlan,
};
use crate::error::{Error, Result};
use crate::graph::{Topology, VertexId};
use crate::landscape::{
    classify, omega_root, poisson_cloud, scales, DepthLaw, Environment, LandscapeSpec, ScaleModel,
    ScaleSet, TableEnvironment, TrapClass, TrapWindow,
};
use crate::levy::{asl, stable_exponent, LevyParams};
use crate::parallel::{map_env_blocks, with_workers};
use crate::potential::{
    hypercube_hitting_lt, hypercube_matthews, torus_hitting_profile, torus_kr_fit, TorusGreen,
};
use crate::rng::{derive_key, replica_rng};
use crate::stats::{cluster_stderr, ks_distance, Moments, Proportion};

const ENV_TAG: u64 = 1;
const WALK_TAG: u64 = 2;
const PILOT_TAG: u64 = 3;

/// Horizon multiplier used for jump caps when `m` is not configured.
pub const DEFAULT_AGING_M: f64 = 10.0;
/// Landscapes with at most this many vertices are tabulated up front.
pub const TABLE_LIMIT: u64 = 1 << 22;

/// One CSV record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub experiment: String,
    pub scope: String,
    pub env: Option<u64>,
    pub env_seed: Option<u64>,
    pub quantity: String,
    pub param: f64,
    pub param2: Option<f64>,
    pub estimate: f64,
    pub stderr: Option<f64>,
    pub reps: u64,
    pub target: Option<f64>,
    pub tolerance: Option<f64>,
    pub pass: Option<bool>,
}

impl Row {
    fn new(kind: ExperimentKind, scope: &str, quantity: &str, param: f64, estimate: f64) -> Self {
        Self {
            experiment: kind.name().to_string(),
            scope: scope.to_string(),
            env: None,
            env_seed: None,
            quantity: quantity.to_string(),
            param,
            param2: None,
            estimate,
            stderr: None,
            reps: 0,
            target: None,
            tolerance: None,
            pass: None,
        }
    }

    fn env(mut self, e: u64, seed: u64) -> Self {
        self.env = Some(e);
        self.env_seed = Some(seed);
        self
    }

    fn param2(mut self, p: f64) -> Self {
        self.param2 = Some(p);
        self
    }

    fn stat(mut self, stderr: f64, reps: u64) -> Self {
        self.stderr = Some(stderr);
        self.reps = reps;
        self
    }

    fn target(mut self, t: f64) -> Self {
        self.target = Some(t);
        self
    }

    fn check(mut self, tolerance: f64, pass: bool) -> Self {
        self.tolerance = Some(tolerance);
        self.pass = Some(pass);
        self
    }
}

/// Pooled results, checks and provenance of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub experiment: ExperimentKind,
    pub seed: u64,
    pub workers: usize,
    pub wall_clock_secs: f64,
    pub tolerances: Tolerances,
    pub scales: Option<ScaleSet>,
    /// Rows that summarise the run (pooled estimates and checks).
    pub points: Vec<Row>,
    pub notes: BTreeMap<String, f64>,
    /// All declared checks passed.
    pub pass: bool,
    /// `to_text` of the config.
    pub config: String,
}

/// Landscape of one environment, tabulated when small enough.
#[derive(Debug, Clone)]
pub enum Landscape {
    Table(TableEnvironment),
    Lazy(LandscapeSpec),
}

impl Environment for Landscape {
    #[inline]
    fn tau(&self, v: VertexId) -> f64 {
        match self {
            Landscape::Table(t) => t.tau(v),
            Landscape::Lazy(s) => s.tau(v),
        }
    }
}

impl Landscape {
    pub fn new(topology: &Topology, law: DepthLaw, seed: u64) -> Result<Self> {
        let spec = LandscapeSpec::new(law, seed)?;
        let n = topology.vertex_count();
        Ok(if n <= TABLE_LIMIT {
            Landscape::Table(TableEnvironment(
                (0..n).map(|v| spec.tau(VertexId(v))).collect(),
            ))
        } else {
            Landscape::Lazy(spec)
        })
    }
}

/// Landscape seed of environment `e`.
pub fn env_seed(seed: u64, e: u64) -> u64 {
    derive_key(derive_key(seed, ENV_TAG), e)
}

/// Scale model implied by topology, landscape, `alpha` and `gamma`.
pub fn scale_model(cfg: &ExperimentConfig) -> Result<ScaleModel> {
    let need = |what: &str| {
        Error::Parameter(format!(
            "{} on {} needs {what}",
            cfg.experiment, cfg.topology
        ))
    };
    match (&cfg.topology, cfg.landscape) {
        (Topology::Complete { vertices }, Some(DepthLaw::Pareto { alpha })) => {
            Ok(ScaleModel::Complete { alpha, vertices: *vertices })
        }
        (Topology::Torus2d { bits }, Some(DepthLaw::Pareto { alpha })) => {
            Ok(ScaleModel::Torus { alpha, gamma: cfg.gamma.ok_or_else(|| need("gamma"))?, bits: *bits })
        }
        (Topology::Hypercube { dim }, Some(DepthLaw::Rem { beta, .. })) => {
            Ok(ScaleModel::Rem { alpha: cfg.alpha.ok_or_else(|| need("alpha"))?, beta, dim: *dim })
        }
        _ => Err(Error::Parameter(format!(
            "no scale model for {} with landscape {:?}; use complete or torus2d with pareto, or hypercube with rem",
            cfg.topology,
            cfg.landscape.map(|l| l.to_string())
        ))),
    }
}

fn scale_set(cfg: &ExperimentConfig, default_m: f64) -> Result<ScaleSet> {
    scales(scale_model(cfg)?, cfg.overrides.m.unwrap_or(default_m))?.with_overrides(&cfg.overrides)
}

fn cap_steps(cfg: &ExperimentConfig, horizon: f64) -> u64 {
    let c = (cfg.cap_factor * horizon).ceil();
    if c >= u64::MAX as f64 {
        u64::MAX
    } else {
        c as u64
    }
}

/// Runs the experiment without touching the file system. `sink` receives
/// rows as soon as each unit of work completes.
pub fn execute(
    cfg: &ExperimentConfig,
    sink: &mut dyn FnMut(&[Row]) -> Result<()>,
) -> Result<ExperimentReport> {
    cfg.validate()?;
    let start = Instant::now();
    let tol = cfg.tolerances();
    let mut out = Outcome::default();
    match cfg.experiment {
        ExperimentKind::AgingCurve => aging_curve(cfg, &tol, &mut out, sink)?,
        ExperimentKind::ClockMarginal => clock_marginal(cfg, &tol, &mut out, sink)?,
        ExperimentKind::HittingLaw => hitting_law(cfg, &tol, &mut out, sink)?,
        ExperimentKind::PotentialReport => potential_report(cfg, &tol, &mut out, sink)?,
        ExperimentKind::Diagnostics => diagnostics(cfg, &tol, &mut out, sink)?,
    }
    let pass = out.points.iter().all(|r| r.pass != Some(false));
    Ok(ExperimentReport {
        experiment: cfg.experiment,
        seed: cfg.seed,
        workers: cfg.workers,
        wall_clock_secs: start.elapsed().as_secs_f64(),
        tolerances: tol,
        scales: out.scales,
        points: out.points,
        notes: out.notes,
        pass,
        config: cfg.to_text(),
    })
}

/// Runs the experiment and writes `results.csv`, `summary.json` and
/// `config.txt` into `cfg.output`. CSV rows are flushed per unit of work, so
/// an interrupted run keeps what it finished.
pub fn run(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    fs::create_dir_all(&cfg.output)?;
    fs::write(cfg.output.join("config.txt"), cfg.to_text())?;
    let mut writer = csv::Writer::from_path(cfg.output.join("results.csv"))?;
    let report = execute(cfg, &mut |rows| {
        for r in rows {
            writer.serialize(r)?;
        }
        writer.flush()?;
        Ok(())
    })?;
    writer.flush()?;
    write_summary(&cfg.output, &report)?;
    Ok(report)
}

pub fn write_summary(dir: &Path, report: &ExperimentReport) -> Result<()> {
    let mut f = fs::File::create(dir.join("summary.json"))?;
    serde_json::to_writer_pretty(&mut f, report)?;
    f.write_all(b"\n")?;
    Ok(())
}

#[derive(Default)]
struct Outcome {
    points: Vec<Row>,
    notes: BTreeMap<String, f64>,
    scales: Option<ScaleSet>,
}

impl Outcome {
    fn note(&mut self, k: &str, v: f64) {
        self.notes.insert(k.to_string(), v);
    }

    fn note_scales(&mut self, sc: &ScaleSet) {
        self.scales = Some(*sc);
    }
}

fn aging_curve(
    cfg: &ExperimentConfig,
    tol: &Tolerances,
    out: &mut Outcome,
    sink: &mut dyn FnMut(&[Row]) -> Result<()>,
) -> Result<()> {
    let kind = cfg.experiment;
    let model = scale_model(cfg)?;
    let alpha = model.alpha();
    let sc = scale_set(cfg, DEFAULT_AGING_M)?;
    out.note_scales(&sc);
    let law = cfg.landscape.expect("validated");
    let window = TrapWindow::new(cfg.eps, cfg.big_m)?;
    let g = sc.g;
    let deep = move |tau: f64| classify(tau, &window, g) == TrapClass::Deep;
    let plan = TwoTimePlan {
        t_w: sc.t,
        thetas: cfg.thetas.clone(),
        environments: cfg.environments,
        trajectories: cfg.trajectories,
        key: derive_key(cfg.seed, WALK_TAG),
        start: VertexId::ORIGIN,
        cap: cap_steps(cfg, sc.xi),
    };
    let top = cfg.topology;
    let est = with_workers(cfg.workers, || {
        estimate_two_time(
            &top,
            |e| Landscape::new(&top, law, env_seed(cfg.seed, e)).expect("validated landscape"),
            &plan,
            Some(&deep),
        )
    })?;
    let targets: Vec<f64> = cfg
        .thetas
        .iter()
        .map(|&th| asl(alpha, 1.0 / (1.0 + th)))
        .collect::<Result<_>>()?;
    let mut rows = Vec::new();
    for (e, (same, fresh)) in est.per_env.iter().zip(&est.per_env_fresh).enumerate() {
        let seed = env_seed(cfg.seed, e as u64);
        for (i, &th) in cfg.thetas.iter().enumerate() {
            for (q, p) in [("R", same[i]), ("R_A", fresh[i])] {
                rows.push(
                    Row::new(kind, "env", q, th, p.estimate())
                        .env(e as u64, seed)
                        .stat(p.stderr(), p.reps)
                        .target(targets[i]),
                );
            }
        }
    }
    for (i, &th) in cfg.thetas.iter().enumerate() {
        let p = &est.pooled[i];
        let pass = (p.estimate - targets[i]).abs() < tol.gap;
        let env_means: Vec<f64> = est.per_env.iter().map(|v| v[i].estimate()).collect();
        let row = Row::new(kind, "pooled", "R", th, p.estimate)
            .stat(cluster_stderr(&env_means).unwrap_or(p.stderr), p.reps)
            .target(targets[i])
            .check(tol.gap, pass);
        rows.push(row.clone());
        out.points.push(row);
        let f = &est.pooled_fresh[i];
        let env_means: Vec<f64> = est.per_env_fresh.iter().map(|v| v[i].estimate()).collect();
        let row = Row::new(kind, "pooled", "R_A", th, f.estimate)
            .stat(cluster_stderr(&env_means).unwrap_or(f.stderr), f.reps)
            .target(targets[i]);
        rows.push(row.clone());
        out.points.push(row);
        let spread: Moments = est.per_env.iter().map(|v| v[i].estimate()).collect();
        let row = Row::new(kind, "pooled", "R_env_sd", th, spread.variance().sqrt())
            .stat(0.0, spread.count());
        rows.push(row.clone());
        out.points.push(row);
    }
    out.note("timeouts", est.timeouts as f64);
    out.note("alpha", alpha);
    out.note("cap_steps", plan.cap as f64);
    sink(&rows)
}

fn clock_marginal(
    cfg: &ExperimentConfig,
    tol: &Tolerances,
    out: &mut Outcome,
    sink: &mut dyn FnMut(&[Row]) -> Result<()>,
) -> Result<()> {
    let kind = cfg.experiment;
    let model = scale_model(cfg)?;
    let alpha = model.alpha();
    let sc = scale_set(cfg, DEFAULT_AGING_M)?;
    out.note_scales(&sc);
    let law = cfg.landscape.expect("validated");
    let window = TrapWindow::new(cfg.eps, cfg.big_m)?;
    let levy = LevyParams::new(alpha, cfg.eps, cfg.big_m)?;
    let checkpoints: Vec<u64> = cfg
        .t0s
        .iter()
        .map(|&t0| ((sc.r * t0).round() as u64).max(1))
        .collect();
    let kmax = *checkpoints.iter().max().expect("nonempty t0 grid");
    let nl = cfg.lambdas.len();
    let nt = cfg.t0s.len();
    // slot (t0 index, lambda index, truncated?)
    let slot = |i: usize, j: usize, trunc: bool| (i * nl + j) * 2 + trunc as usize;
    let top = cfg.topology;
    let (t, g) = (sc.t, sc.g);
    let blocks = with_workers(cfg.workers, || {
        map_env_blocks(
            derive_key(cfg.seed, WALK_TAG),
            cfg.environments,
            cfg.trajectories,
            |e, rng, range| {
                let env =
                    Landscape::new(&top, law, env_seed(cfg.seed, e)).expect("validated landscape");
                let mut acc = vec![Moments::new(); nt * nl * 2];
                let mut src = RandomSteps(rng);
                for _ in range {
                    let (mut v, mut full, mut trunc) = (VertexId::ORIGIN, 0.0f64, 0.0f64);
                    for k in 1..=kmax {
                        let tau = env.tau(v);
                        let h = src.holding() * tau;
                        full += h;
                        if classify(tau, &window, g) == TrapClass::Deep {
                            trunc += h;
                        }
                        v = src.neighbor(&top, v);
                        for (i, _) in checkpoints.iter().enumerate().filter(|(_, &c)| c == k) {
                            for (j, &lam) in cfg.lambdas.iter().enumerate() {
                                acc[slot(i, j, false)].push((-lam * full / t).exp());
                                acc[slot(i, j, true)].push((-lam * trunc / t).exp());
                            }
                        }
                    }
                }
                acc
            },
        )
    });
    let mut rows = Vec::new();
    let mut pooled = vec![Vec::new(); nt * nl * 2];
    for (e, env_blocks) in blocks.iter().enumerate() {
        let seed = env_seed(cfg.seed, e as u64);
        for (s, p) in pooled.iter_mut().enumerate() {
            let m = Moments::merge_all(&env_blocks.iter().map(|b| b[s]).collect::<Vec<_>>());
            p.push(m);
        }
        for (i, &t0) in cfg.t0s.iter().enumerate() {
            for (j, &lam) in cfg.lambdas.iter().enumerate() {
                for trunc in [false, true] {
                    let m = pooled[slot(i, j, trunc)][e];
                    let q = if trunc {
                        "laplace_truncated"
                    } else {
                        "laplace_full"
                    };
                    rows.push(
                        Row::new(kind, "env", q, lam, m.mean())
                            .param2(t0)
                            .env(e as u64, seed)
                            .stat(m.stderr(), m.count()),
                    );
                }
            }
        }
    }
    // the complete graph has K_G = 1 by construction; elsewhere only the
    // fitted scale is reported
    let unit_k = matches!(top, Topology::Complete { .. });
    let mut ks = Moments::new();
    for (i, &t0) in cfg.t0s.iter().enumerate() {
        for (j, &lam) in cfg.lambdas.iter().enumerate() {
            let psi = levy.laplace_exponent(lam);
            let tr = Moments::merge_all(&pooled[slot(i, j, true)]);
            let tr_se = pooled_stderr(&pooled[slot(i, j, true)]);
            let target = (-t0 * psi).exp();
            let d = (tr.mean() - target).abs();
            let mut row = Row::new(kind, "pooled", "laplace_truncated", lam, tr.mean())
                .param2(t0)
                .stat(tr_se, tr.count())
                .target(target);
            if unit_k {
                row = row.check(tol.gap, d <= tol.gap && d <= tol.sigmas * tr_se);
            }
            out.points.push(row);
            let k_fit = -tr.mean().ln() / (t0 * psi);
            ks.push(k_fit);
            out.points.push(
                Row::new(kind, "pooled", "K_fit", lam, k_fit)
                    .param2(t0)
                    .stat(0.0, tr.count()),
            );
            let fu = Moments::merge_all(&pooled[slot(i, j, false)]);
            let limit = (-t0 * stable_exponent(alpha, lam)).exp();
            let d = (fu.mean() - limit).abs();
            let mut row = Row::new(kind, "pooled", "laplace_full", lam, fu.mean())
                .param2(t0)
                .stat(pooled_stderr(&pooled[slot(i, j, false)]), fu.count())
                .target(limit);
            if unit_k {
                row = row.check(tol.limit_gap, d <= tol.limit_gap);
            }
            out.points.push(row);
        }
    }
    rows.extend(out.points.iter().cloned());
    out.note("K_fit_mean", ks.mean());
    out.note("alpha", alpha);
    sink(&rows)
}

/// Between-environment standard error, or the plain one for a single
/// environment. Trajectories in one environment share its depths, so the
/// plain standard error understates the spread of a quenched average.
fn pooled_stderr(per_env: &[Moments]) -> f64 {
    let means: Vec<f64> = per_env.iter().map(|m| m.mean()).collect();
    cluster_stderr(&means).unwrap_or_else(|| Moments::merge_all(per_env).stderr())
}

/// Cloud density `ρ(n)`: the `rho` override, or `2^{-γn}` on the hypercube.
fn cloud_density(cfg: &ExperimentConfig) -> Result<f64> {
    if let Some(rho) = cfg.overrides.rho {
        return Ok(rho);
    }
    match (cfg.topology, cfg.gamma) {
        (Topology::Hypercube { dim }, Some(gamma)) => Ok((-gamma * dim as f64 * LN_2).exp()),
        _ => Err(Error::Parameter(
            "hitting_law needs a hypercube with gamma, or an explicit rho".into(),
        )),
    }
}

fn hitting_law(
    cfg: &ExperimentConfig,
    tol: &Tolerances,
    out: &mut Outcome,
    sink: &mut dyn FnMut(&[Row]) -> Result<()>,
) -> Result<()> {
    let kind = cfg.experiment;
    let top = cfg.topology;
    let rho_n = cloud_density(cfg)?;
    let density = cfg.cloud * rho_n;
    if !(density > 0.0 && density < 1.0) {
        return Err(Error::Parameter(format!(
            "cloud density must be in (0,1), got {density}"
        )));
    }
    let scale = 1.0 / rho_n;
    let cap = cap_steps(cfg, scale / cfg.cloud);
    let nv = top.vertex_count() as f64;
    let blocks = with_workers(cfg.workers, || {
        map_env_blocks(
            derive_key(cfg.seed, WALK_TAG),
            cfg.environments,
            cfg.trajectories,
            |e, rng, range| {
                let mut crng = replica_rng(env_seed(cfg.seed, e), 0);
                let cloud: Vec<VertexId> = poisson_cloud(&top, density, &mut crng)
                    .into_iter()
                    .filter(|&v| v != VertexId::ORIGIN)
                    .collect();
                let size = cloud.len() as u64;
                let samples: Vec<(u64, HitOutcome)> = if cloud.is_empty() {
                    range.map(|i| (i, HitOutcome::Timeout(0))).collect()
                } else {
                    range
                        .map(|i| {
                            (
                                i,
                                hitting_time(
                                    &top,
                                    |v| cloud.binary_search(&v).is_ok(),
                                    VertexId::ORIGIN,
                                    cap,
                                    rng,
                                ),
                            )
                        })
                        .collect()
                };
                (size, samples)
            },
        )
    });
    let mut rows = Vec::new();
    let mut scaled = Vec::new();
    let mut normalised = Vec::new();
    let (mut timeouts, mut empty) = (0u64, 0u64);
    for (e, env_blocks) in blocks.iter().enumerate() {
        let seed = env_seed(cfg.seed, e as u64);
        let size = env_blocks[0].0;
        let mut env_scaled = Vec::new();
        for (_, samples) in env_blocks {
            for &(i, h) in samples {
                match h {
                    HitOutcome::Hit(k) => {
                        let x = k as f64 / scale;
                        env_scaled.push(x);
                        normalised.push(k as f64 * size as f64 / nv);
                        rows.push(
                            Row::new(kind, "replica", "H_scaled", i as f64, x)
                                .env(e as u64, seed)
                                .param2(size as f64),
                        );
                    }
                    HitOutcome::Timeout(_) if size == 0 => empty += 1,
                    HitOutcome::Timeout(_) => timeouts += 1,
                }
            }
        }
        let m: Moments = env_scaled.iter().copied().collect();
        rows.push(
            Row::new(kind, "env", "mean_H_scaled", size as f64, m.mean())
                .env(e as u64, seed)
                .stat(m.stderr(), m.count()),
        );
        scaled.extend(env_scaled);
    }
    let m: Moments = scaled.iter().copied().collect();
    let mean_target = 1.0 / cfg.cloud;
    let rel = (m.mean() / mean_target - 1.0).abs();
    out.points.push(
        Row::new(kind, "pooled", "mean_H_scaled", cfg.cloud, m.mean())
            .stat(m.stderr(), m.count())
            .target(mean_target)
            .check(tol.rel, rel < tol.rel),
    );
    let ks = ks_distance(&scaled, |x| 1.0 - (-cfg.cloud * x).exp());
    out.points.push(
        Row::new(kind, "pooled", "ks_exponential", cfg.cloud, ks)
            .stat(0.0, scaled.len() as u64)
            .target(0.0)
            .check(tol.ks, ks < tol.ks),
    );
    // the same law with the realised cloud size in place of its mean
    let mn: Moments = normalised.iter().copied().collect();
    out.points.push(
        Row::new(
            kind,
            "pooled",
            "mean_H_size_normalised",
            cfg.cloud,
            mn.mean(),
        )
        .stat(mn.stderr(), mn.count())
        .target(1.0),
    );
    let ksn = ks_distance(&normalised, |x| 1.0 - (-x).exp());
    out.points.push(
        Row::new(kind, "pooled", "ks_size_normalised", cfg.cloud, ksn)
            .stat(0.0, mn.count())
            .target(0.0),
    );
    rows.extend(out.points.iter().cloned());
    out.note("timeouts", timeouts as f64);
    out.note("empty_cloud_replicas", empty as f64);
    out.note("cap_steps", cap as f64);
    out.note("density", density);
    sink(&rows)
}

fn potential_report(
    cfg: &ExperimentConfig,
    tol: &Tolerances,
    out: &mut Outcome,
    sink: &mut dyn FnMut(&[Row]) -> Result<()>,
) -> Result<()> {
    let kind = cfg.experiment;
    let gamma = cfg
        .gamma
        .ok_or_else(|| Error::Parameter("potential_report needs gamma".into()))?;
    let sizes: Vec<u32> = if cfg.sizes.is_empty() {
        match cfg.topology {
            Topology::Hypercube { dim } => vec![dim],
            Topology::Torus2d { bits } => vec![bits],
            Topology::Complete { .. } => Vec::new(),
        }
    } else {
        cfg.sizes.clone()
    };
    match cfg.topology {
        Topology::Hypercube { .. } => {
            let omega = omega_root((2.0 * gamma - 1.0) * LN_2)?;
            for &n in &sizes {
                let mut rows = Vec::new();
                let nf = n as f64;
                let set_size = (cfg.cloud * (2f64).powf((1.0 - gamma) * nf))
                    .round()
                    .max(2.0);
                let d_min = (((omega + cfg.eps) * nf).ceil() as u32).clamp(1, n);
                for &s in &cfg.s_grid {
                    let f = hypercube_hitting_lt(n, n, s, gamma)?;
                    let pred = 1.0 / (s * (2f64).powf((1.0 - gamma) * nf));
                    rows.push(
                        Row::new(kind, "size", "f_antipode", nf, f)
                            .param2(s)
                            .target(pred),
                    );
                    rows.push(
                        Row::new(kind, "size", "f_antipode_ratio", nf, f / pred)
                            .param2(s)
                            .target(1.0),
                    );
                    let mt = hypercube_matthews(n, gamma, s, d_min, set_size)?;
                    rows.push(
                        Row::new(kind, "size", "matthews_lower", nf, mt.lower)
                            .param2(s)
                            .target(mt.target),
                    );
                    rows.push(
                        Row::new(kind, "size", "matthews_upper", nf, mt.upper)
                            .param2(s)
                            .target(mt.target),
                    );
                    // K in Kρ/(s+Kρ) at the geometric middle of the sandwich
                    let mid = (mt.lower * mt.upper).sqrt();
                    let rho = set_size * (2f64).powf(-(1.0 - gamma) * nf);
                    rows.push(
                        Row::new(kind, "size", "K_r", nf, s * mid / (rho * (1.0 - mid)))
                            .param2(s)
                            .target(1.0),
                    );
                }
                out.points.extend(rows.iter().cloned());
                sink(&rows)?;
            }
        }
        Topology::Torus2d { .. } => {
            let kr_target = PI / (2.0 * LN_2);
            let mut last_ratio: Option<f64> = None;
            let mut monotone = true;
            for &bits in &sizes {
                let mut rows = Vec::new();
                let nf = bits as f64;
                for &s in &cfg.s_grid {
                    let green = TorusGreen::new(bits, s, gamma)?;
                    let ratio = green.origin_ratio();
                    rows.push(
                        Row::new(kind, "size", "green_origin_ratio", nf, ratio)
                            .param2(s)
                            .target(1.0)
                            .check(tol.gap, (ratio - 1.0).abs() <= tol.gap),
                    );
                    let prof = torus_hitting_profile(bits, gamma, s, cfg.cloud)?;
                    rows.push(
                        Row::new(kind, "size", "matthews_lower", nf, prof.lower)
                            .param2(s)
                            .target(prof.target),
                    );
                    rows.push(
                        Row::new(kind, "size", "matthews_upper", nf, prof.upper)
                            .param2(s)
                            .target(prof.target),
                    );
                    rows.push(
                        Row::new(kind, "size", "K_r_point", nf, prof.k_r)
                            .param2(s)
                            .target(kr_target),
                    );
                }
                let s_ref = cfg.s_grid[0];
                let ratio = TorusGreen::new(bits, s_ref, gamma)?.origin_ratio();
                if let Some(prev) = last_ratio {
                    monotone &= (ratio - 1.0).abs() < (prev - 1.0).abs();
                }
                last_ratio = Some(ratio);
                if cfg.s_grid.len() >= 2 {
                    let fit = torus_kr_fit(bits, gamma, &cfg.s_grid)?;
                    let rel = (fit.k_r / kr_target - 1.0).abs();
                    rows.push(
                        Row::new(kind, "size", "K_r", nf, fit.k_r)
                            .target(kr_target)
                            .check(tol.rel, rel < tol.rel),
                    );
                    rows.push(Row::new(kind, "size", "K_r_slope", nf, fit.slope).target(1.0));
                }
                out.points.extend(rows.iter().cloned());
                sink(&rows)?;
            }
            if sizes.len() >= 2 {
                let row = Row::new(
                    kind,
                    "pooled",
                    "green_ratio_converges",
                    cfg.s_grid[0],
                    monotone as u8 as f64,
                )
                .target(1.0)
                .check(0.0, monotone);
                out.points.push(row.clone());
                sink(&[row])?;
            }
        }
        Topology::Complete { .. } => {
            return Err(Error::Parameter(
                "potential_report supports hypercube and torus2d".into(),
            ));
        }
    }
    Ok(())
}

/// `λ_n` of the Condition (D) statistic.
pub fn condition_d_lambda(model: &ScaleModel) -> f64 {
    match *model {
        ScaleModel::Rem { dim, .. } => (dim as f64).sqrt(),
        // any exponent δ - 1 with 0 < δ < γ; the midpoint is used
        ScaleModel::Torus { gamma, bits, .. } => (bits as f64).powf(gamma / 2.0 - 1.0),
        ScaleModel::Complete { .. } => 1.0,
    }
}

/// Smallest `m` in `1, 2, 4, …, 64` whose pilot run covers `(1+θ)t` with
/// deep-trap time in at least 99% of walks.
pub fn calibrate_m(cfg: &ExperimentConfig, theta: f64) -> Result<(f64, Vec<(f64, f64)>)> {
    let model = scale_model(cfg)?;
    let law = cfg.landscape.expect("validated");
    let top = cfg.topology;
    let window = TrapWindow::new(cfg.eps, cfg.big_m)?;
    let mut log = Vec::new();
    for m in [1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0] {
        let sc = scales(model, m)?.with_overrides(&crate::landscape::ScaleOverrides {
            m: None,
            ..cfg.overrides
        })?;
        let plan = DiagnosticsPlan {
            window,
            g: sc.g,
            t: sc.t,
            xi: sc.horizon_steps(),
            mr: sc.xi,
            theta,
            lambda_d: 1.0,
            environments: cfg.environments.min(4),
            trajectories: cfg.trajectories.min(64),
            visit_trajectories: 0,
            deltas: Vec::new(),
            key: derive_key(cfg.seed, PILOT_TAG),
            start: VertexId::ORIGIN,
            aggregate: true,
        };
        let r = with_workers(cfg.workers, || {
            condition_diagnostics(
                &top,
                |e| Landscape::new(&top, law, env_seed(cfg.seed, e)).expect("validated landscape"),
                &plan,
            )
        })?;
        let cover = r.deep_time_covers.estimate();
        log.push((m, cover));
        if cover >= 0.99 {
            return Ok((m, log));
        }
    }
    Ok((64.0, log))
}

fn diagnostics(
    cfg: &ExperimentConfig,
    tol: &Tolerances,
    out: &mut Outcome,
    sink: &mut dyn FnMut(&[Row]) -> Result<()>,
) -> Result<()> {
    let kind = cfg.experiment;
    let model = scale_model(cfg)?;
    let theta = *cfg.thetas.last().expect("validated");
    let m = match cfg.overrides.m {
        Some(m) => m,
        None => {
            let (m, log) = calibrate_m(cfg, theta)?;
            for (mm, c) in log {
                out.note(&format!("pilot_cover_m{mm}"), c);
            }
            m
        }
    };
    out.note("m", m);
    let sc = scales(model, m)?.with_overrides(&cfg.overrides)?;
    out.note_scales(&sc);
    let law = cfg.landscape.expect("validated");
    let top = cfg.topology;
    let lambda_d = condition_d_lambda(&model);
    out.note("lambda_d", lambda_d);
    let plan = DiagnosticsPlan {
        window: TrapWindow::new(cfg.eps, cfg.big_m)?,
        g: sc.g,
        t: sc.t,
        xi: sc.horizon_steps(),
        mr: sc.xi,
        theta,
        lambda_d,
        environments: cfg.environments,
        trajectories: cfg.trajectories,
        visit_trajectories: cfg.trajectories.min(64),
        deltas: vec![0.1, 0.05],
        key: derive_key(cfg.seed, WALK_TAG),
        start: VertexId::ORIGIN,
        aggregate: cfg.aggregate,
    };
    let r = with_workers(cfg.workers, || {
        condition_diagnostics(
            &top,
            |e| Landscape::new(&top, law, env_seed(cfg.seed, e)).expect("validated landscape"),
            &plan,
        )
    })?;
    let d = tol.delta;
    let p = |q: &str, x: Proportion| {
        Row::new(kind, "pooled", q, theta, x.estimate()).stat(x.stderr(), x.reps)
    };
    let reps = r.very_deep_hit.reps;
    out.points.push(
        Row::new(
            kind,
            "pooled",
            "shallow_fraction",
            theta,
            r.shallow_fraction,
        )
        .stat(r.shallow_fraction_stderr, reps)
        .target(0.0)
        .check(d, r.shallow_fraction <= d),
    );
    out.points.push(
        p("very_deep_hit", r.very_deep_hit)
            .target(0.0)
            .check(d, r.very_deep_hit.estimate() <= d),
    );
    out.points.push(
        p("deep_time_covers", r.deep_time_covers)
            .target(1.0)
            .check(d, r.deep_time_covers.estimate() >= 1.0 - d),
    );
    out.points.push(p("repetition", r.repetition).target(0.0));
    for &(delta, prop) in &r.post {
        out.points.push(p("post_same_trap", prop).param2(delta));
    }
    let cd: Moments = r.condition_d.iter().copied().collect();
    out.points.push(
        Row::new(kind, "pooled", "condition_d_ratio", theta, cd.mean())
            .stat(cd.stderr(), cd.count()),
    );
    out.points
        .push(Row::new(kind, "pooled", "mean_zeta", theta, r.mean_zeta).stat(0.0, reps));
    let mut rows: Vec<Row> = r
        .condition_d
        .iter()
        .enumerate()
        .map(|(e, &v)| {
            Row::new(kind, "env", "condition_d_ratio", theta, v)
                .env(e as u64, env_seed(cfg.seed, e as u64))
        })
        .collect();
    rows.extend(out.points.iter().cloned());
    sink(&rows)
}
