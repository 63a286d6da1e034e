//! Random depth landscapes, the time/depth/density scales of each model,
//! deep-trap classification and Poisson-cloud geometry.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Topology, VertexId};
use crate::rng::{hash2, unit_open};
use crate::special::{normal_quantile, normal_sf};

/// Anything that assigns a depth to every vertex.
pub trait Environment: Sync {
    fn tau(&self, v: VertexId) -> f64;
}

/// Law of a single trap depth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum DepthLaw {
    /// `P[tau >= u] = u^{-alpha}` for `u >= 1`.
    Pareto { alpha: f64 },
    /// `tau = exp(beta * E)` with `E ~ Normal(0, dim)`.
    Rem { beta: f64, dim: u32 },
}

impl DepthLaw {
    pub fn validate(&self) -> Result<()> {
        match *self {
            DepthLaw::Pareto { alpha } if !(alpha > 0.0 && alpha < 1.0) => Err(Error::Landscape(
                format!("pareto alpha must be in (0,1), got {alpha}"),
            )),
            DepthLaw::Rem { beta, .. } if !(beta > 0.0 && beta.is_finite()) => Err(
                Error::Landscape(format!("rem beta must be positive, got {beta}")),
            ),
            DepthLaw::Rem { dim: 0, .. } => {
                Err(Error::Landscape("rem dimension must be positive".into()))
            }
            _ => Ok(()),
        }
    }

    /// Depth from a uniform variate in (0, 1) by inverse CDF.
    #[inline]
    pub fn from_uniform(&self, u: f64) -> f64 {
        match *self {
            DepthLaw::Pareto { alpha } => u.powf(-1.0 / alpha),
            DepthLaw::Rem { beta, dim } => (beta * (dim as f64).sqrt() * normal_quantile(u)).exp(),
        }
    }

    /// Exact `P[tau >= u]`.
    pub fn tail(&self, u: f64) -> f64 {
        match *self {
            DepthLaw::Pareto { alpha } => {
                if u <= 1.0 {
                    1.0
                } else {
                    u.powf(-alpha)
                }
            }
            DepthLaw::Rem { beta, dim } => {
                if u <= 0.0 {
                    1.0
                } else {
                    normal_sf(u.ln() / (beta * (dim as f64).sqrt()))
                }
            }
        }
    }
}

impl fmt::Display for DepthLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DepthLaw::Pareto { alpha } => write!(f, "pareto:alpha={alpha}"),
            DepthLaw::Rem { beta, dim } => write!(f, "rem:beta={beta},n={dim}"),
        }
    }
}

impl FromStr for DepthLaw {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, rest) = s
            .trim()
            .split_once(':')
            .ok_or_else(|| Error::Landscape(format!("expected kind:key=value,..., got {s:?}")))?;
        let mut alpha = None;
        let mut beta = None;
        let mut dim = None;
        for kv in rest.split(',').filter(|p| !p.trim().is_empty()) {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Error::Landscape(format!("expected key=value in {kv:?}")))?;
            let bad = || Error::Landscape(format!("bad value for {}: {v:?}", k.trim()));
            match k.trim() {
                "alpha" => alpha = Some(v.trim().parse::<f64>().map_err(|_| bad())?),
                "beta" => beta = Some(v.trim().parse::<f64>().map_err(|_| bad())?),
                "n" => dim = Some(v.trim().parse::<u32>().map_err(|_| bad())?),
                other => return Err(Error::Landscape(format!("unknown key {other:?}"))),
            }
        }
        let law = match kind.trim() {
            "pareto" => DepthLaw::Pareto {
                alpha: alpha.ok_or_else(|| Error::Landscape("pareto needs alpha".into()))?,
            },
            "rem" => DepthLaw::Rem {
                beta: beta.ok_or_else(|| Error::Landscape("rem needs beta".into()))?,
                dim: dim.ok_or_else(|| Error::Landscape("rem needs n".into()))?,
            },
            other => return Err(Error::Landscape(format!("unknown landscape {other:?}"))),
        };
        law.validate()?;
        Ok(law)
    }
}

/// Lazily generated i.i.d. landscape: the depth at `v` is a pure function of
/// `(seed, v)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LandscapeSpec {
    pub law: DepthLaw,
    pub seed: u64,
}

impl LandscapeSpec {
    pub fn new(law: DepthLaw, seed: u64) -> Result<Self> {
        law.validate()?;
        Ok(Self { law, seed })
    }

    #[inline]
    pub fn uniform(&self, v: VertexId) -> f64 {
        unit_open(hash2(self.seed, v.0))
    }
}

impl Environment for LandscapeSpec {
    #[inline]
    fn tau(&self, v: VertexId) -> f64 {
        self.law.from_uniform(self.uniform(v))
    }
}

/// Explicit depth table indexed by vertex label.
#[derive(Debug, Clone, PartialEq)]
pub struct TableEnvironment(pub Vec<f64>);

impl Environment for TableEnvironment {
    fn tau(&self, v: VertexId) -> f64 {
        self.0[v.0 as usize]
    }
}

/// The same depth everywhere.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantEnvironment(pub f64);

impl Environment for ConstantEnvironment {
    fn tau(&self, _: VertexId) -> f64 {
        self.0
    }
}

/// `factor * tau` for an inner environment.
#[derive(Debug, Clone, Copy)]
pub struct ScaledEnvironment<E> {
    pub inner: E,
    pub factor: f64,
}

impl<E: Environment> Environment for ScaledEnvironment<E> {
    fn tau(&self, v: VertexId) -> f64 {
        self.factor * self.inner.tau(v)
    }
}

impl<E: Environment + ?Sized> Environment for &E {
    fn tau(&self, v: VertexId) -> f64 {
        (**self).tau(v)
    }
}

/// Model whose scales are known in closed form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ScaleModel {
    /// REM on the hypercube of dimension `dim`.
    Rem { alpha: f64, beta: f64, dim: u32 },
    /// Pareto landscape on the torus of side `2^bits`.
    Torus { alpha: f64, gamma: f64, bits: u32 },
    /// Pareto landscape on the complete graph.
    Complete { alpha: f64, vertices: u64 },
}

impl ScaleModel {
    pub fn alpha(&self) -> f64 {
        match *self {
            ScaleModel::Rem { alpha, .. }
            | ScaleModel::Torus { alpha, .. }
            | ScaleModel::Complete { alpha, .. } => alpha,
        }
    }
}

/// `alpha^2 beta^2 / (2 log 2)`; REM aging is proved when this lies in (3/4, 1).
pub fn rem_window_ratio(alpha: f64, beta: f64) -> f64 {
    alpha * alpha * beta * beta / (2.0 * std::f64::consts::LN_2)
}

pub fn rem_window_ok(alpha: f64, beta: f64) -> bool {
    let w = rem_window_ratio(alpha, beta);
    w > 0.75 && w < 1.0
}

/// Inverse temperature giving a prescribed window ratio.
pub fn rem_beta_for_ratio(alpha: f64, ratio: f64) -> f64 {
    (ratio * 2.0 * std::f64::consts::LN_2).sqrt() / alpha
}

pub fn torus_gamma_ok(gamma: f64) -> bool {
    gamma > 0.0 && gamma < 1.0 / 6.0
}

/// Observation, depth, density, step and Green scales of a model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaleSet {
    pub t: f64,
    pub g: f64,
    pub rho: f64,
    pub r: f64,
    pub f: f64,
    pub xi: f64,
    pub m: f64,
}

/// Per-key replacements for sensitivity studies.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ScaleOverrides {
    pub t: Option<f64>,
    pub g: Option<f64>,
    pub rho: Option<f64>,
    pub r: Option<f64>,
    pub m: Option<f64>,
}

impl ScaleOverrides {
    pub fn is_empty(&self) -> bool {
        *self == ScaleOverrides::default()
    }
}

fn finite(name: &str, x: f64) -> Result<f64> {
    if x.is_finite() && x > 0.0 {
        Ok(x)
    } else {
        Err(Error::ScaleOverflow(format!("{name} = {x}")))
    }
}

/// Scales of `model` with horizon multiplier `m` (`xi = m r`).
pub fn scales(model: ScaleModel, m: f64) -> Result<ScaleSet> {
    if !(m > 0.0 && m.is_finite()) {
        return Err(Error::Parameter(format!(
            "horizon multiplier must be positive, got {m}"
        )));
    }
    let alpha = model.alpha();
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Parameter(format!(
            "alpha must be in (0,1), got {alpha}"
        )));
    }
    let ln2 = std::f64::consts::LN_2;
    let (ln_t, ln_g, ln_rho, ln_r) = match model {
        ScaleModel::Rem { alpha, beta, dim } => {
            if !(beta > 0.0) || dim == 0 {
                return Err(Error::Parameter("rem needs beta > 0 and n > 0".into()));
            }
            let n = dim as f64;
            let ln_g = -(alpha * beta * (2.0 * std::f64::consts::PI * n).sqrt()).ln() / alpha
                + alpha * beta * beta * n;
            let ln_r = alpha * alpha * beta * beta * n / 2.0;
            (ln_g, ln_g, -ln_r, ln_r)
        }
        ScaleModel::Torus { alpha, gamma, bits } => {
            if !(gamma > 0.0 && gamma < 1.0) {
                return Err(Error::Parameter(format!(
                    "torus gamma must be in (0,1), got {gamma}"
                )));
            }
            let n = bits as f64;
            let ln_t = 2.0 * n * ln2 / alpha + (1.0 - gamma / alpha) * n.ln();
            let ln_g = 2.0 * n * ln2 / alpha - gamma / alpha * n.ln();
            (
                ln_t,
                ln_g,
                -alpha * ln_g,
                2.0 * n * ln2 + (1.0 - gamma) * n.ln(),
            )
        }
        ScaleModel::Complete { alpha, vertices } => {
            if vertices < 2 {
                return Err(Error::Parameter("complete graph needs N >= 2".into()));
            }
            let ln_n = (vertices as f64).ln();
            let ln_g = ln_n / (2.0 * alpha);
            (ln_g, ln_g, -0.5 * ln_n, 0.5 * ln_n)
        }
    };
    let t = finite("t", ln_t.exp())?;
    let g = finite("g", ln_g.exp())?;
    let rho = finite("rho", ln_rho.exp())?;
    let r = finite("r", ln_r.exp())?;
    let f = (ln_t - ln_g).exp();
    let set = ScaleSet {
        t,
        g,
        rho,
        r,
        f,
        xi: m * r,
        m,
    };
    if set.xi >= u64::MAX as f64 / 128.0 {
        return Err(Error::ScaleOverflow(format!("horizon xi = {}", set.xi)));
    }
    Ok(set)
}

impl ScaleSet {
    /// Applies overrides; `f` and `xi` are recomputed from the result.
    pub fn with_overrides(mut self, o: &ScaleOverrides) -> Result<ScaleSet> {
        if let Some(t) = o.t {
            self.t = finite("t", t)?;
        }
        if let Some(g) = o.g {
            self.g = finite("g", g)?;
        }
        if let Some(rho) = o.rho {
            self.rho = finite("rho", rho)?;
        }
        if let Some(r) = o.r {
            self.r = finite("r", r)?;
        }
        if let Some(m) = o.m {
            self.m = finite("m", m)?;
        }
        self.f = self.t / self.g;
        self.xi = self.m * self.r;
        Ok(self)
    }

    /// Horizon in whole steps.
    pub fn horizon_steps(&self) -> u64 {
        self.xi.ceil() as u64
    }
}

/// `ρ^{-1} P[τ >= u g]`, which should be close to `u^{-α}`.
pub fn condition_a_ratio(law: &DepthLaw, scales: &ScaleSet, u: f64) -> f64 {
    law.tail(u * scales.g) / scales.rho
}

/// Deep-trap window `[eps g, M g)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrapWindow {
    pub eps: f64,
    pub big_m: f64,
}

impl TrapWindow {
    pub fn new(eps: f64, big_m: f64) -> Result<Self> {
        if !(eps > 0.0 && eps < 1.0 && big_m > 1.0 && big_m.is_finite()) {
            return Err(Error::Parameter(format!(
                "trap window needs 0 < eps < 1 < M, got ({eps}, {big_m})"
            )));
        }
        Ok(Self { eps, big_m })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TrapClass {
    Shallow,
    Deep,
    VeryDeep,
}

/// Shallow below `eps g`, deep on `[eps g, M g)`, very deep from `M g` on.
#[inline]
pub fn classify(tau: f64, window: &TrapWindow, g: f64) -> TrapClass {
    if tau < window.eps * g {
        TrapClass::Shallow
    } else if tau < window.big_m * g {
        TrapClass::Deep
    } else {
        TrapClass::VeryDeep
    }
}

/// `I(x) = x log x + (1-x) log(1-x) + log 2`, with `0 log 0 = 0`.
pub fn rate_function(x: f64) -> f64 {
    assert!(
        (0.0..=1.0).contains(&x),
        "rate function needs x in [0,1], got {x}"
    );
    let xlogx = |y: f64| if y == 0.0 { 0.0 } else { y * y.ln() };
    xlogx(x) + xlogx(1.0 - x) + std::f64::consts::LN_2
}

/// Unique `omega` in `[0, 1/2]` with `I(omega) = level`, by bisection.
pub fn omega_root(level: f64) -> Result<f64> {
    let ln2 = std::f64::consts::LN_2;
    if !(level > 0.0 && level <= ln2) {
        return Err(Error::Parameter(format!(
            "omega_root needs level in (0, log 2], got {level}"
        )));
    }
    // I is decreasing on [0, 1/2]
    let (mut lo, mut hi) = (0.0f64, 0.5f64);
    while hi - lo > 1e-15 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if rate_function(mid) > level {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (ilo, ihi) = (rate_function(lo), rate_function(hi));
    Ok(if (ilo - level).abs() <= (ihi - level).abs() {
        lo
    } else {
        hi
    })
}

/// Result of a minimal-distance audit; `min_distance` is `None` for fewer
/// than two points (an infinite minimum).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinDistance {
    pub min_distance: Option<u64>,
    pub pass: bool,
}

pub fn min_distance_audit(topology: &Topology, cloud: &[VertexId], bound: f64) -> MinDistance {
    let mut min: Option<u64> = None;
    for (i, &x) in cloud.iter().enumerate() {
        for &y in &cloud[i + 1..] {
            let d = topology.distance(x, y);
            min = Some(min.map_or(d, |m| m.min(d)));
        }
    }
    MinDistance {
        min_distance: min,
        pass: min.is_none_or(|m| m as f64 >= bound),
    }
}

/// Site-percolation cloud: every vertex is kept with probability `density`.
/// The count is drawn from the binomial law and the points are uniform
/// distinct vertices, which is the same law.
pub fn poisson_cloud<R: Rng + ?Sized>(
    topology: &Topology,
    density: f64,
    rng: &mut R,
) -> Vec<VertexId> {
    let n = topology.vertex_count();
    let k = Binomial::new(n, density.clamp(0.0, 1.0))
        .expect("valid binomial")
        .sample(rng);
    uniform_cloud(topology, k, rng)
}

/// `size` distinct uniformly placed vertices, sorted by label.
pub fn uniform_cloud<R: Rng + ?Sized>(
    topology: &Topology,
    size: u64,
    rng: &mut R,
) -> Vec<VertexId> {
    let n = topology.vertex_count();
    assert!(size <= n, "cloud larger than the graph");
    let mut seen = HashSet::with_capacity(size as usize);
    if size * 2 > n {
        let mut all: Vec<u64> = (0..n).collect();
        for i in 0..size as usize {
            let j = rng.gen_range(i..n as usize);
            all.swap(i, j);
        }
        seen.extend(all[..size as usize].iter().copied());
    } else {
        while (seen.len() as u64) < size {
            seen.insert(rng.gen_range(0..n));
        }
    }
    let mut out: Vec<VertexId> = seen.into_iter().map(VertexId).collect();
    out.sort_unstable();
    out
}

/// Empirical and exact `r(n) P[tau >= u g(n)]` for the REM.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RemTailPoint {
    pub u: f64,
    pub empirical: f64,
    pub exact: f64,
    pub target: f64,
}

/// Estimates `r(n) P[tau >= u g(n)]` at `u` in {1, 2, 4} from `samples`
/// lazily generated depths.
pub fn rem_tail_check(
    alpha: f64,
    beta: f64,
    dim: u32,
    samples: u64,
    seed: u64,
) -> Result<Vec<RemTailPoint>> {
    if samples < 100_000 {
        return Err(Error::Parameter(format!(
            "rem_tail_check needs at least 1e5 samples, got {samples}"
        )));
    }
    let law = DepthLaw::Rem { beta, dim };
    let spec = LandscapeSpec::new(law, seed)?;
    let sc = scales(ScaleModel::Rem { alpha, beta, dim }, 1.0)?;
    let us = [1.0, 2.0, 4.0];
    let mut counts = [0u64; 3];
    for i in 0..samples {
        let tau = spec.tau(VertexId(i));
        for (c, &u) in counts.iter_mut().zip(&us) {
            if tau >= u * sc.g {
                *c += 1;
            }
        }
    }
    Ok(us
        .iter()
        .zip(counts)
        .map(|(&u, c)| RemTailPoint {
            u,
            empirical: sc.r * c as f64 / samples as f64,
            exact: sc.r * law.tail(u * sc.g),
            target: u.powf(-alpha),
        })
        .collect())
}
