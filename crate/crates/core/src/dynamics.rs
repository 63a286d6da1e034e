//! Event-driven trap-model dynamics.
//!
//! The embedded walk `Y` is the simple random walk; the clock adds
//! `e_i τ_{Y(i)}` per step with `e_i` mean-one exponential, and
//! `X(t) = Y(j)` on `[S(j), S(j+1))`.

use std::collections::{HashMap, VecDeque};

use rand::Rng;
use rand_distr::{Distribution, Exp1, Gamma};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Topology, VertexId};
use crate::landscape::{classify, Environment, TrapClass, TrapWindow};
use crate::parallel::{map_blocks, map_env_blocks};
use crate::stats::Proportion;

/// Source of the two kinds of randomness a step consumes.
pub trait StepSource {
    /// A mean-one exponential.
    fn holding(&mut self) -> f64;
    /// A uniform neighbour of `v`.
    fn neighbor(&mut self, topology: &Topology, v: VertexId) -> VertexId;
    /// Sum of `k` mean-one exponentials.
    fn holding_sum(&mut self, k: u64) -> f64 {
        (0..k).map(|_| self.holding()).sum()
    }
}

/// Draws from a random generator.
pub struct RandomSteps<'a, R: ?Sized>(pub &'a mut R);

impl<R: Rng + ?Sized> StepSource for RandomSteps<'_, R> {
    #[inline]
    fn holding(&mut self) -> f64 {
        Exp1.sample(self.0)
    }

    #[inline]
    fn neighbor(&mut self, topology: &Topology, v: VertexId) -> VertexId {
        topology.sample_neighbor(v, self.0)
    }

    fn holding_sum(&mut self, k: u64) -> f64 {
        match k {
            0 => 0.0,
            1 => self.holding(),
            _ => Gamma::new(k as f64, 1.0)
                .expect("gamma shape")
                .sample(self.0),
        }
    }
}

/// Replays fixed holding variates and moves; panics when exhausted.
#[derive(Debug, Clone, Default)]
pub struct ScriptedSteps {
    holdings: VecDeque<f64>,
    moves: VecDeque<VertexId>,
}

impl ScriptedSteps {
    pub fn new(holdings: Vec<f64>, moves: Vec<VertexId>) -> Self {
        Self {
            holdings: holdings.into(),
            moves: moves.into(),
        }
    }
}

impl StepSource for ScriptedSteps {
    fn holding(&mut self) -> f64 {
        self.holdings
            .pop_front()
            .expect("scripted holdings exhausted")
    }

    fn neighbor(&mut self, topology: &Topology, v: VertexId) -> VertexId {
        let w = self.moves.pop_front().expect("scripted moves exhausted");
        assert_eq!(
            topology.distance(v, w),
            1,
            "scripted move {v} -> {w} is not an edge"
        );
        w
    }
}

/// Current vertex `Y(i)`, step index `i` and clock `S(i)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryState {
    pub vertex: VertexId,
    pub steps: u64,
    pub clock: f64,
}

impl TrajectoryState {
    pub fn new(start: VertexId) -> Self {
        Self {
            vertex: start,
            steps: 0,
            clock: 0.0,
        }
    }

    /// One jump: holds at the current vertex, then moves. Returns the
    /// holding time.
    #[inline]
    pub fn step<E: Environment + ?Sized, S: StepSource>(
        &mut self,
        topology: &Topology,
        env: &E,
        src: &mut S,
    ) -> Result<f64> {
        let h = src.holding() * env.tau(self.vertex);
        self.clock += h;
        if !self.clock.is_finite() {
            return Err(Error::ClockOverflow { steps: self.steps });
        }
        self.vertex = src.neighbor(topology, self.vertex);
        self.steps += 1;
        Ok(h)
    }
}

/// `S(k)` for `k = 0..=steps` from `start`.
pub fn clock_path<E: Environment + ?Sized, S: StepSource>(
    topology: &Topology,
    env: &E,
    start: VertexId,
    steps: u64,
    src: &mut S,
) -> Result<Vec<f64>> {
    let mut st = TrajectoryState::new(start);
    let mut out = Vec::with_capacity(steps as usize + 1);
    out.push(0.0);
    for _ in 0..steps {
        st.step(topology, env, src)?;
        out.push(st.clock);
    }
    Ok(out)
}

/// `X(t)`: runs until the clock first exceeds `t`.
pub fn state_at<E: Environment + ?Sized, S: StepSource>(
    topology: &Topology,
    env: &E,
    start: VertexId,
    t: f64,
    src: &mut S,
) -> Result<VertexId> {
    if !(t >= 0.0) {
        return Err(Error::Parameter(format!("state_at needs t >= 0, got {t}")));
    }
    let mut clock = 0.0;
    let mut v = start;
    let mut steps = 0u64;
    loop {
        let end = clock + src.holding() * env.tau(v);
        if !end.is_finite() {
            return Err(Error::ClockOverflow { steps });
        }
        if end > t {
            return Ok(v);
        }
        clock = end;
        v = src.neighbor(topology, v);
        steps += 1;
    }
}

/// Outcome of one trajectory observed at `t_w` and `t_w(1+θ_i)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TwoTimeObservation {
    /// `X(t_w(1+θ_i)) = X(t_w)`.
    pub same: Vec<bool>,
    /// No vertex of `A` other than the last one visited up to `t_w` is
    /// entered during `(t_w, t_w(1+θ_i)]`.
    pub fresh: Vec<bool>,
}

/// Single pass over one trajectory for all `θ` at once. `thetas` must be
/// increasing. `in_a` classifies vertices by depth; without it `fresh` is
/// all `true`. Returns `None` if `cap` jumps are exceeded.
///
/// A vertex occupied at exactly `t_w` counts as visited before `t_w`.
#[allow(clippy::too_many_arguments)]
pub fn observe_two_time<E, S, A>(
    topology: &Topology,
    env: &E,
    start: VertexId,
    t_w: f64,
    thetas: &[f64],
    in_a: Option<&A>,
    cap: u64,
    src: &mut S,
) -> Result<Option<TwoTimeObservation>>
where
    E: Environment + ?Sized,
    S: StepSource,
    A: Fn(f64) -> bool + ?Sized,
{
    let mut clock = 0.0;
    let mut v = start;
    let mut steps = 0u64;
    let mut last_a: Option<VertexId> = None;
    // up to t_w
    let mut end = loop {
        let tau = env.tau(v);
        if in_a.is_some_and(|p| p(tau)) {
            last_a = Some(v);
        }
        let end = clock + src.holding() * tau;
        if !end.is_finite() {
            return Err(Error::ClockOverflow { steps });
        }
        if end > t_w {
            break end;
        }
        if steps == cap {
            return Ok(None);
        }
        clock = end;
        v = src.neighbor(topology, v);
        steps += 1;
    };
    let x_w = v;
    let queries: Vec<f64> = thetas.iter().map(|th| t_w * (1.0 + th)).collect();
    let mut same = vec![false; queries.len()];
    let mut entry: Option<f64> = None;
    let mut idx = 0;
    loop {
        while idx < queries.len() && queries[idx] < end {
            same[idx] = v == x_w;
            idx += 1;
        }
        if idx == queries.len() {
            break;
        }
        if steps == cap {
            return Ok(None);
        }
        clock = end;
        v = src.neighbor(topology, v);
        steps += 1;
        let tau = env.tau(v);
        if entry.is_none() && in_a.is_some_and(|p| p(tau)) && Some(v) != last_a {
            entry = Some(clock);
        }
        end = clock + src.holding() * tau;
        if !end.is_finite() {
            return Err(Error::ClockOverflow { steps });
        }
    }
    let fresh = queries
        .iter()
        .map(|&q| entry.is_none_or(|t| t > q))
        .collect();
    Ok(Some(TwoTimeObservation { same, fresh }))
}

/// Monte Carlo estimate of a two-time probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoTimeEstimate {
    pub t_w: f64,
    pub theta: f64,
    pub reps: u64,
    pub hits: u64,
    pub estimate: f64,
    pub stderr: f64,
}

impl TwoTimeEstimate {
    pub fn from_proportion(t_w: f64, theta: f64, p: Proportion) -> Self {
        Self {
            t_w,
            theta,
            reps: p.reps,
            hits: p.hits,
            estimate: p.estimate(),
            stderr: p.stderr(),
        }
    }
}

/// Layout of a quenched two-time experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoTimePlan {
    pub t_w: f64,
    pub thetas: Vec<f64>,
    pub environments: u64,
    pub trajectories: u64,
    pub key: u64,
    pub start: VertexId,
    /// Jump cap per trajectory; trajectories hitting it are dropped and
    /// counted in `timeouts`.
    pub cap: u64,
}

/// Per-environment and pooled estimates of `R` and `R_A`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgingEstimate {
    pub pooled: Vec<TwoTimeEstimate>,
    pub pooled_fresh: Vec<TwoTimeEstimate>,
    /// `per_env[e][i]` is environment `e` at `thetas[i]`.
    pub per_env: Vec<Vec<Proportion>>,
    pub per_env_fresh: Vec<Vec<Proportion>>,
    pub timeouts: u64,
}

#[derive(Clone)]
struct Tally {
    same: Vec<u64>,
    fresh: Vec<u64>,
    reps: u64,
    timeouts: u64,
}

impl Tally {
    fn new(k: usize) -> Self {
        Self {
            same: vec![0; k],
            fresh: vec![0; k],
            reps: 0,
            timeouts: 0,
        }
    }

    fn merge(mut self, o: &Tally) -> Self {
        for (a, b) in self.same.iter_mut().zip(&o.same) {
            *a += b;
        }
        for (a, b) in self.fresh.iter_mut().zip(&o.fresh) {
            *a += b;
        }
        self.reps += o.reps;
        self.timeouts += o.timeouts;
        self
    }
}

/// Estimates `R(t_w, t_w(1+θ))` and `R_A` over `environments` independent
/// environments (`make_env(e)`) with `trajectories` walks each.
pub fn estimate_two_time<E, F, A>(
    topology: &Topology,
    make_env: F,
    plan: &TwoTimePlan,
    in_a: Option<&A>,
) -> Result<AgingEstimate>
where
    E: Environment,
    F: Fn(u64) -> E + Sync,
    A: Fn(f64) -> bool + Sync + ?Sized,
{
    if !(plan.t_w > 0.0) || plan.thetas.is_empty() || plan.thetas.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Parameter(
            "two-time plan needs t_w > 0 and increasing thetas".into(),
        ));
    }
    if plan.thetas[0] <= 0.0 || plan.environments == 0 || plan.trajectories == 0 {
        return Err(Error::Parameter(
            "two-time plan needs θ > 0 and at least one replica".into(),
        ));
    }
    let k = plan.thetas.len();
    let blocks = map_env_blocks(
        plan.key,
        plan.environments,
        plan.trajectories,
        |e, rng, range| {
            let env = make_env(e);
            let mut tally = Tally::new(k);
            let mut src = RandomSteps(rng);
            for _ in range {
                match observe_two_time(
                    topology,
                    &env,
                    plan.start,
                    plan.t_w,
                    &plan.thetas,
                    in_a,
                    plan.cap,
                    &mut src,
                )? {
                    Some(obs) => {
                        tally.reps += 1;
                        for i in 0..k {
                            tally.same[i] += obs.same[i] as u64;
                            tally.fresh[i] += obs.fresh[i] as u64;
                        }
                    }
                    None => tally.timeouts += 1,
                }
            }
            Ok::<_, Error>(tally)
        },
    );
    let mut per_env = Vec::new();
    let mut per_env_fresh = Vec::new();
    let mut pooled = Tally::new(k);
    for env_blocks in blocks {
        let mut t = Tally::new(k);
        for b in env_blocks {
            t = t.merge(&b?);
        }
        per_env.push(t.same.iter().map(|&h| Proportion::new(h, t.reps)).collect());
        per_env_fresh.push(
            t.fresh
                .iter()
                .map(|&h| Proportion::new(h, t.reps))
                .collect(),
        );
        pooled = pooled.merge(&t);
    }
    let est = |hits: &[u64]| -> Vec<TwoTimeEstimate> {
        plan.thetas
            .iter()
            .zip(hits)
            .map(|(&th, &h)| {
                TwoTimeEstimate::from_proportion(plan.t_w, th, Proportion::new(h, pooled.reps))
            })
            .collect()
    };
    Ok(AgingEstimate {
        pooled: est(&pooled.same),
        pooled_fresh: est(&pooled.fresh),
        per_env,
        per_env_fresh,
        timeouts: pooled.timeouts,
    })
}

/// One visit block of the deep-trap record.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeepEntry {
    /// Step index `r_j`.
    pub r: u64,
    /// Vertex `U_j`.
    pub u: VertexId,
    pub tau: f64,
    /// Time spent at `U_j` between steps `r_j` and `r_{j+1}`.
    pub s: f64,
    /// `S(r_j)`; NaN when holding times are aggregated.
    pub clock: f64,
}

/// Deep-trap record over `ξ` steps, plus the side statistics needed by the
/// diagnostics.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DeepTrapRecord {
    /// `entries[0]` is the convention `r_0 = 0`, `U_0 = Y(0)`.
    pub entries: Vec<DeepEntry>,
    /// Largest `j` with `r_j <= ξ`.
    pub zeta: u64,
    pub total_clock: f64,
    pub shallow_time: f64,
    /// First step at a very deep trap, if any.
    pub very_deep_step: Option<u64>,
    /// `X(probe)` if a probe time was requested and reached.
    pub probe: Option<VertexId>,
    /// Visit counts per vertex label, if requested.
    pub visits: Option<HashMap<u64, u32>>,
}

impl DeepTrapRecord {
    /// `Σ_{i=1}^{ζ-1} s_i`.
    pub fn completed_deep_time(&self) -> f64 {
        let z = self.zeta as usize;
        if z < 2 {
            return 0.0;
        }
        self.entries[1..z].iter().map(|e| e.s).sum()
    }

    /// Whether `U_i = U_j` for some `0 < i < j <= ζ`.
    pub fn has_repetition(&self) -> bool {
        let mut seen = std::collections::HashSet::new();
        self.entries[1..].iter().any(|e| !seen.insert(e.u))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct DeepWalkOptions {
    /// Draw one Gamma variate per visit block instead of one exponential per
    /// visit to `U_j`. Distributionally exact; clock positions are lost.
    pub aggregate: bool,
    pub count_visits: bool,
    pub probe: Option<f64>,
}

/// Runs `Y` for `xi` steps (holding times at `Y(0..=ξ)`) and extracts the
/// deep-trap record for the window `[εg, Mg)`.
#[allow(clippy::too_many_arguments)]
pub fn record_deep<E: Environment + ?Sized, S: StepSource>(
    topology: &Topology,
    env: &E,
    start: VertexId,
    window: &TrapWindow,
    g: f64,
    xi: u64,
    opts: DeepWalkOptions,
    src: &mut S,
) -> Result<DeepTrapRecord> {
    let mut rec = DeepTrapRecord::default();
    if opts.count_visits {
        rec.visits = Some(HashMap::new());
    }
    let mut clock = 0.0f64;
    let mut v = start;
    let mut pending = 0u64;
    let close = |rec: &mut DeepTrapRecord, pending: &mut u64, clock: &mut f64, src: &mut S| {
        if let Some(last) = rec.entries.last_mut() {
            let h = src.holding_sum(*pending) * last.tau;
            last.s += h;
            *clock += h;
        }
        *pending = 0;
    };
    for i in 0..=xi {
        if i > 0 {
            v = src.neighbor(topology, v);
        }
        let tau = env.tau(v);
        let class = classify(tau, window, g);
        if let Some(map) = rec.visits.as_mut() {
            *map.entry(v.0).or_insert(0) += 1;
        }
        if class == TrapClass::VeryDeep && rec.very_deep_step.is_none() {
            rec.very_deep_step = Some(i);
        }
        let new_block =
            i == 0 || (class == TrapClass::Deep && rec.entries.last().map(|e| e.u) != Some(v));
        if new_block {
            if opts.aggregate {
                close(&mut rec, &mut pending, &mut clock, src);
            }
            let c = if opts.aggregate { f64::NAN } else { clock };
            rec.entries.push(DeepEntry {
                r: i,
                u: v,
                tau,
                s: 0.0,
                clock: c,
            });
        }
        let at_u = rec.entries.last().map(|e| e.u) == Some(v);
        if opts.aggregate && at_u {
            pending += 1;
        } else {
            let h = src.holding() * tau;
            if let Some(p) = opts.probe {
                if rec.probe.is_none() && clock <= p && p < clock + h {
                    rec.probe = Some(v);
                }
            }
            clock += h;
            if at_u {
                rec.entries.last_mut().unwrap().s += h;
            }
            if class == TrapClass::Shallow {
                rec.shallow_time += h;
            }
        }
        if !clock.is_finite() {
            return Err(Error::ClockOverflow { steps: i });
        }
    }
    if opts.aggregate {
        let shallow_u = rec
            .entries
            .last()
            .is_some_and(|e| classify(e.tau, window, g) == TrapClass::Shallow);
        let before = clock;
        close(&mut rec, &mut pending, &mut clock, src);
        if shallow_u {
            rec.shallow_time += clock - before;
        }
    }
    // U_0 = Y(0) may be shallow; its aggregated time was counted above only
    // for the final block, so account for earlier closes here.
    if opts.aggregate
        && rec.entries.len() > 1
        && classify(rec.entries[0].tau, window, g) == TrapClass::Shallow
    {
        rec.shallow_time += rec.entries[0].s;
    }
    rec.zeta = rec.entries.len() as u64 - 1;
    rec.total_clock = clock;
    Ok(rec)
}

/// First entrance time of the walk into a set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum HitOutcome {
    Hit(u64),
    Timeout(u64),
}

/// `H(A) = inf{i >= 0 : Y(i) ∈ A}` capped at `cap` steps.
pub fn hitting_time<R: Rng + ?Sized, F: Fn(VertexId) -> bool>(
    topology: &Topology,
    in_set: F,
    start: VertexId,
    cap: u64,
    rng: &mut R,
) -> HitOutcome {
    let mut v = start;
    for i in 0..=cap {
        if in_set(v) {
            return HitOutcome::Hit(i);
        }
        if i < cap {
            v = topology.sample_neighbor(v, rng);
        }
    }
    HitOutcome::Timeout(cap)
}

/// Escape-probability and visit-count estimates of `G_{A\{x}}(x, x)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GreenEstimate {
    /// `P_x[H(A\{x}) < H'(x)]`.
    pub escape: Proportion,
    /// `1/escape`; infinite (and `degenerate`) if no escape was seen.
    pub green: f64,
    pub degenerate: bool,
    /// Mean visits to `x` before `H(A\{x})`, if requested.
    pub visits_mean: Option<f64>,
    pub visits_stderr: Option<f64>,
    pub timeouts: u64,
}

/// Monte Carlo Green function at `x ∈ A` for the embedded walk.
pub fn empirical_green<F: Fn(VertexId) -> bool + Sync>(
    topology: &Topology,
    in_a: F,
    x: VertexId,
    reps: u64,
    cap: u64,
    count_visits: bool,
    key: u64,
) -> Result<GreenEstimate> {
    if !in_a(x) {
        return Err(Error::Parameter(format!(
            "empirical_green needs x in A, got {x}"
        )));
    }
    let blocks = map_blocks(key, reps, |rng, range| {
        let (mut esc, mut n, mut to) = (0u64, 0u64, 0u64);
        let mut visits = crate::stats::Moments::new();
        for _ in range {
            let mut v = x;
            let mut count = 1u64;
            let mut first: Option<bool> = None;
            let mut steps = 0u64;
            let done = loop {
                if steps == cap {
                    break false;
                }
                v = topology.sample_neighbor(v, rng);
                steps += 1;
                if v == x {
                    count += 1;
                    first.get_or_insert(false);
                    if !count_visits {
                        break true;
                    }
                } else if in_a(v) {
                    first.get_or_insert(true);
                    break true;
                }
            };
            match first {
                Some(e) => {
                    n += 1;
                    esc += e as u64;
                }
                None => to += 1,
            }
            if count_visits && done {
                visits.push(count as f64);
            }
        }
        (esc, n, to, visits)
    });
    let (mut esc, mut n, mut to) = (0, 0, 0);
    let mut vm: Vec<crate::stats::Moments> = Vec::new();
    for (e, k, t, m) in blocks {
        esc += e;
        n += k;
        to += t;
        vm.push(m);
    }
    let escape = Proportion::new(esc, n);
    let degenerate = esc == 0;
    let (visits_mean, visits_stderr) = if count_visits {
        let all = crate::stats::Moments::merge_all(&vm);
        (Some(all.mean()), Some(all.stderr()))
    } else {
        (None, None)
    };
    Ok(GreenEstimate {
        escape,
        green: if degenerate {
            f64::INFINITY
        } else {
            1.0 / escape.estimate()
        },
        degenerate,
        visits_mean,
        visits_stderr,
        timeouts: to,
    })
}

/// Inputs of the condition diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsPlan {
    pub window: TrapWindow,
    /// Depth scale `g`.
    pub g: f64,
    /// Time scale `t`.
    pub t: f64,
    /// Walk horizon `ξ` in steps.
    pub xi: u64,
    /// `m r`, the normalisation of the Condition (D) statistic.
    pub mr: f64,
    pub theta: f64,
    /// `λ_n` of Condition (D).
    pub lambda_d: f64,
    pub environments: u64,
    pub trajectories: u64,
    /// Trajectories per environment used for the visit-count statistic.
    pub visit_trajectories: u64,
    pub deltas: Vec<f64>,
    pub key: u64,
    pub start: VertexId,
    /// Gamma-aggregated holding times; the Condition 5 report is then empty.
    pub aggregate: bool,
}

/// Empirical proxies of the sufficient conditions for aging.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    /// (a) mean time in shallow traps before `ξ`, divided by `t`.
    pub shallow_fraction: f64,
    pub shallow_fraction_stderr: f64,
    /// (b) probability of hitting a very deep trap before `ξ`.
    pub very_deep_hit: Proportion,
    /// (c) probability that `Σ_{1<=i<ζ} s_i >= (1+θ) t`.
    pub deep_time_covers: Proportion,
    /// (d) probability of a repeated deep trap in `U_1..U_ζ`.
    pub repetition: Proportion,
    /// (e) `Σ_x (e^{λ Ĝ(x)} - 1) / (λ m r)` per environment.
    pub condition_d: Vec<f64>,
    /// `P[X(t) = U(j_n) | A_n(δ)]` for each `δ`, with the conditioning count.
    pub post: Vec<(f64, Proportion)>,
    pub mean_zeta: f64,
}

struct DiagTally {
    shallow: crate::stats::Moments,
    very_deep: u64,
    covers: u64,
    repeats: u64,
    reps: u64,
    zeta: u64,
    post: Vec<(u64, u64)>,
    visits: HashMap<u64, u64>,
    visit_reps: u64,
}

/// Runs the deep-trap walk on every replica and evaluates the condition
/// proxies (a)–(e) and the Condition 5 report.
pub fn condition_diagnostics<E, F>(
    topology: &Topology,
    make_env: F,
    plan: &DiagnosticsPlan,
) -> Result<DiagnosticsReport>
where
    E: Environment,
    F: Fn(u64) -> E + Sync,
{
    let nd = plan.deltas.len();
    let blocks = map_env_blocks(
        plan.key,
        plan.environments,
        plan.trajectories,
        |e, rng, range| {
            let env = make_env(e);
            let mut t = DiagTally {
                shallow: crate::stats::Moments::new(),
                very_deep: 0,
                covers: 0,
                repeats: 0,
                reps: 0,
                zeta: 0,
                post: vec![(0, 0); nd],
                visits: HashMap::new(),
                visit_reps: 0,
            };
            let mut src = RandomSteps(rng);
            for rep in range {
                let count_visits = rep < plan.visit_trajectories;
                let opts = DeepWalkOptions {
                    aggregate: plan.aggregate,
                    count_visits,
                    probe: Some(plan.t),
                };
                let rec = record_deep(
                    topology,
                    &env,
                    plan.start,
                    &plan.window,
                    plan.g,
                    plan.xi,
                    opts,
                    &mut src,
                )?;
                t.reps += 1;
                t.shallow.push(rec.shallow_time / plan.t);
                t.very_deep += rec.very_deep_step.is_some() as u64;
                t.covers += (rec.completed_deep_time() >= (1.0 + plan.theta) * plan.t) as u64;
                t.repeats += rec.has_repetition() as u64;
                t.zeta += rec.zeta;
                for (k, &delta) in plan.deltas.iter().enumerate() {
                    if let Some(j) = post_index(&rec, plan.t, delta * plan.t) {
                        t.post[k].1 += 1;
                        t.post[k].0 += (rec.probe == Some(rec.entries[j].u)) as u64;
                    }
                }
                if let Some(map) = rec.visits {
                    t.visit_reps += 1;
                    for (x, c) in map {
                        *t.visits.entry(x).or_insert(0) += c as u64;
                    }
                }
            }
            Ok::<_, Error>(t)
        },
    );
    let mut shallow = Vec::new();
    let (mut vd, mut cov, mut rep, mut reps, mut zeta) = (0, 0, 0, 0, 0);
    let mut post = vec![(0u64, 0u64); nd];
    let mut condition_d = Vec::new();
    for env_blocks in blocks {
        let mut visits: HashMap<u64, u64> = HashMap::new();
        let mut visit_reps = 0;
        for b in env_blocks {
            let b = b?;
            shallow.push(b.shallow);
            vd += b.very_deep;
            cov += b.covers;
            rep += b.repeats;
            reps += b.reps;
            zeta += b.zeta;
            for (k, p) in b.post.iter().enumerate() {
                post[k].0 += p.0;
                post[k].1 += p.1;
            }
            visit_reps += b.visit_reps;
            for (x, c) in b.visits {
                *visits.entry(x).or_insert(0) += c;
            }
        }
        if visit_reps > 0 {
            // sum in label order so the result does not depend on hashing
            let mut keys: Vec<_> = visits.into_iter().collect();
            keys.sort_unstable();
            let s: f64 = keys
                .iter()
                .map(|&(_, c)| (plan.lambda_d * c as f64 / visit_reps as f64).exp_m1())
                .sum();
            condition_d.push(s / (plan.lambda_d * plan.mr));
        }
    }
    let sh = crate::stats::Moments::merge_all(&shallow);
    Ok(DiagnosticsReport {
        shallow_fraction: sh.mean(),
        shallow_fraction_stderr: sh.stderr(),
        very_deep_hit: Proportion::new(vd, reps),
        deep_time_covers: Proportion::new(cov, reps),
        repetition: Proportion::new(rep, reps),
        condition_d,
        post: plan
            .deltas
            .iter()
            .zip(post)
            .map(|(&d, (h, n))| (d, Proportion::new(h, n)))
            .collect(),
        mean_zeta: zeta as f64 / reps.max(1) as f64,
    })
}

/// `j_n` with `S(r_j) <= t' <= S(r_{j+1}) - δt` and `0 < j_n < ζ`.
fn post_index(rec: &DeepTrapRecord, t_prime: f64, slack: f64) -> Option<usize> {
    let z = rec.zeta as usize;
    let j = rec.entries.iter().rposition(|e| e.clock <= t_prime)?;
    if j == 0 || j >= z {
        return None;
    }
    (t_prime <= rec.entries[j + 1].clock - slack).then_some(j)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dense::DenseOracle;
    use crate::landscape::{
        scales, ConstantEnvironment, DepthLaw, LandscapeSpec, ScaleModel, ScaleSet,
        ScaledEnvironment, TableEnvironment,
    };
    use crate::rng::replica_rng;
    use crate::stats::{ks_distance, Moments};

    #[test]
    fn unit_depths_mean_clock() {
        let top = Topology::hypercube(10).unwrap();
        let m: Moments = (0..10_000u64)
            .map(|i| {
                let mut rng = replica_rng(1, i);
                let path = clock_path(
                    &top,
                    &ConstantEnvironment(1.0),
                    VertexId::ORIGIN,
                    1000,
                    &mut RandomSteps(&mut rng),
                )
                .unwrap();
                path[1000]
            })
            .collect();
        assert!(
            (m.mean() - 1000.0).abs() < 3.0 * m.stderr(),
            "{} ± {}",
            m.mean(),
            m.stderr()
        );
    }

    #[test]
    fn single_step_is_exponential() {
        let top = Topology::complete(10).unwrap();
        let env = ConstantEnvironment(5.0);
        let mut rng = replica_rng(2, 0);
        let xs: Vec<f64> = (0..100_000)
            .map(|_| {
                let mut st = TrajectoryState::new(VertexId::ORIGIN);
                st.step(&top, &env, &mut RandomSteps(&mut rng)).unwrap()
            })
            .collect();
        let d = ks_distance(&xs, |x| 1.0 - (-x / 5.0).exp());
        // 1.63/sqrt(n) is the 1% critical value
        assert!(d < 1.63 / (1e5f64).sqrt(), "KS {d}");
    }

    #[test]
    fn clock_strictly_increasing() {
        let top = Topology::torus2d(4).unwrap();
        let env = LandscapeSpec::new(DepthLaw::Pareto { alpha: 0.5 }, 3).unwrap();
        let mut rng = replica_rng(3, 0);
        let p = clock_path(
            &top,
            &env,
            VertexId::ORIGIN,
            5000,
            &mut RandomSteps(&mut rng),
        )
        .unwrap();
        assert!(p.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn clock_overflow_guard() {
        let top = Topology::complete(3).unwrap();
        let env = ConstantEnvironment(f64::MAX);
        let mut rng = replica_rng(4, 0);
        let mut st = TrajectoryState::new(VertexId::ORIGIN);
        let mut src = RandomSteps(&mut rng);
        let r = (0..10).try_for_each(|_| st.step(&top, &env, &mut src).map(|_| ()));
        assert!(matches!(r, Err(Error::ClockOverflow { .. })));
    }

    #[test]
    fn clock_scales_exactly_with_depths() {
        let top = Topology::hypercube(12).unwrap();
        let env = LandscapeSpec::new(DepthLaw::Pareto { alpha: 0.7 }, 5).unwrap();
        let scaled = ScaledEnvironment {
            inner: env,
            factor: 8.0,
        };
        let a = clock_path(
            &top,
            &env,
            VertexId::ORIGIN,
            2000,
            &mut RandomSteps(&mut replica_rng(6, 0)),
        )
        .unwrap();
        let b = clock_path(
            &top,
            &scaled,
            VertexId::ORIGIN,
            2000,
            &mut RandomSteps(&mut replica_rng(6, 0)),
        )
        .unwrap();
        assert!(a
            .iter()
            .zip(&b)
            .all(|(x, y)| (8.0 * x).to_bits() == y.to_bits()));
        // hence two-time observations coincide under (τ, t_w) -> (cτ, c t_w)
        for rep in 0..200 {
            let o1 = observe_two_time(
                &top,
                &env,
                VertexId::ORIGIN,
                50.0,
                &[0.5, 1.0],
                None::<&fn(f64) -> bool>,
                u64::MAX,
                &mut RandomSteps(&mut replica_rng(7, rep)),
            )
            .unwrap();
            let o2 = observe_two_time(
                &top,
                &scaled,
                VertexId::ORIGIN,
                400.0,
                &[0.5, 1.0],
                None::<&fn(f64) -> bool>,
                u64::MAX,
                &mut RandomSteps(&mut replica_rng(7, rep)),
            )
            .unwrap();
            assert_eq!(o1, o2);
        }
    }

    #[test]
    fn state_at_fixtures() {
        let top = Topology::complete(4).unwrap();
        let env = TableEnvironment(vec![1.0, 2.0, 3.0, 4.0]);
        // holdings 0.5, 1.0, 0.25 → S = 0, 0.5, 2.5, 3.25
        let moves = vec![VertexId(1), VertexId(2), VertexId(3)];
        let holdings = vec![0.5, 1.0, 0.25, 10.0];
        let expect = [
            (0.0, 0),
            (0.1, 0),
            (0.49, 0),
            (0.5, 1),
            (1.0, 1),
            (2.4, 1),
            (2.5, 2),
            (3.0, 2),
            (3.25, 3),
            (9.0, 3),
        ];
        for &(t, v) in &expect {
            let mut src = ScriptedSteps::new(holdings.clone(), moves.clone());
            assert_eq!(
                state_at(&top, &env, VertexId(0), t, &mut src).unwrap(),
                VertexId(v),
                "t={t}"
            );
        }
        assert!(state_at(&top, &env, VertexId(0), -1.0, &mut ScriptedSteps::default()).is_err());
    }

    #[test]
    fn two_state_chain() {
        let top = Topology::complete(2).unwrap();
        let env = ConstantEnvironment(1.0);
        let n = 100_000u64;
        let hits: u64 = (0..n)
            .map(|i| {
                let mut rng = replica_rng(8, i);
                (state_at(
                    &top,
                    &env,
                    VertexId::ORIGIN,
                    1.0,
                    &mut RandomSteps(&mut rng),
                )
                .unwrap()
                    == VertexId::ORIGIN) as u64
            })
            .sum();
        let p = Proportion::new(hits, n);
        let exact = (1.0 + (-2.0f64).exp()) / 2.0;
        assert!((p.estimate() - exact).abs() < 3.0 * p.stderr());
    }

    #[test]
    fn two_state_unequal_depths_against_matrix_exponential() {
        let top = Topology::complete(2).unwrap();
        let env = TableEnvironment(vec![1.5, 0.4]);
        let mut oracle = DenseOracle::new(&top, &env).unwrap();
        for (k, &t) in [0.3, 1.0, 3.0].iter().enumerate() {
            let exact = oracle.kernel(t)[(0, 0)];
            let n = 50_000u64;
            let hits: u64 = (0..n)
                .map(|i| {
                    let mut rng = replica_rng(9 + k as u64, i);
                    (state_at(&top, &env, VertexId::ORIGIN, t, &mut RandomSteps(&mut rng)).unwrap()
                        == VertexId::ORIGIN) as u64
                })
                .sum();
            let p = Proportion::new(hits, n);
            assert!(
                (p.estimate() - exact).abs() < 3.0 * p.stderr(),
                "t={t}: {} vs {exact}",
                p.estimate()
            );
        }
    }

    #[test]
    fn two_time_matches_dense_oracle() {
        let top = Topology::torus2d(2).unwrap();
        let env = TableEnvironment((0..16).map(|i| 0.5 + ((i * 7) % 5) as f64).collect());
        let mut oracle = DenseOracle::new(&top, &env).unwrap();
        let plan = TwoTimePlan {
            t_w: 3.0,
            thetas: vec![0.5, 2.0],
            environments: 1,
            trajectories: 40_000,
            key: 10,
            start: VertexId(5),
            cap: u64::MAX,
        };
        let est = estimate_two_time(
            &top,
            |_| env.clone(),
            &plan,
            None::<&(dyn Fn(f64) -> bool + Sync)>,
        )
        .unwrap();
        for e in &est.pooled {
            let exact = oracle.two_time(VertexId(5), 3.0, 3.0 * e.theta);
            assert!(
                (e.estimate - exact).abs() < 3.0 * e.stderr,
                "θ={}: {} vs {exact}",
                e.theta,
                e.estimate
            );
        }
        assert!(est.pooled_fresh.iter().all(|e| e.estimate == 1.0));
    }

    #[test]
    fn two_time_small_theta_tends_to_one() {
        let top = Topology::hypercube(8).unwrap();
        let plan = TwoTimePlan {
            t_w: 10.0,
            thetas: vec![1e-9, 1e-6],
            environments: 2,
            trajectories: 2000,
            key: 11,
            start: VertexId::ORIGIN,
            cap: u64::MAX,
        };
        let est = estimate_two_time(
            &top,
            |_| ConstantEnvironment(1.0),
            &plan,
            None::<&(dyn Fn(f64) -> bool + Sync)>,
        )
        .unwrap();
        assert!(est.pooled[0].estimate > 0.999);
        assert_eq!(est.per_env.len(), 2);
    }

    #[test]
    fn fresh_site_fixture() {
        // path 0 -> 1 -> 2 -> 1 on complete(3) with τ = (1, 10, 10); A = {τ >= 5}
        let top = Topology::complete(3).unwrap();
        let env = TableEnvironment(vec![1.0, 10.0, 10.0]);
        let deep = |tau: f64| tau >= 5.0;
        // holdings: at 0: 1.0 → S(1)=1; at 1: 0.2 → S(2)=3; at 2: 0.1 → S(3)=4; at 1: 1.0 → S(4)=14
        let run = |t_w: f64, thetas: &[f64]| {
            let mut src = ScriptedSteps::new(
                vec![1.0, 0.2, 0.1, 1.0, 1.0, 1.0],
                vec![
                    VertexId(1),
                    VertexId(2),
                    VertexId(1),
                    VertexId(0),
                    VertexId(1),
                ],
            );
            observe_two_time(
                &top,
                &env,
                VertexId(0),
                t_w,
                thetas,
                Some(&deep),
                100,
                &mut src,
            )
            .unwrap()
            .unwrap()
        };
        // t_w = 2 (at vertex 1): vertex 2 entered at 3
        let o = run(2.0, &[0.4, 0.5, 0.6]);
        assert_eq!(o.same, vec![true, false, false]);
        assert_eq!(o.fresh, vec![true, false, false]);
        // t_w = 3 exactly: vertex 2 is occupied at t_w, counts as visited; the
        // return to 1 at 4 is a new A-vertex
        let o = run(3.0, &[0.2, 1.0 / 3.0, 0.5]);
        assert_eq!(o.fresh, vec![true, false, false]);
        assert_eq!(o.same, vec![true, false, false]);
    }

    #[test]
    fn fresh_estimator_with_empty_set_is_one() {
        let top = Topology::hypercube(6).unwrap();
        let plan = TwoTimePlan {
            t_w: 5.0,
            thetas: vec![1.0],
            environments: 1,
            trajectories: 500,
            key: 12,
            start: VertexId::ORIGIN,
            cap: u64::MAX,
        };
        let never = |_: f64| false;
        let est =
            estimate_two_time(&top, |_| ConstantEnvironment(1.0), &plan, Some(&never)).unwrap();
        assert_eq!(est.pooled_fresh[0].estimate, 1.0);
    }

    #[test]
    fn record_deep_hand_fixture() {
        // complete(4), g = 1, window [0.5, 4): τ = (0.1, 1, 2, 10)
        // path 0 1 2 1 1? no self loops: 0 1 0 1 2 3 with holdings 1..6
        let top = Topology::complete(4).unwrap();
        let env = TableEnvironment(vec![0.1, 1.0, 2.0, 10.0]);
        let w = TrapWindow::new(0.5, 4.0).unwrap();
        let mut src = ScriptedSteps::new(
            vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0],
            vec![
                VertexId(1),
                VertexId(0),
                VertexId(1),
                VertexId(2),
                VertexId(3),
            ],
        );
        let rec = record_deep(
            &top,
            &env,
            VertexId(0),
            &w,
            1.0,
            5,
            DeepWalkOptions::default(),
            &mut src,
        )
        .unwrap();
        // r = 0 (U=0), 1 (U=1), 4 (U=2); vertex 3 is very deep
        assert_eq!(
            rec.entries.iter().map(|e| e.r).collect::<Vec<_>>(),
            vec![0, 1, 4]
        );
        // s_0 = 1.0·0.1 + 3.0·0.1 (second visit to 0 before r_1? no: r_1 = 1)
        assert!((rec.entries[0].s - 0.1).abs() < 1e-15);
        // s_1 = 2.0·1 + 4.0·1 (visits at steps 1 and 3)
        assert!((rec.entries[1].s - 6.0).abs() < 1e-15);
        assert!((rec.entries[2].s - 10.0).abs() < 1e-15);
        assert_eq!(rec.zeta, 2);
        assert_eq!(rec.very_deep_step, Some(5));
        let total = 0.1 + 2.0 + 0.3 + 4.0 + 10.0 + 60.0;
        assert!((rec.total_clock - total).abs() < 1e-12);
        assert!((rec.shallow_time - 0.4).abs() < 1e-15);
        assert!((rec.completed_deep_time() - 6.0).abs() < 1e-15);
        assert!(!rec.has_repetition());
    }

    #[test]
    fn record_deep_empty_window() {
        let top = Topology::hypercube(10).unwrap();
        let w = TrapWindow::new(0.5, 2.0).unwrap();
        let mut rng = replica_rng(13, 0);
        let rec = record_deep(
            &top,
            &ConstantEnvironment(1.0),
            VertexId::ORIGIN,
            &w,
            10.0,
            1000,
            Default::default(),
            &mut RandomSteps(&mut rng),
        )
        .unwrap();
        assert_eq!(rec.zeta, 0);
        assert_eq!(rec.completed_deep_time(), 0.0);
    }

    #[test]
    fn record_deep_invariants() {
        let top = Topology::torus2d(5).unwrap();
        let env = LandscapeSpec::new(DepthLaw::Pareto { alpha: 0.5 }, 14).unwrap();
        let w = TrapWindow::new(0.2, 5.0).unwrap();
        for rep in 0..50 {
            let mut rng = replica_rng(14, rep);
            let rec = record_deep(
                &top,
                &env,
                VertexId::ORIGIN,
                &w,
                50.0,
                5000,
                Default::default(),
                &mut RandomSteps(&mut rng),
            )
            .unwrap();
            let s: f64 = rec.entries.iter().map(|e| e.s).sum();
            assert!(s <= rec.total_clock * (1.0 + 1e-12));
            assert!(rec
                .entries
                .windows(2)
                .all(|p| p[1].r > p[0].r && p[1].u != p[0].u));
            assert!(rec.entries[1..]
                .iter()
                .all(|e| classify(e.tau, &w, 50.0) == TrapClass::Deep));
        }
    }

    #[test]
    fn aggregation_preserves_law() {
        // A/B: mean block time with and without Gamma aggregation
        let top = Topology::complete(20).unwrap();
        let env = TableEnvironment(
            (0..20)
                .map(|i| if i % 4 == 0 { 8.0 } else { 1.0 })
                .collect(),
        );
        let w = TrapWindow::new(0.5, 2.0).unwrap();
        let run = |aggregate: bool, key: u64| -> Moments {
            (0..4000u64)
                .flat_map(|rep| {
                    let mut rng = replica_rng(key, rep);
                    let opts = DeepWalkOptions {
                        aggregate,
                        ..Default::default()
                    };
                    let rec = record_deep(
                        &top,
                        &env,
                        VertexId(1),
                        &w,
                        8.0,
                        200,
                        opts,
                        &mut RandomSteps(&mut rng),
                    )
                    .unwrap();
                    let z = rec.zeta as usize;
                    rec.entries[1..z].iter().map(|e| e.s).collect::<Vec<_>>()
                })
                .collect()
        };
        let a = run(false, 15);
        let b = run(true, 16);
        let se = (a.stderr().powi(2) + b.stderr().powi(2)).sqrt();
        assert!(
            (a.mean() - b.mean()).abs() < 4.0 * se,
            "{} vs {}",
            a.mean(),
            b.mean()
        );
        // mean is τ_U G_{T\U}(U,U), with G exact from the dense oracle
        let o = DenseOracle::new(&top, &env).unwrap();
        let others: Vec<VertexId> = (0..20)
            .filter(|i| i % 4 == 0 && *i != 4)
            .map(VertexId)
            .collect();
        let g = o.green_killed(&others).unwrap()[(4, 4)];
        assert!(
            (a.mean() / (8.0 * g) - 1.0).abs() < 0.03,
            "{} vs {}",
            a.mean(),
            8.0 * g
        );
    }

    #[test]
    fn hitting_time_cases() {
        let top = Topology::complete(50).unwrap();
        let mut rng = replica_rng(17, 0);
        assert_eq!(
            hitting_time(&top, |v| v.0 == 0, VertexId(0), 10, &mut rng),
            HitOutcome::Hit(0)
        );
        assert_eq!(
            hitting_time(&top, |_| false, VertexId(0), 10, &mut rng),
            HitOutcome::Timeout(10)
        );
        // A = {0..5} from 10: per-step probability 5/49
        let m: Moments = (0..50_000)
            .map(
                |_| match hitting_time(&top, |v| v.0 < 5, VertexId(10), u64::MAX, &mut rng) {
                    HitOutcome::Hit(k) => k as f64,
                    HitOutcome::Timeout(_) => unreachable!(),
                },
            )
            .collect();
        assert!((m.mean() - 49.0 / 5.0).abs() < 3.0 * m.stderr());
    }

    #[test]
    fn green_on_complete_graph_is_one() {
        let top = Topology::complete(30).unwrap();
        let g = empirical_green(&top, |_| true, VertexId(3), 1000, 1000, true, 18).unwrap();
        assert_eq!(g.green, 1.0);
        assert_eq!(g.visits_mean, Some(1.0));
        assert!(!g.degenerate);
    }

    #[test]
    fn green_matches_dense_oracle() {
        let top = Topology::torus2d(3).unwrap();
        let a = [VertexId(0), top.torus_vertex(4, 4), top.torus_vertex(2, 6)];
        let in_a = |v: VertexId| a.contains(&v);
        let est = empirical_green(&top, in_a, a[0], 40_000, u64::MAX, true, 19).unwrap();
        let o = DenseOracle::new(&top, &ConstantEnvironment(1.0)).unwrap();
        let exact = o.green_killed(&a[1..]).unwrap()[(0, 0)];
        let p_exact = 1.0 / exact;
        assert!((est.escape.estimate() - p_exact).abs() < 3.0 * est.escape.stderr());
        let vm = est.visits_mean.unwrap();
        assert!(
            (vm - exact).abs() < 3.0 * est.visits_stderr.unwrap(),
            "{vm} vs {exact}"
        );
        assert!(empirical_green(&top, in_a, VertexId(1), 10, 10, false, 1).is_err());
    }

    #[test]
    fn diagnostics_empty_window() {
        let top = Topology::hypercube(10).unwrap();
        let plan = DiagnosticsPlan {
            window: TrapWindow::new(0.99, 1.01).unwrap(),
            g: 1e9,
            t: 1.0,
            xi: 500,
            mr: 500.0,
            theta: 1.0,
            lambda_d: 1.0,
            environments: 2,
            trajectories: 100,
            visit_trajectories: 10,
            deltas: vec![0.1],
            key: 20,
            start: VertexId::ORIGIN,
            aggregate: false,
        };
        let r = condition_diagnostics(&top, |_| ConstantEnvironment(1.0), &plan).unwrap();
        assert_eq!(r.deep_time_covers.estimate(), 0.0);
        assert_eq!(r.very_deep_hit.estimate(), 0.0);
        assert_eq!(r.condition_d.len(), 2);
        assert!(r.shallow_fraction > 400.0);
    }

    fn torus_plan(window: TrapWindow, xi_fraction: f64) -> (Topology, ScaleSet, DiagnosticsPlan) {
        let bits = 8;
        let top = Topology::torus2d(bits).unwrap();
        let sc = scales(
            ScaleModel::Torus {
                alpha: 0.5,
                gamma: 0.1,
                bits,
            },
            4.0,
        )
        .unwrap();
        let plan = DiagnosticsPlan {
            window,
            g: sc.g,
            t: sc.t,
            xi: (xi_fraction * sc.xi).ceil() as u64,
            mr: sc.xi,
            theta: 1.0,
            lambda_d: 1.0,
            environments: 4,
            trajectories: 250,
            visit_trajectories: 1,
            deltas: vec![],
            key: 31,
            start: VertexId::ORIGIN,
            aggregate: false,
        };
        (top, sc, plan)
    }

    fn torus_env(top: &Topology, e: u64) -> TableEnvironment {
        let spec = LandscapeSpec::new(DepthLaw::Pareto { alpha: 0.5 }, 100 + e).unwrap();
        TableEnvironment(
            (0..top.vertex_count())
                .map(|v| spec.tau(VertexId(v)))
                .collect(),
        )
    }

    #[test]
    fn shallow_time_falls_with_eps() {
        let fractions: Vec<f64> = [0.2, 0.1, 0.05]
            .iter()
            .map(|&eps| {
                let (top, _, mut plan) = torus_plan(TrapWindow::new(eps, 1e3).unwrap(), 1.0);
                plan.trajectories = 50;
                condition_diagnostics(&top, |e| torus_env(&top, e), &plan)
                    .unwrap()
                    .shallow_fraction
            })
            .collect();
        assert!(fractions.windows(2).all(|w| w[1] < w[0]), "{fractions:?}");
    }

    #[test]
    fn very_deep_hits_scale_like_power_law() {
        // a short horizon keeps the hit probability in its linear regime
        let hits: Vec<Proportion> = [2.0, 4.0, 8.0]
            .iter()
            .map(|&m| {
                let (top, _, mut plan) = torus_plan(TrapWindow::new(1e-3, m).unwrap(), 0.02);
                // the quenched spread dominates: many landscapes, few walks each
                plan.environments = 500;
                plan.trajectories = 4;
                condition_diagnostics(&top, |e| torus_env(&top, e), &plan)
                    .unwrap()
                    .very_deep_hit
            })
            .collect();
        for w in hits.windows(2) {
            let (a, b) = (w[0].estimate(), w[1].estimate());
            // same walks on nested sets
            assert!(b <= a, "{hits:?}");
            // P[T_M hit] ∝ M^{-α} to first order
            let want = a * 2f64.powf(-0.5);
            let se = (w[0].stderr().powi(2) * 0.5 + w[1].stderr().powi(2)).sqrt();
            assert!((b - want).abs() < 3.0 * se, "{hits:?}");
        }
    }
}
