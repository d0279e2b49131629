//! Replica-parallel Monte Carlo estimation of static and two-time event probabilities.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::seeding::{replica_rng, ReplicaRng};
use super::stats::Proportion;
use crate::dynamics::{self, RingSchedule};
use crate::error::{Error, Result};
use crate::events::{CompiledEvent, EventScratch, EventSpec};
use crate::ising::{BoundaryCondition, IsingModel, ModelParams, Sampler, SamplerMethod};
use crate::lattice::{Geometry, Region};

pub const DEFAULT_REPLICAS: u64 = 64;

/// Trial budget, master seed and sampling method for one estimate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    pub trials: u64,
    pub seed: u64,
    pub replicas: u64,
    pub method: SamplerMethod,
}

impl McConfig {
    pub fn new(trials: u64, seed: u64) -> Self {
        Self { trials, seed, replicas: DEFAULT_REPLICAS, method: SamplerMethod::default() }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }

    pub fn with_trials(&self, trials: u64) -> Self {
        Self { trials, ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::InvalidParameter("trials must be ≥ 1".into()));
        }
        if self.replicas == 0 {
            return Err(Error::InvalidParameter("replicas must be ≥ 1".into()));
        }
        Ok(())
    }

    /// Number of trials assigned to replica `r`.
    pub fn replica_trials(&self, r: u64) -> u64 {
        let (t, k) = (self.trials as u128, self.replicas as u128);
        let r = r as u128;
        ((t * (r + 1)) / k - (t * r) / k) as u64
    }
}

/// Runs `body(replica, trials, rng)` for every replica and folds the results
/// in replica order, so the outcome does not depend on the thread count.
pub fn run_replicas<A: Send>(
    cfg: &McConfig,
    body: impl Fn(u64, u64, &mut ReplicaRng) -> Result<A> + Sync,
    merge: impl Fn(A, A) -> A,
) -> Result<A> {
    cfg.validate()?;
    let parts: Vec<A> = (0..cfg.replicas)
        .into_par_iter()
        .map(|r| {
            let mut rng = replica_rng(cfg.seed, r);
            body(r, cfg.replica_trials(r), &mut rng)
        })
        .collect::<Result<_>>()?;
    Ok(parts.into_iter().reduce(merge).expect("at least one replica"))
}

/// The free-boundary model on `frame`.
pub fn frame_model(frame: Region, beta: f64) -> Result<Arc<IsingModel>> {
    Ok(Arc::new(IsingModel::new(Arc::new(Geometry::new(frame)), BoundaryCondition::Free, ModelParams::new(beta)?)?))
}

/// Per-replica buffers for drawing `(σ_0, σ_t)`.
pub struct PairWorker {
    model: Arc<IsingModel>,
    sampler: Sampler,
    sched: RingSchedule,
    pub s0: Vec<i8>,
    pub st: Vec<i8>,
    pub scratch: EventScratch,
}

impl PairWorker {
    pub fn new(model: Arc<IsingModel>, method: &SamplerMethod) -> Result<Self> {
        let n = model.geometry().len();
        let sched = RingSchedule::empty(model.geometry().clone(), 0.0)?;
        Ok(Self {
            sampler: Sampler::new(model.clone(), method.clone())?,
            model,
            sched,
            s0: vec![1; n],
            st: vec![1; n],
            scratch: EventScratch::default(),
        })
    }

    pub fn model(&self) -> &Arc<IsingModel> {
        &self.model
    }

    pub fn schedule(&self) -> &RingSchedule {
        &self.sched
    }

    /// Draws `σ_0 ∼ μ` only.
    pub fn draw_static(&mut self, rng: &mut ReplicaRng) {
        self.sampler.sample_into(rng, &mut self.s0);
    }

    /// Draws `σ_0 ∼ μ`, a schedule to `t`, and `σ_t`.
    pub fn draw(&mut self, rng: &mut ReplicaRng, t: f64) -> Result<()> {
        self.draw_static(rng);
        self.st.copy_from_slice(&self.s0);
        if t > 0.0 {
            self.sched.regenerate(t, rng)?;
            dynamics::evolve(&self.model, &mut self.st, self.sched.rings());
        }
        Ok(())
    }

    /// Draws one trajectory and visits `σ_{t_j}` for each time of the
    /// increasing list `times`.
    pub fn draw_times(
        &mut self,
        rng: &mut ReplicaRng,
        times: &[f64],
        mut visit: impl FnMut(usize, &[i8], &[i8], &mut EventScratch),
    ) -> Result<()> {
        self.draw_static(rng);
        self.st.copy_from_slice(&self.s0);
        let horizon = times.last().copied().unwrap_or(0.0);
        self.sched.regenerate(horizon, rng)?;
        let mut prev = 0.0;
        for (j, &t) in times.iter().enumerate() {
            let rings = if j == 0 { self.sched.rings_until(t) } else { self.sched.rings_between(prev, t) };
            dynamics::evolve(&self.model, &mut self.st, rings);
            visit(j, &self.s0, &self.st, &mut self.scratch);
            prev = t;
        }
        Ok(())
    }
}

/// `{σ_0 ∈ A} ∩ {σ_t ∈ B}` with either side optional.
#[derive(Clone, Debug)]
pub struct Indicator {
    pub at0: Option<CompiledEvent>,
    pub att: Option<CompiledEvent>,
}

impl Indicator {
    pub fn compile(geom: &Arc<Geometry>, at0: Option<&EventSpec>, att: Option<&EventSpec>) -> Result<Self> {
        Ok(Self { at0: at0.map(|e| e.compile(geom)).transpose()?, att: att.map(|e| e.compile(geom)).transpose()? })
    }

    /// The same event at both times.
    pub fn both(geom: &Arc<Geometry>, e: &EventSpec) -> Result<Self> {
        Self::compile(geom, Some(e), Some(e))
    }

    pub fn eval(&self, s0: &[i8], st: &[i8], scratch: &mut EventScratch) -> bool {
        self.at0.as_ref().map_or(true, |e| e.eval(s0, scratch)) && self.att.as_ref().map_or(true, |e| e.eval(st, scratch))
    }
}

/// Joint counts of up to 16 indicators, keyed by the bitmask of those that held.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub trials: u64,
    pub counts: Vec<u64>,
}

impl Histogram {
    fn zero(k: usize) -> Self {
        Self { trials: 0, counts: vec![0; 1 << k] }
    }

    fn merge(mut self, o: Self) -> Self {
        self.trials += o.trials;
        self.counts.iter_mut().zip(&o.counts).for_each(|(a, b)| *a += b);
        self
    }

    /// Trials on which every indicator in `mask` held.
    pub fn all_of(&self, mask: usize) -> Proportion {
        let s = self.counts.iter().enumerate().filter(|(m, _)| m & mask == mask).map(|(_, c)| c).sum();
        Proportion::new(s, self.trials)
    }

    pub fn marginal(&self, i: usize) -> Proportion {
        self.all_of(1 << i)
    }
}

/// Samples `(σ_0, σ_t)` on `model`'s region and tabulates the indicators.
pub fn pair_histogram(model: &Arc<IsingModel>, t: f64, inds: &[Indicator], cfg: &McConfig) -> Result<Histogram> {
    if t < 0.0 || t.is_nan() {
        return Err(Error::NegativeTime(t));
    }
    assert!(inds.len() <= 16);
    // the trajectory is drawn whenever t > 0 so that every mode sees the same σ_0
    let needs_dynamics = t > 0.0 || inds.iter().any(|i| i.att.is_some());
    run_replicas(
        cfg,
        |_, trials, rng| {
            let mut w = PairWorker::new(model.clone(), &cfg.method)?;
            let mut h = Histogram::zero(inds.len());
            for _ in 0..trials {
                if needs_dynamics {
                    w.draw(rng, t)?;
                } else {
                    w.draw_static(rng);
                }
                let st = if needs_dynamics { &w.st } else { &w.s0 };
                let mut mask = 0;
                for (i, ind) in inds.iter().enumerate() {
                    if ind.eval(&w.s0, st, &mut w.scratch) {
                        mask |= 1 << i;
                    }
                }
                h.counts[mask] += 1;
                h.trials += 1;
            }
            Ok(h)
        },
        Histogram::merge,
    )
}

/// One estimated probability, in the shape persisted to CSV and JSON.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateRecord {
    pub event: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub event_t: Option<String>,
    pub beta: f64,
    pub t: Option<f64>,
    pub n: Option<u32>,
    pub m: Option<u32>,
    pub k: Option<u32>,
    pub trials: u64,
    pub successes: u64,
    pub p_hat: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub master_seed: u64,
    pub replica_count: u64,
}

impl EstimateRecord {
    pub fn from_proportion(event: &EventSpec, beta: f64, t: Option<f64>, p: Proportion, cfg: &McConfig) -> Self {
        let (ci_low, ci_high) = p.wilson95();
        let (n, m) = scales(event);
        Self {
            event: event.to_string(),
            event_t: None,
            beta,
            t,
            n,
            m,
            k: None,
            trials: p.trials,
            successes: p.successes,
            p_hat: p.p_hat(),
            ci_low,
            ci_high,
            master_seed: cfg.seed,
            replica_count: cfg.replicas,
        }
    }

    pub fn proportion(&self) -> Proportion {
        Proportion::new(self.successes, self.trials)
    }

    /// Binomial standard error of `p_hat`.
    pub fn sigma(&self) -> f64 {
        self.proportion().sigma()
    }
}

fn scales(e: &EventSpec) -> (Option<u32>, Option<u32>) {
    match e {
        EventSpec::Cross { n, .. } | EventSpec::SepDelta { n, .. } => (Some(*n), None),
        EventSpec::Ring4 { .. } => (Some(1), None),
        EventSpec::CrossRect { m, n, .. }
        | EventSpec::Arm1 { m, n, .. }
        | EventSpec::Arm4 { m, n, .. }
        | EventSpec::Arm3Half { m, n, .. }
        | EventSpec::Arm4Sep { m, n, .. } => (Some(*n), Some(*m)),
        EventSpec::Pivotal { inner, .. } => scales(inner),
        EventSpec::Raw(_) => (None, None),
    }
}

/// `P(σ ∈ A)` with `σ ∼ μ` on `frame` (default `Λ_{2n}` around the event), free boundary.
pub fn estimate_static(event: &EventSpec, frame: Option<Region>, beta: f64, cfg: &McConfig) -> Result<EstimateRecord> {
    let model = frame_model(frame.unwrap_or_else(|| event.default_frame()), beta)?;
    let ind = Indicator::compile(model.geometry(), Some(event), None)?;
    let h = pair_histogram(&model, 0.0, &[ind], cfg)?;
    Ok(EstimateRecord::from_proportion(event, beta, None, h.marginal(0), cfg))
}

/// Which events are tested at times 0 and t.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum PairMode {
    /// `σ_0 ∈ A` and `σ_t ∈ A`.
    Same,
    /// `σ_0 ∈ A` only; the dynamics still runs.
    Time0Only,
    /// `σ_0 ∈ A` and `σ_t ∈ B`.
    Mixed(EventSpec),
}

/// `P(σ_0 ∈ A, σ_t ∈ B)` with the dynamics in `frame` (default `Λ_{2n}`).
pub fn estimate_pair(
    event: &EventSpec,
    mode: &PairMode,
    beta: f64,
    t: f64,
    frame: Option<Region>,
    cfg: &McConfig,
) -> Result<EstimateRecord> {
    let frame = frame.unwrap_or_else(|| match mode {
        PairMode::Mixed(b) if b.outer_scale() > event.outer_scale() => b.default_frame(),
        _ => event.default_frame(),
    });
    let model = frame_model(frame, beta)?;
    let g = model.geometry();
    let ind = match mode {
        PairMode::Same => Indicator::both(g, event)?,
        PairMode::Time0Only => Indicator::compile(g, Some(event), None)?,
        PairMode::Mixed(b) => Indicator::compile(g, Some(event), Some(b))?,
    };
    let h = pair_histogram(&model, t, &[ind], cfg)?;
    let mut rec = EstimateRecord::from_proportion(event, beta, Some(t), h.marginal(0), cfg);
    if let PairMode::Mixed(b) = mode {
        rec.event_t = Some(b.to_string());
    }
    Ok(rec)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn replica_split_is_exact() {
        let cfg = McConfig::new(1003, 1);
        let total: u64 = (0..cfg.replicas).map(|r| cfg.replica_trials(r)).sum();
        assert_eq!(total, 1003);
        let small = McConfig { replicas: 64, ..McConfig::new(5, 1) };
        assert_eq!((0..64).map(|r| small.replica_trials(r)).sum::<u64>(), 5);
    }

    #[test]
    fn static_cross_at_infinite_temperature() {
        let r = estimate_static(&EventSpec::cross(4), None, 0.0, &McConfig::new(20_000, 5)).unwrap();
        assert!((r.p_hat - 0.5).abs() < 3.0 * r.sigma() + 1e-3, "{r:?}");
        assert!(r.ci_low <= r.p_hat && r.p_hat <= r.ci_high);
    }

    #[test]
    fn degenerate_arm_scale_never_succeeds() {
        let r =
            estimate_static(&EventSpec::arm4(1, 1), Some(Region::rhombus(crate::lattice::ORIGIN, 2)), 0.3, &McConfig::new(500, 2)).unwrap();
        assert_eq!(r.successes, 0);
    }

    #[test]
    fn pair_at_zero_time_matches_static() {
        let cfg = McConfig::new(4000, 9);
        let e = EventSpec::cross(3);
        let a = estimate_static(&e, None, 0.2, &cfg).unwrap();
        let b = estimate_pair(&e, &PairMode::Same, 0.2, 0.0, None, &cfg).unwrap();
        assert_eq!(a.successes, b.successes);
    }

    #[test]
    fn deterministic_across_runs() {
        let cfg = McConfig::new(3000, 77);
        let e = EventSpec::cross(3);
        let a = estimate_pair(&e, &PairMode::Same, 0.2, 0.5, None, &cfg).unwrap();
        let b = estimate_pair(&e, &PairMode::Same, 0.2, 0.5, None, &cfg).unwrap();
        assert_eq!(a, b);
    }
}
