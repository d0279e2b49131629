//! Derived quantities built from many estimates: arm tables, sensitivity
//! sweeps, quasi-multiplicativity ratios, derivative estimates and mixing ratios.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::estimate::{frame_model, pair_histogram, run_replicas, EstimateRecord, Histogram, Indicator, McConfig, PairWorker};
use super::seeding::derive_seed;
use super::stats::{log_var, MeanAcc, MeanEstimate, Proportion, RatioEstimate};
use crate::dynamics::{self, constants, MarkedClusters, RingSchedule, DEFAULT_M};
use crate::error::{Error, Result};
use crate::events::{CompiledEvent, EventScratch, EventSpec};
use crate::ising::ModelParams;
use crate::lattice::{Region, ORIGIN};

/// Relative Wilson half-width above which an arm-table row is flagged.
pub const ARM_REL_WIDTH_WARN: f64 = 0.2;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArmRow {
    pub n: u32,
    pub alpha: EstimateRecord,
}

/// `α_n = μ_{2n}(A_4(n))` over a list of scales; `ε_n` is always recomputed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArmTable {
    pub beta: f64,
    pub rows: Vec<ArmRow>,
}

impl ArmTable {
    pub fn alpha(&self, n: u32) -> Option<f64> {
        self.rows.iter().find(|r| r.n == n).map(|r| r.alpha.p_hat)
    }

    /// `ε_n = 1/(n²α_n)`.
    pub fn epsilon(&self, n: u32) -> Option<f64> {
        self.alpha(n).map(|a| 1.0 / ((n as f64).powi(2) * a))
    }

    /// Least-squares slope of `ln α_n` against `ln n`, over rows with `α̂_n > 0`.
    pub fn loglog_slope(&self) -> Option<f64> {
        let pts: Vec<(f64, f64)> =
            self.rows.iter().filter(|r| r.alpha.p_hat > 0.0).map(|r| ((r.n as f64).ln(), r.alpha.p_hat.ln())).collect();
        if pts.len() < 2 {
            return None;
        }
        let k = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        Some(sxy / sxx)
    }
}

pub fn arm_table(beta: f64, ns: &[u32], cfg: &McConfig) -> Result<ArmTable> {
    if ns.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter("arm table scales must be strictly ascending".into()));
    }
    let mut rows = Vec::new();
    for &n in ns {
        if n == 0 {
            return Err(Error::BadScales("arm table needs n ≥ 1".into()));
        }
        let ev = EventSpec::alpha(n);
        let frame = Region::rhombus(ORIGIN, 2 * n);
        let c = cfg.with_seed(derive_seed(cfg.seed, &format!("alpha n={n}")));
        let mut rec = super::estimate::estimate_static(&ev, Some(frame), beta, &c)?;
        rec.master_seed = cfg.seed;
        rec.m = Some(1);
        rec.n = Some(n);
        if rec.proportion().rel_half_width() > ARM_REL_WIDTH_WARN {
            log::warn!(
                "alpha_{n} at beta={beta}: relative CI half-width {:.2} exceeds {ARM_REL_WIDTH_WARN}",
                rec.proportion().rel_half_width()
            );
        }
        rows.push(ArmRow { n, alpha: rec });
    }
    Ok(ArmTable { beta, rows })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SensitivityLength {
    Scale(u32),
    BeyondTable,
}

/// `ℓ(t) = min{n : n²α̂_n ≥ 1/t}` over the tabulated scales.
pub fn sensitivity_length(table: &ArmTable, t: f64) -> Result<SensitivityLength> {
    if t <= 0.0 || t.is_nan() {
        return Err(Error::InvalidParameter(format!("sensitivity length needs t > 0, got {t}")));
    }
    if table.rows.is_empty() {
        return Err(Error::EmptySet);
    }
    Ok(table
        .rows
        .iter()
        .find(|r| (r.n as f64).powi(2) * r.alpha.p_hat >= 1.0 / t)
        .map_or(SensitivityLength::BeyondTable, |r| SensitivityLength::Scale(r.n)))
}

/// Time axis of a sweep: absolute times, or multiples of `ε_n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum TimeAxis {
    Absolute(Vec<f64>),
    Scaled(Vec<f64>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub n: u32,
    pub t: f64,
    /// `t/ε_n` when the sweep was specified in scaled time.
    pub scaled: Option<f64>,
    pub estimate: EstimateRecord,
}

/// `P(σ, σ_t ∈ Cross_n)` over an `(n, t)` grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub beta: f64,
    pub cells: Vec<SweepCell>,
}

impl SweepResult {
    /// Cells for scale `n`, in increasing time.
    pub fn column(&self, n: u32) -> Vec<&SweepCell> {
        self.cells.iter().filter(|c| c.n == n).collect()
    }

    pub fn cell(&self, n: u32, t: f64) -> Option<&SweepCell> {
        self.cells.iter().find(|c| c.n == n && c.t == t)
    }
}

/// For each `n`, every trial runs one trajectory and reads the crossing at all
/// grid times, so the cells of one column share their samples.
pub fn cross_sweep(beta: f64, ns: &[u32], times: &TimeAxis, table: Option<&ArmTable>, cfg: &McConfig) -> Result<SweepResult> {
    let mut cells = Vec::new();
    for &n in ns {
        let (ts, scaled): (Vec<f64>, Vec<Option<f64>>) = match times {
            TimeAxis::Absolute(ts) => (ts.clone(), vec![None; ts.len()]),
            TimeAxis::Scaled(ss) => {
                let table = table.ok_or_else(|| Error::InvalidParameter("scaled times need an arm table".into()))?;
                let eps = table.epsilon(n).ok_or_else(|| Error::InvalidParameter(format!("arm table lacks n={n}")))?;
                if !eps.is_finite() {
                    return Err(Error::InvalidParameter(format!("alpha_{n} estimate is zero; eps_n undefined")));
                }
                (ss.iter().map(|s| s * eps).collect(), ss.iter().map(|s| Some(*s)).collect())
            }
        };
        if ts.iter().any(|t| *t < 0.0 || t.is_nan()) {
            return Err(Error::NegativeTime(ts.iter().cloned().fold(f64::NAN, f64::min)));
        }
        let mut order: Vec<usize> = (0..ts.len()).collect();
        order.sort_by(|a, b| ts[*a].total_cmp(&ts[*b]));
        let sorted: Vec<f64> = order.iter().map(|&i| ts[i]).collect();
        let ev = EventSpec::cross(n);
        let model = frame_model(ev.default_frame(), beta)?;
        let compiled = ev.compile(model.geometry())?;
        let c = cfg.with_seed(derive_seed(cfg.seed, &format!("sweep n={n}")));
        let counts = run_replicas(
            &c,
            |_, trials, rng| {
                let mut w = PairWorker::new(model.clone(), &c.method)?;
                let mut counts = vec![0u64; sorted.len()];
                for _ in 0..trials {
                    let mut at0 = None;
                    w.draw_times(rng, &sorted, |j, s0, st, scratch| {
                        let a = *at0.get_or_insert_with(|| compiled.eval(s0, scratch));
                        if a && compiled.eval(st, scratch) {
                            counts[j] += 1;
                        }
                    })?;
                }
                Ok(counts)
            },
            |mut a, b| {
                a.iter_mut().zip(&b).for_each(|(x, y)| *x += y);
                a
            },
        )?;
        for (pos, &i) in order.iter().enumerate() {
            let p = Proportion::new(counts[pos], cfg.trials);
            let mut rec = EstimateRecord::from_proportion(&ev, beta, Some(ts[i]), p, cfg);
            rec.master_seed = cfg.seed;
            cells.push(SweepCell { n, t: ts[i], scaled: scaled[i], estimate: rec });
        }
    }
    Ok(SweepResult { beta, cells })
}

/// Variance of `Σ c_i ln p̂_{S_i}` for proportions read off one histogram,
/// where `p_S` is the frequency of all indicators in mask `S` holding.
pub fn log_combination_var(h: &Histogram, terms: &[(usize, f64)]) -> f64 {
    let n = h.trials as f64;
    let mut v = 0.0;
    for &(s, a) in terms {
        for &(t, b) in terms {
            let ps = h.all_of(s).p_hat();
            let pt = h.all_of(t).p_hat();
            let pst = h.all_of(s | t).p_hat();
            v += a * b * (pst - ps * pt) / (n * ps * pt);
        }
    }
    v
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QmRow {
    pub k: u32,
    pub m: u32,
    pub n: u32,
    pub t: f64,
    /// `None` when the annulus is empty and the probability is 1 by convention.
    pub pi_km: Option<EstimateRecord>,
    pub pi_mn: Option<EstimateRecord>,
    pub pi_kn: Option<EstimateRecord>,
    /// `π_{k,m}π_{m,n}/π_{k,n}`.
    pub ratio: RatioEstimate,
    /// Acceptance bracket; a tuning knob, not a constant from the theory.
    pub bracket: (f64, f64),
    pub within_bracket: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QmReport {
    pub beta: f64,
    pub rows: Vec<QmRow>,
}

pub const QM_BRACKET: (f64, f64) = (0.2, 5.0);

/// `π_{a,b}(t) = P(σ, σ_t ∈ A_4(a,b))` with the dynamics in `Λ_{2b}`.
/// `π_{m,n}` and `π_{k,n}` share samples; `π_{k,m}` is drawn separately.
pub fn qm_report(beta: f64, t: f64, triples: &[(u32, u32, u32)], cfg: &McConfig) -> Result<QmReport> {
    let mut rows = Vec::new();
    for &(k, m, n) in triples {
        if !(1 <= k && k <= m && m <= n) {
            return Err(Error::BadScales(format!("qm needs 1 ≤ k ≤ m ≤ n, got ({k},{m},{n})")));
        }
        let tag = format!("qm k={k} m={m} n={n} t={t}");
        let record = |a: u32, b: u32, p: Proportion, c: &McConfig| {
            let mut r = EstimateRecord::from_proportion(&EventSpec::arm4(a, b), beta, Some(t), p, c);
            r.master_seed = cfg.seed;
            r.k = Some(k);
            r
        };
        let (pi_km, var_km) = if k == m {
            (None, 0.0)
        } else {
            let model = frame_model(Region::rhombus(ORIGIN, 2 * m), beta)?;
            let ind = Indicator::both(model.geometry(), &EventSpec::arm4(k, m))?;
            let c = cfg.with_seed(derive_seed(cfg.seed, &format!("{tag} inner")));
            let p = pair_histogram(&model, t, &[ind], &c)?.marginal(0);
            (Some(record(k, m, p, cfg)), log_var(&p))
        };
        let (pi_mn, pi_kn, ratio) = if m == n {
            // π_{m,m} ≡ 1 and π_{k,n} = π_{k,m}
            let value = 1.0;
            (None, pi_km.clone(), RatioEstimate::from_log(value, 0.0))
        } else {
            let model = frame_model(Region::rhombus(ORIGIN, 2 * n), beta)?;
            let g = model.geometry();
            let inds = [Indicator::both(g, &EventSpec::arm4(m, n))?, Indicator::both(g, &EventSpec::arm4(k, n))?];
            let c = cfg.with_seed(derive_seed(cfg.seed, &format!("{tag} outer")));
            let h = pair_histogram(&model, t, &inds, &c)?;
            let (pmn, pkn) = (h.marginal(0), h.marginal(1));
            let value = pi_km.as_ref().map_or(1.0, |r| r.p_hat) * pmn.p_hat() / pkn.p_hat();
            let var = var_km + log_combination_var(&h, &[(1, 1.0), (2, -1.0)]);
            (Some(record(m, n, pmn, cfg)), Some(record(k, n, pkn, cfg)), RatioEstimate::from_log(value, var))
        };
        rows.push(QmRow {
            k,
            m,
            n,
            t,
            within_bracket: ratio.within(QM_BRACKET.0, QM_BRACKET.1),
            pi_km,
            pi_mn,
            pi_kn,
            ratio,
            bracket: QM_BRACKET,
        });
    }
    Ok(QmReport { beta, rows })
}

/// Trial budgets for [`derivative_report`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DerivConfig {
    pub seed: u64,
    pub replicas: u64,
    /// Trials and step of the common-random-numbers finite difference.
    pub fd_trials: u64,
    pub fd_step: f64,
    /// Trials of the coupled-pair estimator.
    pub coupled_trials: u64,
    /// Above this scale the coupled estimator subsamples sites.
    pub exhaustive_max_n: u32,
    pub subsample_sites: usize,
    /// Trials of the pivotal sum and of `π_n(t)`.
    pub pivotal_trials: u64,
}

impl DerivConfig {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            replicas: super::estimate::DEFAULT_REPLICAS,
            fd_trials: 200_000,
            fd_step: 0.01,
            coupled_trials: 20_000,
            exhaustive_max_n: 8,
            subsample_sites: 64,
            pivotal_trials: 20_000,
        }
    }

    fn mc(&self, trials: u64, label: &str) -> McConfig {
        McConfig { trials, seed: derive_seed(self.seed, label), replicas: self.replicas, method: Default::default() }
    }
}

/// Three estimates of `−d/dt P(σ, σ_t ∈ Cross_n)` and the ratio used for the pivotal lower bound.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DerivReport {
    pub beta: f64,
    pub n: u32,
    pub t: f64,
    pub tau: f64,
    /// Bounds involving the pivotal sum are only asserted for `t ≤ τ`.
    pub beyond_tau: bool,
    /// (i) `(P(t) − P(t+h))/h` with common random numbers.
    pub finite_difference: MeanEstimate,
    /// (ii) `½Σ_x E[c_x(σ)(f(σ^x)−f(σ))(f(σ_t^{(x)})−f(σ_t))]`.
    pub coupled: MeanEstimate,
    /// (iii) `Σ_x P(σ, σ_t ∈ Piv_x(Cross_n))`.
    pub pivotal_sum: MeanEstimate,
    /// `π_n(t) = P(σ, σ_t ∈ A_4(n))`.
    pub pi_n: EstimateRecord,
    /// (i)/(ii).
    pub ratio_fd_coupled: RatioEstimate,
    /// (ii)/(iii), compared with a bracket.
    pub ratio_coupled_pivotal: RatioEstimate,
    pub pivotal_bracket: (f64, f64),
    /// Measured `c` in `−d/dt P ≥ c·n²·π_n(t)`, from (i).
    pub c_lower: RatioEstimate,
    /// `|(i) − (ii)|` in units of the combined standard error.
    pub fd_coupled_z: f64,
}

pub const PIVOTAL_BRACKET: (f64, f64) = (1.0 / 50.0, 50.0);

fn ratio_of_means(a: &MeanEstimate, b: &MeanEstimate) -> RatioEstimate {
    let va = (a.std_error / a.mean).powi(2);
    let vb = (b.std_error / b.mean).powi(2);
    RatioEstimate::from_log(a.mean / b.mean, va + vb)
}

pub fn derivative_report(beta: f64, n: u32, t: f64, dc: &DerivConfig) -> Result<DerivReport> {
    if t < 0.0 || t.is_nan() {
        return Err(Error::NegativeTime(t));
    }
    let consts = constants(ModelParams::new(beta)?, DEFAULT_M)?;
    let beyond_tau = t > consts.tau;
    if beyond_tau {
        log::warn!("derivative report at t={t} > tau={}: pivotal bounds are not asserted", consts.tau);
    }
    let ev = EventSpec::cross(n);
    let model = frame_model(ev.default_frame(), beta)?;
    let geom = model.geometry().clone();
    let cross = ev.compile(&geom)?;
    let support: Vec<usize> = Region::rhombus(ORIGIN, n).sites().into_iter().map(|x| geom.index_of(x).unwrap()).collect();

    // (i) forward difference with common random numbers
    let h = dc.fd_step;
    let times = [t, t + h];
    let fd_cfg = dc.mc(dc.fd_trials, "deriv fd");
    let fd = run_replicas(
        &fd_cfg,
        |_, trials, rng| {
            let mut w = PairWorker::new(model.clone(), &fd_cfg.method)?;
            let mut acc = MeanAcc::default();
            for _ in 0..trials {
                let mut vals = [false; 2];
                let mut at0 = None;
                w.draw_times(rng, &times, |j, s0, st, scratch| {
                    let a = *at0.get_or_insert_with(|| cross.eval(s0, scratch));
                    vals[j] = a && cross.eval(st, scratch);
                })?;
                acc.push((vals[0] as u8 as f64 - vals[1] as u8 as f64) / h);
            }
            Ok(acc)
        },
        MeanAcc::merge,
    )?
    .summary();

    // (ii) coupled pairs started from σ and σ^x
    let exhaustive = n <= dc.exhaustive_max_n;
    let k_sub = if exhaustive { support.len() } else { dc.subsample_sites.min(support.len()) };
    let co_cfg = dc.mc(dc.coupled_trials, "deriv coupled");
    let coupled = run_replicas(
        &co_cfg,
        |_, trials, rng| {
            let mut w = PairWorker::new(model.clone(), &co_cfg.method)?;
            let mut acc = MeanAcc::default();
            let mut flip = vec![0i8; geom.len()];
            let mut a = vec![0i8; geom.len()];
            let mut b = vec![0i8; geom.len()];
            let mut sched = RingSchedule::empty(geom.clone(), 0.0)?;
            let mut scratch = EventScratch::default();
            for _ in 0..trials {
                w.draw_static(rng);
                sched.regenerate(t, rng)?;
                let s0 = &w.s0;
                let f0 = cross.eval(s0, &mut scratch);
                let sites: Vec<usize> = if exhaustive {
                    support.clone()
                } else {
                    rand::seq::index::sample(rng, support.len(), k_sub).into_iter().map(|i| support[i]).collect()
                };
                let weight = support.len() as f64 / k_sub as f64;
                let mut y = 0.0;
                for &x in &sites {
                    flip.copy_from_slice(s0);
                    flip[x] = -flip[x];
                    let f1 = cross.eval(&flip, &mut scratch);
                    if f1 == f0 {
                        continue;
                    }
                    let c = model.rate_at(s0, x);
                    a.copy_from_slice(s0);
                    b.copy_from_slice(&flip);
                    dynamics::evolve_coupled(&model, &mut a, &mut b, sched.rings());
                    let ga = cross.eval(&a, &mut scratch) as u8 as f64;
                    let gb = cross.eval(&b, &mut scratch) as u8 as f64;
                    y += c * (f1 as u8 as f64 - f0 as u8 as f64) * (gb - ga);
                }
                acc.push(0.5 * weight * y);
            }
            Ok(acc)
        },
        MeanAcc::merge,
    )?
    .summary();

    // (iii) pivotal sum at both times, and π_n(t) on the same samples
    let arm = EventSpec::alpha(n).compile(&geom)?;
    let pv_cfg = dc.mc(dc.pivotal_trials, "deriv pivotal");
    let (piv, arms) = run_replicas(
        &pv_cfg,
        |_, trials, rng| {
            let mut w = PairWorker::new(model.clone(), &pv_cfg.method)?;
            let mut acc = MeanAcc::default();
            let mut hits = 0u64;
            let mut flip = vec![0i8; geom.len()];
            for _ in 0..trials {
                w.draw(rng, t)?;
                let (s0, st, scratch) = (&w.s0, &w.st, &mut w.scratch);
                let mut count = 0u32;
                for &x in &support {
                    if is_pivotal(&cross, s0, x, &mut flip, scratch) && is_pivotal(&cross, st, x, &mut flip, scratch) {
                        count += 1;
                    }
                }
                acc.push(count as f64);
                hits += (arm.eval(s0, scratch) && arm.eval(st, scratch)) as u64;
            }
            Ok((acc, hits))
        },
        |(a, x), (b, y)| (a.merge(b), x + y),
    )?;
    let piv = piv.summary();
    let pi_p = Proportion::new(arms, dc.pivotal_trials);
    let mut pi_n = EstimateRecord::from_proportion(&EventSpec::alpha(n), beta, Some(t), pi_p, &pv_cfg);
    pi_n.master_seed = dc.seed;

    let n2pi = (n as f64).powi(2) * pi_p.p_hat();
    let c_lower = RatioEstimate::from_log(fd.mean / n2pi, (fd.std_error / fd.mean).powi(2) + log_var(&pi_p));
    let z = (fd.mean - coupled.mean).abs() / (fd.std_error.powi(2) + coupled.std_error.powi(2)).sqrt();
    Ok(DerivReport {
        beta,
        n,
        t,
        tau: consts.tau,
        beyond_tau,
        ratio_fd_coupled: ratio_of_means(&fd, &coupled),
        ratio_coupled_pivotal: ratio_of_means(&coupled, &piv),
        pivotal_bracket: PIVOTAL_BRACKET,
        finite_difference: fd,
        coupled,
        pivotal_sum: piv,
        pi_n,
        c_lower,
        fd_coupled_z: z,
    })
}

fn is_pivotal(ev: &CompiledEvent, s: &[i8], x: usize, buf: &mut Vec<i8>, scratch: &mut EventScratch) -> bool {
    buf.clear();
    buf.extend_from_slice(s);
    let a = ev.eval(buf, scratch);
    buf[x] = -buf[x];
    a != ev.eval(buf, scratch)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixingReport {
    pub beta: f64,
    pub t: f64,
    pub event_a: String,
    pub event_b: String,
    pub p_a: EstimateRecord,
    pub p_b: EstimateRecord,
    pub p_ab: EstimateRecord,
    /// `P(A)P(B)/P(A∩B)` for the two-time events `{σ, σ_t ∈ ·}`.
    pub ratio: RatioEstimate,
}

/// Decoupling ratio for `A` supported in `inner` and `B` supported off `inner^{(δ)}`.
#[allow(clippy::too_many_arguments)]
pub fn mixing_ratio_report(
    beta: f64,
    inner: &Region,
    delta: f64,
    a: &EventSpec,
    b: &EventSpec,
    t: f64,
    frame: Option<Region>,
    cfg: &McConfig,
) -> Result<MixingReport> {
    let sa = a.support().ok_or_else(|| Error::InvalidParameter(format!("{a} has no bounded support")))?;
    let sb = b.support().ok_or_else(|| Error::InvalidParameter(format!("{b} has no bounded support")))?;
    if !inner.covers(&sa) {
        return Err(Error::InvalidParameter(format!("{a} is not supported in {inner}")));
    }
    let thick = inner.thicken(delta)?;
    if sb.sites().into_iter().any(|x| thick.contains(x)) {
        return Err(Error::InvalidParameter(format!("{b} meets the δ-thickening {thick}")));
    }
    let frame = frame.unwrap_or_else(|| {
        let s = a.outer_scale().max(b.outer_scale());
        Region::rhombus(ORIGIN, 2 * s)
    });
    let model = frame_model(frame, beta)?;
    let g = model.geometry();
    let h = pair_histogram(&model, t, &[Indicator::both(g, a)?, Indicator::both(g, b)?], cfg)?;
    let rec = |e: &EventSpec, p: Proportion| EstimateRecord::from_proportion(e, beta, Some(t), p, cfg);
    let (pa, pb, pab) = (h.marginal(0), h.marginal(1), h.all_of(3));
    let value = pa.p_hat() * pb.p_hat() / pab.p_hat();
    let var = log_combination_var(&h, &[(1, 1.0), (2, 1.0), (3, -1.0)]);
    Ok(MixingReport {
        beta,
        t,
        event_a: a.to_string(),
        event_b: b.to_string(),
        p_a: rec(a, pa),
        p_b: rec(b, pb),
        p_ab: rec(a, pab),
        ratio: RatioEstimate::from_log(value, var),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NestedArmReport {
    pub beta: f64,
    pub t: f64,
    pub m: u32,
    pub n: u32,
    /// `P(σ,σ_t ∈ A_1(1,n)) / (P(σ,σ_t ∈ A_1(1,m))·P(σ,σ_t ∈ A_1(2m,n)))`.
    pub c_hat: RatioEstimate,
}

/// The constant in the nested one-arm bound, measured on shared samples in `Λ_{2n}`.
pub fn nested_one_arm(beta: f64, m: u32, n: u32, t: f64, cfg: &McConfig) -> Result<NestedArmReport> {
    if 2 * m >= n {
        return Err(Error::BadScales(format!("nested one-arm needs 2m < n, got m={m}, n={n}")));
    }
    let model = frame_model(Region::rhombus(ORIGIN, 2 * n), beta)?;
    let g = model.geometry();
    let inds = [
        Indicator::both(g, &EventSpec::arm1(1, n))?,
        Indicator::both(g, &EventSpec::arm1(1, m))?,
        Indicator::both(g, &EventSpec::arm1(2 * m, n))?,
    ];
    let h = pair_histogram(&model, t, &inds, cfg)?;
    let value = h.marginal(0).p_hat() / (h.marginal(1).p_hat() * h.marginal(2).p_hat());
    let var = log_combination_var(&h, &[(1, 1.0), (2, -1.0), (4, -1.0)]);
    Ok(NestedArmReport { beta, t, m, n, c_hat: RatioEstimate::from_log(value, var) })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TranslationReport {
    pub beta: f64,
    pub t: f64,
    /// The event recentred at `x` in the large frame.
    pub shifted: EstimateRecord,
    /// The event at the origin in the small frame.
    pub local: EstimateRecord,
    pub ratio: RatioEstimate,
    pub bracket: (f64, f64),
}

pub const TRANSLATION_BRACKET: (f64, f64) = (1.0 / 3.0, 3.0);

/// Compares an event centred at `x` inside `Λ_{2n}` with the same event at
/// the origin of `Λ_{2m}`.
pub fn translation_report(
    beta: f64,
    event: &EventSpec,
    x: crate::lattice::SiteCoord,
    n: u32,
    m: u32,
    t: f64,
    cfg: &McConfig,
) -> Result<TranslationReport> {
    let shifted_ev = event.centered_at(x);
    let big = frame_model(Region::rhombus(ORIGIN, 2 * n), beta)?;
    let small = frame_model(Region::rhombus(ORIGIN, 2 * m), beta)?;
    let c1 = cfg.with_seed(derive_seed(cfg.seed, "translation shifted"));
    let c2 = cfg.with_seed(derive_seed(cfg.seed, "translation local"));
    let p1 = pair_histogram(&big, t, &[Indicator::both(big.geometry(), &shifted_ev)?], &c1)?.marginal(0);
    let p2 = pair_histogram(&small, t, &[Indicator::both(small.geometry(), event)?], &c2)?.marginal(0);
    Ok(TranslationReport {
        beta,
        t,
        shifted: EstimateRecord::from_proportion(&shifted_ev, beta, Some(t), p1, cfg),
        local: EstimateRecord::from_proportion(event, beta, Some(t), p2, cfg),
        ratio: RatioEstimate::from_log(p1.p_hat() / p2.p_hat(), log_var(&p1) + log_var(&p2)),
        bracket: TRANSLATION_BRACKET,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GreenTailRow {
    pub lambda: u32,
    pub estimate: Proportion,
    pub p_hat: f64,
    pub sigma: f64,
    /// `e^{−λ}`.
    pub bound: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GreenTailReport {
    pub n: u32,
    pub t: f64,
    pub rows: Vec<GreenTailRow>,
}

/// `P(|G_o| ≥ λ)` for the green cluster of the origin in `Λ_n`, from schedules alone.
pub fn green_tail(n: u32, t: f64, lambdas: &[u32], cfg: &McConfig) -> Result<GreenTailReport> {
    let geom = std::sync::Arc::new(crate::lattice::Geometry::new(Region::rhombus(ORIGIN, n)));
    let o = geom.index_of(ORIGIN).expect("origin in rhombus");
    let counts = run_replicas(
        cfg,
        |_, trials, rng| {
            let mut sched = RingSchedule::empty(geom.clone(), t)?;
            let mut c = vec![0u64; lambdas.len()];
            for _ in 0..trials {
                sched.regenerate(t, rng)?;
                let size = if sched.rings().is_empty() { 0 } else { MarkedClusters::green(&sched, t).cluster_size(o) };
                for (j, &l) in lambdas.iter().enumerate() {
                    c[j] += (size >= l as usize) as u64;
                }
            }
            Ok(c)
        },
        |mut a, b| {
            a.iter_mut().zip(&b).for_each(|(x, y)| *x += y);
            a
        },
    )?;
    let rows = lambdas
        .iter()
        .zip(counts)
        .map(|(&l, c)| {
            let p = Proportion::new(c, cfg.trials);
            GreenTailRow { lambda: l, estimate: p, p_hat: p.p_hat(), sigma: p.sigma(), bound: (-(l as f64)).exp() }
        })
        .collect();
    Ok(GreenTailReport { n, t, rows })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecouplingReport {
    pub n: u32,
    pub t: f64,
    pub tau_cut: f64,
    /// `P(σ, σ_t ∈ Cross_n)`.
    pub p_event: Proportion,
    /// `P({σ, σ_t ∈ Cross_n} ∩ dec(∂Λ_n))`.
    pub p_event_dec: Proportion,
}

/// Overhead of intersecting the crossing event with the decoupling event on `∂Λ_n`.
pub fn decoupling_report(beta: f64, n: u32, t: f64, tau_cut: f64, cfg: &McConfig) -> Result<DecouplingReport> {
    let ev = EventSpec::cross(n);
    let model = frame_model(ev.default_frame(), beta)?;
    let geom = model.geometry().clone();
    let cross = ev.compile(&geom)?;
    let s: Vec<usize> = Region::rhombus(ORIGIN, n).boundary().into_iter().map(|x| geom.index_of(x).unwrap()).collect();
    let (a, b) = run_replicas(
        cfg,
        |_, trials, rng| {
            let mut w = PairWorker::new(model.clone(), &cfg.method)?;
            let (mut a, mut b) = (0u64, 0u64);
            for _ in 0..trials {
                w.draw(rng, t)?;
                if cross.eval(&w.s0, &mut w.scratch) && cross.eval(&w.st, &mut w.scratch) {
                    a += 1;
                    let mut g = MarkedClusters::green(w.schedule(), tau_cut.min(t));
                    if dynamics::dec_holds(&mut g, &s) {
                        b += 1;
                    }
                }
            }
            Ok((a, b))
        },
        |(a, b), (c, d)| (a + c, b + d),
    )?;
    Ok(DecouplingReport { n, t, tau_cut, p_event: Proportion::new(a, cfg.trials), p_event_dec: Proportion::new(b, cfg.trials) })
}

/// Sites of a region, for messages.
pub fn sites_of(r: &Region) -> BTreeSet<crate::lattice::SiteCoord> {
    r.sites().into_iter().collect()
}
