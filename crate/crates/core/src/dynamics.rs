//! Heat-bath Glauber dynamics driven by explicit ring schedules, the coupled
//! process started from a flipped site, green/red clusters and the time
//! constants.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::dsu::Dsu;
use crate::error::{Error, Result};
use crate::ising::{BoundaryCondition, IsingModel, ModelParams, SpinConfig};
use crate::lattice::{Geometry, Region, SiteCoord, NO_SITE};

pub const DEFAULT_M: f64 = 64.0;

/// One clock ring: site index, time and the attached uniform.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ring {
    pub time: f64,
    pub site: u32,
    pub uniform: f64,
}

/// All clock rings of a region up to `horizon`, as one time-ordered stream.
#[derive(Clone, Debug, PartialEq)]
pub struct RingSchedule {
    geom: Arc<Geometry>,
    horizon: f64,
    rings: Vec<Ring>,
}

impl RingSchedule {
    pub fn empty(geom: Arc<Geometry>, horizon: f64) -> Result<Self> {
        check_time(horizon)?;
        Ok(Self { geom, horizon, rings: Vec::new() })
    }

    /// Independent rate-1 clocks on every site, generated as a single
    /// rate-`|V|` Poisson process with uniformly chosen sites.
    pub fn generate<R: Rng + ?Sized>(geom: Arc<Geometry>, horizon: f64, rng: &mut R) -> Result<Self> {
        let mut s = Self::empty(geom, horizon)?;
        s.regenerate(horizon, rng)?;
        Ok(s)
    }

    /// Redraws in place, keeping the allocation.
    pub fn regenerate<R: Rng + ?Sized>(&mut self, horizon: f64, rng: &mut R) -> Result<()> {
        check_time(horizon)?;
        self.horizon = horizon;
        self.rings.clear();
        let n = self.geom.len();
        if n == 0 || horizon == 0.0 {
            return Ok(());
        }
        let rate = n as f64;
        let mut t = 0.0;
        loop {
            let e: f64 = Exp1.sample(rng);
            t += e / rate;
            if t > horizon {
                break;
            }
            let site = rng.random_range(0..n) as u32;
            let uniform = rng.random::<f64>();
            self.rings.push(Ring { time: t, site, uniform });
        }
        Ok(())
    }

    /// Builds a schedule from explicit rings; they are sorted by time.
    pub fn from_rings(geom: Arc<Geometry>, horizon: f64, mut rings: Vec<Ring>) -> Result<Self> {
        check_time(horizon)?;
        for r in &rings {
            if r.site as usize >= geom.len() {
                return Err(Error::InvalidParameter(format!("ring site index {} out of range", r.site)));
            }
            if !(r.time > 0.0 && r.time <= horizon) {
                return Err(Error::InvalidParameter(format!("ring time {} outside (0, {horizon}]", r.time)));
            }
            if !(0.0..=1.0).contains(&r.uniform) {
                return Err(Error::InvalidParameter(format!("ring uniform {} outside [0,1]", r.uniform)));
            }
        }
        rings.sort_by(|a, b| a.time.total_cmp(&b.time));
        let mut per_site = vec![f64::NEG_INFINITY; geom.len()];
        for r in &rings {
            if per_site[r.site as usize] == r.time {
                return Err(Error::InvalidParameter(format!("site {} rings twice at {}", r.site, r.time)));
            }
            per_site[r.site as usize] = r.time;
        }
        Ok(Self { geom, horizon, rings })
    }

    pub fn geometry(&self) -> &Arc<Geometry> {
        &self.geom
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn rings(&self) -> &[Ring] {
        &self.rings
    }

    /// Rings with time ≤ `t`.
    pub fn rings_until(&self, t: f64) -> &[Ring] {
        let end = self.rings.partition_point(|r| r.time <= t);
        &self.rings[..end]
    }

    /// Rings with time in `(a, b]`.
    pub fn rings_between(&self, a: f64, b: f64) -> &[Ring] {
        let start = self.rings.partition_point(|r| r.time <= a);
        let end = self.rings.partition_point(|r| r.time <= b);
        &self.rings[start..end.max(start)]
    }

    /// Sorted `(time, uniform)` pairs of site `x`.
    pub fn site_rings(&self, x: SiteCoord) -> Vec<(f64, f64)> {
        let Some(i) = self.geom.index_of(x) else {
            return Vec::new();
        };
        self.rings.iter().filter(|r| r.site as usize == i).map(|r| (r.time, r.uniform)).collect()
    }

    pub fn ring_counts(&self, t: f64) -> Vec<u32> {
        let mut c = vec![0u32; self.geom.len()];
        for r in self.rings_until(t) {
            c[r.site as usize] += 1;
        }
        c
    }

    /// Line-per-ring text: `site_k site_m time uniform`, after a `# horizon` header.
    pub fn to_text(&self) -> String {
        let mut out = format!("# horizon {}\n", self.horizon);
        for r in &self.rings {
            let x = self.geom.site(r.site as usize);
            let _ = writeln!(out, "{} {} {} {}", x.k, x.m, r.time, r.uniform);
        }
        out
    }

    pub fn from_text(geom: Arc<Geometry>, text: &str) -> Result<Self> {
        let mut horizon = None;
        let mut rings = Vec::new();
        for (ln, line) in text.lines().enumerate() {
            let line = line.trim();
            if let Some(h) = line.strip_prefix("# horizon") {
                horizon = Some(h.trim().parse::<f64>().map_err(|e| Error::Parse(format!("line {}: {e}", ln + 1)))?);
                continue;
            }
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 4 {
                return Err(Error::Parse(format!("line {}: expected 4 fields", ln + 1)));
            }
            let perr = |e: String| Error::Parse(format!("line {}: {e}", ln + 1));
            let k: i32 = f[0].parse().map_err(|e| perr(format!("{e}")))?;
            let m: i32 = f[1].parse().map_err(|e| perr(format!("{e}")))?;
            let time: f64 = f[2].parse().map_err(|e| perr(format!("{e}")))?;
            let uniform: f64 = f[3].parse().map_err(|e| perr(format!("{e}")))?;
            let x = SiteCoord::new(k, m);
            let site = geom.index_of(x).ok_or(Error::SiteOutsideRegion(x))? as u32;
            rings.push(Ring { time, site, uniform });
        }
        let horizon = horizon.or_else(|| rings.iter().map(|r| r.time).reduce(f64::max)).unwrap_or(0.0);
        Self::from_rings(geom, horizon, rings)
    }
}

fn check_time(t: f64) -> Result<()> {
    if t >= 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::NegativeTime(t))
    }
}

pub fn make_schedule<R: Rng + ?Sized>(region: Region, horizon: f64, rng: &mut R) -> Result<RingSchedule> {
    RingSchedule::generate(Arc::new(Geometry::new(region)), horizon, rng)
}

/// Applies `rings` in order: a ring flips its site iff `U ≥ 1 − c_x`.
#[inline]
pub fn evolve(model: &IsingModel, spins: &mut [i8], rings: &[Ring]) {
    for r in rings {
        let i = r.site as usize;
        if r.uniform >= 1.0 - model.rate_at(spins, i) {
            spins[i] = -spins[i];
        }
    }
}

/// Same law as [`evolve`] ring by ring, but a ring sets the spin to `+` iff
/// `U ≥ 1 − P(+ | neighbours)` instead of flipping it. Two configurations
/// driven by the same rings keep their coordinatewise order; under [`evolve`]
/// they need not (at β = 0 they swap at `x` whenever `U ≥ ½`).
pub fn evolve_monotone(model: &IsingModel, spins: &mut [i8], rings: &[Ring]) {
    for r in rings {
        let i = r.site as usize;
        let p_plus = model.rate_for(-model.local_field(spins, i));
        spins[i] = if r.uniform >= 1.0 - p_plus { 1 } else { -1 };
    }
}

/// Evolves the pair `(σ, σ^{(x)})` under the same rings.
pub fn evolve_coupled(model: &IsingModel, a: &mut [i8], b: &mut [i8], rings: &[Ring]) {
    for r in rings {
        let i = r.site as usize;
        let th = 1.0 - r.uniform;
        if model.rate_at(a, i) >= th {
            a[i] = -a[i];
        }
        if model.rate_at(b, i) >= th {
            b[i] = -b[i];
        }
    }
}

fn check_until(sched: &RingSchedule, until: f64) -> Result<()> {
    check_time(until)?;
    if until > sched.horizon {
        return Err(Error::BeyondHorizon { until, horizon: sched.horizon });
    }
    Ok(())
}

fn check_same_region(cfg: &SpinConfig, sched: &RingSchedule) -> Result<()> {
    if cfg.geometry() != sched.geometry() {
        return Err(Error::InvalidParameter("configuration and schedule live on different regions".into()));
    }
    Ok(())
}

pub fn simulate_with(model: &IsingModel, sigma0: &SpinConfig, sched: &RingSchedule, until: f64) -> Result<SpinConfig> {
    check_until(sched, until)?;
    check_same_region(sigma0, sched)?;
    let mut out = sigma0.clone();
    evolve(model, out.spins_mut(), sched.rings_until(until));
    Ok(out)
}

pub fn simulate(sigma0: &SpinConfig, sched: &RingSchedule, bc: &BoundaryCondition, p: ModelParams, until: f64) -> Result<SpinConfig> {
    let model = IsingModel::new(sigma0.geometry().clone(), bc.clone(), p)?;
    simulate_with(&model, sigma0, sched, until)
}

/// Returns `(σ_t, σ_t^{(x)})`, the second started from `σ^x`.
pub fn coupled_simulate(
    sigma0: &SpinConfig,
    x: SiteCoord,
    sched: &RingSchedule,
    bc: &BoundaryCondition,
    p: ModelParams,
    until: f64,
) -> Result<(SpinConfig, SpinConfig)> {
    check_until(sched, until)?;
    check_same_region(sigma0, sched)?;
    let model = IsingModel::new(sigma0.geometry().clone(), bc.clone(), p)?;
    let mut a = sigma0.clone();
    let mut b = sigma0.flipped(x)?;
    evolve_coupled(&model, a.spins_mut(), b.spins_mut(), sched.rings_until(until));
    Ok((a, b))
}

/// `(σ_0, σ_t)`, optionally with the schedule that produced it.
#[derive(Clone, Debug)]
pub struct PairSample {
    pub sigma0: SpinConfig,
    pub sigma_t: SpinConfig,
    pub t: f64,
    pub schedule: Option<RingSchedule>,
}

/// Components of a marked site set, with the `G_x`/`R_x` union-of-components query.
#[derive(Clone, Debug)]
pub struct MarkedClusters {
    geom: Arc<Geometry>,
    marked: Vec<bool>,
    dsu: Dsu,
    any: bool,
}

impl MarkedClusters {
    pub fn new(geom: Arc<Geometry>, marked: Vec<bool>) -> Self {
        let mut dsu = Dsu::new(geom.len());
        let any = marked.iter().any(|m| *m);
        if any {
            for i in 0..geom.len() {
                if !marked[i] {
                    continue;
                }
                for &j in geom.nbrs(i) {
                    if j != NO_SITE && (j as usize) > i && marked[j as usize] {
                        dsu.union(i as u32, j);
                    }
                }
            }
        }
        Self { geom, marked, dsu, any }
    }

    /// Green sites: at least one ring at time ≤ `cut`.
    pub fn green(sched: &RingSchedule, cut: f64) -> Self {
        let mut marked = vec![false; sched.geom.len()];
        for r in sched.rings_until(cut) {
            marked[r.site as usize] = true;
        }
        Self::new(sched.geom.clone(), marked)
    }

    /// Red sites for disagreement set `d` (by index): outside `d` one ring
    /// suffices, inside `d` it takes two.
    pub fn red(sched: &RingSchedule, d: &[bool], t: f64) -> Self {
        let counts = sched.ring_counts(t);
        let marked = counts.iter().zip(d).map(|(c, in_d)| *c >= if *in_d { 2 } else { 1 }).collect();
        Self::new(sched.geom.clone(), marked)
    }

    pub fn is_marked(&self, i: usize) -> bool {
        self.marked[i]
    }

    pub fn marked_sites(&self) -> BTreeSet<SiteCoord> {
        (0..self.marked.len()).filter(|i| self.marked[*i]).map(|i| self.geom.site(i)).collect()
    }

    fn roots_around(&mut self, i: usize) -> ([u32; 7], usize) {
        let mut roots = [u32::MAX; 7];
        let mut n = 0;
        let mut push = |r: u32, roots: &mut [u32; 7]| {
            if !roots[..n].contains(&r) {
                roots[n] = r;
                n += 1;
            }
        };
        if self.marked[i] {
            let r = self.dsu.find(i as u32);
            push(r, &mut roots);
        }
        let nb = *self.geom.nbrs(i);
        for j in nb {
            if j != NO_SITE && self.marked[j as usize] {
                let r = self.dsu.find(j);
                push(r, &mut roots);
            }
        }
        (roots, n)
    }

    /// `|G_x|` for site index `i`.
    pub fn cluster_size(&mut self, i: usize) -> usize {
        if !self.any {
            return 0;
        }
        let (roots, n) = self.roots_around(i);
        roots[..n].iter().map(|r| self.dsu.component_size(*r)).sum()
    }

    /// The sites of `G_x` for site index `i`.
    pub fn cluster(&mut self, i: usize) -> BTreeSet<SiteCoord> {
        if !self.any {
            return BTreeSet::new();
        }
        let (roots, n) = self.roots_around(i);
        let roots = &roots[..n];
        (0..self.marked.len()).filter(|j| self.marked[*j] && roots.contains(&self.dsu.find(*j as u32))).map(|j| self.geom.site(j)).collect()
    }
}

pub fn green_set(sched: &RingSchedule, tau_cut: f64) -> Result<BTreeSet<SiteCoord>> {
    check_until(sched, tau_cut)?;
    Ok(MarkedClusters::green(sched, tau_cut).marked_sites())
}

/// `G_x`: the green components of `x` and of its neighbors.
pub fn green_cluster(sched: &RingSchedule, tau_cut: f64, x: SiteCoord) -> Result<BTreeSet<SiteCoord>> {
    check_until(sched, tau_cut)?;
    let i = sched.geom.index_of(x).ok_or(Error::SiteOutsideRegion(x))?;
    Ok(MarkedClusters::green(sched, tau_cut).cluster(i))
}

fn disagreement_mask(sched: &RingSchedule, d: &BTreeSet<SiteCoord>) -> Vec<bool> {
    let mut mask = vec![false; sched.geom.len()];
    for x in d {
        if let Some(i) = sched.geom.index_of(*x) {
            mask[i] = true;
        }
    }
    mask
}

pub fn red_set(sched: &RingSchedule, d: &BTreeSet<SiteCoord>, t: f64) -> Result<BTreeSet<SiteCoord>> {
    check_until(sched, t)?;
    Ok(MarkedClusters::red(sched, &disagreement_mask(sched, d), t).marked_sites())
}

/// `R_x`: the red components of `x` and of its neighbors.
pub fn red_cluster(sched: &RingSchedule, d: &BTreeSet<SiteCoord>, t: f64, x: SiteCoord) -> Result<BTreeSet<SiteCoord>> {
    check_until(sched, t)?;
    let i = sched.geom.index_of(x).ok_or(Error::SiteOutsideRegion(x))?;
    Ok(MarkedClusters::red(sched, &disagreement_mask(sched, d), t).cluster(i))
}

/// `dec(S)`: every `x ∈ S` has `|G_x| ≤ ln |S|`.
pub fn dec_event(sched: &RingSchedule, s: &BTreeSet<SiteCoord>, tau_cut: f64) -> Result<bool> {
    if s.is_empty() {
        return Err(Error::EmptySet);
    }
    check_until(sched, tau_cut)?;
    let idx: Vec<usize> = s.iter().map(|x| sched.geom.index_of(*x).ok_or(Error::SiteOutsideRegion(*x))).collect::<Result<_>>()?;
    let mut g = MarkedClusters::green(sched, tau_cut);
    Ok(dec_holds(&mut g, &idx))
}

pub fn dec_holds(g: &mut MarkedClusters, s: &[usize]) -> bool {
    let bound = (s.len() as f64).ln();
    s.iter().all(|&i| g.cluster_size(i) as f64 <= bound)
}

/// The constants `a`, `c_FE`, `τ` and `M`, with natural logs kept alongside
/// since `τ` is astronomically small.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Constants {
    pub beta: f64,
    pub a: f64,
    pub c_fe: f64,
    pub tau: f64,
    pub m: f64,
    pub ln_a: f64,
    pub ln_c_fe: f64,
    pub ln_tau: f64,
}

pub fn constants(p: ModelParams, m: f64) -> Result<Constants> {
    ModelParams::new(p.beta)?;
    if !(m >= 1.0 && m.is_finite()) {
        return Err(Error::InvalidParameter(format!("M must be ≥ 1, got {m}")));
    }
    // a = 1/(1+e^{12β}): all six neighbours aligned with the spin
    let x = 12.0 * p.beta;
    let ln_a = -(x.max(0.0) + (-x.abs()).exp().ln_1p());
    let ln_c_fe = 14.0 * ln_a - 16f64.ln();
    let ln_tau = 2.0 * ln_c_fe - 1e6f64.ln() - m.ln();
    let c = Constants { beta: p.beta, a: ln_a.exp(), c_fe: ln_c_fe.exp(), tau: ln_tau.exp(), m, ln_a, ln_c_fe, ln_tau };
    if c.tau == 0.0 {
        return Err(Error::Constants(format!("tau underflows at beta={} (ln tau = {ln_tau:.1})", p.beta)));
    }
    c.check_series()?;
    Ok(c)
}

impl Constants {
    /// Checks the three series bounds on `τ` in log space.
    pub fn check_series(&self) -> Result<()> {
        let ln_m = self.m.ln();
        // Σ_k q^{k+1}M^kτ^k with q = 1/(2√c): geometric with ratio r = qMτ
        let ln_q = -(2f64.ln() + 0.5 * self.ln_c_fe);
        let ln_r = ln_q + ln_m + self.ln_tau;
        if ln_r >= 0.0 {
            return Err(Error::Constants("series in the first bound diverges".into()));
        }
        let lhs = ln_q - (-ln_r.exp()).ln_1p();
        if lhs > -0.5 * self.ln_c_fe {
            return Err(Error::Constants(format!("first bound fails: ln lhs {lhs} > {}", -0.5 * self.ln_c_fe)));
        }
        // Σ_{k≥λ} (16/c)^{k+1}M^kτ^k ≤ e^{−λ}; the slack is monotone in λ,
        // so integer λ up to a few suffices.
        let ln_p = 16f64.ln() - self.ln_c_fe;
        let ln_r = ln_p + ln_m + self.ln_tau;
        if ln_r >= 0.0 {
            return Err(Error::Constants("series in the tail bound diverges".into()));
        }
        for lambda in 1..=64 {
            let l = lambda as f64;
            let lhs = ln_p + l * ln_r - (-ln_r.exp()).ln_1p();
            if lhs > -l {
                return Err(Error::Constants(format!("tail bound fails at lambda={lambda}")));
            }
        }
        // Σ_k (k+1)(16/c)^{k+1}M^kτ^k(2k+1)^2 ≤ 100/c, after multiplying by c/16
        let r = ln_r.exp();
        let mut sum = 0.0;
        let mut rk = 1.0;
        for k in 0..10_000 {
            let kf = k as f64;
            let term = (kf + 1.0) * (2.0 * kf + 1.0).powi(2) * rk;
            sum += term;
            if term < 1e-18 * sum {
                break;
            }
            rk *= r;
        }
        if sum > 100.0 / 16.0 {
            return Err(Error::Constants(format!("moment bound fails: {sum} > 6.25")));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::ORIGIN;
    use rand::SeedableRng;
    use rand_xoshiro::Xoshiro256PlusPlus;

    fn g(n: u32) -> Arc<Geometry> {
        Arc::new(Geometry::new(Region::rhombus(ORIGIN, n)))
    }

    fn ring(geom: &Geometry, x: SiteCoord, time: f64, uniform: f64) -> Ring {
        Ring { time, site: geom.index_of(x).unwrap() as u32, uniform }
    }

    #[test]
    fn constants_values() {
        let c = constants(ModelParams::new(0.0).unwrap(), 64.0).unwrap();
        assert_eq!(c.a, 0.5);
        assert!((c.c_fe - 0.5f64.powi(14) / 16.0).abs() < 1e-20);
        assert!((c.c_fe - 3.815e-6).abs() < 1e-9);
        assert!((c.tau - c.c_fe * c.c_fe / 64e6).abs() < 1e-30);
        let lo = constants(ModelParams::new(0.1).unwrap(), 64.0).unwrap();
        let hi = constants(ModelParams::new(0.3).unwrap(), 64.0).unwrap();
        assert!(lo.a > hi.a);
        assert!(constants(ModelParams::new(0.1).unwrap(), 0.5).is_err());
        assert!(matches!(constants(ModelParams::new(3.0).unwrap(), 64.0), Err(Error::Constants(_))));
    }

    #[test]
    fn schedule_validation_and_text() {
        let geom = g(1);
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(3);
        let s = RingSchedule::generate(geom.clone(), 2.0, &mut rng).unwrap();
        assert!(s.rings().windows(2).all(|w| w[0].time < w[1].time));
        assert!(s.rings().iter().all(|r| r.time <= 2.0 && (0.0..=1.0).contains(&r.uniform)));
        let back = RingSchedule::from_text(geom.clone(), &s.to_text()).unwrap();
        assert_eq!(back, s);
        assert!(RingSchedule::generate(geom.clone(), -1.0, &mut rng).is_err());
        let empty = RingSchedule::generate(geom, 0.0, &mut rng).unwrap();
        assert!(empty.rings().is_empty());
    }

    #[test]
    fn simulate_rules() {
        let geom = g(1);
        let p = ModelParams::new(0.4).unwrap();
        let bc = BoundaryCondition::Free;
        let sigma = SpinConfig::constant(geom.clone(), 1);
        let none = RingSchedule::empty(geom.clone(), 1.0).unwrap();
        assert_eq!(simulate(&sigma, &none, &bc, p, 1.0).unwrap(), sigma);
        assert!(matches!(simulate(&sigma, &none, &bc, p, 2.0), Err(Error::BeyondHorizon { .. })));
        // all-plus center has rate 1/(1+e^{4.8}); U just above 1 - c flips it, just below does not
        let c = 1.0 / (1.0 + 4.8f64.exp());
        let flip = RingSchedule::from_rings(geom.clone(), 1.0, vec![ring(&geom, ORIGIN, 0.5, 1.0 - c + 1e-12)]).unwrap();
        assert_eq!(simulate(&sigma, &flip, &bc, p, 1.0).unwrap().get(ORIGIN), Some(-1));
        assert_eq!(simulate(&sigma, &flip, &bc, p, 0.4).unwrap().get(ORIGIN), Some(1));
        let stay = RingSchedule::from_rings(geom.clone(), 1.0, vec![ring(&geom, ORIGIN, 0.5, 1.0 - c - 1e-9)]).unwrap();
        assert_eq!(simulate(&sigma, &stay, &bc, p, 1.0).unwrap(), sigma);
        let (a, b) = coupled_simulate(&sigma, ORIGIN, &none, &bc, p, 1.0).unwrap();
        assert_eq!(a, sigma);
        assert_eq!(b, sigma.flipped(ORIGIN).unwrap());
    }

    #[test]
    fn green_and_red_sets() {
        let geom = g(2);
        let none = RingSchedule::empty(geom.clone(), 1.0).unwrap();
        assert!(green_set(&none, 1.0).unwrap().is_empty());
        assert!(green_cluster(&none, 1.0, ORIGIN).unwrap().is_empty());
        let only_x = RingSchedule::from_rings(geom.clone(), 1.0, vec![ring(&geom, ORIGIN, 0.3, 0.5)]).unwrap();
        assert_eq!(green_cluster(&only_x, 1.0, ORIGIN).unwrap(), BTreeSet::from([ORIGIN]));
        assert!(green_cluster(&only_x, 0.2, ORIGIN).unwrap().is_empty());
        let y = SiteCoord::new(1, 0);
        let only_y = RingSchedule::from_rings(geom.clone(), 1.0, vec![ring(&geom, y, 0.3, 0.5)]).unwrap();
        assert_eq!(green_cluster(&only_y, 1.0, ORIGIN).unwrap(), BTreeSet::from([y]));

        let d = BTreeSet::from([ORIGIN]);
        assert!(red_set(&none, &BTreeSet::new(), 1.0).unwrap().is_empty());
        assert!(red_set(&only_x, &d, 1.0).unwrap().is_empty());
        assert_eq!(red_set(&only_x, &BTreeSet::new(), 1.0).unwrap(), BTreeSet::from([ORIGIN]));
        let twice = RingSchedule::from_rings(
            geom.clone(),
            1.0,
            vec![ring(&geom, ORIGIN, 0.3, 0.5), ring(&geom, ORIGIN, 0.6, 0.5), ring(&geom, y, 0.1, 0.2)],
        )
        .unwrap();
        assert_eq!(red_cluster(&twice, &d, 1.0, ORIGIN).unwrap(), BTreeSet::from([ORIGIN, y]));
        assert_eq!(red_cluster(&twice, &d, 0.5, ORIGIN).unwrap(), BTreeSet::from([y]));
    }

    #[test]
    fn decoupling_event() {
        let geom = g(2);
        let none = RingSchedule::empty(geom.clone(), 1.0).unwrap();
        let s9: BTreeSet<_> = Region::rhombus(ORIGIN, 1).sites().into_iter().collect();
        assert!(dec_event(&none, &s9, 1.0).unwrap());
        assert!(dec_event(&none, &BTreeSet::from([ORIGIN]), 1.0).unwrap());
        assert!(matches!(dec_event(&none, &BTreeSet::new(), 1.0), Err(Error::EmptySet)));
        let rings: Vec<_> =
            std::iter::once(ORIGIN).chain(ORIGIN.neighbors()).enumerate().map(|(i, x)| ring(&geom, x, 0.1 * (i + 1) as f64, 0.5)).collect();
        let full = RingSchedule::from_rings(geom.clone(), 1.0, rings).unwrap();
        // the rung hexagon has 7 sites > ln 9
        let mut gc = MarkedClusters::green(&full, 1.0);
        assert_eq!(gc.cluster_size(geom.index_of(ORIGIN).unwrap()), 7);
        assert!(!dec_event(&full, &s9, 1.0).unwrap());
        let single = RingSchedule::from_rings(geom.clone(), 1.0, vec![ring(&geom, SiteCoord::new(2, 2), 0.5, 0.5)]).unwrap();
        assert!(!dec_event(&single, &BTreeSet::from([SiteCoord::new(2, 2)]), 1.0).unwrap());
    }
}
