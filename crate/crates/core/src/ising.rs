//! Static Ising model on a finite region: energies, boundary conditions,
//! heat-bath rates, exact measures and equilibrium samplers.

use std::collections::{BTreeMap, VecDeque};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{Geometry, Region, SiteCoord, NO_SITE};

/// Enumeration cap for [`exact_measure`].
pub const EXACT_CAP: usize = 20;

/// Critical inverse temperature of the triangular lattice, `ln 3 / 4`.
pub fn beta_c() -> f64 {
    3f64.ln() / 4.0
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub beta: f64,
}

impl ModelParams {
    /// `beta = 0` is accepted: it is the product measure used as a baseline.
    pub fn new(beta: f64) -> Result<Self> {
        if !(beta >= 0.0 && beta.is_finite()) {
            return Err(Error::InvalidParameter(format!("beta must be finite and ≥ 0, got {beta}")));
        }
        Ok(Self { beta })
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum BoundaryCondition {
    #[default]
    Free,
    Plus,
    Minus,
    /// Values in `{-1, 0, +1}` on every exterior boundary site.
    Mixed(BTreeMap<SiteCoord, i8>),
}

impl BoundaryCondition {
    /// Spin of exterior site `y`; 0 stands for free.
    fn value(&self, y: SiteCoord) -> Result<i8> {
        match self {
            BoundaryCondition::Free => Ok(0),
            BoundaryCondition::Plus => Ok(1),
            BoundaryCondition::Minus => Ok(-1),
            BoundaryCondition::Mixed(map) => map.get(&y).copied().ok_or(Error::MissingBoundarySpin(y)),
        }
    }

    fn validate(&self, region: &Region) -> Result<()> {
        if let BoundaryCondition::Mixed(map) = self {
            let ext = region.exterior_boundary();
            for (y, v) in map {
                if !ext.contains(y) {
                    return Err(Error::StrayBoundarySpin(*y));
                }
                if !(-1..=1).contains(v) {
                    return Err(Error::InvalidParameter(format!("boundary spin at {y} is {v}")));
                }
            }
            if let Some(y) = ext.iter().find(|y| !map.contains_key(y)) {
                return Err(Error::MissingBoundarySpin(*y));
            }
        }
        Ok(())
    }
}

/// A ±1 assignment on every site of a region, stored densely in row-major order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SpinConfig {
    geom: Arc<Geometry>,
    spins: Vec<i8>,
}

impl SpinConfig {
    pub fn constant(geom: Arc<Geometry>, s: i8) -> Self {
        assert!(s == 1 || s == -1, "spin must be ±1");
        let spins = vec![s; geom.len()];
        Self { geom, spins }
    }

    pub fn from_fn(geom: Arc<Geometry>, mut f: impl FnMut(SiteCoord) -> i8) -> Self {
        let spins = geom
            .sites()
            .iter()
            .map(|&x| {
                let s = f(x);
                assert!(s == 1 || s == -1, "spin must be ±1");
                s
            })
            .collect();
        Self { geom, spins }
    }

    pub fn from_spins(geom: Arc<Geometry>, spins: Vec<i8>) -> Result<Self> {
        if spins.len() != geom.len() {
            return Err(Error::InvalidParameter(format!("expected {} spins, got {}", geom.len(), spins.len())));
        }
        if spins.iter().any(|s| *s != 1 && *s != -1) {
            return Err(Error::InvalidParameter("spins must be ±1".into()));
        }
        Ok(Self { geom, spins })
    }

    /// Configuration whose bit `i` of `code` is the spin (+ when set) at site index `i`.
    pub fn from_code(geom: Arc<Geometry>, code: usize) -> Self {
        let spins = (0..geom.len()).map(|i| if code >> i & 1 == 1 { 1 } else { -1 }).collect();
        Self { geom, spins }
    }

    pub fn code(&self) -> usize {
        encode(&self.spins)
    }

    pub fn geometry(&self) -> &Arc<Geometry> {
        &self.geom
    }

    pub fn region(&self) -> &Region {
        self.geom.region()
    }

    pub fn len(&self) -> usize {
        self.spins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spins.is_empty()
    }

    pub fn spins(&self) -> &[i8] {
        &self.spins
    }

    pub fn spins_mut(&mut self) -> &mut [i8] {
        &mut self.spins
    }

    pub fn get(&self, x: SiteCoord) -> Option<i8> {
        self.geom.index_of(x).map(|i| self.spins[i])
    }

    pub fn set(&mut self, x: SiteCoord, s: i8) -> Result<()> {
        assert!(s == 1 || s == -1, "spin must be ±1");
        let i = self.geom.index_of(x).ok_or(Error::SiteOutsideRegion(x))?;
        self.spins[i] = s;
        Ok(())
    }

    /// `η^x`: the configuration with the spin at `x` flipped.
    pub fn flipped(&self, x: SiteCoord) -> Result<Self> {
        let i = self.geom.index_of(x).ok_or(Error::SiteOutsideRegion(x))?;
        let mut out = self.clone();
        out.spins[i] = -out.spins[i];
        Ok(out)
    }

    /// One line per row (ascending `m`), one `+`/`-` per site.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut row = None;
        for (x, s) in self.geom.sites().iter().zip(&self.spins) {
            if row.is_some_and(|r| r != x.m) {
                out.push('\n');
            }
            row = Some(x.m);
            out.push(if *s > 0 { '+' } else { '-' });
        }
        out.push('\n');
        out
    }

    /// Inverse of [`SpinConfig::to_text`]; whitespace is ignored.
    pub fn from_text(geom: Arc<Geometry>, text: &str) -> Result<Self> {
        let spins = text
            .chars()
            .filter(|c| !c.is_whitespace())
            .map(|c| match c {
                '+' => Ok(1),
                '-' => Ok(-1),
                other => Err(Error::Parse(format!("unexpected spin character `{other}`"))),
            })
            .collect::<Result<Vec<i8>>>()?;
        Self::from_spins(geom, spins)
    }
}

impl fmt::Display for SpinConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

pub(crate) fn encode(spins: &[i8]) -> usize {
    spins.iter().enumerate().fold(0, |acc, (i, s)| if *s > 0 { acc | 1 << i } else { acc })
}

/// Energy `H^ξ(η)`; free boundary drops the boundary sum.
pub fn energy(cfg: &SpinConfig, bc: &BoundaryCondition) -> Result<f64> {
    bc.validate(cfg.region())?;
    let g = cfg.geometry();
    let mut h = 0i64;
    for i in 0..g.len() {
        let si = cfg.spins[i] as i64;
        for (d, &j) in g.nbrs(i).iter().enumerate() {
            if j == NO_SITE {
                let y = g.site(i).neighbors()[d];
                h -= si * bc.value(y)? as i64;
            } else if (j as usize) > i {
                h -= si * cfg.spins[j as usize] as i64;
            }
        }
    }
    Ok(h as f64)
}

/// Heat-bath rate `c_x(η) = 1/(1+exp(2β η_x Σ_y η_y))`, exterior spins entering with their `ξ` value.
pub fn rate(cfg: &SpinConfig, x: SiteCoord, bc: &BoundaryCondition, p: ModelParams) -> Result<f64> {
    bc.validate(cfg.region())?;
    let i = cfg.geometry().index_of(x).ok_or(Error::SiteOutsideRegion(x))?;
    let model = IsingModel::new(cfg.geometry().clone(), bc.clone(), p)?;
    Ok(model.rate_at(&cfg.spins, i))
}

/// Precomputed kernel data for one (region, bc, β): boundary field per site and the rate table.
#[derive(Clone, Debug)]
pub struct IsingModel {
    geom: Arc<Geometry>,
    bc: BoundaryCondition,
    params: ModelParams,
    ext_field: Vec<i8>,
    /// Rate indexed by `η_x·h + 6` with `h` the local field in `[-6, 6]`.
    rate_table: [f64; 13],
}

impl IsingModel {
    pub fn new(geom: Arc<Geometry>, bc: BoundaryCondition, params: ModelParams) -> Result<Self> {
        ModelParams::new(params.beta)?;
        bc.validate(geom.region())?;
        let mut ext_field = vec![0i8; geom.len()];
        for (i, f) in ext_field.iter_mut().enumerate() {
            for (d, &j) in geom.nbrs(i).iter().enumerate() {
                if j == NO_SITE {
                    *f += bc.value(geom.site(i).neighbors()[d])?;
                }
            }
        }
        let mut rate_table = [0.0; 13];
        for (idx, r) in rate_table.iter_mut().enumerate() {
            let h = idx as f64 - 6.0;
            *r = 1.0 / (1.0 + (2.0 * params.beta * h).exp());
        }
        Ok(Self { geom, bc, params, ext_field, rate_table })
    }

    pub fn for_region(region: Region, bc: BoundaryCondition, params: ModelParams) -> Result<Self> {
        Self::new(Arc::new(Geometry::new(region)), bc, params)
    }

    pub fn geometry(&self) -> &Arc<Geometry> {
        &self.geom
    }

    pub fn bc(&self) -> &BoundaryCondition {
        &self.bc
    }

    pub fn params(&self) -> ModelParams {
        self.params
    }

    pub fn beta(&self) -> f64 {
        self.params.beta
    }

    /// `Σ_{y∼x} η_y` with exterior sites read from the boundary condition.
    #[inline]
    pub fn local_field(&self, spins: &[i8], i: usize) -> i32 {
        let mut h = self.ext_field[i] as i32;
        for &j in self.geom.nbrs(i) {
            if j != NO_SITE {
                h += spins[j as usize] as i32;
            }
        }
        h
    }

    #[inline]
    pub fn rate_at(&self, spins: &[i8], i: usize) -> f64 {
        let h = spins[i] as i32 * self.local_field(spins, i);
        self.rate_table[(h + 6) as usize]
    }

    /// Rate as a function of `η_x·h`.
    #[inline]
    pub fn rate_for(&self, aligned_field: i32) -> f64 {
        self.rate_table[(aligned_field + 6) as usize]
    }

    /// `−log` of the unnormalized weight is `β H`; this returns `−H`.
    pub fn neg_energy(&self, spins: &[i8]) -> f64 {
        let mut s = 0i64;
        for i in 0..spins.len() {
            let si = spins[i] as i64;
            s += si * self.ext_field[i] as i64;
            for &j in self.geom.nbrs(i) {
                if j != NO_SITE && (j as usize) > i {
                    s += si * spins[j as usize] as i64;
                }
            }
        }
        s as f64
    }

    pub fn exact_measure(&self) -> Result<ExactMeasure> {
        ExactMeasure::new(self)
    }
}

/// Normalized Boltzmann weights over all `2^|V|` configurations, indexed by [`SpinConfig::code`].
#[derive(Clone, Debug)]
pub struct ExactMeasure {
    geom: Arc<Geometry>,
    probs: Vec<f64>,
}

impl ExactMeasure {
    pub fn new(model: &IsingModel) -> Result<Self> {
        let n = model.geom.len();
        if n > EXACT_CAP {
            return Err(Error::RegionTooLarge { sites: n, cap: EXACT_CAP });
        }
        let mut spins = vec![-1i8; n];
        let mut logw = Vec::with_capacity(1 << n);
        for code in 0..1usize << n {
            for (i, s) in spins.iter_mut().enumerate() {
                *s = if code >> i & 1 == 1 { 1 } else { -1 };
            }
            logw.push(model.beta() * model.neg_energy(&spins));
        }
        let max = logw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut probs: Vec<f64> = logw.iter().map(|l| (l - max).exp()).collect();
        let z: f64 = probs.iter().sum();
        probs.iter_mut().for_each(|p| *p /= z);
        Ok(Self { geom: model.geom.clone(), probs })
    }

    pub fn geometry(&self) -> &Arc<Geometry> {
        &self.geom
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob(&self, cfg: &SpinConfig) -> f64 {
        self.probs[cfg.code()]
    }

    pub fn expectation(&self, mut f: impl FnMut(&SpinConfig) -> f64) -> f64 {
        (0..self.probs.len()).map(|c| self.probs[c] * f(&SpinConfig::from_code(self.geom.clone(), c))).sum()
    }
}

pub fn exact_measure(region: Region, bc: &BoundaryCondition, p: ModelParams) -> Result<ExactMeasure> {
    IsingModel::for_region(region, bc.clone(), p)?.exact_measure()
}

/// Equilibrium sampling strategy.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SamplerMethod {
    /// Table inversion over the exact measure.
    Exact,
    /// Wolff single-cluster updates started from a uniform configuration.
    Cluster(WolffSchedule),
    /// Sequential heat-bath sweeps started from a uniform configuration.
    Burnin { sweeps: usize },
}

/// Length of a Wolff run: stop once both the flip count and the total
/// number of sites flipped reach their targets.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WolffSchedule {
    pub warmup_flips: usize,
    /// Cluster flips after warm-up, as a multiple of `|V|^{1/2}`.
    pub flips_per_sqrt_volume: f64,
    /// Minimum number of sites flipped in total, as a multiple of `|V|`.
    pub min_sweeps: f64,
}

impl Default for WolffSchedule {
    fn default() -> Self {
        Self { warmup_flips: 100, flips_per_sqrt_volume: 10.0, min_sweeps: 10.0 }
    }
}

impl Default for SamplerMethod {
    fn default() -> Self {
        SamplerMethod::Cluster(WolffSchedule::default())
    }
}

impl FromStr for SamplerMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(SamplerMethod::Exact),
            "cluster" | "wolff" => Ok(SamplerMethod::default()),
            "burnin" => Ok(SamplerMethod::Burnin { sweeps: 200 }),
            other => {
                if let Some(n) = other.strip_prefix("burnin:") {
                    let sweeps = n.parse().map_err(|_| Error::UnknownMethod(other.into()))?;
                    return Ok(SamplerMethod::Burnin { sweeps });
                }
                Err(Error::UnknownMethod(other.into()))
            }
        }
    }
}

/// Reusable equilibrium sampler holding scratch buffers and, for the exact
/// method, the cumulative distribution table.
#[derive(Clone, Debug)]
pub struct Sampler {
    model: Arc<IsingModel>,
    method: SamplerMethod,
    cdf: Vec<f64>,
    bond_p: f64,
    in_cluster: Vec<bool>,
    queue: VecDeque<u32>,
    cluster: Vec<u32>,
}

impl Sampler {
    pub fn new(model: Arc<IsingModel>, method: SamplerMethod) -> Result<Self> {
        let mut cdf = Vec::new();
        if method == SamplerMethod::Exact {
            let mu = model.exact_measure()?;
            let mut acc = 0.0;
            cdf = mu
                .probs
                .iter()
                .map(|p| {
                    acc += p;
                    acc
                })
                .collect();
        }
        let n = model.geom.len();
        let bond_p = -(-2.0 * model.beta()).exp_m1();
        Ok(Self { model, method, cdf, bond_p, in_cluster: vec![false; n], queue: VecDeque::new(), cluster: Vec::new() })
    }

    pub fn model(&self) -> &Arc<IsingModel> {
        &self.model
    }

    pub fn method(&self) -> &SamplerMethod {
        &self.method
    }

    /// Draws a configuration into `spins`.
    pub fn sample_into<R: Rng + ?Sized>(&mut self, rng: &mut R, spins: &mut [i8]) {
        let n = self.model.geom.len();
        assert_eq!(spins.len(), n);
        match self.method.clone() {
            SamplerMethod::Exact => {
                let u: f64 = rng.random();
                let code = self.cdf.partition_point(|c| *c <= u).min(self.cdf.len() - 1);
                for (i, s) in spins.iter_mut().enumerate() {
                    *s = if code >> i & 1 == 1 { 1 } else { -1 };
                }
            }
            _ if self.model.beta() == 0.0 => uniform_fill(rng, spins),
            SamplerMethod::Cluster(sched) => {
                uniform_fill(rng, spins);
                if n == 0 {
                    return;
                }
                let target_flips = sched.warmup_flips + (sched.flips_per_sqrt_volume * (n as f64).sqrt()).ceil() as usize;
                let target_touched = (sched.min_sweeps * n as f64).ceil() as usize;
                let (mut flips, mut touched) = (0usize, 0usize);
                while flips < target_flips || touched < target_touched {
                    touched += self.wolff_step(rng, spins);
                    flips += 1;
                }
            }
            SamplerMethod::Burnin { sweeps } => {
                uniform_fill(rng, spins);
                for _ in 0..sweeps {
                    self.heat_bath_sweep(rng, spins);
                }
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&mut self, rng: &mut R) -> SpinConfig {
        let mut spins = vec![1i8; self.model.geom.len()];
        self.sample_into(rng, &mut spins);
        SpinConfig { geom: self.model.geom.clone(), spins }
    }

    /// One Wolff cluster move; returns the number of sites in the cluster.
    ///
    /// Boundary bonds enter through a Metropolis acceptance on the boundary
    /// energy change, so the move is reversible for any boundary condition.
    pub fn wolff_step<R: Rng + ?Sized>(&mut self, rng: &mut R, spins: &mut [i8]) -> usize {
        let g = &self.model.geom;
        let seed = rng.random_range(0..g.len());
        let s = spins[seed];
        self.cluster.clear();
        self.queue.clear();
        self.in_cluster[seed] = true;
        self.queue.push_back(seed as u32);
        let mut boundary_aligned = 0i32;
        while let Some(i) = self.queue.pop_front() {
            self.cluster.push(i);
            boundary_aligned += s as i32 * self.model.ext_field[i as usize] as i32;
            for &j in g.nbrs(i as usize) {
                if j == NO_SITE || self.in_cluster[j as usize] || spins[j as usize] != s {
                    continue;
                }
                if rng.random::<f64>() < self.bond_p {
                    self.in_cluster[j as usize] = true;
                    self.queue.push_back(j);
                }
            }
        }
        let accept = boundary_aligned <= 0 || rng.random::<f64>() < (-2.0 * self.model.beta() * boundary_aligned as f64).exp();
        for &i in &self.cluster {
            self.in_cluster[i as usize] = false;
            if accept {
                spins[i as usize] = -s;
            }
        }
        self.cluster.len()
    }

    pub fn heat_bath_sweep<R: Rng + ?Sized>(&mut self, rng: &mut R, spins: &mut [i8]) {
        for i in 0..spins.len() {
            let h = self.model.local_field(spins, i);
            // P(+) = 1/(1+exp(-2βh)), the rate of flipping a − spin.
            let p_plus = self.model.rate_for(-h);
            spins[i] = if rng.random::<f64>() < p_plus { 1 } else { -1 };
        }
    }
}

fn uniform_fill<R: Rng + ?Sized>(rng: &mut R, spins: &mut [i8]) {
    let mut bits = 0u64;
    for (i, s) in spins.iter_mut().enumerate() {
        if i % 64 == 0 {
            bits = rng.random();
        }
        *s = if bits >> (i % 64) & 1 == 1 { 1 } else { -1 };
    }
}

pub fn sample_equilibrium<R: Rng + ?Sized>(
    region: Region,
    bc: &BoundaryCondition,
    p: ModelParams,
    method: SamplerMethod,
    rng: &mut R,
) -> Result<SpinConfig> {
    let model = Arc::new(IsingModel::for_region(region, bc.clone(), p)?);
    Ok(Sampler::new(model, method)?.sample(rng))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::ORIGIN;
    use rand::SeedableRng;
    use rand_xoshiro::Xoshiro256PlusPlus;

    fn geom(r: Region) -> Arc<Geometry> {
        Arc::new(Geometry::new(r))
    }

    fn p(beta: f64) -> ModelParams {
        ModelParams::new(beta).unwrap()
    }

    #[test]
    fn energies() {
        let g = geom(Region::rhombus(ORIGIN, 1));
        let cfg = SpinConfig::constant(g, 1);
        // 6 edges along k, 6 along m, 4 along the (1,-1) diagonal
        assert_eq!(energy(&cfg, &BoundaryCondition::Free).unwrap(), -16.0);
        let single = SpinConfig::constant(geom(Region::rhombus(ORIGIN, 0)), 1);
        assert_eq!(energy(&single, &BoundaryCondition::Plus).unwrap(), -6.0);
        let mixed = BoundaryCondition::Mixed(BTreeMap::new());
        assert!(matches!(energy(&single, &mixed), Err(Error::MissingBoundarySpin(_))));
    }

    #[test]
    fn flip_changes_energy_by_local_field() {
        let g = geom(Region::rhombus(ORIGIN, 1));
        let model = IsingModel::new(g.clone(), BoundaryCondition::Plus, p(1.0)).unwrap();
        for code in 0..1 << 9 {
            let cfg = SpinConfig::from_code(g.clone(), code);
            let e0 = energy(&cfg, &BoundaryCondition::Plus).unwrap();
            for i in 0..9 {
                let x = g.site(i);
                let e1 = energy(&cfg.flipped(x).unwrap(), &BoundaryCondition::Plus).unwrap();
                let want = 2.0 * cfg.spins()[i] as f64 * model.local_field(cfg.spins(), i) as f64;
                assert_eq!(e1 - e0, want);
            }
        }
    }

    #[test]
    fn rate_values() {
        let g = geom(Region::rhombus(ORIGIN, 1));
        let cfg = SpinConfig::constant(g.clone(), 1);
        let r = rate(&cfg, ORIGIN, &BoundaryCondition::Free, p(0.15)).unwrap();
        assert!((r - 1.0 / (1.0 + 1.8f64.exp())).abs() < 1e-15);
        assert!((r - 0.14185).abs() < 1e-5);
        let half = SpinConfig::from_fn(g, |x| if x.k > 0 || (x.k == 0 && x.m >= 0) { 1 } else { -1 });
        // centre has three + and three − neighbours
        let r = rate(&half, ORIGIN, &BoundaryCondition::Free, p(0.7)).unwrap();
        assert_eq!(r, 0.5);
        assert!(rate(&half, SiteCoord::new(5, 0), &BoundaryCondition::Free, p(0.7)).is_err());
    }

    #[test]
    fn small_exact_measures() {
        let mu = exact_measure(Region::rhombus(ORIGIN, 0), &BoundaryCondition::Free, p(0.9)).unwrap();
        assert!((mu.probs()[0] - 0.5).abs() < 1e-15);
        let mu = exact_measure(Region::rhombus(ORIGIN, 1), &BoundaryCondition::Free, p(1e-12)).unwrap();
        assert!(mu.probs().iter().all(|q| (q - 1.0 / 512.0).abs() < 1e-9));
        let two = Region::explicit([ORIGIN, SiteCoord::new(1, 0)]);
        let mu = exact_measure(two, &BoundaryCondition::Free, p(0.5)).unwrap();
        // weight exp(β η_x η_y) per configuration
        let z = 2.0 * 0.5f64.exp() + 2.0 * (-0.5f64).exp();
        assert!((mu.probs()[3] - 0.5f64.exp() / z).abs() < 1e-15);
        assert!((mu.probs()[3] - 0.36552).abs() < 1e-5);
        let big = Region::rhombus(ORIGIN, 2);
        assert!(matches!(exact_measure(big, &BoundaryCondition::Free, p(0.1)), Err(Error::RegionTooLarge { .. })));
    }

    #[test]
    fn text_round_trip() {
        let g = geom(Region::rhombus(ORIGIN, 1));
        let cfg = SpinConfig::from_code(g.clone(), 0b101_100_011);
        let text = cfg.to_text();
        assert_eq!(text, "++-\n--+\n+-+\n");
        assert_eq!(SpinConfig::from_text(g.clone(), &text).unwrap(), cfg);
        assert!(SpinConfig::from_text(g, "++").is_err());
    }

    #[test]
    fn method_parsing() {
        assert_eq!("exact".parse::<SamplerMethod>().unwrap(), SamplerMethod::Exact);
        assert_eq!("burnin:7".parse::<SamplerMethod>().unwrap(), SamplerMethod::Burnin { sweeps: 7 });
        assert!(matches!("metropolis".parse::<SamplerMethod>(), Err(Error::UnknownMethod(_))));
    }

    #[test]
    fn exact_sampler_single_site() {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(7);
        let model = Arc::new(IsingModel::for_region(Region::rhombus(ORIGIN, 0), BoundaryCondition::Free, p(0.3)).unwrap());
        let mut s = Sampler::new(model, SamplerMethod::Exact).unwrap();
        let n = 100_000;
        let plus = (0..n).filter(|_| s.sample(&mut rng).spins()[0] == 1).count();
        assert!((plus as f64 / n as f64 - 0.5).abs() < 0.005);
    }
}
