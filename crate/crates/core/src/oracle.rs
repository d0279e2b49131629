//! Exact computations on tiny regions: the Glauber generator, the pair law
//! of `(σ_0, σ_t)` and exhaustive checks of identities and inequalities
//! satisfied by it.
//!
//! States are indexed by [`SpinConfig::code`](crate::ising::SpinConfig::code): bit `i` set means site `i` is `+`.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::dynamics::{self, Constants, RingSchedule};
use crate::error::{Error, Result};
use crate::events::EventSpec;
use crate::ising::{encode, BoundaryCondition, IsingModel, ModelParams, Sampler, SamplerMethod};
use crate::lattice::{Geometry, Region, SiteCoord, ORIGIN};

/// Largest region for the generator and the pair law.
pub const ORACLE_CAP: usize = 12;
/// Largest region for the coupled generator (it lives on `4^|V|` states).
pub const COUPLED_CAP: usize = 10;
/// Largest region for exhaustive finite-energy checks.
pub const FINITE_ENERGY_CAP: usize = 7;

const UNIF_TOL: f64 = 1e-13;
/// Uniformization is split into steps of at most this many expected jumps.
const UNIF_CHUNK: f64 = 32.0;

/// Jump rates of the heat-bath dynamics on one small region.
///
/// Only the `|V|` single-flip rates of each state are stored; the full matrix
/// `Q[η, η^x] = c_x(η)`, `Q[η, η] = −Σ_x c_x(η)` is available through [`entry`](Self::entry).
#[derive(Clone, Debug)]
pub struct GeneratorMatrix {
    model: Arc<IsingModel>,
    nsites: usize,
    /// `rates[η·|V| + x] = c_x(η)`.
    rates: Vec<f64>,
    exit: Vec<f64>,
    lambda: f64,
    mu: Vec<f64>,
}

impl GeneratorMatrix {
    pub fn new(model: Arc<IsingModel>) -> Result<Self> {
        let n = model.geometry().len();
        if n > ORACLE_CAP {
            return Err(Error::RegionTooLarge { sites: n, cap: ORACLE_CAP });
        }
        let nstates = 1usize << n;
        let mut rates = Vec::with_capacity(nstates * n);
        let mut exit = Vec::with_capacity(nstates);
        let mut spins = vec![0i8; n];
        for code in 0..nstates {
            decode(code, &mut spins);
            let mut e = 0.0;
            for i in 0..n {
                let c = model.rate_at(&spins, i);
                rates.push(c);
                e += c;
            }
            exit.push(e);
        }
        let lambda = exit.iter().cloned().fold(0.0, f64::max);
        let mu = model.exact_measure()?.probs().to_vec();
        let gen = Self { model, nsites: n, rates, exit, lambda, mu };
        gen.check_detailed_balance()?;
        Ok(gen)
    }

    pub fn for_region(region: Region, bc: BoundaryCondition, p: ModelParams) -> Result<Self> {
        let n = region.len();
        if n > ORACLE_CAP {
            return Err(Error::RegionTooLarge { sites: n, cap: ORACLE_CAP });
        }
        Self::new(Arc::new(IsingModel::for_region(region, bc, p)?))
    }

    fn check_detailed_balance(&self) -> Result<()> {
        for eta in 0..self.nstates() {
            for x in 0..self.nsites {
                let psi = eta ^ (1 << x);
                let a = self.mu[eta] * self.rate(eta, x);
                let b = self.mu[psi] * self.rate(psi, x);
                if (a - b).abs() > 1e-12 * a.max(b).max(f64::MIN_POSITIVE) {
                    return Err(Error::InvalidParameter(format!("detailed balance fails at states {eta}, {psi}")));
                }
            }
        }
        Ok(())
    }

    pub fn model(&self) -> &Arc<IsingModel> {
        &self.model
    }

    pub fn geometry(&self) -> &Arc<Geometry> {
        self.model.geometry()
    }

    pub fn nsites(&self) -> usize {
        self.nsites
    }

    pub fn nstates(&self) -> usize {
        1 << self.nsites
    }

    /// The stationary measure μ.
    pub fn measure(&self) -> &[f64] {
        &self.mu
    }

    /// `c_x(η)`.
    #[inline]
    pub fn rate(&self, eta: usize, x: usize) -> f64 {
        self.rates[eta * self.nsites + x]
    }

    /// Largest exit rate, the uniformization constant.
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn entry(&self, eta: usize, psi: usize) -> f64 {
        if eta == psi {
            return -self.exit[eta];
        }
        let d = eta ^ psi;
        if d.is_power_of_two() {
            self.rate(eta, d.trailing_zeros() as usize)
        } else {
            0.0
        }
    }

    /// The dense matrix, row-major.
    pub fn dense(&self) -> Vec<f64> {
        let n = self.nstates();
        let mut q = vec![0.0; n * n];
        for eta in 0..n {
            q[eta * n + eta] = -self.exit[eta];
            for x in 0..self.nsites {
                q[eta * n + (eta ^ (1 << x))] = self.rate(eta, x);
            }
        }
        q
    }

    /// `(Q v)(η) = Σ_x c_x(η)(v(η^x) − v(η))`.
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; v.len()];
        self.apply_into(v, &mut out);
        out
    }

    fn apply_into(&self, v: &[f64], out: &mut [f64]) {
        for (eta, o) in out.iter_mut().enumerate() {
            let mut s = 0.0;
            for x in 0..self.nsites {
                s += self.rate(eta, x) * (v[eta ^ (1 << x)] - v[eta]);
            }
            *o = s;
        }
    }

    /// `μQ`, which vanishes by stationarity.
    pub fn left_apply_measure(&self) -> Vec<f64> {
        let mut out: Vec<f64> = (0..self.nstates()).map(|e| -self.mu[e] * self.exit[e]).collect();
        for eta in 0..self.nstates() {
            for x in 0..self.nsites {
                out[eta ^ (1 << x)] += self.mu[eta] * self.rate(eta, x);
            }
        }
        out
    }

    /// `P_t v = e^{tQ} v` by uniformization.
    pub fn evolve(&self, v: &[f64], t: f64) -> Result<Vec<f64>> {
        if t < 0.0 || t.is_nan() {
            return Err(Error::NegativeTime(t));
        }
        let lam = self.lambda;
        let mut cur = v.to_vec();
        if t == 0.0 || lam == 0.0 {
            return Ok(cur);
        }
        let steps = (lam * t / UNIF_CHUNK).ceil().max(1.0) as usize;
        let dt = t / steps as f64;
        let mut term = vec![0.0; v.len()];
        let mut qv = vec![0.0; v.len()];
        for _ in 0..steps {
            uniformize_step(&mut cur, &mut term, &mut qv, lam * dt, |src, dst| {
                self.apply_into(src, dst);
                for (d, s) in dst.iter_mut().zip(src) {
                    *d = s + *d / lam;
                }
            });
        }
        Ok(cur)
    }

    /// `E_μ[f(σ) g(σ_t)]`.
    pub fn correlation(&self, f: &[f64], g: &[f64], t: f64) -> Result<f64> {
        let ptg = self.evolve(g, t)?;
        Ok((0..self.nstates()).map(|e| self.mu[e] * f[e] * ptg[e]).sum())
    }

    /// A crude power-iteration estimate of the spectral gap.
    pub fn spectral_gap_estimate(&self, iters: usize) -> f64 {
        let n = self.nstates();
        let lam = 2.0 * self.lambda.max(f64::MIN_POSITIVE);
        // a fixed non-constant start vector
        let mut v: Vec<f64> = (0..n).map(|e| ((e as f64 + 1.0) * 0.618_033_988_75).fract() - 0.5).collect();
        let mut q = vec![0.0; n];
        let mut ratio = 1.0;
        for _ in 0..iters {
            let mean: f64 = (0..n).map(|e| self.mu[e] * v[e]).sum();
            v.iter_mut().for_each(|x| *x -= mean);
            let norm = (0..n).map(|e| self.mu[e] * v[e] * v[e]).sum::<f64>().sqrt();
            if norm == 0.0 {
                return f64::INFINITY;
            }
            v.iter_mut().for_each(|x| *x /= norm);
            self.apply_into(&v, &mut q);
            let kv: Vec<f64> = v.iter().zip(&q).map(|(a, b)| a + b / lam).collect();
            ratio = (0..n).map(|e| self.mu[e] * v[e] * kv[e]).sum::<f64>();
            v = kv;
        }
        lam * (1.0 - ratio)
    }
}

/// One uniformization step `v ← Σ_k Pois(a; k) K^k v` with `a ≤ UNIF_CHUNK`.
fn uniformize_step(cur: &mut [f64], term: &mut Vec<f64>, next: &mut Vec<f64>, a: f64, kmul: impl Fn(&[f64], &mut [f64])) {
    term.copy_from_slice(cur);
    let mut w = (-a).exp();
    let mut mass = w;
    cur.iter_mut().zip(term.iter()).for_each(|(c, t)| *c = w * t);
    let mut k = 0usize;
    while 1.0 - mass > UNIF_TOL && k < 10_000 {
        k += 1;
        kmul(term, next);
        std::mem::swap(term, next);
        w *= a / k as f64;
        mass += w;
        cur.iter_mut().zip(term.iter()).for_each(|(c, t)| *c += w * t);
    }
}

#[inline]
fn decode(code: usize, spins: &mut [i8]) {
    for (i, s) in spins.iter_mut().enumerate() {
        *s = if code >> i & 1 == 1 { 1 } else { -1 };
    }
}

/// Hamming distance between two states.
#[inline]
pub fn state_distance(a: usize, b: usize) -> u32 {
    (a ^ b).count_ones()
}

/// The function `η ↦ f(η)` tabulated over all states.
pub fn tabulate(geom: &Arc<Geometry>, mut f: impl FnMut(&[i8]) -> f64) -> Vec<f64> {
    let n = geom.len();
    let mut spins = vec![0i8; n];
    (0..1usize << n)
        .map(|c| {
            decode(c, &mut spins);
            f(&spins)
        })
        .collect()
}

/// Indicator of an event, tabulated.
pub fn event_indicator(geom: &Arc<Geometry>, event: &EventSpec) -> Result<Vec<f64>> {
    let ev = event.compile(geom)?;
    let mut scratch = Default::default();
    Ok(tabulate(geom, |s| if ev.eval(s, &mut scratch) { 1.0 } else { 0.0 }))
}

/// The joint law `P[η, ψ] = μ(η)(e^{tQ})[η, ψ]` of `(σ_0, σ_t)`.
#[derive(Clone, Debug)]
pub struct PairLaw {
    t: f64,
    nstates: usize,
    table: Vec<f64>,
}

impl PairLaw {
    pub fn new(gen: &GeneratorMatrix, t: f64) -> Result<Self> {
        if t < 0.0 || t.is_nan() {
            return Err(Error::NegativeTime(t));
        }
        let n = gen.nstates();
        let cols: Vec<Vec<f64>> = (0..n)
            .into_par_iter()
            .map(|psi| {
                let mut e = vec![0.0; n];
                e[psi] = 1.0;
                gen.evolve(&e, t)
            })
            .collect::<Result<_>>()?;
        let mut table = vec![0.0; n * n];
        for (psi, col) in cols.iter().enumerate() {
            for eta in 0..n {
                table[eta * n + psi] = gen.mu[eta] * col[eta];
            }
        }
        Ok(Self { t, nstates: n, table })
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn nstates(&self) -> usize {
        self.nstates
    }

    #[inline]
    pub fn get(&self, eta: usize, psi: usize) -> f64 {
        self.table[eta * self.nstates + psi]
    }

    pub fn table(&self) -> &[f64] {
        &self.table
    }

    pub fn total(&self) -> f64 {
        self.table.iter().sum()
    }

    pub fn row_marginal(&self) -> Vec<f64> {
        self.table.chunks(self.nstates).map(|r| r.iter().sum()).collect()
    }

    pub fn col_marginal(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.nstates];
        for row in self.table.chunks(self.nstates) {
            m.iter_mut().zip(row).for_each(|(a, b)| *a += b);
        }
        m
    }

    pub fn max_asymmetry(&self) -> f64 {
        let n = self.nstates;
        let mut worst: f64 = 0.0;
        for a in 0..n {
            for b in a + 1..n {
                worst = worst.max((self.get(a, b) - self.get(b, a)).abs());
            }
        }
        worst
    }

    /// `E[f(σ_0) g(σ_t)]`.
    pub fn bilinear(&self, f: &[f64], g: &[f64]) -> f64 {
        self.table
            .chunks(self.nstates)
            .zip(f)
            .map(|(row, fe)| if *fe == 0.0 { 0.0 } else { fe * row.iter().zip(g).map(|(p, gv)| p * gv).sum::<f64>() })
            .sum()
    }

    /// `E[F(σ_0, σ_t)]` for an arbitrary pair function.
    pub fn expectation(&self, mut f: impl FnMut(usize, usize) -> f64) -> f64 {
        let n = self.nstates;
        let mut s = 0.0;
        for eta in 0..n {
            for psi in 0..n {
                let p = self.get(eta, psi);
                if p != 0.0 {
                    s += p * f(eta, psi);
                }
            }
        }
        s
    }
}

pub fn pair_law(gen: &GeneratorMatrix, t: f64) -> Result<PairLaw> {
    PairLaw::new(gen, t)
}

/// The pair law rescaled by distance, `P[η, ψ] / t^{d(η,ψ)}`, for tiny `t`
/// where the unscaled entries underflow.
#[derive(Clone, Debug)]
pub struct ScaledPairLaw {
    t: f64,
    nstates: usize,
    table: Vec<f64>,
}

impl ScaledPairLaw {
    /// Largest time accepted; the series below is truncated for small `Λt`.
    pub const MAX_T: f64 = 1e-3;

    pub fn new(gen: &GeneratorMatrix, t: f64) -> Result<Self> {
        if t < 0.0 || t.is_nan() {
            return Err(Error::NegativeTime(t));
        }
        if t > Self::MAX_T || t == 0.0 {
            return Err(Error::InvalidParameter(format!("scaled pair law needs 0 < t ≤ {}, got {t}", Self::MAX_T)));
        }
        let n = gen.nstates();
        let lam = gen.lambda;
        let kmax = gen.nsites + 40;
        // e^{tQ} = e^{−Λt} Σ_k t^k B^k/k! with B = ΛI + Q ≥ 0 entrywise; B^k[η,ψ]
        // vanishes for k < d(η,ψ), so dividing by t^d leaves a convergent series.
        let cols: Vec<Vec<f64>> = (0..n)
            .into_par_iter()
            .map(|psi| {
                let mut w = vec![0.0; n];
                w[psi] = 1.0;
                let mut acc = vec![0.0; n];
                let mut next = vec![0.0; n];
                for k in 0..=kmax {
                    for eta in 0..n {
                        if w[eta] != 0.0 {
                            let d = state_distance(eta, psi) as i32;
                            acc[eta] += w[eta] * t.powi(k as i32 - d);
                        }
                    }
                    for eta in 0..n {
                        let mut s = (lam - gen.exit[eta]) * w[eta];
                        for x in 0..gen.nsites {
                            s += gen.rate(eta, x) * w[eta ^ (1 << x)];
                        }
                        next[eta] = s / (k + 1) as f64;
                    }
                    std::mem::swap(&mut w, &mut next);
                }
                acc
            })
            .collect();
        let damp = (-lam * t).exp();
        let mut table = vec![0.0; n * n];
        for (psi, col) in cols.iter().enumerate() {
            for eta in 0..n {
                table[eta * n + psi] = gen.mu[eta] * damp * col[eta];
            }
        }
        Ok(Self { t, nstates: n, table })
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    #[inline]
    pub fn get(&self, eta: usize, psi: usize) -> f64 {
        self.table[eta * self.nstates + psi]
    }

    /// `ln P[η, ψ]`, finite even where `P` underflows.
    pub fn ln_prob(&self, eta: usize, psi: usize) -> f64 {
        self.get(eta, psi).ln() + state_distance(eta, psi) as f64 * self.t.ln()
    }
}

/// Both sides of the differential formula at one time.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DiffFormulaReport {
    pub t: f64,
    /// `−d/dt E[f(σ)g(σ_t)]` from `−Σ μ f Q P_t g`.
    pub lhs: f64,
    /// `½Σ_x E[c_x(σ)(f(σ^x)−f(σ))(g(σ_t^{(x)})−g(σ_t))]` from the coupled generator.
    pub rhs: f64,
    /// The same right side through the Dirichlet form, `½Σ μ c (∇f)(∇P_t g)`.
    pub rhs_dirichlet: f64,
    pub residual: f64,
}

/// The pair generator: both copies use the same clock and uniform, so at a
/// ring of `x` both flip at rate `min(c_a, c_b)` and only one at `|c_a − c_b|`.
pub struct CoupledGenerator<'a> {
    gen: &'a GeneratorMatrix,
    lambda: f64,
}

impl<'a> CoupledGenerator<'a> {
    pub fn new(gen: &'a GeneratorMatrix) -> Result<Self> {
        if gen.nsites > COUPLED_CAP {
            return Err(Error::RegionTooLarge { sites: gen.nsites, cap: COUPLED_CAP });
        }
        // exit rate of (a, b) is Σ_x max(c_x(a), c_x(b)) ≤ |V|
        Ok(Self { gen, lambda: gen.nsites as f64 })
    }

    #[inline]
    fn split(&self, s: usize) -> (usize, usize) {
        (s & ((1 << self.gen.nsites) - 1), s >> self.gen.nsites)
    }

    /// `(Q₂ v)(a, b)`.
    fn apply_into(&self, v: &[f64], out: &mut [f64]) {
        let n = self.gen.nsites;
        for (s, o) in out.iter_mut().enumerate() {
            let (a, b) = self.split(s);
            let mut acc = 0.0;
            for x in 0..n {
                let (ca, cb) = (self.gen.rate(a, x), self.gen.rate(b, x));
                let both = ca.min(cb);
                let bit = 1 << x;
                acc += both * (v[s ^ bit ^ (bit << n)] - v[s]);
                if ca > cb {
                    acc += (ca - cb) * (v[s ^ bit] - v[s]);
                } else if cb > ca {
                    acc += (cb - ca) * (v[s ^ (bit << n)] - v[s]);
                }
            }
            *o = acc;
        }
    }

    /// `e^{tQ₂} v` on the pair space.
    pub fn evolve(&self, v: &[f64], t: f64) -> Result<Vec<f64>> {
        if t < 0.0 || t.is_nan() {
            return Err(Error::NegativeTime(t));
        }
        let lam = self.lambda;
        let mut cur = v.to_vec();
        if t == 0.0 || lam == 0.0 {
            return Ok(cur);
        }
        let steps = (lam * t / UNIF_CHUNK).ceil().max(1.0) as usize;
        let dt = t / steps as f64;
        let mut term = vec![0.0; v.len()];
        let mut q = vec![0.0; v.len()];
        for _ in 0..steps {
            uniformize_step(&mut cur, &mut term, &mut q, lam * dt, |src, dst| {
                self.apply_into(src, dst);
                for (d, s) in dst.iter_mut().zip(src) {
                    *d = s + *d / lam;
                }
            });
        }
        Ok(cur)
    }
}

pub fn check_differential_formula(gen: &GeneratorMatrix, f: &[f64], g: &[f64], t: f64) -> Result<DiffFormulaReport> {
    let n = gen.nsites;
    let ns = gen.nstates();
    let ptg = gen.evolve(g, t)?;
    let qptg = gen.apply(&ptg);
    let lhs = -(0..ns).map(|e| gen.mu[e] * f[e] * qptg[e]).sum::<f64>();

    let coupled = CoupledGenerator::new(gen)?;
    // h(a, b) = g(b) − g(a); (e^{tQ₂}h)(η, η^x) = E[g(σ_t^{(x)}) − g(σ_t)]
    let h: Vec<f64> = (0..ns * ns).map(|s| g[s >> n] - g[s & (ns - 1)]).collect();
    let u = coupled.evolve(&h, t)?;
    let mut rhs = 0.0;
    let mut rhs_dirichlet = 0.0;
    for eta in 0..ns {
        for x in 0..n {
            let flipped = eta ^ (1 << x);
            let w = gen.mu[eta] * gen.rate(eta, x) * (f[flipped] - f[eta]);
            if w != 0.0 {
                rhs += w * u[eta | (flipped << n)];
                rhs_dirichlet += w * (ptg[flipped] - ptg[eta]);
            }
        }
    }
    rhs *= 0.5;
    rhs_dirichlet *= 0.5;
    Ok(DiffFormulaReport { t, lhs, rhs, rhs_dirichlet, residual: (lhs - rhs).abs() })
}

/// An increasing function of the pair, `F(η, ψ) = a(η)·b(ψ)` with `a, b` increasing and nonnegative.
#[derive(Clone, Debug)]
pub struct PairFunction {
    pub name: String,
    pub first: Vec<f64>,
    pub second: Vec<f64>,
}

/// The fixed catalog of increasing functions of a single configuration:
/// single-spin indicators, all-plus on each edge and on the whole region,
/// and the `+` crossing of every 3×3 sub-rhombus the region contains.
pub fn increasing_catalog(geom: &Arc<Geometry>) -> Vec<(String, Vec<f64>)> {
    let n = geom.len();
    let mut out = Vec::new();
    for i in 0..n {
        out.push((format!("plus{}", geom.site(i)), tabulate(geom, |s| (s[i] > 0) as u8 as f64)));
    }
    for i in 0..n {
        for &j in geom.nbrs(i) {
            let j = j as usize;
            if j < n && j > i {
                out.push((format!("plus{}{}", geom.site(i), geom.site(j)), tabulate(geom, |s| (s[i] > 0 && s[j] > 0) as u8 as f64)));
            }
        }
    }
    out.push(("allplus".to_string(), tabulate(geom, |s| s.iter().all(|&x| x > 0) as u8 as f64)));
    for i in 0..n {
        let c = geom.site(i);
        if geom.region().covers(&Region::rhombus(c, 1)) {
            if let Ok(ind) = event_indicator(geom, &EventSpec::Cross { n: 1, center: c }) {
                out.push((format!("cross1@{c}"), ind));
            }
        }
    }
    out
}

/// Lifts each single-time function to the pair in three ways: at time 0,
/// at time t, and at both times.
pub fn pair_catalog(geom: &Arc<Geometry>) -> Vec<PairFunction> {
    let ones = vec![1.0; 1 << geom.len()];
    let mut out = Vec::new();
    for (name, f) in increasing_catalog(geom) {
        out.push(PairFunction { name: format!("{name}@0"), first: f.clone(), second: ones.clone() });
        out.push(PairFunction { name: format!("{name}@t"), first: ones.clone(), second: f.clone() });
        out.push(PairFunction { name: format!("{name}@0,t"), first: f.clone(), second: f });
    }
    out
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FkgReport {
    pub t: f64,
    pub pairs_checked: usize,
    pub min_covariance: f64,
    pub worst: (String, String),
}

/// Minimum of `E[FG] − E[F]E[G]` over all catalog pairs.
pub fn check_dynamical_fkg(law: &PairLaw, catalog: &[PairFunction]) -> FkgReport {
    let mean: Vec<f64> = catalog.iter().map(|f| law.bilinear(&f.first, &f.second)).collect();
    let pairs: Vec<(usize, usize)> = (0..catalog.len()).flat_map(|i| (i..catalog.len()).map(move |j| (i, j))).collect();
    let (min_cov, wi, wj) = pairs
        .par_iter()
        .map(|&(i, j)| {
            let a: Vec<f64> = catalog[i].first.iter().zip(&catalog[j].first).map(|(x, y)| x * y).collect();
            let b: Vec<f64> = catalog[i].second.iter().zip(&catalog[j].second).map(|(x, y)| x * y).collect();
            (law.bilinear(&a, &b) - mean[i] * mean[j], i, j)
        })
        .reduce(|| (f64::INFINITY, 0, 0), |x, y| if y.0 < x.0 { y } else { x });
    FkgReport { t: law.t, pairs_checked: pairs.len(), min_covariance: min_cov, worst: (catalog[wi].name.clone(), catalog[wj].name.clone()) }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FiniteEnergyReport {
    pub t: f64,
    pub checks: usize,
    pub violations: usize,
    /// Minimum of `ln(lhs) − ln(rhs)` over single-coordinate modifications.
    pub worst_slack_single: f64,
    /// The same over simultaneous modifications of both coordinates.
    pub worst_slack_both: f64,
}

/// Exhaustively checks, for every `(η, ψ, x, s)`,
/// `P(η, ψ^x) ≥ √c_FE t^δ P(η, ψ)` with `δ = ψ(x)η(x)`, its mirror on the first
/// coordinate, and `P(η^{x←s}, ψ^{x←s}) ≥ c_FE P(η, ψ)`.
pub fn check_finite_energy(gen: &GeneratorMatrix, consts: &Constants, t: f64) -> Result<FiniteEnergyReport> {
    if gen.nsites > FINITE_ENERGY_CAP {
        return Err(Error::RegionTooLarge { sites: gen.nsites, cap: FINITE_ENERGY_CAP });
    }
    if t > consts.tau * (1.0 + 1e-12) {
        return Err(Error::BeyondHorizon { until: t, horizon: consts.tau });
    }
    let law = ScaledPairLaw::new(gen, t)?;
    let n = gen.nsites;
    let ns = gen.nstates();
    let ln_t = t.ln();
    let half_ln_c = 0.5 * consts.ln_c_fe;
    let tol = 1e-9;
    let (mut checks, mut violations) = (0usize, 0usize);
    let (mut worst1, mut worst2) = (f64::INFINITY, f64::INFINITY);
    for eta in 0..ns {
        for psi in 0..ns {
            let base = law.ln_prob(eta, psi);
            for x in 0..n {
                let bit = 1 << x;
                let delta = if (eta ^ psi) & bit == 0 { 1.0 } else { -1.0 };
                let rhs = half_ln_c + delta * ln_t + base;
                for lhs in [law.ln_prob(eta, psi ^ bit), law.ln_prob(eta ^ bit, psi)] {
                    let slack = lhs - rhs;
                    worst1 = worst1.min(slack);
                    checks += 1;
                    violations += (slack < -tol) as usize;
                }
                for s in [0, bit] {
                    let e2 = (eta & !bit) | s;
                    let p2 = (psi & !bit) | s;
                    let slack = law.ln_prob(e2, p2) - (consts.ln_c_fe + base);
                    worst2 = worst2.min(slack);
                    checks += 1;
                    violations += (slack < -tol) as usize;
                }
            }
        }
    }
    Ok(FiniteEnergyReport { t, checks, violations, worst_slack_single: worst1, worst_slack_both: worst2 })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NonMarkovReport {
    pub beta: f64,
    pub t: f64,
    /// `P(x = (+,+) | y = (+,−), z = (−,−))`.
    pub lhs: f64,
    /// `P(x = (+,+) | y = (+,−), z = (+,+))`.
    pub rhs: f64,
    pub margin: f64,
}

pub const NON_MARKOV_BETA: f64 = 3.0;
pub const NON_MARKOV_T: f64 = 0.01;

/// The two conditionals on the path `x − y − z` (free boundary), whose
/// difference witnesses that `(σ, σ_t)` is not spatially Markov.
pub fn pair_non_markov(beta: f64, t: f64) -> Result<NonMarkovReport> {
    let sites = [SiteCoord::new(0, 0), SiteCoord::new(1, 0), SiteCoord::new(2, 0)];
    let region = Region::explicit(sites.iter().copied());
    let geom = Arc::new(Geometry::new(region));
    let model = Arc::new(IsingModel::new(geom.clone(), BoundaryCondition::Free, ModelParams::new(beta)?)?);
    let gen = GeneratorMatrix::new(model)?;
    let law = PairLaw::new(&gen, t)?;
    let idx: Vec<usize> = sites.iter().map(|s| geom.index_of(*s).unwrap()).collect();
    let (ix, iy, iz) = (idx[0], idx[1], idx[2]);
    let spin = |code: usize, i: usize| if code >> i & 1 == 1 { 1 } else { -1 };
    let cond = |zs: (i8, i8)| {
        let mut num = 0.0;
        let mut den = 0.0;
        for eta in 0..8 {
            for psi in 0..8 {
                if (spin(eta, iy), spin(psi, iy)) == (1, -1) && (spin(eta, iz), spin(psi, iz)) == zs {
                    let p = law.get(eta, psi);
                    den += p;
                    if (spin(eta, ix), spin(psi, ix)) == (1, 1) {
                        num += p;
                    }
                }
            }
        }
        num / den
    };
    let lhs = cond((-1, -1));
    let rhs = cond((1, 1));
    Ok(NonMarkovReport { beta, t, lhs, rhs, margin: lhs - rhs })
}

pub fn check_pair_not_markov() -> Result<NonMarkovReport> {
    pair_non_markov(NON_MARKOV_BETA, NON_MARKOV_T)
}

/// Margins over a `(β, t)` grid, for locating the regime where the witness holds.
pub fn scan_pair_not_markov(betas: &[f64], ts: &[f64]) -> Result<Vec<NonMarkovReport>> {
    let mut out = Vec::new();
    for &b in betas {
        for &t in ts {
            out.push(pair_non_markov(b, t)?);
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ShapeReport {
    pub grid: Vec<f64>,
    pub rho: Vec<f64>,
    /// `(∫f dμ)²`, the limit and lower bound of ρ.
    pub floor: f64,
    /// `min_t ρ(t) − floor`.
    pub floor_slack: f64,
    /// Largest forward difference `ρ(t_{i+1}) − ρ(t_i)`; non-positive when ρ is non-increasing.
    pub max_increase: f64,
    /// Smallest change between consecutive divided-difference slopes; non-negative when ρ is convex.
    pub min_slope_increase: f64,
}

/// Evaluates `ρ(t) = E[f(σ)f(σ_t)]` on an increasing grid and measures its shape.
pub fn check_correlation_shape(gen: &GeneratorMatrix, f: &[f64], grid: &[f64]) -> Result<ShapeReport> {
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter("time grid must be strictly increasing".into()));
    }
    let rho: Vec<f64> = grid.iter().map(|&t| gen.correlation(f, f, t)).collect::<Result<_>>()?;
    let mean: f64 = (0..gen.nstates()).map(|e| gen.mu[e] * f[e]).sum();
    let floor = mean * mean;
    let floor_slack = rho.iter().map(|r| r - floor).fold(f64::INFINITY, f64::min);
    let max_increase = rho.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max);
    let slopes: Vec<f64> = (0..rho.len().saturating_sub(1)).map(|i| (rho[i + 1] - rho[i]) / (grid[i + 1] - grid[i])).collect();
    let min_slope_increase = slopes.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
    Ok(ShapeReport { grid: grid.to_vec(), rho, floor, floor_slack, max_increase, min_slope_increase })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CauchySchwarzReport {
    pub t: f64,
    pub pairs_checked: usize,
    /// Minimum of `max{P(A at 0 and t), P(B at 0 and t)} − P(A at 0, B at t)`.
    pub min_slack: f64,
}

/// `P(σ ∈ A, σ_t ∈ B) ≤ max{P(σ, σ_t ∈ A), P(σ, σ_t ∈ B)}` over all pairs of catalog events.
pub fn check_cauchy_schwarz(law: &PairLaw, events: &[Vec<f64>]) -> CauchySchwarzReport {
    let diag: Vec<f64> = events.iter().map(|a| law.bilinear(a, a)).collect();
    let mut min_slack = f64::INFINITY;
    let mut pairs = 0;
    for (i, a) in events.iter().enumerate() {
        for (j, b) in events.iter().enumerate() {
            let mixed = law.bilinear(a, b);
            min_slack = min_slack.min(diag[i].max(diag[j]) - mixed);
            pairs += 1;
        }
    }
    CauchySchwarzReport { t: law.t, pairs_checked: pairs, min_slack }
}

/// Catalog events for the Cauchy–Schwarz check: the increasing catalog plus complements.
pub fn event_catalog(geom: &Arc<Geometry>) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::new();
    for (_, f) in increasing_catalog(geom) {
        out.push(f.iter().map(|x| 1.0 - x).collect());
        out.push(f);
    }
    out
}

/// Regions of at most 9 sites used by the exactness checks.
pub fn test_catalog() -> Vec<(String, Region, BoundaryCondition)> {
    let s = SiteCoord::new;
    let explicit = |v: &[(i32, i32)]| Region::explicit(v.iter().map(|&(k, m)| s(k, m)));
    vec![
        ("single".into(), explicit(&[(0, 0)]), BoundaryCondition::Free),
        ("pair".into(), explicit(&[(0, 0), (1, 0)]), BoundaryCondition::Free),
        ("path3".into(), explicit(&[(0, 0), (1, 0), (2, 0)]), BoundaryCondition::Free),
        ("triangle".into(), explicit(&[(0, 0), (1, 0), (0, 1)]), BoundaryCondition::Plus),
        ("plus5".into(), explicit(&[(0, 0), (1, 0), (0, 1), (-1, 0), (0, -1)]), BoundaryCondition::Free),
        ("hex7".into(), Region::explicit(std::iter::once(ORIGIN).chain(ORIGIN.neighbors())), BoundaryCondition::Minus),
        ("rhombus1".into(), Region::rhombus(ORIGIN, 1), BoundaryCondition::Free),
    ]
}

/// One structured oracle result.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CheckRecord {
    pub check: String,
    pub params: serde_json::Value,
    pub worst_slack: f64,
    pub pass: bool,
}

/// Runs the exactness checks over [`test_catalog`] at inverse temperature `beta`.
/// `t_small` is the small time used alongside `t = 0.1` (typically τ).
pub fn run_exactness_suite(beta: f64, t_small: f64) -> Result<Vec<CheckRecord>> {
    let p = ModelParams::new(beta)?;
    let mut out = Vec::new();
    for (name, region, bc) in test_catalog() {
        let gen = GeneratorMatrix::for_region(region.clone(), bc.clone(), p)?;
        let geom = gen.geometry().clone();
        let params = |t: f64| serde_json::json!({ "region": name, "sites": region.len(), "bc": format!("{bc:?}"), "beta": beta, "t": t });
        for t in [0.1, t_small] {
            let law = PairLaw::new(&gen, t)?;
            let mu = gen.measure();
            let row = law.row_marginal();
            let col = law.col_marginal();
            let marg = (0..gen.nstates()).map(|e| (row[e] - mu[e]).abs().max((col[e] - mu[e]).abs())).fold(0.0, f64::max);
            out.push(CheckRecord { check: "pair_marginals".into(), params: params(t), worst_slack: 1e-10 - marg, pass: marg <= 1e-10 });
            let asym = law.max_asymmetry();
            out.push(CheckRecord { check: "pair_symmetry".into(), params: params(t), worst_slack: 1e-10 - asym, pass: asym <= 1e-10 });

            let cat = increasing_catalog(&geom);
            let all_plus = &cat.iter().find(|(n, _)| n == "allplus").unwrap().1;
            let single = &cat[0].1;
            let mut worst = 0.0f64;
            for (f, g) in [(all_plus, all_plus), (single, all_plus), (all_plus, single)] {
                worst = worst.max(check_differential_formula(&gen, f, g, t)?.residual);
            }
            out.push(CheckRecord {
                check: "differential_formula".into(),
                params: params(t),
                worst_slack: 1e-8 - worst,
                pass: worst <= 1e-8,
            });

            let fkg = check_dynamical_fkg(&law, &pair_catalog(&geom));
            out.push(CheckRecord {
                check: "dynamical_fkg".into(),
                params: params(t),
                worst_slack: fkg.min_covariance + 1e-12,
                pass: fkg.min_covariance >= -1e-12,
            });

            let cs = check_cauchy_schwarz(&law, &event_catalog(&geom));
            out.push(CheckRecord {
                check: "cauchy_schwarz".into(),
                params: params(t),
                worst_slack: cs.min_slack + 1e-12,
                pass: cs.min_slack >= -1e-12,
            });
        }
        let grid = [0.0, 0.05, 0.1, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0];
        let cat = increasing_catalog(&geom);
        let mut worst = f64::INFINITY;
        for (_, f) in &cat {
            let r = check_correlation_shape(&gen, f, &grid)?;
            worst = worst.min(r.floor_slack + 1e-12).min(1e-12 - r.max_increase).min(r.min_slope_increase + 1e-12);
        }
        out.push(CheckRecord { check: "correlation_shape".into(), params: params(f64::NAN), worst_slack: worst, pass: worst >= 0.0 });
    }
    Ok(out)
}

/// Monte Carlo pair frequencies against the exact pair law.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConsistencyReport {
    pub t: f64,
    pub trials: u64,
    pub cells_checked: usize,
    /// Largest `|count − expected| / σ` over cells with expected count ≥ 10.
    pub max_z: f64,
    pub cells_beyond_3sigma: usize,
    /// Pearson statistic over the checked cells plus one pooled remainder cell.
    pub chi_square: f64,
    pub dof: usize,
    pub chi_square_p: f64,
}

/// Draws `trials` pairs with the simulator (exact equilibrium sampling) and
/// compares cell counts with the pair law.
pub fn mc_pair_consistency(gen: &GeneratorMatrix, t: f64, trials: u64, seed: u64) -> Result<ConsistencyReport> {
    let law = PairLaw::new(gen, t)?;
    let ns = gen.nstates();
    let model = gen.model.clone();
    let geom = gen.geometry().clone();
    let blocks = 64u64;
    let counts: Vec<u64> = (0..blocks)
        .into_par_iter()
        .map(|b| -> Result<Vec<u64>> {
            let mut rng = crate::harness::seeding::replica_rng(seed, b);
            let mut sampler = Sampler::new(model.clone(), SamplerMethod::Exact)?;
            let mut sched = RingSchedule::empty(geom.clone(), t)?;
            let mut a = vec![0i8; geom.len()];
            let mut counts = vec![0u64; ns * ns];
            let lo = trials * b / blocks;
            let hi = trials * (b + 1) / blocks;
            for _ in lo..hi {
                sampler.sample_into(&mut rng, &mut a);
                let eta = encode(&a);
                sched.regenerate(t, &mut rng)?;
                dynamics::evolve(&model, &mut a, sched.rings());
                let psi = encode(&a);
                counts[eta * ns + psi] += 1;
            }
            Ok(counts)
        })
        .try_reduce(
            || vec![0u64; ns * ns],
            |mut x, y| {
                x.iter_mut().zip(&y).for_each(|(a, b)| *a += b);
                Ok(x)
            },
        )?;
    let mut max_z: f64 = 0.0;
    let mut checked = 0usize;
    let mut beyond = 0;
    let mut chi2 = 0.0;
    let (mut rest_obs, mut rest_exp) = (0.0, 0.0);
    for (cell, &c) in counts.iter().enumerate() {
        let p = law.table()[cell];
        let expected = p * trials as f64;
        if expected >= 10.0 {
            let sd = (trials as f64 * p * (1.0 - p)).sqrt();
            let z = (c as f64 - expected).abs() / sd;
            max_z = max_z.max(z);
            checked += 1;
            beyond += (z > 3.0) as usize;
            chi2 += (c as f64 - expected).powi(2) / expected;
        } else {
            rest_obs += c as f64;
            rest_exp += expected;
        }
    }
    let mut dof = checked.saturating_sub(1);
    if rest_exp >= 5.0 {
        chi2 += (rest_obs - rest_exp).powi(2) / rest_exp;
        dof += 1;
    }
    let chi_square_p = if dof == 0 { 1.0 } else { ChiSquared::new(dof as f64).map(|d| d.sf(chi2)).unwrap_or(f64::NAN) };
    Ok(ConsistencyReport { t, trials, cells_checked: checked, max_z, cells_beyond_3sigma: beyond, chi_square: chi2, dof, chi_square_p })
}
