//! Percolation events on spin configurations: crossings, arm events,
//! separation events, pivotality and interface counting.
//!
//! An [`EventSpec`] is compiled once against a [`Geometry`] and then
//! evaluated on raw spin slices with a reusable [`EventScratch`].

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::dsu::Dsu;
use crate::error::{Error, Result};
use crate::ising::SpinConfig;
use crate::lattice::{Geometry, Region, SiteCoord, NO_SITE, ORIGIN};

/// Site-level predicates addressable by name.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum RawPredicate {
    AllPlus,
    AllMinus,
    PlusAt(SiteCoord),
    MinusAt(SiteCoord),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum EventSpec {
    Cross {
        n: u32,
        center: SiteCoord,
    },
    CrossRect {
        m: u32,
        n: u32,
        center: SiteCoord,
    },
    Arm1 {
        m: u32,
        n: u32,
        center: SiteCoord,
    },
    Arm4 {
        m: u32,
        n: u32,
        center: SiteCoord,
    },
    Arm3Half {
        m: u32,
        n: u32,
        center: SiteCoord,
    },
    Arm4Sep {
        m: u32,
        n: u32,
        center: SiteCoord,
    },
    /// The six neighbours of the center alternate `+,−,+,−` cyclically.
    Ring4 {
        center: SiteCoord,
    },
    SepDelta {
        n: u32,
        delta: f64,
        center: SiteCoord,
    },
    Pivotal {
        x: SiteCoord,
        inner: Box<EventSpec>,
    },
    Raw(RawPredicate),
}

impl EventSpec {
    pub fn cross(n: u32) -> Self {
        EventSpec::Cross { n, center: ORIGIN }
    }

    pub fn arm4(m: u32, n: u32) -> Self {
        EventSpec::Arm4 { m, n, center: ORIGIN }
    }

    pub fn arm1(m: u32, n: u32) -> Self {
        EventSpec::Arm1 { m, n, center: ORIGIN }
    }

    /// The event behind `α_n`: `A_4(1, n)` for `n ≥ 2` and the neighbour-ring
    /// alternation for `n = 1`.
    pub fn alpha(n: u32) -> Self {
        if n <= 1 {
            EventSpec::Ring4 { center: ORIGIN }
        } else {
            EventSpec::arm4(1, n)
        }
    }

    pub fn pivotal(x: SiteCoord, inner: EventSpec) -> Self {
        EventSpec::Pivotal { x, inner: Box::new(inner) }
    }

    /// Same event, recentered at `center`; pivot sites move along.
    pub fn centered_at(&self, center: SiteCoord) -> Self {
        let mut e = self.clone();
        match &mut e {
            EventSpec::Cross { center: c, .. }
            | EventSpec::CrossRect { center: c, .. }
            | EventSpec::Arm1 { center: c, .. }
            | EventSpec::Arm4 { center: c, .. }
            | EventSpec::Arm3Half { center: c, .. }
            | EventSpec::Arm4Sep { center: c, .. }
            | EventSpec::Ring4 { center: c }
            | EventSpec::SepDelta { center: c, .. } => *c = center,
            EventSpec::Pivotal { x, inner } => {
                let shift = center.relative_to(inner.center());
                *x = x.translate(shift);
                **inner = inner.centered_at(center);
            }
            EventSpec::Raw(RawPredicate::PlusAt(x)) | EventSpec::Raw(RawPredicate::MinusAt(x)) => *x = center,
            EventSpec::Raw(_) => {}
        }
        e
    }

    pub fn center(&self) -> SiteCoord {
        match self {
            EventSpec::Cross { center, .. }
            | EventSpec::CrossRect { center, .. }
            | EventSpec::Arm1 { center, .. }
            | EventSpec::Arm4 { center, .. }
            | EventSpec::Arm3Half { center, .. }
            | EventSpec::Arm4Sep { center, .. }
            | EventSpec::Ring4 { center }
            | EventSpec::SepDelta { center, .. } => *center,
            EventSpec::Pivotal { inner, .. } => inner.center(),
            EventSpec::Raw(RawPredicate::PlusAt(x)) | EventSpec::Raw(RawPredicate::MinusAt(x)) => *x,
            EventSpec::Raw(_) => ORIGIN,
        }
    }

    /// Outer scale `n`, the half-side of the smallest centred rhombus the event lives in.
    pub fn outer_scale(&self) -> u32 {
        match self {
            EventSpec::Cross { n, .. }
            | EventSpec::Arm1 { n, .. }
            | EventSpec::Arm4 { n, .. }
            | EventSpec::Arm3Half { n, .. }
            | EventSpec::Arm4Sep { n, .. }
            | EventSpec::SepDelta { n, .. } => *n,
            EventSpec::CrossRect { m, n, .. } => (*m).max(*n),
            EventSpec::Ring4 { .. } => 1,
            EventSpec::Pivotal { inner, .. } => inner.outer_scale(),
            EventSpec::Raw(_) => 0,
        }
    }

    /// Sites the event depends on; `None` for events of the whole frame.
    pub fn support(&self) -> Option<Region> {
        match self {
            EventSpec::Cross { n, center } | EventSpec::SepDelta { n, center, .. } => Some(Region::rhombus(*center, *n)),
            EventSpec::CrossRect { m, n, center } => Some(Region::elongated(*center, *m, *n)),
            EventSpec::Arm1 { m, n, center } | EventSpec::Arm4 { m, n, center } | EventSpec::Arm4Sep { m, n, center } => {
                if n <= m {
                    Some(Region::explicit(std::iter::empty()))
                } else {
                    Region::annulus(*center, *m, *n).ok()
                }
            }
            EventSpec::Arm3Half { m, n, center } => {
                if n <= m {
                    Some(Region::explicit(std::iter::empty()))
                } else {
                    Region::half_plane_annulus(*center, *m, *n).ok()
                }
            }
            EventSpec::Ring4 { center } => Some(Region::explicit(center.neighbors())),
            EventSpec::Pivotal { x, inner } => {
                let mut sites: std::collections::BTreeSet<SiteCoord> = inner.support()?.sites().into_iter().collect();
                sites.insert(*x);
                Some(Region::explicit(sites))
            }
            EventSpec::Raw(RawPredicate::PlusAt(x)) | EventSpec::Raw(RawPredicate::MinusAt(x)) => Some(Region::explicit([*x])),
            EventSpec::Raw(_) => None,
        }
    }

    /// The conventional sampling frame `Λ_{2n}` around the event's center.
    pub fn default_frame(&self) -> Region {
        Region::rhombus(self.center(), 2 * self.outer_scale())
    }

    /// Checks the definitional constraints. `Ok(false)` marks a degenerate
    /// scale (`n ≤ m` for arm events), which evaluates to false.
    pub fn validate(&self) -> Result<bool> {
        match self {
            EventSpec::Cross { .. } | EventSpec::Ring4 { .. } | EventSpec::Raw(_) => Ok(true),
            EventSpec::CrossRect { m, n, .. } => {
                if *m == 0 || *n == 0 {
                    return Err(Error::BadScales(format!("crossrect needs m, n ≥ 1, got m={m}, n={n}")));
                }
                Ok(true)
            }
            EventSpec::Arm1 { m, n, .. } | EventSpec::Arm4 { m, n, .. } | EventSpec::Arm3Half { m, n, .. } => {
                if *m == 0 {
                    return Err(Error::BadScales(format!("arm events need m ≥ 1, got m={m}")));
                }
                Ok(n > m)
            }
            EventSpec::Arm4Sep { m, n, .. } => {
                if *m == 0 || *n < 100 || *n < 4 * *m {
                    return Err(Error::BadScales(format!("arm4sep needs n ≥ 100, n ≥ 4m, m ≥ 1; got m={m}, n={n}")));
                }
                Ok(true)
            }
            EventSpec::SepDelta { n, delta, .. } => {
                if !(*delta > 0.0 && *delta < 0.01) || (*n as f64) < 1.0 / delta || *n < 100 {
                    return Err(Error::BadScales(format!("sepdelta needs δ ∈ (0, 1/100), n ≥ max(100, 1/δ); got n={n}, δ={delta}")));
                }
                Ok(true)
            }
            EventSpec::Pivotal { inner, .. } => inner.validate(),
        }
    }

    /// Compiles against `geom`; degenerate scales compile to a constant
    /// false with a logged warning.
    pub fn compile(&self, geom: &Arc<Geometry>) -> Result<CompiledEvent> {
        if !self.validate()? {
            log::warn!("event {self} has degenerate scales; it evaluates to false");
            return Ok(CompiledEvent { kind: Kind::Constant(false), nsites: geom.len() });
        }
        let kind = match self {
            EventSpec::Cross { n, center } => Kind::Cross(CrossKernel::new(geom, &Region::rhombus(*center, *n), *center, *n as i32)?),
            EventSpec::CrossRect { m, n, center } => {
                Kind::Cross(CrossKernel::new(geom, &Region::elongated(*center, *m, *n), *center, *m as i32)?)
            }
            EventSpec::Arm1 { m, n, center } => Kind::Arm(ArmKernel::annulus(geom, *center, *m, *n, ArmMode::OnePlus)?),
            EventSpec::Arm4 { m, n, center } => Kind::Arm(ArmKernel::annulus(geom, *center, *m, *n, ArmMode::Cyclic4)?),
            EventSpec::Arm3Half { m, n, center } => Kind::Arm(ArmKernel::half_plane(geom, *center, *m, *n)?),
            EventSpec::Ring4 { center } => Kind::Arm(ArmKernel::annulus(geom, *center, 1, 1, ArmMode::Cyclic4)?),
            EventSpec::Arm4Sep { m, n, center } => Kind::Sep4(Box::new(Sep4Kernel::new(geom, *center, *m, *n)?)),
            EventSpec::SepDelta { n, delta, center } => Kind::SepDelta(SepDeltaKernel::new(geom, *center, *n, *delta)?),
            EventSpec::Pivotal { x, inner } => {
                let inner = inner.compile(geom)?;
                match geom.index_of(*x) {
                    Some(i) => Kind::Pivotal(i, Box::new(inner)),
                    None => Kind::Constant(false),
                }
            }
            EventSpec::Raw(p) => match p {
                RawPredicate::AllPlus => Kind::AllSign(1),
                RawPredicate::AllMinus => Kind::AllSign(-1),
                RawPredicate::PlusAt(x) | RawPredicate::MinusAt(x) => {
                    let i = geom.index_of(*x).ok_or(Error::RegionTooSmall { needed: format!("site {x}") })?;
                    Kind::SiteSign(i, if matches!(p, RawPredicate::PlusAt(_)) { 1 } else { -1 })
                }
            },
        };
        Ok(CompiledEvent { kind, nsites: geom.len() })
    }

    /// Compiles against the configuration's geometry and evaluates once.
    pub fn holds(&self, cfg: &SpinConfig) -> Result<bool> {
        let ev = self.compile(cfg.geometry())?;
        Ok(ev.eval(cfg.spins(), &mut EventScratch::default()))
    }
}

fn fmt_center(f: &mut fmt::Formatter<'_>, c: SiteCoord) -> fmt::Result {
    if c != ORIGIN {
        write!(f, ",c={},{}", c.k, c.m)?;
    }
    Ok(())
}

impl fmt::Display for EventSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EventSpec::Cross { n, center } => {
                write!(f, "cross:n={n}")?;
                fmt_center(f, *center)
            }
            EventSpec::CrossRect { m, n, center } => {
                write!(f, "crossrect:m={m},n={n}")?;
                fmt_center(f, *center)
            }
            EventSpec::Arm1 { m, n, center } => {
                write!(f, "arm1:m={m},n={n}")?;
                fmt_center(f, *center)
            }
            EventSpec::Arm4 { m, n, center } => {
                write!(f, "arm4:m={m},n={n}")?;
                fmt_center(f, *center)
            }
            EventSpec::Arm3Half { m, n, center } => {
                write!(f, "arm3h:m={m},n={n}")?;
                fmt_center(f, *center)
            }
            EventSpec::Arm4Sep { m, n, center } => {
                write!(f, "arm4sep:m={m},n={n}")?;
                fmt_center(f, *center)
            }
            EventSpec::Ring4 { center } => {
                write!(f, "ring4")?;
                if *center != ORIGIN {
                    write!(f, ":c={},{}", center.k, center.m)?;
                }
                Ok(())
            }
            EventSpec::SepDelta { n, delta, center } => {
                write!(f, "sepdelta:n={n},delta={delta}")?;
                fmt_center(f, *center)
            }
            EventSpec::Pivotal { x, inner } => write!(f, "piv:x={},{};{inner}", x.k, x.m),
            EventSpec::Raw(RawPredicate::AllPlus) => write!(f, "raw:allplus"),
            EventSpec::Raw(RawPredicate::AllMinus) => write!(f, "raw:allminus"),
            EventSpec::Raw(RawPredicate::PlusAt(x)) => write!(f, "raw:plus@{},{}", x.k, x.m),
            EventSpec::Raw(RawPredicate::MinusAt(x)) => write!(f, "raw:minus@{},{}", x.k, x.m),
        }
    }
}

/// `key=value` pairs; a bare token continues the previous value, so
/// `x=0,0` reads as one pair.
fn parse_params(s: &str) -> Result<Vec<(String, String)>> {
    let mut out: Vec<(String, String)> = Vec::new();
    for tok in s.split(',').map(str::trim).filter(|t| !t.is_empty()) {
        match tok.split_once('=') {
            Some((k, v)) => out.push((k.trim().to_string(), v.trim().to_string())),
            None => match out.last_mut() {
                Some((_, v)) => {
                    v.push(',');
                    v.push_str(tok);
                }
                None => return Err(Error::Parse(format!("expected key=value, got `{tok}`"))),
            },
        }
    }
    Ok(out)
}

struct Params {
    pairs: Vec<(String, String)>,
    ctx: String,
}

impl Params {
    fn take(&mut self, key: &str) -> Option<String> {
        let i = self.pairs.iter().position(|(k, _)| k == key)?;
        Some(self.pairs.remove(i).1)
    }

    fn num<T: FromStr>(&mut self, key: &str) -> Result<T>
    where
        T::Err: fmt::Display,
    {
        let v = self.take(key).ok_or_else(|| Error::Parse(format!("`{}` needs `{key}=`", self.ctx)))?;
        v.parse().map_err(|e| Error::Parse(format!("`{}`: {key}={v}: {e}", self.ctx)))
    }

    fn center(&mut self) -> Result<SiteCoord> {
        match self.take("c") {
            Some(v) => v.parse(),
            None => Ok(ORIGIN),
        }
    }

    fn done(self) -> Result<()> {
        if let Some((k, _)) = self.pairs.first() {
            return Err(Error::Parse(format!("`{}`: unknown parameter `{k}`", self.ctx)));
        }
        Ok(())
    }
}

impl FromStr for EventSpec {
    type Err = Error;

    /// Parses `cross:n=32`, `crossrect:m=16,n=32`, `arm1:m=1,n=32`,
    /// `arm4:m=1,n=32`, `arm3h:m=1,n=32`, `arm4sep:m=4,n=100`,
    /// `sepdelta:n=200,delta=0.005`, `ring4`, `piv:x=0,0;cross:n=32`, `raw:allplus`,
    /// `raw:allminus`, `raw:plus@k,m`, `raw:minus@k,m`. Any geometric
    /// event takes an optional center `c=k,m`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "ring4" {
            return Ok(EventSpec::Ring4 { center: ORIGIN });
        }
        let (kind, rest) = s.split_once(':').ok_or_else(|| Error::Parse(format!("event `{s}` lacks `kind:`")))?;
        if kind == "piv" {
            let (head, inner) = rest.split_once(';').ok_or_else(|| Error::Parse(format!("`{s}`: expected `piv:x=k,m;<event>`")))?;
            let mut p = Params { pairs: parse_params(head)?, ctx: s.to_string() };
            let x: SiteCoord = p.take("x").ok_or_else(|| Error::Parse(format!("`{s}` needs `x=`")))?.parse()?;
            p.done()?;
            return Ok(EventSpec::Pivotal { x, inner: Box::new(inner.parse()?) });
        }
        if kind == "raw" {
            return match rest.trim() {
                "allplus" => Ok(EventSpec::Raw(RawPredicate::AllPlus)),
                "allminus" => Ok(EventSpec::Raw(RawPredicate::AllMinus)),
                r => {
                    if let Some(x) = r.strip_prefix("plus@") {
                        Ok(EventSpec::Raw(RawPredicate::PlusAt(x.parse()?)))
                    } else if let Some(x) = r.strip_prefix("minus@") {
                        Ok(EventSpec::Raw(RawPredicate::MinusAt(x.parse()?)))
                    } else {
                        Err(Error::Parse(format!("unknown raw predicate `{r}`")))
                    }
                }
            };
        }
        let mut p = Params { pairs: parse_params(rest)?, ctx: s.to_string() };
        let center = p.center()?;
        let ev = match kind {
            "cross" => EventSpec::Cross { n: p.num("n")?, center },
            "crossrect" => EventSpec::CrossRect { m: p.num("m")?, n: p.num("n")?, center },
            "arm1" => EventSpec::Arm1 { m: p.num("m")?, n: p.num("n")?, center },
            "arm4" => EventSpec::Arm4 { m: p.num("m")?, n: p.num("n")?, center },
            "arm3h" => EventSpec::Arm3Half { m: p.num("m")?, n: p.num("n")?, center },
            "arm4sep" => EventSpec::Arm4Sep { m: p.num("m")?, n: p.num("n")?, center },
            "ring4" => EventSpec::Ring4 { center },
            "sepdelta" => EventSpec::SepDelta { n: p.num("n")?, delta: p.num("delta")?, center },
            other => return Err(Error::Parse(format!("unknown event kind `{other}`"))),
        };
        p.done()?;
        Ok(ev)
    }
}

/// Per-thread buffers for event evaluation.
#[derive(Clone, Debug, Default)]
pub struct EventScratch {
    dsu: Dsu,
    seq: Vec<i8>,
    flip: Vec<i8>,
}

#[derive(Clone, Debug)]
pub struct CompiledEvent {
    kind: Kind,
    nsites: usize,
}

#[derive(Clone, Debug)]
enum Kind {
    Constant(bool),
    Cross(CrossKernel),
    Arm(ArmKernel),
    Sep4(Box<Sep4Kernel>),
    SepDelta(SepDeltaKernel),
    Pivotal(usize, Box<CompiledEvent>),
    AllSign(i8),
    SiteSign(usize, i8),
}

impl CompiledEvent {
    pub fn eval(&self, spins: &[i8], scratch: &mut EventScratch) -> bool {
        debug_assert_eq!(spins.len(), self.nsites);
        match &self.kind {
            Kind::Constant(b) => *b,
            Kind::Cross(k) => k.eval(spins, &mut scratch.dsu),
            Kind::Arm(k) => k.eval(spins, scratch),
            Kind::Sep4(k) => k.eval(spins, scratch),
            Kind::SepDelta(k) => k.eval(spins, scratch),
            Kind::Pivotal(i, inner) => {
                let mut flip = std::mem::take(&mut scratch.flip);
                flip.clear();
                flip.extend_from_slice(spins);
                flip[*i] = -flip[*i];
                let a = inner.eval(spins, scratch);
                let b = inner.eval(&flip, scratch);
                scratch.flip = flip;
                a != b
            }
            Kind::AllSign(s) => spins.iter().all(|x| x == s),
            Kind::SiteSign(i, s) => spins[*i] == *s,
        }
    }

    pub fn holds(&self, spins: &[i8]) -> bool {
        self.eval(spins, &mut EventScratch::default())
    }
}

fn require_sites(geom: &Geometry, region: &Region) -> Result<Vec<u32>> {
    region
        .sites()
        .into_iter()
        .map(|x| geom.index_of(x).map(|i| i as u32).ok_or_else(|| Error::RegionTooSmall { needed: region.to_string() }))
        .collect()
}

/// Left-right `+` crossing of a rhombus-shaped domain.
#[derive(Clone, Debug)]
struct CrossKernel {
    sites: Vec<u32>,
    /// Domain-local neighbour pairs `(a, b)` with `a < b`.
    edges: Vec<(u32, u32)>,
    left: Vec<u32>,
    right: Vec<u32>,
}

impl CrossKernel {
    fn new(geom: &Geometry, domain: &Region, center: SiteCoord, half: i32) -> Result<Self> {
        let sites = require_sites(geom, domain)?;
        let local = local_map(geom, &sites);
        let mut edges = Vec::new();
        let mut left = Vec::new();
        let mut right = Vec::new();
        for (a, &gi) in sites.iter().enumerate() {
            let x = geom.site(gi as usize);
            let dk = x.k - center.k;
            if dk == -half {
                left.push(a as u32);
            }
            if dk == half {
                right.push(a as u32);
            }
            for &j in geom.nbrs(gi as usize) {
                if j != NO_SITE && local[j as usize] != NO_SITE && local[j as usize] > a as u32 {
                    edges.push((a as u32, local[j as usize]));
                }
            }
        }
        Ok(Self { sites, edges, left, right })
    }

    fn eval(&self, spins: &[i8], dsu: &mut Dsu) -> bool {
        let n = self.sites.len() as u32;
        let (vl, vr) = (n, n + 1);
        dsu.reset(self.sites.len() + 2);
        let s = |a: u32| spins[self.sites[a as usize] as usize];
        for &a in &self.left {
            if s(a) > 0 {
                dsu.union(a, vl);
            }
        }
        for &a in &self.right {
            if s(a) > 0 {
                dsu.union(a, vr);
            }
        }
        if self.left.iter().all(|&a| s(a) < 0) || self.right.iter().all(|&a| s(a) < 0) {
            return false;
        }
        for &(a, b) in &self.edges {
            if s(a) > 0 && s(b) > 0 {
                dsu.union(a, b);
            }
        }
        dsu.same(vl, vr)
    }
}

fn local_map(geom: &Geometry, sites: &[u32]) -> Vec<u32> {
    let mut local = vec![NO_SITE; geom.len()];
    for (a, &gi) in sites.iter().enumerate() {
        local[gi as usize] = a as u32;
    }
    local
}

/// The ring `∂Λ_r(c)` in counter-clockwise order, starting at `(r, −r)`.
pub fn ring(c: SiteCoord, r: u32) -> Vec<SiteCoord> {
    if r == 0 {
        return vec![c];
    }
    let r = r as i32;
    let mut out = Vec::with_capacity(8 * r as usize);
    out.extend((-r..r).map(|l| SiteCoord::new(c.k + r, c.m + l)));
    out.extend((-r + 1..=r).rev().map(|k| SiteCoord::new(c.k + k, c.m + r)));
    out.extend((-r + 1..=r).rev().map(|l| SiteCoord::new(c.k - r, c.m + l)));
    out.extend((-r..r).map(|k| SiteCoord::new(c.k + k, c.m - r)));
    out
}

/// Start sites for arms leaving `Λ_{r−1}(c)`: the sites of `ring(c, r)`
/// adjacent to it, in the same counter-clockwise order. For `r ≥ 2` this
/// drops the obtuse corners `c ± (r, r)`, which sit behind the edge joining
/// their two ring neighbours; for `r = 1` it is the six neighbours of `c`.
pub fn inner_face(c: SiteCoord, r: u32) -> Vec<SiteCoord> {
    if r == 1 {
        return c.neighbors().to_vec();
    }
    let ri = r as i32;
    ring(c, r).into_iter().filter(|x| *x != SiteCoord::new(c.k + ri, c.m + ri) && *x != SiteCoord::new(c.k - ri, c.m - ri)).collect()
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum ArmMode {
    /// Some `+` inner site reaches the target.
    OnePlus,
    /// Four alternating arms around a cyclic inner sequence.
    Cyclic4,
    /// Three alternating arms along a linear inner sequence.
    Linear3,
}

/// Same-sign connectivity from an ordered inner sequence to a target set,
/// inside a domain.
#[derive(Clone, Debug)]
struct ArmKernel {
    sites: Vec<u32>,
    edges: Vec<(u32, u32)>,
    target: Vec<u32>,
    inner: Vec<u32>,
    mode: ArmMode,
}

impl ArmKernel {
    fn build(geom: &Geometry, domain: &[SiteCoord], inner: &[SiteCoord], target: &[SiteCoord], mode: ArmMode) -> Result<Self> {
        let sites: Vec<u32> = domain
            .iter()
            .map(|x| geom.index_of(*x).map(|i| i as u32).ok_or_else(|| Error::RegionTooSmall { needed: format!("site {x}") }))
            .collect::<Result<_>>()?;
        let local = local_map(geom, &sites);
        let to_local = |x: &SiteCoord| -> u32 { geom.index_of(*x).map_or(NO_SITE, |i| local[i]) };
        let mut edges = Vec::new();
        for (a, &gi) in sites.iter().enumerate() {
            for &j in geom.nbrs(gi as usize) {
                if j != NO_SITE && local[j as usize] != NO_SITE && local[j as usize] > a as u32 {
                    edges.push((a as u32, local[j as usize]));
                }
            }
        }
        let inner: Vec<u32> = inner.iter().map(to_local).collect();
        let target: Vec<u32> = target.iter().map(to_local).collect();
        debug_assert!(inner.iter().chain(&target).all(|a| *a != NO_SITE));
        Ok(Self { sites, edges, target, inner, mode })
    }

    /// Arms in `Λ_n(c) \ Λ_{m−1}(c)` starting on [`inner_face`]; for `m = 1`
    /// only `c` is removed.
    fn annulus(geom: &Geometry, c: SiteCoord, m: u32, n: u32, mode: ArmMode) -> Result<Self> {
        let domain = Region::annulus(c, m, n)?.sites();
        Self::build(geom, &domain, &inner_face(c, m), &ring(c, n), mode)
    }

    fn half_plane(geom: &Geometry, c: SiteCoord, m: u32, n: u32) -> Result<Self> {
        let domain = Region::half_plane_annulus(c, m, n)?.sites();
        let upper = |x: &SiteCoord| x.m >= c.m;
        // walk the inner face from (m,0) counter-clockwise to (−m,0)
        let mut inner = inner_face(c, m);
        let first = inner.iter().position(|x| *x == SiteCoord::new(c.k + m as i32, c.m)).expect("(m,0) is on the face");
        inner.rotate_left(first);
        inner.retain(upper);
        let target: Vec<_> = ring(c, n).into_iter().filter(upper).collect();
        Self::build(geom, &domain, &inner, &target, ArmMode::Linear3)
    }

    fn connect(&self, spins: &[i8], dsu: &mut Dsu) {
        let n = self.sites.len() as u32;
        dsu.reset(self.sites.len() + 2);
        let s = |a: u32| spins[self.sites[a as usize] as usize];
        for &(a, b) in &self.edges {
            if s(a) == s(b) {
                dsu.union(a, b);
            }
        }
        for &a in &self.target {
            dsu.union(a, if s(a) > 0 { n } else { n + 1 });
        }
    }

    fn eval(&self, spins: &[i8], scratch: &mut EventScratch) -> bool {
        let n = self.sites.len() as u32;
        let s = |a: u32| spins[self.sites[a as usize] as usize];
        if self.mode == ArmMode::Cyclic4 {
            // cheap rejection: the inner sequence itself must alternate
            if count_changes(self.inner.iter().map(|&a| s(a)), true) < 4 {
                return false;
            }
        }
        self.connect(spins, &mut scratch.dsu);
        let dsu = &mut scratch.dsu;
        let seq = &mut scratch.seq;
        seq.clear();
        for &a in &self.inner {
            let sign = s(a);
            let v = if sign > 0 { n } else { n + 1 };
            if dsu.same(a, v) {
                seq.push(sign);
            }
        }
        match self.mode {
            ArmMode::OnePlus => seq.iter().any(|x| *x > 0),
            ArmMode::Cyclic4 => count_changes(seq.iter().copied(), true) >= 4,
            ArmMode::Linear3 => count_changes(seq.iter().copied(), false) >= 2,
        }
    }

    /// Inner-sequence sites of sign `sign` whose cluster reaches the target.
    fn reaching(&self, spins: &[i8], sign: i8, dsu: &mut Dsu) -> Vec<bool> {
        self.connect(spins, dsu);
        let n = self.sites.len() as u32;
        let v = if sign > 0 { n } else { n + 1 };
        self.inner.iter().map(|&a| spins[self.sites[a as usize] as usize] == sign && dsu.same(a, v)).collect()
    }
}

/// Sign changes between consecutive entries, including the wrap-around when `cyclic`.
fn count_changes(it: impl Iterator<Item = i8>, cyclic: bool) -> usize {
    let mut first = None;
    let mut prev = None;
    let mut changes = 0;
    for s in it {
        if first.is_none() {
            first = Some(s);
        }
        if prev.is_some_and(|p| p != s) {
            changes += 1;
        }
        prev = Some(s);
    }
    if cyclic && first.is_some() && first != prev {
        changes += 1;
    }
    changes
}

/// `A_4(m,n)` plus, for each side midpoint `x_i`, an arm of the prescribed
/// sign avoiding the other three midpoint rhombi and landing near `x_i`.
#[derive(Clone, Debug)]
struct Sep4Kernel {
    base: ArmKernel,
    arms: Vec<(ArmKernel, i8)>,
}

impl Sep4Kernel {
    fn new(geom: &Geometry, c: SiteCoord, m: u32, n: u32) -> Result<Self> {
        let base = ArmKernel::annulus(geom, c, m, n, ArmMode::Cyclic4)?;
        let ni = n as i32;
        // left, bottom, right, top side midpoints
        let xs =
            [SiteCoord::new(c.k - ni, c.m), SiteCoord::new(c.k, c.m - ni), SiteCoord::new(c.k + ni, c.m), SiteCoord::new(c.k, c.m + ni)];
        let (forbid, land) = (n / 10, n / 20);
        let annulus = Region::annulus(c, m, n)?;
        let inner = inner_face(c, m);
        let outer = ring(c, n);
        let mut arms = Vec::new();
        for i in 0..4 {
            let avoid = |x: &SiteCoord| (0..4).any(|j| j != i && x.rhombus_radius(xs[j]) <= forbid);
            let domain: Vec<_> = annulus.sites().into_iter().filter(|x| !avoid(x)).collect();
            let start: Vec<_> = inner.iter().copied().filter(|x| !avoid(x)).collect();
            let target: Vec<_> = outer.iter().copied().filter(|x| x.rhombus_radius(xs[i]) <= land).collect();
            let sign = if i % 2 == 0 { 1 } else { -1 };
            arms.push((ArmKernel::build(geom, &domain, &start, &target, ArmMode::OnePlus)?, sign));
        }
        Ok(Self { base, arms })
    }

    fn eval(&self, spins: &[i8], scratch: &mut EventScratch) -> bool {
        if !self.base.eval(spins, scratch) {
            return false;
        }
        self.arms.iter().all(|(k, sign)| k.reaching(spins, *sign, &mut scratch.dsu).into_iter().any(|b| b))
    }
}

/// `Sep_n^δ`: no boundary site `x` of `Λ_n` has three alternating arms in
/// `Λ_n` from `∂Λ_{⌊16δn⌋}(x)` to `∂Λ_{⌊n/2⌋}(x)`.
#[derive(Clone, Debug)]
struct SepDeltaKernel {
    geom: Arc<Geometry>,
    center: SiteCoord,
    n: u32,
    r_in: u32,
    r_out: u32,
}

impl SepDeltaKernel {
    fn new(geom: &Arc<Geometry>, center: SiteCoord, n: u32, delta: f64) -> Result<Self> {
        require_sites(geom, &Region::rhombus(center, n))?;
        let r_in = ((16.0 * delta * n as f64).floor() as u32).max(1);
        let r_out = n / 2;
        Ok(Self { geom: geom.clone(), center, n, r_in, r_out })
    }

    /// The three-arm kernel around boundary site `x`.
    fn kernel_at(&self, x: SiteCoord) -> Result<ArmKernel> {
        let inside = |y: &SiteCoord| y.rhombus_radius(self.center) <= self.n;
        let domain: Vec<_> = Region::annulus(x, self.r_in, self.r_out)?.sites().into_iter().filter(inside).collect();
        // the inner ring minus Λ_n's exterior is an arc; start it right after a gap
        let ring_in = inner_face(x, self.r_in);
        let len = ring_in.len();
        let start = (0..len).find(|&i| !inside(&ring_in[i]) && inside(&ring_in[(i + 1) % len])).map_or(0, |i| i + 1);
        let inner: Vec<_> = (0..len).map(|j| ring_in[(start + j) % len]).filter(inside).collect();
        let target: Vec<_> = ring(x, self.r_out).into_iter().filter(inside).collect();
        ArmKernel::build(&self.geom, &domain, &inner, &target, ArmMode::Linear3)
    }

    fn eval(&self, spins: &[i8], scratch: &mut EventScratch) -> bool {
        for x in ring(self.center, self.n) {
            let k = self.kernel_at(x).expect("domain checked at compile time");
            if k.eval(spins, scratch) {
                return false;
            }
        }
        true
    }
}

fn check_arm_scales(m: u32, n: u32) -> Result<()> {
    if m < 1 || n < m {
        return Err(Error::BadScales(format!("need n ≥ m ≥ 1, got m={m}, n={n}")));
    }
    Ok(())
}

/// `+` left-right crossing of `Λ_n(center)`, center `o`.
pub fn crossing(cfg: &SpinConfig, n: u32) -> Result<bool> {
    EventSpec::cross(n).holds(cfg)
}

pub fn one_arm(cfg: &SpinConfig, m: u32, n: u32) -> Result<bool> {
    check_arm_scales(m, n)?;
    EventSpec::arm1(m, n).holds(cfg)
}

pub fn four_arm(cfg: &SpinConfig, m: u32, n: u32) -> Result<bool> {
    check_arm_scales(m, n)?;
    EventSpec::arm4(m, n).holds(cfg)
}

pub fn three_arm_half(cfg: &SpinConfig, m: u32, n: u32) -> Result<bool> {
    check_arm_scales(m, n)?;
    EventSpec::Arm3Half { m, n, center: ORIGIN }.holds(cfg)
}

pub fn four_arm_sep(cfg: &SpinConfig, m: u32, n: u32) -> Result<bool> {
    EventSpec::Arm4Sep { m, n, center: ORIGIN }.holds(cfg)
}

pub fn sep_delta(cfg: &SpinConfig, n: u32, delta: f64) -> Result<bool> {
    EventSpec::SepDelta { n, delta, center: ORIGIN }.holds(cfg)
}

pub fn pivotal(cfg: &SpinConfig, x: SiteCoord, inner: &EventSpec) -> Result<bool> {
    EventSpec::pivotal(x, inner.clone()).holds(cfg)
}

/// Number of `±` interfaces crossing `Λ_n \ Λ_{m−1}` from the inner hole to
/// the outside, traced along the dual hexagonal lattice.
pub fn interfaces(cfg: &SpinConfig, m: u32, n: u32) -> Result<usize> {
    check_arm_scales(m, n)?;
    let c = ORIGIN;
    let geom = cfg.geometry();
    let dom = Region::annulus(c, m, n)?;
    require_sites(geom, &dom)?;
    let spin = |x: SiteCoord| -> Option<i8> {
        if dom.contains(x) {
            cfg.get(x)
        } else {
            None
        }
    };
    // Edge ids: base site (k,l) and direction
    // 0: (k,l)-(k+1,l), 1: (k,l)-(k,l+1), 2: (k+1,l)-(k,l+1).
    let ni = n as i32;
    let lo = -ni - 2;
    let w = 2 * ni + 4;
    let eid = |k: i32, l: i32, d: usize| -> usize { (((l - lo) * w + (k - lo)) as usize) * 3 + d };
    let nedges = (w * w) as usize * 3;
    const NONE: usize = usize::MAX;
    const INNER: usize = usize::MAX - 1;
    const OUTER: usize = usize::MAX - 2;
    // each ± edge lies on two triangles; each contributes a partner edge or an end tag
    let mut link = vec![[NONE; 2]; nedges];
    let attach = |e: usize, v: usize, link: &mut Vec<[usize; 2]>| {
        let slot = if link[e][0] == NONE { 0 } else { 1 };
        link[e][slot] = v;
    };
    let is_pm = |a: SiteCoord, b: SiteCoord| matches!((spin(a), spin(b)), (Some(x), Some(y)) if x != y);
    for l in lo..=ni {
        for k in lo..=ni {
            let p = |dk, dl| SiteCoord::new(k + dk, l + dl);
            // up triangle (k,l),(k+1,l),(k,l+1) and down triangle (k+1,l),(k,l+1),(k+1,l+1);
            // edge ids listed for the vertex pairs (0,1), (0,2), (1,2)
            let tris = [
                ([p(0, 0), p(1, 0), p(0, 1)], [eid(k, l, 0), eid(k, l, 1), eid(k, l, 2)]),
                ([p(1, 0), p(0, 1), p(1, 1)], [eid(k, l, 2), eid(k + 1, l, 1), eid(k, l + 1, 0)]),
            ];
            for (v, es) in tris {
                let inside = v.iter().filter(|x| dom.contains(**x)).count();
                if inside < 2 {
                    continue;
                }
                let pairs = [(v[0], v[1]), (v[0], v[2]), (v[1], v[2])];
                let pm: Vec<usize> = (0..3).filter(|&i| is_pm(pairs[i].0, pairs[i].1)).map(|i| es[i]).collect();
                if inside == 3 && pm.len() == 2 {
                    attach(pm[0], pm[1], &mut link);
                    attach(pm[1], pm[0], &mut link);
                } else if inside == 2 && pm.len() == 1 {
                    let out = v.iter().find(|x| !dom.contains(**x)).unwrap();
                    let tag = if out.rhombus_radius(c) < m { INNER } else { OUTER };
                    attach(pm[0], tag, &mut link);
                }
            }
        }
    }
    let mut seen = vec![false; nedges];
    let mut count = 0;
    for e in 0..nedges {
        if seen[e] || link[e][0] == NONE {
            continue;
        }
        let is_end = |v: usize| v == INNER || v == OUTER;
        if !(is_end(link[e][0]) || is_end(link[e][1])) {
            continue;
        }
        // walk from this end to the other
        let first_tag = if is_end(link[e][0]) { link[e][0] } else { link[e][1] };
        let (mut prev, mut cur) = (first_tag, e);
        let last_tag;
        loop {
            seen[cur] = true;
            let next = if link[cur][0] == prev { link[cur][1] } else { link[cur][0] };
            if is_end(next) {
                last_tag = next;
                break;
            }
            prev = cur;
            cur = next;
        }
        if first_tag != last_tag {
            count += 1;
        }
    }
    Ok(count)
}
