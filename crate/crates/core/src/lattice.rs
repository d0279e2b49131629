//! Triangular-lattice geometry.
//!
//! A site `(k, m)` stands for the complex point `k + m·e^{iπ/3}`. Regions are
//! rhombi in these coordinates and a few shapes derived from them.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A lattice site `k + m·e^{iπ/3}`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SiteCoord {
    pub k: i32,
    pub m: i32,
}

pub const ORIGIN: SiteCoord = SiteCoord { k: 0, m: 0 };

/// Neighbor offsets in counter-clockwise order, starting east.
pub const NEIGHBOR_OFFSETS: [(i32, i32); 6] = [(1, 0), (0, 1), (-1, 1), (-1, 0), (0, -1), (1, -1)];

impl SiteCoord {
    pub const fn new(k: i32, m: i32) -> Self {
        Self { k, m }
    }

    pub fn neighbors(self) -> [SiteCoord; 6] {
        NEIGHBOR_OFFSETS.map(|(dk, dm)| SiteCoord::new(self.k + dk, self.m + dm))
    }

    pub fn is_adjacent(self, other: SiteCoord) -> bool {
        let d = (other.k - self.k, other.m - self.m);
        NEIGHBOR_OFFSETS.contains(&d)
    }

    pub fn embed(self) -> (f64, f64) {
        embed(self)
    }

    pub fn translate(self, by: SiteCoord) -> SiteCoord {
        SiteCoord::new(self.k + by.k, self.m + by.m)
    }

    /// Offset of `self` from `center`.
    pub fn relative_to(self, center: SiteCoord) -> SiteCoord {
        SiteCoord::new(self.k - center.k, self.m - center.m)
    }

    /// Smallest `n` with `self ∈ Λ_n(center)`.
    pub fn rhombus_radius(self, center: SiteCoord) -> u32 {
        let d = self.relative_to(center);
        d.k.unsigned_abs().max(d.m.unsigned_abs())
    }
}

impl fmt::Display for SiteCoord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.k, self.m)
    }
}

impl FromStr for SiteCoord {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().trim_start_matches('(').trim_end_matches(')');
        let mut it = s.split(',');
        let (Some(k), Some(m), None) = (it.next(), it.next(), it.next()) else {
            return Err(Error::Parse(format!("expected `k,m`, got `{s}`")));
        };
        let k = k.trim().parse().map_err(|e| Error::Parse(format!("site k `{k}`: {e}")))?;
        let m = m.trim().parse().map_err(|e| Error::Parse(format!("site m `{m}`: {e}")))?;
        Ok(SiteCoord::new(k, m))
    }
}

pub fn neighbors(x: SiteCoord) -> [SiteCoord; 6] {
    x.neighbors()
}

/// Euclidean position `(k + m/2, m·√3/2)`.
pub fn embed(x: SiteCoord) -> (f64, f64) {
    let (k, m) = (x.k as f64, x.m as f64);
    (k + 0.5 * m, m * 3f64.sqrt() / 2.0)
}

pub fn distance(a: SiteCoord, b: SiteCoord) -> f64 {
    let (ax, ay) = embed(a);
    let (bx, by) = embed(b);
    (ax - bx).hypot(ay - by)
}

/// A finite set of sites.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Region {
    /// `Λ_n(center)`: both coordinates within `n` of the center.
    Rhombus {
        center: SiteCoord,
        n: u32,
    },
    /// `Λ_{m,n}(center)`: `k` within `m`, `m`-coordinate within `n`.
    ElongatedRhombus {
        center: SiteCoord,
        m: u32,
        n: u32,
    },
    /// `Λ_n(center) \ Λ_{m-1}(center)`.
    Annulus {
        center: SiteCoord,
        m: u32,
        n: u32,
    },
    /// The annulus restricted to the closed upper half-plane through the center.
    HalfPlaneAnnulus {
        center: SiteCoord,
        m: u32,
        n: u32,
    },
    Explicit(BTreeSet<SiteCoord>),
}

impl Region {
    pub fn rhombus(center: SiteCoord, n: u32) -> Region {
        Region::Rhombus { center, n }
    }

    pub fn elongated(center: SiteCoord, m: u32, n: u32) -> Region {
        Region::ElongatedRhombus { center, m, n }
    }

    pub fn annulus(center: SiteCoord, m: u32, n: u32) -> Result<Region> {
        check_annulus(m, n)?;
        Ok(Region::Annulus { center, m, n })
    }

    pub fn half_plane_annulus(center: SiteCoord, m: u32, n: u32) -> Result<Region> {
        check_annulus(m, n)?;
        Ok(Region::HalfPlaneAnnulus { center, m, n })
    }

    pub fn explicit<I: IntoIterator<Item = SiteCoord>>(sites: I) -> Region {
        Region::Explicit(sites.into_iter().collect())
    }

    pub fn center(&self) -> Option<SiteCoord> {
        match self {
            Region::Rhombus { center, .. }
            | Region::ElongatedRhombus { center, .. }
            | Region::Annulus { center, .. }
            | Region::HalfPlaneAnnulus { center, .. } => Some(*center),
            Region::Explicit(_) => None,
        }
    }

    pub fn contains(&self, x: SiteCoord) -> bool {
        match self {
            Region::Rhombus { center, n } => x.rhombus_radius(*center) <= *n,
            Region::ElongatedRhombus { center, m, n } => {
                let d = x.relative_to(*center);
                d.k.unsigned_abs() <= *m && d.m.unsigned_abs() <= *n
            }
            Region::Annulus { center, m, n } => {
                let r = x.rhombus_radius(*center);
                r <= *n && r + 1 > *m
            }
            Region::HalfPlaneAnnulus { center, m, n } => {
                let r = x.rhombus_radius(*center);
                r <= *n && r + 1 > *m && x.m >= center.m
            }
            Region::Explicit(set) => set.contains(&x),
        }
    }

    /// Inclusive bounding box `(kmin, kmax, mmin, mmax)`, or `None` when empty.
    pub fn bounding_box(&self) -> Option<(i32, i32, i32, i32)> {
        match self {
            Region::Rhombus { center, n } | Region::Annulus { center, n, .. } => {
                let n = *n as i32;
                Some((center.k - n, center.k + n, center.m - n, center.m + n))
            }
            Region::HalfPlaneAnnulus { center, n, .. } => {
                let n = *n as i32;
                Some((center.k - n, center.k + n, center.m, center.m + n))
            }
            Region::ElongatedRhombus { center, m, n } => {
                let (m, n) = (*m as i32, *n as i32);
                Some((center.k - m, center.k + m, center.m - n, center.m + n))
            }
            Region::Explicit(set) => {
                let first = set.iter().next()?;
                let init = (first.k, first.k, first.m, first.m);
                Some(set.iter().fold(init, |(a, b, c, d), s| (a.min(s.k), b.max(s.k), c.min(s.m), d.max(s.m))))
            }
        }
    }

    /// Sites in row-major order: by `m`, then by `k`.
    pub fn sites(&self) -> Vec<SiteCoord> {
        if let Region::Explicit(set) = self {
            let mut v: Vec<_> = set.iter().copied().collect();
            v.sort_by_key(|s| (s.m, s.k));
            return v;
        }
        let Some((k0, k1, m0, m1)) = self.bounding_box() else {
            return Vec::new();
        };
        let mut out = Vec::new();
        for m in m0..=m1 {
            for k in k0..=k1 {
                let x = SiteCoord::new(k, m);
                if self.contains(x) {
                    out.push(x);
                }
            }
        }
        out
    }

    pub fn len(&self) -> usize {
        match self {
            Region::Rhombus { n, .. } => ((2 * n + 1) * (2 * n + 1)) as usize,
            Region::ElongatedRhombus { m, n, .. } => ((2 * m + 1) * (2 * n + 1)) as usize,
            Region::Explicit(set) => set.len(),
            _ => self.sites().len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `∂V`: sites of the region with a neighbor outside it.
    pub fn boundary(&self) -> BTreeSet<SiteCoord> {
        self.sites().into_iter().filter(|x| x.neighbors().iter().any(|y| !self.contains(*y))).collect()
    }

    /// `∂_ext V`: sites outside the region adjacent to it.
    pub fn exterior_boundary(&self) -> BTreeSet<SiteCoord> {
        self.sites().into_iter().flat_map(|x| x.neighbors()).filter(|y| !self.contains(*y)).collect()
    }

    /// Grows each half-side `s` of a rhombus to `ceil((1+δ)s)`.
    pub fn thicken(&self, delta: f64) -> Result<Region> {
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(Error::InvalidParameter(format!("thickening δ must be positive, got {delta}")));
        }
        let grow = |s: u32| ((1.0 + delta) * s as f64).ceil() as u32;
        match self {
            Region::Rhombus { center, n } => Ok(Region::rhombus(*center, grow(*n))),
            Region::ElongatedRhombus { center, m, n } => Ok(Region::elongated(*center, grow(*m), grow(*n))),
            other => Err(Error::NotRhombus(other.to_string())),
        }
    }

    pub fn translate(&self, by: SiteCoord) -> Region {
        match self {
            Region::Rhombus { center, n } => Region::rhombus(center.translate(by), *n),
            Region::ElongatedRhombus { center, m, n } => Region::elongated(center.translate(by), *m, *n),
            Region::Annulus { center, m, n } => Region::Annulus { center: center.translate(by), m: *m, n: *n },
            Region::HalfPlaneAnnulus { center, m, n } => Region::HalfPlaneAnnulus { center: center.translate(by), m: *m, n: *n },
            Region::Explicit(set) => Region::explicit(set.iter().map(|s| s.translate(by))),
        }
    }

    /// True when every site of `other` lies in `self`.
    pub fn covers(&self, other: &Region) -> bool {
        other.sites().into_iter().all(|x| self.contains(x))
    }
}

fn check_annulus(m: u32, n: u32) -> Result<()> {
    if m < 1 || n < m {
        return Err(Error::InvalidRegion(format!("annulus needs n ≥ m ≥ 1, got m={m}, n={n}")));
    }
    Ok(())
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Region::Rhombus { center: c, n } => write!(f, "rhombus:{},{},{n}", c.k, c.m),
            Region::ElongatedRhombus { center: c, m, n } => {
                write!(f, "elongated:{},{},{m},{n}", c.k, c.m)
            }
            Region::Annulus { center: c, m, n } => write!(f, "annulus:{},{},{m},{n}", c.k, c.m),
            Region::HalfPlaneAnnulus { center: c, m, n } => {
                write!(f, "halfannulus:{},{},{m},{n}", c.k, c.m)
            }
            Region::Explicit(set) => {
                write!(f, "sites:")?;
                for (i, s) in set.iter().enumerate() {
                    if i > 0 {
                        write!(f, ";")?;
                    }
                    write!(f, "{},{}", s.k, s.m)?;
                }
                Ok(())
            }
        }
    }
}

impl FromStr for Region {
    type Err = Error;

    /// Parses `rhombus:cx,cy,n`, `elongated:cx,cy,m,n`, `annulus:cx,cy,m,n`,
    /// `halfannulus:cx,cy,m,n` or `sites:k,m;k,m;...`.
    fn from_str(s: &str) -> Result<Self> {
        let (kind, rest) = s.trim().split_once(':').ok_or_else(|| Error::Parse(format!("region `{s}` lacks a `kind:` prefix")))?;
        if kind == "sites" {
            let sites = rest.split(';').filter(|p| !p.trim().is_empty()).map(SiteCoord::from_str).collect::<Result<BTreeSet<_>>>()?;
            return Ok(Region::Explicit(sites));
        }
        let nums: Vec<i64> = rest
            .split(',')
            .map(|p| p.trim().parse::<i64>().map_err(|e| Error::Parse(format!("region `{s}`: {e}"))))
            .collect::<Result<_>>()?;
        let arity = if kind == "rhombus" { 3 } else { 4 };
        if nums.len() != arity {
            return Err(Error::Parse(format!("region `{s}`: `{kind}` takes {arity} numbers")));
        }
        let center = SiteCoord::new(to_i32(nums[0], s)?, to_i32(nums[1], s)?);
        let scale =
            |v: i64| -> Result<u32> { u32::try_from(v).map_err(|_| Error::Parse(format!("region `{s}`: scale {v} must be non-negative"))) };
        match kind {
            "rhombus" => Ok(Region::rhombus(center, scale(nums[2])?)),
            "elongated" => Ok(Region::elongated(center, scale(nums[2])?, scale(nums[3])?)),
            "annulus" => Region::annulus(center, scale(nums[2])?, scale(nums[3])?),
            "halfannulus" => Region::half_plane_annulus(center, scale(nums[2])?, scale(nums[3])?),
            _ => Err(Error::Parse(format!("unknown region kind `{kind}`"))),
        }
    }
}

fn to_i32(v: i64, s: &str) -> Result<i32> {
    i32::try_from(v).map_err(|_| Error::Parse(format!("region `{s}`: {v} out of range")))
}

/// Marker for a missing neighbor in [`Geometry::nbrs`].
pub const NO_SITE: u32 = u32::MAX;

/// Dense indexing of a region, with precomputed neighbor tables.
#[derive(Clone, Debug)]
pub struct Geometry {
    region: Region,
    sites: Vec<SiteCoord>,
    kmin: i32,
    mmin: i32,
    width: usize,
    height: usize,
    lookup: Vec<u32>,
    nbrs: Vec<[u32; 6]>,
}

// The region determines every other field.
impl PartialEq for Geometry {
    fn eq(&self, other: &Self) -> bool {
        self.region == other.region
    }
}

impl Eq for Geometry {}

impl Geometry {
    pub fn new(region: Region) -> Geometry {
        let sites = region.sites();
        let (kmin, kmax, mmin, mmax) = region.bounding_box().unwrap_or((0, -1, 0, -1));
        let width = (kmax - kmin + 1).max(0) as usize;
        let height = (mmax - mmin + 1).max(0) as usize;
        let mut lookup = vec![NO_SITE; width * height];
        for (i, s) in sites.iter().enumerate() {
            lookup[(s.m - mmin) as usize * width + (s.k - kmin) as usize] = i as u32;
        }
        let mut g = Geometry { region, sites, kmin, mmin, width, height, lookup, nbrs: Vec::new() };
        g.nbrs = g.sites.iter().map(|s| s.neighbors().map(|y| g.index_of(y).map_or(NO_SITE, |i| i as u32))).collect();
        g
    }

    pub fn region(&self) -> &Region {
        &self.region
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn sites(&self) -> &[SiteCoord] {
        &self.sites
    }

    pub fn site(&self, i: usize) -> SiteCoord {
        self.sites[i]
    }

    pub fn index_of(&self, x: SiteCoord) -> Option<usize> {
        let dk = x.k - self.kmin;
        let dm = x.m - self.mmin;
        if dk < 0 || dm < 0 || dk as usize >= self.width || dm as usize >= self.height {
            return None;
        }
        let i = self.lookup[dm as usize * self.width + dk as usize];
        (i != NO_SITE).then_some(i as usize)
    }

    pub fn contains(&self, x: SiteCoord) -> bool {
        self.index_of(x).is_some()
    }

    /// Neighbor indices of site `i`, in [`NEIGHBOR_OFFSETS`] order; [`NO_SITE`] when outside.
    #[inline]
    pub fn nbrs(&self, i: usize) -> &[u32; 6] {
        &self.nbrs[i]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(k: i32, m: i32) -> SiteCoord {
        SiteCoord::new(k, m)
    }

    #[test]
    fn neighbors_are_unit_distance() {
        // Independent check: scan the 3x3 coordinate patch and keep unit norm.
        let mut unit: Vec<_> =
            (-1..=1).flat_map(|dk| (-1..=1).map(move |dm| s(dk, dm))).filter(|d| (distance(ORIGIN, *d) - 1.0).abs() < 1e-12).collect();
        let mut got = ORIGIN.neighbors().to_vec();
        unit.sort();
        got.sort();
        assert_eq!(got, unit);
        let x = s(2, -1);
        for (y, d) in x.neighbors().iter().zip(ORIGIN.neighbors()) {
            assert_eq!(*y, d.translate(x));
        }
    }

    #[test]
    fn embedding_values() {
        assert_eq!(embed(s(1, 0)), (1.0, 0.0));
        let (x, y) = embed(s(0, 1));
        assert!((x - 0.5).abs() < 1e-15 && (y - 3f64.sqrt() / 2.0).abs() < 1e-15);
        assert!((distance(s(0, 0), s(1, -1)) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn membership() {
        let r = Region::rhombus(ORIGIN, 1);
        assert!(r.contains(s(1, 1)));
        assert!(!r.contains(s(2, 0)));
        let a = Region::annulus(ORIGIN, 2, 3).unwrap();
        assert!(a.contains(s(2, 0)));
        assert!(!a.contains(s(1, 0)));
        for (n, want) in [(0, 1), (1, 9), (2, 25)] {
            assert_eq!(Region::rhombus(ORIGIN, n).sites().len(), want);
            assert_eq!(Region::rhombus(ORIGIN, n).len(), want);
        }
        let h = Region::half_plane_annulus(ORIGIN, 1, 2).unwrap();
        assert!(h.contains(s(2, 0)) && h.contains(s(-2, 0)) && !h.contains(s(1, -1)));
    }

    #[test]
    fn boundaries_of_small_rhombi() {
        let r0 = Region::rhombus(ORIGIN, 0);
        assert_eq!(r0.boundary(), BTreeSet::from([ORIGIN]));
        assert_eq!(r0.exterior_boundary(), ORIGIN.neighbors().into_iter().collect());
        let r1 = Region::rhombus(ORIGIN, 1);
        let b = r1.boundary();
        assert_eq!(b.len(), 8);
        assert!(!b.contains(&ORIGIN));
    }

    #[test]
    fn thickening() {
        assert_eq!(Region::rhombus(ORIGIN, 10).thicken(0.5).unwrap(), Region::rhombus(ORIGIN, 15));
        assert_eq!(Region::rhombus(ORIGIN, 10).thicken(0.01).unwrap(), Region::rhombus(ORIGIN, 11));
        assert_eq!(Region::elongated(ORIGIN, 10, 20).thicken(0.25).unwrap(), Region::elongated(ORIGIN, 13, 25));
        assert!(Region::annulus(ORIGIN, 1, 3).unwrap().thicken(0.1).is_err());
        assert!(Region::rhombus(ORIGIN, 3).thicken(0.0).is_err());
    }

    #[test]
    fn literal_round_trip() {
        for lit in ["rhombus:0,0,4", "elongated:1,-2,3,5", "annulus:0,0,2,8", "halfannulus:3,3,1,4", "sites:0,0;1,0"] {
            let r: Region = lit.parse().unwrap();
            assert_eq!(r.to_string(), lit);
        }
        assert!("annulus:0,0,0,3".parse::<Region>().is_err());
        assert!("annulus:0,0,4,3".parse::<Region>().is_err());
        assert!("rhombus:0,0".parse::<Region>().is_err());
        assert!("disk:0,0,3".parse::<Region>().is_err());
    }

    #[test]
    fn geometry_indexing_is_row_major() {
        let g = Geometry::new(Region::rhombus(s(1, 1), 2));
        assert_eq!(g.len(), 25);
        assert_eq!(g.site(0), s(-1, -1));
        assert_eq!(g.site(1), s(0, -1));
        assert_eq!(g.site(5), s(-1, 0));
        for i in 0..g.len() {
            assert_eq!(g.index_of(g.site(i)), Some(i));
            for (j, y) in g.nbrs(i).iter().zip(g.site(i).neighbors()) {
                assert_eq!(*j != NO_SITE, g.contains(y));
            }
        }
        assert_eq!(g.index_of(s(4, 1)), None);
    }
}
