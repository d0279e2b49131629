#![allow(dead_code)]

use std::collections::{HashMap, VecDeque};
use std::io::Write;
use std::sync::Arc;

use rand::Rng;
use tri_ising::lattice::{Geometry, Region, SiteCoord, ORIGIN};
use tri_ising::SpinConfig;

/// Writes straight to stderr so the line shows up even when the test passes.
pub fn report(criterion: u32, pass: bool, detail: &str) {
    let status = if pass { "PASS" } else { "FAIL" };
    let _ = writeln!(std::io::stderr(), "criterion {criterion:>2} {status}: {detail}");
}

/// The six lattice neighbours, listed independently of the crate.
fn adjacent(a: SiteCoord) -> [SiteCoord; 6] {
    let (k, m) = (a.k, a.m);
    [
        SiteCoord::new(k + 1, m),
        SiteCoord::new(k - 1, m),
        SiteCoord::new(k, m + 1),
        SiteCoord::new(k, m - 1),
        SiteCoord::new(k + 1, m - 1),
        SiteCoord::new(k - 1, m + 1),
    ]
}

fn radius(a: SiteCoord) -> i32 {
    a.k.abs().max(a.m.abs())
}

fn angle(a: SiteCoord) -> f64 {
    let x = a.k as f64 + 0.5 * a.m as f64;
    let y = a.m as f64 * 3f64.sqrt() / 2.0;
    y.atan2(x)
}

/// Unit-capacity max flow on a node-split graph, capped at `cap`.
struct Flow {
    adj: Vec<Vec<usize>>,
    to: Vec<usize>,
    cap: Vec<i32>,
}

impl Flow {
    fn new(n: usize) -> Self {
        Self { adj: vec![Vec::new(); n], to: Vec::new(), cap: Vec::new() }
    }

    fn edge(&mut self, a: usize, b: usize, c: i32) {
        self.adj[a].push(self.to.len());
        self.to.push(b);
        self.cap.push(c);
        self.adj[b].push(self.to.len());
        self.to.push(a);
        self.cap.push(0);
    }

    fn run(&mut self, s: usize, t: usize, limit: i32) -> i32 {
        let mut flow = 0;
        while flow < limit {
            let mut prev = vec![usize::MAX; self.adj.len()];
            let mut q = VecDeque::from([s]);
            prev[s] = usize::MAX - 1;
            while let Some(u) = q.pop_front() {
                if u == t {
                    break;
                }
                for &e in &self.adj[u] {
                    let v = self.to[e];
                    if self.cap[e] > 0 && prev[v] == usize::MAX {
                        prev[v] = e;
                        q.push_back(v);
                    }
                }
            }
            if prev[t] == usize::MAX {
                break;
            }
            let mut v = t;
            while v != s {
                let e = prev[v];
                self.cap[e] -= 1;
                self.cap[e ^ 1] += 1;
                v = self.to[e ^ 1];
            }
            flow += 1;
        }
        flow
    }
}

/// Brute-force `A_4(m,n)` around the origin: four vertex-disjoint
/// monochromatic paths inside `Λ_n \ Λ_{m−1}` (or `Λ_n \ {o}` when `m = 1`)
/// from sites adjacent to the removed set to the outer ring, with signs `+,−,+,−` in the
/// angular order of their starting points.
pub struct FourArmOracle {
    m: i32,
    n: i32,
    sites: Vec<SiteCoord>,
    index: HashMap<SiteCoord, usize>,
    starts: Vec<usize>,
}

impl FourArmOracle {
    pub fn new(m: u32, n: u32) -> Self {
        let (m, n) = (m as i32, n as i32);
        let lo = if m == 1 { 1 } else { m };
        let mut sites = Vec::new();
        for k in -n..=n {
            for l in -n..=n {
                let x = SiteCoord::new(k, l);
                if radius(x) >= lo && radius(x) <= n {
                    sites.push(x);
                }
            }
        }
        let index: HashMap<_, _> = sites.iter().enumerate().map(|(i, x)| (*x, i)).collect();
        let mut starts: Vec<usize> = if m == 1 {
            adjacent(ORIGIN).iter().map(|x| index[x]).collect()
        } else {
            // ring sites touching the removed rhombus
            sites
                .iter()
                .enumerate()
                .filter(|(_, x)| radius(**x) == m && adjacent(**x).iter().any(|y| radius(*y) < m))
                .map(|(i, _)| i)
                .collect()
        };
        starts.sort_by(|a, b| angle(sites[*a]).total_cmp(&angle(sites[*b])));
        Self { m, n, sites, index, starts }
    }

    /// Whether two disjoint paths of sign `s` join `a` and `b` to the outer ring.
    fn two_disjoint(&self, spin: &dyn Fn(SiteCoord) -> i8, s: i8, a: usize, b: usize) -> bool {
        let v = self.sites.len();
        // node i: in = 2i, out = 2i+1; source 2v, sink 2v+1
        let (src, sink) = (2 * v, 2 * v + 1);
        let mut f = Flow::new(2 * v + 2);
        for (i, &x) in self.sites.iter().enumerate() {
            if spin(x) != s {
                continue;
            }
            f.edge(2 * i, 2 * i + 1, 1);
            if radius(x) == self.n {
                f.edge(2 * i + 1, sink, 1);
            }
            for y in adjacent(x) {
                if let Some(&j) = self.index.get(&y) {
                    if spin(y) == s {
                        f.edge(2 * i + 1, 2 * j, 1);
                    }
                }
            }
        }
        f.edge(src, 2 * a, 1);
        f.edge(src, 2 * b, 1);
        f.run(src, sink, 2) == 2
    }

    pub fn holds(&self, spin: &dyn Fn(SiteCoord) -> i8) -> bool {
        let k = self.starts.len();
        let sign: Vec<i8> = self.starts.iter().map(|&i| spin(self.sites[i])).collect();
        let mut memo: HashMap<(usize, usize), bool> = HashMap::new();
        let ok = |i: usize, j: usize, memo: &mut HashMap<(usize, usize), bool>| -> bool {
            *memo.entry((i, j)).or_insert_with(|| self.two_disjoint(spin, sign[i], self.starts[i], self.starts[j]))
        };
        // p1 < p2 < p3 < p4 in angular order, p1 and p3 of one sign, p2 and p4 of the other
        for p1 in 0..k {
            for p2 in p1 + 1..k {
                if sign[p2] == sign[p1] {
                    continue;
                }
                for p3 in p2 + 1..k {
                    if sign[p3] != sign[p1] {
                        continue;
                    }
                    for p4 in p3 + 1..k {
                        if sign[p4] != sign[p2] {
                            continue;
                        }
                        if ok(p1, p3, &mut memo) && ok(p2, p4, &mut memo) {
                            return true;
                        }
                    }
                }
            }
        }
        false
    }

    pub fn holds_cfg(&self, cfg: &SpinConfig) -> bool {
        self.holds(&|x| cfg.get(x).expect("site in frame"))
    }

    pub fn scales(&self) -> (i32, i32) {
        (self.m, self.n)
    }
}

/// Configuration on `Λ_n` with i.i.d. spins, `+` with probability `p`.
pub fn random_config<R: Rng>(geom: &Arc<Geometry>, p: f64, rng: &mut R) -> SpinConfig {
    SpinConfig::from_fn(geom.clone(), |_| if rng.random::<f64>() < p { 1 } else { -1 })
}

/// Hand-built configurations on `Λ_n` that stress the arm detector: exact
/// sector patterns, arms cut at various radii, arms joined only through the
/// non-adjacent diagonal, merged arms, spirals, boundary-hugging paths and
/// arms leaving the corners of the inner ring. Returns at least `count` cases.
pub fn curated_cases(n: u32, count: usize) -> Vec<Box<dyn Fn(SiteCoord) -> i8>> {
    let n = n as i32;
    let mut out: Vec<Box<dyn Fn(SiteCoord) -> i8>> = Vec::new();
    let sectors = |k: usize, rot: f64| -> Box<dyn Fn(SiteCoord) -> i8> {
        Box::new(move |x: SiteCoord| {
            if x == ORIGIN {
                return 1;
            }
            let a = (angle(x) + rot).rem_euclid(std::f64::consts::TAU);
            if ((a / std::f64::consts::TAU * k as f64) as usize) % 2 == 0 {
                1
            } else {
                -1
            }
        })
    };
    for k in [2usize, 4, 6, 8] {
        for rot in [0.0, 0.3, 0.79, 1.1] {
            out.push(sectors(k, rot));
        }
    }
    // four sectors with one arm cut by a ring of the opposite sign at radius r
    for r in 1..=n {
        let base = sectors(4, 0.3);
        out.push(Box::new(move |x| {
            let s = base(x);
            if radius(x) == r && s > 0 && x.k > 0 && x.m >= 0 {
                -1
            } else {
                s
            }
        }));
    }
    // crosses: + on both axes, − elsewhere, or the reverse
    for flip in [1i8, -1] {
        out.push(Box::new(move |x| if x.k == 0 || x.m == 0 { flip } else { -flip }));
        out.push(Box::new(move |x| if x.k == 0 || x.k + x.m == 0 { flip } else { -flip }));
        // diagonal (1,1) steps are not edges: these lines are not connected
        out.push(Box::new(move |x| if x.k == x.m || x.k == -x.m { flip } else { -flip }));
    }
    // two + arms joined by an arc in the middle of the annulus
    for r in 2..n {
        out.push(Box::new(move |x| {
            let on_axis = x.m == 0 || x.k == 0;
            let upper = x.k >= 0 && x.m >= 0;
            if (on_axis || radius(x) == r) && upper || x.k == 0 && x.m < 0 || x.m == 0 && x.k < 0 {
                1
            } else {
                -1
            }
        }));
    }
    // spiral of + from the centre
    out.push(Box::new(move |x| {
        let a = (angle(x) + std::f64::consts::PI) / std::f64::consts::TAU;
        let band = (radius(x) as f64 - 4.0 * a).rem_euclid(4.0);
        if band < 2.0 {
            1
        } else {
            -1
        }
    }));
    // + only along the outer ring and the positive k axis
    out.push(Box::new(move |x| if radius(x) == n || (x.m == 0 && x.k > 0) { 1 } else { -1 }));
    // checkerboards along rows and columns
    out.push(Box::new(|x| if (x.k + x.m).rem_euclid(2) == 0 { 1 } else { -1 }));
    out.push(Box::new(|x| if x.k.rem_euclid(2) == 0 { 1 } else { -1 }));
    out.push(Box::new(|x| if x.m.rem_euclid(3) == 0 { 1 } else { -1 }));
    out.push(Box::new(|_| 1));
    out.push(Box::new(|_| -1));
    // + ray leaving an obtuse corner of the inner ring, which touches no inner site,
    // against − elsewhere, with or without a second + ray on the far side
    for (r, second) in [(1, false), (1, true), (2, false), (2, true), (3, true)] {
        out.push(Box::new(move |x| {
            let ray = (x.m == r && x.k >= r) || (second && x.m == 0 && x.k <= -r);
            if ray {
                1
            } else {
                -1
            }
        }));
        out.push(Box::new(move |x| {
            let ray = (x.m == -r && x.k <= -r) || (x.k == r && x.m >= r) || (second && x.m == 0 && x.k >= r);
            if ray {
                1
            } else {
                -1
            }
        }));
    }
    assert!(out.len() >= count, "not enough curated cases");
    out
}

/// Region of the oracle, for building a frame.
pub fn oracle_frame(n: u32) -> Region {
    Region::rhombus(ORIGIN, n)
}
