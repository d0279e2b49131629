use proptest::prelude::*;
use tri_ising::lattice::{Region, SiteCoord};

fn site() -> impl Strategy<Value = SiteCoord> {
    (-6i32..=6, -6i32..=6).prop_map(|(k, m)| SiteCoord::new(k, m))
}

fn region() -> impl Strategy<Value = Region> {
    prop_oneof![
        (site(), 0u32..6).prop_map(|(c, n)| Region::rhombus(c, n)),
        (site(), 0u32..4, 0u32..6).prop_map(|(c, m, n)| Region::elongated(c, m, n)),
        (site(), 1u32..4, 0u32..4).prop_map(|(c, m, d)| Region::annulus(c, m, m + d).unwrap()),
        (site(), 1u32..4, 0u32..4).prop_map(|(c, m, d)| Region::half_plane_annulus(c, m, m + d).unwrap()),
        prop::collection::btree_set(site(), 1..30).prop_map(Region::explicit),
    ]
}

#[test]
fn adjacency_is_symmetric_on_a_patch() {
    for k in -2..=2 {
        for m in -2..=2 {
            let x = SiteCoord::new(k, m);
            for j in -2..=2 {
                for l in -2..=2 {
                    let y = SiteCoord::new(j, l);
                    assert_eq!(x.neighbors().contains(&y), y.neighbors().contains(&x), "{x} {y}");
                }
            }
        }
    }
}

proptest! {
    #[test]
    fn boundary_sites_touch_the_outside(r in region()) {
        let boundary = r.boundary();
        for x in r.sites() {
            let out = x.neighbors().iter().any(|y| !r.contains(*y));
            prop_assert_eq!(boundary.contains(&x), out, "site {}", x);
        }
        prop_assert!(boundary.iter().all(|x| r.contains(*x)));
    }

    #[test]
    fn exterior_boundary_is_adjacent_and_outside(r in region()) {
        for y in r.exterior_boundary() {
            prop_assert!(!r.contains(y));
            prop_assert!(y.neighbors().iter().any(|x| r.contains(*x)));
        }
    }

    #[test]
    fn thicken_is_monotone(c in site(), n in 1u32..20, d1 in 0.001f64..2.0, d2 in 0.001f64..2.0) {
        let r = Region::rhombus(c, n);
        let (lo, hi) = if d1 <= d2 { (d1, d2) } else { (d2, d1) };
        let a = r.thicken(lo).unwrap();
        let b = r.thicken(hi).unwrap();
        prop_assert!(b.covers(&a));
        prop_assert!(a.covers(&r));
    }

    #[test]
    fn thicken_depends_only_on_the_ceiling(c in site(), n in 1u32..20, d1 in 0.001f64..2.0, d2 in 0.001f64..2.0) {
        let r = Region::rhombus(c, n);
        let ceil = |d: f64| ((1.0 + d) * n as f64).ceil() as u32;
        if ceil(d1) == ceil(d2) {
            prop_assert_eq!(r.thicken(d1).unwrap(), r.thicken(d2).unwrap());
        }
        let once = r.thicken(d1).unwrap();
        prop_assert_eq!(once.clone(), Region::rhombus(c, ceil(d1)));
    }

    #[test]
    fn literal_round_trip(r in region().prop_filter("literal syntax", |r| !matches!(r, Region::Explicit(_)))) {
        let back: Region = r.to_string().parse().unwrap();
        prop_assert_eq!(back, r);
    }
}
