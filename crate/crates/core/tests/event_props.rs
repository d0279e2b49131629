mod common;

use std::sync::Arc;

use common::random_config;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;
use tri_ising::events::{four_arm, interfaces, pivotal, EventScratch, EventSpec};
use tri_ising::lattice::{Geometry, Region, SiteCoord, ORIGIN};
use tri_ising::SpinConfig;

fn frame(n: u32) -> Arc<Geometry> {
    Arc::new(Geometry::new(Region::rhombus(ORIGIN, n)))
}

fn config(geom: &Arc<Geometry>, seed: u64, p: f64) -> SpinConfig {
    random_config(geom, p, &mut Xoshiro256PlusPlus::seed_from_u64(seed))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn crossing_and_one_arm_are_increasing(seed in any::<u64>(), n in 2u32..9, p in 0.3f64..0.7, flips in 1usize..20) {
        let geom = frame(2 * n);
        let mut cfg = config(&geom, seed, p);
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed ^ 0x5eed);
        let events = [EventSpec::cross(n), EventSpec::arm1(1, n), EventSpec::arm1(n / 2 + 1, 2 * n)];
        let compiled: Vec<_> = events.iter().map(|e| e.compile(&geom).unwrap()).collect();
        let mut scratch = EventScratch::default();
        for _ in 0..flips {
            let before: Vec<bool> = compiled.iter().map(|e| e.eval(cfg.spins(), &mut scratch)).collect();
            let i = rng.random_range(0..geom.len());
            if cfg.spins()[i] < 0 {
                cfg.spins_mut()[i] = 1;
            }
            for (e, b) in compiled.iter().zip(before) {
                prop_assert!(!b || e.eval(cfg.spins(), &mut scratch));
            }
        }
    }

    #[test]
    fn four_arm_events_nest(seed in any::<u64>(), k in 1u32..3, dm in 1u32..4, dn in 1u32..5) {
        let (m, n) = (k + dm, k + dm + dn);
        let geom = frame(n);
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
        // condition-free sampling rarely hits the event; retry a few configurations
        for _ in 0..50 {
            let cfg = random_config(&geom, 0.5, &mut rng);
            if four_arm(&cfg, k, n).unwrap() {
                prop_assert!(four_arm(&cfg, k, m).unwrap(), "({},{}) from ({},{})\n{}", k, m, k, n, cfg.to_text());
                prop_assert!(four_arm(&cfg, m, n).unwrap(), "({},{}) from ({},{})\n{}", m, n, k, n, cfg.to_text());
            }
        }
    }

    #[test]
    fn pivotal_matches_the_flip_test(seed in any::<u64>(), n in 2u32..7) {
        let geom = frame(2 * n);
        let cfg = config(&geom, seed, 0.5);
        let ev = EventSpec::cross(n);
        let base = ev.holds(&cfg).unwrap();
        let ni = n as i32;
        for k in -ni..=ni {
            for l in -ni..=ni {
                let x = SiteCoord::new(k, l);
                let piv = pivotal(&cfg, x, &ev).unwrap();
                prop_assert_eq!(piv, ev.holds(&cfg.flipped(x).unwrap()).unwrap() != base);
                // an interior pivotal site carries four alternating arms to the box boundary
                let r = n - x.rhombus_radius(ORIGIN);
                if piv && r >= 2 {
                    prop_assert!(EventSpec::arm4(1, r).centered_at(x).holds(&cfg).unwrap(), "x={}\n{}", x, cfg.to_text());
                }
            }
        }
    }
}

#[test]
fn interfaces_count_four_arms() {
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(77);
    for (m, n) in [(1u32, 4u32), (2, 8)] {
        let geom = frame(n);
        let ev = EventSpec::arm4(m, n).compile(&geom).unwrap();
        let mut scratch = EventScratch::default();
        let mut hits = 0;
        for i in 0..100_000 {
            let p = [0.5, 0.4, 0.6][i % 3];
            let cfg = random_config(&geom, p, &mut rng);
            let arms = ev.eval(cfg.spins(), &mut scratch);
            hits += arms as u32;
            let k = interfaces(&cfg, m, n).unwrap();
            assert_eq!(k >= 4, arms, "({m},{n}) interfaces={k}\n{}", cfg.to_text());
            assert_eq!(k % 2, 0);
        }
        assert!(hits > 100);
    }
}
