//! Acceptance criteria 1–11. Each test prints one `criterion NN PASS/FAIL` line
//! on stderr (visible with or without `--nocapture`) and then asserts.

mod common;

use std::sync::Arc;

use common::{curated_cases, random_config, report, FourArmOracle};
use rand::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;
use statrs::distribution::{Binomial, DiscreteCDF};
use tri_ising::dynamics::{constants, Constants, DEFAULT_M};
use tri_ising::events::EventSpec;
use tri_ising::harness::estimate::{estimate_static, McConfig};
use tri_ising::harness::reports::{arm_table, cross_sweep, derivative_report, green_tail, qm_report, DerivConfig, TimeAxis};
use tri_ising::lattice::{Geometry, Region, ORIGIN};
use tri_ising::oracle::{check_finite_energy, mc_pair_consistency, pair_non_markov, run_exactness_suite, test_catalog, GeneratorMatrix};
use tri_ising::{beta_c, BoundaryCondition, ModelParams, SpinConfig};

fn beta_08() -> f64 {
    0.8 * beta_c()
}

fn consts(beta: f64) -> Constants {
    constants(ModelParams::new(beta).unwrap(), DEFAULT_M).unwrap()
}

#[test]
fn criterion_01_self_duality() {
    let mut pass = true;
    let mut detail = Vec::new();
    for beta in [0.0, beta_08()] {
        for n in [8u32, 16] {
            let r = estimate_static(&EventSpec::cross(n), None, beta, &McConfig::new(100_000, 101)).unwrap();
            let ok = r.ci_low <= 0.5 && 0.5 <= r.ci_high;
            pass &= ok;
            detail.push(format!("beta={beta:.4} n={n} p={:.4} [{:.4},{:.4}]", r.p_hat, r.ci_low, r.ci_high));
        }
    }
    report(1, pass, &detail.join("; "));
    assert!(pass);
}

#[test]
fn criterion_02_oracle_exactness() {
    let mut failed = Vec::new();
    let mut total = 0;
    for beta in [0.3, beta_08()] {
        let recs = run_exactness_suite(beta, consts(beta).tau).unwrap();
        total += recs.len();
        failed.extend(recs.into_iter().filter(|r| !r.pass).map(|r| format!("{} {} slack={:e}", r.check, r.params, r.worst_slack)));
    }
    let pass = failed.is_empty();
    report(2, pass, &format!("{} checks, {} failed {:?}", total, failed.len(), failed));
    assert!(pass);
}

#[test]
fn criterion_03_finite_energy() {
    let beta = beta_08();
    let c = consts(beta);
    let p = ModelParams::new(beta).unwrap();
    let mut pass = true;
    let mut detail = Vec::new();
    for (name, region, bc) in test_catalog().into_iter().filter(|(n, _, _)| n == "plus5" || n == "hex7") {
        let gen = GeneratorMatrix::for_region(region, bc, p).unwrap();
        for t in [c.tau / 2.0, c.tau] {
            let r = check_finite_energy(&gen, &c, t).unwrap();
            pass &= r.violations == 0 && r.checks > 0;
            detail.push(format!("{name} t={t:.3e}: {} checks, {} violations", r.checks, r.violations));
        }
    }
    report(3, pass, &detail.join("; "));
    assert!(pass);
}

#[test]
fn criterion_04_pair_non_markov() {
    let near = pair_non_markov(3.0, 0.01).unwrap();
    let far = pair_non_markov(3.0, 100.0).unwrap();
    let pass = near.margin > 0.0 && far.margin.abs() <= 1e-6;
    report(4, pass, &format!("margin(t=0.01)={:.6e}, margin(t=100)={:.6e} (needs |.| <= 1e-6)", near.margin, far.margin));
    assert!(pass);
}

#[test]
fn criterion_05_mc_matches_pair_law() {
    let beta = 0.3;
    let gen = GeneratorMatrix::for_region(Region::rhombus(ORIGIN, 1), BoundaryCondition::Free, ModelParams::new(beta).unwrap()).unwrap();
    let r = mc_pair_consistency(&gen, consts(beta).tau, 100_000, 105).unwrap();
    // With hundreds of cells, a few 3σ exceedances are expected by chance.
    // Accept when the count is plausible under the nominal 0.27% rate and the
    // pooled chi-square does not reject.
    let nominal = Binomial::new(0.0027, r.cells_checked as u64).unwrap();
    let p_count = if r.cells_beyond_3sigma == 0 { 1.0 } else { nominal.sf(r.cells_beyond_3sigma as u64 - 1) };
    let pass = r.cells_checked > 0 && p_count > 1e-3 && r.chi_square_p > 1e-3;
    report(
        5,
        pass,
        &format!(
            "{} cells, {} beyond 3σ (P={:.3}), max z={:.2}, chi2={:.1}/{} dof (p={:.3})",
            r.cells_checked, r.cells_beyond_3sigma, p_count, r.max_z, r.chi_square, r.dof, r.chi_square_p
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_06_green_tail() {
    let t = consts(beta_08()).tau;
    let r = green_tail(16, t, &[1, 2, 3], &McConfig::new(1_000_000, 106)).unwrap();
    let pass = r.rows.iter().all(|row| row.p_hat <= row.bound + 3.0 * row.sigma);
    let detail: Vec<String> = r.rows.iter().map(|row| format!("λ={} p={:.3e} bound={:.3e}", row.lambda, row.p_hat, row.bound)).collect();
    report(6, pass, &detail.join("; "));
    assert!(pass);
}

#[test]
fn criterion_07_sensitivity_trend() {
    let ns = [8u32, 16, 32, 64];
    let res = cross_sweep(beta_08(), &ns, &TimeAxis::Absolute(vec![1.0]), None, &McConfig::new(10_000, 107)).unwrap();
    let col: Vec<_> = ns.iter().map(|&n| &res.cell(n, 1.0).unwrap().estimate).collect();
    let decreasing = col.windows(2).all(|w| w[1].ci_low <= w[0].ci_high);
    let drop = col[3].p_hat <= col[0].p_hat - 0.02;
    let floor = col.iter().all(|e| e.p_hat >= 0.25 - 3.0 * e.sigma());
    let pass = decreasing && drop && floor;
    let vals: Vec<String> = col.iter().map(|e| format!("n={} {:.4}", e.n.unwrap_or(0), e.p_hat)).collect();
    report(7, pass, &format!("{} (decreasing={decreasing}, drop={drop}, floor={floor})", vals.join(", ")));
    assert!(pass);
}

#[test]
fn criterion_08_stability_regime() {
    let beta = beta_08();
    let ns = [8u32, 16, 32];
    let cfg = McConfig::new(10_000, 108);
    let table = arm_table(beta, &ns, &cfg).unwrap();
    let res = cross_sweep(beta, &ns, &TimeAxis::Scaled(vec![0.01]), Some(&table), &cfg.with_seed(1108)).unwrap();
    let mut pass = true;
    let mut detail = Vec::new();
    for c in &res.cells {
        pass &= c.estimate.p_hat >= 0.45;
        detail.push(format!("n={} t={:.3e} p={:.4}", c.n, c.t, c.estimate.p_hat));
    }
    report(8, pass, &detail.join("; "));
    assert!(pass);
}

#[test]
fn criterion_09_quasi_multiplicativity() {
    let beta = beta_08();
    let cfg = McConfig::new(20_000, 109);
    let mut pass = true;
    let mut detail = Vec::new();
    for t in [0.0, consts(beta).tau] {
        let r = qm_report(beta, t, &[(1, 4, 16), (1, 8, 32)], &cfg).unwrap();
        for row in &r.rows {
            let widths: Vec<f64> = [&row.pi_km, &row.pi_mn, &row.pi_kn]
                .iter()
                .map(|e| {
                    let e = e.as_ref().expect("k < m < n");
                    (e.ci_high - e.ci_low) / 2.0 / e.p_hat
                })
                .collect();
            let worst = widths.iter().cloned().fold(0.0, f64::max);
            pass &= row.within_bracket && worst <= 0.3;
            detail.push(format!("t={:.1e} ({},{},{}) ratio={:.3} max rel hw={:.3}", t, row.k, row.m, row.n, row.ratio.value, worst));
        }
    }
    report(9, pass, &detail.join("; "));
    assert!(pass);
}

#[test]
fn criterion_10_four_arm_oracle() {
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(110);
    let mut checked = 0usize;
    let mut curated = 0usize;
    let mut disagreements = 0usize;
    for (m, n) in [(1u32, 4u32), (2, 8)] {
        let geom = Arc::new(Geometry::new(Region::rhombus(ORIGIN, n)));
        let oracle = FourArmOracle::new(m, n);
        let ev = EventSpec::arm4(m, n).compile(&geom).unwrap();
        let mut scratch = Default::default();
        let mut check = |cfg: &SpinConfig| {
            if ev.eval(cfg.spins(), &mut scratch) != oracle.holds_cfg(cfg) {
                disagreements += 1;
            }
        };
        for f in curated_cases(n, 25) {
            check(&SpinConfig::from_fn(geom.clone(), &*f));
            curated += 1;
        }
        for i in 0..100_000 {
            let p = [0.5, 0.4, 0.6][i % 3];
            check(&random_config(&geom, p, &mut rng));
            checked += 1;
        }
    }
    let pass = disagreements == 0 && curated >= 50;
    report(10, pass, &format!("{checked} random + {curated} curated, {disagreements} disagreements"));
    assert!(pass);
}

#[test]
fn criterion_11_derivative_consistency() {
    let beta = beta_08();
    let t = consts(beta).tau / 2.0;
    let r = derivative_report(beta, 8, t, &DerivConfig::new(111)).unwrap();
    let pass = !r.beyond_tau && r.fd_coupled_z <= 3.0 && r.c_lower.ci_low > 0.0;
    report(
        11,
        pass,
        &format!(
            "fd={:.4}±{:.4} coupled={:.4}±{:.4} z={:.2}; c={:.4} [{:.4},{:.4}]",
            r.finite_difference.mean,
            r.finite_difference.std_error,
            r.coupled.mean,
            r.coupled.std_error,
            r.fd_coupled_z,
            r.c_lower.value,
            r.c_lower.ci_low,
            r.c_lower.ci_high
        ),
    );
    assert!(pass);
}
