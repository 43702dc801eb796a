use lattice_kpp::coeffs::make_family;
use lattice_kpp::lattice::{integrate, Boundary, Integrator, LatticeState};
use lattice_kpp::metrics::{part_metric, ratio_norm};
use lattice_kpp::waves_periodic::continuum_extend;
use lattice_kpp::{CoefficientField, FamilyParams, SimOptions};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn tsp() -> CoefficientField {
    make_family(&FamilyParams::shipped_time_space_periodic()).unwrap()
}

#[test]
fn shifting_by_a_site_period_commutes_with_the_flow() {
    let field = tsp();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let values: Vec<f64> = (0..41).map(|_| rng.gen_range(0.0..1.2)).collect();
    let sim = SimOptions::default();
    let a = LatticeState::new(-20, values.clone(), 0.0, Boundary::ClampBoth(0.3)).unwrap();
    let b = LatticeState::new(-18, values, 0.0, Boundary::ClampBoth(0.3)).unwrap();
    let (a, b) = (integrate(&a, &field, 3.0, &sim).unwrap(), integrate(&b, &field, 3.0, &sim).unwrap());
    let gap = a.values.iter().zip(&b.values).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    assert!(gap < 1e-12, "{gap}");
}

#[test]
fn continuum_extension_restricts_to_the_lattice_at_integers() {
    let field = tsp();
    let m = 6;
    let sites = 10;
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let grid: Vec<f64> = (0..sites * m).map(|_| rng.gen_range(0.05..1.1)).collect();
    let sim = SimOptions::default();
    let cont = continuum_extend(&field, m).unwrap().integrate_periodic(&grid, 0.0, 0.0, 2.0, &sim).unwrap();
    let lattice: Vec<f64> = grid.iter().step_by(m).copied().collect();
    let state = LatticeState::new(0, lattice, 0.0, Boundary::Periodic).unwrap();
    let out = integrate(&state, &field, 2.0, &sim).unwrap();
    for (k, &u) in out.values.iter().enumerate() {
        assert!((cont[k * m] - u).abs() < 1e-10, "site {k}: {} vs {u}", cont[k * m]);
    }
}

fn evolve_pair(u: Vec<f64>, v: Vec<f64>, t1: f64) -> f64 {
    let field = tsp();
    let sim = SimOptions::default();
    let mut integ = Integrator::new(&field, &sim).unwrap();
    let mut su = LatticeState::new(0, u, 0.0, Boundary::Periodic).unwrap();
    let mut sv = LatticeState::new(0, v, 0.0, Boundary::Periodic).unwrap();
    let mut lows = Vec::new();
    integ
        .advance(&mut su, t1, &mut |s| {
            lows.push(s.values.clone());
            Ok(())
        })
        .unwrap();
    let mut k = 0;
    let mut worst = f64::NEG_INFINITY;
    integ
        .advance(&mut sv, t1, &mut |s| {
            worst = lows[k].iter().zip(&s.values).map(|(a, b)| a - b).fold(worst, f64::max);
            k += 1;
            Ok(())
        })
        .unwrap();
    worst
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn ordered_data_stay_ordered(
        base in prop::collection::vec(0.0f64..1.5, 12),
        lift in prop::collection::vec(0.0f64..0.5, 12),
    ) {
        let v: Vec<f64> = base.iter().zip(&lift).map(|(a, b)| a + b).collect();
        prop_assert!(evolve_pair(base, v, 2.0) <= 1e-10);
    }

    #[test]
    fn ratio_norm_is_bounded_by_the_part_metric(
        u in prop::collection::vec(0.01f64..3.0, 1..30),
        seed in any::<u64>(),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w: Vec<f64> = u.iter().map(|_| rng.gen_range(0.01..3.0)).collect();
        let rho = part_metric(&u, &w).unwrap();
        let r = ratio_norm(&u, &w).unwrap();
        prop_assert!(r <= rho.exp() - 1.0 + 1e-12, "{} > {}", r, rho.exp() - 1.0);
    }
}
