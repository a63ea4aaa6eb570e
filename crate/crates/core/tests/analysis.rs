mod common;

use std::f64::consts::PI;
use std::sync::Arc;

use laguerre_flow::analysis::{
    build_initial_data, convergence_rates, cross_initializer, equilibrium_profile, flow_error, relative_internal_energy,
    BarenblattSpec, CrossShape, RadialMap,
};
use laguerre_flow::geometry::{build_tessellation, Domain, Mode, Point};
use laguerre_flow::EnergyModel;
use proptest::prelude::*;
use rand::Rng;

use common::rng;

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, intervals: usize) -> f64 {
    let h = (b - a) / intervals as f64;
    let mut s = f(a) + f(b);
    for k in 1..intervals {
        s += f(a + k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

#[test]
fn exponent_identities() {
    for gamma in [1.2, 1.5, 2.0, 3.0, 4.0] {
        let s = BarenblattSpec::standard(gamma).unwrap();
        let (a, b) = (s.alpha(), s.beta());
        assert!((a * (2.0 * (gamma - 1.0) + 2.0) - 2.0).abs() < 1e-15);
        assert!((2.0 * b - a).abs() < 1e-15);
        assert!((s.k() - a * (gamma - 1.0) / (4.0 * gamma)).abs() < 1e-15);
    }
}

#[test]
fn profile_mass_is_conserved_and_carried_by_the_flow() {
    for gamma in [1.5, 2.0, 4.0] {
        let s = BarenblattSpec::standard(gamma).unwrap();
        let m = s.total_mass();
        // mass from a polar quadrature of the density itself
        let radial = |t: f64| {
            let r_max = s.support_radius(t);
            2.0 * PI * simpson(|r| s.density(t, Point::new(r, 0.0)) * r, 0.0, r_max, 20_000)
        };
        for t in [s.t0, 0.3, 1.0] {
            assert!((radial(t) - m).abs() < 1e-5 * m, "gamma {gamma} t {t}");
            assert!((s.cumulative_mass(t, s.support_radius(t)) - m).abs() < 1e-12 * m);
        }
        for r in [0.1, 0.3, 0.5] {
            let moved = s.flow(1.0, Point::new(r, 0.0)).x;
            assert!((s.cumulative_mass(1.0, moved) - s.cumulative_mass(s.t0, r)).abs() < 1e-12 * m);
        }
    }
}

#[test]
fn profile_balances_mass_through_a_circle() {
    let s = BarenblattSpec::standard(2.0).unwrap();
    let radius = 0.4;
    let (t1, t2) = (0.2, 0.25);
    let flux = |t: f64| {
        let p = |r: f64| s.density(t, Point::new(r, 0.0)).powf(s.gamma);
        let h = 1e-6;
        2.0 * PI * radius * (p(radius + h) - p(radius - h)) / (2.0 * h)
    };
    let inflow = simpson(flux, t1, t2, 200);
    let change = s.cumulative_mass(t2, radius) - s.cumulative_mass(t1, radius);
    assert!((inflow - change).abs() < 1e-7, "{inflow} vs {change}");
}

#[test]
fn initial_data_conserves_mass_and_projection_error_is_bounded() {
    let spec = BarenblattSpec::standard(2.0).unwrap();
    let map = RadialMap::new(spec);
    let mut previous = f64::INFINITY;
    for n in [25, 100, 400] {
        let data = build_initial_data(&spec, n, 20).unwrap();
        let mass = spec.total_mass();
        assert!((data.total_mass() - mass).abs() < 1e-10 * mass);
        let delta = data.delta_n.unwrap();
        let h = data.reference.as_ref().unwrap().max_cell_diameter;
        let bound = data.grad_sup.unwrap() * mass.sqrt() * h;
        assert!(delta <= bound, "N {n}: {delta} > {bound}");
        assert!(delta < previous);
        previous = delta;
        for &x in &data.positions {
            assert!(x.norm() <= spec.support_radius(spec.t0));
        }
    }
    for r in [0.05, 0.2, 0.9 * map.ball_radius()] {
        let image = map.apply(Point::new(0.0, r)).unwrap();
        assert!(image.x.abs() < 1e-15);
        assert!((spec.cumulative_mass(spec.t0, image.y) - PI * r * r).abs() < 1e-11);
    }
}

#[test]
fn equilibrium_energy_matches_grid_quadrature() {
    let mass = 0.12;
    let center = Point::new(0.2, -0.1);
    let (profile, energy) = equilibrium_profile(mass, center);
    let k = 3000;
    let half = 1.05 * profile.support_radius();
    let h = 2.0 * half / k as f64;
    let (mut m, mut u) = (0.0, 0.0);
    for a in 0..k {
        for b in 0..k {
            let x = center + Point::new(-half + (a as f64 + 0.5) * h, -half + (b as f64 + 0.5) * h);
            let rho = profile.density(x);
            m += rho;
            u += rho * rho;
        }
    }
    assert!((m * h * h - mass).abs() < 1e-5 * mass);
    assert!((u * h * h - energy).abs() < 1e-5 * energy);
    assert!((energy - 1.1056e-2).abs() < 1e-6);
}

#[test]
fn relative_energy_vanishes_for_matching_densities() {
    let mut r = rng(41);
    let positions = common::spread_points(&mut r, 15, 0.0, 1.0, 0.02);
    let tess = build_tessellation(&Domain::unit_square(), &positions, &vec![0.0; 15], Mode::Full).unwrap();
    let masses: Vec<f64> = tess.cells.iter().map(|c| 0.7 * c.area).collect();
    for gamma in [1.5, 2.0, 4.0] {
        let e = EnergyModel::power(gamma).unwrap();
        let v = relative_internal_energy(&tess, &masses, &e, |_| 0.7).unwrap();
        assert!(v.abs() < 1e-14);
        assert!(relative_internal_energy(&tess, &masses, &e, |_| 0.5).unwrap() > 0.0);
    }
}

#[test]
fn relative_energy_of_one_cell_in_closed_form() {
    let tess = build_tessellation(&Domain::unit_square(), &[Point::new(0.5, 0.5)], &[0.0], Mode::Full).unwrap();
    let e = EnergyModel::power(2.0).unwrap();
    for m in [0.3, 1.0, 2.5] {
        let v = relative_internal_energy(&tess, &[m], &e, |x| 1.0 + x.x).unwrap();
        // int_0^1 (m - 1 - x)^2 dx
        let a = m - 1.0;
        assert!((v - (a * a - a + 1.0 / 3.0)).abs() < 1e-13);
    }
    assert!(relative_internal_energy(&tess, &[1.0], &e, |x| x.x - 0.5).is_err());
}

#[test]
fn cross_counts_and_symmetry() {
    let shape = CrossShape::new(Point::new(0.5, 0.5), 0.25);
    for n in [50, 500, 2000] {
        let data = cross_initializer(n, 0.12, &shape);
        let count = data.positions.len();
        assert!((count as f64 - n as f64).abs() <= 0.1 * n as f64, "{n} -> {count}");
        assert!(data.positions.iter().all(|&p| shape.contains(p)));
        assert!((data.total_mass() - 0.12).abs() < 1e-13);
        let mean = data.positions.iter().fold(Point::ORIGIN, |a, &p| a + p) / count as f64;
        assert!(mean.distance(shape.center) < 1e-12);
    }
}

#[test]
fn rates_of_a_halving_sequence_are_one() {
    let rates = convergence_rates(&[100, 400, 1600], &[0.4, 0.2, 0.1]);
    assert_eq!(rates[0], None);
    assert!(rates[1..].iter().all(|r| (r.unwrap() - 1.0).abs() < 1e-15));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn flow_error_is_a_weighted_norm(seed in any::<u64>(), n in 1usize..30, scale in -10.0f64..10.0) {
        let mut r = rng(seed);
        let a: Vec<Point> = (0..n).map(|_| Point::new(r.gen(), r.gen())).collect();
        let b: Vec<Point> = (0..n).map(|_| Point::new(r.gen(), r.gen())).collect();
        let m: Vec<f64> = (0..n).map(|_| r.gen_range(0.1..1.0)).collect();
        let d = flow_error(&a, &b, &m).unwrap();
        prop_assert!(d > 0.0);
        prop_assert_eq!(flow_error(&a, &a, &m).unwrap(), 0.0);
        let sa: Vec<Point> = a.iter().map(|&p| p * scale).collect();
        let sb: Vec<Point> = b.iter().map(|&p| p * scale).collect();
        prop_assert!((flow_error(&sa, &sb, &m).unwrap() - scale.abs() * d).abs() <= 1e-12 * (1.0 + d * scale.abs()));
        prop_assert!(flow_error(&a, &b[..n - 1], &m).is_err() || n == 0);
    }

    #[test]
    fn relative_energy_is_nonnegative(seed in any::<u64>(), g in 0usize..3) {
        let mut r = rng(seed);
        let n = r.gen_range(1..12);
        let positions = common::spread_points(&mut r, n, 0.0, 1.0, 0.01);
        let tess = build_tessellation(&Domain::unit_square(), &positions, &vec![0.0; n], Mode::Full).unwrap();
        let masses: Vec<f64> = (0..n).map(|_| r.gen_range(0.01..1.0)).collect();
        let (a, b) = (r.gen_range(0.1..2.0), r.gen_range(-1.0..1.0));
        let e = EnergyModel::power(common::GAMMAS[g]).unwrap();
        let v = relative_internal_energy(&tess, &masses, &e, |x| a + 0.05 * b * (x.x + x.y)).unwrap();
        prop_assert!(v >= 0.0);
    }
}

#[test]
fn domain_keeps_the_support_for_every_exponent() {
    for gamma in [1.5, 2.0, 4.0] {
        let s = BarenblattSpec::standard(gamma).unwrap();
        let domain = Arc::new(Domain::square(Point::ORIGIN, 2.0).unwrap());
        let edge = Point::new(s.support_radius(1.0), 0.0);
        assert!(domain.contains(edge));
    }
}
