//! Library results against brute-force references and the bisection oracle.

mod common;

use common::{cofactor_det, cramer_solve, perron_root_by_char_poly, rel};
use sinr_region::linalg::{determinant, solve, spectral_radius};
use sinr_region::oracle::{
    bisect_max_sinr, bisect_time_varying, check_feasible, grid_search_max_sinr, Infeasibility, OracleOutcome,
};
use sinr_region::random::Sampler;
use sinr_region::{Binding, ChannelModel, Direction, PowerConstraint, Solver, TimeVaryingChannel};

fn two_user() -> ChannelModel {
    ChannelModel::new(vec![vec![0.6791, 0.0999], vec![0.0411, 0.6864]], vec![0.1, 0.1]).unwrap()
}

fn per_user_and_total() -> Vec<PowerConstraint> {
    vec![
        PowerConstraint::new(vec![0], 0.8, 2).unwrap(),
        PowerConstraint::new(vec![1], 1.0, 2).unwrap(),
        PowerConstraint::total(1.4, 2).unwrap(),
    ]
}

#[test]
fn determinant_matches_cofactor_expansion() {
    let mut s = Sampler::new(11);
    for _ in 0..50 {
        let x = s.matrix(5, 5, (-1.0, 1.0));
        let d = determinant(&x).unwrap();
        let oracle = cofactor_det(&x.to_rows());
        assert!(rel(d, oracle) <= 1e-10, "{d} vs {oracle}");
    }
}

#[test]
fn solve_matches_cramer_and_residual_bound() {
    let mut s = Sampler::new(12);
    for _ in 0..50 {
        let x = s.matrix(4, 4, (-1.0, 1.0));
        let b = s.vector(4, (-1.0, 1.0));
        let p = solve(&x, &b).unwrap();
        let oracle = cramer_solve(&x.to_rows(), &b);
        let dx = cofactor_det(&x.to_rows());
        for i in 0..4 {
            assert!(rel(p[i] * dx, oracle[i] * dx) <= 1e-9, "{} vs {}", p[i], oracle[i]);
        }
        let r = x.mul_vec(&p);
        let res = r.iter().zip(&b).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let pn = p.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let bn = b.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        assert!(res <= 1e-9 * (x.norm_inf() * pn + bn));
    }
}

#[test]
fn perron_root_matches_characteristic_polynomial() {
    let mut s = Sampler::new(13);
    for _ in 0..20 {
        let x = s.matrix(6, 6, (0.0, 1.0));
        let l = spectral_radius(&x).unwrap().lambda_star;
        let oracle = perron_root_by_char_poly(&x.to_rows(), 4000);
        assert!(rel(l, oracle) <= 1e-9, "{l} vs {oracle}");
    }
}

#[test]
fn bisection_matches_unconstrained_on_positive_gains() {
    let mut s = Sampler::new(14);
    let solver = Solver::default();
    for k in 0..40 {
        let n = 2 + k % 5;
        let ch = s.channel(n);
        let d = s.direction(n);
        let closed = solver.unconstrained_max_sinr(&ch.normalize(), &d).unwrap().gamma_star;
        let OracleOutcome::Bounded(o) = bisect_max_sinr(&ch, &d, &[]).unwrap() else {
            panic!("strictly positive cross gains bound gamma");
        };
        assert!(rel(closed, o) <= 1e-9, "{closed} vs {o}");
    }
}

#[test]
fn single_user_link_budget() {
    let ch = ChannelModel::new(vec![vec![0.37]], vec![0.013]).unwrap();
    let c = PowerConstraint::new(vec![0], 2.5, 1).unwrap();
    let d = Direction::uniform(1).unwrap();
    let budget = 0.37 * 2.5 / 0.013;
    assert!(
        rel(
            bisect_max_sinr(&ch, &d, std::slice::from_ref(&c)).unwrap().gamma(),
            budget
        ) <= 1e-10
    );
    assert!(
        rel(
            Solver::default().constrained_max_sinr(&ch, &d, &c).unwrap().gamma_star,
            budget
        ) <= 1e-12
    );
}

#[test]
fn total_bound_fixture_matches_bisection() {
    let ch = two_user();
    let c = PowerConstraint::total(1.4, 2).unwrap();
    let d = Direction::new(vec![1.0, 1.0]).unwrap().normalized();
    let closed = Solver::default().constrained_max_sinr(&ch, &d, &c).unwrap().gamma_star;
    let o = bisect_max_sinr(&ch, &d, &[c]).unwrap().gamma();
    assert!(rel(closed, o) <= 1e-8);
}

#[test]
fn just_above_optimum_names_binding_constraint() {
    let mut s = Sampler::new(15);
    let solver = Solver::default();
    for k in 0..40 {
        let n = 2 + k % 4;
        let ch = s.channel(n);
        let d = s.direction(n);
        let cs = s.per_user_and_total(n);
        let r = solver.multi_constrained_max_sinr(&ch, &d, &cs).unwrap();
        let Binding::Constraint(b) = r.binding else { panic!() };
        let below = check_feasible(&ch, &d, &cs, r.gamma_star * (1.0 - 1e-6)).unwrap();
        assert!(below.feasible);
        let above = check_feasible(&ch, &d, &cs, r.gamma_star * (1.0 + 1e-6)).unwrap();
        assert!(!above.feasible);
        assert_eq!(above.reason, Some(Infeasibility::Constraints));
        assert!(above.violated.iter().any(|v| v.constraint == b && v.slack < 0.0));
    }
}

#[test]
fn recovered_power_achieves_balanced_sinr() {
    let mut s = Sampler::new(16);
    let solver = Solver::default();
    for k in 0..40 {
        let n = 2 + k % 5;
        let inst = s.instance(n);
        let unc = solver
            .unconstrained_max_sinr(&inst.channel.normalize(), &inst.direction)
            .unwrap()
            .gamma_star;
        let gamma = unc * s.uniform((0.05, 0.95));
        let p = solver.recover_power(&inst.channel, &inst.direction, gamma).unwrap();
        for (i, sinr) in inst.channel.sinr(&p).iter().enumerate() {
            assert!(rel(*sinr, inst.direction.weights()[i] * gamma) <= 1e-8);
        }
    }
}

#[test]
fn grid_converges_from_below_on_fixture() {
    let ch = two_user();
    let cs = per_user_and_total();
    for theta in [0.3, 0.785, 1.2] {
        let d = Direction::from_angle(theta).unwrap();
        let mut last = 0.0;
        for res in [25, 100, 400] {
            let g = grid_search_max_sinr(&ch, &cs, &d, res).unwrap();
            assert!(g.gamma <= g.bisection * (1.0 + 1e-8));
            assert!(g.gamma >= last);
            last = g.gamma;
        }
        let fine = grid_search_max_sinr(&ch, &cs, &d, 800).unwrap();
        assert!(rel(fine.gamma, fine.bisection) <= 0.01);
        assert!(!fine.coarse);
    }
}

#[test]
fn grid_with_huge_budgets_approaches_unconstrained() {
    let ch = two_user();
    let cs = [
        PowerConstraint::new(vec![0], 1e4, 2).unwrap(),
        PowerConstraint::new(vec![1], 1e4, 2).unwrap(),
    ];
    let d = Direction::uniform(2).unwrap();
    let unc = Solver::default()
        .unconstrained_max_sinr(&ch.normalize(), &d)
        .unwrap()
        .gamma_star;
    let g = grid_search_max_sinr(&ch, &cs, &d, 2000).unwrap();
    assert!(g.gamma <= unc && rel(g.gamma, unc) <= 0.02, "{} vs {unc}", g.gamma);
}

#[test]
fn two_state_fixture_matches_average_power_bisection() {
    let mut s = Sampler::new(17);
    let noise = s.noise(2);
    let a = ChannelModel::new(s.channel(2).gains().to_rows(), noise.clone()).unwrap();
    let b = ChannelModel::new(s.channel(2).gains().to_rows(), noise).unwrap();
    assert_ne!(a, b);
    let tv = TimeVaryingChannel::new(vec![a, b], vec![0.3, 0.7]).unwrap();
    let c = PowerConstraint::total(1.2, 2).unwrap();
    let d = Direction::new(vec![0.8, 0.6]).unwrap();
    let closed = Solver::default()
        .tv_constrained_max_sinr(&tv, &d, &c)
        .unwrap()
        .gamma_star;
    let o = bisect_time_varying(&tv, &d, &[c]).unwrap().gamma();
    assert!(rel(closed, o) <= 1e-8, "{closed} vs {o}");
}
