mod common;

use common::rel;
use proptest::prelude::*;
use sinr_region::linalg::{determinant, psi, spectral_radius, Matrix};
use sinr_region::oracle::{check_feasible, BalancedSystem};
use sinr_region::random::Sampler;
use sinr_region::time_varying::expand;
use sinr_region::{parse_channel_spec, ChannelModel, Direction, PowerConstraint, Solver, TimeVaryingChannel};

fn square(max_n: usize, range: std::ops::Range<f64>) -> impl Strategy<Value = Matrix> {
    (1..=max_n).prop_flat_map(move |n| {
        prop::collection::vec(range.clone(), n * n).prop_map(move |d| Matrix::from_row_major(n, n, d).unwrap())
    })
}

fn nonnegative(max_n: usize) -> impl Strategy<Value = Matrix> {
    square(max_n, 0.0..1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn perron_monotone_in_entries(x in nonnegative(6), shrink in prop::collection::vec(0.0..=1.0f64, 36)) {
        let n = x.rows();
        let mut y = x.clone();
        for i in 0..n {
            for j in 0..n {
                y[(i, j)] *= shrink[i * n + j];
            }
        }
        let lx = spectral_radius(&x).unwrap().lambda_star;
        let ly = spectral_radius(&y).unwrap().lambda_star;
        prop_assert!(lx >= ly - 1e-12, "{lx} < {ly}");
    }

    #[test]
    fn perron_scales_linearly(x in nonnegative(6), c in 0.01..100.0f64) {
        let l = spectral_radius(&x).unwrap().lambda_star;
        let lc = spectral_radius(&x.scaled(c)).unwrap().lambda_star;
        prop_assert!(rel(lc, c * l) <= 1e-12, "{lc} vs {}", c * l);
    }

    #[test]
    fn perron_residual_when_converged(x in nonnegative(6)) {
        let r = spectral_radius(&x).unwrap();
        prop_assert!(r.converged);
        prop_assert!(r.residual(&x) <= 1e-10 * r.lambda_star.max(1.0), "{}", r.residual(&x));
        prop_assert!(r.vector.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn column_additivity(x in square(6, -1.0..1.0), y in prop::collection::vec(-1.0..1.0f64, 6), col in 0usize..6) {
        let n = x.rows();
        let i = col % n;
        let mut other = x.clone();
        other.set_column(i, &y[..n]).unwrap();
        let lhs = determinant(&x).unwrap() + determinant(&other).unwrap();
        let rhs = determinant(&psi(&x, &y[..n], &[i]).unwrap()).unwrap();
        // Cancellation can make both sides tiny; compare on the scale of the terms.
        let scale = determinant(&x).unwrap().abs() + determinant(&other).unwrap().abs();
        prop_assert!((lhs - rhs).abs() <= 1e-9 * scale.max(rhs.abs()).max(f64::MIN_POSITIVE), "{lhs} vs {rhs}");
    }

    #[test]
    fn reciprocal_polynomial(m in nonnegative(6), frac in 0.01..0.99f64) {
        let n = m.rows();
        let l = spectral_radius(&m).unwrap().lambda_star;
        prop_assume!(l > 1e-6);
        let gamma = frac / l;
        let lhs = determinant(&(&Matrix::identity(n) - &m.scaled(gamma))).unwrap();
        let rhs = gamma.powi(n as i32) * determinant(&(&Matrix::identity(n).scaled(1.0 / gamma) - &m)).unwrap();
        prop_assert!(rel(lhs, rhs) <= 1e-9, "{lhs} vs {rhs}");
    }

    #[test]
    fn eta_linear_in_mu_and_noise(seed in any::<u64>(), a in 0.1..10.0f64, b in 0.1..10.0f64) {
        let mut s = Sampler::new(seed);
        let ch = s.channel(4);
        let d = s.direction(4);
        let eta = ch.eta(&d);
        let eta_a = ch.eta(&d.scaled(a).unwrap());
        let louder = ChannelModel::new(ch.gains().to_rows(), ch.noise().iter().map(|x| x * b).collect()).unwrap();
        let eta_b = louder.eta(&d);
        for i in 0..4 {
            prop_assert!(rel(eta_a[i], a * eta[i]) <= 1e-15);
            prop_assert!(rel(eta_b[i], b * eta[i]) <= 1e-15);
        }
    }

    #[test]
    fn normalize_recovers_unit_diagonal_input(a in nonnegative(5), noise in 0.01..1.0f64) {
        let n = a.rows();
        let mut g = a.to_rows();
        for (i, row) in g.iter_mut().enumerate() {
            row[i] = 1.0;
        }
        let ch = ChannelModel::new(g, vec![noise; n]).unwrap();
        let back = ch.normalize();
        for i in 0..n {
            for j in 0..n {
                let expected = if i == j { 0.0 } else { a[(i, j)] };
                prop_assert_eq!(back.matrix()[(i, j)], expected);
            }
        }
    }

    #[test]
    fn spec_round_trip_is_bit_exact(seed in any::<u64>(), n in 1usize..5) {
        let spec = Sampler::new(seed).spec(n);
        let again = parse_channel_spec(&spec.to_json_string()).unwrap();
        prop_assert_eq!(again, spec);
    }

    #[test]
    fn constrained_never_exceeds_unconstrained(seed in any::<u64>(), n in 2usize..7) {
        let inst = Sampler::new(seed).instance(n);
        let solver = Solver::default();
        let c = &inst.constraints[0];
        let unc = solver.unconstrained_max_sinr(&inst.channel.normalize(), &inst.direction).unwrap();
        let con = solver.constrained_max_sinr(&inst.channel, &inst.direction, c).unwrap();
        prop_assert!(con.lambda_star >= unc.lambda_star * (1.0 - 1e-12));
    }

    #[test]
    fn optimum_is_feasible_balanced_and_tight(seed in any::<u64>(), n in 2usize..6) {
        let mut s = Sampler::new(seed);
        let ch = s.channel(n);
        let d = s.direction(n);
        let cs = s.per_user_and_total(n);
        let r = Solver::default().multi_constrained_max_sinr(&ch, &d, &cs).unwrap();
        let p = r.power.as_ref().unwrap();
        for c in &cs {
            prop_assert!(c.total_power(p) <= c.bound() * (1.0 + 1e-8));
        }
        let ratio0 = r.sinr[0] / d.weights()[0];
        for i in 0..n {
            prop_assert!(rel(r.sinr[i] / d.weights()[i], ratio0) <= 1e-8);
        }
        let sinr_binding = match r.binding {
            sinr_region::Binding::Constraint(b) => b,
            sinr_region::Binding::Unconstrained => unreachable!(),
        };
        prop_assert!(rel(cs[sinr_binding].total_power(p), cs[sinr_binding].bound()) <= 1e-8);
        let v = check_feasible(&ch, &d, &cs, r.gamma_star * (1.0 + 1e-6)).unwrap();
        prop_assert!(!v.feasible);
        prop_assert!(v.violated.iter().any(|x| x.constraint == sinr_binding) || v.witness_power.is_none());
    }

    #[test]
    fn shrinking_budgets_never_helps(seed in any::<u64>(), n in 2usize..6, t in 0.05..1.0f64) {
        let mut s = Sampler::new(seed);
        let ch = s.channel(n);
        let d = s.direction(n);
        let cs = s.per_user_and_total(n);
        let shrunk: Vec<PowerConstraint> = cs.iter().map(|c| c.with_bound(c.bound() * t).unwrap()).collect();
        let solver = Solver::default();
        let full = solver.multi_constrained_max_sinr(&ch, &d, &cs).unwrap().gamma_star;
        let less = solver.multi_constrained_max_sinr(&ch, &d, &shrunk).unwrap().gamma_star;
        prop_assert!(less <= full * (1.0 + 1e-12));
    }

    #[test]
    fn feasibility_is_monotone(seed in any::<u64>(), n in 2usize..6, g1 in 0.0..1.0f64, g2 in 0.0..1.0f64) {
        let inst = Sampler::new(seed).instance(n);
        let sys = BalancedSystem::from_channel(&inst.channel, &inst.direction).unwrap();
        let unc = Solver::default()
            .unconstrained_max_sinr(&inst.channel.normalize(), &inst.direction)
            .unwrap()
            .gamma_star;
        let (lo, hi) = if g1 < g2 { (g1, g2) } else { (g2, g1) };
        let (lo, hi) = (lo * 1.5 * unc, hi * 1.5 * unc);
        if sys.check_feasible(&inst.constraints, hi).unwrap().feasible {
            prop_assert!(sys.check_feasible(&inst.constraints, lo).unwrap().feasible);
        }
    }

    #[test]
    fn every_state_is_balanced(seed in any::<u64>(), n in 2usize..5, l in 1usize..4) {
        let mut s = Sampler::new(seed);
        let tv = s.time_varying(n, l);
        let d = s.direction(n);
        let c = s.subset_constraint(n);
        let r = Solver::default().tv_constrained_max_sinr(&tv, &d, &c).unwrap();
        prop_assert_eq!(r.sinr.len(), n * l);
        for (k, sinr) in r.sinr.iter().enumerate() {
            prop_assert!(rel(*sinr, d.weights()[k % n] * r.gamma_star) <= 1e-8);
        }
    }

    #[test]
    fn addend_equals_column_construction(seed in any::<u64>(), n in 1usize..5, l in 1usize..4) {
        let mut s = Sampler::new(seed);
        let tv = s.time_varying(n, l);
        let d = s.direction(n);
        let c = s.subset_constraint(n);
        let sys = expand(&tv, &d).unwrap();
        let mut by_column = Matrix::zeros(n * l, n * l);
        for (i, &rho) in tv.probabilities().iter().enumerate() {
            let col: Vec<f64> = sys.eta().iter().map(|e| rho * e / c.bound()).collect();
            for &j in c.users() {
                by_column.set_column(i * n + j, &col).unwrap();
            }
        }
        prop_assert_eq!(sys.constraint_addend(&c).unwrap(), by_column);
    }

    #[test]
    fn shifting_weight_to_worse_state_never_helps(seed in any::<u64>(), n in 2usize..4, r1 in 0.05..0.95f64, shift in 0.0..1.0f64) {
        let mut s = Sampler::new(seed);
        let noise = s.noise(n);
        let a = ChannelModel::new(s.channel(n).gains().to_rows(), noise.clone()).unwrap();
        let b = ChannelModel::new(s.channel(n).gains().to_rows(), noise).unwrap();
        let d = s.direction(n);
        let c = s.subset_constraint(n);
        let solver = Solver::default();
        let alone = |ch: &ChannelModel| solver.constrained_max_sinr(ch, &d, &c).unwrap().gamma_star;
        let (good, bad) = if alone(&a) >= alone(&b) { (a, b) } else { (b, a) };
        let r2 = r1 + (1.0 - r1) * shift;
        let at = |rho_bad: f64| {
            let tv = TimeVaryingChannel::new(vec![good.clone(), bad.clone()], vec![1.0 - rho_bad, rho_bad]).unwrap();
            solver.tv_constrained_max_sinr(&tv, &d, &c).unwrap().gamma_star
        };
        prop_assert!(at(r2) <= at(r1) * (1.0 + 1e-9), "{} > {}", at(r2), at(r1));
    }
}

#[test]
fn budgets_to_infinity_reach_unconstrained_limit() {
    let ch = ChannelModel::new(vec![vec![0.6791, 0.0999], vec![0.0411, 0.6864]], vec![0.1, 0.1]).unwrap();
    let d = Direction::new(vec![0.6, 0.8]).unwrap();
    let solver = Solver::default();
    let unc = solver.unconstrained_max_sinr(&ch.normalize(), &d).unwrap().gamma_star;
    let mut last = 0.0;
    let mut gap = f64::INFINITY;
    for k in 0..12 {
        let t = 10f64.powi(k - 2);
        let c = PowerConstraint::total(1.4 * t, 2).unwrap();
        let g = solver.constrained_max_sinr(&ch, &d, &c).unwrap().gamma_star;
        assert!(g >= last);
        let new_gap = rel(g, unc);
        assert!(new_gap <= gap);
        gap = new_gap;
        last = g;
    }
    assert!(gap < 1e-8);
}
