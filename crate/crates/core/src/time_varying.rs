//! Channels that switch between `l` gain matrices with probabilities `rho`,
//! under a budget on the expected power of a user subset.
//!
//! Each (state, user) pair becomes one link of an `l * n` system whose gain
//! matrix is block diagonal, link `j` of state `i` sitting at index `i * n + j`
//! (0-based). The states only couple through the average-power constraint,
//! which adds `rho_i * eta / p` to the columns of `Omega` in every state `i`.

use crate::linalg::{psi, Matrix};
use crate::model::{Direction, PowerConstraint, TimeVaryingChannel};
use crate::static_region::{check_positive, pick_binding, rate, Binding, MaxSinr, SolveError, SolveReport, Solver};

#[derive(Debug, Clone, PartialEq)]
pub struct ExpandedSystem {
    states: usize,
    users: usize,
    gains: Matrix,
    noise: Vec<f64>,
    normalized: Matrix,
    eta: Vec<f64>,
    mu: Vec<f64>,
    probabilities: Vec<f64>,
}

/// Builds the block-diagonal system for direction `d`, which must be strictly positive.
pub fn expand(tv: &TimeVaryingChannel, d: &Direction) -> Result<ExpandedSystem, SolveError> {
    let n = tv.users();
    check_positive(n, d)?;
    if let Some((k, s)) = tv.states().iter().enumerate().find(|(_, s)| s.users() != n) {
        return Err(SolveError::StateMismatch(format!(
            "state {} has {} users, expected {n}",
            k + 1,
            s.users()
        )));
    }
    let gains = Matrix::block_diagonal(&tv.states().iter().map(|s| s.gains().clone()).collect::<Vec<_>>())?;
    let normalized = Matrix::block_diagonal(
        &tv.states()
            .iter()
            .map(|s| s.normalize().matrix().clone())
            .collect::<Vec<_>>(),
    )?;
    let eta = tv.states().iter().flat_map(|s| s.eta(d)).collect();
    let mu = d.weights().repeat(tv.state_count());
    let noise = tv.noise().repeat(tv.state_count());
    Ok(ExpandedSystem {
        states: tv.state_count(),
        users: n,
        gains,
        noise,
        normalized,
        eta,
        mu,
        probabilities: tv.probabilities().to_vec(),
    })
}

impl ExpandedSystem {
    pub fn states(&self) -> usize {
        self.states
    }

    pub fn users(&self) -> usize {
        self.users
    }

    pub fn links(&self) -> usize {
        self.states * self.users
    }

    /// 0-based link index of `user` in `state`.
    pub fn index(&self, state: usize, user: usize) -> usize {
        state * self.users + user
    }

    /// Block-diagonal raw gains.
    pub fn gains(&self) -> &Matrix {
        &self.gains
    }

    pub fn noise(&self) -> &[f64] {
        &self.noise
    }

    /// Block-diagonal normalized gains.
    pub fn normalized(&self) -> &Matrix {
        &self.normalized
    }

    pub fn eta(&self) -> &[f64] {
        &self.eta
    }

    /// `1_l (x) mu`.
    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    /// `diag(1 (x) mu) A`.
    pub fn weighted_gain(&self) -> Matrix {
        self.normalized.scale_rows(&self.mu)
    }

    /// Links of `Omega` in `state`.
    pub fn constrained_links(&self, state: usize, c: &PowerConstraint) -> Vec<usize> {
        c.users().iter().map(|&j| self.index(state, j)).collect()
    }

    /// `sum_i psi(0, rho_i eta / p, {links of Omega in state i})`.
    pub fn constraint_addend(&self, c: &PowerConstraint) -> Result<Matrix, SolveError> {
        let ln = self.links();
        let mut sum = Matrix::zeros(ln, ln);
        for (i, &rho) in self.probabilities.iter().enumerate() {
            let y: Vec<f64> = self.eta.iter().map(|e| rho * e / c.bound()).collect();
            sum = &sum + &psi(&Matrix::zeros(ln, ln), &y, &self.constrained_links(i, c))?;
        }
        Ok(sum)
    }

    /// Matrix whose Perron root is `1 / gamma*` under constraint `c`.
    pub fn constraint_matrix(&self, c: &PowerConstraint) -> Result<Matrix, SolveError> {
        Ok(&self.weighted_gain() + &self.constraint_addend(c)?)
    }

    /// `sum_i rho_i sum_{j in Omega} p_{i n + j}`.
    pub fn average_power(&self, c: &PowerConstraint, power: &[f64]) -> f64 {
        self.probabilities
            .iter()
            .enumerate()
            .map(|(i, rho)| rho * c.users().iter().map(|&j| power[self.index(i, j)]).sum::<f64>())
            .sum()
    }

    /// `rho`-weighted power of each user.
    pub fn average_per_user(&self, power: &[f64]) -> Vec<f64> {
        (0..self.users)
            .map(|j| {
                self.probabilities
                    .iter()
                    .enumerate()
                    .map(|(i, rho)| rho * power[self.index(i, j)])
                    .sum()
            })
            .collect()
    }
}

impl Solver {
    pub fn tv_constrained_bound(&self, sys: &ExpandedSystem, c: &PowerConstraint) -> Result<MaxSinr, SolveError> {
        if !c.fits(sys.users()) {
            return Err(SolveError::ConstraintUsers { users: sys.users() });
        }
        let p = self.perron(&sys.constraint_matrix(c)?)?;
        Ok(MaxSinr {
            gamma_star: 1.0 / p.lambda_star,
            lambda_star: p.lambda_star,
            iterations: p.iterations,
        })
    }

    pub fn tv_constrained_max_sinr(
        &self,
        tv: &TimeVaryingChannel,
        d: &Direction,
        c: &PowerConstraint,
    ) -> Result<SolveReport, SolveError> {
        self.tv_multi(tv, d, std::slice::from_ref(c))
    }

    /// Minimum over average-power constraints on the expanded system.
    pub fn tv_multi(
        &self,
        tv: &TimeVaryingChannel,
        d: &Direction,
        cs: &[PowerConstraint],
    ) -> Result<SolveReport, SolveError> {
        let sys = expand(tv, d)?;
        let weighted = sys.weighted_gain();
        if cs.is_empty() {
            let p = self.perron(&weighted)?;
            let gamma_star = if p.lambda_star == 0.0 {
                f64::INFINITY
            } else {
                1.0 / p.lambda_star
            };
            let sinr: Vec<f64> = sys.mu().iter().map(|m| m * gamma_star).collect();
            return Ok(SolveReport {
                gamma_star,
                unbounded: gamma_star.is_infinite(),
                binding: Binding::Unconstrained,
                ties: Vec::new(),
                per_constraint: Vec::new(),
                power: None,
                rate: sinr.iter().map(|&s| rate(s)).collect(),
                sinr,
                states: sys.states(),
                average_power: None,
            });
        }
        let per_constraint = cs
            .iter()
            .map(|c| self.tv_constrained_bound(&sys, c).map(|b| b.gamma_star))
            .collect::<Result<Vec<_>, _>>()?;
        let (binding, ties) = pick_binding(&per_constraint, self.tol.tie_rel);
        let gamma_star = per_constraint[binding];
        let power = self.balanced_power(&weighted, sys.eta(), gamma_star)?;
        let n = sys.users();
        let sinr: Vec<f64> = tv
            .states()
            .iter()
            .enumerate()
            .flat_map(|(i, s)| s.sinr(&power[i * n..(i + 1) * n]))
            .collect();
        Ok(SolveReport {
            gamma_star,
            unbounded: false,
            binding: Binding::Constraint(binding),
            ties,
            per_constraint,
            rate: sinr.iter().map(|&s| rate(s)).collect(),
            sinr,
            average_power: Some(sys.average_per_user(&power)),
            power: Some(power),
            states: sys.states(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ChannelModel;

    fn two_states() -> TimeVaryingChannel {
        let a = ChannelModel::new(vec![vec![0.9, 0.2], vec![0.1, 1.2]], vec![0.1, 0.2]).unwrap();
        let b = ChannelModel::new(vec![vec![0.4, 0.05], vec![0.3, 0.8]], vec![0.1, 0.2]).unwrap();
        TimeVaryingChannel::new(vec![a, b], vec![0.3, 0.7]).unwrap()
    }

    #[test]
    fn block_layout_and_index_mapping() {
        let tv = two_states();
        let d = Direction::new(vec![1.0, 0.5]).unwrap();
        let sys = expand(&tv, &d).unwrap();
        assert_eq!(sys.links(), 4);
        let a = sys.normalized();
        for i in 0..2 {
            for k in 0..2 {
                let state_a = tv.states()[i].normalize();
                for j in 0..2 {
                    assert_eq!(a[(sys.index(i, j), sys.index(i, k))], state_a.matrix()[(j, k)]);
                }
            }
        }
        for r in 0..2 {
            for c in 2..4 {
                assert_eq!(a[(r, c)], 0.0);
                assert_eq!(a[(c, r)], 0.0);
                assert_eq!(sys.gains()[(r, c)], 0.0);
            }
        }
        assert_eq!(sys.mu(), &[1.0, 0.5, 1.0, 0.5]);
        assert_eq!(sys.eta()[3], 0.5 * 0.2 / 0.8);
        assert!(sys.eta().iter().all(|&e| e > 0.0));
    }

    #[test]
    fn single_state_matches_static_system() {
        let ch = ChannelModel::new(vec![vec![0.9, 0.2], vec![0.1, 1.2]], vec![0.1, 0.2]).unwrap();
        let tv = TimeVaryingChannel::new(vec![ch.clone()], vec![1.0]).unwrap();
        let d = Direction::new(vec![0.7, 0.3]).unwrap();
        let sys = expand(&tv, &d).unwrap();
        assert_eq!(sys.normalized(), ch.normalize().matrix());
        assert_eq!(sys.eta(), ch.eta(&d).as_slice());
        let c = PowerConstraint::new(vec![1], 0.9, 2).unwrap();
        assert_eq!(
            sys.constraint_matrix(&c).unwrap(),
            crate::static_region::constraint_matrix(&ch, &d, &c).unwrap()
        );
    }

    #[test]
    fn addend_matches_column_construction() {
        let tv = two_states();
        let d = Direction::new(vec![0.6, 0.8]).unwrap();
        let sys = expand(&tv, &d).unwrap();
        let c = PowerConstraint::new(vec![0], 1.3, 2).unwrap();
        let mut by_column = Matrix::zeros(4, 4);
        for (i, &rho) in tv.probabilities().iter().enumerate() {
            for &j in c.users() {
                let col: Vec<f64> = sys.eta().iter().map(|e| rho * e / c.bound()).collect();
                by_column.set_column(sys.index(i, j), &col).unwrap();
            }
        }
        assert_eq!(sys.constraint_addend(&c).unwrap(), by_column);
    }

    #[test]
    fn rejects_zero_weight() {
        let d = Direction::new(vec![1.0, 0.0]).unwrap();
        assert_eq!(expand(&two_states(), &d), Err(SolveError::ZeroWeight { user: 2 }));
    }

    #[test]
    fn report_is_balanced_and_tight() {
        let tv = two_states();
        let d = Direction::new(vec![1.0, 0.5]).unwrap();
        let c = PowerConstraint::total(1.0, 2).unwrap();
        let report = Solver::default().tv_constrained_max_sinr(&tv, &d, &c).unwrap();
        let sys = expand(&tv, &d).unwrap();
        let power = report.power.as_ref().unwrap();
        assert_eq!(power.len(), 4);
        assert!((sys.average_power(&c, power) - 1.0).abs() < 1e-10);
        for (k, s) in report.sinr.iter().enumerate() {
            let target = sys.mu()[k] * report.gamma_star;
            assert!((s - target).abs() <= 1e-9 * target, "{k}: {s} vs {target}");
        }
        let avg = report.average_power.as_ref().unwrap();
        assert!((avg.iter().sum::<f64>() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn states_with_close_perron_roots_converge() {
        // The block-diagonal weighted gain is reducible with nearly equal
        // block roots; plain power iteration on it never settles.
        let mut s = crate::random::Sampler::new(12440777018551067714);
        let tv = s.time_varying(3, 2);
        let d = s.direction(3);
        let c = s.subset_constraint(3);
        let r = Solver::default().tv_constrained_max_sinr(&tv, &d, &c).unwrap();
        for (k, sinr) in r.sinr.iter().enumerate() {
            let target = d.weights()[k % 3] * r.gamma_star;
            assert!((sinr - target).abs() <= 1e-9 * target, "{k}: {sinr} vs {target}");
        }
    }
}
