//! Closed-form-free checks of the solvers.
//!
//! The oracle never forms `A`, `eta` or a Perron root. It writes the balanced
//! SINR equations `g_ii p_i - gamma mu_i sum_{j != i} g_ij p_j = gamma mu_i sigma_i^2`
//! straight from the raw gains, solves them, and tests the resulting power
//! against the constraints; bisection on that test gives `gamma*`. The grid
//! search drops the balancing assumption altogether and maximizes
//! `min_i gamma_i(p) / mu_i` over a lattice of feasible powers.

use thiserror::Error;

use crate::linalg::{LinalgError, Lu, Matrix};
use crate::model::{ChannelModel, Direction, PowerConstraint, TimeVaryingChannel};
use crate::time_varying::ExpandedSystem;
use crate::Tolerances;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("direction has {found} weights but the system has {expected} users")]
    DirectionLength { expected: usize, found: usize },
    #[error("direction weight for user {user} is zero")]
    ZeroWeight { user: usize },
    #[error("constraint refers to users beyond the system's {users}")]
    ConstraintUsers { users: usize },
    #[error("grid search supports at most 3 users, got {0}")]
    TooManyUsers(usize),
    #[error("user {user} is not covered by any constraint, so its power has no box bound")]
    Unboxed { user: usize },
    #[error("grid resolution must be at least 1")]
    Resolution,
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Why a candidate `gamma` failed.
#[derive(Debug, Clone, PartialEq)]
pub enum Infeasibility {
    Singular,
    /// Balanced power of a link (0-based) is negative.
    NegativePower {
        link: usize,
        value: f64,
    },
    Constraints,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    /// 0-based position in the constraint list.
    pub constraint: usize,
    /// `bound - power`; negative when violated.
    pub slack: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeasibilityVerdict {
    pub feasible: bool,
    pub witness_power: Option<Vec<f64>>,
    pub violated: Vec<Violation>,
    pub reason: Option<Infeasibility>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OracleOutcome {
    Bounded(f64),
    /// Still feasible at the bracket cap.
    Unbounded,
}

impl OracleOutcome {
    pub fn gamma(self) -> f64 {
        match self {
            Self::Bounded(g) => g,
            Self::Unbounded => f64::INFINITY,
        }
    }
}

/// Bracket cap for bisection.
pub const BRACKET_CAP: f64 = (1u64 << 60) as f64;

/// Balanced SINR equations over `states * users` links, state-major. A fixed
/// channel is the one-state case with weight 1.
#[derive(Debug, Clone, PartialEq)]
pub struct BalancedSystem {
    users: usize,
    gains: Matrix,
    noise: Vec<f64>,
    mu: Vec<f64>,
    weights: Vec<f64>,
    /// Relative bisection width.
    pub width_rel: f64,
    pub tol: Tolerances,
}

impl BalancedSystem {
    fn build(states: &[&ChannelModel], weights: Vec<f64>, d: &Direction) -> Result<Self, OracleError> {
        let users = states[0].users();
        if d.len() != users {
            return Err(OracleError::DirectionLength {
                expected: users,
                found: d.len(),
            });
        }
        let ln = states.len() * users;
        let mut gains = Matrix::zeros(ln, ln);
        for (s, ch) in states.iter().enumerate() {
            for i in 0..users {
                for j in 0..users {
                    gains[(s * users + i, s * users + j)] = ch.gain(i, j);
                }
            }
        }
        Ok(Self {
            users,
            gains,
            noise: states.iter().flat_map(|ch| ch.noise().iter().copied()).collect(),
            mu: d.weights().repeat(states.len()),
            weights,
            width_rel: 1e-12,
            tol: Tolerances::default(),
        })
    }

    pub fn from_channel(ch: &ChannelModel, d: &Direction) -> Result<Self, OracleError> {
        Self::build(&[ch], vec![1.0], d)
    }

    pub fn from_time_varying(tv: &TimeVaryingChannel, d: &Direction) -> Result<Self, OracleError> {
        let states: Vec<&ChannelModel> = tv.states().iter().collect();
        Self::build(&states, tv.probabilities().to_vec(), d)
    }

    /// Uses only the raw block gains, noise and weights of the expansion.
    pub fn from_expanded(sys: &ExpandedSystem) -> Self {
        Self {
            users: sys.users(),
            gains: sys.gains().clone(),
            noise: sys.noise().to_vec(),
            mu: sys.mu().to_vec(),
            weights: sys.probabilities().to_vec(),
            width_rel: 1e-12,
            tol: Tolerances::default(),
        }
    }

    pub fn links(&self) -> usize {
        self.mu.len()
    }

    /// Solves the balanced equations at `gamma`.
    pub fn balanced_power(&self, gamma: f64) -> Result<Vec<f64>, LinalgError> {
        let ln = self.links();
        let mut k = Matrix::zeros(ln, ln);
        let mut rhs = vec![0.0; ln];
        for r in 0..ln {
            for c in 0..ln {
                k[(r, c)] = if r == c {
                    self.gains[(r, r)]
                } else {
                    -gamma * self.mu[r] * self.gains[(r, c)]
                };
            }
            rhs[r] = gamma * self.mu[r] * self.noise[r];
        }
        Lu::factor(&k)?.solve(&rhs, self.tol.singular_pivot_rel)
    }

    /// Expected power of the constrained users.
    pub fn constrained_power(&self, c: &PowerConstraint, power: &[f64]) -> f64 {
        self.weights
            .iter()
            .enumerate()
            .map(|(s, w)| w * c.users().iter().map(|&j| power[s * self.users + j]).sum::<f64>())
            .sum()
    }

    pub fn check_feasible(&self, cs: &[PowerConstraint], gamma: f64) -> Result<FeasibilityVerdict, OracleError> {
        if cs.iter().any(|c| !c.fits(self.users)) {
            return Err(OracleError::ConstraintUsers { users: self.users });
        }
        let infeasible = |reason| FeasibilityVerdict {
            feasible: false,
            witness_power: None,
            violated: Vec::new(),
            reason: Some(reason),
        };
        let mut p = match self.balanced_power(gamma) {
            Ok(p) => p,
            Err(LinalgError::Singular { .. }) => return Ok(infeasible(Infeasibility::Singular)),
            Err(e) => return Err(e.into()),
        };
        let scale = p.iter().fold(1.0_f64, |acc, x| acc.max(x.abs()));
        if let Some((link, &value)) = p
            .iter()
            .enumerate()
            .find(|(_, &x)| x.is_nan() || x < -self.tol.negative_power_tol * scale)
        {
            return Ok(infeasible(Infeasibility::NegativePower { link, value }));
        }
        p.iter_mut().for_each(|x| *x = x.max(0.0));
        let violated: Vec<Violation> = cs
            .iter()
            .enumerate()
            .filter_map(|(k, c)| {
                let slack = c.bound() - self.constrained_power(c, &p);
                (slack < -self.tol.negative_power_tol * c.bound()).then_some(Violation { constraint: k, slack })
            })
            .collect();
        let feasible = violated.is_empty();
        Ok(FeasibilityVerdict {
            feasible,
            witness_power: Some(p),
            reason: (!feasible).then_some(Infeasibility::Constraints),
            violated,
        })
    }

    /// Doubles from 1 until infeasible, then bisects to relative width `width_rel`.
    pub fn bisect_max_sinr(&self, cs: &[PowerConstraint]) -> Result<OracleOutcome, OracleError> {
        if let Some(i) = self.mu.iter().position(|&m| m <= 0.0) {
            return Err(OracleError::ZeroWeight {
                user: i % self.users + 1,
            });
        }
        let feasible = |g: f64| self.check_feasible(cs, g).map(|v| v.feasible);
        let mut lo = 0.0;
        let mut hi = 1.0;
        while feasible(hi)? {
            lo = hi;
            hi *= 2.0;
            if hi > BRACKET_CAP {
                return Ok(OracleOutcome::Unbounded);
            }
        }
        // Halving from 1 reaches the smallest normal double in about 1000
        // steps; the relative stop then takes ~40 more.
        for _ in 0..4000 {
            if hi - lo <= self.width_rel * lo {
                break;
            }
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if feasible(mid)? {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(OracleOutcome::Bounded(0.5 * (lo + hi)))
    }
}

pub fn check_feasible(
    ch: &ChannelModel,
    d: &Direction,
    cs: &[PowerConstraint],
    gamma: f64,
) -> Result<FeasibilityVerdict, OracleError> {
    BalancedSystem::from_channel(ch, d)?.check_feasible(cs, gamma)
}

pub fn bisect_max_sinr(ch: &ChannelModel, d: &Direction, cs: &[PowerConstraint]) -> Result<OracleOutcome, OracleError> {
    BalancedSystem::from_channel(ch, d)?.bisect_max_sinr(cs)
}

/// Average-power version over the expanded time-varying system.
pub fn bisect_time_varying(
    tv: &TimeVaryingChannel,
    d: &Direction,
    cs: &[PowerConstraint],
) -> Result<OracleOutcome, OracleError> {
    BalancedSystem::from_time_varying(tv, d)?.bisect_max_sinr(cs)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridResult {
    /// Best `min_i gamma_i(p) / mu_i` over the lattice.
    pub gamma: f64,
    pub power: Vec<f64>,
    /// Largest lattice spacing over the users.
    pub step: f64,
    /// Bound on the change of the objective per unit of `step`: rounding the
    /// optimum down to the lattice costs at most `lipschitz * step`.
    pub lipschitz: f64,
    pub bisection: f64,
    /// Set when `gamma` is more than 5% below the bisection value.
    pub coarse: bool,
}

/// Exhaustive lattice search over `[0, b_1] x .. x [0, b_n]` (endpoints
/// included), where `b_i` is the tightest bound of any constraint covering
/// user `i`. Only lattice points satisfying every constraint are scored.
pub fn grid_search_max_sinr(
    ch: &ChannelModel,
    cs: &[PowerConstraint],
    d: &Direction,
    resolution: usize,
) -> Result<GridResult, OracleError> {
    let n = ch.users();
    if n > 3 {
        return Err(OracleError::TooManyUsers(n));
    }
    if resolution == 0 {
        return Err(OracleError::Resolution);
    }
    if d.len() != n {
        return Err(OracleError::DirectionLength {
            expected: n,
            found: d.len(),
        });
    }
    if let Some(i) = d.weights().iter().position(|&m| m <= 0.0) {
        return Err(OracleError::ZeroWeight { user: i + 1 });
    }
    if cs.iter().any(|c| !c.fits(n)) {
        return Err(OracleError::ConstraintUsers { users: n });
    }
    let boxes: Vec<f64> = (0..n)
        .map(|i| {
            cs.iter()
                .filter(|c| c.users().contains(&i))
                .map(|c| c.bound())
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    if let Some(i) = boxes.iter().position(|b| b.is_infinite()) {
        return Err(OracleError::Unboxed { user: i + 1 });
    }
    let steps: Vec<f64> = boxes.iter().map(|b| b / resolution as f64).collect();
    let mu = d.weights();

    let mut best = (f64::NEG_INFINITY, vec![0.0; n]);
    let mut idx = vec![0usize; n];
    let mut p = vec![0.0; n];
    'outer: loop {
        for i in 0..n {
            p[i] = if idx[i] == resolution {
                boxes[i]
            } else {
                idx[i] as f64 * steps[i]
            };
        }
        let fits = cs.iter().all(|c| c.total_power(&p) <= c.bound() * (1.0 + 1e-12));
        if fits {
            let score = ch
                .sinr(&p)
                .iter()
                .zip(mu)
                .map(|(g, m)| g / m)
                .fold(f64::INFINITY, f64::min);
            if score > best.0 {
                best = (score, p.clone());
            }
        }
        for k in idx.iter_mut() {
            *k += 1;
            if *k <= resolution {
                continue 'outer;
            }
            *k = 0;
        }
        break;
    }

    let lipschitz = (0..n)
        .map(|i| {
            let gii = ch.gain(i, i);
            let s2 = ch.noise()[i];
            let cross: f64 = (0..n)
                .filter(|&j| j != i)
                .map(|j| gii * boxes[i] * ch.gain(i, j) / (s2 * s2))
                .sum();
            (gii / s2 + cross) / mu[i]
        })
        .fold(0.0, f64::max);
    let bisection = bisect_max_sinr(ch, d, cs)?.gamma();
    let step = steps.iter().copied().fold(0.0, f64::max);
    Ok(GridResult {
        gamma: best.0,
        power: best.1,
        step,
        lipschitz,
        bisection,
        coarse: best.0 < 0.95 * bisection,
    })
}
